//! Full-state Schrödinger evolution in the computational basis.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::spectrum::TransverseIsing;

use super::integrator::{StepStats, A1, A2, C1, C2};

const KRYLOV_MAX: usize = 40;
const KRYLOV_TOL: f64 = 1e-13;

fn apply_complex(op: &TransverseIsing, v: &[Complex64], re: &mut [f64], im: &mut [f64], out: &mut [Complex64]) {
    let dim = v.len();
    let vr: Vec<f64> = v.iter().map(|c| c.re).collect();
    let vi: Vec<f64> = v.iter().map(|c| c.im).collect();
    op.apply(&vr, re);
    op.apply(&vi, im);
    for x in 0..dim {
        out[x] = Complex64::new(re[x], im[x]);
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(−iτH) v` by Lanczos, halving `τ` until the Krylov estimate converges.
pub fn expv(op: &TransverseIsing, tau: f64, v: &[Complex64]) -> Result<Vec<Complex64>> {
    let beta0 = norm(v);
    if beta0 == 0.0 {
        return Ok(v.to_vec());
    }
    let dim = v.len();
    let mmax = KRYLOV_MAX.min(dim);
    let mut q: Vec<Vec<Complex64>> = vec![v.iter().map(|x| x / beta0).collect()];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let (mut re, mut im) = (vec![0.0; dim], vec![0.0; dim]);
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let scale = op.norm_bound().max(1e-300);
    for j in 0..mmax {
        apply_complex(op, &q[j], &mut re, &mut im, &mut w);
        let a = dot(&q[j], &w).re;
        alpha.push(a);
        // full reorthogonalization (twice)
        for _ in 0..2 {
            for qi in &q {
                let c = dot(qi, &w);
                for (wx, qx) in w.iter_mut().zip(qi) {
                    *wx -= c * qx;
                }
            }
        }
        let b = norm(&w);
        let m = j + 1;
        let t = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let coeff: Vec<Complex64> = (0..m)
            .map(|r| {
                (0..m)
                    .map(|k| {
                        let u = eig.eigenvectors[(0, k)] * eig.eigenvectors[(r, k)];
                        Complex64::from_polar(u, -tau * eig.eigenvalues[k])
                    })
                    .sum()
            })
            .collect();
        let breakdown = b <= 1e-12 * scale || m == dim;
        let estimate = b * coeff[m - 1].norm();
        if breakdown || estimate < KRYLOV_TOL {
            let mut out = vec![Complex64::new(0.0, 0.0); dim];
            for (c, qi) in coeff.iter().zip(&q) {
                for (o, x) in out.iter_mut().zip(qi) {
                    *o += c * x;
                }
            }
            for o in out.iter_mut() {
                *o *= beta0;
            }
            return Ok(out);
        }
        if m == mmax {
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|x| x / b).collect());
    }
    if tau.abs() < 1e-300 {
        return Err(Error::Numerical("Krylov exponential failed to converge".into()));
    }
    let half = expv(op, 0.5 * tau, v)?;
    expv(op, 0.5 * tau, &half)
}

/// One fourth-order commutator-free Magnus step over `[s, s + h]`.
fn cfm4_step(
    base: &TransverseIsing,
    schedule: &Schedule,
    ta: f64,
    s: f64,
    h: f64,
    psi: &[Complex64],
) -> Result<Vec<Complex64>> {
    let (ea, eb) = (schedule.at(s + C1 * h), schedule.at(s + C2 * h));
    let mix = |wa: f64, wb: f64| {
        let mut op = base.clone();
        op.a_ghz = wa * ea.0 + wb * eb.0;
        op.b_ghz = wa * ea.1 + wb * eb.1;
        op
    };
    let tau = 2.0 * PI * ta * h;
    let first = expv(&mix(A2, A1), tau, psi)?;
    expv(&mix(A1, A2), tau, &first)
}

/// Integrates `dψ/ds = −i2π t_a H(s) ψ` and returns the state at each node.
pub fn evolve_full_state(
    base: &TransverseIsing,
    schedule: &Schedule,
    ta: f64,
    psi0: Vec<Complex64>,
    nodes: &[f64],
    tolerance: f64,
) -> Result<(Vec<Vec<Complex64>>, StepStats)> {
    let mut out = vec![psi0.clone()];
    let mut psi = psi0;
    let mut stats = StepStats {
        min_step: f64::INFINITY,
        ..Default::default()
    };
    let mut h = (nodes.get(1).copied().unwrap_or(1.0) - nodes[0]) * 0.1;
    for w in nodes.windows(2) {
        let (mut s, end) = (w[0], w[1]);
        while s < end {
            let last = h >= end - s;
            let step = if last { end - s } else { h };
            let full = cfm4_step(base, schedule, ta, s, step, &psi)?;
            let half = cfm4_step(base, schedule, ta, s, 0.5 * step, &psi)?;
            let two = cfm4_step(base, schedule, ta, s + 0.5 * step, 0.5 * step, &half)?;
            let err = full
                .iter()
                .zip(&two)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                / 15.0;
            let factor = if err == 0.0 {
                4.0
            } else {
                (0.9 * (tolerance / err).powf(0.2)).clamp(0.2, 4.0)
            };
            if err <= tolerance {
                psi = two;
                s = if last { end } else { s + step };
                stats.accepted += 1;
                stats.min_step = stats.min_step.min(step);
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * factor;
                if h < 1e-13 {
                    return Err(Error::Integrator {
                        s,
                        reason: format!("step size underflow (h = {h:e}, error estimate {err:e})"),
                    });
                }
            }
        }
        out.push(psi.clone());
    }
    Ok((out, stats))
}
