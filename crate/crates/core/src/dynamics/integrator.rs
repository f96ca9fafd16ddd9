//! Adaptive exponential integrator for `y' = G(s) y` around a moving reference.
//!
//! With `y = r(s) + z` the deviation obeys `z' = G z + (G r − r')`, which is
//! advanced by a fourth-order commutator-free Magnus scheme on the bordered
//! generator. Relaxation towards the reference is handled by matrix
//! exponentials, so stiffness does not limit the step. Step size is chosen by
//! step doubling.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub trait LinearSystem {
    fn dim(&self) -> usize;
    fn generator(&self, s: f64) -> DMatrix<f64>;
    /// Quasi-stationary reference `(r(s), r'(s))`, if any.
    fn reference(&self, _s: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub min_step: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct Controls {
    pub tolerance: f64,
    pub min_step: f64,
    pub max_step: f64,
}

impl Controls {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            min_step: 1e-13,
            max_step: 0.05,
        }
    }
}

pub(super) const SQRT3_6: f64 = 0.288_675_134_594_812_9;
pub(super) const C1: f64 = 0.5 - SQRT3_6;
pub(super) const C2: f64 = 0.5 + SQRT3_6;
pub(super) const A1: f64 = 0.25 - SQRT3_6;
pub(super) const A2: f64 = 0.25 + SQRT3_6;

/// Generator at `s`, bordered with the reference forcing `G r − r'` when present.
fn bordered<S: LinearSystem>(sys: &S, s: f64) -> DMatrix<f64> {
    let g = sys.generator(s);
    let Some((r, dr)) = sys.reference(s) else {
        return g;
    };
    let d = sys.dim();
    let f = &g * DVector::from_column_slice(&r) - DVector::from_column_slice(&dr);
    let mut aug = DMatrix::zeros(d + 1, d + 1);
    aug.view_mut((0, 0), (d, d)).copy_from(&g);
    for i in 0..d {
        aug[(i, d)] = f[i];
    }
    aug
}

/// Fourth-order commutator-free Magnus step for `z' = G z + f`.
fn magnus_step<S: LinearSystem>(sys: &S, s0: f64, h: f64, y0: &[f64]) -> Vec<f64> {
    let d = sys.dim();
    let g1 = bordered(sys, s0 + C1 * h);
    let g2 = bordered(sys, s0 + C2 * h);
    let first = (&g1 * (A2 * h) + &g2 * (A1 * h)).exp();
    let second = (&g1 * (A1 * h) + &g2 * (A2 * h)).exp();
    let prop = second * first;
    match (sys.reference(s0), sys.reference(s0 + h)) {
        (Some((r0, _)), Some((r1, _))) => {
            let mut z0 = DVector::zeros(d + 1);
            for i in 0..d {
                z0[i] = y0[i] - r0[i];
            }
            z0[d] = 1.0;
            let z1 = prop * z0;
            (0..d).map(|i| r1[i] + z1[i]).collect()
        }
        _ => (prop * DVector::from_column_slice(y0)).iter().copied().collect(),
    }
}

/// Integrates from `nodes[0]` through every node, returning the state at each.
pub fn integrate<S: LinearSystem>(
    sys: &S,
    y0: Vec<f64>,
    nodes: &[f64],
    ctl: Controls,
) -> Result<(Vec<Vec<f64>>, StepStats)> {
    let mut out = Vec::with_capacity(nodes.len());
    out.push(y0.clone());
    let mut y = y0;
    let mut stats = StepStats {
        min_step: f64::INFINITY,
        ..Default::default()
    };
    let mut h = (nodes.get(1).copied().unwrap_or(1.0) - nodes[0]).min(ctl.max_step) * 0.1;
    for w in nodes.windows(2) {
        let (mut s, end) = (w[0], w[1]);
        while s < end {
            let last = h >= end - s;
            let step = if last { end - s } else { h };
            let full = magnus_step(sys, s, step, &y);
            let half = magnus_step(sys, s, 0.5 * step, &y);
            let two = magnus_step(sys, s + 0.5 * step, 0.5 * step, &half);
            let err = full
                .iter()
                .zip(&two)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / 15.0;
            if !err.is_finite() {
                return Err(Error::Integrator {
                    s,
                    reason: "non-finite state".into(),
                });
            }
            let factor = if err == 0.0 {
                4.0
            } else {
                (0.9 * (ctl.tolerance / err).powf(0.2)).clamp(0.2, 4.0)
            };
            if err <= ctl.tolerance {
                y = two;
                s = if last { end } else { s + step };
                stats.accepted += 1;
                stats.min_step = stats.min_step.min(step);
                if !last || factor < 1.0 {
                    h = (step * factor).min(ctl.max_step);
                }
            } else {
                stats.rejected += 1;
                h = step * factor;
                if h < ctl.min_step {
                    return Err(Error::Integrator {
                        s,
                        reason: format!("step size underflow (h = {h:e}, error estimate {err:e})"),
                    });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}
