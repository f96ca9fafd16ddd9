//! Instantaneous spectra of `H(s) = −A(s) Σ σ^x_i + B(s) H_P`.
//!
//! The operator is applied matrix-free: the `σ^z` part is a precomputed
//! diagonal and each `σ^x_i` is a bit flip of the basis index. Eigenvectors are
//! real because `H(s)` is real symmetric in the computational basis.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::ising::ProblemInstance;
use crate::rng::rng_from_seed;
use crate::schedule::Schedule;

/// Largest qubit count the matrix-free operator accepts.
pub const MAX_OPERATOR_QUBITS: usize = 24;
/// Above this qubit count the operator is never densified.
pub const MAX_DENSE_QUBITS: usize = 12;
/// Dimensions up to this size are diagonalized densely by [`lowest_k_eigen`].
pub const DENSE_SOLVER_DIM: usize = 256;

pub const DEFAULT_LEVELS: usize = 12;

/// Seed of the Lanczos start vectors.
const START_SEED: u64 = 0x5EED_1A2C;

#[derive(Clone, Debug)]
pub struct TransverseIsing {
    n: usize,
    diag: Vec<f64>,
    pub a_ghz: f64,
    pub b_ghz: f64,
}

impl TransverseIsing {
    /// Operator with the problem diagonal precomputed; `A`, `B` are set per `s`.
    pub fn new(instance: &ProblemInstance) -> Result<Self> {
        if instance.n > MAX_OPERATOR_QUBITS {
            return Err(Error::UnsupportedSize {
                n: instance.n,
                limit: MAX_OPERATOR_QUBITS,
                hint: String::new(),
            });
        }
        Ok(Self {
            n: instance.n,
            diag: instance.diagonal()?,
            a_ghz: 0.0,
            b_ghz: 0.0,
        })
    }

    pub fn at(mut self, schedule: &Schedule, s: f64) -> Self {
        let (a, b) = schedule.at(s);
        self.a_ghz = a;
        self.b_ghz = b;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Classical energies `H_P` of the basis states (no schedule factor).
    pub fn problem_diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `out = H v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (a, b) = (self.a_ghz, self.b_ghz);
        let n = self.n;
        out.par_iter_mut()
            .with_min_len(4096)
            .enumerate()
            .for_each(|(x, o)| {
                let mut acc = b * self.diag[x] * v[x];
                if a != 0.0 {
                    let mut flip = 0.0;
                    for i in 0..n {
                        flip += v[x ^ (1 << i)];
                    }
                    acc -= a * flip;
                }
                *o = acc;
            });
    }

    /// `Σ_i σ^x_i v`.
    pub fn apply_transverse(&self, v: &[f64], out: &mut [f64]) {
        for (x, o) in out.iter_mut().enumerate() {
            *o = (0..self.n).map(|i| v[x ^ (1 << i)]).sum();
        }
    }

    /// Upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let dmax = self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        self.b_ghz * dmax + self.a_ghz * self.n as f64
    }

    pub fn dense(&self) -> Result<DMatrix<f64>> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::UnsupportedSize {
                n: self.n,
                limit: MAX_DENSE_QUBITS,
                hint: " (dense matrices are limited; use the matrix-free operator)".into(),
            });
        }
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for x in 0..dim {
            m[(x, x)] = self.b_ghz * self.diag[x];
            for i in 0..self.n {
                m[(x ^ (1 << i), x)] -= self.a_ghz;
            }
        }
        Ok(m)
    }
}

/// `H(s)` for the instance at one anneal fraction.
pub fn build_hamiltonian(
    instance: &ProblemInstance,
    schedule: &Schedule,
    s: f64,
) -> Result<TransverseIsing> {
    schedule.evaluate(s)?;
    Ok(TransverseIsing::new(instance)?.at(schedule, s))
}

/// Lowest `K` eigenpairs at one `s`.
#[derive(Clone, Debug)]
pub struct SpectrumSlice {
    pub s: f64,
    pub energies: Vec<f64>,
    /// `dim × K`, column `k` is the eigenvector of `energies[k]`.
    pub eigvecs: DMatrix<f64>,
}

impl SpectrumSlice {
    pub fn levels(&self) -> usize {
        self.energies.len()
    }
}

/// `K` smallest eigenpairs: dense for small dimensions, otherwise Lanczos
/// with locking and full reorthogonalization.
pub fn lowest_k_eigen(op: &TransverseIsing, k: usize) -> Result<SpectrumSlice> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(invalid(format!("K = {k} must be in 1..={dim}")));
    }
    let (energies, eigvecs) = if dim <= DENSE_SOLVER_DIM {
        dense_lowest(op, k)?
    } else {
        lanczos_lowest(op, k)?
    };
    Ok(SpectrumSlice {
        s: f64::NAN,
        energies,
        eigvecs,
    })
}

fn dense_lowest(op: &TransverseIsing, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::new(op.dense()?);
    let mut order: Vec<usize> = (0..op.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let energies = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(op.dim(), k);
    for (c, &i) in order[..k].iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok((energies, vecs))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = dot(v, v).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    // twice is enough
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            axpy(-c, q, v);
        }
    }
}

const LANCZOS_MAX_RESTARTS: usize = 200;

fn lanczos_lowest(op: &TransverseIsing, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = op.dim();
    let scale = op.norm_bound().max(1e-300);
    let lock_tol = 1e-11 * scale;
    let max_krylov = (3 * k + 40).clamp(60, 160).min(dim);
    let mut rng = rng_from_seed(START_SEED);
    let mut random_start = |locked: &[Vec<f64>]| {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
        orthogonalize(&mut v, locked);
        normalize(&mut v);
        v
    };

    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut start = random_start(&locked);
    let mut fresh = true;
    let mut worst_residual = f64::INFINITY;
    let mut w = vec![0.0; dim];

    for _restart in 0..LANCZOS_MAX_RESTARTS {
        let room = dim - locked.len();
        if room == 0 {
            break;
        }
        let m_max = max_krylov.min(room);
        let mut q: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        let mut last_beta = 0.0;
        for j in 0..m_max {
            op.apply(&q[j], &mut w);
            let a = dot(&q[j], &w);
            alpha.push(a);
            axpy(-a, &q[j], &mut w);
            if j > 0 {
                axpy(-beta[j - 1], &q[j - 1], &mut w);
            }
            orthogonalize(&mut w, &locked);
            orthogonalize(&mut w, &q);
            let b = normalize(&mut w);
            last_beta = b;
            if j + 1 == m_max || b < 1e-13 * scale {
                break;
            }
            beta.push(b);
            q.push(w.clone());
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let ritz = |idx: usize| -> Vec<f64> {
            let mut y = vec![0.0; dim];
            for (r, qr) in q.iter().enumerate() {
                axpy(eig.eigenvectors[(r, idx)], qr, &mut y);
            }
            normalize(&mut y);
            y
        };
        let residual = |idx: usize| (last_beta * eig.eigenvectors[(m - 1, idx)]).abs();

        let threshold = if locked_vals.len() >= k {
            locked_vals[k - 1]
        } else {
            f64::INFINITY
        };
        let mut newly = 0;
        let mut restart_from = None;
        for &idx in &order {
            let theta = eig.eigenvalues[idx];
            if theta > threshold + lock_tol.max(1e-12 * scale) {
                break;
            }
            if residual(idx) <= lock_tol {
                let mut y = ritz(idx);
                orthogonalize(&mut y, &locked);
                normalize(&mut y);
                locked.push(y);
                locked_vals.push(theta);
                newly += 1;
            } else {
                worst_residual = residual(idx);
                restart_from = Some(idx);
                break;
            }
        }
        sort_locked(&mut locked_vals, &mut locked);

        if let Some(idx) = restart_from {
            let mut v = ritz(idx);
            orthogonalize(&mut v, &locked);
            if normalize(&mut v) < 1e-8 {
                v = random_start(&locked);
            }
            start = v;
            fresh = false;
            continue;
        }
        // nothing pending below the threshold in this Krylov space
        if locked_vals.len() >= k && newly == 0 && fresh {
            break;
        }
        start = random_start(&locked);
        fresh = true;
    }

    if locked_vals.len() < k {
        return Err(Error::NoConvergence {
            iterations: LANCZOS_MAX_RESTARTS,
            residual: worst_residual,
        });
    }
    let mut vecs = DMatrix::zeros(dim, k);
    let mut hv = vec![0.0; dim];
    let mut max_res: f64 = 0.0;
    for c in 0..k {
        op.apply(&locked[c], &mut hv);
        axpy(-locked_vals[c], &locked[c], &mut hv);
        max_res = max_res.max(dot(&hv, &hv).sqrt());
        vecs.set_column(c, &DVector::from_column_slice(&locked[c]));
    }
    if max_res > 1e-8 * scale {
        return Err(Error::NoConvergence {
            iterations: LANCZOS_MAX_RESTARTS,
            residual: max_res,
        });
    }
    Ok((locked_vals[..k].to_vec(), vecs))
}

fn sort_locked(vals: &mut Vec<f64>, vecs: &mut Vec<Vec<f64>>) {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    *vals = order.iter().map(|&i| vals[i]).collect();
    *vecs = order.iter().map(|&i| std::mem::take(&mut vecs[i])).collect();
}

/// Slices on an ascending `s` grid, phase-aligned so that consecutive
/// eigenvectors of the same level have non-negative overlap. Levels are
/// ordered by energy; crossings are not followed diabatically.
#[derive(Clone, Debug)]
pub struct SpectrumTrack {
    pub grid: Vec<f64>,
    pub slices: Vec<SpectrumSlice>,
}

impl SpectrumTrack {
    pub fn levels(&self) -> usize {
        self.slices[0].levels()
    }

    /// Smallest gap between any two retained levels over the track.
    pub fn min_level_gap(&self) -> f64 {
        self.slices
            .iter()
            .flat_map(|sl| sl.energies.windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self, classical: Option<&[Vec<f64>]>) -> String {
        let k = self.levels();
        let mut out = String::from("s");
        for i in 0..k {
            let _ = write!(out, ",E_{i}");
        }
        if classical.is_some() {
            for i in 0..k {
                let _ = write!(out, ",C_{i}");
            }
        }
        out.push('\n');
        for (row, sl) in self.slices.iter().enumerate() {
            let _ = write!(out, "{}", sl.s);
            for e in &sl.energies {
                let _ = write!(out, ",{e}");
            }
            if let Some(c) = classical {
                for e in &c[row] {
                    let _ = write!(out, ",{e}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Uniform grid of `points` values covering `[0, 1]`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| i as f64 / (points - 1) as f64)
        .collect()
}

pub fn track_spectrum(
    instance: &ProblemInstance,
    schedule: &Schedule,
    s_grid: &[f64],
    k: usize,
) -> Result<SpectrumTrack> {
    if s_grid.len() < 2 || s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("s grid must be strictly increasing with ≥ 2 points"));
    }
    if s_grid[0] < 0.0 || s_grid[s_grid.len() - 1] > 1.0 {
        return Err(invalid("s grid must lie in [0, 1]"));
    }
    let base = TransverseIsing::new(instance)?;
    let mut slices = s_grid
        .par_iter()
        .map(|&s| {
            let op = base.clone().at(schedule, s);
            let mut sl = if s == 0.0 || s == 1.0 {
                endpoint_slice(&op, schedule, s, k)?
            } else {
                lowest_k_eigen(&op, k)?
            };
            sl.s = s;
            Ok(sl)
        })
        .collect::<Result<Vec<_>>>()?;
    align_phases(&mut slices)?;
    Ok(SpectrumTrack {
        grid: s_grid.to_vec(),
        slices,
    })
}

/// Offset along `∂ₛH` used to pick the one-sided limit basis at `s = 0` and `s = 1`.
const ENDPOINT_OFFSET: f64 = 1e-7;

/// Eigenvectors at an endpoint taken as the limit from inside `[0, 1]`, so that
/// degenerate multiplets (all of them at `s = 0`) are split the way the anneal
/// splits them. Energies are those of the unperturbed operator.
fn endpoint_slice(op: &TransverseIsing, schedule: &Schedule, s: f64, k: usize) -> Result<SpectrumSlice> {
    let (da, db) = schedule.derivative(s);
    let dir = if s == 0.0 { 1.0 } else { -1.0 };
    let mut shifted = op.clone();
    shifted.a_ghz = (op.a_ghz + dir * ENDPOINT_OFFSET * da).max(0.0);
    shifted.b_ghz = (op.b_ghz + dir * ENDPOINT_OFFSET * db).max(0.0);
    let mut sl = lowest_k_eigen(&shifted, k)?;
    let mut hv = vec![0.0; op.dim()];
    for c in 0..k {
        let v: Vec<f64> = sl.eigvecs.column(c).iter().copied().collect();
        op.apply(&v, &mut hv);
        sl.energies[c] = v.iter().zip(&hv).map(|(a, b)| a * b).sum();
    }
    Ok(sl)
}

fn align_phases(slices: &mut [SpectrumSlice]) -> Result<()> {
    let first = &mut slices[0];
    for c in 0..first.levels() {
        // deterministic convention at the first slice: largest component positive
        let col = first.eigvecs.column(c);
        let imax = col.iamax();
        if col[imax] < 0.0 {
            first.eigvecs.column_mut(c).neg_mut();
        }
    }
    for i in 1..slices.len() {
        let (prev, cur) = slices.split_at_mut(i);
        let prev = &prev[i - 1];
        let cur = &mut cur[0];
        let overlap = prev.eigvecs.transpose() * &cur.eigvecs;
        let k = cur.levels();
        let subspace = overlap.norm_squared() / k as f64;
        if subspace < 0.5 {
            return Err(Error::GridRefinement {
                s0: prev.s,
                s1: cur.s,
                overlap: subspace,
            });
        }
        for c in 0..k {
            if overlap[(c, c)] < 0.0 {
                cur.eigvecs.column_mut(c).neg_mut();
            }
        }
    }
    Ok(())
}

/// `B(s)` times the `K` lowest classical energies (repeats kept).
pub fn classical_levels(
    instance: &ProblemInstance,
    schedule: &Schedule,
    s: f64,
    k: usize,
) -> Result<Vec<f64>> {
    let (_, b) = schedule.evaluate(s)?;
    let mut diag = instance.diagonal()?;
    if k == 0 || k > diag.len() {
        return Err(invalid(format!("K = {k} must be in 1..={}", diag.len())));
    }
    diag.sort_by(f64::total_cmp);
    Ok(diag[..k].iter().map(|e| b * e).collect())
}
