//! Real-valued generators `dy/ds = G(s) y` for the K-level models.
//!
//! Density matrices are stored as `[ρ_aa (a < K); Re ρ_ab (a < b); Im ρ_ab (a < b)]`,
//! amplitudes as `[Re c; Im c]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::bath::{rates_from_elements, spectral_rate, BathParams};
use super::frame::FrameSample;

/// Index map of the real density-matrix coordinates.
#[derive(Clone, Debug)]
pub struct DensityLayout {
    k: usize,
    pairs: Vec<(usize, usize)>,
    pair_index: Vec<usize>,
}

impl DensityLayout {
    pub fn new(k: usize) -> Self {
        let mut pairs = Vec::new();
        let mut pair_index = vec![usize::MAX; k * k];
        for a in 0..k {
            for b in a + 1..k {
                pair_index[a * k + b] = pairs.len();
                pairs.push((a, b));
            }
        }
        Self { k, pairs, pair_index }
    }

    pub fn dim(&self) -> usize {
        self.k * self.k
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Coordinate of `Re ρ_ab` (`Re` of the diagonal when `a == b`).
    pub fn re(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == b {
            a
        } else {
            self.k + self.pair_index[a * self.k + b]
        }
    }

    /// Coordinate of `Im ρ_ab` for `a < b`.
    pub fn im(&self, a: usize, b: usize) -> usize {
        self.k + self.pairs.len() + self.pair_index[a * self.k + b]
    }

    /// Pure state `|0⟩⟨0|`.
    pub fn ground(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        y[0] = 1.0;
        y
    }

    pub fn populations<'a>(&self, y: &'a [f64]) -> &'a [f64] {
        &y[..self.k]
    }

    /// Frobenius norm of the off-diagonal part.
    pub fn coherence_norm(&self, y: &[f64]) -> f64 {
        (2.0 * y[self.k..].iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dissipator {
    None,
    Secular,
    Redfield,
}

/// Pauli rate generator `t_a W(s)`.
pub fn pauli(sample: &FrameSample, bath: &BathParams, ta: f64) -> DMatrix<f64> {
    rates_from_elements(&sample.energies, &sample.sz, bath) * ta
}

/// Bloch–Redfield superoperator on `E_cd = |c⟩⟨d|`, flattened as `((a K + b) K + c) K + d`.
fn redfield_tensor(sample: &FrameSample, bath: &BathParams, secular: bool) -> Vec<f64> {
    let k = sample.energies.len();
    let e = &sample.energies;
    let mut t = vec![0.0; k * k * k * k];
    if bath.eta == 0.0 {
        return t;
    }
    let mut gamma = vec![0.0; k * k];
    for n in 0..k {
        for c in 0..k {
            gamma[n * k + c] = spectral_rate(e[c] - e[n], bath);
        }
    }
    // Γᵢ[n, c] = Aᵢ[n, c] γ(E_c − E_n), P = Σᵢ Aᵢ Γᵢ
    let gam: Vec<DMatrix<f64>> = sample
        .sz
        .iter()
        .map(|a| DMatrix::from_fn(k, k, |n, c| a[(n, c)] * gamma[n * k + c]))
        .collect();
    let mut p = DMatrix::zeros(k, k);
    for (a, g) in sample.sz.iter().zip(&gam) {
        p += a * g;
    }
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * k + b) * k + c) * k + d;
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                for d in 0..k {
                    if secular && !((a == b && c == d) || (a == c && b == d)) {
                        continue;
                    }
                    let mut v = 0.0;
                    for (ai, gi) in sample.sz.iter().zip(&gam) {
                        v += gi[(a, c)] * ai[(d, b)] + ai[(a, c)] * gi[(b, d)];
                    }
                    v *= 0.5;
                    if b == d {
                        v -= 0.5 * p[(a, c)];
                    }
                    if a == c {
                        v -= 0.5 * p[(b, d)];
                    }
                    t[idx(a, b, c, d)] = v;
                }
            }
        }
    }
    t
}

/// Density generator: `t_a (−i2π[E, ρ] + D ρ) − [M, ρ]` in the real layout.
pub fn density(
    layout: &DensityLayout,
    sample: &FrameSample,
    bath: &BathParams,
    ta: f64,
    dissipator: Dissipator,
    nonadiabatic: bool,
) -> DMatrix<f64> {
    let k = layout.k;
    let mut t = match dissipator {
        Dissipator::None => vec![0.0; k * k * k * k],
        Dissipator::Secular => redfield_tensor(sample, bath, true),
        Dissipator::Redfield => redfield_tensor(sample, bath, false),
    };
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * k + b) * k + c) * k + d;
    for v in t.iter_mut() {
        *v *= ta;
    }
    if nonadiabatic {
        let m = &sample.nac;
        // −[M, E_cd]_ab = −M_ac δ_bd + δ_ac M_db
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    t[idx(a, b, c, b)] -= m[(a, c)];
                }
                for d in 0..k {
                    t[idx(a, b, a, d)] += m[(d, b)];
                }
            }
        }
    }
    let dim = layout.dim();
    let mut g = DMatrix::zeros(dim, dim);
    let sym_in: Vec<(usize, usize)> = (0..k).map(|a| (a, a)).chain(layout.pairs.iter().copied()).collect();
    for &(a, b) in &sym_in {
        let o = layout.re(a, b);
        for &(c, d) in &sym_in {
            let mut v = t[idx(a, b, c, d)];
            if c != d {
                v += t[idx(a, b, d, c)];
            }
            g[(o, layout.re(c, d))] = v;
        }
    }
    for &(a, b) in &layout.pairs {
        let o = layout.im(a, b);
        for &(c, d) in &layout.pairs {
            g[(o, layout.im(c, d))] = t[idx(a, b, c, d)] - t[idx(a, b, d, c)];
        }
        let w = 2.0 * PI * ta * (sample.energies[a] - sample.energies[b]);
        g[(layout.re(a, b), o)] += w;
        g[(o, layout.re(a, b))] -= w;
    }
    g
}

/// Closed amplitude generator `c' = (−i2π t_a E − M) c` in the `[Re c; Im c]` layout.
pub fn amplitude(sample: &FrameSample, ta: f64, nonadiabatic: bool) -> DMatrix<f64> {
    let k = sample.energies.len();
    let mut g = DMatrix::zeros(2 * k, 2 * k);
    for a in 0..k {
        let w = 2.0 * PI * ta * sample.energies[a];
        g[(a, k + a)] = w;
        g[(k + a, a)] = -w;
        if nonadiabatic {
            for b in 0..k {
                g[(a, b)] = -sample.nac[(a, b)];
                g[(k + a, k + b)] = -sample.nac[(a, b)];
            }
        }
    }
    g
}
