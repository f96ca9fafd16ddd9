//! Ohmic bath spectrum and Pauli transition rates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::equilibrium::TempParams;
use crate::error::{invalid, Result};
use crate::spectrum::SpectrumSlice;
use crate::ising::ProblemInstance;

pub const DEFAULT_ETA: f64 = 0.24;
pub const DEFAULT_CUTOFF_GHZ: f64 = 1000.0;
pub const DEFAULT_T_MK: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    pub t_mk: f64,
    pub f_t_ghz: f64,
    pub eta: f64,
    pub cutoff_ghz: f64,
}

impl BathParams {
    pub fn new(temp: TempParams, eta: f64, cutoff_ghz: f64) -> Result<Self> {
        let bath = Self {
            t_mk: temp.t_mk,
            f_t_ghz: temp.f_t_ghz,
            eta,
            cutoff_ghz,
        };
        bath.validate()?;
        Ok(bath)
    }

    pub fn ohmic(t_mk: f64, eta: f64) -> Result<Self> {
        Self::new(TempParams::from_millikelvin(t_mk)?, eta, DEFAULT_CUTOFF_GHZ)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("eta must be non-negative, got {}", self.eta)));
        }
        if !(self.cutoff_ghz > 0.0) {
            return Err(invalid("cutoff must be positive"));
        }
        if !(self.f_t_ghz > 0.0 && self.f_t_ghz.is_finite()) {
            return Err(invalid("temperature must be positive"));
        }
        Ok(())
    }

    pub fn temp(&self) -> TempParams {
        TempParams {
            t_mk: self.t_mk,
            f_t_ghz: self.f_t_ghz,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }
}

impl Default for BathParams {
    fn default() -> Self {
        Self::ohmic(DEFAULT_T_MK, DEFAULT_ETA).expect("default bath is valid")
    }
}

/// Rate in ns⁻¹ for a transition releasing energy `f` (GHz) into the bath.
pub fn spectral_rate(f: f64, bath: &BathParams) -> f64 {
    if bath.eta == 0.0 {
        return 0.0;
    }
    let two_pi_eta = 2.0 * std::f64::consts::PI * bath.eta;
    let x = f / bath.f_t_ghz;
    let cut = (-f.abs() / bath.cutoff_ghz).exp();
    // f / (1 - e^{-x}) = f_T * x / (1 - e^{-x}) = f_T * x / -expm1(-x)
    let bose = if x.abs() < 1e-8 {
        1.0 + 0.5 * x
    } else {
        x / -(-x).exp_m1()
    };
    two_pi_eta * bath.f_t_ghz * bose * cut
}

/// `⟨m|σᶻᵢ|n⟩` for every qubit, from the slice eigenvectors (basis-index bit `i` set ⇒ σ = −1).
pub fn sigma_z_elements(slice: &SpectrumSlice, n: usize) -> Result<Vec<DMatrix<f64>>> {
    let v = &slice.eigvecs;
    if v.ncols() == 0 || v.nrows() != 1usize << n {
        return Err(invalid("slice has no eigenvectors for this instance"));
    }
    Ok((0..n)
        .map(|i| {
            let mut zv = v.clone();
            for (x, mut row) in zv.row_iter_mut().enumerate() {
                if (x >> i) & 1 == 1 {
                    row.neg_mut();
                }
            }
            v.transpose() * zv
        })
        .collect())
}

/// Pauli generator: `W[(m, n)]` is the rate n → m, columns sum to zero.
pub fn rates_from_elements(energies: &[f64], sz: &[DMatrix<f64>], bath: &BathParams) -> DMatrix<f64> {
    let k = energies.len();
    let mut w = DMatrix::zeros(k, k);
    for n in 0..k {
        for m in 0..k {
            if m == n {
                continue;
            }
            let g = spectral_rate(energies[n] - energies[m], bath);
            let mut r = 0.0;
            for a in sz {
                r += a[(m, n)] * a[(m, n)];
            }
            w[(m, n)] = r * g;
        }
    }
    for n in 0..k {
        let out: f64 = (0..k).filter(|&m| m != n).map(|m| w[(m, n)]).sum();
        w[(n, n)] = -out;
    }
    w
}

pub fn transition_rates(
    instance: &ProblemInstance,
    slice: &SpectrumSlice,
    bath: &BathParams,
) -> Result<DMatrix<f64>> {
    let sz = sigma_z_elements(slice, instance.n)?;
    Ok(rates_from_elements(&slice.energies, &sz, bath))
}

/// Normalized null vector of a rate matrix by Grassmann–Taksar–Heyman elimination.
/// Subtraction-free, so nearly decoupled blocks keep full relative accuracy.
pub fn stationary_distribution(w: &DMatrix<f64>) -> Result<Vec<f64>> {
    let k = w.nrows();
    // q[(i, j)] is the rate i → j
    let mut q = w.transpose();
    for last in (1..k).rev() {
        let out: f64 = (0..last).map(|j| q[(last, j)]).sum();
        if !(out > 0.0) {
            return Err(crate::Error::Numerical("rate matrix has no unique stationary state".into()));
        }
        for i in 0..last {
            q[(i, last)] /= out;
        }
        for i in 0..last {
            for j in 0..last {
                if i != j {
                    q[(i, j)] += q[(i, last)] * q[(last, j)];
                }
            }
        }
    }
    let mut p = vec![0.0; k];
    p[0] = 1.0;
    for j in 1..k {
        p[j] = (0..j).map(|i| p[i] * q[(i, j)]).sum();
    }
    let z: f64 = p.iter().sum();
    Ok(p.into_iter().map(|x| x / z).collect())
}

/// Smallest nonzero relaxation rate of `W` after symmetrizing with the Boltzmann weights.
pub fn relaxation_gap(w: &DMatrix<f64>, energies: &[f64], bath: &BathParams) -> Result<f64> {
    let k = w.nrows();
    if energies.len() != k {
        return Err(invalid("energies and rate matrix disagree in size"));
    }
    let mut sym = DMatrix::zeros(k, k);
    for m in 0..k {
        for n in 0..k {
            sym[(m, n)] = if m == n {
                w[(n, n)]
            } else {
                // W_mn sqrt(p_n / p_m) is symmetric by detailed balance
                let r = (-(energies[n] - energies[m]) / (2.0 * bath.f_t_ghz)).exp();
                0.5 * (w[(m, n)] * r + w[(n, m)] / r)
            };
        }
    }
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().map(|x| -x).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev.get(1).copied().unwrap_or(0.0).max(0.0))
}
