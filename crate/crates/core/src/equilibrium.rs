//! Boltzmann distributions over truncated spectra.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{invalid, Result};

/// `k_B / h` in GHz per kelvin.
pub const KB_OVER_H_GHZ_PER_K: f64 = 20.836619;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TempParams {
    pub t_mk: f64,
    /// Thermal frequency `k_B T / h` in GHz.
    pub f_t_ghz: f64,
}

impl TempParams {
    pub fn from_millikelvin(t_mk: f64) -> Result<Self> {
        if !(t_mk > 0.0 && t_mk.is_finite()) {
            return Err(invalid(format!(
                "temperature must be positive, got {t_mk} mK (use ground_limit for T → 0)"
            )));
        }
        Ok(Self {
            t_mk,
            f_t_ghz: t_mk * 1e-3 * KB_OVER_H_GHZ_PER_K,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelDistribution {
    pub probs: Vec<f64>,
    /// Upper bound on the probability mass of levels beyond the retained ones.
    pub truncation_bound: f64,
    pub s: Option<f64>,
    pub t_mk: Option<f64>,
}

impl LevelDistribution {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        Self {
            probs,
            truncation_bound: 0.0,
            s: None,
            t_mk: None,
        }
    }

    pub fn levels(&self) -> usize {
        self.probs.len()
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(s) = self.s {
            let _ = writeln!(out, "# s={s}");
        }
        if let Some(t) = self.t_mk {
            let _ = writeln!(out, "# T_mK={t}");
        }
        let _ = writeln!(out, "# truncation_bound={}", self.truncation_bound);
        out.push_str("level_index,prob\n");
        for (i, p) in self.probs.iter().enumerate() {
            let _ = writeln!(out, "{i},{p}");
        }
        out
    }
}

/// `P_n ∝ exp(−(E_n − E_0)/f_T)` over the given (ascending) levels.
pub fn boltzmann(energies: &[f64], temp: TempParams) -> Result<LevelDistribution> {
    if energies.is_empty() {
        return Err(invalid("need at least one level"));
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(invalid("energies must be finite"));
    }
    if !(temp.f_t_ghz > 0.0) {
        return Err(invalid("temperature must be positive"));
    }
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies
        .iter()
        .map(|e| (-(e - e0) / temp.f_t_ghz).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let emax = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LevelDistribution {
        probs: weights.into_iter().map(|w| w / z).collect(),
        truncation_bound: energies.len() as f64 * (-(emax - e0) / temp.f_t_ghz).exp(),
        s: None,
        t_mk: Some(temp.t_mk),
    })
}

/// Zero-temperature limit: uniform over levels within `tol` of the minimum.
pub fn ground_limit(energies: &[f64], tol: f64) -> Result<LevelDistribution> {
    if energies.is_empty() {
        return Err(invalid("need at least one level"));
    }
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let ground: Vec<bool> = energies.iter().map(|e| e - e0 <= tol).collect();
    let g = ground.iter().filter(|&&b| b).count() as f64;
    Ok(LevelDistribution::from_probs(
        ground.iter().map(|&b| if b { 1.0 / g } else { 0.0 }).collect(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Metric {
    Tvd,
    Kl,
}

pub fn distance(p: &LevelDistribution, q: &LevelDistribution, metric: Metric) -> Result<f64> {
    distance_raw(&p.probs, &q.probs, metric)
}

pub fn distance_raw(p: &[f64], q: &[f64], metric: Metric) -> Result<f64> {
    if p.len() != q.len() {
        return Err(invalid(format!(
            "distributions have {} and {} levels",
            p.len(),
            q.len()
        )));
    }
    match metric {
        Metric::Tvd => Ok(tvd(p, q)),
        Metric::Kl => {
            let mut acc = 0.0;
            for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
                if pi > 0.0 {
                    if !(qi > 0.0) {
                        return Err(invalid(format!(
                            "KL support violation at level {i}: p = {pi}, q = {qi}"
                        )));
                    }
                    acc += pi * (pi / qi).ln();
                }
            }
            Ok(acc.max(0.0))
        }
    }
}

pub fn tvd(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
