use serde::Serialize;

use crate::error::{invalid, Result};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuccessEstimate {
    pub p0: f64,
    pub lo: f64,
    pub hi: f64,
    /// `None` for exact (non-sampled) probabilities.
    pub successes: Option<usize>,
    pub trials: Option<usize>,
}

impl SuccessEstimate {
    /// An exactly known probability; the interval collapses to the point.
    pub fn exact(p0: f64) -> Self {
        Self {
            p0,
            lo: p0,
            hi: p0,
            successes: None,
            trials: None,
        }
    }
}

pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn estimate_success(successes: usize, trials: usize) -> Result<SuccessEstimate> {
    if trials == 0 {
        return Err(invalid("no samples"));
    }
    if successes > trials {
        return Err(invalid(format!("{successes} successes out of {trials} trials")));
    }
    let (lo, hi) = wilson_interval(successes, trials, WILSON_Z);
    Ok(SuccessEstimate {
        p0: successes as f64 / trials as f64,
        lo,
        hi,
        successes: Some(successes),
        trials: Some(trials),
    })
}
