use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Annealer, MetropolisChain, SampleSet, SuccessEstimate};
use crate::error::{invalid, Result};
use crate::ising::{energy_of_spins, ProblemInstance};
use crate::rng::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaShape {
    Linear,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub sweeps: usize,
    pub beta_initial: f64,
    pub beta_final: f64,
    pub shape: BetaShape,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            sweeps: 1000,
            beta_initial: 0.1,
            beta_final: 10.0,
            shape: BetaShape::Geometric,
            repetitions: 100,
            seed: 0,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(invalid("sweeps must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(invalid("repetitions must be at least 1"));
        }
        if !(self.beta_initial > 0.0 && self.beta_final >= self.beta_initial && self.beta_final.is_finite()) {
            return Err(invalid(format!(
                "need 0 < beta_initial <= beta_final, got {} and {}",
                self.beta_initial, self.beta_final
            )));
        }
        Ok(())
    }

    /// Inverse temperature used during sweep `k`.
    pub fn beta(&self, k: usize) -> f64 {
        if self.sweeps == 1 {
            return self.beta_final;
        }
        let t = k as f64 / (self.sweeps - 1) as f64;
        match self.shape {
            BetaShape::Linear => self.beta_initial + (self.beta_final - self.beta_initial) * t,
            BetaShape::Geometric => self.beta_initial * (self.beta_final / self.beta_initial).powf(t),
        }
    }
}

pub fn run_sa(instance: &ProblemInstance, params: &SaParams) -> Result<SampleSet> {
    run_sa_against(instance, params, None)
}

/// As [`run_sa`], judging success against `ground` when given.
pub fn run_sa_against(instance: &ProblemInstance, params: &SaParams, ground: Option<f64>) -> Result<SampleSet> {
    params.validate()?;
    instance.validate()?;
    let finals: Vec<(f64, Vec<i8>)> = (0..params.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut chain = MetropolisChain::new(instance, derive_seed(params.seed, &[rep as u64]));
            for k in 0..params.sweeps {
                chain.sweep(params.beta(k));
            }
            let spins = chain.spins().to_vec();
            (energy_of_spins(instance, &spins), spins)
        })
        .collect();
    SampleSet::assemble("sa", instance, finals, ground, None)
}

impl Annealer for SaParams {
    fn name(&self) -> &'static str {
        "sa"
    }

    fn budget_unit(&self) -> &'static str {
        "sweeps"
    }

    fn success(&self, instance: &ProblemInstance, budget: f64, seed: u64, ground: Option<f64>) -> Result<SuccessEstimate> {
        let p = SaParams {
            sweeps: budget.round().max(1.0) as usize,
            seed,
            ..self.clone()
        };
        Ok(run_sa_against(instance, &p, ground)?.estimate)
    }
}
