//! Classical baselines: simulated annealing and path-integral simulated
//! quantum annealing, plus the binomial success estimator shared by all
//! solvers.

mod estimate;
mod metropolis;
mod sa;
mod sqa;

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::ising::{brute_force_ground, ProblemInstance, SpinConfig};

pub use estimate::{estimate_success, wilson_interval, SuccessEstimate, WILSON_Z};
pub use metropolis::MetropolisChain;
pub use sa::{run_sa, run_sa_against, BetaShape, SaParams};
pub use sqa::{
    inter_slice_coupling, run_sqa, run_sqa_against, Readout, SqaParams, TransverseField, DEFAULT_TROTTER_SLICES,
};

/// Largest problem for which success is judged against the exhaustive ground state.
pub const EXACT_GROUND_QUBITS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub energy: f64,
    pub config: SpinConfig,
    pub success: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundSource {
    Exhaustive,
    Supplied,
    BestFound,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleSet {
    pub solver: &'static str,
    pub samples: Vec<Sample>,
    pub ground_energy: f64,
    pub ground_source: GroundSource,
    pub estimate: SuccessEstimate,
    /// SQA readout used for every sample.
    pub readout: Option<String>,
}

impl SampleSet {
    pub(crate) fn assemble(
        solver: &'static str,
        instance: &ProblemInstance,
        finals: Vec<(f64, Vec<i8>)>,
        ground: Option<f64>,
        readout: Option<String>,
    ) -> Result<Self> {
        let (ground_energy, ground_source) = match ground {
            Some(e) => (e, GroundSource::Supplied),
            None if instance.n <= EXACT_GROUND_QUBITS => {
                (brute_force_ground(instance)?.energy, GroundSource::Exhaustive)
            }
            None => (
                finals.iter().map(|f| f.0).fold(f64::INFINITY, f64::min),
                GroundSource::BestFound,
            ),
        };
        let tol = crate::ising::DEGENERACY_TOL * (1.0 + ground_energy.abs());
        let samples: Vec<Sample> = finals
            .into_iter()
            .map(|(energy, spins)| Sample {
                energy,
                success: energy <= ground_energy + tol,
                config: SpinConfig { spins },
            })
            .collect();
        let hits = samples.iter().filter(|s| s.success).count();
        let estimate = estimate_success(hits, samples.len())?;
        Ok(Self {
            solver,
            samples,
            ground_energy,
            ground_source,
            estimate,
            readout,
        })
    }

    /// One row per repetition: `rep,energy,config,success`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rep,energy,config,success\n");
        for (i, s) in self.samples.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", s.energy, s.config.bitstring(), u8::from(s.success));
        }
        out
    }

    /// Lowest energy over all samples.
    pub fn best_energy(&self) -> f64 {
        self.samples.iter().map(|s| s.energy).fold(f64::INFINITY, f64::min)
    }
}

/// A solver that turns an annealing budget into a success estimate. The
/// budget is nanoseconds for quantum models and sweeps for classical ones.
pub trait Annealer: Send + Sync {
    fn name(&self) -> &'static str;

    fn budget_unit(&self) -> &'static str;

    /// `ground` overrides the reference energy used to judge success.
    fn success(
        &self,
        instance: &ProblemInstance,
        budget: f64,
        seed: u64,
        ground: Option<f64>,
    ) -> Result<SuccessEstimate>;
}
