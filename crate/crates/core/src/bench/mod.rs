//! Benchmark orchestration: `t_c = t_a / P0` records over instance ensembles,
//! the optimal-`t_a` envelope, regime classification of `P0(t_a)` curves and
//! scaling fits of `ln t_c` against `√N`.

mod analysis;
mod registry;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ising::{brute_force_ground, chimera_instance, ProblemInstance};
use crate::rng::derive_seed;
use crate::solvers::{run_sa, Annealer, SaParams, SuccessEstimate, EXACT_GROUND_QUBITS};

pub use analysis::{
    aggregate, classify_regimes, fit_slope, optimal_curve, optimal_ta, quantile, CurvePoint, OptimalTa, Regime,
    RegimePoint, RegimeReport, ScalingFit, TaPolicy, COHERENT_TOL, QUASISTATIC_RESIDUAL,
};
pub use registry::{QuantumAnnealer, Registry, SolverSpec};

pub const RESULTS_HEADER: &str = "solver,instance_hash,N,ta,P0,P0_lo,P0_hi,tc,censored";

/// Sweeps of the reference SA run that fixes the best-known energy beyond
/// exhaustive sizes.
pub const REFERENCE_SWEEPS: usize = 20_000;
pub const REFERENCE_REPETITIONS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tc {
    pub value: f64,
    /// `value` is a lower bound because no repetition succeeded.
    pub censored: bool,
}

/// `t_c = t_a / P0`; with `P0 = 0` the Wilson upper bound gives a censored lower bound.
pub fn compute_tc(ta: f64, est: &SuccessEstimate) -> Result<Tc> {
    if !(ta > 0.0 && ta.is_finite()) {
        return Err(invalid(format!("annealing time must be positive, got {ta}")));
    }
    if !(0.0..=1.0).contains(&est.p0) {
        return Err(invalid(format!("P0 = {} outside [0, 1]", est.p0)));
    }
    if est.p0 > 0.0 {
        return Ok(Tc { value: ta / est.p0, censored: false });
    }
    if est.hi > 0.0 {
        return Ok(Tc { value: ta / est.hi, censored: true });
    }
    Err(Error::Censored(format!("P0 = 0 at ta = {ta} with no upper confidence bound")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub solver: String,
    pub instance_hash: String,
    pub n: usize,
    pub ta: f64,
    pub p0: f64,
    pub p0_lo: f64,
    pub p0_hi: f64,
    pub tc: f64,
    pub censored: bool,
}

impl BenchmarkRecord {
    pub fn new(solver: &str, instance: &ProblemInstance, ta: f64, est: &SuccessEstimate) -> Result<Self> {
        let tc = compute_tc(ta, est)?;
        Ok(Self {
            solver: solver.into(),
            instance_hash: instance.content_hash(),
            n: instance.n,
            ta,
            p0: est.p0,
            p0_lo: est.lo,
            p0_hi: est.hi,
            tc: tc.value,
            censored: tc.censored,
        })
    }
}

pub fn records_to_csv(records: &[BenchmarkRecord]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.solver,
            r.instance_hash,
            r.n,
            r.ta,
            r.p0,
            r.p0_lo,
            r.p0_hi,
            r.tc,
            u8::from(r.censored)
        );
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<BenchmarkRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != RESULTS_HEADER {
        return Err(Error::Validation {
            row: 0,
            reason: format!("header must be '{RESULTS_HEADER}'"),
        });
    }
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Validation {
            row: row + 1,
            reason: format!("unparseable {what}"),
        };
        let num = |i: usize, what: &str| -> Result<f64> { rec[i].parse::<f64>().map_err(|_| bad(what)) };
        out.push(BenchmarkRecord {
            solver: rec[0].to_string(),
            instance_hash: rec[1].to_string(),
            n: rec[2].parse().map_err(|_| bad("N"))?,
            ta: num(3, "ta")?,
            p0: num(4, "P0")?,
            p0_lo: num(5, "P0_lo")?,
            p0_hi: num(6, "P0_hi")?,
            tc: num(7, "tc")?,
            censored: match &rec[8] {
                "0" | "false" => false,
                "1" | "true" => true,
                _ => return Err(bad("censored flag")),
            },
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub solver: SolverSpec,
    pub sizes: Vec<usize>,
    pub ta_ladder: Vec<f64>,
    pub ensemble: usize,
    pub seed: u64,
    #[serde(default = "half")]
    pub quantile: f64,
}

fn half() -> f64 {
    0.5
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.ta_ladder.is_empty() || self.ensemble == 0 {
            return Err(invalid("need at least one size, one annealing time and one instance"));
        }
        for &n in &self.sizes {
            crate::ising::chimera_for_size(n)?;
        }
        if self.ta_ladder.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(invalid("annealing times must be positive"));
        }
        if !(0.0..=1.0).contains(&self.quantile) {
            return Err(invalid("quantile must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Instance `index` of size `n`; independent of every other task.
    pub fn instance(&self, n: usize, index: usize) -> Result<ProblemInstance> {
        chimera_instance(n, derive_seed(self.seed, &[n as u64, index as u64]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskFailure {
    pub n: usize,
    pub instance: usize,
    pub ta: f64,
    pub error: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BenchOutput {
    pub records: Vec<BenchmarkRecord>,
    pub failures: Vec<TaskFailure>,
}

impl BenchOutput {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Ground energy used to judge classical success: exhaustive for small `n`,
/// otherwise the best energy of a long reference SA run.
pub fn reference_energy(instance: &ProblemInstance, seed: u64) -> Result<f64> {
    if instance.n <= EXACT_GROUND_QUBITS {
        return Ok(brute_force_ground(instance)?.energy);
    }
    let p = SaParams {
        sweeps: REFERENCE_SWEEPS,
        repetitions: REFERENCE_REPETITIONS,
        seed,
        ..SaParams::default()
    };
    Ok(run_sa(instance, &p)?.best_energy())
}

/// Runs every `(size, instance, t_a)` task. Records come out sorted by that
/// key regardless of completion order; failed tasks are collected, not fatal.
pub fn scaling_run(config: &BenchConfig, annealer: &dyn Annealer) -> Result<BenchOutput> {
    config.validate()?;
    let mut tasks = Vec::new();
    for &n in &config.sizes {
        for idx in 0..config.ensemble {
            for (k, &ta) in config.ta_ladder.iter().enumerate() {
                tasks.push((n, idx, k, ta));
            }
        }
    }
    let classical = annealer.budget_unit() == "sweeps";
    let prepared: Vec<Result<(ProblemInstance, Option<f64>)>> = config
        .sizes
        .iter()
        .flat_map(|&n| (0..config.ensemble).map(move |idx| (n, idx)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(n, idx)| {
            let inst = config.instance(n, idx)?;
            let ground = if classical {
                Some(reference_energy(&inst, derive_seed(config.seed, &[n as u64, idx as u64, u64::MAX]))?)
            } else {
                None
            };
            Ok((inst, ground))
        })
        .collect();
    let per_size = config.ensemble * config.ta_ladder.len();
    let results: Vec<std::result::Result<BenchmarkRecord, TaskFailure>> = tasks
        .par_iter()
        .enumerate()
        .map(|(t, &(n, idx, k, ta))| {
            let fail = |e: Error| TaskFailure { n, instance: idx, ta, error: e.to_string() };
            let (inst, ground) = prepared[t / config.ta_ladder.len()].as_ref().map_err(|e| TaskFailure {
                n,
                instance: idx,
                ta,
                error: e.to_string(),
            })?;
            let seed = derive_seed(config.seed, &[n as u64, idx as u64, k as u64]);
            let est = annealer.success(inst, ta, seed, *ground).map_err(fail)?;
            BenchmarkRecord::new(annealer.name(), inst, ta, &est).map_err(fail)
        })
        .collect();
    debug_assert_eq!(results.len(), per_size * config.sizes.len());
    let mut out = BenchOutput::default();
    for r in results {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}
