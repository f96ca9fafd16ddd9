use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::{Annealer, SampleSet, SuccessEstimate};
use crate::error::{invalid, Result};
use crate::ising::{energy_of_spins, ProblemInstance};
use crate::rng::{derive_seed, rng_from_seed};
use crate::schedule::Schedule;

pub const DEFAULT_TROTTER_SLICES: usize = 32;

/// Transverse field and problem scale along the anneal.
#[derive(Clone, Debug)]
pub enum TransverseField {
    /// `Γ = A(s)`, problem scale `B(s)`, both in GHz; `t_eff` is then in GHz too.
    Schedule(Schedule),
    /// `Γ = Γ₀(1 − s)` with unit problem scale; dimensionless `t_eff`.
    Linear { gamma0: f64 },
}

impl TransverseField {
    /// `(Γ, problem scale)` at `s`.
    pub fn at(&self, s: f64) -> (f64, f64) {
        match self {
            Self::Schedule(sch) => sch.at(s),
            Self::Linear { gamma0 } => (gamma0 * (1.0 - s), 1.0),
        }
    }

    fn describe(&self) -> String {
        match self {
            Self::Schedule(sch) => format!("schedule:{}", sch.name()),
            Self::Linear { gamma0 } => format!("linear:{gamma0}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    Slice(usize),
    /// Lowest-energy slice of each replica.
    BestSlice,
}

impl std::fmt::Display for Readout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Slice(k) => write!(f, "slice:{k}"),
            Self::BestSlice => write!(f, "best-slice"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SqaParams {
    pub sweeps: usize,
    pub trotter_slices: usize,
    pub field: TransverseField,
    pub t_eff: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub readout: Readout,
    /// Also flip each spin in all slices at once after every sweep.
    pub global_moves: bool,
}

impl SqaParams {
    pub fn new(field: TransverseField, t_eff: f64) -> Self {
        Self {
            sweeps: 1000,
            trotter_slices: DEFAULT_TROTTER_SLICES,
            field,
            t_eff,
            repetitions: 100,
            seed: 0,
            readout: Readout::Slice(0),
            global_moves: true,
        }
    }

    fn s_of(&self, k: usize) -> f64 {
        if self.sweeps == 1 {
            1.0
        } else {
            k as f64 / (self.sweeps - 1) as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.repetitions == 0 {
            return Err(invalid("sweeps and repetitions must be at least 1"));
        }
        if self.trotter_slices < 2 {
            return Err(invalid("need at least two Trotter slices"));
        }
        if !(self.t_eff > 0.0 && self.t_eff.is_finite()) {
            return Err(invalid(format!("effective temperature must be positive, got {}", self.t_eff)));
        }
        if let Readout::Slice(k) = self.readout {
            if k >= self.trotter_slices {
                return Err(invalid(format!("readout slice {k} out of {}", self.trotter_slices)));
            }
        }
        if let TransverseField::Linear { gamma0 } = self.field {
            if !(gamma0 >= 0.0 && gamma0.is_finite()) {
                return Err(invalid("gamma0 must be non-negative"));
            }
        }
        for k in 0..self.sweeps {
            let (g, _) = self.field.at(self.s_of(k));
            inter_slice_coupling(g, self.trotter_slices, self.t_eff)?;
        }
        Ok(())
    }
}

/// `J⊥ = −½ ln tanh(Γ/(P·T))`; `None` means infinite coupling (`Γ = 0`).
pub fn inter_slice_coupling(gamma: f64, slices: usize, t_eff: f64) -> Result<Option<f64>> {
    let x = gamma / (slices as f64 * t_eff);
    if x == 0.0 {
        return Ok(None);
    }
    let t = x.tanh();
    if t >= 1.0 {
        return Err(invalid(format!(
            "tanh(Γ/(P·T)) = tanh({x:.3}) rounds to 1 and the slices decouple; \
             increase trotter_slices or t_eff, or lower the transverse field"
        )));
    }
    Ok(Some(-0.5 * t.ln()))
}

pub fn run_sqa(instance: &ProblemInstance, params: &SqaParams) -> Result<SampleSet> {
    run_sqa_against(instance, params, None)
}

pub fn run_sqa_against(instance: &ProblemInstance, params: &SqaParams, ground: Option<f64>) -> Result<SampleSet> {
    params.validate()?;
    instance.validate()?;
    let adj = instance.adjacency();
    let finals: Vec<(f64, Vec<i8>)> = (0..params.repetitions)
        .into_par_iter()
        .map(|rep| replica(instance, &adj, params, derive_seed(params.seed, &[rep as u64])))
        .collect();
    let readout = format!("{}; field {}", params.readout, params.field.describe());
    SampleSet::assemble("sqa", instance, finals, ground, Some(readout))
}

fn replica(instance: &ProblemInstance, adj: &[Vec<(usize, f64)>], p: &SqaParams, seed: u64) -> (f64, Vec<i8>) {
    let n = instance.n;
    let m = p.trotter_slices;
    let mut rng = rng_from_seed(seed);
    // every slice starts from the same random configuration
    let start: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    let mut sp: Vec<i8> = (0..m).flat_map(|_| start.iter().copied()).collect();
    let field = |sp: &[i8], k: usize, i: usize| {
        instance.h[i]
            + adj[i]
                .iter()
                .map(|&(j, jij)| jij * f64::from(sp[k * n + j]))
                .sum::<f64>()
    };
    for sweep in 0..p.sweeps {
        let (gamma, scale) = p.field.at(p.s_of(sweep));
        let w = scale / (m as f64 * p.t_eff);
        let jp = inter_slice_coupling(gamma, m, p.t_eff).expect("validated");
        if let Some(jp) = jp {
            for k in 0..m {
                let (up, down) = ((k + 1) % m, (k + m - 1) % m);
                for i in 0..n {
                    let s = f64::from(sp[k * n + i]);
                    let nb = f64::from(sp[up * n + i]) + f64::from(sp[down * n + i]);
                    let ds = 2.0 * s * (jp * nb - w * field(&sp, k, i));
                    if ds <= 0.0 || rng.gen::<f64>() < (-ds).exp() {
                        sp[k * n + i] = -sp[k * n + i];
                    }
                }
            }
        }
        if p.global_moves || jp.is_none() {
            for i in 0..n {
                let ds: f64 = (0..m)
                    .map(|k| -2.0 * f64::from(sp[k * n + i]) * w * field(&sp, k, i))
                    .sum();
                if ds <= 0.0 || rng.gen::<f64>() < (-ds).exp() {
                    for k in 0..m {
                        sp[k * n + i] = -sp[k * n + i];
                    }
                }
            }
        }
    }
    let slice = |k: usize| {
        let cfg = sp[k * n..(k + 1) * n].to_vec();
        (energy_of_spins(instance, &cfg), cfg)
    };
    match p.readout {
        Readout::Slice(k) => slice(k),
        Readout::BestSlice => (0..m)
            .map(slice)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("at least two slices"),
    }
}

impl Annealer for SqaParams {
    fn name(&self) -> &'static str {
        "sqa"
    }

    fn budget_unit(&self) -> &'static str {
        "sweeps"
    }

    fn success(&self, instance: &ProblemInstance, budget: f64, seed: u64, ground: Option<f64>) -> Result<SuccessEstimate> {
        let p = SqaParams {
            sweeps: budget.round().max(1.0) as usize,
            seed,
            ..self.clone()
        };
        Ok(run_sqa_against(instance, &p, ground)?.estimate)
    }
}
