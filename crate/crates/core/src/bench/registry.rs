use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{BathParams, ClosedMode, DynamicsConfig, Model, PreparedAnneal, MAX_FULL_STATE_QUBITS};
use crate::error::{invalid, Error, Result};
use crate::ising::ProblemInstance;
use crate::schedule::Schedule;
use crate::solvers::{Annealer, BetaShape, Readout, SaParams, SqaParams, SuccessEstimate, TransverseField};

/// Quantum annealing simulated by the dynamics module; `P0` is exact.
#[derive(Clone, Debug)]
pub struct QuantumAnnealer {
    pub open: bool,
    pub schedule: Schedule,
    pub bath: BathParams,
    pub config: DynamicsConfig,
}

impl Annealer for QuantumAnnealer {
    fn name(&self) -> &'static str {
        if self.open {
            "quantum-open"
        } else {
            "quantum-closed"
        }
    }

    fn budget_unit(&self) -> &'static str {
        "ns"
    }

    fn success(&self, instance: &ProblemInstance, budget: f64, _seed: u64, _ground: Option<f64>) -> Result<SuccessEstimate> {
        let mut cfg = self.config.clone();
        cfg.ta_ns = budget;
        if self.open && cfg.model == Model::Closed {
            cfg.model = Model::Secular;
        }
        if !self.open {
            cfg.model = Model::Closed;
        }
        cfg.validate()?;
        if !self.open && cfg.closed_mode == ClosedMode::Full && instance.n > MAX_FULL_STATE_QUBITS {
            return Err(Error::UnsupportedSize {
                n: instance.n,
                limit: MAX_FULL_STATE_QUBITS,
                hint: " (use the truncated closed mode)".into(),
            });
        }
        let prep = PreparedAnneal::new(instance, &self.schedule, cfg.grid_points, cfg.levels)?;
        let traj = if self.open {
            prep.open(&self.bath, &cfg)?
        } else {
            prep.closed(&cfg)?
        };
        Ok(SuccessEstimate::exact(traj.p0_final.clamp(0.0, 1.0)))
    }
}

/// Serializable solver block of a bench configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum SolverSpec {
    Sa {
        beta_initial: f64,
        beta_final: f64,
        shape: BetaShape,
        repetitions: usize,
    },
    Sqa {
        trotter_slices: usize,
        gamma0: f64,
        t_eff: f64,
        repetitions: usize,
        #[serde(default)]
        best_slice: bool,
    },
    QuantumOpen {
        model: Model,
        levels: usize,
        grid_points: usize,
        eta: f64,
        t_mk: f64,
        #[serde(default = "default_schedule_ref")]
        schedule: String,
    },
    QuantumClosed {
        levels: usize,
        grid_points: usize,
        #[serde(default)]
        full_state: bool,
        #[serde(default = "default_schedule_ref")]
        schedule: String,
    },
}

fn default_schedule_ref() -> String {
    "default".into()
}

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sa { .. } => "sa",
            Self::Sqa { .. } => "sqa",
            Self::QuantumOpen { .. } => "quantum-open",
            Self::QuantumClosed { .. } => "quantum-closed",
        }
    }

    /// Default parameters for a registered solver name.
    pub fn by_name(name: &str) -> Result<Self> {
        let sa = SaParams::default();
        Ok(match name {
            "sa" => Self::Sa {
                beta_initial: sa.beta_initial,
                beta_final: sa.beta_final,
                shape: sa.shape,
                repetitions: sa.repetitions,
            },
            "sqa" => Self::Sqa {
                trotter_slices: crate::solvers::DEFAULT_TROTTER_SLICES,
                gamma0: 3.0,
                t_eff: 0.05,
                repetitions: 100,
                best_slice: false,
            },
            "quantum-open" => Self::QuantumOpen {
                model: Model::Secular,
                levels: 12,
                grid_points: 401,
                eta: crate::dynamics::DEFAULT_ETA,
                t_mk: crate::dynamics::DEFAULT_T_MK,
                schedule: default_schedule_ref(),
            },
            "quantum-closed" => Self::QuantumClosed {
                levels: 12,
                grid_points: 401,
                full_state: false,
                schedule: default_schedule_ref(),
            },
            other => {
                return Err(invalid(format!(
                    "unknown solver '{other}' (known: {})",
                    Registry::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn build(&self) -> Result<Box<dyn Annealer>> {
        Ok(match self {
            Self::Sa { beta_initial, beta_final, shape, repetitions } => {
                let p = SaParams {
                    sweeps: 1,
                    beta_initial: *beta_initial,
                    beta_final: *beta_final,
                    shape: *shape,
                    repetitions: *repetitions,
                    seed: 0,
                };
                p.validate()?;
                Box::new(p)
            }
            Self::Sqa { trotter_slices, gamma0, t_eff, repetitions, best_slice } => {
                let mut p = SqaParams::new(TransverseField::Linear { gamma0: *gamma0 }, *t_eff);
                p.trotter_slices = *trotter_slices;
                p.repetitions = *repetitions;
                if *best_slice {
                    p.readout = Readout::BestSlice;
                }
                p.validate()?;
                Box::new(p)
            }
            Self::QuantumOpen { model, levels, grid_points, eta, t_mk, schedule } => {
                if *model == Model::Closed {
                    return Err(invalid("quantum-open needs an open model"));
                }
                let mut config = DynamicsConfig::new(1.0, *model);
                config.levels = *levels;
                config.grid_points = *grid_points;
                let bath = BathParams::ohmic(*t_mk, *eta)?;
                Box::new(QuantumAnnealer {
                    open: true,
                    schedule: Schedule::from_flag(schedule)?,
                    bath,
                    config,
                })
            }
            Self::QuantumClosed { levels, grid_points, full_state, schedule } => {
                let mut config = DynamicsConfig::new(1.0, Model::Closed);
                config.levels = *levels;
                config.grid_points = *grid_points;
                config.closed_mode = if *full_state { ClosedMode::Full } else { ClosedMode::Truncated };
                Box::new(QuantumAnnealer {
                    open: false,
                    schedule: Schedule::from_flag(schedule)?,
                    bath: BathParams::default(),
                    config,
                })
            }
        })
    }
}

/// Named annealing strategies selectable from configuration or the command line.
pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Annealer>>,
}

impl Registry {
    pub const NAMES: [&'static str; 4] = ["quantum-closed", "quantum-open", "sa", "sqa"];

    /// All four solvers with default parameters.
    pub fn with_defaults() -> Result<Self> {
        let mut r = Self { entries: BTreeMap::new() };
        for name in Self::NAMES {
            r.register(SolverSpec::by_name(name)?.build()?);
        }
        Ok(r)
    }

    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// Adds or replaces the entry under the annealer's own name.
    pub fn register(&mut self, annealer: Box<dyn Annealer>) {
        self.entries.insert(annealer.name(), annealer);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Annealer> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::InvalidArgument(format!("no solver named '{name}'")))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
