//! Closed and open annealing dynamics in the instantaneous eigenbasis.
//!
//! Open models follow `dρ/ds = t_a(−i2π[E, ρ] + Dρ) − [M, ρ]`, with `D` built from
//! the Ohmic rate and `σᶻᵢ` couplings and `M` the nonadiabatic rotation.

mod bath;
mod closed;
mod frame;
mod generator;
mod integrator;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use bath::{
    rates_from_elements, relaxation_gap, sigma_z_elements, spectral_rate, stationary_distribution,
    transition_rates, BathParams, DEFAULT_CUTOFF_GHZ, DEFAULT_ETA, DEFAULT_T_MK,
};
pub use closed::{evolve_full_state, expv};
pub use frame::{AdiabaticFrame, FrameSample, DEGENERATE_GAP_GHZ};
pub use generator::{DensityLayout, Dissipator};
pub use integrator::{integrate, Controls, LinearSystem, StepStats};

use crate::equilibrium::{boltzmann, LevelDistribution};
use crate::error::{invalid, Error, Result};
use crate::interp::Hermite;
use crate::ising::ProblemInstance;
use crate::schedule::Schedule;
use crate::spectrum::{track_spectrum, uniform_grid, SpectrumTrack, TransverseIsing};

/// Largest register evolved as a full state vector.
pub const MAX_FULL_STATE_QUBITS: usize = 14;
/// Levels within this of the minimum at `s = 1` count as ground.
pub const GROUND_TOL_GHZ: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Closed,
    Secular,
    Redfield,
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Self::Closed),
            "secular" => Ok(Self::Secular),
            "redfield" => Ok(Self::Redfield),
            _ => Err(invalid(format!("unknown model '{s}' (closed, secular, redfield)"))),
        }
    }
}

/// How closed evolution represents the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosedMode {
    /// Full state up to [`MAX_FULL_STATE_QUBITS`], truncated beyond.
    Auto,
    /// `2^n` amplitudes in the computational basis.
    Full,
    /// `K` amplitudes in the tracked eigenbasis.
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub ta_ns: f64,
    pub levels: usize,
    pub model: Model,
    pub grid_points: usize,
    pub step_tolerance: f64,
    pub include_nonadiabatic: bool,
    pub closed_mode: ClosedMode,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            ta_ns: 1000.0,
            levels: crate::spectrum::DEFAULT_LEVELS,
            model: Model::Secular,
            grid_points: 401,
            step_tolerance: 1e-8,
            include_nonadiabatic: false,
            closed_mode: ClosedMode::Auto,
        }
    }
}

impl DynamicsConfig {
    pub fn new(ta_ns: f64, model: Model) -> Self {
        Self {
            ta_ns,
            model,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ta_ns > 0.0 && self.ta_ns.is_finite()) {
            return Err(invalid(format!("ta must be positive, got {}", self.ta_ns)));
        }
        if self.levels < 2 {
            return Err(invalid("need at least two retained levels"));
        }
        if self.grid_points < 3 {
            return Err(invalid("grid needs at least three points"));
        }
        if !(self.step_tolerance > 0.0) {
            return Err(invalid("step tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub s_grid: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    pub retained_mass: Vec<f64>,
    pub coherence_norm: Option<Vec<f64>>,
    pub final_dist: LevelDistribution,
    pub p0_final: f64,
    /// Levels summed into `p0_final`.
    pub ground_levels: Vec<usize>,
    pub ta_ns: f64,
    pub model: Model,
    pub representation: &'static str,
    pub stats: StepStats,
    /// Largest `|‖ψ‖ − 1|` seen (full-state runs).
    pub norm_error: Option<f64>,
    /// Some retained pair came within [`DEGENERATE_GAP_GHZ`]; populations there are basis-ambiguous.
    pub degenerate_pairs: bool,
}

impl Trajectory {
    pub fn levels(&self) -> usize {
        self.populations[0].len()
    }

    pub fn to_csv(&self) -> String {
        let k = self.levels();
        let mut out = String::from("s");
        for i in 0..k {
            let _ = write!(out, ",P_{i}");
        }
        out.push_str(",retained_mass");
        if self.coherence_norm.is_some() {
            out.push_str(",coherence_norm");
        }
        out.push('\n');
        for (i, s) in self.s_grid.iter().enumerate() {
            let _ = write!(out, "{s}");
            for p in &self.populations[i] {
                let _ = write!(out, ",{p}");
            }
            let _ = write!(out, ",{}", self.retained_mass[i]);
            if let Some(c) = &self.coherence_norm {
                let _ = write!(out, ",{}", c[i]);
            }
            out.push('\n');
        }
        out
    }

    /// Ground probability at every grid point.
    pub fn p0_track(&self) -> Vec<f64> {
        self.populations
            .iter()
            .map(|p| self.ground_levels.iter().map(|&g| p[g]).sum())
            .collect()
    }
}

/// Spectrum track and eigenbasis frame shared by runs on one instance.
#[derive(Clone, Debug)]
pub struct PreparedAnneal {
    pub instance: ProblemInstance,
    pub schedule: Schedule,
    pub track: SpectrumTrack,
    pub frame: AdiabaticFrame,
}

impl PreparedAnneal {
    pub fn new(
        instance: &ProblemInstance,
        schedule: &Schedule,
        grid_points: usize,
        levels: usize,
    ) -> Result<Self> {
        instance.validate()?;
        let levels = levels.min(1usize << instance.n);
        let track = track_spectrum(instance, schedule, &uniform_grid(grid_points), levels)?;
        let frame = AdiabaticFrame::new(instance, schedule, &track)?;
        Ok(Self {
            instance: instance.clone(),
            schedule: schedule.clone(),
            track,
            frame,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.track.grid
    }

    pub fn levels(&self) -> usize {
        self.track.levels()
    }

    /// Levels within [`GROUND_TOL_GHZ`] of the lowest one at the last grid point.
    pub fn ground_levels(&self) -> Vec<usize> {
        let e = &self.track.slices[self.track.slices.len() - 1].energies;
        let e0 = e.iter().copied().fold(f64::INFINITY, f64::min);
        (0..e.len()).filter(|&i| e[i] - e0 <= GROUND_TOL_GHZ).collect()
    }

    /// Boltzmann distribution of the tracked levels at every grid point.
    pub fn equilibrium_track(&self, bath: &BathParams) -> Result<Vec<LevelDistribution>> {
        self.track
            .slices
            .iter()
            .map(|sl| Ok(boltzmann(&sl.energies, bath.temp())?.with_s(sl.s)))
            .collect()
    }

    pub fn closed(&self, cfg: &DynamicsConfig) -> Result<Trajectory> {
        cfg.validate()?;
        let full = match cfg.closed_mode {
            ClosedMode::Full => {
                if self.instance.n > MAX_FULL_STATE_QUBITS {
                    return Err(Error::UnsupportedSize {
                        n: self.instance.n,
                        limit: MAX_FULL_STATE_QUBITS,
                        hint: " (use the truncated closed mode)".into(),
                    });
                }
                true
            }
            ClosedMode::Auto => self.instance.n <= MAX_FULL_STATE_QUBITS,
            ClosedMode::Truncated => false,
        };
        if full {
            self.closed_full(cfg)
        } else {
            let sys = AmplitudeSystem { frame: &self.frame, ta: cfg.ta_ns };
            let k = self.levels();
            let mut y0 = vec![0.0; 2 * k];
            y0[0] = 1.0;
            let (states, stats) = integrate(&sys, y0, self.grid(), Controls::new(cfg.step_tolerance))?;
            let pops = states
                .iter()
                .map(|y| (0..k).map(|i| y[i] * y[i] + y[k + i] * y[k + i]).collect())
                .collect();
            self.finish(pops, None, cfg, Model::Closed, "truncated-amplitudes", stats, None)
        }
    }

    fn closed_full(&self, cfg: &DynamicsConfig) -> Result<Trajectory> {
        let base = TransverseIsing::new(&self.instance)?;
        let psi0: Vec<Complex64> = self.track.slices[0]
            .eigvecs
            .column(0)
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let (states, stats) = evolve_full_state(
            &base,
            &self.schedule,
            cfg.ta_ns,
            psi0,
            self.grid(),
            cfg.step_tolerance,
        )?;
        let mut norm_error = 0.0f64;
        let pops = states
            .iter()
            .zip(&self.track.slices)
            .map(|(psi, sl)| {
                let nrm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                norm_error = norm_error.max((nrm - 1.0).abs());
                (0..sl.levels())
                    .map(|k| {
                        let v = sl.eigvecs.column(k);
                        let amp: Complex64 = v.iter().zip(psi).map(|(a, b)| b * *a).sum();
                        amp.norm_sqr()
                    })
                    .collect()
            })
            .collect();
        self.finish(pops, None, cfg, Model::Closed, "full-state", stats, Some(norm_error))
    }

    pub fn open(&self, bath: &BathParams, cfg: &DynamicsConfig) -> Result<Trajectory> {
        cfg.validate()?;
        bath.validate()?;
        let ctl = Controls::new(cfg.step_tolerance);
        let k = self.levels();
        let density = match cfg.model {
            Model::Closed => {
                return Err(invalid("open evolution needs the secular or redfield model"));
            }
            Model::Secular if !cfg.include_nonadiabatic => None,
            Model::Secular => Some(Dissipator::Secular),
            Model::Redfield => Some(Dissipator::Redfield),
        };
        let Some(diss) = density else {
            let sys = PauliSystem { frame: &self.frame, bath, ta: cfg.ta_ns };
            let mut y0 = vec![0.0; k];
            y0[0] = 1.0;
            let (states, stats) = integrate(&sys, y0, self.grid(), ctl)?;
            let traj = self.finish(states, None, cfg, cfg.model, "populations", stats, None)?;
            return check_mass(traj, cfg.step_tolerance);
        };
        let layout = DensityLayout::new(k);
        let correction = if bath.eta > 0.0 && diss == Dissipator::Redfield {
            Some(coherence_correction(&self.frame, &layout, bath)?)
        } else {
            None
        };
        let sys = DensitySystem {
            frame: &self.frame,
            layout: &layout,
            bath,
            ta: cfg.ta_ns,
            diss,
            nonadiabatic: cfg.include_nonadiabatic,
            correction,
        };
        let (states, stats) = integrate(&sys, layout.ground(), self.grid(), ctl)?;
        let pops = states.iter().map(|y| layout.populations(y).to_vec()).collect();
        let coh = states.iter().map(|y| layout.coherence_norm(y)).collect();
        let traj = self.finish(pops, Some(coh), cfg, cfg.model, "density-matrix", stats, None)?;
        check_mass(traj, cfg.step_tolerance)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        populations: Vec<Vec<f64>>,
        coherence_norm: Option<Vec<f64>>,
        cfg: &DynamicsConfig,
        model: Model,
        representation: &'static str,
        stats: StepStats,
        norm_error: Option<f64>,
    ) -> Result<Trajectory> {
        let ground_levels = self.ground_levels();
        let last = populations[populations.len() - 1].clone();
        let p0_final = ground_levels.iter().map(|&g| last[g]).sum();
        let retained_mass = populations.iter().map(|p| p.iter().sum()).collect();
        let mut final_dist = LevelDistribution::from_probs(last).with_s(1.0);
        final_dist.s = self.grid().last().copied();
        Ok(Trajectory {
            s_grid: self.grid().to_vec(),
            populations,
            retained_mass,
            coherence_norm,
            final_dist,
            p0_final,
            ground_levels,
            ta_ns: cfg.ta_ns,
            model,
            representation,
            stats,
            norm_error,
            degenerate_pairs: self.frame.degenerate_pairs,
        })
    }
}

fn check_mass(traj: Trajectory, tol: f64) -> Result<Trajectory> {
    let limit = (100.0 * tol).max(1e-9);
    for (s, m) in traj.s_grid.iter().zip(&traj.retained_mass) {
        if (m - 1.0).abs() > limit {
            return Err(Error::TraceLeak { s: *s, leak: 1.0 - m });
        }
    }
    Ok(traj)
}

pub fn closed_evolve(
    instance: &ProblemInstance,
    schedule: &Schedule,
    cfg: &DynamicsConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    PreparedAnneal::new(instance, schedule, cfg.grid_points, cfg.levels)?.closed(cfg)
}

pub fn open_evolve(
    instance: &ProblemInstance,
    schedule: &Schedule,
    bath: &BathParams,
    cfg: &DynamicsConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    PreparedAnneal::new(instance, schedule, cfg.grid_points, cfg.levels)?.open(bath, cfg)
}

fn boltzmann_with_derivative(frame: &AdiabaticFrame, bath: &BathParams, s: f64) -> (Vec<f64>, Vec<f64>) {
    let e = frame.energies(s);
    let de = frame.energy_derivatives(s);
    let p = boltzmann(&e, bath.temp()).expect("finite energies").probs;
    let mean: f64 = p.iter().zip(&de).map(|(a, b)| a * b).sum();
    let dp = p
        .iter()
        .zip(&de)
        .map(|(pi, di)| -pi * (di - mean) / bath.f_t_ghz)
        .collect();
    (p, dp)
}

struct PauliSystem<'a> {
    frame: &'a AdiabaticFrame,
    bath: &'a BathParams,
    ta: f64,
}

impl LinearSystem for PauliSystem<'_> {
    fn dim(&self) -> usize {
        self.frame.levels()
    }

    fn generator(&self, s: f64) -> DMatrix<f64> {
        generator::pauli(&self.frame.sample(s), self.bath, self.ta)
    }

    fn reference(&self, s: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        (self.bath.eta > 0.0).then(|| boltzmann_with_derivative(self.frame, self.bath, s))
    }
}

struct AmplitudeSystem<'a> {
    frame: &'a AdiabaticFrame,
    ta: f64,
}

impl LinearSystem for AmplitudeSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.frame.levels()
    }

    fn generator(&self, s: f64) -> DMatrix<f64> {
        let sample = self.frame.sample(s);
        generator::amplitude(&sample, self.ta, true)
    }
}

struct DensitySystem<'a> {
    frame: &'a AdiabaticFrame,
    layout: &'a DensityLayout,
    bath: &'a BathParams,
    ta: f64,
    diss: Dissipator,
    nonadiabatic: bool,
    correction: Option<Hermite>,
}

impl LinearSystem for DensitySystem<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn generator(&self, s: f64) -> DMatrix<f64> {
        let sample = self.frame.sample(s);
        generator::density(self.layout, &sample, self.bath, self.ta, self.diss, self.nonadiabatic)
    }

    fn reference(&self, s: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.bath.eta == 0.0 {
            return None;
        }
        let k = self.frame.levels();
        let (p, dp) = boltzmann_with_derivative(self.frame, self.bath, s);
        let mut r = vec![0.0; self.layout.dim()];
        let mut dr = vec![0.0; self.layout.dim()];
        r[..k].copy_from_slice(&p);
        dr[..k].copy_from_slice(&dp);
        if let Some(c) = &self.correction {
            c.eval_into(s, &mut r[k..]);
            c.deriv_into(s, &mut dr[k..]);
        }
        Some((r, dr))
    }
}

/// Coherences of the stationary state of `−i2π[E, ·] + D` with populations pinned
/// at Boltzmann, tabulated on the frame grid.
fn coherence_correction(frame: &AdiabaticFrame, layout: &DensityLayout, bath: &BathParams) -> Result<Hermite> {
    let k = frame.levels();
    let dim = layout.dim();
    let nc = dim - k;
    let grid = frame.grid().to_vec();
    let mut data = Vec::with_capacity(grid.len() * nc);
    for &s in &grid {
        let sample = frame.sample(s);
        let g = generator::density(layout, &sample, bath, 1.0, Dissipator::Redfield, false);
        let p = boltzmann(&sample.energies, bath.temp())?.probs;
        let gcc = g.view((k, k), (nc, nc)).into_owned();
        let gcp = g.view((k, 0), (nc, k));
        let rhs = -(gcp * nalgebra::DVector::from_column_slice(&p));
        let x = gcc.lu().solve(&rhs).filter(|x| x.iter().all(|v| v.is_finite()));
        match x {
            Some(x) => data.extend(x.iter().copied()),
            None => data.extend(std::iter::repeat(0.0).take(nc)),
        }
    }
    Hermite::centered(grid, nc, data)
}

#[cfg(test)]
mod tests;
