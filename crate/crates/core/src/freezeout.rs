//! Quasistatic, freezing and frozen regions of a trajectory, the freeze-out
//! point `s*`, and the relaxation-rate fit `γ(s) ≈ γ₀ e^{−α s}`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::{rates_from_elements, relaxation_gap, sigma_z_elements, BathParams, Trajectory};
use crate::equilibrium::{boltzmann, tvd, LevelDistribution};
use crate::error::{invalid, Error, Result};
use crate::interp::Hermite;
use crate::ising::ProblemInstance;
use crate::schedule::Schedule;
use crate::spectrum::{build_hamiltonian, lowest_k_eigen, SpectrumTrack};

pub const DEFAULT_TOL_EQ: f64 = 0.02;
pub const DEFAULT_TOL_FROZEN: f64 = 0.01;
pub const DEFAULT_FIT_START: f64 = 0.4;
pub const MIN_FIT_POINTS: usize = 8;
pub const KAPPA_STEP: f64 = 1e-3;
/// Decay exponents at or below this magnitude count as no decay.
pub const ALPHA_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "s", rename_all = "kebab-case")]
pub enum SStarPrediction {
    Inside(f64),
    /// The estimate is below 0; reported as 0.
    BeforeStart,
    /// The estimate is above 1, or rates do not decay.
    NoFreezeout,
}

impl SStarPrediction {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Inside(s) => Some(*s),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelaxationFit {
    pub gamma0_ns: f64,
    pub alpha: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreezeoutReport {
    pub s_star: f64,
    pub s_eq_end: f64,
    pub s_frozen_start: f64,
    pub tvd_at_star: f64,
    /// No single freeze-out point describes the final state.
    pub distributed_freezeout: bool,
    pub frozen_empty: bool,
    pub tol_eq: f64,
    pub tol_frozen: f64,
    pub gamma0_ns: Option<f64>,
    pub alpha: Option<f64>,
    pub fit: Option<RelaxationFit>,
    pub kappa: Option<f64>,
    pub predicted_s_star: Option<SStarPrediction>,
    pub predicted_p0_slope: Option<f64>,
    pub notes: Vec<String>,
}

/// Region detection against the Boltzmann track on the same grid.
pub fn detect_regions(
    traj: &Trajectory,
    eq_track: &[LevelDistribution],
    tol_eq: f64,
    tol_frozen: f64,
) -> Result<FreezeoutReport> {
    let s = &traj.s_grid;
    let n = s.len();
    if eq_track.len() != n {
        return Err(invalid(format!(
            "equilibrium track has {} points, trajectory {}",
            eq_track.len(),
            n
        )));
    }
    if let Some(bad) = eq_track
        .iter()
        .zip(s)
        .position(|(d, &x)| d.s.is_some_and(|ds| (ds - x).abs() > 1e-12))
    {
        return Err(invalid(format!("grids differ at point {bad}")));
    }
    let last = &traj.populations[n - 1];
    let to_eq: Vec<f64> = (0..n).map(|i| tvd(&traj.populations[i], &eq_track[i].probs)).collect();
    let prefix = to_eq.iter().take_while(|&&d| d < tol_eq).count();
    let mut notes = Vec::new();
    let s_eq_end = if prefix == 0 { s[0] } else { s[prefix - 1] };
    // frozen suffix, restricted to the part after the quasistatic prefix
    let mut first = n;
    while first > prefix && tvd(&traj.populations[first - 1], last) < tol_frozen {
        first -= 1;
    }
    let frozen_empty = first >= n - 1;
    let s_frozen_start = if first < n { s[first] } else { s[n - 1] };

    let start = prefix.saturating_sub(1);
    let (s_star, tvd_at_star) = refine_star(s, eq_track, last, start)?;
    let distributed = prefix == 0 || tvd_at_star >= tol_eq;
    if prefix == 0 {
        notes.push("trajectory never within tol_eq of equilibrium".into());
    }
    if tvd_at_star >= tol_eq {
        notes.push(format!(
            "final state is {tvd_at_star:.3} from the closest equilibrium point"
        ));
    }
    Ok(FreezeoutReport {
        s_star,
        s_eq_end,
        s_frozen_start: s_frozen_start.max(s_eq_end),
        tvd_at_star,
        distributed_freezeout: distributed,
        frozen_empty,
        tol_eq,
        tol_frozen,
        gamma0_ns: None,
        alpha: None,
        fit: None,
        kappa: None,
        predicted_s_star: None,
        predicted_p0_slope: None,
        notes,
    })
}

/// Grid argmin of `TVD(final, P^B(s))` over `s ≥ s[start]`, refined between the
/// neighbouring nodes on a cubic interpolant of the equilibrium track.
fn refine_star(s: &[f64], eq: &[LevelDistribution], last: &[f64], start: usize) -> Result<(f64, f64)> {
    let n = s.len();
    let d: Vec<f64> = (0..n).map(|i| tvd(last, &eq[i].probs)).collect();
    let mut best = start;
    for i in start..n {
        if d[i] < d[best] {
            best = i;
        }
    }
    let (mut s_best, mut d_best) = (s[best], d[best]);
    if n >= 3 {
        let k = last.len();
        let data: Vec<f64> = eq.iter().flat_map(|p| p.probs.iter().copied()).collect();
        let interp = Hermite::centered(s.to_vec(), k, data)?;
        let mut buf = vec![0.0; k];
        let mut at = |x: f64| {
            interp.eval_into(x, &mut buf);
            tvd(last, &buf)
        };
        let lo = s[best.saturating_sub(1).max(start)];
        let hi = s[(best + 1).min(n - 1)];
        let (x, v) = golden_min(&mut at, lo, hi);
        if v < d_best {
            s_best = x;
            d_best = v;
        }
    }
    Ok((s_best, d_best))
}

fn golden_min(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Least-squares fit of `ln γ = ln γ₀ − α s`.
pub fn fit_decay(s: &[f64], gamma: &[f64]) -> Result<RelaxationFit> {
    if s.len() != gamma.len() || s.len() < 2 {
        return Err(invalid("need matching s and rate samples"));
    }
    if let Some(i) = gamma.iter().position(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::Numerical(format!(
            "non-positive relaxation rate {} at s = {}",
            gamma[i], s[i]
        )));
    }
    let y: Vec<f64> = gamma.iter().map(|g| g.ln()).collect();
    let (slope, intercept, r2) = linear_fit(s, &y)?;
    Ok(RelaxationFit {
        gamma0_ns: intercept.exp(),
        alpha: -slope,
        r_squared: r2,
        window: (s[0], s[s.len() - 1]),
        points: s.len(),
    })
}

/// Ordinary least squares `y = slope x + intercept`, with `R²`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("degenerate abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((slope, intercept, r2))
}

/// Relaxation gap of the Pauli generator at every track point.
pub fn relaxation_rates(track: &SpectrumTrack, bath: &BathParams) -> Result<Vec<f64>> {
    let dim = track.slices[0].eigvecs.nrows();
    if dim == 0 || !dim.is_power_of_two() {
        return Err(invalid("track slices carry no eigenvectors"));
    }
    let n = dim.trailing_zeros() as usize;
    track
        .slices
        .iter()
        .map(|sl| {
            let sz = sigma_z_elements(sl, n)?;
            let w: DMatrix<f64> = rates_from_elements(&sl.energies, &sz, bath);
            relaxation_gap(&w, &sl.energies, bath)
        })
        .collect()
}

pub fn fit_relaxation(track: &SpectrumTrack, bath: &BathParams, window: (f64, f64)) -> Result<RelaxationFit> {
    let (lo, hi) = window;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || !(hi > lo) {
        return Err(invalid(format!("fit window ({lo}, {hi}) must be an interval in [0, 1]")));
    }
    let chosen: Vec<usize> = (0..track.grid.len())
        .filter(|&i| track.grid[i] >= lo - 1e-12 && track.grid[i] <= hi + 1e-12)
        .collect();
    if chosen.len() < MIN_FIT_POINTS {
        return Err(invalid(format!(
            "fit window ({lo}, {hi}) holds {} grid points, need {MIN_FIT_POINTS}",
            chosen.len()
        )));
    }
    let sub = SpectrumTrack {
        grid: chosen.iter().map(|&i| track.grid[i]).collect(),
        slices: chosen.iter().map(|&i| track.slices[i].clone()).collect(),
    };
    let rates = relaxation_rates(&sub, bath)?;
    fit_decay(&sub.grid, &rates)
}

/// `s* = ln(γ₀ t_a) / α`, with markers outside `[0, 1]`.
pub fn predict_s_star(gamma0_ns: f64, alpha: f64, ta_ns: f64) -> SStarPrediction {
    if alpha.abs() <= ALPHA_EPS || !alpha.is_finite() {
        return SStarPrediction::NoFreezeout;
    }
    let s = (gamma0_ns * ta_ns).ln() / alpha;
    if s < 0.0 {
        SStarPrediction::BeforeStart
    } else if s > 1.0 || s.is_nan() {
        SStarPrediction::NoFreezeout
    } else {
        SStarPrediction::Inside(s)
    }
}

/// `dP₀/d ln t_a ≈ κ / α`.
pub fn predict_p0_slope(kappa: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(kappa / alpha)
}

/// Boltzmann ground probability (summed over `ground_levels`) at `s`.
pub fn boltzmann_ground(
    instance: &ProblemInstance,
    schedule: &Schedule,
    bath: &BathParams,
    levels: usize,
    ground_levels: &[usize],
    s: f64,
) -> Result<f64> {
    let sl = lowest_k_eigen(&build_hamiltonian(instance, schedule, s)?, levels)?;
    let p = boltzmann(&sl.energies, bath.temp())?.probs;
    Ok(ground_levels.iter().map(|&g| p[g]).sum())
}

/// `κ = dP₀^B/ds` at `s*` by a centered difference of step [`KAPPA_STEP`].
pub fn kappa_at(
    instance: &ProblemInstance,
    schedule: &Schedule,
    bath: &BathParams,
    levels: usize,
    ground_levels: &[usize],
    s_star: f64,
) -> Result<f64> {
    if s_star - KAPPA_STEP < 0.0 || s_star + KAPPA_STEP > 1.0 {
        return Err(invalid(format!("s* = {s_star} is at the grid boundary")));
    }
    let f = |s| boltzmann_ground(instance, schedule, bath, levels, ground_levels, s);
    Ok((f(s_star + KAPPA_STEP)? - f(s_star - KAPPA_STEP)?) / (2.0 * KAPPA_STEP))
}

#[derive(Clone, Copy, Debug)]
pub struct FreezeoutOptions {
    pub tol_eq: f64,
    pub tol_frozen: f64,
    /// Fit window; the default ends at the start of the frozen region.
    pub window: Option<(f64, f64)>,
}

impl Default for FreezeoutOptions {
    fn default() -> Self {
        Self {
            tol_eq: DEFAULT_TOL_EQ,
            tol_frozen: DEFAULT_TOL_FROZEN,
            window: None,
        }
    }
}

/// Region detection plus rate fit, predicted `s*` and `κ`. Failures of the
/// fit or of `κ` leave those fields empty with a note.
pub fn analyze(
    prep: &crate::dynamics::PreparedAnneal,
    traj: &Trajectory,
    bath: &BathParams,
    opts: FreezeoutOptions,
) -> Result<FreezeoutReport> {
    let eq = prep.equilibrium_track(bath)?;
    let mut rep = detect_regions(traj, &eq, opts.tol_eq, opts.tol_frozen)?;
    let window = opts
        .window
        .unwrap_or((DEFAULT_FIT_START, rep.s_frozen_start.max(DEFAULT_FIT_START + 0.05).min(1.0)));
    match fit_relaxation(&prep.track, bath, window) {
        Ok(fit) => {
            rep.gamma0_ns = Some(fit.gamma0_ns);
            rep.alpha = Some(fit.alpha);
            rep.predicted_s_star = Some(predict_s_star(fit.gamma0_ns, fit.alpha, traj.ta_ns));
            rep.fit = Some(fit);
        }
        Err(e) => rep.notes.push(format!("relaxation fit failed: {e}")),
    }
    match kappa_at(
        &prep.instance,
        &prep.schedule,
        bath,
        prep.levels(),
        &traj.ground_levels,
        rep.s_star,
    ) {
        Ok(k) => {
            rep.kappa = Some(k);
            if let Some(a) = rep.alpha {
                rep.predicted_p0_slope = predict_p0_slope(k, a).ok();
            }
        }
        Err(e) => rep.notes.push(format!("kappa unavailable: {e}")),
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{closed_evolve, ClosedMode, DynamicsConfig, Model, PreparedAnneal, StepStats};
    use crate::equilibrium::TempParams;
    use crate::ising::generate_instance;
    use crate::schedule::default_schedule;
    use proptest::prelude::*;

    fn chain(n: usize, seed: u64) -> ProblemInstance {
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        generate_instance(n, &edges, seed).unwrap()
    }

    fn traj(s: Vec<f64>, pops: Vec<Vec<f64>>) -> Trajectory {
        let last = pops.last().unwrap().clone();
        Trajectory {
            retained_mass: vec![1.0; s.len()],
            p0_final: last[0],
            final_dist: LevelDistribution::from_probs(last),
            s_grid: s,
            populations: pops,
            coherence_norm: None,
            ground_levels: vec![0],
            ta_ns: 1.0,
            model: Model::Secular,
            representation: "test",
            stats: StepStats::default(),
            norm_error: None,
            degenerate_pairs: false,
        }
    }

    // three levels whose first gap opens steeply around s = 0.6
    fn steep_track(s: &[f64]) -> Vec<LevelDistribution> {
        let t = TempParams::from_millikelvin(40.0).unwrap();
        s.iter()
            .map(|&x| {
                let g = t.f_t_ghz * (15.0 * (x - 0.6)).exp();
                boltzmann(&[0.0, g, g + 0.5], t).unwrap().with_s(x)
            })
            .collect()
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn boltzmann_then_constant_fixture() {
        let s = grid(101);
        let eq = steep_track(&s);
        let pops: Vec<Vec<f64>> = (0..101).map(|i| eq[i.min(60)].probs.clone()).collect();
        let r = detect_regions(&traj(s, pops), &eq, DEFAULT_TOL_EQ, DEFAULT_TOL_FROZEN).unwrap();
        assert!((r.s_eq_end - 0.6).abs() < 1e-12, "{}", r.s_eq_end);
        assert!((0.6..=0.62).contains(&r.s_star), "{}", r.s_star);
        assert!(r.tvd_at_star < 1e-6);
        assert!(!r.distributed_freezeout);
        assert!(r.s_frozen_start > 0.6 && r.s_frozen_start <= 0.62);
    }

    #[test]
    fn equilibrium_everywhere_has_no_frozen_region() {
        let s = grid(51);
        let eq = steep_track(&s);
        let pops = eq.iter().map(|d| d.probs.clone()).collect();
        let r = detect_regions(&traj(s, pops), &eq, DEFAULT_TOL_EQ, DEFAULT_TOL_FROZEN).unwrap();
        assert!(r.frozen_empty);
        assert_eq!(r.s_eq_end, 1.0);
        assert!((r.s_star - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diabatic_closed_run_is_distributed() {
        let inst = chain(4, 3);
        let mut cfg = DynamicsConfig::new(0.01, Model::Closed);
        cfg.levels = 16;
        cfg.grid_points = 51;
        cfg.closed_mode = ClosedMode::Truncated;
        let prep = PreparedAnneal::new(&inst, &default_schedule(), cfg.grid_points, cfg.levels).unwrap();
        let t = closed_evolve(&inst, &default_schedule(), &cfg).unwrap();
        let eq = prep.equilibrium_track(&BathParams::default()).unwrap();
        let r = detect_regions(&t, &eq, DEFAULT_TOL_EQ, DEFAULT_TOL_FROZEN).unwrap();
        assert!(r.distributed_freezeout, "{r:?}");
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let s = grid(11);
        let eq = steep_track(&grid(12));
        let pops = vec![vec![1.0, 0.0, 0.0]; 11];
        assert!(detect_regions(&traj(s, pops), &eq, 0.02, 0.01).is_err());
    }

    #[test]
    fn synthetic_generator_decay_is_recovered() {
        let bath = BathParams::default();
        let e = [0.0, 0.5];
        let kms = (-(e[1] - e[0]) / bath.f_t_ghz).exp();
        let s = grid(21);
        let rates: Vec<f64> = s
            .iter()
            .map(|&x| {
                let total = 2.0 * (-5.0 * x).exp();
                let down = total / (1.0 + kms);
                let up = total - down;
                let w = DMatrix::from_row_slice(2, 2, &[-up, down, up, -down]);
                relaxation_gap(&w, &e, &bath).unwrap()
            })
            .collect();
        let fit = fit_decay(&s, &rates).unwrap();
        assert!((fit.gamma0_ns / 2.0 - 1.0).abs() < 0.01, "{fit:?}");
        assert!((fit.alpha / 5.0 - 1.0).abs() < 0.01, "{fit:?}");
        assert!(fit.r_squared > 0.9999);
    }

    #[test]
    fn doubling_eta_doubles_gamma0() {
        let inst = chain(4, 11);
        let prep = PreparedAnneal::new(&inst, &default_schedule(), 61, 8).unwrap();
        let b1 = BathParams::default();
        let b2 = b1.with_eta(2.0 * b1.eta);
        let f1 = fit_relaxation(&prep.track, &b1, (0.4, 0.9)).unwrap();
        let f2 = fit_relaxation(&prep.track, &b2, (0.4, 0.9)).unwrap();
        assert!((f2.gamma0_ns / f1.gamma0_ns - 2.0).abs() < 0.04, "{f1:?} {f2:?}");
        assert!((f2.alpha / f1.alpha - 1.0).abs() < 0.02);
    }

    #[test]
    fn constant_schedule_does_not_freeze() {
        let inst = chain(3, 2);
        let sch = Schedule::constant(2.0, 1.0).unwrap();
        let prep = PreparedAnneal::new(&inst, &sch, 21, 8).unwrap();
        let fit = fit_relaxation(&prep.track, &BathParams::default(), (0.2, 0.9)).unwrap();
        assert!(fit.alpha.abs() < 1e-9, "{fit:?}");
        assert_eq!(
            predict_s_star(fit.gamma0_ns, fit.alpha, 1000.0),
            SStarPrediction::NoFreezeout
        );
    }

    #[test]
    fn fit_window_needs_enough_points() {
        let inst = chain(3, 2);
        let prep = PreparedAnneal::new(&inst, &default_schedule(), 21, 8).unwrap();
        assert!(fit_relaxation(&prep.track, &BathParams::default(), (0.4, 0.6)).is_err());
        assert!(fit_relaxation(&prep.track, &BathParams::default(), (0.6, 0.4)).is_err());
        let zero = BathParams::default().with_eta(0.0);
        assert!(fit_relaxation(&prep.track, &zero, (0.2, 0.9)).is_err());
    }

    #[test]
    fn prediction_markers() {
        assert_eq!(predict_s_star(0.5, 3.0, 2.0), SStarPrediction::Inside(0.0));
        let a = predict_s_star(1.0, 20.0, 100.0).value().unwrap();
        let b = predict_s_star(1.0, 20.0, 200.0).value().unwrap();
        assert!((b - a - 2f64.ln() / 20.0).abs() < 1e-12);
        assert_eq!(predict_s_star(1.0, 5.0, 0.5), SStarPrediction::BeforeStart);
        assert_eq!(predict_s_star(1.0, 2.0, 1e6), SStarPrediction::NoFreezeout);
        assert_eq!(predict_s_star(1.0, 0.0, 10.0), SStarPrediction::NoFreezeout);
    }

    #[test]
    fn slope_prediction() {
        assert_eq!(predict_p0_slope(0.0, 4.0).unwrap(), 0.0);
        assert!(predict_p0_slope(0.3, 4.0).unwrap() > 0.0);
        assert!(predict_p0_slope(0.3, 0.0).is_err());
    }

    #[test]
    fn kappa_matches_gap_growth_and_rejects_boundary() {
        let inst = chain(4, 11);
        let sch = default_schedule();
        let bath = BathParams::default();
        let k = kappa_at(&inst, &sch, &bath, 8, &[0], 0.5).unwrap();
        let fd = (boltzmann_ground(&inst, &sch, &bath, 8, &[0], 0.51).unwrap()
            - boltzmann_ground(&inst, &sch, &bath, 8, &[0], 0.49).unwrap())
            / 0.02;
        assert!((k - fd).abs() < 0.05 * fd.abs().max(1e-3), "{k} {fd}");
        assert!(kappa_at(&inst, &sch, &bath, 8, &[0], 0.9995).is_err());
        assert!(kappa_at(&inst, &sch, &bath, 8, &[0], 0.0).is_err());
    }

    #[test]
    fn report_serializes_with_fit_diagnostics() {
        let fit = fit_decay(&[0.0, 0.5, 1.0], &[1.0, 0.5, 0.25]).unwrap();
        let json = serde_json::to_string(&fit).unwrap();
        assert!(json.contains("r_squared") && json.contains("window"));
        let p = serde_json::to_string(&SStarPrediction::Inside(0.4)).unwrap();
        assert!(p.contains("inside"));
    }

    fn arb_traj() -> impl Strategy<Value = (Vec<Vec<f64>>, f64)> {
        (
            proptest::collection::vec(proptest::collection::vec(0.001f64..1.0, 3), 21),
            0.0f64..1.0,
        )
            .prop_map(|(w, mix)| {
                let s = grid(21);
                let eq = steep_track(&s);
                let pops = w
                    .into_iter()
                    .zip(&eq)
                    .map(|(v, d)| {
                        let z: f64 = v.iter().sum();
                        v.iter()
                            .zip(&d.probs)
                            .map(|(x, p)| mix * p + (1.0 - mix) * x / z)
                            .collect()
                    })
                    .collect();
                (pops, mix)
            })
    }

    proptest! {
        #[test]
        fn report_invariants((pops, _mix) in arb_traj()) {
            let s = grid(21);
            let eq = steep_track(&s);
            let t = traj(s.clone(), pops);
            let r = detect_regions(&t, &eq, DEFAULT_TOL_EQ, DEFAULT_TOL_FROZEN).unwrap();
            let last = t.populations.last().unwrap();
            for d in &eq {
                if d.s.unwrap() >= r.s_eq_end {
                    prop_assert!(r.tvd_at_star <= tvd(last, &d.probs) + 1e-15);
                }
            }
            prop_assert!(0.0 <= r.s_eq_end && r.s_eq_end <= r.s_star && r.s_star <= 1.0);
            prop_assert!(r.s_eq_end <= r.s_frozen_start && r.s_frozen_start <= 1.0);
        }
    }
}
