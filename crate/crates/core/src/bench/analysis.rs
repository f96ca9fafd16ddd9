use std::collections::BTreeMap;

use rand::Rng as _;
use serde::Serialize;

use super::BenchmarkRecord;
use crate::error::{invalid, Error, Result};
use crate::freezeout::linear_fit;
use crate::rng::rng_from_seed;

pub const COHERENT_TOL: f64 = 0.01;
/// Largest residual of the affine `P0(ln t_a)` fit accepted as quasistatic.
pub const QUASISTATIC_RESIDUAL: f64 = 0.01;
pub const MIN_QUASISTATIC_POINTS: usize = 3;
pub const MIN_REGIME_POINTS: usize = 5;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub ta: f64,
    pub tc: f64,
    pub count: usize,
    pub censored_count: usize,
    /// The quantile falls among censored lower bounds.
    pub censored: bool,
}

/// Quantile of `t_c` over instances for each `(N, t_a)`.
pub fn aggregate(records: &[BenchmarkRecord], q: f64) -> Vec<CurvePoint> {
    let mut groups: BTreeMap<(usize, u64), Vec<&BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.n, r.ta.to_bits())).or_default().push(r);
    }
    let mut out: Vec<CurvePoint> = groups
        .into_iter()
        .map(|((n, bits), rs)| {
            let tcs: Vec<f64> = rs.iter().map(|r| r.tc).collect();
            let censored_count = rs.iter().filter(|r| r.censored).count();
            CurvePoint {
                n,
                ta: f64::from_bits(bits),
                tc: quantile(&tcs, q),
                count: rs.len(),
                censored_count,
                censored: censored_count as f64 > (1.0 - q) * rs.len() as f64,
            }
        })
        .collect();
    out.sort_by(|a, b| (a.n, a.ta).partial_cmp(&(b.n, b.ta)).expect("finite"));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalTa {
    pub n: usize,
    pub ta_opt: f64,
    pub tc_opt: f64,
    /// Minimum at the first or last ladder rung; the true optimum may lie outside.
    pub boundary: bool,
    pub censored: bool,
}

/// Minimizer of the aggregated `t_c(t_a)` for a single size.
pub fn optimal_ta(records: &[BenchmarkRecord], q: f64) -> Result<OptimalTa> {
    let curve = aggregate(records, q);
    let n = curve.first().map(|c| c.n).ok_or_else(|| invalid("no records"))?;
    if curve.iter().any(|c| c.n != n) {
        return Err(invalid("records span several sizes"));
    }
    if curve.len() < 2 {
        return Err(invalid("need at least two annealing times"));
    }
    if curve.iter().all(|c| c.censored_count == c.count) {
        return Err(Error::Censored(format!("every record at N = {n} is censored")));
    }
    let (k, best) = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.tc.total_cmp(&b.1.tc))
        .expect("non-empty");
    Ok(OptimalTa {
        n,
        ta_opt: best.ta,
        tc_opt: best.tc,
        boundary: k == 0 || k == curve.len() - 1,
        censored: best.censored,
    })
}

/// [`optimal_ta`] for every size present.
pub fn optimal_curve(records: &[BenchmarkRecord], q: f64) -> Result<Vec<OptimalTa>> {
    let mut by_n: BTreeMap<usize, Vec<BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        by_n.entry(r.n).or_default().push(r.clone());
    }
    by_n.values().map(|rs| optimal_ta(rs, q)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Coherent,
    NonEquilibrium,
    Quasistatic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimePoint {
    pub ta: f64,
    pub p0_open: f64,
    pub p0_closed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    pub points: Vec<RegimePoint>,
    pub labels: Vec<Regime>,
    pub non_monotonic: bool,
    /// `(slope, intercept, R²)` of the trailing `P0` vs `ln t_a` fit.
    pub quasistatic_fit: Option<(f64, f64, f64)>,
}

impl RegimeReport {
    /// Contiguous runs as `(regime, first index, last index)`.
    pub fn segments(&self) -> Vec<(Regime, usize, usize)> {
        let mut out: Vec<(Regime, usize, usize)> = Vec::new();
        for (i, &l) in self.labels.iter().enumerate() {
            match out.last_mut() {
                Some(seg) if seg.0 == l => seg.2 = i,
                _ => out.push((l, i, i)),
            }
        }
        out
    }

    /// Coherent, then non-equilibrium, then quasistatic, each present once.
    pub fn all_regimes_in_order(&self) -> bool {
        let order: Vec<Regime> = self.segments().iter().map(|s| s.0).collect();
        order == [Regime::Coherent, Regime::NonEquilibrium, Regime::Quasistatic]
    }
}

/// Labels each point of a `P0(t_a)` ladder. Coherent points form the prefix
/// where open and closed agree; the quasistatic window is the longest trailing
/// run (at least three points) that is non-decreasing and affine in `ln t_a`
/// with positive slope; everything between is non-equilibrium.
pub fn classify_regimes(points: &[RegimePoint]) -> Result<RegimeReport> {
    if points.len() < MIN_REGIME_POINTS {
        return Err(invalid(format!(
            "need at least {MIN_REGIME_POINTS} annealing times, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| !(w[1].ta > w[0].ta)) {
        return Err(invalid("annealing times must be strictly increasing"));
    }
    let n = points.len();
    let coherent = points
        .iter()
        .take_while(|p| (p.p0_open - p.p0_closed).abs() < COHERENT_TOL)
        .count();
    let mut labels = vec![Regime::NonEquilibrium; n];
    labels[..coherent].iter_mut().for_each(|l| *l = Regime::Coherent);
    let mut fit = None;
    for start in coherent..n.saturating_sub(MIN_QUASISTATIC_POINTS - 1) {
        let win = &points[start..];
        if win.windows(2).any(|w| w[1].p0_open < w[0].p0_open) {
            continue;
        }
        let x: Vec<f64> = win.iter().map(|p| p.ta.ln()).collect();
        let y: Vec<f64> = win.iter().map(|p| p.p0_open).collect();
        let (slope, icept, r2) = linear_fit(&x, &y)?;
        let worst = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - slope * a - icept).abs())
            .fold(0.0, f64::max);
        if slope > 0.0 && worst < QUASISTATIC_RESIDUAL {
            labels[start..].iter_mut().for_each(|l| *l = Regime::Quasistatic);
            fit = Some((slope, icept, r2));
            break;
        }
    }
    let p: Vec<f64> = points.iter().map(|p| p.p0_open).collect();
    let non_monotonic = (1..n - 1).any(|i| {
        let before = p[..i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let after = p[i + 1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        p[i] < before && p[i] < after
    });
    Ok(RegimeReport {
        points: points.to_vec(),
        labels,
        non_monotonic,
        quasistatic_fit: fit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "policy", content = "ta", rename_all = "kebab-case")]
pub enum TaPolicy {
    Fixed(f64),
    Optimal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub solver: String,
    pub policy: TaPolicy,
    /// `(√N, ln t_c)` at the chosen quantile, one per size.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    pub quantile: f64,
}

/// Least-squares slope of `ln t_c` against `√N` over per-size quantiles, with a
/// percentile bootstrap over instances within each size. `samples` holds one
/// `(N, t_c)` per instance.
pub fn fit_slope(
    solver: &str,
    policy: TaPolicy,
    samples: &[(usize, f64)],
    q: f64,
    seed: u64,
) -> Result<ScalingFit> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &(n, tc) in samples {
        if !(tc > 0.0 && tc.is_finite()) {
            return Err(invalid(format!("t_c must be positive, got {tc}")));
        }
        by_n.entry(n).or_default().push(tc.ln());
    }
    if by_n.len() < 3 {
        return Err(invalid(format!("need at least three sizes, got {}", by_n.len())));
    }
    let x: Vec<f64> = by_n.keys().map(|&n| (n as f64).sqrt()).collect();
    let fit_of = |groups: &[Vec<f64>]| -> Result<(f64, f64)> {
        let y: Vec<f64> = groups.iter().map(|g| quantile(g, q)).collect();
        let (slope, icept, _) = linear_fit(&x, &y)?;
        Ok((slope, icept))
    };
    let groups: Vec<Vec<f64>> = by_n.values().cloned().collect();
    let (slope, intercept) = fit_of(&groups)?;
    if !slope.is_finite() {
        return Err(Error::Numerical("non-finite slope".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let resampled: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| (0..g.len()).map(|_| g[rng.gen_range(0..g.len())]).collect())
            .collect();
        boot.push(fit_of(&resampled)?.0);
    }
    Ok(ScalingFit {
        solver: solver.into(),
        policy,
        points: x.iter().zip(&groups).map(|(&a, g)| (a, quantile(g, q))).collect(),
        slope,
        intercept,
        slope_ci: (quantile(&boot, 0.025), quantile(&boot, 0.975)),
        quantile: q,
    })
}
