mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qalab_core::bench::{
    aggregate, classify_regimes, fit_slope, optimal_curve, records_from_csv, records_to_csv, scaling_run,
    BenchConfig, RegimePoint, RegimeReport, TaPolicy,
};
use qalab_core::dynamics::{BathParams, ClosedMode, DynamicsConfig, Model, PreparedAnneal};
use qalab_core::equilibrium::{boltzmann, TempParams};
use qalab_core::freezeout::{analyze, FreezeoutOptions, DEFAULT_TOL_EQ, DEFAULT_TOL_FROZEN};
use qalab_core::ising::{chimera_instance, generate_labeled, parse_edge_list, ProblemInstance};
use qalab_core::schedule::Schedule;
use qalab_core::solvers::{run_sa, run_sqa, BetaShape, Readout, SaParams, SqaParams, TransverseField};
use qalab_core::spectrum::{build_hamiltonian, classical_levels, lowest_k_eigen, track_spectrum, uniform_grid};
use qalab_core::{Error, Result};

use output::{Format, Sink};

/// Quantum annealing laboratory: spectra, open-system dynamics, freeze-out
/// analysis and classical baselines.
#[derive(Parser)]
#[command(name = "qalab", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed for every stochastic component.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Data output path; metadata goes to `<out>.meta.json`. Stdout/stderr when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `default` or a CSV with columns s,A_GHz,B_GHz.
    #[arg(long, global = true, default_value = "default")]
    schedule: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance (JSON).
    Gen(GenArgs),
    /// Lowest levels along the anneal.
    Spectrum(SpectrumArgs),
    /// Boltzmann distribution over the lowest levels at one s.
    Equilibrium(EquilibriumArgs),
    /// Closed or open evolution; writes the level populations along s.
    Evolve(EvolveArgs),
    /// Open evolution followed by freeze-out analysis (JSON).
    Freezeout(FreezeoutArgs),
    /// Simulated annealing samples.
    Sa(SaArgs),
    /// Simulated quantum annealing samples.
    Sqa(SqaArgs),
    /// Scaling run from a bench configuration JSON.
    Bench(BenchArgs),
    /// Scaling fit of ln t_c against sqrt(N) from a results CSV.
    Fit(FitArgs),
    /// Regime classification of P0 over an annealing-time ladder.
    Regimes(RegimesArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Edge list file (`i j` per line); Chimera when absent.
    #[arg(long)]
    edges: Option<PathBuf>,
}

#[derive(Args)]
struct InstanceArg {
    /// Instance JSON produced by `gen`.
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    inst: InstanceArg,
    #[arg(long, default_value_t = 12)]
    levels: usize,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// Append B(s) times the classical levels.
    #[arg(long)]
    classical: bool,
}

#[derive(Args)]
struct BathArgs {
    #[arg(long, default_value_t = qalab_core::dynamics::DEFAULT_ETA)]
    eta: f64,
    #[arg(long = "t-mk", default_value_t = qalab_core::dynamics::DEFAULT_T_MK)]
    t_mk: f64,
    #[arg(long, default_value_t = qalab_core::dynamics::DEFAULT_CUTOFF_GHZ)]
    cutoff: f64,
}

impl BathArgs {
    fn bath(&self) -> Result<BathParams> {
        BathParams::new(TempParams::from_millikelvin(self.t_mk)?, self.eta, self.cutoff)
    }
}

#[derive(Args)]
struct EquilibriumArgs {
    #[command(flatten)]
    inst: InstanceArg,
    #[arg(long)]
    s: f64,
    #[arg(long = "t-mk", default_value_t = qalab_core::dynamics::DEFAULT_T_MK)]
    t_mk: f64,
    #[arg(long, default_value_t = 12)]
    levels: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClosedModeArg {
    Auto,
    Full,
    Truncated,
}

#[derive(Args)]
struct DynArgs {
    #[command(flatten)]
    inst: InstanceArg,
    /// Annealing time in ns.
    #[arg(long)]
    ta: f64,
    /// closed, secular or redfield.
    #[arg(long, default_value = "secular")]
    model: Model,
    #[arg(long, default_value_t = 12)]
    levels: usize,
    #[arg(long, default_value_t = 401)]
    grid: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Keep the nonadiabatic coupling between levels.
    #[arg(long)]
    nonadiabatic: bool,
    #[arg(long = "closed-mode", value_enum, default_value_t = ClosedModeArg::Auto)]
    closed_mode: ClosedModeArg,
    #[command(flatten)]
    bath: BathArgs,
}

impl DynArgs {
    fn config(&self, model: Model) -> DynamicsConfig {
        let mut cfg = DynamicsConfig::new(self.ta, model);
        cfg.levels = self.levels;
        cfg.grid_points = self.grid;
        cfg.step_tolerance = self.tol;
        cfg.include_nonadiabatic = self.nonadiabatic;
        cfg.closed_mode = match self.closed_mode {
            ClosedModeArg::Auto => ClosedMode::Auto,
            ClosedModeArg::Full => ClosedMode::Full,
            ClosedModeArg::Truncated => ClosedMode::Truncated,
        };
        cfg
    }
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    dyn_args: DynArgs,
}

#[derive(Args)]
struct FreezeoutArgs {
    #[command(flatten)]
    dyn_args: DynArgs,
    #[arg(long = "tol-eq", default_value_t = DEFAULT_TOL_EQ)]
    tol_eq: f64,
    #[arg(long = "tol-frozen", default_value_t = DEFAULT_TOL_FROZEN)]
    tol_frozen: f64,
    /// Fit window `lo,hi`; defaults to [0.4, start of the frozen region].
    #[arg(long, value_parser = parse_pair)]
    window: Option<(f64, f64)>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Linear,
    Geometric,
}

#[derive(Args)]
struct SaArgs {
    #[command(flatten)]
    inst: InstanceArg,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long = "beta-initial", default_value_t = 0.1)]
    beta_initial: f64,
    #[arg(long = "beta-final", default_value_t = 10.0)]
    beta_final: f64,
    #[arg(long, value_enum, default_value_t = ShapeArg::Geometric)]
    shape: ShapeArg,
    #[arg(long, default_value_t = 100)]
    repetitions: usize,
}

#[derive(Args)]
struct SqaArgs {
    #[command(flatten)]
    inst: InstanceArg,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = qalab_core::solvers::DEFAULT_TROTTER_SLICES)]
    slices: usize,
    /// Linear field Γ₀(1 − s); when absent the A/B schedule (GHz) is used.
    #[arg(long)]
    gamma0: Option<f64>,
    /// Effective temperature (GHz with the schedule, dimensionless with --gamma0).
    #[arg(long = "t-eff")]
    t_eff: Option<f64>,
    #[arg(long, default_value_t = 100)]
    repetitions: usize,
    /// Read out the lowest-energy slice instead of slice 0.
    #[arg(long = "best-slice")]
    best_slice: bool,
    #[arg(long = "no-global-moves")]
    no_global_moves: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Results CSV from `bench`.
    #[arg(long)]
    results: PathBuf,
    /// `optimal` or a fixed annealing time.
    #[arg(long, default_value = "optimal")]
    policy: String,
    #[arg(long, default_value_t = 0.5)]
    quantile: f64,
}

#[derive(Args)]
struct RegimesArgs {
    /// CSV with columns ta,P0_open,P0_closed; otherwise simulate `--instance`.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Comma-separated annealing times in ns.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,1,3,10,30,100,300,1000,10000")]
    ladder: Vec<f64>,
    #[arg(long, default_value = "redfield")]
    model: Model,
    #[arg(long, default_value_t = 9)]
    levels: usize,
    #[arg(long, default_value_t = 201)]
    grid: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[command(flatten)]
    bath: BathArgs,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

enum Outcome {
    Done,
    Partial(usize),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            eprintln!("warning: {n} task(s) failed; partial results written");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let g = &cli.global;
    let sink = |command| Sink {
        out: g.out.clone(),
        format: g.format,
        command,
        seed: g.seed,
        threads: g.threads,
    };
    let schedule = || Schedule::from_flag(&g.schedule);
    match &cli.command {
        Command::Gen(a) => {
            let inst = match &a.edges {
                Some(path) => {
                    let edges = parse_edge_list(&std::fs::read_to_string(path)?)?;
                    let n = a.n.unwrap_or_else(|| edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(0));
                    generate_labeled(n, &edges, g.seed, &path.display().to_string())?
                }
                None => chimera_instance(a.n.unwrap_or(16), g.seed)?,
            };
            let params = json!({"n": inst.n, "graph": inst.graph_label, "hash": inst.content_hash()});
            sink("gen").emit(&(inst.to_json()? + "\n"), params)?;
        }
        Command::Spectrum(a) => {
            let inst = ProblemInstance::load(&a.inst.instance)?;
            let sch = schedule()?;
            let track = track_spectrum(&inst, &sch, &uniform_grid(a.grid), a.levels)?;
            let classical: Option<Vec<Vec<f64>>> = if a.classical {
                Some(
                    track
                        .grid
                        .iter()
                        .map(|&s| classical_levels(&inst, &sch, s, a.levels))
                        .collect::<Result<_>>()?,
                )
            } else {
                None
            };
            let value = json!({
                "s": track.grid,
                "energies_ghz": track.slices.iter().map(|sl| sl.energies.clone()).collect::<Vec<_>>(),
                "classical_ghz": classical,
                "min_level_gap_ghz": track.min_level_gap(),
            });
            let params = json!({"instance": inst.content_hash(), "levels": a.levels, "grid": a.grid, "schedule": sch.name()});
            sink("spectrum").emit_serialized(Some(track.to_csv(classical.as_deref())), &value, params)?;
        }
        Command::Equilibrium(a) => {
            let inst = ProblemInstance::load(&a.inst.instance)?;
            let sch = schedule()?;
            sch.evaluate(a.s)?;
            let slice = lowest_k_eigen(&build_hamiltonian(&inst, &sch, a.s)?, a.levels)?;
            let dist = boltzmann(&slice.energies, TempParams::from_millikelvin(a.t_mk)?)?.with_s(a.s);
            let params = json!({"instance": inst.content_hash(), "s": a.s, "t_mk": a.t_mk, "levels": a.levels});
            sink("equilibrium").emit_serialized(Some(dist.to_csv()), &dist, params)?;
        }
        Command::Evolve(a) => {
            let d = &a.dyn_args;
            let inst = ProblemInstance::load(&d.inst.instance)?;
            let sch = schedule()?;
            let cfg = d.config(d.model);
            cfg.validate()?;
            let prep = PreparedAnneal::new(&inst, &sch, cfg.grid_points, cfg.levels)?;
            let bath = d.bath.bath()?;
            let traj = if d.model == Model::Closed { prep.closed(&cfg)? } else { prep.open(&bath, &cfg)? };
            let params = json!({"instance": inst.content_hash(), "config": cfg, "bath": bath, "schedule": sch.name(),
                "p0_final": traj.p0_final, "stats": traj.stats});
            sink("evolve").emit_serialized(Some(traj.to_csv()), &traj, params)?;
        }
        Command::Freezeout(a) => {
            let d = &a.dyn_args;
            let inst = ProblemInstance::load(&d.inst.instance)?;
            let sch = schedule()?;
            let cfg = d.config(if d.model == Model::Closed { Model::Secular } else { d.model });
            cfg.validate()?;
            let prep = PreparedAnneal::new(&inst, &sch, cfg.grid_points, cfg.levels)?;
            let bath = d.bath.bath()?;
            let traj = prep.open(&bath, &cfg)?;
            let opts = FreezeoutOptions { tol_eq: a.tol_eq, tol_frozen: a.tol_frozen, window: a.window };
            let report = analyze(&prep, &traj, &bath, opts)?;
            let params = json!({"instance": inst.content_hash(), "config": cfg, "bath": bath, "schedule": sch.name()});
            sink("freezeout").emit_serialized(None, &report, params)?;
        }
        Command::Sa(a) => {
            let inst = ProblemInstance::load(&a.inst.instance)?;
            let p = SaParams {
                sweeps: a.sweeps,
                beta_initial: a.beta_initial,
                beta_final: a.beta_final,
                shape: match a.shape {
                    ShapeArg::Linear => BetaShape::Linear,
                    ShapeArg::Geometric => BetaShape::Geometric,
                },
                repetitions: a.repetitions,
                seed: g.seed,
            };
            let set = run_sa(&inst, &p)?;
            let params = json!({"instance": inst.content_hash(), "sa": p, "estimate": set.estimate,
                "ground_energy": set.ground_energy, "ground_source": set.ground_source});
            sink("sa").emit_serialized(Some(set.to_csv()), &set, params)?;
        }
        Command::Sqa(a) => {
            let inst = ProblemInstance::load(&a.inst.instance)?;
            let (field, t_eff) = match a.gamma0 {
                Some(g0) => (TransverseField::Linear { gamma0: g0 }, a.t_eff.unwrap_or(0.05)),
                None => (
                    TransverseField::Schedule(schedule()?),
                    a.t_eff.unwrap_or(TempParams::from_millikelvin(qalab_core::dynamics::DEFAULT_T_MK)?.f_t_ghz),
                ),
            };
            let mut p = SqaParams::new(field, t_eff);
            p.sweeps = a.sweeps;
            p.trotter_slices = a.slices;
            p.repetitions = a.repetitions;
            p.seed = g.seed;
            p.global_moves = !a.no_global_moves;
            if a.best_slice {
                p.readout = Readout::BestSlice;
            }
            let set = run_sqa(&inst, &p)?;
            let params = json!({"instance": inst.content_hash(), "sweeps": p.sweeps, "slices": p.trotter_slices,
                "t_eff": p.t_eff, "repetitions": p.repetitions, "readout": set.readout, "estimate": set.estimate,
                "global_moves": p.global_moves});
            sink("sqa").emit_serialized(Some(set.to_csv()), &set, params)?;
        }
        Command::Bench(a) => {
            let cfg = BenchConfig::load(&a.config)?;
            let annealer = cfg.solver.build()?;
            let out = scaling_run(&cfg, annealer.as_ref())?;
            let params = json!({"config": cfg, "failures": out.failures,
                "aggregate": aggregate(&out.records, cfg.quantile)});
            sink("bench").emit_serialized(Some(records_to_csv(&out.records)), &out.records, params)?;
            if out.is_partial() {
                return Ok(Outcome::Partial(out.failures.len()));
            }
        }
        Command::Fit(a) => {
            let records = records_from_csv(&std::fs::read_to_string(&a.results)?)?;
            let solver = records.first().map(|r| r.solver.clone()).unwrap_or_default();
            let (policy, samples) = if a.policy == "optimal" {
                let opt = optimal_curve(&records, a.quantile)?;
                let samples: Vec<(usize, f64)> = records
                    .iter()
                    .filter(|r| opt.iter().any(|o| o.n == r.n && o.ta_opt == r.ta))
                    .map(|r| (r.n, r.tc))
                    .collect();
                (TaPolicy::Optimal, samples)
            } else {
                let ta: f64 = a
                    .policy
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("policy '{}' is neither 'optimal' nor a number", a.policy)))?;
                let samples = records.iter().filter(|r| r.ta == ta).map(|r| (r.n, r.tc)).collect();
                (TaPolicy::Fixed(ta), samples)
            };
            let fit = fit_slope(&solver, policy, &samples, a.quantile, g.seed)?;
            let params = json!({"results": a.results, "optimal": optimal_curve(&records, a.quantile).ok()});
            sink("fit").emit_serialized(None, &fit, params)?;
        }
        Command::Regimes(a) => {
            let points = match (&a.curve, &a.instance) {
                (Some(path), _) => read_curve(path)?,
                (None, Some(path)) => simulate_curve(a, &ProblemInstance::load(path)?, &schedule()?)?,
                (None, None) => return Err(Error::InvalidArgument("need --curve or --instance".into())),
            };
            let report = classify_regimes(&points)?;
            let params = json!({"non_monotonic": report.non_monotonic, "all_in_order": report.all_regimes_in_order(),
                "quasistatic_fit": report.quasistatic_fit});
            sink("regimes").emit_serialized(Some(regimes_csv(&report)), &report, params)?;
        }
    }
    Ok(Outcome::Done)
}

fn read_curve(path: &std::path::Path) -> Result<Vec<RegimePoint>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    reader
        .deserialize::<(f64, f64, f64)>()
        .map(|r| {
            let (ta, p0_open, p0_closed) = r?;
            Ok(RegimePoint { ta, p0_open, p0_closed })
        })
        .collect()
}

fn simulate_curve(a: &RegimesArgs, inst: &ProblemInstance, sch: &Schedule) -> Result<Vec<RegimePoint>> {
    if a.model == Model::Closed {
        return Err(Error::InvalidArgument("regimes compares an open model against closed evolution".into()));
    }
    let prep = PreparedAnneal::new(inst, sch, a.grid, a.levels)?;
    let bath = a.bath.bath()?;
    a.ladder
        .iter()
        .map(|&ta| {
            let mut cfg = DynamicsConfig::new(ta, a.model);
            cfg.levels = a.levels;
            cfg.grid_points = a.grid;
            cfg.step_tolerance = a.tol;
            cfg.include_nonadiabatic = true;
            let open = prep.open(&bath, &cfg)?.p0_final;
            cfg.model = Model::Closed;
            cfg.closed_mode = ClosedMode::Truncated;
            let closed = prep.closed(&cfg)?.p0_final;
            Ok(RegimePoint { ta, p0_open: open, p0_closed: closed })
        })
        .collect()
}

fn regimes_csv(r: &RegimeReport) -> String {
    let mut out = String::from("ta,P0_open,P0_closed,regime\n");
    for (p, l) in r.points.iter().zip(&r.labels) {
        let label = serde_json::to_value(l).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", p.ta, p.p0_open, p.p0_closed, label));
    }
    out
}
