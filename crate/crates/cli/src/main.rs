use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use reachcert::config::{BoundSettings, PipelineConfig, SimSettings, SEED_ENV};
use reachcert::io::{self, BoundsArtifact, GainsArtifact, TreeArtifact};
use reachcert::pipeline::{self, InStage, Stage, StageError, StateRecord};
use reachcert_core::bezier::PiecewiseBezier;
use reachcert_core::bounds::{BoundConfig, Gains, PhysicalParams};
use reachcert_core::controller::DesiredState;
use reachcert_core::initial_set::{member_fraction, sample_initial_set, Recipe};
use reachcert_core::synth::SynthParams;
use reachcert_core::tube::{RrtParams, SafeTube};
use reachcert_core::tuner::TuneSpec;

/// Certified reach-avoid planning and simulation for a quadrotor.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Physical parameters (JSON: mass, inertia, gravity). Defaults to the
    /// reference vehicle.
    #[arg(long, global = true)]
    physical: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Anneal the controller gains.
    TuneGains(TuneArgs),
    /// Compute the tracking-error bounds for a gain set.
    Bounds(BoundsArgs),
    /// Grow an RRT of safe boxes and extract a tube.
    PlanTube(PlanArgs),
    /// Fit a piecewise Bézier reference through a tube.
    SynthTraj(SynthArgs),
    /// Simulate the closed loop from sampled or given initial states.
    Simulate(SimulateArgs),
    /// Sample initial-set membership around the initial hover state.
    SampleInit(SampleArgs),
    /// Check simulated traces against the bounds and the scenario.
    Certify(CertifyArgs),
    /// Run every stage and certify the sampled initial states.
    RunAll(RunAllArgs),
}

#[derive(Args)]
struct TuneArgs {
    /// Tuning spec (JSON). Defaults to the reference spec.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Independent annealing chains, seeded consecutively from `--seed`.
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Scenario supplying the acceleration envelope.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value = "gains.json")]
    out: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Gains file from `tune-gains`. Defaults to the reference gains.
    #[arg(long)]
    gains: Option<PathBuf>,
    #[arg(long, default_value_t = BoundSettings::default().psi_bar)]
    psi_bar: f64,
    #[arg(long, default_value_t = BoundSettings::default().alpha_psi)]
    alpha_psi: f64,
    #[arg(long, default_value_t = BoundSettings::default().v1_bar)]
    v1_bar: f64,
    #[arg(long, default_value_t = BoundSettings::default().eps)]
    eps: f64,
    #[arg(long, default_value = "bounds.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    bounds: PathBuf,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = RrtParams::default().n_v)]
    n_v: usize,
    #[arg(long, default_value_t = RrtParams::default().c_sample)]
    c_sample: f64,
    #[arg(long, default_value_t = RrtParams::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = RrtParams::default().max_rejections)]
    max_rejections: usize,
    #[arg(long, default_value = "tube.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    tube: PathBuf,
    #[arg(long)]
    bounds: PathBuf,
    #[arg(long, default_value_t = SynthParams::default().t0)]
    t0: f64,
    #[arg(long, default_value_t = SynthParams::default().alpha_t)]
    alpha_t: f64,
    #[arg(long, default_value_t = SynthParams::default().degree)]
    np: usize,
    #[arg(long, default_value_t = SynthParams::default().eps)]
    eps: f64,
    #[arg(long, default_value_t = SynthParams::default().max_outer_iters)]
    max_iters: usize,
    /// Also require zero velocity and acceleration at the end.
    #[arg(long)]
    terminal_rest: bool,
    #[arg(long, default_value = "trajectory.json")]
    out: PathBuf,
    /// Attempted horizons and the dense-sampling check.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    bounds: PathBuf,
    #[arg(long)]
    trajectory: PathBuf,
    /// Initial states (JSON list). Sampled from the certified set when absent.
    #[arg(long)]
    states: Option<PathBuf>,
    #[arg(long, default_value_t = SimSettings::default().count)]
    count: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SimSettings::default().rate)]
    rate: f64,
    /// Simulate states outside the certified initial set too.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value = "traces")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecipeArg {
    Position,
    Attitude,
    Simulation,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    bounds: PathBuf,
    #[arg(long, value_enum, default_value = "position")]
    recipe: RecipeArg,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "samples.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    bounds: PathBuf,
    /// Trace CSV files, or directories searched for `*.csv`.
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    #[arg(long, default_value = "certification.json")]
    out: PathBuf,
}

#[derive(Args)]
struct RunAllArgs {
    /// Pipeline config (JSON). Every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Overrides every seed, including `REACHCERT_SEED`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

/// Stage failures exit with 2, failed certification with 1.
enum Failure {
    Stage(StageError),
    Rejected(String),
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure::Stage(e)
    }
}

fn fail(stage: Stage, error: anyhow::Error) -> Failure {
    Failure::Stage(StageError { stage, error })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn physical(path: &Option<PathBuf>) -> Result<PhysicalParams> {
    match path {
        Some(p) => io::read_json(p),
        None => Ok(PhysicalParams::reference()),
    }
}

fn load_bounds(path: &Path) -> Result<(BoundsArtifact, reachcert_core::bounds::BoundSet)> {
    let art: BoundsArtifact = io::read_json(path)?;
    let b = art.rebuild().with_context(|| path.display().to_string())?;
    Ok((art, b))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let p = physical(&cli.physical).in_stage(Stage::Load)?;
    match cli.command {
        Command::TuneGains(a) => {
            let mut spec: TuneSpec = match &a.config {
                Some(f) => io::read_json(f).in_stage(Stage::Load)?,
                None => TuneSpec::reference(),
            };
            if let Some(seed) = a.seed {
                spec.seed = seed;
            }
            if let Some(e) = a.epochs {
                spec.schedule.epochs = e;
            }
            let cfg = match &a.scenario {
                Some(f) => BoundSettings::default().config(&io::load_scenario(f).in_stage(Stage::Load)?),
                None => BoundConfig::reference(),
            };
            let art = pipeline::tune_gains(&spec, &p, &cfg, a.chains).in_stage(Stage::TuneGains)?;
            io::write_json(&a.out, &art).in_stage(Stage::TuneGains)?;
            println!("{}", serde_json::to_string(&art.gains).expect("gains serialize"));
        }
        Command::Bounds(a) => {
            let s = io::load_scenario(&a.scenario).in_stage(Stage::Load)?;
            let gains: Gains = match &a.gains {
                Some(f) => io::read_json::<GainsArtifact>(f).in_stage(Stage::Load)?.gains,
                None => Gains::reference(),
            };
            let settings = BoundSettings { psi_bar: a.psi_bar, alpha_psi: a.alpha_psi, v1_bar: a.v1_bar, eps: a.eps };
            let (_, art) = pipeline::compute_bounds(&gains, &p, &settings.config(&s), s.f_max).in_stage(Stage::Bounds)?;
            io::write_json(&a.out, &art).in_stage(Stage::Bounds)?;
            println!("{}", serde_json::to_string_pretty(&art.bounds).expect("bounds serialize"));
            if !art.thrust_compatible {
                return Err(Failure::Rejected(format!("thrust bound {} exceeds f_max = {}", art.bounds.fbar, s.f_max)));
            }
        }
        Command::PlanTube(a) => {
            let s = io::load_scenario(&a.scenario).in_stage(Stage::Load)?;
            let (art, _) = load_bounds(&a.bounds).in_stage(Stage::Load)?;
            let params = RrtParams { n_v: a.n_v, c_sample: a.c_sample, alpha: a.alpha, seed: a.seed, max_rejections: a.max_rejections };
            match pipeline::plan(&s, art.bounds.lp, &params).in_stage(Stage::PlanTube)? {
                Ok(tube) => {
                    io::write_json(&a.out, &tube).in_stage(Stage::PlanTube)?;
                    log::info!("tube with {} segments written to {}", tube.segments(), a.out.display());
                }
                Err(tree) => {
                    let tree_path = a.out.with_extension("tree.json");
                    io::write_json(&tree_path, &TreeArtifact::from(&tree)).in_stage(Stage::PlanTube)?;
                    return Err(fail(Stage::PlanTube, anyhow!("no vertex reached the target within {} samples (tree written to {})", a.n_v, tree_path.display())));
                }
            }
        }
        Command::SynthTraj(a) => {
            let s = io::load_scenario(&a.scenario).in_stage(Stage::Load)?;
            let (art, b) = load_bounds(&a.bounds).in_stage(Stage::Load)?;
            let tube: SafeTube = io::read_json(&a.tube).in_stage(Stage::Load)?;
            let params = SynthParams { t0: a.t0, alpha_t: a.alpha_t, max_outer_iters: a.max_iters, eps: a.eps, degree: a.np, terminal_rest: a.terminal_rest };
            let (curve, report) = pipeline::synth(&tube, &b.summary(), &s, &art.config, &art.physical, &params).in_stage(Stage::SynthTraj)?;
            if let Some(r) = &a.report {
                io::write_json(r, &report).in_stage(Stage::SynthTraj)?;
            }
            let Some(curve) = curve else {
                return Err(fail(Stage::SynthTraj, anyhow!("no feasible horizon in {} attempts", report.attempts.len())));
            };
            io::write_json(&a.out, &curve).in_stage(Stage::SynthTraj)?;
            log::info!("T = {:.4} s after {} attempts", curve.total_time(), report.attempts.len());
        }
        Command::Simulate(a) => {
            io::load_scenario(&a.scenario).in_stage(Stage::Load)?;
            let (art, b) = load_bounds(&a.bounds).in_stage(Stage::Load)?;
            let curve: PiecewiseBezier = io::read_json(&a.trajectory).in_stage(Stage::Load)?;
            let sim = SimSettings { count: a.count, seed: a.seed, rate: a.rate, ..SimSettings::default() };
            let starts = match &a.states {
                Some(f) => io::read_json::<Vec<StateRecord>>(f).and_then(|r| r.iter().map(StateRecord::state).collect()).in_stage(Stage::Load)?,
                None => pipeline::sample_starts(&curve, &b, &art.gains, &art.config, &art.physical, &sim).in_stage(Stage::SampleInit)?,
            };
            let records: Vec<StateRecord> = starts.iter().map(StateRecord::from).collect();
            io::write_json(&a.out_dir.join("initial_states.json"), &records).in_stage(Stage::Simulate)?;
            let traces = pipeline::simulate_batch(&starts, &curve, &art.gains, &art.physical, &b, &art.config, &sim.options(a.force)).in_stage(Stage::Simulate)?;
            for (k, tr) in traces.iter().enumerate() {
                io::write_trace_csv(&a.out_dir.join(pipeline::trace_name(k)), tr).in_stage(Stage::Simulate)?;
            }
            log::info!("{} traces written to {}", traces.len(), a.out_dir.display());
        }
        Command::SampleInit(a) => {
            let s = io::load_scenario(&a.scenario).in_stage(Stage::Load)?;
            let (art, b) = load_bounds(&a.bounds).in_stage(Stage::Load)?;
            let recipe = match a.recipe {
                RecipeArg::Position => Recipe::Position,
                RecipeArg::Attitude => Recipe::Attitude,
                RecipeArg::Simulation => Recipe::Simulation,
            };
            let d0 = DesiredState::hover(s.p0);
            let samples = sample_initial_set(&d0, &b.matrices, &art.gains, &art.config, &art.physical, recipe, a.n, a.seed);
            io::write_samples_csv(&a.out, &samples).in_stage(Stage::SampleInit)?;
            println!("member fraction {:.4} over {} samples", member_fraction(&samples), samples.len());
        }
        Command::Certify(a) => {
            let s = io::load_scenario(&a.scenario).in_stage(Stage::Load)?;
            let (art, _) = load_bounds(&a.bounds).in_stage(Stage::Load)?;
            let traces = load_traces(&a.traces).in_stage(Stage::Load)?;
            let c = pipeline::certify_batch(&traces, &art.bounds, &s);
            io::write_json(&a.out, &c).in_stage(Stage::Certify)?;
            report(&c)?;
        }
        Command::RunAll(a) => {
            let mut cfg: PipelineConfig = match &a.config {
                Some(f) => io::read_json(f).in_stage(Stage::Load)?,
                None => PipelineConfig::default(),
            };
            if cli.physical.is_some() {
                cfg.physical = p;
            }
            cfg.apply_env().in_stage(Stage::Load)?;
            if let Some(seed) = a.seed {
                cfg.set_seed(seed);
            }
            let scenario = match (&a.scenario, &cfg.scenario, &a.config) {
                (Some(s), _, _) => s.clone(),
                (None, Some(s), Some(c)) => c.parent().unwrap_or(Path::new(".")).join(s),
                (None, Some(s), None) => s.clone(),
                (None, None, _) => return Err(fail(Stage::Load, anyhow!("no scenario given; pass --scenario or set it in the config"))),
            };
            let r = pipeline::run_pipeline(&cfg, &scenario, &a.out_dir)?;
            report(&r.certification)?;
        }
    }
    Ok(())
}

fn load_traces(paths: &[PathBuf]) -> Result<Vec<(String, reachcert_core::dynamics::SimulationTrace)>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        bail!("no trace files found");
    }
    files.iter().map(|f| Ok((f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(), io::read_trace_csv(f)?))).collect()
}

fn report(c: &pipeline::CertificationArtifact) -> Result<(), Failure> {
    if c.passed {
        println!("certified: {} traces, 0 violations", c.traces);
        return Ok(());
    }
    let mut msg = format!("certification failed: {} of {} traces violated {} samples", c.failed_traces, c.traces, c.violations);
    for r in c.results.iter().filter(|r| !r.report.passed) {
        msg.push_str(&format!("\n  {}: {}", r.trace, r.report.violated().join(", ")));
    }
    Err(Failure::Rejected(msg))
}
