//! Pipeline stages and the end-to-end run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use reachcert_core::bezier::PiecewiseBezier;
use reachcert_core::bounds::{thrust_compatible, BoundConfig, BoundSet, BoundSummary, Gains, PhysicalParams};
use reachcert_core::dynamics::{certify_trace, integrate, CertificationReport, QuadState, SimOptions, SimulationTrace};
use reachcert_core::geometry::{InflatedScenario, Scenario};
use reachcert_core::initial_set::sample_certified_states;
use reachcert_core::synth::{corridor_spec, synthesize, verify_curve, Attempt, CurveCheck, SynthParams};
use reachcert_core::tube::{plan_tube, RrtParams, RrtTree, SafeTube};
use reachcert_core::tuner::{tune, TuneSpec};
use reachcert_core::{Mat3, Rot3, Vec3};

use crate::config::{PipelineConfig, SimSettings};
use crate::io::{self, BoundsArtifact, GainsArtifact, TreeArtifact};

/// Samples per segment in the post-synthesis check.
pub const DENSE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    TuneGains,
    Bounds,
    PlanTube,
    SynthTraj,
    SampleInit,
    Simulate,
    Certify,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::TuneGains => "tune-gains",
            Stage::Bounds => "bounds",
            Stage::PlanTube => "plan-tube",
            Stage::SynthTraj => "synth-traj",
            Stage::SampleInit => "sample-init",
            Stage::Simulate => "simulate",
            Stage::Certify => "certify",
        }
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {:#}", self.stage.name(), self.error)
    }
}

impl std::error::Error for StageError {}

pub trait InStage<T> {
    fn in_stage(self, stage: Stage) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> InStage<T> for Result<T, E> {
    fn in_stage(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError { stage, error: e.into() })
    }
}

fn timed<T>(stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T, StageError> {
    let start = Instant::now();
    let out = f().in_stage(stage);
    log::info!("{} finished in {:.2} s", stage.name(), start.elapsed().as_secs_f64());
    out
}

/// Best of `chains` independent annealing runs seeded `seed, seed + 1, ...`.
/// Ties go to the lowest seed, so the result does not depend on scheduling.
pub fn tune_gains(spec: &TuneSpec, p: &PhysicalParams, cfg: &BoundConfig, chains: usize) -> Result<GainsArtifact> {
    if chains == 0 {
        bail!("at least one tuning chain is required");
    }
    let runs: Vec<_> = (0..chains as u64)
        .into_par_iter()
        .map(|k| tune(&TuneSpec { seed: spec.seed.wrapping_add(k), ..*spec }, p, cfg))
        .collect::<std::result::Result<_, _>>()?;
    let r = runs.into_iter().reduce(|best, r| if r.objective < best.objective { r } else { best }).expect("chains > 0");
    log::info!("tuned objective {:.6} (initial {:.6}, {} accepted)", r.objective, r.initial_objective, r.accepted);
    Ok(GainsArtifact { gains: r.gains, tuning: Some(r) })
}

pub fn compute_bounds(g: &Gains, p: &PhysicalParams, cfg: &BoundConfig, f_max: f64) -> Result<(BoundSet, BoundsArtifact)> {
    let b = BoundSet::compute(g, p, cfg)?;
    let art = BoundsArtifact {
        gains: *g,
        physical: *p,
        config: *cfg,
        bounds: b.summary(),
        m_amax: p.mass() * cfg.a_max.norm(),
        f_max,
        thrust_compatible: thrust_compatible(b.fbar, f_max),
    };
    Ok((b, art))
}

pub fn plan(s: &Scenario, lp: f64, params: &RrtParams) -> Result<std::result::Result<SafeTube, RrtTree>> {
    let inf = InflatedScenario::new(s, lp)?;
    Ok(plan_tube(&inf, params)?)
}

/// Synthesis record kept next to the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthArtifact {
    pub attempts: Vec<Attempt>,
    pub dropped_segments: usize,
    pub total_time: Option<f64>,
    /// Dense-sampling check of the returned curve.
    pub check: Option<CurveCheck>,
}

pub fn synth(tube: &SafeTube, b: &BoundSummary, s: &Scenario, cfg: &BoundConfig, p: &PhysicalParams, params: &SynthParams) -> Result<(Option<PiecewiseBezier>, SynthArtifact)> {
    let report = synthesize(tube, b, s, cfg, p, params)?;
    let check = match &report.curve {
        Some(c) => Some(verify_curve(c, &corridor_spec(&report.corridor, s, cfg, p, params), b, DENSE_SAMPLES)?),
        None => None,
    };
    let art = SynthArtifact {
        attempts: report.attempts.clone(),
        dropped_segments: report.corridor.dropped,
        total_time: report.curve.as_ref().map(|c| c.total_time()),
        check,
    };
    Ok((report.curve, art))
}

/// Serializable quadrotor state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub p: Vec3,
    pub v: Vec3,
    /// Rotation matrix, row-major.
    pub r: [[f64; 3]; 3],
    pub w: Vec3,
}

impl From<&QuadState> for StateRecord {
    fn from(s: &QuadState) -> Self {
        Self { p: s.p, v: s.v, r: s.r.matrix().m, w: s.w }
    }
}

impl StateRecord {
    pub fn state(&self) -> Result<QuadState> {
        let r = Rot3::new(Mat3::from_rows(self.r)).context("state attitude is not a rotation")?;
        Ok(QuadState { p: self.p, v: self.v, r, w: self.w })
    }
}

pub fn sample_starts(curve: &PiecewiseBezier, b: &BoundSet, g: &Gains, cfg: &BoundConfig, p: &PhysicalParams, sim: &SimSettings) -> Result<Vec<QuadState>> {
    Ok(sample_certified_states(curve, &b.matrices, g, cfg, p, sim.count, sim.seed, sim.max_draws)?)
}

/// Simulates every start in parallel; results keep the input order.
pub fn simulate_batch(
    starts: &[QuadState],
    curve: &PiecewiseBezier,
    g: &Gains,
    p: &PhysicalParams,
    b: &BoundSet,
    cfg: &BoundConfig,
    opts: &SimOptions,
) -> Result<Vec<SimulationTrace>> {
    starts
        .par_iter()
        .enumerate()
        .map(|(k, x0)| integrate(x0, curve, g, p, &b.matrices, cfg, opts).with_context(|| format!("trace {k}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCertification {
    pub trace: String,
    pub report: CertificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationArtifact {
    pub passed: bool,
    pub traces: usize,
    pub failed_traces: usize,
    pub violations: usize,
    pub results: Vec<TraceCertification>,
}

impl CertificationArtifact {
    pub fn new(results: Vec<TraceCertification>) -> Self {
        let failed_traces = results.iter().filter(|r| !r.report.passed).count();
        let violations = results.iter().flat_map(|r| &r.report.checks).map(|c| c.violations).sum();
        Self { passed: failed_traces == 0 && !results.is_empty(), traces: results.len(), failed_traces, violations, results }
    }
}

pub fn certify_batch(traces: &[(String, SimulationTrace)], b: &BoundSummary, s: &Scenario) -> CertificationArtifact {
    CertificationArtifact::new(traces.iter().map(|(name, tr)| TraceCertification { trace: name.clone(), report: certify_trace(tr, b, s) }).collect())
}

pub fn trace_name(k: usize) -> String {
    format!("trace_{k:02}.csv")
}

/// Outcome of [`run_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub certification: CertificationArtifact,
}

/// Files written by [`run_pipeline`], relative to the output directory.
pub const JSON_ARTIFACTS: [&str; 7] =
    ["gains.json", "bounds.json", "tube.json", "synthesis.json", "trajectory.json", "initial_states.json", "certification.json"];

/// tune (optional) → bounds → tube → trajectory → sampled starts → simulate
/// → certify, writing every artifact to `out`.
pub fn run_pipeline(cfg: &PipelineConfig, scenario: &Path, out: &Path) -> Result<RunReport, StageError> {
    let s = io::load_scenario(scenario).in_stage(Stage::Load)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).in_stage(Stage::Load)?;
    let p = cfg.physical;
    let bcfg = cfg.bounds.config(&s);

    let gains = timed(Stage::TuneGains, || {
        let art = match &cfg.tune {
            Some(spec) => tune_gains(spec, &p, &bcfg, cfg.tune_chains)?,
            None => GainsArtifact { gains: cfg.gains, tuning: None },
        };
        io::write_json(&out.join("gains.json"), &art)?;
        Ok(art.gains)
    })?;

    let b = timed(Stage::Bounds, || {
        let (b, art) = compute_bounds(&gains, &p, &bcfg, s.f_max)?;
        io::write_json(&out.join("bounds.json"), &art)?;
        log::info!("Lp = {:.6}, Lv = {:.6}, Lf = {:.6}, Fbar = {:.4}", b.lp, b.lv, b.lf, b.fbar);
        if !art.thrust_compatible {
            bail!("thrust bound {} exceeds f_max = {}", b.fbar, s.f_max);
        }
        Ok(b)
    })?;

    let tube = timed(Stage::PlanTube, || match plan(&s, b.lp, &cfg.rrt)? {
        Ok(tube) => {
            io::write_json(&out.join("tube.json"), &tube)?;
            log::info!("tube with {} segments", tube.segments());
            Ok(tube)
        }
        Err(tree) => {
            io::write_json(&out.join("rrt_tree.json"), &TreeArtifact::from(&tree))?;
            Err(anyhow!("no vertex reached the target within {} samples (tree written to rrt_tree.json)", cfg.rrt.n_v))
        }
    })?;

    let curve = timed(Stage::SynthTraj, || {
        let (curve, art) = synth(&tube, &b.summary(), &s, &bcfg, &p, &cfg.synth)?;
        io::write_json(&out.join("synthesis.json"), &art)?;
        let last = art.attempts.last().map(|a| a.status);
        let curve = curve.ok_or_else(|| anyhow!("no feasible horizon in {} attempts (last status {last:?})", art.attempts.len()))?;
        io::write_json(&out.join("trajectory.json"), &curve)?;
        log::info!("T = {:.4} s after {} attempts", curve.total_time(), art.attempts.len());
        Ok(curve)
    })?;

    let starts = timed(Stage::SampleInit, || {
        let starts = sample_starts(&curve, &b, &gains, &bcfg, &p, &cfg.simulation)?;
        let records: Vec<StateRecord> = starts.iter().map(StateRecord::from).collect();
        io::write_json(&out.join("initial_states.json"), &records)?;
        Ok(starts)
    })?;

    let traces = timed(Stage::Simulate, || {
        let traces = simulate_batch(&starts, &curve, &gains, &p, &b, &bcfg, &cfg.simulation.options(false))?;
        let named: Vec<(String, SimulationTrace)> = traces.into_iter().enumerate().map(|(k, t)| (trace_name(k), t)).collect();
        for (name, tr) in &named {
            io::write_trace_csv(&out.join("traces").join(name), tr)?;
        }
        Ok(named)
    })?;

    let certification = timed(Stage::Certify, || {
        let c = certify_batch(&traces, &b.summary(), &s);
        io::write_json(&out.join("certification.json"), &c)?;
        Ok(c)
    })?;
    Ok(RunReport { out_dir: out.to_path_buf(), certification })
}
