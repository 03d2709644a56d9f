//! Artifact files: JSON for structured data, CSV for traces and samples.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use reachcert_core::bounds::{BoundConfig, BoundSet, BoundSummary, Gains, PhysicalParams};
use reachcert_core::dynamics::{QuadState, SimulationTrace, TraceSample};
use reachcert_core::geometry::Scenario;
use reachcert_core::initial_set::InitialSample;
use reachcert_core::tube::RrtTree;
use reachcert_core::tuner::TuneResult;
use reachcert_core::{Mat3, Rot3, Vec3};

/// Pretty JSON with a trailing newline. Output depends only on the value.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Reads a scenario and checks its invariants.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let s: Scenario = read_json(path)?;
    s.validate().with_context(|| format!("invalid scenario {}", path.display()))?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsArtifact {
    pub gains: Gains,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuneResult>,
}

/// Everything needed to rebuild the bound set, plus the values themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsArtifact {
    pub gains: Gains,
    pub physical: PhysicalParams,
    pub config: BoundConfig,
    pub bounds: BoundSummary,
    /// `m‖a_max‖`.
    pub m_amax: f64,
    pub f_max: f64,
    pub thrust_compatible: bool,
}

impl BoundsArtifact {
    /// Recomputes the bound set and rejects files whose stored values
    /// disagree with it.
    pub fn rebuild(&self) -> Result<BoundSet> {
        let b = BoundSet::compute(&self.gains, &self.physical, &self.config)?;
        if b.summary() != self.bounds {
            bail!("stored bounds do not match their inputs; regenerate the bounds file");
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeArtifact {
    pub reached: Option<usize>,
    pub vertices: Vec<Vec3>,
    pub parents: Vec<Option<usize>>,
}

impl From<&RrtTree> for TreeArtifact {
    fn from(t: &RrtTree) -> Self {
        Self { reached: t.reached, vertices: t.vertices.clone(), parents: t.parents.clone() }
    }
}

pub const TRACE_HEADER: [&str; 26] = [
    "t", "px", "py", "pz", "vx", "vy", "vz", "r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33", "wx", "wy", "wz", "ep", "ev", "V1", "V2", "V",
    "f", "Fd3",
];

pub fn write_trace_csv(path: &Path, tr: &SimulationTrace) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(TRACE_HEADER)?;
    for s in &tr.samples {
        let st = &s.state;
        let m = st.r.matrix();
        let mut row = vec![s.t, st.p.x, st.p.y, st.p.z, st.v.x, st.v.y, st.v.z];
        row.extend(m.m.iter().flatten());
        row.extend([st.w.x, st.w.y, st.w.z, s.ep, s.ev, s.v1, s.v2, s.v, s.f, s.fd3]);
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]. Step counts are not stored
/// and come back as zero.
pub fn read_trace_csv(path: &Path) -> Result<SimulationTrace> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if r.headers()?.iter().ne(TRACE_HEADER) {
        bail!("{}: unexpected trace header", path.display());
    }
    let mut samples = Vec::new();
    for (k, rec) in r.deserialize::<Vec<f64>>().enumerate() {
        let x = rec.with_context(|| format!("{}: row {}", path.display(), k + 2))?;
        if x.len() != 26 {
            bail!("{}: row {} has {} fields", path.display(), k + 2, x.len());
        }
        let r = Rot3::from_matrix_unchecked(Mat3::from_fn(|i, j| x[7 + 3 * i + j]));
        let state = QuadState { p: Vec3::new(x[1], x[2], x[3]), v: Vec3::new(x[4], x[5], x[6]), r, w: Vec3::new(x[16], x[17], x[18]) };
        samples.push(TraceSample { t: x[0], state, ep: x[19], ev: x[20], v1: x[21], v2: x[22], v: x[23], f: x[24], fd3: x[25] });
    }
    Ok(SimulationTrace { samples, accepted_steps: 0, rejected_steps: 0 })
}

pub const SAMPLE_HEADER: [&str; 19] = [
    "dpx", "dpy", "dpz", "dvx", "dvy", "dvz", "xix", "xiy", "xiz", "wx", "wy", "wz", "member", "psi", "psi_limit", "rate_energy", "rate_energy_limit", "V1",
    "V1_limit",
];

pub fn write_samples_csv(path: &Path, samples: &[InitialSample]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(SAMPLE_HEADER)?;
    for s in samples {
        let (q, r) = (&s.perturbation, &s.report);
        let mut row: Vec<String> = [q.dp, q.dv, q.xi, q.w].iter().flat_map(|v| v.to_array()).map(|x| x.to_string()).collect();
        row.push(u8::from(r.member).to_string());
        row.extend([r.psi, r.psi_limit, r.rate_energy, r.rate_energy_limit, r.v1, r.v1_limit].map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
