//! Pipeline configuration. Every field has a default, so `{}` is a valid
//! config file.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use reachcert_core::bounds::{BoundConfig, Gains, PhysicalParams};
use reachcert_core::dynamics::{SimOptions, Tolerances};
use reachcert_core::geometry::Scenario;
use reachcert_core::synth::SynthParams;
use reachcert_core::tube::RrtParams;
use reachcert_core::tuner::TuneSpec;

/// Name of the environment variable that overrides every seed.
pub const SEED_ENV: &str = "REACHCERT_SEED";

/// Bound parameters that do not come from the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundSettings {
    pub psi_bar: f64,
    pub alpha_psi: f64,
    pub v1_bar: f64,
    pub eps: f64,
}

impl Default for BoundSettings {
    fn default() -> Self {
        let r = BoundConfig::reference();
        Self { psi_bar: r.psi_bar, alpha_psi: r.alpha_psi, v1_bar: r.v1_bar, eps: r.eps }
    }
}

impl BoundSettings {
    /// The acceleration envelope is the scenario's.
    pub fn config(&self, s: &Scenario) -> BoundConfig {
        BoundConfig { psi_bar: self.psi_bar, alpha_psi: self.alpha_psi, v1_bar: self.v1_bar, a_max: s.a_max, eps: self.eps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    /// Number of sampled initial states.
    pub count: usize,
    pub seed: u64,
    pub max_draws: usize,
    /// Output samples per second.
    pub rate: f64,
    pub atol: f64,
    pub rtol: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        let t = Tolerances::default();
        Self { count: 20, seed: 0, max_draws: 1_000_000, rate: 100.0, atol: t.atol, rtol: t.rtol }
    }
}

impl SimSettings {
    pub fn options(&self, force: bool) -> SimOptions {
        SimOptions { tol: Tolerances { atol: self.atol, rtol: self.rtol, ..Tolerances::default() }, rate: self.rate, force }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Relative paths are taken from the config file's directory.
    pub scenario: Option<PathBuf>,
    pub physical: PhysicalParams,
    pub bounds: BoundSettings,
    /// Used as is unless `tune` is set.
    pub gains: Gains,
    pub tune: Option<TuneSpec>,
    /// Independent annealing chains; the best one wins.
    pub tune_chains: usize,
    pub rrt: RrtParams,
    pub synth: SynthParams,
    pub simulation: SimSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            physical: PhysicalParams::reference(),
            bounds: BoundSettings::default(),
            gains: Gains::reference(),
            tune: None,
            tune_chains: 1,
            rrt: RrtParams::default(),
            synth: SynthParams::default(),
            simulation: SimSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn set_seed(&mut self, seed: u64) {
        self.rrt.seed = seed;
        self.simulation.seed = seed;
        if let Some(t) = &mut self.tune {
            t.seed = seed;
        }
    }

    /// Applies `REACHCERT_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Some(seed) = env_seed()? {
            self.set_seed(seed);
        }
        Ok(())
    }
}

pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{SEED_ENV}={v} is not an unsigned integer"))?)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context(SEED_ENV),
    }
}
