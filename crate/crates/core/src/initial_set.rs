//! Sampling of initial states around a desired start.
//!
//! `Position` and `Attitude` perturb one error channel and keep the desired
//! state fixed, so the remaining errors are exactly zero. `Simulation` draws
//! a full state (position, velocity, attitude, body rate) and recomputes the
//! desired state from it, as the simulator does.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bounds::{initial_set_check, BoundConfig, Gains, InitialSetReport, LyapunovMatrices, PhysicalParams};
use crate::controller::{desired_state, DesiredState, Reference};
use crate::dynamics::QuadState;
use crate::rng::SeededRng;
use crate::so3::exp_so3;
use crate::{Error, Result, Rot3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    /// `e_p ~ U(0.21·[−1,1]³)`.
    Position,
    /// `R = R_d·exp(ξ̂)`, `ξ ~ U(0.1·[−1,1]³)`.
    Attitude,
    /// `δp, δv ~ U(0.3·[−1,1]³)`, `R = exp(ξ̂)` with `ξ ~ U(0.5·[−1,1]³)`,
    /// `ω ~ U([−1,1]³)`.
    Simulation,
}

impl Recipe {
    pub fn draw(self, rng: &mut SeededRng) -> Perturbation {
        match self {
            Recipe::Position => Perturbation { dp: rng.cube(0.21), ..Perturbation::default() },
            Recipe::Attitude => Perturbation { xi: rng.cube(0.1), ..Perturbation::default() },
            Recipe::Simulation => Perturbation { dp: rng.cube(0.3), dv: rng.cube(0.3), xi: rng.cube(0.5), w: rng.cube(1.0) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Perturbation {
    pub dp: Vec3,
    pub dv: Vec3,
    pub xi: Vec3,
    pub w: Vec3,
}

impl Perturbation {
    /// State whose errors relative to `d` are `(dp, dv, ·, w)` with
    /// `R = R_d·exp(ξ̂)`.
    pub fn relative_to(&self, d: &DesiredState) -> QuadState {
        let r = d.r * exp_so3(self.xi);
        let w_d_body = *r.transpose().matrix() * (*d.r.matrix() * d.w);
        QuadState { p: d.p + self.dp, v: d.v + self.dv, r, w: w_d_body + self.w }
    }

    /// State `(p_d + δp, ṗ_d + δv, exp(ξ̂), ω)` in absolute attitude terms.
    pub fn absolute(&self, p_d: Vec3, v_d: Vec3) -> Result<QuadState> {
        let r: Rot3 = exp_so3(self.xi);
        Ok(QuadState { p: p_d + self.dp, v: v_d + self.dv, r, w: self.w })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSample {
    pub perturbation: Perturbation,
    pub report: InitialSetReport,
}

/// Membership of `n` perturbed states, each measured against the fixed
/// desired state `d0`.
pub fn sample_initial_set(
    d0: &DesiredState,
    l: &LyapunovMatrices,
    g: &Gains,
    cfg: &BoundConfig,
    p: &PhysicalParams,
    recipe: Recipe,
    n: usize,
    seed: u64,
) -> Vec<InitialSample> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|_| {
            let perturbation = recipe.draw(&mut rng);
            let s = perturbation.relative_to(d0);
            InitialSample { perturbation, report: initial_set_check(&s, d0, l, g, cfg, p) }
        })
        .collect()
}

pub fn member_fraction(samples: &[InitialSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|s| s.report.member).count() as f64 / samples.len() as f64
}

/// Draws `count` initial states with the simulation recipe around
/// `reference(0)` and keeps those in the certified initial set, with the
/// desired state recomputed from each candidate.
#[allow(clippy::too_many_arguments)]
pub fn sample_certified_states(
    reference: &dyn Reference,
    l: &LyapunovMatrices,
    g: &Gains,
    cfg: &BoundConfig,
    p: &PhysicalParams,
    count: usize,
    seed: u64,
    max_draws: usize,
) -> Result<Vec<QuadState>> {
    let mut rng = SeededRng::new(seed);
    let flat = reference.flat(0.0);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0;
    while out.len() < count {
        if draws >= max_draws {
            return Err(Error::SamplingExhausted(draws));
        }
        draws += 1;
        let s = Recipe::Simulation.draw(&mut rng).absolute(flat.p, flat.v)?;
        let Ok(d0) = desired_state(&s, 0.0, reference, g, p) else {
            continue;
        };
        if initial_set_check(&s, &d0, l, g, cfg, p).member {
            out.push(s);
        }
    }
    Ok(out)
}
