//! Gain selection by simulated annealing on `w₁𝓛ₚ + w₂𝓛ᵥ + w₃𝓛_f`.

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundConfig, BoundSet, Gains, PhysicalParams};
use crate::rng::SeededRng;
use crate::{Error, Result};

pub const GAMMA_MIN: f64 = 1e-6;
pub const GAMMA_MAX: f64 = 1.0 - 1e-6;

/// Proposal scale as a fraction of `temperature × box width`.
pub const STEP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub t0: f64,
    pub cooling: f64,
    pub iters_per_epoch: usize,
    pub epochs: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { t0: 1.0, cooling: 0.95, iters_per_epoch: 200, epochs: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneSpec {
    pub weights: [f64; 3],
    pub k_lo: f64,
    pub k_hi: f64,
    pub initial: Gains,
    pub schedule: Schedule,
    pub seed: u64,
}

impl Default for TuneSpec {
    fn default() -> Self {
        Self::reference()
    }
}

impl TuneSpec {
    pub fn reference() -> Self {
        Self {
            weights: [15.0, 1.0, 1.0],
            k_lo: 0.1,
            k_hi: 30.0,
            initial: Gains::from_array([10.0, 10.0, 10.0, 10.0, 0.5, 0.5]),
            schedule: Schedule::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_lo > 0.0 && self.k_lo < self.k_hi && self.k_hi.is_finite()) {
            return Err(Error::InvalidParameter { name: "k_lo", value: self.k_lo });
        }
        for w in self.weights {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter { name: "weights", value: w });
            }
        }
        let s = &self.schedule;
        if !(s.cooling > 0.0 && s.cooling < 1.0) {
            return Err(Error::InvalidParameter { name: "cooling", value: s.cooling });
        }
        if !(s.t0 >= 0.0 && s.t0.is_finite()) {
            return Err(Error::InvalidParameter { name: "t0", value: s.t0 });
        }
        self.initial.validate()?;
        if !self.in_box(&self.initial.to_array()) {
            return Err(Error::Precondition("initial gains outside the tuning box"));
        }
        Ok(())
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        if i < 4 {
            (self.k_lo, self.k_hi)
        } else {
            (GAMMA_MIN, GAMMA_MAX)
        }
    }

    fn in_box(&self, x: &[f64; 6]) -> bool {
        (0..6).all(|i| {
            let (lo, hi) = self.bounds(i);
            (lo..=hi).contains(&x[i])
        })
    }
}

pub fn objective(g: &Gains, w: [f64; 3], p: &PhysicalParams, cfg: &BoundConfig) -> Result<f64> {
    let b = BoundSet::compute(g, p, cfg)?;
    let j = w[0] * b.lp + w[1] * b.lv + w[2] * b.lf;
    if j.is_finite() {
        Ok(j)
    } else {
        Err(Error::Internal("objective is not finite"))
    }
}

/// Folds `x` back into `[lo, hi]` by mirror reflection.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if !(w > 0.0) {
        return lo;
    }
    let mut y = (x - lo) % (2.0 * w);
    if y < 0.0 {
        y += 2.0 * w;
    }
    let y = if y > w { 2.0 * w - y } else { y };
    (lo + y).clamp(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub gains: Gains,
    pub objective: f64,
    pub initial_objective: f64,
    pub accepted: usize,
    pub rejected_invalid: usize,
}

/// One annealing chain. Candidates whose bounds cannot be evaluated are
/// rejected. The best point seen is returned.
pub fn tune(spec: &TuneSpec, p: &PhysicalParams, cfg: &BoundConfig) -> Result<TuneResult> {
    spec.validate()?;
    cfg.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let mut x = spec.initial.to_array();
    let j0 = objective(&spec.initial, spec.weights, p, cfg)?;
    let mut jx = j0;
    let (mut best, mut jbest) = (x, j0);
    let (mut accepted, mut invalid) = (0, 0);
    let mut temp = spec.schedule.t0;
    for _ in 0..spec.schedule.epochs {
        for _ in 0..spec.schedule.iters_per_epoch {
            let mut y = x;
            for (i, yi) in y.iter_mut().enumerate() {
                let (lo, hi) = spec.bounds(i);
                *yi = reflect(*yi + STEP_FRACTION * temp * (hi - lo) * rng.normal(), lo, hi);
            }
            let Ok(jy) = objective(&Gains::from_array(y), spec.weights, p, cfg) else {
                invalid += 1;
                continue;
            };
            let accept = jy <= jx || (temp > 0.0 && rng.unit() < ((jx - jy) / temp).exp());
            if accept {
                x = y;
                jx = jy;
                accepted += 1;
                if jy < jbest {
                    best = y;
                    jbest = jy;
                }
            }
        }
        temp *= spec.schedule.cooling;
    }
    Ok(TuneResult { gains: Gains::from_array(best), objective: jbest, initial_objective: j0, accepted, rejected_invalid: invalid })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_stays_in_box() {
        assert_eq!(reflect(1.5, 0.0, 1.0), 0.5);
        assert_eq!(reflect(-0.25, 0.0, 1.0), 0.25);
        assert_eq!(reflect(2.25, 0.0, 1.0), 0.25);
        assert_eq!(reflect(0.3, 0.0, 1.0), 0.3);
    }

    #[test]
    fn zero_temperature_short_run_never_worsens() {
        let spec = TuneSpec { schedule: Schedule { t0: 0.0, cooling: 0.5, iters_per_epoch: 5, epochs: 2 }, ..TuneSpec::reference() };
        let r = tune(&spec, &PhysicalParams::reference(), &BoundConfig::reference()).unwrap();
        assert_eq!(r.gains, spec.initial);
        assert!(r.objective <= r.initial_objective);
    }
}
