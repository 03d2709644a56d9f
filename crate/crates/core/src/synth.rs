//! Time-scaled synthesis of a piecewise Bézier curve through a safe tube.
//!
//! Segment durations are fixed fractions of a horizon `T`, proportional to
//! the waypoint spacing. For each candidate horizon `T₀·α_Tᵏ` one LP over
//! all control points is solved; the first feasible horizon wins.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::bezier::{assemble, CorridorSpec, PiecewiseBezier};
use crate::bounds::{BoundConfig, BoundSummary, PhysicalParams};
use crate::geometry::{Box3, Scenario};
use crate::lp::{DenseSimplex, FeasibilitySolver, LpOptions, LpStatus};
use crate::tube::SafeTube;
use crate::{Error, Result, Vec3};

/// Segments shorter than this fraction of the path length are dropped.
pub const MIN_SEGMENT_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub t0: f64,
    pub alpha_t: f64,
    pub max_outer_iters: usize,
    pub eps: f64,
    pub degree: usize,
    #[serde(default)]
    pub terminal_rest: bool,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { t0: 10.0, alpha_t: 1.1, max_outer_iters: 60, eps: 1e-6, degree: 14, terminal_rest: false }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::InvalidParameter { name: "t0", value: self.t0 });
        }
        if !(self.alpha_t > 1.0 && self.alpha_t.is_finite()) {
            return Err(Error::InvalidParameter { name: "alpha_t", value: self.alpha_t });
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidParameter { name: "max_outer_iters", value: 0.0 });
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter { name: "eps", value: self.eps });
        }
        if self.degree < 4 {
            return Err(Error::InvalidParameter { name: "degree", value: self.degree as f64 });
        }
        Ok(())
    }

    /// Horizon of attempt `k`.
    pub fn horizon(&self, k: usize) -> f64 {
        self.t0 * self.alpha_t.powi(k as i32)
    }
}

/// Boxes and duration fractions derived from a tube.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub segment_boxes: Vec<Box3>,
    pub terminal_box: Box3,
    /// Duration fractions, summing to one.
    pub fractions: Vec<f64>,
    /// Number of segments dropped for being too short.
    pub dropped: usize,
}

impl Corridor {
    pub fn from_tube(tube: &SafeTube) -> Result<Self> {
        let n = tube.nodes.len();
        if n == 0 {
            return Err(Error::Precondition("tube has no waypoints"));
        }
        let boxes: Vec<Box3> = (0..n).map(|i| Box3::new(tube.lo(i), tube.hi(i))).collect::<Result<_>>()?;
        let terminal_box = boxes[n - 1];
        let lengths: Vec<f64> = (1..n).map(|i| (tube.nodes[i].waypoint - tube.nodes[i - 1].waypoint).norm()).collect();
        let total: f64 = lengths.iter().sum();
        let mut segment_boxes = Vec::new();
        let mut kept = Vec::new();
        for (i, &l) in lengths.iter().enumerate() {
            if total > 0.0 && l >= MIN_SEGMENT_FRACTION * total {
                segment_boxes.push(boxes[i]);
                kept.push(l);
            }
        }
        let dropped = lengths.len() - kept.len();
        if kept.is_empty() {
            // stationary tube: one segment in the first box
            return Ok(Self { segment_boxes: Vec::from([boxes[0]]), terminal_box, fractions: Vec::from([1.0]), dropped });
        }
        let kept_total: f64 = kept.iter().sum();
        let fractions = kept.iter().map(|l| l / kept_total).collect();
        Ok(Self { segment_boxes, terminal_box, fractions, dropped })
    }

    pub fn durations(&self, horizon: f64) -> Vec<f64> {
        self.fractions.iter().map(|q| q * horizon).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub horizon: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthReport {
    pub curve: Option<PiecewiseBezier>,
    pub attempts: Vec<Attempt>,
    pub corridor: Corridor,
}

impl SynthReport {
    pub fn last_status(&self) -> Option<LpStatus> {
        self.attempts.last().map(|a| a.status)
    }
}

pub fn corridor_spec<'a>(c: &'a Corridor, scenario: &Scenario, cfg: &BoundConfig, p: &PhysicalParams, params: &SynthParams) -> CorridorSpec<'a> {
    CorridorSpec {
        terminal_rest: params.terminal_rest,
        ..CorridorSpec::from_scenario(&c.segment_boxes, c.terminal_box, scenario, cfg.a_max, p.mass(), p.gravity(), params.eps)
    }
}

pub fn synthesize(tube: &SafeTube, b: &BoundSummary, scenario: &Scenario, cfg: &BoundConfig, p: &PhysicalParams, params: &SynthParams) -> Result<SynthReport> {
    synthesize_with(&DenseSimplex, &LpOptions::default(), tube, b, scenario, cfg, p, params)
}

#[allow(clippy::too_many_arguments)]
pub fn synthesize_with(
    solver: &dyn FeasibilitySolver,
    opts: &LpOptions,
    tube: &SafeTube,
    b: &BoundSummary,
    scenario: &Scenario,
    cfg: &BoundConfig,
    p: &PhysicalParams,
    params: &SynthParams,
) -> Result<SynthReport> {
    params.validate()?;
    let corridor = Corridor::from_tube(tube)?;
    let spec = corridor_spec(&corridor, scenario, cfg, p, params);
    let mut attempts = Vec::new();
    let mut curve = None;
    for k in 0..params.max_outer_iters {
        let horizon = params.horizon(k);
        let durations = corridor.durations(horizon);
        let lp = assemble(&spec, b, &durations, params.degree)?;
        let sol = solver.solve(&lp, opts)?;
        attempts.push(Attempt { horizon, status: sol.status, iterations: sol.iterations });
        if let Some(x) = sol.point {
            curve = Some(PiecewiseBezier::from_variables(&x, &durations, params.degree)?);
            break;
        }
    }
    Ok(SynthReport { curve, attempts, corridor })
}

/// Largest violation of each continuous-time condition found by sampling.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CurveCheck {
    pub corridor: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub thrust_floor: f64,
    pub terminal: f64,
    /// Largest deviation of the initial position, velocity, acceleration and
    /// jerk from `(p₀, v₀, 0, 0)`.
    pub initial: f64,
}

impl CurveCheck {
    pub fn max_violation(&self) -> f64 {
        [self.corridor, self.velocity, self.acceleration, self.thrust_floor, self.terminal].iter().fold(0.0, |m, v| m.max(*v))
    }
}

fn box_excess(x: Vec3, b: &Box3) -> f64 {
    (0..3).map(|i| (b.lo()[i] - x[i]).max(x[i] - b.hi()[i])).fold(f64::NEG_INFINITY, f64::max).max(0.0)
}

/// Samples `per_segment` points per segment (both ends included).
pub fn verify_curve(curve: &PiecewiseBezier, spec: &CorridorSpec<'_>, b: &BoundSummary, per_segment: usize) -> Result<CurveCheck> {
    if curve.segments().len() != spec.segment_boxes.len() {
        return Err(Error::Dimension("curve and corridor disagree on the segment count"));
    }
    let mut out = CurveCheck::default();
    let vlim = spec.v_max - Vec3::splat(b.lv);
    let g = Vec3::E3 * spec.gravity;
    let floor = (b.lf - spec.mass * spec.gravity + spec.eps) / spec.mass;
    let per = per_segment.max(2);
    for (i, seg) in curve.segments().iter().enumerate() {
        let bx = &spec.segment_boxes[i];
        for k in 0..per {
            let s = seg.duration * k as f64 / (per - 1) as f64;
            let pos = seg.eval_local(s, 0);
            let vel = seg.eval_local(s, 1);
            let acc = seg.eval_local(s, 2);
            out.corridor = out.corridor.max(box_excess(pos, bx));
            out.velocity = out.velocity.max((vel.abs() - vlim).norm_inf_signed());
            out.acceleration = out.acceleration.max(((acc + g).abs() - spec.a_max).norm_inf_signed());
            out.thrust_floor = out.thrust_floor.max(floor - acc.z);
        }
    }
    out.terminal = box_excess(curve.end(), &spec.terminal_box);
    let t0 = [
        (curve.eval(0.0, 0)? - spec.p0).norm_inf(),
        (curve.eval(0.0, 1)? - spec.v0).norm_inf(),
        curve.eval(0.0, 2)?.norm_inf(),
        curve.eval(0.0, 3)?.norm_inf(),
    ];
    out.initial = t0.iter().fold(0.0, |m, v| m.max(*v));
    Ok(out)
}

trait SignedMax {
    fn norm_inf_signed(self) -> f64;
}

impl SignedMax for Vec3 {
    /// Largest component, clipped below at zero.
    fn norm_inf_signed(self) -> f64 {
        self.x.max(self.y).max(self.z).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tube::TubeNode;

    #[test]
    fn horizons_follow_the_geometric_sequence() {
        let p = SynthParams::default();
        assert_eq!(p.horizon(0), 10.0);
        assert!((p.horizon(2) - 12.1).abs() < 1e-12);
    }

    #[test]
    fn stationary_tube_is_one_segment() {
        let tube = SafeTube { nodes: Vec::from([TubeNode { waypoint: Vec3::ONES, radius: Vec3::splat(0.2) }]) };
        let c = Corridor::from_tube(&tube).unwrap();
        assert_eq!(c.segment_boxes.len(), 1);
        assert_eq!(c.fractions, Vec::from([1.0]));
    }

    #[test]
    fn zero_length_segment_is_dropped() {
        let node = |x: f64| TubeNode { waypoint: Vec3::new(x, 1.0, 1.0), radius: Vec3::splat(0.5) };
        let tube = SafeTube { nodes: Vec::from([node(1.0), node(1.0), node(1.4)]) };
        let c = Corridor::from_tube(&tube).unwrap();
        assert_eq!(c.dropped, 1);
        assert_eq!(c.segment_boxes.len(), 1);
        assert_eq!(c.fractions, Vec::from([1.0]));
    }
}
