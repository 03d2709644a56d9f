//! Piecewise Bézier curves and the linear constraints that keep one inside a
//! safe tube.
//!
//! Segment `i` (of `N_s`) has duration `δᵢ` and control points
//! `cᵢ⁰ … cᵢᴺ`. Its k-th derivative is a Bézier curve of degree `N − k`
//! whose control points are the k-th forward differences scaled by
//! `N!/(N−k)!/δᵢᵏ`, so every bound on a derivative becomes a bound on finitely
//! many control-point combinations.
//!
//! # Constraint tally
//!
//! Per axis, with `N_s` segments of degree `N`:
//!
//! | family | equalities | `≤` rows |
//! |---|---|---|
//! | initial position, velocity, acceleration, jerk | 4 | |
//! | control points in their box | | `2 N_s (N+1)` |
//! | C⁰–C⁴ junctions | `5 (N_s − 1)` | |
//! | velocity | | `2 N_s N` |
//! | acceleration envelope | | `2 N_s (N−1)` |
//! | terminal point in the last box | | 2 |
//!
//! plus `N_s (N−1)` vertical thrust-floor rows on the z axis only, and
//! 2 more equalities per axis when terminal rest is requested.
//! Variables: `3 N_s (N+1)`, indexed `(segment, point, axis)` row-major.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundSummary;
use crate::controller::{FlatOutput, Reference};
use crate::geometry::{Box3, Scenario};
use crate::lp::LpProblem;
use crate::{Error, Result, Vec3};

/// Binomial coefficient as a float; exact for the degrees used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// `binomial(n, i) t^i (1 − t)^{n−i}` with `0⁰ = 1`.
pub fn bernstein(i: usize, n: usize, t: f64) -> Result<f64> {
    if i > n {
        return Err(Error::Precondition("Bernstein index exceeds the degree"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Precondition("Bernstein parameter outside [0, 1]"));
    }
    Ok(binomial(n, i) * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32))
}

/// `∏_{m<k} (n − m)`.
fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|m| (n - m) as f64).product()
}

/// Forward-difference weights `Δᵏ cʲ = Σ_r w_r c^{j+r}`.
fn difference_weights(k: usize) -> Vec<f64> {
    (0..=k).map(|r| if (k - r).is_multiple_of(2) { binomial(k, r) } else { -binomial(k, r) }).collect()
}

fn de_casteljau(points: &mut [Vec3], t: f64) -> Vec3 {
    let n = points.len();
    for level in 1..n {
        for j in 0..n - level {
            points[j] = points[j] * (1.0 - t) + points[j + 1] * t;
        }
    }
    points[0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub control_points: Vec<Vec3>,
}

impl Segment {
    /// Control points of the k-th derivative, in physical units.
    pub fn derivative_points(&self, k: usize) -> Vec<Vec3> {
        let n = self.control_points.len() - 1;
        if k > n {
            return vec![Vec3::ZERO];
        }
        let w = difference_weights(k);
        let scale = falling(n, k) / self.duration.powi(k as i32);
        (0..=n - k)
            .map(|j| w.iter().enumerate().fold(Vec3::ZERO, |acc, (r, &wr)| acc + self.control_points[j + r] * wr) * scale)
            .collect()
    }

    /// k-th derivative at local time `s` (seconds since the segment start);
    /// `s` outside `[0, δ]` extrapolates the polynomial.
    pub fn eval_local(&self, s: f64, k: usize) -> Vec3 {
        let mut pts = self.derivative_points(k);
        de_casteljau(&mut pts, s / self.duration)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRepr", into = "CurveRepr")]
pub struct PiecewiseBezier {
    segments: Vec<Segment>,
    knots: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    segments: Vec<Segment>,
}

impl TryFrom<CurveRepr> for PiecewiseBezier {
    type Error = Error;
    fn try_from(r: CurveRepr) -> Result<Self> {
        PiecewiseBezier::new(r.segments)
    }
}

impl From<PiecewiseBezier> for CurveRepr {
    fn from(c: PiecewiseBezier) -> Self {
        CurveRepr { segments: c.segments }
    }
}

impl PiecewiseBezier {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let Some(first) = segments.first() else {
            return Err(Error::Dimension("curve needs at least one segment"));
        };
        let np = first.control_points.len();
        if np < 5 {
            return Err(Error::Dimension("degree must be at least 4"));
        }
        let mut knots = Vec::with_capacity(segments.len() + 1);
        knots.push(0.0);
        for s in &segments {
            if s.control_points.len() != np {
                return Err(Error::Dimension("all segments must share one degree"));
            }
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::InvalidParameter { name: "duration", value: s.duration });
            }
            if s.control_points.iter().any(|c| !c.is_finite()) {
                return Err(Error::Dimension("control points must be finite"));
            }
            let last = *knots.last().unwrap_or(&0.0);
            knots.push(last + s.duration);
        }
        Ok(Self { segments, knots })
    }

    /// Curve of `n_s` segments from the flat variable vector of an LP
    /// solution.
    pub fn from_variables(x: &[f64], durations: &[f64], degree: usize) -> Result<Self> {
        let per = degree + 1;
        if x.len() != 3 * per * durations.len() {
            return Err(Error::Dimension("variable vector does not match the segment layout"));
        }
        let segments = durations
            .iter()
            .enumerate()
            .map(|(i, &d)| Segment {
                duration: d,
                control_points: (0..per).map(|j| Vec3::from_fn(|a| x[var(i, j, a, degree)])).collect(),
            })
            .collect();
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn degree(&self) -> usize {
        self.segments[0].control_points.len() - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn total_time(&self) -> f64 {
        *self.knots.last().unwrap_or(&0.0)
    }

    /// Index of the segment containing `t` (right-continuous; the last
    /// segment owns `T`). Times outside `[0, T]` map to the end segments.
    pub fn segment_at(&self, t: f64) -> usize {
        let n = self.segments.len();
        let k = self.knots[1..n].partition_point(|&knot| knot <= t);
        k.min(n - 1)
    }

    /// Order-`k` derivative at `t ∈ [0, T]`.
    pub fn eval(&self, t: f64, k: usize) -> Result<Vec3> {
        let total = self.total_time();
        if !(0.0..=total).contains(&t) {
            return Err(Error::OutOfDomain { t, total });
        }
        Ok(self.eval_extended(t, k))
    }

    /// Like [`eval`](Self::eval), but extends the end segments' polynomials
    /// beyond `[0, T]`.
    pub fn eval_extended(&self, t: f64, k: usize) -> Vec3 {
        let i = self.segment_at(t);
        if i + 1 == self.segments.len() && t == self.total_time() {
            // exact at `T`, where `t − tᵢ` need not round to `δᵢ`
            let mut pts = self.segments[i].derivative_points(k);
            return de_casteljau(&mut pts, 1.0);
        }
        self.segments[i].eval_local(t - self.knots[i], k)
    }

    pub fn start(&self) -> Vec3 {
        self.segments[0].control_points[0]
    }

    pub fn end(&self) -> Vec3 {
        *self.segments.last().and_then(|s| s.control_points.last()).unwrap_or(&Vec3::ZERO)
    }
}

impl Reference for PiecewiseBezier {
    fn flat(&self, t: f64) -> FlatOutput {
        let i = self.segment_at(t);
        let seg = &self.segments[i];
        let s = t - self.knots[i];
        FlatOutput { p: seg.eval_local(s, 0), v: seg.eval_local(s, 1), a: seg.eval_local(s, 2), j: seg.eval_local(s, 3), s: seg.eval_local(s, 4) }
    }
}

/// Variable index of axis `a` of control point `j` in segment `i`.
pub fn var(i: usize, j: usize, a: usize, degree: usize) -> usize {
    (i * (degree + 1) + j) * 3 + a
}

/// Inputs of the constraint assembly other than the durations.
#[derive(Debug, Clone)]
pub struct CorridorSpec<'a> {
    /// Box holding the control points of each segment.
    pub segment_boxes: &'a [Box3],
    /// Box holding the final point.
    pub terminal_box: Box3,
    pub p0: Vec3,
    pub v0: Vec3,
    /// Velocity limit per axis before subtracting the velocity bound.
    pub v_max: Vec3,
    pub a_max: Vec3,
    pub mass: f64,
    pub gravity: f64,
    pub eps: f64,
    pub terminal_rest: bool,
}

impl<'a> CorridorSpec<'a> {
    pub fn from_scenario(segment_boxes: &'a [Box3], terminal_box: Box3, s: &Scenario, a_max: Vec3, mass: f64, gravity: f64, eps: f64) -> Self {
        Self { segment_boxes, terminal_box, p0: s.p0, v0: s.v0, v_max: s.v_max, a_max, mass, gravity, eps, terminal_rest: false }
    }
}

/// Linear feasibility problem for a curve of the given degree and
/// durations inside the corridor.
pub fn assemble(spec: &CorridorSpec<'_>, b: &BoundSummary, durations: &[f64], degree: usize) -> Result<LpProblem> {
    let ns = durations.len();
    let n = degree;
    if ns == 0 || spec.segment_boxes.len() != ns {
        return Err(Error::Dimension("one box per segment is required"));
    }
    if n < 4 {
        return Err(Error::Dimension("degree must be at least 4"));
    }
    if durations.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::Precondition("segment durations must be positive"));
    }
    let mut lp = LpProblem::new(3 * ns * (n + 1));
    let diff = |k: usize, i: usize, j: usize, a: usize, scale: f64| -> Vec<(usize, f64)> {
        difference_weights(k).iter().enumerate().map(|(r, &w)| (var(i, j + r, a, n), w * scale)).collect()
    };
    for a in 0..3 {
        let d1 = durations[0];
        // initial position, velocity, acceleration and jerk
        lp.add_eq(vec![(var(0, 0, a, n), 1.0)], spec.p0[a]);
        lp.add_eq(diff(1, 0, 0, a, n as f64 / d1), spec.v0[a]);
        lp.add_eq(diff(2, 0, 0, a, 1.0), 0.0);
        lp.add_eq(diff(3, 0, 0, a, 1.0), 0.0);
        for i in 0..ns {
            let bx = &spec.segment_boxes[i];
            for j in 0..=n {
                lp.add_le(vec![(var(i, j, a, n), 1.0)], bx.hi()[a]);
                lp.add_ge(vec![(var(i, j, a, n), 1.0)], bx.lo()[a]);
            }
        }
        // junction continuity of orders 0..4
        for i in 0..ns.saturating_sub(1) {
            let (dl, dr) = (durations[i], durations[i + 1]);
            for k in 0..=4 {
                let mut terms = diff(k, i, n - k, a, 1.0 / dl.powi(k as i32));
                terms.extend(diff(k, i + 1, 0, a, -1.0 / dr.powi(k as i32)));
                lp.add_eq(terms, 0.0);
            }
        }
        let vlim = spec.v_max[a] - b.lv;
        let g_axis = if a == 2 { spec.gravity } else { 0.0 };
        for i in 0..ns {
            let d = durations[i];
            for j in 0..n {
                let t = diff(1, i, j, a, n as f64 / d);
                lp.add_le(t.clone(), vlim);
                lp.add_ge(t, -vlim);
            }
            let acc = (n * (n - 1)) as f64 / (d * d);
            for j in 0..n - 1 {
                let t = diff(2, i, j, a, acc);
                lp.add_le(t.clone(), spec.a_max[a] - g_axis);
                lp.add_ge(t, -spec.a_max[a] - g_axis);
            }
        }
        if a == 2 {
            for i in 0..ns {
                let d = durations[i];
                let acc = spec.mass * (n * (n - 1)) as f64 / (d * d);
                for j in 0..n - 1 {
                    lp.add_ge(diff(2, i, j, a, acc), b.lf - spec.mass * spec.gravity + spec.eps);
                }
            }
        }
        let last = ns - 1;
        lp.add_le(vec![(var(last, n, a, n), 1.0)], spec.terminal_box.hi()[a]);
        lp.add_ge(vec![(var(last, n, a, n), 1.0)], spec.terminal_box.lo()[a]);
        if spec.terminal_rest {
            lp.add_eq(diff(1, last, n - 1, a, 1.0), 0.0);
            lp.add_eq(diff(2, last, n - 2, a, 1.0), 0.0);
        }
    }
    Ok(lp)
}

/// Row counts predicted by the tally in the module docs.
pub fn constraint_tally(ns: usize, degree: usize, terminal_rest: bool) -> (usize, usize) {
    let n = degree;
    let rest = if terminal_rest { 2 } else { 0 };
    let eq = 3 * (4 + 5 * (ns - 1) + rest);
    let le = 3 * (2 * ns * (n + 1) + 2 * ns * n + 2 * ns * (n - 1) + 2) + ns * (n - 1);
    (eq, le)
}
