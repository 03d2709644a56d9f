//! Axis-aligned boxes and the safe-region constructions used by the planner.
//!
//! Boxes are closed. Inflation and deflation use the ∞-norm ball, so they
//! only move the faces. Safe regions are boxes centered at the query point,
//! so every radius computed here is rounded down until the box it describes
//! is contained in its parent in floating point.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct Box3 {
    lo: Vec3,
    hi: Vec3,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    lo: Vec3,
    hi: Vec3,
}

impl TryFrom<BoxRepr> for Box3 {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        Box3::new(r.lo, r.hi)
    }
}

impl From<Box3> for BoxRepr {
    fn from(b: Box3) -> Self {
        BoxRepr { lo: b.lo, hi: b.hi }
    }
}

impl Box3 {
    pub fn new(lo: Vec3, hi: Vec3) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo.le(hi)) {
            return Err(Error::InvalidScenario("box bounds must be finite with lo <= hi"));
        }
        Ok(Box3 { lo, hi })
    }

    /// `center + [−radius, radius]`; the radius must be nonnegative.
    pub fn centered(center: Vec3, radius: Vec3) -> Result<Self> {
        if !Vec3::ZERO.le(radius) {
            return Err(Error::Precondition("box radius must be nonnegative"));
        }
        Box3::new(center - radius, center + radius)
    }

    pub fn cube(lo: f64, hi: f64) -> Result<Self> {
        Box3::new(Vec3::splat(lo), Vec3::splat(hi))
    }

    pub fn lo(&self) -> Vec3 {
        self.lo
    }

    pub fn hi(&self) -> Vec3 {
        self.hi
    }

    pub fn center(&self) -> Vec3 {
        (self.lo + self.hi) * 0.5
    }

    pub fn radius(&self) -> Vec3 {
        (self.hi - self.lo) * 0.5
    }

    pub fn contains(&self, x: Vec3) -> bool {
        self.lo.le(x) && x.le(self.hi)
    }

    /// Strict interior membership.
    pub fn contains_interior(&self, x: Vec3) -> bool {
        (0..3).all(|i| self.lo[i] < x[i] && x[i] < self.hi[i])
    }

    pub fn contains_box(&self, o: &Box3) -> bool {
        self.lo.le(o.lo) && o.hi.le(self.hi)
    }

    /// Closed boxes share at least one point.
    pub fn intersects(&self, o: &Box3) -> bool {
        self.lo.le(o.hi) && o.lo.le(self.hi)
    }

    /// Minkowski sum with the ∞-ball of radius `r ≥ 0`.
    pub fn inflate(&self, r: f64) -> Box3 {
        Box3 { lo: self.lo - Vec3::splat(r), hi: self.hi + Vec3::splat(r) }
    }

    /// Minkowski difference with the ∞-ball of radius `r ≥ 0`.
    pub fn deflate(&self, r: f64) -> Result<Box3> {
        let lo = self.lo + Vec3::splat(r);
        let hi = self.hi - Vec3::splat(r);
        if !lo.le(hi) {
            return Err(Error::InfeasibleGeometry("deflation margin exceeds the box radius"));
        }
        Ok(Box3 { lo, hi })
    }

    pub fn volume(&self) -> f64 {
        let d = self.hi - self.lo;
        d.x * d.y * d.z
    }
}

/// Per-coordinate clamp of `x` onto `b`: the point of `b` nearest to `x` in
/// every norm that is monotone in the coordinates.
pub fn closest_point(x: Vec3, b: &Box3) -> Vec3 {
    Vec3::from_fn(|i| x[i].clamp(b.lo[i], b.hi[i]))
}

/// `‖x − closest_point(x, b)‖∞`.
pub fn distance_inf(x: Vec3, b: &Box3) -> f64 {
    (x - closest_point(x, b)).norm_inf()
}

/// Shrinks `r` until `ok(r)` holds. Rounding excess is at most a few ulps of
/// `scale`, so a few `next_down` steps are tried before stepping by ulps of
/// `scale`.
fn shrink_until(r0: f64, scale: f64, ok: impl Fn(f64) -> bool) -> f64 {
    let mut r = r0.max(0.0);
    let step = scale.abs().max(f64::MIN_POSITIVE) * f64::EPSILON;
    let mut k = 0;
    while r > 0.0 && !ok(r) {
        r = if k < 4 { r.next_down() } else { r - step }.max(0.0);
        k += 1;
    }
    r
}

/// Largest radius `r ≤ r0` with `[c − r, c + r] ⊆ [lo, hi]` in floating
/// point.
fn fit_radius(c: f64, r0: f64, lo: f64, hi: f64) -> f64 {
    shrink_until(r0, c.abs().max(lo.abs()).max(hi.abs()), |r| c - r >= lo && c + r <= hi)
}

/// Largest box centered at `v` inside `b`.
pub fn safe_box(v: Vec3, b: &Box3) -> Result<Box3> {
    if !b.contains(v) {
        return Err(Error::Precondition("safe box center must lie in the box"));
    }
    let r = Vec3::from_fn(|i| fit_radius(v[i], (v[i] - b.lo[i]).min(b.hi[i] - v[i]), b.lo[i], b.hi[i]));
    Box3::centered(v, r)
}

/// Slab `{z : |z[axis] − center| ≤ half_width}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strip {
    pub axis: usize,
    pub center: f64,
    pub half_width: f64,
}

impl Strip {
    pub fn contains(&self, z: Vec3) -> bool {
        (z[self.axis] - self.center).abs() <= self.half_width
    }
}

/// Slab around `x` on the axis realizing the ∞-distance to `b` (lowest
/// index on ties), of half-width `α·‖x − y*‖∞`. Disjoint from `b` for
/// `α < 1`.
pub fn safe_strip(x: Vec3, b: &Box3, alpha: f64) -> Result<Strip> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter { name: "alpha", value: alpha });
    }
    if b.contains(x) {
        return Err(Error::Precondition("strip origin must lie outside the box"));
    }
    let y = closest_point(x, b);
    let d = (x - y).abs();
    let mut axis = 0;
    for i in 1..3 {
        if d[i] > d[axis] {
            axis = i;
        }
    }
    Ok(Strip { axis, center: x[axis], half_width: alpha * d[axis] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub operating_domain: Box3,
    pub obstacles: Vec<Box3>,
    pub target: Box3,
    pub p0: Vec3,
    pub v0: Vec3,
    pub v_max: Vec3,
    pub f_max: f64,
    pub a_max: Vec3,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !self.operating_domain.contains_box(&self.target) {
            return Err(Error::InvalidScenario("target must lie in the operating domain"));
        }
        if self.obstacles.iter().any(|o| o.intersects(&self.target)) {
            return Err(Error::InvalidScenario("target must not touch an obstacle"));
        }
        if !self.operating_domain.contains_interior(self.p0) {
            return Err(Error::InvalidScenario("initial position must lie in the interior of the operating domain"));
        }
        if self.obstacles.iter().any(|o| o.contains(self.p0)) {
            return Err(Error::InvalidScenario("initial position must lie outside every obstacle"));
        }
        if !(self.v0.is_finite() && (0..3).all(|i| self.v0[i].abs() < self.v_max[i])) {
            return Err(Error::InvalidScenario("initial speed must be below v_max on every axis"));
        }
        if !(self.f_max > 0.0 && self.f_max.is_finite()) {
            return Err(Error::InvalidScenario("f_max must be positive"));
        }
        if !((0..3).all(|i| self.a_max[i] > 0.0) && self.a_max.is_finite()) {
            return Err(Error::InvalidScenario("a_max must be positive"));
        }
        Ok(())
    }

    /// `p` lies in the operating domain and outside every obstacle.
    pub fn is_safe(&self, p: Vec3) -> bool {
        self.operating_domain.contains(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }
}

/// Domain and target shrunk, obstacles grown, by the position bound.
#[derive(Debug, Clone, PartialEq)]
pub struct InflatedScenario {
    pub domain: Box3,
    pub obstacles: Vec<Box3>,
    pub target: Box3,
    pub p0: Vec3,
}

impl InflatedScenario {
    pub fn new(s: &Scenario, lp: f64) -> Result<Self> {
        s.validate()?;
        let domain = s.operating_domain.deflate(lp)?;
        let target = s.target.deflate(lp)?;
        let obstacles: Vec<Box3> = s.obstacles.iter().map(|o| o.inflate(lp)).collect();
        if obstacles.iter().any(|o| o.intersects(&target)) {
            return Err(Error::InvalidScenario("inflated obstacles cover part of the deflated target"));
        }
        let inflated = InflatedScenario { domain, obstacles, target, p0: s.p0 };
        if !inflated.is_free(s.p0) {
            return Err(Error::InfeasibleGeometry("initial position is within the position bound of an obstacle or the domain boundary"));
        }
        Ok(inflated)
    }

    pub fn is_free(&self, y: Vec3) -> bool {
        self.domain.contains(y) && !self.obstacles.iter().any(|o| o.contains(y))
    }

    /// `b ⊆ domain` and `b` disjoint from every inflated obstacle.
    pub fn box_is_free(&self, b: &Box3) -> bool {
        self.domain.contains_box(b) && !self.obstacles.iter().any(|o| o.intersects(b))
    }
}

/// Radius of the safe region around `y`: the safe box in the inflated
/// domain, narrowed on one axis per obstacle by that obstacle's strip.
pub fn safe_region_radius(y: Vec3, s: &InflatedScenario, alpha: f64) -> Result<Vec3> {
    if !s.is_free(y) {
        return Err(Error::Precondition("safe region center must lie in the free space"));
    }
    let mut r = safe_box(y, &s.domain)?.radius();
    for o in &s.obstacles {
        let strip = safe_strip(y, o, alpha)?;
        let a = strip.axis;
        r[a] = r[a].min(strip.half_width);
        // Keep the slab strictly clear of the obstacle after rounding.
        let (c, ol, oh) = (y[a], o.lo[a], o.hi[a]);
        r[a] = shrink_until(r[a], c.abs().max(ol.abs()).max(oh.abs()), |r| if c < ol { c + r < ol } else { c - r > oh });
    }
    let (lo, hi) = (s.domain.lo(), s.domain.hi());
    Ok(Vec3::from_fn(|i| fit_radius(y[i], r[i], lo[i], hi[i])))
}

pub fn safe_region(y: Vec3, s: &InflatedScenario, alpha: f64) -> Result<Box3> {
    Box3::centered(y, safe_region_radius(y, s, alpha)?)
}
