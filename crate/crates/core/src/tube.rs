//! Safe-region RRT and tube extraction.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{closest_point, distance_inf, safe_box, safe_region, safe_region_radius, InflatedScenario};
use crate::rng::SeededRng;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtParams {
    /// Maximum number of samples (and so of new vertices).
    pub n_v: usize,
    /// Fraction of the samples drawn from the free space; the rest come from
    /// the target.
    pub c_sample: f64,
    /// Strip shrink factor in `[0, 1)`.
    pub alpha: f64,
    pub seed: u64,
    /// Rejections allowed per free-space draw.
    #[serde(default = "default_max_rejections")]
    pub max_rejections: usize,
}

fn default_max_rejections() -> usize {
    10_000
}

impl Default for RrtParams {
    fn default() -> Self {
        Self { n_v: 400, c_sample: 0.9, alpha: 0.9, seed: 0, max_rejections: default_max_rejections() }
    }
}

impl RrtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_v == 0 {
            return Err(Error::InvalidParameter { name: "n_v", value: 0.0 });
        }
        if !(self.c_sample > 0.0 && self.c_sample <= 1.0) {
            return Err(Error::InvalidParameter { name: "c_sample", value: self.c_sample });
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter { name: "alpha", value: self.alpha });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtTree {
    pub vertices: Vec<Vec3>,
    /// `parents[0]` is `None` (the root).
    pub parents: Vec<Option<usize>>,
    /// Index of the vertex that reached the target, if any.
    pub reached: Option<usize>,
}

impl RrtTree {
    pub fn succeeded(&self) -> bool {
        self.reached.is_some()
    }

    /// Root-to-`leaf` vertex indices.
    pub fn path_to(&self, leaf: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = Some(leaf);
        while let Some(i) = cur {
            path.push(i);
            cur = self.parents[i];
        }
        path.reverse();
        path
    }
}

fn sample_free(s: &InflatedScenario, rng: &mut SeededRng, max_rejections: usize) -> Result<Vec3> {
    for _ in 0..=max_rejections {
        let x = rng.uniform_vec(s.domain.lo(), s.domain.hi());
        if s.is_free(x) {
            return Ok(x);
        }
    }
    Err(Error::SamplingExhausted(max_rejections))
}

/// Grows a tree from `p₀`: each sample is attached to the vertex whose safe
/// region is nearest (∞-norm, lowest index on ties) at the closest point of
/// that region. Stops as soon as a vertex lands in the target.
pub fn build_rrt(s: &InflatedScenario, params: &RrtParams) -> Result<RrtTree> {
    params.validate()?;
    if !s.is_free(s.p0) {
        return Err(Error::Precondition("initial position must lie in the free space"));
    }
    let mut tree = RrtTree { vertices: Vec::from([s.p0]), parents: Vec::from([None]), reached: None };
    if s.target.contains(s.p0) {
        tree.reached = Some(0);
        return Ok(tree);
    }
    let mut rng = SeededRng::new(params.seed);
    let free_samples = (params.c_sample * params.n_v as f64) as usize;
    for k in 0..params.n_v {
        let x = if k < free_samples {
            sample_free(s, &mut rng, params.max_rejections)?
        } else {
            rng.uniform_vec(s.target.lo(), s.target.hi())
        };
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        let mut best_region = None;
        for (j, &v) in tree.vertices.iter().enumerate() {
            let region = safe_region(v, s, params.alpha)?;
            let d = distance_inf(x, &region);
            if d < best_dist {
                best = j;
                best_dist = d;
                best_region = Some(region);
            }
        }
        let region = best_region.ok_or(Error::Internal("nearest vertex search failed"))?;
        let new = closest_point(x, &region);
        tree.vertices.push(new);
        tree.parents.push(Some(best));
        if s.target.contains(new) {
            tree.reached = Some(tree.vertices.len() - 1);
            break;
        }
    }
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeNode {
    pub waypoint: Vec3,
    pub radius: Vec3,
}

/// Waypoints `𝚙₀..𝚙_{N_s}` with box radii `𝚛₀..𝚛_{N_s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SafeTube {
    pub nodes: Vec<TubeNode>,
}

impl SafeTube {
    /// Number of segments `N_s`.
    pub fn segments(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn lo(&self, i: usize) -> Vec3 {
        self.nodes[i].waypoint - self.nodes[i].radius
    }

    pub fn hi(&self, i: usize) -> Vec3 {
        self.nodes[i].waypoint + self.nodes[i].radius
    }

    fn in_box(&self, i: usize, x: Vec3) -> bool {
        self.lo(i).le(x) && x.le(self.hi(i))
    }

    /// Checks the four tube conditions with exact box arithmetic and returns
    /// the first one that fails.
    pub fn verify(&self, s: &InflatedScenario) -> core::result::Result<(), &'static str> {
        let n = self.nodes.len();
        if n == 0 {
            return Err("tube has no waypoints");
        }
        if self.nodes[0].waypoint != s.p0 {
            return Err("first waypoint differs from the initial position");
        }
        if self.nodes.iter().any(|nd| !Vec3::ZERO.le(nd.radius)) {
            return Err("negative radius");
        }
        for i in 0..n - 1 {
            if !self.in_box(i, self.nodes[i + 1].waypoint) {
                return Err("waypoint outside the previous box");
            }
            let (lo, hi) = (self.lo(i), self.hi(i));
            let inside = s.domain.lo().le(lo) && hi.le(s.domain.hi());
            let clear = s.obstacles.iter().all(|o| !(lo.le(o.hi()) && o.lo().le(hi)));
            if !(inside && clear) {
                return Err("box leaves the inflated free space");
            }
        }
        let (lo, hi) = (self.lo(n - 1), self.hi(n - 1));
        if !(s.target.lo().le(lo) && hi.le(s.target.hi())) {
            return Err("last box leaves the deflated target");
        }
        Ok(())
    }
}

/// Tube along the root-to-target path of a successful tree.
pub fn extract_tube(tree: &RrtTree, s: &InflatedScenario, alpha: f64) -> Result<SafeTube> {
    let leaf = tree.reached.ok_or(Error::Precondition("tree did not reach the target"))?;
    let path = tree.path_to(leaf);
    let last = path.len() - 1;
    let mut nodes = Vec::with_capacity(path.len());
    for (k, &vi) in path.iter().enumerate() {
        let w = tree.vertices[vi];
        let radius = if k < last { safe_region_radius(w, s, alpha)? } else { safe_box(w, &s.target)?.radius() };
        nodes.push(TubeNode { waypoint: w, radius });
    }
    let tube = SafeTube { nodes };
    tube.verify(s).map_err(Error::Internal)?;
    Ok(tube)
}

/// Plans a tube, or returns the failed tree.
pub fn plan_tube(s: &InflatedScenario, params: &RrtParams) -> Result<core::result::Result<SafeTube, RrtTree>> {
    let tree = build_rrt(s, params)?;
    if tree.succeeded() {
        Ok(Ok(extract_tube(&tree, s, params.alpha)?))
    } else {
        Ok(Err(tree))
    }
}
