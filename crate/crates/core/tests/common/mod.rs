#![allow(dead_code)]

use reachcert_core::bezier::{PiecewiseBezier, Segment};
use reachcert_core::bounds::{BoundConfig, BoundSet, Gains, PhysicalParams};
use reachcert_core::geometry::{Box3, InflatedScenario, Scenario};
use reachcert_core::synth::{synthesize, SynthParams};
use reachcert_core::tube::{plan_tube, RrtParams, SafeTube};
use reachcert_core::rng::SeededRng;
use reachcert_core::so3::exp_so3;
use reachcert_core::{Matrix, Rot3, SymMat, Vec3};

pub fn bx(lo: [f64; 3], hi: [f64; 3]) -> Box3 {
    Box3::new(Vec3::from(lo), Vec3::from(hi)).unwrap()
}

/// Same layout as `crates/cli/scenarios/reference.json`.
pub fn reference_scenario() -> Scenario {
    Scenario {
        operating_domain: bx([0.0; 3], [5.0; 3]),
        obstacles: vec![
            bx([1.5, 0.0, 0.0], [2.0, 2.0, 3.0]),
            bx([1.5, 3.0, 0.0], [2.0, 5.0, 2.5]),
            bx([3.0, 0.0, 1.0], [3.5, 1.5, 5.0]),
            bx([3.0, 2.5, 2.5], [3.5, 5.0, 5.0]),
            bx([0.0, 2.5, 0.0], [1.0, 3.5, 1.5]),
            bx([2.2, 1.5, 3.5], [2.8, 2.5, 5.0]),
            bx([3.8, 0.0, 0.0], [5.0, 1.0, 2.0]),
            bx([0.5, 4.0, 3.0], [1.2, 5.0, 5.0]),
            bx([2.2, 4.0, 0.0], [2.8, 5.0, 1.5]),
            bx([4.0, 2.0, 0.0], [5.0, 3.0, 1.0]),
        ],
        target: bx([4.0; 3], [5.0; 3]),
        p0: Vec3::new(0.5, 0.5, 1.0),
        v0: Vec3::ZERO,
        v_max: Vec3::splat(2.0),
        f_max: 85.1508,
        a_max: Vec3::new(1.0, 1.0, 10.0),
    }
}

pub fn reference() -> (Gains, PhysicalParams, BoundConfig, BoundSet) {
    let (g, p, cfg) = (Gains::reference(), PhysicalParams::reference(), BoundConfig::reference());
    let b = BoundSet::compute(&g, &p, &cfg).unwrap();
    (g, p, cfg, b)
}

/// Rotation with a uniformly drawn axis and angle in `[0, max_angle]`.
pub fn random_rotation(rng: &mut SeededRng, max_angle: f64) -> Rot3 {
    let axis = Vec3::new(rng.normal(), rng.normal(), rng.normal());
    let axis = axis / axis.norm();
    exp_so3(axis * rng.uniform(0.0, max_angle))
}

pub fn random_matrix<const R: usize, const C: usize>(rng: &mut SeededRng, scale: f64) -> Matrix<R, C> {
    Matrix::from_fn(|_, _| rng.uniform(-scale, scale))
}

/// `BᵀB + shift·I` with a random `B`.
pub fn random_spd<const N: usize>(rng: &mut SeededRng, shift: f64) -> SymMat<N> {
    let b: Matrix<N, N> = random_matrix(rng, 1.0);
    SymMat::symmetrize(&(b.transpose() * b + Matrix::identity().scale(shift)))
}

pub fn random_gains(rng: &mut SeededRng) -> Gains {
    Gains::new(
        rng.uniform(0.5, 30.0),
        rng.uniform(0.5, 30.0),
        rng.uniform(0.5, 30.0),
        rng.uniform(0.5, 30.0),
        rng.uniform(0.05, 0.95),
        rng.uniform(0.05, 0.95),
    )
    .unwrap()
}

pub fn vec_of(x: &[f64]) -> Vec3 {
    Vec3::new(x[0], x[1], x[2])
}

/// Constant curve at `p` over `duration` seconds.
pub fn hover_curve(p: Vec3, duration: f64, degree: usize) -> PiecewiseBezier {
    PiecewiseBezier::new(vec![Segment { duration, control_points: vec![p; degree + 1] }]).unwrap()
}

/// Open box with the target around `p0`.
pub fn hover_scenario(p0: Vec3) -> Scenario {
    Scenario {
        operating_domain: bx([0.0; 3], [5.0; 3]),
        obstacles: vec![],
        target: Box3::centered(p0, Vec3::splat(0.5)).unwrap(),
        p0,
        v0: Vec3::ZERO,
        v_max: Vec3::splat(2.0),
        f_max: 85.1508,
        a_max: Vec3::new(1.0, 1.0, 10.0),
    }
}

/// Tube for seed 0 and the synthesized curve on the reference scenario.
pub fn reference_pipeline() -> (Scenario, BoundSet, SafeTube, PiecewiseBezier) {
    let (_, p, cfg, b) = reference();
    let s = reference_scenario();
    let inf = InflatedScenario::new(&s, b.lp).unwrap();
    let tube = plan_tube(&inf, &RrtParams::default()).unwrap().expect("seed 0 reaches the target");
    let report = synthesize(&tube, &b.summary(), &s, &cfg, &p, &SynthParams::default()).unwrap();
    let curve = report.curve.expect("synthesis succeeds");
    (s, b, tube, curve)
}
