//! Rigid-body model, closed-loop simulation and trace certification.
//!
//! The state is integrated as 18 numbers (`p`, `v`, the nine entries of `R`,
//! `ω`) by an adaptive Dormand–Prince 5(4) pair. After every accepted step
//! `R` is pulled back onto SO(3) by polar projection.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::bounds::{eval_v, BoundSummary, Gains, LyapunovMatrices, PhysicalParams};
use crate::controller::{closed_loop, tracking_errors, Reference};
use crate::geometry::Scenario;
use crate::so3::hat;
use crate::{Error, Mat3, Result, Rot3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub p: Vec3,
    pub v: Vec3,
    pub r: Rot3,
    pub w: Vec3,
}

impl QuadState {
    /// At rest at `p`, level.
    pub fn at_rest(p: Vec3) -> Self {
        Self { p, v: Vec3::ZERO, r: Rot3::identity(), w: Vec3::ZERO }
    }

    fn to_array(&self) -> [f64; 18] {
        let mut y = [0.0; 18];
        let m = self.r.matrix();
        for i in 0..3 {
            y[i] = self.p[i];
            y[3 + i] = self.v[i];
            y[15 + i] = self.w[i];
            for j in 0..3 {
                y[6 + 3 * i + j] = m.m[i][j];
            }
        }
        y
    }

    fn from_array(y: &[f64; 18]) -> Self {
        let r = Mat3::from_fn(|i, j| y[6 + 3 * i + j]);
        Self {
            p: Vec3::new(y[0], y[1], y[2]),
            v: Vec3::new(y[3], y[4], y[5]),
            r: Rot3::from_matrix_unchecked(r),
            w: Vec3::new(y[15], y[16], y[17]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTangent {
    pub p_dot: Vec3,
    pub v_dot: Vec3,
    pub r_dot: Mat3,
    pub w_dot: Vec3,
}

pub fn state_derivative(s: &QuadState, f: f64, tau: Vec3, p: &PhysicalParams) -> StateTangent {
    let j = p.inertia_matrix();
    StateTangent {
        p_dot: s.v,
        v_dot: s.r.col(2) * (f / p.mass()) - Vec3::E3 * p.gravity(),
        r_dot: *s.r.matrix() * hat(s.w),
        w_dot: p.inertia_inv() * (tau - s.w.cross(j * s.w)),
    }
}

fn tangent_array(d: &StateTangent) -> [f64; 18] {
    let mut y = [0.0; 18];
    for i in 0..3 {
        y[i] = d.p_dot[i];
        y[3 + i] = d.v_dot[i];
        y[15 + i] = d.w_dot[i];
        for j in 0..3 {
            y[6 + 3 * i + j] = d.r_dot.m[i][j];
        }
    }
    y
}

/// Dormand–Prince 5(4) tableau.
mod dopri {
    pub const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    pub const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    pub const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    pub const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    /// Smallest step before integration gives up.
    pub h_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { atol: 1e-12, rtol: 1e-12, h_min: 1e-12 }
    }
}

/// Adaptive Dormand–Prince integrator for `ẏ = f(t, y)`.
#[derive(Debug, Clone)]
pub struct Rk45<const N: usize> {
    pub tol: Tolerances,
    /// Step proposal carried across calls.
    pub h: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl<const N: usize> Rk45<N> {
    pub fn new(tol: Tolerances, h0: f64) -> Self {
        Self { tol, h: h0, accepted: 0, rejected: 0 }
    }

    /// One trial step; returns the 5th-order solution and the scaled error
    /// norm.
    fn trial<F>(&self, f: &mut F, t: f64, y: &[f64; N], h: f64) -> Result<([f64; N], f64)>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let mut k = [[0.0; N]; 7];
        for s in 0..7 {
            let mut ys = *y;
            for (r, kr) in k.iter().enumerate().take(s) {
                let a = dopri::A[s][r];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += h * a * kr[i];
                    }
                }
            }
            k[s] = f(t + dopri::C[s] * h, &ys)?;
        }
        let mut y5 = *y;
        let mut err = 0.0;
        for i in 0..N {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for s in 0..7 {
                s5 += dopri::B5[s] * k[s][i];
                s4 += dopri::B4[s] * k[s][i];
            }
            y5[i] += h * s5;
            let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(y5[i].abs());
            let e = h * (s5 - s4) / sc;
            err += e * e;
        }
        Ok((y5, (err / N as f64).sqrt()))
    }

    /// Advances `y` from `t` to exactly `t_end`, calling `post` after each
    /// accepted step (it may modify the state).
    pub fn advance<F, P>(&mut self, f: &mut F, post: &mut P, t: &mut f64, y: &mut [f64; N], t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
        P: FnMut(&mut [f64; N]) -> Result<()>,
    {
        while *t < t_end {
            let remaining = t_end - *t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            if h < self.tol.h_min && !last {
                return Err(Error::StepUnderflow { t: *t, h });
            }
            let (y_new, err) = self.trial(f, *t, y, h)?;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                *t = if last { t_end } else { *t + h };
                *y = y_new;
                post(y)?;
                self.accepted += 1;
                // a clipped last step says little about the natural step size
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
            } else {
                self.rejected += 1;
                self.h = h * factor.min(1.0);
                if self.h < self.tol.h_min {
                    return Err(Error::StepUnderflow { t: *t, h: self.h });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub tol: Tolerances,
    /// Output samples per second.
    pub rate: f64,
    /// Skip the initial-set check.
    pub force: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { tol: Tolerances::default(), rate: 100.0, force: false }
    }
}

/// One output sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub state: QuadState,
    /// `‖e_p‖`.
    pub ep: f64,
    /// `‖e_v‖`.
    pub ev: f64,
    pub v1: f64,
    pub v2: f64,
    pub v: f64,
    pub f: f64,
    pub fd3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub samples: Vec<TraceSample>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Output times: the fixed-rate grid, every knot and the final time.
pub fn output_times(knots: &[f64], rate: f64) -> Vec<f64> {
    let total = *knots.last().unwrap_or(&0.0);
    let dt = 1.0 / rate;
    let n = (total * rate).floor() as usize;
    let near_knot = |t: f64| knots.iter().any(|&k| (t - k).abs() < 1e-12);
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).filter(|&t| t <= total && !near_knot(t)).collect();
    times.extend_from_slice(knots);
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    times
}

fn sample(s: &QuadState, t: f64, reference: &dyn Reference, l: &LyapunovMatrices, g: &Gains, p: &PhysicalParams) -> Result<TraceSample> {
    let (d, u) = closed_loop(s, t, reference, g, p).map_err(|e| singular(e, t, s))?;
    let e = tracking_errors(s, &d);
    let (v1, v2, v) = eval_v(&e, l, g, p);
    Ok(TraceSample { t, state: *s, ep: e.e_p.norm(), ev: e.e_v.norm(), v1, v2, v, f: u.f, fd3: u.f_d.z })
}

fn singular(e: Error, t: f64, s: &QuadState) -> Error {
    match e {
        Error::Singularity { .. } => Error::SimulationSingularity { t, state: alloc::boxed::Box::new(*s) },
        other => other,
    }
}

/// Closed-loop simulation over `[0, t_end]` with samples at `times`.
pub fn simulate(
    x0: &QuadState,
    reference: &dyn Reference,
    times: &[f64],
    g: &Gains,
    p: &PhysicalParams,
    l: &LyapunovMatrices,
    tol: Tolerances,
) -> Result<SimulationTrace> {
    let mut rhs = |t: f64, y: &[f64; 18]| -> Result<[f64; 18]> {
        let s = QuadState::from_array(y);
        let (_, u) = closed_loop(&s, t, reference, g, p).map_err(|e| singular(e, t, &s))?;
        Ok(tangent_array(&state_derivative(&s, u.f, u.tau, p)))
    };
    let mut project = |y: &mut [f64; 18]| -> Result<()> {
        let s = QuadState::from_array(y);
        let r = Rot3::project(s.r.matrix())?;
        *y = QuadState { r, ..s }.to_array();
        Ok(())
    };
    let mut solver = Rk45::<18>::new(tol, 1e-3);
    let mut y = x0.to_array();
    let mut t = times.first().copied().unwrap_or(0.0);
    let mut samples = Vec::with_capacity(times.len());
    samples.push(sample(x0, t, reference, l, g, p)?);
    for &te in &times[1..] {
        solver.advance(&mut rhs, &mut project, &mut t, &mut y, te)?;
        samples.push(sample(&QuadState::from_array(&y), te, reference, l, g, p)?);
    }
    Ok(SimulationTrace { samples, accepted_steps: solver.accepted, rejected_steps: solver.rejected })
}

/// Simulates along a synthesized curve. Unless `opts.force` is set, the
/// initial state must lie in the certified initial set.
pub fn integrate(
    x0: &QuadState,
    curve: &crate::bezier::PiecewiseBezier,
    g: &Gains,
    p: &PhysicalParams,
    l: &LyapunovMatrices,
    cfg: &crate::bounds::BoundConfig,
    opts: &SimOptions,
) -> Result<SimulationTrace> {
    if !opts.force {
        let d0 = crate::controller::desired_state(x0, 0.0, curve, g, p)?;
        if !crate::bounds::initial_set_check(x0, &d0, l, g, cfg, p).member {
            return Err(Error::Precondition("initial state lies outside the certified initial set"));
        }
    }
    let times = output_times(curve.knots(), opts.rate);
    simulate(x0, curve, &times, g, p, l, opts.tol)
}

/// Outcome of one certification check over a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub violations: usize,
    /// Smallest `limit − value` over all samples (negative when violated).
    pub worst_margin: f64,
    pub first_violation_t: Option<f64>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub samples: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl CertificationReport {
    pub fn violated(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect()
    }
}

/// Relative slack of the Lyapunov envelope checks, and the absolute floor
/// used when the envelope itself is at rounding level.
pub const ENVELOPE_REL_SLACK: f64 = 1e-6;
pub const ENVELOPE_ABS_FLOOR: f64 = 1e-12;

struct Check {
    result: CheckResult,
}

impl Check {
    fn new(name: &str) -> Self {
        Self { result: CheckResult { name: String::from(name), violations: 0, worst_margin: f64::INFINITY, first_violation_t: None } }
    }

    fn record(&mut self, t: f64, margin: f64) {
        let r = &mut self.result;
        if margin < r.worst_margin || margin.is_nan() {
            r.worst_margin = margin;
        }
        if !(margin >= 0.0) {
            r.violations += 1;
            r.first_violation_t.get_or_insert(t);
        }
    }
}

/// Checks every sample of a trace against the bounds and the scenario.
pub fn certify_trace(tr: &SimulationTrace, b: &BoundSummary, scenario: &Scenario) -> CertificationReport {
    let names = [
        "position_error",
        "velocity_error",
        "velocity_limit",
        "thrust_bound",
        "thrust_direction",
        "lyapunov_envelope",
        "attitude_decay",
        "safe_set",
        "target",
    ];
    let mut checks: Vec<Check> = names.iter().map(|n| Check::new(n)).collect();
    let c = b.constants();
    if let Some(first) = tr.samples.first() {
        let (x0, y0) = (first.v1.max(0.0), first.v2.max(0.0));
        for s in &tr.samples {
            let t = s.t;
            checks[0].record(t, b.lp - s.ep);
            checks[1].record(t, b.lv - s.ev);
            let vel = (0..3).map(|i| scenario.v_max[i] - s.state.v[i].abs()).fold(f64::INFINITY, f64::min);
            checks[2].record(t, vel);
            checks[3].record(t, b.fbar - s.f.abs());
            checks[4].record(t, if s.fd3 > 0.0 { s.fd3 } else { -1.0 });
            let envelope = c.bound(x0, y0, t.max(0.0)).unwrap_or(f64::NAN);
            checks[5].record(t, envelope * (1.0 + ENVELOPE_REL_SLACK) + ENVELOPE_ABS_FLOOR - s.v.max(0.0).sqrt());
            let decay = y0 * (-2.0 * b.beta * t).exp();
            checks[6].record(t, decay * (1.0 + ENVELOPE_REL_SLACK) + ENVELOPE_ABS_FLOOR - s.v2);
            checks[7].record(t, if scenario.is_safe(s.state.p) { 0.0 } else { -1.0 });
        }
        let last = tr.samples.last().unwrap_or(first);
        checks[8].record(last.t, if scenario.target.contains(last.state.p) { 0.0 } else { -1.0 });
    } else {
        checks[8].record(0.0, -1.0);
    }
    let checks: Vec<CheckResult> = checks.into_iter().map(|c| c.result).collect();
    let passed = checks.iter().all(CheckResult::passed);
    CertificationReport { samples: tr.samples.len(), checks, passed }
}
