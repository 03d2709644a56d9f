//! Geometric tracking controller.
//!
//! The desired attitude is built from the desired force `F_d` so that its
//! third column is `F_d/‖F_d‖`. Its angular rate follows from the analytic
//! derivative of that construction along `Ḟ_d`. The angular acceleration
//! differentiates `ω_d(F_d, Ḟ_d)` along the exact `F̈_d`, which needs the
//! reference snap but no reference values at other times.


use crate::bounds::{Gains, PhysicalParams};
use crate::dynamics::QuadState;
use crate::so3::{hat, vee_skew_part};
use crate::{Error, Mat3, Result, Rot3, Vec3};

/// Step (in seconds) of the five-point stencil for `ω̇_d`.
pub const OMEGA_DOT_STEP: f64 = 1e-3;

/// Position reference and its first four time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlatOutput {
    pub p: Vec3,
    pub v: Vec3,
    pub a: Vec3,
    pub j: Vec3,
    pub s: Vec3,
}

/// A position reference that can be queried at any time, including slightly
/// outside its nominal domain.
pub trait Reference {
    fn flat(&self, t: f64) -> FlatOutput;
}

/// Fixed position, zero derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hover(pub Vec3);

impl Reference for Hover {
    fn flat(&self, _t: f64) -> FlatOutput {
        FlatOutput { p: self.0, ..FlatOutput::default() }
    }
}

impl<F: Fn(f64) -> FlatOutput> Reference for F {
    fn flat(&self, t: f64) -> FlatOutput {
        self(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredState {
    pub p: Vec3,
    pub v: Vec3,
    pub a: Vec3,
    pub j: Vec3,
    pub s: Vec3,
    pub r: Rot3,
    pub w: Vec3,
    pub w_dot: Vec3,
}

impl DesiredState {
    /// Hover at `p` with identity attitude.
    pub fn hover(p: Vec3) -> Self {
        Self {
            p,
            v: Vec3::ZERO,
            a: Vec3::ZERO,
            j: Vec3::ZERO,
            s: Vec3::ZERO,
            r: Rot3::identity(),
            w: Vec3::ZERO,
            w_dot: Vec3::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingErrors {
    pub e_p: Vec3,
    pub e_v: Vec3,
    pub e_r: Vec3,
    pub e_w: Vec3,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub f: f64,
    pub tau: Vec3,
    pub f_d: Vec3,
    pub delta_f: Vec3,
}

/// `e_R` and `Ψ` for an attitude pair.
pub fn attitude_errors(r: &Rot3, r_d: &Rot3) -> (Vec3, f64) {
    let rd_t_r = *r_d.transpose().matrix() * *r.matrix();
    let e_r = vee_skew_part(&rd_t_r);
    // ¼‖R − R_d‖²_F equals ½(3 − tr(R_dᵀR)) on SO(3) but keeps full
    // relative precision near zero error.
    let d = *r.matrix() - *r_d.matrix();
    let psi = 0.25 * d.m.iter().flatten().map(|v| v * v).sum::<f64>();
    (e_r, psi)
}

pub fn tracking_errors(s: &QuadState, d: &DesiredState) -> TrackingErrors {
    let (e_r, psi) = attitude_errors(&s.r, &d.r);
    let rt_rd = *s.r.transpose().matrix() * *d.r.matrix();
    TrackingErrors { e_p: s.p - d.p, e_v: s.v - d.v, e_r, e_w: s.w - rt_rd * d.w, psi }
}

/// `C = ½(tr(RᵀR_d) I − RᵀR_d)`, the map with `ė_R = C e_ω`.
pub fn attitude_error_jacobian(r: &Rot3, r_d: &Rot3) -> Mat3 {
    let rt_rd = *r.transpose().matrix() * *r_d.matrix();
    (Mat3::identity().scale(rt_rd.trace()) - rt_rd).scale(0.5)
}

pub fn desired_force(e_p: Vec3, e_v: Vec3, acc_d: Vec3, g: &Gains, p: &PhysicalParams) -> Vec3 {
    -g.kp * e_p - g.kv * e_v + Vec3::E3 * p.weight() + p.mass() * acc_d
}

fn check_well_defined(f: Vec3) -> Result<(f64, f64)> {
    let n = f.norm();
    let margin = n + f.z;
    if !(margin >= 1e-9 * n.max(1.0)) {
        return Err(Error::Singularity { norm: n, margin });
    }
    Ok((n, margin))
}

/// Attitude whose third column is `F_d/‖F_d‖`, with the first two columns
/// chosen by the minimal rotation from `e₃`.
pub fn desired_attitude(f: Vec3) -> Result<Rot3> {
    let (n, s) = check_well_defined(f)?;
    let (f1, f2, f3) = (f.x, f.y, f.z);
    let b1 = Vec3::new(f3 + f2 * f2 / s, -f1 * f2 / s, -f1) / n;
    let b2 = Vec3::new(-f1 * f2 / s, f3 + f1 * f1 / s, -f2) / n;
    let b3 = f / n;
    Ok(Rot3::from_matrix_unchecked(Mat3::from_cols(b1, b2, b3)))
}

/// Directional derivative of [`desired_attitude`] at `f` along `u`.
pub fn desired_attitude_rate(f: Vec3, u: Vec3) -> Result<Mat3> {
    let (n, s) = check_well_defined(f)?;
    let (f1, f2, f3) = (f.x, f.y, f.z);
    let n_dot = f.dot(u) / n;
    let s_dot = n_dot + u.z;
    let q12 = f1 * f2 / s;
    let q12_dot = (u.x * f2 + f1 * u.y) / s - f1 * f2 * s_dot / (s * s);
    let big1 = Vec3::new(f3 + f2 * f2 / s, -q12, -f1);
    let big1_dot = Vec3::new(u.z + 2.0 * f2 * u.y / s - f2 * f2 * s_dot / (s * s), -q12_dot, -u.x);
    let big2 = Vec3::new(-q12, f3 + f1 * f1 / s, -f2);
    let big2_dot = Vec3::new(-q12_dot, u.z + 2.0 * f1 * u.x / s - f1 * f1 * s_dot / (s * s), -u.y);
    let norm_rate = |b: Vec3, b_dot: Vec3| b_dot / n - b * (n_dot / (n * n));
    Ok(Mat3::from_cols(norm_rate(big1, big1_dot), norm_rate(big2, big2_dot), norm_rate(f, u)))
}

/// `ω_d = vee(R_dᵀ Ṙ_d)` for a force `f` moving with rate `f_dot`.
pub fn desired_rate(f: Vec3, f_dot: Vec3) -> Result<Vec3> {
    let r_d = desired_attitude(f)?;
    let r_d_dot = desired_attitude_rate(f, f_dot)?;
    Ok(vee_skew_part(&(*r_d.transpose().matrix() * r_d_dot)))
}

/// `Δ_f = ‖F_d‖((b₃,d·b₃)b₃ − b₃,d)`, the gap between the applied and
/// desired force.
pub fn thrust_mismatch(f_d: Vec3, r: &Rot3) -> Vec3 {
    let b3 = r.col(2);
    b3 * f_d.dot(b3) - f_d
}

/// `Ḟ_d` along the closed loop.
pub fn force_rate(e_p: Vec3, e_v: Vec3, jerk_d: Vec3, delta_f: Vec3, g: &Gains, p: &PhysicalParams) -> Vec3 {
    -g.kp * e_v - (g.kv / p.mass()) * (-g.kp * e_p - g.kv * e_v + delta_f) + p.mass() * jerk_d
}

/// Desired force and its first two time derivatives along the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceJet {
    pub f: Vec3,
    pub f_dot: Vec3,
    pub f_ddot: Vec3,
}

/// `F_d`, `Ḟ_d`, `F̈_d` at state `s` for reference values `flat`. Uses
/// `ė_v = (−k_p e_p − k_v e_v + Δ_f)/m` and `ḃ₃ = R ω̂ e₃`.
pub fn force_jet(s: &QuadState, flat: &FlatOutput, g: &Gains, p: &PhysicalParams) -> ForceJet {
    let m = p.mass();
    let e_p = s.p - flat.p;
    let e_v = s.v - flat.v;
    let f = desired_force(e_p, e_v, flat.a, g, p);
    let b3 = s.r.col(2);
    let delta_f = b3 * f.dot(b3) - f;
    let e_v_dot = (-g.kp * e_p - g.kv * e_v + delta_f) / m;
    let f_dot = -g.kp * e_v - g.kv * e_v_dot + m * flat.j;
    let b3_dot = s.r * s.w.cross(Vec3::E3);
    let delta_f_dot = b3_dot * f.dot(b3) + b3 * (f_dot.dot(b3) + f.dot(b3_dot)) - f_dot;
    let e_v_ddot = (-g.kp * e_v - g.kv * e_v_dot + delta_f_dot) / m;
    let f_ddot = -g.kp * e_v_dot - g.kv * e_v_ddot + m * flat.s;
    ForceJet { f, f_dot, f_ddot }
}

/// Time derivative of `ω_d` for a force moving along `jet`: the five-point
/// derivative at `σ = 0` of `σ ↦ ω_d(F + σḞ + ½σ²F̈, Ḟ + σF̈)`.
pub fn desired_rate_derivative(jet: &ForceJet) -> Result<Vec3> {
    let w_at = |sigma: f64| desired_rate(jet.f + jet.f_dot * sigma + jet.f_ddot * (0.5 * sigma * sigma), jet.f_dot + jet.f_ddot * sigma);
    let h = OMEGA_DOT_STEP;
    let (wm2, wm1, wp1, wp2) = (w_at(-2.0 * h)?, w_at(-h)?, w_at(h)?, w_at(2.0 * h)?);
    Ok((wm2 - wp2 + (wp1 - wm1) * 8.0) / (12.0 * h))
}

/// Full desired state at `(s, t)`. The reference is read at `t` only.
pub fn desired_state(s: &QuadState, t: f64, reference: &dyn Reference, g: &Gains, p: &PhysicalParams) -> Result<DesiredState> {
    let flat = reference.flat(t);
    let jet = force_jet(s, &flat, g, p);
    let r = desired_attitude(jet.f)?;
    let w = desired_rate(jet.f, jet.f_dot)?;
    let w_dot = desired_rate_derivative(&jet)?;
    Ok(DesiredState { p: flat.p, v: flat.v, a: flat.a, j: flat.j, s: flat.s, r, w, w_dot })
}

/// Thrust and torque for a state and a complete desired state.
pub fn control(s: &QuadState, d: &DesiredState, g: &Gains, p: &PhysicalParams) -> Result<ControlOutput> {
    let e = tracking_errors(s, d);
    let f_d = desired_force(e.e_p, e.e_v, d.a, g, p);
    let b3 = s.r.col(2);
    let f = f_d.dot(b3);
    let rt_rd = *s.r.transpose().matrix() * *d.r.matrix();
    let j = p.inertia_matrix();
    let feed = hat(s.w) * (rt_rd * d.w) - rt_rd * d.w_dot;
    let tau = -g.kr * e.e_r - g.kw * e.e_w + s.w.cross(j * s.w) - j * feed;
    Ok(ControlOutput { f, tau, f_d, delta_f: thrust_mismatch(f_d, &s.r) })
}

/// Desired state and control output in one call, as used by the simulator.
pub fn closed_loop(s: &QuadState, t: f64, reference: &dyn Reference, g: &Gains, p: &PhysicalParams) -> Result<(DesiredState, ControlOutput)> {
    let d = desired_state(s, t, reference, g, p)?;
    let u = control(s, &d, g, p)?;
    Ok((d, u))
}
