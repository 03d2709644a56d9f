//! Lyapunov matrices, stability constants and uniform tracking-error bounds.
//!
//! The position/velocity error `z₁ = (e_p, e_v)` and attitude error
//! `z₂ = (e_R, e_ω)` are measured through
//!
//! ```text
//! V₁ = z₁ᵀ M₁ z₁
//! V₂ = ½ e_ωᵀ J e_ω + k_R Ψ + c₂ e_R·e_ω
//! ```
//!
//! and `√V(t)` is bounded by [`StabilityConstants::bound`], a function of the
//! initial values `V₁(0), V₂(0)` and time. Maximizing it over time gives the
//! uniform bound `𝓛ᵤ`, which is mapped to position, velocity and PD-force
//! bounds through induced norms of `M₁^{-1/2}`.

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::controller::{tracking_errors, DesiredState, TrackingErrors};
use crate::dynamics::QuadState;
use crate::so3::{induced_norm2, Matrix};
use crate::{Error, Mat3, Result, SymMat, Vec3};

/// Below this gap `|α₀/2 − β|` the closed forms switch to their limits.
pub const RATE_GAP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhysicalParamsRepr", into = "PhysicalParamsRepr")]
pub struct PhysicalParams {
    mass: f64,
    inertia: SymMat<3>,
    gravity: f64,
    inertia_inv: Mat3,
    inertia_min: f64,
}

#[derive(Serialize, Deserialize)]
struct PhysicalParamsRepr {
    mass: f64,
    inertia: [[f64; 3]; 3],
    #[serde(default = "default_gravity")]
    gravity: f64,
}

fn default_gravity() -> f64 {
    9.81
}

impl TryFrom<PhysicalParamsRepr> for PhysicalParams {
    type Error = Error;
    fn try_from(r: PhysicalParamsRepr) -> Result<Self> {
        let m = Mat3::from_rows(r.inertia);
        if (m - m.transpose()).max_abs() > 1e-12 {
            return Err(Error::InvalidParameter { name: "inertia (asymmetric)", value: (m - m.transpose()).max_abs() });
        }
        PhysicalParams::new(r.mass, SymMat::symmetrize(&m), r.gravity)
    }
}

impl From<PhysicalParams> for PhysicalParamsRepr {
    fn from(p: PhysicalParams) -> Self {
        PhysicalParamsRepr { mass: p.mass, inertia: p.inertia.matrix().m, gravity: p.gravity }
    }
}

impl PhysicalParams {
    pub fn new(mass: f64, inertia: SymMat<3>, gravity: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter { name: "mass", value: mass });
        }
        if !(gravity > 0.0 && gravity.is_finite()) {
            return Err(Error::InvalidParameter { name: "gravity", value: gravity });
        }
        inertia.check_positive_definite()?;
        let inertia_inv = *inertia.inverse()?.matrix();
        let inertia_min = inertia.min_eigenvalue();
        Ok(Self { mass, inertia, gravity, inertia_inv, inertia_min })
    }

    /// The 4.34 kg airframe used throughout the examples.
    pub fn reference() -> Self {
        Self::new(4.34, SymMat::diagonal([0.0820, 0.0845, 0.1377]), 9.81).expect("reference parameters are valid")
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn inertia(&self) -> &SymMat<3> {
        &self.inertia
    }

    pub fn inertia_matrix(&self) -> Mat3 {
        *self.inertia.matrix()
    }

    pub fn inertia_inv(&self) -> Mat3 {
        self.inertia_inv
    }

    /// `λ_min(J)`.
    pub fn inertia_min(&self) -> f64 {
        self.inertia_min
    }

    /// `m g`.
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    #[serde(rename = "k_p")]
    pub kp: f64,
    #[serde(rename = "k_v")]
    pub kv: f64,
    #[serde(rename = "k_R")]
    pub kr: f64,
    #[serde(rename = "k_omega")]
    pub kw: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Gains {
    pub fn new(kp: f64, kv: f64, kr: f64, kw: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        let g = Self { kp, kv, kr, kw, gamma1, gamma2 };
        g.validate()?;
        Ok(g)
    }

    /// The optimized gain set reported for the reference airframe.
    pub fn reference() -> Self {
        Self { kp: 18.5058, kv: 5.6704, kr: 23.5537, kw: 1.4309, gamma1: 0.55, gamma2: 0.6047 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k_p", self.kp), ("k_v", self.kv), ("k_R", self.kr), ("k_omega", self.kw)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        for (name, v) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.kp, self.kv, self.kr, self.kw, self.gamma1, self.gamma2]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { kp: a[0], kv: a[1], kr: a[2], kw: a[3], gamma1: a[4], gamma2: a[5] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    /// Attitude error level `Ψ̄`, in (0, 2).
    pub psi_bar: f64,
    /// Split of `Ψ̄` between the initial attitude and rate errors, in (0, 1).
    pub alpha_psi: f64,
    /// Admissible initial `V₁`.
    pub v1_bar: f64,
    /// Envelope on `|p̈_d + g e₃|`, per axis.
    pub a_max: Vec3,
    /// Margin on the vertical thrust floor (N).
    pub eps: f64,
}

impl BoundConfig {
    pub fn reference() -> Self {
        Self { psi_bar: 0.005, alpha_psi: 0.4, v1_bar: 0.4, a_max: Vec3::new(1.0, 1.0, 10.0), eps: 1e-6 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.psi_bar > 0.0 && self.psi_bar < 2.0) {
            return Err(Error::InvalidParameter { name: "psi_bar", value: self.psi_bar });
        }
        if !(self.alpha_psi > 0.0 && self.alpha_psi < 1.0) {
            return Err(Error::InvalidParameter { name: "alpha_psi", value: self.alpha_psi });
        }
        if !(self.v1_bar > 0.0 && self.v1_bar.is_finite()) {
            return Err(Error::InvalidParameter { name: "v1_bar", value: self.v1_bar });
        }
        for i in 0..3 {
            if !(self.a_max[i] > 0.0 && self.a_max[i].is_finite()) {
                return Err(Error::InvalidParameter { name: "a_max", value: self.a_max[i] });
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter { name: "eps", value: self.eps });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovMatrices {
    pub c1: f64,
    pub c2: f64,
    pub m1: SymMat<6>,
    pub w1: SymMat<6>,
    pub m21: SymMat<6>,
    pub m22: SymMat<6>,
    pub w2: SymMat<6>,
}

fn block6(a: Mat3, b: Mat3, d: Mat3) -> SymMat<6> {
    SymMat::from_upper(|i, j| match (i < 3, j < 3) {
        (true, true) => a.m[i][j],
        (true, false) => b.m[i][j - 3],
        _ => d.m[i - 3][j - 3],
    })
}

/// Builds `c₁, c₂` and the five Lyapunov matrices. Valid gains always give
/// positive definite matrices; a failure here is reported as an internal
/// error.
pub fn build_matrices(g: &Gains, p: &PhysicalParams, cfg: &BoundConfig) -> Result<LyapunovMatrices> {
    g.validate()?;
    cfg.validate()?;
    let m = p.mass;
    let lj = p.inertia_min;
    let c1 = g.gamma1 * (g.kp * m).sqrt().min(4.0 * m * g.kp * g.kv / (g.kv * g.kv + 4.0 * m * g.kp));
    let c2 = g.gamma2 * (g.kr * lj).sqrt().min(4.0 * lj * g.kr * g.kw / (g.kw * g.kw + 4.0 * lj * g.kr));
    let i3 = Mat3::identity();
    let j = p.inertia_matrix();
    let j_inv = p.inertia_inv;

    let m1 = block6(i3.scale(0.5 * g.kp), i3.scale(0.5 * c1), i3.scale(0.5 * m));
    let w1 = block6(i3.scale(c1 * g.kp / m), i3.scale(c1 * g.kv / (2.0 * m)), i3.scale(g.kv - c1));
    let m21 = block6(i3.scale(0.5 * g.kr), i3.scale(0.5 * c2), j.scale(0.5));
    let m22 = block6(i3.scale(g.kr / (2.0 - cfg.psi_bar)), i3.scale(0.5 * c2), j.scale(0.5));
    let w2 = block6(j_inv.scale(c2 * g.kr), j_inv.scale(0.5 * c2 * g.kw), i3.scale(g.kw - c2));

    for mat in [&m1, &w1, &m21, &m22, &w2] {
        if mat.check_positive_definite().is_err() {
            return Err(Error::Internal("Lyapunov matrix is not positive definite for valid gains"));
        }
    }
    Ok(LyapunovMatrices { c1, c2, m1, w1, m21, m22, w2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstants {
    pub beta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

/// `[a I, b I]`, a 3×6 block row.
fn block_row(a: f64, b: f64) -> Matrix<3, 6> {
    Matrix::from_fn(|i, j| {
        if j == i {
            a
        } else if j == i + 3 {
            b
        } else {
            0.0
        }
    })
}

fn row_norm(a: f64, b: f64, s: &SymMat<6>) -> f64 {
    induced_norm2(&(block_row(a, b) * *s.matrix()))
}

pub fn stability_constants(l: &LyapunovMatrices, g: &Gains, p: &PhysicalParams, cfg: &BoundConfig) -> Result<StabilityConstants> {
    let m1_is = l.m1.inv_sqrt()?;
    let m21_is = l.m21.inv_sqrt()?;
    let m22_is = l.m22.inv_sqrt()?;
    let beta = 0.5 * l.w2.congruence(&m22_is).min_eigenvalue();
    let alpha0 = l.w1.congruence(&m1_is).min_eigenvalue().min(2.0 * beta);
    let shape = (2.0 / (2.0 - cfg.psi_bar)).sqrt();
    let n_mix = row_norm(l.c1 / p.mass, 1.0, &m1_is);
    let n_force = row_norm(g.kp, g.kv, &m1_is);
    let n_att = row_norm(1.0, 0.0, &m21_is);
    let alpha1 = n_mix * n_force * n_att * shape;
    let alpha2 = p.mass * cfg.a_max.norm() * n_mix * n_att * shape;
    Ok(StabilityConstants { beta, alpha0, alpha1, alpha2 })
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value: v })
    }
}

impl StabilityConstants {
    /// `∫₀ᵗ e^{(α₀/2−β)s} ds` scaled by `e^{−α₀t/2}`, evaluated without
    /// forming large exponentials.
    fn damped_integral(&self, t: f64) -> f64 {
        let a = 0.5 * self.alpha0;
        let k = a - self.beta;
        if k.abs() < RATE_GAP_TOLERANCE {
            t * (-a * t).exp()
        } else {
            (-a * t).exp() * (k * t).exp_m1() / k
        }
    }

    /// Time-varying bound `𝓛(x, y, t)` on `√V(t)` given `V₁(0) = x`,
    /// `V₂(0) = y`.
    pub fn bound(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        check_nonneg("x", x)?;
        check_nonneg("y", y)?;
        check_nonneg("t", t)?;
        let sy = y.sqrt();
        let pre = (self.alpha1 * sy / (2.0 * self.beta)).exp();
        let decay = (-0.5 * self.alpha0 * t).exp();
        Ok(pre * ((x + y).sqrt() * decay + 0.5 * self.alpha2 * sy * self.damped_integral(t)))
    }

    /// Maximizer over `t ≥ 0` of [`bound`](Self::bound).
    pub fn t_max(&self, x: f64, y: f64) -> Result<f64> {
        check_nonneg("x", x)?;
        check_nonneg("y", y)?;
        if y <= 0.0 {
            return Ok(0.0);
        }
        let a = 0.5 * self.alpha0;
        let k = a - self.beta;
        let big_a = (x + y).sqrt();
        let big_b = 0.5 * self.alpha2 * y.sqrt();
        let t = if k.abs() < RATE_GAP_TOLERANCE {
            (big_b - a * big_a) / (a * big_b)
        } else {
            let arg = a * (big_b - k * big_a) / (big_b * self.beta);
            if arg > 0.0 {
                arg.ln() / k
            } else {
                0.0
            }
        };
        Ok(if t > 0.0 && t.is_finite() { t } else { 0.0 })
    }

    /// `𝓛ᵤ(x, y) = 𝓛(x, y, t_max(x, y))`.
    pub fn uniform(&self, x: f64, y: f64) -> Result<f64> {
        let t = self.t_max(x, y)?;
        self.bound(x, y, t)
    }
}

pub fn l_of_t(x: f64, y: f64, t: f64, c: &StabilityConstants) -> Result<f64> {
    c.bound(x, y, t)
}

pub fn t_max(x: f64, y: f64, c: &StabilityConstants) -> Result<f64> {
    c.t_max(x, y)
}

/// Everything derived from one gain choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSet {
    pub matrices: LyapunovMatrices,
    pub constants: StabilityConstants,
    pub vbar2: f64,
    pub lu: f64,
    pub lp: f64,
    pub lv: f64,
    pub lf: f64,
    pub fbar: f64,
}

/// `V̄₂`, the largest `V₂(0)` compatible with the initial-set thresholds.
pub fn vbar2(g: &Gains, l: &LyapunovMatrices, p: &PhysicalParams, cfg: &BoundConfig) -> f64 {
    let ap = cfg.alpha_psi;
    (g.kr + 2.0 * l.c2 * (g.kr / p.inertia_min * ap * (1.0 - ap)).sqrt()) * cfg.psi_bar
}

pub fn uniform_bounds(
    l: &LyapunovMatrices,
    c: &StabilityConstants,
    g: &Gains,
    cfg: &BoundConfig,
    p: &PhysicalParams,
) -> Result<BoundSet> {
    let v2 = vbar2(g, l, p, cfg);
    let lu = c.uniform(cfg.v1_bar, v2)?;
    let m1_is = l.m1.inv_sqrt()?;
    let lp = row_norm(1.0, 0.0, &m1_is) * lu;
    let lv = row_norm(0.0, 1.0, &m1_is) * lu;
    let lf = row_norm(g.kp, g.kv, &m1_is) * lu;
    let fbar = lf + p.mass * cfg.a_max.norm();
    Ok(BoundSet { matrices: *l, constants: *c, vbar2: v2, lu, lp, lv, lf, fbar })
}

impl BoundSet {
    pub fn compute(g: &Gains, p: &PhysicalParams, cfg: &BoundConfig) -> Result<Self> {
        let l = build_matrices(g, p, cfg)?;
        let c = stability_constants(&l, g, p, cfg)?;
        uniform_bounds(&l, &c, g, cfg, p)
    }

    pub fn summary(&self) -> BoundSummary {
        BoundSummary {
            c1: self.matrices.c1,
            c2: self.matrices.c2,
            beta: self.constants.beta,
            alpha0: self.constants.alpha0,
            alpha1: self.constants.alpha1,
            alpha2: self.constants.alpha2,
            vbar2: self.vbar2,
            lu: self.lu,
            lp: self.lp,
            lv: self.lv,
            lf: self.lf,
            fbar: self.fbar,
        }
    }
}

/// Scalar view of a [`BoundSet`], sufficient to plan, synthesize and
/// certify without the matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub c1: f64,
    pub c2: f64,
    pub beta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub vbar2: f64,
    #[serde(rename = "Lu")]
    pub lu: f64,
    #[serde(rename = "Lp")]
    pub lp: f64,
    #[serde(rename = "Lv")]
    pub lv: f64,
    #[serde(rename = "Lf")]
    pub lf: f64,
    #[serde(rename = "Fbar")]
    pub fbar: f64,
}

impl BoundSummary {
    pub fn constants(&self) -> StabilityConstants {
        StabilityConstants { beta: self.beta, alpha0: self.alpha0, alpha1: self.alpha1, alpha2: self.alpha2 }
    }
}

/// `F̄ ≤ f_max`: the thrust the bounds may demand is available.
pub fn thrust_compatible(fbar: f64, f_max: f64) -> bool {
    fbar <= f_max
}

pub fn eval_v1(e_p: Vec3, e_v: Vec3, l: &LyapunovMatrices) -> f64 {
    l.m1.quad_form(&[e_p.x, e_p.y, e_p.z, e_v.x, e_v.y, e_v.z])
}

pub fn eval_v2(e_r: Vec3, e_w: Vec3, psi: f64, c2: f64, g: &Gains, p: &PhysicalParams) -> f64 {
    0.5 * e_w.dot(p.inertia_matrix() * e_w) + g.kr * psi + c2 * e_r.dot(e_w)
}

/// `(V₁, V₂, V)` for a set of tracking errors.
pub fn eval_v(e: &TrackingErrors, l: &LyapunovMatrices, g: &Gains, p: &PhysicalParams) -> (f64, f64, f64) {
    let v1 = eval_v1(e.e_p, e.e_v, l);
    let v2 = eval_v2(e.e_r, e.e_w, e.psi, l.c2, g, p);
    (v1, v2, v1 + v2)
}

/// Left-hand sides and thresholds of the initial-set inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSetReport {
    pub psi: f64,
    pub psi_limit: f64,
    pub rate_energy: f64,
    pub rate_energy_limit: f64,
    pub v1: f64,
    pub v1_limit: f64,
    pub member: bool,
}

pub fn initial_set_check(s: &QuadState, d0: &DesiredState, l: &LyapunovMatrices, g: &Gains, cfg: &BoundConfig, p: &PhysicalParams) -> InitialSetReport {
    initial_set_report(&tracking_errors(s, d0), l, g, cfg, p)
}

pub fn initial_set_report(e: &TrackingErrors, l: &LyapunovMatrices, g: &Gains, cfg: &BoundConfig, p: &PhysicalParams) -> InitialSetReport {
    let psi_limit = cfg.alpha_psi * cfg.psi_bar;
    let rate_energy = 0.5 * e.e_w.dot(p.inertia_matrix() * e.e_w);
    let rate_energy_limit = g.kr * (1.0 - cfg.alpha_psi) * cfg.psi_bar;
    let v1 = eval_v1(e.e_p, e.e_v, l);
    let member = e.psi <= psi_limit && rate_energy <= rate_energy_limit && v1 <= cfg.v1_bar;
    InitialSetReport { psi: e.psi, psi_limit, rate_energy, rate_energy_limit, v1, v1_limit: cfg.v1_bar, member }
}
