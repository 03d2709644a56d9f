//! Randomized identity and inequality suites. Shared with the acceptance
//! target, so this module depends on nothing but the core crate.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use reachcert_core::bounds::{Gains, PhysicalParams};
use reachcert_core::controller::{attitude_error_jacobian, attitude_errors, closed_loop, desired_state, tracking_errors, FlatOutput, TrackingErrors};
use reachcert_core::dynamics::{state_derivative, QuadState, StateTangent};
use reachcert_core::geometry::{closest_point, safe_box, safe_region, safe_strip, Box3, InflatedScenario};
use reachcert_core::rng::SeededRng;
use reachcert_core::so3::{exp_so3, hat, induced_norm2, orthogonality_defect, spd_inv_sqrt, spd_sqrt, sym_eig_bounds, vee};
use reachcert_core::{Mat3, Matrix, Rot3, SymMat, Vec3};

pub type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rotation(rng: &mut SeededRng, max_angle: f64) -> Rot3 {
    let axis = Vec3::new(rng.normal(), rng.normal(), rng.normal());
    exp_so3(axis / axis.norm() * rng.uniform(0.0, max_angle))
}

fn matrix<const R: usize, const C: usize>(rng: &mut SeededRng, scale: f64) -> Matrix<R, C> {
    Matrix::from_fn(|_, _| rng.uniform(-scale, scale))
}

fn spd<const N: usize>(rng: &mut SeededRng, shift: f64) -> SymMat<N> {
    let b: Matrix<N, N> = matrix(rng, 1.0);
    SymMat::symmetrize(&(b.transpose() * b + Matrix::identity().scale(shift)))
}

fn norm<const N: usize>(x: &[f64; N]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Rayleigh bounds, the weighted-energy comparison and the induced-norm
/// estimate for random SPD `M`, `W` in dimension six.
pub fn psd_estimates(cases: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::new(seed);
    for i in 0..cases {
        let m: SymMat<6> = spd(&mut rng, 0.05);
        let w: SymMat<6> = spd(&mut rng, 0.05);
        let a: Matrix<3, 6> = matrix(&mut rng, 2.0);
        let x: [f64; 6] = core::array::from_fn(|_| rng.normal());
        let nx2 = norm(&x).powi(2);
        let (lo, hi) = sym_eig_bounds(&m);
        let q = m.quad_form(&x);
        let tol = 1e-10 * q.max(1.0);
        ensure!(q >= lo * nx2 - tol && q <= hi * nx2 + tol, "case {i}: Rayleigh bounds {lo} {q} {hi}");
        let (ms, mi) = (spd_sqrt(&m).map_err(|e| e.to_string())?, spd_inv_sqrt(&m).map_err(|e| e.to_string())?);
        let ws = spd_sqrt(&w).map_err(|e| e.to_string())?;
        let msx = norm(&ms.matrix().mul_vec(&x));
        let lam = w.congruence(&mi).min_eigenvalue();
        let (lhs, rhs) = (lam * msx * msx, norm(&ws.matrix().mul_vec(&x)).powi(2));
        ensure!(lhs <= rhs + 1e-10 * rhs.max(1.0), "case {i}: weighted energy {lhs} > {rhs}");
        let lhs = norm(&a.mul_vec(&x));
        let rhs = induced_norm2(&(a * *mi.matrix())) * msx;
        ensure!(lhs <= rhs + 1e-10 * rhs.max(1.0), "case {i}: induced norm {lhs} > {rhs}");
    }
    Ok(())
}

/// The five hat-map identities.
pub fn hat_identities(cases: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::new(seed);
    for i in 0..cases {
        let (x, y) = (rng.cube(2.0), rng.cube(2.0));
        let a: Mat3 = matrix(&mut rng, 2.0);
        let r = *rotation(&mut rng, core::f64::consts::PI).matrix();
        let hx = hat(x);
        ensure!((hx.transpose() + hx).max_abs() <= 1e-12, "case {i}: skew");
        ensure!((hx * y - x.cross(y)).norm() <= 1e-12 && (hx * y + hat(y) * x).norm() <= 1e-12, "case {i}: cross product");
        let skew_part = vee(&(a - a.transpose())).map_err(|e| e.to_string())?;
        ensure!(((a * hx).trace() + x.dot(skew_part)).abs() <= 1e-10, "case {i}: trace");
        let rhs = hat((Mat3::identity().scale(a.trace()) - a) * x);
        ensure!((hx * a + a.transpose() * hx - rhs).max_abs() <= 1e-10, "case {i}: symmetrized product");
        ensure!((r * hx * r.transpose() - hat(r * x)).max_abs() <= 1e-10, "case {i}: conjugation");
    }
    Ok(())
}

pub fn exp_series(a: &Mat3, terms: usize) -> Mat3 {
    let mut sum = Mat3::identity();
    let mut term = Mat3::identity();
    for k in 1..terms {
        term = (term * *a).scale(1.0 / k as f64);
        sum = sum + term;
    }
    sum
}

/// Closed-form exponential against a 30-term power series, angles in `[0, π]`.
pub fn exponential_series(cases: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::new(seed);
    for i in 0..cases {
        let dir = Vec3::new(rng.normal(), rng.normal(), rng.normal());
        let v = dir / dir.norm() * rng.uniform(0.0, core::f64::consts::PI);
        let r = exp_so3(v);
        let err = (*r.matrix() - exp_series(&hat(v), 30)).max_abs();
        ensure!(err <= 1e-10, "case {i}: series gap {err}");
        ensure!(orthogonality_defect(r.matrix()) <= 1e-9 && (r.matrix().det() - 1.0).abs() <= 1e-9, "case {i}: not a rotation");
    }
    Ok(())
}

/// Smallest margin, over an RK4 solution (step 1e-4 on `[0, 10]`) of
/// `u̇ = −(a₀ − a₁e^{−ct})u + a₂e^{−ct}√u`, between the closed-form envelope
/// `e^{a₁/2c}(√u₀e^{−a₀t/2} + ½a₂e^{−a₀t/2}∫₀ᵗe^{(a₀/2−c)s}ds)` and `√u`.
pub fn bernoulli_margin(a0: f64, a1: f64, a2: f64, c: f64, u0: f64) -> f64 {
    let h = 1e-4;
    let steps = 100_000;
    let rhs = |u: f64, e: f64| -(a0 - a1 * e) * u + a2 * e * u.max(0.0).sqrt();
    let pre = (a1 / (2.0 * c)).exp();
    let k = 0.5 * a0 - c;
    let (half, full) = ((-0.5 * c * h).exp(), (-c * h).exp());
    let (decay_step, growth_step) = ((-0.5 * a0 * h).exp(), (k * h).exp());
    let (mut e, mut decay, mut growth, mut u) = (1.0, 1.0, 1.0, u0);
    let mut worst = f64::INFINITY;
    for i in 1..=steps {
        let em = e * half;
        let e1 = e * full;
        let k1 = rhs(u, e);
        let k2 = rhs(u + 0.5 * h * k1, em);
        let k3 = rhs(u + 0.5 * h * k2, em);
        let k4 = rhs(u + h * k3, e1);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        e = e1;
        decay *= decay_step;
        growth *= growth_step;
        if i % 1000 == 0 {
            // Reset the running products against drift.
            let t = i as f64 * h;
            e = (-c * t).exp();
            decay = (-0.5 * a0 * t).exp();
            growth = (k * t).exp();
        }
        let integral = if k.abs() < 1e-12 { i as f64 * h } else { (growth - 1.0) / k };
        let env = pre * (u0.sqrt() * decay + 0.5 * a2 * decay * integral);
        worst = worst.min(env - u.max(0.0).sqrt());
    }
    worst
}

pub fn bernoulli_envelope(cases: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::new(seed);
    for i in 0..cases {
        let (a0, a1, a2) = (rng.uniform(0.1, 5.0), rng.uniform(0.01, 3.0), rng.uniform(0.01, 3.0));
        let (c, u0) = (rng.uniform(0.1, 5.0), rng.uniform(1e-4, 4.0));
        let m = bernoulli_margin(a0, a1, a2, c, u0);
        ensure!(m >= -1e-6, "case {i} (a0={a0}, a1={a1}, a2={a2}, c={c}, u0={u0}): margin {m}");
    }
    Ok(())
}

/// `‖½(tr(RᵀR_d)I − RᵀR_d)‖ ≤ 1`.
pub fn error_jacobian_norm(cases: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::new(seed);
    for i in 0..cases {
        let (r, r_d) = (rotation(&mut rng, core::f64::consts::PI), rotation(&mut rng, core::f64::consts::PI));
        let n = induced_norm2(&attitude_error_jacobian(&r, &r_d));
        ensure!(n <= 1.0 + 1e-9, "case {i}: norm {n}");
    }
    Ok(())
}

/// `‖e_R‖² = Ψ(2 − Ψ)`, `½‖e_R‖² ≤ Ψ`, and `Ψ ≤ ‖e_R‖²/(2 − ψ)` when
/// `Ψ ≤ ψ`.
pub fn attitude_error_identity(cases: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::new(seed);
    for i in 0..cases {
        let (r, r_d) = (rotation(&mut rng, core::f64::consts::PI), rotation(&mut rng, core::f64::consts::PI));
        let (e_r, psi) = attitude_errors(&r, &r_d);
        let n2 = e_r.dot(e_r);
        ensure!((n2 - psi * (2.0 - psi)).abs() <= 1e-10, "case {i}: identity {n2} vs {}", psi * (2.0 - psi));
        ensure!(0.5 * n2 <= psi + 1e-12, "case {i}: lower bound");
        if psi < 1.99 {
            let bound = rng.uniform(psi, 1.99);
            ensure!(psi <= n2 / (2.0 - bound) + 1e-12, "case {i}: upper bound with ψ = {bound}");
        }
    }
    Ok(())
}

/// `‖(b₃,d·b₃)b₃ − b₃,d‖ ≤ √(2/(2−ψ))‖e_R‖` whenever `Ψ ≤ ψ = 1.9`.
pub fn thrust_axis_mismatch(cases: usize, seed: u64) -> Outcome {
    let bound: f64 = 1.9;
    let shape = (2.0 / (2.0 - bound)).sqrt();
    let mut rng = SeededRng::new(seed);
    let mut done = 0;
    while done < cases {
        let r_d = rotation(&mut rng, core::f64::consts::PI);
        let r = r_d * rotation(&mut rng, core::f64::consts::PI);
        let (e_r, psi) = attitude_errors(&r, &r_d);
        if psi > bound {
            continue;
        }
        let (b3, b3d) = (r.col(2), r_d.col(2));
        let lhs = (b3 * b3d.dot(b3) - b3d).norm();
        ensure!(lhs <= shape * e_r.norm() + 1e-12, "case {done}: {lhs} > {}", shape * e_r.norm());
        done += 1;
    }
    Ok(())
}

/// Quintic position reference with analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Quintic(pub [Vec3; 6]);

impl Quintic {
    pub fn random(rng: &mut SeededRng) -> Self {
        Quintic([rng.cube(3.0), rng.cube(1.0), rng.cube(1.0), rng.cube(0.5), rng.cube(0.3), rng.cube(0.1)])
    }

    pub fn flat(&self, t: f64) -> FlatOutput {
        let c = &self.0;
        let mut d = [Vec3::ZERO; 5];
        for (k, dk) in d.iter_mut().enumerate() {
            for (i, ci) in c.iter().enumerate().skip(k) {
                let falling: f64 = ((i - k + 1)..=i).map(|x| x as f64).product();
                *dk = *dk + *ci * (falling * t.powi((i - k) as i32));
            }
        }
        FlatOutput { p: d[0], v: d[1], a: d[2], j: d[3], s: d[4] }
    }
}

fn tangent(s: &QuadState, t: f64, q: &Quintic, g: &Gains, p: &PhysicalParams) -> Result<StateTangent, String> {
    let reference = |t: f64| q.flat(t);
    let (_, u) = closed_loop(s, t, &reference, g, p).map_err(|e| e.to_string())?;
    Ok(state_derivative(s, u.f, u.tau, p))
}

fn shifted(s: &QuadState, k: &StateTangent, h: f64) -> QuadState {
    QuadState { p: s.p + k.p_dot * h, v: s.v + k.v_dot * h, r: Rot3::from_matrix_unchecked(*s.r.matrix() + k.r_dot.scale(h)), w: s.w + k.w_dot * h }
}

fn rk4(s: &QuadState, t: f64, h: f64, q: &Quintic, g: &Gains, p: &PhysicalParams) -> Result<QuadState, String> {
    let k1 = tangent(s, t, q, g, p)?;
    let k2 = tangent(&shifted(s, &k1, 0.5 * h), t + 0.5 * h, q, g, p)?;
    let k3 = tangent(&shifted(s, &k2, 0.5 * h), t + 0.5 * h, q, g, p)?;
    let k4 = tangent(&shifted(s, &k3, h), t + h, q, g, p)?;
    let mix = |f: &dyn Fn(&StateTangent) -> Vec3| (f(&k1) + f(&k2) * 2.0 + f(&k3) * 2.0 + f(&k4)) * (h / 6.0);
    let r_dot = (k1.r_dot + k2.r_dot.scale(2.0) + k3.r_dot.scale(2.0) + k4.r_dot).scale(h / 6.0);
    Ok(QuadState {
        p: s.p + mix(&|k| k.p_dot),
        v: s.v + mix(&|k| k.v_dot),
        r: Rot3::project(&(*s.r.matrix() + r_dot)).map_err(|e| e.to_string())?,
        w: s.w + mix(&|k| k.w_dot),
    })
}

/// Error values and their predicted rates `(ė_p, ė_v, Ψ̇, ė_R, ė_ω)`.
fn errors_and_rates(s: &QuadState, t: f64, q: &Quintic, g: &Gains, p: &PhysicalParams) -> Result<(TrackingErrors, [Vec3; 4], f64), String> {
    let reference = |t: f64| q.flat(t);
    let d = desired_state(s, t, &reference, g, p).map_err(|e| e.to_string())?;
    let e = tracking_errors(s, &d);
    let f_d = -g.kp * e.e_p - g.kv * e.e_v + Vec3::E3 * p.weight() + p.mass() * d.a;
    let b3 = s.r.col(2);
    let delta_f = b3 * f_d.dot(b3) - f_d;
    let e_v_dot = (-g.kp * e.e_p - g.kv * e.e_v + delta_f) / p.mass();
    let e_r_dot = attitude_error_jacobian(&s.r, &d.r) * e.e_w;
    let e_w_dot = p.inertia_inv() * (-g.kr * e.e_r - g.kw * e.e_w);
    Ok((e, [e.e_v, e_v_dot, e_r_dot, e_w_dot], e.e_r.dot(e.e_w)))
}

/// Largest gap, over `cases` random closed-loop states, between one-sided
/// differences of the tracking errors at step `h` and the closed-form error
/// dynamics averaged over the step.
pub fn error_dynamics_residual(cases: usize, seed: u64, h: f64) -> Result<f64, String> {
    let (g, p) = (Gains::reference(), PhysicalParams::reference());
    let mut rng = SeededRng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let q = Quintic::random(&mut rng);
        let t = rng.uniform(0.0, 1.0);
        let f = q.flat(t);
        let s0 = QuadState { p: f.p + rng.cube(0.3), v: f.v + rng.cube(0.3), r: rotation(&mut rng, 0.5), w: rng.cube(1.0) };
        let s1 = rk4(&s0, t, h, &q, &g, &p)?;
        let (e0, r0, psi0) = errors_and_rates(&s0, t, &q, &g, &p)?;
        let (e1, r1, psi1) = errors_and_rates(&s1, t + h, &q, &g, &p)?;
        let diffs = [(e1.e_p - e0.e_p) / h, (e1.e_v - e0.e_v) / h, (e1.e_r - e0.e_r) / h, (e1.e_w - e0.e_w) / h];
        for (k, dk) in diffs.iter().enumerate() {
            worst = worst.max((*dk - (r0[k] + r1[k]) * 0.5).norm_inf());
        }
        worst = worst.max(((e1.psi - e0.psi) / h - 0.5 * (psi0 + psi1)).abs());
    }
    Ok(worst)
}

fn random_box(rng: &mut SeededRng, span: f64) -> Box3 {
    let (a, b) = (rng.cube(span), rng.cube(span));
    Box3::new(Vec3::from_fn(|i| a[i].min(b[i])), Vec3::from_fn(|i| a[i].max(b[i]))).unwrap()
}

fn corners(b: &Box3) -> impl Iterator<Item = Vec3> + '_ {
    (0..8).map(move |k| Vec3::from_fn(|i| if k >> i & 1 == 0 { b.lo()[i] } else { b.hi()[i] }))
}

/// Centered boxes stay inside their host box: exact corner test plus
/// sampled interior points.
pub fn safe_box_containment(cases: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::new(seed);
    for i in 0..cases {
        let b = random_box(&mut rng, 5.0);
        let v = rng.uniform_vec(b.lo(), b.hi());
        let h = safe_box(v, &b).map_err(|e| e.to_string())?;
        ensure!(b.contains_box(&h) && h.contains(v), "case {i}: {h:?} not in {b:?}");
        for c in corners(&h) {
            ensure!(b.contains(c), "case {i}: corner {c:?} outside");
        }
        for _ in 0..8 {
            let z = rng.uniform_vec(h.lo(), h.hi());
            ensure!(b.contains(z), "case {i}: sample {z:?} outside");
        }
    }
    Ok(())
}

/// The clamp is at least as close, in the ∞- and 2-norms, as every point
/// of a 10×10×10 grid over the box.
pub fn closest_point_optimality(cases: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::new(seed);
    for i in 0..cases {
        let b = random_box(&mut rng, 3.0);
        let x = rng.cube(6.0);
        let y = closest_point(x, &b);
        ensure!(b.contains(y), "case {i}: closest point outside the box");
        let (d_inf, d_2) = ((x - y).norm_inf(), (x - y).norm());
        let (lo, w) = (b.lo(), b.hi() - b.lo());
        for a in 0..10 {
            for c in 0..10 {
                for e in 0..10 {
                    let g = lo + Vec3::new(w.x * a as f64 / 9.0, w.y * c as f64 / 9.0, w.z * e as f64 / 9.0);
                    let z = Vec3::from_fn(|k| g[k].min(b.hi()[k]));
                    ensure!(d_inf <= (x - z).norm_inf() + 1e-12 && d_2 <= (x - z).norm() + 1e-12, "case {i}: grid point {z:?} is closer");
                }
            }
        }
    }
    Ok(())
}

/// Strips around outside points miss the box: exact interval test on the
/// strip axis plus sampled strip points.
pub fn strip_disjointness(cases: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::new(seed);
    let mut done = 0;
    while done < cases {
        let b = random_box(&mut rng, 3.0);
        let x = rng.cube(6.0);
        if b.contains(x) {
            continue;
        }
        let alpha = if done % 10 == 0 { 0.0 } else { rng.uniform(0.0, 1.0) };
        let st = safe_strip(x, &b, alpha).map_err(|e| e.to_string())?;
        let (lo, hi) = (st.center - st.half_width, st.center + st.half_width);
        ensure!(hi < b.lo()[st.axis] || lo > b.hi()[st.axis], "case {done}: strip [{lo}, {hi}] meets the box");
        ensure!(st.contains(x), "case {done}: strip misses its origin");
        for _ in 0..4 {
            let mut z = rng.uniform_vec(b.lo(), b.hi());
            z[st.axis] = st.center + st.half_width * rng.uniform(-1.0, 1.0);
            ensure!(!b.contains(z), "case {done}: strip point {z:?} inside the box");
        }
        done += 1;
    }
    Ok(())
}

fn random_inflated(rng: &mut SeededRng) -> InflatedScenario {
    let domain = Box3::cube(0.0, 5.0).unwrap();
    let obstacles = (0..1 + rng.index(10))
        .map(|_| {
            let c = rng.uniform_vec(Vec3::ZERO, Vec3::splat(5.0));
            Box3::centered(c, rng.uniform_vec(Vec3::splat(0.05), Vec3::splat(1.0))).unwrap()
        })
        .collect();
    InflatedScenario { domain, obstacles, target: Box3::cube(4.5, 5.0).unwrap(), p0: Vec3::ZERO }
}

/// Safe regions around free points lie in the domain and miss every
/// obstacle, checked exactly with box arithmetic.
pub fn safe_region_containment(cases: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::new(seed);
    let mut s = random_inflated(&mut rng);
    let mut done = 0;
    while done < cases {
        if done % 100 == 0 {
            s = random_inflated(&mut rng);
        }
        let y = rng.uniform_vec(s.domain.lo(), s.domain.hi());
        if !s.is_free(y) {
            continue;
        }
        let alpha = rng.uniform(0.0, 1.0);
        let r = safe_region(y, &s, alpha).map_err(|e| e.to_string())?;
        ensure!(r.contains(y), "case {done}: region misses its center");
        ensure!(s.box_is_free(&r), "case {done}: region {r:?} leaves the free space");
        for _ in 0..4 {
            let z = rng.uniform_vec(r.lo(), r.hi());
            ensure!(s.is_free(z), "case {done}: sample {z:?} not free");
        }
        done += 1;
    }
    Ok(())
}
