//! Dense linear-programming feasibility.
//!
//! Problems are given as sparse equality and `≤` rows. Before solving:
//!
//! * rows are normalized by their largest coefficient,
//! * single-variable rows become variable bounds,
//! * rows that are multiples of each other (including negated copies) merge
//!   into one ranged row `L ≤ a·x ≤ U`,
//! * variables are split into independent blocks that share no row.
//!
//! Each block is solved by phase 1 of a bounded-variable tableau simplex:
//! every row `a·x − s = 0` gets a logical variable `s ∈ [L, U]`, rows the
//! starting point already satisfies start with `s` basic, and the others get
//! an artificial variable whose sum is minimized. Dantzig pricing is used
//! until a run of `10·n` degenerate pivots, then Bland's rule.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { terms, rhs }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    fn max_abs(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, &(_, a)| m.max(a.abs()))
    }
}

/// Feasibility problem: `a·x = b` rows and `a·x ≤ b` rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub num_vars: usize,
    pub equalities: Vec<LinearRow>,
    pub inequalities: Vec<LinearRow>,
}

impl LpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, ..Self::default() }
    }

    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(LinearRow::new(terms, rhs));
    }

    pub fn add_le(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.inequalities.push(LinearRow::new(terms, rhs));
    }

    pub fn add_ge(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        let neg = terms.into_iter().map(|(j, a)| (j, -a)).collect();
        self.inequalities.push(LinearRow::new(neg, -rhs));
    }

    pub fn row_count(&self) -> usize {
        self.equalities.len() + self.inequalities.len()
    }

    /// Largest violation of any row by `x`, each measured relative to
    /// `max(1, ‖a‖∞)`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self.equalities.iter().map(|r| (r.dot(x) - r.rhs).abs() / r.max_abs().max(1.0));
        let le = self.inequalities.iter().map(|r| (r.dot(x) - r.rhs).max(0.0) / r.max_abs().max(1.0));
        eq.chain(le).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        for r in self.equalities.iter().chain(self.inequalities.iter()) {
            if !r.rhs.is_finite() || r.terms.iter().any(|&(j, a)| j >= self.num_vars || !a.is_finite()) {
                return Err(Error::Dimension("row refers to a missing variable or has a non-finite coefficient"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Feasible,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub point: Option<Vec<f64>>,
    /// Sum of artificial variables when phase 1 stopped, over all blocks.
    pub phase1_objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    /// Phase-1 optimum at or below this counts as feasible.
    pub tol: f64,
    /// Relative tolerance of the final row re-check.
    pub check_tol: f64,
    /// Pivot budget per block.
    pub max_iters: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { tol: 1e-9, check_tol: 1e-8, max_iters: 50_000 }
    }
}

/// Interchangeable feasibility back end.
pub trait FeasibilitySolver {
    fn solve(&self, p: &LpProblem, opts: &LpOptions) -> Result<LpSolution>;
}

/// The in-crate simplex.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseSimplex;

impl FeasibilitySolver for DenseSimplex {
    fn solve(&self, p: &LpProblem, opts: &LpOptions) -> Result<LpSolution> {
        solve_feasibility(p, opts)
    }
}

/// Ranged row `lo ≤ a·x ≤ hi` with normalized coefficients.
#[derive(Debug, Clone)]
struct Ranged {
    terms: Vec<(usize, f64)>,
    lo: f64,
    hi: f64,
}

struct Presolved {
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Ranged>,
}

/// Sorts terms, merges repeated indices and drops zeros.
fn canonical_terms(terms: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut t: Vec<(usize, f64)> = terms.to_vec();
    t.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
    for (j, a) in t {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

fn presolve(p: &LpProblem) -> core::result::Result<Presolved, ()> {
    let n = p.num_vars;
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    let mut ranged: BTreeMap<Vec<(usize, u64)>, (Vec<(usize, f64)>, f64, f64)> = BTreeMap::new();

    let rows = p.equalities.iter().map(|r| (r, true)).chain(p.inequalities.iter().map(|r| (r, false)));
    for (row, is_eq) in rows {
        let terms = canonical_terms(&row.terms);
        if terms.is_empty() {
            let ok = if is_eq { row.rhs == 0.0 } else { row.rhs >= 0.0 };
            if !ok {
                return Err(());
            }
            continue;
        }
        // scale so the largest coefficient is +1 or -1, then flip so the first is positive
        let scale = terms.iter().fold(0.0, |m, &(_, a)| m.max(a.abs()));
        let sign = if terms[0].1 < 0.0 { -1.0 } else { 1.0 };
        let k = sign / scale;
        let norm: Vec<(usize, f64)> = terms.iter().map(|&(j, a)| (j, a * k)).collect();
        let b = row.rhs * k;
        let (lo, hi) = if is_eq {
            (b, b)
        } else if sign > 0.0 {
            (f64::NEG_INFINITY, b)
        } else {
            (b, f64::INFINITY)
        };
        if norm.len() == 1 {
            let (j, a) = norm[0];
            // a > 0 after the sign flip
            lower[j] = lower[j].max(lo / a);
            upper[j] = upper[j].min(hi / a);
            continue;
        }
        let key: Vec<(usize, u64)> = norm.iter().map(|&(j, a)| (j, a.to_bits())).collect();
        let entry = ranged.entry(key).or_insert((norm, f64::NEG_INFINITY, f64::INFINITY));
        entry.1 = entry.1.max(lo);
        entry.2 = entry.2.min(hi);
    }
    for j in 0..n {
        if lower[j] > upper[j] {
            return Err(());
        }
    }
    let rows: Vec<Ranged> = ranged.into_values().map(|(terms, lo, hi)| Ranged { terms, lo, hi }).collect();
    if rows.iter().any(|r| r.lo > r.hi) {
        return Err(());
    }
    Ok(Presolved { lower, upper, rows })
}

/// Connected components of the variable/row incidence graph. Returns
/// `(variables, rows)` per component, both in increasing order.
fn blocks(n: usize, rows: &[Ranged]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for r in rows {
        let first = r.terms[0].0;
        for &(j, _) in &r.terms[1..] {
            let (a, b) = (find(&mut parent, first), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut index: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for j in 0..n {
        let root = find(&mut parent, j);
        let k = *index.entry(root).or_insert_with(|| {
            out.push((Vec::new(), Vec::new()));
            out.len() - 1
        });
        out[k].0.push(j);
    }
    for (ri, r) in rows.iter().enumerate() {
        let root = find(&mut parent, r.terms[0].0);
        out[index[&root]].1.push(ri);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Basic {
    /// Column index into the tableau (structural or logical).
    Column(usize),
    /// Artificial of the given row.
    Artificial,
}

struct BlockOutcome {
    status: LpStatus,
    x: Vec<f64>,
    objective: f64,
    iterations: usize,
}

const PRIMAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const PRICE_TOL: f64 = 1e-9;

/// Phase 1 on one block. `lo, hi` hold bounds of the `n` structural columns
/// followed by the `m` logical columns.
fn solve_block(a: &[Vec<f64>], lo: &[f64], hi: &[f64], n: usize, opts: &LpOptions) -> BlockOutcome {
    let m = a.len();
    let cols = n + m;
    // nonbasic starting values: a finite bound, or zero for free columns
    let start = |j: usize| -> f64 {
        if lo[j].is_finite() {
            lo[j]
        } else if hi[j].is_finite() {
            hi[j]
        } else {
            0.0
        }
    };
    let mut value: Vec<f64> = (0..cols).map(start).collect();
    let mut is_basic = vec![false; cols];
    let mut basis: Vec<Basic> = Vec::with_capacity(m);
    let mut art_value = vec![0.0; m];
    // tableau rows: B⁻¹[A, −I]
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (i, row) in a.iter().enumerate() {
        let ax: f64 = row.iter().zip(&value[..n]).map(|(c, x)| c * x).sum();
        let mut tr = vec![0.0; cols];
        tr[..n].copy_from_slice(row);
        tr[n + i] = -1.0;
        let s = n + i;
        if ax >= lo[s] - PRIMAL_TOL && ax <= hi[s] + PRIMAL_TOL {
            // logical basic: row scaled by −1 so its own column is +1
            for v in tr.iter_mut() {
                *v = -*v;
            }
            value[s] = ax;
            is_basic[s] = true;
            basis.push(Basic::Column(s));
        } else {
            // logical nonbasic at its nearest bound, artificial absorbs the rest
            value[s] = if ax < lo[s] { lo[s] } else { hi[s] };
            let resid = ax - value[s];
            // row: a·x − s + σ y = 0 with y = |resid| ≥ 0, σ = −sign(resid)
            let sigma = if resid > 0.0 { -1.0 } else { 1.0 };
            for v in tr.iter_mut() {
                *v *= sigma;
            }
            art_value[i] = resid.abs();
            basis.push(Basic::Artificial);
        }
        t.push(tr);
    }

    // reduced costs of phase 1: d_j = −Σ_{artificial rows} T_ij
    let mut d = vec![0.0; cols];
    for (i, b) in basis.iter().enumerate() {
        if *b == Basic::Artificial {
            for j in 0..cols {
                d[j] -= t[i][j];
            }
        }
    }
    let objective = |basis: &[Basic], art_value: &[f64]| -> f64 {
        basis.iter().zip(art_value).filter(|(b, _)| **b == Basic::Artificial).map(|(_, v)| *v).sum()
    };

    let mut iterations = 0;
    let mut degenerate_run = 0;
    let mut bland = false;
    let degenerate_limit = 10 * cols.max(1);
    let status;
    let mut basic_value: Vec<f64> = (0..m)
        .map(|i| match basis[i] {
            Basic::Column(j) => value[j],
            Basic::Artificial => art_value[i],
        })
        .collect();

    loop {
        let obj = objective(&basis, &basic_value);
        if obj <= 1e-14 {
            status = LpStatus::Feasible;
            break;
        }
        if iterations >= opts.max_iters {
            status = LpStatus::IterationLimit;
            break;
        }
        // pricing
        let mut enter = None;
        let mut best = 0.0;
        for j in 0..cols {
            if is_basic[j] {
                continue;
            }
            let at_lo = lo[j].is_finite() && value[j] <= lo[j];
            let at_hi = hi[j].is_finite() && value[j] >= hi[j];
            let dir = if d[j] < -PRICE_TOL && !at_hi {
                1.0
            } else if d[j] > PRICE_TOL && !at_lo {
                -1.0
            } else {
                continue;
            };
            if bland {
                enter = Some((j, dir));
                break;
            }
            if d[j].abs() > best {
                best = d[j].abs();
                enter = Some((j, dir));
            }
        }
        let Some((q, dir)) = enter else {
            status = if obj <= opts.tol { LpStatus::Feasible } else { LpStatus::Infeasible };
            break;
        };
        iterations += 1;

        // ratio test: basic i moves by −dir·θ·T_iq
        let mut theta = hi[q] - lo[q];
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let alpha = -dir * t[i][q];
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let (blo, bhi) = match basis[i] {
                Basic::Column(j) => (lo[j], hi[j]),
                Basic::Artificial => (0.0, f64::INFINITY),
            };
            let x = basic_value[i];
            let (limit, bound) = if alpha < 0.0 {
                ((x - blo).max(0.0) / -alpha, blo)
            } else {
                ((bhi - x).max(0.0) / alpha, bhi)
            };
            if !limit.is_finite() {
                continue;
            }
            let better = match leave {
                None => limit < theta,
                Some((r, _)) => {
                    if limit < theta - 1e-12 {
                        true
                    } else if limit <= theta + 1e-12 {
                        if bland {
                            basis_index(basis[i], i, cols) < basis_index(basis[r], r, cols)
                        } else {
                            let art_i = basis[i] == Basic::Artificial;
                            let art_r = basis[r] == Basic::Artificial;
                            (art_i && !art_r) || (art_i == art_r && t[i][q].abs() > t[r][q].abs())
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                theta = theta.min(limit);
                leave = Some((i, bound));
            }
        }
        if !theta.is_finite() {
            // cannot happen in phase 1: the objective is bounded below
            status = LpStatus::IterationLimit;
            break;
        }
        if theta <= 1e-15 {
            degenerate_run += 1;
            if degenerate_run >= degenerate_limit {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }

        // move
        value[q] += dir * theta;
        for i in 0..m {
            let tiq = t[i][q];
            if tiq != 0.0 {
                basic_value[i] -= dir * theta * tiq;
            }
        }
        match leave {
            None => {
                // bound flip
                value[q] = if dir > 0.0 { hi[q] } else { lo[q] };
            }
            Some((r, bound)) => {
                match basis[r] {
                    Basic::Column(j) => {
                        is_basic[j] = false;
                        value[j] = bound;
                    }
                    Basic::Artificial => {}
                }
                // pivot on (r, q)
                let piv = t[r][q];
                let inv = 1.0 / piv;
                for v in t[r].iter_mut() {
                    *v *= inv;
                }
                let pivot_row = core::mem::take(&mut t[r]);
                for (i, row) in t.iter_mut().enumerate() {
                    if i == r {
                        continue;
                    }
                    let f = row[q];
                    if f != 0.0 {
                        for (v, p) in row.iter_mut().zip(&pivot_row) {
                            *v -= f * p;
                        }
                        row[q] = 0.0;
                    }
                }
                let f = d[q];
                if f != 0.0 {
                    for (v, p) in d.iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                    d[q] = 0.0;
                }
                t[r] = pivot_row;
                basis[r] = Basic::Column(q);
                is_basic[q] = true;
                basic_value[r] = value[q];
                if iterations % 64 == 0 {
                    refresh(&t, &basis, &is_basic, &value, &mut basic_value, cols);
                    // rebuild reduced costs from the artificial rows
                    d.iter_mut().for_each(|v| *v = 0.0);
                    for (i, b) in basis.iter().enumerate() {
                        if *b == Basic::Artificial {
                            for j in 0..cols {
                                d[j] -= t[i][j];
                            }
                        }
                    }
                }
            }
        }
    }
    refresh(&t, &basis, &is_basic, &value, &mut basic_value, cols);
    for i in 0..m {
        if let Basic::Column(j) = basis[i] {
            value[j] = basic_value[i];
        }
    }
    let objective = objective(&basis, &basic_value);
    BlockOutcome { status, x: value[..n].to_vec(), objective, iterations }
}

fn basis_index(b: Basic, row: usize, cols: usize) -> usize {
    match b {
        Basic::Column(j) => j,
        Basic::Artificial => cols + row,
    }
}

/// Recomputes basic values from the nonbasic ones: each tableau row reads
/// `z_B(i) + Σ_{nonbasic} T_ij z_j + (artificial term) = 0`.
fn refresh(t: &[Vec<f64>], basis: &[Basic], is_basic: &[bool], value: &[f64], basic_value: &mut [f64], cols: usize) {
    for (i, row) in t.iter().enumerate() {
        let s: f64 = (0..cols).filter(|&j| !is_basic[j]).map(|j| row[j] * value[j]).sum();
        match basis[i] {
            Basic::Column(_) => basic_value[i] = -s,
            // σ-scaled artificial column is +1 in its own row
            Basic::Artificial => basic_value[i] = -s,
        }
    }
}

/// Finds a point satisfying every row of `p`, or reports infeasibility.
pub fn solve_feasibility(p: &LpProblem, opts: &LpOptions) -> Result<LpSolution> {
    p.validate()?;
    let Ok(pre) = presolve(p) else {
        return Ok(LpSolution { status: LpStatus::Infeasible, point: None, phase1_objective: f64::INFINITY, iterations: 0 });
    };
    let n = p.num_vars;
    let mut x = vec![0.0; n];
    let mut objective = 0.0;
    let mut iterations = 0;
    let mut status = LpStatus::Feasible;
    for (vars, rows) in blocks(n, &pre.rows) {
        let local: BTreeMap<usize, usize> = vars.iter().enumerate().map(|(k, &j)| (j, k)).collect();
        let nb = vars.len();
        let a: Vec<Vec<f64>> = rows
            .iter()
            .map(|&ri| {
                let mut dense = vec![0.0; nb];
                for &(j, c) in &pre.rows[ri].terms {
                    dense[local[&j]] = c;
                }
                dense
            })
            .collect();
        let lo: Vec<f64> = vars.iter().map(|&j| pre.lower[j]).chain(rows.iter().map(|&ri| pre.rows[ri].lo)).collect();
        let hi: Vec<f64> = vars.iter().map(|&j| pre.upper[j]).chain(rows.iter().map(|&ri| pre.rows[ri].hi)).collect();
        let out = solve_block(&a, &lo, &hi, nb, opts);
        iterations += out.iterations;
        objective += out.objective;
        for (k, &j) in vars.iter().enumerate() {
            x[j] = out.x[k];
        }
        if out.status != LpStatus::Feasible {
            status = out.status;
            break;
        }
    }
    if status == LpStatus::Feasible && p.max_violation(&x) > opts.check_tol {
        status = LpStatus::Infeasible;
    }
    let point = (status == LpStatus::Feasible).then_some(x);
    Ok(LpSolution { status, point, phase1_objective: objective, iterations })
}
