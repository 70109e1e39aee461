//! Dense linear programming and the planar support-function sweep.
//!
//! [`solve_lp`] is a two-phase tableau simplex for problems of the form
//!
//! ```text
//! maximize  c·x   subject to  a_i·x ≤ b_i  or  a_i·x = b_i,   x_j ≥ 0 or free
//! ```
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots the kernel
//! switches to Bland's rule until progress resumes. The final basis is
//! re-solved with an LU factorization so reported points and multipliers are
//! not polluted by tableau drift. Tall programs (many more rows than
//! variables, e.g. trigonometric polynomials constrained on a grid) are solved
//! through their dual, which has one row per variable.
//!
//! [`max_modulus`] maximizes `|ℓ(x)|` for a complex linear functional `ℓ`
//! over the feasible polytope by sweeping the real objectives
//! `Re(e^{-iθ} ℓ)`: the optimal values form the support function of the
//! planar convex set `ℓ(P)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 50;
const HARRIS_TOL: f64 = 1e-9;
const REINVERT_EVERY: usize = 50;
const PERTURB: f64 = 1e-7;
const MAX_PERTURBATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarBound {
    NonNegative,
    Free,
}

/// A dense linear program `max c·x` over rows of kind `≤` or `=`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    n_vars: usize,
    objective: Vec<f64>,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
    row_kinds: Vec<RowKind>,
    var_bounds: Vec<VarBound>,
}

impl LinearProgram {
    /// An empty program over `n_vars` nonnegative variables with zero objective.
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![0.0; n_vars],
            matrix: Vec::new(),
            rhs: Vec::new(),
            row_kinds: Vec::new(),
            var_bounds: vec![VarBound::NonNegative; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.n_vars, "objective length mismatch");
        self.objective.copy_from_slice(c);
    }

    pub fn add_row(&mut self, coeffs: &[f64], kind: RowKind, rhs: f64) {
        assert_eq!(coeffs.len(), self.n_vars, "row length mismatch");
        self.matrix.extend_from_slice(coeffs);
        self.rhs.push(rhs);
        self.row_kinds.push(kind);
    }

    pub fn set_bound(&mut self, var: usize, bound: VarBound) {
        self.var_bounds[var] = bound;
    }

    pub fn set_all_bounds(&mut self, bound: VarBound) {
        self.var_bounds.iter_mut().for_each(|b| *b = bound);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_vars..(i + 1) * self.n_vars]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn row_kinds(&self) -> &[RowKind] {
        &self.row_kinds
    }

    pub fn var_bounds(&self) -> &[VarBound] {
        &self.var_bounds
    }

    fn validate(&self) -> Result<()> {
        if self.n_vars == 0 {
            return Err(Error::InvalidInput("linear program has no variables".into()));
        }
        let finite = |v: &f64| v.is_finite();
        if !self.objective.iter().all(finite)
            || !self.matrix.iter().all(finite)
            || !self.rhs.iter().all(finite)
        {
            return Err(Error::InvalidInput("linear program has non-finite entries".into()));
        }
        Ok(())
    }

    fn rhs_scale(&self) -> f64 {
        1.0 + self.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest violation of the rows and bounds at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n_rows() {
            let lhs: f64 = self.row(i).iter().zip(x).map(|(a, v)| a * v).sum();
            let gap = lhs - self.rhs[i];
            worst = worst.max(match self.row_kinds[i] {
                RowKind::Le => gap.max(0.0),
                RowKind::Eq => gap.abs(),
            });
        }
        for (v, b) in x.iter().zip(&self.var_bounds) {
            if *b == VarBound::NonNegative {
                worst = worst.max(-v);
            }
        }
        worst
    }

    /// Largest violation of dual feasibility for row multipliers `y`.
    pub fn dual_residual(&self, y: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.n_vars {
            let mut r = self.objective[j];
            for (i, yi) in y.iter().enumerate() {
                r -= yi * self.matrix[i * self.n_vars + j];
            }
            worst = worst.max(match self.var_bounds[j] {
                VarBound::NonNegative => r.max(0.0),
                VarBound::Free => r.abs(),
            });
        }
        for (yi, kind) in y.iter().zip(&self.row_kinds) {
            if *kind == RowKind::Le {
                worst = worst.max(-yi);
            }
        }
        worst
    }

    /// The dual program, itself written as a maximization.
    fn dual(&self) -> LinearProgram {
        let m = self.n_rows();
        let mut d = LinearProgram::new(m);
        let neg_b: Vec<f64> = self.rhs.iter().map(|b| -b).collect();
        d.set_objective(&neg_b);
        for (i, kind) in self.row_kinds.iter().enumerate() {
            if *kind == RowKind::Eq {
                d.set_bound(i, VarBound::Free);
            }
        }
        let mut col = vec![0.0; m];
        for j in 0..self.n_vars {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.matrix[i * self.n_vars + j];
            }
            match self.var_bounds[j] {
                VarBound::NonNegative => {
                    let neg: Vec<f64> = col.iter().map(|v| -v).collect();
                    d.add_row(&neg, RowKind::Le, -self.objective[j]);
                }
                VarBound::Free => d.add_row(&col, RowKind::Eq, self.objective[j]),
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
    /// Row multipliers `y` with `c − Aᵀy ≤ 0` on nonnegative variables.
    pub duals: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub pivots: usize,
}

impl LpSolution {
    fn non_optimal(status: LpStatus, lp: &LinearProgram, pivots: usize) -> Self {
        Self {
            status,
            value: f64::NAN,
            point: vec![0.0; lp.n_vars()],
            duals: vec![0.0; lp.n_rows()],
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            pivots,
        }
    }
}

/// Solves `lp` to an optimal basic solution.
///
/// Infeasibility and unboundedness are reported through [`LpSolution::status`];
/// only malformed input and the pivot limit are errors.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    if lp.n_rows() > 2 * lp.n_vars() {
        let ds = Tableau::solve(&lp.dual())?;
        if ds.status == LpStatus::Optimal {
            return Ok(from_dual(lp, ds));
        }
        // A non-optimal dual does not distinguish an infeasible primal from an
        // unbounded one, so fall through to the direct solve.
    }
    Tableau::solve(lp)
}

/// Primal solution read off an optimal solution of `lp.dual()`.
fn from_dual(lp: &LinearProgram, ds: LpSolution) -> LpSolution {
    // Multipliers of the dual rows are the primal variables.
    let point: Vec<f64> = ds
        .duals
        .iter()
        .zip(lp.var_bounds())
        .map(|(u, b)| match b {
            VarBound::NonNegative => *u,
            VarBound::Free => -*u,
        })
        .collect();
    let value = lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    LpSolution {
        status: LpStatus::Optimal,
        value,
        primal_residual: lp.primal_residual(&point),
        dual_residual: lp.dual_residual(&ds.point),
        point,
        duals: ds.point,
        pivots: ds.pivots,
    }
}

/// Repeated solves of one feasible set under changing objectives, each
/// warm-started from the previous optimal basis. Tall programs go through
/// their dual, where a new objective is a new right-hand side.
struct Sweep {
    work: LinearProgram,
    direct: Option<Prepared>,
    via_dual: Option<Prepared>,
}

impl Sweep {
    fn new(lp: &LinearProgram) -> Self {
        Self { work: lp.clone(), direct: None, via_dual: None }
    }

    fn solve(&mut self, objective: &[f64]) -> Result<LpSolution> {
        self.work.set_objective(objective);
        if self.work.n_rows() > 2 * self.work.n_vars() {
            let dual = self.work.dual();
            let warm = match self.via_dual.as_mut() {
                Some(p) => p.retarget(&dual)?,
                None => {
                    self.via_dual = Prepared::new(&dual)?;
                    self.via_dual.is_some()
                }
            };
            if warm {
                let p = self.via_dual.as_mut().expect("prepared above");
                let ds = p.optimize(&dual, dual.objective())?;
                if ds.status == LpStatus::Optimal {
                    return Ok(from_dual(&self.work, ds));
                }
            }
            self.via_dual = None;
        }
        if self.direct.is_none() {
            match Prepared::new(&self.work)? {
                Some(p) => self.direct = Some(p),
                None => return Ok(LpSolution::non_optimal(LpStatus::Infeasible, &self.work, 0)),
            }
        }
        let p = self.direct.as_mut().expect("prepared above");
        p.optimize(&self.work, objective)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<f64>,
    /// Reduced costs `c_B B⁻¹ a_j − c_j`; last entry is the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
    pivots: usize,
    /// Cost vector of the current phase.
    cost: Vec<f64>,
    /// The initial `[A | b]`, kept for reinversion.
    original: Vec<f64>,
    /// Right-hand-side perturbation in original coordinates, if active.
    shift: Option<Vec<f64>>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let inv = 1.0 / self.t[pr * w + pc];
        for v in &mut self.t[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        let prow: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.t[r * w + pc];
            if f != 0.0 {
                for (v, p) in self.t[r * w..(r + 1) * w].iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                self.t[r * w + pc] = 0.0;
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.cost = cost.to_vec();
        let w = self.cols + 1;
        for j in 0..w {
            let mut d = if j < self.cols { -cost[j] } else { 0.0 };
            for r in 0..self.rows {
                let cb = cost[self.basis[r]];
                if cb != 0.0 {
                    d += cb * self.t[r * w + j];
                }
            }
            self.obj[j] = d;
        }
    }

    /// Runs simplex iterations on the current cost row.
    /// Returns `false` if the program is unbounded in this phase.
    ///
    /// With `guard` set, basic artificial variables (zero after phase 1) leave
    /// the basis at the first pivot that would move them, in either direction.
    fn optimize(&mut self, allow: &dyn Fn(usize) -> bool, guard: bool, limit: usize) -> Result<bool> {
        let mut perturbations = 0;
        loop {
            if !self.primal(allow, guard, limit, perturbations < MAX_PERTURBATIONS)? {
                self.shift = None;
                return Ok(false);
            }
            if self.shift.is_none() {
                return Ok(true);
            }
            perturbations += 1;
            self.shift = None;
            self.reinvert();
            self.dual_cleanup(allow, guard, limit)?;
            let cost_scale = 1.0 + self.cost.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if (0..self.cols).all(|j| !allow(j) || self.obj[j] >= -1e-11 * cost_scale) {
                return Ok(true);
            }
        }
    }

    /// Moves every basic value up by a small distinct amount so that
    /// degenerate vertices become simple.
    fn perturb(&mut self) {
        let (m, w) = (self.rows, self.cols + 1);
        let delta: Vec<f64> = (0..m)
            .map(|r| PERTURB * (1.0 + self.rhs(r).abs()) * (1.0 + ((r * 7919) % 997) as f64 / 997.0))
            .collect();
        let mut shift = self.shift.take().unwrap_or_else(|| vec![0.0; m]);
        for (i, s) in shift.iter_mut().enumerate() {
            *s += (0..m).map(|k| self.original[i * w + self.basis[k]] * delta[k]).sum::<f64>();
        }
        for (r, d) in delta.iter().enumerate() {
            self.t[r * w + self.cols] += d;
        }
        self.shift = Some(shift);
    }

    /// Dual simplex pivots that restore primal feasibility while keeping the
    /// reduced costs optimal. With `guard` set, basic artificials must return
    /// to zero from either side. Returns `false` if some infeasible row
    /// admits no entering column.
    fn dual_cleanup(&mut self, allow: &dyn Fn(usize) -> bool, guard: bool, limit: usize) -> Result<bool> {
        let scale = 1.0 + (0..self.rows).fold(0.0_f64, |m, r| m.max(self.rhs(r).abs()));
        let infeasibility = |tab: &Self, r: usize| -> f64 {
            let v = tab.rhs(r);
            if guard && tab.kinds[tab.basis[r]] == ColKind::Artificial {
                v.abs()
            } else {
                -v
            }
        };
        loop {
            if self.pivots > limit {
                return Err(Error::LpIterationLimit(limit));
            }
            let Some(pr) = (0..self.rows)
                .filter(|&r| infeasibility(self, r) > 1e-12 * scale)
                .max_by(|&a, &b| infeasibility(self, a).total_cmp(&infeasibility(self, b)))
            else {
                return Ok(true);
            };
            // The basic value must move toward zero as the entering variable
            // grows. Two-pass ratio test as in the primal: reduced costs may
            // turn slightly negative in exchange for a larger pivot.
            let sign = self.rhs(pr).signum();
            let candidates: Vec<(usize, f64)> = (0..self.cols)
                .filter(|&j| allow(j))
                .map(|j| (j, self.at(pr, j) * sign))
                .filter(|(_, a)| *a > PIVOT_TOL)
                .collect();
            let bound = candidates
                .iter()
                .map(|&(j, a)| (self.obj[j].max(0.0) + HARRIS_TOL) / a)
                .fold(f64::INFINITY, f64::min);
            let best = candidates
                .iter()
                .filter(|&&(j, a)| self.obj[j].max(0.0) / a <= bound)
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .map(|&(j, a)| (j, 0.0, a));
            let Some((pc, _, _)) = best else {
                return Ok(false);
            };
            self.pivot(pr, pc);
            if self.pivots % REINVERT_EVERY == 0 {
                self.reinvert();
            }
        }
    }

    fn primal(&mut self, allow: &dyn Fn(usize) -> bool, guard: bool, limit: usize, may_perturb: bool) -> Result<bool> {
        let cost_scale = 1.0 + self.obj[..self.cols].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let opt_tol = 1e-11 * cost_scale;
        let mut streak = 0usize;
        let mut bland = false;
        loop {
            if self.pivots > limit {
                return Err(Error::LpIterationLimit(limit));
            }
            if streak > DEGENERATE_STREAK && may_perturb && self.shift.is_none() {
                self.perturb();
                streak = 0;
            }
            // Once stalling is detected Bland's rule stays on for the phase.
            bland |= streak > DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = -opt_tol;
            for j in 0..self.cols {
                if !allow(j) {
                    continue;
                }
                let d = self.obj[j];
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = enter else {
                return Ok(true);
            };
            // Harris two-pass ratio test: the bound allows each row a small
            // infeasibility, and the largest pivot within it is taken.
            let eligible = |r: usize| -> Option<(f64, f64)> {
                let a = self.at(r, pc);
                if guard && self.kinds[self.basis[r]] == ColKind::Artificial && a.abs() > PIVOT_TOL {
                    Some((0.0, a.abs()))
                } else if a > PIVOT_TOL {
                    Some((self.rhs(r).max(0.0) / a, a))
                } else {
                    None
                }
            };
            let candidates: Vec<(usize, f64, f64)> =
                (0..self.rows).filter_map(|r| eligible(r).map(|(ratio, a)| (r, ratio, a))).collect();
            if candidates.is_empty() {
                return Ok(false);
            }
            let (pr, ratio) = if bland {
                let min = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                let tie = 1e-12 * (1.0 + min);
                let pick = candidates
                    .iter()
                    .filter(|c| c.1 <= min + tie)
                    .min_by_key(|c| self.basis[c.0])
                    .expect("nonempty");
                (pick.0, pick.1)
            } else {
                let bound = candidates
                    .iter()
                    .map(|&(r, ratio, a)| if ratio == 0.0 { 0.0 } else { (self.rhs(r).max(0.0) + HARRIS_TOL) / a })
                    .fold(f64::INFINITY, f64::min);
                let pick = candidates
                    .iter()
                    .filter(|c| c.1 <= bound)
                    .max_by(|a, b| a.2.total_cmp(&b.2))
                    .expect("the minimizing row is within the bound");
                (pick.0, pick.1)
            };
            if ratio * -self.obj[pc] <= 1e-12 * cost_scale {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(pr, pc);
            if !bland && self.pivots % REINVERT_EVERY == 0 {
                self.reinvert();
            }
        }
    }

    /// Recomputes the tableau as `B⁻¹ [A | b]` from the original data, which
    /// removes the rounding accumulated by repeated pivots.
    fn reinvert(&mut self) {
        let (m, w) = (self.rows, self.cols + 1);
        if m == 0 {
            return;
        }
        let bmat = DMatrix::from_fn(m, m, |i, k| self.original[i * w + self.basis[k]]);
        let lu = bmat.lu();
        let shift = self.shift.as_deref();
        let full = DMatrix::from_fn(m, w, |i, j| {
            let v = self.original[i * w + j];
            match shift {
                Some(s) if j == w - 1 => v + s[i],
                _ => v,
            }
        });
        let Some(x) = lu.solve(&full) else { return };
        if x.iter().any(|v| !v.is_finite()) {
            return;
        }
        for i in 0..m {
            for j in 0..w {
                self.t[i * w + j] = x[(i, j)];
            }
            for (k, &j) in self.basis.iter().enumerate() {
                self.t[i * w + j] = if i == k { 1.0 } else { 0.0 };
            }
        }
        let cost = self.cost.clone();
        self.set_costs(&cost);
    }

    fn solve(lp: &LinearProgram) -> Result<LpSolution> {
        match Prepared::new(lp)? {
            Some(mut p) => p.optimize(lp, lp.objective()),
            None => Ok(LpSolution::non_optimal(LpStatus::Infeasible, lp, 0)),
        }
    }
}

/// A tableau past phase 1, ready for any number of objectives.
struct Prepared {
    tab: Tableau,
    var_cols: Vec<(usize, Option<usize>)>,
    unit_col: Vec<usize>,
    row_sign: Vec<f64>,
}

impl Prepared {
    /// Builds the tableau and runs phase 1; `None` if `lp` is infeasible.
    fn new(lp: &LinearProgram) -> Result<Option<Self>> {
        let m = lp.n_rows();
        // Structural columns: free variables are split into a ± pair.
        let mut var_cols: Vec<(usize, Option<usize>)> = Vec::with_capacity(lp.n_vars());
        let mut n_struct = 0;
        for b in lp.var_bounds() {
            match b {
                VarBound::NonNegative => {
                    var_cols.push((n_struct, None));
                    n_struct += 1;
                }
                VarBound::Free => {
                    var_cols.push((n_struct, Some(n_struct + 1)));
                    n_struct += 2;
                }
            }
        }
        let n_slack = lp.row_kinds().iter().filter(|k| **k == RowKind::Le).count();
        let mut row_sign = vec![1.0; m];
        let mut needs_art = vec![false; m];
        for i in 0..m {
            if lp.rhs()[i] < 0.0 {
                row_sign[i] = -1.0;
            }
            needs_art[i] = lp.row_kinds()[i] == RowKind::Eq || lp.rhs()[i] < 0.0;
        }
        let n_art = needs_art.iter().filter(|v| **v).count();
        let cols = n_struct + n_slack + n_art;
        let w = cols + 1;

        let mut kinds = vec![ColKind::Structural; n_struct];
        kinds.extend(std::iter::repeat_n(ColKind::Slack, n_slack));
        kinds.extend(std::iter::repeat_n(ColKind::Artificial, n_art));

        let mut t = vec![0.0; m * w];
        let mut basis = vec![0usize; m];
        let mut unit_col = vec![0usize; m];
        let mut slack_idx = n_struct;
        let mut art_idx = n_struct + n_slack;
        for i in 0..m {
            let s = row_sign[i];
            let row = &mut t[i * w..(i + 1) * w];
            for (j, a) in lp.row(i).iter().enumerate() {
                let (p, n) = var_cols[j];
                row[p] = s * a;
                if let Some(n) = n {
                    row[n] = -s * a;
                }
            }
            row[cols] = s * lp.rhs()[i];
            if lp.row_kinds()[i] == RowKind::Le {
                row[slack_idx] = s;
                if !needs_art[i] {
                    basis[i] = slack_idx;
                    unit_col[i] = slack_idx;
                }
                slack_idx += 1;
            }
            if needs_art[i] {
                row[art_idx] = 1.0;
                basis[i] = art_idx;
                unit_col[i] = art_idx;
                art_idx += 1;
            }
        }
        let original = t.clone();

        let mut tab = Tableau {
            rows: m,
            cols,
            t,
            obj: vec![0.0; w],
            basis,
            kinds,
            pivots: 0,
            cost: vec![0.0; cols],
            original,
            shift: None,
        };
        let limit = 20_000 + 50 * (m + cols);

        if n_art > 0 {
            let phase1: Vec<f64> = tab
                .kinds
                .iter()
                .map(|k| if *k == ColKind::Artificial { -1.0 } else { 0.0 })
                .collect();
            tab.set_costs(&phase1);
            tab.optimize(&|_| true, false, limit)?;
            let infeas = -tab.obj[cols];
            if infeas > 1e-9 * lp.rhs_scale() {
                return Ok(None);
            }
            // Drive zero-level artificials out of the basis where possible.
            for r in 0..m {
                if tab.kinds[tab.basis[r]] != ColKind::Artificial {
                    continue;
                }
                let mut best: Option<(usize, f64)> = None;
                for j in 0..cols {
                    if tab.kinds[j] == ColKind::Artificial {
                        continue;
                    }
                    let a = tab.at(r, j).abs();
                    if a > 1e-9 && best.is_none_or(|(_, b)| a > b) {
                        best = Some((j, a));
                    }
                }
                if let Some((j, _)) = best {
                    tab.pivot(r, j);
                }
            }
        }

        Ok(Some(Self { tab, var_cols, unit_col, row_sign }))
    }

    /// Swaps in the right-hand side of `lp` (same rows otherwise) and restores
    /// feasibility by dual simplex pivots; `false` if that fails.
    fn retarget(&mut self, lp: &LinearProgram) -> Result<bool> {
        let tab = &mut self.tab;
        let w = tab.cols + 1;
        for (i, b) in lp.rhs().iter().enumerate() {
            tab.original[i * w + tab.cols] = self.row_sign[i] * b;
        }
        tab.reinvert();
        let kinds = tab.kinds.clone();
        let limit = tab.pivots + 20_000 + 50 * (tab.rows + tab.cols);
        tab.dual_cleanup(&|j| kinds[j] != ColKind::Artificial, true, limit)
    }

    /// Phase 2 for `objective`, starting from the current basis.
    fn optimize(&mut self, lp: &LinearProgram, objective: &[f64]) -> Result<LpSolution> {
        let tab = &mut self.tab;
        let (m, cols) = (tab.rows, tab.cols);
        let w = cols + 1;
        let limit = tab.pivots + 20_000 + 50 * (m + cols);
        let mut cost = vec![0.0; cols];
        for (j, (p, n)) in self.var_cols.iter().enumerate() {
            cost[*p] = objective[j];
            if let Some(n) = n {
                cost[*n] = -objective[j];
            }
        }
        tab.set_costs(&cost);
        let kinds = tab.kinds.clone();
        let bounded = tab.optimize(&|j| kinds[j] != ColKind::Artificial, true, limit)?;
        if !bounded {
            return Ok(LpSolution::non_optimal(LpStatus::Unbounded, lp, tab.pivots));
        }

        let original = &tab.original;
        let unit_col = &self.unit_col;
        // Basic solution and multipliers, re-solved from the original columns.
        let mut xb: Vec<f64> = (0..m).map(|r| tab.rhs(r)).collect();
        let cb: Vec<f64> = tab.basis.iter().map(|&j| cost[j]).collect();
        let mut y: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|r| cb[r] * tab.at(r, unit_col[i])).sum())
            .collect();
        if m > 0 {
            let bmat = DMatrix::from_fn(m, m, |i, k| original[i * w + tab.basis[k]]);
            let lu = bmat.clone().lu();
            let b = DVector::from_fn(m, |i, _| original[i * w + cols]);
            if let Some(sol) = lu.solve(&b) {
                if sol.iter().all(|v| v.is_finite()) {
                    xb = sol.iter().copied().collect();
                }
            }
            let lu_t = bmat.transpose().lu();
            if let Some(sol) = lu_t.solve(&DVector::from_vec(cb.clone())) {
                if sol.iter().all(|v| v.is_finite()) {
                    y = sol.iter().copied().collect();
                }
            }
        }
        let mut xs = vec![0.0; cols];
        for (r, &j) in tab.basis.iter().enumerate() {
            xs[j] = xb[r];
        }
        let point: Vec<f64> = self
            .var_cols
            .iter()
            .map(|(p, n)| xs[*p] - n.map_or(0.0, |n| xs[n]))
            .collect();
        let duals: Vec<f64> = y.iter().zip(&self.row_sign).map(|(v, s)| v * s).collect();
        let value = objective.iter().zip(&point).map(|(c, x)| c * x).sum();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            value,
            primal_residual: lp.primal_residual(&point),
            dual_residual: lp.dual_residual(&duals),
            point,
            duals,
            pivots: tab.pivots,
        })
    }
}

/// Result of a [`max_modulus`] sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusOptimum {
    /// `|ℓ(x)|` at the returned point.
    pub value: f64,
    /// Direction whose real objective produced the returned point.
    pub theta: f64,
    pub point: Vec<f64>,
    pub functional_value: Complex64,
    pub lp_solves: usize,
}

const SWEEP_GRID: usize = 64;
const THETA_TOL: f64 = 1e-10;

/// Maximizes `|ℓ(x)|` over the feasible set of `lp` (its objective is ignored).
///
/// The feasible image `ℓ(P)` must be invariant under rotation by
/// `symmetry_angle`, which must divide `2π`; the sweep then only covers
/// `[0, symmetry_angle)`.
pub fn max_modulus(lp: &LinearProgram, functional: &[Complex64], symmetry_angle: f64) -> Result<ModulusOptimum> {
    if functional.len() != lp.n_vars() {
        return Err(Error::InvalidInput("functional length does not match variable count".into()));
    }
    let tau = std::f64::consts::TAU;
    let folds = tau / symmetry_angle;
    if !(symmetry_angle > 0.0) || symmetry_angle > tau + 1e-12 || (folds - folds.round()).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("symmetry angle {symmetry_angle} does not divide 2π")));
    }
    lp.validate()?;
    let mut sweep = Sweep::new(lp);
    let re: Vec<f64> = functional.iter().map(|c| c.re).collect();
    let im: Vec<f64> = functional.iter().map(|c| c.im).collect();
    let mut solves = 0usize;
    let mut best: Option<ModulusOptimum> = None;

    let mut eval = |theta: f64, best: &mut Option<ModulusOptimum>| -> Result<(f64, Complex64)> {
        let (s, c) = theta.sin_cos();
        let obj: Vec<f64> = re.iter().zip(&im).map(|(a, b)| c * a + s * b).collect();
        let sol = sweep.solve(&obj)?;
        solves += 1;
        if sol.status != LpStatus::Optimal {
            return Err(Error::LpStatus(sol.status));
        }
        let v: Complex64 = functional.iter().zip(&sol.point).map(|(l, x)| l * x).sum();
        if best.as_ref().is_none_or(|b| v.norm() > b.value) {
            *best = Some(ModulusOptimum {
                value: v.norm(),
                theta,
                point: sol.point.clone(),
                functional_value: v,
                lp_solves: 0,
            });
        }
        Ok((sol.value, v))
    };

    let step = symmetry_angle / SWEEP_GRID as f64;
    let mut grid_best = (0.0, f64::NEG_INFINITY);
    for j in 0..SWEEP_GRID {
        let theta = j as f64 * step;
        let (h, _) = eval(theta, &mut best)?;
        if h > grid_best.1 {
            grid_best = (theta, h);
        }
    }

    // Golden-section refinement on the bracket around the best grid direction.
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (grid_best.0 - step, grid_best.0 + step);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let (mut f1, mut v1) = eval(x1, &mut best)?;
    let (mut f2, mut v2) = eval(x2, &mut best)?;
    while hi - lo > THETA_TOL {
        // One vertex optimal at both probes is optimal in between, where the
        // support function is |v|cos(θ − arg v).
        if (v1 - v2).norm() <= 1e-12 * (1.0 + v1.norm()) {
            let mut alpha = v1.arg();
            let center = 0.5 * (x1 + x2);
            alpha += ((center - alpha) / symmetry_angle).round() * symmetry_angle;
            if alpha >= x1 - THETA_TOL && alpha <= x2 + THETA_TOL {
                break;
            }
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            v1 = v2;
            x2 = lo + golden * (hi - lo);
            (f2, v2) = eval(x2, &mut best)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            v2 = v1;
            x1 = hi - golden * (hi - lo);
            (f1, v1) = eval(x1, &mut best)?;
        }
    }
    let mut out = best.expect("sweep evaluates at least one direction");
    out.lp_solves = solves;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lp2(c: &[f64], rows: &[(&[f64], RowKind, f64)]) -> LinearProgram {
        let mut lp = LinearProgram::new(c.len());
        lp.set_objective(c);
        for (a, k, b) in rows {
            lp.add_row(a, *k, *b);
        }
        lp
    }

    #[test]
    fn single_bound() {
        let lp = lp2(&[1.0], &[(&[1.0], RowKind::Le, 1.0)]);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_face() {
        let lp = lp2(&[1.0, 1.0], &[(&[1.0, 1.0], RowKind::Le, 1.0)]);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(s.primal_residual < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = lp2(&[1.0], &[(&[1.0], RowKind::Le, -1.0)]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
        let lp = lp2(&[1.0, 0.0], &[(&[0.0, 1.0], RowKind::Le, 1.0)]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_free_variables() {
        // max x - y, x + y = 2, x - y <= 1, y free
        let mut lp = lp2(
            &[1.0, -1.0],
            &[(&[1.0, 1.0], RowKind::Eq, 2.0), (&[1.0, -1.0], RowKind::Le, 1.0)],
        );
        lp.set_bound(1, VarBound::Free);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12, "{}", s.value);
        assert!(s.dual_residual < 1e-12);
    }

    #[test]
    fn tall_program_goes_through_dual() {
        // max x + y over the regular 40-gon inscribed in the unit circle.
        let mut lp = LinearProgram::new(2);
        lp.set_all_bounds(VarBound::Free);
        lp.set_objective(&[1.0, 1.0]);
        for k in 0..40 {
            let a = std::f64::consts::TAU * k as f64 / 40.0;
            lp.add_row(&[a.cos(), a.sin()], RowKind::Le, 1.0);
        }
        let s = solve_lp(&lp).unwrap();
        let expected = 2f64.sqrt(); // 45° is a facet normal of the 40-gon
        assert!((s.value - expected).abs() < 1e-12, "{}", s.value);
        assert!(s.primal_residual < 1e-12 && s.dual_residual < 1e-12);
    }

    #[test]
    fn dual_route_agrees_with_direct_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..5);
            let m = rng.gen_range(2 * n + 1..4 * n + 8);
            let mut lp = LinearProgram::new(n);
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            lp.set_objective(&c);
            if rng.gen_bool(0.5) {
                lp.set_all_bounds(VarBound::Free);
            }
            for _ in 0..m {
                let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                lp.add_row(&a, RowKind::Le, rng.gen_range(0.1..1.0));
            }
            let via_dual = solve_lp(&lp).unwrap();
            let direct = Tableau::solve(&lp).unwrap();
            assert_eq!(via_dual.status, direct.status);
            if direct.status == LpStatus::Optimal {
                assert!((via_dual.value - direct.value).abs() < 1e-9);
                assert!(via_dual.primal_residual < 1e-9);
                assert!(via_dual.dual_residual < 1e-9);
            }
        }
    }

    #[test]
    fn scaling_objective_scales_value() {
        let mut lp = lp2(
            &[0.3, 0.7, -0.2],
            &[
                (&[1.0, 2.0, 0.5], RowKind::Le, 4.0),
                (&[0.5, 0.1, 1.0], RowKind::Le, 2.0),
                (&[1.0, 1.0, 1.0], RowKind::Eq, 3.0),
            ],
        );
        let base = solve_lp(&lp).unwrap().value;
        lp.set_objective(&[0.3 * 3.5, 0.7 * 3.5, -0.2 * 3.5]);
        let scaled = solve_lp(&lp).unwrap().value;
        assert!((scaled - 3.5 * base).abs() < 1e-12);
    }

    #[test]
    fn modulus_of_unit_square() {
        let mut lp = LinearProgram::new(2);
        lp.add_row(&[1.0, 0.0], RowKind::Le, 1.0);
        lp.add_row(&[0.0, 1.0], RowKind::Le, 1.0);
        let ell = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let r = max_modulus(&lp, &ell, std::f64::consts::TAU).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn modulus_of_segment() {
        let mut lp = LinearProgram::new(1);
        lp.add_row(&[1.0], RowKind::Le, 1.0);
        let r = max_modulus(&lp, &[Complex64::new(1.0, 0.0)], std::f64::consts::TAU).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_symmetry_angle() {
        let mut lp = LinearProgram::new(1);
        lp.add_row(&[1.0], RowKind::Le, 1.0);
        assert!(max_modulus(&lp, &[Complex64::new(1.0, 0.0)], 2.5).is_err());
    }
}
