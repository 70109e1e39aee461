//! The constant `CF(H) = K(H)` on `ℤ` for finite symmetric `H`.
//!
//! The problem is the semi-infinite program
//! `max ψ(1)` over real even `ψ` with `ψ(0) = 1`, `supp ψ ⊆ H` and
//! `T(t) = 1 + 2Σ_{k∈H⁺} ψ(k)cos(2πkt) ≥ 0` on `[0, 1)`.
//! [`cf_z`] solves it by exchange: finitely many constraints `T(t_i) ≥ 0`, with
//! the negative local minima of `T` added until none is left. The independent
//! cross-check solves the grid problems `T(ν/m) ≥ 0`, whose values `K_m(H)`
//! decrease to `CF(H)` as `m` doubles.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use itertools::Itertools;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, RowKind, VarBound};
use crate::seq::{is_pd_z, trig_local_minima, SeqZ, Sequence, SupportZ};
use crate::solver_zm::{SolveMeta, SolveReport};

/// Largest `max H` accepted by the solvers on `ℤ`.
pub const MAX_DEGREE: u64 = 1024;
/// Exchange rounds before giving up.
pub const MAX_ROUNDS: usize = 200;
/// Working points closer than this are merged.
const DEDUP_RADIUS: f64 = 1e-12;
/// Violations this small at working points, relative to `1 + 2Σ|ψ(k)|`, are
/// LP round-off, not cuts.
const LP_FLOOR: f64 = 1e-9;

/// State of the exchange iteration.
#[derive(Debug, Clone, Serialize)]
pub struct ExchangeState {
    pub working_points: Vec<f64>,
    /// Most negative value of `T` after the last LP.
    pub violation: f64,
    pub round: usize,
}

impl ExchangeState {
    fn new(n: u64) -> Self {
        let count = 4 * (2 * n as usize + 1);
        Self {
            working_points: (0..count).map(|i| i as f64 / count as f64).collect(),
            violation: f64::NEG_INFINITY,
            round: 0,
        }
    }

    fn is_working_point(&self, t: f64) -> bool {
        let t = t.rem_euclid(1.0);
        let i = self.working_points.partition_point(|p| *p < t);
        let near = |j: usize| self.working_points.get(j).is_some_and(|p| (p - t).abs() <= DEDUP_RADIUS);
        near(i) || (i > 0 && near(i - 1))
    }

    /// Inserts `t` unless a working point lies within the dedup radius.
    fn insert(&mut self, t: f64) -> bool {
        if self.is_working_point(t) {
            return false;
        }
        let t = t.rem_euclid(1.0);
        let i = self.working_points.partition_point(|p| *p < t);
        self.working_points.insert(i, t);
        true
    }
}

fn check_support(h: &SupportZ) -> Result<()> {
    h.check_admissible()?;
    if h.max() > MAX_DEGREE {
        return Err(Error::SizeCap(format!("max H = {} exceeds {MAX_DEGREE}", h.max())));
    }
    Ok(())
}

/// Row `−2Σ ψ(k)cos(2πkt) ≤ 1`, i.e. `T(t) ≥ 0`.
fn constraint_row(h: &SupportZ, t: f64) -> Vec<f64> {
    h.half().iter().map(|k| -2.0 * (TAU * *k as f64 * t).cos()).collect()
}

fn even_sequence(h: &SupportZ, x: &[f64]) -> SeqZ {
    SeqZ::from_even(std::iter::once((0, 1.0)).chain(h.half().iter().copied().zip(x.iter().copied())))
}

fn solve_max_psi1(lp: &mut LinearProgram) -> Result<(f64, Vec<f64>)> {
    let mut c = vec![0.0; lp.n_vars()];
    c[0] = 1.0;
    lp.set_objective(&c);
    let sol = solve_lp(lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpStatus(sol.status));
    }
    Ok((sol.value, sol.point))
}

/// `(ψ + δ·δ_0)/(1 + δ)` with `δ = max(0, −min T)`: a feasible point close
/// to an almost feasible one.
fn repair(h: &SupportZ, x: &[f64], min_t: f64) -> (SeqZ, f64) {
    let delta = (-min_t).max(0.0);
    let scaled: Vec<f64> = x.iter().map(|v| v / (1.0 + delta)).collect();
    (even_sequence(h, &scaled), x[0] / (1.0 + delta))
}

/// `CF(H)` by the exchange method.
pub fn cf_z(h: &SupportZ, tol: f64) -> Result<SolveReport> {
    Ok(exchange(h, tol)?.0)
}

/// Exchange iteration; also returns the final state.
pub fn exchange(h: &SupportZ, tol: f64) -> Result<(SolveReport, ExchangeState)> {
    check_support(h)?;
    let start = Instant::now();
    let eps_feas = tol / 10.0;
    let mut state = ExchangeState::new(h.max());
    let mut lp = LinearProgram::new(h.half().len());
    lp.set_all_bounds(VarBound::Free);
    for t in &state.working_points {
        lp.add_row(&constraint_row(h, *t), RowKind::Le, 1.0);
    }
    let mut lp_solves = 0;
    loop {
        state.round += 1;
        let (value, x) = solve_max_psi1(&mut lp)?;
        lp_solves += 1;
        let minima = trig_local_minima(&even_sequence(h, &x));
        let min_t = minima.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        state.violation = min_t;
        let magnitude = 1.0 + 2.0 * x.iter().map(|v| v.abs()).sum::<f64>();
        let stalled = min_t >= -LP_FLOOR * magnitude
            && minima.iter().all(|(t, v)| *v >= -eps_feas || state.is_working_point(*t));
        if min_t >= -eps_feas || stalled {
            let (psi, lower) = repair(h, &x, min_t);
            let certificate = is_pd_z(&psi, tol);
            let meta = SolveMeta { iterations: state.round, lp_solves, wall_time: start.elapsed().as_secs_f64() };
            let report = SolveReport {
                value,
                enclosure: [lower.min(value), value.max(lower)],
                extremal: Sequence::Z(psi),
                certificate,
                meta,
            };
            return Ok((report, state));
        }
        if state.round >= MAX_ROUNDS {
            return Err(Error::ExchangeDidNotConverge { rounds: state.round, violation: min_t });
        }
        let mut added = 0;
        for (t, v) in minima {
            if v < -eps_feas && state.insert(t) {
                lp.add_row(&constraint_row(h, t), RowKind::Le, 1.0);
                added += 1;
            }
        }
        if added == 0 {
            return Err(Error::ExchangeDidNotConverge { rounds: state.round, violation: min_t });
        }
    }
}

/// `K_m(H)` for `H ⊂ ℤ` embedded in `ℤ_m` (`m > 2·max H`): the grid problem
/// `T(ν/m) ≥ 0`, `ν = 0..=m/2`.
///
/// Rows are generated lazily, but the returned optimum is feasible for every
/// grid row. `seed` supplies initial grid indices; the final active set is
/// returned for reuse.
pub fn k_grid(h: &SupportZ, m: u64, seed: &[u64]) -> Result<(f64, Vec<f64>, Vec<u64>)> {
    check_support(h)?;
    if m <= 2 * h.max() {
        return Err(Error::InvalidInput(format!("m = {m} does not embed H with max {}", h.max())));
    }
    let half = m / 2;
    let cos_table: Vec<f64> = (0..m).map(|j| (TAU * j as f64 / m as f64).cos()).collect();
    let row = |nu: u64| -> Vec<f64> { h.half().iter().map(|k| -2.0 * cos_table[((k * nu) % m) as usize]).collect() };
    let t_at = |x: &[f64], nu: u64| -> f64 {
        1.0 + 2.0 * h.half().iter().zip(x).map(|(k, v)| v * cos_table[((k * nu) % m) as usize]).sum::<f64>()
    };

    let base = 4 * (2 * h.max() + 1);
    let stride = (m / base).max(1);
    let mut active: std::collections::BTreeSet<u64> = (0..=half).step_by(stride as usize).collect();
    active.extend(seed.iter().filter(|nu| **nu <= half));
    let mut lp = LinearProgram::new(h.half().len());
    lp.set_all_bounds(VarBound::Free);
    for nu in &active {
        lp.add_row(&row(*nu), RowKind::Le, 1.0);
    }
    loop {
        let (value, x) = solve_max_psi1(&mut lp)?;
        let values: Vec<f64> = (0..=half).map(|nu| t_at(&x, nu)).collect();
        let scale = 1.0 + x.iter().map(|v| v.abs()).sum::<f64>();
        let threshold = -1e-12 * scale;
        let mut added = 0;
        for nu in 0..=half {
            let v = values[nu as usize];
            if v >= threshold || active.contains(&nu) {
                continue;
            }
            let left = if nu == 0 { values[1] } else { values[nu as usize - 1] };
            let right = if nu == half { values[nu as usize - 1] } else { values[nu as usize + 1] };
            if v <= left && v <= right {
                active.insert(nu);
                lp.add_row(&row(nu), RowKind::Le, 1.0);
                added += 1;
            }
        }
        if added == 0 {
            // Every violated point sits next to an active one: add them all.
            for nu in 0..=half {
                if values[nu as usize] < threshold && active.insert(nu) {
                    lp.add_row(&row(nu), RowKind::Le, 1.0);
                    added += 1;
                }
            }
        }
        if added == 0 {
            return Ok((value, x, active.into_iter().collect()));
        }
    }
}

/// Report of [`cf_z_checked`].
#[derive(Debug, Clone, Serialize)]
pub struct CheckedReport {
    #[serde(flatten)]
    pub report: SolveReport,
    /// `(m, K_m(H))` for the doubling sequence.
    pub grid_sequence: Vec<(u64, f64)>,
    /// `(4K_{2m} − K_m)/3` on the last two grid values; informational only.
    pub richardson: Option<f64>,
    /// Whether successive grid values came within `tol` before the cap.
    pub grid_converged: bool,
    /// `|K_{m_final} − CF(H)|`.
    pub grid_gap: f64,
}

/// Smallest power of two exceeding `8·max H`.
pub fn grid_start(h: &SupportZ) -> u64 {
    (8 * h.max() + 1).next_power_of_two()
}

/// `K_{m_j}(H)` for `m_j = m_0·2^j` until successive values differ by at most
/// `tol` or `m` would exceed `max_m`.
pub fn grid_sequence(h: &SupportZ, tol: f64, max_m: u64) -> Result<(Vec<(u64, f64)>, bool)> {
    let mut m = grid_start(h);
    let mut seq: Vec<(u64, f64)> = Vec::new();
    let mut seed: Vec<u64> = Vec::new();
    while m <= max_m {
        let (value, _, active) = k_grid(h, m, &seed)?;
        seed = active.iter().map(|nu| 2 * nu).collect();
        let done = seq.last().is_some_and(|(_, prev)| (prev - value).abs() <= tol);
        seq.push((m, value));
        if done {
            return Ok((seq, true));
        }
        m *= 2;
    }
    Ok((seq, false))
}

/// `CF(H)` by exchange, cross-checked against the grid doubling sequence.
///
/// Fails with [`Error::SolverDisagreement`] when the converged grid value and
/// the exchange value differ by more than `10·tol`.
pub fn cf_z_checked(h: &SupportZ, tol: f64, max_m: u64) -> Result<CheckedReport> {
    let report = cf_z(h, tol)?;
    let (grid_sequence, grid_converged) = grid_sequence(h, tol, max_m)?;
    let last = grid_sequence.last().map(|p| p.1).unwrap_or(f64::NAN);
    let grid_gap = (last - report.value).abs();
    if grid_converged && grid_gap > 10.0 * tol {
        return Err(Error::SolverDisagreement { exchange: report.value, grid: last, limit: 10.0 * tol });
    }
    let richardson = match grid_sequence.as_slice() {
        [.., (_, a), (_, b)] => Some((4.0 * b - a) / 3.0),
        _ => None,
    };
    Ok(CheckedReport { report, grid_sequence, richardson, grid_converged, grid_gap })
}

/// `M([0, n]) = 2·CF({0, ±1, …, ±n})`.
pub fn m_classic(n: u64, tol: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    Ok(2.0 * cf_z(&SupportZ::interval(n), tol)?.value)
}

/// One row of the classical table.
#[derive(Debug, Clone, Serialize)]
pub struct ClassicRow {
    pub n: u64,
    /// `M([0,n])` by exchange.
    pub exchange: f64,
    /// `2·K_m([−n, n])` on the fine grid.
    pub grid: f64,
    pub grid_m: u64,
    /// `2cos(2π/(n+2))`.
    pub printed_formula: f64,
    /// `2cos(π/(n+2))`.
    pub classical_formula: f64,
    pub delta_printed: f64,
    pub delta_classical: f64,
}

pub fn classic_row(n: u64, grid_m: u64, tol: f64) -> Result<ClassicRow> {
    let exchange = m_classic(n, tol)?;
    let grid = 2.0 * k_grid(&SupportZ::interval(n), grid_m, &[])?.0;
    let printed_formula = 2.0 * (TAU / (n + 2) as f64).cos();
    let classical_formula = 2.0 * (PI / (n + 2) as f64).cos();
    Ok(ClassicRow {
        n,
        exchange,
        grid,
        grid_m,
        printed_formula,
        classical_formula,
        delta_printed: exchange - printed_formula,
        delta_classical: exchange - classical_formula,
    })
}

/// `H* = (ℕ ∖ H) ∪ {−1, 0, 1}`, truncated to `[−u, u]`.
pub fn dual_set_z(h: &SupportZ, u: u64) -> Result<SupportZ> {
    h.check_admissible()?;
    SupportZ::new((1..=u).filter(|k| *k == 1 || !h.contains(*k as i64)))
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityStep {
    pub universe: u64,
    pub m: f64,
    pub m_dual: f64,
    pub product: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityTrend {
    pub support: SupportZ,
    pub steps: Vec<DualityStep>,
    pub target: f64,
    /// `|product − 2|` at the largest universe.
    pub deviation: f64,
    /// Product change between the last two universes.
    pub drift: f64,
    pub converged: bool,
}

/// `M(H)·M(H*)` for truncations of `H` and `H*` to growing universes.
pub fn verify_duality_z(h: &SupportZ, universes: &[u64], tol: f64) -> Result<DualityTrend> {
    h.check_admissible()?;
    if universes.is_empty() {
        return Err(Error::InvalidInput("need at least one universe bound".into()));
    }
    let mut steps = Vec::new();
    for &u in universes {
        let trunc = SupportZ::new(h.half().iter().copied().filter(|k| *k <= u))?;
        let m = 2.0 * cf_z(&trunc, tol)?.value;
        let m_dual = 2.0 * cf_z(&dual_set_z(h, u)?, tol)?.value;
        steps.push(DualityStep { universe: u, m, m_dual, product: m * m_dual });
    }
    let last = steps.last().expect("nonempty").product;
    let drift = match steps.as_slice() {
        [.., a, b] => (b.product - a.product).abs(),
        _ => 0.0,
    };
    Ok(DualityTrend {
        support: h.clone(),
        steps,
        target: 2.0,
        deviation: (last - 2.0).abs(),
        drift,
        converged: drift <= tol,
    })
}

/// Candidate count above which [`lambda_search`] refuses to enumerate.
pub const LAMBDA_BUDGET: u128 = 100_000;

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `H⁺ ⊆ [1, u]` with `1 ∈ H⁺` and `|H⁺| = n`.
pub fn lambda_candidates(n: u64, u: u64) -> Result<Vec<SupportZ>> {
    if n == 0 || u == 0 || n > u {
        return Err(Error::InvalidInput(format!("need 1 ≤ n ≤ U, got n = {n}, U = {u}")));
    }
    let count = binomial(u - 1, n - 1);
    if count > LAMBDA_BUDGET {
        return Err(Error::BudgetExceeded { candidates: count, limit: LAMBDA_BUDGET });
    }
    (2..=u)
        .combinations((n - 1) as usize)
        .map(|rest| SupportZ::new(std::iter::once(1).chain(rest)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaReport {
    pub n: u64,
    pub universe: u64,
    pub best_support: SupportZ,
    /// `M(H)/2` for the best candidate: a lower bound for `Λ(n)`.
    pub best_value: f64,
    pub candidates: usize,
    /// Largest value over all candidates minus `1 − 1/(2(n+1)²)`.
    pub upper_bound_margin: f64,
    pub values: Vec<(SupportZ, f64)>,
}

/// Picks the best of evaluated candidates; ties go to the earlier one.
pub fn lambda_summary(n: u64, u: u64, values: Vec<(SupportZ, f64)>) -> Result<LambdaReport> {
    let (best_support, best_value) = values
        .iter()
        .fold(None::<&(SupportZ, f64)>, |best, c| match best {
            Some(b) if b.1 >= c.1 => Some(b),
            _ => Some(c),
        })
        .cloned()
        .ok_or_else(|| Error::InvalidInput("no candidates".into()))?;
    let bound = 1.0 - 0.5 / ((n + 1) * (n + 1)) as f64;
    Ok(LambdaReport {
        n,
        universe: u,
        best_support,
        best_value,
        candidates: values.len(),
        upper_bound_margin: best_value - bound,
        values,
    })
}

/// Exhaustive search for `Λ(n) ≥ max M(H)/2` over `H⁺ ⊆ [1, u]`.
pub fn lambda_search(n: u64, u: u64, tol: f64) -> Result<LambdaReport> {
    let values = lambda_candidates(n, u)?
        .into_iter()
        .map(|h| cf_z(&h, tol).map(|r| (h, r.value)))
        .collect::<Result<Vec<_>>>()?;
    lambda_summary(n, u, values)
}

/// `1/(2cos(2π/(N+2)))`, the closed form stated for the sparse family.
pub fn sparse_family_formula(n: u64) -> f64 {
    1.0 / (2.0 * (TAU / (n + 2) as f64).cos())
}

/// `1/(2cos(π/(N+1)))`, the bound from `H* ⊇ [0, N−1]`.
pub fn sparse_family_bound(n: u64) -> f64 {
    1.0 / (2.0 * (PI / (n + 1) as f64).cos())
}

#[derive(Debug, Clone, Serialize)]
pub struct SparseReport {
    pub n: u64,
    pub truncation: u64,
    pub value: f64,
    /// `(M, CF)` for increasing truncations.
    pub trend: Vec<(u64, f64)>,
    pub formula: f64,
    pub dual_bound: f64,
}

/// `{0, ±1} ∪ {±N, …, ±M}`.
pub fn sparse_support(n: u64, m: u64) -> Result<SupportZ> {
    SupportZ::new(std::iter::once(1).chain(n..=m))
}

/// `CF` of the truncated sparse family, with the value at a few smaller
/// truncations to show the trend in `M`.
pub fn sparse_family_cf(n: u64, m: u64, tol: f64) -> Result<SparseReport> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("the sparse family needs N ≥ 4, got {n}")));
    }
    if m < 2 * n {
        return Err(Error::InvalidInput(format!("truncation M = {m} is below 2N = {}", 2 * n)));
    }
    let mut cuts: Vec<u64> = vec![2 * n, (2 * n + m) / 2, m];
    cuts.dedup();
    let trend = cuts
        .iter()
        .map(|cut| cf_z(&sparse_support(n, *cut)?, tol).map(|r| (*cut, r.value)))
        .collect::<Result<Vec<_>>>()?;
    let value = trend.last().expect("nonempty").1;
    Ok(SparseReport {
        n,
        truncation: m,
        value,
        trend,
        formula: sparse_family_formula(n),
        dual_bound: sparse_family_bound(n),
    })
}

/// `T(t)` for an even real `ψ`.
pub fn cosine_eval(psi: &SeqZ, t: f64) -> f64 {
    psi.entries().map(|(k, v)| (v * Complex64::from_polar(1.0, TAU * k as f64 * t)).re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::PD_TOL;

    #[test]
    fn three_point() {
        let r = cf_z(&SupportZ::interval(1), 1e-10).unwrap();
        assert!((r.value - 0.5).abs() < 1e-10);
        assert!(r.certificate.is_pd);
    }

    #[test]
    fn five_point() {
        let r = cf_z(&SupportZ::interval(2), 1e-10).unwrap();
        assert!((r.value - (PI / 4.0).cos()).abs() < 1e-9, "{}", r.value);
        assert!(r.enclosure[1] - r.enclosure[0] <= 1e-10);
    }

    #[test]
    fn classic_values() {
        assert!((m_classic(1, 1e-10).unwrap() - 1.0).abs() < 1e-9);
        assert!((m_classic(2, 1e-10).unwrap() - 2f64.sqrt()).abs() < 1e-8);
        assert!((m_classic(4, 1e-10).unwrap() - 3f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn grid_values_decrease() {
        let h = SupportZ::new([1, 3]).unwrap();
        let (seq, _) = grid_sequence(&h, 1e-9, 1 << 14).unwrap();
        let exact = cf_z(&h, 1e-10).unwrap().value;
        for w in seq.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-9);
        }
        for (_, v) in &seq {
            assert!(*v >= exact - 1e-8);
        }
    }

    #[test]
    fn k_grid_matches_fourier_formulation() {
        use crate::seq::SupportZm;
        use crate::solver_zm::k_m;
        for half in [vec![1u64, 2], vec![1, 4], vec![1, 2, 5]] {
            let h = SupportZ::new(half.clone()).unwrap();
            let m = 16;
            let grid = k_grid(&h, m, &[]).unwrap().0;
            let fourier = k_m(&SupportZm::from_half(m, half).unwrap(), PD_TOL).unwrap().value;
            assert!((grid - fourier).abs() < 1e-10, "{grid} vs {fourier}");
        }
    }

    #[test]
    fn dual_sets() {
        let h = SupportZ::new([1, 2]).unwrap();
        assert_eq!(dual_set_z(&h, 6).unwrap(), SupportZ::new([1, 3, 4, 5, 6]).unwrap());
        assert_eq!(dual_set_z(&SupportZ::interval(1), 3).unwrap(), SupportZ::interval(3));
    }

    #[test]
    fn lambda_small() {
        let r = lambda_search(1, 5, 1e-10).unwrap();
        assert_eq!(r.best_support, SupportZ::interval(1));
        assert!((r.best_value - 0.5).abs() < 1e-10);
        assert!(matches!(lambda_candidates(6, 40), Err(Error::BudgetExceeded { .. })));
        assert_eq!(lambda_candidates(3, 12).unwrap().len(), 55);
    }

    #[test]
    fn sparse_needs_large_n() {
        assert!(sparse_family_cf(3, 30, 1e-8).is_err());
        assert!(sparse_family_cf(6, 10, 1e-8).is_err());
    }

    #[test]
    fn inadmissible() {
        assert!(matches!(cf_z(&SupportZ::new([2, 3]).unwrap(), 1e-8), Err(Error::Inadmissible(_))));
    }
}
