//! The discretized constants `K_m(H)` and `CF_m(H)` on `ℤ_m`.
//!
//! Positive definiteness on `ℤ_m` is nonnegativity of the transform, so both
//! problems are linear programs in the variables `ψ̂(ν) ≥ 0`: the normalization
//! `ψ(0) = Σ ψ̂ = 1` and the support conditions `ψ(k) = 0` for `k ∉ H` are
//! equality rows. The real problem uses even spectra and two objectives
//! `±ψ(1)`; the complex one maximizes `|ψ(1)|` with a direction sweep.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lca::{FiniteGroup, GroupFunction};
use crate::lp::{max_modulus, solve_lp, LinearProgram, LpStatus, RowKind, VarBound};
use crate::seq::{dft_zm, idft_zm, is_pd_zm, PdCertificate, SeqZm, Sequence, SupportZm};

/// Real-valued (`K`) or complex-valued (`CF`) version of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Real,
    Complex,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveMeta {
    /// LP solves, or exchange rounds for the solver on `ℤ`.
    pub iterations: usize,
    pub lp_solves: usize,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Outcome of an extremal solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub value: f64,
    pub enclosure: [f64; 2],
    pub extremal: Sequence,
    pub certificate: PdCertificate,
    pub meta: SolveMeta,
}

fn cos_sin(k: u64, nu: u64, m: u64) -> (f64, f64) {
    let phase = TAU * ((k * nu) % m) as f64 / m as f64;
    (phase.cos(), phase.sin())
}

/// Residues `k ∈ 1..=m/2` outside `H`, one per `±` pair.
fn excluded_half(h: &SupportZm) -> Vec<u64> {
    let m = h.modulus();
    (1..=m / 2).filter(|k| !h.contains(*k as i64)).collect()
}

fn trivial_report(m: u64, tol: f64) -> SolveReport {
    let psi = SeqZm::ones(m);
    SolveReport {
        value: 1.0,
        enclosure: [1.0, 1.0],
        certificate: is_pd_zm(&psi, tol),
        extremal: Sequence::Zm(psi),
        meta: SolveMeta::default(),
    }
}

/// Turns an LP spectrum into a certified extremal sequence: exact zeros off
/// `H`, `ψ(0) = 1`, and the mixing repair `(ψ + δ·δ_0)/(1 + δ)` whenever the
/// recomputed transform dips below zero.
fn finish(h: &SupportZm, spectrum: &[f64], value: f64, mode: Mode, tol: f64, meta: SolveMeta) -> Result<SolveReport> {
    let m = h.modulus();
    let hat = SeqZm::new(spectrum.iter().map(|v| Complex64::new(*v, 0.0)).collect())?;
    let mut psi = idft_zm(&hat);
    let scale = psi.get(0).re;
    if !(scale > 0.0) {
        return Err(Error::InvalidInput("extremal spectrum has no mass".into()));
    }
    for (k, v) in psi.values_mut().iter_mut().enumerate() {
        if !h.contains(k as i64) {
            *v = Complex64::default();
        } else {
            *v /= scale;
            if mode == Mode::Real {
                v.im = 0.0;
            }
        }
    }
    psi.values_mut()[0] = Complex64::new(1.0, 0.0);
    let min_hat = dft_zm(&psi).values().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let delta = m as f64 * (-min_hat).max(0.0);
    if delta > 0.0 {
        for v in psi.values_mut().iter_mut().skip(1) {
            *v /= 1.0 + delta;
        }
    }
    let lower = psi.get(1).norm();
    Ok(SolveReport {
        value,
        enclosure: [lower.min(value), value.max(lower)],
        certificate: is_pd_zm(&psi, tol),
        extremal: Sequence::Zm(psi),
        meta,
    })
}

/// `K_m(H)`: the largest `|ψ(1)|` over real positive definite `ψ` on `ℤ_m`
/// with `ψ(0) = 1` and `supp ψ ⊆ H`.
pub fn k_m(h: &SupportZm, tol: f64) -> Result<SolveReport> {
    h.check_admissible()?;
    let m = h.modulus();
    if m <= 3 {
        return Ok(trivial_report(m, tol));
    }
    let start = Instant::now();
    // Even spectra: x_ν = ψ̂(ν) = ψ̂(m−ν) for ν = 0..=m/2, weighted by the
    // number of frequencies it stands for.
    let reps: Vec<u64> = (0..=m / 2).collect();
    let weight = |nu: u64| if nu == 0 || 2 * nu == m { 1.0 } else { 2.0 };
    let mut lp = LinearProgram::new(reps.len());
    lp.add_row(&reps.iter().map(|nu| weight(*nu)).collect::<Vec<_>>(), RowKind::Eq, 1.0);
    for k in excluded_half(h) {
        let row: Vec<f64> = reps.iter().map(|nu| weight(*nu) * cos_sin(k, *nu, m).0).collect();
        lp.add_row(&row, RowKind::Eq, 0.0);
    }
    let psi1: Vec<f64> = reps.iter().map(|nu| weight(*nu) * cos_sin(1, *nu, m).0).collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for sign in [1.0, -1.0] {
        lp.set_objective(&psi1.iter().map(|c| sign * c).collect::<Vec<_>>());
        let sol = solve_lp(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::LpStatus(sol.status));
        }
        if best.as_ref().is_none_or(|(v, _)| sol.value > *v) {
            best = Some((sol.value, sol.point));
        }
    }
    let (value, x) = best.expect("two solves");
    let spectrum: Vec<f64> = (0..m).map(|nu| x[nu.min(m - nu) as usize]).collect();
    let meta = SolveMeta { iterations: 2, lp_solves: 2, wall_time: start.elapsed().as_secs_f64() };
    finish(h, &spectrum, value, Mode::Real, tol, meta)
}

/// `CF_m(H)`: the largest `|ψ(1)|` over complex positive definite `ψ` on
/// `ℤ_m` with `ψ(0) = 1` and `supp ψ ⊆ H`.
pub fn cf_m(h: &SupportZm, tol: f64) -> Result<SolveReport> {
    h.check_admissible()?;
    let m = h.modulus();
    if m <= 3 {
        return Ok(trivial_report(m, tol));
    }
    let start = Instant::now();
    let mut lp = LinearProgram::new(m as usize);
    lp.add_row(&vec![1.0; m as usize], RowKind::Eq, 1.0);
    for k in excluded_half(h) {
        let (re, im): (Vec<f64>, Vec<f64>) = (0..m).map(|nu| cos_sin(k, nu, m)).unzip();
        lp.add_row(&re, RowKind::Eq, 0.0);
        if 2 * k != m {
            lp.add_row(&im, RowKind::Eq, 0.0);
        }
    }
    let functional: Vec<Complex64> = (0..m).map(|nu| Complex64::from_polar(1.0, TAU * nu as f64 / m as f64)).collect();
    let opt = max_modulus(&lp, &functional, TAU / m as f64)?;
    let meta = SolveMeta { iterations: opt.lp_solves, lp_solves: opt.lp_solves, wall_time: start.elapsed().as_secs_f64() };
    finish(h, &opt.point, opt.value, Mode::Complex, tol, meta)
}

/// Dispatches to [`k_m`] or [`cf_m`].
pub fn solve_zm(h: &SupportZm, mode: Mode, tol: f64) -> Result<SolveReport> {
    match mode {
        Mode::Real => k_m(h, tol),
        Mode::Complex => cf_m(h, tol),
    }
}

/// `H* = (ℤ_m ∖ H) ∪ {−1, 0, 1}`.
pub fn dual_set_zm(h: &SupportZm) -> Result<SupportZm> {
    h.check_admissible()?;
    let m = h.modulus() as i64;
    let rest = (0..m).filter(|k| !h.contains(*k));
    SupportZm::new(h.modulus(), rest.chain([-1, 0, 1]))
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub support: SupportZm,
    pub dual: SupportZm,
    pub k: f64,
    pub k_dual: f64,
    pub product: f64,
    pub target: f64,
    pub deviation: f64,
    pub passed: bool,
}

/// Checks `K_m(H)·K_m(H*) = ½`.
pub fn verify_duality_zm(h: &SupportZm, tol: f64) -> Result<DualityReport> {
    let dual = dual_set_zm(h)?;
    let k = k_m(h, tol)?.value;
    let k_dual = k_m(&dual, tol)?.value;
    let product = k * k_dual;
    let deviation = (product - 0.5).abs();
    Ok(DualityReport {
        support: h.clone(),
        dual,
        k,
        k_dual,
        product,
        target: 0.5,
        deviation,
        passed: deviation <= tol,
    })
}

/// Largest group handled by [`brute_group_oracle`].
pub const ORACLE_MAX_ORDER: u64 = 4096;

/// Solves the extremal problem directly on a finite group, without the
/// reduction to `ℤ_m`.
///
/// Works in the coefficient domain: one variable per `±` pair of `Ω` (real
/// and imaginary parts in complex mode) and one row `f̂(γ) ≥ 0` per
/// character. Returns the report, whose extremal is the restriction
/// `k ↦ f(kz)`, together with the witness `f` on the whole group.
pub fn brute_group_oracle(
    group: &FiniteGroup,
    omega: &[Vec<u64>],
    z: &[u64],
    mode: Mode,
    tol: f64,
) -> Result<(SolveReport, GroupFunction)> {
    let size = group.order();
    if size > ORACLE_MAX_ORDER {
        return Err(Error::SizeCap(format!("group of order {size} exceeds the oracle cap {ORACLE_MAX_ORDER}")));
    }
    let start = Instant::now();
    let z = group.normalize(z)?;
    let mut members = vec![false; size as usize];
    for x in omega {
        members[group.index(&group.normalize(x)?)] = true;
    }
    for i in 0..size as usize {
        if members[i] && !members[group.index(&group.neg(&group.element(i)))] {
            return Err(Error::Inadmissible("Ω is not symmetric".into()));
        }
    }
    let zi = group.index(&z);
    if !members[0] || !members[zi] {
        return Err(Error::Inadmissible("Ω must contain 0 and z".into()));
    }
    if zi == 0 {
        return Err(Error::InvalidInput("z must be nonzero".into()));
    }

    // Pair representatives x_p of Ω∖{0} under x ↦ −x.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 1..size as usize {
        let j = group.index(&group.neg(&group.element(i)));
        if members[i] && i <= j {
            pairs.push((i, j));
        }
    }
    // Variable layout: (pair, is_imaginary).
    let mut vars: Vec<(usize, bool)> = Vec::new();
    for (p, (i, j)) in pairs.iter().enumerate() {
        vars.push((p, false));
        if mode == Mode::Complex && i != j {
            vars.push((p, true));
        }
    }
    let mut lp = LinearProgram::new(vars.len());
    lp.set_all_bounds(VarBound::Free);
    let phase = |gamma: usize, x: usize| -> (f64, f64) {
        let a = TAU * group.pairing(&group.element(gamma), &group.element(x));
        (a.cos(), a.sin())
    };
    let characters: Vec<usize> = match mode {
        // Conjugate characters give identical rows for real even f.
        Mode::Real => (0..size as usize).filter(|g| *g <= group.index(&group.neg(&group.element(*g)))).collect(),
        Mode::Complex => (0..size as usize).collect(),
    };
    for gamma in characters {
        // f̂(γ)·|G| = 1 + Σ_p (f(x_p) γ̄(x_p) + f(−x_p) γ̄(−x_p)).
        let row: Vec<f64> = vars
            .iter()
            .map(|(p, imag)| {
                let (i, j) = pairs[*p];
                let (c, s) = phase(gamma, i);
                let mult = if i == j { 1.0 } else { 2.0 };
                if *imag {
                    -mult * s
                } else {
                    -mult * c
                }
            })
            .collect();
        lp.add_row(&row, RowKind::Le, 1.0);
    }

    let z_pair = pairs.iter().position(|(i, j)| *i == zi || *j == zi).expect("z ∈ Ω");
    let conj_z = pairs[z_pair].0 != zi;
    let mut functional = vec![Complex64::default(); vars.len()];
    for (v, (p, imag)) in vars.iter().enumerate() {
        if *p == z_pair {
            functional[v] = match (imag, conj_z) {
                (false, _) => Complex64::new(1.0, 0.0),
                (true, false) => Complex64::new(0.0, 1.0),
                (true, true) => Complex64::new(0.0, -1.0),
            };
        }
    }

    let (value, point, lp_solves) = match mode {
        Mode::Real => {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for sign in [1.0, -1.0] {
                lp.set_objective(&functional.iter().map(|c| sign * c.re).collect::<Vec<_>>());
                let sol = solve_lp(&lp)?;
                if sol.status != LpStatus::Optimal {
                    return Err(Error::LpStatus(sol.status));
                }
                if best.as_ref().is_none_or(|(v, _)| sol.value > *v) {
                    best = Some((sol.value, sol.point));
                }
            }
            let (v, x) = best.expect("two solves");
            (v, x, 2)
        }
        Mode::Complex => {
            let o = group.element_order(&z);
            let opt = max_modulus(&lp, &functional, TAU / o as f64)?;
            (opt.value, opt.point, opt.lp_solves)
        }
    };

    let mut values = vec![Complex64::default(); size as usize];
    values[0] = Complex64::new(1.0, 0.0);
    for (v, (p, imag)) in vars.iter().enumerate() {
        let (i, j) = pairs[*p];
        if *imag {
            values[i].im = point[v];
            values[j].im = -point[v];
        } else {
            values[i].re = point[v];
            values[j].re = point[v];
        }
    }
    let mut f = GroupFunction::new(group.clone(), values)?;
    let min_hat = f.transform().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let delta = size as f64 * (-min_hat).max(0.0);
    if delta > 0.0 {
        f.mix_with_delta(delta);
    }
    let certificate = f.pd_certificate(tol);
    let restricted = f.restrict_unchecked(&z);
    let lower = restricted.get(1).norm();
    let meta = SolveMeta { iterations: lp_solves, lp_solves, wall_time: start.elapsed().as_secs_f64() };
    let report = SolveReport {
        value,
        enclosure: [lower.min(value), value.max(lower)],
        extremal: Sequence::Zm(restricted),
        certificate,
        meta,
    };
    Ok((report, f))
}

/// `1/(2cos(π/m))`, the value of `CF_m({−1, 0, 1})`.
pub fn cf_three_point(m: u64) -> f64 {
    1.0 / (2.0 * (PI / m as f64).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::PD_TOL;

    fn three(m: u64) -> SupportZm {
        SupportZm::new(m, [-1, 0, 1]).unwrap()
    }

    #[test]
    fn k_m_three_point_even() {
        for m in [4, 6, 8, 10, 32] {
            let r = k_m(&three(m), PD_TOL).unwrap();
            assert!((r.value - 0.5).abs() < 1e-10, "m = {m}: {}", r.value);
        }
    }

    #[test]
    fn k_m_three_point_odd() {
        // For odd m the optimum is the complex value, attained by a real
        // sequence: (1, a, 0, …, 0, a) with a = 1/(2cos(π/m)).
        for m in [5, 7, 9] {
            let r = k_m(&three(m), PD_TOL).unwrap();
            assert!((r.value - cf_three_point(m)).abs() < 1e-10, "m = {m}: {}", r.value);
        }
    }

    #[test]
    fn full_support_gives_one() {
        for m in [3, 4, 7, 12] {
            let h = SupportZm::full(m);
            assert!((k_m(&h, PD_TOL).unwrap().value - 1.0).abs() < 1e-12);
            assert!((cf_m(&h, PD_TOL).unwrap().value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cf_m_three_point() {
        for m in [4, 5, 6, 9, 16] {
            let r = cf_m(&three(m), PD_TOL).unwrap();
            assert!((r.value - cf_three_point(m)).abs() < 1e-10, "m = {m}: {}", r.value);
            assert!(r.certificate.is_pd);
            assert!(r.enclosure[0] <= r.value && r.value <= r.enclosure[1]);
        }
    }

    #[test]
    fn degenerate_moduli() {
        for m in [2, 3] {
            let h = SupportZm::full(m);
            assert_eq!(k_m(&h, PD_TOL).unwrap().value, 1.0);
            assert_eq!(cf_m(&h, PD_TOL).unwrap().value, 1.0);
        }
    }

    #[test]
    fn inadmissible_supports() {
        assert!(matches!(k_m(&SupportZm::new(6, [0, 2, -2]).unwrap(), PD_TOL), Err(Error::Inadmissible(_))));
        assert!(matches!(cf_m(&SupportZm::new(1, [0]).unwrap(), PD_TOL), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn extremal_shape() {
        let h = SupportZm::new(10, [0, 1, -1, 3, -3]).unwrap();
        for r in [k_m(&h, PD_TOL).unwrap(), cf_m(&h, PD_TOL).unwrap()] {
            let Sequence::Zm(psi) = &r.extremal else { panic!() };
            assert_eq!(psi.get(0), Complex64::new(1.0, 0.0));
            for k in 0..10 {
                if !h.contains(k) {
                    assert_eq!(psi.get(k), Complex64::default());
                }
            }
            assert!(is_pd_zm(psi, PD_TOL).is_pd);
            assert!((psi.get(1).norm() - r.value).abs() < 1e-9);
        }
    }

    #[test]
    fn dual_sets() {
        assert_eq!(dual_set_zm(&SupportZm::full(8)).unwrap(), three(8));
        assert_eq!(dual_set_zm(&three(8)).unwrap(), SupportZm::full(8));
        let h = SupportZm::new(8, [0, 1, -1, 2, -2]).unwrap();
        assert_eq!(dual_set_zm(&h).unwrap(), SupportZm::new(8, [0, 1, -1, 3, -3, 4]).unwrap());
    }

    #[test]
    fn duality_examples() {
        for h in [SupportZm::full(8), SupportZm::new(12, [0, 1, -1, 2, -2]).unwrap(), three(6)] {
            let r = verify_duality_zm(&h, 1e-9).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn oracle_examples() {
        let g = FiniteGroup::new(vec![4]).unwrap();
        let omega = vec![vec![0], vec![1], vec![3]];
        let (r, _) = brute_group_oracle(&g, &omega, &[1], Mode::Complex, PD_TOL).unwrap();
        assert!((r.value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);

        let g = FiniteGroup::new(vec![2]).unwrap();
        for mode in [Mode::Real, Mode::Complex] {
            let (r, _) = brute_group_oracle(&g, &[vec![0], vec![1]], &[1], mode, PD_TOL).unwrap();
            assert!((r.value - 1.0).abs() < 1e-12);
        }

        let g = FiniteGroup::new(vec![4, 2]).unwrap();
        let omega: Vec<Vec<u64>> = [0, 1, 3].iter().flat_map(|k| [vec![*k, 0], vec![*k, 1]]).collect();
        let (r, f) = brute_group_oracle(&g, &omega, &[1, 0], Mode::Complex, PD_TOL).unwrap();
        assert!((r.value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        assert!(f.pd_certificate(PD_TOL).is_pd);
    }

    #[test]
    fn oracle_matches_cyclic_solvers() {
        for (m, half) in [(7u64, vec![1u64, 3]), (8, vec![1, 2]), (9, vec![1, 4]), (12, vec![1, 5, 6])] {
            let h = SupportZm::from_half(m, half).unwrap();
            let g = FiniteGroup::new(vec![m]).unwrap();
            let omega: Vec<Vec<u64>> = h.residues().iter().map(|r| vec![*r]).collect();
            for mode in [Mode::Real, Mode::Complex] {
                let direct = solve_zm(&h, mode, PD_TOL).unwrap().value;
                let (oracle, _) = brute_group_oracle(&g, &omega, &[1], mode, PD_TOL).unwrap();
                assert!((direct - oracle.value).abs() < 1e-9, "m = {m} {mode:?}: {direct} vs {}", oracle.value);
            }
        }
    }

    #[test]
    fn oracle_rejects_bad_input() {
        let g = FiniteGroup::new(vec![5]).unwrap();
        assert!(matches!(
            brute_group_oracle(&g, &[vec![0], vec![1]], &[1], Mode::Real, PD_TOL),
            Err(Error::Inadmissible(_))
        ));
        let g = FiniteGroup::new(vec![64, 65]).unwrap();
        assert!(matches!(brute_group_oracle(&g, &[vec![0, 0]], &[1, 0], Mode::Real, PD_TOL), Err(Error::SizeCap(_))));
    }
}
