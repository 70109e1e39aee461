//! Fejér–Riesz factorization: `θ` with `θ ⋆ θ̃ = ψ` for positive definite `ψ`.
//!
//! On `ℤ` the factor comes from the roots of `q(w) = Σ ψ(k) w^{k+N}`, which
//! occur in pairs `(ρ, 1/ρ̄)`; keeping the root of each pair inside the closed
//! unit disc gives a polynomial `P` of degree `N` with `ψ̌ = |P|²` on the
//! circle. The factor is the reversed conjugate coefficient vector of `P`,
//! which has `θ(0) > 0`. On `ℤ_m` the factor is a spectral square root.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{
    convolve_z, convolve_zm, dft_zm, idft_zm, is_pd_z, is_pd_zm, reverse_conjugate_z, reverse_conjugate_zm,
    SeqZ, SeqZm, Sequence,
};

const MAX_ABERTH_ITERATIONS: usize = 1000;

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::default();
    let mut dp = Complex64::default();
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn magnitude_scale(coeffs: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

/// All complex roots, with multiplicity, of `Σ coeffs[j] w^j` (ascending order).
///
/// Aberth–Ehrlich simultaneous iteration started from a circle of radius
/// `|a_0/a_n|^{1/n}`. Each returned root satisfies `|p(ρ)| ≤ tol · Σ|a_j||ρ|^j`.
pub fn poly_roots(coeffs: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1] == Complex64::default() {
        hi -= 1;
    }
    if hi == 0 {
        return Err(Error::InvalidInput("zero polynomial has no well-defined roots".into()));
    }
    let zeros = coeffs[..hi].iter().take_while(|c| **c == Complex64::default()).count();
    let poly = &coeffs[zeros..hi];
    let n = poly.len() - 1;
    let mut roots = vec![Complex64::default(); zeros];
    if n == 0 {
        return Ok(roots);
    }
    if n == 1 {
        roots.push(-poly[0] / poly[1]);
        return Ok(roots);
    }

    let radius = (poly[0].norm() / poly[n].norm()).powf(1.0 / n as f64);
    let mut z: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(radius, TAU * j as f64 / n as f64 + 0.4 + 0.01 * (j % 7) as f64))
        .collect();
    let mut done = vec![false; n];
    let eps = f64::EPSILON;
    let mut iterations = 0;
    while iterations < MAX_ABERTH_ITERATIONS && done.iter().any(|d| !d) {
        iterations += 1;
        for j in 0..n {
            if done[j] {
                continue;
            }
            let (p, dp) = horner(poly, z[j]);
            if p.norm() <= 8.0 * eps * magnitude_scale(poly, z[j]) {
                done[j] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n).filter(|k| *k != j).map(|k| 1.0 / (z[j] - z[k])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                continue;
            }
            z[j] -= step;
            if step.norm() <= eps * z[j].norm() {
                done[j] = true;
            }
        }
    }
    let residual = z
        .iter()
        .map(|r| horner(poly, *r).0.norm() / magnitude_scale(poly, *r).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    if residual > tol || z.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::RootsDidNotConverge { iterations, residual });
    }
    roots.extend(z);
    Ok(roots)
}

/// Ascending coefficients of `Π (w − ρ)`.
fn expand_monic(roots: &[Complex64]) -> Vec<Complex64> {
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::default(); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        p = next;
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorMethod {
    Roots,
    Spectral,
}

#[derive(Debug, Clone, Serialize)]
pub struct Factorization {
    pub theta: Sequence,
    /// `max |θ⋆θ̃ − ψ|`.
    pub residual: f64,
    pub method: FactorMethod,
}

/// Circle roots closer than this in angle are treated as one multiple root.
const CLUSTER_GAP: f64 = 1e-3;

/// A root of multiplicity `k` is a simple root of `q^(k−1)`; Newton there
/// recovers it to full precision where the simultaneous iteration only
/// reaches `ε^(1/k)`.
fn refine_multiple_root(q: &[Complex64], start: Complex64, multiplicity: usize) -> Complex64 {
    let mut d = q.to_vec();
    for _ in 1..multiplicity {
        d = d.iter().enumerate().skip(1).map(|(j, c)| c * j as f64).collect();
    }
    let mut z = start;
    for _ in 0..8 {
        let (p, dp) = horner(&d, z);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        if !(step.norm() < 1e-3) {
            return start;
        }
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON {
            break;
        }
    }
    z / z.norm()
}

/// Picks the root of each `(ρ, 1/ρ̄)` pair inside the unit disc; roots on the
/// circle (within `band`) come in coincident pairs and contribute one each.
fn select_inner_roots(q: &[Complex64], roots: &[Complex64], band: f64) -> Result<Vec<Complex64>> {
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    let mut circle = Vec::new();
    for r in roots {
        let d = r.norm() - 1.0;
        if d < -band {
            inside.push(*r);
        } else if d > band {
            outside.push(*r);
        } else {
            circle.push(*r);
        }
    }
    if inside.len() != outside.len() || circle.len() % 2 == 1 {
        return Err(Error::RootPairing(format!(
            "{} inside, {} outside, {} on the circle at band {band:e}",
            inside.len(),
            outside.len(),
            circle.len()
        )));
    }
    let mut used = vec![false; outside.len()];
    for r in &inside {
        let (best, err) = outside
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, o)| (i, (r * o.conj() - 1.0).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("counts match");
        if err > 1e-4 {
            return Err(Error::RootPairing(format!("root {r} has no reflected partner (mismatch {err:e})")));
        }
        used[best] = true;
    }

    let mut chosen = inside;
    if !circle.is_empty() {
        // Cluster neighbours in angle, starting after the widest angular gap
        // so no cluster straddles the cut. The centroid of a cluster is far
        // more accurate than its members.
        let mut angles: Vec<f64> = circle.iter().map(|r| r.arg().rem_euclid(TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let k = angles.len();
        let gap = |i: usize| (angles[(i + 1) % k] - angles[i]).rem_euclid(TAU);
        let start = (0..k).max_by(|&a, &b| gap(a).total_cmp(&gap(b))).map(|i| (i + 1) % k).unwrap_or(0);
        let mut clusters: Vec<Vec<f64>> = Vec::new();
        for i in 0..k {
            let idx = (start + i) % k;
            let unwrapped = angles[start] + (angles[idx] - angles[start]).rem_euclid(TAU);
            match clusters.last_mut() {
                Some(c) if unwrapped - c.last().expect("nonempty") < CLUSTER_GAP => c.push(unwrapped),
                _ => clusters.push(vec![unwrapped]),
            }
        }
        // Clusters of odd size only arise when two double roots sit closer than
        // the cluster gap resolves; fall back to pairing neighbours.
        if clusters.iter().any(|c| c.len() % 2 == 1) {
            clusters = (0..k / 2)
                .map(|p| {
                    let a = angles[(start + 2 * p) % k];
                    vec![a, a + (angles[(start + 2 * p + 1) % k] - a).rem_euclid(TAU)]
                })
                .collect();
        }
        for c in clusters {
            let mid = c.iter().sum::<f64>() / c.len() as f64;
            let root = refine_multiple_root(q, Complex64::from_polar(1.0, mid), c.len());
            chosen.extend(std::iter::repeat_n(root, c.len() / 2));
        }
    }
    Ok(chosen)
}

/// Fejér–Riesz factor on `ℤ`: `θ` supported in `[0, N]` with `θ ⋆ θ̃ = ψ`,
/// normalized so that `θ(0)` is real and positive.
pub fn fejer_riesz_z(psi: &SeqZ, tol: f64) -> Result<Factorization> {
    let cert = is_pd_z(psi, tol);
    if !cert.is_pd {
        return Err(Error::NotPositiveDefinite(cert.min_value));
    }
    let n = psi.radius();
    if n == 0 {
        let theta = SeqZ::from_entries([(0, Complex64::new(psi.get(0).re.max(0.0).sqrt(), 0.0))]);
        let residual = convolve_z(&theta, &reverse_conjugate_z(&theta)).max_diff(psi);
        return Ok(Factorization { theta: Sequence::Z(theta), residual, method: FactorMethod::Roots });
    }
    let q: Vec<Complex64> = (0..=2 * n as i64).map(|j| psi.get(j - n as i64)).collect();
    let roots = poly_roots(&q, 1e-9)?;
    let selections = [
        select_inner_roots(&q, &roots, 1e-6),
        select_inner_roots(&q, &roots, 1e-4),
        select_by_clusters(&q, &roots),
    ];
    let mut failure = None;
    for chosen in selections {
        let chosen = match chosen {
            Ok(c) if c.len() == n as usize => c,
            Ok(c) => {
                failure = Some(Error::RootPairing(format!("selected {} roots for degree {n}", c.len())));
                continue;
            }
            Err(e) => {
                failure = Some(e);
                continue;
            }
        };
        let theta = factor_from_roots(psi, &chosen);
        let residual = convolve_z(&theta, &reverse_conjugate_z(&theta)).max_diff(psi);
        if residual <= tol {
            return Ok(Factorization { theta: Sequence::Z(theta), residual, method: FactorMethod::Roots });
        }
        failure = Some(Error::FactorResidual { residual, tol });
    }
    Err(failure.expect("at least one selection was tried"))
}

/// `θ` with the zeros `1/ρ̄` for the chosen inner roots `ρ`.
fn factor_from_roots(psi: &SeqZ, chosen: &[Complex64]) -> SeqZ {
    let n = chosen.len() as i64;
    let p = expand_monic(chosen);
    let prod: f64 = chosen.iter().map(|r| r.norm()).product();
    let c = (psi.get(n).norm() / prod).sqrt();
    // Reversed coefficients put the zeros outside the disc and make the
    // leading entry θ(0) = c.
    SeqZ::from_entries(p.into_iter().rev().enumerate().map(|(j, v)| (j as i64, v.conj() * c)))
}

/// Roots of high multiplicity scatter by `ε^(1/k)`, possibly across the
/// circle. Groups nearby roots; an even group centred on the circle is one
/// multiple root, every other root is classified by its modulus.
fn select_by_clusters(q: &[Complex64], roots: &[Complex64]) -> Result<Vec<Complex64>> {
    const LINK: f64 = 2e-2;
    let mut label: Vec<usize> = (0..roots.len()).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..roots.len() {
        for j in 0..i {
            if (roots[i] - roots[j]).norm() < LINK {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Complex64>> = Default::default();
    for i in 0..roots.len() {
        let r = find(&mut label, i);
        groups.entry(r).or_default().push(roots[i]);
    }
    let mut chosen = Vec::new();
    for members in groups.into_values() {
        let centroid = members.iter().sum::<Complex64>() / members.len() as f64;
        let on_circle = (members.len() % 2 == 0 && (centroid.norm() - 1.0).abs() < LINK)
            .then(|| refine_multiple_root(q, centroid / centroid.norm(), members.len()))
            .filter(|z| horner(q, *z).0.norm() <= 1e-10 * magnitude_scale(q, *z));
        if let Some(root) = on_circle {
            chosen.extend(std::iter::repeat_n(root, members.len() / 2));
        } else {
            chosen.extend(members.into_iter().filter(|r| r.norm() < 1.0));
        }
    }
    Ok(chosen)
}

/// Spectral square root on `ℤ_m`: `θ̂(ν) = m^{−1/2} √ψ̂(ν) e^{iφ_ν}`.
///
/// Spectral values in `[−tol, 0)` are treated as zero.
pub fn sqrt_zm(psi: &SeqZm, phases: &[f64], tol: f64) -> Result<Factorization> {
    let m = psi.modulus() as usize;
    if phases.len() != m {
        return Err(Error::InvalidInput(format!("expected {m} phases, got {}", phases.len())));
    }
    let cert = is_pd_zm(psi, tol);
    if !cert.is_pd {
        return Err(Error::NotPositiveDefinite(cert.min_value));
    }
    let hat = dft_zm(psi);
    // FFT rounding leaves ~eps noise on vanishing spectral values; its square
    // root would not be negligible.
    let floor = 8.0 * f64::EPSILON * psi.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let scale = 1.0 / (m as f64).sqrt();
    let theta_hat: Vec<Complex64> = hat
        .values()
        .iter()
        .zip(phases)
        .map(|(v, phi)| {
            let r = if v.re > floor { v.re.sqrt() } else { 0.0 };
            Complex64::from_polar(scale * r, *phi)
        })
        .collect();
    let theta = idft_zm(&SeqZm::new(theta_hat)?);
    let residual = convolve_zm(&theta, &reverse_conjugate_zm(&theta))?.max_diff(psi);
    if residual > tol {
        return Err(Error::FactorResidual { residual, tol });
    }
    Ok(Factorization { theta: Sequence::Zm(theta), residual, method: FactorMethod::Spectral })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::PD_TOL;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
        v
    }

    #[test]
    fn roots_of_simple_polynomials() {
        let r = sorted(poly_roots(&[c(-1.0), c(0.0), c(1.0)], 1e-12).unwrap());
        assert!((r[0] - c(1.0)).norm() < 1e-12 && (r[1] - c(-1.0)).norm() < 1e-12, "{r:?}");

        let mut r: Vec<f64> = poly_roots(&[c(1.0), c(-2.5), c(1.0)], 1e-12).unwrap().iter().map(|z| z.re).collect();
        r.sort_by(f64::total_cmp);
        assert!((r[0] - 0.5).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);

        let r = poly_roots(&[c(1.0), c(0.0), c(0.0), c(0.0), c(1.0)], 1e-12).unwrap();
        for k in [1, 3, 5, 7] {
            let want = Complex64::from_polar(1.0, TAU * k as f64 / 8.0);
            assert!(r.iter().any(|z| (z - want).norm() < 1e-12), "missing e^(2πi·{k}/8)");
        }
    }

    #[test]
    fn zero_roots_are_factored_out() {
        let r = poly_roots(&[c(0.0), c(0.0), c(-4.0), c(1.0)], 1e-12).unwrap();
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
        assert!(r.iter().any(|z| (z - c(4.0)).norm() < 1e-12));
    }

    #[test]
    fn fejer_riesz_examples() {
        let f = fejer_riesz_z(&SeqZ::from_even([(0, 1.0), (1, 0.5)]), 1e-10).unwrap();
        let Sequence::Z(theta) = f.theta else { panic!() };
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((theta.get(0) - c(r)).norm() < 1e-7 && (theta.get(1) - c(r)).norm() < 1e-7, "{theta:?}");

        let f = fejer_riesz_z(&SeqZ::delta(), 1e-12).unwrap();
        assert_eq!(f.theta, Sequence::Z(SeqZ::delta()));

        let f = fejer_riesz_z(&SeqZ::from_even([(0, 1.25), (1, 0.5)]), 1e-12).unwrap();
        let Sequence::Z(theta) = f.theta else { panic!() };
        assert!((theta.get(0) - c(1.0)).norm() < 1e-12 && (theta.get(1) - c(0.5)).norm() < 1e-12);
    }

    #[test]
    fn fejer_riesz_rejects_non_pd() {
        assert!(matches!(
            fejer_riesz_z(&SeqZ::from_even([(0, 1.0), (1, 0.6)]), PD_TOL),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn fejer_riesz_handles_boundary_zeros() {
        // Fejér kernels vanish to second order at 2N points of the circle.
        for n in 1..=6 {
            let psi = SeqZ::triangle(n);
            let f = fejer_riesz_z(&psi, 1e-8).unwrap();
            let Sequence::Z(theta) = f.theta else { panic!() };
            assert!(theta.entries().all(|(k, _)| (0..=2 * n as i64).contains(&k)));
        }
    }

    #[test]
    fn sqrt_examples() {
        for m in [1u64, 4, 7] {
            let f = sqrt_zm(&SeqZm::ones(m), &vec![0.0; m as usize], 1e-12).unwrap();
            let Sequence::Zm(theta) = f.theta else { panic!() };
            let want = 1.0 / (m as f64).sqrt();
            assert!(theta.values().iter().all(|v| (v - c(want)).norm() < 1e-12), "{m} {theta:?}");

            let f = sqrt_zm(&SeqZm::delta(m), &vec![0.0; m as usize], 1e-12).unwrap();
            let Sequence::Zm(theta) = f.theta else { panic!() };
            assert!(theta.max_diff(&SeqZm::delta(m)) < 1e-12);
        }
        let psi = SeqZm::from_real(&[1.0, 0.5, 0.0, 0.5]).unwrap();
        let f = sqrt_zm(&psi, &[0.0; 4], 1e-12).unwrap();
        assert!(f.residual <= 1e-12);
        let Sequence::Zm(theta) = f.theta else { panic!() };
        let hat = dft_zm(&theta);
        let want = [0.5 * 0.5f64.sqrt(), 0.25, 0.0, 0.25];
        for (v, w) in hat.values().iter().zip(want) {
            assert!((v - c(w)).norm() < 1e-12);
        }
    }

    #[test]
    fn sqrt_residual_is_phase_independent() {
        let psi = SeqZm::from_real(&[1.0, 0.3, -0.1, 0.2, -0.1, 0.3]).unwrap();
        let base = sqrt_zm(&psi, &[0.0; 6], 1e-10).unwrap().residual;
        let twisted = sqrt_zm(&psi, &[0.3, -2.0, 1.0, 3.1, -0.7, 0.01], 1e-10).unwrap().residual;
        assert!(base < 1e-14 && twisted < 1e-14);
    }
}
