//! Sequences on `ℤ` and `ℤ_m`, their transforms, and positive-definiteness
//! certificates.
//!
//! A finitely supported `ψ` on `ℤ` is positive definite exactly when its
//! trigonometric polynomial `ψ̌(t) = Σ ψ(n) e^{2πint}` is nonnegative on the
//! circle; a function on `ℤ_m` is positive definite exactly when its discrete
//! Fourier transform is nonnegative. Both checks are implemented here and
//! return a [`PdCertificate`] carrying the minimum of the relevant transform.
//!
//! The transform on `ℤ_m` is normalized with `1/m` on the forward side:
//! `ψ̂(ν) = (1/m) Σ_j ψ(j) e^{−2πijν/m}` and `ψ(j) = Σ_ν ψ̂(ν) e^{2πijν/m}`,
//! so `ψ(0) = Σ_ν ψ̂(ν)`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::factorize::poly_roots;

/// Entries at or below this modulus are not stored.
pub const DROP_TOL: f64 = 1e-14;

/// Default absolute tolerance on transform values for PD certification.
pub const PD_TOL: f64 = 1e-8;

/// The positive half `H⁺` of a finite symmetric set `H = {0} ∪ H⁺ ∪ (−H⁺) ⊂ ℤ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportZ {
    half: Vec<u64>,
}

impl SupportZ {
    /// Builds `H` from its positive half; the input is sorted and deduplicated.
    pub fn new(half: impl IntoIterator<Item = u64>) -> Result<Self> {
        let set: BTreeSet<u64> = half.into_iter().collect();
        if set.contains(&0) {
            return Err(Error::InvalidInput("positive half of a support may not contain 0".into()));
        }
        Ok(Self { half: set.into_iter().collect() })
    }

    /// Builds `H` from a full listing of its elements, which must be symmetric
    /// and contain 0.
    pub fn from_symmetric(elements: &[i64]) -> Result<Self> {
        let set: BTreeSet<i64> = elements.iter().copied().collect();
        if !set.contains(&0) {
            return Err(Error::Inadmissible("support must contain 0".into()));
        }
        for &k in &set {
            if !set.contains(&-k) {
                return Err(Error::Inadmissible(format!("support is not symmetric: {k} present, {} missing", -k)));
            }
        }
        Self::new(set.into_iter().filter(|k| *k > 0).map(|k| k as u64))
    }

    /// `[−n, n]`.
    pub fn interval(n: u64) -> Self {
        Self { half: (1..=n).collect() }
    }

    pub fn half(&self) -> &[u64] {
        &self.half
    }

    pub fn max(&self) -> u64 {
        self.half.last().copied().unwrap_or(0)
    }

    pub fn contains(&self, k: i64) -> bool {
        k == 0 || self.half.binary_search(&k.unsigned_abs()).is_ok()
    }

    pub fn is_subset(&self, other: &SupportZ) -> bool {
        self.half.iter().all(|k| other.half.binary_search(k).is_ok())
    }

    /// Admissible problem instances need `{0, ±1} ⊆ H`.
    pub fn check_admissible(&self) -> Result<()> {
        if self.half.first() != Some(&1) {
            return Err(Error::Inadmissible("support must contain ±1".into()));
        }
        Ok(())
    }

    /// All elements of `H` in increasing order.
    pub fn elements(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self.half.iter().rev().map(|k| -(*k as i64)).collect();
        v.push(0);
        v.extend(self.half.iter().map(|k| *k as i64));
        v
    }
}

/// A symmetric set of residues mod `m` containing 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportZm {
    modulus: u64,
    residues: BTreeSet<u64>,
}

impl SupportZm {
    pub fn new(modulus: u64, residues: impl IntoIterator<Item = i64>) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::InvalidInput("modulus must be positive".into()));
        }
        let m = modulus as i64;
        let residues: BTreeSet<u64> = residues.into_iter().map(|k| k.rem_euclid(m) as u64).collect();
        if !residues.contains(&0) {
            return Err(Error::Inadmissible("support must contain 0".into()));
        }
        for &r in &residues {
            let neg = (modulus - r) % modulus;
            if !residues.contains(&neg) {
                return Err(Error::Inadmissible(format!(
                    "support is not symmetric mod {modulus}: {r} present, {neg} missing"
                )));
            }
        }
        Ok(Self { modulus, residues })
    }

    /// The whole group `ℤ_m`.
    pub fn full(modulus: u64) -> Self {
        Self { modulus, residues: (0..modulus).collect() }
    }

    /// Builds the symmetric closure of `{0} ∪ half ∪ −half`.
    pub fn from_half(modulus: u64, half: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut all = vec![0i64];
        for k in half {
            all.push(k as i64);
            all.push(-(k as i64));
        }
        Self::new(modulus, all)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn residues(&self) -> &BTreeSet<u64> {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn contains(&self, k: i64) -> bool {
        self.residues.contains(&(k.rem_euclid(self.modulus as i64) as u64))
    }

    /// Residues in `1..=m/2`, one representative per `±` pair.
    pub fn half(&self) -> Vec<u64> {
        self.residues.iter().copied().filter(|r| *r >= 1 && *r <= self.modulus / 2).collect()
    }

    /// Admissible problem instances need `m ≥ 2` and `±1 ∈ H`.
    pub fn check_admissible(&self) -> Result<()> {
        if self.modulus < 2 {
            return Err(Error::Inadmissible("modulus must be at least 2".into()));
        }
        if !self.residues.contains(&1) {
            return Err(Error::Inadmissible("support must contain ±1".into()));
        }
        Ok(())
    }
}

/// A finitely supported complex sequence on `ℤ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeqZ {
    entries: BTreeMap<i64, Complex64>,
}

impl SeqZ {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (i64, Complex64)>) -> Self {
        let mut s = Self::new();
        for (k, v) in entries {
            s.add(k, v);
        }
        s
    }

    /// Real even sequence with `ψ(±k) = values[k]`.
    pub fn from_even(values: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut s = Self::new();
        for (k, v) in values {
            let v = Complex64::new(v, 0.0);
            s.set(k as i64, v);
            s.set(-(k as i64), v);
        }
        s
    }

    pub fn delta() -> Self {
        Self::from_entries([(0, Complex64::new(1.0, 0.0))])
    }

    /// Triangle `Δ_N(n) = (1 − |n|/(2N+1))₊`.
    pub fn triangle(n: u64) -> Self {
        let w = (2 * n + 1) as f64;
        Self::from_entries((-(2 * n as i64)..=(2 * n as i64)).map(|k| {
            (k, Complex64::new((1.0 - k.unsigned_abs() as f64 / w).max(0.0), 0.0))
        }))
    }

    pub fn get(&self, k: i64) -> Complex64 {
        self.entries.get(&k).copied().unwrap_or_default()
    }

    pub fn set(&mut self, k: i64, v: Complex64) {
        if v.norm() > DROP_TOL {
            self.entries.insert(k, v);
        } else {
            self.entries.remove(&k);
        }
    }

    fn add(&mut self, k: i64, v: Complex64) {
        let cur = self.get(k);
        self.set(k, cur + v);
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `max |k|` over the support (0 for the empty sequence).
    pub fn radius(&self) -> u64 {
        self.entries.keys().map(|k| k.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_entries(self.entries().map(|(k, v)| (k, v * c)))
    }

    /// `max_k |a(k) − b(k)|`.
    pub fn max_diff(&self, other: &SeqZ) -> f64 {
        let keys: BTreeSet<i64> = self.entries.keys().chain(other.entries.keys()).copied().collect();
        keys.into_iter().fold(0.0, |m, k| m.max((self.get(k) - other.get(k)).norm()))
    }

    /// `max_k |ψ(k) − conj ψ(−k)|`.
    pub fn converse_deviation(&self) -> f64 {
        self.max_diff(&reverse_conjugate_z(self))
    }
}

/// A complex function on `ℤ_m`, stored as `ψ(0), …, ψ(m−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqZm {
    values: Vec<Complex64>,
}

impl SeqZm {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("sequence on Z_m needs m ≥ 1 values".into()));
        }
        Ok(Self { values })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|v| Complex64::new(*v, 0.0)).collect())
    }

    pub fn zeros(modulus: u64) -> Self {
        Self { values: vec![Complex64::default(); modulus as usize] }
    }

    pub fn ones(modulus: u64) -> Self {
        Self { values: vec![Complex64::new(1.0, 0.0); modulus as usize] }
    }

    pub fn delta(modulus: u64) -> Self {
        let mut s = Self::zeros(modulus);
        s.values[0] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn modulus(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn get(&self, k: i64) -> Complex64 {
        self.values[k.rem_euclid(self.values.len() as i64) as usize]
    }

    pub fn max_diff(&self, other: &SeqZm) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// `ψ(k)·e^{2πijk/m}`.
    pub fn times_character(&self, j: i64) -> Self {
        let m = self.values.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let phase = TAU * ((j * k as i64).rem_euclid(m as i64)) as f64 / m as f64;
                v * Complex64::from_polar(1.0, phase)
            })
            .collect();
        Self { values }
    }
}

/// Either kind of sequence, with the JSON layout
/// `{"domain":"Z"|"Zm","modulus":m?,"entries":[[k,re,im],...]}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Sequence {
    Z(SeqZ),
    Zm(SeqZm),
}

#[derive(Serialize, Deserialize)]
struct SequenceJson {
    domain: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    modulus: Option<u64>,
    entries: Vec<(i64, f64, f64)>,
}

impl Serialize for Sequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let json = match self {
            Sequence::Z(s) => SequenceJson {
                domain: "Z".into(),
                modulus: None,
                entries: s.entries().map(|(k, v)| (k, v.re, v.im)).collect(),
            },
            Sequence::Zm(s) => SequenceJson {
                domain: "Zm".into(),
                modulus: Some(s.modulus()),
                entries: s
                    .values()
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
                    .map(|(k, v)| (k as i64, v.re, v.im))
                    .collect(),
            },
        };
        json.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let json = SequenceJson::deserialize(deserializer)?;
        match json.domain.as_str() {
            "Z" => Ok(Sequence::Z(SeqZ::from_entries(
                json.entries.into_iter().map(|(k, re, im)| (k, Complex64::new(re, im))),
            ))),
            "Zm" => {
                let m = json.modulus.ok_or_else(|| D::Error::custom("domain Zm requires a modulus"))?;
                if m == 0 {
                    return Err(D::Error::custom("modulus must be positive"));
                }
                let mut s = SeqZm::zeros(m);
                for (k, re, im) in json.entries {
                    let idx = k.rem_euclid(m as i64) as usize;
                    s.values[idx] += Complex64::new(re, im);
                }
                Ok(Sequence::Zm(s))
            }
            other => Err(D::Error::custom(format!("unknown domain {other:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SupportJson {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    modulus: Option<u64>,
    half: Vec<u64>,
}

impl Serialize for SupportZ {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SupportJson { modulus: None, half: self.half.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SupportZ {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = SupportJson::deserialize(deserializer)?;
        SupportZ::new(json.half).map_err(serde::de::Error::custom)
    }
}

impl Serialize for SupportZm {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SupportJson { modulus: Some(self.modulus), half: self.half() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SupportZm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let json = SupportJson::deserialize(deserializer)?;
        let m = json.modulus.ok_or_else(|| D::Error::custom("support on Z_m requires a modulus"))?;
        SupportZm::from_half(m, json.half).map_err(D::Error::custom)
    }
}

/// `ψ̃(x) = conj ψ(−x)`.
pub fn reverse_conjugate_z(s: &SeqZ) -> SeqZ {
    SeqZ::from_entries(s.entries().map(|(k, v)| (-k, v.conj())))
}

/// `ψ̃(x) = conj ψ(−x mod m)`.
pub fn reverse_conjugate_zm(s: &SeqZm) -> SeqZm {
    let m = s.values.len();
    SeqZm { values: (0..m).map(|x| s.values[(m - x) % m].conj()).collect() }
}

/// `(a ⋆ b)(n) = Σ_k a(k) b(n − k)`.
pub fn convolve_z(a: &SeqZ, b: &SeqZ) -> SeqZ {
    let mut acc: BTreeMap<i64, Complex64> = BTreeMap::new();
    for (i, x) in a.entries() {
        for (j, y) in b.entries() {
            *acc.entry(i + j).or_default() += x * y;
        }
    }
    SeqZ::from_entries(acc)
}

/// Cyclic convolution on `ℤ_m`.
pub fn convolve_zm(a: &SeqZm, b: &SeqZm) -> Result<SeqZm> {
    if a.modulus() != b.modulus() {
        return Err(Error::InvalidInput(format!(
            "modulus mismatch in cyclic convolution: {} vs {}",
            a.modulus(),
            b.modulus()
        )));
    }
    let m = a.values.len();
    let mut out = vec![Complex64::default(); m];
    for (i, x) in a.values.iter().enumerate() {
        if *x == Complex64::default() {
            continue;
        }
        for (j, y) in b.values.iter().enumerate() {
            out[(i + j) % m] += x * y;
        }
    }
    Ok(SeqZm { values: out })
}

/// `ψ̂(ν) = (1/m) Σ_j ψ(j) e^{−2πijν/m}`.
pub fn dft_zm(s: &SeqZm) -> SeqZm {
    let m = s.values.len();
    let mut buf = s.values.clone();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let inv = 1.0 / m as f64;
    buf.iter_mut().for_each(|v| *v *= inv);
    SeqZm { values: buf }
}

/// `ψ(j) = Σ_ν ψ̂(ν) e^{2πijν/m}`, the inverse of [`dft_zm`].
pub fn idft_zm(s: &SeqZm) -> SeqZm {
    let m = s.values.len();
    let mut buf = s.values.clone();
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    SeqZm { values: buf }
}

/// `ψ̌(t) = Σ_n ψ(n) e^{2πint}`.
pub fn trig_eval(s: &SeqZ, t: f64) -> Complex64 {
    s.entries().map(|(k, v)| v * Complex64::from_polar(1.0, TAU * k as f64 * t)).sum()
}

/// Real parts of `ψ̌`, `ψ̌′`, `ψ̌″` at `t`.
fn trig_derivatives(s: &SeqZ, t: f64) -> (f64, f64, f64) {
    let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for (k, v) in s.entries() {
        let w = TAU * k as f64;
        let e = v * Complex64::from_polar(1.0, w * t);
        f += e.re;
        d1 += (e * Complex64::new(0.0, w)).re;
        d2 -= w * w * e.re;
    }
    (f, d1, d2)
}

fn polish_minimum(s: &SeqZ, t0: f64, max_step: f64) -> (f64, f64) {
    let (f0, _, _) = trig_derivatives(s, t0);
    let mut t = t0;
    for _ in 0..40 {
        let (_, d1, d2) = trig_derivatives(s, t);
        if d2 <= 0.0 {
            break;
        }
        let step = (d1 / d2).clamp(-max_step, max_step);
        t -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    let (f, _, _) = trig_derivatives(s, t);
    if f <= f0 {
        (t.rem_euclid(1.0), f)
    } else {
        (t0.rem_euclid(1.0), f0)
    }
}

/// Local minima of `ψ̌` on `[0,1)` for a self-converse `ψ`, each polished by
/// Newton's method: stationary points from the unit-circle roots of the
/// derivative polynomial, plus the discrete minima of an `8(2N+1)`-point grid.
pub(crate) fn trig_local_minima(s: &SeqZ) -> Vec<(f64, f64)> {
    let n = s.radius();
    if n == 0 {
        return vec![(0.0, s.get(0).re)];
    }
    let grid = 8 * (2 * n as usize + 1);
    let h = 1.0 / grid as f64;
    let mut out = Vec::new();

    // w^N ψ̌′ up to the factor 2πi, as a polynomial in w = e^{2πit}.
    let coeffs: Vec<Complex64> = (0..=2 * n as i64)
        .map(|j| {
            let k = j - n as i64;
            s.get(k) * k as f64
        })
        .collect();
    if let Ok(roots) = poly_roots(&coeffs, 1e-9) {
        for r in roots {
            if (r.norm() - 1.0).abs() < 1e-3 {
                let t = (r.arg() / TAU).rem_euclid(1.0);
                out.push(polish_minimum(s, t, h));
            }
        }
    }

    let values: Vec<f64> = (0..grid).map(|i| trig_derivatives(s, i as f64 * h).0).collect();
    for i in 0..grid {
        let prev = values[(i + grid - 1) % grid];
        let next = values[(i + 1) % grid];
        if values[i] <= prev && values[i] <= next {
            out.push(polish_minimum(s, i as f64 * h, h));
        }
    }
    out
}

fn check_self_converse(s: &SeqZ) -> Result<()> {
    let dev = s.converse_deviation();
    if dev > 1e-10 * (1.0 + s.max_abs()) {
        return Err(Error::NotSelfConverse(dev));
    }
    Ok(())
}

/// Global minimizer and minimum of the real trigonometric polynomial `ψ̌`.
pub fn min_trig(s: &SeqZ) -> Result<(f64, f64)> {
    check_self_converse(s)?;
    Ok(trig_local_minima(s)
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0.0, 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdReason {
    NotSelfConverse,
    NegativeTransform,
    ComplexTransform,
}

/// Outcome of a positive-definiteness check.
///
/// `min_location` is the minimizing `t ∈ [0,1)` for sequences on `ℤ` and the
/// minimizing frequency index `ν` for sequences on `ℤ_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdCertificate {
    pub is_pd: bool,
    pub min_value: f64,
    pub min_location: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<PdReason>,
}

/// Herglotz criterion for finitely supported sequences on `ℤ`.
///
/// Sequences that are not self-converse within `tol` are reported as not
/// positive definite; the minimum is then that of the self-converse part.
pub fn is_pd_z(s: &SeqZ, tol: f64) -> PdCertificate {
    let dev = s.converse_deviation();
    let sym = SeqZ::from_entries(
        s.entries()
            .chain(reverse_conjugate_z(s).entries())
            .map(|(k, v)| (k, v * 0.5)),
    );
    let (t, min) = trig_local_minima(&sym)
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0.0, 0.0));
    let reason = if dev > tol {
        Some(PdReason::NotSelfConverse)
    } else if min < -tol {
        Some(PdReason::NegativeTransform)
    } else {
        None
    };
    PdCertificate { is_pd: reason.is_none(), min_value: min, min_location: t, tolerance: tol, reason }
}

/// Bochner criterion on `ℤ_m`: `ψ̂ ≥ 0`.
pub fn is_pd_zm(s: &SeqZm, tol: f64) -> PdCertificate {
    let hat = dft_zm(s);
    let (mut nu, mut min, mut max_im) = (0usize, f64::INFINITY, 0.0_f64);
    for (i, v) in hat.values.iter().enumerate() {
        if v.re < min {
            min = v.re;
            nu = i;
        }
        max_im = max_im.max(v.im.abs());
    }
    let reason = if min < -tol {
        Some(PdReason::NegativeTransform)
    } else if max_im > tol {
        Some(PdReason::ComplexTransform)
    } else {
        None
    };
    PdCertificate { is_pd: reason.is_none(), min_value: min, min_location: nu as f64, tolerance: tol, reason }
}
