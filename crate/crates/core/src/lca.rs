//! Reduction of extremal problems on concrete groups to `ℤ` and `ℤ_m`.
//!
//! A group is a finite product of `ℤ`, `ℝ`, `𝕋 = ℝ/ℤ` and cyclic factors, with
//! exact rational coordinates. For `z` of order `m < ∞` the problem on `(Ω, z)`
//! has the value of the problem on `ℤ_m` with support `{k : kz ∈ Ω}`; for `z`
//! of infinite order the support lives in `ℤ`. On finite groups the extremal
//! sequence lifts back to a positive definite function on the whole group.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustfft::FftPlanner;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::seq::{is_pd_zm, PdCertificate, PdReason, SeqZm, Sequence, SupportZ, SupportZm, PD_TOL};
use crate::solver_z::cf_z;
use crate::solver_zm::{solve_zm, Mode, SolveReport};

/// One factor of a product group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Factor {
    Integers,
    Reals,
    Torus,
    Cyclic { m: u64 },
}

impl Factor {
    /// Period of the coordinate, if it is taken modulo something.
    fn period(&self) -> Option<BigRational> {
        match self {
            Factor::Torus => Some(BigRational::one()),
            Factor::Cyclic { m } => Some(BigRational::from_integer(BigInt::from(*m))),
            Factor::Integers | Factor::Reals => None,
        }
    }

    fn is_integral(&self) -> bool {
        matches!(self, Factor::Integers | Factor::Cyclic { .. })
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Integers => write!(f, "Z"),
            Factor::Reals => write!(f, "R"),
            Factor::Torus => write!(f, "T"),
            Factor::Cyclic { m } => write!(f, "Z{m}"),
        }
    }
}

/// A finite product of factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDescriptor {
    factors: Vec<Factor>,
}

impl GroupDescriptor {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidInput("a group needs at least one factor".into()));
        }
        for f in &factors {
            if let Factor::Cyclic { m } = f {
                if *m < 2 {
                    return Err(Error::InvalidInput(format!("cyclic modulus must be at least 2, got {m}")));
                }
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn is_finite(&self) -> bool {
        self.factors.iter().all(|f| matches!(f, Factor::Cyclic { .. }))
    }

    /// Validates and normalizes coordinates into an element.
    pub fn element(&self, coords: Vec<BigRational>) -> Result<GroupElement> {
        if coords.len() != self.factors.len() {
            return Err(Error::InvalidInput(format!(
                "element has {} coordinates, group has {} factors",
                coords.len(),
                self.factors.len()
            )));
        }
        let mut out = Vec::with_capacity(coords.len());
        for (f, c) in self.factors.iter().zip(coords) {
            if f.is_integral() && !c.is_integer() {
                return Err(Error::InvalidInput(format!("coordinate {c} of factor {f} must be an integer")));
            }
            out.push(match f.period() {
                Some(p) => modulo(&c, &p),
                None => c,
            });
        }
        Ok(GroupElement { coords: out })
    }

    /// Parses comma separated coordinates such as `"1,0"` or `"1/5"`.
    pub fn parse_element(&self, s: &str) -> Result<GroupElement> {
        let coords = s.split(',').map(|t| parse_rational(t.trim())).collect::<Result<Vec<_>>>()?;
        self.element(coords)
    }

    pub fn zero(&self) -> GroupElement {
        GroupElement { coords: vec![BigRational::zero(); self.factors.len()] }
    }

    pub fn neg(&self, x: &GroupElement) -> GroupElement {
        self.element(x.coords.iter().map(|c| -c).collect()).expect("negation stays in the group")
    }

    pub fn scale(&self, k: i64, x: &GroupElement) -> GroupElement {
        let k = BigRational::from_integer(BigInt::from(k));
        self.element(x.coords.iter().map(|c| c * &k).collect()).expect("multiples stay in the group")
    }

    /// Least `m ≥ 1` with `mz = 0`.
    pub fn order(&self, z: &GroupElement) -> Order {
        let mut m = BigInt::one();
        for (f, c) in self.factors.iter().zip(&z.coords) {
            let local = match f {
                _ if c.is_zero() => BigInt::one(),
                Factor::Integers | Factor::Reals => return Order::Infinite,
                Factor::Torus => c.denom().clone(),
                Factor::Cyclic { m } => {
                    let m = BigInt::from(*m);
                    &m / m.gcd(c.numer())
                }
            };
            m = m.lcm(&local);
        }
        match m.to_u64() {
            Some(m) => Order::Finite(m),
            None => Order::Infinite,
        }
    }
}

impl FromStr for GroupDescriptor {
    type Err = Error;

    /// `"Z4xZ2"`, `"T"`, `"RxZ3"`, `"Z"`: factors separated by `x`.
    fn from_str(s: &str) -> Result<Self> {
        let factors = s
            .split(['x', '×', '*'])
            .map(|t| {
                let t = t.trim();
                match t {
                    "Z" => Ok(Factor::Integers),
                    "R" => Ok(Factor::Reals),
                    "T" => Ok(Factor::Torus),
                    _ => t
                        .strip_prefix('Z')
                        .map(|r| r.trim_start_matches('_'))
                        .and_then(|r| r.parse::<u64>().ok())
                        .map(|m| Factor::Cyclic { m })
                        .ok_or_else(|| Error::InvalidInput(format!("unknown group factor {t:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Order of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Finite(u64),
    Infinite,
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Finite(m) => s.serialize_u64(*m),
            Order::Infinite => s.serialize_str("infinite"),
        }
    }
}

fn modulo(x: &BigRational, p: &BigRational) -> BigRational {
    x - p * (x / p).floor()
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::InvalidInput(format!("not an exact rational: {s:?}"));
    if let Some((whole, frac)) = s.split_once('.') {
        if s.contains('/') || frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{whole}{frac}");
        let numer = BigInt::from_str(&digits).map_err(|_| bad())?;
        let denom = BigInt::from(10u32).pow(frac.len() as u32);
        return Ok(BigRational::new(numer, denom));
    }
    let r = BigRational::from_str(s).map_err(|_| bad())?;
    Ok(r)
}

fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RationalRepr {
    Text(String),
    Int(i64),
}

impl RationalRepr {
    fn value(self) -> Result<BigRational> {
        match self {
            RationalRepr::Text(s) => parse_rational(s.trim()),
            RationalRepr::Int(i) => Ok(BigRational::from_integer(BigInt::from(i))),
        }
    }
}

/// A point of a product group; serialized as a list of `"p/q"` strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupElement {
    coords: Vec<BigRational>,
}

impl GroupElement {
    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(Zero::is_zero)
    }
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.coords.iter().map(format_rational))
    }
}

fn deserialize_coords<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<BigRational>, D::Error> {
    let raw = Vec::<RationalRepr>::deserialize(d)?;
    raw.into_iter().map(|r| r.value().map_err(D::Error::custom)).collect()
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(GroupElement { coords: deserialize_coords(d)? })
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(format_rational).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// An open interval `(lo, hi)`; `None` endpoints are `∓∞`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: Option<BigRational>,
    pub hi: Option<BigRational>,
}

impl Interval {
    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        Self { lo: Some(lo), hi: Some(hi) }
    }

    fn mirrored(&self) -> Self {
        Self { lo: self.hi.as_ref().map(|x| -x), hi: self.lo.as_ref().map(|x| -x) }
    }

    fn is_empty(&self) -> bool {
        matches!((&self.lo, &self.hi), (Some(a), Some(b)) if a >= b)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let lo = self.lo.as_ref().map_or("-inf".to_string(), format_rational);
        let hi = self.hi.as_ref().map_or("inf".to_string(), format_rational);
        s.collect_seq([lo, hi])
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<RationalRepr>::deserialize(d)?;
        let [lo, hi]: [RationalRepr; 2] =
            raw.try_into().map_err(|_| D::Error::custom("an interval has exactly two endpoints"))?;
        let endpoint = |r: RationalRepr, inf: &str| -> std::result::Result<Option<BigRational>, D::Error> {
            match r {
                RationalRepr::Text(t) if t.trim() == inf => Ok(None),
                r => r.value().map(Some).map_err(D::Error::custom),
            }
        };
        Ok(Interval { lo: endpoint(lo, "-inf")?, hi: endpoint(hi, "inf")? })
    }
}

/// A symmetric neighbourhood `Ω`: an explicit finite set, or a union of open
/// axis-parallel boxes (intervals on `𝕋` and cyclic factors taken modulo the
/// period).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmegaDescriptor {
    Explicit(Vec<GroupElement>),
    Boxes(Vec<Vec<Interval>>),
}

fn in_interval(f: &Factor, x: &BigRational, iv: &Interval) -> bool {
    match (f.period(), &iv.lo, &iv.hi) {
        (None, lo, hi) => lo.as_ref().is_none_or(|lo| lo < x) && hi.as_ref().is_none_or(|hi| x < hi),
        (Some(p), Some(lo), Some(hi)) => {
            // Smallest representative of x above lo.
            let mut y = x + &p * ((lo - x) / &p).ceil();
            if y == *lo {
                y += &p;
            }
            y < *hi
        }
        (Some(_), _, _) => true,
    }
}

type CanonicalInterval = (Option<BigRational>, Option<BigRational>);

/// Closed integer range `[a, b]` equivalent to the open interval on an
/// integral factor, or the interval itself otherwise; used to compare boxes.
fn canonical_interval(f: &Factor, iv: &Interval) -> CanonicalInterval {
    let (lo, hi) = if f.is_integral() {
        (iv.lo.as_ref().map(|x| x.floor() + BigRational::one()), iv.hi.as_ref().map(|x| x.ceil() - BigRational::one()))
    } else {
        (iv.lo.clone(), iv.hi.clone())
    };
    let Some(p) = f.period() else { return (lo, hi) };
    let full = (Some(BigRational::zero()), Some(p.clone()));
    match (lo, hi) {
        (Some(lo), Some(hi)) => {
            let covers = if f.is_integral() { &hi - &lo + BigRational::one() >= p } else { &hi - &lo > p };
            if covers {
                full
            } else {
                let shifted = modulo(&lo, &p);
                let width = hi - lo;
                (Some(shifted.clone()), Some(shifted + width))
            }
        }
        _ => full,
    }
}

impl OmegaDescriptor {
    /// Validates shape, coordinates and symmetry against `group`.
    pub fn validate(&self, group: &GroupDescriptor) -> Result<()> {
        match self {
            OmegaDescriptor::Explicit(points) => {
                let points = points.iter().map(|p| group.element(p.coords.clone())).collect::<Result<Vec<_>>>()?;
                for p in &points {
                    let q = group.neg(p);
                    if !points.contains(&q) {
                        return Err(Error::Inadmissible(format!("Ω is not symmetric: {p} present, {q} missing")));
                    }
                }
            }
            OmegaDescriptor::Boxes(boxes) => {
                let canon = |b: &Vec<Interval>| -> Vec<CanonicalInterval> {
                    group.factors.iter().zip(b).map(|(f, iv)| canonical_interval(f, iv)).collect()
                };
                let all: Vec<_> = boxes.iter().map(canon).collect();
                for (i, b) in boxes.iter().enumerate() {
                    if b.len() != group.factors.len() {
                        return Err(Error::InvalidInput(format!("box {i} has {} intervals", b.len())));
                    }
                    if b.iter().any(Interval::is_empty) {
                        return Err(Error::InvalidInput(format!("box {i} has an empty interval")));
                    }
                    let mirrored: Vec<Interval> = b.iter().map(Interval::mirrored).collect();
                    if !all.contains(&canon(&mirrored)) {
                        return Err(Error::Inadmissible(format!("Ω is not symmetric: box {i} has no mirror image")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, group: &GroupDescriptor, x: &GroupElement) -> bool {
        match self {
            OmegaDescriptor::Explicit(points) => {
                points.iter().any(|p| group.element(p.coords.clone()).is_ok_and(|p| p == *x))
            }
            OmegaDescriptor::Boxes(boxes) => boxes.iter().any(|b| {
                group.factors.iter().zip(b).zip(&x.coords).all(|((f, iv), c)| in_interval(f, c, iv))
            }),
        }
    }

    /// Largest `k` with `kz` possibly in `Ω`, when `z` moves along a
    /// noncompact coordinate that every piece of `Ω` bounds.
    fn multiple_bound(&self, group: &GroupDescriptor, z: &GroupElement) -> Option<BigRational> {
        let moving: Vec<usize> = (0..group.factors.len())
            .filter(|i| matches!(group.factors[*i], Factor::Integers | Factor::Reals) && !z.coords[*i].is_zero())
            .collect();
        let ratio = |i: usize, extent: &BigRational| extent.abs() / z.coords[i].abs();
        let pieces: Vec<Option<BigRational>> = match self {
            OmegaDescriptor::Explicit(points) => points
                .iter()
                .map(|p| moving.iter().map(|i| ratio(*i, &p.coords[*i])).min())
                .collect(),
            OmegaDescriptor::Boxes(boxes) => boxes
                .iter()
                .map(|b| {
                    moving
                        .iter()
                        .filter_map(|i| match (&b[*i].lo, &b[*i].hi) {
                            (Some(lo), Some(hi)) => Some(ratio(*i, lo).max(ratio(*i, hi))),
                            _ => None,
                        })
                        .min()
                })
                .collect(),
        };
        pieces.into_iter().try_fold(BigRational::zero(), |acc, p| p.map(|p| acc.max(p)))
    }
}

/// Support of a reduced problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum ReducedSupport {
    Zm(SupportZm),
    Z(SupportZ),
}

/// `H(Ω, z)` or `H_m(Ω, z)` together with the points `kz` it came from.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedProblem {
    pub order: Order,
    pub support: ReducedSupport,
    /// `(k, kz)` for `k ∈ H` with `k ≥ 0`.
    pub provenance: Vec<(i64, GroupElement)>,
    /// False when the multiples were cut off at a caller bound that does not
    /// provably cover `Ω`.
    pub exhaustive: bool,
    pub bound: Option<u64>,
}

/// Largest multiple examined for elements of infinite order.
pub const MAX_MULTIPLE: u64 = 100_000;

/// Computes the trace set `{k : kz ∈ Ω}`.
pub fn reduce(group: &GroupDescriptor, omega: &OmegaDescriptor, z: &GroupElement, bound: Option<u64>) -> Result<ReducedProblem> {
    let z = group.element(z.coords.clone())?;
    omega.validate(group)?;
    if z.is_zero() {
        return Err(Error::InvalidInput("z must be nonzero".into()));
    }
    if !omega.contains(group, &group.zero()) {
        return Err(Error::Inadmissible("Ω must contain 0".into()));
    }
    if !omega.contains(group, &z) {
        return Err(Error::Inadmissible(format!("z = {z} is not in Ω")));
    }
    let member = |k: i64| omega.contains(group, &group.scale(k, &z));
    let order = group.order(&z);
    match order {
        Order::Finite(m) => {
            if m > MAX_MULTIPLE {
                return Err(Error::SizeCap(format!("order {m} exceeds {MAX_MULTIPLE}")));
            }
            let ks: Vec<i64> = (0..m as i64).filter(|k| member(*k)).collect();
            for k in &ks {
                if !member(-k) {
                    return Err(Error::Inadmissible(format!("Ω is not symmetric at {}", group.scale(*k, &z))));
                }
            }
            let support = SupportZm::new(m, ks.iter().copied())?;
            let provenance = ks.iter().map(|k| (*k, group.scale(*k, &z))).collect();
            Ok(ReducedProblem { order, support: ReducedSupport::Zm(support), provenance, exhaustive: true, bound: None })
        }
        Order::Infinite => {
            let natural = omega.multiple_bound(group, &z).map(|k| k.floor().to_integer());
            let (limit, exhaustive) = match (natural, bound) {
                (Some(k), b) => {
                    let k = k.to_u64().unwrap_or(u64::MAX);
                    match b {
                        Some(b) if b < k => (b, false),
                        _ => (k, true),
                    }
                }
                (None, Some(b)) => (b, false),
                (None, None) => {
                    return Err(Error::Unbounded(
                        "Ω does not bound the multiples of z; supply an explicit bound".into(),
                    ))
                }
            };
            if limit > MAX_MULTIPLE {
                return Err(Error::SizeCap(format!("{limit} multiples exceed {MAX_MULTIPLE}")));
            }
            let half: Vec<u64> = (1..=limit).filter(|k| member(*k as i64)).collect();
            for k in &half {
                if !member(-(*k as i64)) {
                    return Err(Error::Inadmissible(format!("Ω is not symmetric at {}", group.scale(*k as i64, &z))));
                }
            }
            let provenance = std::iter::once(0)
                .chain(half.iter().map(|k| *k as i64))
                .map(|k| (k, group.scale(k, &z)))
                .collect();
            let support = SupportZ::new(half)?;
            Ok(ReducedProblem {
                order,
                support: ReducedSupport::Z(support),
                provenance,
                exhaustive,
                bound: Some(limit),
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupSolveReport {
    pub reduced: ReducedProblem,
    pub mode: Mode,
    #[serde(flatten)]
    pub report: SolveReport,
}

/// Reduces and solves: `CF_m`/`K_m` on `H_m(Ω, z)` for finite order, the common
/// value `CF(H(Ω, z))` on `ℤ` otherwise.
pub fn solve_group(
    group: &GroupDescriptor,
    omega: &OmegaDescriptor,
    z: &GroupElement,
    mode: Mode,
    tol: f64,
    bound: Option<u64>,
) -> Result<GroupSolveReport> {
    let reduced = reduce(group, omega, z, bound)?;
    let report = match &reduced.support {
        ReducedSupport::Zm(h) => solve_zm(h, mode, tol)?,
        ReducedSupport::Z(h) => cf_z(h, tol)?,
    };
    Ok(GroupSolveReport { reduced, mode, report })
}

/// `ℤ_{m_1} × … × ℤ_{m_r}` with elements stored as residue vectors and
/// indexed in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiniteGroup {
    moduli: Vec<u64>,
}

impl FiniteGroup {
    pub fn new(moduli: Vec<u64>) -> Result<Self> {
        if moduli.is_empty() || moduli.iter().any(|m| *m == 0) {
            return Err(Error::InvalidInput("finite group needs positive moduli".into()));
        }
        moduli
            .iter()
            .try_fold(1u64, |acc, m| acc.checked_mul(*m))
            .filter(|n| *n <= 1 << 24)
            .ok_or_else(|| Error::SizeCap("finite group too large".into()))?;
        Ok(Self { moduli })
    }

    pub fn from_descriptor(group: &GroupDescriptor) -> Result<Self> {
        let moduli = group
            .factors
            .iter()
            .map(|f| match f {
                Factor::Cyclic { m } => Ok(*m),
                other => Err(Error::InvalidInput(format!("factor {other} is not finite"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(moduli)
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn order(&self) -> u64 {
        self.moduli.iter().product()
    }

    pub fn normalize(&self, x: &[u64]) -> Result<Vec<u64>> {
        if x.len() != self.moduli.len() {
            return Err(Error::InvalidInput(format!("element {x:?} has the wrong number of coordinates")));
        }
        Ok(x.iter().zip(&self.moduli).map(|(a, m)| a % m).collect())
    }

    pub fn from_element(&self, x: &GroupElement) -> Result<Vec<u64>> {
        let coords = x
            .coords
            .iter()
            .zip(&self.moduli)
            .map(|(c, m)| {
                let c = modulo(c, &BigRational::from_integer(BigInt::from(*m)));
                c.to_integer().to_u64().ok_or_else(|| Error::InvalidInput(format!("bad residue {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.normalize(&coords)
    }

    pub fn index(&self, x: &[u64]) -> usize {
        x.iter().zip(&self.moduli).fold(0usize, |acc, (a, m)| acc * *m as usize + (*a % *m) as usize)
    }

    pub fn element(&self, mut index: usize) -> Vec<u64> {
        let mut out = vec![0; self.moduli.len()];
        for (slot, m) in out.iter_mut().zip(&self.moduli).rev() {
            *slot = (index % *m as usize) as u64;
            index /= *m as usize;
        }
        out
    }

    pub fn neg(&self, x: &[u64]) -> Vec<u64> {
        x.iter().zip(&self.moduli).map(|(a, m)| (m - a % m) % m).collect()
    }

    pub fn scale(&self, k: i64, x: &[u64]) -> Vec<u64> {
        x.iter()
            .zip(&self.moduli)
            .map(|(a, m)| ((k as i128 * *a as i128).rem_euclid(*m as i128)) as u64)
            .collect()
    }

    pub fn element_order(&self, x: &[u64]) -> u64 {
        x.iter().zip(&self.moduli).fold(1u64, |acc, (a, m)| acc.lcm(&(m / m.gcd(a))))
    }

    /// `γ(x) = e^{2πi·pairing(γ, x)}` with `pairing = Σ γ_i x_i / m_i mod 1`.
    pub fn pairing(&self, gamma: &[u64], x: &[u64]) -> f64 {
        gamma
            .iter()
            .zip(x)
            .zip(&self.moduli)
            .map(|((g, a), m)| ((g * a) % m) as f64 / *m as f64)
            .sum::<f64>()
            .fract()
    }
}

/// A complex function on a finite group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFunction {
    group: FiniteGroup,
    values: Vec<Complex64>,
}

impl GroupFunction {
    pub fn new(group: FiniteGroup, values: Vec<Complex64>) -> Result<Self> {
        if values.len() as u64 != group.order() {
            return Err(Error::InvalidInput("value count does not match the group order".into()));
        }
        Ok(Self { group, values })
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, x: &[u64]) -> Complex64 {
        self.values[self.group.index(x)]
    }

    /// `f̂(γ) = |G|⁻¹ Σ_x f(x) γ̄(x)`, indexed like the elements.
    pub fn transform(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        let mut planner = FftPlanner::new();
        let mut stride = 1usize;
        for &m in self.group.moduli.iter().rev() {
            let m = m as usize;
            let fft = planner.plan_fft_forward(m);
            let mut line = vec![Complex64::default(); m];
            let block = m * stride;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + offset + j * stride];
                    }
                    fft.process(&mut line);
                    for (j, v) in line.iter().enumerate() {
                        data[base + offset + j * stride] = *v;
                    }
                }
            }
            stride = block;
        }
        let inv = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= inv);
        data
    }

    /// Positive definiteness through the transform (Bochner on finite groups).
    pub fn pd_certificate(&self, tol: f64) -> PdCertificate {
        let hat = self.transform();
        let (arg, min) = hat
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.re))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty group");
        let max_im = hat.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        let reason = if max_im > tol {
            Some(PdReason::ComplexTransform)
        } else if min < -tol {
            Some(PdReason::NegativeTransform)
        } else {
            None
        };
        PdCertificate { is_pd: reason.is_none(), min_value: min, min_location: arg as f64, tolerance: tol, reason }
    }

    /// `(f + δ·1_{0})/(1 + δ)` for `f(0) = 1`.
    pub(crate) fn mix_with_delta(&mut self, delta: f64) {
        for v in self.values.iter_mut().skip(1) {
            *v /= 1.0 + delta;
        }
    }

    pub(crate) fn restrict_unchecked(&self, z: &[u64]) -> SeqZm {
        let m = self.group.element_order(z);
        let values = (0..m as i64).map(|k| self.get(&self.group.scale(k, z))).collect();
        SeqZm::new(values).expect("order is positive")
    }
}

/// `F(x) = Σ_k ψ(k)·[x = kz]`: the extremal sequence pushed onto `G`, with the
/// properties the reduction promises checked explicitly.
pub fn lift_witness(psi: &SeqZm, group: &FiniteGroup, z: &[u64], omega: &[Vec<u64>]) -> Result<GroupFunction> {
    let z = group.normalize(z)?;
    let m = group.element_order(&z);
    if psi.modulus() != m {
        return Err(Error::InvalidInput(format!("sequence lives on ℤ_{}, z has order {m}", psi.modulus())));
    }
    let mut values = vec![Complex64::default(); group.order() as usize];
    for k in 0..m as i64 {
        values[group.index(&group.scale(k, &z))] = psi.get(k);
    }
    let f = GroupFunction::new(group.clone(), values)?;

    let violation = |msg: String| Err(Error::TheoremViolation(msg));
    let cert = f.pd_certificate(PD_TOL);
    if !cert.is_pd {
        return violation(format!("lifted witness is not positive definite (min transform {:e})", cert.min_value));
    }
    if f.values[0] != Complex64::new(1.0, 0.0) {
        return violation(format!("lifted witness has F(0) = {}", f.values[0]));
    }
    if f.get(&z) != psi.get(1) {
        return violation("lifted witness does not reproduce ψ(1) at z".into());
    }
    let mut inside = vec![false; f.values.len()];
    for x in omega {
        inside[group.index(&group.normalize(x)?)] = true;
    }
    if let Some(i) = (0..f.values.len()).find(|i| !inside[*i] && f.values[*i] != Complex64::default()) {
        return violation(format!("lifted witness is nonzero at {:?} outside Ω", group.element(i)));
    }
    Ok(f)
}

/// `ψ(k) = f(kz)` on `ℤ_{o(z)}`; both `f` and the restriction are checked.
pub fn restrict(f: &GroupFunction, z: &[u64]) -> Result<SeqZm> {
    let cert = f.pd_certificate(PD_TOL);
    if !cert.is_pd {
        return Err(Error::NotPositiveDefinite(cert.min_value));
    }
    let z = f.group.normalize(z)?;
    let psi = f.restrict_unchecked(&z);
    let cert = is_pd_zm(&psi, PD_TOL);
    if !cert.is_pd {
        return Err(Error::TheoremViolation(format!(
            "restriction of a positive definite function fails the check (min transform {:e})",
            cert.min_value
        )));
    }
    Ok(psi)
}

/// The explicit point list of `Ω` on a finite group.
pub fn enumerate_omega(group: &GroupDescriptor, omega: &OmegaDescriptor) -> Result<Vec<Vec<u64>>> {
    let fin = FiniteGroup::from_descriptor(group)?;
    omega.validate(group)?;
    let mut out = Vec::new();
    for i in 0..fin.order() as usize {
        let x = fin.element(i);
        let el = group.element(x.iter().map(|a| BigRational::from_integer(BigInt::from(*a))).collect())?;
        if omega.contains(group, &el) {
            out.push(x);
        }
    }
    Ok(out)
}

/// Restriction of an extremal report to a sequence on `ℤ_m`, if it is one.
pub fn extremal_zm(report: &SolveReport) -> Option<&SeqZm> {
    match &report.extremal {
        Sequence::Zm(s) => Some(s),
        Sequence::Z(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    fn boxes(intervals: &[&[(&str, &str)]]) -> OmegaDescriptor {
        OmegaDescriptor::Boxes(
            intervals
                .iter()
                .map(|b| b.iter().map(|(lo, hi)| Interval::new(q(lo), q(hi))).collect())
                .collect(),
        )
    }

    #[test]
    fn orders() {
        let g: GroupDescriptor = "Z4xZ6".parse().unwrap();
        assert_eq!(g.order(&g.parse_element("1,2").unwrap()), Order::Finite(12));
        let t: GroupDescriptor = "T".parse().unwrap();
        assert_eq!(t.order(&t.parse_element("1/2").unwrap()), Order::Finite(2));
        assert_eq!(t.order(&t.parse_element("0.4").unwrap()), Order::Finite(5));
        let z: GroupDescriptor = "Z".parse().unwrap();
        assert_eq!(z.order(&z.parse_element("1").unwrap()), Order::Infinite);
    }

    #[test]
    fn order_matches_enumeration() {
        let g: GroupDescriptor = "Z4xZ6xT".parse().unwrap();
        for s in ["1,2,1/3", "2,3,0", "0,0,3/8", "3,5,5/7"] {
            let z = g.parse_element(s).unwrap();
            let Order::Finite(m) = g.order(&z) else { panic!() };
            let first = (1..=1000).find(|k| g.scale(*k, &z).is_zero()).unwrap();
            assert_eq!(first as u64, m, "{s}");
        }
    }

    #[test]
    fn parsing() {
        assert!("Z1".parse::<GroupDescriptor>().is_err());
        assert!("Q".parse::<GroupDescriptor>().is_err());
        let g: GroupDescriptor = "Z".parse().unwrap();
        assert!(g.parse_element("1/2").is_err());
        assert!(parse_rational("0.1e3").is_err());
        assert_eq!(parse_rational("-0.25").unwrap(), q("-1/4"));
    }

    #[test]
    fn reduce_examples() {
        let r: GroupDescriptor = "R".parse().unwrap();
        let red = reduce(&r, &boxes(&[&[("-5/2", "5/2")]]), &r.parse_element("1").unwrap(), None).unwrap();
        assert_eq!(red.order, Order::Infinite);
        assert_eq!(red.support, ReducedSupport::Z(SupportZ::new([1, 2]).unwrap()));
        assert!(red.exhaustive);

        let t: GroupDescriptor = "T".parse().unwrap();
        let red = reduce(&t, &boxes(&[&[("-3/10", "3/10")]]), &t.parse_element("1/5").unwrap(), None).unwrap();
        assert_eq!(red.order, Order::Finite(5));
        assert_eq!(red.support, ReducedSupport::Zm(SupportZm::new(5, [-1, 0, 1]).unwrap()));

        let c: GroupDescriptor = "Z6".parse().unwrap();
        let omega = OmegaDescriptor::Explicit(
            ["0", "1", "5", "2", "4"].iter().map(|s| c.parse_element(s).unwrap()).collect(),
        );
        let red = reduce(&c, &omega, &c.parse_element("1").unwrap(), None).unwrap();
        assert_eq!(red.support, ReducedSupport::Zm(SupportZm::new(6, [0, 1, -1, 2, -2]).unwrap()));
    }

    #[test]
    fn openness_is_strict() {
        let r: GroupDescriptor = "R".parse().unwrap();
        let red = reduce(&r, &boxes(&[&[("-2", "2")]]), &r.parse_element("1").unwrap(), None).unwrap();
        assert_eq!(red.support, ReducedSupport::Z(SupportZ::new([1]).unwrap()));
    }

    #[test]
    fn reduce_errors() {
        let r: GroupDescriptor = "R".parse().unwrap();
        let z = r.parse_element("1").unwrap();
        assert!(matches!(reduce(&r, &boxes(&[&[("-1/2", "1/2")]]), &z, None), Err(Error::Inadmissible(_))));
        assert!(matches!(reduce(&r, &boxes(&[&[("-3", "2")]]), &z, None), Err(Error::Inadmissible(_))));
        assert!(matches!(reduce(&r, &boxes(&[&[("-3", "3")]]), &r.zero(), None), Err(Error::InvalidInput(_))));

        let rt: GroupDescriptor = "RxT".parse().unwrap();
        let wide = boxes(&[&[("-2", "2"), ("-1/4", "1/4")], &[("-100", "100"), ("2/5", "3/5")]]);
        let red = reduce(&rt, &wide, &rt.parse_element("1/2,1/2").unwrap(), None).unwrap();
        assert!(red.exhaustive);

        let narrow = boxes(&[&[("-2", "2"), ("-1/4", "1/4")]]);
        let zt = rt.parse_element("0,1/5").unwrap();
        assert_eq!(reduce(&rt, &narrow, &zt, None).unwrap().order, Order::Finite(5));
        let rz: GroupDescriptor = "TxR".parse().unwrap();
        let diag = boxes(&[&[("-1/4", "1/4"), ("-1", "1")]]);
        let red = reduce(&rz, &diag, &rz.parse_element("1/10,1/3").unwrap(), None).unwrap();
        assert_eq!(red.support, ReducedSupport::Z(SupportZ::new([1, 2]).unwrap()));
    }

    #[test]
    fn unbounded_needs_bound() {
        // Ω = ℝ × (−1/4, 1/4): multiples of (1, 0) stay inside forever.
        let rt: GroupDescriptor = "RxT".parse().unwrap();
        let strip: OmegaDescriptor = serde_json::from_str(r#"{"boxes":[[["-inf","inf"],["-1/4","1/4"]]]}"#).unwrap();
        let z = rt.parse_element("1,0").unwrap();
        assert!(matches!(reduce(&rt, &strip, &z, None), Err(Error::Unbounded(_))));
        let red = reduce(&rt, &strip, &z, Some(5)).unwrap();
        assert!(!red.exhaustive);
        assert_eq!(red.support, ReducedSupport::Z(SupportZ::new([1, 2, 3, 4, 5]).unwrap()));

        let wide = boxes(&[&[("-1000000", "1000000"), ("-1/4", "1/4")]]);
        let red = reduce(&rt, &wide, &z, Some(5)).unwrap();
        assert!(!red.exhaustive);
        let red = reduce(&rt, &boxes(&[&[("-7/2", "7/2"), ("-1/4", "1/4")]]), &z, Some(5)).unwrap();
        assert!(red.exhaustive);
        assert_eq!(red.bound, Some(3));

        let t: GroupDescriptor = "ZxT".parse().unwrap();
        let omega = boxes(&[&[("-1/2", "1/2"), ("-1/4", "1/4")]]);
        let z = t.parse_element("0,1/7").unwrap();
        assert_eq!(reduce(&t, &omega, &z, None).unwrap().order, Order::Finite(7));
    }

    #[test]
    fn solve_group_examples() {
        let t: GroupDescriptor = "T".parse().unwrap();
        let r = solve_group(&t, &boxes(&[&[("-3/10", "3/10")]]), &t.parse_element("1/5").unwrap(), Mode::Complex, PD_TOL, None)
            .unwrap();
        assert!((r.report.value - 1.0 / (2.0 * (std::f64::consts::PI / 5.0).cos())).abs() < 1e-9);

        let g: GroupDescriptor = "Z2xZ2".parse().unwrap();
        let omega = OmegaDescriptor::Explicit(["0,0", "1,0"].iter().map(|s| g.parse_element(s).unwrap()).collect());
        for mode in [Mode::Real, Mode::Complex] {
            let r = solve_group(&g, &omega, &g.parse_element("1,0").unwrap(), mode, PD_TOL, None).unwrap();
            assert_eq!(r.report.value, 1.0);
        }
    }

    #[test]
    fn product_transform_matches_direct_sum() {
        let g = FiniteGroup::new(vec![3, 4]).unwrap();
        let values: Vec<Complex64> = (0..12).map(|i| Complex64::new(i as f64 * 0.3 - 1.0, (i * i % 5) as f64)).collect();
        let f = GroupFunction::new(g.clone(), values.clone()).unwrap();
        let hat = f.transform();
        for gamma in 0..12 {
            let direct: Complex64 = (0..12)
                .map(|x| {
                    values[x] * Complex64::from_polar(1.0, -std::f64::consts::TAU * g.pairing(&g.element(gamma), &g.element(x)))
                })
                .sum::<Complex64>()
                / 12.0;
            assert!((direct - hat[gamma]).norm() < 1e-12);
        }
    }

    #[test]
    fn lift_examples() {
        let psi = SeqZm::from_real(&[1.0, 0.5, 0.0, 0.5]).unwrap();
        let g = FiniteGroup::new(vec![4]).unwrap();
        let omega: Vec<Vec<u64>> = vec![vec![0], vec![1], vec![3]];
        let f = lift_witness(&psi, &g, &[1], &omega).unwrap();
        assert_eq!(f.values(), psi.values());
        assert_eq!(restrict(&f, &[1]).unwrap(), psi);

        let g = FiniteGroup::new(vec![4, 2]).unwrap();
        let omega: Vec<Vec<u64>> = vec![vec![0, 0], vec![1, 0], vec![3, 0]];
        let f = lift_witness(&psi, &g, &[1, 0], &omega).unwrap();
        assert_eq!(f.get(&[1, 0]), Complex64::new(0.5, 0.0));
        assert_eq!(f.get(&[1, 1]), Complex64::default());

        let g = FiniteGroup::new(vec![2]).unwrap();
        let f = lift_witness(&SeqZm::ones(2), &g, &[1], &[vec![0], vec![1]]).unwrap();
        assert_eq!(f.values(), SeqZm::ones(2).values());
    }

    #[test]
    fn lift_rejects_support_outside_omega() {
        let psi = SeqZm::from_real(&[1.0, 0.5, 0.0, 0.5]).unwrap();
        let g = FiniteGroup::new(vec![4]).unwrap();
        assert!(matches!(lift_witness(&psi, &g, &[1], &[vec![0]]), Err(Error::TheoremViolation(_))));
    }

    #[test]
    fn restrict_examples() {
        let g = FiniteGroup::new(vec![6]).unwrap();
        let f = GroupFunction::new(g, vec![Complex64::new(1.0, 0.0); 6]).unwrap();
        assert_eq!(restrict(&f, &[2]).unwrap(), SeqZm::ones(3));
    }

    #[test]
    fn json_layout() {
        let g: GroupDescriptor = "Z4xT".parse().unwrap();
        assert_eq!(
            serde_json::to_string(&g).unwrap(),
            r#"{"factors":[{"kind":"cyclic","m":4},{"kind":"torus"}]}"#
        );
        let omega: OmegaDescriptor = serde_json::from_str(r#"{"boxes":[[["-1","1"],["-1/4","1/4"]]]}"#).unwrap();
        omega.validate(&g).unwrap();
        let explicit: OmegaDescriptor = serde_json::from_str(r#"{"explicit":[["0","0"],[1,"1/2"]]}"#).unwrap();
        assert_eq!(serde_json::to_string(&explicit).unwrap(), r#"{"explicit":[["0","0"],["1","1/2"]]}"#);
    }
}
