use std::fs;
use std::path::Path;
use std::str::FromStr;

use cf_extremal::lca::{GroupDescriptor, GroupElement, OmegaDescriptor};
use cf_extremal::seq::{SeqZ, SeqZm, Sequence, SupportZ, SupportZm};
use cf_extremal::{Error, Result};
use num_complex::Complex64;
use serde::de::DeserializeOwned;

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| bad(format!("malformed JSON in {}: {e}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| bad(format!("malformed JSON: {e}")))
}

fn split(list: &str) -> impl Iterator<Item = &str> {
    list.split(',').map(str::trim).filter(|t| !t.is_empty())
}

pub fn parse_list<T: FromStr>(list: &str, what: &str) -> Result<Vec<T>> {
    split(list)
        .map(|t| t.parse::<T>().map_err(|_| bad(format!("cannot parse {t:?} as {what}"))))
        .collect()
}

fn complex(t: &str) -> Result<Complex64> {
    Complex64::from_str(t).map_err(|_| bad(format!("cannot parse {t:?} as a complex number")))
}

/// `"1, 0.5, 0, 0.5"` or `"1, 0.5+0.5i, …"`: the values `ψ(0), …, ψ(m−1)`.
pub fn seq_zm(values: &str) -> Result<SeqZm> {
    let values = split(values).map(complex).collect::<Result<Vec<_>>>()?;
    SeqZm::new(values)
}

/// `"-1=0.5, 0=1, 1=0.5"`: the nonzero entries of a sequence on `ℤ`.
pub fn seq_z(entries: &str) -> Result<SeqZ> {
    let entries = split(entries)
        .map(|t| {
            let (k, v) = t.split_once('=').ok_or_else(|| bad(format!("entry {t:?} is not of the form k=value")))?;
            let k = k.trim().parse::<i64>().map_err(|_| bad(format!("cannot parse index {k:?}")))?;
            Ok((k, complex(v.trim())?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeqZ::from_entries(entries))
}

/// Exactly one of the four ways to give a sequence.
pub fn sequence(
    file: Option<&Path>,
    json: Option<&str>,
    z_entries: Option<&str>,
    zm_values: Option<&str>,
) -> Result<Sequence> {
    match (file, json, z_entries, zm_values) {
        (Some(p), None, None, None) => read_json(p),
        (None, Some(s), None, None) => parse_json(s),
        (None, None, Some(e), None) => seq_z(e).map(Sequence::Z),
        (None, None, None, Some(v)) => seq_zm(v).map(Sequence::Zm),
        _ => Err(bad("give exactly one of --input, --json, --z-entries, --zm-values")),
    }
}

pub fn support_z(inline: Option<&str>, file: Option<&Path>) -> Result<SupportZ> {
    match (inline, file) {
        (Some(s), None) => SupportZ::from_symmetric(&parse_list::<i64>(s, "an integer")?),
        (None, Some(p)) => read_json(p),
        _ => Err(bad("give exactly one of -H and --support-file")),
    }
}

pub fn support_zm(modulus: Option<u64>, inline: Option<&str>, file: Option<&Path>) -> Result<SupportZm> {
    match (inline, file) {
        (Some(s), None) => {
            let m = modulus.ok_or_else(|| bad("-m is required with -H on ℤ_m"))?;
            SupportZm::new(m, parse_list::<i64>(s, "an integer")?)
        }
        (None, Some(p)) => {
            let h: SupportZm = read_json(p)?;
            match modulus {
                Some(m) if m != h.modulus() => {
                    Err(bad(format!("-m {m} contradicts modulus {} in {}", h.modulus(), p.display())))
                }
                _ => Ok(h),
            }
        }
        _ => Err(bad("give exactly one of -H and --support-file")),
    }
}

/// `"1..6"` (inclusive) or a single value.
pub fn range(s: &str) -> Result<std::ops::RangeInclusive<u64>> {
    let parse = |t: &str| t.trim().parse::<u64>().map_err(|_| bad(format!("cannot parse {t:?} in range {s:?}")));
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (parse(lo)?, parse(hi.trim_start_matches('='))?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if lo > hi {
        return Err(bad(format!("empty range {s:?}")));
    }
    Ok(lo..=hi)
}

pub struct GroupProblem {
    pub group: GroupDescriptor,
    pub z: GroupElement,
    pub omega: OmegaDescriptor,
}

pub fn group_problem(group: &str, z: &str, omega_inline: Option<&str>, omega_file: Option<&Path>) -> Result<GroupProblem> {
    let group = match group.trim_start().starts_with('{') {
        true => parse_json(group)?,
        false => group.parse::<GroupDescriptor>()?,
    };
    let z = group.parse_element(z)?;
    let omega = match (omega_inline, omega_file) {
        (Some(s), None) => parse_json(s)?,
        (None, Some(p)) => read_json(p)?,
        _ => return Err(bad("give exactly one of --omega and --omega-file")),
    };
    Ok(GroupProblem { group, z, omega })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_sequences() {
        let s = seq_z("-1=0.5, 0=1, 1=0.5").unwrap();
        assert_eq!(s.get(1), Complex64::new(0.5, 0.0));
        assert_eq!(s.len(), 3);
        let s = seq_zm("1,0.5i,0,-0.5i").unwrap();
        assert_eq!(s.modulus(), 4);
        assert_eq!(s.get(1), Complex64::new(0.0, 0.5));
        assert!(seq_z("1:0.5").is_err());
    }

    #[test]
    fn supports_are_validated() {
        assert!(support_z(Some("0,1,-1,5,-5"), None).is_ok());
        assert!(support_z(Some("0,1,-1,5"), None).is_err());
        assert_eq!(support_zm(Some(4), Some("0,1,3"), None).unwrap().len(), 3);
        assert!(support_zm(None, Some("0,1,-1"), None).is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(range("1..6").unwrap(), 1..=6);
        assert_eq!(range("1..=6").unwrap(), 1..=6);
        assert_eq!(range("4").unwrap(), 4..=4);
        assert!(range("6..1").is_err());
    }
}
