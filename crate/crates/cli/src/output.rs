use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};
use serde_json::Value;

/// Floats with 17 significant digits; everything else as `serde_json` writes it.
struct Fixed17;

impl Formatter for Fixed17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn write_null<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        CompactFormatter.write_null(writer)
    }
}

/// Decimal notation for moderate exponents, scientific otherwise; `null` for
/// values JSON cannot carry.
pub fn format_f64(v: f64) -> String {
    if !v.is_finite() {
        return "null".into();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let s = format!("{:.*}", (16 - exp) as usize, v);
        // Rounding can carry into a new leading digit.
        let digits = s.trim_start_matches('-').replace('.', "");
        let significant = digits.trim_start_matches('0').len();
        let s = if significant > 17 && exp < 16 { format!("{:.*}", (15 - exp) as usize, v) } else { s };
        if s.contains('.') {
            s
        } else {
            s + ".0"
        }
    } else {
        format!("{v:.16e}")
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17);
    value.serialize(&mut ser).expect("reports serialize");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Rows for `--format csv`.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv writes UTF-8")
    }
}

pub fn cell(v: f64) -> String {
    format_f64(v)
}

/// `"1 2 5"`: a support's positive half inside one CSV field.
pub fn half_cell(half: &[u64]) -> String {
    half.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_f64(std::f64::consts::FRAC_1_SQRT_2), "0.70710678118654757");
        assert_eq!(format_f64(1.0), "1.0000000000000000");
        assert_eq!(format_f64(0.5), "0.50000000000000000");
        assert_eq!(format_f64(-2.5e-9), "-2.5000000000000001e-9");
        assert_eq!(format_f64(0.0), "0.0");
        assert_eq!(format_f64(f64::NAN), "null");
    }

    #[test]
    fn round_trips() {
        for v in [0.1, 1.0 / 3.0, 123456.789, 9.999999999999999e-6, 1e300, -7.25e-12, 0.99999999999999989] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn json_uses_the_formatter() {
        let s = to_json(&serde_json::json!({"b": 0.5, "a": [1, 2.0]}));
        assert_eq!(s, r#"{"b":0.50000000000000000,"a":[1,2.0000000000000000]}"#);
    }
}
