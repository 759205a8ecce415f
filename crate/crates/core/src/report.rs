//! Flat `key = value` reports and row-major matrix CSV.

use std::fmt::Write as _;

use crate::linalg::Mat;

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Ordered key-value report. Keys are emitted in insertion order so the
/// same inputs always give the same bytes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.text(key, fmt_f64(value))
    }

    pub fn int(&mut self, key: impl Into<String>, value: usize) -> &mut Self {
        self.text(key, value.to_string())
    }

    pub fn flag(&mut self, key: impl Into<String>, value: bool) -> &mut Self {
        self.text(key, if value { "true" } else { "false" })
    }

    /// Matrix as `RxC [v11, v12, ...]` in row-major order.
    pub fn matrix(&mut self, key: impl Into<String>, m: &Mat) -> &mut Self {
        let values: Vec<String> = row_major(m).map(fmt_f64).collect();
        self.text(key, format!("{}x{} [{}]", m.nrows(), m.ncols(), values.join(", ")))
    }

    pub fn extend(&mut self, prefix: &str, other: &Report) -> &mut Self {
        for (k, v) in &other.entries {
            self.entries.push((format!("{prefix}{k}"), v.clone()));
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn row_major(m: &Mat) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

/// One CSV row per matrix row.
pub fn matrix_csv(m: &Mat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 12345.678901234567, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn render_is_ordered_lf() {
        let mut r = Report::new();
        r.text("b", "x").int("a", 3).flag("c", true);
        assert_eq!(r.render(), "b = x\na = 3\nc = true\n");
        assert_eq!(r.get("a"), Some("3"));
    }

    #[test]
    fn matrix_formats() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mut r = Report::new();
        r.matrix("m", &m);
        assert!(r.get("m").unwrap().starts_with("2x2 [1.0000000000000000e0, 2.0"));
        let csv = matrix_csv(&m);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 2);
    }
}
