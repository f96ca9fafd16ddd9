//! Annealing envelopes `A(s)`, `B(s)` in GHz.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::Hermite;

/// One row of a schedule table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Knot {
    pub s: f64,
    pub a_ghz: f64,
    pub b_ghz: f64,
}

#[derive(Clone, Debug)]
pub struct Schedule {
    knots: Vec<Knot>,
    name: String,
    a: Hermite,
    b: Hermite,
}

const DEFAULT_A: [f64; 11] = [8.0, 6.0, 4.4, 3.1, 2.1, 1.3, 0.75, 0.38, 0.16, 0.05, 0.0];
const DEFAULT_B: [f64; 11] = [0.0, 0.3, 0.8, 1.6, 2.6, 3.9, 5.4, 7.2, 9.2, 11.5, 14.0];

pub const DEFAULT_SCHEDULE_NAME: &str = "default-synthetic";

pub const CSV_HEADER: &str = "s,A_GHz,B_GHz";

impl Schedule {
    /// Validated schedule: strictly increasing `s` from 0 to 1, `A` non-increasing,
    /// `B` non-decreasing, non-negative endpoints, `A(0) > B(0)` and `B(1) > A(1)`.
    pub fn new(knots: Vec<Knot>, name: impl Into<String>) -> Result<Self> {
        check_knots(&knots, true)?;
        Self::build(knots, name.into())
    }

    /// Same as [`Schedule::new`] without the `A(0) > B(0)`, `B(1) > A(1)` ordering;
    /// used for pinned and single-envelope test schedules.
    pub fn relaxed(knots: Vec<Knot>, name: impl Into<String>) -> Result<Self> {
        check_knots(&knots, false)?;
        Self::build(knots, name.into())
    }

    /// Constant envelopes over the whole anneal.
    pub fn constant(a_ghz: f64, b_ghz: f64) -> Result<Self> {
        let knots = vec![
            Knot { s: 0.0, a_ghz, b_ghz },
            Knot { s: 1.0, a_ghz, b_ghz },
        ];
        Self::relaxed(knots, format!("constant(A={a_ghz},B={b_ghz})"))
    }

    fn build(knots: Vec<Knot>, name: String) -> Result<Self> {
        let s: Vec<f64> = knots.iter().map(|k| k.s).collect();
        let a = Hermite::monotone_scalar(&s, &knots.iter().map(|k| k.a_ghz).collect::<Vec<_>>())?;
        let b = Hermite::monotone_scalar(&s, &knots.iter().map(|k| k.b_ghz).collect::<Vec<_>>())?;
        Ok(Self { knots, name, a, b })
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_default(&self) -> bool {
        self.name == DEFAULT_SCHEDULE_NAME
    }

    /// `(A(s), B(s))` in GHz.
    pub fn evaluate(&self, s: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!(
                "s = {s} outside [0, 1]"
            )));
        }
        Ok(self.at(s))
    }

    /// Unchecked evaluation; `s` is clamped to `[0, 1]`.
    pub fn at(&self, s: f64) -> (f64, f64) {
        (self.a.eval(s).max(0.0), self.b.eval(s).max(0.0))
    }

    /// `(dA/ds, dB/ds)`.
    pub fn derivative(&self, s: f64) -> (f64, f64) {
        (self.a.deriv(s), self.b.deriv(s))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for k in &self.knots {
            let _ = writeln!(out, "{},{},{}", k.s, k.a_ghz, k.b_ghz);
        }
        out
    }

    pub fn from_csv(text: &str, name: impl Into<String>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let expected: Vec<&str> = CSV_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Validation {
                row: 0,
                reason: format!("header must be '{CSV_HEADER}'"),
            });
        }
        let mut knots = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Validation {
                        row: row + 1,
                        reason: format!("unparseable value in column {}", expected[i]),
                    })
            };
            knots.push(Knot {
                s: field(0)?,
                a_ghz: field(1)?,
                b_ghz: field(2)?,
            });
        }
        Self::new(knots, name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        Self::from_csv(&std::fs::read_to_string(path)?, name)
    }

    /// `"default"` selects the built-in table, anything else is read as a CSV path.
    pub fn from_flag(flag: &str) -> Result<Self> {
        if flag == "default" {
            Ok(default_schedule())
        } else {
            Self::load(Path::new(flag))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Rows are reported 1-based (row 0 is the header).
fn check_knots(knots: &[Knot], ordering: bool) -> Result<()> {
    let bad = |row: usize, reason: String| Error::Validation { row: row + 1, reason };
    if knots.len() < 2 {
        return Err(bad(0, "schedule needs at least two knots".into()));
    }
    for (row, k) in knots.iter().enumerate() {
        if !(k.s.is_finite() && k.a_ghz.is_finite() && k.b_ghz.is_finite()) {
            return Err(bad(row, "non-finite value".into()));
        }
        if !(0.0..=1.0).contains(&k.s) {
            return Err(bad(row, format!("s = {} outside [0, 1]", k.s)));
        }
        if k.a_ghz < 0.0 || k.b_ghz < 0.0 {
            return Err(bad(row, "envelopes must be non-negative".into()));
        }
    }
    if knots[0].s != 0.0 {
        return Err(bad(0, "first knot must be at s = 0".into()));
    }
    let last = knots.len() - 1;
    if knots[last].s != 1.0 {
        return Err(bad(last, "last knot must be at s = 1".into()));
    }
    for (row, w) in knots.windows(2).enumerate() {
        if !(w[1].s > w[0].s) {
            return Err(bad(row + 1, "s must be strictly increasing".into()));
        }
        if w[1].a_ghz > w[0].a_ghz {
            return Err(bad(row + 1, "A increases".into()));
        }
        if w[1].b_ghz < w[0].b_ghz {
            return Err(bad(row + 1, "B decreases".into()));
        }
    }
    if ordering {
        if !(knots[0].a_ghz > knots[0].b_ghz) {
            return Err(bad(0, "need A(0) > B(0)".into()));
        }
        if !(knots[last].b_ghz > knots[last].a_ghz) {
            return Err(bad(last, "need B(1) > A(1)".into()));
        }
    }
    Ok(())
}

/// Built-in synthetic table with roughly exponential `A` decay (not measured data).
pub fn default_schedule() -> Schedule {
    let knots = (0..11)
        .map(|k| Knot {
            s: k as f64 / 10.0,
            a_ghz: DEFAULT_A[k],
            b_ghz: DEFAULT_B[k],
        })
        .collect();
    Schedule::new(knots, DEFAULT_SCHEDULE_NAME).expect("default schedule is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_at_knots() {
        let sch = default_schedule();
        for k in sch.knots() {
            assert_eq!(sch.evaluate(k.s).unwrap(), (k.a_ghz, k.b_ghz));
        }
        let (a1, _) = sch.evaluate(1.0).unwrap();
        assert!(a1.abs() < 1e-12);
    }

    #[test]
    fn out_of_range_is_a_domain_error() {
        let sch = default_schedule();
        assert!(sch.evaluate(-0.01).is_err());
        assert!(sch.evaluate(1.01).is_err());
    }

    #[test]
    fn dense_grid_monotonicity() {
        let sch = default_schedule();
        let (mut pa, mut pb) = (f64::INFINITY, -1.0);
        for k in 0..=10_000 {
            let (a, b) = sch.evaluate(k as f64 / 10_000.0).unwrap();
            assert!(a <= pa && b >= pb);
            pa = a;
            pb = b;
        }
    }

    #[test]
    fn continuity() {
        let sch = default_schedule();
        for k in 1..100 {
            let s = k as f64 / 100.0 + 0.003;
            let (a0, b0) = sch.at(s);
            let (a1, b1) = sch.at(s + 1e-9);
            assert!((a1 - a0).abs() < 1e-6 && (b1 - b0).abs() < 1e-6);
        }
    }

    #[test]
    fn default_decays_a_by_two_orders() {
        let sch = default_schedule();
        let (a0, _) = sch.at(0.0);
        let (a95, _) = sch.at(0.95);
        assert!(a0 / a95 >= 100.0, "A(0)/A(0.95) = {}", a0 / a95);
    }

    #[test]
    fn csv_round_trip() {
        let text = default_schedule().to_csv();
        let back = Schedule::from_csv(&text, "x").unwrap();
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn increasing_a_is_rejected_with_row() {
        let text = "s,A_GHz,B_GHz\n0,5,0\n0.5,6,1\n1,0,2\n";
        match Schedule::from_csv(text, "bad") {
            Err(Error::Validation { row, reason }) => {
                assert_eq!(row, 2);
                assert!(reason.contains("A increases"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_endpoint_is_rejected() {
        let text = "s,A_GHz,B_GHz\n0,5,0\n0.5,1,2\n";
        assert!(matches!(
            Schedule::from_csv(text, "bad"),
            Err(Error::Validation { row: 2, .. })
        ));
        let text = "s,A_GHz,B_GHz\n0,5,0\n1.5,1,2\n";
        assert!(Schedule::from_csv(text, "bad").is_err());
    }

    #[test]
    fn derivative_signs() {
        let sch = default_schedule();
        for k in 0..=20 {
            let (da, db) = sch.derivative(k as f64 / 20.0);
            assert!(da <= 1e-12 && db >= -1e-12);
        }
    }
}
