//! Check records shared by `verify` and the acceptance suite.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Measured and recorded, not compared against anything.
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub check: String,
    pub status: Status,
    /// Non-finite values serialize as `null`.
    pub measured: f64,
    pub tolerance: Option<f64>,
}

impl Check {
    pub fn key(&self) -> String {
        format!("{}.{}", self.suite, self.check)
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Report => "INFO",
        };
        write!(f, "{status} {}.{}: {:.6e}", self.suite, self.check, self.measured)?;
        if let Some(t) = self.tolerance {
            write!(f, " (tol {t:.3e})")?;
        }
        Ok(())
    }
}

/// Accumulates the checks of one suite, applying tolerance overrides keyed
/// by `suite.check`.
pub struct Recorder<'a> {
    suite: &'static str,
    overrides: &'a BTreeMap<String, f64>,
    checks: Vec<Check>,
}

impl<'a> Recorder<'a> {
    pub fn new(suite: &'static str, overrides: &'a BTreeMap<String, f64>) -> Self {
        Self { suite, overrides, checks: Vec::new() }
    }

    fn tol(&self, check: &str, default: f64) -> f64 {
        self.overrides.get(&format!("{}.{check}", self.suite)).copied().unwrap_or(default)
    }

    fn push(&mut self, check: &str, status: Status, measured: f64, tolerance: Option<f64>) {
        self.checks.push(Check { suite: self.suite.to_string(), check: check.to_string(), status, measured, tolerance });
    }

    /// Passes iff `measured <= tol`; NaN fails.
    pub fn at_most(&mut self, check: &str, measured: f64, tol: f64) {
        let tol = self.tol(check, tol);
        let status = if measured <= tol { Status::Pass } else { Status::Fail };
        self.push(check, status, measured, Some(tol));
    }

    /// Passes iff `measured >= tol`; NaN fails.
    pub fn at_least(&mut self, check: &str, measured: f64, tol: f64) {
        let tol = self.tol(check, tol);
        let status = if measured >= tol { Status::Pass } else { Status::Fail };
        self.push(check, status, measured, Some(tol));
    }

    pub fn report(&mut self, check: &str, measured: f64) {
        self.push(check, Status::Report, measured, None);
    }

    pub fn error(&mut self, e: &crate::error::Error) {
        self.push(&format!("error: {e}"), Status::Fail, f64::NAN, None);
    }

    pub fn finish(self) -> Vec<Check> {
        self.checks
    }
}

/// Largest successive ratio `r[k+1] / r[k]`, ignoring pairs in which both
/// entries sit below `floor`. Zero when every value is at the floor.
pub fn worst_ratio(residuals: &[f64], floor: f64) -> f64 {
    residuals
        .windows(2)
        .filter(|w| !(w[0] < floor && w[1] < floor))
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_nan() {
        let mut o = BTreeMap::new();
        o.insert("s.a".to_string(), 10.0);
        let mut r = Recorder::new("s", &o);
        r.at_most("a", 5.0, 1.0);
        r.at_most("b", f64::NAN, 1.0);
        r.at_least("c", 2.0, 1.0);
        let c = r.finish();
        assert_eq!(c[0].status, Status::Pass);
        assert_eq!(c[0].tolerance, Some(10.0));
        assert_eq!(c[1].status, Status::Fail);
        assert_eq!(c[2].status, Status::Pass);
    }

    #[test]
    fn ratio_floor() {
        assert_eq!(worst_ratio(&[1e-16, 2e-16, 1e-16], 1e-12), 0.0);
        assert_eq!(worst_ratio(&[1.0, 0.5, 0.4], 1e-12), 0.8);
    }
}
