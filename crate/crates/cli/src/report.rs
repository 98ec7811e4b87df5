//! Run reports and their verdicts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a failed verdict means for the exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    Numerical,
    Hypothesis,
    /// Reported but never fails the run.
    Info,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub kind: VerdictKind,
    pub value: f64,
    pub comparison: Comparison,
    pub bound: f64,
    pub passed: bool,
}

impl Verdict {
    pub fn new(
        check: impl Into<String>,
        kind: VerdictKind,
        value: f64,
        comparison: Comparison,
        bound: f64,
    ) -> Self {
        let passed = match comparison {
            Comparison::AtMost => value <= bound,
            Comparison::AtLeast => value >= bound,
            Comparison::Above => value > bound,
        };
        Verdict {
            check: check.into(),
            kind,
            value,
            comparison,
            bound,
            passed,
        }
    }

    pub fn at_most(check: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(
            check,
            VerdictKind::Numerical,
            value,
            Comparison::AtMost,
            bound,
        )
    }

    pub fn at_least(check: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(
            check,
            VerdictKind::Numerical,
            value,
            Comparison::AtLeast,
            bound,
        )
    }

    pub fn flag(check: impl Into<String>, kind: VerdictKind, ok: bool) -> Self {
        Self::new(
            check,
            kind,
            if ok { 1.0 } else { 0.0 },
            Comparison::AtLeast,
            1.0,
        )
    }

    pub fn info(mut self) -> Self {
        self.kind = VerdictKind::Info;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    HypothesisFailure,
    NumericalFailure,
    ConfigError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::HypothesisFailure => 2,
            Status::NumericalFailure => 3,
            Status::ConfigError => 4,
        }
    }

    pub fn from_verdicts(verdicts: &[Verdict]) -> Self {
        let failed = |k: VerdictKind| verdicts.iter().any(|v| v.kind == k && !v.passed);
        if failed(VerdictKind::Numerical) {
            Status::NumericalFailure
        } else if failed(VerdictKind::Hypothesis) {
            Status::HypothesisFailure
        } else {
            Status::Pass
        }
    }
}

/// A numeric table. `plot` names the `(x, value, error)` columns used for
/// gnuplot output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<[usize; 3]>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            plot: None,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact_version: String,
    pub name: String,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub status: Status,
    pub passed: bool,
    /// Names of the failed numerical and hypothesis verdicts.
    pub failures: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub outputs: BTreeMap<String, serde_json::Value>,
    pub tables: Vec<Table>,
    /// Kept out of the JSON file so reports are byte-stable; written to
    /// `timings.json` instead.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(config: ExperimentConfig, experiment: ExperimentKind) -> Self {
        RunReport {
            artifact_version: ARTIFACT_VERSION.to_string(),
            name: config.name.clone(),
            experiment,
            config,
            status: Status::Pass,
            passed: true,
            failures: Vec::new(),
            verdicts: Vec::new(),
            outputs: BTreeMap::new(),
            tables: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn output(&mut self, key: impl Into<String>, value: impl Serialize) -> anyhow::Result<()> {
        self.outputs
            .insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn finish(&mut self) {
        self.status = Status::from_verdicts(&self.verdicts);
        self.passed = self.status == Status::Pass;
        self.failures = self
            .verdicts
            .iter()
            .filter(|v| !v.passed && v.kind != VerdictKind::Info)
            .map(|v| v.check.clone())
            .collect();
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_precedence() {
        let ok = Verdict::at_most("a", 1.0, 2.0);
        let hyp = Verdict::flag("h", VerdictKind::Hypothesis, false);
        let num = Verdict::at_least("n", 1.0, 2.0);
        assert_eq!(Status::from_verdicts(&[ok.clone()]), Status::Pass);
        assert_eq!(
            Status::from_verdicts(&[ok.clone(), hyp.clone()]),
            Status::HypothesisFailure
        );
        assert_eq!(
            Status::from_verdicts(&[hyp, num.clone()]),
            Status::NumericalFailure
        );
        assert_eq!(Status::from_verdicts(&[num.info()]), Status::Pass);
        assert_eq!(Status::NumericalFailure.exit_code(), 3);
    }

    #[test]
    fn nan_never_passes() {
        assert!(!Verdict::at_most("x", f64::NAN, 1.0).passed);
        assert!(!Verdict::at_least("x", f64::NAN, 1.0).passed);
    }
}
