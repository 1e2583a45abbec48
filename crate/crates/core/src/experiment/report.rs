use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const REPORT_SCHEMA: &str = "1";

/// Tag for records that check harness behaviour rather than a geometric fact.
pub const PLUMBING: &str = "plumbing";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// Pass when `value ≤ tolerance`.
    Le,
    /// Pass when `value ≥ tolerance`.
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub name: String,
    /// Short tag naming the identity or bound being checked.
    pub anchor: String,
    /// `None` for non-finite values and for failed sub-operations.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandlimit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Record {
    pub fn le(name: &str, anchor: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, anchor, value, tolerance, Comparison::Le)
    }

    pub fn ge(name: &str, anchor: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, anchor, value, tolerance, Comparison::Ge)
    }

    fn new(name: &str, anchor: &str, value: f64, tolerance: f64, comparison: Comparison) -> Self {
        let pass = value.is_finite()
            && match comparison {
                Comparison::Le => value <= tolerance,
                Comparison::Ge => value >= tolerance,
            };
        Self {
            name: name.into(),
            anchor: anchor.into(),
            value: value.is_finite().then_some(value),
            tolerance,
            comparison,
            pass,
            epsilon: None,
            delta: None,
            bandlimit: None,
            detail: None,
        }
    }

    /// A failed sub-operation, kept in the report.
    pub fn error(name: &str, anchor: &str, tolerance: f64, err: impl std::fmt::Display) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            value: None,
            tolerance,
            comparison: Comparison::Le,
            pass: false,
            epsilon: None,
            delta: None,
            bandlimit: None,
            detail: Some(format!("error: {err}")),
        }
    }

    pub fn with_epsilon(mut self, e: f64) -> Self {
        self.epsilon = Some(e);
        self
    }

    pub fn with_delta(mut self, d: f64) -> Self {
        self.delta = Some(d);
        self
    }

    pub fn with_bandlimit(mut self, l: usize) -> Self {
        self.bandlimit = Some(l);
        self
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub version: String,
    pub bandlimit: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub total_seconds: f64,
    pub sections: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub environment: Environment,
    pub records: Vec<Record>,
    #[serde(default)]
    pub timing: Timing,
}

impl Report {
    pub fn new(bandlimit: usize, seed: u64) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            environment: Environment {
                version: env!("CARGO_PKG_VERSION").into(),
                bandlimit,
                seed,
            },
            records: Vec::new(),
            timing: Timing::default(),
        }
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the timing block zeroed, for reproducibility comparisons.
    pub fn to_json_without_timing(&self) -> Result<String> {
        let mut r = self.clone();
        r.timing = Timing::default();
        r.to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_rules() {
        assert!(Record::le("a", PLUMBING, 1.0, 2.0).pass);
        assert!(!Record::le("a", PLUMBING, 3.0, 2.0).pass);
        assert!(Record::ge("a", PLUMBING, 3.0, 2.0).pass);
        let nan = Record::le("a", PLUMBING, f64::NAN, 2.0);
        assert!(!nan.pass && nan.value.is_none());
        assert!(!Record::error("a", PLUMBING, 1.0, "boom").pass);
    }

    #[test]
    fn json_round_trip_and_timing_strip() {
        let mut r = Report::new(8, 3);
        r.push(Record::le("x", PLUMBING, 0.5, 1.0).with_epsilon(0.1));
        r.timing.total_seconds = 4.0;
        let back = Report::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let mut r2 = r.clone();
        r2.timing.total_seconds = 9.0;
        assert_eq!(
            r.to_json_without_timing().unwrap(),
            r2.to_json_without_timing().unwrap()
        );
    }
}
