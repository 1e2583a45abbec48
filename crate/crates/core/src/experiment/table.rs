use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::Report;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    /// Empirical constants per ε or δ level.
    Constants,
    /// Residuals against the bandlimit.
    Convergence,
}

impl FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constants" => Ok(Self::Constants),
            "convergence" => Ok(Self::Convergence),
            other => Err(Error::InvalidArgument(format!(
                "unknown table kind {other:?} (expected constants or convergence)"
            ))),
        }
    }
}

pub const CONSTANTS_HEADER: [&str; 4] = ["check", "epsilon", "ratio", "anchor"];
pub const CONVERGENCE_HEADER: [&str; 4] = ["check", "bandlimit", "residual", "anchor"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// CSV with a header row and one row per matching record, in report order.
/// Constant rows carry the ε level, or the δ level for two-metric checks.
pub fn emit_table(report: &Report, which: TableKind) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match which {
        TableKind::Constants => {
            w.write_record(CONSTANTS_HEADER)?;
            for r in &report.records {
                let Some(check) = r.name.strip_prefix("constant.") else {
                    continue;
                };
                let level = opt(r.epsilon.or(r.delta));
                w.write_record([check, &level, &opt(r.value), &r.anchor])?;
            }
        }
        TableKind::Convergence => {
            w.write_record(CONVERGENCE_HEADER)?;
            for r in &report.records {
                let Some(check) = r.name.strip_prefix("convergence.") else {
                    continue;
                };
                let Some(l) = r.bandlimit else { continue };
                w.write_record([check, &l.to_string(), &opt(r.value), &r.anchor])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::report::{Record, PLUMBING};

    #[test]
    fn empty_report_gives_header_only() {
        let r = Report::new(8, 1);
        assert_eq!(
            emit_table(&r, TableKind::Constants).unwrap(),
            "check,epsilon,ratio,anchor\n"
        );
        assert_eq!(
            emit_table(&r, TableKind::Convergence).unwrap(),
            "check,bandlimit,residual,anchor\n"
        );
    }

    #[test]
    fn rows_follow_records() {
        let mut r = Report::new(8, 1);
        r.push(Record::le("constant.x", "a", 2.5, 10.0).with_epsilon(0.02));
        r.push(Record::le("other", PLUMBING, 1.0, 2.0));
        r.push(Record::le("convergence.y", "b", 1e-6, 1.0).with_bandlimit(12));
        let c = emit_table(&r, TableKind::Constants).unwrap();
        assert_eq!(c.lines().nth(1).unwrap(), "x,2e-2,2.5e0,a");
        assert_eq!(c.lines().count(), 2);
        let v = emit_table(&r, TableKind::Convergence).unwrap();
        assert_eq!(v.lines().nth(1).unwrap(), "y,12,1e-6,b");
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!("bogus".parse::<TableKind>().is_err());
        assert_eq!("constants".parse::<TableKind>().unwrap(), TableKind::Constants);
    }
}
