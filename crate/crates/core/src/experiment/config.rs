use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_SCHEMA: &str = "1";

fn schema() -> String {
    CONFIG_SCHEMA.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(default = "schema")]
    pub schema: String,
    pub bandlimit: usize,
    pub seed: u64,
    pub ensemble_size: usize,
    /// Curvature deviations `sup |K - 1|`, strictly decreasing.
    pub epsilon_levels: Vec<f64>,
    pub p_exponents: Vec<f64>,
    /// Metric distances for the two-metric experiment, strictly decreasing.
    pub delta_levels: Vec<f64>,
    pub l_max_perturbation: usize,
    /// Bandlimits of the convergence sweep.
    pub convergence_bandlimits: Vec<usize>,
    /// Multiplies every tolerance.
    pub tolerance_scale: f64,
    /// Per-record tolerance overrides, by record name.
    pub tolerances: BTreeMap<String, f64>,
    /// Use round members only.
    pub round_only: bool,
    /// Directions per basepoint in the geodesic check.
    pub geodesic_directions: usize,
    /// Random orthogonal candidates per Procrustes spot check.
    pub procrustes_trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: schema(),
            bandlimit: 24,
            seed: 7,
            ensemble_size: 16,
            epsilon_levels: vec![0.04, 0.02, 0.01],
            p_exponents: vec![4.0],
            delta_levels: vec![0.02, 0.01],
            l_max_perturbation: 6,
            convergence_bandlimits: vec![8, 12, 16, 24],
            tolerance_scale: 1.0,
            tolerances: BTreeMap::new(),
            round_only: false,
            geodesic_directions: 8,
            procrustes_trials: 1_000_000,
            output: None,
        }
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] > w[1])
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.schema != CONFIG_SCHEMA {
            return bad(format!("unsupported schema {:?}", self.schema));
        }
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be positive".into());
        }
        if self.epsilon_levels.is_empty()
            || !strictly_decreasing(&self.epsilon_levels)
            || self.epsilon_levels.iter().any(|e| !(*e > 0.0 && *e <= 0.2))
        {
            return bad("epsilon_levels must be strictly decreasing in (0, 0.2]".into());
        }
        if self.delta_levels.is_empty()
            || !strictly_decreasing(&self.delta_levels)
            || self.delta_levels.iter().any(|d| !(*d > 0.0 && *d < 1.0))
        {
            return bad("delta_levels must be strictly decreasing in (0, 1)".into());
        }
        if self.p_exponents.iter().any(|p| !(*p > 2.0) || !p.is_finite()) {
            return bad("p_exponents must exceed 2".into());
        }
        if !(self.tolerance_scale > 0.0) || !self.tolerance_scale.is_finite() {
            return bad("tolerance_scale must be positive".into());
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
            return bad(format!("tolerance {k} = {v} must be positive"));
        }
        if self.l_max_perturbation < 2 || self.l_max_perturbation > self.bandlimit {
            return bad("l_max_perturbation must be in 2..=bandlimit".into());
        }
        if self.geodesic_directions == 0 {
            return bad("geodesic_directions must be positive".into());
        }
        Ok(())
    }

    /// Tolerance for record `name`: the override if present, else `default`,
    /// times the global scale.
    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default) * self.tolerance_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_levels() {
        let c = ExperimentConfig {
            epsilon_levels: vec![0.01, 0.02],
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.tolerances.insert("x".into(), 0.0);
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn tolerance_override_and_scale() {
        let mut c = ExperimentConfig {
            tolerance_scale: 2.0,
            ..ExperimentConfig::default()
        };
        c.tolerances.insert("a".into(), 3.0);
        assert_eq!(c.tolerance("a", 1.0), 6.0);
        assert_eq!(c.tolerance("b", 1.0), 2.0);
    }
}
