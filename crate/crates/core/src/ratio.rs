//! Ratios of norms that may be exactly `0/0`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Numerators and denominators below this are treated as exact zeros.
pub const EXACT_ZERO: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Value(f64),
    /// Both sides vanish: the input was exactly round (or exactly matched).
    Exact,
}

impl Ratio {
    pub fn new(num: f64, den: f64) -> Self {
        if den.abs() <= EXACT_ZERO && num.abs() <= EXACT_ZERO.sqrt() {
            Self::Exact
        } else {
            Self::Value(num / den)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(v),
            Self::Exact => None,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Self::Exact)
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Value(v) => s.serialize_f64(*v),
            Self::Exact => s.serialize_str("exact"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(v) => Ok(Self::Value(v)),
            Raw::S(s) if s == "exact" => Ok(Self::Exact),
            Raw::S(s) => Err(serde::de::Error::custom(format!("bad ratio {s:?}"))),
        }
    }
}

/// Relative spread `(max - min) / min` of a set of positive values.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / min.abs()
}
