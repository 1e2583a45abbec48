//! JSON metric specifications.
//!
//! A perturbed metric is given through scalar potentials,
//! `h = a g̊ + 𝓛dA + 𝓛⋆dB`, with the three coefficient lists stored under
//! `trace`, `grad` and `curl`. Every smooth symmetric 2-tensor on the sphere
//! has this form.

use serde::{Deserialize, Serialize};

use super::{Basepoint, ConformalMetric, PerturbedMetric, SphereMetric};
use crate::error::{Error, Result};
use crate::sht::ops::{conformal_killing, grad_coeffs, hodge_star};
use crate::sht::{Coeffs, ComplexCoeff, Sphere};

pub const SCHEMA: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Conformal,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pullback {
    pub rotation: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    #[serde(default)]
    pub trace: Vec<ComplexCoeff>,
    #[serde(default)]
    pub grad: Vec<ComplexCoeff>,
    #[serde(default)]
    pub curl: Vec<ComplexCoeff>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub schema: String,
    #[serde(rename = "type")]
    pub kind: MetricKind,
    pub bandlimit: usize,
    #[serde(rename = "logOmega", default, skip_serializing_if = "Option::is_none")]
    pub log_omega: Option<Vec<ComplexCoeff>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<Basepoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pullback: Option<Pullback>,
}

impl MetricSpec {
    pub fn conformal(bandlimit: usize, u: &Coeffs, basepoint: Basepoint) -> Self {
        Self {
            schema: SCHEMA.into(),
            kind: MetricKind::Conformal,
            bandlimit,
            log_omega: Some(u.to_complex()),
            basepoint: Some(basepoint),
            h: None,
            pullback: None,
        }
    }

    pub fn perturbed(bandlimit: usize, trace: &Coeffs, grad: &Coeffs, curl: &Coeffs) -> Self {
        Self {
            schema: SCHEMA.into(),
            kind: MetricKind::Perturbed,
            bandlimit,
            log_omega: None,
            basepoint: None,
            h: Some(PotentialSpec {
                trace: trace.to_complex(),
                grad: grad.to_complex(),
                curl: curl.to_complex(),
            }),
            pullback: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::InvalidArgument(format!("unsupported schema {:?}", self.schema)));
        }
        match self.kind {
            MetricKind::Conformal if self.log_omega.is_none() || self.h.is_some() => Err(Error::InvalidArgument(
                "conformal metric needs logOmega and no h".into(),
            )),
            MetricKind::Perturbed if self.h.is_none() || self.log_omega.is_some() => Err(Error::InvalidArgument(
                "perturbed metric needs h and no logOmega".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn basepoint(&self) -> Basepoint {
        self.basepoint.unwrap_or(Basepoint::NORTH)
    }

    /// Realize the metric on `sphere`, applying the optional pullback.
    pub fn to_metric(&self, sphere: &Sphere) -> Result<SphereMetric> {
        self.validate()?;
        let lmax = self.bandlimit;
        let metric = match self.kind {
            MetricKind::Conformal => {
                let u = Coeffs::from_complex(lmax, self.log_omega.as_deref().unwrap_or(&[]))?;
                let m = ConformalMetric::new(u, self.basepoint());
                match &self.pullback {
                    Some(pb) => SphereMetric::Conformal(m.pullback(sphere, &pb.rotation)?),
                    None => SphereMetric::Conformal(m),
                }
            }
            MetricKind::Perturbed => {
                let h = self.h.as_ref().expect("validated");
                let a = sphere.synthesize(&Coeffs::from_complex(lmax, &h.trace)?)?;
                let da = grad_coeffs(sphere, &Coeffs::from_complex(lmax, &h.grad)?)?;
                let db = grad_coeffs(sphere, &Coeffs::from_complex(lmax, &h.curl)?)?;
                let la = conformal_killing(sphere, &da)?;
                let lb = conformal_killing(sphere, &hodge_star(&db))?;
                let n = sphere.len();
                let pm = PerturbedMetric {
                    h11: (0..n).map(|k| a[k] + la.t11[k] + lb.t11[k]).collect(),
                    h12: (0..n).map(|k| la.t12[k] + lb.t12[k]).collect(),
                    h22: (0..n).map(|k| a[k] - la.t11[k] - lb.t11[k]).collect(),
                };
                pm.validate()?;
                match &self.pullback {
                    Some(pb) => SphereMetric::Perturbed(pm.pullback(sphere, &pb.rotation)?),
                    None => SphereMetric::Perturbed(pm),
                }
            }
        };
        Ok(metric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conformal_round_trip() {
        let mut u = Coeffs::zeros(6);
        u.set(2, 0, 0.05);
        u.set(3, -1, 0.01);
        let spec = MetricSpec::conformal(6, &u, Basepoint::new(1.0, 0.5));
        let back = MetricSpec::from_json(&spec.to_json().unwrap()).unwrap();
        let s = Sphere::with_bandlimit(6).unwrap();
        match back.to_metric(&s).unwrap() {
            SphereMetric::Conformal(m) => {
                for (a, b) in m.log_omega.as_slice().iter().zip(u.as_slice()) {
                    assert!((a - b).abs() < 1e-15);
                }
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn rejects_unknown_fields_and_schema() {
        let bad = r#"{"schema":"1","type":"conformal","bandlimit":4,"logOmega":[],"extra":1}"#;
        assert!(MetricSpec::from_json(bad).is_err());
        let bad = r#"{"schema":"2","type":"conformal","bandlimit":4,"logOmega":[]}"#;
        assert!(MetricSpec::from_json(bad).is_err());
    }

    #[test]
    fn perturbed_trace_potential_is_conformal_scaling() {
        let s = Sphere::with_bandlimit(6).unwrap();
        let mut a = Coeffs::zeros(2);
        a.set(0, 0, 0.1);
        let spec = MetricSpec::perturbed(6, &a, &Coeffs::zeros(2), &Coeffs::zeros(2));
        let m = spec.to_metric(&s).unwrap().to_perturbed(&s).unwrap();
        let c = 0.1 / (4.0 * std::f64::consts::PI).sqrt();
        assert!(m.h11.iter().all(|x| (x - c).abs() < 1e-14));
        assert!(m.h12.iter().all(|x| x.abs() < 1e-14));
    }
}
