//! Identity checks for a single conformal metric.

use super::report::{Record, Report};
use super::suite::{
    divergence_residual, ANCHOR_DIVERGENCE, ANCHOR_GEODESIC, ANCHOR_LIGHTCONE, ANCHOR_STRUCTURE, ANCHOR_UNIFORMIZE,
    ANCHOR_XI_ESTIMATE, FINITE_CEILING,
};
use crate::error::Result;
use crate::lightcone::geodesic::{geodesic_report, GeodesicOptions};
use crate::lightcone::lemma32::{lemma32_estimate_check, Exponents};
use crate::lightcone::structure_equation_report;
use crate::metric::ConformalMetric;
use crate::sht::Sphere;
use crate::uniformize::{uniformize, NewtonOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Directions for the geodesic check; `None` skips it.
    pub geodesics: Option<usize>,
    /// Exponents and `k` for the Ξ̂ estimate; `None` skips it.
    pub lemma32: Option<(Exponents, f64)>,
    pub tolerance_scale: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            geodesics: None,
            lemma32: None,
            tolerance_scale: 1.0,
            seed: 0,
        }
    }
}

/// Uniformize `m` at its basepoint and check every identity satisfied by the
/// normalized factor. Sub-operation failures become failed records.
pub fn verify_identities(sphere: &Sphere, m: &ConformalMetric, opts: &VerifyOptions) -> Result<Report> {
    let s = opts.tolerance_scale;
    let mut report = Report::new(sphere.bandlimit(), opts.seed);
    let r = match uniformize(sphere, m, &NewtonOptions::default()) {
        Ok(r) => r,
        Err(e) => {
            report.push(Record::error("uniformize", ANCHOR_UNIFORMIZE, 1e-9 * s, e));
            return Ok(report);
        }
    };
    let (v, g) = r.normalization_residual;
    report.push(Record::le(
        "uniformize.newton_residual",
        ANCHOR_UNIFORMIZE,
        r.residual_linf,
        1e-9 * s,
    ));
    report.push(Record::le(
        "uniformize.normalization",
        ANCHOR_UNIFORMIZE,
        (v.exp() - 1.0).abs().max(v.exp() * g),
        1e-9 * s,
    ));
    report.push(Record::le(
        "uniformize.curvature_mismatch",
        ANCHOR_UNIFORMIZE,
        r.curvature_mismatch,
        1e-8 * s,
    ));
    let u = &r.log_omega;

    match divergence_residual(sphere, u) {
        Ok(v) => report.push(Record::le("divergence_identity", ANCHOR_DIVERGENCE, v, 1e-8 * s)),
        Err(e) => report.push(Record::error("divergence_identity", ANCHOR_DIVERGENCE, 1e-8 * s, e)),
    }

    match structure_equation_report(sphere, u) {
        Ok(st) => {
            let rows = [
                ("lightcone.chibar_minus_xi", ANCHOR_LIGHTCONE, st.chibar_minus_xi, 1e-9),
                ("lightcone.chi_minus_g", ANCHOR_LIGHTCONE, st.chi_minus_g, 1e-9),
                ("lightcone.conjugacy", ANCHOR_LIGHTCONE, st.frame.conjugacy, 1e-10),
                (
                    "lightcone.null_frame",
                    ANCHOR_LIGHTCONE,
                    st.frame.null_l.max(st.frame.null_lb).max(st.frame.orthogonality),
                    1e-10,
                ),
                ("lightcone.trace", ANCHOR_STRUCTURE, st.trace, 1e-9),
                ("lightcone.gauss", ANCHOR_STRUCTURE, st.gauss, 1e-7),
                ("lightcone.codazzi", ANCHOR_STRUCTURE, st.codazzi, 1e-7),
                (
                    "lightcone.lemma_divergence",
                    ANCHOR_STRUCTURE,
                    st.lemma_divergence,
                    1e-6,
                ),
                (
                    "lightcone.divergence_consistency",
                    ANCHOR_STRUCTURE,
                    st.divergence_consistency,
                    1e-6,
                ),
            ];
            for (name, anchor, v, tol) in rows {
                report.push(Record::le(name, anchor, v, tol * s));
            }
        }
        Err(e) => report.push(Record::error("lightcone", ANCHOR_LIGHTCONE, 1e-9 * s, e)),
    }

    if let Some(n) = opts.geodesics {
        let q = m.basepoint.position();
        match geodesic_report(sphere, u, q, n, &GeodesicOptions::default()) {
            Ok(g) => report.push(
                Record::le("geodesic.transport", ANCHOR_GEODESIC, g.max_err, 1e-6 * s)
                    .with_detail(format!("{n} directions")),
            ),
            Err(e) => report.push(Record::error("geodesic.transport", ANCHOR_GEODESIC, 1e-6 * s, e)),
        }
    }

    if let Some((ex, k)) = opts.lemma32 {
        let name = "constant.xi_estimate";
        match lemma32_estimate_check(sphere, std::slice::from_ref(u), ex, k, None) {
            Ok(rep) => {
                report.push(Record::le(
                    name,
                    ANCHOR_XI_ESTIMATE,
                    rep.max_l2.value().unwrap_or(0.0),
                    FINITE_CEILING,
                ));
                if let Some(lp) = rep.max_lp {
                    report.push(Record::le(
                        "constant.xi_estimate_lp",
                        ANCHOR_XI_ESTIMATE,
                        lp.value().unwrap_or(0.0),
                        FINITE_CEILING,
                    ));
                }
            }
            Err(e) => report.push(Record::error(name, ANCHOR_XI_ESTIMATE, FINITE_CEILING, e)),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Basepoint;
    use crate::sht::Coeffs;

    #[test]
    fn analytic_metric_passes() {
        let s = Sphere::with_bandlimit(16).unwrap();
        let mut u = Coeffs::zeros(16);
        u.set(2, 0, 0.05);
        u.set(3, 1, -0.02);
        let m = ConformalMetric::new(u, Basepoint::new(0.7, 0.2));
        let opts = VerifyOptions {
            geodesics: Some(2),
            lemma32: Some((Exponents::new(4.0, 4.0, 4.0), 1.0)),
            ..VerifyOptions::default()
        };
        let r = verify_identities(&s, &m, &opts).unwrap();
        let bad: Vec<_> = r.failures().collect();
        assert!(bad.is_empty(), "{bad:#?}");
        assert!(r.records.iter().any(|x| x.name == "geodesic.transport"));
    }

    #[test]
    fn bad_exponents_are_recorded() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let opts = VerifyOptions {
            lemma32: Some((Exponents::new(1.5, 4.0, 4.0), 1.0)),
            ..VerifyOptions::default()
        };
        let r = verify_identities(&s, &ConformalMetric::round(8), &opts).unwrap();
        assert!(!r.all_pass());
    }
}
