//! Empirical constants in the `L²` and `L^p` bounds of `Ξ̂` by
//! `‖Ω²‖_{1,·}‖K - k‖_{0,·}`, all norms taken in the round metric.

use serde::{Deserialize, Serialize};

use super::xi_from_log_omega;
use crate::error::{Error, Result};
use crate::metric::norms::sobolev_norm_ctx;
use crate::metric::{gauss_curvature_from_log_omega, MetricContext, PerturbedMetric};
use crate::ratio::Ratio;
use crate::sht::tensor::Tensor;
use crate::sht::{Coeffs, Sphere};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl Exponents {
    pub fn new(p: f64, q: f64, r: f64) -> Self {
        Self { p, q, r }
    }

    /// The `L²` bound uses `‖K - k‖_{0,p}` and `‖Ω²‖_{1,q}` and needs
    /// `p ≥ 2`, `1/p + 1/q < 1`.
    pub fn validate_l2(&self) -> Result<()> {
        let Self { p, q, .. } = *self;
        if !(p.is_finite() && q.is_finite()) || p < 2.0 || q <= 1.0 || 1.0 / p + 1.0 / q >= 1.0 {
            return Err(Error::ExponentConstraint(format!(
                "need p >= 2 and 1/p + 1/q < 1, got p = {p}, q = {q}"
            )));
        }
        Ok(())
    }

    /// The `L^p` bound uses `‖K - k‖_{0,q}` and `‖Ω²‖_{1,r}` and needs
    /// `1/q + 1/r = ½ + 1/p`, `q ≥ p > 2`.
    pub fn validate_lp(&self) -> Result<()> {
        let Self { p, q, r } = *self;
        let ok = p.is_finite()
            && q.is_finite()
            && r.is_finite()
            && p > 2.0
            && q >= p
            && r > 1.0
            && (1.0 / q + 1.0 / r - 0.5 - 1.0 / p).abs() < 1e-12;
        if !ok {
            return Err(Error::ExponentConstraint(format!(
                "need 1/q + 1/r = 1/2 + 1/p and q >= p > 2, got p = {p}, q = {q}, r = {r}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberRatios {
    pub l2: Ratio,
    /// `None` when the exponents do not admit the `L^p` bound.
    pub lp: Option<Ratio>,
    pub mean_k: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma32Report {
    pub exponents: Exponents,
    pub k: f64,
    pub lp_applicable: bool,
    pub members: Vec<MemberRatios>,
    pub max_l2: Ratio,
    pub max_lp: Option<Ratio>,
    /// Indices of members whose ratio exceeds the ceiling.
    pub exceeding: Vec<usize>,
}

/// Norms entering the ratios for one conformal factor.
struct MemberNorms {
    xi_hat: Tensor,
    omega2: Tensor,
    k: Vec<f64>,
}

fn member_norms(sphere: &Sphere, u: &Coeffs) -> Result<MemberNorms> {
    let xi = xi_from_log_omega(sphere, u)?;
    let uv = sphere.synthesize(u)?;
    Ok(MemberNorms {
        xi_hat: xi.hat.to_tensor(),
        omega2: Tensor::scalar(uv.iter().map(|u| (2.0 * u).exp()).collect()),
        k: gauss_curvature_from_log_omega(sphere, u)?,
    })
}

fn ratios_for(
    sphere: &Sphere,
    ctx: &MetricContext,
    m: &MemberNorms,
    e: &Exponents,
    k: f64,
    lp: bool,
) -> Result<MemberRatios> {
    let kk = Tensor::scalar(m.k.iter().map(|v| v - k).collect());
    let xi2 = sobolev_norm_ctx(sphere, ctx, &m.xi_hat, 0, 2.0, true)?;
    let om_q = sobolev_norm_ctx(sphere, ctx, &m.omega2, 1, e.q, true)?;
    let k_p = sobolev_norm_ctx(sphere, ctx, &kk, 0, e.p, true)?;
    let l2 = Ratio::new(xi2, om_q * k_p);
    let lp = if lp {
        let xip = sobolev_norm_ctx(sphere, ctx, &m.xi_hat, 0, e.p, true)?;
        let om_r = sobolev_norm_ctx(sphere, ctx, &m.omega2, 1, e.r, true)?;
        let k_q = sobolev_norm_ctx(sphere, ctx, &kk, 0, e.q, true)?;
        Some(Ratio::new(xip, om_r * k_q))
    } else {
        None
    };
    let mean_k = sphere.grid.integrate(&m.k) / (4.0 * std::f64::consts::PI);
    Ok(MemberRatios { l2, lp, mean_k })
}

fn max_ratio<'a>(it: impl Iterator<Item = &'a Ratio>) -> Ratio {
    it.fold(Ratio::Exact, |a, r| match (a.value(), r.value()) {
        (None, _) => *r,
        (Some(_), None) => a,
        (Some(x), Some(y)) => {
            if y > x {
                *r
            } else {
                a
            }
        }
    })
}

/// Ratios of `‖Ξ̂‖` to the right-hand sides of both bounds for every member.
/// The `L²` exponents must be admissible; the `L^p` ratio is reported only
/// when `(p, q, r)` satisfies its constraint.
pub fn lemma32_estimate_check(
    sphere: &Sphere,
    members: &[Coeffs],
    exponents: Exponents,
    k: f64,
    ceiling: Option<f64>,
) -> Result<Lemma32Report> {
    exponents.validate_l2()?;
    let lp_applicable = exponents.validate_lp().is_ok();
    let round = PerturbedMetric::round(sphere.len());
    let ctx = MetricContext::new(sphere, &round)?;
    let mut out = Vec::with_capacity(members.len());
    for u in members {
        let m = member_norms(sphere, u)?;
        out.push(ratios_for(sphere, &ctx, &m, &exponents, k, lp_applicable)?);
    }
    let max_l2 = max_ratio(out.iter().map(|m| &m.l2));
    let max_lp = lp_applicable.then(|| max_ratio(out.iter().filter_map(|m| m.lp.as_ref())));
    let exceeding = match ceiling {
        Some(c) => out
            .iter()
            .enumerate()
            .filter(|(_, m)| m.l2.value().is_some_and(|v| v > c) || m.lp.and_then(|r| r.value()).is_some_and(|v| v > c))
            .map(|(i, _)| i)
            .collect(),
        None => Vec::new(),
    };
    Ok(Lemma32Report {
        exponents,
        k,
        lp_applicable,
        members: out,
        max_l2,
        max_lp,
        exceeding,
    })
}

/// `L²` ratio of a single member as a function of `k`.
pub fn k_sweep(sphere: &Sphere, u: &Coeffs, exponents: Exponents, ks: &[f64]) -> Result<Vec<(f64, Ratio)>> {
    exponents.validate_l2()?;
    let round = PerturbedMetric::round(sphere.len());
    let ctx = MetricContext::new(sphere, &round)?;
    let m = member_norms(sphere, u)?;
    ks.iter()
        .map(|&k| Ok((k, ratios_for(sphere, &ctx, &m, &exponents, k, false)?.l2)))
        .collect()
}

/// Mean of `K` against the round area form.
pub fn mean_curvature_round(sphere: &Sphere, u: &Coeffs) -> Result<f64> {
    let k = gauss_curvature_from_log_omega(sphere, u)?;
    Ok(sphere.grid.integrate(&k) / (4.0 * std::f64::consts::PI))
}
