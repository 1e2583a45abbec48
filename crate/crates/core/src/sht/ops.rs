//! Differential operators of the round sphere and the Sobolev scalings of the
//! `dY`, `⋆dY`, `𝓛dY`, `𝓛⋆dY` families.

use serde::{Deserialize, Serialize};

use super::coeffs::Coeffs;
use super::fields::{OneFormField, STTensorField};
use super::tensor::{nabla_round, nabla_round_iter, trace_first_pair, Tensor};
use super::transform::Sphere;
use crate::error::{Error, Result};

/// `λ_l = l(l+1)`.
pub fn lambda(l: usize) -> f64 {
    (l * (l + 1)) as f64
}

/// Gradient of a scalar field, analyzed at the scalar bandlimit.
pub fn grad(sphere: &Sphere, f: &[f64]) -> Result<OneFormField> {
    grad_at(sphere, f, sphere.bandlimit())
}

/// Gradient of grid values analyzed at degree `lmax`.
pub fn grad_at(sphere: &Sphere, f: &[f64], lmax: usize) -> Result<OneFormField> {
    grad_coeffs(sphere, &sphere.analyze(f, lmax)?)
}

/// Round Hessian `∇̊²f` of grid values whose expansion is taken to degree `lmax`.
pub fn hessian_at(sphere: &Sphere, f: &[f64], lmax: usize) -> Result<Tensor> {
    nabla_round(sphere, &grad_at(sphere, f, lmax)?.to_tensor())
}

pub fn grad_coeffs(sphere: &Sphere, c: &Coeffs) -> Result<OneFormField> {
    let (e1, e2) = sphere.synthesize_gradient(c)?;
    Ok(OneFormField { e1, e2 })
}

pub fn hodge_star(w: &OneFormField) -> OneFormField {
    OneFormField {
        e1: w.e2.iter().map(|x| -x).collect(),
        e2: w.e1.clone(),
    }
}

/// `Δ̊ = div∘grad`, so `Δ̊Y_l = -l(l+1) Y_l`.
pub fn laplacian_round(sphere: &Sphere, f: &[f64]) -> Result<Vec<f64>> {
    let mut c = sphere.analyze(f, sphere.bandlimit())?;
    laplacian_coeffs_in_place(&mut c);
    sphere.synthesize(&c)
}

pub fn laplacian_coeffs_in_place(c: &mut Coeffs) {
    for l in 0..=c.lmax() {
        let s = -lambda(l);
        for m in -(l as i64)..=(l as i64) {
            c.set(l, m, s * c.get(l, m));
        }
    }
}

/// `(𝓛ω)_ij = ½(∇̊_iω_j + ∇̊_jω_i) - ½(div ω) g̊_ij`.
pub fn conformal_killing(sphere: &Sphere, w: &OneFormField) -> Result<STTensorField> {
    let n = nabla_round(sphere, &w.to_tensor())?;
    Ok(STTensorField::from_tensor(&n))
}

pub fn div_one_form(sphere: &Sphere, w: &OneFormField) -> Result<Vec<f64>> {
    let n = nabla_round(sphere, &w.to_tensor())?;
    Ok(trace_first_pair(&n).into_comps().remove(0))
}

/// `(div T)_j = ∇̊^i T_ij` in the round metric.
pub fn div_st(sphere: &Sphere, t: &STTensorField) -> Result<OneFormField> {
    div_tensor2(sphere, &t.to_tensor())
}

pub fn div_tensor2(sphere: &Sphere, t: &Tensor) -> Result<OneFormField> {
    let n = nabla_round(sphere, t)?;
    Ok(OneFormField::from_tensor(&trace_first_pair(&n)))
}

/// The four basis families of 1-forms and trace-free symmetric 2-tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    #[serde(rename = "dY")]
    DY,
    #[serde(rename = "*dY")]
    StarDY,
    #[serde(rename = "LdY")]
    LDY,
    #[serde(rename = "L*dY")]
    LStarDY,
}

impl BasisKind {
    pub const ALL: [BasisKind; 4] = [Self::DY, Self::StarDY, Self::LDY, Self::LStarDY];

    /// Exponent offset `e` in the scaling `⟪b,b⟫_n ∼ λ^{n+e}`.
    pub fn scaling_offset(self) -> i32 {
        match self {
            Self::DY | Self::StarDY => 1,
            Self::LDY | Self::LStarDY => 2,
        }
    }
}

/// Basis element of the given family built from `Y_l^m`, as a frame tensor.
pub fn basis_element(sphere: &Sphere, l: usize, m: i64, kind: BasisKind) -> Result<Tensor> {
    if l == 0 || l > sphere.bandlimit() {
        return Err(Error::DegreeOutOfRange {
            max: sphere.bandlimit(),
            got: l,
        });
    }
    if l == 1 && matches!(kind, BasisKind::LDY | BasisKind::LStarDY) {
        return Err(Error::InvalidArgument(format!(
            "{kind:?} vanishes for l = 1 (conformal Killing fields of the round sphere)"
        )));
    }
    let d = grad_coeffs(sphere, &Coeffs::unit(l, l, m))?;
    Ok(match kind {
        BasisKind::DY => d.to_tensor(),
        BasisKind::StarDY => hodge_star(&d).to_tensor(),
        BasisKind::LDY => conformal_killing(sphere, &d)?.to_tensor(),
        BasisKind::LStarDY => conformal_killing(sphere, &hodge_star(&d))?.to_tensor(),
    })
}

/// `Σ_{k=0}^n ∫|∇̊^k T|² dvol_g̊`.
pub fn round_sobolev_sq(sphere: &Sphere, t: &Tensor, n: usize) -> Result<f64> {
    let ders = nabla_round_iter(sphere, t, n)?;
    Ok(ders.iter().map(|d| sphere.grid.integrate(&d.norm_sq_round())).sum())
}

/// `⟪b, b⟫_n` for the basis element of degree `l` (order 0; the value does not
/// depend on the order). Negative `n` uses the dual norm, which on these
/// eigen-elements reduces to `⟪b,b⟫_0² / ⟪b,b⟫_{|n|}`.
pub fn basis_norms(sphere: &Sphere, l: usize, n: i32, kind: BasisKind) -> Result<f64> {
    let b = basis_element(sphere, l, 0, kind)?;
    if n >= 0 {
        round_sobolev_sq(sphere, &b, n as usize)
    } else {
        let zero = round_sobolev_sq(sphere, &b, 0)?;
        let pos = round_sobolev_sq(sphere, &b, n.unsigned_abs() as usize)?;
        Ok(zero * zero / pos)
    }
}

/// Largest Rayleigh quotient `‖ω‖²_{1,2} / ‖𝓛ω‖²_{0,2}` over `dY_l`, `⋆dY_l`,
/// `2 ≤ l ≤ lmax`, returned as its square root.
pub fn elliptic_constant(sphere: &Sphere, lmax: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for l in 2..=lmax {
        let d = grad_coeffs(sphere, &Coeffs::unit(l, l, 0))?;
        for w in [d.clone(), hodge_star(&d)] {
            let num = round_sobolev_sq(sphere, &w.to_tensor(), 1)?;
            let lw = conformal_killing(sphere, &w)?;
            let den = lw.inner(&lw, sphere);
            worst = worst.max(num / den);
        }
    }
    Ok(worst.sqrt())
}

/// Smallest gain `‖𝓛b‖ / ‖b‖` over unit basis 1-forms with `2 ≤ l ≤ lmax`.
pub fn conformal_killing_min_gain(sphere: &Sphere, lmax: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for l in 2..=lmax {
        let d = grad_coeffs(sphere, &Coeffs::unit(l, l, 0))?;
        for w in [d.clone(), hodge_star(&d)] {
            let lw = conformal_killing(sphere, &w)?;
            best = best.min((lw.inner(&lw, sphere) / w.inner(&w, sphere)).sqrt());
        }
    }
    Ok(best)
}
