//! The Ξ tensor of a conformal factor and its realization as the null second
//! fundamental form of a cross-section of the Minkowski lightcone.
//!
//! Minkowski vectors are stored by Cartesian components `(t, x, y, z)` with
//! signature `(-, +, +, +)`. On the cone `r = t` the null coordinate vectors
//! are `∂_ū = (1, n)` and `∂_u = (1, -n)`, and the cross-section `ū = Ω` is the
//! image of `n ↦ Ω(n) (1, n)`.

pub mod geodesic;
pub mod lemma32;
pub mod ode;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metric::ConformalMetric;
use crate::metric::{gauss_curvature_from_log_omega, gauss_curvature_general, MetricContext};
use crate::sht::ops::{div_st, grad, grad_at, hessian_at};
use crate::sht::tensor::{nabla_round, Tensor};
use crate::sht::{Coeffs, OneFormField, STTensorField, Sphere};

/// `u`, its frame gradient and round Hessian at the grid nodes.
#[derive(Debug, Clone)]
pub struct LogOmegaJet {
    pub u: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub h11: Vec<f64>,
    pub h12: Vec<f64>,
    pub h22: Vec<f64>,
}

pub fn log_omega_jet(sphere: &Sphere, u: &Coeffs) -> Result<LogOmegaJet> {
    let uv = sphere.synthesize(u)?;
    let (u1, u2) = sphere.synthesize_gradient(u)?;
    let du = OneFormField {
        e1: u1.clone(),
        e2: u2.clone(),
    };
    let h = nabla_round(sphere, &du.to_tensor())?;
    let c = h.comps();
    Ok(LogOmegaJet {
        u: uv,
        u1,
        u2,
        h11: c[0].clone(),
        h12: c[1].iter().zip(&c[2]).map(|(a, b)| 0.5 * (a + b)).collect(),
        h22: c[3].clone(),
    })
}

/// Full frame components of Ξ with its round trace and trace-free part.
#[derive(Debug, Clone)]
pub struct XiTensor {
    pub xi11: Vec<f64>,
    pub xi12: Vec<f64>,
    pub xi22: Vec<f64>,
    pub hat: STTensorField,
    pub trace: Vec<f64>,
}

impl XiTensor {
    /// `K = -½ Ω^{-2} tr_g̊ Ξ`.
    pub fn curvature(&self, log_omega: &[f64]) -> Vec<f64> {
        self.trace
            .iter()
            .zip(log_omega)
            .map(|(t, u)| -0.5 * (-2.0 * u).exp() * t)
            .collect()
    }

    pub fn as_tensor(&self) -> Tensor {
        Tensor::from_comps(
            2,
            vec![
                self.xi11.clone(),
                self.xi12.clone(),
                self.xi12.clone(),
                self.xi22.clone(),
            ],
        )
        .expect("matching lengths")
    }
}

/// `Ξ = -g̊ + |du|²g̊ - 2du⊗du + 2∇̊²u` for `u = log Ω`.
pub fn xi_from_log_omega(sphere: &Sphere, u: &Coeffs) -> Result<XiTensor> {
    let j = log_omega_jet(sphere, u)?;
    Ok(xi_from_jet(&j))
}

pub fn xi_from_jet(j: &LogOmegaJet) -> XiTensor {
    let n = j.u.len();
    let mut xi11 = vec![0.0; n];
    let mut xi12 = vec![0.0; n];
    let mut xi22 = vec![0.0; n];
    for k in 0..n {
        let g2 = j.u1[k] * j.u1[k] + j.u2[k] * j.u2[k];
        xi11[k] = -1.0 + g2 - 2.0 * j.u1[k] * j.u1[k] + 2.0 * j.h11[k];
        xi12[k] = -2.0 * j.u1[k] * j.u2[k] + 2.0 * j.h12[k];
        xi22[k] = -1.0 + g2 - 2.0 * j.u2[k] * j.u2[k] + 2.0 * j.h22[k];
    }
    let hat = STTensorField {
        t11: (0..n).map(|k| 0.5 * (xi11[k] - xi22[k])).collect(),
        t12: xi12.clone(),
    };
    let trace = (0..n).map(|k| xi11[k] + xi22[k]).collect();
    XiTensor {
        xi11,
        xi12,
        xi22,
        hat,
        trace,
    }
}

/// `Ξ̂ = -Ω[2∇̊²Ω⁻¹ - (Δ̊Ω⁻¹) g̊]`, with `Ω⁻¹` expanded at the maximal degree.
pub fn xi_hat_alt(sphere: &Sphere, u: &Coeffs) -> Result<STTensorField> {
    let uv = sphere.synthesize(u)?;
    let w: Vec<f64> = uv.iter().map(|u| (-u).exp()).collect();
    let h = hessian_at(sphere, &w, sphere.max_degree())?;
    let c = h.comps();
    let n = uv.len();
    Ok(STTensorField {
        t11: (0..n).map(|k| -(uv[k].exp()) * (c[0][k] - c[3][k])).collect(),
        t12: (0..n).map(|k| -(uv[k].exp()) * (c[1][k] + c[2][k])).collect(),
    })
}

/// `ρ = div_g̊ Ξ̂ + Ω² dK`.
pub fn divergence_identity_residual(sphere: &Sphere, u: &Coeffs) -> Result<OneFormField> {
    let xi = xi_from_log_omega(sphere, u)?;
    let div = div_st(sphere, &xi.hat)?;
    let k = gauss_curvature_from_log_omega(sphere, u)?;
    let dk = grad(sphere, &k)?;
    let uv = sphere.synthesize(u)?;
    let n = uv.len();
    Ok(OneFormField {
        e1: (0..n).map(|i| div.e1[i] + (2.0 * uv[i]).exp() * dk.e1[i]).collect(),
        e2: (0..n).map(|i| div.e2[i] + (2.0 * uv[i]).exp() * dk.e2[i]).collect(),
    })
}

pub type FourVector = [Vec<f64>; 4];

fn minkowski(a: &FourVector, b: &FourVector, k: usize) -> f64 {
    -a[0][k] * b[0][k] + a[1][k] * b[1][k] + a[2][k] * b[2][k] + a[3][k] * b[3][k]
}

/// Null normals `L`, `L̲` and tangent vectors `∂̄_1`, `∂̄_2` (along `e_θ`, `e_φ`).
#[derive(Debug, Clone)]
pub struct NullFrame {
    pub l: FourVector,
    pub lb: FourVector,
    pub tangent: [FourVector; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullFrameResiduals {
    /// `sup |⟨L, L⟩|`
    pub null_l: f64,
    /// `sup |⟨L̲, L̲⟩|`
    pub null_lb: f64,
    /// `sup |⟨L̲, L⟩ + 2|`
    pub conjugacy: f64,
    /// `sup |⟨L, ∂̄_i⟩|, |⟨L̲, ∂̄_i⟩|`
    pub orthogonality: f64,
}

pub fn lightcone_frames(sphere: &Sphere, u: &Coeffs) -> Result<NullFrame> {
    let uv = sphere.synthesize(u)?;
    let (u1, u2) = sphere.synthesize_gradient(u)?;
    let n = uv.len();
    let zero = || -> FourVector { [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]] };
    let (mut l, mut lb) = (zero(), zero());
    let mut tangent = [zero(), zero()];
    for k in 0..n {
        let om = uv[k].exp();
        let x = sphere.grid.position[k];
        let e = [sphere.grid.e_theta[k], sphere.grid.e_phi[k]];
        // ∇̊Ω as a Cartesian vector
        let dom = [om * u1[k], om * u2[k]];
        let gvec: [f64; 3] = std::array::from_fn(|a| dom[0] * e[0][a] + dom[1] * e[1][a]);
        let g2 = dom[0] * dom[0] + dom[1] * dom[1];
        let q = g2 / (om * om);
        l[0][k] = om;
        lb[0][k] = (1.0 + q) / om;
        for a in 0..3 {
            l[a + 1][k] = om * x[a];
            lb[a + 1][k] = (-x[a] + q * x[a] + 2.0 * gvec[a] / om) / om;
        }
        for i in 0..2 {
            tangent[i][0][k] = dom[i];
            for a in 0..3 {
                tangent[i][a + 1][k] = dom[i] * x[a] + om * e[i][a];
            }
        }
    }
    Ok(NullFrame { l, lb, tangent })
}

impl NullFrame {
    pub fn residuals(&self) -> NullFrameResiduals {
        let n = self.l[0].len();
        let mut r = NullFrameResiduals {
            null_l: 0.0,
            null_lb: 0.0,
            conjugacy: 0.0,
            orthogonality: 0.0,
        };
        for k in 0..n {
            r.null_l = r.null_l.max(minkowski(&self.l, &self.l, k).abs());
            r.null_lb = r.null_lb.max(minkowski(&self.lb, &self.lb, k).abs());
            r.conjugacy = r.conjugacy.max((minkowski(&self.lb, &self.l, k) + 2.0).abs());
            for t in &self.tangent {
                r.orthogonality = r
                    .orthogonality
                    .max(minkowski(&self.l, t, k).abs())
                    .max(minkowski(&self.lb, t, k).abs());
            }
        }
        r
    }
}

/// `χ` and `χ̲` in the basis `∂̄_1, ∂̄_2`, components ordered `[11, 12, 21, 22]`.
#[derive(Debug, Clone)]
pub struct SecondForms {
    pub chi: [Vec<f64>; 4],
    pub chibar: [Vec<f64>; 4],
}

impl SecondForms {
    pub fn chibar_tensor(&self) -> Tensor {
        Tensor::from_comps(2, self.chibar.to_vec()).expect("matching lengths")
    }
}

fn second_form(sphere: &Sphere, v: &FourVector, tangent: &[FourVector; 2]) -> Result<[Vec<f64>; 4]> {
    let lmax = sphere.max_degree();
    let grads = v.iter().map(|c| grad_at(sphere, c, lmax)).collect::<Result<Vec<_>>>()?;
    let n = v[0].len();
    let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    for k in 0..n {
        for i in 0..2 {
            let dv: [f64; 4] = std::array::from_fn(|mu| if i == 0 { grads[mu].e1[k] } else { grads[mu].e2[k] });
            for j in 0..2 {
                let t = &tangent[j];
                out[2 * i + j][k] = -dv[0] * t[0][k] + dv[1] * t[1][k] + dv[2] * t[2][k] + dv[3] * t[3][k];
            }
        }
    }
    Ok(out)
}

/// `χ(X, Y) = ⟨D_X L, ∂̄_Y⟩`, `χ̲(X, Y) = ⟨D_X L̲, ∂̄_Y⟩`, with `D_X` the flat
/// derivative of the Cartesian components along the surface.
pub fn second_forms(sphere: &Sphere, u: &Coeffs) -> Result<SecondForms> {
    let frame = lightcone_frames(sphere, u)?;
    second_forms_from_frame(sphere, &frame)
}

pub fn second_forms_from_frame(sphere: &Sphere, frame: &NullFrame) -> Result<SecondForms> {
    Ok(SecondForms {
        chi: second_form(sphere, &frame.l, &frame.tangent)?,
        chibar: second_form(sphere, &frame.lb, &frame.tangent)?,
    })
}

/// Sup-norm residuals of the structure equations of the cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// `R_1212 - ½(g_11χ̲_22 + χ̲_11g_22 - g_21χ̲_12 - χ̲_21g_12)`
    pub gauss: f64,
    /// `∇_1χ̲_2k - ∇_2χ̲_1k`
    pub codazzi: f64,
    /// `K + ½ tr_g χ̲`
    pub trace: f64,
    /// `div χ̲̂ - ½ ∇ tr χ̲`
    pub lemma_divergence: f64,
    /// Difference between the previous vector and `Ω⁻²(div_g̊ Ξ̂ + Ω²dK)`.
    pub divergence_consistency: f64,
    /// `max |χ̲ - Ξ|`
    pub chibar_minus_xi: f64,
    /// `max |χ - g|`
    pub chi_minus_g: f64,
    pub frame: NullFrameResiduals,
}

impl StructureReport {
    pub fn max_structure_residual(&self) -> f64 {
        self.gauss.max(self.codazzi).max(self.trace).max(self.lemma_divergence)
    }
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

pub fn structure_equation_report(sphere: &Sphere, u: &Coeffs) -> Result<StructureReport> {
    let uv = sphere.synthesize(u)?;
    let (u1, u2) = sphere.synthesize_gradient(u)?;
    let n = uv.len();
    let om2: Vec<f64> = uv.iter().map(|u| (2.0 * u).exp()).collect();
    let k_liou = gauss_curvature_from_log_omega(sphere, u)?;
    let frame = lightcone_frames(sphere, u)?;
    let forms = second_forms_from_frame(sphere, &frame)?;
    let cb = &forms.chibar;
    let xi = xi_from_log_omega(sphere, u)?;

    let chibar_minus_xi = sup((0..n).flat_map(|k| {
        [
            cb[0][k] - xi.xi11[k],
            cb[1][k] - xi.xi12[k],
            cb[2][k] - xi.xi12[k],
            cb[3][k] - xi.xi22[k],
        ]
    }));
    let ch = &forms.chi;
    let chi_minus_g = sup((0..n).flat_map(|k| [ch[0][k] - om2[k], ch[1][k], ch[2][k], ch[3][k] - om2[k]]));

    // Gauss equation with the intrinsic curvature from the Christoffel path
    let pm = ConformalMetric::new(u.clone(), crate::metric::Basepoint::NORTH).to_perturbed(sphere)?;
    let k_gen = gauss_curvature_general(sphere, &pm)?;
    let gauss = sup((0..n).map(|k| {
        let r1212 = -k_gen[k] * om2[k] * om2[k];
        r1212 - 0.5 * om2[k] * (cb[0][k] + cb[3][k])
    }));

    // Codazzi with the conformal connection difference
    // △^m_ij = δ^m_i u_j + δ^m_j u_i - δ_ij u_m
    let cbt = forms.chibar_tensor();
    let ncb = nabla_round(sphere, &cbt)?;
    let du = [&u1, &u2];
    let delta = |m: usize, i: usize, j: usize, k: usize| -> f64 {
        let mut v = 0.0;
        if m == i {
            v += du[j][k];
        }
        if m == j {
            v += du[i][k];
        }
        if i == j {
            v -= du[m][k];
        }
        v
    };
    let cov = |i: usize, j: usize, l: usize, k: usize| -> f64 {
        let mut v = ncb.comps()[(i << 2) | (j << 1) | l][k];
        for m in 0..2 {
            v -= delta(m, i, j, k) * cb[2 * m + l][k] + delta(m, i, l, k) * cb[2 * j + m][k];
        }
        v
    };
    let codazzi = sup((0..n).flat_map(|k| {
        let cov = &cov;
        (0..2).map(move |l| cov(0, 1, l, k) - cov(1, 0, l, k))
    }));

    let tr_g: Vec<f64> = (0..n).map(|k| (cb[0][k] + cb[3][k]) / om2[k]).collect();
    let trace = sup((0..n).map(|k| k_liou[k] + 0.5 * tr_g[k]));

    // Lemma form through the general metric connection
    let ctx = MetricContext::new(sphere, &pm)?;
    let mut hat = cbt.clone();
    for k in 0..n {
        let half = 0.5 * (cb[0][k] + cb[3][k]);
        hat.comps_mut()[0][k] -= half;
        hat.comps_mut()[3][k] -= half;
    }
    let nh = ctx.nabla(sphere, &hat)?;
    let dtr = grad(sphere, &tr_g)?;
    let mut lemma = OneFormField::zeros(n);
    for k in 0..n {
        let d1 = (nh.comps()[0b000][k] + nh.comps()[0b110][k]) / om2[k];
        let d2 = (nh.comps()[0b001][k] + nh.comps()[0b111][k]) / om2[k];
        lemma.e1[k] = d1 - 0.5 * dtr.e1[k];
        lemma.e2[k] = d2 - 0.5 * dtr.e2[k];
    }
    let lemma_divergence = lemma.max_abs();
    let rho = divergence_identity_residual(sphere, u)?;
    let divergence_consistency =
        sup((0..n).flat_map(|k| [lemma.e1[k] - rho.e1[k] / om2[k], lemma.e2[k] - rho.e2[k] / om2[k]]));

    Ok(StructureReport {
        gauss,
        codazzi,
        trace,
        lemma_divergence,
        divergence_consistency,
        chibar_minus_xi,
        chi_minus_g,
        frame: frame.residuals(),
    })
}
