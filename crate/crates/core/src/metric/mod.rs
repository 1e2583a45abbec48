//! Metrics on the sphere: conformal (`g = e^{2u} g̊`) and perturbed
//! (`g = g̊ + h`), their Gauss curvature, Christoffel differences and Sobolev
//! norms.

pub(crate) mod norms;
pub mod spec;

pub use norms::{metric_distance, sobolev_norm, MetricContext};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sht::ops::laplacian_coeffs_in_place;
use crate::sht::tensor::{base_digits, nabla_round, Tensor};
use crate::sht::{eval_point, Coeffs, Sphere};

/// Point of the sphere in colatitude/longitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Basepoint {
    pub theta: f64,
    pub phi: f64,
}

impl Basepoint {
    pub const NORTH: Basepoint = Basepoint { theta: 0.0, phi: 0.0 };

    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn position(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Orthonormal tangent frame `(e_θ, e_φ)`; at a pole the longitude still
    /// selects the frame.
    pub fn frame(&self) -> ([f64; 3], [f64; 3]) {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        ([ct * cp, ct * sp, -st], [-sp, cp, 0.0])
    }

    pub fn from_position(x: [f64; 3]) -> Self {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        Self {
            theta: (x[2] / r).clamp(-1.0, 1.0).acos(),
            phi: x[1].atan2(x[0]),
        }
    }
}

/// `g = e^{2u} g̊` with `u = log Ω` given by real harmonic coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMetric {
    pub log_omega: Coeffs,
    pub basepoint: Basepoint,
}

impl ConformalMetric {
    pub fn new(log_omega: Coeffs, basepoint: Basepoint) -> Self {
        Self { log_omega, basepoint }
    }

    pub fn round(lmax: usize) -> Self {
        Self::new(Coeffs::zeros(lmax), Basepoint::NORTH)
    }

    pub fn log_omega_values(&self, sphere: &Sphere) -> Result<Vec<f64>> {
        sphere.synthesize(&self.log_omega)
    }

    /// `∫ Ω² dvol_g̊`.
    pub fn area(&self, sphere: &Sphere) -> Result<f64> {
        let u = self.log_omega_values(sphere)?;
        let e: Vec<f64> = u.iter().map(|x| (2.0 * x).exp()).collect();
        Ok(sphere.grid.integrate(&e))
    }

    pub fn to_perturbed(&self, sphere: &Sphere) -> Result<PerturbedMetric> {
        let u = self.log_omega_values(sphere)?;
        let a: Vec<f64> = u.iter().map(|x| (2.0 * x).exp() - 1.0).collect();
        Ok(PerturbedMetric {
            h11: a.clone(),
            h12: vec![0.0; a.len()],
            h22: a,
        })
    }

    /// Pullback `ρ*g` under `ρ(x) = R x`: the factor becomes `u ∘ ρ`.
    pub fn pullback(&self, sphere: &Sphere, rotation: &[[f64; 3]; 3]) -> Result<Self> {
        let vals: Vec<f64> = sphere
            .grid
            .position
            .iter()
            .map(|x| eval_point(&self.log_omega, mat_vec(rotation, x)).value)
            .collect();
        let log_omega = sphere.analyze(&vals, self.log_omega.lmax())?;
        let q = mat_vec(&transpose(rotation), &self.basepoint.position());
        Ok(Self::new(log_omega, Basepoint::from_position(q)))
    }
}

/// `g = g̊ + h` with `h` given by frame components at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedMetric {
    pub h11: Vec<f64>,
    pub h12: Vec<f64>,
    pub h22: Vec<f64>,
}

/// Either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum SphereMetric {
    Conformal(ConformalMetric),
    Perturbed(PerturbedMetric),
}

impl SphereMetric {
    pub fn to_perturbed(&self, sphere: &Sphere) -> Result<PerturbedMetric> {
        match self {
            Self::Conformal(c) => c.to_perturbed(sphere),
            Self::Perturbed(p) => Ok(p.clone()),
        }
    }
}

impl From<ConformalMetric> for SphereMetric {
    fn from(m: ConformalMetric) -> Self {
        Self::Conformal(m)
    }
}

impl From<PerturbedMetric> for SphereMetric {
    fn from(m: PerturbedMetric) -> Self {
        Self::Perturbed(m)
    }
}

impl PerturbedMetric {
    pub fn round(n: usize) -> Self {
        Self {
            h11: vec![0.0; n],
            h12: vec![0.0; n],
            h22: vec![0.0; n],
        }
    }

    /// Symmetric part of a rank-2 frame tensor taken as `h`.
    pub fn from_tensor(h: &Tensor) -> Self {
        assert_eq!(h.rank(), 2);
        let c = h.comps();
        Self {
            h11: c[0].clone(),
            h12: c[1].iter().zip(&c[2]).map(|(a, b)| 0.5 * (a + b)).collect(),
            h22: c[3].clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.h11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h11.is_empty()
    }

    pub fn h_tensor(&self) -> Tensor {
        Tensor::from_comps(
            2,
            vec![self.h11.clone(), self.h12.clone(), self.h12.clone(), self.h22.clone()],
        )
        .expect("matching lengths")
    }

    /// Frame matrix of `g` at a node.
    pub fn g_at(&self, k: usize) -> [[f64; 2]; 2] {
        [[1.0 + self.h11[k], self.h12[k]], [self.h12[k], 1.0 + self.h22[k]]]
    }

    /// Fails unless both eigenvalues of `g` are positive at every node.
    pub fn validate(&self) -> Result<()> {
        for k in 0..self.len() {
            let g = self.g_at(k);
            let tr = g[0][0] + g[1][1];
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            let min_eig = 0.5 * tr - disc;
            if !(min_eig > 0.0) {
                return Err(Error::NotPositiveDefinite { node: k, min_eig });
            }
        }
        Ok(())
    }

    pub fn det(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let g = self.g_at(k);
                g[0][0] * g[1][1] - g[0][1] * g[1][0]
            })
            .collect()
    }

    /// `√(det g / det g̊)`, the density of `dvol_g` against `dvol_g̊`.
    pub fn density(&self) -> Vec<f64> {
        self.det().into_iter().map(f64::sqrt).collect()
    }

    pub fn area(&self, sphere: &Sphere) -> f64 {
        sphere.grid.integrate(&self.density())
    }

    pub fn sub(&self, other: &Self) -> Tensor {
        let mut t = self.h_tensor();
        t.add_scaled(&other.h_tensor(), -1.0);
        t
    }

    /// Pullback `ρ*g` under `ρ(x) = R x`.
    pub fn pullback(&self, sphere: &Sphere, rotation: &[[f64; 3]; 3]) -> Result<Self> {
        let cart = self.h_tensor().to_cartesian(sphere);
        let lmax = sphere.max_degree();
        let coeffs = cart
            .iter()
            .map(|c| sphere.analyze(c, lmax))
            .collect::<Result<Vec<_>>>()?;
        let n = sphere.len();
        let mut out = Self::round(n);
        let mut dig = [0usize; 2];
        for k in 0..n {
            let x = sphere.grid.position[k];
            let y = mat_vec(rotation, &x);
            let mut h = [[0.0; 3]; 3];
            for (ci, c) in coeffs.iter().enumerate() {
                base_digits(ci, 3, &mut dig);
                h[dig[0]][dig[1]] = eval_point(c, y).value;
            }
            let fr = [
                mat_vec(rotation, &sphere.grid.e_theta[k]),
                mat_vec(rotation, &sphere.grid.e_phi[k]),
            ];
            let comp = |i: usize, j: usize| -> f64 {
                let mut s = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        s += fr[i][a] * h[a][b] * fr[j][b];
                    }
                }
                s
            };
            out.h11[k] = comp(0, 0);
            out.h12[k] = 0.5 * (comp(0, 1) + comp(1, 0));
            out.h22[k] = comp(1, 1);
        }
        Ok(out)
    }
}

pub(crate) fn mat_vec(m: &[[f64; 3]; 3], x: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * x[0] + m[0][1] * x[1] + m[0][2] * x[2],
        m[1][0] * x[0] + m[1][1] * x[1] + m[1][2] * x[2],
        m[2][0] * x[0] + m[2][1] * x[1] + m[2][2] * x[2],
    ]
}

pub(crate) fn transpose(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

/// Rotation by `angle` about a unit `axis` (Rodrigues).
pub fn rotation_matrix(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let k = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = angle.sin_cos();
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (1.0 - c) * k[i] * k[j] + if i == j { c } else { 0.0 };
        }
    }
    r[0][1] -= s * k[2];
    r[0][2] += s * k[1];
    r[1][0] += s * k[2];
    r[1][2] -= s * k[0];
    r[2][0] -= s * k[1];
    r[2][1] += s * k[0];
    r
}

/// `K = e^{-2u}(1 - Δ̊u)`.
pub fn gauss_curvature_conformal(sphere: &Sphere, m: &ConformalMetric) -> Result<Vec<f64>> {
    gauss_curvature_from_log_omega(sphere, &m.log_omega)
}

pub fn gauss_curvature_from_log_omega(sphere: &Sphere, u: &Coeffs) -> Result<Vec<f64>> {
    let uv = sphere.synthesize(u)?;
    let mut lap = u.clone();
    laplacian_coeffs_in_place(&mut lap);
    let lu = sphere.synthesize(&lap)?;
    Ok(uv.iter().zip(&lu).map(|(u, l)| (-2.0 * u).exp() * (1.0 - l)).collect())
}

/// Christoffel difference `△ = Γ₂ - Γ₁` stored as a rank-3 frame tensor with
/// layout `[i][j][k]` for `△_ij^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelDifference {
    pub components: Tensor,
}

impl ChristoffelDifference {
    pub fn max_abs(&self) -> f64 {
        self.components.max_abs()
    }
}

/// `Γ_g - Γ̊`: `½ g^{kl}(∇̊_i h_jl + ∇̊_j h_il - ∇̊_l h_ij)`.
pub fn christoffel_relative_round(sphere: &Sphere, g: &PerturbedMetric) -> Result<Tensor> {
    g.validate()?;
    let dh = nabla_round(sphere, &g.h_tensor())?;
    let n = g.len();
    let idx3 = |a: usize, b: usize, c: usize| (a << 2) | (b << 1) | c;
    let mut out = Tensor::zeros(3, n);
    for node in 0..n {
        let gm = g.g_at(node);
        let det = gm[0][0] * gm[1][1] - gm[0][1] * gm[1][0];
        let ginv = [[gm[1][1] / det, -gm[0][1] / det], [-gm[1][0] / det, gm[0][0] / det]];
        let c = dh.comps();
        for i in 0..2 {
            for j in 0..2 {
                let mut low = [0.0; 2];
                for (l, lo) in low.iter_mut().enumerate() {
                    *lo = 0.5 * (c[idx3(i, j, l)][node] + c[idx3(j, i, l)][node] - c[idx3(l, i, j)][node]);
                }
                for k in 0..2 {
                    out.comps_mut()[idx3(i, j, k)][node] = ginv[k][0] * low[0] + ginv[k][1] * low[1];
                }
            }
        }
    }
    Ok(out)
}

pub fn christoffel_difference(
    sphere: &Sphere,
    g1: &PerturbedMetric,
    g2: &PerturbedMetric,
) -> Result<ChristoffelDifference> {
    let mut d = christoffel_relative_round(sphere, g2)?;
    d.add_scaled(&christoffel_relative_round(sphere, g1)?, -1.0);
    Ok(ChristoffelDifference { components: d })
}

/// Gauss curvature of `g̊ + h` from the frame Riemann tensor,
/// `K = -R_1212 / det g` with `R_ijkl = g(R(e_i, e_j)e_k, e_l)`.
pub fn gauss_curvature_general(sphere: &Sphere, g: &PerturbedMetric) -> Result<Vec<f64>> {
    let d = christoffel_relative_round(sphere, g)?;
    let nd = nabla_round(sphere, &d)?;
    let dc = d.comps();
    let ndc = nd.comps();
    let i3 = |a: usize, b: usize, c: usize| (a << 2) | (b << 1) | c;
    let i4 = |x: usize, a: usize, b: usize, c: usize| (x << 3) | (a << 2) | (b << 1) | c;
    let n = g.len();
    let mut out = vec![0.0; n];
    for node in 0..n {
        // R(e1, e2)e1; the round part is -e2
        let mut r = [0.0, -1.0];
        for (k, rk) in r.iter_mut().enumerate() {
            *rk += ndc[i4(0, 1, 0, k)][node] - ndc[i4(1, 0, 0, k)][node];
            for m in 0..2 {
                *rk += dc[i3(0, m, k)][node] * dc[i3(1, 0, m)][node] - dc[i3(1, m, k)][node] * dc[i3(0, 0, m)][node];
            }
        }
        let gm = g.g_at(node);
        let r1212 = gm[0][1] * r[0] + gm[1][1] * r[1];
        let det = gm[0][0] * gm[1][1] - gm[0][1] * gm[1][0];
        out[node] = -r1212 / det;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn y20_metric(eps: f64, lmax: usize) -> ConformalMetric {
        let mut c = Coeffs::zeros(lmax);
        c.set(2, 0, eps);
        ConformalMetric::new(c, Basepoint::NORTH)
    }

    #[test]
    fn conformal_curvature_of_scaled_sphere() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let mut c = Coeffs::zeros(8);
        c.set(0, 0, 0.3 * (4.0 * PI).sqrt());
        let k = gauss_curvature_conformal(&s, &ConformalMetric::new(c, Basepoint::NORTH)).unwrap();
        assert!(k.iter().all(|x| (x - (-0.6f64).exp()).abs() < 1e-13));
    }

    #[test]
    fn general_curvature_agrees_with_conformal() {
        let s = Sphere::with_bandlimit(24).unwrap();
        let m = y20_metric(0.05, 24);
        let k1 = gauss_curvature_conformal(&s, &m).unwrap();
        let p = m.to_perturbed(&s).unwrap();
        let k2 = gauss_curvature_general(&s, &p).unwrap();
        let err = k1.iter().zip(&k2).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-8, "{err}");
        let dens = p.density();
        let gb: Vec<f64> = k2.iter().zip(&dens).map(|(k, d)| k * d).collect();
        assert!((s.grid.integrate(&gb) - 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn scaling_leaves_christoffels_unchanged() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let n = s.len();
        let g1 = PerturbedMetric::round(n);
        let c = (2.0 * 0.2f64).exp() - 1.0;
        let g2 = PerturbedMetric {
            h11: vec![c; n],
            h12: vec![0.0; n],
            h22: vec![c; n],
        };
        assert!(christoffel_difference(&s, &g1, &g2).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_metric() {
        let s = Sphere::with_bandlimit(4).unwrap();
        let mut g = PerturbedMetric::round(s.len());
        g.h11[3] = -1.5;
        assert!(matches!(
            gauss_curvature_general(&s, &g),
            Err(Error::NotPositiveDefinite { node: 3, .. })
        ));
    }

    #[test]
    fn pullback_of_conformal_metric_matches_perturbed_pullback() {
        let s = Sphere::with_bandlimit(10).unwrap();
        let mut c = Coeffs::zeros(6);
        c.set(2, 1, 0.04);
        c.set(3, -2, 0.02);
        let m = ConformalMetric::new(c, Basepoint::NORTH);
        let r = rotation_matrix([0.3, -0.2, 0.9], 0.7);
        let a = m.pullback(&s, &r).unwrap().to_perturbed(&s).unwrap();
        let b = m.to_perturbed(&s).unwrap().pullback(&s, &r).unwrap();
        let t = a.sub(&b);
        assert!(t.max_abs() < 1e-9, "{}", t.max_abs());
    }
}
