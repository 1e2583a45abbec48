//! Liouville solver, Möbius normalization and the uniformization pipeline.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{
    gauss_curvature_conformal, gauss_curvature_from_log_omega, sobolev_norm, Basepoint, ConformalMetric, SphereMetric,
};
use crate::ratio::Ratio;
use crate::sht::gram::weighted_mass;
use crate::sht::ops::{lambda, laplacian_coeffs_in_place};
use crate::sht::{eval_point, Coeffs, Sphere, Tensor};

/// Solver controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonOptions {
    pub tolerance: f64,
    pub max_iters: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iters: 50,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleSolution {
    pub log_omega: Coeffs,
    pub iters: usize,
    pub residual_linf: f64,
    /// Grid residual before each Newton step and after the last one.
    pub trace: Vec<f64>,
}

fn grid_residual(sphere: &Sphere, k: &[f64], u: &Coeffs) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let uv = sphere.synthesize(u)?;
    let mut lap = u.clone();
    laplacian_coeffs_in_place(&mut lap);
    let lu = sphere.synthesize(&lap)?;
    let ew: Vec<f64> = k.iter().zip(&uv).map(|(k, u)| k * (2.0 * u).exp()).collect();
    let res: Vec<f64> = (0..uv.len()).map(|i| lu[i] - 1.0 + ew[i]).collect();
    let sup = res.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    Ok((res, ew, sup))
}

fn solve_symmetric(j: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(x) = j.clone().lu().solve(rhs) {
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    // minimal-norm solution through the pseudo-inverse
    let eig = SymmetricEigen::new(j);
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cut = 1e-12 * scale;
    let mut x = DVector::zeros(rhs.len());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() > cut {
            let v = eig.eigenvectors.column(i);
            x += v * (v.dot(rhs) / ev);
        }
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::LinearAlgebra("Newton system could not be solved".into()))
    }
}

/// Solve `Δ̊u = 1 - K e^{2u}` for `u` of degree at most the sphere's bandlimit.
///
/// Newton–Galerkin with Jacobian `-diag(λ) + 2 Gram(K e^{2u})`, step halving
/// when the grid residual does not decrease.
pub fn solve_liouville(
    sphere: &Sphere,
    k: &[f64],
    u0: Option<&Coeffs>,
    opts: &NewtonOptions,
) -> Result<LiouvilleSolution> {
    sphere.check_len(k)?;
    let kmin = k.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(kmin > 0.0) {
        return Err(Error::NonPositiveCurvature(kmin));
    }
    let l = sphere.bandlimit();
    let mut u = match u0 {
        Some(c) => c.resized(l),
        None => Coeffs::zeros(l),
    };
    let n = u.len();
    let (mut res, mut ew, mut sup) = grid_residual(sphere, k, &u)?;
    let mut trace = vec![sup];
    let mut iters = 0;
    while sup > opts.tolerance {
        if iters == opts.max_iters {
            return Err(Error::NewtonDivergence { iters, residual: sup });
        }
        iters += 1;
        let f = sphere.analyze(&res, l)?;
        let mut j = weighted_mass(sphere, l, &ew)?;
        j.scale_mut(2.0);
        for (i, (deg, _, _)) in u.iter().enumerate() {
            j[(i, i)] -= lambda(deg);
        }
        let rhs = -DVector::from_column_slice(f.as_slice());
        let step = solve_symmetric(j, &rhs)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = u.clone();
            for i in 0..n {
                trial.as_mut_slice()[i] += t * step[i];
            }
            let (r2, e2, s2) = grid_residual(sphere, k, &trial)?;
            if s2 < sup {
                u = trial;
                res = r2;
                ew = e2;
                sup = s2;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        trace.push(sup);
        if !accepted {
            // the residual has reached its discretization floor
            break;
        }
    }
    if sup > opts.tolerance.max(1e-6) {
        return Err(Error::NewtonDivergence { iters, residual: sup });
    }
    Ok(LiouvilleSolution {
        log_omega: u,
        iters,
        residual_linf: sup,
        trace,
    })
}

/// Möbius transformation of the round sphere: boost `b = s n` and a rotation.
///
/// The conformal factor depends on the boost only:
/// `Q(x) = 1 / (cosh s + sinh s ⟨x, n⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobiusParams {
    pub boost: [f64; 3],
    pub rotation: [[f64; 3]; 3],
}

impl Default for MobiusParams {
    fn default() -> Self {
        Self {
            boost: [0.0; 3],
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }
}

impl MobiusParams {
    pub fn from_boost(boost: [f64; 3]) -> Self {
        Self {
            boost,
            ..Self::default()
        }
    }

    pub fn rapidity(&self) -> f64 {
        norm3(&self.boost)
    }

    /// `sinh(s) n`.
    fn t_vector(&self) -> [f64; 3] {
        let s = self.rapidity();
        if s == 0.0 {
            return [0.0; 3];
        }
        let f = s.sinh() / s;
        [f * self.boost[0], f * self.boost[1], f * self.boost[2]]
    }

    /// `log Q(x)` and its Cartesian surface gradient.
    pub fn log_q(&self, x: [f64; 3]) -> (f64, [f64; 3]) {
        let t = self.t_vector();
        let c = self.rapidity().cosh();
        let den = c + dot3(&x, &t);
        let xt = dot3(&x, &t);
        let g = [
            -(t[0] - xt * x[0]) / den,
            -(t[1] - xt * x[1]) / den,
            -(t[2] - xt * x[2]) / den,
        ];
        (-den.ln(), g)
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Grid values of `Q`.
pub fn mobius_factor(sphere: &Sphere, params: &MobiusParams) -> Vec<f64> {
    sphere.grid.position.iter().map(|&x| params.log_q(x).0.exp()).collect()
}

/// Normalize `u` at `q`: returns `u' = u - log Q` (re-expanded at the sphere's
/// maximal degree) with `u'(q) = 0`, `du'(q) = 0`.
pub fn normalize_at(sphere: &Sphere, u: &Coeffs, q: Basepoint) -> Result<(Coeffs, MobiusParams)> {
    let x = q.position();
    let jet = eval_point(u, x);
    let c = (-jet.value).exp();
    let t_tan = [-c * jet.grad[0], -c * jet.grad[1], -c * jet.grad[2]];
    let tt2 = dot3(&t_tan, &t_tan);
    let t_n = (c * c - 1.0 - tt2) / (2.0 * c);
    let t = [t_tan[0] + t_n * x[0], t_tan[1] + t_n * x[1], t_tan[2] + t_n * x[2]];
    let tn = norm3(&t);
    let params = if tn == 0.0 {
        MobiusParams::default()
    } else {
        let s = tn.asinh();
        MobiusParams::from_boost([s * t[0] / tn, s * t[1] / tn, s * t[2] / tn])
    };
    let uv = sphere.synthesize(u)?;
    let shifted: Vec<f64> = uv
        .iter()
        .zip(&sphere.grid.position)
        .map(|(u, &p)| u - params.log_q(p).0)
        .collect();
    let out = sphere.analyze(&shifted, sphere.max_degree())?;
    Ok((out, params))
}

/// `(|u(q)|, |du(q)|)`.
pub fn normalization_residual(u: &Coeffs, q: Basepoint) -> (f64, f64) {
    let jet = eval_point(u, q.position());
    (jet.value.abs(), norm3(&jet.grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundRatio {
    pub p: f64,
    pub ratio: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformizationResult {
    /// Normalized `log Ω` at the sphere's maximal degree.
    pub log_omega: Coeffs,
    /// Liouville solution before normalization.
    pub log_omega_raw: Coeffs,
    pub mobius: MobiusParams,
    pub basepoint: Basepoint,
    pub k_in: Vec<f64>,
    pub newton_iters: usize,
    pub residual_linf: f64,
    pub newton_trace: Vec<f64>,
    pub normalization_residual: (f64, f64),
    /// `sup |K(u_raw) - K_in|`.
    pub curvature_mismatch: f64,
    pub bound_ratios: Vec<BoundRatio>,
    pub k_min: f64,
    pub k_max: f64,
    pub area: f64,
}

impl UniformizationResult {
    pub fn sup_log_omega(&self, sphere: &Sphere) -> Result<f64> {
        Ok(sphere
            .synthesize(&self.log_omega)?
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs())))
    }
}

pub const BOUND_EXPONENTS: [f64; 3] = [3.0, 4.0, 6.0];

/// `‖Ω - 1‖_{g,2,p} / ‖K - 1‖_{g,0,p}`.
pub fn bound_ratio(sphere: &Sphere, g: &SphereMetric, log_omega: &Coeffs, k: &[f64], p: f64) -> Result<Ratio> {
    let om: Vec<f64> = sphere.synthesize(log_omega)?.iter().map(|u| u.exp() - 1.0).collect();
    let km: Vec<f64> = k.iter().map(|k| k - 1.0).collect();
    let num = sobolev_norm(sphere, &Tensor::scalar(om), g, 2, p, true)?;
    let den = sobolev_norm(sphere, &Tensor::scalar(km), g, 0, p, true)?;
    Ok(Ratio::new(num, den))
}

/// Curvature, Liouville solve and normalization at the metric's basepoint.
pub fn uniformize(sphere: &Sphere, m: &ConformalMetric, opts: &NewtonOptions) -> Result<UniformizationResult> {
    uniformize_from(sphere, m, None, opts)
}

/// As [`uniformize`], with an explicit initial guess.
pub fn uniformize_from(
    sphere: &Sphere,
    m: &ConformalMetric,
    u0: Option<&Coeffs>,
    opts: &NewtonOptions,
) -> Result<UniformizationResult> {
    let k_in = gauss_curvature_conformal(sphere, m)?;
    let sol = solve_liouville(sphere, &k_in, u0, opts)?;
    let (u_norm, mobius) = normalize_at(sphere, &sol.log_omega, m.basepoint)?;
    let k_re = gauss_curvature_from_log_omega(sphere, &sol.log_omega)?;
    let curvature_mismatch = k_re.iter().zip(&k_in).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
    let g = SphereMetric::Conformal(m.clone());
    let bound_ratios = BOUND_EXPONENTS
        .iter()
        .map(|&p| {
            Ok(BoundRatio {
                p,
                ratio: bound_ratio(sphere, &g, &u_norm, &k_in, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UniformizationResult {
        normalization_residual: normalization_residual(&u_norm, m.basepoint),
        log_omega: u_norm,
        log_omega_raw: sol.log_omega,
        mobius,
        basepoint: m.basepoint,
        k_min: k_in.iter().cloned().fold(f64::INFINITY, f64::min),
        k_max: k_in.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        area: m.area(sphere)?,
        k_in,
        newton_iters: sol.iters,
        residual_linf: sol.residual_linf,
        newton_trace: sol.trace,
        curvature_mismatch,
        bound_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::gauss_curvature_from_log_omega;

    fn y20(eps: f64, l: usize) -> Coeffs {
        let mut c = Coeffs::zeros(l);
        c.set(2, 0, eps);
        c
    }

    #[test]
    fn mobius_factor_has_unit_curvature() {
        let s = Sphere::with_bandlimit(16).unwrap();
        let p = MobiusParams::from_boost([0.1, -0.2, 0.15]);
        let lq: Vec<f64> = mobius_factor(&s, &p).iter().map(|q| q.ln()).collect();
        let c = s.analyze(&lq, s.max_degree()).unwrap();
        let k = gauss_curvature_from_log_omega(&s, &c).unwrap();
        assert!(k.iter().all(|k| (k - 1.0).abs() < 1e-9));
    }

    #[test]
    fn mobius_pole_values() {
        let p = MobiusParams::from_boost([0.0, 0.0, 0.2]);
        let n = p.log_q([0.0, 0.0, 1.0]).0.exp();
        let sth = p.log_q([0.0, 0.0, -1.0]).0.exp();
        assert!((n - 1.0 / (0.2f64.cosh() + 0.2f64.sinh())).abs() < 1e-15);
        assert!((sth - 1.0 / (0.2f64.cosh() - 0.2f64.sinh())).abs() < 1e-15);
    }

    #[test]
    fn normalization_recovers_boost() {
        let s = Sphere::with_bandlimit(16).unwrap();
        let p0 = MobiusParams::from_boost([0.05, 0.1, -0.08]);
        let lq: Vec<f64> = mobius_factor(&s, &p0).iter().map(|q| q.ln()).collect();
        let u = s.analyze(&lq, s.max_degree()).unwrap();
        let q = Basepoint::new(1.1, 0.4);
        let (un, p) = normalize_at(&s, &u, q).unwrap();
        assert!(un.as_slice().iter().all(|v| v.abs() < 1e-10));
        for i in 0..3 {
            assert!((p.boost[i] - p0.boost[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        let s = Sphere::with_bandlimit(16).unwrap();
        let u = y20(0.05, 16);
        let k = gauss_curvature_from_log_omega(&s, &u).unwrap();
        let sol = solve_liouville(&s, &k, None, &NewtonOptions::default()).unwrap();
        assert!(sol.residual_linf <= 1e-10);
        let q = Basepoint::new(std::f64::consts::FRAC_PI_2, 0.0);
        let (a, _) = normalize_at(&s, &sol.log_omega, q).unwrap();
        let (b, _) = normalize_at(&s, &u, q).unwrap();
        let (va, vb) = (s.synthesize(&a).unwrap(), s.synthesize(&b).unwrap());
        let err = va.iter().zip(&vb).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn scaled_sphere_gives_constant_factor() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let c: f64 = 0.2;
        let k = vec![(-2.0 * c).exp(); s.len()];
        let sol = solve_liouville(&s, &k, None, &NewtonOptions::default()).unwrap();
        let v = s.synthesize(&sol.log_omega).unwrap();
        assert!(v.iter().all(|x| (x - c).abs() < 1e-10));
    }

    #[test]
    fn round_input_reports_exact_ratios() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let r = uniformize(&s, &ConformalMetric::round(8), &NewtonOptions::default()).unwrap();
        assert_eq!(r.newton_iters, 0);
        assert!(r.bound_ratios.iter().all(|b| b.ratio.is_exact()));
    }

    #[test]
    fn rejects_non_positive_curvature() {
        let s = Sphere::with_bandlimit(4).unwrap();
        let mut k = vec![1.0; s.len()];
        k[5] = -0.1;
        assert!(matches!(
            solve_liouville(&s, &k, None, &NewtonOptions::default()),
            Err(Error::NonPositiveCurvature(_))
        ));
    }
}
