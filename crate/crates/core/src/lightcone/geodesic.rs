//! Transport equations for `log Ω` along great circles through a basepoint
//! where `Ω(q) = 1` and `dΩ(q) = 0`.
//!
//! With `e_1 = γ'` and `e_2` the parallel unit normal, the fields obey
//!
//! * `(e_2 u)' = (e_1 u)(e_2 u) + ½ Ξ̂(e_1, e_2)`
//! * `2u'' - u'² + e^{2u} - 1 = -(e_2 u)² + Ξ̂(e_1, e_1) + (1 - K)e^{2u}`
//! * `(e_2 Ω⁻¹)' = -½ Ω⁻¹ Ξ̂(e_1, e_2)`
//! * `4Y'' = Y⁻³ - Y + Y(e_2 u)² - YΞ̂(e_1, e_1) + (K - 1)Y⁻³` for `Y = Ω^{-1/2}`
//!
//! The sources are sampled from the fields by point evaluation and the
//! integrated traces are compared with the directly evaluated ones.

use serde::{Deserialize, Serialize};

use super::ode::{dopri5, Tolerances};
use crate::error::{Error, Result};
use crate::sht::ops::laplacian_coeffs_in_place;
use crate::sht::{eval_point, eval_points_many, Coeffs, Sphere};

/// Largest `|u(q)|`, `|du(q)|` accepted as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// End of the integration interval, short of the antipode.
pub const S_END: f64 = std::f64::consts::PI - 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicOptions {
    pub samples: usize,
    pub tolerances: Tolerances,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            tolerances: Tolerances::default(),
        }
    }
}

/// Integrated minus direct values, sup over the sample points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicTrace {
    pub direction: f64,
    pub s: Vec<f64>,
    /// `e_2 log Ω` along γ, evaluated directly.
    pub e2_log_omega: Vec<f64>,
    /// `log Ω` along γ, evaluated directly.
    pub log_omega: Vec<f64>,
    pub e2_log_omega_err: f64,
    pub log_omega_err: f64,
    pub e2_inv_omega_err: f64,
    pub inv_sqrt_omega_err: f64,
}

impl GeodesicTrace {
    pub fn max_err(&self) -> f64 {
        self.e2_log_omega_err
            .max(self.log_omega_err)
            .max(self.e2_inv_omega_err)
            .max(self.inv_sqrt_omega_err)
    }

    pub fn sup_log_omega(&self) -> f64 {
        self.log_omega.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicReport {
    pub traces: Vec<GeodesicTrace>,
    pub max_err: f64,
    /// `sup |log Ω|` over all sampled geodesic points.
    pub sup_along: f64,
    /// `sup |log Ω|` over the grid.
    pub sup_global: f64,
}

/// Local data of `u` at a point, in the frame `(e_1, e_2)`.
struct Sample {
    u: f64,
    u1: f64,
    u2: f64,
    xi11: f64,
    xi12: f64,
    k: f64,
}

struct Fields {
    u: Coeffs,
    grad: [Coeffs; 3],
    lap: Coeffs,
}

impl Fields {
    fn new(sphere: &Sphere, u: &Coeffs) -> Result<Self> {
        let g = sphere.gradient_from_coeffs(u)?;
        let lmax = sphere.max_degree();
        let grad = [
            sphere.analyze(&g[0], lmax)?,
            sphere.analyze(&g[1], lmax)?,
            sphere.analyze(&g[2], lmax)?,
        ];
        let mut lap = u.clone();
        laplacian_coeffs_in_place(&mut lap);
        Ok(Self {
            u: u.clone(),
            grad,
            lap,
        })
    }

    fn sample(&self, x: [f64; 3], e1: [f64; 3], e2: [f64; 3]) -> Sample {
        let j = eval_points_many(&[&self.u, &self.grad[0], &self.grad[1], &self.grad[2], &self.lap], x);
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let du = j[0].grad;
        let hess = |a: [f64; 3], b: [f64; 3]| -> f64 { (0..3).map(|c| b[c] * dot(j[c + 1].grad, a)).sum() };
        let (u1, u2) = (dot(du, e1), dot(du, e2));
        let h11 = hess(e1, e1);
        let h22 = hess(e2, e2);
        let h12 = 0.5 * (hess(e1, e2) + hess(e2, e1));
        let u = j[0].value;
        Sample {
            u,
            u1,
            u2,
            xi11: -u1 * u1 + u2 * u2 + h11 - h22,
            xi12: -2.0 * u1 * u2 + 2.0 * h12,
            k: (-2.0 * u).exp() * (1.0 - j[4].value),
        }
    }
}

fn tangent_basis(q: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let z = q[2].clamp(-1.0, 1.0);
    let theta = z.acos();
    let phi = q[1].atan2(q[0]);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    if st.abs() < 1e-12 {
        let s = z.signum();
        return ([s, 0.0, 0.0], [0.0, 1.0, 0.0]);
    }
    ([ct * cp, ct * sp, -st], [-sp, cp, 0.0])
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn check_normalized(u: &Coeffs, q: [f64; 3]) -> Result<()> {
    let j = eval_point(u, q);
    let g = j.grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if j.value.abs() > NORMALIZATION_TOL || g > NORMALIZATION_TOL {
        return Err(Error::NotNormalized {
            value: j.value,
            grad: g,
        });
    }
    Ok(())
}

/// Integrate the transport equations along the great circle leaving `q` at
/// angle `direction` from `e_θ` towards `e_φ`.
pub fn geodesic_ode_check(
    sphere: &Sphere,
    u: &Coeffs,
    q: [f64; 3],
    direction: f64,
    opts: &GeodesicOptions,
) -> Result<GeodesicTrace> {
    check_normalized(u, q)?;
    let fields = Fields::new(sphere, u)?;
    trace_direction(&fields, q, direction, opts)
}

fn trace_direction(fields: &Fields, q: [f64; 3], direction: f64, opts: &GeodesicOptions) -> Result<GeodesicTrace> {
    if opts.samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let (et, ep) = tangent_basis(q);
    let (sa, ca) = direction.sin_cos();
    let v: [f64; 3] = std::array::from_fn(|a| ca * et[a] + sa * ep[a]);
    let e2 = cross(q, v);
    let at = |s: f64| -> Sample {
        let (ss, cs) = s.sin_cos();
        let x: [f64; 3] = std::array::from_fn(|a| cs * q[a] + ss * v[a]);
        let e1: [f64; 3] = std::array::from_fn(|a| -ss * q[a] + cs * v[a]);
        fields.sample(x, e1, e2)
    };

    // state: [e_2 u, u, u', e_2 Ω⁻¹, Y, Y']
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let p = at(s);
        dy[0] = p.u1 * y[0] + 0.5 * p.xi12;
        let w = y[1];
        let e2w = (2.0 * w).exp();
        dy[1] = y[2];
        dy[2] = 0.5 * (y[2] * y[2] - e2w + 1.0 - p.u2 * p.u2 + p.xi11 + (1.0 - p.k) * e2w);
        dy[3] = -0.5 * (-p.u).exp() * p.xi12;
        let yy = y[4];
        let y3 = yy.powi(-3);
        dy[4] = y[5];
        dy[5] = 0.25 * (y3 - yy + yy * p.u2 * p.u2 - yy * p.xi11 + (p.k - 1.0) * y3);
    };
    let s: Vec<f64> = (0..opts.samples)
        .map(|i| S_END * i as f64 / (opts.samples - 1) as f64)
        .collect();
    let y0 = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let sol = dopri5(rhs, 0.0, &y0, &s, &opts.tolerances)?;

    let mut tr = GeodesicTrace {
        direction,
        s: s.clone(),
        e2_log_omega: Vec::with_capacity(s.len()),
        log_omega: Vec::with_capacity(s.len()),
        e2_log_omega_err: 0.0,
        log_omega_err: 0.0,
        e2_inv_omega_err: 0.0,
        inv_sqrt_omega_err: 0.0,
    };
    for (si, y) in s.iter().zip(&sol) {
        let p = at(*si);
        tr.e2_log_omega.push(p.u2);
        tr.log_omega.push(p.u);
        tr.e2_log_omega_err = tr.e2_log_omega_err.max((y[0] - p.u2).abs());
        tr.log_omega_err = tr.log_omega_err.max((y[1] - p.u).abs());
        let z = -(-p.u).exp() * p.u2;
        tr.e2_inv_omega_err = tr.e2_inv_omega_err.max((y[3] - z).abs());
        tr.inv_sqrt_omega_err = tr.inv_sqrt_omega_err.max((y[4] - (-0.5 * p.u).exp()).abs());
    }
    Ok(tr)
}

/// Run the check in `n_directions` directions `2π(k + ½) / n` and compare the
/// sup of `|log Ω|` along the geodesics with the global sup.
pub fn geodesic_report(
    sphere: &Sphere,
    u: &Coeffs,
    q: [f64; 3],
    n_directions: usize,
    opts: &GeodesicOptions,
) -> Result<GeodesicReport> {
    check_normalized(u, q)?;
    if n_directions == 0 {
        return Err(Error::InvalidArgument("need at least one direction".into()));
    }
    let fields = Fields::new(sphere, u)?;
    let traces = (0..n_directions)
        .map(|k| {
            let a = (k as f64 + 0.5) * std::f64::consts::TAU / n_directions as f64;
            trace_direction(&fields, q, a, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_err = traces.iter().fold(0.0_f64, |a, t| a.max(t.max_err()));
    let sup_along = traces.iter().fold(0.0_f64, |a, t| a.max(t.sup_log_omega()));
    let sup_global = sphere.synthesize(u)?.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok(GeodesicReport {
        traces,
        max_err,
        sup_along,
        sup_global,
    })
}
