//! Covariant derivatives and Sobolev norms in a perturbed metric.

use super::{christoffel_relative_round, PerturbedMetric, SphereMetric};
use crate::error::{Error, Result};
use crate::sht::tensor::{nabla_round, Tensor};
use crate::sht::Sphere;

/// Pointwise data of `g = g̊ + h` needed for norms: inverse frame matrix,
/// volume density and `Γ_g - Γ̊`.
#[derive(Debug, Clone)]
pub struct MetricContext {
    ginv: Vec<[[f64; 2]; 2]>,
    density: Vec<f64>,
    christoffel: Tensor,
}

impl MetricContext {
    pub fn new(sphere: &Sphere, g: &PerturbedMetric) -> Result<Self> {
        sphere.check_len(&g.h11)?;
        let christoffel = christoffel_relative_round(sphere, g)?;
        let ginv = (0..g.len())
            .map(|k| {
                let m = g.g_at(k);
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
            })
            .collect();
        Ok(Self {
            ginv,
            density: g.density(),
            christoffel,
        })
    }

    pub fn from_metric(sphere: &Sphere, g: &SphereMetric) -> Result<Self> {
        Self::new(sphere, &g.to_perturbed(sphere)?)
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn integrate(&self, sphere: &Sphere, f: &[f64]) -> f64 {
        let v: Vec<f64> = f.iter().zip(&self.density).map(|(a, b)| a * b).collect();
        sphere.grid.integrate(&v)
    }

    /// `∇_g T = ∇̊T - Σ_slots △·T`, new index first.
    pub fn nabla(&self, sphere: &Sphere, t: &Tensor) -> Result<Tensor> {
        let mut out = nabla_round(sphere, t)?;
        let r = t.rank();
        if r == 0 {
            return Ok(out);
        }
        let n = t.nodes();
        let d = self.christoffel.comps();
        let tc = t.comps();
        let nf = 1usize << r;
        for fi in 0..(nf << 1) {
            let i = fi >> r;
            let jj = fi & (nf - 1);
            for s in 0..r {
                let bit = r - 1 - s;
                let js = (jj >> bit) & 1;
                for m in 0..2 {
                    let src = (jj & !(1 << bit)) | (m << bit);
                    let dd = &d[(i << 2) | (js << 1) | m];
                    let o = &mut out.comps_mut()[fi];
                    for k in 0..n {
                        o[k] -= dd[k] * tc[src][k];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Pointwise `|T|²_g`.
    pub fn norm_sq(&self, t: &Tensor) -> Vec<f64> {
        let r = t.rank();
        let mut raised: Vec<Vec<f64>> = t.comps().to_vec();
        for bit in 0..r {
            let prev = raised.clone();
            for (fi, dst) in raised.iter_mut().enumerate() {
                let j = (fi >> bit) & 1;
                let lo = fi & !(1 << bit);
                let hi = lo | (1 << bit);
                for (k, v) in dst.iter_mut().enumerate() {
                    *v = self.ginv[k][j][0] * prev[lo][k] + self.ginv[k][j][1] * prev[hi][k];
                }
            }
        }
        let mut out = vec![0.0; t.nodes()];
        for (a, b) in t.comps().iter().zip(&raised) {
            for k in 0..out.len() {
                out[k] += a[k] * b[k];
            }
        }
        out
    }
}

/// `(Σ_k ∫|∇^k f|_g^p dvol_g)^{1/p}` with `k` from 0 (or 1) to `n`.
pub fn sobolev_norm(
    sphere: &Sphere,
    f: &Tensor,
    g: &SphereMetric,
    n: usize,
    p: f64,
    include_zeroth: bool,
) -> Result<f64> {
    let ctx = MetricContext::from_metric(sphere, g)?;
    sobolev_norm_ctx(sphere, &ctx, f, n, p, include_zeroth)
}

pub(crate) fn sobolev_norm_ctx(
    sphere: &Sphere,
    ctx: &MetricContext,
    f: &Tensor,
    n: usize,
    p: f64,
    include_zeroth: bool,
) -> Result<f64> {
    sobolev_norm_multi(sphere, ctx, std::slice::from_ref(f), n, p, include_zeroth)
}

/// Norm of a tuple of tensors, with pointwise norms added before the power.
pub(crate) fn sobolev_norm_multi(
    sphere: &Sphere,
    ctx: &MetricContext,
    fs: &[Tensor],
    n: usize,
    p: f64,
    include_zeroth: bool,
) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Sobolev exponent must exceed 1, got {p}"
        )));
    }
    for f in fs {
        sphere.check_len(&f.comps()[0])?;
    }
    let mut total = 0.0;
    let mut cur: Vec<Tensor> = fs.to_vec();
    for k in 0..=n {
        if k > 0 {
            cur = cur.iter().map(|t| ctx.nabla(sphere, t)).collect::<Result<Vec<_>>>()?;
        }
        if k == 0 && !include_zeroth {
            continue;
        }
        let mut sq = vec![0.0; sphere.len()];
        for t in &cur {
            for (a, b) in sq.iter_mut().zip(ctx.norm_sq(t)) {
                *a += b;
            }
        }
        let pw: Vec<f64> = sq.into_iter().map(|x| x.max(0.0).powf(0.5 * p)).collect();
        total += ctx.integrate(sphere, &pw);
    }
    Ok(total.powf(1.0 / p))
}

/// `‖g₂ - g₁‖_{g₁,n,p}`.
pub fn metric_distance(sphere: &Sphere, g1: &SphereMetric, g2: &SphereMetric, n: usize, p: f64) -> Result<f64> {
    let p1 = g1.to_perturbed(sphere)?;
    let p2 = g2.to_perturbed(sphere)?;
    let ctx = MetricContext::new(sphere, &p1)?;
    sobolev_norm_ctx(sphere, &ctx, &p2.sub(&p1), n, p, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::ConformalMetric;
    use crate::sht::Coeffs;

    #[test]
    fn gradient_norm_of_y20() {
        let s = Sphere::with_bandlimit(12).unwrap();
        let f = s.synthesize(&Coeffs::unit(12, 2, 0)).unwrap();
        let round = SphereMetric::Conformal(ConformalMetric::round(4));
        let v = sobolev_norm(&s, &Tensor::scalar(f), &round, 1, 2.0, false).unwrap();
        assert!((v - 6f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn second_derivative_norm_uses_metric_connection() {
        // for g = e^{2c}g̊ with c constant, |∇²f|²_g = e^{-4c}|∇̊²f|² and dvol scales by e^{2c}
        let s = Sphere::with_bandlimit(10).unwrap();
        let f = s.synthesize(&Coeffs::unit(10, 3, 1)).unwrap();
        let mut u = Coeffs::zeros(2);
        let c = 0.15;
        u.set(0, 0, c * (4.0 * std::f64::consts::PI).sqrt());
        let g = SphereMetric::Conformal(ConformalMetric::new(u, super::super::Basepoint::NORTH));
        let round = SphereMetric::Conformal(ConformalMetric::round(2));
        let a = sobolev_norm(&s, &Tensor::scalar(f.clone()), &g, 2, 2.0, false).unwrap();
        let b = sobolev_norm(&s, &Tensor::scalar(f), &round, 2, 2.0, false).unwrap();
        // k=1 term: e^{-2c}·e^{2c}·λ ; k=2 term: e^{-4c}·e^{2c}·(λ²-λ)
        let lam = 12.0;
        let expect_a = (lam + (-2.0 * c).exp() * (lam * lam - lam)).sqrt();
        assert!((b - (lam * lam).sqrt()).abs() < 1e-9);
        assert!((a - expect_a).abs() < 1e-9, "{a} {expect_a}");
    }

    #[test]
    fn rejects_small_exponent() {
        let s = Sphere::with_bandlimit(4).unwrap();
        let round = SphereMetric::Conformal(ConformalMetric::round(2));
        let f = Tensor::scalar(vec![1.0; s.len()]);
        assert!(sobolev_norm(&s, &f, &round, 0, 1.0, true).is_err());
    }
}
