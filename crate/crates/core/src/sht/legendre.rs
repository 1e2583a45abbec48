//! Orthonormal associated Legendre functions without the Condon-Shortley phase.
//!
//! `P̄_l^m(θ)` is normalized so that `P̄_l^m(θ)·√2·cos(mφ)` (or `P̄_l^0(θ)`)
//! has unit L² norm on the unit sphere. Alongside the values we produce
//! `dP̄/dθ` and `P̄/sin θ` (for `m ≥ 1`), both by recurrences that stay
//! finite at the poles.

use std::f64::consts::PI;

/// Packed index of `(l, m)` with `0 ≤ m ≤ l`.
#[inline]
pub fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

#[inline]
pub fn tri_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

/// Values, θ-derivatives and `P̄/sin θ` at a single colatitude.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    pub lmax: usize,
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    /// `P̄_l^m / sin θ` for `m ≥ 1`; zero for `m = 0`.
    pub p_over_sin: Vec<f64>,
}

impl LegendreTable {
    pub fn new(lmax: usize, theta: f64) -> Self {
        let n = tri_len(lmax);
        let (s, c) = theta.sin_cos();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut dp = vec![0.0; n];

        // sectoral seeds
        let mut pmm = (1.0 / (4.0 * PI)).sqrt();
        for m in 0..=lmax {
            if m > 0 {
                let f = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
                q[tri_index(m, m)] = f * pmm;
                pmm *= f * s;
            }
            p[tri_index(m, m)] = pmm;
            // three-term recurrence in l, applied to P̄ and P̄/sinθ alike
            for l in (m + 1)..=lmax {
                let (lf, mf) = (l as f64, m as f64);
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = if l >= m + 2 {
                    let l1 = lf - 1.0;
                    ((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt()
                } else {
                    0.0
                };
                let i = tri_index(l, m);
                let p2 = if l >= m + 2 { p[tri_index(l - 2, m)] } else { 0.0 };
                let q2 = if l >= m + 2 { q[tri_index(l - 2, m)] } else { 0.0 };
                p[i] = a * (c * p[tri_index(l - 1, m)] - b * p2);
                q[i] = a * (c * q[tri_index(l - 1, m)] - b * q2);
            }
        }

        for l in 0..=lmax {
            let lf = l as f64;
            dp[tri_index(l, 0)] = if l >= 1 {
                -(lf * (lf + 1.0)).sqrt() * p[tri_index(l, 1)]
            } else {
                0.0
            };
            for m in 1..=l {
                let mf = m as f64;
                let prev = if l > m { q[tri_index(l - 1, m)] } else { 0.0 };
                let cl = ((2.0 * lf + 1.0) / (2.0 * lf - 1.0) * (lf * lf - mf * mf)).sqrt();
                dp[tri_index(l, m)] = lf * c * q[tri_index(l, m)] - cl * prev;
            }
        }

        Self {
            lmax,
            p,
            dp,
            p_over_sin: q,
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes in decreasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dpz = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dpz = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dpz;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        let wi = 2.0 / ((1.0 - z * z) * dpz * dpz);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        // exact up to degree 13
        let i12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((i12 - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let lmax = 12;
        let theta = 0.83;
        let h = 1e-6;
        let t = LegendreTable::new(lmax, theta);
        let tp = LegendreTable::new(lmax, theta + h);
        let tm = LegendreTable::new(lmax, theta - h);
        for l in 0..=lmax {
            for m in 0..=l {
                let i = tri_index(l, m);
                let fd = (tp.p[i] - tm.p[i]) / (2.0 * h);
                assert!((fd - t.dp[i]).abs() < 1e-7, "l={l} m={m}: {fd} vs {}", t.dp[i]);
                if m > 0 {
                    assert!((t.p_over_sin[i] * theta.sin() - t.p[i]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn pole_values_are_finite() {
        let t = LegendreTable::new(10, 0.0);
        assert!(t.dp.iter().chain(&t.p_over_sin).all(|v| v.is_finite()));
        // P̄_1^1 / sinθ at the pole equals √(3/8π)
        let expected = (3.0 / (8.0 * PI)).sqrt();
        assert!((t.p_over_sin[tri_index(1, 1)] - expected).abs() < 1e-14);
    }
}
