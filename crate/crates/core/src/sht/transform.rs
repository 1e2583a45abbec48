//! Quadrature-based spherical-harmonic transforms on a [`SphGrid`].
//!
//! Transforms are direct (per-ring Fourier sums followed by Legendre sums);
//! the O(L³) cost is irrelevant at the bandlimits used here and keeps the
//! summation order fixed.

use std::f64::consts::SQRT_2;

use super::coeffs::Coeffs;
use super::grid::{build_grid, Bandlimit, SphGrid, TENSOR_HEADROOM};
use super::legendre::{tri_index, tri_len, LegendreTable};
use crate::error::{Error, Result};

/// Grid plus precomputed Legendre and trigonometric tables.
#[derive(Debug, Clone)]
pub struct Sphere {
    pub grid: SphGrid,
    lmax_table: usize,
    // [tri_index(l, m) * n_theta + i]
    p: Vec<f64>,
    dp: Vec<f64>,
    q: Vec<f64>,
    // [m * n_phi + j], m ≤ lmax_table
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
}

/// Value and Cartesian surface gradient of a field at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointJet {
    pub value: f64,
    pub grad: [f64; 3],
}

impl Sphere {
    pub fn new(bandlimit: Bandlimit) -> Self {
        let grid = build_grid(bandlimit);
        let lmax_table = bandlimit.get() + TENSOR_HEADROOM;
        let nt = grid.n_theta;
        let np = grid.n_phi;
        let n = tri_len(lmax_table);
        let mut p = vec![0.0; n * nt];
        let mut dp = vec![0.0; n * nt];
        let mut q = vec![0.0; n * nt];
        for (i, &theta) in grid.theta.iter().enumerate() {
            let t = LegendreTable::new(lmax_table, theta);
            for k in 0..n {
                p[k * nt + i] = t.p[k];
                dp[k * nt + i] = t.dp[k];
                q[k * nt + i] = t.p_over_sin[k];
            }
        }
        let mut cos_tab = vec![0.0; (lmax_table + 1) * np];
        let mut sin_tab = vec![0.0; (lmax_table + 1) * np];
        for m in 0..=lmax_table {
            for (j, &phi) in grid.phi.iter().enumerate() {
                let (s, c) = (m as f64 * phi).sin_cos();
                cos_tab[m * np + j] = c;
                sin_tab[m * np + j] = s;
            }
        }
        Self {
            grid,
            lmax_table,
            p,
            dp,
            q,
            cos_tab,
            sin_tab,
        }
    }

    pub fn with_bandlimit(l: usize) -> Result<Self> {
        Ok(Self::new(Bandlimit::new(l)?))
    }

    /// Scalar bandlimit `L`.
    pub fn bandlimit(&self) -> usize {
        self.grid.bandlimit.get()
    }

    /// Highest degree the tables support (`L` plus tensor headroom).
    pub fn max_degree(&self) -> usize {
        self.lmax_table
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(Error::GridMismatch {
                expected: self.grid.len(),
                got: values.len(),
            });
        }
        Ok(())
    }

    fn check_degree(&self, lmax: usize) -> Result<()> {
        if lmax > self.lmax_table {
            return Err(Error::DegreeOutOfRange {
                max: self.lmax_table,
                got: lmax,
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn legendre(&self, l: usize, m: usize, ring: usize) -> f64 {
        self.p[tri_index(l, m) * self.grid.n_theta + ring]
    }

    #[inline]
    pub(crate) fn legendre_dtheta(&self, l: usize, m: usize, ring: usize) -> f64 {
        self.dp[tri_index(l, m) * self.grid.n_theta + ring]
    }

    #[inline]
    pub(crate) fn legendre_over_sin(&self, l: usize, m: usize, ring: usize) -> f64 {
        self.q[tri_index(l, m) * self.grid.n_theta + ring]
    }

    /// Angular factor `t_m(φ_j)` of the real basis (`√2 cos`, `1`, or `√2 sin`).
    #[inline]
    pub(crate) fn angular(&self, m: i64, j: usize) -> f64 {
        let np = self.grid.n_phi;
        match m {
            0 => 1.0,
            m if m > 0 => SQRT_2 * self.cos_tab[m as usize * np + j],
            m => SQRT_2 * self.sin_tab[(-m) as usize * np + j],
        }
    }

    /// Project grid values onto real harmonics of degree ≤ `lmax` by quadrature.
    pub fn analyze(&self, values: &[f64], lmax: usize) -> Result<Coeffs> {
        self.check_len(values)?;
        self.check_degree(lmax)?;
        let (nt, np) = (self.grid.n_theta, self.grid.n_phi);
        let dphi = 2.0 * std::f64::consts::PI / np as f64;
        let mut out = Coeffs::zeros(lmax);
        let mut cs = vec![0.0; lmax + 1];
        let mut sn = vec![0.0; lmax + 1];
        for i in 0..nt {
            let row = &values[i * np..(i + 1) * np];
            for m in 0..=lmax {
                let ct = &self.cos_tab[m * np..(m + 1) * np];
                let st = &self.sin_tab[m * np..(m + 1) * np];
                let (mut a, mut b) = (0.0, 0.0);
                for j in 0..np {
                    a += row[j] * ct[j];
                    b += row[j] * st[j];
                }
                let f = if m == 0 { 1.0 } else { SQRT_2 };
                cs[m] = a * dphi * f * self.grid.weights[i];
                sn[m] = b * dphi * f * self.grid.weights[i];
            }
            let data = out.as_mut_slice();
            for l in 0..=lmax {
                for m in 0..=l {
                    let pv = self.legendre(l, m, i);
                    data[Coeffs::index(l, m as i64)] += pv * cs[m];
                    if m > 0 {
                        data[Coeffs::index(l, -(m as i64))] += pv * sn[m];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Generic synthesis with a per-(l, m, ring) radial factor.
    ///
    /// `sin_weight` selects which trig family multiplies the cosine-coefficients:
    /// for plain synthesis cos-coefficients go with cos; for φ-derivatives they
    /// go with -m sin.
    fn synth_with<F>(&self, c: &Coeffs, radial: F, dphi: bool) -> Result<Vec<f64>>
    where
        F: Fn(usize, usize, usize) -> f64,
    {
        self.check_degree(c.lmax())?;
        let (nt, np) = (self.grid.n_theta, self.grid.n_phi);
        let lmax = c.lmax();
        let mut out = vec![0.0; nt * np];
        let mut a = vec![0.0; lmax + 1];
        let mut b = vec![0.0; lmax + 1];
        for i in 0..nt {
            for m in 0..=lmax {
                let (mut sa, mut sb) = (0.0, 0.0);
                for l in m..=lmax {
                    let r = radial(l, m, i);
                    sa += c.get(l, m as i64) * r;
                    if m > 0 {
                        sb += c.get(l, -(m as i64)) * r;
                    }
                }
                a[m] = sa;
                b[m] = sb;
            }
            let row = &mut out[i * np..(i + 1) * np];
            for m in 0..=lmax {
                let ct = &self.cos_tab[m * np..(m + 1) * np];
                let st = &self.sin_tab[m * np..(m + 1) * np];
                if m == 0 {
                    if !dphi {
                        row.iter_mut().for_each(|v| *v += a[0]);
                    }
                    continue;
                }
                let (ca, cb) = if dphi {
                    // d/dφ (a cos mφ + b sin mφ) = m(-a sin + b cos)
                    let mf = m as f64 * SQRT_2;
                    (mf * b[m], -mf * a[m])
                } else {
                    (SQRT_2 * a[m], SQRT_2 * b[m])
                };
                for j in 0..np {
                    row[j] += ca * ct[j] + cb * st[j];
                }
            }
        }
        Ok(out)
    }

    pub fn synthesize(&self, c: &Coeffs) -> Result<Vec<f64>> {
        self.synth_with(c, |l, m, i| self.legendre(l, m, i), false)
    }

    /// Frame components `(∂_θ f, ∂_φ f / sin θ)` of the gradient at the nodes.
    pub fn synthesize_gradient(&self, c: &Coeffs) -> Result<(Vec<f64>, Vec<f64>)> {
        let d_theta = self.synth_with(c, |l, m, i| self.legendre_dtheta(l, m, i), false)?;
        let d_phi = self.synth_with(c, |l, m, i| self.legendre_over_sin(l, m, i), true)?;
        Ok((d_theta, d_phi))
    }

    /// Cartesian surface gradient of grid values, analyzed at degree `lmax`.
    pub fn surface_gradient(&self, values: &[f64], lmax: usize) -> Result<[Vec<f64>; 3]> {
        let c = self.analyze(values, lmax)?;
        self.gradient_from_coeffs(&c)
    }

    pub fn gradient_from_coeffs(&self, c: &Coeffs) -> Result<[Vec<f64>; 3]> {
        let (gt, gp) = self.synthesize_gradient(c)?;
        let n = self.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            let (et, ep) = (&self.grid.e_theta[k], &self.grid.e_phi[k]);
            for a in 0..3 {
                out[a][k] = gt[k] * et[a] + gp[k] * ep[a];
            }
        }
        Ok(out)
    }

    /// Truncate grid values to degree `lmax`.
    pub fn filter(&self, values: &[f64], lmax: usize) -> Result<Vec<f64>> {
        self.synthesize(&self.analyze(values, lmax)?)
    }

    /// Evaluate a coefficient set and its surface gradient at an arbitrary point.
    ///
    /// The point is given as a (not necessarily normalized) 3-vector; the poles
    /// are handled without special cases.
    pub fn eval_point(&self, c: &Coeffs, x: [f64; 3]) -> PointJet {
        eval_point(c, x)
    }
}

/// Free-standing point evaluation (does not need a grid).
pub fn eval_point(c: &Coeffs, x: [f64; 3]) -> PointJet {
    eval_points_many(&[c], x)[0]
}

/// Evaluate several coefficient sets at one point, sharing the Legendre table.
pub fn eval_points_many(cs: &[&Coeffs], x: [f64; 3]) -> Vec<PointJet> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let theta = (x[2] / r).clamp(-1.0, 1.0).acos();
    let phi = x[1].atan2(x[0]);
    let lmax = cs.iter().map(|c| c.lmax()).max().unwrap_or(0);
    let t = LegendreTable::new(lmax, theta);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let et = [ct * cp, ct * sp, -st];
    let ep = [-sp, cp, 0.0];
    let trig: Vec<(f64, f64)> = (0..=lmax).map(|m| (m as f64 * phi).sin_cos()).collect();
    cs.iter()
        .map(|c| {
            let (v, gt, gp) = jet_sums(c, &t, &trig);
            PointJet {
                value: v,
                grad: [
                    gt * et[0] + gp * ep[0],
                    gt * et[1] + gp * ep[1],
                    gt * et[2] + gp * ep[2],
                ],
            }
        })
        .collect()
}

fn jet_sums(c: &Coeffs, t: &LegendreTable, trig: &[(f64, f64)]) -> (f64, f64, f64) {
    let lmax = c.lmax();
    let (mut v, mut gt, mut gp) = (0.0, 0.0, 0.0);
    for m in 0..=lmax {
        let (s, co) = trig[m];
        for l in m..=lmax {
            let k = tri_index(l, m);
            if m == 0 {
                let a = c.get(l, 0);
                v += a * t.p[k];
                gt += a * t.dp[k];
            } else {
                let (a, b) = (c.get(l, m as i64), c.get(l, -(m as i64)));
                let trig = SQRT_2 * (a * co + b * s);
                let dtrig = SQRT_2 * m as f64 * (-a * s + b * co);
                v += trig * t.p[k];
                gt += trig * t.dp[k];
                gp += dtrig * t.p_over_sin[k];
            }
        }
    }
    (v, gt, gp)
}
