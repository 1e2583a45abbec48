//! Weighted Gram matrices in the real harmonic basis.
//!
//! Rows and columns follow [`Coeffs::index`]. Assembly factors each integral
//! through per-ring Fourier products, so the cost is `O(N² n_θ)` rather than
//! `O(N² n_θ n_φ)`.

use nalgebra::DMatrix;

use super::coeffs::Coeffs;
use super::transform::Sphere;
use crate::error::{Error, Result};

struct RingTables {
    // value, e_θ-derivative and e_φ-derivative radial factors per basis index
    p: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
}

fn basis_orders(lmax: usize) -> Vec<(usize, i64)> {
    let mut out = Vec::with_capacity((lmax + 1) * (lmax + 1));
    for l in 0..=lmax {
        for m in -(l as i64)..=(l as i64) {
            out.push((l, m));
        }
    }
    out
}

fn ring_tables(sphere: &Sphere, lm: &[(usize, i64)], ring: usize) -> RingTables {
    let mut p = Vec::with_capacity(lm.len());
    let mut d = Vec::with_capacity(lm.len());
    let mut e = Vec::with_capacity(lm.len());
    for &(l, m) in lm {
        let am = m.unsigned_abs() as usize;
        p.push(sphere.legendre(l, am, ring));
        d.push(sphere.legendre_dtheta(l, am, ring));
        // ∂_φ t_m = -m t_{-m}
        e.push(-(m as f64) * sphere.legendre_over_sin(l, am, ring));
    }
    RingTables { p, d, e }
}

/// `W(μ, ν) = Σ_j x_j t_μ(φ_j) t_ν(φ_j) Δφ`, indexed by `μ + lmax`.
fn fourier_product(sphere: &Sphere, lmax: usize, ring: usize, x: &[f64]) -> Vec<f64> {
    let np = sphere.grid.n_phi;
    let dphi = 2.0 * std::f64::consts::PI / np as f64;
    let w = 2 * lmax + 1;
    let row = &x[ring * np..(ring + 1) * np];
    let trig: Vec<Vec<f64>> = (-(lmax as i64)..=(lmax as i64))
        .map(|m| (0..np).map(|j| sphere.angular(m, j)).collect())
        .collect();
    let mut out = vec![0.0; w * w];
    for a in 0..w {
        let weighted: Vec<f64> = trig[a].iter().zip(row).map(|(t, v)| t * v).collect();
        for b in a..w {
            let s: f64 = weighted.iter().zip(&trig[b]).map(|(x, y)| x * y).sum::<f64>() * dphi;
            out[a * w + b] = s;
            out[b * w + a] = s;
        }
    }
    out
}

fn check(sphere: &Sphere, lmax: usize, fields: &[&[f64]]) -> Result<()> {
    if lmax > sphere.max_degree() {
        return Err(Error::DegreeOutOfRange {
            max: sphere.max_degree(),
            got: lmax,
        });
    }
    for f in fields {
        sphere.check_len(f)?;
    }
    Ok(())
}

/// `G_ab = ∫ w Y_a Y_b dvol_g̊` for all real harmonics of degree ≤ `lmax`.
pub fn weighted_mass(sphere: &Sphere, lmax: usize, weight: &[f64]) -> Result<DMatrix<f64>> {
    check(sphere, lmax, &[weight])?;
    let lm = basis_orders(lmax);
    let n = lm.len();
    let wdim = 2 * lmax + 1;
    let mut g = DMatrix::<f64>::zeros(n, n);
    for ring in 0..sphere.grid.n_theta {
        let t = ring_tables(sphere, &lm, ring);
        let wq = sphere.grid.weights[ring];
        let f = fourier_product(sphere, lmax, ring, weight);
        for c in 0..n {
            let fc = (lm[c].1 + lmax as i64) as usize;
            let pc = wq * t.p[c];
            for r in 0..=c {
                let fr = (lm[r].1 + lmax as i64) as usize;
                g[(r, c)] += pc * t.p[r] * f[fr * wdim + fc];
            }
        }
    }
    symmetrize_upper(&mut g);
    Ok(g)
}

/// `S_ab = ∫ a^{ij} e_i(Y_a) e_j(Y_b) dvol_g̊` with frame coefficients `a^{ij}`.
pub fn weighted_stiffness(sphere: &Sphere, lmax: usize, a11: &[f64], a12: &[f64], a22: &[f64]) -> Result<DMatrix<f64>> {
    check(sphere, lmax, &[a11, a12, a22])?;
    let lm = basis_orders(lmax);
    let n = lm.len();
    let wdim = 2 * lmax + 1;
    let off = lmax as i64;
    let mut g = DMatrix::<f64>::zeros(n, n);
    for ring in 0..sphere.grid.n_theta {
        let t = ring_tables(sphere, &lm, ring);
        let wq = sphere.grid.weights[ring];
        let f11 = fourier_product(sphere, lmax, ring, a11);
        let f12 = fourier_product(sphere, lmax, ring, a12);
        let f22 = fourier_product(sphere, lmax, ring, a22);
        for c in 0..n {
            let mc = lm[c].1;
            let (c_pos, c_neg) = ((mc + off) as usize, (-mc + off) as usize);
            for r in 0..=c {
                let mr = lm[r].1;
                let (r_pos, r_neg) = ((mr + off) as usize, (-mr + off) as usize);
                let v = t.d[r] * t.d[c] * f11[r_pos * wdim + c_pos]
                    + t.d[r] * t.e[c] * f12[r_pos * wdim + c_neg]
                    + t.e[r] * t.d[c] * f12[r_neg * wdim + c_pos]
                    + t.e[r] * t.e[c] * f22[r_neg * wdim + c_neg];
                g[(r, c)] += wq * v;
            }
        }
    }
    symmetrize_upper(&mut g);
    Ok(g)
}

fn symmetrize_upper(g: &mut DMatrix<f64>) {
    let n = g.nrows();
    for c in 0..n {
        for r in 0..c {
            g[(c, r)] = g[(r, c)];
        }
    }
}

/// Coefficient vector of a real-basis expansion as an `nalgebra` vector.
pub fn to_vector(c: &Coeffs) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(c.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sht::ops::lambda;

    #[test]
    fn unit_weight_gives_identity_and_laplacian() {
        let s = Sphere::with_bandlimit(6).unwrap();
        let one = vec![1.0; s.len()];
        let zero = vec![0.0; s.len()];
        let m = weighted_mass(&s, 6, &one).unwrap();
        let k = weighted_stiffness(&s, 6, &one, &zero, &one).unwrap();
        for r in 0..m.nrows() {
            let l = (r as f64).sqrt().floor() as usize;
            for c in 0..m.ncols() {
                let id = if r == c { 1.0 } else { 0.0 };
                assert!((m[(r, c)] - id).abs() < 1e-13);
                assert!((k[(r, c)] - id * lambda(l)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn mass_matches_direct_quadrature() {
        let s = Sphere::with_bandlimit(5).unwrap();
        let w: Vec<f64> = s
            .grid
            .position
            .iter()
            .map(|p| 1.0 + 0.3 * p[0] * p[2] + 0.1 * p[1])
            .collect();
        let m = weighted_mass(&s, 4, &w).unwrap();
        let a = s.synthesize(&Coeffs::unit(4, 3, -2)).unwrap();
        let b = s.synthesize(&Coeffs::unit(4, 2, 1)).unwrap();
        let direct: Vec<f64> = (0..s.len()).map(|k| w[k] * a[k] * b[k]).collect();
        let i = Coeffs::index(3, -2);
        let j = Coeffs::index(2, 1);
        assert!((m[(i, j)] - s.grid.integrate(&direct)).abs() < 1e-13);
    }
}
