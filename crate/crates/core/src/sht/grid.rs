use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::legendre::gauss_legendre;
use crate::error::{Error, Result};

/// Maximum spherical-harmonic degree retained by scalar fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Bandlimit(usize);

impl Bandlimit {
    pub const MIN: usize = 4;

    pub fn new(l: usize) -> Result<Self> {
        if l < Self::MIN {
            return Err(Error::BandlimitTooSmall(l));
        }
        Ok(Self(l))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for Bandlimit {
    type Error = Error;
    fn try_from(l: usize) -> Result<Self> {
        Self::new(l)
    }
}

impl From<Bandlimit> for usize {
    fn from(b: Bandlimit) -> usize {
        b.0
    }
}

/// Degree headroom used for Cartesian components of tangent tensors.
///
/// A rank-k tangent tensor assembled from degree-L data has Cartesian
/// components of degree at most L + k; four extra degrees cover every
/// tensor this crate differentiates.
pub const TENSOR_HEADROOM: usize = 4;

/// Gauss-Legendre colatitudes times equispaced longitudes.
///
/// Nodes lie strictly inside (0, π), so the orthonormal frame
/// `{e_θ, e_φ}` is defined at every node.
#[derive(Debug, Clone)]
pub struct SphGrid {
    pub bandlimit: Bandlimit,
    pub n_theta: usize,
    pub n_phi: usize,
    pub theta: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub sin_theta: Vec<f64>,
    /// Gauss-Legendre weights in `cos θ`; they sum to 2.
    pub weights: Vec<f64>,
    pub phi: Vec<f64>,
    /// Quadrature weight of every node, `w_i · 2π / n_φ`; sums to 4π.
    pub node_weights: Vec<f64>,
    /// Unit position vectors, `x[node]`.
    pub position: Vec<[f64; 3]>,
    pub e_theta: Vec<[f64; 3]>,
    pub e_phi: Vec<[f64; 3]>,
}

pub fn build_grid(bandlimit: Bandlimit) -> SphGrid {
    let l = bandlimit.get();
    let n_theta = (3 * (l + 1)).div_ceil(2).max(l + TENSOR_HEADROOM + 1) + 2;
    let n_phi = 2 * n_theta;
    let (x, w) = gauss_legendre(n_theta);
    let theta: Vec<f64> = x.iter().map(|c| c.acos()).collect();
    let sin_theta: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let phi: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
    let dphi = 2.0 * PI / n_phi as f64;

    let n = n_theta * n_phi;
    let mut node_weights = Vec::with_capacity(n);
    let mut position = Vec::with_capacity(n);
    let mut e_theta = Vec::with_capacity(n);
    let mut e_phi = Vec::with_capacity(n);
    for i in 0..n_theta {
        let (st, ct) = (sin_theta[i], x[i]);
        for &p in &phi {
            let (sp, cp) = p.sin_cos();
            node_weights.push(w[i] * dphi);
            position.push([st * cp, st * sp, ct]);
            e_theta.push([ct * cp, ct * sp, -st]);
            e_phi.push([-sp, cp, 0.0]);
        }
    }

    SphGrid {
        bandlimit,
        n_theta,
        n_phi,
        theta,
        cos_theta: x,
        sin_theta,
        weights: w,
        phi,
        node_weights,
        position,
        e_theta,
        e_phi,
    }
}

impl SphGrid {
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frame vector `e_i` at a node (`0 → e_θ`, `1 → e_φ`).
    #[inline]
    pub fn frame(&self, node: usize, i: usize) -> &[f64; 3] {
        if i == 0 {
            &self.e_theta[node]
        } else {
            &self.e_phi[node]
        }
    }

    /// Integral of grid values against the round volume form.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.node_weights).map(|(v, w)| v * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_bandlimit() {
        assert!(matches!(Bandlimit::new(3), Err(Error::BandlimitTooSmall(3))));
    }

    #[test]
    fn quadrature_normalization() {
        let g = build_grid(Bandlimit::new(4).unwrap());
        assert!(g.n_theta >= 5 && g.n_phi >= 9);
        assert!((g.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!((g.node_weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
        assert!(g.theta.iter().all(|&t| t > 0.0 && t < PI));
    }
}
