//! Covariant tensors on the round sphere, stored by orthonormal-frame components.
//!
//! Frame index 0 is `e_θ`, index 1 is `e_φ`. A rank-`r` tensor stores `2^r`
//! node-value arrays, with the first slot as the most significant digit.
//! Round covariant derivatives go through the Cartesian embedding: every
//! Cartesian component is a smooth function on the sphere, its surface
//! gradient is taken spectrally, and projecting back onto the frame supplies
//! the tangential projection of each slot.

use super::transform::Sphere;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rank: usize,
    comps: Vec<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(rank: usize, n: usize) -> Self {
        Self {
            rank,
            comps: vec![vec![0.0; n]; 1 << rank],
        }
    }

    pub fn scalar(values: Vec<f64>) -> Self {
        Self {
            rank: 0,
            comps: vec![values],
        }
    }

    pub fn from_comps(rank: usize, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != 1 << rank {
            return Err(Error::InvalidArgument(format!(
                "rank {rank} tensor needs {} components, got {}",
                1 << rank,
                comps.len()
            )));
        }
        let n = comps[0].len();
        if comps.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidArgument("ragged tensor components".into()));
        }
        Ok(Self { rank, comps })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nodes(&self) -> usize {
        self.comps[0].len()
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.comps
    }

    pub fn into_comps(self) -> Vec<Vec<f64>> {
        self.comps
    }

    /// Component by multi-index (each entry 0 or 1).
    pub fn comp(&self, idx: &[usize]) -> &[f64] {
        &self.comps[flat(idx)]
    }

    pub fn comp_mut(&mut self, idx: &[usize]) -> &mut Vec<f64> {
        &mut self.comps[flat(idx)]
    }

    pub fn add_scaled(&mut self, other: &Tensor, s: f64) {
        assert_eq!(self.rank, other.rank);
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.comps.iter_mut().flatten().for_each(|x| *x *= s);
    }

    /// Pointwise multiplication by a scalar field.
    pub fn mul_pointwise(&mut self, f: &[f64]) {
        for c in &mut self.comps {
            for (x, y) in c.iter_mut().zip(f) {
                *x *= y;
            }
        }
    }

    /// Pointwise squared round norm `|T|²_g̊`.
    pub fn norm_sq_round(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes()];
        for c in &self.comps {
            for (o, x) in out.iter_mut().zip(c) {
                *o += x * x;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Cartesian components `C_{a1..ar} = T(e_{i1}..) e_{i1}[a1]...`, `3^r` arrays.
    pub fn to_cartesian(&self, sphere: &Sphere) -> Vec<Vec<f64>> {
        let r = self.rank;
        let n = self.nodes();
        let n3 = 3usize.pow(r as u32);
        let mut out = vec![vec![0.0; n]; n3];
        let mut digits = vec![0usize; r];
        let mut fdig = vec![0usize; r];
        for node in 0..n {
            let frame = [&sphere.grid.e_theta[node], &sphere.grid.e_phi[node]];
            for (ci, o) in out.iter_mut().enumerate() {
                base_digits(ci, 3, &mut digits);
                let mut acc = 0.0;
                for (fi, comp) in self.comps.iter().enumerate() {
                    base_digits(fi, 2, &mut fdig);
                    let mut w = comp[node];
                    for s in 0..r {
                        w *= frame[fdig[s]][digits[s]];
                    }
                    acc += w;
                }
                o[node] = acc;
            }
        }
        out
    }
}

fn flat(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| (acc << 1) | i)
}

/// Digits of `k` in `base`, most significant first, written into `out`.
pub(crate) fn base_digits(mut k: usize, base: usize, out: &mut [usize]) {
    for d in out.iter_mut().rev() {
        *d = k % base;
        k /= base;
    }
}

/// Round covariant derivative `∇̊T`, new index first.
///
/// Scalars are analyzed at the bandlimit; Cartesian components of tensors
/// at the sphere's maximal degree, since a tangent tensor of degree `L`
/// has Cartesian components of degree up to `L` plus its rank.
pub fn nabla_round(sphere: &Sphere, t: &Tensor) -> Result<Tensor> {
    let r = t.rank;
    let n = t.nodes();
    sphere.check_len(&t.comps[0])?;
    let lmax = if r == 0 {
        sphere.bandlimit()
    } else {
        sphere.max_degree()
    };
    let cart = t.to_cartesian(sphere);
    let grads = cart
        .iter()
        .map(|c| sphere.synthesize_gradient(&sphere.analyze(c, lmax)?))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Tensor::zeros(r + 1, n);
    let nf = 1usize << r;
    let mut cdig = vec![0usize; r];
    let mut fdig = vec![0usize; r];
    for node in 0..n {
        let frame = [&sphere.grid.e_theta[node], &sphere.grid.e_phi[node]];
        for fi in 0..nf {
            base_digits(fi, 2, &mut fdig);
            let (mut a0, mut a1) = (0.0, 0.0);
            for (ci, (g0, g1)) in grads.iter().enumerate() {
                base_digits(ci, 3, &mut cdig);
                let mut w = 1.0;
                for s in 0..r {
                    w *= frame[fdig[s]][cdig[s]];
                }
                if w != 0.0 {
                    a0 += w * g0[node];
                    a1 += w * g1[node];
                }
            }
            out.comps[fi][node] = a0;
            out.comps[nf + fi][node] = a1;
        }
    }
    Ok(out)
}

/// `[T, ∇̊T, ..., ∇̊^k T]`.
pub fn nabla_round_iter(sphere: &Sphere, t: &Tensor, k: usize) -> Result<Vec<Tensor>> {
    let mut out = vec![t.clone()];
    for _ in 0..k {
        let next = nabla_round(sphere, out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

/// Contract the first two slots with the round metric.
pub fn trace_first_pair(t: &Tensor) -> Tensor {
    assert!(t.rank >= 2);
    let rest = t.rank - 2;
    let nr = 1usize << rest;
    let n = t.nodes();
    let mut out = Tensor::zeros(rest, n);
    for k in 0..nr {
        for a in 0..2 {
            let src = &t.comps[((a << 1 | a) << rest) | k];
            for (o, x) in out.comps[k].iter_mut().zip(src) {
                *o += x;
            }
        }
    }
    out
}
