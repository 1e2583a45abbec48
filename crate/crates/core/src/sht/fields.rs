//! Frame-component representations of 1-forms and trace-free symmetric 2-tensors.

use super::tensor::Tensor;
use super::transform::Sphere;
use crate::error::Result;

/// 1-form with components `(ω(e_θ), ω(e_φ))` at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct OneFormField {
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

/// Trace-free symmetric 2-tensor; `T22 = -T11` and `T21 = T12`.
#[derive(Debug, Clone, PartialEq)]
pub struct STTensorField {
    pub t11: Vec<f64>,
    pub t12: Vec<f64>,
}

impl OneFormField {
    pub fn zeros(n: usize) -> Self {
        Self {
            e1: vec![0.0; n],
            e2: vec![0.0; n],
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_comps(1, vec![self.e1.clone(), self.e2.clone()]).expect("matching lengths")
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        assert_eq!(t.rank(), 1);
        Self {
            e1: t.comps()[0].clone(),
            e2: t.comps()[1].clone(),
        }
    }

    pub fn pointwise_norm_sq(&self) -> Vec<f64> {
        self.e1.iter().zip(&self.e2).map(|(a, b)| a * a + b * b).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.pointwise_norm_sq().into_iter().fold(0.0_f64, f64::max).sqrt()
    }

    /// `∫⟨α, β⟩ dvol_g̊`.
    pub fn inner(&self, other: &Self, sphere: &Sphere) -> f64 {
        let v: Vec<f64> = (0..self.e1.len())
            .map(|k| self.e1[k] * other.e1[k] + self.e2[k] * other.e2[k])
            .collect();
        sphere.grid.integrate(&v)
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        for (a, b) in self.e1.iter_mut().zip(&other.e1) {
            *a += s * b;
        }
        for (a, b) in self.e2.iter_mut().zip(&other.e2) {
            *a += s * b;
        }
    }
}

impl STTensorField {
    pub fn zeros(n: usize) -> Self {
        Self {
            t11: vec![0.0; n],
            t12: vec![0.0; n],
        }
    }

    pub fn t22(&self) -> Vec<f64> {
        self.t11.iter().map(|x| -x).collect()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_comps(
            2,
            vec![self.t11.clone(), self.t12.clone(), self.t12.clone(), self.t22()],
        )
        .expect("matching lengths")
    }

    /// Trace-free symmetric part of a rank-2 tensor.
    pub fn from_tensor(t: &Tensor) -> Self {
        assert_eq!(t.rank(), 2);
        let c = t.comps();
        let n = c[0].len();
        Self {
            t11: (0..n).map(|k| 0.5 * (c[0][k] - c[3][k])).collect(),
            t12: (0..n).map(|k| 0.5 * (c[1][k] + c[2][k])).collect(),
        }
    }

    /// Pointwise `|T|²_g̊ = 2(T11² + T12²)`.
    pub fn pointwise_norm_sq(&self) -> Vec<f64> {
        self.t11
            .iter()
            .zip(&self.t12)
            .map(|(a, b)| 2.0 * (a * a + b * b))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.t11.iter().chain(&self.t12).fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn inner(&self, other: &Self, sphere: &Sphere) -> f64 {
        let v: Vec<f64> = (0..self.t11.len())
            .map(|k| 2.0 * (self.t11[k] * other.t11[k] + self.t12[k] * other.t12[k]))
            .collect();
        sphere.grid.integrate(&v)
    }
}

/// Squared `L²(g̊)` norm of any tensor.
pub fn l2_norm_sq(t: &Tensor, sphere: &Sphere) -> Result<f64> {
    sphere.check_len(&t.comps()[0])?;
    Ok(sphere.grid.integrate(&t.norm_sq_round()))
}
