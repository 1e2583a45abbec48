//! Spherical-harmonic spectral core.

pub mod coeffs;
pub mod fields;
pub mod gram;
pub mod grid;
pub mod legendre;
pub mod ops;
pub mod tensor;
pub mod transform;

pub use coeffs::{Coeffs, ComplexCoeff};
pub use fields::{OneFormField, STTensorField};
pub use grid::{build_grid, Bandlimit, SphGrid, TENSOR_HEADROOM};
pub use ops::{
    basis_norms, conformal_killing, div_one_form, div_st, grad, hodge_star, lambda, laplacian_round, BasisKind,
};
pub use tensor::Tensor;
pub use transform::{eval_point, eval_points_many, PointJet, Sphere};
