//! Numerical toolkit for semilinear elliptic systems `−𝓛u = ΛF(x, u)` with
//! `m` coupled components: minimal solutions by monotone iteration, the
//! extremal parameter hypersurface, the principal spectral hypersurface and
//! linearized stability.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extremal;
pub mod expr;
pub mod field;
pub mod linalg;
pub mod mesh;
pub mod minimal;
pub mod nonlinearity;
pub mod scalar;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Domain = mesh::DiscreteDomain<f64>;
pub type Operator = mesh::DiscreteOperator<f64>;
pub type Spec = mesh::OperatorSpec<f64>;
pub type Field = field::GridFieldVec<f64>;
pub type Map = nonlinearity::NonlinearMap<f64>;
pub type Matrix = linalg::SparseMatrix<f64>;
