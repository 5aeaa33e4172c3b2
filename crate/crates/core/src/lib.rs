//! Arbitrary-Lagrangian-Eulerian finite elements for osmotic cell swelling
//! and a mass-conservative POD/EIM reduced model of it.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! offline pipeline, the archive format and the study harness use.

pub mod error;
pub mod fem;
pub mod fom;
pub mod geometry;
pub mod offline;
pub mod online;
pub mod scalar;
pub mod study;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mesh = fem::Mesh<f64>;
pub type QuadratureTable = fem::QuadratureTable<f64>;
pub type InnerProduct = fem::InnerProduct<f64>;
pub type SparseMatrix = fem::SparseMatrix<f64>;
pub type ScalarField = fem::ScalarField<f64>;
pub type VectorField = fem::VectorField<f64>;
pub type TraceField = fem::TraceField<f64>;
