//! P1 finite elements on the reference disk.

pub mod assembly;
pub mod field;
pub mod mesh;
pub mod mesh_io;
pub mod quadrature;
pub mod sparse;

pub use assembly::{
    assemble_form, mass_matrix, stiffness_matrix, Assembled, Coefficient, Form, InnerProduct, InnerProductKind,
    PointSet,
};
pub use field::{interpolate, interpolate_boundary, interpolate_vector, ScalarField, TraceField, VectorField};
pub use mesh::Mesh;
pub use quadrature::QuadratureTable;
pub use sparse::SparseMatrix;
