//! Full-order ALE model.

pub mod extension;
pub mod params;
pub mod solver;

pub use extension::ExtensionOperator;
pub use params::{ParameterDomain, ParameterVector, Shape, GAMMA, U_EXT, U_INIT};
pub use solver::{total_mass, variance, FomSolver, FomState, Trajectory};
