//! Finite element methods for elliptic interface problems on meshes that do
//! not follow the interface: a standard P1 baseline, a fitted enriched
//! method, and a hybrid method with Lagrange multipliers on cut edges.

pub mod assembly;
pub mod benchmark;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod point;
pub mod solver;
pub mod sparse;

pub use assembly::{CoefficientField, Method};
pub use benchmark::{ErrorReport, NormVariant, RadialProblem};
pub use error::{Error, GeometryError, MeshError, Result, SolverError};
pub use geometry::{FittedMesh, LevelSetInterface, Side};
pub use mesh::Mesh;
pub use point::Point;
pub use solver::SolverConfig;
