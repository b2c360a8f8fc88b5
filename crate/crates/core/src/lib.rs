//! Hierarchical dyadic mesh refinement for d-variate truncated hierarchical
//! B-splines (THB-splines), with admissibility-preserving refinement and an
//! instrumented harness for empirical verification of the linear-complexity
//! bound on refinement cascades.
//!
//! The crate is organized around:
//! - [`grid`]: integer index arithmetic on the infinite dyadic grid family;
//! - [`mesh`]: nested domain hierarchies and their active-element sets;
//! - [`basis`]: B-spline index sets, two-scale relation, truncation and
//!   THB-spline construction;
//! - [`admissibility`]: checkers for admissible and strictly admissible
//!   meshes of class `m`;
//! - [`refine`]: the neighborhood-propagating refinement algorithms with
//!   provenance instrumentation;
//! - [`overlay`]: coarsest common refinement of two meshes;
//! - [`complexity`]: the refinement-complexity constants, the lambda
//!   weighting function and verification of the counting inequalities on
//!   recorded histories;
//! - [`io`]: mesh/marks serialization, SVG rendering and CSV output.
//!
//! Real-valued computations are generic over [`scalar::Real`] (`f32` or
//! `f64`); the aliases at the crate root fix `f64`, which the CLI and test
//! suites use throughout.

pub mod admissibility;
pub mod basis;
pub mod complexity;
pub mod config;
pub mod grid;
pub mod io;
pub mod mesh;
pub mod overlay;
pub mod refine;
pub mod scalar;

pub use config::{ConfigError, MeshConfig};
pub use grid::{
    ancestor, children, midpoint_distance, support_extension, Element, ElementSet, GridError,
};
pub use mesh::{CellSet, DomainHierarchy, HierarchicalMesh, MeshError};
pub use scalar::Real;

pub use basis::{hb_basis, level_basis, two_scale, BasisError, BsplineId};

/// Truncated hierarchical basis function over the default `f64` scalar.
pub type ThbFunction = basis::ThbFunction<f64>;

/// Complexity constants over the default `f64` scalar.
pub type ComplexityConstants = complexity::ComplexityConstants<f64>;
