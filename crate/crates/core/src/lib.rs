//! Projective geometry of two-dimensional metrics: symbolic expressions,
//! curvature, projective connections and their symmetries, the linear system
//! for metrics sharing a connection, the normal forms of metrics with
//! transitive projective symmetry, and geodesic-flow checks.

pub mod acceptance;
pub mod catalog;
pub mod expr;
pub mod flow;
pub mod geometry;
pub mod liouville;
pub mod projective;
pub mod scalar;
pub mod specfile;

pub use catalog::{distinguish, fingerprint, instantiate, NormalFormId, NormalFormParams, Verdict};
pub use expr::{parse, simplify, Coord, Expr, ParamEnv};
pub use geometry::{christoffel, scalar_curvature, Domain, Metric2};
pub use liouville::QuadraticForm;
pub use projective::{ProjectiveConnection, VectorField};
pub use scalar::Scalar;
pub use specfile::SpecFile;

pub type State64 = flow::GeodesicState<f64>;
pub type State32 = flow::GeodesicState<f32>;
pub type Trajectory64 = flow::Trajectory<f64>;
pub type Trajectory32 = flow::Trajectory<f32>;
