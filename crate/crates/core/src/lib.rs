//! Nonexistence certificates for supercritical p-Laplacian Dirichlet problems
//! on thin tubes around planar curves.
//!
//! The pipeline is: a [`Curve`] is reparametrized by arclength and extended,
//! a [`TubeChart`] supplies `(t, r)` coordinates on its tubular neighbourhood,
//! [`field`] evaluates the Pohozaev-type vector field and the `mu(eps)` bound,
//! and [`certificate`] turns that into a critical half-width below which only
//! the trivial solution exists. [`solver`] is a P1 finite-element solver used
//! to check the underlying integral identity on computed solutions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod curve;
pub mod error;
pub mod field;
pub mod geom;
pub mod mesh;
mod quadrature;
pub mod solver;
pub mod tube;

pub use certificate::{
    check_condition_f, coefficient, critical_eps, Certificate, ConditionReport, Exponents, Nonlinearity, Verdict,
};
pub use curve::{reparametrize_arclength, Curve, CurveKind, CurveSpec, Frame};
pub use error::{Error, Result};

pub use field::{FieldSample, MuGrid, MuProfile, MuValue};
pub use geom::Point;
pub use mesh::{mesh_disk, mesh_square, mesh_tube, BoundaryEdge, BoundaryTag, TriMesh, TubeMesh};

pub use solver::{DiscreteSolution, IdentityReport, SolverOptions, Source};
pub use tube::{build_chart, ChartLocation, TubeChart};
