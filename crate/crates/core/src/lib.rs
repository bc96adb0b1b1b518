//! Numerical bilipschitz geometry of graph surfaces `z = f(x, y)` with an
//! isolated singularity at the origin.
//!
//! The pipeline runs a tangent-cone check, locates exceptional rays and their
//! Nash fibers, decomposes the wedge around each exceptional ray into flat and
//! fast pieces, and decides whether the surface is bilipschitz to the plane.
//! Supporting modules build explicit vertical maps, probe the inner metric on
//! a mesh, and assemble Hölder complexes.

pub mod arc;
pub mod bilip;
pub mod cone;
pub mod config;
pub mod corpus;
pub mod error;
pub mod expr;
pub mod holder;
pub mod metric;
pub mod pieces;
pub mod rational;
pub mod report;
pub mod scan;
pub mod surface;

pub use arc::{ArcSpec, LimitClass, PowerFit, SampleSchedule};
pub use config::Config;
pub use holder::{Beta, HolderComplex};
pub use pieces::{PieceClass, PlaneVerdict, WedgePartition};
pub use report::AnalysisReport;
pub use error::{Error, Result};
pub use expr::{parse_expr, Expr, Jet1, ProjSlope, Slope};
pub use surface::{parse_surf, Ray, SurfFile, SurfaceSpec};
