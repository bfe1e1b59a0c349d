//! Inversive distance circle packings on closed triangulated surfaces.
//!
//! The crate covers the packing metric itself (radii, inversive distances,
//! edge lengths), the classical and extended discrete Gaussian curvature,
//! combinatorial Ricci flows in `u`-coordinates, the Ricci potential with a
//! damped Newton solver for prescribed curvature, and the combinatorial
//! lower bounds `Y_A` that constrain which curvatures are realizable.

pub mod angles;
pub mod complex;
pub mod curvature;
pub mod error;
pub mod flow;
pub mod io;
pub mod obstructions;
pub mod ode;
pub mod packing;
pub mod potential;
pub mod quadrature;
pub mod surfaces;

pub use complex::{SurfaceComplex, VertexSubset};
pub use error::{Error, Result};
pub use packing::{Background, InversiveDistances, PackingMetric, UCoords};

/// Library version string.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
