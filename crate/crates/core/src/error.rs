use thiserror::Error;

use crate::complex::Edge;

/// Errors raised by the geometric and numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("face list is empty")]
    EmptyComplex,

    #[error("face {face} has a repeated vertex: {vertices:?}")]
    BadFace { face: usize, vertices: [usize; 3] },

    #[error("non-manifold edges (each edge must lie in exactly two faces): {edges:?}")]
    NonManifold { edges: Vec<Edge> },

    #[error("link of vertex {vertex} is not a single cycle")]
    DisconnectedLink { vertex: usize },

    #[error("invalid vertex subset: {0}")]
    InvalidSubset(String),

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("inversive distance {value} on edge {edge} is out of range")]
    InvalidInversive { edge: usize, value: f64 },

    #[error("radius {value} at vertex {vertex} must be positive and finite")]
    InvalidRadius { vertex: usize, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("value {value} exceeds the hyperbolic overflow guard {limit}")]
    Range { value: f64, limit: f64 },

    #[error("metric is not in the admissible space; violating faces: {faces:?}")]
    NotInOmega { faces: Vec<usize> },

    #[error("derivative undefined at the degenerate boundary (face {face:?})")]
    Boundary { face: Option<usize> },

    #[error("integration produced a non-finite state at t = {t}")]
    Step { t: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("adaptive quadrature exceeded {evaluations} integrand evaluations")]
    Quadrature { evaluations: usize },

    #[error("line search found no descent after {iterations} iterations (residual {residual:e})")]
    NoDescent { iterations: usize, residual: f64 },

    #[error("no convergence within {iterations} iterations (residual {residual:e}, |u| = {u_norm:e})")]
    MaxIter {
        iterations: usize,
        residual: f64,
        u_norm: f64,
    },

    #[error("no solution found after {attempts} starts (best residual {best_residual:e})")]
    NotFound { attempts: usize, best_residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
