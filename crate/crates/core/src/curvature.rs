//! Vertex curvature `K_i = 2π − Σ θ_i`, its extension to degenerate faces,
//! the Gauss-Bonnet defect, and the curvature Jacobian `L = ∂K/∂u`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::angles::{angle_jacobian_u, extended_angles, triangle_area, GeneralizedAngles, TriangleLengths};
use crate::complex::SurfaceComplex;
use crate::error::{Error, Result};
use crate::packing::{lengths_from_radii, omega_from_lengths, Background, PackingMetric};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureVector {
    pub values: Vec<f64>,
    /// True if at least one face was degenerate and its angles came from the extension.
    pub extended: bool,
    /// `Area(M)` as the sum of hyperbolic angle defects; 0 in Euclidean background.
    pub total_area: f64,
    pub degenerate_faces: Vec<usize>,
}

/// Angles of every face, in face order.
pub(crate) fn face_angles(
    complex: &SurfaceComplex,
    background: Background,
    lengths: &[f64],
) -> Result<Vec<GeneralizedAngles>> {
    (0..complex.face_count())
        .map(|f| {
            let x = complex.face_edges(f).map(|e| lengths[e]);
            extended_angles(background, &TriangleLengths::new(x)?)
        })
        .collect()
}

fn assemble(complex: &SurfaceComplex, background: Background, angles: &[GeneralizedAngles]) -> CurvatureVector {
    let mut values = vec![2.0 * PI; complex.vertex_count()];
    let mut total_area = 0.0;
    let mut degenerate_faces = Vec::new();
    for (f, a) in angles.iter().enumerate() {
        let tri = complex.face(f);
        for c in 0..3 {
            values[tri[c]] -= a.theta[c];
        }
        if a.degenerate {
            degenerate_faces.push(f);
        }
        if background == Background::Hyperbolic {
            total_area += triangle_area(background, a);
        }
    }
    CurvatureVector {
        values,
        extended: !degenerate_faces.is_empty(),
        total_area,
        degenerate_faces,
    }
}

/// Extended curvature from raw radii; the entry point used by flows and potentials.
pub(crate) fn extended_curvature_raw(
    complex: &SurfaceComplex,
    background: Background,
    inversive: &[f64],
    radii: &[f64],
) -> Result<CurvatureVector> {
    let lengths = lengths_from_radii(complex, background, inversive, radii)?;
    let angles = face_angles(complex, background, &lengths)?;
    Ok(assemble(complex, background, &angles))
}

/// Classical curvature; defined only on the admissible space Ω.
pub fn curvature(complex: &SurfaceComplex, metric: &PackingMetric) -> Result<CurvatureVector> {
    let lengths = lengths_from_radii(
        complex,
        metric.background(),
        metric.inversive().values(),
        metric.radii(),
    )?;
    let omega = omega_from_lengths(complex, &lengths);
    if !omega.inside {
        return Err(Error::NotInOmega {
            faces: omega.violating_faces,
        });
    }
    let angles = face_angles(complex, metric.background(), &lengths)?;
    Ok(assemble(complex, metric.background(), &angles))
}

/// Curvature for any positive radii, with degenerate faces contributing `(π, 0, 0)`.
pub fn extended_curvature(complex: &SurfaceComplex, metric: &PackingMetric) -> Result<CurvatureVector> {
    extended_curvature_raw(
        complex,
        metric.background(),
        metric.inversive().values(),
        metric.radii(),
    )
}

/// `Σ K̃_i − 2πχ(M) − λ·Area(M)`; zero up to rounding for every metric.
pub fn gauss_bonnet_defect(complex: &SurfaceComplex, metric: &PackingMetric) -> Result<f64> {
    let k = extended_curvature(complex, metric)?;
    Ok(defect_of(complex, metric.background(), &k))
}

pub(crate) fn defect_of(complex: &SurfaceComplex, background: Background, k: &CurvatureVector) -> f64 {
    let total: f64 = k.values.iter().sum();
    total - 2.0 * PI * complex.euler_characteristic() as f64 - background.lambda() * k.total_area
}

pub(crate) fn curvature_jacobian_raw(
    complex: &SurfaceComplex,
    background: Background,
    inversive: &[f64],
    radii: &[f64],
) -> Result<DMatrix<f64>> {
    let n = complex.vertex_count();
    let mut l = DMatrix::zeros(n, n);
    for f in 0..complex.face_count() {
        let tri = complex.face(f);
        let inv = complex.face_edges(f).map(|e| inversive[e]);
        let r = tri.map(|v| radii[v]);
        let j = angle_jacobian_u(background, r, inv).map_err(|e| match e {
            Error::Boundary { .. } => Error::Boundary { face: Some(f) },
            other => other,
        })?;
        for a in 0..3 {
            for b in 0..3 {
                l[(tri[a], tri[b])] -= j[(a, b)];
            }
        }
    }
    Ok(l)
}

/// `L = ∂(K_1..K_N)/∂(u_1..u_N)`, assembled from negated face Jacobians.
/// Requires every face to be strictly non-degenerate.
pub fn curvature_jacobian(complex: &SurfaceComplex, metric: &PackingMetric) -> Result<DMatrix<f64>> {
    curvature_jacobian_raw(
        complex,
        metric.background(),
        metric.inversive().values(),
        metric.radii(),
    )
}
