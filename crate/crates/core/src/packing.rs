//! Inversive distance circle packing metrics.
//!
//! A [`PackingMetric`] carries the background geometry, one inversive
//! distance per edge and one radius per vertex. Edge lengths follow the
//! Euclidean or hyperbolic cosine law; [`UCoords`] is the coordinate chart
//! in which the Ricci flow is a gradient flow (`ln r` in Euclidean,
//! `ln tanh(r/2)` in hyperbolic background).

use serde::{Deserialize, Serialize};

use crate::complex::SurfaceComplex;
use crate::error::{Error, Result};

/// Hyperbolic radii and lengths above this are rejected: `cosh` products
/// overflow near `e^710`.
pub const HYPERBOLIC_LIMIT: f64 = 350.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    Euclidean,
    Hyperbolic,
}

impl Background {
    /// The Gauss-Bonnet area coefficient λ.
    pub fn lambda(self) -> f64 {
        match self {
            Background::Euclidean => 0.0,
            Background::Hyperbolic => 1.0,
        }
    }
}

/// Per-edge inversive distances, indexed like [`SurfaceComplex::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct InversiveDistances {
    values: Vec<f64>,
    permissive: bool,
}

impl InversiveDistances {
    /// Requires `I_e >= 0` on every edge.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (e, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInversive { edge: e, value: v });
            }
        }
        Ok(Self {
            values,
            permissive: false,
        })
    }

    /// Accepts the full range `I_e > -1` (intersecting circles with obtuse
    /// angle). Flows and potentials make no convergence claims for such data.
    pub fn permissive(values: Vec<f64>) -> Result<Self> {
        for (e, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > -1.0) {
                return Err(Error::InvalidInversive { edge: e, value: v });
            }
        }
        Ok(Self {
            values,
            permissive: true,
        })
    }

    pub fn uniform(complex: &SurfaceComplex, value: f64) -> Result<Self> {
        Self::new(vec![value; complex.edge_count()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, e: usize) -> f64 {
        self.values[e]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_permissive(&self) -> bool {
        self.permissive
    }

    /// The standing hypothesis of the flow and potential theory.
    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// `I ∈ [0, 1]`: the classical intersecting-circle patterns, for which
    /// every positive radius vector is admissible.
    pub fn within_unit_interval(&self) -> bool {
        self.values.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    fn check_len(&self, complex: &SurfaceComplex) -> Result<()> {
        if self.values.len() != complex.edge_count() {
            return Err(Error::DimensionMismatch {
                what: "inversive distances",
                expected: complex.edge_count(),
                found: self.values.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingMetric {
    background: Background,
    inversive: InversiveDistances,
    radii: Vec<f64>,
}

impl PackingMetric {
    pub fn new(
        complex: &SurfaceComplex,
        background: Background,
        inversive: InversiveDistances,
        radii: Vec<f64>,
    ) -> Result<Self> {
        inversive.check_len(complex)?;
        check_radii(complex, &radii)?;
        Ok(Self {
            background,
            inversive,
            radii,
        })
    }

    pub fn background(&self) -> Background {
        self.background
    }

    pub fn inversive(&self) -> &InversiveDistances {
        &self.inversive
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Same background and inversive distances, new radii.
    pub fn with_radii(&self, complex: &SurfaceComplex, radii: Vec<f64>) -> Result<Self> {
        check_radii(complex, &radii)?;
        Ok(Self {
            background: self.background,
            inversive: self.inversive.clone(),
            radii,
        })
    }

    pub fn to_u(&self) -> UCoords {
        UCoords {
            background: self.background,
            values: self
                .radii
                .iter()
                .map(|&r| radius_to_u(self.background, r))
                .collect(),
        }
    }

    pub fn from_u(
        complex: &SurfaceComplex,
        u: &UCoords,
        inversive: InversiveDistances,
    ) -> Result<Self> {
        Self::new(complex, u.background, inversive, u.radii())
    }
}

fn check_radii(complex: &SurfaceComplex, radii: &[f64]) -> Result<()> {
    if radii.len() != complex.vertex_count() {
        return Err(Error::DimensionMismatch {
            what: "radii",
            expected: complex.vertex_count(),
            found: radii.len(),
        });
    }
    for (v, &r) in radii.iter().enumerate() {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidRadius {
                vertex: v,
                value: r,
            });
        }
    }
    Ok(())
}

/// Flow coordinates: `u_i = ln r_i` (Euclidean) or `u_i = ln tanh(r_i / 2) < 0`
/// (hyperbolic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UCoords {
    background: Background,
    values: Vec<f64>,
}

impl UCoords {
    pub fn new(background: Background, values: Vec<f64>) -> Result<Self> {
        for (i, &u) in values.iter().enumerate() {
            if !u.is_finite() {
                return Err(Error::Domain(format!("u[{i}] = {u} is not finite")));
            }
            if background == Background::Hyperbolic && u >= 0.0 {
                return Err(Error::Domain(format!(
                    "hyperbolic u[{i}] = {u} must be negative"
                )));
            }
        }
        Ok(Self { background, values })
    }

    pub fn background(&self) -> Background {
        self.background
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&u| u_to_radius(self.background, u))
            .collect()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub fn radius_to_u(background: Background, r: f64) -> f64 {
    match background {
        Background::Euclidean => r.ln(),
        Background::Hyperbolic => {
            if r < 1.0 {
                (0.5 * r).tanh().ln()
            } else {
                // ln((1 − e^{−r}) / (1 + e^{−r})) keeps digits when tanh rounds to 1.
                let q = (-r).exp();
                (-q).ln_1p() - q.ln_1p()
            }
        }
    }
}

pub fn u_to_radius(background: Background, u: f64) -> f64 {
    match background {
        Background::Euclidean => u.exp(),
        Background::Hyperbolic => {
            let x = u.exp();
            if x < 0.5 {
                2.0 * x.atanh()
            } else {
                x.ln_1p() - (-u.exp_m1()).ln()
            }
        }
    }
}

/// Length of the edge between circles of radii `ri`, `rj` at inversive
/// distance `iij`.
pub fn edge_length(background: Background, ri: f64, rj: f64, iij: f64) -> Result<f64> {
    match background {
        Background::Euclidean => {
            let sq = ri * ri + rj * rj + 2.0 * ri * rj * iij;
            if sq <= 0.0 {
                return Err(Error::Domain(format!(
                    "non-positive squared length {sq} (r = {ri}, {rj}, I = {iij})"
                )));
            }
            Ok(sq.sqrt())
        }
        Background::Hyperbolic => {
            let worst = ri.max(rj);
            if worst > HYPERBOLIC_LIMIT {
                return Err(Error::Range {
                    value: worst,
                    limit: HYPERBOLIC_LIMIT,
                });
            }
            // cosh l − 1 = (Ci Cj + Ci + Cj) + I si sj with C = cosh − 1 = 2 sinh²(r/2);
            // every term is nonnegative for I ≥ 0, so small lengths keep full precision.
            let ci = 2.0 * (0.5 * ri).sinh().powi(2);
            let cj = 2.0 * (0.5 * rj).sinh().powi(2);
            let y = ci * cj + ci + cj + iij * ri.sinh() * rj.sinh();
            if y <= 0.0 || !y.is_finite() {
                return Err(Error::Domain(format!(
                    "arcosh argument 1 + {y} is not above 1 (r = {ri}, {rj}, I = {iij})"
                )));
            }
            let l = (y + y.sqrt() * (y + 2.0).sqrt()).ln_1p();
            if l > HYPERBOLIC_LIMIT {
                return Err(Error::Range {
                    value: l,
                    limit: HYPERBOLIC_LIMIT,
                });
            }
            Ok(l)
        }
    }
}

/// Recovers the inversive distance from a center distance and two radii.
pub fn inversive_from_length(background: Background, l: f64, ri: f64, rj: f64) -> f64 {
    match background {
        Background::Euclidean => (l * l - ri * ri - rj * rj) / (2.0 * ri * rj),
        Background::Hyperbolic => (l.cosh() - ri.cosh() * rj.cosh()) / (ri.sinh() * rj.sinh()),
    }
}

/// Edge lengths in canonical edge order from raw slices.
pub(crate) fn lengths_from_radii(
    complex: &SurfaceComplex,
    background: Background,
    inversive: &[f64],
    radii: &[f64],
) -> Result<Vec<f64>> {
    complex
        .edges()
        .iter()
        .zip(inversive)
        .map(|(&(a, b), &iab)| edge_length(background, radii[a], radii[b], iab))
        .collect()
}

pub fn all_edge_lengths(complex: &SurfaceComplex, metric: &PackingMetric) -> Result<Vec<f64>> {
    lengths_from_radii(
        complex,
        metric.background,
        metric.inversive.values(),
        &metric.radii,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMembership {
    pub inside: bool,
    pub violating_faces: Vec<usize>,
}

/// Strict triangle inequalities in every face, compared exactly.
pub fn omega_membership(complex: &SurfaceComplex, metric: &PackingMetric) -> Result<OmegaMembership> {
    let lengths = all_edge_lengths(complex, metric)?;
    Ok(omega_from_lengths(complex, &lengths))
}

pub(crate) fn omega_from_lengths(complex: &SurfaceComplex, lengths: &[f64]) -> OmegaMembership {
    let violating_faces: Vec<usize> = (0..complex.face_count())
        .filter(|&f| {
            let [a, b, c] = complex.face_edges(f).map(|e| lengths[e]);
            !(a + b > c && a + c > b && b + c > a)
        })
        .collect();
    OmegaMembership {
        inside: violating_faces.is_empty(),
        violating_faces,
    }
}
