//! Combinatorial Ricci flow `u' = K̄ − K̃(u)` in u-coordinates.
//!
//! Three variants share one integration loop: `Classical` uses the
//! cosine-law curvature and stops when a face degenerates, `Extended` uses
//! the extended curvature everywhere, and `Prescribed` is the extended flow
//! with a mandatory target.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::complex::SurfaceComplex;
use crate::curvature::{curvature_jacobian_raw, extended_curvature_raw};
use crate::error::{Error, Result};
use crate::ode::{self, Integrator};
use crate::packing::{
    lengths_from_radii, omega_from_lengths, u_to_radius, Background, InversiveDistances, UCoords,
};
use crate::potential::segment_integral;
use crate::quadrature::AdaptiveSimpson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowVariant {
    Classical,
    Extended,
    Prescribed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub variant: FlowVariant,
    /// Per-vertex `K̄`; zero when absent. Required for `Prescribed`.
    pub target: Option<Vec<f64>>,
    pub integrator: Integrator,
    pub step: f64,
    pub max_time: f64,
    /// Stop once `max_i |K̃_i − K̄_i| <= tolerance` on three consecutive steps.
    pub tolerance: f64,
    pub sample_every: usize,
    pub divergence_radius_cap: f64,
    pub record_potential: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            variant: FlowVariant::Extended,
            target: None,
            integrator: Integrator::Rk4,
            step: 0.05,
            max_time: 1000.0,
            tolerance: 1e-9,
            sample_every: 10,
            divergence_radius_cap: 50.0,
            record_potential: true,
        }
    }
}

const CONSECUTIVE_HITS: usize = 3;

/// Radii below this are treated as having collapsed to zero; the length
/// formulas lose all digits well before the subnormal range.
pub const MIN_RADIUS: f64 = 1e-100;

impl FlowConfig {
    pub fn validate(&self, vertex_count: usize) -> Result<()> {
        let positive = [
            ("step", self.step),
            ("max_time", self.max_time),
            ("tolerance", self.tolerance),
            ("divergence_radius_cap", self.divergence_radius_cap),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.sample_every == 0 {
            return Err(Error::Config("sample_every must be at least 1".into()));
        }
        match &self.target {
            None if self.variant == FlowVariant::Prescribed => {
                Err(Error::Config("the prescribed flow needs a target curvature".into()))
            }
            Some(t) if t.len() != vertex_count => Err(Error::DimensionMismatch {
                what: "target curvature",
                expected: vertex_count,
                found: t.len(),
            }),
            Some(t) if t.iter().any(|k| !k.is_finite()) => {
                Err(Error::Config("target curvature must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Converged,
    MaxTimeReached,
    LeftOmega,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub u: Vec<f64>,
    /// `K̃(u)` (not shifted by the target).
    pub curvature: Vec<f64>,
    /// `M(t) = max(0, max_i (K̃_i − K̄_i))`.
    pub max_curvature: f64,
    /// `m(t) = min(0, min_i (K̃_i − K̄_i))`.
    pub min_curvature: f64,
    /// `G̃(u(t)) − G̃(u(0))`.
    pub potential: Option<f64>,
    pub residual: f64,
}

/// Bracket on the first time a face degenerated during a classical run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaExit {
    pub last_inside: f64,
    pub first_outside: f64,
    pub violating_faces: Vec<usize>,
}

impl OmegaExit {
    /// Midpoint estimate of the exit time `T`.
    pub fn estimate(&self) -> f64 {
        0.5 * (self.last_inside + self.first_outside)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowResult {
    pub status: FlowStatus,
    pub final_u: UCoords,
    pub trace: Vec<TraceSample>,
    pub iterations: usize,
    pub final_time: f64,
    pub final_residual: f64,
    pub omega_exit: Option<OmegaExit>,
    pub min_radius: f64,
    pub max_radius: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Field<'a> {
    complex: &'a SurfaceComplex,
    background: Background,
    inversive: &'a [f64],
    target: &'a [f64],
    classical: bool,
}

enum FieldFailure {
    Outside(Vec<usize>),
    Escaped,
    Other(Error),
}

impl Field<'_> {
    fn radii(&self, u: &[f64]) -> std::result::Result<Vec<f64>, FieldFailure> {
        if self.background == Background::Hyperbolic && u.iter().any(|&v| !(v < 0.0)) {
            return Err(FieldFailure::Escaped);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(FieldFailure::Other(Error::Step { t: f64::NAN }));
        }
        let radii: Vec<f64> = u.iter().map(|&v| u_to_radius(self.background, v)).collect();
        // Radii collapsing toward zero or blowing up: the run has left (0, ∞).
        if radii.iter().any(|&r| !(r >= MIN_RADIUS && r.is_finite())) {
            return Err(FieldFailure::Escaped);
        }
        Ok(radii)
    }

    /// `(K̃(u), K̄ − K̃(u))`.
    fn eval(&self, u: &[f64]) -> std::result::Result<(Vec<f64>, Vec<f64>), FieldFailure> {
        let radii = self.radii(u)?;
        let lift = |e: Error| match e {
            Error::Range { .. } => FieldFailure::Escaped,
            other => FieldFailure::Other(other),
        };
        if self.classical {
            let lengths = lengths_from_radii(self.complex, self.background, self.inversive, &radii).map_err(lift)?;
            let omega = omega_from_lengths(self.complex, &lengths);
            if !omega.inside {
                return Err(FieldFailure::Outside(omega.violating_faces));
            }
        }
        let k = extended_curvature_raw(self.complex, self.background, self.inversive, &radii).map_err(lift)?;
        let rhs = self.target.iter().zip(&k.values).map(|(t, k)| t - k).collect();
        Ok((k.values, rhs))
    }
}

/// `max_i |K̃_i(u) − K̄_i|`; a missing target means zero.
pub fn residual(
    complex: &SurfaceComplex,
    inversive: &InversiveDistances,
    u: &UCoords,
    target: Option<&[f64]>,
) -> Result<f64> {
    let n = complex.vertex_count();
    let zero = vec![0.0; n];
    let target = target.unwrap_or(&zero);
    if target.len() != n || u.len() != n {
        return Err(Error::DimensionMismatch {
            what: "target/u",
            expected: n,
            found: target.len().min(u.len()),
        });
    }
    let k = extended_curvature_raw(complex, u.background(), inversive.values(), &u.radii())?;
    Ok(k.values.iter().zip(target).fold(0.0, |m, (k, t)| m.max((k - t).abs())))
}

/// Integrates the flow from `u0` with the configured stepper.
pub fn run_flow(
    complex: &SurfaceComplex,
    inversive: &InversiveDistances,
    u0: &UCoords,
    config: &FlowConfig,
) -> Result<FlowResult> {
    let n = complex.vertex_count();
    config.validate(n)?;
    if u0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "initial u",
            expected: n,
            found: u0.len(),
        });
    }
    if inversive.len() != complex.edge_count() {
        return Err(Error::DimensionMismatch {
            what: "inversive distances",
            expected: complex.edge_count(),
            found: inversive.len(),
        });
    }
    let background = u0.background();
    let zero = vec![0.0; n];
    let target: &[f64] = config.target.as_deref().unwrap_or(&zero);
    let field = Field {
        complex,
        background,
        inversive: inversive.values(),
        target,
        classical: config.variant == FlowVariant::Classical,
    };
    let quadrature = AdaptiveSimpson::default();

    let mut u = u0.values().to_vec();
    let (mut k, mut rhs) = match field.eval(&u) {
        Ok(v) => v,
        Err(FieldFailure::Outside(faces)) => return Err(Error::NotInOmega { faces }),
        Err(FieldFailure::Escaped) => {
            return Err(Error::Domain("initial radii exceed the overflow guard".into()))
        }
        Err(FieldFailure::Other(e)) => return Err(e),
    };

    let mut trace = Vec::new();
    let mut potential = 0.0;
    let mut last_sample_u = u.clone();
    let mut hits = 0usize;
    let mut t = 0.0;
    let mut iterations = 0usize;
    let mut omega_exit = None;
    let radii0: Vec<f64> = u.iter().map(|&v| u_to_radius(background, v)).collect();
    let mut min_radius = radii0.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut max_radius = radii0.iter().cloned().fold(0.0, f64::max);
    let max_steps = (config.max_time / config.step).ceil() as usize;

    let mut sample = |t: f64, u: &[f64], k: &[f64], rhs: &[f64], trace: &mut Vec<TraceSample>| -> Result<()> {
        let pot = if config.record_potential {
            potential += segment_integral(complex, background, inversive.values(), target, &last_sample_u, u, &quadrature)?;
            last_sample_u.copy_from_slice(u);
            Some(potential)
        } else {
            None
        };
        // rhs = K̄ − K̃
        let max_c = rhs.iter().fold(0.0f64, |m, r| m.max(-r));
        let min_c = rhs.iter().fold(0.0f64, |m, r| m.min(-r));
        trace.push(TraceSample {
            t,
            u: u.to_vec(),
            curvature: k.to_vec(),
            max_curvature: max_c,
            min_curvature: min_c,
            potential: pot,
            residual: max_abs(rhs),
        });
        Ok(())
    };

    sample(t, &u, &k, &rhs, &mut trace)?;
    let status = loop {
        if max_abs(&rhs) <= config.tolerance {
            hits += 1;
            if hits >= CONSECUTIVE_HITS {
                break FlowStatus::Converged;
            }
        } else {
            hits = 0;
        }
        if iterations >= max_steps {
            break FlowStatus::MaxTimeReached;
        }

        let t_next = ((iterations + 1) as f64 * config.step).min(config.max_time);
        let dt = t_next - t;
        let mut failure = None;
        let mut stage = |y: &[f64]| -> Result<Vec<f64>> {
            match field.eval(y) {
                Ok((_, r)) => Ok(r),
                Err(f) => {
                    failure = Some(f);
                    Err(Error::Step { t })
                }
            }
        };
        let stepped = ode::step(config.integrator, &mut stage, &u, &rhs, dt);
        let next = match stepped {
            Ok(next) if next.iter().all(|v| v.is_finite()) => next,
            Ok(_) => return Err(Error::Step { t: t + dt }),
            Err(_) => match failure.take() {
                Some(FieldFailure::Outside(faces)) => {
                    omega_exit = Some(OmegaExit {
                        last_inside: t,
                        first_outside: t + dt,
                        violating_faces: faces,
                    });
                    break FlowStatus::LeftOmega;
                }
                Some(FieldFailure::Escaped) => break FlowStatus::Diverged,
                Some(FieldFailure::Other(Error::Step { .. })) => return Err(Error::Step { t: t + dt }),
                Some(FieldFailure::Other(e)) => return Err(e),
                None => return Err(Error::Step { t }),
            },
        };
        match field.eval(&next) {
            Ok((k_next, rhs_next)) => {
                u = next;
                k = k_next;
                rhs = rhs_next;
            }
            Err(FieldFailure::Outside(faces)) => {
                omega_exit = Some(OmegaExit {
                    last_inside: t,
                    first_outside: t + dt,
                    violating_faces: faces,
                });
                break FlowStatus::LeftOmega;
            }
            Err(FieldFailure::Escaped) => break FlowStatus::Diverged,
            Err(FieldFailure::Other(Error::Step { .. })) => return Err(Error::Step { t: t + dt }),
            Err(FieldFailure::Other(e)) => return Err(e),
        }
        t = t_next;
        iterations += 1;

        for &v in &u {
            let r = u_to_radius(background, v);
            min_radius = min_radius.min(r);
            max_radius = max_radius.max(r);
        }
        if max_radius > config.divergence_radius_cap {
            break FlowStatus::Diverged;
        }
        if iterations % config.sample_every == 0 {
            sample(t, &u, &k, &rhs, &mut trace)?;
        }
    };
    if trace.last().map(|s| s.t) != Some(t) {
        sample(t, &u, &k, &rhs, &mut trace)?;
    }

    Ok(FlowResult {
        status,
        final_residual: max_abs(&rhs),
        final_u: UCoords::new(background, u)?,
        trace,
        iterations,
        final_time: t,
        omega_exit,
        min_radius,
        max_radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// `−slope` of `ln residual` against `t`.
    pub rate: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `ln residual` against `t` over the samples whose
/// residual lies in `[lo, hi]`. `None` with fewer than three such samples.
pub fn fit_exponential_rate(trace: &[TraceSample], lo: f64, hi: f64) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|s| s.residual >= lo && s.residual <= hi && s.residual > 0.0)
        .map(|s| (s.t, s.residual.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt == 0.0 {
        return None;
    }
    let slope = sty / stt;
    let r_squared = if syy == 0.0 { 1.0 } else { sty * sty / (stt * syy) };
    Some(RateFit {
        rate: -slope,
        slope,
        r_squared,
        points: pts.len(),
    })
}

/// Residual window used for the tail fit by [`stability_certificate`].
pub const TAIL_WINDOW: (f64, f64) = (1e-10, 1e-3);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Smallest eigenvalue of `L` (on the complement of `(1, …, 1)` in the
    /// Euclidean background).
    pub smallest_eigenvalue: f64,
    pub certified: bool,
    pub projected: bool,
    pub rate: Option<RateFit>,
}

/// Checks that `L` is positive definite at `u_star` and, given a trace,
/// fits the exponential convergence rate from its tail.
pub fn stability_certificate(
    complex: &SurfaceComplex,
    inversive: &InversiveDistances,
    u_star: &UCoords,
    trace: Option<&[TraceSample]>,
) -> Result<StabilityReport> {
    let bg = u_star.background();
    let l = curvature_jacobian_raw(complex, bg, inversive.values(), &u_star.radii())?;
    let n = complex.vertex_count();
    let projected = bg == Background::Euclidean;
    let matrix = if projected {
        // L·1 = 0; lift that eigenvalue well above the rest.
        let lift = l.norm() + 1.0;
        &l + DMatrix::from_element(n, n, lift / n as f64)
    } else {
        l
    };
    let eig = SymmetricEigen::new(matrix);
    let smallest = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(StabilityReport {
        smallest_eigenvalue: smallest,
        certified: smallest > 0.0,
        projected,
        rate: trace.and_then(|t| fit_exponential_rate(t, TAIL_WINDOW.0, TAIL_WINDOW.1)),
    })
}
