//! The extended Ricci potential `G̃(u) = ∫_{u0}^{u} Σ (K̃_i − K̄_i) du_i` and
//! a damped Newton solver for prescribed curvature.
//!
//! The curvature 1-form is closed, so the integral is taken along the
//! straight segment from the basepoint. In the hyperbolic background the
//! domain `u < 0` is convex and the segment never leaves it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::complex::SurfaceComplex;
use crate::curvature::{curvature_jacobian_raw, extended_curvature_raw};
use crate::error::{Error, Result};
use crate::packing::{u_to_radius, Background, InversiveDistances, UCoords};
use crate::quadrature::AdaptiveSimpson;

#[derive(Debug, Clone)]
pub struct PotentialContext<'a> {
    complex: &'a SurfaceComplex,
    inversive: InversiveDistances,
    basepoint: UCoords,
    target: Vec<f64>,
    quadrature: AdaptiveSimpson,
}

impl<'a> PotentialContext<'a> {
    /// A missing target means `K̄ = 0`, i.e. the plain potential `G̃`.
    pub fn new(
        complex: &'a SurfaceComplex,
        inversive: InversiveDistances,
        basepoint: UCoords,
        target: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = complex.vertex_count();
        if inversive.len() != complex.edge_count() {
            return Err(Error::DimensionMismatch {
                what: "inversive distances",
                expected: complex.edge_count(),
                found: inversive.len(),
            });
        }
        if basepoint.len() != n {
            return Err(Error::DimensionMismatch {
                what: "basepoint",
                expected: n,
                found: basepoint.len(),
            });
        }
        let target = target.unwrap_or_else(|| vec![0.0; n]);
        if target.len() != n {
            return Err(Error::DimensionMismatch {
                what: "target curvature",
                expected: n,
                found: target.len(),
            });
        }
        if let Some(bad) = target.iter().find(|k| !k.is_finite()) {
            return Err(Error::Domain(format!("target curvature {bad} is not finite")));
        }
        Ok(Self {
            complex,
            inversive,
            basepoint,
            target,
            quadrature: AdaptiveSimpson::default(),
        })
    }

    pub fn with_quadrature(mut self, quadrature: AdaptiveSimpson) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn complex(&self) -> &SurfaceComplex {
        self.complex
    }

    pub fn background(&self) -> Background {
        self.basepoint.background()
    }

    pub fn inversive(&self) -> &InversiveDistances {
        &self.inversive
    }

    pub fn basepoint(&self) -> &UCoords {
        &self.basepoint
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    fn check(&self, u: &UCoords) -> Result<()> {
        if u.background() != self.background() {
            return Err(Error::Domain("u-coordinates use a different background".into()));
        }
        if u.len() != self.complex.vertex_count() {
            return Err(Error::DimensionMismatch {
                what: "u-coordinates",
                expected: self.complex.vertex_count(),
                found: u.len(),
            });
        }
        Ok(())
    }
}

/// `K̃(u) − K̄` from raw u-values.
pub(crate) fn shifted_curvature(
    complex: &SurfaceComplex,
    background: Background,
    inversive: &[f64],
    target: &[f64],
    u: &[f64],
) -> Result<Vec<f64>> {
    if background == Background::Hyperbolic {
        if let Some(i) = u.iter().position(|&v| !(v < 0.0)) {
            return Err(Error::Domain(format!("hyperbolic u[{i}] = {} must be negative", u[i])));
        }
    }
    let radii: Vec<f64> = u.iter().map(|&v| u_to_radius(background, v)).collect();
    let k = extended_curvature_raw(complex, background, inversive, &radii)?;
    Ok(k.values.iter().zip(target).map(|(k, t)| k - t).collect())
}

/// `∫_a^b Σ (K̃_i − K̄_i) du_i` along the straight segment.
pub(crate) fn segment_integral(
    complex: &SurfaceComplex,
    background: Background,
    inversive: &[f64],
    target: &[f64],
    a: &[f64],
    b: &[f64],
    quadrature: &AdaptiveSimpson,
) -> Result<f64> {
    let delta: Vec<f64> = b.iter().zip(a).map(|(b, a)| b - a).collect();
    if delta.iter().all(|&d| d == 0.0) {
        return Ok(0.0);
    }
    let mut point = vec![0.0; a.len()];
    quadrature.integrate(
        |s| {
            for i in 0..a.len() {
                point[i] = a[i] + s * delta[i];
            }
            let g = shifted_curvature(complex, background, inversive, target, &point)?;
            Ok(g.iter().zip(&delta).map(|(g, d)| g * d).sum())
        },
        0.0,
        1.0,
    )
}

/// `G̃(to) − G̃(from)`.
pub fn potential_difference(ctx: &PotentialContext, from: &UCoords, to: &UCoords) -> Result<f64> {
    ctx.check(from)?;
    ctx.check(to)?;
    segment_integral(
        ctx.complex,
        ctx.background(),
        ctx.inversive.values(),
        &ctx.target,
        from.values(),
        to.values(),
        &ctx.quadrature,
    )
}

/// `G̃(u)`, normalized to vanish at the basepoint.
pub fn potential_value(ctx: &PotentialContext, u: &UCoords) -> Result<f64> {
    potential_difference(ctx, &ctx.basepoint, u)
}

/// `∇G̃(u) = K̃(u) − K̄`.
pub fn potential_gradient(ctx: &PotentialContext, u: &UCoords) -> Result<Vec<f64>> {
    ctx.check(u)?;
    shifted_curvature(
        ctx.complex,
        ctx.background(),
        ctx.inversive.values(),
        &ctx.target,
        u.values(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    Newton,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonStep {
    pub iteration: usize,
    pub mode: StepMode,
    /// Hessian shift that made the factorization succeed (Newton mode only).
    pub shift: f64,
    pub step_length: f64,
    /// Max-norm residual after the step.
    pub residual: f64,
    pub u_norm: f64,
    /// Potential relative to the initial iterate, if tracked.
    pub potential: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonStatus {
    Converged,
    NoDescent,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonReport {
    pub status: NewtonStatus,
    pub iterations: usize,
    pub residual: f64,
    pub final_u: UCoords,
    pub history: Vec<NewtonStep>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tolerance: f64,
    pub max_iter: usize,
    /// Record `G̃` along the iterates (one extra quadrature per step).
    pub track_potential: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iter: 100,
            track_potential: false,
        }
    }
}

const SHIFT_START: f64 = 1e-10;
const SHIFT_CAP: f64 = 1e-2;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn newton_direction(hessian: DMatrix<f64>, g: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = g.len();
    let rhs = -DVector::from_column_slice(g);
    let mut shift = SHIFT_START;
    while shift <= SHIFT_CAP * (1.0 + 1e-12) {
        let shifted = &hessian + DMatrix::identity(n, n) * shift;
        if let Some(ch) = shifted.cholesky() {
            let d = ch.solve(&rhs);
            if d.iter().all(|x| x.is_finite()) {
                return Some((d.as_slice().to_vec(), shift));
            }
        }
        shift *= 10.0;
    }
    None
}

/// Damped Newton iteration on `G̃` with full reporting; never fails on
/// non-convergence, which is reported through `status`.
pub fn newton_iterate(ctx: &PotentialContext, u_init: &UCoords, options: &NewtonOptions) -> Result<NewtonReport> {
    ctx.check(u_init)?;
    if ctx.background() != Background::Hyperbolic {
        return Err(Error::Config(
            "the Newton solver requires the hyperbolic background".into(),
        ));
    }
    if let Some(k) = ctx.target.iter().find(|&&k| !(k < 2.0 * PI)) {
        return Err(Error::Domain(format!(
            "target curvature {k} must be below 2π"
        )));
    }
    if !(options.tolerance > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }

    let bg = ctx.background();
    let inv = ctx.inversive.values();
    let grad = |u: &[f64]| shifted_curvature(ctx.complex, bg, inv, &ctx.target, u);
    let diff = |a: &[f64], b: &[f64]| {
        segment_integral(ctx.complex, bg, inv, &ctx.target, a, b, &ctx.quadrature)
    };

    let mut u = u_init.values().to_vec();
    let mut g = grad(&u)?;
    let mut potential = 0.0;
    let mut history = Vec::new();
    let finish = |status, iterations, u: Vec<f64>, g: &[f64], history| -> Result<NewtonReport> {
        Ok(NewtonReport {
            status,
            iterations,
            residual: max_abs(g),
            final_u: UCoords::new(bg, u)?,
            history,
        })
    };

    for iter in 0..options.max_iter {
        if max_abs(&g) <= options.tolerance {
            return finish(NewtonStatus::Converged, iter, u, &g, history);
        }
        let radii: Vec<f64> = u.iter().map(|&v| u_to_radius(bg, v)).collect();
        let newton = curvature_jacobian_raw(ctx.complex, bg, inv, &radii)
            .ok()
            .and_then(|h| newton_direction(h, &g));

        let mut candidates = Vec::with_capacity(2);
        if let Some((d, shift)) = newton {
            candidates.push((StepMode::Newton, d, shift));
        }
        candidates.push((StepMode::Gradient, g.iter().map(|x| -x).collect(), 0.0));

        let g_norm = norm2(&g);
        let mut accepted = None;
        'modes: for (mode, d, shift) in candidates {
            let slope: f64 = g.iter().zip(&d).map(|(g, d)| g * d).sum();
            if !(slope < 0.0) {
                continue;
            }
            let mut alpha = 1.0;
            // Stay inside u < 0.
            for (ui, di) in u.iter().zip(&d) {
                if *di > 0.0 {
                    alpha = f64::min(alpha, 0.9 * (-ui) / di);
                }
            }
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<f64> = u.iter().zip(&d).map(|(u, d)| u + alpha * d).collect();
                if trial != u {
                    if let Ok(g_trial) = grad(&trial) {
                        let shrinks = norm2(&g_trial) <= (1.0 - ARMIJO * alpha) * g_norm;
                        let delta = if shrinks && !options.track_potential {
                            Some(None)
                        } else {
                            match diff(&u, &trial) {
                                Ok(df) if shrinks || df <= ARMIJO * alpha * slope => Some(Some(df)),
                                _ => None,
                            }
                        };
                        if let Some(df) = delta {
                            accepted = Some((mode, shift, alpha, trial, g_trial, df));
                            break 'modes;
                        }
                    }
                }
                alpha *= 0.5;
            }
        }

        match accepted {
            Some((mode, shift, alpha, trial, g_trial, df)) => {
                if let Some(df) = df {
                    potential += df;
                }
                u = trial;
                g = g_trial;
                history.push(NewtonStep {
                    iteration: iter + 1,
                    mode,
                    shift,
                    step_length: alpha,
                    residual: max_abs(&g),
                    u_norm: norm2(&u),
                    potential: options.track_potential.then_some(potential),
                });
            }
            None => return finish(NewtonStatus::NoDescent, iter, u, &g, history),
        }
    }
    if max_abs(&g) <= options.tolerance {
        return finish(NewtonStatus::Converged, options.max_iter, u, &g, history);
    }
    finish(NewtonStatus::MaxIter, options.max_iter, u, &g, history)
}

/// Solves `K̃(u) = K̄` to max-norm tolerance `tol`.
pub fn newton_solve(
    ctx: &PotentialContext,
    u_init: &UCoords,
    tol: f64,
    max_iter: usize,
) -> Result<(UCoords, NewtonReport)> {
    let report = newton_iterate(
        ctx,
        u_init,
        &NewtonOptions {
            tolerance: tol,
            max_iter,
            track_potential: false,
        },
    )?;
    match report.status {
        NewtonStatus::Converged => Ok((report.final_u.clone(), report)),
        NewtonStatus::NoDescent => Err(Error::NoDescent {
            iterations: report.iterations,
            residual: report.residual,
        }),
        NewtonStatus::MaxIter => Err(Error::MaxIter {
            iterations: report.iterations,
            residual: report.residual,
            u_norm: norm2(report.final_u.values()),
        }),
    }
}
