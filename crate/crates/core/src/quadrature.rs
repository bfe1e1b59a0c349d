//! Adaptive composite Simpson quadrature on an interval.
//!
//! Used for line integrals of the curvature 1-form. The integrands are
//! continuous but only piecewise smooth: at faces that degenerate along the
//! path the angles have square-root kinks. Bisection localizes those, and
//! panels narrower than `min_width_fraction` of the interval are accepted
//! as they are (their contribution is `O(h^{3/2})`).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSimpson {
    pub tolerance: f64,
    pub max_evaluations: usize,
    pub min_width_fraction: f64,
    pub initial_panels: usize,
}

impl Default for AdaptiveSimpson {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_evaluations: 2_000_000,
            min_width_fraction: 1e-9,
            initial_panels: 4,
        }
    }
}

struct State<'f, F> {
    f: &'f mut F,
    evaluations: usize,
    max_evaluations: usize,
    min_width: f64,
}

impl<F: FnMut(f64) -> Result<f64>> State<'_, F> {
    fn eval(&mut self, x: f64) -> Result<f64> {
        self.evaluations += 1;
        if self.evaluations > self.max_evaluations {
            return Err(Error::Quadrature {
                evaluations: self.max_evaluations,
            });
        }
        let y = (self.f)(x)?;
        if !y.is_finite() {
            return Err(Error::Domain(format!("integrand is {y} at {x}")));
        }
        Ok(y)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let flm = self.eval(lm)?;
        let frm = self.eval(rm)?;
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * eps || (b - a).abs() <= self.min_width {
            return Ok(left + right + delta / 15.0);
        }
        Ok(self.refine(a, m, fa, flm, fm, left, 0.5 * eps)?
            + self.refine(m, b, fm, frm, fb, right, 0.5 * eps)?)
    }
}

#[inline]
fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

impl AdaptiveSimpson {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    /// `∫_a^b f`, with Richardson-corrected panels accepted once successive
    /// estimates agree to the panel's share of the tolerance.
    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if a == b {
            return Ok(0.0);
        }
        let panels = self.initial_panels.max(1);
        let mut state = State {
            f: &mut f,
            evaluations: 0,
            max_evaluations: self.max_evaluations,
            min_width: (b - a).abs() * self.min_width_fraction,
        };
        let width = (b - a) / panels as f64;
        let eps = self.tolerance / panels as f64;
        let mut total = 0.0;
        let mut fa = state.eval(a)?;
        for p in 0..panels {
            let lo = a + width * p as f64;
            let hi = if p + 1 == panels { b } else { lo + width };
            let mid = 0.5 * (lo + hi);
            let fm = state.eval(mid)?;
            let fb = state.eval(hi)?;
            let whole = simpson(fa, fm, fb, hi - lo);
            total += state.refine(lo, hi, fa, fm, fb, whole, eps)?;
            fa = fb;
        }
        Ok(total)
    }
}
