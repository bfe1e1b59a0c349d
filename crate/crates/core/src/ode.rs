//! Fixed-step explicit integrators for autonomous systems `y' = f(y)`.

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

fn axpy(y: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(yi, ki)| yi + a * ki).collect()
}

/// One step of size `dt` from `y`, where `k1 = f(y)` has already been evaluated.
pub fn step<F>(integrator: Integrator, f: &mut F, y: &[f64], k1: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    match integrator {
        Integrator::Euler => Ok(axpy(y, dt, k1)),
        Integrator::Rk4 => {
            let k2 = f(&axpy(y, 0.5 * dt, k1))?;
            let k3 = f(&axpy(y, 0.5 * dt, &k2))?;
            let k4 = f(&axpy(y, dt, &k3))?;
            Ok(y
                .iter()
                .enumerate()
                .map(|(i, yi)| yi + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        }
    }
}
