//! Independent reference formulas and random samplers shared by the
//! integration and acceptance tests.
//!
//! The reference formulas are deliberately the textbook ones (arcosh of the
//! hyperbolic cosine law, arccos of the cosine ratio) and do not call into
//! the library's geometry.

#![allow(dead_code)]

use std::f64::consts::PI;

use cpflow::complex::SurfaceComplex;
use cpflow::packing::{Background, InversiveDistances, PackingMetric, UCoords};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

pub fn clamped_acos(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

pub fn ref_length(bg: Background, ri: f64, rj: f64, i: f64) -> f64 {
    match bg {
        Background::Euclidean => (ri * ri + rj * rj + 2.0 * ri * rj * i).sqrt(),
        Background::Hyperbolic => (ri.cosh() * rj.cosh() + i * ri.sinh() * rj.sinh()).acosh(),
    }
}

/// Cosine-law angle opposite `a` in a triangle with sides `a, b, c`.
pub fn ref_angle(bg: Background, a: f64, b: f64, c: f64) -> f64 {
    match bg {
        Background::Euclidean => clamped_acos((b * b + c * c - a * a) / (2.0 * b * c)),
        Background::Hyperbolic => {
            clamped_acos((b.cosh() * c.cosh() - a.cosh()) / (b.sinh() * c.sinh()))
        }
    }
}

/// Angles of a triangle given its three side lengths (`x[i]` opposite corner `i`),
/// with the degenerate convention `(π, 0, 0)`.
pub fn ref_triangle_angles(bg: Background, x: [f64; 3]) -> [f64; 3] {
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        if x[i] >= x[j] + x[k] {
            let mut t = [0.0; 3];
            t[i] = PI;
            return t;
        }
    }
    [0, 1, 2].map(|i| ref_angle(bg, x[i], x[(i + 1) % 3], x[(i + 2) % 3]))
}

pub fn ref_curvature(complex: &SurfaceComplex, bg: Background, inv: &[f64], radii: &[f64]) -> Vec<f64> {
    let mut k = vec![2.0 * PI; complex.vertex_count()];
    for &tri in complex.faces() {
        let x = [0, 1, 2].map(|i| {
            let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            let e = complex.edge_index(a, b).unwrap();
            ref_length(bg, radii[a], radii[b], inv[e])
        });
        let th = ref_triangle_angles(bg, x);
        for c in 0..3 {
            k[tri[c]] -= th[c];
        }
    }
    k
}

pub fn random_radii<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| log_uniform(rng, lo, hi)).collect()
}

pub fn random_inversive<R: Rng>(rng: &mut R, complex: &SurfaceComplex, lo: f64, hi: f64) -> InversiveDistances {
    InversiveDistances::new((0..complex.edge_count()).map(|_| uniform(rng, lo, hi)).collect()).unwrap()
}

pub fn metric(complex: &SurfaceComplex, bg: Background, inv: &InversiveDistances, radii: Vec<f64>) -> PackingMetric {
    PackingMetric::new(complex, bg, inv.clone(), radii).unwrap()
}

pub fn hyperbolic_u(radii: &[f64]) -> UCoords {
    UCoords::new(
        Background::Hyperbolic,
        radii.iter().map(|&r| cpflow::packing::radius_to_u(Background::Hyperbolic, r)).collect(),
    )
    .unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
