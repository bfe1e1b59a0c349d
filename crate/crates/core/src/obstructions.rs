//! Combinatorial lower bounds on curvature sums over vertex subsets, and
//! the angle space of a single triangle.
//!
//! For a nonempty proper subset `A`,
//! `Y_A = −Σ_{(e,v) ∈ Lk(A)} (π − Λ(I_e)) + 2π χ(F_A)`
//! bounds `Σ_{i ∈ A} K_i` strictly from below on `Ω` and weakly from below
//! for the extended curvature everywhere. These are necessary conditions
//! only; no claim is made that they are sufficient.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::angles::{angle_jacobian_u, extended_angles, lambda_aux, triangle_edge_lengths};
use crate::complex::{link_pairs, subcomplex_euler, SurfaceComplex, VertexSubset};
use crate::curvature::{curvature, extended_curvature_raw};
use crate::error::{Error, Result};
use crate::packing::{radius_to_u, u_to_radius, Background, InversiveDistances, PackingMetric};

/// Label carried by every report.
pub const NECESSARY_CONDITIONS: &str = "necessary conditions";

/// Largest complex enumerated exhaustively by [`SubsetSelection::Auto`].
pub const EXHAUSTIVE_LIMIT: usize = 16;

fn require_nonnegative(inversive: &InversiveDistances) -> Result<()> {
    if inversive.is_nonnegative() {
        Ok(())
    } else {
        Err(Error::Domain("the subset bounds need nonnegative inversive distances".into()))
    }
}

/// `Σ_{(e,v) ∈ Lk(A)} (π − Λ(I_e))`.
pub fn link_weight(complex: &SurfaceComplex, inversive: &InversiveDistances, subset: &VertexSubset) -> f64 {
    link_pairs(complex, subset)
        .iter()
        .map(|p| PI - lambda_aux(inversive.get(p.edge)))
        .sum()
}

pub fn ya_bound(complex: &SurfaceComplex, inversive: &InversiveDistances, subset: &VertexSubset) -> f64 {
    -link_weight(complex, inversive, subset) + 2.0 * PI * subcomplex_euler(complex, subset) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubsetSelection {
    /// All `2^N − 2` subsets; needs `N <= 16`.
    Exhaustive,
    /// All subsets with at most this many vertices, by size then lexicographically.
    UpToSize(usize),
    /// Exhaustive when `N <= 16`, otherwise `UpToSize(cap)`; `extra` is appended.
    Auto { cap: usize, extra: Vec<VertexSubset> },
    Explicit(Vec<VertexSubset>),
}

impl Default for SubsetSelection {
    fn default() -> Self {
        SubsetSelection::Auto {
            cap: 3,
            extra: Vec::new(),
        }
    }
}

fn combinations(n: usize, k: usize, out: &mut Vec<Vec<usize>>) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
    }
}

impl SubsetSelection {
    pub fn subsets(&self, complex: &SurfaceComplex) -> Result<Vec<VertexSubset>> {
        let n = complex.vertex_count();
        match self {
            SubsetSelection::Exhaustive => {
                if n > EXHAUSTIVE_LIMIT {
                    return Err(Error::Config(format!(
                        "exhaustive enumeration is limited to {EXHAUSTIVE_LIMIT} vertices, got {n}"
                    )));
                }
                (1..(1u64 << n) - 1)
                    .map(|bits| VertexSubset::from_bits(complex, bits))
                    .collect()
            }
            SubsetSelection::UpToSize(cap) => {
                let mut all = Vec::new();
                for k in 1..=(*cap).min(n - 1) {
                    combinations(n, k, &mut all);
                }
                all.into_iter().map(|m| VertexSubset::new(complex, m)).collect()
            }
            SubsetSelection::Auto { cap, extra } => {
                let mut out = if n <= EXHAUSTIVE_LIMIT {
                    SubsetSelection::Exhaustive.subsets(complex)?
                } else {
                    SubsetSelection::UpToSize(*cap).subsets(complex)?
                };
                for s in extra {
                    if !out.contains(s) {
                        out.push(s.clone());
                    }
                }
                Ok(out)
            }
            SubsetSelection::Explicit(list) => {
                for s in list {
                    if s.mask().len() != n {
                        return Err(Error::InvalidSubset("subset built for another complex".into()));
                    }
                }
                Ok(list.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    /// Strict bound `Σ_A K_i > Y_A` for a metric in `Ω`.
    StrictBound,
    /// Weak bound `Σ_A K̃_i >= Y_A` for an arbitrary metric.
    Closure,
    /// `Σ_{Lk(A)} (π − Λ(I_e)) > 2π χ(F_A)`, needed for a zero-curvature metric.
    ZeroCurvature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionRecord {
    pub members: Vec<usize>,
    pub euler: i64,
    pub link_size: usize,
    pub bound: f64,
    pub observed: f64,
    /// `observed − bound`.
    pub margin: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionReport {
    pub kind: ReportKind,
    pub label: &'static str,
    pub records: Vec<ObstructionRecord>,
    pub verdict: bool,
    /// Indices into `records` that fail.
    pub violations: Vec<usize>,
    pub smallest_margin: f64,
}

fn assemble<F>(
    complex: &SurfaceComplex,
    inversive: &InversiveDistances,
    subsets: &[VertexSubset],
    kind: ReportKind,
    check: F,
) -> ObstructionReport
where
    F: Fn(&VertexSubset, f64) -> (f64, bool) + Sync,
{
    let records: Vec<ObstructionRecord> = subsets
        .par_iter()
        .map(|a| {
            let bound = ya_bound(complex, inversive, a);
            let (observed, passes) = check(a, bound);
            ObstructionRecord {
                members: a.members().to_vec(),
                euler: subcomplex_euler(complex, a),
                link_size: link_pairs(complex, a).len(),
                bound,
                observed,
                margin: observed - bound,
                passes,
            }
        })
        .collect();
    let violations: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.passes)
        .map(|(i, _)| i)
        .collect();
    let smallest_margin = records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    ObstructionReport {
        kind,
        label: NECESSARY_CONDITIONS,
        verdict: violations.is_empty(),
        violations,
        records,
        smallest_margin,
    }
}

fn subset_sum(values: &[f64], subset: &VertexSubset) -> f64 {
    subset.members().iter().map(|&v| values[v]).sum()
}

/// Checks `Σ_{i ∈ A} K_i > Y_A` for a hyperbolic metric in `Ω`. A failed
/// record can only come from a numerical problem, since the bound always holds there.
pub fn check_strict_bound(
    complex: &SurfaceComplex,
    metric: &PackingMetric,
    selection: &SubsetSelection,
) -> Result<ObstructionReport> {
    if metric.background() != Background::Hyperbolic {
        return Err(Error::Domain("the strict subset bound is stated for the hyperbolic background".into()));
    }
    require_nonnegative(metric.inversive())?;
    let k = curvature(complex, metric)?;
    let subsets = selection.subsets(complex)?;
    Ok(assemble(complex, metric.inversive(), &subsets, ReportKind::StrictBound, |a, bound| {
        let s = subset_sum(&k.values, a);
        (s, s > bound)
    }))
}

/// Checks `Σ_{i ∈ A} K̃_i >= Y_A − slack` for any positive radii.
pub fn check_closure(
    complex: &SurfaceComplex,
    metric: &PackingMetric,
    selection: &SubsetSelection,
    slack: f64,
) -> Result<ObstructionReport> {
    if metric.background() != Background::Hyperbolic {
        return Err(Error::Domain("the closure bound is stated for the hyperbolic background".into()));
    }
    require_nonnegative(metric.inversive())?;
    let k = extended_curvature_raw(complex, metric.background(), metric.inversive().values(), metric.radii())?;
    let subsets = selection.subsets(complex)?;
    Ok(assemble(complex, metric.inversive(), &subsets, ReportKind::Closure, |a, bound| {
        let s = subset_sum(&k.values, a);
        (s, s >= bound - slack)
    }))
}

/// Necessary condition for a zero-curvature metric in `Ω`: `Y_A < 0` for
/// every checked `A`. A false verdict rules such a metric out.
pub fn check_zero_curvature_necessary(
    complex: &SurfaceComplex,
    inversive: &InversiveDistances,
    selection: &SubsetSelection,
) -> Result<ObstructionReport> {
    require_nonnegative(inversive)?;
    let subsets = selection.subsets(complex)?;
    Ok(assemble(complex, inversive, &subsets, ReportKind::ZeroCurvature, |_, bound| {
        (0.0, bound < 0.0)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerationRow {
    pub factor: f64,
    pub sum: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerationTable {
    pub members: Vec<usize>,
    pub bound: f64,
    pub rows: Vec<DegenerationRow>,
    pub final_gap: f64,
    /// `|gap|` never increases along the sequence.
    pub monotone: bool,
}

/// Shrinks the radii on `A` by each factor and tabulates `Σ_{i ∈ A} K̃_i`
/// against `Y_A`.
pub fn verify_degeneration_limit(
    complex: &SurfaceComplex,
    inversive: &InversiveDistances,
    subset: &VertexSubset,
    base_radii: &[f64],
    factors: &[f64],
) -> Result<DegenerationTable> {
    require_nonnegative(inversive)?;
    let bg = Background::Hyperbolic;
    PackingMetric::new(complex, bg, inversive.clone(), base_radii.to_vec())?;
    if factors.is_empty() || factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::Config("shrink factors must be positive".into()));
    }
    if factors.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("shrink factors must be strictly decreasing".into()));
    }
    let bound = ya_bound(complex, inversive, subset);
    let rows = factors
        .iter()
        .map(|&factor| {
            let radii: Vec<f64> = base_radii
                .iter()
                .enumerate()
                .map(|(v, &r)| if subset.contains(v) { r * factor } else { r })
                .collect();
            let k = extended_curvature_raw(complex, bg, inversive.values(), &radii)?;
            let sum = subset_sum(&k.values, subset);
            Ok(DegenerationRow {
                factor,
                sum,
                gap: sum - bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows.windows(2).all(|w| w[1].gap.abs() <= w[0].gap.abs());
    Ok(DegenerationTable {
        members: subset.members().to_vec(),
        bound,
        final_gap: rows.last().map(|r| r.gap).unwrap_or(f64::NAN),
        rows,
        monotone,
    })
}

/// Decreasing factors `10^-1, …, 10^-k`.
pub fn geometric_factors(k: u32) -> Vec<f64> {
    (1..=k as i32).map(|e| 10f64.powi(-e)).collect()
}

/// `Z = {θ : Σ θ < π, 0 < θ_i < π − Λ(I_i)}` for one hyperbolic triangle,
/// where `I_i` sits on the edge opposite corner `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSpace {
    inv: [f64; 3],
}

impl AngleSpace {
    pub fn new(inv: [f64; 3]) -> Result<Self> {
        if inv.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(format!("inversive distances must be nonnegative: {inv:?}")));
        }
        Ok(Self { inv })
    }

    pub fn inversive(&self) -> [f64; 3] {
        self.inv
    }

    pub fn upper(&self, i: usize) -> f64 {
        PI - lambda_aux(self.inv[i])
    }

    pub fn contains(&self, theta: [f64; 3]) -> bool {
        theta.iter().sum::<f64>() < PI && (0..3).all(|i| theta[i] > 0.0 && theta[i] < self.upper(i))
    }

    /// Distance-like slack to `∂Z`; positive exactly inside.
    pub fn boundary_slack(&self, theta: [f64; 3]) -> f64 {
        let mut s = PI - theta.iter().sum::<f64>();
        for i in 0..3 {
            s = s.min(theta[i]).min(self.upper(i) - theta[i]);
        }
        s
    }

    /// Uniform sample of `Z` by rejection from the bounding box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        loop {
            let theta = [0, 1, 2].map(|i| rng.random::<f64>() * self.upper(i));
            if self.contains(theta) {
                return theta;
            }
        }
    }
}

/// Classical angles of the hyperbolic triangle with these radii.
pub fn triangle_angles(radii: [f64; 3], inv: [f64; 3]) -> Result<Option<[f64; 3]>> {
    let lengths = triangle_edge_lengths(Background::Hyperbolic, radii, inv)?;
    if !lengths.in_xi() {
        return Ok(None);
    }
    Ok(Some(extended_angles(Background::Hyperbolic, &lengths)?.theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleSolution {
    pub radii: [f64; 3],
    pub residual: f64,
    pub starts_used: usize,
    pub boundary_slack: f64,
    /// Target within `1e-6` of `∂Z`; radii may be extreme.
    pub near_boundary: bool,
}

const START_RADII: [f64; 5] = [1.0, 0.3, 3.0, 0.05, 8.0];
const SOLVE_TOL: f64 = 1e-13;

fn newton_from(inv: [f64; 3], target: [f64; 3], start: [f64; 3]) -> (Option<[f64; 3]>, f64) {
    let h = Background::Hyperbolic;
    let residual_of = |u: [f64; 3]| -> Option<([f64; 3], f64)> {
        if u.iter().any(|&v| !(v < 0.0)) {
            return None;
        }
        let th = triangle_angles(u.map(|v| u_to_radius(h, v)), inv).ok()??;
        let f = [th[0] - target[0], th[1] - target[1], th[2] - target[2]];
        Some((f, f.iter().fold(0.0f64, |m, x| m.max(x.abs()))))
    };
    let mut u = start.map(|r| radius_to_u(h, r));
    let Some((mut f, mut res)) = residual_of(u) else {
        return (None, f64::INFINITY);
    };
    for _ in 0..200 {
        if res <= SOLVE_TOL {
            break;
        }
        let Ok(j) = angle_jacobian_u(h, u.map(|v| u_to_radius(h, v)), inv) else {
            break;
        };
        let Some(d) = j.lu().solve(&-Vector3::from(f)) else {
            break;
        };
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial = [u[0] + alpha * d[0], u[1] + alpha * d[1], u[2] + alpha * d[2]];
            if let Some((ft, rt)) = residual_of(trial) {
                if rt < res {
                    u = trial;
                    f = ft;
                    res = rt;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (Some(u.map(|v| u_to_radius(h, v))), res)
}

/// Radii in `Δ` whose angles are `target ∈ Z`, by Newton iteration in
/// u-coordinates with a fixed set of starting points.
pub fn triangle_from_angles(inv: [f64; 3], target: [f64; 3]) -> Result<TriangleSolution> {
    let space = AngleSpace::new(inv)?;
    if !space.contains(target) {
        return Err(Error::Domain(format!("target angles {target:?} are not in Z")));
    }
    let slack = space.boundary_slack(target);
    let mut best = f64::INFINITY;
    let mut attempts = 0;
    for &a in &START_RADII {
        for &b in &START_RADII {
            for &c in &START_RADII {
                attempts += 1;
                let (radii, res) = newton_from(inv, target, [a, b, c]);
                if res < best {
                    best = res;
                }
                if let Some(radii) = radii {
                    if res <= SOLVE_TOL * 10.0 {
                        return Ok(TriangleSolution {
                            radii,
                            residual: res,
                            starts_used: attempts,
                            boundary_slack: slack,
                            near_boundary: slack < 1e-6,
                        });
                    }
                }
            }
        }
    }
    Err(Error::NotFound {
        attempts,
        best_residual: best,
    })
}
