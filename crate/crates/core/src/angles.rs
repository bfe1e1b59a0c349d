//! Per-triangle geometry: inner angles extended to all positive lengths,
//! angle defects, angle Jacobians in flow coordinates and the degeneration
//! threshold radius.
//!
//! Indexing convention: in a triangle with corners 0, 1, 2, `x[i]` is the
//! length of the edge opposite corner `i` and `inv[i]` is the inversive
//! distance on that edge.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::packing::{edge_length, Background, HYPERBOLIC_LIMIT};

/// Clamped arccosine: `π` below −1, `arccos x` on `[−1, 1]`, `0` above 1.
pub fn lambda_aux(x: f64) -> f64 {
    if x <= -1.0 {
        PI
    } else if x >= 1.0 {
        0.0
    } else {
        x.acos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleLengths {
    pub x: [f64; 3],
}

impl TriangleLengths {
    pub fn new(x: [f64; 3]) -> Result<Self> {
        if x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain(format!("triangle lengths must be positive: {x:?}")));
        }
        Ok(Self { x })
    }

    /// All three strict triangle inequalities.
    pub fn in_xi(&self) -> bool {
        let [a, b, c] = self.x;
        a < b + c && b < a + c && c < a + b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedAngles {
    pub theta: [f64; 3],
    pub degenerate: bool,
}

impl GeneralizedAngles {
    pub fn sum(&self) -> f64 {
        self.theta.iter().sum()
    }
}

/// Inner angles on all of `R³_{>0}`: the cosine-law angles inside `Ξ`,
/// `(π, 0, 0)` with `π` at the corner facing the too-long edge outside.
///
/// Inside `Ξ` the angle is evaluated with the half-angle form
/// `tan²(θ_i/2) = S(s−x_j) S(s−x_k) / (S(s) S(s−x_i))` (`S = sinh` or the
/// identity), which is algebraically `Λ` of the cosine-law ratio but keeps
/// full precision for thin and tiny triangles.
pub fn extended_angles(background: Background, lengths: &TriangleLengths) -> Result<GeneralizedAngles> {
    let x = lengths.x;
    if background == Background::Hyperbolic {
        let worst = x[0].max(x[1]).max(x[2]);
        if worst > HYPERBOLIC_LIMIT {
            return Err(Error::Range {
                value: worst,
                limit: HYPERBOLIC_LIMIT,
            });
        }
    }
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        if x[i] >= x[j] + x[k] {
            let mut theta = [0.0; 3];
            theta[i] = PI;
            return Ok(GeneralizedAngles {
                theta,
                degenerate: true,
            });
        }
    }
    let s = 0.5 * (x[0] + x[1] + x[2]);
    let d = [
        0.5 * ((x[1] + x[2]) - x[0]),
        0.5 * ((x[0] + x[2]) - x[1]),
        0.5 * ((x[0] + x[1]) - x[2]),
    ];
    let f: fn(f64) -> f64 = match background {
        Background::Euclidean => |v| v,
        Background::Hyperbolic => f64::sinh,
    };
    let fs = f(s).sqrt();
    let fd = d.map(|v| f(v).sqrt());
    let mut theta = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        theta[i] = 2.0 * (fd[j] * fd[k]).atan2(fs * fd[i]);
    }
    Ok(GeneralizedAngles {
        theta,
        degenerate: false,
    })
}

/// Angle defect `π − Σθ̃`. In hyperbolic background this is the triangle's
/// area (clamped at 0 against rounding); in Euclidean background it is
/// returned unclamped as a diagnostic and vanishes up to rounding.
pub fn triangle_area(background: Background, angles: &GeneralizedAngles) -> f64 {
    let defect = PI - angles.sum();
    match background {
        Background::Hyperbolic => defect.max(0.0),
        Background::Euclidean => defect,
    }
}

/// Edge lengths of the triangle spanned by three circles.
pub fn triangle_edge_lengths(
    background: Background,
    radii: [f64; 3],
    inv: [f64; 3],
) -> Result<TriangleLengths> {
    let mut x = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        x[i] = edge_length(background, radii[j], radii[k], inv[i])?;
    }
    TriangleLengths::new(x)
}

/// `∂(θ_0, θ_1, θ_2) / ∂(u_0, u_1, u_2)` by the chain rule through the
/// cosine law and the edge-length formula.
///
/// Refused with [`Error::Boundary`] unless the triangle is strictly
/// non-degenerate; the angles are not differentiable at the boundary.
pub fn angle_jacobian_u(background: Background, radii: [f64; 3], inv: [f64; 3]) -> Result<Matrix3<f64>> {
    let lengths = triangle_edge_lengths(background, radii, inv)?;
    if !lengths.in_xi() {
        return Err(Error::Boundary { face: None });
    }
    let angles = extended_angles(background, &lengths)?;
    let x = lengths.x;
    let sin = angles.theta.map(f64::sin);
    let cos = angles.theta.map(f64::cos);
    if sin.iter().any(|&s| s <= 0.0) {
        return Err(Error::Boundary { face: None });
    }

    // dtheta[a][b] = ∂θ_a/∂x_b
    let mut dtheta = Matrix3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            let others: Vec<usize> = (0..3).filter(|&c| c != a).collect();
            let (j, k) = (others[0], others[1]);
            dtheta[(a, b)] = match background {
                Background::Euclidean => {
                    let denom = sin[a] * x[j] * x[k];
                    if b == a {
                        x[a] / denom
                    } else {
                        let other = if b == j { k } else { j };
                        (cos[a] * x[other] - x[b]) / denom
                    }
                }
                Background::Hyperbolic => {
                    let denom = sin[a] * x[j].sinh() * x[k].sinh();
                    if b == a {
                        x[a].sinh() / denom
                    } else {
                        let other = if b == j { k } else { j };
                        (cos[a] * x[b].cosh() * x[other].sinh() - x[b].sinh() * x[other].cosh())
                            / denom
                    }
                }
            };
        }
    }

    // dlen[b][c] = ∂x_b/∂u_c; x_b joins the two corners other than b.
    let mut dlen = Matrix3::zeros();
    for b in 0..3 {
        for c in 0..3 {
            if c == b {
                continue;
            }
            let d = 3 - b - c;
            let (rc, rd, i) = (radii[c], radii[d], inv[b]);
            dlen[(b, c)] = match background {
                Background::Euclidean => rc * (rc + i * rd) / x[b],
                Background::Hyperbolic => {
                    rc.sinh() * (rc.sinh() * rd.cosh() + i * rc.cosh() * rd.sinh()) / x[b].sinh()
                }
            };
        }
    }
    Ok(dtheta * dlen)
}

/// The radius `r̄_i` at which the face `{i, j, k}` degenerates with the
/// angle at `i` opening to `π`: the root of
/// `f(r_i) = l_ij + l_ik − l_jk` (hyperbolic). Zero when `I_jk <= 1`, since
/// then `f(0) >= 0`.
pub fn degenerate_threshold_radius(rj: f64, rk: f64, iij: f64, iik: f64, ijk: f64) -> Result<f64> {
    for (name, v) in [("I_ij", iij), ("I_ik", iik), ("I_jk", ijk)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Domain(format!("{name} = {v} must be nonnegative")));
        }
    }
    if ijk <= 1.0 {
        return Ok(0.0);
    }
    let h = Background::Hyperbolic;
    let ljk = edge_length(h, rj, rk, ijk)?;
    let f = |r: f64| -> Result<f64> {
        Ok(edge_length(h, r, rj, iij)? + edge_length(h, r, rk, iik)? - ljk)
    };

    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > HYPERBOLIC_LIMIT {
            return Err(Error::Range {
                value: hi,
                limit: HYPERBOLIC_LIMIT,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo)?.abs(), f(hi)?.abs());
    Ok(if flo <= fhi { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E: Background = Background::Euclidean;
    const H: Background = Background::Hyperbolic;

    fn lengths(x: [f64; 3]) -> TriangleLengths {
        TriangleLengths::new(x).unwrap()
    }

    /// `Λ` applied literally to the cosine-law ratio.
    fn cosine_law_angles(bg: Background, x: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let ratio = match bg {
                E => (x[j] * x[j] + x[k] * x[k] - x[i] * x[i]) / (2.0 * x[j] * x[k]),
                H => (x[j].cosh() * x[k].cosh() - x[i].cosh()) / (x[j].sinh() * x[k].sinh()),
            };
            out[i] = lambda_aux(ratio);
        }
        out
    }

    fn angles_of_u(bg: Background, u: [f64; 3], inv: [f64; 3]) -> [f64; 3] {
        let r = u.map(|v| crate::packing::u_to_radius(bg, v));
        extended_angles(bg, &triangle_edge_lengths(bg, r, inv).unwrap())
            .unwrap()
            .theta
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_aux(-2.0), PI);
        assert_eq!(lambda_aux(0.0), PI / 2.0);
        assert_eq!(lambda_aux(1.0), 0.0);
        assert!(lambda_aux(1.0 - 1e-12) < 1e-5);
        assert_eq!(lambda_aux(7.0), 0.0);
    }

    #[test]
    fn degenerate_lengths_give_pi_zero_zero() {
        for bg in [E, H] {
            let a = extended_angles(bg, &lengths([5.0, 1.0, 1.0])).unwrap();
            assert!(a.degenerate);
            assert_eq!(a.theta, [PI, 0.0, 0.0]);
            let a = extended_angles(bg, &lengths([1.0, 1.0, 2.0])).unwrap();
            assert_eq!(a.theta, [0.0, 0.0, PI]);
            assert_eq!(triangle_area(bg, &a), 0.0);
        }
    }

    #[test]
    fn equilateral_triangles() {
        let a = extended_angles(E, &lengths([1.0, 1.0, 1.0])).unwrap();
        for t in a.theta {
            assert!((t - PI / 3.0).abs() < 1e-15);
        }
        assert!(triangle_area(E, &a).abs() < 1e-15);

        let x = 2f64.acosh();
        let a = extended_angles(H, &lengths([x, x, x])).unwrap();
        let expected = (2.0f64 / 3.0).acos();
        for t in a.theta {
            assert!((t - expected).abs() < 1e-14);
        }
        let area = triangle_area(H, &a);
        assert!((area - (PI - 3.0 * expected)).abs() < 1e-14);
    }

    #[test]
    fn half_angle_form_matches_lambda_of_cosine_ratio() {
        for x in [[0.3, 0.4, 0.5], [2.0, 2.5, 1.0], [0.01, 0.011, 0.015], [3.0, 4.0, 6.5]] {
            for bg in [E, H] {
                let ours = extended_angles(bg, &lengths(x)).unwrap().theta;
                let lit = cosine_law_angles(bg, x);
                for i in 0..3 {
                    assert!((ours[i] - lit[i]).abs() < 1e-9, "{bg:?} {x:?}");
                }
            }
        }
    }

    #[test]
    fn jacobian_of_symmetric_triangle_is_permutation_invariant() {
        for bg in [E, H] {
            let j = angle_jacobian_u(bg, [0.7; 3], [0.4; 3]).unwrap();
            assert!((j[(0, 0)] - j[(1, 1)]).abs() < 1e-13);
            assert!((j[(0, 0)] - j[(2, 2)]).abs() < 1e-13);
            assert!((j[(0, 1)] - j[(1, 2)]).abs() < 1e-13);
            assert!((j[(0, 1)] - j[(0, 2)]).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobian_refused_at_degenerate_triangle() {
        // I_12 = 5 with a tiny opposite radius forces the face out of Ξ.
        let err = angle_jacobian_u(H, [1e-3, 1.0, 1.0], [5.0, 0.0, 0.0]).unwrap_err();
        assert_eq!(err, Error::Boundary { face: None });
    }

    #[test]
    fn euclidean_jacobian_annihilates_scaling() {
        let j = angle_jacobian_u(E, [0.4, 1.3, 2.2], [0.2, 1.5, 0.7]).unwrap();
        for a in 0..3 {
            let row: f64 = (0..3).map(|b| j[(a, b)]).sum();
            assert!(row.abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_radius_examples() {
        assert_eq!(degenerate_threshold_radius(0.7, 1.9, 0.3, 2.0, 1.0).unwrap(), 0.0);
        assert_eq!(degenerate_threshold_radius(0.7, 1.9, 0.3, 2.0, 0.5).unwrap(), 0.0);

        let (rj, rk, iij, iik, ijk) = (1.0, 1.0, 0.0, 0.0, 3.0);
        let root = degenerate_threshold_radius(rj, rk, iij, iik, ijk).unwrap();
        let f = |r: f64| {
            edge_length(H, r, rj, iij).unwrap() + edge_length(H, r, rk, iik).unwrap()
                - edge_length(H, rj, rk, ijk).unwrap()
        };
        assert!(root > 0.0);
        assert!(f(root).abs() <= 1e-12);
        // Independent sign check on both sides.
        assert!(f(root * (1.0 - 1e-6)) < 0.0);
        assert!(f(root * (1.0 + 1e-6)) > 0.0);
        // Just above the root the face is in Ξ, just below it is degenerate.
        let inside = triangle_edge_lengths(H, [root * 1.001, rj, rk], [ijk, iik, iij]).unwrap();
        let outside = triangle_edge_lengths(H, [root * 0.999, rj, rk], [ijk, iik, iij]).unwrap();
        assert!(inside.in_xi());
        assert!(!outside.in_xi());
    }

    #[test]
    fn small_radius_limits() {
        // θ̃_i → π − Λ(I_jk) as r_i → 0.
        let inv = [2.5, 0.3, 0.8];
        let theta = angles_of_u(H, [crate::packing::radius_to_u(H, 1e-6), -0.5, -0.2], inv);
        assert!((theta[0] - (PI - lambda_aux(inv[0]))).abs() < 1e-4);
        let inv = [0.4, 0.3, 0.8];
        let r = [1e-6, 0.8, 1.3];
        let a = extended_angles(H, &triangle_edge_lengths(H, r, inv).unwrap()).unwrap();
        assert!((a.theta[0] - (PI - lambda_aux(inv[0]))).abs() < 1e-4);
        // θ̃_k → 0 as (r_i, r_j) → 0 with r_k fixed.
        let r = [1e-6, 1e-6, 0.9];
        let a = extended_angles(H, &triangle_edge_lengths(H, r, inv).unwrap()).unwrap();
        assert!(a.theta[2] < 1e-4);
    }

    #[test]
    fn large_radius_angle_vanishes() {
        let a = extended_angles(H, &triangle_edge_lengths(H, [50.0, 1.0, 0.6], [1.7, 0.2, 0.9]).unwrap())
            .unwrap();
        assert!(a.theta[0] < 1e-3);
    }

    #[test]
    fn overflow_guard() {
        let err = extended_angles(H, &lengths([400.0, 300.0, 200.0])).unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
        assert!(edge_length(H, 351.0, 1.0, 0.0).is_err());
    }

    /// Five-point central differences, `O(h⁴)`.
    fn finite_difference_jacobian(bg: Background, u: [f64; 3], inv: [f64; 3], h: f64) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for c in 0..3 {
            let at = |s: f64| {
                let mut v = u;
                v[c] += s * h;
                angles_of_u(bg, v, inv)
            };
            let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
            for a in 0..3 {
                m[(a, c)] = (-p2[a] + 8.0 * p1[a] - 8.0 * m1[a] + m2[a]) / (12.0 * h);
            }
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn lambda_is_odd_about_half_pi(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            prop_assert!((lambda_aux(-x) - (PI - lambda_aux(x))).abs() < 1e-15);
            if x <= y {
                prop_assert!(lambda_aux(x) >= lambda_aux(y));
            }
        }

        #[test]
        fn jacobian_symmetric_negative_definite_and_matches_differences(
            lr in proptest::array::uniform3(-2.0f64..1.5),
            inv in proptest::array::uniform3(0.0f64..2.0),
        ) {
            let r = lr.map(f64::exp);
            let tl = triangle_edge_lengths(H, r, inv).unwrap();
            prop_assume!(tl.in_xi());
            let j = angle_jacobian_u(H, r, inv).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    prop_assert!((j[(a, b)] - j[(b, a)]).abs() <= 1e-9);
                }
            }
            let sym = 0.5 * (j + j.transpose());
            let eig = sym.symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&e| e < 0.0), "{eig:?}");

            let u = r.map(|v| crate::packing::radius_to_u(H, v));
            let fd = finite_difference_jacobian(H, u, inv, 1e-6);
            let scale = j.amax().max(1.0);
            prop_assert!((fd - j).amax() <= 1e-6 * scale, "{j} vs {fd}");
        }

        #[test]
        fn euclidean_jacobian_matches_differences(
            lr in proptest::array::uniform3(-2.0f64..1.5),
            inv in proptest::array::uniform3(0.0f64..2.0),
        ) {
            let r = lr.map(f64::exp);
            let tl = triangle_edge_lengths(E, r, inv).unwrap();
            prop_assume!(tl.in_xi());
            let j = angle_jacobian_u(E, r, inv).unwrap();
            let u = r.map(f64::ln);
            let fd = finite_difference_jacobian(E, u, inv, 1e-5);
            prop_assert!((fd - j).amax() <= 1e-6 * j.amax().max(1.0));
            prop_assert!((j - j.transpose()).amax() <= 1e-9);
        }

        #[test]
        fn angles_bounded_by_opposite_inversive(
            lr in proptest::array::uniform3(-4.0f64..2.0),
            inv in proptest::array::uniform3(0.0f64..3.0),
        ) {
            let r = lr.map(f64::exp);
            let tl = triangle_edge_lengths(H, r, inv).unwrap();
            let a = extended_angles(H, &tl).unwrap();
            for i in 0..3 {
                let bound = PI - lambda_aux(inv[i]);
                prop_assert!(a.theta[i] >= 0.0 && a.theta[i] <= bound + 1e-12);
                if tl.in_xi() {
                    prop_assert!(a.theta[i] > 0.0 && a.theta[i] < bound);
                }
            }
            if tl.in_xi() {
                prop_assert!(a.sum() < PI);
            }
        }

        #[test]
        fn angle_decreases_in_own_radius(
            lr in proptest::array::uniform3(-2.0f64..1.5),
            inv in proptest::array::uniform3(0.0f64..2.0),
        ) {
            let r = lr.map(f64::exp);
            let bigger = [r[0] * 1.05, r[1], r[2]];
            let (t0, t1) = (
                triangle_edge_lengths(H, r, inv).unwrap(),
                triangle_edge_lengths(H, bigger, inv).unwrap(),
            );
            prop_assume!(t0.in_xi() && t1.in_xi());
            let a0 = extended_angles(H, &t0).unwrap().theta[0];
            let a1 = extended_angles(H, &t1).unwrap().theta[0];
            prop_assert!(a1 < a0);
        }

        #[test]
        fn extension_continuous_across_boundary(
            b in 0.2f64..3.0, c in 0.2f64..3.0, hyper in any::<bool>(), side in 0usize..3
        ) {
            let bg = if hyper { H } else { E };
            let edge = b + c;
            for eps in [1e-9, 1e-11] {
                let mut inside = [b, c, 0.0];
                inside[2] = edge * (1.0 - eps);
                let mut outside = inside;
                outside[2] = edge * (1.0 + eps);
                inside.rotate_left(side);
                outside.rotate_left(side);
                let ai = extended_angles(bg, &lengths(inside)).unwrap();
                let ao = extended_angles(bg, &lengths(outside)).unwrap();
                for i in 0..3 {
                    prop_assert!((ai.theta[i] - ao.theta[i]).abs() < 1e-3);
                }
            }
        }
    }
}
