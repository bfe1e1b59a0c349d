//! Standard closed triangulations used by tests, examples and the CLI docs.

use crate::complex::SurfaceComplex;

pub fn tetrahedron() -> SurfaceComplex {
    SurfaceComplex::build(&[[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]).expect("tetrahedron")
}

/// Poles 0 and 5, equator 1..=4.
pub fn octahedron() -> SurfaceComplex {
    let mut faces = Vec::new();
    for i in 0..4 {
        let a = 1 + i;
        let b = 1 + (i + 1) % 4;
        faces.push([0, a, b]);
        faces.push([5, b, a]);
    }
    SurfaceComplex::build(&faces).expect("octahedron")
}

/// Apex 0, upper ring 1..=5, lower ring 6..=10, bottom 11.
pub fn icosahedron() -> SurfaceComplex {
    let mut faces = Vec::new();
    for i in 0..5 {
        let u0 = 1 + i;
        let u1 = 1 + (i + 1) % 5;
        let l0 = 6 + i;
        let l1 = 6 + (i + 1) % 5;
        faces.push([0, u0, u1]);
        faces.push([u0, l0, u1]);
        faces.push([u1, l0, l1]);
        faces.push([11, l1, l0]);
    }
    SurfaceComplex::build(&faces).expect("icosahedron")
}

/// Torus from an `rows × cols` periodic grid, each square split along its
/// main diagonal. Needs `rows, cols >= 3` to be simplicial.
pub fn torus_faces(rows: usize, cols: usize) -> Vec<[usize; 3]> {
    assert!(rows >= 3 && cols >= 3, "grid torus needs at least 3x3");
    let id = |i: usize, j: usize| (i % rows) * cols + (j % cols);
    let mut faces = Vec::with_capacity(2 * rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    faces
}

pub fn torus(rows: usize, cols: usize) -> SurfaceComplex {
    SurfaceComplex::build(&torus_faces(rows, cols)).expect("grid torus")
}

/// Genus-2 surface: connected sum of two 3×3 grid tori along one face
/// (15 vertices, 51 edges, 34 faces, χ = −2).
pub fn double_torus() -> SurfaceComplex {
    let base = torus_faces(3, 3);
    let glued = base[0];
    let mut shared = glued;
    shared.sort_unstable();

    let mut faces: Vec<[usize; 3]> = base[1..].to_vec();

    let mut next = 9;
    let mut relabel = [0usize; 9];
    for (w, slot) in relabel.iter_mut().enumerate() {
        if shared.contains(&w) {
            *slot = w;
        } else {
            *slot = next;
            next += 1;
        }
    }
    faces.extend(base[1..].iter().map(|t| [relabel[t[0]], relabel[t[2]], relabel[t[1]]]));
    SurfaceComplex::build(&faces).expect("double torus")
}
