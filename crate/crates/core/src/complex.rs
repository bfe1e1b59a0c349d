//! Combinatorics of closed triangulated surfaces.
//!
//! A [`SurfaceComplex`] is built once from a face list and is immutable
//! afterwards. Vertices are dense indices `0..N`, edges are canonical
//! `(min, max)` pairs stored in lexicographic order, and every edge lies in
//! exactly two faces.
//!
//! [`VertexSubset`], [`subcomplex_euler`] and [`link_pairs`] provide the
//! subset machinery (induced subcomplex `F_A`, link pairs `Lk(A)`) used by
//! the obstruction checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Canonical edge key `(min, max)`.
pub type Edge = (usize, usize);

#[inline]
pub fn canonical_edge(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceComplex {
    vertex_count: usize,
    faces: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    edge_lookup: HashMap<Edge, usize>,
    /// `face_edges[f][c]` is the edge opposite corner `c` of face `f`.
    face_edges: Vec<[usize; 3]>,
    edge_faces: Vec<[usize; 2]>,
    vertex_faces: Vec<Vec<usize>>,
    euler: i64,
}

impl SurfaceComplex {
    /// Builds and validates a closed surface from its faces.
    ///
    /// The vertex count is one more than the largest index used; every
    /// index below it must appear in some face.
    pub fn build(faces: &[[usize; 3]]) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::EmptyComplex);
        }
        for (f, tri) in faces.iter().enumerate() {
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::BadFace {
                    face: f,
                    vertices: *tri,
                });
            }
        }

        // A face listed twice makes each of its edges sit in "the same face
        // twice"; report those edges before any incidence counting.
        let mut seen = BTreeSet::new();
        let mut dup_edges = BTreeSet::new();
        for tri in faces {
            let mut key = *tri;
            key.sort_unstable();
            if !seen.insert(key) {
                dup_edges.insert((key[0], key[1]));
                dup_edges.insert((key[0], key[2]));
                dup_edges.insert((key[1], key[2]));
            }
        }
        if !dup_edges.is_empty() {
            return Err(Error::NonManifold {
                edges: dup_edges.into_iter().collect(),
            });
        }

        let vertex_count = faces.iter().flatten().copied().max().unwrap_or(0) + 1;

        let mut incidence: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
        for (f, tri) in faces.iter().enumerate() {
            for c in 0..3 {
                let e = canonical_edge(tri[(c + 1) % 3], tri[(c + 2) % 3]);
                incidence.entry(e).or_default().push(f);
            }
        }
        let bad: Vec<Edge> = incidence
            .iter()
            .filter(|(_, fs)| fs.len() != 2)
            .map(|(e, _)| *e)
            .collect();
        if !bad.is_empty() {
            return Err(Error::NonManifold { edges: bad });
        }

        let edges: Vec<Edge> = incidence.keys().copied().collect();
        let edge_lookup: HashMap<Edge, usize> =
            edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let edge_faces: Vec<[usize; 2]> = incidence.values().map(|fs| [fs[0], fs[1]]).collect();
        let face_edges: Vec<[usize; 3]> = faces
            .iter()
            .map(|tri| {
                let mut out = [0; 3];
                for (c, slot) in out.iter_mut().enumerate() {
                    let e = canonical_edge(tri[(c + 1) % 3], tri[(c + 2) % 3]);
                    *slot = edge_lookup[&e];
                }
                out
            })
            .collect();

        let mut vertex_faces = vec![Vec::new(); vertex_count];
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                vertex_faces[v].push(f);
            }
        }

        for (v, fs) in vertex_faces.iter().enumerate() {
            if !link_is_cycle(v, fs, faces) {
                return Err(Error::DisconnectedLink { vertex: v });
            }
        }

        let euler = vertex_count as i64 - edges.len() as i64 + faces.len() as i64;
        Ok(Self {
            vertex_count,
            faces: faces.to_vec(),
            edges,
            edge_lookup,
            face_edges,
            edge_faces,
            vertex_faces,
            euler,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }

    /// Edges in canonical order; edge indices refer to positions in this slice.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&canonical_edge(a, b)).copied()
    }

    /// Edge indices opposite each corner of face `f`.
    pub fn face_edges(&self, f: usize) -> [usize; 3] {
        self.face_edges[f]
    }

    pub fn edge_faces(&self, e: usize) -> [usize; 2] {
        self.edge_faces[e]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    /// Valence `d_i`; on a closed surface this equals the number of incident faces.
    pub fn degree(&self, v: usize) -> usize {
        self.vertex_faces[v].len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.euler
    }

    /// `χ` of the subcomplex induced by a membership mask (the mask may be all of `V`).
    pub fn induced_euler(&self, mask: &[bool]) -> i64 {
        let v = mask.iter().filter(|&&m| m).count() as i64;
        let e = self
            .edges
            .iter()
            .filter(|(a, b)| mask[*a] && mask[*b])
            .count() as i64;
        let f = self
            .faces
            .iter()
            .filter(|t| t.iter().all(|&x| mask[x]))
            .count() as i64;
        v - e + f
    }
}

fn link_is_cycle(v: usize, incident: &[usize], faces: &[[usize; 3]]) -> bool {
    if incident.len() < 3 {
        return false;
    }
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &f in incident {
        let others: Vec<usize> = faces[f].iter().copied().filter(|&x| x != v).collect();
        adjacency.entry(others[0]).or_default().push(others[1]);
        adjacency.entry(others[1]).or_default().push(others[0]);
    }
    if adjacency.values().any(|n| n.len() != 2) {
        return false;
    }
    // Walk the cycle from the smallest link vertex and require it to cover everything.
    let start = *adjacency.keys().next().unwrap();
    let mut prev = start;
    let mut cur = adjacency[&start][0];
    let mut steps = 1;
    while cur != start {
        let n = &adjacency[&cur];
        let next = if n[0] == prev { n[1] } else { n[0] };
        prev = cur;
        cur = next;
        steps += 1;
        if steps > adjacency.len() {
            return false;
        }
    }
    steps == adjacency.len()
}

/// A nonempty proper subset `A ⊂ V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSubset {
    members: Vec<usize>,
    mask: Vec<bool>,
}

impl VertexSubset {
    pub fn new(complex: &SurfaceComplex, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let n = complex.vertex_count();
        let mut mask = vec![false; n];
        for v in members {
            if v >= n {
                return Err(Error::InvalidSubset(format!(
                    "vertex {v} out of range 0..{n}"
                )));
            }
            mask[v] = true;
        }
        let members: Vec<usize> = (0..n).filter(|&v| mask[v]).collect();
        if members.is_empty() {
            return Err(Error::InvalidSubset("subset is empty".into()));
        }
        if members.len() == n {
            return Err(Error::InvalidSubset("subset is all of V".into()));
        }
        Ok(Self { members, mask })
    }

    /// Subset from a bitmask over the first 64 vertices.
    pub fn from_bits(complex: &SurfaceComplex, bits: u64) -> Result<Self> {
        Self::new(
            complex,
            (0..complex.vertex_count().min(64)).filter(|v| bits >> v & 1 == 1),
        )
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, v: usize) -> bool {
        self.mask.get(v).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `χ(F_A) = |V_A| − |E_A| + |F_A|` for the subcomplex induced by `A`.
pub fn subcomplex_euler(complex: &SurfaceComplex, subset: &VertexSubset) -> i64 {
    complex.induced_euler(subset.mask())
}

/// A pair `(e, v)` of `Lk(A)`: `v ∈ A`, both ends of `e` outside `A`, and
/// `e ∪ {v}` a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinkPair {
    pub edge: usize,
    pub vertex: usize,
}

pub fn link_pairs(complex: &SurfaceComplex, subset: &VertexSubset) -> Vec<LinkPair> {
    let mut out = Vec::new();
    for f in 0..complex.face_count() {
        let tri = complex.face(f);
        let edges = complex.face_edges(f);
        for c in 0..3 {
            let v = tri[c];
            if subset.contains(v)
                && !subset.contains(tri[(c + 1) % 3])
                && !subset.contains(tri[(c + 2) % 3])
            {
                out.push(LinkPair {
                    edge: edges[c],
                    vertex: v,
                });
            }
        }
    }
    out.sort();
    out
}
