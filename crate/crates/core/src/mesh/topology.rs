//! Adjacency derived from face lists: neighbours, edges, loops, components.

use crate::error::{Error, Result};
use crate::mesh::{Aabb, TriMesh};

/// An undirected edge `(a, b)` with `a < b` and the faces that use it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeUse {
    pub a: usize,
    pub b: usize,
    pub faces: Vec<usize>,
}

/// All edges of the mesh sorted by `(a, b)`. Repeated corners (`a == b`)
/// inside degenerate faces are skipped.
pub fn edge_incidence(mesh: &TriMesh) -> Vec<EdgeUse> {
    let mut triples: Vec<(usize, usize, usize)> = Vec::with_capacity(mesh.faces.len() * 3);
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let (u, v) = (f[k], f[(k + 1) % 3]);
            if u != v {
                triples.push((u.min(v), u.max(v), fi));
            }
        }
    }
    triples.sort_unstable();
    let mut edges: Vec<EdgeUse> = Vec::new();
    for (a, b, f) in triples {
        match edges.last_mut() {
            Some(e) if e.a == a && e.b == b => {
                if e.faces.last() != Some(&f) {
                    e.faces.push(f);
                }
            }
            _ => edges.push(EdgeUse {
                a,
                b,
                faces: vec![f],
            }),
        }
    }
    edges
}

/// Per-vertex sorted list of adjacent vertices, derived from face edges.
pub fn vertex_neighbors(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut nbrs = vec![Vec::new(); mesh.vertices.len()];
    for e in edge_incidence(mesh) {
        nbrs[e.a].push(e.b);
        nbrs[e.b].push(e.a);
    }
    for n in &mut nbrs {
        n.sort_unstable();
    }
    nbrs
}

/// Faces incident to each vertex, in ascending face order.
pub fn vertex_faces(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); mesh.vertices.len()];
    for (fi, f) in mesh.faces.iter().enumerate() {
        for (k, &v) in f.iter().enumerate() {
            if !f[..k].contains(&v) {
                out[v].push(fi);
            }
        }
    }
    out
}

pub fn max_faces_per_edge(mesh: &TriMesh) -> usize {
    edge_incidence(mesh)
        .iter()
        .map(|e| e.faces.len())
        .max()
        .unwrap_or(0)
}

/// Closed loops of boundary edges (edges used by exactly one face), each as
/// a vertex sequence whose length equals its edge count.
pub fn boundary_loops(mesh: &TriMesh) -> Result<Vec<Vec<usize>>> {
    let edges = edge_incidence(mesh);
    if let Some(e) = edges.iter().find(|e| e.faces.len() > 2) {
        return Err(Error::InvalidMesh(format!(
            "edge ({}, {}) is used by {} faces",
            e.a,
            e.b,
            e.faces.len()
        )));
    }
    let boundary: Vec<(usize, usize)> = edges
        .iter()
        .filter(|e| e.faces.len() == 1)
        .map(|e| (e.a, e.b))
        .collect();

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); mesh.vertices.len()];
    for (i, &(a, b)) in boundary.iter().enumerate() {
        incident[a].push(i);
        incident[b].push(i);
    }
    let mut used = vec![false; boundary.len()];
    let mut loops = Vec::new();
    for start in 0..boundary.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut cur) = boundary[start];
        let mut chain = vec![first];
        while cur != first {
            chain.push(cur);
            let Some(&next) = incident[cur].iter().find(|&&e| !used[e]) else {
                break;
            };
            used[next] = true;
            let (a, b) = boundary[next];
            cur = if a == cur { b } else { a };
        }
        loops.push(chain);
    }
    Ok(loops)
}

/// Per-vertex boundary neighbours (vertices joined by a boundary edge).
pub fn boundary_neighbors(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); mesh.vertices.len()];
    for e in edge_incidence(mesh) {
        if e.faces.len() == 1 {
            out[e.a].push(e.b);
            out[e.b].push(e.a);
        }
    }
    out
}

/// One edge-connected set of faces.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub faces: Vec<usize>,
    /// Bounding-box diagonal of the component's corners, in mm.
    pub diameter: f64,
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Partition of the faces by shared edges, ordered by smallest face index.
pub fn connected_components(mesh: &TriMesh) -> Vec<Component> {
    let mut uf = UnionFind::new(mesh.faces.len());
    for e in edge_incidence(mesh) {
        for w in e.faces.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    let mut slot = vec![usize::MAX; mesh.faces.len()];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for f in 0..mesh.faces.len() {
        let root = uf.find(f);
        if slot[root] == usize::MAX {
            slot[root] = comps.len();
            comps.push(Vec::new());
        }
        comps[slot[root]].push(f);
    }
    comps
        .into_iter()
        .map(|faces| {
            let diameter = Aabb::from_points(
                faces
                    .iter()
                    .flat_map(|&f| mesh.faces[f].iter().map(|&v| &mesh.vertices[v])),
            )
            .map_or(0.0, |b| b.diagonal());
            Component { faces, diameter }
        })
        .collect()
}
