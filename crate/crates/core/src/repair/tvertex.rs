//! T-vertex detection and removal.

use std::collections::{HashMap, HashSet};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::mesh::topology::edge_incidence;
use crate::mesh::TriMesh;

use super::faces::with_faces;

/// Perpendicular distance (mm) below which a vertex counts as lying on an edge.
pub const COLLINEAR_TOLERANCE: f64 = 1e-6;
/// Edge parameter margin: the vertex must sit in `(margin, 1 - margin)`.
pub const EDGE_PARAM_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TVertexMode {
    /// Collapse the T-vertex onto the nearer endpoint of the edge it splits.
    #[default]
    Collapse,
    /// Flip the split edge when both faces on it are available and the
    /// minimum angle improves; otherwise fall back to collapse.
    Flip,
}

/// A vertex lying strictly inside an edge of a face it does not belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TVertex {
    pub vertex: usize,
    pub edge: (usize, usize),
    pub face: usize,
}

fn on_segment(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> bool {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return false;
    }
    let t = (p - a).dot(&ab) / len2;
    if t <= EDGE_PARAM_MARGIN || t >= 1.0 - EDGE_PARAM_MARGIN {
        return false;
    }
    let foot = a + ab * t;
    (p - foot).norm() < COLLINEAR_TOLERANCE
}

/// All T-vertices, one entry per vertex (the first edge found), sorted by vertex.
pub fn find_t_vertices(mesh: &TriMesh) -> Vec<TVertex> {
    let edges = edge_incidence(mesh);
    if edges.is_empty() {
        return Vec::new();
    }
    let mut referenced = vec![false; mesh.vertices.len()];
    for f in &mesh.faces {
        for &v in f {
            referenced[v] = true;
        }
    }
    let mean_len = edges
        .iter()
        .map(|e| (mesh.vertices[e.a] - mesh.vertices[e.b]).norm())
        .sum::<f64>()
        / edges.len() as f64;
    let cell = mean_len.max(COLLINEAR_TOLERANCE * 4.0);
    let key = |p: &Point3<f64>| p.coords.map(|c| (c / cell).floor() as i64);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (v, p) in mesh.vertices.iter().enumerate() {
        if referenced[v] {
            let k = key(p);
            grid.entry([k.x, k.y, k.z]).or_default().push(v);
        }
    }

    let mut found: HashMap<usize, TVertex> = HashMap::new();
    for e in &edges {
        let (pa, pb) = (mesh.vertices[e.a], mesh.vertices[e.b]);
        let lo = key(&pa.inf(&pb).map(|c| c - COLLINEAR_TOLERANCE));
        let hi = key(&pa.sup(&pb).map(|c| c + COLLINEAR_TOLERANCE));
        let cells = (hi - lo).map(|d| d + 1).iter().product::<i64>();
        if cells > 1_000_000 {
            // Pathologically long edge relative to the mesh: scan vertices.
            for v in 0..mesh.vertices.len() {
                if referenced[v] {
                    check(mesh, e.a, e.b, &e.faces, v, &mut found);
                }
            }
            continue;
        }
        for x in lo.x..=hi.x {
            for y in lo.y..=hi.y {
                for z in lo.z..=hi.z {
                    if let Some(bucket) = grid.get(&[x, y, z]) {
                        for &v in bucket {
                            check(mesh, e.a, e.b, &e.faces, v, &mut found);
                        }
                    }
                }
            }
        }
    }
    let mut out: Vec<TVertex> = found.into_values().collect();
    out.sort_by_key(|t| t.vertex);
    out
}

fn check(
    mesh: &TriMesh,
    a: usize,
    b: usize,
    faces: &[usize],
    v: usize,
    found: &mut HashMap<usize, TVertex>,
) {
    if v == a || v == b {
        return;
    }
    if !on_segment(&mesh.vertices[v], &mesh.vertices[a], &mesh.vertices[b]) {
        return;
    }
    if let Some(&f) = faces.iter().find(|&&f| !mesh.faces[f].contains(&v)) {
        let cand = TVertex {
            vertex: v,
            edge: (a, b),
            face: f,
        };
        found
            .entry(v)
            .and_modify(|t| {
                if (cand.edge, cand.face) < (t.edge, t.face) {
                    *t = cand;
                }
            })
            .or_insert(cand);
    }
}

/// Smallest interior angle (radians) of a triangle.
pub fn min_angle(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    let angle = |p: &Point3<f64>, q: &Point3<f64>, r: &Point3<f64>| {
        let u = q - p;
        let w = r - p;
        let (nu, nw) = (u.norm(), w.norm());
        if nu == 0.0 || nw == 0.0 {
            return 0.0;
        }
        (u.dot(&w) / (nu * nw)).clamp(-1.0, 1.0).acos()
    };
    angle(a, b, c).min(angle(b, c, a)).min(angle(c, a, b))
}

fn face_min_angle(mesh: &TriMesh, f: &[usize; 3]) -> f64 {
    min_angle(
        &mesh.vertices[f[0]],
        &mesh.vertices[f[1]],
        &mesh.vertices[f[2]],
    )
}

const MAX_PASSES: usize = 16;

/// Removes T-vertices. In collapse mode each T-vertex is merged into the
/// nearer endpoint of the edge it lies on (the shorter of its two incident
/// edges along that line); faces that become degenerate are dropped. In flip
/// mode the split edge is flipped when it is shared by exactly two faces,
/// one of which holds the T-vertex, and the flip raises the pair's minimum
/// angle; other cases fall back to collapse.
pub fn remove_t_vertices(mesh: &TriMesh, mode: TVertexMode) -> (TriMesh, usize) {
    let mut current = mesh.clone();
    let mut count = 0;
    for _ in 0..MAX_PASSES {
        let tv = find_t_vertices(&current);
        if tv.is_empty() {
            break;
        }
        let mut faces = current.faces.clone();
        let mut alive = vec![true; faces.len()];
        let mut touched: HashSet<usize> = HashSet::new();
        let edges = edge_incidence(&current);
        for t in &tv {
            let (a, b) = t.edge;
            if [t.vertex, a, b].iter().any(|v| touched.contains(v)) {
                continue;
            }
            if mode == TVertexMode::Flip {
                if let Some((f, g, nf, ng)) = flip_candidate(&current, &edges, t) {
                    if alive[f]
                        && alive[g]
                        && faces[f] == current.faces[f]
                        && faces[g] == current.faces[g]
                    {
                        faces[f] = nf;
                        faces[g] = ng;
                        touched.extend(nf.iter().chain(ng.iter()).copied());
                        count += 1;
                        continue;
                    }
                }
            }
            let pv = current.vertices[t.vertex];
            let target = if (current.vertices[a] - pv).norm() <= (current.vertices[b] - pv).norm() {
                a
            } else {
                b
            };
            for (fi, f) in faces.iter_mut().enumerate() {
                if !alive[fi] || !f.contains(&t.vertex) {
                    continue;
                }
                touched.extend(f.iter().copied());
                for v in f.iter_mut() {
                    if *v == t.vertex {
                        *v = target;
                    }
                }
                if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                    alive[fi] = false;
                }
            }
            touched.insert(t.vertex);
            count += 1;
        }
        let kept = faces
            .into_iter()
            .zip(alive)
            .filter_map(|(f, a)| a.then_some(f))
            .collect();
        current = with_faces(&current, kept);
    }
    if count == 0 {
        return (mesh.clone(), 0);
    }
    (current, count)
}

/// The edge flip that removes `t`, if one exists and improves quality.
fn flip_candidate(
    mesh: &TriMesh,
    edges: &[crate::mesh::topology::EdgeUse],
    t: &TVertex,
) -> Option<(usize, usize, [usize; 3], [usize; 3])> {
    let key = (t.edge.0.min(t.edge.1), t.edge.0.max(t.edge.1));
    let pos = edges.binary_search_by(|e| (e.a, e.b).cmp(&key)).ok()?;
    let users = &edges[pos].faces;
    if users.len() != 2 {
        return None;
    }
    let (g, f) = if mesh.faces[users[0]].contains(&t.vertex) {
        (users[0], users[1])
    } else if mesh.faces[users[1]].contains(&t.vertex) {
        (users[1], users[0])
    } else {
        return None;
    };
    let gf = mesh.faces[g];
    // Rotate g so that it reads (p, q, vertex) with (p, q) the split edge.
    let j = (0..3).find(|&j| gf[(j + 2) % 3] == t.vertex)?;
    let (p, q) = (gf[j], gf[(j + 1) % 3]);
    let ff = mesh.faces[f];
    let d = *ff.iter().find(|&&v| v != p && v != q)?;
    if edges
        .binary_search_by(|e| (e.a, e.b).cmp(&(d.min(t.vertex), d.max(t.vertex))))
        .is_ok()
    {
        return None;
    }
    let c = t.vertex;
    let new_g = [c, p, d];
    let new_f = [c, d, q];
    let before = face_min_angle(mesh, &gf).min(face_min_angle(mesh, &ff));
    let after = face_min_angle(mesh, &new_g).min(face_min_angle(mesh, &new_f));
    (after > before).then_some((f, g, new_f, new_g))
}
