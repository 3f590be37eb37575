//! Non-manifold edge and vertex repair.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::topology::{edge_incidence, vertex_faces, UnionFind};
use crate::mesh::TriMesh;

use super::faces::with_faces;

/// Distance (mm) split vertex copies are moved towards their fan, so that
/// copies stay distinct under later welding.
pub const DEFAULT_SPLIT_OFFSET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NonManifoldEdgeStrategy {
    /// Per over-used edge, delete the smallest-area face until two remain.
    #[default]
    DeleteSmallestFace,
    /// Duplicate vertices so that every non-manifold edge chain becomes a border.
    SplitVertices,
}

pub fn repair_nonmanifold_edges(
    mesh: &TriMesh,
    strategy: NonManifoldEdgeStrategy,
) -> (TriMesh, usize) {
    repair_nonmanifold_edges_with(mesh, strategy, DEFAULT_SPLIT_OFFSET)
}

pub fn repair_nonmanifold_edges_with(
    mesh: &TriMesh,
    strategy: NonManifoldEdgeStrategy,
    split_offset: f64,
) -> (TriMesh, usize) {
    match strategy {
        NonManifoldEdgeStrategy::DeleteSmallestFace => delete_smallest_faces(mesh),
        NonManifoldEdgeStrategy::SplitVertices => split_along_edges(mesh, split_offset),
    }
}

fn delete_smallest_faces(mesh: &TriMesh) -> (TriMesh, usize) {
    let edges = edge_incidence(mesh);
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| mesh.face_area(f)).collect();
    let mut alive = vec![true; mesh.faces.len()];
    let mut removed = 0;
    for e in edges.iter().filter(|e| e.faces.len() > 2) {
        loop {
            let live: Vec<usize> = e.faces.iter().copied().filter(|&f| alive[f]).collect();
            if live.len() <= 2 {
                break;
            }
            let smallest = live
                .into_iter()
                .min_by(|&a, &b| areas[a].total_cmp(&areas[b]).then(b.cmp(&a)))
                .expect("more than two faces");
            alive[smallest] = false;
            removed += 1;
        }
    }
    if removed == 0 {
        return (mesh.clone(), 0);
    }
    let faces = (0..mesh.faces.len())
        .filter(|&f| alive[f])
        .map(|f| mesh.faces[f])
        .collect();
    (with_faces(mesh, faces), removed)
}

/// Groups the faces around vertex `v` into fans: two faces join when they
/// share an edge `(v, w)` for which `connects(v, w)` holds.
fn fans_around(
    mesh: &TriMesh,
    v: usize,
    incident: &[usize],
    connects: &dyn Fn(usize, usize) -> bool,
) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(incident.len());
    for i in 0..incident.len() {
        for j in i + 1..incident.len() {
            let (fi, fj) = (mesh.faces[incident[i]], mesh.faces[incident[j]]);
            let shared = fi
                .iter()
                .any(|&w| w != v && fj.contains(&w) && connects(v, w));
            if shared {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; incident.len()];
    for i in 0..incident.len() {
        let r = uf.find(i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(incident[i]);
    }
    groups
}

/// Position for the copy of `v` serving `fan`: nudged by at most `offset`
/// towards the fan's centroid, and never more than a quarter of the
/// shortest fan edge at `v`.
fn nudged(mesh: &TriMesh, v: usize, fan: &[usize], offset: f64) -> Point3<f64> {
    let p = mesh.vertices[v];
    if offset <= 0.0 {
        return p;
    }
    let mut centroid = Vector3::zeros();
    let mut shortest = f64::INFINITY;
    for &f in fan {
        let face = mesh.faces[f];
        for &w in &face {
            centroid += mesh.vertices[w].coords;
            if w != v {
                shortest = shortest.min((mesh.vertices[w] - p).norm());
            }
        }
    }
    centroid /= (3 * fan.len()) as f64;
    let dir = centroid - p.coords;
    let len = dir.norm();
    if len == 0.0 || !shortest.is_finite() {
        return p;
    }
    p + dir * (offset.min(0.25 * shortest) / len)
}

/// Rewrites `mesh` so that each listed vertex gets one copy per fan.
/// Returns the number of vertices added.
fn split_fans(
    mesh: &TriMesh,
    splits: &[(usize, Vec<Vec<usize>>)],
    offset: f64,
) -> (TriMesh, usize) {
    let mut out = mesh.clone();
    let mut origins = mesh.origins_or_identity();
    let mut added = 0;
    for (v, fans) in splits {
        for (k, fan) in fans.iter().enumerate() {
            let pos = nudged(mesh, *v, fan, offset);
            let target = if k == 0 {
                out.vertices[*v] = pos;
                *v
            } else {
                out.vertices.push(pos);
                origins.push(origins[*v]);
                added += 1;
                out.vertices.len() - 1
            };
            for &f in fan {
                for c in out.faces[f].iter_mut() {
                    if *c == *v {
                        *c = target;
                    }
                }
            }
        }
    }
    out.origins = Some(origins);
    (out, added)
}

fn split_along_edges(mesh: &TriMesh, offset: f64) -> (TriMesh, usize) {
    let edges = edge_incidence(mesh);
    let bad: std::collections::HashSet<(usize, usize)> = edges
        .iter()
        .filter(|e| e.faces.len() > 2)
        .map(|e| (e.a, e.b))
        .collect();
    if bad.is_empty() {
        return (mesh.clone(), 0);
    }
    let mut on_bad = vec![false; mesh.vertices.len()];
    for &(a, b) in &bad {
        on_bad[a] = true;
        on_bad[b] = true;
    }
    let incident = vertex_faces(mesh);
    let manifold = |v: usize, w: usize| !bad.contains(&(v.min(w), v.max(w)));
    let splits: Vec<(usize, Vec<Vec<usize>>)> = (0..mesh.vertices.len())
        .filter(|&v| on_bad[v])
        .map(|v| (v, fans_around(mesh, v, &incident[v], &manifold)))
        .filter(|(_, fans)| fans.len() > 1)
        .collect();
    split_fans(mesh, &splits, offset)
}

pub fn repair_nonmanifold_vertices(mesh: &TriMesh) -> Result<(TriMesh, usize)> {
    repair_nonmanifold_vertices_with(mesh, DEFAULT_SPLIT_OFFSET)
}

/// Splits every vertex whose incident faces form more than one edge-connected
/// fan, one copy per fan.
pub fn repair_nonmanifold_vertices_with(mesh: &TriMesh, offset: f64) -> Result<(TriMesh, usize)> {
    if let Some(e) = edge_incidence(mesh).into_iter().find(|e| e.faces.len() > 2) {
        return Err(Error::InvalidMesh(format!(
            "edge ({}, {}) has {} faces; repair non-manifold edges first",
            e.a,
            e.b,
            e.faces.len()
        )));
    }
    let splits = nonmanifold_vertex_fans(mesh);
    if splits.is_empty() {
        return Ok((mesh.clone(), 0));
    }
    Ok(split_fans(mesh, &splits, offset))
}

fn nonmanifold_vertex_fans(mesh: &TriMesh) -> Vec<(usize, Vec<Vec<usize>>)> {
    let incident = vertex_faces(mesh);
    let always = |_: usize, _: usize| true;
    (0..mesh.vertices.len())
        .filter(|&v| incident[v].len() > 1)
        .map(|v| (v, fans_around(mesh, v, &incident[v], &always)))
        .filter(|(_, fans)| fans.len() > 1)
        .collect()
}

/// Vertices whose incident faces do not form a single fan.
pub fn nonmanifold_vertices(mesh: &TriMesh) -> Vec<usize> {
    nonmanifold_vertex_fans(mesh)
        .into_iter()
        .map(|(v, _)| v)
        .collect()
}
