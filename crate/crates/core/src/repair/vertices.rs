//! Vertex-level repairs: welding, exact duplicates, unreferenced vertices.

use std::collections::HashMap;

use nalgebra::Point3;

use crate::mesh::topology::UnionFind;
use crate::mesh::TriMesh;

/// Applies a vertex partition: `cluster[v]` is the root (smallest index) of
/// `v`'s cluster. Survivors keep the order of their roots; each survivor is
/// placed at its cluster's centroid and inherits the smallest provenance tag.
pub(crate) fn collapse_clusters(mesh: &TriMesh, cluster: &[usize]) -> TriMesh {
    let n = mesh.vertices.len();
    let origins = mesh.origins_or_identity();
    let mut new_index = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        let root = cluster[v];
        if new_index[root] == usize::MAX {
            new_index[root] = members.len();
            members.push(Vec::new());
        }
        new_index[v] = new_index[root];
        members[new_index[root]].push(v);
    }
    let vertices = members
        .iter()
        .map(|m| {
            let first = mesh.vertices[m[0]];
            if m.iter().all(|&v| mesh.vertices[v] == first) {
                first
            } else {
                let sum = m.iter().fold(nalgebra::Vector3::zeros(), |acc, &v| {
                    acc + mesh.vertices[v].coords
                });
                Point3::from(sum / m.len() as f64)
            }
        })
        .collect();
    let new_origins = members
        .iter()
        .map(|m| {
            m.iter()
                .map(|&v| origins[v])
                .min()
                .expect("non-empty cluster")
        })
        .collect();
    TriMesh {
        vertices,
        faces: mesh
            .faces
            .iter()
            .map(|f| [new_index[f[0]], new_index[f[1]], new_index[f[2]]])
            .collect(),
        origins: Some(new_origins),
    }
}

fn cell_key(p: &Point3<f64>, cell: f64) -> [i64; 3] {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}

/// One round of union-find over pairs closer than `epsilon` (or coincident).
/// Returns `None` when no pair qualifies.
fn close_pairs_partition(mesh: &TriMesh, epsilon: f64) -> Option<Vec<usize>> {
    let n = mesh.vertices.len();
    let mut uf = UnionFind::new(n);
    let mut any = false;
    if epsilon == 0.0 {
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        for (i, p) in mesh.vertices.iter().enumerate() {
            match seen.entry(exact_key(p)) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    uf.union(*e.get(), i);
                    any = true;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(i);
                }
            }
        }
    } else {
        let scale = mesh
            .vertices
            .iter()
            .flat_map(|p| p.iter().map(|c| c.abs()))
            .fold(0.0f64, f64::max);
        let cell = epsilon.max(scale * 1e-12).max(f64::MIN_POSITIVE);
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in mesh.vertices.iter().enumerate() {
            grid.entry(cell_key(p, cell)).or_default().push(i);
        }
        for (i, p) in mesh.vertices.iter().enumerate() {
            let k = cell_key(p, cell);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let key = [k[0] + dx, k[1] + dy, k[2] + dz];
                        let Some(bucket) = grid.get(&key) else {
                            continue;
                        };
                        for &j in bucket {
                            if j <= i {
                                continue;
                            }
                            let d = (mesh.vertices[j] - p).norm();
                            if d < epsilon || d == 0.0 {
                                uf.union(i, j);
                                any = true;
                            }
                        }
                    }
                }
            }
        }
    }
    any.then(|| (0..n).map(|v| uf.find(v)).collect())
}

fn exact_key(p: &Point3<f64>) -> [u64; 3] {
    // +0.0 and -0.0 denote the same position.
    let bits = |c: f64| if c == 0.0 { 0u64 } else { c.to_bits() };
    [bits(p.x), bits(p.y), bits(p.z)]
}

/// Welds every group of vertices closer than `epsilon` into its centroid,
/// repeating until no two survivors are closer than `epsilon`. With
/// `epsilon == 0` only coincident vertices merge. Faces that become
/// degenerate are kept for [`remove_null_faces`](super::remove_null_faces).
pub fn merge_close_vertices(mesh: &TriMesh, epsilon: f64) -> (TriMesh, usize) {
    let start = mesh.vertices.len();
    let mut current = mesh.clone();
    while let Some(cluster) = close_pairs_partition(&current, epsilon.max(0.0)) {
        current = collapse_clusters(&current, &cluster);
    }
    let removed = start - current.vertices.len();
    if removed == 0 {
        return (mesh.clone(), 0);
    }
    (current, removed)
}

/// Merges vertices with bit-identical coordinates into the first occurrence.
pub fn remove_duplicate_vertices(mesh: &TriMesh) -> (TriMesh, usize) {
    let mut first: HashMap<[u64; 3], usize> = HashMap::new();
    let cluster: Vec<usize> = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, p)| *first.entry(exact_key(p)).or_insert(i))
        .collect();
    let removed = mesh.vertices.len() - first.len();
    if removed == 0 {
        return (mesh.clone(), 0);
    }
    (collapse_clusters(mesh, &cluster), removed)
}

/// Drops vertices no face references, reindexing faces.
pub fn remove_unreferenced_vertices(mesh: &TriMesh) -> (TriMesh, usize) {
    let mut used = vec![false; mesh.vertices.len()];
    for f in &mesh.faces {
        for &v in f {
            used[v] = true;
        }
    }
    let removed = used.iter().filter(|u| !**u).count();
    if removed == 0 {
        return (mesh.clone(), 0);
    }
    let origins = mesh.origins_or_identity();
    let mut map = vec![usize::MAX; mesh.vertices.len()];
    let mut vertices = Vec::with_capacity(mesh.vertices.len() - removed);
    let mut new_origins = Vec::with_capacity(vertices.capacity());
    for (v, &u) in used.iter().enumerate() {
        if u {
            map[v] = vertices.len();
            vertices.push(mesh.vertices[v]);
            new_origins.push(origins[v]);
        }
    }
    let faces = mesh
        .faces
        .iter()
        .map(|f| [map[f[0]], map[f[1]], map[f[2]]])
        .collect();
    (
        TriMesh {
            vertices,
            faces,
            origins: Some(new_origins),
        },
        removed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[[f64; 3]]) -> Vec<Point3<f64>> {
        v.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()
    }

    #[test]
    fn near_pair_merges() {
        let m = TriMesh::new(
            pts(&[[0.0, 0.0, 0.0], [1e-9, 0.0, 0.0], [1.0, 0.0, 0.0]]),
            vec![],
        )
        .unwrap();
        let (out, n) = merge_close_vertices(&m, 1e-6);
        assert_eq!(n, 1);
        assert_eq!(out.vertices.len(), 2);
        assert!((out.vertices[0].x - 0.5e-9).abs() < 1e-18);
    }

    #[test]
    fn zero_epsilon_only_merges_coincident() {
        let m = TriMesh::new(
            pts(&[
                [0.0, 0.0, 0.0],
                [1e-12, 0.0, 0.0],
                [0.0, 0.0, 0.0],
                [-0.0, 0.0, 0.0],
            ]),
            vec![],
        )
        .unwrap();
        let (out, n) = merge_close_vertices(&m, 0.0);
        assert_eq!(n, 2);
        assert_eq!(out.vertices.len(), 2);
    }

    #[test]
    fn faces_are_reindexed_after_merge() {
        let m = TriMesh::new(
            pts(&[
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
            ]),
            vec![[0, 1, 2], [3, 4, 2]],
        )
        .unwrap();
        let (out, n) = remove_duplicate_vertices(&m);
        assert_eq!(n, 1);
        assert_eq!(out.faces, vec![[0, 1, 2], [1, 3, 2]]);
        assert_eq!(out.origins, Some(vec![0, 1, 2, 4]));
    }

    #[test]
    fn clean_mesh_untouched() {
        let m = crate::shapes::icosphere(1.0, 1);
        let (out, n) = remove_duplicate_vertices(&m);
        assert_eq!(n, 0);
        assert_eq!(out, m);
    }

    #[test]
    fn stray_vertex_removed() {
        let m = TriMesh::new(
            pts(&[
                [0.0, 0.0, 0.0],
                [9.0, 9.0, 9.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
            ]),
            vec![[0, 2, 3]],
        )
        .unwrap();
        let (out, n) = remove_unreferenced_vertices(&m);
        assert_eq!(n, 1);
        assert_eq!(out.faces, vec![[0, 1, 2]]);
        for (f_old, f_new) in m.faces.iter().zip(&out.faces) {
            for k in 0..3 {
                assert_eq!(m.vertices[f_old[k]], out.vertices[f_new[k]]);
            }
        }
    }

    #[test]
    fn no_faces_removes_all_vertices() {
        let m = TriMesh::new(pts(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), vec![]).unwrap();
        let (out, n) = remove_unreferenced_vertices(&m);
        assert_eq!(n, 2);
        assert!(out.vertices.is_empty());
    }
}
