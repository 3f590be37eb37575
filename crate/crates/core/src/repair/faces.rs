//! Face-level repairs: duplicates, zero-area faces, folds and floaters.

use std::collections::HashSet;

use nalgebra::Vector3;

use crate::mesh::topology::{connected_components, edge_incidence};
use crate::mesh::TriMesh;

/// Faces of area at or below this are treated as null.
pub const NULL_AREA_EPSILON: f64 = 1e-12;

pub(crate) fn with_faces(mesh: &TriMesh, faces: Vec<[usize; 3]>) -> TriMesh {
    TriMesh {
        vertices: mesh.vertices.clone(),
        faces,
        origins: mesh.origins.clone(),
    }
}

fn retain_faces(mesh: &TriMesh, keep: impl Fn(usize) -> bool) -> (TriMesh, usize) {
    let faces: Vec<[usize; 3]> = (0..mesh.faces.len())
        .filter(|&f| keep(f))
        .map(|f| mesh.faces[f])
        .collect();
    let removed = mesh.faces.len() - faces.len();
    if removed == 0 {
        return (mesh.clone(), 0);
    }
    (with_faces(mesh, faces), removed)
}

fn sorted(f: &[usize; 3]) -> [usize; 3] {
    let mut k = *f;
    k.sort_unstable();
    k
}

/// Keeps the first of any faces built on the same vertex set, whatever the
/// corner order.
pub fn remove_duplicate_faces(mesh: &TriMesh) -> (TriMesh, usize) {
    let mut seen = HashSet::with_capacity(mesh.faces.len());
    let keep: Vec<bool> = mesh.faces.iter().map(|f| seen.insert(sorted(f))).collect();
    retain_faces(mesh, |f| keep[f])
}

pub fn remove_null_faces(mesh: &TriMesh) -> (TriMesh, usize) {
    remove_null_faces_with(mesh, NULL_AREA_EPSILON)
}

/// Removes faces whose area does not exceed `area_epsilon` (mm²).
pub fn remove_null_faces_with(mesh: &TriMesh, area_epsilon: f64) -> (TriMesh, usize) {
    retain_faces(mesh, |f| mesh.face_area(f) > area_epsilon)
}

/// Removes every connected component whose bounding diagonal is below `diameter`.
pub fn remove_floating_faces(mesh: &TriMesh, diameter: f64) -> (TriMesh, usize) {
    let mut keep = vec![true; mesh.faces.len()];
    for comp in connected_components(mesh) {
        if comp.diameter < diameter {
            for f in comp.faces {
                keep[f] = false;
            }
        }
    }
    retain_faces(mesh, |f| keep[f])
}

fn unit_normal(mesh: &TriMesh, faces: &[[usize; 3]], f: usize) -> Vector3<f64> {
    let [a, b, c] = faces[f].map(|v| mesh.vertices[v]);
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        Vector3::zeros()
    }
}

/// Faces sharing an edge with each face.
fn face_adjacency(mesh: &TriMesh, faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let tmp = with_faces(mesh, faces.to_vec());
    let mut adj = vec![Vec::new(); faces.len()];
    for e in edge_incidence(&tmp) {
        for &f in &e.faces {
            for &g in &e.faces {
                if f != g && !adj[f].contains(&g) {
                    adj[f].push(g);
                }
            }
        }
    }
    adj
}

/// Faces with at least one edge neighbour whose normal points against every
/// edge neighbour's normal.
pub fn folded_faces(mesh: &TriMesh) -> Vec<usize> {
    folded_in(mesh, &mesh.faces)
}

fn folded_in(mesh: &TriMesh, faces: &[[usize; 3]]) -> Vec<usize> {
    let adj = face_adjacency(mesh, faces);
    let normals: Vec<Vector3<f64>> = (0..faces.len())
        .map(|f| unit_normal(mesh, faces, f))
        .collect();
    (0..faces.len())
        .filter(|&f| {
            !adj[f].is_empty() && adj[f].iter().all(|&g| normals[f].dot(&normals[g]) < 0.0)
        })
        .collect()
}

/// Barycentric coordinates of the projection of `p` onto the plane of `tri`.
fn barycentric(p: &nalgebra::Point3<f64>, tri: [nalgebra::Point3<f64>; 3]) -> Option<[f64; 3]> {
    let [a, b, c] = tri;
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    if denom <= 0.0 {
        return None;
    }
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    Some([1.0 - v - w, v, w])
}

const FLIP_PASSES: usize = 8;

/// Repairs faces folded back over a neighbour.
///
/// A folded face `g` is flipped against the neighbour `f` across edge `e`
/// when the corner of `g` opposite `e` projects inside `f`: the pair is
/// replaced by the two triangles that split `f` at that corner, oriented
/// like `f`. Folded faces with no such neighbour, or still folded after the
/// flip passes, have their winding reversed. Face count never changes.
pub fn remove_folded_faces(mesh: &TriMesh) -> (TriMesh, usize) {
    let mut faces = mesh.faces.clone();
    let mut count = 0;
    let mut pass = 0;
    loop {
        let folded = folded_in(mesh, &faces);
        if folded.is_empty() {
            break;
        }
        let tmp = with_faces(mesh, faces.clone());
        let edges = edge_incidence(&tmp);
        let mut edge_set: HashSet<(usize, usize)> = edges.iter().map(|e| (e.a, e.b)).collect();
        let adj = face_adjacency(mesh, &faces);
        let mut touched = vec![false; faces.len()];
        let mut flips = 0;
        if pass < FLIP_PASSES {
            for &g in &folded {
                if !touched[g] && try_flip(mesh, &mut faces, g, &edges, &mut edge_set, &mut touched)
                {
                    flips += 1;
                }
            }
        }
        if flips == 0 {
            for &g in &folded {
                if touched[g] || adj[g].iter().any(|&h| touched[h]) {
                    continue;
                }
                faces[g].swap(1, 2);
                touched[g] = true;
                count += 1;
            }
        }
        count += flips;
        pass += 1;
    }
    if count == 0 {
        return (mesh.clone(), 0);
    }
    (with_faces(mesh, faces), count)
}

fn try_flip(
    mesh: &TriMesh,
    faces: &mut [[usize; 3]],
    g: usize,
    edges: &[crate::mesh::topology::EdgeUse],
    edge_set: &mut HashSet<(usize, usize)>,
    touched: &mut [bool],
) -> bool {
    let gf = faces[g];
    for k in 0..3 {
        let (u, v) = (gf[k], gf[(k + 1) % 3]);
        let c = gf[(k + 2) % 3];
        let key = (u.min(v), u.max(v));
        let Ok(pos) = edges.binary_search_by(|e| (e.a, e.b).cmp(&key)) else {
            continue;
        };
        let users = &edges[pos].faces;
        if users.len() != 2 {
            continue;
        }
        let f = if users[0] == g { users[1] } else { users[0] };
        if touched[f] {
            continue;
        }
        let ff = faces[f];
        // Rotate f so that the shared edge is (ff[j], ff[j+1]).
        let Some(j) = (0..3).find(|&j| {
            let (p, q) = (ff[j], ff[(j + 1) % 3]);
            (p == u && q == v) || (p == v && q == u)
        }) else {
            continue;
        };
        let (p, q, d) = (ff[j], ff[(j + 1) % 3], ff[(j + 2) % 3]);
        if d == c {
            continue;
        }
        let Some(bary) = barycentric(&mesh.vertices[c], [p, q, d].map(|i| mesh.vertices[i])) else {
            continue;
        };
        if bary.iter().any(|&b| b <= 0.0) {
            continue;
        }
        let new_edge = (c.min(d), c.max(d));
        if edge_set.contains(&new_edge) {
            continue;
        }
        edge_set.insert(new_edge);
        faces[f] = [p, c, d];
        faces[g] = [c, q, d];
        touched[f] = true;
        touched[g] = true;
        return true;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn pts(v: &[[f64; 3]]) -> Vec<Point3<f64>> {
        v.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()
    }

    #[test]
    fn duplicate_faces_regardless_of_order() {
        let v = pts(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        for dup in [[2, 0, 1], [0, 2, 1]] {
            let m = TriMesh::new(v.clone(), vec![[0, 1, 2], dup]).unwrap();
            let (out, n) = remove_duplicate_faces(&m);
            assert_eq!(n, 1);
            assert_eq!(out.faces, vec![[0, 1, 2]]);
        }
    }

    #[test]
    fn null_faces() {
        let v = pts(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [2.0, 0.0, 0.0],
        ]);
        let m = TriMesh::new(v, vec![[0, 1, 2], [0, 0, 2], [0, 1, 3]]).unwrap();
        let (out, n) = remove_null_faces(&m);
        assert_eq!(n, 2);
        assert_eq!(out.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn floating_triangle_removed() {
        let mut m = crate::shapes::icosphere(5.0, 2);
        let base = m.vertices.len();
        m.vertices.extend(pts(&[
            [50.0, 0.0, 0.0],
            [50.05, 0.0, 0.0],
            [50.0, 0.05, 0.0],
        ]));
        m.faces.push([base, base + 1, base + 2]);
        let (out, n) = remove_floating_faces(&m, 1.0);
        assert_eq!(n, 1);
        assert_eq!(out.faces.len(), m.faces.len() - 1);
        assert_eq!(remove_floating_faces(&m, 0.0).1, 0);
    }

    #[test]
    fn folded_quad_is_flipped_flat() {
        // f = (a, b, d) lies in z = 0; g shares edge ab and folds back over f.
        let v = pts(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.25, 0.25, 0.01],
        ]);
        let m = TriMesh::new(v, vec![[0, 1, 2], [1, 0, 3]]).unwrap();
        assert_eq!(folded_faces(&m).len(), 2);
        let (out, n) = remove_folded_faces(&m);
        assert!(n >= 1);
        assert!(folded_faces(&out).is_empty());
        assert_eq!(out.faces.len(), 2);
        for f in 0..2 {
            assert!(
                out.face_cross(f).z > 0.0,
                "face {f} not oriented like the base"
            );
        }
        // The flip splits f at the folded corner: triangles (a, c, d) and
        // (c, b, d) of areas 0.125 and 0.25 (up to the 0.01 lift).
        let area: f64 = (0..2).map(|f| out.face_area(f)).sum();
        assert!((area - 0.375).abs() < 1e-3);
    }

    #[test]
    fn reversed_face_reoriented_when_no_flip_applies() {
        let v = pts(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ]);
        let m = TriMesh::new(v, vec![[0, 1, 2], [1, 2, 3]]).unwrap();
        let (out, n) = remove_folded_faces(&m);
        assert_eq!(n, 1);
        assert!(folded_faces(&out).is_empty());
    }

    #[test]
    fn convex_mesh_has_no_folds() {
        let s = crate::shapes::icosphere(1.0, 2);
        assert_eq!(remove_folded_faces(&s).1, 0);
    }
}
