//! Procedural meshes used as fixtures, in examples and by the sphere quadrature.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::mesh::TriMesh;

/// Outward-oriented unit icosahedron vertices (before scaling) and faces.
fn icosahedron() -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let vertices = raw
        .iter()
        .map(|&(x, y, z)| Point3::from(Vector3::new(x, y, z).normalize()))
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces)
}

/// Geodesic sphere: an icosahedron whose faces are split in four
/// `subdivisions` times, with every vertex pushed onto the sphere.
/// Level `k` has `10 * 4^k + 2` vertices.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let (mut vertices, mut faces) = icosahedron();
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = (vertices[a].coords + vertices[b].coords).normalize();
                    vertices.push(Point3::from(m));
                    vertices.len() - 1
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v = Point3::from(v.coords * radius);
    }
    TriMesh {
        vertices,
        faces,
        origins: None,
    }
}

/// Closed axis-aligned box with outward normals, 8 vertices and 12 faces.
pub fn cuboid(min: Point3<f64>, max: Point3<f64>) -> TriMesh {
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriMesh {
        vertices,
        faces,
        origins: None,
    }
}

/// Flat grid of `nx * ny` quads in the plane `z`, each split along the
/// same diagonal, spanning `[x0, x0 + nx*h] x [y0, y0 + ny*h]`.
pub fn grid(nx: usize, ny: usize, h: f64, x0: f64, y0: f64, z: f64) -> TriMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point3::new(x0 + i as f64 * h, y0 + j as f64 * h, z));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh {
        vertices,
        faces,
        origins: None,
    }
}

/// Appends `other` to `mesh`, offsetting its face indices.
pub fn append(mesh: &mut TriMesh, other: &TriMesh) {
    let base = mesh.vertices.len();
    mesh.vertices.extend_from_slice(&other.vertices);
    mesh.faces.extend(
        other
            .faces
            .iter()
            .map(|f| [f[0] + base, f[1] + base, f[2] + base]),
    );
    mesh.origins = None;
}
