use std::collections::HashMap;

use nalgebra::Point3;

use super::tables::{CORNERS, EDGES, TRI_TABLE};
use super::LabelVolume;
use crate::mesh::TriMesh;

/// Isosurface of the indicator `voxel == label` at level 0.5.
pub fn marching_cubes(volume: &LabelVolume, label: u8) -> TriMesh {
    marching_cubes_iso(volume, label, 0.5)
}

/// Marching cubes over the binary indicator of `label`.
///
/// Cells span neighbouring voxel centres. The grid is padded by one layer
/// of zeros on every side, so regions touching the border are still closed.
/// Vertices on a shared cell edge are shared, and faces wind
/// counter-clockwise seen from outside the region.
pub fn marching_cubes_iso(volume: &LabelVolume, label: u8, iso: f64) -> TriMesh {
    let [nx, ny, nz] = volume.dims;
    let value = |i: isize, j: isize, k: isize| -> f64 {
        if i < 0 || j < 0 || k < 0 || i >= nx as isize || j >= ny as isize || k >= nz as isize {
            0.0
        } else if volume.get(i as usize, j as usize, k as usize) == label {
            1.0
        } else {
            0.0
        }
    };
    let position = |i: f64, j: f64, k: f64| {
        Point3::new(
            volume.origin[0] + i * volume.spacing[0],
            volume.origin[1] + j * volume.spacing[1],
            volume.origin[2] + k * volume.spacing[2],
        )
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    // Grid edge key: lower corner (in padded coordinates) and axis.
    let mut edge_vertex: HashMap<([isize; 3], usize), usize> = HashMap::new();
    if !volume.data.contains(&label) {
        return TriMesh::empty();
    }
    for k in -1..nz as isize {
        for j in -1..ny as isize {
            for i in -1..nx as isize {
                let base = [i, j, k];
                let mut vals = [0.0; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    vals[c] = value(
                        i + off[0] as isize,
                        j + off[1] as isize,
                        k + off[2] as isize,
                    );
                    if vals[c] < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRI_TABLE[case];
                let mut t = 0;
                while t < 15 && row[t] >= 0 {
                    let mut tri = [0usize; 3];
                    for (slot, &e) in row[t..t + 3].iter().enumerate() {
                        let (c0, c1) = EDGES[e as usize];
                        let (o0, o1) = (CORNERS[c0], CORNERS[c1]);
                        let axis = (0..3)
                            .find(|&a| o0[a] != o1[a])
                            .expect("edge along one axis");
                        let lo = if o0[axis] < o1[axis] { o0 } else { o1 };
                        let key = ([0, 1, 2].map(|a| base[a] + lo[a] as isize), axis);
                        tri[slot] = *edge_vertex.entry(key).or_insert_with(|| {
                            let (v0, v1) = (vals[c0], vals[c1]);
                            let s = if v1 != v0 {
                                (iso - v0) / (v1 - v0)
                            } else {
                                0.5
                            };
                            let p = [0, 1, 2].map(|a| {
                                base[a] as f64 + o0[a] as f64 + s * (o1[a] as f64 - o0[a] as f64)
                            });
                            vertices.push(position(p[0], p[1], p[2]));
                            vertices.len() - 1
                        });
                    }
                    faces.push(tri);
                    t += 3;
                }
            }
        }
    }
    TriMesh {
        vertices,
        faces,
        origins: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::topology::{boundary_loops, edge_incidence, max_faces_per_edge};

    fn signed_volume(m: &TriMesh) -> f64 {
        m.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| m.vertices[i].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    #[test]
    fn empty_region_gives_empty_mesh() {
        let v = LabelVolume::zeros([4, 4, 4], [1.0; 3], [0.0; 3]).unwrap();
        assert_eq!(marching_cubes(&v, 1).face_count(), 0);
    }

    #[test]
    fn single_voxel_is_closed_octahedron() {
        let mut v = LabelVolume::zeros([3, 3, 3], [1.0; 3], [0.0; 3]).unwrap();
        v.set(1, 1, 1, 1);
        let m = marching_cubes(&v, 1);
        let e = edge_incidence(&m).len();
        assert_eq!(
            m.vertex_count() as i64 - e as i64 + m.face_count() as i64,
            2
        );
        assert!(boundary_loops(&m).unwrap().is_empty());
        assert!(signed_volume(&m) > 0.0);
    }

    #[test]
    fn border_region_is_closed_and_outward() {
        let v = LabelVolume::from_fn([4, 3, 2], [0.5, 1.0, 2.0], [1.0, 1.0, 1.0], |i, _, _| {
            (i < 2) as u8
        })
        .unwrap();
        let m = marching_cubes(&v, 1);
        assert_eq!(max_faces_per_edge(&m), 2);
        assert!(boundary_loops(&m).unwrap().is_empty());
        assert!(signed_volume(&m) > 0.0);
    }
}
