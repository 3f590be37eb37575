//! Laplacian smoothing constrained to the original surface.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::spatial::{SegmentSet, SpatialIndex};
use crate::mesh::topology::{boundary_neighbors, edge_incidence, vertex_neighbors};
use crate::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// Boundary vertices slide along the original boundary polyline.
    #[default]
    SmoothAlongBoundary,
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingParams {
    pub iterations: usize,
    /// Largest distance (mm) from the neighbour mean to the original surface
    /// for a move to be accepted.
    pub projection_tolerance: f64,
    pub boundary_mode: BoundaryMode,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        SmoothingParams {
            iterations: 3,
            projection_tolerance: 0.05,
            boundary_mode: BoundaryMode::default(),
        }
    }
}

impl SmoothingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.projection_tolerance > 0.0) {
            return Err(Error::InvalidParams(format!(
                "projection_tolerance must be > 0, got {}",
                self.projection_tolerance
            )));
        }
        Ok(())
    }
}

fn boundary_polyline(mesh: &TriMesh) -> SegmentSet {
    SegmentSet::new(
        edge_incidence(mesh)
            .into_iter()
            .filter(|e| e.faces.len() == 1)
            .map(|e| (mesh.vertices[e.a], mesh.vertices[e.b]))
            .collect(),
    )
}

fn mean(points: &[Point3<f64>], ids: &[usize]) -> Point3<f64> {
    let sum: Vector3<f64> = ids.iter().map(|&i| points[i].coords).sum();
    Point3::from(sum / ids.len() as f64)
}

/// Moves every vertex to the mean of its neighbours, projected onto
/// `original`, whenever that mean lies within the projection tolerance of
/// the original surface. All vertices of one iteration read the previous
/// iteration's positions.
pub fn laplacian_smooth_preserving(
    mesh: &TriMesh,
    original: &SpatialIndex,
    params: &SmoothingParams,
) -> Result<TriMesh> {
    params.validate()?;
    mesh.validate()?;
    if original.mesh().faces.is_empty() {
        return Err(Error::EmptyInput("original surface has no faces"));
    }
    let tol = params.projection_tolerance;
    let neighbors = vertex_neighbors(mesh);
    let rim = boundary_neighbors(mesh);
    let polyline = boundary_polyline(original.mesh());
    let mut current = mesh.vertices.clone();
    for _ in 0..params.iterations {
        let next: Vec<Point3<f64>> = (0..current.len())
            .into_par_iter()
            .map(|v| -> Result<Point3<f64>> {
                let keep = current[v];
                if !rim[v].is_empty() {
                    if params.boundary_mode == BoundaryMode::Frozen
                        || rim[v].len() != 2
                        || polyline.is_empty()
                    {
                        return Ok(keep);
                    }
                    let candidate = mean(&current, &rim[v]);
                    let (q, d) = polyline
                        .closest_point(&candidate)
                        .expect("non-empty polyline");
                    return Ok(if d <= tol { q } else { keep });
                }
                if neighbors[v].is_empty() {
                    return Ok(keep);
                }
                let candidate = mean(&current, &neighbors[v]);
                let hit = original.closest_point(&candidate)?;
                Ok(if hit.distance <= tol { hit.point } else { keep })
            })
            .collect::<Result<_>>()?;
        current = next;
    }
    Ok(TriMesh {
        vertices: current,
        faces: mesh.faces.clone(),
        origins: mesh.origins.clone(),
    })
}

/// Convenience wrapper that smooths `mesh` against itself.
pub fn smooth_in_place(mesh: &TriMesh, params: &SmoothingParams) -> Result<TriMesh> {
    let index = SpatialIndex::new(mesh);
    laplacian_smooth_preserving(mesh, &index, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::grid;

    #[test]
    fn plane_is_a_fixed_point() {
        let g = grid(12, 9, 1.0, -3.0, 2.0, 1.5);
        let out = smooth_in_place(&g, &SmoothingParams::default()).unwrap();
        assert_eq!(out.faces, g.faces);
        for (a, b) in g.vertices.iter().zip(&out.vertices) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn frozen_boundary_stays_put() {
        let mut g = grid(6, 6, 1.0, 0.0, 0.0, 0.0);
        g.vertices[7].z = 0.02;
        let p = SmoothingParams {
            boundary_mode: BoundaryMode::Frozen,
            ..Default::default()
        };
        let out = smooth_in_place(&g, &p).unwrap();
        let rim = boundary_neighbors(&g);
        for v in 0..g.vertices.len() {
            if !rim[v].is_empty() {
                assert_eq!(out.vertices[v], g.vertices[v]);
            }
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let g = grid(2, 2, 1.0, 0.0, 0.0, 0.0);
        let p = SmoothingParams {
            projection_tolerance: 0.0,
            ..Default::default()
        };
        assert!(smooth_in_place(&g, &p).is_err());
    }
}
