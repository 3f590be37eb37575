//! Mesh repair filters and the ordered orchestrator [`repair_all`].
//!
//! Every operation takes a mesh by reference and returns the repaired mesh
//! together with the number of elements it removed, merged or split.

mod faces;
mod manifold;
mod tvertex;
mod vertices;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::topology::{boundary_loops, connected_components};
use crate::mesh::TriMesh;

pub use faces::{
    folded_faces, remove_duplicate_faces, remove_floating_faces, remove_folded_faces,
    remove_null_faces, remove_null_faces_with, NULL_AREA_EPSILON,
};
pub use manifold::{
    nonmanifold_vertices, repair_nonmanifold_edges, repair_nonmanifold_edges_with,
    repair_nonmanifold_vertices, repair_nonmanifold_vertices_with, NonManifoldEdgeStrategy,
    DEFAULT_SPLIT_OFFSET,
};
pub use tvertex::{
    find_t_vertices, min_angle, remove_t_vertices, TVertex, TVertexMode, COLLINEAR_TOLERANCE,
    EDGE_PARAM_MARGIN,
};
pub use vertices::{merge_close_vertices, remove_duplicate_vertices, remove_unreferenced_vertices};

/// Relative share of the bounding-box diagonal used when no floating-face
/// diameter is given.
pub const DEFAULT_FLOATING_FRACTION: f64 = 0.05;

const MAX_PASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepairParams {
    pub merge_epsilon: f64,
    /// `None` means 5% of the input bounding-box diagonal.
    pub floating_diameter: Option<f64>,
    pub nonmanifold_edge_strategy: NonManifoldEdgeStrategy,
    pub t_vertex_mode: TVertexMode,
    /// Displacement applied to split vertex copies. `None` picks
    /// `max(DEFAULT_SPLIT_OFFSET, 4 * merge_epsilon)` so that copies survive
    /// the next merge pass.
    pub split_offset: Option<f64>,
}

impl Default for RepairParams {
    fn default() -> Self {
        RepairParams {
            merge_epsilon: 1e-4,
            floating_diameter: None,
            nonmanifold_edge_strategy: NonManifoldEdgeStrategy::default(),
            t_vertex_mode: TVertexMode::default(),
            split_offset: None,
        }
    }
}

impl RepairParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.merge_epsilon >= 0.0 && self.merge_epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "merge_epsilon must be a finite value >= 0, got {}",
                self.merge_epsilon
            )));
        }
        if let Some(d) = self.floating_diameter {
            if !(d >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "floating_diameter must be >= 0, got {d}"
                )));
            }
        }
        if let Some(o) = self.split_offset {
            if !(o >= 0.0 && o.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "split_offset must be >= 0, got {o}"
                )));
            }
        }
        Ok(())
    }

    pub fn effective_split_offset(&self) -> f64 {
        self.split_offset
            .unwrap_or_else(|| DEFAULT_SPLIT_OFFSET.max(4.0 * self.merge_epsilon))
    }

    pub fn effective_floating_diameter(&self, mesh: &TriMesh) -> f64 {
        self.floating_diameter
            .unwrap_or_else(|| DEFAULT_FLOATING_FRACTION * mesh.bounding_diagonal())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub vertices: usize,
    pub faces: usize,
    pub components: usize,
    /// `None` when some edge has more than two faces.
    pub boundary_loops: Option<usize>,
}

impl MeshSummary {
    pub fn of(mesh: &TriMesh) -> Self {
        MeshSummary {
            vertices: mesh.vertex_count(),
            faces: mesh.face_count(),
            components: connected_components(mesh).len(),
            boundary_loops: boundary_loops(mesh).ok().map(|l| l.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationCount {
    pub operation: String,
    pub removed: usize,
    /// What `removed` counts: "vertices", "faces" or "split".
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    pub operations: Vec<OperationCount>,
    /// Passes over the full sequence, including the final unchanged pass.
    pub passes: usize,
    pub before: MeshSummary,
    pub after: MeshSummary,
}

impl RepairReport {
    pub fn count(&self, operation: &str) -> Option<usize> {
        self.operations
            .iter()
            .find(|o| o.operation == operation)
            .map(|o| o.removed)
    }

    pub fn total(&self) -> usize {
        self.operations.iter().map(|o| o.removed).sum()
    }
}

/// Names of the repair steps in application order.
pub const OPERATIONS: [(&str, &str); 11] = [
    ("remove_duplicate_vertices", "vertices"),
    ("merge_close_vertices", "vertices"),
    ("merge_wedge_texcoords", "wedges"),
    ("remove_duplicate_faces", "faces"),
    ("remove_null_faces", "faces"),
    ("remove_folded_faces", "faces"),
    ("remove_floating_faces", "faces"),
    ("remove_t_vertices", "vertices"),
    ("repair_nonmanifold_edges", "faces"),
    ("repair_nonmanifold_vertices", "split"),
    ("remove_unreferenced_vertices", "vertices"),
];

fn one_pass(
    mesh: TriMesh,
    params: &RepairParams,
    diameter: f64,
    counts: &mut [usize],
) -> Result<TriMesh> {
    let offset = params.effective_split_offset();
    let mut m = mesh;
    macro_rules! step {
        ($i:expr, $e:expr) => {{
            let (next, n) = $e;
            counts[$i] += n;
            m = next;
        }};
    }
    step!(0, remove_duplicate_vertices(&m));
    step!(1, merge_close_vertices(&m, params.merge_epsilon));
    // Slot 2: per-wedge texture coordinates; meshes here carry none.
    step!(3, remove_duplicate_faces(&m));
    step!(4, remove_null_faces(&m));
    step!(5, remove_folded_faces(&m));
    step!(6, remove_floating_faces(&m, diameter));
    step!(7, remove_t_vertices(&m, params.t_vertex_mode));
    let strategy = params.nonmanifold_edge_strategy;
    step!(8, repair_nonmanifold_edges_with(&m, strategy, offset));
    step!(9, repair_nonmanifold_vertices_with(&m, offset)?);
    step!(10, remove_unreferenced_vertices(&m));
    Ok(m)
}

/// Applies the full repair sequence repeatedly until a pass changes nothing.
pub fn repair_all(mesh: &TriMesh, params: &RepairParams) -> Result<(TriMesh, RepairReport)> {
    params.validate()?;
    mesh.validate()?;
    let before = MeshSummary::of(mesh);
    let diameter = params.effective_floating_diameter(mesh);
    let mut counts = vec![0usize; OPERATIONS.len()];
    let mut m = mesh.clone();
    if m.origins.is_none() {
        m.origins = Some(m.origins_or_identity());
    }
    let mut passes = 0;
    while passes < MAX_PASSES {
        passes += 1;
        let mut pass_counts = vec![0usize; OPERATIONS.len()];
        m = one_pass(m, params, diameter, &mut pass_counts)?;
        let changed = pass_counts.iter().any(|&c| c > 0);
        for (c, p) in counts.iter_mut().zip(&pass_counts) {
            *c += p;
        }
        if !changed {
            break;
        }
        log::debug!("repair pass {passes}: {pass_counts:?}");
    }
    let operations = OPERATIONS
        .iter()
        .zip(&counts)
        .map(|(&(name, unit), &removed)| OperationCount {
            operation: name.to_string(),
            removed,
            unit: unit.to_string(),
        })
        .collect();
    let report = RepairReport {
        operations,
        passes,
        before,
        after: MeshSummary::of(&m),
    };
    Ok((m, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{append, icosphere};
    use nalgebra::Point3;

    #[test]
    fn clean_sphere_is_unchanged() {
        let s = icosphere(10.0, 2);
        let (out, report) = repair_all(&s, &RepairParams::default()).unwrap();
        assert_eq!(out.vertices, s.vertices);
        assert_eq!(out.faces, s.faces);
        assert_eq!(report.total(), 0);
        assert_eq!(report.passes, 1);
        assert_eq!(report.operations.len(), 11);
    }

    #[test]
    fn report_serializes_operation_array() {
        let s = icosphere(1.0, 1);
        let (_, report) = repair_all(&s, &RepairParams::default()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(
            json["operations"][0]["operation"],
            "remove_duplicate_vertices"
        );
        assert_eq!(json["after"]["boundary_loops"], 0);
    }

    #[test]
    fn floater_and_duplicates_removed() {
        let mut m = icosphere(10.0, 2);
        let lone = TriMesh::new(
            vec![
                Point3::new(30.0, 0.0, 0.0),
                Point3::new(30.1, 0.0, 0.0),
                Point3::new(30.0, 0.1, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        append(&mut m, &lone);
        m.faces.push(m.faces[3]);
        let (out, report) = repair_all(&m, &RepairParams::default()).unwrap();
        assert_eq!(report.count("remove_duplicate_faces"), Some(1));
        assert_eq!(report.count("remove_floating_faces"), Some(1));
        assert_eq!(report.count("remove_unreferenced_vertices"), Some(3));
        assert_eq!(out.face_count(), icosphere(10.0, 2).face_count());
        assert_eq!(report.after, MeshSummary::of(&out));
    }

    #[test]
    fn invalid_params_rejected() {
        let p = RepairParams {
            merge_epsilon: -1.0,
            ..Default::default()
        };
        assert!(matches!(
            repair_all(&icosphere(1.0, 0), &p),
            Err(Error::InvalidParams(_))
        ));
    }
}
