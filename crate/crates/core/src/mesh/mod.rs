//! Indexed triangle meshes and the queries every other module builds on.
//!
//! A [`TriMesh`] is a plain indexed face set in millimetres. Adjacency is
//! never stored on the mesh; the functions in [`topology`] derive it on
//! demand so that repair passes can rewrite faces freely.

pub mod geometry;
pub mod io;
pub mod spatial;
pub mod topology;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
pub use geometry::Aabb;

/// Triangle surface: vertex positions plus vertex-index triples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    /// Index each vertex had in the mesh handed to the first repair pass.
    /// `None` until a repair operation assigns it.
    pub origins: Option<Vec<usize>>,
}

impl TriMesh {
    /// Builds a mesh after checking indices and coordinates.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = TriMesh {
            vertices,
            faces,
            origins: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((i, v)) = self
            .vertices
            .iter()
            .enumerate()
            .find(|(_, v)| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidMesh(format!(
                "vertex {i} has a non-finite coordinate {v:?}"
            )));
        }
        let n = self.vertices.len();
        if let Some((i, f)) = self
            .faces
            .iter()
            .enumerate()
            .find(|(_, f)| f.iter().any(|&k| k >= n))
        {
            return Err(Error::InvalidMesh(format!(
                "face {i} {f:?} references a vertex outside 0..{n}"
            )));
        }
        if let Some(origins) = &self.origins {
            if origins.len() != n {
                return Err(Error::InvalidMesh(format!(
                    "{} provenance tags for {n} vertices",
                    origins.len()
                )));
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn corners(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Non-normalised face normal, `(b - a) x (c - a)`; its length is twice the area.
    pub fn face_cross(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.corners(face);
        geometry::triangle_area(&a, &b, &c)
    }

    pub fn total_surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Bounding box of all vertices, referenced or not.
    pub fn bounding_box(&self) -> Option<Aabb> {
        Aabb::from_points(self.vertices.iter())
    }

    pub fn bounding_diagonal(&self) -> f64 {
        self.bounding_box().map_or(0.0, |b| b.diagonal())
    }

    /// Provenance tags, defaulting to the identity when none were recorded.
    pub fn origins_or_identity(&self) -> Vec<usize> {
        self.origins
            .clone()
            .unwrap_or_else(|| (0..self.vertices.len()).collect())
    }
}

/// Sum of triangle areas in mm².
pub fn total_surface_area(mesh: &TriMesh) -> f64 {
    mesh.total_surface_area()
}
