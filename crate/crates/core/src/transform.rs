//! Similarity transforms `x ↦ s·R·x + t`.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::sampling::PointCloud;

/// Rotation, isotropic scale and translation (mm).
///
/// Serialises as `{"rotation": [9 numbers, row-major], "scale": s,
/// "translation": [tx, ty, tz]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformJson", into = "TransformJson")]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformJson {
    rotation: [f64; 9],
    scale: f64,
    translation: [f64; 3],
}

impl From<RigidTransform> for TransformJson {
    fn from(t: RigidTransform) -> Self {
        let r = t.rotation;
        TransformJson {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            scale: t.scale,
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TryFrom<TransformJson> for RigidTransform {
    type Error = Error;
    fn try_from(j: TransformJson) -> Result<Self> {
        let t = RigidTransform {
            rotation: Matrix3::from_row_slice(&j.rotation),
            scale: j.scale,
            translation: Vector3::from(j.translation),
        };
        t.validate()?;
        Ok(t)
    }
}

/// Tolerance on orthonormality and `det R = 1`.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            scale: 1.0,
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, scale: f64, translation: Vector3<f64>) -> Result<Self> {
        let t = RigidTransform {
            rotation,
            scale,
            translation,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.rotation;
        let finite = r
            .iter()
            .chain(self.translation.iter())
            .all(|x| x.is_finite());
        if !finite || !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParams(
                "transform needs finite entries and a positive scale".into(),
            ));
        }
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        let det = r.determinant();
        if ortho > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidParams(format!(
                "rotation is not proper orthonormal (|RᵀR−I|={ortho:e}, det={det})"
            )));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == Matrix3::identity()
            && self.scale == 1.0
            && self.translation == Vector3::zeros()
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            scale: 1.0 / self.scale,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            scale: self.scale * other.scale,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }
}

/// Geometry that a similarity transform can act on.
pub trait Transformable: Sized + Clone {
    fn map_points(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self;
}

impl Transformable for TriMesh {
    fn map_points(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            origins: self.origins.clone(),
        }
    }
}

impl Transformable for PointCloud {
    fn map_points(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.position = f(&s.position);
        }
        out
    }
}

impl Transformable for Vec<Point3<f64>> {
    fn map_points(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        self.iter().map(f).collect()
    }
}

/// Maps every point `x ↦ s·R·x + t`; connectivity and sample provenance
/// are untouched. The identity returns an exact copy.
pub fn apply_rigid<G: Transformable>(geometry: &G, transform: &RigidTransform) -> G {
    if transform.is_identity() {
        return geometry.clone();
    }
    geometry.map_points(|p| transform.apply(p))
}
