//! Direction sets on the unit sphere.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shapes::icosphere;

pub const DEFAULT_LEVEL: u32 = 3;
pub const MAX_LEVEL: u32 = 7;

/// Vertices of a subdivided icosahedron, each weighted by a third of the
/// spherical area of its incident triangles. `level` subdivisions give
/// `10·4^level + 2` directions and weights summing to 4π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub level: u32,
    pub directions: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
}

/// Area of the spherical triangle spanned by three unit vectors.
fn spherical_area(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let num = a.dot(&b.cross(c)).abs();
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

impl SphereQuadrature {
    pub fn new(level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::InvalidParams(format!(
                "quadrature level {level} exceeds the maximum of {MAX_LEVEL}"
            )));
        }
        let mesh = icosphere(1.0, level);
        let directions: Vec<Vector3<f64>> = mesh.vertices.iter().map(|p| p.coords).collect();
        let mut weights = vec![0.0; directions.len()];
        for f in &mesh.faces {
            let area = spherical_area(&directions[f[0]], &directions[f[1]], &directions[f[2]]);
            for &v in f {
                weights[v] += area / 3.0;
            }
        }
        Ok(SphereQuadrature {
            level,
            directions,
            weights,
        })
    }

    /// Quadrature for "order" `n = 2^level` subdivisions per icosahedron edge.
    pub fn with_order(order: u32) -> Result<Self> {
        if order == 0 || !order.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "quadrature order must be a power of two, got {order}"
            )));
        }
        Self::new(order.trailing_zeros())
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// `Σ wᵢ f(Mᵢ)`, summed in direction order.
    pub fn integrate(&self, f: impl Fn(&Vector3<f64>) -> f64) -> f64 {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * f(m))
            .sum()
    }
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self::new(DEFAULT_LEVEL).expect("default level is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn weights_sum_to_sphere_area() {
        for level in 0..=4 {
            let q = SphereQuadrature::new(level).unwrap();
            assert_eq!(q.len(), 10 * 4usize.pow(level) + 2);
            assert!(q.weights.iter().all(|&w| w > 0.0));
            assert!((q.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-10);
        }
        assert_eq!(SphereQuadrature::default().len(), 642);
    }

    #[test]
    fn antipodal_closure() {
        let q = SphereQuadrature::new(3).unwrap();
        for (m, w) in q.directions.iter().zip(&q.weights) {
            let (j, d) = q
                .directions
                .iter()
                .enumerate()
                .map(|(j, n)| (j, (n + m).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 1e-12);
            assert!((q.weights[j] - w).abs() < 1e-12);
        }
    }

    #[test]
    fn second_moment_is_isotropic() {
        let q = SphereQuadrature::new(4).unwrap();
        let zz = q.integrate(|m| m.z * m.z);
        assert!((zz - 4.0 * PI / 3.0).abs() < 1e-3);
    }

    #[test]
    fn order_maps_to_level() {
        assert_eq!(SphereQuadrature::with_order(32).unwrap().level, 5);
        assert!(SphereQuadrature::with_order(3).is_err());
    }
}
