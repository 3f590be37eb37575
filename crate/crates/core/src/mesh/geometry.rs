//! Exact double-precision primitives: triangle area, closest points, boxes.

use nalgebra::{Point3, Vector3};

pub fn triangle_area(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Closest point on triangle `abc` to `p`, together with its barycentric
/// coordinates `(u, v, w)` such that the point equals `u a + v b + w c`.
///
/// Region classification after Ericson, *Real-Time Collision Detection*, 5.1.5.
/// Degenerate triangles fall through to vertex or edge regions.
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> (Point3<f64>, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }

    let denom = va + vb + vc;
    if denom == 0.0 || !denom.is_finite() {
        // Collinear corners that slipped past every edge region.
        return closest_on_degenerate(p, a, b, c);
    }
    let inv = 1.0 / denom;
    let v = vb * inv;
    let w = vc * inv;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

fn closest_on_degenerate(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> (Point3<f64>, [f64; 3]) {
    let candidates = [
        (closest_point_on_segment(p, a, b), 0usize),
        (closest_point_on_segment(p, b, c), 1),
        (closest_point_on_segment(p, c, a), 2),
    ];
    let ((q, t), edge) = candidates
        .into_iter()
        .min_by(|x, y| {
            (p - x.0 .0)
                .norm_squared()
                .total_cmp(&(p - y.0 .0).norm_squared())
        })
        .expect("three candidates");
    let bary = match edge {
        0 => [1.0 - t, t, 0.0],
        1 => [0.0, 1.0 - t, t],
        _ => [t, 0.0, 1.0 - t],
    };
    (q, bary)
}

/// Closest point on segment `ab`, with its parameter `t` in `[0, 1]`.
pub fn closest_point_on_segment(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
) -> (Point3<f64>, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (*a, 0.0);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + ab * t, t)
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut bb = Aabb {
            min: first,
            max: first,
        };
        for p in iter {
            bb.grow(p);
        }
        Some(bb)
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        out.grow(&other.min);
        out.grow(&other.max);
        out
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Point3<f64>) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let excess = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d2 += excess * excess;
        }
        d2
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0));
        let (q, _) = closest_point_on_triangle(&p(0.25, 0.25, 2.0), &a, &b, &c);
        assert_eq!(q, p(0.25, 0.25, 0.0));
        let (q, bary) = closest_point_on_triangle(&p(-1.0, -1.0, 0.0), &a, &b, &c);
        assert_eq!(q, a);
        assert_eq!(bary, [1.0, 0.0, 0.0]);
        let (q, _) = closest_point_on_triangle(&p(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((q - p(0.5, 0.5, 0.0)).norm() < 1e-15);
        let (q, _) = closest_point_on_triangle(&p(0.5, -3.0, 1.0), &a, &b, &c);
        assert_eq!(q, p(0.5, 0.0, 0.0));
    }

    #[test]
    fn degenerate_triangle_collapses_to_point() {
        let a = p(1.0, 2.0, 3.0);
        let (q, _) = closest_point_on_triangle(&p(0.0, 0.0, 0.0), &a, &a, &a);
        assert_eq!(q, a);
        let (q, _) = closest_point_on_triangle(
            &p(0.5, 1.0, 0.0),
            &p(0.0, 0.0, 0.0),
            &p(1.0, 0.0, 0.0),
            &p(2.0, 0.0, 0.0),
        );
        assert!((q - p(0.5, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn barycentrics_reproduce_point() {
        let (a, b, c) = (p(0.3, -1.0, 2.0), p(2.0, 0.5, 1.0), p(-0.5, 1.5, 0.0));
        for q in [p(0.0, 0.0, 0.0), p(5.0, 5.0, 5.0), p(0.5, 0.3, 1.0)] {
            let (x, [u, v, w]) = closest_point_on_triangle(&q, &a, &b, &c);
            let y = Point3::from(a.coords * u + b.coords * v + c.coords * w);
            assert!((x - y).norm() < 1e-12);
            assert!((u + v + w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn box_distance() {
        let bb = Aabb::from_points([p(0.0, 0.0, 0.0), p(1.0, 1.0, 1.0)].iter()).unwrap();
        assert_eq!(bb.distance_squared(&p(0.5, 0.5, 0.5)), 0.0);
        assert_eq!(bb.distance_squared(&p(2.0, 0.5, 0.5)), 1.0);
        assert_eq!(bb.diagonal(), 3f64.sqrt());
    }
}
