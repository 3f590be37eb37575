//! Bounding-volume hierarchy over mesh faces for exact closest-point queries.

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::mesh::geometry::{closest_point_on_segment, closest_point_on_triangle, Aabb};
use crate::mesh::TriMesh;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, len: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub point: Point3<f64>,
    pub distance: f64,
    pub face: usize,
    pub barycentric: [f64; 3],
}

/// Immutable AABB tree over the faces of one mesh. The tree keeps its own
/// copy of the mesh so it can outlive the value it was built from.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    mesh: TriMesh,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl SpatialIndex {
    pub fn new(mesh: &TriMesh) -> Self {
        let boxes: Vec<Aabb> = (0..mesh.faces.len())
            .map(|f| Aabb::from_points(mesh.corners(f).iter()).expect("three corners"))
            .collect();
        let centroids: Vec<Point3<f64>> = boxes.iter().map(Aabb::center).collect();
        let mut order: Vec<usize> = (0..mesh.faces.len()).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            build(&mut nodes, &mut order, 0, &boxes, &centroids);
        }
        SpatialIndex {
            mesh: mesh.clone(),
            nodes,
            order,
        }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    /// Faces stored in leaves, in leaf order. Every face appears exactly once.
    pub fn leaf_faces(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.order.len());
        for node in &self.nodes {
            if let NodeKind::Leaf { start, len } = node.kind {
                out.extend_from_slice(&self.order[start..start + len]);
            }
        }
        out
    }

    /// Closest point on the indexed surface to `query`.
    pub fn closest_point(&self, query: &Point3<f64>) -> Result<ClosestPoint> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyInput(
                "closest-point query on a mesh without faces",
            ));
        }
        let mut best = ClosestPoint {
            point: *query,
            distance: f64::INFINITY,
            face: usize::MAX,
            barycentric: [0.0; 3],
        };
        let mut best_d2 = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds.distance_squared(query) > best_d2 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, len } => {
                    for &f in &self.order[start..start + len] {
                        let [a, b, c] = self.mesh.corners(f);
                        let (q, bary) = closest_point_on_triangle(query, &a, &b, &c);
                        let d2 = (query - q).norm_squared();
                        if d2 < best_d2 || (d2 == best_d2 && f < best.face) {
                            best_d2 = d2;
                            best = ClosestPoint {
                                point: q,
                                distance: 0.0,
                                face: f,
                                barycentric: bary,
                            };
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared(query);
                    let dr = self.nodes[right].bounds.distance_squared(query);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.distance = (query - best.point).norm();
        Ok(best)
    }

    pub fn distance(&self, query: &Point3<f64>) -> Result<f64> {
        self.closest_point(query).map(|c| c.distance)
    }
}

fn build(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    offset: usize,
    boxes: &[Aabb],
    centroids: &[Point3<f64>],
) -> usize {
    let bounds = order
        .iter()
        .map(|&f| boxes[f])
        .reduce(|a, b| a.merge(&b))
        .expect("non-empty range");
    let id = nodes.len();
    nodes.push(Node {
        bounds,
        kind: NodeKind::Leaf {
            start: offset,
            len: order.len(),
        },
    });
    if order.len() <= LEAF_SIZE {
        return id;
    }
    let centroid_box = Aabb::from_points(order.iter().map(|&f| &centroids[f])).expect("non-empty");
    let axis = centroid_box.longest_axis();
    if centroid_box.extent()[axis] == 0.0 {
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build(nodes, lo, offset, boxes, centroids);
    let right = build(nodes, hi, offset + mid, boxes, centroids);
    nodes[id].kind = NodeKind::Inner { left, right };
    id
}

/// Free-function form of [`SpatialIndex::closest_point`].
pub fn closest_surface_point(index: &SpatialIndex, query: &Point3<f64>) -> Result<ClosestPoint> {
    index.closest_point(query)
}

/// Brute-force scan of every face; the reference the tree is checked against.
pub fn closest_point_brute_force(mesh: &TriMesh, query: &Point3<f64>) -> Option<ClosestPoint> {
    let mut best: Option<ClosestPoint> = None;
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.corners(f);
        let (q, bary) = closest_point_on_triangle(query, &a, &b, &c);
        let d = (query - q).norm();
        if best.is_none_or(|b| d < b.distance) {
            best = Some(ClosestPoint {
                point: q,
                distance: d,
                face: f,
                barycentric: bary,
            });
        }
    }
    best
}

/// A set of line segments (e.g. boundary edges) with brute-force projection.
#[derive(Debug, Clone, Default)]
pub struct SegmentSet {
    segments: Vec<(Point3<f64>, Point3<f64>)>,
}

impl SegmentSet {
    pub fn new(segments: Vec<(Point3<f64>, Point3<f64>)>) -> Self {
        SegmentSet { segments }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// Closest point on any segment and its distance.
    pub fn closest_point(&self, query: &Point3<f64>) -> Option<(Point3<f64>, f64)> {
        self.segments
            .iter()
            .map(|(a, b)| {
                let (q, _) = closest_point_on_segment(query, a, b);
                (q, (query - q).norm())
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
    }
}
