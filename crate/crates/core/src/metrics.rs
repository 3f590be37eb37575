//! Segmentation and surface-distance metrics.
//!
//! Surface distances follow the Metro approach: every vertex of one mesh
//! plus a Poisson-disk sample of its surface is measured against the exact
//! triangles of the other mesh. Per-sample distances are computed in
//! parallel but reduced sequentially in sample order.

use std::io::Write;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::spatial::SpatialIndex;
use crate::mesh::TriMesh;
use crate::sampling::{poissondisk_sample, SamplingParams};
use crate::volume::{voxelize_mesh, LabelVolume};

pub const HISTOGRAM_BINS: usize = 64;
pub const DEFAULT_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiceResult {
    pub dice: f64,
    pub count_a: usize,
    pub count_b: usize,
    pub intersection: usize,
}

/// Dice coefficient `2|A∩B| / (|A| + |B|)` of the voxels equal to `label`.
pub fn dice_volumes(a: &LabelVolume, b: &LabelVolume, label: u8) -> Result<DiceResult> {
    if !a.same_grid(b) {
        return Err(Error::IncompatibleGrids(format!(
            "dims {:?}/{:?}, spacing {:?}/{:?}, origin {:?}/{:?}",
            a.dims, b.dims, a.spacing, b.spacing, a.origin, b.origin
        )));
    }
    let (mut count_a, mut count_b, mut intersection) = (0, 0, 0);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        let (ia, ib) = (x == label, y == label);
        count_a += ia as usize;
        count_b += ib as usize;
        intersection += (ia && ib) as usize;
    }
    if count_a + count_b == 0 {
        return Err(Error::EmptyInput("both masks are empty; dice is undefined"));
    }
    Ok(DiceResult {
        dice: 2.0 * intersection as f64 / (count_a + count_b) as f64,
        count_a,
        count_b,
        intersection,
    })
}

/// Voxelises a closed mesh on `truth`'s grid and compares it to `truth`.
pub fn dice_mesh_vs_volume(mesh: &TriMesh, truth: &LabelVolume, label: u8) -> Result<DiceResult> {
    let label_out = if label == 0 { 1 } else { label };
    let voxels = voxelize_mesh(mesh, truth, label_out)?;
    let mut relabeled = truth.clone();
    if label_out != label {
        for v in relabeled.data.iter_mut() {
            *v = if *v == label { label_out } else { 0 };
        }
    }
    dice_volumes(&voxels, &relabeled, label_out)
}

/// Statistics of one direction, from the samples of one mesh to the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectedStats {
    pub samples: usize,
    pub max: f64,
    pub mean: f64,
    pub rms: f64,
    /// Percent of samples farther than the threshold.
    pub fraction_over_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `HISTOGRAM_BINS + 1` uniform edges over `[0, hausdorff]` (mm).
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn build(distances: impl Iterator<Item = f64>, max: f64) -> Self {
        let edges = (0..=HISTOGRAM_BINS)
            .map(|i| max * i as f64 / HISTOGRAM_BINS as f64)
            .collect();
        let mut counts = vec![0; HISTOGRAM_BINS];
        for d in distances {
            let bin = if max > 0.0 {
                ((d / max) * HISTOGRAM_BINS as f64) as usize
            } else {
                0
            };
            counts[bin.min(HISTOGRAM_BINS - 1)] += 1;
        }
        Histogram { edges, counts }
    }

    /// Two columns, `bin_upper_mm,count`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "bin_upper_mm,count")?;
        for (upper, count) in self.edges[1..].iter().zip(&self.counts) {
            writeln!(w, "{upper},{count}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    /// Symmetric Hausdorff distance (mm).
    pub hausdorff: f64,
    /// Sample-weighted mean over both directions (mm).
    pub mean_distance: f64,
    pub rms_distance: f64,
    /// Percent of A's area farther than `threshold` from B.
    pub area_fraction_over_threshold: f64,
    pub threshold: f64,
    pub histogram: Histogram,
    pub a_to_b: DirectedStats,
    pub b_to_a: DirectedStats,
}

impl DistanceStats {
    /// `metric,value` rows.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "metric,value")?;
        let rows = [
            ("hausdorff_mm", self.hausdorff),
            ("mean_distance_mm", self.mean_distance),
            ("rms_distance_mm", self.rms_distance),
            (
                "area_fraction_over_threshold_pct",
                self.area_fraction_over_threshold,
            ),
            ("threshold_mm", self.threshold),
            ("a_to_b_samples", self.a_to_b.samples as f64),
            ("a_to_b_max_mm", self.a_to_b.max),
            ("a_to_b_mean_mm", self.a_to_b.mean),
            ("b_to_a_samples", self.b_to_a.samples as f64),
            ("b_to_a_max_mm", self.b_to_a.max),
            ("b_to_a_mean_mm", self.b_to_a.mean),
        ];
        for (name, value) in rows {
            writeln!(w, "{name},{value}")?;
        }
        Ok(())
    }
}

/// Metro sample set: all vertices, then Poisson-disk samples. Meshes
/// without area contribute their vertices only.
pub fn metro_samples(mesh: &TriMesh, sampling: &SamplingParams) -> Result<Vec<Point3<f64>>> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyInput("distance metrics need meshes with faces"));
    }
    let mut points = mesh.vertices.clone();
    if mesh.total_surface_area() > 0.0 {
        points.extend(poissondisk_sample(mesh, sampling)?.positions());
    }
    Ok(points)
}

/// Distances from each point to the surface indexed by `to`, in input order.
pub fn directed_distances(points: &[Point3<f64>], to: &SpatialIndex) -> Result<Vec<f64>> {
    points.par_iter().map(|p| to.distance(p)).collect()
}

fn directed(d: &[f64], threshold: f64) -> DirectedStats {
    let n = d.len() as f64;
    let sum: f64 = d.iter().sum();
    let sq: f64 = d.iter().map(|x| x * x).sum();
    let over = d.iter().filter(|&&x| x > threshold).count();
    DirectedStats {
        samples: d.len(),
        max: d.iter().copied().fold(0.0, f64::max),
        mean: sum / n,
        rms: (sq / n).sqrt(),
        fraction_over_threshold: 100.0 * over as f64 / n,
    }
}

/// Combines two directed distance lists into the symmetric record.
pub fn combine_distances(ab: &[f64], ba: &[f64], threshold: f64) -> DistanceStats {
    let a_to_b = directed(ab, threshold);
    let b_to_a = directed(ba, threshold);
    let n = (ab.len() + ba.len()) as f64;
    let sum = ab.iter().sum::<f64>() + ba.iter().sum::<f64>();
    let sq = ab.iter().map(|x| x * x).sum::<f64>() + ba.iter().map(|x| x * x).sum::<f64>();
    let hausdorff = a_to_b.max.max(b_to_a.max);
    DistanceStats {
        hausdorff,
        mean_distance: sum / n,
        rms_distance: (sq / n).sqrt(),
        area_fraction_over_threshold: a_to_b.fraction_over_threshold,
        threshold,
        histogram: Histogram::build(ab.iter().chain(ba).copied(), hausdorff),
        a_to_b,
        b_to_a,
    }
}

/// Symmetric surface distances between `a` (evaluated mesh) and `b`
/// (reference). Both meshes are sampled with the same parameters, so the
/// record is symmetric under swapping the arguments.
pub fn surface_distance_stats(
    a: &TriMesh,
    b: &TriMesh,
    sampling: &SamplingParams,
    threshold: f64,
) -> Result<DistanceStats> {
    let sa = metro_samples(a, sampling)?;
    let sb = metro_samples(b, sampling)?;
    let (ia, ib) = (SpatialIndex::new(a), SpatialIndex::new(b));
    let ab = directed_distances(&sa, &ib)?;
    let ba = directed_distances(&sb, &ia)?;
    Ok(combine_distances(&ab, &ba, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::grid;

    fn mask(bits: &[u8]) -> LabelVolume {
        LabelVolume::from_parts(
            &LabelVolume::zeros([bits.len(), 1, 1], [1.0; 3], [0.0; 3])
                .unwrap()
                .header(),
            bits.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn dice_hand_enumeration() {
        let a = mask(&[1, 1, 1, 1, 0, 0, 0, 0]);
        let b = mask(&[0, 0, 1, 1, 1, 1, 0, 0]);
        let d = dice_volumes(&a, &b, 1).unwrap();
        assert_eq!((d.count_a, d.count_b, d.intersection), (4, 4, 2));
        assert_eq!(d.dice, 0.5);
        assert_eq!(dice_volumes(&a, &a, 1).unwrap().dice, 1.0);
        let c = mask(&[0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(dice_volumes(&a, &c, 1).unwrap().dice, 0.0);
    }

    #[test]
    fn dice_errors() {
        let a = mask(&[0, 0]);
        assert!(matches!(dice_volumes(&a, &a, 1), Err(Error::EmptyInput(_))));
        let b = mask(&[0, 0, 0]);
        assert!(matches!(
            dice_volumes(&a, &b, 1),
            Err(Error::IncompatibleGrids(_))
        ));
    }

    #[test]
    fn identical_meshes() {
        let g = grid(4, 4, 0.5, 0.0, 0.0, 0.0);
        let s = surface_distance_stats(&g, &g, &SamplingParams::with_radius(1, 0.2), 1.0).unwrap();
        // Interior samples are re-projected, so only rounding noise remains.
        assert!(s.hausdorff < 1e-12);
        assert!(s.mean_distance < 1e-12);
        assert_eq!(s.area_fraction_over_threshold, 0.0);
        assert_eq!(
            s.histogram.counts.iter().sum::<usize>(),
            s.a_to_b.samples + s.b_to_a.samples
        );
    }

    #[test]
    fn histogram_csv() {
        let s = combine_distances(&[0.0, 1.0], &[0.5], 1.0);
        let mut buf = Vec::new();
        s.histogram.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), HISTOGRAM_BINS + 1);
        assert!(text.ends_with("1,1\n"));
        assert_eq!(s.histogram.counts[0], 1);
        assert_eq!(s.histogram.counts[32], 1);
    }
}
