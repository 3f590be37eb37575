//! Uniform surface sampling.
//!
//! Both samplers draw from [`ChaCha8Rng`] seeded with `seed_from_u64`, so a
//! given seed yields the same cloud on every platform.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Most candidates a Poisson-disk pool may hold.
pub const MAX_POOL: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    pub seed: u64,
    /// Number of Monte Carlo samples.
    pub count: usize,
    /// Poisson-disk radius (mm).
    pub radius: f64,
    /// Candidate-pool size as a multiple of the expected Poisson-disk count.
    pub oversample_factor: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            seed: 0,
            count: 1000,
            radius: 1.0,
            oversample_factor: 10,
        }
    }
}

impl SamplingParams {
    pub fn with_count(seed: u64, count: usize) -> Self {
        SamplingParams {
            seed,
            count,
            ..Default::default()
        }
    }

    pub fn with_radius(seed: u64, radius: f64) -> Self {
        SamplingParams {
            seed,
            radius,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub position: Point3<f64>,
    pub face: usize,
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub samples: Vec<SurfaceSample>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> Vec<Point3<f64>> {
        self.samples.iter().map(|s| s.position).collect()
    }

    /// Writes `x,y,z,face,b0,b1,b2` rows with a header line.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "x,y,z,face,b0,b1,b2")?;
        for s in &self.samples {
            let p = s.position;
            let b = s.barycentric;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.x, p.y, p.z, s.face, b[0], b[1], b[2]
            )?;
        }
        Ok(())
    }

    /// Writes an ASCII PLY holding only a vertex element.
    pub fn write_ply<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "ply\nformat ascii 1.0")?;
        writeln!(w, "element vertex {}", self.samples.len())?;
        writeln!(w, "property float x\nproperty float y\nproperty float z")?;
        writeln!(w, "end_header")?;
        for s in &self.samples {
            let p = s.position;
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        Ok(())
    }
}

fn check_mesh(mesh: &TriMesh) -> Result<(Vec<f64>, f64)> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyInput("mesh has no faces to sample"));
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("mesh has zero surface area".into()));
    }
    Ok((cumulative, total))
}

fn draw(mesh: &TriMesh, cumulative: &[f64], total: f64, rng: &mut ChaCha8Rng) -> SurfaceSample {
    let u = rng.random::<f64>() * total;
    let face = cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1);
    let r1: f64 = rng.random();
    let r2: f64 = rng.random();
    let s = r1.sqrt();
    let barycentric = [1.0 - s, s * (1.0 - r2), s * r2];
    let [a, b, c] = mesh.corners(face);
    let position = Point3::from(
        a.coords * barycentric[0] + b.coords * barycentric[1] + c.coords * barycentric[2],
    );
    SurfaceSample {
        position,
        face,
        barycentric,
    }
}

/// Area-weighted uniform samples; exactly `params.count` of them.
pub fn montecarlo_sample(mesh: &TriMesh, params: &SamplingParams) -> Result<PointCloud> {
    let (cumulative, total) = check_mesh(mesh)?;
    if params.count == 0 {
        return Err(Error::InvalidParams(
            "sample count must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let samples = (0..params.count)
        .map(|_| draw(mesh, &cumulative, total, &mut rng))
        .collect();
    Ok(PointCloud { samples })
}

/// Points per unit area for a hexagonal packing at spacing `radius`.
fn expected_count(area: f64, radius: f64) -> usize {
    (area / (0.75f64.sqrt() * radius * radius)).ceil().max(1.0) as usize
}

/// Samples at mutual distance ≥ `params.radius`, obtained by accepting
/// Monte Carlo candidates in draw order whenever they keep that distance.
pub fn poissondisk_sample(mesh: &TriMesh, params: &SamplingParams) -> Result<PointCloud> {
    let (cumulative, total) = check_mesh(mesh)?;
    let r = params.radius;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "poisson-disk radius must be > 0, got {r}"
        )));
    }
    let factor = params.oversample_factor.max(1);
    let wanted = expected_count(total, r).saturating_mul(factor);
    let pool = wanted.min(MAX_POOL);
    if pool < wanted {
        log::warn!("poisson-disk pool capped at {pool} candidates ({wanted} requested)");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut samples: Vec<SurfaceSample> = Vec::new();
    let cell = |p: &Point3<f64>| [0, 1, 2].map(|k| (p[k] / r).floor() as i64);
    let r2 = r * r;
    for _ in 0..pool {
        let s = draw(mesh, &cumulative, total, &mut rng);
        let c = cell(&s.position);
        let mut ok = true;
        'scan: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        if ids
                            .iter()
                            .any(|&i| (samples[i].position - s.position).norm_squared() < r2)
                        {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
            }
        }
        if ok {
            grid.entry(c).or_default().push(samples.len());
            samples.push(s);
        }
    }
    Ok(PointCloud { samples })
}

/// Poisson-disk radius whose expected sample count is about `count`.
pub fn radius_for_count(mesh: &TriMesh, count: usize) -> f64 {
    let area = mesh.total_surface_area();
    // Dart throwing typically fills ~70% of a hexagonal packing.
    (0.7 * area / (0.75f64.sqrt() * count.max(1) as f64)).sqrt()
}
