//! The end-to-end filter: (volume → mesh) → repair → smooth → sample →
//! register smoothed onto raw → evaluate.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::spatial::SpatialIndex;
use crate::mesh::topology::boundary_loops;
use crate::mesh::TriMesh;
use crate::metrics::{dice_mesh_vs_volume, surface_distance_stats, DiceResult, DistanceStats};
use crate::registration::{cpd_rigid, CpdParams, CpdResult};
use crate::repair::{repair_all, MeshSummary, RepairParams, RepairReport};
use crate::sampling::{poissondisk_sample, radius_for_count, SamplingParams};
use crate::smoothing::{laplacian_smooth_preserving, SmoothingParams};
use crate::transform::apply_rigid;
use crate::volume::{marching_cubes, LabelVolume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub enabled: bool,
    /// Target Poisson-disk sample count per cloud.
    pub sample_count: usize,
    pub cpd: CpdParams,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            enabled: true,
            sample_count: 3000,
            cpd: CpdParams::default(),
        }
    }
}

/// Target Metro sample count used when no radius is configured.
pub const DEFAULT_METRIC_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Poisson-disk radius of the Metro samples (mm); derived from the
    /// mean surface area of the compared meshes when absent.
    pub sampling_radius: Option<f64>,
    pub threshold: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            sampling_radius: None,
            threshold: crate::metrics::DEFAULT_THRESHOLD,
        }
    }
}

impl MetricsConfig {
    /// Sampling shared by both meshes; symmetric in `a` and `b`.
    pub fn sampling_for(&self, seed: u64, a: &TriMesh, b: &TriMesh) -> SamplingParams {
        let radius = self.sampling_radius.unwrap_or_else(|| {
            let area = 0.5 * (a.total_surface_area() + b.total_surface_area());
            let r = (0.7 * area / (0.75f64.sqrt() * DEFAULT_METRIC_SAMPLES as f64)).sqrt();
            if r > 0.0 {
                r
            } else {
                1.0
            }
        });
        SamplingParams::with_radius(seed, radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Required whenever sampling or registration runs.
    pub seed: Option<u64>,
    /// Label extracted from volume inputs.
    pub label: u8,
    pub repair: RepairParams,
    pub smoothing: SmoothingParams,
    pub registration: RegistrationConfig,
    pub metrics: MetricsConfig,
    /// Wall-clock stage timings make reports non-reproducible, so they are
    /// off unless asked for.
    pub record_timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            label: 1,
            repair: RepairParams::default(),
            smoothing: SmoothingParams::default(),
            registration: RegistrationConfig::default(),
            metrics: MetricsConfig::default(),
            record_timings: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.repair.validate()?;
        self.smoothing.validate()?;
        self.registration.cpd.validate()?;
        if self.seed.is_none() {
            return Err(Error::InvalidParams(
                "a seed is required: sampling and registration are stochastic".into(),
            ));
        }
        if self.registration.enabled && self.registration.sample_count < 4 {
            return Err(Error::InvalidParams(
                "registration needs at least 4 samples".into(),
            ));
        }
        if !(self.metrics.threshold >= 0.0) {
            return Err(Error::InvalidParams("metric threshold must be >= 0".into()));
        }
        if let Some(r) = self.metrics.sampling_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidParams(
                    "metric sampling radius must be > 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidParams("configuration has no seed".into()))
    }
}

/// Offsets that give every stochastic stage its own stream.
const SEED_SOURCE: u64 = 0x5eed_0001;
const SEED_TARGET: u64 = 0x5eed_0002;

pub enum InputGeometry {
    Mesh(TriMesh),
    Volume(LabelVolume),
}

/// Optional ground truth the result is scored against.
#[derive(Default)]
pub struct Reference {
    pub mesh: Option<TriMesh>,
    pub volume: Option<LabelVolume>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub max_displacement: f64,
    pub mean_displacement: f64,
    pub max_distance_to_original: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    pub source_samples: usize,
    pub target_samples: usize,
    pub result: CpdResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub input: MeshSummary,
    pub repair: RepairReport,
    pub smoothing: SmoothingReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub registration: Option<RegistrationReport>,
    /// Result against the repaired, unsmoothed mesh.
    pub distances: DistanceStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_distances: Option<DistanceStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_dice: Option<DiceResult>,
    pub boundary_loops_before: usize,
    pub boundary_loops_after: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Vec<StageTiming>>,
}

struct Clock {
    enabled: bool,
    start: Instant,
    stages: Vec<StageTiming>,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Clock {
            enabled,
            start: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        if self.enabled {
            let now = Instant::now();
            self.stages.push(StageTiming {
                stage: stage.to_string(),
                seconds: (now - self.start).as_secs_f64(),
            });
            self.start = now;
        }
        log::info!("stage {stage} done");
    }
}

fn loops(mesh: &TriMesh, stage: &'static str) -> Result<usize> {
    boundary_loops(mesh)
        .map(|l| l.len())
        .map_err(|e| e.in_stage(stage))
}

pub fn run_filter_pipeline(
    input: &InputGeometry,
    config: &PipelineConfig,
) -> Result<(TriMesh, PipelineReport)> {
    run_filter_pipeline_with_reference(input, config, &Reference::default())
}

pub fn run_filter_pipeline_with_reference(
    input: &InputGeometry,
    config: &PipelineConfig,
    reference: &Reference,
) -> Result<(TriMesh, PipelineReport)> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let seed = config.seed()?;
    let mut clock = Clock::new(config.record_timings);

    let raw = match input {
        InputGeometry::Mesh(m) => m.clone(),
        InputGeometry::Volume(v) => {
            let m = marching_cubes(v, config.label);
            clock.lap("marching_cubes");
            m
        }
    };
    raw.validate().map_err(|e| e.in_stage("input"))?;
    if raw.faces.is_empty() {
        return Err(Error::EmptyInput("input geometry has no faces").in_stage("input"));
    }
    let input_summary = MeshSummary::of(&raw);

    let (repaired, repair_report) =
        repair_all(&raw, &config.repair).map_err(|e| e.in_stage("repair"))?;
    if repaired.faces.is_empty() {
        return Err(Error::EmptyInput("repair removed every face").in_stage("repair"));
    }
    clock.lap("repair");

    let original = SpatialIndex::new(&repaired);
    let smoothed = laplacian_smooth_preserving(&repaired, &original, &config.smoothing)
        .map_err(|e| e.in_stage("smoothing"))?;
    let smoothing = smoothing_report(&repaired, &smoothed, &original)?;
    clock.lap("smoothing");

    let (result, registration) = if config.registration.enabled {
        let count = config.registration.sample_count;
        let src_params = SamplingParams::with_radius(
            seed.wrapping_add(SEED_SOURCE),
            radius_for_count(&smoothed, count),
        );
        let dst_params = SamplingParams::with_radius(
            seed.wrapping_add(SEED_TARGET),
            radius_for_count(&repaired, count),
        );
        let src = poissondisk_sample(&smoothed, &src_params).map_err(|e| e.in_stage("sampling"))?;
        let dst = poissondisk_sample(&repaired, &dst_params).map_err(|e| e.in_stage("sampling"))?;
        clock.lap("sampling");
        let cpd = cpd_rigid(&src.positions(), &dst.positions(), &config.registration.cpd)
            .map_err(|e| e.in_stage("registration"))?;
        if !cpd.converged {
            log::warn!(
                "registration stopped after {} iterations without converging",
                cpd.iterations
            );
        }
        let moved = apply_rigid(&smoothed, &cpd.transform);
        clock.lap("registration");
        (
            moved,
            Some(RegistrationReport {
                source_samples: src.len(),
                target_samples: dst.len(),
                result: cpd,
            }),
        )
    } else {
        (smoothed, None)
    };

    let sampling = config.metrics.sampling_for(seed, &result, &repaired);
    let distances = surface_distance_stats(&result, &repaired, &sampling, config.metrics.threshold)
        .map_err(|e| e.in_stage("metrics"))?;
    let reference_distances = match &reference.mesh {
        Some(truth) => {
            let s = config.metrics.sampling_for(seed, &result, truth);
            Some(
                surface_distance_stats(&result, truth, &s, config.metrics.threshold)
                    .map_err(|e| e.in_stage("reference metrics"))?,
            )
        }
        None => None,
    };
    let reference_dice = match &reference.volume {
        Some(v) => Some(
            dice_mesh_vs_volume(&result, v, config.label)
                .map_err(|e| e.in_stage("reference dice"))?,
        ),
        None => None,
    };
    clock.lap("metrics");

    let report = PipelineReport {
        config: config.clone(),
        input: input_summary,
        repair: repair_report,
        smoothing,
        registration,
        distances,
        reference_distances,
        reference_dice,
        boundary_loops_before: loops(&repaired, "repair")?,
        boundary_loops_after: loops(&result, "output")?,
        timings: config.record_timings.then_some(clock.stages),
    };
    Ok((result, report))
}

fn smoothing_report(
    before: &TriMesh,
    after: &TriMesh,
    original: &SpatialIndex,
) -> Result<SmoothingReport> {
    let n = before.vertices.len().max(1) as f64;
    let disp: Vec<f64> = before
        .vertices
        .iter()
        .zip(&after.vertices)
        .map(|(a, b)| (a - b).norm())
        .collect();
    let mut max_dist: f64 = 0.0;
    for v in &after.vertices {
        max_dist = max_dist.max(original.distance(v).map_err(|e| e.in_stage("smoothing"))?);
    }
    Ok(SmoothingReport {
        max_displacement: disp.iter().copied().fold(0.0, f64::max),
        mean_displacement: disp.iter().sum::<f64>() / n,
        max_distance_to_original: max_dist,
    })
}

/// Table-1 style comparison of two meshes and, optionally, two volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dice: Option<DiceResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<DistanceStats>,
    pub seed: u64,
    pub sampling_radius: Option<f64>,
    pub threshold: f64,
}

pub fn run_metrics(
    meshes: Option<(&TriMesh, &TriMesh)>,
    volumes: Option<(&LabelVolume, &LabelVolume)>,
    label: u8,
    seed: u64,
    config: &MetricsConfig,
) -> Result<MetricsReport> {
    if meshes.is_none() && volumes.is_none() {
        return Err(Error::InvalidParams(
            "metrics need two meshes or two volumes".into(),
        ));
    }
    let mut radius = None;
    let distances = match meshes {
        Some((a, b)) => {
            let s = config.sampling_for(seed, a, b);
            radius = Some(s.radius);
            Some(
                surface_distance_stats(a, b, &s, config.threshold)
                    .map_err(|e| e.in_stage("distances"))?,
            )
        }
        None => None,
    };
    let dice = match volumes {
        Some((a, b)) => {
            Some(crate::metrics::dice_volumes(a, b, label).map_err(|e| e.in_stage("dice"))?)
        }
        None => None,
    };
    Ok(MetricsReport {
        dice,
        distances,
        seed,
        sampling_radius: radius,
        threshold: config.threshold,
    })
}

pub use crate::constitutive::{
    evaluate_material_point as run_material_eval, MaterialPointInput, MaterialPointOutput,
};
