use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use cartimesh::mesh::io::{load_mesh, save_mesh, MeshFormat};
use cartimesh::pipeline::{
    run_filter_pipeline_with_reference, run_material_eval, run_metrics, InputGeometry,
    MaterialPointInput, PipelineConfig, Reference,
};
use cartimesh::registration::cpd_rigid;
use cartimesh::repair::repair_all;
use cartimesh::sampling::{
    montecarlo_sample, poissondisk_sample, radius_for_count, SamplingParams,
};
use cartimesh::smoothing::smooth_in_place;
use cartimesh::transform::apply_rigid;
use cartimesh::volume::{load_volume, marching_cubes, LabelVolume};
use cartimesh::{Error, TriMesh};

#[derive(Parser)]
#[command(
    name = "cartimesh",
    version,
    about = "Cartilage surface mesh filtering and evaluation"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON); flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory that receives output files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    output: PathBuf,
    /// Output mesh format; defaults to the input mesh format (OFF for volumes).
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    json_report: Option<PathBuf>,
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Off,
    Ply,
    Stl,
}

impl From<FormatArg> for MeshFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Off => MeshFormat::Off,
            FormatArg::Ply => MeshFormat::Ply,
            FormatArg::Stl => MeshFormat::Stl,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract a label surface from a volume with marching cubes.
    Convert {
        /// Volume header (JSON).
        header: PathBuf,
        #[command(flatten)]
        volume: VolumeArgs,
    },
    /// Run every mesh repair operation to a fixed point.
    Repair {
        input: PathBuf,
        #[command(flatten)]
        repair: RepairArgs,
    },
    /// Surface-preserving Laplacian smoothing.
    Smooth {
        input: PathBuf,
        #[command(flatten)]
        smoothing: SmoothingArgs,
    },
    /// Sample points on a mesh surface.
    Sample {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "poisson-disk")]
        method: SampleMethod,
        /// Target number of samples.
        #[arg(long)]
        count: Option<usize>,
        /// Poisson-disk radius (mm); overrides --count.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        oversample_factor: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        cloud_format: CloudFormat,
    },
    /// Rigid + scale CPD registration of SOURCE onto TARGET.
    Register {
        source: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        registration: RegistrationArgs,
    },
    /// Full filter: (volume → mesh) → repair → smooth → register → evaluate.
    Filter {
        /// Meshes, or volume headers (`.json`); several inputs run in parallel.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        volume: VolumeArgs,
        #[command(flatten)]
        repair: RepairArgs,
        #[command(flatten)]
        smoothing: SmoothingArgs,
        #[command(flatten)]
        registration: RegistrationArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        /// Ground-truth mesh to score the result against.
        #[arg(long, value_name = "PATH")]
        reference_mesh: Option<PathBuf>,
        /// Ground-truth volume header for a Dice score.
        #[arg(long, value_name = "PATH")]
        reference_volume: Option<PathBuf>,
        /// Record wall-clock stage timings (makes reports non-reproducible).
        #[arg(long)]
        record_timings: bool,
    },
    /// DSC, Hausdorff, mean distance and area over threshold.
    Metrics {
        /// First mesh.
        #[arg(long, requires = "mesh_b")]
        mesh_a: Option<PathBuf>,
        /// Second mesh.
        #[arg(long, requires = "mesh_a")]
        mesh_b: Option<PathBuf>,
        /// First volume header.
        #[arg(long, requires = "volume_b")]
        volume_a: Option<PathBuf>,
        /// Second volume header.
        #[arg(long, requires = "volume_a")]
        volume_b: Option<PathBuf>,
        #[arg(long)]
        label: Option<u8>,
        #[command(flatten)]
        metrics: MetricArgs,
    },
    /// Evaluate the biphasic stress law at one material point.
    Material {
        /// Request JSON (`-` for standard input).
        input: PathBuf,
        /// Single-line JSON instead of pretty-printed.
        #[arg(long)]
        compact: bool,
    },
}

#[derive(Args)]
struct VolumeArgs {
    /// Raw voxel file; defaults to the header path with a `.raw` extension.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Label to extract.
    #[arg(long)]
    label: Option<u8>,
}

#[derive(Args)]
struct RepairArgs {
    #[arg(long)]
    merge_epsilon: Option<f64>,
    #[arg(long)]
    floating_diameter: Option<f64>,
    /// delete-smallest-face | split-vertices
    #[arg(long)]
    nonmanifold_edge_strategy: Option<String>,
    /// collapse | flip
    #[arg(long)]
    t_vertex_mode: Option<String>,
    #[arg(long)]
    split_offset: Option<f64>,
}

#[derive(Args)]
struct SmoothingArgs {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    projection_tolerance: Option<f64>,
    /// smooth-along-boundary | frozen
    #[arg(long)]
    boundary_mode: Option<String>,
}

#[derive(Args)]
struct RegistrationArgs {
    /// Poisson-disk samples per cloud.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    outlier_weight: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Fix the scale at 1.
    #[arg(long)]
    no_scale: bool,
    /// Skip registration in the filter pipeline.
    #[arg(long)]
    no_registration: bool,
}

#[derive(Args)]
struct MetricArgs {
    /// Distance threshold (mm) for the area fraction.
    #[arg(long)]
    threshold: Option<f64>,
    /// Metro sampling radius (mm).
    #[arg(long)]
    sampling_radius: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleMethod {
    PoissonDisk,
    MonteCarlo,
}

#[derive(Clone, Copy, ValueEnum)]
enum CloudFormat {
    Csv,
    Ply,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.root() {
                Error::InvalidParams(_) | Error::UnknownZone(_) | Error::UnknownConstituent(_) => 2,
                Error::Io(_)
                | Error::Format(_)
                | Error::EmptyInput(_)
                | Error::InvalidMesh(_)
                | Error::IncompatibleGrids(_) => 3,
                Error::DegenerateInput(_) | Error::InvalidDeformation(_) | Error::Domain(_) => 4,
                Error::Stage { .. } => unreachable!("root strips stage tags"),
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("CARTIMESH_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "CARTIMESH_THREADS must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    let common = &cli.common;
    let mut config = load_config(common)?;
    match cli.command {
        Command::Convert { header, volume } => {
            volume.apply(&mut config);
            let vol = read_volume(&header, volume.data.as_deref())?;
            let mesh = marching_cubes(&vol, config.label);
            let format = output_format(common, None);
            let path = output_path(common, &header, "", format)?;
            save_mesh(&mesh, &path, format)?;
            log::info!("wrote {}", path.display());
            emit_report(common, &cartimesh::repair::MeshSummary::of(&mesh))
        }
        Command::Repair { input, repair } => {
            repair.apply(&mut config)?;
            let (mesh, in_format) = read_mesh(&input)?;
            let (out, report) = repair_all(&mesh, &config.repair)?;
            write_mesh(common, &input, "_repaired", in_format, &out)?;
            emit_report(common, &report)
        }
        Command::Smooth { input, smoothing } => {
            smoothing.apply(&mut config)?;
            let (mesh, in_format) = read_mesh(&input)?;
            let out = smooth_in_place(&mesh, &config.smoothing)?;
            write_mesh(common, &input, "_smoothed", in_format, &out)?;
            emit_report(common, &config.smoothing)
        }
        Command::Sample {
            input,
            method,
            count,
            radius,
            oversample_factor,
            cloud_format,
        } => {
            let seed = require_seed(&config)?;
            let (mesh, _) = read_mesh(&input)?;
            let mut params =
                SamplingParams::with_count(seed, count.unwrap_or(SamplingParams::default().count));
            params.radius = radius.unwrap_or_else(|| radius_for_count(&mesh, params.count));
            if let Some(k) = oversample_factor {
                params.oversample_factor = k;
            }
            let cloud = match method {
                SampleMethod::PoissonDisk => poissondisk_sample(&mesh, &params)?,
                SampleMethod::MonteCarlo => montecarlo_sample(&mesh, &params)?,
            };
            let (ext, bytes) = match cloud_format {
                CloudFormat::Csv => {
                    let mut buf = Vec::new();
                    cloud.write_csv(&mut buf)?;
                    ("csv", buf)
                }
                CloudFormat::Ply => {
                    let mut buf = Vec::new();
                    cloud.write_ply(&mut buf)?;
                    ("ply", buf)
                }
            };
            fs::create_dir_all(&common.output)?;
            let path = common
                .output
                .join(format!("{}_samples.{ext}", stem(&input)));
            fs::write(&path, bytes)?;
            log::info!("wrote {} samples to {}", cloud.len(), path.display());
            emit_report(
                common,
                &serde_json::json!({ "samples": cloud.len(), "params": params }),
            )
        }
        Command::Register {
            source,
            target,
            registration,
        } => {
            registration.apply(&mut config);
            config.validate()?;
            let seed = require_seed(&config)?;
            let (src, in_format) = read_mesh(&source)?;
            let (tgt, _) = read_mesh(&target)?;
            let n = config.registration.sample_count;
            let sample = |m: &TriMesh, offset: u64| {
                let params =
                    SamplingParams::with_radius(seed.wrapping_add(offset), radius_for_count(m, n));
                poissondisk_sample(m, &params)
            };
            let xs = sample(&src, 1)?.positions();
            let ys = sample(&tgt, 2)?.positions();
            let result = cpd_rigid(&xs, &ys, &config.registration.cpd)?;
            let out = apply_rigid(&src, &result.transform);
            write_mesh(common, &source, "_registered", in_format, &out)?;
            fs::write(
                common
                    .output
                    .join(format!("{}_transform.json", stem(&source))),
                pretty(&result.transform)?,
            )?;
            emit_report(common, &result)
        }
        Command::Filter {
            inputs,
            volume,
            repair,
            smoothing,
            registration,
            metrics,
            reference_mesh,
            reference_volume,
            record_timings,
        } => {
            volume.apply(&mut config);
            repair.apply(&mut config)?;
            smoothing.apply(&mut config)?;
            registration.apply(&mut config);
            metrics.apply(&mut config);
            config.record_timings |= record_timings;
            require_seed(&config)?;
            if inputs.len() > 1 && common.json_report.is_some() {
                return Err(CliError::Usage(
                    "--json-report takes a single input; with several, reports go next to each mesh".into(),
                ));
            }
            let reference = Reference {
                mesh: reference_mesh
                    .as_deref()
                    .map(read_mesh)
                    .transpose()?
                    .map(|(m, _)| m),
                volume: reference_volume
                    .as_deref()
                    .map(|h| read_volume(h, None))
                    .transpose()?,
            };
            let single = inputs.len() == 1;
            // Outputs go to distinct files, so the worker order does not matter.
            let results: Vec<CliResult<()>> = inputs
                .par_iter()
                .map(|input| {
                    filter_one(
                        common,
                        &config,
                        &reference,
                        input,
                        volume.data.as_deref(),
                        single,
                    )
                })
                .collect();
            results.into_iter().collect()
        }
        Command::Metrics {
            mesh_a,
            mesh_b,
            volume_a,
            volume_b,
            label,
            metrics,
        } => {
            metrics.apply(&mut config);
            if let Some(l) = label {
                config.label = l;
            }
            let seed = require_seed(&config)?;
            let meshes = match (mesh_a, mesh_b) {
                (Some(a), Some(b)) => Some((read_mesh(&a)?.0, read_mesh(&b)?.0)),
                _ => None,
            };
            let volumes = match (volume_a, volume_b) {
                (Some(a), Some(b)) => Some((read_volume(&a, None)?, read_volume(&b, None)?)),
                _ => None,
            };
            if meshes.is_none() && volumes.is_none() {
                return Err(CliError::Usage(
                    "metrics needs --mesh-a/--mesh-b and/or --volume-a/--volume-b".into(),
                ));
            }
            let report = run_metrics(
                meshes.as_ref().map(|(a, b)| (a, b)),
                volumes.as_ref().map(|(a, b)| (a, b)),
                config.label,
                seed,
                &config.metrics,
            )?;
            fs::create_dir_all(&common.output)?;
            let mut table = Vec::new();
            write_metrics_csv(&report, &mut table)?;
            fs::write(common.output.join("metrics.csv"), table)?;
            if let Some(d) = &report.distances {
                let mut buf = Vec::new();
                d.histogram.write_csv(&mut buf)?;
                fs::write(common.output.join("histogram.csv"), buf)?;
            }
            emit_report(common, &report)
        }
        Command::Material { input, compact } => {
            let text = if input.as_os_str() == "-" {
                io::read_to_string(io::stdin())?
            } else {
                fs::read_to_string(&input)?
            };
            let request = MaterialPointInput::from_json(&text)?;
            let output = run_material_eval(&request)?;
            let mut json = if compact {
                serde_json::to_string(&output).map_err(Error::from)?
            } else {
                serde_json::to_string_pretty(&output).map_err(Error::from)?
            };
            json.push('\n');
            write_report_text(common, &json)
        }
    }
}

fn filter_one(
    common: &Common,
    config: &PipelineConfig,
    reference: &Reference,
    input: &Path,
    data: Option<&Path>,
    single: bool,
) -> CliResult<()> {
    let (geometry, in_format) = if is_volume_header(input) {
        (InputGeometry::Volume(read_volume(input, data)?), None)
    } else {
        let (mesh, f) = read_mesh(input)?;
        (InputGeometry::Mesh(mesh), Some(f))
    };
    let (mesh, report) = run_filter_pipeline_with_reference(&geometry, config, reference)?;
    write_mesh(
        common,
        input,
        "_filtered",
        in_format.unwrap_or(MeshFormat::Off),
        &mesh,
    )?;
    if single {
        emit_report(common, &report)
    } else {
        let path = common.output.join(format!("{}_report.json", stem(input)));
        fs::write(path, pretty(&report)?)?;
        Ok(())
    }
}

impl VolumeArgs {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(l) = self.label {
            config.label = l;
        }
    }
}

impl RepairArgs {
    fn apply(&self, config: &mut PipelineConfig) -> CliResult<()> {
        let r = &mut config.repair;
        if let Some(v) = self.merge_epsilon {
            r.merge_epsilon = v;
        }
        if let Some(v) = self.floating_diameter {
            r.floating_diameter = Some(v);
        }
        if let Some(v) = &self.nonmanifold_edge_strategy {
            r.nonmanifold_edge_strategy = parse_choice("--nonmanifold-edge-strategy", v)?;
        }
        if let Some(v) = &self.t_vertex_mode {
            r.t_vertex_mode = parse_choice("--t-vertex-mode", v)?;
        }
        if let Some(v) = self.split_offset {
            r.split_offset = Some(v);
        }
        Ok(())
    }
}

impl SmoothingArgs {
    fn apply(&self, config: &mut PipelineConfig) -> CliResult<()> {
        let s = &mut config.smoothing;
        if let Some(v) = self.iterations {
            s.iterations = v;
        }
        if let Some(v) = self.projection_tolerance {
            s.projection_tolerance = v;
        }
        if let Some(v) = &self.boundary_mode {
            s.boundary_mode = parse_choice("--boundary-mode", v)?;
        }
        Ok(())
    }
}

impl RegistrationArgs {
    fn apply(&self, config: &mut PipelineConfig) {
        let r = &mut config.registration;
        if let Some(v) = self.samples {
            r.sample_count = v;
        }
        if let Some(v) = self.outlier_weight {
            r.cpd.outlier_weight = v;
        }
        if let Some(v) = self.max_iterations {
            r.cpd.max_iterations = v;
        }
        if let Some(v) = self.tolerance {
            r.cpd.tolerance = v;
        }
        if self.no_scale {
            r.cpd.scale_enabled = false;
        }
        if self.no_registration {
            r.enabled = false;
        }
    }
}

impl MetricArgs {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(v) = self.threshold {
            config.metrics.threshold = v;
        }
        if let Some(v) = self.sampling_radius {
            config.metrics.sampling_radius = Some(v);
        }
    }
}

/// Parses a kebab-case choice through the same serde names the config uses.
fn parse_choice<T: DeserializeOwned>(flag: &str, value: &str) -> CliResult<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|e| CliError::Usage(format!("{flag}: {e}")))
}

fn load_config(common: &Common) -> CliResult<PipelineConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    Ok(config)
}

fn require_seed(config: &PipelineConfig) -> CliResult<u64> {
    config.seed.ok_or_else(|| {
        CliError::Usage(
            "this command is stochastic: pass --seed or set `seed` in the config".into(),
        )
    })
}

fn is_volume_header(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read_mesh(path: &Path) -> CliResult<(TriMesh, MeshFormat)> {
    let format = MeshFormat::from_path(path).ok_or_else(|| {
        CliError::Core(Error::Format(format!(
            "{}: unknown mesh extension (expected .off, .ply or .stl)",
            path.display()
        )))
    })?;
    Ok((load_mesh(path, format)?, format))
}

fn read_volume(header: &Path, data: Option<&Path>) -> CliResult<LabelVolume> {
    let data = data
        .map(Path::to_path_buf)
        .unwrap_or_else(|| header.with_extension("raw"));
    Ok(load_volume(header, &data)?)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".into())
}

fn output_format(common: &Common, input: Option<MeshFormat>) -> MeshFormat {
    common
        .format
        .map(MeshFormat::from)
        .or(input)
        .unwrap_or(MeshFormat::Off)
}

fn output_path(
    common: &Common,
    input: &Path,
    suffix: &str,
    format: MeshFormat,
) -> CliResult<PathBuf> {
    fs::create_dir_all(&common.output)?;
    Ok(common
        .output
        .join(format!("{}{suffix}.{}", stem(input), format.extension())))
}

fn write_mesh(
    common: &Common,
    input: &Path,
    suffix: &str,
    in_format: MeshFormat,
    mesh: &TriMesh,
) -> CliResult<()> {
    let format = output_format(common, Some(in_format));
    let path = output_path(common, input, suffix, format)?;
    save_mesh(mesh, &path, format)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> CliResult<String> {
    let mut json = serde_json::to_string_pretty(value).map_err(Error::from)?;
    json.push('\n');
    Ok(json)
}

fn emit_report<T: Serialize>(common: &Common, report: &T) -> CliResult<()> {
    write_report_text(common, &pretty(report)?)
}

fn write_report_text(common: &Common, text: &str) -> CliResult<()> {
    match &common.json_report {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn write_metrics_csv(
    report: &cartimesh::pipeline::MetricsReport,
    w: &mut Vec<u8>,
) -> io::Result<()> {
    match &report.distances {
        Some(d) => d.write_csv(w)?,
        None => writeln!(w, "metric,value")?,
    }
    if let Some(dice) = &report.dice {
        writeln!(w, "dice,{}", dice.dice)?;
    }
    Ok(())
}
