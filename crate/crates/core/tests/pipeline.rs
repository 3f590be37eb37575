use cartimesh::metrics::surface_distance_stats;
use cartimesh::pipeline::{
    run_filter_pipeline, run_filter_pipeline_with_reference, run_metrics, InputGeometry,
    MetricsConfig, PipelineConfig, Reference, RegistrationConfig,
};
use cartimesh::sampling::SamplingParams;
use cartimesh::shapes::{grid, icosphere};
use cartimesh::volume::ball;
use cartimesh::Error;

fn config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        seed: Some(seed),
        registration: RegistrationConfig {
            sample_count: 500,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn clean_sphere_output_stays_within_tolerance() {
    let sphere = icosphere(3.0, 4);
    let cfg = config(9);
    let (out, _) = run_filter_pipeline(&InputGeometry::Mesh(sphere.clone()), &cfg).unwrap();
    let h = surface_distance_stats(&out, &sphere, &SamplingParams::with_radius(1, 0.1), 1.0)
        .unwrap()
        .hausdorff;
    assert!(h < cfg.smoothing.projection_tolerance + 0.02, "{h}");
}

#[test]
fn report_echoes_parameters_and_reference() {
    let sphere = icosphere(2.0, 3);
    let reference = Reference {
        mesh: Some(icosphere(2.0, 4)),
        volume: None,
    };
    let cfg = config(4);
    let (_, report) =
        run_filter_pipeline_with_reference(&InputGeometry::Mesh(sphere), &cfg, &reference).unwrap();
    assert_eq!(report.config, cfg);
    assert!(report.reference_distances.is_some());
    assert!(report.reference_dice.is_none());
    assert!(report.timings.is_none());
    let json = serde_json::to_value(&report).unwrap();
    for key in [
        "config",
        "input",
        "repair",
        "smoothing",
        "registration",
        "distances",
    ] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn stage_failures_name_the_stage() {
    // A flat patch cannot be registered: both clouds are coplanar.
    let plane = grid(10, 10, 0.5, 0.0, 0.0, 0.0);
    let err = run_filter_pipeline(&InputGeometry::Mesh(plane), &config(1)).unwrap_err();
    assert!(matches!(err.root(), Error::DegenerateInput(_)));
    assert!(err.to_string().starts_with("registration"), "{err}");
}

#[test]
fn disabling_registration_skips_it() {
    let mut cfg = config(2);
    cfg.registration.enabled = false;
    let (_, report) = run_filter_pipeline(&InputGeometry::Mesh(icosphere(1.0, 3)), &cfg).unwrap();
    assert!(report.registration.is_none());
}

#[test]
fn metrics_of_identical_inputs() {
    let m = icosphere(1.0, 3);
    let v = ball(12, 4.0, 1);
    let report = run_metrics(
        Some((&m, &m)),
        Some((&v, &v)),
        1,
        3,
        &MetricsConfig::default(),
    )
    .unwrap();
    assert_eq!(report.dice.unwrap().dice, 1.0);
    let d = report.distances.unwrap();
    assert!(d.hausdorff < 1e-12 && d.mean_distance < 1e-12);
}

#[test]
fn offset_planes_exceed_threshold_everywhere() {
    let a = grid(8, 8, 0.5, 0.0, 0.0, 1.5);
    let b = grid(8, 8, 0.5, 0.0, 0.0, 0.0);
    let report = run_metrics(Some((&a, &b)), None, 1, 1, &MetricsConfig::default()).unwrap();
    assert_eq!(
        report.distances.unwrap().area_fraction_over_threshold,
        100.0
    );
}

#[test]
fn volume_input_with_reference_volume() {
    let v = ball(24, 8.0, 1);
    let reference = Reference {
        mesh: None,
        volume: Some(v.clone()),
    };
    let (_, report) =
        run_filter_pipeline_with_reference(&InputGeometry::Volume(v), &config(5), &reference)
            .unwrap();
    assert!(report.reference_dice.unwrap().dice > 0.95);
}
