use doakit::evaluate::{evaluate_recording, EvalConfig, Submission};
use doakit::geometry::ArrayGeometry;
use doakit::pipeline::{run_pipeline, PipelineConfig};
use doakit::simulate::{synthesize, task_preset_with_array};

#[test]
fn static_source_is_localized_and_tracked() {
    let cfg = task_preset_with_array(1, 4, ArrayGeometry::robot_head(), 4.0).unwrap();
    let scene = synthesize(&cfg).unwrap();
    let out = run_pipeline(&scene.audio, &scene.config.array, &scene.clock(), &PipelineConfig::default()).unwrap();
    assert!(!out.tracks.is_empty());
    let sub = Submission::from_estimates(&out.estimates).unwrap();
    let r = evaluate_recording(&scene.ground_truth(true).unwrap(), &sub, &EvalConfig::default()).unwrap().report;
    assert!(r.azimuth_error_mean_deg.unwrap() < 2.0, "{r:?}");
    assert!(r.p_d.unwrap() > 0.5, "{r:?}");
}
