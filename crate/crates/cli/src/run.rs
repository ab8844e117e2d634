use std::path::PathBuf;

use doakit::corpus_io::{read_recording_with, write_submission};
use doakit::pipeline::run_pipeline;

use crate::config::{load_schema, Config};
use crate::output::Manifest;
use crate::{CliError, RunArgs};

/// `out.csv` → `out.manifest.json`.
pub fn manifest_path(out: &std::path::Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "submission".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = Config::load(args.config.as_deref())?;
    let p = &mut cfg.pipeline;
    if let Some(v) = args.localizer {
        p.localizer = v;
    }
    if let Some(v) = args.n_sources {
        p.n_sources = v;
    }
    if let Some(v) = args.tracker {
        p.tracker.tracker = v;
    }
    if let Some(v) = args.seed {
        p.tracker.seed = v;
    }
    if let Some(v) = args.grid_resolution {
        p.grid_resolution_deg = Some(v);
    }
    p.tracker.validate().map_err(CliError::usage)?;

    let schema = load_schema(args.schema.as_deref())?;
    let bundle = read_recording_with(&args.input, &schema).map_err(CliError::data)?;
    // configuration problems surface before any audio is processed
    cfg.pipeline.validate(&bundle.geometry).map_err(|e| {
        CliError::Usage(format!(
            "{:?} cannot run on array '{}': {e}",
            cfg.pipeline.localizer, bundle.meta.array
        ))
    })?;
    let clock = bundle.clock();
    if clock.is_empty() {
        return Err(CliError::Data(format!(
            "{}: audio and positions share no evaluation tick",
            args.input.display()
        )));
    }
    let out = run_pipeline(&bundle.audio, &bundle.geometry, &clock, &cfg.pipeline)
        .map_err(CliError::data)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        crate::output::create_dir(dir)?;
    }
    write_submission(&out.estimates, &args.out).map_err(CliError::data)?;
    Manifest::new("run", cfg.pipeline.tracker.seed, &cfg, &[&args.input])
        .write(&manifest_path(&args.out))?;
    println!(
        "{}: {} raw estimates, {} tracks, {} submission rows -> {}",
        bundle.meta.recording_id,
        out.raw.len(),
        out.tracks.len(),
        out.estimates.len(),
        args.out.display()
    );
    Ok(())
}
