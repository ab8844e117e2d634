use doakit::corpus_io::write_scene;
use doakit::simulate::{synthesize, task_preset_with_array};

use crate::config::Config;
use crate::output::{create_dir, Manifest};
use crate::{CliError, SimulateArgs};

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut cfg = Config::load(args.config.as_deref())?;
    let s = &mut cfg.simulate;
    if let Some(v) = args.task {
        s.task = v;
    }
    if let Some(v) = &args.array {
        s.array = v.clone();
    }
    if let Some(v) = args.duration {
        s.duration = v;
    }
    if let Some(v) = args.snr {
        s.snr_db = Some(v);
    }
    if let Some(v) = args.noise {
        s.noise = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    let array = cfg.validate_simulate()?;
    let s = &cfg.simulate;

    let mut scene_cfg =
        task_preset_with_array(s.task, cfg.seed, array, s.duration).map_err(CliError::usage)?;
    scene_cfg.snr_db = s.snr_db;
    scene_cfg.noise = s.noise;
    scene_cfg.speed_of_sound = cfg.pipeline.speed_of_sound;
    scene_cfg.validate().map_err(CliError::usage)?;
    let scene = synthesize(&scene_cfg).map_err(CliError::data)?;

    let id = args
        .id
        .clone()
        .unwrap_or_else(|| format!("task{}-seed{}", s.task, cfg.seed));
    create_dir(&args.out)?;
    write_scene(&scene, &args.out, &id).map_err(CliError::data)?;
    Manifest::new("simulate", cfg.seed, &cfg, &[]).write(&args.out.join("manifest.json"))?;
    println!(
        "wrote {} ({} channels, {} samples, {} sources) to {}",
        id,
        scene.audio.channel_count(),
        scene.audio.len(),
        scene.sources.len(),
        args.out.display()
    );
    Ok(())
}
