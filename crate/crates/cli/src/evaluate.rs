use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use doakit::corpus_io::{read_recording_with, read_submission, CorpusSchema};
use doakit::evaluate::{aggregate, evaluate_recording, EvalConfig, Evaluation};

use crate::config::{load_schema, Config};
use crate::output::{
    create_dir, metrics_header, metrics_row, summary_table, write_csv, write_file, Manifest,
    RecordingMetrics,
};
use crate::{CliError, EvaluateArgs};

struct Scored {
    recording_id: String,
    clock: Vec<f64>,
    evaluation: Evaluation,
}

fn score(
    truth: &Path,
    submission: &Path,
    cfg: &Config,
    eval: &EvalConfig,
    schema: &CorpusSchema,
) -> Result<Scored, CliError> {
    let bundle = read_recording_with(truth, schema).map_err(CliError::data)?;
    let gt = bundle
        .ground_truth(cfg.pipeline.speed_of_sound, cfg.evaluate.align_vaps)
        .map_err(CliError::data)?;
    let sub = read_submission(submission).map_err(CliError::data)?;
    let evaluation = evaluate_recording(&gt, &sub, eval).map_err(|e| {
        CliError::Data(format!(
            "{} against {}: {e}",
            submission.display(),
            truth.display()
        ))
    })?;
    Ok(Scored {
        recording_id: bundle.meta.recording_id,
        clock: gt.clock().to_vec(),
        evaluation,
    })
}

/// Scores every pair, one recording per worker thread.
fn score_all(
    pairs: &[(PathBuf, PathBuf)],
    cfg: &Config,
    eval: &EvalConfig,
    schema: &CorpusSchema,
) -> Vec<Result<Scored, CliError>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(pairs.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Scored, CliError>>>> =
        Mutex::new((0..pairs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((t, sub)) = pairs.get(i) else { break };
                let r = score(t, sub, cfg, eval, schema);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every pair scored"))
        .collect()
}

fn write_recording_report(dir: &Path, s: &Scored, with_series: bool) -> Result<(), CliError> {
    create_dir(dir)?;
    let r = &s.evaluation.report;
    write_csv(
        &dir.join("metrics.csv"),
        &metrics_header(r),
        &[metrics_row(&s.recording_id, r)],
    )?;
    let json = RecordingMetrics {
        recording_id: s.recording_id.clone(),
        report: r.clone(),
    };
    write_file(
        &dir.join("metrics.json"),
        &(serde_json::to_string_pretty(&json).map_err(CliError::data)? + "\n"),
    )?;
    let vap_rows: Vec<Vec<String>> = r
        .vaps
        .iter()
        .map(|v| {
            vec![
                (v.source + 1).to_string(),
                v.index.to_string(),
                v.start.to_string(),
                v.end.to_string(),
                v.timestamps.to_string(),
                v.valid.to_string(),
                v.mean_azimuth_error_deg
                    .map(|x| x.to_string())
                    .unwrap_or_default(),
                v.latency_s.map(|x| x.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    let vap_header = [
        "source_id",
        "vap",
        "start_s",
        "end_s",
        "timestamps",
        "valid",
        "mean_azimuth_error_deg",
        "latency_s",
    ]
    .map(String::from);
    write_csv(&dir.join("vaps.csv"), &vap_header, &vap_rows)?;
    if with_series {
        let mut header = vec!["time_s".to_string()];
        header.extend(
            s.evaluation
                .ospa
                .iter()
                .map(|o| format!("ospa_p{}_c{}", o.params.p, o.params.c)),
        );
        let rows: Vec<Vec<String>> = s
            .clock
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut row = vec![format!("{t:.9}")];
                row.extend(s.evaluation.ospa.iter().map(|o| o.values[i].to_string()));
                row
            })
            .collect();
        write_csv(&dir.join("ospa.csv"), &header, &rows)?;
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let mut cfg = Config::load(args.config.as_deref())?;
    let e = &mut cfg.evaluate;
    if let Some(v) = args.gate {
        e.gate_deg = v;
    }
    if let Some(v) = &args.ospa_p {
        e.ospa_p = v.clone();
    }
    if let Some(v) = args.ospa_c {
        e.ospa_c = v;
    }
    e.pd_per_source |= args.pd_per_source;
    e.align_vaps |= args.align_vaps;
    let eval = cfg.evaluate.to_eval_config()?;
    let schema = load_schema(args.schema.as_deref())?;
    if args.truth.len() != args.submission.len() {
        return Err(CliError::Usage(format!(
            "{} --truth paths but {} --submission paths",
            args.truth.len(),
            args.submission.len()
        )));
    }
    let pairs: Vec<(PathBuf, PathBuf)> = args
        .truth
        .iter()
        .cloned()
        .zip(args.submission.iter().cloned())
        .collect();
    let scored = score_all(&pairs, &cfg, &eval, &schema)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    create_dir(&args.out)?;
    if let [single] = scored.as_slice() {
        write_recording_report(&args.out, single, args.ospa_series)?;
    } else {
        for (k, s) in scored.iter().enumerate() {
            write_recording_report(
                &args.out.join(format!("{k:03}-{}", s.recording_id)),
                s,
                args.ospa_series,
            )?;
        }
        let reports: Vec<_> = scored.iter().map(|s| s.evaluation.report.clone()).collect();
        let mean = aggregate(&reports).expect("at least one report");
        let mut rows: Vec<Vec<String>> = scored
            .iter()
            .map(|s| metrics_row(&s.recording_id, &s.evaluation.report))
            .collect();
        rows.push(metrics_row("mean", &mean));
        write_csv(
            &args.out.join("aggregate.csv"),
            &metrics_header(&mean),
            &rows,
        )?;
    }
    let inputs: Vec<&Path> = pairs
        .iter()
        .flat_map(|(t, s)| [t.as_path(), s.as_path()])
        .collect();
    Manifest::new("evaluate", cfg.seed, &cfg, &inputs).write(&args.out.join("manifest.json"))?;

    let mut table: Vec<(String, &_)> = scored
        .iter()
        .map(|s| (s.recording_id.clone(), &s.evaluation.report))
        .collect();
    let mean = (scored.len() > 1).then(|| {
        aggregate(
            &scored
                .iter()
                .map(|s| s.evaluation.report.clone())
                .collect::<Vec<_>>(),
        )
    });
    if let Some(Some(m)) = &mean {
        table.push(("mean".into(), m));
    }
    print!("{}", summary_table(&table));
    Ok(())
}
