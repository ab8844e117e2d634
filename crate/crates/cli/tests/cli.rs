use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use doakit::corpus_io::{format_submission, read_recording, read_submission, read_wav};
use doakit::evaluate::{Submission, SubmissionRow};
use tempfile::TempDir;

fn doakit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doakit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = doakit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, task: &str, seed: &str, duration: &str) -> PathBuf {
    let out = dir.join(format!("t{task}-s{seed}-{duration}"));
    ok(&[
        "simulate",
        "--task",
        task,
        "--seed",
        seed,
        "--duration",
        duration,
        "--out",
        s(&out),
    ]);
    out
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn metrics(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

/// Replaces the source path with a fixed point so truth angles are exact
/// on the 6-decimal submission grid.
fn pin_source(rec: &Path, x: f64, y: f64) {
    let path = rec.join("position_source_1.txt");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let mut out = format!("{}\n", lines.next().unwrap());
    for l in lines {
        let t = l.split_whitespace().next().unwrap();
        out.push_str(&format!("{t} {x} {y} 0\n"));
    }
    fs::write(path, out).unwrap();
}

fn write_rows(path: &Path, rows: Vec<SubmissionRow>) {
    fs::write(path, format_submission(&Submission::new(rows).unwrap())).unwrap();
}

fn truth_submission(rec: &Path) -> Submission {
    read_recording(rec)
        .unwrap()
        .ground_truth(343.0, false)
        .unwrap()
        .as_submission()
}

#[test]
fn simulate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&[
            "simulate",
            "--task",
            "1",
            "--seed",
            "7",
            "--duration",
            "2",
            "--out",
            s(d),
        ]);
    }
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.len() >= 6);
    assert_eq!(fa, fb);
}

#[test]
fn invalid_task_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = doakit(&["simulate", "--task", "9", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn ten_seconds_is_480000_samples() {
    let tmp = TempDir::new().unwrap();
    let rec = simulate(tmp.path(), "1", "0", "10");
    let audio = read_wav(&rec.join("audio_array_robot-head.wav")).unwrap();
    assert_eq!(audio.sample_rate_hz(), 48_000.0);
    assert!(audio.channels().iter().all(|c| c.len() == 480_000));
}

#[test]
fn srp_kalman_run_covers_every_vap() {
    let tmp = TempDir::new().unwrap();
    let rec = simulate(tmp.path(), "1", "3", "10");
    let sub_path = tmp.path().join("out/sub.csv");
    ok(&[
        "run",
        "--input",
        s(&rec),
        "--localizer",
        "srp-phat",
        "--tracker",
        "kalman",
        "--out",
        s(&sub_path),
    ]);
    assert!(tmp.path().join("out/sub.manifest.json").exists());

    let sub = read_submission(&sub_path).unwrap();
    let vaps = read_recording(&rec).unwrap().vaps.unwrap();
    let clock = read_recording(&rec).unwrap().clock();
    let times: BTreeSet<u64> = sub
        .rows()
        .iter()
        .map(|r| (r.time * 120.0).round() as u64)
        .collect();
    let mut covered = 0;
    let mut total = 0;
    for &(a, b) in vaps.periods(0) {
        let ticks: Vec<u64> = clock
            .iter()
            .filter(|&&t| t >= a && t <= b)
            .map(|t| (t * 120.0).round() as u64)
            .collect();
        let hit = ticks.iter().filter(|k| times.contains(k)).count();
        assert!(hit >= 1, "VAP ({a}, {b}) has no estimate");
        covered += hit;
        total += ticks.len();
    }
    assert!(
        covered as f64 >= 0.7 * total as f64,
        "{covered}/{total} VAP ticks carry estimates"
    );
}

#[test]
fn music_separates_two_sources() {
    let tmp = TempDir::new().unwrap();
    let rec = simulate(tmp.path(), "4", "1", "10");
    let sub_path = tmp.path().join("sub.csv");
    ok(&[
        "run",
        "--input",
        s(&rec),
        "--localizer",
        "music",
        "--n-sources",
        "2",
        "--out",
        s(&sub_path),
    ]);
    let sub = read_submission(&sub_path).unwrap();
    let ids: BTreeSet<u32> = sub.rows().iter().map(|r| r.source_id).collect();
    assert!(ids.len() >= 2, "ids {ids:?}");
    // two tracks are alive at once somewhere
    let mut per_tick = std::collections::BTreeMap::<u64, usize>::new();
    for r in sub.rows() {
        *per_tick.entry((r.time * 120.0).round() as u64).or_default() += 1;
    }
    assert!(per_tick.values().any(|&n| n >= 2));
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let out = doakit(&[
        "run",
        "--input",
        s(&tmp.path().join("nope")),
        "--out",
        s(&tmp.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn incompatible_localizer_fails_before_processing() {
    let tmp = TempDir::new().unwrap();
    let rec = tmp.path().join("dicit");
    ok(&[
        "simulate",
        "--task",
        "1",
        "--array",
        "dicit",
        "--duration",
        "2",
        "--out",
        s(&rec),
    ]);
    let sub = tmp.path().join("x.csv");
    let out = doakit(&[
        "run",
        "--input",
        s(&rec),
        "--localizer",
        "pseudo-intensity",
        "--out",
        s(&sub),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("spherical") && err.contains("dicit"), "{err}");
    assert!(out.stdout.is_empty() && !sub.exists());
}

#[test]
fn self_evaluation_is_perfect() {
    let tmp = TempDir::new().unwrap();
    let rec = simulate(tmp.path(), "1", "5", "3");
    pin_source(&rec, 2.0, 2.0);
    let sub = tmp.path().join("truth.csv");
    write_rows(&sub, truth_submission(&rec).rows().to_vec());
    let rep = tmp.path().join("rep");
    let stdout = ok(&[
        "evaluate",
        "--truth",
        s(&rec),
        "--submission",
        s(&sub),
        "--ospa-series",
        "--out",
        s(&rep),
    ]);
    assert!(stdout.contains("p_d"));
    let m = &metrics(&rep)["report"];
    assert_eq!(m["p_d"], 1.0);
    assert!(m["azimuth_error_mean_deg"].as_f64().unwrap() < 1e-9);
    assert!(m["elevation_error_mean_deg"].as_f64().unwrap() < 1e-9);
    assert_eq!(m["far_recording"], 0.0);
    assert_eq!(m["tfr"], 0.0);
    assert_eq!(m["track_latency_s"], 0.0);
    let series = fs::read_to_string(rep.join("ospa.csv")).unwrap();
    for line in series.lines().skip(1) {
        for v in line.split(',').skip(1) {
            assert!(v.parse::<f64>().unwrap() < 1e-9, "{line}");
        }
    }
}

#[test]
fn five_degree_bias_is_measured_exactly() {
    let tmp = TempDir::new().unwrap();
    let rec = simulate(tmp.path(), "1", "6", "3");
    pin_source(&rec, 2.0, 2.0);
    let rows: Vec<SubmissionRow> = truth_submission(&rec)
        .rows()
        .iter()
        .map(|r| SubmissionRow {
            azimuth: r.azimuth + 5f64.to_radians(),
            elevation: None,
            ..*r
        })
        .collect();
    let sub = tmp.path().join("biased.csv");
    write_rows(&sub, rows);
    let rep = tmp.path().join("rep");
    ok(&[
        "evaluate",
        "--truth",
        s(&rec),
        "--submission",
        s(&sub),
        "--out",
        s(&rep),
    ]);
    let m = &metrics(&rep)["report"];
    let e = m["azimuth_error_mean_deg"].as_f64().unwrap();
    assert!((e - 5.0).abs() <= 1e-9, "{e}");
    assert_eq!(m["p_d"], 1.0);
}

#[test]
fn ospa_flags_yield_both_columns() {
    let tmp = TempDir::new().unwrap();
    let rec = simulate(tmp.path(), "1", "2", "2");
    let sub = tmp.path().join("sub.csv");
    write_rows(&sub, Vec::new());
    let rep = tmp.path().join("rep");
    ok(&[
        "evaluate",
        "--truth",
        s(&rec),
        "--submission",
        s(&sub),
        "--ospa-p",
        "1,5",
        "--ospa-c",
        "30",
        "--out",
        s(&rep),
    ]);
    let header = fs::read_to_string(rep.join("metrics.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(
        header.contains("ospa_p1_c30_mean") && header.contains("ospa_p5_c30_mean"),
        "{header}"
    );
    // nothing submitted: every active tick costs the cutoff
    let m = &metrics(&rep)["report"];
    assert_eq!(m["p_d"], 0.0);
    assert!(m["ospa"][0]["mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn clock_mismatch_names_the_timestamp() {
    let tmp = TempDir::new().unwrap();
    let rec = simulate(tmp.path(), "1", "2", "2");
    let sub = tmp.path().join("sub.csv");
    write_rows(
        &sub,
        vec![SubmissionRow {
            time: 0.123456789,
            source_id: 1,
            azimuth: 0.0,
            elevation: None,
        }],
    );
    let out = doakit(&[
        "evaluate",
        "--truth",
        s(&rec),
        "--submission",
        s(&sub),
        "--out",
        s(&tmp.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0.123456789"));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let rec = simulate(tmp.path(), "1", "1", "2");
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[pipeline]\nlocalizer = \"music\"\nn_sources = 2\n\n[pipeline.tracker]\ntracker = \"wrapped-kalman\"\n")
        .unwrap();
    let sub = tmp.path().join("sub.csv");
    ok(&[
        "run",
        "--config",
        s(&cfg),
        "--n-sources",
        "1",
        "--input",
        s(&rec),
        "--out",
        s(&sub),
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("sub.manifest.json")).unwrap())
            .unwrap();
    let p = &manifest["config"]["pipeline"];
    assert_eq!(p["localizer"], "music");
    assert_eq!(p["n_sources"], 1);
    assert_eq!(p["tracker"]["tracker"], "wrapped-kalman");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);

    fs::write(&cfg, "[pipeline]\nlocaliser = \"music\"\n").unwrap();
    let out = doakit(&[
        "run",
        "--config",
        s(&cfg),
        "--input",
        s(&rec),
        "--out",
        s(&sub),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn batch_evaluation_and_report() {
    let tmp = TempDir::new().unwrap();
    let r1 = simulate(tmp.path(), "1", "8", "2");
    let r2 = simulate(tmp.path(), "3", "9", "2");
    let (s1, s2) = (tmp.path().join("s1.csv"), tmp.path().join("s2.csv"));
    write_rows(&s1, truth_submission(&r1).rows().to_vec());
    write_rows(&s2, Vec::new());
    let rep = tmp.path().join("rep");
    ok(&[
        "evaluate",
        "--truth",
        s(&r1),
        "--submission",
        s(&s1),
        "--truth",
        s(&r2),
        "--submission",
        s(&s2),
        "--out",
        s(&rep),
    ]);
    let agg = fs::read_to_string(rep.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 4);
    let last = agg.lines().last().unwrap();
    assert!(last.starts_with("mean,"));

    let out = tmp.path().join("report.csv");
    let stdout = ok(&["report", s(&rep), "--out", s(&out)]);
    assert!(stdout.contains("task1-seed8") && stdout.contains("mean"));
    let table = fs::read_to_string(&out).unwrap();
    // p_d column: 1 and 0 average to 0.5
    let header: Vec<&str> = table.lines().next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == "p_d").unwrap();
    assert_eq!(
        table.lines().last().unwrap().split(',').nth(k).unwrap(),
        "0.5"
    );
}

#[test]
fn evaluation_split_runs_but_cannot_be_scored() {
    let tmp = TempDir::new().unwrap();
    let rec = simulate(tmp.path(), "1", "4", "2");
    let meta = rec.join("meta.toml");
    fs::write(
        &meta,
        fs::read_to_string(&meta)
            .unwrap()
            .replace("split = \"dev\"", "split = \"eval\""),
    )
    .unwrap();
    let sub = tmp.path().join("sub.csv");
    ok(&["run", "--input", s(&rec), "--out", s(&sub)]);
    let out = doakit(&[
        "evaluate",
        "--truth",
        s(&rec),
        "--submission",
        s(&sub),
        "--out",
        s(&tmp.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
