//! Acceptance criteria 1–11. Each criterion is one test that prints a
//! `criterion N: PASS|FAIL|SKIP` line; run with `--nocapture` to see them.
//!
//! Criterion 11 needs a real development recording: set
//! `DOAKIT_CORPUS_DIR` to its directory (and optionally
//! `DOAKIT_CORPUS_SCHEMA` to a schema file, `DOAKIT_CORPUS_SOURCES` to the
//! number of sources for MUSIC).

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use doakit::corpus_io::{
    format_submission, parse_submission, read_recording, write_recording, RecordingBundle,
    RecordingMeta, Split,
};
use doakit::evaluate::{
    evaluate_recording, munkres, ospa, EvalConfig, GroundTruth, OspaParams, Submission,
    SubmissionRow, VapTable,
};
use doakit::geometry::{wrap_angle, ArrayGeometry, Doa, Mat3, Pose, Trajectory, Vec3};
use doakit::localize::gcc_phat;
use doakit::pipeline::{run_pipeline, LocalizerKind, PipelineConfig};
use doakit::sigproc::{cross_power_spectrum, frame_signal, MultichannelAudio, Window};
use doakit::simulate::{synthesize, task_preset_with_array, Scene};
use doakit::track::{
    kf_predict, kf_update, pf_step, NoiseParams, ParticleSet, TrackState, TrackerKind,
};
use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};

fn verdict(n: u32, what: &str, start: Instant, failures: &[String], detail: &str) {
    let secs = start.elapsed().as_secs_f64();
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {n}: {status} ({secs:.2} s) {what}; {detail}");
    for f in failures.iter().take(10) {
        println!("    {f}");
    }
    assert!(
        failures.is_empty(),
        "criterion {n} failed: {} problem(s), first: {}",
        failures.len(),
        failures[0]
    );
}

fn angular_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d).to_degrees()
}

/// Every injection of `0..small` into `0..large`, each as a column list.
fn injections(small: usize, large: usize) -> Vec<Vec<usize>> {
    fn go(
        k: usize,
        small: usize,
        large: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if k == small {
            out.push(cur.clone());
            return;
        }
        for j in 0..large {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                go(k + 1, small, large, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(
        0,
        small,
        large,
        &mut vec![false; large],
        &mut Vec::new(),
        &mut out,
    );
    out
}

fn brute_ospa(x: &[f64], y: &[f64], p: f64, c: f64) -> f64 {
    let (a, b) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    if b.is_empty() {
        return 0.0;
    }
    let best = injections(a.len(), b.len())
        .iter()
        .map(|inj| {
            inj.iter()
                .enumerate()
                .map(|(i, &j)| angular_deg(a[i], b[j]).min(c).powf(p))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    ((best + (b.len() - a.len()) as f64 * c.powf(p)) / b.len() as f64).powf(1.0 / p)
}

#[test]
fn criterion_01_ospa_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(0..=4);
        let m = rng.random_range(0..=4);
        let draw = |k: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..k)
                .map(|_| match rng.random_range(0..5) {
                    // near the wrap
                    0 => PI - rng.random_range(0.0..0.1),
                    1 => -PI + rng.random_range(0.0..0.1),
                    _ => rng.random_range(-PI..PI),
                })
                .collect()
        };
        let a = draw(n, &mut rng);
        let b = draw(m, &mut rng);
        let p = [1.0, 2.0, 5.0, rng.random_range(1.0..6.0)][case % 4];
        let c = rng.random_range(5.0..120.0);
        let got = ospa(&a, &b, OspaParams::new(p, c).unwrap());
        let want = brute_ospa(&a, &b, p, c);
        worst = worst.max((got - want).abs());
        if (got - want).abs() > 1e-9 {
            failures.push(format!(
                "case {case}: |A|={n} |B|={m} p={p} c={c}: {got} vs {want}"
            ));
        }
    }
    if start.elapsed().as_secs_f64() >= 5.0 {
        failures.push(format!(
            "runtime {:.2} s ≥ 5 s",
            start.elapsed().as_secs_f64()
        ));
    }
    verdict(
        1,
        "OSPA equals brute-force injection search",
        start,
        &failures,
        &format!("1000 instances, max |Δ| {worst:.2e}"),
    );
}

#[test]
fn criterion_02_munkres_matches_permutations() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    for case in 0..1000 {
        let rows = rng.random_range(1..=7);
        let cols = rng.random_range(1..=7);
        let integer = case % 2 == 0;
        let cost: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| {
                        if integer {
                            rng.random_range(0..=60) as f64
                        } else {
                            rng.random_range(0.0..100.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let got = munkres(&cost).unwrap();
        let brute = if rows <= cols {
            injections(rows, cols)
                .iter()
                .map(|inj| {
                    inj.iter()
                        .enumerate()
                        .map(|(i, &j)| cost[i][j])
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        } else {
            injections(cols, rows)
                .iter()
                .map(|inj| {
                    inj.iter()
                        .enumerate()
                        .map(|(j, &i)| cost[i][j])
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        };
        // the reported pairs are a valid matching that attains the total
        let mut seen_r = vec![false; rows];
        let mut seen_c = vec![false; cols];
        for &(i, j) in &got.pairs {
            if std::mem::replace(&mut seen_r[i], true) || std::mem::replace(&mut seen_c[j], true) {
                failures.push(format!("case {case}: row or column used twice"));
            }
        }
        if got.pairs.len() != rows.min(cols) {
            failures.push(format!(
                "case {case}: {} pairs for {rows}×{cols}",
                got.pairs.len()
            ));
        }
        let exact = if integer {
            got.total == brute
        } else {
            (got.total - brute).abs() <= 1e-9 * brute.max(1.0)
        };
        if !exact {
            failures.push(format!(
                "case {case} ({rows}×{cols}): {} vs {brute}",
                got.total
            ));
        }
    }
    if start.elapsed().as_secs_f64() >= 10.0 {
        failures.push(format!(
            "runtime {:.2} s ≥ 10 s",
            start.elapsed().as_secs_f64()
        ));
    }
    verdict(
        2,
        "Munkres equals exhaustive permutation minimum",
        start,
        &failures,
        "1000 matrices up to 7×7",
    );
}

fn scene(task: u8, seed: u64, array: ArrayGeometry, duration: f64) -> Scene {
    synthesize(&task_preset_with_array(task, seed, array, duration).unwrap()).unwrap()
}

#[test]
fn criterion_03_self_evaluation() {
    let start = Instant::now();
    let sc = scene(6, 11, ArrayGeometry::robot_head(), 4.0);
    let truth = sc.ground_truth(true).unwrap();
    let e = evaluate_recording(&truth, &truth.as_submission(), &EvalConfig::default()).unwrap();
    let r = &e.report;
    let mut failures = Vec::new();
    let mut check = |name: &str, got: Option<f64>, want: f64| {
        if got != Some(want) {
            failures.push(format!("{name}: {got:?}, want {want}"));
        }
    };
    check("p_d", r.p_d, 1.0);
    check("FAR", r.far_recording, 0.0);
    check("FAR_vap", r.far_vap, 0.0);
    check("TL", r.track_latency_s, 0.0);
    check("TFR", r.tfr, 0.0);
    check("mean azimuth error", r.azimuth_error_mean_deg, 0.0);
    check("mean elevation error", r.elevation_error_mean_deg, 0.0);
    if r.false_estimates != 0 || r.missed != 0 {
        failures.push(format!("{} false, {} missed", r.false_estimates, r.missed));
    }
    for s in &e.ospa {
        if s.values.iter().any(|&v| v != 0.0) {
            failures.push(format!("OSPA p={} has a non-zero value", s.params.p));
        }
    }
    if r.valid == 0 || e.ospa.len() != 2 {
        failures.push("fixture is empty".into());
    }
    verdict(
        3,
        "ground truth scored against itself",
        start,
        &failures,
        &format!("{} valid pairs, 2 sources, moving array", r.valid),
    );
}

#[test]
fn criterion_04_gating_at_thirty_degrees() {
    let start = Instant::now();
    let truth = GroundTruth::new(
        vec![0.0],
        vec![vec![Doa::horizontal(10f64.to_radians())]],
        VapTable::new(vec![vec![(0.0, 0.5)]]).unwrap(),
        1.0,
    )
    .unwrap();
    let score = |err_deg: f64| {
        let row = SubmissionRow {
            time: 0.0,
            source_id: 1,
            azimuth: (10.0 + err_deg).to_radians(),
            elevation: None,
        };
        let r = evaluate_recording(
            &truth,
            &Submission::new(vec![row]).unwrap(),
            &EvalConfig::default(),
        )
        .unwrap()
        .report;
        (r.valid, r.false_estimates, r.missed)
    };
    let mut failures = Vec::new();
    if score(35.0) != (0, 1, 1) {
        failures.push(format!("35° error: {:?}, want (0, 1, 1)", score(35.0)));
    }
    if score(-35.0) != (0, 1, 1) {
        failures.push(format!("−35° error: {:?}, want (0, 1, 1)", score(-35.0)));
    }
    if score(25.0) != (1, 0, 0) {
        failures.push(format!("25° error: {:?}, want (1, 0, 0)", score(25.0)));
    }
    verdict(
        4,
        "35° pair is gated out",
        start,
        &failures,
        "(valid, false, missed) = (0, 1, 1)",
    );
}

fn pipeline_error(sc: &Scene, cfg: &PipelineConfig) -> (f64, f64) {
    let out = run_pipeline(&sc.audio, &sc.config.array, &sc.clock(), cfg).unwrap();
    let truth = sc.ground_truth(true).unwrap();
    let sub = Submission::from_estimates(&out.estimates).unwrap();
    let r = evaluate_recording(&truth, &sub, &EvalConfig::default())
        .unwrap()
        .report;
    (
        r.azimuth_error_mean_deg.unwrap_or(f64::INFINITY),
        r.p_d.unwrap_or(0.0),
    )
}

#[test]
fn criterion_05_task1_accuracy() {
    let start = Instant::now();
    let cases = [
        (
            "SRP-PHAT, robot head",
            ArrayGeometry::robot_head(),
            LocalizerKind::SrpPhat,
            2.0,
        ),
        (
            "MUSIC, robot head",
            ArrayGeometry::robot_head(),
            LocalizerKind::Music,
            2.0,
        ),
        (
            "GCC-PHAT + Kalman, DICIT 32 cm",
            ArrayGeometry::preset("dicit-32cm").unwrap(),
            LocalizerKind::GccPhat,
            2.0,
        ),
        (
            "pseudo-intensity, Eigenmike",
            ArrayGeometry::eigenmike(),
            LocalizerKind::PseudoIntensity,
            3.0,
        ),
    ];
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for (name, array, localizer, target) in cases {
        let t0 = Instant::now();
        let sc = scene(1, 0, array, 10.0);
        let cfg = PipelineConfig {
            localizer,
            ..Default::default()
        };
        let (err, pd) = pipeline_error(&sc, &cfg);
        let secs = t0.elapsed().as_secs_f64();
        details.push(format!("{name}: {err:.2}° (p_d {pd:.2}, {secs:.1} s)"));
        if !(err <= target) {
            failures.push(format!("{name}: mean error {err:.3}° > {target}°"));
        }
        if secs >= 30.0 {
            failures.push(format!("{name}: {secs:.1} s ≥ 30 s"));
        }
    }
    verdict(
        5,
        "task-1 accuracy, 20 dB, 10 s, seed 0",
        start,
        &failures,
        &details.join("; "),
    );
}

/// Task 3/5 scene whose source circles the array through ±180° in the
/// array's own frame.
fn crossing_scene(seed: u64) -> Scene {
    let task = if seed % 2 == 0 { 3 } else { 5 };
    let mut cfg = task_preset_with_array(task, seed, ArrayGeometry::robot_head(), 10.0).unwrap();
    let arr = cfg.array_trajectory.clone();
    let path = Trajectory::from_fn(10.0, 120.0, |t| {
        let pose = arr.interpolate(t).unwrap();
        let phi = 150f64.to_radians() + 6f64.to_radians() * t;
        Pose::from_yaw(
            pose.local_to_global(&Vec3::new(2.0 * phi.cos(), 2.0 * phi.sin(), 0.0)),
            0.0,
            t,
        )
    })
    .unwrap();
    cfg.sources[0].trajectory = path;
    synthesize(&cfg).unwrap()
}

#[test]
fn criterion_06_wrapped_kalman_through_the_wrap() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut errs = Vec::new();
    let cfg = PipelineConfig {
        tracker: doakit::track::LifecycleConfig {
            tracker: TrackerKind::WrappedKalman,
            ..Default::default()
        },
        ..Default::default()
    };
    for seed in 0..10 {
        let sc = crossing_scene(seed);
        let truth = sc.ground_truth(true).unwrap();
        let crosses = (1..truth.clock().len())
            .any(|i| (truth.doa(0, i).azimuth() - truth.doa(0, i - 1).azimuth()).abs() > PI);
        if !crosses {
            failures.push(format!("seed {seed}: truth never crosses ±180°"));
        }
        let out = run_pipeline(&sc.audio, &sc.config.array, &sc.clock(), &cfg).unwrap();
        let sub = Submission::from_estimates(&out.estimates).unwrap();
        let r = evaluate_recording(&truth, &sub, &EvalConfig::default())
            .unwrap()
            .report;
        let err = r.azimuth_error_mean_deg.unwrap_or(f64::INFINITY);
        errs.push(err);
        if !(err <= 5.0) {
            failures.push(format!("seed {seed}: mean error {err:.2}°"));
        }
        for tr in &out.tracks {
            for w in tr.states.windows(2) {
                let step = wrap_angle(w[1].1.azimuth() - w[0].1.azimuth())
                    .unwrap()
                    .abs();
                if step > PI / 2.0 {
                    failures.push(format!(
                        "seed {seed} track {}: {:.1}° jump at {:.3} s",
                        tr.id,
                        step.to_degrees(),
                        w[1].0
                    ));
                }
            }
        }
    }
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    verdict(
        6,
        "wrapped Kalman across ±180°",
        start,
        &failures,
        &format!(
            "10 scenes, mean error {mean:.2}°, max {:.2}°",
            errs.iter().cloned().fold(0.0, f64::max)
        ),
    );
}

#[test]
fn criterion_07_degradation_ordering() {
    let start = Instant::now();
    let cfg = PipelineConfig::default();
    let mut means = Vec::new();
    for task in [1u8, 3, 5] {
        let errs: Vec<f64> = (0..8)
            .map(|seed| {
                pipeline_error(&scene(task, seed, ArrayGeometry::robot_head(), 10.0), &cfg).0
            })
            .collect();
        means.push(errs.iter().sum::<f64>() / errs.len() as f64);
    }
    let mut failures = Vec::new();
    if !(means[0] <= means[1] && means[1] <= means[2]) {
        failures.push(format!("means not ordered: {means:?}"));
    }
    verdict(
        7,
        "SRP-PHAT + Kalman error grows from task 1 to 3 to 5",
        start,
        &failures,
        &format!(
            "mean over seeds 0–7: {:.3}° ≤ {:.3}° ≤ {:.3}°",
            means[0], means[1], means[2]
        ),
    );
}

/// Circular delay by `d` samples applied in the frequency domain.
fn fft_delay(x: &[f64], d: f64) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        // signed frequency index; the Nyquist bin keeps a real phase
        let f = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        let phase = if 2 * k == n { (PI * d).cos() } else { 1.0 };
        *b *= if 2 * k == n {
            Complex::new(phase, 0.0)
        } else {
            Complex::from_polar(1.0, -TAU * f * d / n as f64)
        };
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

#[test]
fn criterion_08_gcc_phat_delay_recovery() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    let (mut worst_int, mut worst_frac): (f64, f64) = (0.0, 0.0);
    for trial in 0..100 {
        let integer = trial % 2 == 0;
        let d = if integer {
            rng.random_range(-20..=20) as f64
        } else {
            rng.random_range(-20.0..20.0)
        };
        let n = 16_384;
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = fft_delay(&x, d);
        // 20 dB per channel
        let noise = 0.1;
        let mut noisy = |s: &[f64]| {
            s.iter()
                .map(|v| {
                    v + noise * {
                        let s: f64 = StandardNormal.sample(&mut rng);
                        s
                    }
                })
                .collect::<Vec<f64>>()
        };
        let audio = MultichannelAudio::new(vec![noisy(&y), noisy(&x)], 48_000.0, 0.0).unwrap();
        let frames = frame_signal(&audio, 2048, 1024, Window::Hann).unwrap();
        let cs = cross_power_spectrum(&frames, (0, 1), frames.len()).unwrap();
        let est = gcc_phat(&cs, 25.0, 16).unwrap().delay;
        let err = (est - d).abs();
        if integer {
            worst_int = worst_int.max(err);
            if err > 0.05 {
                failures.push(format!("trial {trial}: integer delay {d}: {est:.4}"));
            }
        } else {
            worst_frac = worst_frac.max(err);
            if err > 0.1 {
                failures.push(format!("trial {trial}: fractional delay {d:.4}: {est:.4}"));
            }
        }
    }
    verdict(
        8,
        "GCC-PHAT recovers delays at 20 dB SNR",
        start,
        &failures,
        &format!(
            "100 trials, worst integer {worst_int:.4}, worst fractional {worst_frac:.4} samples"
        ),
    );
}

#[test]
fn criterion_09_particle_filter_tracks_kalman() {
    // Linear regime: constant-velocity truth near 0.5 rad, far from ±π.
    // The Monte-Carlo error of a weighted particle mean is σ/√ESS ≥ σ/√I,
    // so the bound is applied to the per-sequence RMS of the normalized
    // difference |μ_pf − μ_kf|·√I/σ_kf rather than to every step.
    let start = Instant::now();
    let particles = 10_000;
    let steps = 50;
    let dt = 8.0 * 1024.0 / 48_000.0;
    let params = NoiseParams::default();
    let mut failures = Vec::new();
    let mut rms_all = Vec::new();
    let mut over = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let truth = |k: usize| 0.5 + 0.1 * dt * k as f64;
        let z0 = truth(0)
            + params.obs_std * {
                let s: f64 = StandardNormal.sample(&mut rng);
                s
            };
        let prior = Matrix2::new(params.obs_var(), 0.0, 0.0, 0.09);
        let mut kf = TrackState::new([z0, 0.0], prior, 1, 0.0).unwrap();
        let mut pf = ParticleSet::from_gaussian([z0, 0.0], &prior, particles, 1, &mut rng).unwrap();
        let mut sq = 0.0;
        for k in 1..=steps {
            let z = truth(k)
                + params.obs_std * {
                    let s: f64 = StandardNormal.sample(&mut rng);
                    s
                };
            kf = kf_update(
                &kf_predict(&kf, dt, params.process_noise).unwrap(),
                z,
                params.obs_var(),
            )
            .unwrap();
            pf = pf_step(&pf, z, dt, params, &mut rng).unwrap().set;
            let sigma = kf.covariance()[(0, 0)].sqrt();
            let norm = wrap_angle(pf.circular_mean() - kf.azimuth()).unwrap().abs()
                * (particles as f64).sqrt()
                / sigma;
            if norm > 3.0 {
                over += 1;
            }
            sq += norm * norm;
        }
        let rms = (sq / steps as f64).sqrt();
        rms_all.push(rms);
        if rms > 3.0 {
            failures.push(format!(
                "seed {seed}: RMS normalized difference {rms:.2} > 3"
            ));
        }
    }
    let worst = rms_all.iter().cloned().fold(0.0, f64::max);
    verdict(
        9,
        "particle mean within 3σ/√I of the Kalman mean",
        start,
        &failures,
        &format!(
            "20 seeds × 50 steps, I = 10⁴: worst per-seed RMS {worst:.2}, {:.1}% of single steps beyond 3",
            100.0 * over as f64 / (20 * steps) as f64
        ),
    );
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    let (a, b) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
    let (ca, sa, cb, sb) = (a.cos(), a.sin(), b.cos(), b.sin());
    let rz = Mat3::new(ca, -sa, 0.0, sa, ca, 0.0, 0.0, 0.0, 1.0);
    let rx = Mat3::new(1.0, 0.0, 0.0, 0.0, cb, -sb, 0.0, sb, cb);
    rz * rx
}

fn random_trajectory(rng: &mut ChaCha8Rng, rotate: bool) -> Trajectory {
    let n = rng.random_range(2..20);
    let poses = (0..n)
        .map(|k| {
            let p = Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-2.0..2.0),
            );
            let r = if rotate {
                random_rotation(rng)
            } else {
                Mat3::identity()
            };
            Pose::new(p, r, k as f64 / 120.0).unwrap()
        })
        .collect();
    Trajectory::new(poses, 120.0).unwrap()
}

fn random_bundle(rng: &mut ChaCha8Rng, case: usize) -> RecordingBundle {
    let channels = rng.random_range(2..=4);
    let len = rng.random_range(1..400);
    // values on the 24-bit grid, including both extremes
    let full = (1i64 << 23) as f64;
    let audio: Vec<Vec<f64>> = (0..channels)
        .map(|_| {
            (0..len)
                .map(|_| match rng.random_range(0..20) {
                    0 => -1.0,
                    1 => (full - 1.0) / full,
                    _ => rng.random_range(-(1i64 << 23)..(1i64 << 23)) as f64 / full,
                })
                .collect()
        })
        .collect();
    let mics = (0..channels)
        .map(|k| {
            Vec3::new(
                0.05 * k as f64 + rng.random_range(0.0..0.01),
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
            )
        })
        .collect();
    let n_sources = rng.random_range(0..=3);
    let sources: Vec<Trajectory> = (0..n_sources)
        .map(|_| random_trajectory(rng, false))
        .collect();
    let periods = (0..n_sources)
        .map(|_| {
            let mut t = rng.random_range(0.0..0.5);
            (0..rng.random_range(0..4))
                .map(|_| {
                    let s = t;
                    t += rng.random_range(0.01..1.0);
                    let e = t;
                    t += rng.random_range(0.01..1.0);
                    (s, e)
                })
                .collect()
        })
        .collect();
    RecordingBundle {
        meta: RecordingMeta {
            recording_id: format!("case{case}"),
            task: Some(rng.random_range(1..=6)),
            array: "arr".into(),
            split: Split::Dev,
            sources: (1..=n_sources).map(|k| k.to_string()).collect(),
            time_origin_s: [0.0, 1.5e9 + rng.random_range(0.0..1e6)][case % 2],
        },
        audio: MultichannelAudio::new(audio, 48_000.0, 0.0).unwrap(),
        geometry: ArrayGeometry::new("arr", mics).unwrap(),
        array_trajectory: random_trajectory(rng, true),
        sources: Some(sources),
        vaps: Some(VapTable::new(periods).unwrap()),
    }
}

fn same_trajectory(a: &Trajectory, b: &Trajectory, tol: f64) -> bool {
    a.samples().len() == b.samples().len()
        && a.samples().iter().zip(b.samples()).all(|(p, q)| {
            (p.timestamp() - q.timestamp()).abs() <= tol
                && (p.translation() - q.translation()).amax() <= tol
                && (p.rotation() - q.rotation()).amax() <= tol
        })
}

fn random_submission(rng: &mut ChaCha8Rng) -> Submission {
    let mut rows = Vec::new();
    let mut tick = 0u64;
    for _ in 0..rng.random_range(0..30) {
        tick += rng.random_range(1..50);
        let mut ids: Vec<u32> = (1..=6).filter(|_| rng.random_bool(0.4)).collect();
        if ids.is_empty() {
            ids.push(rng.random_range(1..100));
        }
        for id in ids {
            let az = match rng.random_range(0..6) {
                0 => -PI,
                1 => PI - 1e-12,
                _ => rng.random_range(-PI..PI),
            };
            let el = rng.random_bool(0.5).then(|| rng.random_range(0.0..=PI));
            rows.push(SubmissionRow {
                time: tick as f64 / 120.0,
                source_id: id,
                azimuth: az,
                elevation: el,
            });
        }
    }
    Submission::new(rows).unwrap()
}

#[test]
fn criterion_10_format_round_trips() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let tmp = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    for case in 0..1000 {
        let b = random_bundle(&mut rng, case);
        let dir = tmp.path().join(format!("r{case}"));
        write_recording(&b, &dir).unwrap();
        let back = read_recording(&dir).unwrap();
        let tol = 1e-9;
        if back.audio != b.audio {
            failures.push(format!("case {case}: audio differs"));
        }
        if back.geometry != b.geometry || back.meta != b.meta {
            failures.push(format!("case {case}: geometry or metadata differs"));
        }
        if !same_trajectory(&back.array_trajectory, &b.array_trajectory, tol) {
            failures.push(format!("case {case}: array trajectory differs"));
        }
        let src_ok = back
            .sources
            .as_ref()
            .unwrap()
            .iter()
            .zip(b.sources.as_ref().unwrap())
            .all(|(x, y)| same_trajectory(x, y, tol));
        if !src_ok || back.vaps != b.vaps {
            failures.push(format!("case {case}: sources or VAPs differ"));
        }
        std::fs::remove_dir_all(&dir).unwrap();

        let sub = random_submission(&mut rng);
        let text = format_submission(&sub);
        let parsed = parse_submission(&text, Path::new("mem")).unwrap();
        let ok = parsed.rows().len() == sub.rows().len()
            && parsed.rows().iter().zip(sub.rows()).all(|(p, s)| {
                (p.time - s.time).abs() <= 5e-10
                    && p.source_id == s.source_id
                    && angular_deg(p.azimuth, s.azimuth) <= 5e-7 + 1e-12
                    && (-PI..PI).contains(&p.azimuth)
                    && match (p.elevation, s.elevation) {
                        (Some(x), Some(y)) => (x - y).to_degrees().abs() <= 5e-7 + 1e-12,
                        (None, None) => true,
                        _ => false,
                    }
            })
            && format_submission(&parsed) == text;
        if !ok {
            failures.push(format!("case {case}: submission round trip differs"));
        }
    }
    verdict(
        10,
        "recording and submission round trips",
        start,
        &failures,
        "1000 recordings (bit-exact audio) and 1000 submissions (6-decimal angles)",
    );
}

#[test]
fn criterion_11_corpus_smoke() {
    let start = Instant::now();
    let Some(dir) = std::env::var_os("DOAKIT_CORPUS_DIR") else {
        println!("criterion 11: SKIP (set DOAKIT_CORPUS_DIR to a development recording to run it)");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let sub = tmp.path().join("music.csv");
    let rep = tmp.path().join("report");
    let n_sources = std::env::var("DOAKIT_CORPUS_SOURCES").unwrap_or_else(|_| "1".into());
    let schema: Vec<String> = std::env::var("DOAKIT_CORPUS_SCHEMA")
        .map(|s| vec!["--schema".into(), s])
        .unwrap_or_default();
    let bin = env!("CARGO_BIN_EXE_doakit");
    let dir = dir.to_string_lossy().into_owned();
    let mut failures = Vec::new();
    let run = Command::new(bin)
        .args([
            "run",
            "--input",
            &dir,
            "--localizer",
            "music",
            "--n-sources",
            &n_sources,
            "--out",
        ])
        .arg(&sub)
        .args(&schema)
        .output()
        .unwrap();
    if !run.status.success() {
        failures.push(format!(
            "run failed: {}",
            String::from_utf8_lossy(&run.stderr)
        ));
    } else {
        let eval = Command::new(bin)
            .args([
                "evaluate",
                "--truth",
                &dir,
                "--gate",
                "30",
                "--ospa-p",
                "1,5",
                "--ospa-c",
                "30",
                "--submission",
            ])
            .arg(&sub)
            .arg("--out")
            .arg(&rep)
            .args(&schema)
            .output()
            .unwrap();
        if !eval.status.success() {
            failures.push(format!(
                "evaluate failed: {}",
                String::from_utf8_lossy(&eval.stderr)
            ));
        } else {
            let json: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(rep.join("metrics.json")).unwrap())
                    .unwrap();
            let r = &json["report"];
            for key in ["p_d", "far_recording", "azimuth_error_mean_deg"] {
                if !r[key].is_null() && !r[key].as_f64().is_some_and(f64::is_finite) {
                    failures.push(format!("{key} is not finite: {}", r[key]));
                }
            }
            let header = std::fs::read_to_string(rep.join("metrics.csv")).unwrap();
            if !(header.contains("ospa_p1_c30_mean") && header.contains("ospa_p5_c30_mean")) {
                failures.push("OSPA columns missing".into());
            }
        }
    }
    verdict(
        11,
        "MUSIC baseline end to end on a corpus recording",
        start,
        &failures,
        &dir,
    );
}
