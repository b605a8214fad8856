use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use recov::dataset::{save_dataset, Dataset};
use recov::report::load_report;
use recov::synth::{gaussian_blobs, linear_hazard_survival, mushroom_like_table};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_recov"));
    c.env_remove("RECOV_JOBS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes blobs with ids prefixed by `prefix` so training and held-out sets
/// never share an id.
fn write_blobs(path: &Path, n: usize, d: usize, offset: f64, seed: u64, prefix: &str) {
    let b = gaussian_blobs::<f64>(n, d, offset, seed).unwrap();
    let data = Dataset::new(
        "blobs",
        (0..n).map(|i| format!("{prefix}{i}")).collect(),
        b.feature_names().to_vec(),
        b.features().to_vec(),
        b.labels().clone(),
    )
    .unwrap();
    save_dataset(&data, path).unwrap();
}

/// Mushroom-like records with an `id` column in front and the class as `label`.
fn write_table(path: &Path, n: usize, seed: u64) {
    let mut t = mushroom_like_table(n, seed).unwrap();
    t.headers[0] = "label".into();
    t.headers.insert(0, "id".into());
    for (i, r) in t.rows.iter_mut().enumerate() {
        r.insert(0, format!("r{i}"));
    }
    t.write(path).unwrap();
}

#[test]
fn plan_runs_prints_mushroom_plan() {
    let out = ok(&["plan-runs", "--n", "8124", "--eps", "0.1", "--k", "5", "--target", "2sigma", "--trials", "20000"]);
    assert!(out.contains("runs "), "{out}");
    assert!(out.contains("threshold"), "{out}");
    let json = ok(&["plan-runs", "--n", "8124", "--eps", "0.1", "--target", "2sigma", "--trials", "20000", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let runs = v["plan"]["n_runs"].as_u64().unwrap();
    // The normal-approximation plan lands near 7000 runs at this scale.
    assert!((5000..9000).contains(&runs), "{runs}");
}

#[test]
fn bad_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_blobs(&data, 50, 2, 1.0, 1, "s");
    let out = dir.path().join("r.json");
    let zero = run(&["recov", "--in", p(&data), "--runs", "0", "--separation", "10", "--out", p(&out)]);
    assert_eq!(zero.status.code(), Some(2));
    assert_eq!(run(&["recov", "--bogus"]).status.code(), Some(2));
    let missing = run(&["recov", "--in", "/nonexistent/x.csv", "--runs", "3", "--separation", "1", "--out", p(&out)]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&missing.stderr).is_empty());
    let no_eps = run(&["recov", "--in", p(&data), "--runs", "3", "--out", p(&out)]);
    assert_eq!(no_eps.status.code(), Some(2));
    let wrong_metric = run(&["recov", "--in", p(&data), "--runs", "3", "--metric", "cindex", "--separation", "1", "--out", p(&out)]);
    assert_eq!(wrong_metric.status.code(), Some(2));
}

#[test]
fn encode_inject_recov_report_retrain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let raw = d.join("raw.csv");
    write_table(&raw, 800, 3);
    let all = d.join("all.csv");
    let msg = ok(&["encode", "--in", p(&raw), "--out", p(&all), "--keep", "id,label"]);
    assert!(msg.contains("categorical"), "{msg}");
    // Encode once, then split so both parts share the dummy columns.
    let text = fs::read_to_string(&all).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let encoded = d.join("enc.csv");
    let held = d.join("held.csv");
    fs::write(&encoded, lines[..601].join("\n") + "\n").unwrap();
    fs::write(&held, [&lines[..1], &lines[601..]].concat().join("\n") + "\n").unwrap();

    let noisy = d.join("noisy.csv");
    let mask = d.join("mask.csv");
    let msg = ok(&[
        "inject-noise", "--in", p(&encoded), "--id-col", "id", "--eps", "0.1", "--seed", "4",
        "--out", p(&noisy), "--mask", p(&mask),
    ]);
    assert!(msg.contains("flipped 60 of 600"), "{msg}");

    let report = d.join("report.json");
    let msg = ok(&[
        "--quiet", "recov", "--in", p(&noisy), "--id-col", "id", "--eps", "0.1", "--runs", "300",
        "--seed", "5", "--out", p(&report), "--truth", p(&mask), "--no-timings",
    ]);
    assert!(msg.contains("300 runs"), "{msg}");
    assert!(msg.contains("F1"), "{msg}");
    assert!(!d.join("report.checkpoint.json").exists());
    let r = load_report(&report).unwrap();
    assert_eq!(r.per_sample.len(), 600);
    assert_eq!(r.run_trace.len(), 300);

    let msg = ok(&["report", "--in", p(&report)]);
    assert!(msg.contains("histogram"), "{msg}");
    let hist = fs::read_to_string(d.join("report.hist.csv")).unwrap();
    assert!(hist.starts_with("count,clean_freq,noisy_freq"), "{hist}");

    let msg = ok(&["clean-retrain", "--report", p(&report), "--heldout", p(&held), "--random-baseline"]);
    for line in ["baseline (all 600 samples)", "cleaned (", "random removal ("] {
        assert!(msg.contains(line), "{msg}");
    }
}

#[test]
fn fastrecov_report_has_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("d.csv");
    write_blobs(&data, 300, 4, 1.0, 6, "s");
    let noisy = d.join("n.csv");
    let mask = d.join("m.csv");
    ok(&["inject-noise", "--in", p(&data), "--id-col", "id", "--eps", "0.1", "--out", p(&noisy), "--mask", p(&mask)]);
    let report = d.join("f.json");
    ok(&["--quiet", "fastrecov", "--in", p(&noisy), "--id-col", "id", "--threshold", "pct:10", "--out", p(&report)]);
    let hist = d.join("f.csv");
    ok(&["report", "--in", p(&report), "--hist", p(&hist)]);
    assert_eq!(fs::read_to_string(&hist).unwrap().lines().count(), 301);
    let r = load_report(&report).unwrap();
    assert_eq!(r.detected_ids.len(), 30);
}

#[test]
fn survival_flow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("s.csv");
    let s = linear_hazard_survival::<f64>(200, &[1.0, -0.5], 0.3, 7).unwrap();
    save_dataset(&s, &data).unwrap();
    let noisy = d.join("n.csv");
    let mask = d.join("m.csv");
    let msg = ok(&[
        "inject-noise", "--in", p(&data), "--task", "surv", "--id-col", "id", "--eps", "0.1",
        "--out", p(&noisy), "--mask", p(&mask),
    ]);
    assert!(msg.contains("flipped 20 of 200"), "{msg}");
    let report = d.join("r.json");
    let msg = ok(&[
        "--quiet", "fastrecov", "--in", p(&noisy), "--task", "surv", "--id-col", "id", "--runs", "5",
        "--out", p(&report), "--truth", p(&mask),
    ]);
    assert!(msg.contains("5 runs; flagged 8 of 200"), "{msg}");
    let report = d.join("rc.json");
    ok(&[
        "--quiet", "recov", "--in", p(&noisy), "--task", "surv", "--id-col", "id", "--runs", "20",
        "--separation", "gmm", "--out", p(&report),
    ]);
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("d.csv");
    write_blobs(&data, 200, 3, 0.8, 8, "s");
    let noisy = d.join("n.csv");
    let mask = d.join("m.csv");
    ok(&["inject-noise", "--in", p(&data), "--id-col", "id", "--eps", "0.1", "--out", p(&noisy), "--mask", p(&mask)]);
    let recov = |jobs: &str, name: &str| {
        let out = d.join(name);
        ok(&[
            "--quiet", "--jobs", jobs, "recov", "--in", p(&noisy), "--id-col", "id", "--eps", "0.1", "--runs", "150",
            "--seed", "3", "--no-timings", "--out", p(&out),
        ]);
        fs::read(out).unwrap()
    };
    let a = recov("1", "a.json");
    assert_eq!(a, recov("1", "b.json"));
    assert_eq!(a, recov("4", "c.json"));
    let fast = |name: &str| {
        let out = d.join(name);
        ok(&["--quiet", "fastrecov", "--in", p(&noisy), "--id-col", "id", "--seed", "2", "--no-timings", "--out", p(&out)]);
        fs::read(out).unwrap()
    };
    assert_eq!(fast("f1.json"), fast("f2.json"));
    let sim = |jobs: &str, name: &str| {
        let out = d.join(name);
        ok(&["--jobs", jobs, "simulate", "--n", "500", "--eps", "0.1", "--runs", "400", "--seed", "9", "--out", p(&out)]);
        fs::read(out).unwrap()
    };
    assert_eq!(sim("1", "s1.csv"), sim("4", "s4.csv"));
}

#[cfg(unix)]
#[test]
fn interrupted_recov_resumes_to_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("d.csv");
    write_blobs(&data, 400, 3, 0.8, 10, "s");
    let ck = d.join("ck.json");
    let args = |out: &PathBuf, ck: Option<&PathBuf>| {
        let mut v: Vec<String> = [
            "--quiet", "--jobs", "1", "recov", "--in", p(&data), "--id-col", "id", "--runs", "3000",
            "--separation", "600", "--seed", "1", "--no-timings", "--out", p(out),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        if let Some(c) = ck {
            v.extend(["--checkpoint".to_string(), p(c).to_string()]);
        }
        v
    };
    let interrupted = d.join("i.json");
    let child = bin()
        .args(args(&interrupted, Some(&ck)))
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let start = Instant::now();
    while !ck.exists() {
        assert!(start.elapsed() < Duration::from_secs(60), "no checkpoint written");
        std::thread::sleep(Duration::from_millis(5));
    }
    // SAFETY: plain kill(2) on our own child.
    unsafe { libc::kill(child.id() as libc::pid_t, libc::SIGINT) };
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("interrupted"));
    assert!(!interrupted.exists());
    let partial: serde_json::Value = serde_json::from_str(&fs::read_to_string(&ck).unwrap()).unwrap();
    let done = partial["pool"]["runs"].as_u64().unwrap();
    assert!(done > 0 && done < 3000, "{done}");

    ok(&args(&interrupted, Some(&ck)).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    let straight = d.join("s.json");
    ok(&args(&straight, None).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    assert_eq!(fs::read(&interrupted).unwrap(), fs::read(&straight).unwrap());
}
