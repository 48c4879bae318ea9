use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_motionlink"))
}

fn fixture(name: &str) -> String {
    format!("{}/../core/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn analyze_empty_log_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.jsonl");
    std::fs::write(&p, "").unwrap();
    let out = bin().arg("analyze").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("EmptyLog"));
}

#[test]
fn missing_file_is_exit_2_and_bad_flag_exit_1() {
    let out = bin().args(["analyze", "/definitely/not/here.jsonl"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["sim", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["sim", "--delay", "2.4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
}

#[test]
fn inspect_zero_frame_shows_checksum() {
    let out = bin()
        .args([
            "inspect",
            &fixture("zero_motion.hex"),
            "--secret",
            "motionlink-fixture",
            "--salt",
            "0102030405060708",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0x190A55AD"), "{text}");
    assert!(text.contains("verdict: ok"));

    let out = bin().args(["inspect", &fixture("zero_motion.hex")]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn inspect_accepts_hex_argument() {
    let hex = std::fs::read_to_string(fixture("zero_motion_integrity.hex")).unwrap();
    let out = bin().args(["inspect", hex.trim()]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("integrity only"));
}

#[test]
fn analyze_reproduces_sim_report() {
    let dir = tempfile::tempdir().unwrap();
    let sim = bin()
        .args(["sim", "--frames", "300", "--gestures", "3", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(sim.status.success());
    let merged = bin()
        .arg("analyze")
        .arg(dir.path().join("merged.jsonl"))
        .output()
        .unwrap();
    assert_eq!(merged.stdout, sim.stdout);
    let joined = bin()
        .arg("analyze")
        .arg(dir.path().join("controller.jsonl"))
        .arg("--host")
        .arg(dir.path().join("host.jsonl"))
        .output()
        .unwrap();
    assert_eq!(joined.stdout, sim.stdout);
}

#[test]
fn config_file_and_trace_replay() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let gen = bin()
        .args([
            "gen-trace",
            "--duration",
            "20",
            "--gestures",
            "3",
            "--noise",
            "0.05",
            "--trace-seed",
            "3",
            "--out",
        ])
        .arg(&trace)
        .output()
        .unwrap();
    assert!(gen.status.success());
    let cfg = dir.path().join("sim.toml");
    std::fs::write(
        &cfg,
        "frames = 200\n[link]\nseed = 9\n[host_clock]\noffset_ms = 500.0\n",
    )
    .unwrap();
    let out = bin()
        .args(["sim", "--format", "json", "--config"])
        .arg(&cfg)
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(a["counters"]["sent"], 200);
    assert_eq!(a["counters"]["haptic_sent"], 3);
    // 500 ms host offset shows up in raw latency only
    assert!(a["raw"]["mean_ms"].as_f64().unwrap() > 550.0);
    assert!(a["normalized"]["max_ms"].as_f64().unwrap() < 20.0);

    std::fs::write(&cfg, "frame = 200\n").unwrap();
    let out = bin().args(["sim", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn csv_report_format() {
    let out = bin()
        .args(["sim", "--frames", "50", "--format", "csv"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("series,mean_ms,p95_ms,max_ms,min_ms,std_ms,n_raw,n_kept,n_removed")
    );
    assert!(lines.next().unwrap().starts_with("raw,"));
}
