use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bohrsom"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn data_rows(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn spectrum_rows_and_orders() {
    let dir = tempfile::tempdir().unwrap();
    let h = write_config(dir.path(), "h.toml", "family = \"harmonic\"\n");
    let out = run(&["spectrum", "--config", h.to_str().unwrap(), "--h", "0.1", "--order", "0,2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 5);
    for (n, row) in rows.iter().enumerate() {
        let e0: f64 = row[1].parse().unwrap();
        let e2: f64 = row[3].parse().unwrap();
        assert!((e0 - e2).abs() < 1e-10);
        assert!((e2 - 0.1 * (2 * n + 1) as f64).abs() < 1e-8);
    }

    let q = write_config(dir.path(), "q.toml", "family = \"quartic-well\"\n");
    let out = run(&["spectrum", "--config", q.to_str().unwrap(), "--h", "0.1", "--n-range", "0..4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(data_rows(&out).len(), 5);
}

#[test]
fn output_is_deterministic_and_json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.toml", "family = \"morse\"\nmorse = { A = 1.0, a = 1.0 }\n");
    let args = ["spectrum", "--config", cfg.to_str().unwrap(), "--h", "0.05", "--order", "1,2"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);

    let path = dir.path().join("out.json");
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json", "--out", path.to_str().unwrap()]);
    let j = run(&json_args);
    assert_eq!(j.status.code(), Some(0));
    assert!(j.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = data_rows(&a);
    let json_rows = v["rows"].as_array().unwrap();
    assert_eq!(json_rows.len(), rows.len());
    assert!(v["meta"]["manifest"]["orders"].is_array());
    for (r, jr) in rows.iter().zip(json_rows) {
        let csv_e: f64 = r[1].parse().unwrap();
        let json_e = jr["energy_order1"].as_f64().unwrap();
        assert!((json_e - csv_e).abs() <= 1e-12 * csv_e.abs().max(1.0));
    }
}

#[test]
fn error_paths_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let h = write_config(dir.path(), "h.toml", "family = \"harmonic\"\n");
    let hs = h.to_str().unwrap();

    let missing = run(&["spectrum", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());

    let bad = write_config(dir.path(), "bad.toml", "family = \"harmonic\"\ncolour = 3\n");
    assert_eq!(run(&["spectrum", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(run(&["verify", "--suite", "nonsense", "--config", hs]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--config", hs, "--h-list", "0.1"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--config", hs, "--h", "-0.1"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--config", hs, "--n-range", "4..2"]).status.code(), Some(2));

    // Level far above the well top of a Pöschl–Teller potential: solver failure.
    let pt = write_config(dir.path(), "pt.toml", "family = \"poschl-teller\"\nposchl-teller = { A = 1.0, a = 1.0 }\n");
    let out = run(&["spectrum", "--config", pt.to_str().unwrap(), "--h", "0.2", "--n-range", "0..40"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("quantization"));
}

#[test]
fn verify_suites() {
    let dir = tempfile::tempdir().unwrap();
    let h = write_config(dir.path(), "h.toml", "family = \"harmonic\"\n");
    let hs = h.to_str().unwrap();
    let out = run(&["verify", "--suite", "stokes", "--config", hs]);
    assert_eq!(out.status.code(), Some(0));
    assert!(data_rows(&out).iter().all(|r| r.last().unwrap() == "PASS"));

    let out = run(&["verify", "--suite", "oracle-compare", "--config", hs, "--h", "0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    // The imaginary-part chart overlap is a known violation; the exit code says so.
    let out = run(&["verify", "--suite", "charts", "--config", hs]);
    assert_eq!(out.status.code(), Some(1));
    let rows = data_rows(&out);
    assert!(rows.iter().filter(|r| r[0].starts_with("Re telescoping")).all(|r| r[3] == "PASS"));
    assert!(rows.iter().filter(|r| r[0].starts_with("D1 reduction")).all(|r| r[3] == "PASS"));

    let out = run(&["verify", "--suite", "residual", "--config", hs, "--h-list", "0.1,0.05,0.025"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn calibration_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let h = write_config(
        dir.path(),
        "h.toml",
        "family = \"harmonic\"\np1 = [[1.0, 1, 0]]\n",
    );
    let cal = dir.path().join("cal.json");
    std::fs::write(
        &cal,
        r#"{"sigma_gamma":-1.0,"sigma_p1sq":1.0,"sigma_p2":-1.0,"provenance":{"gamma":"g","p1sq":"p","p2":"q"}}"#,
    )
    .unwrap();
    let args = ["spectrum", "--config", h.to_str().unwrap(), "--h", "0.1", "--calibration", cal.to_str().unwrap()];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for (n, r) in data_rows(&out).iter().enumerate() {
        let e: f64 = r[1].parse().unwrap();
        assert!((e - (0.1 * (2 * n + 1) as f64 - 0.0025)).abs() < 1e-7);
    }
    // Flipping σ_p1sq moves the levels by h²/2.
    std::fs::write(
        &cal,
        r#"{"sigma_gamma":-1.0,"sigma_p1sq":-1.0,"sigma_p2":-1.0,"provenance":{"gamma":"g","p1sq":"p","p2":"q"}}"#,
    )
    .unwrap();
    let flipped = run(&args);
    let e: f64 = data_rows(&flipped)[0][1].parse().unwrap();
    assert!((e - (0.1 + 0.0025)).abs() < 1e-7);

    std::fs::write(&cal, r#"{"sigma_gamma":0.5}"#).unwrap();
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn quartic_band_sweep_converges() {
    let dir = tempfile::tempdir().unwrap();
    let q = write_config(dir.path(), "q.toml", "family = \"quartic-well\"\n");
    let out = run(&["sweep", "--config", q.to_str().unwrap(), "--h-list", "0.2,0.1,0.05,0.025", "--band", "0.5..2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&out);
    let fit = rows.last().unwrap();
    assert_eq!(fit[..2], ["fit".to_string(), "band".to_string()]);
    assert!(fit[5].parse::<f64>().unwrap() >= 2.8);

    let h = write_config(dir.path(), "h.toml", "family = \"harmonic\"\n");
    let out = run(&["sweep", "--config", h.to_str().unwrap(), "--h-list", "0.2,0.1,0.05", "--n-range", "0..2"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_rows(&out);
    assert!(rows.iter().filter(|r| r[0] == "fit").all(|r| r[5] == "exact"));
}
