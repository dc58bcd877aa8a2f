use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn floquet(config: &Path, out: &Path, sub: &str, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floquet"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--subcommand", sub])
        .args(extra)
        .output()
        .expect("binary runs")
}

#[test]
fn charvals_json_lists_desk_one_roots() {
    let dir = tempfile::tempdir().unwrap();
    let out = floquet(&configs().join("desk1.toml"), dir.path(), "charvals", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("charvals.json")).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["subcommand"], "charvals");
    assert_eq!(doc["metadata"]["config_sha256"].as_str().unwrap().len(), 64);
    let rows = doc["rows"].as_array().unwrap();
    let real: Vec<f64> = rows
        .iter()
        .filter(|r| r["xi_im"].as_f64().unwrap().abs() < 1e-9)
        .map(|r| r["xi_re"].as_f64().unwrap())
        .collect();
    assert_eq!(real.len(), 2);
    assert!(real.iter().all(|x| (x.abs() - 1.0).abs() < 1e-10));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk1.toml");
    for sub in ["charvals", "modes", "dtn"] {
        assert!(floquet(&cfg, a.path(), sub, &[]).status.success());
        assert!(floquet(&cfg, b.path(), sub, &["--jobs", "3"]).status.success());
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert!(x == y, "{n:?} differs");
    }
}

#[test]
fn sweep_counts_jump_at_band_edges() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk1_sweep.toml");
    let out = floquet(&cfg, a.path(), "sweep", &["--jobs", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(floquet(&cfg, b.path(), "sweep", &["--jobs", "1"]).status.success());
    let text = std::fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert_eq!(text, std::fs::read_to_string(b.path().join("sweep.csv")).unwrap());

    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (iw, ir) = (col("omega2"), col("n_real"));
    let mut points = Vec::new();
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        points.push((f[iw].parse::<f64>().unwrap(), f[ir].parse::<usize>().unwrap()));
    }
    assert_eq!(points.len(), 41);
    for (w, n) in points {
        let want = if w < 1.0 - 1e-9 { 0 } else if w < 4.0 - 1e-9 { 2 } else { 4 };
        assert_eq!(n, want, "omega2 = {w}");
    }
}

#[test]
fn verify_passes_at_band_edge() {
    let dir = tempfile::tempdir().unwrap();
    let out = floquet(&configs().join("desk2.toml"), dir.path(), "verify", &[]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
    assert!(stdout.contains("monodromy"));
}

#[test]
fn verify_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    let mut text = std::fs::read_to_string(configs().join("desk1.toml")).unwrap();
    text.push_str("\n[numerics.tolerances]\nkernel = 1e-30\n");
    std::fs::write(&cfg, text).unwrap();
    let out = floquet(&cfg, dir.path(), "verify", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL characteristic-values"));
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[geometry]\nwidth = 1.0\nboundary = \"dirichlet\"\n\n[physics]\nomega2 = -3.0\n\n\
         [physics.permittivity]\nkind = \"constant\"\nvalue = 1.0\n\n[numerics]\nm1 = 2\nm2 = 4\n",
    )
    .unwrap();
    let out = floquet(&cfg, dir.path(), "charvals", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 6"), "{err}");

    std::fs::write(&cfg, "[geometry]\nwidth = 1.0\nbogus = 3\n").unwrap();
    let out = floquet(&cfg, dir.path(), "charvals", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}
