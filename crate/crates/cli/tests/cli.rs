use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn geotomo(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geotomo"));
    cmd.args(args)
        .arg("--out")
        .arg(out)
        .env_remove("GEOTOMO_THREADS");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn missing_config_exits_2_and_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere.json");
    let out = geotomo(&["forward"], Some(&missing), &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.json"));
}

#[test]
fn invalid_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), r#"{"solver": {"tolerance": -1.0}}"#);
    assert_eq!(
        geotomo(&["forward"], Some(&c), &tmp.path().join("out"))
            .status
            .code(),
        Some(2)
    );
    let c = write_config(tmp.path(), r#"{"mesh_spacing": "coarse"}"#);
    assert_eq!(
        geotomo(&["forward"], Some(&c), &tmp.path().join("out"))
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn non_simple_metric_exits_3_unless_forced() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(
        tmp.path(),
        r#"{"geometry": {"family": "conformal-bump", "center": [0.0, 0.0], "amplitude": 2.0, "width": 0.2},
            "mesh_spacing": 0.25, "fan_beam": {"n_beta": 12, "n_theta": 6}}"#,
    );
    let out = geotomo(&["ellipticity"], Some(&c), &tmp.path().join("a"));
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!tmp.path().join("a").join("manifest.json").exists());
}

#[test]
fn forward_of_the_metric_pair_gives_chord_lengths() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(
        tmp.path(),
        r#"{"geometry": {"family": "euclidean"}, "attenuation": {"family": "zero"},
            "mesh_spacing": 0.0625, "fan_beam": {"n_beta": 24, "n_theta": 12},
            "phantom": {"kind": "metric-pair"}}"#,
    );
    let dir = tmp.path().join("out");
    let out = geotomo(&["forward", "--threads", "1"], Some(&c), &dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let data = fs::read_to_string(dir.join("data.csv")).unwrap();
    let mut rows = 0;
    for line in data.lines().skip(1).step_by(7) {
        let cols: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let (theta, re, im) = (cols[3], cols[4], cols[5]);
        assert!((re - 2.0 * theta.cos()).abs() < 1e-4, "{line}");
        assert!(im.abs() < 1e-12);
        rows += 1;
    }
    assert!(rows > 10);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["file"].as_str().unwrap())
        .collect();
    for f in [
        "config.json",
        "simplicity.json",
        "nodes.csv",
        "triangles.csv",
        "phantom.csv",
        "data.csv",
    ] {
        assert!(listed.contains(&f), "{f} missing from {listed:?}");
    }
    assert_eq!(manifest["command"], "forward");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn adjoint_reads_data_written_by_forward() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(
        tmp.path(),
        r#"{"mesh_spacing": 0.125, "fan_beam": {"n_beta": 24, "n_theta": 12}, "n_dir": 32}"#,
    );
    let fwd = tmp.path().join("fwd");
    assert!(geotomo(&["forward"], Some(&c), &fwd).status.success());
    let data = fwd.join("data.csv");
    let adj = tmp.path().join("adj");
    let out = geotomo(
        &["adjoint", "--data", data.to_str().unwrap()],
        Some(&c),
        &adj,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(adj.join("adjoint.csv").exists());

    // Same data through the phantom path gives the same file.
    let again = tmp.path().join("again");
    assert!(geotomo(&["adjoint"], Some(&c), &again).status.success());
    assert_eq!(
        fs::read(adj.join("adjoint.csv")).unwrap(),
        fs::read(again.join("adjoint.csv")).unwrap()
    );
}

#[test]
fn thread_variable_is_validated_when_no_flag_is_given() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(
        tmp.path(),
        r#"{"mesh_spacing": 0.25, "fan_beam": {"n_beta": 12, "n_theta": 6}, "experiments": {"ellipticity_samples": 3}}"#,
    );
    let run = |threads: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_geotomo"));
        cmd.args(["ellipticity", "--config"])
            .arg(&c)
            .arg("--out")
            .arg(tmp.path().join("o"))
            .env("GEOTOMO_THREADS", "many");
        if let Some(t) = threads {
            cmd.args(["--threads", t]);
        }
        cmd.output().unwrap().status.code()
    };
    assert_eq!(run(None), Some(2));
    assert_eq!(run(Some("1")), Some(0));
}
