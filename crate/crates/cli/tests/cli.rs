use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fsoqkd(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fsoqkd"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL: &str = "[sweep]\ndistances_km = [100, 300, 500]\n[grid]\nn = 128\n[path]\ndz = 50000\n\
                     [monte_carlo]\nrealizations = 3\n";

#[test]
fn validate_accepts_defaults() {
    let out = fsoqkd(&["validate"], None);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[qkd]") && stdout.contains("# ok"), "{stdout}");
}

#[test]
fn unknown_key_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[optics]\nwavelenght_nm = 810\n");
    let out = fsoqkd(&["validate", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wavelenght_nm"));
}

#[test]
fn aliasing_guard_exits_with_numerical_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("dz = 50000", "dz = 5000000"));
    let out_dir = tmp.path().join("out");
    let out = fsoqkd(&["sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("PARTIAL").exists());
}

#[test]
fn missing_config_is_an_io_error() {
    let out = fsoqkd(&["validate", "--config", "/nonexistent/scenario.toml"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_is_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let dir = tmp.path().join(name);
        let out = fsoqkd(
            &["sweep", "--config", &cfg, "--out", dir.to_str().unwrap(), "--seed", "9"],
            Some(threads),
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((
            fs::read(dir.join("link_budget.csv")).unwrap(),
            fs::read(dir.join("qkd_metrics.csv")).unwrap(),
        ));
        let manifest = fs::read_to_string(dir.join("manifest.json")).unwrap();
        assert!(manifest.contains("\"master_seed\": 9"));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn realizations_override_and_beam_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("out");
    let out = fsoqkd(
        &["sweep", "--config", &cfg, "--out", dir.to_str().unwrap(), "--realizations", "2", "--dump-beams"],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(dir.join("manifest.json")).unwrap().contains("\"realizations\": 2"));
    for km in ["00100", "00300", "00500"] {
        for tag in ["vacuum", "turbulent"] {
            let bin = dir.join(format!("beams/beam_{km}km_{tag}.bin"));
            assert_eq!(fs::metadata(&bin).unwrap().len(), 128 * 128 * 8);
            assert!(bin.with_extension("hdr").exists());
        }
    }
}

#[test]
fn screen_command_writes_every_planned_screen() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\nn = 64\n[optics]\nw0 = 0.08\n[turbulence]\nn_screens = 3\n");
    let dir = tmp.path().join("out");
    let out = fsoqkd(
        &["screen", "--config", &cfg, "--out", dir.to_str().unwrap(), "--realizations", "2"],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let count = fs::read_dir(dir.join("screens"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "bin")
        .count();
    assert_eq!(count, 6);
    let header = fs::read_to_string(dir.join("screens/screen_r001_s02.hdr")).unwrap();
    assert!(header.contains("kind = phase") && header.contains("n = 64"));
}
