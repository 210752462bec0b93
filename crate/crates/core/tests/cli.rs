use std::path::Path;
use std::process::{Command, Output};

fn xxcascade(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xxcascade")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_TVMC: &str = r#"
engine = "tvmc"
observables = ["fidelities", "cat_overlaps", "params"]
[lattice]
L = 3
[schedule]
t_max = 0.6
dt_outer = 0.2
dt = 0.05
checkpoint_every = 1
[sampler]
samples_per_stage = 800
fidelity_samples = 800
[targets]
q = [2, 4]
"#;

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "kagome.toml", "[lattice]\ngeometry = \"kagome\"\n");
    let o = xxcascade(d, &["exact-evolve", "--config", "kagome.toml", "--out", "a"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lattice.geometry"), "{}", stderr(&o));

    write(d, "big.toml", "[lattice]\nL = 5\n");
    let o = xxcascade(d, &["exact-evolve", "--config", "big.toml", "--out", "b"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("24"), "{}", stderr(&o));

    write(d, "typo.toml", "[schedule]\ntmax = 3\n");
    assert_eq!(xxcascade(d, &["exact-evolve", "--config", "typo.toml"]).status.code(), Some(2));
    assert_eq!(xxcascade(d, &["exact-evolve", "--config", "missing.toml"]).status.code(), Some(2));
    assert_eq!(xxcascade(d, &["reproduce", "fig9"]).status.code(), Some(2));
    assert_eq!(xxcascade(d, &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "strict.toml", &format!("{SMALL_TVMC}[tdvp]\nmax_residual = 1e-12\n"));
    let o = xxcascade(d, &["tvmc-evolve", "--config", "strict.toml", "--out", "r"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let meta = std::fs::read_to_string(d.join("r/meta.json")).unwrap();
    assert!(meta.contains("\"completed\": false"));
}

#[test]
fn runs_are_immutable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "e.toml", "[lattice]\nL = 3\n[schedule]\nt_max = 1.0\ndt_outer = 0.5\n");
    assert_eq!(xxcascade(d, &["exact-evolve", "--config", "e.toml", "--out", "run"]).status.code(), Some(0));
    let before = std::fs::read(d.join("run/series.csv")).unwrap();
    let o = xxcascade(d, &["exact-evolve", "--config", "e.toml", "--out", "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(std::fs::read(d.join("run/series.csv")).unwrap(), before);
    let header = String::from_utf8(before).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("t,t_kac,Jx,VarJx,VarJy,VarJz,JyJz_sym,J2,xi2,parity,dparity_dtheta,C,F_GHZ,F_px,F_mx"));
}

#[test]
fn tvmc_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "t.toml", SMALL_TVMC);
    let files = ["series.csv", "params.csv", "cat_overlaps.csv", "meta.json", "checkpoints/state.json"];
    let run = || {
        let o = xxcascade(d, &["tvmc-evolve", "--config", "t.toml", "--seed", "17", "--out", "r"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(d.join("r").join(f)).unwrap()).collect();
        std::fs::remove_dir_all(d.join("r")).unwrap();
        bytes
    };
    let first = run();
    assert_eq!(first, run());

    let o = xxcascade(d, &["tvmc-evolve", "--config", "t.toml", "--seed", "18", "--out", "r"]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(std::fs::read(d.join("r/series.csv")).unwrap(), first[0]);
}

#[test]
fn resume_extends_a_finished_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "long.toml", SMALL_TVMC);
    write(d, "short.toml", &SMALL_TVMC.replace("t_max = 0.6", "t_max = 0.4"));
    assert!(xxcascade(d, &["tvmc-evolve", "--config", "long.toml", "--out", "full"]).status.success());
    assert!(xxcascade(d, &["tvmc-evolve", "--config", "short.toml", "--out", "part"]).status.success());
    assert!(xxcascade(d, &["tvmc-evolve", "--config", "long.toml", "--out", "part", "--resume"]).status.success());
    for f in ["series.csv", "params.csv", "cat_overlaps.csv"] {
        assert_eq!(std::fs::read(d.join("full").join(f)).unwrap(), std::fs::read(d.join("part").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn analysis_and_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "oat.toml", "engine = \"dicke\"\n[lattice]\nL = 4\nalpha = 0.0\n[schedule]\nt_max = 30.0\ndt_outer = 0.1\n");
    assert!(xxcascade(d, &["oat-ref", "--config", "oat.toml", "--out", "oat"]).status.success());
    let o = xxcascade(d, &["analyze", "oat/series.csv", "--out", "an"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["squeezing_scaling.csv", "inertia.csv", "spectrum_peaks.csv", "cramer_rao.csv", "cat_census.csv", "summary.json"] {
        assert!(d.join("an").join(f).exists(), "{f}");
    }

    let o = xxcascade(d, &["reproduce", "tower", "--out", "tower"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("tower/manifest.json")).unwrap()).unwrap();
    let i = manifest["results"]["square"]["inertia"].as_f64().unwrap();
    assert!((i - 2.4168).abs() < 1e-3, "{i}");
    assert!(d.join("tower/spectrum_triangular.csv").exists());
}
