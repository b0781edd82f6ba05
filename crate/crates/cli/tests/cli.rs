use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use bohm_cli::validate::has_errors;
use bohm_cli::{validate, ExperimentConfig, ExperimentKind};

fn presets() -> Vec<PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    let mut out = Vec::new();
    for scale in ["desk", "paper"] {
        for e in fs::read_dir(root.join(scale)).unwrap() {
            out.push(e.unwrap().path());
        }
    }
    out.sort();
    out
}

#[test]
fn every_preset_validates_and_every_experiment_has_one() {
    let mut seen = Vec::new();
    for p in presets() {
        let cfg = ExperimentConfig::load(&p).unwrap();
        let d = validate(&cfg);
        assert!(!has_errors(&d), "{}: {d:?}", p.display());
        seen.push((p.parent().unwrap().file_name().unwrap().to_owned(), cfg.experiment));
    }
    for scale in ["desk", "paper"] {
        for kind in ExperimentKind::ALL {
            assert!(seen.iter().any(|(s, k)| s == scale && *k == kind), "{scale} lacks {kind}");
        }
    }
}

fn bohm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bohm"))
}

const SMALL: &str = r#"
experiment = "born_evolution"
output_dir = "OUT"
seed = 9
snapshots = [0.0, 0.5]
checkpoints = [0.5, 1.0]
[params]
c2 = 0.5
[ensemble]
kind = "born"
n_particles = 24
[integrator]
t_final = 1.0
"#;

#[test]
fn exit_codes_and_manifest_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL.replace("OUT", out.to_str().unwrap())).unwrap();

    assert_eq!(bohm().arg("validate").arg(&cfg).status().unwrap().code(), Some(0));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, SMALL.replace("c2 = 0.5", "c2 = 0.8\nc1 = 0.8")).unwrap();
    assert_eq!(bohm().arg("validate").arg(&bad).status().unwrap().code(), Some(1));
    assert_eq!(bohm().arg("run").arg(&bad).status().unwrap().code(), Some(1));

    assert_eq!(bohm().arg("run").arg(&cfg).env("BOHM_WORKERS", "2").status().unwrap().code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["workers"], 2);
    assert_eq!(manifest["partial"], false);
    assert_eq!(manifest["config"]["seed"], 9);

    let again = dir.path().join("again");
    let status = bohm()
        .args(["run", "--workers", "1", "--output-dir"])
        .arg(&again)
        .arg(out.join("manifest.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for name in ["snapshot_t0.csv", "snapshot_t0p5.csv", "pattern_t1.bin", "pattern_final.png"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }

    let d = bohm()
        .arg("distance")
        .arg(out.join("pattern_t0p5.bin"))
        .arg(again.join("pattern_t0p5.bin"))
        .output()
        .unwrap();
    assert_eq!(d.status.code(), Some(0));
    assert_eq!(String::from_utf8(d.stdout).unwrap().trim(), "0");

    let png = dir.path().join("p.png");
    let r = bohm().arg("render").arg(out.join("pattern_t1.bin")).arg("-o").arg(&png).status().unwrap();
    assert_eq!(r.code(), Some(0));
    assert!(fs::read_to_string(dir.path().join("p.png.txt")).unwrap().contains("bottom to top"));

    let garbage = dir.path().join("garbage.bin");
    fs::write(&garbage, b"nope").unwrap();
    assert_eq!(bohm().arg("render").arg(&garbage).status().unwrap().code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL.replace("OUT", blocker.join("sub").to_str().unwrap())).unwrap();
    assert_eq!(bohm().arg("run").arg(&cfg).status().unwrap().code(), Some(2));
}
