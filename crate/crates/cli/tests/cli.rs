//! End-to-end CLI tests: the built binary, its embedded service, exit
//! codes, and golden outputs.

use std::path::Path;
use std::process::{Command, Output};

fn iondrive(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iondrive"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn modes_matches_golden_two_ion_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n2.cfg", "trap.n_ions = 2\n");
    let out = iondrive(&["modes", "--config", &cfg, "--out", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let written = std::fs::read_to_string(dir.path().join("out/modes.txt")).unwrap();
    let golden = include_str!("golden/modes_n2.txt");
    assert_eq!(written, golden, "modes.txt drifted from the golden file");
}

#[test]
fn compile_reports_ring_phases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ring.cfg", "");
    let out = iondrive(&["compile", "--config", &cfg, "--out", "out"], dir.path());
    assert!(out.status.success());

    let report = std::fs::read_to_string(dir.path().join("out/compile_report.txt")).unwrap();
    let phases: Vec<f64> = report
        .lines()
        .find_map(|l| l.strip_prefix("phases="))
        .expect("phases line")
        .split('\t')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(phases.len(), 4);
    assert_eq!(phases[0], 0.0);
    assert!((phases[2] / phases[1] + 1.829).abs() < 0.06);
    assert!((phases[3] / phases[1] + 2.829).abs() < 0.06);

    // The tone table parses back and carries twelve tones.
    let table = std::fs::read_to_string(dir.path().join("out/tone_table.txt")).unwrap();
    assert_eq!(table.lines().filter(|l| l.starts_with("tone\t")).count(), 12);
}

#[test]
fn exit_codes_distinguish_failure_modes() {
    let dir = tempfile::tempdir().unwrap();

    // Config parse error -> 2.
    let bad = write_config(dir.path(), "bad.cfg", "xi_hz = fast\n");
    let out = iondrive(&["modes", "--config", &bad], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 1"), "{stderr}");

    // Unknown figure -> 2.
    let ok = write_config(dir.path(), "ok.cfg", "");
    let out = iondrive(&["figure", "nope", "--config", &ok], dir.path());
    assert_eq!(out.status.code(), Some(2));

    // Zero target -> 3.
    let zero = write_config(
        dir.path(),
        "zero.cfg",
        "target.matrix = 0,0,0,0;0,0,0,0;0,0,0,0;0,0,0,0\n",
    );
    let out = iondrive(&["compile", "--config", &zero], dir.path());
    assert_eq!(out.status.code(), Some(3));

    // Missing config file -> generic failure.
    let out = iondrive(&["modes", "--config", "missing.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn figure_dynamics_writes_schema_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dyn.cfg", "blocks = 2\nshots = 50\n");
    let out = iondrive(
        &["figure", "dynamics", "--config", &cfg, "--out", "out"],
        dir.path(),
    );
    assert!(out.status.success());
    for name in ["snapshots.tsv", "es_populations.tsv", "manifest.txt"] {
        assert!(dir.path().join("out").join(name).exists(), "missing {name}");
    }
    let snapshots = std::fs::read_to_string(dir.path().join("out/snapshots.tsv")).unwrap();
    assert!(snapshots.starts_with("# stroboscopic snapshots"));
    assert!(snapshots.contains("seed=1"));

    // Odd-excitation populations stay identically zero without noise.
    let es = std::fs::read_to_string(dir.path().join("out/es_populations.tsv")).unwrap();
    for line in es.lines().filter(|l| !l.starts_with('#') && l.contains('\t')) {
        let cols: Vec<f64> = line.split('\t').map(|x| x.parse().unwrap()).collect();
        // columns: t, es0..es4 sampled, exact_es0..exact_es4
        assert!(cols[2] == 0.0 && cols[4] == 0.0, "sampled odd ES populated");
        assert!(cols[7] < 1e-10 && cols[9] < 1e-10, "exact odd ES populated");
    }
}

#[test]
fn manifest_reruns_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.cfg", "shots = 40\nseed = 77\nblocks = 2\n");
    let out = iondrive(
        &["figure", "transverse", "--config", &cfg, "--out", "a"],
        dir.path(),
    );
    assert!(out.status.success());

    // Re-run from the emitted manifest: identical data files.
    let manifest = dir.path().join("a/manifest.txt");
    let out = iondrive(
        &[
            "figure",
            "transverse",
            "--config",
            manifest.to_str().unwrap(),
            "--out",
            "b",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    for name in ["transverse.tsv", "metrics.txt"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between manifest re-runs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", "blocks = 1\nshots = 80\n");
    let run = |out_dir: &str, seed: Option<&str>| {
        let mut args = vec!["figure", "dynamics", "--config", &cfg, "--out", out_dir];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        let out = iondrive(&args, dir.path());
        assert!(out.status.success());
        std::fs::read_to_string(dir.path().join(out_dir).join("snapshots.tsv")).unwrap()
    };
    let base = run("a", None);
    let same = run("b", Some("1"));
    let different = run("c", Some("31337"));
    assert_eq!(base, same, "default seed is 1");
    assert_ne!(base, different, "seed override must change sampling");
}
