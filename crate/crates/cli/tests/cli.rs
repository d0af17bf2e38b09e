use std::fs;
use std::path::Path;
use std::process::Command;

use nondipole_cli::output::{read_csv, POPULATIONS, SPECTRA, TIME_SERIES};
use nondipole_cli::{compare_runs, execute, parse_config_str, CliError, RunConfig, RunOptions};

const SMALL: &str = "\
omega = 0.5
intensity = 1e14
n_T = 1
r_max = 30
n_r = 120
n_theta = 5
n_phi = 5
steps_per_cycle = 200
n_max = 2
t_start = -0.5
t_out = 1.0
";

fn config(extra: &str) -> RunConfig {
    parse_config_str(&format!("{SMALL}{extra}")).unwrap()
}

fn run(dir: &Path, extra: &str) -> serde_json::Value {
    let mut opts = RunOptions::new(dir);
    opts.plot = Some(false);
    execute(&config(extra), &opts).unwrap().manifest
}

fn column(dir: &Path, name: &str) -> Vec<f64> {
    let (names, rows) = read_csv(&fs::read_to_string(dir.join(TIME_SERIES)).unwrap()).unwrap();
    let i = names.iter().position(|n| n == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

#[test]
fn outputs_are_deterministic_and_tagged() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ma = run(&a, "");
    run(&b, "");
    let id = ma["run_id"].as_str().unwrap();
    for name in [TIME_SERIES, SPECTRA, POPULATIONS] {
        let ta = fs::read(a.join(name)).unwrap();
        assert_eq!(ta, fs::read(b.join(name)).unwrap(), "{name} differs between runs");
        let text = String::from_utf8(ta).unwrap();
        assert!(text.starts_with(&format!("# run_id={id}\n")), "{name} lacks the run id");
    }
    let (names, rows) = read_csv(&fs::read_to_string(a.join(TIME_SERIES)).unwrap()).unwrap();
    assert_eq!(
        names,
        ["t", "X", "Y", "Z", "P_x", "P_y", "P_z", "px", "py", "pz", "x", "z", "norm", "E_field"]
    );
    assert_eq!(rows.len(), 301);
    let (names, _) = read_csv(&fs::read_to_string(a.join(SPECTRA)).unwrap()).unwrap();
    assert_eq!(names, ["omega", "energy", "P_x", "P_y", "P_z", "px", "py", "pz"]);
    assert_eq!(ma["status"], "complete");
    assert!(ma["results"]["correlation"].is_object());
    assert!(ma["grid"]["basis_truncation"].as_str().unwrap().contains("l <= 4"));

    let report = compare_runs(&a.join("manifest.json"), &b.join("manifest.json")).unwrap();
    assert_eq!(report.max_abs_difference(), 0.0);
}

#[test]
fn dipole_only_keeps_cm_momentum_at_p0() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run(tmp.path(), "dipole_only = true\np0 = 1e-3,0,-2e-3\n");
    for (name, p0) in [("P_x", 1e-3), ("P_y", 0.0), ("P_z", -2e-3)] {
        assert!(column(tmp.path(), name).iter().all(|&p| p == p0), "{name} moved");
        assert_eq!(m["results"]["cm_channels"][name], "constant");
    }
}

#[test]
fn field_free_run_stays_in_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    let field_free = parse_config_str(&SMALL.replace("intensity = 1e14", "e0 = 0")).unwrap();
    let dir = tmp.path().join("free");
    let mut opts = RunOptions::new(&dir);
    opts.plot = Some(false);
    execute(&field_free, &opts).unwrap();
    let (_, rows) = read_csv(&fs::read_to_string(dir.join(POPULATIONS)).unwrap()).unwrap();
    assert_eq!(rows[0][0], 1.0);
    assert!((rows[0][1] - 1.0).abs() < 1e-8, "W_1 = {}", rows[0][1]);
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let full = tmp.path().join("full");
    run(&full, "");

    let cfg = config("checkpoint_every = 120\n");
    let part = tmp.path().join("part");
    let ckpt = tmp.path().join("state.ckpt");
    let mut opts = RunOptions::new(&part);
    opts.plot = Some(false);
    opts.checkpoint = Some(ckpt.clone());
    execute(&cfg, &opts).unwrap();
    assert!(ckpt.exists());

    // The checkpoint holds step 240; resuming finishes the run from there.
    opts.resume = true;
    let resumed = tmp.path().join("resumed");
    opts.output = resumed.clone();
    execute(&cfg, &opts).unwrap();
    for name in [TIME_SERIES, SPECTRA, POPULATIONS] {
        assert_eq!(
            fs::read(full.join(name)).unwrap(),
            fs::read(resumed.join(name)).unwrap(),
            "{name}"
        );
    }

    let other = config("freeze_cm = true\n");
    match execute(&other, &opts) {
        Err(e @ CliError::Config(_)) => assert_eq!(e.exit_code(), 2),
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

#[test]
fn compare_flags_frozen_center_of_mass() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("coupled"), tmp.path().join("frozen"));
    run(&a, "");
    run(&b, "freeze_cm = true\n");
    let c = compare_runs(&a.join("manifest.json"), &b.join("manifest.json")).unwrap();
    let pz = c.cm_channels.iter().find(|(ch, _, _)| ch == "P_z").unwrap();
    assert_eq!((pz.1.as_str(), pz.2.as_str()), ("varying", "constant"));
}

#[test]
fn binary_exit_codes_and_plots() {
    let exe = env!("CARGO_BIN_EXE_nondipole");
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.cfg");
    fs::write(&good, SMALL).unwrap();
    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, format!("{SMALL}wavelength = 90\n")).unwrap();

    let out = Command::new(exe).args(["validate-config", "--config"]).arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("omega = 0.5"));

    let out = Command::new(exe).args(["validate-config", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 12"));

    let dir = tmp.path().join("out");
    let out = Command::new(exe)
        .args(["--threads", "1", "run", "--config"])
        .arg(&good)
        .arg("--output")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for svg in ["momentum.svg", "position.svg", "spectra.svg", "populations.svg"] {
        let text = fs::read_to_string(dir.join(svg)).unwrap();
        assert!(text.starts_with("<svg") && text.contains("run_id="), "{svg}");
    }

    let out = Command::new(exe)
        .arg("compare")
        .arg(dir.join("manifest.json"))
        .arg(tmp.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(exe).arg("compare").arg(&good).arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unhealthy_run_exits_with_numerical_code_and_checkpoint() {
    // A huge field with a coarse step exhausts the Krylov space of the coupling solve.
    let cfg = parse_config_str(
        &SMALL
            .replace("intensity = 1e14", "e0 = 5000")
            .replace("steps_per_cycle = 200", "steps_per_cycle = 4"),
    )
    .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut opts = RunOptions::new(tmp.path());
    opts.plot = Some(false);
    match execute(&cfg, &opts) {
        Err(e @ CliError::Numerical { .. }) => {
            assert_eq!(e.exit_code(), 3);
            let CliError::Numerical { checkpoint, .. } = &e else { unreachable!() };
            assert!(checkpoint.as_ref().is_some_and(|p| p.exists()));
            let text = fs::read_to_string(tmp.path().join(TIME_SERIES)).unwrap();
            assert!(text.contains("# partial=true"));
            let m: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
            assert_eq!(m["status"], "failed");
        }
        other => panic!("expected a numerical-health failure, got {other:?}"),
    }
}
