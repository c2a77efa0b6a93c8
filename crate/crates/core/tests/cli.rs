// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::Command;

use dwcav::cli::main_with;
use dwcav::entanglement::{log_negativity, reduce_modes};
use dwcav::linearized::{build_drift, build_noise, integrate_lyapunov};
use dwcav::steadystate::{cubic_residual, roots_from_reduced};
use dwcav::{ReducedCoords, SystemParams};
use serde_json::Value;

fn run(args: &[&str], out: &Path) -> i32 {
    let mut v = vec!["dwcav"];
    v.extend_from_slice(args);
    let o = out.to_str().unwrap();
    v.extend_from_slice(&["--out", o]);
    main_with(v)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn point_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["point", "--delta", "-1", "--geff", "0.3"], dir.path()),
        0
    );
    let got = read_json(&dir.path().join("point.json"));
    let gold: Value = serde_json::from_str(include_str!("golden/point_reference.json")).unwrap();

    let ent = &got["entanglement"];
    for key in ["e_12", "e_a1", "e_a2", "nu_min_12", "nu_min_a1"] {
        let (a, b) = (ent[key].as_f64().unwrap(), gold[key].as_f64().unwrap());
        assert!(
            close(a, b, 1e-9) || (a - b).abs() < 1e-12,
            "{key}: {a} vs {b}"
        );
    }
    for (r, n) in got["roots"]
        .as_array()
        .unwrap()
        .iter()
        .zip(gold["n_bar"].as_array().unwrap())
    {
        assert!(close(
            r["n_bar"].as_f64().unwrap(),
            n.as_f64().unwrap(),
            1e-10
        ));
    }
    let stable: Vec<Value> = got["roots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["stability"]["stable"].clone())
        .collect();
    assert_eq!(Value::Array(stable), gold["stable"]);

    // independent checks on the golden numbers
    let p = SystemParams::representative(1.0);
    let rc = ReducedCoords::from_geff(0.3, -p.omega[0], &p);
    let rr = roots_from_reduced(rc, &p).unwrap();
    for n in gold["n_bar"].as_array().unwrap() {
        assert!(cubic_residual(&rr.params, n.as_f64().unwrap()) < 1e-12);
    }
    let root = rr.root(0).unwrap();
    let a = build_drift(root, &rr.params).unwrap().a;
    let d = build_noise(&rr.params).d;
    let v = integrate_lyapunov(&a, &d, 1e-2, 1e-11).unwrap();
    let e_a1 = log_negativity(&reduce_modes(&v, (0, 1)).unwrap()).unwrap();
    assert!(close(e_a1, gold["e_a1"].as_f64().unwrap(), 1e-7), "{e_a1}");
}

#[test]
fn negative_kappa_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["point", "--kappa-a", "-1"], dir.path()), 1);
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["status"], "config-error");
    assert!(m["error"].as_str().unwrap().contains("kappa_a"));
}

#[test]
fn malformed_config_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"params":{"omega":[1e9,1e9],"g":[1e6,1e6],"kappa":[-1e6,1e6],"kappa_a":2e6}}"#,
    )
    .unwrap();
    assert_eq!(
        run(&["point", "--config", cfg.to_str().unwrap()], dir.path()),
        1
    );
    let m = read_json(&dir.path().join("manifest.json"));
    assert!(m["error"].as_str().unwrap().contains("kappa[0]"));

    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(
        run(&["point", "--config", cfg.to_str().unwrap()], dir.path()),
        1
    );
}

#[test]
fn phase_smoke_grid_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["phase", "--n-delta", "16", "--n-geff", "16"], dir.path()),
        0
    );
    let csv = fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    let lines: Vec<&str> = csv.split('\n').filter(|l| !l.is_empty()).collect();
    assert_eq!(lines.len(), 257);
    assert!(lines[0].starts_with("delta_tilde,g_eff,"));
    assert!(!csv.contains('\r'));
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["version"], dwcav::VERSION);
    assert_eq!(m["config"]["command"]["delta"]["n"], 16);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn rerun_from_manifest_is_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (cmd, file) in [
        (vec!["cut", "--n-delta", "24", "--threads", "3"], "cut.csv"),
        (
            vec!["spectrum", "--n-delta", "8", "--n-omega", "16"],
            "spectrum.csv",
        ),
    ] {
        assert_eq!(run(&cmd, a.path()), 0);
        let manifest = a.path().join("manifest.json");
        let name = cmd[0];
        assert_eq!(
            run(
                &[
                    name,
                    "--config",
                    manifest.to_str().unwrap(),
                    "--threads",
                    "1"
                ],
                b.path()
            ),
            0
        );
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
}

#[test]
fn manifest_for_other_subcommand_is_rejected() {
    let a = tempfile::tempdir().unwrap();
    assert_eq!(run(&["point"], a.path()), 0);
    let m = a.path().join("manifest.json");
    assert_eq!(
        run(&["phase", "--config", m.to_str().unwrap()], a.path()),
        1
    );
}

#[test]
fn toml_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
[params]
omega = [1e9, 1e10]
g = [1e6, 1e6]
kappa = [1e6, 1e6]
kappa_a = 2e6
temperature = 2e-3
"#,
    )
    .unwrap();
    assert_eq!(
        run(&["point", "--config", cfg.to_str().unwrap()], dir.path()),
        0
    );
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["config"]["params"]["omega"][1], 1e10);
}

#[test]
fn spectrum_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(
            &["spectrum", "--n-delta", "4", "--n-omega", "5"],
            dir.path()
        ),
        0
    );
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let head = csv.lines().next().unwrap();
    let mut want = vec!["delta_tilde".to_string(), "omega".into(), "S".into()];
    want.extend((1..=6).map(|i| format!("re_lambda_{i}")));
    want.extend((1..=6).map(|i| format!("im_lambda_{i}")));
    assert_eq!(head, want.join(","));
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn material_subcommand_prints_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/material.json");
    assert_eq!(
        run(&["material", "--config", cfg.to_str().unwrap()], dir.path()),
        0
    );
    let v = read_json(&dir.path().join("material.json"));
    assert_eq!(v["modes"].as_array().unwrap().len(), 2);
    assert!(v["modes"][0]["omega"].as_f64().unwrap() > 0.0);
    // without a material section
    assert_eq!(run(&["material"], dir.path()), 1);
}

#[test]
fn shipped_toml_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    assert_eq!(
        run(
            &["cut", "--config", cfg.to_str().unwrap(), "--n-delta", "10"],
            dir.path()
        ),
        0
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("cut.csv"))
            .unwrap()
            .lines()
            .count(),
        11
    );
}

#[test]
fn binary_honours_output_dir_env() {
    let dir = tempfile::tempdir().unwrap();
    let st = Command::new(env!("CARGO_BIN_EXE_dwcav"))
        .args(["point", "--geff", "0.2"])
        .env(dwcav::cli::OUT_DIR_ENV, dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    assert!(dir.path().join("point.json").exists());
    let help = Command::new(env!("CARGO_BIN_EXE_dwcav"))
        .args(["thermal", "--help"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in [
        "--kind",
        "--threshold",
        "--hold",
        "--freq-convention",
        "--threads",
        "--out",
    ] {
        assert!(text.contains(flag), "{flag}");
    }
}
