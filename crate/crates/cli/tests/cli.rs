//! End-to-end tests of the binary: exit codes, emitted files, and
//! byte-reproducibility of the CSV outputs.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kirchhoff"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run_ok(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

const LINEAR_SCENARIO: &str = r#"{
  "operator": { "eigenvalues": [1.0] },
  "nonlinearity": { "kind": "constant", "value": 1.0 },
  "initial": { "u0": [1.0], "u1": [0.0] },
  "integrator": { "scheme": "stormer_verlet", "dt": 1e-4, "t_end": 10.0, "stride": 100 }
}"#;

#[test]
fn simulate_linear_scenario_conserves_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "linear.json", LINEAR_SCENARIO);
    let out = tmp.path().join("out");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .output()
        .unwrap();
    run_ok(&output);

    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,u_1,v_1,s,energy");
    let energies: Vec<f64> = lines
        .map(|l| l.split(',').next_back().unwrap().parse().unwrap())
        .collect();
    let e0 = energies[0];
    assert!((e0 - 1.0).abs() < 1e-12);
    for e in &energies {
        assert!((e - e0).abs() / e0 <= 1e-8, "energy drifted to {e}");
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["study"], "simulate");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["constants"]["relative_energy_drift"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn rerunning_byte_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "linear.json", LINEAR_SCENARIO);
    let (out_a, out_b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&out_a, &out_b] {
        let output = bin()
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .arg("--quiet")
            .output()
            .unwrap();
        run_ok(&output);
    }
    let a = std::fs::read(out_a.join("trajectory.csv")).unwrap();
    let b = std::fs::read(out_b.join("trajectory.csv")).unwrap();
    assert_eq!(a, b);
    let a = std::fs::read(out_a.join("manifest.json")).unwrap();
    let b = std::fs::read(out_b.join("manifest.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn criterion_flags_the_degenerate_eigenpair() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "pair.json",
        r#"{
          "operator": { "eigenvalues": [1.0, 1.0] },
          "nonlinearity": { "kind": "affine", "intercept": 0.0, "slope": 1.0 },
          "initial": { "u0": [1.0, 0.0], "u1": [0.0, 1.0] },
          "integrator": { "scheme": "stormer_verlet", "dt": 1e-3, "t_end": 1.0, "stride": 10 }
        }"#,
    );
    let out = tmp.path().join("out");
    let output = bin()
        .args(["criterion", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .output()
        .unwrap();
    run_ok(&output);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("criterion.json")).unwrap())
            .unwrap();
    assert_eq!(report["criterion"]["nondegenerate"], false);
    assert_eq!(report["criterion"]["D1"], 0.0);
    assert_eq!(report["criterion"]["D2"], 0.0);
    assert_eq!(report["eigenpair"]["AS1"], true);
    assert_eq!(report["eigenpair"]["AS2"], true);
    assert!(report["eigenpair"]["AS3"].as_str().unwrap().contains("unknown"));
    // The rotating orbit is degenerate along the way.
    assert!(report["events"].as_array().unwrap().len() >= 100);
}

#[test]
fn reparam_emits_sidecar_and_direct_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "sine.json",
        r#"{
          "operator": { "eigenvalues": [1.0] },
          "nonlinearity": { "kind": "constant", "value": 1.0 },
          "initial": { "u0": [0.0], "u1": [1.0] },
          "integrator": { "scheme": "stormer_verlet", "dt": 1e-4, "t_end": 1.5, "stride": 1 }
        }"#,
    );
    let out = tmp.path().join("out");
    let output = bin()
        .args(["reparam", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .output()
        .unwrap();
    run_ok(&output);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("reparam.json")).unwrap()).unwrap();
    assert_eq!(side["orientation"], 1);
    assert_eq!(side["D1"], 0.0);
    assert!((side["beta"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(side["roundtrip_time_error"].as_f64().unwrap() <= 1e-5);
    assert!(side["gamma1_measured"].as_f64().unwrap() > 0.9);
    assert!(side["direct_agreement"].as_f64().unwrap() <= 1e-4);

    let csv = std::fs::read_to_string(out.join("strajectory.csv")).unwrap();
    assert!(csv.starts_with("s,t,d,z_1,w_1\n"));
    assert!(out.join("strajectory_direct.csv").exists());
}

#[test]
fn agreement_with_perturbation_emits_energy_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "agree.json",
        r#"{
          "operator": { "eigenvalues": [1.0, 2.0] },
          "nonlinearity": { "kind": "affine", "intercept": 1.0, "slope": 1.0 },
          "modulus": { "kind": "linear" },
          "phi": { "kind": "identity" },
          "initial": { "u0": [1.0, 0.5], "u1": [0.3, 0.0] },
          "integrator": { "scheme": "stormer_verlet", "dt": 1e-4, "t_end": 0.6, "stride": 10 },
          "integrator_b": { "scheme": "rk4", "dt": 1e-3, "t_end": 0.6, "stride": 1 },
          "perturbation": { "delta": 1e-6, "mode_k": 1 }
        }"#,
    );
    let out = tmp.path().join("out");
    let output = bin()
        .args(["agreement", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .output()
        .unwrap();
    run_ok(&output);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("agreement.json")).unwrap())
            .unwrap();
    assert!(report["sup_distance"].as_f64().unwrap() <= 1e-6);
    let trace = std::fs::read_to_string(out.join("energy_trace_k1.csv")).unwrap();
    assert!(trace.starts_with("s,E,I1,I2,I3,eta1,eta2,residual\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert!(manifest["constants"]["gamma_k1"].as_f64().unwrap().is_finite());
}

#[test]
fn mollifier_study_reports_stable_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "moll.json",
        r#"{
          "operator": { "eigenvalues": [1.0] },
          "nonlinearity": { "kind": "power", "coeff": 1.0, "exponent": 0.5 },
          "modulus": { "kind": "holder", "beta": 0.5 },
          "initial": { "u0": [0.0], "u1": [1.0] },
          "s_extension": 2.0
        }"#,
    );
    let out = tmp.path().join("out");
    let output = bin()
        .args(["mollifier", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .output()
        .unwrap();
    run_ok(&output);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("mollifier.json")).unwrap())
            .unwrap();
    assert_eq!(report["per_epsilon"].as_array().unwrap().len(), 11);
    assert!(report["gamma3"].as_f64().unwrap() > 0.0);
    assert!(report["ceps_min"].as_f64().unwrap() >= -1e-10);
}

#[test]
fn lemmas_pass_on_builtin_fixtures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let output = bin().args(["lemmas", "--out"]).arg(&out).arg("--quiet").output().unwrap();
    run_ok(&output);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("lemmas.json")).unwrap()).unwrap();
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["omega_lower_bound"].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_runs_studies_in_parallel_subdirectories() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "sweep.json",
        &format!(
            r#"{{
              "studies": [
                {{ "name": "lin", "study": "simulate", "config": {LINEAR_SCENARIO} }},
                {{ "name": "crit", "study": "criterion",
                   "config": {{
                      "operator": {{ "eigenvalues": [1.0] }},
                      "nonlinearity": {{ "kind": "constant", "value": 1.0 }},
                      "initial": {{ "u0": [1.0], "u1": [0.0] }},
                      "integrator": {{ "scheme": "rk4", "dt": 1e-3, "t_end": 1.0, "stride": 10 }}
                   }} }}
              ]
            }}"#
        ),
    );
    let out = tmp.path().join("out");
    let output = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .output()
        .unwrap();
    run_ok(&output);
    assert!(out.join("lin/trajectory.csv").exists());
    assert!(out.join("crit/criterion.json").exists());
    assert!(out.join("sweep.json").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn table_nonlinearity_and_config_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    // m sampled as the constant 1 on a two-column CSV.
    std::fs::write(tmp.path().join("m.csv"), "sigma,value\n0,1\n10,1\n").unwrap();
    let out = tmp.path().join("from_config");
    let config = write_config(
        tmp.path(),
        "table.json",
        &format!(
            r#"{{
              "operator": {{ "rule": {{ "power": 1.0, "k": 2 }} }},
              "nonlinearity": {{ "kind": "table", "path": "m.csv" }},
              "initial": {{ "u0": [1.0, 0.25], "u1": [0.0, 0.0] }},
              "integrator": {{ "scheme": "stormer_verlet", "dt": 1e-4, "t_end": 2.0, "stride": 100 }},
              "out_dir": {:?}
            }}"#,
            out.to_str().unwrap()
        ),
    );
    let output = bin().args(["simulate", "--config"]).arg(&config).arg("--quiet").output().unwrap();
    run_ok(&output);
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,u_1,u_2,v_1,v_2,s,energy\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert!(manifest["constants"]["relative_energy_drift"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn malformed_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "bad.json", "{ not json");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // Unknown field is also a config error.
    let config = write_config(
        tmp.path(),
        "unknown.json",
        r#"{ "operator": { "eigenvalues": [1.0] },
             "nonlinearity": { "kind": "constant", "value": 1.0 },
             "initial": { "u0": [1.0], "u1": [0.0] },
             "frobnicate": 1 }"#,
    );
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("out2"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn study_mismatch_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "declared.json",
        r#"{
          "operator": { "eigenvalues": [1.0] },
          "nonlinearity": { "kind": "constant", "value": 1.0 },
          "initial": { "u0": [1.0], "u1": [0.0] },
          "study": "simulate"
        }"#,
    );
    let output = bin()
        .args(["criterion", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn divergence_exits_4_and_keeps_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "blowup.json",
        r#"{
          "operator": { "eigenvalues": [5.0] },
          "nonlinearity": { "kind": "affine", "intercept": 1.0, "slope": 1.0 },
          "initial": { "u0": [1.0], "u1": [0.0] },
          "integrator": { "scheme": "stormer_verlet", "dt": 10.0, "t_end": 1000.0, "stride": 1 }
        }"#,
    );
    let out = tmp.path().join("out");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() >= 2, "partial trajectory kept");
}
