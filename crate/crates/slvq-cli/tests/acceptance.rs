//! CLI acceptance: determinism of every subcommand (criterion 10) and the
//! exit-code contract.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

fn slvq() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_slvq"));
    // pin the manifest timestamp so whole-directory comparisons are exact
    cmd.env("SOURCE_DATE_EPOCH", "1700000000");
    cmd
}

fn write(path: &Path, contents: &str) {
    fs::write(path, contents).unwrap();
}

fn dir_digest(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        map.insert(
            entry.file_name().to_string_lossy().into_owned(),
            fs::read(entry.path()).unwrap(),
        );
    }
    map
}

const PARAMS_INDEP: &str =
    r#"{"gamma1":1,"gamma2":1,"r1":1,"r2":1,"c11":1,"c12":0,"c21":0,"c22":1}"#;

/// Criterion 10: rerunning each subcommand with identical config and seed
/// produces byte-identical outputs; Monte Carlo outputs move with the seed
/// while spectral outputs do not.
#[test]
fn c10_determinism_of_every_subcommand() {
    let t0 = std::time::Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();

    let harness_cfg = root.join("harness.json");
    write(
        &harness_cfg,
        &format!(
            r#"{{"params":{PARAMS_INDEP},
                "grid":{{"eps_lo":0.0,"l_hi":null,"n":64}},
                "sim":{{"dt":0.001,"t_max":5.0,"seed":4,"n_paths":200}},
                "fv":{{"n_particles":150,"t_burn_over_lambda":2.0,"t_sample_over_lambda":6.0,"hist_n":16}}}}"#
        ),
    );
    let model_cfg = root.join("model.json");
    write(
        &model_cfg,
        &format!(
            r#"{{"params":{PARAMS_INDEP},
                "grid":{{"eps_lo":0.001,"l_hi":8.0,"n":64}},
                "grid_1d":{{"eps_lo":0.001,"l_hi":8.0,"n":400}},
                "sim":{{"dt":0.002,"t_max":40.0,"seed":4,"n_paths":300}},
                "exit_paths":200,
                "fv":{{"n_particles":150,"t_burn_over_lambda":2.0,"t_sample_over_lambda":6.0,"hist_n":16}}}}"#
        ),
    );
    let scan_cfg = root.join("scan.json");
    write(
        &scan_cfg,
        &format!(
            r#"{{"params":{PARAMS_INDEP},
                "scan":{{"c_values":[0.2,0.4],"c_tol":0.2,"n_2d":64,"n_1d":300}}}}"#
        ),
    );
    let diag_cfg = root.join("diag.json");
    write(
        &diag_cfg,
        &format!(
            r#"{{"params":{PARAMS_INDEP},
                "diagnostics":{{"radii":[5,10],"samples_per_shell":5000,"series_k_max":6}}}}"#
        ),
    );

    let runs: Vec<(&str, &Path, Vec<&str>)> = vec![
        ("validate", &model_cfg, vec![]),
        ("spectrum", &harness_cfg, vec!["--harness", "dirichlet"]),
        ("simulate", &harness_cfg, vec!["--harness", "dirichlet"]),
        ("yaglom", &harness_cfg, vec!["--harness", "dirichlet"]),
        ("classify", &model_cfg, vec!["--no-fv"]),
        ("scan", &scan_cfg, vec![]),
        ("diagnose", &diag_cfg, vec![]),
    ];

    for (sub, cfg, extra) in &runs {
        let out_a = root.join(format!("{sub}_a"));
        let out_b = root.join(format!("{sub}_b"));
        for out in [&out_a, &out_b] {
            let status = slvq()
                .arg(sub)
                .args(["--config", cfg.to_str().unwrap()])
                .args(["--out-dir", out.to_str().unwrap()])
                .args(extra.iter())
                .status()
                .unwrap();
            assert!(status.success(), "{sub} failed");
        }
        let a = dir_digest(&out_a);
        let b = dir_digest(&out_b);
        assert_eq!(
            a.keys().collect::<Vec<_>>(),
            b.keys().collect::<Vec<_>>(),
            "{sub}: different file sets"
        );
        for (name, bytes) in &a {
            assert_eq!(
                bytes, &b[name],
                "{sub}: {name} differs between identical reruns"
            );
        }
        assert!(a.contains_key("run_manifest.json"), "{sub}: no manifest");
    }

    // seed isolation: Monte Carlo outputs move, spectral outputs do not
    let out_seed = tmp.path().join("simulate_seed9");
    let status = slvq()
        .arg("simulate")
        .args(["--config", harness_cfg.to_str().unwrap()])
        .args(["--harness", "dirichlet"])
        .args(["--out-dir", out_seed.to_str().unwrap()])
        .args(["--seed", "9"])
        .status()
        .unwrap();
    assert!(status.success());
    let base = dir_digest(&root.join("simulate_a"));
    let seeded = dir_digest(&out_seed);
    assert_ne!(
        base["survival.csv"], seeded["survival.csv"],
        "different seeds must change the Monte Carlo output"
    );

    let out_spec_seed = tmp.path().join("spectrum_seed9");
    let status = slvq()
        .arg("spectrum")
        .args(["--config", harness_cfg.to_str().unwrap()])
        .args(["--harness", "dirichlet"])
        .args(["--out-dir", out_spec_seed.to_str().unwrap()])
        .args(["--seed", "9"])
        .status()
        .unwrap();
    assert!(status.success());
    let spec_base = dir_digest(&root.join("spectrum_a"));
    let spec_seeded = dir_digest(&out_spec_seed);
    assert_eq!(
        spec_base["qsd_nodes.csv"], spec_seeded["qsd_nodes.csv"],
        "spectral node dump must not depend on the seed"
    );
    println!(
        "[PASS] criterion 10: byte-identical reruns over {} subcommands ({:.1?})",
        runs.len(),
        t0.elapsed()
    );
}

#[test]
fn exit_codes_name_the_violated_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = tmp.path().join("ok.json");
    write(&ok, PARAMS_INDEP);
    let out = slvq()
        .arg("validate")
        .args(["--config", ok.to_str().unwrap()])
        .args(["--out-dir", tmp.path().join("v0").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Independent"));

    let bad_balance = tmp.path().join("bad_balance.json");
    write(
        &bad_balance,
        r#"{"gamma1":1,"gamma2":1,"r1":1,"r2":1,"c11":1,"c12":1,"c21":2,"c22":1}"#,
    );
    let out = slvq()
        .arg("validate")
        .args(["--config", bad_balance.to_str().unwrap()])
        .args(["--out-dir", tmp.path().join("v1").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("balance"),
        "balance violation must be named"
    );

    let strong = tmp.path().join("strong.json");
    write(
        &strong,
        r#"{"gamma1":1,"gamma2":1,"r1":1,"r2":1,"c11":1,"c12":-2,"c21":-2,"c22":1}"#,
    );
    let out = slvq()
        .arg("validate")
        .args(["--config", strong.to_str().unwrap()])
        .args(["--out-dir", tmp.path().join("v2").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("weak cooperation"),
        "weak cooperation must be named"
    );

    // config parse failure
    let garbage = tmp.path().join("garbage.json");
    write(&garbage, r#"{"not": "a config"}"#);
    let out = slvq()
        .arg("validate")
        .args(["--config", garbage.to_str().unwrap()])
        .args(["--out-dir", tmp.path().join("v3").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // unknown harness name
    let out = slvq()
        .arg("spectrum")
        .args(["--config", ok.to_str().unwrap()])
        .args(["--harness", "nonsense"])
        .args(["--out-dir", tmp.path().join("v4").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn spectrum_harness_emits_half() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    write(
        &cfg,
        &format!(r#"{{"params":{PARAMS_INDEP},"grid":{{"eps_lo":0.0,"l_hi":null,"n":200}}}}"#),
    );
    let out_dir = tmp.path().join("spec");
    let status = slvq()
        .arg("spectrum")
        .args(["--config", cfg.to_str().unwrap()])
        .args(["--harness", "dirichlet"])
        .args(["--out-dir", out_dir.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("spectral_result.json")).unwrap()).unwrap();
    let lambda0 = doc["lambda"][0].as_f64().unwrap();
    assert!((lambda0 - 0.5).abs() < 1e-3, "lambda[0] = {lambda0}");
}

/// An empty-result manifest still lists the config hash and no files is
/// impossible here, but the manifest always includes every emitted file.
#[test]
fn manifest_lists_every_emitted_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    write(&cfg, PARAMS_INDEP);
    let out_dir = tmp.path().join("v");
    let status = slvq()
        .arg("validate")
        .args(["--config", cfg.to_str().unwrap()])
        .args(["--out-dir", out_dir.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("run_manifest.json")).unwrap()).unwrap();
    let listed: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap().to_string())
        .collect();
    let mut on_disk: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "run_manifest.json")
        .collect();
    on_disk.sort();
    let mut listed_sorted = listed.clone();
    listed_sorted.sort();
    assert_eq!(on_disk, listed_sorted);
    assert_eq!(manifest["created_unix"].as_u64(), Some(1_700_000_000));
}
