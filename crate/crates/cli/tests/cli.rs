use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mcx() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mcx"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_systems_prints_every_builtin() {
    let o = mcx().arg("list-systems").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 8);
    for name in
        ["rotation", "doubling", "identity", "logistic", "iet", "casati_prosen", "appendix_torus", "pw_isometry_2d"]
    {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name} missing");
    }
}

#[test]
fn list_systems_json_is_machine_readable() {
    let o = mcx().args(["list-systems", "--json"]).output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 8);
    assert!(arr.iter().all(|s| s["name"].is_string() && s["dimension"].is_number()));
}

#[test]
fn unknown_flag_exits_2() {
    let o = mcx().args(["list-systems", "--bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_epsilon_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.cfg");
    std::fs::write(
        &cfg,
        "kind = \"complexity_curve\"\n[system]\nkind = \"doubling\"\n[params]\neps_prime = 0.1\nn_grid = [2, 4]\nsamples = 1000\n",
    )
    .unwrap();
    for sub in ["validate", "run"] {
        let o = mcx().arg(sub).arg(&cfg).env("OUTPUT_DIR", dir.path()).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{sub}: {}", stderr(&o));
        assert!(stderr(&o).contains("params.epsilon"), "{}", stderr(&o));
    }
    assert!(!dir.path().join("broken").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.cfg");
    std::fs::write(&cfg, "kind = \"bk_series\"\n[system]\nkind = \"doubling\"\n[params]\nepsilonn = [0.1]\n").unwrap();
    let o = mcx().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epsilonn"), "{}", stderr(&o));
}

#[test]
fn bundled_configs_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let o = mcx().arg("validate").arg(&path).output().unwrap();
            assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn run_writes_artifacts_under_output_dir_override() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcx()
        .args(["run", "--workers", "2"])
        .arg(configs().join("ac9_approach.cfg"))
        .env("OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("ac9_approach");
    for f in ["results.csv", "fits.csv", "ratios.svg", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let header = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("experiment,system,epsilon,eps_prime,n,f_of_n,"));
    assert!(header.ends_with(",ratio_bits,ci_lo,ci_hi,flags"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["workers"], 2);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcx()
        .args(["run", "--seed", "123", "--output"])
        .arg(dir.path())
        .arg(configs().join("ac10_pesin_doubling.cfg"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 123);
}
