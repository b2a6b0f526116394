use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn berrylab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_berrylab"))
        .args(args)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn out(dir: &tempfile::TempDir, name: &str) -> (PathBuf, String) {
    let p = dir.path().join(name);
    let s = p.to_string_lossy().into_owned();
    (p, s)
}

#[test]
fn oracle_equatorial_and_constant() {
    let dir = tempfile::tempdir().unwrap();
    let (p, s) = out(&dir, "eq.json");
    let o = berrylab(&[
        "oracle",
        "--instance",
        &data("equatorial.json"),
        "--n",
        "256",
        "--out",
        &s,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&p);
    assert!((v["theta_B"].as_f64().unwrap() - PI).abs() < 1e-6);
    let csv = std::fs::read_to_string(p.with_extension("csv")).unwrap();
    assert!(csv.starts_with("lambda,e0,e1,gap,iA"));
    assert_eq!(csv.lines().count(), 65);
    assert!(dir.path().join("eq.json.manifest.json").exists());

    let (p, s) = out(&dir, "c.json");
    assert!(berrylab(&["oracle", "--instance", &data("constant.json"), "--out", &s])
        .status
        .success());
    assert_eq!(read_json(&p)["theta_B"].as_f64().unwrap(), 0.0);
}

#[test]
fn malformed_instance_names_the_term() {
    let dir = tempfile::tempdir().unwrap();
    let (_, s) = out(&dir, "m.json");
    let o = berrylab(&["oracle", "--instance", &data("malformed.json"), "--out", &s]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("term 1"), "{err}");
}

#[test]
fn missing_file_and_flags() {
    let o = berrylab(&[
        "oracle",
        "--instance",
        "/nonexistent/x.json",
        "--out",
        "/tmp/never.json",
    ]);
    assert_eq!(o.status.code(), Some(2));
    // --seed is mandatory for stochastic commands
    let o = berrylab(&[
        "bpe",
        "--instance",
        &data("equatorial.json"),
        "--epsilon-b",
        "0.05",
        "--eta",
        "0.05",
        "--out",
        "/tmp/x.json",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn capacity_override_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let (_, s) = out(&dir, "c.json");
    let o = Command::new(env!("CARGO_BIN_EXE_berrylab"))
        .args(["oracle", "--instance", &data("constant.json"), "--out", &s])
        .env("BERRYLAB_MAX_QUBITS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bpe_equatorial_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let (p, s) = out(&dir, name);
        let o = berrylab(&[
            "bpe",
            "--instance",
            &data("equatorial.json"),
            "--epsilon-b",
            "0.05",
            "--eta",
            "0.05",
            "--seed",
            "4",
            "--oracle-n",
            "256",
            "--out",
            &s,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        p
    };
    let a = run("a.json");
    let b = run("b.json");
    let v = read_json(&a);
    assert!((v["theta_B_hat"].as_f64().unwrap() - PI).abs() <= 0.05);
    assert!((v["oracle_theta_B"].as_f64().unwrap() - PI).abs() <= 1e-6);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bpe_refuses_coarse_precision() {
    let dir = tempfile::tempdir().unwrap();
    let (_, s) = out(&dir, "x.json");
    let o = berrylab(&[
        "bpe",
        "--instance",
        &data("equatorial.json"),
        "--epsilon-b",
        "0.05",
        "--eta",
        "0.05",
        "--seed",
        "1",
        "--interval-a",
        "3",
        "--interval-b",
        "4",
        "--delta",
        "0.025",
        "--out",
        &s,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 delta"));
}

#[test]
fn murta_aliases_pi_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (p, s) = out(&dir, "m.json");
    let o = berrylab(&[
        "murta",
        "--instance",
        &data("equatorial.json"),
        "--epsilon-b",
        "0.05",
        "--eta",
        "0.05",
        "--seed",
        "2",
        "--out",
        &s,
    ]);
    assert!(o.status.success());
    let t = read_json(&p)["theta_hat"].as_f64().unwrap();
    assert!(t.min(TAU - t) <= 0.1, "{t}");
}

#[test]
fn genhard_dichotomy_and_refusal() {
    let dir = tempfile::tempdir().unwrap();
    for (file, yes) in [("bqp_yes.json", true), ("bqp_no.json", false)] {
        let (p, s) = out(&dir, file);
        let o = berrylab(&[
            "genhard",
            "--circuit",
            &data(file),
            "--kind",
            "bqp",
            "--m",
            "2",
            "--out",
            &s,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let prov = read_json(&dir.path().join(format!("{file}.provenance.json")));
        let theta = prov["oracle_theta_B"].as_f64().unwrap();
        if yes {
            assert!(theta > 0.0 && theta <= FRAC_PI_2, "{theta}");
        } else {
            assert!((3.0 * FRAC_PI_2..TAU).contains(&theta), "{theta}");
        }
        // the exported instance loads back as a family
        let fam = read_json(&p);
        assert!(fam["metadata"]["hardness"]["certified_delta"].as_f64().unwrap() > 0.0);
    }
    let (_, s) = out(&dir, "bad.json");
    let o = berrylab(&[
        "genhard",
        "--circuit",
        &data("bqp_yes.json"),
        "--kind",
        "bqp",
        "--m",
        "2",
        "--r",
        "0.5",
        "--out",
        &s,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("measured gap"));
    let o = berrylab(&[
        "genhard",
        "--circuit",
        &data("duqma_yes.json"),
        "--kind",
        "duqma",
        "--m",
        "1",
        "--out",
        &s,
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let (p, s) = out(&dir, "s.csv");
    assert!(berrylab(&[
        "sweep",
        "--instance",
        &data("equatorial.json"),
        "--points",
        "16",
        "--out",
        &s
    ])
    .status
    .success());
    assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 17);
    let (q, t) = out(&dir, "s2.csv");
    let m = format!("{s}.manifest.json");
    assert!(berrylab(&["rerun", "--manifest", &m, "--out", &t]).status.success());
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
    let manifest = read_json(Path::new(&m));
    assert_eq!(manifest["invocation"]["command"], "sweep");
    assert!(manifest["elapsed_seconds"].as_f64().is_some());
    assert_eq!(
        berrylab(&["rerun", "--manifest", "/nonexistent.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_orthogonal_witness() {
    let dir = tempfile::tempdir().unwrap();
    let (_, inst) = out(&dir, "d.json");
    let o = berrylab(&[
        "genhard",
        "--circuit",
        &data("duqma_yes.json"),
        "--kind",
        "duqma",
        "--m",
        "1",
        "--witness",
        "1",
        "--out",
        &inst,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (p, s) = out(&dir, "v.json");
    let o = berrylab(&[
        "verify",
        "--instance",
        &inst,
        "--witness",
        "0",
        "--runs",
        "40",
        "--seed",
        "3",
        "--out",
        &s,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = read_json(&p);
    let runs = runs.as_array().unwrap();
    assert_eq!(runs.len(), 40);
    assert!(runs
        .iter()
        .all(|r| r["energy_pass"] == false && r["theta_estimate"].is_null()));
    assert!(runs.iter().all(|r| r["decision"] == "accept-prob-bounded"));
    let csv = std::fs::read_to_string(p.with_extension("csv")).unwrap();
    assert!(csv.starts_with("runs,energy_pass_rate,accept_one_rate,accept_rate\n40,0.0,0.0,"));
    // verify needs a hardness instance
    let o = berrylab(&[
        "verify",
        "--instance",
        &data("equatorial.json"),
        "--witness",
        "true",
        "--runs",
        "1",
        "--seed",
        "1",
        "--out",
        &s,
    ]);
    assert_eq!(o.status.code(), Some(2));
}
