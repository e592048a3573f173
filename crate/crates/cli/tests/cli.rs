use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use floatnorm::cascade::{new_inverse, Architecture};
use floatnorm::neural::save_model;
use floatnorm::{Scheme, Stage};
use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_floatnorm"));
    c.env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("json error line");
    serde_json::from_str(line).unwrap()
}

fn untrained_inverse(dir: &Path, stage: Stage) -> String {
    let arch = Architecture {
        hidden_layers: 1,
        width: 8,
        init_seed: 4,
    };
    let net = new_inverse::<f64>(stage, Scheme::Custom, &arch).unwrap();
    let p = dir.join(format!("{stage}_inverse.json"));
    save_model(&net, &p).unwrap();
    p.to_str().unwrap().to_string()
}

fn mid_cgg() -> Value {
    json!({"PHIG": 4.4, "CFS": 2.5e-10, "EOT": 1.0e-9, "QMFACTOR": 0.0, "QMTCECV": 1.0, "CGSL": 2.0e-10})
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&[
            "gen-data",
            "--stage",
            "cgg",
            "--scheme",
            "fixed",
            "--n",
            "10",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(a.with_extension("meta.json")).unwrap(),
        fs::read(b.with_extension("meta.json")).unwrap()
    );
}

#[test]
fn usage_errors_exit_two_with_json() {
    let o = run(&["gen-data", "--stage", "cgg"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["kind"], "usage");

    let o = run(&[
        "gen-data", "--stage", "xyz", "--scheme", "fixed", "--n", "1", "--seed", "1", "--out", "x",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn domain_errors_exit_one_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = run(&[
        "gen-data",
        "--stage",
        "id",
        "--scheme",
        "custom",
        "--n",
        "0",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["kind"], "invalid_input");
}

#[test]
fn extract_with_fixed_phig_window_returns_that_value() {
    let dir = tempfile::tempdir().unwrap();
    let inverse = untrained_inverse(dir.path(), Stage::Cgg);
    let params = dir.path().join("p.json");
    fs::write(&params, mid_cgg().to_string()).unwrap();
    let curve = dir.path().join("curve.json");
    let o = run(&[
        "simulate",
        "--stage",
        "cgg",
        "--params",
        params.to_str().unwrap(),
        "--out",
        curve.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let ranges = dir.path().join("r.json");
    fs::write(&ranges, json!({"PHIG": [4.7, 4.7]}).to_string()).unwrap();
    let out = dir.path().join("x.json");
    let o = run(&[
        "extract",
        "--stage",
        "cgg",
        "--inverse",
        &inverse,
        "--curve",
        curve.to_str().unwrap(),
        "--ranges",
        ranges.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["params"]["PHIG"].as_f64(), Some(4.7));
    assert_eq!(r["constraints"]["PHIG"], json!([4.7, 4.7]));
}

#[test]
fn extract_rejects_out_of_range_window_naming_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let inverse = untrained_inverse(dir.path(), Stage::Cgg);
    let curve = dir.path().join("c.json");
    fs::write(&curve, json!(vec![1e-16; 15]).to_string()).unwrap();
    let ranges = dir.path().join("r.json");
    fs::write(&ranges, json!({"PHIG": [4.9, 5.0]}).to_string()).unwrap();
    let o = run(&[
        "extract",
        "--stage",
        "cgg",
        "--inverse",
        &inverse,
        "--curve",
        curve.to_str().unwrap(),
        "--ranges",
        ranges.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["parameter"], "PHIG");
    assert_eq!(e["kind"], "constraint");
}

#[test]
fn contradictory_phig_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let inverse = untrained_inverse(dir.path(), Stage::Cgg);
    let curve = dir.path().join("c.json");
    fs::write(&curve, json!(vec![1e-16; 15]).to_string()).unwrap();
    let o = run(&[
        "extract",
        "--stage",
        "cgg",
        "--inverse",
        &inverse,
        "--curve",
        curve.to_str().unwrap(),
        "--fixed-phig",
        "4.5",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let inverse = untrained_inverse(dir.path(), Stage::Id);
    fs::write(&curve, json!(vec![1e-6; 16]).to_string()).unwrap();
    let o = run(&[
        "extract",
        "--stage",
        "id",
        "--inverse",
        &inverse,
        "--curve",
        curve.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn id_extraction_reads_dataset_rows() {
    let dir = tempfile::tempdir().unwrap();
    let inverse = untrained_inverse(dir.path(), Stage::Id);
    let data = dir.path().join("id.csv");
    let o = run(&[
        "gen-data",
        "--stage",
        "id",
        "--scheme",
        "custom",
        "--n",
        "3",
        "--seed",
        "2",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let o = run(&[
        "extract",
        "--stage",
        "id",
        "--inverse",
        &inverse,
        "--curve",
        data.to_str().unwrap(),
        "--row",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["parameter_order"].as_array().unwrap().len(), 11);
    assert!(r["phig"].as_f64().is_some());

    let o = run(&[
        "extract",
        "--stage",
        "id",
        "--inverse",
        &inverse,
        "--curve",
        data.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn augment_and_train_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let cfg = json!({
        "schema_version": 1,
        "nets": {
            "cgg_forward": {"architecture": {"hidden_layers": 1, "width": 8}, "train": {"max_epochs": 2, "batch_size": 16}},
            "cgg_inverse": {"architecture": {"hidden_layers": 1, "width": 8}, "train": {"max_epochs": 2, "batch_size": 16}}
        }
    });
    fs::write(p("cfg.json"), cfg.to_string()).unwrap();
    let steps: [&[&str]; 4] = [
        &[
            "gen-data",
            "--stage",
            "cgg",
            "--scheme",
            "fixed",
            "--n",
            "20",
            "--seed",
            "3",
            "--out",
            &p("f.csv"),
        ],
        &[
            "augment",
            "--in",
            &p("f.csv"),
            "--k",
            "2",
            "--seed",
            "4",
            "--out",
            &p("a.csv"),
        ],
        &[
            "train-forward",
            "--stage",
            "cgg",
            "--data",
            &p("a.csv"),
            "--config",
            &p("cfg.json"),
            "--out",
            &p("fw.json"),
        ],
        &[
            "train-inverse",
            "--stage",
            "cgg",
            "--forward",
            &p("fw.json"),
            "--data",
            &p("a.csv"),
            "--config",
            &p("cfg.json"),
            "--out",
            &p("inv.json"),
        ],
    ];
    for args in steps {
        let o = run(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let ds = floatnorm::sampling::read_dataset(Path::new(&p("a.csv"))).unwrap();
    assert_eq!(ds.len(), 40);
    assert!(Path::new(&p("inv.report.json")).exists());

    let o = run(&[
        "train-forward",
        "--stage",
        "id",
        "--data",
        &p("a.csv"),
        "--out",
        &p("x.json"),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_config_keys_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, json!({"schema_version": 1, "sead": 1}).to_string()).unwrap();
    let o = run(&[
        "study",
        "convergence",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["kind"], "parse");
}
