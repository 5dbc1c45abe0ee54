mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::data_dir;

fn trimodal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trimodal")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data(name: &str) -> String {
    data_dir().join(name).to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fg_lists_hydroxyl_for_ethanol() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&trimodal(&["fg", "CCO"]))).unwrap();
    assert_eq!(v["smiles"], "CCO");
    let groups = v["groups"].as_array().unwrap();
    let hydroxyl = groups.iter().find(|g| g["id"] == "hydroxyl").expect("hydroxyl");
    assert_eq!(hydroxyl["atoms"], serde_json::json!([2, 1]));
}

#[test]
fn scaffold_prints_ring_key_or_blank() {
    let ring = stdout(&trimodal(&["scaffold", "OC(=O)c1ccccc1O"]));
    assert_eq!(ring, stdout(&trimodal(&["scaffold", "c1ccccc1"])));
    assert!(!ring.trim().is_empty());
    assert_eq!(stdout(&trimodal(&["scaffold", "CCCC"])).trim(), "");
}

#[test]
fn gramvol_of_orthonormal_vectors_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("v.txt");
    fs::write(&f, "2 0 0 0\n0,3,0,0\n0 0 0.5 0\n").unwrap();
    assert_eq!(stdout(&trimodal(&["gramvol", s(&f)])).trim(), "1.0");
    fs::write(&f, "1 0\n0 1\n1 1\n").unwrap();
    let flat: f64 = stdout(&trimodal(&["gramvol", s(&f)])).trim().parse().unwrap();
    assert!(flat < 1e-7, "{flat}");
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let code = |args: &[&str]| trimodal(args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["scaffold", "CCO", "--bogus"]), 1);
    assert_eq!(code(&["train", "--config", "/nonexistent/x.cfg", "--data", &data("corpus.jsonl"), "--out", "/tmp/x"]), 1);
    assert_eq!(code(&["split", "--data", &data("corpus.jsonl"), "--out", "/tmp/x", "--ratios", "0.5,0.5"]), 1);
    assert_eq!(code(&["fg", "C1CC"]), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{not json\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&["split", "--data", s(&bad), "--out", s(&out)]), 2);
    assert_eq!(code(&["gramvol", s(&bad)]), 2);
}

#[test]
fn split_writes_disjoint_id_lists() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&trimodal(&["split", "--data", &data("corpus.jsonl"), "--out", s(dir.path())]));
    let mut all = Vec::new();
    let mut sizes = Vec::new();
    for name in ["train", "val", "test"] {
        let ids: Vec<String> = fs::read_to_string(dir.path().join(format!("{name}.txt")))
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        sizes.push(ids.len());
        all.extend(ids);
    }
    assert_eq!(sizes, [80, 10, 10]);
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 100);
}

#[test]
fn train_then_evaluate_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let cfg = data("example.cfg");
    stdout(&trimodal(&["train", "--config", &cfg, "--data", &data("corpus.jsonl"), "--out", s(&run)]));
    let ckpt = run.join("final.ckpt");
    assert!(ckpt.exists());
    let resolved = fs::read_to_string(run.join("config.resolved")).unwrap();
    assert!(resolved.contains("seed=7\n") && resolved.contains("epochs=4\n"));
    assert_eq!(fs::read_to_string(run.join("metrics.csv")).unwrap().lines().count(), 5);

    let csv = stdout(&trimodal(&[
        "eval-retrieval", "--config", &cfg, "--data", &data("corpus.jsonl"), "--checkpoint", s(&ckpt),
    ]));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "direction,pool,recall_at_1,recall_at_5,recall_at_10");
    assert!(lines[1].starts_with("M2TH,100,") && lines[2].starts_with("TH2M,100,"));
    for line in &lines[1..] {
        let r: Vec<f64> = line.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
        assert!(r[0] <= r[1] && r[1] <= r[2] && r[2] <= 1.0);
    }

    let csv = stdout(&trimodal(&[
        "probe", "--config", &cfg, "--data", &data("labeled_sample.csv"), "--checkpoint", s(&ckpt), "--seeds", "0,1,2",
    ]));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "seed,auc,accuracy");
    assert_eq!(lines.len(), 6);
    assert!(lines[4].starts_with("mean,") && lines[5].starts_with("std,"));
    let auc: f64 = lines[4].split(',').nth(1).unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&auc));
}

#[test]
fn file_encoder_reads_toy_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("emb");
    stdout(&trimodal(&["encode-toy", "--data", &data("corpus.jsonl"), "--out", s(&emb)]));
    assert!(fs::read_dir(&emb).unwrap().count() >= 5);
    let cfg = dir.path().join("one.cfg");
    fs::write(&cfg, "epochs=1\nbatch_size=16\nencoder=file\n").unwrap();
    let run = dir.path().join("run");
    stdout(&trimodal(&[
        "train", "--config", s(&cfg), "--data", &data("corpus.jsonl"), "--embeddings", s(&emb), "--out", s(&run),
    ]));
    assert!(run.join("final.ckpt").exists());

    // Ids absent from the bundle are a data error.
    let extra = dir.path().join("extra.jsonl");
    let mut body = fs::read_to_string(data("corpus.jsonl")).unwrap();
    body.push_str(r#"{"id":"NEW1","smiles":"CCN","text":"A small amine with two carbons and one nitrogen.","hta":"Chemical class: amines"}"#);
    body.push('\n');
    fs::write(&extra, body).unwrap();
    let o = trimodal(&[
        "train", "--config", s(&cfg), "--data", s(&extra), "--embeddings", s(&emb), "--out", s(&dir.path().join("r2")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
