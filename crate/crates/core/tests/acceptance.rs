//! The ten acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line
//! (visible with `--nocapture`) before asserting.

mod common;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::{auc_pairwise, brute_force_detect, bundled_corpus, gram_det_volume, report};
use trimodal::align::{global_loss, gram_volume, momentum_update, AlignConfig, MomentumState};
use trimodal::chem::{default_library, detect_functional_groups, parse_smiles};
use trimodal::encode::{HeadDims, Modality};
use trimodal::eval::{accuracy, random_baseline, retrieval_metrics, roc_auc, sample_std, Direction, Scoring};
use trimodal::tensor::{matmul, PoolMode, Tensor};
use trimodal::train::{
    batch_graph, embed, fit, record_scaffold, scaffold_groups, split_dataset, synthetic_corpus, Encoder, Model,
    RawFeatures, SplitMode, TrainConfig,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| r.sample(StandardNormal)).collect()
}

fn unit(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v = gaussian(r, d);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn c01_volume_matches_gram_determinant() {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (m, t, h) = (unit(&mut r, 512), unit(&mut r, 512), unit(&mut r, 512));
        let closed = gram_volume(&m, &t, &h).unwrap();
        worst = worst.max((closed - gram_det_volume(&[&m, &t, &h])).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-10 && secs < 5.0;
    report("C1", "volume oracle", pass, &format!("max |Δ| = {worst:.2e}, {secs:.2} s"));
    assert!(pass);
}

fn random_raw(r: &mut ChaCha8Rng, b: usize, n_fg: usize, d: usize) -> RawFeatures {
    let rows = |r: &mut ChaCha8Rng, n: usize| (0..n).map(|_| gaussian(r, d)).collect::<Vec<_>>();
    let record_fgs = (0..b)
        .map(|_| {
            let mut g: Vec<usize> = (0..n_fg).filter(|_| r.random_bool(0.5)).collect();
            if g.is_empty() {
                g.push(r.random_range(0..n_fg));
            }
            g
        })
        .collect();
    RawFeatures {
        smiles: rows(r, b),
        text: rows(r, b),
        hta: rows(r, b),
        fg_pattern: rows(r, n_fg),
        fg_text: rows(r, n_fg),
        record_fgs,
    }
}

fn total_loss(model: &Model, align: &AlignConfig, raw: &RawFeatures, alpha: f64) -> (f64, Vec<Tensor>) {
    let idx: Vec<usize> = (0..raw.len()).collect();
    let mut g = batch_graph::<ChaCha8Rng>(model, align, raw, &idx, None);
    let total = g.combine(alpha);
    g.tape.backward(total).unwrap();
    let grads = g.params.iter().map(|&p| g.tape.grad(p)).collect();
    (g.parts.total, grads)
}

#[test]
fn c02_gradient_check() {
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for smoothing in [0.0, 0.1] {
        for k in 0..20u64 {
            let mut r = rng(100 + k);
            let dims = HeadDims {
                input: r.random_range(3..7),
                hidden: r.random_range(3..6),
                output: r.random_range(3..5),
            };
            let cfg = TrainConfig {
                tau: r.random_range(0.05..0.5),
                tau_learnable: k % 3 == 0,
                share_text_head: k % 4 == 1,
                dropout: 0.0,
                label_smoothing: smoothing,
                pooling: if k % 2 == 0 { PoolMode::Max } else { PoolMode::Mean },
                aux_infonce: k % 5 == 2,
                ..TrainConfig::default()
            };
            let mut model = Model::init(dims, &cfg, &mut r);
            let (b, n_fg) = (r.random_range(1..5), r.random_range(1..4));
            let raw = random_raw(&mut r, b, n_fg, dims.input);
            let alpha = r.random_range(0.0..1.0);
            let align = cfg.align();
            let (_, grads) = total_loss(&model, &align, &raw, alpha);
            for (p, analytic) in grads.iter().enumerate() {
                let mut numeric = vec![0.0; analytic.len()];
                for (i, slot) in numeric.iter_mut().enumerate() {
                    let orig = model.params_mut()[p].data()[i];
                    model.params_mut()[p].data_mut()[i] = orig + h;
                    let up = total_loss(&model, &align, &raw, alpha).0;
                    model.params_mut()[p].data_mut()[i] = orig - h;
                    let down = total_loss(&model, &align, &raw, alpha).0;
                    model.params_mut()[p].data_mut()[i] = orig;
                    *slot = (up - down) / (2.0 * h);
                }
                let diff = numeric
                    .iter()
                    .zip(analytic.data())
                    .map(|(n, a)| (n - a).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let scale = common::dot(&numeric, &numeric).sqrt().max(analytic.data().iter().map(|a| a * a).sum::<f64>().sqrt());
                if scale > 0.0 {
                    worst = worst.max(diff / scale);
                }
                checked += 1;
            }
        }
    }
    let pass = worst < 1e-4;
    report(
        "C2",
        "gradient check",
        pass,
        &format!("{checked} parameter tensors, max relative error {worst:.2e}"),
    );
    assert!(pass);
}

#[test]
fn c03_uniform_softmax_identity() {
    let cfg = AlignConfig {
        label_smoothing: 0.0,
        ..AlignConfig::default()
    };
    let mut r = rng(3);
    let (m0, t0, h0) = (unit(&mut r, 16), unit(&mut r, 16), unit(&mut r, 16));
    let four = |v: &Vec<f64>| vec![v.clone(); 4];
    let l4 = global_loss(&four(&m0), &four(&t0), &four(&h0), &cfg).unwrap().lg;
    let l1 = global_loss(&[m0], &[t0], &[h0], &cfg).unwrap().lg;
    let pass = (l4 - 4f64.ln()).abs() < 1e-9 && l1.abs() < 1e-12;
    report("C3", "uniform-softmax identity", pass, &format!("B=4: {l4}, B=1: {l1}"));
    assert!(pass);
}

#[test]
fn c04_momentum_closure() {
    let mut r = rng(4);
    let mut escaped = 0usize;
    for &alpha0 in &[0.0, 0.5, 1.0] {
        for _ in 0..100_000 {
            let mut st = MomentumState::new(alpha0, r.random_range(0.0..1.0));
            for _ in 0..8 {
                let mag = 10f64.powi(r.random_range(-12..12));
                let lg = if r.random_bool(0.1) { 0.0 } else { mag * r.random::<f64>() };
                let ll = if r.random_bool(0.1) { 0.0 } else { mag * r.random::<f64>() * 10f64.powi(r.random_range(-6..6)) };
                let a = momentum_update(&mut st, lg, ll);
                if !(0.0..=1.0).contains(&a) {
                    escaped += 1;
                }
            }
        }
    }
    let mut fixed = true;
    for &l in &[0.0, 1e-300, 0.1, 1.0, 3.7, 1e300] {
        for &beta in &[0.0, 0.5, 0.9, 0.999] {
            let mut st = MomentumState::new(0.5, beta);
            for _ in 0..10 {
                fixed &= momentum_update(&mut st, l, l) == 0.5;
            }
        }
    }
    let pass = escaped == 0 && fixed;
    report(
        "C4",
        "momentum closure",
        pass,
        &format!("{escaped} updates outside [0,1]; fixed point exact: {fixed}"),
    );
    assert!(pass);
}

/// Haar-ish random orthogonal matrix by Gram–Schmidt on Gaussian columns.
fn random_orthogonal(r: &mut ChaCha8Rng, d: usize) -> Tensor {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    while q.len() < d {
        let mut v = gaussian(r, d);
        for _ in 0..2 {
            for u in &q {
                let p = common::dot(&v, u);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
        }
        let n = common::dot(&v, &v).sqrt();
        q.push(v.into_iter().map(|x| x / n).collect());
    }
    Tensor::new(vec![d, d], q.concat()).unwrap()
}

#[test]
fn c05_permutation_and_rotation_invariance() {
    let d = 512;
    let n = 10_000;
    let mut r = rng(5);
    let q = random_orthogonal(&mut r, d);
    let triples: Vec<[Vec<f64>; 3]> = (0..n).map(|_| [unit(&mut r, d), unit(&mut r, d), unit(&mut r, d)]).collect();
    let stacked: Vec<f64> = triples.iter().flat_map(|t| t.iter().flatten().copied()).collect();
    let rotated = matmul(&Tensor::new(vec![3 * n, d], stacked).unwrap(), &q).unwrap();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut perm_exact = true;
    let mut worst_rot = 0.0f64;
    for (k, t) in triples.iter().enumerate() {
        let base = gram_volume(&t[0], &t[1], &t[2]).unwrap();
        for p in &perms {
            perm_exact &= gram_volume(&t[p[0]], &t[p[1]], &t[p[2]]).unwrap() == base;
        }
        let rot = gram_volume(rotated.row(3 * k), rotated.row(3 * k + 1), rotated.row(3 * k + 2)).unwrap();
        worst_rot = worst_rot.max((rot - base).abs());
    }
    let pass = perm_exact && worst_rot < 1e-9;
    report(
        "C5",
        "permutation/rotation invariance",
        pass,
        &format!("permutations exact: {perm_exact}; max rotation |Δ| = {worst_rot:.2e}"),
    );
    assert!(pass);
}

fn rows(t: Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

#[test]
fn c06_synthetic_end_to_end() {
    let start = Instant::now();
    let lib = default_library();
    let records = synthetic_corpus(256, 0, &lib);
    let cfg = TrainConfig {
        batch_size: 32,
        epochs: 40,
        ..TrainConfig::default()
    };
    let out = tempfile::tempdir().unwrap();
    let res = fit(&cfg, &records, &lib, out.path()).unwrap();
    let first = res.metrics.first().unwrap().train_lg;
    let last = res.metrics.last().unwrap().train_lg;
    let raw = RawFeatures::build(&Encoder::from_config(&cfg).unwrap(), &records, &lib).unwrap();
    let model = &res.state.model;
    let m = rows(embed(model, Modality::Smiles, &raw.smiles).unwrap());
    let t = rows(embed(model, Modality::Text, &raw.text).unwrap());
    let h = rows(embed(model, Modality::Hta, &raw.hta).unwrap());
    let recall = retrieval_metrics(&m, &t, &h, Direction::M2TH, Scoring::Volume).unwrap().recall_at_1;
    let secs = start.elapsed().as_secs_f64();
    let baseline = random_baseline(256, 512, 20, 6).unwrap();
    let pass = last <= 0.5 * first && recall >= 10.0 * baseline && secs < 120.0;
    report(
        "C6",
        "synthetic end-to-end",
        pass,
        &format!(
            "{} epochs, L_g {first:.4} -> {last:.4}; recall@1 {recall:.4} vs baseline {baseline:.4}; {secs:.1} s",
            res.metrics.len()
        ),
    );
    assert!(pass);
}

#[test]
fn c07_fg_oracle() {
    let lib = default_library();
    let corpus = bundled_corpus();
    let mut mismatches = Vec::new();
    let mut max_atoms = 0;
    for r in &corpus {
        let mol = parse_smiles(&r.smiles).unwrap();
        max_atoms = max_atoms.max(mol.atom_count());
        if detect_functional_groups(&mol, &lib) != brute_force_detect(&mol, &lib) {
            mismatches.push(r.id.clone());
        }
    }
    let pass = corpus.len() == 100 && max_atoms <= 12 && mismatches.is_empty();
    report(
        "C7",
        "FG oracle",
        pass,
        &format!(
            "{} molecules (max {max_atoms} heavy atoms), {} patterns, mismatches {mismatches:?}",
            corpus.len(),
            lib.len()
        ),
    );
    assert!(pass);
}

#[test]
fn c08_metric_oracles() {
    let mut r = rng(8);
    let mut auc_equal = 0;
    for _ in 0..1000 {
        let n = r.random_range(2..=50);
        let levels = r.random_range(2..20);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        if roc_auc(&scores, &labels).unwrap() == auc_pairwise(&scores, &labels) {
            auc_equal += 1;
        }
    }
    let std_ok = sample_std(&[1.0, 2.0, 3.0]).unwrap() == 1.0;
    let mut acc_ok = true;
    let mut matrices = 0;
    for tp in 0..5usize {
        for tn in 0..5usize {
            for fp in 0..5usize {
                for fn_ in 0..5usize {
                    let n = tp + tn + fp + fn_;
                    if n == 0 {
                        continue;
                    }
                    let mut scores = Vec::new();
                    let mut labels = Vec::new();
                    for (count, s, l) in [(tp, 0.9, true), (tn, 0.1, false), (fp, 0.7, false), (fn_, 0.2, true)] {
                        scores.extend(std::iter::repeat_n(s, count));
                        labels.extend(std::iter::repeat_n(l, count));
                    }
                    let expected = (tp + tn) as f64 / (tp + tn + fp + fn_) as f64;
                    acc_ok &= accuracy(&scores, &labels, 0.5).unwrap() == expected;
                    matrices += 1;
                }
            }
        }
    }
    let pass = auc_equal == 1000 && std_ok && acc_ok;
    report(
        "C8",
        "metric oracles",
        pass,
        &format!("AUC exact on {auc_equal}/1000; sample_std{{1,2,3}} = 1: {std_ok}; accuracy exact on {matrices} matrices: {acc_ok}"),
    );
    assert!(pass);
}

fn train_cli(config: &Path, out: &Path, extra: &[&str]) {
    let data = common::data_dir().join("corpus.jsonl");
    let status = Command::new(env!("CARGO_BIN_EXE_trimodal"))
        .args(["train", "--config"])
        .arg(config)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
}

fn dir_bytes(dir: &Path) -> HashMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn c09_determinism_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.cfg");
    fs::write(&config, "epochs=4\nbatch_size=16\nseed=9\n").unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    train_cli(&config, &a, &[]);
    train_cli(&config, &b, &[]);
    let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
    let identical = fa == fb && fa.contains_key("metrics.csv") && fa.contains_key("checkpoint_epoch0002.ckpt");

    fs::create_dir_all(&c).unwrap();
    fs::copy(a.join("metrics.csv"), c.join("metrics.csv")).unwrap();
    fs::copy(a.join("checkpoint_epoch0002.ckpt"), c.join("resume.ckpt")).unwrap();
    let resume = c.join("resume.ckpt");
    train_cli(&config, &c, &["--resume", resume.to_str().unwrap()]);
    let fc = dir_bytes(&c);
    let resumed = ["metrics.csv", "checkpoint_epoch0004.ckpt", "final.ckpt"]
        .iter()
        .all(|f| fa.contains_key(*f) && fa.get(*f) == fc.get(*f));
    let pass = identical && resumed;
    report(
        "C9",
        "determinism",
        pass,
        &format!("repeat runs byte-identical: {identical}; resume from epoch 2 bit-exact: {resumed}"),
    );
    assert!(pass);
}

#[test]
fn c10_scaffold_split_soundness() {
    let corpus = bundled_corpus();
    let split = split_dataset(&corpus, SplitMode::Scaffold, [0.8, 0.1, 0.1], 0).unwrap();
    let keys = |part: &[trimodal::train::TripletRecord]| part.iter().map(record_scaffold).collect::<HashSet<_>>();
    let (ktr, kva, kte) = (keys(&split.train), keys(&split.val), keys(&split.test));
    let disjoint = ktr.is_disjoint(&kva) && ktr.is_disjoint(&kte) && kva.is_disjoint(&kte);
    let smiles: Vec<&str> = corpus.iter().map(|r| r.smiles.as_str()).collect();
    let largest = scaffold_groups(&smiles).iter().map(|g| g.1.len()).max().unwrap();
    let sizes = [split.train.len(), split.val.len(), split.test.len()];
    let n = corpus.len() as f64;
    let within = sizes
        .iter()
        .zip([0.8, 0.1, 0.1])
        .all(|(&s, f)| (s as f64 - f * n).abs() <= largest as f64);
    let pass = disjoint && within && sizes.iter().sum::<usize>() == corpus.len();
    report(
        "C10",
        "scaffold split soundness",
        pass,
        &format!("sizes {sizes:?} for targets [80, 10, 10] (largest group {largest}); disjoint keys: {disjoint}"),
    );
    assert!(pass);
}
