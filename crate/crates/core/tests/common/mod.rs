//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use trimodal::chem::{default_library, FGMatch, FGPattern, Molecule};
use trimodal::train::{load_triplets, TripletRecord};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn bundled_corpus() -> Vec<TripletRecord> {
    let (records, rejects) = load_triplets(&data_dir().join("corpus.jsonl"), &default_library()).unwrap();
    assert!(rejects.is_empty(), "{rejects:?}");
    records
}

pub fn alt_spellings() -> Vec<(String, String)> {
    std::fs::read_to_string(data_dir().join("alt_spellings.tsv"))
        .unwrap()
        .lines()
        .map(|l| {
            let (a, b) = l.split_once('\t').unwrap();
            (a.to_string(), b.to_string())
        })
        .collect()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[p][col] == 0.0 {
            return 0.0;
        }
        if p != col {
            a.swap(p, col);
            d = -d;
        }
        d *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    d
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// sqrt(det G) of the Gram matrix of `vs`.
pub fn gram_det_volume(vs: &[&[f64]]) -> f64 {
    let g = vs.iter().map(|a| vs.iter().map(|b| dot(a, b)).collect()).collect();
    det(g).max(0.0).sqrt()
}

/// Pairwise-counting AUC: P(score_pos > score_neg) + ½ P(tie).
pub fn auc_pairwise(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice_wins, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1;
                twice_wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

/// Every injective map from query atoms to molecule atoms in lexicographic
/// order. A partial map is abandoned as soon as an assigned atom or a bond
/// between assigned atoms fails. Returns one mapping per distinct atom set
/// (the first found).
pub fn brute_force_matches(mol: &Molecule, pattern: &FGPattern) -> Vec<Vec<usize>> {
    let q = &pattern.query;
    let k = q.atoms.len();
    let mut out: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    if k == 0 || k > mol.atom_count() {
        return Vec::new();
    }
    let bond_ok = |x: usize, y: usize, bq: trimodal::chem::BondQuery| {
        mol.bonds
            .iter()
            .any(|bd| ((bd.a == x && bd.b == y) || (bd.a == y && bd.b == x)) && bq.matches(bd.order))
    };
    let mut map: Vec<usize> = Vec::with_capacity(k);
    let mut stack: Vec<usize> = vec![0];
    while let Some(cand) = stack.pop() {
        if cand >= mol.atom_count() {
            map.pop();
            continue;
        }
        stack.push(cand + 1);
        let depth = map.len();
        if map.contains(&cand) || !q.atoms[depth].matches(mol, cand) {
            continue;
        }
        let consistent = q.bonds.iter().all(|&(a, b, bq)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            hi != depth || bond_ok(map[lo], cand, bq)
        });
        if !consistent {
            continue;
        }
        map.push(cand);
        if map.len() == k {
            let mut key = map.clone();
            key.sort_unstable();
            out.entry(key).or_insert_with(|| map.clone());
            map.pop();
        } else {
            stack.push(0);
        }
    }
    out.into_values().collect()
}

/// Library-order detection built on [`brute_force_matches`].
pub fn brute_force_detect(mol: &Molecule, library: &[FGPattern]) -> Vec<FGMatch> {
    library
        .iter()
        .filter_map(|p| {
            brute_force_matches(mol, p).into_iter().next().map(|atom_indices| FGMatch {
                pattern_id: p.id.clone(),
                atom_indices,
            })
        })
        .collect()
}

pub fn report(id: &str, name: &str, pass: bool, detail: &str) {
    println!("[{}] {id} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}
