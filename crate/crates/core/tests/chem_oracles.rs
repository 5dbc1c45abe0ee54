mod common;

use std::collections::BTreeSet;

use common::{alt_spellings, brute_force_matches, bundled_corpus};
use trimodal::chem::{
    canonical_string, default_library, enumerate_cycles, match_pattern, murcko_scaffold, parse_smiles, scaffold_key,
    Molecule,
};

/// Every simple cycle as a bond subset: connected, each touched atom of degree 2.
fn brute_force_cycles(mol: &Molecule) -> BTreeSet<Vec<usize>> {
    let m = mol.bonds.len();
    assert!(m <= 20, "too many bonds for subset enumeration");
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << m) {
        let chosen: Vec<usize> = (0..m).filter(|&b| mask >> b & 1 == 1).collect();
        if chosen.len() < 3 {
            continue;
        }
        let mut deg = vec![0usize; mol.atom_count()];
        for &b in &chosen {
            deg[mol.bonds[b].a] += 1;
            deg[mol.bonds[b].b] += 1;
        }
        if deg.iter().any(|&d| d != 0 && d != 2) {
            continue;
        }
        // walk the cycle from its smallest atom
        let start = deg.iter().position(|&d| d == 2).unwrap();
        let mut seq = vec![start];
        let mut used = vec![false; m];
        let mut cur = start;
        loop {
            let next = chosen.iter().copied().find(|&b| {
                !used[b] && (mol.bonds[b].a == cur || mol.bonds[b].b == cur)
            });
            let Some(b) = next else { break };
            used[b] = true;
            cur = mol.bonds[b].other(cur);
            if cur == start {
                break;
            }
            seq.push(cur);
        }
        if seq.len() != chosen.len() {
            continue; // disjoint union of cycles
        }
        if seq[1] > seq[seq.len() - 1] {
            seq[1..].reverse();
        }
        out.insert(seq);
    }
    out
}

#[test]
fn match_pattern_equals_brute_force_on_corpus() {
    let lib = default_library();
    let mut total = 0;
    for r in bundled_corpus() {
        let mol = parse_smiles(&r.smiles).unwrap();
        for p in &lib {
            let fast: Vec<Vec<usize>> = match_pattern(&mol, p).into_iter().map(|m| m.atom_indices).collect();
            let slow = brute_force_matches(&mol, p);
            assert_eq!(fast, slow, "{} / {}", r.smiles, p.id);
            total += slow.len();
        }
    }
    assert!(total > 100, "oracle found only {total} matches");
}

#[test]
fn brute_force_oracle_sanity() {
    let lib = default_library();
    let hydroxyl = lib.iter().find(|p| p.id == "hydroxyl").unwrap();
    assert_eq!(brute_force_matches(&parse_smiles("CCO").unwrap(), hydroxyl), vec![vec![2, 1]]);
    let ring = lib.iter().find(|p| p.id == "aromatic_ring").unwrap();
    assert_eq!(brute_force_matches(&parse_smiles("c1ccccc1").unwrap(), ring).len(), 1);
    assert_eq!(brute_force_matches(&parse_smiles("C1CCCCC1").unwrap(), ring).len(), 0);
}

#[test]
fn cycles_equal_exhaustive_enumeration() {
    for r in bundled_corpus() {
        let mol = parse_smiles(&r.smiles).unwrap();
        let found: BTreeSet<Vec<usize>> = enumerate_cycles(&mol).into_iter().collect();
        assert_eq!(found, brute_force_cycles(&mol), "{}", r.smiles);
    }
    assert_eq!(enumerate_cycles(&parse_smiles("c1ccc2ccccc2c1").unwrap()).len(), 3);
}

#[test]
fn alternate_spellings_agree() {
    let pairs = alt_spellings();
    assert!(pairs.len() >= 20);
    for (a, b) in pairs {
        let (ma, mb) = (parse_smiles(&a).unwrap(), parse_smiles(&b).unwrap());
        assert_eq!(canonical_string(&ma), canonical_string(&mb), "{a} vs {b}");
        assert_eq!(scaffold_key(&ma), scaffold_key(&mb), "{a} vs {b}");
    }
}

#[test]
fn parse_is_deterministic_and_scaffold_idempotent() {
    for r in bundled_corpus() {
        let m = parse_smiles(&r.smiles).unwrap();
        assert_eq!(m, parse_smiles(&r.smiles).unwrap());
        let s = murcko_scaffold(&m);
        assert_eq!(canonical_string(&murcko_scaffold(&s)), canonical_string(&s), "{}", r.smiles);
    }
}

#[test]
fn scaffold_examples() {
    let key = |s: &str| scaffold_key(&parse_smiles(s).unwrap());
    assert_eq!(key("CCCC"), "");
    assert_eq!(key("Cc1ccccc1"), key("c1ccccc1"));
    assert_eq!(key("OC(=O)c1ccccc1O"), key("c1ccccc1"));
    assert_eq!(key("c1ccccc1CCc1ccccc1O"), key("c1ccccc1CCc1ccccc1"));
    assert_ne!(key("c1ccccc1CCc1ccccc1"), key("c1ccccc1Cc1ccccc1"));
    assert_eq!(key("NCCc1c[nH]cn1"), key("c1c[nH]cn1"));
}
