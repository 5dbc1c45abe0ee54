//! Subgraph matching of query graphs against molecules.
//!
//! Query atoms are visited in breadth-first order so that every atom after
//! the first has an already-mapped anchor; candidates are drawn from the
//! anchor's neighbors only.

use std::collections::BTreeMap;

use serde::Serialize;

use super::library::FGPattern;
use super::pattern::{BondQuery, QueryGraph};
use super::Molecule;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FGMatch {
    pub pattern_id: String,
    /// Molecule atom for each query atom, in query order.
    pub atom_indices: Vec<usize>,
}

struct Plan {
    order: Vec<usize>,
    /// For each position in `order` after the first: (anchor query atom).
    anchor: Vec<Option<usize>>,
    /// Bonds to check when placing `order[k]`: (earlier query atom, bond query).
    checks: Vec<Vec<(usize, BondQuery)>>,
}

fn plan(query: &QueryGraph) -> Plan {
    let n = query.atoms.len();
    let adj = query.adjacency();
    let mut order = Vec::with_capacity(n);
    let mut anchor = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    for root in 0..n {
        if placed[root] {
            continue;
        }
        placed[root] = true;
        order.push(root);
        anchor.push(None);
        let mut head = order.len() - 1;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &(v, _) in &adj[u] {
                if !placed[v] {
                    placed[v] = true;
                    order.push(v);
                    anchor.push(Some(u));
                }
            }
        }
    }
    let mut position = vec![0; n];
    for (k, &q) in order.iter().enumerate() {
        position[q] = k;
    }
    let checks = order
        .iter()
        .map(|&q| {
            adj[q]
                .iter()
                .filter(|&&(o, _)| position[o] < position[q])
                .copied()
                .collect()
        })
        .collect();
    Plan {
        order,
        anchor,
        checks,
    }
}

fn extend(
    mol: &Molecule,
    query: &QueryGraph,
    plan: &Plan,
    k: usize,
    mapping: &mut [usize],
    used: &mut [bool],
    found: &mut BTreeMap<Vec<usize>, Vec<usize>>,
) {
    if k == plan.order.len() {
        let mut key = mapping.to_vec();
        key.sort_unstable();
        found
            .entry(key)
            .and_modify(|m| {
                if &*mapping < m.as_slice() {
                    *m = mapping.to_vec();
                }
            })
            .or_insert_with(|| mapping.to_vec());
        return;
    }
    let q = plan.order[k];
    let candidates: Vec<usize> = match plan.anchor[k] {
        Some(a) => mol.neighbors(mapping[a]).iter().map(|&(v, _)| v).collect(),
        None => (0..mol.atom_count()).collect(),
    };
    for cand in candidates {
        if used[cand] || !query.atoms[q].matches(mol, cand) {
            continue;
        }
        let bonds_ok = plan.checks[k].iter().all(|&(other, bq)| {
            mol.bond_between(mapping[other], cand)
                .is_some_and(|b| bq.matches(b.order))
        });
        if !bonds_ok {
            continue;
        }
        mapping[q] = cand;
        used[cand] = true;
        extend(mol, query, plan, k + 1, mapping, used, found);
        used[cand] = false;
        mapping[q] = usize::MAX;
    }
}

/// Every embedding of `pattern` in `mol`, one per distinct atom set, ordered
/// by the sorted atom set. Within a set the lexicographically smallest
/// mapping is reported.
pub fn match_pattern(mol: &Molecule, pattern: &FGPattern) -> Vec<FGMatch> {
    let query = &pattern.query;
    if query.atoms.is_empty() || query.atoms.len() > mol.atom_count() {
        return Vec::new();
    }
    let plan = plan(query);
    let mut mapping = vec![usize::MAX; query.atoms.len()];
    let mut used = vec![false; mol.atom_count()];
    let mut found = BTreeMap::new();
    extend(mol, query, &plan, 0, &mut mapping, &mut used, &mut found);
    found
        .into_values()
        .map(|atom_indices| FGMatch {
            pattern_id: pattern.id.clone(),
            atom_indices,
        })
        .collect()
}

/// One match per library entry that embeds, in library order.
pub fn detect_functional_groups(mol: &Molecule, library: &[FGPattern]) -> Vec<FGMatch> {
    library
        .iter()
        .filter_map(|p| match_pattern(mol, p).into_iter().next())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{default_library, parse_smiles};

    fn pat(s: &str) -> FGPattern {
        FGPattern::new("p", "p", s, "d").unwrap()
    }

    #[test]
    fn ethanol_hydroxyl() {
        let mol = parse_smiles("CCO").unwrap();
        let m = match_pattern(&mol, &pat("[O;H1]-[C;X4]"));
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].atom_indices, vec![2, 1]);
    }

    #[test]
    fn methane_has_no_multi_atom_match() {
        let mol = parse_smiles("C").unwrap();
        assert!(match_pattern(&mol, &pat("CC")).is_empty());
        assert!(match_pattern(&mol, &pat("C=O")).is_empty());
    }

    #[test]
    fn benzene_ring_dedup() {
        let mol = parse_smiles("c1ccccc1").unwrap();
        let m = match_pattern(&mol, &pat("a1aaaaa1"));
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].atom_indices, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn deterministic_order() {
        let mol = parse_smiles("OCCCO").unwrap();
        let m = match_pattern(&mol, &pat("[O;H1]-[C;X4]"));
        let sets: Vec<_> = m.iter().map(|x| x.atom_indices.clone()).collect();
        assert_eq!(sets, vec![vec![0, 1], vec![4, 3]]);
    }

    #[test]
    fn default_library_ethanol_and_methane() {
        let lib = default_library();
        let ids: Vec<_> = detect_functional_groups(&parse_smiles("CCO").unwrap(), &lib)
            .into_iter()
            .map(|m| m.pattern_id)
            .collect();
        assert_eq!(ids, ["hydroxyl"]);
        assert!(detect_functional_groups(&parse_smiles("C").unwrap(), &lib).is_empty());
    }

    #[test]
    fn acetic_acid_groups() {
        let lib: Vec<FGPattern> = default_library()
            .into_iter()
            .filter(|p| ["carboxyl", "hydroxyl", "carbonyl"].contains(&p.id.as_str()))
            .collect();
        let ids: Vec<_> = detect_functional_groups(&parse_smiles("CC(=O)O").unwrap(), &lib)
            .into_iter()
            .map(|m| m.pattern_id)
            .collect();
        assert!(ids.contains(&"carboxyl".to_string()));
        assert!(ids.contains(&"carbonyl".to_string()));
        assert!(!ids.contains(&"hydroxyl".to_string()));
        let mut dedup = ids.clone();
        dedup.dedup();
        assert_eq!(dedup, ids);
    }
}
