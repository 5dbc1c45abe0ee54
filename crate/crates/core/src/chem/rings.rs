//! Ring perception.
//!
//! Ring bonds are the non-bridge edges. Cycles are enumerated through the
//! cycle space: every subset of fundamental cycles is XOR-combined and kept
//! when the result is a single simple cycle.

use super::Molecule;

/// Above this cyclomatic number the full subset walk is skipped and only
/// fundamental cycles are reported.
const MAX_CYCLOMATIC: usize = 16;

/// Marks each bond that lies on some cycle (i.e. is not a bridge).
pub(crate) fn ring_bonds(mol: &Molecule) -> Vec<bool> {
    let n = mol.atom_count();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; mol.bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // iterative DFS: (atom, parent bond, next neighbor slot)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(top) = stack.last_mut() {
            let (u, parent_bond, slot) = *top;
            top.2 += 1;
            if let Some(&(v, bi)) = mol.neighbors(u).get(slot) {
                if bi == parent_bond {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, bi, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[parent_bond] = true;
                    }
                }
            }
        }
    }
    is_bridge.iter().map(|b| !b).collect()
}

/// Rotates and orients a cycle so it starts at its smallest atom and the
/// second atom is smaller than the last.
pub fn canonical_cycle(cycle: &[usize]) -> Vec<usize> {
    let len = cycle.len();
    if len == 0 {
        return Vec::new();
    }
    let start = (0..len).min_by_key(|&i| cycle[i]).unwrap();
    let forward: Vec<usize> = (0..len).map(|k| cycle[(start + k) % len]).collect();
    let backward: Vec<usize> = (0..len).map(|k| cycle[(start + len - k) % len]).collect();
    if len > 2 && backward[1] < forward[1] {
        backward
    } else {
        forward
    }
}

/// All simple cycles of the molecule as canonical atom sequences, sorted by
/// length then lexicographically.
pub fn enumerate_cycles(mol: &Molecule) -> Vec<Vec<usize>> {
    let n = mol.atom_count();
    let m = mol.bonds.len();
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let fundamentals = fundamental_cycles(mol);
    let words = m.div_ceil(64);
    let mut cycles = Vec::new();
    if fundamentals.len() > MAX_CYCLOMATIC {
        for f in &fundamentals {
            if let Some(c) = as_simple_cycle(mol, f) {
                cycles.push(c);
            }
        }
    } else {
        let c = fundamentals.len();
        // Gray-code walk: each step toggles one fundamental cycle.
        let mut acc = vec![0u64; words];
        for step in 1u64..(1u64 << c) {
            let bit = step.trailing_zeros() as usize;
            for (a, f) in acc.iter_mut().zip(&fundamentals[bit]) {
                *a ^= f;
            }
            if let Some(cyc) = as_simple_cycle(mol, &acc) {
                cycles.push(cyc);
            }
        }
    }
    cycles.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    cycles.dedup();
    cycles
}

fn fundamental_cycles(mol: &Molecule) -> Vec<Vec<u64>> {
    let n = mol.atom_count();
    let words = mol.bonds.len().div_ceil(64);
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut depth = vec![usize::MAX; n];
    let mut tree_bond = vec![false; mol.bonds.len()];
    for root in 0..n {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, bi) in mol.neighbors(u) {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    parent[v] = Some((u, bi));
                    tree_bond[bi] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    let mut out = Vec::new();
    for (bi, bond) in mol.bonds.iter().enumerate() {
        if tree_bond[bi] {
            continue;
        }
        let mut set = vec![0u64; words];
        set[bi / 64] |= 1 << (bi % 64);
        let (mut a, mut b) = (bond.a, bond.b);
        while a != b {
            if depth[a] >= depth[b] {
                let (p, pb) = parent[a].unwrap();
                set[pb / 64] ^= 1 << (pb % 64);
                a = p;
            } else {
                let (p, pb) = parent[b].unwrap();
                set[pb / 64] ^= 1 << (pb % 64);
                b = p;
            }
        }
        out.push(set);
    }
    out
}

/// Returns the canonical atom sequence when `edges` forms exactly one
/// simple cycle.
fn as_simple_cycle(mol: &Molecule, edges: &[u64]) -> Option<Vec<usize>> {
    let n = mol.atom_count();
    let mut deg = vec![0u8; n];
    let mut count = 0usize;
    let mut first = None;
    for (w, &word) in edges.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let bi = w * 64 + bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let b = &mol.bonds[bi];
            deg[b.a] += 1;
            deg[b.b] += 1;
            if deg[b.a] > 2 || deg[b.b] > 2 {
                return None;
            }
            count += 1;
            first.get_or_insert(b.a);
        }
    }
    let start = first?;
    let in_set = |bi: usize| edges[bi / 64] >> (bi % 64) & 1 == 1;
    // Walk the cycle from `start`; it is simple iff the walk covers every edge.
    let mut seq = vec![start];
    let mut prev_bond = usize::MAX;
    let mut cur = start;
    loop {
        let next = mol
            .neighbors(cur)
            .iter()
            .find(|&&(_, bi)| bi != prev_bond && in_set(bi))?;
        prev_bond = next.1;
        cur = next.0;
        if cur == start {
            break;
        }
        seq.push(cur);
    }
    (seq.len() == count).then(|| canonical_cycle(&seq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn canonical_rotation() {
        assert_eq!(canonical_cycle(&[3, 1, 2]), vec![1, 2, 3]);
        assert_eq!(canonical_cycle(&[3, 2, 1]), vec![1, 2, 3]);
        assert_eq!(canonical_cycle(&[5, 0, 9, 4]), vec![0, 5, 4, 9]);
    }

    #[test]
    fn bridges_and_ring_flags() {
        let m = parse_smiles("C1CC1CC1CC1").unwrap();
        let flags: Vec<bool> = m.atoms.iter().map(|a| a.ring_member).collect();
        assert_eq!(flags, [true, true, true, false, true, true, true]);
        assert_eq!(m.rings.len(), 2);
    }

    #[test]
    fn spiro_and_fused() {
        // spiro[2.2]pentane: two triangles sharing one atom
        let m = parse_smiles("C1CC12CC2").unwrap();
        assert_eq!(m.rings.len(), 2);
        // decalin: two 6-rings plus the 10-ring envelope
        let m = parse_smiles("C1CCC2CCCCC2C1").unwrap();
        let sizes: Vec<usize> = m.rings.iter().map(Vec::len).collect();
        assert_eq!(sizes, [6, 6, 10]);
    }

    #[test]
    fn acyclic_has_no_rings() {
        let m = parse_smiles("CC(C)CC(=O)O").unwrap();
        assert!(m.rings.is_empty());
        assert!(m.atoms.iter().all(|a| !a.ring_member));
    }
}
