//! Canonical SMILES-like strings for molecular graphs.
//!
//! Atoms are ranked by iterative neighborhood refinement. Remaining ties are
//! broken by trying each member of the first tied class and keeping the
//! lexicographically smallest emission, up to a fixed search budget.

use super::{Atom, BondOrder, Molecule};

const LEAF_BUDGET: usize = 4096;

type Key = (u8, bool, i8, u8, usize, bool);

fn atom_invariant(mol: &Molecule, i: usize) -> Key {
    let a = &mol.atoms[i];
    (
        a.element.atomic_number(),
        a.aromatic,
        a.charge,
        a.hydrogens,
        mol.degree(i),
        a.ring_member,
    )
}

fn dense_rank<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).unwrap())
        .collect()
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().max().map_or(0, |m| m + 1)
}

fn refine(mol: &Molecule, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut nb: Vec<(usize, u8)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(v, bi)| (ranks[v], mol.bonds[bi].order.code()))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_rank(&keys);
        if class_count(&next) == class_count(&ranks) {
            return next;
        }
        ranks = next;
    }
}

/// Deterministic string that is equal for isomorphic molecules (within the
/// tie-break search budget). The empty molecule maps to `""`.
pub fn canonical_string(mol: &Molecule) -> String {
    if mol.is_empty() {
        return String::new();
    }
    let keys: Vec<Key> = (0..mol.atom_count()).map(|i| atom_invariant(mol, i)).collect();
    let ranks = refine(mol, dense_rank(&keys));
    let mut budget = LEAF_BUDGET;
    search(mol, ranks, &mut budget)
}

fn search(mol: &Molecule, ranks: Vec<usize>, budget: &mut usize) -> String {
    let n = ranks.len();
    if class_count(&ranks) == n {
        *budget = budget.saturating_sub(1);
        return emit_all(mol, &ranks);
    }
    let mut counts = vec![0usize; n];
    for &r in &ranks {
        counts[r] += 1;
    }
    let tied = (0..n).find(|&r| counts[r] > 1).unwrap();
    let members: Vec<usize> = (0..n).filter(|&i| ranks[i] == tied).collect();
    let mut best: Option<String> = None;
    for (k, &chosen) in members.iter().enumerate() {
        if k > 0 && *budget == 0 {
            break;
        }
        let keys: Vec<(usize, bool)> = (0..n).map(|i| (ranks[i], i != chosen)).collect();
        let split = refine(mol, dense_rank(&keys));
        let s = search(mol, split, budget);
        if best.as_ref().is_none_or(|b| s < *b) {
            best = Some(s);
        }
    }
    best.unwrap()
}

fn emit_all(mol: &Molecule, ranks: &[usize]) -> String {
    let mut parts: Vec<String> = mol
        .components()
        .iter()
        .map(|comp| {
            let start = *comp.iter().min_by_key(|&&i| ranks[i]).unwrap();
            Emitter::new(mol, ranks).run(start)
        })
        .collect();
    parts.sort();
    parts.join(".")
}

pub(crate) fn atom_symbol(atom: &Atom) -> String {
    let mut sym = atom.element.symbol().to_string();
    if atom.aromatic {
        sym = sym.to_lowercase();
    }
    let bracket = !atom.element.is_organic_subset()
        || atom.charge != 0
        || (atom.aromatic && atom.hydrogens > 0 && atom.element != super::Element::C);
    if !bracket {
        return sym;
    }
    let mut out = format!("[{sym}");
    match atom.hydrogens {
        0 => {}
        1 => out.push('H'),
        h => out.push_str(&format!("H{h}")),
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    out.push(']');
    out
}

fn bond_symbol(mol: &Molecule, bi: usize) -> &'static str {
    let b = &mol.bonds[bi];
    let both_aromatic = mol.atoms[b.a].aromatic && mol.atoms[b.b].aromatic;
    match b.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

struct Emitter<'a> {
    mol: &'a Molecule,
    ranks: &'a [usize],
    visited: Vec<bool>,
    order: Vec<usize>,
    children: Vec<Vec<(usize, usize)>>,
    /// Ring bonds opened at an atom (bond index), and closed at an atom.
    opens: Vec<Vec<usize>>,
    closes: Vec<Vec<usize>>,
    seen_bond: Vec<bool>,
    digit_of: Vec<Option<usize>>,
    free: Vec<bool>,
}

impl<'a> Emitter<'a> {
    fn new(mol: &'a Molecule, ranks: &'a [usize]) -> Self {
        let n = mol.atom_count();
        Emitter {
            mol,
            ranks,
            visited: vec![false; n],
            order: vec![usize::MAX; n],
            children: vec![Vec::new(); n],
            opens: vec![Vec::new(); n],
            closes: vec![Vec::new(); n],
            seen_bond: vec![false; mol.bonds.len()],
            digit_of: vec![None; mol.bonds.len()],
            free: Vec::new(),
        }
    }

    fn run(mut self, start: usize) -> String {
        let mut counter = 0;
        self.walk(start, usize::MAX, &mut counter);
        let mut out = String::new();
        self.write(start, &mut out);
        out
    }

    fn sorted_neighbors(&self, u: usize) -> Vec<(usize, usize)> {
        let mut nb = self.mol.neighbors(u).to_vec();
        nb.sort_by_key(|&(v, _)| self.ranks[v]);
        nb
    }

    fn walk(&mut self, u: usize, parent_bond: usize, counter: &mut usize) {
        self.visited[u] = true;
        self.order[u] = *counter;
        *counter += 1;
        for (v, bi) in self.sorted_neighbors(u) {
            if bi == parent_bond || self.seen_bond[bi] {
                continue;
            }
            self.seen_bond[bi] = true;
            if self.visited[v] {
                // back edge: v is an ancestor, opened there and closed here
                self.opens[v].push(bi);
                self.closes[u].push(bi);
            } else {
                self.children[u].push((v, bi));
                self.walk(v, bi, counter);
            }
        }
    }

    fn take_digit(&mut self) -> usize {
        match self.free.iter().position(|&f| f) {
            Some(d) => {
                self.free[d] = false;
                d + 1
            }
            None => {
                self.free.push(false);
                self.free.len()
            }
        }
    }

    fn digit_text(d: usize) -> String {
        if d < 10 {
            d.to_string()
        } else {
            format!("%{d:02}")
        }
    }

    fn write(&mut self, u: usize, out: &mut String) {
        out.push_str(&atom_symbol(&self.mol.atoms[u]));
        let mut closes = self.closes[u].clone();
        closes.sort_by_key(|&bi| self.order[self.mol.bonds[bi].other(u)]);
        for bi in closes {
            let d = self.digit_of[bi].take().unwrap();
            self.free[d - 1] = true;
            out.push_str(&Self::digit_text(d));
        }
        let mut opens = self.opens[u].clone();
        opens.sort_by_key(|&bi| self.ranks[self.mol.bonds[bi].other(u)]);
        for bi in opens {
            let d = self.take_digit();
            self.digit_of[bi] = Some(d);
            out.push_str(bond_symbol(self.mol, bi));
            out.push_str(&Self::digit_text(d));
        }
        let children = self.children[u].clone();
        let last = children.len().saturating_sub(1);
        for (k, (v, bi)) in children.into_iter().enumerate() {
            if k < last {
                out.push('(');
                out.push_str(bond_symbol(self.mol, bi));
                self.write(v, out);
                out.push(')');
            } else {
                out.push_str(bond_symbol(self.mol, bi));
                self.write(v, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn key(s: &str) -> String {
        canonical_string(&parse_smiles(s).unwrap())
    }

    #[test]
    fn equivalent_spellings() {
        assert_eq!(key("c1ccccc1"), key("c1ccc(cc1)"));
        assert_eq!(key("OCC"), key("CCO"));
        assert_eq!(key("CC(=O)O"), key("OC(C)=O"));
        assert_eq!(key("Cc1ccccc1O"), key("Oc1ccccc1C"));
        assert_eq!(key("c1ccc2ccccc2c1"), key("c1cc2ccccc2cc1"));
        assert_eq!(key("C1CC2CCC1CC2"), key("C1CC(CC2)CCC12"));
    }

    #[test]
    fn distinguishes_isomers() {
        assert_ne!(key("CCO"), key("COC"));
        assert_ne!(key("Cc1ccccc1O"), key("Cc1ccc(O)cc1"));
        assert_ne!(key("C=CC"), key("C1CC1"));
    }

    #[test]
    fn output_reparses_to_same_key() {
        for s in ["CC(=O)Oc1ccccc1C(=O)O", "c1ccc2[nH]ccc2c1", "C[N+](C)(C)C", "C1CC2CCC1CC2"] {
            let k = key(s);
            assert_eq!(key(&k), k, "{s} -> {k}");
        }
    }

    #[test]
    fn empty_is_blank() {
        assert_eq!(canonical_string(&Molecule::empty()), "");
    }
}
