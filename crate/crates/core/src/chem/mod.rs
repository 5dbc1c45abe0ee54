//! Molecular graphs: SMILES parsing, ring perception, functional-group
//! matching, Murcko scaffolds and canonical scaffold keys.
//!
//! Aromaticity comes from lowercase SMILES notation only. Stereo marks are
//! accepted and dropped.

mod canon;
mod element;
mod library;
mod matcher;
mod pattern;
mod rings;
mod scaffold;
mod smiles;

pub use canon::canonical_string;
pub use element::Element;
pub use library::{default_library, load_library, parse_library, FGPattern, LibraryError};
pub use matcher::{detect_functional_groups, match_pattern, FGMatch};
pub use pattern::{BondQuery, ElementQuery, PatternError, Primitive, QueryAtom, QueryGraph};
pub use rings::{canonical_cycle, enumerate_cycles};
pub use scaffold::{murcko_scaffold, scaffold_key};
pub use smiles::{parse_smiles, SmilesError};

use std::collections::VecDeque;

/// Bond multiplicity as written in SMILES.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Valence contribution used for implicit-hydrogen counting. Aromatic
    /// bonds count 1; the extra pi electron is added per atom.
    pub(crate) fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    pub ring_member: bool,
    /// Hydrogen count given inside a bracket atom, `None` for organic-subset atoms.
    pub bracket_h: Option<u8>,
    /// Total attached hydrogens (bracket count, or implicit from default valence).
    pub hydrogens: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub ring: bool,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Heavy-atom graph. Hydrogens are counts on atoms, never nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Every simple cycle, each as a canonical atom sequence.
    pub rings: Vec<Vec<usize>>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    /// Builds a molecule from atoms and bonds, then derives adjacency,
    /// ring membership, the cycle list and hydrogen counts.
    ///
    /// Bonds must reference valid, distinct atoms with no duplicates; the
    /// parser guarantees this.
    pub(crate) fn assemble(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        let mut mol = Molecule {
            adjacency: vec![Vec::new(); atoms.len()],
            atoms,
            bonds,
            rings: Vec::new(),
        };
        for (i, bond) in mol.bonds.iter().enumerate() {
            mol.adjacency[bond.a].push((bond.b, i));
            mol.adjacency[bond.b].push((bond.a, i));
        }
        mol.perceive_rings();
        mol.assign_hydrogens();
        mol
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond index)` pairs in bond-insertion order.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    /// Connected components as sorted atom-index lists, ordered by first atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// The same graph with atoms renumbered: new atom `k` is old atom `order[k]`.
    /// `order` must be a permutation of `0..atom_count()`.
    pub fn relabeled(&self, order: &[usize]) -> Molecule {
        assert_eq!(order.len(), self.atoms.len(), "relabeled: not a permutation");
        let mut map = vec![usize::MAX; order.len()];
        for (new, &old) in order.iter().enumerate() {
            assert_eq!(map[old], usize::MAX, "relabeled: not a permutation");
            map[old] = new;
        }
        let atoms = order.iter().map(|&old| self.atoms[old].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: map[b.a],
                b: map[b.b],
                order: b.order,
                ring: b.ring,
            })
            .collect();
        Molecule::assemble(atoms, bonds)
    }

    /// Induced subgraph on `keep` (atom indices, any order). Atoms keep their
    /// relative order; hydrogens given in brackets are preserved, implicit ones
    /// are recomputed for the new neighborhood.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Molecule {
        let mut map = vec![usize::MAX; self.atoms.len()];
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut atoms = Vec::with_capacity(sorted.len());
        for (new, &old) in sorted.iter().enumerate() {
            map[old] = new;
            let mut atom = self.atoms[old].clone();
            atom.ring_member = false;
            atoms.push(atom);
        }
        let bonds = self
            .bonds
            .iter()
            .filter(|b| map[b.a] != usize::MAX && map[b.b] != usize::MAX)
            .map(|b| Bond {
                a: map[b.a],
                b: map[b.b],
                order: b.order,
                ring: false,
            })
            .collect();
        Molecule::assemble(atoms, bonds)
    }

    fn perceive_rings(&mut self) {
        let ring_bonds = rings::ring_bonds(self);
        for (bond, &in_ring) in self.bonds.iter_mut().zip(&ring_bonds) {
            bond.ring = in_ring;
        }
        for atom in &mut self.atoms {
            atom.ring_member = false;
        }
        for i in 0..self.bonds.len() {
            if self.bonds[i].ring {
                let (a, b) = (self.bonds[i].a, self.bonds[i].b);
                self.atoms[a].ring_member = true;
                self.atoms[b].ring_member = true;
            }
        }
        self.rings = rings::enumerate_cycles(self);
    }

    fn assign_hydrogens(&mut self) {
        for i in 0..self.atoms.len() {
            let atom = &self.atoms[i];
            if let Some(h) = atom.bracket_h {
                self.atoms[i].hydrogens = h;
                continue;
            }
            let mut used: u32 = self.adjacency[i]
                .iter()
                .map(|&(_, bi)| self.bonds[bi].order.valence())
                .sum();
            let has_aromatic_bond = self.adjacency[i]
                .iter()
                .any(|&(_, bi)| self.bonds[bi].order == BondOrder::Aromatic);
            if atom.aromatic && has_aromatic_bond {
                used += 1;
            }
            let h = atom
                .element
                .default_valences()
                .iter()
                .find(|&&v| v >= used)
                .map(|&v| v - used)
                .unwrap_or(0);
            self.atoms[i].hydrogens = h as u8;
        }
    }
}
