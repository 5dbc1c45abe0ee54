use std::collections::BTreeMap;

use thiserror::Error;

use super::{Atom, Bond, BondOrder, Element, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unbalanced parenthesis at position {0}")]
    UnbalancedParenthesis(usize),
    #[error("ring bond {0} was opened but never closed")]
    UnclosedRingBond(u32),
    #[error("unknown element '{symbol}' at position {pos}")]
    UnknownElement { symbol: String, pos: usize },
    #[error("invalid charge at position {0}")]
    InvalidCharge(usize),
    #[error("unexpected character '{ch}' at position {pos}")]
    UnexpectedCharacter { ch: char, pos: usize },
    #[error("bond symbol at position {0} is not followed by an atom")]
    DanglingBond(usize),
    #[error("conflicting bond orders on ring closure {0}")]
    ConflictingRingBond(u32),
    #[error("duplicate or self bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("aromatic atom {0} is not in a ring")]
    AromaticOutsideRing(usize),
}

#[derive(Clone, Copy)]
enum BondSym {
    Order(BondOrder),
    /// `/` or `\`: a single bond whose stereo meaning is discarded.
    Directional,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Order(o) => o,
            BondSym::Directional => BondOrder::Single,
        }
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    _src: &'a str,
}

/// Parses a SMILES string into a [`Molecule`].
///
/// Atoms appear in left-to-right order. Lowercase atoms are aromatic and
/// bonds between two aromatic atoms default to aromatic. Chirality and
/// directional bond marks are accepted and ignored.
pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(SmilesError::Empty);
    }
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        _src: text,
    };
    p.run()?;
    let mol = Molecule::assemble(p.atoms, p.bonds);
    if let Some(i) = mol.atoms.iter().position(|a| a.aromatic && !a.ring_member) {
        return Err(SmilesError::AromaticOutsideRing(i));
    }
    Ok(mol)
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        let mut prev: Option<usize> = None;
        let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
        let mut pending: Option<(BondSym, usize)> = None;
        let mut open_rings: BTreeMap<u32, (usize, Option<BondSym>)> = BTreeMap::new();

        while let Some(ch) = self.peek() {
            let pos = self.pos;
            match ch {
                '(' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(SmilesError::UnbalancedParenthesis(pos));
                    }
                    branches.push((prev, pos));
                    self.pos += 1;
                }
                ')' => {
                    if let Some((_, bpos)) = pending {
                        return Err(SmilesError::DanglingBond(bpos));
                    }
                    let (saved, _) = branches
                        .pop()
                        .ok_or(SmilesError::UnbalancedParenthesis(pos))?;
                    prev = saved;
                    self.pos += 1;
                }
                '.' => {
                    if let Some((_, bpos)) = pending {
                        return Err(SmilesError::DanglingBond(bpos));
                    }
                    if !branches.is_empty() {
                        return Err(SmilesError::UnexpectedCharacter { ch, pos });
                    }
                    prev = None;
                    self.pos += 1;
                }
                '-' | '=' | '#' | ':' | '/' | '\\' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(SmilesError::UnexpectedCharacter { ch, pos });
                    }
                    let sym = match ch {
                        '-' => BondSym::Order(BondOrder::Single),
                        '=' => BondSym::Order(BondOrder::Double),
                        '#' => BondSym::Order(BondOrder::Triple),
                        ':' => BondSym::Order(BondOrder::Aromatic),
                        _ => BondSym::Directional,
                    };
                    pending = Some((sym, pos));
                    self.pos += 1;
                }
                '0'..='9' | '%' => {
                    let Some(current) = prev else {
                        return Err(SmilesError::UnexpectedCharacter { ch, pos });
                    };
                    let label = self.ring_label()?;
                    let here = pending.take().map(|(s, _)| s);
                    match open_rings.remove(&label) {
                        Some((other, there)) => {
                            let order = match (here, there) {
                                (Some(a), Some(b)) if a.order() != b.order() => {
                                    return Err(SmilesError::ConflictingRingBond(label))
                                }
                                (Some(s), _) | (None, Some(s)) => s.order(),
                                (None, None) => self.default_order(other, current),
                            };
                            self.add_bond(other, current, order)?;
                        }
                        None => {
                            open_rings.insert(label, (current, here));
                        }
                    }
                }
                _ => {
                    let atom = self.atom()?;
                    let idx = self.atoms.len();
                    self.atoms.push(atom);
                    if let Some(p) = prev {
                        let order = match pending.take() {
                            Some((s, _)) => s.order(),
                            None => self.default_order(p, idx),
                        };
                        self.add_bond(p, idx, order)?;
                    } else if let Some((_, bpos)) = pending {
                        return Err(SmilesError::DanglingBond(bpos));
                    }
                    prev = Some(idx);
                }
            }
        }
        if let Some((_, bpos)) = pending {
            return Err(SmilesError::DanglingBond(bpos));
        }
        if let Some(&(_, bpos)) = branches.last() {
            return Err(SmilesError::UnbalancedParenthesis(bpos));
        }
        if let Some((&label, _)) = open_rings.iter().next() {
            return Err(SmilesError::UnclosedRingBond(label));
        }
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<(), SmilesError> {
        let dup = self
            .bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a));
        if a == b || dup {
            return Err(SmilesError::DuplicateBond(a.min(b), a.max(b)));
        }
        self.bonds.push(Bond {
            a,
            b,
            order,
            ring: false,
        });
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32, SmilesError> {
        let pos = self.pos;
        if self.peek() == Some('%') {
            let (Some(d1), Some(d2)) = (self.peek_at(1), self.peek_at(2)) else {
                return Err(SmilesError::UnexpectedCharacter { ch: '%', pos });
            };
            match (d1.to_digit(10), d2.to_digit(10)) {
                (Some(a), Some(b)) => {
                    self.pos += 3;
                    Ok(a * 10 + b)
                }
                _ => Err(SmilesError::UnexpectedCharacter { ch: '%', pos }),
            }
        } else {
            let d = self.peek().and_then(|c| c.to_digit(10)).unwrap();
            self.pos += 1;
            Ok(d)
        }
    }

    fn atom(&mut self) -> Result<Atom, SmilesError> {
        let pos = self.pos;
        let ch = self.peek().unwrap();
        if ch == '[' {
            return self.bracket_atom();
        }
        let two: String = self.chars[pos..(pos + 2).min(self.chars.len())].iter().collect();
        let (symbol, aromatic, len) = match two.as_str() {
            "Cl" | "Br" => (two.clone(), false, 2),
            _ => match ch {
                'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' | '*' => (ch.to_string(), false, 1),
                'b' | 'c' | 'n' | 'o' | 'p' | 's' => (ch.to_ascii_uppercase().to_string(), true, 1),
                c if c.is_ascii_alphabetic() => {
                    return Err(SmilesError::UnknownElement {
                        symbol: c.to_string(),
                        pos,
                    })
                }
                c => return Err(SmilesError::UnexpectedCharacter { ch: c, pos }),
            },
        };
        self.pos += len;
        let element = Element::from_symbol(&symbol).ok_or(SmilesError::UnknownElement { symbol, pos })?;
        Ok(Atom {
            element,
            aromatic,
            charge: 0,
            ring_member: false,
            bracket_h: None,
            hydrogens: 0,
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        // isotope
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let sym_pos = self.pos;
        let first = self
            .peek()
            .ok_or(SmilesError::UnbalancedParenthesis(open))?;
        let (element, aromatic) = if first == '*' {
            self.pos += 1;
            (Element::WILDCARD, false)
        } else if first.is_ascii_uppercase() {
            // Prefer a two-letter symbol when it exists.
            let second = self.peek_at(1).filter(|c| c.is_ascii_lowercase());
            let two = second.map(|s| format!("{first}{s}"));
            match two.as_deref().and_then(Element::from_symbol) {
                Some(e) => {
                    self.pos += 2;
                    (e, false)
                }
                None => {
                    self.pos += 1;
                    let e = Element::from_symbol(&first.to_string()).ok_or(
                        SmilesError::UnknownElement {
                            symbol: first.to_string(),
                            pos: sym_pos,
                        },
                    )?;
                    (e, false)
                }
            }
        } else if first.is_ascii_lowercase() {
            let two: String = [Some(first), self.peek_at(1)].iter().flatten().collect();
            let two_el = match two.as_str() {
                "se" | "as" | "te" => {
                    let mut s = two.clone();
                    s[..1].make_ascii_uppercase();
                    Element::from_symbol(&s)
                }
                _ => None,
            };
            if let Some(e) = two_el {
                self.pos += 2;
                (e, true)
            } else {
                let e = Element::from_symbol(&first.to_ascii_uppercase().to_string())
                    .filter(|e| e.can_be_aromatic())
                    .ok_or(SmilesError::UnknownElement {
                        symbol: first.to_string(),
                        pos: sym_pos,
                    })?;
                self.pos += 1;
                (e, true)
            }
        } else {
            return Err(SmilesError::UnexpectedCharacter {
                ch: first,
                pos: sym_pos,
            });
        };

        // chirality
        while self.peek() == Some('@') {
            self.pos += 1;
        }
        // hydrogen count
        let mut bracket_h = 0u8;
        if self.peek() == Some('H') {
            self.pos += 1;
            bracket_h = 1;
            if let Some(d) = self.peek().and_then(|c| c.to_digit(10)) {
                bracket_h = d as u8;
                self.pos += 1;
            }
        }
        // charge
        let mut charge: i32 = 0;
        if let Some(sign_ch) = self.peek().filter(|&c| c == '+' || c == '-') {
            let cpos = self.pos;
            let sign = if sign_ch == '+' { 1 } else { -1 };
            self.pos += 1;
            let mut digits = String::new();
            while let Some(c) = self.peek().filter(|c| c.is_ascii_digit()) {
                digits.push(c);
                self.pos += 1;
            }
            let mut magnitude: i32 = if digits.is_empty() {
                1
            } else {
                digits.parse().map_err(|_| SmilesError::InvalidCharge(cpos))?
            };
            if digits.is_empty() {
                while self.peek() == Some(sign_ch) {
                    magnitude += 1;
                    self.pos += 1;
                }
            }
            if matches!(self.peek(), Some('+') | Some('-')) || !(1..=15).contains(&magnitude) {
                return Err(SmilesError::InvalidCharge(cpos));
            }
            charge = sign * magnitude;
        }
        // atom class
        if self.peek() == Some(':') {
            self.pos += 1;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        match self.peek() {
            Some(']') => self.pos += 1,
            Some(c) => {
                return Err(SmilesError::UnexpectedCharacter {
                    ch: c,
                    pos: self.pos,
                })
            }
            None => return Err(SmilesError::UnbalancedParenthesis(open)),
        }
        Ok(Atom {
            element,
            aromatic,
            charge: charge as i8,
            ring_member: false,
            bracket_h: Some(bracket_h),
            hydrogens: bracket_h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(s: &str) -> (usize, usize, usize) {
        let m = parse_smiles(s).unwrap();
        (m.atoms.len(), m.bonds.len(), m.rings.len())
    }

    #[test]
    fn ethanol() {
        let m = parse_smiles("CCO").unwrap();
        let symbols: Vec<_> = m.atoms.iter().map(|a| a.element.symbol()).collect();
        assert_eq!(symbols, ["C", "C", "O"]);
        assert_eq!(m.bonds.len(), 2);
        assert!(m.bonds.iter().all(|b| b.order == BondOrder::Single));
        let h: Vec<_> = m.atoms.iter().map(|a| a.hydrogens).collect();
        assert_eq!(h, [3, 2, 1]);
    }

    #[test]
    fn cyclopropane_and_benzene() {
        assert_eq!(counts("C1CC1"), (3, 3, 1));
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.atoms.len(), 6);
        assert!(m.atoms.iter().all(|a| a.aromatic && a.ring_member && a.hydrogens == 1));
        assert_eq!(m.bonds.len(), 6);
        assert!(m.bonds.iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(m.rings, vec![vec![0, 1, 2, 3, 4, 5]]);
    }

    #[test]
    fn reference_counts() {
        // (atoms, bonds, simple cycles) for well-known structures.
        assert_eq!(counts("CC(=O)O"), (4, 3, 0));
        assert_eq!(counts("CC(=O)Oc1ccccc1C(=O)O"), (13, 13, 1));
        assert_eq!(counts("c1ccc2ccccc2c1"), (10, 11, 3));
        assert_eq!(counts("C1CC2CCC1CC2"), (8, 9, 3));
        assert_eq!(counts("Cn1cnc2c1c(=O)n(C)c(=O)n2C"), (14, 15, 3));
        assert_eq!(counts("[NH4+].[Cl-]"), (2, 0, 0));
        assert_eq!(counts("C%10CC%10"), (3, 3, 1));
    }

    #[test]
    fn bracket_atoms() {
        let m = parse_smiles("[13CH3][NH3+]").unwrap();
        assert_eq!(m.atoms[0].hydrogens, 3);
        assert_eq!(m.atoms[1].charge, 1);
        let m = parse_smiles("C[O-]").unwrap();
        assert_eq!(m.atoms[1].charge, -1);
        assert_eq!(m.atoms[1].hydrogens, 0);
        let m = parse_smiles("[Fe+++]").unwrap();
        assert_eq!(m.atoms[0].charge, 3);
        let m = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(m.atoms[3].hydrogens, 1);
        assert!(m.atoms[3].aromatic);
        let m = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        assert_eq!(m.atoms.len(), 6);
        assert_eq!(m.atoms[1].hydrogens, 1);
    }

    #[test]
    fn stereo_bonds_become_single() {
        let m = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(m.bonds[0].order, BondOrder::Single);
        assert_eq!(m.bonds[1].order, BondOrder::Double);
        assert_eq!(m.bonds[2].order, BondOrder::Single);
    }

    #[test]
    fn implicit_hydrogens() {
        let m = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(m.atoms[3].hydrogens, 0);
        let m = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(m.atoms[1].hydrogens, 0);
        let m = parse_smiles("C#N").unwrap();
        assert_eq!((m.atoms[0].hydrogens, m.atoms[1].hydrogens), (1, 0));
        let m = parse_smiles("Cc1ccccc1").unwrap();
        assert_eq!(m.atoms[1].hydrogens, 0);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_smiles("C("), Err(SmilesError::UnbalancedParenthesis(1)));
        assert_eq!(parse_smiles("CC)"), Err(SmilesError::UnbalancedParenthesis(2)));
        assert_eq!(parse_smiles("C1CC"), Err(SmilesError::UnclosedRingBond(1)));
        assert!(matches!(parse_smiles("CXC"), Err(SmilesError::UnknownElement { .. })));
        assert!(matches!(parse_smiles("[Xy]"), Err(SmilesError::UnknownElement { .. })));
        assert_eq!(parse_smiles("[N+-]"), Err(SmilesError::InvalidCharge(2)));
        assert_eq!(parse_smiles("[C+99]"), Err(SmilesError::InvalidCharge(2)));
        assert_eq!(parse_smiles(""), Err(SmilesError::Empty));
        assert!(matches!(parse_smiles("CC="), Err(SmilesError::DanglingBond(2))));
        assert!(matches!(parse_smiles("C11"), Err(SmilesError::DuplicateBond(0, 0))));
        assert!(matches!(parse_smiles("C12CC12"), Err(SmilesError::DuplicateBond(..))));
        assert!(matches!(parse_smiles("cc"), Err(SmilesError::AromaticOutsideRing(0))));
        assert!(matches!(parse_smiles("C=1CC-1"), Err(SmilesError::ConflictingRingBond(1))));
    }

    #[test]
    fn deterministic() {
        let a = parse_smiles("CC(C)(C)c1ccc(O)cc1").unwrap();
        let b = parse_smiles("CC(C)(C)c1ccc(O)cc1").unwrap();
        assert_eq!(a, b);
    }
}
