//! Restricted SMARTS-like query grammar.
//!
//! ```text
//! pattern   := chain
//! chain     := atom ( bond? ( atom | '(' bond? chain ')' | ringdigit ) )*
//! atom      := 'C' | 'N' | 'O' | 'S' | 'P' | 'F' | 'Cl' | 'Br' | 'I' | 'B'
//!            | 'c' | 'n' | 'o' | 's' | 'p' | 'b' | '*' | 'A' | 'a'
//!            | '[' alt (',' alt)* (';' '!'? prim)* ']'
//! alt       := any atom symbol above, or any element symbol
//! prim      := 'H' n | 'D' n | 'X' n | 'R' | '+' n? | '-' n?
//! bond      := '-' | '=' | '#' | ':' | '~'
//! ringdigit := '1'..'9'
//! ```
//!
//! Uppercase symbols match aliphatic atoms, lowercase aromatic ones. `H`
//! counts total hydrogens, `D` heavy neighbors, `X` heavy neighbors plus
//! hydrogens, `R` ring membership. An omitted bond matches single or
//! aromatic.

use thiserror::Error;

use super::{Atom, BondOrder, Element, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("empty pattern")]
    Empty,
    #[error("unexpected character '{ch}' at position {pos}")]
    Unexpected { ch: char, pos: usize },
    #[error("unbalanced parenthesis at position {0}")]
    UnbalancedParenthesis(usize),
    #[error("ring closure {0} never closed")]
    UnclosedRing(u32),
    #[error("unknown element '{0}'")]
    UnknownElement(String),
    #[error("bond at position {0} is not followed by an atom")]
    DanglingBond(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementQuery {
    Any,
    Aliphatic,
    Aromatic,
    Element { element: Element, aromatic: bool },
}

impl ElementQuery {
    fn matches(&self, atom: &Atom) -> bool {
        match *self {
            ElementQuery::Any => true,
            ElementQuery::Aliphatic => !atom.aromatic,
            ElementQuery::Aromatic => atom.aromatic,
            ElementQuery::Element { element, aromatic } => {
                atom.element == element && atom.aromatic == aromatic
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    TotalH(u8),
    HeavyDegree(u8),
    Connectivity(u8),
    InRing,
    Charge(i8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAtom {
    pub alternatives: Vec<ElementQuery>,
    /// Conjunction of `(primitive, negated)`.
    pub primitives: Vec<(Primitive, bool)>,
}

impl QueryAtom {
    pub fn matches(&self, mol: &Molecule, idx: usize) -> bool {
        let atom = &mol.atoms[idx];
        if !self.alternatives.iter().any(|q| q.matches(atom)) {
            return false;
        }
        self.primitives.iter().all(|&(prim, negated)| {
            let hit = match prim {
                Primitive::TotalH(n) => atom.hydrogens == n,
                Primitive::HeavyDegree(n) => mol.degree(idx) == n as usize,
                Primitive::Connectivity(n) => mol.degree(idx) + atom.hydrogens as usize == n as usize,
                Primitive::InRing => atom.ring_member,
                Primitive::Charge(c) => atom.charge == c,
            };
            hit != negated
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondQuery {
    /// Unspecified: single or aromatic.
    Implicit,
    Exact(BondOrder),
    Any,
}

impl BondQuery {
    pub fn matches(self, order: BondOrder) -> bool {
        match self {
            BondQuery::Implicit => matches!(order, BondOrder::Single | BondOrder::Aromatic),
            BondQuery::Exact(o) => o == order,
            BondQuery::Any => true,
        }
    }
}

/// Parsed query: atoms plus `(a, b, bond)` edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryGraph {
    pub atoms: Vec<QueryAtom>,
    pub bonds: Vec<(usize, usize, BondQuery)>,
}

impl QueryGraph {
    pub fn parse(text: &str) -> Result<QueryGraph, PatternError> {
        let chars: Vec<char> = text.trim().chars().collect();
        if chars.is_empty() {
            return Err(PatternError::Empty);
        }
        let mut graph = QueryGraph {
            atoms: Vec::new(),
            bonds: Vec::new(),
        };
        let mut pos = 0;
        let mut prev: Option<usize> = None;
        let mut stack: Vec<(Option<usize>, usize)> = Vec::new();
        let mut pending: Option<(BondQuery, usize)> = None;
        let mut rings: Vec<(u32, usize, Option<BondQuery>)> = Vec::new();

        while pos < chars.len() {
            let ch = chars[pos];
            match ch {
                '(' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(PatternError::Unexpected { ch, pos });
                    }
                    stack.push((prev, pos));
                    pos += 1;
                }
                ')' => {
                    if let Some((_, p)) = pending {
                        return Err(PatternError::DanglingBond(p));
                    }
                    let (saved, _) = stack.pop().ok_or(PatternError::UnbalancedParenthesis(pos))?;
                    prev = saved;
                    pos += 1;
                }
                '-' | '=' | '#' | ':' | '~' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(PatternError::Unexpected { ch, pos });
                    }
                    let q = match ch {
                        '-' => BondQuery::Exact(BondOrder::Single),
                        '=' => BondQuery::Exact(BondOrder::Double),
                        '#' => BondQuery::Exact(BondOrder::Triple),
                        ':' => BondQuery::Exact(BondOrder::Aromatic),
                        _ => BondQuery::Any,
                    };
                    pending = Some((q, pos));
                    pos += 1;
                }
                '1'..='9' => {
                    let Some(cur) = prev else {
                        return Err(PatternError::Unexpected { ch, pos });
                    };
                    let label = ch.to_digit(10).unwrap();
                    let here = pending.take().map(|(q, _)| q);
                    if let Some(i) = rings.iter().position(|r| r.0 == label) {
                        let (_, other, there) = rings.remove(i);
                        let q = here.or(there).unwrap_or(BondQuery::Implicit);
                        graph.bonds.push((other, cur, q));
                    } else {
                        rings.push((label, cur, here));
                    }
                    pos += 1;
                }
                _ => {
                    let (atom, next) = parse_atom(&chars, pos)?;
                    pos = next;
                    let idx = graph.atoms.len();
                    graph.atoms.push(atom);
                    match (prev, pending.take()) {
                        (Some(p), q) => graph
                            .bonds
                            .push((p, idx, q.map(|x| x.0).unwrap_or(BondQuery::Implicit))),
                        (None, Some((_, p))) => return Err(PatternError::DanglingBond(p)),
                        (None, None) => {}
                    }
                    prev = Some(idx);
                }
            }
        }
        if let Some((_, p)) = pending {
            return Err(PatternError::DanglingBond(p));
        }
        if let Some(&(_, p)) = stack.last() {
            return Err(PatternError::UnbalancedParenthesis(p));
        }
        if let Some(r) = rings.first() {
            return Err(PatternError::UnclosedRing(r.0));
        }
        Ok(graph)
    }

    /// Neighbor lists `(other atom, bond query)` per query atom.
    pub fn adjacency(&self) -> Vec<Vec<(usize, BondQuery)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for &(a, b, q) in &self.bonds {
            adj[a].push((b, q));
            adj[b].push((a, q));
        }
        adj
    }
}

fn symbol_query(symbol: &str) -> Result<ElementQuery, PatternError> {
    match symbol {
        "*" => return Ok(ElementQuery::Any),
        "A" => return Ok(ElementQuery::Aliphatic),
        "a" => return Ok(ElementQuery::Aromatic),
        _ => {}
    }
    let first = symbol.chars().next().unwrap();
    if first.is_ascii_lowercase() {
        let mut upper = symbol.to_string();
        upper[..1].make_ascii_uppercase();
        let element = Element::from_symbol(&upper)
            .filter(|e| e.can_be_aromatic())
            .ok_or_else(|| PatternError::UnknownElement(symbol.to_string()))?;
        Ok(ElementQuery::Element {
            element,
            aromatic: true,
        })
    } else {
        let element =
            Element::from_symbol(symbol).ok_or_else(|| PatternError::UnknownElement(symbol.to_string()))?;
        Ok(ElementQuery::Element {
            element,
            aromatic: false,
        })
    }
}

fn parse_atom(chars: &[char], pos: usize) -> Result<(QueryAtom, usize), PatternError> {
    let ch = chars[pos];
    if ch != '[' {
        let two: String = chars[pos..(pos + 2).min(chars.len())].iter().collect();
        let (sym, len) = if two == "Cl" || two == "Br" {
            (two, 2)
        } else if "BCNOPSFIbcnopsAa*".contains(ch) {
            (ch.to_string(), 1)
        } else {
            return Err(PatternError::Unexpected { ch, pos });
        };
        let q = symbol_query(&sym)?;
        return Ok((
            QueryAtom {
                alternatives: vec![q],
                primitives: Vec::new(),
            },
            pos + len,
        ));
    }
    let close = chars[pos..]
        .iter()
        .position(|&c| c == ']')
        .map(|off| pos + off)
        .ok_or(PatternError::UnbalancedParenthesis(pos))?;
    let body: String = chars[pos + 1..close].iter().collect();
    let mut parts = body.split(';');
    let alts = parts.next().unwrap_or("");
    if alts.is_empty() {
        return Err(PatternError::Unexpected { ch: ']', pos: close });
    }
    let alternatives = alts
        .split(',')
        .map(|s| {
            if s.is_empty() {
                Err(PatternError::Unexpected { ch: ',', pos })
            } else {
                symbol_query(s)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut primitives = Vec::new();
    for raw in parts {
        let (negated, p) = match raw.strip_prefix('!') {
            Some(rest) => (true, rest),
            None => (false, raw),
        };
        let bad = || PatternError::Unexpected {
            ch: p.chars().next().unwrap_or(';'),
            pos,
        };
        let num = |s: &str| s.parse::<u8>().map_err(|_| bad());
        let prim = match p.chars().next() {
            Some('H') => Primitive::TotalH(num(&p[1..])?),
            Some('D') => Primitive::HeavyDegree(num(&p[1..])?),
            Some('X') => Primitive::Connectivity(num(&p[1..])?),
            Some('R') if p.len() == 1 => Primitive::InRing,
            Some(sign @ ('+' | '-')) => {
                let mag: i8 = if p.len() == 1 {
                    1
                } else {
                    p[1..].parse().map_err(|_| bad())?
                };
                Primitive::Charge(if sign == '+' { mag } else { -mag })
            }
            _ => return Err(bad()),
        };
        primitives.push((prim, negated));
    }
    Ok((
        QueryAtom {
            alternatives,
            primitives,
        },
        close + 1,
    ))
}
