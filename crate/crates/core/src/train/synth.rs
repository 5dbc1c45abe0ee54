//! Deterministic synthetic corpus: substituted rings and chains, with text
//! rendered from the SMILES and HTA rendered from the detected groups.

use std::collections::{BTreeSet, HashSet};

use rand::seq::IndexedRandom;
use rand::Rng;

use super::TripletRecord;
use crate::chem::{canonical_string, parse_smiles, FGPattern};
use crate::rng::stream_rng;

/// Ring/chain skeletons as atom tokens; `true` marks positions that may carry a substituent.
const CORES: &[&[(&str, bool)]] = &[
    &[("c1", true), ("c", true), ("c", true), ("c", true), ("c", true), ("c1", true)],
    &[("c1", true), ("c", true), ("c", true), ("n", false), ("c", true), ("c1", true)],
    &[("c1", true), ("c", true), ("n", false), ("c", true), ("n", false), ("c1", true)],
    &[("C1", true), ("C", true), ("C", true), ("C", true), ("C", true), ("C1", true)],
    &[("C1", true), ("C", true), ("C", true), ("C", true), ("C1", true)],
    &[("c1", true), ("c", true), ("c", true), ("o", false), ("c1", true)],
    &[("c1", true), ("c", true), ("c", true), ("s", false), ("c1", true)],
    &[("C1", true), ("C", true), ("C", true), ("N", true), ("C", true), ("C1", true)],
    &[("C1", true), ("C", true), ("C", true), ("O", false), ("C1", true)],
    &[
        ("c1", true),
        ("c", true),
        ("c", true),
        ("c2", false),
        ("c", true),
        ("c", true),
        ("c", true),
        ("c", true),
        ("c2", false),
        ("c1", true),
    ],
    &[("C", true), ("C", true), ("C", true), ("C", true)],
    &[("C", true), ("C", true), ("O", false), ("C", true), ("C", true)],
    &[("C", true), ("C", true), ("N", true), ("C", true), ("C", true), ("C", true)],
];

const SUBSTITUENTS: &[&str] = &[
    "C", "CC", "CCC", "O", "N", "F", "Cl", "Br", "C(=O)O", "C(=O)N", "C#N", "OC", "C=O", "C(F)(F)F", "S", "CO", "NC",
    "C(=O)OC", "N(C)C", "OCC", "C(C)C", "CC(=O)O", "SC", "C(=O)C",
];

const NUMBERS: [&str; 13] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
];

fn count_word(n: usize) -> String {
    NUMBERS.get(n).map_or_else(|| n.to_string(), |w| w.to_string())
}

fn assemble<R: Rng>(rng: &mut R) -> String {
    let core = *CORES.choose(rng).unwrap();
    let open: Vec<usize> = (0..core.len()).filter(|&i| core[i].1).collect();
    let k = rng.random_range(1..=3.min(open.len()));
    let sites: BTreeSet<usize> = open.choose_multiple(rng, k).copied().collect();
    let mut s = String::new();
    for (i, (tok, _)) in core.iter().enumerate() {
        s.push_str(tok);
        if sites.contains(&i) {
            let sub = SUBSTITUENTS.choose(rng).unwrap();
            if i + 1 == core.len() {
                s.push_str(sub);
            } else {
                s.push('(');
                s.push_str(sub);
                s.push(')');
            }
        }
    }
    s
}

/// Free-text rendering of a parsed SMILES string.
pub fn render_text(smiles: &str) -> String {
    let mol = parse_smiles(smiles).expect("generated SMILES parse");
    let heavy = mol.atom_count();
    let rings = mol.bonds.len() + mol.components().len() - heavy;
    let aromatic = mol.atoms.iter().filter(|a| a.aromatic).count();
    let mut hetero: Vec<&str> = mol
        .atoms
        .iter()
        .map(|a| a.element.symbol())
        .filter(|&s| s != "C")
        .collect();
    hetero.sort_unstable();
    let hetero = if hetero.is_empty() {
        "no heteroatoms".to_string()
    } else {
        format!("heteroatoms {}", hetero.join(" "))
    };
    format!(
        "The molecule {smiles} has {} heavy atoms, {} rings, {} aromatic atoms and {hetero}.",
        count_word(heavy),
        count_word(rings),
        count_word(aromatic)
    )
}

/// Taxonomy-style rendering of the functional groups present.
pub fn render_hta(record_groups: &[String]) -> String {
    if record_groups.is_empty() {
        "Chemical class: unfunctionalized hydrocarbon skeleton".to_string()
    } else {
        format!("Chemical class: {}", record_groups.join("; "))
    }
}

/// `n` distinct molecules (by canonical string) with ids `SYN0001`, ...
pub fn synthetic_corpus(n: usize, seed: u64, library: &[FGPattern]) -> Vec<TripletRecord> {
    let mut rng = stream_rng(seed, "synth", 0, 0);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let smiles = assemble(&mut rng);
        let Ok(mol) = parse_smiles(&smiles) else { continue };
        if !seen.insert(canonical_string(&mol)) {
            continue;
        }
        let probe = TripletRecord::build("probe", &smiles, &render_text(&smiles), "-", library).unwrap();
        let names: BTreeSet<String> = probe
            .fg_matches
            .iter()
            .filter_map(|m| library.iter().find(|p| p.id == m.pattern_id))
            .map(|p| p.name.clone())
            .collect();
        let hta = render_hta(&names.into_iter().collect::<Vec<_>>());
        let id = format!("SYN{:04}", out.len() + 1);
        out.push(TripletRecord { id, hta, ..probe });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::default_library;

    #[test]
    fn corpus_is_deterministic_and_unique() {
        let lib = default_library();
        let a = synthetic_corpus(256, 7, &lib);
        assert_eq!(a, synthetic_corpus(256, 7, &lib));
        assert_eq!(a[0].id, "SYN0001");
        let smiles: HashSet<_> = a.iter().map(|r| r.smiles.clone()).collect();
        assert_eq!(smiles.len(), 256);
        assert!(a.iter().all(|r| r.text.contains(&r.smiles)));
    }

    #[test]
    fn text_rendering() {
        assert_eq!(
            render_text("c1ccccc1O"),
            "The molecule c1ccccc1O has seven heavy atoms, one rings, six aromatic atoms and heteroatoms O."
        );
    }
}
