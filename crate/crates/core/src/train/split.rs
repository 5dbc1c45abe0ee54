use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{TrainError, TripletRecord};
use crate::chem::{parse_smiles, scaffold_key};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    #[default]
    Scaffold,
    Random,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Vec<TripletRecord>,
    pub val: Vec<TripletRecord>,
    pub test: Vec<TripletRecord>,
}

/// Scaffold key of a SMILES string (empty for acyclic molecules).
pub fn smiles_scaffold(smiles: &str) -> String {
    parse_smiles(smiles).map_or_else(|_| String::new(), |m| scaffold_key(&m))
}

pub fn record_scaffold(record: &TripletRecord) -> String {
    smiles_scaffold(&record.smiles)
}

/// Scaffold groups, largest first, ties by key.
pub fn scaffold_groups<S: AsRef<str>>(smiles: &[S]) -> Vec<(String, Vec<usize>)> {
    let mut by_key: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in smiles.iter().enumerate() {
        by_key.entry(smiles_scaffold(s.as_ref())).or_default().push(i);
    }
    let mut groups: Vec<_> = by_key.into_iter().collect();
    groups.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));
    groups
}

/// Partitions records into train/val/test.
///
/// Scaffold mode walks groups largest first and puts each one into the
/// first split (train, val, test order) it fits into without passing that
/// split's target size; a group that fits nowhere goes to the first split
/// still below target, or to test. Random mode shuffles with `seed` and
/// slices at the rounded targets.
pub fn split_dataset(
    records: &[TripletRecord],
    mode: SplitMode,
    ratios: [f64; 3],
    seed: u64,
) -> Result<Split, TrainError> {
    let smiles: Vec<&str> = records.iter().map(|r| r.smiles.as_str()).collect();
    let parts = split_indices(&smiles, mode, ratios, seed)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| records[i].clone()).collect();
    Ok(Split {
        train: pick(&parts[0]),
        val: pick(&parts[1]),
        test: pick(&parts[2]),
    })
}

/// [`split_dataset`] over bare SMILES, returning train/val/test indices.
pub fn split_indices<S: AsRef<str>>(
    records: &[S],
    mode: SplitMode,
    ratios: [f64; 3],
    seed: u64,
) -> Result<[Vec<usize>; 3], TrainError> {
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || ratios.iter().any(|&r| r < 0.0) {
        return Err(TrainError::InvalidRatios(ratios));
    }
    if records.is_empty() {
        return Err(TrainError::InsufficientData("no records to split".into()));
    }
    let n = records.len();
    let targets = ratios.map(|r| r * n as f64);
    let mut parts: [Vec<usize>; 3] = Default::default();
    match mode {
        SplitMode::Scaffold => {
            for (_, members) in scaffold_groups(records) {
                let g = members.len() as f64;
                let slot = (0..3)
                    .find(|&k| parts[k].len() as f64 + g <= targets[k])
                    .or_else(|| (0..3).find(|&k| (parts[k].len() as f64) < targets[k]))
                    .unwrap_or(2);
                parts[slot].extend(members);
            }
        }
        SplitMode::Random => {
            let n_train = targets[0].round() as usize;
            let n_val = (targets[1].round() as usize).min(n - n_train);
            if ratios.iter().zip([n_train, n_val, n - n_train - n_val]).any(|(&r, c)| r > 0.0 && c == 0) {
                return Err(TrainError::InsufficientData(format!(
                    "{n} records cannot fill every split at ratios {ratios:?}"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut stream_rng(seed, "split", 0, 0));
            parts[0] = order[..n_train].to_vec();
            parts[1] = order[n_train..n_train + n_val].to_vec();
            parts[2] = order[n_train + n_val..].to_vec();
        }
    }
    if parts[0].is_empty() {
        return Err(TrainError::InsufficientData("training split would be empty".into()));
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn rec(id: usize, smiles: &str) -> TripletRecord {
        TripletRecord {
            id: format!("r{id}"),
            smiles: smiles.into(),
            text: "placeholder description".into(),
            hta: "h".into(),
            fg_matches: Vec::new(),
        }
    }

    #[test]
    fn single_scaffold_goes_to_train() {
        let recs: Vec<_> = (0..10).map(|i| rec(i, "Cc1ccccc1")).collect();
        let s = split_dataset(&recs, SplitMode::Scaffold, [0.8, 0.1, 0.1], 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (10, 0, 0));
    }

    #[test]
    fn random_sizes() {
        let recs: Vec<_> = (0..100).map(|i| rec(i, "C")).collect();
        let s = split_dataset(&recs, SplitMode::Random, [0.8, 0.1, 0.1], 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (80, 10, 10));
        let ids: HashSet<_> = s.train.iter().chain(&s.val).chain(&s.test).map(|r| r.id.clone()).collect();
        assert_eq!(ids.len(), 100);
        let again = split_dataset(&recs, SplitMode::Random, [0.8, 0.1, 0.1], 3).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn scaffold_groups_stay_together() {
        let smiles = ["c1ccccc1C", "c1ccccc1O", "C1CCCCC1N", "CCO", "CCN", "c1ccncc1", "C1CCOC1", "c1ccccc1CC"];
        let recs: Vec<_> = smiles.iter().enumerate().map(|(i, s)| rec(i, s)).collect();
        let s = split_dataset(&recs, SplitMode::Scaffold, [0.5, 0.25, 0.25], 0).unwrap();
        let keys = |v: &[TripletRecord]| v.iter().map(record_scaffold).collect::<HashSet<_>>();
        let (a, b, c) = (keys(&s.train), keys(&s.val), keys(&s.test));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), recs.len());
    }

    #[test]
    fn errors() {
        let recs: Vec<_> = (0..3).map(|i| rec(i, "C")).collect();
        assert!(matches!(
            split_dataset(&recs, SplitMode::Random, [0.5, 0.1, 0.1], 0),
            Err(TrainError::InvalidRatios(_))
        ));
        assert!(matches!(
            split_dataset(&recs[..1], SplitMode::Random, [0.8, 0.1, 0.1], 0),
            Err(TrainError::InsufficientData(_))
        ));
        assert!(matches!(
            split_dataset(&[], SplitMode::Scaffold, [0.8, 0.1, 0.1], 0),
            Err(TrainError::InsufficientData(_))
        ));
    }
}
