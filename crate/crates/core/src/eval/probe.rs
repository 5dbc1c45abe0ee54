use rand::Rng;
use rand_distr::StandardNormal;

use super::labeled::{LabeledSet, SplitName};
use super::metrics::{accuracy, roc_auc, sample_std};
use super::EvalError;
use crate::rng::stream_rng;

/// Logistic-regression settings for the frozen-feature probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    /// Penalty `l2 · ‖w‖²` added to the mean cross-entropy.
    pub l2: f64,
    /// Standard deviation of the initial weights.
    pub init_scale: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            learning_rate: 0.5,
            iterations: 500,
            l2: 1e-4,
            init_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedScore {
    pub seed: u64,
    pub auc: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub per_seed: Vec<SeedScore>,
    pub auc_mean: f64,
    pub accuracy_mean: f64,
    /// Sample standard deviations; `None` with fewer than two seeds.
    pub auc_std: Option<f64>,
    pub accuracy_std: Option<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[&[f64]]) -> Standardizer {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for k in 0..d {
                var[k] += (r[k] - mean[k]).powi(2) / n;
            }
        }
        let scale = var.iter().map(|&v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

fn train_logistic(x: &[Vec<f64>], y: &[bool], cfg: &ProbeConfig, seed: u64) -> (Vec<f64>, f64) {
    let d = x[0].len();
    let n = x.len() as f64;
    let mut rng = stream_rng(seed, "probe", 0, 0);
    let mut w: Vec<f64> = (0..d).map(|_| cfg.init_scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut b = 0.0;
    let mut gw = vec![0.0; d];
    for _ in 0..cfg.iterations {
        gw.iter_mut().zip(&w).for_each(|(g, wk)| *g = 2.0 * cfg.l2 * wk);
        let mut gb = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            let z = b + xi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let r = (sigmoid(z) - if yi { 1.0 } else { 0.0 }) / n;
            gb += r;
            for (g, v) in gw.iter_mut().zip(xi) {
                *g += r * v;
            }
        }
        for (wk, g) in w.iter_mut().zip(&gw) {
            *wk -= cfg.learning_rate * g;
        }
        b -= cfg.learning_rate * gb;
    }
    (w, b)
}

/// Fits one logistic regression per seed on the train split of `features`
/// (row-aligned with `labeled.items`) and scores the test split.
pub fn linear_probe(
    features: &[Vec<f64>],
    labeled: &LabeledSet,
    seeds: &[u64],
    cfg: &ProbeConfig,
) -> Result<ProbeResult, EvalError> {
    if features.len() != labeled.items.len() {
        return Err(EvalError::LengthMismatch {
            scores: features.len(),
            labels: labeled.items.len(),
        });
    }
    if seeds.is_empty() {
        return Err(EvalError::Empty);
    }
    let idx = |s: SplitName| -> Vec<usize> { (0..features.len()).filter(|&i| labeled.items[i].split == s).collect() };
    let (train, test) = (idx(SplitName::Train), idx(SplitName::Test));
    if train.is_empty() || test.is_empty() {
        return Err(EvalError::Empty);
    }
    let y_train: Vec<bool> = train.iter().map(|&i| labeled.items[i].label).collect();
    if y_train.iter().all(|&l| l) || y_train.iter().all(|&l| !l) {
        return Err(EvalError::DegenerateLabels("training split has a single class".into()));
    }
    let rows: Vec<&[f64]> = train.iter().map(|&i| features[i].as_slice()).collect();
    let std = Standardizer::fit(&rows);
    let x_train: Vec<Vec<f64>> = rows.iter().map(|r| std.apply(r)).collect();
    let x_test: Vec<Vec<f64>> = test.iter().map(|&i| std.apply(&features[i])).collect();
    let y_test: Vec<bool> = test.iter().map(|&i| labeled.items[i].label).collect();

    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (w, b) = train_logistic(&x_train, &y_train, cfg, seed);
        let scores: Vec<f64> = x_test
            .iter()
            .map(|x| sigmoid(b + x.iter().zip(&w).map(|(p, q)| p * q).sum::<f64>()))
            .collect();
        per_seed.push(SeedScore {
            seed,
            auc: roc_auc(&scores, &y_test)?,
            accuracy: accuracy(&scores, &y_test, 0.5)?,
        });
    }
    let aucs: Vec<f64> = per_seed.iter().map(|s| s.auc).collect();
    let accs: Vec<f64> = per_seed.iter().map(|s| s.accuracy).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(ProbeResult {
        auc_mean: mean(&aucs),
        accuracy_mean: mean(&accs),
        auc_std: sample_std(&aucs).ok(),
        accuracy_std: sample_std(&accs).ok(),
        per_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::LabeledItem;

    fn set(labels: &[bool]) -> LabeledSet {
        LabeledSet {
            items: labels
                .iter()
                .enumerate()
                .map(|(i, &label)| LabeledItem {
                    id: i.to_string(),
                    smiles: "C".into(),
                    label,
                    split: if i % 5 == 0 { SplitName::Test } else { SplitName::Train },
                })
                .collect(),
        }
    }

    fn gaussian_features(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, "test", 0, 0);
        (0..n)
            .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    }

    #[test]
    fn separable_task() {
        let mut x = gaussian_features(300, 8, 1);
        let labels: Vec<bool> = x.iter().map(|r| r[0] + 0.5 * r[3] > 0.0).collect();
        for (r, &l) in x.iter_mut().zip(&labels) {
            r[0] += if l { 0.5 } else { -0.5 };
        }
        let res = linear_probe(&x, &set(&labels), &[0, 1, 2], &ProbeConfig::default()).unwrap();
        assert!(res.auc_mean >= 0.95, "{res:?}");
        assert_eq!(res, linear_probe(&x, &set(&labels), &[0, 1, 2], &ProbeConfig::default()).unwrap());
    }

    #[test]
    fn independent_labels() {
        let x = gaussian_features(500, 8, 2);
        let mut rng = stream_rng(3, "labels", 0, 0);
        let labels: Vec<bool> = (0..500).map(|_| rng.random()).collect();
        let res = linear_probe(&x, &set(&labels), &[0], &ProbeConfig::default()).unwrap();
        assert!((0.4..=0.6).contains(&res.auc_mean), "{res:?}");
        assert_eq!(res.auc_std, None);
    }

    #[test]
    fn single_class_training() {
        let x = gaussian_features(20, 2, 0);
        assert!(matches!(
            linear_probe(&x, &set(&[true; 20]), &[0], &ProbeConfig::default()),
            Err(EvalError::DegenerateLabels(_))
        ));
    }
}
