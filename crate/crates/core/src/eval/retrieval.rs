use rand::Rng;
use rand_distr::StandardNormal;

use super::EvalError;
use crate::align::{volume_matrix, AlignError};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Molecule query against (text, HTA) candidates.
    M2TH,
    /// (text, HTA) query against molecule candidates.
    TH2M,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scoring {
    /// Smaller parallelotope volume ranks first.
    #[default]
    Volume,
    /// Larger mean of cos(m, t) and cos(m, h) ranks first.
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub direction: Direction,
    pub recall_at_1: f64,
    pub recall_at_5: f64,
    pub recall_at_10: f64,
    pub pool: usize,
    /// 0-based rank of the true partner for each query.
    pub ranks: Vec<usize>,
}

impl RetrievalReport {
    pub fn recall_at(&self, k: usize) -> f64 {
        self.ranks.iter().filter(|&&r| r < k).count() as f64 / self.pool as f64
    }
}

fn unit(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                r.iter().map(|v| v / n).collect()
            } else {
                r.clone()
            }
        })
        .collect()
}

/// Score matrix oriented so that lower is better: `s[i][j]` for molecule i
/// against candidate pair j.
fn cost_matrix(m: &[Vec<f64>], t: &[Vec<f64>], h: &[Vec<f64>], scoring: Scoring) -> Result<Vec<Vec<f64>>, EvalError> {
    let (m, t, h) = (unit(m), unit(t), unit(h));
    Ok(match scoring {
        Scoring::Volume => {
            let v = volume_matrix(&m, &t, &h)?;
            (0..v.rows()).map(|i| v.row(i).to_vec()).collect()
        }
        Scoring::Cosine => {
            let d = m[0].len();
            for x in t.iter().chain(&h) {
                if x.len() != d {
                    return Err(AlignError::DimensionMismatch { expected: d, found: x.len() }.into());
                }
            }
            let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
            m.iter()
                .map(|mi| (0..t.len()).map(|j| -0.5 * (dot(mi, &t[j]) + dot(mi, &h[j]))).collect())
                .collect()
        }
    })
}

/// Recall@{1,5,10} of the diagonal partner. Ties go to the lower
/// candidate index.
pub fn retrieval_metrics(
    m: &[Vec<f64>],
    t: &[Vec<f64>],
    h: &[Vec<f64>],
    direction: Direction,
    scoring: Scoring,
) -> Result<RetrievalReport, EvalError> {
    let n = m.len();
    if n < 2 {
        return Err(EvalError::PoolTooSmall(n));
    }
    if t.len() != n || h.len() != n {
        return Err(AlignError::DimensionMismatch {
            expected: n,
            found: t.len().min(h.len()),
        }
        .into());
    }
    let s = cost_matrix(m, t, h, scoring)?;
    let cost = |q: usize, c: usize| match direction {
        Direction::M2TH => s[q][c],
        Direction::TH2M => s[c][q],
    };
    let ranks: Vec<usize> = (0..n)
        .map(|q| {
            let own = cost(q, q);
            (0..n)
                .filter(|&c| {
                    let x = cost(q, c);
                    x < own || (x == own && c < q)
                })
                .count()
        })
        .collect();
    let mut report = RetrievalReport {
        direction,
        recall_at_1: 0.0,
        recall_at_5: 0.0,
        recall_at_10: 0.0,
        pool: n,
        ranks,
    };
    report.recall_at_1 = report.recall_at(1);
    report.recall_at_5 = report.recall_at(5);
    report.recall_at_10 = report.recall_at(10);
    Ok(report)
}

/// Mean volume recall@1 of independent random unit embeddings.
pub fn random_baseline(pool: usize, dim: usize, resamples: usize, seed: u64) -> Result<f64, EvalError> {
    let mut total = 0.0;
    for r in 0..resamples {
        let mut rng = stream_rng(seed, "baseline", r as u64, 0);
        let mut draw = || -> Vec<Vec<f64>> {
            (0..pool)
                .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect()
        };
        let (m, t, h) = (draw(), draw(), draw());
        total += retrieval_metrics(&m, &t, &h, Direction::M2TH, Scoring::Volume)?.recall_at_1;
    }
    Ok(total / resamples.max(1) as f64)
}
