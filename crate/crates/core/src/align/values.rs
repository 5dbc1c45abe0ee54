use super::graph::{global_from_unit, infonce_graph, local_loss_graph, Temperature};
use super::{AlignConfig, AlignError};
use crate::tensor::{PoolMode, Tape, Tensor};

/// Closed-form parallelotope volume of three unit vectors:
/// sqrt(max(1 − a² − b² − c² + 2abc, 0)) with a=⟨m,t⟩, b=⟨m,h⟩, c=⟨t,h⟩.
pub fn gram_volume(m: &[f64], t: &[f64], h: &[f64]) -> Result<f64, AlignError> {
    for v in [t, h] {
        if v.len() != m.len() {
            return Err(AlignError::DimensionMismatch {
                expected: m.len(),
                found: v.len(),
            });
        }
    }
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let mut d = [dot(m, t), dot(m, h), dot(t, h)];
    // Fixed evaluation order makes the result exactly symmetric in (m, t, h).
    d.sort_by(f64::total_cmp);
    let [a, b, c] = d;
    let det = 1.0 - (a * a + b * b + c * c) + 2.0 * (a * b * c);
    Ok(det.max(0.0).sqrt())
}

fn stack(rows: &[Vec<f64>]) -> Result<Tensor, AlignError> {
    if rows.is_empty() {
        return Err(AlignError::EmptyBatch);
    }
    let d = rows[0].len();
    for r in rows {
        if r.len() != d {
            return Err(AlignError::DimensionMismatch {
                expected: d,
                found: r.len(),
            });
        }
    }
    Ok(Tensor::from_rows(rows).unwrap())
}

fn check_batch(m: &[Vec<f64>], t: &[Vec<f64>], h: &[Vec<f64>]) -> Result<(Tensor, Tensor, Tensor), AlignError> {
    if m.is_empty() {
        return Err(AlignError::EmptyBatch);
    }
    for other in [t, h] {
        if other.len() != m.len() {
            return Err(AlignError::DimensionMismatch {
                expected: m.len(),
                found: other.len(),
            });
        }
    }
    let (mt, tt, ht) = (stack(m)?, stack(t)?, stack(h)?);
    for x in [&tt, &ht] {
        if x.cols() != mt.cols() {
            return Err(AlignError::DimensionMismatch {
                expected: mt.cols(),
                found: x.cols(),
            });
        }
    }
    Ok((mt, tt, ht))
}

/// `V[i][j] = Vol(m_i, t_j, h_j)`.
pub fn volume_matrix(m: &[Vec<f64>], t: &[Vec<f64>], h: &[Vec<f64>]) -> Result<Tensor, AlignError> {
    let (mt, tt, ht) = check_batch(m, t, h)?;
    let mut tape = Tape::new();
    let (mi, ti, hi) = (tape.constant(mt), tape.constant(tt), tape.constant(ht));
    let v = tape.volume_matrix(mi, ti, hi, 0.0);
    Ok(tape.value(v).clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalLoss {
    pub m2th: f64,
    pub th2m: f64,
    pub lg: f64,
    /// Pairwise InfoNCE sum included in `lg`; zero when disabled.
    pub aux: f64,
}

/// Bidirectional volume loss for a batch of unit-vector triples.
pub fn global_loss(
    m: &[Vec<f64>],
    t: &[Vec<f64>],
    h: &[Vec<f64>],
    cfg: &AlignConfig,
) -> Result<GlobalLoss, AlignError> {
    cfg.validate()?;
    let (mt, tt, ht) = check_batch(m, t, h)?;
    let mut tape = Tape::new();
    let (mi, ti, hi) = (tape.constant(mt), tape.constant(tt), tape.constant(ht));
    let n = global_from_unit(&mut tape, mi, ti, hi, Temperature::Fixed(cfg.tau), cfg);
    Ok(GlobalLoss {
        m2th: tape.value(n.m2th).item(),
        th2m: tape.value(n.th2m).item(),
        lg: tape.value(n.lg).item(),
        aux: n.aux.map_or(0.0, |a| tape.value(a).item()),
    })
}

/// Elementwise max (or mean) over a non-empty list of equal-length vectors.
pub fn pool_fg(vectors: &[Vec<f64>], mode: PoolMode) -> Result<Vec<f64>, AlignError> {
    if vectors.is_empty() {
        return Err(AlignError::EmptyList);
    }
    let x = stack(vectors)?;
    let mut tape = Tape::new();
    let xi = tape.constant(x);
    let p = tape.pool_rows(xi, vec![(0..vectors.len()).collect()], mode);
    Ok(tape.value(p).data().to_vec())
}

/// Functional-group vectors of one molecule: structures and descriptions,
/// paired by position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FGBatchItem {
    pub fg: Vec<Vec<f64>>,
    pub fgt: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalLoss {
    pub fg2t: f64,
    pub t2fg: f64,
    pub ll: f64,
}

/// Local loss over pooled group vectors. Items without groups are dropped;
/// an all-empty batch gives zeros.
pub fn local_loss(items: &[FGBatchItem], cfg: &AlignConfig) -> Result<LocalLoss, AlignError> {
    cfg.validate()?;
    let mut fg_rows = Vec::new();
    let mut fgt_rows = Vec::new();
    let mut groups = Vec::new();
    for (i, item) in items.iter().enumerate() {
        if item.fg.len() != item.fgt.len() {
            return Err(AlignError::MismatchedCounts {
                item: i,
                fg: item.fg.len(),
                fgt: item.fgt.len(),
            });
        }
        let start = fg_rows.len();
        fg_rows.extend(item.fg.iter().cloned());
        fgt_rows.extend(item.fgt.iter().cloned());
        groups.push((start..fg_rows.len()).collect::<Vec<_>>());
    }
    if fg_rows.is_empty() {
        return Ok(LocalLoss::default());
    }
    let (fg, fgt) = (stack(&fg_rows)?, stack(&fgt_rows)?);
    if fg.cols() != fgt.cols() {
        return Err(AlignError::DimensionMismatch {
            expected: fg.cols(),
            found: fgt.cols(),
        });
    }
    let mut tape = Tape::new();
    let (a, b) = (tape.constant(fg), tape.constant(fgt));
    let temp = Temperature::Fixed(cfg.tau);
    let n = local_loss_graph(&mut tape, a, b, &groups, cfg.pooling, temp, cfg.label_smoothing).unwrap();
    Ok(LocalLoss {
        fg2t: tape.value(n.fg2t).item(),
        t2fg: tape.value(n.t2fg).item(),
        ll: tape.value(n.ll).item(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pair {
    MT,
    MH,
    TH,
}

/// Symmetric InfoNCE on cosine similarities between two of the three
/// modalities.
pub fn pairwise_infonce(
    m: &[Vec<f64>],
    t: &[Vec<f64>],
    h: &[Vec<f64>],
    pair: Pair,
    cfg: &AlignConfig,
) -> Result<f64, AlignError> {
    cfg.validate()?;
    let (mt, tt, ht) = check_batch(m, t, h)?;
    let mut tape = Tape::new();
    let ids = [tape.constant(mt), tape.constant(tt), tape.constant(ht)];
    let unit: Vec<_> = ids.iter().map(|&x| tape.normalize_rows(x)).collect();
    let (a, b) = match pair {
        Pair::MT => (unit[0], unit[1]),
        Pair::MH => (unit[0], unit[2]),
        Pair::TH => (unit[1], unit[2]),
    };
    let l = infonce_graph(&mut tape, a, b, Temperature::Fixed(cfg.tau), cfg.label_smoothing);
    Ok(tape.value(l).item())
}

/// Every loss term of one step, as reported in metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub m2th: f64,
    pub th2m: f64,
    pub lg: f64,
    pub aux: f64,
    pub fg2t: f64,
    pub t2fg: f64,
    pub ll: f64,
    pub total: f64,
    pub alpha: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_smooth() -> AlignConfig {
        AlignConfig {
            label_smoothing: 0.0,
            ..AlignConfig::default()
        }
    }

    #[test]
    fn volume_examples() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        let e3 = [0.0, 0.0, 1.0];
        assert_eq!(gram_volume(&e1, &e1, &e1).unwrap(), 0.0);
        assert_eq!(gram_volume(&e1, &e2, &e3).unwrap(), 1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(gram_volume(&e1, &e2, &[s, s, 0.0]).unwrap() < 1e-7);
        assert!(gram_volume(&e1, &e2, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn lone_candidate_is_zero() {
        let v = vec![vec![0.6, 0.8, 0.0]];
        let w = vec![vec![0.0, 0.0, 1.0]];
        let g = global_loss(&v, &w, &v, &no_smooth()).unwrap();
        assert_eq!((g.m2th, g.th2m, g.lg), (0.0, 0.0, 0.0));
    }

    #[test]
    fn uniform_volumes_give_log_b() {
        // every triple uses the same three orthonormal vectors
        let e = |i: usize| {
            let mut v = vec![0.0; 3];
            v[i] = 1.0;
            v
        };
        let m = vec![e(0); 4];
        let t = vec![e(1); 4];
        let h = vec![e(2); 4];
        let g = global_loss(&m, &t, &h, &no_smooth()).unwrap();
        assert!((g.lg - 4f64.ln()).abs() < 1e-9);
        assert!(matches!(global_loss(&[], &[], &[], &no_smooth()), Err(AlignError::EmptyBatch)));
    }

    #[test]
    fn pool_examples() {
        assert_eq!(pool_fg(&[vec![1.0, 5.0]], PoolMode::Max).unwrap(), vec![1.0, 5.0]);
        assert_eq!(pool_fg(&[vec![1.0, 5.0], vec![3.0, 2.0]], PoolMode::Max).unwrap(), vec![3.0, 5.0]);
        assert_eq!(pool_fg(&[vec![1.0, 5.0], vec![3.0, 2.0]], PoolMode::Mean).unwrap(), vec![2.0, 3.5]);
        assert_eq!(pool_fg(&[], PoolMode::Max), Err(AlignError::EmptyList));
    }

    #[test]
    fn local_edge_cases() {
        let cfg = no_smooth();
        let empty = FGBatchItem::default();
        assert_eq!(local_loss(&[empty.clone(), empty.clone()], &cfg).unwrap(), LocalLoss::default());
        let one = FGBatchItem {
            fg: vec![vec![1.0, 0.0]],
            fgt: vec![vec![0.3, 0.7]],
        };
        assert_eq!(local_loss(&[one.clone(), empty], &cfg).unwrap().ll, 0.0);
        // three items with identical pooled vectors
        let l = local_loss(&[one.clone(), one.clone(), one], &cfg).unwrap();
        assert!((l.ll - 3f64.ln()).abs() < 1e-9);
        let bad = FGBatchItem {
            fg: vec![vec![1.0]],
            fgt: vec![],
        };
        assert!(matches!(local_loss(&[bad], &cfg), Err(AlignError::MismatchedCounts { .. })));
    }

    #[test]
    fn infonce_closed_form() {
        let cfg = AlignConfig {
            tau: 1.0,
            label_smoothing: 0.0,
            ..AlignConfig::default()
        };
        let m = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let l = pairwise_infonce(&m, &m, &m, Pair::MT, &cfg).unwrap();
        let expected = -(1f64.exp() / (1f64.exp() + 1.0)).ln();
        assert!((l - expected).abs() < 1e-12);
        assert!((expected - 0.3132617).abs() < 1e-7);
        let one = vec![vec![0.2, 0.9]];
        assert_eq!(pairwise_infonce(&one, &one, &one, Pair::TH, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn config_validation() {
        let bad = AlignConfig {
            tau: 0.0,
            ..AlignConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AlignConfig {
            label_smoothing: 1.0,
            ..AlignConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
