//! Trainable state (projection heads, optional temperature) and the
//! per-batch loss graph.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::config::{EncoderMode, TrainConfig};
use super::{TrainError, TripletRecord};
use crate::align::{global_loss_graph, learnable_tau, local_loss_graph, AlignConfig, LossBreakdown, Temperature};
use crate::chem::FGPattern;
use crate::encode::{
    project_batch, toy_encode, EmbeddingBundle, HeadDims, HeadNodes, Modality, ProjectionHead, ToyEncoderConfig,
    HEAD_PARAM_NAMES, RAW_DIM,
};
use crate::tensor::{NodeId, Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub smiles: ProjectionHead,
    pub text: ProjectionHead,
    /// `None` when HTA shares the text head.
    pub hta: Option<ProjectionHead>,
    /// Scalar log τ when the temperature is learned.
    pub log_tau: Option<Tensor>,
}

impl Model {
    pub fn init<R: Rng + ?Sized>(dims: HeadDims, cfg: &TrainConfig, rng: &mut R) -> Model {
        let smiles = ProjectionHead::init(dims, cfg.dropout, rng);
        let text = ProjectionHead::init(dims, cfg.dropout, rng);
        let hta = (!cfg.share_text_head).then(|| ProjectionHead::init(dims, cfg.dropout, rng));
        let log_tau = cfg.tau_learnable.then(|| Tensor::scalar(cfg.tau.ln()));
        Model {
            smiles,
            text,
            hta,
            log_tau,
        }
    }

    pub fn hta_head(&self) -> &ProjectionHead {
        self.hta.as_ref().unwrap_or(&self.text)
    }

    pub fn head(&self, m: Modality) -> &ProjectionHead {
        match m {
            Modality::Smiles | Modality::FgPattern => &self.smiles,
            Modality::Text | Modality::FgText => &self.text,
            Modality::Hta => self.hta_head(),
        }
    }

    /// τ currently in effect.
    pub fn tau(&self, fixed: f64) -> f64 {
        match &self.log_tau {
            Some(l) => l.item().exp().clamp(crate::align::TAU_MIN, crate::align::TAU_MAX),
            None => fixed,
        }
    }

    /// Parameter names in optimizer order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let mut head = |prefix: &str| {
            for n in HEAD_PARAM_NAMES {
                names.push(format!("{prefix}.{n}"));
            }
        };
        head("smiles");
        head("text");
        if self.hta.is_some() {
            head("hta");
        }
        if self.log_tau.is_some() {
            names.push("log_tau".into());
        }
        names
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.smiles.params.iter().chain(&self.text.params).collect();
        if let Some(h) = &self.hta {
            out.extend(&h.params);
        }
        if let Some(t) = &self.log_tau {
            out.push(t);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.smiles.params.iter_mut().chain(self.text.params.iter_mut()).collect();
        if let Some(h) = &mut self.hta {
            out.extend(h.params.iter_mut());
        }
        if let Some(t) = &mut self.log_tau {
            out.push(t);
        }
        out
    }

    /// Rebuilds a model from named tensors as produced by [`Model::param_names`].
    pub fn from_named(tensors: &BTreeMap<String, Tensor>, dropout: f64) -> Result<Model, String> {
        let head = |prefix: &str| -> Result<Option<ProjectionHead>, String> {
            let names: Vec<String> = HEAD_PARAM_NAMES.iter().map(|n| format!("{prefix}.{n}")).collect();
            if !names.iter().any(|n| tensors.contains_key(n)) {
                return Ok(None);
            }
            let params: Vec<Tensor> = names
                .iter()
                .map(|n| tensors.get(n).cloned().ok_or_else(|| format!("missing tensor {n}")))
                .collect::<Result<_, _>>()?;
            let (w1, w3) = (&params[0], &params[8]);
            if w1.shape().len() != 2 || w3.shape().len() != 2 {
                return Err(format!("{prefix}: weights must be matrices"));
            }
            let dims = HeadDims {
                input: w1.rows(),
                hidden: w1.cols(),
                output: w3.cols(),
            };
            for (n, (p, shape)) in names.iter().zip(params.iter().zip(dims.param_shapes())) {
                if p.shape() != shape.as_slice() {
                    return Err(format!("{n}: shape {:?}, expected {shape:?}", p.shape()));
                }
            }
            Ok(Some(ProjectionHead { dims, dropout, params }))
        };
        let smiles = head("smiles")?.ok_or("missing smiles head")?;
        let text = head("text")?.ok_or("missing text head")?;
        let hta = head("hta")?;
        let log_tau = tensors.get("log_tau").cloned();
        Ok(Model {
            smiles,
            text,
            hta,
            log_tau,
        })
    }
}

/// Source of frozen raw embeddings.
#[derive(Debug, Clone)]
pub enum Encoder {
    Toy(ToyEncoderConfig),
    File(Box<EmbeddingBundle>),
}

impl Encoder {
    pub fn from_config(cfg: &TrainConfig) -> Result<Encoder, TrainError> {
        Ok(match cfg.encoder {
            EncoderMode::Toy => Encoder::Toy(ToyEncoderConfig {
                ngram: cfg.ngram,
                ..ToyEncoderConfig::default()
            }),
            EncoderMode::File => {
                let dir = cfg.embeddings.as_ref().expect("validated config");
                Encoder::File(Box::new(EmbeddingBundle::load(dir, RAW_DIM)?))
            }
        })
    }

    /// Raw vector for `key` (record id or library id) whose content is `text`.
    pub fn encode(&self, m: Modality, key: &str, text: &str) -> Result<Vec<f64>, TrainError> {
        match self {
            Encoder::Toy(cfg) => Ok(toy_encode(text, cfg)?),
            Encoder::File(bundle) => {
                bundle
                    .store(m)
                    .get(key)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| TrainError::MissingEmbedding {
                        modality: m.file_name().to_string(),
                        id: key.to_string(),
                    })
            }
        }
    }
}

/// Frozen raw embeddings for a record list and the functional-group
/// library, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub smiles: Vec<Vec<f64>>,
    pub text: Vec<Vec<f64>>,
    pub hta: Vec<Vec<f64>>,
    /// Per library entry.
    pub fg_pattern: Vec<Vec<f64>>,
    pub fg_text: Vec<Vec<f64>>,
    /// Library indices of each record's groups, ascending.
    pub record_fgs: Vec<Vec<usize>>,
}

impl RawFeatures {
    pub fn build(encoder: &Encoder, records: &[TripletRecord], library: &[FGPattern]) -> Result<Self, TrainError> {
        let index: HashMap<&str, usize> = library.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
        let mut out = RawFeatures {
            smiles: Vec::with_capacity(records.len()),
            text: Vec::with_capacity(records.len()),
            hta: Vec::with_capacity(records.len()),
            fg_pattern: Vec::with_capacity(library.len()),
            fg_text: Vec::with_capacity(library.len()),
            record_fgs: Vec::with_capacity(records.len()),
        };
        for r in records {
            out.smiles.push(encoder.encode(Modality::Smiles, &r.id, &r.smiles)?);
            out.text.push(encoder.encode(Modality::Text, &r.id, &r.text)?);
            out.hta.push(encoder.encode(Modality::Hta, &r.id, &r.hta)?);
            let mut fgs: Vec<usize> = r
                .fg_matches
                .iter()
                .filter_map(|m| index.get(m.pattern_id.as_str()).copied())
                .collect();
            fgs.sort_unstable();
            fgs.dedup();
            out.record_fgs.push(fgs);
        }
        let used: Vec<bool> = (0..library.len())
            .map(|i| out.record_fgs.iter().any(|f| f.contains(&i)))
            .collect();
        for (i, p) in library.iter().enumerate() {
            // Unused entries never reach a batch; file mode need not provide them.
            if used[i] || matches!(encoder, Encoder::Toy(_)) {
                out.fg_pattern.push(encoder.encode(Modality::FgPattern, &p.id, &p.pattern)?);
                out.fg_text.push(encoder.encode(Modality::FgText, &p.id, &p.description)?);
            } else {
                out.fg_pattern.push(Vec::new());
                out.fg_text.push(Vec::new());
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.smiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smiles.is_empty()
    }

    fn rows(source: &[Vec<f64>], idx: &[usize]) -> Tensor {
        let rows: Vec<&[f64]> = idx.iter().map(|&i| source[i].as_slice()).collect();
        Tensor::from_rows(&rows).unwrap()
    }
}

/// Recorded graph for one batch.
pub struct BatchGraph {
    pub tape: Tape,
    pub params: Vec<NodeId>,
    pub lg: NodeId,
    pub ll: Option<NodeId>,
    pub parts: LossBreakdown,
}

fn register(tape: &mut Tape, head: &ProjectionHead, out: &mut Vec<NodeId>) -> HeadNodes {
    let nodes = head.register(tape);
    out.extend(nodes.0);
    nodes
}

/// Forward pass of the global and local losses for records `idx`. Dropout
/// is active when `rng` is given.
pub fn batch_graph<R: Rng + ?Sized>(
    model: &Model,
    align: &AlignConfig,
    raw: &RawFeatures,
    idx: &[usize],
    mut rng: Option<&mut R>,
) -> BatchGraph {
    let mut tape = Tape::new();
    let mut params = Vec::new();
    let ps = register(&mut tape, &model.smiles, &mut params);
    let pt = register(&mut tape, &model.text, &mut params);
    let ph = match &model.hta {
        Some(h) => register(&mut tape, h, &mut params),
        None => pt,
    };
    let temp = match &model.log_tau {
        Some(l) => {
            let node = tape.param(l.clone());
            params.push(node);
            Temperature::Node(learnable_tau(&mut tape, node))
        }
        None => Temperature::Fixed(align.tau),
    };

    let xm = tape.constant(RawFeatures::rows(&raw.smiles, idx));
    let xt = tape.constant(RawFeatures::rows(&raw.text, idx));
    let xh = tape.constant(RawFeatures::rows(&raw.hta, idx));
    let m = model.smiles.forward(&mut tape, &ps, xm, rng.as_deref_mut());
    let t = model.text.forward(&mut tape, &pt, xt, rng.as_deref_mut());
    let h = model.hta_head().forward(&mut tape, &ph, xh, rng.as_deref_mut());
    let g = global_loss_graph(&mut tape, m, t, h, temp, align);

    // distinct groups of the batch, in library order
    let mut unique: Vec<usize> = idx.iter().flat_map(|&i| raw.record_fgs[i].iter().copied()).collect();
    unique.sort_unstable();
    unique.dedup();
    let local = if unique.is_empty() {
        None
    } else {
        let pos: HashMap<usize, usize> = unique.iter().enumerate().map(|(k, &f)| (f, k)).collect();
        let groups: Vec<Vec<usize>> = idx
            .iter()
            .map(|&i| raw.record_fgs[i].iter().map(|f| pos[f]).collect())
            .collect();
        let xfg = tape.constant(RawFeatures::rows(&raw.fg_pattern, &unique));
        let xfgt = tape.constant(RawFeatures::rows(&raw.fg_text, &unique));
        let fg = model.smiles.forward(&mut tape, &ps, xfg, rng.as_deref_mut());
        let fgt = model.text.forward(&mut tape, &pt, xfgt, rng);
        local_loss_graph(&mut tape, fg, fgt, &groups, align.pooling, temp, align.label_smoothing)
    };

    let val = |tape: &Tape, n: NodeId| tape.value(n).item();
    let mut parts = LossBreakdown {
        m2th: val(&tape, g.m2th),
        th2m: val(&tape, g.th2m),
        lg: val(&tape, g.lg),
        aux: g.aux.map_or(0.0, |a| val(&tape, a)),
        ..LossBreakdown::default()
    };
    if let Some(l) = &local {
        parts.fg2t = val(&tape, l.fg2t);
        parts.t2fg = val(&tape, l.t2fg);
        parts.ll = val(&tape, l.ll);
    }
    BatchGraph {
        tape,
        params,
        lg: g.lg,
        ll: local.map(|l| l.ll),
        parts,
    }
}

impl BatchGraph {
    /// Records L = α·L_g + (1−α)·L_l with α as a constant.
    pub fn combine(&mut self, alpha: f64) -> NodeId {
        let a = self.tape.scale(self.lg, alpha);
        let total = match self.ll {
            Some(ll) => {
                let b = self.tape.scale(ll, 1.0 - alpha);
                self.tape.add(a, b)
            }
            None => a,
        };
        self.parts.alpha = alpha;
        self.parts.total = self.tape.value(total).item();
        total
    }
}

/// Inference-mode projections of one modality for the given rows.
pub fn embed(model: &Model, m: Modality, raw: &[Vec<f64>]) -> Result<Tensor, TrainError> {
    let x = Tensor::from_rows(raw)?;
    let mut unused = crate::rng::stream_rng(0, "unused", 0, 0);
    Ok(project_batch(model.head(m), &x, &mut unused, false)?)
}
