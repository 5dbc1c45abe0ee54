//! The optimization loop.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use super::checkpoint::{checkpoint_path, decay_mask, Checkpoint, TrainState};
use super::config::TrainConfig;
use super::model::{batch_graph, Encoder, Model, RawFeatures};
use super::{TrainError, TripletRecord};
use crate::align::{LossBreakdown, MomentumState};
use crate::chem::FGPattern;
use crate::encode::HeadDims;
use crate::rng::stream_rng;
use crate::tensor::{clip_grad_norm, AdamState, Tensor};

pub const METRICS_HEADER: &str = "epoch,train_Lg,train_Ll,train_Ltotal,alpha,val_Ltotal,seconds";
pub const METRICS_FILE: &str = "metrics.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub train_lg: f64,
    pub train_ll: f64,
    pub train_total: f64,
    pub alpha: f64,
    pub val_total: f64,
    pub seconds: f64,
}

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.epoch, self.train_lg, self.train_ll, self.train_total, self.alpha, self.val_total, self.seconds
        )
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: TrainState,
    pub metrics: Vec<EpochMetrics>,
    pub stopped_early: bool,
    pub final_checkpoint: PathBuf,
}

/// Records whose id hashes to 0 mod 10 are held out for early stopping.
pub fn is_validation_id(id: &str) -> bool {
    let h = Sha256::digest(id.as_bytes());
    u64::from_le_bytes(h[..8].try_into().unwrap()) % 10 == 0
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Fresh state: heads drawn from the `init` stream, zero optimizer moments.
pub fn initial_state(cfg: &TrainConfig, dims: HeadDims) -> TrainState {
    let model = Model::init(dims, cfg, &mut stream_rng(cfg.seed, "init", 0, 0));
    let params: Vec<Tensor> = model.params().into_iter().cloned().collect();
    let mut adam = AdamState::new(cfg.adam(), &params);
    adam.decay = decay_mask(&model.param_names());
    TrainState {
        model,
        adam,
        momentum: MomentumState::new(cfg.alpha0, cfg.beta),
        epoch: 0,
        step: 0,
        best_val: f64::INFINITY,
        bad_epochs: 0,
    }
}

#[derive(Default)]
struct Running {
    lg: f64,
    ll: f64,
    total: f64,
    n: usize,
}

impl Running {
    fn add(&mut self, p: &LossBreakdown, n: usize) {
        let w = n as f64;
        self.lg += p.lg * w;
        self.ll += p.ll * w;
        self.total += p.total * w;
        self.n += n;
    }

    fn mean(&self, v: f64) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            v / self.n as f64
        }
    }
}

/// Shuffled batches for `epoch`; the last one may be short.
pub fn epoch_batches(indices: &[usize], seed: u64, epoch: u64, batch_size: usize) -> Vec<Vec<usize>> {
    let mut order = indices.to_vec();
    order.shuffle(&mut stream_rng(seed, "shuffle", epoch, 0));
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Mean combined loss over `idx` in inference mode at mixing weight `alpha`.
pub fn evaluate_loss(
    model: &Model,
    cfg: &TrainConfig,
    raw: &RawFeatures,
    idx: &[usize],
    alpha: f64,
) -> LossBreakdown {
    let align = cfg.align();
    let mut run = Running::default();
    let mut parts = LossBreakdown::default();
    for chunk in idx.chunks(cfg.batch_size.max(1)) {
        let mut g = batch_graph::<rand_chacha::ChaCha8Rng>(model, &align, raw, chunk, None);
        g.combine(alpha);
        run.add(&g.parts, chunk.len());
    }
    parts.lg = run.mean(run.lg);
    parts.ll = run.mean(run.ll);
    parts.total = run.mean(run.total);
    parts.alpha = alpha;
    parts
}

/// Loads the kept prefix of an existing metrics file when resuming.
fn open_metrics(path: &Path, keep_through: Option<u64>) -> Result<(), TrainError> {
    let mut body = format!("{METRICS_HEADER}\n");
    if let (Some(last), Ok(old)) = (keep_through, fs::read_to_string(path)) {
        for line in old.lines().skip(1) {
            let epoch = line.split(',').next().and_then(|e| e.parse::<u64>().ok());
            if epoch.is_some_and(|e| e <= last) {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    fs::write(path, body).map_err(io(path))
}

/// Trains on `records` (validation carved out by id hash) and writes
/// `metrics.csv`, periodic checkpoints and `final.ckpt` into `out_dir`.
pub fn fit(
    cfg: &TrainConfig,
    records: &[TripletRecord],
    library: &[FGPattern],
    out_dir: &Path,
) -> Result<FitResult, TrainError> {
    fit_with_dims(cfg, records, library, out_dir, HeadDims::default())
}

/// [`fit`] with explicit head sizes. The input size must match the encoder.
pub fn fit_with_dims(
    cfg: &TrainConfig,
    records: &[TripletRecord],
    library: &[FGPattern],
    out_dir: &Path,
    dims: HeadDims,
) -> Result<FitResult, TrainError> {
    cfg.validate()?;
    let (val_idx, train_idx): (Vec<usize>, Vec<usize>) =
        (0..records.len()).partition(|&i| is_validation_id(&records[i].id));
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(TrainError::InsufficientData(format!(
            "{} training and {} validation records after the id-hash split",
            train_idx.len(),
            val_idx.len()
        )));
    }
    let encoder = Encoder::from_config(cfg)?;
    let raw = RawFeatures::build(&encoder, records, library)?;
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;

    let mut state = match &cfg.resume {
        Some(path) => TrainState::from_checkpoint(&Checkpoint::read(path)?, cfg, path)?,
        None => initial_state(cfg, dims),
    };
    let metrics_path = out_dir.join(METRICS_FILE);
    open_metrics(&metrics_path, cfg.resume.as_ref().map(|_| state.epoch))?;

    let align = cfg.align();
    let mut metrics = Vec::new();
    let patience = cfg.early_stop_patience as u64;
    while state.epoch < cfg.epochs as u64 && state.bad_epochs < patience {
        let started = Instant::now();
        let epoch = state.epoch + 1;
        let mut run = Running::default();
        for (b, chunk) in epoch_batches(&train_idx, cfg.seed, epoch, cfg.batch_size).iter().enumerate() {
            let mut rng = stream_rng(cfg.seed, "dropout", epoch, b as u64);
            let mut g = batch_graph(&state.model, &align, &raw, chunk, Some(&mut rng));
            let non_finite = TrainError::NonFiniteLoss { epoch, batch: b };
            if !(g.parts.lg.is_finite() && g.parts.ll.is_finite()) {
                return Err(non_finite);
            }
            let alpha = state.momentum.update(g.parts.lg, g.parts.ll);
            let total = g.combine(alpha);
            if !g.parts.total.is_finite() {
                return Err(non_finite);
            }
            g.tape.backward(total)?;
            let mut grads: Vec<Tensor> = g.params.iter().map(|&p| g.tape.grad(p)).collect();
            drop(g.tape);
            clip_grad_norm(&mut grads, cfg.grad_clip);
            state.adam.step(&mut state.model.params_mut(), &grads)?;
            state.step += 1;
            run.add(&g.parts, chunk.len());
        }
        let val = evaluate_loss(&state.model, cfg, &raw, &val_idx, state.momentum.alpha);
        if !val.total.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        if val.total < state.best_val {
            state.best_val = val.total;
            state.bad_epochs = 0;
        } else {
            state.bad_epochs += 1;
        }
        state.epoch = epoch;
        let row = EpochMetrics {
            epoch,
            train_lg: run.mean(run.lg),
            train_ll: run.mean(run.ll),
            train_total: run.mean(run.total),
            alpha: state.momentum.alpha,
            val_total: val.total,
            seconds: if cfg.record_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        let mut f = OpenOptions::new()
            .append(true)
            .open(&metrics_path)
            .map_err(io(&metrics_path))?;
        writeln!(f, "{}", row.csv_row()).map_err(io(&metrics_path))?;
        metrics.push(row);
        if epoch % cfg.checkpoint_every as u64 == 0 {
            state.to_checkpoint(cfg).write(&checkpoint_path(out_dir, epoch))?;
        }
    }
    let final_checkpoint = out_dir.join(FINAL_CHECKPOINT);
    state.to_checkpoint(cfg).write(&final_checkpoint)?;
    Ok(FitResult {
        stopped_early: state.bad_epochs >= patience && state.epoch < cfg.epochs as u64,
        state,
        metrics,
        final_checkpoint,
    })
}
