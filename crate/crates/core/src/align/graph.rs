use super::{AlignConfig, TAU_MAX, TAU_MIN};
use crate::tensor::{NodeId, PoolMode, Tape};

/// Temperature source for logits: a constant or a scalar node holding τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Fixed(f64),
    Node(NodeId),
}

/// τ = clamp(exp(log_tau), 0.01, 0.5) as a scalar node.
pub fn learnable_tau(tape: &mut Tape, log_tau: NodeId) -> NodeId {
    let tau = tape.exp(log_tau);
    tape.clamp(tau, TAU_MIN, TAU_MAX)
}

/// `sign · x / τ`.
pub fn apply_temperature(tape: &mut Tape, x: NodeId, temp: Temperature, sign: f64) -> NodeId {
    match temp {
        Temperature::Fixed(tau) => tape.scale(x, sign / tau),
        Temperature::Node(tau) => {
            let inv = tape.recip(tau);
            let y = tape.mul_scalar(x, inv);
            if sign == 1.0 {
                y
            } else {
                tape.scale(y, sign)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GlobalNodes {
    pub m2th: NodeId,
    pub th2m: NodeId,
    /// Volume term plus the auxiliary term when enabled.
    pub lg: NodeId,
    pub aux: Option<NodeId>,
}

#[derive(Debug, Clone, Copy)]
pub struct LocalNodes {
    pub fg2t: NodeId,
    pub t2fg: NodeId,
    pub ll: NodeId,
}

fn mean_of(tape: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    let s = tape.add(a, b);
    tape.scale(s, 0.5)
}

/// Symmetric InfoNCE between row-aligned unit vectors `a` and `b`:
/// the mean of the a→b and b→a cross-entropies on `a·bᵀ/τ`.
pub fn infonce_graph(tape: &mut Tape, a: NodeId, b: NodeId, temp: Temperature, smoothing: f64) -> NodeId {
    let s = tape.matmul_nt(a, b);
    let logits = apply_temperature(tape, s, temp, 1.0);
    let fwd = tape.softmax_xent_rows(logits, smoothing);
    let lt = tape.transpose(logits);
    let bwd = tape.softmax_xent_rows(lt, smoothing);
    mean_of(tape, fwd, bwd)
}

/// Global loss on rows that are already unit length.
pub(crate) fn global_from_unit(
    tape: &mut Tape,
    m: NodeId,
    t: NodeId,
    h: NodeId,
    temp: Temperature,
    cfg: &AlignConfig,
) -> GlobalNodes {
    let v = tape.volume_matrix(m, t, h, cfg.volume_grad_eps);
    let rows = apply_temperature(tape, v, temp, -1.0);
    let m2th = tape.softmax_xent_rows(rows, cfg.label_smoothing);
    let cols = tape.transpose(rows);
    let th2m = tape.softmax_xent_rows(cols, cfg.label_smoothing);
    let mut lg = mean_of(tape, m2th, th2m);
    let mut aux = None;
    if cfg.aux_infonce {
        let mt = infonce_graph(tape, m, t, temp, cfg.label_smoothing);
        let mh = infonce_graph(tape, m, h, temp, cfg.label_smoothing);
        let th = infonce_graph(tape, t, h, temp, cfg.label_smoothing);
        let s = tape.add(mt, mh);
        let s = tape.add(s, th);
        aux = Some(s);
        lg = tape.add(lg, s);
    }
    GlobalNodes { m2th, th2m, lg, aux }
}

/// Normalizes the projected `[B, d]` rows and records the bidirectional
/// volume loss.
pub fn global_loss_graph(
    tape: &mut Tape,
    m: NodeId,
    t: NodeId,
    h: NodeId,
    temp: Temperature,
    cfg: &AlignConfig,
) -> GlobalNodes {
    let m = tape.normalize_rows(m);
    let t = tape.normalize_rows(t);
    let h = tape.normalize_rows(h);
    global_from_unit(tape, m, t, h, temp, cfg)
}

/// Local loss over pooled functional-group vectors. `fg` and `fgt` hold
/// one row per distinct group; `groups[i]` lists the rows belonging to
/// batch item `i`. Returns `None` when no item has groups.
pub fn local_loss_graph(
    tape: &mut Tape,
    fg: NodeId,
    fgt: NodeId,
    groups: &[Vec<usize>],
    mode: PoolMode,
    temp: Temperature,
    smoothing: f64,
) -> Option<LocalNodes> {
    let groups: Vec<Vec<usize>> = groups.iter().filter(|g| !g.is_empty()).cloned().collect();
    if groups.is_empty() {
        return None;
    }
    let p = tape.pool_rows(fg, groups.clone(), mode);
    let q = tape.pool_rows(fgt, groups, mode);
    let p = tape.normalize_rows(p);
    let q = tape.normalize_rows(q);
    let s = tape.matmul_nt(p, q);
    let logits = apply_temperature(tape, s, temp, 1.0);
    let fg2t = tape.softmax_xent_rows(logits, smoothing);
    let lt = tape.transpose(logits);
    let t2fg = tape.softmax_xent_rows(lt, smoothing);
    let ll = mean_of(tape, fg2t, t2fg);
    Some(LocalNodes { fg2t, t2fg, ll })
}
