//! Alignment scores and context vectors.
//!
//! The free functions work on plain vectors in the column convention
//! (`W h`), one decoder state at a time. [`Attention`] is the trainable
//! version on the tape, scoring a whole block of decoder states at once.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seqcore::layers::Linear;
use crate::seqcore::{AttentionKind, Graph, HiddenSeq, Init, Matrix, ModelConfig, ParamId, ParamStore, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
}

/// Column-convention scorer parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ScoreParams {
    /// `u_k = (W_1 s + b_1) . (W_2 h_k + b_2)`
    Bahdanau {
        w1: Matrix,
        b1: Vec<f64>,
        w2: Matrix,
        b2: Vec<f64>,
    },
    Dot,
    /// `s^T W_a h_k`
    General { w_a: Matrix },
    /// `v_a^T tanh(W_a [s; h_k])`, `W_a` is `d x 2d`
    Concat { w_a: Matrix, v_a: Vec<f64> },
}

fn matvec(w: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if w.cols() != x.len() {
        return Err(Error::shape(
            "matvec",
            format!("{:?} times vector of {}", w.shape(), x.len()),
        ));
    }
    Ok((0..w.rows())
        .map(|r| w.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn softmax(u: &[f64]) -> Vec<f64> {
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = u.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Score of one memory row against the decoder state.
pub fn luong_score(dec_hidden: &[f64], mem_row: &[f64], params: &ScoreParams) -> Result<f64> {
    let d = dec_hidden.len();
    if mem_row.len() != d {
        return Err(Error::shape("luong_score", format!("state {d} vs memory row {}", mem_row.len())));
    }
    match params {
        ScoreParams::Dot => Ok(dot(dec_hidden, mem_row)),
        ScoreParams::General { w_a } => Ok(dot(dec_hidden, &matvec(w_a, mem_row)?)),
        ScoreParams::Concat { w_a, v_a } => {
            let cat: Vec<f64> = dec_hidden.iter().chain(mem_row).copied().collect();
            let hid: Vec<f64> = matvec(w_a, &cat)?.into_iter().map(f64::tanh).collect();
            if v_a.len() != hid.len() {
                return Err(Error::shape("luong_score", "v_a length".to_string()));
            }
            Ok(dot(v_a, &hid))
        }
        ScoreParams::Bahdanau { w1, b1, w2, b2 } => {
            let q: Vec<f64> = matvec(w1, dec_hidden)?.iter().zip(b1).map(|(a, b)| a + b).collect();
            let k: Vec<f64> = matvec(w2, mem_row)?.iter().zip(b2).map(|(a, b)| a + b).collect();
            Ok(dot(&q, &k))
        }
    }
}

fn weighted_rows(memory: &HiddenSeq, w: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; memory.cols()];
    for (k, &a) in w.iter().enumerate() {
        for (ci, m) in c.iter_mut().zip(memory.row(k)) {
            *ci += a * m;
        }
    }
    c
}

/// Softmax-normalized global attention with any scorer.
pub fn global_attend(dec_hidden: &[f64], memory: &HiddenSeq, params: &ScoreParams) -> Result<AttentionOutput> {
    if memory.rows() == 0 {
        return Err(Error::Empty("attention memory"));
    }
    let u = (0..memory.rows())
        .map(|k| luong_score(dec_hidden, memory.row(k), params))
        .collect::<Result<Vec<f64>>>()?;
    let weights = softmax(&u);
    let context = weighted_rows(memory, &weights);
    Ok(AttentionOutput { weights, context })
}

pub fn bahdanau_attend(dec_hidden: &[f64], memory: &HiddenSeq, params: &ScoreParams) -> Result<AttentionOutput> {
    if !matches!(params, ScoreParams::Bahdanau { .. }) {
        return Err(Error::Config("bahdanau_attend needs Bahdanau parameters".into()));
    }
    global_attend(dec_hidden, memory, params)
}

/// Default Gaussian width for a memory of `s` positions.
pub fn default_sigma(s: usize) -> f64 {
    (s as f64 / 10.0).max(2.0)
}

pub fn gaussian_factor(j: f64, p: f64, sigma: f64) -> f64 {
    (-(j - p) * (j - p) / (2.0 * sigma * sigma)).exp()
}

/// Window center `S * sigmoid(w_p . s)` over 0-based positions.
pub fn local_center(dec_hidden: &[f64], w_p: &[f64], s: usize) -> f64 {
    let x = dot(w_p, dec_hidden);
    s as f64 / (1.0 + (-x).exp())
}

/// Global weights from `score`, then a Gaussian damping of the context
/// around the predicted center. Reported weights are undamped.
pub fn local_attend(
    dec_hidden: &[f64],
    memory: &HiddenSeq,
    score: &ScoreParams,
    w_p: &[f64],
    sigma: Option<f64>,
) -> Result<AttentionOutput> {
    let s = memory.rows();
    if s == 0 {
        return Err(Error::Empty("attention memory"));
    }
    let sigma = sigma.unwrap_or_else(|| default_sigma(s));
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("local attention sigma must be > 0, got {sigma}")));
    }
    let base = global_attend(dec_hidden, memory, score)?;
    let p = local_center(dec_hidden, w_p, s);
    let damped: Vec<f64> = base
        .weights
        .iter()
        .enumerate()
        .map(|(j, a)| a * gaussian_factor(j as f64, p, sigma))
        .collect();
    Ok(AttentionOutput {
        context: weighted_rows(memory, &damped),
        weights: base.weights,
    })
}

/// Trainable scorer. Weights are stored in the row convention.
#[derive(Clone, Debug)]
pub enum Scorer {
    Bahdanau { q: Linear, k: Linear, sum_norm: bool },
    Dot,
    General { w_a: ParamId },
    Concat { ws: Linear, wh: Linear, v: ParamId },
}

#[derive(Clone, Copy, Debug)]
pub struct LocalWindow {
    /// `d x 1`
    pub w_p: ParamId,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Attention {
    pub scorer: Scorer,
    pub local: Option<LocalWindow>,
}

/// Tape outputs: `L x S` weights and `L x d` contexts.
#[derive(Clone, Copy, Debug)]
pub struct AttnVars {
    pub weights: Var,
    pub context: Var,
}

impl Scorer {
    fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        kind: AttentionKind,
        d: usize,
        sum_norm: bool,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match kind {
            AttentionKind::Bahdanau => Scorer::Bahdanau {
                q: Linear::new(store, &format!("{prefix}.w1"), d, d, true, rng),
                k: Linear::new(store, &format!("{prefix}.w2"), d, d, true, rng),
                sum_norm,
            },
            AttentionKind::LuongDot => Scorer::Dot,
            AttentionKind::LuongGeneral => Scorer::General {
                w_a: store.add(format!("{prefix}.w_a"), d, d, Init::Uniform { fan_in: d }, rng),
            },
            AttentionKind::LuongConcat => Scorer::Concat {
                ws: Linear::new(store, &format!("{prefix}.w_s"), d, d, false, rng),
                wh: Linear::new(store, &format!("{prefix}.w_h"), d, d, false, rng),
                v: store.add(format!("{prefix}.v_a"), d, 1, Init::Uniform { fan_in: d }, rng),
            },
            other => return Err(Error::Config(format!("{other:?} is not a global scorer"))),
        })
    }

    /// Raw alignment scores, `L x S`.
    pub fn scores(&self, g: &mut Graph, q: Var, m: Var) -> Var {
        match self {
            Scorer::Bahdanau { q: wq, k: wk, .. } => {
                let qq = wq.forward(g, q);
                let kk = wk.forward(g, m);
                g.matmul_nt(qq, kk)
            }
            Scorer::Dot => g.matmul_nt(q, m),
            Scorer::General { w_a } => {
                let w = g.param(*w_a);
                let k = g.matmul_nt(m, w);
                g.matmul_nt(q, k)
            }
            Scorer::Concat { ws, wh, v } => {
                let a = ws.forward(g, q);
                let b = wh.forward(g, m);
                let v = g.param(*v);
                let rows: Vec<Var> = (0..g.shape(q).0)
                    .map(|i| {
                        let ai = g.slice_rows(a, i, 1);
                        let pre = g.add(b, ai);
                        let h = g.tanh(pre);
                        let col = g.matmul(h, v);
                        g.transpose(col)
                    })
                    .collect();
                g.concat_rows(&rows)
            }
        }
    }

    fn normalize(&self, g: &mut Graph, u: Var) -> Var {
        match self {
            Scorer::Bahdanau { sum_norm: true, .. } => g.normalize_rows(u),
            _ => g.softmax_rows(u),
        }
    }

    /// Column-convention copy of the parameters.
    pub fn to_plain(&self, store: &ParamStore) -> ScoreParams {
        match self {
            Scorer::Bahdanau { q, k, .. } => ScoreParams::Bahdanau {
                w1: store.value(q.weight).transpose(),
                b1: store.value(q.bias.unwrap()).data().to_vec(),
                w2: store.value(k.weight).transpose(),
                b2: store.value(k.bias.unwrap()).data().to_vec(),
            },
            Scorer::Dot => ScoreParams::Dot,
            Scorer::General { w_a } => ScoreParams::General {
                w_a: store.value(*w_a).clone(),
            },
            Scorer::Concat { ws, wh, v } => ScoreParams::Concat {
                w_a: Matrix::concat_cols(&[
                    &store.value(ws.weight).transpose(),
                    &store.value(wh.weight).transpose(),
                ]),
                v_a: store.value(*v).data().to_vec(),
            },
        }
    }
}

impl Attention {
    /// Builds the scorer named by `cfg.attention` under `prefix`.
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        let d = cfg.d_model;
        let sum_norm = cfg.bahdanau_sum_normalization;
        if cfg.attention == AttentionKind::LuongLocal {
            let scorer = Scorer::new(store, prefix, cfg.local_score, d, sum_norm, rng)?;
            let w_p = store.add(format!("{prefix}.w_p"), d, 1, Init::Uniform { fan_in: d }, rng);
            Ok(Attention {
                scorer,
                local: Some(LocalWindow {
                    w_p,
                    sigma: cfg.local_sigma,
                }),
            })
        } else {
            Ok(Attention {
                scorer: Scorer::new(store, prefix, cfg.attention, d, sum_norm, rng)?,
                local: None,
            })
        }
    }

    /// Attends every row of `q` (`L x d`) over `m` (`S x d`, `S >= 1`).
    pub fn attend(&self, g: &mut Graph, q: Var, m: Var) -> AttnVars {
        let u = self.scorer.scores(g, q, m);
        let weights = self.scorer.normalize(g, u);
        let Some(local) = self.local else {
            let context = g.matmul(weights, m);
            return AttnVars { weights, context };
        };
        let s = g.shape(m).0;
        let sigma = local.sigma.unwrap_or_else(|| default_sigma(s));
        let w_p = g.param(local.w_p);
        let logit = g.matmul(q, w_p);
        let sig = g.sigmoid(logit);
        let center = g.scale(sig, s as f64);
        let pos = g.leaf(Matrix::row_vector((0..s).map(|j| j as f64).collect()));
        let diff = g.sub(pos, center);
        let sq = g.mul(diff, diff);
        let expo = g.scale(sq, -1.0 / (2.0 * sigma * sigma));
        let gauss = g.exp(expo);
        let damped = g.mul(weights, gauss);
        let context = g.matmul(damped, m);
        AttnVars { weights, context }
    }
}
