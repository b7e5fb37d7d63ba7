//! Transformer encoder (regular or pyramid) and standard decoder.
//!
//! Layers follow the post-norm layout: each residual sum is normalized when
//! `ModelConfig::layer_norm` is set and passed through unchanged otherwise.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seqcore::layers::{group_windows, Embedding, LayerNorm, Linear};
use crate::seqcore::{Graph, HiddenSeq, Matrix, ModelConfig, ParamStore, ResidualMode, Var};

/// Additive mask value for disallowed positions.
pub const MASK_NEG: f64 = -1e9;

/// `L x L` additive mask hiding future positions.
pub fn causal_mask(len: usize) -> Matrix {
    let mut m = Matrix::zeros(len, len);
    for i in 0..len {
        for j in i + 1..len {
            m.set(i, j, MASK_NEG);
        }
    }
    m
}

/// Sinusoidal position table, `len x d`.
pub fn positional_encoding(len: usize, d: usize) -> Matrix {
    let mut m = Matrix::zeros(len, d);
    for pos in 0..len {
        for i in 0..d {
            let rate = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let a = pos as f64 / rate;
            m.set(pos, i, if i % 2 == 0 { a.sin() } else { a.cos() });
        }
    }
    m
}

/// Multi-head scaled dot-product attention with the residual of its query
/// input. Projections are `d x d` with head `h` in columns
/// `h*head_dim..(h+1)*head_dim`; there are no projection biases.
#[derive(Clone, Copy, Debug)]
pub struct MultiHeadAttention {
    pub w_q: Linear,
    pub w_k: Linear,
    pub w_v: Linear,
    pub w_o: Linear,
    pub heads: usize,
    pub dim: usize,
}

pub struct MhaVars {
    /// `c_att = MultiHeadAtt(q, kv) + q`.
    pub output: Var,
    /// One `Lq x Lk` weight matrix per head.
    pub weights: Vec<Var>,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, dim: usize, heads: usize, rng: &mut R) -> Self {
        let lin = |store: &mut ParamStore, s: &str, rng: &mut R| Linear::new(store, &format!("{name}.{s}"), dim, dim, false, rng);
        MultiHeadAttention {
            w_q: lin(store, "w_q", rng),
            w_k: lin(store, "w_k", rng),
            w_v: lin(store, "w_v", rng),
            w_o: lin(store, "w_o", rng),
            heads,
            dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, q: Var, kv: Var, mask: Option<&Matrix>) -> Result<MhaVars> {
        let (lq, d) = g.shape(q);
        let lk = g.shape(kv).0;
        if self.heads == 0 || d % self.heads != 0 || d != self.dim {
            return Err(Error::Config(format!("heads ({}) must divide d_model ({d})", self.heads)));
        }
        if let Some(m) = mask {
            if m.shape() != (lq, lk) {
                return Err(Error::shape(
                    "multi_head_att",
                    format!("mask {:?} for {lq} queries and {lk} keys", m.shape()),
                ));
            }
        }
        let hd = d / self.heads;
        let qp = self.w_q.forward(g, q);
        let kp = self.w_k.forward(g, kv);
        let vp = self.w_v.forward(g, kv);
        let mask = mask.map(|m| g.leaf(m.clone()));
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(qp, h * hd, hd);
            let kh = g.slice_cols(kp, h * hd, hd);
            let vh = g.slice_cols(vp, h * hd, hd);
            let s = g.matmul_nt(qh, kh);
            let mut s = g.scale(s, 1.0 / (hd as f64).sqrt());
            if let Some(m) = mask {
                s = g.add(s, m);
            }
            let a = g.softmax_rows(s);
            outs.push(g.matmul(a, vh));
            weights.push(a);
        }
        let cat = g.concat_cols(&outs);
        let att = self.w_o.forward(g, cat);
        Ok(MhaVars {
            output: g.add(att, q),
            weights,
        })
    }
}

/// Self-attention over `x_seq` with the residual, as plain values. Returns
/// the output and the per-head weight matrices.
pub fn multi_head_att(
    x_seq: &HiddenSeq,
    mha: &MultiHeadAttention,
    params: &ParamStore,
    mask: Option<&Matrix>,
) -> Result<(HiddenSeq, Vec<Matrix>)> {
    let mut g = Graph::new(params);
    let x = g.leaf(x_seq.clone());
    let out = mha.forward(&mut g, x, x, mask)?;
    Ok((
        g.value(out.output).clone(),
        out.weights.iter().map(|&w| g.value(w).clone()).collect(),
    ))
}

/// Position-wise `W_2 relu(W_1 x + b_1) + b_2`.
#[derive(Clone, Copy, Debug)]
pub struct FeedForward {
    pub l1: Linear,
    pub l2: Linear,
}

impl FeedForward {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, d_in: usize, d_ff: usize, d_out: usize, rng: &mut R) -> Self {
        FeedForward {
            l1: Linear::new(store, &format!("{name}.l1"), d_in, d_ff, true, rng),
            l2: Linear::new(store, &format!("{name}.l2"), d_ff, d_out, true, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let h = self.l1.forward(g, x);
        let h = g.relu(h);
        self.l2.forward(g, h)
    }
}

fn norm(g: &mut Graph, ln: Option<LayerNorm>, x: Var) -> Var {
    match ln {
        Some(l) => l.forward(g, x),
        None => x,
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Contraction {
    None,
    Ave,
    Aff(Linear),
}

/// One encoder layer. With a contraction the feed-forward input is the
/// window concatenation and the layer output has `ceil(T / w)` rows.
#[derive(Clone, Copy, Debug)]
pub struct EncoderLayer {
    pub att: MultiHeadAttention,
    pub ln1: Option<LayerNorm>,
    pub ff: FeedForward,
    pub ln2: Option<LayerNorm>,
    pub contraction: Contraction,
    pub window: usize,
}

impl EncoderLayer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, cfg: &ModelConfig, pyramid: bool, rng: &mut R) -> Self {
        let d = cfg.d_model;
        let w = cfg.window;
        let att = MultiHeadAttention::new(store, &format!("{name}.att"), d, cfg.heads, rng);
        let ln1 = cfg.layer_norm.then(|| LayerNorm::new(store, &format!("{name}.ln1"), d, rng));
        let ff_in = if pyramid { w * d } else { d };
        let ff = FeedForward::new(store, &format!("{name}.ff"), ff_in, cfg.d_ff, d, rng);
        let ln2 = cfg.layer_norm.then(|| LayerNorm::new(store, &format!("{name}.ln2"), d, rng));
        let contraction = match (pyramid, cfg.residual_mode) {
            (false, _) => Contraction::None,
            (true, ResidualMode::Ave) => Contraction::Ave,
            (true, ResidualMode::Aff) => Contraction::Aff(Linear::new(store, &format!("{name}.aff"), w * d, d, true, rng)),
        };
        EncoderLayer {
            att,
            ln1,
            ff,
            ln2,
            contraction,
            window: w,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let c = self.att.forward(g, x, x, None)?.output;
        let c = norm(g, self.ln1, c);
        let out = match self.contraction {
            Contraction::None => {
                let f = self.ff.forward(g, c);
                g.add(c, f)
            }
            Contraction::Ave => {
                let cat = group_windows(g, c, self.window);
                let d = g.shape(c).1;
                let avg = g.leaf(averaging_matrix(self.window, d));
                let res = g.matmul(cat, avg);
                let f = self.ff.forward(g, cat);
                g.add(res, f)
            }
            Contraction::Aff(aff) => {
                let cat = group_windows(g, c, self.window);
                let pre = aff.forward(g, cat);
                let res = g.tanh(pre);
                let f = self.ff.forward(g, cat);
                g.add(res, f)
            }
        };
        Ok(norm(g, self.ln2, out))
    }
}

/// `(w*d) x d` stack of `I / w`: maps a window concatenation to its mean.
pub fn averaging_matrix(window: usize, d: usize) -> Matrix {
    let mut m = Matrix::zeros(window * d, d);
    for k in 0..window {
        for i in 0..d {
            m.set(k * d + i, i, 1.0 / window as f64);
        }
    }
    m
}

#[derive(Clone, Debug)]
pub struct TransformerEncoder {
    pub embed: Embedding,
    pub layers: Vec<EncoderLayer>,
    pub dim: usize,
}

/// Token embeddings scaled by `sqrt(d)` plus sinusoidal positions.
fn embed_with_positions(g: &mut Graph, embed: &Embedding, ids: &[usize]) -> Var {
    let e = embed.forward(g, ids);
    let e = g.scale(e, (embed.dim as f64).sqrt());
    let pe = g.leaf(positional_encoding(ids.len(), embed.dim));
    g.add(e, pe)
}

impl TransformerEncoder {
    /// Layers `0..N-1` contract when `cfg.pyramid`; the last layer is
    /// regular, so the memory has `output_length(T, N, w)` rows.
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut R) -> Self {
        let n = cfg.encoder_layers;
        let embed = Embedding::new(store, "enc.embed", cfg.vocab_size, cfg.d_model, rng);
        let layers = (0..n)
            .map(|i| EncoderLayer::new(store, &format!("enc.layer{i}"), cfg, cfg.pyramid && i + 1 < n, rng))
            .collect();
        TransformerEncoder {
            embed,
            layers,
            dim: cfg.d_model,
        }
    }

    pub fn forward(&self, g: &mut Graph, ids: &[usize]) -> Result<Var> {
        if ids.is_empty() {
            return Err(Error::Empty("source sequence"));
        }
        let mut x = embed_with_positions(g, &self.embed, ids);
        for layer in &self.layers {
            x = layer.forward(g, x)?;
        }
        Ok(x)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DecoderLayer {
    pub self_att: MultiHeadAttention,
    pub ln1: Option<LayerNorm>,
    pub cross_att: MultiHeadAttention,
    pub ln2: Option<LayerNorm>,
    pub ff: FeedForward,
    pub ln3: Option<LayerNorm>,
}

impl DecoderLayer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, cfg: &ModelConfig, rng: &mut R) -> Self {
        let d = cfg.d_model;
        let ln = |store: &mut ParamStore, s: &str, rng: &mut R| {
            cfg.layer_norm.then(|| LayerNorm::new(store, &format!("{name}.{s}"), d, rng))
        };
        DecoderLayer {
            self_att: MultiHeadAttention::new(store, &format!("{name}.self_att"), d, cfg.heads, rng),
            ln1: ln(store, "ln1", rng),
            cross_att: MultiHeadAttention::new(store, &format!("{name}.cross_att"), d, cfg.heads, rng),
            ln2: ln(store, "ln2", rng),
            ff: FeedForward::new(store, &format!("{name}.ff"), d, cfg.d_ff, d, rng),
            ln3: ln(store, "ln3", rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, y: Var, memory: Var, mask: &Matrix) -> Result<Var> {
        let a = self.self_att.forward(g, y, y, Some(mask))?.output;
        let a = norm(g, self.ln1, a);
        let c = self.cross_att.forward(g, a, memory, None)?.output;
        let c = norm(g, self.ln2, c);
        let f = self.ff.forward(g, c);
        let out = g.add(c, f);
        Ok(norm(g, self.ln3, out))
    }
}

#[derive(Clone, Debug)]
pub struct TransformerDecoder {
    pub embed: Embedding,
    pub layers: Vec<DecoderLayer>,
    pub out: Linear,
}

impl TransformerDecoder {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut R) -> Self {
        let embed = Embedding::new(store, "dec.embed", cfg.vocab_size, cfg.d_model, rng);
        let layers = (0..cfg.decoder_layers)
            .map(|i| DecoderLayer::new(store, &format!("dec.layer{i}"), cfg, rng))
            .collect();
        let out = Linear::new(store, "dec.out", cfg.d_model, cfg.vocab_size, true, rng);
        TransformerDecoder { embed, layers, out }
    }

    /// Logits for every prefix position (`L x V`); row `t` sees `y_0..=y_t`.
    pub fn forward(&self, g: &mut Graph, memory: Var, prefix: &[usize]) -> Result<Var> {
        let y = self.hidden(g, memory, prefix)?;
        Ok(self.out.forward(g, y))
    }

    /// Last decoder layer output per prefix position, before the projection.
    pub fn hidden(&self, g: &mut Graph, memory: Var, prefix: &[usize]) -> Result<Var> {
        if prefix.is_empty() {
            return Err(Error::Empty("decoder prefix"));
        }
        let mask = causal_mask(prefix.len());
        let mut y = embed_with_positions(g, &self.embed, prefix);
        for layer in &self.layers {
            y = layer.forward(g, y, memory, &mask)?;
        }
        Ok(y)
    }
}

/// Next-token logits after `prefix` (which starts with SOS).
pub fn transformer_decode_step(
    prefix: &[usize],
    memory: &HiddenSeq,
    decoder: &TransformerDecoder,
    params: &ParamStore,
) -> Result<Vec<f64>> {
    if let Some(&bad) = prefix.iter().find(|&&id| id >= decoder.embed.vocab_size) {
        return Err(Error::IdOutOfRange {
            id: bad,
            size: decoder.embed.vocab_size,
        });
    }
    if memory.rows() == 0 {
        return Err(Error::Empty("encoder memory"));
    }
    let mut g = Graph::new(params);
    let m = g.leaf(memory.clone());
    let logits = decoder.forward(&mut g, m, prefix)?;
    let v = g.value(logits);
    Ok(v.row(v.rows() - 1).to_vec())
}
