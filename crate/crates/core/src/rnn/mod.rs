//! GRU cell, bidirectional (pyramid) GRU encoder and attentional GRU decoder.
//!
//! Plain functions use the column convention of the gate equations
//! (`W x`, `W` is `d_h x d_in`) and serve as reference implementations for
//! the tape versions.

use rand::Rng;

use crate::attention::{Attention, AttnVars};
use crate::error::{Error, Result};
use crate::seqcore::layers::{Embedding, Linear, Pyramid};
use crate::seqcore::{
    embed, pyramid_contract, Graph, HiddenSeq, Init, Matrix, ModelConfig, ParamId, ParamStore,
    PyramidParams, Var,
};

/// Gate parameters in the column convention.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub w_ir: Matrix,
    pub w_iz: Matrix,
    pub w_in: Matrix,
    pub w_hr: Matrix,
    pub w_hz: Matrix,
    pub w_hn: Matrix,
    pub b_ir: Vec<f64>,
    pub b_iz: Vec<f64>,
    pub b_in: Vec<f64>,
    pub b_hr: Vec<f64>,
    pub b_hz: Vec<f64>,
    pub b_hn: Vec<f64>,
}

impl GruParams {
    pub fn zeros(d_in: usize, d_h: usize) -> Self {
        GruParams {
            w_ir: Matrix::zeros(d_h, d_in),
            w_iz: Matrix::zeros(d_h, d_in),
            w_in: Matrix::zeros(d_h, d_in),
            w_hr: Matrix::zeros(d_h, d_h),
            w_hz: Matrix::zeros(d_h, d_h),
            w_hn: Matrix::zeros(d_h, d_h),
            b_ir: vec![0.0; d_h],
            b_iz: vec![0.0; d_h],
            b_in: vec![0.0; d_h],
            b_hr: vec![0.0; d_h],
            b_hz: vec![0.0; d_h],
            b_hn: vec![0.0; d_h],
        }
    }

    pub fn random<R: Rng + ?Sized>(d_in: usize, d_h: usize, bound: f64, rng: &mut R) -> Self {
        let m = |r, c, rng: &mut R| Matrix::uniform(r, c, bound, rng);
        let v = |rng: &mut R| Matrix::uniform(1, d_h, bound, rng).into_vec();
        GruParams {
            w_ir: m(d_h, d_in, rng),
            w_iz: m(d_h, d_in, rng),
            w_in: m(d_h, d_in, rng),
            w_hr: m(d_h, d_h, rng),
            w_hz: m(d_h, d_h, rng),
            w_hn: m(d_h, d_h, rng),
            b_ir: v(rng),
            b_iz: v(rng),
            b_in: v(rng),
            b_hr: v(rng),
            b_hz: v(rng),
            b_hn: v(rng),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w_ir.cols()
    }

    pub fn d_h(&self) -> usize {
        self.w_ir.rows()
    }

    fn check(&self) -> Result<()> {
        let (h, i) = (self.d_h(), self.d_in());
        let ok = [&self.w_ir, &self.w_iz, &self.w_in].iter().all(|w| w.shape() == (h, i))
            && [&self.w_hr, &self.w_hz, &self.w_hn].iter().all(|w| w.shape() == (h, h))
            && [&self.b_ir, &self.b_iz, &self.b_in, &self.b_hr, &self.b_hz, &self.b_hn]
                .iter()
                .all(|b| b.len() == h);
        if ok {
            Ok(())
        } else {
            Err(Error::shape("gru", "inconsistent gate parameter shapes"))
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine(w: &Matrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|r| b[r] + w.row(r).iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
        .collect()
}

/// One GRU step. `r` gates only `W_hn h`; `b_hn` sits outside the gate.
pub fn gru_cell_step(x_t: &[f64], h_prev: &[f64], p: &GruParams) -> Result<Vec<f64>> {
    p.check()?;
    if x_t.len() != p.d_in() || h_prev.len() != p.d_h() {
        return Err(Error::shape(
            "gru_cell_step",
            format!("x {} / h {} vs params {}x{}", x_t.len(), h_prev.len(), p.d_h(), p.d_in()),
        ));
    }
    let zero = vec![0.0; p.d_h()];
    let ir = affine(&p.w_ir, x_t, &p.b_ir);
    let iz = affine(&p.w_iz, x_t, &p.b_iz);
    let inn = affine(&p.w_in, x_t, &p.b_in);
    let hr = affine(&p.w_hr, h_prev, &p.b_hr);
    let hz = affine(&p.w_hz, h_prev, &p.b_hz);
    let hn = affine(&p.w_hn, h_prev, &zero);
    Ok((0..p.d_h())
        .map(|j| {
            let r = sigmoid(ir[j] + hr[j]);
            let z = sigmoid(iz[j] + hz[j]);
            let n = (inn[j] + r * hn[j] + p.b_hn[j]).tanh();
            (1.0 - z) * n + z * h_prev[j]
        })
        .collect())
}

fn gru_run(x: &HiddenSeq, p: &GruParams, reverse: bool) -> Result<HiddenSeq> {
    let t = x.rows();
    let mut out = Matrix::zeros(t, p.d_h());
    let mut h = vec![0.0; p.d_h()];
    for step in 0..t {
        let i = if reverse { t - 1 - step } else { step };
        h = gru_cell_step(x.row(i), &h, p)?;
        out.row_mut(i).copy_from_slice(&h);
    }
    Ok(out)
}

/// `h_t = f_t + b_t`, forward and backward passes from zero states.
pub fn bigru_layer(x_seq: &HiddenSeq, fwd: &GruParams, bwd: &GruParams) -> Result<HiddenSeq> {
    let mut f = gru_run(x_seq, fwd, false)?;
    let b = gru_run(x_seq, bwd, true)?;
    f.add_assign(&b);
    Ok(f)
}

/// Trainable GRU with fused gate weights: `w_ih` is `d_in x 3d` with
/// column blocks `[r | z | n]`, likewise `w_hh`, `b_ih` and `b_hh`.
#[derive(Clone, Copy, Debug)]
pub struct GruCell {
    pub w_ih: ParamId,
    pub b_ih: ParamId,
    pub w_hh: ParamId,
    pub b_hh: ParamId,
    pub d_in: usize,
    pub dim: usize,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, d_in: usize, dim: usize, rng: &mut R) -> Self {
        let i = Init::Uniform { fan_in: d_in };
        let h = Init::Uniform { fan_in: dim };
        GruCell {
            w_ih: store.add(format!("{name}.w_ih"), d_in, 3 * dim, i, rng),
            b_ih: store.add(format!("{name}.b_ih"), 1, 3 * dim, i, rng),
            w_hh: store.add(format!("{name}.w_hh"), dim, 3 * dim, h, rng),
            b_hh: store.add(format!("{name}.b_hh"), 1, 3 * dim, h, rng),
            d_in,
            dim,
        }
    }

    /// Input-side pre-activations for all rows of `x`, with both bias
    /// vectors folded in.
    pub fn input_proj(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.w_ih);
        let (bi, bh) = (g.param(self.b_ih), g.param(self.b_hh));
        let y = g.matmul(x, w);
        let y = g.add(y, bi);
        g.add(y, bh)
    }

    pub fn step(&self, g: &mut Graph, gx: Var, h: Var) -> Var {
        let w = g.param(self.w_hh);
        let hw = g.matmul(h, w);
        g.gru_gates(gx, hw, h)
    }

    /// Runs over all rows of `x` from a zero state; output rows are in input
    /// order.
    pub fn run(&self, g: &mut Graph, x: Var, reverse: bool) -> Var {
        let t = g.shape(x).0;
        if t == 0 {
            return g.leaf(Matrix::zeros(0, self.dim));
        }
        let gx = self.input_proj(g, x);
        let mut h = g.leaf(Matrix::zeros(1, self.dim));
        let mut rows = Vec::with_capacity(t);
        for step in 0..t {
            let i = if reverse { t - 1 - step } else { step };
            let gi = g.slice_rows(gx, i, 1);
            h = self.step(g, gi, h);
            rows.push(h);
        }
        if reverse {
            rows.reverse();
        }
        g.concat_rows(&rows)
    }

    pub fn to_plain(&self, store: &ParamStore) -> GruParams {
        let d = self.dim;
        let wi = store.value(self.w_ih);
        let wh = store.value(self.w_hh);
        let bi = store.value(self.b_ih).data();
        let bh = store.value(self.b_hh).data();
        let block = |w: &Matrix, k: usize| w.slice_cols(k * d, d).transpose();
        GruParams {
            w_ir: block(wi, 0),
            w_iz: block(wi, 1),
            w_in: block(wi, 2),
            w_hr: block(wh, 0),
            w_hz: block(wh, 1),
            w_hn: block(wh, 2),
            b_ir: bi[..d].to_vec(),
            b_iz: bi[d..2 * d].to_vec(),
            b_in: bi[2 * d..].to_vec(),
            b_hr: bh[..d].to_vec(),
            b_hz: bh[d..2 * d].to_vec(),
            b_hn: bh[2 * d..].to_vec(),
        }
    }

    pub fn load_plain(&self, store: &mut ParamStore, p: &GruParams) -> Result<()> {
        p.check()?;
        if (p.d_in(), p.d_h()) != (self.d_in, self.dim) {
            return Err(Error::shape("GruCell::load_plain", "dimension mismatch"));
        }
        let cat = |ws: [&Matrix; 3]| {
            let t: Vec<Matrix> = ws.iter().map(|w| w.transpose()).collect();
            Matrix::concat_cols(&[&t[0], &t[1], &t[2]])
        };
        let row = |bs: [&Vec<f64>; 3]| Matrix::row_vector(bs.iter().flat_map(|b| b.iter().copied()).collect());
        *store.value_mut(self.w_ih) = cat([&p.w_ir, &p.w_iz, &p.w_in]);
        *store.value_mut(self.w_hh) = cat([&p.w_hr, &p.w_hz, &p.w_hn]);
        *store.value_mut(self.b_ih) = row([&p.b_ir, &p.b_iz, &p.b_in]);
        *store.value_mut(self.b_hh) = row([&p.b_hr, &p.b_hz, &p.b_hn]);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BiGru {
    pub fwd: GruCell,
    pub bwd: GruCell,
    /// Contraction applied to this layer's input (absent on layer 0 and
    /// in regular encoders).
    pub pyramid: Option<Pyramid>,
}

impl BiGru {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let x = match self.pyramid {
            Some(p) => p.forward(g, x),
            None => x,
        };
        let f = self.fwd.run(g, x, false);
        let b = self.bwd.run(g, x, true);
        g.add(f, b)
    }
}

/// Parameter-name prefix of encoder layer `i` (0-based).
pub fn encoder_layer_prefix(i: usize) -> String {
    format!("enc.layer{i}.")
}

#[derive(Clone, Debug)]
pub struct GruEncoder {
    pub embed: Embedding,
    pub layers: Vec<BiGru>,
}

impl GruEncoder {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut R) -> Self {
        let d = cfg.d_model;
        let embed = Embedding::new(store, "enc.embed", cfg.vocab_size, d, rng);
        let layers = (0..cfg.encoder_layers)
            .map(|i| {
                let name = format!("enc.layer{i}");
                let pyramid = (cfg.pyramid && i > 0)
                    .then(|| Pyramid::new(store, &format!("{name}.pyr"), d, cfg.window, rng));
                BiGru {
                    fwd: GruCell::new(store, &format!("{name}.fwd"), d, d, rng),
                    bwd: GruCell::new(store, &format!("{name}.bwd"), d, d, rng),
                    pyramid,
                }
            })
            .collect();
        GruEncoder { embed, layers }
    }

    /// Memory `h^(N)`, one row per (contracted) position.
    pub fn forward(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let mut x = self.embed.forward(g, ids);
        for layer in &self.layers {
            x = layer.forward(g, x);
        }
        x
    }

    /// Same computation with plain functions.
    pub fn encode_plain(&self, store: &ParamStore, ids: &[usize]) -> Result<EncoderState> {
        let mut x = embed(ids, store.value(self.embed.table))?;
        let mut finals = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            if let Some(p) = layer.pyramid {
                let params = PyramidParams {
                    w_pyr: store.value(p.proj.weight).clone(),
                    b_pyr: store.value(p.proj.bias.expect("pyramid bias")).clone(),
                    window: p.window,
                };
                x = pyramid_contract(&x, &params)?;
            }
            let f = gru_run(&x, &layer.fwd.to_plain(store), false)?;
            let b = gru_run(&x, &layer.bwd.to_plain(store), true)?;
            let t = x.rows();
            finals.push(if t == 0 {
                (vec![0.0; f.cols()], vec![0.0; f.cols()])
            } else {
                (f.row(t - 1).to_vec(), b.row(0).to_vec())
            });
            let mut h = f;
            h.add_assign(&b);
            x = h;
        }
        Ok(EncoderState { memory: x, finals })
    }
}

/// Encoder output: the final-layer memory and each layer's last forward and
/// backward states.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderState {
    pub memory: HiddenSeq,
    pub finals: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Runs the GRU encoder held in `params` (names as created by
/// [`GruEncoder::new`]).
pub fn gru_encode(ids: &[usize], config: &ModelConfig, params: &ParamStore) -> Result<EncoderState> {
    if ids.is_empty() {
        return Err(Error::Empty("source sequence"));
    }
    let mut scratch = ParamStore::new();
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let layout = GruEncoder::new(&mut scratch, config, &mut rng);
    let mut local = ParamStore::new();
    for (_, p) in scratch.iter() {
        let v = params
            .by_name(&p.name)
            .ok_or_else(|| Error::Config(format!("missing parameter {}", p.name)))?;
        if v.shape() != p.value.shape() {
            return Err(Error::CheckpointShape {
                name: p.name.clone(),
                found: vec![v.rows(), v.cols()],
                expected: vec![p.value.rows(), p.value.cols()],
            });
        }
        local.insert(p.name.clone(), v.clone(), p.init);
    }
    layout.encode_plain(&local, ids)
}

/// Attentional decoder: `M` stacked GRUs, attention from the top state,
/// logits from `[context, top state]`.
#[derive(Clone, Debug)]
pub struct GruDecoder {
    pub embed: Embedding,
    pub layers: Vec<GruCell>,
    pub attention: Attention,
    pub out: Linear,
    pub dim: usize,
}

impl GruDecoder {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        let d = cfg.d_model;
        let embed = Embedding::new(store, "dec.embed", cfg.vocab_size, d, rng);
        let layers = (0..cfg.decoder_layers)
            .map(|i| GruCell::new(store, &format!("dec.layer{i}"), d, d, rng))
            .collect();
        let attention = Attention::new(store, "dec.att", cfg, rng)?;
        let out = Linear::new(store, "dec.out", 2 * d, cfg.vocab_size, true, rng);
        Ok(GruDecoder {
            embed,
            layers,
            attention,
            out,
            dim: d,
        })
    }

    pub fn initial_state(&self, g: &mut Graph) -> Vec<Var> {
        (0..self.layers.len())
            .map(|_| g.leaf(Matrix::zeros(1, self.dim)))
            .collect()
    }

    /// `[context, top state]`, the input of the output projection.
    pub fn features(&self, g: &mut Graph, top: Var, memory: Var) -> (Var, AttnVars) {
        let att = self.attention.attend(g, top, memory);
        (g.concat_cols(&[att.context, top]), att)
    }

    fn project(&self, g: &mut Graph, top: Var, memory: Var) -> (Var, AttnVars) {
        let (f, att) = self.features(g, top, memory);
        (self.out.forward(g, f), att)
    }

    /// Top-layer state for every position of `inputs` under teacher forcing.
    pub fn top_states(&self, g: &mut Graph, inputs: &[usize]) -> Var {
        let mut x = self.embed.forward(g, inputs);
        for cell in &self.layers {
            x = cell.run(g, x, false);
        }
        x
    }

    /// Logits for every position of `inputs` given gold previous tokens.
    pub fn forward_teacher(&self, g: &mut Graph, memory: Var, inputs: &[usize]) -> Var {
        let x = self.top_states(g, inputs);
        self.project(g, x, memory).0
    }

    /// One decoding step from `prev` with per-layer states `state`.
    pub fn step(&self, g: &mut Graph, memory: Var, prev: usize, state: &[Var]) -> (Var, Vec<Var>) {
        let (top, next) = self.advance(g, prev, state);
        (self.project(g, top, memory).0, next)
    }

    /// Feeds `prev` through the stack; returns the top state and all states.
    pub fn advance(&self, g: &mut Graph, prev: usize, state: &[Var]) -> (Var, Vec<Var>) {
        let mut x = self.embed.forward(g, &[prev]);
        let mut next = Vec::with_capacity(state.len());
        for (cell, &h) in self.layers.iter().zip(state) {
            let gx = cell.input_proj(g, x);
            x = cell.step(g, gx, h);
            next.push(x);
        }
        (x, next)
    }
}

/// Plain-value decoder state: one `1 x d` row per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub hidden: Vec<Matrix>,
}

/// One inference step: returns the logits over the vocabulary and the next
/// state. Zero initial state is `DecoderState { hidden: zeros }`.
pub fn gru_decode_step(
    y_prev: usize,
    state: &DecoderState,
    memory: &HiddenSeq,
    decoder: &GruDecoder,
    params: &ParamStore,
) -> Result<(Vec<f64>, DecoderState)> {
    if y_prev >= decoder.embed.vocab_size {
        return Err(Error::IdOutOfRange {
            id: y_prev,
            size: decoder.embed.vocab_size,
        });
    }
    if memory.rows() == 0 {
        return Err(Error::Empty("encoder memory"));
    }
    if state.hidden.len() != decoder.layers.len() {
        return Err(Error::shape("gru_decode_step", "state layer count"));
    }
    let mut g = Graph::new(params);
    let m = g.leaf(memory.clone());
    let hs: Vec<Var> = state.hidden.iter().map(|h| g.leaf(h.clone())).collect();
    let (logits, next) = decoder.step(&mut g, m, y_prev, &hs);
    Ok((
        g.value(logits).data().to_vec(),
        DecoderState {
            hidden: next.iter().map(|&v| g.value(v).clone()).collect(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::softmax;
    use crate::seqcore::{grad_check, output_length, AttentionKind, GraphModule};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_params_give_zero_state() {
        let p = GruParams::zeros(3, 2);
        assert_eq!(gru_cell_step(&[1.0, -2.0, 0.5], &[0.0, 0.0], &p).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn scalar_hand_value() {
        let mut p = GruParams::zeros(1, 1);
        p.w_in.set(0, 0, 1.0);
        let h = gru_cell_step(&[1.0], &[0.0], &p).unwrap()[0];
        assert!((h - 0.5 * 1f64.tanh()).abs() < 1e-15);
        assert!((h - 0.3808).abs() < 1e-4);
    }

    #[test]
    fn saturated_update_gate_keeps_state() {
        let mut p = GruParams::random(2, 3, 0.5, &mut rng(1));
        p.b_iz = vec![400.0; 3];
        p.b_hz = vec![400.0; 3];
        let h = [0.3, -0.7, 0.1];
        assert_eq!(gru_cell_step(&[0.9, -0.4], &h, &p).unwrap(), h.to_vec());
    }

    #[test]
    fn reset_gate_multiplies_only_the_hidden_product() {
        // d = 1: n = tanh(b_in + r * w_hn * h + b_hn) with r = 0.5
        let mut p = GruParams::zeros(1, 1);
        p.w_hn.set(0, 0, 2.0);
        p.b_hn = vec![0.4];
        let h = gru_cell_step(&[0.0], &[1.0], &p).unwrap()[0];
        let n = (0.5 * 2.0 + 0.4f64).tanh();
        assert!((h - (0.5 * n + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let p = GruParams::zeros(2, 2);
        assert!(gru_cell_step(&[1.0], &[0.0, 0.0], &p).is_err());
        assert!(gru_cell_step(&[1.0, 1.0], &[0.0], &p).is_err());
    }

    #[test]
    fn bigru_examples() {
        let x = Matrix::uniform(4, 2, 1.0, &mut rng(2));
        let z = GruParams::zeros(2, 3);
        assert_eq!(bigru_layer(&x, &z, &z).unwrap(), Matrix::zeros(4, 3));
        let (f, b) = (GruParams::random(2, 3, 0.8, &mut rng(3)), GruParams::random(2, 3, 0.8, &mut rng(4)));
        let one = bigru_layer(&x.slice_rows(0, 1), &f, &b).unwrap();
        let fs = gru_cell_step(x.row(0), &[0.0; 3], &f).unwrap();
        let bs = gru_cell_step(x.row(0), &[0.0; 3], &b).unwrap();
        let expect: Vec<f64> = fs.iter().zip(&bs).map(|(a, c)| a + c).collect();
        assert_eq!(one.row(0), expect.as_slice());
        assert_eq!(bigru_layer(&Matrix::zeros(0, 2), &f, &b).unwrap().rows(), 0);
    }

    #[test]
    fn bigru_reversal_symmetry() {
        let x = Matrix::uniform(6, 2, 1.0, &mut rng(5));
        let (f, b) = (GruParams::random(2, 3, 0.8, &mut rng(6)), GruParams::random(2, 3, 0.8, &mut rng(7)));
        let rev = |m: &Matrix| {
            let rows: Vec<Vec<f64>> = (0..m.rows()).rev().map(|i| m.row(i).to_vec()).collect();
            Matrix::from_rows(&rows)
        };
        let a = bigru_layer(&x, &f, &b).unwrap();
        let c = rev(&bigru_layer(&rev(&x), &b, &f).unwrap());
        for (u, v) in a.data().iter().zip(c.data()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn graph_cell_matches_plain_cell() {
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "c", 3, 4, &mut rng(8));
        let plain = cell.to_plain(&store);
        let x = Matrix::uniform(5, 3, 1.0, &mut rng(9));
        let mut g = Graph::new(&store);
        let xv = g.leaf(x.clone());
        let out = cell.run(&mut g, xv, true);
        let expect = gru_run(&x, &plain, true).unwrap();
        for (a, b) in g.value(out).data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-13);
        }
        let mut other = ParamStore::new();
        let cell2 = GruCell::new(&mut other, "c", 3, 4, &mut rng(10));
        cell2.load_plain(&mut other, &plain).unwrap();
        assert_eq!(other.by_name("c.w_ih"), store.by_name("c.w_ih"));
        assert_eq!(other.by_name("c.b_hh"), store.by_name("c.b_hh"));
    }

    fn encoder_cfg(layers: usize, window: usize, pyramid: bool) -> ModelConfig {
        let mut c = ModelConfig::gru(AttentionKind::Bahdanau, layers, 2, 12);
        c.window = window;
        c.pyramid = pyramid;
        c
    }

    #[test]
    fn encoder_lengths() {
        let ids: Vec<usize> = (0..8).map(|i| 4 + i % 8).collect();
        for (n, pyr, len) in [(3, true, 2), (3, false, 8), (1, true, 8), (1, false, 8)] {
            let cfg = encoder_cfg(n, 2, pyr);
            let mut store = ParamStore::new();
            GruEncoder::new(&mut store, &cfg, &mut rng(0));
            assert_eq!(gru_encode(&ids, &cfg, &store).unwrap().memory.rows(), len);
        }
        let cfg = encoder_cfg(2, 2, true);
        let store = ParamStore::new();
        assert!(gru_encode(&ids, &cfg, &store).is_err());
        assert!(gru_encode(&[], &cfg, &store).is_err());
    }

    #[test]
    fn graph_encoder_matches_plain_encoder() {
        let cfg = encoder_cfg(3, 3, true);
        let mut store = ParamStore::new();
        let enc = GruEncoder::new(&mut store, &cfg, &mut rng(11));
        let ids = [4, 5, 6, 7, 8, 9, 10, 4];
        let mut g = Graph::new(&store);
        let m = enc.forward(&mut g, &ids);
        let plain = gru_encode(&ids, &cfg, &store).unwrap();
        assert_eq!(g.shape(m), plain.memory.shape());
        for (a, b) in g.value(m).data().iter().zip(plain.memory.data()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_eq!(plain.finals.len(), 3);
    }

    fn decoder_fixture(kind: AttentionKind, d: usize, v: usize) -> (ParamStore, GruEncoder, GruDecoder, ModelConfig) {
        let mut cfg = ModelConfig::gru(kind, 2, d, v);
        cfg.local_sigma = Some(1.0);
        let mut store = ParamStore::new();
        let mut r = rng(12);
        let enc = GruEncoder::new(&mut store, &cfg, &mut r);
        let dec = GruDecoder::new(&mut store, &cfg, &mut r).unwrap();
        (store, enc, dec, cfg)
    }

    #[test]
    fn decode_step_is_a_deterministic_distribution() {
        let (store, enc, dec, _) = decoder_fixture(AttentionKind::Bahdanau, 4, 9);
        let memory = enc.encode_plain(&store, &[4, 5, 6]).unwrap().memory;
        let s0 = DecoderState {
            hidden: vec![Matrix::zeros(1, 4); 2],
        };
        let (l1, s1) = gru_decode_step(1, &s0, &memory, &dec, &store).unwrap();
        let (l2, s2) = gru_decode_step(1, &s0, &memory, &dec, &store).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(s1, s2);
        assert_eq!(l1.len(), 9);
        assert!((softmax(&l1).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(gru_decode_step(99, &s0, &memory, &dec, &store).is_err());
    }

    #[test]
    fn zero_params_give_uniform_distribution() {
        let (mut store, enc, dec, _) = decoder_fixture(AttentionKind::LuongGeneral, 4, 7);
        let ids: Vec<ParamId> = store.iter().map(|(id, _)| id).collect();
        for id in ids {
            store.value_mut(id).scale_assign(0.0);
        }
        let memory = enc.encode_plain(&store, &[4, 5]).unwrap().memory;
        let s0 = DecoderState {
            hidden: vec![Matrix::zeros(1, 4); 2],
        };
        let (l, _) = gru_decode_step(2, &s0, &memory, &dec, &store).unwrap();
        for p in softmax(&l) {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn teacher_forced_logits_match_stepwise_logits() {
        let (store, enc, dec, _) = decoder_fixture(AttentionKind::LuongConcat, 4, 9);
        let mut g = Graph::new(&store);
        let m = enc.forward(&mut g, &[4, 5, 6, 7, 8]);
        let inputs = [1, 5, 6, 7];
        let all = dec.forward_teacher(&mut g, m, &inputs);
        let mut state = dec.initial_state(&mut g);
        for (t, &y) in inputs.iter().enumerate() {
            let (l, next) = dec.step(&mut g, m, y, &state);
            state = next;
            for (a, b) in g.value(l).data().iter().zip(g.value(all).row(t)) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cell_and_bigru_pass_grad_check() {
        let mut store = ParamStore::new();
        let mut r = rng(13);
        let f = GruCell::new(&mut store, "f", 3, 4, &mut r);
        let b = GruCell::new(&mut store, "b", 3, 4, &mut r);
        let x = Matrix::uniform(4, 3, 1.0, &mut r);
        let h = Matrix::uniform(1, 4, 1.0, &mut r);
        let mut single = GraphModule::new(store.clone(), vec![x.slice_rows(0, 1), h], move |g, v| {
            let gx = f.input_proj(g, v[0]);
            f.step(g, gx, v[1])
        });
        assert!(grad_check(&mut single, 1e-5, 1e-4).passed());
        let layer = BiGru { fwd: f, bwd: b, pyramid: None };
        let mut bi = GraphModule::new(store, vec![x], move |g, v| layer.forward(g, v[0]));
        let rep = grad_check(&mut bi, 1e-5, 1e-4);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn encoder_decoder_step_passes_grad_check() {
        let (store, enc, dec, _) = decoder_fixture(AttentionKind::Bahdanau, 4, 8);
        let mut m = GraphModule::new(store, Vec::new(), move |g, _| {
            let mem = enc.forward(g, &[4, 5, 6, 7, 3]);
            let logits = dec.forward_teacher(g, mem, &[1, 6]);
            g.cross_entropy(logits, &[6, 2])
        });
        let rep = crate::seqcore::gradcheck::grad_check_sampled(&mut m, 1e-5, 1e-4, Some(12));
        assert!(rep.passed(), "{rep:?}");
    }

    proptest! {
        #[test]
        fn memory_length_matches_output_length(t in 1usize..60, n in 1usize..5, w in 2usize..5, pyr: bool) {
            let cfg = encoder_cfg(n, w, pyr);
            let mut store = ParamStore::new();
            GruEncoder::new(&mut store, &cfg, &mut rng(1));
            let ids: Vec<usize> = (0..t).map(|i| i % 12).collect();
            let mem = gru_encode(&ids, &cfg, &store).unwrap().memory;
            let expect = if pyr { output_length(t, n, w) } else { t };
            prop_assert_eq!(mem.rows(), expect);
        }
    }
}
