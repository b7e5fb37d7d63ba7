//! Shared neural primitives: dense matrices, the autodiff tape, parameter
//! storage and optimization, embeddings, the pyramid contraction module,
//! checkpoints and finite-difference gradient checking.

pub mod checkpoint;
pub mod config;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod matrix;
pub mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Dtype};
pub use config::{AttentionKind, Family, ModelConfig, ResidualMode};
pub use gradcheck::{grad_check, Differentiable, GradCheckReport, GraphModule};
pub use graph::{Grads, Graph, Var};
pub use matrix::Matrix;
pub use params::{Adam, AdamConfig, Gradients, Init, ParamId, ParamStore};

use crate::error::{Error, Result};

/// A sequence of hidden vectors, one row per time step.
pub type HiddenSeq = Matrix;

/// Plain-value pyramid parameters. `w_pyr` is `(window * d) x d` in the
/// row-vector convention.
#[derive(Clone, Debug, PartialEq)]
pub struct PyramidParams {
    pub w_pyr: Matrix,
    pub b_pyr: Matrix,
    pub window: usize,
}

impl PyramidParams {
    pub fn zeros(d_model: usize, window: usize) -> Self {
        PyramidParams {
            w_pyr: Matrix::zeros(window * d_model, d_model),
            b_pyr: Matrix::zeros(1, d_model),
            window,
        }
    }
}

/// Row lookup of `ids` in an embedding table.
pub fn embed(ids: &[usize], embedding: &Matrix) -> Result<HiddenSeq> {
    let v = embedding.rows();
    let mut out = Matrix::zeros(ids.len(), embedding.cols());
    for (i, &id) in ids.iter().enumerate() {
        if id >= v {
            return Err(Error::IdOutOfRange { id, size: v });
        }
        out.row_mut(i).copy_from_slice(embedding.row(id));
    }
    Ok(out)
}

/// `out_t = tanh(W_pyr * concat(h_{wt}, .., h_{wt + w - 1}) + b_pyr)`, with
/// the final partial window zero-padded.
pub fn pyramid_contract(h: &HiddenSeq, p: &PyramidParams) -> Result<HiddenSeq> {
    let (t, d) = h.shape();
    let w = p.window;
    if w < 2 {
        return Err(Error::Config(format!("window must be >= 2, got {w}")));
    }
    if p.w_pyr.shape() != (w * d, d) || p.b_pyr.shape() != (1, d) {
        return Err(Error::shape(
            "pyramid_contract",
            format!(
                "W_pyr {:?} / b_pyr {:?} do not fit width {d} and window {w}",
                p.w_pyr.shape(),
                p.b_pyr.shape()
            ),
        ));
    }
    let out_len = t.div_ceil(w);
    let mut grouped = Matrix::zeros(out_len, w * d);
    for s in 0..t {
        let (o, k) = (s / w, s % w);
        grouped.row_mut(o)[k * d..(k + 1) * d].copy_from_slice(h.row(s));
    }
    let mut out = grouped.matmul(&p.w_pyr);
    for r in 0..out_len {
        for (v, b) in out.row_mut(r).iter_mut().zip(p.b_pyr.data()) {
            *v = (*v + b).tanh();
        }
    }
    Ok(out)
}

/// Encoder output length after `layers - 1` contractions by `window`.
pub fn output_length(len: usize, layers: usize, window: usize) -> usize {
    let mut t = len;
    for _ in 1..layers {
        t = t.div_ceil(window);
    }
    t
}
