//! Parameterized building blocks shared by the GRU and Transformer models.
//!
//! Weights use the row-vector convention `y = x W + b`, so a map from
//! `d_in` to `d_out` stores `W` as a `d_in x d_out` matrix.

use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{Init, ParamId, ParamStore};

#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let init = Init::Uniform { fan_in: d_in };
        let weight = store.add(format!("{name}.weight"), d_in, d_out, init, rng);
        let bias = bias.then(|| store.add(format!("{name}.bias"), 1, d_out, init, rng));
        Linear {
            weight,
            bias,
            d_in,
            d_out,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.weight);
        let y = g.matmul(x, w);
        match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add(y, b)
            }
            None => y,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab_size: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        vocab_size: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let table = store.add(
            format!("{name}.table"),
            vocab_size,
            dim,
            Init::Uniform { fan_in: dim },
            rng,
        );
        Embedding {
            table,
            vocab_size,
            dim,
        }
    }

    /// Caller guarantees `ids` are below `vocab_size`.
    pub fn forward(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let t = g.param(self.table);
        g.gather(t, ids)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, dim: usize, rng: &mut R) -> Self {
        LayerNorm {
            gain: store.add(format!("{name}.gain"), 1, dim, Init::Ones, rng),
            bias: store.add(format!("{name}.bias"), 1, dim, Init::Zeros, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let (gain, bias) = (g.param(self.gain), g.param(self.bias));
        g.layer_norm(x, gain, bias, Self::EPS)
    }
}

/// Learned contraction of `window` adjacent positions into one.
#[derive(Clone, Copy, Debug)]
pub struct Pyramid {
    pub proj: Linear,
    pub window: usize,
    pub dim: usize,
}

impl Pyramid {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        window: usize,
        rng: &mut R,
    ) -> Self {
        Pyramid {
            proj: Linear::new(store, name, window * dim, dim, true, rng),
            window,
            dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, h: Var) -> Var {
        let grouped = group_windows(g, h, self.window);
        let pre = self.proj.forward(g, grouped);
        g.tanh(pre)
    }
}

/// Zero-pads `x` (`T x d`) to a multiple of `window` rows and regroups it as
/// `ceil(T / window) x (window * d)`, each row the concatenation of one
/// window in time order.
pub fn group_windows(g: &mut Graph, x: Var, window: usize) -> Var {
    let (t, d) = g.shape(x);
    let out_len = t.div_ceil(window);
    let padded = g.pad_rows(x, out_len * window - t);
    g.reshape(padded, out_len, window * d)
}
