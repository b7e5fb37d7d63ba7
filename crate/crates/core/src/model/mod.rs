//! Encoder-decoder assembly for both model families.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codetok::{EOS, SOS};
use crate::decode::{log_softmax, StepModel};
use crate::error::{Error, Result};
use crate::rnn::{GruDecoder, GruEncoder};
use crate::seqcore::{Checkpoint, Family, Graph, Matrix, ModelConfig, ParamStore, Var};
use crate::xformer::{TransformerDecoder, TransformerEncoder};

#[derive(Clone, Debug)]
pub enum Encoder {
    Gru(GruEncoder),
    Transformer(TransformerEncoder),
}

#[derive(Clone, Debug)]
pub enum Decoder {
    Gru(GruDecoder),
    Transformer(TransformerDecoder),
}

#[derive(Clone, Debug)]
pub struct Seq2Seq {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub encoder: Encoder,
    pub decoder: Decoder,
}

impl Seq2Seq {
    /// Fresh model. Parameters are created encoder first, so two models
    /// with equal encoder configs and seeds share encoder weights.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let (encoder, decoder) = match config.family {
            Family::Gru => {
                let e = GruEncoder::new(&mut params, &config, &mut rng);
                let d = GruDecoder::new(&mut params, &config, &mut rng)?;
                (Encoder::Gru(e), Decoder::Gru(d))
            }
            Family::Transformer => {
                let e = TransformerEncoder::new(&mut params, &config, &mut rng);
                let d = TransformerDecoder::new(&mut params, &config, &mut rng);
                (Encoder::Transformer(e), Decoder::Transformer(d))
            }
        };
        Ok(Seq2Seq {
            config,
            params,
            encoder,
            decoder,
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut m = Self::new(ck.config.clone(), 0)?;
        ck.restore_into(&mut m.params)?;
        Ok(m)
    }

    pub fn to_checkpoint(&self, vocab_hash: &str) -> Checkpoint {
        Checkpoint::from_params(self.config.clone(), vocab_hash, &self.params)
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&i| i >= self.config.vocab_size) {
            Some(&id) => Err(Error::IdOutOfRange {
                id,
                size: self.config.vocab_size,
            }),
            None => Ok(()),
        }
    }

    /// Encoder memory for one source sequence.
    pub fn encode(&self, g: &mut Graph, source: &[usize]) -> Result<Var> {
        if source.is_empty() {
            return Err(Error::Empty("source sequence"));
        }
        self.check_ids(source)?;
        match &self.encoder {
            Encoder::Gru(e) => Ok(e.forward(g, source)),
            Encoder::Transformer(e) => e.forward(g, source),
        }
    }

    /// Encoder memory without recording a tape.
    pub fn memory(&self, source: &[usize]) -> Result<Matrix> {
        if let Encoder::Gru(e) = &self.encoder {
            if source.is_empty() {
                return Err(Error::Empty("source sequence"));
            }
            self.check_ids(source)?;
            return Ok(e.encode_plain(&self.params, source)?.memory);
        }
        let mut g = Graph::new(&self.params);
        let m = self.encode(&mut g, source)?;
        Ok(g.value(m).clone())
    }

    /// Logits for every decoder input position under teacher forcing.
    pub fn decoder_logits(&self, g: &mut Graph, memory: Var, inputs: &[usize]) -> Result<Var> {
        self.check_ids(inputs)?;
        match &self.decoder {
            Decoder::Gru(d) => Ok(d.forward_teacher(g, memory, inputs)),
            Decoder::Transformer(d) => d.forward(g, memory, inputs),
        }
    }

    /// Decoder output at the first step (input SOS), before the vocabulary
    /// projection: `[context, state]` for GRU, the last layer output for
    /// the Transformer.
    pub fn first_step_features(&self, g: &mut Graph, memory: Var) -> Result<Var> {
        let sos = SOS as usize;
        match &self.decoder {
            Decoder::Gru(d) => {
                let init = d.initial_state(g);
                let (top, _) = d.advance(g, sos, &init);
                Ok(d.features(g, top, memory).0)
            }
            Decoder::Transformer(d) => d.hidden(g, memory, &[sos]),
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self.config.family {
            Family::Gru => 2 * self.config.d_model,
            Family::Transformer => self.config.d_model,
        }
    }

    /// Summed token cross-entropy of `target + EOS` given `source`, and the
    /// number of predicted tokens. With `teacher_forcing < 1` each decoder
    /// input after SOS is replaced, with probability `1 - teacher_forcing`,
    /// by the model's own argmax prediction.
    pub fn example_loss<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        source: &[usize],
        target: &[usize],
        teacher_forcing: f64,
        rng: &mut R,
    ) -> Result<(Var, usize)> {
        let mut inputs = Vec::with_capacity(target.len() + 1);
        inputs.push(SOS as usize);
        inputs.extend_from_slice(target);
        let mut gold = target.to_vec();
        gold.push(EOS as usize);
        self.check_ids(&inputs)?;
        let memory = self.encode(g, source)?;
        let logits = if teacher_forcing >= 1.0 {
            self.decoder_logits(g, memory, &inputs)?
        } else {
            self.scheduled_logits(g, memory, &inputs, teacher_forcing, rng)?
        };
        Ok((g.cross_entropy(logits, &gold), gold.len()))
    }

    fn scheduled_logits<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        memory: Var,
        gold_inputs: &[usize],
        ratio: f64,
        rng: &mut R,
    ) -> Result<Var> {
        let argmax = |m: &Matrix, r: usize| m.argmax_row(r);
        match &self.decoder {
            Decoder::Gru(d) => {
                let mut state = d.initial_state(g);
                let mut prev = gold_inputs[0];
                let mut rows = Vec::with_capacity(gold_inputs.len());
                for t in 0..gold_inputs.len() {
                    if t > 0 {
                        let own = argmax(g.value(rows[t - 1]), 0);
                        prev = if rng.gen::<f64>() < ratio { gold_inputs[t] } else { own };
                    }
                    let (l, next) = d.step(g, memory, prev, &state);
                    state = next;
                    rows.push(l);
                }
                Ok(g.concat_rows(&rows))
            }
            Decoder::Transformer(d) => {
                // first pass picks the model's own tokens, second pass trains
                let first = d.forward(g, memory, gold_inputs)?;
                let preds = g.value(first).clone();
                let mixed: Vec<usize> = (0..gold_inputs.len())
                    .map(|t| {
                        if t == 0 || rng.gen::<f64>() < ratio {
                            gold_inputs[t]
                        } else {
                            argmax(&preds, t - 1)
                        }
                    })
                    .collect();
                d.forward(g, memory, &mixed)
            }
        }
    }

    /// Mean token cross-entropy under full teacher forcing.
    pub fn eval_loss(&self, pairs: &[(&[usize], &[usize])]) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (mut total, mut count) = (0.0, 0);
        for (s, t) in pairs {
            let mut g = Graph::new(&self.params);
            let (l, n) = self.example_loss(&mut g, s, t, 1.0, &mut rng)?;
            total += g.scalar(l);
            count += n;
        }
        if count == 0 {
            return Err(Error::Empty("evaluation set"));
        }
        Ok(total / count as f64)
    }
}

/// Decoding state: the encoder memory plus, for GRU, per-layer states.
#[derive(Clone, Debug)]
pub struct DecodeState {
    memory: Arc<Matrix>,
    hidden: Vec<Matrix>,
}

impl StepModel for Seq2Seq {
    type State = DecodeState;

    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn init(&self, source: &[usize]) -> Result<DecodeState> {
        let memory = Arc::new(self.memory(source)?);
        let hidden = match &self.decoder {
            Decoder::Gru(d) => vec![Matrix::zeros(1, d.dim); d.layers.len()],
            Decoder::Transformer(_) => Vec::new(),
        };
        Ok(DecodeState { memory, hidden })
    }

    fn step(&self, state: &DecodeState, prefix: &[usize]) -> Result<(Vec<f64>, DecodeState)> {
        self.check_ids(prefix)?;
        let mut g = Graph::new(&self.params);
        let m = g.leaf((*state.memory).clone());
        match &self.decoder {
            Decoder::Gru(d) => {
                let hs: Vec<Var> = state.hidden.iter().map(|h| g.leaf(h.clone())).collect();
                let last = *prefix.last().ok_or(Error::Empty("decoder prefix"))?;
                let (l, next) = d.step(&mut g, m, last, &hs);
                let lp = log_softmax(g.value(l).data());
                let hidden = next.iter().map(|&v| g.value(v).clone()).collect();
                Ok((
                    lp,
                    DecodeState {
                        memory: Arc::clone(&state.memory),
                        hidden,
                    },
                ))
            }
            Decoder::Transformer(d) => {
                let l = d.forward(&mut g, m, prefix)?;
                let v = g.value(l);
                Ok((log_softmax(v.row(v.rows() - 1)), state.clone()))
            }
        }
    }
}
