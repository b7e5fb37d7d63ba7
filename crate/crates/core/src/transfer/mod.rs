//! Reusing a trained repair encoder for fault classification.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codetok::Vocabulary;
use crate::error::{Error, Result};
use crate::harness::TrainConfig;
use crate::model::Seq2Seq;
use crate::seqcore::layers::Linear;
use crate::seqcore::{Adam, Checkpoint, Graph, Init, Matrix, ModelConfig, ParamStore};

/// New embedding table for `new_vocab`: rows of tokens known to `old_vocab`
/// are copied unchanged, the rest are sampled from `U(-1/sqrt(d), 1/sqrt(d))`.
pub fn expand_embedding<R: Rng + ?Sized>(
    old: &Matrix,
    old_vocab: &Vocabulary,
    new_vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Matrix> {
    if old.rows() != old_vocab.len() {
        return Err(Error::shape(
            "expand_embedding",
            format!("table has {} rows for {} tokens", old.rows(), old_vocab.len()),
        ));
    }
    let d = old.cols();
    let mut out = Init::Uniform { fan_in: d }.sample(new_vocab.len(), d, rng);
    for (new_id, tok) in new_vocab.tokens().iter().enumerate() {
        if let Some(old_id) = old_vocab.lookup(tok) {
            out.row_mut(new_id).copy_from_slice(old.row(old_id as usize));
        }
    }
    Ok(out)
}

/// Like [`expand_embedding`] but with an explicit width check.
pub fn expand_embedding_to<R: Rng + ?Sized>(
    old: &Matrix,
    d_model: usize,
    old_vocab: &Vocabulary,
    new_vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Matrix> {
    if old.cols() != d_model {
        return Err(Error::shape(
            "expand_embedding",
            format!("table width {} but d_model {d_model}", old.cols()),
        ));
    }
    expand_embedding(old, old_vocab, new_vocab, rng)
}

/// SHA-256 over the names and bit patterns of tensors under `prefix`.
pub fn params_hash(params: &ParamStore, prefix: &str) -> String {
    let mut h = Sha256::new();
    for (_, p) in params.iter().filter(|(_, p)| p.name.starts_with(prefix)) {
        h.update(p.name.as_bytes());
        for v in p.value.data() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn matrix_hash(m: &Matrix) -> String {
    let mut h = Sha256::new();
    for v in m.data() {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Re-samples every tensor of the last encoder layer (its input pyramid
/// included). Returns the number of tensors touched.
pub fn reinit_last_encoder_layer(params: &mut ParamStore, encoder_layers: usize, seed: u64) -> Result<usize> {
    if encoder_layers == 0 {
        return Err(Error::Config("encoder has no layers".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prefix = format!("enc.layer{}.", encoder_layers - 1);
    let n = params.reinit_prefix(&prefix, &mut rng);
    if encoder_layers == 1 {
        return Ok(n + params.reinit_prefix("enc.embed.", &mut rng));
    }
    Ok(n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub n_class: usize,
    /// Encoder layer indices (0-based) kept fixed during training.
    pub frozen: Vec<usize>,
    pub reinit_last: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            n_class: 2,
            frozen: Vec::new(),
            reinit_last: true,
        }
    }
}

/// Encoder, fresh decoder and a linear head over the decoder's first-step
/// output.
#[derive(Clone, Debug)]
pub struct Classifier {
    pub model: Seq2Seq,
    pub head: Linear,
    pub n_class: usize,
}

impl Classifier {
    /// Fresh classifier; with `pretrained`, encoder tensors are copied from
    /// it and the last layer is re-initialized when `cfg.reinit_last`.
    pub fn new(config: &ModelConfig, cfg: &ClassifierConfig, pretrained: Option<&Seq2Seq>, seed: u64) -> Result<Self> {
        if cfg.n_class < 2 {
            return Err(Error::Config("n_class must be >= 2".into()));
        }
        let mut model = Seq2Seq::new(config.clone(), seed)?;
        if let Some(p) = pretrained {
            if p.config.encoder_layers != config.encoder_layers || p.config.d_model != config.d_model {
                return Err(Error::Config("pretrained encoder shape differs from the classifier config".into()));
            }
            model.params.copy_matching(&p.params, |n| !n.starts_with("enc."));
            if cfg.reinit_last {
                reinit_last_encoder_layer(&mut model.params, config.encoder_layers, seed ^ 0x5eed)?;
            }
        }
        for &l in &cfg.frozen {
            model.params.set_frozen_prefix(&format!("enc.layer{l}."), true);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let width = model.feature_dim();
        let head = Linear::new(&mut model.params, "cls.head", width, cfg.n_class, true, &mut rng);
        Ok(Classifier {
            model,
            head,
            n_class: cfg.n_class,
        })
    }

    pub fn logits_var(&self, g: &mut Graph, source: &[usize]) -> Result<crate::seqcore::Var> {
        let mem = self.model.encode(g, source)?;
        let f = self.model.first_step_features(g, mem)?;
        Ok(self.head.forward(g, f))
    }

    /// Class logits for one source.
    pub fn classify(&self, source: &[usize]) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.model.params);
        let l = self.logits_var(&mut g, source)?;
        Ok(g.value(l).data().to_vec())
    }

    pub fn predict(&self, source: &[usize]) -> Result<usize> {
        let l = self.classify(source)?;
        Ok((0..l.len()).fold(0, |b, i| if l[i] > l[b] { i } else { b }))
    }

    pub fn accuracy(&self, data: &[(Vec<usize>, usize)]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("labeled set"));
        }
        let mut hit = 0;
        for (s, y) in data {
            hit += usize::from(self.predict(s)? == *y);
        }
        Ok(hit as f64 / data.len() as f64)
    }

    pub fn to_checkpoint(&self, vocab_hash: &str) -> Checkpoint {
        let mut ck = self.model.to_checkpoint(vocab_hash);
        ck.metadata = serde_json::json!({ "n_class": self.n_class });
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let n_class = ck
            .metadata
            .get("n_class")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CheckpointCorrupt("classifier checkpoint without n_class".into()))?;
        let cfg = ClassifierConfig {
            n_class: n_class as usize,
            ..Default::default()
        };
        let mut c = Classifier::new(&ck.config, &cfg, None, 0)?;
        ck.restore_into(&mut c.model.params)?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifierEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifierReport {
    pub log: Vec<ClassifierEpoch>,
    pub final_accuracy: Option<f64>,
    pub warnings: Vec<String>,
}

/// Mean cross-entropy training of the whole classifier with ADAM.
pub fn train_classifier(
    clf: &mut Classifier,
    train: &[(Vec<usize>, usize)],
    val: &[(Vec<usize>, usize)],
    cfg: &TrainConfig,
) -> Result<ClassifierReport> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if let Some((_, y)) = train.iter().chain(val).find(|(_, y)| *y >= clf.n_class) {
        return Err(Error::Config(format!("label {y} outside {} classes", clf.n_class)));
    }
    let mut warnings = Vec::new();
    if train.iter().all(|(_, y)| *y == train[0].1) {
        warnings.push("training set has a single class".to_string());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.adam());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut g = Graph::new(&clf.model.params);
            let mut losses = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let (s, y) = &train[i];
                let l = clf.logits_var(&mut g, s)?;
                losses.push(g.cross_entropy(l, &[*y]));
            }
            let stacked = g.concat_rows(&losses);
            let sum = g.sum(stacked);
            let loss = g.scale(sum, 1.0 / chunk.len() as f64);
            let value = g.scalar(loss);
            if !value.is_finite() {
                return Err(Error::Diverged { epoch, loss: value });
            }
            let mut grads = g.backward(loss).into_params();
            drop(g);
            grads.clip_global_norm(cfg.clip_norm);
            opt.update(&mut clf.model.params, &grads);
            total += value * chunk.len() as f64;
        }
        let val_accuracy = if val.is_empty() { None } else { Some(clf.accuracy(val)?) };
        log.push(ClassifierEpoch {
            epoch,
            train_loss: total / train.len() as f64,
            val_accuracy,
        });
    }
    Ok(ClassifierReport {
        final_accuracy: log.last().and_then(|e| e.val_accuracy),
        log,
        warnings,
    })
}

/// One class name per line; line number is the class id.
pub fn load_class_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let classes: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    if classes.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "class list needs at least two classes".into(),
        });
    }
    Ok(classes)
}

pub fn save_class_list(path: &Path, classes: &[String]) -> Result<()> {
    fs::write(path, classes.iter().map(|c| format!("{c}\n")).collect::<String>())?;
    Ok(())
}

/// Sorted distinct labels of a corpus.
pub fn classes_of<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let set: std::collections::BTreeSet<&str> = labels.into_iter().collect();
    set.into_iter().map(String::from).collect()
}
