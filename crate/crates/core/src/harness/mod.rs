//! Training loop, repair-rate and efficiency metrics, benchmarks.

pub mod alloc;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CodePair;
use crate::decode::{beam_search, BeamConfig, Candidate};
use crate::error::{Error, Result};
use crate::model::Seq2Seq;
use crate::seqcore::{Adam, AdamConfig, Graph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub teacher_forcing_ratio: f64,
    /// Global gradient-norm clip; 0 disables.
    pub clip_norm: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            lr: 1e-3,
            lr_decay: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            teacher_forcing_ratio: 1.0,
            clip_norm: 5.0,
            seed: 0,
            patience: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.teacher_forcing_ratio) {
            return Err(Error::Config("teacher_forcing_ratio must be in [0, 1]".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be > 0".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("lr_decay must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub words_per_sec: f64,
    pub wall_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchTiming {
    pub words: usize,
    pub seconds: f64,
}

/// Source plus target tokens per second over `batches`, skipping the
/// first `warmup` of them.
pub fn throughput(batches: &[BatchTiming], warmup: usize) -> Result<f64> {
    let used = batches.get(warmup..).unwrap_or(&[]);
    if used.is_empty() {
        return Err(Error::Empty("timed batches"));
    }
    let words: usize = used.iter().map(|b| b.words).sum();
    let secs: f64 = used.iter().map(|b| b.seconds).sum();
    if secs <= 0.0 {
        return Err(Error::Config("zero elapsed time".into()));
    }
    Ok(words as f64 / secs)
}

/// Mutable training state; lets callers run epochs one at a time.
pub struct Trainer {
    pub config: TrainConfig,
    pub optimizer: Adam,
    pub epoch: usize,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Trainer {
            optimizer: Adam::new(config.adam()),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            epoch: 0,
        })
    }

    /// Continues counting from `epoch` (optimizer moments start fresh).
    pub fn resume_at(mut self, epoch: usize) -> Self {
        self.epoch = epoch;
        self.optimizer.config.lr = self.config.lr * self.config.lr_decay.powi(epoch as i32);
        for _ in 0..epoch {
            let _ = rand::Rng::gen::<u64>(&mut self.rng);
        }
        self
    }

    /// One pass over `train` in shuffled batches. Each batch builds one tape
    /// whose loss is the mean token cross-entropy of the batch.
    pub fn run_epoch(&mut self, model: &mut Seq2Seq, train: &[CodePair], val: &[CodePair]) -> Result<EpochLog> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        self.epoch += 1;
        let start = Instant::now();
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(rand::Rng::gen(&mut self.rng));
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut tok_sum) = (0.0, 0usize);
        let mut timings = Vec::new();
        for chunk in order.chunks(self.config.batch_size) {
            let t0 = Instant::now();
            let mut g = Graph::new(&model.params);
            let mut losses = Vec::with_capacity(chunk.len());
            let (mut tokens, mut words) = (0, 0);
            for &i in chunk {
                let p = &train[i];
                let src = ids(&p.source_tokens);
                let tgt = ids(&p.targets[0]);
                let (l, n) = model.example_loss(&mut g, &src, &tgt, self.config.teacher_forcing_ratio, &mut shuffle_rng)?;
                losses.push(l);
                tokens += n;
                words += src.len() + tgt.len();
            }
            let stacked = g.concat_rows(&losses);
            let total = g.sum(stacked);
            let loss = g.scale(total, 1.0 / tokens as f64);
            let value = g.scalar(loss);
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch: self.epoch,
                    loss: value,
                });
            }
            let mut grads = g.backward(loss).into_params();
            drop(g);
            grads.clip_global_norm(self.config.clip_norm);
            self.optimizer.update(&mut model.params, &grads);
            loss_sum += value * tokens as f64;
            tok_sum += tokens;
            timings.push(BatchTiming {
                words,
                seconds: t0.elapsed().as_secs_f64(),
            });
        }
        self.optimizer.config.lr *= self.config.lr_decay;
        let warmup = usize::from(timings.len() > 1);
        let val_loss = if val.is_empty() {
            None
        } else {
            Some(model.eval_loss(&pair_refs(val).iter().map(|(s, t)| (s.as_slice(), t.as_slice())).collect::<Vec<_>>())?)
        };
        Ok(EpochLog {
            epoch: self.epoch,
            train_loss: loss_sum / tok_sum as f64,
            val_loss,
            words_per_sec: throughput(&timings, warmup).unwrap_or(0.0),
            wall_s: start.elapsed().as_secs_f64(),
        })
    }
}

fn ids(t: &[u32]) -> Vec<usize> {
    t.iter().map(|&i| i as usize).collect()
}

fn pair_refs(pairs: &[CodePair]) -> Vec<(Vec<usize>, Vec<usize>)> {
    pairs
        .iter()
        .map(|p| (ids(&p.source_tokens), ids(&p.targets[0])))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub log: Vec<EpochLog>,
    /// Epoch with the lowest validation (or training) loss.
    pub converge_epoch: usize,
    pub stopped_early: bool,
}

/// Trains for `cfg.epochs` epochs or until the validation loss (training
/// loss without a validation set) has not improved for `cfg.patience`
/// epochs. `on_epoch` may end training early by returning `true`.
pub fn train(
    model: &mut Seq2Seq,
    train_pairs: &[CodePair],
    val_pairs: &[CodePair],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog, &Seq2Seq) -> bool,
) -> Result<TrainReport> {
    let mut trainer = Trainer::new(cfg.clone())?;
    train_with(&mut trainer, model, train_pairs, val_pairs, &mut on_epoch)
}

pub fn train_with(
    trainer: &mut Trainer,
    model: &mut Seq2Seq,
    train_pairs: &[CodePair],
    val_pairs: &[CodePair],
    on_epoch: &mut dyn FnMut(&EpochLog, &Seq2Seq) -> bool,
) -> Result<TrainReport> {
    let mut log = Vec::new();
    let (mut best, mut best_epoch, mut stale) = (f64::INFINITY, trainer.epoch, 0);
    let mut stopped_early = false;
    while trainer.epoch < trainer.config.epochs {
        let e = trainer.run_epoch(model, train_pairs, val_pairs)?;
        let monitored = e.val_loss.unwrap_or(e.train_loss);
        if monitored < best {
            best = monitored;
            best_epoch = e.epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        let stop = on_epoch(&e, model);
        log.push(e);
        if stop || (trainer.config.patience > 0 && stale >= trainer.config.patience) {
            stopped_early = trainer.epoch < trainer.config.epochs;
            break;
        }
    }
    Ok(TrainReport {
        log,
        converge_epoch: best_epoch,
        stopped_early,
    })
}

pub fn write_run_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for e in log {
        serde_json::to_writer(&mut f, e)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// Fraction of instances with an exact reference among their first
/// `n_candidates` candidates.
pub fn repair_rate(candidates: &[Vec<Vec<usize>>], references: &[Vec<Vec<usize>>], n_candidates: usize) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    if candidates.len() != references.len() {
        return Err(Error::shape("repair_rate", "candidate and reference counts differ"));
    }
    let hits = candidates
        .iter()
        .zip(references)
        .filter(|(c, r)| repaired(c, r, n_candidates))
        .count();
    Ok(hits as f64 / candidates.len() as f64)
}

pub fn repaired(candidates: &[Vec<usize>], references: &[Vec<usize>], n: usize) -> bool {
    candidates.iter().take(n).any(|c| references.contains(c))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthBucket {
    pub start: usize,
    pub end: usize,
    pub rate: f64,
    pub count: usize,
}

/// Per-bucket repair rates over `[k*w, (k+1)*w)` source lengths; empty
/// buckets are omitted.
pub fn length_analysis(results: &[(usize, bool)], bucket_width: usize) -> Result<Vec<LengthBucket>> {
    if bucket_width == 0 {
        return Err(Error::Config("bucket width must be >= 1".into()));
    }
    let mut buckets: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
    for &(len, ok) in results {
        let e = buckets.entry(len / bucket_width).or_default();
        e.0 += usize::from(ok);
        e.1 += 1;
    }
    Ok(buckets
        .into_iter()
        .map(|(k, (hit, n))| LengthBucket {
            start: k * bucket_width,
            end: (k + 1) * bucket_width,
            rate: hit as f64 / n as f64,
            count: n,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryFit {
    /// Memory per instance (slope).
    pub k: f64,
    /// Efficiency `1 / k`.
    pub e: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Least-squares line through `(batch_size, peak_memory)` samples.
pub fn memory_cost_fit(samples: &[(f64, f64)]) -> Result<MemoryFit> {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx) * (s.0 - mx)).sum();
    if samples.is_empty() || !(sxx > 0.0) {
        return Err(Error::DegenerateFit { slope: f64::NAN });
    }
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let k = sxy / sxx;
    if !(k > 0.0) {
        return Err(Error::DegenerateFit { slope: k });
    }
    let intercept = my - k * mx;
    let sse: f64 = samples.iter().map(|s| (s.1 - intercept - k * s.0).powi(2)).sum();
    Ok(MemoryFit {
        k,
        e: 1.0 / k,
        intercept,
        residual: (sse / n).sqrt(),
    })
}

/// Beam-search candidates for every pair, fanned out over `jobs` threads.
/// Output order follows `pairs`.
pub fn generate_candidates(model: &Seq2Seq, pairs: &[CodePair], beam: &BeamConfig, jobs: usize) -> Result<Vec<Vec<Candidate>>> {
    let run = |p: &CodePair| beam_search(model, &ids(&p.source_tokens), beam);
    if jobs <= 1 {
        return pairs.iter().map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        use rayon::prelude::*;
        pairs.par_iter().map(run).collect()
    })
}

/// Per-instance outcome of an evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceResult {
    pub id: String,
    pub source_len: usize,
    pub rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub repair_rate_1: f64,
    pub repair_rate_5: f64,
    pub instances: usize,
    pub words_per_sec: Option<f64>,
    pub converge_epoch: Option<usize>,
    /// Megabytes per instance.
    pub k: Option<f64>,
    pub e: Option<f64>,
    pub length_buckets: Vec<LengthBucket>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `metric,value` rows followed by a `start,end,rate,count` table.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("metric,value\n");
        s += &format!("repair_rate_1,{}\n", self.repair_rate_1);
        s += &format!("repair_rate_5,{}\n", self.repair_rate_5);
        s += &format!("instances,{}\n", self.instances);
        s += &format!("words_per_sec,{}\n", opt(self.words_per_sec));
        s += &format!("converge_epoch,{}\n", self.converge_epoch.map(|e| e.to_string()).unwrap_or_default());
        s += &format!("k,{}\ne,{}\n", opt(self.k), opt(self.e));
        s += "\nstart,end,rate,count\n";
        for b in &self.length_buckets {
            s += &format!("{},{},{},{}\n", b.start, b.end, b.rate, b.count);
        }
        s
    }
}

/// Decodes every pair and scores 1- and 5-candidate repair rates.
pub fn evaluate(
    model: &Seq2Seq,
    pairs: &[CodePair],
    beam: &BeamConfig,
    jobs: usize,
    bucket_width: Option<usize>,
) -> Result<(MetricsReport, Vec<InstanceResult>)> {
    if pairs.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let cands = generate_candidates(model, pairs, beam, jobs)?;
    let mut results = Vec::with_capacity(pairs.len());
    let (mut r1, mut r5) = (0usize, 0usize);
    for (p, c) in pairs.iter().zip(&cands) {
        let refs: Vec<Vec<usize>> = p.targets.iter().map(|t| ids(t)).collect();
        let rank = c.iter().position(|c| refs.contains(&c.ids));
        r1 += usize::from(rank == Some(0));
        r5 += usize::from(rank.is_some_and(|r| r < 5));
        results.push(InstanceResult {
            id: p.id.clone(),
            source_len: p.source_tokens.len(),
            rank,
        });
    }
    let n = pairs.len() as f64;
    let buckets = match bucket_width {
        Some(w) => {
            let rs: Vec<(usize, bool)> = results.iter().map(|r| (r.source_len, r.rank == Some(0))).collect();
            length_analysis(&rs, w)?
        }
        None => Vec::new(),
    };
    Ok((
        MetricsReport {
            repair_rate_1: r1 as f64 / n,
            repair_rate_5: r5 as f64 / n,
            instances: pairs.len(),
            words_per_sec: None,
            converge_epoch: None,
            k: None,
            e: None,
            length_buckets: buckets,
        },
        results,
    ))
}

/// Greedy 1-candidate repair rate (beam width 1), a cheap training monitor.
pub fn greedy_repair_rate(model: &Seq2Seq, pairs: &[CodePair], max_len: usize) -> Result<f64> {
    let beam = BeamConfig::new(1, 1, max_len);
    Ok(evaluate(model, pairs, &beam, 1, None)?.0.repair_rate_1)
}

/// Encoder forward plus backward over equal-length sources.
pub fn encoder_pass(model: &Seq2Seq, batch: &[Vec<usize>]) -> Result<()> {
    let mut g = Graph::new(&model.params);
    let mut outs = Vec::with_capacity(batch.len());
    for src in batch {
        let m = model.encode(&mut g, src)?;
        outs.push(g.sum(m));
    }
    let stacked = g.concat_rows(&outs);
    let loss = g.sum(stacked);
    let _ = g.backward(loss);
    Ok(())
}

/// Encoder forward+backward source tokens per second, after one untimed
/// warm-up pass.
pub fn encoder_throughput(model: &Seq2Seq, batch: &[Vec<usize>], repeats: usize) -> Result<f64> {
    encoder_pass(model, batch)?;
    let words: usize = batch.iter().map(Vec::len).sum();
    let mut timings = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        encoder_pass(model, batch)?;
        timings.push(BatchTiming {
            words,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    throughput(&timings, 0)
}

/// Peak megabytes above baseline for one encoder pass over a batch, per
/// batch size; requires [`alloc::CountingAlloc`] as the global allocator.
pub fn encoder_memory_samples(model: &Seq2Seq, batch_sizes: &[usize], source_len: usize) -> Result<Vec<(f64, f64)>> {
    if !alloc::is_installed() {
        return Err(Error::Config("peak memory needs CountingAlloc as the global allocator".into()));
    }
    let v = model.config.vocab_size;
    let mut out = Vec::with_capacity(batch_sizes.len());
    for &b in batch_sizes {
        let batch: Vec<Vec<usize>> = (0..b)
            .map(|i| (0..source_len).map(|t| 4 + (i * 7 + t * 3) % (v - 4)).collect())
            .collect();
        let (r, peak) = alloc::measure_peak(|| encoder_pass(model, &batch));
        r?;
        out.push((b as f64, peak as f64 / 1e6));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::{AttentionKind, ModelConfig};

    #[test]
    fn repair_rate_examples() {
        let refs = vec![vec![vec![1, 2]]; 4];
        let miss = vec![9];
        let cands = vec![
            vec![vec![1, 2], miss.clone(), miss.clone()],
            vec![miss.clone(), miss.clone(), vec![1, 2]],
            vec![miss.clone(); 5],
            vec![miss.clone(), miss.clone(), miss.clone(), miss.clone(), vec![1, 2]],
        ];
        assert_eq!(repair_rate(&cands, &refs, 1).unwrap(), 0.25);
        assert_eq!(repair_rate(&cands, &refs, 5).unwrap(), 0.75);
        assert_eq!(repair_rate(&vec![vec![vec![1, 2]]; 4], &refs, 1).unwrap(), 1.0);
        assert!(repair_rate(&[], &[], 1).is_err());
        // any of several references counts
        assert!(repaired(&[vec![3]], &[vec![1], vec![3]], 1));
    }

    #[test]
    fn throughput_examples() {
        let b = [BatchTiming { words: 1000, seconds: 2.0 }];
        assert_eq!(throughput(&b, 0).unwrap(), 500.0);
        let w = [BatchTiming { words: 10, seconds: 5.0 }, BatchTiming { words: 1000, seconds: 2.0 }];
        assert_eq!(throughput(&w, 1).unwrap(), 500.0);
        assert!(throughput(&b, 1).is_err());
        assert!(throughput(&[BatchTiming { words: 5, seconds: 0.0 }], 0).is_err());
    }

    #[test]
    fn memory_fit_examples() {
        let f = memory_cost_fit(&[(8.0, 1000.0), (16.0, 2000.0), (24.0, 3000.0)]).unwrap();
        assert!((f.k - 125.0).abs() < 1e-12);
        assert!((f.e - 0.008).abs() < 1e-15);
        assert!(f.residual < 1e-9);
        assert!(matches!(
            memory_cost_fit(&[(8.0, 5.0), (16.0, 5.0)]),
            Err(Error::DegenerateFit { .. })
        ));
        assert!(memory_cost_fit(&[(8.0, 5.0)]).is_err());
        assert!(memory_cost_fit(&[(8.0, 5.0), (8.0, 6.0)]).is_err());
    }

    #[test]
    fn length_buckets() {
        let b = length_analysis(&[(120, true)], 50).unwrap();
        assert_eq!(b, vec![LengthBucket { start: 100, end: 150, rate: 1.0, count: 1 }]);
        let rs: Vec<(usize, bool)> = (0..40).map(|i| (i * 7, true)).collect();
        let b = length_analysis(&rs, 25).unwrap();
        assert!(b.iter().all(|x| x.rate == 1.0 && x.count > 0));
        assert_eq!(b.iter().map(|x| x.count).sum::<usize>(), 40);
        assert!(length_analysis(&rs, 0).is_err());
    }

    #[test]
    fn csv_and_json_render() {
        let r = MetricsReport {
            repair_rate_1: 0.5,
            repair_rate_5: 0.75,
            instances: 4,
            words_per_sec: Some(10.0),
            converge_epoch: Some(3),
            k: Some(2.0),
            e: Some(0.5),
            length_buckets: vec![LengthBucket { start: 0, end: 50, rate: 0.5, count: 4 }],
        };
        assert!(r.to_csv().contains("repair_rate_5,0.75"));
        let back: MetricsReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    fn tiny_corpus() -> Vec<CodePair> {
        (0..12)
            .map(|i| CodePair {
                id: format!("p{i}"),
                source_tokens: vec![4 + (i % 5) as u32, 5, 6],
                targets: vec![vec![4 + (i % 5) as u32, 6]],
                label: None,
            })
            .collect()
    }

    fn tiny_model() -> Seq2Seq {
        Seq2Seq::new(ModelConfig::gru(AttentionKind::LuongDot, 1, 8, 10), 1).unwrap()
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let data = tiny_corpus();
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 4,
            lr: 1e-2,
            patience: 0,
            ..Default::default()
        };
        let run = || {
            let mut m = tiny_model();
            let r = train(&mut m, &data, &[], &cfg, |_, _| false).unwrap();
            (m, r)
        };
        let (m1, r1) = run();
        let (m2, r2) = run();
        assert_eq!(r1.log[0].train_loss, r2.log[0].train_loss);
        assert_eq!(m1.params.iter().next().unwrap().1.value, m2.params.iter().next().unwrap().1.value);
        let losses: Vec<f64> = r1.log.iter().map(|e| e.train_loss).collect();
        assert!(losses.windows(2).take(5).all(|w| w[1] < w[0]), "{losses:?}");
        assert!(!r1.stopped_early);
    }

    #[test]
    fn patience_and_callback_stop_training() {
        let data = tiny_corpus();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 4,
            lr: 1e-2,
            patience: 2,
            ..Default::default()
        };
        // validation targets contradict the training targets
        let val: Vec<CodePair> = data[..3]
            .iter()
            .map(|p| CodePair {
                targets: vec![vec![9, 9, 9]],
                ..p.clone()
            })
            .collect();
        let mut m = tiny_model();
        let r = train(&mut m, &data, &val, &cfg, |_, _| false).unwrap();
        assert!(r.stopped_early && r.log.len() < 50);
        let mut m = tiny_model();
        let r = train(&mut m, &data, &[], &TrainConfig { patience: 0, ..cfg }, |e, _| e.epoch == 2).unwrap();
        assert_eq!(r.log.len(), 2);
    }

    #[test]
    fn divergence_and_empty_inputs_are_errors() {
        let mut m = tiny_model();
        assert!(train(&mut m, &[], &[], &TrainConfig::default(), |_, _| false).is_err());
        let id = m.params.id("dec.out.bias").unwrap();
        m.params.value_mut(id).data_mut()[0] = f64::NAN;
        let r = train(&mut m, &tiny_corpus(), &[], &TrainConfig::default(), |_, _| false);
        assert!(matches!(r, Err(Error::Diverged { epoch: 1, .. })));
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { teacher_forcing_ratio: 1.5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn evaluation_is_consistent_across_job_counts() {
        let m = tiny_model();
        let data = tiny_corpus();
        let beam = BeamConfig::new(3, 5, 6);
        let (a, ra) = evaluate(&m, &data, &beam, 1, Some(2)).unwrap();
        let (b, rb) = evaluate(&m, &data, &beam, 3, Some(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(a.repair_rate_5 >= a.repair_rate_1);
        assert!(evaluate(&m, &[], &beam, 1, None).is_err());
    }
}
