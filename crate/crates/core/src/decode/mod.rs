//! Greedy and beam-search generation over any next-token model.
//!
//! A hypothesis score is the accumulated negative log probability of its
//! tokens (EOS included); lower is better.

use std::cmp::Ordering;

use serde::Serialize;

use crate::codetok::{EOS, SOS};
use crate::error::{Error, Result};

/// Next-token model driven by the decoders.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    /// State before any token has been consumed.
    fn init(&self, source: &[usize]) -> Result<Self::State>;

    /// Log-probabilities of the token after `prefix` (which starts with
    /// SOS), plus the state after consuming the last prefix token. `state`
    /// is the state returned for `prefix` without its last token.
    fn step(&self, state: &Self::State, prefix: &[usize]) -> Result<(Vec<f64>, Self::State)>;
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Candidate {
    /// Generated tokens without SOS and EOS.
    pub ids: Vec<usize>,
    pub score: f64,
    /// EOS was emitted.
    pub complete: bool,
}

fn rank(a: &(f64, &[usize]), b: &(f64, &[usize])) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}

fn sort_candidates(c: &mut [Candidate], key: impl Fn(&Candidate) -> f64) {
    c.sort_by(|a, b| rank(&(key(a), &a.ids), &(key(b), &b.ids)));
}

/// `ceil(1.5 * source_len) + 10`.
pub fn default_max_len(source_len: usize) -> usize {
    (source_len * 3).div_ceil(2) + 10
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum StopRule {
    /// Stop once `n_best` hypotheses are complete and no live hypothesis can
    /// still beat the `n_best`-th of them.
    #[default]
    Bounded,
    /// Stop as soon as `n_best` hypotheses are complete.
    PoolFull,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BeamConfig {
    pub width: usize,
    pub n_best: usize,
    /// Maximum generated tokens, EOS included.
    pub max_len: usize,
    pub stop: StopRule,
    /// Rank by score per generated token instead of the plain sum.
    pub length_normalize: bool,
}

impl BeamConfig {
    pub fn new(width: usize, n_best: usize, max_len: usize) -> Self {
        BeamConfig {
            width,
            n_best,
            max_len,
            stop: StopRule::Bounded,
            length_normalize: false,
        }
    }
}

/// Argmax decoding; ties go to the lowest token id.
pub fn greedy_decode<M: StepModel>(model: &M, source: &[usize], max_len: usize) -> Result<Candidate> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be >= 1".into()));
    }
    let mut state = model.init(source)?;
    let mut prefix = vec![SOS as usize];
    let mut score = 0.0;
    for _ in 0..max_len {
        let (lp, next) = model.step(&state, &prefix)?;
        state = next;
        let mut best = 0;
        for (i, &v) in lp.iter().enumerate() {
            if v > lp[best] {
                best = i;
            }
        }
        score -= lp[best];
        if best == EOS as usize {
            return Ok(Candidate {
                ids: prefix[1..].to_vec(),
                score,
                complete: true,
            });
        }
        prefix.push(best);
    }
    Ok(Candidate {
        ids: prefix[1..].to_vec(),
        score,
        complete: false,
    })
}

struct Live<S> {
    prefix: Vec<usize>,
    score: f64,
    state: S,
}

/// Beam search. Returns at most `n_best` candidates sorted by score, ties
/// broken by token ids; a short pool of complete hypotheses is padded with
/// the best incomplete ones.
pub fn beam_search<M: StepModel>(model: &M, source: &[usize], cfg: &BeamConfig) -> Result<Vec<Candidate>> {
    if cfg.width == 0 || cfg.n_best == 0 || cfg.max_len == 0 {
        return Err(Error::Config("width, n_best and max_len must be >= 1".into()));
    }
    let eos = EOS as usize;
    let key = |score: f64, len: usize| {
        if cfg.length_normalize {
            score / len.max(1) as f64
        } else {
            score
        }
    };
    let mut pool: Vec<Candidate> = Vec::new();
    let mut live = vec![Live {
        prefix: vec![SOS as usize],
        score: 0.0,
        state: model.init(source)?,
    }];
    for _ in 0..cfg.max_len {
        // (score, beam index, token, body)
        let mut expansions: Vec<(f64, usize, usize, Vec<usize>)> = Vec::new();
        let mut states = Vec::with_capacity(live.len());
        for (b, hyp) in live.iter().enumerate() {
            let (lp, next) = model.step(&hyp.state, &hyp.prefix)?;
            states.push(next);
            for (tok, &l) in lp.iter().enumerate() {
                if l == f64::NEG_INFINITY || l.is_nan() {
                    continue;
                }
                let mut body = hyp.prefix[1..].to_vec();
                if tok != eos {
                    body.push(tok);
                }
                expansions.push((hyp.score - l, b, tok, body));
            }
        }
        expansions.sort_by(|a, b| {
            let ka = key(a.0, a.3.len() + 1);
            let kb = key(b.0, b.3.len() + 1);
            rank(&(ka, &a.3), &(kb, &b.3)).then_with(|| (a.2 == eos).cmp(&(b.2 == eos)).reverse())
        });
        expansions.truncate(cfg.width);
        let mut next_live = Vec::new();
        for (score, b, tok, body) in expansions {
            if tok == eos {
                pool.push(Candidate {
                    ids: body,
                    score,
                    complete: true,
                });
            } else {
                let mut prefix = live[b].prefix.clone();
                prefix.push(tok);
                next_live.push(Live {
                    prefix,
                    score,
                    state: states[b].clone(),
                });
            }
        }
        live = next_live;
        if live.is_empty() || pool.len() >= cfg.n_best && done(cfg, &mut pool, &live) {
            break;
        }
    }
    let k = |c: &Candidate| key(c.score, c.ids.len() + usize::from(c.complete));
    sort_candidates(&mut pool, k);
    pool.truncate(cfg.n_best);
    if pool.len() < cfg.n_best {
        let mut rest: Vec<Candidate> = live
            .into_iter()
            .map(|h| Candidate {
                ids: h.prefix[1..].to_vec(),
                score: h.score,
                complete: false,
            })
            .collect();
        sort_candidates(&mut rest, k);
        pool.extend(rest.into_iter().take(cfg.n_best - pool.len()));
    }
    Ok(pool)
}

fn done<S>(cfg: &BeamConfig, pool: &mut [Candidate], live: &[Live<S>]) -> bool {
    match cfg.stop {
        StopRule::PoolFull => true,
        // scores never decrease; on a tie a longer sequence may still sort
        // first by ids, so only strictly worse live beams are ruled out
        StopRule::Bounded if cfg.length_normalize => false,
        StopRule::Bounded => {
            sort_candidates(pool, |c| c.score);
            let nth = pool[cfg.n_best - 1].score;
            live.iter().all(|h| h.score > nth)
        }
    }
}

/// All complete sequences of at most `max_len` tokens ranked by score, then
/// ids; padded with length-`max_len` incomplete sequences when short.
/// Exponential in `max_len`; meant as a test oracle.
pub fn exhaustive_search<M: StepModel>(model: &M, source: &[usize], n_best: usize, max_len: usize) -> Result<Vec<Candidate>> {
    let mut complete = Vec::new();
    let mut frontier = vec![(vec![SOS as usize], 0.0, model.init(source)?)];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (prefix, score, state) in frontier {
            let (lp, st) = model.step(&state, &prefix)?;
            for (tok, &l) in lp.iter().enumerate() {
                if l == f64::NEG_INFINITY {
                    continue;
                }
                if tok == EOS as usize {
                    complete.push(Candidate {
                        ids: prefix[1..].to_vec(),
                        score: score - l,
                        complete: true,
                    });
                } else {
                    let mut p = prefix.clone();
                    p.push(tok);
                    next.push((p, score - l, st.clone()));
                }
            }
        }
        frontier = next;
    }
    sort_candidates(&mut complete, |c| c.score);
    complete.truncate(n_best);
    if complete.len() < n_best {
        let mut rest: Vec<Candidate> = frontier
            .into_iter()
            .map(|(p, s, _)| Candidate {
                ids: p[1..].to_vec(),
                score: s,
                complete: false,
            })
            .collect();
        sort_candidates(&mut rest, |c| c.score);
        complete.extend(rest.into_iter().take(n_best - complete.len()));
    }
    Ok(complete)
}

/// Model with a fixed distribution per (step, previous token). Used by the
/// oracle tests; the table is `steps x vocab` rows of `vocab` probabilities.
#[derive(Clone, Debug)]
pub struct TableModel {
    pub vocab: usize,
    /// `probs[step][prev][tok]`.
    pub probs: Vec<Vec<Vec<f64>>>,
}

impl TableModel {
    pub fn random<R: rand::Rng + ?Sized>(vocab: usize, steps: usize, zero_rate: f64, rng: &mut R) -> Self {
        let probs = (0..steps)
            .map(|_| {
                (0..vocab)
                    .map(|_| {
                        let mut row: Vec<f64> = (0..vocab)
                            .map(|_| if rng.gen::<f64>() < zero_rate { 0.0 } else { rng.gen_range(0.01..1.0) })
                            .collect();
                        if row.iter().all(|&p| p == 0.0) {
                            row[EOS as usize] = 1.0;
                        }
                        let s: f64 = row.iter().sum();
                        row.iter().map(|p| p / s).collect()
                    })
                    .collect()
            })
            .collect();
        TableModel { vocab, probs }
    }
}

impl StepModel for TableModel {
    type State = ();

    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn init(&self, _source: &[usize]) -> Result<()> {
        Ok(())
    }

    fn step(&self, _state: &(), prefix: &[usize]) -> Result<(Vec<f64>, ())> {
        let t = (prefix.len() - 1).min(self.probs.len() - 1);
        let prev = *prefix.last().unwrap();
        Ok((self.probs[t][prev].iter().map(|p| p.ln()).collect(), ()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn deterministic(seq: &[usize], vocab: usize) -> TableModel {
        // step t emits seq[t], then EOS
        let steps = seq.len() + 1;
        let probs = (0..steps)
            .map(|t| {
                let tok = seq.get(t).copied().unwrap_or(EOS as usize);
                (0..vocab)
                    .map(|_| (0..vocab).map(|v| if v == tok { 1.0 } else { 0.0 }).collect())
                    .collect()
            })
            .collect();
        TableModel { vocab, probs }
    }

    #[test]
    fn eos_first_gives_empty_body() {
        let m = deterministic(&[], 5);
        let g = greedy_decode(&m, &[], 4).unwrap();
        assert_eq!(g, Candidate { ids: vec![], score: 0.0, complete: true });
        let b = beam_search(&m, &[], &BeamConfig::new(5, 5, 4)).unwrap();
        assert_eq!(b, vec![g]);
    }

    #[test]
    fn deterministic_model_yields_one_candidate() {
        let m = deterministic(&[3, 4, 3], 5);
        let b = beam_search(&m, &[], &BeamConfig::new(3, 5, 6)).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].ids, vec![3, 4, 3]);
        assert_eq!(b[0].score, 0.0);
    }

    #[test]
    fn greedy_respects_max_len() {
        let m = deterministic(&[3, 3, 3, 3, 3], 5);
        let g = greedy_decode(&m, &[], 2).unwrap();
        assert_eq!(g.ids.len(), 2);
        assert!(!g.complete);
        assert!(greedy_decode(&m, &[], 0).is_err());
    }

    #[test]
    fn hand_built_three_token_example() {
        // vocab {pad, sos, eos, a=3, b=4}; step distributions fixed
        let p0 = vec![0.0, 0.0, 0.2, 0.5, 0.3];
        let p1 = vec![0.0, 0.0, 0.6, 0.1, 0.3];
        let p2 = vec![0.0, 0.0, 1.0, 0.0, 0.0];
        let probs = vec![vec![p0; 5], vec![p1; 5], vec![p2; 5]];
        let m = TableModel { vocab: 5, probs };
        let got = beam_search(&m, &[], &BeamConfig::new(3, 3, 3)).unwrap();
        let ids: Vec<Vec<usize>> = got.iter().map(|c| c.ids.clone()).collect();
        // P: a,eos .30; eos .20; b,eos .18
        assert_eq!(ids, vec![vec![3], vec![], vec![4]]);
        assert!((got[0].score + 0.3f64.ln()).abs() < 1e-12);
        assert_eq!(got, exhaustive_search(&m, &[], 3, 3).unwrap());
    }

    #[test]
    fn width_one_equals_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = TableModel::random(5, 4, 0.2, &mut rng);
            let g = greedy_decode(&m, &[], 4).unwrap();
            let b = beam_search(&m, &[], &BeamConfig::new(1, 1, 4)).unwrap();
            assert_eq!(b[0].ids, g.ids);
            assert!((b[0].score - g.score).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_full_rule_stops_at_first_completions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = TableModel::random(5, 4, 0.0, &mut rng);
        let mut cfg = BeamConfig::new(25, 1, 4);
        cfg.stop = StopRule::PoolFull;
        let got = beam_search(&m, &[], &cfg).unwrap();
        // the only completion available at step 1 is the empty body
        assert_eq!(got[0].ids, Vec::<usize>::new());
    }

    #[test]
    fn rejects_zero_sizes() {
        let m = deterministic(&[], 5);
        assert!(beam_search(&m, &[], &BeamConfig::new(0, 1, 3)).is_err());
        assert!(beam_search(&m, &[], &BeamConfig::new(1, 0, 3)).is_err());
    }

    #[test]
    fn log_softmax_normalizes() {
        let l = log_softmax(&[1.0, 2.0, 3.0]);
        assert!((l.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn full_width_beam_matches_exhaustive(seed in 0u64..10_000, vocab in 3usize..6, max_len in 1usize..5, n_best in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = TableModel::random(vocab, max_len, 0.15, &mut rng);
            let width = vocab.pow(max_len as u32);
            let beam = beam_search(&m, &[], &BeamConfig::new(width, n_best, max_len)).unwrap();
            let oracle = exhaustive_search(&m, &[], n_best, max_len).unwrap();
            prop_assert_eq!(beam, oracle);
        }

        #[test]
        fn results_sorted_and_scores_nonnegative(seed in 0u64..10_000, width in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = TableModel::random(5, 4, 0.1, &mut rng);
            let out = beam_search(&m, &[], &BeamConfig::new(width, 5, 4)).unwrap();
            prop_assert!(out.len() <= 5);
            prop_assert!(out.iter().all(|c| c.score >= 0.0));
            let complete: Vec<&Candidate> = out.iter().filter(|c| c.complete).collect();
            for w in complete.windows(2) {
                prop_assert!(rank(&(w[0].score, &w[0].ids), &(w[1].score, &w[1].ids)) != Ordering::Greater);
            }
        }
    }
}
