//! Acceptance suite: one pass/fail line per criterion.
//!
//! Run all with `cargo test -p pyrfix-core --test acceptance`, or pick
//! criteria by number: `cargo test -p pyrfix-core --test acceptance -- 4 10`.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pyrfix::attention::{bahdanau_attend, global_attend, Attention, ScoreParams};
use pyrfix::codetok::{
    build_vocabulary, default_library_names, detokenize, normalize_whitespace, rename_functions, tokenize, Language,
    SyntaxTable, Token, Vocabulary,
};
use pyrfix::corpus::synthetic::{generate, SyntheticOptions};
use pyrfix::corpus::{preprocess, split, CodePair, PreprocessOptions, SplitSpec};
use pyrfix::decode::{beam_search, default_max_len, exhaustive_search, BeamConfig, TableModel};
use pyrfix::harness::alloc::CountingAlloc;
use pyrfix::harness::{
    encoder_memory_samples, encoder_throughput, evaluate, greedy_repair_rate, memory_cost_fit, train, TrainConfig,
};
use pyrfix::model::Seq2Seq;
use pyrfix::rnn::{BiGru, GruCell};
use pyrfix::seqcore::gradcheck::grad_check;
use pyrfix::seqcore::layers::Pyramid;
use pyrfix::seqcore::{AttentionKind, GraphModule, Matrix, ModelConfig, ParamStore, ResidualMode};
use pyrfix::transfer::{
    expand_embedding, params_hash, reinit_last_encoder_layer, train_classifier, Classifier, ClassifierConfig,
};
use pyrfix::xformer::EncoderLayer;

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

type Check = Result<(bool, String), String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1. Pyramid length contract.
fn pyramid_lengths() -> Check {
    let mut r = rng(1);
    let mut models: HashMap<(bool, usize, usize), Seq2Seq> = HashMap::new();
    let mut exact_cases = 0;
    for i in 0..1000 {
        let t = r.gen_range(1..=1000);
        let n = r.gen_range(1..=5);
        let w = *[2usize, 3, 4].get(r.gen_range(0..3)).unwrap();
        let gru = i % 2 == 0;
        let model = models.entry((gru, n, w)).or_insert_with(|| {
            let mut c = if gru {
                ModelConfig::gru(AttentionKind::Bahdanau, n, 4, 8)
            } else {
                let mut c = ModelConfig::transformer(n, 4, 1, 8);
                c.d_ff = 4;
                c
            };
            c.window = w;
            Seq2Seq::new(c, 0).unwrap()
        });
        let ids: Vec<usize> = (0..t).map(|k| 4 + k % 4).collect();
        let got = model.memory(&ids).map_err(err)?.rows();
        let mut expect = t;
        for _ in 1..n {
            expect = (expect + w - 1) / w;
        }
        if got != expect {
            return Ok((false, format!("T={t} N={n} w={w} gru={gru}: {got} != {expect}")));
        }
        let div = 1usize << (n - 1);
        if w == 2 && t % div == 0 {
            exact_cases += 1;
            if got != t / div {
                return Ok((false, format!("T={t} N={n}: {got} != T/2^(N-1)")));
            }
        }
    }
    Ok((true, format!("1000 configs, {exact_cases} exact-halving cases")))
}

// 2. Gradient suite.
fn gradient_suite() -> Check {
    const EPS: f64 = 1e-5;
    const TOL: f64 = 1e-4;
    let mut results: Vec<(String, f64, bool)> = Vec::new();
    let mut record = |name: &str, m: &mut GraphModule| {
        let rep = grad_check(m, EPS, TOL);
        results.push((name.to_string(), rep.max_rel_error, rep.passed()));
    };

    let mut store = ParamStore::new();
    let mut r = rng(2);
    let f = GruCell::new(&mut store, "f", 3, 4, &mut r);
    let b = GruCell::new(&mut store, "b", 3, 4, &mut r);
    let x = Matrix::uniform(5, 3, 1.0, &mut r);
    let h = Matrix::uniform(1, 4, 1.0, &mut r);
    let mut cell = GraphModule::new(store.clone(), vec![x.slice_rows(0, 1), h], move |g, v| {
        let gx = f.input_proj(g, v[0]);
        f.step(g, gx, v[1])
    });
    record("gru cell", &mut cell);
    let layer = BiGru { fwd: f, bwd: b, pyramid: None };
    let mut bi = GraphModule::new(store, vec![x], move |g, v| layer.forward(g, v[0]));
    record("bi-gru layer", &mut bi);

    for kind in [
        AttentionKind::Bahdanau,
        AttentionKind::LuongDot,
        AttentionKind::LuongGeneral,
        AttentionKind::LuongConcat,
        AttentionKind::LuongLocal,
    ] {
        let mut store = ParamStore::new();
        let mut r = rng(3);
        let cfg = ModelConfig::gru(kind, 1, 4, 8);
        let att = Attention::new(&mut store, "att", &cfg, &mut r).map_err(err)?;
        let q = Matrix::uniform(2, 4, 1.0, &mut r);
        let m = Matrix::uniform(6, 4, 1.0, &mut r);
        let mut module = GraphModule::new(store, vec![q, m], move |g, x| {
            let o = att.attend(g, x[0], x[1]);
            g.concat_cols(&[o.context, o.weights])
        });
        record(&format!("attention {kind:?}"), &mut module);
    }

    let mut store = ParamStore::new();
    let mut r = rng(4);
    let pyr = Pyramid::new(&mut store, "pyr", 4, 2, &mut r);
    let x = Matrix::uniform(5, 4, 1.0, &mut r);
    let mut module = GraphModule::new(store, vec![x], move |g, v| pyr.forward(g, v[0]));
    record("pyramid module", &mut module);

    for (name, pyramid, mode) in [
        ("transformer regular", false, ResidualMode::Ave),
        ("transformer pyramid ave", true, ResidualMode::Ave),
        ("transformer pyramid aff", true, ResidualMode::Aff),
    ] {
        let mut cfg = ModelConfig::transformer(2, 4, 2, 8);
        cfg.d_ff = 6;
        cfg.residual_mode = mode;
        let mut store = ParamStore::new();
        let mut r = rng(5);
        let layer = EncoderLayer::new(&mut store, "l", &cfg, pyramid, &mut r);
        let x = Matrix::uniform(5, 4, 1.0, &mut r);
        let mut module = GraphModule::new(store, vec![x], move |g, v| layer.forward(g, v[0]).unwrap());
        record(name, &mut module);
    }

    let mut tcfg = ModelConfig::transformer(2, 4, 2, 8);
    tcfg.d_ff = 4;
    for (name, cfg) in [
        ("classifier head gru", ModelConfig::gru(AttentionKind::LuongGeneral, 2, 4, 8)),
        ("classifier head transformer", tcfg),
    ] {
        let ccfg = ClassifierConfig {
            n_class: 3,
            ..Default::default()
        };
        let clf = Classifier::new(&cfg, &ccfg, None, 6).map_err(err)?;
        let params = clf.model.params.clone();
        let mut module = GraphModule::new(params, Vec::new(), move |g, _| {
            let l = clf.logits_var(g, &[4, 5, 6, 7]).unwrap();
            g.cross_entropy(l, &[1])
        });
        record(name, &mut module);
    }

    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let failed: Vec<&str> = results.iter().filter(|r| !r.2).map(|r| r.0.as_str()).collect();
    Ok((
        failed.is_empty(),
        format!("{} modules, max rel err {worst:.2e}, failed {failed:?}", results.len()),
    ))
}

// 3. Attention normalization.
fn attention_normalization() -> Check {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let d = r.gen_range(1..=8);
        let s = r.gen_range(1..=20);
        let mem = Matrix::uniform(s, d, 3.0, &mut r);
        let q = Matrix::uniform(1, d, 3.0, &mut r);
        let out = match i % 4 {
            0 => global_attend(q.row(0), &mem, &ScoreParams::Dot),
            1 => global_attend(q.row(0), &mem, &ScoreParams::General { w_a: Matrix::uniform(d, d, 1.0, &mut r) }),
            2 => global_attend(
                q.row(0),
                &mem,
                &ScoreParams::Concat {
                    w_a: Matrix::uniform(d, 2 * d, 1.0, &mut r),
                    v_a: (0..d).map(|_| r.gen_range(-1.0..1.0)).collect(),
                },
            ),
            _ => bahdanau_attend(
                q.row(0),
                &mem,
                &ScoreParams::Bahdanau {
                    w1: Matrix::uniform(d, d, 1.0, &mut r),
                    b1: (0..d).map(|_| r.gen_range(-1.0..1.0)).collect(),
                    w2: Matrix::uniform(d, d, 1.0, &mut r),
                    b2: (0..d).map(|_| r.gen_range(-1.0..1.0)).collect(),
                },
            ),
        }
        .map_err(err)?;
        worst = worst.max((out.weights.iter().sum::<f64>() - 1.0).abs());
        if out.weights.iter().any(|&a| a < 0.0) {
            return Ok((false, format!("negative weight in call {i}")));
        }
    }
    let mut gap: f64 = 0.0;
    for _ in 0..100 {
        let d = r.gen_range(1..=8);
        let s = r.gen_range(1..=20);
        let mem = Matrix::uniform(s, d, 3.0, &mut r);
        let q = Matrix::uniform(1, d, 3.0, &mut r);
        let mut eye = Matrix::zeros(d, d);
        for k in 0..d {
            eye.set(k, k, 1.0);
        }
        let a = global_attend(q.row(0), &mem, &ScoreParams::General { w_a: eye }).map_err(err)?;
        let b = global_attend(q.row(0), &mem, &ScoreParams::Dot).map_err(err)?;
        for (x, y) in a.weights.iter().chain(&a.context).zip(b.weights.iter().chain(&b.context)) {
            gap = gap.max((x - y).abs());
        }
    }
    Ok((
        worst <= 1e-6 && gap <= 1e-6,
        format!("max |sum-1| {worst:.1e}, general(I) vs dot {gap:.1e}"),
    ))
}

// 4. Beam search against exhaustive enumeration.
fn beam_oracle() -> Check {
    let mut r = rng(4);
    for i in 0..100 {
        let vocab = r.gen_range(4..=5);
        let max_len = r.gen_range(1..=4);
        let n_best = r.gen_range(1..=6);
        let m = TableModel::random(vocab, max_len, 0.15, &mut r);
        let width = vocab.pow(max_len as u32);
        let beam = beam_search(&m, &[], &BeamConfig::new(width, n_best, max_len)).map_err(err)?;
        let oracle = exhaustive_search(&m, &[], n_best, max_len).map_err(err)?;
        if beam != oracle {
            return Ok((false, format!("model {i}: beam {beam:?} vs oracle {oracle:?}")));
        }
    }
    Ok((true, "100 random table models, identical ranked lists".into()))
}

fn synthetic_pairs(n: usize, seed: u64) -> (Vec<CodePair>, Vocabulary) {
    let raw = generate(n, seed, &SyntheticOptions::default());
    let out = preprocess(
        &raw,
        &SyntaxTable::c(),
        &default_library_names(Language::C),
        &PreprocessOptions::default(),
        None,
    )
    .unwrap();
    (out.pairs, out.vocab)
}

fn dedup(pairs: Vec<CodePair>) -> Vec<CodePair> {
    let mut seen = HashSet::new();
    pairs.into_iter().filter(|p| seen.insert(p.source_tokens.clone())).collect()
}

fn top1_rate(model: &Seq2Seq, pairs: &[CodePair]) -> Result<f64, String> {
    let longest = pairs.iter().map(|p| p.source_tokens.len()).max().unwrap_or(1);
    let beam = BeamConfig::new(5, 1, default_max_len(longest));
    Ok(evaluate(model, pairs, &beam, 1, None).map_err(err)?.0.repair_rate_1)
}

fn gru_toy(vocab: usize) -> ModelConfig {
    ModelConfig::gru(AttentionKind::Bahdanau, 2, 32, vocab)
}

fn transformer_toy(vocab: usize) -> ModelConfig {
    let mut c = ModelConfig::transformer(2, 32, 4, vocab);
    c.d_ff = 64;
    c
}

fn gru_train() -> TrainConfig {
    TrainConfig {
        epochs: 200,
        batch_size: 4,
        lr: 3e-3,
        patience: 0,
        ..Default::default()
    }
}

fn transformer_train() -> TrainConfig {
    TrainConfig {
        epochs: 200,
        batch_size: 8,
        lr: 3e-3,
        patience: 0,
        ..Default::default()
    }
}

// 5. Overfit: both families memorize 200 training pairs.
fn overfit() -> Check {
    let (pairs, vocab) = synthetic_pairs(200, 1);
    let longest = pairs.iter().map(|p| p.source_tokens.len()).max().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, cfg, tc) in [
        ("gru+bahdanau", gru_toy(vocab.len()), gru_train()),
        ("transformer", transformer_toy(vocab.len()), transformer_train()),
    ] {
        let t0 = Instant::now();
        let mut model = Seq2Seq::new(cfg, 1).map_err(err)?;
        let mut reached = None;
        train(&mut model, &pairs, &[], &tc, |e, m| {
            if e.epoch % 5 != 0 || greedy_repair_rate(m, &pairs, default_max_len(longest)).unwrap() < 0.95 {
                return false;
            }
            let rate = top1_rate(m, &pairs).unwrap();
            if rate >= 0.95 {
                reached = Some((e.epoch, rate));
            }
            reached.is_some()
        })
        .map_err(err)?;
        let secs = t0.elapsed().as_secs_f64();
        match reached {
            Some((epoch, rate)) if secs < 1800.0 => {
                lines.push(format!("{name} {:.1}% at epoch {epoch} in {secs:.0}s", rate * 100.0))
            }
            _ => {
                ok = false;
                let rate = top1_rate(&model, &pairs)?;
                lines.push(format!("{name} only {:.1}% after 200 epochs, {secs:.0}s", rate * 100.0));
            }
        }
    }
    Ok((ok, lines.join("; ")))
}

// 6. Pyramid and regular encoders generalize alike.
fn pyramid_parity() -> Check {
    let (pairs, vocab) = synthetic_pairs(600, 6);
    let pairs = dedup(pairs);
    let spec = SplitSpec {
        train: 0.8,
        test: 0.1,
        validation: 0.1,
        seed: 6,
    };
    let (tr, te, _) = split(&pairs, &spec).map_err(err)?;
    let tc = TrainConfig {
        epochs: 25,
        ..transformer_train()
    };
    let mut rates = Vec::new();
    for pyramid in [true, false] {
        let mut model = Seq2Seq::new(transformer_toy(vocab.len()).with_pyramid(pyramid), 6).map_err(err)?;
        train(&mut model, &tr, &[], &tc, |_, _| false).map_err(err)?;
        rates.push(top1_rate(&model, &te)?);
    }
    let gap = (rates[0] - rates[1]).abs();
    Ok((
        gap <= 0.10,
        format!(
            "{} train / {} held out: pyramid {:.1}%, regular {:.1}%, gap {:.1} pp",
            tr.len(),
            te.len(),
            rates[0] * 100.0,
            rates[1] * 100.0,
            gap * 100.0
        ),
    ))
}

fn bench_config(gru: bool, pyramid: bool) -> ModelConfig {
    let c = if gru {
        ModelConfig::gru(AttentionKind::Bahdanau, 4, 128, 64)
    } else {
        ModelConfig::transformer(4, 128, 8, 64)
    };
    c.with_pyramid(pyramid)
}

// 7. Encoder throughput at T=512, N=4, d=128, batch 8.
fn throughput() -> Check {
    let batch: Vec<Vec<usize>> = (0..8).map(|i| (0..512).map(|t| 4 + (7 * i + t) % 60).collect()).collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, gru) in [("gru", true), ("transformer", false)] {
        let wps: Vec<f64> = [true, false]
            .iter()
            .map(|&p| {
                let m = Seq2Seq::new(bench_config(gru, p), 7).unwrap();
                encoder_throughput(&m, &batch, 2).unwrap()
            })
            .collect();
        let ratio = wps[0] / wps[1];
        ok &= ratio >= 1.3;
        lines.push(format!("{name} {:.0} vs {:.0} words/s = {ratio:.2}x", wps[0], wps[1]));
    }
    Ok((ok, lines.join("; ")))
}

// 8. Memory slope.
fn memory_slope() -> Check {
    let (k_true, base) = (3.75, 12.5);
    let samples: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|&b| (b, base + k_true * b)).collect();
    let fit = memory_cost_fit(&samples).map_err(err)?;
    let rel = (fit.k - k_true).abs() / k_true;
    let mut ok = rel <= 1e-9 && (fit.e - 1.0 / k_true).abs() <= 1e-9;
    let mut lines = vec![format!("synthetic slope rel err {rel:.1e}")];
    for (name, gru) in [("gru", true), ("transformer", false)] {
        let ks: Vec<f64> = [true, false]
            .iter()
            .map(|&p| {
                let m = Seq2Seq::new(bench_config(gru, p), 8).unwrap();
                let s = encoder_memory_samples(&m, &[2, 4, 8], 256).unwrap();
                memory_cost_fit(&s).map(|f| f.k).unwrap_or(f64::NAN)
            })
            .collect();
        ok &= ks[0] < ks[1];
        lines.push(format!("{name} k {:.3} vs {:.3} MB/instance", ks[0], ks[1]));
    }
    Ok((ok, lines.join("; ")))
}

// 9. Transfer learning.
fn transfer() -> Check {
    let mut r = rng(9);
    let old_tokens: Vec<Vec<Token>> = vec![["int", " ", "x", ";"].iter().map(|t| Token::new(*t).unwrap()).collect()];
    let old_vocab = build_vocabulary(&old_tokens, 1);
    let mut new_tokens = old_tokens.clone();
    new_tokens.push(["free", "(", "y", ")"].iter().map(|t| Token::new(*t).unwrap()).collect());
    let new_vocab = build_vocabulary(&new_tokens, 1);
    let old = Matrix::uniform(old_vocab.len(), 8, 1.0, &mut r);
    let grown = expand_embedding(&old, &old_vocab, &new_vocab, &mut r).map_err(err)?;
    let bit_exact = old_vocab.tokens().iter().enumerate().all(|(i, t)| {
        let j = new_vocab.lookup(t).unwrap() as usize;
        old.row(i).iter().zip(grown.row(j)).all(|(a, b)| a.to_bits() == b.to_bits())
    });

    let n = 3;
    let base = Seq2Seq::new(ModelConfig::gru(AttentionKind::Bahdanau, n, 8, 20), 9).map_err(err)?;
    let mut touched = base.params.clone();
    reinit_last_encoder_layer(&mut touched, n, 99).map_err(err)?;
    let last = format!("enc.layer{}.", n - 1);
    let only_last = base.params.iter().zip(touched.iter()).all(|((_, a), (_, b))| {
        let same = a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits());
        same != a.name.starts_with(&last)
    }) && params_hash(&base.params, "dec.") == params_hash(&touched, "dec.");

    let (pre_pairs, vocab) = synthetic_pairs(200, 11);
    let cfg = transformer_toy(vocab.len());
    let mut pretrained = Seq2Seq::new(cfg.clone(), 11).map_err(err)?;
    let tc = TrainConfig {
        epochs: 10,
        ..transformer_train()
    };
    train(&mut pretrained, &pre_pairs, &[], &tc, |_, _| false).map_err(err)?;

    let raw = generate(300, 12, &SyntheticOptions::default());
    let out = preprocess(
        &raw,
        &SyntaxTable::c(),
        &default_library_names(Language::C),
        &PreprocessOptions::default(),
        Some(vocab),
    )
    .map_err(err)?;
    let classes: Vec<String> = {
        let mut c: Vec<String> = out.pairs.iter().filter_map(|p| p.label.clone()).collect();
        c.sort();
        c.dedup();
        c
    };
    let data: Vec<(Vec<usize>, usize)> = out
        .pairs
        .iter()
        .map(|p| {
            let y = classes.iter().position(|c| Some(c) == p.label.as_ref()).unwrap();
            (p.source_tokens.iter().map(|&i| i as usize).collect(), y)
        })
        .collect();
    let ccfg = ClassifierConfig {
        n_class: classes.len(),
        ..Default::default()
    };
    let cls_train = TrainConfig {
        epochs: 2,
        batch_size: 16,
        lr: 1e-3,
        patience: 0,
        ..Default::default()
    };
    let mut wins = 0;
    let mut accs = Vec::new();
    for seed in 0..5u64 {
        let (tr, te, _) = split(
            &data,
            &SplitSpec {
                train: 0.8,
                test: 0.2,
                validation: 0.0,
                seed,
            },
        )
        .map_err(err)?;
        let mut acc = [0.0; 2];
        for (k, from) in [Some(&pretrained), None].into_iter().enumerate() {
            let mut clf = Classifier::new(&cfg, &ccfg, from, 100 + seed).map_err(err)?;
            train_classifier(&mut clf, &tr, &[], &TrainConfig { seed, ..cls_train.clone() }).map_err(err)?;
            acc[k] = clf.accuracy(&te).map_err(err)?;
        }
        wins += usize::from(acc[0] >= acc[1]);
        accs.push(format!("{:.2}/{:.2}", acc[0], acc[1]));
    }
    Ok((
        bit_exact && only_last && wins == 5 && classes.len() == 3,
        format!(
            "bit-exact rows {bit_exact}, reinit only last layer {only_last}, pretrained>=fresh {wins}/5 [{}]",
            accs.join(" ")
        ),
    ))
}

// 10. Tokenizer round trip and renaming over the snippet corpus.
fn tokenizer_corpus() -> Check {
    let text = include_str!("fixtures/c_snippets.c");
    let snippets: Vec<&str> = text.split("\n@@\n").filter(|s| !s.trim().is_empty()).collect();
    if snippets.len() < 100 {
        return Ok((false, format!("only {} snippets", snippets.len())));
    }
    let table = SyntaxTable::c();
    let library = default_library_names(Language::C);
    let mut renamed_total = 0;
    for (i, s) in snippets.iter().enumerate() {
        let toks = tokenize(s, &table).map_err(|e| format!("snippet {i}: {e}"))?;
        let back = detokenize(&toks);
        let words = s.split_whitespace().collect::<Vec<_>>().join(" ");
        if back.trim() != words || back != normalize_whitespace(s) {
            return Ok((false, format!("snippet {i} round trip: {back:?}")));
        }
        let (once, map) = rename_functions(&toks, &library);
        let (twice, map2) = rename_functions(&once, &library);
        if once != twice || !map2.is_empty() {
            return Ok((false, format!("snippet {i}: renaming not idempotent")));
        }
        let originals: HashSet<&str> = map.pairs().iter().map(|p| p.0.as_str()).collect();
        let canon: HashSet<&str> = map.pairs().iter().map(|p| p.1.as_str()).collect();
        if originals.len() != map.len() || canon.len() != map.len() {
            return Ok((false, format!("snippet {i}: map not bijective")));
        }
        let inverse: HashMap<&str, &str> = map.pairs().iter().map(|(o, c)| (c.as_str(), o.as_str())).collect();
        let restored: Vec<&str> = once.iter().map(|t| inverse.get(t.as_str()).copied().unwrap_or(t.as_str())).collect();
        if restored != toks.iter().map(Token::as_str).collect::<Vec<_>>() {
            return Ok((false, format!("snippet {i}: inverse map does not restore the tokens")));
        }
        renamed_total += map.len();
    }
    Ok((true, format!("{} snippets, {renamed_total} functions renamed", snippets.len())))
}

fn main() {
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    // name, check, wall-clock limit in seconds
    let criteria: [(&str, fn() -> Check, Option<f64>); 10] = [
        ("pyramid length contract", pyramid_lengths, Some(10.0)),
        ("gradient suite", gradient_suite, Some(300.0)),
        ("attention normalization", attention_normalization, None),
        ("beam search oracle", beam_oracle, Some(60.0)),
        ("overfit", overfit, None),
        ("pyramid parity", pyramid_parity, None),
        ("encoder throughput", throughput, Some(600.0)),
        ("memory slope", memory_slope, None),
        ("transfer", transfer, None),
        ("tokenizer corpus", tokenizer_corpus, None),
    ];
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !picked.is_empty() && !picked.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let (mut pass, mut detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = t0.elapsed().as_secs_f64();
        if let Some(l) = limit {
            if secs > *l {
                pass = false;
                detail += &format!("; over the {l:.0}s limit");
            }
        }
        failed += usize::from(!pass);
        println!("[{}] {id:>2} {name}: {detail} ({secs:.1}s)", if pass { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
