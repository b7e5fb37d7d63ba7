use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::Serialize;

use pyrfix::codetok::{
    default_library_names, rename_functions_with, tokenize_with, Language, RenameMap, SyntaxTable,
    Token, TokenizeOptions, Vocabulary,
};
use pyrfix::corpus::synthetic::{self, SyntheticOptions};
use pyrfix::corpus::{
    load_jsonl, load_pairs, preprocess, save_jsonl, split, strip_dead_code, CodePair, DeadCodePolicy,
    PreprocessOptions, RawPair, SplitSpec,
};
use pyrfix::decode::{beam_search, default_max_len, BeamConfig};
use pyrfix::harness::{self, Trainer};
use pyrfix::model::Seq2Seq;
use pyrfix::seqcore::{load_checkpoint, save_checkpoint, Dtype, ModelConfig};
use pyrfix::transfer::{self, Classifier, ClassifierConfig};

use crate::config::{self, RunConfig};
use crate::diff::mark_edits;
use crate::{BeamArgs, Cli, CliError, Command, Common};

type Res<T> = Result<T, CliError>;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Lang {
    C,
    Java,
}

impl From<Lang> for Language {
    fn from(l: Lang) -> Self {
        match l {
            Lang::C => Language::C,
            Lang::Java => Language::Java,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DeadCode {
    Strip,
    Drop,
    Keep,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Raw pairs, one JSON object per line: {id, source, targets, label?}.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Generate this many synthetic pairs instead of reading --input.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long, value_enum, default_value_t = Lang::C)]
    pub language: Lang,
    #[arg(long, value_enum, default_value_t = DeadCode::Strip)]
    pub dead_code: DeadCode,
    #[arg(long)]
    pub keep_divergent_if: bool,
    #[arg(long)]
    pub keep_comments: bool,
    #[arg(long)]
    pub no_rename: bool,
    #[arg(long)]
    pub max_length: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Encode with an existing vocabulary instead of building one.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Also write train/test/valid splits with these fractions.
    #[arg(long, value_name = "TRAIN,TEST,VALID")]
    pub split: Option<String>,
}

#[derive(Args, Debug)]
pub struct BuildVocabArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Lang::C)]
    pub language: Lang,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Encoded pairs (pairs.jsonl).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Continue from this checkpoint and its epoch counter.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Store tensors as f32 instead of f64.
    #[arg(long)]
    pub f32: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub beam: BeamArgs,
    /// Bucket width for the repair-rate-by-length table.
    #[arg(long)]
    pub length_buckets: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CorrectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Defaults to vocab.txt next to the checkpoint.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Source file to repair.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub beam: BeamArgs,
    #[arg(long, value_enum, default_value_t = Lang::C)]
    pub language: Lang,
    /// Print token-level edit marks instead of plain code.
    #[arg(long)]
    pub diff: bool,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    /// Pretrained repair checkpoint; omitted means a fresh encoder.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Encoded pairs with a `label` field.
    #[arg(long)]
    pub data: PathBuf,
    /// Class list, one name per line; derived from the labels when absent.
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub test_ratio: f64,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[arg(long, default_value = "2,4,8", value_delimiter = ',')]
    pub batch_sizes: Vec<usize>,
    /// Batch size for the throughput measurement.
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 512)]
    pub source_len: usize,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: Option<String>,
    seed: u64,
    inputs: Vec<String>,
    outputs: Vec<String>,
    toolkit_version: &'static str,
    wall_time_s: f64,
}

struct Run<'a> {
    name: &'static str,
    common: &'a Common,
    out: PathBuf,
    inputs: Vec<String>,
    outputs: Vec<String>,
    start: Instant,
}

impl<'a> Run<'a> {
    fn new(name: &'static str, common: &'a Common) -> Res<Self> {
        let out = common.out.clone().unwrap_or_else(|| Path::new("runs").join(name));
        fs::create_dir_all(&out).map_err(|e| CliError::usage(format!("cannot create {}: {e}", out.display())))?;
        Ok(Run {
            name,
            common,
            out,
            inputs: Vec::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        })
    }

    fn input(&mut self, p: &Path) -> Res<()> {
        if !p.exists() {
            return Err(CliError::usage(format!("input not found: {}", p.display())));
        }
        self.inputs.push(p.display().to_string());
        Ok(())
    }

    fn output(&mut self, file: &str) -> PathBuf {
        let p = self.out.join(file);
        self.outputs.push(p.display().to_string());
        p
    }

    fn write_json<T: Serialize>(&mut self, file: &str, v: &T) -> Res<()> {
        let p = self.output(file);
        fs::write(p, serde_json::to_string_pretty(v)?)?;
        Ok(())
    }

    fn finish(mut self, seed: u64) -> Res<()> {
        let path = self.out.join("manifest.json");
        let m = Manifest {
            command: self.name,
            config: self.common.config.as_ref().map(|p| p.display().to_string()),
            seed,
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
            toolkit_version: env!("CARGO_PKG_VERSION"),
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        fs::write(path, serde_json::to_string_pretty(&m)?)?;
        Ok(())
    }
}

fn run_config(common: &Common) -> Res<RunConfig> {
    let mut c = match &common.config {
        Some(p) => {
            if !p.exists() {
                return Err(CliError::usage(format!("config not found: {}", p.display())));
            }
            config::load(p)?
        }
        None => config::parse("")?,
    };
    if let Some(s) = common.seed {
        c.train.seed = s;
    }
    Ok(c)
}

pub fn run(cli: &Cli) -> Res<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(c, a),
        Command::BuildVocab(a) => cmd_build_vocab(c, a),
        Command::Train(a) => cmd_train(c, a),
        Command::Evaluate(a) => cmd_evaluate(c, a),
        Command::Correct(a) => cmd_correct(c, a),
        Command::Classify(a) => cmd_classify(c, a),
        Command::Benchmark(a) => cmd_benchmark(c, a),
    }
}

fn read_raw(path: &Path) -> Res<Vec<RawPair>> {
    Ok(load_jsonl(path)?)
}

fn cmd_preprocess(common: &Common, a: &PreprocessArgs) -> Res<()> {
    let mut run = Run::new("preprocess", common)?;
    let seed = common.seed.unwrap_or(0);
    let raw = match (&a.input, a.synthetic) {
        (Some(p), _) => {
            run.input(p)?;
            read_raw(p)?
        }
        (None, Some(n)) => synthetic::generate(n, seed, &SyntheticOptions::default()),
        (None, None) => return Err(CliError::usage("either --input or --synthetic is required")),
    };
    let opts = PreprocessOptions {
        keep_comments: a.keep_comments,
        rename: !a.no_rename,
        dead_code: match a.dead_code {
            DeadCode::Strip => DeadCodePolicy::Strip,
            DeadCode::Drop => DeadCodePolicy::Drop,
            DeadCode::Keep => DeadCodePolicy::Keep,
        },
        drop_divergent_if: !a.keep_divergent_if,
        max_length: a.max_length,
        min_count: a.min_count,
    };
    let vocab = match &a.vocab {
        Some(p) => {
            run.input(p)?;
            Some(Vocabulary::load(p)?)
        }
        None => None,
    };
    let lang: Language = a.language.into();
    let out = preprocess(&raw, &SyntaxTable::for_language(lang), &default_library_names(lang), &opts, vocab)?;
    save_jsonl(&out.pairs, &run.output("pairs.jsonl"))?;
    out.vocab.save(&run.output("vocab.txt"))?;
    if let Some(spec) = &a.split {
        let parts: Vec<f64> = spec
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::usage(format!("bad --split {spec:?}")))?;
        let [train, test, validation] = parts[..] else {
            return Err(CliError::usage("--split needs three fractions"));
        };
        let (tr, te, va) = split(&out.pairs, &SplitSpec { train, test, validation, seed })?;
        save_jsonl(&tr, &run.output("train.jsonl"))?;
        save_jsonl(&te, &run.output("test.jsonl"))?;
        save_jsonl(&va, &run.output("valid.jsonl"))?;
    }
    let stats = serde_json::json!({
        "input": out.report.input,
        "kept": out.pairs.len(),
        "dropped": out.report.dropped,
        "lex_failures": out.lex_failures.len(),
        "vocab_size": out.vocab.len(),
    });
    run.write_json("stats.json", &stats)?;
    println!("{} pairs written ({} dropped, {} lex failures)", out.pairs.len(), out.report.input - out.report.kept, out.lex_failures.len());
    run.finish(seed)
}

fn cmd_build_vocab(common: &Common, a: &BuildVocabArgs) -> Res<()> {
    let mut run = Run::new("build-vocab", common)?;
    run.input(&a.input)?;
    let raw = read_raw(&a.input)?;
    let lang: Language = a.language.into();
    let opts = PreprocessOptions {
        min_count: a.min_count,
        ..Default::default()
    };
    let out = preprocess(&raw, &SyntaxTable::for_language(lang), &default_library_names(lang), &opts, None)?;
    out.vocab.save(&run.output("vocab.txt"))?;
    println!("{} tokens, hash {}", out.vocab.len(), out.vocab.hash());
    run.finish(common.seed.unwrap_or(0))
}

fn cmd_train(common: &Common, a: &TrainArgs) -> Res<()> {
    let mut run = Run::new("train", common)?;
    let cfg = run_config(common)?;
    run.input(&a.data)?;
    run.input(&a.vocab)?;
    let vocab = Vocabulary::load(&a.vocab)?;
    let train_pairs = load_pairs(&a.data)?;
    let val_pairs = match &a.val {
        Some(p) => {
            run.input(p)?;
            load_pairs(p)?
        }
        None => Vec::new(),
    };
    let (mut model, start_epoch) = match &a.resume {
        Some(p) => {
            run.input(p)?;
            let ck = load_checkpoint(p)?;
            if let Some(w) = ck.vocab_warning(&vocab.hash()) {
                eprintln!("warning: {w}");
            }
            let epoch = ck.metadata.get("epoch").and_then(|e| e.as_u64()).unwrap_or(0) as usize;
            (Seq2Seq::from_checkpoint(&ck)?, epoch)
        }
        None => (Seq2Seq::new(cfg.model_config(vocab.len())?, cfg.train.seed)?, 0),
    };
    for p in train_pairs.iter().chain(&val_pairs) {
        p.validate(model.config.vocab_size)?;
    }
    let mut trainer = Trainer::new(cfg.train.clone())?.resume_at(start_epoch);
    let report = harness::train_with(&mut trainer, &mut model, &train_pairs, &val_pairs, &mut |e, _| {
        println!(
            "epoch {} train_loss {:.5} val_loss {} words/s {:.0}",
            e.epoch,
            e.train_loss,
            e.val_loss.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into()),
            e.words_per_sec
        );
        false
    })?;
    let mut ck = model.to_checkpoint(&vocab.hash());
    ck.metadata = serde_json::json!({ "epoch": trainer.epoch, "converge_epoch": report.converge_epoch });
    let dtype = if a.f32 { Dtype::F32 } else { Dtype::F64 };
    save_checkpoint(&ck, dtype, &run.output("checkpoint.bin"))?;
    vocab.save(&run.output("vocab.txt"))?;
    harness::write_run_log(&run.output("run_log.jsonl"), &report.log)?;
    run.write_json("train_report.json", &report)?;
    run.finish(cfg.train.seed)
}

fn beam_config(b: &BeamArgs, source_len: usize) -> BeamConfig {
    BeamConfig::new(b.beam_width, b.n_best, b.max_len.unwrap_or_else(|| default_max_len(source_len)))
}

fn cmd_evaluate(common: &Common, a: &EvaluateArgs) -> Res<()> {
    let mut run = Run::new("evaluate", common)?;
    run.input(&a.checkpoint)?;
    run.input(&a.data)?;
    let model = Seq2Seq::from_checkpoint(&load_checkpoint(&a.checkpoint)?)?;
    let pairs = load_pairs(&a.data)?;
    if pairs.is_empty() {
        return Err(CliError::usage("test set is empty"));
    }
    for p in &pairs {
        p.validate(model.config.vocab_size)?;
    }
    let longest = pairs.iter().map(CodePair::source_length).max().unwrap_or(0);
    let beam = beam_config(&a.beam, longest);
    let t0 = Instant::now();
    let (mut report, instances) = harness::evaluate(&model, &pairs, &beam, common.jobs.max(1), a.length_buckets)?;
    let words: usize = pairs.iter().map(|p| p.source_tokens.len()).sum();
    report.words_per_sec = Some(words as f64 / t0.elapsed().as_secs_f64().max(1e-9));
    run.write_json("metrics.json", &report)?;
    fs::write(run.output("metrics.csv"), report.to_csv())?;
    save_jsonl(&instances, &run.output("instances.jsonl"))?;
    println!(
        "repair_rate_1 {:.4} repair_rate_5 {:.4} over {} instances",
        report.repair_rate_1, report.repair_rate_5, report.instances
    );
    for b in &report.length_buckets {
        println!("[{}, {}) rate {:.4} count {}", b.start, b.end, b.rate, b.count);
    }
    run.finish(common.seed.unwrap_or(0))
}

/// Lexes one source the way the corpus pipeline does.
fn prepare_source(text: &str, lang: Language) -> Res<(Vec<Token>, RenameMap)> {
    let toks = tokenize_with(text, &SyntaxTable::for_language(lang), TokenizeOptions { keep_comments: false })?;
    let toks = strip_dead_code(&toks);
    let mut map = RenameMap::new();
    let toks = rename_functions_with(&toks, &default_library_names(lang), &mut map);
    Ok((toks, map))
}

fn cmd_correct(common: &Common, a: &CorrectArgs) -> Res<()> {
    let mut run = Run::new("correct", common)?;
    run.input(&a.checkpoint)?;
    run.input(&a.input)?;
    let vocab_path = a
        .vocab
        .clone()
        .unwrap_or_else(|| a.checkpoint.parent().unwrap_or(Path::new(".")).join("vocab.txt"));
    run.input(&vocab_path)?;
    let vocab = Vocabulary::load(&vocab_path)?;
    let ck = load_checkpoint(&a.checkpoint)?;
    if let Some(w) = ck.vocab_warning(&vocab.hash()) {
        eprintln!("warning: {w}");
    }
    let model = Seq2Seq::from_checkpoint(&ck)?;
    let text = fs::read_to_string(&a.input)?;
    let (tokens, map) = prepare_source(&text, a.language.into())?;
    if tokens.is_empty() {
        return Err(CliError::usage("input has no tokens"));
    }
    let ids: Vec<usize> = vocab.encode(&tokens).into_iter().map(|i| i as usize).collect();
    let cands = beam_search(&model, &ids, &beam_config(&a.beam, ids.len()))?;
    let back: HashMap<&str, &str> = map.pairs().iter().map(|(o, c)| (c.as_str(), o.as_str())).collect();
    let restore = |ids: &[usize]| -> Res<Vec<String>> {
        let t = vocab.decode(&ids.iter().map(|&i| i as u32).collect::<Vec<_>>())?;
        Ok(t.iter().map(|t| back.get(t.as_str()).copied().unwrap_or(t.as_str()).to_string()).collect())
    };
    let original: Vec<String> = tokens
        .iter()
        .map(|t| back.get(t.as_str()).copied().unwrap_or(t.as_str()).to_string())
        .collect();
    let mut rows = Vec::new();
    for (rank, c) in cands.iter().enumerate() {
        let toks = restore(&c.ids)?;
        let shown = if a.diff { mark_edits(&original, &toks) } else { toks.concat() };
        println!("#{} score {:.4}{}\n{}\n", rank + 1, c.score, if c.complete { "" } else { " (incomplete)" }, shown);
        rows.push(serde_json::json!({ "rank": rank + 1, "score": c.score, "complete": c.complete, "code": toks.concat() }));
    }
    run.write_json("candidates.json", &rows)?;
    run.finish(common.seed.unwrap_or(0))
}

fn cmd_classify(common: &Common, a: &ClassifyArgs) -> Res<()> {
    let mut run = Run::new("classify", common)?;
    let cfg = run_config(common)?;
    run.input(&a.data)?;
    let pairs = load_pairs(&a.data)?;
    let labels: Vec<&str> = pairs
        .iter()
        .map(|p| p.label.as_deref().ok_or_else(|| CliError::usage(format!("pair {} has no label", p.id))))
        .collect::<Res<_>>()?;
    let classes = match &a.classes {
        Some(p) => {
            run.input(p)?;
            transfer::load_class_list(p)?
        }
        None => transfer::classes_of(labels.iter().copied()),
    };
    transfer::save_class_list(&run.output("classes.txt"), &classes)?;
    let data: Vec<(Vec<usize>, usize)> = pairs
        .iter()
        .zip(&labels)
        .map(|(p, l)| {
            let y = classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| CliError::usage(format!("label {l:?} not in the class list")))?;
            Ok((p.source_tokens.iter().map(|&i| i as usize).collect(), y))
        })
        .collect::<Res<_>>()?;
    let spec = SplitSpec {
        train: 1.0 - a.test_ratio,
        test: a.test_ratio,
        validation: 0.0,
        seed: cfg.train.seed,
    };
    let (train, test, _) = split(&data, &spec)?;
    let pretrained = match &a.checkpoint {
        Some(p) => {
            run.input(p)?;
            Some(Seq2Seq::from_checkpoint(&load_checkpoint(p)?)?)
        }
        None => None,
    };
    let model_cfg: ModelConfig = match &pretrained {
        Some(m) => m.config.clone(),
        None => cfg.model_config(pairs.iter().flat_map(|p| p.source_tokens.iter()).max().map_or(4, |&m| m as usize + 1).max(4))?,
    };
    let mut ccfg: ClassifierConfig = toml::Value::Table(cfg.classifier.clone())
        .try_into()
        .map_err(|e| CliError::usage(format!("config: {e}")))?;
    ccfg.n_class = classes.len();
    let mut clf = Classifier::new(&model_cfg, &ccfg, pretrained.as_ref(), cfg.train.seed)?;
    let report = transfer::train_classifier(&mut clf, &train, &test, &cfg.train)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    save_checkpoint(&clf.to_checkpoint(""), Dtype::F64, &run.output("classifier.bin"))?;
    run.write_json("classify_report.json", &report)?;
    println!(
        "accuracy {:.4} on {} held-out instances ({} classes)",
        report.final_accuracy.unwrap_or(f64::NAN),
        test.len(),
        classes.len()
    );
    run.finish(cfg.train.seed)
}

#[derive(Serialize)]
struct BenchRow {
    variant: &'static str,
    words_per_sec: f64,
    memory: Vec<(f64, f64)>,
    k_mb: Option<f64>,
    e: Option<f64>,
    fit_error: Option<String>,
}

fn cmd_benchmark(common: &Common, a: &BenchmarkArgs) -> Res<()> {
    let mut run = Run::new("benchmark", common)?;
    let cfg = run_config(common)?;
    let base = if cfg.model.is_some() {
        cfg.model_config(64)?
    } else {
        let mut c = ModelConfig::gru(pyrfix::seqcore::AttentionKind::Bahdanau, 4, 128, 64);
        c.window = 2;
        c
    };
    let v = base.vocab_size;
    let batch: Vec<Vec<usize>> = (0..a.batch)
        .map(|i| (0..a.source_len).map(|t| 4 + (i * 5 + t) % (v - 4)).collect())
        .collect();
    let mut rows = Vec::new();
    for (name, pyramid) in [("pyramid", true), ("regular", false)] {
        let model = Seq2Seq::new(base.clone().with_pyramid(pyramid), cfg.train.seed)?;
        let wps = harness::encoder_throughput(&model, &batch, a.repeats)?;
        let memory = harness::encoder_memory_samples(&model, &a.batch_sizes, a.source_len)?;
        let (k, e, err) = match harness::memory_cost_fit(&memory) {
            Ok(f) => (Some(f.k), Some(f.e), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        println!(
            "{name}: {wps:.0} words/s, k {} MB/instance",
            k.map(|k| format!("{k:.4}")).unwrap_or_else(|| "n/a".into())
        );
        rows.push(BenchRow {
            variant: name,
            words_per_sec: wps,
            memory,
            k_mb: k,
            e,
            fit_error: err,
        });
    }
    let ratio = rows[0].words_per_sec / rows[1].words_per_sec;
    println!("throughput ratio pyramid/regular {ratio:.3}");
    let mut csv = String::from("variant,batch,peak_mb\n");
    for r in &rows {
        for (b, m) in &r.memory {
            csv += &format!("{},{b},{m}\n", r.variant);
        }
    }
    fs::write(run.output("memory.csv"), csv)?;
    run.write_json("benchmark.json", &serde_json::json!({ "ratio": ratio, "config": base, "rows": rows }))?;
    let fit_errors: Vec<&String> = rows.iter().filter_map(|r| r.fit_error.as_ref()).collect();
    run.finish(cfg.train.seed)?;
    if let Some(e) = fit_errors.first() {
        return Err(CliError::Runtime(format!("memory fit: {e}")));
    }
    Ok(())
}
