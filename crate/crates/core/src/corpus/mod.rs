//! Flawed/repaired code pairs: JSONL storage, cleanup filters, seeded
//! splits and a synthetic mutate-repair generator.

mod filter;
mod preprocess;
pub mod synthetic;

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use filter::{
    dead_code, divergent_if, filter_pairs, has_dead_code, is_divergent_if, max_length,
    strip_dead_code, FilterReport, Predicate,
};
pub use preprocess::{preprocess, DeadCodePolicy, PreprocessOptions, PreprocessOutput};

use crate::codetok::{Token, TokenId, Vocabulary};
use crate::error::{Error, Result};

/// One flawed instance with its reference repairs, as vocabulary ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodePair {
    pub id: String,
    pub source_tokens: Vec<TokenId>,
    pub targets: Vec<Vec<TokenId>>,
    pub label: Option<String>,
}

impl CodePair {
    pub fn source_length(&self) -> usize {
        self.source_tokens.len()
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Config(format!("pair {} has no targets", self.id)));
        }
        let ids = self.source_tokens.iter().chain(self.targets.iter().flatten());
        for &id in ids {
            if id as usize >= vocab_size {
                return Err(Error::IdOutOfRange {
                    id: id as usize,
                    size: vocab_size,
                });
            }
        }
        Ok(())
    }
}

/// A pair before vocabulary encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextPair {
    pub id: String,
    pub source: Vec<Token>,
    pub targets: Vec<Vec<Token>>,
    pub label: Option<String>,
}

impl TextPair {
    pub fn encode(&self, vocab: &Vocabulary) -> CodePair {
        CodePair {
            id: self.id.clone(),
            source_tokens: vocab.encode(&self.source),
            targets: self.targets.iter().map(|t| vocab.encode(t)).collect(),
            label: self.label.clone(),
        }
    }
}

/// Raw source text pairs, the input of preprocessing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPair {
    pub id: String,
    pub source: String,
    pub targets: Vec<String>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            test: 0.1,
            validation: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.test, self.validation];
        if r.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Config(format!("split ratios out of [0,1]: {r:?}")));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios do not sum to 1: {r:?}")));
        }
        Ok(())
    }

    /// `(train, test, validation)` sizes for `n` items: floors for test and
    /// validation, remainder to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |r: f64| ((n as f64 * r) + 1e-9).floor() as usize;
        let test = floor(self.test).min(n);
        let val = floor(self.validation).min(n - test);
        (n - test - val, test, val)
    }
}

/// Seeded shuffle then partition into `(train, test, validation)`.
pub fn split<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    spec.validate()?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (n_train, n_test, _) = spec.sizes(items.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_test]),
        pick(&order[n_train + n_test..]),
    ))
}

pub fn save_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// One object per line; blank lines are skipped. Errors carry the 1-based
/// line number.
pub fn load_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn load_pairs(path: &Path) -> Result<Vec<CodePair>> {
    let pairs: Vec<CodePair> = load_jsonl(path)?;
    for (i, p) in pairs.iter().enumerate() {
        if p.targets.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("pair {} has no targets", p.id),
            });
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(n: usize) -> Vec<CodePair> {
        (0..n)
            .map(|i| CodePair {
                id: format!("p{i}"),
                source_tokens: vec![4, 5, i as TokenId % 7],
                targets: vec![vec![4], vec![5, 6]],
                label: (i % 2 == 0).then(|| "double_free".to_string()),
            })
            .collect()
    }

    #[test]
    fn split_sizes() {
        let s = SplitSpec {
            seed: 7,
            ..SplitSpec::default()
        };
        assert_eq!(s.sizes(10), (8, 1, 1));
        assert_eq!(s.sizes(31), (25, 3, 3));
        assert_eq!(s.sizes(2), (2, 0, 0));
        let (a, b, c) = split(&pairs(10), &s).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (8, 1, 1));
    }

    #[test]
    fn split_is_deterministic() {
        let s = SplitSpec::default();
        let ids = |v: &[CodePair]| v.iter().map(|p| p.id.clone()).collect::<Vec<_>>();
        let (a1, b1, c1) = split(&pairs(50), &s).unwrap();
        let (a2, b2, c2) = split(&pairs(50), &s).unwrap();
        assert_eq!((ids(&a1), ids(&b1), ids(&c1)), (ids(&a2), ids(&b2), ids(&c2)));
    }

    #[test]
    fn invalid_ratios_rejected() {
        let s = SplitSpec {
            train: 0.8,
            test: 0.3,
            validation: 0.1,
            seed: 0,
        };
        assert!(split(&pairs(3), &s).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.jsonl");
        let data = pairs(5);
        save_jsonl(&data, &p).unwrap();
        assert_eq!(load_pairs(&p).unwrap(), data);

        fs::write(&p, "").unwrap();
        assert!(load_pairs(&p).unwrap().is_empty());

        fs::write(
            &p,
            "{\"id\":\"a\",\"source_tokens\":[1],\"targets\":[[1]],\"label\":null}\n{\"id\":\"b\",\"source_tokens\":[1],\"label\":null}\n",
        )
        .unwrap();
        assert!(matches!(load_pairs(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn validate_checks_ids_and_targets() {
        let mut p = pairs(1).remove(0);
        assert!(p.validate(10).is_ok());
        assert!(p.validate(6).is_err());
        p.targets.clear();
        assert!(p.validate(10).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_the_input(n in 0usize..200, seed in 0u64..50, t in 0.0f64..0.5, v in 0.0f64..0.5) {
            let spec = SplitSpec { train: 1.0 - t - v, test: t, validation: v, seed };
            let items: Vec<usize> = (0..n).collect();
            let (a, b, c) = split(&items, &spec).unwrap();
            let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
            all.sort();
            prop_assert_eq!(all, items);
            prop_assert_eq!(b.len(), (n as f64 * t + 1e-9).floor() as usize);
        }
    }
}
