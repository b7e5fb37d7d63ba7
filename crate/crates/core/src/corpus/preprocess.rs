use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::filter::{dead_code, divergent_if, filter_pairs, max_length, strip_dead_code, FilterReport, Predicate};
use super::{CodePair, RawPair, TextPair};
use crate::codetok::{
    build_vocabulary, rename_functions_with, tokenize_with, RenameMap, SyntaxTable, TokenizeOptions,
    Vocabulary,
};
use crate::error::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadCodePolicy {
    /// Remove unreachable statements and keep the pair.
    #[default]
    Strip,
    /// Drop pairs containing unreachable statements.
    Drop,
    Keep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessOptions {
    pub keep_comments: bool,
    pub rename: bool,
    pub dead_code: DeadCodePolicy,
    pub drop_divergent_if: bool,
    pub max_length: Option<usize>,
    pub min_count: usize,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            keep_comments: false,
            rename: true,
            dead_code: DeadCodePolicy::Strip,
            drop_divergent_if: true,
            max_length: None,
            min_count: 1,
        }
    }
}

pub struct PreprocessOutput {
    pub pairs: Vec<CodePair>,
    pub vocab: Vocabulary,
    pub report: FilterReport,
    /// Pairs that failed to lex, with the error message.
    pub lex_failures: Vec<(String, String)>,
}

/// Tokenizes, renames functions (one map shared by a flawed instance and its
/// repairs), cleans, filters and encodes. Builds a vocabulary from the
/// surviving pairs unless one is supplied.
pub fn preprocess(
    raw: &[RawPair],
    table: &SyntaxTable,
    library: &HashSet<String>,
    opts: &PreprocessOptions,
    vocab: Option<Vocabulary>,
) -> Result<PreprocessOutput> {
    let tok_opts = TokenizeOptions {
        keep_comments: opts.keep_comments,
    };
    let mut text_pairs = Vec::with_capacity(raw.len());
    let mut lex_failures = Vec::new();
    'pairs: for r in raw {
        let mut map = RenameMap::new();
        let mut lex = |s: &str| -> Result<_> {
            let mut t = tokenize_with(s, table, tok_opts)?;
            if opts.dead_code == DeadCodePolicy::Strip {
                t = strip_dead_code(&t);
            }
            if opts.rename {
                t = rename_functions_with(&t, library, &mut map);
            }
            Ok(t)
        };
        let source = match lex(&r.source) {
            Ok(t) => t,
            Err(e) => {
                lex_failures.push((r.id.clone(), e.to_string()));
                continue;
            }
        };
        let mut targets = Vec::with_capacity(r.targets.len());
        for t in &r.targets {
            match lex(t) {
                Ok(t) => targets.push(t),
                Err(e) => {
                    lex_failures.push((r.id.clone(), e.to_string()));
                    continue 'pairs;
                }
            }
        }
        text_pairs.push(TextPair {
            id: r.id.clone(),
            source,
            targets,
            label: r.label.clone(),
        });
    }
    let mut predicates: Vec<Predicate> = Vec::new();
    if opts.dead_code == DeadCodePolicy::Drop {
        predicates.push(dead_code());
    }
    if opts.drop_divergent_if {
        predicates.push(divergent_if());
    }
    if let Some(n) = opts.max_length {
        predicates.push(max_length(n));
    }
    let (kept, report) = filter_pairs(text_pairs, &predicates);
    let vocab = vocab.unwrap_or_else(|| {
        build_vocabulary(
            kept.iter()
                .flat_map(|p| std::iter::once(&p.source).chain(&p.targets))
                .map(|t| t.iter().map(|x| x.as_str())),
            opts.min_count,
        )
    });
    let pairs = kept.iter().map(|p| p.encode(&vocab)).collect();
    Ok(PreprocessOutput {
        pairs,
        vocab,
        report,
        lex_failures,
    })
}
