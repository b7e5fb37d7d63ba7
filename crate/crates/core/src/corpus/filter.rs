use std::collections::BTreeMap;

use super::TextPair;
use crate::codetok::Token;

/// A named drop rule.
pub struct Predicate<'a> {
    pub name: String,
    test: Box<dyn Fn(&TextPair) -> bool + 'a>,
}

impl<'a> Predicate<'a> {
    pub fn new(name: impl Into<String>, test: impl Fn(&TextPair) -> bool + 'a) -> Self {
        Predicate {
            name: name.into(),
            test: Box::new(test),
        }
    }

    pub fn flags(&self, pair: &TextPair) -> bool {
        (self.test)(pair)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    /// Drops per predicate name; a pair counts under the first predicate
    /// that flags it.
    pub dropped: BTreeMap<String, usize>,
}

/// Keeps pairs no predicate flags. Surviving pairs are returned unchanged.
pub fn filter_pairs(pairs: Vec<TextPair>, predicates: &[Predicate]) -> (Vec<TextPair>, FilterReport) {
    let mut report = FilterReport {
        input: pairs.len(),
        ..FilterReport::default()
    };
    for p in predicates {
        report.dropped.insert(p.name.clone(), 0);
    }
    let kept: Vec<TextPair> = pairs
        .into_iter()
        .filter(|pair| match predicates.iter().find(|p| p.flags(pair)) {
            Some(p) => {
                *report.dropped.get_mut(&p.name).unwrap() += 1;
                false
            }
            None => true,
        })
        .collect();
    report.kept = kept.len();
    (kept, report)
}

pub fn max_length<'a>(cutoff: usize) -> Predicate<'a> {
    Predicate::new("max_length", move |p| p.source.len() > cutoff)
}

/// Flags pairs whose source or any target contains unreachable statements.
pub fn dead_code<'a>() -> Predicate<'a> {
    Predicate::new("dead_code", |p| {
        has_dead_code(&p.source) || p.targets.iter().any(|t| has_dead_code(t))
    })
}

/// Flags pairs where every reference only edits one `if` condition.
pub fn divergent_if<'a>() -> Predicate<'a> {
    Predicate::new("divergent_if", |p| {
        !p.targets.is_empty() && p.targets.iter().all(|t| is_divergent_if(&p.source, t))
    })
}

fn significant(tokens: &[Token], from: usize) -> Option<usize> {
    (from..tokens.len()).find(|&i| {
        let s = tokens[i].as_str();
        !(s == " " || s.starts_with("//") || s.starts_with("/*"))
    })
}

fn prev_significant(tokens: &[Token], before: usize) -> Option<usize> {
    (0..before).rev().find(|&i| {
        let s = tokens[i].as_str();
        !(s == " " || s.starts_with("//") || s.starts_with("/*"))
    })
}

/// `(start, end)` token ranges of statements that follow an unconditional
/// `return`, `break`, `continue` or `goto` in the same block, up to the
/// block's closing brace or the next `case`/`default` label.
fn dead_ranges(tokens: &[Token]) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let s = tokens[i].as_str();
        let jump = matches!(s, "return" | "break" | "continue" | "goto");
        let at_statement_start = prev_significant(tokens, i)
            .is_none_or(|p| matches!(tokens[p].as_str(), ";" | "{" | "}"));
        if !(jump && at_statement_start) {
            i += 1;
            continue;
        }
        // end of the jump statement
        let mut depth = 0i32;
        let mut j = i + 1;
        while j < tokens.len() {
            match tokens[j].as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                ";" if depth == 0 => break,
                _ => {}
            }
            if depth < 0 {
                break;
            }
            j += 1;
        }
        if j >= tokens.len() || tokens[j].as_str() != ";" {
            i = j;
            continue;
        }
        let Some(start) = significant(tokens, j + 1) else {
            break;
        };
        let mut depth = 0i32;
        let mut end = start;
        while end < tokens.len() {
            let t = tokens[end].as_str();
            match t {
                "{" | "(" | "[" => depth += 1,
                "}" | ")" | "]" if depth == 0 => break,
                "}" | ")" | "]" => depth -= 1,
                "case" | "default" if depth == 0 => break,
                _ => {}
            }
            end += 1;
        }
        if end > start {
            ranges.push((start, end));
        }
        i = end.max(j + 1);
    }
    ranges
}

pub fn has_dead_code(tokens: &[Token]) -> bool {
    !dead_ranges(tokens).is_empty()
}

/// Removes unreachable statements and merges the spaces left behind.
pub fn strip_dead_code(tokens: &[Token]) -> Vec<Token> {
    let ranges = dead_ranges(tokens);
    let mut out: Vec<Token> = Vec::with_capacity(tokens.len());
    let mut r = ranges.iter().peekable();
    let mut i = 0;
    while i < tokens.len() {
        if let Some(&&(s, e)) = r.peek() {
            if i == s {
                i = e;
                r.next();
                continue;
            }
        }
        let t = &tokens[i];
        if !(t.is_space() && out.last().is_some_and(Token::is_space)) {
            out.push(t.clone());
        }
        i += 1;
    }
    out
}

/// `(open, close)` indices of the parentheses of every `if` condition.
fn if_conditions(tokens: &[Token]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.as_str() != "if" {
            continue;
        }
        let Some(open) = significant(tokens, i + 1) else {
            continue;
        };
        if tokens[open].as_str() != "(" {
            continue;
        }
        let mut depth = 0;
        for (k, t) in tokens.iter().enumerate().skip(open) {
            match t.as_str() {
                "(" => depth += 1,
                ")" => {
                    depth -= 1;
                    if depth == 0 {
                        out.push((open, k));
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// True when `source` and `target` differ and the differing span lies inside
/// one `if` condition in both.
pub fn is_divergent_if(source: &[Token], target: &[Token]) -> bool {
    if source == target {
        return false;
    }
    let prefix = source.iter().zip(target).take_while(|(a, b)| a == b).count();
    let max_suffix = source.len().min(target.len()) - prefix;
    let suffix = source
        .iter()
        .rev()
        .zip(target.iter().rev())
        .take(max_suffix)
        .take_while(|(a, b)| a == b)
        .count();
    let inside = |tokens: &[Token]| {
        let (lo, hi) = (prefix, tokens.len() - suffix);
        if_conditions(tokens)
            .iter()
            .any(|&(open, close)| open < lo && hi <= close)
    };
    inside(source) && inside(target)
}
