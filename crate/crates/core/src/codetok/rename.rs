use std::collections::{HashMap, HashSet};

use super::syntax::is_any_keyword;
use super::Token;

pub const CANONICAL_PREFIX: &str = "FUNC_";

/// Original function name to canonical `FUNC_k`, in first-occurrence order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RenameMap {
    pairs: Vec<(String, String)>,
    forward: HashMap<String, usize>,
    taken: HashSet<String>,
}

impl RenameMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, original: &str) -> Option<&str> {
        self.forward.get(original).map(|&i| self.pairs[i].1.as_str())
    }

    fn assign(&mut self, original: &str) -> &str {
        if let Some(&i) = self.forward.get(original) {
            return &self.pairs[i].1;
        }
        let mut k = self.pairs.len() + 1;
        let canonical = loop {
            let c = format!("{CANONICAL_PREFIX}{k}");
            if !self.taken.contains(&c) {
                break c;
            }
            k += 1;
        };
        self.taken.insert(canonical.clone());
        self.forward.insert(original.to_string(), self.pairs.len());
        self.pairs.push((original.to_string(), canonical));
        &self.pairs.last().unwrap().1
    }
}

fn is_canonical(name: &str) -> bool {
    name.strip_prefix(CANONICAL_PREFIX)
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Renames user-defined functions to `FUNC_1, FUNC_2, ..` in order of first
/// appearance.
///
/// A function is an identifier followed by `(` (optionally after one space
/// token) at a declaration or call site, excluding `main`, keywords, names
/// in `library`, member calls after `.` or `->`, and names already in
/// canonical form. Once identified, every occurrence of the name is renamed.
pub fn rename_functions(tokens: &[Token], library: &HashSet<String>) -> (Vec<Token>, RenameMap) {
    let mut map = RenameMap::new();
    let out = rename_functions_with(tokens, library, &mut map);
    (out, map)
}

/// Like [`rename_functions`] but extends an existing map, so a flawed
/// snippet and its repairs share one renaming.
pub fn rename_functions_with(
    tokens: &[Token],
    library: &HashSet<String>,
    map: &mut RenameMap,
) -> Vec<Token> {
    for t in tokens {
        if is_canonical(t.as_str()) {
            map.taken.insert(t.as_str().to_string());
        }
    }
    for (i, t) in tokens.iter().enumerate() {
        let name = t.as_str();
        if !t.is_identifier()
            || name == "main"
            || is_any_keyword(name)
            || library.contains(name)
            || is_canonical(name)
        {
            continue;
        }
        let next = match tokens.get(i + 1) {
            Some(n) if n.is_space() => tokens.get(i + 2),
            other => other,
        };
        if next.map(Token::as_str) != Some("(") {
            continue;
        }
        let prev = match i.checked_sub(1).map(|p| &tokens[p]) {
            Some(p) if p.is_space() => i.checked_sub(2).map(|p| &tokens[p]),
            other => other,
        };
        if matches!(prev.map(Token::as_str), Some("." | "->")) {
            continue;
        }
        map.assign(name);
    }
    tokens
        .iter()
        .map(|t| match map.get(t.as_str()) {
            Some(c) => Token::from_trusted(c.to_string()),
            None => t.clone(),
        })
        .collect()
}
