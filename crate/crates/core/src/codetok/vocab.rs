use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::Token;
use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const SOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const UNK: TokenId = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<sos>", "<eos>", "<unk>"];

/// Dense token/id map. Ids 0..4 are the reserved markers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocabulary {
    /// Reserved markers followed by `tokens`; duplicates and reserved
    /// strings are skipped.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for r in RESERVED {
            v.push(r.to_string());
        }
        for t in tokens {
            let t = t.into();
            if !v.index.contains_key(&t) {
                v.push(t);
            }
        }
        v
    }

    fn push(&mut self, t: String) {
        self.index.insert(t.clone(), self.tokens.len() as TokenId);
        self.tokens.push(t);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn lookup(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token_of(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode<T: AsRef<str>>(&self, tokens: &[T]) -> Vec<TokenId> {
        tokens
            .iter()
            .map(|t| self.lookup(t.as_ref()).unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<Token>> {
        ids.iter()
            .map(|&id| {
                self.token_of(id)
                    .map(|s| Token::from_trusted(s.to_string()))
                    .ok_or(Error::IdOutOfRange {
                        id: id as usize,
                        size: self.len(),
                    })
            })
            .collect()
    }

    /// Decodes and joins, dropping PAD/SOS/EOS.
    pub fn decode_to_string(&self, ids: &[TokenId]) -> Result<String> {
        let body: Vec<TokenId> = ids
            .iter()
            .copied()
            .filter(|&i| i != PAD && i != SOS && i != EOS)
            .collect();
        Ok(super::detokenize(&self.decode(&body)?))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(&escape(t));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: "<vocabulary>".into(),
            line,
            message,
        };
        let lines: Vec<&str> = text.lines().collect();
        for (i, r) in RESERVED.iter().enumerate() {
            if lines.get(i) != Some(r) {
                return Err(parse_err(i + 1, format!("expected reserved token {r}")));
            }
        }
        let mut tokens = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate().skip(RESERVED.len()) {
            let t = unescape(line).ok_or_else(|| parse_err(i + 1, format!("bad escape in {line:?}")))?;
            if t.is_empty() {
                return Err(parse_err(i + 1, "empty token".into()));
            }
            tokens.push(t);
        }
        let n = tokens.len();
        let v = Self::from_tokens(tokens);
        if v.len() != n + RESERVED.len() {
            return Err(parse_err(0, "duplicate tokens".into()));
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }

    /// Hex sha256 of the file form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn escape(t: &str) -> String {
    if t == " " {
        return "\\s".to_string();
    }
    t.replace('\\', "\\\\")
}

fn unescape(line: &str) -> Option<String> {
    if line == "\\s" {
        return Some(" ".to_string());
    }
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next()? {
                '\\' => out.push('\\'),
                _ => return None,
            }
        } else {
            out.push(c);
        }
    }
    Some(out)
}

/// Reserved markers plus every token seen at least `min_count` times,
/// ordered by descending frequency then first occurrence.
pub fn build_vocabulary<I, L, T>(corpus: I, min_count: usize) -> Vocabulary
where
    I: IntoIterator<Item = L>,
    L: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    let min_count = min_count.max(1);
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    let mut order = 0usize;
    for line in corpus {
        for t in line {
            let t = t.as_ref();
            if RESERVED.contains(&t) {
                continue;
            }
            counts
                .entry(t.to_string())
                .and_modify(|e| e.0 += 1)
                .or_insert_with(|| {
                    order += 1;
                    (1, order)
                });
        }
    }
    let mut entries: Vec<(String, usize, usize)> = counts
        .into_iter()
        .filter(|(_, (c, _))| *c >= min_count)
        .map(|(t, (c, o))| (t, c, o))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    Vocabulary::from_tokens(entries.into_iter().map(|e| e.0))
}
