//! Word-level lexing of source code.
//!
//! A "word" is any syntax entity: identifier, keyword, literal, comment,
//! operator from the syntax table, or a single space. Whitespace runs
//! (newlines included) collapse to one space token, which gives every
//! snippet a deterministic compact form.

mod rename;
mod syntax;
mod vocab;

use std::fmt;

pub use rename::{rename_functions, rename_functions_with, RenameMap, CANONICAL_PREFIX};
pub use syntax::{default_library_names, Language, SyntaxTable};
pub use vocab::{build_vocabulary, TokenId, Vocabulary, EOS, PAD, RESERVED, SOS, UNK};

use crate::error::{Error, Result};

/// One syntax entity. Never empty and never contains a newline.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() || text.contains('\n') {
            return Err(Error::Lex {
                offset: 0,
                message: format!("invalid token text {text:?}"),
            });
        }
        Ok(Token(text))
    }

    pub fn space() -> Self {
        Token(" ".to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_space(&self) -> bool {
        self.0 == " "
    }

    pub fn is_identifier(&self) -> bool {
        let mut chars = self.0.chars();
        matches!(chars.next(), Some(c) if is_ident_start(c)) && chars.all(is_ident_continue)
    }

    pub(crate) fn from_trusted(text: String) -> Self {
        debug_assert!(!text.is_empty() && !text.contains('\n'));
        Token(text)
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenizeOptions {
    /// Emit comments as single tokens; when false each comment becomes
    /// whitespace.
    pub keep_comments: bool,
}

impl Default for TokenizeOptions {
    fn default() -> Self {
        TokenizeOptions {
            keep_comments: true,
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

/// Lexes `source` with comments kept.
pub fn tokenize(source: &str, table: &SyntaxTable) -> Result<Vec<Token>> {
    tokenize_with(source, table, TokenizeOptions::default())
}

pub fn tokenize_with(source: &str, table: &SyntaxTable, opts: TokenizeOptions) -> Result<Vec<Token>> {
    let mut lexer = Lexer {
        src: source,
        pos: 0,
        out: Vec::new(),
    };
    while lexer.pos < source.len() {
        let rest = &source[lexer.pos..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            lexer.skip_while(char::is_whitespace);
            lexer.push_space();
        } else if rest.starts_with("//") {
            let end = rest.find('\n').unwrap_or(rest.len());
            let text = rest[..end].trim_end();
            lexer.pos += text.len();
            lexer.push_comment(&collapse_whitespace(text), opts);
        } else if rest.starts_with("/*") {
            let Some(close) = rest[2..].find("*/") else {
                return Err(lex_error(lexer.pos, "unterminated block comment"));
            };
            let text = &rest[..close + 4];
            lexer.pos += text.len();
            lexer.push_comment(&collapse_whitespace(text), opts);
        } else if c == '"' || c == '\'' {
            lexer.quoted(c)?;
        } else if is_ident_start(c) {
            let start = lexer.pos;
            lexer.skip_while(is_ident_continue);
            lexer.push(&source[start..lexer.pos]);
        } else if c.is_ascii_digit()
            || (c == '.' && rest[1..].starts_with(|d: char| d.is_ascii_digit()))
        {
            lexer.number();
        } else if let Some(op) = table.longest_operator(rest) {
            lexer.pos += op.len();
            lexer.push(op);
        } else {
            lexer.pos += c.len_utf8();
            lexer.push(&rest[..c.len_utf8()]);
        }
    }
    Ok(lexer.out)
}

fn lex_error(offset: usize, message: &str) -> Error {
    Error::Lex {
        offset,
        message: message.to_string(),
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    out: Vec<Token>,
}

impl Lexer<'_> {
    fn skip_while(&mut self, f: impl Fn(char) -> bool) {
        let rest = &self.src[self.pos..];
        let len = rest.find(|c: char| !f(c)).unwrap_or(rest.len());
        self.pos += len;
    }

    fn push(&mut self, text: &str) {
        self.out.push(Token::from_trusted(text.to_string()));
    }

    fn push_space(&mut self) {
        if !self.out.last().is_some_and(Token::is_space) {
            self.out.push(Token::space());
        }
    }

    fn push_comment(&mut self, text: &str, opts: TokenizeOptions) {
        if opts.keep_comments {
            self.push(text);
        } else {
            self.push_space();
        }
    }

    fn quoted(&mut self, quote: char) -> Result<()> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = start + 1;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' if bytes.get(i + 1) == Some(&b'\n') => break,
                b'\\' => i += 2,
                b'\n' => break,
                b if b == quote as u8 => {
                    self.pos = i + 1;
                    let text = &self.src[start..self.pos];
                    self.push(text);
                    return Ok(());
                }
                _ => i += 1,
            }
        }
        let what = if quote == '"' { "string" } else { "character" };
        Err(lex_error(start, &format!("unterminated {what} literal")))
    }

    fn number(&mut self) {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = start;
        while i < bytes.len() {
            let b = bytes[i];
            let exp_sign = (b == b'+' || b == b'-')
                && i > start
                && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P')
                && !self.src[start..i].starts_with("0x")
                && !self.src[start..i].starts_with("0X");
            if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || exp_sign {
                i += 1;
            } else {
                break;
            }
        }
        self.pos = i;
        self.push(&self.src[start..i]);
    }
}

fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_ws = false;
    for c in text.chars() {
        if c.is_whitespace() {
            if !in_ws {
                out.push(' ');
            }
            in_ws = true;
        } else {
            out.push(c);
            in_ws = false;
        }
    }
    out
}

/// Concatenation of token texts.
pub fn detokenize(tokens: &[Token]) -> String {
    tokens.iter().map(Token::as_str).collect()
}

/// Collapses whitespace runs outside string and character literals to a
/// single space. Inputs that fail to lex are collapsed naively.
pub fn normalize_whitespace(source: &str) -> String {
    let mut out = String::with_capacity(source.len());
    let mut chars = source.chars().peekable();
    let mut in_ws = false;
    let mut in_line_comment = false;
    let mut in_block_comment = false;
    let mut prev = '\0';
    while let Some(c) = chars.next() {
        if in_line_comment && c == '\n' {
            in_line_comment = false;
        }
        if c.is_whitespace() {
            if !in_ws {
                out.push(' ');
            }
            in_ws = true;
            prev = c;
            continue;
        }
        in_ws = false;
        out.push(c);
        if in_block_comment {
            if prev == '*' && c == '/' {
                in_block_comment = false;
                prev = '\0';
                continue;
            }
        } else if !in_line_comment {
            if c == '/' && chars.peek() == Some(&'/') {
                in_line_comment = true;
            } else if c == '/' && chars.peek() == Some(&'*') {
                out.push('*');
                chars.next();
                in_block_comment = true;
                prev = '\0';
                continue;
            } else if c == '"' || c == '\'' {
                while let Some(d) = chars.next() {
                    out.push(d);
                    if d == '\\' {
                        if let Some(e) = chars.next() {
                            out.push(e);
                        }
                    } else if d == c || d == '\n' {
                        break;
                    }
                }
            }
        }
        prev = c;
    }
    out
}
