use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Java,
}

const C_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "bool", "true", "false", "class",
    "namespace", "new", "delete", "template", "typename", "public", "private", "protected",
    "virtual", "try", "catch", "throw", "using", "this", "nullptr", "operator", "NULL",
    "wchar_t", "size_t",
];

const JAVA_KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally",
    "float", "for", "goto", "if", "implements", "import", "instanceof", "int", "interface",
    "long", "native", "new", "package", "private", "protected", "public", "return", "short",
    "static", "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
    "transient", "try", "void", "volatile", "while", "true", "false", "null",
];

const C_OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "->*", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", "##", ".*",
];

const JAVA_OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::",
];

/// Keywords plus multi-character operators of one language.
#[derive(Clone, Debug)]
pub struct SyntaxTable {
    entries: Vec<String>,
    /// Non-identifier entries, longest first.
    operators: Vec<String>,
    keywords: HashSet<String>,
}

impl SyntaxTable {
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries: Vec<String> = entries
            .into_iter()
            .map(Into::into)
            .filter(|e| !e.is_empty())
            .collect();
        let is_word = |e: &str| e.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        let mut operators: Vec<String> = entries.iter().filter(|e| !is_word(e)).cloned().collect();
        operators.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        operators.dedup();
        let keywords = entries.iter().filter(|e| is_word(e)).cloned().collect();
        SyntaxTable {
            entries,
            operators,
            keywords,
        }
    }

    pub fn c() -> Self {
        Self::from_entries(C_KEYWORDS.iter().chain(C_OPERATORS).copied())
    }

    pub fn java() -> Self {
        Self::from_entries(JAVA_KEYWORDS.iter().chain(JAVA_OPERATORS).copied())
    }

    pub fn for_language(lang: Language) -> Self {
        match lang {
            Language::C => Self::c(),
            Language::Java => Self::java(),
        }
    }

    /// One entry per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(Self::from_entries(text.lines().map(str::trim_end)))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(e);
            s.push('\n');
        }
        s
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn is_keyword(&self, word: &str) -> bool {
        self.keywords.contains(word)
    }

    /// Longest operator that prefixes `rest`, if any has two or more chars.
    pub fn longest_operator<'a>(&self, rest: &'a str) -> Option<&'a str> {
        self.operators
            .iter()
            .find(|op| rest.starts_with(op.as_str()))
            .map(|op| &rest[..op.len()])
    }
}

const C_LIBRARY: &[&str] = &[
    "malloc", "calloc", "realloc", "free", "memset", "memcpy", "memmove", "memcmp", "strlen",
    "strcpy", "strncpy", "strcat", "strncat", "strcmp", "strncmp", "strchr", "strstr", "sprintf",
    "snprintf", "printf", "fprintf", "scanf", "sscanf", "fscanf", "fgets", "fputs", "puts",
    "fopen", "fclose", "fread", "fwrite", "exit", "abort", "atoi", "atol", "atof", "strtol",
    "rand", "srand", "time", "getenv", "system", "assert", "sizeof", "wcslen", "wcscpy",
    "wcsncpy", "wcscat", "wcsncat", "wmemset", "wcscmp", "alloca", "ALLOCA", "GETENV",
    "printLine", "printIntLine", "printLongLine", "printLongLongLine", "printUnsignedLine",
    "printHexCharLine", "printWLine", "printSizeTLine", "printFloatLine", "printDoubleLine",
    "printStructLine", "printBytesLine", "globalReturnsTrue", "globalReturnsFalse",
    "globalReturnsTrueOrFalse", "_spawnl", "_execl", "execl", "popen", "pclose", "recv", "send",
    "socket", "connect", "bind", "listen", "accept", "close", "CLOSE_SOCKET", "htons", "inet_addr",
    "delete",
];

const JAVA_LIBRARY: &[&str] = &[
    "println", "print", "printf", "format", "equals", "hashCode", "toString", "length", "size",
    "get", "set", "add", "remove", "contains", "parseInt", "valueOf", "getProperty", "getenv",
    "readLine", "close", "trim", "substring", "charAt", "indexOf", "writeLine", "printLine",
    "getParameter", "getCookies", "getValue", "nextInt", "executeQuery", "prepareStatement",
];

/// Keyword of any supported language; keywords are never function names.
pub(crate) fn is_any_keyword(word: &str) -> bool {
    C_KEYWORDS.contains(&word) || JAVA_KEYWORDS.contains(&word)
}

/// Names never renamed: standard-library and test-harness helpers.
pub fn default_library_names(lang: Language) -> HashSet<String> {
    let list = match lang {
        Language::C => C_LIBRARY,
        Language::Java => JAVA_LIBRARY,
    };
    list.iter().map(|s| s.to_string()).collect()
}
