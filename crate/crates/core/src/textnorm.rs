//! Language-aware tokenization.
//!
//! Every lexical metric consumes a [`TokenSequence`]. Chinese is split into
//! single CJK characters; all other languages split on whitespace with
//! punctuation detached into its own tokens. Lowercasing follows the
//! language's casing rules (Turkish dotted/dotless i).

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Language of a summary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LangCode {
    En,
    Id,
    Fr,
    Tr,
    Zh,
    Ru,
    De,
    Es,
    /// Any other code; tokenized with the default rules.
    Other(String),
}

impl LangCode {
    /// The eight languages with built-in rules, in table order.
    pub const BUILTIN: [LangCode; 8] = [
        LangCode::En,
        LangCode::Id,
        LangCode::Fr,
        LangCode::Tr,
        LangCode::Zh,
        LangCode::Ru,
        LangCode::De,
        LangCode::Es,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            LangCode::En => "en",
            LangCode::Id => "id",
            LangCode::Fr => "fr",
            LangCode::Tr => "tr",
            LangCode::Zh => "zh",
            LangCode::Ru => "ru",
            LangCode::De => "de",
            LangCode::Es => "es",
            LangCode::Other(code) => code,
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self, LangCode::Other(_))
    }
}

impl FromStr for LangCode {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "en" => LangCode::En,
            "id" => LangCode::Id,
            "fr" => LangCode::Fr,
            "tr" => LangCode::Tr,
            "zh" => LangCode::Zh,
            "ru" => LangCode::Ru,
            "de" => LangCode::De,
            "es" => LangCode::Es,
            _ => LangCode::Other(lower),
        })
    }
}

impl From<&str> for LangCode {
    fn from(s: &str) -> Self {
        match s.parse() {
            Ok(lang) => lang,
            Err(never) => match never {},
        }
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for LangCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for LangCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(LangCode::from(s.as_str()))
    }
}

/// Normalized tokens of one summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<String>,
    lang: LangCode,
    source_id: String,
}

impl TokenSequence {
    /// Builds a sequence from pre-split tokens. Empty tokens are dropped and
    /// whitespace inside a token is not allowed, so tokens containing it are
    /// split further.
    pub fn new<I, S>(tokens: I, lang: LangCode) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens = tokens
            .into_iter()
            .flat_map(|t| {
                t.as_ref()
                    .split_whitespace()
                    .map(str::to_owned)
                    .collect::<Vec<_>>()
            })
            .collect();
        TokenSequence {
            tokens,
            lang,
            source_id: String::new(),
        }
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn lang(&self) -> &LangCode {
        &self.lang
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizeOptions {
    pub lowercase: bool,
    pub drop_punctuation: bool,
}

impl Default for TokenizeOptions {
    fn default() -> Self {
        TokenizeOptions {
            lowercase: true,
            drop_punctuation: false,
        }
    }
}

/// Tokenizes with punctuation retained.
pub fn tokenize(text: &str, lang: &LangCode, lowercase: bool) -> TokenSequence {
    tokenize_with(
        text,
        lang,
        TokenizeOptions {
            lowercase,
            drop_punctuation: false,
        },
    )
}

pub fn tokenize_with(text: &str, lang: &LangCode, opts: TokenizeOptions) -> TokenSequence {
    let split_cjk = *lang == LangCode::Zh;
    let mut tokens = Vec::new();
    let mut word = String::new();

    let flush = |word: &mut String, tokens: &mut Vec<String>| {
        if !word.is_empty() {
            tokens.push(std::mem::take(word));
        }
    };

    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut word, &mut tokens);
        } else if split_cjk && is_cjk(c) {
            flush(&mut word, &mut tokens);
            tokens.push(c.to_string());
        } else if is_word_char(c) || (is_combining_mark(c) && !word.is_empty()) {
            word.push(c);
        } else {
            flush(&mut word, &mut tokens);
            if !opts.drop_punctuation {
                tokens.push(c.to_string());
            }
        }
    }
    flush(&mut word, &mut tokens);

    // Lowercasing per token keeps token boundaries independent of the flag.
    if opts.lowercase {
        for tok in &mut tokens {
            *tok = lowercase(tok, lang);
        }
        tokens.retain(|t| !t.is_empty());
    }

    TokenSequence {
        tokens,
        lang: lang.clone(),
        source_id: String::new(),
    }
}

/// Unicode lowercasing with Turkish dotted/dotless i handling.
pub fn lowercase(s: &str, lang: &LangCode) -> String {
    if *lang == LangCode::Tr {
        let mut out = String::with_capacity(s.len());
        for c in s.chars() {
            match c {
                'I' => out.push('ı'),
                'İ' => out.push('i'),
                _ => out.extend(c.to_lowercase()),
            }
        }
        out
    } else {
        s.to_lowercase()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_combining_mark(c: char) -> bool {
    matches!(c,
        '\u{0300}'..='\u{036F}'
        | '\u{1AB0}'..='\u{1AFF}'
        | '\u{1DC0}'..='\u{1DFF}'
        | '\u{20D0}'..='\u{20FF}'
        | '\u{FE20}'..='\u{FE2F}')
}

/// CJK ideographs, CJK punctuation, kana and fullwidth forms.
pub fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{2E80}'..='\u{2FDF}'
        | '\u{3000}'..='\u{303F}'
        | '\u{3040}'..='\u{30FF}'
        | '\u{31C0}'..='\u{31EF}'
        | '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{FE30}'..='\u{FE4F}'
        | '\u{FF00}'..='\u{FFEF}'
        | '\u{20000}'..='\u{2FA1F}')
}

/// One line of a summaries file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub lang: LangCode,
    pub text: String,
    /// Explicit reference pairing for system summaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_id: Option<String>,
}

impl SummaryRecord {
    pub fn tokenize(&self, opts: TokenizeOptions) -> TokenSequence {
        tokenize_with(&self.text, &self.lang, opts).with_source_id(self.id.clone())
    }
}

/// Reads a summaries JSONL file. Blank lines are skipped.
pub fn read_summaries(path: impl AsRef<Path>) -> Result<Vec<SummaryRecord>, Error> {
    read_jsonl(path.as_ref())
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, Error> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: idx + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}
