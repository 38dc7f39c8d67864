//! Tweet cleaning: emoticon stripping, non-ASCII replacement, tokenization,
//! punctuation filtering and stopword removal.
//!
//! Character-level filters run on the raw string before tokenizing so that
//! a replaced character never splits an already formed token.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const BUNDLED_EMOTICONS: &str = include_str!("../data/emoticons.txt");

/// Emoji code point ranges removed by [`strip_emoticons`].
const EMOJI_RANGES: &[(u32, u32)] = &[
    (0x1F1E6, 0x1F1FF), // regional indicators
    (0x1F300, 0x1F5FF), // symbols & pictographs, skin tones
    (0x1F600, 0x1F64F), // emoticons
    (0x1F680, 0x1F6FF), // transport & map
    (0x1F900, 0x1F9FF), // supplemental symbols & pictographs
    (0x1FA70, 0x1FAFF), // symbols & pictographs extended-A
    (0x2600, 0x26FF),   // misc symbols
    (0x2700, 0x27BF),   // dingbats
    (0xFE0F, 0xFE0F),   // variation selector-16
    (0x200D, 0x200D),   // zero width joiner
];

/// Ordered list of surviving tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence(tokens.into_iter().filter(|t| !t.is_empty()).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Tokens joined with single spaces.
    pub fn joined(&self) -> String {
        self.0.join(" ")
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence::new(iter.into_iter().map(Into::into).collect())
    }
}

/// Case-insensitive stopword set.
#[derive(Debug, Clone)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: HashSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(Error::Config("stopword list is empty".into()));
        }
        Ok(StopwordList { words })
    }

    /// Parses a one-word-per-line file; `#` starts a comment line.
    pub fn parse(contents: &str) -> Result<Self> {
        Self::new(data_lines(contents))
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(BUNDLED_STOPWORDS).expect("bundled stopword list is valid")
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn data_lines(contents: &str) -> impl Iterator<Item = &str> {
    contents
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Literal emoticon patterns plus the emoji code point ranges.
#[derive(Debug, Clone)]
pub struct EmoticonSet {
    patterns: Regex,
}

impl EmoticonSet {
    pub fn parse(contents: &str) -> Result<Self> {
        let mut patterns: Vec<&str> = data_lines(contents).map(str::trim).collect();
        if let Some(bad) = patterns
            .iter()
            .find(|p| p.chars().all(|c| c.is_ascii_alphanumeric()))
        {
            return Err(Error::Config(format!(
                "emoticon pattern `{bad}` has no punctuation and would eat words"
            )));
        }
        // longest first so ":-))" wins over ":-)"
        patterns.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        patterns.dedup();
        let alternation = patterns
            .iter()
            .map(|p| regex::escape(p))
            .collect::<Vec<_>>()
            .join("|");
        let patterns = Regex::new(&alternation)
            .map_err(|e| Error::Config(format!("emoticon patterns: {e}")))?;
        Ok(EmoticonSet { patterns })
    }

    pub fn bundled() -> &'static EmoticonSet {
        static SET: OnceLock<EmoticonSet> = OnceLock::new();
        SET.get_or_init(|| EmoticonSet::parse(BUNDLED_EMOTICONS).expect("bundled emoticons parse"))
    }

    pub fn strip(&self, text: &str) -> String {
        let without_emoji: String = text.chars().filter(|&c| !is_emoji(c)).collect();
        self.patterns.replace_all(&without_emoji, "").into_owned()
    }
}

fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    EMOJI_RANGES.iter().any(|&(lo, hi)| (lo..=hi).contains(&cp))
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
}

/// Removes emoji code points and the bundled ASCII emoticons.
pub fn strip_emoticons(text: &str) -> String {
    EmoticonSet::bundled().strip(text)
}

/// Every code point above 127 becomes one space.
pub fn replace_non_ascii(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_ascii() { c } else { ' ' })
        .collect()
}

/// Splits on whitespace, then peels leading and trailing runs of ASCII
/// punctuation into their own tokens.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let body_start = word.find(|c: char| !is_punct(c));
        let Some(start) = body_start else {
            out.push(word.to_string());
            continue;
        };
        let end = word
            .rfind(|c: char| !is_punct(c))
            .map(|i| i + word[i..].chars().next().map_or(1, char::len_utf8))
            .unwrap_or(word.len());
        if start > 0 {
            out.push(word[..start].to_string());
        }
        out.push(word[start..end].to_string());
        if end < word.len() {
            out.push(word[end..].to_string());
        }
    }
    TokenSequence::new(out)
}

/// Drops punctuation-only tokens and strips punctuation (and ASCII control
/// characters) out of the rest.
pub fn remove_punctuation(tokens: &TokenSequence) -> TokenSequence {
    tokens
        .tokens()
        .iter()
        .map(|t| {
            t.chars()
                .filter(|&c| !is_punct(c) && !c.is_ascii_control())
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn remove_stopwords(tokens: &TokenSequence, stopwords: &StopwordList) -> TokenSequence {
    tokens
        .tokens()
        .iter()
        .filter(|t| !stopwords.contains(t))
        .cloned()
        .collect()
}

/// Full cleaning pipeline.
pub fn clean(text: &str, stopwords: &StopwordList) -> TokenSequence {
    let text = strip_emoticons(text);
    let text = replace_non_ascii(&text);
    let tokens = tokenize(&text);
    let tokens = remove_punctuation(&tokens);
    remove_stopwords(&tokens, stopwords)
}
