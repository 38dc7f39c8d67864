//! Byte-level subword vocabulary trained by pair merging, with fixed-length
//! integer encoding.
//!
//! Id 0 is padding (the empty unit); ids 1..=256 are the single-byte
//! fallback units, so every string is encodable. Learned units follow in
//! merge order.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::TokenSequence;

pub const PAD_ID: u32 = 0;
/// Padding plus one unit per byte value.
pub const MIN_VOCAB_SIZE: usize = 257;
pub const DEFAULT_TARGET_SIZE: usize = 1 << 15;
pub const DEFAULT_MAX_LEN: usize = 64;

const HEADER_PREFIX: &str = "subword-vocab v1 ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocabulary {
    units: Vec<Vec<u8>>,
    target_size: usize,
    index: HashMap<Vec<u8>, u32>,
    longest_unit: usize,
}

/// Ids padded to a fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedText {
    pub ids: Vec<u32>,
    pub actual_len: usize,
}

impl EncodedText {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    /// The non-padding prefix.
    pub fn active(&self) -> &[u32] {
        &self.ids[..self.actual_len]
    }
}

impl SubwordVocabulary {
    fn from_units(units: Vec<Vec<u8>>, target_size: usize) -> Result<Self> {
        if units.len() > target_size {
            return Err(Error::Validation(format!(
                "vocabulary has {} units, more than its target size {target_size}",
                units.len()
            )));
        }
        if units.len() < MIN_VOCAB_SIZE
            || !units[0].is_empty()
            || (0..=255u8).any(|b| units[b as usize + 1] != [b])
        {
            return Err(Error::Validation(
                "vocabulary must start with padding and the 256 byte units".into(),
            ));
        }
        let mut index = HashMap::with_capacity(units.len());
        for (id, unit) in units.iter().enumerate().skip(1) {
            if index.insert(unit.clone(), id as u32).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate vocabulary unit {}",
                    escape_unit(unit)
                )));
            }
        }
        let longest_unit = units.iter().map(Vec::len).max().unwrap_or(1);
        Ok(SubwordVocabulary {
            units,
            target_size,
            index,
            longest_unit,
        })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn unit(&self, id: u32) -> Option<&[u8]> {
        self.units.get(id as usize).map(Vec::as_slice)
    }

    pub fn id_of(&self, unit: &str) -> Option<u32> {
        self.index.get(unit.as_bytes()).copied()
    }

    pub fn units(&self) -> impl Iterator<Item = &[u8]> {
        self.units.iter().map(Vec::as_slice)
    }

    /// Segments `text` into the fewest units; among equally short
    /// segmentations the one with the longest leading units wins.
    pub fn segment(&self, text: &str) -> Vec<u32> {
        let bytes = text.as_bytes();
        let n = bytes.len();
        // best[i] = (units needed for bytes[i..], length of first unit)
        let mut best = vec![(usize::MAX, 0usize); n + 1];
        best[n] = (0, 0);
        for i in (0..n).rev() {
            let max_l = self.longest_unit.min(n - i);
            for l in (1..=max_l).rev() {
                let rest = best[i + l].0;
                if rest == usize::MAX || !self.index.contains_key(&bytes[i..i + l]) {
                    continue;
                }
                if rest + 1 < best[i].0 {
                    best[i] = (rest + 1, l);
                }
            }
        }
        let mut ids = Vec::with_capacity(best[0].0);
        let mut i = 0;
        while i < n {
            let l = best[i].1;
            ids.push(self.index[&bytes[i..i + l]]);
            i += l;
        }
        ids
    }

    pub fn encode(&self, tokens: &TokenSequence, max_len: usize) -> EncodedText {
        assert!(max_len >= 1, "max_len must be at least 1");
        let mut ids = self.segment(&tokens.joined());
        let actual_len = ids.len().min(max_len);
        ids.resize(max_len, PAD_ID);
        EncodedText { ids, actual_len }
    }

    pub fn decode(&self, encoded: &EncodedText) -> Result<String> {
        if encoded.actual_len > encoded.ids.len() {
            return Err(Error::Decode(format!(
                "actual_len {} exceeds {} ids",
                encoded.actual_len,
                encoded.ids.len()
            )));
        }
        let mut bytes = Vec::new();
        for &id in encoded.active() {
            let unit = self.unit(id).ok_or_else(|| {
                Error::Decode(format!("id {id} outside vocabulary of {}", self.len()))
            })?;
            bytes.extend_from_slice(unit);
        }
        String::from_utf8(bytes).map_err(|e| Error::Decode(format!("invalid UTF-8: {e}")))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER_PREFIX}{}\n", self.target_size);
        for unit in &self.units {
            out.push_str(&escape_unit(unit));
            out.push('\n');
        }
        out
    }

    pub fn from_text(contents: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: "<vocabulary>".into(),
            line,
            message,
        };
        let body = contents
            .strip_suffix('\n')
            .ok_or_else(|| parse_err(1, "missing trailing newline".into()))?;
        let mut lines = body.split('\n');
        let header = lines.next().unwrap_or_default();
        let target_size: usize = header
            .strip_prefix(HEADER_PREFIX)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(1, format!("bad header `{header}`")))?;
        let units = lines
            .enumerate()
            .map(|(i, l)| unescape_unit(l).map_err(|m| parse_err(i + 2, m)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_units(units, target_size)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&contents).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }
}

fn escape_unit(unit: &[u8]) -> String {
    let mut out = String::with_capacity(unit.len());
    for &b in unit {
        match b {
            b'\n' => out.push_str("\\n"),
            b'\t' => out.push_str("\\t"),
            b'\\' => out.push_str("\\\\"),
            0x20..=0x7e => out.push(b as char),
            _ => {
                let _ = write!(out, "\\x{b:02X}");
            }
        }
    }
    out
}

fn unescape_unit(line: &str) -> std::result::Result<Vec<u8>, String> {
    let bytes = line.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'\\' {
            out.push(bytes[i]);
            i += 1;
            continue;
        }
        match bytes.get(i + 1) {
            Some(b'n') => out.push(b'\n'),
            Some(b't') => out.push(b'\t'),
            Some(b'\\') => out.push(b'\\'),
            Some(b'x') => {
                let hex = line
                    .get(i + 2..i + 4)
                    .ok_or_else(|| "truncated \\x escape".to_string())?;
                let b = u8::from_str_radix(hex, 16).map_err(|_| format!("bad hex `{hex}`"))?;
                out.push(b);
                i += 4;
                continue;
            }
            _ => return Err("dangling backslash".into()),
        }
        i += 2;
    }
    Ok(out)
}

/// Trains a vocabulary by repeatedly merging the most frequent adjacent
/// pair of units inside tokens. Ties go to the lexicographically smallest
/// merged string. Stops at `target_size` units or when no pair occurs at
/// least twice.
pub fn build_vocabulary(corpus: &[TokenSequence], target_size: usize) -> Result<SubwordVocabulary> {
    if target_size < MIN_VOCAB_SIZE {
        return Err(Error::Config(format!(
            "target vocabulary size {target_size} is below the minimum {MIN_VOCAB_SIZE}"
        )));
    }
    if corpus.is_empty() {
        return Err(Error::Input("cannot build a vocabulary from an empty corpus".into()));
    }

    let mut units: Vec<Vec<u8>> = Vec::with_capacity(target_size);
    units.push(Vec::new());
    units.extend((0..=255u8).map(|b| vec![b]));
    let mut index: HashMap<Vec<u8>, u32> = units
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, u)| (u.clone(), i as u32))
        .collect();

    let mut word_counts: HashMap<&[u8], u64> = HashMap::new();
    for seq in corpus {
        for token in seq.tokens() {
            *word_counts.entry(token.as_bytes()).or_default() += 1;
        }
    }
    let mut sorted: Vec<(&[u8], u64)> = word_counts.into_iter().collect();
    sorted.sort_unstable();
    let mut words: Vec<(Vec<u32>, u64)> = sorted
        .into_iter()
        .map(|(w, c)| (w.iter().map(|&b| b as u32 + 1).collect(), c))
        .collect();

    let mut merger = PairTable::default();
    for (wi, (symbols, count)) in words.iter().enumerate() {
        merger.add_word(wi, symbols, *count as i64);
    }
    let mut heap: BinaryHeap<Candidate> = merger
        .counts
        .iter()
        .map(|(&pair, &count)| Candidate::new(count, pair, &units))
        .collect();

    while units.len() < target_size {
        let Some(cand) = heap.pop() else { break };
        let pair = cand.pair.0;
        let current = merger.counts.get(&pair).copied().unwrap_or(0);
        if current != cand.count {
            continue;
        }
        if current < 2 {
            break;
        }
        let merged = cand.merged.0;
        let new_id = match index.get(&merged) {
            Some(&id) => id,
            None => {
                let id = units.len() as u32;
                index.insert(merged.clone(), id);
                units.push(merged);
                id
            }
        };
        let affected: Vec<usize> = merger
            .occurrences
            .remove(&pair)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        let mut touched = BTreeSet::new();
        for wi in affected {
            let (symbols, count) = &mut words[wi];
            if !contains_pair(symbols, pair) {
                continue;
            }
            let count = *count as i64;
            merger.remove_word(symbols, count, &mut touched);
            *symbols = merge_pair(symbols, pair, new_id);
            merger.add_word(wi, symbols, count);
            touched.extend(symbols.windows(2).map(|w| (w[0], w[1])));
        }
        merger.counts.remove(&pair);
        for pair in touched {
            if let Some(&count) = merger.counts.get(&pair) {
                if count >= 2 {
                    heap.push(Candidate::new(count, pair, &units));
                }
            }
        }
    }

    SubwordVocabulary::from_units(units, target_size)
}

#[derive(Default)]
struct PairTable {
    counts: HashMap<(u32, u32), i64>,
    occurrences: HashMap<(u32, u32), BTreeSet<usize>>,
}

impl PairTable {
    fn add_word(&mut self, wi: usize, symbols: &[u32], count: i64) {
        for w in symbols.windows(2) {
            let pair = (w[0], w[1]);
            *self.counts.entry(pair).or_default() += count;
            self.occurrences.entry(pair).or_default().insert(wi);
        }
    }

    fn remove_word(&mut self, symbols: &[u32], count: i64, touched: &mut BTreeSet<(u32, u32)>) {
        for w in symbols.windows(2) {
            let pair = (w[0], w[1]);
            if let Some(c) = self.counts.get_mut(&pair) {
                *c -= count;
                if *c <= 0 {
                    self.counts.remove(&pair);
                }
            }
            touched.insert(pair);
        }
    }
}

fn contains_pair(symbols: &[u32], pair: (u32, u32)) -> bool {
    symbols.windows(2).any(|w| (w[0], w[1]) == pair)
}

fn merge_pair(symbols: &[u32], pair: (u32, u32), new_id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && (symbols[i], symbols[i + 1]) == pair {
            out.push(new_id);
            i += 2;
        } else {
            out.push(symbols[i]);
            i += 1;
        }
    }
    out
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    count: i64,
    merged: Reverse<Vec<u8>>,
    pair: Reverse<(u32, u32)>,
}

impl Candidate {
    fn new(count: i64, pair: (u32, u32), units: &[Vec<u8>]) -> Self {
        let mut merged = units[pair.0 as usize].clone();
        merged.extend_from_slice(&units[pair.1 as usize]);
        Candidate {
            count,
            merged: Reverse(merged),
            pair: Reverse(pair),
        }
    }
}
