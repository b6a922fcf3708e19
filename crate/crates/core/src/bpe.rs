//! Byte-pair-encoding subword vocabulary: trainer, encoder and decoder.
//!
//! Training repeatedly merges the most frequent adjacent symbol pair, with
//! ties broken by lexicographic order of the pair so equal corpora always
//! produce equal vocabularies. Ids 0..2 are reserved: pad, unknown, and the
//! word-boundary marker emitted between consecutive words so decoding can
//! restore spaces.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use crate::preprocess::CleanTweet;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const BOUNDARY_ID: u32 = 2;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
/// Lower one-eighth block, the conventional visible word-boundary glyph.
pub const BOUNDARY_TOKEN: &str = "\u{2581}";

/// Number of reserved ids at the front of every vocabulary.
pub const RESERVED_TOKENS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BpeError {
    EmptyCorpus,
    /// The requested size cannot even hold the reserved ids, the corpus
    /// alphabet and one merge.
    VocabTooSmall { requested: usize, minimum: usize },
    /// A serialized vocabulary failed validation.
    InvalidVocab { reason: String },
}

impl fmt::Display for BpeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BpeError::EmptyCorpus => write!(f, "cannot train a vocabulary on an empty corpus"),
            BpeError::VocabTooSmall { requested, minimum } => write!(
                f,
                "vocab size {requested} is too small; need at least {minimum} \
                 (reserved ids + corpus alphabet + one merge)"
            ),
            BpeError::InvalidVocab { reason } => write!(f, "invalid vocabulary: {reason}"),
        }
    }
}

impl core::error::Error for BpeError {}

/// A tweet encoded to fixed length: `ids` and `mask` have length `max_len`,
/// the first `real_len` positions are real subwords, the rest are pad.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubwordSequence {
    pub ids: Vec<u32>,
    pub mask: Vec<bool>,
    pub real_len: usize,
}

/// Ordered merge rules plus the subword↔id maps — the tokenizer's entire
/// state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BpeVocab {
    merges: Vec<(String, String)>,
    tokens: Vec<String>,
    token_to_id: BTreeMap<String, u32>,
    merge_rank: BTreeMap<(String, String), usize>,
}

/// Pair bookkeeping for the trainer: global counts, the words each pair
/// occurs in, and a priority map whose last entry is the next merge
/// (highest count, then lexicographically smallest pair).
#[derive(Default)]
struct PairStats {
    counts: BTreeMap<(u32, u32), u64>,
    occurs: BTreeMap<(u32, u32), BTreeSet<usize>>,
    queue: BTreeMap<(u64, Reverse<(String, String)>), (u32, u32)>,
}

impl PairStats {
    fn change(&mut self, pair: (u32, u32), names: (&str, &str), delta: i64) {
        let old = self.counts.get(&pair).copied().unwrap_or(0);
        if old > 0 {
            self.queue
                .remove(&(old, Reverse((names.0.to_string(), names.1.to_string()))));
        }
        let new = old as i64 + delta;
        debug_assert!(new >= 0);
        let new = new as u64;
        if new > 0 {
            self.counts.insert(pair, new);
            self.queue.insert(
                (new, Reverse((names.0.to_string(), names.1.to_string()))),
                pair,
            );
        } else {
            self.counts.remove(&pair);
        }
    }
}

struct TrainerWord {
    symbols: Vec<u32>,
    freq: u64,
}

impl BpeVocab {
    /// Trains a vocabulary of at most `vocab_size` subwords. Merging stops
    /// early when no adjacent pair occurs at least twice.
    pub fn train(corpus: &[CleanTweet], vocab_size: usize) -> Result<Self, BpeError> {
        if corpus.is_empty() {
            return Err(BpeError::EmptyCorpus);
        }
        let mut word_freq: BTreeMap<&str, u64> = BTreeMap::new();
        for tweet in corpus {
            for token in &tweet.tokens {
                *word_freq.entry(token.as_str()).or_insert(0) += 1;
            }
        }
        let mut alphabet: BTreeSet<char> = BTreeSet::new();
        for word in word_freq.keys() {
            for c in word.chars() {
                // the boundary glyph cannot double as a corpus symbol
                if c.to_string() != BOUNDARY_TOKEN {
                    alphabet.insert(c);
                }
            }
        }
        let minimum = RESERVED_TOKENS + alphabet.len() + 1;
        if vocab_size < minimum {
            return Err(BpeError::VocabTooSmall {
                requested: vocab_size,
                minimum,
            });
        }

        let mut tokens: Vec<String> = vec![
            PAD_TOKEN.to_string(),
            UNK_TOKEN.to_string(),
            BOUNDARY_TOKEN.to_string(),
        ];
        let mut token_to_id: BTreeMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        for c in &alphabet {
            let s = c.to_string();
            token_to_id.insert(s.clone(), tokens.len() as u32);
            tokens.push(s);
        }

        let mut words: Vec<TrainerWord> = word_freq
            .iter()
            .map(|(word, &freq)| TrainerWord {
                symbols: word
                    .chars()
                    .map(|c| {
                        let s = c.to_string();
                        if s == BOUNDARY_TOKEN {
                            UNK_ID
                        } else {
                            token_to_id[&s]
                        }
                    })
                    .collect(),
                freq,
            })
            .collect();

        let mut stats = PairStats::default();
        for (widx, word) in words.iter().enumerate() {
            for pair in word.symbols.windows(2) {
                let p = (pair[0], pair[1]);
                let names = (
                    tokens[p.0 as usize].clone(),
                    tokens[p.1 as usize].clone(),
                );
                stats.change(p, (&names.0, &names.1), word.freq as i64);
                stats.occurs.entry(p).or_default().insert(widx);
            }
        }

        let mut merges: Vec<(String, String)> = Vec::new();
        while tokens.len() < vocab_size {
            let Some((&(count, Reverse(ref names)), &pair)) = stats.queue.last_key_value() else {
                break;
            };
            if count < 2 {
                break;
            }
            let names = names.clone();
            let merged = format!("{}{}", names.0, names.1);
            merges.push(names);
            let merged_id = *token_to_id.entry(merged.clone()).or_insert_with(|| {
                tokens.push(merged);
                (tokens.len() - 1) as u32
            });

            let affected: Vec<usize> = stats
                .occurs
                .get(&pair)
                .map(|set| set.iter().copied().collect())
                .unwrap_or_default();
            for widx in affected {
                let old_pairs: Vec<(u32, u32)> = words[widx]
                    .symbols
                    .windows(2)
                    .map(|w| (w[0], w[1]))
                    .collect();
                let freq = words[widx].freq as i64;
                for p in &old_pairs {
                    let names = (
                        tokens[p.0 as usize].clone(),
                        tokens[p.1 as usize].clone(),
                    );
                    stats.change(*p, (&names.0, &names.1), -freq);
                    if let Some(set) = stats.occurs.get_mut(p) {
                        set.remove(&widx);
                    }
                }
                merge_symbols(&mut words[widx].symbols, pair, merged_id);
                let new_pairs: Vec<(u32, u32)> = words[widx]
                    .symbols
                    .windows(2)
                    .map(|w| (w[0], w[1]))
                    .collect();
                for p in &new_pairs {
                    let names = (
                        tokens[p.0 as usize].clone(),
                        tokens[p.1 as usize].clone(),
                    );
                    stats.change(*p, (&names.0, &names.1), freq);
                    stats.occurs.entry(*p).or_default().insert(widx);
                }
            }
            stats.occurs.remove(&pair);
        }

        let mut merge_rank = BTreeMap::new();
        for (rank, pair) in merges.iter().enumerate() {
            merge_rank.entry(pair.clone()).or_insert(rank);
        }
        Ok(Self {
            merges,
            tokens,
            token_to_id,
            merge_rank,
        })
    }

    /// Rebuilds a vocabulary from its serialized parts, validating the
    /// reserved prefix and token uniqueness.
    pub fn from_parts(merges: Vec<(String, String)>, tokens: Vec<String>) -> Result<Self, BpeError> {
        if tokens.len() < RESERVED_TOKENS
            || tokens[0] != PAD_TOKEN
            || tokens[1] != UNK_TOKEN
            || tokens[2] != BOUNDARY_TOKEN
        {
            return Err(BpeError::InvalidVocab {
                reason: format!(
                    "tokens must start with the reserved triple [{PAD_TOKEN:?}, {UNK_TOKEN:?}, {BOUNDARY_TOKEN:?}]"
                ),
            });
        }
        let mut token_to_id = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if token_to_id.insert(t.clone(), i as u32).is_some() {
                return Err(BpeError::InvalidVocab {
                    reason: format!("duplicate token `{t}`"),
                });
            }
        }
        let mut merge_rank = BTreeMap::new();
        for (rank, pair) in merges.iter().enumerate() {
            merge_rank.entry(pair.clone()).or_insert(rank);
        }
        Ok(Self {
            merges,
            tokens,
            token_to_id,
            merge_rank,
        })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Splits one word into subword ids by applying the learned merges in
    /// training order. Symbols never seen in training map to the unknown id.
    pub fn encode_word(&self, word: &str) -> Vec<u32> {
        let mut symbols: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        loop {
            let mut best: Option<usize> = None;
            for pair in symbols.windows(2) {
                if let Some(&rank) = self
                    .merge_rank
                    .get(&(pair[0].clone(), pair[1].clone()))
                {
                    if best.is_none_or(|b| rank < b) {
                        best = Some(rank);
                    }
                }
            }
            match best {
                None => break,
                Some(rank) => {
                    let (a, b) = self.merges[rank].clone();
                    let mut out = Vec::with_capacity(symbols.len());
                    let mut i = 0;
                    while i < symbols.len() {
                        if i + 1 < symbols.len() && symbols[i] == a && symbols[i + 1] == b {
                            out.push(format!("{a}{b}"));
                            i += 2;
                        } else {
                            out.push(symbols[i].clone());
                            i += 1;
                        }
                    }
                    symbols = out;
                }
            }
        }
        symbols
            .iter()
            .map(|s| {
                if s == BOUNDARY_TOKEN {
                    UNK_ID
                } else {
                    self.token_to_id.get(s).copied().unwrap_or(UNK_ID)
                }
            })
            .collect()
    }

    /// Encodes a cleaned token list: per-word subwords joined by the
    /// boundary id, truncated to `max_len` and padded with the pad id.
    pub fn encode(&self, tokens: &[String], max_len: usize) -> SubwordSequence {
        debug_assert!(max_len >= 1);
        let mut ids: Vec<u32> = Vec::new();
        for (i, word) in tokens.iter().enumerate() {
            if i > 0 {
                ids.push(BOUNDARY_ID);
            }
            ids.extend(self.encode_word(word));
        }
        ids.truncate(max_len);
        let real_len = ids.len();
        let mut mask = vec![true; real_len];
        ids.resize(max_len, PAD_ID);
        mask.resize(max_len, false);
        SubwordSequence {
            ids,
            mask,
            real_len,
        }
    }

    /// Inverse of [`BpeVocab::encode`] on covered input: pads are skipped,
    /// boundaries become spaces, unknown ids become U+FFFD.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        for &id in ids {
            match id {
                PAD_ID => {}
                BOUNDARY_ID => out.push(' '),
                UNK_ID => out.push('\u{FFFD}'),
                _ => match self.tokens.get(id as usize) {
                    Some(tok) => out.push_str(tok),
                    None => out.push('\u{FFFD}'),
                },
            }
        }
        out
    }
}

fn merge_symbols(symbols: &mut Vec<u32>, pair: (u32, u32), merged: u32) {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(merged);
            i += 2;
        } else {
            out.push(symbols[i]);
            i += 1;
        }
    }
    *symbols = out;
}
