//! Lidstone-smoothed N-gram chord models.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chord::{vocabulary_hash, ChordClass, Token, NUM_TOKENS, VOCAB_SIZE};
use crate::corpus::ChordSequence;
use crate::error::{Error, Result};
use crate::eval::LanguageModel;

pub const MAX_ORDER: usize = 6;
pub const DEFAULT_ALPHA_GRID: &[f64] = &[0.01, 0.03, 0.1, 0.3, 1.0, 3.0];

fn context_key(context: &[Token]) -> u32 {
    context
        .iter()
        .fold(0u32, |key, t| key * NUM_TOKENS as u32 + t.index() as u32)
}

fn key_tokens(mut key: u32, len: usize) -> Vec<Token> {
    let mut out = vec![Token::Pad; len];
    for slot in out.iter_mut().rev() {
        *slot = Token::from_index((key % NUM_TOKENS as u32) as usize).unwrap();
        key /= NUM_TOKENS as u32;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct ContextCounts {
    total: u64,
    successors: [u64; VOCAB_SIZE],
}

impl Default for ContextCounts {
    fn default() -> Self {
        ContextCounts {
            total: 0,
            successors: [0; VOCAB_SIZE],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    counts: HashMap<u32, ContextCounts>,
}

/// The `order - 1` tokens preceding position `k`, left-padded at the song start.
pub fn padded_context(chords: &[ChordClass], k: usize, order: usize) -> Vec<Token> {
    let width = order - 1;
    (0..width)
        .map(|j| {
            let back = width - j;
            if k >= back {
                Token::Chord(chords[k - back])
            } else {
                Token::Pad
            }
        })
        .collect()
}

impl NGramModel {
    /// Counts every (context, successor) pair. `alpha` starts at 0; set it with
    /// [`NGramModel::with_alpha`] or [`NGramModel::tune_alpha`].
    pub fn fit(sequences: &[ChordSequence], order: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        if sequences.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut counts: HashMap<u32, ContextCounts> = HashMap::new();
        for seq in sequences {
            for (k, &target) in seq.chords.iter().enumerate() {
                let key = context_key(&padded_context(&seq.chords, k, order));
                let entry = counts.entry(key).or_default();
                entry.total += 1;
                entry.successors[target.index()] += 1;
            }
        }
        Ok(NGramModel {
            order,
            alpha: 0.0,
            counts,
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        assert!(alpha >= 0.0 && alpha.is_finite(), "alpha must be a finite non-negative number");
        self.alpha = alpha;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_contexts(&self) -> usize {
        self.counts.len()
    }

    fn lookup(&self, context: &[Token]) -> Result<Option<&ContextCounts>> {
        let needed = self.order - 1;
        if context.len() < needed {
            return Err(Error::ContextLength {
                needed,
                got: context.len(),
            });
        }
        let key = context_key(&context[context.len() - needed..]);
        Ok(self.counts.get(&key))
    }

    pub fn count(&self, context: &[Token], symbol: ChordClass) -> Result<u64> {
        Ok(self.lookup(context)?.map_or(0, |c| c.successors[symbol.index()]))
    }

    pub fn context_total(&self, context: &[Token]) -> Result<u64> {
        Ok(self.lookup(context)?.map_or(0, |c| c.total))
    }

    /// `(count + alpha) / (total + alpha * 25)`. Only the last `order - 1`
    /// context tokens are used.
    pub fn prob(&self, context: &[Token], symbol: ChordClass) -> Result<f64> {
        self.prob_with_alpha(context, symbol, self.alpha)
    }

    fn prob_with_alpha(&self, context: &[Token], symbol: ChordClass, alpha: f64) -> Result<f64> {
        let (count, total) = match self.lookup(context)? {
            Some(c) => (c.successors[symbol.index()], c.total),
            None => (0, 0),
        };
        if total == 0 && alpha == 0.0 {
            return Err(Error::UndefinedDistribution);
        }
        Ok((count as f64 + alpha) / (total as f64 + alpha * VOCAB_SIZE as f64))
    }

    /// Natural-log probability of each chord given its padded context.
    pub fn sequence_log_prob(&self, chords: &[ChordClass]) -> Result<Vec<f64>> {
        self.sequence_log_prob_with_alpha(chords, self.alpha)
    }

    fn sequence_log_prob_with_alpha(&self, chords: &[ChordClass], alpha: f64) -> Result<Vec<f64>> {
        chords
            .iter()
            .enumerate()
            .map(|(k, &y)| {
                let ctx = padded_context(chords, k, self.order);
                self.prob_with_alpha(&ctx, y, alpha).map(f64::ln)
            })
            .collect()
    }

    fn average_log_prob(&self, sequences: &[ChordSequence], alpha: f64) -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for s in sequences {
            total += self.sequence_log_prob_with_alpha(&s.chords, alpha)?.iter().sum::<f64>();
            n += s.len();
        }
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(total / n as f64)
    }

    /// Picks the grid value with the highest average validation log-probability;
    /// ties go to the smaller alpha. Alphas that leave some validation event
    /// undefined score minus infinity. Returns the chosen alpha and every
    /// (alpha, score) pair.
    pub fn tune_alpha(&self, validation: &[ChordSequence], grid: &[f64]) -> Result<(f64, Vec<(f64, f64)>)> {
        let mut grid: Vec<f64> = grid.to_vec();
        grid.sort_by(f64::total_cmp);
        let mut scores = Vec::with_capacity(grid.len());
        let mut best: Option<(f64, f64)> = None;
        for alpha in grid {
            let score = match self.average_log_prob(validation, alpha) {
                Ok(s) => s,
                Err(Error::UndefinedDistribution) => f64::NEG_INFINITY,
                Err(e) => return Err(e),
            };
            scores.push((alpha, score));
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((alpha, score));
            }
        }
        let (alpha, _) = best.ok_or_else(|| Error::InvalidConfig("empty alpha grid".into()))?;
        Ok((alpha, scores))
    }

    /// All stored (context, successor, count) triples with non-zero count.
    pub fn entries(&self) -> Vec<(Vec<Token>, ChordClass, u64)> {
        let mut keys: Vec<&u32> = self.counts.keys().collect();
        keys.sort();
        let mut out = Vec::new();
        for key in keys {
            let ctx = key_tokens(*key, self.order - 1);
            for (s, &n) in self.counts[key].successors.iter().enumerate() {
                if n > 0 {
                    out.push((ctx.clone(), ChordClass::from_index(s).unwrap(), n));
                }
            }
        }
        out
    }

    pub fn to_file(&self) -> NGramFile {
        NGramFile {
            format: NGRAM_FORMAT.to_string(),
            version: 1,
            vocabulary: vocabulary_hash(),
            order: self.order,
            alpha: self.alpha,
            entries: self
                .entries()
                .into_iter()
                .map(|(context, successor, count)| NGramEntry {
                    context: context.iter().map(|t| t.index() as u8).collect(),
                    successor: successor.index() as u8,
                    count,
                })
                .collect(),
        }
    }

    pub fn from_file(file: &NGramFile) -> Result<Self> {
        if file.format != NGRAM_FORMAT || file.version != 1 {
            return Err(Error::Format(format!("{} v{}", file.format, file.version)));
        }
        if file.vocabulary != vocabulary_hash() {
            return Err(Error::VocabularyMismatch {
                model: file.vocabulary.clone(),
                corpus: vocabulary_hash(),
            });
        }
        if !(1..=MAX_ORDER).contains(&file.order) {
            return Err(Error::InvalidOrder(file.order));
        }
        let mut counts: HashMap<u32, ContextCounts> = HashMap::new();
        for e in &file.entries {
            let bad = || Error::Format("bad n-gram entry".into());
            if e.context.len() != file.order - 1 || e.successor as usize >= VOCAB_SIZE {
                return Err(bad());
            }
            let ctx: Vec<Token> = e
                .context
                .iter()
                .map(|&i| Token::from_index(i as usize).ok_or_else(bad))
                .collect::<Result<_>>()?;
            let entry = counts.entry(context_key(&ctx)).or_default();
            entry.total += e.count;
            entry.successors[e.successor as usize] += e.count;
        }
        Ok(NGramModel {
            order: file.order,
            alpha: file.alpha,
            counts,
        })
    }
}

impl LanguageModel for NGramModel {
    fn log_probs(&self, chords: &[ChordClass]) -> Result<Vec<f64>> {
        self.sequence_log_prob(chords)
    }

    fn name(&self) -> String {
        format!("{}-gram", self.order)
    }
}

pub const NGRAM_FORMAT: &str = "chordlm-ngram";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramEntry {
    /// Token indices; 25 is the start pad.
    pub context: Vec<u8>,
    pub successor: u8,
    pub count: u64,
}

/// Serialised model: order, alpha and the sparse counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramFile {
    pub format: String,
    pub version: u32,
    pub vocabulary: String,
    pub order: usize,
    pub alpha: f64,
    pub entries: Vec<NGramEntry>,
}
