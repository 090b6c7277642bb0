//! Chord embeddings: one-hot, learned jointly with the network, or
//! pre-trained with skip-gram and negative sampling.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chord::{Token, NUM_TOKENS, VOCAB_SIZE};
use crate::corpus::ChordSequence;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    OneHot,
    Learned,
    SkipGram,
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingKind::OneHot => "one-hot",
            EmbeddingKind::Learned => "learned",
            EmbeddingKind::SkipGram => "skip-gram",
        })
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-hot" | "onehot" => Ok(EmbeddingKind::OneHot),
            "learned" => Ok(EmbeddingKind::Learned),
            "skip-gram" | "skipgram" | "word2vec" => Ok(EmbeddingKind::SkipGram),
            _ => Err(Error::InvalidConfig(format!("unknown embedding kind {s:?}"))),
        }
    }
}

/// 26 x dim table: one row per chord class plus the start pad (last row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub kind: EmbeddingKind,
    pub table: Matrix,
}

impl EmbeddingMatrix {
    /// Standard basis rows for the classes, zero row for the pad.
    pub fn one_hot() -> Self {
        let mut table = Matrix::zeros(NUM_TOKENS, VOCAB_SIZE);
        for i in 0..VOCAB_SIZE {
            table.row_mut(i)[i] = 1.0;
        }
        EmbeddingMatrix {
            kind: EmbeddingKind::OneHot,
            table,
        }
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn lookup(&self, token: Token) -> &[f64] {
        self.table.row(token.index())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("chordlm-embedding v1 {} {}\n", self.kind, self.dim());
        for i in 0..NUM_TOKENS {
            out.push_str(&Token::from_index(i).unwrap().to_string());
            for v in self.table.row(i) {
                write!(out, " {v:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::Format(format!("embedding file: {why}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 4 || header[0] != "chordlm-embedding" || header[1] != "v1" {
            return Err(bad("bad header"));
        }
        let kind: EmbeddingKind = header[2].parse()?;
        let dim: usize = header[3].parse().map_err(|_| bad("bad dim"))?;
        let mut table = Matrix::zeros(NUM_TOKENS, dim);
        for i in 0..NUM_TOKENS {
            let line = lines.next().ok_or_else(|| bad("missing rows"))?;
            let mut fields = line.split_whitespace();
            let label = fields.next().ok_or_else(|| bad("empty row"))?;
            if label != Token::from_index(i).unwrap().to_string() {
                return Err(bad(&format!("row {i} is labelled {label:?}")));
            }
            let values: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|_| bad("bad value")))
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(bad("row width differs from dim"));
            }
            table.row_mut(i).copy_from_slice(&values);
        }
        if !table.is_finite() {
            return Err(bad("non-finite value"));
        }
        Ok(EmbeddingMatrix { kind, table })
    }
}

pub const SKIPGRAM_DIMS: &[usize] = &[4, 8, 16, 24];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 16,
            window: 4,
            negatives: 5,
            epochs: 50,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramOutcome {
    pub embedding: EmbeddingMatrix,
    /// Mean negative-sampling loss per (centre, context) pair, per epoch.
    pub epoch_losses: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Cumulative table for sampling negatives from unigram^0.75.
fn noise_table(songs: &[Vec<usize>]) -> Vec<f64> {
    let mut counts = vec![0.0f64; NUM_TOKENS];
    for s in songs {
        for &t in s {
            counts[t] += 1.0;
        }
    }
    let mut acc = 0.0;
    counts
        .iter()
        .map(|c| {
            acc += c.powf(0.75);
            acc
        })
        .collect()
}

fn sample_noise(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let x = rng.gen::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= x).min(cdf.len() - 1)
}

/// Trains skip-gram vectors with negative sampling. Each song is read as
/// `[pad, y1, .., yK]`, so the pad row learns from song openings.
pub fn train_skipgram(sequences: &[ChordSequence], config: &SkipGramConfig) -> Result<SkipGramOutcome> {
    if config.dim == 0 || config.window == 0 || config.epochs == 0 {
        return Err(Error::InvalidConfig("skip-gram dim, window and epochs must be positive".into()));
    }
    let total: usize = sequences.iter().map(|s| s.len()).sum();
    if total < 10 * VOCAB_SIZE {
        return Err(Error::InsufficientData(format!(
            "skip-gram needs at least {} chords, got {total}",
            10 * VOCAB_SIZE
        )));
    }
    let songs: Vec<Vec<usize>> = sequences
        .iter()
        .map(|s| {
            std::iter::once(Token::Pad.index())
                .chain(s.chords.iter().map(|c| c.index()))
                .collect()
        })
        .collect();
    let cdf = noise_table(&songs);
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input = Matrix::uniform(NUM_TOKENS, dim, 0.5 / dim as f64, &mut rng);
    let mut output = Matrix::zeros(NUM_TOKENS, dim);

    let pairs_per_epoch: usize = songs
        .iter()
        .map(|s| {
            (0..s.len())
                .map(|i| i.min(config.window) + (s.len() - 1 - i).min(config.window))
                .sum::<usize>()
        })
        .sum();
    let total_pairs = (pairs_per_epoch * config.epochs).max(1) as f64;
    let mut processed = 0usize;

    let mut order: Vec<usize> = (0..songs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut grad = vec![0.0; dim];
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        let mut pairs = 0usize;
        for &si in &order {
            let song = &songs[si];
            for (i, &centre) in song.iter().enumerate() {
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window).min(song.len() - 1);
                for (j, &target) in song.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let lr = config.learning_rate * (1.0 - processed as f64 / total_pairs).max(1e-4);
                    processed += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for n in 0..=config.negatives {
                        let (word, label) = if n == 0 {
                            (target, 1.0)
                        } else {
                            let w = sample_noise(&cdf, &mut rng);
                            if w == target {
                                continue;
                            }
                            (w, 0.0)
                        };
                        let v = input.row(centre);
                        let u = output.row(word);
                        let score: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                        let p = sigmoid(score);
                        loss -= if label == 1.0 { p.max(1e-300).ln() } else { (1.0 - p).max(1e-300).ln() };
                        let g = lr * (label - p);
                        for (gk, uk) in grad.iter_mut().zip(u) {
                            *gk += g * uk;
                        }
                        let v = input.row(centre).to_vec();
                        for (uk, vk) in output.row_mut(word).iter_mut().zip(&v) {
                            *uk += g * vk;
                        }
                    }
                    for (vk, gk) in input.row_mut(centre).iter_mut().zip(&grad) {
                        *vk += gk;
                    }
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(loss / pairs.max(1) as f64);
    }
    if !input.is_finite() {
        return Err(Error::DivergedRun {
            epoch: config.epochs,
            detail: "skip-gram vectors became non-finite".into(),
        });
    }
    Ok(SkipGramOutcome {
        embedding: EmbeddingMatrix {
            kind: EmbeddingKind::SkipGram,
            table: input,
        },
        epoch_losses,
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
