//! Average log-probability, cumulative curves, bootstrap intervals and
//! paired significance tests.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::chord::{ChordClass, VOCAB_SIZE};
use crate::corpus::ChordSequence;
use crate::error::{Error, Result};

/// Anything that assigns a natural-log probability to each chord of a song
/// given the chords before it.
pub trait LanguageModel: Sync {
    fn log_probs(&self, chords: &[ChordClass]) -> Result<Vec<f64>>;

    fn name(&self) -> String;
}

/// Assigns 1/25 to every chord.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformModel;

impl LanguageModel for UniformModel {
    fn log_probs(&self, chords: &[ChordClass]) -> Result<Vec<f64>> {
        Ok(vec![-(VOCAB_SIZE as f64).ln(); chords.len()])
    }

    fn name(&self) -> String {
        "uniform".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SongScore {
    pub symbols: usize,
    pub log_prob: f64,
}

impl SongScore {
    pub fn mean(&self) -> f64 {
        self.log_prob / self.symbols as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Average log-probability per chord symbol (nats).
    pub avg_log_prob: f64,
    pub num_symbols: usize,
    pub per_song: BTreeMap<String, SongScore>,
    pub per_dataset: BTreeMap<String, SongScore>,
}

impl EvalResult {
    pub fn dataset_avg(&self) -> BTreeMap<String, f64> {
        self.per_dataset.iter().map(|(k, v)| (k.clone(), v.mean())).collect()
    }
}

fn score_all(model: &dyn LanguageModel, dataset: &[ChordSequence]) -> Result<Vec<Vec<f64>>> {
    dataset.par_iter().map(|s| model.log_probs(&s.chords)).collect()
}

/// Sum over songs of log P(song), divided by the total number of chords.
pub fn avg_log_prob(model: &dyn LanguageModel, dataset: &[ChordSequence]) -> Result<EvalResult> {
    let rows = score_all(model, dataset)?;
    aggregate(dataset, &rows)
}

/// Builds an [`EvalResult`] from per-symbol log-probabilities aligned with `dataset`.
pub fn aggregate(dataset: &[ChordSequence], log_probs: &[Vec<f64>]) -> Result<EvalResult> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut per_song = BTreeMap::new();
    let mut per_dataset: BTreeMap<String, SongScore> = BTreeMap::new();
    let mut total = 0.0;
    let mut num_symbols = 0;
    for (song, lp) in dataset.iter().zip(log_probs) {
        let score = SongScore {
            symbols: lp.len(),
            log_prob: lp.iter().sum(),
        };
        total += score.log_prob;
        num_symbols += score.symbols;
        let d = per_dataset.entry(song.dataset_id.clone()).or_default();
        d.symbols += score.symbols;
        d.log_prob += score.log_prob;
        if per_song.insert(song.song_id.clone(), score).is_some() {
            return Err(Error::DuplicateSongId(song.song_id.clone()));
        }
    }
    if num_symbols == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(EvalResult {
        avg_log_prob: total / num_symbols as f64,
        num_symbols,
        per_song,
        per_dataset,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeCurve {
    /// `values[k - 1]` is the mean cumulative log-probability up to chord `k`.
    pub values: Vec<f64>,
    pub eligible_songs: usize,
    pub min_length: usize,
}

impl CumulativeCurve {
    /// Value at 1-based position `k`.
    pub fn at(&self, k: usize) -> f64 {
        self.values[k - 1]
    }
}

pub const DEFAULT_MIN_LENGTH: usize = 100;

/// Cumulative curve over songs with at least `min_length` chords, for
/// k = 1..=min_length.
pub fn cumulative_curve(
    model: &dyn LanguageModel,
    dataset: &[ChordSequence],
    min_length: usize,
) -> Result<CumulativeCurve> {
    let eligible: Vec<ChordSequence> = dataset
        .iter()
        .filter(|s| s.len() >= min_length)
        .cloned()
        .collect();
    let rows = score_all(model, &eligible)?;
    curve_from_log_probs(&rows, min_length)
}

/// Same as [`cumulative_curve`] from precomputed per-symbol log-probabilities.
/// Rows shorter than `min_length` are skipped.
pub fn curve_from_log_probs(rows: &[Vec<f64>], min_length: usize) -> Result<CumulativeCurve> {
    if min_length == 0 {
        return Err(Error::InvalidConfig("min_length must be positive".into()));
    }
    let eligible: Vec<&Vec<f64>> = rows.iter().filter(|r| r.len() >= min_length).collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleSongs(min_length));
    }
    let songs = eligible.len() as f64;
    let mut values = Vec::with_capacity(min_length);
    let mut running = vec![0.0; eligible.len()];
    for k in 1..=min_length {
        let mut total = 0.0;
        for (acc, row) in running.iter_mut().zip(&eligible) {
            *acc += row[k - 1];
            total += *acc;
        }
        values.push(total / (k as f64 * songs));
    }
    Ok(CumulativeCurve {
        values,
        eligible_songs: eligible.len(),
        min_length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
}

fn symbol_weighted_mean(scores: &[SongScore]) -> f64 {
    let lp: f64 = scores.iter().map(|s| s.log_prob).sum();
    let n: usize = scores.iter().map(|s| s.symbols).sum();
    lp / n as f64
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap over songs of the symbol-weighted mean log-probability.
pub fn bootstrap_ci(scores: &[SongScore], level: f64, resamples: usize, seed: u64) -> Result<ConfidenceInterval> {
    if scores.len() < 2 {
        return Err(Error::TooFewSongs(scores.len()));
    }
    if !(0.0 < level && level < 1.0) || resamples == 0 {
        return Err(Error::InvalidConfig("bootstrap level must be in (0, 1) with at least one resample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scores.len();
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut lp = 0.0;
            let mut syms = 0usize;
            for _ in 0..n {
                let s = &scores[rng.gen_range(0..n)];
                lp += s.log_prob;
                syms += s.symbols;
            }
            lp / syms as f64
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let (mut low, mut high) = (quantile(&stats, tail), quantile(&stats, 1.0 - tail));
    // Identical songs give identical resamples; avoid rounding noise in the bounds.
    if scores.iter().all(|s| s.mean() == scores[0].mean()) {
        let m = symbol_weighted_mean(scores);
        low = m;
        high = m;
    }
    Ok(ConfidenceInterval { low, high, level })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub t: f64,
    pub p_value: f64,
    pub df: usize,
    pub mean_difference: f64,
    pub comparisons: usize,
    pub threshold: f64,
    pub significant: bool,
    /// Set when every paired difference is identical, making the statistic degenerate.
    pub zero_variance: bool,
}

/// Two-sided paired t-test on per-song mean log-probabilities (A minus B),
/// significant when p < 0.05 / comparisons.
pub fn paired_test(
    a: &BTreeMap<String, SongScore>,
    b: &BTreeMap<String, SongScore>,
    comparisons: usize,
) -> Result<PairedTest> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        let missing = a
            .keys()
            .find(|k| !b.contains_key(*k))
            .or_else(|| b.keys().find(|k| !a.contains_key(*k)))
            .cloned()
            .unwrap_or_default();
        return Err(Error::MisalignedSongs(missing));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewSongs(n));
    }
    let comparisons = comparisons.max(1);
    let threshold = 0.05 / comparisons as f64;
    let diffs: Vec<f64> = a.values().zip(b.values()).map(|(x, y)| x.mean() - y.mean()).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let zero_variance = diffs.iter().all(|&d| d == diffs[0]);
    let df = n - 1;
    let (t, p_value) = if zero_variance {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (var / n as f64).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
        (t, 2.0 * dist.cdf(-t.abs()))
    };
    Ok(PairedTest {
        t,
        p_value,
        df,
        mean_difference: mean,
        comparisons,
        threshold,
        significant: p_value < threshold,
        zero_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr_free::normal;

    /// Box-Muller so the tests need no extra distribution crate.
    mod rand_distr_free {
        use rand::Rng;
        pub fn normal(rng: &mut impl Rng) -> f64 {
            let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }

    struct Table(Vec<Vec<f64>>);

    impl LanguageModel for Table {
        fn log_probs(&self, chords: &[ChordClass]) -> Result<Vec<f64>> {
            Ok(self.0[chords[0].index()][..chords.len()].to_vec())
        }
        fn name(&self) -> String {
            "table".into()
        }
    }

    fn songs(lengths: &[usize]) -> Vec<ChordSequence> {
        lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| ChordSequence {
                song_id: format!("s{i}"),
                dataset_id: if i % 2 == 0 { "even".into() } else { "odd".into() },
                chords: (0..n).map(|j| ChordClass::from_index(if j == 0 { i } else { 24 }).unwrap()).collect(),
            })
            .collect()
    }

    #[test]
    fn uniform_model_scores_ln_one_over_25() {
        let r = avg_log_prob(&UniformModel, &songs(&[3, 5, 1])).unwrap();
        assert!((r.avg_log_prob + 3.218876).abs() < 1e-6);
        assert_eq!(r.num_symbols, 9);
        assert_eq!(r.per_dataset["even"].symbols, 4);
    }

    #[test]
    fn two_symbols_at_half() {
        let model = Table(vec![vec![0.5f64.ln(); 2]]);
        let r = avg_log_prob(&model, &songs(&[2])).unwrap();
        assert!((r.avg_log_prob + std::f64::consts::LN_2).abs() < 1e-12);
        assert!(matches!(avg_log_prob(&model, &[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn aggregation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..10).map(|_| (0..200).map(|_| -rng.gen::<f64>() * 4.0).collect()).collect();
        let data = songs(&[200, 13, 7, 150, 1, 64, 99, 2, 120, 5]);
        let model = Table(rows);
        let r = avg_log_prob(&model, &data).unwrap();
        let flat: Vec<f64> = data.iter().flat_map(|s| model.log_probs(&s.chords).unwrap()).collect();
        let flat_mean = flat.iter().sum::<f64>() / flat.len() as f64;
        assert!((r.avg_log_prob - flat_mean).abs() < 1e-12);
        let per_song_total: f64 = r.per_song.values().map(|s| s.log_prob).sum();
        assert!((r.avg_log_prob - per_song_total / r.num_symbols as f64).abs() < 1e-15);
    }

    #[test]
    fn curve_definition() {
        let rows = vec![vec![-1.0, -2.0, -3.0], vec![-3.0, -2.0, -1.0], vec![-9.0]];
        let c = curve_from_log_probs(&rows, 3).unwrap();
        assert_eq!(c.eligible_songs, 2);
        assert_eq!(c.at(1), -2.0);
        assert_eq!(c.at(2), -(1.0 + 2.0 + 3.0 + 2.0) / 4.0);
        assert_eq!(c.at(3), -2.0);
        assert!(matches!(curve_from_log_probs(&rows, 4), Err(Error::NoEligibleSongs(4))));

        let u = cumulative_curve(&UniformModel, &songs(&[100, 120, 50]), 100).unwrap();
        assert_eq!(u.eligible_songs, 2);
        assert!(u.values.iter().all(|v| (v + (25f64).ln()).abs() < 1e-12));
    }

    #[test]
    fn bootstrap_properties() {
        let same = vec![SongScore { symbols: 10, log_prob: -12.0 }; 30];
        let ci = bootstrap_ci(&same, 0.95, 1000, 1).unwrap();
        assert_eq!(ci.low, ci.high);
        assert!(matches!(bootstrap_ci(&same[..1], 0.95, 10, 1), Err(Error::TooFewSongs(1))));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let varied: Vec<SongScore> = (0..80)
            .map(|_| SongScore { symbols: rng.gen_range(20..200), log_prob: -rng.gen_range(100.0..400.0) })
            .collect();
        let point = symbol_weighted_mean(&varied);
        let a = bootstrap_ci(&varied, 0.95, 1000, 5).unwrap();
        let b = bootstrap_ci(&varied, 0.95, 1000, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.low < point && point < a.high);
    }

    #[test]
    fn bootstrap_width_matches_normal_theory() {
        let n = 200;
        let sigma = 0.4;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let scores: Vec<SongScore> = (0..n)
            .map(|_| SongScore { symbols: 1, log_prob: -1.5 + sigma * normal(&mut rng) })
            .collect();
        let mean = symbol_weighted_mean(&scores);
        let sd = (scores.iter().map(|s| (s.log_prob - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let analytic = 1.96 * sd / (n as f64).sqrt();
        let ci = bootstrap_ci(&scores, 0.95, 1000, 77).unwrap();
        let half = (ci.high - ci.low) / 2.0;
        assert!((half - analytic).abs() / analytic < 0.15, "{half} vs {analytic}");
    }

    fn per_song(values: &[f64]) -> BTreeMap<String, SongScore> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("s{i:04}"), SongScore { symbols: 1, log_prob: v }))
            .collect()
    }

    #[test]
    fn paired_test_degenerate_cases() {
        let a = per_song(&[-1.0, -2.0, -1.5]);
        let t = paired_test(&a, &a, 1).unwrap();
        assert_eq!(t.t, 0.0);
        assert!(!t.significant);

        let b = per_song(&[-1.5, -2.5, -2.0]);
        for m in [1, 6, 1000] {
            let t = paired_test(&a, &b, m).unwrap();
            assert!(t.significant && t.zero_variance && t.t == f64::INFINITY);
        }
        let c = per_song(&[-1.0, -2.0]);
        assert!(matches!(paired_test(&a, &c, 1), Err(Error::MisalignedSongs(_))));
    }

    #[test]
    fn paired_test_matches_reference_value() {
        // differences 1, 2, 3, 4: mean 2.5, sd 1.29099, t = 3.872983, df 3, p = 0.030466
        let a = per_song(&[1.0, 2.0, 3.0, 4.0]);
        let b = per_song(&[0.0; 4]);
        let t = paired_test(&a, &b, 1).unwrap();
        assert!((t.t - 3.872983346).abs() < 1e-8);
        assert!((t.p_value - 0.030466).abs() < 1e-5);
        assert!(t.significant);
        assert!(!paired_test(&a, &b, 2).unwrap().significant);
    }

    #[test]
    fn paired_test_power() {
        let n = 100;
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base: Vec<f64> = (0..n).map(|_| -2.0 + normal(&mut rng)).collect();
            let shifted: Vec<f64> = base.iter().map(|x| x + 0.5 + normal(&mut rng)).collect();
            let t = paired_test(&per_song(&shifted), &per_song(&base), 6).unwrap();
            hits += t.significant as usize;
        }
        assert!(hits >= 95, "{hits}/100");
    }
}
