//! Random configuration sampling and Hyperband scheduling.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chord::VOCAB_SIZE;
use crate::corpus::ChordSequence;
use crate::embedding::EmbeddingKind;
use crate::error::{Error, Result};
use crate::neural::config::{CellKind, EmbeddingSpec, NeuralConfig};
use crate::neural::train::Trainer;
use crate::seed::{derive_indexed, derive_seed};

/// Discrete sample sets for every searched hyper-parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub embedding_dims: Vec<usize>,
    pub embedding_kinds: Vec<EmbeddingKind>,
    pub num_layers: Vec<usize>,
    pub hidden_sizes: Vec<usize>,
    pub skip_connections: Vec<bool>,
    /// Networks with at most this many layers use the shallow learning rates.
    pub depth_threshold: usize,
    pub lr_shallow: Vec<f64>,
    pub lr_deep: Vec<f64>,
    pub gru_lr_shallow: Vec<f64>,
    pub gru_lr_deep: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            embedding_dims: vec![4, 8, 16, 24],
            embedding_kinds: vec![EmbeddingKind::OneHot, EmbeddingKind::SkipGram, EmbeddingKind::Learned],
            num_layers: vec![1, 2, 3, 4, 5],
            hidden_sizes: vec![128, 256, 512, 1024],
            skip_connections: vec![true, false],
            depth_threshold: 3,
            lr_shallow: vec![0.001, 0.0005],
            lr_deep: vec![0.0005, 0.00025],
            gru_lr_shallow: vec![0.005, 0.001],
            gru_lr_deep: vec![0.001, 0.0005],
        }
    }
}

impl SearchSpace {
    pub fn learning_rates(&self, cell: CellKind, num_layers: usize) -> &[f64] {
        let shallow = num_layers <= self.depth_threshold;
        match (cell, shallow) {
            (CellKind::Gru, true) => &self.gru_lr_shallow,
            (CellKind::Gru, false) => &self.gru_lr_deep,
            (_, true) => &self.lr_shallow,
            (_, false) => &self.lr_deep,
        }
    }

    pub fn contains(&self, config: &NeuralConfig) -> bool {
        let emb_ok = match config.embedding.kind {
            EmbeddingKind::OneHot => config.embedding.dim == VOCAB_SIZE,
            _ => self.embedding_dims.contains(&config.embedding.dim),
        };
        emb_ok
            && self.embedding_kinds.contains(&config.embedding.kind)
            && self.num_layers.contains(&config.num_layers)
            && self.hidden_sizes.contains(&config.hidden_size)
            && self.skip_connections.contains(&config.skip_connections)
            && self
                .learning_rates(config.cell, config.num_layers)
                .contains(&config.learning_rate)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = self.embedding_kinds.is_empty()
            || self.num_layers.is_empty()
            || self.hidden_sizes.is_empty()
            || self.skip_connections.is_empty()
            || self.lr_shallow.is_empty() && self.lr_deep.is_empty()
            || (self.embedding_kinds.iter().any(|k| *k != EmbeddingKind::OneHot) && self.embedding_dims.is_empty());
        if empty {
            return Err(Error::InvalidConfig("search space has an empty sample set".into()));
        }
        for cell in CellKind::ALL {
            for &n in &self.num_layers {
                if self.learning_rates(cell, n).is_empty() {
                    return Err(Error::InvalidConfig(format!("no learning rates for {cell} with {n} layers")));
                }
            }
        }
        Ok(())
    }
}

/// Independent uniform draws per field. Fixed training settings (batch size,
/// patience, clipping) come from [`NeuralConfig::new`].
pub fn sample_config(space: &SearchSpace, cell: CellKind, rng: &mut impl Rng) -> NeuralConfig {
    let num_layers = *space.num_layers.choose(rng).unwrap();
    let hidden_size = *space.hidden_sizes.choose(rng).unwrap();
    let kind = *space.embedding_kinds.choose(rng).unwrap();
    let embedding = match kind {
        EmbeddingKind::OneHot => EmbeddingSpec::one_hot(),
        kind => EmbeddingSpec {
            kind,
            dim: *space.embedding_dims.choose(rng).unwrap(),
        },
    };
    let mut config = NeuralConfig::new(cell, num_layers, hidden_size);
    config.embedding = embedding;
    config.skip_connections = *space.skip_connections.choose(rng).unwrap();
    config.learning_rate = *space.learning_rates(cell, num_layers).choose(rng).unwrap();
    config.seed = rng.gen();
    config
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub configs: usize,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bracket {
    pub s: usize,
    pub rounds: Vec<Round>,
}

impl Bracket {
    pub fn configs(&self) -> usize {
        self.rounds[0].configs
    }
}

/// Bracket/round table of one Hyperband execution.
///
/// With `s_max = floor(log_eta R)` and total budget `B`, bracket `s` samples
/// `n = ceil((B/R) eta^s / (s+1))` configs at `r = R eta^-s` epochs; round
/// `i` keeps `floor(n eta^-i)` configs and trains them to `r eta^i` epochs.
/// `B/R` is stored in hundredths so the table is exact integer arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperbandPlan {
    pub eta: usize,
    pub max_resource: usize,
    pub budget_hundredths: u64,
    pub brackets: Vec<Bracket>,
}

pub const DEFAULT_ETA: usize = 3;
pub const DEFAULT_MAX_RESOURCE: usize = 81;
pub const DEFAULT_CONFIGS_PER_CELL: usize = 128;

fn s_max(eta: usize, max_resource: usize) -> usize {
    let mut s = 0;
    let mut p = eta;
    while p <= max_resource {
        s += 1;
        p *= eta;
    }
    s
}

impl HyperbandPlan {
    /// The standard schedule, `B = (s_max + 1) R`.
    pub fn new(eta: usize, max_resource: usize) -> Result<Self> {
        if eta < 2 || max_resource < 1 {
            return Err(Error::InvalidConfig("need eta >= 2 and R >= 1".into()));
        }
        Self::with_budget(eta, max_resource, (s_max(eta, max_resource) as u64 + 1) * 100)
    }

    pub fn with_budget(eta: usize, max_resource: usize, budget_hundredths: u64) -> Result<Self> {
        if eta < 2 || max_resource < 1 || budget_hundredths == 0 {
            return Err(Error::InvalidConfig("need eta >= 2, R >= 1 and a positive budget".into()));
        }
        let top = s_max(eta, max_resource);
        let brackets = (0..=top)
            .rev()
            .map(|s| {
                let eta_s = (eta as u64).pow(s as u32);
                let n = (budget_hundredths * eta_s).div_ceil(100 * (s as u64 + 1)) as usize;
                let rounds = (0..=s)
                    .map(|i| {
                        let shrink = eta.pow(i as u32);
                        let epochs = max_resource as f64 * (eta as f64).powi(i as i32 - s as i32);
                        Round {
                            configs: (n / shrink).max(1),
                            epochs: (epochs.round() as usize).max(1),
                        }
                    })
                    .collect();
                Bracket { s, rounds }
            })
            .collect();
        Ok(HyperbandPlan {
            eta,
            max_resource,
            budget_hundredths,
            brackets,
        })
    }

    /// Largest budget (to a hundredth of `R`) whose schedule samples at most
    /// `target` configs. The standard schedule gives no exact control over the
    /// total, so this is how a fixed count per cell type is reached.
    pub fn for_target_configs(eta: usize, max_resource: usize, target: usize) -> Result<Self> {
        let mut best = None;
        let mut h = 1u64;
        loop {
            let plan = Self::with_budget(eta, max_resource, h)?;
            if plan.total_configs() > target {
                break;
            }
            best = Some(plan);
            h += 1;
        }
        best.ok_or_else(|| Error::InvalidConfig(format!("no schedule samples at most {target} configs")))
    }

    pub fn total_configs(&self) -> usize {
        self.brackets.iter().map(Bracket::configs).sum()
    }

    /// Total training epochs if every run used its full allotment.
    pub fn total_epochs(&self) -> usize {
        self.brackets
            .iter()
            .map(|b| {
                let mut prev = 0;
                b.rounds
                    .iter()
                    .map(|r| {
                        let extra = r.configs * (r.epochs - prev.min(r.epochs));
                        prev = r.epochs;
                        extra
                    })
                    .sum::<usize>()
            })
            .sum()
    }
}

/// A trainable run whose budget can be extended. `extend` trains the state
/// to `epochs` in total and returns its best validation score so far;
/// extending from a fresh state must give the same score as extending in
/// steps.
pub trait Objective: Sync {
    type State: Send;

    fn start(&self, config: &NeuralConfig) -> Result<Self::State>;

    fn extend(&self, state: &mut Self::State, epochs: usize) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub trial: usize,
    pub bracket: usize,
    pub round: usize,
    pub config_hash: String,
    pub config: NeuralConfig,
    pub budget: usize,
    /// Missing for failed runs, which rank below every finished one.
    pub score: Option<f64>,
    pub wall_clock_seconds: f64,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LeaderboardEntry {
    pub fn rank_score(&self) -> f64 {
        self.score.unwrap_or(f64::NEG_INFINITY)
    }
}

pub fn read_leaderboard(path: &Path) -> Result<Vec<LeaderboardEntry>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::ParseError {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct SearchOptions {
    /// Worker threads per round; 0 uses the global pool.
    pub jobs: usize,
    /// Append-only JSON Lines leaderboard. Rows already present are reused
    /// instead of re-run.
    pub leaderboard: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub cell: CellKind,
    pub best_config: NeuralConfig,
    pub best_score: f64,
    pub best_trial: usize,
    pub best_budget: usize,
    pub total_configs: usize,
    pub plan: HyperbandPlan,
    #[serde(skip)]
    pub entries: Vec<LeaderboardEntry>,
}

struct Trial<S> {
    id: usize,
    config: NeuralConfig,
    hash: String,
    state: Option<S>,
    failed: bool,
    score: f64,
}

/// Runs every bracket of `plan`. Configs are sampled in bracket order from a
/// stream derived from `seed`, so a rerun with the same leaderboard replays
/// the same search.
pub fn run_hyperband<O: Objective>(
    space: &SearchSpace,
    cell: CellKind,
    objective: &O,
    plan: &HyperbandPlan,
    seed: u64,
    options: &SearchOptions,
) -> Result<SearchOutcome> {
    space.validate()?;
    let mut done: HashMap<(usize, usize), LeaderboardEntry> = HashMap::new();
    if let Some(path) = &options.leaderboard {
        if path.exists() {
            for e in read_leaderboard(path)? {
                done.insert((e.trial, e.round), e);
            }
        }
    }
    let writer = match &options.leaderboard {
        Some(path) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(path)?)),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("hyperband-{cell}")));
    let mut entries: Vec<LeaderboardEntry> = Vec::new();
    let mut next_id = 0usize;

    for bracket in &plan.brackets {
        let mut trials: Vec<Trial<O::State>> = (0..bracket.configs())
            .map(|_| {
                let mut config = sample_config(space, cell, &mut rng);
                config.seed = derive_indexed(seed, "trial", next_id as u64);
                config.max_epochs = config.max_epochs.max(plan.max_resource);
                let t = Trial {
                    id: next_id,
                    hash: config.hash(),
                    config,
                    state: None,
                    failed: false,
                    score: f64::NEG_INFINITY,
                };
                next_id += 1;
                t
            })
            .collect();

        for (round_idx, round) in bracket.rounds.iter().enumerate() {
            let results: Vec<LeaderboardEntry> = pool.install(|| {
                trials
                    .par_iter_mut()
                    .map(|t| {
                        if let Some(e) = done.get(&(t.id, round_idx)) {
                            return e.clone();
                        }
                        let started = Instant::now();
                        let outcome = if t.failed {
                            Err(Error::ObjectiveFailure("failed in an earlier round".into()))
                        } else {
                            let state = match t.state.take() {
                                Some(s) => Ok(s),
                                None => objective.start(&t.config),
                            };
                            state.and_then(|mut s| {
                                let r = objective.extend(&mut s, round.epochs);
                                t.state = Some(s);
                                r
                            })
                        };
                        let (score, status, error) = match outcome {
                            Ok(x) if x.is_finite() => (Some(x), TrialStatus::Ok, None),
                            Ok(x) => (None, TrialStatus::Failed, Some(format!("non-finite score {x}"))),
                            Err(e) => (None, TrialStatus::Failed, Some(e.to_string())),
                        };
                        LeaderboardEntry {
                            trial: t.id,
                            bracket: bracket.s,
                            round: round_idx,
                            config_hash: t.hash.clone(),
                            config: t.config.clone(),
                            budget: round.epochs,
                            score,
                            wall_clock_seconds: started.elapsed().as_secs_f64(),
                            status,
                            error,
                        }
                    })
                    .collect()
            });
            for (t, e) in trials.iter_mut().zip(&results) {
                t.score = e.rank_score();
                if e.status == TrialStatus::Failed {
                    t.failed = true;
                    t.state = None;
                }
                if let Some(w) = &writer {
                    if !done.contains_key(&(e.trial, e.round)) {
                        let mut w = w.lock().expect("leaderboard lock");
                        writeln!(w, "{}", serde_json::to_string(e)?)?;
                    }
                }
            }
            if let Some(w) = &writer {
                w.lock().expect("leaderboard lock").flush()?;
            }
            entries.extend(results);

            if let Some(next) = bracket.rounds.get(round_idx + 1) {
                trials.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.hash.cmp(&b.hash)));
                trials.truncate(next.configs);
            }
        }
    }

    let best = entries
        .iter()
        .filter(|e| e.status == TrialStatus::Ok)
        .max_by(|a, b| {
            a.rank_score()
                .total_cmp(&b.rank_score())
                .then_with(|| b.config_hash.cmp(&a.config_hash))
                .then_with(|| b.trial.cmp(&a.trial))
        })
        .ok_or_else(|| Error::ObjectiveFailure("every run failed".into()))?;
    Ok(SearchOutcome {
        cell,
        best_config: best.config.clone(),
        best_score: best.rank_score(),
        best_trial: best.trial,
        best_budget: best.budget,
        total_configs: next_id,
        plan: plan.clone(),
        entries,
    })
}

/// Best score reached by each trial at any budget.
pub fn best_per_trial(entries: &[LeaderboardEntry]) -> BTreeMap<usize, f64> {
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    for e in entries {
        let v = out.entry(e.trial).or_insert(f64::NEG_INFINITY);
        *v = v.max(e.rank_score());
    }
    out
}

/// Trains neural networks on a fixed split; the budget is in epochs.
pub struct NeuralObjective<'a> {
    pub train: &'a [ChordSequence],
    pub validation: &'a [ChordSequence],
    /// Applied to every sampled config before training, e.g. to shrink
    /// patience at desk scale.
    pub adjust: Option<Box<dyn Fn(&mut NeuralConfig) + Sync + 'a>>,
}

impl<'a> NeuralObjective<'a> {
    pub fn new(train: &'a [ChordSequence], validation: &'a [ChordSequence]) -> Self {
        NeuralObjective {
            train,
            validation,
            adjust: None,
        }
    }
}

impl Objective for NeuralObjective<'_> {
    type State = Trainer;

    fn start(&self, config: &NeuralConfig) -> Result<Trainer> {
        let mut config = config.clone();
        if let Some(f) = &self.adjust {
            f(&mut config);
        }
        Trainer::new(&config, self.train).map_err(|e| Error::ObjectiveFailure(e.to_string()))
    }

    fn extend(&self, state: &mut Trainer, epochs: usize) -> Result<f64> {
        state
            .run_until(epochs, self.train, self.validation)
            .map_err(|e| Error::ObjectiveFailure(e.to_string()))?;
        Ok(state.best_score())
    }
}
