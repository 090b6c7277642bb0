//! Mini-batch training with Adam, early stopping on the validation average
//! log-probability, checkpoint/resume and fine-tuning.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chord::{vocabulary_hash, ChordClass};
use crate::corpus::ChordSequence;
use crate::embedding::{train_skipgram, EmbeddingKind};
use crate::error::{Error, Result};
use crate::eval::LanguageModel;
use crate::neural::adam::{adam_step, AdamState};
use crate::neural::config::NeuralConfig;
use crate::neural::network::{backward, predict_log_probs, Batch, NeuralParameters};
use crate::seed::{derive_indexed, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience rule over a higher-is-better score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_score: f64,
    pub best_epoch: usize,
    pub epochs_since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_score: f64::NEG_INFINITY,
            best_epoch: 0,
            epochs_since_best: 0,
        }
    }

    /// Starts from an already achieved score, so only strictly better epochs count.
    pub fn with_baseline(patience: usize, best_score: f64, best_epoch: usize) -> Self {
        EarlyStopping {
            patience,
            best_score,
            best_epoch,
            epochs_since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> Verdict {
        if score > self.best_score {
            self.best_score = score;
            self.best_epoch = epoch;
            self.epochs_since_best = 0;
            Verdict::Improved
        } else {
            self.epochs_since_best += 1;
            if self.epochs_since_best >= self.patience {
                Verdict::Stop
            } else {
                Verdict::NoImprovement
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Patience,
    EpochCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// Average log-probability of the validation set.
    pub val_score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_score: f64,
    pub stop_reason: Option<StopReason>,
    pub learning_rate: f64,
    /// Wall-clock seconds per epoch. Timing is not reproducible, so it is
    /// neither serialised nor compared.
    #[serde(skip)]
    pub epoch_seconds: Vec<f64>,
}

impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.epochs == other.epochs
            && self.best_epoch == other.best_epoch
            && self.best_val_score.to_bits() == other.best_val_score.to_bits()
            && self.stop_reason == other.stop_reason
            && self.learning_rate.to_bits() == other.learning_rate.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub score: f64,
    pub params: NeuralParameters,
    pub adam: AdamState,
}

/// A trained network usable as a [`LanguageModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub config: NeuralConfig,
    pub params: NeuralParameters,
}

impl LanguageModel for NeuralModel {
    fn log_probs(&self, chords: &[ChordClass]) -> Result<Vec<f64>> {
        predict_log_probs(&self.params, &self.config, chords)
    }

    fn name(&self) -> String {
        format!("{}-rnn", self.config.cell)
    }
}

/// Complete training state; serialising it and resuming continues the run
/// exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trainer {
    pub config: NeuralConfig,
    pub learning_rate: f64,
    pub params: NeuralParameters,
    pub adam: AdamState,
    /// Epochs completed so far.
    pub epoch: usize,
    pub stopper: EarlyStopping,
    pub best: Option<Checkpoint>,
    pub report: TrainReport,
    /// Separates the shuffle streams of a fine-tuning stage from the original run.
    pub stage: String,
}

pub fn average_log_prob(params: &NeuralParameters, config: &NeuralConfig, data: &[ChordSequence]) -> Result<f64> {
    use rayon::prelude::*;
    let (total, n) = data
        .par_iter()
        .map(|s| predict_log_probs(params, config, &s.chords).map(|lp| (lp.iter().sum::<f64>(), lp.len())))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, 0usize), |(a, b), (x, y)| (a + x, b + y));
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(total / n as f64)
}

impl Trainer {
    /// Initialises weights (and pre-trains skip-gram vectors on `train` when
    /// the config asks for them).
    pub fn new(config: &NeuralConfig, train: &[ChordSequence]) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let pretrained = match config.embedding.kind {
            EmbeddingKind::SkipGram => Some(train_skipgram(train, &config.skipgram_config())?.embedding),
            _ => None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "init"));
        let params = NeuralParameters::init(config, pretrained.as_ref(), &mut rng)?;
        let adam = AdamState::new(&params);
        Ok(Trainer {
            config: config.clone(),
            learning_rate: config.learning_rate,
            params,
            adam,
            epoch: 0,
            stopper: EarlyStopping::new(config.patience),
            best: None,
            report: TrainReport {
                epochs: Vec::new(),
                best_epoch: 0,
                best_val_score: f64::NEG_INFINITY,
                stop_reason: None,
                learning_rate: config.learning_rate,
                epoch_seconds: Vec::new(),
            },
            stage: "train".into(),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.report.stop_reason.is_some()
    }

    pub fn best_score(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.score)
    }

    pub fn best_model(&self) -> Result<NeuralModel> {
        let best = self.best.as_ref().ok_or(Error::MissingCheckpoint)?;
        Ok(NeuralModel {
            config: self.config.clone(),
            params: best.params.clone(),
        })
    }

    fn run_epoch(&mut self, train: &[ChordSequence]) -> Result<f64> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed(self.config.seed, &self.stage, self.epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            let seqs: Vec<&[ChordClass]> = chunk.iter().map(|&i| train[i].chords.as_slice()).collect();
            let batch = Batch::new(&seqs);
            let valid = batch.valid_steps();
            let (loss, mut grads) = backward(&self.params, &self.config, &batch)?;
            loss_sum += loss * valid as f64;
            steps += valid;
            if let Some(clip) = self.config.clip_norm {
                let norm = grads.global_norm();
                if norm > clip {
                    let f = clip / norm;
                    grads.tensors_mut().into_iter().for_each(|t| t.scale(f));
                }
            }
            adam_step(&mut self.params, &grads, &mut self.adam, self.learning_rate);
        }
        self.params.check_finite().map_err(|e| Error::DivergedRun {
            epoch: self.epoch + 1,
            detail: e.to_string(),
        })?;
        Ok(loss_sum / steps.max(1) as f64)
    }

    /// Trains until `max_epoch` epochs are complete or the run stops.
    pub fn run_until(&mut self, max_epoch: usize, train: &[ChordSequence], validation: &[ChordSequence]) -> Result<()> {
        let cap = max_epoch.min(self.config.max_epochs);
        while !self.is_finished() && self.epoch < cap {
            let started = Instant::now();
            let train_loss = self.run_epoch(train)?;
            self.epoch += 1;
            let val_score = average_log_prob(&self.params, &self.config, validation)?;
            if !val_score.is_finite() || !train_loss.is_finite() {
                return Err(Error::DivergedRun {
                    epoch: self.epoch,
                    detail: format!("train loss {train_loss}, validation score {val_score}"),
                });
            }
            self.report.epochs.push(EpochRecord {
                epoch: self.epoch,
                train_loss,
                val_score,
            });
            match self.stopper.observe(self.epoch, val_score) {
                Verdict::Improved => {
                    self.best = Some(Checkpoint {
                        epoch: self.epoch,
                        score: val_score,
                        params: self.params.clone(),
                        adam: self.adam.clone(),
                    });
                    self.report.best_epoch = self.epoch;
                    self.report.best_val_score = val_score;
                }
                Verdict::Stop => self.report.stop_reason = Some(StopReason::Patience),
                Verdict::NoImprovement => {}
            }
            self.report.epoch_seconds.push(started.elapsed().as_secs_f64());
            if !self.is_finished() && self.epoch >= self.config.max_epochs {
                self.report.stop_reason = Some(StopReason::EpochCap);
            }
        }
        Ok(())
    }

    pub fn to_checkpoint_file(&self) -> CheckpointFile {
        CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: 1,
            vocabulary: vocabulary_hash(),
            trainer: self.clone(),
        }
    }
}

/// Full run with the configured patience and epoch cap.
pub fn train(config: &NeuralConfig, train_set: &[ChordSequence], validation: &[ChordSequence]) -> Result<Trainer> {
    let mut trainer = Trainer::new(config, train_set)?;
    trainer.run_until(usize::MAX, train_set, validation)?;
    Ok(trainer)
}

/// Restarts from the best checkpoint (weights and optimiser moments) at a
/// tenth of the learning rate with fresh patience. Only epochs that beat the
/// original best replace it, so the result is never worse.
pub fn fine_tune(trained: &Trainer, train_set: &[ChordSequence], validation: &[ChordSequence]) -> Result<Trainer> {
    let best = trained.best.as_ref().ok_or(Error::MissingCheckpoint)?;
    let lr = trained.learning_rate / 10.0;
    let mut config = trained.config.clone();
    config.max_epochs = best.epoch + trained.config.max_epochs;
    let mut tuner = Trainer {
        config,
        learning_rate: lr,
        params: best.params.clone(),
        adam: best.adam.clone(),
        epoch: best.epoch,
        stopper: EarlyStopping::with_baseline(trained.config.patience, best.score, best.epoch),
        best: Some(best.clone()),
        report: TrainReport {
            epochs: Vec::new(),
            best_epoch: best.epoch,
            best_val_score: best.score,
            stop_reason: None,
            learning_rate: lr,
            epoch_seconds: Vec::new(),
        },
        stage: format!("{}+fine-tune", trained.stage),
    };
    tuner.run_until(usize::MAX, train_set, validation)?;
    Ok(tuner)
}

pub const CHECKPOINT_FORMAT: &str = "chordlm-neural-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub format: String,
    pub version: u32,
    pub vocabulary: String,
    pub trainer: Trainer,
}

impl CheckpointFile {
    pub fn into_trainer(self) -> Result<Trainer> {
        if self.format != CHECKPOINT_FORMAT || self.version != 1 {
            return Err(Error::Format(format!("{} v{}", self.format, self.version)));
        }
        if self.vocabulary != vocabulary_hash() {
            return Err(Error::VocabularyMismatch {
                model: self.vocabulary,
                corpus: vocabulary_hash(),
            });
        }
        Ok(self.trainer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::config::CellKind;

    fn periodic(n_songs: usize, len: usize) -> Vec<ChordSequence> {
        let motif = [0usize, 14, 18, 10];
        (0..n_songs)
            .map(|i| ChordSequence {
                song_id: format!("p{i}"),
                dataset_id: "d".into(),
                chords: (0..len)
                    .map(|k| ChordClass::from_index(motif[(k + i) % 4]).unwrap())
                    .collect(),
            })
            .collect()
    }

    fn small_config(cell: CellKind) -> NeuralConfig {
        let mut c = NeuralConfig::new(cell, 1, 16);
        c.learning_rate = 0.01;
        c.max_epochs = 6;
        c.seed = 3;
        c
    }

    #[test]
    fn patience_semantics() {
        let mut s = EarlyStopping::new(15);
        let mut scores = vec![-1.0];
        scores.extend(std::iter::repeat_n(-1.1, 15));
        let mut stopped_at = None;
        for (i, &x) in scores.iter().enumerate() {
            if s.observe(i + 1, x) == Verdict::Stop {
                stopped_at = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped_at, Some(16));
        assert_eq!(s.best_epoch, 1);
    }

    #[test]
    fn training_is_deterministic() {
        let data = periodic(8, 20);
        let cfg = small_config(CellKind::Gru);
        let a = train(&cfg, &data, &data[..2]).unwrap();
        let b = train(&cfg, &data, &data[..2]).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.params, b.params);
        assert_eq!(a.report.epochs.len(), 6);
        assert_eq!(a.report.stop_reason, Some(StopReason::EpochCap));
    }

    #[test]
    fn resume_from_checkpoint_is_exact() {
        let data = periodic(8, 20);
        let cfg = small_config(CellKind::Lstm);
        let straight = train(&cfg, &data, &data[..2]).unwrap();

        let mut first = Trainer::new(&cfg, &data).unwrap();
        first.run_until(2, &data, &data[..2]).unwrap();
        let json = serde_json::to_string(&first.to_checkpoint_file()).unwrap();
        let file: CheckpointFile = serde_json::from_str(&json).unwrap();
        let mut resumed = file.into_trainer().unwrap();
        resumed.run_until(usize::MAX, &data, &data[..2]).unwrap();
        assert_eq!(resumed.report, straight.report);
        assert_eq!(resumed.params, straight.params);
    }

    #[test]
    fn fine_tune_never_worse() {
        let data = periodic(8, 20);
        let mut cfg = small_config(CellKind::Simple);
        cfg.patience = 2;
        let base = train(&cfg, &data, &data[..2]).unwrap();
        let tuned = fine_tune(&base, &data, &data[..2]).unwrap();
        assert!(tuned.best_score() >= base.best_score());
        assert_eq!(tuned.learning_rate, cfg.learning_rate / 10.0);
        if let Some(first) = tuned.report.epochs.first() {
            assert_eq!(first.epoch, base.best.as_ref().unwrap().epoch + 1);
        }
        let fresh = Trainer::new(&cfg, &data).unwrap();
        assert!(matches!(fine_tune(&fresh, &data, &data[..2]), Err(Error::MissingCheckpoint)));
    }

    #[test]
    fn gru_learns_periodic_corpus() {
        let data = periodic(24, 40);
        let mut cfg = NeuralConfig::new(CellKind::Gru, 1, 16);
        cfg.learning_rate = 0.01;
        cfg.max_epochs = 200;
        cfg.patience = 15;
        let t = train(&cfg, &data, &data[..4]).unwrap();
        let best = t.best_model().unwrap();
        // the first chord of a song is unpredictable (one of four); the rest is fixed
        let lp = best.log_probs(&data[0].chords).unwrap();
        assert!(lp[8..].iter().all(|&x| x > -0.05), "{lp:?}");
        let late_loss = -lp[4..].iter().sum::<f64>() / (lp.len() - 4) as f64;
        assert!(late_loss < 0.05, "{late_loss}");
    }
}
