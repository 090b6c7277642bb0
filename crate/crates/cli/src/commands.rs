use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;
use serde::{Deserialize, Serialize};

use chordlm::chord::vocabulary_hash;
use chordlm::corpus::{
    dataset_counts, deduplicate, load_manifest_songs, read_corpus, stratified_split, to_sequence, write_corpus,
    ChordSequence, CorpusManifest,
};
use chordlm::embedding::EmbeddingKind;
use chordlm::eval::{
    avg_log_prob, bootstrap_ci, cumulative_curve, paired_test, ConfidenceInterval, CumulativeCurve, EvalResult,
    LanguageModel, PairedTest,
};
use chordlm::hyperopt::{run_hyperband, HyperbandPlan, NeuralObjective, SearchOptions, SearchSpace};
use chordlm::neural::{fine_tune, CheckpointFile, EmbeddingSpec, NeuralConfig, TrainReport, Trainer};
use chordlm::ngram::{NGramModel, DEFAULT_ALPHA_GRID};
use chordlm::seed::derive_indexed;
use chordlm::synth::{motif_corpus, periodic_corpus, random_corpus, MarkovChain};
use chordlm::ChordClass;

use crate::artifact::{load_model, load_split, read_json, write_json, ModelArtifact, ModelPayload, SplitArtifact};
use crate::manifest::{locate, sidecar, RunManifest};
use crate::{
    AugmentArgs, Cli, Command, EvaluateArgs, IngestArgs, NeuralArgs, NgramArgs, ReplayArgs, SearchArgs, SplitArgs,
    SynthArgs, TrainCommand,
};

/// Misuse of the command line that clap cannot detect.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Some inputs failed to load; the rest were processed.
#[derive(Debug, thiserror::Error)]
#[error("{0} input file(s) could not be used")]
pub struct DataErrors(pub usize);

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(chordlm::Error::InvalidConfig(_)) = cause.downcast_ref::<chordlm::Error>() {
            return 2;
        }
    }
    1
}

pub fn run(cli: Cli, args: &[String]) -> Result<()> {
    if cli.jobs > 0 {
        // fails only if the pool was already built, e.g. during replay
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    let jobs = cli.jobs;
    match cli.command {
        Command::Ingest(a) => ingest(a, args),
        Command::Split(a) => split(a, args),
        Command::Augment(a) => augment(a, args),
        Command::Train(TrainCommand::Ngram(a)) => train_ngram(a, args),
        Command::Train(TrainCommand::Neural(a)) => train_neural(a, args),
        Command::Search(a) => search(a, jobs, args),
        Command::Evaluate(a) => evaluate(a, args),
        Command::Synth(a) => synth(a, args),
        Command::Replay(a) => replay(a),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub dataset: String,
    pub songs: usize,
    pub chords: usize,
    pub unique_songs: usize,
    pub unique_chords: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestStats {
    pub datasets: Vec<DatasetStats>,
    pub total: DatasetStats,
    pub errors: Vec<String>,
}

fn render_stats(stats: &IngestStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<20} {:>8} {:>10} {:>8} {:>10}", "dataset", "songs", "chords", "unique", "chords");
    for d in stats.datasets.iter().chain([&stats.total]) {
        let _ = writeln!(
            out,
            "{:<20} {:>8} {:>10} {:>8} {:>10}",
            d.dataset, d.songs, d.chords, d.unique_songs, d.unique_chords
        );
    }
    out
}

fn ingest(a: IngestArgs, args: &[String]) -> Result<()> {
    let corpus_manifest = CorpusManifest::load(&a.manifest)?;
    let root = a.manifest.parent().unwrap_or(Path::new("."));
    let mut manifest = RunManifest::new("ingest", args).input(&a.manifest)?;
    for (_, path, _) in corpus_manifest.files(root)? {
        manifest = manifest.input(&path)?;
    }

    let (songs, mut errors) = load_manifest_songs(&a.manifest)?;
    let mut loaded = Vec::new();
    let mut all = Vec::new();
    for song in songs {
        match to_sequence(&song) {
            Ok(seq) => {
                all.push(seq);
                loaded.push(song);
            }
            Err(e) => errors.push(e),
        }
    }
    let unique: Vec<ChordSequence> = deduplicate(loaded, &corpus_manifest.priority())
        .iter()
        .map(to_sequence)
        .collect::<chordlm::Result<_>>()?;

    let mut per: BTreeMap<String, DatasetStats> = BTreeMap::new();
    for (d, songs, chords) in dataset_counts(&all) {
        let e = per.entry(d.clone()).or_default();
        e.dataset = d;
        e.songs = songs;
        e.chords = chords;
    }
    for (d, songs, chords) in dataset_counts(&unique) {
        let e = per.entry(d.clone()).or_default();
        e.dataset = d;
        e.unique_songs = songs;
        e.unique_chords = chords;
    }
    let order = corpus_manifest.priority();
    let mut datasets: Vec<DatasetStats> = order.iter().filter_map(|d| per.remove(d)).collect();
    datasets.extend(per.into_values());
    let total = datasets.iter().fold(
        DatasetStats {
            dataset: "total".into(),
            ..Default::default()
        },
        |mut t, d| {
            t.songs += d.songs;
            t.chords += d.chords;
            t.unique_songs += d.unique_songs;
            t.unique_chords += d.unique_chords;
            t
        },
    );
    let stats = IngestStats {
        datasets,
        total,
        errors: errors.iter().map(|e| e.to_string()).collect(),
    };

    write_corpus(&a.out, &unique)?;
    let mut manifest = manifest.output(&a.out);
    if let Some(p) = &a.stats {
        manifest = manifest.output(p);
    }
    write_json(&sidecar(&a.out), &manifest)?;
    if let Some(p) = &a.stats {
        #[derive(Serialize)]
        struct Out<'a> {
            manifest: &'a RunManifest,
            #[serde(flatten)]
            stats: &'a IngestStats,
        }
        write_json(p, &Out { manifest: &manifest, stats: &stats })?;
    }
    print!("{}", render_stats(&stats));
    for e in &errors {
        eprintln!("error: {e}");
    }
    if !errors.is_empty() {
        bail!(DataErrors(errors.len()));
    }
    Ok(())
}

fn split(a: SplitArgs, args: &[String]) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let mut split = stratified_split(&corpus, a.seed)?;
    if a.augment {
        split.augment();
    }
    let manifest = RunManifest::new("split", args)
        .seed("seed", a.seed)
        .input(&a.corpus)?
        .output(&a.out);
    println!(
        "train {} / validation {} / test {} songs{}",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        if a.augment { format!(" ({} after augmentation)", split.training().len()) } else { String::new() }
    );
    write_json(
        &a.out,
        &SplitArtifact {
            manifest,
            vocabulary: vocabulary_hash(),
            split,
        },
    )
}

fn augment(a: AugmentArgs, args: &[String]) -> Result<()> {
    let mut artifact = load_split(&a.split)?;
    artifact.split.augment();
    artifact.manifest = RunManifest::new("augment", args).input(&a.split)?.output(&a.out);
    println!("{} training songs after augmentation", artifact.split.training().len());
    write_json(&a.out, &artifact)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaScore {
    pub alpha: f64,
    /// Missing when the validation set hits an undefined distribution.
    pub validation_avg_log_prob: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NgramReport {
    pub manifest: RunManifest,
    pub kind: String,
    pub order: usize,
    pub alpha: f64,
    pub alpha_scores: Vec<AlphaScore>,
    pub num_contexts: usize,
    pub training_songs: usize,
    pub validation_avg_log_prob: f64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn train_ngram(a: NgramArgs, args: &[String]) -> Result<()> {
    let artifact = load_split(&a.split)?;
    let split = &artifact.split;
    let fitted = NGramModel::fit(split.training(), a.order)?;
    let (alpha, scores) = match a.alpha {
        Some(alpha) => {
            if alpha.is_nan() || alpha < 0.0 {
                bail!(UsageError(format!("alpha must be non-negative, got {alpha}")));
            }
            (alpha, Vec::new())
        }
        None => {
            let grid = a.alpha_grid.clone().unwrap_or_else(|| DEFAULT_ALPHA_GRID.to_vec());
            fitted.tune_alpha(&split.validation, &grid)?
        }
    };
    let model = fitted.with_alpha(alpha);
    let val = avg_log_prob(&model, &split.validation)?;
    let mut manifest = RunManifest::new("train", args)
        .config(&serde_json::json!({ "kind": "ngram", "order": a.order, "alpha": a.alpha, "alpha_grid": a.alpha_grid }))?
        .input(&a.split)?
        .output(&a.out);
    if let Some(r) = &a.report {
        manifest = manifest.output(r);
    }
    println!("{}: alpha {alpha}, validation L = {:.6}", model.name(), val.avg_log_prob);
    write_json(
        &a.out,
        &ModelArtifact {
            manifest: manifest.clone(),
            model: ModelPayload::Ngram(model.to_file()),
        },
    )?;
    if let Some(r) = &a.report {
        write_json(
            r,
            &NgramReport {
                manifest,
                kind: "ngram".into(),
                order: a.order,
                alpha,
                alpha_scores: scores
                    .iter()
                    .map(|&(alpha, s)| AlphaScore {
                        alpha,
                        validation_avg_log_prob: finite(s),
                    })
                    .collect(),
                num_contexts: model.num_contexts(),
                training_songs: split.training().len(),
                validation_avg_log_prob: val.avg_log_prob,
            },
        )?;
    }
    Ok(())
}

fn neural_config(a: &NeuralArgs) -> Result<NeuralConfig> {
    let config = match &a.config {
        Some(path) => read_json::<NeuralConfig>(path)?,
        None => {
            let mut c = NeuralConfig::new(a.cell, a.layers, a.hidden);
            c.embedding = match a.embedding {
                EmbeddingKind::OneHot => EmbeddingSpec::one_hot(),
                kind => EmbeddingSpec {
                    kind,
                    dim: a.embedding_dim,
                },
            };
            c.skip_connections = a.skip;
            c.learning_rate = a.lr;
            c.batch_size = a.batch_size;
            c.patience = a.patience;
            c.max_epochs = a.max_epochs;
            c.clip_norm = (!a.no_clip).then_some(a.clip);
            c.seed = a.seed;
            c
        }
    };
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuralReport {
    pub manifest: RunManifest,
    pub kind: String,
    pub config: NeuralConfig,
    pub num_parameters: usize,
    pub train: TrainReport,
    pub fine_tune: Option<TrainReport>,
    pub best_epoch: usize,
    pub validation_avg_log_prob: f64,
}

#[derive(Serialize)]
struct Timing<'a> {
    train_epoch_seconds: &'a [f64],
    fine_tune_epoch_seconds: Option<&'a [f64]>,
}

fn train_neural(a: NeuralArgs, args: &[String]) -> Result<()> {
    let artifact = load_split(&a.split)?;
    let split = &artifact.split;
    let train = split.training();
    let (config, mut trainer) = match &a.resume {
        Some(path) => {
            let file: CheckpointFile = read_json(path)?;
            let trainer = file.into_trainer()?;
            (trainer.config.clone(), trainer)
        }
        None => {
            let config = neural_config(&a)?;
            let trainer = Trainer::new(&config, train)?;
            (config, trainer)
        }
    };
    let mut manifest = RunManifest::new("train", args)
        .seed("seed", config.seed)
        .config(&config)?
        .input(&a.split)?;
    if let Some(p) = &a.config {
        manifest = manifest.input(p)?;
    }
    if let Some(p) = &a.resume {
        manifest = manifest.input(p)?;
    }
    manifest = manifest.output(&a.out);
    if let Some(r) = &a.report {
        manifest = manifest.output(r);
    }

    let cap = a.stop_after.unwrap_or(usize::MAX).min(config.max_epochs);
    while !trainer.is_finished() && trainer.epoch < cap {
        trainer.run_until(trainer.epoch + 1, train, &split.validation)?;
        if let Some(last) = trainer.report.epochs.last() {
            eprintln!(
                "epoch {:>4}  train loss {:.5}  validation L {:.5}",
                last.epoch, last.train_loss, last.val_score
            );
        }
        if let Some(path) = &a.checkpoint {
            write_json(path, &trainer.to_checkpoint_file())?;
        }
    }
    let tuned = if a.fine_tune && trainer.is_finished() {
        Some(fine_tune(&trainer, train, &split.validation)?)
    } else {
        None
    };
    let final_trainer = tuned.as_ref().unwrap_or(&trainer);
    let model = final_trainer.best_model()?;
    let best = final_trainer.best.as_ref().expect("best_model succeeded");
    println!(
        "{}: best epoch {}, validation L = {:.6}",
        config.cell, best.epoch, best.score
    );
    write_json(
        &a.out,
        &ModelArtifact {
            manifest: manifest.clone(),
            model: ModelPayload::from_neural(&model),
        },
    )?;
    if let Some(r) = &a.report {
        let report = NeuralReport {
            manifest,
            kind: "neural".into(),
            config: config.clone(),
            num_parameters: model.params.num_trainable(),
            train: trainer.report.clone(),
            fine_tune: tuned.as_ref().map(|t| t.report.clone()),
            best_epoch: best.epoch,
            validation_avg_log_prob: best.score,
        };
        write_json(r, &report)?;
        let mut timing_path = r.as_os_str().to_owned();
        timing_path.push(".timing.json");
        write_json(
            Path::new(&timing_path),
            &Timing {
                train_epoch_seconds: &trainer.report.epoch_seconds,
                fine_tune_epoch_seconds: tuned.as_ref().map(|t| t.report.epoch_seconds.as_slice()),
            },
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchReport {
    pub manifest: RunManifest,
    pub cell: String,
    pub plan: HyperbandPlan,
    pub total_configs: usize,
    pub best_config: NeuralConfig,
    pub best_trial: usize,
    pub best_budget: usize,
    pub best_validation_avg_log_prob: f64,
    pub failed_runs: usize,
}

fn search(a: SearchArgs, jobs: usize, args: &[String]) -> Result<()> {
    let artifact = load_split(&a.split)?;
    let split = &artifact.split;
    let mut space = SearchSpace::default();
    if let Some(v) = &a.hidden_sizes {
        space.hidden_sizes = v.clone();
    }
    if let Some(v) = &a.layers {
        space.num_layers = v.clone();
    }
    if let Some(v) = &a.embedding_dims {
        space.embedding_dims = v.clone();
    }
    let plan = match a.target_configs {
        Some(n) => HyperbandPlan::for_target_configs(a.eta, a.max_resource, n)?,
        None => HyperbandPlan::new(a.eta, a.max_resource)?,
    };
    let patience = a.patience;
    let objective = NeuralObjective {
        train: split.training(),
        validation: &split.validation,
        adjust: Some(Box::new(move |c: &mut NeuralConfig| c.patience = patience)),
    };
    let options = SearchOptions {
        jobs,
        leaderboard: Some(a.leaderboard.clone()),
    };
    eprintln!(
        "{} brackets, {} configs, up to {} epochs per run",
        plan.brackets.len(),
        plan.total_configs(),
        plan.max_resource
    );
    let outcome = run_hyperband(&space, a.cell, &objective, &plan, a.seed, &options)?;
    let manifest = RunManifest::new("search", args)
        .seed("seed", a.seed)
        .config(&serde_json::json!({ "space": space, "patience": patience }))?
        .input(&a.split)?
        .output(&a.leaderboard)
        .output(&a.out);
    write_json(&sidecar(&a.leaderboard), &manifest)?;
    let failed = outcome
        .entries
        .iter()
        .filter(|e| e.status == chordlm::hyperopt::TrialStatus::Failed)
        .count();
    println!(
        "best of {} configs: trial {} at {} epochs, validation L = {:.6}",
        outcome.total_configs, outcome.best_trial, outcome.best_budget, outcome.best_score
    );
    write_json(
        &a.out,
        &SearchReport {
            manifest,
            cell: a.cell.to_string(),
            plan: outcome.plan.clone(),
            total_configs: outcome.total_configs,
            best_config: outcome.best_config.clone(),
            best_trial: outcome.best_trial,
            best_budget: outcome.best_budget,
            best_validation_avg_log_prob: outcome.best_score,
            failed_runs: failed,
        },
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelScore {
    pub name: String,
    pub source: String,
    pub neg_avg_log_prob: f64,
    pub per_dataset_avg_log_prob: BTreeMap<String, f64>,
    pub confidence_interval: Option<ConfidenceInterval>,
    pub result: EvalResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub test: PairedTest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSummary {
    pub min_length: usize,
    pub eligible_songs: usize,
    pub values: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub manifest: RunManifest,
    pub part: String,
    pub models: Vec<ModelScore>,
    pub comparisons: Vec<Comparison>,
    pub curves: Option<CurveSummary>,
}

fn model_name(spec: &str) -> (String, String) {
    if let Some((name, path)) = spec.split_once('=') {
        return (name.to_string(), path.to_string());
    }
    let name = Path::new(spec)
        .file_stem()
        .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
    (name, spec.to_string())
}

fn evaluate(a: EvaluateArgs, args: &[String]) -> Result<()> {
    let artifact = load_split(&a.split)?;
    let data: &[ChordSequence] = match a.on.as_str() {
        "test" => &artifact.split.test,
        "validation" => &artifact.split.validation,
        "train" => &artifact.split.train,
        other => bail!(UsageError(format!("--on must be test, validation or train, not {other:?}"))),
    };
    let mut manifest = RunManifest::new("evaluate", args)
        .seed("seed", a.seed)
        .input(&a.split)?;
    let mut models: Vec<(String, String, Box<dyn LanguageModel>)> = Vec::new();
    for spec in &a.models {
        let (name, path) = model_name(spec);
        if models.iter().any(|(n, _, _)| *n == name) {
            bail!(UsageError(format!("duplicate model name {name:?}; use name=path")));
        }
        if path != "uniform" {
            manifest = manifest.input(Path::new(&path))?;
        }
        let model = load_model(&path, &artifact.vocabulary).with_context(|| format!("loading {path}"))?;
        models.push((name, path, model));
    }
    manifest = manifest.output(&a.out);
    if let Some(c) = &a.curves {
        manifest = manifest.output(c);
    }

    let mut scores = Vec::new();
    for (i, (name, source, model)) in models.iter().enumerate() {
        let result = avg_log_prob(model.as_ref(), data)?;
        let ci = match a.bootstrap {
            Some(n) => {
                let songs: Vec<_> = result.per_song.values().copied().collect();
                Some(bootstrap_ci(&songs, a.level, n, derive_indexed(a.seed, "bootstrap", i as u64))?)
            }
            None => None,
        };
        scores.push(ModelScore {
            name: name.clone(),
            source: source.clone(),
            neg_avg_log_prob: -result.avg_log_prob,
            per_dataset_avg_log_prob: result.dataset_avg(),
            confidence_interval: ci,
            result,
        });
    }

    let mut comparisons = Vec::new();
    if a.ttest {
        let pairs = scores.len() * scores.len().saturating_sub(1) / 2;
        let m = a.comparisons.unwrap_or(pairs).max(1);
        for i in 0..scores.len() {
            for j in i + 1..scores.len() {
                comparisons.push(Comparison {
                    a: scores[i].name.clone(),
                    b: scores[j].name.clone(),
                    test: paired_test(&scores[i].result.per_song, &scores[j].result.per_song, m)?,
                });
            }
        }
    }

    let curves = match &a.curves {
        Some(path) => {
            let mut all: Vec<(String, CumulativeCurve)> = Vec::new();
            for (name, _, model) in &models {
                all.push((name.clone(), cumulative_curve(model.as_ref(), data, a.min_length)?));
            }
            let mut csv = String::from("k");
            for (name, _) in &all {
                csv.push(',');
                csv.push_str(name);
            }
            csv.push('\n');
            for k in 1..=a.min_length {
                let _ = write!(csv, "{k}");
                for (_, c) in &all {
                    let _ = write!(csv, ",{}", c.at(k));
                }
                csv.push('\n');
            }
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            write_json(&sidecar(path), &manifest)?;
            Some(CurveSummary {
                min_length: a.min_length,
                eligible_songs: all.first().map_or(0, |(_, c)| c.eligible_songs),
                values: all.into_iter().map(|(n, c)| (n, c.values)).collect(),
            })
        }
        None => None,
    };

    println!("{:<24} {:>10}  {}", "model", "-L", "interval");
    for s in &scores {
        let ci = s
            .confidence_interval
            .map(|c| format!("[{:.4}, {:.4}]", -c.high, -c.low))
            .unwrap_or_default();
        println!("{:<24} {:>10.4}  {}", s.name, s.neg_avg_log_prob, ci);
    }
    for c in &comparisons {
        println!(
            "{} vs {}: t = {:.3}, p = {:.3e}{}",
            c.a,
            c.b,
            c.test.t,
            c.test.p_value,
            if c.test.significant { " (significant)" } else { "" }
        );
    }
    write_json(
        &a.out,
        &EvaluationReport {
            manifest,
            part: a.on.clone(),
            models: scores,
            comparisons,
            curves,
        },
    )
}

fn synth(a: SynthArgs, args: &[String]) -> Result<()> {
    let ranged = matches!(a.kind.as_str(), "markov" | "random");
    if a.max_len == 0 || ranged && (a.min_len == 0 || a.min_len > a.max_len) {
        bail!(UsageError("need 0 < --min-len <= --max-len".into()));
    }
    let mut config = serde_json::json!({
        "kind": a.kind, "songs": a.songs, "min_len": a.min_len, "max_len": a.max_len, "motif": a.motif, "moves": a.moves,
    });
    let corpus = match a.kind.as_str() {
        "markov" => {
            let chain = match a.moves {
                0 => MarkovChain::random(a.seed, 3, 4),
                4..=23 => MarkovChain::with_moves(a.seed, a.moves, 3, 4),
                _ => bail!(UsageError("--moves must be 0 or between 4 and 23".into())),
            };
            config["entropy_rate"] = serde_json::json!(chain.entropy_rate());
            println!("entropy rate {:.6} nats", chain.entropy_rate());
            chain.sample_corpus(a.songs, a.min_len, a.max_len, a.seed.wrapping_add(1))
        }
        "motif" => {
            if !(2..=24).contains(&a.motif) {
                bail!(UsageError("--motif must be between 2 and 24".into()));
            }
            motif_corpus(a.songs, a.motif, a.max_len, a.seed)
        }
        "periodic" => {
            // C, G, A:min, F
            let motif: Vec<ChordClass> = [0, 14, 19, 10].iter().map(|&i| ChordClass::from_index(i).unwrap()).collect();
            periodic_corpus(a.songs, &motif[..a.motif.clamp(2, 4)], a.max_len, a.seed)
        }
        "random" => random_corpus(a.songs, a.min_len, a.max_len, a.seed),
        other => bail!(UsageError(format!("unknown corpus kind {other:?}"))),
    };
    write_corpus(&a.out, &corpus)?;
    let manifest = RunManifest::new("synth", args)
        .seed("seed", a.seed)
        .config(&config)?
        .output(&a.out);
    write_json(&sidecar(&a.out), &manifest)
}

fn replay(a: ReplayArgs) -> Result<()> {
    let manifest = locate(&a.artifact)?;
    if manifest.command == "replay" {
        bail!(UsageError("refusing to replay a replay".into()));
    }
    for input in &manifest.inputs {
        let now = crate::manifest::sha256_file(&input.path)
            .with_context(|| format!("input {} is missing", input.path.display()))?;
        if now != input.sha256 {
            eprintln!("warning: {} changed since the recorded run", input.path.display());
        }
    }
    let mut argv = vec![PathBuf::from("chordlm").to_string_lossy().into_owned()];
    argv.extend(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| anyhow!(UsageError(e.to_string())))?;
    if matches!(cli.command, Command::Replay(_)) {
        bail!(UsageError("refusing to replay a replay".into()));
    }
    run(cli, &manifest.args)
}
