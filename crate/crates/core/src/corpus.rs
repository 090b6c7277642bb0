//! Annotation ingestion, sequence normalisation, de-duplication, stratified
//! splitting and transposition augmentation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chord::{label_to_class, ChordClass};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Overlap between consecutive segments that is still accepted as rounding noise.
const TIME_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabEvent {
    pub start: f64,
    pub end: f64,
    pub label: String,
    /// Line number in the source file (1-based); 0 when built in memory.
    #[serde(default)]
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSong {
    pub song_id: String,
    pub dataset_id: String,
    #[serde(default)]
    pub artist: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
    pub events: Vec<LabEvent>,
}

impl AnnotatedSong {
    /// Builds a song from bare labels with unit-length events.
    pub fn from_labels(song_id: &str, dataset_id: &str, labels: &[&str]) -> Self {
        let events = labels
            .iter()
            .enumerate()
            .map(|(i, l)| LabEvent {
                start: i as f64,
                end: i as f64 + 1.0,
                label: l.to_string(),
                line: i + 1,
            })
            .collect();
        AnnotatedSong {
            song_id: song_id.to_string(),
            dataset_id: dataset_id.to_string(),
            artist: None,
            title: None,
            events,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChordSequence {
    pub song_id: String,
    pub dataset_id: String,
    pub chords: Vec<ChordClass>,
}

impl ChordSequence {
    pub fn len(&self) -> usize {
        self.chords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chords.is_empty()
    }

    pub fn transpose(&self, semitones: i32) -> ChordSequence {
        ChordSequence {
            song_id: if semitones.rem_euclid(12) == 0 {
                self.song_id.clone()
            } else {
                format!("{}@+{}", self.song_id, semitones.rem_euclid(12))
            },
            dataset_id: self.dataset_id.clone(),
            chords: self.chords.iter().map(|c| c.transpose(semitones)).collect(),
        }
    }
}

/// Reads a `.lab` file: one `start end label` triple per line. Blank lines and
/// lines starting with `#` are skipped. The song id defaults to the file stem.
pub fn load_lab_file(path: &Path, dataset_id: &str) -> Result<AnnotatedSong> {
    let text = fs::read_to_string(path)?;
    let song_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let events = parse_lab(&text, path)?;
    if events.is_empty() {
        return Err(Error::EmptySong(path.display().to_string()));
    }
    Ok(AnnotatedSong {
        song_id,
        dataset_id: dataset_id.to_string(),
        artist: None,
        title: None,
        events,
    })
}

fn parse_lab(text: &str, path: &Path) -> Result<Vec<LabEvent>> {
    let mut events: Vec<LabEvent> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parse_err = |reason: String| Error::ParseError {
            path: path.to_path_buf(),
            line,
            reason,
        };
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected `start end label`, found {} fields",
                fields.len()
            )));
        }
        let time = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .ok_or_else(|| parse_err(format!("bad timestamp {s:?}")))
        };
        let start = time(fields[0])?;
        let end = time(fields[1])?;
        let overlaps = events
            .last()
            .is_some_and(|prev| start < prev.end - TIME_TOLERANCE);
        if end <= start || overlaps {
            return Err(Error::NonMonotonicTimestamps {
                path: path.to_path_buf(),
                line,
            });
        }
        events.push(LabEvent {
            start,
            end,
            label: fields[2].to_string(),
            line,
        });
    }
    Ok(events)
}

/// Reduces every label and merges runs of equal classes. Durations are dropped.
pub fn to_sequence(song: &AnnotatedSong) -> Result<ChordSequence> {
    let mut chords: Vec<ChordClass> = Vec::with_capacity(song.events.len());
    for event in &song.events {
        let class = label_to_class(&event.label).map_err(|e| e.in_song(&song.song_id, event.line))?;
        if chords.last() != Some(&class) {
            chords.push(class);
        }
    }
    if chords.is_empty() {
        return Err(Error::EmptySong(song.song_id.clone()));
    }
    Ok(ChordSequence {
        song_id: song.song_id.clone(),
        dataset_id: song.dataset_id.clone(),
        chords,
    })
}

fn normalise_meta(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, PartialEq, Eq, Hash)]
enum DedupKey {
    Meta(String, String),
    Sequence(Vec<ChordClass>),
    RawLabels(Vec<String>),
}

fn dedup_key(song: &AnnotatedSong) -> DedupKey {
    if let (Some(artist), Some(title)) = (&song.artist, &song.title) {
        return DedupKey::Meta(normalise_meta(artist), normalise_meta(title));
    }
    match to_sequence(song) {
        Ok(seq) => DedupKey::Sequence(seq.chords),
        // Unparseable songs still dedup on their literal labels; the error
        // itself surfaces later in `to_sequence`.
        Err(_) => DedupKey::RawLabels(song.events.iter().map(|e| e.label.clone()).collect()),
    }
}

/// Keeps one song per duplicate group. Songs with artist and title dedup on the
/// normalised metadata, the rest on their reduced chord sequence. The survivor
/// is the one from the highest-priority dataset (position in `priority`;
/// unlisted datasets rank after listed ones, by name), ties by input order.
/// Survivors keep their input order.
pub fn deduplicate(songs: Vec<AnnotatedSong>, priority: &[String]) -> Vec<AnnotatedSong> {
    let rank = |dataset: &str| {
        priority
            .iter()
            .position(|p| p == dataset)
            .map_or((1, dataset.to_string()), |i| (0, format!("{i:08}")))
    };
    let mut order: Vec<usize> = (0..songs.len()).collect();
    order.sort_by_key(|&i| rank(&songs[i].dataset_id));

    let mut seen: HashSet<DedupKey> = HashSet::new();
    let mut keep = vec![false; songs.len()];
    for i in order {
        if seen.insert(dedup_key(&songs[i])) {
            keep[i] = true;
        }
    }
    songs
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub seed: u64,
    pub train: Vec<ChordSequence>,
    pub validation: Vec<ChordSequence>,
    pub test: Vec<ChordSequence>,
    #[serde(default)]
    pub augmented_train: Option<Vec<ChordSequence>>,
}

impl CorpusSplit {
    /// Training data for the models: the augmented set when present.
    pub fn training(&self) -> &[ChordSequence] {
        self.augmented_train.as_deref().unwrap_or(&self.train)
    }

    pub fn augment(&mut self) {
        self.augmented_train = Some(augment_transpositions(&self.train));
    }

    pub fn ids(&self) -> SplitIds {
        let ids = |v: &[ChordSequence]| v.iter().map(|s| s.song_id.clone()).collect();
        SplitIds {
            seed: self.seed,
            train: ids(&self.train),
            validation: ids(&self.validation),
            test: ids(&self.test),
        }
    }
}

/// Song ids per part; the on-disk form of a split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIds {
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitIds {
    /// Re-materialises the split against a corpus.
    pub fn resolve(&self, corpus: &[ChordSequence]) -> Result<CorpusSplit> {
        let by_id: HashMap<&str, &ChordSequence> =
            corpus.iter().map(|s| (s.song_id.as_str(), s)).collect();
        let pick = |ids: &[String]| -> Result<Vec<ChordSequence>> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .map(|s| (*s).clone())
                        .ok_or_else(|| Error::Format(format!("split refers to unknown song {id:?}")))
                })
                .collect()
        };
        Ok(CorpusSplit {
            seed: self.seed,
            train: pick(&self.train)?,
            validation: pick(&self.validation)?,
            test: pick(&self.test)?,
            augmented_train: None,
        })
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

pub const TEST_FRACTION: f64 = 0.20;
pub const VALIDATION_FRACTION: f64 = 0.15;

/// Per dataset: shuffle with a seed derived from `seed` and the dataset id,
/// cut 20% for test, then 15% of the remainder for validation. Both counts
/// round half up; the remainder goes to training.
pub fn stratified_split(sequences: &[ChordSequence], seed: u64) -> Result<CorpusSplit> {
    let mut seen = HashSet::new();
    for s in sequences {
        if !seen.insert(s.song_id.as_str()) {
            return Err(Error::DuplicateSongId(s.song_id.clone()));
        }
    }
    let mut strata: BTreeMap<&str, Vec<&ChordSequence>> = BTreeMap::new();
    for s in sequences {
        strata.entry(s.dataset_id.as_str()).or_default().push(s);
    }

    let mut split = CorpusSplit {
        seed,
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        augmented_train: None,
    };
    for (dataset, mut songs) in strata {
        let n = songs.len();
        if n < 3 {
            return Err(Error::StratumTooSmall {
                dataset: dataset.to_string(),
                count: n,
            });
        }
        songs.sort_by(|a, b| a.song_id.cmp(&b.song_id));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, dataset));
        songs.shuffle(&mut rng);

        let n_test = round_half_up(TEST_FRACTION * n as f64);
        let n_val = round_half_up(VALIDATION_FRACTION * (n - n_test) as f64);
        let (test, rest) = songs.split_at(n_test);
        let (validation, train) = rest.split_at(n_val);
        split.test.extend(test.iter().map(|s| (*s).clone()));
        split.validation.extend(validation.iter().map(|s| (*s).clone()));
        split.train.extend(train.iter().map(|s| (*s).clone()));
    }
    Ok(split)
}

/// Twelve copies of every sequence, one per semitone offset 0..=11, grouped by song.
pub fn augment_transpositions(train: &[ChordSequence]) -> Vec<ChordSequence> {
    train
        .iter()
        .flat_map(|s| (0..12).map(move |k| s.transpose(k)))
        .collect()
}

/// One dataset entry of a corpus manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    /// Glob, relative to the manifest's directory, matching the `.lab` files.
    pub files: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SongMetadata {
    #[serde(default)]
    pub artist: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
}

/// Corpus manifest. Dataset order doubles as the de-duplication priority.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub datasets: Vec<DatasetEntry>,
    /// Keyed by file path relative to the manifest directory.
    #[serde(default)]
    pub metadata: BTreeMap<String, SongMetadata>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn priority(&self) -> Vec<String> {
        self.datasets.iter().map(|d| d.id.clone()).collect()
    }

    /// Files matched by each dataset glob, sorted, as (dataset id, absolute path,
    /// manifest-relative path).
    pub fn files(&self, root: &Path) -> Result<Vec<(String, PathBuf, String)>> {
        let mut out = Vec::new();
        for dataset in &self.datasets {
            let pattern = root.join(&dataset.files);
            let pattern = pattern.to_string_lossy();
            let paths = glob::glob(&pattern)
                .map_err(|e| Error::Format(format!("bad glob {:?}: {e}", dataset.files)))?;
            let mut matched: Vec<PathBuf> = paths.filter_map(|p| p.ok()).collect();
            matched.sort();
            for path in matched {
                let rel = path
                    .strip_prefix(root)
                    .unwrap_or(&path)
                    .to_string_lossy()
                    .replace('\\', "/");
                out.push((dataset.id.clone(), path, rel));
            }
        }
        Ok(out)
    }
}

/// Loads every file the manifest names. Song ids are the manifest-relative
/// path without extension. Per-file failures are returned alongside the songs
/// that loaded.
pub fn load_manifest_songs(manifest_path: &Path) -> Result<(Vec<AnnotatedSong>, Vec<Error>)> {
    let manifest = CorpusManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let mut songs = Vec::new();
    let mut errors = Vec::new();
    for (dataset, path, rel) in manifest.files(root)? {
        match load_lab_file(&path, &dataset) {
            Ok(mut song) => {
                song.song_id = rel.trim_end_matches(".lab").to_string();
                if let Some(meta) = manifest.metadata.get(&rel) {
                    song.artist = meta.artist.clone();
                    song.title = meta.title.clone();
                }
                songs.push(song);
            }
            Err(e) => errors.push(e),
        }
    }
    Ok((songs, errors))
}

pub fn write_corpus(path: &Path, sequences: &[ChordSequence]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for s in sequences {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<ChordSequence>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: ChordSequence = serde_json::from_str(&line)?;
        if seq.chords.is_empty() {
            return Err(Error::EmptySong(seq.song_id));
        }
        out.push(seq);
    }
    Ok(out)
}

/// Per-dataset song and chord counts, in first-seen dataset order.
pub fn dataset_counts(sequences: &[ChordSequence]) -> Vec<(String, usize, usize)> {
    let mut out: Vec<(String, usize, usize)> = Vec::new();
    for s in sequences {
        match out.iter_mut().find(|(d, _, _)| *d == s.dataset_id) {
            Some(entry) => {
                entry.1 += 1;
                entry.2 += s.len();
            }
            None => out.push((s.dataset_id.clone(), 1, s.len())),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(id: &str, dataset: &str, labels: &[&str]) -> ChordSequence {
        ChordSequence {
            song_id: id.into(),
            dataset_id: dataset.into(),
            chords: labels.iter().map(|l| l.parse().unwrap()).collect(),
        }
    }

    fn lab(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".lab").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_lab_lines() {
        let f = lab("# comment\n0.0 1.5 C:maj\n\n1.5 3.0 G:maj\n");
        let song = load_lab_file(f.path(), "ds").unwrap();
        assert_eq!(song.events.len(), 2);
        assert_eq!(song.events[1].label, "G:maj");
        assert_eq!(song.events[1].line, 4);
        assert_eq!(song.dataset_id, "ds");
    }

    #[test]
    fn lab_errors() {
        let f = lab("");
        assert!(matches!(load_lab_file(f.path(), "d"), Err(Error::EmptySong(_))));
        let f = lab("1.0 0.5 C:maj\n");
        assert!(matches!(
            load_lab_file(f.path(), "d"),
            Err(Error::NonMonotonicTimestamps { line: 1, .. })
        ));
        let f = lab("0 1 C:maj\n0.5 2 G:maj\n");
        assert!(matches!(
            load_lab_file(f.path(), "d"),
            Err(Error::NonMonotonicTimestamps { line: 2, .. })
        ));
        let f = lab("0 1 C:maj\nzero 2 G\n");
        assert!(matches!(load_lab_file(f.path(), "d"), Err(Error::ParseError { line: 2, .. })));
    }

    #[test]
    fn merges_after_reduction() {
        let s = AnnotatedSong::from_labels("s", "d", &["C:maj", "C:maj7", "G:maj"]);
        assert_eq!(to_sequence(&s).unwrap().chords, seq("s", "d", &["C:maj", "G:maj"]).chords);
        let s = AnnotatedSong::from_labels("s", "d", &["N", "N", "N"]);
        assert_eq!(to_sequence(&s).unwrap().chords, vec![ChordClass::NO_CHORD]);
        let s = AnnotatedSong::from_labels("s", "d", &["C:maj", "A:min", "C:maj"]);
        assert_eq!(to_sequence(&s).unwrap().len(), 3);
    }

    #[test]
    fn malformed_label_carries_song_context() {
        let s = AnnotatedSong::from_labels("song7", "d", &["C:maj", "C:wat"]);
        match to_sequence(&s) {
            Err(Error::InSong { song, line, source }) => {
                assert_eq!(song, "song7");
                assert_eq!(line, 2);
                assert!(matches!(*source, Error::MalformedLabel { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dedup_by_metadata_and_sequence() {
        let mut a = AnnotatedSong::from_labels("a", "beatles", &["C:maj", "G:maj"]);
        a.artist = Some("The Beatles".into());
        a.title = Some("Let It Be!".into());
        let mut b = AnnotatedSong::from_labels("b", "billboard", &["C:maj", "F:maj"]);
        b.artist = Some("the beatles".into());
        b.title = Some("let it be".into());
        let priority = vec!["billboard".to_string(), "beatles".to_string()];
        let out = deduplicate(vec![a.clone(), b.clone()], &priority);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].song_id, "b");

        let c = AnnotatedSong::from_labels("c", "x", &["C:maj", "C:maj7", "A:min"]);
        let d = AnnotatedSong::from_labels("d", "y", &["C:maj", "A:min7"]);
        assert_eq!(deduplicate(vec![c, d], &[]).len(), 1);

        let e = AnnotatedSong::from_labels("e", "x", &["C:maj"]);
        let f = AnnotatedSong::from_labels("f", "x", &["D:maj"]);
        assert_eq!(deduplicate(vec![e.clone(), f.clone()], &[]), vec![e, f]);
    }

    fn corpus(strata: &[(&str, usize)]) -> Vec<ChordSequence> {
        strata
            .iter()
            .flat_map(|&(d, n)| (0..n).map(move |i| seq(&format!("{d}-{i:03}"), d, &["C:maj", "G:maj"])))
            .collect()
    }

    #[test]
    fn split_arithmetic() {
        let s = stratified_split(&corpus(&[("a", 100)]), 7).unwrap();
        assert_eq!((s.test.len(), s.train.len(), s.validation.len()), (20, 68, 12));
        let s2 = stratified_split(&corpus(&[("a", 100)]), 7).unwrap();
        assert_eq!(s, s2);
        let s3 = stratified_split(&corpus(&[("a", 100)]), 8).unwrap();
        assert_ne!(s.test, s3.test);

        let s = stratified_split(&corpus(&[("a", 50), ("b", 50)]), 1).unwrap();
        for d in ["a", "b"] {
            assert_eq!(s.test.iter().filter(|x| x.dataset_id == d).count(), 10);
        }
    }

    #[test]
    fn split_rejects_small_strata() {
        assert!(matches!(
            stratified_split(&corpus(&[("a", 10), ("b", 2)]), 0),
            Err(Error::StratumTooSmall { count: 2, .. })
        ));
        let mut c = corpus(&[("a", 5)]);
        c[1].song_id = c[0].song_id.clone();
        assert!(matches!(stratified_split(&c, 0), Err(Error::DuplicateSongId(_))));
    }

    #[test]
    fn augmentation_examples() {
        let out = augment_transpositions(&[seq("s", "d", &["C:maj", "G:maj"])]);
        assert_eq!(out.len(), 12);
        assert_eq!(out[2].chords, seq("s", "d", &["D:maj", "A:maj"]).chords);
        let out = augment_transpositions(&[seq("s", "d", &["N"])]);
        assert!(out.iter().all(|s| s.chords == vec![ChordClass::NO_CHORD]));
        assert_eq!(augment_transpositions(&corpus(&[("a", 147)])).len(), 1764);
    }

    #[test]
    fn split_ids_resolve() {
        let c = corpus(&[("a", 20), ("b", 9)]);
        let s = stratified_split(&c, 3).unwrap();
        assert_eq!(s.ids().resolve(&c).unwrap(), s);
    }

    fn arb_sequence() -> impl Strategy<Value = Vec<ChordClass>> {
        prop::collection::vec(0usize..25, 1..30)
            .prop_map(|v| v.into_iter().map(|i| ChordClass::from_index(i).unwrap()).collect())
    }

    proptest! {
        #[test]
        fn sequences_never_repeat_adjacent(indices in prop::collection::vec(0usize..25, 1..60)) {
            let labels: Vec<String> = indices
                .iter()
                .map(|&i| ChordClass::from_index(i).unwrap().to_string())
                .collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let s = to_sequence(&AnnotatedSong::from_labels("s", "d", &refs)).unwrap();
            prop_assert!(s.chords.windows(2).all(|w| w[0] != w[1]));
        }

        #[test]
        fn split_is_partition(sizes in prop::collection::vec(3usize..40, 1..4), seed in any::<u64>()) {
            let strata: Vec<(String, usize)> =
                sizes.iter().enumerate().map(|(i, &n)| (format!("d{i}"), n)).collect();
            let refs: Vec<(&str, usize)> = strata.iter().map(|(d, n)| (d.as_str(), *n)).collect();
            let c = corpus(&refs);
            let s = stratified_split(&c, seed).unwrap();
            let mut ids: Vec<&str> = s.train.iter().chain(&s.validation).chain(&s.test)
                .map(|x| x.song_id.as_str()).collect();
            ids.sort();
            let mut expected: Vec<&str> = c.iter().map(|x| x.song_id.as_str()).collect();
            expected.sort();
            prop_assert_eq!(ids, expected);
            for (d, n) in &refs {
                let t = s.test.iter().filter(|x| x.dataset_id == *d).count() as f64;
                let v = s.validation.iter().filter(|x| x.dataset_id == *d).count() as f64;
                prop_assert!((t - 0.2 * *n as f64).abs() <= 1.0);
                prop_assert!((v - 0.15 * (*n as f64 - t)).abs() <= 1.0);
            }
        }

        #[test]
        fn augmentation_closed_under_transposition(seqs in prop::collection::vec(arb_sequence(), 1..5), k in 0i32..12) {
            let train: Vec<ChordSequence> = seqs.into_iter().enumerate()
                .map(|(i, chords)| ChordSequence { song_id: format!("s{i}"), dataset_id: "d".into(), chords })
                .collect();
            let aug = augment_transpositions(&train);
            prop_assert_eq!(aug.len(), 12 * train.len());
            let offset0: Vec<&ChordSequence> = aug.iter().step_by(12).collect();
            prop_assert_eq!(offset0, train.iter().collect::<Vec<_>>());
            let mut before: Vec<Vec<ChordClass>> = aug.iter().map(|s| s.chords.clone()).collect();
            let mut after: Vec<Vec<ChordClass>> = aug.iter().map(|s| s.transpose(k).chords).collect();
            before.sort();
            after.sort();
            prop_assert_eq!(before, after);
        }
    }
}
