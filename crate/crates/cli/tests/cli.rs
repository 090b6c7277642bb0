use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn chordlm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chordlm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = chordlm(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn corpus_lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn ingest_fixture_matches_known_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixtures().join("lab30/manifest.json");
    let stdout = ok(
        dir.path(),
        &["ingest", "--manifest", manifest.to_str().unwrap(), "--out", "corpus.jsonl", "--stats", "stats.json"],
    );
    assert!(stdout.contains("total"));
    let expected = json(&fixtures().join("lab30/expected.json"));
    let stats = json(&dir.path().join("stats.json"));
    for d in stats["datasets"].as_array().unwrap() {
        let want = &expected["datasets"][d["dataset"].as_str().unwrap()];
        assert_eq!(d["songs"], want["songs"]);
        assert_eq!(d["chords"], want["chords"]);
        assert_eq!(d["unique_songs"], want["songs"]);
    }
    assert_eq!(stats["total"]["unique_songs"], 30);

    let songs = corpus_lines(&dir.path().join("corpus.jsonl"));
    assert_eq!(songs.len(), 30);
    for s in songs {
        let want: Vec<usize> = expected["songs"][s["song_id"].as_str().unwrap()]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap() as usize)
            .collect();
        let got: Vec<usize> = s["chords"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c.as_str().unwrap().parse::<chordlm::ChordClass>().unwrap().index())
            .collect();
        assert_eq!(got, want, "{}", s["song_id"]);
    }
    assert!(dir.path().join("corpus.jsonl.manifest.json").exists());
}

#[test]
fn duplicate_pair_counts_once() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixtures().join("dup/manifest.json");
    ok(
        dir.path(),
        &["ingest", "--manifest", manifest.to_str().unwrap(), "--out", "c.jsonl", "--stats", "s.json"],
    );
    let stats = json(&dir.path().join("s.json"));
    assert_eq!(stats["total"]["songs"], 4);
    assert_eq!(stats["total"]["unique_songs"], 3);
    let ids: Vec<String> = corpus_lines(&dir.path().join("c.jsonl"))
        .iter()
        .map(|s| s["song_id"].as_str().unwrap().to_string())
        .collect();
    // the first-listed dataset wins
    assert!(ids.contains(&"first/song01".to_string()));
    assert!(!ids.contains(&"second/copy".to_string()));
}

#[test]
fn bad_input_file_exits_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("x")).unwrap();
    fs::write(d.join("x/good.lab"), "0 1 C\n1 2 G\n").unwrap();
    fs::write(d.join("x/bad.lab"), "0 1 C\n1 2 H:maj\n").unwrap();
    fs::write(d.join("m.json"), r#"{"datasets": [{"id": "x", "files": "x/*.lab"}]}"#).unwrap();
    let out = chordlm(d, &["ingest", "--manifest", "m.json", "--out", "c.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("x/bad") && err.contains("line 2"), "{err}");
    assert_eq!(corpus_lines(&d.join("c.jsonl")).len(), 1);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = chordlm(dir.path(), &["train", "ngram", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let out = chordlm(dir.path(), &["synth", "--kind", "fractal", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
}

fn periodic_split(dir: &Path) {
    ok(
        dir,
        &["synth", "--kind", "periodic", "--songs", "40", "--max-len", "60", "--motif", "4", "--seed", "2", "--out", "p.jsonl"],
    );
    ok(dir, &["split", "--corpus", "p.jsonl", "--seed", "1", "--out", "split.json"]);
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    periodic_split(dir.path());
    let out = chordlm(dir.path(), &["train", "neural", "--split", "split.json", "--hidden", "0", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn uniform_baseline_and_identical_models() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = fixtures().join("lab30/manifest.json");
    ok(d, &["ingest", "--manifest", manifest.to_str().unwrap(), "--out", "c.jsonl"]);
    ok(d, &["split", "--corpus", "c.jsonl", "--seed", "3", "--out", "split.json", "--augment"]);
    let stdout = ok(d, &["train", "ngram", "--split", "split.json", "--order", "5", "--out", "ng.json", "--report", "r.json"]);
    assert!(stdout.contains("alpha"));
    let report = json(&d.join("r.json"));
    let alpha = report["alpha"].as_f64().unwrap();
    let scores = report["alpha_scores"].as_array().unwrap();
    assert_eq!(scores.len(), 6);
    let best = scores
        .iter()
        .filter_map(|s| s["validation_avg_log_prob"].as_f64().map(|v| (s["alpha"].as_f64().unwrap(), v)))
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    assert_eq!(alpha, best.0);

    ok(
        d,
        &["evaluate", "--split", "split.json", "--model", "uniform", "--model", "a=ng.json", "--model", "b=ng.json", "--ttest", "--out", "e.json"],
    );
    let e = json(&d.join("e.json"));
    let neg = e["models"][0]["neg_avg_log_prob"].as_f64().unwrap();
    assert!((neg - 3.218876).abs() < 1e-6, "{neg}");
    let same = e["comparisons"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["a"] == "a" && c["b"] == "b")
        .unwrap();
    assert_eq!(same["test"]["significant"], false);
}

#[test]
fn trigram_beats_unigram_on_markov_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--kind", "markov", "--songs", "60", "--min-len", "80", "--max-len", "120", "--seed", "4", "--out", "m.jsonl"]);
    ok(d, &["split", "--corpus", "m.jsonl", "--seed", "0", "--out", "s.json"]);
    ok(d, &["train", "ngram", "--split", "s.json", "--order", "1", "--out", "uni.json"]);
    ok(d, &["train", "ngram", "--split", "s.json", "--order", "3", "--out", "tri.json"]);
    ok(d, &["evaluate", "--split", "s.json", "--model", "uni.json", "--model", "tri.json", "--ttest", "--bootstrap", "200", "--out", "e.json"]);
    let e = json(&d.join("e.json"));
    let uni = e["models"][0]["neg_avg_log_prob"].as_f64().unwrap();
    let tri = e["models"][1]["neg_avg_log_prob"].as_f64().unwrap();
    assert!(tri + 0.5 < uni, "{tri} vs {uni}");
    assert_eq!(e["comparisons"][0]["test"]["significant"], true);
    let ci = &e["models"][1]["confidence_interval"];
    assert!(ci["low"].as_f64().unwrap() <= -tri && -tri <= ci["high"].as_f64().unwrap());
}

#[test]
fn gru_learns_periodic_fixture_and_fine_tune_never_hurts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    periodic_split(d);
    ok(
        d,
        &["train", "neural", "--split", "split.json", "--cell", "gru", "--hidden", "16", "--lr", "0.01", "--max-epochs", "200", "--patience", "10", "--fine-tune", "--out", "g.json", "--report", "r.json"],
    );
    let r = json(&d.join("r.json"));
    let base_best = r["train"]["best_val_score"].as_f64().unwrap();
    let final_best = r["validation_avg_log_prob"].as_f64().unwrap();
    assert!(-final_best < 0.05, "{final_best}");
    assert!(final_best >= base_best);
    assert!(r["fine_tune"].is_object());
    assert!(d.join("r.json.timing.json").exists());
    ok(d, &["evaluate", "--split", "split.json", "--model", "g.json", "--on", "validation", "--out", "e.json"]);
    let e = json(&d.join("e.json"));
    assert!((e["models"][0]["result"]["avg_log_prob"].as_f64().unwrap() - final_best).abs() < 1e-12);
}

#[test]
fn checkpoint_resume_reproduces_training() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    periodic_split(d);
    let base = ["train", "neural", "--split", "split.json", "--cell", "lstm", "--hidden", "6", "--max-epochs", "5", "--lr", "0.01"];
    let mut full = base.to_vec();
    full.extend(["--out", "full.json", "--report", "full_r.json"]);
    ok(d, &full);
    let mut short = base.to_vec();
    short.extend(["--stop-after", "2", "--checkpoint", "ck.json", "--out", "short.json"]);
    ok(d, &short);
    assert_eq!(json(&d.join("ck.json"))["trainer"]["epoch"], 2);
    ok(d, &["train", "neural", "--split", "split.json", "--resume", "ck.json", "--out", "res.json", "--report", "res_r.json"]);
    assert_eq!(json(&d.join("full_r.json"))["train"], json(&d.join("res_r.json"))["train"]);
    assert_eq!(json(&d.join("full.json"))["model"], json(&d.join("res.json"))["model"]);
}

#[test]
fn replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    periodic_split(d);
    ok(
        d,
        &["train", "neural", "--split", "split.json", "--cell", "simple", "--hidden", "5", "--max-epochs", "3", "--out", "m.json", "--report", "r.json"],
    );
    ok(d, &["evaluate", "--split", "split.json", "--model", "m.json", "--model", "uniform", "--bootstrap", "50", "--ttest", "--curves", "c.csv", "--min-length", "50", "--out", "e.json"]);
    let before: Vec<Vec<u8>> = ["m.json", "r.json", "e.json", "c.csv"].iter().map(|f| fs::read(d.join(f)).unwrap()).collect();
    ok(d, &["replay", "r.json"]);
    ok(d, &["replay", "e.json"]);
    let after: Vec<Vec<u8>> = ["m.json", "r.json", "e.json", "c.csv"].iter().map(|f| fs::read(d.join(f)).unwrap()).collect();
    assert_eq!(before, after);
    let csv = fs::read_to_string(d.join("c.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
    assert!(csv.starts_with("k,m,uniform"));
}

#[test]
fn search_writes_resumable_leaderboard() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    periodic_split(d);
    let args = [
        "search", "--split", "split.json", "--cell", "gru", "--eta", "2", "--max-resource", "4", "--hidden-sizes", "4,8",
        "--layers", "1", "--embedding-dims", "4", "--patience", "3", "--seed", "9", "--leaderboard", "lb.jsonl", "--out", "best.json",
    ];
    ok(d, &args);
    let best = json(&d.join("best.json"));
    assert_eq!(best["total_configs"], 10);
    let board = fs::read_to_string(d.join("lb.jsonl")).unwrap();
    let rows = board.lines().count();
    assert_eq!(rows, 4 + 2 + 1 + 3 + 1 + 3);
    // a second run finds everything in the leaderboard and changes nothing
    ok(d, &args);
    assert_eq!(fs::read_to_string(d.join("lb.jsonl")).unwrap().lines().count(), rows);
    assert_eq!(json(&d.join("best.json"))["best_config"], best["best_config"]);
}
