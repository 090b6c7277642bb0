//! Chord labels and the 25-class major/minor vocabulary.
//!
//! Labels are parsed from Harte syntax (`Root:shorthand(intervals)/bass`),
//! reduced to a [`ChordClass`] and transposed by semitone offsets.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of modelling classes: 12 roots x {maj, min} plus no-chord.
pub const VOCAB_SIZE: usize = 25;

/// Number of rows in an embedding table: the 25 classes plus the start pad.
pub const NUM_TOKENS: usize = VOCAB_SIZE + 1;

const SHARP_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PitchClass(u8);

impl PitchClass {
    pub fn new(value: i32) -> Self {
        PitchClass(value.rem_euclid(12) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn transpose(self, semitones: i32) -> Self {
        PitchClass::new(self.0 as i32 + semitones)
    }

    /// Semitone distance going upward from `self` to `other`.
    pub fn interval_to(self, other: PitchClass) -> u8 {
        (other.0 as i32 - self.0 as i32).rem_euclid(12) as u8
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(SHARP_NAMES[self.0 as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Major,
    Minor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLabel {
    pub root: Option<PitchClass>,
    /// Semitone offsets above the root. Compound intervals keep their size
    /// (a ninth is 14), so a raised ninth never reads as a minor third.
    pub intervals: BTreeSet<u8>,
    /// Semitone offset of the bass note above the root; 0 for root position.
    pub bass: u8,
    pub is_nochord: bool,
}

impl ParsedLabel {
    fn nochord() -> Self {
        ParsedLabel {
            root: None,
            intervals: BTreeSet::new(),
            bass: 0,
            is_nochord: true,
        }
    }
}

/// One of the 25 modelling symbols. Index `root * 2 + mode` for chords
/// (mode 0 = maj, 1 = min) and 24 for no-chord.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChordClass(u8);

impl ChordClass {
    pub const NO_CHORD: ChordClass = ChordClass(24);

    pub fn new(root: PitchClass, mode: Mode) -> Self {
        let m = match mode {
            Mode::Major => 0,
            Mode::Minor => 1,
        };
        ChordClass(root.0 * 2 + m)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (index < VOCAB_SIZE).then_some(ChordClass(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_nochord(self) -> bool {
        self == Self::NO_CHORD
    }

    pub fn root(self) -> Option<PitchClass> {
        (!self.is_nochord()).then(|| PitchClass(self.0 / 2))
    }

    pub fn mode(self) -> Option<Mode> {
        (!self.is_nochord()).then(|| if self.0 % 2 == 0 { Mode::Major } else { Mode::Minor })
    }

    pub fn transpose(self, semitones: i32) -> Self {
        match (self.root(), self.mode()) {
            (Some(root), Some(mode)) => ChordClass::new(root.transpose(semitones), mode),
            _ => self,
        }
    }

    pub fn all() -> impl Iterator<Item = ChordClass> {
        (0..VOCAB_SIZE as u8).map(ChordClass)
    }
}

impl fmt::Display for ChordClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.root(), self.mode()) {
            (Some(root), Some(Mode::Major)) => write!(f, "{root}:maj"),
            (Some(root), Some(Mode::Minor)) => write!(f, "{root}:min"),
            _ => f.write_str("N"),
        }
    }
}

impl FromStr for ChordClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "N" {
            return Ok(ChordClass::NO_CHORD);
        }
        let unknown = || Error::UnknownClassString(s.to_string());
        let (root, quality) = s.split_once(':').ok_or_else(unknown)?;
        let root = SHARP_NAMES
            .iter()
            .position(|&name| name == root)
            .ok_or_else(unknown)?;
        let mode = match quality {
            "maj" => Mode::Major,
            "min" => Mode::Minor,
            _ => return Err(unknown()),
        };
        Ok(ChordClass::new(PitchClass(root as u8), mode))
    }
}

impl Serialize for ChordClass {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChordClass {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Model input symbol: a chord class or the start-of-song pad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Pad,
    Chord(ChordClass),
}

impl Token {
    /// Row index in an embedding table; the pad takes the last row.
    pub fn index(self) -> usize {
        match self {
            Token::Chord(c) => c.index(),
            Token::Pad => VOCAB_SIZE,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index == VOCAB_SIZE {
            Some(Token::Pad)
        } else {
            ChordClass::from_index(index).map(Token::Chord)
        }
    }

    pub fn transpose(self, semitones: i32) -> Self {
        match self {
            Token::Chord(c) => Token::Chord(c.transpose(semitones)),
            Token::Pad => Token::Pad,
        }
    }
}

impl From<ChordClass> for Token {
    fn from(c: ChordClass) -> Self {
        Token::Chord(c)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Chord(c) => c.fmt(f),
            Token::Pad => f.write_str("<pad>"),
        }
    }
}

fn shorthand_intervals(shorthand: &str) -> Option<&'static [u8]> {
    let intervals: &'static [u8] = match shorthand {
        "maj" => &[0, 4, 7],
        "min" => &[0, 3, 7],
        "dim" => &[0, 3, 6],
        "aug" => &[0, 4, 8],
        "maj7" => &[0, 4, 7, 11],
        "min7" => &[0, 3, 7, 10],
        "7" => &[0, 4, 7, 10],
        "dim7" => &[0, 3, 6, 9],
        "hdim7" => &[0, 3, 6, 10],
        "minmaj7" => &[0, 3, 7, 11],
        "maj6" => &[0, 4, 7, 9],
        "min6" => &[0, 3, 7, 9],
        "9" => &[0, 4, 7, 10, 14],
        "maj9" => &[0, 4, 7, 11, 14],
        "min9" => &[0, 3, 7, 10, 14],
        "11" => &[0, 4, 7, 10, 14, 17],
        "min11" => &[0, 3, 7, 10, 14, 17],
        "13" => &[0, 4, 7, 10, 14, 17, 21],
        "maj13" => &[0, 4, 7, 11, 14, 17, 21],
        "min13" => &[0, 3, 7, 10, 14, 17, 21],
        "sus2" => &[0, 2, 7],
        "sus4" => &[0, 5, 7],
        "5" => &[0, 7],
        "1" => &[0],
        _ => return None,
    };
    Some(intervals)
}

/// Every shorthand the parser accepts.
pub const SHORTHANDS: &[&str] = &[
    "maj", "min", "dim", "aug", "maj7", "min7", "7", "dim7", "hdim7", "minmaj7", "maj6", "min6",
    "9", "maj9", "min9", "11", "min11", "13", "maj13", "min13", "sus2", "sus4", "5", "1",
];

fn malformed(label: &str, reason: impl Into<String>) -> Error {
    Error::MalformedLabel {
        label: label.to_string(),
        reason: reason.into(),
    }
}

/// Splits a leading note name (letter plus any run of `#`/`b`) off `s`.
fn parse_note(s: &str) -> Option<(PitchClass, &str)> {
    let mut chars = s.char_indices();
    let (_, letter) = chars.next()?;
    let base = match letter {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    };
    let mut offset = 0i32;
    let mut end = 1;
    for (i, c) in chars {
        match c {
            '#' => offset += 1,
            'b' => offset -= 1,
            _ => {
                end = i;
                break;
            }
        }
        end = i + 1;
    }
    Some((PitchClass::new(base + offset), &s[end..]))
}

/// Parses a scale degree such as `b3`, `#11` or `5` into semitones above the root.
fn parse_degree(label: &str, s: &str) -> Result<u8> {
    let digits_at = s
        .find(|c: char| c.is_ascii_digit())
        .ok_or_else(|| malformed(label, format!("missing degree number in {s:?}")))?;
    let (accidentals, digits) = s.split_at(digits_at);
    let mut shift = 0i32;
    for c in accidentals.chars() {
        match c {
            '#' => shift += 1,
            'b' => shift -= 1,
            _ => return Err(malformed(label, format!("bad accidental in degree {s:?}"))),
        }
    }
    let degree: usize = digits
        .parse()
        .map_err(|_| malformed(label, format!("bad degree {s:?}")))?;
    const MAJOR_SCALE: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];
    if degree == 0 || degree > 13 {
        return Err(malformed(label, format!("degree {degree} out of range")));
    }
    let octave = ((degree - 1) / 7) as i32;
    let semis = MAJOR_SCALE[(degree - 1) % 7] + 12 * octave + shift;
    if semis < 0 {
        return Err(malformed(label, format!("degree {s:?} falls below the root")));
    }
    Ok(semis as u8)
}

/// Parses one chord label in Harte syntax. `N` and `X` both read as no-chord.
pub fn parse_chord_label(text: &str) -> Result<ParsedLabel> {
    let label = text.trim();
    if label.is_empty() {
        return Err(malformed(text, "empty label"));
    }
    if label == "N" || label == "X" {
        return Ok(ParsedLabel::nochord());
    }

    let (root, rest) = parse_note(label).ok_or_else(|| malformed(label, "unknown root note"))?;

    let (body, bass_text) = match rest.split_once('/') {
        Some((body, bass)) => (body, Some(bass)),
        None => (rest, None),
    };

    let mut intervals: BTreeSet<u8> = BTreeSet::new();
    if body.is_empty() {
        intervals.extend(shorthand_intervals("maj").unwrap());
    } else {
        let quality = body
            .strip_prefix(':')
            .ok_or_else(|| malformed(label, format!("unexpected text {body:?} after root")))?;
        let (shorthand, list) = match quality.find('(') {
            Some(open) => {
                let close = quality
                    .rfind(')')
                    .filter(|&c| c > open)
                    .ok_or_else(|| malformed(label, "unbalanced parentheses"))?;
                if close != quality.len() - 1 {
                    return Err(malformed(label, "text after interval list"));
                }
                let inner = &quality[open + 1..close];
                if inner.contains('(') || inner.contains(')') {
                    return Err(malformed(label, "unbalanced parentheses"));
                }
                (&quality[..open], Some(inner))
            }
            None => {
                if quality.contains(')') {
                    return Err(malformed(label, "unbalanced parentheses"));
                }
                (quality, None)
            }
        };

        if !shorthand.is_empty() {
            let expansion = shorthand_intervals(shorthand)
                .ok_or_else(|| malformed(label, format!("unknown shorthand {shorthand:?}")))?;
            intervals.extend(expansion);
        } else if list.is_none() {
            return Err(malformed(label, "missing quality after ':'"));
        }

        if let Some(list) = list {
            for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                if let Some(omitted) = item.strip_prefix('*') {
                    intervals.remove(&parse_degree(label, omitted)?);
                } else {
                    intervals.insert(parse_degree(label, item)?);
                }
            }
        }
    }
    intervals.insert(0);

    let bass = match bass_text {
        None => 0,
        Some("") => return Err(malformed(label, "empty bass")),
        Some(b) => match parse_note(b) {
            Some((note, "")) => root.interval_to(note),
            _ => parse_degree(label, b)? % 12,
        },
    };

    Ok(ParsedLabel {
        root: Some(root),
        intervals,
        bass,
        is_nochord: false,
    })
}

/// Minor iff the expansion holds a minor third above the root; everything else is major.
pub fn reduce_to_majmin(label: &ParsedLabel) -> ChordClass {
    match label.root {
        Some(root) if !label.is_nochord => {
            let mode = if label.intervals.contains(&3) {
                Mode::Minor
            } else {
                Mode::Major
            };
            ChordClass::new(root, mode)
        }
        _ => ChordClass::NO_CHORD,
    }
}

pub fn label_to_class(text: &str) -> Result<ChordClass> {
    parse_chord_label(text).map(|l| reduce_to_majmin(&l))
}

/// Digest of the canonical vocabulary; stored in model and corpus files so
/// mismatched artifacts are refused.
pub fn vocabulary_hash() -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for c in ChordClass::all() {
        hasher.update(c.to_string().as_bytes());
        hasher.update(b"\n");
    }
    hasher.update(Token::Pad.to_string().as_bytes());
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(v: &[u8]) -> BTreeSet<u8> {
        v.iter().copied().collect()
    }

    // Hand-written expansions, independent of the shorthand table above.
    const FIXTURE: &[(&str, u8, &[u8], u8)] = &[
        ("C:maj7", 0, &[0, 4, 7, 11], 0),
        ("Db:min7/b7", 1, &[0, 3, 7, 10], 10),
        ("F#:hdim7", 6, &[0, 3, 6, 10], 0),
        ("Bb:7/3", 10, &[0, 4, 7, 10], 4),
        ("E:sus4(b7)", 4, &[0, 5, 7, 10], 0),
        ("A:(1,b3,5)", 9, &[0, 3, 7], 0),
        ("G:maj(*3)", 7, &[0, 7], 0),
        ("Cb:min", 11, &[0, 3, 7], 0),
        ("B##:5", 1, &[0, 7], 0),
        ("D:9", 2, &[0, 4, 7, 10, 14], 0),
        ("G/5", 7, &[0, 4, 7], 7),
        ("C:7(#9)", 0, &[0, 4, 7, 10, 15], 0),
    ];

    #[test]
    fn harte_fixture_table() {
        for &(text, root, intervals, bass) in FIXTURE {
            let p = parse_chord_label(text).unwrap();
            assert_eq!(p.root, Some(PitchClass::new(root as i32)), "{text}");
            assert_eq!(p.intervals, set(intervals), "{text}");
            assert_eq!(p.bass, bass, "{text}");
            assert!(!p.is_nochord);
        }
    }

    #[test]
    fn no_chord_tokens() {
        assert!(parse_chord_label("N").unwrap().is_nochord);
        assert!(parse_chord_label("X").unwrap().is_nochord);
        assert_eq!(label_to_class("X").unwrap(), ChordClass::NO_CHORD);
    }

    #[test]
    fn malformed_labels() {
        for bad in ["H:maj", "C:foo", "C:maj7(9", "C:maj7)", "C:(1,3", "", "C:", "Cmaj", "C:maj/"] {
            assert!(
                matches!(parse_chord_label(bad), Err(Error::MalformedLabel { .. })),
                "{bad:?} should be rejected"
            );
        }
    }

    #[test]
    fn reduction_examples() {
        let c_min = ChordClass::new(PitchClass::new(0), Mode::Minor);
        assert_eq!(label_to_class("C:dim").unwrap(), c_min);
        let g_maj = ChordClass::new(PitchClass::new(7), Mode::Major);
        assert_eq!(label_to_class("G:sus4").unwrap(), g_maj);
        assert_eq!(label_to_class("A:min7").unwrap().to_string(), "A:min");
        assert_eq!(label_to_class("C:7(#9)").unwrap().to_string(), "C:maj");
        assert_eq!(label_to_class("A:(1,b3,5)").unwrap().to_string(), "A:min");
        assert_eq!(label_to_class("C/b3").unwrap().to_string(), "C:maj");
    }

    #[test]
    fn every_shorthand_reduces_by_minor_third() {
        for &sh in SHORTHANDS {
            let p = parse_chord_label(&format!("D:{sh}")).unwrap();
            let minor = reduce_to_majmin(&p).mode() == Some(Mode::Minor);
            assert_eq!(minor, p.intervals.contains(&3), "{sh}");
        }
    }

    #[test]
    fn transpose_examples() {
        let c: ChordClass = "C:maj".parse().unwrap();
        assert_eq!(c.transpose(2).to_string(), "D:maj");
        assert_eq!(ChordClass::NO_CHORD.transpose(5), ChordClass::NO_CHORD);
        let b: ChordClass = "B:min".parse().unwrap();
        assert_eq!(b.transpose(1).to_string(), "C:min");
        assert_eq!(c.transpose(-1).to_string(), "B:maj");
    }

    #[test]
    fn canonical_strings_round_trip() {
        assert_eq!(ChordClass::NO_CHORD.to_string(), "N");
        assert_eq!(ChordClass::from_index(0).unwrap().to_string(), "C:maj");
        let strings: BTreeSet<String> = ChordClass::all().map(|c| c.to_string()).collect();
        assert_eq!(strings.len(), VOCAB_SIZE);
        for c in ChordClass::all() {
            assert_eq!(c.to_string().parse::<ChordClass>().unwrap(), c);
        }
        for bad in ["Db:maj", "C", "C:dim", "n", "C#:min7"] {
            assert!(matches!(bad.parse::<ChordClass>(), Err(Error::UnknownClassString(_))));
        }
    }

    proptest! {
        #[test]
        fn transposition_inverts(index in 0usize..VOCAB_SIZE, k in -100i32..100) {
            let c = ChordClass::from_index(index).unwrap();
            prop_assert_eq!(c.transpose(k).transpose(-k), c);
            prop_assert_eq!(c.transpose(12), c);
            prop_assert_eq!(c.transpose(k).mode(), c.mode());
        }
    }
}
