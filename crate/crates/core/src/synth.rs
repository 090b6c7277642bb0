//! Synthetic corpora with known structure for tests and experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chord::ChordClass;
use crate::corpus::ChordSequence;

const CHORDS: usize = 24;

fn sequence(id: String, dataset: &str, chords: Vec<ChordClass>) -> ChordSequence {
    ChordSequence {
        song_id: id,
        dataset_id: dataset.to_string(),
        chords,
    }
}

/// Position of `c` relative to a chord with root `root`, i.e. `c` transposed
/// down by `root`.
fn relative(c: usize, root: u8) -> usize {
    ChordClass::from_index(c).unwrap().transpose(-(root as i32)).index()
}

fn absolute(rel: usize, root: u8) -> usize {
    ChordClass::from_index(rel).unwrap().transpose(root as i32).index()
}

/// Second-order Markov chain over the 24 major/minor chords. Its transition
/// table is invariant under transposition and never repeats a chord.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    /// `next[a][b]` lists (successor, probability).
    next: Vec<Vec<Vec<(usize, f64)>>>,
}

impl MarkovChain {
    /// Random chain: each context (relative to the root of its last chord)
    /// gets `min_successors..=max_successors` successors with Dirichlet(1)
    /// weights.
    pub fn random(seed: u64, min_successors: usize, max_successors: usize) -> Self {
        Self::build(seed, None, min_successors, max_successors)
    }

    /// Like [`MarkovChain::random`], but successors of a major (minor) chord
    /// are drawn from one fixed set of `moves` chords relative to its root,
    /// which leaves about `24 * moves` reachable contexts.
    pub fn with_moves(seed: u64, moves: usize, min_successors: usize, max_successors: usize) -> Self {
        assert!(max_successors <= moves && moves < CHORDS, "need max_successors <= moves < 24");
        Self::build(seed, Some(moves), min_successors, max_successors)
    }

    fn build(seed: u64, moves: Option<usize>, min_successors: usize, max_successors: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let move_sets: Option<Vec<Vec<usize>>> = moves.map(|m| {
            [0usize, 1]
                .iter()
                .map(|&b| {
                    let mut pool: Vec<usize> = (0..CHORDS).filter(|&c| c != b).collect();
                    pool.shuffle(&mut rng);
                    pool.truncate(m);
                    pool
                })
                .collect()
        });
        // canonical tables: last chord is C (0) or C:min (1)
        let mut canonical = vec![vec![Vec::new(); CHORDS]; CHORDS];
        for b in [0usize, 1] {
            for a in 0..CHORDS {
                if a == b {
                    continue;
                }
                let k = rng.gen_range(min_successors..=max_successors);
                let mut pool: Vec<usize> = match &move_sets {
                    Some(sets) => sets[b].clone(),
                    None => (0..CHORDS).filter(|&c| c != b).collect(),
                };
                pool.shuffle(&mut rng);
                let weights: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let total: f64 = weights.iter().sum();
                canonical[a][b] = pool[..k].iter().zip(&weights).map(|(&c, &w)| (c, w / total)).collect();
            }
        }
        let mut next = vec![vec![Vec::new(); CHORDS]; CHORDS];
        for a in 0..CHORDS {
            for b in 0..CHORDS {
                if a == b {
                    continue;
                }
                let root = ChordClass::from_index(b).unwrap().root().unwrap().value();
                let (ra, rb) = (relative(a, root), relative(b, root));
                next[a][b] = canonical[ra][rb].iter().map(|&(c, p)| (absolute(c, root), p)).collect();
            }
        }
        MarkovChain { next }
    }

    pub fn transitions(&self, a: usize, b: usize) -> &[(usize, f64)] {
        &self.next[a][b]
    }

    /// Stationary distribution over ordered chord pairs, by power iteration
    /// from uniform.
    pub fn stationary(&self) -> Vec<Vec<f64>> {
        let n_pairs = (CHORDS * (CHORDS - 1)) as f64;
        let mut pi = vec![vec![0.0; CHORDS]; CHORDS];
        for (a, row) in pi.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                if a != b {
                    *v = 1.0 / n_pairs;
                }
            }
        }
        for _ in 0..100_000 {
            let mut nxt = vec![vec![0.0; CHORDS]; CHORDS];
            for a in 0..CHORDS {
                for b in 0..CHORDS {
                    let p = pi[a][b];
                    if p == 0.0 {
                        continue;
                    }
                    for &(c, q) in &self.next[a][b] {
                        nxt[b][c] += p * q;
                    }
                }
            }
            // lazy step guards against periodic chains
            let mut delta = 0.0f64;
            for a in 0..CHORDS {
                for b in 0..CHORDS {
                    let v = 0.5 * (pi[a][b] + nxt[a][b]);
                    delta = delta.max((v - pi[a][b]).abs());
                    pi[a][b] = v;
                }
            }
            if delta < 1e-16 {
                break;
            }
        }
        pi
    }

    /// Entropy rate in nats per chord.
    pub fn entropy_rate(&self) -> f64 {
        let pi = self.stationary();
        let mut h = 0.0;
        for a in 0..CHORDS {
            for b in 0..CHORDS {
                let cond: f64 = self.next[a][b].iter().map(|&(_, q)| if q > 0.0 { -q * q.ln() } else { 0.0 }).sum();
                h += pi[a][b] * cond;
            }
        }
        h
    }

    fn draw(rng: &mut impl Rng, items: impl Iterator<Item = (usize, f64)>) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (c, p) in items {
            acc += p;
            last = c;
            if u < acc {
                return c;
            }
        }
        last
    }

    /// Songs whose first pair is drawn from the stationary distribution.
    pub fn sample_corpus(&self, songs: usize, min_len: usize, max_len: usize, seed: u64) -> Vec<ChordSequence> {
        let pi = self.stationary();
        let pairs: Vec<(usize, f64)> = (0..CHORDS * CHORDS).map(|i| (i, pi[i / CHORDS][i % CHORDS])).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..songs)
            .map(|s| {
                let len = rng.gen_range(min_len..=max_len);
                let first = Self::draw(&mut rng, pairs.iter().copied());
                let (mut a, mut b) = (first / CHORDS, first % CHORDS);
                let mut chords = vec![a, b];
                while chords.len() < len {
                    let c = Self::draw(&mut rng, self.next[a][b].iter().copied());
                    chords.push(c);
                    a = b;
                    b = c;
                }
                chords.truncate(len);
                let chords = chords.into_iter().map(|c| ChordClass::from_index(c).unwrap()).collect();
                sequence(format!("markov-{s:04}"), &format!("markov-{}", s % 2), chords)
            })
            .collect()
    }
}

/// Each song repeats its own random motif of `motif_len` distinct chords up
/// to `length` chords.
pub fn motif_corpus(songs: usize, motif_len: usize, length: usize, seed: u64) -> Vec<ChordSequence> {
    assert!((2..=CHORDS).contains(&motif_len));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..songs)
        .map(|s| {
            let mut pool: Vec<usize> = (0..CHORDS).collect();
            pool.shuffle(&mut rng);
            let motif = &pool[..motif_len];
            let chords = (0..length)
                .map(|k| ChordClass::from_index(motif[k % motif_len]).unwrap())
                .collect();
            sequence(format!("motif-{s:04}"), &format!("motif-{}", s % 2), chords)
        })
        .collect()
}

/// Every song cycles the same `motif` from a random starting phase.
pub fn periodic_corpus(songs: usize, motif: &[ChordClass], length: usize, seed: u64) -> Vec<ChordSequence> {
    assert!(!motif.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..songs)
        .map(|s| {
            let phase = rng.gen_range(0..motif.len());
            let chords = (0..length).map(|k| motif[(k + phase) % motif.len()]).collect();
            sequence(format!("periodic-{s:04}"), &format!("periodic-{}", s % 2), chords)
        })
        .collect()
}

/// Random chords over all 25 classes, no immediate repeats; lengths uniform
/// in the given range.
pub fn random_corpus(songs: usize, min_len: usize, max_len: usize, seed: u64) -> Vec<ChordSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..songs)
        .map(|s| {
            let len = rng.gen_range(min_len..=max_len);
            let mut chords: Vec<ChordClass> = Vec::with_capacity(len);
            while chords.len() < len {
                let c = ChordClass::from_index(rng.gen_range(0..25)).unwrap();
                if chords.last() != Some(&c) {
                    chords.push(c);
                }
            }
            sequence(format!("random-{s:04}"), &format!("random-{}", s % 3), chords)
        })
        .collect()
}
