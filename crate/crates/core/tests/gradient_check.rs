use chordlm::embedding::EmbeddingKind;
use chordlm::neural::{backward, Batch, CellKind, EmbeddingSpec, NeuralConfig, NeuralParameters};
use chordlm::ChordClass;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;

fn random_instance(cell: CellKind, skip: bool, rng: &mut ChaCha8Rng) -> (NeuralConfig, NeuralParameters, Batch) {
    let mut cfg = NeuralConfig::new(cell, rng.gen_range(1..=3), rng.gen_range(1..=8));
    cfg.skip_connections = skip;
    if rng.gen_bool(0.5) {
        cfg.embedding = EmbeddingSpec {
            kind: EmbeddingKind::Learned,
            dim: rng.gen_range(2..=5),
        };
    }
    let mut params = NeuralParameters::init(&cfg, None, rng).unwrap();
    // nonzero biases so every gate path carries gradient
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    let n_seqs = rng.gen_range(1..=3);
    let seqs: Vec<Vec<ChordClass>> = (0..n_seqs)
        .map(|_| {
            let len = rng.gen_range(1..=6);
            (0..len).map(|_| ChordClass::from_index(rng.gen_range(0..25)).unwrap()).collect()
        })
        .collect();
    let refs: Vec<&[ChordClass]> = seqs.iter().map(|s| s.as_slice()).collect();
    (cfg, params, Batch::new(&refs))
}

/// Largest relative error between analytic and central-difference gradients.
fn max_relative_error(cfg: &NeuralConfig, params: &NeuralParameters, batch: &Batch) -> f64 {
    let (_, grads) = backward(params, cfg, batch).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|(_, m)| m.data().to_vec()).collect();
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for (ti, g) in analytic.iter().enumerate() {
        for (j, &a) in g.iter().enumerate() {
            let orig = probe.tensors()[ti].1.data()[j];
            probe.tensors_mut()[ti].data_mut()[j] = orig + STEP;
            let up = backward(&probe, cfg, batch).unwrap().0;
            probe.tensors_mut()[ti].data_mut()[j] = orig - STEP;
            let down = backward(&probe, cfg, batch).unwrap().0;
            probe.tensors_mut()[ti].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let scale = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    worst
}

#[test]
fn bptt_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for cell in CellKind::ALL {
        for skip in [false, true] {
            for _ in 0..4 {
                let (cfg, params, batch) = random_instance(cell, skip, &mut rng);
                let err = max_relative_error(&cfg, &params, &batch);
                assert!(err < 1e-4, "{cell} skip={skip} {cfg:?}: {err}");
            }
        }
    }
}
