use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::Example;
use crate::error::{Error, Result};
use crate::neural::{loss_from_logits, SsLstm};

/// Parameter count above which a random subset is checked.
pub const GRADCHECK_SAMPLE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Name of the tensor holding the worst coordinate.
    pub worst: Option<String>,
    /// Analytic and numeric derivative at the worst coordinate.
    pub worst_values: (f64, f64),
}

impl GradCheck {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_relative_error < threshold
    }
}

#[derive(Clone)]
enum Coord {
    Dense { tensor: usize, k: usize },
    Embedding { semantic: bool, word: String, k: usize },
}

/// Compares analytic gradients with central differences
/// `(L(θ+ε) − L(θ−ε)) / 2ε` and reports the largest
/// `|a − n| / max(|a|, |n|, 1e-8)`.
///
/// Models with more than [`GRADCHECK_SAMPLE_LIMIT`] coordinates are checked
/// on a subset drawn with `seed`. With fine-tuning enabled, embedding rows
/// of the example's in-vocabulary tokens are included.
pub fn gradient_check(model: &SsLstm, example: &Example, epsilon: f64, seed: u64) -> Result<GradCheck> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    model.check()?;
    let (_, cache) = model.forward(&example.tokens)?;
    let grads = model.backward(&cache, example.label)?;

    let names: Vec<String> = grads.tensors().iter().map(|t| t.0.clone()).collect();
    let analytic_dense: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.3.to_vec()).collect();
    let mut coords: Vec<Coord> = Vec::new();
    for (tensor, values) in analytic_dense.iter().enumerate() {
        coords.extend((0..values.len()).map(|k| Coord::Dense { tensor, k }));
    }
    for (semantic, map) in [(true, &grads.semantic_embeddings), (false, &grads.sentiment_embeddings)] {
        for (word, g) in map {
            coords.extend((0..g.len()).map(|k| Coord::Embedding { semantic, word: word.clone(), k }));
        }
    }
    if coords.len() > GRADCHECK_SAMPLE_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, coords.len(), GRADCHECK_SAMPLE_LIMIT).into_vec();
        picked.sort_unstable();
        coords = picked.into_iter().map(|i| coords[i].clone()).collect();
    }

    let loss = |m: &SsLstm| -> Result<f64> {
        let (_, c) = m.forward(&example.tokens)?;
        Ok(loss_from_logits(&c.logits, example.label))
    };
    let mut work = model.clone();
    let mut report = GradCheck {
        max_relative_error: 0.0,
        checked: coords.len(),
        worst: None,
        worst_values: (0.0, 0.0),
    };
    for coord in &coords {
        let (analytic, name) = match coord {
            Coord::Dense { tensor, k } => (analytic_dense[*tensor][*k], names[*tensor].clone()),
            Coord::Embedding { semantic, word, k } => {
                let map = if *semantic { &grads.semantic_embeddings } else { &grads.sentiment_embeddings };
                let prefix = if *semantic { "semantic" } else { "sentiment" };
                (map[word][*k], format!("{prefix}.embedding[{word}]"))
            }
        };
        let original = read(&mut work, coord);
        write(&mut work, coord, original + epsilon);
        let plus = loss(&work)?;
        write(&mut work, coord, original - epsilon);
        let minus = loss(&work)?;
        write(&mut work, coord, original);
        let numeric = (plus - minus) / (2.0 * epsilon);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        if !rel.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient comparison in {name}")));
        }
        if rel > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = report.max_relative_error.max(rel);
            report.worst = Some(name);
            report.worst_values = (analytic, numeric);
        }
    }
    Ok(report)
}

fn slot<'a>(model: &'a mut SsLstm, coord: &Coord) -> &'a mut f64 {
    match coord {
        Coord::Dense { tensor, k } => &mut model.tensors_mut().swap_remove(*tensor)[*k],
        Coord::Embedding { semantic, word, k } => {
            let ch = if *semantic { &mut model.semantic } else { &mut model.sentiment };
            let table = Arc::make_mut(&mut ch.as_mut().expect("channel with embedding gradient").table);
            &mut table.get_mut(word).expect("in-vocabulary token")[*k]
        }
    }
}

fn read(model: &mut SsLstm, coord: &Coord) -> f64 {
    *slot(model, coord)
}

fn write(model: &mut SsLstm, coord: &Coord, value: f64) {
    *slot(model, coord) = value;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingTable;
    use crate::label::Emotion;
    use crate::neural::{Activation, Channels, Dense, ModelConfig};
    use crate::text_norm::{Token, TokenKind};
    use rand::Rng;

    fn model(channels: Channels, activation: Activation, fine_tune: bool) -> SsLstm {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vocab = ["x", "y", "z"];
        let mut mk = |dim: usize| {
            let pairs: Vec<(&str, Vec<f64>)> =
                vocab.iter().map(|w| (*w, (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect();
            Arc::new(EmbeddingTable::from_pairs("t", dim, &pairs).unwrap())
        };
        let (a, b) = (mk(4), mk(3));
        let cfg = ModelConfig {
            channels,
            semantic_hidden: 4,
            sentiment_hidden: 3,
            fc_hidden: 5,
            activation,
            max_seq_len: 50,
            fine_tune_embeddings: fine_tune,
        };
        SsLstm::init(cfg, Some(a), Some(b), 17).unwrap()
    }

    fn example(s: &str, label: Emotion) -> Example {
        Example::new(s.split_whitespace().map(|w| Token::new(w, TokenKind::Word)).collect(), label)
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for channels in [Channels::Both, Channels::Semantic, Channels::Sentiment] {
            for act in [Activation::Tanh, Activation::Relu] {
                let m = model(channels, act, true);
                let r = gradient_check(&m, &example("x y oov z x", Emotion::Sad), 1e-5, 0).unwrap();
                assert!(r.passes(1e-4), "{channels} {act}: {r:?}");
                assert!(r.checked > m.parameter_count());
            }
        }
    }

    #[test]
    fn uniform_output_bias_gradient() {
        let mut m = model(Channels::Both, Activation::Tanh, false);
        m.out = Dense::zeros(4, 5);
        let r = gradient_check(&m, &example("x", Emotion::Happy), 1e-5, 0).unwrap();
        assert!(r.passes(1e-4));
        let (_, c) = m.forward(&example("x", Emotion::Happy).tokens).unwrap();
        let g = m.backward(&c, Emotion::Happy).unwrap();
        for (got, want) in g.out.b.iter().zip([-0.75, 0.25, 0.25, 0.25]) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        let m = model(Channels::Both, Activation::Tanh, false);
        let ex = example("x", Emotion::Angry);
        assert!(gradient_check(&m, &ex, 0.0, 0).is_err());
        assert!(gradient_check(&m, &ex, -1e-5, 0).is_err());
    }

    #[test]
    fn leaves_the_model_untouched_and_subsamples_large_models() {
        let m = model(Channels::Both, Activation::Relu, false);
        let before = m.clone();
        gradient_check(&m, &example("y z", Emotion::Others), 1e-5, 0).unwrap();
        assert_eq!(m, before);

        let vocab = [("w", vec![0.1; 20])];
        let t = Arc::new(EmbeddingTable::from_pairs("big", 20, &vocab).unwrap());
        let cfg = ModelConfig {
            channels: Channels::Semantic,
            semantic_hidden: 48,
            fc_hidden: 8,
            ..ModelConfig::default()
        };
        let big = SsLstm::init(cfg, Some(t), None, 0).unwrap();
        assert!(big.parameter_count() > GRADCHECK_SAMPLE_LIMIT);
        let r = gradient_check(&big, &example("w w", Emotion::Sad), 1e-5, 1).unwrap();
        assert_eq!(r.checked, GRADCHECK_SAMPLE_LIMIT);
    }
}
