//! Loss, token-budget batching, plain SGD, stratified splitting and the
//! early-stopping training loop.

mod checkpoint;
mod gradcheck;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use checkpoint::{
    load_checkpoint, read_container, save_checkpoint, CheckpointContainer, LoadedCheckpoint, Tensor, CHECKPOINT_MAGIC,
};
pub use gradcheck::{gradient_check, GradCheck, GRADCHECK_SAMPLE_LIMIT};

use crate::dataio::{Example, LabeledDataset};
use crate::error::{Error, Result};
use crate::label::Emotion;
use crate::metrics::{EvaluationReport, ConfusionMatrix};
use crate::neural::{Channels, Gradients, SsLstm};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Maximum total token count per batch.
    pub token_budget: usize,
    pub max_epochs: usize,
    /// Epochs without a validation macro-F1 improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub channels: Channels,
    /// Scale each example's loss by the inverse frequency of its class.
    pub class_weights: bool,
    /// Worker threads for per-example gradients; `None` or `Some(1)` is serial.
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            token_budget: 4000,
            max_epochs: 100,
            patience: 5,
            seed: 0,
            channels: Channels::Both,
            class_weights: false,
            threads: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.token_budget == 0 || self.max_epochs == 0 {
            return Err(Error::Config("token budget and epoch count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_macro_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the parameters that were returned.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn render_tsv(&self) -> String {
        let mut s = String::from("epoch\ttrain_loss\tvalidation_macro_f1\n");
        for r in &self.epochs {
            s.push_str(&format!("{}\t{:.6}\t{:.2}\n", r.epoch, r.train_loss, r.validation_macro_f1));
        }
        s
    }
}

/// `-ln p[target]`.
pub fn cross_entropy(probabilities: &[f64; 4], target: Emotion) -> f64 {
    -probabilities[target.index()].ln()
}

/// Greedily packs items, in the given order, into batches whose token sums
/// stay within `budget`. An item longer than the budget gets a batch of its own.
pub fn greedy_batches(lengths: &[usize], order: &[usize], budget: usize) -> Vec<Vec<usize>> {
    let mut batches = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut sum = 0;
    for &i in order {
        let len = lengths[i];
        if !current.is_empty() && sum + len > budget {
            batches.push(std::mem::take(&mut current));
            sum = 0;
        }
        current.push(i);
        sum += len;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches
}

/// Shuffles indices with `seed`, then packs them with [`greedy_batches`].
pub fn make_batches(lengths: &[usize], budget: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    greedy_batches(lengths, &order, budget.max(1))
}

/// `w ← w − lr·g` for every parameter the gradients cover.
pub fn sgd_step(model: &mut SsLstm, grads: &Gradients, learning_rate: f64) -> Result<()> {
    let want: Vec<(String, usize, usize)> = model.tensors().iter().map(|t| (t.0.clone(), t.1, t.2)).collect();
    let have: Vec<(String, usize, usize)> = grads.tensors().iter().map(|t| (t.0.clone(), t.1, t.2)).collect();
    if want != have {
        return Err(Error::ShapeMismatch("gradient bundle does not match model parameters".into()));
    }
    let g: Vec<&[f64]> = grads.tensors().into_iter().map(|t| t.3).collect();
    for (w, g) in model.tensors_mut().into_iter().zip(g) {
        for (w, g) in w.iter_mut().zip(g) {
            *w -= learning_rate * g;
        }
    }
    for (channel, emb) in [
        (model.semantic.as_mut(), &grads.semantic_embeddings),
        (model.sentiment.as_mut(), &grads.sentiment_embeddings),
    ] {
        if emb.is_empty() {
            continue;
        }
        let channel = channel.ok_or_else(|| Error::ShapeMismatch("embedding gradient for a missing channel".into()))?;
        let table = Arc::make_mut(&mut channel.table);
        for (word, g) in emb {
            let v = table
                .get_mut(word)
                .filter(|v| v.len() == g.len())
                .ok_or_else(|| Error::ShapeMismatch(format!("embedding gradient for unknown token {word:?}")))?;
            for (w, g) in v.iter_mut().zip(g) {
                *w -= learning_rate * g;
            }
        }
    }
    Ok(())
}

/// Stratified split: per label, a seeded shuffle puts `floor(ratio·n)`
/// indices in the first part and the rest in the second. Both parts are
/// returned in ascending order.
pub fn stratified_split(labels: &[Emotion], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} is outside (0, 1)")));
    }
    if labels.is_empty() {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for class in Emotion::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let cut = (ratio * idx.len() as f64).floor() as usize;
        first.extend_from_slice(&idx[..cut]);
        second.extend_from_slice(&idx[cut..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

/// Splits a dataset into (train, validation).
pub fn split_dataset(dataset: &LabeledDataset, ratio: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (a, b) = stratified_split(&dataset.labels(), ratio, seed)?;
    Ok((dataset.select(&a), dataset.select(&b)))
}

pub fn evaluate(model: &SsLstm, examples: &[Example]) -> Result<EvaluationReport> {
    let mut cm = ConfusionMatrix::default();
    for ex in examples {
        cm.add(ex.label, model.predict(&ex.tokens)?);
    }
    Ok(EvaluationReport::new(cm))
}

fn class_weights(examples: &[Example], enabled: bool) -> [f64; 4] {
    if !enabled {
        return [1.0; 4];
    }
    let mut counts = [0usize; 4];
    for ex in examples {
        counts[ex.label.index()] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count() as f64;
    counts.map(|c| if c == 0 { 0.0 } else { examples.len() as f64 / (present * c as f64) })
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains with per-batch mean gradients and plain SGD, keeping the
/// parameters of the epoch with the best validation macro-F1.
///
/// Per-example gradients may be computed on a thread pool; they are always
/// summed in batch order, so results do not depend on the thread count.
pub fn train(
    model: &SsLstm,
    train_set: &[Example],
    validation: &[Example],
    config: &TrainConfig,
) -> Result<(SsLstm, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() || validation.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    if model.config.channels != config.channels {
        return Err(Error::Config(format!(
            "model uses channels {} but training config asks for {}",
            model.config.channels, config.channels
        )));
    }
    model.check()?;
    let pool = match config.threads {
        Some(n) if n > 1 => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        ),
        _ => None,
    };
    let weights = class_weights(train_set, config.class_weights);
    let max_len = model.config.max_seq_len;
    let lengths: Vec<usize> = train_set.iter().map(|e| e.tokens.len().min(max_len)).collect();

    let mut model = model.clone();
    let mut best = model.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut history = TrainHistory::default();
    let mut stale = 0;

    let per_example = |m: &SsLstm, ex: &Example| -> Result<(f64, Gradients)> {
        let (probs, cache) = m.forward(&ex.tokens)?;
        let g = m.backward(&cache, ex.label)?;
        Ok((cross_entropy(&probs, ex.label), g))
    };

    for epoch in 0..config.max_epochs {
        let mut loss_sum = 0.0;
        for batch in make_batches(&lengths, config.token_budget, epoch_seed(config.seed, epoch)) {
            let results: Vec<Result<(f64, Gradients)>> = match &pool {
                Some(p) => p.install(|| batch.par_iter().map(|&i| per_example(&model, &train_set[i])).collect()),
                None => batch.iter().map(|&i| per_example(&model, &train_set[i])).collect(),
            };
            let mut grads = Gradients::zeros_like(&model);
            let scale = 1.0 / batch.len() as f64;
            for (r, &i) in results.into_iter().zip(&batch) {
                let (loss, g) = r?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("non-finite loss at epoch {}", epoch + 1)));
                }
                loss_sum += loss;
                grads.add_scaled(&g, scale * weights[train_set[i].label.index()])?;
            }
            if !grads.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient at epoch {}", epoch + 1)));
            }
            sgd_step(&mut model, &grads, config.learning_rate)?;
        }
        let f1 = evaluate(&model, validation)?.macro_f1;
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            validation_macro_f1: f1,
        });
        if f1 > best_f1 {
            best_f1 = f1;
            best = model.clone();
            history.best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale > config.patience {
                break;
            }
        }
    }
    Ok((best, history))
}
