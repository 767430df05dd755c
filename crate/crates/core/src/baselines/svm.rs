use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax_tolerant, extract_features, FeatureVector};
use crate::dataio::Example;
use crate::error::{Error, Result};
use crate::label::Emotion;
use crate::text_norm::EmoticonLexicon;
use crate::training::CheckpointContainer;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    /// L2 regularization constant.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 0.005,
            epochs: 20,
            seed: 0,
        }
    }
}

/// Four one-vs-rest linear scorers over a dense index space. Index `dim`
/// is a constant-1 bias feature, regularized like every other weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    dim: usize,
    weights: [Vec<f64>; 4],
}

/// `scale · v` representation of a Pegasos iterate.
struct Scaled {
    scale: f64,
    v: Vec<f64>,
}

impl Scaled {
    fn dot(&self, x: &[(usize, f64)], bias: usize) -> f64 {
        let s: f64 = x.iter().map(|&(i, val)| self.v[i] * val).sum::<f64>() + self.v[bias];
        self.scale * s
    }

    fn shrink(&mut self, factor: f64) {
        self.scale *= factor;
        if self.scale == 0.0 {
            self.v.iter_mut().for_each(|w| *w = 0.0);
            self.scale = 1.0;
        }
    }

    fn add(&mut self, x: &[(usize, f64)], bias: usize, step: f64) {
        let s = step / self.scale;
        for &(i, val) in x {
            self.v[i] += s * val;
        }
        self.v[bias] += s;
    }
}

impl LinearSvm {
    /// Pegasos: stochastic subgradient descent on
    /// `λ/2 ‖w‖² + mean hinge(y · w·x)` for each class against the rest,
    /// with step size `1/(λt)`. Samples are visited in a fresh seeded
    /// permutation each epoch.
    pub fn fit(samples: &[(Vec<(usize, f64)>, Emotion)], dim: usize, config: &SvmConfig) -> Result<LinearSvm> {
        if samples.is_empty() {
            return Err(Error::Config("cannot train an SVM on an empty dataset".into()));
        }
        if !(config.lambda > 0.0 && config.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", config.lambda)));
        }
        if let Some(&(i, _)) = samples.iter().flat_map(|(x, _)| x).find(|(i, _)| *i >= dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: i + 1 });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut orders = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            let mut order: Vec<usize> = (0..samples.len()).collect();
            order.shuffle(&mut rng);
            orders.push(order);
        }
        let weights = Emotion::ALL.map(|class| {
            let mut w = Scaled {
                scale: 1.0,
                v: vec![0.0; dim + 1],
            };
            let mut t = 0u64;
            for &i in orders.iter().flatten() {
                t += 1;
                let (x, label) = &samples[i];
                let y = if *label == class { 1.0 } else { -1.0 };
                let eta = 1.0 / (config.lambda * t as f64);
                let margin = y * w.dot(x, dim);
                w.shrink(1.0 - eta * config.lambda);
                if margin < 1.0 {
                    w.add(x, dim, eta * y);
                }
            }
            w.v.iter().map(|v| v * w.scale).collect::<Vec<f64>>()
        });
        Ok(LinearSvm { dim, weights })
    }

    /// Hand-set weights; each row has `dim` feature weights then the bias.
    pub fn from_weights(weights: [Vec<f64>; 4]) -> Result<LinearSvm> {
        let len = weights[0].len();
        if len == 0 || weights.iter().any(|w| w.len() != len) {
            return Err(Error::ShapeMismatch("weight rows must share a positive length".into()));
        }
        if weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("non-finite SVM weight".into()));
        }
        Ok(LinearSvm { dim: len - 1, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[Vec<f64>; 4] {
        &self.weights
    }

    pub fn scores(&self, x: &[(usize, f64)]) -> [f64; 4] {
        std::array::from_fn(|c| {
            let w = &self.weights[c];
            x.iter().filter(|(i, _)| *i < self.dim).map(|&(i, v)| w[i] * v).sum::<f64>() + w[self.dim]
        })
    }

    pub fn predict(&self, x: &[(usize, f64)]) -> Emotion {
        argmax_tolerant(&self.scores(x))
    }
}

/// Linear SVM over n-gram counts followed by the three emoticon counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    lambda: f64,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    svm: LinearSvm,
}

impl SvmModel {
    fn new(lambda: f64, vocab: Vec<String>, svm: LinearSvm) -> Result<SvmModel> {
        if svm.dim() != vocab.len() + 3 {
            return Err(Error::ShapeMismatch(format!(
                "SVM has {} features, vocabulary implies {}",
                svm.dim(),
                vocab.len() + 3
            )));
        }
        let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        if index.len() != vocab.len() {
            return Err(Error::Config("duplicate n-gram in SVM vocabulary".into()));
        }
        Ok(SvmModel { lambda, vocab, index, svm })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn linear(&self) -> &LinearSvm {
        &self.svm
    }

    /// Sparse encoding; n-grams outside the vocabulary are dropped.
    pub fn encode(&self, f: &FeatureVector) -> Vec<(usize, f64)> {
        let v = self.vocab.len();
        let mut x: Vec<(usize, f64)> =
            f.ngrams.iter().filter_map(|(g, &n)| self.index.get(g).map(|&i| (i, n as f64))).collect();
        x.sort_unstable_by_key(|e| e.0);
        for (k, &n) in f.emoticons.iter().enumerate() {
            if n > 0 {
                x.push((v + k, n as f64));
            }
        }
        x
    }

    pub fn scores(&self, f: &FeatureVector) -> [f64; 4] {
        self.svm.scores(&self.encode(f))
    }

    pub fn save(&self, sink: impl Write) -> Result<()> {
        let mut c = CheckpointContainer::default();
        c.push_meta("model", "svm");
        c.push_meta("lambda", format!("{:?}", self.lambda));
        c.vocab = self.vocab.clone();
        let flat: Vec<f64> = self.svm.weights.iter().flatten().copied().collect();
        c.push_tensor("weights", 4, self.svm.dim + 1, &flat);
        c.write(sink)
    }

    pub fn load(source: impl Read) -> Result<SvmModel> {
        Self::from_container(CheckpointContainer::read(source)?)
    }

    pub fn from_container(mut c: CheckpointContainer) -> Result<SvmModel> {
        let kind = c.require("model")?;
        if kind != "svm" {
            return Err(Error::format("checkpoint", 0, format!("checkpoint holds a {kind} model, not svm")));
        }
        let lambda: f64 = c.parse_meta("lambda")?;
        let vocab = std::mem::take(&mut c.vocab);
        let cols = vocab.len() + 4;
        let flat = c.take_tensor("weights", 4, cols)?;
        c.finish()?;
        let rows: Vec<Vec<f64>> = flat.chunks(cols).map(<[f64]>::to_vec).collect();
        let weights: [Vec<f64>; 4] = rows.try_into().expect("four rows");
        SvmModel::new(lambda, vocab, LinearSvm::from_weights(weights)?)
    }
}

pub fn svm_train(examples: &[Example], lex: &EmoticonLexicon, config: &SvmConfig) -> Result<SvmModel> {
    if examples.is_empty() {
        return Err(Error::Config("cannot train an SVM on an empty dataset".into()));
    }
    let feats: Vec<FeatureVector> = examples.iter().map(|e| extract_features(&e.tokens, lex)).collect();
    let vocab: Vec<String> = feats
        .iter()
        .flat_map(|f| f.ngrams.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let dim = vocab.len() + 3;
    let shell = SvmModel::new(config.lambda, vocab, LinearSvm { dim, weights: Default::default() })?;
    let samples: Vec<(Vec<(usize, f64)>, Emotion)> =
        feats.iter().zip(examples).map(|(f, e)| (shell.encode(f), e.label)).collect();
    let svm = LinearSvm::fit(&samples, dim, config)?;
    SvmModel::new(config.lambda, shell.vocab, svm)
}

/// Highest-scoring class; ties resolve in class order.
pub fn svm_predict(model: &SvmModel, features: &FeatureVector) -> Emotion {
    argmax_tolerant(&model.scores(features))
}
