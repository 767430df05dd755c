use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lstm::{lstm_backward, lstm_forward, LstmCache, LstmParams};
use super::matrix::Matrix;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::label::{argmax, Emotion};
use crate::text_norm::Token;

/// Which embedding channels feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Channels {
    #[default]
    Both,
    Semantic,
    Sentiment,
}

impl Channels {
    pub fn semantic(self) -> bool {
        matches!(self, Channels::Both | Channels::Semantic)
    }

    pub fn sentiment(self) -> bool {
        matches!(self, Channels::Both | Channels::Sentiment)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channels::Both => "both",
            Channels::Semantic => "semantic",
            Channels::Sentiment => "sentiment",
        }
    }
}

impl fmt::Display for Channels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channels {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Channels::Both),
            "semantic" => Ok(Channels::Semantic),
            "sentiment" => Ok(Channels::Sentiment),
            other => Err(Error::Config(format!("unknown channel selection {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub channels: Channels,
    pub semantic_hidden: usize,
    pub sentiment_hidden: usize,
    pub fc_hidden: usize,
    pub activation: Activation,
    /// Tokens past this length are dropped before encoding.
    pub max_seq_len: usize,
    pub fine_tune_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: Channels::Both,
            semantic_hidden: 128,
            sentiment_hidden: 128,
            fc_hidden: 128,
            activation: Activation::Relu,
            max_seq_len: 50,
            fine_tune_embeddings: false,
        }
    }
}

impl ModelConfig {
    /// Width of the concatenated channel features.
    pub fn feature_width(&self) -> usize {
        let mut w = 0;
        if self.channels.semantic() {
            w += self.semantic_hidden;
        }
        if self.channels.sentiment() {
            w += self.sentiment_hidden;
        }
        w
    }

    fn validate(&self) -> Result<()> {
        if self.fc_hidden == 0 || self.max_seq_len == 0 {
            return Err(Error::Config("fc width and max sequence length must be positive".into()));
        }
        if (self.channels.semantic() && self.semantic_hidden == 0)
            || (self.channels.sentiment() && self.sentiment_hidden == 0)
        {
            return Err(Error::Config("hidden dimensions of active channels must be positive".into()));
        }
        Ok(())
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Dense {
        Dense {
            w: Matrix::zeros(out_dim, in_dim),
            b: vec![0.0; out_dim],
        }
    }

    fn glorot(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Dense {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Dense {
            w: Matrix::from_fn(out_dim, in_dim, |_, _| rng.gen_range(-limit..=limit)),
            b: vec![0.0; out_dim],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.clone();
        self.w.mul_vec_add(x, &mut y);
        y
    }
}

/// One encoder channel: an embedding table and the LSTM reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub table: Arc<EmbeddingTable>,
    pub lstm: LstmParams,
}

/// Two LSTM encoders (semantic, sentiment) whose final hidden states are
/// concatenated and classified by a one-hidden-layer network into the four
/// [`Emotion`] classes.
///
/// A channel that is present but not selected by `config.channels` is carried
/// along untouched and has no influence on outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SsLstm {
    pub config: ModelConfig,
    pub semantic: Option<Channel>,
    pub sentiment: Option<Channel>,
    pub fc: Dense,
    /// Four rows in [`Emotion`] order.
    pub out: Dense,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Surfaces of the (truncated) tokens actually encoded.
    pub tokens: Vec<String>,
    pub semantic: Option<LstmCache>,
    pub sentiment: Option<LstmCache>,
    pub features: Vec<f64>,
    pub fc_pre: Vec<f64>,
    pub fc_act: Vec<f64>,
    pub logits: [f64; 4],
    pub probs: [f64; 4],
}

/// Gradient bundle shaped like the trainable parameters of an [`SsLstm`].
///
/// Embedding maps are populated only when fine-tuning is enabled and hold
/// entries for in-vocabulary tokens seen by the pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub semantic: Option<LstmParams>,
    pub sentiment: Option<LstmParams>,
    pub fc: Dense,
    pub out: Dense,
    pub semantic_embeddings: BTreeMap<String, Vec<f64>>,
    pub sentiment_embeddings: BTreeMap<String, Vec<f64>>,
}

fn softmax(logits: &[f64; 4]) -> [f64; 4] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: [f64; 4] = std::array::from_fn(|k| (logits[k] - max).exp());
    let sum: f64 = e.iter().sum();
    std::array::from_fn(|k| e[k] / sum)
}

/// `logsumexp(logits) - logits[target]`, the cross-entropy of the softmax.
pub fn loss_from_logits(logits: &[f64; 4], target: Emotion) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[target.index()]
}

impl SsLstm {
    /// Random initialization, deterministic in `seed`.
    ///
    /// Active channels need their table. A table supplied for an inactive
    /// channel still gets (unused) LSTM weights.
    pub fn init(
        config: ModelConfig,
        semantic: Option<Arc<EmbeddingTable>>,
        sentiment: Option<Arc<EmbeddingTable>>,
        seed: u64,
    ) -> Result<SsLstm> {
        config.validate()?;
        if config.channels.semantic() && semantic.is_none() {
            return Err(Error::Config("semantic channel selected but no semantic embeddings given".into()));
        }
        if config.channels.sentiment() && sentiment.is_none() {
            return Err(Error::Config("sentiment channel selected but no sentiment embeddings given".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channel = |table: Option<Arc<EmbeddingTable>>, hidden: usize, rng: &mut ChaCha8Rng| {
            table.map(|t| Channel {
                lstm: LstmParams::glorot(t.dim(), hidden.max(1), rng),
                table: t,
            })
        };
        let semantic = channel(semantic, config.semantic_hidden, &mut rng);
        let sentiment = channel(sentiment, config.sentiment_hidden, &mut rng);
        let fc = Dense::glorot(config.fc_hidden, config.feature_width(), &mut rng);
        let out = Dense::glorot(Emotion::COUNT, config.fc_hidden, &mut rng);
        Ok(SsLstm {
            config,
            semantic,
            sentiment,
            fc,
            out,
        })
    }

    /// Active channels in concatenation order (semantic first).
    fn active(&self) -> [Option<&Channel>; 2] {
        [
            self.semantic.as_ref().filter(|_| self.config.channels.semantic()),
            self.sentiment.as_ref().filter(|_| self.config.channels.sentiment()),
        ]
    }

    /// Structural consistency of the parameter bundle.
    pub fn check(&self) -> Result<()> {
        self.config.validate()?;
        let mut width = 0;
        for (ch, hidden, name) in [
            (&self.semantic, self.config.semantic_hidden, "semantic"),
            (&self.sentiment, self.config.sentiment_hidden, "sentiment"),
        ] {
            let selected = if name == "semantic" { self.config.channels.semantic() } else { self.config.channels.sentiment() };
            match ch {
                Some(c) => {
                    if c.lstm.input_dim != c.table.dim() || (selected && c.lstm.hidden_dim != hidden) {
                        return Err(Error::ShapeMismatch(format!("{name} channel dimensions disagree with config")));
                    }
                    if selected {
                        width += hidden;
                    }
                }
                None if selected => return Err(Error::ShapeMismatch(format!("{name} channel missing"))),
                None => {}
            }
        }
        if self.fc.w.shape() != (self.config.fc_hidden, width) || self.fc.b.len() != self.config.fc_hidden {
            return Err(Error::ShapeMismatch("fc layer shape".into()));
        }
        if self.out.w.shape() != (Emotion::COUNT, self.config.fc_hidden) || self.out.b.len() != Emotion::COUNT {
            return Err(Error::ShapeMismatch("output layer shape".into()));
        }
        Ok(())
    }

    /// Class probabilities in [`Emotion`] order plus the cache for
    /// [`SsLstm::backward`].
    pub fn forward(&self, tokens: &[Token]) -> Result<([f64; 4], ForwardCache)> {
        let tokens = &tokens[..tokens.len().min(self.config.max_seq_len)];
        let mut features = Vec::with_capacity(self.config.feature_width());
        let mut caches: [Option<LstmCache>; 2] = [None, None];
        for (slot, ch) in self.active().into_iter().enumerate() {
            let Some(ch) = ch else { continue };
            let inputs: Vec<Vec<f64>> = tokens.iter().map(|t| ch.table.lookup(t)).collect();
            let (cache, h) = lstm_forward(&ch.lstm, &inputs)?;
            features.extend_from_slice(&h);
            caches[slot] = Some(cache);
        }
        let fc_pre = self.fc.forward(&features);
        let act = self.config.activation;
        let fc_act: Vec<f64> = fc_pre.iter().map(|&x| act.apply(x)).collect();
        let out = self.out.forward(&fc_act);
        let logits: [f64; 4] = [out[0], out[1], out[2], out[3]];
        let probs = softmax(&logits);
        let [semantic, sentiment] = caches;
        Ok((
            probs,
            ForwardCache {
                tokens: tokens.iter().map(|t| t.surface().to_string()).collect(),
                semantic,
                sentiment,
                features,
                fc_pre,
                fc_act,
                logits,
                probs,
            },
        ))
    }

    pub fn probabilities(&self, tokens: &[Token]) -> Result<[f64; 4]> {
        self.forward(tokens).map(|(p, _)| p)
    }

    /// Most probable class; ties resolve in [`Emotion`] order.
    pub fn predict(&self, tokens: &[Token]) -> Result<Emotion> {
        let p = self.probabilities(tokens)?;
        Ok(Emotion::ALL[argmax(&p)])
    }

    /// Exact gradients of the cross-entropy loss for `target`, by
    /// backpropagation through the classifier head and both recurrences.
    pub fn backward(&self, cache: &ForwardCache, target: Emotion) -> Result<Gradients> {
        let stale = || Error::ShapeMismatch("forward cache does not match this model".into());
        if cache.features.len() != self.config.feature_width()
            || cache.fc_pre.len() != self.config.fc_hidden
        {
            return Err(stale());
        }
        let mut grads = Gradients::zeros_like(self);

        let mut d_logits = cache.probs;
        d_logits[target.index()] -= 1.0;
        grads.out.w.add_outer(&d_logits, &cache.fc_act);
        grads.out.b.copy_from_slice(&d_logits);

        let mut d_act = vec![0.0; self.config.fc_hidden];
        self.out.w.mul_t_vec_add(&d_logits, &mut d_act);
        let act = self.config.activation;
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(cache.fc_pre.iter().zip(&cache.fc_act))
            .map(|(d, (&x, &y))| d * act.derivative(x, y))
            .collect();
        grads.fc.w.add_outer(&d_pre, &cache.features);
        grads.fc.b.copy_from_slice(&d_pre);

        let mut d_features = vec![0.0; cache.features.len()];
        self.fc.w.mul_t_vec_add(&d_pre, &mut d_features);

        let mut offset = 0;
        let [sem, sent] = self.active();
        for (ch, ch_cache, slot) in [(sem, &cache.semantic, 0), (sent, &cache.sentiment, 1)] {
            let Some(ch) = ch else { continue };
            let ch_cache = ch_cache.as_ref().ok_or_else(stale)?;
            if ch_cache.len() != cache.tokens.len() {
                return Err(stale());
            }
            let hd = ch.lstm.hidden_dim;
            let (g, dx) = lstm_backward(&ch.lstm, ch_cache, &d_features[offset..offset + hd])?;
            offset += hd;
            if self.config.fine_tune_embeddings {
                let emb = if slot == 0 { &mut grads.semantic_embeddings } else { &mut grads.sentiment_embeddings };
                for (tok, d) in cache.tokens.iter().zip(dx) {
                    if !ch.table.contains(tok) {
                        continue;
                    }
                    let acc = emb.entry(tok.clone()).or_insert_with(|| vec![0.0; d.len()]);
                    for (a, v) in acc.iter_mut().zip(&d) {
                        *a += v;
                    }
                }
            }
            if slot == 0 {
                grads.semantic = Some(g);
            } else {
                grads.sentiment = Some(g);
            }
        }
        Ok(grads)
    }

    /// Names, shapes and values of every trainable dense tensor, in a fixed
    /// order: semantic LSTM, sentiment LSTM (active channels only), fc, out.
    pub fn tensors(&self) -> Vec<(String, usize, usize, &[f64])> {
        collect_tensors(
            self.active()[0].map(|c| &c.lstm),
            self.active()[1].map(|c| &c.lstm),
            &self.fc,
            &self.out,
        )
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let (sem_on, sent_on) = (self.config.channels.semantic(), self.config.channels.sentiment());
        let mut out = Vec::new();
        if let Some(c) = self.semantic.as_mut().filter(|_| sem_on) {
            out.extend(c.lstm.tensors_mut());
        }
        if let Some(c) = self.sentiment.as_mut().filter(|_| sent_on) {
            out.extend(c.lstm.tensors_mut());
        }
        out.push(self.fc.w.as_mut_slice());
        out.push(&mut self.fc.b);
        out.push(self.out.w.as_mut_slice());
        out.push(&mut self.out.b);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.3.len()).sum()
    }
}

fn collect_tensors<'a>(
    semantic: Option<&'a LstmParams>,
    sentiment: Option<&'a LstmParams>,
    fc: &'a Dense,
    out: &'a Dense,
) -> Vec<(String, usize, usize, &'a [f64])> {
    let mut v = Vec::new();
    for (prefix, p) in [("semantic", semantic), ("sentiment", sentiment)] {
        if let Some(p) = p {
            v.extend(p.tensors().into_iter().map(|(n, r, c, d)| (format!("{prefix}.{n}"), r, c, d)));
        }
    }
    v.push(("fc.w".into(), fc.w.rows(), fc.w.cols(), fc.w.as_slice()));
    v.push(("fc.b".into(), 1, fc.b.len(), &fc.b[..]));
    v.push(("out.w".into(), out.w.rows(), out.w.cols(), out.w.as_slice()));
    v.push(("out.b".into(), 1, out.b.len(), &out.b[..]));
    v
}

impl Gradients {
    /// All-zero gradients for the active parameters of `model`.
    pub fn zeros_like(model: &SsLstm) -> Gradients {
        let [sem, sent] = model.active();
        Gradients {
            semantic: sem.map(|c| LstmParams::zeros(c.lstm.input_dim, c.lstm.hidden_dim)),
            sentiment: sent.map(|c| LstmParams::zeros(c.lstm.input_dim, c.lstm.hidden_dim)),
            fc: Dense::zeros(model.fc.w.rows(), model.fc.w.cols()),
            out: Dense::zeros(model.out.w.rows(), model.out.w.cols()),
            semantic_embeddings: BTreeMap::new(),
            sentiment_embeddings: BTreeMap::new(),
        }
    }

    /// Same names and order as [`SsLstm::tensors`].
    pub fn tensors(&self) -> Vec<(String, usize, usize, &[f64])> {
        collect_tensors(self.semantic.as_ref(), self.sentiment.as_ref(), &self.fc, &self.out)
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        if let Some(p) = self.semantic.as_mut() {
            out.extend(p.tensors_mut());
        }
        if let Some(p) = self.sentiment.as_mut() {
            out.extend(p.tensors_mut());
        }
        out.push(self.fc.w.as_mut_slice());
        out.push(&mut self.fc.b);
        out.push(self.out.w.as_mut_slice());
        out.push(&mut self.out.b);
        out
    }

    /// `self += scale · other`. Shapes must agree.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) -> Result<()> {
        let shapes = |g: &Gradients| g.tensors().iter().map(|t| (t.0.clone(), t.1, t.2)).collect::<Vec<_>>();
        if shapes(self) != shapes(other) {
            return Err(Error::ShapeMismatch("gradient bundles differ in shape".into()));
        }
        let theirs: Vec<Vec<f64>> = other.tensors().into_iter().map(|t| t.3.to_vec()).collect();
        for (mine, theirs) in self.tensors_mut().into_iter().zip(&theirs) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += scale * b;
            }
        }
        for (mine, theirs) in [
            (&mut self.semantic_embeddings, &other.semantic_embeddings),
            (&mut self.sentiment_embeddings, &other.sentiment_embeddings),
        ] {
            for (tok, g) in theirs {
                let acc = mine.entry(tok.clone()).or_insert_with(|| vec![0.0; g.len()]);
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += scale * b;
                }
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.3.iter().all(|x| x.is_finite()))
            && self
                .semantic_embeddings
                .values()
                .chain(self.sentiment_embeddings.values())
                .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn has_embedding_entries(&self) -> bool {
        !self.semantic_embeddings.is_empty() || !self.sentiment_embeddings.is_empty()
    }
}
