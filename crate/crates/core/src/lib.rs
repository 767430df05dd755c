//! Emotion classification for short textual conversations.
//!
//! The centerpiece is [`neural::SsLstm`], which reads an utterance through
//! two LSTM encoders, one over semantic word vectors and one over
//! sentiment-trained word vectors, and classifies the concatenated encodings
//! as happy, sad, angry or others. Around it:
//!
//! - [`text_norm`]: tokenization and emoticon normalization
//! - [`embeddings`]: embedding tables, cosine similarity, sentence vectors
//! - [`training`]: loss, token-budget batching, SGD, early stopping, checkpoints
//! - [`metrics`]: confusion matrices, F1, McNemar's test, Fleiss' kappa
//! - [`baselines`]: n-gram Naive Bayes and linear SVM
//! - [`datamine`]: cosine-threshold and response-frequency candidate mining
//! - [`dataio`]: conversation and judgment TSV files
//!
//! The `book/` directory at the repository root walks through each piece;
//! its code listings are compiled and run as doc-tests of this crate.

pub mod baselines;
pub mod datamine;
pub mod dataio;
pub mod embeddings;
mod error;
mod label;
pub mod metrics;
pub mod neural;
pub mod text_norm;
pub mod training;

pub use error::{Error, Result};
pub use label::Emotion;

use text_norm::Token;

/// Anything that maps a normalized utterance to a class.
pub trait Classifier {
    fn classify(&self, tokens: &[Token]) -> Result<Emotion>;
}

impl Classifier for neural::SsLstm {
    fn classify(&self, tokens: &[Token]) -> Result<Emotion> {
        self.predict(tokens)
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/normalization.md")]
    mod normalization {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/mining.md")]
    mod mining {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
