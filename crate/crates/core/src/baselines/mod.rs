//! Classical baselines over n-gram features: multinomial Naive Bayes and a
//! one-vs-rest linear SVM.

mod nb;
mod svm;

use std::collections::BTreeMap;

pub use nb::{nb_predict, nb_train, NbModel};
pub use svm::{svm_predict, svm_train, LinearSvm, SvmConfig, SvmModel};

use crate::error::Result;
use crate::label::Emotion;
use crate::text_norm::{emoticon_class, EmoticonClass, EmoticonLexicon, Token};
use crate::Classifier;

/// Longest n-gram extracted.
pub const MAX_NGRAM: usize = 3;

/// Sparse n-gram counts plus happy/sad/angry emoticon counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureVector {
    /// Keys are token surfaces joined by single spaces.
    pub ngrams: BTreeMap<String, u32>,
    pub emoticons: [u32; 3],
}

pub fn extract_features(tokens: &[Token], lex: &EmoticonLexicon) -> FeatureVector {
    let mut f = FeatureVector::default();
    for n in 1..=MAX_NGRAM {
        for w in tokens.windows(n) {
            let key = w.iter().map(Token::surface).collect::<Vec<_>>().join(" ");
            *f.ngrams.entry(key).or_insert(0) += 1;
        }
    }
    for t in tokens {
        match emoticon_class(t, lex) {
            Some(EmoticonClass::Happy) => f.emoticons[0] += 1,
            Some(EmoticonClass::Sad) => f.emoticons[1] += 1,
            Some(EmoticonClass::Angry) => f.emoticons[2] += 1,
            Some(EmoticonClass::Neutral) | None => {}
        }
    }
    f
}

/// A model that predicts from a [`FeatureVector`].
pub trait FeatureModel {
    fn predict_features(&self, features: &FeatureVector) -> Emotion;
}

impl FeatureModel for NbModel {
    fn predict_features(&self, features: &FeatureVector) -> Emotion {
        nb_predict(self, features)
    }
}

impl FeatureModel for SvmModel {
    fn predict_features(&self, features: &FeatureVector) -> Emotion {
        svm_predict(self, features)
    }
}

/// Pairs a feature model with the lexicon used for feature extraction,
/// giving a [`Classifier`] over tokens.
#[derive(Debug, Clone, Copy)]
pub struct Featurized<'a, M> {
    pub model: &'a M,
    pub lexicon: &'a EmoticonLexicon,
}

impl<M: FeatureModel> Classifier for Featurized<'_, M> {
    fn classify(&self, tokens: &[Token]) -> Result<Emotion> {
        Ok(self.model.predict_features(&extract_features(tokens, self.lexicon)))
    }
}

/// Argmax in class order, treating scores within a relative `1e-10` of the
/// running best as ties.
pub(crate) fn argmax_tolerant(scores: &[f64; 4]) -> Emotion {
    let mut best = 0;
    for k in 1..4 {
        let tol = if scores[best].is_finite() { 1e-10 * scores[best].abs().max(1.0) } else { 0.0 };
        if scores[k] > scores[best] + tol {
            best = k;
        }
    }
    Emotion::ALL[best]
}
