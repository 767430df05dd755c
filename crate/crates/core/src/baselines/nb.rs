use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use super::{argmax_tolerant, extract_features, FeatureVector};
use crate::dataio::Example;
use crate::error::{Error, Result};
use crate::label::Emotion;
use crate::text_norm::EmoticonLexicon;
use crate::training::CheckpointContainer;

/// Multinomial Naive Bayes over the n-gram block of [`FeatureVector`],
/// stored as raw counts so that log-probabilities are derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    alpha: f64,
    docs: [u64; 4],
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    /// Per n-gram, its count in each class.
    counts: Vec<[u64; 4]>,
    totals: [u64; 4],
}

pub fn nb_train(examples: &[Example], alpha: f64) -> Result<NbModel> {
    if examples.is_empty() {
        return Err(Error::Config("cannot train Naive Bayes on an empty dataset".into()));
    }
    let lex = EmoticonLexicon::shipped();
    let mut docs = [0u64; 4];
    let mut table: BTreeMap<String, [u64; 4]> = BTreeMap::new();
    for ex in examples {
        let c = ex.label.index();
        docs[c] += 1;
        for (g, n) in extract_features(&ex.tokens, lex).ngrams {
            table.entry(g).or_default()[c] += n as u64;
        }
    }
    let (vocab, counts): (Vec<String>, Vec<[u64; 4]>) = table.into_iter().unzip();
    NbModel::from_counts(alpha, docs, vocab, counts)
}

impl NbModel {
    /// Assembles a model from per-class document counts and per-n-gram
    /// class counts (parallel to `vocab`).
    pub fn from_counts(alpha: f64, docs: [u64; 4], vocab: Vec<String>, counts: Vec<[u64; 4]>) -> Result<NbModel> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("smoothing constant must be positive, got {alpha}")));
        }
        if docs.iter().sum::<u64>() == 0 {
            return Err(Error::Config("Naive Bayes needs at least one document".into()));
        }
        if vocab.len() != counts.len() {
            return Err(Error::ShapeMismatch("vocabulary and count table differ in length".into()));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, g) in vocab.iter().enumerate() {
            if index.insert(g.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate n-gram {g:?}")));
            }
        }
        let mut totals = [0u64; 4];
        for row in &counts {
            for c in 0..4 {
                totals[c] += row[c];
            }
        }
        Ok(NbModel {
            alpha,
            docs,
            vocab,
            index,
            counts,
            totals,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocab.len()
    }

    /// Empirical class frequencies.
    pub fn priors(&self) -> [f64; 4] {
        let n = self.docs.iter().sum::<u64>() as f64;
        self.docs.map(|d| d as f64 / n)
    }

    /// `log P(c) + Σ count·log P(g|c)` per class; n-grams outside the
    /// training vocabulary are ignored. Classes absent from training score −∞.
    pub fn log_scores(&self, features: &FeatureVector) -> [f64; 4] {
        let n = self.docs.iter().sum::<u64>() as f64;
        let v = self.vocab.len() as f64;
        std::array::from_fn(|c| {
            if self.docs[c] == 0 {
                return f64::NEG_INFINITY;
            }
            let denom = (self.totals[c] as f64 + self.alpha * v).ln();
            let mut s = (self.docs[c] as f64 / n).ln();
            for (g, &k) in &features.ngrams {
                if let Some(&i) = self.index.get(g) {
                    s += k as f64 * ((self.counts[i][c] as f64 + self.alpha).ln() - denom);
                }
            }
            s
        })
    }

    /// Normalized class posteriors.
    pub fn posteriors(&self, features: &FeatureVector) -> [f64; 4] {
        let s = self.log_scores(features);
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e = s.map(|x| (x - max).exp());
        let z: f64 = e.iter().sum();
        e.map(|x| x / z)
    }

    pub fn save(&self, sink: impl Write) -> Result<()> {
        let mut c = CheckpointContainer::default();
        c.push_meta("model", "nb");
        c.push_meta("alpha", format!("{:?}", self.alpha));
        c.vocab = self.vocab.clone();
        c.push_tensor("docs", 1, 4, &self.docs.map(|d| d as f64));
        let flat: Vec<f64> = self.counts.iter().flat_map(|r| r.map(|x| x as f64)).collect();
        c.push_tensor("counts", self.vocab.len(), 4, &flat);
        c.write(sink)
    }

    pub fn load(source: impl Read) -> Result<NbModel> {
        let c = CheckpointContainer::read(source)?;
        Self::from_container(c)
    }

    pub fn from_container(mut c: CheckpointContainer) -> Result<NbModel> {
        let kind = c.require("model")?;
        if kind != "nb" {
            return Err(Error::format("checkpoint", 0, format!("checkpoint holds a {kind} model, not nb")));
        }
        let alpha: f64 = c.parse_meta("alpha")?;
        let vocab = std::mem::take(&mut c.vocab);
        let to_count = |x: f64| -> Result<u64> {
            if x >= 0.0 && x.fract() == 0.0 && x < 9.0e15 {
                Ok(x as u64)
            } else {
                Err(Error::format("checkpoint", 0, format!("bad count {x}")))
            }
        };
        let d = c.take_tensor("docs", 1, 4)?;
        let docs = [to_count(d[0])?, to_count(d[1])?, to_count(d[2])?, to_count(d[3])?];
        let flat = c.take_tensor("counts", vocab.len(), 4)?;
        c.finish()?;
        let counts = flat
            .chunks(4)
            .map(|r| Ok([to_count(r[0])?, to_count(r[1])?, to_count(r[2])?, to_count(r[3])?]))
            .collect::<Result<Vec<_>>>()?;
        NbModel::from_counts(alpha, docs, vocab, counts)
    }
}

/// Highest-scoring class; ties resolve in class order.
pub fn nb_predict(model: &NbModel, features: &FeatureVector) -> Emotion {
    argmax_tolerant(&model.log_scores(features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_norm::{Token, TokenKind};

    fn ex(s: &str, label: Emotion) -> Example {
        Example::new(s.split_whitespace().map(|w| Token::new(w, TokenKind::Word)).collect(), label)
    }

    fn feats(s: &str) -> FeatureVector {
        extract_features(&ex(s, Emotion::Others).tokens, EmoticonLexicon::shipped())
    }

    #[test]
    fn good_favors_happy() {
        let m = nb_train(&[ex("good good", Emotion::Happy), ex("bad", Emotion::Sad)], 1.0).unwrap();
        assert_eq!(nb_predict(&m, &feats("good")), Emotion::Happy);
        assert_eq!(nb_predict(&m, &feats("bad")), Emotion::Sad);
        // vocabulary {good, bad, good good}; P(good|happy) = 3/6, P(good|sad) = 1/4
        let s = m.log_scores(&feats("good"));
        assert!((s[0] - (0.5f64.ln() + 0.5f64.ln())).abs() < 1e-12);
        assert!((s[1] - (0.5f64.ln() + 0.25f64.ln())).abs() < 1e-12);
        assert_eq!(s[2], f64::NEG_INFINITY);
    }

    #[test]
    fn single_class_and_ties() {
        let m = nb_train(&[ex("a b", Emotion::Angry), ex("c", Emotion::Angry)], 1.0).unwrap();
        for s in ["a", "zzz", "b c a"] {
            assert_eq!(nb_predict(&m, &feats(s)), Emotion::Angry);
        }
        let m = nb_train(&[ex("x", Emotion::Happy), ex("x", Emotion::Sad)], 1.0).unwrap();
        assert_eq!(nb_predict(&m, &feats("x")), Emotion::Happy);
        assert_eq!(nb_predict(&m, &feats("unseen words")), Emotion::Happy);
        let m = nb_train(&[ex("x", Emotion::Happy), ex("y", Emotion::Sad), ex("z", Emotion::Sad)], 1.0).unwrap();
        assert_eq!(nb_predict(&m, &FeatureVector::default()), Emotion::Sad);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(nb_train(&[], 1.0).is_err());
        assert!(nb_train(&[ex("a", Emotion::Sad)], 0.0).is_err());
    }

    #[test]
    fn duplicating_the_corpus_keeps_predictions() {
        let corpus = [
            ex("so happy today", Emotion::Happy),
            ex("so sad", Emotion::Sad),
            ex("why you do this", Emotion::Angry),
            ex("ok then", Emotion::Others),
            ex("happy happy", Emotion::Happy),
        ];
        let doubled: Vec<Example> = corpus.iter().chain(corpus.iter()).cloned().collect();
        // smoothing mass scales with the corpus, otherwise posteriors shift
        let (a, b) = (nb_train(&corpus, 1.0).unwrap(), nb_train(&doubled, 2.0).unwrap());
        for q in ["so", "happy sad", "why", "then ok", "do this so", "nothing"] {
            assert_eq!(nb_predict(&a, &feats(q)), nb_predict(&b, &feats(q)), "{q}");
            let (x, y) = (a.log_scores(&feats(q)), b.log_scores(&feats(q)));
            for c in 0..4 {
                assert!(x[c] == y[c] || (x[c] - y[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let m = nb_train(&[ex("a b c", Emotion::Happy), ex("b c", Emotion::Others)], 0.5).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        assert_eq!(NbModel::load(buf.as_slice()).unwrap(), m);
    }
}
