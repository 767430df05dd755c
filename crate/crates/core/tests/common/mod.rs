#![allow(dead_code)]

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sslstm::dataio::Example;
use sslstm::embeddings::EmbeddingTable;
use sslstm::text_norm::{Token, TokenKind};
use sslstm::Emotion;

pub fn word(s: &str) -> Token {
    Token::new(s, TokenKind::Word)
}

pub fn words(s: &str) -> Vec<Token> {
    s.split_whitespace().map(word).collect()
}

pub fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn table(name: &str, rows: Vec<(String, Vec<f64>)>) -> Arc<EmbeddingTable> {
    let dim = rows[0].1.len();
    Arc::new(EmbeddingTable::from_pairs(name, dim, &rows).expect("valid table"))
}

/// Separable 4-class data: each utterance holds its class keyword among
/// one to three filler words. Both tables give keywords distinct vectors.
pub fn keyword_task(n: usize, dim: usize, seed: u64) -> (Arc<EmbeddingTable>, Arc<EmbeddingTable>, Vec<Example>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keywords = ["kw_happy", "kw_sad", "kw_angry", "kw_others"];
    let fillers: Vec<String> = (0..8).map(|i| format!("filler{i}")).collect();
    let vocab: Vec<String> = keywords.iter().map(|s| s.to_string()).chain(fillers.iter().cloned()).collect();
    let mut mk = |name: &str| table(name, vocab.iter().map(|w| (w.clone(), random_vec(&mut rng, dim))).collect());
    let (sem, sent) = (mk("semantic"), mk("sentiment"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let examples = (0..n)
        .map(|i| {
            let class = Emotion::ALL[i % 4];
            let mut toks: Vec<Token> = (0..rng.gen_range(1..=3)).map(|_| word(fillers.choose(&mut rng).unwrap())).collect();
            let at = rng.gen_range(0..=toks.len());
            toks.insert(at, word(keywords[class.index()]));
            Example::new(toks, class)
        })
        .collect();
    (sem, sent, examples)
}

/// Label `2a + b` where bit `a` is carried by topic words visible only in the
/// semantic table and bit `b` by polarity words visible only in the
/// sentiment table. Polarity words share one semantic vector and topic words
/// share one sentiment vector, so either table alone carries one bit.
pub struct XorTask {
    pub semantic: Arc<EmbeddingTable>,
    pub sentiment: Arc<EmbeddingTable>,
    pub topic: [Vec<String>; 2],
    pub polarity: [Vec<String>; 2],
    pub fillers: Vec<String>,
}

impl XorTask {
    pub fn new(dim: usize, seed: u64) -> XorTask {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = |p: &str| (0..4).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let topic = [names("topic_a_"), names("topic_b_")];
        let polarity = [names("pol_neg_"), names("pol_pos_")];
        let fillers = names("filler_");
        let centers = |rng: &mut ChaCha8Rng| [random_vec(rng, dim), random_vec(rng, dim)];
        let jitter = |rng: &mut ChaCha8Rng, c: &[f64]| c.iter().map(|x| x + rng.gen_range(-0.15..0.15)).collect::<Vec<_>>();

        let (tc, shared_pol) = (centers(&mut rng), random_vec(&mut rng, dim));
        let mut sem = Vec::new();
        for (bit, ws) in topic.iter().enumerate() {
            for w in ws {
                sem.push((w.clone(), jitter(&mut rng, &tc[bit])));
            }
        }
        for w in polarity.iter().flatten() {
            sem.push((w.clone(), shared_pol.clone()));
        }

        let (pc, shared_topic) = (centers(&mut rng), random_vec(&mut rng, dim));
        let mut sent = Vec::new();
        for w in topic.iter().flatten() {
            sent.push((w.clone(), shared_topic.clone()));
        }
        for (bit, ws) in polarity.iter().enumerate() {
            for w in ws {
                sent.push((w.clone(), jitter(&mut rng, &pc[bit])));
            }
        }
        for w in &fillers {
            sem.push((w.clone(), random_vec(&mut rng, dim)));
            sent.push((w.clone(), random_vec(&mut rng, dim)));
        }
        XorTask {
            semantic: table("semantic", sem),
            sentiment: table("sentiment", sent),
            topic,
            polarity,
            fillers,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<Example> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let (a, b) = (rng.gen_range(0..2), rng.gen_range(0..2));
                let mut toks = vec![
                    word(self.topic[a].choose(&mut rng).unwrap()),
                    word(self.polarity[b].choose(&mut rng).unwrap()),
                ];
                if rng.gen_bool(0.5) {
                    toks.push(word(self.fillers.choose(&mut rng).unwrap()));
                }
                toks.shuffle(&mut rng);
                Example::new(toks, Emotion::ALL[2 * a + b])
            })
            .collect()
    }
}
