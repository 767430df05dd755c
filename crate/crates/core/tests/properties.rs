//! Property tests over the public API.

mod common;

use std::collections::HashSet;

use common::{random_vec, table, word};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sslstm::baselines::LinearSvm;
use sslstm::dataio::{read_dataset, write_dataset, Conversation};
use sslstm::datamine::{mine_candidates, prune_heuristics, sample_negatives, Candidate, MiningConfig};
use sslstm::neural::{Activation, ModelConfig, SsLstm};
use sslstm::text_norm::{emoticon_class, normalize_utterance, serialize, EmoticonClass, EmoticonLexicon, Token, TokenKind};
use sslstm::Emotion;

fn utterance_text() -> impl Strategy<Value = String> {
    let pieces = prop::sample::select(vec![
        "Yeah", "NO", "don't", "so", "good", "!", "?!", "...", ",", ":)", ":-)", ":(((", ":'(", ">:(", ":DDD",
        ":P", ":|", "😒", "☹", "😂", "❤", "@bob", "http://x.io", "www.y.com", "soooo", "l8r", "#tag", "(", ")",
        "a.b", "'", "😀😀", "x:)", ":)x",
    ]);
    let sep = prop::sample::select(vec![" ", "  ", "", "\t", " "]);
    prop::collection::vec((pieces, sep), 0..12).prop_map(|v| v.into_iter().map(|(p, s)| format!("{p}{s}")).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalization_is_idempotent(raw in utterance_text()) {
        let lex = EmoticonLexicon::shipped();
        let once = normalize_utterance(&raw, lex);
        prop_assert_eq!(normalize_utterance(&serialize(&once), lex), once.clone());
        prop_assert_eq!(normalize_utterance(&raw, lex), once);
    }

    #[test]
    fn normalization_also_holds_on_arbitrary_text(raw in "\\PC{0,40}") {
        let lex = EmoticonLexicon::shipped();
        let once = normalize_utterance(&raw, lex);
        prop_assert_eq!(normalize_utterance(&serialize(&once), lex), once);
    }

    #[test]
    fn tokens_are_clean(raw in utterance_text()) {
        for t in normalize_utterance(&raw, EmoticonLexicon::shipped()) {
            prop_assert!(!t.surface().is_empty());
            prop_assert!(!t.surface().chars().any(char::is_whitespace));
            if t.kind() == TokenKind::Word {
                prop_assert_eq!(t.surface().to_lowercase(), t.surface());
            }
        }
    }

    #[test]
    fn datasets_round_trip(rows in prop::collection::vec(
        ("[a-z0-9]{1,6}", "[a-z]([a-z :()!']{0,10}[a-z])?", "[a-z]{1,5}", "[a-z]([a-z :()!']{0,10}[a-z!])?", prop::option::of(0usize..4)),
        1..8,
    )) {
        let convs: Vec<Conversation> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (id, a, b, c, l))| Conversation { id: format!("{id}-{i}"), turns: [a, b, c], label: l.and_then(Emotion::from_index) })
            .collect();
        let mut first = Vec::new();
        write_dataset(&convs, &mut first).unwrap();
        let back = read_dataset(first.as_slice()).unwrap();
        prop_assert_eq!(&back, &convs);
        let mut second = Vec::new();
        write_dataset(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn svm_argmax_ignores_a_common_offset(seed in any::<u64>(), offset in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 5;
        let weights: [Vec<f64>; 4] = std::array::from_fn(|_| random_vec(&mut rng, dim + 1));
        let shifted = weights.clone().map(|mut w| { w[dim] += offset; w });
        let (a, b) = (LinearSvm::from_weights(weights).unwrap(), LinearSvm::from_weights(shifted).unwrap());
        let x: Vec<(usize, f64)> = (0..dim).map(|i| (i, random_vec(&mut rng, 1)[0] * 3.0)).collect();
        prop_assert_eq!(a.predict(&x), b.predict(&x));
    }

    #[test]
    fn model_outputs_are_distributions(seed in any::<u64>(), len in 0usize..70, relu in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab: Vec<String> = (0..5).map(|i| format!("v{i}")).collect();
        let sem = table("sem", vocab.iter().map(|w| (w.clone(), random_vec(&mut rng, 3))).collect());
        let sent = table("sent", vocab.iter().map(|w| (w.clone(), random_vec(&mut rng, 2))).collect());
        let cfg = ModelConfig {
            semantic_hidden: 3,
            sentiment_hidden: 2,
            fc_hidden: 4,
            activation: if relu { Activation::Relu } else { Activation::Tanh },
            max_seq_len: 8,
            ..ModelConfig::default()
        };
        let model = SsLstm::init(cfg, Some(sem), Some(sent), seed).unwrap();
        let tokens: Vec<Token> = (0..len).map(|i| word(&vocab[(i * 7 + seed as usize) % 5])).collect();
        let p = model.probabilities(&tokens).unwrap();
        prop_assert!(p.iter().all(|&x| x > 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(p, model.probabilities(&tokens).unwrap());
        prop_assert_eq!(p, model.probabilities(&tokens[..len.min(8)]).unwrap());
    }
}

fn mining_world(seed: u64) -> (sslstm::embeddings::EmbeddingTable, Vec<Vec<Token>>, Vec<Vec<Token>>) {
    use rand::seq::SliceRandom;
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..8).map(|i| format!("m{i}")).collect();
    let rows: Vec<(String, Vec<f64>)> = vocab.iter().map(|w| (w.clone(), random_vec(&mut rng, 3))).collect();
    let t = sslstm::embeddings::EmbeddingTable::from_pairs("m", 3, &rows).unwrap();
    let mut utter = |n: usize| -> Vec<Vec<Token>> {
        (0..n)
            .map(|_| (0..rng.gen_range(1..=3)).map(|_| word(vocab.choose(&mut rng).unwrap())).collect())
            .collect()
    };
    let (seeds, mut pool) = (utter(4), utter(25));
    pool[3] = seeds[0].clone();
    (t, seeds, pool)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn candidates_are_thresholded_sorted_and_deterministic(seed in any::<u64>(), threshold in 0.05f64..=1.0) {
        let (t, seeds, pool) = mining_world(seed);
        let cfg = MiningConfig { threshold, ..MiningConfig::default() };
        let got = mine_candidates(&seeds, &pool, &t, &cfg).unwrap();
        prop_assert!(got.iter().any(|c| c.pool_index == 3 && c.score == 1.0));
        let mut seen = HashSet::new();
        for c in &got {
            prop_assert!(c.pool_index < pool.len() && seen.insert(c.pool_index));
            prop_assert_eq!(&c.tokens, &pool[c.pool_index]);
            prop_assert!(c.score >= threshold);
        }
        for w in got.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].pool_index < w[1].pool_index));
        }
        prop_assert_eq!(got, mine_candidates(&seeds, &pool, &t, &cfg).unwrap());
    }

    #[test]
    fn negatives_avoid_positives_and_repeat_with_the_seed(seed in any::<u64>(), draw in any::<u64>()) {
        let (t, positives, pool) = mining_world(seed);
        let cfg = MiningConfig::default();
        let eligible = sslstm::datamine::eligible_negatives(&pool, &positives, &t, &cfg).unwrap();
        let n = eligible.len() / 2;
        let got = sample_negatives(&pool, &positives, &t, &cfg, n, draw).unwrap();
        prop_assert_eq!(got.len(), n);
        prop_assert!(!got.contains(&3));
        for &i in &got {
            prop_assert!(!positives.contains(&pool[i]));
            prop_assert!(eligible.contains(&i));
        }
        prop_assert!(got.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(got, sample_negatives(&pool, &positives, &t, &cfg, n, draw).unwrap());
    }

    #[test]
    fn pruning_keeps_friendly_emoticons(picks in prop::collection::vec(0usize..6, 1..8), target in 0usize..3) {
        let lex = EmoticonLexicon::shipped();
        let target = Emotion::ALL[target];
        let want = [EmoticonClass::Happy, EmoticonClass::Sad, EmoticonClass::Angry][target.index()];
        let friendly: Vec<&str> = lex
            .entries()
            .iter()
            .filter(|e| e.class == want || e.class == EmoticonClass::Neutral)
            .map(|e| e.canonical.as_str())
            .collect();
        let tokens: Vec<Token> = picks
            .iter()
            .map(|&i| if i < 3 { Token::classify(friendly[i % friendly.len()], lex) } else { word(&format!("w{i}")) })
            .collect();
        prop_assert!(tokens.iter().all(|t| emoticon_class(t, lex).is_none_or(|k| k == want || k == EmoticonClass::Neutral)));
        let cand = Candidate { pool_index: 0, tokens, seed_index: 0, score: 0.9 };
        let pruned = prune_heuristics(vec![cand], target, lex, &MiningConfig::default()).unwrap();
        prop_assert_eq!(pruned.kept.len(), 1);
    }
}
