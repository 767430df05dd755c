//! Candidate mining for growing a labeled set.
//!
//! - [`mine_candidates`]: pool utterances whose sentence embedding is close to
//!   some labeled seed.
//! - [`prune_heuristics`]: drops candidates with conflicting emoticons or
//!   excessive length, recording why.
//! - [`mine_by_response`]: harvests questions that drew the same frequent
//!   responses as known class members.
//! - [`sample_negatives`]: draws pool items far from every positive.
//!
//! Surviving candidates are meant for human review; [`write_judge_queue`]
//! writes them as TSV.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embeddings::{cosine, EmbeddingTable};
use crate::error::{Error, Result};
use crate::label::Emotion;
use crate::text_norm::{emoticon_class, normalize_utterance, serialize, EmoticonClass, EmoticonLexicon, Token};

#[derive(Debug, Clone, PartialEq)]
pub struct MiningConfig {
    /// Minimum cosine for a pool item to count as a candidate.
    pub threshold: f64,
    pub max_len: usize,
    /// Responses kept by [`mine_by_response`].
    pub top_k: usize,
    pub min_frequency: usize,
    /// Pool items at or above this cosine to any positive are not negatives.
    pub negative_threshold: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            threshold: 0.8,
            max_len: 30,
            top_k: 100,
            min_frequency: 2,
            negative_threshold: 0.8,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!("cosine threshold {} is outside (0, 1]", self.threshold)));
        }
        if !(self.negative_threshold > -1.0 && self.negative_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "negative threshold {} is outside (-1, 1]",
                self.negative_threshold
            )));
        }
        Ok(())
    }
}

/// A question and the response it received, both normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct QaPair {
    pub q: Vec<Token>,
    pub a: Vec<Token>,
}

impl QaPair {
    /// `None` when either side normalizes to nothing.
    pub fn new(q: &str, a: &str, lex: &EmoticonLexicon) -> Option<QaPair> {
        let (q, a) = (normalize_utterance(q, lex), normalize_utterance(a, lex));
        (!q.is_empty() && !a.is_empty()).then_some(QaPair { q, a })
    }
}

/// Reads `question<TAB>response` lines, skipping `#` comments and pairs
/// that normalize to nothing.
pub fn read_pairs(source: impl Read, lex: &EmoticonLexicon) -> Result<Vec<QaPair>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (q, a) = line
            .split_once('\t')
            .filter(|(_, a)| !a.contains('\t'))
            .ok_or_else(|| Error::format("pairs", n + 1, "expected question<TAB>response"))?;
        out.extend(QaPair::new(q, a, lex));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub pool_index: usize,
    pub tokens: Vec<Token>,
    /// Index of the best-scoring seed; the earliest on ties.
    pub seed_index: usize,
    pub score: f64,
}

/// Cosine between two utterances' mean-pooled embeddings; token-identical
/// utterances score exactly 1.
pub fn utterance_similarity(a: &[Token], b: &[Token], table: &EmbeddingTable) -> Result<f64> {
    if a == b {
        return Ok(1.0);
    }
    cosine(&table.sentence_embedding(a), &table.sentence_embedding(b))
}

fn best_match(item: &[Token], item_vec: &[f64], refs: &[(&[Token], Vec<f64>)]) -> Result<(usize, f64)> {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, (toks, v)) in refs.iter().enumerate() {
        let s = if *toks == item { 1.0 } else { cosine(item_vec, v)? };
        if s > best.1 {
            best = (j, s);
        }
    }
    Ok(best)
}

/// Pool items whose best cosine against the seeds reaches the threshold,
/// by score descending, ties in pool order.
pub fn mine_candidates(
    seeds: &[Vec<Token>],
    pool: &[Vec<Token>],
    table: &EmbeddingTable,
    cfg: &MiningConfig,
) -> Result<Vec<Candidate>> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("candidate mining needs at least one seed".into()));
    }
    let refs: Vec<(&[Token], Vec<f64>)> = seeds.iter().map(|s| (&s[..], table.sentence_embedding(s))).collect();
    let scored: Vec<Result<(usize, f64)>> = pool
        .par_iter()
        .map(|p| best_match(p, &table.sentence_embedding(p), &refs))
        .collect();
    let mut out = Vec::new();
    for (i, r) in scored.into_iter().enumerate() {
        let (seed_index, score) = r?;
        if score >= cfg.threshold {
            out.push(Candidate {
                pool_index: i,
                tokens: pool[i].clone(),
                seed_index,
                score,
            });
        }
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.pool_index.cmp(&b.pool_index)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Removal {
    /// The candidate holds an emoticon of another emotion class.
    OppositeEmoticon(String),
    /// Token count above the configured maximum.
    Length(usize),
}

impl Removal {
    pub fn kind(&self) -> &'static str {
        match self {
            Removal::OppositeEmoticon(_) => "opposite-emoticon",
            Removal::Length(_) => "length",
        }
    }
}

impl fmt::Display for Removal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Removal::OppositeEmoticon(e) => write!(f, "opposite-emoticon {e}"),
            Removal::Length(n) => write!(f, "length {n}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pruned {
    pub kept: Vec<Candidate>,
    pub removed: Vec<(Candidate, Removal)>,
}

fn class_of(target: Emotion) -> Result<EmoticonClass> {
    match target {
        Emotion::Happy => Ok(EmoticonClass::Happy),
        Emotion::Sad => Ok(EmoticonClass::Sad),
        Emotion::Angry => Ok(EmoticonClass::Angry),
        Emotion::Others => Err(Error::Config("pruning targets happy, sad or angry".into())),
    }
}

/// Removes candidates for `target` that contain an emoticon of a different
/// emotion class (neutral emoticons are fine) or exceed `cfg.max_len` tokens.
/// The emoticon rule is checked first.
pub fn prune_heuristics(
    candidates: Vec<Candidate>,
    target: Emotion,
    lex: &EmoticonLexicon,
    cfg: &MiningConfig,
) -> Result<Pruned> {
    let want = class_of(target)?;
    let mut out = Pruned::default();
    for c in candidates {
        let opposite = c.tokens.iter().find(|t| {
            matches!(emoticon_class(t, lex), Some(k) if k != EmoticonClass::Neutral && k != want)
        });
        if let Some(t) = opposite {
            let reason = Removal::OppositeEmoticon(t.surface().to_string());
            out.removed.push((c, reason));
        } else if c.tokens.len() > cfg.max_len {
            let n = c.tokens.len();
            out.removed.push((c, Removal::Length(n)));
        } else {
            out.kept.push(c);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCandidate {
    /// First pair carrying this question.
    pub pair_index: usize,
    pub q: Vec<Token>,
    pub response: String,
    /// How often `response` answered a known class member.
    pub frequency: usize,
}

/// Responses to known class members are counted (by normalized text); the
/// `top_k` most frequent with at least `min_frequency` occurrences are
/// kept, and every other question that drew one of them is returned.
///
/// Output follows response rank (frequency descending, then first
/// appearance), then pair order; each question appears once.
pub fn mine_by_response(
    pairs: &[QaPair],
    class_utterances: &HashSet<String>,
    cfg: &MiningConfig,
) -> Vec<ResponseCandidate> {
    let mut freq: HashMap<String, (usize, usize)> = HashMap::new();
    for (i, p) in pairs.iter().enumerate() {
        if class_utterances.contains(&serialize(&p.q)) {
            freq.entry(serialize(&p.a)).or_insert((0, i)).0 += 1;
        }
    }
    let mut ranked: Vec<(String, usize, usize)> = freq
        .into_iter()
        .filter(|(_, (n, _))| *n >= cfg.min_frequency.max(1))
        .map(|(a, (n, first))| (a, n, first))
        .collect();
    ranked.sort_by(|x, y| y.1.cmp(&x.1).then(x.2.cmp(&y.2)));
    ranked.truncate(cfg.top_k);

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (response, frequency, _) in &ranked {
        for (i, p) in pairs.iter().enumerate() {
            let q = serialize(&p.q);
            if class_utterances.contains(&q) || seen.contains(&q) || serialize(&p.a) != *response {
                continue;
            }
            seen.insert(q);
            out.push(ResponseCandidate {
                pair_index: i,
                q: p.q.clone(),
                response: response.clone(),
                frequency: *frequency,
            });
        }
    }
    out
}

/// Pool indices (ascending) of `n` items drawn uniformly without
/// replacement from those whose cosine to every positive stays below
/// `cfg.negative_threshold`. Items identical to a positive are never eligible.
pub fn sample_negatives(
    pool: &[Vec<Token>],
    positives: &[Vec<Token>],
    table: &EmbeddingTable,
    cfg: &MiningConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    let eligible = eligible_negatives(pool, positives, table, cfg)?;
    if eligible.len() < n {
        return Err(Error::Insufficient(format!(
            "requested {n} negatives but only {} of {} pool items are eligible (short by {})",
            eligible.len(),
            pool.len(),
            n - eligible.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, eligible.len(), n).into_iter().map(|k| eligible[k]).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Pool indices that [`sample_negatives`] may draw from.
pub fn eligible_negatives(
    pool: &[Vec<Token>],
    positives: &[Vec<Token>],
    table: &EmbeddingTable,
    cfg: &MiningConfig,
) -> Result<Vec<usize>> {
    let refs: Vec<(&[Token], Vec<f64>)> = positives.iter().map(|s| (&s[..], table.sentence_embedding(s))).collect();
    let flags: Vec<Result<bool>> = pool
        .par_iter()
        .map(|p| {
            if refs.is_empty() {
                return Ok(true);
            }
            best_match(p, &table.sentence_embedding(p), &refs).map(|(_, s)| s < cfg.negative_threshold)
        })
        .collect();
    let mut out = Vec::new();
    for (i, f) in flags.into_iter().enumerate() {
        if f? {
            out.push(i);
        }
    }
    Ok(out)
}

/// One row of the human-review queue.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeRow {
    pub utterance: String,
    pub score: f64,
    /// Matched seed or response.
    pub matched: String,
    /// Empty for kept candidates.
    pub reason: String,
}

impl JudgeRow {
    /// Kept candidates first, then removals with their reasons.
    pub fn from_pruned(pruned: &Pruned, seeds: &[Vec<Token>]) -> Vec<JudgeRow> {
        let row = |c: &Candidate, reason: String| JudgeRow {
            utterance: serialize(&c.tokens),
            score: c.score,
            matched: seeds.get(c.seed_index).map(|s| serialize(s)).unwrap_or_default(),
            reason,
        };
        pruned
            .kept
            .iter()
            .map(|c| row(c, String::new()))
            .chain(pruned.removed.iter().map(|(c, r)| row(c, r.to_string())))
            .collect()
    }
}

/// `utterance<TAB>score<TAB>matched<TAB>reason` lines.
pub fn write_judge_queue(rows: &[JudgeRow], mut sink: impl Write) -> Result<()> {
    for r in rows {
        writeln!(sink, "{}\t{:.4}\t{}\t{}", r.utterance, r.score, r.matched, r.reason)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_norm::TokenKind;

    fn toks(s: &str) -> Vec<Token> {
        normalize_utterance(s, EmoticonLexicon::shipped())
    }

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_pairs(
            "t",
            3,
            &[
                ("happy", vec![1.0, 0.0, 0.0]),
                ("glad", vec![0.9, 0.1, 0.0]),
                ("sad", vec![0.0, 1.0, 0.0]),
                ("table", vec![0.0, 0.0, 1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identical_and_orthogonal() {
        let t = table();
        let seeds = vec![toks("happy")];
        let pool = vec![toks("table"), toks("happy"), toks("glad"), toks("zzz")];
        let c = mine_candidates(&seeds, &pool, &t, &MiningConfig { threshold: 1.0, ..MiningConfig::default() }).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].pool_index, c[0].score), (1, 1.0));
        let c = mine_candidates(&seeds, &pool, &t, &MiningConfig { threshold: 1e-9, ..MiningConfig::default() }).unwrap();
        assert_eq!(c.iter().map(|c| c.pool_index).collect::<Vec<_>>(), [1, 2]);
        assert!(mine_candidates(&[], &pool, &t, &MiningConfig::default()).is_err());
    }

    #[test]
    fn identical_oov_utterances_still_match() {
        let t = table();
        let c = mine_candidates(&[toks("qq rr")], &[toks("qq rr")], &t, &MiningConfig::default()).unwrap();
        assert_eq!(c[0].score, 1.0);
    }

    #[test]
    fn pruning_examples() {
        let lex = EmoticonLexicon::shipped();
        let cand = |s: &str| Candidate {
            pool_index: 0,
            tokens: toks(s),
            seed_index: 0,
            score: 0.9,
        };
        let long: String = vec!["word"; 31].join(" ");
        let p = prune_heuristics(
            vec![cand("so happy :'("), cand(&long), cand("yay :) :|")],
            Emotion::Happy,
            lex,
            &MiningConfig::default(),
        )
        .unwrap();
        assert_eq!(p.kept.len(), 1);
        assert_eq!(p.removed[0].1, Removal::OppositeEmoticon(":'(".into()));
        assert_eq!(p.removed[0].1.kind(), "opposite-emoticon");
        assert_eq!(p.removed[1].1, Removal::Length(31));
        assert!(prune_heuristics(vec![], Emotion::Others, lex, &MiningConfig::default()).is_err());
    }

    fn pair(q: &str, a: &str) -> QaPair {
        QaPair::new(q, a, EmoticonLexicon::shipped()).unwrap()
    }

    #[test]
    fn response_mining() {
        let mut pairs = Vec::new();
        for i in 0..5 {
            pairs.push(pair(&format!("i am furious {i}"), "there, there"));
        }
        pairs.push(pair("my car got towed", "there, there"));
        pairs.push(pair("nice weather", "indeed"));
        pairs.push(pair("i am furious 0", "calm down"));
        let angry: HashSet<String> = (0..5).map(|i| serialize(&toks(&format!("i am furious {i}")))).collect();
        let got = mine_by_response(&pairs, &angry, &MiningConfig::default());
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].response, "there , there");
        assert_eq!(got[0].frequency, 5);
        assert_eq!(serialize(&got[0].q), "my car got towed");

        assert!(mine_by_response(&pairs, &HashSet::new(), &MiningConfig::default()).is_empty());
        let unique: Vec<QaPair> = (0..4).map(|i| pair(&format!("q{i}"), &format!("a{i}"))).collect();
        let all: HashSet<String> = ["q0", "q1"].iter().map(|s| s.to_string()).collect();
        assert!(mine_by_response(&unique, &all, &MiningConfig::default()).is_empty());
        assert!(QaPair::new("@bob", "hi", EmoticonLexicon::shipped()).is_none());
    }

    #[test]
    fn negatives() {
        let t = table();
        let positives = vec![toks("happy"), toks("sad")];
        let pool = vec![toks("happy"), toks("table"), toks("table table"), toks("glad")];
        let cfg = MiningConfig::default();
        assert_eq!(eligible_negatives(&pool, &positives, &t, &cfg).unwrap(), [1, 2]);
        assert_eq!(sample_negatives(&pool, &positives, &t, &cfg, 2, 0).unwrap(), [1, 2]);
        let one = sample_negatives(&pool, &positives, &t, &cfg, 1, 5).unwrap();
        assert_eq!(one, sample_negatives(&pool, &positives, &t, &cfg, 1, 5).unwrap());
        match sample_negatives(&pool, &positives, &t, &cfg, 3, 0) {
            Err(Error::Insufficient(m)) => assert!(m.contains("short by 1")),
            other => panic!("{other:?}"),
        }
        // an all-OOV positive still blocks its identical copy
        let oov = vec![vec![Token::new("qq", TokenKind::Word)]];
        assert!(eligible_negatives(&oov, &oov, &t, &cfg).unwrap().is_empty());
    }

    #[test]
    fn judge_queue_format() {
        let rows = vec![JudgeRow {
            utterance: "so happy".into(),
            score: 0.91234,
            matched: "happy".into(),
            reason: String::new(),
        }];
        let mut buf = Vec::new();
        write_judge_queue(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "so happy\t0.9123\thappy\t\n");
    }

    #[test]
    fn read_pairs_skips_empty() {
        let p = read_pairs("# c\nhello\thi there\n@x\thi\n".as_bytes(), EmoticonLexicon::shipped()).unwrap();
        assert_eq!(p.len(), 1);
        assert!(read_pairs("no tab here\n".as_bytes(), EmoticonLexicon::shipped()).is_err());
    }
}
