//! Word-embedding tables: loading, lookup, cosine similarity and mean-pooled
//! sentence vectors.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text_norm::Token;

/// Dense vectors of one fixed dimensionality keyed by token surface.
///
/// Out-of-vocabulary lookups yield the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    name: String,
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            name: name.into(),
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    /// Builds a table from `(word, vector)` pairs.
    pub fn from_pairs<S: AsRef<str>>(name: &str, dim: usize, pairs: &[(S, Vec<f64>)]) -> Result<Self> {
        let mut t = Self::new(name, dim)?;
        for (w, v) in pairs {
            t.insert(w.as_ref(), v)?;
        }
        Ok(t)
    }

    /// Adds a word. Fails on duplicates, wrong length, non-finite values or
    /// words containing whitespace.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("invalid embedding token {word:?}")));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite component in vector for {word:?}")));
        }
        if self.index.contains_key(word) {
            return Err(Error::Config(format!("duplicate embedding token {word:?}")));
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn get_mut(&mut self, word: &str) -> Option<&mut [f64]> {
        let dim = self.dim;
        self.index.get(word).map(|&i| &mut self.data[i * dim..(i + 1) * dim])
    }

    /// Vector for `word`, or zeros when it is out of vocabulary.
    pub fn lookup_str(&self, word: &str) -> Vec<f64> {
        self.get(word).map_or_else(|| vec![0.0; self.dim], <[f64]>::to_vec)
    }

    pub fn lookup(&self, token: &Token) -> Vec<f64> {
        self.lookup_str(token.surface())
    }

    /// Mean of the in-vocabulary token vectors; zeros if there are none.
    pub fn sentence_embedding(&self, tokens: &[Token]) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim];
        let mut n = 0usize;
        for v in tokens.iter().filter_map(|t| self.get(t.surface())) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
        if n > 0 {
            let inv = 1.0 / n as f64;
            sum.iter_mut().for_each(|s| *s *= inv);
        }
        sum
    }

    /// Reads the whitespace-separated text format: `token v1 ... vD` per
    /// line, with an optional leading `COUNT DIM` header.
    pub fn load(name: &str, source: impl Read) -> Result<Self> {
        const WHAT: &str = "embedding file";
        let reader = BufReader::new(source);
        let mut table: Option<EmbeddingTable> = None;
        let mut header: Option<(usize, usize)> = None;
        let mut values = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else {
                continue;
            };
            let rest: Vec<&str> = fields.collect();
            if table.is_none() && header.is_none() && rest.len() == 1 {
                if let (Ok(count), Ok(dim)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                    if dim == 0 {
                        return Err(Error::format(WHAT, line_no, "header declares dimension 0"));
                    }
                    header = Some((count, dim));
                    continue;
                }
            }
            values.clear();
            for f in &rest {
                let x: f64 = f
                    .parse()
                    .map_err(|_| Error::format(WHAT, line_no, format!("cannot parse {f:?} as a number")))?;
                values.push(x);
            }
            let t = match &mut table {
                Some(t) => t,
                None => {
                    let dim = header.map_or(values.len(), |h| h.1);
                    if dim == 0 {
                        return Err(Error::format(WHAT, line_no, format!("token {word:?} has no vector")));
                    }
                    table.insert(EmbeddingTable::new(name, dim)?)
                }
            };
            if values.len() != t.dim {
                return Err(Error::format(
                    WHAT,
                    line_no,
                    format!("dimension mismatch: expected {}, found {}", t.dim, values.len()),
                ));
            }
            t.insert(word, &values).map_err(|e| match e {
                Error::Config(_) if t.contains(word) => Error::format(WHAT, line_no, format!("duplicate token {word:?}")),
                other => Error::format(WHAT, line_no, other.to_string()),
            })?;
        }
        let table = table.ok_or_else(|| Error::format(WHAT, 0, "file contains no vectors"))?;
        if let Some((count, _)) = header {
            if count != table.len() {
                return Err(Error::format(
                    WHAT,
                    1,
                    format!("header declares {count} vectors, file has {}", table.len()),
                ));
            }
        }
        Ok(table)
    }

    /// Writes the table with a `COUNT DIM` header in shortest round-trip
    /// float notation.
    pub fn save(&self, mut sink: impl Write) -> Result<()> {
        writeln!(sink, "{} {}", self.len(), self.dim)?;
        for (i, w) in self.words.iter().enumerate() {
            write!(sink, "{w}")?;
            for x in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(sink, " {x:?}")?;
            }
            writeln!(sink)?;
        }
        Ok(())
    }

    /// Hex SHA-256 of [`EmbeddingTable::save`] output.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        self.save(&mut buf).expect("writing to memory");
        format!("{:x}", Sha256::digest(&buf))
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_norm::{normalize_utterance, EmoticonLexicon, TokenKind};
    use proptest::prelude::*;

    fn load(s: &str) -> Result<EmbeddingTable> {
        EmbeddingTable::load("t", s.as_bytes())
    }

    fn word(s: &str) -> Token {
        Token::new(s, TokenKind::Word)
    }

    #[test]
    fn load_examples() {
        let t = load("a 1.0 0.0\nb 0.0 1.0").unwrap();
        assert_eq!((t.dim(), t.len()), (2, 2));
        assert_eq!(t.get("b"), Some(&[0.0, 1.0][..]));

        match load("a 1.0\nb 0.0 1.0") {
            Err(Error::Format { line: 2, message, .. }) => assert!(message.contains("dimension")),
            other => panic!("{other:?}"),
        }
        match load("a 1.0\na 2.0") {
            Err(Error::Format { line: 2, message, .. }) => assert!(message.contains("duplicate")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load(""), Err(Error::Format { .. })));
        assert!(matches!(load("a x"), Err(Error::Format { line: 1, .. })));
    }

    #[test]
    fn header_line_is_validated() {
        let t = load("2 2\na 1 0\nb 0 1\n").unwrap();
        assert_eq!(t.len(), 2);
        assert!(load("3 2\na 1 0\nb 0 1\n").is_err());
        assert!(load("2 3\na 1 0\nb 0 1\n").is_err());
    }

    #[test]
    fn lookup_examples() {
        let t = EmbeddingTable::from_pairs("t", 2, &[("a", vec![1.0, 0.0])]).unwrap();
        assert_eq!(t.lookup(&word("a")), [1.0, 0.0]);
        assert_eq!(t.lookup(&word("zzz")), [0.0, 0.0]);

        let lex = EmoticonLexicon::shipped();
        let t = EmbeddingTable::from_pairs("t", 2, &[(":(", vec![0.0, -1.0])]).unwrap();
        let toks = normalize_utterance(":(((", lex);
        assert_eq!(t.lookup(&toks[0]), [0.0, -1.0]);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - 0.70710678).abs() < 1e-8);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sentence_embedding_examples() {
        let t = EmbeddingTable::from_pairs("t", 2, &[("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]).unwrap();
        assert_eq!(t.sentence_embedding(&[word("a"), word("b")]), [0.5, 0.5]);
        assert_eq!(t.sentence_embedding(&[]), [0.0, 0.0]);
        let t = EmbeddingTable::from_pairs("t", 2, &[("a", vec![2.0, 0.0])]).unwrap();
        assert_eq!(t.sentence_embedding(&[word("a"), word("zzz")]), [2.0, 0.0]);
    }

    fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, dim)
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(u in vec_strategy(5), v in vec_strategy(5), alpha in 0.01f64..100.0) {
            let a = cosine(&u, &v).unwrap();
            prop_assert!((a - cosine(&v, &u).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            prop_assert!((a - cosine(&scaled, &v).unwrap()).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&a));
        }

        #[test]
        fn cosine_self_is_one(u in vec_strategy(6)) {
            prop_assume!(u.iter().any(|x| x.abs() > 1e-6));
            prop_assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn sentence_embedding_permutation_invariant(
            vecs in prop::collection::vec(vec_strategy(3), 1..6),
            order in prop::collection::vec(0usize..8, 0..10),
        ) {
            let pairs: Vec<(String, Vec<f64>)> = vecs.iter().enumerate().map(|(i, v)| (format!("w{i}"), v.clone())).collect();
            let t = EmbeddingTable::from_pairs("t", 3, &pairs).unwrap();
            let toks: Vec<Token> = order.iter().map(|i| word(&format!("w{i}"))).collect();
            let mut rev = toks.clone();
            rev.reverse();
            let (a, b) = (t.sentence_embedding(&toks), t.sentence_embedding(&rev));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn save_load_round_trip(vecs in prop::collection::vec(vec_strategy(4), 1..8)) {
            let pairs: Vec<(String, Vec<f64>)> = vecs.iter().enumerate().map(|(i, v)| (format!("w{i}"), v.clone())).collect();
            let t = EmbeddingTable::from_pairs("t", 4, &pairs).unwrap();
            let mut buf = Vec::new();
            t.save(&mut buf).unwrap();
            let back = EmbeddingTable::load("t", buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(back.content_hash(), t.content_hash());
        }
    }
}
