//! Conversation datasets and judge-count files.
//!
//! Dataset lines are `id<TAB>turn1<TAB>turn2<TAB>turn3[<TAB>label]`; lines
//! starting with `#` are comments. Judgment lines are
//! `item_id<TAB>happy<TAB>sad<TAB>angry<TAB>others` counts.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::label::Emotion;
use crate::text_norm::{normalize_utterance, EmoticonLexicon, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub id: String,
    pub turns: [String; 3],
    pub label: Option<Emotion>,
}

impl Conversation {
    /// The turn the models classify.
    pub fn utterance(&self) -> &str {
        &self.turns[2]
    }

    /// Normalized tokens of the final turn.
    pub fn tokens(&self, lex: &EmoticonLexicon) -> Vec<Token> {
        normalize_utterance(self.utterance(), lex)
    }
}

/// A normalized utterance with its gold label; what the trainers consume.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub tokens: Vec<Token>,
    pub label: Emotion,
}

impl Example {
    pub fn new(tokens: Vec<Token>, label: Emotion) -> Self {
        Example { tokens, label }
    }
}

/// Conversations that all carry a label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledDataset {
    conversations: Vec<Conversation>,
}

impl LabeledDataset {
    pub fn new(conversations: Vec<Conversation>) -> Result<Self> {
        if let Some(c) = conversations.iter().find(|c| c.label.is_none()) {
            return Err(Error::Config(format!("conversation {:?} has no label", c.id)));
        }
        Ok(LabeledDataset { conversations })
    }

    pub fn conversations(&self) -> &[Conversation] {
        &self.conversations
    }

    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    pub fn labels(&self) -> Vec<Emotion> {
        self.conversations.iter().map(|c| c.label.expect("labeled")).collect()
    }

    pub fn examples(&self, lex: &EmoticonLexicon) -> Vec<Example> {
        self.conversations
            .iter()
            .map(|c| Example::new(c.tokens(lex), c.label.expect("labeled")))
            .collect()
    }

    /// Subset in the order of `indices`.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            conversations: indices.iter().map(|&i| self.conversations[i].clone()).collect(),
        }
    }
}

impl TryFrom<Vec<Conversation>> for LabeledDataset {
    type Error = Error;

    fn try_from(v: Vec<Conversation>) -> Result<Self> {
        Self::new(v)
    }
}

/// Parses a dataset; the label column may be absent on any line.
pub fn read_dataset(source: impl Read) -> Result<Vec<Conversation>> {
    const WHAT: &str = "dataset";
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in BufReader::new(source).lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !(4..=5).contains(&cols.len()) {
            return Err(Error::format(WHAT, line_no, format!("expected 4 or 5 tab-separated columns, found {}", cols.len())));
        }
        let id = cols[0];
        if id.is_empty() {
            return Err(Error::format(WHAT, line_no, "empty id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::format(WHAT, line_no, format!("duplicate id {id:?}")));
        }
        if cols[3].trim().is_empty() {
            return Err(Error::format(WHAT, line_no, "final turn is empty"));
        }
        let label = match cols.get(4) {
            Some(l) if !l.is_empty() => Some(
                l.parse::<Emotion>()
                    .map_err(|_| Error::format(WHAT, line_no, format!("unknown label {l:?}")))?,
            ),
            _ => None,
        };
        out.push(Conversation {
            id: id.to_string(),
            turns: [cols[1].to_string(), cols[2].to_string(), cols[3].to_string()],
            label,
        });
    }
    Ok(out)
}

pub fn read_labeled_dataset(source: impl Read) -> Result<LabeledDataset> {
    let convs = read_dataset(source)?;
    if let Some(c) = convs.iter().find(|c| c.label.is_none()) {
        return Err(Error::format("dataset", 0, format!("conversation {:?} has no label", c.id)));
    }
    LabeledDataset::new(convs)
}

/// Writes conversations; rejects text containing tabs or newlines.
pub fn write_dataset<'a>(conversations: impl IntoIterator<Item = &'a Conversation>, mut sink: impl Write) -> Result<()> {
    for c in conversations {
        let fields = [&c.id, &c.turns[0], &c.turns[1], &c.turns[2]];
        if fields.iter().any(|f| f.contains(['\t', '\n', '\r'])) {
            return Err(Error::Config(format!("conversation {:?} contains a tab or newline", c.id)));
        }
        write!(sink, "{}\t{}\t{}\t{}", c.id, c.turns[0], c.turns[1], c.turns[2])?;
        if let Some(l) = c.label {
            write!(sink, "\t{l}")?;
        }
        writeln!(sink)?;
    }
    Ok(())
}

/// Outcome of a majority vote over judge counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Majority {
    Label(Emotion),
    /// Two or more classes share the top count.
    NoMajority,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgments {
    pub items: Vec<(String, [u64; 4])>,
    /// Judges per item.
    pub judges: u64,
}

impl Judgments {
    pub fn count_rows(&self) -> Vec<Vec<u64>> {
        self.items.iter().map(|(_, r)| r.to_vec()).collect()
    }

    pub fn kappa(&self) -> Result<f64> {
        crate::metrics::fleiss_kappa(&self.count_rows(), self.judges)
    }
}

pub fn majority(counts: &[u64; 4]) -> Majority {
    let max = *counts.iter().max().expect("four counts");
    let mut winners = Emotion::ALL.iter().filter(|e| counts[e.index()] == max);
    match (winners.next(), winners.next()) {
        (Some(&e), None) => Majority::Label(e),
        _ => Majority::NoMajority,
    }
}

pub fn read_judgments(source: impl Read) -> Result<Judgments> {
    const WHAT: &str = "judgments";
    let mut items = Vec::new();
    let mut judges = None;
    for (n, line) in BufReader::new(source).lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::format(WHAT, line_no, format!("expected 5 columns, found {}", cols.len())));
        }
        let mut row = [0u64; 4];
        for (k, c) in cols[1..].iter().enumerate() {
            row[k] = c
                .trim()
                .parse()
                .map_err(|_| Error::format(WHAT, line_no, format!("bad count {c:?}")))?;
        }
        let sum: u64 = row.iter().sum();
        match judges {
            None => judges = Some(sum),
            Some(j) if j != sum => {
                return Err(Error::format(WHAT, line_no, format!("row sums to {sum}, expected {j}")));
            }
            Some(_) => {}
        }
        items.push((cols[0].to_string(), row));
    }
    let judges = judges.ok_or_else(|| Error::format(WHAT, 0, "no judgment rows"))?;
    Ok(Judgments { items, judges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::dataset_stats;

    #[test]
    fn read_dataset_examples() {
        let d = read_dataset("1\thi\thello\tI won! :)\thappy\n".as_bytes()).unwrap();
        assert_eq!(d[0].id, "1");
        assert_eq!(d[0].label, Some(Emotion::Happy));
        assert_eq!(d[0].utterance(), "I won! :)");

        match read_dataset("1\thi\thello\tI won!\tjoyful\n".as_bytes()) {
            Err(Error::Format { line: 1, message, .. }) => assert!(message.contains("unknown label")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_dataset("1\ta\tb\n".as_bytes()), Err(Error::Format { line: 1, .. })));
        assert!(matches!(
            read_dataset("# c\n1\ta\tb\tc\n1\ta\tb\tc\n".as_bytes()),
            Err(Error::Format { line: 3, .. })
        ));
        assert!(read_dataset("1\ta\tb\t \tsad\n".as_bytes()).is_err());
        let unlabeled = read_dataset("x\ta\tb\tc\n".as_bytes()).unwrap();
        assert_eq!(unlabeled[0].label, None);
        assert!(LabeledDataset::new(unlabeled).is_err());
    }

    #[test]
    fn table_one_shape_reproduces_distribution() {
        let mut text = String::new();
        let mut id = 0;
        for (label, n) in [("happy", 109), ("sad", 107), ("angry", 90), ("others", 1920)] {
            for _ in 0..n {
                id += 1;
                text.push_str(&format!("{id}\ta\tb\tc\t{label}\n"));
            }
        }
        let ds = read_labeled_dataset(text.as_bytes()).unwrap();
        let s = dataset_stats(ds.labels());
        assert_eq!(s.percentages, [4.90, 4.81, 4.04, 86.25]);
    }

    #[test]
    fn write_read_is_byte_identical() {
        let text = "1\thi\thello\tI won! :)\thappy\n2\t\t\tmeh\n3\ta b\tc\twhy?? \u{1F621}\tangry\n";
        let d = read_dataset(text.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_dataset(&d, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn write_rejects_tabs() {
        let c = Conversation {
            id: "1".into(),
            turns: ["a".into(), "b\tc".into(), "d".into()],
            label: None,
        };
        assert!(write_dataset([&c], Vec::new()).is_err());
    }

    #[test]
    fn judgments_examples() {
        let j = read_judgments("a\t5\t0\t0\t0\nb\t0\t5\t0\t0\n".as_bytes()).unwrap();
        assert_eq!((j.judges, j.items.len()), (5, 2));
        assert_eq!(j.kappa().unwrap(), 1.0);
        assert!(matches!(
            read_judgments("a\t5\t0\t0\t0\nb\t0\t4\t0\t0\n".as_bytes()),
            Err(Error::Format { line: 2, .. })
        ));
        assert_eq!(majority(&[1, 3, 1, 0]), Majority::Label(Emotion::Sad));
        assert_eq!(majority(&[2, 2, 1, 0]), Majority::NoMajority);
    }
}
