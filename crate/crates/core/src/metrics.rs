//! Evaluation: confusion matrices, precision/recall/F1, macro-F1 over the
//! three emotion classes, McNemar's paired test, Fleiss' kappa and label
//! distributions.
//!
//! Precision, recall and F1 are percentages. Any 0/0 is defined as 0.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::label::Emotion;

/// χ² (1 dof) critical value for p = 0.005.
pub const MCNEMAR_CRITICAL_005: f64 = 7.879;

/// 4×4 counts, rows = gold, columns = predicted, both in [`Emotion`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; 4]; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 4]; 4]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn add(&mut self, gold: Emotion, predicted: Emotion) {
        self.counts[gold.index()][predicted.index()] += 1;
    }

    pub fn get(&self, gold: Emotion, predicted: Emotion) -> u64 {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn counts(&self) -> &[[u64; 4]; 4] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..4).map(|k| self.counts[k][k]).sum();
        ratio(correct, self.total())
    }

    pub fn prf1(&self, class: Emotion) -> Prf1 {
        let k = class.index();
        let tp = self.counts[k][k];
        let predicted: u64 = (0..4).map(|g| self.counts[g][k]).sum();
        let actual: u64 = self.counts[k].iter().sum();
        let precision = 100.0 * ratio(tp, predicted);
        let recall = 100.0 * ratio(tp, actual);
        Prf1 {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }

    /// Mean F1 of happy, sad and angry; the others class is excluded.
    pub fn macro_f1(&self) -> f64 {
        macro_f1_of(Emotion::EMOTIONS.map(|c| self.prf1(c).f1))
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall (any scale); 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Arithmetic mean of the happy, sad and angry F1 scores.
pub fn macro_f1_of(f1s: [f64; 3]) -> f64 {
    f1s.iter().sum::<f64>() / 3.0
}

pub fn confusion(predictions: &[Emotion], golds: &[Emotion]) -> Result<ConfusionMatrix> {
    if predictions.len() != golds.len() {
        return Err(Error::DimensionMismatch {
            expected: golds.len(),
            actual: predictions.len(),
        });
    }
    if golds.is_empty() {
        return Err(Error::Config("cannot build a confusion matrix from zero examples".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &g) in predictions.iter().zip(golds) {
        cm.add(g, p);
    }
    Ok(cm)
}

/// Result of McNemar's test with continuity correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McNemar {
    /// Examples the first classifier got right and the second got wrong.
    pub b: u64,
    /// Examples the first classifier got wrong and the second got right.
    pub c: u64,
    pub statistic: f64,
    /// `statistic > 7.879`, i.e. p < 0.005.
    pub significant: bool,
}

pub fn mcnemar_from_counts(b: u64, c: u64) -> McNemar {
    let statistic = if b + c == 0 {
        0.0
    } else {
        let diff = (b.abs_diff(c) as f64 - 1.0).max(0.0);
        diff * diff / (b + c) as f64
    };
    McNemar {
        b,
        c,
        statistic,
        significant: statistic > MCNEMAR_CRITICAL_005,
    }
}

/// Paired test on per-example correctness of two classifiers.
pub fn mcnemar(correct_a: &[bool], correct_b: &[bool]) -> Result<McNemar> {
    if correct_a.len() != correct_b.len() {
        return Err(Error::DimensionMismatch {
            expected: correct_a.len(),
            actual: correct_b.len(),
        });
    }
    let b = correct_a.iter().zip(correct_b).filter(|(a, b)| **a && !**b).count() as u64;
    let c = correct_a.iter().zip(correct_b).filter(|(a, b)| !**a && **b).count() as u64;
    Ok(mcnemar_from_counts(b, c))
}

/// Fleiss' kappa for `rows[item][category]` counts with `judges` ratings per item.
///
/// Returns 1 when every rating in the table falls in a single category.
pub fn fleiss_kappa(rows: &[Vec<u64>], judges: u64) -> Result<f64> {
    if judges < 2 {
        return Err(Error::Config("fleiss' kappa needs at least two judges per item".into()));
    }
    if rows.is_empty() {
        return Err(Error::Config("fleiss' kappa needs at least one item".into()));
    }
    let categories = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != categories || r.iter().sum::<u64>() != judges {
            return Err(Error::format(
                "judgments",
                i + 1,
                format!("row sums to {} across {} categories, expected {judges}", r.iter().sum::<u64>(), r.len()),
            ));
        }
    }
    let n = judges as f64;
    let items = rows.len() as f64;
    let p_bar = rows
        .iter()
        .map(|r| (r.iter().map(|&x| (x * x) as f64).sum::<f64>() - n) / (n * (n - 1.0)))
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..categories)
        .map(|j| {
            let pj = rows.iter().map(|r| r[j] as f64).sum::<f64>() / (items * n);
            pj * pj
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Label counts and percentages (two decimals).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStats {
    pub counts: [u64; 4],
    pub percentages: [f64; 4],
    pub total: u64,
}

pub fn dataset_stats(labels: impl IntoIterator<Item = Emotion>) -> LabelStats {
    let mut counts = [0u64; 4];
    for l in labels {
        counts[l.index()] += 1;
    }
    let total = counts.iter().sum();
    LabelStats {
        counts,
        percentages: counts.map(|c| round2(100.0 * ratio(c, total))),
        total,
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl LabelStats {
    pub fn render(&self) -> String {
        let mut s = String::from("label\tcount\tpercent\n");
        for e in Emotion::ALL {
            let _ = writeln!(s, "{e}\t{}\t{:.2}", self.counts[e.index()], self.percentages[e.index()]);
        }
        let pct = if self.total > 0 { 100.0 } else { 0.0 };
        let _ = writeln!(s, "total\t{}\t{pct:.2}", self.total);
        s
    }
}

/// Everything reported for one classifier on one labeled set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub confusion: ConfusionMatrix,
    pub per_class: [Prf1; 4],
    pub macro_f1: f64,
    pub examples: u64,
    pub mcnemar: Option<McNemar>,
}

impl EvaluationReport {
    pub fn new(confusion: ConfusionMatrix) -> Self {
        EvaluationReport {
            per_class: Emotion::ALL.map(|c| confusion.prf1(c)),
            macro_f1: confusion.macro_f1(),
            examples: confusion.total(),
            confusion,
            mcnemar: None,
        }
    }

    pub fn from_predictions(predictions: &[Emotion], golds: &[Emotion]) -> Result<Self> {
        confusion(predictions, golds).map(Self::new)
    }

    /// Human-readable table.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f1");
        for e in Emotion::ALL {
            let m = self.per_class[e.index()];
            let _ = writeln!(s, "{:<8} {:>9.2} {:>9.2} {:>9.2}", e.as_str(), m.precision, m.recall, m.f1);
        }
        let _ = writeln!(s, "{:<8} {:>29.2}", "macro-f1", self.macro_f1);
        let _ = writeln!(s, "examples {}  accuracy {:.2}", self.examples, 100.0 * self.confusion.accuracy());
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<8} {:>7} {:>7} {:>7} {:>7}   (rows gold, columns predicted)", "", "happy", "sad", "angry", "others");
        for g in Emotion::ALL {
            let row = self.confusion.counts()[g.index()];
            let _ = writeln!(s, "{:<8} {:>7} {:>7} {:>7} {:>7}", g.as_str(), row[0], row[1], row[2], row[3]);
        }
        if let Some(m) = &self.mcnemar {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "mcnemar  b={} c={} statistic={:.4} {}",
                m.b,
                m.c,
                m.statistic,
                if m.significant { "significant (p < 0.005)" } else { "not significant" }
            );
        }
        s
    }

    /// Tab-separated block: one row per class, then `macro`, then an
    /// optional `mcnemar` row.
    pub fn render_tsv(&self) -> String {
        let mut s = String::from("class\tprecision\trecall\tf1\n");
        for e in Emotion::ALL {
            let m = self.per_class[e.index()];
            let _ = writeln!(s, "{e}\t{:.2}\t{:.2}\t{:.2}", m.precision, m.recall, m.f1);
        }
        let _ = writeln!(s, "macro\t\t\t{:.2}", self.macro_f1);
        if let Some(m) = &self.mcnemar {
            let _ = writeln!(s, "mcnemar\t{}\t{}\t{:.4}\t{}", m.b, m.c, m.statistic, m.significant);
        }
        s
    }
}
