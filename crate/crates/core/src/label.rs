//! The four output classes and their fixed ordering.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Emotion class of an utterance.
///
/// The declaration order (happy, sad, angry, others) is the canonical class
/// order: it fixes the output-layer rows, confusion-matrix axes and every
/// argmax tie-break in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Emotion {
    Happy,
    Sad,
    Angry,
    Others,
}

impl Emotion {
    pub const ALL: [Emotion; 4] = [Emotion::Happy, Emotion::Sad, Emotion::Angry, Emotion::Others];
    /// Classes that take part in the macro-averaged F1.
    pub const EMOTIONS: [Emotion; 3] = [Emotion::Happy, Emotion::Sad, Emotion::Angry];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Emotion> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Angry => "angry",
            Emotion::Others => "others",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "happy" => Ok(Emotion::Happy),
            "sad" => Ok(Emotion::Sad),
            "angry" => Ok(Emotion::Angry),
            "others" => Ok(Emotion::Others),
            other => Err(Error::Config(format!("unknown label {other:?}"))),
        }
    }
}

/// Index of the largest score; ties go to the earliest index.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip_through_canonical_spelling() {
        for e in Emotion::ALL {
            assert_eq!(e.as_str().parse::<Emotion>().unwrap(), e);
            assert_eq!(Emotion::from_index(e.index()), Some(e));
        }
        assert_eq!("HAPPY".parse::<Emotion>().unwrap(), Emotion::Happy);
        assert!("joyful".parse::<Emotion>().is_err());
    }

    #[test]
    fn argmax_breaks_ties_by_order() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.1, 0.1]), 1);
        assert_eq!(argmax(&[1.0, 3.0, 2.0, 3.0]), 1);
    }
}
