use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const SHIPPED: &str = include_str!("../../data/emoticons.tsv");
const VARIATION_SELECTOR: char = '\u{FE0F}';

/// Coarse affect of an emoticon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmoticonClass {
    Happy,
    Sad,
    Angry,
    Neutral,
}

impl EmoticonClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EmoticonClass::Happy => "happy",
            EmoticonClass::Sad => "sad",
            EmoticonClass::Angry => "angry",
            EmoticonClass::Neutral => "neutral",
        }
    }
}

impl fmt::Display for EmoticonClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmoticonClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "happy" => Ok(EmoticonClass::Happy),
            "sad" => Ok(EmoticonClass::Sad),
            "angry" => Ok(EmoticonClass::Angry),
            "neutral" => Ok(EmoticonClass::Neutral),
            other => Err(format!("unknown emoticon class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub raw: String,
    pub canonical: String,
    pub class: EmoticonClass,
}

impl LexiconEntry {
    /// Emoji entries match anywhere and never collapse; ASCII entries obey
    /// word-boundary rules and absorb runs of their mouth character.
    fn is_ascii(&self) -> bool {
        self.raw.is_ascii()
    }
}

/// Mapping from emoticon spellings to a canonical form and an affect class.
#[derive(Debug, Clone)]
pub struct EmoticonLexicon {
    entries: Vec<LexiconEntry>,
    by_raw: HashMap<String, usize>,
    /// Raw forms as char vectors, longest first.
    patterns: Vec<(Vec<char>, usize)>,
}

impl EmoticonLexicon {
    /// The lexicon bundled with the crate (`data/emoticons.tsv`).
    pub fn shipped() -> &'static EmoticonLexicon {
        static SHIPPED_LEXICON: OnceLock<EmoticonLexicon> = OnceLock::new();
        SHIPPED_LEXICON.get_or_init(|| EmoticonLexicon::parse(SHIPPED).expect("bundled lexicon is valid"))
    }

    pub fn from_reader(mut source: impl Read) -> Result<Self> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::parse(&text)
    }

    /// Parses `raw<TAB>canonical<TAB>class` lines; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::format("emoticon lexicon", line_no, format!("expected 3 columns, found {}", cols.len())));
            }
            let (raw, canonical) = (cols[0], cols[1]);
            for s in [raw, canonical] {
                if s.is_empty() || s.chars().any(char::is_whitespace) {
                    return Err(Error::format("emoticon lexicon", line_no, format!("invalid emoticon {s:?}")));
                }
            }
            let class = cols[2].parse().map_err(|m| Error::format("emoticon lexicon", line_no, m))?;
            entries.push(LexiconEntry {
                raw: raw.to_string(),
                canonical: canonical.to_string(),
                class,
            });
        }
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Self> {
        let mut by_raw = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if by_raw.insert(e.raw.clone(), i).is_some() {
                return Err(Error::format("emoticon lexicon", 0, format!("duplicate raw form {:?}", e.raw)));
            }
        }
        for e in &entries {
            match by_raw.get(&e.canonical).map(|&i| &entries[i]) {
                Some(c) if c.canonical == e.canonical && c.class == e.class => {}
                Some(c) if c.canonical != e.canonical => {
                    return Err(Error::format(
                        "emoticon lexicon",
                        0,
                        format!("canonical form {:?} does not map to itself", e.canonical),
                    ))
                }
                Some(_) => {
                    return Err(Error::format(
                        "emoticon lexicon",
                        0,
                        format!("{:?} disagrees with the class of its canonical form {:?}", e.raw, e.canonical),
                    ))
                }
                None => {
                    return Err(Error::format(
                        "emoticon lexicon",
                        0,
                        format!("canonical form {:?} has no entry of its own", e.canonical),
                    ))
                }
            }
        }
        let mut patterns: Vec<(Vec<char>, usize)> =
            entries.iter().enumerate().map(|(i, e)| (e.raw.chars().collect(), i)).collect();
        patterns.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
        Ok(EmoticonLexicon {
            entries,
            by_raw,
            patterns,
        })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Resolves a complete surface string (e.g. `":((("`, `"☹\u{FE0F}"`) to its entry.
    pub fn resolve(&self, surface: &str) -> Option<&LexiconEntry> {
        if let Some(&i) = self.by_raw.get(surface) {
            return Some(&self.entries[i]);
        }
        if let Some(stripped) = surface.strip_suffix(VARIATION_SELECTOR) {
            return self
                .by_raw
                .get(stripped)
                .map(|&i| &self.entries[i])
                .filter(|e| !e.is_ascii());
        }
        // Peel a repeated trailing mouth character until a raw form appears.
        let mut s = surface;
        loop {
            let mut rev = s.chars().rev();
            let (last, prev) = (rev.next()?, rev.next()?);
            if last != prev {
                return None;
            }
            s = &s[..s.len() - last.len_utf8()];
            if let Some(e) = self.by_raw.get(s).map(|&i| &self.entries[i]) {
                return e.is_ascii().then_some(e);
            }
        }
    }

    pub fn canonical(&self, surface: &str) -> Option<&str> {
        self.resolve(surface).map(|e| e.canonical.as_str())
    }

    pub fn is_canonical(&self, surface: &str) -> bool {
        self.by_raw
            .get(surface)
            .is_some_and(|&i| self.entries[i].canonical == surface)
    }

    /// Length in chars of the longest emoticon starting at `chars[at]`, if any.
    ///
    /// `after_word` says whether `chars[at - 1]` is a word character.
    pub(crate) fn match_at(&self, chars: &[char], at: usize, after_word: bool) -> Option<usize> {
        let rest = &chars[at..];
        let mut best: Option<usize> = None;
        for (pat, i) in &self.patterns {
            if !rest.starts_with(pat) {
                continue;
            }
            let entry = &self.entries[*i];
            let mut len = pat.len();
            if entry.is_ascii() {
                if after_word && pat[0].is_alphanumeric() {
                    continue;
                }
                let mouth = pat[pat.len() - 1];
                while rest.get(len) == Some(&mouth) {
                    len += 1;
                }
                if mouth.is_alphanumeric() && rest.get(len).is_some_and(|&c| super::is_word_char(c)) {
                    continue;
                }
            } else if rest.get(len) == Some(&VARIATION_SELECTOR) {
                len += 1;
            }
            if best.is_none_or(|b| len > b) {
                best = Some(len);
            }
        }
        best
    }

    /// Hex SHA-256 of the lexicon in its canonical TSV rendering.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(format!("{}\t{}\t{}\n", e.raw, e.canonical, e.class).as_bytes());
        }
        format!("{:x}", h.finalize())
    }
}
