//! Tokenization and emoticon normalization for short conversational text.
//!
//! Every model in the crate consumes the token sequence produced by
//! [`normalize_utterance`]: lowercase words, single-character punctuation,
//! and emoticons reduced to one canonical spelling per feeling.

mod lexicon;

use std::fmt;

pub use lexicon::{EmoticonClass, EmoticonLexicon, LexiconEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Emoticon,
    Punctuation,
}

/// A single non-empty, whitespace-free token.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    surface: String,
    kind: TokenKind,
}

impl Token {
    /// # Panics
    ///
    /// If `surface` is empty or contains whitespace.
    pub fn new(surface: impl Into<String>, kind: TokenKind) -> Token {
        let surface = surface.into();
        assert!(
            !surface.is_empty() && !surface.chars().any(char::is_whitespace),
            "invalid token surface {surface:?}"
        );
        Token { surface, kind }
    }

    /// Builds a token from an already-normalized surface, classifying it
    /// against `lex`.
    pub fn classify(surface: &str, lex: &EmoticonLexicon) -> Token {
        let kind = if lex.is_canonical(surface) {
            TokenKind::Emoticon
        } else if surface.chars().any(is_word_char) {
            TokenKind::Word
        } else {
            TokenKind::Punctuation
        };
        Token::new(surface, kind)
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

// Lowercasing can emit combining marks (e.g. 'İ' -> "i\u{307}"), which must
// stay attached to their word.
fn is_combining_mark(c: char) -> bool {
    matches!(c,
        '\u{0300}'..='\u{036F}'
        | '\u{1AB0}'..='\u{1AFF}'
        | '\u{1DC0}'..='\u{1DFF}'
        | '\u{20D0}'..='\u{20FF}'
        | '\u{FE20}'..='\u{FE2F}')
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

fn starts_with_ignore_case(chars: &[char], prefix: &str) -> bool {
    let mut it = chars.iter();
    prefix.chars().all(|p| it.next().is_some_and(|c| c.to_ascii_lowercase() == p))
}

/// Splits raw text into tokens using the shipped emoticon lexicon.
pub fn tokenize(raw: &str) -> Vec<Token> {
    tokenize_with(raw, EmoticonLexicon::shipped())
}

/// Splits raw text into tokens.
///
/// Words are lowercased and keep inner apostrophes and hyphens (`don't`).
/// `@handles` and URLs are dropped. Emoticons recognized by `lex` come out as
/// single [`TokenKind::Emoticon`] tokens in their raw spelling; every other
/// non-word character becomes a one-character punctuation token.
pub fn tokenize_with(raw: &str, lex: &EmoticonLexicon) -> Vec<Token> {
    let mut out = Vec::new();
    for chunk in raw.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let n = chars.len();
        let mut i = 0;
        while i < n {
            let c = chars[i];
            let after_word = i > 0 && is_word_char(chars[i - 1]);
            if !after_word {
                if c == '@' && chars.get(i + 1).is_some_and(|&d| is_word_char(d) || d == '_') {
                    i += 1;
                    while i < n && (is_word_char(chars[i]) || chars[i] == '_') {
                        i += 1;
                    }
                    continue;
                }
                let rest = &chars[i..];
                if ["http://", "https://", "www."].iter().any(|p| starts_with_ignore_case(rest, p)) {
                    break;
                }
            }
            if let Some(len) = lex.match_at(&chars, i, after_word) {
                out.push(Token::new(chars[i..i + len].iter().collect::<String>(), TokenKind::Emoticon));
                i += len;
                continue;
            }
            if is_word_char(c) {
                let start = i;
                loop {
                    while i < n && is_word_char(chars[i]) {
                        i += 1;
                    }
                    if i + 1 < n && is_joiner(chars[i]) && is_word_char(chars[i + 1]) {
                        i += 1;
                        continue;
                    }
                    break;
                }
                let word: String = chars[start..i]
                    .iter()
                    .map(|&c| if c == '\u{2019}' { '\'' } else { c })
                    .collect::<String>()
                    .to_lowercase();
                out.push(Token::new(word, TokenKind::Word));
                continue;
            }
            out.push(Token::new(c.to_string(), TokenKind::Punctuation));
            i += 1;
        }
    }
    out
}

/// Replaces every emoticon spelling known to `lex` by its canonical form.
///
/// Tokens the lexicon does not know pass through untouched. Idempotent.
pub fn normalize_emoticons(tokens: &[Token], lex: &EmoticonLexicon) -> Vec<Token> {
    tokens
        .iter()
        .map(|t| match lex.canonical(t.surface()) {
            Some(canonical) => Token::new(canonical, TokenKind::Emoticon),
            None => t.clone(),
        })
        .collect()
}

/// [`tokenize_with`] followed by [`normalize_emoticons`].
pub fn normalize_utterance(raw: &str, lex: &EmoticonLexicon) -> Vec<Token> {
    normalize_emoticons(&tokenize_with(raw, lex), lex)
}

/// Space-joined surfaces; feeding the result back through
/// [`normalize_utterance`] reproduces `tokens`.
pub fn serialize(tokens: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(t.surface());
    }
    s
}

/// Affect class of an emoticon token, or `None` for anything else.
pub fn emoticon_class(token: &Token, lex: &EmoticonLexicon) -> Option<EmoticonClass> {
    lex.resolve(token.surface()).map(|e| e.class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(Token::surface).collect()
    }

    fn lex() -> &'static EmoticonLexicon {
        EmoticonLexicon::shipped()
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(
            surfaces(&tokenize("Why don't you ever text me!")),
            ["why", "don't", "you", "ever", "text", "me", "!"]
        );
        let t = tokenize("@bob :) ok");
        assert_eq!(surfaces(&t), [":)", "ok"]);
        assert_eq!(t[0].kind(), TokenKind::Emoticon);
    }

    #[test]
    fn tokenize_drops_urls_and_handles() {
        assert_eq!(
            surfaces(&tokenize("see https://t.co/x and www.foo.com, @a_b! ok")),
            ["see", "and", "!", "ok"]
        );
        // '@' inside a word is not a handle
        assert_eq!(surfaces(&tokenize("me@home")), ["me", "@", "home"]);
        assert_eq!(surfaces(&tokenize("http is fine")), ["http", "is", "fine"]);
    }

    #[test]
    fn tokenize_splits_punctuation_and_emoticons() {
        assert_eq!(surfaces(&tokenize("yay:)")), ["yay", ":)"]);
        assert_eq!(surfaces(&tokenize("well-known...")), ["well-known", ".", ".", "."]);
        assert_eq!(surfaces(&tokenize("It’s OK")), ["it's", "ok"]);
        assert_eq!(surfaces(&tokenize(":Dog")), [":", "dog"]);
        assert_eq!(surfaces(&tokenize("XDDD lol")), ["XDDD", "lol"]);
        assert_eq!(surfaces(&tokenize("boxD:")), ["boxd", ":"]);
        assert_eq!(surfaces(&tokenize("soooo")), ["soooo"]);
    }

    #[test]
    fn normalize_emoticons_examples() {
        let norm = |s: &[&str]| {
            let toks: Vec<Token> = s.iter().map(|x| Token::new(*x, TokenKind::Emoticon)).collect();
            normalize_emoticons(&toks, lex()).iter().map(|t| t.surface().to_string()).collect::<Vec<_>>()
        };
        assert_eq!(norm(&[":((("]), [":("]);
        assert_eq!(norm(&[":)"]), [":)"]);
        assert_eq!(norm(&["\u{1F612}", "\u{2639}"]), [":|", ":("]);
        let hello = [Token::new("hello", TokenKind::Word)];
        assert_eq!(normalize_emoticons(&hello, lex()), hello);
    }

    #[test]
    fn normalize_utterance_examples() {
        let got = normalize_utterance("Yeah! :((( My plan is cancelled \u{1F612}\u{2639}", lex());
        assert_eq!(
            surfaces(&got),
            ["yeah", "!", ":(", "my", "plan", "is", "cancelled", ":|", ":("]
        );
        assert!(normalize_utterance("", lex()).is_empty());
        assert_eq!(surfaces(&normalize_utterance("HELLO", lex())), ["hello"]);
    }

    #[test]
    fn emoticon_class_examples() {
        let cls = |s: &str| emoticon_class(&Token::classify(s, lex()), lex());
        assert_eq!(cls(":)"), Some(EmoticonClass::Happy));
        assert_eq!(cls(":'("), Some(EmoticonClass::Sad));
        assert_eq!(cls(">:("), Some(EmoticonClass::Angry));
        assert_eq!(cls("hello"), None);
    }

    #[test]
    fn mouth_runs_collapse() {
        for e in lex().entries().iter().filter(|e| e.raw.is_ascii()) {
            let mouth = e.raw.chars().last().unwrap();
            for k in 1..5 {
                let raw = format!("{}{}", e.raw, mouth.to_string().repeat(k));
                let got = normalize_utterance(&raw, lex());
                assert_eq!(surfaces(&got), [e.canonical.as_str()], "{raw}");
            }
        }
    }

    #[test]
    fn normalized_emoticons_are_exactly_canonical_forms() {
        let got = normalize_utterance("ok :-))) \u{1F621} T_T :o wow", lex());
        for t in &got {
            assert_eq!(t.kind() == TokenKind::Emoticon, lex().is_canonical(t.surface()), "{t}");
        }
    }
}
