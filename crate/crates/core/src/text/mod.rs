//! Deterministic Arabic text processing: normalization, tokenization, word
//! counting, pausal syllabification and pattern-based feature detection.
//!
//! All entry points normalize their input to Unicode canonical composition
//! (NFC) first, so counts do not depend on how a source encoded hamza seats or
//! ordered combining marks.

mod detect;
mod syllable;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

pub use detect::{detect_features, Detector, DetectorKind, LetterPosition};
pub use syllable::{count_syllables, syllabify, Segment, Syllabification};

use crate::guidelines::Dimension;

pub(crate) const FATHATAN: char = '\u{064B}';
pub(crate) const DAMMATAN: char = '\u{064C}';
pub(crate) const KASRATAN: char = '\u{064D}';
pub(crate) const FATHA: char = '\u{064E}';
pub(crate) const DAMMA: char = '\u{064F}';
pub(crate) const KASRA: char = '\u{0650}';
pub(crate) const SHADDA: char = '\u{0651}';
pub(crate) const SUKUN: char = '\u{0652}';
pub(crate) const DAGGER_ALIF: char = '\u{0670}';
pub(crate) const TATWEEL: char = '\u{0640}';

/// True for the Arabic marks removed by [`strip_diacritics`]: fathatan through
/// sukun, plus the superscript (dagger) alif.
pub fn is_diacritic(c: char) -> bool {
    ('\u{064B}'..='\u{0652}').contains(&c) || c == DAGGER_ALIF
}

/// True for letters of the Arabic script blocks.
pub fn is_arabic_letter(c: char) -> bool {
    c.is_alphabetic()
        && matches!(c as u32,
            0x0600..=0x06FF | 0x0750..=0x077F | 0x08A0..=0x08FF | 0xFB50..=0xFDFF | 0xFE70..=0xFEFF)
        && !is_diacritic(c)
        && c != TATWEEL
}

/// Canonical composition (NFC).
pub fn normalize(text: &str) -> String {
    text.nfc().collect()
}

/// Removes Arabic diacritics; every other character is kept as-is after NFC.
pub fn strip_diacritics(text: &str) -> String {
    text.nfc().filter(|&c| !is_diacritic(c)).collect()
}

/// How much of a word carries vowel marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diacritization {
    /// Every letter's vocalization is determined by explicit marks or long-vowel letters.
    Full,
    Partial,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// NFC surface form.
    pub surface: String,
    /// Surface with diacritics removed.
    pub surface_bare: String,
    /// False for punctuation-only (or digit-only) tokens.
    pub is_word: bool,
    pub diacritization: Diacritization,
    /// Byte range of the token in the normalized input.
    pub start: usize,
    pub end: usize,
}

impl Token {
    fn new(normalized: &str, start: usize, end: usize) -> Self {
        let surface = normalized[start..end].to_string();
        let surface_bare: String = surface.chars().filter(|&c| !is_diacritic(c)).collect();
        let is_word = surface_bare.chars().any(char::is_alphabetic);
        let diacritization = if !is_word || !surface.chars().any(is_diacritic) {
            Diacritization::None
        } else if syllable::is_fully_vocalized(&surface) {
            Diacritization::Full
        } else {
            Diacritization::Partial
        };
        Token {
            surface,
            surface_bare,
            is_word,
            diacritization,
            start,
            end,
        }
    }
}

fn is_punctuation(c: char) -> bool {
    !c.is_whitespace()
        && !c.is_alphanumeric()
        && !is_diacritic(c)
        && c != TATWEEL
        && !is_combining_mark(c)
}

/// Splits on whitespace and separates runs of punctuation into their own
/// (non-word) tokens. Token spans index into [`normalize`]`(text)`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let normalized = normalize(text);
    let mut tokens = Vec::new();
    let mut current: Option<(usize, bool)> = None;
    for (i, c) in normalized.char_indices() {
        if c.is_whitespace() {
            if let Some((start, _)) = current.take() {
                tokens.push(Token::new(&normalized, start, i));
            }
            continue;
        }
        let punct = is_punctuation(c);
        match current {
            Some((_, kind)) if kind == punct => {}
            Some((start, _)) => {
                tokens.push(Token::new(&normalized, start, i));
                current = Some((i, punct));
            }
            None => current = Some((i, punct)),
        }
    }
    if let Some((start, _)) = current {
        tokens.push(Token::new(&normalized, start, normalized.len()));
    }
    tokens
}

/// Number of word tokens. Diacritics and punctuation never change the count.
pub fn count_words(text: &str) -> usize {
    tokenize(text).iter().filter(|t| t.is_word).count()
}

/// Features of a sentence relevant to the guideline rules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceFeatures {
    pub word_count: usize,
    /// Largest pausal syllable count among the words whose count is known.
    /// `None` when no word is fully vocalized.
    pub max_syllables: Option<u32>,
    /// Identifiers produced by the pattern detectors.
    #[serde(default)]
    pub auto_features: BTreeSet<String>,
    /// Identifiers asserted by an annotator, tagged with their dimension.
    #[serde(default)]
    pub asserted_features: BTreeMap<String, Dimension>,
}

impl SentenceFeatures {
    pub fn with_asserted(mut self, id: impl Into<String>, dimension: Dimension) -> Self {
        self.asserted_features.insert(id.into(), dimension);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_marks_only() {
        assert_eq!(strip_diacritics("أَرْنَبٌ"), "أرنب");
        assert_eq!(strip_diacritics(""), "");
        assert_eq!(strip_diacritics("abc"), "abc");
        assert_eq!(strip_diacritics("هٰذا، يا"), "هذا، يا");
    }

    #[test]
    fn strip_composes_hamza_seats() {
        // alif + combining hamza above composes to U+0623.
        assert_eq!(strip_diacritics("\u{0627}\u{0654}\u{064E}"), "\u{0623}");
    }

    #[test]
    fn tokenize_splits_punctuation() {
        let tokens = tokenize("أبي.. أبي..");
        let words: Vec<_> = tokens
            .iter()
            .filter(|t| t.is_word)
            .map(|t| t.surface.as_str())
            .collect();
        assert_eq!(words, ["أبي", "أبي"]);
        let punct: Vec<_> = tokens
            .iter()
            .filter(|t| !t.is_word)
            .map(|t| t.surface.as_str())
            .collect();
        assert_eq!(punct, ["..", ".."]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("غُرْفَةُ النَّوْمِ")
                .iter()
                .filter(|t| t.is_word)
                .count(),
            2
        );
    }

    #[test]
    fn token_spans_cover_input() {
        let text = "كانت الحديقة واسعة، تطل على شاطئ النيل،";
        let normalized = normalize(text);
        let rebuilt: String = tokenize(text)
            .iter()
            .map(|t| &normalized[t.start..t.end])
            .collect();
        let no_space: String = normalized.chars().filter(|c| !c.is_whitespace()).collect();
        assert_eq!(rebuilt, no_space);
    }

    #[test]
    fn word_counts() {
        assert_eq!(count_words("سُلوكي مَسْؤولِيَّتي"), 2);
        assert_eq!(count_words(""), 0);
        assert_eq!(count_words("كانت الحديقة واسعة، تطل على شاطئ النيل،"), 7);
        assert_eq!(count_words("هذه سلطة بدون خيار"), 4);
        assert_eq!(count_words("«مرحبا» - يا (صديقي)!"), 3);
    }

    #[test]
    fn digits_alone_are_not_words() {
        assert_eq!(count_words("عام 2024"), 1);
        assert_eq!(count_words("hello world"), 2);
    }

    #[test]
    fn diacritization_classes() {
        let class = |w: &str| tokenize(w)[0].diacritization;
        assert_eq!(class("أَرْنَبٌ"), Diacritization::Full);
        assert_eq!(class("مَسْؤولِيَّتي"), Diacritization::Full);
        assert_eq!(class("كتاب"), Diacritization::None);
        assert_eq!(class("مكْتب"), Diacritization::Partial);
    }
}
