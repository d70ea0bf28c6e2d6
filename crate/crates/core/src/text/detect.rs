//! Pattern detectors for automatically observable sentence features.
//!
//! Detectors are plain data (usually loaded from the guideline profile), so a
//! new affix or letter pattern can be added without touching the engine.

use serde::{Deserialize, Serialize};

use super::{count_syllables, is_arabic_letter, tokenize, SentenceFeatures};

/// Where in a word a letter pattern must occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LetterPosition {
    Initial,
    Medial,
    Final,
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorKind {
    /// A word ending in one of `suffixes` whose remaining stem has at least
    /// `min_stem_letters` letters.
    Suffix {
        suffixes: Vec<String>,
        #[serde(default = "default_min_stem")]
        min_stem_letters: usize,
        /// Words starting with any of these are skipped (e.g. the article).
        #[serde(default)]
        exclude_prefixes: Vec<String>,
        /// Exact bare forms that never match.
        #[serde(default)]
        exclude_words: Vec<String>,
    },
    /// Any of `letters` occurring at `position` in a word.
    Letters {
        letters: String,
        position: LetterPosition,
    },
    /// A word containing letters outside the Arabic script.
    NonArabicScript,
    /// Any digit, Western or Arabic-Indic.
    Digits,
}

fn default_min_stem() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detector {
    pub id: String,
    #[serde(flatten)]
    pub kind: DetectorKind,
}

impl Detector {
    fn matches_word(&self, bare: &str) -> bool {
        match &self.kind {
            DetectorKind::Suffix {
                suffixes,
                min_stem_letters,
                exclude_prefixes,
                exclude_words,
            } => {
                if exclude_words.iter().any(|w| w == bare)
                    || exclude_prefixes.iter().any(|p| bare.starts_with(p.as_str()))
                {
                    return false;
                }
                suffixes.iter().any(|suffix| {
                    bare.strip_suffix(suffix.as_str()).is_some_and(|stem| {
                        stem.chars().filter(|&c| is_arabic_letter(c)).count() >= *min_stem_letters
                    })
                })
            }
            DetectorKind::Letters { letters, position } => {
                let chars: Vec<char> = bare.chars().filter(|c| c.is_alphabetic()).collect();
                let n = chars.len();
                chars.iter().enumerate().any(|(i, c)| {
                    letters.contains(*c)
                        && match position {
                            LetterPosition::Initial => i == 0,
                            LetterPosition::Medial => i > 0 && i + 1 < n,
                            LetterPosition::Final => i + 1 == n,
                            LetterPosition::Any => true,
                        }
                })
            }
            DetectorKind::NonArabicScript => bare
                .chars()
                .any(|c| c.is_alphabetic() && !is_arabic_letter(c)),
            DetectorKind::Digits => bare.chars().any(|c| c.is_numeric()),
        }
    }
}

/// Fills word count, maximum pausal syllable count and detector hits.
/// Asserted features are left empty.
pub fn detect_features(sentence: &str, detectors: &[Detector]) -> SentenceFeatures {
    let tokens = tokenize(sentence);
    let mut features = SentenceFeatures::default();
    for token in &tokens {
        for detector in detectors {
            // Digits live in non-word tokens too.
            let applies = token.is_word || matches!(detector.kind, DetectorKind::Digits);
            if applies && detector.matches_word(&token.surface_bare) {
                features.auto_features.insert(detector.id.clone());
            }
        }
        if !token.is_word {
            continue;
        }
        features.word_count += 1;
        // Malformed vocalization counts as unknown here; `count_syllables`
        // reports the position when called directly.
        if let Ok(Some(n)) = count_syllables(token, true) {
            features.max_syllables = Some(features.max_syllables.map_or(n, |m| m.max(n)));
        }
    }
    features
}
