//! Syllable parsing from the vowel skeleton of a vocalized word.
//!
//! A word is first grouped into letter units (a base letter plus its marks),
//! then each unit is resolved to consonant and vowel segments:
//!
//! * an explicit short vowel is a nucleus; followed by its matching bare
//!   long-vowel letter (fatha+alif/alif maqsura, damma+waw, kasra+ya) it is a
//!   single long nucleus;
//! * an unmarked letter directly before a bare long-vowel letter takes the
//!   matching long vowel;
//! * shadda doubles the consonant, sukun closes the syllable;
//! * the definite article's alif and lam are resolved by position;
//! * in pausal (waqf) reading the word-final case vowel or tanwin is dropped.
//!
//! A letter whose vocalization cannot be determined leaves the word
//! unresolved, and its syllable count unknown.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{
    is_arabic_letter, is_diacritic, Token, DAGGER_ALIF, DAMMA, DAMMATAN, FATHA, FATHATAN, KASRA,
    KASRATAN, SHADDA, SUKUN, TATWEEL,
};
use crate::error::AnalysisError;

const ALIF: char = '\u{0627}';
const ALIF_WASLA: char = '\u{0671}';
const ALIF_MADDA: char = '\u{0622}';
const ALIF_MAQSURA: char = '\u{0649}';
const WAW: char = '\u{0648}';
const YA: char = '\u{064A}';
const LAM: char = '\u{0644}';

/// One element of the consonant/vowel skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    Consonant,
    Short,
    Long,
}

impl Segment {
    fn symbol(self) -> &'static str {
        match self {
            Segment::Consonant => "C",
            Segment::Short => "V",
            Segment::Long => "VV",
        }
    }

    fn is_nucleus(self) -> bool {
        !matches!(self, Segment::Consonant)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syllabification {
    pub segments: Vec<Segment>,
    pub syllables: Vec<Vec<Segment>>,
}

impl Syllabification {
    pub fn count(&self) -> u32 {
        self.syllables.len() as u32
    }

    /// The skeleton as a string of `C`/`V` symbols, long vowels as `VV`.
    pub fn skeleton(&self) -> String {
        render(&self.segments)
    }

    pub fn syllable_strings(&self) -> Vec<String> {
        self.syllables.iter().map(|s| render(s)).collect()
    }
}

fn render(segments: &[Segment]) -> String {
    segments.iter().map(|s| s.symbol()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Vowel {
    A,
    U,
    I,
}

#[derive(Debug, Clone)]
struct Unit {
    base: char,
    pos: usize,
    vowel: Option<Vowel>,
    tanwin: bool,
    shadda: bool,
    sukun: bool,
    dagger: bool,
}

impl Unit {
    fn new(base: char, pos: usize) -> Self {
        Unit {
            base,
            pos,
            vowel: None,
            tanwin: false,
            shadda: false,
            sukun: false,
            dagger: false,
        }
    }

    fn is_bare(&self) -> bool {
        self.vowel.is_none() && !self.shadda && !self.sukun && !self.dagger
    }

    fn is_bare_letter(&self, letters: &[char]) -> bool {
        self.is_bare() && letters.contains(&self.base)
    }
}

enum Units {
    Arabic(Vec<Unit>),
    /// Contains digits or letters of another script.
    Foreign,
}

fn parse_units(word: &str) -> Result<Units, AnalysisError> {
    let err = |position: usize, reason: &str| AnalysisError {
        word: word.to_string(),
        position,
        reason: reason.to_string(),
    };
    let mut units: Vec<Unit> = Vec::new();
    for (pos, c) in word.chars().enumerate() {
        if c == TATWEEL {
            continue;
        }
        if is_diacritic(c) {
            let Some(unit) = units.last_mut() else {
                return Err(err(pos, "diacritic without a base letter"));
            };
            match c {
                FATHA | DAMMA | KASRA | FATHATAN | DAMMATAN | KASRATAN => {
                    if unit.vowel.is_some() {
                        return Err(err(pos, "two vowel marks on one letter"));
                    }
                    if unit.sukun {
                        return Err(err(pos, "vowel mark combined with sukun"));
                    }
                    unit.vowel = Some(match c {
                        FATHA | FATHATAN => Vowel::A,
                        DAMMA | DAMMATAN => Vowel::U,
                        _ => Vowel::I,
                    });
                    unit.tanwin = matches!(c, FATHATAN | DAMMATAN | KASRATAN);
                }
                SHADDA => {
                    if unit.shadda {
                        return Err(err(pos, "repeated shadda"));
                    }
                    if unit.sukun {
                        return Err(err(pos, "shadda combined with sukun"));
                    }
                    unit.shadda = true;
                }
                SUKUN => {
                    if unit.sukun {
                        return Err(err(pos, "repeated sukun"));
                    }
                    if unit.vowel.is_some() || unit.shadda {
                        return Err(err(pos, "sukun combined with a vowel or shadda"));
                    }
                    unit.sukun = true;
                }
                DAGGER_ALIF => unit.dagger = true,
                _ => unreachable!("covered by is_diacritic"),
            }
            continue;
        }
        if !is_arabic_letter(c) {
            return Ok(Units::Foreign);
        }
        units.push(Unit::new(c, pos));
    }
    Ok(Units::Arabic(units))
}

struct Resolved {
    segments: Vec<Segment>,
    unresolved: Option<usize>,
}

fn is_proclitic(u: &Unit) -> bool {
    matches!(u.base, '\u{0628}' | '\u{0648}' | '\u{0641}' | '\u{0643}') && u.vowel.is_some()
}

fn is_article_alif(units: &[Unit], i: usize) -> bool {
    let u = &units[i];
    (u.base == ALIF || u.base == ALIF_WASLA)
        && u.is_bare()
        && units.get(i + 1).is_some_and(|n| n.base == LAM)
        && (i == 0 || (i == 1 && is_proclitic(&units[0])))
}

fn is_article_lam(units: &[Unit], i: usize) -> bool {
    i >= 1 && units[i].base == LAM && is_article_alif(units, i - 1)
}

fn resolve(units: &[Unit], waqf: bool) -> Resolved {
    let mut units = units.to_vec();
    let n = units.len();
    if n == 0 {
        return Resolved {
            segments: Vec::new(),
            unresolved: None,
        };
    }
    let last = n - 1;

    // Pausal form: drop the final case vowel. A tanwin fath carried before a
    // final seat letter becomes a plain fatha, read long.
    if waqf {
        let seat_after_tanwin = n >= 2
            && units[last].is_bare_letter(&[ALIF, ALIF_MAQSURA])
            && units[last - 1].tanwin
            && units[last - 1].vowel == Some(Vowel::A);
        if seat_after_tanwin {
            units[last - 1].tanwin = false;
        } else {
            units[last].vowel = None;
            units[last].tanwin = false;
        }
    }

    let mut segments = Vec::with_capacity(n * 2);
    let mut unresolved = None;
    let mut last_vowel: Option<(Segment, Vowel)> = None;
    let mut i = 0;
    while i < n {
        let u = &units[i];

        if u.base == ALIF_WASLA || (u.base == ALIF && u.is_bare()) {
            if i == 0 {
                // Word-initial connecting alif, pronounced with a glottal onset.
                segments.extend([Segment::Consonant, Segment::Short]);
                last_vowel = Some((Segment::Short, Vowel::A));
            } else if is_article_alif(&units, i) || u.base == ALIF_WASLA {
                // Silent after a proclitic.
            } else if i == last && units[i - 1].base == WAW {
                // Silent alif after a plural waw.
            } else {
                unresolved.get_or_insert(u.pos);
            }
            i += 1;
            continue;
        }
        if u.base == ALIF_MADDA {
            segments.extend([Segment::Consonant, Segment::Long]);
            last_vowel = Some((Segment::Long, Vowel::A));
            i += 1;
            continue;
        }
        if u.base == ALIF_MAQSURA && u.is_bare() {
            unresolved.get_or_insert(u.pos);
            i += 1;
            continue;
        }
        if is_article_lam(&units, i) && u.is_bare() {
            let assimilated = units.get(i + 1).is_some_and(|next| next.shadda);
            if !assimilated {
                segments.push(Segment::Consonant);
            }
            last_vowel = None;
            i += 1;
            continue;
        }
        if (u.base == WAW || u.base == YA)
            && u.is_bare()
            && matches!(last_vowel, Some((Segment::Short, Vowel::A)))
        {
            // Diphthong glide closing the syllable.
            segments.push(Segment::Consonant);
            last_vowel = None;
            i += 1;
            continue;
        }

        segments.push(Segment::Consonant);
        if u.shadda && i > 0 {
            segments.push(Segment::Consonant);
        }
        let next = units.get(i + 1);
        let next_is = |letters: &[char]| next.is_some_and(|nx| nx.is_bare_letter(letters));
        let mut consumed = 0;
        let nucleus = if u.sukun {
            None
        } else if u.tanwin {
            let v = u.vowel.expect("tanwin implies a vowel");
            segments.push(Segment::Short);
            segments.push(Segment::Consonant);
            if v == Vowel::A && next_is(&[ALIF, ALIF_MAQSURA]) && i + 1 == last {
                consumed = 1;
            }
            last_vowel = None;
            i += 1 + consumed;
            continue;
        } else if u.dagger && matches!(u.vowel, None | Some(Vowel::A)) {
            Some((Segment::Long, Vowel::A))
        } else {
            match u.vowel {
                Some(Vowel::A) if next_is(&[ALIF, ALIF_MAQSURA]) => {
                    consumed = 1;
                    Some((Segment::Long, Vowel::A))
                }
                Some(Vowel::U) if next_is(&[WAW]) => {
                    consumed = 1;
                    Some((Segment::Long, Vowel::U))
                }
                Some(Vowel::I) if next_is(&[YA]) => {
                    consumed = 1;
                    Some((Segment::Long, Vowel::I))
                }
                Some(v) => Some((Segment::Short, v)),
                None if next_is(&[ALIF, ALIF_MAQSURA]) => {
                    consumed = 1;
                    Some((Segment::Long, Vowel::A))
                }
                None if next_is(&[WAW]) => {
                    consumed = 1;
                    Some((Segment::Long, Vowel::U))
                }
                None if next_is(&[YA]) => {
                    consumed = 1;
                    Some((Segment::Long, Vowel::I))
                }
                None if i == last => None,
                None => {
                    unresolved.get_or_insert(u.pos);
                    None
                }
            }
        };
        if let Some((seg, _)) = nucleus {
            segments.push(seg);
        }
        last_vowel = nucleus;
        i += 1 + consumed;
    }
    Resolved {
        segments,
        unresolved,
    }
}

/// Groups a skeleton into syllables: one onset consonant per nucleus, with
/// remaining consonants closing the preceding syllable.
fn group(segments: &[Segment]) -> Vec<Vec<Segment>> {
    let nuclei: Vec<usize> = segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_nucleus())
        .map(|(i, _)| i)
        .collect();
    if nuclei.is_empty() {
        return Vec::new();
    }
    // Syllable k starts at its onset (the consonant right before the nucleus,
    // when present); the first syllable also absorbs any leading consonants.
    let mut starts: Vec<usize> = nuclei
        .iter()
        .map(|&p| {
            if p > 0 && segments[p - 1] == Segment::Consonant {
                p - 1
            } else {
                p
            }
        })
        .collect();
    starts[0] = 0;
    let mut syllables = Vec::with_capacity(starts.len());
    for (k, &start) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(segments.len());
        syllables.push(segments[start..end].to_vec());
    }
    syllables
}

/// Parses a word into syllables.
///
/// Returns `Ok(None)` when the word is not fully vocalized Arabic (no marks,
/// an undeterminable letter, or foreign characters).
pub fn syllabify(word: &str, waqf: bool) -> Result<Option<Syllabification>, AnalysisError> {
    let word: String = word.nfc().collect();
    if !word.chars().any(is_diacritic) {
        return Ok(None);
    }
    let units = match parse_units(&word)? {
        Units::Arabic(units) if !units.is_empty() => units,
        _ => return Ok(None),
    };
    let mut resolved = resolve(&units, waqf);
    if resolved.unresolved.is_some() {
        return Ok(None);
    }
    let mut syllables = group(&resolved.segments);
    if syllables.is_empty() && waqf {
        // A lone CV particle keeps its vowel in pause.
        resolved = resolve(&units, false);
        syllables = group(&resolved.segments);
    }
    if syllables.is_empty() {
        return Ok(None);
    }
    Ok(Some(Syllabification {
        segments: resolved.segments,
        syllables,
    }))
}

/// Syllable count of a word token, `None` when its vocalization is partial
/// or absent.
pub fn count_syllables(word: &Token, waqf: bool) -> Result<Option<u32>, AnalysisError> {
    if !word.is_word {
        return Ok(None);
    }
    Ok(syllabify(&word.surface, waqf)?.map(|s| s.count()))
}

pub(crate) fn is_fully_vocalized(surface: &str) -> bool {
    matches!(syllabify(surface, false), Ok(Some(_)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn count(word: &str, waqf: bool) -> Option<u32> {
        let token = tokenize(word).remove(0);
        count_syllables(&token, waqf).unwrap()
    }

    fn sylls(word: &str, waqf: bool) -> Vec<String> {
        syllabify(word, waqf).unwrap().unwrap().syllable_strings()
    }

    #[test]
    fn rabbit_in_pause_has_two_syllables() {
        assert_eq!(count("أَرْنَبٌ", true), Some(2));
        assert_eq!(sylls("أَرْنَبٌ", true), ["CVC", "CVC"]);
        // Read with its case ending: ar-na-bun.
        assert_eq!(count("أَرْنَبٌ", false), Some(3));
    }

    #[test]
    fn responsibility_has_five_syllables() {
        assert_eq!(count("مَسْؤولِيَّتي", true), Some(5));
        assert_eq!(
            sylls("مَسْؤولِيَّتي", true),
            ["CVC", "CVV", "CVC", "CV", "CVV"]
        );
    }

    #[test]
    fn undiacritized_is_unknown() {
        assert_eq!(count("كتاب", true), None);
        assert_eq!(count("مسؤوليتي", true), None);
        assert_eq!(count("مكْتب", true), None);
    }

    #[test]
    fn article_and_sun_letters() {
        assert_eq!(count("النَّوْمِ", true), Some(2));
        assert_eq!(count("الْأُمِّ", true), Some(2));
        assert_eq!(count("غُرْفَةُ", true), Some(2));
        assert_eq!(count("كُرَة", true), Some(2));
        assert_eq!(count("احْتِضانُ", true), Some(3));
        assert_eq!(count("بِالْكِتَابِ", true), Some(3));
    }

    #[test]
    fn tanwin_fath_with_seat_is_long_in_pause() {
        assert_eq!(sylls("كِتَابًا", true), ["CV", "CVV", "CVV"]);
        assert_eq!(sylls("كِتَابًا", false), ["CV", "CVV", "CVC"]);
    }

    #[test]
    fn dagger_alif_and_diphthongs() {
        assert_eq!(count("هٰذا", true), Some(2));
        assert_eq!(sylls("يَوْم", true), ["CVCC"]);
        assert_eq!(sylls("بَيت", true), ["CVCC"]);
    }

    #[test]
    fn malformed_sequences_report_position() {
        let err = syllabify("كَُتب", true).unwrap_err();
        assert_eq!(err.position, 2);
        assert!(err.reason.contains("two vowel marks"));
        let err = syllabify("َكتب", true).unwrap_err();
        assert_eq!(err.position, 0);
        assert!(syllabify("كْـَ", true).is_err());
    }

    #[test]
    fn foreign_words_are_unknown() {
        assert_eq!(syllabify("hello", true).unwrap(), None);
        assert!(syllabify("َa", true).is_err());
    }

    #[test]
    fn lone_particle_keeps_its_vowel() {
        assert_eq!(sylls("لِ", true), ["CV"]);
        assert_eq!(syllabify("كْ", true).unwrap(), None);
    }
}
