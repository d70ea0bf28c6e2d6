//! The 19-level ordinal readability scale and its collapsed variants.
//!
//! Levels are named after the Abjad letter order (`1-alif` ... `19-qaf`).
//! Coarser 7/5/3-level schemes and the grade/readership bands are data, loaded
//! from a [`LevelScheme`] file and checked against the structural invariants
//! (monotone, surjective, nested) before they can be used.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ConfigError, ParseLevelError};

/// Number of fine-grained levels.
pub const LEVEL_COUNT: u8 = 19;

const NAMES: [&str; LEVEL_COUNT as usize] = [
    "1-alif", "2-ba", "3-jim", "4-dal", "5-ha", "6-waw", "7-zay", "8-Ha", "9-Ta", "10-ya",
    "11-kaf", "12-lam", "13-mim", "14-nun", "15-sin", "16-ayn", "17-fa", "18-sad", "19-qaf",
];

/// A readability level on the 19-level scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(u8);

impl Level {
    pub const MIN: Level = Level(1);
    pub const MAX: Level = Level(LEVEL_COUNT);

    pub fn new(index: u8) -> Result<Self, ParseLevelError> {
        if (1..=LEVEL_COUNT).contains(&index) {
            Ok(Level(index))
        } else {
            Err(ParseLevelError::new(index.to_string()))
        }
    }

    /// Parses an integer or canonical name. Names are matched case-insensitively.
    pub fn parse(token: &str) -> Result<Self, ParseLevelError> {
        let trimmed = token.trim();
        if let Ok(n) = trimmed.parse::<i64>() {
            return u8::try_from(n)
                .ok()
                .and_then(|n| Level::new(n).ok())
                .ok_or_else(|| ParseLevelError::new(token));
        }
        NAMES
            .iter()
            .position(|name| name.eq_ignore_ascii_case(trimmed))
            .map(|i| Level(i as u8 + 1))
            .ok_or_else(|| ParseLevelError::new(token))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn name(self) -> &'static str {
        NAMES[self.0 as usize - 1]
    }

    pub fn all() -> impl DoubleEndedIterator<Item = Level> + ExactSizeIterator {
        (1..=LEVEL_COUNT).map(Level)
    }

    /// Absolute difference of the level indices.
    pub fn distance(self, other: Level) -> u8 {
        self.0.abs_diff(other.0)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = ParseLevelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Level::parse(s)
    }
}

impl TryFrom<u8> for Level {
    type Error = ParseLevelError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Level::new(value)
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Name(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(n) => Level::parse(&n.to_string()),
            Raw::Name(s) => Level::parse(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Distance between two levels, `|a - b|`.
pub fn level_distance(a: Level, b: Level) -> u8 {
    a.distance(b)
}

/// Label-space granularity: the full scale or one of its collapsed variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Granularity {
    G19,
    G7,
    G5,
    G3,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [
        Granularity::G19,
        Granularity::G7,
        Granularity::G5,
        Granularity::G3,
    ];

    /// Number of levels in this scheme.
    pub fn k(self) -> u8 {
        match self {
            Granularity::G19 => 19,
            Granularity::G7 => 7,
            Granularity::G5 => 5,
            Granularity::G3 => 3,
        }
    }

    pub fn from_k(k: u8) -> Option<Self> {
        match k {
            19 => Some(Granularity::G19),
            7 => Some(Granularity::G7),
            5 => Some(Granularity::G5),
            3 => Some(Granularity::G3),
            _ => None,
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.k())
    }
}

impl FromStr for Granularity {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<u8>()
            .ok()
            .and_then(Granularity::from_k)
            .ok_or_else(|| ConfigError::single(format!("unknown granularity {s:?}")))
    }
}

impl Serialize for Granularity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.k())
    }
}

impl<'de> Deserialize<'de> for Granularity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let k = u8::deserialize(deserializer)?;
        Granularity::from_k(k)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown granularity {k}")))
    }
}

/// Intended readership group of a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readership {
    Foundational,
    Advanced,
    Specialized,
}

impl Readership {
    pub const ALL: [Readership; 3] = [
        Readership::Foundational,
        Readership::Advanced,
        Readership::Specialized,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Readership::Foundational => "Foundational",
            Readership::Advanced => "Advanced",
            Readership::Specialized => "Specialized",
        }
    }
}

impl FromStr for Readership {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "foundational" => Ok(Readership::Foundational),
            "advanced" => Ok(Readership::Advanced),
            "specialized" | "specialised" => Ok(Readership::Specialized),
            _ => Err(format!("unknown readership {s:?}")),
        }
    }
}

/// School stage a level band corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grade {
    Kindergarten,
    School(u8),
    University,
    Postgraduate,
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grade::Kindergarten => f.write_str("KG"),
            Grade::School(n) => write!(f, "{n}"),
            Grade::University => f.write_str("University"),
            Grade::Postgraduate => f.write_str("Postgraduate"),
        }
    }
}

impl FromStr for Grade {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "kg" | "kindergarten" => return Ok(Grade::Kindergarten),
            "university" | "uni" => return Ok(Grade::University),
            "postgraduate" => return Ok(Grade::Postgraduate),
            _ => {}
        }
        match t.parse::<u8>() {
            Ok(n) if (1..=12).contains(&n) => Ok(Grade::School(n)),
            _ => Err(format!("unknown grade {s:?}")),
        }
    }
}

impl Serialize for Grade {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Grade {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A contiguous run of levels with its school grade and readership group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeBand {
    /// Inclusive `[first, last]` level indices.
    pub levels: [u8; 2],
    pub grade: Grade,
    pub readership: Readership,
}

impl GradeBand {
    pub fn contains(&self, level: Level) -> bool {
        (self.levels[0]..=self.levels[1]).contains(&level.index())
    }
}

#[derive(Debug, Deserialize)]
struct RawScheme {
    #[serde(default)]
    version: Option<u32>,
    granularity: std::collections::BTreeMap<String, Vec<u8>>,
    #[serde(default)]
    grade_band: Vec<GradeBand>,
}

/// Validated collapsing maps and grade bands.
///
/// Only constructible through [`LevelScheme::from_toml_str`] and friends, so
/// every instance satisfies the monotonicity, surjectivity and nesting checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelScheme {
    cuts7: Vec<u8>,
    cuts5: Vec<u8>,
    cuts3: Vec<u8>,
    bands: Vec<GradeBand>,
    lookup: [[u8; 4]; LEVEL_COUNT as usize],
}

pub const DEFAULT_SCHEME_TOML: &str = include_str!("../data/levels.toml");

impl LevelScheme {
    /// The scheme shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_toml_str(DEFAULT_SCHEME_TOML).expect("shipped level scheme is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::single(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawScheme =
            toml::from_str(text).map_err(|e| ConfigError::single(e.to_string()))?;
        let mut problems = Vec::new();
        if let Some(v) = raw.version {
            if v != 1 {
                problems.push(format!("unsupported scheme version {v}"));
            }
        }
        for key in raw.granularity.keys() {
            if !matches!(key.as_str(), "7" | "5" | "3") {
                problems.push(format!("unexpected granularity key {key:?}"));
            }
        }
        let mut take = |g: Granularity| -> Vec<u8> {
            let key = g.k().to_string();
            match raw.granularity.get(&key) {
                Some(cuts) => {
                    check_cuts(g, cuts, &mut problems);
                    cuts.clone()
                }
                None => {
                    problems.push(format!("missing cut points for granularity {key}"));
                    Vec::new()
                }
            }
        };
        let cuts7 = take(Granularity::G7);
        let cuts5 = take(Granularity::G5);
        let cuts3 = take(Granularity::G3);

        if !is_subset(&cuts5, &cuts7) {
            problems.push("5-level buckets are not unions of 7-level buckets".into());
        }
        if !is_subset(&cuts3, &cuts5) {
            problems.push("3-level buckets are not unions of 5-level buckets".into());
        }
        check_bands(&raw.grade_band, &mut problems);

        if !problems.is_empty() {
            return Err(ConfigError::new(problems));
        }

        let mut lookup = [[0u8; 4]; LEVEL_COUNT as usize];
        for level in Level::all() {
            let i = level.index();
            lookup[i as usize - 1] = [
                i,
                bucket_of(i, &cuts7),
                bucket_of(i, &cuts5),
                bucket_of(i, &cuts3),
            ];
        }
        // The one published anchor.
        let anchor = lookup[10];
        if anchor[1..] != [4, 2, 1] {
            return Err(ConfigError::single(format!(
                "level 11 must map to 4/2/1 (of 7/5/3), got {}/{}/{}",
                anchor[1], anchor[2], anchor[3]
            )));
        }

        Ok(LevelScheme {
            cuts7,
            cuts5,
            cuts3,
            bands: raw.grade_band,
            lookup,
        })
    }

    /// Bucket index of `level` under granularity `g` (identity for 19).
    pub fn collapse(&self, level: Level, g: Granularity) -> u8 {
        let row = &self.lookup[level.index() as usize - 1];
        match g {
            Granularity::G19 => row[0],
            Granularity::G7 => row[1],
            Granularity::G5 => row[2],
            Granularity::G3 => row[3],
        }
    }

    /// Collapses a whole series.
    pub fn collapse_all(&self, levels: &[Level], g: Granularity) -> Vec<u8> {
        levels.iter().map(|&l| self.collapse(l, g)).collect()
    }

    /// Upper-bound cut points for `g`; empty for 19.
    pub fn cut_points(&self, g: Granularity) -> &[u8] {
        match g {
            Granularity::G19 => &[],
            Granularity::G7 => &self.cuts7,
            Granularity::G5 => &self.cuts5,
            Granularity::G3 => &self.cuts3,
        }
    }

    pub fn grade_bands(&self) -> &[GradeBand] {
        &self.bands
    }

    pub fn band(&self, level: Level) -> Option<&GradeBand> {
        self.bands.iter().find(|b| b.contains(level))
    }
}

impl Default for LevelScheme {
    fn default() -> Self {
        Self::shipped()
    }
}

fn bucket_of(index: u8, cuts: &[u8]) -> u8 {
    1 + cuts.iter().filter(|&&c| c < index).count() as u8
}

fn is_subset(coarse: &[u8], fine: &[u8]) -> bool {
    coarse.iter().all(|c| fine.contains(c))
}

fn check_cuts(g: Granularity, cuts: &[u8], problems: &mut Vec<String>) {
    let expected = g.k() as usize - 1;
    if cuts.len() != expected {
        problems.push(format!(
            "granularity {} needs {expected} cut points, found {}",
            g.k(),
            cuts.len()
        ));
    }
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        problems.push(format!(
            "granularity {} cut points must be strictly ascending",
            g.k()
        ));
    }
    if cuts.iter().any(|&c| !(1..LEVEL_COUNT).contains(&c)) {
        problems.push(format!(
            "granularity {} cut points must lie in 1..=18",
            g.k()
        ));
    }
}

fn check_bands(bands: &[GradeBand], problems: &mut Vec<String>) {
    if bands.is_empty() {
        return;
    }
    let mut next = 1u8;
    for band in bands {
        let [lo, hi] = band.levels;
        if lo != next || hi < lo || hi > LEVEL_COUNT {
            problems.push(format!(
                "grade band {lo}..={hi} does not continue the partition at level {next}"
            ));
            return;
        }
        next = hi + 1;
        if band.readership == Readership::Foundational && band.grade > Grade::School(4) {
            problems.push(format!(
                "foundational band {lo}..={hi} extends beyond grade 4 (grade {})",
                band.grade
            ));
        }
    }
    if next != LEVEL_COUNT + 1 {
        problems.push(format!("grade bands stop at level {}", next - 1));
    }
    if bands.windows(2).any(|w| w[0].readership > w[1].readership) {
        problems.push("readership groups must not decrease with level".into());
    }
    if bands.windows(2).any(|w| w[0].grade > w[1].grade) {
        problems.push("grades must not decrease with level".into());
    }
}
