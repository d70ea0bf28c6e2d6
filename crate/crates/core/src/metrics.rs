//! Ordinal agreement metrics: accuracy at each granularity, adjacent accuracy,
//! average distance, quadratic weighted kappa, and confusion matrices.
//!
//! Everything in a [`MetricReport`] is a function of the 19×19 confusion
//! matrix, so micro averaging is just summing matrices.

use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::level::{Granularity, Level, LevelScheme, LEVEL_COUNT};
use crate::par::{mean, pairwise_sum};

/// An ordered list of labels from one annotator or system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSeries {
    #[serde(default)]
    pub source: Option<String>,
    pub labels: Vec<Level>,
}

impl LabelSeries {
    pub fn new(labels: Vec<Level>) -> Self {
        Self {
            source: None,
            labels,
        }
    }
}

fn check_pair<T>(reference: &[T], hypothesis: &[T]) -> Result<(), MetricError> {
    if reference.len() != hypothesis.len() {
        return Err(MetricError::LengthMismatch {
            reference: reference.len(),
            hypothesis: hypothesis.len(),
        });
    }
    if reference.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// K×K count matrix, reference on rows and hypothesis on columns. Labels
/// are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: u8,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: u8) -> Self {
        assert!(k >= 1, "confusion matrix needs at least one label");
        Self {
            k,
            counts: vec![0; k as usize * k as usize],
        }
    }

    /// Counts from two series of labels in `1..=k`.
    pub fn from_labels(reference: &[u8], hypothesis: &[u8], k: u8) -> Result<Self, MetricError> {
        check_pair(reference, hypothesis)?;
        let mut m = Self::zeros(k);
        for (&r, &h) in reference.iter().zip(hypothesis) {
            for label in [r, h] {
                if label == 0 || label > k {
                    return Err(MetricError::LabelOutOfRange { label, k });
                }
            }
            let i = m.index(r, h);
            m.counts[i] += 1;
        }
        Ok(m)
    }

    /// 19×19 matrix over fine-grained levels.
    pub fn from_levels(reference: &[Level], hypothesis: &[Level]) -> Result<Self, MetricError> {
        check_pair(reference, hypothesis)?;
        let mut m = Self::zeros(LEVEL_COUNT);
        for (r, h) in reference.iter().zip(hypothesis) {
            let i = m.index(r.index(), h.index());
            m.counts[i] += 1;
        }
        Ok(m)
    }

    fn index(&self, r: u8, h: u8) -> usize {
        (r as usize - 1) * self.k as usize + (h as usize - 1)
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn get(&self, r: u8, h: u8) -> u64 {
        self.counts[self.index(r, h)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts
            .chunks(self.k as usize)
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        let k = self.k as usize;
        (0..k)
            .map(|j| (0..k).map(|i| self.counts[i * k + j]).sum())
            .collect()
    }

    /// Adds another matrix of the same size.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.k, other.k, "cannot merge matrices of different sizes");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Re-buckets a 19×19 matrix under a coarser granularity.
    pub fn collapse(&self, g: Granularity, scheme: &LevelScheme) -> ConfusionMatrix {
        assert_eq!(self.k, LEVEL_COUNT, "only 19-level matrices can be collapsed");
        if g == Granularity::G19 {
            return self.clone();
        }
        let mut out = ConfusionMatrix::zeros(g.k());
        for r in Level::all() {
            for h in Level::all() {
                let c = self.get(r.index(), h.index());
                if c > 0 {
                    let i = out.index(scheme.collapse(r, g), scheme.collapse(h, g));
                    out.counts[i] += c;
                }
            }
        }
        out
    }

    /// Rows of counts, for rendering.
    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.k as usize)
            .map(<[u64]>::to_vec)
            .collect()
    }

    /// Cell (i, j) becomes `2·m_ij / (row_i + col_j)`, or 0 when that
    /// denominator is 0. The diagonal is the per-label F-score.
    pub fn f_normalize(&self) -> Vec<Vec<f64>> {
        let rows = self.row_totals();
        let cols = self.col_totals();
        let k = self.k as usize;
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let denom = rows[i] + cols[j];
                        if denom == 0 {
                            0.0
                        } else {
                            2.0 * self.counts[i * k + j] as f64 / denom as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn weighted_sum(&self, max_gap: u64) -> f64 {
        let k = self.k as usize;
        let total: u64 = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|&(i, j)| (i as i64 - j as i64).unsigned_abs() <= max_gap)
            .map(|(i, j)| self.counts[i * k + j])
            .sum();
        total as f64
    }

    /// Fraction of exact matches.
    pub fn accuracy(&self) -> f64 {
        self.weighted_sum(0) / self.total() as f64
    }

    /// Fraction of pairs at most one label apart.
    pub fn adjacent_accuracy(&self) -> f64 {
        self.weighted_sum(1) / self.total() as f64
    }

    /// Mean absolute label difference.
    pub fn mean_distance(&self) -> f64 {
        let k = self.k as usize;
        let mut weighted: u64 = 0;
        for i in 0..k {
            for j in 0..k {
                weighted += (i.abs_diff(j) as u64) * self.counts[i * k + j];
            }
        }
        weighted as f64 / self.total() as f64
    }

    /// Quadratic weighted kappa: `1 − Σw·O / Σw·E` with
    /// `w_ij = (i−j)²/(K−1)²` and `E` the outer product of the marginals
    /// scaled to the total count.
    pub fn qwk(&self) -> Qwk {
        let k = self.k as usize;
        let n = self.total() as f64;
        let rows = self.row_totals();
        let cols = self.col_totals();
        let scale = ((k.max(2) - 1) * (k.max(2) - 1)) as f64;
        let mut observed = Vec::with_capacity(k * k);
        let mut expected = Vec::with_capacity(k * k);
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                let w = (i.abs_diff(j) * i.abs_diff(j)) as f64 / scale;
                observed.push(w * self.counts[i * k + j] as f64);
                expected.push(w * r as f64 * c as f64 / n);
            }
        }
        let num = pairwise_sum(&observed);
        let den = pairwise_sum(&expected);
        if den == 0.0 {
            Qwk {
                value: if num == 0.0 { 1.0 } else { 0.0 },
                degenerate: true,
            }
        } else {
            Qwk {
                value: 1.0 - num / den,
                degenerate: false,
            }
        }
    }
}

/// A kappa value; `degenerate` marks zero expected weighted disagreement,
/// where the ratio is undefined and the value is set by convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Qwk {
    pub value: f64,
    pub degenerate: bool,
}

/// Fraction of positions whose labels agree after collapsing to `g`.
pub fn accuracy(
    reference: &[Level],
    hypothesis: &[Level],
    g: Granularity,
    scheme: &LevelScheme,
) -> Result<f64, MetricError> {
    check_pair(reference, hypothesis)?;
    let hits = reference
        .iter()
        .zip(hypothesis)
        .filter(|(&r, &h)| scheme.collapse(r, g) == scheme.collapse(h, g))
        .count();
    Ok(hits as f64 / reference.len() as f64)
}

/// Fraction of positions at most one level apart on the 19-level scale.
pub fn adjacent_accuracy(reference: &[Level], hypothesis: &[Level]) -> Result<f64, MetricError> {
    check_pair(reference, hypothesis)?;
    let hits = reference
        .iter()
        .zip(hypothesis)
        .filter(|(r, h)| r.distance(**h) <= 1)
        .count();
    Ok(hits as f64 / reference.len() as f64)
}

/// Average distance and its share of the label range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub distance: f64,
    /// `distance / K`.
    pub relative: f64,
}

/// Distance relative to the number of levels.
pub fn relative_to_range(distance: f64, g: Granularity) -> f64 {
    distance / g.k() as f64
}

pub fn avg_distance(
    reference: &[Level],
    hypothesis: &[Level],
    g: Granularity,
    scheme: &LevelScheme,
) -> Result<Distance, MetricError> {
    check_pair(reference, hypothesis)?;
    let total: u64 = reference
        .iter()
        .zip(hypothesis)
        .map(|(&r, &h)| scheme.collapse(r, g).abs_diff(scheme.collapse(h, g)) as u64)
        .sum();
    let distance = total as f64 / reference.len() as f64;
    Ok(Distance {
        distance,
        relative: relative_to_range(distance, g),
    })
}

pub fn qwk(
    reference: &[Level],
    hypothesis: &[Level],
    g: Granularity,
    scheme: &LevelScheme,
) -> Result<Qwk, MetricError> {
    let m = ConfusionMatrix::from_labels(
        &scheme.collapse_all(reference, g),
        &scheme.collapse_all(hypothesis, g),
        g.k(),
    )?;
    Ok(m.qwk())
}

/// Counts matrix at granularity `g`.
pub fn confusion(
    reference: &[Level],
    hypothesis: &[Level],
    g: Granularity,
    scheme: &LevelScheme,
) -> Result<ConfusionMatrix, MetricError> {
    ConfusionMatrix::from_labels(
        &scheme.collapse_all(reference, g),
        &scheme.collapse_all(hypothesis, g),
        g.k(),
    )
}

/// The evaluation bundle: accuracy at every granularity, adjacent accuracy,
/// distance and QWK on the 19-level scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Number of compared pairs (for a macro average, the total over batches).
    pub n: usize,
    pub acc19: f64,
    pub acc7: f64,
    pub acc5: f64,
    pub acc3: f64,
    pub adjacent_acc19: f64,
    pub distance: f64,
    pub distance_relative: f64,
    pub qwk: f64,
    /// Set when any contributing QWK was degenerate.
    #[serde(default)]
    pub qwk_degenerate: bool,
}

impl MetricReport {
    pub fn compute(
        reference: &[Level],
        hypothesis: &[Level],
        scheme: &LevelScheme,
    ) -> Result<Self, MetricError> {
        Ok(Self::from_confusion(
            &ConfusionMatrix::from_levels(reference, hypothesis)?,
            scheme,
        ))
    }

    /// Report from a 19×19 matrix.
    ///
    /// # Panics
    /// If the matrix is not 19×19 or is empty.
    pub fn from_confusion(m: &ConfusionMatrix, scheme: &LevelScheme) -> Self {
        assert!(m.total() > 0, "empty confusion matrix");
        let acc = |g| m.collapse(g, scheme).accuracy();
        let distance = m.mean_distance();
        let qwk = m.qwk();
        MetricReport {
            n: m.total() as usize,
            acc19: m.accuracy(),
            acc7: acc(Granularity::G7),
            acc5: acc(Granularity::G5),
            acc3: acc(Granularity::G3),
            adjacent_acc19: m.adjacent_accuracy(),
            distance,
            distance_relative: relative_to_range(distance, Granularity::G19),
            qwk: qwk.value,
            qwk_degenerate: qwk.degenerate,
        }
    }

    /// Field-wise unweighted mean.
    pub fn macro_mean(reports: &[MetricReport]) -> Result<Self, MetricError> {
        if reports.is_empty() {
            return Err(MetricError::NoBatches);
        }
        let field = |f: fn(&MetricReport) -> f64| {
            let v: Vec<f64> = reports.iter().map(f).collect();
            mean(&v).expect("nonempty")
        };
        Ok(MetricReport {
            n: reports.iter().map(|r| r.n).sum(),
            acc19: field(|r| r.acc19),
            acc7: field(|r| r.acc7),
            acc5: field(|r| r.acc5),
            acc3: field(|r| r.acc3),
            adjacent_acc19: field(|r| r.adjacent_acc19),
            distance: field(|r| r.distance),
            distance_relative: field(|r| r.distance_relative),
            qwk: field(|r| r.qwk),
            qwk_degenerate: reports.iter().any(|r| r.qwk_degenerate),
        })
    }

    pub const TABLE_HEADER: [&'static str; 8] = [
        "Distance", "Acc19", "±1 Acc19", "QWK", "Acc7", "Acc5", "Acc3", "N",
    ];

    /// Cells in [`Self::TABLE_HEADER`] order.
    pub fn table_cells(&self) -> [String; 8] {
        [
            format!("{:.2}", self.distance),
            pct(self.acc19),
            pct(self.adjacent_acc19),
            pct(self.qwk),
            pct(self.acc7),
            pct(self.acc5),
            pct(self.acc3),
            self.n.to_string(),
        ]
    }
}

pub(crate) fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

/// Per-granularity agreement row: distance, its share of the range,
/// accuracy, adjacent accuracy and QWK at that granularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GranularityReport {
    pub granularity: Granularity,
    pub distance: f64,
    pub distance_relative: f64,
    pub accuracy: f64,
    pub adjacent_accuracy: f64,
    pub qwk: f64,
}

/// One row per granularity (19, 7, 5, 3) from a 19×19 matrix.
pub fn granularity_table(m: &ConfusionMatrix, scheme: &LevelScheme) -> Vec<GranularityReport> {
    Granularity::ALL
        .iter()
        .map(|&g| {
            let c = m.collapse(g, scheme);
            let distance = c.mean_distance();
            GranularityReport {
                granularity: g,
                distance,
                distance_relative: relative_to_range(distance, g),
                accuracy: c.accuracy(),
                adjacent_accuracy: c.adjacent_accuracy(),
                qwk: c.qwk().value,
            }
        })
        .collect()
}

/// Macro: mean of per-batch reports. Micro: one report over all pooled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Macro,
    Micro,
}

/// Aggregates `(reference, hypothesis)` batches.
pub fn aggregate(
    batches: &[(Vec<Level>, Vec<Level>)],
    mode: Averaging,
    scheme: &LevelScheme,
) -> Result<MetricReport, MetricError> {
    if batches.is_empty() {
        return Err(MetricError::NoBatches);
    }
    let matrices = batches
        .iter()
        .map(|(r, h)| ConfusionMatrix::from_levels(r, h))
        .collect::<Result<Vec<_>, _>>()?;
    aggregate_matrices(&matrices, mode, scheme)
}

/// As [`aggregate`], over precomputed 19×19 matrices.
pub fn aggregate_matrices(
    matrices: &[ConfusionMatrix],
    mode: Averaging,
    scheme: &LevelScheme,
) -> Result<MetricReport, MetricError> {
    if matrices.is_empty() {
        return Err(MetricError::NoBatches);
    }
    if matrices.iter().any(|m| m.total() == 0) {
        return Err(MetricError::Empty);
    }
    match mode {
        Averaging::Macro => {
            let reports: Vec<_> = matrices
                .iter()
                .map(|m| MetricReport::from_confusion(m, scheme))
                .collect();
            MetricReport::macro_mean(&reports)
        }
        Averaging::Micro => {
            let mut pooled = ConfusionMatrix::zeros(LEVEL_COUNT);
            for m in matrices {
                pooled.merge(m);
            }
            Ok(MetricReport::from_confusion(&pooled, scheme))
        }
    }
}
