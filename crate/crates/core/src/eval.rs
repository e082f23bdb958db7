//! Evaluation against held-out interventions.
//!
//! The ground-truth score of a pair `(i, j)` is the absolute deviation of gene
//! `j` in the experiment knocking out gene `i`, standardized by the mean and
//! standard deviation of `j` over observational samples. Thresholding the
//! scores at a prevalence gives binary labels; a ranking of pairs by
//! prediction count is then summarized by its ROC curve and compared with the
//! band of curves a random ranking produces.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::data::ExpressionTable;
use crate::error::{Error, Result};
use crate::stability::PredictionScores;
use crate::stats;
use crate::Pair;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    scores: BTreeMap<Pair, f64>,
    source: String,
}

impl GroundTruth {
    pub fn from_scores(scores: BTreeMap<Pair, f64>, source: impl Into<String>) -> Result<Self> {
        for (&(i, j), &s) in &scores {
            if i == j {
                return Err(Error::domain(format!("self pair ({i}, {j})")));
            }
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::domain(format!("invalid score {s} for ({i}, {j})")));
            }
        }
        Ok(GroundTruth { scores, source: source.into() })
    }

    pub fn scores(&self) -> &BTreeMap<Pair, f64> {
        &self.scores
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores of the pairs whose intervention target is in `targets`.
    pub fn restrict(&self, targets: &BTreeSet<usize>) -> GroundTruth {
        GroundTruth {
            scores: self.scores.iter().filter(|(p, _)| targets.contains(&p.0)).map(|(&p, &s)| (p, s)).collect(),
            source: self.source.clone(),
        }
    }
}

/// Standardized deviations `|x - mean| / sd` for the experiments in
/// `intervention_rows`, against the statistics of `observational_rows`.
///
/// Rows whose target is not a measured gene are skipped, as are genes with
/// zero observational spread.
pub fn ground_truth_scores(
    table: &ExpressionTable,
    intervention_rows: &[usize],
    observational_rows: &[usize],
) -> Result<GroundTruth> {
    if observational_rows.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: observational_rows.len() });
    }
    let values = table.values();
    let obs = values.select_rows(observational_rows);
    let mut center = Vec::with_capacity(table.n_genes());
    for (j, col) in obs.columns().enumerate() {
        let sd = stats::variance(col).sqrt();
        if sd > 0.0 {
            center.push(Some((stats::mean(col), sd)));
        } else {
            log::warn!("gene {} has zero observational spread and is not scored", table.gene_names()[j]);
            center.push(None);
        }
    }
    let mut scores = BTreeMap::new();
    for &row in intervention_rows {
        let Some(i) = table.target_index(row) else {
            log::debug!("row {row}: intervention target is not a measured gene");
            continue;
        };
        for (j, c) in center.iter().enumerate() {
            if let (true, Some((mu, sd))) = (j != i, c) {
                scores.insert((i, j), (values.get(row, j) - mu).abs() / sd);
            }
        }
    }
    GroundTruth::from_scores(
        scores,
        format!("{} observational rows, {} intervention rows", observational_rows.len(), intervention_rows.len()),
    )
}

/// Labels the `floor(q * |pairs|)` highest-scoring pairs as positive; ties
/// at the cut go to the lexicographically smaller pair.
pub fn threshold_at_prevalence(gt: &GroundTruth, q: f64) -> Result<BTreeMap<Pair, bool>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("prevalence must lie in (0, 1), got {q}")));
    }
    let k = (q * gt.len() as f64).floor() as usize;
    if k == 0 {
        return Err(Error::domain(format!("prevalence {q} selects no pair out of {}", gt.len())));
    }
    let mut ranked: Vec<(Pair, f64)> = gt.scores.iter().map(|(&p, &s)| (p, s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().enumerate().map(|(rank, (p, _))| (p, rank < k)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    points: Vec<(f64, f64)>,
    positives: usize,
    negatives: usize,
}

/// Area under the piecewise-linear curve through `points` on `[0, max_x]`.
fn area_up_to(points: &[(f64, f64)], max_x: f64) -> f64 {
    let mut area = 0.0;
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= max_x {
            break;
        }
        if x1 <= max_x {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            let y = y0 + (y1 - y0) * (max_x - x0) / (x1 - x0);
            area += (max_x - x0) * (y0 + y) / 2.0;
        }
    }
    area
}

impl RocCurve {
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn positives(&self) -> usize {
        self.positives
    }

    pub fn negatives(&self) -> usize {
        self.negatives
    }

    pub fn auc(&self) -> f64 {
        area_up_to(&self.points, 1.0)
    }

    /// Area on `fpr <= max_fpr`, divided by `max_fpr`.
    pub fn partial_auc(&self, max_fpr: f64) -> Result<f64> {
        if !(max_fpr > 0.0 && max_fpr <= 1.0) {
            return Err(Error::domain(format!("max_fpr must lie in (0, 1], got {max_fpr}")));
        }
        Ok(area_up_to(&self.points, max_fpr) / max_fpr)
    }

    pub fn write<W: Write>(&self, mut w: W, prevalence: f64, metadata: &[(String, String)]) -> Result<()> {
        writeln!(w, "# positives={}", self.positives)?;
        writeln!(w, "# negatives={}", self.negatives)?;
        writeln!(w, "# prevalence={prevalence}")?;
        for (k, v) in metadata {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "fpr\ttpr")?;
        for (f, t) in &self.points {
            writeln!(w, "{f}\t{t}")?;
        }
        Ok(())
    }
}

/// ROC curve of `(score, label)` entries ranked by score, highest first.
/// Entries with equal scores form one segment.
pub fn roc_from_entries(mut entries: Vec<(f64, bool)>) -> Result<RocCurve> {
    if entries.is_empty() {
        return Err(Error::domain("empty evaluation universe"));
    }
    if entries.iter().any(|e| e.0.is_nan()) {
        return Err(Error::domain("NaN score"));
    }
    let positives = entries.iter().filter(|e| e.1).count();
    let negatives = entries.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::domain(format!("need both classes, got {positives} positives and {negatives} negatives")));
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < entries.len() {
        let score = entries[i].0;
        while i < entries.len() && entries[i].0 == score {
            if entries[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    Ok(RocCurve { points, positives, negatives })
}

/// ROC curve of `prediction` over the pairs of `labels`; pairs without a
/// prediction count as 0 and predictions outside `labels` are ignored.
pub fn roc_curve(prediction: &PredictionScores, labels: &BTreeMap<Pair, bool>) -> Result<RocCurve> {
    roc_from_entries(labels.iter().map(|(&p, &l)| (f64::from(prediction.count(p)), l)).collect())
}

/// Entries of one fold: the labelled pairs whose intervention target is in
/// `targets`, scored by `prediction`.
pub fn fold_entries(
    prediction: &PredictionScores,
    labels: &BTreeMap<Pair, bool>,
    targets: &BTreeSet<usize>,
) -> Vec<(f64, bool)> {
    labels.iter().filter(|(p, _)| targets.contains(&p.0)).map(|(&p, &l)| (f64::from(prediction.count(p)), l)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub fpr: f64,
    pub tpr_low: f64,
    pub tpr_high: f64,
}

/// Central interval of the ROC curves produced by uniformly random rankings.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomBand {
    pub positives: usize,
    pub negatives: usize,
    pub confidence: f64,
    pub points: Vec<BandPoint>,
}

impl RandomBand {
    fn envelope(&self, high: bool) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.fpr, if high { p.tpr_high } else { p.tpr_low })).collect()
    }

    /// Area under the upper envelope on `fpr <= max_fpr`, divided by `max_fpr`.
    pub fn upper_partial_auc(&self, max_fpr: f64) -> Result<f64> {
        if !(max_fpr > 0.0 && max_fpr <= 1.0) {
            return Err(Error::domain(format!("max_fpr must lie in (0, 1], got {max_fpr}")));
        }
        Ok(area_up_to(&self.envelope(true), max_fpr) / max_fpr)
    }

    /// Linearly interpolated `(low, high)` at `fpr`.
    pub fn at(&self, fpr: f64) -> (f64, f64) {
        let interp = |env: &[(f64, f64)]| {
            let k = env.partition_point(|p| p.0 < fpr);
            if k == 0 {
                return env[0].1;
            }
            if k == env.len() {
                return env[k - 1].1;
            }
            let ((x0, y0), (x1, y1)) = (env[k - 1], env[k]);
            y0 + (y1 - y0) * (fpr - x0) / (x1 - x0)
        };
        (interp(&self.envelope(false)), interp(&self.envelope(true)))
    }

    pub fn write<W: Write>(&self, mut w: W, prevalence: f64, metadata: &[(String, String)]) -> Result<()> {
        writeln!(w, "# positives={}", self.positives)?;
        writeln!(w, "# negatives={}", self.negatives)?;
        writeln!(w, "# prevalence={prevalence}")?;
        writeln!(w, "# confidence={}", self.confidence)?;
        for (k, v) in metadata {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "fpr\ttpr_low\ttpr_high")?;
        for p in &self.points {
            writeln!(w, "{}\t{}\t{}", p.fpr, p.tpr_low, p.tpr_high)?;
        }
        Ok(())
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    stats::ln_gamma(n as f64 + 1.0) - stats::ln_gamma(k as f64 + 1.0) - stats::ln_gamma((n - k) as f64 + 1.0)
}

/// Quantiles `(lo, hi)` of the number of positives among `t` draws without
/// replacement from `positives + negatives` items.
pub fn hypergeometric_interval(positives: usize, negatives: usize, t: usize, confidence: f64) -> (usize, usize) {
    let total = positives + negatives;
    let k_min = t.saturating_sub(negatives);
    let k_max = t.min(positives);
    let denom = ln_choose(total, t);
    let lo_q = (1.0 - confidence) / 2.0;
    let hi_q = (1.0 + confidence) / 2.0;
    let (mut lo, mut hi) = (None, None);
    let mut cdf = 0.0;
    for k in k_min..=k_max {
        cdf += (ln_choose(positives, k) + ln_choose(negatives, t - k) - denom).exp();
        if lo.is_none() && cdf >= lo_q {
            lo = Some(k);
        }
        if cdf >= hi_q {
            hi = Some(k);
            break;
        }
    }
    let lo = lo.unwrap_or(k_max);
    (lo, hi.unwrap_or(k_max).max(lo))
}

/// Number of grid steps of [`random_band`].
pub const BAND_GRID: usize = 1000;

/// Random-ranking band at `confidence`. After `t` of the `P + N` pairs the
/// expected FPR and TPR both equal `t / (P + N)`; the band at that FPR is the
/// central hypergeometric interval of the positives drawn, divided by `P`.
pub fn random_band(positives: usize, negatives: usize, confidence: f64) -> Result<RandomBand> {
    if positives == 0 || negatives == 0 {
        return Err(Error::domain("the band needs at least one positive and one negative"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::domain(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let total = positives + negatives;
    let mut ts: Vec<usize> =
        (0..=BAND_GRID).map(|i| ((i as f64 * total as f64 / BAND_GRID as f64).round() as usize).min(total)).collect();
    ts.dedup();
    let points = ts
        .into_iter()
        .map(|t| {
            let (lo, hi) = hypergeometric_interval(positives, negatives, t, confidence);
            BandPoint {
                fpr: t as f64 / total as f64,
                tpr_low: lo as f64 / positives as f64,
                tpr_high: hi as f64 / positives as f64,
            }
        })
        .collect();
    Ok(RandomBand { positives, negatives, confidence, points })
}
