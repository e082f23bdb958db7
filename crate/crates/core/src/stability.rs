//! Stability selection: run an estimator on `B` random subsamples and count
//! how often each ordered pair is predicted.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boosting::{self, BoostParams};
use crate::data::JciDataset;
use crate::error::{Error, Result};
use crate::icp::{self, IcpConfig};
use crate::lcd::{self, LcdConfig, TestKind};
use crate::Pair;

/// Prediction counts for ordered `(cause, effect)` pairs over `runs` runs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredictionScores {
    counts: BTreeMap<Pair, u32>,
    runs: u32,
}

impl PredictionScores {
    pub fn new(runs: u32) -> Self {
        PredictionScores { counts: BTreeMap::new(), runs }
    }

    pub fn from_counts(counts: BTreeMap<Pair, u32>, runs: u32) -> Result<Self> {
        for (&(c, e), &n) in &counts {
            if c == e {
                return Err(Error::domain(format!("self pair ({c}, {e})")));
            }
            if n > runs {
                return Err(Error::domain(format!("count {n} exceeds {runs} runs")));
            }
        }
        Ok(PredictionScores { counts, runs })
    }

    pub(crate) fn increment(&mut self, pair: Pair) {
        debug_assert_ne!(pair.0, pair.1);
        *self.counts.entry(pair).or_insert(0) += 1;
    }

    pub fn runs(&self) -> u32 {
        self.runs
    }

    pub fn count(&self, pair: Pair) -> u32 {
        self.counts.get(&pair).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<Pair, u32> {
        &self.counts
    }

    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.counts.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Adds the counts and runs of `other`.
    pub fn absorb(&mut self, other: &PredictionScores) {
        self.runs += other.runs;
        for (&k, &v) in &other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
    }

    /// Pairs sorted by count descending, then by pair.
    pub fn ranked(&self) -> Vec<(Pair, u32)> {
        let mut v: Vec<(Pair, u32)> = self.counts.iter().map(|(&k, &c)| (k, c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// A named estimator with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Lcd(LcdConfig),
    Icp(IcpConfig),
    BoostBaseline(BoostParams),
}

pub const ESTIMATOR_NAMES: [&str; 6] = ["lcd", "lcd-mv", "lcd-bst", "lcd-bst-mv", "icp", "boost-baseline"];

impl Estimator {
    /// Builds the estimator called `name` at level `alpha`. ICP always runs
    /// with early stopping on an empty intersection.
    pub fn from_name(name: &str, alpha: f64, boost: BoostParams) -> Result<Self> {
        let lcd = |test_kind, preselect| Estimator::Lcd(LcdConfig { alpha, test_kind, preselect, boost });
        Ok(match name {
            "lcd" => lcd(TestKind::PartialCorrelation, false),
            "lcd-mv" => lcd(TestKind::MeanVariance, false),
            "lcd-bst" => lcd(TestKind::PartialCorrelation, true),
            "lcd-bst-mv" => lcd(TestKind::MeanVariance, true),
            "icp" => Estimator::Icp(IcpConfig { alpha, boost, stop_if_empty: true }),
            "boost-baseline" => Estimator::BoostBaseline(boost),
            other => {
                return Err(Error::domain(format!(
                    "unknown estimator `{other}` (expected one of {})",
                    ESTIMATOR_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Lcd(c) => c.name(),
            Estimator::Icp(_) => "icp",
            Estimator::BoostBaseline(_) => "boost-baseline",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Estimator::Lcd(c) => c.validate(),
            Estimator::Icp(c) => c.validate(),
            Estimator::BoostBaseline(b) => b.validate(),
        }
    }

    /// One run on `dataset`; the result has `runs == 1`.
    pub fn predict(&self, dataset: &JciDataset) -> Result<PredictionScores> {
        match self {
            Estimator::Lcd(c) => lcd::lcd_predict(dataset, c),
            Estimator::Icp(c) => icp::icp_predict(dataset, c),
            Estimator::BoostBaseline(b) => boosting::baseline_predict(dataset, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConfig {
    /// Number of subsamples `B`.
    pub runs: usize,
    pub fraction: f64,
    pub seed: u64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { runs: 100, fraction: 0.5, seed: 0 }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for subsample `run`, derived only from `(seed, run)`.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let h = mix64(mix64(seed ^ 0x9e37_79b9_7f4a_7c15).wrapping_add(run as u64));
    ChaCha8Rng::seed_from_u64(h)
}

/// `m` distinct rows out of `n`, ascending.
pub fn subsample_rows(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut rows = rand::seq::index::sample(rng, n, m).into_vec();
    rows.sort_unstable();
    rows
}

/// Runs `estimator` on `B` subsamples of `floor(fraction * n)` rows drawn
/// without replacement and counts the predicted pairs.
///
/// A failed run contributes nothing; more than 10% failed runs is an error.
/// The result does not depend on the number of worker threads.
pub fn stabilized_run(
    dataset: &JciDataset,
    estimator: &Estimator,
    config: &StabilityConfig,
) -> Result<PredictionScores> {
    estimator.validate()?;
    if config.runs == 0 {
        return Err(Error::domain("at least one subsample run is required"));
    }
    if !(config.fraction > 0.0 && config.fraction <= 1.0) {
        return Err(Error::domain(format!("fraction must lie in (0, 1], got {}", config.fraction)));
    }
    let n = dataset.n_samples();
    let m = (config.fraction * n as f64).floor() as usize;
    if m < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: m });
    }

    let results: Vec<Result<PredictionScores>> = (0..config.runs)
        .into_par_iter()
        .map(|b| {
            let mut rng = run_rng(config.seed, b);
            let rows = subsample_rows(n, m, &mut rng);
            let sub = dataset.subsample(&rows)?;
            estimator.predict(&sub)
        })
        .collect();

    let mut total = PredictionScores::new(config.runs as u32);
    let mut failed = 0;
    for (b, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                for p in s.pairs() {
                    total.increment(p);
                }
            }
            Err(e) => {
                log::warn!("{}: subsample {b} failed: {e}", estimator.name());
                failed += 1;
            }
        }
    }
    if failed * 10 > config.runs {
        return Err(Error::TooManyFailures { failed, runs: config.runs });
    }
    Ok(total)
}
