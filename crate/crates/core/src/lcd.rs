//! Local causal discovery over triples `(C, X, Y)`.
//!
//! A pair `(X, Y)` is reported when `C` and `X` are dependent, `X` and `Y`
//! are dependent, and `C` is independent of `Y` given `X`. The three tests are
//! run in that order and stop at the first failed constraint. The
//! context-dependence test of `X` does not involve `Y`, so it is computed once
//! per variable and shared across targets.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::boosting::{BoostParams, SystemBooster};
use crate::data::JciDataset;
use crate::error::{Error, Result};
use crate::indep::{self, ContextVector};
use crate::matrix::Matrix;
use crate::stability::PredictionScores;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    PartialCorrelation,
    MeanVariance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcdConfig {
    pub alpha: f64,
    pub test_kind: TestKind,
    /// Restrict the causes considered for `Y` to its boosting preselection.
    pub preselect: bool,
    pub boost: BoostParams,
}

impl LcdConfig {
    pub fn name(&self) -> &'static str {
        match (self.test_kind, self.preselect) {
            (TestKind::PartialCorrelation, false) => "lcd",
            (TestKind::MeanVariance, false) => "lcd-mv",
            (TestKind::PartialCorrelation, true) => "lcd-bst",
            (TestKind::MeanVariance, true) => "lcd-bst-mv",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.preselect {
            self.boost.validate()?;
        }
        Ok(())
    }
}

/// A reported triple with the p-values of its three tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcdTriple {
    pub cause: usize,
    pub effect: usize,
    /// `C` vs `X` (dependence required).
    pub p_cx: f64,
    /// `X` vs `Y` (dependence required).
    pub p_xy: f64,
    /// `C` vs `Y` given `X` (independence required).
    pub p_ci: f64,
}

/// The three tests LCD needs, returning p-values. Implemented on data by
/// [`DataTests`] and on graphs by the d-separation oracle in [`crate::sim`].
pub trait LcdTests: Sync {
    /// `C ⫫ X`.
    fn context_marginal(&self, x: usize) -> Result<f64>;
    /// `X ⫫ Y`.
    fn pair_marginal(&self, x: usize, y: usize) -> Result<f64>;
    /// `C ⫫ Y | X`.
    fn context_given(&self, y: usize, x: usize) -> Result<f64>;
}

/// Statistical tests on data. With [`TestKind::MeanVariance`] the two
/// context tests use the mean-variance test and `X ⫫ Y` stays a correlation
/// test, since it involves no context split.
pub struct DataTests<'a> {
    system: &'a Matrix,
    context_column: &'a [f64],
    context: Option<ContextVector>,
    kind: TestKind,
}

impl<'a> DataTests<'a> {
    pub fn new(dataset: &'a JciDataset, kind: TestKind) -> Self {
        DataTests {
            system: dataset.system(),
            context_column: dataset.context_column(),
            context: Some(dataset.context().clone()),
            kind,
        }
    }

    /// Tests over raw columns; the context need not vary.
    pub fn from_columns(system: &'a Matrix, context_column: &'a [f64], kind: TestKind) -> Self {
        let context = ContextVector::new(context_column.iter().map(|&c| c as u32).collect()).ok();
        DataTests { system, context_column, context, kind }
    }

    fn context_vector(&self) -> Result<&ContextVector> {
        self.context.as_ref().ok_or(Error::DegenerateVariance)
    }
}

// The alpha passed to the decision helpers is irrelevant; only p is used.
const ANY_ALPHA: f64 = 0.5;

impl LcdTests for DataTests<'_> {
    fn context_marginal(&self, x: usize) -> Result<f64> {
        let xs = self.system.col(x);
        let d = match self.kind {
            TestKind::PartialCorrelation => indep::parcor_indep_test(self.context_column, xs, None, ANY_ALPHA)?,
            TestKind::MeanVariance => {
                let empty = Matrix::empty(xs.len());
                indep::mean_var_invariance_test(xs, &empty, self.context_vector()?, ANY_ALPHA)?
            }
        };
        Ok(d.p_value)
    }

    fn pair_marginal(&self, x: usize, y: usize) -> Result<f64> {
        Ok(indep::parcor_indep_test(self.system.col(x), self.system.col(y), None, ANY_ALPHA)?.p_value)
    }

    fn context_given(&self, y: usize, x: usize) -> Result<f64> {
        let (xs, ys) = (self.system.col(x), self.system.col(y));
        let d = match self.kind {
            TestKind::PartialCorrelation => indep::parcor_indep_test(self.context_column, ys, Some(xs), ANY_ALPHA)?,
            TestKind::MeanVariance => {
                let cand = Matrix::from_columns(xs.len(), &[xs])?;
                indep::mean_var_invariance_test(ys, &cand, self.context_vector()?, ANY_ALPHA)?
            }
        };
        Ok(d.p_value)
    }
}

/// Per-variable cache of the `C ⫫ X` p-values.
pub struct ContextCache {
    slots: Vec<OnceLock<Option<f64>>>,
}

impl ContextCache {
    pub fn new(n_vars: usize) -> Self {
        ContextCache { slots: (0..n_vars).map(|_| OnceLock::new()).collect() }
    }

    fn get<T: LcdTests + ?Sized>(&self, tests: &T, x: usize) -> Option<f64> {
        *self.slots[x].get_or_init(|| match tests.context_marginal(x) {
            Ok(p) => Some(p),
            Err(e) => {
                log::debug!("lcd: C-X test for {x} failed: {e}");
                None
            }
        })
    }
}

/// LCD triples for one target `effect` over the given candidate causes.
pub fn lcd_triples<T: LcdTests + ?Sized>(
    effect: usize,
    candidates: &[usize],
    tests: &T,
    alpha: f64,
    cache: &ContextCache,
) -> Vec<LcdTriple> {
    let mut out = Vec::new();
    for &x in candidates {
        if x == effect {
            continue;
        }
        let Some(p_cx) = cache.get(tests, x) else { continue };
        if p_cx >= alpha {
            continue;
        }
        let p_xy = match tests.pair_marginal(x, effect) {
            Ok(p) if p < alpha => p,
            Ok(_) => continue,
            Err(e) => {
                log::debug!("lcd: X-Y test ({x}, {effect}) failed: {e}");
                continue;
            }
        };
        let p_ci = match tests.context_given(effect, x) {
            Ok(p) if p >= alpha => p,
            Ok(_) => continue,
            Err(e) => {
                log::debug!("lcd: C-Y|X test ({x}, {effect}) failed: {e}");
                continue;
            }
        };
        out.push(LcdTriple { cause: x, effect, p_cx, p_xy, p_ci });
    }
    out
}

/// Runs LCD for every target `0..n_vars`. `candidates(y)` yields the causes
/// to consider for `y`; an error skips the target.
pub fn lcd_search<T, F>(n_vars: usize, candidates: F, tests: &T, alpha: f64) -> Vec<LcdTriple>
where
    T: LcdTests + ?Sized,
    F: Fn(usize) -> Result<Vec<usize>> + Sync,
{
    let cache = ContextCache::new(n_vars);
    let per_target: Vec<Vec<LcdTriple>> = (0..n_vars)
        .into_par_iter()
        .map(|y| match candidates(y) {
            Ok(c) => lcd_triples(y, &c, tests, alpha, &cache),
            Err(e) => {
                log::debug!("lcd: skipping target {y}: {e}");
                Vec::new()
            }
        })
        .collect();
    per_target.into_iter().flatten().collect()
}

pub fn lcd_for_target(
    effect: usize,
    candidates: &[usize],
    dataset: &JciDataset,
    config: &LcdConfig,
) -> Result<Vec<LcdTriple>> {
    config.validate()?;
    if effect >= dataset.n_vars() {
        return Err(Error::domain(format!("target {effect} out of range")));
    }
    if candidates.contains(&effect) {
        return Err(Error::domain("the target cannot be its own candidate cause"));
    }
    if let Some(&bad) = candidates.iter().find(|&&c| c >= dataset.n_vars()) {
        return Err(Error::domain(format!("candidate {bad} out of range")));
    }
    let tests = DataTests::new(dataset, config.test_kind);
    let cache = ContextCache::new(dataset.n_vars());
    Ok(lcd_triples(effect, candidates, &tests, config.alpha, &cache))
}

/// All LCD triples on `dataset`, without or with boosting preselection.
pub fn lcd_triples_all(dataset: &JciDataset, config: &LcdConfig) -> Result<Vec<LcdTriple>> {
    config.validate()?;
    let p = dataset.n_vars();
    let tests = DataTests::new(dataset, config.test_kind);
    if config.preselect {
        let booster = SystemBooster::new(dataset.system())?;
        Ok(lcd_search(p, |y| booster.preselect(y, &config.boost), &tests, config.alpha))
    } else {
        Ok(lcd_search(p, |y| Ok((0..p).filter(|&x| x != y).collect()), &tests, config.alpha))
    }
}

pub fn lcd_predict(dataset: &JciDataset, config: &LcdConfig) -> Result<PredictionScores> {
    let mut scores = PredictionScores::new(1);
    for t in lcd_triples_all(dataset, config)? {
        scores.increment((t.cause, t.effect));
    }
    Ok(scores)
}
