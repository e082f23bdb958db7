//! Invariant causal prediction with boosting preselection.
//!
//! For a target `Y`, every subset of the preselected candidates is tested for
//! residual invariance across contexts with the mean-variance test. The
//! estimate is the intersection of all subsets that are not rejected at level
//! `alpha`. Subsets are visited by increasing size (lexicographic within a
//! size), so the empty set comes first; with `stop_if_empty` the scan ends as
//! soon as the running intersection is empty.

use rayon::prelude::*;

use crate::boosting::{BoostParams, SystemBooster};
use crate::data::JciDataset;
use crate::error::{Error, Result};
use crate::indep;
use crate::matrix::Matrix;
use crate::stability::PredictionScores;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub alpha: f64,
    pub boost: BoostParams,
    pub stop_if_empty: bool,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig { alpha: 0.01, boost: BoostParams::default(), stop_if_empty: true }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.boost.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedSet {
    pub set: Vec<usize>,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    pub target: usize,
    /// Preselected candidates, ascending.
    pub candidates: Vec<usize>,
    pub accepted_sets: Vec<AcceptedSet>,
    /// Intersection of the accepted sets, ascending.
    pub output_set: Vec<usize>,
    /// No subset was accepted.
    pub model_rejected: bool,
    pub stopped_early: bool,
    /// Number of invariance tests attempted.
    pub tests_run: usize,
}

/// Next `k`-combination of `0..n` in lexicographic order, in place.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All subsets of `0..n` by increasing size, lexicographic within a size.
pub fn subsets_by_size(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=n).flat_map(move |k| {
        let mut cur: Option<Vec<usize>> = None;
        std::iter::from_fn(move || {
            match &mut cur {
                None => cur = Some((0..k).collect()),
                Some(c) => {
                    if !next_combination(c, n) {
                        return None;
                    }
                }
            }
            cur.clone()
        })
    })
}

/// ICP for `effect` over a fixed candidate set.
pub fn icp_over_candidates(
    effect: usize,
    candidates: &[usize],
    dataset: &JciDataset,
    alpha: f64,
    stop_if_empty: bool,
) -> Result<IcpResult> {
    if effect >= dataset.n_vars() {
        return Err(Error::domain(format!("target {effect} out of range")));
    }
    let mut cands = candidates.to_vec();
    cands.sort_unstable();
    cands.dedup();
    if cands.contains(&effect) || cands.iter().any(|&c| c >= dataset.n_vars()) {
        return Err(Error::domain("invalid candidate set"));
    }

    let y = dataset.column(effect);
    let n = dataset.n_samples();
    let mut accepted_sets = Vec::new();
    let mut running: Option<Vec<usize>> = None;
    let mut stopped_early = false;
    let mut tests_run = 0;

    for positions in subsets_by_size(cands.len()) {
        let set: Vec<usize> = positions.iter().map(|&i| cands[i]).collect();
        let cols: Vec<&[f64]> = set.iter().map(|&j| dataset.column(j)).collect();
        let design = if cols.is_empty() { Matrix::empty(n) } else { Matrix::from_columns(n, &cols)? };
        tests_run += 1;
        let decision = match indep::mean_var_invariance_test(y, &design, dataset.context(), alpha) {
            Ok(d) => d,
            Err(e) => {
                log::debug!("icp: target {effect}, set {set:?}: {e}");
                continue;
            }
        };
        if decision.dependent {
            continue;
        }
        running = Some(match running {
            None => set.clone(),
            Some(r) => r.into_iter().filter(|v| set.contains(v)).collect(),
        });
        accepted_sets.push(AcceptedSet { set, p_value: decision.p_value });
        if stop_if_empty && running.as_ref().is_some_and(Vec::is_empty) {
            stopped_early = true;
            break;
        }
    }

    let model_rejected = accepted_sets.is_empty();
    Ok(IcpResult {
        target: effect,
        candidates: cands,
        accepted_sets,
        output_set: running.unwrap_or_default(),
        model_rejected,
        stopped_early,
        tests_run,
    })
}

/// ICP for `effect` with boosting preselection on `dataset`.
pub fn icp_for_target(effect: usize, dataset: &JciDataset, config: &IcpConfig) -> Result<IcpResult> {
    config.validate()?;
    let booster = SystemBooster::new(dataset.system())?;
    let candidates = booster.preselect(effect, &config.boost)?;
    icp_over_candidates(effect, &candidates, dataset, config.alpha, config.stop_if_empty)
}

pub fn icp_predict(dataset: &JciDataset, config: &IcpConfig) -> Result<PredictionScores> {
    config.validate()?;
    let booster = SystemBooster::new(dataset.system())?;
    let outputs: Vec<Vec<usize>> = (0..dataset.n_vars())
        .into_par_iter()
        .map(|y| {
            let res = booster
                .preselect(y, &config.boost)
                .and_then(|c| icp_over_candidates(y, &c, dataset, config.alpha, config.stop_if_empty));
            match res {
                Ok(r) => r.output_set,
                Err(e) => {
                    log::debug!("icp: skipping target {y}: {e}");
                    Vec::new()
                }
            }
        })
        .collect();
    let mut scores = PredictionScores::new(1);
    for (y, parents) in outputs.into_iter().enumerate() {
        for x in parents {
            scores.increment((x, y));
        }
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_order() {
        let all: Vec<Vec<usize>> = subsets_by_size(3).collect();
        assert_eq!(all, vec![vec![], vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 1, 2]]);
        assert_eq!(subsets_by_size(8).count(), 256);
        assert_eq!(subsets_by_size(0).count(), 1);
    }
}
