//! Run configuration, prediction files and the k-fold evaluation driver.
//!
//! Prediction file layout:
//!
//! ```text
//! # estimator=lcd-bst
//! # alpha=0.01
//! # ...
//! cause<TAB>effect<TAB>count
//! G013<TAB>G087<TAB>93
//! ```
//!
//! Metadata lines carry every parameter that affects the result, so a file
//! can be reproduced from its own header. The worker-thread count is left
//! out because it never changes the output.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;

use crate::boosting::BoostParams;
use crate::data::{make_folds, pool_training, ExpressionTable, JciDataset};
use crate::error::{Error, Result};
use crate::eval::{self, RandomBand, RocCurve};
use crate::stability::{self, Estimator, PredictionScores, StabilityConfig};

/// Which part of a table a run trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldSpec {
    pub k: usize,
    pub seed: u64,
    pub test_fold: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub estimator: String,
    pub alpha: f64,
    pub subsamples: usize,
    pub fraction: f64,
    pub max_vars: usize,
    pub mstop: usize,
    pub nu: f64,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub table: PathBuf,
    /// Train on all folds but `test_fold`; `None` trains on the whole table.
    pub folds: Option<FoldSpec>,
}

impl RunConfig {
    pub fn new(estimator: impl Into<String>, table: impl Into<PathBuf>) -> Self {
        let boost = BoostParams::default();
        let stab = StabilityConfig::default();
        RunConfig {
            estimator: estimator.into(),
            alpha: 0.01,
            subsamples: stab.runs,
            fraction: stab.fraction,
            max_vars: boost.max_vars,
            mstop: boost.mstop,
            nu: boost.nu,
            seed: stab.seed,
            threads: 0,
            table: table.into(),
            folds: None,
        }
    }

    pub fn boost_params(&self) -> BoostParams {
        BoostParams { max_vars: self.max_vars, mstop: self.mstop, nu: self.nu }
    }

    pub fn build_estimator(&self) -> Result<Estimator> {
        let e = Estimator::from_name(&self.estimator, self.alpha, self.boost_params())?;
        e.validate()?;
        Ok(e)
    }

    pub fn stability(&self) -> StabilityConfig {
        StabilityConfig { runs: self.subsamples, fraction: self.fraction, seed: self.seed }
    }

    /// Ordered `key=value` pairs written to output headers.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut m = vec![
            ("estimator".to_owned(), self.estimator.clone()),
            ("alpha".to_owned(), self.alpha.to_string()),
            ("subsamples".to_owned(), self.subsamples.to_string()),
            ("fraction".to_owned(), self.fraction.to_string()),
            ("max_vars".to_owned(), self.max_vars.to_string()),
            ("mstop".to_owned(), self.mstop.to_string()),
            ("nu".to_owned(), self.nu.to_string()),
            ("seed".to_owned(), self.seed.to_string()),
            ("table".to_owned(), self.table.display().to_string()),
        ];
        if let Some(f) = self.folds {
            m.push(("folds".to_owned(), f.k.to_string()));
            m.push(("fold_seed".to_owned(), f.seed.to_string()));
            m.push(("test_fold".to_owned(), f.test_fold.to_string()));
        }
        m
    }

    pub fn from_metadata(meta: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
            let v = meta.get(key).ok_or_else(|| Error::Metadata(format!("missing `{key}`")))?;
            v.parse().map_err(|_| Error::Metadata(format!("invalid `{key}` value `{v}`")))
        }
        let folds = if meta.contains_key("folds") {
            Some(FoldSpec { k: get(meta, "folds")?, seed: get(meta, "fold_seed")?, test_fold: get(meta, "test_fold")? })
        } else {
            None
        };
        Ok(RunConfig {
            estimator: get(meta, "estimator")?,
            alpha: get(meta, "alpha")?,
            subsamples: get(meta, "subsamples")?,
            fraction: get(meta, "fraction")?,
            max_vars: get(meta, "max_vars")?,
            mstop: get(meta, "mstop")?,
            nu: get(meta, "nu")?,
            seed: get(meta, "seed")?,
            threads: 0,
            table: get::<String>(meta, "table")?.into(),
            folds,
        })
    }
}

/// Training data for `config` drawn from `table`.
pub fn training_dataset(table: &ExpressionTable, config: &RunConfig) -> Result<JciDataset> {
    match config.folds {
        None => JciDataset::from_table(table),
        Some(f) => {
            if f.test_fold >= f.k {
                return Err(Error::domain(format!("test fold {} out of range for {} folds", f.test_fold, f.k)));
            }
            let split = make_folds(table, f.k, f.seed)?;
            pool_training(table, &split, f.test_fold)
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = all cores).
pub fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Stabilized run of the configured estimator on its training data.
pub fn execute_run(table: &ExpressionTable, config: &RunConfig) -> Result<PredictionScores> {
    let estimator = config.build_estimator()?;
    let dataset = training_dataset(table, config)?;
    let stab = config.stability();
    in_pool(config.threads, || stability::stabilized_run(&dataset, &estimator, &stab))?
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub metadata: BTreeMap<String, String>,
    pub scores: PredictionScores,
}

/// Writes `scores` ranked by count, naming variables by `gene_names`.
pub fn write_predictions<W: Write>(
    mut w: W,
    metadata: &[(String, String)],
    scores: &PredictionScores,
    gene_names: &[String],
) -> Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "# runs={}", scores.runs())?;
    writeln!(w, "cause\teffect\tcount")?;
    let mut rows: Vec<(&str, &str, u32)> =
        scores.counts().iter().map(|(&(c, e), &n)| (gene_names[c].as_str(), gene_names[e].as_str(), n)).collect();
    rows.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(b.0)).then(a.1.cmp(b.1)));
    for (c, e, n) in rows {
        writeln!(w, "{c}\t{e}\t{n}")?;
    }
    Ok(())
}

/// Parses a prediction file, resolving names against `gene_names`.
pub fn read_predictions<R: Read>(r: R, gene_names: &[String]) -> Result<PredictionFile> {
    let index: HashMap<&str, usize> = gene_names.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let mut metadata = BTreeMap::new();
    let mut counts = BTreeMap::new();
    let mut header_seen = false;
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let perr = |msg: String| Error::Parse { line: lineno, msg };
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest.trim_start().split_once('=').ok_or_else(|| perr("expected `# key=value`".into()))?;
            metadata.insert(k.to_owned(), v.to_owned());
            continue;
        }
        if !header_seen {
            if line != "cause\teffect\tcount" {
                return Err(perr("expected header `cause<TAB>effect<TAB>count`".into()));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(perr(format!("expected 3 fields, found {}", f.len())));
        }
        let lookup = |g: &str| index.get(g).copied().ok_or_else(|| perr(format!("unknown gene `{g}`")));
        let pair = (lookup(f[0])?, lookup(f[1])?);
        let n: u32 = f[2].parse().map_err(|_| perr(format!("invalid count `{}`", f[2])))?;
        if counts.insert(pair, n).is_some() {
            return Err(perr(format!("duplicate pair {} -> {}", f[0], f[1])));
        }
    }
    if !header_seen {
        return Err(Error::Parse { line: 1, msg: "missing header".into() });
    }
    let runs: u32 = metadata
        .get("runs")
        .ok_or_else(|| Error::Metadata("missing `runs`".into()))?
        .parse()
        .map_err(|_| Error::Metadata("invalid `runs`".into()))?;
    Ok(PredictionFile { metadata, scores: PredictionScores::from_counts(counts, runs)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub prevalence: f64,
    pub roc: RocCurve,
    pub band: RandomBand,
}

/// Scores one prediction per test fold against the held-out interventions.
///
/// The folds are rebuilt from the `folds` and `fold_seed` metadata, which
/// must agree across files; together the files must cover every test fold
/// exactly once with the same estimator settings. The ground truth uses all
/// observational rows of `table`.
pub fn evaluate(
    table: &ExpressionTable,
    predictions: &[PredictionFile],
    prevalences: &[f64],
    confidence: f64,
) -> Result<Vec<Evaluation>> {
    let configs: Vec<RunConfig> =
        predictions.iter().map(|p| RunConfig::from_metadata(&p.metadata)).collect::<Result<_>>()?;
    let first = configs.first().ok_or_else(|| Error::Metadata("no prediction files".into()))?;
    let spec = first.folds.ok_or_else(|| Error::Metadata("predictions were not trained on a fold split".into()))?;
    let mut seen = BTreeSet::new();
    for c in &configs {
        let f = c.folds.ok_or_else(|| Error::Metadata("predictions were not trained on a fold split".into()))?;
        if (f.k, f.seed) != (spec.k, spec.seed) {
            return Err(Error::Metadata(format!(
                "fold parameters differ: k={} seed={} vs k={} seed={}",
                f.k, f.seed, spec.k, spec.seed
            )));
        }
        let same_run = RunConfig { folds: None, ..c.clone() } == RunConfig { folds: None, ..first.clone() };
        if !same_run {
            return Err(Error::Metadata("prediction files come from different run settings".into()));
        }
        if !seen.insert(f.test_fold) {
            return Err(Error::Metadata(format!("test fold {} appears twice", f.test_fold)));
        }
    }
    if seen != (0..spec.k).collect() {
        return Err(Error::Metadata(format!("expected one prediction per test fold 0..{}", spec.k)));
    }

    let split = make_folds(table, spec.k, spec.seed)?;
    let all_int: Vec<usize> = split.folds.iter().flat_map(|f| f.interventional.iter().copied()).collect();
    let gt = eval::ground_truth_scores(table, &all_int, &table.observational_rows())?;

    let mut out = Vec::with_capacity(prevalences.len());
    for &q in prevalences {
        let labels = eval::threshold_at_prevalence(&gt, q)?;
        let mut entries = Vec::with_capacity(labels.len());
        for (c, p) in configs.iter().zip(predictions) {
            let fold = &split.folds[c.folds.expect("checked above").test_fold];
            let targets: BTreeSet<usize> = fold.interventional.iter().filter_map(|&r| table.target_index(r)).collect();
            entries.extend(eval::fold_entries(&p.scores, &labels, &targets));
        }
        let roc = eval::roc_from_entries(entries)?;
        let band = eval::random_band(roc.positives(), roc.negatives(), confidence)?;
        out.push(Evaluation { prevalence: q, roc, band });
    }
    Ok(out)
}
