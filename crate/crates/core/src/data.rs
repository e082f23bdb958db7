//! Expression tables, the tab-separated table format, JCI pooling and the
//! k-fold train/test split.
//!
//! Table format (UTF-8, LF line endings):
//!
//! ```text
//! sample_id<TAB>intervention<TAB>gene_1<TAB>...<TAB>gene_p
//! s1<TAB>-<TAB>0.12<TAB>...
//! s2<TAB>gene_7<TAB>-1.5<TAB>...
//! ```
//!
//! `-` marks an observational sample; anything else names the knocked-out
//! gene, which need not be one of the measured genes. Values are written with
//! the shortest representation that parses back to the same `f64`.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::indep::ContextVector;
use crate::matrix::Matrix;

pub const OBSERVATIONAL_MARKER: &str = "-";

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionTable {
    sample_ids: Vec<String>,
    gene_names: Vec<String>,
    values: Matrix,
    interventions: Vec<Option<String>>,
}

impl ExpressionTable {
    pub fn new(
        sample_ids: Vec<String>,
        gene_names: Vec<String>,
        values: Matrix,
        interventions: Vec<Option<String>>,
    ) -> Result<Self> {
        let n = sample_ids.len();
        if values.nrows() != n || interventions.len() != n || values.ncols() != gene_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{n} samples, {} annotations, {} genes, values {}x{}",
                interventions.len(),
                gene_names.len(),
                values.nrows(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for g in &gene_names {
            if !seen.insert(g.as_str()) {
                return Err(Error::DuplicateGene(g.clone()));
            }
        }
        let mut targets = HashSet::new();
        for t in interventions.iter().flatten() {
            if !targets.insert(t.as_str()) {
                return Err(Error::DuplicateTarget(t.clone()));
            }
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("expression values must be finite"));
        }
        Ok(ExpressionTable { sample_ids, gene_names, values, interventions })
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_genes(&self) -> usize {
        self.gene_names.len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn gene_names(&self) -> &[String] {
        &self.gene_names
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn interventions(&self) -> &[Option<String>] {
        &self.interventions
    }

    pub fn observational_rows(&self) -> Vec<usize> {
        (0..self.n_samples()).filter(|&i| self.interventions[i].is_none()).collect()
    }

    pub fn interventional_rows(&self) -> Vec<usize> {
        (0..self.n_samples()).filter(|&i| self.interventions[i].is_some()).collect()
    }

    pub fn gene_index(&self) -> HashMap<&str, usize> {
        self.gene_names.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect()
    }

    /// Index of the measured gene targeted in `row`, if any.
    pub fn target_index(&self, row: usize) -> Option<usize> {
        let t = self.interventions[row].as_deref()?;
        self.gene_names.iter().position(|g| g == t)
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = match lines.next() {
            Some(l) => l?,
            None => return Err(Error::Parse { line: 1, msg: "empty file".into() }),
        };
        let mut fields = header.split('\t');
        if fields.next() != Some("sample_id") || fields.next() != Some("intervention") {
            return Err(Error::Parse { line: 1, msg: "header must start with `sample_id<TAB>intervention`".into() });
        }
        let gene_names: Vec<String> = fields.map(str::to_owned).collect();
        let mut seen = HashSet::new();
        for g in &gene_names {
            if g.is_empty() {
                return Err(Error::Parse { line: 1, msg: "empty gene name".into() });
            }
            if !seen.insert(g.as_str()) {
                return Err(Error::DuplicateGene(g.clone()));
            }
        }

        let p = gene_names.len();
        let mut sample_ids = Vec::new();
        let mut interventions = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            let mut fields = line.split('\t');
            let id = fields
                .next()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::Parse { line: lineno, msg: "missing sample id".into() })?;
            let ann = fields
                .next()
                .ok_or_else(|| Error::Parse { line: lineno, msg: "missing intervention column".into() })?;
            let mut row = Vec::with_capacity(p);
            for (j, cell) in fields.enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("non-numeric value `{cell}` in column {}", j + 3),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line: lineno, msg: format!("non-finite value `{cell}`") });
                }
                row.push(v);
            }
            if row.len() != p {
                return Err(Error::Parse { line: lineno, msg: format!("expected {p} values, found {}", row.len()) });
            }
            sample_ids.push(id.to_owned());
            interventions.push((ann != OBSERVATIONAL_MARKER).then(|| ann.to_owned()));
            rows.push(row);
        }
        let mut values = Matrix::from_rows(&rows)?;
        if rows.is_empty() {
            values = Matrix::zeros(0, p);
        }
        ExpressionTable::new(sample_ids, gene_names, values, interventions)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        write!(w, "sample_id\tintervention")?;
        for g in &self.gene_names {
            write!(w, "\t{g}")?;
        }
        writeln!(w)?;
        for i in 0..self.n_samples() {
            let ann = self.interventions[i].as_deref().unwrap_or(OBSERVATIONAL_MARKER);
            write!(w, "{}\t{ann}", self.sample_ids[i])?;
            for j in 0..self.n_genes() {
                write!(w, "\t{}", self.values.get(i, j))?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_table(path: impl AsRef<Path>) -> Result<ExpressionTable> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ExpressionTable::read(f)
}

pub fn save_table(table: &ExpressionTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    table.write(f)
}

/// Pooled system variables plus a binary context (0 observational,
/// 1 interventional).
#[derive(Debug, Clone, PartialEq)]
pub struct JciDataset {
    system: Matrix,
    context: ContextVector,
    context_numeric: Vec<f64>,
    gene_names: Vec<String>,
}

impl JciDataset {
    pub fn new(system: Matrix, context: Vec<u32>, gene_names: Vec<String>) -> Result<Self> {
        if system.nrows() != context.len() || system.ncols() != gene_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "system {}x{}, {} context labels, {} names",
                system.nrows(),
                system.ncols(),
                context.len(),
                gene_names.len()
            )));
        }
        if context.iter().any(|&c| c > 1) {
            return Err(Error::domain("context labels must be 0 or 1"));
        }
        let context = ContextVector::new(context)?;
        let context_numeric = context.as_f64();
        Ok(JciDataset { system, context, context_numeric, gene_names })
    }

    /// Every row of the table; interventional rows get context 1.
    pub fn from_table(table: &ExpressionTable) -> Result<Self> {
        let rows: Vec<usize> = (0..table.n_samples()).collect();
        Self::from_table_rows(table, &rows)
    }

    pub fn from_table_rows(table: &ExpressionTable, rows: &[usize]) -> Result<Self> {
        let context = rows.iter().map(|&r| u32::from(table.interventions[r].is_some())).collect();
        JciDataset::new(table.values.select_rows(rows), context, table.gene_names.clone())
    }

    pub fn n_samples(&self) -> usize {
        self.system.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.system.ncols()
    }

    pub fn system(&self) -> &Matrix {
        &self.system
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.system.col(j)
    }

    pub fn context(&self) -> &ContextVector {
        &self.context
    }

    /// Context as a 0/1 numeric column.
    pub fn context_column(&self) -> &[f64] {
        &self.context_numeric
    }

    pub fn gene_names(&self) -> &[String] {
        &self.gene_names
    }

    pub fn interventional_count(&self) -> usize {
        self.context.labels().iter().filter(|&&c| c == 1).count()
    }

    /// Restriction to `rows`; fails if a context value disappears.
    pub fn subsample(&self, rows: &[usize]) -> Result<Self> {
        let context = rows.iter().map(|&r| self.context.labels()[r]).collect();
        JciDataset::new(self.system.select_rows(rows), context, self.gene_names.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Fold {
    pub observational: Vec<usize>,
    pub interventional: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl FoldSplit {
    /// Table rows not in `test_fold`, ascending.
    pub fn training_rows(&self, test_fold: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != test_fold)
            .flat_map(|(_, fold)| fold.observational.iter().chain(&fold.interventional).copied())
            .collect();
        rows.sort_unstable();
        rows
    }
}

/// Splits observational and interventional rows separately into `k` folds:
/// a seeded shuffle per class, then round-robin assignment.
pub fn make_folds(table: &ExpressionTable, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::domain(format!("need at least 2 folds, got {k}")));
    }
    let mut obs = table.observational_rows();
    let mut int = table.interventional_rows();
    for (class, rows) in [("observational", &obs), ("interventional", &int)] {
        if rows.len() < k {
            return Err(Error::domain(format!("{k} folds need at least {k} {class} rows, found {}", rows.len())));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    obs.shuffle(&mut rng);
    int.shuffle(&mut rng);
    let mut folds = vec![Fold::default(); k];
    for (i, r) in obs.into_iter().enumerate() {
        folds[i % k].observational.push(r);
    }
    for (i, r) in int.into_iter().enumerate() {
        folds[i % k].interventional.push(r);
    }
    for f in &mut folds {
        f.observational.sort_unstable();
        f.interventional.sort_unstable();
    }
    Ok(FoldSplit { k, seed, folds })
}

/// Training set for `test_fold`: all other folds, pooled with context 0 for
/// observational and 1 for interventional rows.
pub fn pool_training(table: &ExpressionTable, split: &FoldSplit, test_fold: usize) -> Result<JciDataset> {
    if test_fold >= split.k {
        return Err(Error::domain(format!("test fold {test_fold} out of range for k = {}", split.k)));
    }
    JciDataset::from_table_rows(table, &split.training_rows(test_fold))
}
