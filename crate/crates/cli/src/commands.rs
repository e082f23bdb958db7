use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lcd_core::data::load_table;
use lcd_core::pipeline::{self, FoldSpec, PredictionFile, RunConfig};
use lcd_core::sim::{self, ancestors, d_separated, Dmg, Fixture, KnockoutPanel, PanelParams};
use lcd_core::{Error, ExpressionTable};

use crate::{EvaluateArgs, OracleArgs, OracleQuery, RunArgs, SimulateArgs};

pub enum Failure {
    Usage(String),
    Data(Error),
    Runtime(Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Data(e) | Failure::Runtime(e) => write!(f, "{e}"),
        }
    }
}

/// Classifies errors raised while reading or processing inputs.
fn classify(e: Error) -> Failure {
    match e {
        Error::Parse { .. }
        | Error::DuplicateGene(_)
        | Error::DuplicateTarget(_)
        | Error::Io(_)
        | Error::Metadata(_)
        | Error::DimensionMismatch(_) => Failure::Data(e),
        _ => Failure::Runtime(e),
    }
}

fn usage(e: impl fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn read_table(path: &Path) -> Result<ExpressionTable, Failure> {
    load_table(path).map_err(|e| Failure::Data(annotate(e, path)))
}

fn annotate(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(m) => Error::Io(format!("{}: {m}", path.display())),
        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
        other => other,
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a half-written file.
fn write_atomically(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let tmp = path.with_extension("partial");
    let io = |e: std::io::Error| Failure::Data(annotate(e.into(), path));
    {
        let mut w = BufWriter::new(File::create(&tmp).map_err(io)?);
        w.write_all(contents).map_err(io)?;
        w.flush().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> lcd_core::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(Failure::Runtime)?;
    Ok(buf)
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let (table, graph) = match &a.fixture {
        Some(name) => {
            let f: Fixture = name.parse().map_err(usage)?;
            let scm = sim::fixture(f);
            let table = sim::pooled_table(&scm, a.n_obs, a.n_int, a.seed).map_err(usage)?;
            (table, scm.dmg())
        }
        None => {
            let params = PanelParams {
                p: a.p,
                edge_prob: a.edge_prob,
                weight_low: a.weight_low,
                weight_high: a.weight_high,
                interventions: a.interventions,
                knockout_shift: a.knockout_shift,
            };
            if !(a.knockout_shift.is_finite() && a.knockout_shift >= 0.0) {
                return Err(usage("--knockout-shift must be finite and non-negative"));
            }
            let panel = KnockoutPanel::random(&params, a.seed).map_err(usage)?;
            let table = panel.table(a.n_obs, a.seed).map_err(usage)?;
            (table, panel.scm.dmg())
        }
    };
    let graph_path = a.graph.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".graph");
        PathBuf::from(p)
    });
    let table_bytes = render(|w| table.write(w))?;
    let graph_bytes = render(|w| graph.write(w))?;
    write_atomically(&a.out, &table_bytes)?;
    write_atomically(&graph_path, &graph_bytes)?;
    log::info!("wrote {} samples x {} genes to {}", table.n_samples(), table.n_genes(), a.out.display());
    Ok(())
}

pub fn run(a: &RunArgs) -> Result<(), Failure> {
    let mut config = RunConfig::new(a.estimator.clone(), a.table.clone());
    config.alpha = a.alpha;
    config.subsamples = a.subsamples;
    config.fraction = a.fraction;
    config.max_vars = a.max_vars;
    config.mstop = a.mstop;
    config.nu = a.nu;
    config.seed = a.seed;
    config.threads = a.threads;
    if let (Some(k), Some(test_fold)) = (a.folds, a.test_fold) {
        if k < 2 || test_fold >= k {
            return Err(usage(format!("need --folds >= 2 and --test-fold < --folds, got {k} and {test_fold}")));
        }
        config.folds = Some(FoldSpec { k, seed: a.fold_seed, test_fold });
    }
    config.build_estimator().map_err(usage)?;
    if a.subsamples == 0 || !(a.fraction > 0.0 && a.fraction <= 1.0) {
        return Err(usage("--subsamples must be positive and --fraction in (0, 1]"));
    }

    let table = read_table(&a.table)?;
    let scores = pipeline::execute_run(&table, &config).map_err(classify)?;
    let bytes = render(|w| pipeline::write_predictions(w, &config.metadata(), &scores, table.gene_names()))?;
    write_atomically(&a.out, &bytes)?;
    log::info!("{}: {} pairs with nonzero count", config.estimator, scores.counts().len());
    Ok(())
}

fn prevalence_tag(q: f64) -> String {
    format!("{q}")
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), Failure> {
    if !(a.confidence > 0.0 && a.confidence < 1.0) {
        return Err(usage("--confidence must lie in (0, 1)"));
    }
    if let Some(q) = a.prevalence.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(usage(format!("prevalence {q} outside (0, 1)")));
    }
    let table = read_table(&a.table)?;
    let mut files: Vec<PredictionFile> = Vec::with_capacity(a.predictions.len());
    for path in &a.predictions {
        let f = File::open(path).map_err(|e| Failure::Data(annotate(e.into(), path)))?;
        files.push(pipeline::read_predictions(f, table.gene_names()).map_err(|e| Failure::Data(annotate(e, path)))?);
    }
    let results = pipeline::evaluate(&table, &files, &a.prevalence, a.confidence).map_err(classify)?;

    let first = &files[0].metadata;
    let metadata: Vec<(String, String)> =
        first.iter().filter(|(k, _)| k.as_str() != "test_fold").map(|(k, v)| (k.clone(), v.clone())).collect();
    let mut outputs = Vec::new();
    for ev in &results {
        let tag = prevalence_tag(ev.prevalence);
        let roc = render(|w| ev.roc.write(w, ev.prevalence, &metadata))?;
        let band = render(|w| ev.band.write(w, ev.prevalence, &metadata))?;
        outputs.push((a.out_dir.join(format!("roc_{tag}.tsv")), roc));
        outputs.push((a.out_dir.join(format!("band_{tag}.tsv")), band));
        log::info!("prevalence {tag}: AUC {:.4}", ev.roc.auc());
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::Data(annotate(e.into(), &a.out_dir)))?;
    for (path, bytes) in outputs {
        write_atomically(&path, &bytes)?;
    }
    Ok(())
}

pub fn oracle(a: &OracleArgs) -> Result<(), Failure> {
    let f = File::open(&a.graph).map_err(|e| Failure::Data(annotate(e.into(), &a.graph)))?;
    let g = Dmg::read(f).map_err(|e| Failure::Data(annotate(e, &a.graph)))?;
    let node = |name: &str| g.node(name).ok_or_else(|| usage(format!("unknown node `{name}`")));
    let mut out = std::io::stdout().lock();
    let io = |e: std::io::Error| Failure::Runtime(e.into());
    match &a.query {
        OracleQuery::Dsep { a: x, b: y, given } => {
            let z: Vec<usize> = given.iter().map(|n| node(n)).collect::<Result<_, _>>()?;
            let sep = d_separated(&g, node(x)?, node(y)?, &z).map_err(usage)?;
            writeln!(out, "{}", if sep { "separated" } else { "connected" }).map_err(io)?;
        }
        OracleQuery::Ancestors { node: n } => {
            for v in ancestors(&g, node(n)?).map_err(usage)? {
                writeln!(out, "{}", g.names()[v]).map_err(io)?;
            }
        }
    }
    Ok(())
}
