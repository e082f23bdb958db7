//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use lcd_core::boosting;
use lcd_core::eval;
use lcd_core::icp::{self, IcpConfig};
use lcd_core::indep;
use lcd_core::lcd::{self, LcdConfig, TestKind};
use lcd_core::matrix::Matrix;
use lcd_core::pipeline::{self, FoldSpec, RunConfig};
use lcd_core::sim::{self, ancestors, DsepOracle, Fixture, KnockoutPanel, LinearScm, Mechanism, PanelParams};
use lcd_core::stats;
use lcd_core::{BoostParams, ExpressionTable};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

const FIXTURE_SEEDS: u64 = 100;
const FIXTURE_N: usize = 1000;

fn plain_lcd() -> LcdConfig {
    LcdConfig { alpha: 0.01, test_kind: TestKind::PartialCorrelation, preselect: false, boost: BoostParams::default() }
}

/// Runs every fixture for every seed and reports the estimates as text.
fn fixture_report() -> String {
    let mut out = String::new();
    for f in Fixture::ALL {
        let scm = sim::fixture(f);
        for seed in 0..FIXTURE_SEEDS {
            let ds = scm.sample_pooled(FIXTURE_N, FIXTURE_N, seed).unwrap();
            let lcd: Vec<_> = lcd::lcd_predict(&ds, &plain_lcd()).unwrap().pairs().collect();
            write!(out, "{f}\t{seed}\tlcd={lcd:?}").unwrap();
            if f == Fixture::IcpDiamond {
                let r = icp::icp_for_target(2, &ds, &IcpConfig::default()).unwrap();
                write!(out, "\ticp={:?}", r.output_set).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

fn criterion_1(report: &str) -> Outcome {
    let mut lcd_hits: BTreeMap<String, u64> = BTreeMap::new();
    let mut icp_hits = 0;
    for line in report.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        let expected = if fields[0] == "icp-diamond" { "lcd=[]" } else { "lcd=[(0, 1)]" };
        *lcd_hits.entry(fields[0].to_owned()).or_default() += u64::from(fields[2] == expected);
        if fields.get(3) == Some(&"icp=[0, 1]") {
            icp_hits += 1;
        }
    }
    let lcd_ok = Fixture::ALL.iter().all(|f| lcd_hits[f.name()] >= 95);
    let detail = format!(
        "lcd exact: {}; icp {{X1, X2}}: {icp_hits}/100",
        lcd_hits.iter().map(|(k, v)| format!("{k} {v}/100")).collect::<Vec<_>>().join(", ")
    );
    outcome(lcd_ok && icp_hits >= 90, detail)
}

fn criterion_2() -> Outcome {
    let mut r = common::rng(2);
    let (mut emitted, mut violations) = (0, 0);
    for _ in 0..200 {
        let p = 10;
        let g = common::random_context_dmg(p, 0.25, 0.3, 0.08, &mut r);
        let oracle = DsepOracle::new(&g, p, (0..p).collect()).unwrap();
        let triples = lcd::lcd_search(p, |y| Ok((0..p).filter(|&x| x != y).collect()), &oracle, 0.5);
        for t in triples {
            emitted += 1;
            let (x, y) = (t.cause, t.effect);
            let causal = ancestors(&g, y).unwrap().contains(&x);
            let confounded = g.has_bidirected(x, y) || !sim::d_separated(&g.without_outgoing(x), x, y, &[]).unwrap();
            if !causal || confounded {
                violations += 1;
            }
        }
    }
    outcome(violations == 0 && emitted > 0, format!("{emitted} pairs emitted, {violations} violations"))
}

/// Random linear SCM over `p` variables whose context class 1 shifts a random
/// subset of variables other than `target`.
fn shifted_scm(p: usize, target: usize, edge_prob: f64, seed: u64, r: &mut impl Rng) -> LinearScm {
    let mut scm = sim::random_scm(p, edge_prob, 0.5, 1.5, seed).unwrap();
    scm.add_context_class(1).unwrap();
    for v in (0..p).filter(|&v| v != target) {
        if r.random_bool(0.4) {
            let s = r.random_range(0.5..2.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
            scm.set_mechanism(1, v, Mechanism::Shift(s)).unwrap();
        }
    }
    scm
}

fn criterion_3() -> Outcome {
    let mut r = common::rng(3);
    let mut mismatches = 0;
    let mut nonempty = 0;
    for i in 0..100 {
        let p = r.random_range(3..=9);
        let target = r.random_range(0..p);
        let scm = shifted_scm(p, target, 0.5, 300 + i, &mut r);
        let n = r.random_range(30..=120);
        let ds = scm.sample_pooled(n, n, 700 + i).unwrap();
        let alpha = [0.01, 0.05, 0.2][r.random_range(0..3)];
        let config = IcpConfig { alpha, boost: BoostParams::default(), stop_if_empty: false };
        let res = icp::icp_for_target(target, &ds, &config).unwrap();
        let (naive, accepted) = common::naive_icp(target, &res.candidates, &ds, alpha);
        let early = icp::icp_for_target(target, &ds, &IcpConfig { stop_if_empty: true, ..config }).unwrap();
        if res.output_set != naive || res.accepted_sets.len() != accepted || early.output_set != naive {
            mismatches += 1;
        }
        nonempty += usize::from(!naive.is_empty());
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 100 instances ({nonempty} non-empty estimates)"))
}

fn criterion_4() -> Outcome {
    let mut r = common::rng(4);
    let runs = 500;
    let mut covered = 0;
    for i in 0..runs {
        let p = r.random_range(4..=7);
        let target = r.random_range(0..p);
        let scm = shifted_scm(p, target, 0.4, 4000 + i, &mut r);
        let ds = scm.sample_pooled(200, 200, 9000 + i).unwrap();
        let res = icp::icp_for_target(target, &ds, &IcpConfig::default()).unwrap();
        let anc = ancestors(&scm.dmg(), target).unwrap();
        covered += usize::from(res.output_set.iter().all(|v| anc.contains(v)));
    }
    let rate = covered as f64 / runs as f64;
    let bound = 0.99 - 3.0 * (0.99f64 * 0.01 / runs as f64).sqrt();
    outcome(rate >= bound, format!("coverage {covered}/{runs} = {rate:.4} (bound {bound:.4})"))
}

fn criterion_5() -> Outcome {
    let mut r = common::rng(5);
    let n = 500;
    let trials = 10_000;
    let mut parcor_rej = 0;
    for i in 0..trials {
        let z = common::normal_vec(&mut r, n);
        let ex = common::normal_vec(&mut r, n);
        let ey = common::normal_vec(&mut r, n);
        let x: Vec<f64> = z.iter().zip(&ex).map(|(a, e)| 0.8 * a + e).collect();
        let y: Vec<f64> = z.iter().zip(&ey).map(|(a, e)| -0.5 * a + e).collect();
        let d = if i % 2 == 0 {
            indep::parcor_indep_test(&x, &y, Some(&z), 0.01)
        } else {
            indep::parcor_indep_test(&ex, &ey, None, 0.01)
        };
        parcor_rej += usize::from(d.unwrap().dependent);
    }
    let context = common::binary_context(n / 2, n / 2);
    let mut mv_rej = 0;
    for _ in 0..trials {
        let e = common::normal_vec(&mut r, n);
        let x: Vec<f64> =
            common::normal_vec(&mut r, n).iter().zip(context.labels()).map(|(v, &c)| v + 1.5 * f64::from(c)).collect();
        let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| 0.7 * a + b).collect();
        let design = Matrix::from_columns(n, &[x]).unwrap();
        mv_rej += usize::from(indep::mean_var_invariance_test(&y, &design, &context, 0.01).unwrap().dependent);
    }
    let (pr, mr) = (parcor_rej as f64 / trials as f64, mv_rej as f64 / trials as f64);
    outcome(
        (0.005..=0.02).contains(&pr) && mr <= 0.02,
        format!("partial correlation rejection rate {pr:.4}, mean-variance {mr:.4}"),
    )
}

fn criterion_6() -> Outcome {
    let mut r = common::rng(6);
    let (mut instances, mut order_mismatch, mut max_err) = (0, 0, 0.0f64);
    for n in (5..=50).step_by(5) {
        for p in 1..=10 {
            for rep in 0..3 {
                let x = Matrix::from_columns(n, &(0..p).map(|_| common::normal_vec(&mut r, n)).collect::<Vec<_>>())
                    .unwrap();
                let y: Vec<f64> = (0..n).map(|i| x.row(i).iter().sum::<f64>() + r.random_range(-1.0..1.0)).collect();
                let (mstop, nu) =
                    if rep == 0 { (100, 0.1) } else { (r.random_range(1..=200), r.random_range(0.05..=1.0)) };
                let got = boosting::l2_boost(&x, &y, mstop, nu).unwrap();
                let (order, coef) = common::naive_boost(&x, &y, mstop, nu);
                instances += 1;
                order_mismatch += usize::from(got.selection_order != order);
                for (a, b) in got.coefficients.iter().zip(&coef) {
                    max_err = max_err.max((a - b).abs());
                }
            }
        }
    }
    outcome(
        order_mismatch == 0 && max_err <= 1e-8,
        format!("{instances} instances, {order_mismatch} order mismatches, max coefficient error {max_err:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let dfs = [1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0];
    let mut t_err = 0.0f64;
    let mut t_points = 0;
    for &df in &dfs {
        for k in 0..25 {
            let t = -20.0 + 40.0 * k as f64 / 24.0 + 0.013;
            t_err = t_err.max((stats::student_t_cdf(t, df).unwrap() - common::t_cdf_quad(t, df)).abs());
            t_points += 1;
        }
    }
    let fdfs = [(1.0, 2.0), (1.0, 10.0), (2.0, 2.0), (3.0, 7.0), (5.0, 30.0), (10.0, 4.0), (20.0, 50.0), (60.0, 120.0)];
    let mut f_err = 0.0f64;
    let mut f_points = 0;
    for &(d1, d2) in &fdfs {
        for k in 1..=25 {
            let x = 0.04 * k as f64 * k as f64 / 2.0;
            f_err = f_err.max((stats::f_cdf(x, d1, d2).unwrap() - common::f_cdf_quad(x, d1, d2)).abs());
            f_points += 1;
        }
    }
    outcome(
        t_err <= 1e-8 && f_err <= 1e-8,
        format!("t: {t_points} points, max error {t_err:.2e}; F: {f_points} points, max error {f_err:.2e}"),
    )
}

/// Simulation settings of the end-to-end benchmark.
pub const PANEL: PanelParams = PanelParams {
    p: 200,
    edge_prob: 0.04,
    weight_low: 0.5,
    weight_high: 1.5,
    interventions: 100,
    knockout_shift: 20.0,
};
const PANEL_N_OBS: usize = 200;
const PANEL_SEED: u64 = 8;
const BENCH_ESTIMATORS: [&str; 5] = ["lcd", "lcd-bst", "lcd-bst-mv", "icp", "boost-baseline"];
const PREVALENCE: f64 = 0.01;
const MAX_FPR: f64 = 0.1;

struct BenchmarkRun {
    /// Every output file, in a fixed order.
    files: Vec<(String, Vec<u8>)>,
    /// Partial AUC and band partial AUC per estimator.
    pauc: BTreeMap<String, (f64, f64)>,
}

fn panel_table() -> ExpressionTable {
    let panel = KnockoutPanel::random(&PANEL, PANEL_SEED).unwrap();
    panel.table(PANEL_N_OBS, PANEL_SEED).unwrap()
}

fn benchmark(table: &ExpressionTable, threads: usize) -> BenchmarkRun {
    let mut files = Vec::new();
    let mut pauc = BTreeMap::new();
    for est in BENCH_ESTIMATORS {
        let mut preds = Vec::new();
        for fold in 0..5 {
            let mut config = RunConfig::new(est, "panel.tsv");
            config.seed = 11;
            config.threads = threads;
            config.folds = Some(FoldSpec { k: 5, seed: 5, test_fold: fold });
            let scores = pipeline::execute_run(table, &config).unwrap();
            let mut buf = Vec::new();
            pipeline::write_predictions(&mut buf, &config.metadata(), &scores, table.gene_names()).unwrap();
            preds.push(pipeline::read_predictions(buf.as_slice(), table.gene_names()).unwrap());
            files.push((format!("{est}.fold{fold}.tsv"), buf));
        }
        let ev = pipeline::evaluate(table, &preds, &[PREVALENCE], 0.99).unwrap().remove(0);
        let mut roc = Vec::new();
        ev.roc.write(&mut roc, PREVALENCE, &[]).unwrap();
        files.push((format!("{est}.roc.tsv"), roc));
        pauc.insert(
            est.to_owned(),
            (ev.roc.partial_auc(MAX_FPR).unwrap(), ev.band.upper_partial_auc(MAX_FPR).unwrap()),
        );
    }
    BenchmarkRun { files, pauc }
}

fn criterion_8(run: &BenchmarkRun) -> Outcome {
    let a = |e: &str| run.pauc[e].0;
    let band = run.pauc["lcd"].1;
    let above = ["boost-baseline", "lcd-bst", "icp"].iter().all(|e| a(e) > run.pauc[*e].1);
    let ordering = a("lcd-bst") >= a("lcd");
    let close = (a("lcd-bst-mv") - a("lcd-bst")).abs() <= 0.05;
    let detail = format!(
        "pAUC@{MAX_FPR}: {}; band upper {band:.4}",
        BENCH_ESTIMATORS.iter().map(|e| format!("{e} {:.4}", a(e))).collect::<Vec<_>>().join(", ")
    );
    outcome(above && ordering && close, detail)
}

fn criterion_9(fix1: &str, fix8: &str, b1: &BenchmarkRun, b8: &BenchmarkRun) -> Outcome {
    let diff: Vec<&str> =
        b1.files.iter().zip(&b8.files).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    outcome(
        fix1 == fix8 && diff.is_empty() && b1.files.len() == b8.files.len(),
        format!(
            "fixture report identical: {}; {} benchmark files, {} differing",
            fix1 == fix8,
            b1.files.len(),
            diff.len()
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut r = common::rng(10);
    let mut max_err = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(2..=300);
        let levels = r.random_range(1..=20);
        let mut entries: Vec<(f64, bool)> =
            (0..n).map(|_| (f64::from(r.random_range(0..levels)), r.random_bool(0.3))).collect();
        if entries.iter().all(|e| e.1) {
            entries[0].1 = false;
        }
        if entries.iter().all(|e| !e.1) {
            entries[0].1 = true;
        }
        let auc = eval::roc_from_entries(entries.clone()).unwrap().auc();
        max_err = max_err.max((auc - common::pairwise_auc(&entries)).abs());
    }
    outcome(max_err <= 1e-12, format!("1000 instances, max |AUC - oracle| {max_err:.2e}"))
}

fn report(id: u32, title: &str, start: Instant, o: &Outcome, failed: &mut Vec<u32>) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{status}] {title}: {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
    if !o.pass {
        failed.push(id);
    }
}

fn main() {
    let mut failed = Vec::new();

    let t = Instant::now();
    let fix1 = pipeline::in_pool(1, fixture_report).unwrap();
    report(1, "fixture identifiability", t, &criterion_1(&fix1), &mut failed);

    let t = Instant::now();
    report(2, "oracle soundness", t, &criterion_2(), &mut failed);
    let t = Instant::now();
    report(3, "ICP enumeration equivalence", t, &criterion_3(), &mut failed);
    let t = Instant::now();
    report(4, "ICP coverage", t, &criterion_4(), &mut failed);
    let t = Instant::now();
    report(5, "test calibration", t, &criterion_5(), &mut failed);
    let t = Instant::now();
    report(6, "boosting reference equivalence", t, &criterion_6(), &mut failed);
    let t = Instant::now();
    report(7, "distribution accuracy", t, &criterion_7(), &mut failed);

    let t = Instant::now();
    let table = panel_table();
    let b1 = benchmark(&table, 1);
    report(8, "end-to-end synthetic benchmark", t, &criterion_8(&b1), &mut failed);

    let t = Instant::now();
    let fix8 = pipeline::in_pool(8, fixture_report).unwrap();
    let b8 = benchmark(&table, 8);
    report(9, "determinism across thread counts", t, &criterion_9(&fix1, &fix8, &b1, &b8), &mut failed);

    let t = Instant::now();
    report(10, "ROC correctness", t, &criterion_10(), &mut failed);

    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
