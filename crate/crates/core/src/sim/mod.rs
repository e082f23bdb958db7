//! Linear structural causal models with a context variable.
//!
//! Each system variable follows `X_j = Σ_i w_ij X_i + σ_j N_j` with Gaussian
//! noise, evaluated in topological order. Context class 0 is the
//! observational regime; every other class carries a list of mechanism
//! changes (perfect interventions or mean shifts). A bidirected edge between
//! two system variables is a standard-normal latent parent with weight 1 on
//! both. Confounding between the context and a variable `X` uses a latent `L`
//! that drives `X` with weight 1 and the context through its sign: class 0
//! samples draw `L` from the negative half of the normal, the other classes
//! from the positive half.

mod graph;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use graph::{ancestors, d_separated, Dmg, DsepOracle};

use crate::data::{ExpressionTable, JciDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Name of the context node in graphs built from a [`LinearScm`].
pub const CONTEXT_NODE: &str = "C";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mechanism {
    /// The equation is replaced by `value + noise_std * N(0, 1)`.
    Perfect { value: f64, noise_std: f64 },
    /// A constant is added to the equation.
    Shift(f64),
}

impl Mechanism {
    /// Hard knockout to `value`.
    pub fn knockout(value: f64) -> Self {
        Mechanism::Perfect { value, noise_std: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearScm {
    names: Vec<String>,
    n_latent: usize,
    /// `(parent, weight)` per variable; system variables first, then latents.
    parents: Vec<Vec<(usize, f64)>>,
    noise_std: Vec<f64>,
    context_targets: BTreeMap<u32, Vec<(usize, Mechanism)>>,
    /// Latents that also drive the context.
    context_latents: Vec<usize>,
}

impl LinearScm {
    /// Edgeless model with unit noise on every variable.
    pub fn new(names: Vec<String>) -> Self {
        let p = names.len();
        LinearScm {
            names,
            n_latent: 0,
            parents: vec![Vec::new(); p],
            noise_std: vec![1.0; p],
            context_targets: BTreeMap::new(),
            context_latents: Vec::new(),
        }
    }

    pub fn n_system(&self) -> usize {
        self.names.len()
    }

    pub fn n_latent(&self) -> usize {
        self.n_latent
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn n_total(&self) -> usize {
        self.names.len() + self.n_latent
    }

    fn check_system(&self, v: usize) -> Result<()> {
        if v < self.n_system() {
            Ok(())
        } else {
            Err(Error::domain(format!("unknown system variable {v}")))
        }
    }

    /// Coefficient of `from` in the equation of `to`.
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.parents.get(to).and_then(|ps| ps.iter().find(|(p, _)| *p == from)).map_or(0.0, |&(_, w)| w)
    }

    /// Adds `from -> to`; rejected if it would close a cycle.
    pub fn add_edge(&mut self, from: usize, to: usize, weight: f64) -> Result<()> {
        self.check_system(from)?;
        self.check_system(to)?;
        if from == to {
            return Err(Error::domain("self-loops are not allowed"));
        }
        if weight == 0.0 {
            return Ok(());
        }
        self.parents[to].retain(|(p, _)| *p != from);
        self.parents[to].push((from, weight));
        if self.topological_order().is_none() {
            self.parents[to].pop();
            return Err(Error::domain(format!("edge {from} -> {to} would create a cycle")));
        }
        Ok(())
    }

    pub fn set_noise_std(&mut self, v: usize, std: f64) -> Result<()> {
        self.check_system(v)?;
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::domain(format!("noise std must be positive, got {std}")));
        }
        self.noise_std[v] = std;
        Ok(())
    }

    pub fn noise_std(&self) -> &[f64] {
        &self.noise_std[..self.n_system()]
    }

    fn add_latent(&mut self, children: &[usize]) -> usize {
        let l = self.n_total();
        self.parents.push(Vec::new());
        self.noise_std.push(1.0);
        self.n_latent += 1;
        for &c in children {
            self.parents[c].push((l, 1.0));
        }
        l
    }

    /// Latent confounder `a <-> b`.
    pub fn add_confounder(&mut self, a: usize, b: usize) -> Result<usize> {
        self.check_system(a)?;
        self.check_system(b)?;
        if a == b {
            return Err(Error::domain("a confounder needs two distinct variables"));
        }
        Ok(self.add_latent(&[a, b]))
    }

    /// Latent confounder between the context and `x`.
    pub fn add_context_confounder(&mut self, x: usize) -> Result<usize> {
        self.check_system(x)?;
        let l = self.add_latent(&[x]);
        self.context_latents.push(l);
        Ok(l)
    }

    /// Registers context class `label` (≥ 1), possibly with no changes.
    pub fn add_context_class(&mut self, label: u32) -> Result<()> {
        if label == 0 {
            return Err(Error::domain("class 0 is the observational regime"));
        }
        self.context_targets.entry(label).or_default();
        Ok(())
    }

    pub fn set_mechanism(&mut self, label: u32, var: usize, mechanism: Mechanism) -> Result<()> {
        self.check_system(var)?;
        self.add_context_class(label)?;
        let changes = self.context_targets.get_mut(&label).expect("class registered above");
        changes.retain(|(v, _)| *v != var);
        changes.push((var, mechanism));
        Ok(())
    }

    /// Class labels including the observational class 0.
    pub fn context_classes(&self) -> Vec<u32> {
        std::iter::once(0).chain(self.context_targets.keys().copied()).collect()
    }

    pub fn mechanisms(&self, label: u32) -> &[(usize, Mechanism)] {
        self.context_targets.get(&label).map_or(&[], Vec::as_slice)
    }

    /// Topological order over all variables, or `None` if cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n_total();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &(p, _) in ps {
                children[p].push(c);
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Causal graph over the system variables plus a context node `C`
    /// (last index). Latents become bidirected edges.
    pub fn dmg(&self) -> Dmg {
        let p = self.n_system();
        let mut names = self.names.clone();
        names.push(CONTEXT_NODE.to_owned());
        let mut g = Dmg::new(names);
        let c = p;
        let mut latent_children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (child, ps) in self.parents.iter().enumerate().take(p) {
            for &(par, _) in ps {
                if par < p {
                    g.add_directed(par, child).expect("valid nodes");
                } else {
                    latent_children.entry(par).or_default().push(child);
                }
            }
        }
        for changes in self.context_targets.values() {
            for &(v, _) in changes {
                g.add_directed(c, v).expect("valid nodes");
            }
        }
        for (l, kids) in &latent_children {
            if self.context_latents.contains(l) {
                for &k in kids {
                    g.add_bidirected(c, k).expect("valid nodes");
                }
            }
            for (i, &a) in kids.iter().enumerate() {
                for &b in &kids[i + 1..] {
                    g.add_bidirected(a, b).expect("valid nodes");
                }
            }
        }
        g
    }

    /// Population covariance of the system variables in the observational
    /// regime. Context latents are treated as standard normal, i.e.
    /// marginalized over the context.
    pub fn observational_covariance(&self) -> Matrix {
        let n = self.n_total();
        let order = self.topological_order().expect("model is acyclic");
        let mut cov = vec![vec![0.0; n]; n];
        let mut done: Vec<usize> = Vec::with_capacity(n);
        for &v in &order {
            for &u in &done {
                let c: f64 = self.parents[v].iter().map(|&(p, w)| w * cov[p][u]).sum();
                cov[v][u] = c;
                cov[u][v] = c;
            }
            let var: f64 = self.parents[v].iter().map(|&(p, w)| w * cov[v][p]).sum::<f64>()
                + self.noise_std[v] * self.noise_std[v];
            cov[v][v] = var;
            done.push(v);
        }
        let p = self.n_system();
        let rows: Vec<Vec<f64>> = (0..p).map(|i| cov[i][..p].to_vec()).collect();
        Matrix::from_rows(&rows).expect("square")
    }

    /// `n` samples from context class `label`: an `n × (p + 1)` matrix of the
    /// system variables followed by the class label. Deterministic in `seed`.
    pub fn sample(&self, label: u32, n: usize, seed: u64) -> Result<Matrix> {
        if label != 0 && !self.context_targets.contains_key(&label) {
            return Err(Error::domain(format!("unknown context class {label}")));
        }
        let order = self.topological_order().ok_or_else(|| Error::domain("model is cyclic"))?;
        let changes: Vec<Option<Mechanism>> = {
            let mut v = vec![None; self.n_total()];
            for &(var, m) in self.mechanisms(label) {
                v[var] = Some(m);
            }
            v
        };
        let p = self.n_system();
        let mut out = Matrix::zeros(n, p + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; self.n_total()];
        for i in 0..n {
            for &v in &order {
                let e: f64 = rng.sample(StandardNormal);
                x[v] = if self.context_latents.contains(&v) {
                    if label == 0 {
                        -e.abs()
                    } else {
                        e.abs()
                    }
                } else {
                    match changes[v] {
                        Some(Mechanism::Perfect { value, noise_std }) => value + noise_std * e,
                        other => {
                            let shift = match other {
                                Some(Mechanism::Shift(s)) => s,
                                _ => 0.0,
                            };
                            self.parents[v].iter().map(|&(pa, w)| w * x[pa]).sum::<f64>()
                                + self.noise_std[v] * e
                                + shift
                        }
                    }
                };
            }
            for (j, &v) in x.iter().take(p).enumerate() {
                out.set(i, j, v);
            }
            out.set(i, p, label as f64);
        }
        Ok(out)
    }

    /// Pools `n_obs` observational samples with `n_int` samples from every
    /// non-observational class into a binary JCI dataset.
    pub fn sample_pooled(&self, n_obs: usize, n_int: usize, seed: u64) -> Result<JciDataset> {
        let p = self.n_system();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut context = Vec::new();
        for (k, label) in self.context_classes().into_iter().enumerate() {
            let n = if label == 0 { n_obs } else { n_int };
            let m = self.sample(label, n, derive_seed(seed, k as u64))?;
            for i in 0..n {
                rows.push(m.row(i)[..p].to_vec());
                context.push(u32::from(label != 0));
            }
        }
        let system = if rows.is_empty() { Matrix::zeros(0, p) } else { Matrix::from_rows(&rows)? };
        JciDataset::new(system, context, self.names.clone())
    }
}

/// [`LinearScm::sample_pooled`] as an expression table. Every
/// non-observational row gets its own unmeasured target label `ctx-NNNN`.
pub fn pooled_table(scm: &LinearScm, n_obs: usize, n_int: usize, seed: u64) -> Result<ExpressionTable> {
    let ds = scm.sample_pooled(n_obs, n_int, seed)?;
    let rows: Vec<Vec<f64>> = (0..ds.n_samples()).map(|i| ds.system().row(i)).collect();
    let (mut ids, mut ann) = (Vec::new(), Vec::new());
    let (mut n0, mut n1) = (0, 0);
    for &c in ds.context().labels() {
        if c == 0 {
            n0 += 1;
            ids.push(format!("obs{n0:04}"));
            ann.push(None);
        } else {
            n1 += 1;
            ids.push(format!("int{n1:04}"));
            ann.push(Some(format!("ctx-{n1:04}")));
        }
    }
    ExpressionTable::new(ids, scm.names().to_vec(), Matrix::from_rows(&rows)?, ann)
}

pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Zero-padded gene names `G01`, `G02`, ...
pub fn gene_names(p: usize) -> Vec<String> {
    let width = p.to_string().len();
    (1..=p).map(|i| format!("G{i:0width$}")).collect()
}

/// Random DAG over `p` variables: a uniform random order, each forward pair
/// an edge with probability `edge_prob`, weights uniform on
/// `±[weight_low, weight_high]`, noise std uniform on `[0.5, 1.5]`.
pub fn random_scm(p: usize, edge_prob: f64, weight_low: f64, weight_high: f64, seed: u64) -> Result<LinearScm> {
    if p < 2 {
        return Err(Error::domain("need at least 2 variables"));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::domain(format!("edge probability must lie in [0, 1], got {edge_prob}")));
    }
    if !(weight_low > 0.0 && weight_low <= weight_high) {
        return Err(Error::domain("weights need 0 < low <= high"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut scm = LinearScm::new(gene_names(p));
    for a in 0..p {
        for b in a + 1..p {
            if rng.random_bool(edge_prob) {
                let mag = rng.random_range(weight_low..=weight_high);
                let w = if rng.random_bool(0.5) { mag } else { -mag };
                scm.add_edge(order[a], order[b], w)?;
            }
        }
    }
    for v in 0..p {
        let s = rng.random_range(0.5..=1.5);
        scm.set_noise_std(v, s)?;
    }
    Ok(scm)
}

/// The small example graphs: three patterns where LCD identifies `X -> Y`
/// and one with two parents where only ICP does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    /// `C -> X -> Y`.
    LcdChain,
    /// `C -> X -> Y` with `C <-> X`.
    LcdChainConfounded,
    /// `C <-> X -> Y`.
    LcdInstrumentConfounded,
    /// `C -> X1`, `C -> X2`, `X1 -> Y`, `X2 -> Y`.
    IcpDiamond,
}

impl Fixture {
    pub const ALL: [Fixture; 4] =
        [Fixture::LcdChain, Fixture::LcdChainConfounded, Fixture::LcdInstrumentConfounded, Fixture::IcpDiamond];

    pub fn name(&self) -> &'static str {
        match self {
            Fixture::LcdChain => "lcd-chain",
            Fixture::LcdChainConfounded => "lcd-chain-confounded",
            Fixture::LcdInstrumentConfounded => "lcd-instrument-confounded",
            Fixture::IcpDiamond => "icp-diamond",
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Fixture::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| Error::domain(format!("unknown fixture `{s}`")))
    }
}

/// Weight of every fixture edge and size of every context mean shift.
pub const FIXTURE_WEIGHT: f64 = 1.0;

/// Builds `fixture` with unit weights, unit noise and binary context. Direct
/// context effects are mean shifts of [`FIXTURE_WEIGHT`] in class 1.
pub fn fixture(fixture: Fixture) -> LinearScm {
    let w = FIXTURE_WEIGHT;
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
    let build = || -> Result<LinearScm> {
        let mut scm;
        match fixture {
            Fixture::LcdChain | Fixture::LcdChainConfounded | Fixture::LcdInstrumentConfounded => {
                scm = LinearScm::new(names(&["X", "Y"]));
                scm.add_edge(0, 1, w)?;
                scm.add_context_class(1)?;
                if fixture != Fixture::LcdInstrumentConfounded {
                    scm.set_mechanism(1, 0, Mechanism::Shift(w))?;
                }
                if fixture != Fixture::LcdChain {
                    scm.add_context_confounder(0)?;
                }
            }
            Fixture::IcpDiamond => {
                scm = LinearScm::new(names(&["X1", "X2", "Y"]));
                scm.add_edge(0, 2, w)?;
                scm.add_edge(1, 2, w)?;
                scm.set_mechanism(1, 0, Mechanism::Shift(w))?;
                scm.set_mechanism(1, 1, Mechanism::Shift(w))?;
            }
        }
        Ok(scm)
    };
    build().expect("fixture definitions are valid")
}

/// A random linear SCM with one knockout experiment per target gene.
#[derive(Debug, Clone, PartialEq)]
pub struct KnockoutPanel {
    pub scm: LinearScm,
    /// Knocked-out gene of each context class `1..=targets.len()`.
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelParams {
    pub p: usize,
    pub edge_prob: f64,
    pub weight_low: f64,
    pub weight_high: f64,
    pub interventions: usize,
    /// Knockout value in units of the target's observational standard
    /// deviation, below zero.
    pub knockout_shift: f64,
}

impl Default for PanelParams {
    fn default() -> Self {
        PanelParams {
            p: 200,
            edge_prob: 0.04,
            weight_low: 0.5,
            weight_high: 1.5,
            interventions: 100,
            knockout_shift: 20.0,
        }
    }
}

impl KnockoutPanel {
    pub fn random(params: &PanelParams, seed: u64) -> Result<Self> {
        if params.interventions > params.p {
            return Err(Error::domain("more interventions than genes"));
        }
        let mut scm = random_scm(params.p, params.edge_prob, params.weight_low, params.weight_high, seed)?;
        let cov = scm.observational_covariance();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
        let targets: Vec<usize> = rand::seq::index::sample(&mut rng, params.p, params.interventions).into_vec();
        for (k, &t) in targets.iter().enumerate() {
            let value = -params.knockout_shift * cov.get(t, t).sqrt();
            scm.set_mechanism(k as u32 + 1, t, Mechanism::knockout(value))?;
        }
        Ok(KnockoutPanel { scm, targets })
    }

    /// `n_obs` observational rows followed by one row per knockout.
    pub fn table(&self, n_obs: usize, seed: u64) -> Result<ExpressionTable> {
        let p = self.scm.n_system();
        let obs = self.scm.sample(0, n_obs, derive_seed(seed, 0))?;
        let mut rows: Vec<Vec<f64>> = (0..n_obs).map(|i| obs.row(i)[..p].to_vec()).collect();
        let mut ids: Vec<String> = (0..n_obs).map(|i| format!("obs{:04}", i + 1)).collect();
        let mut ann: Vec<Option<String>> = vec![None; n_obs];
        for (k, &t) in self.targets.iter().enumerate() {
            let label = k as u32 + 1;
            let m = self.scm.sample(label, 1, derive_seed(seed, u64::from(label)))?;
            rows.push(m.row(0)[..p].to_vec());
            ids.push(format!("ko{:04}", k + 1));
            ann.push(Some(self.scm.names()[t].clone()));
        }
        ExpressionTable::new(ids, self.scm.names().to_vec(), Matrix::from_rows(&rows)?, ann)
    }
}
