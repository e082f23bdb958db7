//! Directed mixed graphs, ancestors and d-separation.
//!
//! Bidirected edges stand for latent common causes. d-separation expands each
//! of them into an explicit latent parent and then uses the moralization
//! criterion: `a` and `b` are d-separated by `z` iff they are disconnected
//! after removing `z` from the moral graph of the ancestral set of
//! `{a, b} ∪ z`.
//!
//! Sidecar file format (tab-separated, one statement per line):
//!
//! ```text
//! nodes<TAB>C<TAB>X<TAB>Y
//! C<TAB>-><TAB>X
//! C<TAB><-><TAB>X
//! ```
//!
//! Lines starting with `#` are comments.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::lcd::LcdTests;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dmg {
    names: Vec<String>,
    directed: BTreeSet<(usize, usize)>,
    /// Stored as `(min, max)`.
    bidirected: BTreeSet<(usize, usize)>,
}

impl Dmg {
    pub fn new(names: Vec<String>) -> Self {
        Dmg { names, ..Default::default() }
    }

    pub fn with_nodes(n: usize) -> Self {
        Dmg::new((0..n).map(|i| format!("V{i}")).collect())
    }

    pub fn add_node(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v < self.names.len() {
            Ok(())
        } else {
            Err(Error::domain(format!("unknown node {v}")))
        }
    }

    pub fn add_directed(&mut self, from: usize, to: usize) -> Result<()> {
        self.check_node(from)?;
        self.check_node(to)?;
        if from == to {
            return Err(Error::domain("self-loops are not allowed"));
        }
        self.directed.insert((from, to));
        Ok(())
    }

    pub fn add_bidirected(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_node(a)?;
        self.check_node(b)?;
        if a == b {
            return Err(Error::domain("self-loops are not allowed"));
        }
        self.bidirected.insert((a.min(b), a.max(b)));
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn directed_edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.directed
    }

    pub fn bidirected_edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.bidirected
    }

    pub fn has_bidirected(&self, a: usize, b: usize) -> bool {
        self.bidirected.contains(&(a.min(b), a.max(b)))
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.directed.iter().filter(|e| e.1 == v).map(|e| e.0).collect()
    }

    pub fn is_acyclic(&self) -> bool {
        let n = self.n_nodes();
        let mut indeg = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for &(a, b) in &self.directed {
            indeg[b] += 1;
            children[a].push(b);
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop_front() {
            seen += 1;
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        seen == n
    }

    /// Copy without the directed edges leaving `v`.
    pub fn without_outgoing(&self, v: usize) -> Dmg {
        let mut g = self.clone();
        g.directed.retain(|e| e.0 != v);
        g
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "nodes")?;
        for n in &self.names {
            write!(w, "\t{n}")?;
        }
        writeln!(w)?;
        for &(a, b) in &self.directed {
            writeln!(w, "{}\t->\t{}", self.names[a], self.names[b])?;
        }
        for &(a, b) in &self.bidirected {
            writeln!(w, "{}\t<->\t{}", self.names[a], self.names[b])?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Dmg> {
        let mut g: Option<Dmg> = None;
        let mut index: HashMap<String, usize> = HashMap::new();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields[0] == "nodes" {
                if g.is_some() {
                    return Err(Error::Parse { line: lineno, msg: "repeated `nodes` line".into() });
                }
                let names: Vec<String> = fields[1..].iter().map(|s| s.to_string()).collect();
                for (j, n) in names.iter().enumerate() {
                    if index.insert(n.clone(), j).is_some() {
                        return Err(Error::Parse { line: lineno, msg: format!("duplicate node `{n}`") });
                    }
                }
                g = Some(Dmg::new(names));
                continue;
            }
            let graph =
                g.as_mut().ok_or_else(|| Error::Parse { line: lineno, msg: "edges before the `nodes` line".into() })?;
            if fields.len() != 3 {
                return Err(Error::Parse { line: lineno, msg: "expected `from<TAB>kind<TAB>to`".into() });
            }
            let lookup = |s: &str| {
                index.get(s).copied().ok_or_else(|| Error::Parse { line: lineno, msg: format!("unknown node `{s}`") })
            };
            let (a, b) = (lookup(fields[0])?, lookup(fields[2])?);
            let res = match fields[1] {
                "->" => graph.add_directed(a, b),
                "<->" => graph.add_bidirected(a, b),
                k => return Err(Error::Parse { line: lineno, msg: format!("unknown edge kind `{k}`") }),
            };
            res.map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        }
        g.ok_or(Error::Parse { line: 1, msg: "missing `nodes` line".into() })
    }
}

/// Ancestors of `node` along directed edges, excluding `node` itself.
pub fn ancestors(dmg: &Dmg, node: usize) -> Result<BTreeSet<usize>> {
    dmg.check_node(node)?;
    let mut parents = vec![Vec::new(); dmg.n_nodes()];
    for &(a, b) in &dmg.directed {
        parents[b].push(a);
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![node];
    while let Some(v) = stack.pop() {
        for &p in &parents[v] {
            if p != node && seen.insert(p) {
                stack.push(p);
            }
        }
    }
    Ok(seen)
}

/// Whether `a` and `b` are d-separated given `z` in the acyclic graph `dmg`.
pub fn d_separated(dmg: &Dmg, a: usize, b: usize, z: &[usize]) -> Result<bool> {
    dmg.check_node(a)?;
    dmg.check_node(b)?;
    for &v in z {
        dmg.check_node(v)?;
    }
    if a == b {
        return Err(Error::domain("d-separation needs two distinct nodes"));
    }
    if z.contains(&a) || z.contains(&b) {
        return Err(Error::domain("the conditioning set must not contain the tested nodes"));
    }
    if !dmg.is_acyclic() {
        return Err(Error::domain("d-separation requires an acyclic graph"));
    }

    // Expand bidirected edges into latent parents.
    let n = dmg.n_nodes();
    let total = n + dmg.bidirected.len();
    let mut parents = vec![Vec::new(); total];
    for &(p, c) in &dmg.directed {
        parents[c].push(p);
    }
    for (k, &(x, y)) in dmg.bidirected.iter().enumerate() {
        parents[x].push(n + k);
        parents[y].push(n + k);
    }

    // Ancestral closure of {a, b} ∪ z.
    let mut relevant = vec![false; total];
    let mut stack: Vec<usize> = z.iter().copied().chain([a, b]).collect();
    for &v in &stack {
        relevant[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &p in &parents[v] {
            if !relevant[p] {
                relevant[p] = true;
                stack.push(p);
            }
        }
    }

    // Moral graph restricted to the ancestral set.
    let mut adj = vec![Vec::new(); total];
    for v in (0..total).filter(|&v| relevant[v]) {
        let pa = &parents[v];
        for (i, &p) in pa.iter().enumerate() {
            adj[v].push(p);
            adj[p].push(v);
            for &q in &pa[i + 1..] {
                adj[p].push(q);
                adj[q].push(p);
            }
        }
    }

    let mut blocked = vec![false; total];
    for &v in z {
        blocked[v] = true;
    }
    let mut seen = vec![false; total];
    seen[a] = true;
    let mut queue = VecDeque::from([a]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if w == b {
                return Ok(false);
            }
            if !seen[w] && !blocked[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    Ok(true)
}

/// LCD tests answered by d-separation: p-value 0 for connected pairs, 1 for
/// separated ones.
pub struct DsepOracle<'a> {
    dmg: &'a Dmg,
    context: usize,
    /// Graph node of each system variable.
    system: Vec<usize>,
}

impl<'a> DsepOracle<'a> {
    pub fn new(dmg: &'a Dmg, context: usize, system: Vec<usize>) -> Result<Self> {
        dmg.check_node(context)?;
        for &v in &system {
            dmg.check_node(v)?;
        }
        if system.contains(&context) {
            return Err(Error::domain("the context node cannot be a system variable"));
        }
        Ok(DsepOracle { dmg, context, system })
    }

    fn p(&self, a: usize, b: usize, z: &[usize]) -> Result<f64> {
        Ok(if d_separated(self.dmg, a, b, z)? { 1.0 } else { 0.0 })
    }
}

impl LcdTests for DsepOracle<'_> {
    fn context_marginal(&self, x: usize) -> Result<f64> {
        self.p(self.context, self.system[x], &[])
    }

    fn pair_marginal(&self, x: usize, y: usize) -> Result<f64> {
        self.p(self.system[x], self.system[y], &[])
    }

    fn context_given(&self, y: usize, x: usize) -> Result<f64> {
        self.p(self.context, self.system[y], &[self.system[x]])
    }
}
