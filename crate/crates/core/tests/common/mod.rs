//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use lcd_core::indep::{self, ContextVector};
use lcd_core::sim::Dmg;
use lcd_core::{JciDataset, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`, started from 64 panels so
/// that narrow peaks are not missed.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 64;
    if a == b {
        return 0.0;
    }
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == PANELS { b } else { lo + h };
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(f, lo, hi, fa, fm, fb, whole, tol / PANELS as f64, 50)
        })
        .sum()
}

/// Student-t CDF by quadrature (df >= 1). With `s = sqrt(df) tan(theta)` the
/// density becomes proportional to `cos(theta)^(df - 1)` on `(-pi/2, pi/2)`.
pub fn t_cdf_quad(t: f64, df: f64) -> f64 {
    let f = |th: f64| th.cos().powf(df - 1.0);
    let half = integrate(&f, 0.0, std::f64::consts::FRAC_PI_2, 1e-14);
    let part = integrate(&f, 0.0, (t.abs() / df.sqrt()).atan(), 1e-14);
    let tail = 0.5 * (half - part) / half;
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `∫_0^u w^(a-1) (1-w)^(b-1) dw` for `b >= 1`.
fn beta_integral(a: f64, b: f64, u: f64) -> f64 {
    if a < 1.0 {
        // w = s^(1/a) removes the singularity at 0.
        let f = |s: f64| (1.0 - s.powf(1.0 / a)).powf(b - 1.0) / a;
        integrate(&f, 0.0, u.powf(a), 1e-14)
    } else {
        let f = |w: f64| w.powf(a - 1.0) * (1.0 - w).powf(b - 1.0);
        integrate(&f, 0.0, u, 1e-14)
    }
}

/// F CDF by quadrature of the beta density (d2 >= 2).
pub fn f_cdf_quad(x: f64, d1: f64, d2: f64) -> f64 {
    let (a, b) = (d1 / 2.0, d2 / 2.0);
    let u = d1 * x / (d1 * x + d2);
    beta_integral(a, b, u) / beta_integral(a, b, 1.0)
}

/// Componentwise L2-boosting written directly on residuals.
pub fn naive_boost(x: &Matrix, y: &[f64], mstop: usize, nu: f64) -> (Vec<usize>, Vec<f64>) {
    let (n, p) = (x.nrows(), x.ncols());
    let mut z: Vec<Option<Vec<f64>>> = Vec::new();
    for j in 0..p {
        let c = x.col(j);
        let m = c.iter().sum::<f64>() / n as f64;
        let v = c.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n as f64 - 1.0);
        let constant = c.iter().all(|&a| a == c[0]);
        z.push(if constant || v <= 0.0 { None } else { Some(c.iter().map(|a| (a - m) / v.sqrt()).collect()) });
    }
    let ym = y.iter().sum::<f64>() / n as f64;
    let mut r: Vec<f64> = y.iter().map(|a| a - ym).collect();
    let mut coef = vec![0.0; p];
    let mut order = Vec::new();
    for _ in 0..mstop {
        let mut best: Option<(usize, f64, f64)> = None;
        for (j, col) in z.iter().enumerate() {
            let Some(col) = col else { continue };
            let xx: f64 = col.iter().map(|a| a * a).sum();
            let xr: f64 = col.iter().zip(&r).map(|(a, b)| a * b).sum();
            let beta = xr / xx;
            // Drop in residual sum of squares from fitting this column.
            let reduction = beta * xr;
            if best.is_none_or(|b| reduction > b.1) {
                best = Some((j, reduction, beta));
            }
        }
        let Some((j, _, beta)) = best else { break };
        let col = z[j].as_ref().unwrap();
        for (ri, ci) in r.iter_mut().zip(col) {
            *ri -= nu * beta * ci;
        }
        coef[j] += nu * beta;
        if !order.contains(&j) {
            order.push(j);
        }
    }
    (order, coef)
}

/// ICP by plain enumeration of all subsets via bit masks.
pub fn naive_icp(effect: usize, candidates: &[usize], data: &JciDataset, alpha: f64) -> (Vec<usize>, usize) {
    let y = data.column(effect);
    let n = data.n_samples();
    let mut out: Option<BTreeSet<usize>> = None;
    let mut accepted = 0;
    for mask in 0u32..(1 << candidates.len()) {
        let set: Vec<usize> = (0..candidates.len()).filter(|&i| mask >> i & 1 == 1).map(|i| candidates[i]).collect();
        let cols: Vec<&[f64]> = set.iter().map(|&j| data.column(j)).collect();
        let design = if cols.is_empty() { Matrix::empty(n) } else { Matrix::from_columns(n, &cols).unwrap() };
        let Ok(d) = indep::mean_var_invariance_test(y, &design, data.context(), alpha) else { continue };
        if d.dependent {
            continue;
        }
        accepted += 1;
        let s: BTreeSet<usize> = set.into_iter().collect();
        out = Some(match out {
            None => s,
            Some(o) => o.intersection(&s).copied().collect(),
        });
    }
    (out.unwrap_or_default().into_iter().collect(), accepted)
}

/// Probability that a random positive outranks a random negative, ties half.
pub fn pairwise_auc(entries: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = entries.iter().filter(|e| e.1).map(|e| e.0).collect();
    let neg: Vec<f64> = entries.iter().filter(|e| !e.1).map(|e| e.0).collect();
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            wins += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Random DMG over `p` system nodes `0..p` plus a context node `p` that has
/// no incoming directed edges.
pub fn random_context_dmg(p: usize, edge_prob: f64, context_prob: f64, latent_prob: f64, r: &mut ChaCha8Rng) -> Dmg {
    let mut names: Vec<String> = (0..p).map(|i| format!("V{i}")).collect();
    names.push("C".into());
    let mut g = Dmg::new(names);
    let mut order: Vec<usize> = (0..p).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), r);
    for a in 0..p {
        for b in a + 1..p {
            if r.random_bool(edge_prob) {
                g.add_directed(order[a], order[b]).unwrap();
            }
        }
    }
    for v in 0..p {
        if r.random_bool(context_prob) {
            g.add_directed(p, v).unwrap();
        }
        if r.random_bool(latent_prob) {
            g.add_bidirected(p, v).unwrap();
        }
        for w in v + 1..p {
            if r.random_bool(latent_prob) {
                g.add_bidirected(v, w).unwrap();
            }
        }
    }
    g
}

/// Ancestors by repeated parent expansion until a fixed point.
pub fn ancestors_fixed_point(g: &Dmg, node: usize) -> BTreeSet<usize> {
    let mut set: BTreeSet<usize> = g.parents(node).into_iter().collect();
    loop {
        let next: BTreeSet<usize> = set.iter().flat_map(|&v| g.parents(v)).chain(set.iter().copied()).collect();
        if next == set {
            break;
        }
        set = next;
    }
    set.remove(&node);
    set
}

/// d-separation by enumerating every simple path between `a` and `b` in the
/// graph with each bidirected edge replaced by a latent parent.
pub fn dsep_by_paths(g: &Dmg, a: usize, b: usize, z: &BTreeSet<usize>) -> bool {
    let n = g.n_nodes();
    let mut edges: Vec<(usize, usize)> = g.directed_edges().iter().copied().collect();
    for (k, &(x, y)) in g.bidirected_edges().iter().enumerate() {
        edges.push((n + k, x));
        edges.push((n + k, y));
    }
    let total = n + g.bidirected_edges().len();
    let mut children = vec![Vec::new(); total];
    let mut nbrs = vec![Vec::new(); total];
    for &(p, c) in &edges {
        children[p].push(c);
        nbrs[p].push(c);
        nbrs[c].push(p);
    }
    let has_edge = |from: usize, to: usize| edges.contains(&(from, to));
    let descendant_in_z = |v: usize| {
        let mut stack = vec![v];
        let mut seen = vec![false; total];
        while let Some(u) = stack.pop() {
            if z.contains(&u) {
                return true;
            }
            for &c in &children[u] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    };
    let blocked = |path: &[usize]| {
        path.windows(3).any(|w| {
            let (u, v, x) = (w[0], w[1], w[2]);
            if has_edge(u, v) && has_edge(x, v) {
                !descendant_in_z(v)
            } else {
                z.contains(&v)
            }
        })
    };
    fn walk(
        v: usize,
        b: usize,
        nbrs: &[Vec<usize>],
        path: &mut Vec<usize>,
        found: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if v == b {
            return found(path);
        }
        for &w in &nbrs[v] {
            if !path.contains(&w) {
                path.push(w);
                if walk(w, b, nbrs, path, found) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let mut path = vec![a];
    let open_path_exists = walk(a, b, &nbrs, &mut path, &mut |p: &[usize]| !blocked(p));
    !open_path_exists
}

/// Binary context vector with `n0` zeros then `n1` ones.
pub fn binary_context(n0: usize, n1: usize) -> ContextVector {
    ContextVector::new(std::iter::repeat_n(0, n0).chain(std::iter::repeat_n(1, n1)).collect()).unwrap()
}

pub fn normal_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

pub fn count_map<T: Ord + Clone>(items: &[T]) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i.clone()).or_insert(0) += 1;
    }
    m
}
