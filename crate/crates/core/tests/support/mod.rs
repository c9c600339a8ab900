//! Independent oracles shared by integration tests.
#![allow(dead_code)]

use edp::graph::{EdgeId, MultiGraph, VertexId};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact simplex for `max c·x` s.t. `A x ≤ b`, `x ≥ 0`, with `b ≥ 0`, using
/// Bland's rule on a dense rational tableau.
pub fn simplex_max(a: &[Vec<i64>], b: &[i64], c: &[i64]) -> BigRational {
    let m = a.len();
    let n = c.len();
    let q = |x: i64| BigRational::from_integer(x.into());
    // Row i: [A_i | e_i | b_i]; last row: objective.
    let width = n + m + 1;
    let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(m + 1);
    for i in 0..m {
        let mut row = vec![BigRational::zero(); width];
        for j in 0..n {
            row[j] = q(a[i][j]);
        }
        row[n + i] = BigRational::one();
        row[width - 1] = q(b[i]);
        t.push(row);
    }
    let mut obj = vec![BigRational::zero(); width];
    for j in 0..n {
        obj[j] = -q(c[j]);
    }
    t.push(obj);
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(col) = (0..width - 1).find(|&j| t[m][j].is_negative()) else { break };
        let mut best: Option<(BigRational, usize)> = None;
        for i in 0..m {
            if t[i][col].is_positive() {
                let ratio = &t[i][width - 1] / &t[i][col];
                let better = match &best {
                    None => true,
                    Some((r, bi)) => ratio < *r || (ratio == *r && basis[i] < basis[*bi]),
                };
                if better {
                    best = Some((ratio, i));
                }
            }
        }
        let (_, row) = best.expect("bounded LP");
        let piv = t[row][col].clone();
        for j in 0..width {
            t[row][j] = &t[row][j] / &piv;
        }
        for i in 0..=m {
            if i != row && !t[i][col].is_zero() {
                let f = t[i][col].clone();
                for j in 0..width {
                    let d = &f * &t[row][j];
                    t[i][j] = &t[i][j] - d;
                }
            }
        }
        basis[row] = col;
    }
    t[m][width - 1].clone()
}

/// Every simple s-t path as a list of edge ids.
pub fn simple_paths(g: &MultiGraph, s: VertexId, t: VertexId) -> Vec<Vec<EdgeId>> {
    fn go(g: &MultiGraph, v: VertexId, t: VertexId, seen: &mut Vec<bool>, cur: &mut Vec<EdgeId>, out: &mut Vec<Vec<EdgeId>>) {
        if v == t {
            out.push(cur.clone());
            return;
        }
        for &e in g.incident(v) {
            let w = g.other(e, v);
            if !seen[w as usize] {
                seen[w as usize] = true;
                cur.push(e);
                go(g, w, t, seen, cur, out);
                cur.pop();
                seen[w as usize] = false;
            }
        }
    }
    let mut seen = vec![false; g.vertex_bound()];
    seen[s as usize] = true;
    let mut out = vec![];
    go(g, s, t, &mut seen, &mut vec![], &mut out);
    out
}

/// Exact path-formulation EDP LP: max Σ x_i, edge loads ≤ 1, x_i ≤ 1.
pub fn exact_edp_lp(g: &MultiGraph, pairs: &[(VertexId, VertexId)]) -> f64 {
    let paths: Vec<(usize, Vec<EdgeId>)> = pairs
        .iter()
        .enumerate()
        .flat_map(|(i, &(s, t))| simple_paths(g, s, t).into_iter().map(move |p| (i, p)))
        .collect();
    if paths.is_empty() {
        return 0.0;
    }
    let edges: Vec<EdgeId> = g.edges().collect();
    let mut a = vec![];
    let mut b = vec![];
    for &e in &edges {
        a.push(paths.iter().map(|(_, p)| p.contains(&e) as i64).collect());
        b.push(1);
    }
    for i in 0..pairs.len() {
        a.push(paths.iter().map(|(j, _)| (*j == i) as i64).collect());
        b.push(1);
    }
    let c = vec![1; paths.len()];
    to_f64(&simplex_max(&a, &b, &c))
}

/// Exact maximum concurrent flow λ with unit demands and capacities.
pub fn exact_concurrent(g: &MultiGraph, pairs: &[(VertexId, VertexId)]) -> f64 {
    let per: Vec<Vec<Vec<EdgeId>>> = pairs.iter().map(|&(s, t)| simple_paths(g, s, t)).collect();
    if per.iter().any(|p| p.is_empty()) {
        return 0.0;
    }
    let paths: Vec<(usize, &Vec<EdgeId>)> =
        per.iter().enumerate().flat_map(|(i, ps)| ps.iter().map(move |p| (i, p))).collect();
    // Variables: path flows, then λ (last).
    let nv = paths.len() + 1;
    let mut a = vec![];
    let mut b = vec![];
    for e in g.edges() {
        let mut row: Vec<i64> = paths.iter().map(|(_, p)| p.contains(&e) as i64).collect();
        row.push(0);
        a.push(row);
        b.push(1);
    }
    for i in 0..pairs.len() {
        let mut row: Vec<i64> = paths.iter().map(|(j, _)| -((*j == i) as i64)).collect();
        row.push(1);
        a.push(row);
        b.push(0);
    }
    let mut c = vec![0; nv];
    c[nv - 1] = 1;
    to_f64(&simplex_max(&a, &b, &c))
}

pub fn to_f64(x: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap()
}

/// Minimum s-t edge cut by enumerating every vertex bipartition.
pub fn brute_min_cut(g: &MultiGraph, s: VertexId, t: VertexId) -> u64 {
    let n = g.vertex_bound();
    let mut best = u64::MAX;
    for mask in 0u64..(1 << n) {
        if mask >> s & 1 == 0 || mask >> t & 1 == 1 {
            continue;
        }
        let c = g
            .edges()
            .filter(|&e| {
                let (u, v) = g.ends(e);
                (mask >> u & 1) != (mask >> v & 1)
            })
            .count();
        best = best.min(c as u64);
    }
    best
}

/// Labelled simple graph on `n` vertices from a bitmask over vertex pairs.
pub fn graph_from_mask(n: usize, mask: u64) -> MultiGraph {
    let mut es = vec![];
    let mut bit = 0;
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if mask >> bit & 1 == 1 {
                es.push((u, v));
            }
            bit += 1;
        }
    }
    MultiGraph::from_edges(n, &es).unwrap()
}

/// Minimum of |E(S, S̄)| / |S| over nonempty S with |S| ≤ n/2 (exact expansion).
pub fn brute_expansion(n: usize, edges: &[(usize, usize)]) -> f64 {
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let size = mask.count_ones() as usize;
        if size > n / 2 {
            continue;
        }
        let cross = edges.iter().filter(|&&(u, v)| (mask >> u & 1) != (mask >> v & 1)).count();
        best = best.min(cross as f64 / size as f64);
    }
    best
}

/// Connected multigraph on `n` vertices with `m ≥ n − 1` edges: a random
/// tree plus uniform extra non-loop edges.
pub fn random_connected<R: rand::Rng>(n: usize, m: usize, rng: &mut R) -> MultiGraph {
    let mut es = vec![];
    for v in 1..n as u32 {
        es.push((rng.gen_range(0..v), v));
    }
    while es.len() < m.max(n - 1) {
        let (u, v) = (rng.gen_range(0..n as u32), rng.gen_range(0..n as u32));
        if u != v {
            es.push((u, v));
        }
    }
    MultiGraph::from_edges(n, &es).unwrap()
}
