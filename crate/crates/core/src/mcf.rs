//! Multicommodity routing: budgeted integral matching routing and the
//! Garg–Könemann approximation for the EDP LP and concurrent flow.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::error::{ensure, Result};
use crate::flow::{max_flow_integral, Endpoint, FlowProblem, FlowResult};
use crate::graph::{edge_loads, EdgeId, MultiGraph, Path, VertexId, VertexSet};

#[derive(Clone, Debug, PartialEq)]
pub enum MatchingOutcome {
    /// One path per pair, in input order, with congestion at most the budget.
    Routed(Vec<Path>),
    /// `budget * |out(side)| < crossing`: no routing within budget exists.
    Infeasible { side: VertexSet, capacity: u64, crossing: u64 },
    /// The heuristic found neither a routing nor a violated cut condition.
    Unresolved { best_congestion: u32 },
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    cost: f64,
    v: VertexId,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost.total_cmp(&self.cost).then_with(|| o.v.cmp(&self.v))
    }
}

/// Dijkstra under nonnegative edge lengths; returns `(distance, path)`.
pub fn shortest_path(
    g: &MultiGraph,
    s: VertexId,
    t: VertexId,
    len: &dyn Fn(EdgeId) -> f64,
) -> Option<(f64, Path)> {
    let n = g.vertex_bound();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<EdgeId>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[s as usize] = 0.0;
    heap.push(Entry { cost: 0.0, v: s });
    while let Some(Entry { cost, v }) = heap.pop() {
        if cost > dist[v as usize] {
            continue;
        }
        if v == t {
            break;
        }
        for &e in g.incident(v) {
            let w = g.other(e, v);
            let c = cost + len(e);
            if c < dist[w as usize] {
                dist[w as usize] = c;
                pred[w as usize] = Some(e);
                heap.push(Entry { cost: c, v: w });
            }
        }
    }
    if !dist[t as usize].is_finite() {
        return None;
    }
    let mut verts = vec![t];
    let mut edges = vec![];
    let mut v = t;
    while v != s {
        let e = pred[v as usize]?;
        edges.push(e);
        v = g.other(e, v);
        verts.push(v);
    }
    verts.reverse();
    edges.reverse();
    Some((dist[t as usize], Path { verts, edges }))
}

/// Routes every pair integrally with per-edge load at most `budget`.
///
/// First looks for a cut violating the cut condition among the pairwise
/// minimum cuts, then runs negotiated-congestion rip-up and reroute.
pub fn route_matching(g: &MultiGraph, pairs: &[(VertexId, VertexId)], budget: u32) -> Result<MatchingOutcome> {
    let mut seen = BTreeSet::new();
    for &(s, t) in pairs {
        ensure!(g.has_vertex(s) && g.has_vertex(t), Malformed, "unknown vertex in matching");
        ensure!(seen.insert(s) && seen.insert(t), Malformed, "repeated vertex in matching");
    }
    ensure!(budget > 0, Precondition, "budget must be positive");
    if pairs.is_empty() {
        return Ok(MatchingOutcome::Routed(vec![]));
    }
    if let Some(w) = cut_witness(g, pairs, budget)? {
        return Ok(w);
    }
    let mut history = vec![0.0f64; g.edge_bound()];
    let mut best = u32::MAX;
    let mut pressure = 0.5;
    for _ in 0..60 {
        let mut load = vec![0u32; g.edge_bound()];
        let mut paths = Vec::with_capacity(pairs.len());
        for &(s, t) in pairs {
            let cost = |e: EdgeId| {
                let over = (load[e as usize] + 1).saturating_sub(budget) as f64;
                (1.0 + history[e as usize]) * (1.0 + pressure * over)
            };
            let (_, p) = shortest_path(g, s, t, &cost).expect("pair connected after cut check");
            for &e in &p.edges {
                load[e as usize] += 1;
            }
            paths.push(p);
        }
        let worst = load.iter().copied().max().unwrap_or(0);
        best = best.min(worst);
        if worst <= budget {
            return Ok(MatchingOutcome::Routed(paths));
        }
        for (e, &l) in load.iter().enumerate() {
            if l > budget {
                history[e] += (l - budget) as f64;
            }
        }
        pressure *= 1.6;
    }
    Ok(MatchingOutcome::Unresolved { best_congestion: best })
}

fn cut_witness(g: &MultiGraph, pairs: &[(VertexId, VertexId)], budget: u32) -> Result<Option<MatchingOutcome>> {
    for &(s, t) in pairs {
        let mut p = FlowProblem::new(g, 1);
        p.sources.push((Endpoint::Vertex(s), u32::MAX));
        p.sinks.push((Endpoint::Vertex(t), u32::MAX));
        let FlowResult::Cut { side, .. } = max_flow_integral(&p, pairs.len() as u64 + 1)? else {
            continue;
        };
        let capacity = g.out_edges(&side)?.len() as u64;
        let crossing = pairs.iter().filter(|(a, b)| side.contains(a) != side.contains(b)).count() as u64;
        if capacity * (budget as u64) < crossing {
            return Ok(Some(MatchingOutcome::Infeasible { side, capacity, crossing }));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpMode {
    /// max Σ x_i subject to unit edge capacities and x_i ≤ 1.
    Edp,
    /// max λ such that every pair routes λ units.
    Concurrent,
}

#[derive(Clone, Debug)]
pub struct WeightedPath {
    pub pair: usize,
    pub path: Path,
    pub amount: f64,
}

#[derive(Clone, Debug)]
pub struct LpResult {
    /// Feasible objective value of the returned flow.
    pub primal: f64,
    /// Upper bound on the optimum from the length function.
    pub dual: f64,
    pub per_pair: Vec<f64>,
    pub flow: Vec<WeightedPath>,
    pub shortest_path_calls: u64,
    pub converged: bool,
}

/// Garg–Könemann style approximation. With no `max_calls` cap the primal is
/// within `1 - eps` of the optimum; the returned flow is always scaled to be
/// feasible for unit capacities.
pub fn approx_concurrent_flow(
    g: &MultiGraph,
    pairs: &[(VertexId, VertexId)],
    eps: f64,
    mode: LpMode,
    max_calls: Option<u64>,
) -> Result<LpResult> {
    ensure!(eps > 0.0 && eps < 1.0, Precondition, "eps must lie in (0,1)");
    let k = pairs.len();
    let mut out = LpResult {
        primal: 0.0,
        dual: 0.0,
        per_pair: vec![0.0; k],
        flow: vec![],
        shortest_path_calls: 0,
        converged: true,
    };
    let routable: Vec<bool> = pairs.iter().map(|&(s, t)| s != t && g.bfs_path(s, t, None, None).is_some()).collect();
    if k == 0 || (mode == LpMode::Concurrent && routable.iter().any(|r| !r)) || !routable.iter().any(|&r| r) {
        return Ok(out);
    }
    match mode {
        LpMode::Edp => gk_packing(g, pairs, &routable, eps / 4.0, max_calls, &mut out),
        LpMode::Concurrent => gk_concurrent(g, pairs, eps / 4.0, max_calls, &mut out),
    }
    Ok(out)
}

/// Accumulates flow per (pair, path), merging repeats.
#[derive(Default)]
struct FlowAcc {
    raw: Vec<WeightedPath>,
    index: BTreeMap<(usize, Vec<EdgeId>), usize>,
}

impl FlowAcc {
    fn add(&mut self, pair: usize, path: Path, amount: f64) {
        match self.index.get(&(pair, path.edges.clone())) {
            Some(&i) => self.raw[i].amount += amount,
            None => {
                self.index.insert((pair, path.edges.clone()), self.raw.len());
                self.raw.push(WeightedPath { pair, path, amount });
            }
        }
    }
}

fn finish(g: &MultiGraph, out: &mut LpResult, raw: Vec<WeightedPath>, cap_pairs: bool) {
    let mut load = vec![0.0f64; g.edge_bound()];
    for w in &raw {
        for &e in &w.path.edges {
            load[e as usize] += w.amount;
        }
    }
    // Dividing by the largest edge load is feasible and never worse than the
    // worst-case scale, which matters when the run is truncated.
    let s = load.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    out.flow = raw.into_iter().map(|w| WeightedPath { amount: w.amount / s, ..w }).collect();
    for w in &out.flow {
        out.per_pair[w.pair] += w.amount;
    }
    if cap_pairs {
        for i in 0..out.per_pair.len() {
            let x = out.per_pair[i];
            if x > 1.0 {
                for w in out.flow.iter_mut().filter(|w| w.pair == i) {
                    w.amount /= x;
                }
                out.per_pair[i] = 1.0;
            }
        }
    }
}

fn gk_packing(
    g: &MultiGraph,
    pairs: &[(VertexId, VertexId)],
    routable: &[bool],
    eps: f64,
    max_calls: Option<u64>,
    out: &mut LpResult,
) {
    let k = pairs.len();
    let big_l = (g.vertex_count() + 1) as f64;
    // Lengths are kept as stored · e^shift; δ itself underflows on large graphs.
    let mut shift = (1.0 + eps).ln() - ((1.0 + eps) * big_l).ln() / eps;
    let mut len = vec![1.0; g.edge_bound()];
    let mut vlen = vec![1.0; k];
    let mut raw = FlowAcc::default();
    // Lengths only grow, so the last computed distance of a pair is a lower
    // bound on its current one and spares calls that could not route.
    let mut last: Vec<f64> = (0..k)
        .map(|i| match routable[i] {
            true => g.bfs_path(pairs[i].0, pairs[i].1, None, None).map_or(f64::INFINITY, |p| p.len() as f64),
            false => f64::INFINITY,
        })
        .collect();
    let lower_alpha = |last: &[f64], vlen: &[f64]| (0..k).filter(|&i| routable[i]).map(|i| last[i] + vlen[i]).fold(f64::INFINITY, f64::min);
    let mut alpha_hat = lower_alpha(&last, &vlen);
    let mut dual = k as f64;
    'outer: while alpha_hat.ln() + shift < 0.0 {
        let one = (-shift).exp();
        let threshold = one.min((1.0 + eps) * alpha_hat);
        for i in 0..k {
            if !routable[i] {
                continue;
            }
            while last[i] + vlen[i] < threshold {
                if max_calls.is_some_and(|c| out.shortest_path_calls >= c) {
                    out.converged = false;
                    break 'outer;
                }
                out.shortest_path_calls += 1;
                let (d, p) = shortest_path(g, pairs[i].0, pairs[i].1, &|e| len[e as usize]).unwrap();
                last[i] = d;
                if d + vlen[i] >= threshold {
                    break;
                }
                for &e in &p.edges {
                    len[e as usize] *= 1.0 + eps;
                }
                vlen[i] *= 1.0 + eps;
                raw.add(i, p, 1.0);
            }
        }
        // Dual bound D(l)/α(l); a lower bound on α(l) keeps it valid.
        let alpha = lower_alpha(&last, &vlen);
        let d_l: f64 = g.edges().map(|e| len[e as usize]).sum::<f64>() + vlen.iter().sum::<f64>();
        dual = dual.min(d_l / alpha);
        alpha_hat = (alpha_hat * (1.0 + eps)).max(alpha / (1.0 + eps));
        if alpha_hat > 1e100 {
            for x in len.iter_mut().chain(vlen.iter_mut()).chain(last.iter_mut()) {
                *x /= alpha_hat;
            }
            shift += alpha_hat.ln();
            alpha_hat = 1.0;
        }
    }
    out.dual = dual.min(routable.iter().filter(|&&r| r).count() as f64);
    finish(g, out, raw.raw, true);
    out.primal = out.per_pair.iter().sum();
    out.dual = out.dual.max(out.primal);
}

fn gk_concurrent(g: &MultiGraph, pairs: &[(VertexId, VertexId)], eps: f64, max_calls: Option<u64>, out: &mut LpResult) {
    let m = g.edge_count() as f64;
    let delta = (m / (1.0 - eps)).powf(-1.0 / eps);
    let mut len = vec![0.0; g.edge_bound()];
    for e in g.edges() {
        len[e as usize] = delta;
    }
    let d_of = |len: &[f64]| g.edges().map(|e| len[e as usize]).sum::<f64>();
    let mut raw = FlowAcc::default();
    let mut dual = f64::INFINITY;
    'outer: while d_of(&len) < 1.0 {
        for (i, &(s, t)) in pairs.iter().enumerate() {
            if max_calls.is_some_and(|c| out.shortest_path_calls >= c) {
                out.converged = false;
                break 'outer;
            }
            out.shortest_path_calls += 1;
            let (_, p) = shortest_path(g, s, t, &|e| len[e as usize]).unwrap();
            if d_of(&len) >= 1.0 {
                break 'outer;
            }
            for &e in &p.edges {
                len[e as usize] *= 1.0 + eps;
            }
            raw.add(i, p, 1.0);
        }
        let mut a = 0.0;
        for &(s, t) in pairs {
            out.shortest_path_calls += 1;
            a += shortest_path(g, s, t, &|e| len[e as usize]).unwrap().0;
        }
        dual = dual.min(d_of(&len) / a);
    }
    finish(g, out, raw.raw, false);
    out.primal = out.per_pair.iter().cloned().fold(f64::INFINITY, f64::min);
    if !out.primal.is_finite() {
        out.primal = 0.0;
    }
    out.dual = dual.max(out.primal);
}

/// Per-edge fractional load of a weighted flow.
pub fn fractional_loads(flow: &[WeightedPath]) -> std::collections::BTreeMap<EdgeId, f64> {
    let mut load = std::collections::BTreeMap::new();
    for w in flow {
        for &e in &w.path.edges {
            *load.entry(e).or_insert(0.0) += w.amount;
        }
    }
    load
}

/// Checks that `paths` route `pairs` in order with congestion at most `budget`.
pub fn check_matching_routing(g: &MultiGraph, pairs: &[(VertexId, VertexId)], paths: &[Path], budget: u32) -> bool {
    paths.len() == pairs.len()
        && paths.iter().zip(pairs).all(|(p, &(s, t))| p.validate(g).is_ok() && p.first() == s && p.last() == t)
        && edge_loads(paths).values().all(|&l| l <= budget)
}
