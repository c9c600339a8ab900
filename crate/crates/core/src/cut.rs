//! Sparsity and the (k,α)-violating cut oracle.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, EdpError, Result};
use crate::flow::{max_flow_integral, Endpoint, FlowProblem, FlowResult};
use crate::graph::{EdgeId, MultiGraph, VertexId, VertexSet};
use crate::spectral::{fiedler_order, SmallGraph};

/// Ψ(S, S̄) = |E(S, S̄)| / min(w(S), w(S̄)) with exact rational weights.
pub fn sparsity(g: &MultiGraph, weights: &BTreeMap<VertexId, BigRational>, cut: &VertexSet) -> Result<BigRational> {
    let mask = g.vertex_mask(cut)?;
    let mut ws = BigRational::zero();
    let mut wt = BigRational::zero();
    for (&v, w) in weights {
        ensure!(g.has_vertex(v), Malformed, "weight on unknown vertex {v}");
        ensure!(*w >= BigRational::zero(), Malformed, "negative weight on {v}");
        wt += w;
        if mask[v as usize] {
            ws += w;
        }
    }
    let wo = &wt - &ws;
    if ws.is_zero() || wo.is_zero() {
        return Err(EdpError::DegenerateCut("one side has zero weight".into()));
    }
    let crossing = g.out_edges_mask(&mask).len();
    Ok(BigRational::from_integer(crossing.into()) / ws.min(wo))
}

/// G[S] ∪ out(S) with each listed boundary edge's outer end replaced by a
/// fresh weight-1 vertex. Returns the graph and its weights.
pub fn edge_terminal_instance(
    g: &MultiGraph,
    s: &VertexSet,
    terminals: &[EdgeId],
) -> Result<(MultiGraph, BTreeMap<VertexId, BigRational>)> {
    let mask = g.vertex_mask(s)?;
    let mut h = g.induced(s)?;
    let mut w = BTreeMap::new();
    for &e in terminals {
        ensure!(g.has_edge(e), Malformed, "unknown edge {e}");
        let (u, v) = g.ends(e);
        ensure!(mask[u as usize] != mask[v as usize], Malformed, "edge {e} is not on the boundary");
        let inner = if mask[u as usize] { u } else { v };
        let t = h.add_vertex();
        h.add_edge(inner, t)?;
        w.insert(t, BigRational::from_integer(1.into()));
    }
    Ok((h, w))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    Exact,
    Spectral,
    #[default]
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub mode: OracleMode,
    /// Exact mode is refused above this many terminal edges.
    pub exact_limit: usize,
}

impl OracleConfig {
    /// Whether a search over this many terminal edges is exhaustive.
    pub fn is_exact(&self, terminals: usize) -> bool {
        match self.mode {
            OracleMode::Exact => true,
            OracleMode::Spectral => false,
            OracleMode::Auto => terminals <= self.exact_limit,
        }
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { mode: OracleMode::Auto, exact_limit: 22 }
    }
}

/// Whether `find_violating_cut` answering `None` rules out every violating
/// cut: exact enumeration, or α·⌊k/2⌋ ≤ 1 where only zero-crossing cuts can
/// violate and the component scan is complete.
pub fn oracle_exhaustive(cfg: &OracleConfig, terminals: usize, k: u64, alpha: f64) -> bool {
    cfg.is_exact(terminals) || alpha * (k / 2) as f64 <= 1.0
}

/// Bipartition (X, Y) of S with witness terminal sets; `x` contains min(S).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolatingCut {
    pub x: VertexSet,
    pub y: VertexSet,
    pub t1: Vec<EdgeId>,
    pub t2: Vec<EdgeId>,
    pub crossing: u64,
}

/// Result of evaluating one bipartition.
#[derive(Clone, Debug)]
struct Eval {
    x: VertexSet,
    crossing: u64,
    bound: u64,
}

impl Eval {
    /// Orders by crossing / bound, then by the sorted vertex list of X.
    fn better_than(&self, o: &Eval) -> bool {
        let l = self.crossing as u128 * o.bound as u128;
        let r = o.crossing as u128 * self.bound as u128;
        match l.cmp(&r) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.x.iter().cmp(o.x.iter()) == Ordering::Less,
        }
    }
}

/// Terminal edges of S grouped by their endpoint inside S.
struct Setup {
    s: VertexSet,
    mask: Vec<bool>,
    inner: Vec<(EdgeId, VertexId)>,
    internal: Vec<EdgeId>,
    half_k: u64,
    alpha: f64,
}

impl Setup {
    fn new(g: &MultiGraph, s: &VertexSet, terminals: &[EdgeId], k: u64, alpha: f64) -> Result<Setup> {
        ensure!(!s.is_empty(), Precondition, "empty set");
        ensure!(alpha > 0.0 && alpha < 1.0, Precondition, "alpha must lie in (0,1)");
        ensure!(k >= 1, Precondition, "k must be positive");
        let mask = g.vertex_mask(s)?;
        let mut inner = vec![];
        for &e in terminals {
            ensure!(g.has_edge(e), Malformed, "unknown edge {e}");
            let (u, v) = g.ends(e);
            ensure!(mask[u as usize] != mask[v as usize], Malformed, "terminal edge {e} not in out(S)");
            inner.push((e, if mask[u as usize] { u } else { v }));
        }
        inner.sort_unstable();
        Ok(Setup { s: s.clone(), internal: g.internal_edges_mask(&mask), mask, inner, half_k: k / 2, alpha })
    }

    /// Evaluates X ⊆ S (oriented so X ∋ min S); `None` for trivial cuts.
    fn eval(&self, g: &MultiGraph, x_in: &VertexSet) -> Option<Eval> {
        if x_in.is_empty() || x_in.len() == self.s.len() {
            return None;
        }
        let min = *self.s.iter().next().unwrap();
        let x: VertexSet = if x_in.contains(&min) { x_in.clone() } else { self.s.difference(x_in).copied().collect() };
        let mut side = vec![false; self.mask.len()];
        for &v in &x {
            side[v as usize] = true;
        }
        let crossing = self
            .internal
            .iter()
            .filter(|&&e| {
                let (u, v) = g.ends(e);
                side[u as usize] != side[v as usize]
            })
            .count() as u64;
        let a = self.inner.iter().filter(|(_, v)| side[*v as usize]).count() as u64;
        let b = self.inner.len() as u64 - a;
        let bound = a.min(b).min(self.half_k);
        Some(Eval { x, crossing, bound })
    }

    fn violates(&self, ev: &Eval) -> bool {
        ev.bound > 0 && (ev.crossing as f64) < self.alpha * ev.bound as f64
    }

    fn finish(&self, ev: Eval) -> ViolatingCut {
        let y: VertexSet = self.s.difference(&ev.x).copied().collect();
        let take = ev.bound as usize;
        let t1 = self.inner.iter().filter(|(_, v)| ev.x.contains(v)).map(|(e, _)| *e).take(take).collect();
        let t2 = self.inner.iter().filter(|(_, v)| y.contains(v)).map(|(e, _)| *e).take(take).collect();
        ViolatingCut { x: ev.x, y, t1, t2, crossing: ev.crossing }
    }

    fn consider(&self, g: &MultiGraph, x: &VertexSet, best: &mut Option<Eval>) {
        if let Some(ev) = self.eval(g, x) {
            if self.violates(&ev) && best.as_ref().is_none_or(|b| ev.better_than(b)) {
                *best = Some(ev);
            }
        }
    }
}

/// Re-checks a cut by independent counting.
pub fn is_violating(g: &MultiGraph, s: &VertexSet, terminals: &[EdgeId], k: u64, alpha: f64, cut: &ViolatingCut) -> bool {
    let Ok(xm) = g.vertex_mask(&cut.x) else { return false };
    let Ok(ym) = g.vertex_mask(&cut.y) else { return false };
    let union: VertexSet = cut.x.union(&cut.y).copied().collect();
    if &union != s || cut.x.is_empty() || cut.y.is_empty() || cut.x.intersection(&cut.y).next().is_some() {
        return false;
    }
    let crossing = g
        .edges()
        .filter(|&e| {
            let (u, v) = g.ends(e);
            (xm[u as usize] && ym[v as usize]) || (ym[u as usize] && xm[v as usize])
        })
        .count() as u64;
    let tset: std::collections::BTreeSet<EdgeId> = terminals.iter().copied().collect();
    let on = |set: &[EdgeId], m: &[bool], other: &[bool]| {
        set.iter().all(|&e| {
            tset.contains(&e) && {
                let (u, v) = g.ends(e);
                (m[u as usize] && !other[v as usize] && !m[v as usize]) || (m[v as usize] && !other[u as usize] && !m[u as usize])
            }
        })
    };
    let distinct = |v: &[EdgeId]| v.iter().collect::<std::collections::BTreeSet<_>>().len() == v.len();
    crossing == cut.crossing
        && distinct(&cut.t1)
        && distinct(&cut.t2)
        && on(&cut.t1, &xm, &ym)
        && on(&cut.t2, &ym, &xm)
        && (cut.t1.len() + cut.t2.len()) as u64 <= k
        && (crossing as f64) < alpha * cut.t1.len().min(cut.t2.len()) as f64
}

/// Searches for a (k,α)-violating cut of S whose witness edges come from
/// `terminals ⊆ out(S)`. Extra candidate sides may be supplied by callers.
pub fn find_violating_cut(
    g: &MultiGraph,
    s: &VertexSet,
    terminals: &[EdgeId],
    k: u64,
    alpha: f64,
    cfg: &OracleConfig,
    extra: &[VertexSet],
) -> Result<Option<ViolatingCut>> {
    let st = Setup::new(g, s, terminals, k, alpha)?;
    if cfg.mode == OracleMode::Exact && st.inner.len() > cfg.exact_limit {
        return Err(EdpError::OracleTooLarge { boundary: st.inner.len(), limit: cfg.exact_limit });
    }
    if s.len() < 2 || st.inner.len() < 2 {
        return Ok(None);
    }
    let exact = cfg.is_exact(st.inner.len());
    let mut best: Option<Eval> = None;
    for x in extra {
        let x: VertexSet = x.intersection(s).copied().collect();
        st.consider(g, &x, &mut best);
    }
    let zero_only = alpha * st.half_k as f64 <= 1.0;
    if exact {
        if s.len() <= 20 {
            enumerate_subsets(g, &st, &mut best);
        } else if zero_only {
            component_candidates(g, &st, &mut best)?;
        } else {
            enumerate_assignments(g, &st, &mut best)?;
        }
    } else {
        component_candidates(g, &st, &mut best)?;
        if best.is_none() && !zero_only {
            spectral_candidates(g, &st, &mut best)?;
        }
    }
    let Some(ev) = best else { return Ok(None) };
    let cut = st.finish(ev);
    if !is_violating(g, s, terminals, k, alpha, &cut) {
        return Err(EdpError::Invariant("oracle produced a non-violating cut".into()));
    }
    Ok(Some(cut))
}

fn enumerate_subsets(g: &MultiGraph, st: &Setup, best: &mut Option<Eval>) {
    let verts: Vec<VertexId> = st.s.iter().copied().collect();
    let n = verts.len();
    let mut pos = vec![usize::MAX; st.mask.len()];
    for (i, &v) in verts.iter().enumerate() {
        pos[v as usize] = i;
    }
    let edges: Vec<(usize, usize)> = st
        .internal
        .iter()
        .map(|&e| {
            let (u, v) = g.ends(e);
            (pos[u as usize], pos[v as usize])
        })
        .collect();
    let term: Vec<usize> = st.inner.iter().map(|(_, v)| pos[*v as usize]).collect();
    let full = (1u32 << n) - 1;
    // Bit 0 (min S) always on X.
    let mut mask = 1u32;
    while mask < full {
        let crossing = edges.iter().filter(|&&(u, v)| (mask >> u & 1) != (mask >> v & 1)).count() as u64;
        let a = term.iter().filter(|&&t| mask >> t & 1 == 1).count() as u64;
        let b = term.len() as u64 - a;
        let bound = a.min(b).min(st.half_k);
        if bound > 0 && (crossing as f64) < st.alpha * bound as f64 {
            let x: VertexSet = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| verts[i]).collect();
            let ev = Eval { x, crossing, bound };
            if best.as_ref().is_none_or(|b| ev.better_than(b)) {
                *best = Some(ev);
            }
        }
        mask += 2;
    }
}

fn components_of(g: &MultiGraph, st: &Setup) -> Result<Vec<VertexSet>> {
    Ok(g.induced(&st.s)?.components())
}

/// Single components as X, and complements of single components.
fn component_candidates(g: &MultiGraph, st: &Setup, best: &mut Option<Eval>) -> Result<()> {
    let comps = components_of(g, st)?;
    if comps.len() < 2 {
        return Ok(());
    }
    // Every candidate crosses no edge, so among the violating ones the order
    // is lexicographic on X: the component of min S itself, or the
    // complement of the component with the largest minimum.
    let mut comp_of = vec![usize::MAX; st.mask.len()];
    for (i, c) in comps.iter().enumerate() {
        for &v in c {
            comp_of[v as usize] = i;
        }
    }
    let mut count = vec![0u64; comps.len()];
    for (_, v) in &st.inner {
        count[comp_of[*v as usize]] += 1;
    }
    let total = st.inner.len() as u64;
    let violating = |i: usize| count[i].min(total - count[i]).min(st.half_k) > 0;
    let min = *st.s.iter().next().unwrap();
    let home = comp_of[min as usize];
    if violating(home) {
        st.consider(g, &comps[home], best);
    }
    if let Some(i) = (0..comps.len()).filter(|&i| i != home && violating(i)).max_by_key(|&i| comps[i].first()) {
        st.consider(g, &comps[i], best);
    }
    Ok(())
}

fn enumerate_assignments(g: &MultiGraph, st: &Setup, best: &mut Option<Eval>) -> Result<()> {
    let mut ends: Vec<VertexId> = st.inner.iter().map(|(_, v)| *v).collect();
    ends.sort_unstable();
    ends.dedup();
    let n = ends.len();
    let h = g.induced(&st.s)?;
    for mask in 1u64..(1u64 << n) - 1 {
        if mask & 1 == 0 {
            continue;
        }
        let mut p = FlowProblem::new(&h, 1);
        for (i, &v) in ends.iter().enumerate() {
            let ep = (Endpoint::Vertex(v), u32::MAX);
            if mask >> i & 1 == 1 {
                p.sources.push(ep);
            } else {
                p.sinks.push(ep);
            }
        }
        if let FlowResult::Cut { side, .. } = max_flow_integral(&p, u64::MAX / 4)? {
            st.consider(g, &side, best);
        }
    }
    Ok(())
}

fn spectral_candidates(g: &MultiGraph, st: &Setup, best: &mut Option<Eval>) -> Result<()> {
    for comp in components_of(g, st)? {
        if comp.len() < 2 {
            continue;
        }
        let verts: Vec<VertexId> = comp.iter().copied().collect();
        let mut pos = BTreeMap::new();
        for (i, &v) in verts.iter().enumerate() {
            pos.insert(v, i);
        }
        let edges = st
            .internal
            .iter()
            .filter_map(|&e| {
                let (u, v) = g.ends(e);
                Some((*pos.get(&u)?, *pos.get(&v)?))
            })
            .collect();
        let order = fiedler_order(&SmallGraph { n: verts.len(), edges });
        let mut prefix = VertexSet::new();
        for &i in &order[..order.len() - 1] {
            prefix.insert(verts[i]);
            st.consider(g, &prefix, best);
        }
    }
    Ok(())
}
