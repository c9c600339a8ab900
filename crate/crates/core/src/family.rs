//! Legal contracted graphs and the search for a good family of vertex sets.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cut::{find_violating_cut, OracleConfig};
use crate::error::{ensure, EdpError, Result};
use crate::flow::{max_flow_integral, max_flow_value, Endpoint, FlowProblem, FlowResult};
use crate::graph::{edge_loads, EdgeId, MultiGraph, Path, VertexId, VertexSet};
use crate::params::ParamTable;
use crate::welllinked::{charge_bound_holds, decompose_bounded};

/// Knobs of the search derived from the parameter table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub k: u64,
    pub k1: u64,
    pub gamma: u64,
    pub alpha: f64,
    pub alpha_wl: f64,
    pub eta: u32,
    pub retry_budget: usize,
    pub wl_cluster_spotchecks: usize,
    pub oracle: OracleConfig,
    /// Upper bound on contraction rounds; |E(G)| when `None`.
    pub max_rounds: Option<usize>,
}

impl FamilyConfig {
    pub fn from_params(t: &ParamTable, retry_budget: usize, wl_cluster_spotchecks: usize, oracle: OracleConfig) -> Self {
        FamilyConfig {
            k: t.k,
            k1: t.k1,
            gamma: t.gamma,
            alpha: t.alpha,
            alpha_wl: t.alpha_wl,
            eta: t.eta_capped(),
            retry_budget,
            wl_cluster_spotchecks,
            oracle,
            max_rounds: None,
        }
    }
}

/// A contracted graph given by its clusters (super-nodes); the other
/// vertices of G stay as they are.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalGraph {
    pub clusters: Vec<VertexSet>,
}

impl LegalGraph {
    pub fn trivial() -> Self {
        LegalGraph { clusters: vec![] }
    }

    /// The contracted graph and the super-node id of each cluster.
    pub fn build(&self, g: &MultiGraph) -> Result<(MultiGraph, Vec<VertexId>)> {
        let (h, con) = g.contract_clusters(&self.clusters)?;
        let ids = self.clusters.iter().map(|c| con.node_of[*c.first().unwrap() as usize]).collect();
        Ok((h, ids))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegalReport {
    pub clusters: usize,
    pub max_boundary: usize,
    /// |E(G′ ∖ 𝒯)| and whether it is at least k/6.
    pub edges_without_terminals: usize,
    pub many_edges: bool,
    pub spotchecks: usize,
}

/// Checks the countable legality conditions exactly and spot-checks
/// well-linkedness of every cluster with random T₁, T₂ ⊆ out(C).
pub fn check_legal<R: Rng>(
    g: &MultiGraph,
    terminals: &[VertexId],
    lg: &LegalGraph,
    cfg: &FamilyConfig,
    rng: &mut R,
) -> Result<LegalReport> {
    let tset: BTreeSet<VertexId> = terminals.iter().copied().collect();
    let mut seen = VertexSet::new();
    let mut max_boundary = 0;
    let mut spotchecks = 0;
    for c in &lg.clusters {
        ensure!(!c.is_empty(), Invariant, "empty cluster");
        for &v in c {
            ensure!(g.has_vertex(v), Invariant, "cluster vertex {v} is not in G");
            ensure!(!tset.contains(&v), Invariant, "terminal {v} lies in a cluster");
            ensure!(seen.insert(v), Invariant, "clusters overlap at {v}");
        }
        let out = g.out_edges(c)?;
        ensure!(out.len() as u64 <= cfg.k1, Invariant, "cluster boundary {} exceeds k1 = {}", out.len(), cfg.k1);
        max_boundary = max_boundary.max(out.len());
        for _ in 0..cfg.wl_cluster_spotchecks {
            if out.len() < 2 {
                break;
            }
            let mut pool = out.clone();
            pool.shuffle(rng);
            let s = rng.gen_range(1..=pool.len() / 2);
            let (t1, t2) = (&pool[..s], &pool[s..2 * s]);
            let mask = g.vertex_mask(c)?;
            let mut p = FlowProblem::new(g, 1);
            p.vertex_allowed = Some(&mask);
            for &e in t1 {
                p.sources.push((half(g, e, &mask), 1));
            }
            for &e in t2 {
                p.sinks.push((half(g, e, &mask), 1));
            }
            let f = max_flow_value(&p, s as u64)?;
            spotchecks += 1;
            ensure!(
                f as f64 >= cfg.alpha_wl * s as f64,
                Invariant,
                "cluster with min {} fails a well-linkedness spot-check ({f} < α_WL·{s})",
                c.first().unwrap()
            );
        }
    }
    let (h, _) = lg.build(g)?;
    let without = h.edges().filter(|&e| {
        let (u, v) = h.ends(e);
        !tset.contains(&u) && !tset.contains(&v)
    });
    let edges_without_terminals = without.count();
    Ok(LegalReport {
        clusters: lg.clusters.len(),
        max_boundary,
        edges_without_terminals,
        many_edges: 6 * edges_without_terminals as u64 >= cfg.k,
        spotchecks,
    })
}

fn half(g: &MultiGraph, e: EdgeId, inside: &[bool]) -> Endpoint {
    let (u, v) = g.ends(e);
    Endpoint::HalfEdge { edge: e, inner: if inside[u as usize] { u } else { v } }
}

/// Per part: (|out(X_j)|, |E(X_j)|).
pub fn partition_counts(h: &MultiGraph, parts: &[VertexSet]) -> Result<Vec<(usize, usize)>> {
    parts
        .iter()
        .map(|x| {
            let m = h.vertex_mask(x)?;
            Ok((h.out_edges_mask(&m).len(), h.internal_edges_mask(&m).len()))
        })
        .collect()
}

/// |out(X_j)| < 10m/γ and |E(X_j)| ≥ m/(2γ²) for every part, in integers.
pub fn partition_ok(counts: &[(usize, usize)], m: usize, gamma: u64) -> bool {
    let (m, g) = (m as u128, gamma as u128);
    counts.iter().all(|&(out, inner)| (out as u128) * g < 10 * m && 2 * g * g * (inner as u128) >= m)
}

/// Uniform assignment of the non-terminal vertices of `h` to γ parts,
/// resampled until both conditions hold.
pub fn sample_partition<R: Rng>(
    h: &MultiGraph,
    terminals: &BTreeSet<VertexId>,
    gamma: u64,
    retry_budget: usize,
    rng: &mut R,
) -> Result<(Vec<VertexSet>, usize)> {
    ensure!(gamma >= 1, Precondition, "γ must be positive");
    let m = h
        .edges()
        .filter(|&e| {
            let (u, v) = h.ends(e);
            !terminals.contains(&u) && !terminals.contains(&v)
        })
        .count();
    let verts: Vec<VertexId> = h.vertices().filter(|v| !terminals.contains(v)).collect();
    for attempt in 1..=retry_budget {
        let mut parts = vec![VertexSet::new(); gamma as usize];
        for &v in &verts {
            parts[rng.gen_range(0..gamma as usize)].insert(v);
        }
        let counts = partition_counts(h, &parts)?;
        if m > 0 && partition_ok(&counts, m, gamma) {
            return Ok((parts, attempt));
        }
    }
    Err(EdpError::Stochastic(format!("no balanced {gamma}-partition found in {retry_budget} attempts (m = {m})")))
}

/// A good set with its edges Γ and the flow certificate: one path per edge
/// of Γ (starting inside S with that edge) to a distinct terminal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodSet {
    pub set: VertexSet,
    pub gamma_edges: Vec<EdgeId>,
    pub certificate: Vec<Path>,
}

impl GoodSet {
    pub fn terminal_of(&self, i: usize) -> VertexId {
        self.certificate[i].last()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodFamily {
    pub sets: Vec<GoodSet>,
}

/// Independent re-check of every good-family property that can be counted.
pub fn verify_good_family(g: &MultiGraph, terminals: &[VertexId], fam: &GoodFamily, k1: u64, eta: u32) -> Result<()> {
    let tset: BTreeSet<VertexId> = terminals.iter().copied().collect();
    let mut used = VertexSet::new();
    for (j, gs) in fam.sets.iter().enumerate() {
        ensure!(gs.gamma_edges.len() as u64 == k1, Verification, "set {j}: |Γ| = {} ≠ k1", gs.gamma_edges.len());
        for &v in &gs.set {
            ensure!(!tset.contains(&v), Verification, "set {j} contains terminal {v}");
            ensure!(used.insert(v), Verification, "sets overlap at {v}");
        }
        let mask = g.vertex_mask(&gs.set)?;
        let out: BTreeSet<EdgeId> = g.out_edges_mask(&mask).into_iter().collect();
        ensure!(gs.certificate.len() == gs.gamma_edges.len(), Verification, "set {j}: one path per Γ edge expected");
        let mut ends = BTreeSet::new();
        for (p, &e) in gs.certificate.iter().zip(&gs.gamma_edges) {
            ensure!(out.contains(&e), Verification, "set {j}: Γ edge {e} is not in out(S)");
            p.validate(g)?;
            ensure!(p.edges.first() == Some(&e) && mask[p.first() as usize], Verification, "set {j}: path does not start with its Γ edge");
            ensure!(tset.contains(&p.last()), Verification, "set {j}: path ends at non-terminal {}", p.last());
            ensure!(ends.insert(p.last()), Verification, "set {j}: terminal {} reached twice", p.last());
        }
        let worst = edge_loads(&gs.certificate).values().copied().max().unwrap_or(0);
        ensure!(worst <= eta, Verification, "set {j}: certificate congestion {worst} > η = {eta}");
    }
    Ok(())
}

/// Result of contracting after a failed part: the new legal graph and the
/// exact edge accounting behind |E(G″)| < |E(G′)|.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeAudit {
    pub part: usize,
    pub edges_before: usize,
    pub edges_after: usize,
    pub part_out: usize,
    pub part_inner: usize,
    /// Σ|out_G(C)| over the clusters moved out of play.
    pub retired_boundary: usize,
    /// Edges of G″ not already present outside the part in G′.
    pub new_edges: usize,
    /// Σ over decomposed sets A of Σ|out_G(C)| for C ∈ 𝒲(A).
    pub decomposed_boundary: usize,
}

/// Checks the per-round inequality
/// |E(G″)| ≤ |E(G′)| − |out(X_j)|(1+1/(20γ)) + Σ|out(C)|(1+1/(64γ))
/// scaled by 1280γ, and |E(G″)| < |E(G′)|.
pub fn audit_holds(a: &EdgeAudit, gamma: u64) -> bool {
    let l = 1280 * gamma as i128;
    let lhs = a.edges_after as i128 * l;
    let rhs = a.edges_before as i128 * l - a.part_out as i128 * (l + 64) + a.retired_boundary as i128 * (l + 20);
    lhs <= rhs && a.edges_after < a.edges_before
}

enum Step {
    Good(GoodSet),
    Continue,
}

/// Working state for one part X_j: the clusters contracted in G̃, with the
/// active ones (𝒲¹) flagged.
struct PartState<'a> {
    g: &'a MultiGraph,
    terminals: &'a BTreeSet<VertexId>,
    cfg: &'a FamilyConfig,
    clusters: BTreeMap<VertexId, (VertexSet, bool)>,
    retired: Vec<VertexSet>,
    /// |out_G(C)| of every active cluster, and summed over retired ones.
    active_out: BTreeMap<VertexId, usize>,
    retired_out: usize,
    decomposed_boundary: usize,
    /// (|out(A)|, Σ|out(W)|) for every decomposed set A.
    decompositions: Vec<(usize, usize)>,
    /// Union of the decomposed sets A.
    touched: VertexSet,
    /// |out_G(X′_j)|.
    part_out: usize,
}

impl<'a> PartState<'a> {
    fn build(&self) -> Result<(MultiGraph, BTreeMap<VertexId, VertexId>)> {
        let list: Vec<VertexSet> = self.clusters.values().map(|c| c.0.clone()).collect();
        let (h, con) = self.g.contract_clusters(&list)?;
        // super-node → cluster key
        let keys = self.clusters.keys().map(|&m| (con.node_of[m as usize], m)).collect();
        Ok((h, keys))
    }

    fn insert(&mut self, c: VertexSet, active: bool) {
        let key = *c.first().unwrap();
        if active {
            self.active_out.insert(key, self.g.out_edges(&c).expect("cluster of G").len());
        }
        self.clusters.insert(key, (c, active));
    }

    /// Splits an active cluster; the charge bound over 𝒲¹ ∪ 𝒲² must hold after.
    fn split(&mut self, key: VertexId, x: VertexSet, y: VertexSet) -> Result<()> {
        let (_, active) = self.clusters.remove(&key).unwrap();
        ensure!(active, Invariant, "split of a cluster that is not active");
        self.active_out.remove(&key);
        self.insert(x, true);
        self.insert(y, true);
        let sum = self.active_out.values().sum::<usize>() + self.retired_out;
        ensure!(
            charge_bound_holds(sum, self.part_out, self.cfg.gamma),
            Invariant,
            "charge bound broken inside the part: {sum} > {}·(1+1/(64γ))",
            self.part_out
        );
        Ok(())
    }

    fn process(&mut self, key: VertexId) -> Result<Step> {
        let cfg = self.cfg;
        let (h, keys) = self.build()?;
        let vs = *keys.iter().find(|(_, &k)| k == key).unwrap().0;
        let s = self.clusters[&key].0.clone();
        let mut p = FlowProblem::new(&h, 1);
        p.sources.push((Endpoint::Vertex(vs), cfg.k1 as u32));
        for &t in self.terminals {
            p.sinks.push((Endpoint::Vertex(t), u32::MAX));
        }
        match max_flow_integral(&p, cfg.k1)? {
            FlowResult::Paths { paths, .. } => {
                let paths: Vec<Path> = paths.into_iter().map(|fp| fp.path).collect();
                let gamma_edges: Vec<EdgeId> = paths.iter().map(|p| p.edges[0]).collect();
                if let Some(cut) = find_violating_cut(self.g, &s, &gamma_edges, cfg.k, cfg.alpha, &cfg.oracle, &[])? {
                    self.split(key, cut.x, cut.y)?;
                    return Ok(Step::Continue);
                }
                self.uncontract(&keys, vs, &s, paths)
            }
            FlowResult::Cut { side, .. } => {
                let x: VertexSet = if (h.degree(vs) as u64) < cfg.k1 { VertexSet::from([vs]) } else { side };
                let mut a = VertexSet::new();
                let mut hit = vec![];
                for &v in &x {
                    ensure!(!self.terminals.contains(&v), Invariant, "cut side contains terminal {v}");
                    match keys.get(&v) {
                        Some(&ck) => hit.push(ck),
                        None => {
                            a.insert(v);
                        }
                    }
                }
                for ck in hit {
                    let (c, active) = self.clusters.remove(&ck).unwrap();
                    a.extend(c.iter().copied());
                    if active {
                        self.active_out.remove(&ck);
                        self.retired_out += self.g.out_edges(&c)?.len();
                        self.retired.push(c);
                    }
                }
                let out_a = self.g.out_edges(&a)?.len();
                ensure!((out_a as u64) < cfg.k1, Invariant, "|out(A)| = {out_a} is not below k1 = {}", cfg.k1);
                let out_s = self.g.out_edges(&s)?.len();
                ensure!(out_a <= out_s, Invariant, "|out(A)| = {out_a} exceeds |out(S)| = {out_s}");
                let d = decompose_bounded(self.g, &a, cfg.k, cfg.alpha, Some(cfg.gamma), &cfg.oracle)?;
                self.decomposed_boundary += d.total_boundary();
                self.decompositions.push((d.out_host, d.total_boundary()));
                self.touched.extend(a.iter().copied());
                for c in d.clusters {
                    self.insert(c, false);
                }
                Ok(Step::Continue)
            }
        }
    }
}

impl<'a> PartState<'a> {
    /// Turns flow paths of G̃ (from v_S to terminals) into paths of G by
    /// routing each traversed cluster's entry/exit demands inside it.
    fn uncontract(
        &mut self,
        keys: &BTreeMap<VertexId, VertexId>,
        vs: VertexId,
        s: &VertexSet,
        paths: Vec<Path>,
    ) -> Result<Step> {
        let cfg = self.cfg;
        let mut segs: Vec<Vec<EdgeId>> = vec![];
        let mut starts = vec![];
        let mut crossings: BTreeMap<VertexId, Vec<(EdgeId, EdgeId)>> = BTreeMap::new();
        for p in &paths {
            ensure!(p.first() == vs && !p.edges.is_empty(), Invariant, "flow path does not leave v_S");
            ensure!(self.terminals.contains(&p.last()), Invariant, "flow path ends at non-terminal {}", p.last());
            starts.push(segs.len());
            let mut cur = vec![];
            for i in 0..p.edges.len() {
                cur.push(p.edges[i]);
                if i + 1 == p.edges.len() {
                    break;
                }
                let v = p.verts[i + 1];
                ensure!(v != vs, Invariant, "flow path returns to v_S");
                if let Some(&ck) = keys.get(&v) {
                    crossings.entry(ck).or_default().push((p.edges[i], p.edges[i + 1]));
                    segs.push(std::mem::take(&mut cur));
                }
            }
            segs.push(cur);
        }
        let ending: BTreeMap<EdgeId, usize> = segs.iter().enumerate().map(|(i, sg)| (*sg.last().unwrap(), i)).collect();
        let starting: BTreeMap<EdgeId, usize> = segs.iter().enumerate().map(|(i, sg)| (sg[0], i)).collect();
        let mut link: BTreeMap<usize, (Vec<EdgeId>, usize)> = BTreeMap::new();
        for (&ck, dem) in &crossings {
            let (c, active) = self.clusters[&ck].clone();
            let mask = self.g.vertex_mask(&c)?;
            let mut p = FlowProblem::new(self.g, cfg.eta);
            p.vertex_allowed = Some(&mask);
            for &(a, b) in dem {
                p.sources.push((half(self.g, a, &mask), 1));
                p.sinks.push((half(self.g, b, &mask), 1));
            }
            match max_flow_integral(&p, dem.len() as u64)? {
                FlowResult::Paths { paths, .. } => {
                    for fp in paths {
                        let (a, b) = (dem[fp.source].0, dem[fp.sink].1);
                        let inner = fp.path.edges[1..fp.path.edges.len() - 1].to_vec();
                        link.insert(ending[&a], (inner, starting[&b]));
                    }
                }
                FlowResult::Cut { side, .. } => {
                    ensure!(active, Invariant, "demands inside legal cluster with min {ck} cannot be routed");
                    let mut t: Vec<EdgeId> = dem.iter().flat_map(|&(a, b)| [a, b]).collect();
                    t.sort_unstable();
                    t.dedup();
                    let Some(cut) = find_violating_cut(self.g, &c, &t, cfg.k, cfg.alpha, &cfg.oracle, &[side])? else {
                        return Err(EdpError::Invariant(format!(
                            "demands inside cluster with min {ck} cannot be routed and no violating cut was found"
                        )));
                    };
                    self.split(ck, cut.x, cut.y)?;
                    return Ok(Step::Continue);
                }
            }
        }
        let mask = self.g.vertex_mask(s)?;
        let mut certificate = vec![];
        for &st in &starts {
            let mut edges = vec![];
            let mut cur = st;
            for _ in 0..=segs.len() {
                edges.extend_from_slice(&segs[cur]);
                match link.get(&cur) {
                    Some((inner, nxt)) => {
                        edges.extend_from_slice(inner);
                        cur = *nxt;
                    }
                    None => break,
                }
            }
            let (u, v) = self.g.ends(edges[0]);
            let mut at = if mask[u as usize] { u } else { v };
            let mut verts = vec![at];
            for &e in &edges {
                at = self.g.other(e, at);
                verts.push(at);
            }
            let path = Path { verts, edges };
            path.validate(self.g)?;
            certificate.push(path);
        }
        let gamma_edges = paths.iter().map(|p| p.edges[0]).collect();
        Ok(Step::Good(GoodSet { set: s.clone(), gamma_edges, certificate }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RoundOutcome {
    Family,
    Contracted(EdgeAudit),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub legal: LegalReport,
    pub sampling_attempts: usize,
    /// (|out(X_j)|, |E(X_j)|) per part.
    pub parts: Vec<(usize, usize)>,
    /// (|out(A)|, Σ_W |out(W)|) for every decomposition run in the round.
    pub decompositions: Vec<(usize, usize)>,
    pub outcome: RoundOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyRun {
    pub family: GoodFamily,
    pub rounds: Vec<RoundReport>,
    pub legal: LegalGraph,
}

/// Repeats sampling rounds on a legal contracted graph, contracting further
/// after each failed round, until every part yields a good set.
pub fn find_good_family<R: Rng>(
    g: &MultiGraph,
    terminals: &[VertexId],
    cfg: &FamilyConfig,
    rng: &mut R,
) -> Result<FamilyRun> {
    ensure!(cfg.k1 >= 1 && cfg.k1 <= u32::MAX as u64, Precondition, "k1 = {} is out of range", cfg.k1);
    ensure!(cfg.gamma >= 1, Precondition, "γ must be positive");
    let tset: BTreeSet<VertexId> = terminals.iter().copied().collect();
    for &t in &tset {
        ensure!(g.has_vertex(t) && g.degree(t) == 1, Precondition, "terminal {t} must have degree 1");
    }
    let mut lg = LegalGraph::trivial();
    let mut rounds = vec![];
    let max_rounds = cfg.max_rounds.unwrap_or(g.edge_count() + 1);
    for _ in 0..max_rounds {
        let legal = check_legal(g, terminals, &lg, cfg, rng)?;
        let (h, ids) = lg.build(g)?;
        let (parts, sampling_attempts) = sample_partition(&h, &tset, cfg.gamma, cfg.retry_budget, rng)?;
        let counts = partition_counts(&h, &parts)?;
        let cluster_of: BTreeMap<VertexId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut sets = vec![];
        let mut audit = None;
        let mut decompositions = vec![];
        for (j, xj) in parts.iter().enumerate() {
            let mut xprime = VertexSet::new();
            let mut st = PartState {
                g,
                terminals: &tset,
                cfg,
                clusters: BTreeMap::new(),
                retired: vec![],
                active_out: BTreeMap::new(),
                retired_out: 0,
                decomposed_boundary: 0,
                decompositions: vec![],
                touched: VertexSet::new(),
                part_out: counts[j].0,
            };
            for (i, c) in lg.clusters.iter().enumerate() {
                if !xj.contains(&ids[i]) {
                    st.insert(c.clone(), false);
                }
            }
            for &v in xj {
                match cluster_of.get(&v) {
                    Some(&i) => xprime.extend(lg.clusters[i].iter().copied()),
                    None => {
                        xprime.insert(v);
                    }
                }
            }
            ensure!(g.out_edges(&xprime)?.len() == counts[j].0, Invariant, "boundary of X′_{j} differs from X_{j}");
            st.insert(xprime.clone(), true);
            let mut good = None;
            while let Some(key) = st.clusters.iter().find(|c| c.1 .1).map(|c| *c.0) {
                if let Step::Good(gs) = st.process(key)? {
                    good = Some(gs);
                    break;
                }
            }
            decompositions.append(&mut st.decompositions);
            if let Some(gs) = good {
                sets.push(gs);
                continue;
            }
            let retired: VertexSet = st.retired.iter().flatten().copied().collect();
            ensure!(retired == xprime, Invariant, "retired clusters do not partition X′_{j}");
            let next = LegalGraph { clusters: st.clusters.into_values().map(|c| c.0).collect() };
            let (h2, _) = next.build(g)?;
            let kept = h2
                .edges()
                .filter(|&e| {
                    let (u, v) = g.ends(e);
                    !st.touched.contains(&u) && !st.touched.contains(&v)
                })
                .count();
            let mut retired_boundary = 0;
            for c in &st.retired {
                retired_boundary += g.out_edges(c)?.len();
            }
            let a = EdgeAudit {
                part: j,
                edges_before: h.edge_count(),
                edges_after: h2.edge_count(),
                part_out: counts[j].0,
                part_inner: counts[j].1,
                retired_boundary,
                new_edges: h2.edge_count() - kept,
                decomposed_boundary: st.decomposed_boundary,
            };
            ensure!(a.new_edges <= a.decomposed_boundary, Invariant, "{} new edges exceed Σ|out(C)| = {}", a.new_edges, a.decomposed_boundary);
            ensure!(audit_holds(&a, cfg.gamma), Invariant, "edge count did not drop enough: {a:?}");
            lg = next;
            audit = Some(a);
            break;
        }
        let outcome = match audit {
            Some(a) => RoundOutcome::Contracted(a),
            None => RoundOutcome::Family,
        };
        let done = outcome == RoundOutcome::Family;
        rounds.push(RoundReport { legal, sampling_attempts, parts: counts, decompositions, outcome });
        if done {
            let family = GoodFamily { sets };
            verify_good_family(g, terminals, &family, cfg.k1, cfg.eta)?;
            return Ok(FamilyRun { family, rounds, legal: lg });
        }
    }
    Err(EdpError::Invariant(format!("no good family after {max_rounds} rounds")))
}
