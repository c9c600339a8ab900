//! Instances: normalization, LP value, partition into flow-well-linked
//! sub-instances and pair selection.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, EdpError, Result};
use crate::graph::{edge_loads, EdgeId, MultiGraph, Path, VertexId, VertexSet};
use crate::grouping::group_by_tree;
use crate::mcf::{approx_concurrent_flow, route_matching, LpMode, LpResult, MatchingOutcome};
use crate::spectral::{fiedler_order, SmallGraph};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub graph: MultiGraph,
    pub pairs: Vec<(VertexId, VertexId)>,
}

impl Instance {
    pub fn new(graph: MultiGraph, pairs: Vec<(VertexId, VertexId)>) -> Result<Instance> {
        for &(s, t) in &pairs {
            ensure!(graph.has_vertex(s) && graph.has_vertex(t), Malformed, "demand ({s},{t}) uses an unknown vertex");
            ensure!(s != t, Malformed, "demand ({s},{s}) has equal endpoints");
        }
        Ok(Instance { graph, pairs })
    }

    pub fn terminals(&self) -> Vec<VertexId> {
        let mut t: Vec<VertexId> = self.pairs.iter().flat_map(|&(s, t)| [s, t]).collect();
        t.sort_unstable();
        t
    }

    /// Every terminal has degree 1 and one pair; max degree ≤ 4.
    pub fn is_normalized(&self) -> bool {
        let t = self.terminals();
        t.windows(2).all(|w| w[0] != w[1])
            && t.iter().all(|&v| self.graph.degree(v) == 1)
            && self.graph.max_degree() <= 4
    }
}

/// Where a vertex of the normalized graph came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Vertex(VertexId),
    /// Pendant terminal added for the given pair side.
    Pendant { pair: usize, of: VertexId },
    /// Grid vertex (row, col) of the gadget replacing `of`.
    Grid { of: VertexId, row: u32, col: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalized {
    pub instance: Instance,
    pub origin: Vec<Origin>,
    /// Original edge id for each normalized edge; `None` for gadget edges.
    pub edge_of: Vec<Option<EdgeId>>,
    /// Gadget side: original vertex → grid size and attachment column of each
    /// incident normalized edge.
    pub grids: BTreeMap<VertexId, Grid>,
    pub original_edge_bound: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub d: u32,
    /// Vertex id of (row, col) is `base + row·d + col`.
    pub base: VertexId,
    /// Normalized edge id → attachment column.
    pub column: BTreeMap<EdgeId, u32>,
}

impl Grid {
    fn at(&self, row: u32, col: u32) -> VertexId {
        self.base + row * self.d + col
    }
}

impl Normalized {
    pub fn vertex_of(&self, v: VertexId) -> VertexId {
        match self.origin[v as usize] {
            Origin::Vertex(x) | Origin::Grid { of: x, .. } => x,
            Origin::Pendant { of, .. } => of,
        }
    }

    /// Maps a normalized path to the original graph: gadget edges vanish and
    /// loops are shortcut.
    pub fn path_back(&self, p: &Path) -> Path {
        let mut verts = vec![self.vertex_of(p.first())];
        let mut edges = vec![];
        for (i, &e) in p.edges.iter().enumerate() {
            if let Some(orig) = self.edge_of[e as usize] {
                edges.push(orig);
                verts.push(self.vertex_of(p.verts[i + 1]));
            }
        }
        Path { verts, edges }.shortcut()
    }

    /// Maps an original routing (path i for pair i, starting at the pair's
    /// source) into the normalized graph without raising congestion for
    /// edge-disjoint inputs.
    pub fn paths_forward(&self, original: &MultiGraph, paths: &[Path]) -> Result<Vec<Path>> {
        ensure!(paths.len() == self.instance.pairs.len(), Malformed, "one path per pair expected");
        let g = &self.instance.graph;
        let mut passes: BTreeMap<VertexId, u32> = BTreeMap::new();
        let mut out = vec![];
        for (i, p) in paths.iter().enumerate() {
            p.validate(original)?;
            let (s, t) = self.instance.pairs[i];
            ensure!(p.first() == self.vertex_of(s) && p.last() == self.vertex_of(t), Malformed, "path {i} has the wrong ends");
            let pend_s = g.incident(s).first().copied().filter(|_| matches!(self.origin[s as usize], Origin::Pendant { .. }));
            let pend_t = g.incident(t).first().copied().filter(|_| matches!(self.origin[t as usize], Origin::Pendant { .. }));
            let mut np = Path::trivial(s);
            // Node for (normalized edge, original vertex) attachment.
            let node = |e: EdgeId, v: VertexId| -> VertexId {
                match self.grids.get(&v) {
                    Some(gr) => gr.at(0, gr.column[&e]),
                    None => v,
                }
            };
            let mut cur_in: Option<EdgeId> = pend_s;
            if let Some(e) = pend_s {
                let w = node(e, self.vertex_of(s));
                np.edges.push(e);
                np.verts.push(w);
            }
            let last_orig = p.verts.len() - 1;
            for (j, &v) in p.verts.iter().enumerate() {
                let next: Option<EdgeId> = if j < last_orig { Some(p.edges[j]) } else { pend_t };
                if let Some(gr) = self.grids.get(&v) {
                    let here = *np.verts.last().unwrap();
                    let target = match next {
                        Some(e) => gr.at(0, gr.column[&e]),
                        None => here,
                    };
                    if cur_in.is_none() && here != target {
                        return Err(EdpError::Invariant("path starts inside a gadget".into()));
                    }
                    let c = passes.entry(v).or_insert(0);
                    let row = 1 + *c % (gr.d - 1);
                    *c += 1;
                    walk_grid(g, gr, here, target, row, &mut np)?;
                } else if np.last() != v {
                    return Err(EdpError::Invariant("forward map lost track of the path".into()));
                }
                if let Some(e) = next {
                    let (a, b) = g.ends(e);
                    let here = np.last();
                    ensure!(a == here || b == here, Invariant, "edge {e} does not leave {here}");
                    np.edges.push(e);
                    np.verts.push(if a == here { b } else { a });
                }
                cur_in = next;
            }
            ensure!(np.last() == t, Invariant, "forward path ends at {} instead of {t}", np.last());
            np.validate(g)?;
            out.push(np);
        }
        Ok(out)
    }
}

/// Column `a` down to `row`, across, and up column `b`.
fn walk_grid(g: &MultiGraph, gr: &Grid, from: VertexId, to: VertexId, row: u32, np: &mut Path) -> Result<()> {
    if from == to {
        return Ok(());
    }
    let ca = (from - gr.base) % gr.d;
    let cb = (to - gr.base) % gr.d;
    let mut cells = vec![];
    for r in 1..=row {
        cells.push(gr.at(r, ca));
    }
    let step: i64 = if cb > ca { 1 } else { -1 };
    let mut c = ca as i64;
    while c != cb as i64 {
        c += step;
        cells.push(gr.at(row, c as u32));
    }
    for r in (0..row).rev() {
        cells.push(gr.at(r, cb));
    }
    for w in cells {
        let v = np.last();
        let e = g
            .incident(v)
            .iter()
            .copied()
            .find(|&e| g.other(e, v) == w)
            .ok_or_else(|| EdpError::Invariant("grid step without an edge".into()))?;
        np.edges.push(e);
        np.verts.push(w);
    }
    Ok(())
}

/// Pendant terminals for every terminal that is not a degree-1 vertex used
/// once, then a d×d grid for every vertex of degree d > 4.
pub fn normalize(raw: &Instance) -> Result<Normalized> {
    let g0 = &raw.graph;
    let mut uses: BTreeMap<VertexId, usize> = BTreeMap::new();
    for &(s, t) in &raw.pairs {
        ensure!(s != t, Malformed, "demand ({s},{s}) has equal endpoints");
        *uses.entry(s).or_insert(0) += 1;
        *uses.entry(t).or_insert(0) += 1;
    }
    // Stage 1: pendants.
    let mut g = g0.clone();
    let mut origin: Vec<Origin> = (0..g.vertex_bound() as VertexId).map(Origin::Vertex).collect();
    let mut edge_of: Vec<Option<EdgeId>> = (0..g.edge_bound() as EdgeId).map(Some).collect();
    let mut pairs = vec![];
    for (i, &(s, t)) in raw.pairs.iter().enumerate() {
        let mut side = |v: VertexId, g: &mut MultiGraph| -> Result<VertexId> {
            if g0.degree(v) == 1 && uses[&v] == 1 {
                return Ok(v);
            }
            let x = g.add_vertex();
            origin.push(Origin::Pendant { pair: i, of: v });
            g.add_edge(v, x)?;
            edge_of.push(None);
            Ok(x)
        };
        let a = side(s, &mut g)?;
        let b = side(t, &mut g)?;
        pairs.push((a, b));
    }
    // Stage 2: grids, in vertex order.
    let mut grids = BTreeMap::new();
    let big: Vec<VertexId> = g.vertices().filter(|&v| g.degree(v) > 4).collect();
    for v in big {
        let inc: Vec<EdgeId> = g.incident(v).to_vec();
        let d = inc.len() as u32;
        let base = g.vertex_bound() as VertexId;
        for r in 0..d {
            for c in 0..d {
                g.add_vertex();
                origin.push(Origin::Grid { of: v, row: r, col: c });
            }
        }
        let at = |r: u32, c: u32| base + r * d + c;
        for r in 0..d {
            for c in 0..d {
                if c + 1 < d {
                    g.add_edge(at(r, c), at(r, c + 1))?;
                    edge_of.push(None);
                }
                if r + 1 < d {
                    g.add_edge(at(r, c), at(r + 1, c))?;
                    edge_of.push(None);
                }
            }
        }
        let mut column = BTreeMap::new();
        for (i, &e) in inc.iter().enumerate() {
            let u = g.other(e, v);
            let keep = edge_of[e as usize];
            g.remove_edge(e);
            column.insert(e, i as u32);
            g.revive_edge(e, u, at(0, i as u32))?;
            edge_of[e as usize] = keep;
        }
        g.remove_vertex(v);
        grids.insert(v, Grid { d, base, column });
    }
    let out = Normalized {
        instance: Instance { graph: g, pairs },
        origin,
        edge_of,
        grids,
        original_edge_bound: g0.edge_bound(),
    };
    ensure!(out.instance.is_normalized(), Invariant, "normalization left a terminal or degree violation");
    Ok(out)
}

/// LP value of the instance, as reported by the GK approximation.
pub fn lp_value(inst: &Instance, eps: f64, max_calls: Option<u64>) -> Result<LpResult> {
    approx_concurrent_flow(&inst.graph, &inst.pairs, eps, LpMode::Edp, max_calls)
}

/// A part of the vertex partition with the pairs inside it and weights π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubInstance {
    pub vertices: VertexSet,
    /// Indices into the parent instance's pair list.
    pub pairs: Vec<usize>,
    #[serde(with = "rational_map")]
    pub pi: BTreeMap<VertexId, BigRational>,
}

mod rational_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<VertexId, BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: BTreeMap<VertexId, String> = m.iter().map(|(k, q)| (*k, q.to_string())).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<VertexId, BigRational>, D::Error> {
        let v: BTreeMap<VertexId, String> = BTreeMap::deserialize(d)?;
        v.into_iter()
            .map(|(k, s)| s.parse::<BigRational>().map(|q| (k, q)).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Threshold below which a π-sparse cut splits a part.
pub const SPLIT_THRESHOLD: (i64, i64) = (1, 2);

fn pi_total(pi: &BTreeMap<VertexId, BigRational>, s: &VertexSet) -> BigRational {
    s.iter().filter_map(|v| pi.get(v)).fold(BigRational::zero(), |a, b| a + b)
}

/// Sparsest π-cut found for a connected part: (side, crossing, sparsity).
fn sparse_pi_cut(
    g: &MultiGraph,
    part: &VertexSet,
    pi: &BTreeMap<VertexId, BigRational>,
) -> Option<(VertexSet, u64, BigRational)> {
    let verts: Vec<VertexId> = part.iter().copied().collect();
    let n = verts.len();
    if n < 2 {
        return None;
    }
    let mut pos = BTreeMap::new();
    for (i, &v) in verts.iter().enumerate() {
        pos.insert(v, i);
    }
    let mut edges = vec![];
    for &v in &verts {
        for &e in g.incident(v) {
            let w = g.other(e, v);
            if v < w {
                if let Some(&j) = pos.get(&w) {
                    edges.push((pos[&v], j));
                }
            }
        }
    }
    let w: Vec<BigRational> = verts.iter().map(|v| pi.get(v).cloned().unwrap_or_else(BigRational::zero)).collect();
    let total = w.iter().fold(BigRational::zero(), |a, b| a + b);
    let mut best: Option<(Vec<usize>, u64, BigRational)> = None;
    let mut consider = |side: Vec<usize>, crossing: u64, ws: &BigRational| {
        let wo = &total - ws;
        let m = if *ws < wo { ws.clone() } else { wo };
        if m.is_zero() {
            return;
        }
        let sp = BigRational::from_integer(crossing.into()) / m;
        if best.as_ref().is_none_or(|b| sp < b.2) {
            best = Some((side, crossing, sp));
        }
    };
    if n <= 14 {
        for mask in 1u32..(1 << n) - 1 {
            if mask & 1 == 0 {
                continue;
            }
            let crossing = edges.iter().filter(|&&(a, b)| (mask >> a & 1) != (mask >> b & 1)).count() as u64;
            let side: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let ws = side.iter().fold(BigRational::zero(), |a, &i| a + &w[i]);
            consider(side, crossing, &ws);
        }
    } else {
        let order = fiedler_order(&SmallGraph { n, edges: edges.clone() });
        let mut adj = vec![vec![]; n];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut inside = vec![false; n];
        let mut crossing: i64 = 0;
        let mut ws = BigRational::zero();
        for (k, &i) in order[..n - 1].iter().enumerate() {
            inside[i] = true;
            for &j in &adj[i] {
                crossing += if inside[j] { -1 } else { 1 };
            }
            ws += &w[i];
            consider(order[..=k].to_vec(), crossing as u64, &ws);
        }
    }
    best.map(|(side, c, sp)| (side.into_iter().map(|i| verts[i]).collect(), c, sp))
}

/// Recursive sparse-cut partition with π-weight reduction (a stand-in for
/// the flow-well-linked decomposition). Parts without pairs are dropped.
pub fn partition_flow_well_linked(inst: &Instance, x: &[f64]) -> Result<Vec<SubInstance>> {
    ensure!(x.len() == inst.pairs.len(), Malformed, "one LP value per pair expected");
    let g = &inst.graph;
    let mut pi: BTreeMap<VertexId, BigRational> = BTreeMap::new();
    for (i, &(s, t)) in inst.pairs.iter().enumerate() {
        let xi = BigRational::from_f64(x[i].clamp(0.0, 1.0)).unwrap_or_else(BigRational::zero);
        pi.insert(s, xi.clone());
        pi.insert(t, xi);
    }
    let threshold = BigRational::new(SPLIT_THRESHOLD.0.into(), SPLIT_THRESHOLD.1.into());
    let mut stack: Vec<VertexSet> = g.components();
    let mut done = vec![];
    while let Some(part) = stack.pop() {
        let h = g.induced(&part)?;
        let comps = h.components();
        if comps.len() > 1 {
            stack.extend(comps);
            continue;
        }
        let inside: Vec<usize> =
            (0..inst.pairs.len()).filter(|&i| part.contains(&inst.pairs[i].0) && part.contains(&inst.pairs[i].1)).collect();
        if inside.is_empty() {
            continue;
        }
        let local: BTreeMap<VertexId, BigRational> =
            inside.iter().flat_map(|&i| [inst.pairs[i].0, inst.pairs[i].1]).map(|v| (v, pi[&v].clone())).collect();
        match sparse_pi_cut(g, &part, &local) {
            Some((side, _, sp)) if sp < threshold => {
                let other: VertexSet = part.difference(&side).copied().collect();
                let (small, _) = if pi_total(&local, &side) <= pi_total(&local, &other) { (&side, &other) } else { (&other, &side) };
                let factor = &sp / &threshold;
                for v in small {
                    if let Some(q) = pi.get_mut(v) {
                        *q = &*q * &factor;
                    }
                }
                stack.push(side.clone());
                stack.push(other);
            }
            _ => done.push(SubInstance { vertices: part, pairs: inside, pi: local }),
        }
    }
    done.sort_by(|a, b| a.vertices.first().cmp(&b.vertices.first()));
    for s in &done {
        for &i in &s.pairs {
            let (a, b) = inst.pairs[i];
            ensure!(s.pi[&a] == s.pi[&b], Invariant, "pair {i} has unequal weights");
            ensure!(s.pi[&a] <= BigRational::one(), Invariant, "terminal weight above 1");
        }
    }
    Ok(done)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Kept pair indices (into the parent instance).
    pub pairs: Vec<usize>,
    /// π(T′) as a decimal string and as a float.
    pub weight: String,
    pub weight_f64: f64,
    /// Pairs charged to each kept pair.
    pub charged: Vec<Vec<usize>>,
    pub groups: usize,
}

/// Groups terminals by π with p = 2 and keeps one pair at a time, charging
/// every pair touching its groups to it.
pub fn select_pairs(inst: &Instance, sub: &SubInstance) -> Result<Selection> {
    let h = inst.graph.induced(&sub.vertices)?;
    ensure!(h.is_connected(), Precondition, "sub-instance is disconnected");
    let two = BigRational::from_integer(2.into());
    let grouping = group_by_tree(&h, &sub.pi, two.clone())?;
    let mut group_of: BTreeMap<VertexId, usize> = BTreeMap::new();
    for (gi, grp) in grouping.groups.iter().enumerate() {
        for &v in &grp.members {
            group_of.insert(v, gi);
        }
    }
    let mut remaining: BTreeSet<usize> = sub.pairs.iter().copied().collect();
    let mut kept = vec![];
    let mut charged = vec![];
    while let Some(&i) = remaining.iter().next() {
        let (s, t) = inst.pairs[i];
        let hit: BTreeSet<usize> = [group_of[&s], group_of[&t]].into();
        let drop: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&j| {
                let (u, v) = inst.pairs[j];
                hit.contains(&group_of[&u]) || hit.contains(&group_of[&v])
            })
            .collect();
        let w = drop.iter().fold(BigRational::zero(), |a, &j| a + &sub.pi[&inst.pairs[j].0] * &two);
        let cap = BigRational::from_integer(if hit.len() == 1 { 12 } else { 24 }.into());
        ensure!(w <= cap, Invariant, "pair {i} was charged {w} > {cap}");
        for j in &drop {
            remaining.remove(j);
        }
        kept.push(i);
        charged.push(drop);
    }
    let total = pi_total(&sub.pi, &sub.pi.keys().copied().collect());
    ensure!(
        BigRational::from_integer((24 * kept.len()).into()) >= total,
        Invariant,
        "kept {} pairs for weight {total}",
        kept.len()
    );
    // Distinct kept pairs never share a group.
    let mut used = BTreeSet::new();
    for &i in &kept {
        let own: BTreeSet<usize> = [group_of[&inst.pairs[i].0], group_of[&inst.pairs[i].1]].into();
        for gi in own {
            ensure!(used.insert(gi), Invariant, "two kept pairs share a group");
        }
    }
    Ok(Selection {
        pairs: kept,
        weight_f64: total.to_f64().unwrap_or(f64::NAN),
        weight: total.to_string(),
        charged,
        groups: grouping.groups.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub trials: usize,
    pub passed: usize,
    /// First matching that could not be routed with congestion 2.
    pub counterexample: Option<Vec<(VertexId, VertexId)>>,
}

/// Routes `r` random perfect matchings on `terminals` with budget 2.
pub fn spot_check_flow_well_linked<R: Rng>(
    g: &MultiGraph,
    terminals: &[VertexId],
    r: usize,
    rng: &mut R,
) -> Result<SpotCheck> {
    let mut out = SpotCheck { trials: 0, passed: 0, counterexample: None };
    if terminals.len() < 2 {
        return Ok(out);
    }
    for _ in 0..r {
        let mut t = terminals.to_vec();
        t.shuffle(rng);
        let m: Vec<(VertexId, VertexId)> = t.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        out.trials += 1;
        let ok = match route_matching(g, &m, 2)? {
            MatchingOutcome::Routed(paths) => edge_loads(&paths).values().all(|&l| l <= 2),
            MatchingOutcome::Infeasible { .. } => false,
            MatchingOutcome::Unresolved { .. } => {
                let lp = approx_concurrent_flow(g, &m, 0.1, LpMode::Concurrent, None)?;
                lp.primal >= 0.5
            }
        };
        if ok {
            out.passed += 1;
        } else if out.counterexample.is_none() {
            out.counterexample = Some(m);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::congestion;
    use proptest::prelude::*;

    /// Greedy edge-disjoint BFS routing; `None` for pairs that fail.
    pub(crate) fn greedy(g: &MultiGraph, pairs: &[(VertexId, VertexId)]) -> Vec<Option<Path>> {
        let mut h = g.clone();
        pairs
            .iter()
            .map(|&(s, t)| {
                let p = h.bfs_path(s, t, None, None)?;
                for &e in &p.edges {
                    h.remove_edge(e);
                }
                Some(p)
            })
            .collect()
    }

    #[test]
    fn normalized_instance_is_unchanged() {
        let g = MultiGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let inst = Instance::new(g, vec![(0, 3)]).unwrap();
        let n = normalize(&inst).unwrap();
        assert_eq!(n.instance, inst);
        assert!(n.grids.is_empty());
    }

    #[test]
    fn high_degree_terminal_gets_pendant() {
        let g = MultiGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap();
        let inst = Instance::new(g, vec![(0, 3)]).unwrap();
        let n = normalize(&inst).unwrap();
        let (s, t) = n.instance.pairs[0];
        assert_eq!(t, 3);
        assert_eq!(s, 4);
        assert_eq!(n.instance.graph.degree(4), 1);
        assert_eq!(n.instance.graph.degree(0), 4);
        assert!(matches!(Instance::new(MultiGraph::new(2), vec![(1, 1)]), Err(EdpError::Malformed(_))));
    }

    #[test]
    fn degree_six_vertex_becomes_grid() {
        let es: Vec<(u32, u32)> = (1..7).map(|v| (0, v)).collect();
        let g = MultiGraph::from_edges(7, &es).unwrap();
        let inst = Instance::new(g, vec![(1, 2)]).unwrap();
        let n = normalize(&inst).unwrap();
        let gr = &n.grids[&0];
        assert_eq!(gr.d, 6);
        let h = &n.instance.graph;
        assert_eq!(h.vertex_count(), 6 + 36);
        assert_eq!(h.edge_count(), 6 + 2 * 6 * 5);
        assert!(h.max_degree() <= 4);
        for (i, e) in (0..6).enumerate() {
            assert_eq!(h.other(e, 1 + i as u32), gr.at(0, i as u32));
        }
    }

    fn arb_instance() -> impl Strategy<Value = Instance> {
        (3usize..12).prop_flat_map(|n| {
            let edges = proptest::collection::vec((0..n as u32, 0..n as u32), n..4 * n);
            let pairs = proptest::collection::vec((0..n as u32, 0..n as u32), 1..5);
            (edges, pairs).prop_map(move |(es, ps)| {
                let es: Vec<(u32, u32)> = es.into_iter().filter(|(u, v)| u != v).collect();
                let g = MultiGraph::from_edges(n, &es).unwrap();
                let ps = ps.into_iter().filter(|(u, v)| u != v).collect();
                Instance::new(g, ps).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn round_trip_preserves_pairs_and_congestion(inst in arb_instance()) {
            let n = normalize(&inst).unwrap();
            prop_assert!(n.instance.is_normalized());
            prop_assert_eq!(normalize(&n.instance).unwrap().instance, n.instance.clone());
            // Original → normalized.
            let routed: Vec<(usize, Path)> = greedy(&inst.graph, &inst.pairs)
                .into_iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p))).collect();
            let mut sub = n.clone();
            sub.instance.pairs = routed.iter().map(|(i, _)| n.instance.pairs[*i]).collect();
            let paths: Vec<Path> = routed.iter().map(|(_, p)| p.clone()).collect();
            let fwd = sub.paths_forward(&inst.graph, &paths).unwrap();
            prop_assert!(congestion(&n.instance.graph, &fwd).unwrap() <= 1);
            for (p, &(s, t)) in fwd.iter().zip(&sub.instance.pairs) {
                prop_assert_eq!((p.first(), p.last()), (s, t));
            }
            // Normalized → original.
            let back_in: Vec<Path> = greedy(&n.instance.graph, &n.instance.pairs).into_iter().flatten().collect();
            let c_norm = congestion(&n.instance.graph, &back_in).unwrap();
            let back: Vec<Path> = back_in.iter().map(|p| n.path_back(p)).collect();
            for (p, q) in back.iter().zip(&back_in) {
                p.validate(&inst.graph).unwrap();
                prop_assert_eq!((p.first(), p.last()), (n.vertex_of(q.first()), n.vertex_of(q.last())));
            }
            prop_assert!(congestion(&inst.graph, &back).unwrap() <= c_norm.max(1));
        }
    }

    #[test]
    fn partition_examples() {
        // Two disjoint paths with one pair each.
        let g = MultiGraph::from_edges(6, &[(0, 1), (1, 2), (3, 4), (4, 5)]).unwrap();
        let inst = Instance::new(g, vec![(0, 2), (3, 5)]).unwrap();
        let parts = partition_flow_well_linked(&inst, &[1.0, 1.0]).unwrap();
        assert_eq!(parts.len(), 2);
        let g = MultiGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let inst = Instance::new(g, vec![(0, 2)]).unwrap();
        let parts = partition_flow_well_linked(&inst, &[1.0]).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].pairs, vec![0]);
        let sel = select_pairs(&inst, &parts[0]).unwrap();
        assert_eq!(sel.pairs, vec![0]);
    }

    #[test]
    fn selection_charges_shared_groups() {
        // Star: every leaf pair shares the center's group when p = 2 and all
        // weights are 1, so one pair is kept.
        let es: Vec<(u32, u32)> = (1..5).map(|v| (0, v)).collect();
        let g = MultiGraph::from_edges(5, &es).unwrap();
        let inst = Instance::new(g, vec![(1, 2), (3, 4)]).unwrap();
        let sub = SubInstance {
            vertices: (0..5).collect(),
            pairs: vec![0, 1],
            pi: (1..5).map(|v| (v, BigRational::one())).collect(),
        };
        let sel = select_pairs(&inst, &sub).unwrap();
        assert_eq!(sel.pairs.len(), 1);
        assert_eq!(sel.charged[0], vec![0, 1]);
        // Path 0..20 with unit weights at both ends: groups {17,18,19} and
        // the rest, so (0,1) and (18,19) survive.
        let es: Vec<(u32, u32)> = (0..19).map(|v| (v, v + 1)).collect();
        let g = MultiGraph::from_edges(20, &es).unwrap();
        let inst = Instance::new(g, vec![(0, 1), (2, 3), (16, 17), (18, 19)]).unwrap();
        let sub = SubInstance {
            vertices: (0..20).collect(),
            pairs: vec![0, 1, 2, 3],
            pi: [0, 1, 2, 3, 16, 17, 18, 19].into_iter().map(|v| (v, BigRational::one())).collect(),
        };
        let sel = select_pairs(&inst, &sub).unwrap();
        assert_eq!(sel.pairs, vec![0, 3]);
        assert_eq!(sel.charged, vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn expander_terminals_pass_spot_checks() {
        use rand::SeedableRng;
        // K8 with pendant terminals.
        let mut es = vec![];
        for a in 0..8 {
            for b in a + 1..8 {
                es.push((a, b));
            }
        }
        let mut g = MultiGraph::from_edges(8, &es).unwrap();
        let t: Vec<VertexId> = (0..8).map(|v| { let x = g.add_vertex(); g.add_edge(v, x).unwrap(); x }).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let sc = spot_check_flow_well_linked(&g, &t, 10, &mut rng).unwrap();
        assert_eq!((sc.trials, sc.passed), (10, 10));
    }
}
