//! Routing on the embedded expander and its translation back into G.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, EdpError, Result};
use crate::graph::{edge_loads, load_histogram, EdgeId, MultiGraph, Path, VertexId};
use crate::krv::EmbeddedExpander;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub pair: usize,
    pub path: Path,
    pub deleted_edges: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyResult {
    pub ell: usize,
    pub max_degree: usize,
    pub steps: Vec<GreedyStep>,
    /// ⌊n / (8d(ℓ+1))⌋.
    pub lower_bound: usize,
}

/// Repeatedly routes the first pair (in id order) joined by a path of at
/// most `ell` edges among the remaining vertices, then deletes the path's
/// vertices. With `expander` set the routed count must reach the bound.
pub fn greedy_route(x: &MultiGraph, pairs: &[(VertexId, VertexId)], ell: usize, expander: bool) -> Result<GreedyResult> {
    let n = x.vertex_count();
    let d = x.max_degree();
    let mut used = BTreeSet::new();
    for &(s, t) in pairs {
        ensure!(x.has_vertex(s) && x.has_vertex(t) && s != t, Precondition, "bad pair ({s}, {t})");
        ensure!(used.insert(s) && used.insert(t), Precondition, "pairs share vertex");
    }
    let mut alive = vec![false; x.vertex_bound()];
    for v in x.vertices() {
        alive[v as usize] = true;
    }
    let mut done = vec![false; pairs.len()];
    let mut steps = vec![];
    loop {
        let mut found = None;
        for (i, &(s, t)) in pairs.iter().enumerate() {
            if done[i] {
                continue;
            }
            if let Some(p) = x.bfs_path(s, t, Some(&alive), Some(ell)) {
                found = Some((i, p));
                break;
            }
        }
        let Some((i, path)) = found else { break };
        let mut deleted = BTreeSet::new();
        for &v in &path.verts {
            for &e in x.incident(v) {
                if alive[x.other(e, v) as usize] {
                    deleted.insert(e);
                }
            }
        }
        for &v in &path.verts {
            alive[v as usize] = false;
        }
        ensure!(deleted.len() <= d * (ell + 1), Invariant, "routing pair {i} deleted {} edges, above d(ℓ+1)", deleted.len());
        done[i] = true;
        steps.push(GreedyStep { pair: i, path, deleted_edges: deleted.len() });
    }
    let lower_bound = if d == 0 { 0 } else { n / (8 * d * (ell + 1)) };
    if expander {
        ensure!(steps.len() >= lower_bound, Invariant, "routed {} pairs on an expander, bound is {lower_bound}", steps.len());
    }
    Ok(GreedyResult { ell, max_degree: d, steps, lower_bound })
}

/// X as a multigraph whose edge ids are indices into `emb.edges`.
pub fn expander_graph(emb: &EmbeddedExpander) -> Result<MultiGraph> {
    let mut x = MultiGraph::new(emb.terminals.len());
    for e in &emb.edges {
        x.add_edge(e.a as VertexId, e.b as VertexId)?;
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    /// Embedding path P_e of an expander edge.
    Embedding,
    /// Connector inside a component C_x.
    Component,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Expander edge index or expander vertex.
    pub owner: usize,
    pub path: Path,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutedPair {
    pub source: VertexId,
    pub sink: VertexId,
    pub path: Path,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingResult {
    pub routed: Vec<RoutedPair>,
    pub congestion: u32,
    pub embedding_congestion: u32,
    pub component_congestion: u32,
    pub histogram: BTreeMap<u32, usize>,
}

/// Path from `from` to `to` using only `edges` (BFS, ids ascending).
fn path_within(g: &MultiGraph, edges: &[EdgeId], from: VertexId, to: VertexId) -> Option<Path> {
    let mut adj: BTreeMap<VertexId, Vec<(EdgeId, VertexId)>> = BTreeMap::new();
    for &e in edges {
        let (u, v) = g.ends(e);
        adj.entry(u).or_default().push((e, v));
        adj.entry(v).or_default().push((e, u));
    }
    let mut pred: BTreeMap<VertexId, (EdgeId, VertexId)> = BTreeMap::new();
    let mut seen = BTreeSet::from([from]);
    let mut q = VecDeque::from([from]);
    while let Some(x) = q.pop_front() {
        if x == to {
            break;
        }
        for &(e, y) in adj.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(y) {
                pred.insert(y, (e, x));
                q.push_back(y);
            }
        }
    }
    if !seen.contains(&to) {
        return None;
    }
    let (mut verts, mut es) = (vec![to], vec![]);
    let mut x = to;
    while x != from {
        let (e, p) = pred[&x];
        es.push(e);
        verts.push(p);
        x = p;
    }
    verts.reverse();
    es.reverse();
    Some(Path { verts, edges: es })
}

/// Replaces each expander edge by its embedding path and each expander
/// vertex by a connector inside its component; the stitched walk is
/// shortcut to a simple path.
pub fn translate(g: &MultiGraph, emb: &EmbeddedExpander, x_paths: &[Path]) -> Result<RoutingResult> {
    let mut xv = BTreeSet::new();
    for p in x_paths {
        ensure!(!p.edges.is_empty(), Precondition, "expander path has no edges");
        for &v in &p.verts {
            ensure!(xv.insert(v), Precondition, "expander paths are not vertex-disjoint");
        }
    }
    let connector = |x: usize, from: VertexId, to: VertexId| -> Result<Segment> {
        let path = path_within(g, &emb.components[x], from, to)
            .ok_or_else(|| EdpError::Invariant(format!("component C_{x} does not join {from} and {to}")))?;
        Ok(Segment { kind: SegmentKind::Component, owner: x, path })
    };
    let mut routed = vec![];
    for xp in x_paths {
        let mut segs = vec![];
        let mut at = emb.terminals[xp.verts[0] as usize];
        for (i, &e) in xp.edges.iter().enumerate() {
            let xe = &emb.edges[e as usize];
            let (from, to) = (xp.verts[i] as usize, xp.verts[i + 1] as usize);
            let p = if (xe.a, xe.b) == (from, to) { xe.path.clone() } else { xe.path.reversed() };
            segs.push(connector(from, at, p.first())?);
            at = p.last();
            segs.push(Segment { kind: SegmentKind::Embedding, owner: e as usize, path: p });
        }
        let last = *xp.verts.last().unwrap() as usize;
        segs.push(connector(last, at, emb.terminals[last])?);
        let mut walk = segs[0].path.clone();
        for s in &segs[1..] {
            walk.concat(&s.path);
        }
        let path = walk.shortcut();
        routed.push(RoutedPair { source: emb.terminals[xp.verts[0] as usize], sink: emb.terminals[last], path, segments: segs });
    }
    let seg_loads = |kind: SegmentKind| {
        edge_loads(routed.iter().flat_map(|r| r.segments.iter().filter(move |s| s.kind == kind).map(|s| &s.path)))
    };
    let l1 = seg_loads(SegmentKind::Embedding);
    let l2 = seg_loads(SegmentKind::Component);
    let embedding_congestion = l1.values().copied().max().unwrap_or(0);
    let component_congestion = l2.values().copied().max().unwrap_or(0);
    if let Some((e, c)) = l1.iter().find(|(_, &c)| c > 2) {
        return Err(EdpError::Verification(format!("edge {e} carries {c} embedding segments (limit 2)")));
    }
    if let Some((e, c)) = l2.iter().find(|(_, &c)| c > 12) {
        return Err(EdpError::Verification(format!("edge {e} carries {c} component segments (limit 12)")));
    }
    let loads = edge_loads(routed.iter().map(|r| &r.path));
    let congestion = loads.values().copied().max().unwrap_or(0);
    ensure!(congestion <= 14, Verification, "translated routing has congestion {congestion}");
    Ok(RoutingResult { routed, congestion, embedding_congestion, component_congestion, histogram: load_histogram(&loads) })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingCheck {
    pub routed: usize,
    pub congestion: u32,
    pub histogram: BTreeMap<u32, usize>,
}

/// Independent check of a routing against the demand pairs: every path is a
/// valid simple path of G joining a distinct demanded pair, and no edge
/// carries more than `limit` paths.
pub fn verify_routing(g: &MultiGraph, demands: &[(VertexId, VertexId)], paths: &[(VertexId, VertexId, Path)], limit: u32) -> Result<RoutingCheck> {
    let mut index: BTreeMap<(VertexId, VertexId), Vec<usize>> = BTreeMap::new();
    for (i, &(s, t)) in demands.iter().enumerate() {
        index.entry((s.min(t), s.max(t))).or_default().push(i);
    }
    let mut used = BTreeSet::new();
    for (s, t, p) in paths {
        p.validate(g).map_err(|e| EdpError::Verification(e.to_string()))?;
        ensure!(p.is_simple(), Verification, "path for ({s}, {t}) repeats a vertex");
        ensure!(
            (p.first(), p.last()) == (*s, *t) || (p.first(), p.last()) == (*t, *s),
            Verification,
            "path for ({s}, {t}) joins {} and {}",
            p.first(),
            p.last()
        );
        let cands = index.get(&((*s).min(*t), (*s).max(*t))).ok_or_else(|| EdpError::Verification(format!("({s}, {t}) is not a demand pair")))?;
        let free = cands.iter().find(|i| !used.contains(*i)).ok_or_else(|| EdpError::Verification(format!("pair ({s}, {t}) routed twice")))?;
        used.insert(*free);
    }
    let loads = edge_loads(paths.iter().map(|(_, _, p)| p));
    if let Some((e, c)) = loads.iter().filter(|(_, &c)| c > limit).max_by_key(|(_, &c)| c) {
        return Err(EdpError::Verification(format!("edge {e} carries {c} paths, limit {limit}")));
    }
    Ok(RoutingCheck { routed: paths.len(), congestion: loads.values().copied().max().unwrap_or(0), histogram: load_histogram(&loads) })
}
