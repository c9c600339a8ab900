//! Interface groupings of the good sets and the routing primitives between
//! their representative edges.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, EdpError, Result};
use crate::family::GoodFamily;
use crate::flow::{max_flow_integral, Endpoint, FlowProblem, FlowResult};
use crate::graph::{congestion, EdgeId, MultiGraph, Path, VertexId, VertexSet};
use crate::grouping::{group_edges, Group};

/// Grouping of Γ_j for one good set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetGrouping {
    pub groups: Vec<Group<EdgeId>>,
    /// Γ′_j, one representative per kept group, ascending.
    pub reps: Vec<EdgeId>,
    /// U′_e for every representative e.
    pub subgroup: BTreeMap<EdgeId, Vec<EdgeId>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceGrouping {
    pub p: u64,
    pub k_star: u64,
    pub sets: Vec<SetGrouping>,
}

/// G[S] ∪ out(S) restricted to the component holding `anchors`.
fn host_graph(g: &MultiGraph, s: &VertexSet, anchors: &[EdgeId]) -> Result<MultiGraph> {
    let mut verts = s.clone();
    for e in g.out_edges(s)? {
        let (u, v) = g.ends(e);
        verts.insert(u);
        verts.insert(v);
    }
    let mut h = g.induced(&verts)?;
    let outside: Vec<EdgeId> = h.edges().filter(|&e| {
        let (u, v) = h.ends(e);
        !s.contains(&u) && !s.contains(&v)
    }).collect();
    for e in outside {
        h.remove_edge(e);
    }
    let Some(&first) = anchors.first() else { return Ok(h) };
    let comp = h
        .components()
        .into_iter()
        .find(|c| c.contains(&h.ends(first).0))
        .unwrap_or_default();
    for &e in anchors {
        ensure!(comp.contains(&h.ends(e).0), Invariant, "anchor edge {e} lies in another component of G[S] ∪ out(S)");
    }
    let drop: Vec<VertexId> = h.vertices().filter(|v| !comp.contains(v)).collect();
    for v in drop {
        h.remove_vertex(v);
    }
    Ok(h)
}

/// Groups each Γ_j along a spanning tree of G[S_j] ∪ out(S_j) with sizes in
/// [p, 3p], keeps k* representatives and a p-edge subgroup around each.
pub fn group_interfaces(g: &MultiGraph, fam: &GoodFamily, p: u64, k_star: u64) -> Result<InterfaceGrouping> {
    ensure!(p >= 1 && k_star >= 1, Precondition, "grouping needs p ≥ 1 and k* ≥ 1 (p = {p}, k* = {k_star})");
    let mut sets = vec![];
    for (j, gs) in fam.sets.iter().enumerate() {
        ensure!(
            gs.gamma_edges.len() as u64 >= p,
            Precondition,
            "|Γ_{j}| = {} is below the grouping parameter p = {p}",
            gs.gamma_edges.len()
        );
        let h = host_graph(g, &gs.set, &gs.gamma_edges)?;
        let grouping = group_edges(&h, &gs.gamma_edges, p)?;
        ensure!(!grouping.underweight, Invariant, "Γ_{j} grouping is underweight");
        let mut reps: Vec<EdgeId> = grouping.groups.iter().map(|grp| grp.members[0]).collect();
        reps.sort_unstable();
        ensure!(reps.len() as u64 >= k_star, Invariant, "only {} groups for Γ_{j}, need k* = {k_star}", reps.len());
        reps.truncate(k_star as usize);
        let mut subgroup = BTreeMap::new();
        for grp in &grouping.groups {
            let e = grp.members[0];
            if reps.binary_search(&e).is_ok() {
                subgroup.insert(e, grp.members.iter().take(p as usize).copied().collect());
            }
        }
        sets.push(SetGrouping { groups: grouping.groups, reps, subgroup });
    }
    let out = InterfaceGrouping { p, k_star, sets };
    verify_interfaces(g, fam, &out)?;
    Ok(out)
}

pub fn verify_interfaces(g: &MultiGraph, fam: &GoodFamily, ig: &InterfaceGrouping) -> Result<()> {
    ensure!(ig.sets.len() == fam.sets.len(), Verification, "one grouping per good set expected");
    for (j, (sg, gs)) in ig.sets.iter().zip(&fam.sets).enumerate() {
        let gamma: BTreeSet<EdgeId> = gs.gamma_edges.iter().copied().collect();
        let mut seen = BTreeSet::new();
        let mut tree_edges = BTreeSet::new();
        for grp in &sg.groups {
            let w = grp.members.len() as u64;
            ensure!(w >= ig.p && w <= 3 * ig.p, Verification, "Γ_{j}: group of size {w} outside [{}, {}]", ig.p, 3 * ig.p);
            for e in &grp.members {
                ensure!(gamma.contains(e) && seen.insert(*e), Verification, "Γ_{j}: bad group member {e}");
            }
            for &e in &grp.tree {
                ensure!(g.has_edge(e), Verification, "Γ_{j}: tree edge {e} not in G");
                ensure!(tree_edges.insert(e), Verification, "Γ_{j}: group trees share edge {e}");
            }
        }
        ensure!(seen == gamma, Verification, "Γ_{j}: groups do not cover Γ_{j}");
        ensure!(sg.reps.len() as u64 == ig.k_star, Verification, "|Γ′_{j}| = {} ≠ k*", sg.reps.len());
        for e in &sg.reps {
            let u = &sg.subgroup[e];
            let grp = sg.groups.iter().find(|grp| grp.members.contains(e)).unwrap();
            ensure!(u.len() as u64 == ig.p && u.contains(e), Verification, "Γ_{j}: U′ of {e} must have p edges including it");
            ensure!(u.iter().all(|x| grp.members.contains(x)), Verification, "Γ_{j}: U′ of {e} leaves its group");
        }
        let reps_groups: BTreeSet<usize> = sg
            .reps
            .iter()
            .map(|e| sg.groups.iter().position(|grp| grp.members.contains(e)).unwrap())
            .collect();
        ensure!(reps_groups.len() == sg.reps.len(), Verification, "Γ_{j}: two representatives share a group");
    }
    Ok(())
}

/// A path joining an anchor (edge or terminal vertex) to an edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub from: u32,
    pub to: EdgeId,
    pub path: Path,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Linkage {
    Routed(Vec<Link>),
    /// Max-flow fell short; `side` is the source side of a minimum cut.
    Blocked { value: u64, side: VertexSet },
}

fn links_from(r: FlowResult, from: &[u32], to: &[EdgeId]) -> Linkage {
    match r {
        FlowResult::Paths { paths, .. } => {
            let mut links: Vec<Link> =
                paths.into_iter().map(|fp| Link { from: from[fp.source], to: to[fp.sink], path: fp.path }).collect();
            links.sort_by_key(|l| l.from);
            Linkage::Routed(links)
        }
        FlowResult::Cut { value, side } => Linkage::Blocked { value, side },
    }
}

fn half(g: &MultiGraph, e: EdgeId, s: &VertexSet) -> Endpoint {
    let (u, v) = g.ends(e);
    Endpoint::HalfEdge { edge: e, inner: if s.contains(&u) { u } else { v } }
}

fn distinct(xs: &[EdgeId]) -> bool {
    xs.iter().collect::<BTreeSet<_>>().len() == xs.len()
}

/// One-to-one paths X → Y inside G[S] ∪ out(S) with congestion ≤ 2.
pub fn route_within(g: &MultiGraph, s: &VertexSet, x: &[EdgeId], y: &[EdgeId]) -> Result<Linkage> {
    ensure!(x.len() == y.len(), Precondition, "|X| = {} ≠ |Y| = {}", x.len(), y.len());
    ensure!(distinct(x) && distinct(y), Precondition, "X and Y must not repeat edges");
    let out: BTreeSet<EdgeId> = g.out_edges(s)?.into_iter().collect();
    for e in x.iter().chain(y) {
        ensure!(out.contains(e), Precondition, "edge {e} is not in out(S)");
    }
    let mask = g.vertex_mask(s)?;
    let mut p = FlowProblem::new(g, 2);
    p.vertex_allowed = Some(&mask);
    p.sources = x.iter().map(|&e| (half(g, e, s), 1)).collect();
    p.sinks = y.iter().map(|&e| (half(g, e, s), 1)).collect();
    let r = links_from(max_flow_integral(&p, x.len() as u64)?, x, y);
    if let Linkage::Routed(links) = &r {
        check_links(g, links, 2, Some(s))?;
    }
    Ok(r)
}

/// One-to-one paths Γ′_i → Γ′_j in G with congestion ≤ 2.
pub fn route_between(g: &MultiGraph, from: &[EdgeId], to: &[EdgeId]) -> Result<Linkage> {
    ensure!(from.len() == to.len(), Precondition, "sizes differ");
    ensure!(distinct(from) && distinct(to), Precondition, "edge sets must not repeat edges");
    if from == to {
        let links = from
            .iter()
            .map(|&e| {
                let (u, v) = g.ends(e);
                Link { from: e, to: e, path: Path { verts: vec![u, v], edges: vec![e] } }
            })
            .collect();
        return Ok(Linkage::Routed(links));
    }
    let mut p = FlowProblem::new(g, 2);
    p.sources = from.iter().map(|&e| (Endpoint::Edge(e), 1)).collect();
    p.sinks = to.iter().map(|&e| (Endpoint::Edge(e), 1)).collect();
    let r = links_from(max_flow_integral(&p, from.len() as u64)?, from, to);
    if let Linkage::Routed(links) = &r {
        check_links(g, links, 2, None)?;
    }
    Ok(r)
}

/// One-to-one paths from terminals to the edges of Γ*₁ with congestion ≤ 4.
pub fn connect_terminals(g: &MultiGraph, terminals: &[VertexId], edges: &[EdgeId]) -> Result<Linkage> {
    ensure!(terminals.len() == edges.len(), Precondition, "need as many terminals as edges");
    ensure!(distinct(edges), Precondition, "edges must not repeat");
    let mut p = FlowProblem::new(g, 4);
    p.sources = terminals.iter().map(|&t| (Endpoint::Vertex(t), 1)).collect();
    p.sinks = edges.iter().map(|&e| (Endpoint::Edge(e), 1)).collect();
    let r = links_from(max_flow_integral(&p, edges.len() as u64)?, terminals, edges);
    if let Linkage::Routed(links) = &r {
        for l in links {
            ensure!(l.path.first() == l.from, Invariant, "terminal path does not start at {}", l.from);
        }
        check_links(g, links, 4, None)?;
    }
    Ok(r)
}

/// Paths are valid, end on their target edge, stay inside `inside` (when
/// given) apart from the anchors, and respect the congestion budget.
pub fn check_links(g: &MultiGraph, links: &[Link], budget: u32, inside: Option<&VertexSet>) -> Result<()> {
    let mut targets = BTreeSet::new();
    let mut sources = BTreeSet::new();
    for l in links {
        l.path.validate(g)?;
        ensure!(l.path.edges.last() == Some(&l.to), Invariant, "path does not end with edge {}", l.to);
        ensure!(targets.insert(l.to) && sources.insert(l.from), Invariant, "linkage is not one-to-one");
        if let Some(s) = inside {
            let n = l.path.edges.len();
            for &e in l.path.edges.iter().take(n.saturating_sub(1)).skip(1) {
                let (u, v) = g.ends(e);
                ensure!(s.contains(&u) && s.contains(&v), Invariant, "path leaves G[S] at edge {e}");
            }
        }
    }
    let paths: Vec<Path> = links.iter().map(|l| l.path.clone()).collect();
    let c = congestion(g, &paths)?;
    ensure!(c <= budget, Invariant, "linkage congestion {c} exceeds {budget}");
    Ok(())
}

impl Linkage {
    pub fn routed(self, what: &str) -> Result<Vec<Link>> {
        match self {
            Linkage::Routed(l) => Ok(l),
            Linkage::Blocked { value, .. } => Err(EdpError::Verification(format!("{what}: only {value} paths fit the budget"))),
        }
    }
}
