//! Grouping weighted vertices, terminals or edges along a spanning tree.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Display;
use std::ops::{Add, Sub};

use num_traits::Zero;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, EdpError, Result};
use crate::graph::{EdgeId, MultiGraph, VertexId};

/// One group with a tree of the host graph spanning its elements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group<T, W = u64> {
    pub members: Vec<T>,
    pub tree: Vec<EdgeId>,
    pub weight: W,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping<T, W = u64> {
    pub p: W,
    pub groups: Vec<Group<T, W>>,
    /// Total weight was below p, so the single group violates the lower bound.
    pub underweight: bool,
}

/// BFS spanning tree from the smallest vertex: (parent edge, children by id, depth).
struct Rooted {
    order: Vec<VertexId>,
    parent_edge: Vec<Option<EdgeId>>,
    children: Vec<Vec<VertexId>>,
    depth: Vec<usize>,
    root: VertexId,
}

fn bfs_tree(g: &MultiGraph) -> Result<Rooted> {
    let root = g.vertices().next().ok_or_else(|| EdpError::Precondition("empty graph".into()))?;
    let nb = g.vertex_bound();
    let mut parent_edge = vec![None; nb];
    let mut depth = vec![usize::MAX; nb];
    let mut children = vec![vec![]; nb];
    let mut order = vec![root];
    depth[root as usize] = 0;
    let mut q = VecDeque::from([root]);
    while let Some(v) = q.pop_front() {
        for &e in g.incident(v) {
            let w = g.other(e, v);
            if depth[w as usize] == usize::MAX {
                depth[w as usize] = depth[v as usize] + 1;
                parent_edge[w as usize] = Some(e);
                children[v as usize].push(w);
                order.push(w);
                q.push_back(w);
            }
        }
    }
    ensure!(order.len() == g.vertex_count(), Precondition, "graph is disconnected");
    for c in children.iter_mut() {
        c.sort_unstable();
    }
    Ok(Rooted { order, parent_edge, children, depth, root })
}

/// Exact weight type usable for grouping.
pub trait Weight: Clone + Ord + Zero + Add<Output = Self> + Sub<Output = Self> + Display {}
impl<W: Clone + Ord + Zero + Add<Output = W> + Sub<Output = W> + Display> Weight for W {}

/// Vertex groups with their trees; weights default to 0.
pub fn group_by_tree<W: Weight>(g: &MultiGraph, weights: &BTreeMap<VertexId, W>, p: W) -> Result<Grouping<VertexId, W>> {
    ensure!(p > W::zero(), Precondition, "p must be positive");
    for (v, w) in weights {
        ensure!(g.has_vertex(*v), Malformed, "weight on unknown vertex {v}");
        ensure!(*w >= W::zero(), Precondition, "vertex {v} has negative weight");
        ensure!(*w <= p, Precondition, "vertex {v} has weight {w} > p = {p}");
    }
    let p2 = p.clone() + p.clone();
    let p3 = p2.clone() + p.clone();
    let t = bfs_tree(g)?;
    let nb = g.vertex_bound();
    let wt = |v: VertexId| weights.get(&v).cloned().unwrap_or_else(W::zero);
    let mut sub = vec![W::zero(); nb];
    let mut by_depth = t.order.clone();
    by_depth.sort_by(|&a, &b| t.depth[b as usize].cmp(&t.depth[a as usize]).then(a.cmp(&b)));
    for &v in &by_depth {
        let mut acc = wt(v);
        for &c in &t.children[v as usize] {
            acc = acc + sub[c as usize].clone();
        }
        sub[v as usize] = acc;
    }
    let mut removed = vec![false; nb];
    let mut next_child = vec![0usize; nb];
    let mut groups = vec![];

    // Collects the live subtree at v (vertices and tree edges) and marks it removed.
    let take = |v: VertexId, removed: &mut Vec<bool>, verts: &mut Vec<VertexId>, edges: &mut Vec<EdgeId>| {
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            removed[x as usize] = true;
            verts.push(x);
            for &c in &t.children[x as usize] {
                if !removed[c as usize] {
                    edges.push(t.parent_edge[c as usize].unwrap());
                    stack.push(c);
                }
            }
        }
    };
    let lower = |mut v: VertexId, amount: W, sub: &mut Vec<W>| loop {
        sub[v as usize] = sub[v as usize].clone() - amount.clone();
        match t.parent_edge[v as usize] {
            Some(e) => v = g.other(e, v),
            None => break,
        }
    };

    for &v in &by_depth {
        while sub[t.root as usize] > p3 && sub[v as usize] > p {
            let mut verts = vec![];
            let mut edges = vec![];
            if sub[v as usize] <= p2 {
                take(v, &mut removed, &mut verts, &mut edges);
                let w = sub[v as usize].clone();
                lower(v, w, &mut sub);
            } else {
                let mut acc = W::zero();
                let kids = &t.children[v as usize];
                while acc < p {
                    let c = kids[next_child[v as usize]];
                    next_child[v as usize] += 1;
                    if removed[c as usize] {
                        continue;
                    }
                    acc = acc + sub[c as usize].clone();
                    edges.push(t.parent_edge[c as usize].unwrap());
                    take(c, &mut removed, &mut verts, &mut edges);
                }
                lower(v, acc, &mut sub);
            }
            let mut members: Vec<VertexId> = verts;
            members.sort_unstable();
            let weight = members.iter().fold(W::zero(), |a, &x| a + wt(x));
            edges.sort_unstable();
            groups.push(Group { members, tree: edges, weight });
        }
    }
    let mut verts = vec![];
    let mut edges = vec![];
    take(t.root, &mut removed, &mut verts, &mut edges);
    verts.sort_unstable();
    edges.sort_unstable();
    let weight = verts.iter().fold(W::zero(), |a, &x| a + wt(x));
    let underweight = weight < p;
    groups.push(Group { members: verts, tree: edges, weight });
    let out = Grouping { p, groups, underweight };
    verify_vertex_grouping(g, weights, &out)?;
    Ok(out)
}

/// Terminal groups; non-terminals have weight 0 and are dropped from members.
pub fn group_terminals(g: &MultiGraph, terminals: &[VertexId], p: u64) -> Result<Grouping<VertexId>> {
    let mut w = BTreeMap::new();
    for &t in terminals {
        ensure!(w.insert(t, 1).is_none(), Malformed, "terminal {t} listed twice");
    }
    let mut out = group_by_tree(g, &w, p)?;
    for grp in out.groups.iter_mut() {
        grp.members.retain(|v| w.contains_key(v));
    }
    out.groups.retain(|grp| !grp.members.is_empty());
    Ok(out)
}

/// Edge groups: each edge of `subset` is subdivided by a unit-weight vertex;
/// the trees are projected back to edges of `g`.
pub fn group_edges(g: &MultiGraph, subset: &[EdgeId], p: u64) -> Result<Grouping<EdgeId>> {
    let mut h = g.clone();
    let mut host: BTreeMap<EdgeId, EdgeId> = BTreeMap::new();
    let mut mid: BTreeMap<VertexId, EdgeId> = BTreeMap::new();
    let mut w = BTreeMap::new();
    for &e in subset {
        ensure!(g.has_edge(e), Malformed, "unknown edge {e}");
        ensure!(h.has_edge(e), Malformed, "edge {e} listed twice");
        let (u, v) = g.ends(e);
        h.remove_edge(e);
        let x = h.add_vertex();
        host.insert(h.add_edge(u, x)?, e);
        host.insert(h.add_edge(x, v)?, e);
        mid.insert(x, e);
        w.insert(x, 1);
    }
    let vg = group_by_tree(&h, &w, p)?;
    let mut groups = vec![];
    for grp in vg.groups {
        let members: Vec<EdgeId> = {
            let mut m: Vec<EdgeId> = grp.members.iter().filter_map(|v| mid.get(v).copied()).collect();
            m.sort_unstable();
            m
        };
        if members.is_empty() {
            continue;
        }
        let mut edges: Vec<EdgeId> = grp.tree.iter().map(|e| host.get(e).copied().unwrap_or(*e)).collect();
        edges.extend(&members);
        edges.sort_unstable();
        edges.dedup();
        let tree = prune_to_tree(g, &edges, &members);
        groups.push(Group { members, tree, weight: grp.weight });
    }
    let out = Grouping { p, groups, underweight: vg.underweight };
    verify_edge_grouping(g, subset, &out)?;
    Ok(out)
}

/// Drops cycle-closing edges outside `keep`, preferring `keep` edges first.
pub(crate) fn prune_to_tree(g: &MultiGraph, edges: &[EdgeId], keep: &[EdgeId]) -> Vec<EdgeId> {
    let mut uf: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    fn find(uf: &mut BTreeMap<VertexId, VertexId>, v: VertexId) -> VertexId {
        let p = *uf.entry(v).or_insert(v);
        if p == v {
            return v;
        }
        let r = find(uf, p);
        uf.insert(v, r);
        r
    }
    let mut out = vec![];
    let ordered = keep.iter().chain(edges.iter().filter(|e| !keep.contains(e)));
    for &e in ordered {
        let (u, v) = g.ends(e);
        let (a, b) = (find(&mut uf, u), find(&mut uf, v));
        if a != b {
            uf.insert(a, b);
            out.push(e);
        } else if keep.contains(&e) {
            out.push(e);
        }
    }
    out.sort_unstable();
    out
}

fn tree_is_connected(g: &MultiGraph, tree: &[EdgeId], must: &[VertexId]) -> bool {
    let mut adj: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    for &e in tree {
        let (u, v) = g.ends(e);
        adj.entry(u).or_default().push(v);
        adj.entry(v).or_default().push(u);
    }
    let Some(&start) = must.first().or(adj.keys().next()) else { return true };
    let mut seen = std::collections::BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(x) = stack.pop() {
        for &y in adj.get(&x).map(|v| v.as_slice()).unwrap_or(&[]) {
            if seen.insert(y) {
                stack.push(y);
            }
        }
    }
    must.iter().all(|v| seen.contains(v)) && adj.keys().all(|v| seen.contains(v))
}

fn check_disjoint(trees: impl Iterator<Item = Vec<EdgeId>>) -> Result<()> {
    let mut used = std::collections::BTreeSet::new();
    for t in trees {
        for e in t {
            ensure!(used.insert(e), Invariant, "edge {e} lies in two group trees");
        }
    }
    Ok(())
}

fn check_weight<T, W: Weight>(out: &Grouping<T, W>) -> Result<()> {
    let p3 = out.p.clone() + out.p.clone() + out.p.clone();
    for grp in &out.groups {
        let lower_ok = grp.weight >= out.p || out.underweight;
        ensure!(lower_ok && grp.weight <= p3, Invariant, "group weight {} outside [p, 3p] for p = {}", grp.weight, out.p);
    }
    Ok(())
}

pub fn verify_vertex_grouping<W: Weight>(
    g: &MultiGraph,
    weights: &BTreeMap<VertexId, W>,
    out: &Grouping<VertexId, W>,
) -> Result<()> {
    let mut count = BTreeMap::new();
    for grp in &out.groups {
        let w = grp.members.iter().fold(W::zero(), |a, v| a + weights.get(v).cloned().unwrap_or_else(W::zero));
        ensure!(w == grp.weight, Invariant, "stored group weight is wrong");
        ensure!(tree_is_connected(g, &grp.tree, &grp.members), Invariant, "group tree does not span its members");
        let mut span: std::collections::BTreeSet<VertexId> = grp.members.iter().copied().collect();
        for &e in &grp.tree {
            let (u, v) = g.ends(e);
            span.extend([u, v]);
        }
        ensure!(grp.tree.len() + 1 == span.len().max(1), Invariant, "group tree has a cycle");
        for &v in &grp.members {
            *count.entry(v).or_insert(0) += 1;
        }
    }
    ensure!(g.vertices().all(|v| count.get(&v) == Some(&1)), Invariant, "groups do not partition the vertices");
    check_weight(out)?;
    check_disjoint(out.groups.iter().map(|grp| grp.tree.clone()))
}

pub fn verify_edge_grouping(g: &MultiGraph, subset: &[EdgeId], out: &Grouping<EdgeId>) -> Result<()> {
    let mut all: Vec<EdgeId> = out.groups.iter().flat_map(|grp| grp.members.clone()).collect();
    all.sort_unstable();
    let mut want = subset.to_vec();
    want.sort_unstable();
    ensure!(all == want, Invariant, "groups do not partition the edge subset");
    for grp in &out.groups {
        ensure!(grp.weight == grp.members.len() as u64, Invariant, "stored group weight is wrong");
        ensure!(grp.members.iter().all(|e| grp.tree.contains(e)), Invariant, "group tree misses a member edge");
        ensure!(tree_is_connected(g, &grp.tree, &[]), Invariant, "group tree is disconnected");
    }
    check_weight(out)?;
    check_disjoint(out.groups.iter().map(|grp| grp.tree.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(n: usize) -> MultiGraph {
        let es: Vec<(u32, u32)> = (0..n as u32 - 1).map(|i| (i, i + 1)).collect();
        MultiGraph::from_edges(n, &es).unwrap()
    }

    #[test]
    fn path_of_six_unit_vertices() {
        let g = path(6);
        let w = (0..6).map(|v| (v, 1)).collect();
        let out = group_by_tree(&g, &w, 2).unwrap();
        assert!(out.groups.iter().all(|grp| (2..=6).contains(&grp.weight)));
        assert!(!out.underweight);
    }

    #[test]
    fn light_total_gives_one_group() {
        let g = path(5);
        let w = (0..3).map(|v| (v, 2)).collect();
        let out = group_by_tree(&g, &w, 2).unwrap();
        assert_eq!(out.groups.len(), 1);
        assert_eq!(out.groups[0].members, vec![0, 1, 2, 3, 4]);
        let w1 = BTreeMap::from([(0, 1)]);
        assert!(group_by_tree(&g, &w1, 2).unwrap().underweight);
    }

    #[test]
    fn p_one_groups_have_one_to_three_vertices() {
        let g = path(10);
        let w = (0..10).map(|v| (v, 1)).collect();
        let out = group_by_tree(&g, &w, 1).unwrap();
        assert!(out.groups.iter().all(|grp| (1..=3).contains(&grp.members.len())));
    }

    #[test]
    fn errors() {
        let g = MultiGraph::from_edges(3, &[(0, 1)]).unwrap();
        assert!(matches!(group_by_tree(&g, &BTreeMap::new(), 1), Err(EdpError::Precondition(_))));
        let g = path(3);
        assert!(matches!(group_by_tree(&g, &BTreeMap::from([(0, 3)]), 2), Err(EdpError::Precondition(_))));
    }

    #[test]
    fn four_cycle_edges() {
        let g = MultiGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let out = group_edges(&g, &[0, 1, 2, 3], 2).unwrap();
        assert!(out.groups.iter().all(|grp| (2..=6).contains(&grp.members.len())));
        let one = group_edges(&g, &[0, 2], 1).unwrap();
        assert!(one.groups.iter().all(|grp| (1..=3).contains(&grp.members.len())));
    }

    #[test]
    fn star_leaves() {
        let g = MultiGraph::from_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]).unwrap();
        let out = group_terminals(&g, &[1, 2, 3, 4, 5], 2).unwrap();
        let total: usize = out.groups.iter().map(|grp| grp.members.len()).sum();
        assert_eq!(total, 5);
        assert!(out.groups.iter().all(|grp| (2..=6).contains(&grp.members.len())));
    }

    fn arb_connected() -> impl Strategy<Value = MultiGraph> {
        (2usize..30).prop_flat_map(|n| {
            let parents: Vec<BoxedStrategy<u32>> = (1..n).map(|i| (0..i as u32).boxed()).collect();
            (parents, proptest::collection::vec((0..n as u32, 0..n as u32), 0..20)).prop_map(move |(ps, extra)| {
                let mut g = MultiGraph::new(n);
                for (i, p) in ps.into_iter().enumerate() {
                    g.add_edge(p, i as u32 + 1).unwrap();
                }
                for (u, v) in extra {
                    if u != v {
                        g.add_edge(u, v).unwrap();
                    }
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn vertex_grouping_bounds(g in arb_connected(), p in 1u64..6, seed in any::<u64>()) {
            let w: BTreeMap<VertexId, u64> = g.vertices().map(|v| (v, (seed >> (v % 60)) % (p + 1))).collect();
            let out = group_by_tree(&g, &w, p).unwrap();
            let total: u64 = w.values().sum();
            prop_assert_eq!(out.underweight, total < p);
            for grp in &out.groups {
                prop_assert!(grp.weight <= 3 * p);
                prop_assert!(grp.weight >= p || out.underweight);
            }
        }

        #[test]
        fn edge_grouping_bounds(g in arb_connected(), p in 1u64..4, pick in any::<u64>()) {
            let subset: Vec<EdgeId> = g.edges().filter(|e| pick >> (e % 64) & 1 == 1).collect();
            prop_assume!(!subset.is_empty());
            let out = group_edges(&g, &subset, p).unwrap();
            for grp in &out.groups {
                prop_assert!(grp.members.len() as u64 <= 3 * p);
                prop_assert!(grp.members.len() as u64 >= p || out.underweight);
            }
        }
    }
}
