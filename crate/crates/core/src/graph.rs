//! Undirected multigraph with stable vertex and edge ids.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, EdpError, Result};

pub type VertexId = u32;
pub type EdgeId = u32;
pub type VertexSet = BTreeSet<VertexId>;
pub type EdgeSet = BTreeSet<EdgeId>;

/// Multigraph whose ids never change. Removed vertices and edges leave holes,
/// so ids stay valid across contraction and induced subgraphs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiGraph {
    ends: Vec<(VertexId, VertexId)>,
    edge_alive: Vec<bool>,
    vertex_alive: Vec<bool>,
    adj: Vec<Vec<EdgeId>>,
    n_alive: usize,
    m_alive: usize,
}

impl MultiGraph {
    pub fn new(n: usize) -> Self {
        MultiGraph {
            ends: Vec::new(),
            edge_alive: Vec::new(),
            vertex_alive: vec![true; n],
            adj: vec![Vec::new(); n],
            n_alive: n,
            m_alive: 0,
        }
    }

    pub fn from_edges(n: usize, edges: &[(VertexId, VertexId)]) -> Result<Self> {
        let mut g = MultiGraph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn add_vertex(&mut self) -> VertexId {
        self.vertex_alive.push(true);
        self.adj.push(Vec::new());
        self.n_alive += 1;
        (self.vertex_alive.len() - 1) as VertexId
    }

    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> Result<EdgeId> {
        ensure!(self.has_vertex(u), Malformed, "unknown vertex {u}");
        ensure!(self.has_vertex(v), Malformed, "unknown vertex {v}");
        ensure!(u != v, Malformed, "self-loop at vertex {u}");
        let id = self.ends.len() as EdgeId;
        self.ends.push((u, v));
        self.edge_alive.push(true);
        self.adj[u as usize].push(id);
        self.adj[v as usize].push(id);
        self.m_alive += 1;
        Ok(id)
    }

    /// Pads the edge-id space so the next added edge gets id `bound`.
    /// Re-inserts a removed edge id between `u` and `v`.
    pub fn revive_edge(&mut self, e: EdgeId, u: VertexId, v: VertexId) -> Result<()> {
        ensure!((e as usize) < self.ends.len() && !self.has_edge(e), Malformed, "edge {e} is not a removed edge");
        ensure!(self.has_vertex(u) && self.has_vertex(v) && u != v, Malformed, "bad ends for edge {e}");
        self.ends[e as usize] = (u, v);
        self.edge_alive[e as usize] = true;
        for w in [u, v] {
            let list = &mut self.adj[w as usize];
            let pos = list.partition_point(|&x| x < e);
            list.insert(pos, e);
        }
        self.m_alive += 1;
        Ok(())
    }

    pub fn remove_edge(&mut self, e: EdgeId) {
        if !self.has_edge(e) {
            return;
        }
        let (u, v) = self.ends[e as usize];
        self.edge_alive[e as usize] = false;
        self.adj[u as usize].retain(|&x| x != e);
        self.adj[v as usize].retain(|&x| x != e);
        self.m_alive -= 1;
    }

    pub fn remove_vertex(&mut self, v: VertexId) {
        if !self.has_vertex(v) {
            return;
        }
        for e in self.adj[v as usize].clone() {
            self.remove_edge(e);
        }
        self.vertex_alive[v as usize] = false;
        self.n_alive -= 1;
    }

    pub fn vertex_count(&self) -> usize {
        self.n_alive
    }

    pub fn edge_count(&self) -> usize {
        self.m_alive
    }

    /// One past the largest vertex id ever allocated.
    pub fn vertex_bound(&self) -> usize {
        self.vertex_alive.len()
    }

    pub fn edge_bound(&self) -> usize {
        self.ends.len()
    }

    pub fn has_vertex(&self, v: VertexId) -> bool {
        self.vertex_alive.get(v as usize).copied().unwrap_or(false)
    }

    pub fn has_edge(&self, e: EdgeId) -> bool {
        self.edge_alive.get(e as usize).copied().unwrap_or(false)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertex_alive.len())
            .filter(|&v| self.vertex_alive[v])
            .map(|v| v as VertexId)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.ends.len())
            .filter(|&e| self.edge_alive[e])
            .map(|e| e as EdgeId)
    }

    pub fn ends(&self, e: EdgeId) -> (VertexId, VertexId) {
        self.ends[e as usize]
    }

    /// Endpoint of `e` opposite to `v`.
    pub fn other(&self, e: EdgeId, v: VertexId) -> VertexId {
        let (a, b) = self.ends[e as usize];
        if a == v {
            b
        } else {
            a
        }
    }

    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adj[v as usize].len()
    }

    pub fn max_degree(&self) -> usize {
        self.vertices().map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn vertex_mask(&self, s: &VertexSet) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.vertex_bound()];
        for &v in s {
            ensure!(self.has_vertex(v), Malformed, "unknown vertex {v}");
            mask[v as usize] = true;
        }
        Ok(mask)
    }

    /// Edges with exactly one endpoint in `s`, in id order.
    pub fn out_edges(&self, s: &VertexSet) -> Result<Vec<EdgeId>> {
        let mask = self.vertex_mask(s)?;
        Ok(self.out_edges_mask(&mask))
    }

    pub fn out_edges_mask(&self, mask: &[bool]) -> Vec<EdgeId> {
        self.edges()
            .filter(|&e| {
                let (u, v) = self.ends(e);
                mask[u as usize] != mask[v as usize]
            })
            .collect()
    }

    /// Edges with both endpoints in `s`.
    pub fn internal_edges(&self, s: &VertexSet) -> Result<Vec<EdgeId>> {
        let mask = self.vertex_mask(s)?;
        Ok(self.internal_edges_mask(&mask))
    }

    pub fn internal_edges_mask(&self, mask: &[bool]) -> Vec<EdgeId> {
        self.edges()
            .filter(|&e| {
                let (u, v) = self.ends(e);
                mask[u as usize] && mask[v as usize]
            })
            .collect()
    }

    /// Subgraph induced by `s`, keeping ids.
    pub fn induced(&self, s: &VertexSet) -> Result<MultiGraph> {
        let mask = self.vertex_mask(s)?;
        let mut h = self.clone();
        for v in self.vertices() {
            if !mask[v as usize] {
                h.remove_vertex(v);
            }
        }
        Ok(h)
    }

    /// Replaces `c` by one fresh super-node; see [`MultiGraph::contract_clusters`].
    pub fn contract_cluster(&self, c: &VertexSet) -> Result<(MultiGraph, Contraction)> {
        self.contract_clusters(std::slice::from_ref(c))
    }

    /// Contracts each (pairwise disjoint, nonempty) cluster into a fresh
    /// super-node. Internal edges disappear; every other edge keeps its id.
    pub fn contract_clusters(&self, clusters: &[VertexSet]) -> Result<(MultiGraph, Contraction)> {
        let mut node_of: Vec<VertexId> = (0..self.vertex_bound() as VertexId).collect();
        let mut seen = vec![false; self.vertex_bound()];
        let mut h = self.clone();
        let mut members = BTreeMap::new();
        for c in clusters {
            ensure!(!c.is_empty(), Malformed, "empty cluster");
            let id = h.add_vertex();
            for &v in c {
                ensure!(self.has_vertex(v), Malformed, "unknown vertex {v}");
                ensure!(!seen[v as usize], Malformed, "clusters overlap at vertex {v}");
                seen[v as usize] = true;
                node_of[v as usize] = id;
            }
            members.insert(id, c.clone());
        }
        node_of.resize(h.vertex_bound(), 0);
        for &s in members.keys() {
            node_of[s as usize] = s;
        }
        for e in self.edges() {
            let (u, v) = self.ends(e);
            let (a, b) = (node_of[u as usize], node_of[v as usize]);
            if (a, b) == (u, v) {
                continue;
            }
            h.remove_edge(e);
            if a != b {
                h.ends[e as usize] = (a, b);
                h.edge_alive[e as usize] = true;
                h.adj[a as usize].push(e);
                h.adj[b as usize].push(e);
                h.m_alive += 1;
            }
        }
        for c in clusters {
            for &v in c {
                h.remove_vertex(v);
            }
        }
        for list in h.adj.iter_mut() {
            list.sort_unstable();
        }
        Ok((h, Contraction { members, node_of }))
    }

    /// Vertex sets of connected components, ordered by smallest member.
    pub fn components(&self) -> Vec<VertexSet> {
        let mut comp = vec![u32::MAX; self.vertex_bound()];
        let mut out = Vec::new();
        for s in self.vertices() {
            if comp[s as usize] != u32::MAX {
                continue;
            }
            let id = out.len() as u32;
            let mut set = VertexSet::new();
            let mut queue = VecDeque::from([s]);
            comp[s as usize] = id;
            while let Some(v) = queue.pop_front() {
                set.insert(v);
                for &e in self.incident(v) {
                    let w = self.other(e, v);
                    if comp[w as usize] == u32::MAX {
                        comp[w as usize] = id;
                        queue.push_back(w);
                    }
                }
            }
            out.push(set);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Shortest path by BFS restricted to vertices with `allowed[v]`,
    /// exploring incident edges in id order. `None` if unreachable or longer
    /// than `max_len` edges.
    pub fn bfs_path(
        &self,
        s: VertexId,
        t: VertexId,
        allowed: Option<&[bool]>,
        max_len: Option<usize>,
    ) -> Option<Path> {
        let ok = |v: VertexId| allowed.is_none_or(|a| a[v as usize]);
        if !ok(s) || !ok(t) {
            return None;
        }
        let mut pred: Vec<Option<EdgeId>> = vec![None; self.vertex_bound()];
        let mut dist = vec![usize::MAX; self.vertex_bound()];
        dist[s as usize] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            if v == t {
                break;
            }
            if max_len.is_some_and(|l| dist[v as usize] >= l) {
                continue;
            }
            for &e in self.incident(v) {
                let w = self.other(e, v);
                if dist[w as usize] == usize::MAX && ok(w) {
                    dist[w as usize] = dist[v as usize] + 1;
                    pred[w as usize] = Some(e);
                    queue.push_back(w);
                }
            }
        }
        if dist[t as usize] == usize::MAX {
            return None;
        }
        let mut verts = vec![t];
        let mut edges = Vec::new();
        let mut v = t;
        while v != s {
            let e = pred[v as usize].expect("bfs predecessor");
            edges.push(e);
            v = self.other(e, v);
            verts.push(v);
        }
        verts.reverse();
        edges.reverse();
        Some(Path { verts, edges })
    }

    /// Text form: `p <n> <m>` followed by `e <u> <v>` lines. Only valid for
    /// graphs without holes in the vertex or edge id space.
    pub fn to_text(&self) -> String {
        let mut s = format!("p {} {}\n", self.vertex_bound(), self.edge_count());
        for e in self.edges() {
            let (u, v) = self.ends(e);
            s.push_str(&format!("e {u} {v}\n"));
        }
        s
    }
}

/// Record of a cluster contraction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contraction {
    /// Super-node id to the vertices it replaced.
    pub members: BTreeMap<VertexId, VertexSet>,
    /// Vertex of the contracted graph that each original vertex lives in.
    pub node_of: Vec<VertexId>,
}

impl Contraction {
    pub fn expand(&self, v: VertexId) -> VertexSet {
        self.members
            .get(&v)
            .cloned()
            .unwrap_or_else(|| VertexSet::from([v]))
    }
}

/// Walk given as alternating vertices and edges; `verts.len() == edges.len() + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub verts: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
}

impl Path {
    pub fn trivial(v: VertexId) -> Self {
        Path { verts: vec![v], edges: Vec::new() }
    }

    pub fn first(&self) -> VertexId {
        self.verts[0]
    }

    pub fn last(&self) -> VertexId {
        *self.verts.last().expect("nonempty path")
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn reversed(&self) -> Path {
        let mut p = self.clone();
        p.verts.reverse();
        p.edges.reverse();
        p
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn concat(&mut self, other: &Path) {
        assert_eq!(self.last(), other.first(), "paths do not meet");
        self.verts.extend_from_slice(&other.verts[1..]);
        self.edges.extend_from_slice(&other.edges);
    }

    pub fn validate(&self, g: &MultiGraph) -> Result<()> {
        ensure!(
            self.verts.len() == self.edges.len() + 1,
            Malformed,
            "path has {} vertices and {} edges",
            self.verts.len(),
            self.edges.len()
        );
        ensure!(g.has_vertex(self.verts[0]), Malformed, "unknown vertex {}", self.verts[0]);
        for (i, &e) in self.edges.iter().enumerate() {
            ensure!(g.has_edge(e), Malformed, "unknown edge {e}");
            let (a, b) = (self.verts[i], self.verts[i + 1]);
            let (u, v) = g.ends(e);
            ensure!(
                (u, v) == (a, b) || (v, u) == (a, b),
                Malformed,
                "edge {e} does not join {a} and {b}"
            );
        }
        Ok(())
    }

    /// Removes cycles: whenever a vertex repeats, the loop between its two
    /// occurrences is cut out. The result is a simple path with the same ends.
    pub fn shortcut(&self) -> Path {
        let mut pos: BTreeMap<VertexId, usize> = BTreeMap::new();
        let mut verts: Vec<VertexId> = Vec::new();
        let mut edges: Vec<EdgeId> = Vec::new();
        for (i, &v) in self.verts.iter().enumerate() {
            if let Some(&j) = pos.get(&v) {
                for w in verts.drain(j + 1..) {
                    pos.remove(&w);
                }
                edges.truncate(j);
            } else {
                if i > 0 {
                    edges.push(self.edges[i - 1]);
                }
                pos.insert(v, verts.len());
                verts.push(v);
            }
        }
        Path { verts, edges }
    }

    pub fn is_simple(&self) -> bool {
        let set: BTreeSet<_> = self.verts.iter().collect();
        set.len() == self.verts.len()
    }
}

/// Per-edge number of paths using it (with multiplicity inside a walk).
pub fn edge_loads<'a>(paths: impl IntoIterator<Item = &'a Path>) -> BTreeMap<EdgeId, u32> {
    let mut load = BTreeMap::new();
    for p in paths {
        for &e in &p.edges {
            *load.entry(e).or_insert(0) += 1;
        }
    }
    load
}

/// Maximum edge load after validating every path in `g`.
pub fn congestion(g: &MultiGraph, paths: &[Path]) -> Result<u32> {
    for p in paths {
        p.validate(g)?;
    }
    Ok(edge_loads(paths).values().copied().max().unwrap_or(0))
}

/// Load value to number of edges carrying it.
pub fn load_histogram(load: &BTreeMap<EdgeId, u32>) -> BTreeMap<u32, usize> {
    let mut h = BTreeMap::new();
    for &l in load.values() {
        *h.entry(l).or_insert(0) += 1;
    }
    h
}

/// Parsed text input: optional graph plus demand pairs.
#[derive(Clone, Debug, Default)]
pub struct TextInput {
    pub graph: Option<MultiGraph>,
    pub demands: Vec<(VertexId, VertexId)>,
}

/// Parses `p`/`e`/`d` lines. Lines starting with `c` or `#` are comments.
pub fn parse_text(text: &str) -> Result<TextInput> {
    let mut out = TextInput::default();
    let mut declared_m = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('c') {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap_or_default();
        let nums: Vec<u64> = it
            .map(|t| t.parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| EdpError::Malformed(format!("line {}: bad number in {line:?}", lineno + 1)))?;
        let bad = || EdpError::Malformed(format!("line {}: expected two fields in {line:?}", lineno + 1));
        let [a, b] = <[u64; 2]>::try_from(nums).map_err(|_| bad())?;
        match tag {
            "p" => {
                ensure!(out.graph.is_none(), Malformed, "line {}: second header", lineno + 1);
                ensure!(a <= u32::MAX as u64, Malformed, "too many vertices");
                out.graph = Some(MultiGraph::new(a as usize));
                declared_m = Some(b as usize);
            }
            "e" => {
                let g = out.graph.as_mut().ok_or_else(|| {
                    EdpError::Malformed(format!("line {}: edge before header", lineno + 1))
                })?;
                let (u, v) = (vid(a)?, vid(b)?);
                g.add_edge(u, v)
                    .map_err(|e| EdpError::Malformed(format!("line {}: {e}", lineno + 1)))?;
            }
            "d" => out.demands.push((vid(a)?, vid(b)?)),
            _ => return Err(EdpError::Malformed(format!("line {}: unknown tag {tag:?}", lineno + 1))),
        }
    }
    if let (Some(g), Some(m)) = (&out.graph, declared_m) {
        ensure!(
            g.edge_count() == m,
            Malformed,
            "header declares {m} edges but {} were given",
            g.edge_count()
        );
    }
    Ok(out)
}

fn vid(x: u64) -> Result<VertexId> {
    VertexId::try_from(x).map_err(|_| EdpError::Malformed(format!("vertex id {x} out of range")))
}

pub fn demands_to_text(pairs: &[(VertexId, VertexId)]) -> String {
    pairs.iter().map(|(s, t)| format!("d {s} {t}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(v: &[u32]) -> VertexSet {
        v.iter().copied().collect()
    }

    #[test]
    fn out_edges_examples() {
        let g = MultiGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(g.out_edges(&set(&[0])).unwrap(), vec![0, 2]);
        assert!(g.out_edges(&set(&[0, 1, 2])).unwrap().is_empty());
        let p = MultiGraph::from_edges(2, &[(0, 1), (0, 1)]).unwrap();
        assert_eq!(p.out_edges(&set(&[0])).unwrap(), vec![0, 1]);
        assert!(g.out_edges(&set(&[7])).is_err());
    }

    #[test]
    fn contract_examples() {
        let tri = MultiGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let (h, map) = tri.contract_cluster(&set(&[0, 1])).unwrap();
        assert_eq!(h.vertex_count(), 2);
        assert_eq!(h.edges().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(map.expand(3), set(&[0, 1]));

        let (h, _) = tri.contract_cluster(&set(&[2])).unwrap();
        assert_eq!(h.vertex_count(), 3);
        assert_eq!(h.edge_count(), 3);

        let c4 = MultiGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let (h, map) = c4.contract_cluster(&set(&[0, 2])).unwrap();
        let sup = *map.members.keys().next().unwrap();
        assert_eq!(h.vertex_count(), 3);
        assert_eq!(h.edge_count(), 4);
        assert_eq!(h.degree(sup), 4);
        assert_eq!(h.degree(1), 2);
        assert_eq!(h.degree(3), 2);
        assert!(h.edges().all(|e| { let (u, v) = h.ends(e); u != v }));

        assert!(tri.contract_cluster(&VertexSet::new()).is_err());
    }

    #[test]
    fn congestion_examples() {
        let g = MultiGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let a = Path { verts: vec![0, 1], edges: vec![0] };
        let b = Path { verts: vec![2, 3], edges: vec![2] };
        let c = Path { verts: vec![0, 1, 2], edges: vec![0, 1] };
        assert_eq!(congestion(&g, &[a.clone(), b]).unwrap(), 1);
        assert_eq!(congestion(&g, &[a.clone(), c]).unwrap(), 2);
        assert_eq!(congestion(&g, &[]).unwrap(), 0);
        let bad = Path { verts: vec![0, 2], edges: vec![0] };
        assert!(congestion(&g, &[bad]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let g = MultiGraph::from_edges(3, &[(0, 1), (0, 1), (1, 2)]).unwrap();
        let text = format!("c comment\n{}{}", g.to_text(), demands_to_text(&[(0, 2)]));
        let parsed = parse_text(&text).unwrap();
        assert_eq!(parsed.graph.unwrap(), g);
        assert_eq!(parsed.demands, vec![(0, 2)]);
        assert!(parse_text("p 2 1\ne 0 0\n").is_err());
        assert!(parse_text("p 2 2\ne 0 1\n").is_err());
        assert!(parse_text("e 0 1\n").is_err());
        assert!(parse_text("p 2 1\ne 0 x\n").is_err());
    }

    #[test]
    fn shortcut_removes_loops() {
        let p = Path { verts: vec![0, 1, 2, 1, 3], edges: vec![10, 11, 12, 13] };
        let s = p.shortcut();
        assert_eq!(s.verts, vec![0, 1, 3]);
        assert_eq!(s.edges, vec![10, 13]);
        let q = Path { verts: vec![0, 1, 0], edges: vec![1, 1] };
        assert_eq!(q.shortcut(), Path::trivial(0));
    }

    fn arb_graph() -> impl Strategy<Value = (MultiGraph, VertexSet)> {
        (2usize..9).prop_flat_map(|n| {
            let edge = (0..n as u32, 0..n as u32).prop_filter("loop", |(u, v)| u != v);
            (
                proptest::collection::vec(edge, 0..20),
                proptest::collection::btree_set(0..n as u32, 1..=n),
            )
                .prop_map(move |(es, s)| (MultiGraph::from_edges(n, &es).unwrap(), s))
        })
    }

    proptest! {
        #[test]
        fn handshake_on_subsets((g, s) in arb_graph()) {
            let out = g.out_edges(&s).unwrap().len();
            let inner = g.internal_edges(&s).unwrap().len();
            let deg: usize = s.iter().map(|&v| g.degree(v)).sum();
            prop_assert_eq!(out + 2 * inner, deg);
        }

        #[test]
        fn contraction_boundary_is_identity((g, s) in arb_graph()) {
            let (h, map) = g.contract_cluster(&s).unwrap();
            let sup = *map.members.keys().next().unwrap();
            let boundary: Vec<_> = h.incident(sup).to_vec();
            prop_assert_eq!(boundary, g.out_edges(&s).unwrap());
            prop_assert_eq!(h.edge_count(), g.edge_count() - g.internal_edges(&s).unwrap().len());
            for e in h.edges() {
                let (u, v) = h.ends(e);
                prop_assert!(u != v);
            }
        }

        #[test]
        fn congestion_subadditive((g, _s) in arb_graph(), picks in proptest::collection::vec((0u32..9, 0u32..9), 0..8)) {
            let paths: Vec<Path> = picks
                .iter()
                .filter_map(|&(a, b)| {
                    if g.has_vertex(a) && g.has_vertex(b) { g.bfs_path(a, b, None, None) } else { None }
                })
                .collect();
            let mid = paths.len() / 2;
            let (x, y) = paths.split_at(mid);
            let all = congestion(&g, &paths).unwrap();
            prop_assert!(all <= congestion(&g, x).unwrap() + congestion(&g, y).unwrap());
        }

        #[test]
        fn shortcut_is_simple_and_valid((g, _s) in arb_graph(), walk in proptest::collection::vec(0usize..64, 1..30)) {
            let start = g.vertices().next().unwrap();
            let mut p = Path::trivial(start);
            for w in walk {
                let v = p.last();
                let inc = g.incident(v);
                if inc.is_empty() { break; }
                let e = inc[w % inc.len()];
                p.edges.push(e);
                p.verts.push(g.other(e, v));
            }
            let s = p.shortcut();
            s.validate(&g).unwrap();
            prop_assert!(s.is_simple());
            prop_assert_eq!(s.first(), p.first());
            prop_assert_eq!(s.last(), p.last());
            prop_assert!(s.edges.iter().all(|e| p.edges.contains(e)));
        }
    }
}
