//! Integral max-flow with path decomposition and cut certificates.

use std::collections::VecDeque;

use crate::error::{ensure, EdpError, Result};
use crate::graph::{EdgeId, MultiGraph, Path, VertexId, VertexSet};

const INF: i64 = i64::MAX / 4;

/// Dinic's algorithm on an explicit arc list; arcs come in pairs `a`, `a ^ 1`.
#[derive(Clone, Debug)]
pub struct Dinic {
    to: Vec<u32>,
    cap: Vec<i64>,
    adj: Vec<Vec<u32>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl Dinic {
    pub fn new(n: usize) -> Self {
        Dinic { to: Vec::new(), cap: Vec::new(), adj: vec![Vec::new(); n], level: vec![], iter: vec![] }
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Directed arc `u -> v`; returns its id.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: i64) -> usize {
        self.add_pair(u, v, cap, 0)
    }

    /// Undirected edge with capacity `cap` each way; returns the `u -> v` arc id.
    pub fn add_undirected(&mut self, u: usize, v: usize, cap: i64) -> usize {
        self.add_pair(u, v, cap, cap)
    }

    fn add_pair(&mut self, u: usize, v: usize, fwd: i64, bwd: i64) -> usize {
        let id = self.to.len();
        self.to.push(v as u32);
        self.cap.push(fwd);
        self.adj[u].push(id as u32);
        self.to.push(u as u32);
        self.cap.push(bwd);
        self.adj[v].push(id as u32 + 1);
        id
    }

    pub fn residual(&self, arc: usize) -> i64 {
        self.cap[arc]
    }

    pub fn head(&self, arc: usize) -> usize {
        self.to[arc] as usize
    }

    pub fn arcs_from(&self, u: usize) -> &[u32] {
        &self.adj[u]
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.clear();
        self.level.resize(self.adj.len(), -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a as usize] as usize;
                if self.cap[a as usize] > 0 && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, f: i64) -> i64 {
        if u == t {
            return f;
        }
        while self.iter[u] < self.adj[u].len() {
            let a = self.adj[u][self.iter[u]] as usize;
            let v = self.to[a] as usize;
            if self.cap[a] > 0 && self.level[v] == self.level[u] + 1 {
                let d = self.dfs(v, t, f.min(self.cap[a]));
                if d > 0 {
                    self.cap[a] -= d;
                    self.cap[a ^ 1] += d;
                    return d;
                }
            }
            self.iter[u] += 1;
        }
        0
    }

    /// Augments from `s` to `t` until no path remains or `limit` is reached.
    pub fn max_flow(&mut self, s: usize, t: usize, limit: i64) -> i64 {
        let mut flow = 0;
        while flow < limit && self.bfs(s, t) {
            self.iter.clear();
            self.iter.resize(self.adj.len(), 0);
            loop {
                let f = self.dfs(s, t, limit - flow);
                if f == 0 {
                    break;
                }
                flow += f;
                if flow >= limit {
                    break;
                }
            }
        }
        flow
    }

    /// Nodes reachable from `s` in the residual network.
    pub fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a as usize] as usize;
                if self.cap[a as usize] > 0 && !seen[v] {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    }
}

/// Where flow may enter or leave.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Vertex(VertexId),
    /// The edge itself, subdivided; flow may continue to either endpoint.
    Edge(EdgeId),
    /// Only the half of the edge at `inner` exists in the flow network.
    HalfEdge { edge: EdgeId, inner: VertexId },
}

/// Single-commodity integral flow problem with uniform edge budget.
#[derive(Clone, Debug)]
pub struct FlowProblem<'a> {
    pub graph: &'a MultiGraph,
    /// Usable edges by id; `None` means all. Endpoint edges are always usable.
    pub edge_allowed: Option<&'a [bool]>,
    /// Usable vertices by id; `None` means all.
    pub vertex_allowed: Option<&'a [bool]>,
    pub budget: u32,
    /// Endpoints with the number of paths each may start.
    pub sources: Vec<(Endpoint, u32)>,
    pub sinks: Vec<(Endpoint, u32)>,
}

impl<'a> FlowProblem<'a> {
    pub fn new(graph: &'a MultiGraph, budget: u32) -> Self {
        FlowProblem { graph, edge_allowed: None, vertex_allowed: None, budget, sources: vec![], sinks: vec![] }
    }
}

/// One path of a decomposition with the indices of its endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowPath {
    pub source: usize,
    pub sink: usize,
    pub path: Path,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlowResult {
    /// `value == paths.len()` integral paths.
    Paths { value: u64, paths: Vec<FlowPath> },
    /// Max flow fell short; `side` is the source side of a minimum cut whose
    /// capacity is `value`.
    Cut { value: u64, side: VertexSet },
}

impl FlowResult {
    pub fn value(&self) -> u64 {
        match self {
            FlowResult::Paths { value, .. } | FlowResult::Cut { value, .. } => *value,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Tag {
    None,
    /// Plain undirected edge: arc `u -> v` in the `ends` orientation.
    Edge(EdgeId),
    /// Gadget arc between a graph vertex and the edge node.
    Half(EdgeId),
}

struct Built {
    net: Dinic,
    tags: Vec<Tag>,
    /// Gadget nodes per edge endpoint: (in-node, out-node).
    gadget_of: Vec<Option<(usize, usize)>>,
    gadget_edge: Vec<Option<EdgeId>>,
    src_arcs: Vec<usize>,
    sink_arcs: Vec<usize>,
    s: usize,
    t: usize,
    nv: usize,
}

fn build(p: &FlowProblem) -> Result<Built> {
    let g = p.graph;
    let nv = g.vertex_bound();
    let vok = |v: VertexId| g.has_vertex(v) && p.vertex_allowed.is_none_or(|m| m[v as usize]);
    let mut net = Dinic::new(nv);
    let mut tags = Vec::new();
    let mut gadget_of: Vec<Option<(usize, usize)>> = vec![None; g.edge_bound()];
    let mut gadget_edge: Vec<Option<EdgeId>> = vec![None; nv];
    let mut half_only: Vec<Option<VertexId>> = vec![None; g.edge_bound()];
    let eta = p.budget as i64;
    ensure!(eta > 0, Precondition, "flow budget must be positive");

    for &(ep, _) in p.sources.iter().chain(&p.sinks) {
        match ep {
            Endpoint::Vertex(v) => ensure!(g.has_vertex(v), Malformed, "unknown vertex {v}"),
            Endpoint::Edge(e) | Endpoint::HalfEdge { edge: e, .. } => {
                ensure!(g.has_edge(e), Malformed, "unknown edge {e}");
                if let Endpoint::HalfEdge { inner, .. } = ep {
                    let (a, b) = g.ends(e);
                    ensure!(inner == a || inner == b, Malformed, "{inner} is not an end of edge {e}");
                    match half_only[e as usize] {
                        Some(x) if x != inner => {
                            return Err(EdpError::Malformed(format!("edge {e} used with both halves")))
                        }
                        _ => half_only[e as usize] = Some(inner),
                    }
                }
                if gadget_of[e as usize].is_none() {
                    let a = net.add_node();
                    let b = net.add_node();
                    gadget_of[e as usize] = Some((a, b));
                    gadget_edge.resize(net.node_count(), None);
                    gadget_edge[a] = Some(e);
                    gadget_edge[b] = Some(e);
                    net.add_arc(a, b, eta);
                    tags.push(Tag::None);
                    tags.push(Tag::None);
                }
            }
        }
    }
    for e in g.edges() {
        let (u, v) = g.ends(e);
        if let Some((a, b)) = gadget_of[e as usize] {
            for w in [u, v] {
                if half_only[e as usize].is_some_and(|x| x != w) || !vok(w) {
                    continue;
                }
                net.add_arc(w as usize, a, eta);
                tags.push(Tag::Half(e));
                tags.push(Tag::None);
                net.add_arc(b, w as usize, eta);
                tags.push(Tag::Half(e));
                tags.push(Tag::None);
            }
            continue;
        }
        if p.edge_allowed.is_some_and(|m| !m[e as usize]) || !vok(u) || !vok(v) {
            continue;
        }
        net.add_undirected(u as usize, v as usize, eta);
        tags.push(Tag::Edge(e));
        tags.push(Tag::Edge(e));
    }
    let s = net.add_node();
    let t = net.add_node();
    let mut src_arcs = Vec::new();
    for &(ep, c) in &p.sources {
        let node = match ep {
            Endpoint::Vertex(v) => v as usize,
            Endpoint::Edge(e) | Endpoint::HalfEdge { edge: e, .. } => gadget_of[e as usize].unwrap().0,
        };
        src_arcs.push(net.add_arc(s, node, c as i64));
        tags.push(Tag::None);
        tags.push(Tag::None);
    }
    let mut sink_arcs = Vec::new();
    for &(ep, c) in &p.sinks {
        let node = match ep {
            Endpoint::Vertex(v) => v as usize,
            Endpoint::Edge(e) | Endpoint::HalfEdge { edge: e, .. } => gadget_of[e as usize].unwrap().1,
        };
        sink_arcs.push(net.add_arc(node, t, c as i64));
        tags.push(Tag::None);
        tags.push(Tag::None);
    }
    gadget_edge.resize(net.node_count(), None);
    Ok(Built { net, tags, gadget_of, gadget_edge, src_arcs, sink_arcs, s, t, nv })
}

/// Max-flow up to `demand`. Returns `demand` paths when achievable, else the
/// minimum cut reached by the residual network.
pub fn max_flow_integral(p: &FlowProblem, demand: u64) -> Result<FlowResult> {
    let mut b = build(p)?;
    let original: Vec<i64> = b.net.cap.clone();
    let value = b.net.max_flow(b.s, b.t, demand.min(INF as u64) as i64) as u64;
    if value < demand {
        let reach = b.net.reachable(b.s);
        let side = (0..b.nv).filter(|&v| reach[v] && p.graph.has_vertex(v as VertexId)).map(|v| v as VertexId).collect();
        return Ok(FlowResult::Cut { value, side });
    }
    let paths = decompose(p.graph, &b, &original)?;
    ensure!(paths.len() as u64 == value, Invariant, "decomposition lost flow");
    Ok(FlowResult::Paths { value, paths })
}

/// Flow value only, without decomposition.
pub fn max_flow_value(p: &FlowProblem, limit: u64) -> Result<u64> {
    let mut b = build(p)?;
    Ok(b.net.max_flow(b.s, b.t, limit.min(INF as u64) as i64) as u64)
}

fn decompose(g: &MultiGraph, b: &Built, original: &[i64]) -> Result<Vec<FlowPath>> {
    // Net flow per arc pair, oriented on the even arc.
    let narcs = b.net.cap.len();
    let mut flow = vec![0i64; narcs];
    for a in (0..narcs).step_by(2) {
        let used = original[a] - b.net.cap[a];
        if used > 0 {
            flow[a] = used;
        } else if used < 0 {
            flow[a + 1] = -used;
        }
    }
    let src_index = |arc: usize| b.src_arcs.iter().position(|&x| x == arc);
    let sink_index = |arc: usize| b.sink_arcs.iter().position(|&x| x == arc);
    let mut ptr = vec![0usize; b.net.node_count()];
    let mut out = Vec::new();
    loop {
        // Walk from s along positive-flow arcs, cancelling cycles as they close.
        let mut arcs: Vec<usize> = Vec::new();
        let mut pos = vec![usize::MAX; b.net.node_count()];
        let mut u = b.s;
        pos[u] = 0;
        let mut found = false;
        while u != b.t {
            let list = b.net.arcs_from(u);
            while ptr[u] < list.len() && flow[list[ptr[u]] as usize] == 0 {
                ptr[u] += 1;
            }
            if ptr[u] == list.len() {
                if u == b.s {
                    break;
                }
                return Err(EdpError::Invariant("flow conservation broken".into()));
            }
            let a = list[ptr[u]] as usize;
            let v = b.net.head(a);
            arcs.push(a);
            if pos[v] != usize::MAX {
                let start = pos[v];
                let cyc: Vec<usize> = arcs.drain(start..).collect();
                for &c in &cyc {
                    flow[c] -= 1;
                    pos[b.net.head(c)] = usize::MAX;
                }
                pos[v] = start;
                u = v;
                continue;
            }
            pos[v] = arcs.len();
            u = v;
            found = u == b.t;
        }
        if !found {
            break;
        }
        for &a in &arcs {
            flow[a] -= 1;
        }
        out.push(to_graph_path(g, b, &arcs, &src_index, &sink_index)?);
    }
    Ok(out)
}

fn to_graph_path(
    g: &MultiGraph,
    b: &Built,
    arcs: &[usize],
    src_index: &dyn Fn(usize) -> Option<usize>,
    sink_index: &dyn Fn(usize) -> Option<usize>,
) -> Result<FlowPath> {
    let source = src_index(arcs[0]).ok_or_else(|| EdpError::Invariant("path without source arc".into()))?;
    let sink = sink_index(*arcs.last().unwrap()).ok_or_else(|| EdpError::Invariant("path without sink arc".into()))?;
    let inner = &arcs[1..arcs.len() - 1];
    let first_node = b.net.head(arcs[0]);
    let mut verts: Vec<VertexId> = Vec::new();
    let mut edges: Vec<EdgeId> = Vec::new();
    if first_node < b.nv {
        verts.push(first_node as VertexId);
    }
    let mut i = 0;
    let mut pending_source_edge: Option<EdgeId> = b.gadget_edge[first_node].filter(|_| first_node >= b.nv);
    while i < inner.len() {
        let a = inner[i];
        match b.tags[a] {
            Tag::Edge(e) => {
                let v = b.net.head(a) as VertexId;
                edges.push(e);
                verts.push(v);
            }
            Tag::Half(e) => {
                let head = b.net.head(a);
                if head < b.nv {
                    // Leaving an edge gadget towards a vertex.
                    let w = head as VertexId;
                    if let Some(se) = pending_source_edge.take() {
                        verts.push(g.other(se, w));
                    }
                    edges.push(e);
                    verts.push(w);
                }
            }
            Tag::None => {}
        }
        i += 1;
    }
    let last_node = b.net.head(inner.last().copied().unwrap_or(arcs[0]));
    let last_node = if inner.is_empty() { first_node } else { last_node };
    if last_node >= b.nv {
        let e = b.gadget_edge[last_node].unwrap();
        if let Some(se) = pending_source_edge.take() {
            // Entered and left through the same edge node.
            let (u, v) = g.ends(se);
            verts = vec![u, v];
            edges = vec![se];
        } else {
            let w = *verts.last().unwrap();
            edges.push(e);
            verts.push(g.other(e, w));
        }
    }
    let _ = &b.gadget_of;
    Ok(FlowPath { source, sink, path: Path { verts, edges } })
}

/// Edge-disjoint s-t max-flow value (λ) with unit budget.
pub fn local_edge_connectivity(g: &MultiGraph, s: VertexId, t: VertexId) -> u64 {
    let mut p = FlowProblem::new(g, 1);
    p.sources.push((Endpoint::Vertex(s), u32::MAX));
    p.sinks.push((Endpoint::Vertex(t), u32::MAX));
    max_flow_value(&p, u64::MAX).expect("valid problem")
}
