//! Tree family spanning the representative interface edges of all good sets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, EdpError, Result};
use crate::expander::{route_within, InterfaceGrouping, Link};
use crate::family::GoodFamily;
use crate::graph::{EdgeId, MultiGraph, Path, VertexId};
use crate::grouping::prune_to_tree;
use crate::splitting::{split_off_eulerian, Digraph, SplitConfig, SplitResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ArcKind {
    /// Arc along an unsubdivided copy of a G edge.
    Copy(EdgeId),
    /// Arc between an endpoint of a G edge and its subdivision vertex.
    Half(EdgeId),
    /// Arc between a subdivision vertex and its hub s_j.
    Hub(usize, EdgeId),
}

/// G⁺: G with doubled edges, one copy of each representative edge of Γ′_j
/// subdivided and joined to a hub s_j, every edge bi-directed.
pub struct GPlus {
    pub digraph: Digraph,
    kinds: Vec<ArcKind>,
    g_bound: u32,
    pub hubs: Vec<u32>,
}

pub fn build_gplus(g: &MultiGraph, ig: &InterfaceGrouping) -> Result<GPlus> {
    let mut subdiv: BTreeMap<EdgeId, Vec<usize>> = BTreeMap::new();
    for (j, sg) in ig.sets.iter().enumerate() {
        for &e in &sg.reps {
            ensure!(g.has_edge(e), Precondition, "representative edge {e} not in G");
            subdiv.entry(e).or_default().push(j);
        }
    }
    let g_bound = g.vertex_bound() as u32;
    let mut n = g_bound;
    let mut arcs = vec![];
    let mut kinds = vec![];
    let both = |arcs: &mut Vec<(u32, u32)>, kinds: &mut Vec<ArcKind>, u: u32, v: u32, k: ArcKind| {
        arcs.push((u, v));
        arcs.push((v, u));
        kinds.push(k);
        kinds.push(k);
    };
    let mut hub_links = vec![];
    for e in g.edges() {
        let (u, v) = g.ends(e);
        let subs = subdiv.get(&e).map(Vec::as_slice).unwrap_or(&[]);
        ensure!(subs.len() <= 2, Invariant, "edge {e} represents more than two sets");
        for copy in 0..2 {
            if let Some(&j) = subs.get(copy) {
                let x = n;
                n += 1;
                both(&mut arcs, &mut kinds, u, x, ArcKind::Half(e));
                both(&mut arcs, &mut kinds, x, v, ArcKind::Half(e));
                hub_links.push((x, j, e));
            } else {
                both(&mut arcs, &mut kinds, u, v, ArcKind::Copy(e));
            }
        }
    }
    let hubs: Vec<u32> = (0..ig.sets.len() as u32).map(|j| n + j).collect();
    n += ig.sets.len() as u32;
    for (x, j, e) in hub_links {
        both(&mut arcs, &mut kinds, hubs[j], x, ArcKind::Hub(j, e));
    }
    let digraph = Digraph { n: n as usize, arcs };
    ensure!(digraph.is_eulerian(), Invariant, "G⁺ is not Eulerian");
    Ok(GPlus { digraph, kinds, g_bound, hubs })
}

/// A split arc read back as a G walk from a Γ′ edge of one set to a Γ′ edge
/// of another.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubPath {
    pub from_set: usize,
    pub to_set: usize,
    pub first_edge: EdgeId,
    pub last_edge: EdgeId,
    /// Starts at an endpoint of `first_edge`, ends at an endpoint of `last_edge`.
    pub path: Path,
}

impl HubPath {
    fn reversed(&self) -> HubPath {
        HubPath {
            from_set: self.to_set,
            to_set: self.from_set,
            first_edge: self.last_edge,
            last_edge: self.first_edge,
            path: self.path.reversed(),
        }
    }
}

fn read_back(g: &MultiGraph, gp: &GPlus, chain: &[u32]) -> Result<HubPath> {
    let bad = || EdpError::Invariant("realizing path is not hub to hub".into());
    ensure!(chain.len() >= 3, Invariant, "realizing path too short");
    let ArcKind::Hub(from_set, first_edge) = gp.kinds[chain[0] as usize] else { return Err(bad()) };
    let ArcKind::Hub(to_set, last_edge) = gp.kinds[*chain.last().unwrap() as usize] else { return Err(bad()) };
    let mut verts: Vec<VertexId> = vec![];
    let mut edges: Vec<EdgeId> = vec![];
    let mut pending: Option<(EdgeId, VertexId)> = None;
    for &a in &chain[1..chain.len() - 1] {
        let (t, h) = gp.digraph.arcs[a as usize];
        match gp.kinds[a as usize] {
            ArcKind::Copy(e) => {
                ensure!(verts.last() == Some(&t), Invariant, "realizing path jumps");
                edges.push(e);
                verts.push(h);
            }
            ArcKind::Half(e) if t < gp.g_bound => {
                ensure!(verts.last() == Some(&t), Invariant, "realizing path jumps");
                pending = Some((e, t));
            }
            ArcKind::Half(e) => match pending.take() {
                Some((pe, x)) => {
                    ensure!(pe == e, Invariant, "subdivision vertex crossed between edges");
                    if h != x {
                        edges.push(e);
                        verts.push(h);
                    }
                }
                None => {
                    ensure!(verts.is_empty() && e == first_edge, Invariant, "realizing path jumps");
                    verts.push(g.other(e, h));
                    edges.push(e);
                    verts.push(h);
                }
            },
            ArcKind::Hub(..) => return Err(bad()),
        }
    }
    let Some((e, x)) = pending else { return Err(bad()) };
    ensure!(e == last_edge, Invariant, "realizing path ends off its hub edge");
    edges.push(e);
    verts.push(g.other(e, x));
    let path = Path { verts, edges }.shortcut();
    Ok(HubPath { from_set, to_set, first_edge, last_edge, path })
}

/// Capacitated graph Z on the hubs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZGraph {
    /// (j, j′, c) with j < j′ for every pair joined by at least the threshold.
    pub edges: Vec<(usize, usize, u64)>,
    pub threshold: u64,
    /// C(s_j) per hub.
    pub capacity: Vec<u64>,
}

pub fn build_z(gamma: usize, h: &[(usize, usize)], ell: u64, sigma: u64) -> ZGraph {
    let mut count: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for &(a, b) in h {
        if a != b {
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let threshold = ell.div_ceil(sigma);
    let edges: Vec<_> = count.into_iter().filter(|&(_, c)| c >= threshold).map(|((a, b), c)| (a, b, c)).collect();
    let mut capacity = vec![0; gamma];
    for &(a, b, c) in &edges {
        capacity[a] += c;
        capacity[b] += c;
    }
    ZGraph { edges, threshold, capacity }
}

/// (1 − 1/γ²)ℓ ≤ C(v) ≤ ℓ, in integers.
pub fn z_capacity_ok(z: &ZGraph, gamma: u64, ell: u64) -> bool {
    let g2 = gamma * gamma;
    z.capacity.iter().all(|&c| c <= ell && c * g2 >= (g2 - 1) * ell)
}

/// Spanning tree of maximum degree ≤ `max_deg` by backtracking over the
/// edges in order; `None` if none exists.
pub fn bounded_degree_spanning_tree(n: usize, edges: &[(usize, usize)], max_deg: usize) -> Option<Vec<usize>> {
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        r
    }
    fn go(n: usize, edges: &[(usize, usize)], max_deg: usize, i: usize, deg: &mut [usize], parent: &mut Vec<usize>, chosen: &mut Vec<usize>) -> bool {
        if chosen.len() + 1 == n {
            return true;
        }
        if i == edges.len() || edges.len() - i < n - 1 - chosen.len() {
            return false;
        }
        let (a, b) = edges[i];
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb && deg[a] < max_deg && deg[b] < max_deg {
            let saved = parent.clone();
            parent[ra] = rb;
            deg[a] += 1;
            deg[b] += 1;
            chosen.push(i);
            if go(n, edges, max_deg, i + 1, deg, parent, chosen) {
                return true;
            }
            chosen.pop();
            deg[a] -= 1;
            deg[b] -= 1;
            *parent = saved;
        }
        go(n, edges, max_deg, i + 1, deg, parent, chosen)
    }
    if n == 0 {
        return Some(vec![]);
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut deg = vec![0; n];
    let mut chosen = vec![];
    go(n, edges, max_deg, 0, &mut deg, &mut parent, &mut chosen).then_some(chosen)
}

/// Paths of one T* edge after dedup, directed child → parent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bundle {
    pub parent: usize,
    pub child: usize,
    /// |A(e)|.
    pub taken: usize,
    /// Paths left after removing repeated first and last edges.
    pub after_dedup: usize,
    pub paths: Vec<HubPath>,
}

impl Bundle {
    pub fn b1(&self) -> Vec<EdgeId> {
        self.paths.iter().map(|p| p.first_edge).collect()
    }

    pub fn b2(&self) -> Vec<EdgeId> {
        self.paths.iter().map(|p| p.last_edge).collect()
    }
}

/// Builds the bundle of one T* edge from the hub paths between its ends.
/// Paths whose special ends lie in `claimed` are skipped: the first edge
/// always, and the last edge too when `both_special`.
pub fn make_bundle(
    parent: usize,
    child: usize,
    between: &[HubPath],
    size: usize,
    k_prime: usize,
    claimed: &BTreeSet<EdgeId>,
    both_special: bool,
) -> Result<Bundle> {
    ensure!(between.len() >= size, Invariant, "only {} paths between hubs {child} and {parent}, need {size}", between.len());
    let oriented: Vec<HubPath> =
        between[..size].iter().map(|p| if p.from_set == child { p.clone() } else { p.reversed() }).collect();
    let mut alive = vec![true; oriented.len()];
    for side in 0..2 {
        let key = |p: &HubPath| if side == 0 { p.first_edge } else { p.last_edge };
        let mut total: BTreeMap<EdgeId, usize> = BTreeMap::new();
        for p in &oriented {
            *total.entry(key(p)).or_default() += 1;
        }
        if let Some((e, c)) = total.iter().find(|(_, &c)| c > 2) {
            return Err(EdpError::Invariant(format!("edge {e} ends {c} paths of bundle {child}→{parent}")));
        }
        let mut seen = BTreeSet::new();
        for (i, p) in oriented.iter().enumerate() {
            if alive[i] && !seen.insert(key(p)) {
                alive[i] = false;
            }
        }
    }
    let kept: Vec<HubPath> = oriented.iter().zip(&alive).filter(|(_, &a)| a).map(|(p, _)| p.clone()).collect();
    let after_dedup = kept.len();
    ensure!(after_dedup >= k_prime, Invariant, "bundle {child}→{parent} keeps {after_dedup} paths, need k′ = {k_prime}");
    let free = |p: &HubPath| {
        !claimed.contains(&p.first_edge) && (!both_special || (!claimed.contains(&p.last_edge) && p.first_edge != p.last_edge))
    };
    let paths: Vec<HubPath> = kept.into_iter().filter(free).take(k_prime).collect();
    ensure!(paths.len() == k_prime, Invariant, "bundle {child}→{parent} has {} paths with unclaimed special edges, need k′ = {k_prime}", paths.len());
    Ok(Bundle { parent, child, taken: size, after_dedup, paths })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeFamily {
    pub trees: Vec<Vec<EdgeId>>,
    /// `special[i][j]` is e_{i,j}.
    pub special: Vec<Vec<EdgeId>>,
    /// `gamma_star[j][i]` is e_{i,j}.
    pub gamma_star: Vec<Vec<EdgeId>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub ell: u64,
    pub sigma: u64,
    pub k_prime: u64,
    pub split: SplitConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub parent: usize,
    pub child: usize,
    pub taken: usize,
    pub after_dedup: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeReport {
    pub gplus_vertices: usize,
    pub gplus_arcs: usize,
    pub lambda: BTreeMap<String, u64>,
    pub splits: usize,
    pub rejected_companions: usize,
    pub pair_checks: usize,
    pub ell: u64,
    pub z: ZGraph,
    /// T* as (parent, child) pairs.
    pub t_star: Vec<(usize, usize)>,
    pub root: usize,
    pub bundles: Vec<BundleSummary>,
    pub max_tree_load: u32,
}

#[derive(Default)]
struct Partial {
    edges: BTreeSet<EdgeId>,
    special: BTreeMap<usize, EdgeId>,
}

/// Builds the trees bottom-up along a degree-≤3 spanning tree of Z.
pub fn build_trees(g: &MultiGraph, fam: &GoodFamily, ig: &InterfaceGrouping, cfg: &TreeConfig) -> Result<(TreeFamily, TreeReport)> {
    let gamma = fam.sets.len();
    ensure!(gamma >= 2, Precondition, "tree construction needs at least two good sets");
    ensure!(cfg.k_prime >= 1 && cfg.sigma >= 1, Precondition, "k′ and σ must be positive");
    let gp = build_gplus(g, ig)?;
    let split: SplitResult = split_off_eulerian(&gp.digraph, &gp.hubs, &cfg.split)?;
    let set_of = |v: u32| gp.hubs.iter().position(|&h| h == v).expect("hub vertex");
    let hub_paths: Vec<HubPath> = split.arcs.iter().map(|a| read_back(g, &gp, &a.path)).collect::<Result<_>>()?;
    for (a, hp) in split.arcs.iter().zip(&hub_paths) {
        ensure!(set_of(a.tail) == hp.from_set && set_of(a.head) == hp.to_set, Invariant, "hub path ends disagree");
    }
    let pairs: Vec<(usize, usize)> = hub_paths.iter().map(|p| (p.from_set, p.to_set)).collect();
    let z = build_z(gamma, &pairs, cfg.ell, cfg.sigma);
    ensure!(
        z_capacity_ok(&z, gamma as u64, cfg.ell),
        Invariant,
        "C(v) = {:?} outside [(1 − 1/γ²)ℓ, ℓ] with ℓ = {}",
        z.capacity,
        cfg.ell
    );
    let zpairs: Vec<(usize, usize)> = z.edges.iter().map(|&(a, b, _)| (a, b)).collect();
    let chosen = bounded_degree_spanning_tree(gamma, &zpairs, 3)
        .ok_or_else(|| EdpError::Invariant("Z has no spanning tree of maximum degree 3".into()))?;
    let mut adj: Vec<Vec<usize>> = vec![vec![]; gamma];
    for &i in &chosen {
        let (a, b) = zpairs[i];
        adj[a].push(b);
        adj[b].push(a);
    }
    ensure!(adj.iter().all(|n| n.len() <= 3), Invariant, "T* has a vertex of degree above 3");
    let root = (0..gamma).find(|&v| adj[v].len() == 1).expect("a tree has a leaf");
    let mut order = vec![root];
    let mut parent = vec![usize::MAX; gamma];
    parent[root] = root;
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        for &w in &adj[v] {
            if parent[w] == usize::MAX {
                parent[w] = v;
                order.push(w);
            }
        }
        i += 1;
    }
    ensure!(order.len() == gamma, Invariant, "T* does not span Z");

    let size = z.threshold as usize;
    let k_prime = cfg.k_prime as usize;
    let mut bundles: BTreeMap<usize, Bundle> = BTreeMap::new();
    let mut t_star = vec![];
    // Edges already special for some set; an edge of two interfaces may be
    // special for only one of them.
    let mut claimed: BTreeSet<EdgeId> = BTreeSet::new();
    for &c in &order[1..] {
        let p = parent[c];
        let between: Vec<HubPath> = hub_paths
            .iter()
            .filter(|h| (h.from_set, h.to_set) == (c, p) || (h.from_set, h.to_set) == (p, c))
            .cloned()
            .collect();
        let b = make_bundle(p, c, &between, size, k_prime, &claimed, p == root)?;
        claimed.extend(b.b1());
        if p == root {
            claimed.extend(b.b2());
        }
        bundles.insert(c, b);
        t_star.push((p, c));
    }
    let mut gamma_star: Vec<Vec<EdgeId>> = vec![vec![]; gamma];
    for j in 0..gamma {
        gamma_star[j] = if j == root { bundles[&adj[root][0]].b2() } else { bundles[&j].b1() };
    }

    let mut built: BTreeMap<usize, BTreeMap<EdgeId, Partial>> = BTreeMap::new();
    for &j in order.iter().rev() {
        let mut here: BTreeMap<EdgeId, Partial> = gamma_star[j]
            .iter()
            .map(|&e| (e, Partial { edges: BTreeSet::from([e]), special: BTreeMap::from([(j, e)]) }))
            .collect();
        ensure!(here.len() == k_prime, Invariant, "Γ*_{j} repeats an edge");
        for &c in adj[j].iter().filter(|&&c| c != j && parent[c] == j) {
            let b = &bundles[&c];
            let mut child = built.remove(&c).expect("child processed first");
            let b2 = b.b2();
            let links = link_bundle(g, fam, j, &b2, &gamma_star[j])?;
            for hp in &b.paths {
                let sub = child.remove(&hp.first_edge).ok_or_else(|| EdpError::Invariant("bundle path misses its child tree".into()))?;
                let (to, lp) = &links[&hp.last_edge];
                let t = here.get_mut(to).expect("link target in Γ*");
                t.edges.extend(sub.edges);
                t.edges.extend(hp.path.edges.iter().copied());
                t.edges.extend([hp.first_edge, hp.last_edge]);
                t.edges.extend(lp.edges.iter().copied());
                for (s, e) in sub.special {
                    ensure!(t.special.insert(s, e).is_none(), Invariant, "tree gets two special edges for set {s}");
                }
            }
        }
        built.insert(j, here);
    }
    let top = built.remove(&root).expect("root built");
    let mut trees = vec![];
    let mut special = vec![];
    for (_, part) in top {
        ensure!(part.special.len() == gamma, Invariant, "tree spans {} of {gamma} sets", part.special.len());
        let sp: Vec<EdgeId> = part.special.values().copied().collect();
        let edges: Vec<EdgeId> = part.edges.into_iter().collect();
        trees.push(clean_tree(g, &edges, &sp)?);
        special.push(sp);
    }
    let gamma_star: Vec<Vec<EdgeId>> = (0..gamma).map(|j| special.iter().map(|s| s[j]).collect()).collect();
    let tf = TreeFamily { trees, special, gamma_star };
    let max_tree_load = verify_tree_family(g, ig, &tf)?;
    let report = TreeReport {
        gplus_vertices: gp.digraph.n,
        gplus_arcs: gp.digraph.arcs.len(),
        lambda: split.lambda,
        splits: split.splits,
        rejected_companions: split.rejected,
        pair_checks: split.pair_checks,
        ell: cfg.ell,
        z,
        t_star,
        root,
        bundles: bundles
            .values()
            .map(|b| BundleSummary { parent: b.parent, child: b.child, taken: b.taken, after_dedup: b.after_dedup })
            .collect(),
        max_tree_load,
    };
    Ok((tf, report))
}

/// Maps each edge of B′₂ to an edge of Γ*_j by a path inside G[S_j] ∪ out(S_j).
fn link_bundle(g: &MultiGraph, fam: &GoodFamily, j: usize, b2: &[EdgeId], target: &[EdgeId]) -> Result<BTreeMap<EdgeId, (EdgeId, Path)>> {
    let same = b2.iter().collect::<BTreeSet<_>>() == target.iter().collect::<BTreeSet<_>>();
    let links: Vec<Link> = if same {
        b2.iter()
            .map(|&e| {
                let (u, v) = g.ends(e);
                Link { from: e, to: e, path: Path { verts: vec![u, v], edges: vec![e] } }
            })
            .collect()
    } else {
        route_within(g, &fam.sets[j].set, b2, target)?.routed(&format!("bundle routing inside S_{j}"))?
    };
    Ok(links.into_iter().map(|l| (l.from, (l.to, l.path))).collect())
}

/// Spanning forest of `edges` keeping `special` first, then leaves that are
/// not special edges stripped repeatedly.
fn clean_tree(g: &MultiGraph, edges: &[EdgeId], special: &[EdgeId]) -> Result<Vec<EdgeId>> {
    let mut t: BTreeSet<EdgeId> = prune_to_tree(g, edges, special).into_iter().collect();
    let keep: BTreeSet<EdgeId> = special.iter().copied().collect();
    loop {
        let mut deg: BTreeMap<VertexId, usize> = BTreeMap::new();
        for &e in &t {
            let (u, v) = g.ends(e);
            *deg.entry(u).or_default() += 1;
            *deg.entry(v).or_default() += 1;
        }
        let strip: Vec<EdgeId> = t
            .iter()
            .copied()
            .filter(|e| !keep.contains(e) && {
                let (u, v) = g.ends(*e);
                deg[&u] == 1 || deg[&v] == 1
            })
            .collect();
        if strip.is_empty() {
            break;
        }
        for e in strip {
            t.remove(&e);
        }
    }
    let t: Vec<EdgeId> = t.into_iter().collect();
    ensure!(is_tree(g, &t), Invariant, "assembled tree is not a tree");
    Ok(t)
}

pub fn is_tree(g: &MultiGraph, edges: &[EdgeId]) -> bool {
    let mut verts = BTreeSet::new();
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
    for &e in edges {
        let (u, v) = g.ends(e);
        verts.insert(u);
        verts.insert(v);
        let (a, b) = (find(&mut uf, u), find(&mut uf, v));
        if a == b {
            return false;
        }
        uf.insert(a, b);
    }
    edges.is_empty() || verts.len() == edges.len() + 1
}

/// Checks the tree family and returns the largest number of trees sharing an edge.
pub fn verify_tree_family(g: &MultiGraph, ig: &InterfaceGrouping, tf: &TreeFamily) -> Result<u32> {
    let gamma = ig.sets.len();
    let k = tf.trees.len();
    ensure!(tf.special.len() == k && tf.gamma_star.len() == gamma, Verification, "tree family shape mismatch");
    let mut all_special = BTreeSet::new();
    let mut load: BTreeMap<EdgeId, u32> = BTreeMap::new();
    for (i, (t, sp)) in tf.trees.iter().zip(&tf.special).enumerate() {
        ensure!(t.iter().all(|&e| g.has_edge(e)), Verification, "tree {i} uses a missing edge");
        ensure!(is_tree(g, t), Verification, "T_{i} is not a tree");
        ensure!(sp.len() == gamma, Verification, "T_{i} has {} special edges, need {gamma}", sp.len());
        for (j, e) in sp.iter().enumerate() {
            ensure!(t.binary_search(e).is_ok(), Verification, "special edge {e} not in T_{i}");
            ensure!(ig.sets[j].reps.binary_search(e).is_ok(), Verification, "e_{{{i},{j}}} = {e} not in Γ′_{j}");
            ensure!(all_special.insert((j, *e)), Verification, "edge {e} is special twice for set {j}");
        }
        let distinct: BTreeSet<_> = sp.iter().collect();
        for other in tf.special.iter().skip(i + 1) {
            ensure!(other.iter().all(|e| !distinct.contains(e)), Verification, "special sets E_i overlap");
        }
        for &e in t {
            *load.entry(e).or_default() += 1;
        }
    }
    for j in 0..gamma {
        ensure!(tf.gamma_star[j].len() == k, Verification, "|Γ*_{j}| ≠ k′");
        for (i, e) in tf.gamma_star[j].iter().enumerate() {
            ensure!(tf.special[i][j] == *e, Verification, "Γ*_{j} disagrees with E_{i}");
        }
    }
    let max = load.values().copied().max().unwrap_or(0);
    if let Some((e, c)) = load.iter().find(|(_, &c)| c > 8) {
        return Err(EdpError::Verification(format!("edge {e} lies in {c} trees (limit 8)")));
    }
    Ok(max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::OracleConfig;
    use crate::expander::group_interfaces;
    use crate::family::{find_good_family, FamilyConfig};
    use crate::params::{ParamConfig, ParamTable, Profile};
    use crate::testutil::grid_instance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degree_three_tree_search() {
        let star: Vec<(usize, usize)> = (1..5).map(|i| (0, i)).collect();
        assert_eq!(bounded_degree_spanning_tree(5, &star, 3), None);
        assert!(bounded_degree_spanning_tree(5, &star, 4).is_some());
        let k4: Vec<(usize, usize)> = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let t = bounded_degree_spanning_tree(4, &k4, 2).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(bounded_degree_spanning_tree(1, &[], 3), Some(vec![]));
    }

    #[test]
    fn z_threshold_and_capacities() {
        // ℓ = 8, σ = 2: threshold 4. Pair (0,1) has 5 edges, (1,2) has 3.
        let mut h = vec![(0, 1); 3];
        h.extend([(1, 0), (1, 0), (1, 2), (2, 1), (2, 1), (0, 0)]);
        let z = build_z(3, &h, 8, 2);
        assert_eq!(z.threshold, 4);
        assert_eq!(z.edges, vec![(0, 1, 5)]);
        assert_eq!(z.capacity, vec![5, 5, 0]);
        assert!(!z_capacity_ok(&z, 3, 8));
        let z2 = ZGraph { edges: vec![], threshold: 1, capacity: vec![8, 5] };
        // γ = 2: need C·4 ≥ 3·8.
        assert!(!z_capacity_ok(&z2, 2, 8));
        let z3 = ZGraph { edges: vec![], threshold: 1, capacity: vec![8, 6] };
        assert!(z_capacity_ok(&z3, 2, 8));
    }

    fn hp(from: usize, to: usize, a: EdgeId, b: EdgeId) -> HubPath {
        HubPath { from_set: from, to_set: to, first_edge: a, last_edge: b, path: Path::trivial(0) }
    }

    #[test]
    fn bundle_dedup_drops_repeated_ends() {
        // Child 1, parent 0. Paths listed parent→child are reversed first.
        let between = vec![hp(1, 0, 10, 20), hp(0, 1, 21, 10), hp(1, 0, 11, 21), hp(1, 0, 12, 22), hp(1, 0, 13, 23)];
        let b = make_bundle(0, 1, &between, 5, 2, &BTreeSet::new(), false).unwrap();
        // Second path repeats first edge 10; the third repeats last edge 21 of the dropped
        // path only, so it survives.
        assert_eq!(b.after_dedup, 4);
        assert_eq!(b.b1(), vec![10, 11]);
        assert_eq!(b.b2(), vec![20, 21]);
        assert!(make_bundle(0, 1, &between, 5, 5, &BTreeSet::new(), false).is_err());
        let triple = vec![hp(1, 0, 10, 20), hp(1, 0, 10, 21), hp(1, 0, 10, 22)];
        assert!(matches!(make_bundle(0, 1, &triple, 3, 1, &BTreeSet::new(), false), Err(EdpError::Invariant(_))));
    }

    #[test]
    fn bundle_skips_claimed_special_edges() {
        let between = vec![hp(1, 0, 10, 20), hp(1, 0, 11, 21), hp(1, 0, 12, 12), hp(1, 0, 13, 23)];
        let claimed = BTreeSet::from([10, 23]);
        let b = make_bundle(0, 1, &between, 4, 2, &claimed, false).unwrap();
        assert_eq!(b.b1(), vec![11, 12]);
        // At the root both ends become special: 12 = 12 and 23 are out.
        let b = make_bundle(0, 1, &between, 4, 1, &claimed, true).unwrap();
        assert_eq!(b.b1(), vec![11]);
        assert!(make_bundle(0, 1, &between, 4, 2, &claimed, true).is_err());
    }

    #[test]
    fn desk_grid_builds_trees() {
        let (g, terms) = grid_instance(12, 24);
        let t = ParamTable::new(24, &ParamConfig { profile: Profile::Desk, ..Default::default() });
        assert_eq!((t.k_star, t.k_prime), (8, 4));
        let c = FamilyConfig::from_params(&t, 200, 10, OracleConfig::default());
        let mut built = 0;
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fam = find_good_family(&g, &terms, &c, &mut rng).unwrap().family;
            let Ok(ig) = group_interfaces(&g, &fam, t.p, t.k_star) else { continue };
            let cfg = TreeConfig {
                ell: t.ell(),
                sigma: t.sigma,
                k_prime: t.k_prime,
                split: SplitConfig { pairs: None, fresh_check: false },
            };
            match build_trees(&g, &fam, &ig, &cfg) {
                Ok((tf, rep)) => {
                    built += 1;
                    assert_eq!(tf.trees.len(), 4);
                    assert!(rep.max_tree_load <= 8);
                    assert!(z_capacity_ok(&rep.z, 2, t.ell()));
                    verify_tree_family(&g, &ig, &tf).unwrap();
                }
                Err(EdpError::Verification(m)) => eprintln!("seed {seed}: {m}"),
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
        assert!(built >= 3, "only {built} of 6 seeds built trees");
    }
}
