//! Complete splitting-off on Eulerian digraphs, keeping a vertex subset.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, EdpError, Result};
use crate::flow::Dinic;

const NONE: u32 = u32::MAX;

/// Directed multigraph on vertices `0..n`; arc ids index `arcs`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digraph {
    pub n: usize,
    pub arcs: Vec<(u32, u32)>,
}

impl Digraph {
    pub fn is_eulerian(&self) -> bool {
        let mut bal = vec![0i64; self.n];
        for &(u, v) in &self.arcs {
            bal[u as usize] += 1;
            bal[v as usize] -= 1;
        }
        bal.iter().all(|&b| b == 0)
    }
}

/// λ(s, t) by unit-capacity max-flow on the given arcs.
pub fn arc_connectivity(n: usize, arcs: impl Iterator<Item = (u32, u32)>, s: u32, t: u32) -> u64 {
    let mut d = Dinic::new(n);
    for (u, v) in arcs {
        if u != v {
            d.add_arc(u as usize, v as usize, 1);
        }
    }
    d.max_flow(s as usize, t as usize, i64::MAX) as u64
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Ordered kept pairs whose λ is certified after every split; all when `None`.
    pub pairs: Option<Vec<(u32, u32)>>,
    /// Also recompute λ from scratch for every certified pair after each split.
    pub fresh_check: bool,
}

/// An arc of the split graph with the original arcs it stands for, in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitArc {
    pub tail: u32,
    pub head: u32,
    pub path: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub keep: Vec<u32>,
    pub arcs: Vec<SplitArc>,
    /// λ before splitting for each certified ordered pair; preserved after.
    pub lambda: BTreeMap<String, u64>,
    pub splits: usize,
    /// Candidate companion arcs rejected because λ dropped.
    pub rejected: usize,
    /// Pair checks done (one per certified pair per split).
    pub pair_checks: usize,
    pub fresh_checks: usize,
}

struct Flow {
    s: u32,
    t: u32,
    lambda: u64,
    value: u64,
    used: Vec<bool>,
}

/// Mutable state with an undo journal for tentative splits.
struct State {
    n: usize,
    tail: Vec<u32>,
    head: Vec<u32>,
    alive: Vec<bool>,
    out: Vec<Vec<u32>>,
    inn: Vec<Vec<u32>>,
    first: Vec<u32>,
    last: Vec<u32>,
    next: Vec<u32>,
    flows: Vec<Flow>,
    journal: Vec<Undo>,
}

enum Undo {
    Used(usize, u32, bool),
    Alive(u32),
    Push(u32),
    Next(u32),
    Value(usize, u64),
}

impl State {
    fn add_arc(&mut self, u: u32, v: u32, first: u32, last: u32) -> u32 {
        let id = self.tail.len() as u32;
        self.tail.push(u);
        self.head.push(v);
        self.alive.push(true);
        self.out[u as usize].push(id);
        self.inn[v as usize].push(id);
        self.first.push(first);
        self.last.push(last);
        for f in &mut self.flows {
            f.used.push(false);
        }
        self.journal.push(Undo::Push(id));
        id
    }

    fn kill(&mut self, a: u32) {
        self.alive[a as usize] = false;
        self.journal.push(Undo::Alive(a));
    }

    fn set_used(&mut self, p: usize, a: u32, val: bool) {
        let old = self.flows[p].used[a as usize];
        if old != val {
            self.flows[p].used[a as usize] = val;
            self.journal.push(Undo::Used(p, a, old));
        }
    }

    fn set_value(&mut self, p: usize, v: u64) {
        self.journal.push(Undo::Value(p, self.flows[p].value));
        self.flows[p].value = v;
    }

    fn rollback(&mut self) {
        while let Some(u) = self.journal.pop() {
            match u {
                Undo::Used(p, a, old) => self.flows[p].used[a as usize] = old,
                Undo::Alive(a) => self.alive[a as usize] = true,
                Undo::Push(id) => {
                    let (u, v) = (self.tail[id as usize], self.head[id as usize]);
                    self.out[u as usize].pop();
                    self.inn[v as usize].pop();
                    self.tail.pop();
                    self.head.pop();
                    self.alive.pop();
                    self.first.pop();
                    self.last.pop();
                    for f in &mut self.flows {
                        f.used.pop();
                    }
                }
                Undo::Next(x) => self.next[x as usize] = NONE,
                Undo::Value(p, v) => self.flows[p].value = v,
            }
        }
    }

    /// Removes one flow unit that ran through a removed arc (tail → head):
    /// walks back from `from` to the source and forward from `to` to the sink.
    fn cut_path(&mut self, p: usize, from: u32, to: u32) -> Result<()> {
        let (s, t) = (self.flows[p].s, self.flows[p].t);
        let mut x = from;
        while x != s {
            let a = self.inn[x as usize]
                .iter()
                .copied()
                .find(|&a| self.alive[a as usize] && self.flows[p].used[a as usize])
                .ok_or_else(|| EdpError::Invariant("flow certificate lost conservation".into()))?;
            self.set_used(p, a, false);
            x = self.tail[a as usize];
        }
        let mut x = to;
        while x != t {
            let a = self.out[x as usize]
                .iter()
                .copied()
                .find(|&a| self.alive[a as usize] && self.flows[p].used[a as usize])
                .ok_or_else(|| EdpError::Invariant("flow certificate lost conservation".into()))?;
            self.set_used(p, a, false);
            x = self.head[a as usize];
        }
        let v = self.flows[p].value - 1;
        self.set_value(p, v);
        Ok(())
    }

    /// One augmenting path in the residual graph of flow `p`.
    fn augment(&mut self, p: usize) -> bool {
        let (s, t) = (self.flows[p].s, self.flows[p].t);
        let mut prev: Vec<(u32, bool)> = vec![(NONE, false); self.n];
        let mut seen = vec![false; self.n];
        seen[s as usize] = true;
        let mut q = VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            if x == t {
                break;
            }
            for &a in &self.out[x as usize] {
                let y = self.head[a as usize];
                if self.alive[a as usize] && !self.flows[p].used[a as usize] && !seen[y as usize] {
                    seen[y as usize] = true;
                    prev[y as usize] = (a, true);
                    q.push_back(y);
                }
            }
            for &a in &self.inn[x as usize] {
                let y = self.tail[a as usize];
                if self.alive[a as usize] && self.flows[p].used[a as usize] && !seen[y as usize] {
                    seen[y as usize] = true;
                    prev[y as usize] = (a, false);
                    q.push_back(y);
                }
            }
        }
        if !seen[t as usize] {
            return false;
        }
        let mut x = t;
        while x != s {
            let (a, fwd) = prev[x as usize];
            self.set_used(p, a, fwd);
            x = if fwd { self.tail[a as usize] } else { self.head[a as usize] };
        }
        let v = self.flows[p].value + 1;
        self.set_value(p, v);
        true
    }

    /// Splits (b, a) at their common vertex; returns false (and leaves the
    /// journal for rollback) when some certified λ cannot be restored.
    fn try_split(&mut self, b: u32, a: u32) -> Result<bool> {
        let v = self.head[b as usize];
        let (w, u) = (self.tail[b as usize], self.head[a as usize]);
        self.kill(a);
        self.kill(b);
        let c = if w != u {
            let (lb, fa) = (self.last[b as usize], self.first[a as usize]);
            self.next[lb as usize] = fa;
            self.journal.push(Undo::Next(lb));
            Some(self.add_arc(w, u, self.first[b as usize], self.last[a as usize]))
        } else {
            None
        };
        for p in 0..self.flows.len() {
            let ua = self.flows[p].used[a as usize];
            let ub = self.flows[p].used[b as usize];
            match (ua, ub) {
                (true, true) => {
                    self.set_used(p, a, false);
                    self.set_used(p, b, false);
                    if let Some(c) = c {
                        self.set_used(p, c, true);
                    }
                }
                (true, false) => {
                    self.set_used(p, a, false);
                    self.cut_path(p, v, u)?;
                }
                (false, true) => {
                    self.set_used(p, b, false);
                    self.cut_path(p, w, v)?;
                }
                (false, false) => {}
            }
            while self.flows[p].value < self.flows[p].lambda {
                if !self.augment(p) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Splits off every vertex outside `keep` (in id order; at each vertex the
/// smallest live outgoing arc first). Companion incoming arcs are tried with
/// certificate-preserving ones first, then by id; a candidate is accepted
/// when every certified pair still has λ edge-disjoint paths.
pub fn split_off_eulerian(d: &Digraph, keep: &[u32], cfg: &SplitConfig) -> Result<SplitResult> {
    ensure!(d.is_eulerian(), Precondition, "digraph is not Eulerian");
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    ensure!(keep_sorted.len() == keep.len(), Precondition, "keep set repeats a vertex");
    for &k in keep {
        ensure!((k as usize) < d.n, Precondition, "kept vertex {k} out of range");
    }
    let pairs = match &cfg.pairs {
        Some(p) => p.clone(),
        None => keep.iter().flat_map(|&a| keep.iter().filter(move |&&b| b != a).map(move |&b| (a, b))).collect(),
    };
    let is_kept = {
        let mut m = vec![false; d.n];
        for &k in keep {
            m[k as usize] = true;
        }
        m
    };
    for &(s, t) in &pairs {
        ensure!(is_kept[s as usize] && is_kept[t as usize] && s != t, Precondition, "certified pair ({s}, {t}) is not a kept pair");
    }
    let m = d.arcs.len();
    let mut st = State {
        n: d.n,
        tail: vec![],
        head: vec![],
        alive: vec![],
        out: vec![vec![]; d.n],
        inn: vec![vec![]; d.n],
        first: vec![],
        last: vec![],
        next: vec![NONE; m],
        flows: vec![],
        journal: vec![],
    };
    for (i, &(u, v)) in d.arcs.iter().enumerate() {
        st.add_arc(u, v, i as u32, i as u32);
    }
    let mut lambda = BTreeMap::new();
    for (p, &(s, t)) in pairs.iter().enumerate() {
        st.flows.push(Flow { s, t, lambda: 0, value: 0, used: vec![false; m] });
        while st.augment(p) {}
        let f = &mut st.flows[p];
        f.lambda = f.value;
        lambda.insert(format!("{s}->{t}"), f.lambda);
    }
    st.journal.clear();
    for f in &st.flows {
        ensure!(arc_connectivity(d.n, d.arcs.iter().copied(), f.s, f.t) == f.lambda, Invariant, "initial certificate is not maximum");
    }

    let (mut splits, mut rejected, mut pair_checks, mut fresh_checks) = (0, 0, 0, 0);
    for v in 0..d.n as u32 {
        if is_kept[v as usize] {
            continue;
        }
        loop {
            let Some(a) = st.out[v as usize].iter().copied().filter(|&a| st.alive[a as usize]).min() else { break };
            let mut cands: Vec<u32> = st.inn[v as usize].iter().copied().filter(|&b| st.alive[b as usize]).collect();
            ensure!(!cands.is_empty(), Invariant, "vertex {v} lost its balance");
            cands.sort_by_key(|&b| (st.flows.iter().any(|f| f.used[a as usize] != f.used[b as usize]), b));
            let mut done = false;
            for b in cands {
                st.journal.clear();
                pair_checks += st.flows.len();
                if st.try_split(b, a)? {
                    if cfg.fresh_check {
                        for f in &st.flows {
                            let live = (0..st.tail.len()).filter(|&i| st.alive[i]).map(|i| (st.tail[i], st.head[i]));
                            let now = arc_connectivity(d.n, live, f.s, f.t);
                            fresh_checks += 1;
                            ensure!(now == f.lambda, Invariant, "λ({}, {}) changed from {} to {now}", f.s, f.t, f.lambda);
                        }
                    }
                    st.journal.clear();
                    splits += 1;
                    done = true;
                    break;
                }
                st.rollback();
                rejected += 1;
            }
            ensure!(done, Invariant, "no companion arc preserves connectivity at vertex {v}");
        }
    }

    let mut arcs = vec![];
    let mut seen = vec![false; m];
    for i in 0..st.tail.len() {
        if !st.alive[i] {
            continue;
        }
        let (t, h) = (st.tail[i], st.head[i]);
        ensure!(is_kept[t as usize] && is_kept[h as usize], Invariant, "arc {t}→{h} survives outside the keep set");
        let mut path = vec![];
        let mut x = st.first[i];
        loop {
            ensure!(!seen[x as usize], Invariant, "original arc {x} realizes two split arcs");
            seen[x as usize] = true;
            path.push(x);
            if x == st.last[i] {
                break;
            }
            x = st.next[x as usize];
            ensure!(x != NONE, Invariant, "broken realizing chain");
        }
        arcs.push(SplitArc { tail: t, head: h, path });
    }
    let res = SplitResult { keep: keep.to_vec(), arcs, lambda, splits, rejected, pair_checks, fresh_checks };
    verify_split(d, &res)?;
    Ok(res)
}

/// Realizing paths are walks in D, pairwise arc-disjoint, and λ on the
/// split graph equals the recorded λ for every recorded pair.
pub fn verify_split(d: &Digraph, r: &SplitResult) -> Result<()> {
    let mut used = vec![false; d.arcs.len()];
    for sa in &r.arcs {
        ensure!(!sa.path.is_empty(), Verification, "empty realizing path");
        ensure!(d.arcs[sa.path[0] as usize].0 == sa.tail, Verification, "realizing path starts off its tail");
        ensure!(d.arcs[*sa.path.last().unwrap() as usize].1 == sa.head, Verification, "realizing path ends off its head");
        for w in sa.path.windows(2) {
            ensure!(d.arcs[w[0] as usize].1 == d.arcs[w[1] as usize].0, Verification, "realizing path is not a walk");
        }
        for &x in &sa.path {
            ensure!(!used[x as usize], Verification, "realizing paths share arc {x}");
            used[x as usize] = true;
        }
    }
    for (key, &lam) in &r.lambda {
        let (s, t) = key.split_once("->").unwrap();
        let (s, t): (u32, u32) = (s.parse().unwrap(), t.parse().unwrap());
        let now = arc_connectivity(d.n, r.arcs.iter().map(|a| (a.tail, a.head)), s, t);
        ensure!(now == lam, Verification, "λ({s}, {t}) is {now} after splitting, {lam} before");
    }
    Ok(())
}
