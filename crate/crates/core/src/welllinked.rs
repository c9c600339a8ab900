//! Oracle-driven well-linked decomposition with exact edge accounting.

use serde::{Deserialize, Serialize};

use crate::cut::{find_violating_cut, is_violating, oracle_exhaustive, OracleConfig, ViolatingCut};
use crate::error::{ensure, EdpError, Result};
use crate::graph::{EdgeId, MultiGraph, VertexSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub host: VertexSet,
    pub clusters: Vec<VertexSet>,
    pub boundary: Vec<usize>,
    pub out_host: usize,
    /// Σ|out(W)| after each split.
    pub ledger: Vec<usize>,
    /// Every final cluster was cleared by an exhaustive oracle call.
    pub certified: bool,
}

impl Decomposition {
    pub fn total_boundary(&self) -> usize {
        self.boundary.iter().sum()
    }
}

/// Σ|out(W)| ≤ |out(S)|·(1 + 1/(64γ)), in integers.
pub fn charge_bound_holds(sum: usize, out_host: usize, gamma: u64) -> bool {
    let g = 64 * gamma as u128;
    sum as u128 * g <= out_host as u128 * (g + 1)
}

/// Oracle callback: (cluster, its boundary edges) → violating cut or `None`,
/// plus whether the answer `None` is exhaustive.
pub type Oracle<'a> = dyn FnMut(&VertexSet, &[EdgeId]) -> Result<(Option<ViolatingCut>, bool)> + 'a;

/// Splits S along oracle cuts until the oracle finds none. When `gamma` is
/// given (α = α(k) for that γ) the charge bound and the boundary shrink are
/// enforced after every split.
pub fn decompose(
    g: &MultiGraph,
    s: &VertexSet,
    k: u64,
    alpha: f64,
    gamma: Option<u64>,
    oracle: &mut Oracle,
) -> Result<Decomposition> {
    ensure!(!s.is_empty(), Precondition, "empty host set");
    let out_host = g.out_edges(s)?.len();
    let mut active: Vec<(VertexSet, Vec<EdgeId>)> = vec![(s.clone(), g.out_edges(s)?)];
    let mut done: Vec<(VertexSet, usize)> = vec![];
    let mut ledger = vec![];
    let mut certified = true;
    while !active.is_empty() {
        // Largest boundary first, then smallest member.
        let i = (0..active.len())
            .max_by(|&a, &b| {
                active[a].1.len().cmp(&active[b].1.len()).then(active[b].0.first().cmp(&active[a].0.first()))
            })
            .unwrap();
        let (w, out) = active.swap_remove(i);
        let (cut, exhaustive) = oracle(&w, &out)?;
        let Some(cut) = cut else {
            certified &= exhaustive;
            done.push((w, out.len()));
            continue;
        };
        if !is_violating(g, &w, &out, k, alpha, &cut) {
            return Err(EdpError::Invariant("oracle returned a cut that is not violating".into()));
        }
        let ox = g.out_edges(&cut.x)?;
        let oy = g.out_edges(&cut.y)?;
        if gamma.is_some() {
            ensure!(3 * ox.len().min(oy.len()) < 2 * out.len(), Invariant, "split did not shrink the smaller side's boundary");
        }
        active.push((cut.x, ox));
        active.push((cut.y, oy));
        let sum = active.iter().map(|a| a.1.len()).sum::<usize>() + done.iter().map(|d| d.1).sum::<usize>();
        if let Some(gm) = gamma {
            ensure!(charge_bound_holds(sum, out_host, gm), Invariant, "charge bound broken: {sum} > {out_host}·(1+1/(64·{gm}))");
        }
        ledger.push(sum);
    }
    done.sort_by(|a, b| a.0.first().cmp(&b.0.first()));
    let out = Decomposition {
        host: s.clone(),
        boundary: done.iter().map(|d| d.1).collect(),
        clusters: done.into_iter().map(|d| d.0).collect(),
        out_host,
        ledger,
        certified,
    };
    verify_partition(g, &out)?;
    Ok(out)
}

/// Decomposition of S with |out(S)| ≤ k using the built-in oracle.
pub fn decompose_bounded(
    g: &MultiGraph,
    s: &VertexSet,
    k: u64,
    alpha: f64,
    gamma: Option<u64>,
    cfg: &OracleConfig,
) -> Result<Decomposition> {
    let out = g.out_edges(s)?.len();
    ensure!(out as u64 <= k, Precondition, "|out(S)| = {out} exceeds k = {k}");
    let mut oracle = |w: &VertexSet, t: &[EdgeId]| {
        let c = find_violating_cut(g, w, t, k, alpha, cfg, &[])?;
        Ok((c, oracle_exhaustive(cfg, t.len(), k, alpha)))
    };
    let d = decompose(g, s, k, alpha, gamma, &mut oracle)?;
    ensure!(d.boundary.iter().all(|&b| b as u64 <= k), Invariant, "cluster boundary exceeds k");
    Ok(d)
}

fn verify_partition(g: &MultiGraph, d: &Decomposition) -> Result<()> {
    let mut seen = VertexSet::new();
    for (c, &b) in d.clusters.iter().zip(&d.boundary) {
        ensure!(!c.is_empty(), Invariant, "empty cluster");
        for &v in c {
            ensure!(seen.insert(v), Invariant, "clusters overlap at {v}");
        }
        ensure!(g.out_edges(c)?.len() == b, Invariant, "stored boundary size is wrong");
    }
    ensure!(seen == d.host, Invariant, "clusters do not cover the host set");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::OracleMode;
    use crate::graph::VertexId;

    fn exact() -> OracleConfig {
        OracleConfig { mode: OracleMode::Exact, ..Default::default() }
    }

    /// Cliques of size `c` in a chain joined by single bridges; each clique
    /// vertex gets `pend` pendant boundary edges.
    fn clique_chain(cliques: usize, c: u32, pend: usize) -> (MultiGraph, VertexSet) {
        let n = cliques as u32 * c;
        let mut g = MultiGraph::new(n as usize);
        for q in 0..cliques as u32 {
            for a in 0..c {
                for b in a + 1..c {
                    g.add_edge(q * c + a, q * c + b).unwrap();
                }
            }
            if q + 1 < cliques as u32 {
                g.add_edge(q * c + c - 1, (q + 1) * c).unwrap();
            }
        }
        for v in 0..n {
            for _ in 0..pend {
                let o = g.add_vertex();
                g.add_edge(v, o).unwrap();
            }
        }
        (g, (0..n).collect())
    }

    #[test]
    fn singleton_and_path_are_kept() {
        let g = MultiGraph::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let d = decompose_bounded(&g, &VertexSet::from([0]), 4, 0.5, None, &exact()).unwrap();
        assert_eq!(d.clusters, vec![VertexSet::from([0])]);
        let mut p = MultiGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let a = p.add_vertex();
        let b = p.add_vertex();
        p.add_edge(0, a).unwrap();
        p.add_edge(3, b).unwrap();
        let s: VertexSet = (0..4).collect();
        let d = decompose_bounded(&p, &s, 4, 0.9, None, &exact()).unwrap();
        assert_eq!(d.clusters, vec![s]);
        assert!(d.certified);
    }

    #[test]
    fn dumbbell_splits_at_bridge() {
        let (g, s) = clique_chain(2, 4, 0);
        let mut g = g;
        for v in [0, 1, 6, 7] {
            let o = g.add_vertex();
            g.add_edge(v, o).unwrap();
        }
        let d = decompose_bounded(&g, &s, 4, 0.9, None, &exact()).unwrap();
        assert_eq!(d.clusters, vec![(0..4).collect(), (4..8).collect()]);
        assert!(matches!(
            decompose_bounded(&g, &s, 3, 0.9, None, &exact()),
            Err(EdpError::Precondition(_))
        ));
    }

    #[test]
    fn two_cliques_exact_enumeration() {
        let (g, s) = clique_chain(2, 3, 1);
        // Bridge cut: crossing 1, three boundary edges per side.
        let d = decompose_bounded(&g, &s, 6, 0.5, None, &exact()).unwrap();
        assert_eq!(d.clusters, vec![(0..3).collect(), (3..6).collect()]);
        // Confirm by enumeration that no cluster has a violating cut left.
        for c in &d.clusters {
            let t = g.out_edges(c).unwrap();
            let verts: Vec<VertexId> = c.iter().copied().collect();
            for mask in 1u32..(1 << verts.len()) - 1 {
                let x: VertexSet = (0..verts.len()).filter(|i| mask >> i & 1 == 1).map(|i| verts[i]).collect();
                let xm = g.vertex_mask(&x).unwrap();
                let cross = g.edges().filter(|&e| {
                    let (u, v) = g.ends(e);
                    c.contains(&u) && c.contains(&v) && xm[u as usize] != xm[v as usize]
                }).count();
                let a = t.iter().filter(|&&e| { let (u, v) = g.ends(e); xm[u as usize] || xm[v as usize] }).count();
                let m = a.min(t.len() - a).min(3);
                assert!(!((cross as f64) < 0.5 * m as f64));
            }
        }
    }

    #[test]
    fn chain_of_three_cliques_meets_charge_bound() {
        // γ = 1 and k = 2^17: α = 1/(2^11·17) makes a bridge violating once
        // both sides carry more than 2^11·17 boundary edges.
        let k = 1u64 << 17;
        let alpha = 1.0 / (2048.0 * 17.0);
        let (g, s) = clique_chain(3, 4, 8800);
        let cfg = OracleConfig { mode: OracleMode::Spectral, ..Default::default() };
        let d = decompose_bounded(&g, &s, k, alpha, Some(1), &cfg).unwrap();
        assert_eq!(d.clusters.len(), 3);
        assert!(charge_bound_holds(d.total_boundary(), d.out_host, 1));
        assert_eq!(d.total_boundary(), 3 * 4 * 8800 + 4);
        assert!(!d.certified);
    }

    #[test]
    fn non_violating_oracle_answer_aborts() {
        let (g, s) = clique_chain(2, 3, 1);
        let mut liar = |w: &VertexSet, t: &[EdgeId]| {
            let x: VertexSet = w.iter().take(1).copied().collect();
            let y: VertexSet = w.difference(&x).copied().collect();
            Ok((Some(ViolatingCut { x, y, t1: t[..1].to_vec(), t2: t[1..2].to_vec(), crossing: 2 }), true))
        };
        assert!(matches!(decompose(&g, &s, 6, 0.5, None, &mut liar), Err(EdpError::Invariant(_))));
    }
}
