//! Seeded instance generators for the test corpus.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, EdpError, Result};
use crate::graph::{MultiGraph, VertexId};
use crate::instance::Instance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Grid { w: u32, h: u32 },
    Regular { n: u32, d: u32 },
    Hypercube { dim: u32 },
    CubeConnectedCycles { dim: u32 },
}

impl Family {
    pub fn name(&self) -> String {
        match *self {
            Family::Grid { w, h } => format!("grid-{w}x{h}"),
            Family::Regular { n, d } => format!("regular-{n}-d{d}"),
            Family::Hypercube { dim } => format!("hypercube-{dim}"),
            Family::CubeConnectedCycles { dim } => format!("ccc-{dim}"),
        }
    }

    pub fn build<R: Rng>(&self, rng: &mut R) -> Result<MultiGraph> {
        match *self {
            Family::Grid { w, h } => Ok(grid(w, h)),
            Family::Regular { n, d } => random_regular(n, d, rng),
            Family::Hypercube { dim } => Ok(hypercube(dim)),
            Family::CubeConnectedCycles { dim } => Ok(cube_connected_cycles(dim)),
        }
    }
}

pub fn grid(w: u32, h: u32) -> MultiGraph {
    let mut g = MultiGraph::new((w * h) as usize);
    for r in 0..h {
        for c in 0..w {
            let v = r * w + c;
            if c + 1 < w {
                g.add_edge(v, v + 1).expect("grid vertex");
            }
            if r + 1 < h {
                g.add_edge(v, v + w).expect("grid vertex");
            }
        }
    }
    g
}

pub fn hypercube(dim: u32) -> MultiGraph {
    let n = 1u32 << dim;
    let mut g = MultiGraph::new(n as usize);
    for v in 0..n {
        for b in 0..dim {
            let u = v ^ (1 << b);
            if v < u {
                g.add_edge(v, u).expect("cube vertex");
            }
        }
    }
    g
}

/// Vertex (x, i) is `x·dim + i`; cycle edges inside each corner, cube edges
/// along bit i.
pub fn cube_connected_cycles(dim: u32) -> MultiGraph {
    let n = (1u32 << dim) * dim;
    let mut g = MultiGraph::new(n as usize);
    let id = |x: u32, i: u32| x * dim + i;
    for x in 0..1u32 << dim {
        for i in 0..dim {
            if dim > 2 || i + 1 < dim {
                g.add_edge(id(x, i), id(x, (i + 1) % dim)).expect("ccc vertex");
            }
            let y = x ^ (1 << i);
            if x < y {
                g.add_edge(id(x, i), id(y, i)).expect("ccc vertex");
            }
        }
    }
    g
}

/// Simple random d-regular graph: points are paired at random among
/// vertices that are distinct and not yet adjacent; a stuck pairing restarts.
pub fn random_regular<R: Rng>(n: u32, d: u32, rng: &mut R) -> Result<MultiGraph> {
    ensure!(d < n && (n as u64 * d as u64).is_multiple_of(2), Precondition, "no {d}-regular graph on {n} vertices");
    'attempt: for _ in 0..1000 {
        let mut points: Vec<VertexId> = (0..n).flat_map(|v| std::iter::repeat_n(v, d as usize)).collect();
        let mut adj: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
        let mut edges = vec![];
        while !points.is_empty() {
            let mut placed = false;
            for _ in 0..100 {
                let i = rng.gen_range(0..points.len());
                let j = rng.gen_range(0..points.len());
                let (u, v) = (points[i], points[j]);
                if u == v || adj.contains(&(u.min(v), u.max(v))) {
                    continue;
                }
                adj.insert((u.min(v), u.max(v)));
                edges.push((u, v));
                let (hi, lo) = (i.max(j), i.min(j));
                points.swap_remove(hi);
                points.swap_remove(lo);
                placed = true;
                break;
            }
            if !placed {
                continue 'attempt;
            }
        }
        return MultiGraph::from_edges(n as usize, &edges);
    }
    Err(EdpError::Stochastic(format!("no simple {d}-regular pairing on {n} vertices after 1000 attempts")))
}

/// `k` pairs on 2k distinct random vertices.
pub fn random_pairs<R: Rng>(g: &MultiGraph, k: usize, rng: &mut R) -> Result<Vec<(VertexId, VertexId)>> {
    let mut vs: Vec<VertexId> = g.vertices().collect();
    ensure!(vs.len() >= 2 * k, Precondition, "{} vertices cannot host {k} disjoint pairs", vs.len());
    vs.shuffle(rng);
    Ok(vs[..2 * k].chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

/// One corpus entry: a graph family, a pair count and the seed for both.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub family: Family,
    pub k: usize,
    pub seed: u64,
}

impl CorpusEntry {
    pub fn name(&self) -> String {
        format!("{}-k{}-s{}", self.family.name(), self.k, self.seed)
    }

    pub fn instance<R: Rng>(&self, rng: &mut R) -> Result<Instance> {
        let g = self.family.build(rng)?;
        let pairs = random_pairs(&g, self.k, rng)?;
        Instance::new(g, pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_counts() {
        let g = grid(4, 3);
        assert_eq!((g.vertex_count(), g.edge_count()), (12, 3 * 3 + 2 * 4));
    }

    #[test]
    fn cubes_are_regular() {
        let h = hypercube(5);
        assert_eq!(h.edge_count(), 5 * 16);
        assert!(h.vertices().all(|v| h.degree(v) == 5));
        let c = cube_connected_cycles(4);
        assert_eq!(c.vertex_count(), 64);
        assert!(c.vertices().all(|v| c.degree(v) == 3));
        assert!(c.is_connected());
    }

    #[test]
    fn regular_graphs_are_simple_and_regular() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, d) in [(20, 3), (256, 6), (100, 8)] {
            let g = random_regular(n, d, &mut rng).unwrap();
            assert!(g.vertices().all(|v| g.degree(v) == d as usize));
            let mut seen = BTreeSet::new();
            for e in g.edges() {
                let (u, v) = g.ends(e);
                assert_ne!(u, v);
                assert!(seen.insert((u.min(v), u.max(v))));
            }
        }
        assert!(random_regular(5, 3, &mut rng).is_err());
    }

    #[test]
    fn pairs_are_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = grid(5, 5);
        let p = random_pairs(&g, 12, &mut rng).unwrap();
        let all: BTreeSet<_> = p.iter().flat_map(|&(s, t)| [s, t]).collect();
        assert_eq!(all.len(), 24);
        assert!(random_pairs(&g, 13, &mut rng).is_err());
    }
}
