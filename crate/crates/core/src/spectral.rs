//! Laplacian eigenvectors for sweep cuts and expansion certificates.

use nalgebra::{DMatrix, DVector};

/// Dense size up to which eigenproblems are solved exactly.
const DENSE_LIMIT: usize = 1100;

/// Vertices `0..n` with an edge list (parallel edges allowed).
#[derive(Clone, Debug)]
pub struct SmallGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl SmallGraph {
    fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1.0;
            d[v] += 1.0;
        }
        d
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![vec![]; self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }
}

fn second_smallest(m: DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = m.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let i = idx[1.min(idx.len() - 1)];
    (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())
}

/// Vertex order by the Fiedler vector of the normalized Laplacian
/// (embedding `f_i / √d_i`). Isolated vertices go last.
pub fn fiedler_order(g: &SmallGraph) -> Vec<usize> {
    let n = g.n;
    if n <= 2 {
        return (0..n).collect();
    }
    let d = g.degrees();
    let x: Vec<f64> = if n <= DENSE_LIMIT {
        let mut m = DMatrix::<f64>::identity(n, n);
        for &(u, v) in &g.edges {
            let w = 1.0 / (d[u] * d[v]).sqrt();
            m[(u, v)] -= w;
            m[(v, u)] -= w;
        }
        for i in 0..n {
            if d[i] == 0.0 {
                m[(i, i)] = 2.0;
            }
        }
        let (_, f) = second_smallest(m);
        (0..n).map(|i| if d[i] > 0.0 { f[i] / d[i].sqrt() } else { f64::INFINITY }).collect()
    } else {
        power_fiedler(g, &d)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    order
}

/// Power iteration on I + D^{-1/2} A D^{-1/2} with the top eigenvector deflated.
fn power_fiedler(g: &SmallGraph, d: &[f64]) -> Vec<f64> {
    let n = g.n;
    let adj = g.adjacency();
    let sq: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
    let norm_top: f64 = sq.iter().map(|x| x * x).sum::<f64>().sqrt();
    let top: Vec<f64> = sq.iter().map(|x| x / norm_top).collect();
    let mut v: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5).collect();
    for _ in 0..400 {
        let dot: f64 = v.iter().zip(&top).map(|(a, b)| a * b).sum();
        for i in 0..n {
            v[i] -= dot * top[i];
        }
        let mut w = v.clone();
        for i in 0..n {
            if d[i] == 0.0 {
                continue;
            }
            for &j in &adj[i] {
                w[i] += v[j] / (sq[i] * sq[j]);
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        v = w.into_iter().map(|x| x / norm).collect();
    }
    (0..n).map(|i| if d[i] > 0.0 { v[i] / sq[i] } else { f64::INFINITY }).collect()
}

/// Second smallest eigenvalue of the combinatorial Laplacian D − A.
/// Exact (dense) up to the dense limit; `None` above it.
pub fn laplacian_lambda2(g: &SmallGraph) -> Option<f64> {
    let n = g.n;
    if n < 2 {
        return Some(0.0);
    }
    if n > DENSE_LIMIT {
        return None;
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for &(u, v) in &g.edges {
        m[(u, u)] += 1.0;
        m[(v, v)] += 1.0;
        m[(u, v)] -= 1.0;
        m[(v, u)] -= 1.0;
    }
    Some(second_smallest(m).0)
}

/// λ₂(L) ≥ 1 implies every S with |S| ≤ n/2 has |E(S,S̄)| ≥ |S|/2.
pub fn certifies_half_expansion(g: &SmallGraph) -> bool {
    laplacian_lambda2(g).is_some_and(|l| l >= 1.0 + 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dumbbell_sweep_separates_cliques() {
        let mut edges = vec![];
        for a in 0..4 {
            for b in a + 1..4 {
                edges.push((a, b));
                edges.push((a + 4, b + 4));
            }
        }
        edges.push((0, 4));
        let order = fiedler_order(&SmallGraph { n: 8, edges });
        let first: Vec<usize> = order[..4].to_vec();
        assert!(first.iter().all(|&v| v < 4) || first.iter().all(|&v| v >= 4));
    }

    #[test]
    fn complete_graph_lambda2() {
        let mut edges = vec![];
        for a in 0..6 {
            for b in a + 1..6 {
                edges.push((a, b));
            }
        }
        let l = laplacian_lambda2(&SmallGraph { n: 6, edges }).unwrap();
        assert!((l - 6.0).abs() < 1e-9);
    }

    #[test]
    fn power_iteration_agrees_on_path_order() {
        let n = 30;
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let g = SmallGraph { n, edges };
        let d = g.degrees();
        let x = power_fiedler(&g, &d);
        // Monotone along the path in one direction or the other.
        let inc = x.windows(2).all(|w| w[0] <= w[1] + 1e-6);
        let dec = x.windows(2).all(|w| w[0] + 1e-6 >= w[1]);
        assert!(inc || dec);
    }
}
