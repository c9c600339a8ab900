mod support;

use edp::flow::{max_flow_integral, Endpoint, FlowProblem, FlowResult};
use edp::mcf::{approx_concurrent_flow, LpMode};
use edp::MultiGraph;
use support::*;

#[test]
fn simplex_oracle_sanity() {
    // max x + y s.t. x + 2y ≤ 4, 3x + y ≤ 6 → (8/5, 6/5), value 14/5.
    let v = simplex_max(&[vec![1, 2], vec![3, 1]], &[4, 6], &[1, 1]);
    assert_eq!(to_f64(&v), 2.8);
    let c4 = MultiGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
    assert_eq!(exact_edp_lp(&c4, &[(0, 2), (1, 3)]), 2.0);
    assert_eq!(exact_concurrent(&c4, &[(0, 2), (1, 3)]), 1.0);
}

#[test]
fn max_flow_equals_min_cut_on_all_small_graphs() {
    for n in 2..=5usize {
        let pairs = n * (n - 1) / 2;
        for mask in 0u64..(1 << pairs) {
            let g = graph_from_mask(n, mask);
            for s in 0..n as u32 {
                for t in s + 1..n as u32 {
                    let mut p = FlowProblem::new(&g, 1);
                    p.sources.push((Endpoint::Vertex(s), u32::MAX));
                    p.sinks.push((Endpoint::Vertex(t), u32::MAX));
                    let got = max_flow_integral(&p, u64::MAX / 4).unwrap();
                    assert!(matches!(got, FlowResult::Cut { .. }));
                    assert_eq!(got.value(), brute_min_cut(&g, s, t), "n={n} mask={mask} s={s} t={t}");
                }
            }
        }
    }
}

#[test]
fn lp_values_match_exact_lp_on_four_vertices() {
    let eps = 0.05;
    for n in 2..=4usize {
        let npairs = n * (n - 1) / 2;
        let all: Vec<(u32, u32)> = (0..n as u32).flat_map(|u| (u + 1..n as u32).map(move |v| (u, v))).collect();
        for mask in 0u64..(1 << npairs) {
            let g = graph_from_mask(n, mask);
            let mut demand_sets: Vec<Vec<(u32, u32)>> = all.iter().map(|&p| vec![p]).collect();
            for (i, &a) in all.iter().enumerate() {
                for &b in &all[i + 1..] {
                    if a.0 != b.0 && a.0 != b.1 && a.1 != b.0 && a.1 != b.1 {
                        demand_sets.push(vec![a, b]);
                    }
                }
            }
            for d in demand_sets {
                let exact = exact_edp_lp(&g, &d);
                let got = approx_concurrent_flow(&g, &d, eps, LpMode::Edp, None).unwrap();
                assert!(got.primal >= (1.0 - eps) * exact - 1e-9 && got.primal <= exact + 1e-9, "edp {mask} {d:?}: {} vs {exact}", got.primal);
                let exact_c = exact_concurrent(&g, &d);
                let got_c = approx_concurrent_flow(&g, &d, eps, LpMode::Concurrent, None).unwrap();
                assert!(got_c.primal >= (1.0 - eps) * exact_c - 1e-9 && got_c.primal <= exact_c + 1e-9, "conc {mask} {d:?}: {} vs {exact_c}", got_c.primal);
            }
        }
    }
}
