use crate::graph::{MultiGraph, VertexId};

/// w×w grid with `2·pairs` pendant terminals spread around the border.
pub fn grid_instance(w: u32, pairs: usize) -> (MultiGraph, Vec<VertexId>) {
    let mut g = MultiGraph::new((w * w) as usize);
    for r in 0..w {
        for c in 0..w {
            if c + 1 < w {
                g.add_edge(r * w + c, r * w + c + 1).unwrap();
            }
            if r + 1 < w {
                g.add_edge(r * w + c, (r + 1) * w + c).unwrap();
            }
        }
    }
    let ring: Vec<VertexId> = (0..w)
        .chain((1..w).map(|r| r * w + w - 1))
        .chain((0..w - 1).rev().map(|c| (w - 1) * w + c))
        .chain((1..w - 1).rev().map(|r| r * w))
        .collect();
    let mut terms = vec![];
    for i in 0..2 * pairs {
        let t = g.add_vertex();
        g.add_edge(ring[i * ring.len() / (2 * pairs)], t).unwrap();
        terms.push(t);
    }
    (g, terms)
}
