//! Cut-matching game and the embedded expander built from it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, EdpError, Result};
use crate::expander::{connect_terminals, route_within};
use crate::family::GoodFamily;
use crate::graph::{edge_loads, EdgeId, MultiGraph, Path, VertexId, VertexSet};
use crate::spectral::{laplacian_lambda2, SmallGraph};
use crate::trees::TreeFamily;

/// Vertex count up to which expansion is computed by enumerating all cuts.
pub const EXACT_EXPANSION_LIMIT: usize = 20;

/// Random-projection cut player: keeps the mixing matrix of the walk that
/// averages matched pairs, projects its rows on a random Gaussian direction
/// and bisects at the median.
pub struct CutPlayer {
    n: usize,
    w: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bisection {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub projection: Vec<f64>,
}

impl CutPlayer {
    pub fn new(n: usize) -> Result<Self> {
        ensure!(n >= 2 && n.is_multiple_of(2), Precondition, "the game needs an even number of vertices, got {n}");
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        Ok(CutPlayer { n, w })
    }

    pub fn cut<R: Rng>(&self, rng: &mut R) -> Bisection {
        let n = self.n;
        let r: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let projection: Vec<f64> = (0..n).map(|i| (0..n).map(|c| self.w[i * n + c] * r[c]).sum()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| projection[x].total_cmp(&projection[y]).then(x.cmp(&y)));
        let mut a = order[..n / 2].to_vec();
        let mut b = order[n / 2..].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        Bisection { a, b, projection }
    }

    /// Mixes the rows of every matched pair.
    pub fn absorb(&mut self, m: &[(usize, usize)]) {
        let n = self.n;
        for &(x, y) in m {
            for c in 0..n {
                let avg = (self.w[x * n + c] + self.w[y * n + c]) / 2.0;
                self.w[x * n + c] = avg;
                self.w[y * n + c] = avg;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchingPlayer {
    /// Uniformly random perfect matching between the sides.
    Random,
    /// Pairs the vertices whose projections are closest across the median,
    /// which slows the mixing the cut player relies on.
    Adversarial,
}

impl MatchingPlayer {
    pub fn respond<R: Rng>(self, cut: &Bisection, rng: &mut R) -> Vec<(usize, usize)> {
        match self {
            MatchingPlayer::Random => {
                let mut b = cut.b.clone();
                b.shuffle(rng);
                cut.a.iter().copied().zip(b).collect()
            }
            MatchingPlayer::Adversarial => {
                let p = &cut.projection;
                let mut a = cut.a.clone();
                let mut b = cut.b.clone();
                a.sort_by(|&x, &y| p[y].total_cmp(&p[x]).then(x.cmp(&y)));
                b.sort_by(|&x, &y| p[x].total_cmp(&p[y]).then(x.cmp(&y)));
                a.into_iter().zip(b).collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionMethod {
    Exact,
    Spectral,
}

/// Edge expansion min_{|S| ≤ n/2} |E(S, S̄)| / |S|, exactly or as the
/// Cheeger lower bound λ₂/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub method: ExpansionMethod,
    pub value: f64,
    /// Worst cut (exact method only) as |E(S, S̄)| and |S|.
    pub worst: Option<(u64, u64)>,
    pub half_expander: bool,
}

/// Exact expansion by Gray-code enumeration of all vertex subsets.
pub fn exact_expansion(n: usize, edges: &[(usize, usize)]) -> Result<(u64, u64)> {
    ensure!((2..=EXACT_EXPANSION_LIMIT).contains(&n), Precondition, "exact expansion needs 2 ≤ n ≤ {EXACT_EXPANSION_LIMIT}");
    let mut adj: Vec<Vec<usize>> = vec![vec![]; n];
    for &(u, v) in edges {
        if u != v {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut inside = vec![false; n];
    let (mut size, mut cut) = (0u64, 0i64);
    let mut best: (u64, u64) = (u64::MAX, 1);
    for i in 1u64..(1u64 << n) {
        let v = i.trailing_zeros() as usize;
        let nb_in = adj[v].iter().filter(|&&w| inside[w]).count() as i64;
        let deg = adj[v].len() as i64;
        if inside[v] {
            inside[v] = false;
            size -= 1;
            cut -= deg - 2 * nb_in;
        } else {
            inside[v] = true;
            size += 1;
            cut += deg - 2 * nb_in;
        }
        if size >= 1 && 2 * size <= n as u64 && (cut as u64) * best.1 < best.0 * size {
            best = (cut as u64, size);
        }
    }
    Ok(best)
}

pub fn expansion(n: usize, edges: &[(usize, usize)]) -> Expansion {
    if (2..=EXACT_EXPANSION_LIMIT).contains(&n) {
        let (c, s) = exact_expansion(n, edges).expect("size checked");
        Expansion { method: ExpansionMethod::Exact, value: c as f64 / s as f64, worst: Some((c, s)), half_expander: 2 * c >= s }
    } else {
        let l2 = laplacian_lambda2(&SmallGraph { n, edges: edges.to_vec() }).unwrap_or(0.0);
        let value = l2 / 2.0;
        Expansion { method: ExpansionMethod::Spectral, value, worst: None, half_expander: value >= 0.5 + 1e-9 }
    }
}

/// γ_KRV(N) = ⌈c_γ · (log₂ N)²⌉.
pub fn krv_rounds(n: usize, c_gamma: f64) -> usize {
    let l = (n as f64).log2();
    (c_gamma * l * l).ceil().max(1.0) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Game {
    pub n: usize,
    pub rounds: usize,
    pub matchings: Vec<Vec<(usize, usize)>>,
    pub expansion: Expansion,
}

impl Game {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.matchings.iter().flatten().copied().collect()
    }
}

pub fn play_game<R: Rng>(n: usize, rounds: usize, player: MatchingPlayer, rng: &mut R) -> Result<Game> {
    let mut cp = CutPlayer::new(n)?;
    let mut matchings = vec![];
    for _ in 0..rounds {
        let cut = cp.cut(rng);
        let m = player.respond(&cut, rng);
        check_matching(n, &cut, &m)?;
        cp.absorb(&m);
        matchings.push(m);
    }
    let edges: Vec<(usize, usize)> = matchings.iter().flatten().copied().collect();
    let expansion = expansion(n, &edges);
    Ok(Game { n, rounds, matchings, expansion })
}

fn check_matching(n: usize, cut: &Bisection, m: &[(usize, usize)]) -> Result<()> {
    ensure!(m.len() * 2 == n, Invariant, "matching is not perfect");
    let a: BTreeSet<usize> = cut.a.iter().copied().collect();
    let mut seen = BTreeSet::new();
    for &(x, y) in m {
        ensure!(a.contains(&x) && !a.contains(&y), Invariant, "matching edge ({x}, {y}) does not cross the bisection");
        ensure!(seen.insert(x) && seen.insert(y), Invariant, "matching reuses a vertex");
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessRow {
    pub n: usize,
    pub player: MatchingPlayer,
    pub rounds: usize,
    pub games: usize,
    pub half_expanders: usize,
    pub min_expansion: f64,
    pub mean_expansion: f64,
}

impl HarnessRow {
    pub fn fraction(&self) -> f64 {
        self.half_expanders as f64 / self.games as f64
    }
}

/// Plays `games` games for every N and player, all from one random stream.
pub fn run_harness<R: Rng>(ns: &[usize], players: &[MatchingPlayer], games: usize, c_gamma: f64, rng: &mut R) -> Result<Vec<HarnessRow>> {
    let mut rows = vec![];
    for &n in ns {
        for &player in players {
            let rounds = krv_rounds(n, c_gamma);
            let (mut ok, mut min, mut sum) = (0, f64::INFINITY, 0.0);
            for _ in 0..games {
                let g = play_game(n, rounds, player, rng)?;
                ok += g.expansion.half_expander as usize;
                min = min.min(g.expansion.value);
                sum += g.expansion.value;
            }
            rows.push(HarnessRow { n, player, rounds, games, half_expanders: ok, min_expansion: min, mean_expansion: sum / games as f64 });
        }
    }
    Ok(rows)
}

/// An expander edge with its embedding path in G.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct XEdge {
    pub a: usize,
    pub b: usize,
    pub round: usize,
    /// Runs from a vertex of C_a to a vertex of C_b.
    pub path: Path,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedExpander {
    /// t_i for every expander vertex v_i.
    pub terminals: Vec<VertexId>,
    /// P_{t_i}: from t_i to its edge of Γ*₁.
    pub terminal_paths: Vec<Path>,
    /// Edge set of C_i = T_i ∪ P_{t_i}.
    pub components: Vec<Vec<EdgeId>>,
    pub edges: Vec<XEdge>,
    pub rounds: usize,
    pub expansion: Expansion,
    pub max_component_load: u32,
    pub embedding_congestion: u32,
}

impl EmbeddedExpander {
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0; self.terminals.len()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    pub fn component_vertices(&self, g: &MultiGraph, i: usize) -> VertexSet {
        let mut s = VertexSet::from([self.terminals[i]]);
        for &e in &self.components[i] {
            let (u, v) = g.ends(e);
            s.insert(u);
            s.insert(v);
        }
        s
    }
}

/// Builds X on 𝒯′ with one cut-matching round per good set, each matching
/// routed inside its set between the corresponding special edges.
pub fn krv_build<R: Rng>(g: &MultiGraph, fam: &GoodFamily, tf: &TreeFamily, terminals: &[VertexId], rng: &mut R) -> Result<EmbeddedExpander> {
    let k = tf.trees.len();
    let rounds = fam.sets.len();
    ensure!(k >= 2 && k.is_multiple_of(2), Precondition, "k′ = {k} must be even and positive");
    ensure!(terminals.len() == k, Precondition, "|𝒯′| = {} ≠ k′ = {k}", terminals.len());
    ensure!(tf.gamma_star.len() == rounds, Precondition, "tree family and good family disagree on γ");
    let links = connect_terminals(g, terminals, &tf.gamma_star[0])?.routed("terminal paths to Γ*₁")?;
    let index_of: BTreeMap<EdgeId, usize> = tf.gamma_star[0].iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut term = vec![VertexId::MAX; k];
    let mut terminal_paths = vec![Path::trivial(0); k];
    for l in links {
        let i = index_of[&l.to];
        term[i] = l.from;
        terminal_paths[i] = l.path;
    }
    let components: Vec<Vec<EdgeId>> = (0..k)
        .map(|i| {
            let mut s: BTreeSet<EdgeId> = tf.trees[i].iter().copied().collect();
            s.extend(terminal_paths[i].edges.iter().copied());
            s.into_iter().collect()
        })
        .collect();

    let mut cp = CutPlayer::new(k)?;
    let mut edges = vec![];
    for j in 0..rounds {
        let cut = cp.cut(rng);
        let a: Vec<EdgeId> = cut.a.iter().map(|&i| tf.gamma_star[j][i]).collect();
        let b: Vec<EdgeId> = cut.b.iter().map(|&i| tf.gamma_star[j][i]).collect();
        let owner: BTreeMap<EdgeId, usize> = tf.gamma_star[j].iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let routed = route_within(g, &fam.sets[j].set, &a, &b)?.routed(&format!("matching of round {j}"))?;
        let mut m = vec![];
        for l in routed {
            let (x, y) = (owner[&l.from], owner[&l.to]);
            m.push((x, y));
            edges.push(XEdge { a: x, b: y, round: j, path: l.path });
        }
        m.sort_unstable();
        check_matching(k, &cut, &m)?;
        cp.absorb(&m);
    }
    let xe: Vec<(usize, usize)> = edges.iter().map(|e| (e.a, e.b)).collect();
    let expansion = expansion(k, &xe);
    let mut emb = EmbeddedExpander {
        terminals: term,
        terminal_paths,
        components,
        edges,
        rounds,
        expansion,
        max_component_load: 0,
        embedding_congestion: 0,
    };
    let (cl, ec) = verify_embedding(g, &emb)?;
    emb.max_component_load = cl;
    emb.embedding_congestion = ec;
    Ok(emb)
}

/// Components are connected, hold their terminal and share each edge at
/// most 12 times; embedding paths join the right components with
/// congestion ≤ 2; X has degree ≤ the number of rounds.
pub fn verify_embedding(g: &MultiGraph, emb: &EmbeddedExpander) -> Result<(u32, u32)> {
    let k = emb.terminals.len();
    ensure!(emb.components.len() == k && emb.terminal_paths.len() == k, Verification, "embedding shape mismatch");
    let mut load: BTreeMap<EdgeId, u32> = BTreeMap::new();
    let mut comp_sets = vec![];
    for i in 0..k {
        let p = &emb.terminal_paths[i];
        p.validate(g)?;
        ensure!(p.first() == emb.terminals[i], Verification, "P_t{i} does not start at its terminal");
        let mut h = MultiGraph::new(g.vertex_bound());
        let verts = emb.component_vertices(g, i);
        for &e in &emb.components[i] {
            ensure!(g.has_edge(e), Verification, "C_{i} uses a missing edge");
            let (u, v) = g.ends(e);
            h.add_edge(u, v)?;
            *load.entry(e).or_default() += 1;
        }
        let comps = h.components();
        let with_t = comps.iter().find(|c| c.contains(&emb.terminals[i])).expect("terminal vertex exists");
        ensure!(verts.iter().all(|v| with_t.contains(v)), Verification, "C_{i} is not connected");
        comp_sets.push(verts);
    }
    let max_component_load = load.values().copied().max().unwrap_or(0);
    if let Some((e, c)) = load.iter().find(|(_, &c)| c > 12) {
        return Err(EdpError::Verification(format!("edge {e} lies in {c} components (limit 12)")));
    }
    let mut deg = vec![0usize; k];
    for e in &emb.edges {
        e.path.validate(g)?;
        ensure!(comp_sets[e.a].contains(&e.path.first()), Verification, "embedding of ({}, {}) starts outside C_{}", e.a, e.b, e.a);
        ensure!(comp_sets[e.b].contains(&e.path.last()), Verification, "embedding of ({}, {}) ends outside C_{}", e.a, e.b, e.b);
        deg[e.a] += 1;
        deg[e.b] += 1;
    }
    ensure!(deg.iter().all(|&d| d <= emb.rounds), Verification, "X has a vertex of degree above {}", emb.rounds);
    let paths: Vec<&Path> = emb.edges.iter().map(|e| &e.path).collect();
    let loads = edge_loads(paths);
    let congestion = loads.values().copied().max().unwrap_or(0);
    if let Some((e, c)) = loads.iter().find(|(_, &c)| c > 2) {
        return Err(EdpError::Verification(format!("edge {e} carries {c} embedding paths (limit 2)")));
    }
    Ok((max_component_load, congestion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::OracleConfig;
    use crate::expander::group_interfaces;
    use crate::family::{find_good_family, FamilyConfig};
    use crate::params::{ParamConfig, ParamTable, Profile};
    use crate::splitting::SplitConfig;
    use crate::testutil::grid_instance;
    use crate::trees::{build_trees, TreeConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_expansion(n: usize, edges: &[(usize, usize)]) -> (u64, u64) {
        let mut best = (u64::MAX, 1u64);
        for mask in 1u32..(1 << n) {
            let size = mask.count_ones() as u64;
            if 2 * size > n as u64 {
                continue;
            }
            let cut = edges.iter().filter(|&&(u, v)| ((mask >> u) & 1) != ((mask >> v) & 1)).count() as u64;
            if cut * best.1 < best.0 * size {
                best = (cut, size);
            }
        }
        best
    }

    #[test]
    fn two_vertices_one_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = play_game(2, 1, MatchingPlayer::Random, &mut rng).unwrap();
        assert_eq!(g.edges(), vec![(g.edges()[0].0, g.edges()[0].1)]);
        assert_eq!(g.expansion.worst, Some((1, 1)));
        assert!(g.expansion.half_expander);
    }

    #[test]
    fn cycle_expansion_by_hand() {
        // C_8: the best cut takes a 4-arc with 2 crossing edges, ratio 1/2.
        let edges: Vec<(usize, usize)> = (0..8).map(|i| (i, (i + 1) % 8)).collect();
        let (c, s) = exact_expansion(8, &edges).unwrap();
        assert_eq!(c * 2, s);
        assert!(expansion(8, &edges).half_expander);
        let path: Vec<(usize, usize)> = (0..7).map(|i| (i, i + 1)).collect();
        assert!(!expansion(8, &path).half_expander);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gray_code_matches_naive(n in 2usize..10, raw in proptest::collection::vec((0usize..10, 0usize..10), 0..30)) {
            let edges: Vec<(usize, usize)> = raw.into_iter().map(|(a, b)| (a % n, b % n)).filter(|(a, b)| a != b).collect();
            let (c, s) = exact_expansion(n, &edges).unwrap();
            let (c2, s2) = naive_expansion(n, &edges);
            prop_assert_eq!(c * s2, c2 * s);
        }

        #[test]
        fn players_return_perfect_crossing_matchings(seed in any::<u64>(), half in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2 * half;
            let mut cp = CutPlayer::new(n).unwrap();
            for player in [MatchingPlayer::Random, MatchingPlayer::Adversarial] {
                let cut = cp.cut(&mut rng);
                prop_assert_eq!(cut.a.len(), half);
                let m = player.respond(&cut, &mut rng);
                prop_assert!(check_matching(n, &cut, &m).is_ok());
                cp.absorb(&m);
            }
        }
    }

    #[test]
    fn rounds_formula() {
        assert_eq!(krv_rounds(8, 1.0), 9);
        assert_eq!(krv_rounds(12, 1.0), 13);
        assert_eq!(krv_rounds(16, 1.0), 16);
    }

    #[test]
    fn small_harness_mostly_expands() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = run_harness(&[8], &[MatchingPlayer::Random, MatchingPlayer::Adversarial], 20, 1.0, &mut rng).unwrap();
        for r in rows {
            assert!(r.fraction() >= 0.9, "{r:?}");
        }
    }

    #[test]
    fn desk_grid_embeds_expander() {
        let (g, terms) = grid_instance(12, 24);
        let t = ParamTable::new(24, &ParamConfig { profile: Profile::Desk, ..Default::default() });
        let c = FamilyConfig::from_params(&t, 200, 10, OracleConfig::default());
        let mut built = 0;
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fam = find_good_family(&g, &terms, &c, &mut rng).unwrap().family;
            let ig = group_interfaces(&g, &fam, t.p, t.k_star).unwrap();
            let cfg = TreeConfig { ell: t.ell(), sigma: t.sigma, k_prime: t.k_prime, split: SplitConfig { pairs: None, fresh_check: false } };
            let Ok((tf, _)) = build_trees(&g, &fam, &ig, &cfg) else { continue };
            let tp: Vec<VertexId> = terms[..t.k_prime as usize].to_vec();
            match krv_build(&g, &fam, &tf, &tp, &mut rng) {
                Ok(emb) => {
                    built += 1;
                    assert_eq!(emb.edges.len(), 2 * 2);
                    assert!(emb.max_degree() <= 2);
                    assert!(emb.max_component_load <= 12 && emb.embedding_congestion <= 2);
                    for i in 0..4 {
                        assert!(emb.component_vertices(&g, i).contains(&emb.terminals[i]));
                    }
                }
                Err(EdpError::Verification(m)) => eprintln!("seed {seed}: {m}"),
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
        assert!(built >= 3, "only {built} of 6 seeds embedded");
    }
}
