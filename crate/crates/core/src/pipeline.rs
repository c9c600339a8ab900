//! End-to-end routing run: normalization, LP, decomposition into
//! sub-instances, expander construction on each, routing and verification.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cut::OracleConfig;
use crate::error::{ensure, EdpError, Result};
use crate::expander::{group_interfaces, verify_interfaces};
use crate::family::{audit_holds, find_good_family, verify_good_family, FamilyConfig, RoundOutcome};
use crate::graph::{MultiGraph, Path, VertexId};
use crate::instance::{lp_value, normalize, partition_flow_well_linked, select_pairs, spot_check_flow_well_linked, Instance, SubInstance};
use crate::krv::{krv_build, EmbeddedExpander};
use crate::params::{beta_of, ParamConfig, ParamTable};
use crate::route::{expander_graph, greedy_route, translate, verify_routing};
use crate::splitting::SplitConfig;
use crate::trees::{build_trees, verify_tree_family, z_capacity_ok, TreeConfig};
use crate::welllinked::charge_bound_holds;

pub const CONGESTION_LIMIT: u32 = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub eps: f64,
    pub params: ParamConfig,
    pub oracle: OracleConfig,
    /// Attempts per sub-instance, and sampling attempts inside the good-family search.
    pub retry_budget: usize,
    pub wl_spotchecks: usize,
    pub wl_cluster_spotchecks: usize,
    /// Cap on shortest-path calls of the LP; unbounded when `None`.
    pub lp_max_calls: Option<u64>,
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            eps: 0.05,
            params: ParamConfig::default(),
            oracle: OracleConfig::default(),
            retry_budget: 200,
            wl_spotchecks: 20,
            wl_cluster_spotchecks: 10,
            lp_max_calls: Some(20_000),
            timings: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub stage: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubMode {
    /// Parameters infeasible: one pair routed on a shortest path.
    Trivial,
    Expander,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpanderSummary {
    pub family_rounds: usize,
    /// (|out(A)|, Σ_W |out(W)|) for every well-linked decomposition run.
    pub decompositions: Vec<(usize, usize)>,
    pub k_prime: usize,
    pub x_edges: usize,
    pub x_max_degree: usize,
    pub expansion: f64,
    pub half_expander: bool,
    pub ell: usize,
    pub greedy_routed: usize,
    pub greedy_bound: usize,
    pub splits: usize,
    pub split_pair_checks: usize,
    /// ℓ of the tree stage and the capacities of the edges of Z.
    pub tree_ell: u64,
    pub z_capacities: Vec<u64>,
    /// T* as (parent, child) pairs of good-set indices.
    pub t_star: Vec<(usize, usize)>,
    pub max_tree_load: u32,
    pub max_component_load: u32,
    pub embedding_congestion: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubReport {
    pub vertices: usize,
    pub pairs: usize,
    pub selected: Vec<usize>,
    pub params: ParamTable,
    pub mode: SubMode,
    pub spot_check: (usize, usize),
    pub attempts: usize,
    /// Error of every failed attempt, in order.
    pub failures: Vec<String>,
    pub expander: Option<ExpanderSummary>,
    /// Pair indices (into the input) routed by this sub-instance.
    pub routed: Vec<usize>,
    pub congestion: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutedPath {
    pub pair: usize,
    pub source: VertexId,
    pub sink: VertexId,
    pub path: Path,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    /// Graph in the edge-list text format.
    pub graph: String,
    pub demands: Vec<(VertexId, VertexId)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub input: InputEcho,
    pub normalized_vertices: usize,
    pub normalized_edges: usize,
    pub lp_primal: f64,
    pub lp_dual: f64,
    pub lp_converged: bool,
    pub lp_calls: u64,
    pub subinstances: Vec<SubReport>,
    pub routing: Vec<RoutedPath>,
    pub routed: usize,
    pub congestion: u32,
    pub histogram: BTreeMap<u32, usize>,
    pub routed_over_lp: f64,
    pub retries: usize,
    pub checks: Vec<Check>,
    /// Seconds per stage; present only when requested.
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Prefixes an error message with the stage that raised it.
pub fn tag(stage: &str, e: EdpError) -> EdpError {
    let p = |m: String| format!("[{stage}] {m}");
    match e {
        EdpError::Malformed(m) => EdpError::Malformed(p(m)),
        EdpError::Precondition(m) => EdpError::Precondition(p(m)),
        EdpError::DegenerateCut(m) => EdpError::DegenerateCut(p(m)),
        EdpError::Verification(m) => EdpError::Verification(p(m)),
        EdpError::Invariant(m) => EdpError::Invariant(p(m)),
        EdpError::Stochastic(m) => EdpError::Stochastic(p(m)),
        other => other,
    }
}

struct Timer {
    on: bool,
    acc: BTreeMap<String, f64>,
}

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| tag(stage, e));
        if self.on {
            *self.acc.entry(stage.to_string()).or_default() += start.elapsed().as_secs_f64();
        }
        out
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, stage: &str, name: &str, passed: bool, detail: impl Into<String>) {
        self.0.push(Check { stage: stage.into(), name: name.into(), passed, detail: detail.into() });
    }
}

/// One attempt of the expander stages on a sub-instance: the routed pairs
/// as (pair index, path in the normalized graph).
struct Attempt {
    paths: Vec<(usize, Path)>,
    summary: ExpanderSummary,
    checks: Vec<Check>,
}

fn retryable(e: &EdpError) -> bool {
    matches!(e, EdpError::Verification(_) | EdpError::Stochastic(_) | EdpError::Invariant(_))
}

pub fn run_pipeline(raw: &Instance, cfg: &RunConfig) -> Result<RunReport> {
    ensure!(cfg.eps > 0.0 && cfg.eps < 1.0, Precondition, "ε = {} must lie in (0, 1)", cfg.eps);
    ensure!(cfg.retry_budget >= 1, Precondition, "retry budget must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut timer = Timer { on: cfg.timings, acc: BTreeMap::new() };
    let mut checks = Checks(vec![]);

    let norm = timer.time("normalize", || normalize(raw))?;
    let inst = &norm.instance;
    checks.add("normalize", "terminals have degree 1 and are distinct", inst.is_normalized(), "");
    let lp = timer.time("lp", || lp_value(inst, cfg.eps, cfg.lp_max_calls))?;
    checks.add("lp", "primal ≤ dual", lp.primal <= lp.dual + 1e-9, format!("{} ≤ {}", lp.primal, lp.dual));
    let subs = timer.time("partition", || partition_flow_well_linked(inst, &lp.per_pair))?;

    let mut reports = vec![];
    let mut norm_paths: Vec<(usize, Path)> = vec![];
    let mut retries = 0;
    for (si, sub) in subs.iter().enumerate() {
        let (rep, paths) = run_sub(si, inst, sub, cfg, &mut rng, &mut timer, &mut checks)?;
        retries += rep.attempts.saturating_sub(1);
        reports.push(rep);
        norm_paths.extend(paths);
    }
    norm_paths.sort_by_key(|(i, _)| *i);

    let triples: Vec<(VertexId, VertexId, Path)> =
        norm_paths.iter().map(|(i, p)| (inst.pairs[*i].0, inst.pairs[*i].1, p.clone())).collect();
    let nc = timer.time("verify", || verify_routing(&inst.graph, &inst.pairs, &triples, CONGESTION_LIMIT))?;
    checks.add("verify", "normalized routing congestion ≤ 14", nc.congestion <= CONGESTION_LIMIT, format!("{}", nc.congestion));

    let routing: Vec<RoutedPath> = norm_paths
        .iter()
        .map(|(i, p)| {
            let mut q = norm.path_back(p);
            let (s, t) = raw.pairs[*i];
            if q.first() != s {
                q = q.reversed();
            }
            RoutedPath { pair: *i, source: s, sink: t, path: q }
        })
        .collect();
    let triples: Vec<(VertexId, VertexId, Path)> = routing.iter().map(|r| (r.source, r.sink, r.path.clone())).collect();
    let oc = timer.time("verify", || verify_routing(&raw.graph, &raw.pairs, &triples, CONGESTION_LIMIT))?;
    checks.add(
        "verify",
        "mapping back does not raise congestion",
        oc.congestion <= nc.congestion,
        format!("{} → {}", nc.congestion, oc.congestion),
    );
    checks.add("verify", "congestion ≤ 14", oc.congestion <= CONGESTION_LIMIT, format!("{}", oc.congestion));

    Ok(RunReport {
        config: cfg.clone(),
        input: InputEcho { graph: raw.graph.to_text(), demands: raw.pairs.clone() },
        normalized_vertices: inst.graph.vertex_count(),
        normalized_edges: inst.graph.edge_count(),
        lp_primal: lp.primal,
        lp_dual: lp.dual,
        lp_converged: lp.converged,
        lp_calls: lp.shortest_path_calls,
        subinstances: reports,
        routed: routing.len(),
        routing,
        congestion: oc.congestion,
        histogram: oc.histogram,
        routed_over_lp: if lp.primal > 0.0 { oc.routed as f64 / lp.primal } else { 0.0 },
        retries,
        checks: checks.0,
        timings: cfg.timings.then_some(timer.acc),
    })
}

fn run_sub(
    si: usize,
    inst: &Instance,
    sub: &SubInstance,
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
    timer: &mut Timer,
    checks: &mut Checks,
) -> Result<(SubReport, Vec<(usize, Path)>)> {
    let stage = format!("sub{si}");
    let h = inst.graph.induced(&sub.vertices)?;
    let sel = timer.time("select", || select_pairs(inst, sub))?;
    let terminals: Vec<VertexId> = sel.pairs.iter().flat_map(|&i| [inst.pairs[i].0, inst.pairs[i].1]).collect();
    let spot = timer.time("spot-check", || spot_check_flow_well_linked(&h, &terminals, cfg.wl_spotchecks, rng))?;
    checks.add(
        &stage,
        "flow-well-linked spot-check",
        spot.passed == spot.trials,
        format!("{}/{} matchings routed with congestion 2", spot.passed, spot.trials),
    );
    let params = ParamTable::new(sel.pairs.len() as u64, &cfg.params);
    let mut rep = SubReport {
        vertices: sub.vertices.len(),
        pairs: sub.pairs.len(),
        selected: sel.pairs.clone(),
        params: params.clone(),
        mode: SubMode::Trivial,
        spot_check: (spot.passed, spot.trials),
        attempts: 0,
        failures: vec![],
        expander: None,
        routed: vec![],
        congestion: 0,
    };

    if !params.feasible() {
        let i = sel.pairs.first().or(sub.pairs.first()).copied().expect("sub-instances hold pairs");
        let (s, t) = inst.pairs[i];
        let p = h
            .bfs_path(s, t, None, None)
            .ok_or_else(|| EdpError::Invariant(format!("[{stage}] pair {i} is disconnected inside its sub-instance")))?;
        rep.routed = vec![i];
        rep.congestion = 1;
        rep.attempts = 1;
        return Ok((rep, vec![(i, p)]));
    }

    rep.mode = SubMode::Expander;
    let mut last = None;
    for _ in 0..cfg.retry_budget {
        rep.attempts += 1;
        match attempt(&h, inst, &sel.pairs, &params, cfg, rng, timer) {
            Ok(a) => {
                let demands: Vec<(VertexId, VertexId)> = sub.pairs.iter().map(|&i| inst.pairs[i]).collect();
                let triples: Vec<_> = a.paths.iter().map(|(i, p)| (inst.pairs[*i].0, inst.pairs[*i].1, p.clone())).collect();
                let rc = timer.time("verify", || verify_routing(&h, &demands, &triples, CONGESTION_LIMIT))?;
                for mut c in a.checks {
                    c.stage = format!("{stage}/{}", c.stage);
                    checks.0.push(c);
                }
                rep.routed = a.paths.iter().map(|(i, _)| *i).collect();
                rep.congestion = rc.congestion;
                rep.expander = Some(a.summary);
                return Ok((rep, a.paths));
            }
            Err(e) if retryable(&e) => {
                rep.failures.push(e.to_string());
                last = Some(e);
            }
            Err(e) => return Err(tag(&stage, e)),
        }
    }
    let e = last.expect("at least one attempt");
    Err(EdpError::Stochastic(format!("[{stage}] retry budget of {} exhausted; last failure: {e}", cfg.retry_budget)))
}

fn attempt(
    h: &MultiGraph,
    inst: &Instance,
    selected: &[usize],
    t: &ParamTable,
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
    timer: &mut Timer,
) -> Result<Attempt> {
    let mut checks = Checks(vec![]);
    let terminals: Vec<VertexId> = selected.iter().flat_map(|&i| [inst.pairs[i].0, inst.pairs[i].1]).collect();
    let fcfg = FamilyConfig::from_params(t, cfg.retry_budget, cfg.wl_cluster_spotchecks, cfg.oracle);
    let run = timer.time("good-family", || find_good_family(h, &terminals, &fcfg, rng))?;
    let fam = &run.family;
    timer.time("good-family", || verify_good_family(h, &terminals, fam, t.k1, t.eta_capped()))?;
    checks.add("good-family", "γ disjoint good sets with k1 routed interface edges", true, format!("{} sets", fam.sets.len()));
    for (r, round) in run.rounds.iter().enumerate() {
        if let RoundOutcome::Contracted(a) = &round.outcome {
            checks.add("good-family", "contraction edge audit", audit_holds(a, t.gamma), format!("round {r}: {} → {}", a.edges_before, a.edges_after));
        }
    }
    let decompositions: Vec<(usize, usize)> = run.rounds.iter().flat_map(|r| r.decompositions.iter().copied()).collect();
    let charge_ok = decompositions.iter().all(|&(out, sum)| charge_bound_holds(sum, out, t.gamma));
    checks.add("good-family", "Σ|out(W)| ≤ |out(S)|(1 + 1/(64γ))", charge_ok, format!("{} decompositions", decompositions.len()));

    let ig = timer.time("grouping", || group_interfaces(h, fam, t.p, t.k_star))?;
    timer.time("grouping", || verify_interfaces(h, fam, &ig))?;
    checks.add("grouping", "p ≤ w ≤ 3p with edge-disjoint group trees", true, format!("p = {}", t.p));

    let tcfg = TreeConfig { ell: t.ell(), sigma: t.sigma, k_prime: t.k_prime, split: SplitConfig { pairs: None, fresh_check: false } };
    let (tf, tr) = timer.time("trees", || build_trees(h, fam, &ig, &tcfg))?;
    let load = timer.time("trees", || verify_tree_family(h, &ig, &tf))?;
    checks.add("trees", "splitting preserves λ for checked pairs", true, format!("{} pair checks over {} splits", tr.pair_checks, tr.splits));
    checks.add("trees", "Z capacities within [(1 − 1/γ²)ℓ, ℓ]", z_capacity_ok(&tr.z, t.gamma, tr.ell), format!("{:?}", tr.z.capacity));
    let mut deg = vec![0usize; fam.sets.len()];
    for &(a, b) in &tr.t_star {
        deg[a] += 1;
        deg[b] += 1;
    }
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    checks.add("trees", "T* has degree ≤ 3", max_deg <= 3, format!("{max_deg}"));
    checks.add("trees", "each edge in ≤ 8 trees", load <= 8, format!("{load}"));

    let half = (t.k_prime / 2) as usize;
    let tprime: Vec<VertexId> = terminals[..2 * half].to_vec();
    let emb: EmbeddedExpander = timer.time("expander", || krv_build(h, fam, &tf, &tprime, rng))?;
    checks.add("expander", "each edge in ≤ 12 components", emb.max_component_load <= 12, format!("{}", emb.max_component_load));
    checks.add("expander", "embedding congestion ≤ 2", emb.embedding_congestion <= 2, format!("{}", emb.embedding_congestion));

    let x = expander_graph(&emb)?;
    let index: BTreeMap<VertexId, usize> = emb.terminals.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let xpairs: Vec<(VertexId, VertexId)> = selected[..half]
        .iter()
        .map(|&i| (index[&inst.pairs[i].0] as VertexId, index[&inst.pairs[i].1] as VertexId))
        .collect();
    let ell = 4 * x.max_degree() * beta_of(x.vertex_count() as u64, cfg.params.c_beta) as usize;
    let gr = timer.time("route", || greedy_route(&x, &xpairs, ell, emb.expansion.half_expander))?;
    let xp: Vec<Path> = gr.steps.iter().map(|s| s.path.clone()).collect();
    let rr = timer.time("route", || translate(h, &emb, &xp))?;
    checks.add("route", "embedding segments ≤ 2 per edge", rr.embedding_congestion <= 2, format!("{}", rr.embedding_congestion));
    checks.add("route", "component segments ≤ 12 per edge", rr.component_congestion <= 12, format!("{}", rr.component_congestion));
    if emb.expansion.half_expander {
        checks.add("route", "greedy routes ≥ ⌊n/(8d(ℓ+1))⌋", gr.steps.len() >= gr.lower_bound, format!("{} ≥ {}", gr.steps.len(), gr.lower_bound));
    }

    let mut paths = vec![];
    for (step, rp) in gr.steps.iter().zip(&rr.routed) {
        let i = selected[step.pair];
        let (s, _) = inst.pairs[i];
        let p = if rp.path.first() == s { rp.path.clone() } else { rp.path.reversed() };
        paths.push((i, p));
    }
    Ok(Attempt {
        paths,
        summary: ExpanderSummary {
            family_rounds: run.rounds.len(),
            decompositions: decompositions.clone(),
            k_prime: t.k_prime as usize,
            x_edges: emb.edges.len(),
            x_max_degree: x.max_degree(),
            expansion: emb.expansion.value,
            half_expander: emb.expansion.half_expander,
            ell,
            greedy_routed: gr.steps.len(),
            greedy_bound: gr.lower_bound,
            splits: tr.splits,
            split_pair_checks: tr.pair_checks,
            tree_ell: tr.ell,
            z_capacities: tr.z.capacity.clone(),
            t_star: tr.t_star.clone(),
            max_tree_load: load,
            max_component_load: emb.max_component_load,
            embedding_congestion: emb.embedding_congestion,
        },
        checks: checks.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{cube_connected_cycles, grid, random_pairs};
    use crate::params::Profile;

    fn instance(g: MultiGraph, k: usize, seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = random_pairs(&g, k, &mut rng).unwrap();
        Instance::new(g, pairs).unwrap()
    }

    fn desk(seed: u64) -> RunConfig {
        RunConfig { seed, params: ParamConfig { profile: Profile::Desk, ..Default::default() }, ..Default::default() }
    }

    #[test]
    fn formula_profile_falls_back_to_one_pair_per_part() {
        let inst = instance(grid(8, 8), 12, 1);
        let r = run_pipeline(&inst, &RunConfig::default()).unwrap();
        assert!(r.all_passed());
        assert!(r.subinstances.iter().all(|s| s.mode == SubMode::Trivial && s.routed.len() <= 1));
        assert!(r.routed >= 1 && r.congestion == 1);
        assert_eq!(r.routed, r.routing.len());
        for p in &r.routing {
            assert_eq!((p.path.first(), p.path.last()), inst.pairs[p.pair]);
        }
    }

    #[test]
    fn desk_profile_routes_through_the_expander() {
        let inst = instance(cube_connected_cycles(6), 128, 3);
        let r = run_pipeline(&inst, &desk(0)).unwrap();
        assert!(r.all_passed(), "{:?}", r.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        let x = r.subinstances.iter().find_map(|s| s.expander.as_ref()).expect("an expander-mode part");
        assert!(x.k_prime >= 2 && x.max_tree_load <= 8 && x.embedding_congestion <= 2);
        assert!(r.congestion <= CONGESTION_LIMIT);
        assert!(r.lp_primal <= r.lp_dual + 1e-9);
    }

    #[test]
    fn fixed_seed_fixes_the_report() {
        let inst = instance(cube_connected_cycles(5), 64, 4);
        let a = run_pipeline(&inst, &desk(7)).unwrap().to_json();
        let b = run_pipeline(&inst, &desk(7)).unwrap().to_json();
        assert_eq!(a, b);
        assert!(a.ends_with('\n'));
    }

    #[test]
    fn timings_only_when_requested() {
        let inst = instance(grid(6, 6), 6, 2);
        assert!(run_pipeline(&inst, &RunConfig::default()).unwrap().timings.is_none());
        let t = run_pipeline(&inst, &RunConfig { timings: true, ..Default::default() }).unwrap().timings.unwrap();
        assert!(t.contains_key("lp") && t.contains_key("verify"));
    }
}
