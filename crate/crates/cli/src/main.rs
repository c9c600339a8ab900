use std::collections::BTreeSet;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use edp::cut::{OracleConfig, OracleMode};
use edp::error::EdpError;
use edp::graph::{edge_loads, parse_text, MultiGraph, Path, VertexId, VertexSet};
use edp::instance::Instance;
use edp::krv::{play_game, run_harness, krv_rounds, MatchingPlayer};
use edp::params::{beta_of, ParamConfig, ParamTable, Profile};
use edp::pipeline::{run_pipeline, RunConfig, CONGESTION_LIMIT};
use edp::route::greedy_route;
use edp::spectral::{certifies_half_expansion, SmallGraph};
use edp::welllinked::decompose_bounded;

#[derive(Parser)]
#[command(name = "edp", version, about = "Edge-disjoint paths with constant congestion")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, env = "CR_SEED", default_value_t = 0, global = true)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Route a demand set and print the run report as JSON.
    Route {
        graph: PathBuf,
        demands: PathBuf,
        #[command(flatten)]
        opts: RouteOpts,
        /// Write the report here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Play cut-matching games on N vertices and report the expansion.
    KrvGame {
        #[arg(short = 'n', default_value_t = 16)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Player::Random)]
        player: Player,
        #[arg(long, default_value_t = 1)]
        games: usize,
        #[arg(long, default_value_t = 1.0)]
        gamma_const: f64,
        /// Run the full harness: N in {8, 12, 16}, both players, 200 games each.
        #[arg(long)]
        krv_harness: bool,
    },
    /// Split a vertex set into well-linked clusters.
    Decompose {
        graph: PathBuf,
        /// File with the vertex ids of S.
        #[arg(long)]
        set: PathBuf,
        /// Boundary bound k; defaults to |out(S)|.
        #[arg(long)]
        k: Option<u64>,
        #[command(flatten)]
        params: ParamOpts,
        #[arg(long, value_enum, default_value_t = OracleArg::Auto)]
        cut_oracle: OracleArg,
    },
    /// Recheck a run report against its embedded input.
    Verify { report: PathBuf },
    /// Greedy short-path routing on an expander given as graph plus demands.
    RouteExpander {
        graph: PathBuf,
        /// Path length bound; defaults to 4·d·β(n).
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        beta_const: f64,
    },
}

#[derive(Args)]
struct ParamOpts {
    #[arg(long, value_enum, default_value_t = ProfileArg::Paper)]
    profile: ProfileArg,
    #[arg(long, default_value_t = 1.0)]
    gamma_const: f64,
    #[arg(long, default_value_t = 1.0)]
    beta_const: f64,
    /// Fixed α_ARV instead of ⌈log₂ k⌉.
    #[arg(long)]
    alpha_arv: Option<u32>,
}

impl ParamOpts {
    fn config(&self) -> ParamConfig {
        ParamConfig {
            profile: match self.profile {
                ProfileArg::Paper => Profile::Paper,
                ProfileArg::Desk => Profile::Desk,
            },
            c_gamma: self.gamma_const,
            c_beta: self.beta_const,
            alpha_arv: self.alpha_arv,
        }
    }
}

#[derive(Args)]
struct RouteOpts {
    #[command(flatten)]
    params: ParamOpts,
    #[arg(long, value_enum, default_value_t = OracleArg::Auto)]
    cut_oracle: OracleArg,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 200)]
    retry_budget: usize,
    #[arg(long, default_value_t = 20)]
    wl_spotchecks: usize,
    #[arg(long, default_value_t = 10)]
    wl_cluster_spotchecks: usize,
    /// Cap on LP shortest-path calls; 0 means no cap.
    #[arg(long, default_value_t = 20_000)]
    lp_max_calls: u64,
    /// Record per-stage wall time in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Paper,
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Exact,
    Spectral,
    Auto,
}

impl OracleArg {
    fn config(self) -> OracleConfig {
        let mode = match self {
            OracleArg::Exact => OracleMode::Exact,
            OracleArg::Spectral => OracleMode::Spectral,
            OracleArg::Auto => OracleMode::Auto,
        };
        OracleConfig { mode, ..OracleConfig::default() }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Player {
    Random,
    Adversarial,
}

impl From<Player> for MatchingPlayer {
    fn from(p: Player) -> Self {
        match p {
            Player::Random => MatchingPlayer::Random,
            Player::Adversarial => MatchingPlayer::Adversarial,
        }
    }
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl From<EdpError> for Failure {
    fn from(e: EdpError) -> Self {
        Failure { code: e.exit_code() as u8, msg: e.to_string() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure { code: 4, msg: format!("{e:#}") }
    }
}

fn verification(msg: String) -> Failure {
    Failure { code: 2, msg }
}

fn read(path: &FsPath) -> anyhow::Result<String> {
    use anyhow::Context;
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_graph(path: &FsPath) -> Result<(MultiGraph, Vec<(VertexId, VertexId)>), Failure> {
    let t = parse_text(&read(path)?)?;
    let g = t.graph.ok_or_else(|| EdpError::Malformed(format!("{} has no `p` line", path.display())))?;
    Ok((g, t.demands))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(v).map_err(|e| verification(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn route(seed: u64, graph: &FsPath, demands: &FsPath, o: &RouteOpts, out: Option<&FsPath>) -> Result<(), Failure> {
    let (g, mut pairs) = load_graph(graph)?;
    pairs.extend(parse_text(&read(demands)?)?.demands);
    let inst = Instance::new(g, pairs)?;
    let cfg = RunConfig {
        seed,
        eps: o.eps,
        params: o.params.config(),
        oracle: o.cut_oracle.config(),
        retry_budget: o.retry_budget,
        wl_spotchecks: o.wl_spotchecks,
        wl_cluster_spotchecks: o.wl_cluster_spotchecks,
        lp_max_calls: (o.lp_max_calls > 0).then_some(o.lp_max_calls),
        timings: o.timings,
    };
    let report = run_pipeline(&inst, &cfg)?;
    let json = report.to_json();
    match out {
        Some(p) => fs::write(p, &json).map_err(anyhow::Error::from)?,
        None => print!("{json}"),
    }
    if !report.all_passed() {
        let failed: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| format!("{}/{}", c.stage, c.name)).collect();
        return Err(verification(format!("failed checks: {}", failed.join(", "))));
    }
    Ok(())
}

fn krv_game(seed: u64, n: usize, player: Player, games: usize, c_gamma: f64, harness: bool) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if harness {
        let players = [MatchingPlayer::Random, MatchingPlayer::Adversarial];
        let rows = run_harness(&[8, 12, 16], &players, 200, c_gamma, &mut rng)?;
        print_json(&rows)?;
        if let Some(r) = rows.iter().find(|r| r.fraction() < 0.95) {
            return Err(verification(format!("N = {} {:?}: {:.3} of games were half-expanders", r.n, r.player, r.fraction())));
        }
        return Ok(());
    }
    let rounds = krv_rounds(n, c_gamma);
    let results: Vec<_> = (0..games)
        .map(|_| play_game(n, rounds, player.into(), &mut rng).map(|g| g.expansion))
        .collect::<Result<_, _>>()?;
    print_json(&serde_json::json!({ "n": n, "rounds": rounds, "games": results }))
}

fn decompose(g_path: &FsPath, set: &FsPath, k: Option<u64>, p: &ParamOpts, oracle: OracleArg) -> Result<(), Failure> {
    let (g, _) = load_graph(g_path)?;
    let mut s = VertexSet::new();
    for tok in read(set)?.lines().map(|l| l.split('#').next().unwrap_or("")).flat_map(str::split_whitespace) {
        let v: VertexId = tok.parse().map_err(|_| EdpError::Malformed(format!("bad vertex id `{tok}`")))?;
        s.insert(v);
    }
    let k = k.unwrap_or(g.out_edges(&s)?.len() as u64).max(1);
    let table = ParamTable::new(k, &p.config());
    let d = decompose_bounded(&g, &s, k, table.alpha, Some(table.gamma), &oracle.config())?;
    print_json(&d)
}

fn route_expander(path: &FsPath, ell: Option<usize>, c_beta: f64) -> Result<(), Failure> {
    let (x, pairs) = load_graph(path)?;
    let small = SmallGraph { n: x.vertex_count(), edges: x.edges().map(|e| x.ends(e)).map(|(u, v)| (u as usize, v as usize)).collect() };
    let expander = certifies_half_expansion(&small);
    let ell = ell.unwrap_or(4 * x.max_degree() * beta_of(x.vertex_count() as u64, c_beta) as usize);
    let r = greedy_route(&x, &pairs, ell, expander)?;
    print_json(&serde_json::json!({ "certified_expander": expander, "result": r }))
}

/// Rechecks a report from its embedded input using only the graph and path
/// primitives: path validity, simplicity, one path per pair, endpoints
/// matching the demand, and the congestion bound.
fn verify(path: &FsPath) -> Result<(), Failure> {
    let v: serde_json::Value = serde_json::from_str(&read(path)?).map_err(|e| EdpError::Malformed(format!("report: {e}")))?;
    let field = |name: &str| v.get(name).ok_or_else(|| EdpError::Malformed(format!("report lacks `{name}`")));
    let graph_text = field("input")?
        .get("graph")
        .and_then(|t| t.as_str())
        .ok_or_else(|| EdpError::Malformed("report lacks input.graph".into()))?;
    let g = parse_text(graph_text)?.graph.ok_or_else(|| EdpError::Malformed("embedded graph has no `p` line".into()))?;
    let demands: Vec<(VertexId, VertexId)> =
        serde_json::from_value(field("input")?["demands"].clone()).map_err(|e| EdpError::Malformed(format!("demands: {e}")))?;
    let routing = field("routing")?.as_array().ok_or_else(|| EdpError::Malformed("routing is not a list".into()))?;

    let mut seen = BTreeSet::new();
    let mut paths: Vec<Path> = vec![];
    for (i, r) in routing.iter().enumerate() {
        let pair = r["pair"].as_u64().ok_or_else(|| EdpError::Malformed(format!("routing[{i}] lacks pair")))? as usize;
        let p: Path = serde_json::from_value(r["path"].clone()).map_err(|e| EdpError::Malformed(format!("routing[{i}].path: {e}")))?;
        let &(s, t) = demands.get(pair).ok_or_else(|| verification(format!("routing[{i}] names unknown pair {pair}")))?;
        p.validate(&g).map_err(|e| verification(format!("routing[{i}]: {e}")))?;
        if !p.is_simple() {
            return Err(verification(format!("routing[{i}] is not a simple path")));
        }
        if !((p.first(), p.last()) == (s, t) || (p.first(), p.last()) == (t, s)) {
            return Err(verification(format!("routing[{i}] does not join {s} and {t}")));
        }
        if !seen.insert(pair) {
            return Err(verification(format!("pair {pair} routed twice")));
        }
        paths.push(p);
    }
    let congestion = edge_loads(&paths).values().copied().max().unwrap_or(0);
    if congestion > CONGESTION_LIMIT {
        return Err(verification(format!("congestion {congestion} exceeds {CONGESTION_LIMIT}")));
    }
    if let Some(c) = v.get("congestion").and_then(|c| c.as_u64()) {
        if c != congestion as u64 {
            return Err(verification(format!("report claims congestion {c}, recomputed {congestion}")));
        }
    }
    if let Some(c) = v.get("routed").and_then(|c| c.as_u64()) {
        if c as usize != paths.len() {
            return Err(verification(format!("report claims {c} routed pairs, found {}", paths.len())));
        }
    }
    println!("ok: {} of {} pairs routed, congestion {congestion}", paths.len(), demands.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Route { graph, demands, opts, out } => route(cli.seed, graph, demands, opts, out.as_deref()),
        Cmd::KrvGame { n, player, games, gamma_const, krv_harness } => {
            krv_game(cli.seed, *n, *player, *games, *gamma_const, *krv_harness)
        }
        Cmd::Decompose { graph, set, k, params, cut_oracle } => decompose(graph, set, *k, params, *cut_oracle),
        Cmd::Verify { report } => verify(report),
        Cmd::RouteExpander { graph, ell, beta_const } => route_expander(graph, *ell, *beta_const),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("edp: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
