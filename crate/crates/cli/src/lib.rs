//! `kprice` command-line front end.
//!
//! Every command writes its outputs into `--out` together with a
//! `manifest.json` recording the full parameter set, the seed, the tool
//! version and a SHA-256 digest of each output. `kprice rerun` replays a
//! manifest and compares digests.

pub mod io;
pub mod manifest;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kprice_core::combi::{enumerate_vertices_with, minimize_alpha2_with, TruthfulRule};
use kprice_core::equilibrium::{four_price_formula, three_price_formula};
use kprice_core::order_stats::{check_alternating_sum, check_beta_integral, IDENTITY_LIMIT};
use kprice_core::payoff::{payoff_curve, SearchConfig};
use kprice_core::sim::{run_with_trace, Deviation};
use kprice_core::{
    check_existence, solve_closed_form, verify_equilibrium, verify_truthfulness, Auction,
    Distribution, Grid, Rational, Simulation, Strategy64,
};
use serde::{Deserialize, Serialize};

use crate::io::{parse_distribution, read_bid_table, read_coefficients, write_json, write_pairs};
use crate::manifest::RunManifest;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(
    name = "kprice",
    version,
    about = "Equilibria, verification and simulation of k-price auctions"
)]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Tabulate the closed-form equilibrium and check that it is increasing.
    Equilibrium(EquilibriumArgs),
    /// Best-response check of a strategy, or truthfulness of a combination rule.
    Verify(VerifyArgs),
    /// Monte Carlo estimate of revenue, payoffs and deviation gains.
    Simulate(SimulateArgs),
    /// Expected payoff of one bidder as a function of their bid.
    PayoffCurve(PayoffCurveArgs),
    /// Coefficient vectors for which truthful bidding is an equilibrium.
    TruthfulCoeffs(TruthfulCoeffsArgs),
    /// Exact rational checks of the order-statistic integral identities.
    Identities(IdentitiesArgs),
    /// Replay a run manifest and compare output digests.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EquilibriumArgs {
    /// Valuation distribution: uniform, poly:A, exp:R or table:PATH.
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Rows in the strategy table.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub dist: String,
    /// Number of bidders (taken from the coefficient file if omitted there).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, conflicts_with = "alphas")]
    pub k: Option<usize>,
    /// Coefficient JSON `{"n": .., "alphas": [..]}`; checks truthful bidding.
    #[arg(long)]
    pub alphas: Option<PathBuf>,
    /// Candidate strategy: equilibrium, truthful, linear:S, kprice:K,
    /// three-price, four-price or table:PATH (CSV `v,bid`).
    #[arg(long, default_value = "equilibrium")]
    pub strategy: String,
    /// Allowed deviation gain relative to the largest payoff on the grid.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Valuations checked, at quantiles i/(points+1).
    #[arg(long, default_value_t = 9)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, conflicts_with = "alphas", required_unless_present = "alphas")]
    pub k: Option<usize>,
    #[arg(long)]
    pub alphas: Option<PathBuf>,
    /// One strategy for everyone, or one per bidder (default: equilibrium
    /// for k-price, truthful for combinations).
    #[arg(long)]
    pub strategy: Vec<String>,
    #[arg(long, default_value_t = 1_000_000)]
    pub rounds: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = kprice_core::montecarlo::DEFAULT_SHARDS)]
    pub shards: usize,
    /// Alternative strategy for one bidder, evaluated on the same draws.
    #[arg(long)]
    pub deviation: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub deviation_bidder: usize,
    /// Also write the first 10^5 rounds to trace.csv.
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PayoffCurveArgs {
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, conflicts_with = "alphas", required_unless_present = "alphas")]
    pub k: Option<usize>,
    #[arg(long)]
    pub alphas: Option<PathBuf>,
    /// Opponents' strategy.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub v: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long)]
    pub hi: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Every vertex of the truthful set.
    Vertices,
    /// The vertex with the smallest second-price weight.
    MinAlpha2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleArg {
    /// Weights `(n-k)!(k-2)!(n-k-2)/(n-2)!` on `alpha_k`.
    Factorial,
    /// Weights `k-2` (the uniform first-order condition).
    FirstOrder,
}

impl From<RuleArg> for TruthfulRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Factorial => TruthfulRule::FactorialWeights,
            RuleArg::FirstOrder => TruthfulRule::FirstOrder,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TruthfulCoeffsArgs {
    #[arg(long)]
    pub n: usize,
    /// Number of leading order statistics used (default n).
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, value_enum, default_value_t = Objective::Vertices)]
    pub objective: Objective,
    #[arg(long, value_enum, default_value_t = RuleArg::Factorial)]
    pub rule: RuleArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IdentitiesArgs {
    #[arg(long, default_value_t = 20)]
    pub n_max: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Write outputs here instead of the manifest's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// Outputs were written but the check they record failed.
    SoftFail,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::SoftFail
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::SoftFail => 2,
        }
    }
}

struct Produced {
    outcome: Outcome,
    files: Vec<String>,
    seed: Option<u64>,
}

pub fn execute(cli: Cli) -> Result<Outcome> {
    match cli.threads {
        Some(t) => {
            ensure!(t >= 1, "--threads must be at least 1");
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build()?;
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<Outcome> {
    if let Command::Rerun(args) = command {
        return rerun(&args);
    }
    run_and_record(command).map(|(outcome, _)| outcome)
}

/// Run a command, then write its manifest next to the outputs.
pub fn run_and_record(command: Command) -> Result<(Outcome, RunManifest)> {
    let out = output_dir(&command)
        .ok_or_else(|| anyhow!("command has no output directory"))?
        .to_path_buf();
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let produced = match &command {
        Command::Equilibrium(a) => equilibrium(a)?,
        Command::Verify(a) => verify(a)?,
        Command::Simulate(a) => simulate(a)?,
        Command::PayoffCurve(a) => curve(a)?,
        Command::TruthfulCoeffs(a) => truthful_coeffs(a)?,
        Command::Identities(a) => identities(a)?,
        Command::Rerun(_) => unreachable!("handled by dispatch"),
    };
    let manifest = RunManifest::build(command, produced.seed, &out, &produced.files)?;
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok((produced.outcome, manifest))
}

fn output_dir(command: &Command) -> Option<&Path> {
    Some(match command {
        Command::Equilibrium(a) => &a.out,
        Command::Verify(a) => &a.out,
        Command::Simulate(a) => &a.out,
        Command::PayoffCurve(a) => &a.out,
        Command::TruthfulCoeffs(a) => &a.out,
        Command::Identities(a) => &a.out,
        Command::Rerun(_) => return None,
    })
}

fn set_output_dir(command: &mut Command, dir: PathBuf) {
    match command {
        Command::Equilibrium(a) => a.out = dir,
        Command::Verify(a) => a.out = dir,
        Command::Simulate(a) => a.out = dir,
        Command::PayoffCurve(a) => a.out = dir,
        Command::TruthfulCoeffs(a) => a.out = dir,
        Command::Identities(a) => a.out = dir,
        Command::Rerun(_) => {}
    }
}

fn rerun(args: &RerunArgs) -> Result<Outcome> {
    let recorded: RunManifest = io::read_json(&args.manifest)?;
    let mut command = recorded.params.clone();
    if let Some(dir) = &args.out {
        set_output_dir(&mut command, dir.clone());
    }
    let (_, fresh) = run_and_record(command)?;
    let mismatches = recorded.mismatches(&fresh);
    if mismatches.is_empty() {
        println!("reproduced {} output(s)", fresh.outputs.len());
        Ok(Outcome::Pass)
    } else {
        for m in &mismatches {
            println!("differs: {m}");
        }
        Ok(Outcome::SoftFail)
    }
}

/// Strategy mini-language shared by verify, simulate and payoff-curve.
pub fn parse_strategy(text: &str, spec: &Auction) -> Result<Strategy64> {
    let dist = spec.valuation().clone();
    let (name, arg) = match text.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (text, None),
    };
    let kprice = |k: usize| -> Result<Auction> { Ok(Auction::kprice(spec.n(), k, dist.clone())?) };
    Ok(match (name, arg) {
        ("equilibrium", None) => {
            let k = spec
                .k()
                .ok_or_else(|| anyhow!("`equilibrium` needs a k-price auction"))?;
            solve_closed_form(&kprice(k)?)?
        }
        ("truthful", None) => Strategy64::truthful(dist),
        ("linear", Some(s)) => {
            Strategy64::linear(dist, s.parse().with_context(|| format!("bad slope `{s}`"))?)
        }
        ("kprice", Some(k)) => {
            solve_closed_form(&kprice(k.parse().with_context(|| format!("bad k `{k}`"))?)?)?
        }
        ("three-price", None) => three_price_formula(&kprice(3)?)?,
        ("four-price", None) => four_price_formula(&kprice(4)?)?,
        ("table", Some(path)) => Strategy64::from_table(dist, read_bid_table(Path::new(path))?),
        _ => bail!(
            "unknown strategy `{text}` (expected equilibrium, truthful, linear:S, kprice:K, \
             three-price, four-price or table:PATH)"
        ),
    })
}

/// Auction from `--k` or `--alphas`, checking `--n` against the file.
fn auction(
    dist: &Distribution,
    n: Option<usize>,
    k: Option<usize>,
    alphas: Option<&Path>,
) -> Result<Auction> {
    match (k, alphas) {
        (Some(k), None) => {
            let n = n.ok_or_else(|| anyhow!("--n is required with --k"))?;
            Ok(Auction::kprice(n, k, dist.clone())?)
        }
        (None, Some(path)) => {
            let (file_n, coeffs) = read_coefficients(path)?;
            if let Some(n) = n {
                ensure!(
                    n == file_n,
                    "--n {n} disagrees with n = {file_n} in {}",
                    path.display()
                );
            }
            Ok(Auction::combination(file_n, coeffs, dist.clone())?)
        }
        _ => bail!("exactly one of --k and --alphas is required"),
    }
}

fn equilibrium(a: &EquilibriumArgs) -> Result<Produced> {
    ensure!(a.grid >= 2, "--grid must be at least 2");
    let dist = parse_distribution(&a.dist)?;
    let spec = Auction::kprice(a.n, a.k, dist.clone())?;
    let g = solve_closed_form(&spec)?;
    // endpoints included on bounded supports; the top quantile is infinite otherwise
    let bounded = dist.support().1.is_some();
    let denom = if bounded { a.grid - 1 } else { a.grid } as f64;
    let rows = (0..a.grid)
        .map(|i| {
            let q = i as f64 / denom;
            Ok((dist.quantile(q)?, g.bid_at_quantile(q)?))
        })
        .collect::<Result<Vec<_>>>()?;
    write_pairs(&a.out.join("strategy.csv"), "v", "bid", rows)?;
    let report = check_existence(&g, a.grid.max(16))?;
    write_json(&a.out.join("monotonicity.json"), &report)?;
    write_json(&a.out.join("strategy.json"), &g.descriptor())?;
    if spec.prices_at_lowest_bid() {
        eprintln!("note: k = n, the price is the lowest bid");
    }
    Ok(Produced {
        outcome: Outcome::from_pass(report.increasing),
        files: vec![
            "strategy.csv".into(),
            "monotonicity.json".into(),
            "strategy.json".into(),
        ],
        seed: None,
    })
}

fn verify(a: &VerifyArgs) -> Result<Produced> {
    let dist = parse_distribution(&a.dist)?;
    let spec = auction(&dist, a.n, a.k, a.alphas.as_deref())?;
    let grid = Grid::Quantiles { points: a.points };
    let opts = kprice_core::VerifyOptions {
        tolerance: a.tolerance,
        search: SearchConfig::default(),
    };
    let path = a.out.join("report.json");
    let pass = match spec.payment() {
        kprice_core::Payment::Combination(coeffs) => {
            let report = verify_truthfulness(spec.n(), coeffs, &dist, &grid, &opts)?;
            write_json(&path, &report)?;
            let flag = |ok: bool| if ok { "zero" } else { "nonzero" };
            println!(
                "truthful: {} (max gain {:.3e}; integral residual {}, first-order residual {})",
                report.truthful,
                report.deviation.max_gain,
                flag(report.integral_ok),
                flag(report.first_order_ok)
            );
            report.truthful
        }
        kprice_core::Payment::KPrice(_) => {
            let candidate = parse_strategy(&a.strategy, &spec)?;
            let report = verify_equilibrium(&spec, &candidate, &grid, &opts)?;
            write_json(&path, &report)?;
            println!(
                "equilibrium: {} (max gain {:.3e}, bid gap {:.3e})",
                report.verdict, report.max_gain, report.max_bid_gap
            );
            report.verdict
        }
    };
    Ok(Produced {
        outcome: Outcome::from_pass(pass),
        files: vec!["report.json".into()],
        seed: None,
    })
}

fn default_strategy(spec: &Auction) -> &'static str {
    if spec.k().is_some() {
        "equilibrium"
    } else {
        "truthful"
    }
}

fn simulate(a: &SimulateArgs) -> Result<Produced> {
    let dist = parse_distribution(&a.dist)?;
    let spec = auction(&dist, Some(a.n), a.k, a.alphas.as_deref())?;
    let strategies = match a.strategy.len() {
        0 => vec![parse_strategy(default_strategy(&spec), &spec)?; a.n],
        1 => vec![parse_strategy(&a.strategy[0], &spec)?; a.n],
        m if m == a.n => a
            .strategy
            .iter()
            .map(|s| parse_strategy(s, &spec))
            .collect::<Result<_>>()?,
        m => bail!("{m} strategies given for {} bidders (give one or n)", a.n),
    };
    let deviation = a
        .deviation
        .as_deref()
        .map(|s| -> Result<_> {
            Ok(Deviation {
                bidder: a.deviation_bidder,
                strategy: parse_strategy(s, &spec)?,
            })
        })
        .transpose()?;
    let cfg = Simulation {
        spec,
        strategies,
        rounds: a.rounds,
        seed: a.seed,
        shards: a.shards,
        deviation,
        trace: a.trace,
    };
    let (report, trace) = run_with_trace(&cfg)?;
    write_json(&a.out.join("report.json"), &report)?;
    let mut files = vec!["report.json".to_string()];
    if a.trace {
        io::write_trace(&a.out.join("trace.csv"), &trace)?;
        files.push("trace.csv".into());
    }
    println!(
        "mean revenue {} ± {} over {} rounds",
        report.mean_revenue, report.revenue_half_width_95, report.rounds_used
    );
    if let Some(d) = &report.deviation {
        println!("deviation gain {} ± {}", d.gain, d.half_width_95);
    }
    Ok(Produced {
        outcome: Outcome::Pass,
        files,
        seed: Some(a.seed),
    })
}

fn curve(a: &PayoffCurveArgs) -> Result<Produced> {
    let dist = parse_distribution(&a.dist)?;
    let spec = auction(&dist, Some(a.n), a.k, a.alphas.as_deref())?;
    let name = a.strategy.as_deref().unwrap_or(default_strategy(&spec));
    let opponents = parse_strategy(name, &spec)?;
    let rows = payoff_curve(&spec, &opponents, a.v, a.lo, a.hi, a.points)?;
    write_pairs(&a.out.join("payoff.csv"), "x", "U", rows)?;
    Ok(Produced {
        outcome: Outcome::Pass,
        files: vec!["payoff.csv".into()],
        seed: None,
    })
}

#[derive(Debug, Serialize)]
struct CoefficientEntry {
    n: usize,
    alphas: Vec<f64>,
    /// Exact values as reduced fractions.
    exact: Vec<String>,
}

fn truthful_coeffs(a: &TruthfulCoeffsArgs) -> Result<Produced> {
    let s = a.s.unwrap_or(a.n);
    let rule = TruthfulRule::from(a.rule);
    let vectors = match a.objective {
        Objective::Vertices => enumerate_vertices_with::<Rational>(a.n, s, rule)?,
        Objective::MinAlpha2 => vec![minimize_alpha2_with::<Rational>(a.n, s, rule)?],
    };
    let entries: Vec<CoefficientEntry> = vectors
        .iter()
        .map(|c| CoefficientEntry {
            n: a.n,
            alphas: c.to_f64(),
            exact: c.alphas().iter().map(|x| x.to_string()).collect(),
        })
        .collect();
    for e in &entries {
        println!("{}", e.exact.join(" "));
    }
    write_json(&a.out.join("coefficients.json"), &entries)?;
    Ok(Produced {
        outcome: Outcome::Pass,
        files: vec!["coefficients.json".into()],
        seed: None,
    })
}

#[derive(Debug, Serialize)]
struct IdentityRow {
    identity: &'static str,
    /// `(p, m)` for the beta integral, `(n, k)` for the alternating sum.
    first: usize,
    second: usize,
    lhs: String,
    rhs: String,
    pass: bool,
}

fn identities(a: &IdentitiesArgs) -> Result<Produced> {
    ensure!(
        (3..=IDENTITY_LIMIT).contains(&a.n_max),
        "--n-max must lie in 3..={IDENTITY_LIMIT}"
    );
    let mut rows = Vec::new();
    for total in 0..=a.n_max {
        for p in 0..=total {
            let (lhs, rhs) = check_beta_integral::<Rational>(p, total - p)?;
            rows.push(IdentityRow {
                identity: "beta-integral",
                first: p,
                second: total - p,
                pass: lhs == rhs,
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
            });
        }
    }
    for n in 3..=a.n_max {
        for k in 2..n {
            let (lhs, rhs) = check_alternating_sum::<Rational>(n, k)?;
            rows.push(IdentityRow {
                identity: "alternating-sum",
                first: n,
                second: k,
                pass: lhs == rhs,
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
            });
        }
    }
    for name in ["beta-integral", "alternating-sum"] {
        let (pass, total) = rows
            .iter()
            .filter(|r| r.identity == name)
            .fold((0, 0), |(p, t), r| (p + usize::from(r.pass), t + 1));
        println!(
            "{name:<16} {pass:>4}/{total:<4} {}",
            if pass == total { "PASS" } else { "FAIL" }
        );
    }
    for r in rows.iter().filter(|r| !r.pass) {
        println!(
            "FAIL {} ({}, {}): {} != {}",
            r.identity, r.first, r.second, r.lhs, r.rhs
        );
    }
    let all = rows.iter().all(|r| r.pass);
    write_json(&a.out.join("identities.json"), &rows)?;
    Ok(Produced {
        outcome: Outcome::from_pass(all),
        files: vec!["identities.json".into()],
        seed: None,
    })
}
