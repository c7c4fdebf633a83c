//! Seeded Monte Carlo auction simulator.
//!
//! Each round draws `n` valuation quantiles, maps them to bids, awards the
//! item to the highest bid (lowest index on ties) and charges the payment
//! rule on the sorted bids, the winner's own bid counting as the first.
//! Rounds are split across shards with independent ChaCha8 streams; shard
//! partials are merged in shard order, so a fixed `(seed, shards)` pair gives
//! a bit-identical report.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{AuctionSpec, Payment, Strategy};
use crate::error::{Error, Result};
use crate::montecarlo::{run_shards, RunningStats, DEFAULT_SHARDS, RNG_ALGORITHM};
use crate::order_stats::McEstimate;
use crate::scalar::Real;

/// Trace rows kept at most.
pub const TRACE_CAP: usize = 100_000;

#[derive(Debug, Clone)]
pub struct Deviation<T> {
    pub bidder: usize,
    pub strategy: Strategy<T>,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig<T> {
    pub spec: AuctionSpec<T>,
    /// One strategy per bidder.
    pub strategies: Vec<Strategy<T>>,
    pub rounds: u64,
    pub seed: u64,
    pub shards: usize,
    pub deviation: Option<Deviation<T>>,
    /// Keep up to [`TRACE_CAP`] per-round rows.
    pub trace: bool,
}

impl<T: Real> SimulationConfig<T> {
    /// Every bidder plays `strategy`.
    pub fn symmetric(spec: AuctionSpec<T>, strategy: Strategy<T>, rounds: u64, seed: u64) -> Self {
        let strategies = vec![strategy; spec.n()];
        SimulationConfig {
            spec,
            strategies,
            rounds,
            seed,
            shards: DEFAULT_SHARDS,
            deviation: None,
            trace: false,
        }
    }

    pub fn with_deviation(mut self, bidder: usize, strategy: Strategy<T>) -> Self {
        self.deviation = Some(Deviation { bidder, strategy });
        self
    }

    pub fn with_shards(mut self, shards: usize) -> Self {
        self.shards = shards;
        self
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.spec.n();
        if self.rounds < 1 {
            return Err(Error::Argument("rounds must be at least 1".into()));
        }
        if self.shards < 1 {
            return Err(Error::Argument("shards must be at least 1".into()));
        }
        if self.strategies.len() != n {
            return Err(Error::Argument(format!(
                "{} strategies for {n} bidders",
                self.strategies.len()
            )));
        }
        if let Some(d) = &self.deviation {
            if d.bidder >= n {
                return Err(Error::Argument(format!(
                    "deviating bidder {} out of range 0..{n}",
                    d.bidder
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: u64,
    pub winner: usize,
    pub payment: f64,
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationGain {
    pub bidder: usize,
    pub gain: f64,
    pub half_width_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub mean_revenue: f64,
    pub revenue_half_width_95: f64,
    pub mean_winner_payoff: f64,
    pub winner_payoff_half_width_95: f64,
    pub per_bidder_payoff: Vec<f64>,
    pub deviation: Option<DeviationGain>,
    /// Rounds whose top bid was shared.
    pub ties: u64,
    pub rounds_used: u64,
    pub seed: u64,
    pub shards: usize,
    pub rng: String,
}

#[derive(Debug, Clone, Default)]
struct Partial {
    revenue: RunningStats,
    winner: RunningStats,
    bidders: Vec<RunningStats>,
    gain: RunningStats,
    ties: u64,
    trace: Vec<TraceRow>,
}

impl Partial {
    fn merge(&mut self, other: &Partial) {
        self.revenue.merge(&other.revenue);
        self.winner.merge(&other.winner);
        for (a, b) in self.bidders.iter_mut().zip(&other.bidders) {
            a.merge(b);
        }
        self.gain.merge(&other.gain);
        self.ties += other.ties;
    }
}

struct Outcome {
    winner: usize,
    payment: f64,
    tie: bool,
}

/// Settle one round: winner, payment, and whether the top bid was shared.
fn settle<T: Real>(payment: &Payment<T>, bids: &[T], sorted: &mut Vec<T>) -> Outcome {
    let mut winner = 0;
    let mut tie = false;
    for (i, b) in bids.iter().enumerate().skip(1) {
        if *b > bids[winner] {
            winner = i;
            tie = false;
        } else if *b == bids[winner] {
            tie = true;
        }
    }
    sorted.clear();
    sorted.extend_from_slice(bids);
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let price = match payment {
        Payment::KPrice(k) => sorted[k - 1],
        Payment::Combination(c) => c
            .alphas()
            .iter()
            .zip(sorted.iter())
            .fold(T::zero(), |acc, (a, b)| acc + *a * *b),
    };
    Outcome {
        winner,
        payment: price.as_f64(),
        tie,
    }
}

fn bid_of<T: Real>(s: &Strategy<T>, a: T, v: T) -> Result<T> {
    // closed forms are cheaper evaluated from the quantile they were drawn at
    match s.representation() {
        crate::equilibrium::Representation::ClosedForm(_) => s.bid_at_quantile(a),
        crate::equilibrium::Representation::Table(_) => s.bid(v),
    }
}

fn shard_work<T: Real>(
    cfg: &SimulationConfig<T>,
    rng: &mut ChaCha8Rng,
    rounds: u64,
    first_round: u64,
) -> Result<Partial> {
    let n = cfg.spec.n();
    let dist = cfg.spec.valuation();
    let mut p = Partial {
        bidders: vec![RunningStats::default(); n],
        ..Default::default()
    };
    let mut quantiles = vec![T::zero(); n];
    let mut values = vec![T::zero(); n];
    let mut bids = vec![T::zero(); n];
    let mut sorted = Vec::with_capacity(n);
    let trace_room = if cfg.trace {
        (TRACE_CAP as u64).saturating_sub(first_round).min(rounds)
    } else {
        0
    };
    for r in 0..rounds {
        for i in 0..n {
            // open interval keeps unbounded quantiles finite
            let u: f64 = rng.random();
            quantiles[i] = T::lit(u.max(f64::MIN_POSITIVE));
            values[i] = dist.quantile(quantiles[i])?;
            bids[i] = bid_of(&cfg.strategies[i], quantiles[i], values[i])?;
        }
        let out = settle(cfg.spec.payment(), &bids, &mut sorted);
        let surplus = values[out.winner].as_f64() - out.payment;
        p.revenue.push(out.payment);
        p.winner.push(surplus);
        for (i, s) in p.bidders.iter_mut().enumerate() {
            s.push(if i == out.winner { surplus } else { 0.0 });
        }
        if out.tie {
            p.ties += 1;
        }
        if r < trace_room {
            p.trace.push(TraceRow {
                round: first_round + r,
                winner: out.winner,
                payment: out.payment,
                revenue: out.payment,
            });
        }
        if let Some(d) = &cfg.deviation {
            let base = if d.bidder == out.winner { surplus } else { 0.0 };
            bids[d.bidder] = bid_of(&d.strategy, quantiles[d.bidder], values[d.bidder])?;
            let dev = settle(cfg.spec.payment(), &bids, &mut sorted);
            let dev_payoff = if d.bidder == dev.winner {
                values[d.bidder].as_f64() - dev.payment
            } else {
                0.0
            };
            p.gain.push(dev_payoff - base);
        }
    }
    Ok(p)
}

/// Run the simulation and return the report with the (possibly empty) trace.
pub fn run_with_trace<T: Real>(
    cfg: &SimulationConfig<T>,
) -> Result<(SimulationReport, Vec<TraceRow>)> {
    cfg.validate()?;
    let n = cfg.spec.n();
    let counts = crate::montecarlo::split_rounds(cfg.rounds, cfg.shards);
    let offsets: Vec<u64> = counts
        .iter()
        .scan(0u64, |acc, c| {
            let start = *acc;
            *acc += c;
            Some(start)
        })
        .collect();
    let partials = run_shards(cfg.rounds, cfg.shards, cfg.seed, |shard, rounds, rng| {
        shard_work(cfg, rng, rounds, offsets[shard])
    });
    let mut total = Partial {
        bidders: vec![RunningStats::default(); n],
        ..Default::default()
    };
    let mut trace = Vec::new();
    for part in partials {
        let part = part?;
        total.merge(&part);
        trace.extend_from_slice(&part.trace);
    }
    trace.truncate(TRACE_CAP);
    let report = SimulationReport {
        mean_revenue: total.revenue.mean,
        revenue_half_width_95: total.revenue.half_width_95(),
        mean_winner_payoff: total.winner.mean,
        winner_payoff_half_width_95: total.winner.half_width_95(),
        per_bidder_payoff: total.bidders.iter().map(|s| s.mean).collect(),
        deviation: cfg.deviation.as_ref().map(|d| DeviationGain {
            bidder: d.bidder,
            gain: total.gain.mean,
            half_width_95: total.gain.half_width_95(),
        }),
        ties: total.ties,
        rounds_used: total.revenue.count,
        seed: cfg.seed,
        shards: cfg.shards,
        rng: RNG_ALGORITHM.to_string(),
    };
    Ok((report, trace))
}

pub fn run<T: Real>(cfg: &SimulationConfig<T>) -> Result<SimulationReport> {
    run_with_trace(cfg).map(|(r, _)| r)
}

/// Paired estimate of the deviating bidder's payoff change.
pub fn deviation_gain<T: Real>(cfg: &SimulationConfig<T>) -> Result<(f64, f64)> {
    if cfg.deviation.is_none() {
        return Err(Error::Argument("no deviation configured".into()));
    }
    let d = run(cfg)?.deviation.expect("deviation configured");
    Ok((d.gain, d.half_width_95))
}

/// Mean payoff of a bidder with valuation `v` bidding `x` against `n - 1`
/// opponents playing `opponents`.
pub fn mc_payoff<T: Real>(
    spec: &AuctionSpec<T>,
    opponents: &Strategy<T>,
    v: T,
    x: T,
    rounds: u64,
    seed: u64,
) -> Result<McEstimate> {
    if rounds < 1 {
        return Err(Error::Argument("rounds must be at least 1".into()));
    }
    let n = spec.n();
    let dist = spec.valuation();
    let partials = run_shards(rounds, DEFAULT_SHARDS, seed, |_, count, rng| {
        let mut stats = RunningStats::default();
        let mut bids = vec![T::zero(); n];
        let mut sorted = Vec::with_capacity(n);
        for _ in 0..count {
            bids[0] = x;
            for b in bids.iter_mut().skip(1) {
                let u: f64 = rng.random();
                let a = T::lit(u.max(f64::MIN_POSITIVE));
                *b = bid_of(opponents, a, dist.quantile(a)?)?;
            }
            let out = settle(spec.payment(), &bids, &mut sorted);
            stats.push(if out.winner == 0 {
                v.as_f64() - out.payment
            } else {
                0.0
            });
        }
        Ok::<_, Error>(stats)
    });
    let mut total = RunningStats::default();
    for p in partials {
        total.merge(&p?);
    }
    Ok(McEstimate {
        estimate: total.mean,
        half_width_95: total.half_width_95(),
        rounds: total.count,
    })
}
