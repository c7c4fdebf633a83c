//! Expected payoffs and best-response verification.
//!
//! Opponents bid `X = g(V)`, so the bid distribution is `F̂ = F ∘ g⁻¹`. All
//! integrals are taken on the valuation-quantile scale `u = F̂(t)`, where the
//! opposing bid is `g1(u) = g(q(u))`:
//!
//! ```text
//! U_1(x, v) = (v - x) b^(n-1)
//! U_k(x, v) = (n-1)!/((n-k)!(k-2)!) ∫_0^b (v - g1(u)) u^(n-k) (b-u)^(k-2) du,  k >= 2
//! ```
//!
//! with `b = F̂(x)`. Only the upper limit `b` needs `g` inverted.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combi::CoefficientVector;
use crate::dist::DistributionSpec;
use crate::equilibrium::{check_existence, AuctionSpec, Payment, Strategy};
use crate::error::{Error, Result};
use crate::order_stats::density_coefficient;
use crate::quad;
use crate::scalar::Real;

/// Upper quantile searched on unbounded supports, where `g1(1)` is infinite.
const UNBOUNDED_TOP: f64 = 1.0 - 1e-9;

/// Points of the existence check run before verification.
const VERIFY_MONOTONE_GRID: usize = 257;

#[derive(Debug, Clone, Copy)]
pub struct PayoffQuery<'a, T> {
    pub spec: &'a AuctionSpec<T>,
    pub opponent_strategy: &'a Strategy<T>,
    pub v: T,
    pub x: T,
}

/// Valuations at which a strategy is checked.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec<T> {
    /// `points` evenly spaced valuations on `[lo, hi]`.
    Linear { lo: T, hi: T, points: usize },
    /// `v_i = q(i / (points + 1))` for `i = 1..=points`.
    Quantiles { points: usize },
}

impl<T: Real> GridSpec<T> {
    pub fn values(&self, dist: &DistributionSpec<T>) -> Result<Vec<T>> {
        match *self {
            GridSpec::Linear { lo, hi, points } => {
                if points == 0 || hi < lo {
                    return Err(Error::Argument("empty valuation grid".into()));
                }
                if points == 1 {
                    return Ok(vec![lo]);
                }
                let step = (hi - lo) / T::count(points - 1);
                Ok((0..points)
                    .map(|i| {
                        if i == points - 1 {
                            hi
                        } else {
                            lo + step * T::count(i)
                        }
                    })
                    .collect())
            }
            GridSpec::Quantiles { points } => {
                if points == 0 {
                    return Err(Error::Argument("empty valuation grid".into()));
                }
                let denom = T::count(points + 1);
                (1..=points)
                    .map(|i| dist.quantile(T::count(i) / denom))
                    .collect()
            }
        }
    }
}

/// Best-response search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Uniform grid over the opposing bid range (in bid quantiles).
    pub grid_points: usize,
    /// Final bracket width of the golden-section refinement.
    pub bracket_width: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            grid_points: 4097,
            bracket_width: 1e-8,
        }
    }
}

/// Range of bids placed by opponents: `g1(0)` and `g1(1)` (`None` if unbounded).
fn bid_range<T: Real>(strategy: &Strategy<T>) -> Result<(T, Option<T>)> {
    let lo = strategy.bid_at_quantile(T::zero())?;
    let hi = match strategy.domain().1 {
        Some(_) => Some(strategy.bid_at_quantile(T::one())?),
        None => None,
    };
    Ok((lo, hi))
}

fn top_quantile<T: Real>(strategy: &Strategy<T>) -> T {
    if strategy.domain().1.is_some() {
        T::one()
    } else {
        T::lit(UNBOUNDED_TOP)
    }
}

/// `F̂(x)`: the probability that one opponent bids at most `x`.
pub fn bid_quantile<T: Real>(strategy: &Strategy<T>, x: T) -> Result<T> {
    let (lo, hi) = bid_range(strategy)?;
    if x <= lo {
        return Ok(T::zero());
    }
    if hi.is_some_and(|h| x >= h) {
        return Ok(T::one());
    }
    let (mut a, mut b) = (T::zero(), top_quantile(strategy));
    if strategy.bid_at_quantile(b)? <= x {
        return Ok(b);
    }
    for _ in 0..200 {
        let mid = T::lit(0.5) * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if strategy.bid_at_quantile(mid)? < x {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(T::lit(0.5) * (a + b))
}

/// Payoff of the k-price component for a bid `x` that beats each opponent
/// with probability `b`.
fn kprice_at<T: Real>(n: usize, k: usize, opponents: &Strategy<T>, v: T, x: T, b: T) -> Result<T> {
    if b <= T::zero() {
        return Ok(T::zero());
    }
    if k == 1 {
        return Ok((v - x) * b.powi(n as i32 - 1));
    }
    let mut err = None;
    let integral = quad::integrate(
        |u: T| match opponents.bid_at_quantile(u) {
            Ok(g) => (v - g) * u.powi((n - k) as i32) * (b - u).powi((k - 2) as i32),
            Err(e) => {
                err.get_or_insert(e);
                T::zero()
            }
        },
        T::zero(),
        b,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(density_coefficient::<T>(n, k) * integral)
}

fn rule_at<T: Real>(spec: &AuctionSpec<T>, opponents: &Strategy<T>, v: T, x: T, b: T) -> Result<T> {
    let n = spec.n();
    match spec.payment() {
        Payment::KPrice(k) => kprice_at(n, *k, opponents, v, x, b),
        Payment::Combination(coeffs) => combination_at(n, coeffs, opponents, v, x, b),
    }
}

fn combination_at<T: Real>(
    n: usize,
    coeffs: &CoefficientVector<T>,
    opponents: &Strategy<T>,
    v: T,
    x: T,
    b: T,
) -> Result<T> {
    let mut total = T::zero();
    for (i, alpha) in coeffs.alphas().iter().enumerate() {
        if *alpha != T::zero() {
            total = total + *alpha * kprice_at(n, i + 1, opponents, v, x, b)?;
        }
    }
    Ok(total)
}

/// Expected payoff `U_k(x, v)` of bidding `x` at valuation `v` when the price
/// is the k-th highest bid (`k = 1`: own bid).
pub fn expected_payoff_kprice<T: Real>(query: &PayoffQuery<'_, T>, k: usize) -> Result<T> {
    let n = query.spec.n();
    if k < 1 || k > n {
        return Err(Error::Argument(format!("need 1 <= k <= n = {n}, got {k}")));
    }
    let b = bid_quantile(query.opponent_strategy, query.x)?;
    kprice_at(n, k, query.opponent_strategy, query.v, query.x, b)
}

/// `sum_k alpha_k U_k(x, v)`.
pub fn expected_payoff_combination<T: Real>(
    query: &PayoffQuery<'_, T>,
    coeffs: &CoefficientVector<T>,
) -> Result<T> {
    let n = query.spec.n();
    if coeffs.len() > n {
        return Err(Error::Argument(format!(
            "{} coefficients exceed n = {n}",
            coeffs.len()
        )));
    }
    let b = bid_quantile(query.opponent_strategy, query.x)?;
    combination_at(n, coeffs, query.opponent_strategy, query.v, query.x, b)
}

/// Payoff under the auction's own payment rule.
pub fn expected_payoff<T: Real>(query: &PayoffQuery<'_, T>) -> Result<T> {
    let b = bid_quantile(query.opponent_strategy, query.x)?;
    rule_at(query.spec, query.opponent_strategy, query.v, query.x, b)
}

/// `(x, U(x, v))` on `points` evenly spaced bids in `[x_lo, x_hi]`.
pub fn payoff_curve<T: Real>(
    spec: &AuctionSpec<T>,
    opponents: &Strategy<T>,
    v: T,
    x_lo: T,
    x_hi: T,
    points: usize,
) -> Result<Vec<(T, T)>> {
    let xs = GridSpec::Linear {
        lo: x_lo,
        hi: x_hi,
        points,
    }
    .values(spec.valuation())?;
    xs.into_par_iter()
        .map(|x| {
            let q = PayoffQuery {
                spec,
                opponent_strategy: opponents,
                v,
                x,
            };
            Ok((x, expected_payoff(&q)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse<T> {
    pub x_star: T,
    /// Probability that `x_star` beats a single opponent.
    pub b_star: T,
    pub payoff: T,
    /// Every grid payoff was exactly zero; `x_star = v` by convention.
    pub degenerate: bool,
    /// More than one local maximum was seen on the search grid.
    pub multimodal: bool,
}

/// Maximize `U(x, v)` against opponents playing `opponents`.
///
/// Bids above the highest opposing bid win with certainty and never pay less
/// than bidding exactly that maximum, so the search runs over the bid
/// quantile `b = F̂(x)` in `[0, 1]`: a uniform grid, then golden-section
/// refinement on the bracket around the grid argmax.
pub fn best_response<T: Real>(
    spec: &AuctionSpec<T>,
    opponents: &Strategy<T>,
    v: T,
    search: &SearchConfig,
) -> Result<BestResponse<T>> {
    if search.grid_points < 3 {
        return Err(Error::Argument(
            "best-response grid needs at least 3 points".into(),
        ));
    }
    let top = top_quantile(opponents);
    let m = search.grid_points;
    let eval = |b: T| -> Result<T> {
        let x = opponents.bid_at_quantile(b)?;
        rule_at(spec, opponents, v, x, b)
    };
    let bs: Vec<T> = (0..m)
        .map(|i| {
            if i == m - 1 {
                top
            } else {
                top * T::count(i) / T::count(m - 1)
            }
        })
        .collect();
    let us = bs.iter().map(|&b| eval(b)).collect::<Result<Vec<T>>>()?;

    if us.iter().all(|u| *u == T::zero()) {
        return Ok(BestResponse {
            x_star: v,
            b_star: T::zero(),
            payoff: T::zero(),
            degenerate: true,
            multimodal: false,
        });
    }

    let mut best = 0;
    for (i, u) in us.iter().enumerate() {
        if *u > us[best] {
            best = i;
        }
    }
    let multimodal = count_local_maxima(&us) > 1;

    let lo = bs[best.saturating_sub(1)];
    let hi = bs[(best + 1).min(m - 1)];
    let (b_ref, u_ref) = golden_section(&eval, lo, hi, T::lit(search.bracket_width))?;
    let (b_star, payoff) = if u_ref > us[best] {
        (b_ref, u_ref)
    } else {
        (bs[best], us[best])
    };
    Ok(BestResponse {
        x_star: opponents.bid_at_quantile(b_star)?,
        b_star,
        payoff,
        degenerate: false,
        multimodal,
    })
}

fn count_local_maxima<T: Real>(us: &[T]) -> usize {
    let scale = us.iter().fold(T::zero(), |m, u| m.max(u.abs()));
    let noise = scale * T::lit(1e-12);
    // direction of the last significant move: +1 up, -1 down
    let mut dir = 0i8;
    let mut peaks = 0;
    for w in us.windows(2) {
        let d = w[1] - w[0];
        if d > noise {
            dir = 1;
        } else if d < -noise {
            if dir == 1 {
                peaks += 1;
            }
            dir = -1;
        }
    }
    if dir == 1 {
        peaks += 1;
    }
    peaks
}

fn golden_section<T: Real, F: Fn(T) -> Result<T>>(
    f: &F,
    mut lo: T,
    mut hi: T,
    width: T,
) -> Result<(T, T)> {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while hi - lo > width {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d)?;
        }
        if c >= d {
            break;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Verification settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Allowed deviation gain, relative to the payoff scale.
    pub tolerance: f64,
    pub search: SearchConfig,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tolerance: 1e-5,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub v: f64,
    pub candidate_bid: f64,
    pub best_bid: f64,
    pub candidate_payoff: f64,
    pub best_payoff: f64,
    pub gain: f64,
    pub multimodal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub verdict: bool,
    pub monotone: bool,
    /// Largest `U(x*, v) - U(g(v), v)` over the grid.
    pub max_gain: f64,
    /// Largest `|x* - g(v)|` over the grid.
    pub max_bid_gap: f64,
    /// Largest `|U(g(v), v)|`; the gain threshold is `tolerance * payoff_scale`.
    pub payoff_scale: f64,
    pub tolerance: f64,
    pub multimodal_points: usize,
    /// Set when `k = n` (price at the lowest bid).
    pub prices_at_lowest_bid: bool,
    pub points: Vec<PointReport>,
}

/// Best-response check of a symmetric candidate: every bidder plays
/// `candidate`, and at each grid valuation the unilateral optimum is compared
/// with the candidate's bid.
pub fn verify_equilibrium<T: Real>(
    spec: &AuctionSpec<T>,
    candidate: &Strategy<T>,
    v_grid: &GridSpec<T>,
    opts: &VerifyOptions,
) -> Result<EquilibriumReport> {
    let monotone = check_existence(candidate, VERIFY_MONOTONE_GRID)?.increasing;
    let vs = v_grid.values(spec.valuation())?;
    let points = if monotone {
        vs.par_iter()
            .map(|&v| {
                let br = best_response(spec, candidate, v, &opts.search)?;
                let x_c = candidate.bid(v)?;
                // symmetric play: bidding g(v) beats an opponent with probability F(v)
                let b_c = spec.valuation().cdf(v)?;
                let u_c = rule_at(spec, candidate, v, x_c, b_c)?;
                Ok(PointReport {
                    v: v.as_f64(),
                    candidate_bid: x_c.as_f64(),
                    best_bid: br.x_star.as_f64(),
                    candidate_payoff: u_c.as_f64(),
                    best_payoff: br.payoff.as_f64(),
                    gain: (br.payoff - u_c).as_f64(),
                    multimodal: br.multimodal,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let max_gain = points
        .iter()
        .map(|p| p.gain)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_bid_gap = points
        .iter()
        .map(|p| (p.best_bid - p.candidate_bid).abs())
        .fold(0.0, f64::max);
    let payoff_scale = points
        .iter()
        .map(|p| p.candidate_payoff.abs().max(p.best_payoff.abs()))
        .fold(0.0, f64::max);
    let verdict = monotone && !points.is_empty() && max_gain <= opts.tolerance * payoff_scale;
    Ok(EquilibriumReport {
        verdict,
        monotone,
        max_gain,
        max_bid_gap,
        payoff_scale,
        tolerance: opts.tolerance,
        multimodal_points: points.iter().filter(|p| p.multimodal).count(),
        prices_at_lowest_bid: spec.prices_at_lowest_bid(),
        points,
    })
}
