//! Order statistics of the opposing bids.
//!
//! With `n - 1` opponents bidding i.i.d. from `F̂`, the payoff of a k-price
//! auction depends on the joint law of the largest opposing bid and the
//! `(k-1)`-th largest one. [`joint_cdf_h`] gives
//! `H(t) = P[(k-1)-th largest <= t, largest <= x]` and [`joint_density_hprime`]
//! its derivative in `t`. The Monte Carlo estimator and the exact rational
//! identities serve as independent checks of that machinery.

use rand::Rng;

use crate::combinatorics::{binomial, binomial_f64, factorial};
use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::montecarlo::{self, Z95};
use crate::scalar::{Field, Real};

/// Guard on `p + m` (resp. `n`) for the exact identity checks.
pub const IDENTITY_LIMIT: usize = 40;

/// The `n - 1` opponents faced by one bidder.
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentField<T> {
    n: usize,
    bid_distribution: DistributionSpec<T>,
}

impl<T: Real> OpponentField<T> {
    pub fn new(n: usize, bid_distribution: DistributionSpec<T>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Argument(format!("need at least 2 bidders, got {n}")));
        }
        Ok(OpponentField {
            n,
            bid_distribution,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bid_distribution(&self) -> &DistributionSpec<T> {
        &self.bid_distribution
    }

    fn check(&self, k: usize, t: T, x: T) -> Result<()> {
        if k < 2 || k > self.n {
            return Err(Error::Argument(format!(
                "k must satisfy 2 <= k <= n = {}, got {k}",
                self.n
            )));
        }
        if t > x {
            return Err(Error::Argument(format!("need t <= x, got t={t}, x={x}")));
        }
        Ok(())
    }
}

/// `H(t) = sum_{p=0}^{k-2} C(n-1,p) F̂(t)^{n-1-p} (F̂(x) - F̂(t))^p`.
pub fn joint_cdf_h<T: Real>(field: &OpponentField<T>, k: usize, t: T, x: T) -> Result<T> {
    field.check(k, t, x)?;
    let d = &field.bid_distribution;
    let ft = d.cdf(t)?;
    let fx = d.cdf(x)?;
    let gap = fx - ft;
    let n1 = field.n - 1;
    let mut h = T::zero();
    for p in 0..=k - 2 {
        h = h + T::lit(binomial_f64(n1, p)) * ft.powi((n1 - p) as i32) * gap.powi(p as i32);
    }
    Ok(h)
}

/// `H'(t) = (n-1)!/((n-k)!(k-2)!) F̂(t)^{n-k} (F̂(x) - F̂(t))^{k-2} f̂(t)`.
pub fn joint_density_hprime<T: Real>(field: &OpponentField<T>, k: usize, t: T, x: T) -> Result<T> {
    field.check(k, t, x)?;
    let d = &field.bid_distribution;
    let ft = d.cdf(t)?;
    let fx = d.cdf(x)?;
    let density = d.density(t)?;
    let n = field.n;
    Ok(density_coefficient::<T>(n, k)
        * ft.powi((n - k) as i32)
        * (fx - ft).powi((k - 2) as i32)
        * density)
}

/// `(n-1)!/((n-k)!(k-2)!) = (n-1) C(n-2, k-2)`.
pub fn density_coefficient<T: Real>(n: usize, k: usize) -> T {
    T::count(n - 1) * T::lit(binomial_f64(n - 2, k - 2))
}

/// Monte Carlo estimate with its normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub half_width_95: f64,
    pub rounds: u64,
}

impl McEstimate {
    /// Whether `value` lies within `widths` half-widths of the estimate.
    pub fn brackets(&self, value: f64, widths: f64) -> bool {
        (self.estimate - value).abs() <= widths * self.half_width_95
    }
}

pub fn mc_joint_probability<T: Real>(
    field: &OpponentField<T>,
    k: usize,
    t: T,
    x: T,
    rounds: u64,
    seed: u64,
) -> Result<McEstimate> {
    mc_joint_probability_sharded(field, k, t, x, rounds, seed, montecarlo::DEFAULT_SHARDS)
}

/// Draw `n - 1` bids per round and count `{(k-1)-th largest <= t, largest <= x}`.
pub fn mc_joint_probability_sharded<T: Real>(
    field: &OpponentField<T>,
    k: usize,
    t: T,
    x: T,
    rounds: u64,
    seed: u64,
    shards: usize,
) -> Result<McEstimate> {
    field.check(k, t, x)?;
    if rounds < 10_000 {
        return Err(Error::Argument(format!(
            "Monte Carlo needs at least 10^4 rounds, got {rounds}"
        )));
    }
    let opponents = field.n - 1;
    let dist = &field.bid_distribution;
    let partials = montecarlo::run_shards(rounds, shards, seed, |_, r, rng| {
        let mut bids = vec![T::zero(); opponents];
        let mut hits = 0u64;
        for _ in 0..r {
            for b in bids.iter_mut() {
                let u = T::lit(rng.random::<f64>());
                *b = dist.quantile(u).expect("u in [0,1)");
            }
            bids.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite bids"));
            if bids[k - 2] <= t && bids[0] <= x {
                hits += 1;
            }
        }
        hits
    });
    let hits: u64 = partials.iter().sum();
    let p = hits as f64 / rounds as f64;
    Ok(McEstimate {
        estimate: p,
        half_width_95: Z95 * (p * (1.0 - p) / rounds as f64).sqrt(),
        rounds,
    })
}

/// Both sides of `∫_0^1 (1-u)^p u^m du = p! m! / (p+m+1)!`.
///
/// The left side expands `(1-u)^p` binomially and integrates term by term, so
/// in an exact field the two sides are compared with zero tolerance.
pub fn check_beta_integral<F: Field>(p: usize, m: usize) -> Result<(F, F)> {
    if p + m > IDENTITY_LIMIT {
        return Err(Error::Argument(format!(
            "p + m = {} exceeds the limit {IDENTITY_LIMIT}",
            p + m
        )));
    }
    let mut lhs = F::zero();
    for i in 0..=p {
        let mut num = binomial(p as u64, i as u64);
        if i % 2 == 1 {
            num = -num;
        }
        lhs = lhs + F::from_ratio(&num, &((m + i + 1) as u64).into());
    }
    let rhs = F::from_ratio(
        &(factorial(p as u64) * factorial(m as u64)),
        &factorial((p + m + 1) as u64),
    );
    Ok((lhs, rhs))
}

/// Both sides of
/// `sum_{p=0}^{k-2} (-1)^{k-2-p} C(k-2,p) / (n-1-p) = (n-k)!(k-2)!/(n-1)!`.
pub fn check_alternating_sum<F: Field>(n: usize, k: usize) -> Result<(F, F)> {
    if !(n > k && k >= 2) {
        return Err(Error::Domain(format!("need n > k >= 2, got n={n}, k={k}")));
    }
    if n > IDENTITY_LIMIT {
        return Err(Error::Argument(format!(
            "n = {n} exceeds the limit {IDENTITY_LIMIT}"
        )));
    }
    let mut lhs = F::zero();
    for p in 0..=k - 2 {
        let mut num = binomial((k - 2) as u64, p as u64);
        if (k - 2 - p) % 2 == 1 {
            num = -num;
        }
        lhs = lhs + F::from_ratio(&num, &((n - 1 - p) as u64).into());
    }
    let rhs = F::from_ratio(
        &(factorial((n - k) as u64) * factorial((k - 2) as u64)),
        &factorial((n - 1) as u64),
    );
    Ok((lhs, rhs))
}

/// `1 / ((n-1) C(n-2, k-2))`, the reduced form of the alternating sum.
pub fn alternating_sum_reduced<F: Field>(n: usize, k: usize) -> F {
    F::from_ratio(
        &1.into(),
        &(binomial((n - 2) as u64, (k - 2) as u64) * (n - 1)),
    )
}
