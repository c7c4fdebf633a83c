//! Symmetric equilibrium strategies of k-price auctions.
//!
//! On the quantile scale `a = F(v)` the equilibrium bid is
//!
//! ```text
//! g1(a) = (n-k)!/(n-2)! * a^(k-n) * d^(k-2)/da^(k-2) [ q(a) a^(n-2) ]
//! ```
//!
//! Expanding the derivative with the Leibniz rule cancels the singular power
//! of `a` and leaves
//!
//! ```text
//! g1(a) = sum_{j=0}^{k-2} C(k-2, j) (n-k)!/(n-k+j)! a^j q^(j)(a)
//! ```
//!
//! so only the quantile derivatives need numerics; the monomial factors are
//! exact. The equilibrium in valuation space is `g(v) = g1(F(v))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::combi::CoefficientVector;
use crate::combinatorics::binomial_f64;
use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::quad;
use crate::scalar::Real;

/// Quantile range of tabulated strategies.
pub const TABLE_QUANTILE_RANGE: (f64, f64) = (1e-4, 1.0 - 1e-4);

pub const DEFAULT_TABLE_POINTS: usize = 2049;

/// Payment rule of the auction.
#[derive(Debug, Clone, PartialEq)]
pub enum Payment<T> {
    /// The winner pays the k-th highest bid.
    KPrice(usize),
    /// The winner pays `sum_j alpha_j * (j-th highest bid)`, its own bid being the first.
    Combination(CoefficientVector<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionSpec<T> {
    n: usize,
    payment: Payment<T>,
    valuation: DistributionSpec<T>,
}

impl<T: Real> AuctionSpec<T> {
    pub fn kprice(n: usize, k: usize, valuation: DistributionSpec<T>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Argument(format!(
                "need at least 2 bidders, got n={n}"
            )));
        }
        if k < 2 || k > n {
            return Err(Error::Argument(format!(
                "k-price auction needs 2 <= k <= n, got n={n}, k={k}"
            )));
        }
        Ok(AuctionSpec {
            n,
            payment: Payment::KPrice(k),
            valuation,
        })
    }

    pub fn combination(
        n: usize,
        coeffs: CoefficientVector<T>,
        valuation: DistributionSpec<T>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Argument(format!(
                "need at least 2 bidders, got n={n}"
            )));
        }
        if coeffs.len() > n {
            return Err(Error::Argument(format!(
                "{} coefficients exceed the number of bids n={n}",
                coeffs.len()
            )));
        }
        Ok(AuctionSpec {
            n,
            payment: Payment::Combination(coeffs),
            valuation,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn payment(&self) -> &Payment<T> {
        &self.payment
    }

    pub fn valuation(&self) -> &DistributionSpec<T> {
        &self.valuation
    }

    pub fn k(&self) -> Option<usize> {
        match self.payment {
            Payment::KPrice(k) => Some(k),
            Payment::Combination(_) => None,
        }
    }

    /// `k = n`: the price is the lowest bid. The strategy formulas hold, but
    /// the alternating-sum identity used in the derivation is only stated for
    /// `n > k`, so reports flag this case.
    pub fn prices_at_lowest_bid(&self) -> bool {
        self.k() == Some(self.n)
    }

    fn require_k(&self, expected: Option<usize>) -> Result<usize> {
        match (self.payment.clone(), expected) {
            (Payment::KPrice(k), None) => Ok(k),
            (Payment::KPrice(k), Some(e)) if k == e => Ok(k),
            (Payment::KPrice(k), Some(e)) => Err(Error::Argument(format!(
                "formula is specific to k={e}, auction has k={k}"
            ))),
            (Payment::Combination(_), _) => Err(Error::Argument(
                "closed-form equilibria exist only for k-price payment rules".into(),
            )),
        }
    }
}

/// Closed-form strategies.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm<T> {
    /// `g(v) = slope * v`; truthful bidding is `slope = 1`.
    Linear { slope: T },
    /// The general Leibniz-expanded k-price equilibrium.
    KPrice { n: usize, k: usize },
    /// `g(v) = v + F(v) / ((n-2) F'(v))`.
    ThreePrice { n: usize },
    /// `g(v) = v + 2F/((n-3)F') - F^2 F''/((n-2)(n-3)F'^3)`.
    FourPrice { n: usize },
}

/// Bid function tabulated at knots `(v, bid)` with strictly increasing `v`,
/// interpolated linearly (and extrapolated along the end segments).
#[derive(Debug, Clone, PartialEq)]
pub struct BidTable<T> {
    v: Vec<T>,
    bid: Vec<T>,
}

impl<T: Real> BidTable<T> {
    pub fn new(rows: Vec<(T, T)>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Argument(
                "strategy table needs at least two rows".into(),
            ));
        }
        if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Argument(
                "strategy table valuations must be strictly increasing".into(),
            ));
        }
        if rows.iter().any(|(v, b)| !v.is_finite() || !b.is_finite()) {
            return Err(Error::Argument(
                "strategy table contains non-finite values".into(),
            ));
        }
        let (v, bid) = rows.into_iter().unzip();
        Ok(BidTable { v, bid })
    }

    pub fn rows(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.v.iter().copied().zip(self.bid.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn eval(&self, v: T) -> T {
        let i = self
            .v
            .partition_point(|&k| k <= v)
            .saturating_sub(1)
            .min(self.v.len() - 2);
        let t = (v - self.v[i]) / (self.v[i + 1] - self.v[i]);
        self.bid[i] + t * (self.bid[i + 1] - self.bid[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation<T> {
    ClosedForm(ClosedForm<T>),
    Table(BidTable<T>),
}

/// A symmetric bid function `g` over the support of a valuation distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy<T> {
    valuation: DistributionSpec<T>,
    representation: Representation<T>,
}

impl<T: Real> Strategy<T> {
    pub fn truthful(valuation: DistributionSpec<T>) -> Self {
        Self::linear(valuation, T::one())
    }

    pub fn linear(valuation: DistributionSpec<T>, slope: T) -> Self {
        Strategy {
            valuation,
            representation: Representation::ClosedForm(ClosedForm::Linear { slope }),
        }
    }

    pub fn from_table(valuation: DistributionSpec<T>, table: BidTable<T>) -> Self {
        Strategy {
            valuation,
            representation: Representation::Table(table),
        }
    }

    pub fn valuation(&self) -> &DistributionSpec<T> {
        &self.valuation
    }

    pub fn representation(&self) -> &Representation<T> {
        &self.representation
    }

    /// Support interval of the valuation distribution.
    pub fn domain(&self) -> (T, Option<T>) {
        self.valuation.support()
    }

    /// `g(v)`.
    pub fn bid(&self, v: T) -> Result<T> {
        match &self.representation {
            Representation::Table(t) => Ok(t.eval(v)),
            Representation::ClosedForm(cf) => match cf {
                ClosedForm::Linear { slope } => Ok(*slope * v),
                ClosedForm::KPrice { n, k } => {
                    let a = self.valuation.cdf(v)?;
                    leibniz_bid(&self.valuation, *n, *k, a)
                }
                ClosedForm::ThreePrice { n } => three_price_bid(&self.valuation, *n, v),
                ClosedForm::FourPrice { n } => four_price_bid(&self.valuation, *n, v),
            },
        }
    }

    /// `g1(a) = g(q(a))`, the bid of a bidder at valuation quantile `a`.
    pub fn bid_at_quantile(&self, a: T) -> Result<T> {
        match &self.representation {
            Representation::ClosedForm(ClosedForm::KPrice { n, k }) => {
                leibniz_bid(&self.valuation, *n, *k, a)
            }
            Representation::ClosedForm(ClosedForm::Linear { slope }) => {
                Ok(*slope * self.valuation.quantile(a)?)
            }
            _ => self.bid(self.valuation.quantile(a)?),
        }
    }

    /// Tabulate on `points` knots of the quantile range `[lo, hi]`.
    pub fn to_table_with(&self, points: usize, lo: f64, hi: f64) -> Result<Strategy<T>> {
        if points < 2 || !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Argument(format!(
                "invalid table grid: {points} points on [{lo}, {hi}]"
            )));
        }
        let step = (hi - lo) / (points - 1) as f64;
        let rows = (0..points)
            .into_par_iter()
            .map(|i| {
                let a = T::lit(if i == points - 1 {
                    hi
                } else {
                    lo + step * i as f64
                });
                Ok((self.valuation.quantile(a)?, self.bid_at_quantile(a)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Strategy::from_table(
            self.valuation.clone(),
            BidTable::new(rows)?,
        ))
    }

    pub fn to_table(&self) -> Result<Strategy<T>> {
        let (lo, hi) = TABLE_QUANTILE_RANGE;
        self.to_table_with(DEFAULT_TABLE_POINTS, lo, hi)
    }

    /// JSON descriptor `{family, n, k, parameters}` of a closed form, or
    /// `None` for tables.
    pub fn descriptor(&self) -> Option<StrategyDescriptor> {
        let family = self.valuation.label();
        let (n, k, parameters) = match &self.representation {
            Representation::Table(_) => return None,
            Representation::ClosedForm(cf) => match cf {
                ClosedForm::Linear { slope } => (
                    None,
                    None,
                    json!({"form": "linear", "slope": slope.as_f64()}),
                ),
                ClosedForm::KPrice { n, k } => (Some(*n), Some(*k), json!({"form": "kprice"})),
                ClosedForm::ThreePrice { n } => (Some(*n), Some(3), json!({"form": "three_price"})),
                ClosedForm::FourPrice { n } => (Some(*n), Some(4), json!({"form": "four_price"})),
            },
        };
        Some(StrategyDescriptor {
            family,
            n,
            k,
            parameters,
        })
    }

    /// Rebuild a closed form from its descriptor, given the parsed valuation.
    pub fn from_descriptor(
        valuation: DistributionSpec<T>,
        d: &StrategyDescriptor,
    ) -> Result<Strategy<T>> {
        let form = d
            .parameters
            .get("form")
            .and_then(|f| f.as_str())
            .ok_or_else(|| Error::Parse("strategy descriptor lacks parameters.form".into()))?;
        let need_n = || d.n.ok_or_else(|| Error::Parse("descriptor lacks n".into()));
        let cf = match form {
            "linear" => ClosedForm::Linear {
                slope: T::lit(
                    d.parameters
                        .get("slope")
                        .and_then(|s| s.as_f64())
                        .ok_or_else(|| Error::Parse("linear descriptor lacks slope".into()))?,
                ),
            },
            "kprice" => {
                let n = need_n()?;
                let k =
                    d.k.ok_or_else(|| Error::Parse("descriptor lacks k".into()))?;
                let spec = AuctionSpec::kprice(n, k, valuation.clone())?;
                return solve_closed_form(&spec);
            }
            "three_price" => ClosedForm::ThreePrice { n: need_n()? },
            "four_price" => ClosedForm::FourPrice { n: need_n()? },
            other => return Err(Error::Parse(format!("unknown strategy form '{other}'"))),
        };
        Ok(Strategy {
            valuation,
            representation: Representation::ClosedForm(cf),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDescriptor {
    pub family: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub parameters: serde_json::Value,
}

/// Weight `C(k-2, j) (n-k)!/(n-k+j)!` of `a^j q^(j)(a)` in the expansion.
fn leibniz_weight(n: usize, k: usize, j: usize) -> f64 {
    let mut w = binomial_f64(k - 2, j);
    for i in 1..=j {
        w /= (n - k + i) as f64;
    }
    w
}

fn leibniz_bid<T: Real>(dist: &DistributionSpec<T>, n: usize, k: usize, a: T) -> Result<T> {
    if a == T::zero() {
        // every term but j = 0 vanishes in the limit a -> 0
        return dist.quantile(a);
    }
    let mut g = T::zero();
    let mut a_pow = T::one();
    for j in 0..=k - 2 {
        let qj = dist.quantile_derivative(a, j)?;
        g = g + T::lit(leibniz_weight(n, k, j)) * a_pow * qj;
        a_pow = a_pow * a;
    }
    Ok(g)
}

fn three_price_bid<T: Real>(dist: &DistributionSpec<T>, n: usize, v: T) -> Result<T> {
    let f = dist.cdf(v)?;
    if f == T::zero() {
        return Ok(v);
    }
    let density = dist.density(v)?;
    if !(density > T::zero()) {
        return Err(Error::Numerical(format!("density vanishes at v={v}")));
    }
    Ok(v + f / (T::count(n - 2) * density))
}

fn four_price_bid<T: Real>(dist: &DistributionSpec<T>, n: usize, v: T) -> Result<T> {
    let f = dist.cdf(v)?;
    if f == T::zero() {
        return Ok(v);
    }
    let d1 = dist.density(v)?;
    if !(d1 > T::zero()) {
        return Err(Error::Numerical(format!("density vanishes at v={v}")));
    }
    let d2 = dist.density_derivative(v)?;
    let n2 = T::count(n - 2);
    let n3 = T::count(n - 3);
    Ok(v + T::lit(2.0) * f / (n3 * d1) - f * f * d2 / (n2 * n3 * d1 * d1 * d1))
}

/// The equilibrium of a k-price auction (`k = 2` gives truthful bidding).
pub fn solve_closed_form<T: Real>(spec: &AuctionSpec<T>) -> Result<Strategy<T>> {
    let k = spec.require_k(None)?;
    let available = spec.valuation.max_derivative_order();
    if k - 2 > available {
        return Err(Error::Capability {
            requested: k - 2,
            available,
        });
    }
    Ok(Strategy {
        valuation: spec.valuation.clone(),
        representation: Representation::ClosedForm(ClosedForm::KPrice { n: spec.n, k }),
    })
}

pub fn three_price_formula<T: Real>(spec: &AuctionSpec<T>) -> Result<Strategy<T>> {
    spec.require_k(Some(3))?;
    Ok(Strategy {
        valuation: spec.valuation.clone(),
        representation: Representation::ClosedForm(ClosedForm::ThreePrice { n: spec.n }),
    })
}

pub fn four_price_formula<T: Real>(spec: &AuctionSpec<T>) -> Result<Strategy<T>> {
    spec.require_k(Some(4))?;
    Ok(Strategy {
        valuation: spec.valuation.clone(),
        representation: Representation::ClosedForm(ClosedForm::FourPrice { n: spec.n }),
    })
}

/// `g(v) / v` for uniform valuations: `(n-1)/(n-k+1)`.
pub fn uniform_slope(n: usize, k: usize) -> f64 {
    (n - 1) as f64 / (n - k + 1) as f64
}

/// `g(v) / v` for `F(x) = x^alpha` via the Gamma ratio
/// `Γ(n-k+1) Γ(n-1+1/α) / (Γ(n-k+1+1/α) Γ(n-1))`.
pub fn polynomial_slope_gamma(n: usize, k: usize, alpha: f64) -> f64 {
    use statrs::function::gamma::gamma;
    let beta = 1.0 / alpha;
    let nk = (n - k + 1) as f64;
    let n1 = (n - 1) as f64;
    gamma(nk) * gamma(n1 + beta) / (gamma(nk + beta) * gamma(n1))
}

/// `g(v) / v` for `alpha = 1/m`: `prod_{i=n-k+1}^{n-2} (i + m) / i`.
pub fn polynomial_slope_product(n: usize, k: usize, m: usize) -> f64 {
    ((n - k + 1)..=(n - 2))
        .map(|i| (i + m) as f64 / i as f64)
        .product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Index `i` of the grid point whose successor does not increase.
    pub index: usize,
    pub a: f64,
    pub v: f64,
    pub bid: f64,
    pub next_bid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub increasing: bool,
    pub grid_size: usize,
    pub min_increment: f64,
    pub first_violation: Option<Violation>,
}

/// Sample `g1` on a uniform quantile grid over [`TABLE_QUANTILE_RANGE`] and
/// report whether it is strictly increasing.
pub fn check_existence<T: Real>(
    strategy: &Strategy<T>,
    grid_size: usize,
) -> Result<MonotonicityReport> {
    if grid_size < 16 {
        return Err(Error::Argument(format!(
            "existence check needs at least 16 grid points, got {grid_size}"
        )));
    }
    let (lo, hi) = TABLE_QUANTILE_RANGE;
    let step = (hi - lo) / (grid_size - 1) as f64;
    let samples = (0..grid_size)
        .into_par_iter()
        .map(|i| {
            let a = if i == grid_size - 1 {
                hi
            } else {
                lo + step * i as f64
            };
            let at = T::lit(a);
            let v = strategy.valuation.quantile(at)?;
            Ok((a, v.as_f64(), strategy.bid_at_quantile(at)?.as_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut min_increment = f64::INFINITY;
    let mut first_violation = None;
    for (i, w) in samples.windows(2).enumerate() {
        let inc = w[1].2 - w[0].2;
        min_increment = min_increment.min(inc);
        if !(inc > 0.0) && first_violation.is_none() {
            first_violation = Some(Violation {
                index: i,
                a: w[0].0,
                v: w[0].1,
                bid: w[0].2,
                next_bid: w[1].2,
            });
        }
    }
    Ok(MonotonicityReport {
        increasing: first_violation.is_none(),
        grid_size,
        min_increment,
        first_violation,
    })
}

/// `∫_0^x (x - g(t)) F(t)^{n-k} (F(x) - F(t))^{k-3} F'(t) dt`, evaluated on
/// the quantile scale `u = F(t)`. Vanishes for all `x` at an equilibrium of
/// the k-price auction (`k >= 3`).
pub fn ret_residual<T: Real>(strategy: &Strategy<T>, n: usize, k: usize, x: T) -> Result<T> {
    if k < 3 || k > n {
        return Err(Error::Argument(format!(
            "integral condition needs 3 <= k <= n, got n={n}, k={k}"
        )));
    }
    let a = strategy.valuation.cdf(x)?;
    let mut err = None;
    let value = quad::integrate(
        |u: T| match strategy.bid_at_quantile(u) {
            Ok(g) => (x - g) * u.powi((n - k) as i32) * (a - u).powi((k - 3) as i32),
            Err(e) => {
                err.get_or_insert(e);
                T::zero()
            }
        },
        T::zero(),
        a,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::QuantileTable;
    use approx::assert_relative_eq;

    fn uni() -> DistributionSpec<f64> {
        DistributionSpec::uniform()
    }

    #[test]
    fn uniform_example() {
        let s = solve_closed_form(&AuctionSpec::kprice(5, 3, uni()).unwrap()).unwrap();
        for &v in &[0.1, 0.5, 0.9] {
            assert_relative_eq!(s.bid(v).unwrap(), 4.0 / 3.0 * v, epsilon = 1e-15);
        }
        assert_eq!(uniform_slope(5, 3), 4.0 / 3.0);
    }

    #[test]
    fn second_price_is_truthful_for_any_distribution() {
        for d in [
            uni(),
            DistributionSpec::polynomial(2.0).unwrap(),
            DistributionSpec::exponential(1.0).unwrap(),
        ] {
            let s = solve_closed_form(&AuctionSpec::kprice(6, 2, d).unwrap()).unwrap();
            for &v in &[0.2, 0.7] {
                assert_relative_eq!(s.bid(v).unwrap(), v, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn polynomial_half_example() {
        let d = DistributionSpec::polynomial(0.5).unwrap();
        let s = solve_closed_form(&AuctionSpec::kprice(4, 3, d).unwrap()).unwrap();
        for &v in &[0.1, 0.4, 0.8] {
            assert_relative_eq!(s.bid(v).unwrap(), 2.0 * v, epsilon = 1e-14);
        }
        // Γ(2)Γ(5)/(Γ(4)Γ(3)) = 24/12 = 2
        assert_relative_eq!(polynomial_slope_gamma(4, 3, 0.5), 2.0, epsilon = 1e-13);
        assert_relative_eq!(polynomial_slope_product(4, 3, 2), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn exponential_three_price_example() {
        let d = DistributionSpec::exponential(1.0).unwrap();
        let s = solve_closed_form(&AuctionSpec::kprice(4, 3, d).unwrap()).unwrap();
        for &v in &[0.1, 1.0, 2.5] {
            let expected = v + (f64::exp(v) - 1.0) / 2.0;
            assert_relative_eq!(s.bid(v).unwrap(), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn three_price_examples() {
        let spec = AuctionSpec::kprice(5, 3, uni()).unwrap();
        let fast = three_price_formula(&spec).unwrap();
        assert_relative_eq!(fast.bid(0.6).unwrap(), 0.8, epsilon = 1e-15);
        assert_eq!(fast.bid(0.0).unwrap(), 0.0);
        let p = DistributionSpec::polynomial(2.0).unwrap();
        let fast = three_price_formula(&AuctionSpec::kprice(4, 3, p).unwrap()).unwrap();
        assert_relative_eq!(fast.bid(0.6).unwrap(), 1.25 * 0.6, epsilon = 1e-15);
    }

    #[test]
    fn four_price_examples() {
        let fast = four_price_formula(&AuctionSpec::kprice(5, 4, uni()).unwrap()).unwrap();
        assert_relative_eq!(fast.bid(0.3).unwrap(), 0.6, epsilon = 1e-15);
        assert_eq!(fast.bid(0.0).unwrap(), 0.0);
        let p = DistributionSpec::polynomial(2.0).unwrap();
        let spec = AuctionSpec::kprice(5, 4, p).unwrap();
        let fast = four_price_formula(&spec).unwrap();
        let general = solve_closed_form(&spec).unwrap();
        for &v in &[0.2, 0.5, 0.9] {
            assert_relative_eq!(
                fast.bid(v).unwrap(),
                general.bid(v).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn fast_paths_reject_wrong_k() {
        let spec = AuctionSpec::kprice(5, 4, uni()).unwrap();
        assert!(three_price_formula(&spec).is_err());
        let spec = AuctionSpec::kprice(5, 3, uni()).unwrap();
        assert!(four_price_formula(&spec).is_err());
    }

    #[test]
    fn invalid_auctions() {
        assert!(AuctionSpec::kprice(4, 5, uni()).is_err());
        assert!(AuctionSpec::kprice(4, 1, uni()).is_err());
        assert!(AuctionSpec::kprice(1, 1, uni()).is_err());
        assert!(AuctionSpec::kprice(4, 4, uni())
            .unwrap()
            .prices_at_lowest_bid());
    }

    #[test]
    fn derivative_capability_is_checked() {
        let d = uni().with_max_derivative_order(1);
        assert!(matches!(
            solve_closed_form(&AuctionSpec::kprice(6, 4, d).unwrap()),
            Err(Error::Capability { .. })
        ));
    }

    #[test]
    fn existence_uniform_linear() {
        let s = solve_closed_form(&AuctionSpec::kprice(5, 3, uni()).unwrap()).unwrap();
        let r = check_existence(&s, 101).unwrap();
        assert!(r.increasing);
        let step = (TABLE_QUANTILE_RANGE.1 - TABLE_QUANTILE_RANGE.0) / 100.0;
        assert_relative_eq!(r.min_increment, 4.0 / 3.0 * step, max_relative = 1e-9);
        let truthful = solve_closed_form(
            &AuctionSpec::kprice(3, 2, DistributionSpec::exponential(2.0).unwrap()).unwrap(),
        )
        .unwrap();
        assert!(check_existence(&truthful, 64).unwrap().increasing);
        assert!(check_existence(&truthful, 8).is_err());
    }

    #[test]
    fn existence_detects_inversion() {
        let grid = 32;
        let (lo, hi) = TABLE_QUANTILE_RANGE;
        let step = (hi - lo) / (grid - 1) as f64;
        let mut rows: Vec<(f64, f64)> = (0..grid)
            .map(|i| {
                let v = if i == grid - 1 {
                    hi
                } else {
                    lo + step * i as f64
                };
                (v, 1.5 * v)
            })
            .collect();
        rows[20].1 = rows[18].1;
        let s = Strategy::from_table(uni(), BidTable::new(rows).unwrap());
        let r = check_existence(&s, grid).unwrap();
        assert!(!r.increasing);
        let viol = r.first_violation.unwrap();
        assert_eq!(viol.index, 19);
        assert!(r.min_increment < 0.0);
    }

    #[test]
    fn table_matches_closed_form() {
        let d = DistributionSpec::polynomial(2.0).unwrap();
        let s = solve_closed_form(&AuctionSpec::kprice(6, 4, d).unwrap()).unwrap();
        let t = s.to_table().unwrap();
        for &v in &[0.15, 0.5, 0.95] {
            assert_relative_eq!(t.bid(v).unwrap(), s.bid(v).unwrap(), max_relative = 1e-6);
        }
    }

    #[test]
    fn overbidding_on_fixtures() {
        for d in [
            uni(),
            DistributionSpec::polynomial(2.0).unwrap(),
            DistributionSpec::polynomial(0.5).unwrap(),
            DistributionSpec::exponential(1.0).unwrap(),
        ] {
            for k in 3..=5 {
                let s = solve_closed_form(&AuctionSpec::kprice(6, k, d.clone()).unwrap()).unwrap();
                for i in 1..20 {
                    let v = d.quantile(i as f64 / 20.0).unwrap();
                    assert!(s.bid(v).unwrap() >= v, "{d} k={k} v={v}");
                }
            }
        }
    }

    #[test]
    fn scale_equivariance_for_tabulated_uniform() {
        let c = 3.0;
        let table = QuantileTable::from_fn(2001, |a: f64| c * a).unwrap();
        let scaled = DistributionSpec::tabulated(table);
        for k in 3..=5 {
            let g_c =
                solve_closed_form(&AuctionSpec::kprice(6, k, scaled.clone()).unwrap()).unwrap();
            let g_1 = solve_closed_form(&AuctionSpec::kprice(6, k, uni()).unwrap()).unwrap();
            for &v in &[0.5, 1.2, 2.4] {
                let lhs = g_c.bid(v).unwrap();
                let rhs = c * g_1.bid(v / c).unwrap();
                assert!((lhs - rhs).abs() <= 1e-5, "k={k} v={v}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn ret_residual_vanishes_at_equilibrium() {
        for d in [
            uni(),
            DistributionSpec::polynomial(2.0).unwrap(),
            DistributionSpec::exponential(1.0).unwrap(),
        ] {
            for (n, k) in [(5, 3), (5, 4), (5, 5), (7, 4)] {
                let s = solve_closed_form(&AuctionSpec::kprice(n, k, d.clone()).unwrap()).unwrap();
                for &x in &[0.25, 0.5, 0.75, 1.0] {
                    let r = ret_residual(&s, n, k, x).unwrap();
                    assert!(
                        r.abs() <= 1e-6 * f64::powi(x, n as i32 - 2),
                        "{d} n={n} k={k} x={x}: {r}"
                    );
                }
            }
        }
        // and does not vanish for truthful bidding
        let t = Strategy::truthful(uni());
        assert!(ret_residual(&t, 5, 3, 0.5).unwrap().abs() > 1e-4);
    }

    #[test]
    fn descriptor_round_trip() {
        let d = DistributionSpec::polynomial(2.0).unwrap();
        let s = solve_closed_form(&AuctionSpec::kprice(5, 4, d.clone()).unwrap()).unwrap();
        let desc = s.descriptor().unwrap();
        assert_eq!(desc.family, "poly:2");
        assert_eq!((desc.n, desc.k), (Some(5), Some(4)));
        let back = Strategy::from_descriptor(d, &desc).unwrap();
        assert_eq!(back, s);
    }
}
