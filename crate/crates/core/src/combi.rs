//! Combination-price auctions.
//!
//! The winner pays `alpha_1 Y_(1) + ... + alpha_s Y_(s)`, where `Y_(j)` is the
//! j-th highest of all `n` bids (the winner's own bid is `Y_(1)`). Truthful
//! coefficient vectors under uniform valuations lie on the polytope
//! `{alpha >= 0, sum alpha = 1, alpha_1 = sum_{k>=3} w_k alpha_k}`; two weight
//! rules are provided, see [`TruthfulRule`].

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::factorial;
use crate::dist::DistributionSpec;
use crate::equilibrium::{AuctionSpec, Strategy};
use crate::error::{Error, Result};
use crate::order_stats::density_coefficient;
use crate::payoff::{self, EquilibriumReport, GridSpec, VerifyOptions};
use crate::quad;
use crate::scalar::{Field, Real};

/// Tolerance on `sum alpha = 1` for inexact scalars.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Residual threshold below which the linear condition counts as satisfied.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;

/// Deviation gain above which a coefficient vector is declared not truthful.
pub const FALSIFICATION_GAIN: f64 = 1e-3;

/// Relative bound on the integral residual, scaled by `a^(n-1)`.
pub const INTEGRAL_RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Quantile levels at which integral residuals are reported.
pub const RESIDUAL_LEVELS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Convex weights on the top `s` bid order statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector<F> {
    alphas: Vec<F>,
}

impl<F: Field> CoefficientVector<F> {
    pub fn new(alphas: Vec<F>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Argument("coefficient vector is empty".into()));
        }
        if let Some(i) = alphas.iter().position(|a| *a < F::zero()) {
            return Err(Error::Argument(format!(
                "alpha_{} = {:?} is negative",
                i + 1,
                alphas[i]
            )));
        }
        let sum = alphas.iter().cloned().fold(F::zero(), |acc, a| acc + a);
        if !sum.near(&F::one(), SUM_TOLERANCE) {
            return Err(Error::Argument(format!(
                "coefficients sum to {sum:?}, expected 1"
            )));
        }
        Ok(CoefficientVector { alphas })
    }

    /// The unit vector on the k-th order statistic (`k` is 1-based).
    pub fn unit(s: usize, k: usize) -> Result<Self> {
        if k == 0 || k > s {
            return Err(Error::Argument(format!("unit index {k} outside 1..={s}")));
        }
        let alphas = (1..=s)
            .map(|i| if i == k { F::one() } else { F::zero() })
            .collect();
        Ok(CoefficientVector { alphas })
    }

    pub fn second_price(s: usize) -> Result<Self> {
        Self::unit(s, 2)
    }

    pub fn alphas(&self) -> &[F] {
        &self.alphas
    }

    /// `alpha_k`, 1-based; zero beyond `s`.
    pub fn alpha(&self, k: usize) -> F {
        self.alphas.get(k - 1).cloned().unwrap_or_else(F::zero)
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| a.approx_f64()).collect()
    }

    /// Convert into a floating-point vector (skips re-validation).
    pub fn to_real<T: Real>(&self) -> CoefficientVector<T> {
        CoefficientVector {
            alphas: self.alphas.iter().map(|a| T::lit(a.approx_f64())).collect(),
        }
    }

    /// `lambda * self + (1 - lambda) * other`, padding the shorter with zeros.
    pub fn blend(&self, other: &Self, lambda: F) -> Result<Self> {
        let s = self.len().max(other.len());
        let alphas = (1..=s)
            .map(|k| lambda.clone() * self.alpha(k) + (F::one() - lambda.clone()) * other.alpha(k))
            .collect();
        Self::new(alphas)
    }
}

impl CoefficientVector<BigRational> {
    /// Parse decimal strings exactly, e.g. `"0.2"` becomes `1/5`.
    pub fn parse_exact(values: &[&str]) -> Result<Self> {
        values
            .iter()
            .map(|s| parse_decimal(s))
            .collect::<Result<Vec<_>>>()
            .and_then(Self::new)
    }
}

fn parse_decimal(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a decimal number: '{s}'"));
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Ok(BigRational::new(num, den))
}

/// Weights `w_k` in the linear truthfulness condition
/// `alpha_1 = sum_{k=3}^s w_k alpha_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthfulRule {
    /// `w_k = (k-3)! (n-k)! (2k-n-3) / (n-2)!`.
    #[default]
    FactorialWeights,
    /// `w_k = k - 2`: the condition under which `∂U/∂x` vanishes at `x = v`
    /// for uniform valuations and truthful opponents.
    FirstOrder,
}

impl TruthfulRule {
    pub fn weight(self, n: usize, k: usize) -> BigRational {
        assert!(k >= 3 && k <= n, "weight defined for 3 <= k <= n");
        match self {
            TruthfulRule::FactorialWeights => {
                let num = factorial((k - 3) as u64)
                    * factorial((n - k) as u64)
                    * BigInt::from(2 * k as i64 - n as i64 - 3);
                BigRational::new(num, factorial((n - 2) as u64))
            }
            TruthfulRule::FirstOrder => BigRational::from_integer(BigInt::from(k - 2)),
        }
    }
}

fn check_len<F: Field>(coeffs: &CoefficientVector<F>, n: usize) -> Result<()> {
    if coeffs.len() > n {
        return Err(Error::Argument(format!(
            "{} coefficients exceed n = {n}",
            coeffs.len()
        )));
    }
    Ok(())
}

/// `alpha_1 - sum_{k=3}^s w_k alpha_k` under the default weights.
pub fn truthful_condition_residual<F: Field>(coeffs: &CoefficientVector<F>, n: usize) -> Result<F> {
    truthful_residual_with(coeffs, n, TruthfulRule::FactorialWeights)
}

pub fn truthful_residual_with<F: Field>(
    coeffs: &CoefficientVector<F>,
    n: usize,
    rule: TruthfulRule,
) -> Result<F> {
    check_len(coeffs, n)?;
    let mut r = coeffs.alpha(1);
    for k in 3..=coeffs.len() {
        let w = rule.weight(n, k);
        r = r - F::from_ratio(w.numer(), w.denom()) * coeffs.alpha(k);
    }
    Ok(r)
}

/// Vertices of the truthful polytope under the default weights.
pub fn enumerate_truthful_vertices<F: Field>(
    n: usize,
    s: usize,
) -> Result<Vec<CoefficientVector<F>>> {
    enumerate_vertices_with(n, s, TruthfulRule::FactorialWeights)
}

/// Basic feasible solutions of `{alpha >= 0, sum alpha = 1, residual = 0}`.
///
/// With two equality constraints every vertex has support of size one or two:
/// a unit vector `e_i` with `c_i = 0`, or a pair `(i, j)` with `c_i c_j < 0`,
/// where `c = (1, 0, -w_3, ..., -w_s)` are the residual coefficients. Vertices
/// are returned in lexicographic order of their support.
pub fn enumerate_vertices_with<F: Field>(
    n: usize,
    s: usize,
    rule: TruthfulRule,
) -> Result<Vec<CoefficientVector<F>>> {
    if s < 2 || s > n {
        return Err(Error::Argument(format!(
            "need 2 <= s <= n, got n={n}, s={s}"
        )));
    }
    let c: Vec<F> = (1..=s)
        .map(|k| match k {
            1 => F::one(),
            2 => F::zero(),
            _ => {
                let w = rule.weight(n, k);
                -F::from_ratio(w.numer(), w.denom())
            }
        })
        .collect();
    let zero = F::zero();
    let mut out = Vec::new();
    for i in 0..s {
        for j in i..s {
            let mut alphas = vec![F::zero(); s];
            if i == j {
                if c[i] != zero {
                    continue;
                }
                alphas[i] = F::one();
            } else {
                let opposite = (c[i] > zero && c[j] < zero) || (c[i] < zero && c[j] > zero);
                if !opposite {
                    continue;
                }
                let d = c[j].clone() - c[i].clone();
                alphas[i] = c[j].clone() / d.clone();
                alphas[j] = -c[i].clone() / d;
            }
            out.push(CoefficientVector::new(alphas)?);
        }
    }
    Ok(out)
}

/// The truthful vertex with the smallest `alpha_2` (first in enumeration
/// order among ties).
pub fn minimize_alpha2<F: Field>(n: usize, s: usize) -> Result<CoefficientVector<F>> {
    minimize_alpha2_with(n, s, TruthfulRule::FactorialWeights)
}

pub fn minimize_alpha2_with<F: Field>(
    n: usize,
    s: usize,
    rule: TruthfulRule,
) -> Result<CoefficientVector<F>> {
    let vertices = enumerate_vertices_with::<F>(n, s, rule)?;
    let mut best: Option<CoefficientVector<F>> = None;
    for v in vertices {
        if best.as_ref().is_none_or(|b| v.alpha(2) < b.alpha(2)) {
            best = Some(v);
        }
    }
    best.ok_or_else(|| Error::Numerical("no truthful vertex found".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub a: f64,
    pub residual: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthfulnessReport {
    pub n: usize,
    pub alphas: Vec<f64>,
    pub distribution: String,
    /// `q(a)a^{n-2} sum_{k>=3} (n-k)!(k-2)!/(n-2)! alpha_k - alpha_1 a^{n-1}
    ///  - ∫_0^a q(u) sum_{k>=3} alpha_k (k-2)(a-u)^{k-3} u^{n-k} du`.
    pub integral_residuals: Vec<ResidualPoint>,
    pub integral_ok: bool,
    /// `sum_{k>=3} alpha_k (n-1)!/((n-k)!(k-3)!) ∫_0^a (q(a)-q(u)) u^{n-k}(a-u)^{k-3} du
    ///  - alpha_1 a^{n-1} q'(a)`: `∂U/∂x` at `x = v = q(a)` divided by `F'(v)`.
    pub first_order_residuals: Vec<ResidualPoint>,
    pub first_order_ok: bool,
    pub deviation: EquilibriumReport,
    /// Best-response verdict: no deviation gains more than the tolerance.
    pub truthful: bool,
    /// The largest deviation gain exceeds [`FALSIFICATION_GAIN`].
    pub falsified: bool,
    pub falsification_gain: f64,
}

/// Check whether truthful bidding is an equilibrium of the combination
/// auction, by best-response search and by the integral residuals.
pub fn verify_truthfulness<T: Real>(
    n: usize,
    coeffs: &CoefficientVector<T>,
    valuation: &DistributionSpec<T>,
    v_grid: &GridSpec<T>,
    opts: &VerifyOptions,
) -> Result<TruthfulnessReport> {
    let spec = AuctionSpec::combination(n, coeffs.clone(), valuation.clone())?;
    let truthful = Strategy::truthful(valuation.clone());
    let deviation = payoff::verify_equilibrium(&spec, &truthful, v_grid, opts)?;

    let levels: Vec<f64> = RESIDUAL_LEVELS
        .iter()
        .copied()
        .filter(|&a| a < 1.0 || valuation.support().1.is_some())
        .collect();
    let integral_residuals = levels
        .par_iter()
        .map(|&a| {
            let r = integral_residual(n, coeffs, valuation, T::lit(a))?.as_f64();
            let bound = INTEGRAL_RESIDUAL_TOLERANCE * a.powi(n as i32 - 1);
            Ok(ResidualPoint {
                a,
                residual: r,
                bound,
                ok: r.abs() <= bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let first_order_residuals = levels
        .par_iter()
        .map(|&a| {
            let r = first_order_residual(n, coeffs, valuation, T::lit(a))?.as_f64();
            let bound = INTEGRAL_RESIDUAL_TOLERANCE * a.powi(n as i32 - 1);
            Ok(ResidualPoint {
                a,
                residual: r,
                bound,
                ok: r.abs() <= bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TruthfulnessReport {
        n,
        alphas: coeffs.to_f64(),
        distribution: valuation.label(),
        integral_ok: integral_residuals.iter().all(|p| p.ok),
        integral_residuals,
        first_order_ok: first_order_residuals.iter().all(|p| p.ok),
        first_order_residuals,
        truthful: deviation.verdict,
        falsified: deviation.max_gain > FALSIFICATION_GAIN,
        falsification_gain: FALSIFICATION_GAIN,
        deviation,
    })
}

fn integral_residual<T: Real>(
    n: usize,
    coeffs: &CoefficientVector<T>,
    valuation: &DistributionSpec<T>,
    a: T,
) -> Result<T> {
    let s = coeffs.len();
    let mut weight_sum = T::zero();
    for k in 3..=s {
        let c = BigRational::new(
            factorial((n - k) as u64) * factorial((k - 2) as u64),
            factorial((n - 2) as u64),
        );
        weight_sum = weight_sum + T::from_ratio(c.numer(), c.denom()) * coeffs.alpha(k);
    }
    let qa = valuation.quantile(a)?;
    let kernel = |u: T| -> T {
        (3..=s)
            .map(|k| {
                coeffs.alpha(k)
                    * T::count(k - 2)
                    * (a - u).powi((k - 3) as i32)
                    * u.powi((n - k) as i32)
            })
            .sum()
    };
    let integral = quad::integrate(
        |u| {
            valuation
                .quantile(u)
                .map(|q| q * kernel(u))
                .unwrap_or(T::nan())
        },
        T::zero(),
        a,
    )?;
    Ok(qa * a.powi(n as i32 - 2) * weight_sum - coeffs.alpha(1) * a.powi(n as i32 - 1) - integral)
}

fn first_order_residual<T: Real>(
    n: usize,
    coeffs: &CoefficientVector<T>,
    valuation: &DistributionSpec<T>,
    a: T,
) -> Result<T> {
    let s = coeffs.len();
    let qa = valuation.quantile(a)?;
    let kernel = |u: T| -> T {
        (3..=s)
            .map(|k| {
                coeffs.alpha(k)
                    * density_coefficient::<T>(n, k)
                    * T::count(k - 2)
                    * (a - u).powi((k - 3) as i32)
                    * u.powi((n - k) as i32)
            })
            .sum()
    };
    let integral = quad::integrate(
        |u| {
            valuation
                .quantile(u)
                .map(|q| (qa - q) * kernel(u))
                .unwrap_or(T::nan())
        },
        T::zero(),
        a,
    )?;
    let q1 = valuation.quantile_derivative(a, 1)?;
    Ok(integral - coeffs.alpha(1) * a.powi(n as i32 - 1) * q1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn exact(v: &[(i64, i64)]) -> CoefficientVector<BigRational> {
        CoefficientVector::new(v.iter().map(|&(a, b)| rat(a, b)).collect()).unwrap()
    }

    #[test]
    fn validation() {
        assert!(CoefficientVector::new(vec![0.5, 0.6]).is_err());
        assert!(CoefficientVector::new(vec![-0.1, 1.1]).is_err());
        assert!(CoefficientVector::<f64>::new(vec![]).is_err());
        assert!(CoefficientVector::new(vec![0.2, 0.5, 0.0, 0.0, 0.3]).is_ok());
        assert!(CoefficientVector::parse_exact(&["0.2", "0.5", "0", "0", "0.3"]).is_ok());
        assert!(CoefficientVector::parse_exact(&["0.2", "0.5", "0.30000001"]).is_err());
    }

    #[test]
    fn parse_exact_decimals() {
        let v = CoefficientVector::parse_exact(&["0.25", ".75"]).unwrap();
        assert_eq!(v.alphas(), &[rat(1, 4), rat(3, 4)]);
        assert!(parse_decimal("abc").is_err());
    }

    #[test]
    fn residual_examples() {
        let sp = exact(&[(0, 1), (1, 1)]);
        assert_eq!(truthful_condition_residual(&sp, 2).unwrap(), rat(0, 1));
        let v = CoefficientVector::parse_exact(&["0.2", "0.5", "0", "0", "0.3"]).unwrap();
        assert_eq!(TruthfulRule::FactorialWeights.weight(5, 5), rat(2, 3));
        assert_eq!(truthful_condition_residual(&v, 5).unwrap(), rat(0, 1));
        // w_3 = 0! 2! (6-5-3) / 3! = -2/3, so the residual is 0.2 + (2/3)(0.3)
        let w = CoefficientVector::parse_exact(&["0.2", "0.5", "0.3", "0", "0"]).unwrap();
        assert_eq!(TruthfulRule::FactorialWeights.weight(5, 3), rat(-2, 3));
        assert_eq!(truthful_condition_residual(&w, 5).unwrap(), rat(2, 5));
        assert!(truthful_condition_residual(&w, 4).is_err());
    }

    #[test]
    fn residual_in_floating_point() {
        let v = CoefficientVector::new(vec![0.2f64, 0.5, 0.0, 0.0, 0.3]).unwrap();
        assert!(truthful_condition_residual(&v, 5).unwrap().abs() <= RESIDUAL_TOLERANCE);
    }

    #[test]
    fn vertices_two_statistics() {
        for n in 2..8 {
            let vs = enumerate_truthful_vertices::<BigRational>(n, 2).unwrap();
            assert_eq!(vs, vec![exact(&[(0, 1), (1, 1)])]);
        }
    }

    #[test]
    fn vertices_n5_s5() {
        let vs = enumerate_truthful_vertices::<BigRational>(5, 5).unwrap();
        assert!(vs.contains(&exact(&[(0, 1), (1, 1), (0, 1), (0, 1), (0, 1)])));
        assert!(vs.contains(&exact(&[(2, 5), (0, 1), (0, 1), (0, 1), (3, 5)])));
        for v in &vs {
            assert_eq!(truthful_condition_residual(v, 5).unwrap(), rat(0, 1));
        }
        assert_eq!(vs.len(), 4);
    }

    #[test]
    fn vertices_n5_s4_zero_weight() {
        assert_eq!(TruthfulRule::FactorialWeights.weight(5, 4), rat(0, 1));
        let vs = enumerate_truthful_vertices::<BigRational>(5, 4).unwrap();
        assert!(vs.contains(&exact(&[(0, 1), (1, 1), (0, 1), (0, 1)])));
        assert!(vs.contains(&exact(&[(0, 1), (0, 1), (0, 1), (1, 1)])));
    }

    #[test]
    fn vertex_argument_errors() {
        assert!(enumerate_truthful_vertices::<f64>(4, 5).is_err());
        assert!(enumerate_truthful_vertices::<f64>(4, 1).is_err());
    }

    #[test]
    fn minimize_alpha2_examples() {
        let m = minimize_alpha2::<BigRational>(5, 5).unwrap();
        assert_eq!(m, exact(&[(2, 5), (0, 1), (0, 1), (0, 1), (3, 5)]));
        let m = minimize_alpha2::<BigRational>(7, 2).unwrap();
        assert_eq!(m.alpha(2), rat(1, 1));
        let m = minimize_alpha2::<BigRational>(6, 4).unwrap();
        assert_eq!(truthful_condition_residual(&m, 6).unwrap(), rat(0, 1));
        let all = enumerate_truthful_vertices::<BigRational>(6, 4).unwrap();
        assert!(all.iter().all(|v| v.alpha(2) >= m.alpha(2)));
    }

    #[test]
    fn first_order_rule_vertices() {
        let vs = enumerate_vertices_with::<BigRational>(5, 5, TruthfulRule::FirstOrder).unwrap();
        assert_eq!(
            vs,
            vec![
                exact(&[(1, 2), (0, 1), (1, 2), (0, 1), (0, 1)]),
                exact(&[(2, 3), (0, 1), (0, 1), (1, 3), (0, 1)]),
                exact(&[(3, 4), (0, 1), (0, 1), (0, 1), (1, 4)]),
                exact(&[(0, 1), (1, 1), (0, 1), (0, 1), (0, 1)]),
            ]
        );
    }

    #[test]
    fn float_and_exact_enumerations_agree() {
        for n in 3..=9 {
            for s in 2..=n {
                let e = enumerate_truthful_vertices::<BigRational>(n, s).unwrap();
                let f = enumerate_truthful_vertices::<f64>(n, s).unwrap();
                assert_eq!(e.len(), f.len());
                for (a, b) in e.iter().zip(&f) {
                    for (x, y) in a.to_f64().iter().zip(b.alphas()) {
                        assert!((x - y).abs() < 1e-14);
                    }
                    assert!(truthful_condition_residual(b, n).unwrap().abs() <= RESIDUAL_TOLERANCE);
                }
            }
        }
    }
}
