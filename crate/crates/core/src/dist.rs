//! Valuation distributions.
//!
//! Every family exposes the CDF `F`, density `F'`, quantile `q = F^{-1}` and
//! quantile derivatives `q^{(m)}`. Analytic families carry closed-form
//! derivative stacks of any order; tabulated quantiles are interpolated with a
//! monotone cubic and differentiated numerically up to order 4.

use std::fmt;

use crate::error::{Error, Result};
use crate::numdiff;
use crate::scalar::Real;

/// Minimum finite-difference step for tabulated quantiles.
pub const TABLE_MIN_STEP: f64 = 1e-3;

/// Step multiple of the widest grid spacing used for tabulated quantiles.
pub const TABLE_STEP_SPACINGS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Family<T> {
    /// `F(x) = x` on `[0, 1]`.
    Uniform01,
    /// `F(x) = x^alpha` on `[0, 1]`.
    Polynomial {
        alpha: T,
    },
    /// `F(x) = 1 - exp(-rate x)` on `[0, inf)`.
    Exponential {
        rate: T,
    },
    Tabulated(QuantileTable<T>),
}

/// A valuation distribution together with the highest quantile-derivative
/// order it guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec<T> {
    family: Family<T>,
    max_derivative_order: usize,
}

impl<T: Real> DistributionSpec<T> {
    pub fn uniform() -> Self {
        DistributionSpec {
            family: Family::Uniform01,
            max_derivative_order: usize::MAX,
        }
    }

    pub fn polynomial(alpha: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha.is_finite()) {
            return Err(Error::Argument(format!(
                "polynomial exponent must be positive, got {alpha}"
            )));
        }
        Ok(DistributionSpec {
            family: Family::Polynomial { alpha },
            max_derivative_order: usize::MAX,
        })
    }

    pub fn exponential(rate: T) -> Result<Self> {
        if !(rate > T::zero() && rate.is_finite()) {
            return Err(Error::Argument(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Ok(DistributionSpec {
            family: Family::Exponential { rate },
            max_derivative_order: usize::MAX,
        })
    }

    pub fn tabulated(table: QuantileTable<T>) -> Self {
        DistributionSpec {
            family: Family::Tabulated(table),
            max_derivative_order: numdiff::MAX_ORDER,
        }
    }

    /// Lower the guaranteed derivative order (never raises it).
    pub fn with_max_derivative_order(mut self, order: usize) -> Self {
        self.max_derivative_order = self.max_derivative_order.min(order);
        self
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn max_derivative_order(&self) -> usize {
        self.max_derivative_order
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.family, Family::Tabulated(_))
    }

    /// Lower end and (if bounded) upper end of the support.
    pub fn support(&self) -> (T, Option<T>) {
        match &self.family {
            Family::Uniform01 | Family::Polynomial { .. } => (T::zero(), Some(T::one())),
            Family::Exponential { .. } => (T::zero(), None),
            Family::Tabulated(t) => (t.q[0], Some(*t.q.last().unwrap())),
        }
    }

    fn check_support(&self, x: T) -> Result<()> {
        let (lo, hi) = self.support();
        let inside = x >= lo && hi.map_or(x.is_finite(), |h| x <= h);
        if inside {
            Ok(())
        } else {
            Err(Error::Domain(format!("x={x} outside support of {self}")))
        }
    }

    pub fn cdf(&self, x: T) -> Result<T> {
        self.check_support(x)?;
        Ok(match &self.family {
            Family::Uniform01 => x,
            Family::Polynomial { alpha } => x.powf(*alpha),
            Family::Exponential { rate } => -(-*rate * x).exp_m1(),
            Family::Tabulated(t) => t.invert(x),
        })
    }

    /// Density `F'(x)`.
    pub fn density(&self, x: T) -> Result<T> {
        self.check_support(x)?;
        Ok(match &self.family {
            Family::Uniform01 => T::one(),
            Family::Polynomial { alpha } => *alpha * x.powf(*alpha - T::one()),
            Family::Exponential { rate } => *rate * (-*rate * x).exp(),
            Family::Tabulated(t) => T::one() / t.slope_at(t.invert(x)),
        })
    }

    /// Derivative of the density, `F''(x)`.
    pub fn density_derivative(&self, x: T) -> Result<T> {
        self.check_support(x)?;
        match &self.family {
            Family::Uniform01 => Ok(T::zero()),
            Family::Polynomial { alpha } => {
                Ok(*alpha * (*alpha - T::one()) * x.powf(*alpha - T::lit(2.0)))
            }
            Family::Exponential { rate } => Ok(-*rate * *rate * (-*rate * x).exp()),
            Family::Tabulated(t) => {
                // F'' = -q'' / q'^3 at a = F(x).
                let a = t.invert(x);
                let q2 = self.quantile_derivative(a, 2)?;
                let q1 = t.slope_at(a);
                Ok(-q2 / (q1 * q1 * q1))
            }
        }
    }

    pub fn quantile(&self, a: T) -> Result<T> {
        if !(a >= T::zero() && a <= T::one()) {
            return Err(Error::Domain(format!("quantile level a={a} outside [0,1]")));
        }
        match &self.family {
            Family::Uniform01 => Ok(a),
            Family::Polynomial { alpha } => Ok(a.powf(T::one() / *alpha)),
            Family::Exponential { rate } => {
                if a == T::one() {
                    Err(Error::Domain(
                        "quantile at a=1 is infinite on an unbounded support".into(),
                    ))
                } else {
                    Ok(-(-a).ln_1p() / *rate)
                }
            }
            Family::Tabulated(t) => Ok(t.eval(a)),
        }
    }

    /// The `order`-th derivative of the quantile function at `a`.
    ///
    /// Analytic families are exact at every order (endpoint values may be
    /// infinite where the family is singular). Tabulated quantiles use
    /// Richardson-extrapolated central differences and require
    /// `a` in `[h*order, 1 - h*order]`.
    pub fn quantile_derivative(&self, a: T, order: usize) -> Result<T> {
        if order == 0 {
            return self.quantile(a);
        }
        if order > self.max_derivative_order {
            return Err(Error::Capability {
                requested: order,
                available: self.max_derivative_order,
            });
        }
        if !(a >= T::zero() && a <= T::one()) {
            return Err(Error::Domain(format!("quantile level a={a} outside [0,1]")));
        }
        match &self.family {
            Family::Uniform01 => Ok(if order == 1 { T::one() } else { T::zero() }),
            Family::Polynomial { alpha } => {
                let beta = T::one() / *alpha;
                let mut coef = T::one();
                for i in 0..order {
                    coef = coef * (beta - T::count(i));
                }
                if coef == T::zero() {
                    Ok(T::zero())
                } else {
                    Ok(coef * a.powf(beta - T::count(order)))
                }
            }
            Family::Exponential { rate } => {
                let mut fact = T::one();
                for i in 1..order {
                    fact = fact * T::count(i);
                }
                Ok(fact / (*rate * (T::one() - a).powi(order as i32)))
            }
            Family::Tabulated(t) => {
                let h = t.fd_step();
                let required = h * T::count(order);
                let distance = a.min(T::one() - a);
                if distance < required {
                    return Err(Error::Stability {
                        at: a.as_f64(),
                        distance: distance.as_f64(),
                        required: required.as_f64(),
                    });
                }
                numdiff::derivative(|u| t.eval(u), a, order, h, 1)
            }
        }
    }

    /// Short label in the command-line mini-language.
    pub fn label(&self) -> String {
        match &self.family {
            Family::Uniform01 => "uniform".to_string(),
            Family::Polynomial { alpha } => format!("poly:{alpha}"),
            Family::Exponential { rate } => format!("exp:{rate}"),
            Family::Tabulated(_) => "table".to_string(),
        }
    }
}

impl<T: Real> fmt::Display for DistributionSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Quantile function given as knots `(a_i, q(a_i))` on `[0, 1]`, interpolated
/// by a monotone piecewise-cubic Hermite (Fritsch-Carlson) curve.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable<T> {
    a: Vec<T>,
    q: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> QuantileTable<T> {
    /// Knots must start at `a = 0`, end at `a = 1`, and be strictly increasing
    /// in both columns.
    pub fn new(points: Vec<(T, T)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Argument(
                "quantile table needs at least two rows".into(),
            ));
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) || !(w[1].1 > w[0].1) {
                return Err(Error::Argument(format!(
                    "quantile table is not strictly increasing at row {}",
                    i + 1
                )));
            }
        }
        let (a0, _) = points[0];
        let (a1, _) = *points.last().unwrap();
        if a0 != T::zero() || a1 != T::one() {
            return Err(Error::Argument(
                "quantile table must span a = 0 to a = 1".into(),
            ));
        }
        if points.iter().any(|(a, q)| !a.is_finite() || !q.is_finite()) {
            return Err(Error::Argument(
                "quantile table contains non-finite values".into(),
            ));
        }
        let (a, q): (Vec<T>, Vec<T>) = points.into_iter().unzip();
        let slopes = pchip_slopes(&a, &q);
        Ok(QuantileTable { a, q, slopes })
    }

    /// Tabulate an arbitrary quantile function on a uniform grid.
    pub fn from_fn(points: usize, q: impl Fn(T) -> T) -> Result<Self> {
        if points < 2 {
            return Err(Error::Argument(
                "quantile table needs at least two rows".into(),
            ));
        }
        let last = T::count(points - 1);
        let rows = (0..points)
            .map(|i| {
                let a = if i == points - 1 {
                    T::one()
                } else {
                    T::count(i) / last
                };
                (a, q(a))
            })
            .collect();
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.a.iter().copied().zip(self.q.iter().copied())
    }

    /// Widest spacing between adjacent `a` knots.
    pub fn max_spacing(&self) -> T {
        self.a
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), T::max)
    }

    pub fn fd_step(&self) -> T {
        T::lit(TABLE_MIN_STEP).max(T::lit(TABLE_STEP_SPACINGS) * self.max_spacing())
    }

    fn segment(&self, a: T) -> usize {
        let i = self.a.partition_point(|&k| k <= a);
        i.saturating_sub(1).min(self.a.len() - 2)
    }

    pub fn eval(&self, a: T) -> T {
        let i = self.segment(a);
        let h = self.a[i + 1] - self.a[i];
        let t = (a - self.a[i]) / h;
        hermite(
            t,
            h,
            self.q[i],
            self.q[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
        )
    }

    /// Derivative of the interpolant.
    pub fn slope_at(&self, a: T) -> T {
        let i = self.segment(a);
        let h = self.a[i + 1] - self.a[i];
        let t = (a - self.a[i]) / h;
        let (q0, q1, d0, d1) = (self.q[i], self.q[i + 1], self.slopes[i], self.slopes[i + 1]);
        let six = T::lit(6.0);
        let three = T::lit(3.0);
        (six * t * t - six * t) * (q0 - q1) / h
            + (three * t * t - T::lit(4.0) * t + T::one()) * d0
            + (three * t * t - T::lit(2.0) * t) * d1
    }

    /// Solve `eval(a) = x` for `a`.
    fn invert(&self, x: T) -> T {
        if x <= self.q[0] {
            return T::zero();
        }
        if x >= *self.q.last().unwrap() {
            return T::one();
        }
        let i = self.q.partition_point(|&k| k <= x).saturating_sub(1);
        let h = self.a[i + 1] - self.a[i];
        let (q0, q1, d0, d1) = (self.q[i], self.q[i + 1], self.slopes[i], self.slopes[i + 1]);
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..200 {
            let mid = T::lit(0.5) * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if hermite(mid, h, q0, q1, d0, d1) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.a[i] + T::lit(0.5) * (lo + hi) * h
    }
}

fn hermite<T: Real>(t: T, h: T, q0: T, q1: T, d0: T, d1: T) -> T {
    let t2 = t * t;
    let t3 = t2 * t;
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    (two * t3 - three * t2 + T::one()) * q0
        + (t3 - two * t2 + t) * h * d0
        + (three * t2 - two * t3) * q1
        + (t3 - t2) * h * d1
}

fn pchip_slopes<T: Real>(a: &[T], q: &[T]) -> Vec<T> {
    let n = a.len();
    let h: Vec<T> = a.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<T> = (0..n - 1).map(|i| (q[i + 1] - q[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![T::zero(); n];
    for i in 1..n - 1 {
        let w1 = T::lit(2.0) * h[i] + h[i - 1];
        let w2 = h[i] + T::lit(2.0) * h[i - 1];
        d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope<T: Real>(h0: T, h1: T, d0: T, d1: T) -> T {
    let s = ((T::lit(2.0) * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s <= T::zero() {
        T::zero()
    } else if s > T::lit(3.0) * d0 {
        T::lit(3.0) * d0
    } else {
        s
    }
}
