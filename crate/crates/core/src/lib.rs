//! Symmetric equilibria of k-price auctions.
//!
//! In a k-price auction with `n` bidders the highest bid wins and pays the
//! k-th highest bid. This crate provides the closed-form symmetric
//! equilibrium for an arbitrary valuation distribution, order-statistic
//! tools, quadrature-based expected payoffs with best-response verification,
//! combination-price rules (a linear mix of the order statistics) with their
//! truthfulness condition, and a seeded Monte Carlo simulator used as an
//! independent check on all of the above.
//!
//! Numeric code is generic over [`Real`] (`f32`, `f64`); exact identities and
//! coefficient enumeration are generic over [`Field`], which also covers
//! [`num_rational::BigRational`]. The aliases below fix the common choices.

// `!(x > 0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combi;
pub mod combinatorics;
pub mod dist;
pub mod equilibrium;
pub mod error;
pub mod montecarlo;
pub mod numdiff;
pub mod order_stats;
pub mod payoff;
pub mod quad;
pub mod scalar;
pub mod sim;

pub use combi::{
    enumerate_truthful_vertices, minimize_alpha2, truthful_condition_residual, verify_truthfulness,
    CoefficientVector, TruthfulRule, TruthfulnessReport,
};
pub use dist::{DistributionSpec, Family, QuantileTable};
pub use equilibrium::{
    check_existence, solve_closed_form, AuctionSpec, BidTable, MonotonicityReport, Payment,
    Strategy, StrategyDescriptor,
};
pub use error::{Error, Result};
pub use payoff::{
    best_response, expected_payoff_combination, expected_payoff_kprice, verify_equilibrium,
    BestResponse, EquilibriumReport, GridSpec, PayoffQuery, VerifyOptions,
};
pub use scalar::{Field, Real};
pub use sim::{SimulationConfig, SimulationReport};

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;

pub type Distribution = DistributionSpec<f64>;
pub type Auction = AuctionSpec<f64>;
pub type Strategy64 = Strategy<f64>;
pub type Coefficients = CoefficientVector<f64>;
pub type ExactCoefficients = CoefficientVector<Rational>;
pub type Grid = GridSpec<f64>;
pub type Simulation = SimulationConfig<f64>;
