//! Analytic results checked against independent computations: direct
//! quadrature of first-order conditions and Monte Carlo play.

use kprice_core::payoff::{expected_payoff, PayoffQuery};
use kprice_core::quad;
use kprice_core::sim::{mc_payoff, run};
use kprice_core::{solve_closed_form, Auction, Coefficients, Distribution, Simulation, Strategy64};

fn families() -> Vec<Distribution> {
    vec![
        Distribution::uniform(),
        Distribution::polynomial(2.0).unwrap(),
        Distribution::polynomial(0.5).unwrap(),
        Distribution::exponential(1.0).unwrap(),
    ]
}

/// At equilibrium the marginal bid is neutral:
/// `∫_0^a (q(a) - g1(u)) u^(n-k) (a-u)^(k-3) du = 0` for `k >= 3`.
#[test]
fn equilibrium_satisfies_first_order_condition() {
    for d in families() {
        for n in 4..=7 {
            for k in 3..=n.min(5) {
                let spec = Auction::kprice(n, k, d.clone()).unwrap();
                let g = solve_closed_form(&spec).unwrap();
                for a in [0.2, 0.5, 0.8] {
                    let v = d.quantile(a).unwrap();
                    let foc = quad::integrate(
                        |u: f64| {
                            (v - g.bid_at_quantile(u).unwrap())
                                * u.powi((n - k) as i32)
                                * (a - u).powi((k - 3) as i32)
                        },
                        0.0,
                        a,
                    )
                    .unwrap();
                    let scale = v * a.powi((n - 2) as i32);
                    assert!(
                        foc.abs() <= 1e-8 * scale.max(1e-12),
                        "{d} n={n} k={k} a={a}: {foc}"
                    );
                }
            }
        }
    }
}

#[test]
fn quadrature_payoff_matches_monte_carlo() {
    let fixtures = [
        (Distribution::uniform(), 2usize, 2usize, 0.5, 0.5),
        (Distribution::uniform(), 5, 3, 0.6, 0.8),
        (Distribution::uniform(), 5, 3, 0.6, 0.7),
        (Distribution::uniform(), 5, 3, 0.6, 1.2),
        (Distribution::polynomial(2.0).unwrap(), 4, 4, 0.7, 0.9),
        (Distribution::exponential(1.0).unwrap(), 5, 4, 1.2, 1.5),
        (Distribution::uniform(), 4, 1, 0.9, 0.6),
    ];
    for (i, (d, n, k, v, x)) in fixtures.into_iter().enumerate() {
        let (spec, opponents) = if k >= 2 {
            let spec = Auction::kprice(n, k, d.clone()).unwrap();
            let g = solve_closed_form(&spec).unwrap();
            (spec, g)
        } else {
            let first_price = Coefficients::unit(n, 1).unwrap();
            let spec = Auction::combination(n, first_price, d.clone()).unwrap();
            (spec, Strategy64::truthful(d.clone()))
        };
        let q = PayoffQuery {
            spec: &spec,
            opponent_strategy: &opponents,
            v,
            x,
        };
        let exact = expected_payoff(&q).unwrap();
        let mc = mc_payoff(&spec, &opponents, v, x, 400_000, 100 + i as u64).unwrap();
        // 95% half-width is 1.96 standard errors; allow four standard errors
        let se = mc.half_width_95 / kprice_core::montecarlo::Z95;
        assert!(
            (mc.estimate - exact).abs() <= 4.0 * se + 1e-9,
            "fixture {i}: quadrature {exact}, simulated {} ± {}",
            mc.estimate,
            mc.half_width_95
        );
    }
}

#[test]
fn equilibrium_revenue_is_independent_of_k() {
    let d = Distribution::uniform();
    let mut revenues = Vec::new();
    for k in 2..=5 {
        let spec = Auction::kprice(5, k, d.clone()).unwrap();
        let g = solve_closed_form(&spec).unwrap();
        let r = run(&Simulation::symmetric(spec, g, 200_000, 40 + k as u64)).unwrap();
        assert!(
            (r.mean_revenue - 2.0 / 3.0).abs() <= 4.0 * r.revenue_half_width_95,
            "k={k}: {} ± {}",
            r.mean_revenue,
            r.revenue_half_width_95
        );
        assert_eq!(r.ties, 0);
        revenues.push(r);
    }
    for a in &revenues {
        for b in &revenues {
            let hw = a.revenue_half_width_95.hypot(b.revenue_half_width_95);
            assert!((a.mean_revenue - b.mean_revenue).abs() <= 4.0 * hw);
        }
    }
}

#[test]
fn shard_count_changes_only_the_noise() {
    let d = Distribution::exponential(1.0).unwrap();
    let spec = Auction::kprice(4, 3, d).unwrap();
    let g = solve_closed_form(&spec).unwrap();
    let a =
        run(&Simulation::symmetric(spec.clone(), g.clone(), 100_000, 5).with_shards(3)).unwrap();
    let b = run(&Simulation::symmetric(spec, g, 100_000, 5).with_shards(16)).unwrap();
    let hw = a.revenue_half_width_95.hypot(b.revenue_half_width_95);
    assert!((a.mean_revenue - b.mean_revenue).abs() <= 4.0 * hw);
    assert_ne!(a.mean_revenue, b.mean_revenue);
}
