//! Acceptance criteria, one PASS/FAIL line each, at their stated tolerances
//! and runtime budgets.
//!
//! A criterion listed in `KNOWN_FAILURES` is still run and still reported as
//! FAIL; the target only errors if a criterion fails unexpectedly or a known
//! failure starts passing.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kprice_cli::{run_and_record, Command, SimulateArgs};
use kprice_core::equilibrium::{
    four_price_formula, polynomial_slope_gamma, polynomial_slope_product, three_price_formula,
    uniform_slope,
};
use kprice_core::order_stats::{
    check_alternating_sum, check_beta_integral, joint_cdf_h, joint_density_hprime,
    mc_joint_probability, OpponentField,
};
use kprice_core::{
    quad, solve_closed_form, verify_equilibrium, verify_truthfulness, Auction, Distribution,
    ExactCoefficients, Grid, Rational, Simulation, Strategy64, VerifyOptions,
};

/// Criteria expected to fail: vertices of the factorial-weight rule do not
/// make truthful bidding an equilibrium under uniform valuations.
const KNOWN_FAILURES: &[u32] = &[8];

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn families() -> Vec<Distribution> {
    vec![
        Distribution::uniform(),
        Distribution::polynomial(2.0).unwrap(),
        Distribution::polynomial(0.5).unwrap(),
        Distribution::exponential(1.0).unwrap(),
    ]
}

fn closed_form_regression() -> Outcome {
    let d = Distribution::uniform();
    let mut worst = 0.0f64;
    for n in 2..=8 {
        for k in 2..=n {
            let g = solve_closed_form(&Auction::kprice(n, k, d.clone()).unwrap()).unwrap();
            let slope = (n - 1) as f64 / (n - k + 1) as f64;
            assert_eq!(slope, uniform_slope(n, k));
            for i in 1..=101 {
                let v = i as f64 / 102.0;
                worst = worst.max((g.bid(v).unwrap() / v - slope).abs());
            }
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("max |g(v)/v - (n-1)/(n-k+1)| = {worst:.2e}"),
    }
}

fn fast_path_agreement() -> Outcome {
    let mut worst = 0.0f64;
    for d in families() {
        for n in 4..=8 {
            let s3 = Auction::kprice(n, 3, d.clone()).unwrap();
            let s4 = Auction::kprice(n, 4, d.clone()).unwrap();
            let pairs = [
                (
                    solve_closed_form(&s3).unwrap(),
                    three_price_formula(&s3).unwrap(),
                ),
                (
                    solve_closed_form(&s4).unwrap(),
                    four_price_formula(&s4).unwrap(),
                ),
            ];
            for (general, fast) in &pairs {
                for i in 1..=99 {
                    let v = d.quantile(i as f64 / 100.0).unwrap();
                    worst = worst.max((general.bid(v).unwrap() - fast.bid(v).unwrap()).abs());
                }
            }
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("max bid difference {worst:.2e} over 4 families, n = 4..8"),
    }
}

fn polynomial_family() -> Outcome {
    let mut worst = 0.0f64;
    for m in 1..=3usize {
        let alpha = 1.0 / m as f64;
        for n in 4..=8 {
            for k in 3..=n {
                let gamma = polynomial_slope_gamma(n, k, alpha);
                let product = polynomial_slope_product(n, k, m);
                worst = worst.max((gamma - product).abs());
            }
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("max |Gamma ratio - product| = {worst:.2e}"),
    }
}

fn identity_suite() -> Outcome {
    let mut checked = 0;
    let mut failed = 0;
    for total in 0..=20 {
        for p in 0..=total {
            let (l, r) = check_beta_integral::<Rational>(p, total - p).unwrap();
            checked += 1;
            failed += usize::from(l != r);
        }
    }
    for n in 3..=20 {
        for k in 2..n {
            let (l, r) = check_alternating_sum::<Rational>(n, k).unwrap();
            checked += 1;
            failed += usize::from(l != r);
        }
    }
    Outcome {
        pass: failed == 0,
        detail: format!("{} of {checked} exact identities hold", checked - failed),
    }
}

fn order_statistic_oracle() -> Outcome {
    let fixtures: [(usize, usize, f64, f64, Distribution); 12] = [
        (3, 2, 0.3, 0.7, Distribution::uniform()),
        (4, 2, 0.5, 0.5, Distribution::uniform()),
        (4, 3, 0.3, 0.7, Distribution::uniform()),
        (5, 3, 0.4, 0.9, Distribution::uniform()),
        (5, 4, 0.2, 0.6, Distribution::uniform()),
        (6, 5, 0.5, 0.8, Distribution::uniform()),
        (6, 6, 0.3, 0.9, Distribution::uniform()),
        (5, 3, 0.5, 0.8, Distribution::polynomial(2.0).unwrap()),
        (4, 4, 0.2, 0.7, Distribution::polynomial(0.5).unwrap()),
        (7, 4, 0.6, 0.95, Distribution::polynomial(3.0).unwrap()),
        (5, 3, 0.7, 2.0, Distribution::exponential(1.0).unwrap()),
        (8, 5, 1.0, 3.0, Distribution::exponential(1.5).unwrap()),
    ];
    let mut mc_misses = 0;
    let mut worst_integral = 0.0f64;
    for (i, (n, k, t, x, d)) in fixtures.into_iter().enumerate() {
        let field = OpponentField::new(n, d).unwrap();
        let h = joint_cdf_h(&field, k, t, x).unwrap();
        let mc = mc_joint_probability(&field, k, t, x, 1_000_000, 500 + i as u64).unwrap();
        mc_misses += usize::from(!mc.brackets(h, 4.0));
        let integral =
            quad::integrate(|s| joint_density_hprime(&field, k, s, x).unwrap(), 0.0, t).unwrap();
        worst_integral = worst_integral.max((integral - h).abs());
    }
    Outcome {
        pass: mc_misses == 0 && worst_integral <= 1e-8,
        detail: format!(
            "{} of 12 fixtures bracketed by Monte Carlo; max |∫H' - H| = {worst_integral:.2e}",
            12 - mc_misses
        ),
    }
}

fn equilibrium_fixed_point() -> Outcome {
    let grid = Grid::Quantiles { points: 9 };
    let opts = VerifyOptions::default();
    let dists = [
        Distribution::uniform(),
        Distribution::polynomial(2.0).unwrap(),
        Distribution::exponential(1.0).unwrap(),
    ];
    let mut worst_eq = 0.0f64;
    let mut all_verdicts = true;
    let mut least_truthful = f64::INFINITY;
    for d in &dists {
        for k in 3..=5 {
            let spec = Auction::kprice(5, k, d.clone()).unwrap();
            let g = solve_closed_form(&spec).unwrap();
            let r = verify_equilibrium(&spec, &g, &grid, &opts).unwrap();
            worst_eq = worst_eq.max(r.max_gain);
            all_verdicts &= r.verdict;
        }
        let spec = Auction::kprice(5, 3, d.clone()).unwrap();
        let r = verify_equilibrium(&spec, &Strategy64::truthful(d.clone()), &grid, &opts).unwrap();
        least_truthful = least_truthful.min(r.max_gain);
    }
    Outcome {
        pass: all_verdicts && worst_eq <= 1e-5 && least_truthful > 1e-3,
        detail: format!(
            "equilibrium max gain {worst_eq:.2e}; truthful under k=3 gains at least {least_truthful:.2e}"
        ),
    }
}

fn revenue_equivalence() -> Outcome {
    let d = Distribution::uniform();
    let mut misses = Vec::new();
    let mut summary = Vec::new();
    for k in 2..=5 {
        let spec = Auction::kprice(5, k, d.clone()).unwrap();
        let g = solve_closed_form(&spec).unwrap();
        let r = kprice_core::sim::run(&Simulation::symmetric(spec, g, 1_000_000, 7000 + k as u64))
            .unwrap();
        if (r.mean_revenue - 2.0 / 3.0).abs() > 4.0 * r.revenue_half_width_95 {
            misses.push(k);
        }
        summary.push(format!(
            "k={k}: {:.5}±{:.5}",
            r.mean_revenue, r.revenue_half_width_95
        ));
    }
    Outcome {
        pass: misses.is_empty(),
        detail: summary.join(", "),
    }
}

fn combination_truthfulness() -> Outcome {
    let grid = Grid::Quantiles { points: 9 };
    let opts = VerifyOptions::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for text in [
        ["0.4", "0", "0", "0", "0.6"],
        ["0.2", "0.5", "0", "0", "0.3"],
    ] {
        let exact = ExactCoefficients::parse_exact(&text).unwrap();
        let residual = kprice_core::truthful_condition_residual(&exact, 5).unwrap();
        let zero = residual == Rational::from_integer(0.into());
        let coeffs = exact.to_real::<f64>();
        let uniform =
            verify_truthfulness(5, &coeffs, &Distribution::uniform(), &grid, &opts).unwrap();
        let poly = verify_truthfulness(
            5,
            &coeffs,
            &Distribution::polynomial(2.0).unwrap(),
            &grid,
            &opts,
        )
        .unwrap();
        let uniform_ok = uniform.deviation.max_gain <= 1e-5;
        let poly_fails = poly.deviation.max_gain > 1e-3;
        pass &= zero && uniform_ok && poly_fails;
        parts.push(format!(
            "({}): residual {}, uniform gain {:.2e} [{}], poly:2 gain {:.2e} [{}]",
            text.join(","),
            residual,
            uniform.deviation.max_gain,
            if uniform_ok { "ok" } else { "too large" },
            poly.deviation.max_gain,
            if poly_fails { "ok" } else { "too small" },
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn reproducibility() -> Outcome {
    let d = Distribution::exponential(1.0).unwrap();
    let spec = Auction::kprice(5, 4, d).unwrap();
    let g = solve_closed_form(&spec).unwrap();
    let cfg = Simulation::symmetric(spec, g, 200_000, 99).with_shards(8);
    let a = kprice_core::sim::run(&cfg).unwrap();
    let b = kprice_core::sim::run(&cfg).unwrap();
    let same_report =
        a == b && serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let command = Command::Simulate(SimulateArgs {
        dist: "uniform".into(),
        n: 5,
        k: Some(3),
        alphas: None,
        strategy: vec![],
        rounds: 100_000,
        seed: 2024,
        shards: 16,
        deviation: Some("truthful".into()),
        deviation_bidder: 1,
        trace: true,
        out: dir.path().join("first"),
    });
    let (_, first) = run_and_record(command).unwrap();
    let mut replay = first.params.clone();
    if let Command::Simulate(args) = &mut replay {
        args.out = dir.path().join("second");
    }
    let (_, second) = run_and_record(replay).unwrap();
    let same_digests = first.mismatches(&second).is_empty() && first.outputs.len() == 2;
    Outcome {
        pass: same_report && same_digests,
        detail: format!(
            "report bit-identical: {same_report}; manifest replay digests identical: {same_digests}"
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, f64, Check); 9] = [
        (1, "closed-form regression", 1.0, closed_form_regression),
        (2, "fast-path agreement", 5.0, fast_path_agreement),
        (3, "polynomial family", 1.0, polynomial_family),
        (4, "identity suite", 1.0, identity_suite),
        (5, "order-statistic oracle", 30.0, order_statistic_oracle),
        (6, "equilibrium fixed point", 120.0, equilibrium_fixed_point),
        (7, "revenue equivalence", 60.0, revenue_equivalence),
        (
            8,
            "combination truthfulness",
            120.0,
            combination_truthfulness,
        ),
        (9, "reproducibility", 10.0, reproducibility),
    ];
    let mut unexpected = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let on_time = within(elapsed, budget);
        let pass = outcome.pass && on_time;
        let known = KNOWN_FAILURES.contains(&id);
        println!(
            "{} criterion {id} ({name}): {} [{:.2}s of {budget}s]{}",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            if !pass && known {
                " (known failure)"
            } else {
                ""
            },
        );
        if pass == known {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criterion result(s) differ from expectations");
        ExitCode::FAILURE
    }
}
