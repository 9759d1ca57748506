//! End-to-end acceptance suite. Each test prints one PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`) and asserts
//! the same condition, so a failing criterion fails the build.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use feeq::equilibrium;
use feeq::exchange::{self, FeeMethod, MarginalPrior, TargetPrior};
use feeq::model::{deviations, Agent, Deviations, Intensity, MarketSpec, TargetPair, Trajectory, ValidSpec, Volatility};
use feeq::oracle;
use feeq::simulate;

fn twap_market(c1: f64) -> MarketSpec {
    MarketSpec {
        horizon: 1.0,
        supply: 100.0,
        c1,
        kappa: Intensity::Constant(1.0),
        gamma: Trajectory::Twap,
        dividend_mean: 100.0,
        sigma: Volatility::Constant(0.2),
    }
}

fn section4() -> (ValidSpec, Deviations) {
    let spec = twap_market(0.0).validate().unwrap();
    let dev = deviations(&TargetPair::new(52.5, 50.0));
    (spec, dev)
}

fn section4_prior() -> TargetPrior {
    TargetPrior {
        a1: MarginalPrior::Uniform { lo: 50.0, hi: 55.0 },
        a2: 50.0,
    }
}

fn report(criterion: usize, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Deviation/impact/fee tuples shared by criteria 1 and 2.
fn random_tuples(n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let dev = 5.0 * (1.0 - rng.random::<f64>()); // (0, 5]
            let c1 = -0.4 + 3.4 * rng.random::<f64>(); // (-0.4, 3)
            let lambda = 2.0 * (1.0 - rng.random::<f64>()); // (0, 2]
            (dev, c1, lambda)
        })
        .collect()
}

#[test]
fn criterion_1_twap_profit_closed_form_cross_check() {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for (dev_target, c1, lambda) in random_tuples(200, 101) {
        let spec = twap_market(c1).validate().unwrap();
        let dev = deviations(&TargetPair::new(50.0 + dev_target, 50.0 - dev_target));
        let engine = exchange::profit(&spec, &dev, lambda).unwrap();
        let closed = exchange::twap_profit_closed_form(dev.dev1, c1, lambda);
        worst = worst.max((engine - closed).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        worst <= 1e-8 && elapsed < 5.0,
        &format!("max |engine - closed form| = {worst:.3e} over 200 tuples in {elapsed:.2}s"),
    );
}

#[test]
fn criterion_2_last_trading_time_closed_form() {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for (dev_target, c1, lambda) in random_tuples(200, 101) {
        let spec = twap_market(c1).validate().unwrap();
        let dev = deviations(&TargetPair::new(50.0 + dev_target, 50.0 - dev_target));
        let tau = equilibrium::last_trading_time(&spec, &dev, lambda).unwrap();
        let closed =
            (1.0 - (2.0 * lambda * (1.0 + c1) / (dev.dev1 * (1.0 + 2.0 * c1))).sqrt()).max(0.0);
        worst = worst.max((tau - closed).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        2,
        worst <= 1e-8 && elapsed < 5.0,
        &format!("max |bisection - closed form| = {worst:.3e} over 200 tuples in {elapsed:.2}s"),
    );
}

#[test]
fn criterion_3_expected_profit_curves() {
    let start = Instant::now();
    let prior = section4_prior();
    let lambdas: Vec<f64> = (0..200)
        .map(|i| 1e-4 + (2.5 - 1e-4) * i as f64 / 199.0)
        .collect();
    let mut pass = true;
    let mut detail = String::new();
    for c1 in [0.0, 0.5, 1.0, 2.0] {
        let spec = twap_market(c1).validate().unwrap();
        let curve =
            exchange::profit_curve(&spec, &prior, &lambdas, FeeMethod::Quadrature, 0, 1).unwrap();
        let first = curve.values[0];
        let last = *curve.values.last().unwrap();
        let (peak_idx, peak) = curve
            .values
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let interior = peak_idx > 0 && peak_idx + 1 < curve.values.len();
        if !(first < 1e-3 && last < 1e-3 && interior && peak > first.max(last)) {
            pass = false;
            detail = format!("c1 = {c1}: ends ({first:.2e}, {last:.2e}), peak {peak:.4} at index {peak_idx}");
            break;
        }
    }
    let opt = {
        let spec = twap_market(0.0).validate().unwrap();
        exchange::optimal_fee(&spec, &prior, Some((1e-4, 2.5)), FeeMethod::Quadrature, 0, 1).unwrap()
    };
    let located = (opt.lambda_hat - 0.369).abs() <= 0.005 && (opt.value - 0.281).abs() <= 0.002;
    let elapsed = start.elapsed().as_secs_f64();
    if detail.is_empty() {
        detail = format!(
            "four curves vanish at both ends with interior maxima; c1 = 0 optimum ({:.4}, {:.4}) in {elapsed:.2}s",
            opt.lambda_hat, opt.value
        );
    }
    report(3, pass && located && elapsed < 10.0, &detail);
}

#[test]
fn criterion_4_comparative_statics_in_impact() {
    let prior = section4_prior();
    let mut last_lambda = 0.0;
    let mut last_value = f64::INFINITY;
    let mut line = String::new();
    let mut pass = true;
    for c1 in [0.0, 0.5, 1.0, 2.0] {
        let spec = twap_market(c1).validate().unwrap();
        let opt = exchange::optimal_fee(&spec, &prior, Some((1e-4, 2.5)), FeeMethod::Quadrature, 0, 1)
            .unwrap();
        pass &= opt.lambda_hat > last_lambda && opt.value < last_value;
        last_lambda = opt.lambda_hat;
        last_value = opt.value;
        line.push_str(&format!(" c1={c1}: ({:.4}, {:.4})", opt.lambda_hat, opt.value));
    }
    report(
        4,
        pass,
        &format!("optimal fee strictly increasing, optimal value strictly decreasing:{line}"),
    );
}

#[test]
fn criterion_5_monte_carlo_agrees_with_quadrature() {
    let start = Instant::now();
    let (spec, _) = section4();
    let prior = section4_prior();
    let lambdas: Vec<f64> = (0..20).map(|i| 0.05 + 2.4 * i as f64 / 19.0).collect();
    let mc = exchange::profit_curve(&spec, &prior, &lambdas, FeeMethod::MonteCarlo, 100_000, 77)
        .unwrap();
    let quad =
        exchange::profit_curve(&spec, &prior, &lambdas, FeeMethod::Quadrature, 0, 77).unwrap();
    let mut worst_sigma = 0.0_f64;
    let mut pass = true;
    for i in 0..lambdas.len() {
        let gap = (mc.values[i] - quad.values[i]).abs();
        if mc.stderr[i] == 0.0 {
            pass &= gap == 0.0;
        } else {
            worst_sigma = worst_sigma.max(gap / mc.stderr[i]);
            pass &= gap <= 3.0 * mc.stderr[i];
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        5,
        pass && elapsed < 30.0,
        &format!(
            "20 fee points, 100k samples: max |mc - quadrature| = {worst_sigma:.2} stderr in {elapsed:.2}s"
        ),
    );
}

#[test]
fn criterion_6_optimality_oracle() {
    let (spec, dev) = section4();
    let mut pass = true;
    let mut lines = String::new();
    let configs: [(&str, Deviations, f64); 3] = [
        ("trading", dev, 0.05),
        ("deterred", dev, 1.0),
        ("no-deviation", deviations(&TargetPair::new(50.0, 50.0)), 0.05),
    ];
    for (name, dev, lambda) in configs {
        match oracle::verify_optimality(&spec, &dev, lambda, Agent::One, 64, 1000, 2024, 1e-6) {
            Ok(r) => {
                let tol = 1e-6 * r.v_star.abs();
                pass &= r.worst_gap <= tol && r.ascent_gain <= tol;
                lines.push_str(&format!(
                    " {name}: worst_gap={:.2e}, ascent_gain={:.2e} (tol {:.2e});",
                    r.worst_gap, r.ascent_gain, tol
                ));
            }
            Err(e) => {
                pass = false;
                lines.push_str(&format!(" {name}: {e};"));
            }
        }
    }
    report(6, pass, &format!("1000 challengers + ascent per config:{lines}"));
}

#[test]
fn criterion_7_equilibrium_audits() {
    let (spec, dev) = section4();
    let lambda = 0.05;
    let sol = equilibrium::solve(&spec, &dev, lambda).unwrap();

    let clearing = oracle::verify_clearing(&sol, 1024).unwrap();
    let clearing_ok = clearing <= 1e-12 * spec.supply();

    let mut drift_worst = 0.0_f64;
    for j in 1..512 {
        let t = sol.tau * j as f64 / 512.0;
        let (h1, h2) = sol.holdings(t).unwrap();
        let eq = sol.equilibrium_drift(t).unwrap();
        drift_worst = drift_worst
            .max((sol.perceived_drift(Agent::One, h1, t).unwrap() - eq).abs())
            .max((sol.perceived_drift(Agent::Two, h2, t).unwrap() - eq).abs());
    }
    let drift_ok = drift_worst <= 1e-10;

    let mut bound_worst = 0.0_f64;
    let mut pin_worst = 0.0_f64;
    for j in 0..=2048 {
        let t = j as f64 / 2048.0;
        let y = sol.adjoint(t).unwrap();
        bound_worst = bound_worst.max(y.y1.abs() / lambda - 1.0);
        if t <= sol.tau {
            pin_worst = pin_worst.max((y.y1 - lambda * dev.dev1.signum()).abs());
        }
    }
    let y_tau = sol.adjoint(sol.tau).unwrap();
    pin_worst = pin_worst.max((y_tau.y1 - lambda * dev.dev1.signum()).abs());
    let adjoint_ok = bound_worst <= 1e-12 && pin_worst <= 1e-10;

    report(
        7,
        clearing_ok && drift_ok && adjoint_ok,
        &format!(
            "clearing {clearing:.2e}, drift gap {drift_worst:.2e}, adjoint excess {bound_worst:.2e}, pin gap {pin_worst:.2e}"
        ),
    );
}

#[test]
fn criterion_8_pathwise_walras() {
    let (spec, dev) = section4();
    let scale = spec.supply() * (spec.dividend_mean() + 0.625);
    let mut money_worst = 0.0_f64;
    let mut consumption_worst = 0.0_f64;
    let mut terminal_identity = true;
    for seed in 0..100 {
        let bundle = simulate::simulate(&spec, &dev, 0.05, 256, seed).unwrap();
        terminal_identity &= bundle.s_hat[256] == bundle.dividend;
        let (money, consumption) = oracle::verify_walras(&bundle);
        money_worst = money_worst.max(money);
        consumption_worst = consumption_worst.max(consumption);
    }
    report(
        8,
        money_worst <= 1e-10 * scale && consumption_worst <= 1e-10 * scale && terminal_identity,
        &format!(
            "100 paths: money residual {money_worst:.2e}, consumption residual {consumption_worst:.2e}, terminal price == dividend: {terminal_identity}"
        ),
    );
}

#[test]
fn criterion_9_profit_lipschitz_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let c1_grid = [0.0, 0.5, 1.0, 2.0];
    let mut pass = true;
    let mut worst_ratio = 0.0_f64;
    for i in 0..200 {
        let c1 = c1_grid[i % c1_grid.len()];
        let spec = twap_market(c1).validate().unwrap();
        let dev = deviations(&TargetPair::new(52.5, 50.0));
        let a = 0.01 + 2.39 * rng.random::<f64>();
        let b = 0.01 + 2.39 * rng.random::<f64>();
        let (l1, l2) = if a < b { (a, b) } else { (b, a) };
        if l2 - l1 < 1e-9 {
            continue;
        }
        let tau1 = equilibrium::last_trading_time(&spec, &dev, l1).unwrap();
        let tail_mass = 1.0 - tau1; // unit intensity
        let gamma_t = 1.0; // TWAP at the horizon
        let bound = 2.0
            * (l2 / ((1.0 + 2.0 * c1) * tail_mass) + dev.dev1.abs() * gamma_t / (1.0 + c1))
            * (l2 - l1);
        let p1 = exchange::profit(&spec, &dev, l1).unwrap();
        let p2 = exchange::profit(&spec, &dev, l2).unwrap();
        let diff = (p1 - p2).abs();
        worst_ratio = worst_ratio.max(diff / bound);
        pass &= diff <= bound * (1.0 + 1e-9) + 1e-12;
    }
    report(
        9,
        pass,
        &format!("200 fee pairs: max |profit difference| / bound = {worst_ratio:.3}"),
    );
}
