//! Seeded simulation of the equilibrium price, holdings, wealth and
//! money-market paths, used by the budget/clearing audits and the CLI.
//!
//! The deterministic drift-to-maturity is integrated exactly per grid cell
//! (not Euler-stepped), so the terminal price equals the dividend as an
//! identity rather than an approximation. Gaussian increments come from a
//! ChaCha8 generator seeded with the caller's `u64`, mapped through
//! `rand_distr::StandardNormal`; identical `(spec, seed, n_steps)` inputs
//! yield bit-identical bundles.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::equilibrium;
use crate::model::{Deviations, ValidSpec};
use crate::numerics::{self, Func1d};
use crate::{Error, Result};

/// Default number of Euler steps.
pub const DEFAULT_STEPS: usize = 1024;

/// One simulated equilibrium path with everything the audits need.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub times: Vec<f64>,
    /// Brownian increments, one per grid cell.
    pub increments: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub wealth1: Vec<f64>,
    pub wealth2: Vec<f64>,
    pub money1: Vec<f64>,
    pub money2: Vec<f64>,
    /// Terminal dividend; equals the last price by construction.
    pub dividend: f64,
    pub lambda: f64,
    pub supply: f64,
}

/// Simulates one equilibrium path on a uniform grid with `n_steps` cells.
pub fn simulate(
    spec: &ValidSpec,
    dev: &Deviations,
    lambda: f64,
    n_steps: usize,
    seed: u64,
) -> Result<PathBundle> {
    if n_steps < 2 {
        return Err(Error::parameter("n_steps", "must be >= 2"));
    }
    let sol = equilibrium::solve(spec, dev, lambda)?;
    let horizon = spec.horizon();
    let supply = spec.supply();
    let n = n_steps;

    let times: Vec<f64> = (0..=n).map(|j| horizon * j as f64 / n as f64).collect();
    let dt = horizon / n as f64;
    let sqrt_dt = dt.sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let increments: Vec<f64> = (0..n)
        .map(|_| sqrt_dt * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();

    // Remaining deterministic drift, accumulated exactly from the right so
    // it vanishes at the horizon.
    let imbalance = dev.aggregate - supply;
    let c1n = spec.c1() * supply;
    let drift_fn = Func1d::with_breakpoints(
        |u| spec.kappa_clamped(u) * (spec.gamma_clamped(u) * imbalance - c1n),
        spec.joint_breakpoints().to_vec(),
    );
    let mut drift_tail = vec![0.0; n + 1];
    for j in (0..n).rev() {
        let cell = numerics::integrate(&drift_fn, times[j], times[j + 1], 1e-12)?;
        drift_tail[j] = drift_tail[j + 1] + 0.5 * cell;
    }

    let mut s_hat = Vec::with_capacity(n + 1);
    let mut martingale = 0.0;
    for j in 0..=n {
        s_hat.push(spec.dividend_mean() + martingale + drift_tail[j]);
        if j < n {
            martingale += spec.sigma_at(times[j]) * increments[j];
        }
    }
    let dividend = s_hat[n];

    let mut theta1 = Vec::with_capacity(n + 1);
    let mut theta2 = Vec::with_capacity(n + 1);
    for &t in &times {
        let (h1, h2) = sol.holdings(t)?;
        theta1.push(h1);
        theta2.push(h2);
    }

    // Self-financing bookkeeping with the money account as the state: each
    // trade debits shares at the current price plus the proportional fee.
    // Wealth is then money plus the marked position, so a path without
    // trades leaves the money account identically empty.
    let half = supply / 2.0;
    let book = |theta: &[f64]| {
        let block = theta[0] - half;
        let mut money = vec![0.0; n + 1];
        money[0] = -block * s_hat[0] - lambda * block.abs() + 0.0; // +0.0 folds away -0.0
        for j in 0..n {
            let traded = theta[j + 1] - theta[j];
            money[j + 1] = money[j] - traded * s_hat[j + 1] - lambda * traded.abs() + 0.0;
        }
        let wealth: Vec<f64> = (0..=n).map(|j| money[j] + theta[j] * s_hat[j]).collect();
        (money, wealth)
    };
    let (money1, wealth1) = book(&theta1);
    let (money2, wealth2) = book(&theta2);

    Ok(PathBundle {
        times,
        increments,
        s_hat,
        theta1,
        theta2,
        wealth1,
        wealth2,
        money1,
        money2,
        dividend,
        lambda,
        supply,
    })
}

/// Cumulative turnover of each agent along the path, the time-0 block trade
/// included.
pub fn turnover_path(bundle: &PathBundle) -> (Vec<f64>, Vec<f64>) {
    let half = bundle.supply / 2.0;
    let cumulate = |theta: &[f64]| {
        let mut total = (theta[0] - half).abs();
        let mut out = Vec::with_capacity(theta.len());
        out.push(total);
        for w in theta.windows(2) {
            total += (w[1] - w[0]).abs();
            out.push(total);
        }
        out
    };
    (cumulate(&bundle.theta1), cumulate(&bundle.theta2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{deviations, TargetPair, Volatility};
    use crate::testutil::twap_spec;

    fn section4_dev() -> Deviations {
        deviations(&TargetPair::new(52.5, 50.0))
    }

    #[test]
    fn deterministic_price_profile_without_noise() {
        let mut raw = twap_spec(0.0);
        raw.sigma = Volatility::Constant(0.0);
        let spec = raw.validate().unwrap();
        let dev = section4_dev();
        let bundle = simulate(&spec, &dev, 0.05, 64, 7).unwrap();
        // S(0) = E[D] + (1/2) * integral of t * 2.5 over [0,1] = E[D] + 0.625
        assert!((bundle.s_hat[0] - 100.625).abs() < 1e-12);
        assert!((bundle.dividend - 100.0).abs() < 1e-12);
        // Monotone decay toward the dividend: the aggregate imbalance is
        // positive, so the remaining drift shrinks.
        for w in bundle.s_hat.windows(2) {
            assert!(w[1] <= w[0] + 1e-14);
        }
    }

    #[test]
    fn terminal_price_equals_dividend_identically() {
        let spec = twap_spec(0.5).validate().unwrap();
        let dev = section4_dev();
        for seed in [0, 1, 42] {
            let bundle = simulate(&spec, &dev, 0.05, 256, seed).unwrap();
            assert_eq!(bundle.s_hat[256], bundle.dividend);
        }
    }

    #[test]
    fn bundles_are_seed_deterministic() {
        let spec = twap_spec(0.0).validate().unwrap();
        let dev = section4_dev();
        let a = simulate(&spec, &dev, 0.05, 128, 99).unwrap();
        let b = simulate(&spec, &dev, 0.05, 128, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate(&spec, &dev, 0.05, 128, 100).unwrap();
        assert_ne!(a.s_hat, c.s_hat);
    }

    #[test]
    fn turnover_matches_terminal_displacement() {
        let spec = twap_spec(0.0).validate().unwrap();
        let dev = section4_dev();
        let bundle = simulate(&spec, &dev, 0.05, 1024, 3).unwrap();
        let (t1, t2) = turnover_path(&bundle);
        let expected = 1.25 * (1.0 - 0.08_f64.sqrt());
        assert!((t1.last().unwrap() - expected).abs() < 1e-8);
        // Mirror strategies turn over the same amount.
        for (a, b) in t1.iter().zip(&t2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn no_trade_means_no_turnover() {
        let spec = twap_spec(0.0).validate().unwrap();
        let dev = deviations(&TargetPair::new(50.0, 50.0));
        let bundle = simulate(&spec, &dev, 0.05, 64, 11).unwrap();
        let (t1, t2) = turnover_path(&bundle);
        assert_eq!(t1.last().copied().unwrap(), 0.0);
        assert_eq!(t2.last().copied().unwrap(), 0.0);
    }

    #[test]
    fn wealth_adds_up_to_supply_value_minus_fees() {
        let spec = twap_spec(1.0).validate().unwrap();
        let dev = section4_dev();
        let bundle = simulate(&spec, &dev, 0.05, 512, 5).unwrap();
        let (t1, t2) = turnover_path(&bundle);
        let total_fees = bundle.lambda * (t1.last().unwrap() + t2.last().unwrap());
        let lhs = bundle.wealth1.last().unwrap() + bundle.wealth2.last().unwrap();
        let rhs = bundle.supply * bundle.dividend - total_fees;
        let scale = bundle.supply * bundle.s_hat[0].abs();
        assert!((lhs - rhs).abs() <= 1e-10 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn rejects_degenerate_grids() {
        let spec = twap_spec(0.0).validate().unwrap();
        let dev = section4_dev();
        assert!(simulate(&spec, &dev, 0.05, 1, 0).is_err());
    }
}
