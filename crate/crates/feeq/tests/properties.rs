//! Property tests for the numeric and equilibrium invariants.

use proptest::collection::vec;
use proptest::prelude::*;

use feeq::equilibrium;
use feeq::exchange;
use feeq::model::{deviations, Intensity, MarketSpec, TargetPair, Trajectory, Volatility};
use feeq::numerics::{first_time_below, integrate, Func1d, DEFAULT_REL_TOL};
use feeq::oracle;

fn market(c1: f64, kappa: Intensity, gamma: Trajectory) -> MarketSpec {
    MarketSpec {
        horizon: 1.0,
        supply: 100.0,
        c1,
        kappa,
        gamma,
        dividend_mean: 100.0,
        sigma: Volatility::Constant(0.1),
    }
}

/// Nondecreasing [0, 1]-valued step table with first node at zero.
fn arb_gamma_table() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (vec(0.01..0.99f64, 1..5), vec(0.0..1.0f64, 6))
        .prop_map(|(mut times, raw)| {
            times.sort_by(f64::total_cmp);
            times.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let total: f64 = raw.iter().take(times.len() + 1).sum::<f64>() + 1.0;
            let mut table = Vec::with_capacity(times.len() + 1);
            let mut level = 0.0;
            for (i, t) in std::iter::once(0.0).chain(times).enumerate() {
                level += raw[i];
                table.push((t, level / total));
            }
            table
        })
}

/// Strictly positive step table for the intensity.
fn arb_kappa_table() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (vec(0.01..0.99f64, 1..4), vec(0.1..4.0f64, 5)).prop_map(|(mut times, values)| {
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        std::iter::once(0.0)
            .chain(times)
            .zip(values)
            .collect::<Vec<_>>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn integrate_is_additive_on_cubics(
        coeffs in vec(-3.0..3.0f64, 4),
        points in vec(0.0..2.0f64, 3),
    ) {
        let mut p = points.clone();
        p.sort_by(f64::total_cmp);
        let (a, b, c) = (p[0], p[1], p[2]);
        let f = Func1d::new(|u: f64| {
            coeffs[0] + u * (coeffs[1] + u * (coeffs[2] + u * coeffs[3]))
        });
        let whole = integrate(&f, a, c, DEFAULT_REL_TOL).unwrap();
        let left = integrate(&f, a, b, DEFAULT_REL_TOL).unwrap();
        let right = integrate(&f, b, c, DEFAULT_REL_TOL).unwrap();
        prop_assert!((whole - (left + right)).abs() <= 2.0 * DEFAULT_REL_TOL * (1.0 + whole.abs()));
    }

    #[test]
    fn first_crossing_is_monotone_in_the_level(
        power in 1u32..4,
        scale in 0.1..5.0f64,
        l1 in 0.0..1.0f64,
        l2 in 0.0..1.0f64,
    ) {
        let g = Func1d::new(move |t: f64| scale * (1.0 - t).powi(power as i32));
        let (lo_level, hi_level) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let t_hi = first_time_below(&g, hi_level * scale, 0.0, 1.0, 1e-12).unwrap();
        let t_lo = first_time_below(&g, lo_level * scale, 0.0, 1.0, 1e-12).unwrap();
        // A higher level is reached no later.
        prop_assert!(t_hi <= t_lo + 1e-11);
    }

    #[test]
    fn deviations_identities(a1 in -1e3..1e3f64, a2 in -1e3..1e3f64, n in 1.0..1e3f64) {
        let d = deviations(&TargetPair::new(a1, a2));
        prop_assert_eq!(d.dev1 + d.dev2, 0.0);
        let lhs = d.aggregate - n;
        let rhs = (a1 - n / 2.0) + (a2 - n / 2.0);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn gamma_is_nondecreasing_along_increasing_samples(
        table in arb_gamma_table(),
        samples in vec(0.0..1.0f64, 20),
    ) {
        let spec = market(0.0, Intensity::Constant(1.0), Trajectory::Step(table))
            .validate()
            .unwrap();
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let mut prev = f64::NEG_INFINITY;
        for t in sorted {
            let g = spec.gamma_at(t).unwrap();
            prop_assert!(g >= prev);
            prev = g;
        }
    }

    #[test]
    fn twap_equilibrium_invariants(
        c1 in -0.4..3.0f64,
        target in 50.0_f64..60.0,
        lambda in 1e-3..3.0f64,
    ) {
        let spec = market(c1, Intensity::Constant(1.0), Trajectory::Twap)
            .validate()
            .unwrap();
        let dev = deviations(&TargetPair::new(target, 50.0));
        let sol = equilibrium::solve(&spec, &dev, lambda).unwrap();

        // Clearing and the adjoint bound on a coarse grid.
        let mut prev_disp = -1e-12;
        for j in 0..=64 {
            let t = j as f64 / 64.0;
            let (h1, h2) = sol.holdings(t).unwrap();
            prop_assert!((h1 + h2 - 100.0).abs() <= 1e-12 * 100.0);
            let disp = (h1 - 50.0) * dev.dev1.signum();
            prop_assert!(disp >= prev_disp - 1e-12);
            prev_disp = disp.max(prev_disp);
            let y = sol.adjoint(t).unwrap();
            prop_assert!(y.y1.abs() <= lambda * (1.0 + 1e-12));
        }

        // Fee income matches the closed form and respects the global bound.
        let profit = exchange::profit(&spec, &dev, lambda).unwrap();
        let closed = exchange::twap_profit_closed_form(dev.dev1, c1, lambda);
        prop_assert!((profit - closed).abs() <= 1e-8);
        prop_assert!(profit <= 2.0 * lambda * dev.dev1.abs() / (1.0 + c1) + 1e-12);
        if lambda >= exchange::lambda_max(&spec, &dev) {
            prop_assert_eq!(profit, 0.0);
        }
    }

    #[test]
    fn tabulated_equilibrium_invariants(
        gamma_table in arb_gamma_table(),
        kappa_table in arb_kappa_table(),
        c1 in -0.4..3.0f64,
        target in 50.0_f64..58.0,
        lambda in 1e-3..2.0f64,
    ) {
        let spec = market(
            c1,
            Intensity::Step(kappa_table),
            Trajectory::Step(gamma_table),
        )
        .validate()
        .unwrap();
        let dev = deviations(&TargetPair::new(target, 50.0));
        let sol = equilibrium::solve(&spec, &dev, lambda).unwrap();
        prop_assert!(sol.tau < 1.0);
        prop_assert!(sol.chi >= 0.0);
        for j in 0..=32 {
            let t = j as f64 / 32.0;
            let (h1, h2) = sol.holdings(t).unwrap();
            prop_assert!((h1 + h2 - 100.0).abs() <= 1e-12 * 100.0);
            let y = sol.adjoint(t).unwrap();
            prop_assert!(y.y1.abs() <= lambda * (1.0 + 1e-12) + 1e-13);
        }
        // Holdings freeze after the last trading time.
        let frozen = sol.holdings(sol.tau).unwrap();
        for t in [sol.tau + 1e-3, 0.5 * (sol.tau + 1.0), 1.0] {
            if t <= 1.0 && t >= sol.tau {
                prop_assert_eq!(sol.holdings(t).unwrap(), frozen);
            }
        }
    }
}

#[test]
fn optimality_gap_does_not_grow_on_nested_grids() {
    let spec = market(0.0, Intensity::Constant(1.0), Trajectory::Twap)
        .validate()
        .unwrap();
    let dev = deviations(&TargetPair::new(52.5, 50.0));
    let coarse =
        oracle::verify_optimality(&spec, &dev, 0.05, feeq::model::Agent::One, 32, 400, 5, 1e-6)
            .unwrap();
    let fine =
        oracle::verify_optimality(&spec, &dev, 0.05, feeq::model::Agent::One, 64, 400, 5, 1e-6)
            .unwrap();
    let tol = 1e-6 * coarse.v_star.abs();
    assert!(
        fine.worst_gap <= coarse.worst_gap + tol,
        "fine {} vs coarse {}",
        fine.worst_gap,
        coarse.worst_gap
    );
}
