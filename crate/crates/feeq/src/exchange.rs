//! Exchange-side analytics: realized fee income for a given fee level,
//! expected income under a prior on the trading targets (Monte Carlo and,
//! for the worked TWAP example, exact quadrature), and the fee level that
//! maximizes it.
//!
//! Monte Carlo evaluations share one set of target draws across every fee
//! level (common random numbers), so profit curves are smooth in the fee and
//! the located maximizer is stable. Per-sample work is parallelized; the
//! draws and the reduction stay sequential, keeping results bit-identical
//! for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::equilibrium;
use crate::model::{Deviations, Intensity, TargetPair, Trajectory, ValidSpec};
use crate::numerics::{self, Func1d};
use crate::{Error, Result};

/// Samples used to calibrate the automatic fee search range.
const RANGE_CALIBRATION_SAMPLES: usize = 65_536;

/// Floor of the automatic search range, relative to the fee scale
/// `2 E|dev| * integral of kappa`.
const RANGE_FLOOR_REL: f64 = 1e-6;

/// Coarse grid size of the fee optimizer.
const COARSE_POINTS: usize = 64;

/// Prior of the exchange over agent 1's target; agent 2's target is known.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPrior {
    pub a1: MarginalPrior,
    pub a2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarginalPrior {
    Point(f64),
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl TargetPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.a1 {
            MarginalPrior::Point(v) => v.is_finite(),
            MarginalPrior::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            MarginalPrior::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
        };
        if !ok || !self.a2.is_finite() {
            return Err(Error::parameter("prior", format!("ill-formed prior {self:?}")));
        }
        Ok(())
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> TargetPair {
        let a1 = match self.a1 {
            MarginalPrior::Point(v) => v,
            MarginalPrior::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            MarginalPrior::Normal { mean, sd } => {
                mean + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            }
        };
        TargetPair::new(a1, self.a2)
    }

    fn is_point(&self) -> bool {
        matches!(self.a1, MarginalPrior::Point(_))
    }
}

/// Fee income of the exchange in the equilibrium for fee `lambda`:
/// `2 lambda |theta1(T) - n/2|`, all turnover billed at the proportional rate.
pub fn profit(spec: &ValidSpec, dev: &Deviations, lambda: f64) -> Result<f64> {
    let sol = equilibrium::solve(spec, dev, lambda)?;
    let (h1, _) = sol.holdings(spec.horizon())?;
    Ok(2.0 * lambda * (h1 - spec.supply() / 2.0).abs())
}

/// No trade ever occurs at or above this fee level.
pub fn lambda_max(spec: &ValidSpec, dev: &Deviations) -> f64 {
    2.0 * dev.dev1.abs() * spec.kappa_integral()
}

/// Closed-form profit for the unit-horizon TWAP market with unit intensity:
/// `2 max(0, lambda dev / (1+c1) - lambda sqrt(2 lambda dev / ((1+c1)(1+2c1))))`.
///
/// The displayed formula assumes a positive deviation (it sits under a
/// square root); for `dev <= 0` this returns 0, while the generic engine
/// handles either sign through the absolute deviation.
pub fn twap_profit_closed_form(dev: f64, c1: f64, lambda: f64) -> f64 {
    if dev <= 0.0 || lambda <= 0.0 || c1 <= -0.5 {
        return 0.0;
    }
    let gross = lambda * dev / (1.0 + c1);
    let shave = lambda * (2.0 * lambda * dev / ((1.0 + c1) * (1.0 + 2.0 * c1))).sqrt();
    2.0 * (gross - shave).max(0.0)
}

/// Monte Carlo estimate of the expected profit under the prior:
/// `(estimate, standard error)`, deterministic for a given seed.
pub fn expected_profit_mc(
    spec: &ValidSpec,
    prior: &TargetPrior,
    lambda: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_samples < 2 {
        return Err(Error::parameter("n_samples", "must be >= 2"));
    }
    prior.validate()?;
    let draws = draw_targets(prior, n_samples, seed);
    mc_mean_stderr(spec, &draws, lambda)
}

fn draw_targets(prior: &TargetPrior, n_samples: usize, seed: u64) -> Vec<Deviations> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| prior.draw(&mut rng).deviations())
        .collect()
}

fn mc_mean_stderr(spec: &ValidSpec, draws: &[Deviations], lambda: f64) -> Result<(f64, f64)> {
    let profits: Vec<f64> = draws
        .par_iter()
        .map(|dev| profit(spec, dev, lambda))
        .collect::<Result<_>>()?;
    let n = profits.len() as f64;
    let mean = profits.iter().sum::<f64>() / n;
    let var = profits.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Exact expected profit for the worked example (unit-horizon TWAP, unit
/// intensity, agent 1's target uniform on a width-5 band starting at agent
/// 2's): a one-dimensional integral with the kink declared as a breakpoint.
pub fn expected_profit_quadrature_example(c1: f64, lambda: f64) -> Result<f64> {
    if !(c1 > -0.5) {
        return Err(Error::parameter("c1", "must exceed -1/2"));
    }
    if !(lambda > 0.0) {
        return Err(Error::parameter("lambda", "must be > 0"));
    }
    let upper = 2.5_f64.sqrt();
    let kink = (2.0 * lambda * (1.0 + c1) / (1.0 + 2.0 * c1)).sqrt();
    let f = Func1d::with_breakpoints(
        |y: f64| lambda * y * y / (1.0 + c1) * (y - kink).max(0.0),
        vec![kink],
    );
    Ok(1.6 * numerics::integrate(&f, 0.0, upper, 1e-12)?)
}

/// How an expected-profit figure was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeeMethod {
    MonteCarlo,
    Quadrature,
}

impl FeeMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FeeMethod::MonteCarlo => "mc",
            FeeMethod::Quadrature => "quadrature",
        }
    }
}

/// Tabulated expected profit over a fee grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfitCurve {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    /// Per-point standard errors; zero in quadrature mode.
    pub stderr: Vec<f64>,
}

/// Located fee optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct FeeOptimum {
    pub lambda_hat: f64,
    pub value: f64,
    pub method: FeeMethod,
    /// Expected-profit evaluations spent by the optimizer.
    pub evaluations: usize,
    /// Set when the whole coarse grid produced zero profit (the prior puts
    /// no mass on trade); `lambda_hat` is meaningless then.
    pub flat_objective: bool,
}

/// The quadrature formula applies exactly to the worked example
/// configuration; everything else must use Monte Carlo.
pub fn quadrature_applies(spec: &ValidSpec, prior: &TargetPrior) -> bool {
    let twap_unit = matches!(spec.spec().gamma, Trajectory::Twap)
        && matches!(spec.spec().kappa, Intensity::Constant(v) if v == 1.0)
        && spec.horizon() == 1.0;
    let band = match prior.a1 {
        MarginalPrior::Uniform { lo, hi } => lo == prior.a2 && hi - lo == 5.0,
        _ => false,
    };
    twap_unit && band
}

/// Expected profit on a fee grid. Monte Carlo mode shares one pool of
/// target draws across every grid point.
pub fn profit_curve(
    spec: &ValidSpec,
    prior: &TargetPrior,
    lambdas: &[f64],
    method: FeeMethod,
    n_samples: usize,
    seed: u64,
) -> Result<ProfitCurve> {
    prior.validate()?;
    if lambdas.is_empty() || lambdas.windows(2).any(|w| !(w[1] > w[0])) || lambdas[0] <= 0.0 {
        return Err(Error::parameter(
            "lambdas",
            "grid must be nonempty, strictly increasing and positive",
        ));
    }
    match method {
        FeeMethod::Quadrature => {
            require_quadrature(spec, prior)?;
            let mut values = Vec::with_capacity(lambdas.len());
            for &lambda in lambdas {
                values.push(expected_profit_quadrature_example(spec.c1(), lambda)?);
            }
            Ok(ProfitCurve {
                lambdas: lambdas.to_vec(),
                stderr: vec![0.0; values.len()],
                values,
            })
        }
        FeeMethod::MonteCarlo => {
            if n_samples < 2 {
                return Err(Error::parameter("n_samples", "must be >= 2"));
            }
            let draws = draw_targets(prior, n_samples, seed);
            let mut values = Vec::with_capacity(lambdas.len());
            let mut stderr = Vec::with_capacity(lambdas.len());
            for &lambda in lambdas {
                let (mean, se) = mc_mean_stderr(spec, &draws, lambda)?;
                values.push(mean);
                stderr.push(se);
            }
            Ok(ProfitCurve {
                lambdas: lambdas.to_vec(),
                values,
                stderr,
            })
        }
    }
}

fn require_quadrature(spec: &ValidSpec, prior: &TargetPrior) -> Result<()> {
    if quadrature_applies(spec, prior) {
        Ok(())
    } else {
        Err(Error::parameter(
            "method",
            "the quadrature formula only covers the unit-horizon TWAP market with a width-5 \
             uniform prior anchored at agent 2's target; use the Monte Carlo method",
        ))
    }
}

/// Finds the fee maximizing the expected profit.
///
/// Coarse multi-start grid scan over the search range (given explicitly or
/// derived from the prior), then golden-section refinement inside the three
/// best brackets. No unimodality is assumed.
pub fn optimal_fee(
    spec: &ValidSpec,
    prior: &TargetPrior,
    range: Option<(f64, f64)>,
    method: FeeMethod,
    n_samples: usize,
    seed: u64,
) -> Result<FeeOptimum> {
    prior.validate()?;
    if method == FeeMethod::Quadrature {
        require_quadrature(spec, prior)?;
    }

    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::parameter("range", "need 0 < lo < hi"));
            }
            (lo, hi)
        }
        None => match auto_search_range(spec, prior, seed) {
            Some(r) => r,
            None => return Ok(flat_optimum(method)),
        },
    };

    let mut evaluations = 0usize;
    let draws = match method {
        FeeMethod::MonteCarlo => {
            if n_samples < 2 {
                return Err(Error::parameter("n_samples", "must be >= 2"));
            }
            draw_targets(prior, n_samples, seed)
        }
        FeeMethod::Quadrature => Vec::new(),
    };
    let mut eval = |lambda: f64| -> Result<f64> {
        evaluations += 1;
        match method {
            FeeMethod::Quadrature => expected_profit_quadrature_example(spec.c1(), lambda),
            FeeMethod::MonteCarlo => Ok(mc_mean_stderr(spec, &draws, lambda)?.0),
        }
    };

    let mut grid = Vec::with_capacity(COARSE_POINTS);
    for i in 0..COARSE_POINTS {
        let lambda = lo + (hi - lo) * i as f64 / (COARSE_POINTS - 1) as f64;
        let value = eval(lambda)?;
        grid.push((lambda, value));
    }
    if grid.iter().all(|&(_, v)| v == 0.0) {
        return Ok(FeeOptimum {
            evaluations,
            ..flat_optimum(method)
        });
    }

    // Three best coarse points, refined independently.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&i, &j| grid[j].1.total_cmp(&grid[i].1));
    let refine_tol = (hi - lo)
        * match method {
            FeeMethod::Quadrature => 1e-8,
            FeeMethod::MonteCarlo => 1e-4,
        };
    let mut best = (grid[order[0]].0, grid[order[0]].1);
    for &idx in order.iter().take(3) {
        let bl = grid[idx.saturating_sub(1)].0;
        let bh = grid[(idx + 1).min(grid.len() - 1)].0;
        if !(bh > bl) {
            continue;
        }
        let refined = golden_max_fallible(&mut eval, bl, bh, refine_tol)?;
        if refined.1 > best.1 {
            best = refined;
        }
    }

    Ok(FeeOptimum {
        lambda_hat: best.0,
        value: best.1,
        method,
        evaluations,
        flat_objective: false,
    })
}

fn flat_optimum(method: FeeMethod) -> FeeOptimum {
    FeeOptimum {
        lambda_hat: 0.0,
        value: 0.0,
        method,
        evaluations: 0,
        flat_objective: true,
    }
}

/// Golden-section maximization threading evaluation errors through.
fn golden_max_fallible(
    eval: &mut impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2)?;
        }
        let cand = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(best)
}

/// Automatic search range: floor proportional to the prior's fee scale, and
/// the 0.999-quantile of the deterrence ceiling as the top. `None` when the
/// prior puts no mass on trade.
pub fn auto_search_range(spec: &ValidSpec, prior: &TargetPrior, seed: u64) -> Option<(f64, f64)> {
    let kappa_mass = spec.kappa_integral();
    let (mean_abs, q999) = if prior.is_point() {
        let dev = match prior.a1 {
            MarginalPrior::Point(v) => (v - prior.a2).abs() / 2.0,
            _ => unreachable!(),
        };
        (dev, dev)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
        let mut devs: Vec<f64> = (0..RANGE_CALIBRATION_SAMPLES)
            .map(|_| prior.draw(&mut rng).deviations().dev1.abs())
            .collect();
        devs.sort_by(f64::total_cmp);
        let mean = devs.iter().sum::<f64>() / devs.len() as f64;
        let q = devs[(0.999 * (devs.len() - 1) as f64).round() as usize];
        (mean, q)
    };
    let lo = RANGE_FLOOR_REL * 2.0 * mean_abs * kappa_mass;
    let hi = 2.0 * q999 * kappa_mass;
    if lo > 0.0 && hi > lo {
        Some((lo, hi))
    } else {
        None
    }
}
