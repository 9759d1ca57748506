//! Closed-form construction of the trading equilibrium: last trading time,
//! deterrence threshold, effective trajectory, holdings, impact
//! coefficients, drifts and the adjoint (marginal-value) process.
//!
//! Everything here is deterministic and cheap after [`solve`]: the terminal
//! level of the effective trajectory is a scalar computed once, so holdings
//! queries are O(1) table lookups afterwards.

use crate::model::{Agent, Deviations, ValidSpec};
use crate::numerics::{self, Func1d};
use crate::{Error, Result};

/// Quadrature tolerance used inside the solver. Tighter than the public
/// default so downstream audits (adjoint pinning, drift consistency) hold
/// at their own tolerances.
pub(crate) const SOLVE_REL_TOL: f64 = 1e-12;

/// Relative width of the guard band below the horizon for the terminal
/// average: the tail integral of the intensity must not degenerate.
const TAIL_GUARD_REL: f64 = 1e-9;

/// The ratio `(1 + 2 c1) / (1 + c1)` scaling every trading incentive.
fn incentive_ratio(c1: f64) -> f64 {
    (1.0 + 2.0 * c1) / (1.0 + c1)
}

/// Price-impact coefficients of the perceived off-equilibrium dynamics.
/// `c1` is the free input; `c0(t)` and `c2` are pinned by it.
#[derive(Debug, Clone, Copy)]
pub struct ImpactCoefficients<'a> {
    spec: &'a ValidSpec,
    aggregate: f64,
    pub c2: f64,
}

impl ImpactCoefficients<'_> {
    /// `c0(t) = c1 n - (1 + 2 c1) / (2 (1 + c1)) * gamma(t) * (aggregate - n)`.
    pub fn c0(&self, t: f64) -> Result<f64> {
        let gamma = self.spec.gamma_at(t)?;
        Ok(c0_value(self.spec, self.aggregate, gamma))
    }
}

fn c0_value(spec: &ValidSpec, aggregate: f64, gamma: f64) -> f64 {
    spec.c1() * spec.supply()
        - 0.5 * incentive_ratio(spec.c1()) * gamma * (aggregate - spec.supply())
}

pub fn impact_coefficients<'a>(spec: &'a ValidSpec, dev: &Deviations) -> ImpactCoefficients<'a> {
    ImpactCoefficients {
        spec,
        aggregate: dev.aggregate,
        c2: spec.c1() / (1.0 + spec.c1()),
    }
}

/// Integral of `kappa * gamma` over `[from, to]`.
fn kappa_gamma_integral(spec: &ValidSpec, from: f64, to: f64) -> Result<f64> {
    let f = Func1d::with_breakpoints(
        |u| spec.kappa_clamped(u) * spec.gamma_clamped(u),
        spec.joint_breakpoints().to_vec(),
    );
    numerics::integrate(&f, from, to, SOLVE_REL_TOL)
}

/// Integral of `kappa` over `[from, to]`.
fn kappa_integral(spec: &ValidSpec, from: f64, to: f64) -> Result<f64> {
    let f = Func1d::with_breakpoints(|u| spec.kappa_clamped(u), spec.kappa_breakpoints().to_vec());
    numerics::integrate(&f, from, to, SOLVE_REL_TOL)
}

/// Deterrence threshold: the fee level above which no trade ever occurs.
///
/// `chi = |dev1| (1 + 2 c1) / (1 + c1) * integral of kappa * gamma over [0, T]`.
pub fn deterrence_threshold(spec: &ValidSpec, dev: &Deviations) -> Result<f64> {
    if dev.dev1 == 0.0 {
        return Ok(0.0);
    }
    let mass = kappa_gamma_integral(spec, 0.0, spec.horizon())?;
    Ok(dev.dev1.abs() * incentive_ratio(spec.c1()) * mass)
}

/// Last trading time: the first instant at which the remaining trading
/// incentive drops to the fee level,
/// `tau = inf { t : |dev1| (1+2c1)/(1+c1) * integral_t^T kappa (gamma(u) - gamma(t)) du <= lambda }`.
///
/// Located by bisection on the indicator `{g <= lambda}`, which stays
/// monotone even where the trajectory jumps.
pub fn last_trading_time(spec: &ValidSpec, dev: &Deviations, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if dev.dev1 == 0.0 {
        return Ok(0.0);
    }
    let scale = dev.dev1.abs() * incentive_ratio(spec.c1());
    let horizon = spec.horizon();
    let g = Func1d::new(|t: f64| {
        let gamma_t = spec.gamma_clamped(t);
        let integrand = Func1d::with_breakpoints(
            |u| spec.kappa_clamped(u) * (spec.gamma_clamped(u) - gamma_t),
            spec.joint_breakpoints().to_vec(),
        );
        match numerics::integrate(&integrand, t, horizon, SOLVE_REL_TOL) {
            Ok(v) => scale * v,
            Err(_) => f64::NAN,
        }
    });
    numerics::first_time_below(&g, lambda, 0.0, horizon, 1e-12 * horizon)
}

/// Level of the effective trajectory on `[tau, T]`: the intensity-weighted
/// average of the remaining trajectory less the fee correction, or zero when
/// the fee deters all trade.
pub fn terminal_level(spec: &ValidSpec, dev: &Deviations, lambda: f64, tau: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let chi = deterrence_threshold(spec, dev)?;
    terminal_level_inner(spec, dev, lambda, tau, chi).map(|t| t.level)
}

struct Tail {
    level: f64,
    /// Integral of kappa over `[tau, T]`.
    kappa_mass: f64,
    /// Integral of kappa * gamma over `[tau, T]`.
    kappa_gamma_mass: f64,
}

fn terminal_level_inner(
    spec: &ValidSpec,
    dev: &Deviations,
    lambda: f64,
    tau: f64,
    chi: f64,
) -> Result<Tail> {
    if chi <= lambda || dev.dev1 == 0.0 {
        return Ok(Tail {
            level: 0.0,
            kappa_mass: 0.0,
            kappa_gamma_mass: 0.0,
        });
    }
    let horizon = spec.horizon();
    if tau > horizon * (1.0 - TAIL_GUARD_REL) {
        return Err(Error::InternalConsistency(format!(
            "last trading time {tau} too close to the horizon {horizon} for the terminal average"
        )));
    }
    let kappa_mass = kappa_integral(spec, tau, horizon)?;
    if !(kappa_mass > 0.0) {
        return Err(Error::InternalConsistency(format!(
            "intensity mass over [{tau}, {horizon}] is not positive: {kappa_mass}"
        )));
    }
    let kappa_gamma_mass = kappa_gamma_integral(spec, tau, horizon)?;
    let correction = lambda / (dev.dev1.abs() * incentive_ratio(spec.c1()));
    Ok(Tail {
        level: (kappa_gamma_mass - correction) / kappa_mass,
        kappa_mass,
        kappa_gamma_mass,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::parameter(
            "lambda",
            format!("fee must be > 0, got {lambda}"),
        ));
    }
    Ok(())
}

/// Marginal value of an extra share for each agent, pinned at the signed fee
/// while trade occurs and bounded by the fee always.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointValue {
    pub t: f64,
    pub y1: f64,
    pub y2: f64,
}

/// The solved equilibrium. Immutable and freely shareable; holdings queries
/// after construction cost a trajectory lookup.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    spec: ValidSpec,
    dev: Deviations,
    pub lambda: f64,
    /// Last trading time in `[0, T)`.
    pub tau: f64,
    /// Deterrence threshold; no trade when `chi <= lambda`.
    pub chi: f64,
    pub trade_occurs: bool,
    /// Level of the effective trajectory on `[tau, T]`.
    pub terminal_level: f64,
    pub c2: f64,
    kappa_tail: f64,
    kappa_gamma_tail: f64,
}

/// Builds the full equilibrium for a validated spec, deviations and fee.
pub fn solve(spec: &ValidSpec, dev: &Deviations, lambda: f64) -> Result<EquilibriumSolution> {
    check_lambda(lambda)?;
    let chi = deterrence_threshold(spec, dev)?;
    let tau = if dev.dev1 == 0.0 || chi <= lambda {
        0.0
    } else {
        last_trading_time(spec, dev, lambda)?
    };
    let tail = terminal_level_inner(spec, dev, lambda, tau, chi)?;
    Ok(EquilibriumSolution {
        spec: spec.clone(),
        dev: *dev,
        lambda,
        tau,
        chi,
        trade_occurs: chi > lambda,
        terminal_level: tail.level,
        c2: spec.c1() / (1.0 + spec.c1()),
        kappa_tail: tail.kappa_mass,
        kappa_gamma_tail: tail.kappa_gamma_mass,
    })
}

impl EquilibriumSolution {
    pub fn spec(&self) -> &ValidSpec {
        &self.spec
    }

    pub fn deviations(&self) -> &Deviations {
        &self.dev
    }

    /// The effective trajectory: the target trajectory before the last
    /// trading time, its frozen terminal level afterwards.
    pub fn effective_trajectory(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 || t > self.spec.horizon() {
            return Err(Error::Domain {
                t,
                horizon: self.spec.horizon(),
            });
        }
        if t < self.tau {
            self.spec.gamma_at(t)
        } else {
            Ok(self.terminal_level)
        }
    }

    /// Equilibrium holdings of both agents at `t`. They sum to the supply by
    /// construction: the deviations are exact negatives of each other.
    pub fn holdings(&self, t: f64) -> Result<(f64, f64)> {
        let level = self.effective_trajectory(t)?;
        let half = self.spec.supply() / 2.0;
        let scale = level / (1.0 + self.spec.c1());
        Ok((half + self.dev.dev1 * scale, half + self.dev.dev2 * scale))
    }

    /// Total variation of one agent's holdings over the whole day, the
    /// time-0 block trade included. The equilibrium path is monotone, so
    /// this is just the terminal displacement.
    pub fn turnover_per_agent(&self) -> f64 {
        if !self.trade_occurs {
            return 0.0;
        }
        self.dev.dev1.abs() * self.terminal_level / (1.0 + self.spec.c1())
    }

    pub fn c0(&self, t: f64) -> Result<f64> {
        impact_coefficients(&self.spec, &self.dev).c0(t)
    }

    pub fn equilibrium_drift(&self, t: f64) -> Result<f64> {
        equilibrium_drift(&self.spec, &self.dev, t)
    }

    pub fn perceived_drift(&self, agent: Agent, theta: f64, t: f64) -> Result<f64> {
        perceived_drift(&self.spec, &self.dev, agent, theta, t)
    }

    /// Adjoint process at `t`. On `[0, tau]` with trade occurring this
    /// reuses the cached tail integrals, so the value is the signed fee up
    /// to a few ulps rather than fresh quadrature noise.
    pub fn adjoint(&self, t: f64) -> Result<AdjointValue> {
        if t.is_nan() || t < 0.0 || t > self.spec.horizon() {
            return Err(Error::Domain {
                t,
                horizon: self.spec.horizon(),
            });
        }
        let ratio = incentive_ratio(self.spec.c1());
        let residual = if self.trade_occurs && t <= self.tau {
            // gamma and the effective trajectory agree on [t, tau), so the
            // integral reduces to the cached tail difference.
            self.kappa_gamma_tail - self.terminal_level * self.kappa_tail
        } else {
            let from = t.max(self.tau);
            let level = self.terminal_level;
            let integrand = Func1d::with_breakpoints(
                |u| self.spec.kappa_clamped(u) * (self.spec.gamma_clamped(u) - level),
                self.spec.joint_breakpoints().to_vec(),
            );
            numerics::integrate(&integrand, from, self.spec.horizon(), SOLVE_REL_TOL)?
        };
        let y1 = self.dev.dev1 * ratio * residual;
        Ok(AdjointValue { t, y1, y2: -y1 })
    }
}

/// Drift of the realized equilibrium price at `t`:
/// `kappa(t) * (c1 n / 2 - gamma(t) (aggregate - n) / 2)`.
pub fn equilibrium_drift(spec: &ValidSpec, dev: &Deviations, t: f64) -> Result<f64> {
    let kappa = spec.kappa_at(t)?;
    let gamma = spec.gamma_at(t)?;
    Ok(kappa * (spec.c1() * spec.supply() / 2.0 - 0.5 * gamma * (dev.aggregate - spec.supply())))
}

/// Drift an agent perceives when holding `theta` shares at `t`:
/// `kappa(t) * (c0(t) - c1 theta + gamma(t) c2 (a_i - n/2))`.
pub fn perceived_drift(
    spec: &ValidSpec,
    dev: &Deviations,
    agent: Agent,
    theta: f64,
    t: f64,
) -> Result<f64> {
    let kappa = spec.kappa_at(t)?;
    let gamma = spec.gamma_at(t)?;
    let c0 = c0_value(spec, dev.aggregate, gamma);
    let c2 = spec.c1() / (1.0 + spec.c1());
    // a_i - n/2 recovered from the deviation and the aggregate imbalance.
    let target_excess = (dev.aggregate - spec.supply()) / 2.0 + dev.dev(agent);
    Ok(kappa * (c0 - spec.c1() * theta + gamma * c2 * target_excess))
}

/// Equilibrium holdings at `t` without keeping the solution around.
pub fn holdings(spec: &ValidSpec, dev: &Deviations, lambda: f64, t: f64) -> Result<(f64, f64)> {
    solve(spec, dev, lambda)?.holdings(t)
}

/// Adjoint process at `t` without keeping the solution around.
pub fn adjoint(spec: &ValidSpec, dev: &Deviations, lambda: f64, t: f64) -> Result<AdjointValue> {
    solve(spec, dev, lambda)?.adjoint(t)
}
