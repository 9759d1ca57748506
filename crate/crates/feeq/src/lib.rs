//! Closed-form equilibrium of two agents trading toward targets on a single
//! trading day, under proportional transaction fees and perceived price
//! impact, together with the exchange-side fee analytics built on top of it.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: deterministic quadrature, monotone bisection and 1-d
//!   maximization shared by everything else.
//! * [`model`]: market inputs (penalty intensity, target trajectory,
//!   trading targets) and their validation.
//! * [`equilibrium`]: the closed-form equilibrium, its last trading time,
//!   deterrence threshold, holdings, drifts and adjoint process.
//! * [`oracle`]: independent audits via discretized objective evaluation,
//!   brute-force optimality search, clearing and budget identities.
//! * [`exchange`]: exchange profit as a function of the fee level and the
//!   optimal fee under a target prior.
//! * [`simulate`]: seeded path simulation of price, wealth and
//!   money-market holdings.
//! * [`config`]: the TOML run-configuration schema used by the CLI.

// Guard conditions are written as negations (`!(x > 0.0)`) so NaN fails
// them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod equilibrium;
mod error;
pub mod exchange;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod simulate;

pub use error::{Error, Result, Violation};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::model::{Intensity, MarketSpec, Trajectory, Volatility};

    /// The TWAP market of the worked fee-optimization example:
    /// unit horizon, supply 100, unit intensity.
    pub fn twap_spec(c1: f64) -> MarketSpec {
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
}
