//! TOML run-configuration schema shared by the CLI and integration tests.
//!
//! ```toml
//! [market]
//! T = 1.0
//! n = 100.0
//! c1 = 0.0
//! dividend_mean = 100.0
//! sigma = 0.2                      # or { table = [[0.0, 0.2], [0.5, 0.1]] }
//!
//! [kappa]
//! kind = "constant"                # constant | step | piecewise-linear
//! value = 1.0
//!
//! [gamma]
//! kind = "twap"                    # twap | constant | step | piecewise-linear
//!
//! [targets]                        # exactly one of `a1` / `prior`
//! a1 = 52.5
//! a2 = 50.0
//! # prior = { kind = "uniform", lo = 50.0, hi = 55.0 }
//!
//! [fee]
//! lambda = 0.05                    # or search = { lo = 1e-4, hi = 2.5 }
//!
//! [rng]
//! seed = 42
//! ```

use serde::{Deserialize, Serialize};

use crate::exchange::{MarginalPrior, TargetPrior};
use crate::model::{Intensity, MarketSpec, TargetPair, Trajectory, Volatility};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub market: MarketSection,
    pub kappa: CurveSection,
    pub gamma: CurveSection,
    pub targets: TargetsSection,
    #[serde(default)]
    pub fee: FeeSection,
    #[serde(default)]
    pub rng: RngSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "n")]
    pub supply: f64,
    pub c1: f64,
    pub dividend_mean: f64,
    pub sigma: SigmaSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSection {
    Constant(f64),
    Step { table: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveSection {
    Twap,
    Constant { value: f64 },
    Step { table: Vec<(f64, f64)> },
    PiecewiseLinear { table: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    pub a2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriorSection {
    Point { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Target information a run can carry: a concrete pair or a prior.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSetting {
    Pair(TargetPair),
    Prior(TargetPrior),
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parameter("config", e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::parameter("config", e.to_string()))
    }

    pub fn market_spec(&self) -> Result<MarketSpec> {
        let gamma = match &self.gamma {
            CurveSection::Twap => Trajectory::Twap,
            CurveSection::Constant { value } => Trajectory::Constant(*value),
            CurveSection::Step { table } => Trajectory::Step(table.clone()),
            CurveSection::PiecewiseLinear { table } => Trajectory::Linear(table.clone()),
        };
        let kappa = match &self.kappa {
            CurveSection::Twap => {
                return Err(Error::parameter("kappa", "kind `twap` only applies to gamma"))
            }
            CurveSection::Constant { value } => Intensity::Constant(*value),
            CurveSection::Step { table } => Intensity::Step(table.clone()),
            CurveSection::PiecewiseLinear { table } => Intensity::Linear(table.clone()),
        };
        let sigma = match &self.market.sigma {
            SigmaSection::Constant(v) => Volatility::Constant(*v),
            SigmaSection::Step { table } => Volatility::Step(table.clone()),
        };
        Ok(MarketSpec {
            horizon: self.market.horizon,
            supply: self.market.supply,
            c1: self.market.c1,
            kappa,
            gamma,
            dividend_mean: self.market.dividend_mean,
            sigma,
        })
    }

    /// Exactly one of point targets / prior must be present.
    pub fn target_setting(&self) -> Result<TargetSetting> {
        match (&self.targets.a1, &self.targets.prior) {
            (Some(_), Some(_)) => Err(Error::parameter(
                "targets",
                "give either point targets (a1) or a prior, not both",
            )),
            (None, None) => Err(Error::parameter(
                "targets",
                "give point targets (a1) or a prior",
            )),
            (Some(a1), None) => Ok(TargetSetting::Pair(TargetPair::new(*a1, self.targets.a2))),
            (None, Some(prior)) => {
                let a1 = match prior {
                    PriorSection::Point { value } => MarginalPrior::Point(*value),
                    PriorSection::Uniform { lo, hi } => MarginalPrior::Uniform { lo: *lo, hi: *hi },
                    PriorSection::Normal { mean, sd } => MarginalPrior::Normal {
                        mean: *mean,
                        sd: *sd,
                    },
                };
                Ok(TargetSetting::Prior(TargetPrior {
                    a1,
                    a2: self.targets.a2,
                }))
            }
        }
    }

    /// Concrete target pair, required by the solve/verify/simulate commands.
    pub fn target_pair(&self) -> Result<TargetPair> {
        match self.target_setting()? {
            TargetSetting::Pair(pair) => Ok(pair),
            TargetSetting::Prior(_) => Err(Error::parameter(
                "targets",
                "this command needs point targets (a1, a2), not a prior",
            )),
        }
    }

    /// Prior over the targets; point targets degrade to a point prior.
    pub fn target_prior(&self) -> Result<TargetPrior> {
        match self.target_setting()? {
            TargetSetting::Prior(prior) => Ok(prior),
            TargetSetting::Pair(pair) => Ok(TargetPrior {
                a1: MarginalPrior::Point(pair.a1),
                a2: pair.a2,
            }),
        }
    }
}
