//! Market inputs and their validation: the penalty intensity, the intraday
//! target trajectory, trading targets and the quantities derived from them.
//!
//! Trajectories and intensities are closed families (not arbitrary callables)
//! so quadrature can exploit their breakpoints and configurations stay
//! reproducible. A [`MarketSpec`] is inert data; every downstream module
//! consumes the [`ValidSpec`] produced by [`MarketSpec::validate`], which is
//! immutable and freely shareable across threads.

use crate::numerics::{self, Func1d};
use crate::{Error, Result, Violation};

/// Number of interior samples used for the dense monotonicity/positivity
/// checks during validation.
const DENSE_SAMPLES: usize = 257;

/// Sorted `(time, value)` table shared by the piecewise families.
pub type Table = Vec<(f64, f64)>;

/// Intraday trading target trajectory, normalized to `[0, 1]`,
/// right-continuous and nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// `t / T`: spread the target evenly over the day.
    Twap,
    Constant(f64),
    /// Right-continuous step function; first node must sit at `t = 0`.
    Step(Table),
    /// Piecewise-linear interpolation; constant after the last node.
    Linear(Table),
}

/// Penalty intensity, strictly positive on the interior of the trading day
/// with a finite integral.
#[derive(Debug, Clone, PartialEq)]
pub enum Intensity {
    Constant(f64),
    Step(Table),
    Linear(Table),
}

/// Deterministic volatility of the price's martingale part. Only the
/// simulated paths depend on it; it never enters the equilibrium quantities.
#[derive(Debug, Clone, PartialEq)]
pub enum Volatility {
    Constant(f64),
    Step(Table),
}

fn eval_step(table: &Table, t: f64) -> f64 {
    let idx = table.partition_point(|&(ti, _)| ti <= t);
    table[idx.saturating_sub(1)].1
}

fn eval_linear(table: &Table, t: f64) -> f64 {
    let idx = table.partition_point(|&(ti, _)| ti <= t);
    if idx == 0 {
        return table[0].1;
    }
    if idx == table.len() {
        return table[table.len() - 1].1;
    }
    let (t0, v0) = table[idx - 1];
    let (t1, v1) = table[idx];
    if t1 == t0 {
        return v1;
    }
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

impl Trajectory {
    fn eval(&self, t: f64, horizon: f64) -> f64 {
        match self {
            Trajectory::Twap => t / horizon,
            Trajectory::Constant(v) => *v,
            Trajectory::Step(table) => eval_step(table, t),
            Trajectory::Linear(table) => eval_linear(table, t),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Trajectory::Twap | Trajectory::Constant(_) => Vec::new(),
            Trajectory::Step(t) | Trajectory::Linear(t) => t.iter().map(|&(ti, _)| ti).collect(),
        }
    }
}

impl Intensity {
    fn eval(&self, t: f64) -> f64 {
        match self {
            Intensity::Constant(v) => *v,
            Intensity::Step(table) => eval_step(table, t),
            Intensity::Linear(table) => eval_linear(table, t),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Intensity::Constant(_) => Vec::new(),
            Intensity::Step(t) | Intensity::Linear(t) => t.iter().map(|&(ti, _)| ti).collect(),
        }
    }
}

impl Volatility {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Volatility::Constant(v) => *v,
            Volatility::Step(table) => eval_step(table, t),
        }
    }
}

/// Full market description. `validate` turns it into a [`ValidSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSpec {
    /// Trading horizon `T > 0`.
    pub horizon: f64,
    /// Share supply `n > 0`; each agent starts with half of it.
    pub supply: f64,
    /// Perceived price-impact coefficient, must exceed -1/2.
    pub c1: f64,
    pub kappa: Intensity,
    pub gamma: Trajectory,
    /// Mean of the terminal dividend.
    pub dividend_mean: f64,
    pub sigma: Volatility,
}

/// A [`MarketSpec`] that passed validation, with breakpoints and the total
/// intensity mass cached for the quadrature-heavy callers.
#[derive(Debug, Clone)]
pub struct ValidSpec {
    spec: MarketSpec,
    gamma_breakpoints: Vec<f64>,
    kappa_breakpoints: Vec<f64>,
    joint_breakpoints: Vec<f64>,
    kappa_integral: f64,
    warnings: Vec<String>,
}

impl MarketSpec {
    /// Checks every structural and semantic invariant of the inputs; returns
    /// the validated spec or the full list of violations.
    pub fn validate(self) -> Result<ValidSpec> {
        fn flag(field: &str, message: String) -> Violation {
            Violation {
                field: field.to_string(),
                message,
            }
        }
        let mut violations: Vec<Violation> = Vec::new();

        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            violations.push(flag(
                "market.T",
                format!("horizon must be > 0, got {}", self.horizon),
            ));
        }
        if !(self.supply > 0.0) || !self.supply.is_finite() {
            violations.push(flag(
                "market.n",
                format!("supply must be > 0, got {}", self.supply),
            ));
        }
        if !(self.c1 > -0.5) || !self.c1.is_finite() {
            violations.push(flag(
                "market.c1",
                format!("price-impact coefficient must exceed -1/2, got {}", self.c1),
            ));
        }
        if !self.dividend_mean.is_finite() {
            violations.push(flag("market.dividend_mean", "must be finite".to_string()));
        }
        match &self.sigma {
            Volatility::Constant(v) => {
                if !v.is_finite() || *v < 0.0 {
                    violations.push(flag(
                        "market.sigma",
                        format!("must be finite and >= 0, got {v}"),
                    ));
                }
            }
            Volatility::Step(table) => {
                check_table("market.sigma", table, self.horizon, &mut violations);
                if table.iter().any(|&(_, v)| v < 0.0) {
                    violations.push(flag("market.sigma", "values must be >= 0".to_string()));
                }
            }
        }

        match &self.gamma {
            Trajectory::Twap => {}
            Trajectory::Constant(v) => {
                if !(0.0..=1.0).contains(v) {
                    violations.push(flag(
                        "gamma",
                        format!("constant value must lie in [0, 1], got {v}"),
                    ));
                }
            }
            Trajectory::Step(table) | Trajectory::Linear(table) => {
                check_table("gamma", table, self.horizon, &mut violations);
                if table.iter().any(|&(_, v)| !(0.0..=1.0).contains(&v)) {
                    violations.push(flag("gamma", "values must lie in [0, 1]".to_string()));
                }
                if table.windows(2).any(|w| w[1].1 < w[0].1) {
                    violations.push(flag("gamma", "values must be nondecreasing".to_string()));
                }
            }
        }

        match &self.kappa {
            Intensity::Constant(v) => {
                if !(*v > 0.0) || !v.is_finite() {
                    violations.push(flag("kappa", format!("constant value must be > 0, got {v}")));
                }
            }
            Intensity::Step(table) | Intensity::Linear(table) => {
                check_table("kappa", table, self.horizon, &mut violations);
            }
        }

        // Tables are structurally sound beyond this point; bail out early
        // otherwise so the dense sampling below cannot misbehave.
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }

        // Dense interior samples back up the node-level checks.
        if self.horizon > 0.0 {
            let mut prev_gamma = f64::NEG_INFINITY;
            for j in 0..DENSE_SAMPLES {
                let t = self.horizon * (j as f64 + 0.5) / DENSE_SAMPLES as f64;
                let g = self.gamma.eval(t, self.horizon);
                if g < prev_gamma {
                    violations.push(flag("gamma", format!("decreasing sample at t = {t}")));
                    break;
                }
                if !(0.0..=1.0).contains(&g) {
                    violations.push(flag("gamma", format!("sample outside [0, 1] at t = {t}")));
                    break;
                }
                prev_gamma = g;
            }
            for j in 0..DENSE_SAMPLES {
                let t = self.horizon * (j as f64 + 0.5) / DENSE_SAMPLES as f64;
                let k = self.kappa.eval(t);
                if !(k > 0.0) || !k.is_finite() {
                    violations.push(flag(
                        "kappa",
                        format!("must be positive on (0, T); sample {k} at t = {t}"),
                    ));
                    break;
                }
            }
        }

        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }

        let kappa_breakpoints = self.kappa.breakpoints();
        let kappa_fn = Func1d::with_breakpoints(|t| self.kappa.eval(t), kappa_breakpoints.clone());
        let kappa_integral = match numerics::integrate(&kappa_fn, 0.0, self.horizon, 1e-12) {
            Ok(v) if v.is_finite() && v > 0.0 => v,
            _ => {
                violations.push(flag(
                    "kappa",
                    "integral over [0, T] must be finite and positive".to_string(),
                ));
                return Err(Error::Validation(violations));
            }
        };

        let mut warnings = Vec::new();
        if self.c1 < 0.0 {
            warnings.push(format!(
                "c1 = {} is negative: trades improve the perceived drift, which is economically unusual",
                self.c1
            ));
        }

        let gamma_breakpoints = self.gamma.breakpoints();
        let mut joint_breakpoints = gamma_breakpoints.clone();
        joint_breakpoints.extend_from_slice(&kappa_breakpoints);
        joint_breakpoints.sort_by(f64::total_cmp);
        joint_breakpoints.dedup();

        Ok(ValidSpec {
            spec: self,
            gamma_breakpoints,
            kappa_breakpoints,
            joint_breakpoints,
            kappa_integral,
            warnings,
        })
    }
}

fn check_table(field: &str, table: &Table, horizon: f64, violations: &mut Vec<Violation>) {
    let mut push = |message: String| {
        violations.push(Violation {
            field: field.to_string(),
            message,
        })
    };
    if table.is_empty() {
        push("table must not be empty".to_string());
        return;
    }
    if table[0].0 != 0.0 {
        push(format!("first node must sit at t = 0, got t = {}", table[0].0));
    }
    if table.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite()) {
        push("nodes must be finite".to_string());
    }
    if table.windows(2).any(|w| w[1].0 <= w[0].0) {
        push("node times must be strictly increasing".to_string());
    }
    if let Some(&(last, _)) = table.last() {
        if last > horizon {
            push(format!("node at t = {last} lies beyond the horizon {horizon}"));
        }
    }
}

impl ValidSpec {
    pub fn horizon(&self) -> f64 {
        self.spec.horizon
    }

    pub fn supply(&self) -> f64 {
        self.spec.supply
    }

    pub fn c1(&self) -> f64 {
        self.spec.c1
    }

    pub fn dividend_mean(&self) -> f64 {
        self.spec.dividend_mean
    }

    pub fn spec(&self) -> &MarketSpec {
        &self.spec
    }

    /// Non-fatal findings collected during validation.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Trajectory value at `t`, right-continuous for step tables.
    pub fn gamma_at(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.spec.gamma.eval(t, self.spec.horizon))
    }

    /// Intensity value at `t`.
    pub fn kappa_at(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.spec.kappa.eval(t))
    }

    pub fn sigma_at(&self, t: f64) -> f64 {
        self.spec.sigma.eval(t)
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.spec.horizon {
            return Err(Error::Domain {
                t,
                horizon: self.spec.horizon,
            });
        }
        Ok(())
    }

    /// Total-evaluation variants for integrands: clamp float dust into the
    /// trading interval instead of erroring.
    pub(crate) fn gamma_clamped(&self, t: f64) -> f64 {
        self.spec.gamma.eval(t.clamp(0.0, self.spec.horizon), self.spec.horizon)
    }

    pub(crate) fn kappa_clamped(&self, t: f64) -> f64 {
        self.spec.kappa.eval(t.clamp(0.0, self.spec.horizon))
    }

    pub fn gamma_breakpoints(&self) -> &[f64] {
        &self.gamma_breakpoints
    }

    pub fn kappa_breakpoints(&self) -> &[f64] {
        &self.kappa_breakpoints
    }

    /// Union of the trajectory and intensity breakpoints.
    pub fn joint_breakpoints(&self) -> &[f64] {
        &self.joint_breakpoints
    }

    /// Cached total intensity mass over the trading day.
    pub fn kappa_integral(&self) -> f64 {
        self.kappa_integral
    }
}

/// The two agents of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agent {
    One,
    Two,
}

impl Agent {
    pub fn index(self) -> usize {
        match self {
            Agent::One => 1,
            Agent::Two => 2,
        }
    }
}

/// Trading targets of the two agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPair {
    pub a1: f64,
    pub a2: f64,
}

impl TargetPair {
    pub fn new(a1: f64, a2: f64) -> Self {
        TargetPair { a1, a2 }
    }

    pub fn target(&self, agent: Agent) -> f64 {
        match agent {
            Agent::One => self.a1,
            Agent::Two => self.a2,
        }
    }

    pub fn deviations(&self) -> Deviations {
        deviations(self)
    }
}

/// Aggregate target and the per-agent deviations from its midpoint.
/// The deviations sum to zero exactly, also in floating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviations {
    /// `a1 + a2`.
    pub aggregate: f64,
    /// Agent 1's deviation from half the aggregate target.
    pub dev1: f64,
    /// `-dev1`.
    pub dev2: f64,
}

impl Deviations {
    pub fn dev(&self, agent: Agent) -> f64 {
        match agent {
            Agent::One => self.dev1,
            Agent::Two => self.dev2,
        }
    }
}

/// Deviation of each target from half the aggregate, `dev_i = a_i - (a1+a2)/2`,
/// computed in the exactly antisymmetric form `dev1 = (a1 - a2)/2`.
pub fn deviations(targets: &TargetPair) -> Deviations {
    let dev1 = (targets.a1 - targets.a2) / 2.0;
    Deviations {
        aggregate: targets.a1 + targets.a2,
        dev1,
        dev2: -dev1,
    }
}
