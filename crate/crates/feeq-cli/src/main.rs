//! Command-line front end: config ingestion, subcommand dispatch, CSV/JSON
//! emission. Exit codes: 0 ok, 2 input/validation error, 3 verification
//! failure.

mod json;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use feeq::config::FileConfig;
use feeq::equilibrium;
use feeq::exchange::{self, FeeMethod};
use feeq::model::{Agent, Deviations, ValidSpec};
use feeq::oracle;
use feeq::simulate;

/// Seed used when neither the config nor the flag provides one.
const DEFAULT_SEED: u64 = 42;

/// Monte Carlo samples used when none are requested.
const DEFAULT_SAMPLES: usize = 20_000;

/// Rows/points used when --grid is not given.
const DEFAULT_GRID: usize = 200;

#[derive(Parser)]
#[command(
    name = "feeq",
    version,
    about = "Targeted-trading equilibrium under proportional fees and price impact"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Generator seed; overrides `[rng].seed`. Defaults to 42, never wall-clock.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV output (default: current directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Fee level; overrides `[fee].lambda`.
    #[arg(long)]
    lambda: Option<f64>,
    /// Grid size: holdings CSV rows, fee grid points.
    #[arg(long)]
    grid: Option<usize>,
    /// Monte Carlo sample count (also the challenger count for `verify`).
    #[arg(long)]
    samples: Option<usize>,
    /// Expected-profit method; defaults to quadrature when the configuration
    /// matches the worked example and Monte Carlo otherwise.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Cap worker-thread parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Echo the effective configuration (flag overrides applied) and exit.
    #[arg(long)]
    dump_config: bool,
    /// Corrupt the simulated holdings path so verification must fail.
    #[arg(long, hide = true)]
    inject_fault: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mc,
    Quadrature,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equilibrium: JSON summary on stdout, holdings CSV on disk.
    Solve,
    /// Run the optimality, clearing, price-consistency and budget audits.
    Verify,
    /// Tabulate expected exchange profit over a fee grid as CSV.
    ProfitCurve {
        /// Comma-separated impact levels; emits one curve per level with a
        /// leading c1 column.
        #[arg(long, value_delimiter = ',', value_name = "C1,...")]
        c1_sweep: Option<Vec<f64>>,
    },
    /// Locate the fee level maximizing expected exchange profit.
    OptimizeFee,
    /// Simulate one equilibrium path and write it as CSV.
    Simulate {
        /// Euler steps of the path grid.
        #[arg(long, default_value_t = simulate::DEFAULT_STEPS)]
        steps: usize,
    },
}

enum Failure {
    Input(String),
    Verification(String),
}

impl From<feeq::Error> for Failure {
    fn from(e: feeq::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut config = FileConfig::from_toml(&text)?;
    if let Some(lambda) = cli.lambda {
        config.fee.lambda = Some(lambda);
    }
    if let Some(seed) = cli.seed {
        config.rng.seed = Some(seed);
    }

    if cli.dump_config {
        print!("{}", config.to_toml()?);
        return Ok(());
    }

    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    }

    let spec = config.market_spec()?.validate()?;
    for warning in spec.warnings() {
        eprintln!("warning: {warning}");
    }
    let seed = config.rng.seed.unwrap_or(DEFAULT_SEED);
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));

    match &cli.command {
        Command::Solve => cmd_solve(&cli, &config, &spec, &out_dir),
        Command::Verify => cmd_verify(&cli, &config, &spec, seed),
        Command::ProfitCurve { c1_sweep } => {
            cmd_profit_curve(&cli, &config, &spec, seed, &out_dir, c1_sweep.as_deref())
        }
        Command::OptimizeFee => cmd_optimize_fee(&cli, &config, &spec, seed),
        Command::Simulate { steps } => cmd_simulate(&cli, &config, &spec, seed, &out_dir, *steps),
    }
}

fn require_lambda(config: &FileConfig) -> Result<f64, Failure> {
    config
        .fee
        .lambda
        .ok_or_else(|| Failure::Input("this command needs a fee level: set [fee].lambda or pass --lambda".into()))
}

fn resolve_method(
    cli: &Cli,
    spec: &ValidSpec,
    prior: &exchange::TargetPrior,
) -> FeeMethod {
    match cli.method {
        Some(MethodArg::Mc) => FeeMethod::MonteCarlo,
        Some(MethodArg::Quadrature) => FeeMethod::Quadrature,
        None => {
            if exchange::quadrature_applies(spec, prior) {
                FeeMethod::Quadrature
            } else {
                FeeMethod::MonteCarlo
            }
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Input(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn cmd_solve(
    cli: &Cli,
    config: &FileConfig,
    spec: &ValidSpec,
    out_dir: &Path,
) -> Result<(), Failure> {
    let lambda = require_lambda(config)?;
    let dev = config.target_pair()?.deviations();
    let sol = equilibrium::solve(spec, &dev, lambda)?;

    let rows = cli.grid.unwrap_or(DEFAULT_GRID).max(2);
    let mut csv = String::from("t,theta1,theta2,gamma_tilde\n");
    for j in 0..=rows {
        let t = spec.horizon() * j as f64 / rows as f64;
        let (h1, h2) = sol.holdings(t)?;
        let level = sol.effective_trajectory(t)?;
        writeln!(csv, "{t},{h1},{h2},{level}").unwrap();
    }
    let path = write_file(out_dir, "holdings.csv", &csv)?;
    eprintln!("wrote {}", path.display());

    let summary = json::Obj::new()
        .num("lambda", sol.lambda)
        .num("tau", sol.tau)
        .num("chi", sol.chi)
        .bool("trade_occurs", sol.trade_occurs)
        .num("gamma_tilde_terminal", sol.terminal_level)
        .num("c0_start", sol.c0(0.0)?)
        .num("c0_end", sol.c0(spec.horizon())?)
        .num("c2", sol.c2)
        .num("turnover_per_agent", sol.turnover_per_agent())
        .finish();
    println!("{summary}");
    Ok(())
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn cmd_verify(
    cli: &Cli,
    config: &FileConfig,
    spec: &ValidSpec,
    seed: u64,
) -> Result<(), Failure> {
    let lambda = require_lambda(config)?;
    let dev = config.target_pair()?.deviations();
    let sol = equilibrium::solve(spec, &dev, lambda)?;
    let trials = cli.samples.unwrap_or(1000);
    let mut checks = Vec::new();

    for (agent, name) in [(Agent::One, "optimality_agent1"), (Agent::Two, "optimality_agent2")] {
        let check = match oracle::verify_optimality(spec, &dev, lambda, agent, 64, trials, seed, 1e-6)
        {
            Ok(report) => Check {
                name,
                pass: true,
                detail: format!(
                    "worst_gap={:.3e}, ascent_gain={:.3e}, challengers={}",
                    report.worst_gap, report.ascent_gain, report.n_challengers
                ),
            },
            Err(e) => Check {
                name,
                pass: false,
                detail: e.to_string(),
            },
        };
        checks.push(check);
    }

    let mut bundle = simulate::simulate(spec, &dev, lambda, 1024, seed)?;
    if cli.inject_fault {
        let mid = bundle.theta1.len() / 2;
        for value in &mut bundle.theta1[mid..] {
            *value += 0.5;
        }
        eprintln!("fault injected: holdings path of agent 1 corrupted from midpoint on");
    }

    let clearing = bundle
        .theta1
        .iter()
        .zip(&bundle.theta2)
        .map(|(a, b)| (a + b - spec.supply()).abs())
        .fold(0.0_f64, f64::max);
    checks.push(Check {
        name: "clearing",
        pass: clearing <= 1e-12 * spec.supply(),
        detail: format!("max residual {clearing:.3e} over {} grid points", bundle.times.len()),
    });

    let mut drift_gap = 0.0_f64;
    if sol.tau > 0.0 {
        for j in 1..512 {
            let t = sol.tau * j as f64 / 512.0;
            let (h1, h2) = sol.holdings(t)?;
            let eq = sol.equilibrium_drift(t)?;
            drift_gap = drift_gap
                .max((sol.perceived_drift(Agent::One, h1, t)? - eq).abs())
                .max((sol.perceived_drift(Agent::Two, h2, t)? - eq).abs());
        }
    }
    checks.push(Check {
        name: "price_consistency",
        pass: drift_gap <= 1e-10,
        detail: format!("max |perceived - equilibrium| = {drift_gap:.3e} on (0, tau)"),
    });

    let mut bound_excess = 0.0_f64;
    let mut pin_gap = 0.0_f64;
    for j in 0..=1024 {
        let t = spec.horizon() * j as f64 / 1024.0;
        let y = sol.adjoint(t)?;
        bound_excess = bound_excess.max(y.y1.abs() - lambda * (1.0 + 1e-12));
        if sol.trade_occurs && t <= sol.tau {
            pin_gap = pin_gap.max((y.y1 - lambda * dev.dev1.signum()).abs());
        }
    }
    checks.push(Check {
        name: "adjoint",
        pass: bound_excess <= 0.0 && pin_gap <= 1e-10,
        detail: format!("bound excess {bound_excess:.3e}, pin gap {pin_gap:.3e}"),
    });

    let (money, consumption) = oracle::verify_walras(&bundle);
    let scale = spec.supply() * bundle.s_hat[0].abs().max(1.0);
    checks.push(Check {
        name: "walras",
        pass: money <= 1e-10 * scale && consumption <= 1e-10 * scale,
        detail: format!("money residual {money:.3e}, consumption residual {consumption:.3e}"),
    });
    checks.push(Check {
        name: "terminal_dividend",
        pass: bundle.s_hat[bundle.s_hat.len() - 1] == bundle.dividend,
        detail: "terminal price equals dividend".to_string(),
    });

    let all_pass = checks.iter().all(|c| c.pass);
    let rendered = checks.iter().map(|c| {
        json::Obj::new()
            .str("name", c.name)
            .bool("pass", c.pass)
            .str("detail", &c.detail)
            .finish()
    });
    let report = json::Obj::new()
        .bool("all_pass", all_pass)
        .raw("checks", json::array(rendered))
        .finish();
    println!("{report}");

    if all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        Err(Failure::Verification(failed.join(", ")))
    }
}

fn fee_grid(
    config: &FileConfig,
    spec: &ValidSpec,
    prior: &exchange::TargetPrior,
    points: usize,
    seed: u64,
) -> Result<Vec<f64>, Failure> {
    let (lo, hi) = match &config.fee.search {
        Some(range) => (range.lo, range.hi),
        None => exchange::auto_search_range(spec, prior, seed).ok_or_else(|| {
            Failure::Input("prior puts no mass on trade; give [fee].search explicitly".into())
        })?,
    };
    if !(lo > 0.0 && hi > lo) {
        return Err(Failure::Input(format!("bad fee range ({lo}, {hi})")));
    }
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

fn cmd_profit_curve(
    cli: &Cli,
    config: &FileConfig,
    spec: &ValidSpec,
    seed: u64,
    out_dir: &Path,
    c1_sweep: Option<&[f64]>,
) -> Result<(), Failure> {
    let prior = config.target_prior()?;
    let method = resolve_method(cli, spec, &prior);
    let samples = cli.samples.unwrap_or(DEFAULT_SAMPLES);
    let points = cli.grid.unwrap_or(DEFAULT_GRID).max(2);
    let lambdas = fee_grid(config, spec, &prior, points, seed)?;

    let mut csv = String::new();
    match c1_sweep {
        Some(levels) => {
            csv.push_str("c1,lambda,expected_profit,stderr\n");
            for &c1 in levels {
                let mut market = config.market_spec()?;
                market.c1 = c1;
                let variant = market.validate()?;
                let curve =
                    exchange::profit_curve(&variant, &prior, &lambdas, method, samples, seed)?;
                for i in 0..curve.lambdas.len() {
                    writeln!(
                        csv,
                        "{c1},{},{},{}",
                        curve.lambdas[i], curve.values[i], curve.stderr[i]
                    )
                    .unwrap();
                }
            }
        }
        None => {
            csv.push_str("lambda,expected_profit,stderr\n");
            let curve = exchange::profit_curve(spec, &prior, &lambdas, method, samples, seed)?;
            for i in 0..curve.lambdas.len() {
                writeln!(
                    csv,
                    "{},{},{}",
                    curve.lambdas[i], curve.values[i], curve.stderr[i]
                )
                .unwrap();
            }
        }
    }
    let path = write_file(out_dir, "profit_curve.csv", &csv)?;
    let summary = json::Obj::new()
        .str("file", &path.display().to_string())
        .int("points", lambdas.len() as u64)
        .str("method", method.as_str())
        .finish();
    println!("{summary}");
    Ok(())
}

fn cmd_optimize_fee(
    cli: &Cli,
    config: &FileConfig,
    spec: &ValidSpec,
    seed: u64,
) -> Result<(), Failure> {
    let prior = config.target_prior()?;
    let method = resolve_method(cli, spec, &prior);
    let samples = cli.samples.unwrap_or(DEFAULT_SAMPLES);
    let range = config.fee.search.as_ref().map(|s| (s.lo, s.hi));
    let optimum = exchange::optimal_fee(spec, &prior, range, method, samples, seed)?;
    if optimum.flat_objective {
        eprintln!("warning: flat objective; the prior puts no mass on trade");
    }
    let summary = json::Obj::new()
        .num("lambda_hat", optimum.lambda_hat)
        .num("value", optimum.value)
        .str("method", optimum.method.as_str())
        .int("evaluations", optimum.evaluations as u64)
        .bool("flat_objective", optimum.flat_objective)
        .finish();
    println!("{summary}");
    Ok(())
}

fn cmd_simulate(
    _cli: &Cli,
    config: &FileConfig,
    spec: &ValidSpec,
    seed: u64,
    out_dir: &Path,
    steps: usize,
) -> Result<(), Failure> {
    let lambda = require_lambda(config)?;
    let dev: Deviations = config.target_pair()?.deviations();
    let bundle = simulate::simulate(spec, &dev, lambda, steps, seed)?;
    let mut csv = String::from("t,S_hat,theta1,theta2,X1,X2,mm1,mm2\n");
    for j in 0..bundle.times.len() {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            bundle.times[j],
            bundle.s_hat[j],
            bundle.theta1[j],
            bundle.theta2[j],
            bundle.wealth1[j],
            bundle.wealth2[j],
            bundle.money1[j],
            bundle.money2[j]
        )
        .unwrap();
    }
    let path = write_file(out_dir, "path.csv", &csv)?;
    let summary = json::Obj::new()
        .str("file", &path.display().to_string())
        .int("steps", steps as u64)
        .int("seed", seed)
        .num("s_hat_0", bundle.s_hat[0])
        .num("dividend", bundle.dividend)
        .finish();
    println!("{summary}");
    Ok(())
}
