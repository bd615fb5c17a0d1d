//! Command-line front end: `fit-gamma`, `solve`, `figure`, `selftest`.
//!
//! Settings are resolved as command-line flag, then config file section,
//! then `[scenario]`, then built-in default. The master seed additionally
//! falls back to the `SEED` environment variable before defaulting to 0.
//!
//! Exit codes: 0 success, 1 solver non-convergence (or a failed selftest),
//! 2 configuration or usage error.

pub mod config;
pub mod csv;
pub mod selftest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::baselines::{epa_profile, sncpc_solve};
use crate::epistemic::{
    run_epistemic_game, EpistemicError, EpistemicPolicy, ExchangeSchedule, SeedAction, TraceDetail,
};
use crate::game::{
    db_to_linear, meets_threshold, sinr, solve_nash_full_csi, GameError, NetworkState, PowerGrid, PowerProfile,
};
use crate::sim::{
    draw_gains, sweep_fig3, sweep_fig4, sweep_fig5, sweep_fig6, GainRow, PolicyLabel, PolicyRow, ScenarioSpec,
    SimError, SolverKind, Thresholds,
};
use crate::stats::{fit_gamma_mme, RayleighPrior, StatsError};

use config::{parse_list, ConfigError, RunConfig, Settings};
use csv::{join, sig9, CsvTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NONCONVERGED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Epistemic(#[from] EpistemicError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot write {path}: {msg}")]
    Io { path: String, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_USAGE
    }
}

fn bad_value(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(ConfigError::BadValue {
        key: key.to_string(),
        msg: msg.to_string(),
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "epigame",
    version,
    about = "Epistemic Bayesian-game uplink power control simulator"
)]
pub struct Cli {
    /// Configuration file with `[scenario]` and per-command sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for Monte Carlo sweeps (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Monte Carlo trials per sweep point.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Write CSV here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Method-of-moments Gamma fit of an interference power vector.
    FitGamma {
        /// Comma-separated interferer powers.
        #[arg(long, allow_hyphen_values = true)]
        powers: String,
        /// Exponential rate of the squared gain magnitudes.
        #[arg(long)]
        lambda: f64,
    },
    /// Solve one network realisation.
    Solve {
        #[arg(value_enum)]
        solver: SolverArg,
        /// Moment order k of the epistemic policy.
        #[arg(long)]
        moment: Option<usize>,
        /// Comma-separated gain magnitudes; drawn from the prior when absent.
        #[arg(long, allow_hyphen_values = true)]
        gains: Option<String>,
        /// Comma-separated SINR thresholds in dB (one value or one per node).
        #[arg(long, allow_hyphen_values = true)]
        thresholds_db: Option<String>,
        /// Write the per-stage epistemic trace as CSV to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Monte Carlo sweep behind one of the result figures.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(3..=6))]
        which: u8,
    },
    /// Run the oracle suites.
    Selftest {
        /// Reduced instance counts.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Nash,
    Epistemic,
    Epa,
    Sncpc,
}

/// Parses `args` (including the program name) and executes the command.
/// `env_seed` is the value of `SEED`, if set.
pub fn run<I, T>(args: I, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(&cli, env_seed, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::FitGamma { powers, lambda } => fit_gamma(cli, powers, *lambda, out),
        Command::Solve {
            solver,
            moment,
            gains,
            thresholds_db,
            trace,
        } => {
            let mut settings = load_settings(cli, "solve")?;
            if let Some(k) = moment {
                settings.set("moment_order", k);
            }
            if let Some(g) = gains {
                settings.set("gains_linear", g);
            }
            if let Some(t) = thresholds_db {
                settings.remove("thresholds_linear");
                settings.set("thresholds_db", t);
            }
            solve(cli, *solver, &settings, trace.as_ref(), env_seed, out, err)
        }
        Command::Figure { which } => {
            let settings = load_settings(cli, &format!("figure{which}"))?;
            figure(cli, *which, &settings, env_seed, out, err)
        }
        Command::Selftest { quick } => {
            let seed = resolve_seed(cli, &load_settings(cli, "scenario")?, env_seed)?;
            let sizes = if *quick {
                selftest::SuiteSizes::QUICK
            } else {
                selftest::SuiteSizes::FULL
            };
            let ok = selftest::run(out, seed, sizes).map_err(|e| CliError::Io {
                path: "stdout".into(),
                msg: e.to_string(),
            })?;
            Ok(if ok { EXIT_OK } else { EXIT_NONCONVERGED })
        }
    }
}

fn load_settings(cli: &Cli, section: &str) -> Result<Settings, CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok(cfg.resolved(section))
}

fn resolve_seed(cli: &Cli, settings: &Settings, env_seed: Option<&str>) -> Result<u64, CliError> {
    if let Some(s) = cli.seed {
        return Ok(s);
    }
    if let Some(s) = settings.parse::<u64>("seed")? {
        return Ok(s);
    }
    match env_seed {
        Some(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|_| CliError::Usage(format!("SEED must be an unsigned integer, got '{v}'"))),
        None => Ok(0),
    }
}

fn db_or_linear(settings: &Settings, db_key: &str, linear_key: &str, default_db: f64) -> Result<f64, CliError> {
    if let Some(v) = settings.parse::<f64>(linear_key)? {
        return Ok(v);
    }
    Ok(db_to_linear(settings.parse::<f64>(db_key)?.unwrap_or(default_db)))
}

fn or_default<T: std::str::FromStr>(settings: &Settings, key: &str, default: T) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    Ok(settings.parse::<T>(key)?.unwrap_or(default))
}

/// Resolved scenario together with its provenance stamp.
struct Resolved {
    spec: ScenarioSpec,
    policy: EpistemicPolicy,
    stamp: Vec<(String, String)>,
}

impl Resolved {
    fn stamp_line(&self, command: &str, extra: &[(&str, String)]) -> String {
        let mut parts = vec![format!("epigame {command}")];
        parts.extend(self.stamp.iter().map(|(k, v)| format!("{k}={v}")));
        parts.extend(extra.iter().map(|(k, v)| format!("{k}={v}")));
        parts.join(" ")
    }

    fn restamp(&mut self, key: &str, value: String) {
        if let Some(entry) = self.stamp.iter_mut().find(|(k, _)| k == key) {
            entry.1 = value;
        }
    }
}

fn scenario(cli: &Cli, settings: &Settings, env_seed: Option<&str>) -> Result<Resolved, CliError> {
    let n_nodes: usize = or_default(settings, "n_nodes", 100)?;
    let sigma: f64 = or_default(settings, "rayleigh_sigma_linear", 1.0)?;
    let prior = RayleighPrior::new(sigma).map_err(|e| bad_value("rayleigh_sigma_linear", e))?;
    let noise = db_or_linear(settings, "noise_db", "noise_linear", -120.0)?;
    let threshold = db_or_linear(settings, "threshold_db", "threshold_linear", -20.0)?;
    let pct: f64 = or_default(settings, "interference_pct", 100.0)?;
    if !(0.0..=100.0).contains(&pct) {
        return Err(bad_value("interference_pct", format!("{pct} is outside [0, 100]")));
    }
    let levels: usize = or_default(settings, "grid_levels", 1001)?;
    let p_max: f64 = or_default(settings, "p_max_linear", 1.0)?;
    if !(p_max.is_finite() && p_max > 0.0) {
        return Err(bad_value("p_max_linear", format!("{p_max} is not positive")));
    }
    let grid = PowerGrid::linear(levels, p_max).map_err(|e| bad_value("grid_levels", e))?;
    let trials = match cli.trials {
        Some(t) => t,
        None => or_default(settings, "trials", crate::sim::DEFAULT_TRIALS)?,
    };
    let seed = resolve_seed(cli, settings, env_seed)?;
    let workers = match cli.workers {
        Some(w) => w,
        None => or_default(settings, "workers", 0)?,
    };
    let max_stages: usize = or_default(settings, "max_stages", crate::sim::DEFAULT_MAX_STAGES)?;
    let nash_max_rounds: usize = or_default(settings, "nash_max_rounds", crate::sim::DEFAULT_NASH_ROUNDS)?;
    let moment_order: usize = or_default(settings, "moment_order", 1)?;
    let truncation: usize = or_default(settings, "truncation", crate::stats::DEFAULT_TRUNCATION)?;
    let seed_action_text = settings.get("seed_action").unwrap_or("max").to_ascii_lowercase();
    let seed_action = match seed_action_text.as_str() {
        "max" => SeedAction::MaxPower,
        "lowest" => SeedAction::LowestPower,
        other => match other.parse::<f64>() {
            Ok(p) if grid.contains(p) => SeedAction::Level(p),
            _ => {
                return Err(bad_value(
                    "seed_action",
                    format!("'{other}' is not max, lowest or a grid level"),
                ))
            }
        },
    };
    let exchange_text = settings.get("exchange").unwrap_or("simultaneous").to_ascii_lowercase();
    let exchange = match exchange_text.as_str() {
        "simultaneous" => ExchangeSchedule::Simultaneous,
        "sequential" => ExchangeSchedule::Sequential,
        other => {
            return Err(bad_value(
                "exchange",
                format!("'{other}' is not simultaneous or sequential"),
            ))
        }
    };
    let epa_level: f64 = or_default(settings, "epa_level_linear", p_max)?;
    if !grid.contains(epa_level) {
        return Err(bad_value(
            "epa_level_linear",
            format!("{epa_level} is not a grid level"),
        ));
    }
    let sncpc_max_iter: usize = or_default(settings, "sncpc_max_iter", crate::baselines::DEFAULT_SNCPC_MAX_ITER)?;
    let desired_gain: Option<f64> = match settings.get("desired_gain_linear") {
        Some(v) if v.eq_ignore_ascii_case("none") => None,
        _ => settings.parse("desired_gain_linear")?,
    };

    let policy = EpistemicPolicy::new(moment_order)
        .map_err(|e| bad_value("moment_order", e))?
        .with_truncation(truncation)
        .with_prior(prior)
        .with_seed(seed_action)
        .with_exchange(exchange);

    let spec = ScenarioSpec {
        n_nodes,
        prior,
        noise_power: noise,
        grid,
        thresholds: Thresholds::Uniform(threshold),
        interference_fraction: pct / 100.0,
        solver: SolverKind::Epistemic(policy),
        trials,
        seed,
        desired_gain,
        max_stages,
        nash_max_rounds,
        epa_level: Some(epa_level),
        sncpc_max_iter,
        workers,
    };

    let stamp: Vec<(String, String)> = [
        ("n_nodes", n_nodes.to_string()),
        ("rayleigh_sigma_linear", sigma.to_string()),
        ("noise_linear", noise.to_string()),
        ("threshold_linear", threshold.to_string()),
        ("interference_pct", pct.to_string()),
        ("grid_levels", levels.to_string()),
        ("p_max_linear", p_max.to_string()),
        ("trials", trials.to_string()),
        ("seed", seed.to_string()),
        ("max_stages", max_stages.to_string()),
        ("nash_max_rounds", nash_max_rounds.to_string()),
        ("moment_order", moment_order.to_string()),
        ("truncation", truncation.to_string()),
        ("seed_action", seed_action_text),
        ("exchange", exchange_text),
        ("epa_level_linear", epa_level.to_string()),
        ("sncpc_max_iter", sncpc_max_iter.to_string()),
        (
            "desired_gain_linear",
            desired_gain.map_or("none".to_string(), |g| g.to_string()),
        ),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();

    Ok(Resolved { spec, policy, stamp })
}

fn emit(cli: &Cli, settings: Option<&Settings>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let path = cli
        .output
        .clone()
        .or_else(|| settings.and_then(|s| s.get("output")).map(PathBuf::from));
    match path {
        Some(p) => std::fs::write(&p, text).map_err(|e| CliError::Io {
            path: p.display().to_string(),
            msg: e.to_string(),
        }),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::Io {
            path: "stdout".into(),
            msg: e.to_string(),
        }),
    }
}

fn fit_gamma(cli: &Cli, powers: &str, lambda: f64, out: &mut dyn Write) -> Result<i32, CliError> {
    let powers: Vec<f64> = parse_list("powers", powers)?;
    let model = fit_gamma_mme(&powers, lambda)?;
    let moments = model.moments(4);
    let mut table = CsvTable::new(&["quantity", "value"]);
    table.comment(format!("epigame fit-gamma powers={} lambda={lambda}", join(&powers)));
    let mut put = |name: String, v: f64| table.row(vec![name, sig9(v)]);
    put("alpha_hat".into(), model.alpha_hat);
    put("theta_hat".into(), model.theta_hat);
    put("mean".into(), model.mean());
    put("variance".into(), model.variance());
    for k in 1..=4 {
        put(format!("raw_moment_{k}"), moments.raw(k));
    }
    for k in 2..=4 {
        put(format!("central_moment_{k}"), moments.central(k));
    }
    emit(cli, None, &table.render(), out)?;
    Ok(EXIT_OK)
}

fn thresholds_for(settings: &Settings, n: usize, uniform: f64) -> Result<Vec<f64>, CliError> {
    let (key, values) = if let Some(db) = settings.list::<f64>("thresholds_db")? {
        ("thresholds_db", db.into_iter().map(db_to_linear).collect::<Vec<_>>())
    } else if let Some(lin) = settings.list::<f64>("thresholds_linear")? {
        ("thresholds_linear", lin)
    } else {
        return Ok(vec![uniform; n]);
    };
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values),
        len => Err(bad_value(key, format!("{len} values for {n} nodes"))),
    }
}

fn solve(
    cli: &Cli,
    solver: SolverArg,
    settings: &Settings,
    trace_path: Option<&PathBuf>,
    env_seed: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    if trace_path.is_some() && solver != SolverArg::Epistemic {
        return Err(CliError::Usage("--trace applies to the epistemic solver only".into()));
    }
    let mut resolved = scenario(cli, settings, env_seed)?;
    let gains = match settings.list::<f64>("gains_linear")? {
        Some(g) if g.is_empty() => return Err(bad_value("gains_linear", "empty list")),
        Some(g) => {
            resolved.spec.n_nodes = g.len();
            resolved.restamp("n_nodes", g.len().to_string());
            g
        }
        None => draw_gains(&resolved.spec, 0),
    };
    let n = gains.len();
    let uniform = match resolved.spec.thresholds {
        Thresholds::Uniform(t) => t,
        Thresholds::PerNode(_) => unreachable!("scenario resolves a uniform threshold"),
    };
    let thresholds = thresholds_for(settings, n, uniform)?;
    let network = NetworkState::from_gains(&gains, &thresholds, resolved.spec.noise_power)?;
    let grid = &resolved.spec.grid;

    let mut summary: Vec<String> = Vec::new();
    let mut evaluations: Option<u64> = None;
    let mut converged = true;
    let profile: PowerProfile = match solver {
        SolverArg::Nash => match solve_nash_full_csi(&network, grid, resolved.spec.nash_max_rounds, 0.0) {
            Ok(sol) => {
                summary.push(format!(
                    "solver=nash converged=true rounds={} infeasible={}",
                    sol.rounds,
                    sol.infeasible.len()
                ));
                sol.profile
            }
            Err(GameError::NoConvergence { rounds, trace }) => {
                let _ = writeln!(
                    err,
                    "error: best-response iteration did not converge in {rounds} rounds"
                );
                for (r, powers) in trace.iter().enumerate() {
                    let _ = writeln!(err, "  trace[{r}] = {}", join(powers));
                }
                return Ok(EXIT_NONCONVERGED);
            }
            Err(e) => return Err(e.into()),
        },
        SolverArg::Epistemic => {
            let detail = if trace_path.is_some() {
                TraceDetail::Stages
            } else {
                TraceDetail::Summary
            };
            let policy = resolved.policy.with_detail(detail);
            let trace = run_epistemic_game(&network, grid, &policy, resolved.spec.max_stages)?;
            summary.push(format!(
                "solver=epistemic moment_order={} converged={} passes={} eu_evaluations={} believed_infeasible={} numerical_flags={}",
                policy.moment_order,
                trace.converged,
                trace.passes,
                trace.eu_evaluations,
                trace.infeasible.len(),
                trace.numerical_flags
            ));
            if let Some(path) = trace_path {
                let mut text = String::from(crate::epistemic::BeliefStage::CSV_HEADER);
                text.push('\n');
                for stage in &trace.stages {
                    text.push_str(&stage.csv_record());
                    text.push('\n');
                }
                std::fs::write(path, text).map_err(|e| CliError::Io {
                    path: path.display().to_string(),
                    msg: e.to_string(),
                })?;
            }
            converged = trace.converged;
            evaluations = Some(trace.eu_evaluations);
            trace.final_profile
        }
        SolverArg::Epa => {
            let level = resolved.spec.epa_level.unwrap_or(grid.p_max());
            summary.push(format!("solver=epa level={level}"));
            epa_profile(&network, grid, level)?
        }
        SolverArg::Sncpc => {
            let outcome = sncpc_solve(&network, grid, &resolved.spec.prior, resolved.spec.sncpc_max_iter)?;
            summary.push(format!(
                "solver=sncpc converged={} iterations={} believed_infeasible={}",
                outcome.converged,
                outcome.iterations,
                outcome.infeasible.len()
            ));
            converged = outcome.converged;
            outcome.profile
        }
    };

    let mut header = vec!["id", "gain", "power", "sinr", "feasible"];
    if evaluations.is_some() {
        header.push("eu_evaluations");
    }
    let mut table = CsvTable::new(&header);
    table.comment(resolved.stamp_line(
        "solve",
        &[("gains_linear", join(&gains)), ("thresholds_linear", join(&thresholds))],
    ));
    for line in summary {
        table.comment(line);
    }
    for node in network.nodes() {
        let power = profile
            .get(node.id)
            .ok_or(CliError::Game(GameError::IncompleteProfile(node.id)))?;
        let s = sinr(&network, &profile, node.id)?;
        let mut row = vec![
            node.id.to_string(),
            sig9(node.gain),
            sig9(power),
            sig9(s),
            (meets_threshold(s, node.sinr_threshold) as u8).to_string(),
        ];
        if let Some(e) = evaluations {
            row.push(e.to_string());
        }
        table.row(row);
    }
    emit(cli, Some(settings), &table.render(), out)?;
    if converged {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(err, "error: solver did not converge; the last profile is reported");
        Ok(EXIT_NONCONVERGED)
    }
}

fn default_gains() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 10.0).collect()
}

const DEFAULT_THRESHOLDS_DB: [f64; 4] = [-18.0, -20.0, -27.0, -30.0];

fn default_pcts() -> Vec<f64> {
    (1..=10).map(|i| (i * 10) as f64).collect()
}

fn figure(
    cli: &Cli,
    which: u8,
    settings: &Settings,
    env_seed: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let resolved = scenario(cli, settings, env_seed)?;
    let base = &resolved.spec;
    let command = format!("figure {which}");
    let mut warnings: Vec<String> = Vec::new();
    let text = match which {
        3 | 4 => {
            let gains = settings.list::<f64>("gains_linear")?.unwrap_or_else(default_gains);
            let thresholds_db = settings
                .list::<f64>("thresholds_db")?
                .unwrap_or_else(|| DEFAULT_THRESHOLDS_DB.to_vec());
            let rows: Vec<GainRow> = if which == 3 {
                sweep_fig3(base, &gains, &thresholds_db)?
            } else {
                sweep_fig4(base, &gains, &thresholds_db)?
            };
            let mut table = CsvTable::new(&["gain", "threshold_db", "metric", "ci"]);
            table.comment(resolved.stamp_line(
                &command,
                &[("gains_linear", join(&gains)), ("thresholds_db", join(&thresholds_db))],
            ));
            table.comment(if which == 3 {
                "metric=avg_power (fraction of p_max, desired node)"
            } else {
                "metric=coverage (desired node)"
            });
            for row in &rows {
                let m = &row.metrics;
                let (metric, ci) = if which == 3 {
                    (m.avg_power, m.power_ci_halfwidth)
                } else {
                    (m.coverage, m.ci_halfwidth)
                };
                table.row(vec![sig9(row.gain), sig9(row.threshold_db), sig9(metric), sig9(ci)]);
                if let Some(w) = &m.warning {
                    warnings.push(format!("gain {} threshold {} dB: {w}", row.gain, row.threshold_db));
                }
            }
            table.render()
        }
        _ => {
            let pcts = settings.list::<f64>("interference_pcts")?.unwrap_or_else(default_pcts);
            if let Some(bad) = pcts.iter().find(|p| !(0.0..=100.0).contains(*p)) {
                return Err(bad_value("interference_pcts", format!("{bad} is outside [0, 100]")));
            }
            let policies = settings
                .list::<PolicyLabel>("policies")?
                .unwrap_or_else(|| PolicyLabel::FIGURE_SET.to_vec());
            let rows: Vec<PolicyRow> = if which == 5 {
                sweep_fig5(base, &pcts, &policies)?
            } else {
                sweep_fig6(base, &pcts, &policies)?
            };
            let mut table = CsvTable::new(&["interference_pct", "policy", "metric", "ci"]);
            table.comment(resolved.stamp_line(
                &command,
                &[("interference_pcts", join(&pcts)), ("policies", join(&policies))],
            ));
            table.comment(if which == 5 {
                "metric=outage (mean over active nodes)"
            } else {
                "metric=avg_power (fraction of p_max, mean over active nodes)"
            });
            for row in &rows {
                let m = &row.metrics;
                let (metric, ci) = if which == 5 {
                    (m.outage, m.ci_halfwidth)
                } else {
                    (m.avg_power, m.power_ci_halfwidth)
                };
                table.row(vec![
                    sig9(row.interference_pct),
                    row.policy.to_string(),
                    sig9(metric),
                    sig9(ci),
                ]);
                if let Some(w) = &m.warning {
                    warnings.push(format!("{} at {}%: {w}", row.policy, row.interference_pct));
                }
            }
            table.render()
        }
    };
    emit(cli, Some(settings), &text, out)?;
    for w in &warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    Ok(if warnings.is_empty() {
        EXIT_OK
    } else {
        EXIT_NONCONVERGED
    })
}
