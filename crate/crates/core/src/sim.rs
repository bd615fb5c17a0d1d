//! Seeded Monte Carlo harness and the four figure sweeps.
//!
//! Every trial owns a ChaCha8 stream selected by `(seed, trial index)`, so
//! results do not depend on how trials are spread across worker threads;
//! aggregation walks the trials in index order.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{epa_profile, sncpc_solve, BaselineKind, DEFAULT_SNCPC_MAX_ITER};
use crate::epistemic::{run_epistemic_game, EpistemicError, EpistemicPolicy, TraceDetail};
use crate::game::{
    db_to_linear, iterate_best_responses, meets_threshold, sinr_at, GameError, NetworkState, NodeConfig, NodeId,
    PowerGrid,
};
use crate::stats::RayleighPrior;

/// z-score of a two-sided 95% normal interval.
pub const Z95: f64 = 1.96;
/// Share of non-converged trials above which metrics carry a warning.
pub const WARNING_BUDGET: f64 = 0.01;
pub const DEFAULT_TRIALS: usize = 10_000;
pub const DEFAULT_MAX_STAGES: usize = 200;
pub const DEFAULT_NASH_ROUNDS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Epistemic(#[from] EpistemicError),
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

/// Which solver allocates powers in each trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    Epistemic(EpistemicPolicy),
    Baseline(BaselineKind),
    Nash,
}

/// Column label for the policy sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyLabel {
    Moment(usize),
    Epa,
    Sncpc,
    Nash,
}

impl PolicyLabel {
    pub const FIGURE_SET: [PolicyLabel; 6] = [
        PolicyLabel::Moment(1),
        PolicyLabel::Moment(2),
        PolicyLabel::Moment(3),
        PolicyLabel::Moment(4),
        PolicyLabel::Epa,
        PolicyLabel::Sncpc,
    ];

    /// Solver for this label, inheriting tunables from `base` where they
    /// apply (truncation, prior, seed action, EPA level, S-NCPC budget).
    pub fn solver(&self, base: &ScenarioSpec) -> Result<SolverKind, SimError> {
        let template = match base.solver {
            SolverKind::Epistemic(p) => p,
            _ => EpistemicPolicy::new(1)?.with_prior(base.prior),
        };
        Ok(match self {
            PolicyLabel::Moment(k) => SolverKind::Epistemic(
                EpistemicPolicy {
                    moment_order: *k,
                    ..template
                }
                .with_prior(base.prior),
            ),
            PolicyLabel::Epa => SolverKind::Baseline(BaselineKind::Epa {
                level: base.epa_level.unwrap_or(base.grid.p_max()),
            }),
            PolicyLabel::Sncpc => SolverKind::Baseline(BaselineKind::Sncpc {
                max_iter: base.sncpc_max_iter,
            }),
            PolicyLabel::Nash => SolverKind::Nash,
        })
    }
}

impl fmt::Display for PolicyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyLabel::Moment(k) => write!(f, "M{k}"),
            PolicyLabel::Epa => f.write_str("EPA"),
            PolicyLabel::Sncpc => f.write_str("SNCPC"),
            PolicyLabel::Nash => f.write_str("NASH"),
        }
    }
}

impl FromStr for PolicyLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        match up.as_str() {
            "EPA" => Ok(PolicyLabel::Epa),
            "SNCPC" | "S-NCPC" => Ok(PolicyLabel::Sncpc),
            "NASH" => Ok(PolicyLabel::Nash),
            _ => match up.strip_prefix('M').and_then(|k| k.parse::<usize>().ok()) {
                Some(k) if (1..=4).contains(&k) => Ok(PolicyLabel::Moment(k)),
                _ => Err(format!("unknown policy '{s}' (expected M1..M4, EPA, SNCPC, NASH)")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Thresholds {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl Thresholds {
    fn get(&self, i: usize) -> f64 {
        match self {
            Thresholds::Uniform(t) => *t,
            Thresholds::PerNode(v) => v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub n_nodes: usize,
    pub prior: RayleighPrior,
    /// Linear receiver noise power.
    pub noise_power: f64,
    pub grid: PowerGrid,
    /// Linear SINR thresholds.
    pub thresholds: Thresholds,
    /// Share of the population transmitting as interferers, in `[0, 1]`.
    pub interference_fraction: f64,
    pub solver: SolverKind,
    pub trials: usize,
    pub seed: u64,
    /// Fixes the desired node's gain magnitude; metrics then describe that
    /// node alone. With `None` all active nodes are random and metrics
    /// average over them.
    pub desired_gain: Option<f64>,
    pub max_stages: usize,
    pub nash_max_rounds: usize,
    pub epa_level: Option<f64>,
    pub sncpc_max_iter: usize,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
}

impl ScenarioSpec {
    /// N = 100, sigma = 1, noise -120 dB, threshold -20 dB, all nodes
    /// interfering, policy M1, 10 000 trials.
    pub fn reference() -> Self {
        Self {
            n_nodes: 100,
            prior: RayleighPrior::new(1.0).expect("unit scale"),
            noise_power: db_to_linear(-120.0),
            grid: PowerGrid::normalized_default(),
            thresholds: Thresholds::Uniform(db_to_linear(-20.0)),
            interference_fraction: 1.0,
            solver: SolverKind::Epistemic(EpistemicPolicy::new(1).expect("order 1")),
            trials: DEFAULT_TRIALS,
            seed: 0,
            desired_gain: None,
            max_stages: DEFAULT_MAX_STAGES,
            nash_max_rounds: DEFAULT_NASH_ROUNDS,
            epa_level: None,
            sncpc_max_iter: DEFAULT_SNCPC_MAX_ITER,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidSpec(m.to_string()));
        if self.n_nodes == 0 {
            return bad("n_nodes must be at least 1");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.interference_fraction) {
            return bad("interference fraction must lie in [0, 1]");
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return bad("noise power must be positive");
        }
        if let Some(g) = self.desired_gain {
            if !(g.is_finite() && g >= 0.0) {
                return bad("desired gain must be nonnegative");
            }
        }
        match &self.thresholds {
            Thresholds::Uniform(t) if !(t.is_finite() && *t > 0.0) => return bad("threshold must be positive"),
            Thresholds::PerNode(v) if v.len() != self.n_nodes => return bad("need one threshold per node"),
            Thresholds::PerNode(v) if v.iter().any(|t| !(t.is_finite() && *t > 0.0)) => {
                return bad("thresholds must be positive")
            }
            _ => {}
        }
        if let SolverKind::Baseline(BaselineKind::Epa { level }) = self.solver {
            if !self.grid.contains(level) {
                return Err(GameError::OffGrid(level).into());
            }
        }
        if self.max_stages == 0 || self.nash_max_rounds == 0 || self.sncpc_max_iter == 0 {
            return bad("iteration budgets must be at least 1");
        }
        Ok(())
    }

    /// Number of active interferers besides the desired node:
    /// `ceil(fraction * N)`, at most `N - 1`.
    pub fn interferer_count(&self) -> usize {
        let k = (self.interference_fraction * self.n_nodes as f64 - 1e-9)
            .ceil()
            .max(0.0) as usize;
        k.min(self.n_nodes - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMetrics {
    pub coverage: f64,
    pub outage: f64,
    /// Mean transmit power normalised by `p_max`.
    pub avg_power: f64,
    /// 95% half-width of the coverage (and outage) estimate.
    pub ci_halfwidth: f64,
    /// 95% half-width of `avg_power`.
    pub power_ci_halfwidth: f64,
    pub trials_run: usize,
    pub nonconverged: usize,
    pub warning: Option<String>,
}

/// Everything observed in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// Gain magnitudes of the whole population.
    pub gains: Vec<f64>,
    /// Ids of the transmitting nodes; the desired node 0 comes first.
    pub active: Vec<NodeId>,
    /// Chosen power per active node.
    pub powers: Vec<f64>,
    /// Realised SINR per active node.
    pub sinrs: Vec<f64>,
    pub covered: Vec<bool>,
    pub converged: bool,
    /// Coverage share contributed by this trial.
    pub coverage: f64,
    /// Normalised power contributed by this trial.
    pub power: f64,
}

/// The per-trial generator: master seed selects the key, trial the stream.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Draws the population's gains for `trial`. The whole population is always
/// drawn so the stream layout does not depend on the interference fraction.
pub fn draw_gains(spec: &ScenarioSpec, trial: usize) -> Vec<f64> {
    let mut rng = trial_rng(spec.seed, trial);
    let mut gains: Vec<f64> = (0..spec.n_nodes)
        .map(|_| spec.prior.sample_magnitude(&mut rng))
        .collect();
    if let Some(g) = spec.desired_gain {
        gains[0] = g;
    }
    gains
}

/// Chosen powers (in active order) and convergence flag.
pub fn allocate(spec: &ScenarioSpec, network: &NetworkState) -> Result<(Vec<f64>, bool), SimError> {
    let grid = &spec.grid;
    match spec.solver {
        SolverKind::Epistemic(policy) => {
            let policy = policy.with_detail(TraceDetail::Summary);
            let trace = run_epistemic_game(network, grid, &policy, spec.max_stages)?;
            Ok((trace.final_profile.ordered(network)?, trace.converged))
        }
        SolverKind::Baseline(BaselineKind::Epa { level }) => {
            Ok((epa_profile(network, grid, level)?.ordered(network)?, true))
        }
        SolverKind::Baseline(BaselineKind::Sncpc { max_iter }) => {
            let out = sncpc_solve(network, grid, &spec.prior, max_iter)?;
            Ok((out.profile.ordered(network)?, out.converged))
        }
        SolverKind::Nash => {
            let out = iterate_best_responses(
                &network.gains_sq(),
                &network.thresholds(),
                network.noise_power(),
                grid,
                vec![0; network.len()],
                spec.nash_max_rounds,
            )?;
            Ok((out.indices.iter().map(|&i| grid.level(i)).collect(), out.converged))
        }
    }
}

pub fn run_trial(spec: &ScenarioSpec, trial: usize) -> Result<TrialOutcome, SimError> {
    let gains = draw_gains(spec, trial);
    let k = spec.interferer_count();
    let active: Vec<NodeId> = (0..=k as NodeId).collect();
    let nodes = active
        .iter()
        .map(|&id| NodeConfig::new(id, gains[id as usize], spec.thresholds.get(id as usize)))
        .collect::<Result<Vec<_>, _>>()?;
    let network = NetworkState::new(nodes, spec.noise_power)?;
    let (powers, converged) = allocate(spec, &network)?;
    let gains_sq = network.gains_sq();
    let thresholds = network.thresholds();
    let sinrs: Vec<f64> = (0..powers.len())
        .map(|i| sinr_at(&gains_sq, &powers, i, spec.noise_power))
        .collect();
    let covered: Vec<bool> = sinrs
        .iter()
        .zip(&thresholds)
        .map(|(s, t)| meets_threshold(*s, *t))
        .collect();
    let p_max = spec.grid.p_max();
    let (coverage, power) = if spec.desired_gain.is_some() {
        (covered[0] as u8 as f64, powers[0] / p_max)
    } else {
        let n = powers.len() as f64;
        (
            covered.iter().filter(|c| **c).count() as f64 / n,
            powers.iter().sum::<f64>() / p_max / n,
        )
    };
    Ok(TrialOutcome {
        gains,
        active,
        powers,
        sinrs,
        covered,
        converged,
        coverage,
        power,
    })
}

/// Mean and 95% normal-approximation half-width.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Z95 * (var / n).sqrt())
}

/// Aggregates per-trial outcomes in trial order.
pub fn aggregate(outcomes: &[(f64, f64, bool)]) -> ScenarioMetrics {
    let cov: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let pow: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    let (coverage, ci_halfwidth) = mean_ci(&cov);
    let (avg_power, power_ci_halfwidth) = mean_ci(&pow);
    let nonconverged = outcomes.iter().filter(|o| !o.2).count();
    let trials_run = outcomes.len();
    let warning = (nonconverged as f64 > WARNING_BUDGET * trials_run as f64)
        .then(|| format!("{nonconverged} of {trials_run} trials did not converge"));
    ScenarioMetrics {
        coverage,
        outage: 1.0 - coverage,
        avg_power,
        ci_halfwidth,
        power_ci_halfwidth,
        trials_run,
        nonconverged,
        warning,
    }
}

pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioMetrics, SimError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    let outcomes: Vec<(f64, f64, bool)> = pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, t).map(|o| (o.coverage, o.power, o.converged)))
            .collect::<Result<Vec<_>, SimError>>()
    })?;
    Ok(aggregate(&outcomes))
}

/// One cell of a gain/threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub gain: f64,
    pub threshold_db: f64,
    pub metrics: ScenarioMetrics,
}

/// One cell of an interference/policy sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    pub interference_pct: f64,
    pub policy: PolicyLabel,
    pub metrics: ScenarioMetrics,
}

fn sweep_gains(base: &ScenarioSpec, gains: &[f64], thresholds_db: &[f64]) -> Result<Vec<GainRow>, SimError> {
    if gains.is_empty() || thresholds_db.is_empty() {
        return Err(SimError::InvalidSpec("sweep lists must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(gains.len() * thresholds_db.len());
    for &threshold_db in thresholds_db {
        for &gain in gains {
            let spec = ScenarioSpec {
                desired_gain: Some(gain),
                thresholds: Thresholds::Uniform(db_to_linear(threshold_db)),
                ..base.clone()
            };
            rows.push(GainRow {
                gain,
                threshold_db,
                metrics: run_scenario(&spec)?,
            });
        }
    }
    Ok(rows)
}

fn sweep_policies(
    base: &ScenarioSpec,
    fractions_pct: &[f64],
    policies: &[PolicyLabel],
) -> Result<Vec<PolicyRow>, SimError> {
    if fractions_pct.is_empty() || policies.is_empty() {
        return Err(SimError::InvalidSpec("sweep lists must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(fractions_pct.len() * policies.len());
    for &policy in policies {
        let solver = policy.solver(base)?;
        for &pct in fractions_pct {
            let spec = ScenarioSpec {
                desired_gain: None,
                interference_fraction: pct / 100.0,
                solver,
                ..base.clone()
            };
            rows.push(PolicyRow {
                interference_pct: pct,
                policy,
                metrics: run_scenario(&spec)?,
            });
        }
    }
    Ok(rows)
}

/// Desired-node transmit power over conditioned gains and thresholds.
pub fn sweep_fig3(base: &ScenarioSpec, gains: &[f64], thresholds_db: &[f64]) -> Result<Vec<GainRow>, SimError> {
    sweep_gains(base, gains, thresholds_db)
}

/// Desired-node coverage over conditioned gains and thresholds.
pub fn sweep_fig4(base: &ScenarioSpec, gains: &[f64], thresholds_db: &[f64]) -> Result<Vec<GainRow>, SimError> {
    sweep_gains(base, gains, thresholds_db)
}

/// Network outage over interference fraction and policy.
pub fn sweep_fig5(
    base: &ScenarioSpec,
    fractions_pct: &[f64],
    policies: &[PolicyLabel],
) -> Result<Vec<PolicyRow>, SimError> {
    sweep_policies(base, fractions_pct, policies)
}

/// Network average power over interference fraction and policy.
pub fn sweep_fig6(
    base: &ScenarioSpec,
    fractions_pct: &[f64],
    policies: &[PolicyLabel],
) -> Result<Vec<PolicyRow>, SimError> {
    sweep_policies(base, fractions_pct, policies)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioSpec {
        ScenarioSpec {
            n_nodes: 6,
            trials: 40,
            seed: 7,
            grid: PowerGrid::linear(101, 1.0).unwrap(),
            ..ScenarioSpec::reference()
        }
    }

    #[test]
    fn interferer_count_rounds_up_and_caps() {
        let mut s = small();
        s.n_nodes = 100;
        s.interference_fraction = 0.5;
        assert_eq!(s.interferer_count(), 50);
        s.interference_fraction = 0.101;
        assert_eq!(s.interferer_count(), 11);
        s.interference_fraction = 1.0;
        assert_eq!(s.interferer_count(), 99);
        s.interference_fraction = 0.0;
        assert_eq!(s.interferer_count(), 0);
    }

    #[test]
    fn single_deterministic_node() {
        let spec = ScenarioSpec {
            n_nodes: 1,
            noise_power: 1.0,
            thresholds: Thresholds::Uniform(1.0),
            desired_gain: Some(1.0),
            grid: PowerGrid::linear(1001, 1.0).unwrap(),
            trials: 5,
            ..small()
        };
        let m = run_scenario(&spec).unwrap();
        assert_eq!(m.coverage, 1.0);
        assert_eq!(m.avg_power, 1.0);
        assert_eq!(m.outage, 0.0);
        assert_eq!(m.ci_halfwidth, 0.0);
    }

    #[test]
    fn tiny_threshold_gives_full_coverage() {
        let spec = ScenarioSpec {
            thresholds: Thresholds::Uniform(1e-9),
            ..small()
        };
        for label in PolicyLabel::FIGURE_SET {
            let s = ScenarioSpec {
                solver: label.solver(&spec).unwrap(),
                ..spec.clone()
            };
            assert_eq!(run_scenario(&s).unwrap().coverage, 1.0, "{label}");
        }
    }

    #[test]
    fn labels_round_trip() {
        for l in PolicyLabel::FIGURE_SET.iter().chain([PolicyLabel::Nash].iter()) {
            assert_eq!(l.to_string().parse::<PolicyLabel>().unwrap(), *l);
        }
        assert!("M5".parse::<PolicyLabel>().is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = small();
        s.trials = 0;
        assert!(s.validate().is_err());
        let mut s = small();
        s.interference_fraction = 1.5;
        assert!(s.validate().is_err());
        let mut s = small();
        s.solver = SolverKind::Baseline(BaselineKind::Epa { level: 0.123 });
        assert!(s.validate().is_err());
    }

    #[test]
    fn mean_ci_normal_approximation() {
        let (m, h) = mean_ci(&[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(m, 0.5);
        let sd = (1.0f64 / 3.0).sqrt();
        assert!((h - 1.96 * sd / 2.0).abs() < 1e-15);
    }
}
