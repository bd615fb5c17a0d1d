//! Inter- and intra-epistemic belief updates.
//!
//! Each node knows its own gain, the Rayleigh prior, the network-wide SINR
//! thresholds and (after each exchange) the powers the others actually
//! transmitted. It never sees another node's gain. One pass of the game has
//! every node
//!
//! 1. reset its beliefs about the others to the last observed powers,
//! 2. sweep the opponents in ascending id, replacing each belief with the
//!    power that opponent would need if it reasoned with the prior in place
//!    of its unknown gain and with node `i`'s own signal as extra
//!    interference (`eta = |g_i|^2 p_i + noise`),
//! 3. re-optimise its own power against those beliefs using its known gain
//!    (`eta = noise`).
//!
//! All nodes move simultaneously at the end of a pass; the game stops when a
//! pass changes no power or the sequence of profiles revisits an earlier one.
//!
//! A hypothesis is a candidate grid power together with its decision
//! statistic `(m_k)^(1/k)`, where `m_k` is the k-th raw SINR moment under the
//! fitted Gamma interference. Evidence is the lowest power whose statistic
//! meets the target threshold.

use std::collections::HashSet;

use thiserror::Error;

use crate::game::{meets_threshold, GameError, NetworkState, NodeId, PowerGrid, PowerProfile};
use crate::stats::{
    GammaInterferenceModel, Interference, MomentVector, RayleighPrior, SeriesStatus, DEFAULT_TRUNCATION,
};

pub const MAX_MOMENT_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpistemicError {
    #[error("moment order must be in 1..={MAX_MOMENT_ORDER}, got {0}")]
    InvalidMomentOrder(usize),
    #[error("max_stages must be at least 1")]
    ZeroStages,
    #[error("seed power {0} is not a grid level")]
    SeedOffGrid(f64),
    #[error("node {0} cannot reason about itself as an opponent")]
    SelfOpponent(NodeId),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// How the hypothesis set over the grid is explored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HypothesisScan {
    /// Evaluate the statistic at every grid level.
    Exhaustive,
    /// Binary search for the threshold crossing. Valid because the
    /// statistic is proportional to the candidate power.
    Bisection,
    /// Solve `c p = threshold` for the crossing and confirm it with
    /// evaluations at the crossing level and the level below.
    #[default]
    Crossing,
}

/// Action every node takes before any belief exists.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SeedAction {
    #[default]
    MaxPower,
    LowestPower,
    Level(f64),
}

/// When a node's new power becomes visible to the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExchangeSchedule {
    /// All nodes act on the previous pass's powers and publish together.
    #[default]
    Simultaneous,
    /// Nodes act in ascending id and publish immediately, so later nodes
    /// in the same pass observe the earlier nodes' new powers.
    Sequential,
}

/// How much of the belief hierarchy a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceDetail {
    /// Counters, final profile and terminal beliefs only.
    #[default]
    Summary,
    /// Every stage with the hypotheses that were actually evaluated.
    Stages,
}

/// Moment-order decision policy `M_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpistemicPolicy {
    pub moment_order: usize,
    pub truncation: usize,
    pub prior: RayleighPrior,
    pub seed: SeedAction,
    pub scan: HypothesisScan,
    pub exchange: ExchangeSchedule,
    pub detail: TraceDetail,
}

impl EpistemicPolicy {
    pub fn new(moment_order: usize) -> Result<Self, EpistemicError> {
        if !(1..=MAX_MOMENT_ORDER).contains(&moment_order) {
            return Err(EpistemicError::InvalidMomentOrder(moment_order));
        }
        Ok(Self {
            moment_order,
            truncation: DEFAULT_TRUNCATION,
            prior: RayleighPrior::new(1.0).expect("unit scale"),
            seed: SeedAction::MaxPower,
            scan: HypothesisScan::Crossing,
            exchange: ExchangeSchedule::Simultaneous,
            detail: TraceDetail::Summary,
        })
    }

    pub fn with_truncation(mut self, truncation: usize) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn with_prior(mut self, prior: RayleighPrior) -> Self {
        self.prior = prior;
        self
    }

    pub fn with_seed(mut self, seed: SeedAction) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_scan(mut self, scan: HypothesisScan) -> Self {
        self.scan = scan;
        self
    }

    pub fn with_exchange(mut self, exchange: ExchangeSchedule) -> Self {
        self.exchange = exchange;
        self
    }

    pub fn with_detail(mut self, detail: TraceDetail) -> Self {
        self.detail = detail;
        self
    }

    fn validate(&self) -> Result<(), EpistemicError> {
        if !(1..=MAX_MOMENT_ORDER).contains(&self.moment_order) {
            return Err(EpistemicError::InvalidMomentOrder(self.moment_order));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefRole {
    Inter,
    Intra,
}

impl BeliefRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            BeliefRole::Inter => "inter",
            BeliefRole::Intra => "intra",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub power: f64,
    pub statistic: f64,
}

/// One belief update: node `observer` deciding a power for `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefStage {
    /// Intra index (pass number, from 0).
    pub l: usize,
    /// Inter index within the pass; 0 for the intra step.
    pub m: usize,
    pub role: BeliefRole,
    pub observer: NodeId,
    pub target: NodeId,
    /// Evaluated hypotheses in ascending power.
    pub hypotheses: Vec<Hypothesis>,
    /// `None` when no hypothesis met the threshold.
    pub evidence: Option<Hypothesis>,
    /// Power carried forward: the evidence, or `p_max` when infeasible.
    pub chosen_power: f64,
    pub infeasible: bool,
    /// The moment series hit its divergence guard.
    pub truncated: bool,
    /// A negative raw moment was clamped to zero.
    pub clamped: bool,
}

impl BeliefStage {
    pub const CSV_HEADER: &'static str = "l,m,role,observer,target,chosen_power,statistic,infeasible,truncated,clamped";

    /// One flat CSV row matching [`Self::CSV_HEADER`].
    pub fn csv_record(&self) -> String {
        let statistic = self.evidence.map(|h| h.statistic).unwrap_or(f64::NAN);
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.l,
            self.m,
            self.role.as_str(),
            self.observer,
            self.target,
            self.chosen_power,
            statistic,
            self.infeasible as u8,
            self.truncated as u8,
            self.clamped as u8
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpistemicTrace {
    pub stages: Vec<BeliefStage>,
    /// Number of single payoff-statistic evaluations.
    pub eu_evaluations: u64,
    pub converged: bool,
    /// Passes executed.
    pub passes: usize,
    pub final_profile: PowerProfile,
    /// Nodes whose final intra step found no feasible power.
    pub infeasible: Vec<NodeId>,
    /// Each node's beliefs about every node's power after its last inter
    /// sweep (own entry is the power it held during that sweep), in network
    /// order.
    pub terminal_beliefs: Vec<Vec<f64>>,
    /// Some stage clamped a negative moment or truncated the series early.
    pub numerical_flags: bool,
}

/// First hypothesis whose statistic meets `threshold`; ties resolve to the
/// lower power because `hypotheses` is sorted by ascending power.
pub fn conditional_belief_select(hypotheses: &[Hypothesis], threshold: f64) -> Option<Hypothesis> {
    hypotheses
        .iter()
        .copied()
        .find(|h| meets_threshold(h.statistic, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyStatistic {
    pub value: f64,
    pub clamped: bool,
}

/// Generalised mean `(m_k)^(1/k)` of the payoff's raw moments.
pub fn policy_statistic(k: usize, raw_moments: &MomentVector) -> PolicyStatistic {
    assert!(k >= 1 && k <= raw_moments.k_max(), "moment order {k} not available");
    statistic_from_moment(k, raw_moments.raw(k))
}

fn statistic_from_moment(k: usize, m_k: f64) -> PolicyStatistic {
    if m_k < 0.0 || m_k.is_nan() {
        return PolicyStatistic {
            value: 0.0,
            clamped: true,
        };
    }
    let value = match k {
        1 => m_k,
        2 => m_k.sqrt(),
        3 => m_k.cbrt(),
        4 => m_k.sqrt().sqrt(),
        _ => m_k.powf(1.0 / k as f64),
    };
    PolicyStatistic { value, clamped: false }
}

/// The part of `m_k` that does not depend on the candidate power:
/// `m_k(p) = p^k * factor`.
#[derive(Debug, Clone, Copy)]
struct MomentFactor {
    k: usize,
    factor: f64,
    truncated: bool,
}

impl MomentFactor {
    fn new(k: usize, numerator_moment: f64, interference: &Interference, truncation: usize) -> Self {
        let inv = interference.inverse_moment(k, truncation);
        Self {
            k,
            factor: numerator_moment * inv.value,
            truncated: !matches!(inv.status, SeriesStatus::Complete),
        }
    }

    fn statistic(&self, p: f64) -> PolicyStatistic {
        statistic_from_moment(self.k, p.powi(self.k as i32) * self.factor)
    }
}

/// Result of scanning one hypothesis set.
struct Resolution {
    index: usize,
    feasible: bool,
    clamped: bool,
    evaluations: u64,
    hypotheses: Vec<Hypothesis>,
}

fn resolve(grid: &PowerGrid, factor: &MomentFactor, threshold: f64, scan: HypothesisScan, keep: bool) -> Resolution {
    let top = grid.len() - 1;
    let mut hypotheses = Vec::new();
    let mut clamped = false;
    let mut evaluations = 0u64;
    let mut eval = |idx: usize| -> f64 {
        let p = grid.level(idx);
        let s = factor.statistic(p);
        evaluations += 1;
        clamped |= s.clamped;
        if keep {
            hypotheses.push(Hypothesis {
                power: p,
                statistic: s.value,
            });
        }
        s.value
    };
    let ok = |v: f64| meets_threshold(v, threshold);
    let (index, feasible) = match scan {
        HypothesisScan::Exhaustive => {
            let mut first = None;
            for idx in 0..=top {
                if ok(eval(idx)) && first.is_none() {
                    first = Some(idx);
                }
            }
            match first {
                Some(i) => (i, true),
                None => (top, false),
            }
        }
        HypothesisScan::Bisection => {
            if !ok(eval(top)) {
                (top, false)
            } else {
                let (mut lo, mut hi) = (0usize, top);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if ok(eval(mid)) {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                (lo, true)
            }
        }
        HypothesisScan::Crossing => {
            let at_top = eval(top);
            if !ok(at_top) {
                (top, false)
            } else {
                let slope = at_top / grid.p_max();
                let mut idx = grid.ceil_index(threshold / slope).unwrap_or(top);
                if idx < top && !ok(eval(idx)) {
                    // rounding put the crossing one level higher
                    while idx < top && !ok(eval(idx + 1)) {
                        idx += 1;
                    }
                    idx += 1;
                } else {
                    while idx > 0 && ok(eval(idx - 1)) {
                        idx -= 1;
                    }
                }
                (idx, true)
            }
        }
    };
    if keep {
        hypotheses.sort_by(|a, b| a.power.total_cmp(&b.power));
        hypotheses.dedup_by(|a, b| a.power == b.power);
    }
    Resolution {
        index,
        feasible,
        clamped,
        evaluations,
        hypotheses,
    }
}

/// Positive-power summary of an interference pool.
#[derive(Debug, Clone, Copy, Default)]
struct PowerSums {
    count: usize,
    s1: f64,
    s2: f64,
}

impl PowerSums {
    fn add(&mut self, p: f64) {
        if p > 0.0 {
            self.count += 1;
            self.s1 += p;
            self.s2 += p * p;
        }
    }

    fn remove(&mut self, p: f64) {
        if p > 0.0 {
            self.count -= 1;
            if self.count == 0 {
                self.s1 = 0.0;
                self.s2 = 0.0;
            } else {
                self.s1 -= p;
                self.s2 -= p * p;
            }
        }
    }

    fn interference(&self, lambda: f64, eta: f64) -> Interference {
        if self.count == 0 || self.s1 <= 0.0 || self.s2 <= 0.0 {
            return Interference::Silent { eta };
        }
        match GammaInterferenceModel::from_power_sums(self.count, self.s1, self.s2, lambda) {
            Ok(m) => Interference::Gamma(m.with_shift(eta)),
            Err(_) => Interference::Silent { eta },
        }
    }
}

/// What a single node is allowed to know.
struct NodeEngine<'a> {
    index: usize,
    id: NodeId,
    gain_sq: f64,
    /// Network-wide thresholds, public protocol constants.
    thresholds: &'a [f64],
    ids: &'a [NodeId],
    noise: f64,
    grid: &'a PowerGrid,
    policy: &'a EpistemicPolicy,
}

struct StepOutcome {
    index: usize,
    feasible: bool,
    truncated: bool,
    clamped: bool,
    evaluations: u64,
    hypotheses: Vec<Hypothesis>,
}

impl NodeEngine<'_> {
    fn inter_step(&self, opponent: usize, beliefs: &[f64], pool: &PowerSums, keep: bool) -> StepOutcome {
        let k = self.policy.moment_order;
        let eta = self.gain_sq * beliefs[self.index] + self.noise;
        let interference = pool.interference(self.policy.prior.lambda(), eta);
        let factor = MomentFactor::new(
            k,
            self.policy.prior.power_gain_moment(k),
            &interference,
            self.policy.truncation,
        );
        self.finish(factor, self.thresholds[opponent], keep)
    }

    fn intra_step(&self, pool: &PowerSums, keep: bool) -> StepOutcome {
        let k = self.policy.moment_order;
        let interference = pool.interference(self.policy.prior.lambda(), self.noise);
        let factor = MomentFactor::new(k, self.gain_sq.powi(k as i32), &interference, self.policy.truncation);
        if self.gain_sq <= 0.0 {
            // Zero gain: the statistic is identically zero, no scan needed.
            return StepOutcome {
                index: self.grid.len() - 1,
                feasible: false,
                truncated: factor.truncated,
                clamped: false,
                evaluations: 0,
                hypotheses: Vec::new(),
            };
        }
        self.finish(factor, self.thresholds[self.index], keep)
    }

    fn finish(&self, factor: MomentFactor, threshold: f64, keep: bool) -> StepOutcome {
        let r = resolve(self.grid, &factor, threshold, self.policy.scan, keep);
        StepOutcome {
            index: r.index,
            feasible: r.feasible,
            truncated: factor.truncated,
            clamped: r.clamped,
            evaluations: r.evaluations,
            hypotheses: r.hypotheses,
        }
    }

    fn stage(&self, l: usize, m: usize, role: BeliefRole, target: usize, out: StepOutcome) -> BeliefStage {
        let chosen_power = self.grid.level(out.index);
        let evidence = out.feasible.then(|| {
            out.hypotheses
                .iter()
                .copied()
                .find(|h| h.power == chosen_power)
                .unwrap_or(Hypothesis {
                    power: chosen_power,
                    statistic: f64::NAN,
                })
        });
        BeliefStage {
            l,
            m,
            role,
            observer: self.id,
            target: self.ids[target],
            hypotheses: out.hypotheses,
            evidence,
            chosen_power,
            infeasible: !out.feasible,
            truncated: out.truncated,
            clamped: out.clamped,
        }
    }

    /// One full pass for this node starting from the observed profile.
    /// Returns the new own grid index and whether it was feasible.
    fn pass(&self, l: usize, observed: &[f64], acc: &mut PassAccumulator) -> (usize, bool, Vec<f64>) {
        let keep = matches!(self.policy.detail, TraceDetail::Stages);
        let mut beliefs = observed.to_vec();
        let mut pool = PowerSums::default();
        for (j, &p) in beliefs.iter().enumerate() {
            if j != self.index {
                pool.add(p);
            }
        }
        let mut m = 0;
        for opp in 0..beliefs.len() {
            if opp == self.index {
                continue;
            }
            m += 1;
            pool.remove(beliefs[opp]);
            let out = self.inter_step(opp, &beliefs, &pool, keep);
            let p = self.grid.level(out.index);
            acc.absorb(&out);
            if keep {
                acc.stages.push(self.stage(l, m, BeliefRole::Inter, opp, out));
            }
            beliefs[opp] = p;
            pool.add(p);
        }
        let out = self.intra_step(&pool, keep);
        let (index, feasible) = (out.index, out.feasible);
        acc.absorb(&out);
        if keep {
            acc.stages.push(self.stage(l, 0, BeliefRole::Intra, self.index, out));
        }
        (index, feasible, beliefs)
    }
}

#[derive(Default)]
struct PassAccumulator {
    evaluations: u64,
    flags: bool,
    stages: Vec<BeliefStage>,
}

impl PassAccumulator {
    fn absorb(&mut self, out: &StepOutcome) {
        self.evaluations += out.evaluations;
        self.flags |= out.truncated || out.clamped;
    }
}

fn seed_index(grid: &PowerGrid, seed: SeedAction) -> Result<usize, EpistemicError> {
    match seed {
        SeedAction::MaxPower => Ok(grid.len() - 1),
        SeedAction::LowestPower => Ok(0),
        SeedAction::Level(p) => grid.position(p).ok_or(EpistemicError::SeedOffGrid(p)),
    }
}

fn engine<'a>(
    network: &NetworkState,
    i: usize,
    thresholds: &'a [f64],
    ids: &'a [NodeId],
    grid: &'a PowerGrid,
    policy: &'a EpistemicPolicy,
) -> NodeEngine<'a> {
    let node = &network.nodes()[i];
    NodeEngine {
        index: i,
        id: node.id,
        gain_sq: node.gain_sq(),
        thresholds,
        ids,
        noise: network.noise_power(),
        grid,
        policy,
    }
}

/// Inter-epistemic update of `observer`'s belief about `opponent`.
///
/// `beliefs` holds the observer's current belief about every node's power
/// (its own entry is its committed power `p_i^l`). The opponent's own entry
/// is ignored; the remaining third parties form the Gamma-fitted pool.
pub fn inter_update(
    network: &NetworkState,
    observer: NodeId,
    opponent: NodeId,
    beliefs: &PowerProfile,
    grid: &PowerGrid,
    policy: &EpistemicPolicy,
) -> Result<(BeliefStage, u64), EpistemicError> {
    policy.validate()?;
    if observer == opponent {
        return Err(EpistemicError::SelfOpponent(observer));
    }
    let i = network.position(observer)?;
    let j = network.position(opponent)?;
    let b = beliefs.ordered(network)?;
    let thresholds = network.thresholds();
    let ids: Vec<NodeId> = network.nodes().iter().map(|n| n.id).collect();
    let eng = engine(network, i, &thresholds, &ids, grid, policy);
    let mut pool = PowerSums::default();
    for (idx, &p) in b.iter().enumerate() {
        if idx != i && idx != j {
            pool.add(p);
        }
    }
    let out = eng.inter_step(j, &b, &pool, true);
    let evals = out.evaluations;
    let m = if j < i { j + 1 } else { j };
    Ok((eng.stage(0, m, BeliefRole::Inter, j, out), evals))
}

/// Intra-epistemic self-update of `observer` against its beliefs about the
/// other nodes (its own entry in `beliefs` is ignored).
pub fn intra_update(
    network: &NetworkState,
    observer: NodeId,
    beliefs: &PowerProfile,
    grid: &PowerGrid,
    policy: &EpistemicPolicy,
) -> Result<(BeliefStage, u64), EpistemicError> {
    policy.validate()?;
    let i = network.position(observer)?;
    let b = beliefs.ordered(network)?;
    let thresholds = network.thresholds();
    let ids: Vec<NodeId> = network.nodes().iter().map(|n| n.id).collect();
    let eng = engine(network, i, &thresholds, &ids, grid, policy);
    let mut pool = PowerSums::default();
    for (idx, &p) in b.iter().enumerate() {
        if idx != i {
            pool.add(p);
        }
    }
    let out = eng.intra_step(&pool, true);
    let evals = out.evaluations;
    Ok((eng.stage(0, 0, BeliefRole::Intra, i, out), evals))
}

/// Runs the coupled inter/intra iteration until a pass changes no power,
/// a profile repeats (cycle), or `max_stages` passes have run.
pub fn run_epistemic_game(
    network: &NetworkState,
    grid: &PowerGrid,
    policy: &EpistemicPolicy,
    max_stages: usize,
) -> Result<EpistemicTrace, EpistemicError> {
    policy.validate()?;
    if max_stages == 0 {
        return Err(EpistemicError::ZeroStages);
    }
    let n = network.len();
    let thresholds = network.thresholds();
    let ids: Vec<NodeId> = network.nodes().iter().map(|x| x.id).collect();
    let engines: Vec<NodeEngine<'_>> = (0..n)
        .map(|i| engine(network, i, &thresholds, &ids, grid, policy))
        .collect();

    let seed = seed_index(grid, policy.seed)?;
    let mut current = vec![seed; n];
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(current.clone());
    let mut acc = PassAccumulator::default();
    let mut feasible = vec![false; n];
    let mut terminal_beliefs = vec![Vec::new(); n];
    let mut converged = false;
    let mut passes = 0;

    for l in 0..max_stages {
        passes = l + 1;
        // Stage exchange: everyone observes the powers transmitted last pass.
        let mut observed: Vec<f64> = current.iter().map(|&i| grid.level(i)).collect();
        let mut next = current.clone();
        for eng in &engines {
            let (idx, ok, beliefs) = eng.pass(l, &observed, &mut acc);
            if policy.exchange == ExchangeSchedule::Sequential {
                observed[eng.index] = grid.level(idx);
            }
            next[eng.index] = idx;
            feasible[eng.index] = ok;
            terminal_beliefs[eng.index] = beliefs;
        }
        if next == current {
            converged = true;
            break;
        }
        current = next;
        if !seen.insert(current.clone()) {
            break;
        }
    }

    let powers: Vec<f64> = current.iter().map(|&i| grid.level(i)).collect();
    Ok(EpistemicTrace {
        stages: acc.stages,
        eu_evaluations: acc.evaluations,
        converged,
        passes,
        final_profile: PowerProfile::from_ordered(network, &powers),
        infeasible: ids
            .iter()
            .zip(&feasible)
            .filter(|(_, ok)| !**ok)
            .map(|(id, _)| *id)
            .collect(),
        terminal_beliefs,
        numerical_flags: acc.flags,
    })
}

/// Upper bound `N^2 S^(2N)` on statistic evaluations for one allocation
/// realisation, saturating at `u64::MAX`.
pub fn evaluation_bound(n: usize, s: usize) -> u64 {
    let mut bound = (n as u64).saturating_mul(n as u64);
    for _ in 0..2 * n {
        bound = bound.saturating_mul(s as u64);
    }
    bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::raw_to_central;
    use approx::assert_relative_eq;

    fn grid() -> PowerGrid {
        PowerGrid::linear(1001, 1.0).unwrap()
    }

    #[test]
    fn select_first_meeting_threshold() {
        let h: Vec<Hypothesis> = [0.1, 0.5, 0.9]
            .iter()
            .enumerate()
            .map(|(i, &s)| Hypothesis {
                power: i as f64,
                statistic: s,
            })
            .collect();
        assert_eq!(conditional_belief_select(&h, 0.5), Some(h[1]));
        assert_eq!(conditional_belief_select(&h, 0.95), None);
        let tie = [
            Hypothesis {
                power: 0.2,
                statistic: 0.7,
            },
            Hypothesis {
                power: 0.3,
                statistic: 0.7,
            },
        ];
        assert_eq!(conditional_belief_select(&tie, 0.7).unwrap().power, 0.2);
    }

    #[test]
    fn statistic_of_exponential_payoff() {
        let mv = raw_to_central(&[1.0, 2.0, 6.0, 24.0]).unwrap();
        let s: Vec<f64> = (1..=4).map(|k| policy_statistic(k, &mv).value).collect();
        assert_eq!(s[0], 1.0);
        assert_relative_eq!(s[1], 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(s[3], 24f64.powf(0.25), max_relative = 1e-15);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        let det = MomentVector::deterministic(0.3, 4);
        for k in 1..=4 {
            assert_relative_eq!(policy_statistic(k, &det).value, 0.3, max_relative = 1e-14);
        }
    }

    #[test]
    fn negative_moment_is_clamped() {
        let mv = raw_to_central(&[1.0, 2.0, -0.5]).unwrap();
        assert_eq!(
            policy_statistic(3, &mv),
            PolicyStatistic {
                value: 0.0,
                clamped: true
            }
        );
    }

    #[test]
    fn two_node_inter_update_closed_form() {
        let net = NetworkState::from_gains(&[0.8, 0.5], &[0.01, 0.01], 1e-3).unwrap();
        let beliefs = PowerProfile::from_ordered(&net, &[0.4, 1.0]);
        let g = grid();
        let lambda = 0.5;
        let eta = 0.64 * 0.4 + 1e-3;
        let p1 = EpistemicPolicy::new(1).unwrap();
        let (s1, _) = inter_update(&net, 0, 1, &beliefs, &g, &p1).unwrap();
        let want = g.levels()[g.ceil_index(0.01 * lambda * eta * (1.0 - 1e-9)).unwrap()];
        assert_eq!(s1.chosen_power, want);
        let p2 = EpistemicPolicy::new(2).unwrap();
        let (s2, _) = inter_update(&net, 0, 1, &beliefs, &g, &p2).unwrap();
        let want2 = g.levels()[g.ceil_index(0.01 * lambda * eta / 2f64.sqrt() * (1.0 - 1e-9)).unwrap()];
        assert_eq!(s2.chosen_power, want2);
        assert!(s2.chosen_power < s1.chosen_power);
    }

    #[test]
    fn unreachable_opponent_threshold_is_flagged() {
        let net = NetworkState::from_gains(&[1.0, 1.0], &[1e6, 1e6], 1.0).unwrap();
        let beliefs = PowerProfile::uniform(&net, 1.0);
        let (s, _) = inter_update(&net, 0, 1, &beliefs, &grid(), &EpistemicPolicy::new(1).unwrap()).unwrap();
        assert!(s.infeasible);
        assert_eq!(s.evidence, None);
        assert_eq!(s.chosen_power, 1.0);
    }

    #[test]
    fn intra_with_silent_opponents_is_deterministic_feasibility() {
        let net = NetworkState::from_gains(&[0.5, 0.7, 0.9], &[0.2; 3], 0.01).unwrap();
        let beliefs = PowerProfile::from_ordered(&net, &[0.3, 0.0, 0.0]);
        let (s, _) = intra_update(&net, 0, &beliefs, &grid(), &EpistemicPolicy::new(3).unwrap()).unwrap();
        // 0.2 * 0.01 / 0.25 = 0.008
        assert_relative_eq!(s.chosen_power, 0.008, max_relative = 1e-12);
        assert!(!s.infeasible);
    }

    #[test]
    fn zero_gain_is_always_infeasible() {
        let net = NetworkState::from_gains(&[0.0, 0.7], &[0.01; 2], 0.01).unwrap();
        let beliefs = PowerProfile::uniform(&net, 0.5);
        let (s, _) = intra_update(&net, 0, &beliefs, &grid(), &EpistemicPolicy::new(1).unwrap()).unwrap();
        assert!(s.infeasible);
    }

    #[test]
    fn single_node_converges_to_feasibility_power() {
        let net = NetworkState::from_gains(&[1.0], &[1.0], 0.25).unwrap();
        let trace = run_epistemic_game(&net, &grid(), &EpistemicPolicy::new(1).unwrap(), 10).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.final_profile.get(0), Some(0.25));
        assert!(trace.infeasible.is_empty());
    }

    #[test]
    fn scan_modes_agree() {
        let net = NetworkState::from_gains(&[0.9, 1.3, 0.4], &[0.05, 0.05, 0.05], 1e-3).unwrap();
        let g = PowerGrid::linear(201, 1.0).unwrap();
        for k in 1..=4 {
            let base = EpistemicPolicy::new(k).unwrap();
            let a = run_epistemic_game(&net, &g, &base.with_scan(HypothesisScan::Exhaustive), 50).unwrap();
            for scan in [HypothesisScan::Bisection, HypothesisScan::Crossing] {
                let b = run_epistemic_game(&net, &g, &base.with_scan(scan), 50).unwrap();
                assert_eq!(a.final_profile, b.final_profile);
                assert_eq!(a.converged, b.converged);
                assert!(b.eu_evaluations < a.eu_evaluations);
            }
        }
    }

    #[test]
    fn stage_records_are_flat() {
        let net = NetworkState::from_gains(&[0.9, 1.3], &[0.05, 0.05], 1e-3).unwrap();
        let pol = EpistemicPolicy::new(1).unwrap().with_detail(TraceDetail::Stages);
        let t = run_epistemic_game(&net, &PowerGrid::linear(11, 1.0).unwrap(), &pol, 20).unwrap();
        assert!(!t.stages.is_empty());
        let cols = BeliefStage::CSV_HEADER.split(',').count();
        for s in &t.stages {
            assert_eq!(s.csv_record().split(',').count(), cols);
        }
        assert_eq!(t.stages[0].role, BeliefRole::Inter);
        assert_eq!(t.stages[1].role, BeliefRole::Intra);
    }

    #[test]
    fn invalid_policy_rejected() {
        assert_eq!(EpistemicPolicy::new(0), Err(EpistemicError::InvalidMomentOrder(0)));
        assert_eq!(EpistemicPolicy::new(5), Err(EpistemicError::InvalidMomentOrder(5)));
        let net = NetworkState::from_gains(&[1.0], &[1.0], 1.0).unwrap();
        let p = EpistemicPolicy::new(1).unwrap();
        assert_eq!(
            run_epistemic_game(&net, &grid(), &p, 0),
            Err(EpistemicError::ZeroStages)
        );
        let off = p.with_seed(SeedAction::Level(0.12345));
        assert!(matches!(
            run_epistemic_game(&net, &grid(), &off, 5),
            Err(EpistemicError::SeedOffGrid(_))
        ));
    }

    #[test]
    fn bound_saturates() {
        assert_eq!(evaluation_bound(3, 5), 9 * 5u64.pow(6));
        assert_eq!(evaluation_bound(100, 1001), u64::MAX);
    }
}
