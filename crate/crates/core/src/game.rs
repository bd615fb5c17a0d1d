//! Players, power grids and the full-CSI power-minimisation game.
//!
//! Node `i` receives SINR `|g_i|^2 p_i / (sum_{j != i} |g_j|^2 p_j + noise)`
//! and wants the least grid power that meets its SINR threshold. With full
//! CSI every node can compute that best response exactly; iterating it from
//! the lowest grid level climbs to the minimal fixed point.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub type NodeId = u32;

/// Relative slack when comparing a statistic against its threshold, so that
/// a power computed to sit exactly on the threshold is not lost to rounding.
pub const THRESHOLD_RTOL: f64 = 1e-12;

/// `value >= threshold`, up to [`THRESHOLD_RTOL`].
#[inline]
pub fn meets_threshold(value: f64, threshold: f64) -> bool {
    value >= threshold * (1.0 - THRESHOLD_RTOL)
}

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("network needs at least one node")]
    EmptyNetwork,
    #[error("noise power must be finite and positive, got {0}")]
    InvalidNoise(f64),
    #[error("bandwidth must be finite and positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("node {id}: gain must be finite and nonnegative, got {gain}")]
    InvalidGain { id: NodeId, gain: f64 },
    #[error("node {id}: SINR threshold must be finite and positive, got {value}")]
    InvalidThreshold { id: NodeId, value: f64 },
    #[error("power grid is empty")]
    EmptyGrid,
    #[error("power grid levels must be finite, nonnegative and strictly increasing")]
    InvalidGrid,
    #[error("power {0} is not a grid level")]
    OffGrid(f64),
    #[error("profile has no power for node {0}")]
    IncompleteProfile(NodeId),
    #[error("max_rounds must be at least 1")]
    ZeroRounds,
    #[error("best-response iteration did not converge in {rounds} rounds")]
    NoConvergence { rounds: usize, trace: Vec<Vec<f64>> },
    #[error("node {id} can profitably deviate from {from} to {to}")]
    NotEquilibrium { id: NodeId, from: f64, to: f64 },
}

/// A player: its channel magnitude and QoS target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeConfig {
    pub id: NodeId,
    /// `|g_i|`.
    pub gain: f64,
    /// `gamma_i^th`, linear.
    pub sinr_threshold: f64,
    /// `C_i^th = log2(1 + gamma_i^th)` in bits/s/Hz.
    pub throughput_threshold: f64,
}

impl NodeConfig {
    pub fn new(id: NodeId, gain: f64, sinr_threshold: f64) -> Result<Self, GameError> {
        if !(gain.is_finite() && gain >= 0.0) {
            return Err(GameError::InvalidGain { id, gain });
        }
        if !(sinr_threshold.is_finite() && sinr_threshold > 0.0) {
            return Err(GameError::InvalidThreshold {
                id,
                value: sinr_threshold,
            });
        }
        Ok(Self {
            id,
            gain,
            sinr_threshold,
            throughput_threshold: (1.0 + sinr_threshold).log2(),
        })
    }

    pub fn gain_sq(&self) -> f64 {
        self.gain * self.gain
    }
}

/// Finite ordered strategy set shared by all players.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    levels: Vec<f64>,
}

impl PowerGrid {
    pub fn from_levels(levels: Vec<f64>) -> Result<Self, GameError> {
        if levels.is_empty() {
            return Err(GameError::EmptyGrid);
        }
        let ok = levels.iter().all(|l| l.is_finite() && *l >= 0.0)
            && levels.windows(2).all(|w| w[0] < w[1])
            && *levels.last().unwrap() > 0.0;
        if !ok {
            return Err(GameError::InvalidGrid);
        }
        Ok(Self { levels })
    }

    /// `count` evenly spaced levels from 0 to `p_max` inclusive.
    pub fn linear(count: usize, p_max: f64) -> Result<Self, GameError> {
        match count {
            0 => Err(GameError::EmptyGrid),
            1 => Self::from_levels(vec![p_max]),
            _ => {
                let step = p_max / (count - 1) as f64;
                let mut levels: Vec<f64> = (0..count).map(|i| i as f64 * step).collect();
                levels[count - 1] = p_max;
                Self::from_levels(levels)
            }
        }
    }

    /// The 1001-level normalised grid on `[0, 1]`.
    pub fn normalized_default() -> Self {
        Self::linear(1001, 1.0).expect("static grid")
    }

    /// Inserts the midpoint between every pair of adjacent levels.
    pub fn refined(&self) -> Self {
        let mut levels = Vec::with_capacity(2 * self.levels.len());
        for w in self.levels.windows(2) {
            levels.push(w[0]);
            levels.push(0.5 * (w[0] + w[1]));
        }
        levels.push(self.p_max());
        Self { levels }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn p_max(&self) -> f64 {
        *self.levels.last().expect("grid is non-empty")
    }

    pub fn lowest(&self) -> f64 {
        self.levels[0]
    }

    pub fn level(&self, idx: usize) -> f64 {
        self.levels[idx]
    }

    /// Index of the level equal to `p` (relative tolerance 1e-12).
    pub fn position(&self, p: f64) -> Option<usize> {
        let idx = self.levels.partition_point(|&l| l < p);
        [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter(|&i| i < self.levels.len())
            .find(|&i| (self.levels[i] - p).abs() <= 1e-12 * p.abs().max(1.0))
    }

    pub fn contains(&self, p: f64) -> bool {
        self.position(p).is_some()
    }

    /// First level `>= x`.
    pub fn ceil_index(&self, x: f64) -> Option<usize> {
        let idx = self.levels.partition_point(|&l| l < x);
        (idx < self.levels.len()).then_some(idx)
    }
}

/// The set of players plus the shared receiver noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    nodes: Vec<NodeConfig>,
    noise_power: f64,
    bandwidth: f64,
}

impl NetworkState {
    pub fn new(nodes: Vec<NodeConfig>, noise_power: f64) -> Result<Self, GameError> {
        if nodes.is_empty() {
            return Err(GameError::EmptyNetwork);
        }
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(GameError::InvalidNoise(noise_power));
        }
        let mut seen = std::collections::BTreeSet::new();
        for n in &nodes {
            if !seen.insert(n.id) {
                return Err(GameError::DuplicateNode(n.id));
            }
        }
        Ok(Self {
            nodes,
            noise_power,
            bandwidth: 1.0,
        })
    }

    /// Builds nodes `0..n` from parallel gain and threshold slices.
    pub fn from_gains(gains: &[f64], thresholds: &[f64], noise_power: f64) -> Result<Self, GameError> {
        assert_eq!(gains.len(), thresholds.len(), "one threshold per gain");
        let nodes = gains
            .iter()
            .zip(thresholds)
            .enumerate()
            .map(|(i, (&g, &t))| NodeConfig::new(i as NodeId, g, t))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(nodes, noise_power)
    }

    pub fn with_bandwidth(mut self, bandwidth: f64) -> Result<Self, GameError> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(GameError::InvalidBandwidth(bandwidth));
        }
        self.bandwidth = bandwidth;
        Ok(self)
    }

    pub fn nodes(&self) -> &[NodeConfig] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn position(&self, id: NodeId) -> Result<usize, GameError> {
        self.nodes
            .iter()
            .position(|n| n.id == id)
            .ok_or(GameError::UnknownNode(id))
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeConfig, GameError> {
        self.position(id).map(|i| &self.nodes[i])
    }

    pub fn gains_sq(&self) -> Vec<f64> {
        self.nodes.iter().map(NodeConfig::gain_sq).collect()
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.sinr_threshold).collect()
    }
}

/// Joint action: one grid power per node id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerProfile {
    assignment: BTreeMap<NodeId, f64>,
}

impl PowerProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn uniform(network: &NetworkState, power: f64) -> Self {
        network.nodes.iter().map(|n| (n.id, power)).collect()
    }

    /// Pairs network nodes (in order) with `powers`.
    pub fn from_ordered(network: &NetworkState, powers: &[f64]) -> Self {
        assert_eq!(network.len(), powers.len());
        network.nodes.iter().map(|n| n.id).zip(powers.iter().copied()).collect()
    }

    pub fn set(&mut self, id: NodeId, power: f64) {
        self.assignment.insert(id, power);
    }

    pub fn get(&self, id: NodeId) -> Option<f64> {
        self.assignment.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.assignment.iter().map(|(&id, &p)| (id, p))
    }

    pub fn total_power(&self) -> f64 {
        self.assignment.values().sum()
    }

    /// Powers in network node order.
    pub fn ordered(&self, network: &NetworkState) -> Result<Vec<f64>, GameError> {
        network
            .nodes
            .iter()
            .map(|n| self.get(n.id).ok_or(GameError::IncompleteProfile(n.id)))
            .collect()
    }

    /// Every node has exactly one power, every power is a grid level, and no
    /// foreign ids are present.
    pub fn validate(&self, network: &NetworkState, grid: &PowerGrid) -> Result<(), GameError> {
        for (id, p) in self.iter() {
            network.position(id)?;
            if !grid.contains(p) {
                return Err(GameError::OffGrid(p));
            }
        }
        self.ordered(network).map(|_| ())
    }
}

impl FromIterator<(NodeId, f64)> for PowerProfile {
    fn from_iter<T: IntoIterator<Item = (NodeId, f64)>>(iter: T) -> Self {
        Self {
            assignment: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for PowerProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(id, p)| format!("{id}:{p}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Received interference at position `i`: `sum_{j != i} |g_j|^2 p_j`.
pub(crate) fn interference_at(gains_sq: &[f64], powers: &[f64], i: usize) -> f64 {
    gains_sq
        .iter()
        .zip(powers)
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, (g, p))| g * p)
        .sum()
}

pub(crate) fn sinr_at(gains_sq: &[f64], powers: &[f64], i: usize, noise: f64) -> f64 {
    gains_sq[i] * powers[i] / (interference_at(gains_sq, powers, i) + noise)
}

pub fn sinr(network: &NetworkState, profile: &PowerProfile, id: NodeId) -> Result<f64, GameError> {
    let i = network.position(id)?;
    let powers = profile.ordered(network)?;
    Ok(sinr_at(&network.gains_sq(), &powers, i, network.noise_power))
}

/// `B log2(1 + SINR)`.
pub fn throughput(network: &NetworkState, profile: &PowerProfile, id: NodeId) -> Result<f64, GameError> {
    sinr(network, profile, id).map(|s| network.bandwidth * (1.0 + s).log2())
}

/// A best response; `feasible == false` means the threshold is unreachable
/// even at `p_max` and the node falls back to `p_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    pub power: f64,
    pub feasible: bool,
}

/// Least grid index whose power meets the SINR threshold against the given
/// interference, or the top index with `false`.
pub(crate) fn best_response_index(
    gain_sq: f64,
    threshold: f64,
    interference: f64,
    noise: f64,
    grid: &PowerGrid,
) -> (usize, bool) {
    let top = grid.len() - 1;
    if gain_sq <= 0.0 {
        return (top, false);
    }
    let denom = interference + noise;
    let needed = threshold * denom / gain_sq;
    let Some(mut idx) = grid.ceil_index(needed * (1.0 - 4.0 * THRESHOLD_RTOL)) else {
        return (top, false);
    };
    while idx <= top {
        if meets_threshold(gain_sq * grid.level(idx) / denom, threshold) {
            return (idx, true);
        }
        idx += 1;
    }
    (top, false)
}

/// Minimal grid power meeting node `id`'s threshold against the opponents'
/// powers in `profile`. Higher powers are strictly dominated and never
/// returned.
pub fn best_response_full_csi(
    network: &NetworkState,
    profile: &PowerProfile,
    id: NodeId,
    grid: &PowerGrid,
) -> Result<BestResponse, GameError> {
    let i = network.position(id)?;
    let powers = profile.ordered(network)?;
    let gains_sq = network.gains_sq();
    let node = &network.nodes[i];
    let (idx, feasible) = best_response_index(
        gains_sq[i],
        node.sinr_threshold,
        interference_at(&gains_sq, &powers, i),
        network.noise_power,
        grid,
    );
    Ok(BestResponse {
        power: grid.level(idx),
        feasible,
    })
}

/// Where best-response iteration starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StartProfile {
    #[default]
    Lowest,
    Highest,
    Given(PowerProfile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashSolution {
    pub profile: PowerProfile,
    pub rounds: usize,
    /// Nodes left at `p_max` without meeting their threshold.
    pub infeasible: Vec<NodeId>,
}

/// Round-based best-response iteration (all nodes respond to the profile of
/// the previous round, visited in ascending id) until the profile stops
/// changing, followed by an exhaustive `epsilon`-Nash deviation scan of the
/// result.
pub fn solve_nash_full_csi(
    network: &NetworkState,
    grid: &PowerGrid,
    max_rounds: usize,
    epsilon: f64,
) -> Result<NashSolution, GameError> {
    solve_nash_full_csi_from(network, grid, &StartProfile::Lowest, max_rounds, epsilon)
}

pub fn solve_nash_full_csi_from(
    network: &NetworkState,
    grid: &PowerGrid,
    start: &StartProfile,
    max_rounds: usize,
    epsilon: f64,
) -> Result<NashSolution, GameError> {
    let start_idx: Vec<usize> = match start {
        StartProfile::Lowest => vec![0; network.len()],
        StartProfile::Highest => vec![grid.len() - 1; network.len()],
        StartProfile::Given(p) => {
            p.validate(network, grid)?;
            p.ordered(network)?
                .iter()
                .map(|&x| grid.position(x).expect("validated"))
                .collect()
        }
    };
    let outcome = iterate_best_responses(
        &network.gains_sq(),
        &network.thresholds(),
        network.noise_power,
        grid,
        start_idx,
        max_rounds,
    )?;
    let powers: Vec<f64> = outcome.indices.iter().map(|&i| grid.level(i)).collect();
    let profile = PowerProfile::from_ordered(network, &powers);
    if !outcome.converged {
        return Err(GameError::NoConvergence {
            rounds: outcome.rounds,
            trace: outcome.trace,
        });
    }
    verify_epsilon_nash(network, grid, &profile, epsilon)?;
    let infeasible = network
        .nodes
        .iter()
        .zip(&outcome.feasible)
        .filter(|(_, ok)| !**ok)
        .map(|(n, _)| n.id)
        .collect();
    Ok(NashSolution {
        profile,
        rounds: outcome.rounds,
        infeasible,
    })
}

pub(crate) struct IterationOutcome {
    pub indices: Vec<usize>,
    pub feasible: Vec<bool>,
    pub rounds: usize,
    pub converged: bool,
    pub trace: Vec<Vec<f64>>,
}

const TRACE_DEPTH: usize = 6;

pub(crate) fn iterate_best_responses(
    gains_sq: &[f64],
    thresholds: &[f64],
    noise: f64,
    grid: &PowerGrid,
    start: Vec<usize>,
    max_rounds: usize,
) -> Result<IterationOutcome, GameError> {
    if max_rounds == 0 {
        return Err(GameError::ZeroRounds);
    }
    let n = gains_sq.len();
    let mut current = start;
    let mut feasible = vec![false; n];
    let mut trace: Vec<Vec<f64>> = Vec::new();
    let mut powers: Vec<f64> = current.iter().map(|&i| grid.level(i)).collect();
    for round in 1..=max_rounds {
        let received: f64 = gains_sq.iter().zip(&powers).map(|(g, p)| g * p).sum();
        let mut next = current.clone();
        for i in 0..n {
            let interference = (received - gains_sq[i] * powers[i]).max(0.0);
            let (idx, ok) = best_response_index(gains_sq[i], thresholds[i], interference, noise, grid);
            next[i] = idx;
            feasible[i] = ok;
        }
        if next == current {
            return Ok(IterationOutcome {
                indices: current,
                feasible,
                rounds: round,
                converged: true,
                trace,
            });
        }
        current = next;
        powers = current.iter().map(|&i| grid.level(i)).collect();
        if trace.len() == TRACE_DEPTH {
            trace.remove(0);
        }
        trace.push(powers.clone());
    }
    Ok(IterationOutcome {
        indices: current,
        feasible,
        rounds: max_rounds,
        converged: false,
        trace,
    })
}

/// Exhaustive unilateral-deviation scan. Utility is lexicographic: meeting
/// the threshold first, then lower power; a node that cannot meet it prefers
/// more power (throughput). A deviation counts when it improves feasibility,
/// or keeps it and changes power by more than `epsilon` in the preferred
/// direction.
pub fn verify_epsilon_nash(
    network: &NetworkState,
    grid: &PowerGrid,
    profile: &PowerProfile,
    epsilon: f64,
) -> Result<(), GameError> {
    let powers = profile.ordered(network)?;
    let gains_sq = network.gains_sq();
    let noise = network.noise_power;
    for (i, node) in network.nodes.iter().enumerate() {
        let interference = interference_at(&gains_sq, &powers, i);
        let ok_at = |p: f64| meets_threshold(gains_sq[i] * p / (interference + noise), node.sinr_threshold);
        let cur = powers[i];
        let cur_ok = ok_at(cur);
        for &alt in grid.levels() {
            let alt_ok = ok_at(alt);
            let better = match (cur_ok, alt_ok) {
                (false, true) => true,
                (true, true) => cur - alt > epsilon,
                (false, false) => alt - cur > epsilon,
                (true, false) => false,
            };
            if better {
                return Err(GameError::NotEquilibrium {
                    id: node.id,
                    from: cur,
                    to: alt,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_node_sinr() {
        let net = NetworkState::from_gains(&[1.0], &[1.0], 1.0).unwrap();
        let prof = PowerProfile::uniform(&net, 1.0);
        assert_eq!(sinr(&net, &prof, 0).unwrap(), 1.0);
        assert_eq!(throughput(&net, &prof, 0).unwrap(), 1.0);
        let zero = PowerProfile::uniform(&net, 0.0);
        assert_eq!(sinr(&net, &zero, 0).unwrap(), 0.0);
        assert_eq!(throughput(&net, &zero, 0).unwrap(), 0.0);
        assert_eq!(sinr(&net, &prof, 7), Err(GameError::UnknownNode(7)));
    }

    #[test]
    fn throughput_scales_with_bandwidth() {
        let net = NetworkState::from_gains(&[1.0], &[1.0], 1.0)
            .unwrap()
            .with_bandwidth(2.0)
            .unwrap();
        let prof = PowerProfile::uniform(&net, 3.0);
        assert_eq!(throughput(&net, &prof, 0).unwrap(), 4.0);
    }

    #[test]
    fn two_node_threshold_pair() {
        let net = NetworkState::from_gains(&[0.2, 0.1], &[0.8, 0.4], 1.0).unwrap();
        let p_i = 28.0 / 0.68;
        let p_j = 1.6 * p_i + 40.0;
        let prof = PowerProfile::from_ordered(&net, &[p_i, p_j]);
        assert_relative_eq!(sinr(&net, &prof, 0).unwrap(), 0.8, max_relative = 1e-12);
        assert_relative_eq!(sinr(&net, &prof, 1).unwrap(), 0.4, max_relative = 1e-12);
    }

    #[test]
    fn best_response_without_interference() {
        let net = NetworkState::from_gains(&[1.0], &[0.5], 1.0).unwrap();
        let grid = PowerGrid::from_levels((1..=10).map(|i| i as f64 / 10.0).collect()).unwrap();
        let br = best_response_full_csi(&net, &PowerProfile::uniform(&net, 0.1), 0, &grid).unwrap();
        assert_eq!(
            br,
            BestResponse {
                power: 0.5,
                feasible: true
            }
        );
    }

    #[test]
    fn unreachable_threshold_falls_back_to_pmax() {
        let net = NetworkState::from_gains(&[0.1], &[10.0], 1.0).unwrap();
        let grid = PowerGrid::linear(11, 1.0).unwrap();
        let br = best_response_full_csi(&net, &PowerProfile::uniform(&net, 0.0), 0, &grid).unwrap();
        assert_eq!(
            br,
            BestResponse {
                power: 1.0,
                feasible: false
            }
        );
        let dead = NetworkState::from_gains(&[0.0], &[0.1], 1.0).unwrap();
        let br = best_response_full_csi(&dead, &PowerProfile::uniform(&dead, 0.0), 0, &grid).unwrap();
        assert!(!br.feasible);
    }

    #[test]
    fn grid_validation() {
        assert_eq!(PowerGrid::from_levels(vec![]), Err(GameError::EmptyGrid));
        assert_eq!(PowerGrid::from_levels(vec![0.5, 0.5]), Err(GameError::InvalidGrid));
        assert_eq!(PowerGrid::from_levels(vec![-0.1, 1.0]), Err(GameError::InvalidGrid));
        let g = PowerGrid::normalized_default();
        assert_eq!(g.len(), 1001);
        assert_eq!(g.p_max(), 1.0);
        assert_eq!(g.position(0.25), Some(250));
        assert_eq!(g.position(0.2505), None);
        assert_eq!(g.ceil_index(0.2501), Some(251));
        assert_eq!(g.refined().len(), 2001);
    }

    #[test]
    fn network_validation() {
        assert_eq!(NetworkState::new(vec![], 1.0), Err(GameError::EmptyNetwork));
        let n = NodeConfig::new(3, 1.0, 0.1).unwrap();
        assert_eq!(NetworkState::new(vec![n, n], 1.0), Err(GameError::DuplicateNode(3)));
        assert!(matches!(
            NetworkState::new(vec![n], 0.0),
            Err(GameError::InvalidNoise(_))
        ));
        assert!(NodeConfig::new(0, -1.0, 0.1).is_err());
        assert!(NodeConfig::new(0, 1.0, 0.0).is_err());
        assert_relative_eq!(n.throughput_threshold, (1.1f64).log2(), max_relative = 1e-12);
    }

    #[test]
    fn symmetric_pair_has_symmetric_equilibrium() {
        let net = NetworkState::from_gains(&[0.5, 0.5], &[0.3, 0.3], 0.01).unwrap();
        let grid = PowerGrid::linear(1001, 1.0).unwrap();
        let sol = solve_nash_full_csi(&net, &grid, 1000, 0.0).unwrap();
        assert_eq!(sol.profile.get(0), sol.profile.get(1));
        assert!(sol.infeasible.is_empty());
    }

    #[test]
    fn single_node_equilibrium_is_best_response() {
        let net = NetworkState::from_gains(&[0.7], &[2.0], 0.05).unwrap();
        let grid = PowerGrid::linear(101, 1.0).unwrap();
        let sol = solve_nash_full_csi(&net, &grid, 10, 0.0).unwrap();
        let br = best_response_full_csi(&net, &sol.profile, 0, &grid).unwrap();
        assert_eq!(sol.profile.get(0), Some(br.power));
    }

    #[test]
    fn zero_rounds_rejected() {
        let net = NetworkState::from_gains(&[0.7], &[2.0], 0.05).unwrap();
        let grid = PowerGrid::linear(101, 1.0).unwrap();
        assert_eq!(solve_nash_full_csi(&net, &grid, 0, 0.0), Err(GameError::ZeroRounds));
    }

    #[test]
    fn non_convergence_carries_trace() {
        let net = NetworkState::from_gains(&[0.2, 0.1], &[0.8, 0.4], 1.0).unwrap();
        let grid = PowerGrid::linear(20001, 200.0).unwrap();
        match solve_nash_full_csi(&net, &grid, 2, 0.0) {
            Err(GameError::NoConvergence { rounds, trace }) => {
                assert_eq!(rounds, 2);
                assert!(!trace.is_empty());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn deviation_scan_flags_wasteful_power() {
        let net = NetworkState::from_gains(&[1.0], &[0.5], 1.0).unwrap();
        let grid = PowerGrid::linear(11, 1.0).unwrap();
        let prof = PowerProfile::uniform(&net, 0.9);
        assert!(matches!(
            verify_epsilon_nash(&net, &grid, &prof, 0.0),
            Err(GameError::NotEquilibrium { id: 0, .. })
        ));
        assert!(verify_epsilon_nash(&net, &grid, &prof, 0.5).is_ok());
    }

    #[test]
    fn db_conversions() {
        assert_relative_eq!(db_to_linear(-20.0), 0.01, max_relative = 1e-12);
        assert_relative_eq!(db_to_linear(-120.0), 1e-12, max_relative = 1e-12);
        assert_relative_eq!(linear_to_db(0.001), -30.0, max_relative = 1e-12);
    }
}
