//! Reference policies: equal power allocation and a mean-field stochastic
//! non-cooperative power control.
//!
//! The S-NCPC variant here is a reconstruction: every node knows its own gain
//! and the Rayleigh prior, treats the interference as its statistical mean
//! `E[Y] = (1/lambda) sum_{j != i} p_j`, and picks the least grid power whose
//! SINR against that mean meets its threshold. There is no belief hierarchy
//! and no shift beyond the noise.

use crate::game::{best_response_index, GameError, NetworkState, NodeId, PowerGrid, PowerProfile};
use crate::stats::RayleighPrior;

pub const DEFAULT_SNCPC_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineKind {
    Epa { level: f64 },
    Sncpc { max_iter: usize },
}

/// Every node at `level`.
pub fn epa_profile(network: &NetworkState, grid: &PowerGrid, level: f64) -> Result<PowerProfile, GameError> {
    if !grid.contains(level) {
        return Err(GameError::OffGrid(level));
    }
    Ok(PowerProfile::uniform(network, level))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SncpcOutcome {
    pub profile: PowerProfile,
    pub iterations: usize,
    pub converged: bool,
    /// Nodes whose threshold is unreachable against the mean interference.
    pub infeasible: Vec<NodeId>,
}

/// Least grid index meeting `threshold` against the mean interference of the
/// opponents' total power. Only the node's own gain enters.
pub fn sncpc_response(
    own_gain_sq: f64,
    threshold: f64,
    opponents_power_sum: f64,
    prior: &RayleighPrior,
    noise: f64,
    grid: &PowerGrid,
) -> (usize, bool) {
    let mean_interference = opponents_power_sum * prior.mean_power_gain();
    best_response_index(own_gain_sq, threshold, mean_interference, noise, grid)
}

/// Synchronous fixed-point iteration of [`sncpc_response`] from the lowest
/// grid level. Non-convergence returns the last profile with
/// `converged == false`.
pub fn sncpc_solve(
    network: &NetworkState,
    grid: &PowerGrid,
    prior: &RayleighPrior,
    max_iter: usize,
) -> Result<SncpcOutcome, GameError> {
    if max_iter == 0 {
        return Err(GameError::ZeroRounds);
    }
    let n = network.len();
    let noise = network.noise_power();
    let own: Vec<(f64, f64)> = network
        .nodes()
        .iter()
        .map(|c| (c.gain_sq(), c.sinr_threshold))
        .collect();
    let mut current = vec![0usize; n];
    let mut feasible = vec![false; n];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let total: f64 = current.iter().map(|&i| grid.level(i)).sum();
        let mut next = current.clone();
        for (i, &(g2, thr)) in own.iter().enumerate() {
            let others = (total - grid.level(current[i])).max(0.0);
            let (idx, ok) = sncpc_response(g2, thr, others, prior, noise, grid);
            next[i] = idx;
            feasible[i] = ok;
        }
        if next == current {
            converged = true;
            break;
        }
        current = next;
    }
    let powers: Vec<f64> = current.iter().map(|&i| grid.level(i)).collect();
    Ok(SncpcOutcome {
        profile: PowerProfile::from_ordered(network, &powers),
        iterations,
        converged,
        infeasible: network
            .nodes()
            .iter()
            .zip(&feasible)
            .filter(|(_, ok)| !**ok)
            .map(|(c, _)| c.id)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epa_assigns_level() {
        let net = NetworkState::from_gains(&[0.3, 1.0, 2.0], &[0.01; 3], 1e-12).unwrap();
        let g = PowerGrid::normalized_default();
        let p = epa_profile(&net, &g, 1.0).unwrap();
        assert!(p.iter().all(|(_, x)| x == 1.0));
        assert_eq!(p.total_power() / 3.0, 1.0);
        assert_eq!(epa_profile(&net, &g, 0.0005), Err(GameError::OffGrid(0.0005)));
    }

    #[test]
    fn single_node_sncpc_is_feasibility_power() {
        let net = NetworkState::from_gains(&[2.0], &[0.5], 0.4).unwrap();
        let g = PowerGrid::normalized_default();
        let prior = RayleighPrior::new(1.0).unwrap();
        let out = sncpc_solve(&net, &g, &prior, 10).unwrap();
        assert!(out.converged);
        assert_eq!(out.profile.get(0), Some(0.05));
    }

    #[test]
    fn symmetric_pair_is_symmetric() {
        let net = NetworkState::from_gains(&[1.0, 1.0], &[0.2, 0.2], 0.01).unwrap();
        let g = PowerGrid::linear(101, 1.0).unwrap();
        let out = sncpc_solve(&net, &g, &RayleighPrior::new(1.0).unwrap(), 100).unwrap();
        assert!(out.converged);
        assert_eq!(out.profile.get(0), out.profile.get(1));
    }
}
