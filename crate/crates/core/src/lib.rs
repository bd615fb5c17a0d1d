//! Bayesian-game uplink power control: Gamma-approximated interference
//! statistics, full-CSI and belief-based solvers, baselines and a seeded
//! Monte Carlo harness.

pub mod baselines;
pub mod cli;
pub mod epistemic;
pub mod game;
pub mod sim;
pub mod stats;
