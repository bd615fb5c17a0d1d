//! Oracle suites behind the `selftest` subcommand.
//!
//! Each suite draws its instances from a fixed-seed generator and returns a
//! [`SuiteReport`]; the acceptance target calls the same functions at full
//! size.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::epistemic::{
    evaluation_bound, inter_update, intra_update, run_epistemic_game, EpistemicPolicy, HypothesisScan,
};
use crate::game::{meets_threshold, solve_nash_full_csi, verify_epsilon_nash, NetworkState, PowerGrid, PowerProfile};
use crate::stats::oracle::{erlang_cdf_gap, quadrature_oracle_inverse_moment};
use crate::stats::{fit_gamma_mme, inverse_shifted_moment, RayleighPrior};

pub const MME_TOLERANCE: f64 = 1e-9;
pub const SERIES_TOLERANCE: f64 = 1e-6;
pub const SERIES_TRUNCATION: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub label: &'static str,
    pub passed: bool,
    pub instances: usize,
    pub detail: String,
}

impl SuiteReport {
    pub fn line(&self) -> String {
        format!(
            "{} {} ({} instances): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.label,
            self.instances,
            self.detail
        )
    }
}

/// Instance counts for one selftest run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSizes {
    pub erlang_max_count: usize,
    pub series_models: usize,
    pub nash_networks: usize,
    /// Random networks per (N, S) shape for the selection suite.
    pub selection_networks: usize,
}

impl SuiteSizes {
    pub const FULL: Self = Self {
        erlang_max_count: 100,
        series_models: 1000,
        nash_networks: 100,
        selection_networks: 10,
    };
    pub const QUICK: Self = Self {
        erlang_max_count: 12,
        series_models: 100,
        nash_networks: 20,
        selection_networks: 2,
    };
}

/// MME fit of `count` equal powers against the exact Erlang law at the
/// 1%..99% quantiles.
pub fn mme_vs_erlang(seed: u64, max_count: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut instances = 0;
    for count in 1..=max_count {
        let p: f64 = rng.random_range(0.01..1.0);
        let lambda: f64 = rng.random_range(0.1..2.0);
        let gap = match fit_gamma_mme(&vec![p; count], lambda) {
            Ok(model) => erlang_cdf_gap(&model, count, p),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(gap);
        instances += 1;
    }
    SuiteReport {
        label: "(a) MME vs Erlang CDF at 99 quantiles",
        passed: worst <= MME_TOLERANCE,
        instances,
        detail: format!("worst gap {worst:.3e}, tolerance {MME_TOLERANCE:e}"),
    }
}

/// Which random models the series check draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesDomain {
    /// 1 to 100 interferers with powers in (0, 1].
    AnyShape,
    /// As `AnyShape`, redrawn until the fitted shape is at least the bound.
    ShapeAtLeast(f64),
}

/// Truncated series for `E[1/(Y+eta)]` at truncation 8 against adaptive
/// quadrature, with `eta / E[Y]` log-uniform in `[10, 100]`.
pub fn series_vs_quadrature(seed: u64, models: usize, domain: SeriesDomain) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = RayleighPrior::new(1.0).expect("unit scale").lambda();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    for _ in 0..models {
        let model = loop {
            let count = rng.random_range(1..=100usize);
            let powers: Vec<f64> = (0..count).map(|_| 1.0 - rng.random::<f64>()).collect();
            let m = fit_gamma_mme(&powers, lambda).expect("positive powers");
            match domain {
                SeriesDomain::AnyShape => break m,
                SeriesDomain::ShapeAtLeast(a) if m.alpha_hat >= a => break m,
                SeriesDomain::ShapeAtLeast(_) => continue,
            }
        };
        let ratio = 10f64.powf(rng.random_range(1.0..2.0));
        let model = model.with_shift(ratio * model.mean());
        let series = inverse_shifted_moment(&model, 1, SERIES_TRUNCATION).value;
        let rel = match quadrature_oracle_inverse_moment(&model, 1) {
            Ok(q) => ((series - q) / q).abs(),
            Err(_) => f64::INFINITY,
        };
        if rel > SERIES_TOLERANCE {
            failures += 1;
        }
        if rel > worst.0 {
            worst = (rel, model.alpha_hat, ratio);
        }
    }
    let label = match domain {
        SeriesDomain::AnyShape => "(b) series vs quadrature, eta >= 10 E[Y], T = 8",
        SeriesDomain::ShapeAtLeast(_) => "(b') series vs quadrature, shape >= 2, eta >= 10 E[Y], T = 8",
    };
    SuiteReport {
        label,
        passed: failures == 0,
        instances: models,
        detail: format!(
            "{failures} above {SERIES_TOLERANCE:e}; worst relative error {:.3e} at shape {:.4}, eta/E[Y] {:.2}",
            worst.0, worst.1, worst.2
        ),
    }
}

fn random_network(rng: &mut ChaCha8Rng, n: usize, noise: f64, db_range: (f64, f64)) -> NetworkState {
    let prior = RayleighPrior::new(1.0).expect("unit scale");
    let gains: Vec<f64> = (0..n).map(|_| prior.sample_magnitude(rng)).collect();
    let thresholds: Vec<f64> = (0..n)
        .map(|_| 10f64.powf(rng.random_range(db_range.0..db_range.1) / 10.0))
        .collect();
    NetworkState::from_gains(&gains, &thresholds, noise).expect("valid random network")
}

/// Brute-force equilibrium check: every node sits at the least grid level
/// meeting its threshold against the others, or at the top when none does.
fn is_least_feasible_profile(network: &NetworkState, grid: &PowerGrid, profile: &PowerProfile) -> bool {
    let powers = profile.ordered(network).expect("complete profile");
    let gains_sq = network.gains_sq();
    network.nodes().iter().enumerate().all(|(i, node)| {
        let interference: f64 = (0..powers.len())
            .filter(|&j| j != i)
            .map(|j| gains_sq[j] * powers[j])
            .sum();
        let denom = interference + network.noise_power();
        let least = grid
            .levels()
            .iter()
            .copied()
            .find(|&p| meets_threshold(gains_sq[i] * p / denom, node.sinr_threshold))
            .unwrap_or(grid.p_max());
        least == powers[i]
    })
}

/// Full-CSI equilibrium from best-response iteration, checked by the
/// exhaustive deviation scan and by a brute-force least-power test.
pub fn epsilon_nash_suite(seed: u64, networks: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for idx in 0..networks {
        let n = rng.random_range(1..=4usize);
        let s = rng.random_range(2..=21usize);
        let network = random_network(&mut rng, n, 1e-2, (-10.0, 0.0));
        let grid = PowerGrid::linear(s, 1.0).expect("grid");
        let ok = match solve_nash_full_csi(&network, &grid, 1000, 0.0) {
            Ok(sol) => {
                verify_epsilon_nash(&network, &grid, &sol.profile, 0.0).is_ok()
                    && is_least_feasible_profile(&network, &grid, &sol.profile)
            }
            Err(_) => false,
        };
        if !ok {
            failures.push(format!("#{idx} (N={n}, S={s})"));
        }
    }
    SuiteReport {
        label: "(c) epsilon-Nash deviation scan, N <= 4, S <= 21",
        passed: failures.is_empty(),
        instances: networks,
        detail: if failures.is_empty() {
            "no profitable deviation".to_string()
        } else {
            format!("failed on {}", failures.join(", "))
        },
    }
}

/// Least grid power whose first-moment expected SINR meets `threshold`,
/// from a plain scan over every level.
fn exhaustive_k1_choice(
    numerator: f64,
    pool: &[f64],
    eta: f64,
    threshold: f64,
    grid: &PowerGrid,
    prior: &RayleighPrior,
    truncation: usize,
) -> (f64, bool) {
    let positive: Vec<f64> = pool.iter().copied().filter(|&p| p > 0.0).collect();
    let inv = if positive.is_empty() {
        1.0 / eta
    } else {
        let model = fit_gamma_mme(&positive, prior.lambda())
            .expect("positive pool")
            .with_shift(eta);
        inverse_shifted_moment(&model, 1, truncation).value
    };
    for &p in grid.levels() {
        if meets_threshold(p * (numerator * inv), threshold) {
            return (p, true);
        }
    }
    (grid.p_max(), false)
}

/// Suites (d) and (e): every inter and intra update of M1, for every belief
/// profile over the grid, against an exhaustive expected-utility scan; and
/// full runs against the `N^2 S^(2N)` evaluation bound.
pub fn selection_suites(seed: u64, networks_per_shape: usize) -> (SuiteReport, SuiteReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scans = [
        HypothesisScan::Exhaustive,
        HypothesisScan::Bisection,
        HypothesisScan::Crossing,
    ];
    let mut updates = 0usize;
    let mut mismatches: Vec<String> = Vec::new();
    let mut runs = 0usize;
    let mut bound_failures: Vec<String> = Vec::new();
    let mut worst_ratio = 0.0f64;

    for n in 1..=3usize {
        for s in 2..=7usize {
            let grid = PowerGrid::linear(s, 1.0).expect("grid");
            for _ in 0..networks_per_shape {
                let network = random_network(&mut rng, n, 1e-3, (-20.0, 5.0));
                let gains_sq = network.gains_sq();
                let thresholds = network.thresholds();
                let ids: Vec<u32> = network.nodes().iter().map(|c| c.id).collect();
                for scan in scans {
                    let policy = EpistemicPolicy::new(1).expect("order 1").with_scan(scan);
                    let prior = policy.prior;
                    // every belief profile in grid^N
                    let mut digits = vec![0usize; n];
                    loop {
                        let beliefs: Vec<f64> = digits.iter().map(|&d| grid.level(d)).collect();
                        let profile = PowerProfile::from_ordered(&network, &beliefs);
                        for i in 0..n {
                            let others: Vec<f64> = (0..n).filter(|&x| x != i).map(|x| beliefs[x]).collect();
                            let expect = exhaustive_k1_choice(
                                gains_sq[i],
                                &others,
                                network.noise_power(),
                                thresholds[i],
                                &grid,
                                &prior,
                                policy.truncation,
                            );
                            let (stage, _) = intra_update(&network, ids[i], &profile, &grid, &policy).expect("intra");
                            updates += 1;
                            if (stage.chosen_power, !stage.infeasible) != expect {
                                mismatches.push(format!("intra N={n} S={s} {scan:?} b={beliefs:?} i={i}"));
                            }
                            for j in (0..n).filter(|&j| j != i) {
                                let third: Vec<f64> =
                                    (0..n).filter(|&x| x != i && x != j).map(|x| beliefs[x]).collect();
                                let expect = exhaustive_k1_choice(
                                    prior.power_gain_moment(1),
                                    &third,
                                    gains_sq[i] * beliefs[i] + network.noise_power(),
                                    thresholds[j],
                                    &grid,
                                    &prior,
                                    policy.truncation,
                                );
                                let (stage, _) =
                                    inter_update(&network, ids[i], ids[j], &profile, &grid, &policy).expect("inter");
                                updates += 1;
                                if (stage.chosen_power, !stage.infeasible) != expect {
                                    mismatches.push(format!("inter N={n} S={s} {scan:?} b={beliefs:?} i={i} j={j}"));
                                }
                            }
                        }
                        // next profile, odometer order
                        let mut pos = 0;
                        while pos < n {
                            digits[pos] += 1;
                            if digits[pos] < s {
                                break;
                            }
                            digits[pos] = 0;
                            pos += 1;
                        }
                        if pos == n {
                            break;
                        }
                    }

                    let trace = run_epistemic_game(&network, &grid, &policy, 200).expect("run");
                    let bound = evaluation_bound(n, s);
                    runs += 1;
                    worst_ratio = worst_ratio.max(trace.eu_evaluations as f64 / bound as f64);
                    if trace.eu_evaluations > bound {
                        bound_failures.push(format!("N={n} S={s} {scan:?}: {} > {bound}", trace.eu_evaluations));
                    }
                }
            }
        }
    }

    let selection = SuiteReport {
        label: "(d) M1 selection vs exhaustive expected-utility scan, N <= 3, S <= 7",
        passed: mismatches.is_empty(),
        instances: updates,
        detail: if mismatches.is_empty() {
            "all updates agree".to_string()
        } else {
            format!("{} mismatches, first: {}", mismatches.len(), mismatches[0])
        },
    };
    let bound = SuiteReport {
        label: "(e) eu_evaluations <= N^2 S^(2N)",
        passed: bound_failures.is_empty(),
        instances: runs,
        detail: if bound_failures.is_empty() {
            format!("largest evaluations/bound ratio {worst_ratio:.3e}")
        } else {
            format!("{} over bound, first: {}", bound_failures.len(), bound_failures[0])
        },
    };
    (selection, bound)
}

/// Runs every suite, writing one line per suite. Returns whether all of the
/// required suites passed; the restricted-shape series line is informative.
pub fn run(out: &mut dyn Write, seed: u64, sizes: SuiteSizes) -> io::Result<bool> {
    let mut required = Vec::new();
    required.push(mme_vs_erlang(seed, sizes.erlang_max_count));
    writeln!(out, "{}", required[0].line())?;
    required.push(series_vs_quadrature(seed, sizes.series_models, SeriesDomain::AnyShape));
    writeln!(out, "{}", required[1].line())?;
    let restricted = series_vs_quadrature(seed, sizes.series_models, SeriesDomain::ShapeAtLeast(2.0));
    writeln!(out, "{} [informative]", restricted.line())?;
    required.push(epsilon_nash_suite(seed, sizes.nash_networks));
    writeln!(out, "{}", required[2].line())?;
    let (d, e) = selection_suites(seed, sizes.selection_networks);
    writeln!(out, "{}", d.line())?;
    writeln!(out, "{}", e.line())?;
    required.push(d);
    required.push(e);
    Ok(required.iter().all(|r| r.passed))
}
