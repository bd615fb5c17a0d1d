//! C ABI over the `epigame` solvers and Monte Carlo harness.
//!
//! Objects are opaque handles created by `epg_*_new` and released by the
//! matching `epg_*_free`. Every fallible call returns an [`EpgStatus`]; on
//! failure a message is kept per thread and can be copied out with
//! [`epg_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use epigame::epistemic::{run_epistemic_game, EpistemicPolicy};
use epigame::game::{db_to_linear, solve_nash_full_csi, GameError, NetworkState, PowerGrid};
use epigame::sim::{run_scenario, PolicyLabel, ScenarioSpec, Thresholds};
use epigame::stats::{fit_gamma_mme, StatsError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoInterferers = 3,
    NoConvergence = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: EpgStatus, msg: impl Into<String>) -> EpgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> EpgStatus) -> EpgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(EpgStatus::Panic, "internal panic"),
    }
}

/// Copies the calling thread's last error message, NUL-terminated, into
/// `buf`. Returns the message length without the terminator; when that is
/// `>= len` the copy was truncated.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn epg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn epg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn slice<'a>(data: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if data.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(data, len))
    }
}

/// Method-of-moments Gamma fit of an interference sum.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpgGammaFit {
    pub alpha_hat: f64,
    pub theta_hat: f64,
    pub mean: f64,
    pub variance: f64,
    /// Raw moments of orders 1 to 4.
    pub raw_moments: [f64; 4],
}

/// Fits the Gamma law of `sum_j p_j X_j`, `X_j ~ exp(lambda)`.
///
/// # Safety
/// `powers` must point to `count` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn epg_fit_gamma(
    powers: *const f64,
    count: usize,
    lambda: f64,
    out: *mut EpgGammaFit,
) -> EpgStatus {
    guard(|| {
        let Some(powers) = slice(powers, count) else {
            return fail(EpgStatus::NullPointer, "powers is null");
        };
        if out.is_null() {
            return fail(EpgStatus::NullPointer, "out is null");
        }
        match fit_gamma_mme(powers, lambda) {
            Ok(m) => {
                let mv = m.moments(4);
                *out = EpgGammaFit {
                    alpha_hat: m.alpha_hat,
                    theta_hat: m.theta_hat,
                    mean: m.mean(),
                    variance: m.variance(),
                    raw_moments: [mv.raw(1), mv.raw(2), mv.raw(3), mv.raw(4)],
                };
                EpgStatus::Ok
            }
            Err(e @ StatsError::NoInterferers) => fail(EpgStatus::NoInterferers, e.to_string()),
            Err(e) => fail(EpgStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Opaque network of nodes with gains and SINR thresholds.
pub struct EpgNetwork(NetworkState);

/// Opaque discrete power grid.
pub struct EpgGrid(PowerGrid);

/// Opaque Monte Carlo scenario.
pub struct EpgScenario(ScenarioSpec);

/// Creates a network with node ids `0..count`.
///
/// # Safety
/// `gains` and `thresholds` must each point to `count` doubles; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn epg_network_new(
    gains: *const f64,
    thresholds: *const f64,
    count: usize,
    noise_power: f64,
    out: *mut *mut EpgNetwork,
) -> EpgStatus {
    guard(|| {
        let (Some(g), Some(t)) = (slice(gains, count), slice(thresholds, count)) else {
            return fail(EpgStatus::NullPointer, "gains or thresholds is null");
        };
        if out.is_null() {
            return fail(EpgStatus::NullPointer, "out is null");
        }
        match NetworkState::from_gains(g, t, noise_power) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(EpgNetwork(net)));
                EpgStatus::Ok
            }
            Err(e) => fail(EpgStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn epg_network_len(network: *const EpgNetwork) -> usize {
    network.as_ref().map_or(0, |n| n.0.len())
}

/// # Safety
/// `network` must be null or a handle from [`epg_network_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn epg_network_free(network: *mut EpgNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Evenly spaced grid of `levels` powers on `[0, p_max]`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn epg_grid_new_linear(levels: usize, p_max: f64, out: *mut *mut EpgGrid) -> EpgStatus {
    guard(|| {
        if out.is_null() {
            return fail(EpgStatus::NullPointer, "out is null");
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            return fail(
                EpgStatus::InvalidArgument,
                format!("p_max must be positive, got {p_max}"),
            );
        }
        match PowerGrid::linear(levels, p_max) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(EpgGrid(g)));
                EpgStatus::Ok
            }
            Err(e) => fail(EpgStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `grid` must be null or a handle from [`epg_grid_new_linear`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn epg_grid_free(grid: *mut EpgGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

unsafe fn write_powers(powers: &[f64], out: *mut f64, len: usize) -> EpgStatus {
    if out.is_null() {
        return fail(EpgStatus::NullPointer, "powers_out is null");
    }
    if len < powers.len() {
        return fail(
            EpgStatus::BufferTooSmall,
            format!("powers_out holds {len} values, {} needed", powers.len()),
        );
    }
    ptr::copy_nonoverlapping(powers.as_ptr(), out, powers.len());
    EpgStatus::Ok
}

/// Full-CSI equilibrium by best-response iteration from the lowest level.
/// Powers are written in node id order.
///
/// # Safety
/// Handles must be live; `powers_out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn epg_solve_nash(
    network: *const EpgNetwork,
    grid: *const EpgGrid,
    max_rounds: usize,
    powers_out: *mut f64,
    len: usize,
) -> EpgStatus {
    guard(|| {
        let (Some(net), Some(grid)) = (network.as_ref(), grid.as_ref()) else {
            return fail(EpgStatus::NullPointer, "network or grid is null");
        };
        match solve_nash_full_csi(&net.0, &grid.0, max_rounds, 0.0) {
            Ok(sol) => match sol.profile.ordered(&net.0) {
                Ok(p) => write_powers(&p, powers_out, len),
                Err(e) => fail(EpgStatus::InvalidArgument, e.to_string()),
            },
            Err(e @ GameError::NoConvergence { .. }) => fail(EpgStatus::NoConvergence, e.to_string()),
            Err(e) => fail(EpgStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Run statistics of an epistemic solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EpgEpistemicSummary {
    pub converged: bool,
    pub passes: usize,
    pub eu_evaluations: u64,
}

/// Belief-based solve with moment-order policy `M_k`. Powers are written in
/// node id order; a run that stops without converging still writes its last
/// profile and returns `NoConvergence`.
///
/// # Safety
/// Handles must be live; `powers_out` must point to `len` writable doubles;
/// `summary` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn epg_solve_epistemic(
    network: *const EpgNetwork,
    grid: *const EpgGrid,
    moment_order: u32,
    max_stages: usize,
    powers_out: *mut f64,
    len: usize,
    summary: *mut EpgEpistemicSummary,
) -> EpgStatus {
    guard(|| {
        let (Some(net), Some(grid)) = (network.as_ref(), grid.as_ref()) else {
            return fail(EpgStatus::NullPointer, "network or grid is null");
        };
        let policy = match EpistemicPolicy::new(moment_order as usize) {
            Ok(p) => p,
            Err(e) => return fail(EpgStatus::InvalidArgument, e.to_string()),
        };
        let trace = match run_epistemic_game(&net.0, &grid.0, &policy, max_stages) {
            Ok(t) => t,
            Err(e) => return fail(EpgStatus::InvalidArgument, e.to_string()),
        };
        if !summary.is_null() {
            *summary = EpgEpistemicSummary {
                converged: trace.converged,
                passes: trace.passes,
                eu_evaluations: trace.eu_evaluations,
            };
        }
        let powers = match trace.final_profile.ordered(&net.0) {
            Ok(p) => p,
            Err(e) => return fail(EpgStatus::InvalidArgument, e.to_string()),
        };
        match write_powers(&powers, powers_out, len) {
            EpgStatus::Ok if !trace.converged => fail(
                EpgStatus::NoConvergence,
                format!("no fixed point after {} passes", trace.passes),
            ),
            status => status,
        }
    })
}

/// Scenario with the default experiment settings: 100 nodes, unit-scale
/// Rayleigh prior, noise -120 dB, threshold -20 dB, every node
/// interfering, policy M1, 10 000 trials, seed 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_new(out: *mut *mut EpgScenario) -> EpgStatus {
    guard(|| {
        if out.is_null() {
            return fail(EpgStatus::NullPointer, "out is null");
        }
        *out = Box::into_raw(Box::new(EpgScenario(ScenarioSpec::reference())));
        EpgStatus::Ok
    })
}

/// # Safety
/// `scenario` must be null or a handle from [`epg_scenario_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_free(scenario: *mut EpgScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

unsafe fn with_scenario(scenario: *mut EpgScenario, f: impl FnOnce(&mut ScenarioSpec) -> EpgStatus) -> EpgStatus {
    guard(|| match scenario.as_mut() {
        Some(s) => f(&mut s.0),
        None => fail(EpgStatus::NullPointer, "scenario is null"),
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_set_nodes(scenario: *mut EpgScenario, n_nodes: usize) -> EpgStatus {
    with_scenario(scenario, |s| {
        s.n_nodes = n_nodes;
        EpgStatus::Ok
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_set_trials(scenario: *mut EpgScenario, trials: usize) -> EpgStatus {
    with_scenario(scenario, |s| {
        s.trials = trials;
        EpgStatus::Ok
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_set_seed(scenario: *mut EpgScenario, seed: u64) -> EpgStatus {
    with_scenario(scenario, |s| {
        s.seed = seed;
        EpgStatus::Ok
    })
}

/// Worker threads; 0 lets the pool choose.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_set_workers(scenario: *mut EpgScenario, workers: usize) -> EpgStatus {
    with_scenario(scenario, |s| {
        s.workers = workers;
        EpgStatus::Ok
    })
}

/// Uniform SINR threshold in dB.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_set_threshold_db(scenario: *mut EpgScenario, threshold_db: f64) -> EpgStatus {
    with_scenario(scenario, |s| {
        if !threshold_db.is_finite() {
            return fail(EpgStatus::InvalidArgument, "threshold must be finite");
        }
        s.thresholds = Thresholds::Uniform(db_to_linear(threshold_db));
        EpgStatus::Ok
    })
}

/// Share of the population interfering, in percent.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_set_interference_pct(scenario: *mut EpgScenario, pct: f64) -> EpgStatus {
    with_scenario(scenario, |s| {
        if !(0.0..=100.0).contains(&pct) {
            return fail(EpgStatus::InvalidArgument, format!("{pct} is outside [0, 100]"));
        }
        s.interference_fraction = pct / 100.0;
        EpgStatus::Ok
    })
}

/// Fixes node 0's gain magnitude; a negative value restores random gains.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_set_desired_gain(scenario: *mut EpgScenario, gain: f64) -> EpgStatus {
    with_scenario(scenario, |s| {
        if gain.is_nan() {
            return fail(EpgStatus::InvalidArgument, "gain is NaN");
        }
        s.desired_gain = (gain >= 0.0).then_some(gain);
        EpgStatus::Ok
    })
}

/// Policy by label: `M1`..`M4`, `EPA`, `SNCPC` or `NASH`.
///
/// # Safety
/// `scenario` must be a live handle; `label` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_set_policy(scenario: *mut EpgScenario, label: *const c_char) -> EpgStatus {
    with_scenario(scenario, |s| {
        if label.is_null() {
            return fail(EpgStatus::NullPointer, "label is null");
        }
        let text = match CStr::from_ptr(label).to_str() {
            Ok(t) => t,
            Err(_) => return fail(EpgStatus::InvalidArgument, "label is not UTF-8"),
        };
        let policy: PolicyLabel = match text.parse() {
            Ok(p) => p,
            Err(e) => return fail(EpgStatus::InvalidArgument, e),
        };
        match policy.solver(s) {
            Ok(solver) => {
                s.solver = solver;
                EpgStatus::Ok
            }
            Err(e) => fail(EpgStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Aggregated Monte Carlo metrics.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpgMetrics {
    pub coverage: f64,
    pub outage: f64,
    /// Mean transmit power as a fraction of `p_max`.
    pub avg_power: f64,
    /// 95% half-width of the coverage estimate.
    pub ci_halfwidth: f64,
    /// 95% half-width of the power estimate.
    pub power_ci_halfwidth: f64,
    pub trials_run: usize,
    pub nonconverged: usize,
    /// Set when non-converged trials exceed the warning budget.
    pub warning: bool,
}

/// Runs every trial of the scenario.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn epg_scenario_run(scenario: *const EpgScenario, out: *mut EpgMetrics) -> EpgStatus {
    guard(|| {
        let Some(s) = scenario.as_ref() else {
            return fail(EpgStatus::NullPointer, "scenario is null");
        };
        if out.is_null() {
            return fail(EpgStatus::NullPointer, "out is null");
        }
        match run_scenario(&s.0) {
            Ok(m) => {
                *out = EpgMetrics {
                    coverage: m.coverage,
                    outage: m.outage,
                    avg_power: m.avg_power,
                    ci_halfwidth: m.ci_halfwidth,
                    power_ci_halfwidth: m.power_ci_halfwidth,
                    trials_run: m.trials_run,
                    nonconverged: m.nonconverged,
                    warning: m.warning.is_some(),
                };
                EpgStatus::Ok
            }
            Err(e) => fail(EpgStatus::InvalidArgument, e.to_string()),
        }
    })
}
