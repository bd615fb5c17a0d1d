//! Independent numerical references for the series machinery.
//!
//! Nothing in the solvers calls into this module; it exists so the tests and
//! the `selftest` subcommand can check the truncated expansions against
//! direct integration and closed forms.

use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::ln_gamma;

use super::{GammaInterferenceModel, StatsError};

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
/// Range of the exp-sinh abscissa; beyond it the weights under/overflow.
const T_LIMIT: f64 = 6.0;
const MAX_LEVELS: usize = 18;

/// Result of an exp-sinh integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// `int_0^inf f_Gamma(y; alpha, theta) / (y + eta)^k dy` to relative
/// tolerance 1e-9.
///
/// With `eta = 0` the integrand behaves like `y^(alpha-1-k)` at the origin,
/// which is not integrable for `alpha <= k`; that case is reported as
/// divergent rather than integrated.
pub fn quadrature_oracle_inverse_moment(model: &GammaInterferenceModel, k: usize) -> Result<f64, StatsError> {
    inverse_moment_quadrature(model.alpha_hat, model.theta_hat, model.eta, k, 1e-9).map(|q| q.value)
}

pub fn inverse_moment_quadrature(
    alpha: f64,
    theta: f64,
    eta: f64,
    k: usize,
    rel_tol: f64,
) -> Result<Quadrature, StatsError> {
    if k == 0 {
        return Err(StatsError::ZeroOrder);
    }
    if eta == 0.0 && alpha <= k as f64 {
        return Err(StatsError::Divergent(format!(
            "shape {alpha} <= order {k} with zero shift: integrand ~ y^{} near 0",
            alpha - 1.0 - k as f64
        )));
    }
    let kf = k as f64;
    let ln_norm = ln_gamma(alpha);
    // Substitute y = theta u, u = c exp(pi/2 sinh t), centred on the mode.
    let c = (alpha - 1.0).max(1.0);
    let ln_c = c.ln();
    let log_integrand = |t: f64| -> f64 {
        let s = HALF_PI * t.sinh();
        let ln_u = ln_c + s;
        let u = ln_u.exp();
        // du/dt = u pi/2 cosh t
        let ln_jac = ln_u + (HALF_PI * t.cosh()).ln();
        let ln_den = (theta * u + eta).ln();
        (alpha - 1.0) * ln_u - u - ln_norm - kf * ln_den + ln_jac
    };
    exp_sinh(log_integrand, alpha, rel_tol)
}

/// Trapezoidal sums on the exp-sinh grid with step halving. `log_f` returns
/// the log of the transformed integrand at abscissa `t`.
fn exp_sinh<F: Fn(f64) -> f64>(log_f: F, alpha: f64, rel_tol: f64) -> Result<Quadrature, StatsError> {
    // The peak has width ~ 1/sqrt(alpha) in t near the origin.
    let h0 = (0.5 / alpha.max(1.0).sqrt()).min(0.5);
    let n0 = (T_LIMIT / h0).ceil() as i64;
    let mut evaluations = 0usize;

    // Coarse scan to locate the support.
    let mut peak = f64::NEG_INFINITY;
    let mut logs = Vec::with_capacity((2 * n0 + 1) as usize);
    for i in -n0..=n0 {
        let v = log_f(i as f64 * h0);
        evaluations += 1;
        if v.is_finite() && v > peak {
            peak = v;
        }
        logs.push(v);
    }
    if !peak.is_finite() {
        return Err(StatsError::NoConvergence("integrand vanishes on the whole grid".into()));
    }
    let cutoff = peak - 80.0;
    let mut lo = n0;
    let mut hi = -n0;
    for (idx, v) in logs.iter().enumerate() {
        if v.is_finite() && *v > cutoff {
            let i = idx as i64 - n0;
            lo = lo.min(i);
            hi = hi.max(i);
        }
    }
    let t_lo = ((lo - 2) as f64 * h0).max(-T_LIMIT);
    let t_hi = ((hi + 2) as f64 * h0).min(T_LIMIT);

    let eval = |t: f64| -> f64 {
        let v = log_f(t);
        if v.is_finite() {
            v.exp()
        } else {
            0.0
        }
    };

    let mut h = h0;
    let steps = ((t_hi - t_lo) / h).ceil() as usize;
    h = (t_hi - t_lo) / steps as f64;
    let mut sum: f64 = (0..=steps).map(|i| eval(t_lo + i as f64 * h)).sum();
    evaluations += steps + 1;
    let mut estimate = sum * h;
    let mut n = steps;
    for level in 1..=MAX_LEVELS {
        h *= 0.5;
        let mut odd = 0.0;
        for i in 0..n {
            odd += eval(t_lo + (2 * i + 1) as f64 * h);
        }
        evaluations += n;
        n *= 2;
        sum += odd;
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        // Convergence is doubly exponential in 1/h; the level-to-level
        // difference overstates the remaining error.
        if level >= 2 && diff <= rel_tol * 1e-3 * next.abs() {
            return Ok(Quadrature {
                value: next,
                error_estimate: diff,
                evaluations,
            });
        }
    }
    Err(StatsError::NoConvergence(format!(
        "no convergence after {MAX_LEVELS} halvings (last estimate {estimate:e}, {evaluations} evaluations)"
    )))
}

/// Expansion of `E[1/(Y+eta)]` in powers of `1/eta` using raw moments:
/// `sum_n (-1)^n m_n / eta^(n+1)`. Only sensible for `eta >> E[Y]`.
pub fn inverse_shift_eta_series(model: &GammaInterferenceModel, terms: usize) -> f64 {
    let eta = model.eta;
    let mut sum = 0.0;
    let mut m = 1.0;
    let mut scale = 1.0 / eta;
    for n in 0..terms {
        if n > 0 {
            m *= model.theta_hat * (model.alpha_hat + n as f64 - 1.0);
            scale /= eta;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * m * scale;
    }
    sum
}

/// CDF of the Erlang distribution with integer shape `n` and scale `theta`:
/// `1 - sum_{j<n} e^{-x/theta} (x/theta)^j / j!`.
pub fn erlang_cdf(x: f64, n: usize, theta: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let z = x / theta;
    let mut term = (-z).exp();
    let mut tail = 0.0;
    for j in 0..n {
        if j > 0 {
            term *= z / j as f64;
        }
        tail += term;
    }
    (1.0 - tail).max(0.0)
}

/// Erlang quantile by bisection on [`erlang_cdf`].
pub fn erlang_quantile(q: f64, n: usize, theta: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = theta * (n as f64 + 10.0 * (n as f64).sqrt() + 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erlang_cdf(mid, n, theta) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// CDF of the fitted Gamma (shape `alpha_hat`, scale `theta_hat`).
pub fn fitted_gamma_cdf(model: &GammaInterferenceModel, x: f64) -> f64 {
    let g = Gamma::new(model.alpha_hat, 1.0 / model.theta_hat).expect("valid gamma parameters");
    g.cdf(x)
}

/// Largest absolute CDF gap between the fitted Gamma and the exact Erlang law
/// of `count` i.i.d. exponentials at power `p`, over the 1%..99% quantiles.
pub fn erlang_cdf_gap(model: &GammaInterferenceModel, count: usize, p: f64) -> f64 {
    let theta = p / model.lambda;
    (1..=99)
        .map(|q| {
            let x = erlang_quantile(q as f64 / 100.0, count, theta);
            (fitted_gamma_cdf(model, x) - erlang_cdf(x, count, theta)).abs()
        })
        .fold(0.0, f64::max)
}
