//! Distributional machinery for the exponential-Gamma SINR model.
//!
//! A node's SINR is modelled as `X / (Y + eta)` where `X = |g|^2` is
//! exponential with rate `lambda = 1 / (2 sigma^2)` (Rayleigh magnitude) and
//! `Y = sum_j p_j X_j` is the interference sum, approximated by a Gamma
//! distribution fitted with the method of moments. Expectations of
//! `1 / (Y + eta)^k` are evaluated with a truncated expansion around `E[Y]`
//! that uses the central moments of the fitted Gamma.
//!
//! Everything here is a pure function of its inputs.

pub mod oracle;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

/// Largest series order (and moment order) evaluated. Factorials and
/// binomials stay exact in `f64` well past this.
pub const MAX_SERIES_ORDER: usize = 32;

/// Default truncation order of the interference series (moments up to
/// kurtosis).
pub const DEFAULT_TRUNCATION: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no interferers")]
    NoInterferers,
    #[error("interferer power must be finite and positive, got {0}")]
    InvalidPower(f64),
    #[error("rate must be finite and positive, got {0}")]
    InvalidRate(f64),
    #[error("rayleigh scale must be finite and positive, got {0}")]
    InvalidScale(f64),
    #[error("shift must be finite and nonnegative, got {0}")]
    InvalidShift(f64),
    #[error("moment vector needs at least one raw moment")]
    EmptyMoments,
    #[error("moment order must be at least 1")]
    ZeroOrder,
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("quadrature did not converge: {0}")]
    NoConvergence(String),
}

/// Rayleigh prior on channel magnitudes `|g| ~ Rayl(sigma)`, equivalently
/// `|g|^2 ~ exp(lambda)` with `lambda = 1 / (2 sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighPrior {
    sigma: f64,
    lambda: f64,
}

impl RayleighPrior {
    pub fn new(sigma: f64) -> Result<Self, StatsError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(StatsError::InvalidScale(sigma));
        }
        Ok(Self {
            sigma,
            lambda: 1.0 / (2.0 * sigma * sigma),
        })
    }

    pub fn from_rate(lambda: f64) -> Result<Self, StatsError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(StatsError::InvalidRate(lambda));
        }
        Ok(Self {
            sigma: (1.0 / (2.0 * lambda)).sqrt(),
            lambda,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `E[|g|^2] = 1 / lambda`.
    pub fn mean_power_gain(&self) -> f64 {
        1.0 / self.lambda
    }

    /// `E[X^k] = k! / lambda^k` for the exponential power gain.
    pub fn power_gain_moment(&self, k: usize) -> f64 {
        factorial(k) / self.lambda.powi(k as i32)
    }

    /// Draws a channel magnitude `|g|`.
    pub fn sample_magnitude<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let exp = Exp::new(self.lambda).expect("rate validated at construction");
        exp.sample(rng).sqrt()
    }
}

/// Gamma approximation of the interference sum `Y = sum_j p_j X_j` with
/// `X_j ~ exp(lambda)` i.i.d., plus the additive shift `eta` that sits next
/// to `Y` in the SINR denominator.
///
/// The power vector itself is summarised by its count and first two power
/// sums, which is all the method-of-moments fit consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaInterferenceModel {
    pub alpha_hat: f64,
    pub theta_hat: f64,
    pub lambda: f64,
    pub interferers: usize,
    pub power_sum: f64,
    pub power_sq_sum: f64,
    pub eta: f64,
}

impl GammaInterferenceModel {
    /// Fit from power sums. `count` must be the number of strictly positive
    /// powers that produced the sums.
    pub fn from_power_sums(count: usize, power_sum: f64, power_sq_sum: f64, lambda: f64) -> Result<Self, StatsError> {
        if count == 0 {
            return Err(StatsError::NoInterferers);
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(StatsError::InvalidRate(lambda));
        }
        if !(power_sum.is_finite() && power_sum > 0.0 && power_sq_sum > 0.0) {
            return Err(StatsError::InvalidPower(power_sum));
        }
        let mut alpha_hat = power_sum * power_sum / power_sq_sum;
        let theta_hat = power_sq_sum / (lambda * power_sum);
        // (sum p)^2 / sum p^2 lies in [1, count]; clamp away last-ulp excursions.
        alpha_hat = alpha_hat.clamp(1.0, count as f64);
        Ok(Self {
            alpha_hat,
            theta_hat,
            lambda,
            interferers: count,
            power_sum,
            power_sq_sum,
            eta: 0.0,
        })
    }

    pub fn with_shift(mut self, eta: f64) -> Self {
        debug_assert!(eta.is_finite() && eta >= 0.0, "shift must be nonnegative");
        self.eta = eta;
        self
    }

    /// `E[Y] = alpha * theta = (1/lambda) sum p`.
    pub fn mean(&self) -> f64 {
        self.alpha_hat * self.theta_hat
    }

    /// `V[Y] = alpha * theta^2 = (1/lambda^2) sum p^2`.
    pub fn variance(&self) -> f64 {
        self.alpha_hat * self.theta_hat * self.theta_hat
    }

    pub fn raw_moment(&self, n: usize) -> f64 {
        gamma_raw_moment(self, n)
    }

    /// Raw and central moments up to `k_max`.
    pub fn moments(&self, k_max: usize) -> MomentVector {
        let raw: Vec<f64> = (1..=k_max.max(1)).map(|n| self.raw_moment(n)).collect();
        raw_to_central(&raw).expect("non-empty raw moment list")
    }
}

/// Method-of-moments Gamma fit of `Y = sum_j p_j X_j`, `X_j ~ exp(lambda)`:
/// `alpha = (sum p)^2 / sum p^2`, `theta = sum p^2 / (lambda sum p)`.
pub fn fit_gamma_mme(powers: &[f64], lambda: f64) -> Result<GammaInterferenceModel, StatsError> {
    if powers.is_empty() {
        return Err(StatsError::NoInterferers);
    }
    let mut sum = 0.0;
    let mut sq = 0.0;
    for &p in powers {
        if !(p.is_finite() && p > 0.0) {
            return Err(StatsError::InvalidPower(p));
        }
        sum += p;
        sq += p * p;
    }
    GammaInterferenceModel::from_power_sums(powers.len(), sum, sq, lambda)
}

/// `m_n = theta^n prod_{kappa=1..n} (alpha + kappa - 1)`; `m_0 = 1`.
pub fn gamma_raw_moment(model: &GammaInterferenceModel, n: usize) -> f64 {
    let mut m = 1.0;
    for kappa in 1..=n {
        m *= model.theta_hat * (model.alpha_hat + kappa as f64 - 1.0);
    }
    m
}

/// Raw and central moments of a scalar random variable, orders `1..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    raw: Vec<f64>,
    central: Vec<f64>,
}

impl MomentVector {
    pub fn k_max(&self) -> usize {
        self.raw.len()
    }

    /// `E[Z^k]`; `k = 0` gives 1.
    pub fn raw(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.raw[k - 1]
        }
    }

    /// `E[(Z - E[Z])^k]`; 1 at `k = 0` and 0 at `k = 1`.
    pub fn central(&self, k: usize) -> f64 {
        match k {
            0 => 1.0,
            1 => 0.0,
            _ => self.central[k - 1],
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw[0]
    }

    /// Moments of a degenerate variable at `v`.
    pub fn deterministic(v: f64, k_max: usize) -> Self {
        let raw: Vec<f64> = (1..=k_max.max(1)).map(|k| v.powi(k as i32)).collect();
        Self {
            central: vec![0.0; raw.len()],
            raw,
        }
    }
}

/// Binomial conversion `mbar_n = sum_j C(n,j) (-mean)^(n-j) m_j` from the raw
/// moments `[m_1, ..., m_kmax]`.
pub fn raw_to_central(raw: &[f64]) -> Result<MomentVector, StatsError> {
    if raw.is_empty() {
        return Err(StatsError::EmptyMoments);
    }
    let mut central = vec![0.0; raw.len()];
    central_from_raw(raw, &mut central);
    Ok(MomentVector {
        raw: raw.to_vec(),
        central,
    })
}

/// Writes central moments of orders `1..=raw.len()` into `out` (same length).
fn central_from_raw(raw: &[f64], out: &mut [f64]) {
    let mean = raw[0];
    let neg_mean = -mean;
    // Pascal row C(n, .) built incrementally.
    let mut binom = [0.0f64; MAX_SERIES_ORDER + 2];
    binom[0] = 1.0;
    for n in 1..=raw.len() {
        for j in (1..=n).rev() {
            binom[j] += binom[j - 1];
        }
        if n == 1 {
            out[0] = 0.0;
            continue;
        }
        // sum_{j=0..n} C(n,j) (-mean)^(n-j) m_j, Horner-style over j descending.
        let mut acc = 0.0;
        let mut pow = 1.0;
        for j in (0..=n).rev() {
            let m_j = if j == 0 { 1.0 } else { raw[j - 1] };
            acc += binom[j] * pow * m_j;
            pow *= neg_mean;
        }
        out[n - 1] = acc;
    }
}

/// `n!` by iterative product.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Outcome of a truncated expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStatus {
    /// All requested terms were summed.
    Complete,
    /// Terms started growing; the sum stops at the smallest-magnitude term,
    /// which has the given order.
    TruncatedAtOptimalOrder { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub status: SeriesStatus,
}

impl SeriesValue {
    pub fn is_truncated(&self) -> bool {
        matches!(self.status, SeriesStatus::TruncatedAtOptimalOrder { .. })
    }
}

/// Interference as seen in an SINR denominator: either a fitted Gamma sum or
/// no active interferer at all (the MME is undefined for an empty sum).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interference {
    Silent { eta: f64 },
    Gamma(GammaInterferenceModel),
}

impl Interference {
    pub fn eta(&self) -> f64 {
        match self {
            Interference::Silent { eta } => *eta,
            Interference::Gamma(m) => m.eta,
        }
    }

    /// `E[1 / (Y + eta)^k]`.
    pub fn inverse_moment(&self, k: usize, truncation: usize) -> SeriesValue {
        match self {
            Interference::Silent { eta } => SeriesValue {
                value: eta.powi(-(k as i32)),
                status: SeriesStatus::Complete,
            },
            Interference::Gamma(m) => inverse_shifted_moment(m, k, truncation),
        }
    }
}

/// `E[1/(Y+eta)] ~ (1/(E[Y]+eta)) sum_{n=0..T} (-1)^n mbar_n / (E[Y]+eta)^n`.
pub fn expected_inverse_shifted(model: &GammaInterferenceModel, truncation: usize) -> SeriesValue {
    inverse_shifted_moment(model, 1, truncation)
}

/// `E[1/(Y+eta)^k] ~ (E[Y]+eta)^-k sum_{n=0..T} (-1)^n C(k+n-1, n) mbar_n / (E[Y]+eta)^n`.
///
/// The expansion is asymptotic on the Gamma tail. Odd central moments are
/// small next to the even ones, so term magnitudes alternate; divergence
/// onset is detected when a term exceeds the previous term of the same
/// parity (order 3 is compared with order 2, the order-1 term being
/// identically zero). The sum then stops before the growing term and the
/// status records the last order used. Truncation is capped at
/// [`MAX_SERIES_ORDER`].
pub fn inverse_shifted_moment(model: &GammaInterferenceModel, k: usize, truncation: usize) -> SeriesValue {
    debug_assert!(k >= 1);
    let t = truncation.min(MAX_SERIES_ORDER);
    let base = model.mean() + model.eta;
    let base_k = base.powi(-(k as i32));
    if t < 2 {
        // mbar_1 = 0, so orders 0 and 1 contribute only the leading term.
        return SeriesValue {
            value: base_k,
            status: SeriesStatus::Complete,
        };
    }

    let mut raw = [0.0f64; MAX_SERIES_ORDER];
    let mut m = 1.0;
    for (idx, slot) in raw.iter_mut().take(t).enumerate() {
        m *= model.theta_hat * (model.alpha_hat + idx as f64);
        *slot = m;
    }
    let mut central = [0.0f64; MAX_SERIES_ORDER];
    central_from_raw(&raw[..t], &mut central[..t]);

    let inv_base = 1.0 / base;
    let mut sum = 1.0;
    // |t_{n-1}| and |t_{n-2}|
    let mut mags = [0.0f64; 2];
    // C(k+n-1, n) updated multiplicatively: C(k+n-1,n) = C(k+n-2,n-1) (k+n-1)/n.
    let mut coeff = 1.0;
    let mut scale = 1.0;
    let mut status = SeriesStatus::Complete;
    for n in 1..=t {
        coeff *= (k + n - 1) as f64 / n as f64;
        scale *= inv_base;
        if n == 1 {
            continue;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * coeff * central[n - 1] * scale;
        let mag = term.abs();
        let reference = match n {
            2 => 1.0,
            3 => mags[0],
            _ => mags[1],
        };
        if mag > reference {
            status = SeriesStatus::TruncatedAtOptimalOrder {
                order: if n == 2 { 0 } else { n - 1 },
            };
            break;
        }
        sum += term;
        mags = [mag, mags[0]];
    }
    SeriesValue {
        value: base_k * sum,
        status,
    }
}

/// k-th raw moment of the SINR payoff `p X / (Y + eta)` with `X ~ exp(lambda)`:
/// `p^k (k!/lambda^k) E[1/(Y+eta)^k]`.
pub fn sinr_raw_moment(
    k: usize,
    prior: &RayleighPrior,
    p_i: f64,
    model: &GammaInterferenceModel,
    truncation: usize,
) -> SeriesValue {
    sinr_moment_with_prior(k, prior, p_i, &Interference::Gamma(*model), truncation)
}

/// As [`sinr_raw_moment`], also accepting a silent interference pool.
pub fn sinr_moment_with_prior(
    k: usize,
    prior: &RayleighPrior,
    p_i: f64,
    interference: &Interference,
    truncation: usize,
) -> SeriesValue {
    let inv = interference.inverse_moment(k, truncation);
    SeriesValue {
        value: p_i.powi(k as i32) * prior.power_gain_moment(k) * inv.value,
        status: inv.status,
    }
}

/// k-th raw moment of `|g|^2 p / (Y + eta)` when the desired gain is known.
pub fn sinr_moment_known_gain(
    k: usize,
    gain: f64,
    p_i: f64,
    interference: &Interference,
    truncation: usize,
) -> SeriesValue {
    let inv = interference.inverse_moment(k, truncation);
    SeriesValue {
        value: (gain * gain * p_i).powi(k as i32) * inv.value,
        status: inv.status,
    }
}
