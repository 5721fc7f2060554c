//! Population size estimators.
//!
//! Every estimator returns an [`EstimateResult`]. Data that cannot support an
//! estimate (no singletons, too few ratio points, a nonpositive coverage
//! estimate, a failed likelihood search) yields a result marked invalid with
//! an [`InvalidReason`]; `Err` is reserved for unusable arguments such as a
//! truncation point below 2.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::FrequencyTable;
use crate::inference::variance_wlrm;
use crate::nb::NbParams;
use crate::scalar::Scalar;
use crate::wls::{wls_fit, Design, RegressionFit, WeightScheme};
use crate::ztnb::{self, ZtnbData, ZtnbFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "WLRM", alias = "wlrm")]
    Wlrm,
    #[serde(rename = "HM", alias = "hm")]
    Hm,
    #[serde(rename = "Chao", alias = "chao")]
    Chao,
    #[serde(rename = "ChaoBunge", alias = "chao-bunge", alias = "chao_bunge")]
    ChaoBunge,
    #[serde(rename = "ZTNB_ML", alias = "ztnb-ml", alias = "ztnb_ml", alias = "ml")]
    ZtnbMl,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Wlrm,
        Method::Hm,
        Method::Chao,
        Method::ChaoBunge,
        Method::ZtnbMl,
    ];

    /// Name used in reports and JSON.
    pub fn label(self) -> &'static str {
        match self {
            Method::Wlrm => "WLRM",
            Method::Hm => "HM",
            Method::Chao => "Chao",
            Method::ChaoBunge => "ChaoBunge",
            Method::ZtnbMl => "ZTNB_ML",
        }
    }

    /// Name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            Method::Wlrm => "wlrm",
            Method::Hm => "hm",
            Method::Chao => "chao",
            Method::ChaoBunge => "chao-bunge",
            Method::ZtnbMl => "ztnb-ml",
        }
    }

    pub fn uses_weights(self) -> bool {
        matches!(self, Method::Wlrm | Method::Hm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.cli_name() == key || m.label().to_ascii_lowercase().replace('_', "-") == key)
            .or(match key.as_str() {
                "cb" => Some(Method::ChaoBunge),
                "ml" | "ztnb" => Some(Method::ZtnbMl),
                _ => None,
            })
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InvalidReason {
    /// `f_1 = 0`.
    NoSingletons,
    /// `f_2 = 0`.
    NoDoubletons,
    /// No units with counts in `2..=m`.
    NoRepeatedUnits,
    TooFewPoints,
    SingularFit,
    NonpositiveTau,
    ImpliedParamsOutOfRange,
    InsufficientData,
    OptimizerFailed,
    NonFiniteLikelihood,
}

impl InvalidReason {
    pub fn describe(self) -> &'static str {
        match self {
            InvalidReason::NoSingletons => "no units observed exactly once",
            InvalidReason::NoDoubletons => "no units observed exactly twice",
            InvalidReason::NoRepeatedUnits => "no units observed between 2 and m times",
            InvalidReason::TooFewPoints => "fewer than two ratio points below m",
            InvalidReason::SingularFit => "weighted normal equations are singular",
            InvalidReason::NonpositiveTau => "estimated coverage tau is not positive",
            InvalidReason::ImpliedParamsOutOfRange => {
                "implied negative binomial parameters out of range"
            }
            InvalidReason::InsufficientData => "too little data for maximum likelihood",
            InvalidReason::OptimizerFailed => "likelihood search failed or hit the parameter bounds",
            InvalidReason::NonFiniteLikelihood => "likelihood is not finite",
        }
    }
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EstimateResult<T> {
    pub method: Method,
    /// Observed units, counts above `m` and any collapsed tail included.
    pub n_observed: T,
    pub f0_hat: Option<T>,
    /// `f0_hat + n_observed`. Present on some invalid results (a negative
    /// Chao–Bunge value, for instance) so it can still be reported.
    pub n_hat: Option<T>,
    pub se: Option<T>,
    /// Standard error from the covariance without dispersion scaling.
    pub se_unscaled: Option<T>,
    pub m_used: u32,
    pub invalid: Option<InvalidReason>,
    pub implied_nb: Option<NbParams<T>>,
    pub fit: Option<RegressionFit<T>>,
    pub ztnb: Option<ZtnbFit<T>>,
}

impl<T: Scalar> EstimateResult<T> {
    fn empty(method: Method, n_observed: T, m_used: u32) -> Self {
        Self {
            method,
            n_observed,
            f0_hat: None,
            n_hat: None,
            se: None,
            se_unscaled: None,
            m_used,
            invalid: None,
            implied_nb: None,
            fit: None,
            ztnb: None,
        }
    }

    fn invalid(method: Method, n_observed: T, m_used: u32, reason: InvalidReason) -> Self {
        Self {
            invalid: Some(reason),
            ..Self::empty(method, n_observed, m_used)
        }
    }

    pub fn is_valid(&self) -> bool {
        self.invalid.is_none()
    }

    /// `n_hat` when the result is valid.
    pub fn valid_n_hat(&self) -> Option<T> {
        if self.is_valid() {
            self.n_hat
        } else {
            None
        }
    }
}

/// Smallest `m >= 2` with `f_m > 0` and `f_{m+1} = 0`, or the largest count.
pub fn default_cutoff<T: Scalar>(table: &FrequencyTable<T>) -> u32 {
    let max = table.max_count();
    (2..max)
        .find(|&m| table.freq(m) > T::zero() && table.freq(m + 1) == T::zero())
        .unwrap_or(max)
}

fn check_m<T: Scalar>(table: &FrequencyTable<T>, m: u32) -> Result<u32> {
    table.check_truncation(m)?;
    Ok(m.min(table.max_count()))
}

/// Weighted log-linear ratio regression: `f0 = f1 exp(-γ)`.
pub fn wlrm_estimate<T: Scalar>(
    table: &FrequencyTable<T>,
    m: u32,
    scheme: WeightScheme,
) -> Result<EstimateResult<T>> {
    regression_estimate(table, m, scheme, Design::LinearInX)
}

/// Hyperbolic model: `f0 = f1 / exp(γ' + δ')`.
pub fn hm_estimate<T: Scalar>(
    table: &FrequencyTable<T>,
    m: u32,
    scheme: WeightScheme,
) -> Result<EstimateResult<T>> {
    regression_estimate(table, m, scheme, Design::HyperbolicInX)
}

fn regression_estimate<T: Scalar>(
    table: &FrequencyTable<T>,
    m: u32,
    scheme: WeightScheme,
    design: Design,
) -> Result<EstimateResult<T>> {
    let method = match design {
        Design::LinearInX => Method::Wlrm,
        Design::HyperbolicInX => Method::Hm,
    };
    let m_used = check_m(table, m)?;
    let n = table.n();
    let f1 = table.freq(1);
    if f1 <= T::zero() {
        return Ok(EstimateResult::invalid(method, n, m_used, InvalidReason::NoSingletons));
    }
    let points = table.ratio_points(m_used);
    let fit = match wls_fit(&points, table, scheme, design) {
        Ok(fit) => fit,
        Err(Error::TooFewPoints(_)) => {
            return Ok(EstimateResult::invalid(method, n, m_used, InvalidReason::TooFewPoints))
        }
        Err(Error::SingularNormalEquations | Error::SingularWeights) => {
            return Ok(EstimateResult::invalid(method, n, m_used, InvalidReason::SingularFit))
        }
        Err(e) => return Err(e),
    };
    // The fitted log ratio at x = 0 is log(f1 / f0).
    let f0 = f1 / fit.predict_log_ratio(0).exp();
    let variance = variance_wlrm(&fit, f1, n);
    Ok(EstimateResult {
        f0_hat: Some(f0),
        n_hat: Some(f0 + n),
        se: Some(variance.se_n),
        se_unscaled: Some(variance.se_n_unscaled),
        implied_nb: implied_nb_params(&fit).ok(),
        fit: Some(fit),
        ..EstimateResult::empty(method, n, m_used)
    })
}

/// Chao's lower bound `n + f1² / (2 f2)`.
pub fn chao_estimate<T: Scalar>(table: &FrequencyTable<T>) -> EstimateResult<T> {
    let n = table.n();
    let m_used = table.max_count().min(2);
    let (f1, f2) = (table.freq(1), table.freq(2));
    if f2 <= T::zero() {
        return EstimateResult::invalid(Method::Chao, n, m_used, InvalidReason::NoDoubletons);
    }
    let f0 = f1 * f1 / (T::lit(2.0) * f2);
    EstimateResult {
        f0_hat: Some(f0),
        n_hat: Some(n + f0),
        ..EstimateResult::empty(Method::Chao, n, m_used)
    }
}

/// Estimated coverage `1 - f1 Σ j² f_j / (Σ j f_j)²` over `j <= m`.
pub fn chao_bunge_tau<T: Scalar>(table: &FrequencyTable<T>, m: u32) -> T {
    let (mut s1, mut s2) = (T::zero(), T::zero());
    for (j, f) in table.iter().take_while(|&(j, _)| j <= m) {
        let j = T::from_count(j);
        s1 += j * f;
        s2 += j * j * f;
    }
    T::one() - table.freq(1) * s2 / (s1 * s1)
}

/// Chao–Bunge gamma-Poisson coverage estimator at truncation `m`.
///
/// A nonpositive coverage estimate marks the result invalid but the raw
/// (possibly negative) `n_hat` is kept.
pub fn chao_bunge_estimate<T: Scalar>(
    table: &FrequencyTable<T>,
    m: u32,
) -> Result<EstimateResult<T>> {
    let m_used = check_m(table, m)?;
    let n = table.n();
    let method = Method::ChaoBunge;
    if table.freq(1) <= T::zero() {
        return Ok(EstimateResult::invalid(method, n, m_used, InvalidReason::NoSingletons));
    }
    let repeated = table.total_up_to(m_used) - table.freq(1);
    if repeated <= T::zero() {
        return Ok(EstimateResult::invalid(method, n, m_used, InvalidReason::NoRepeatedUnits));
    }
    let tau = chao_bunge_tau(table, m_used);
    let n_hat = repeated / tau + table.total_above(m_used);
    Ok(EstimateResult {
        f0_hat: Some(n_hat - n),
        n_hat: Some(n_hat),
        invalid: (tau <= T::zero() || !n_hat.is_finite()).then_some(InvalidReason::NonpositiveTau),
        ..EstimateResult::empty(method, n, m_used)
    })
}

/// Minimum number of units at or below `m` for the likelihood search.
pub const ZTNB_MIN_UNITS: f64 = 10.0;

/// Zero-truncated negative binomial maximum likelihood on counts `<= m`;
/// units above `m` are added back.
pub fn ztnb_mle_estimate<T: Scalar>(
    table: &FrequencyTable<T>,
    m: u32,
) -> Result<EstimateResult<T>> {
    let m_used = check_m(table, m)?;
    let n = table.n();
    let method = Method::ZtnbMl;
    let data = ZtnbData::new(table, m_used);
    if data.distinct() < 2 || data.total() < ZTNB_MIN_UNITS {
        return Ok(EstimateResult::invalid(method, n, m_used, InvalidReason::InsufficientData));
    }
    let seed = wlrm_estimate(table, m_used, WeightScheme::DiagonalApprox)
        .ok()
        .and_then(|e| e.implied_nb)
        .map(|nb| (nb.k.to_f64_lossy(), nb.p.to_f64_lossy()));
    let fit = ztnb::fit(&data, seed);
    if !fit.log_likelihood.is_finite() {
        return Ok(EstimateResult::invalid(method, n, m_used, InvalidReason::NonFiniteLikelihood));
    }
    let above = table.total_above(m_used).to_f64_lossy();
    let n_hat = data.total() / fit.p_positive() + above;
    let ok = fit.converged && !fit.on_boundary && n_hat.is_finite();
    let fit_t = ZtnbFit {
        k: T::lit(fit.k),
        p: T::lit(fit.p),
        log_likelihood: T::lit(fit.log_likelihood),
        gradient: [T::lit(fit.gradient[0]), T::lit(fit.gradient[1])],
        converged: fit.converged,
        on_boundary: fit.on_boundary,
        iterations: fit.iterations,
    };
    Ok(EstimateResult {
        f0_hat: Some(T::lit(n_hat) - n),
        n_hat: Some(T::lit(n_hat)),
        invalid: (!ok).then_some(InvalidReason::OptimizerFailed),
        implied_nb: fit_t.params(),
        ztnb: Some(fit_t),
        ..EstimateResult::empty(method, n, m_used)
    })
}

/// Negative binomial parameters implied by a ratio regression.
///
/// For the linear design `γ = log(1-p) + log k` and `δ = 1/k`; for the
/// hyperbolic design `δ' = k - 1` and `γ' = log(1-p)`.
pub fn implied_nb_params<T: Scalar>(
    fit: &RegressionFit<T>,
) -> std::result::Result<NbParams<T>, InvalidReason> {
    let (k, p) = match fit.design {
        Design::LinearInX => {
            if fit.delta_hat <= T::zero() {
                return Err(InvalidReason::ImpliedParamsOutOfRange);
            }
            (
                T::one() / fit.delta_hat,
                T::one() - fit.gamma_hat.exp() * fit.delta_hat,
            )
        }
        Design::HyperbolicInX => (
            T::one() + fit.delta_hat,
            T::one() - fit.gamma_hat.exp(),
        ),
    };
    NbParams::new(k, p).map_err(|_| InvalidReason::ImpliedParamsOutOfRange)
}

/// Dispatches to the estimator for `method`. `m` is ignored by Chao.
pub fn estimate<T: Scalar>(
    table: &FrequencyTable<T>,
    method: Method,
    m: u32,
    scheme: WeightScheme,
) -> Result<EstimateResult<T>> {
    match method {
        Method::Wlrm => wlrm_estimate(table, m, scheme),
        Method::Hm => hm_estimate(table, m, scheme),
        Method::Chao => Ok(chao_estimate(table)),
        Method::ChaoBunge => chao_bunge_estimate(table, m),
        Method::ZtnbMl => ztnb_mle_estimate(table, m),
    }
}
