//! Standard errors, chi-square goodness of fit and the parametric bootstrap.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate, wlrm_estimate, Method};
use crate::freq::FrequencyTable;
use crate::scalar::Scalar;
use crate::simulation::replicate_rng;
use crate::special::chisq_pvalue;
use crate::wls::{Design, RegressionFit, WeightScheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct VarianceEstimate<T> {
    pub var_f0: T,
    pub var_n: T,
    pub se_n: T,
    /// `se_n` recomputed from the covariance without dispersion scaling.
    pub se_n_unscaled: T,
}

/// Plug-in variance of `N = f0 + n` where `f0 = f1 exp(-η)`:
/// `Var(N) = n f0 / N + exp(-2η) f1 (Var(η) f1 + 1)`.
pub fn variance_from_intercept<T: Scalar>(eta: T, var_eta: T, f1: T, n: T) -> (T, T) {
    let e = (-eta).exp();
    let f0 = f1 * e;
    let var_f0 = e * e * f1 * (var_eta * f1 + T::one());
    let var_n = n * f0 / (f0 + n) + var_f0;
    (var_f0, var_n)
}

/// `η` and `Var(η)` under `cov`: the intercept for the linear design,
/// `γ' + δ'` for the hyperbolic one.
fn extrapolated_intercept<T: Scalar>(fit: &RegressionFit<T>, cov: &[[T; 2]; 2]) -> (T, T) {
    match fit.design {
        Design::LinearInX => (fit.gamma_hat, cov[0][0]),
        Design::HyperbolicInX => (
            fit.gamma_hat + fit.delta_hat,
            cov[0][0] + cov[1][1] + cov[0][1] + cov[1][0],
        ),
    }
}

/// Approximate variance of the regression estimate of `N`.
///
/// `f1` is the singleton count and `n` the observed total including units
/// above the truncation point.
pub fn variance_wlrm<T: Scalar>(fit: &RegressionFit<T>, f1: T, n: T) -> VarianceEstimate<T> {
    let (eta, var_eta) = extrapolated_intercept(fit, &fit.cov_params);
    let (var_f0, var_n) = variance_from_intercept(eta, var_eta.max(T::zero()), f1, n);
    let (_, var_u) = extrapolated_intercept(fit, &fit.cov_unscaled);
    let (_, var_n_unscaled) = variance_from_intercept(eta, var_u.max(T::zero()), f1, n);
    VarianceEstimate {
        var_f0,
        var_n,
        se_n: var_n.sqrt(),
        se_n_unscaled: var_n_unscaled.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GofResult<T> {
    pub chisq: T,
    /// `m - 2`; zero when no degrees of freedom remain.
    pub df: u32,
    pub p_value: Option<T>,
    pub m: u32,
    /// `f̂_x` for `x = 0..=m`.
    pub fitted: BTreeMap<u32, T>,
    /// `(f_x - f̂_x) / sqrt(f̂_x)` for `x = 1..=m`.
    pub residuals: BTreeMap<u32, T>,
    /// Cells in `1..=m` with `f_x = 0`; they enter the statistic with observed zero.
    pub gap_cells: Vec<u32>,
}

impl<T: Scalar> GofResult<T> {
    pub fn f0_hat(&self) -> T {
        self.fitted[&0]
    }

    /// `Σ_{x=0}^{m} f̂_x`.
    pub fn fitted_total(&self) -> T {
        self.fitted.values().copied().sum()
    }
}

/// Fitted frequencies from the recursion `f̂_{x+1} = f̂_x exp(ŷ_x) / (x+1)`
/// anchored at `f̂_1 = f_1`, with `f̂_0 = f_1 / exp(ŷ_0)`.
pub fn fitted_frequencies<T: Scalar>(fit: &RegressionFit<T>, f1: T, m: u32) -> BTreeMap<u32, T> {
    let mut fitted = BTreeMap::new();
    fitted.insert(0, f1 / fit.predict_log_ratio(0).exp());
    let mut current = f1;
    fitted.insert(1, current);
    for x in 1..m {
        current = current * fit.predict_log_ratio(x).exp() / T::from_count(x + 1);
        fitted.insert(x + 1, current);
    }
    fitted
}

/// Pearson chi-square over `x = 1..=m` against the fitted recursion.
pub fn gof_chisq<T: Scalar>(
    table: &FrequencyTable<T>,
    fit: &RegressionFit<T>,
    m: u32,
) -> Result<GofResult<T>> {
    let f1 = table.freq(1);
    if f1 <= T::zero() {
        return Err(Error::Precondition(
            "goodness of fit needs at least one singleton".into(),
        ));
    }
    if m < 2 {
        return Err(Error::InvalidTruncation { m, min: 2 });
    }
    let fitted = fitted_frequencies(fit, f1, m);
    let mut residuals = BTreeMap::new();
    let mut gap_cells = Vec::new();
    let mut chisq = T::zero();
    for x in 1..=m {
        let observed = table.freq(x);
        let expected = fitted[&x];
        if observed == T::zero() {
            gap_cells.push(x);
        }
        let r = (observed - expected) / expected.sqrt();
        chisq += r * r;
        residuals.insert(x, r);
    }
    let df = m - 2;
    let p_value = (df > 0).then(|| chisq_pvalue(chisq, df));
    Ok(GofResult {
        chisq,
        df,
        p_value,
        m,
        fitted,
        residuals,
        gap_cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Successful replicate estimates in replicate order.
    pub replicates: Vec<f64>,
    pub se: f64,
    pub percentile_ci: Option<(f64, f64)>,
    pub level: f64,
    pub b: usize,
    pub seed: u64,
    pub failures: usize,
    /// More than 20% of replicates failed.
    pub flagged: bool,
}

/// Linear-interpolation sample quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample standard deviation with `n - 1` denominator; zero below two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Draws cell counts of a multinomial by successive conditional binomials.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, size: u64, probs: &[f64]) -> Vec<u64> {
    let mut remaining = size;
    let mut mass_left: f64 = probs.iter().sum();
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() {
            out.push(remaining);
            break;
        }
        let draw = if remaining == 0 || p <= 0.0 {
            0
        } else {
            let q = (p / mass_left).clamp(0.0, 1.0);
            Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng)
        };
        out.push(draw);
        remaining -= draw;
        mass_left -= p;
    }
    out
}

/// Parametric bootstrap of the WLRM estimate.
///
/// Each replicate draws `round(N̂) - (units above m)` units over the cells
/// `0..=m` with probabilities proportional to the fitted frequencies, drops
/// the zero cell, restores the observed counts above `m` and refits at the
/// same `m`. Replicate `i` uses stream `i` of the generator seeded by `seed`.
pub fn parametric_bootstrap<T: Scalar>(
    table: &FrequencyTable<T>,
    m: u32,
    scheme: WeightScheme,
    b: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapResult> {
    bootstrap_method(table, m, scheme, Method::Wlrm, m, b, seed, level)
}

/// As [`parametric_bootstrap`], but each resample is re-estimated with
/// `method` at cutoff `method_m`. The resampling model is always the WLRM fit
/// at `m`; this gives standard errors for estimators without a closed form.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_method<T: Scalar>(
    table: &FrequencyTable<T>,
    m: u32,
    scheme: WeightScheme,
    method: Method,
    method_m: u32,
    b: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapResult> {
    if b == 0 {
        return Err(Error::Precondition("bootstrap needs at least one replicate".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Precondition(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let mut t64: FrequencyTable<f64> =
        FrequencyTable::new(table.iter().map(|(x, f)| (x, f.to_f64_lossy())))?;
    if let Some(tl) = table.tail() {
        t64 = t64.with_tail(tl.above, tl.mass.to_f64_lossy())?;
    }
    let table = t64;
    let est = wlrm_estimate(&table, m, scheme)?;
    let (Some(n_hat), Some(fit)) = (est.valid_n_hat(), est.fit.as_ref()) else {
        return Err(Error::Precondition(format!(
            "WLRM fit failed: {}",
            est.invalid.map_or("unknown", |r| r.describe())
        )));
    };
    let m_used = est.m_used;
    let fitted = fitted_frequencies(fit, table.freq(1), m_used);
    let probs: Vec<f64> = fitted.values().copied().collect();
    let above: Vec<(u32, f64)> = table.iter().filter(|&(x, _)| x > m_used).collect();
    let tail = table.tail();
    let size = (n_hat.round() - table.total_above(m_used)).max(0.0) as u64;

    let outcomes: Vec<Option<f64>> = (0..b as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let counts = multinomial(&mut rng, size, &probs);
            let cells = counts
                .iter()
                .enumerate()
                .skip(1)
                .map(|(x, &c)| (x as u32, c as f64))
                .chain(above.iter().copied());
            let mut t = FrequencyTable::new(cells).ok()?;
            if let Some(tl) = tail {
                t = t.with_tail(tl.above, tl.mass).ok()?;
            }
            estimate(&t, method, method_m, scheme).ok()?.valid_n_hat()
        })
        .collect();

    let replicates: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let failures = b - replicates.len();
    let percentile_ci = (!replicates.is_empty()).then(|| {
        let mut sorted = replicates.clone();
        sorted.sort_by(f64::total_cmp);
        let alpha = (1.0 - level) / 2.0;
        (quantile_sorted(&sorted, alpha), quantile_sorted(&sorted, 1.0 - alpha))
    });
    Ok(BootstrapResult {
        se: sample_sd(&replicates),
        percentile_ci,
        level,
        b,
        seed,
        failures,
        flagged: failures as f64 > 0.2 * b as f64,
        replicates,
    })
}
