//! Zero-truncated negative binomial maximum likelihood.
//!
//! The search runs in `(ln k, logit p)` inside a box, from a fixed grid of
//! starts, and finishes with Newton steps on the analytic derivatives.

use serde::{Deserialize, Serialize};

use crate::freq::FrequencyTable;
use crate::nb::NbParams;
use crate::scalar::Scalar;
use crate::simplex::{nelder_mead, SimplexOptions};
use crate::special::{ln_gamma, ln_rising_factorial};

const LN_K_BOUNDS: (f64, f64) = (-9.210_340_371_976_184, 9.210_340_371_976_184); // ln 1e-4, ln 1e4
const LOGIT_P_BOUNDS: (f64, f64) = (-30.0, 30.0);
const BOUNDARY_MARGIN: f64 = 1e-3;
const START_K: [f64; 3] = [0.25, 1.0, 4.0];
const START_P: [f64; 2] = [0.3, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ZtnbFit<T> {
    pub k: T,
    pub p: T,
    pub log_likelihood: T,
    /// Analytic gradient in `(k, p)` at the returned point.
    pub gradient: [T; 2],
    pub converged: bool,
    pub on_boundary: bool,
    pub iterations: usize,
}

impl<T: Scalar> ZtnbFit<T> {
    pub fn params(&self) -> Option<NbParams<T>> {
        NbParams::new(self.k, self.p).ok()
    }

    /// `P(X > 0) = 1 - p^k`.
    pub fn p_positive(&self) -> T {
        -(self.k * self.p.ln()).exp_m1()
    }
}

/// Sufficient statistics of the data `x <= m`.
#[derive(Debug, Clone)]
pub(crate) struct ZtnbData {
    cells: Vec<(u32, f64)>,
    s: f64,
    x_total: f64,
    ln_fact: f64,
}

impl ZtnbData {
    pub(crate) fn new<T: Scalar>(table: &FrequencyTable<T>, m: u32) -> Self {
        let cells: Vec<(u32, f64)> = table
            .iter()
            .take_while(|&(x, _)| x <= m)
            .map(|(x, f)| (x, f.to_f64_lossy()))
            .collect();
        let s = cells.iter().map(|c| c.1).sum();
        let x_total = cells.iter().map(|&(x, f)| x as f64 * f).sum();
        let ln_fact = cells
            .iter()
            .map(|&(x, f)| f * ln_gamma(x as f64 + 1.0))
            .sum();
        Self {
            cells,
            s,
            x_total,
            ln_fact,
        }
    }

    pub(crate) fn total(&self) -> f64 {
        self.s
    }

    pub(crate) fn distinct(&self) -> usize {
        self.cells.len()
    }

    fn ll_parts(&self, k: f64, ln_p: f64, ln_q: f64) -> f64 {
        let rising: f64 = self
            .cells
            .iter()
            .map(|&(x, f)| f * ln_rising_factorial(k, x))
            .sum();
        let ln_positive = (-(k * ln_p).exp_m1()).ln();
        rising - self.ln_fact + self.s * k * ln_p + self.x_total * ln_q - self.s * ln_positive
    }

    fn ll(&self, k: f64, p: f64) -> f64 {
        self.ll_parts(k, p.ln(), (-p).ln_1p())
    }

    fn ll_theta(&self, theta: &[f64]) -> f64 {
        let k = theta[0].exp();
        let ln_p = -softplus(-theta[1]);
        let ln_q = -softplus(theta[1]);
        self.ll_parts(k, ln_p, ln_q)
    }

    fn gradient(&self, k: f64, p: f64) -> [f64; 2] {
        let s = self.s;
        let ln_p = p.ln();
        let one_minus_pk = -(k * ln_p).exp_m1();
        let digamma_sum: f64 = self
            .cells
            .iter()
            .map(|&(x, f)| f * (0..x).map(|j| 1.0 / (k + j as f64)).sum::<f64>())
            .sum();
        let pk = (k * ln_p).exp();
        let g_k = digamma_sum + s * ln_p / one_minus_pk;
        let g_p = s * k / p - self.x_total / (1.0 - p) + s * k * pk / p / one_minus_pk;
        [g_k, g_p]
    }

    fn hessian(&self, k: f64, p: f64) -> [[f64; 2]; 2] {
        let s = self.s;
        let ln_p = p.ln();
        let pk = (k * ln_p).exp();
        let u = -(k * ln_p).exp_m1();
        let trigamma_sum: f64 = self
            .cells
            .iter()
            .map(|&(x, f)| {
                f * (0..x)
                    .map(|j| (k + j as f64).powi(-2))
                    .sum::<f64>()
            })
            .sum();
        let h_kk = -trigamma_sum + s * ln_p * ln_p * pk / (u * u);
        let h_kp = s * (u / p + k * pk / p * ln_p) / (u * u);
        let pk1 = pk / p;
        let pk2 = pk1 / p;
        let h_pp = -s * k / (p * p) - self.x_total / ((1.0 - p) * (1.0 - p))
            + s * k * ((k - 1.0) * pk2 * u + k * pk1 * pk1) / (u * u);
        [[h_kk, h_kp], [h_kp, h_pp]]
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn inv_logit(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Zero-truncated NB log-likelihood of the cells `x <= m`.
pub fn ztnb_log_likelihood<T: Scalar>(table: &FrequencyTable<T>, m: u32, k: T, p: T) -> T {
    let data = ZtnbData::new(table, m);
    T::lit(data.ll(k.to_f64_lossy(), p.to_f64_lossy()))
}

fn inside(k: f64, p: f64) -> bool {
    let (lo, hi) = LN_K_BOUNDS;
    let t = logit(p);
    k.is_finite() && p > 0.0 && p < 1.0 && (lo..=hi).contains(&k.ln()) && (LOGIT_P_BOUNDS.0..=LOGIT_P_BOUNDS.1).contains(&t)
}

/// Newton ascent with step halving; stops when the step no longer moves the point.
fn polish(data: &ZtnbData, mut k: f64, mut p: f64) -> (f64, f64) {
    let mut ll = data.ll(k, p);
    for _ in 0..100 {
        let g = data.gradient(k, p);
        let h = data.hessian(k, p);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if !(h[0][0] < 0.0 && det > 0.0) {
            break;
        }
        let dk = -(h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let dp = -(-h[1][0] * g[0] + h[0][0] * g[1]) / det;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let (nk, np) = (k + t * dk, p + t * dp);
            if inside(nk, np) {
                let nll = data.ll(nk, np);
                if nll >= ll - 1e-13 * ll.abs() {
                    moved = (nk - k).abs() > 0.0 || (np - p).abs() > 0.0;
                    k = nk;
                    p = np;
                    ll = nll.max(ll);
                    break;
                }
            }
            t *= 0.5;
        }
        let small = (t * dk).abs() <= 1e-15 * k.max(1.0) && (t * dp).abs() <= 1e-16;
        if !moved || small {
            break;
        }
    }
    (k, p)
}

/// Maximises the likelihood over `x <= m`; `seed` adds one start to the grid.
pub(crate) fn fit(data: &ZtnbData, seed: Option<(f64, f64)>) -> ZtnbFit<f64> {
    let lower = [LN_K_BOUNDS.0, LOGIT_P_BOUNDS.0];
    let upper = [LN_K_BOUNDS.1, LOGIT_P_BOUNDS.1];
    let mut starts: Vec<[f64; 2]> = START_K
        .iter()
        .flat_map(|&k| START_P.iter().map(move |&p| [k.ln(), logit(p)]))
        .collect();
    if let Some((k, p)) = seed {
        if k > 0.0 && p > 0.0 && p < 1.0 && k.is_finite() {
            starts.push([k.ln(), logit(p)]);
        }
    }

    let objective = |theta: &[f64]| -data.ll_theta(theta);
    let best = starts
        .iter()
        .map(|s| {
            nelder_mead(
                objective,
                s,
                &[0.5, 0.5],
                &lower,
                &upper,
                SimplexOptions::default(),
            )
        })
        .min_by(|a, b| a.fx.total_cmp(&b.fx))
        .expect("at least one start");

    let theta = &best.x;
    let on_boundary = (0..2).any(|i| {
        theta[i] - lower[i] < BOUNDARY_MARGIN || upper[i] - theta[i] < BOUNDARY_MARGIN
    });
    let (mut k, mut p) = (theta[0].exp(), inv_logit(theta[1]));
    if !on_boundary {
        (k, p) = polish(data, k, p);
    }
    ZtnbFit {
        k,
        p,
        log_likelihood: data.ll(k, p),
        gradient: data.gradient(k, p),
        converged: best.converged,
        on_boundary,
        iterations: best.iterations,
    }
}
