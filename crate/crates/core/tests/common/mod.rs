//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use zerofreq::simulation::{replicate_rng, sample_nb};
use zerofreq::special::chisq_pvalue;
use zerofreq::wls::weight_covariance;
use zerofreq::{ztnb_log_likelihood, Design, FrequencyTable, NbParams, WeightScheme};

/// Dense WLS through an explicit inverse of the weight covariance.
/// Returns `(gamma, delta, (X'WX)^-1)`.
pub fn dense_wls(t: &FrequencyTable<f64>, m: u32, scheme: WeightScheme, design: Design) -> (f64, f64, DMatrix<f64>) {
    let pts = t.ratio_points(m);
    let n = pts.len();
    let cov = weight_covariance(t, &pts, scheme).unwrap().to_dense();
    let c = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
    let w = c.try_inverse().expect("invertible covariance");
    let x = DMatrix::from_fn(n, 2, |i, j| {
        if j == 0 {
            1.0
        } else {
            design.regressor::<f64>(pts.points[i].x)
        }
    });
    let y = DVector::from_fn(n, |i, _| pts.points[i].y + design.offset::<f64>(pts.points[i].x));
    let xtwx = x.transpose() * &w * &x;
    let inv = xtwx.clone().try_inverse().unwrap();
    let beta = &inv * x.transpose() * &w * y;
    (beta[0], beta[1], inv)
}

/// Γ(df/2) from Γ(1/2) = √π, Γ(1) = 1 and Γ(a+1) = a Γ(a).
pub fn gamma_half_integer(df: u32) -> f64 {
    let (mut a, mut g) = if df.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, std::f64::consts::PI.sqrt())
    };
    while a < df as f64 / 2.0 {
        g *= a;
        a += 1.0;
    }
    g
}

#[allow(clippy::too_many_arguments)]
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Upper tail of χ²(df) at `x`, integrating over `u = √v`.
pub fn chisq_tail_quadrature(x: f64, df: u32) -> f64 {
    let norm = 2f64.powf(df as f64 / 2.0) * gamma_half_integer(df);
    let f = |u: f64| 2.0 * u.powi(df as i32 - 1) * (-u * u / 2.0).exp() / norm;
    let lo = x.sqrt();
    let hi = lo + 40.0;
    // Split the range so the adaptive rule sees the peak.
    let pieces = 64;
    (0..pieces)
        .map(|i| {
            let a = lo + (hi - lo) * i as f64 / pieces as f64;
            let b = lo + (hi - lo) * (i + 1) as f64 / pieces as f64;
            let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(&f, a, b, fa, fm, fb, whole, 1e-15, 40)
        })
        .sum()
}

/// Central finite-difference gradient of the ZTNB log-likelihood in `(k, p)`.
pub fn ll_gradient_fd(t: &FrequencyTable<f64>, m: u32, k: f64, p: f64) -> [f64; 2] {
    let (hk, hp) = (1e-6 * k.max(1e-3), 1e-7);
    let ll = |k, p| ztnb_log_likelihood(t, m, k, p);
    [
        (ll(k + hk, p) - ll(k - hk, p)) / (2.0 * hk),
        (ll(k, p + hp) - ll(k, p - hp)) / (2.0 * hp),
    ]
}


/// Pearson test of `draws` sampler outputs against the analytic pmf, pooling
/// the upper tail so every expected count is at least 5. Returns `(chisq, df, p)`.
pub fn nb_sampler_gof(nb: &NbParams<f64>, draws: u64, seed: u64) -> (f64, u32, f64) {
    let mut rng = replicate_rng(seed, 0);
    let mut counts = vec![0u64; 256];
    for _ in 0..draws {
        let x = sample_nb(nb, &mut rng) as usize;
        counts[x.min(255)] += 1;
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc_prob = 0.0;
    let mut x = 0;
    while x < 255 {
        let p = nb.pmf(x as u32);
        if draws as f64 * (1.0 - acc_prob - p) < 5.0 {
            break;
        }
        cells.push((counts[x] as f64, draws as f64 * p));
        acc_prob += p;
        x += 1;
    }
    let rest: u64 = counts[x..].iter().sum();
    cells.push((rest as f64, draws as f64 * (1.0 - acc_prob)));
    let chisq: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = cells.len() as u32 - 1;
    (chisq, df, chisq_pvalue(chisq, df))
}
