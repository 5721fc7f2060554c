//! Two-parameter weighted least squares on ratio points.
//!
//! The weight matrix is the inverse of the delta-method covariance of the
//! log ratios, which is tridiagonal: `Var(y_x) = 1/f_x + 1/f_{x+1}` and
//! `Cov(y_x, y_{x+1}) = -1/f_{x+1}`. It is never inverted explicitly; the
//! normal equations are formed from tridiagonal solves.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{FrequencyTable, RatioPoints};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum WeightScheme {
    /// Inverse of the full tridiagonal covariance.
    #[serde(rename = "full", alias = "FullTridiagonal")]
    FullTridiagonal,
    /// Inverse of its diagonal only.
    #[default]
    #[serde(rename = "diag", alias = "DiagonalApprox", alias = "diagonal")]
    DiagonalApprox,
    /// Ordinary least squares.
    #[serde(rename = "identity", alias = "Identity", alias = "unweighted")]
    Identity,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 3] = [
        WeightScheme::FullTridiagonal,
        WeightScheme::DiagonalApprox,
        WeightScheme::Identity,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            WeightScheme::FullTridiagonal => "full",
            WeightScheme::DiagonalApprox => "diag",
            WeightScheme::Identity => "identity",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for WeightScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "fulltridiagonal" | "tridiagonal" => Ok(WeightScheme::FullTridiagonal),
            "diag" | "diagonal" | "diagonalapprox" => Ok(WeightScheme::DiagonalApprox),
            "identity" | "unweighted" | "ols" => Ok(WeightScheme::Identity),
            _ => Err(format!(
                "unknown weight scheme `{s}` (expected full, diag or identity)"
            )),
        }
    }
}

/// Regressor and response transform.
///
/// `LinearInX` regresses `y_x` on `(1, x)`. `HyperbolicInX` regresses
/// `y_x - log(x+1)` on `(1, 1/(x+1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Design {
    #[default]
    LinearInX,
    HyperbolicInX,
}

impl Design {
    pub fn regressor<T: Scalar>(self, x: u32) -> T {
        match self {
            Design::LinearInX => T::from_count(x),
            Design::HyperbolicInX => T::one() / T::from_count(x + 1),
        }
    }

    /// Amount added to `y_x` to form the response.
    pub fn offset<T: Scalar>(self, x: u32) -> T {
        match self {
            Design::LinearInX => T::zero(),
            Design::HyperbolicInX => -T::from_count(x + 1).ln(),
        }
    }
}

/// Symmetric tridiagonal matrix; `off[i]` couples rows `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Scalar> SymTridiagonal<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            diag: vec![T::one(); n],
            off: vec![T::zero(); n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.off.iter().all(|&v| v == T::zero())
    }

    /// Same matrix with the off-diagonal dropped.
    pub fn diagonal_part(&self) -> Self {
        Self {
            diag: self.diag.clone(),
            off: vec![T::zero(); self.off.len()],
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            diag: self.diag.iter().map(|&v| v * c).collect(),
            off: self.off.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => T::zero(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.off[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Solves `A x = b` with the Thomas algorithm (no pivoting).
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        if n == 0 {
            return Ok(Vec::new());
        }
        let scale = self
            .diag
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()));
        let tol = scale * T::epsilon() * T::from_count(n as u32);
        let mut c_prime = vec![T::zero(); n];
        let mut d_prime = vec![T::zero(); n];

        let mut pivot = self.diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = self.diag[i] - self.off[i - 1] * c_prime[i - 1];
            }
            if !pivot.is_finite() || pivot.abs() <= tol {
                return Err(Error::SingularWeights);
            }
            if i + 1 < n {
                c_prime[i] = self.off[i] / pivot;
            }
            let carried = if i > 0 {
                self.off[i - 1] * d_prime[i - 1]
            } else {
                T::zero()
            };
            d_prime[i] = (b[i] - carried) / pivot;
        }
        let mut x = d_prime;
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= c_prime[i] * next;
        }
        Ok(x)
    }
}

fn point_frequencies<T: Scalar>(
    table: &FrequencyTable<T>,
    points: &RatioPoints<T>,
) -> Result<Vec<(T, T)>> {
    points
        .points
        .iter()
        .map(|p| {
            let (a, b) = (table.freq(p.x), table.freq(p.x + 1));
            if a <= T::zero() {
                Err(Error::ZeroFrequency(p.x))
            } else if b <= T::zero() {
                Err(Error::ZeroFrequency(p.x + 1))
            } else {
                Ok((a, b))
            }
        })
        .collect()
}

/// Delta-method covariance of the log ratios.
///
/// Points at non-consecutive `x` share no frequency and are uncorrelated.
pub fn covariance_full<T: Scalar>(
    table: &FrequencyTable<T>,
    points: &RatioPoints<T>,
) -> Result<SymTridiagonal<T>> {
    let freqs = point_frequencies(table, points)?;
    let diag = freqs
        .iter()
        .map(|&(a, b)| T::one() / a + T::one() / b)
        .collect();
    let off = points
        .points
        .windows(2)
        .zip(&freqs)
        .map(|(w, &(_, b))| {
            if w[1].x == w[0].x + 1 {
                -T::one() / b
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(SymTridiagonal { diag, off })
}

/// Diagonal of [`covariance_full`].
pub fn covariance_diagonal<T: Scalar>(
    table: &FrequencyTable<T>,
    points: &RatioPoints<T>,
) -> Result<SymTridiagonal<T>> {
    Ok(covariance_full(table, points)?.diagonal_part())
}

/// Covariance model for `scheme`; its inverse is the weight matrix.
pub fn weight_covariance<T: Scalar>(
    table: &FrequencyTable<T>,
    points: &RatioPoints<T>,
    scheme: WeightScheme,
) -> Result<SymTridiagonal<T>> {
    match scheme {
        WeightScheme::FullTridiagonal => covariance_full(table, points),
        WeightScheme::DiagonalApprox => covariance_diagonal(table, points),
        WeightScheme::Identity => Ok(SymTridiagonal::identity(points.len())),
    }
}

/// Raw output of [`wls_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct WlsSolution<T> {
    pub beta: [T; 2],
    /// `(X' W X)^{-1}`.
    pub xtwx_inv: [[T; 2]; 2],
    pub residuals: Vec<T>,
    /// `r' W r`.
    pub weighted_rss: T,
}

/// Minimises `(y - X b)' C^{-1} (y - X b)` for `X = [1, regressor]`.
pub fn wls_solve<T: Scalar>(
    regressor: &[T],
    response: &[T],
    cov: &SymTridiagonal<T>,
) -> Result<WlsSolution<T>> {
    let n = regressor.len();
    assert_eq!(response.len(), n, "response length mismatch");
    assert_eq!(cov.dim(), n, "covariance dimension mismatch");
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let ones = vec![T::one(); n];
    let z1 = cov.solve(&ones)?;
    let z2 = cov.solve(regressor)?;
    let zy = cov.solve(response)?;
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&u, &v)| u * v).sum::<T>();

    let a11 = dot(&ones, &z1);
    // Average the two mathematically equal cross terms for exact symmetry.
    let a12 = (dot(&ones, &z2) + dot(regressor, &z1)) * T::lit(0.5);
    let a22 = dot(regressor, &z2);
    let b1 = dot(&ones, &zy);
    let b2 = dot(regressor, &zy);

    let det = a11 * a22 - a12 * a12;
    let scale = (a11 * a22).abs();
    if !det.is_finite() || det <= scale * T::epsilon() * T::lit(64.0) {
        return Err(Error::SingularNormalEquations);
    }
    let inv = [[a22 / det, -a12 / det], [-a12 / det, a11 / det]];
    let beta = [
        inv[0][0] * b1 + inv[0][1] * b2,
        inv[1][0] * b1 + inv[1][1] * b2,
    ];
    let residuals: Vec<T> = regressor
        .iter()
        .zip(response)
        .map(|(&u, &y)| y - beta[0] - beta[1] * u)
        .collect();
    let wr = cov.solve(&residuals)?;
    let weighted_rss = dot(&residuals, &wr).max(T::zero());
    Ok(WlsSolution {
        beta,
        xtwx_inv: inv,
        residuals,
        weighted_rss,
    })
}

/// Fitted two-parameter model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegressionFit<T> {
    /// Intercept (`γ` or `γ'`).
    pub gamma_hat: T,
    /// Slope (`δ` or `δ'`).
    pub delta_hat: T,
    /// `dispersion * (X' W X)^{-1}`.
    pub cov_params: [[T; 2]; 2],
    /// `(X' W X)^{-1}` without the dispersion factor.
    pub cov_unscaled: [[T; 2]; 2],
    /// Weighted residual mean square, or 1 with only two points.
    pub dispersion: T,
    pub residuals: Vec<T>,
    pub xs: Vec<u32>,
    pub scheme: WeightScheme,
    pub design: Design,
    pub m: u32,
    pub n_points: usize,
}

impl<T: Scalar> RegressionFit<T> {
    pub fn var_gamma(&self) -> T {
        self.cov_params[0][0]
    }

    /// Fitted response at `x` on the design's own scale.
    pub fn predict(&self, x: u32) -> T {
        self.gamma_hat + self.delta_hat * self.design.regressor::<T>(x)
    }

    /// Fitted `log((x+1) f_{x+1} / f_x)` at `x` (also defined at `x = 0`).
    pub fn predict_log_ratio(&self, x: u32) -> T {
        self.predict(x) - self.design.offset::<T>(x)
    }
}

/// Fits `design` to `points` with weights from `scheme`.
pub fn wls_fit<T: Scalar>(
    points: &RatioPoints<T>,
    table: &FrequencyTable<T>,
    scheme: WeightScheme,
    design: Design,
) -> Result<RegressionFit<T>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let cov = weight_covariance(table, points, scheme)?;
    let regressor: Vec<T> = points.points.iter().map(|p| design.regressor(p.x)).collect();
    let response: Vec<T> = points
        .points
        .iter()
        .map(|p| p.y + design.offset::<T>(p.x))
        .collect();
    let sol = wls_solve(&regressor, &response, &cov)?;

    let dispersion = if n > 2 {
        sol.weighted_rss / T::from_count(n as u32 - 2)
    } else {
        T::one()
    };
    let mut cov_params = sol.xtwx_inv;
    for row in cov_params.iter_mut() {
        for v in row.iter_mut() {
            *v *= dispersion;
        }
    }
    let residuals = if n == 2 {
        vec![T::zero(); 2]
    } else {
        sol.residuals
    };
    Ok(RegressionFit {
        gamma_hat: sol.beta[0],
        delta_hat: sol.beta[1],
        cov_params,
        cov_unscaled: sol.xtwx_inv,
        dispersion,
        residuals,
        xs: points.xs(),
        scheme,
        design,
        m: points.source_m,
        n_points: n,
    })
}
