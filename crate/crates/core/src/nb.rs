//! Negative binomial distribution, `P(X = x) = C(x+k-1, x) p^k (1-p)^x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{ln_gamma, ln_rising_factorial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NbParams<T> {
    pub k: T,
    pub p: T,
}

impl<T: Scalar> NbParams<T> {
    pub fn new(k: T, p: T) -> Result<Self> {
        if !(k > T::zero() && k.is_finite()) {
            return Err(Error::Precondition(format!(
                "negative binomial k must be positive, got {k}"
            )));
        }
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::Precondition(format!(
                "negative binomial p must lie in (0, 1), got {p}"
            )));
        }
        Ok(Self { k, p })
    }

    /// Parameters with mean `mu`: `p = k / (k + mu)`.
    pub fn from_mean(mu: T, k: T) -> Result<Self> {
        if !(mu > T::zero() && mu.is_finite()) {
            return Err(Error::Precondition(format!(
                "negative binomial mean must be positive, got {mu}"
            )));
        }
        Self::new(k, k / (k + mu))
    }

    pub fn mean(&self) -> T {
        self.k * (T::one() - self.p) / self.p
    }

    pub fn ln_pmf(&self, x: u32) -> T {
        ln_rising_factorial(self.k, x) - ln_gamma(T::from_count(x) + T::one())
            + self.k * self.p.ln()
            + T::from_count(x) * (-self.p).ln_1p()
    }

    pub fn pmf(&self, x: u32) -> T {
        self.ln_pmf(x).exp()
    }

    /// `P(X = 0) = p^k`.
    pub fn p_zero(&self) -> T {
        self.p.powf(self.k)
    }
}
