//! Grünwald–Letnikov finite-difference scheme for the left
//! Riemann–Liouville derivative of order r in (0, 1):
//!
//! ```text
//! D_n^r f(x) = n^r sum_{j=0}^{floor(n x)} C_j f(x - j/n),
//! C_j = gamma(j - r) / (gamma(j + 1) gamma(-r)),
//! ```
//!
//! the classical comparison discretization against which the spectral
//! construction elsewhere in this crate can be contrasted. The binomial
//! coefficients are generated by the stable recurrence
//! `C_{j+1} = C_j (j - r) / (j + 1)` (never by gamma-function evaluation,
//! which overflows long before the sums converge); `C_0 = 1`, `C_1 = -r`,
//! all later coefficients are negative and `sum_j C_j = (1 - 1)^r = 0`,
//! which is why the partial sums drift to zero.
//!
//! The sum only ever samples `f` on the uniform grid j/n, so evaluation
//! points must sit on that grid; anything else is rejected rather than
//! silently interpolated.

use crate::error::{Error, Result};

/// Binomial weights `C_0..C_count` of the order-r difference.
pub fn gruenwald_coefficients(r: f64, count: usize) -> Result<Vec<f64>> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::OrderOutOfRange { r });
    }
    let mut coeffs = Vec::with_capacity(count + 1);
    let mut c = 1.0;
    coeffs.push(c);
    for j in 0..count {
        c *= (j as f64 - r) / (j as f64 + 1.0);
        coeffs.push(c);
    }
    Ok(coeffs)
}

/// Order-r difference scheme on the n-interval grid of [0, 1].
#[derive(Debug, Clone)]
pub struct GruenwaldScheme {
    r: f64,
    n: usize,
    coefficients: Vec<f64>,
}

impl GruenwaldScheme {
    /// Builds the scheme; `r` in (0, 1), `n >= 1`.
    pub fn new(r: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidLevel { n });
        }
        let coefficients = gruenwald_coefficients(r, n)?;
        Ok(Self { r, n, coefficients })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The weights `C_0..C_n`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Applies the scheme to samples `f(j/n), j = 0..n` at the grid point
    /// `x = i/n` in (0, 1]:
    /// `n^r sum_{j=0}^{i} C_j f((i - j)/n)`.
    ///
    /// `samples` must cover the whole grid (n + 1 values); `x` must lie on
    /// the grid to within 1e-9 of a multiple of 1/n.
    pub fn apply(&self, samples: &[f64], x: f64) -> Result<f64> {
        if samples.len() < self.n + 1 {
            return Err(Error::InsufficientSamples {
                needed: self.n + 1,
                got: samples.len(),
            });
        }
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::OutOfDomain {
                coord: "x",
                value: x,
            });
        }
        let scaled = x * self.n as f64;
        let i = scaled.round() as usize;
        if (scaled - i as f64).abs() > 1e-9 || i == 0 {
            return Err(Error::OffGridPoint { x, n: self.n });
        }

        let mut sum = 0.0;
        for j in 0..=i {
            sum += self.coefficients[j] * samples[i - j];
        }
        Ok((self.n as f64).powf(self.r) * sum)
    }
}
