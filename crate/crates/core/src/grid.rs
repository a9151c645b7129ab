//! Uniform interior grid on (0,1), the scaled Dirichlet difference
//! Laplacian, its closed-form eigensystem, and sine-series transforms.
//!
//! The second difference quotient with homogeneous Dirichlet boundary
//! values on the n-interval grid x_k = k/n, k = 1..n-1, is represented by
//! the (n-1)x(n-1) matrix
//!
//! ```text
//! A_n = n^2 * tridiag(-1, 2, -1),
//! ```
//!
//! whose eigenpairs are known in closed form:
//!
//! ```text
//! lambda_{j,n} = 4 n^2 sin^2(j pi / (2n)),
//! (e_j^n)_k    = sqrt(2/n) sin(j k pi / n),     j, k = 1..n-1.
//! ```
//!
//! Writing lambda_{j,n} = j^2 pi^2 c_{j,n} with
//! c_{j,n} = sin^2(j pi / 2n) / (j pi / 2n)^2 exhibits the sandwich
//! 4 j^2 <= lambda_{j,n} <= j^2 pi^2 and the monotone convergence
//! lambda_{j,n} -> (j pi)^2 from below as n grows. Eigenpairs are always
//! produced from these closed forms; no numerical eigensolver is used
//! outside of test oracles.
//!
//! Functions on (0,1) are carried as coefficients against the orthonormal
//! Dirichlet sine basis e_j(x) = sqrt(2) sin(j pi x). `synthesize`
//! evaluates such a series on the interior points of an m-interval grid
//! and `analyze` inverts it through the discrete orthogonality
//!
//! ```text
//! sum_{k=1}^{m-1} sin(j k pi / m) sin(l k pi / m) = (m/2) delta_{jl},
//! ```
//!
//! exact whenever all modes lie strictly below the grid's Nyquist index
//! (m >= modes + 1). The same sums double as the uniform quadrature rule
//! for inner products of sampled functions, which is how the diffusion
//! matrices downstream are assembled.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Uniform grid with n subintervals of (0,1); interior points x_k = k/n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
}

impl GridSpec {
    /// A grid needs at least one interior point, i.e. n >= 2.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidLevel { n });
        }
        Ok(Self { n })
    }

    /// Number of subintervals.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh width h = 1/n.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of interior points, n - 1.
    pub fn interior_len(&self) -> usize {
        self.n - 1
    }

    /// Interior points k/n for k = 1..n-1, in increasing order.
    pub fn interior_points(&self) -> Vec<f64> {
        (1..self.n).map(|k| k as f64 / self.n as f64).collect()
    }
}

/// Scaled stiffness matrix n^2 * tridiag(-1, 2, -1) of size (n-1)x(n-1).
pub fn stiffness_matrix(n: usize) -> Result<DMatrix<f64>> {
    let spec = GridSpec::new(n)?;
    let dim = spec.interior_len();
    let s = (n * n) as f64;
    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        a[(i, i)] = 2.0 * s;
        if i + 1 < dim {
            a[(i, i + 1)] = -s;
            a[(i + 1, i)] = -s;
        }
    }
    Ok(a)
}

/// Closed-form eigensystem of the scaled stiffness matrix.
///
/// `lambdas[j-1]` holds lambda_{j,n} = 4 n^2 sin^2(j pi / 2n) in strictly
/// increasing order and column j-1 of `vectors` holds the orthonormal
/// eigenvector (sqrt(2/n) sin(j k pi / n))_k.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    n: usize,
    lambdas: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn new(n: usize) -> Result<Self> {
        let spec = GridSpec::new(n)?;
        let dim = spec.interior_len();
        let nf = n as f64;
        let lambdas: Vec<f64> = (1..n)
            .map(|j| {
                let s = (j as f64 * PI / (2.0 * nf)).sin();
                4.0 * nf * nf * s * s
            })
            .collect();
        let scale = (2.0 / nf).sqrt();
        let vectors = DMatrix::from_fn(dim, dim, |k, j| {
            // Row k is grid point (k+1)/n, column j is mode j+1.
            scale * ((j + 1) as f64 * (k + 1) as f64 * PI / nf).sin()
        });
        Ok(Self {
            n,
            lambdas,
            vectors,
        })
    }

    /// Grid refinement level n.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of modes, n - 1.
    pub fn modes(&self) -> usize {
        self.n - 1
    }

    /// Eigenvalue lambda_{j,n} for 1-based mode index j.
    pub fn lambda(&self, j: usize) -> f64 {
        self.lambdas[j - 1]
    }

    /// All eigenvalues in increasing order.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Orthonormal eigenvector matrix V; column j-1 is e_j^n.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Coordinates of a grid vector against the eigenbasis, V^T x.
    ///
    /// These coincide with the sine coefficients of the interpolant E_n x,
    /// so this is also the grid-to-spectral half of the lifting pair.
    pub fn to_modal(&self, values: &[f64]) -> Result<Vec<f64>> {
        let dim = self.modes();
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "grid vector",
                expected: dim,
                got: values.len(),
            });
        }
        let mut out = vec![0.0; dim];
        for (j, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, v) in values.iter().enumerate() {
                acc += self.vectors[(k, j)] * v;
            }
            *slot = acc;
        }
        Ok(out)
    }

    /// Grid coordinates of a modal vector, V c.
    pub fn from_modal(&self, modal: &[f64]) -> Result<Vec<f64>> {
        let dim = self.modes();
        if modal.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "modal vector",
                expected: dim,
                got: modal.len(),
            });
        }
        let mut out = vec![0.0; dim];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, c) in modal.iter().enumerate() {
                acc += self.vectors[(k, j)] * c;
            }
            *slot = acc;
        }
        Ok(out)
    }
}

/// Sine-coefficient representation of a function sum_j a_j sqrt(2) sin(j pi x).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// Number of retained modes.
    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    /// L^2(0,1) norm; the basis is orthonormal so this is Euclidean.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Fractional graph norm |A^delta f| = sqrt(sum_j (j pi)^{4 delta} a_j^2).
    pub fn fractional_norm(&self, delta: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| ((i + 1) as f64 * PI).powf(4.0 * delta) * a * a)
            .sum::<f64>()
            .sqrt()
    }
}

/// Values of a grid function on the interior points of an n-interval grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Grid level n recovered from the value count (values are interior).
    pub fn n(&self) -> usize {
        self.values.len() + 1
    }

    /// Euclidean norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Precomputed sine tables sin(j k pi / m) for the transform pair on a
/// fixed (modes, m) combination; the hot path of the solvers.
///
/// Both directions reproduce the one-shot helpers `synthesize`/`analyze`
/// bitwise: those helpers are implemented through a freshly built table.
#[derive(Debug, Clone)]
pub struct SineTable {
    m: usize,
    modes: usize,
    /// Row-major (m-1) x modes table of sin(j k pi / m), k rows, j columns.
    sines: Vec<f64>,
}

impl SineTable {
    /// Build tables for up to `modes` sine modes on an m-interval grid.
    /// Requires m >= modes + 1 so every mode stays below the grid Nyquist
    /// index and the pair (synthesize, analyze) is exactly invertible.
    pub fn new(modes: usize, m: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::DimensionMismatch {
                what: "mode count",
                expected: 1,
                got: 0,
            });
        }
        if m < modes + 1 {
            return Err(Error::Aliasing {
                modes,
                required: modes + 1,
                m,
            });
        }
        let mf = m as f64;
        let mut sines = Vec::with_capacity((m - 1) * modes);
        for k in 1..m {
            for j in 1..=modes {
                sines.push((j as f64 * k as f64 * PI / mf).sin());
            }
        }
        Ok(Self { m, modes, sines })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Evaluate sum_j coeffs[j-1] sqrt(2) sin(j pi x) at x = k/m, k = 1..m-1.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() > self.modes {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: self.modes,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite {
                what: "sine coefficients",
            });
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut out = vec![0.0; self.m - 1];
        for (k, slot) in out.iter_mut().enumerate() {
            let row = &self.sines[k * self.modes..(k + 1) * self.modes];
            let mut acc = 0.0;
            for (j, a) in coeffs.iter().enumerate() {
                acc += a * row[j];
            }
            *slot = sqrt2 * acc;
        }
        Ok(out)
    }

    /// First `out_modes` sine coefficients of values sampled on the interior
    /// m-grid: a_j = (sqrt(2)/m) sum_k values[k] sin(j k pi / m).
    ///
    /// This is simultaneously the exact inverse of `synthesize` for
    /// band-limited data and the uniform quadrature rule for
    /// sqrt(2) integral of v(x) sin(j pi x) dx on sampled functions.
    pub fn analyze(&self, values: &[f64], out_modes: usize) -> Result<Vec<f64>> {
        if values.len() != self.m - 1 {
            return Err(Error::DimensionMismatch {
                what: "grid samples",
                expected: self.m - 1,
                got: values.len(),
            });
        }
        if out_modes > self.modes {
            return Err(Error::Aliasing {
                modes: out_modes,
                required: out_modes + 1,
                m: self.m,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "grid samples",
            });
        }
        let scale = std::f64::consts::SQRT_2 / self.m as f64;
        let mut out = vec![0.0; out_modes];
        for (k, v) in values.iter().enumerate() {
            let row = &self.sines[k * self.modes..k * self.modes + out_modes];
            for (j, slot) in out.iter_mut().enumerate() {
                *slot += v * row[j];
            }
        }
        for slot in out.iter_mut() {
            *slot *= scale;
        }
        Ok(out)
    }
}

/// One-shot synthesis of a sine series on the interior points of an
/// m-interval grid. Requires m >= modes + 1 (see [`SineTable::new`]).
pub fn synthesize(field: &SpectralField, m: usize) -> Result<Vec<f64>> {
    let table = SineTable::new(field.coeffs.len().max(1), m)?;
    table.synthesize(&field.coeffs)
}

/// One-shot analysis of interior grid samples into `out_modes` sine
/// coefficients; exact inverse of [`synthesize`] for band-limited data.
pub fn analyze(values: &[f64], out_modes: usize) -> Result<SpectralField> {
    let m = values.len() + 1;
    let table = SineTable::new(out_modes, m)?;
    Ok(SpectralField::new(table.analyze(values, out_modes)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_rejects_degenerate_levels() {
        assert!(matches!(
            GridSpec::new(0),
            Err(Error::InvalidLevel { n: 0 })
        ));
        assert!(matches!(
            GridSpec::new(1),
            Err(Error::InvalidLevel { n: 1 })
        ));
        let g = GridSpec::new(2).unwrap();
        assert_eq!(g.interior_len(), 1);
        assert_eq!(g.interior_points(), vec![0.5]);
        assert_relative_eq!(g.h(), 0.5);
    }

    #[test]
    fn stiffness_matrix_matches_definition() {
        let a = stiffness_matrix(4).unwrap();
        assert_eq!(a.nrows(), 3);
        assert_relative_eq!(a[(0, 0)], 32.0);
        assert_relative_eq!(a[(0, 1)], -16.0);
        assert_relative_eq!(a[(1, 0)], -16.0);
        assert_relative_eq!(a[(0, 2)], 0.0);
        // Smallest grid: the 1x1 matrix [2 n^2] = [8].
        let a2 = stiffness_matrix(2).unwrap();
        assert_eq!(a2.nrows(), 1);
        assert_relative_eq!(a2[(0, 0)], 8.0);
    }

    #[test]
    fn eigenvalues_match_closed_form_samples() {
        let e = EigenSystem::new(4).unwrap();
        assert_relative_eq!(e.lambda(1), 9.37258300203048, max_relative = 1e-14);
        assert_relative_eq!(e.lambda(2), 32.0, max_relative = 1e-14);
        assert_relative_eq!(e.lambda(3), 54.62741699796952, max_relative = 1e-14);
        // n = 2: single eigenvalue 8 with eigenvector [1].
        let e2 = EigenSystem::new(2).unwrap();
        assert_relative_eq!(e2.lambda(1), 8.0, max_relative = 1e-15);
        assert_relative_eq!(e2.vectors()[(0, 0)], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn eigenvalues_increase_in_j_and_obey_sandwich() {
        for n in [2usize, 3, 5, 16, 64] {
            let e = EigenSystem::new(n).unwrap();
            for j in 1..n {
                let l = e.lambda(j);
                let jf = j as f64;
                assert!(l >= 4.0 * jf * jf - 1e-9);
                assert!(l <= jf * jf * PI * PI + 1e-9);
                if j > 1 {
                    assert!(l > e.lambda(j - 1));
                }
            }
        }
    }

    #[test]
    fn eigenvalues_increase_to_continuum_limit_in_n() {
        for j in [1usize, 2, 5] {
            let mut prev = 0.0;
            for n in [8usize, 16, 32, 64, 128] {
                let e = EigenSystem::new(n).unwrap();
                let l = e.lambda(j);
                assert!(l >= prev);
                assert!(l <= (j as f64 * PI).powi(2));
                prev = l;
            }
            // The relative defect approaches (jπ/n)²/12 at the finest level.
            let lim = (j as f64 * PI).powi(2);
            let leading = (j as f64 * PI / 128.0).powi(2) / 12.0;
            let defect = (lim - prev) / lim;
            assert!(defect > 0.9 * leading && defect < 1.1 * leading);
        }
    }

    #[test]
    fn eigenvectors_are_orthonormal_and_diagonalize() {
        for n in [2usize, 3, 8, 32] {
            let e = EigenSystem::new(n).unwrap();
            let v = e.vectors();
            let gram = v.transpose() * v;
            for i in 0..n - 1 {
                for j in 0..n - 1 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[(i, j)] - want).abs() < 1e-12);
                }
            }
            let a = stiffness_matrix(n).unwrap();
            let d = v.transpose() * &a * v;
            for i in 0..n - 1 {
                for j in 0..n - 1 {
                    let want = if i == j { e.lambda(i + 1) } else { 0.0 };
                    assert!((d[(i, j)] - want).abs() < 1e-8 * (n * n) as f64);
                }
            }
        }
    }

    #[test]
    fn modal_round_trip_is_identity() {
        let e = EigenSystem::new(9).unwrap();
        let x: Vec<f64> = (0..8).map(|k| (k as f64 * 0.7).sin()).collect();
        let c = e.to_modal(&x).unwrap();
        let back = e.from_modal(&c).unwrap();
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(e.to_modal(&x[..5]).is_err());
    }

    #[test]
    fn synthesize_single_mode_value() {
        // Second mode at x = 1/4: sqrt(2) sin(pi/2) = sqrt(2).
        let f = SpectralField::new(vec![0.0, 1.0]);
        let v = synthesize(&f, 4).unwrap();
        assert_relative_eq!(v[0], std::f64::consts::SQRT_2, max_relative = 1e-15);
        assert_relative_eq!(v[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn analyze_inverts_synthesize_when_oversampled() {
        let coeffs: Vec<f64> = (1..=7).map(|j| 1.0 / j as f64).collect();
        let f = SpectralField::new(coeffs.clone());
        for m in [8usize, 14, 16, 40] {
            let vals = synthesize(&f, m).unwrap();
            let back = analyze(&vals, 7).unwrap();
            for (a, b) in coeffs.iter().zip(back.coeffs.iter()) {
                assert!((a - b).abs() < 1e-12, "m = {m}");
            }
        }
    }

    #[test]
    fn transforms_reject_aliasing_grids() {
        let f = SpectralField::new(vec![1.0; 8]);
        assert!(matches!(synthesize(&f, 8), Err(Error::Aliasing { .. })));
        assert!(synthesize(&f, 9).is_ok());
        let vals = vec![0.0; 7]; // m = 8
        assert!(matches!(analyze(&vals, 8), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn transforms_reject_non_finite_input() {
        let f = SpectralField::new(vec![1.0, f64::NAN]);
        assert!(matches!(synthesize(&f, 8), Err(Error::NonFinite { .. })));
        let vals = vec![1.0, f64::INFINITY, 0.0];
        assert!(matches!(analyze(&vals, 2), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn discrete_parseval_holds() {
        let coeffs: Vec<f64> = (1..=9).map(|j| ((j * j) as f64 * 0.3).cos()).collect();
        let f = SpectralField::new(coeffs);
        let m = 2 * f.modes();
        let vals = synthesize(&f, m).unwrap();
        let quad_norm_sq: f64 = vals.iter().map(|v| v * v).sum::<f64>() / m as f64;
        assert_relative_eq!(quad_norm_sq.sqrt(), f.l2_norm(), max_relative = 1e-8);
    }

    #[test]
    fn fractional_norm_weights_modes() {
        let f = SpectralField::new(vec![1.0, 1.0]);
        let expect = (PI.powi(4) + (2.0 * PI).powi(4)).sqrt();
        assert_relative_eq!(f.fractional_norm(1.0), expect, max_relative = 1e-13);
        assert_relative_eq!(f.fractional_norm(0.0), f.l2_norm(), max_relative = 1e-15);
    }
}
