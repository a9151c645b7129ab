//! Maps between function space and grid coordinates, and the
//! state-dependent diffusion matrix.
//!
//! With `V` the orthonormal eigenvector matrix of the level-n difference
//! Laplacian and `a_j = <f, e_j>` the sine coefficients of `f`:
//!
//! ```text
//! projection     P_n f = V (a_1, ..., a_{n-1})^T        (grid coords),
//! interpolation  E_n x = sum_k (V^T x)_k e_k            (coefficients),
//! ```
//!
//! so `P_n E_n = I` on the grid space, `E_n` is an isometry into L2, and
//! `E_n P_n` is the orthogonal projection onto the first n-1 sine modes.
//!
//! A Nemytskii map `g` acts on functions pointwise, `u |-> g(u(.))`. Its
//! matrix against the noise modes,
//!
//! ```text
//! g_n(y) column j = P_n (sine coefficients of x |-> g((E_n y)(x)) e_j(x)),
//! ```
//!
//! is assembled by sampling `g((E_n y)(x))` on an oversampled interior
//! grid (m >= 4n points) and reading inner products off the discrete sine
//! quadrature. The multiplier `g(...)` is generally not band-limited, so
//! the quadrature is approximate but converges rapidly in m for smooth g;
//! the 4n floor keeps at least the band-(2n-2) products exact.

use crate::error::{Error, Result};
use crate::grid::{EigenSystem, GridField, SineTable, SpectralField};
use nalgebra::DMatrix;
use std::fmt;
use std::sync::Arc;

/// Pointwise (superposition) map `u |-> g(u(.))` with its declared
/// constants: a uniform bound `sup |g|`, a Lipschitz constant, and an
/// optional smoothness tag `(delta, b_delta)` that is carried for rate
/// reporting only — nothing in this crate tries to estimate it from `g`.
///
/// The callback must be reentrant: it is invoked concurrently from
/// Monte-Carlo workers.
#[derive(Clone)]
pub struct NemytskiiMap {
    name: String,
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    bound: f64,
    lipschitz: f64,
    smoothness: Option<(f64, f64)>,
}

impl fmt::Debug for NemytskiiMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NemytskiiMap")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl NemytskiiMap {
    /// A custom map with caller-declared constants.
    pub fn custom(
        name: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bound: f64,
        lipschitz: f64,
        smoothness: Option<(f64, f64)>,
    ) -> Self {
        Self {
            name: name.into(),
            g: Arc::new(g),
            bound,
            lipschitz,
            smoothness,
        }
    }

    /// The built-in catalogue used by experiment configs: `cos`
    /// (g(x) = cos x), `one` (g = 1), `tanh` (g(x) = tanh x), and `zero`
    /// (g = 0, the noiseless control).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "cos" => Ok(Self::custom("cos", f64::cos, 1.0, 1.0, None)),
            "one" => Ok(Self::custom("one", |_| 1.0, 1.0, 0.0, None)),
            "tanh" => Ok(Self::custom("tanh", f64::tanh, 1.0, 1.0, None)),
            "zero" => Ok(Self::custom("zero", |_| 0.0, 0.0, 0.0, None)),
            other => Err(Error::ConfigInvalid {
                reason: format!(
                    "unknown diffusion map '{other}' (catalogue: cos, one, tanh, zero)"
                ),
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `sup |g|`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn smoothness(&self) -> Option<(f64, f64)> {
        self.smoothness
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.g)(x)
    }
}

/// `P_n f`: grid coordinates of the first n-1 sine coefficients; missing
/// trailing coefficients are treated as zero (those modes project to
/// nothing at this level).
pub fn project_pn(f: &SpectralField, n: usize) -> Result<GridField> {
    let eigen = EigenSystem::new(n)?;
    Ok(project_pn_with(&eigen, f))
}

/// `P_n f` with a prebuilt eigensystem (hot-path form).
pub fn project_pn_with(eigen: &EigenSystem, f: &SpectralField) -> GridField {
    let dim = eigen.modes();
    let mut head = vec![0.0; dim];
    for (slot, &c) in head.iter_mut().zip(f.coeffs.iter()) {
        *slot = c;
    }
    let values = eigen
        .from_modal(&head)
        .expect("head vector has the eigensystem's dimension");
    GridField { values }
}

/// `E_n x`: the sine coefficients `<x, e_k^n>`, i.e. the coordinates of
/// the unique function in the span of `e_1..e_{n-1}` that interpolates the
/// grid state isometrically.
pub fn interpolate_en(x: &GridField) -> Result<SpectralField> {
    let eigen = EigenSystem::new(x.n())?;
    Ok(interpolate_en_with(&eigen, x))
}

/// `E_n x` with a prebuilt eigensystem (hot-path form).
pub fn interpolate_en_with(eigen: &EigenSystem, x: &GridField) -> SpectralField {
    let coeffs = eigen
        .to_modal(&x.values)
        .expect("grid state has the eigensystem's dimension");
    SpectralField { coeffs }
}

/// Point values of `g(f(.))` on the interior of the m-interval grid.
/// Requires `m >= 2 * truncation` so that downstream re-analysis of the
/// product sees no trivial aliasing.
pub fn nemytskii_eval(g: &NemytskiiMap, f: &SpectralField, m: usize) -> Result<Vec<f64>> {
    let modes = f.coeffs.len();
    if m < 2 * modes.max(1) {
        return Err(Error::Aliasing {
            modes,
            required: 2 * modes.max(1),
            m,
        });
    }
    let table = SineTable::new(modes.max(1), m)?;
    let mut values = table.synthesize(&f.coeffs)?;
    for v in &mut values {
        *v = g.eval(*v);
    }
    Ok(values)
}

/// The diffusion matrix `g_n(y)`: column `j` holds the grid coordinates of
/// `P_n` applied to `x |-> g((E_n y)(x)) e_j(x)`, with inner products taken
/// by discrete sine quadrature on `m >= 4n` interior points.
pub fn diffusion_matrix_gn(g: &NemytskiiMap, y: &GridField, m: usize) -> Result<DMatrix<f64>> {
    let n = y.n();
    let eigen = EigenSystem::new(n)?;
    diffusion_matrix_gn_with(g, &eigen, y, m)
}

/// [`diffusion_matrix_gn`] with a prebuilt eigensystem.
pub fn diffusion_matrix_gn_with(
    g: &NemytskiiMap,
    eigen: &EigenSystem,
    y: &GridField,
    m: usize,
) -> Result<DMatrix<f64>> {
    let n = eigen.n();
    if m < 4 * n {
        return Err(Error::Aliasing {
            modes: n - 1,
            required: 4 * n,
            m,
        });
    }
    let dim = n - 1;
    let table = SineTable::new(dim, m)?;

    // h_k = g((E_n y)(x_k)) on the oversampled interior grid.
    let coeffs = eigen.to_modal(&y.values)?;
    let mut h = table.synthesize(&coeffs)?;
    for v in &mut h {
        *v = g.eval(*v);
    }

    // B_{l j} = <g(E_n y) e_j, e_l> by quadrature, then G = V B.
    let mut b = DMatrix::zeros(dim, dim);
    let mut mode = vec![0.0; dim];
    let mut product = vec![0.0; m - 1];
    for j in 0..dim {
        for slot in mode.iter_mut() {
            *slot = 0.0;
        }
        mode[j] = 1.0;
        let ej = table.synthesize(&mode)?;
        for (p, (&hv, &ev)) in product.iter_mut().zip(h.iter().zip(&ej)) {
            *p = hv * ev;
        }
        let col = table.analyze(&product, dim)?;
        for l in 0..dim {
            b[(l, j)] = col[l];
        }
    }
    Ok(eigen.vectors() * b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_coeffs(j: usize, len: usize) -> SpectralField {
        let mut coeffs = vec![0.0; len];
        coeffs[j - 1] = 1.0;
        SpectralField { coeffs }
    }

    #[test]
    fn projection_sends_low_modes_to_eigenvectors() {
        let n = 8;
        let eigen = EigenSystem::new(n).unwrap();
        for j in 1..n {
            let f = unit_coeffs(j, n - 1);
            let p = project_pn(&f, n).unwrap();
            for k in 0..n - 1 {
                assert!((p.values[k] - eigen.vectors()[(k, j - 1)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn projection_annihilates_high_modes() {
        let n = 6;
        for j in n..n + 4 {
            let f = unit_coeffs(j, j);
            let p = project_pn(&f, n).unwrap();
            assert!(p.values.iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn projection_is_linear() {
        let n = 8;
        let f1 = unit_coeffs(1, n - 1);
        let f2 = unit_coeffs(2, n - 1);
        let combo = SpectralField {
            coeffs: f1
                .coeffs
                .iter()
                .zip(&f2.coeffs)
                .map(|(a, b)| 2.0 * a + b)
                .collect(),
        };
        let direct = project_pn(&combo, n).unwrap();
        let p1 = project_pn(&f1, n).unwrap();
        let p2 = project_pn(&f2, n).unwrap();
        for k in 0..n - 1 {
            assert!((direct.values[k] - (2.0 * p1.values[k] + p2.values[k])).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolation_inverts_projection() {
        let n = 16;
        let x = GridField {
            values: (0..n - 1).map(|k| ((k * k) as f64 * 0.37).sin()).collect(),
        };
        let lifted = interpolate_en(&x).unwrap();
        let back = project_pn(&lifted, n).unwrap();
        for k in 0..n - 1 {
            assert!((back.values[k] - x.values[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_is_an_isometry() {
        let n = 12;
        let x = GridField {
            values: (0..n - 1).map(|k| (k as f64 - 3.0) * 0.25).collect(),
        };
        let lifted = interpolate_en(&x).unwrap();
        let grid_norm = x.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((lifted.l2_norm() - grid_norm).abs() < 1e-12);
    }

    #[test]
    fn interpolation_sends_eigenvectors_to_sine_modes() {
        let n = 7;
        let eigen = EigenSystem::new(n).unwrap();
        for j in 1..n {
            let x = GridField {
                values: (0..n - 1).map(|k| eigen.vectors()[(k, j - 1)]).collect(),
            };
            let lifted = interpolate_en(&x).unwrap();
            for (i, &c) in lifted.coeffs.iter().enumerate() {
                let want = if i == j - 1 { 1.0 } else { 0.0 };
                assert!((c - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lift_then_project_is_orthogonal_projection() {
        // On a field with more modes than the level keeps, E_n P_n
        // truncates; applying it twice changes nothing more.
        let n = 6;
        let f = SpectralField {
            coeffs: (1..=10).map(|j| 1.0 / j as f64).collect(),
        };
        let once = interpolate_en(&project_pn(&f, n).unwrap()).unwrap();
        assert_eq!(once.coeffs.len(), n - 1);
        for (j, &c) in once.coeffs.iter().enumerate() {
            assert!((c - f.coeffs[j]).abs() < 1e-13);
        }
        let twice = interpolate_en(&project_pn(&once, n).unwrap()).unwrap();
        for (a, b) in twice.coeffs.iter().zip(&once.coeffs) {
            assert!((a - b).abs() < 1e-13);
        }
        // Self-adjointness on the big space via padded dot products.
        let h = SpectralField {
            coeffs: (1..=10).map(|j| ((j * j) as f64 * 0.3).cos()).collect(),
        };
        let ph = interpolate_en(&project_pn(&h, n).unwrap()).unwrap();
        let dot =
            |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b.iter()).map(|(x, y)| x * y).sum() };
        let lhs = dot(&once.coeffs, &h.coeffs);
        let rhs = dot(&f.coeffs, &ph.coeffs);
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn catalogue_maps_resolve_and_unknowns_do_not() {
        for name in ["cos", "one", "tanh", "zero"] {
            let g = NemytskiiMap::from_name(name).unwrap();
            assert_eq!(g.name(), name);
        }
        assert!((NemytskiiMap::from_name("cos").unwrap().eval(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(NemytskiiMap::from_name("zero").unwrap().eval(3.2), 0.0);
        assert!(NemytskiiMap::from_name("cso").is_err());
    }

    #[test]
    fn nemytskii_eval_applies_pointwise() {
        let g = NemytskiiMap::from_name("one").unwrap();
        let f = SpectralField {
            coeffs: vec![0.4, -0.2, 0.1],
        };
        let vals = nemytskii_eval(&g, &f, 12).unwrap();
        assert!(vals.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let g = NemytskiiMap::from_name("cos").unwrap();
        let zero = SpectralField {
            coeffs: vec![0.0; 4],
        };
        let vals = nemytskii_eval(&g, &zero, 16).unwrap();
        assert!(vals.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn nemytskii_eval_rejects_undersampling() {
        let g = NemytskiiMap::from_name("cos").unwrap();
        let f = SpectralField {
            coeffs: vec![1.0; 8],
        };
        assert!(matches!(
            nemytskii_eval(&g, &f, 15),
            Err(Error::Aliasing { .. })
        ));
        assert!(nemytskii_eval(&g, &f, 16).is_ok());
    }

    #[test]
    fn constant_diffusion_matrix_is_the_eigenvector_matrix() {
        let n = 8;
        let eigen = EigenSystem::new(n).unwrap();
        let y = GridField {
            values: (0..n - 1).map(|k| (k as f64 * 0.77).sin()).collect(),
        };
        let g1 = diffusion_matrix_gn(&NemytskiiMap::from_name("one").unwrap(), &y, 4 * n).unwrap();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                assert!((g1[(i, j)] - eigen.vectors()[(i, j)]).abs() < 1e-12);
            }
        }
        // Scaling g scales the matrix.
        let half = NemytskiiMap::custom("half", |_| 0.5, 0.5, 0.0, None);
        let gh = diffusion_matrix_gn(&half, &y, 4 * n).unwrap();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                assert!((gh[(i, j)] - 0.5 * g1[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diffusion_matrix_stabilizes_under_oversampling() {
        let n = 8;
        let g = NemytskiiMap::from_name("cos").unwrap();
        let y = GridField {
            values: (0..n - 1).map(|k| ((k + 1) as f64 * 0.3).cos()).collect(),
        };
        let coarse = diffusion_matrix_gn(&g, &y, 4 * n).unwrap();
        let fine = diffusion_matrix_gn(&g, &y, 8 * n).unwrap();
        let mut worst = 0.0f64;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                worst = worst.max((coarse[(i, j)] - fine[(i, j)]).abs());
            }
        }
        assert!(worst < 1e-8, "worst entry drift {worst}");
    }

    #[test]
    fn diffusion_matrix_norm_respects_the_bound() {
        let n = 6;
        let g = NemytskiiMap::from_name("cos").unwrap();
        let y = GridField {
            values: (0..n - 1).map(|k| (k as f64).sin() * 2.0).collect(),
        };
        let m = diffusion_matrix_gn(&g, &y, 4 * n).unwrap();
        // Operator norm of V B is at most b0 (up to quadrature slack): B's
        // columns are coefficient vectors of g(E_n y) e_j with |g| <= b0.
        let svd = m.svd(false, false);
        let top = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        assert!(top <= g.bound() * (1.0 + 1e-6), "norm {top}");
    }

    #[test]
    fn diffusion_matrix_rejects_weak_oversampling() {
        let g = NemytskiiMap::from_name("cos").unwrap();
        let y = GridField {
            values: vec![0.1, 0.2, 0.3],
        };
        assert!(matches!(
            diffusion_matrix_gn(&g, &y, 15),
            Err(Error::Aliasing { .. })
        ));
        assert!(diffusion_matrix_gn(&g, &y, 16).is_ok());
    }
}
