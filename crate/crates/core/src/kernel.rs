//! Correlation kernels, covariance assembly, and Gaussian-process sampling.
//!
//! All processes in the simulator share the covariance form
//! `sigma(s) * sigma(t) * kappa(s, t)` with `kappa` one of three
//! stationary correlation families. Matrices on fine grids are often
//! numerically rank deficient, so factorization runs a jitter ladder
//! with an eigenvalue-clipping fallback.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// A stationary correlation kernel with `kappa(t, t) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp{-(t - s)^2 / (2 rho^2)}`, `rho > 0`.
    SquaredExponential { rho: f64 },
    /// `rho^|t - s|` (AR(1)-type decay), `0 < rho < 1`.
    SpatialPower { rho: f64 },
    /// `1` on the diagonal, `rho` off it (compound symmetry), `0 < rho < 1`.
    TwoValue { rho: f64 },
}

impl Kernel {
    /// Validate the family parameter, returning the kernel on success.
    pub fn validated(self) -> Result<Self> {
        match self {
            Kernel::SquaredExponential { rho } if rho > 0.0 && rho.is_finite() => Ok(self),
            Kernel::SquaredExponential { rho } => Err(Error::InvalidParameter(format!(
                "squared_exponential requires rho > 0, got {rho}"
            ))),
            Kernel::SpatialPower { rho } | Kernel::TwoValue { rho }
                if rho > 0.0 && rho < 1.0 =>
            {
                Ok(self)
            }
            Kernel::SpatialPower { rho } => Err(Error::InvalidParameter(format!(
                "spatial_power requires 0 < rho < 1, got {rho}"
            ))),
            Kernel::TwoValue { rho } => Err(Error::InvalidParameter(format!(
                "two_value requires 0 < rho < 1, got {rho}"
            ))),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Kernel::SquaredExponential { .. } => "squared_exponential",
            Kernel::SpatialPower { .. } => "spatial_power",
            Kernel::TwoValue { .. } => "two_value",
        }
    }

    pub fn rho(&self) -> f64 {
        match *self {
            Kernel::SquaredExponential { rho }
            | Kernel::SpatialPower { rho }
            | Kernel::TwoValue { rho } => rho,
        }
    }

    /// Evaluate `kappa(s, t)`.
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match *self {
            Kernel::SquaredExponential { rho } => {
                let d = t - s;
                (-d * d / (2.0 * rho * rho)).exp()
            }
            Kernel::SpatialPower { rho } => rho.powf((t - s).abs()),
            Kernel::TwoValue { rho } => {
                if s == t {
                    1.0
                } else {
                    rho
                }
            }
        }
    }
}

/// Evaluate a kernel after validating its parameter.
pub fn kernel_eval(kernel: Kernel, s: f64, t: f64) -> Result<f64> {
    Ok(kernel.validated()?.eval(s, t))
}

/// Covariance matrix from an arbitrary correlation function and pointwise
/// standard deviation: entry (a, b) is `sd(t_a) * sd(t_b) * corr(t_a, t_b)`.
///
/// The simulator uses this directly for the literal kernels of the latent
/// predictor and threshold processes.
pub fn cov_matrix_from_fn(
    corr: impl Fn(f64, f64) -> f64,
    sd: impl Fn(f64) -> f64,
    grid: &TimeGrid,
) -> Result<DMatrix<f64>> {
    let pts = grid.points();
    let m = pts.len();
    let sds: Vec<f64> = pts.iter().map(|&t| sd(t)).collect();
    if let Some(bad) = sds.iter().find(|&&s| !(s >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "pointwise standard deviation must be nonnegative, got {bad}"
        )));
    }
    let mut cov = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let v = sds[a] * sds[b] * corr(pts[a], pts[b]);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Covariance matrix for a named kernel family.
pub fn build_cov_matrix(
    kernel: Kernel,
    sd: impl Fn(f64) -> f64,
    grid: &TimeGrid,
) -> Result<DMatrix<f64>> {
    let k = kernel.validated()?;
    cov_matrix_from_fn(|s, t| k.eval(s, t), sd, grid)
}

/// A reusable square-root factor of a covariance matrix.
///
/// Factorization first walks a jitter ladder (1e-10 to 1e-6 times the mean
/// diagonal) through Cholesky, then falls back to an eigendecomposition with
/// negative eigenvalues clipped at zero. Eigenvalues below -1e-8 times the
/// matrix scale are treated as genuine indefiniteness and rejected.
#[derive(Debug, Clone)]
pub struct GpFactor {
    factor: DMatrix<f64>,
}

impl GpFactor {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let m = cov.nrows();
        if m == 0 || cov.ncols() != m {
            return Err(Error::InvalidParameter(
                "covariance must be square and non-empty".into(),
            ));
        }
        let scale = cov.diagonal().sum() / m as f64;
        if scale == 0.0 {
            // zero matrix: degenerate draw equals the mean
            return Ok(GpFactor {
                factor: DMatrix::zeros(m, m),
            });
        }
        let mut jitter = 1e-10 * scale;
        while jitter <= 1e-6 * scale * (1.0 + 1e-12) {
            let mut c = cov.clone();
            for i in 0..m {
                c[(i, i)] += jitter;
            }
            if let Some(chol) = c.cholesky() {
                return Ok(GpFactor { factor: chol.l() });
            }
            jitter *= 10.0;
        }
        // eigen fallback, clipping small negative eigenvalues at zero
        let sym = (cov + cov.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let min_ev = eig.eigenvalues.min();
        if min_ev < -1e-8 * scale.max(1.0) {
            return Err(Error::NumericalDegeneracy(format!(
                "covariance not positive semidefinite after jitter (min eigenvalue {min_ev:.3e})"
            )));
        }
        let mut f = eig.eigenvectors;
        for j in 0..m {
            let s = eig.eigenvalues[j].max(0.0).sqrt();
            for i in 0..m {
                f[(i, j)] *= s;
            }
        }
        Ok(GpFactor { factor: f })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// One multivariate-normal draw with the given mean.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Vec<f64> {
        let m = self.dim();
        debug_assert_eq!(mean.len(), m);
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = &self.factor * z;
        (0..m).map(|i| mean[i] + v[i]).collect()
    }
}

/// One draw from `N(mean, cov)`. Deterministic given the RNG state.
pub fn sample_gp<R: Rng + ?Sized>(
    mean: &[f64],
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if mean.len() != cov.nrows() {
        return Err(Error::InvalidParameter(format!(
            "mean length {} does not match covariance dimension {}",
            mean.len(),
            cov.nrows()
        )));
    }
    Ok(GpFactor::new(cov)?.sample(mean, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_examples() {
        let k = Kernel::SquaredExponential { rho: 0.2 };
        assert_abs_diff_eq!(k.eval(0.3, 0.3), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.eval(0.1, 0.3), (-0.5f64).exp(), epsilon = 1e-12);
        let k = Kernel::SpatialPower { rho: 0.4 };
        assert_abs_diff_eq!(k.eval(0.0, 0.5), 0.4f64.powf(0.5), epsilon = 1e-12);
        let k = Kernel::TwoValue { rho: 0.6 };
        assert_abs_diff_eq!(k.eval(0.2, 0.7), 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(k.eval(0.2, 0.2), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn kernel_parameter_domains() {
        assert!(kernel_eval(Kernel::SquaredExponential { rho: 0.0 }, 0.0, 0.1).is_err());
        assert!(kernel_eval(Kernel::SpatialPower { rho: 1.5 }, 0.0, 0.1).is_err());
        assert!(kernel_eval(Kernel::TwoValue { rho: 0.0 }, 0.0, 0.1).is_err());
        assert!(kernel_eval(Kernel::SpatialPower { rho: 0.4 }, 0.0, 0.1).is_ok());
    }

    #[test]
    fn kernel_symmetry_and_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kernels = [
            Kernel::SquaredExponential { rho: 0.2 },
            Kernel::SpatialPower { rho: 0.4 },
            Kernel::TwoValue { rho: 0.6 },
        ];
        for k in kernels {
            for _ in 0..200 {
                let s: f64 = rng.gen();
                let t: f64 = rng.gen();
                assert_abs_diff_eq!(k.eval(s, t), k.eval(t, s), epsilon = 1e-15);
                assert_abs_diff_eq!(k.eval(s, s), 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn cov_matrix_examples() {
        let grid = TimeGrid::uniform(3).unwrap();
        let zero = build_cov_matrix(Kernel::TwoValue { rho: 0.2 }, |_| 0.0, &grid).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        let cs = build_cov_matrix(Kernel::TwoValue { rho: 0.2 }, |_| 1.0, &grid).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.2 };
                assert_abs_diff_eq!(cs[(a, b)], want, epsilon = 1e-15);
            }
        }

        let scaled = build_cov_matrix(Kernel::TwoValue { rho: 0.2 }, |_| 2.0, &grid).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_abs_diff_eq!(scaled[(a, b)], 4.0 * cs[(a, b)], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn cov_matrix_symmetric_and_near_psd() {
        let grid = TimeGrid::uniform(24).unwrap();
        let cov = build_cov_matrix(Kernel::SquaredExponential { rho: 0.2 }, |t| 1.0 + 0.3 * t, &grid)
            .unwrap();
        for a in 0..24 {
            for b in 0..24 {
                assert!((cov[(a, b)] - cov[(b, a)]).abs() < 1e-12);
            }
        }
        let min_ev = cov.clone().symmetric_eigen().eigenvalues.min();
        assert!(min_ev >= -1e-8, "min eigenvalue {min_ev}");
    }

    #[test]
    fn sample_gp_degenerate_and_deterministic() {
        let grid = TimeGrid::uniform(5).unwrap();
        let cov = build_cov_matrix(Kernel::TwoValue { rho: 0.3 }, |_| 0.0, &grid).unwrap();
        let mean = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draw = sample_gp(&mean, &cov, &mut rng).unwrap();
        assert_eq!(draw, mean);

        let cov = build_cov_matrix(Kernel::SquaredExponential { rho: 0.2 }, |_| 1.0, &grid).unwrap();
        let a = sample_gp(&mean, &cov, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = sample_gp(&mean, &cov, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_gp_moments_identity_cov() {
        // N = 1e5 draws from N(0, I): sample mean within 0.02, variance within 0.05
        let m = 4;
        let cov = DMatrix::<f64>::identity(m, m);
        let mean = vec![0.0; m];
        let factor = GpFactor::new(&cov).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut sums = vec![0.0; m];
        let mut sqs = vec![0.0; m];
        for _ in 0..n {
            let d = factor.sample(&mean, &mut rng);
            for j in 0..m {
                sums[j] += d[j];
                sqs[j] += d[j] * d[j];
            }
        }
        for j in 0..m {
            let mu = sums[j] / n as f64;
            let var = sqs[j] / n as f64 - mu * mu;
            assert!(mu.abs() < 0.02, "mean {mu}");
            assert!((var - 1.0).abs() < 0.05, "var {var}");
        }
    }

    #[test]
    fn sample_gp_variance_matches_sigma2() {
        // cov = sigma^2 I: empirical variance within 3 sigma^2 / sqrt(N)
        let sigma2 = 2.5;
        let m = 3;
        let cov = DMatrix::<f64>::identity(m, m) * sigma2;
        let factor = GpFactor::new(&cov).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40_000;
        let mut sq = 0.0;
        for _ in 0..n {
            let d = factor.sample(&[0.0, 0.0, 0.0], &mut rng);
            sq += d[0] * d[0];
        }
        let var = sq / n as f64;
        let tol = 3.0 * sigma2 / (n as f64).sqrt();
        assert!((var - sigma2).abs() < tol, "var {var} vs {sigma2} (tol {tol})");
    }

    #[test]
    fn mean_length_mismatch_rejected() {
        let cov = DMatrix::<f64>::identity(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_gp(&[0.0; 2], &cov, &mut rng).is_err());
    }
}
