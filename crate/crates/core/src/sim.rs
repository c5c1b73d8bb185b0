//! Synthetic data generation for the simulation study.
//!
//! One dataset consists of `n` subjects, each carrying scalar covariates
//! `(z_c, z_b)`, an outcome `y`, and a `J x m` matrix of zero-inflated
//! proxies `w`. The latent machinery (activation probabilities, latent
//! curves, threshold and noise processes) is returned alongside as
//! [`SimulatedTruth`] so benchmark fits and diagnostics can use it.
//!
//! All randomness flows through one seed; subject-level draws live on
//! per-subject RNG substreams so assembly is deterministic under any
//! parallel schedule.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernel::{cov_matrix_from_fn, GpFactor, Kernel};
use crate::norm::{std_normal_cdf, std_normal_quantile};

/// Outcome family of the scalar-on-function regression model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Bernoulli,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
        }
    }
}

/// Offset/width pair for one component of the activation coefficient
/// function: values live in the open interval `(offset, offset + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaComponent {
    pub offset: f64,
    pub width: f64,
}

/// Full configuration of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    /// Number of subjects.
    pub n: usize,
    /// Proxy replicates per subject.
    pub j: usize,
    pub grid: TimeGrid,
    /// Scalar coefficients: intercept, continuous slope, binary slope.
    pub gamma: Vec<f64>,
    /// Variance of the continuous covariate.
    pub sigma_c_sq: f64,
    /// Success rate of the binary covariate.
    pub p_b: f64,
    /// Offsets and widths for the three activation coefficient components.
    pub theta: [ThetaComponent; 3],
    /// Pointwise standard deviation of the measurement-error process.
    pub sigma_u: f64,
    /// Correlation kernel of the measurement-error process.
    pub u_kernel: Kernel,
    /// Shared-structure weight of the threshold process across replicates.
    pub q_g: f64,
    pub family: Family,
    /// Outcome noise variance for the Gaussian family.
    pub sigma0_sq: f64,
    pub seed: u64,
}

impl SimConfig {
    /// The default setting of the simulation study: J = 7, 24-point grid,
    /// gamma = (5, 0.2, 0.4), zero proportion near 0.335, sigma_u = 1 with a
    /// squared-exponential kernel (rho = 0.2), q_g = 0, Gaussian outcome.
    pub fn study_default(n: usize, seed: u64) -> Self {
        SimConfig {
            n,
            j: 7,
            grid: TimeGrid::default_study(),
            gamma: vec![5.0, 0.2, 0.4],
            sigma_c_sq: 1.0,
            p_b: 0.6,
            theta: [
                ThetaComponent { offset: 0.6, width: 0.2 },
                ThetaComponent { offset: -0.4, width: 0.8 },
                ThetaComponent { offset: -0.5, width: 1.0 },
            ],
            sigma_u: 1.0,
            u_kernel: Kernel::SquaredExponential { rho: 0.2 },
            q_g: 0.0,
            family: Family::Gaussian,
            sigma0_sq: 0.02,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if self.j < 2 {
            return Err(Error::InvalidParameter(format!(
                "replicates per subject must be >= 2, got {}",
                self.j
            )));
        }
        if !(0.0..1.0).contains(&self.q_g) {
            return Err(Error::InvalidParameter(format!(
                "q_g must lie in [0, 1), got {}",
                self.q_g
            )));
        }
        if self.sigma_u <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma_u must be positive, got {}",
                self.sigma_u
            )));
        }
        if self.sigma0_sq < 0.0 {
            return Err(Error::InvalidParameter("sigma0_sq must be >= 0".into()));
        }
        if self.sigma_c_sq <= 0.0 {
            return Err(Error::InvalidParameter("sigma_c_sq must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.p_b) {
            return Err(Error::InvalidParameter("p_b must lie in [0, 1]".into()));
        }
        for (k, c) in self.theta.iter().enumerate() {
            if c.width <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "theta component {k} width must be positive, got {}",
                    c.width
                )));
            }
        }
        if self.gamma.len() != 3 {
            return Err(Error::InvalidParameter(format!(
                "gamma must have 3 entries (intercept + 2 slopes), got {}",
                self.gamma.len()
            )));
        }
        self.u_kernel.validated()?;
        Ok(())
    }
}

/// Map an anticipated zero proportion of the proxies to the matching
/// intercept-component offset. Larger offsets raise activation and lower
/// the zero fraction.
pub fn theta0_offset_for_zero_prop(zero_prop: f64) -> Result<f64> {
    let table = [(0.403, 0.3), (0.335, 0.6), (0.294, 0.8), (0.255, 1.0)];
    table
        .iter()
        .find(|(zp, _)| (zp - zero_prop).abs() < 1e-9)
        .map(|&(_, a)| a)
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unsupported zero proportion {zero_prop}; expected one of 0.255, 0.294, 0.335, 0.403"
            ))
        })
}

/// Observed record of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: usize,
    /// Scalar covariates (length p).
    pub z: Vec<f64>,
    pub y: f64,
    /// Proxy matrix, replicates by grid points. Zeros are exact `0.0`.
    pub w: DMatrix<f64>,
}

impl SubjectRecord {
    pub fn replicates(&self) -> usize {
        self.w.nrows()
    }
}

/// A collection of subjects on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub subjects: Vec<SubjectRecord>,
    pub grid: TimeGrid,
    pub covariate_names: Vec<String>,
}

impl Dataset {
    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_points(&self) -> usize {
        self.grid.len()
    }

    /// Covariate matrix, one row per subject.
    pub fn covariate_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_subjects(), self.n_covariates(), |i, j| {
            self.subjects[i].z[j]
        })
    }

    /// Outcome vector.
    pub fn outcomes(&self) -> Vec<f64> {
        self.subjects.iter().map(|s| s.y).collect()
    }

    /// Deterministic content hash over every numeric field (bit patterns).
    pub fn content_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.grid.len().hash(&mut h);
        for &t in self.grid.points() {
            t.to_bits().hash(&mut h);
        }
        for s in &self.subjects {
            s.id.hash(&mut h);
            s.y.to_bits().hash(&mut h);
            for &z in &s.z {
                z.to_bits().hash(&mut h);
            }
            s.w.nrows().hash(&mut h);
            for v in s.w.iter() {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

/// Latent quantities generated alongside a simulated dataset.
#[derive(Debug, Clone)]
pub struct SimulatedTruth {
    /// Latent curves, n by m.
    pub x: DMatrix<f64>,
    /// Activation probabilities, n by m.
    pub p: DMatrix<f64>,
    /// Activation coefficient components, 3 by m.
    pub theta: DMatrix<f64>,
}

/// The true coefficient function `beta(t) = sin(2 pi t)` on a grid.
pub fn beta_true_on(grid: &TimeGrid) -> Vec<f64> {
    grid.points()
        .iter()
        .map(|&t| (2.0 * std::f64::consts::PI * t).sin())
        .collect()
}

fn x_mean(t: f64) -> f64 {
    4.0 + (1.0 + 2.8 * std::f64::consts::PI * t).sin()
}

fn x_sd(t: f64) -> f64 {
    (1.0 + 0.1 * (-1.0 + 2.8 * std::f64::consts::PI * t).cos()).sqrt()
}

fn x_corr(s: f64, t: f64) -> f64 {
    (-25.0 * (s - t) * (s - t) / 2.0).exp()
}

fn theta_corr(s: f64, t: f64) -> f64 {
    (-(s - t) * (s - t) / 0.45).exp()
}

fn g_corr(s: f64, t: f64) -> f64 {
    (-50.0 * (s - t) * (s - t)).exp()
}

/// RNG substream `stream` of a master seed.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mix a salt into a master seed (splitmix64 round), for deriving
/// independent per-replicate or per-resample seeds.
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One component of the activation coefficient function:
/// `offset + width * Phi(gp)` with `gp` a stationary standard GP.
/// Every value lies strictly inside `(offset, offset + width)`.
pub fn gen_theta_component<R: Rng + ?Sized>(
    offset: f64,
    width: f64,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if width <= 0.0 {
        return Err(Error::InvalidParameter("theta width must be positive".into()));
    }
    let cov = cov_matrix_from_fn(theta_corr, |_| 1.0, grid)?;
    let factor = GpFactor::new(&cov)?;
    Ok(gen_theta_component_with(offset, width, &factor, grid.len(), rng))
}

fn gen_theta_component_with<R: Rng + ?Sized>(
    offset: f64,
    width: f64,
    factor: &GpFactor,
    m: usize,
    rng: &mut R,
) -> Vec<f64> {
    let draw = factor.sample(&vec![0.0; m], rng);
    draw.into_iter()
        .map(|v| offset + width * std_normal_cdf(v))
        .collect()
}

/// Activation probabilities of one subject:
/// `p(t) = logistic((1, z') theta(t))` componentwise.
pub fn activation_prob(theta: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    assert_eq!(
        theta.nrows(),
        z.len() + 1,
        "theta rows must be 1 + covariate count"
    );
    (0..theta.ncols())
        .map(|t| {
            let mut eta = theta[(0, t)];
            for (k, &zk) in z.iter().enumerate() {
                eta += zk * theta[(k + 1, t)];
            }
            1.0 / (1.0 + (-eta).exp())
        })
        .collect()
}

/// Threshold processes for one subject: `g_j = q_g g0 + sqrt(1 - q_g^2) g1_j`,
/// so each is marginally standard and replicates share correlation `q_g^2`.
fn gen_g_subject<R: Rng + ?Sized>(
    q_g: f64,
    factor: &GpFactor,
    j: usize,
    m: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let zero = vec![0.0; m];
    let g0 = factor.sample(&zero, rng);
    let shared = q_g;
    let fresh = (1.0 - q_g * q_g).sqrt();
    let mut g = DMatrix::zeros(j, m);
    for jj in 0..j {
        let g1 = factor.sample(&zero, rng);
        for t in 0..m {
            g[(jj, t)] = shared * g0[t] + fresh * g1[t];
        }
    }
    g
}

/// Threshold processes for a whole dataset (n subjects, j replicates each).
pub fn gen_g<R: Rng + ?Sized>(
    q_g: f64,
    grid: &TimeGrid,
    n: usize,
    j: usize,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>> {
    if !(0.0..1.0).contains(&q_g) {
        return Err(Error::InvalidParameter(format!(
            "q_g must lie in [0, 1), got {q_g}"
        )));
    }
    let cov = cov_matrix_from_fn(g_corr, |_| 1.0, grid)?;
    let factor = GpFactor::new(&cov)?;
    Ok((0..n)
        .map(|_| gen_g_subject(q_g, &factor, j, grid.len(), rng))
        .collect())
}

/// Proxy matrix of one subject:
/// `w_j(t) = 1[g_j(t) < Phi^{-1}(p(t))] * (x(t) / p(t) + u_j(t))`,
/// with exact zeros where the indicator is off.
pub fn gen_w(x: &[f64], p: &[f64], g: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    let (j, m) = (g.nrows(), g.ncols());
    assert_eq!(x.len(), m);
    assert_eq!(p.len(), m);
    assert_eq!(u.nrows(), j);
    assert_eq!(u.ncols(), m);
    let thresholds: Vec<f64> = p.iter().map(|&pi| std_normal_quantile(pi)).collect();
    DMatrix::from_fn(j, m, |jj, t| {
        if g[(jj, t)] < thresholds[t] {
            x[t] / p[t] + u[(jj, t)]
        } else {
            0.0
        }
    })
}

/// Linear predictor of the outcome model for one subject:
/// Riemann integral of `beta * x` plus `(1, z') gamma`.
pub fn linear_predictor(x: &[f64], z: &[f64], beta: &[f64], gamma: &[f64], grid: &TimeGrid) -> f64 {
    debug_assert_eq!(gamma.len(), z.len() + 1);
    let fx: f64 = beta
        .iter()
        .zip(x)
        .map(|(&b, &xv)| b * xv)
        .sum::<f64>()
        * grid.point_weight();
    let mut eta = fx + gamma[0];
    for (k, &zk) in z.iter().enumerate() {
        eta += gamma[k + 1] * zk;
    }
    eta
}

/// Draw one outcome. Gaussian: identity link plus `N(0, sigma0_sq)` noise.
/// Bernoulli: success probability `logistic(linear predictor)`.
pub fn gen_y<R: Rng + ?Sized>(
    x: &[f64],
    z: &[f64],
    config: &SimConfig,
    beta: &[f64],
    rng: &mut R,
) -> f64 {
    let eta = linear_predictor(x, z, beta, &config.gamma, &config.grid);
    match config.family {
        Family::Gaussian => eta + config.sigma0_sq.sqrt() * rng.sample::<f64, _>(StandardNormal),
        Family::Bernoulli => {
            let p = 1.0 / (1.0 + (-eta).exp());
            if rng.gen::<f64>() < p {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Generate a full dataset and its latent truth. Deterministic given the
/// seed; subjects are simulated on independent RNG substreams and may be
/// processed in parallel.
pub fn simulate_dataset(config: &SimConfig) -> Result<(Dataset, SimulatedTruth)> {
    config.validate()?;
    let grid = &config.grid;
    let m = grid.len();
    let (n, j) = (config.n, config.j);

    let theta_factor = GpFactor::new(&cov_matrix_from_fn(theta_corr, |_| 1.0, grid)?)?;
    let x_factor = GpFactor::new(&cov_matrix_from_fn(x_corr, x_sd, grid)?)?;
    let g_factor = GpFactor::new(&cov_matrix_from_fn(g_corr, |_| 1.0, grid)?)?;
    let u_factor = GpFactor::new(&cov_matrix_from_fn(
        |s, t| config.u_kernel.eval(s, t),
        |_| config.sigma_u,
        grid,
    )?)?;

    // common stream: activation coefficients, then covariates
    let mut common = substream(config.seed, 0);
    let mut theta = DMatrix::zeros(3, m);
    for (k, comp) in config.theta.iter().enumerate() {
        let row = gen_theta_component_with(comp.offset, comp.width, &theta_factor, m, &mut common);
        for t in 0..m {
            theta[(k, t)] = row[t];
        }
    }
    let sigma_c = config.sigma_c_sq.sqrt();
    let z: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let zc = sigma_c * common.sample::<f64, _>(StandardNormal);
            let zb = if common.gen::<f64>() < config.p_b { 1.0 } else { 0.0 };
            vec![zc, zb]
        })
        .collect();

    let beta = beta_true_on(grid);
    let x_mean_vec: Vec<f64> = grid.points().iter().map(|&t| x_mean(t)).collect();
    let zero_mean = vec![0.0; m];

    struct SubjectDraw {
        record: SubjectRecord,
        x: Vec<f64>,
        p: Vec<f64>,
    }

    let draws: Vec<SubjectDraw> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, 1 + i as u64);
            let x = x_factor.sample(&x_mean_vec, &mut rng);
            let g = gen_g_subject(config.q_g, &g_factor, j, m, &mut rng);
            let mut u = DMatrix::zeros(j, m);
            for jj in 0..j {
                let row = u_factor.sample(&zero_mean, &mut rng);
                for t in 0..m {
                    u[(jj, t)] = row[t];
                }
            }
            let p = activation_prob(&theta, &z[i]);
            let w = gen_w(&x, &p, &g, &u);
            let y = gen_y(&x, &z[i], config, &beta, &mut rng);
            SubjectDraw {
                record: SubjectRecord {
                    id: i,
                    z: z[i].clone(),
                    y,
                    w,
                },
                x,
                p,
            }
        })
        .collect();

    let mut x_mat = DMatrix::zeros(n, m);
    let mut p_mat = DMatrix::zeros(n, m);
    let mut subjects = Vec::with_capacity(n);
    for (i, d) in draws.into_iter().enumerate() {
        for t in 0..m {
            x_mat[(i, t)] = d.x[t];
            p_mat[(i, t)] = d.p[t];
        }
        subjects.push(d.record);
    }

    Ok((
        Dataset {
            subjects,
            grid: grid.clone(),
            covariate_names: vec!["z_c".into(), "z_b".into()],
        },
        SimulatedTruth {
            x: x_mat,
            p: p_mat,
            theta,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn theta_component_stays_in_open_interval() {
        let grid = TimeGrid::default_study();
        let mut rng = substream(1, 0);
        for _ in 0..50 {
            let vals = gen_theta_component(0.3, 0.2, &grid, &mut rng).unwrap();
            for v in vals {
                assert!(v > 0.3 && v < 0.5, "value {v} outside (0.3, 0.5)");
            }
        }
    }

    #[test]
    fn theta_component_narrow_width_collapses_to_offset() {
        let grid = TimeGrid::default_study();
        let mut rng = substream(2, 0);
        let vals = gen_theta_component(0.3, 1e-12, &grid, &mut rng).unwrap();
        for v in vals {
            assert_abs_diff_eq!(v, 0.3, epsilon = 1e-11);
        }
    }

    #[test]
    fn theta_component_uniform_marginal() {
        // (value - a) / d = Phi(standard normal) should be Uniform(0, 1);
        // KS statistic over 1e4 draws at a fixed t below 0.02.
        let grid = TimeGrid::uniform(4).unwrap();
        let cov = cov_matrix_from_fn(theta_corr, |_| 1.0, &grid).unwrap();
        let factor = GpFactor::new(&cov).unwrap();
        let mut rng = substream(3, 0);
        let ndraw = 10_000;
        let mut us: Vec<f64> = (0..ndraw)
            .map(|_| {
                let v = gen_theta_component_with(0.3, 0.2, &factor, 4, &mut rng);
                (v[1] - 0.3) / 0.2
            })
            .collect();
        us.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &u) in us.iter().enumerate() {
            let ecdf_hi = (i + 1) as f64 / ndraw as f64;
            let ecdf_lo = i as f64 / ndraw as f64;
            ks = ks.max((ecdf_hi - u).abs()).max((u - ecdf_lo).abs());
        }
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn activation_prob_examples() {
        let theta = DMatrix::zeros(3, 5);
        let p = activation_prob(&theta, &[0.7, 1.0]);
        for v in p {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
        }

        let mut theta = DMatrix::zeros(3, 5);
        for t in 0..5 {
            theta[(0, t)] = 1.0;
        }
        let p = activation_prob(&theta, &[-2.0, 3.0]);
        for v in p {
            assert_abs_diff_eq!(v, 0.7310585786300049, epsilon = 1e-12);
        }

        // negating the continuous component flips its contribution
        let mut theta = DMatrix::zeros(2, 3);
        theta[(1, 0)] = 0.8;
        theta[(1, 1)] = -0.3;
        theta[(1, 2)] = 1.7;
        let p_plus = activation_prob(&theta, &[1.3]);
        let p_minus = activation_prob(&(-theta.clone()), &[1.3]);
        for (a, b) in p_plus.iter().zip(&p_minus) {
            assert_abs_diff_eq!(*a, 1.0 - b, epsilon = 1e-12);
        }
    }

    #[test]
    fn gen_g_reduces_when_q_zero_and_has_unit_variance() {
        let grid = TimeGrid::uniform(6).unwrap();
        let mut rng = substream(6, 0);
        let gs = gen_g(0.4, &grid, 25_000, 4, &mut rng).unwrap();
        // variance at a fixed t across everything
        let mut vals = Vec::new();
        let mut cross = Vec::new();
        for g in &gs {
            for jj in 0..g.nrows() {
                vals.push(g[(jj, 2)]);
            }
            cross.push((g[(0, 2)], g[(1, 2)]));
        }
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        let var: f64 =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "marginal variance {var}");

        // within-subject cross-replicate correlation near q^2 = 0.16
        let mx: f64 = cross.iter().map(|c| c.0).sum::<f64>() / cross.len() as f64;
        let my: f64 = cross.iter().map(|c| c.1).sum::<f64>() / cross.len() as f64;
        let mut num = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for (a, b) in &cross {
            num += (a - mx) * (b - my);
            vx += (a - mx) * (a - mx);
            vy += (b - my) * (b - my);
        }
        let corr = num / (vx.sqrt() * vy.sqrt());
        assert!((corr - 0.16).abs() < 0.02, "cross-replicate correlation {corr}");

        let q0 = gen_g(0.0, &grid, 200, 3, &mut rng).unwrap();
        let mx: f64 = q0.iter().map(|g| g[(0, 0)] * g[(1, 0)]).sum::<f64>() / 200.0;
        assert!(mx.abs() < 0.2, "q=0 replicates should be uncorrelated, got {mx}");
    }

    #[test]
    fn gen_g_rejects_bad_q() {
        let grid = TimeGrid::uniform(4).unwrap();
        let mut rng = substream(0, 0);
        assert!(gen_g(1.0, &grid, 1, 2, &mut rng).is_err());
        assert!(gen_g(-0.1, &grid, 1, 2, &mut rng).is_err());
    }

    #[test]
    fn gen_w_indicator_cases() {
        let m = 4;
        let x = vec![2.0; m];
        let p = vec![0.5; m];
        // forced indicator off
        let g = DMatrix::from_element(1, m, 10.0);
        let u = DMatrix::zeros(1, m);
        let w = gen_w(&x, &p, &g, &u);
        assert!(w.iter().all(|&v| v == 0.0));

        // forced indicator on, no noise: w = x / p
        let g = DMatrix::from_element(1, m, -10.0);
        let w = gen_w(&x, &p, &g, &u);
        for t in 0..m {
            assert_abs_diff_eq!(w[(0, t)], 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gen_w_unbiased_for_latent_curve() {
        // mean of w over many replicate draws approaches x at fixed (i, t)
        let grid = TimeGrid::uniform(3).unwrap();
        let m = grid.len();
        let x = vec![3.0, 4.0, 5.0];
        let p = vec![0.4, 0.6, 0.8];
        let g_factor = GpFactor::new(&cov_matrix_from_fn(g_corr, |_| 1.0, &grid).unwrap()).unwrap();
        let u_factor = GpFactor::new(
            &cov_matrix_from_fn(|s, t| Kernel::SquaredExponential { rho: 0.2 }.eval(s, t), |_| 1.0, &grid)
                .unwrap(),
        )
        .unwrap();
        let mut rng = substream(8, 0);
        let reps = 100_000;
        let mut sums = vec![0.0; m];
        let mut sq = vec![0.0; m];
        let zero = vec![0.0; m];
        for _ in 0..reps {
            let g = DMatrix::from_row_slice(1, m, &g_factor.sample(&zero, &mut rng));
            let u = DMatrix::from_row_slice(1, m, &u_factor.sample(&zero, &mut rng));
            let w = gen_w(&x, &p, &g, &u);
            for t in 0..m {
                sums[t] += w[(0, t)];
                sq[t] += w[(0, t)] * w[(0, t)];
            }
        }
        for t in 0..m {
            let mean = sums[t] / reps as f64;
            let var = sq[t] / reps as f64 - mean * mean;
            let se = (var / reps as f64).sqrt();
            assert!(
                (mean - x[t]).abs() < 4.0 * se,
                "E[w] at t={t}: {mean} vs {} (se {se})",
                x[t]
            );
        }
    }

    #[test]
    fn gen_y_deterministic_cases() {
        let grid = TimeGrid::default_study();
        let mut cfg = SimConfig::study_default(1, 0);
        cfg.sigma0_sq = 0.0;
        cfg.gamma = vec![5.0, 0.2, 0.4];
        let x = vec![1.0; grid.len()];
        let beta_zero = vec![0.0; grid.len()];
        let mut rng = substream(0, 1);
        let y = gen_y(&x, &[0.0, 0.0], &cfg, &beta_zero, &mut rng);
        assert_abs_diff_eq!(y, 5.0, epsilon = 1e-12);

        // beta = sin(2 pi t), x constant: the integral nearly cancels
        let beta = beta_true_on(&grid);
        let eta = linear_predictor(&x, &[0.0, 0.0], &beta, &[0.0, 0.0, 0.0], &grid);
        assert!(eta.abs() < 0.05, "integral of sin over the grid: {eta}");
    }

    #[test]
    fn bernoulli_outcome_balanced_at_zero_predictor() {
        let grid = TimeGrid::default_study();
        let mut cfg = SimConfig::study_default(1, 0);
        cfg.family = Family::Bernoulli;
        cfg.gamma = vec![0.0, 0.0, 0.0];
        let x = vec![0.0; grid.len()];
        let beta = vec![0.0; grid.len()];
        let mut rng = substream(0, 2);
        let reps = 100_000;
        let mean: f64 = (0..reps)
            .map(|_| gen_y(&x, &[0.0, 0.0], &cfg, &beta, &mut rng))
            .sum::<f64>()
            / reps as f64;
        assert!((mean - 0.5).abs() < 0.01, "P(Y=1) should be 0.5, got {mean}");
    }

    #[test]
    fn simulate_dataset_deterministic_and_hashable() {
        let cfg = SimConfig::study_default(20, 99);
        let (a, _) = simulate_dataset(&cfg).unwrap();
        let (b, _) = simulate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());

        let cfg2 = SimConfig::study_default(20, 100);
        let (c, _) = simulate_dataset(&cfg2).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn simulated_zero_fraction_matches_anticipated_proportions() {
        // a0 = 0.6 -> zero fraction near 0.335; a0 = 0.3 -> near 0.403
        for (a0, want) in [(0.6, 0.335), (0.3, 0.403)] {
            let mut total = 0usize;
            let mut zeros = 0usize;
            for rep in 0..8 {
                let mut cfg = SimConfig::study_default(150, 1000 + rep);
                cfg.theta[0].offset = a0;
                let (ds, _) = simulate_dataset(&cfg).unwrap();
                for s in &ds.subjects {
                    zeros += s.w.iter().filter(|&&v| v == 0.0).count();
                    total += s.w.len();
                }
            }
            let frac = zeros as f64 / total as f64;
            assert!(
                (frac - want).abs() < 0.02,
                "zero fraction {frac} vs anticipated {want} (a0 = {a0})"
            );
        }
    }

    #[test]
    fn nonzero_noise_variance_matches_sigma_u() {
        // variance of (w - x/p) over nonzero entries approximates sigma_u^2
        let mut cfg = SimConfig::study_default(300, 7);
        cfg.sigma_u = 1.5;
        let (ds, truth) = simulate_dataset(&cfg).unwrap();
        let mut resid = Vec::new();
        for (i, s) in ds.subjects.iter().enumerate() {
            for jj in 0..s.w.nrows() {
                for t in 0..s.w.ncols() {
                    let w = s.w[(jj, t)];
                    if w != 0.0 {
                        resid.push(w - truth.x[(i, t)] / truth.p[(i, t)]);
                    }
                }
            }
        }
        let nres = resid.len() as f64;
        let mean: f64 = resid.iter().sum::<f64>() / nres;
        let var: f64 = resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (nres - 1.0);
        let want = 1.5f64 * 1.5;
        assert!(
            (var - want).abs() < 0.1,
            "nonzero residual variance {var} vs sigma_u^2 {want}"
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::study_default(10, 0);
        cfg.q_g = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::study_default(10, 0);
        cfg.sigma_u = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::study_default(10, 0);
        cfg.j = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::study_default(10, 0);
        cfg.theta[1].width = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_prop_offset_mapping() {
        assert_abs_diff_eq!(theta0_offset_for_zero_prop(0.335).unwrap(), 0.6);
        assert_abs_diff_eq!(theta0_offset_for_zero_prop(0.403).unwrap(), 0.3);
        assert_abs_diff_eq!(theta0_offset_for_zero_prop(0.255).unwrap(), 1.0);
        assert!(theta0_offset_for_zero_prop(0.5).is_err());
    }
}
