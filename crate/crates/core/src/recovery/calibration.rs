//! Pointwise regression calibration.
//!
//! The latent value at a grid point is replaced by its conditional
//! expectation given all replicate proxies at that point, mixing the
//! Gaussian prior implied by the latent-process moments with the
//! zero-inflated observation likelihood. Nuisance moments come from the
//! closed-form sample estimators; the conditional expectation is a ratio
//! of univariate integrals evaluated by 64-node Gauss-Hermite quadrature
//! in log space.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::gauss_hermite_64;
use crate::recovery::{ActivationEstimate, Method, RecoveryResult};
use crate::sim::Dataset;

/// Variances below this are treated as degenerate point masses.
const VAR_FLOOR: f64 = 1e-12;

/// Pointwise moment estimates feeding the calibration integral.
#[derive(Debug, Clone)]
pub struct MomentEstimates {
    /// Grand mean of all proxies (zeros included), per grid point.
    pub mu_x: Vec<f64>,
    /// Latent variance estimate, truncated at zero, per grid point.
    pub var_x: Vec<f64>,
    /// Measurement-error variance estimate, per grid point.
    pub var_u: Vec<f64>,
    /// Nonzero replicate counts, subjects by grid points.
    pub r: DMatrix<f64>,
    /// Subjects with any nonzero replicate, per grid point.
    pub n_star: Vec<usize>,
    /// Subjects with more than one nonzero replicate, per grid point.
    pub n1_star: Vec<usize>,
    /// Nonzero replicate means per subject (zero where undefined).
    pub wbar_star_subject: DMatrix<f64>,
    /// Mean of the subject nonzero means, per grid point.
    pub wbar_star: Vec<f64>,
}

/// Sample moments of the latent process and measurement error.
///
/// Requires, at every grid point, at least two subjects with nonzero data
/// and at least one subject with two or more nonzero replicates.
pub fn estimate_moments(
    dataset: &Dataset,
    activation: &ActivationEstimate,
) -> Result<MomentEstimates> {
    let n = dataset.n_subjects();
    let m = dataset.n_points();
    let total_reps: usize = dataset.subjects.iter().map(|s| s.replicates()).sum();

    let mut mu_x = vec![0.0; m];
    let mut var_x = vec![0.0; m];
    let mut var_u = vec![0.0; m];
    let mut r = DMatrix::zeros(n, m);
    let mut n_star = vec![0usize; m];
    let mut n1_star = vec![0usize; m];
    let mut wbar_star_subject = DMatrix::zeros(n, m);
    let mut wbar_star = vec![0.0; m];

    for t in 0..m {
        let mut grand_sum = 0.0;
        for (i, s) in dataset.subjects.iter().enumerate() {
            let mut count = 0usize;
            let mut sum_nz = 0.0;
            for j in 0..s.replicates() {
                let w = s.w[(j, t)];
                grand_sum += w;
                if w != 0.0 {
                    count += 1;
                    sum_nz += w;
                }
            }
            r[(i, t)] = count as f64;
            if count > 0 {
                wbar_star_subject[(i, t)] = sum_nz / count as f64;
                n_star[t] += 1;
            }
            if count > 1 {
                n1_star[t] += 1;
            }
        }
        if n_star[t] < 2 {
            return Err(Error::InsufficientData(format!(
                "time point {t}: need >= 2 subjects with nonzero data, got {}",
                n_star[t]
            )));
        }
        if n1_star[t] < 1 {
            return Err(Error::InsufficientData(format!(
                "time point {t}: no subject has > 1 nonzero replicate, measurement-error variance unidentifiable"
            )));
        }
        mu_x[t] = grand_sum / total_reps as f64;
        let mut wb = 0.0;
        for i in 0..n {
            if r[(i, t)] > 0.0 {
                wb += wbar_star_subject[(i, t)];
            }
        }
        wb /= n_star[t] as f64;
        wbar_star[t] = wb;

        let mut sx = 0.0;
        for i in 0..n {
            if r[(i, t)] > 0.0 {
                let dev = activation.p_hat[(i, t)] * (wbar_star_subject[(i, t)] - wb);
                sx += dev * dev;
            }
        }
        var_x[t] = (sx / (n_star[t] as f64 - 1.0)).max(0.0);

        let mut su = 0.0;
        for (i, s) in dataset.subjects.iter().enumerate() {
            let ri = r[(i, t)];
            if ri > 1.0 {
                let mut ss = 0.0;
                for j in 0..s.replicates() {
                    let w = s.w[(j, t)];
                    if w != 0.0 {
                        let d = w - wbar_star_subject[(i, t)];
                        ss += d * d;
                    }
                }
                su += ss / (ri - 1.0);
            }
        }
        var_u[t] = su / n1_star[t] as f64;
    }

    Ok(MomentEstimates {
        mu_x,
        var_x,
        var_u,
        r,
        n_star,
        n1_star,
        wbar_star_subject,
        wbar_star,
    })
}

/// Plug-in parameters of the calibration integral at one grid point.
#[derive(Debug, Clone, Copy)]
pub struct RcParams {
    pub p: f64,
    pub mu_x: f64,
    pub var_x: f64,
    pub var_u: f64,
}

/// Conditional expectation of the latent value given one subject's
/// replicate proxies at a grid point.
///
/// The zero/nonzero mixture weights do not involve the latent value, so
/// they cancel in the ratio; only nonzero replicates contribute likelihood
/// terms. The quadrature is 64-node Gauss-Hermite recentered on the
/// Gaussian that dominates the integrand, evaluated in log space with
/// max-subtraction.
pub fn rc_conditional_expectation(w_row: &[f64], params: RcParams) -> Result<f64> {
    let RcParams { p, mu_x, var_x, var_u } = params;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "activation probability must lie in (0, 1), got {p}"
        )));
    }
    if var_x < 0.0 || var_u < 0.0 {
        return Err(Error::InvalidParameter(
            "variances must be nonnegative".into(),
        ));
    }
    let nonzero: Vec<f64> = w_row.iter().copied().filter(|&w| w != 0.0).collect();
    let r = nonzero.len();

    // all replicates zero: the likelihood is flat in x and the ratio is the prior mean
    if r == 0 || var_x <= VAR_FLOOR {
        return Ok(mu_x);
    }
    // vanishing measurement error: the likelihood collapses on p * mean(w*)
    if var_u <= VAR_FLOOR {
        return Ok(p * nonzero.iter().sum::<f64>() / r as f64);
    }

    // Gaussian that dominates the integrand (prior x likelihood), used as
    // the quadrature center and scale
    let prec = 1.0 / var_x + r as f64 / (p * p * var_u);
    let center = (mu_x / var_x + nonzero.iter().sum::<f64>() / (p * var_u)) / prec;
    let scale = (1.0 / prec).sqrt();

    let (nodes, weights) = gauss_hermite_64();
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut log_vals = Vec::with_capacity(nodes.len());
    let mut xs = Vec::with_capacity(nodes.len());
    for &z in nodes {
        let x = center + sqrt2 * scale * z;
        let mut ll = 0.0;
        for &w in &nonzero {
            let d = w - x / p;
            ll -= d * d / (2.0 * var_u);
        }
        let dp = x - mu_x;
        let lp = -dp * dp / (2.0 * var_x);
        // add back z^2 since the GH weight carries exp(-z^2)
        log_vals.push(ll + lp + z * z);
        xs.push(x);
    }
    let max_log = log_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max_log.is_finite() {
        return Err(Error::NumericalDegeneracy(format!(
            "calibration integrand degenerate (p={p}, var_x={var_x}, var_u={var_u}, r={r})"
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..nodes.len() {
        let v = weights[k] * (log_vals[k] - max_log).exp();
        num += v * xs[k];
        den += v;
    }
    if den <= 0.0 || !num.is_finite() {
        return Err(Error::NumericalDegeneracy(format!(
            "calibration ratio degenerate after max-subtraction (den={den})"
        )));
    }
    Ok(num / den)
}

/// Regression-calibration recovery: every entry of the predicted matrix is
/// the pointwise conditional expectation under the plug-in moments.
pub fn recover_rc(dataset: &Dataset, activation: &ActivationEstimate) -> Result<RecoveryResult> {
    let moments = estimate_moments(dataset, activation)?;
    let n = dataset.n_subjects();
    let m = dataset.n_points();

    let columns: Vec<Result<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|t| {
            let mut col = vec![0.0; n];
            for (i, s) in dataset.subjects.iter().enumerate() {
                let row: Vec<f64> = (0..s.replicates()).map(|j| s.w[(j, t)]).collect();
                let params = RcParams {
                    p: activation.p_hat[(i, t)],
                    mu_x: moments.mu_x[t],
                    var_x: moments.var_x[t],
                    var_u: moments.var_u[t],
                };
                col[i] = rc_conditional_expectation(&row, params)
                    .map_err(|e| Error::NumericalDegeneracy(format!("subject {i}, time {t}: {e}")))?;
            }
            Ok(col)
        })
        .collect();

    let mut x_hat = DMatrix::zeros(n, m);
    for (t, col) in columns.into_iter().enumerate() {
        let col = col?;
        for i in 0..n {
            x_hat[(i, t)] = col[i];
        }
    }
    let result = RecoveryResult {
        x_hat,
        method: Method::RegressionCalibration,
        activation: Some(activation.clone()),
        diagnostics: Vec::new(),
    };
    result.validate_finite()?;
    Ok(result)
}
