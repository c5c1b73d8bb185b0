//! Least-squares and logistic fitting shared by the regression layer and
//! the pointwise activation-probability estimator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default IRLS iteration cap for the outcome GLM.
pub const IRLS_MAX_ITER: usize = 100;
/// Convergence threshold on the maximum absolute score component.
pub const IRLS_SCORE_TOL: f64 = 1e-8;
/// A coefficient beyond this magnitude flags (quasi-)separation.
pub const SEPARATION_BOUND: f64 = 15.0;
/// Fitted-probability clamp inside IRLS weights.
pub const IRLS_PROB_CLAMP: f64 = 1e-10;

/// Check the design for full column rank; on failure, name offending columns.
///
/// A column is flagged when its residual after projecting out the preceding
/// independent columns is negligible relative to its own norm.
pub fn check_full_rank(x: &DMatrix<f64>) -> Result<()> {
    let (n, p) = (x.nrows(), x.ncols());
    if n < p {
        return Err(Error::CovariateCollinearity(format!(
            "design has more columns ({p}) than rows ({n})"
        )));
    }
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut offenders = Vec::new();
    for j in 0..p {
        let col = x.column(j).into_owned();
        let scale = col.norm();
        let mut r = col.clone();
        for q in &basis {
            let c = q.dot(&r);
            r -= q * c;
        }
        // re-orthogonalize once for stability
        for q in &basis {
            let c = q.dot(&r);
            r -= q * c;
        }
        if r.norm() <= 1e-10 * scale.max(1e-300) {
            offenders.push(j);
        } else {
            basis.push(&r / r.norm());
        }
    }
    if !offenders.is_empty() {
        return Err(Error::CovariateCollinearity(format!(
            "design matrix is rank deficient (rank {} of {p}); dependent columns: {offenders:?}",
            p - offenders.len()
        )));
    }
    Ok(())
}

/// Ordinary least squares via QR. Requires full column rank.
pub fn solve_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "design has {} rows, response has {}",
            x.nrows(),
            y.len()
        )));
    }
    check_full_rank(x)?;
    qr_lstsq(x, y)
        .ok_or_else(|| Error::NumericalDegeneracy("QR solve failed on a full-rank design".into()))
}

/// Least-squares solution of a tall system via thin QR.
fn qr_lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&qty)
}

/// Weighted least squares with per-row weights (used inside IRLS).
fn solve_weighted(x: &DMatrix<f64>, z: &DVector<f64>, w: &DVector<f64>) -> Option<DVector<f64>> {
    let mut xw = x.clone();
    let mut zw = z.clone();
    for i in 0..x.nrows() {
        let s = w[i].sqrt();
        for j in 0..x.ncols() {
            xw[(i, j)] *= s;
        }
        zw[i] *= s;
    }
    qr_lstsq(&xw, &zw)
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coef: DVector<f64>,
    pub converged: bool,
    pub separated: bool,
    pub iterations: usize,
    /// Maximum absolute score component at the returned iterate.
    pub max_score: f64,
}

/// Bernoulli-logit maximum likelihood by iteratively reweighted least squares.
///
/// Convergence is `max |score| < tol`; a coefficient wandering past
/// `SEPARATION_BOUND` marks the fit as separated, and the last iterate is
/// returned with the flag set rather than erroring (callers decide how to
/// fall back).
pub fn fit_logistic(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<LogisticFit> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::InvalidParameter(format!(
            "design has {n} rows, response has {}",
            y.len()
        )));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidParameter(
            "logistic response must be 0/1".into(),
        ));
    }
    check_full_rank(x)?;

    let mut coef = DVector::<f64>::zeros(p);
    let mut max_score = f64::INFINITY;
    for iter in 0..max_iter {
        let eta = x * &coef;
        let mu = eta.map(|e| {
            let p = 1.0 / (1.0 + (-e).exp());
            p.clamp(IRLS_PROB_CLAMP, 1.0 - IRLS_PROB_CLAMP)
        });
        let resid = y - &mu;
        let score = x.transpose() * &resid;
        max_score = score.amax();
        if max_score < tol {
            return Ok(LogisticFit {
                coef,
                converged: true,
                separated: false,
                iterations: iter,
                max_score,
            });
        }
        let w = mu.map(|m| m * (1.0 - m));
        // working response z = eta + (y - mu) / w
        let mut z = eta.clone();
        for i in 0..n {
            z[i] += resid[i] / w[i];
        }
        let next = solve_weighted(x, &z, &w).ok_or_else(|| {
            Error::NumericalDegeneracy("weighted least squares failed inside IRLS".into())
        })?;
        coef = next;
        if coef.amax() > SEPARATION_BOUND {
            return Ok(LogisticFit {
                coef,
                converged: false,
                separated: true,
                iterations: iter + 1,
                max_score,
            });
        }
    }
    Ok(LogisticFit {
        coef,
        converged: false,
        separated: false,
        iterations: max_iter,
        max_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn least_squares_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 60;
        let x = DMatrix::from_fn(n, 3, |_, j| {
            if j == 0 {
                1.0
            } else {
                rng.gen::<f64>() * 2.0 - 1.0
            }
        });
        let y = DVector::from_fn(n, |_, _| rng.gen::<f64>());
        let beta = solve_least_squares(&x, &y).unwrap();
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &y;
        let direct = xtx.lu().solve(&xty).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(beta[j], direct[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 30;
        let mut x = DMatrix::from_fn(n, 4, |_, _| rng.gen::<f64>());
        for i in 0..n {
            let v = x[(i, 1)];
            x[(i, 3)] = 2.0 * v; // duplicate direction
        }
        let err = check_full_rank(&x).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rank deficient"), "{msg}");
    }

    #[test]
    fn logistic_intercept_only_closed_form() {
        // 70 of 100 ones: theta0 = log(0.7 / 0.3)
        let n = 100;
        let x = DMatrix::from_element(n, 1, 1.0);
        let y = DVector::from_fn(n, |i, _| if i < 70 { 1.0 } else { 0.0 });
        let fit = fit_logistic(&x, &y, 50, 1e-10).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.coef[0], (0.7f64 / 0.3).ln(), epsilon = 1e-8);
    }

    #[test]
    fn logistic_score_small_at_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 400;
        let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.gen::<f64>() - 0.5 });
        let y = DVector::from_fn(n, |i, _| {
            let eta = 0.4 + 1.2 * x[(i, 1)];
            let p = 1.0 / (1.0 + (-eta as f64).exp());
            if rng.gen::<f64>() < p {
                1.0
            } else {
                0.0
            }
        });
        let fit = fit_logistic(&x, &y, 100, 1e-8).unwrap();
        assert!(fit.converged);
        assert!(fit.max_score < 1e-6);
    }

    #[test]
    fn logistic_detects_separation() {
        let n = 40;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 - 20.0 });
        let y = DVector::from_fn(n, |i, _| if i < 20 { 0.0 } else { 1.0 });
        let fit = fit_logistic(&x, &y, 100, 1e-8).unwrap();
        assert!(fit.separated);
    }

    #[test]
    fn logistic_rejects_non_binary() {
        let x = DMatrix::from_element(3, 1, 1.0);
        let y = DVector::from_vec(vec![0.0, 0.5, 1.0]);
        assert!(fit_logistic(&x, &y, 10, 1e-8).is_err());
    }
}
