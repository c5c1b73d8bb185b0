//! Activation-probability estimation from the zero pattern of the proxies.
//!
//! The activation coefficient function is fit pointwise: at each grid index
//! the nonzero indicators of all subjects and replicates are pooled into one
//! Bernoulli-logit regression on the scalar covariates. Replicates within a
//! subject may be correlated, but under an independence working correlation
//! the point estimates coincide with the pooled MLE, which is all the
//! downstream recovery consumes. A distribution-free per-subject proportion
//! estimator is available as well, and doubles as the fallback at time
//! points where the logistic fit separates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::{fit_logistic, IRLS_SCORE_TOL};
use crate::sim::Dataset;
use crate::smooth::smooth_curve;

/// Lower clamp on estimated activation probabilities. The recovery divides
/// and multiplies by these estimates, so they are kept away from {0, 1}.
pub const P_CLAMP_LOW: f64 = 1e-3;
/// Upper clamp on estimated activation probabilities.
pub const P_CLAMP_HIGH: f64 = 1.0 - 1e-3;

/// Maximum IRLS sweeps for the pointwise logistic fits.
const LOGISTIC_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    LogisticPointwise,
    LogisticSmoothed,
    Proportion,
    /// True probabilities passed through (simulation diagnostics only).
    Truth,
}

impl PMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PMethod::LogisticPointwise => "logistic_pointwise",
            PMethod::LogisticSmoothed => "logistic_smoothed",
            PMethod::Proportion => "proportion",
            PMethod::Truth => "truth",
        }
    }

    pub fn parse(s: &str) -> Option<PMethod> {
        match s {
            "logistic" | "logistic_pointwise" | "pointwise" => Some(PMethod::LogisticPointwise),
            "logistic_smoothed" | "smoothed" => Some(PMethod::LogisticSmoothed),
            "proportion" => Some(PMethod::Proportion),
            _ => None,
        }
    }
}

/// Estimated activation probabilities, with the coefficient function when
/// the logistic route produced one.
#[derive(Debug, Clone)]
pub struct ActivationEstimate {
    /// Coefficient function, (1 + p) rows by m columns; absent for the
    /// proportion estimator.
    pub theta_hat: Option<DMatrix<f64>>,
    /// Clamped probabilities, n subjects by m grid points.
    pub p_hat: DMatrix<f64>,
    pub method: PMethod,
    /// Grid indices where the logistic fit fell back to proportions.
    pub fallback_points: Vec<usize>,
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(P_CLAMP_LOW, P_CLAMP_HIGH)
}

/// Per-subject proportion of nonzero replicates at each grid point,
/// clamped away from {0, 1}.
pub fn estimate_p_proportion(dataset: &Dataset) -> ActivationEstimate {
    let n = dataset.n_subjects();
    let m = dataset.n_points();
    let p_hat = DMatrix::from_fn(n, m, |i, t| {
        let w = &dataset.subjects[i].w;
        let nonzero = (0..w.nrows()).filter(|&j| w[(j, t)] != 0.0).count();
        clamp_p(nonzero as f64 / w.nrows() as f64)
    });
    ActivationEstimate {
        theta_hat: None,
        p_hat,
        method: PMethod::Proportion,
        fallback_points: Vec::new(),
    }
}

/// Pointwise logistic estimate of the activation coefficient function and
/// the implied per-subject probabilities.
///
/// With `smoothed` set, each coefficient component is smoothed over the
/// grid before the probabilities are assembled.
pub fn estimate_p_logistic(dataset: &Dataset, smoothed: bool) -> Result<ActivationEstimate> {
    let n = dataset.n_subjects();
    let m = dataset.n_points();
    if n == 0 {
        return Err(Error::InsufficientData("no subjects".into()));
    }
    let p_cov = dataset.n_covariates();
    let total_rows: usize = dataset.subjects.iter().map(|s| s.replicates()).sum();

    // stacked design (1, z') with one row per replicate
    let mut design = DMatrix::zeros(total_rows, 1 + p_cov);
    {
        let mut r = 0;
        for s in &dataset.subjects {
            for _ in 0..s.replicates() {
                design[(r, 0)] = 1.0;
                for k in 0..p_cov {
                    design[(r, 1 + k)] = s.z[k];
                }
                r += 1;
            }
        }
    }
    crate::glm::check_full_rank(&design)?;

    let mut theta_hat = DMatrix::zeros(1 + p_cov, m);
    let mut fallback_points = Vec::new();
    let mut fallback_cols: Vec<Option<Vec<f64>>> = vec![None; m];

    for t in 0..m {
        let mut y = DVector::zeros(total_rows);
        let mut r = 0;
        for s in &dataset.subjects {
            for j in 0..s.replicates() {
                y[r] = if s.w[(j, t)] != 0.0 { 1.0 } else { 0.0 };
                r += 1;
            }
        }
        let fit = fit_logistic(&design, &y, LOGISTIC_MAX_ITER, IRLS_SCORE_TOL)?;
        if fit.separated || !fit.converged {
            fallback_points.push(t);
            let prop = estimate_p_proportion_column(dataset, t);
            fallback_cols[t] = Some(prop);
        } else {
            for k in 0..=p_cov {
                theta_hat[(k, t)] = fit.coef[k];
            }
        }
    }

    if smoothed {
        let grid = &dataset.grid;
        for k in 0..=p_cov {
            let row: Vec<f64> = (0..m).map(|t| theta_hat[(k, t)]).collect();
            let sm = smooth_curve(&row, grid);
            for t in 0..m {
                theta_hat[(k, t)] = sm[t];
            }
        }
    }

    let mut p_hat = DMatrix::zeros(n, m);
    for t in 0..m {
        if let Some(prop) = &fallback_cols[t] {
            for i in 0..n {
                p_hat[(i, t)] = prop[i];
            }
        } else {
            for (i, s) in dataset.subjects.iter().enumerate() {
                let mut eta = theta_hat[(0, t)];
                for k in 0..p_cov {
                    eta += s.z[k] * theta_hat[(1 + k, t)];
                }
                p_hat[(i, t)] = clamp_p(1.0 / (1.0 + (-eta).exp()));
            }
        }
    }

    Ok(ActivationEstimate {
        theta_hat: Some(theta_hat),
        p_hat,
        method: if smoothed {
            PMethod::LogisticSmoothed
        } else {
            PMethod::LogisticPointwise
        },
        fallback_points,
    })
}

fn estimate_p_proportion_column(dataset: &Dataset, t: usize) -> Vec<f64> {
    dataset
        .subjects
        .iter()
        .map(|s| {
            let nonzero = (0..s.w.nrows()).filter(|&j| s.w[(j, t)] != 0.0).count();
            clamp_p(nonzero as f64 / s.w.nrows() as f64)
        })
        .collect()
}

/// Wrap true activation probabilities as an estimate (clamped), for
/// diagnostics and truth-fed recoveries in simulation.
pub fn activation_from_truth(p: &DMatrix<f64>) -> ActivationEstimate {
    ActivationEstimate {
        theta_hat: None,
        p_hat: p.map(clamp_p),
        method: PMethod::Truth,
        fallback_points: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::sim::SubjectRecord;
    use approx::assert_abs_diff_eq;

    /// A dataset with explicitly chosen proxy matrices and no covariates.
    fn dataset_no_covariates(ws: Vec<DMatrix<f64>>, m: usize) -> Dataset {
        let grid = TimeGrid::uniform(m).unwrap();
        let subjects = ws
            .into_iter()
            .enumerate()
            .map(|(i, w)| SubjectRecord {
                id: i,
                z: vec![],
                y: 0.0,
                w,
            })
            .collect();
        Dataset {
            subjects,
            grid,
            covariate_names: vec![],
        }
    }

    #[test]
    fn proportion_estimator_basic_and_clamped() {
        // J = 7, 3 nonzero -> 3/7; all zero -> clamp low; all nonzero -> clamp high
        let mut w = DMatrix::zeros(7, 3);
        for j in 0..3 {
            w[(j, 0)] = 1.0;
        }
        for j in 0..7 {
            w[(j, 2)] = 2.0;
        }
        let ds = dataset_no_covariates(vec![w], 3);
        let est = estimate_p_proportion(&ds);
        assert_abs_diff_eq!(est.p_hat[(0, 0)], 3.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(est.p_hat[(0, 1)], P_CLAMP_LOW, epsilon = 1e-15);
        assert_abs_diff_eq!(est.p_hat[(0, 2)], P_CLAMP_HIGH, epsilon = 1e-15);
    }

    #[test]
    fn intercept_only_logistic_is_pooled_proportion() {
        // 100 replicate rows (20 subjects x 5), 70 nonzero:
        // theta0 = log(0.7 / 0.3) and p_hat is the pooled proportion for all subjects.
        let mut ws = Vec::new();
        let mut count = 0;
        for _ in 0..20 {
            let mut w = DMatrix::zeros(5, 2);
            for j in 0..5 {
                if count < 70 {
                    w[(j, 0)] = 1.0;
                    count += 1;
                }
                w[(j, 1)] = 1.0; // all nonzero at t=1 -> separation/fallback clamp
            }
            ws.push(w);
        }
        let ds = dataset_no_covariates(ws, 2);
        let est = estimate_p_logistic(&ds, false).unwrap();
        let theta = est.theta_hat.as_ref().unwrap();
        assert_abs_diff_eq!(theta[(0, 0)], (0.7f64 / 0.3).ln(), epsilon = 1e-6);
        for i in 0..20 {
            assert_abs_diff_eq!(est.p_hat[(i, 0)], 0.7, epsilon = 1e-8);
        }
        // t=1: every indicator is 1 -> fallback to proportions, clamped high
        assert!(est.fallback_points.contains(&1));
        for i in 0..20 {
            assert_abs_diff_eq!(est.p_hat[(i, 1)], P_CLAMP_HIGH, epsilon = 1e-15);
        }
    }

    #[test]
    fn logistic_with_covariate_tracks_group_rates() {
        // two covariate groups with different activation rates
        let grid = TimeGrid::uniform(2).unwrap();
        let mut subjects = Vec::new();
        for i in 0..40 {
            let zb = if i < 20 { 0.0 } else { 1.0 };
            let rate = if zb == 0.0 { 2 } else { 8 }; // of 10 replicates
            let mut w = DMatrix::zeros(10, 2);
            for j in 0..rate {
                w[(j, 0)] = 1.0;
                w[(j, 1)] = 1.0;
            }
            subjects.push(SubjectRecord {
                id: i,
                z: vec![zb],
                y: 0.0,
                w,
            });
        }
        let ds = Dataset {
            subjects,
            grid,
            covariate_names: vec!["z_b".into()],
        };
        let est = estimate_p_logistic(&ds, false).unwrap();
        assert_abs_diff_eq!(est.p_hat[(0, 0)], 0.2, epsilon = 1e-6);
        assert_abs_diff_eq!(est.p_hat[(39, 0)], 0.8, epsilon = 1e-6);
    }

    #[test]
    fn smoothed_variant_smooths_theta() {
        use crate::sim::{simulate_dataset, SimConfig};
        let cfg = SimConfig::study_default(60, 5);
        let (ds, _) = simulate_dataset(&cfg).unwrap();
        let raw = estimate_p_logistic(&ds, false).unwrap();
        let smooth = estimate_p_logistic(&ds, true).unwrap();
        assert_eq!(smooth.method, PMethod::LogisticSmoothed);
        // smoothing reduces the total curvature of the coefficient rows
        let roughness = |theta: &DMatrix<f64>| -> f64 {
            let mut r = 0.0;
            for k in 0..theta.nrows() {
                for t in 1..theta.ncols() - 1 {
                    let dd = theta[(k, t + 1)] - 2.0 * theta[(k, t)] + theta[(k, t - 1)];
                    r += dd * dd;
                }
            }
            r
        };
        let r_raw = roughness(raw.theta_hat.as_ref().unwrap());
        let r_sm = roughness(smooth.theta_hat.as_ref().unwrap());
        assert!(r_sm < r_raw, "smoothed roughness {r_sm} vs raw {r_raw}");
    }

    #[test]
    fn truth_wrapper_clamps() {
        let p = DMatrix::from_row_slice(1, 3, &[0.5, 0.9999, 1e-9]);
        let est = activation_from_truth(&p);
        assert_abs_diff_eq!(est.p_hat[(0, 0)], 0.5);
        assert_abs_diff_eq!(est.p_hat[(0, 1)], P_CLAMP_HIGH);
        assert_abs_diff_eq!(est.p_hat[(0, 2)], P_CLAMP_LOW);
    }
}
