//! Pointwise one-way random-intercept model with BLUP prediction.
//!
//! At each grid point the scaled nonzero proxies of all subjects enter a
//! homoskedastic random-intercept Gaussian model. Variance components are
//! estimated by profiled maximum likelihood: the intercept and residual
//! variance have closed forms given the variance ratio, which is found by
//! a coarse scan plus golden-section refinement. Subject predictions are
//! the usual shrunken deviations (BLUPs).

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::recovery::{ActivationEstimate, Method, RecoveryResult};
use crate::sim::Dataset;

/// Upper end of the variance-ratio bracket.
const LAMBDA_MAX: f64 = 1e6;
/// Absolute golden-section tolerance on the variance ratio.
const LAMBDA_TOL: f64 = 1e-10;

/// Maximum-likelihood fit of `y_ij = b0 + b_i + e_ij` with
/// `b_i ~ N(0, d2)` and `e_ij ~ N(0, s2)`.
#[derive(Debug, Clone)]
pub struct MixedModelFit {
    /// Fixed intercept (the pointwise latent mean).
    pub b0: f64,
    /// Random-intercept variance, truncated at zero.
    pub d2: f64,
    /// Residual variance.
    pub s2: f64,
    /// Shrunken subject deviations, aligned with the input groups.
    pub blup: Vec<f64>,
    /// Set when the likelihood was maximized at the `d2 = 0` boundary.
    pub d2_truncated: bool,
}

impl MixedModelFit {
    /// BLUP shrinkage weight for a group of size `n_i`.
    pub fn shrinkage(&self, n_i: usize) -> f64 {
        let num = self.d2 * n_i as f64;
        let den = num + self.s2;
        if den <= 0.0 {
            0.0
        } else {
            num / den
        }
    }
}

struct GroupStats {
    n: f64,
    mean: f64,
    ss_within: f64,
}

/// Profile deviance pieces at a fixed variance ratio `lambda = d2 / s2`.
/// Returns (-2 log likelihood up to constants, intercept, residual variance).
fn profile_at(groups: &[GroupStats], n_total: f64, lambda: f64) -> (f64, f64, f64) {
    let mut wsum = 0.0;
    let mut wmean = 0.0;
    for g in groups {
        let w = g.n / (1.0 + g.n * lambda);
        wsum += w;
        wmean += w * g.mean;
    }
    let b0 = wmean / wsum;
    let mut q = 0.0;
    let mut logdet = 0.0;
    for g in groups {
        let w = g.n / (1.0 + g.n * lambda);
        q += g.ss_within + w * (g.mean - b0) * (g.mean - b0);
        logdet += (1.0 + g.n * lambda).ln();
    }
    let s2 = q / n_total;
    if s2 <= 0.0 {
        // perfect fit; treat as the global optimum
        return (f64::NEG_INFINITY, b0, 0.0);
    }
    (n_total * s2.ln() + logdet, b0, s2)
}

/// Fit the pointwise random-intercept model to per-subject value groups.
///
/// Requires at least two non-empty groups and at least one group with two
/// or more values; otherwise the variance components are unidentifiable.
pub fn fit_pointwise_mm(groups: &[Vec<f64>]) -> Result<MixedModelFit> {
    let nonempty: Vec<&Vec<f64>> = groups.iter().filter(|g| !g.is_empty()).collect();
    if nonempty.len() != groups.len() {
        return Err(Error::InvalidParameter(
            "empty group passed to the pointwise mixed model".into(),
        ));
    }
    if groups.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "pointwise mixed model needs >= 2 subjects with nonzero data, got {}",
            groups.len()
        )));
    }
    if !groups.iter().any(|g| g.len() >= 2) {
        return Err(Error::InsufficientData(
            "variance components unidentifiable: no subject has >= 2 nonzero replicates".into(),
        ));
    }

    let stats: Vec<GroupStats> = groups
        .iter()
        .map(|g| {
            let n = g.len() as f64;
            let mean = g.iter().sum::<f64>() / n;
            let ss_within = g.iter().map(|v| (v - mean) * (v - mean)).sum();
            GroupStats { n, mean, ss_within }
        })
        .collect();
    let n_total: f64 = stats.iter().map(|g| g.n).sum();

    // coarse scan over the ratio, then golden-section refinement
    let mut candidates = vec![0.0];
    let lo = 1e-8f64;
    let steps = 120;
    for k in 0..=steps {
        let e = (lo.ln()) + (LAMBDA_MAX.ln() - lo.ln()) * k as f64 / steps as f64;
        candidates.push(e.exp());
    }
    let dev = |lam: f64| profile_at(&stats, n_total, lam).0;
    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    for (i, &lam) in candidates.iter().enumerate() {
        let v = dev(lam);
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    let mut a = candidates[best_idx.saturating_sub(1)];
    let mut b = candidates[(best_idx + 1).min(candidates.len() - 1)];
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let mut fc = dev(c);
    let mut fd = dev(d);
    while b - a > LAMBDA_TOL * (1.0 + b) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = dev(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = dev(d);
        }
    }
    let mut lambda = 0.5 * (a + b);
    // snap to the boundary when the refined optimum sits against it
    if dev(0.0) <= dev(lambda) {
        lambda = 0.0;
    }

    let (_, b0, s2) = profile_at(&stats, n_total, lambda);
    let d2 = lambda * s2;
    let fit_d2 = d2.max(0.0);
    // the ratio pinned at the top of the bracket means the likelihood is
    // monotone there (the s2 -> 0 limit); take the limiting no-shrinkage BLUP
    let at_upper_bound = lambda >= 0.999 * LAMBDA_MAX;
    let blup: Vec<f64> = stats
        .iter()
        .map(|g| {
            if at_upper_bound {
                return g.mean - b0;
            }
            let num = fit_d2 * g.n;
            let den = num + s2;
            if den <= 0.0 {
                0.0
            } else {
                (num / den) * (g.mean - b0)
            }
        })
        .collect();

    Ok(MixedModelFit {
        b0,
        d2: fit_d2,
        s2,
        blup,
        d2_truncated: lambda == 0.0,
    })
}

fn recover_pointwise(
    dataset: &Dataset,
    p_hat: Option<&DMatrix<f64>>,
    method: Method,
) -> Result<(DMatrix<f64>, Vec<String>)> {
    let n = dataset.n_subjects();
    let m = dataset.n_points();

    let columns: Vec<Result<(Vec<f64>, Option<String>)>> = (0..m)
        .into_par_iter()
        .map(|t| {
            let mut groups: Vec<Vec<f64>> = Vec::new();
            let mut owners: Vec<usize> = Vec::new();
            for (i, s) in dataset.subjects.iter().enumerate() {
                let scale = p_hat.map_or(1.0, |p| p[(i, t)]);
                let vals: Vec<f64> = match p_hat {
                    // zero-inflated route: nonzero replicates only, scaled
                    Some(_) => (0..s.w.nrows())
                        .filter_map(|j| {
                            let w = s.w[(j, t)];
                            (w != 0.0).then(|| scale * w)
                        })
                        .collect(),
                    // non-zero-inflated route: every replicate, zeros included
                    None => (0..s.w.nrows()).map(|j| s.w[(j, t)]).collect(),
                };
                if !vals.is_empty() {
                    groups.push(vals);
                    owners.push(i);
                }
            }
            let fit = fit_pointwise_mm(&groups).map_err(|e| {
                Error::InsufficientData(format!("time point {t}: {e}"))
            })?;
            let mut col = vec![fit.b0; n];
            for (g, &i) in owners.iter().enumerate() {
                col[i] = fit.b0 + fit.blup[g];
            }
            let mut note = None;
            let excluded = n - owners.len();
            if excluded > 0 {
                note = Some(format!(
                    "t={t}: {excluded} subject(s) without nonzero data imputed at b0"
                ));
            } else if fit.d2_truncated {
                note = Some(format!("t={t}: d2 truncated at 0"));
            }
            Ok((col, note))
        })
        .collect();

    let mut x_hat = DMatrix::zeros(n, m);
    let mut diagnostics = Vec::new();
    for (t, col) in columns.into_iter().enumerate() {
        let (col, note) = col?;
        for i in 0..n {
            x_hat[(i, t)] = col[i];
        }
        if let Some(note) = note {
            diagnostics.push(format!("{}: {note}", method.name()));
        }
    }
    Ok((x_hat, diagnostics))
}

/// Zero-inflated mixed-model recovery: at each grid point the nonzero
/// proxies are scaled by the activation estimate and fed to the pointwise
/// random-intercept fit; predictions are `b0 + blup`, and subjects with no
/// nonzero data receive the intercept.
pub fn recover_mm(dataset: &Dataset, activation: &ActivationEstimate) -> Result<RecoveryResult> {
    let (x_hat, diagnostics) = recover_pointwise(dataset, Some(&activation.p_hat), Method::MixedModel)?;
    let result = RecoveryResult {
        x_hat,
        method: Method::MixedModel,
        activation: Some(activation.clone()),
        diagnostics,
    };
    result.validate_finite()?;
    Ok(result)
}

/// Comparison method that ignores zero inflation: all replicates (zeros
/// included) enter the pointwise mixed model unscaled.
pub fn recover_mm_nonzi(dataset: &Dataset) -> Result<RecoveryResult> {
    let (x_hat, diagnostics) = recover_pointwise(dataset, None, Method::NonZiMixedModel)?;
    let result = RecoveryResult {
        x_hat,
        method: Method::NonZiMixedModel,
        activation: None,
        diagnostics,
    };
    result.validate_finite()?;
    Ok(result)
}
