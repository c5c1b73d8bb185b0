//! Monte Carlo study orchestration, bias/variance metrics, and
//! subject-level bootstrap confidence bands.
//!
//! A study runs R independent replicates per factor level. Within one
//! replicate every method and basis consumes the identical dataset
//! (matched seeds), and replicate seeds are shared across factor levels so
//! sweeps compare like with like. Replicates run concurrently on derived
//! RNG substreams; aggregation is order-independent.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernel::Kernel;
use crate::recovery::{
    activation_from_truth, estimate_p_logistic, estimate_p_proportion, run_method,
    ActivationEstimate, Method, PMethod,
};
use crate::sim::{
    beta_true_on, derive_seed, simulate_dataset, substream, theta0_offset_for_zero_prop, Dataset,
    Family, SimConfig, SimulatedTruth,
};
use crate::sofr::{build_design, fit_glm, reconstruct_beta, BasisSpec};

/// Which data-generating factor a study varies, and over which values.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "factor", content = "levels", rename_all = "snake_case")]
pub enum FactorSweep {
    None,
    SampleSize(Vec<usize>),
    SigmaU(Vec<f64>),
    UKernel(Vec<Kernel>),
    /// Anticipated zero proportions (mapped to intercept offsets).
    ZeroProportion(Vec<f64>),
    QG(Vec<f64>),
    Family(Vec<Family>),
}

impl FactorSweep {
    pub fn factor_name(&self) -> &'static str {
        match self {
            FactorSweep::None => "none",
            FactorSweep::SampleSize(_) => "n",
            FactorSweep::SigmaU(_) => "sigma_u",
            FactorSweep::UKernel(_) => "u_kernel",
            FactorSweep::ZeroProportion(_) => "zero_proportion",
            FactorSweep::QG(_) => "q_g",
            FactorSweep::Family(_) => "family",
        }
    }

    /// Expand into (level label, modified config) pairs.
    pub fn expand(&self, base: &SimConfig) -> Result<Vec<(String, SimConfig)>> {
        let mut out = Vec::new();
        match self {
            FactorSweep::None => out.push(("default".to_string(), base.clone())),
            FactorSweep::SampleSize(ns) => {
                for &n in ns {
                    let mut c = base.clone();
                    c.n = n;
                    out.push((n.to_string(), c));
                }
            }
            FactorSweep::SigmaU(sus) => {
                for &su in sus {
                    let mut c = base.clone();
                    c.sigma_u = su;
                    out.push((format!("{su}"), c));
                }
            }
            FactorSweep::UKernel(kernels) => {
                for &k in kernels {
                    let mut c = base.clone();
                    c.u_kernel = k.validated()?;
                    out.push((format!("{}:{}", k.family_name(), k.rho()), c));
                }
            }
            FactorSweep::ZeroProportion(zps) => {
                for &zp in zps {
                    let mut c = base.clone();
                    c.theta[0].offset = theta0_offset_for_zero_prop(zp)?;
                    out.push((format!("{zp}"), c));
                }
            }
            FactorSweep::QG(qs) => {
                for &q in qs {
                    let mut c = base.clone();
                    c.q_g = q;
                    out.push((format!("{q}"), c));
                }
            }
            FactorSweep::Family(fams) => {
                for &f in fams {
                    let mut c = base.clone();
                    c.family = f;
                    out.push((f.name().to_string(), c));
                }
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter("factor sweep has no levels".into()));
        }
        Ok(out)
    }
}

/// Full study specification.
#[derive(Debug, Clone, Serialize)]
pub struct StudyConfig {
    pub base: SimConfig,
    /// Monte Carlo replicates per factor level.
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub bases: Vec<BasisSpec>,
    /// How the bias-corrected recoveries estimate activation.
    pub p_method: PMethod,
    pub sweep: FactorSweep,
    pub master_seed: u64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidParameter(format!(
                "study needs R >= 2 replicates, got {}",
                self.replicates
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods requested".into()));
        }
        if self.bases.is_empty() {
            return Err(Error::InvalidParameter("no basis specs requested".into()));
        }
        for b in &self.bases {
            b.validate()?;
        }
        self.base.validate()?;
        self.sweep.expand(&self.base)?;
        Ok(())
    }
}

/// Aggregated metrics for one (method, basis, factor level) cell.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsEntry {
    pub method: Method,
    pub basis: BasisSpec,
    pub factor: String,
    pub level: String,
    /// Integrated squared deviation of the mean estimated coefficient
    /// curve from the truth.
    pub squared_bias: f64,
    /// Integrated replicate dispersion (divisor R - 1).
    pub variance: f64,
    pub replicates_used: usize,
    pub failures: usize,
    /// Replicate coefficient curves, retained for audit.
    #[serde(skip)]
    pub curves: Vec<Vec<f64>>,
}

/// Squared bias and variance of a set of replicate coefficient curves
/// against the true curve.
pub fn compute_metrics(
    beta_hats: &[Vec<f64>],
    beta_true: &[f64],
    grid: &TimeGrid,
) -> Result<(f64, f64)> {
    let r = beta_hats.len();
    if r < 2 {
        return Err(Error::InsufficientData(format!(
            "metrics need >= 2 replicate curves, got {r}"
        )));
    }
    let m = grid.len();
    let mut mean = vec![0.0; m];
    for bh in beta_hats {
        for t in 0..m {
            mean[t] += bh[t];
        }
    }
    for v in &mut mean {
        *v /= r as f64;
    }
    let sq_dev: Vec<f64> = (0..m)
        .map(|t| (mean[t] - beta_true[t]) * (mean[t] - beta_true[t]))
        .collect();
    let squared_bias = crate::sofr::riemann_integrate(&sq_dev, grid);
    let disp: Vec<f64> = (0..m)
        .map(|t| {
            beta_hats
                .iter()
                .map(|bh| (bh[t] - mean[t]) * (bh[t] - mean[t]))
                .sum::<f64>()
                / (r - 1) as f64
        })
        .collect();
    let variance = crate::sofr::riemann_integrate(&disp, grid);
    Ok((squared_bias, variance))
}

fn estimate_activation(
    dataset: &Dataset,
    truth: Option<&SimulatedTruth>,
    p_method: PMethod,
) -> Result<ActivationEstimate> {
    match p_method {
        PMethod::LogisticPointwise => estimate_p_logistic(dataset, false),
        PMethod::LogisticSmoothed => estimate_p_logistic(dataset, true),
        PMethod::Proportion => Ok(estimate_p_proportion(dataset)),
        PMethod::Truth => {
            let truth = truth.ok_or_else(|| {
                Error::InvalidParameter("truth-fed activation needs simulated truth".into())
            })?;
            Ok(activation_from_truth(&truth.p))
        }
    }
}

/// Fit one method and basis on a dataset, returning the coefficient curve
/// on the dataset grid.
pub fn fit_beta_curve(
    dataset: &Dataset,
    truth: Option<&SimulatedTruth>,
    method: Method,
    activation: Option<&ActivationEstimate>,
    basis: BasisSpec,
    family: Family,
) -> Result<Vec<f64>> {
    let rec = run_method(dataset, truth, method, activation)?;
    let z = dataset.covariate_matrix();
    let design = build_design(&rec.x_hat, &z, basis, &dataset.grid)?;
    let y = dataset.outcomes();
    let fit = fit_glm(&design, &y, family, basis.k, basis)?;
    reconstruct_beta(&fit, &dataset.grid)
}

/// One replicate of a study level: simulate, estimate activation once,
/// then fit every (method, basis) pair on the same dataset.
fn run_replicate(
    cfg: &SimConfig,
    methods: &[Method],
    bases: &[BasisSpec],
    p_method: PMethod,
) -> Result<Vec<Vec<f64>>> {
    let (dataset, truth) = simulate_dataset(cfg)?;
    let needs_act = methods.iter().any(|m| m.needs_activation());
    let activation = if needs_act {
        Some(estimate_activation(&dataset, Some(&truth), p_method)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(methods.len() * bases.len());
    for &method in methods {
        for &basis in bases {
            out.push(fit_beta_curve(
                &dataset,
                Some(&truth),
                method,
                activation.as_ref(),
                basis,
                cfg.family,
            )?);
        }
    }
    Ok(out)
}

/// Run the full study. Replicate seeds derive from the master seed and are
/// shared across factor levels; output is bitwise reproducible.
pub fn run_study(config: &StudyConfig) -> Result<Vec<MetricsEntry>> {
    config.validate()?;
    let levels = config.sweep.expand(&config.base)?;
    let r_total = config.replicates;
    let mut entries = Vec::new();

    for (level_label, level_cfg) in levels {
        let replicate_curves: Vec<Result<Vec<Vec<f64>>>> = (0..r_total)
            .into_par_iter()
            .map(|r| {
                let mut cfg = level_cfg.clone();
                cfg.seed = derive_seed(config.master_seed, r as u64);
                run_replicate(&cfg, &config.methods, &config.bases, config.p_method)
            })
            .collect();

        let failures = replicate_curves.iter().filter(|r| r.is_err()).count();
        if failures as f64 > 0.05 * r_total as f64 {
            let first_err = replicate_curves
                .into_iter()
                .find_map(|r| r.err())
                .expect("at least one failure");
            return Err(Error::NumericalDegeneracy(format!(
                "level {level_label}: {failures} of {r_total} replicates failed (> 5%); first error: {first_err}"
            )));
        }
        let used: Vec<Vec<Vec<f64>>> = replicate_curves.into_iter().filter_map(|r| r.ok()).collect();
        if used.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "level {level_label}: fewer than 2 successful replicates"
            )));
        }

        let beta = beta_true_on(&level_cfg.grid);
        let mut cell = 0usize;
        for &method in &config.methods {
            for &basis in &config.bases {
                let curves: Vec<Vec<f64>> = used.iter().map(|reps| reps[cell].clone()).collect();
                let (squared_bias, variance) = compute_metrics(&curves, &beta, &level_cfg.grid)?;
                entries.push(MetricsEntry {
                    method,
                    basis,
                    factor: config.sweep.factor_name().to_string(),
                    level: level_label.clone(),
                    squared_bias,
                    variance,
                    replicates_used: used.len(),
                    failures,
                    curves,
                });
                cell += 1;
            }
        }
    }
    Ok(entries)
}

/// Pointwise percentile confidence band from a subject-level bootstrap.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapBand {
    pub t: Vec<f64>,
    pub estimate: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resamples: usize,
    pub failures: usize,
    pub alpha: f64,
    pub seed: u64,
}

fn resample_dataset(
    dataset: &Dataset,
    truth: Option<&SimulatedTruth>,
    indices: &[usize],
) -> (Dataset, Option<SimulatedTruth>) {
    let subjects: Vec<_> = indices
        .iter()
        .enumerate()
        .map(|(new_id, &i)| {
            let mut s = dataset.subjects[i].clone();
            s.id = new_id;
            s
        })
        .collect();
    let ds = Dataset {
        subjects,
        grid: dataset.grid.clone(),
        covariate_names: dataset.covariate_names.clone(),
    };
    let tr = truth.map(|t| {
        let m = t.x.ncols();
        let x = DMatrix::from_fn(indices.len(), m, |i, c| t.x[(indices[i], c)]);
        let p = DMatrix::from_fn(indices.len(), m, |i, c| t.p[(indices[i], c)]);
        SimulatedTruth {
            x,
            p,
            theta: t.theta.clone(),
        }
    });
    (ds, tr)
}

/// Linear-interpolation sample quantile of sorted values.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Subject-level bootstrap of one method/basis fit. Every resample reruns
/// the full pipeline, activation estimation included. Failed resamples are
/// skipped; more than 10% failing is an error.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_band(
    dataset: &Dataset,
    truth: Option<&SimulatedTruth>,
    method: Method,
    basis: BasisSpec,
    p_method: PMethod,
    family: Family,
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<BootstrapBand> {
    if resamples < 100 {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs B >= 100 resamples, got {resamples}"
        )));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if method.needs_truth() && truth.is_none() {
        return Err(Error::InvalidParameter(
            "benchmark bootstrap needs the simulated truth".into(),
        ));
    }

    let n = dataset.n_subjects();
    let activation = if method.needs_activation() {
        Some(estimate_activation(dataset, truth, p_method)?)
    } else {
        None
    };
    let estimate = fit_beta_curve(dataset, truth, method, activation.as_ref(), basis, family)?;

    let curves: Vec<Result<Vec<f64>>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, 1 + b as u64);
            let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let (ds, tr) = resample_dataset(dataset, truth, &indices);
            let act = if method.needs_activation() {
                Some(estimate_activation(&ds, tr.as_ref(), p_method)?)
            } else {
                None
            };
            fit_beta_curve(&ds, tr.as_ref(), method, act.as_ref(), basis, family)
        })
        .collect();

    let failures = curves.iter().filter(|c| c.is_err()).count();
    if failures as f64 > 0.10 * resamples as f64 {
        return Err(Error::NumericalDegeneracy(format!(
            "{failures} of {resamples} bootstrap resamples failed (> 10%)"
        )));
    }
    let ok: Vec<Vec<f64>> = curves.into_iter().filter_map(|c| c.ok()).collect();

    let m = dataset.n_points();
    let mut lower = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for t in 0..m {
        let mut vals: Vec<f64> = ok.iter().map(|c| c[t]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lower[t] = quantile_sorted(&vals, alpha / 2.0);
        upper[t] = quantile_sorted(&vals, 1.0 - alpha / 2.0);
    }

    Ok(BootstrapBand {
        t: dataset.grid.points().to_vec(),
        estimate,
        lower,
        upper,
        resamples,
        failures,
        alpha,
        seed,
    })
}
