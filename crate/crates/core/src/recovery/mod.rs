//! Recovery of the latent functional predictor from its zero-inflated,
//! noisy proxies.
//!
//! Six strategies are implemented: the zero-inflated pointwise mixed model
//! (BLUP-based), pointwise regression calibration, the naive replicate
//! average, the first-replicate ("one day") shortcut, a mixed model that
//! ignores zero inflation, and the benchmark pass-through of the true
//! latent curves.

mod activation;
mod calibration;
mod mixed;
mod naive;

pub use activation::{
    activation_from_truth, estimate_p_logistic, estimate_p_proportion, ActivationEstimate,
    PMethod, P_CLAMP_HIGH, P_CLAMP_LOW,
};
pub use calibration::{
    estimate_moments, rc_conditional_expectation, recover_rc, MomentEstimates, RcParams,
};
pub use mixed::{fit_pointwise_mm, recover_mm, recover_mm_nonzi, MixedModelFit};
pub use naive::{recover_benchmark, recover_naive_average, recover_one_day};

use nalgebra::DMatrix;
use serde::Serialize;

/// Recovery strategy tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Benchmark,
    MixedModel,
    RegressionCalibration,
    NaiveAverage,
    OneDay,
    NonZiMixedModel,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Benchmark => "benchmark",
            Method::MixedModel => "mm",
            Method::RegressionCalibration => "rc",
            Method::NaiveAverage => "average",
            Method::OneDay => "one_day",
            Method::NonZiMixedModel => "non_zi_mm",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "benchmark" => Some(Method::Benchmark),
            "mm" | "mixed_model" => Some(Method::MixedModel),
            "rc" | "regression_calibration" => Some(Method::RegressionCalibration),
            "average" | "naive_average" => Some(Method::NaiveAverage),
            "one_day" | "1day" | "one-day" => Some(Method::OneDay),
            "non_zi_mm" | "nonzi_mm" | "non_zi_mixed_model" => Some(Method::NonZiMixedModel),
            _ => None,
        }
    }

    /// Whether the method needs the simulated truth (benchmark only).
    pub fn needs_truth(&self) -> bool {
        matches!(self, Method::Benchmark)
    }

    /// Whether the method consumes an activation estimate.
    pub fn needs_activation(&self) -> bool {
        matches!(self, Method::MixedModel | Method::RegressionCalibration)
    }

    pub fn all() -> [Method; 6] {
        [
            Method::Benchmark,
            Method::MixedModel,
            Method::RegressionCalibration,
            Method::NaiveAverage,
            Method::OneDay,
            Method::NonZiMixedModel,
        ]
    }
}

/// Run one recovery strategy. The benchmark needs the simulated truth;
/// the two bias-corrected strategies need an activation estimate.
pub fn run_method(
    dataset: &crate::sim::Dataset,
    truth: Option<&crate::sim::SimulatedTruth>,
    method: Method,
    activation: Option<&ActivationEstimate>,
) -> crate::error::Result<RecoveryResult> {
    use crate::error::Error;
    match method {
        Method::Benchmark => {
            let truth = truth.ok_or_else(|| {
                Error::InvalidParameter("benchmark recovery needs the simulated truth".into())
            })?;
            recover_benchmark(truth)
        }
        Method::MixedModel => {
            let act = activation.ok_or_else(|| {
                Error::InvalidParameter("mixed-model recovery needs an activation estimate".into())
            })?;
            recover_mm(dataset, act)
        }
        Method::RegressionCalibration => {
            let act = activation.ok_or_else(|| {
                Error::InvalidParameter("calibration recovery needs an activation estimate".into())
            })?;
            recover_rc(dataset, act)
        }
        Method::NaiveAverage => recover_naive_average(dataset),
        Method::OneDay => recover_one_day(dataset),
        Method::NonZiMixedModel => recover_mm_nonzi(dataset),
    }
}

/// Predicted latent curves plus per-run diagnostics.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Predicted curves, n subjects by m grid points. Never NaN/Inf.
    pub x_hat: DMatrix<f64>,
    pub method: Method,
    /// Activation estimate the recovery consumed, when applicable.
    pub activation: Option<ActivationEstimate>,
    /// Human-readable notes on fallbacks and truncations, with time indices.
    pub diagnostics: Vec<String>,
}

impl RecoveryResult {
    pub(crate) fn validate_finite(&self) -> crate::error::Result<()> {
        if let Some(bad) = self.x_hat.iter().find(|v| !v.is_finite()) {
            return Err(crate::error::Error::NumericalDegeneracy(format!(
                "recovered curves contain non-finite value {bad} (method {})",
                self.method.name()
            )));
        }
        Ok(())
    }
}
