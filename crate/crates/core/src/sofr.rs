//! Basis expansion, Riemann integration, and scalar-on-function GLM fitting.
//!
//! The coefficient function is represented on a truncated basis (cubic
//! B-splines or Fourier). Functional scores are Riemann inner products of
//! the recovered curves with each basis function; stacking them with an
//! intercept and the scalar covariates turns the problem into an ordinary
//! GLM with a Gaussian-identity or Bernoulli-logit family.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::{self, fit_logistic, solve_least_squares, IRLS_MAX_ITER, IRLS_SCORE_TOL};
use crate::grid::TimeGrid;
use crate::sim::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    BsplineCubic,
    Fourier,
}

impl BasisFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BasisFamily::BsplineCubic => "bspline",
            BasisFamily::Fourier => "fourier",
        }
    }

    pub fn parse(s: &str) -> Option<BasisFamily> {
        match s {
            "bspline" | "bspline_cubic" | "b-spline" => Some(BasisFamily::BsplineCubic),
            "fourier" => Some(BasisFamily::Fourier),
            _ => None,
        }
    }
}

/// Truncated basis specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BasisSpec {
    pub family: BasisFamily,
    /// Number of basis functions.
    pub k: usize,
}

impl BasisSpec {
    /// Default truncations: 6 cubic B-splines (two equally spaced interior
    /// knots) or a 5-function Fourier layout (constant plus two sin/cos
    /// pairs).
    pub fn default_for(family: BasisFamily) -> BasisSpec {
        match family {
            BasisFamily::BsplineCubic => BasisSpec { family, k: 6 },
            BasisFamily::Fourier => BasisSpec { family, k: 5 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            BasisFamily::BsplineCubic if self.k < 4 => Err(Error::InvalidParameter(format!(
                "cubic B-spline basis needs K >= 4, got {}",
                self.k
            ))),
            _ if self.k < 1 => Err(Error::InvalidParameter("basis needs K >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.family.name(), self.k)
    }
}

/// Evaluate the basis on a grid: row k holds basis function k.
pub fn basis_eval(spec: BasisSpec, grid: &TimeGrid) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let pts = grid.points();
    let m = pts.len();
    match spec.family {
        BasisFamily::Fourier => {
            let mut b = DMatrix::zeros(spec.k, m);
            for t in 0..m {
                b[(0, t)] = 1.0;
            }
            let sqrt2 = std::f64::consts::SQRT_2;
            let mut k = 1;
            let mut l = 1.0;
            while k < spec.k {
                for (t, &tv) in pts.iter().enumerate() {
                    b[(k, t)] = sqrt2 * (2.0 * std::f64::consts::PI * l * tv).sin();
                }
                k += 1;
                if k < spec.k {
                    for (t, &tv) in pts.iter().enumerate() {
                        b[(k, t)] = sqrt2 * (2.0 * std::f64::consts::PI * l * tv).cos();
                    }
                    k += 1;
                }
                l += 1.0;
            }
            Ok(b)
        }
        BasisFamily::BsplineCubic => {
            let order = 4usize;
            let interior = spec.k - order;
            let mut knots = Vec::with_capacity(spec.k + order);
            knots.extend(std::iter::repeat(0.0).take(order));
            for g in 1..=interior {
                knots.push(g as f64 / (interior + 1) as f64);
            }
            knots.extend(std::iter::repeat(1.0).take(order));
            let mut b = DMatrix::zeros(spec.k, m);
            for (t, &tv) in pts.iter().enumerate() {
                let vals = bspline_row(&knots, order, spec.k, tv);
                for k in 0..spec.k {
                    b[(k, t)] = vals[k];
                }
            }
            Ok(b)
        }
    }
}

/// Cox-de Boor evaluation of all B-spline basis functions at one point.
fn bspline_row(knots: &[f64], order: usize, nbasis: usize, t: f64) -> Vec<f64> {
    let nseg = knots.len() - 1;
    let mut b = vec![0.0; nseg];
    let t_max = *knots.last().unwrap();
    for i in 0..nseg {
        let in_seg = if knots[i + 1] == t_max && t == t_max {
            // closed interval at the right end
            t >= knots[i] && t <= knots[i + 1] && knots[i] < knots[i + 1]
        } else {
            t >= knots[i] && t < knots[i + 1]
        };
        if in_seg {
            b[i] = 1.0;
        }
    }
    for d in 1..order {
        for i in 0..nseg - d {
            let left = if knots[i + d] > knots[i] {
                (t - knots[i]) / (knots[i + d] - knots[i]) * b[i]
            } else {
                0.0
            };
            let right = if knots[i + d + 1] > knots[i + 1] {
                (knots[i + d + 1] - t) / (knots[i + d + 1] - knots[i + 1]) * b[i + 1]
            } else {
                0.0
            };
            b[i] = left + right;
        }
    }
    b.truncate(nbasis);
    b
}

/// Riemann approximation of an integral over the domain:
/// `measure * mean(values)`.
pub fn riemann_integrate(values: &[f64], grid: &TimeGrid) -> f64 {
    assert_eq!(values.len(), grid.len(), "values must match the grid");
    values.iter().sum::<f64>() * grid.point_weight()
}

/// Riemann inner products of each curve with each basis function:
/// entry (i, k) is `measure/m * sum_t rho_k(t) x_i(t)`.
pub fn functional_scores(
    x_hat: &DMatrix<f64>,
    spec: BasisSpec,
    grid: &TimeGrid,
) -> Result<DMatrix<f64>> {
    let n = x_hat.nrows();
    let m = x_hat.ncols();
    if m != grid.len() {
        return Err(Error::InvalidParameter(format!(
            "curves have {m} points, grid has {}",
            grid.len()
        )));
    }
    let basis = basis_eval(spec, grid)?;
    let weight = grid.point_weight();
    let mut scores = DMatrix::zeros(n, spec.k);
    for i in 0..n {
        for k in 0..spec.k {
            let mut s = 0.0;
            for t in 0..m {
                s += basis[(k, t)] * x_hat[(i, t)];
            }
            scores[(i, k)] = weight * s;
        }
    }
    Ok(scores)
}

/// Functional-score design matrix: row i is
/// `(s_i1 .. s_iK, 1, z_i')` with `s_ik` the Riemann inner product of the
/// recovered curve with basis function k.
pub fn build_design(
    x_hat: &DMatrix<f64>,
    z: &DMatrix<f64>,
    spec: BasisSpec,
    grid: &TimeGrid,
) -> Result<DMatrix<f64>> {
    let n = x_hat.nrows();
    if z.nrows() != n {
        return Err(Error::InvalidParameter(format!(
            "covariates have {} rows, curves have {n}",
            z.nrows()
        )));
    }
    let scores = functional_scores(x_hat, spec, grid)?;
    let p = z.ncols();
    let mut design = DMatrix::zeros(n, spec.k + 1 + p);
    for i in 0..n {
        for k in 0..spec.k {
            design[(i, k)] = scores[(i, k)];
        }
        design[(i, spec.k)] = 1.0;
        for c in 0..p {
            design[(i, spec.k + 1 + c)] = z[(i, c)];
        }
    }
    glm::check_full_rank(&design).map_err(|e| {
        Error::CovariateCollinearity(format!(
            "functional design (columns: {} scores, intercept, {p} covariates): {e}",
            spec.k
        ))
    })?;
    Ok(design)
}

/// Fitted scalar-on-function regression.
#[derive(Debug, Clone, Serialize)]
pub struct SofrFit {
    pub basis: BasisSpec,
    /// Basis coefficients of the coefficient function.
    pub c: Vec<f64>,
    /// Intercept followed by scalar-covariate coefficients.
    pub gamma_hat: Vec<f64>,
    pub family: Family,
    /// Residual variance estimate (Gaussian); 1 for Bernoulli.
    pub dispersion: f64,
    pub converged: bool,
    pub separated: bool,
    pub iterations: usize,
}

/// Fit the GLM on a prebuilt design whose first `n_basis` columns are the
/// functional scores.
pub fn fit_glm(
    design: &DMatrix<f64>,
    y: &[f64],
    family: Family,
    n_basis: usize,
    basis: BasisSpec,
) -> Result<SofrFit> {
    let n = design.nrows();
    let cols = design.ncols();
    if n <= cols {
        return Err(Error::InsufficientData(format!(
            "need more observations ({n}) than design columns ({cols})"
        )));
    }
    let yv = DVector::from_column_slice(y);
    match family {
        Family::Gaussian => {
            let coef = solve_least_squares(design, &yv)?;
            let resid = &yv - design * &coef;
            let dispersion = resid.norm_squared() / (n - cols) as f64;
            Ok(SofrFit {
                basis,
                c: coef.as_slice()[..n_basis].to_vec(),
                gamma_hat: coef.as_slice()[n_basis..].to_vec(),
                family,
                dispersion,
                converged: true,
                separated: false,
                iterations: 0,
            })
        }
        Family::Bernoulli => {
            let fit = fit_logistic(design, &yv, IRLS_MAX_ITER, IRLS_SCORE_TOL)?;
            if !fit.converged && !fit.separated {
                return Err(Error::NumericalDegeneracy(format!(
                    "IRLS did not converge in {IRLS_MAX_ITER} iterations (max score {:.3e})",
                    fit.max_score
                )));
            }
            Ok(SofrFit {
                basis,
                c: fit.coef.as_slice()[..n_basis].to_vec(),
                gamma_hat: fit.coef.as_slice()[n_basis..].to_vec(),
                family,
                dispersion: 1.0,
                converged: fit.converged,
                separated: fit.separated,
                iterations: fit.iterations,
            })
        }
    }
}

/// Reconstruct the coefficient function on a grid from fitted basis
/// coefficients.
pub fn reconstruct_beta(fit: &SofrFit, grid: &TimeGrid) -> Result<Vec<f64>> {
    let basis = basis_eval(fit.basis, grid)?;
    let m = grid.len();
    let mut beta = vec![0.0; m];
    for t in 0..m {
        for (k, &c) in fit.c.iter().enumerate() {
            beta[t] += c * basis[(k, t)];
        }
    }
    Ok(beta)
}
