//! Gauss-Hermite quadrature rules.
//!
//! Nodes and weights come from the Golub-Welsch eigendecomposition of the
//! Jacobi matrix, so a rule integrates `exp(-x^2) f(x)` over the real line
//! exactly for polynomials `f` up to degree `2n - 1`.

use std::sync::OnceLock;

use nalgebra::DMatrix;

/// Nodes and weights of the n-point Gauss-Hermite rule (weight `exp(-x^2)`).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        let b = ((i + 1) as f64 / 2.0).sqrt();
        jac[(i, i + 1)] = b;
        jac[(i + 1, i)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let node = eig.eigenvalues[k];
            let v0 = eig.eigenvectors[(0, k)];
            (node, std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// The cached 64-point rule used by the regression-calibration integral.
pub fn gauss_hermite_64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(64))
}
