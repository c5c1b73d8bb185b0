//! The observation grid on the time domain.

use crate::error::{Error, Result};

/// A finite, strictly increasing grid of time points in `[0, 1]`.
///
/// Integrals over the domain are approximated by `measure * mean(values on grid)`,
/// so the grid carries the Lebesgue measure of the domain (1 for the unit interval).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    measure: f64,
}

impl TimeGrid {
    /// Build a grid from explicit points. Points must be strictly increasing,
    /// lie in `[0, 1]`, and there must be at least two of them.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        for w in points.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidParameter(
                    "time grid points must be strictly increasing".into(),
                ));
            }
        }
        if points[0] < 0.0 || *points.last().unwrap() > 1.0 {
            return Err(Error::InvalidParameter(
                "time grid points must lie in [0, 1]".into(),
            ));
        }
        Ok(TimeGrid { points, measure: 1.0 })
    }

    /// `m` equally spaced points covering `[0, 1]` (endpoints included).
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs m >= 2, got {m}"
            )));
        }
        let pts = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        TimeGrid::new(pts)
    }

    /// The default 24-point grid used throughout the simulation study.
    pub fn default_study() -> Self {
        TimeGrid::uniform(24).expect("24 >= 2")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least two points
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Quadrature weight of a single grid point: `measure / m`.
    pub fn point_weight(&self) -> f64 {
        self.measure / self.points.len() as f64
    }

    /// Mean gap between consecutive points.
    pub fn mean_spacing(&self) -> f64 {
        let span = self.points.last().unwrap() - self.points[0];
        span / (self.points.len() - 1) as f64
    }

    /// Largest gap between consecutive points (mesh width).
    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}
