//! Scalar-on-function regression with a zero-inflated, measurement-error-prone
//! functional predictor: simulation, latent-curve recovery, GLM fitting, and
//! Monte Carlo / bootstrap evaluation.

pub mod analysis;
pub mod error;
pub mod glm;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod norm;
pub mod quadrature;
pub mod recovery;
pub mod sim;
pub mod smooth;
pub mod sofr;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use kernel::Kernel;
pub use sim::{Dataset, Family, SimConfig, SimulatedTruth, SubjectRecord};
