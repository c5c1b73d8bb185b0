//! Baseline recoveries: replicate average, first replicate, and the
//! benchmark pass-through of the true latent curves.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::recovery::{Method, RecoveryResult};
use crate::sim::{Dataset, SimulatedTruth};

/// Replicate mean including zeros.
pub fn recover_naive_average(dataset: &Dataset) -> Result<RecoveryResult> {
    let n = dataset.n_subjects();
    let m = dataset.n_points();
    let x_hat = DMatrix::from_fn(n, m, |i, t| {
        let w = &dataset.subjects[i].w;
        (0..w.nrows()).map(|j| w[(j, t)]).sum::<f64>() / w.nrows() as f64
    });
    let result = RecoveryResult {
        x_hat,
        method: Method::NaiveAverage,
        activation: None,
        diagnostics: Vec::new(),
    };
    result.validate_finite()?;
    Ok(result)
}

/// First replicate only.
pub fn recover_one_day(dataset: &Dataset) -> Result<RecoveryResult> {
    let n = dataset.n_subjects();
    let m = dataset.n_points();
    let x_hat = DMatrix::from_fn(n, m, |i, t| dataset.subjects[i].w[(0, t)]);
    let result = RecoveryResult {
        x_hat,
        method: Method::OneDay,
        activation: None,
        diagnostics: Vec::new(),
    };
    result.validate_finite()?;
    Ok(result)
}

/// True latent curves (simulation only).
pub fn recover_benchmark(truth: &SimulatedTruth) -> Result<RecoveryResult> {
    let result = RecoveryResult {
        x_hat: truth.x.clone(),
        method: Method::Benchmark,
        activation: None,
        diagnostics: Vec::new(),
    };
    result.validate_finite()?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::sim::SubjectRecord;
    use approx::assert_abs_diff_eq;

    fn two_subject_dataset() -> Dataset {
        let grid = TimeGrid::uniform(3).unwrap();
        let subjects = vec![
            SubjectRecord {
                id: 0,
                z: vec![],
                y: 0.0,
                w: DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]),
            },
            SubjectRecord {
                id: 1,
                z: vec![],
                y: 0.0,
                w: DMatrix::from_row_slice(2, 3, &[7.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            },
        ];
        Dataset {
            subjects,
            grid,
            covariate_names: vec![],
        }
    }

    #[test]
    fn average_of_identical_rows_is_the_row() {
        let ds = two_subject_dataset();
        let rec = recover_naive_average(&ds).unwrap();
        for t in 0..3 {
            assert_abs_diff_eq!(rec.x_hat[(0, t)], (t + 1) as f64, epsilon = 1e-15);
        }
        // one nonzero value 7 among 2 replicates -> 3.5
        assert_abs_diff_eq!(rec.x_hat[(1, 0)], 3.5, epsilon = 1e-15);
    }

    #[test]
    fn one_day_is_first_replicate() {
        let ds = two_subject_dataset();
        let rec = recover_one_day(&ds).unwrap();
        assert_abs_diff_eq!(rec.x_hat[(1, 0)], 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rec.x_hat[(1, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_replicate_average_equals_one_day() {
        let grid = TimeGrid::uniform(3).unwrap();
        let subjects = vec![SubjectRecord {
            id: 0,
            z: vec![],
            y: 0.0,
            w: DMatrix::from_row_slice(1, 3, &[4.0, 0.0, 6.0]),
        }];
        let ds = Dataset {
            subjects,
            grid,
            covariate_names: vec![],
        };
        let a = recover_naive_average(&ds).unwrap();
        let b = recover_one_day(&ds).unwrap();
        assert_eq!(a.x_hat, b.x_hat);
    }
}
