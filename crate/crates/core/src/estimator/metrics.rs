//! Error norms and regression quality measures.

use nalgebra::DVector;

use crate::error::{check_len, invalid, Result};

/// Per-step `‖𝔖_i − S_i‖₂`.
pub fn true_error_norms(full: &[DVector<f64>], lifted: &[DVector<f64>]) -> Result<Vec<f64>> {
    check_len("error norms (steps)", full.len(), lifted.len())?;
    full.iter()
        .zip(lifted)
        .map(|(f, s)| {
            check_len("error norms (length)", f.len(), s.len())?;
            Ok((f - s).norm())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionMetrics {
    pub rmse: f64,
    /// `NaN` when the true sequence is constant.
    pub r2: f64,
}

pub fn regression_metrics(truth: &[f64], pred: &[f64]) -> Result<RegressionMetrics> {
    check_len("regression metrics", truth.len(), pred.len())?;
    if truth.len() < 2 {
        return Err(invalid("regression metrics need at least two values"));
    }
    let n = truth.len() as f64;
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        f64::NAN
    };
    Ok(RegressionMetrics {
        rmse: (ss_res / n).sqrt(),
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_mean_predictions() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let m = regression_metrics(&t, &t).unwrap();
        assert_eq!((m.rmse, m.r2), (0.0, 1.0));
        let m = regression_metrics(&t, &[1.5; 4]).unwrap();
        assert!(m.r2.abs() < 1e-15);
    }

    #[test]
    fn constant_offset() {
        let m = regression_metrics(&[0.0, 1.0, 2.0, 3.0], &[0.5, 1.5, 2.5, 3.5]).unwrap();
        assert!((m.rmse - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_truth_gives_nan() {
        assert!(regression_metrics(&[2.0; 3], &[1.0, 2.0, 3.0])
            .unwrap()
            .r2
            .is_nan());
        assert!(regression_metrics(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn error_norms() {
        let full = vec![
            DVector::from_vec(vec![3.0, 4.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        ];
        assert_eq!(true_error_norms(&full, &full).unwrap(), vec![0.0, 0.0]);
        let zero = vec![DVector::zeros(2); 2];
        assert_eq!(true_error_norms(&full, &zero).unwrap(), vec![5.0, 1.0]);
        let w = DVector::from_vec(vec![0.3, -0.2]);
        let shifted: Vec<_> = zero.iter().map(|s| s + &w).collect();
        let a = true_error_norms(&full, &zero).unwrap();
        let b = true_error_norms(&full, &shifted).unwrap();
        assert!(a
            .iter()
            .zip(&b)
            .all(|(x, y)| (x - y).abs() <= w.norm() + 1e-15));
    }
}
