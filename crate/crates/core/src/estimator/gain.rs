//! Nearest-neighbour ℓ₂-gain error bound.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::estimator::ErrorEstimator;

/// `λ = max_i ‖e_i‖/‖R_i‖`. Steps with zero residual are skipped (so `0/0`
/// contributes nothing).
pub fn gain(error_norms: &[f64], residual_norms: &[f64]) -> Result<f64> {
    check_len("gain", error_norms.len(), residual_norms.len())?;
    Ok(error_norms
        .iter()
        .zip(residual_norms)
        .filter(|(_, r)| **r > 0.0)
        .map(|(e, r)| e / r)
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    entries: Vec<(Vec<f64>, f64)>,
}

impl GainTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, density: Vec<f64>, lambda: f64) -> Result<()> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(invalid(format!(
                "gain {lambda} must be finite and non-negative"
            )));
        }
        if let Some((first, _)) = self.entries.first() {
            check_len("gain table density", first.len(), density.len())?;
        }
        self.entries.push((density, lambda));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index of the stored density closest to `b` (lowest index on ties).
    pub fn nearest(&self, b: &[f64]) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (d, _)) in self.entries.iter().enumerate() {
            check_len("gain table query", d.len(), b.len())?;
            let dist: f64 = d.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
            if best.is_none_or(|(_, bd)| dist < bd) {
                best = Some((i, dist));
            }
        }
        best.map(|(i, _)| i)
            .ok_or_else(|| invalid("gain table is empty"))
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.entries[i].1
    }

    /// `λ(b̄)·‖R_i‖` per step.
    pub fn estimate(&self, b: &[f64], residual_norms: &[f64]) -> Result<Vec<f64>> {
        let lambda = self.lambda(self.nearest(b)?);
        Ok(residual_norms.iter().map(|r| lambda * r).collect())
    }
}

impl ErrorEstimator for GainTable {
    fn estimate_errors(&self, density: &[f64], residual_norms: &[f64]) -> Result<Vec<f64>> {
        self.estimate(density, residual_norms)
    }
}
