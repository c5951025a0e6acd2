//! Offline POD-greedy construction of the adjoint reduced basis.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimator::{gain, true_error_norms, ErrorEstimator, GainTable};
use crate::problem::{Analysis, Problem};
use crate::rom::pod::{pod, snapshot_matrix, ReducedBasis};
use crate::rom::reduced::{compute_residuals, project_operators, solve_adjoint_reduced};

/// Training designs with their forward analyses; full adjoint snapshots are
/// computed on first use and cached.
pub struct SampleSet<'p> {
    problem: &'p Problem,
    densities: Vec<Vec<f64>>,
    analyses: Vec<Analysis>,
    full: Vec<Option<Vec<DVector<f64>>>>,
}

impl<'p> SampleSet<'p> {
    pub fn new(problem: &'p Problem, densities: Vec<Vec<f64>>) -> Result<Self> {
        if densities.is_empty() {
            return Err(invalid("sample set is empty"));
        }
        let analyses = densities
            .iter()
            .map(|b| problem.analyze(b))
            .collect::<Result<Vec<_>>>()?;
        let n = densities.len();
        Ok(Self {
            problem,
            densities,
            analyses,
            full: vec![None; n],
        })
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn density(&self, i: usize) -> &[f64] {
        &self.densities[i]
    }

    pub fn analysis(&self, i: usize) -> &Analysis {
        &self.analyses[i]
    }

    /// Full-order adjoint of sample `i`.
    pub fn full_adjoint(&mut self, i: usize) -> Result<&[DVector<f64>]> {
        if self.full[i].is_none() {
            let adj = self.problem.full_adjoint(&self.analyses[i])?;
            self.full[i] = Some(adj.vartheta);
        }
        Ok(self.full[i].as_deref().unwrap())
    }
}

pub enum ErrorOracle<'a> {
    /// Compare with the full-order adjoint (`Σ‖e_i‖ / Σ‖𝔖_i‖`).
    True,
    /// Estimated error norms from a trained model (`Σ ê_i / Σ‖S_i‖`).
    Estimated(&'a dyn ErrorEstimator),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Stop once the worst relative sample error is at or below this.
    pub tol: f64,
    pub max_basis: usize,
    pub seed: u64,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_basis: 40,
            seed: 0,
        }
    }
}

/// One true-error evaluation: per-step residual and error norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub sample: usize,
    pub n_basis: usize,
    pub residual_norms: Vec<f64>,
    pub error_norms: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GreedyReport {
    pub basis: ReducedBasis,
    /// `(basis size, worst relative sample error)` after every enrichment.
    pub curve: Vec<(usize, f64)>,
    /// Relative error of every sample after every enrichment.
    pub sample_errors: Vec<Vec<f64>>,
    /// Samples whose snapshots enriched the basis, in order.
    pub selected: Vec<usize>,
    pub training: Vec<TrainingPair>,
    pub converged: bool,
}

impl GreedyReport {
    pub fn final_error(&self) -> f64 {
        self.curve.last().map_or(f64::INFINITY, |c| c.1)
    }

    pub fn training_pairs(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.training
            .iter()
            .map(|p| (p.residual_norms.clone(), p.error_norms.clone()))
            .collect()
    }

    /// ℓ₂-gain table from the evaluations made with the final basis.
    pub fn gain_table(&self, samples: &SampleSet) -> Result<GainTable> {
        let n = self.basis.n_basis();
        let mut table = GainTable::new();
        for p in self.training.iter().filter(|p| p.n_basis == n) {
            table.insert(
                samples.density(p.sample).to_vec(),
                gain(&p.error_norms, &p.residual_norms)?,
            )?;
        }
        Ok(table)
    }
}

/// Reduced solve, lifting and residual of one sample under `basis`; returns
/// `(lifted, residual norms)`.
pub fn evaluate_sample(
    samples: &SampleSet,
    i: usize,
    basis: &ReducedBasis,
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let an = samples.analysis(i);
    let p = samples.problem;
    let red = project_operators(&an.sys, &an.eff, basis)?;
    let sol = solve_adjoint_reduced(&red, &an.partials, &p.grid, &p.hht)?;
    let res = compute_residuals(&an.sys, &an.eff, &sol.lifted, &an.partials, &p.grid, &p.hht)?;
    Ok((sol.lifted, res.norms))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// POD-greedy: enrich the basis with the leading POD mode of the worst
/// sample's full adjoint until every sample meets `tol` or `max_basis` is
/// reached.
pub fn greedy_offline(
    samples: &mut SampleSet,
    config: &GreedyConfig,
    oracle: &ErrorOracle,
) -> Result<GreedyReport> {
    if config.max_basis == 0 {
        return Err(invalid("max_basis must be positive"));
    }
    if config.tol.is_nan() || config.tol < 0.0 {
        return Err(invalid("greedy tolerance must be non-negative"));
    }
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pick = rng.random_range(0..n);
    let mut basis: Option<ReducedBasis> = None;
    let mut exhausted = vec![false; n];
    let mut last_errors: Vec<f64> = vec![f64::INFINITY; n];
    let mut report = GreedyReport {
        basis: ReducedBasis::identity(1),
        curve: Vec::new(),
        sample_errors: Vec::new(),
        selected: Vec::new(),
        training: Vec::new(),
        converged: false,
    };

    loop {
        let snap = snapshot_matrix(samples.full_adjoint(pick)?)?;
        let mode = pod(&snap, 1)?.basis.matrix().column(0).into_owned();
        let accepted = match basis.as_mut() {
            None => {
                basis = Some(ReducedBasis::from_vector(&mode)?);
                true
            }
            Some(b) => b.try_append(&mode)?,
        };
        if !accepted {
            exhausted[pick] = true;
            match next_worst(&last_errors, &exhausted) {
                Some(i) => {
                    pick = i;
                    continue;
                }
                None => break,
            }
        }
        report.selected.push(pick);
        let current = basis.as_ref().unwrap();
        let nb = current.n_basis();

        let mut errors = Vec::with_capacity(n);
        for i in 0..n {
            let (lifted, res_norms) = evaluate_sample(samples, i, current)?;
            let lifted_total: f64 = lifted.iter().map(|s| s.norm()).sum();
            let err = match oracle {
                ErrorOracle::True => {
                    let full = samples.full_adjoint(i)?;
                    let e = true_error_norms(full, &lifted)?;
                    let full_total: f64 = full.iter().map(|f| f.norm()).sum();
                    let rel = ratio(e.iter().sum(), full_total);
                    report.training.push(TrainingPair {
                        sample: i,
                        n_basis: nb,
                        residual_norms: res_norms,
                        error_norms: e,
                    });
                    rel
                }
                ErrorOracle::Estimated(est) => {
                    let e = est.estimate_errors(samples.density(i), &res_norms)?;
                    ratio(e.iter().sum(), lifted_total)
                }
            };
            errors.push(err);
        }
        let worst = errors.iter().cloned().fold(0.0, f64::max);
        report.curve.push((nb, worst));
        report.sample_errors.push(errors.clone());
        last_errors = errors;

        if worst <= config.tol {
            report.converged = true;
            break;
        }
        if nb >= config.max_basis || nb >= current.n_full() {
            break;
        }
        match next_worst(&last_errors, &exhausted) {
            Some(i) => pick = i,
            None => break,
        }
    }
    report.basis = basis.ok_or_else(|| invalid("no basis vector could be generated"))?;
    Ok(report)
}

fn next_worst(errors: &[f64], exhausted: &[bool]) -> Option<usize> {
    errors
        .iter()
        .enumerate()
        .filter(|(i, _)| !exhausted[*i])
        .fold(None, |best: Option<(usize, f64)>, (i, &e)| match best {
            Some((_, be)) if be >= e => best,
            _ => Some((i, e)),
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::cantilever;
    use crate::time::TimeGrid;

    fn samples_for(p: &Problem, count: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..count)
            .map(|_| {
                (0..p.n_elements())
                    .map(|_| rng.random_range(0.3..0.7))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn infinite_tolerance_stops_after_one_vector() {
        let mut p = cantilever(6, 3).unwrap();
        p.grid = TimeGrid::new(20, 0.05).unwrap();
        let mut set = SampleSet::new(&p, samples_for(&p, 3)).unwrap();
        let cfg = GreedyConfig {
            tol: f64::INFINITY,
            max_basis: 10,
            seed: 1,
        };
        let rep = greedy_offline(&mut set, &cfg, &ErrorOracle::True).unwrap();
        assert_eq!(rep.basis.n_basis(), 1);
        assert!(rep.converged);
        assert_eq!(rep.training.len(), 3);
    }

    #[test]
    fn basis_grows_by_one_and_stays_orthonormal() {
        let mut p = cantilever(6, 3).unwrap();
        p.grid = TimeGrid::new(20, 0.05).unwrap();
        let mut set = SampleSet::new(&p, samples_for(&p, 4)).unwrap();
        let cfg = GreedyConfig {
            tol: 0.0,
            max_basis: 6,
            seed: 2,
        };
        let rep = greedy_offline(&mut set, &cfg, &ErrorOracle::True).unwrap();
        let sizes: Vec<usize> = rep.curve.iter().map(|c| c.0).collect();
        assert_eq!(sizes, (1..=sizes.len()).collect::<Vec<_>>());
        assert!(rep.basis.orthonormality_error() < 1e-10);
        assert!(!rep.converged);
        let table = rep.gain_table(&set).unwrap();
        assert_eq!(table.len(), 4);
    }

    #[test]
    fn estimated_oracle_uses_the_estimator() {
        struct Constant;
        impl ErrorEstimator for Constant {
            fn estimate_errors(&self, _: &[f64], r: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![0.0; r.len()])
            }
        }
        let mut p = cantilever(4, 2).unwrap();
        p.grid = TimeGrid::new(10, 0.05).unwrap();
        let mut set = SampleSet::new(&p, samples_for(&p, 3)).unwrap();
        let rep = greedy_offline(
            &mut set,
            &GreedyConfig::default(),
            &ErrorOracle::Estimated(&Constant),
        )
        .unwrap();
        assert!(rep.converged);
        assert!(rep.training.is_empty());
    }

    #[test]
    fn worst_selection_skips_exhausted() {
        assert_eq!(next_worst(&[0.1, 0.5, 0.3], &[false, true, false]), Some(2));
        assert_eq!(next_worst(&[0.1, 0.5], &[true, true]), None);
        assert_eq!(next_worst(&[0.2, 0.2], &[false, false]), Some(0));
    }
}
