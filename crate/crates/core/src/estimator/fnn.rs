//! Small feedforward network (tanh hidden layers, linear output) trained by
//! full-batch gradient descent, and the residual-to-error model built on it.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::estimator::metrics::{regression_metrics, RegressionMetrics};
use crate::estimator::ErrorEstimator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `n_out × n_in`
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardNet {
    layers: Vec<Layer>,
}

impl FeedforwardNet {
    /// Xavier-uniform weights, zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        Self::check_sizes(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    weights: DMatrix::from_fn(w[1], w[0], |_, _| rng.random_range(-limit..limit)),
                    bias: DVector::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(sizes)?;
        Ok(Self {
            layers: sizes
                .windows(2)
                .map(|w| Layer {
                    weights: DMatrix::zeros(w[1], w[0]),
                    bias: DVector::zeros(w[1]),
                })
                .collect(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("network needs at least one layer"));
        }
        for l in &layers {
            check_len("layer bias", l.weights.nrows(), l.bias.len())?;
        }
        for w in layers.windows(2) {
            check_len("layer chain", w[0].weights.nrows(), w[1].weights.ncols())?;
        }
        Ok(Self { layers })
    }

    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(invalid(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].weights.ncols()];
        s.extend(self.layers.iter().map(|l| l.weights.nrows()));
        s
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().unwrap().weights.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Columns of `x` are samples. Returns the activations of every layer,
    /// input first.
    fn activations(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = vec![x.clone()];
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = &l.weights * acts.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += &l.bias;
            }
            if k < last {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_len("network input", self.n_inputs(), x.nrows())?;
        Ok(self.activations(x).pop().unwrap())
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let out = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x.as_slice()))?;
        Ok(out.column(0).into_owned())
    }

    /// Mean squared error over samples and outputs, and its gradient.
    pub fn loss_and_gradient(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
    ) -> Result<(f64, Vec<Layer>)> {
        check_len("network input", self.n_inputs(), x.nrows())?;
        check_len("network target", self.n_outputs(), y.nrows())?;
        check_len("batch size", x.ncols(), y.ncols())?;
        if x.ncols() == 0 {
            return Err(invalid("empty batch"));
        }
        let acts = self.activations(x);
        let diff = acts.last().unwrap() - y;
        let count = diff.len() as f64;
        let loss = diff.norm_squared() / count;
        let mut delta = diff * (2.0 / count);
        let mut grads = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let a_in = &acts[k];
            grads.push(Layer {
                weights: &delta * a_in.transpose(),
                bias: delta.column_sum(),
            });
            if k > 0 {
                let mut back = self.layers[k].weights.tr_mul(&delta);
                back.zip_apply(a_in, |b, a| *b *= 1.0 - a * a);
                delta = back;
            }
        }
        grads.reverse();
        Ok((loss, grads))
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        check_len("network parameters", self.n_params(), p.len())?;
        let mut it = p.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().unwrap();
            }
        }
        Ok(())
    }

    fn descend(&mut self, grads: &[Layer], lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(grads) {
            l.weights -= &g.weights * lr;
            l.bias -= &g.bias * lr;
        }
    }
}

/// Full-batch gradient descent; returns the loss before every epoch.
pub fn fnn_train(
    net: &mut FeedforwardNet,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lr: f64,
    epochs: usize,
) -> Result<Vec<f64>> {
    if !(lr > 0.0) {
        return Err(invalid("learning rate must be positive"));
    }
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grads) = net.loss_and_gradient(x, y)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss at epoch {epoch} (lr = {lr})"
            )));
        }
        history.push(loss);
        net.descend(&grads, lr);
    }
    Ok(history)
}

/// Per-feature standardization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Rows of `data` are features, columns samples. Std is floored at 1e-12.
    pub fn fit(data: &DMatrix<f64>) -> Self {
        let n = data.ncols() as f64;
        let mean: Vec<f64> = data.row_iter().map(|r| r.sum() / n).collect();
        let std = data
            .row_iter()
            .zip(&mean)
            .map(|(r, m)| {
                (r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
                    .sqrt()
                    .max(1e-12)
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(data.nrows(), data.ncols(), |i, j| {
            (data[(i, j)] - self.mean[i]) / self.std[i]
        })
    }

    pub fn invert(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(data.nrows(), data.ncols(), |i, j| {
            data[(i, j)] * self.std[i] + self.mean[i]
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
    /// Map each step's residual norm to that step's error norm instead of
    /// whole sequences to whole sequences.
    pub per_step: bool,
    /// Regress `ln(norm + floor)` instead of the raw norms.
    pub log_scale: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            lr: 0.2,
            epochs: 10000,
            holdout_fraction: 0.2,
            seed: 0,
            per_step: false,
            log_scale: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub n_train: usize,
    pub n_holdout: usize,
    pub epochs: usize,
    pub lr: f64,
    pub final_loss: f64,
    pub holdout_rmse: f64,
    pub holdout_r2: f64,
}

/// A trained residual-norm → error-norm regressor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub net: FeedforwardNet,
    pub input_scaling: Standardizer,
    pub output_scaling: Standardizer,
    pub per_step: bool,
    /// `(input floor, output floor)` of the log transform, if one is used.
    pub log_floor: Option<(f64, f64)>,
    pub summary: TrainingSummary,
}

/// Offset that keeps `ln` finite at zero: a tiny fraction of the largest value.
fn log_floor(data: &DMatrix<f64>) -> f64 {
    let max = data.iter().fold(0.0f64, |m, v| m.max(*v));
    if max > 0.0 {
        1e-12 * max
    } else {
        f64::MIN_POSITIVE
    }
}

fn to_log(data: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    data.map(|v| (v.max(0.0) + floor).ln())
}

fn to_columns(seqs: &[&[f64]], per_step: bool) -> DMatrix<f64> {
    if per_step {
        let all: Vec<f64> = seqs.iter().flat_map(|s| s.iter().copied()).collect();
        DMatrix::from_row_slice(1, all.len(), &all)
    } else {
        let n = seqs[0].len();
        DMatrix::from_fn(n, seqs.len(), |i, j| seqs[j][i])
    }
}

impl ErrorModel {
    /// Predicted per-step error norms, clamped at zero.
    pub fn predict(&self, residual_norms: &[f64]) -> Result<Vec<f64>> {
        let x = if self.per_step {
            DMatrix::from_row_slice(1, residual_norms.len(), residual_norms)
        } else {
            check_len(
                "error model input",
                self.net.n_inputs(),
                residual_norms.len(),
            )?;
            DMatrix::from_column_slice(residual_norms.len(), 1, residual_norms)
        };
        let x = match self.log_floor {
            Some((f_in, _)) => to_log(&x, f_in),
            None => x,
        };
        let z = self
            .output_scaling
            .invert(&self.net.forward_batch(&self.input_scaling.apply(&x))?);
        let z = match self.log_floor {
            Some((_, f_out)) => z.map(|v| v.exp() - f_out),
            None => z,
        };
        Ok(z.iter().map(|v| v.max(0.0)).collect())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let model: Self = serde_json::from_reader(file)?;
        FeedforwardNet::from_layers(model.net.layers.clone())?;
        Ok(model)
    }
}

impl ErrorEstimator for ErrorModel {
    fn estimate_errors(&self, _density: &[f64], residual_norms: &[f64]) -> Result<Vec<f64>> {
        self.predict(residual_norms)
    }
}

/// Trains an error model on `(residual norms, error norms)` sequence pairs.
/// A seeded shuffle sets aside `holdout_fraction` of the pairs (at least one)
/// for the reported metrics.
pub fn train_error_model(
    pairs: &[(Vec<f64>, Vec<f64>)],
    config: &TrainConfig,
) -> Result<ErrorModel> {
    if pairs.len() < 2 {
        return Err(invalid(format!(
            "need at least 2 training pairs, got {}",
            pairs.len()
        )));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(invalid("holdout fraction must lie in [0, 1)"));
    }
    let len = pairs[0].0.len();
    for (r, e) in pairs {
        check_len("training input", len, r.len())?;
        check_len("training target", len, e.len())?;
        if r.iter().chain(e).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("training norms must be finite and non-negative"));
        }
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);
    let n_holdout = ((pairs.len() as f64 * config.holdout_fraction).round() as usize)
        .clamp(usize::from(config.holdout_fraction > 0.0), pairs.len() - 1);
    let (hold, train) = order.split_at(n_holdout);

    let gather = |idx: &[usize], which: usize| -> DMatrix<f64> {
        let seqs: Vec<&[f64]> = idx
            .iter()
            .map(|&i| {
                if which == 0 {
                    pairs[i].0.as_slice()
                } else {
                    pairs[i].1.as_slice()
                }
            })
            .collect();
        to_columns(&seqs, config.per_step)
    };
    let (mut x_raw, mut y_raw) = (gather(train, 0), gather(train, 1));
    let floors = config
        .log_scale
        .then(|| (log_floor(&x_raw), log_floor(&y_raw)));
    if let Some((f_in, f_out)) = floors {
        x_raw = to_log(&x_raw, f_in);
        y_raw = to_log(&y_raw, f_out);
    }
    let input_scaling = Standardizer::fit(&x_raw);
    let output_scaling = Standardizer::fit(&y_raw);
    let x = input_scaling.apply(&x_raw);
    let y = output_scaling.apply(&y_raw);

    let mut sizes = vec![x.nrows()];
    sizes.extend(&config.hidden);
    sizes.push(y.nrows());
    let mut net = FeedforwardNet::new(&sizes, config.seed)?;
    let history = fnn_train(&mut net, &x, &y, config.lr, config.epochs)?;
    let final_loss = net.loss_and_gradient(&x, &y)?.0;

    let mut model = ErrorModel {
        net,
        input_scaling,
        output_scaling,
        per_step: config.per_step,
        log_floor: floors,
        summary: TrainingSummary {
            n_train: train.len(),
            n_holdout,
            epochs: history.len(),
            lr: config.lr,
            final_loss,
            holdout_rmse: f64::NAN,
            holdout_r2: f64::NAN,
        },
    };
    let eval_idx = if hold.is_empty() { train } else { hold };
    let m = model.evaluate(eval_idx.iter().map(|&i| (&pairs[i].0[..], &pairs[i].1[..])))?;
    model.summary.holdout_rmse = m.rmse;
    model.summary.holdout_r2 = m.r2;
    Ok(model)
}

impl ErrorModel {
    /// Pooled RMSE and R² of the predictions over all steps of all pairs.
    pub fn evaluate<'a>(
        &self,
        pairs: impl Iterator<Item = (&'a [f64], &'a [f64])>,
    ) -> Result<RegressionMetrics> {
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for (r, e) in pairs {
            pred.extend(self.predict(r)?);
            truth.extend_from_slice(e);
        }
        regression_metrics(&truth, &pred)
    }
}
