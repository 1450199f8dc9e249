//! Logistic regression with log-loss: predictions, exact per-sample
//! gradients, full-batch gradient steps.
//!
//! Parameters are laid out as one `(d + 1)`-vector when flattened: the `d`
//! weights in feature order followed by the bias.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Probability clamp used by [`log_loss`] only.
pub const LOSS_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ModelParams {
    pub fn zeros(n_features: usize) -> Self {
        ModelParams {
            weights: vec![0.0; n_features],
            bias: 0.0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    /// Weights followed by the bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.weights.len() + 1);
        v.extend_from_slice(&self.weights);
        v.push(self.bias);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        let (bias, weights) = flat.split_last().ok_or(Error::EmptyInput("flat parameter vector"))?;
        Ok(ModelParams {
            weights: weights.to_vec(),
            bias: *bias,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.weights.len() != n {
            return Err(Error::Shape {
                expected: self.weights.len(),
                actual: n,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub local_epochs: usize,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            local_epochs: 1,
            l2: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be a positive finite number"));
        }
        if self.local_epochs == 0 {
            return Err(Error::config("local_epochs must be at least 1"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("l2 must be nonnegative and finite"));
        }
        Ok(())
    }
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    cols: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, cols: usize) -> Result<Self> {
        if cols == 0 {
            return Err(Error::config("feature matrix needs at least one column"));
        }
        if !data.len().is_multiple_of(cols) {
            return Err(Error::Shape {
                expected: cols,
                actual: data.len() % cols,
            });
        }
        Ok(FeatureMatrix { data, cols })
    }

    pub fn from_rows<'a, I>(rows: I, cols: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut data = Vec::new();
        for row in rows {
            if row.len() != cols {
                return Err(Error::Shape {
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        FeatureMatrix::new(data, cols)
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Gradient of the log-loss at one sample, bias component last.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGradient {
    pub values: Vec<f64>,
    pub norm: f64,
}

impl SampleGradient {
    pub fn bias(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn weights(&self) -> &[f64] {
        &self.values[..self.values.len() - 1]
    }
}

/// Logistic function with branching on the sign of `z` so neither branch
/// evaluates `exp` of a large positive number. The result is kept strictly
/// inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn logit(p: &ModelParams, x: &[f64]) -> f64 {
    dot(&p.weights, x) + p.bias
}

fn check_label(y: u8) -> Result<()> {
    if y > 1 {
        return Err(Error::config("labels must be 0 or 1"));
    }
    Ok(())
}

pub fn predict_proba(p: &ModelParams, x: &[f64]) -> Result<f64> {
    p.check_dim(x.len())?;
    Ok(sigmoid(logit(p, x)))
}

/// Writes the per-sample gradient into `out` (length `d + 1`).
fn write_gradient(p: &ModelParams, x: &[f64], y: u8, l2: f64, out: &mut [f64]) {
    let residual = sigmoid(logit(p, x)) - f64::from(y);
    let d = x.len();
    for j in 0..d {
        out[j] = residual * x[j] + l2 * p.weights[j];
    }
    out[d] = residual;
}

/// Gradient of `-[y ln p + (1-y) ln(1-p)] + (l2/2)|w|^2` at one sample.
pub fn per_sample_gradient(p: &ModelParams, x: &[f64], y: u8, l2: f64) -> Result<SampleGradient> {
    p.check_dim(x.len())?;
    check_label(y)?;
    let mut values = vec![0.0; x.len() + 1];
    write_gradient(p, x, y, l2, &mut values);
    let norm = l2_norm(&values);
    Ok(SampleGradient { values, norm })
}

fn check_batch(p: &ModelParams, x: &FeatureMatrix, y: &[u8]) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyInput("training set"));
    }
    p.check_dim(x.n_cols())?;
    if y.len() != x.n_rows() {
        return Err(Error::Shape {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    y.iter().try_for_each(|&l| check_label(l))
}

/// Mean of the per-sample gradients, summed in row order.
pub fn mean_gradient(p: &ModelParams, x: &FeatureMatrix, y: &[u8], l2: f64) -> Result<Vec<f64>> {
    check_batch(p, x, y)?;
    Ok(mean_gradient_unchecked(p, x, y, l2))
}

fn mean_gradient_unchecked(p: &ModelParams, x: &FeatureMatrix, y: &[u8], l2: f64) -> Vec<f64> {
    let dim = x.n_cols() + 1;
    let mut sum = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for (row, &label) in x.rows().zip(y) {
        write_gradient(p, row, label, l2, &mut g);
        for (s, gi) in sum.iter_mut().zip(&g) {
            *s += gi;
        }
    }
    let n = x.n_rows() as f64;
    for s in &mut sum {
        *s /= n;
    }
    sum
}

/// `local_epochs` full-batch gradient steps starting from `p`.
pub fn sgd_round(p: &ModelParams, x: &FeatureMatrix, y: &[u8], cfg: &TrainConfig) -> Result<ModelParams> {
    cfg.validate()?;
    check_batch(p, x, y)?;
    let mut cur = p.clone();
    for _ in 0..cfg.local_epochs {
        let g = mean_gradient_unchecked(&cur, x, y, cfg.l2);
        let d = cur.weights.len();
        for (w, gj) in cur.weights.iter_mut().zip(&g[..d]) {
            *w -= cfg.learning_rate * gj;
        }
        cur.bias -= cfg.learning_rate * g[d];
    }
    Ok(cur)
}

/// Mean binary cross-entropy with probabilities clamped to
/// `[LOSS_CLAMP, 1 - LOSS_CLAMP]`.
pub fn log_loss(p: &ModelParams, x: &FeatureMatrix, y: &[u8]) -> Result<f64> {
    check_batch(p, x, y)?;
    let mut total = 0.0;
    for (row, &label) in x.rows().zip(y) {
        let q = sigmoid(logit(p, row)).clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
        total -= if label == 1 { libm::log(q) } else { libm::log(1.0 - q) };
    }
    Ok(total / x.n_rows() as f64)
}
