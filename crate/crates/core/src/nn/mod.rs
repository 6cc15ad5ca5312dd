//! One-hidden-layer ReLU network with a softmax head.
//!
//! Weights are stored input-major: `w1` is `(input_dim, hidden_dim)` and `w2`
//! is `(hidden_dim, num_classes)`, so a batch `X` (one sample per row) maps to
//! logits `relu(X w1 + b1) w2 + b2`.

mod adam;
mod checkpoint;
mod loss;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, read_checkpoint_header, save_checkpoint,
    CheckpointHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use loss::{loss_and_gradients, Gradients, LossKind};
pub use train::{train, EpochRecord, TrainConfig, Trainer};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::rng::{rng_from, stage};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverNetwork {
    pub(crate) w1: Array2<f64>,
    pub(crate) b1: Array1<f64>,
    pub(crate) w2: Array2<f64>,
    pub(crate) b2: Array1<f64>,
}

impl SolverNetwork {
    /// He-uniform weights (limit `sqrt(6 / fan_in)`), zero biases.
    pub fn new(input_dim: usize, hidden_dim: usize, num_classes: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from(seed, &[stage::INIT]);
        Self::with_rng(input_dim, hidden_dim, num_classes, &mut rng)
    }

    pub fn with_rng<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(input_dim, hidden_dim, num_classes)?;
        let w1 = he_uniform(input_dim, hidden_dim, rng)?;
        let w2 = he_uniform(hidden_dim, num_classes, rng)?;
        Ok(SolverNetwork {
            w1,
            b1: Array1::zeros(hidden_dim),
            w2,
            b2: Array1::zeros(num_classes),
        })
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Result<Self> {
        check_dims(input_dim, hidden_dim, num_classes)?;
        Ok(SolverNetwork {
            w1: Array2::zeros((input_dim, hidden_dim)),
            b1: Array1::zeros(hidden_dim),
            w2: Array2::zeros((hidden_dim, num_classes)),
            b2: Array1::zeros(num_classes),
        })
    }

    pub fn from_parts(
        w1: Array2<f64>,
        b1: Array1<f64>,
        w2: Array2<f64>,
        b2: Array1<f64>,
    ) -> Result<Self> {
        let (input_dim, hidden_dim) = w1.dim();
        check_dims(input_dim, hidden_dim, b2.len())?;
        if b1.len() != hidden_dim || w2.dim() != (hidden_dim, b2.len()) {
            return Err(Error::shape(format!(
                "inconsistent layer shapes: w1 {:?}, b1 {}, w2 {:?}, b2 {}",
                w1.dim(),
                b1.len(),
                w2.dim(),
                b2.len()
            )));
        }
        let net = SolverNetwork { w1, b1, w2, b2 };
        if net.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("non-finite weight"));
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.b2.len()
    }

    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }
    pub fn b1(&self) -> &Array1<f64> {
        &self.b1
    }
    pub fn w2(&self) -> &Array2<f64> {
        &self.w2
    }
    pub fn b2(&self) -> &Array1<f64> {
        &self.b2
    }

    /// Mutable access to the output bias, e.g. to hard-wire a class.
    pub fn b2_mut(&mut self) -> &mut Array1<f64> {
        &mut self.b2
    }

    /// Parameters as flat slices in the fixed order `w1, b1, w2, b2`.
    pub fn params(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }

    pub(crate) fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::shape(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Hidden pre-activations and logits.
    pub(crate) fn forward_parts(&self, batch: &ArrayView2<f64>) -> (Matrix, Matrix) {
        let pre = batch.dot(&self.w1) + &self.b1;
        let hidden = pre.mapv(|v| v.max(0.0));
        let logits = hidden.dot(&self.w2) + &self.b2;
        (pre, logits)
    }
}

fn he_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Array2<f64>> {
    let limit = (6.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng)))
}

fn check_dims(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Result<()> {
    if input_dim == 0 || hidden_dim == 0 || num_classes == 0 {
        return Err(Error::invalid(format!(
            "network dims must be nonzero, got {input_dim} -> {hidden_dim} -> {num_classes}"
        )));
    }
    Ok(())
}

/// Logits, one row per sample.
pub fn forward(net: &SolverNetwork, batch: &Matrix) -> Result<Matrix> {
    let view = batch.view();
    net.check_input(&view)?;
    Ok(net.forward_parts(&view).1)
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let p = softmax(row.as_slice().expect("standard layout"));
        row.iter_mut().zip(p).for_each(|(o, v)| *o = v);
    }
    out
}

/// Softmax probabilities, one row per sample.
pub fn predict_proba(net: &SolverNetwork, features: &Matrix) -> Result<Matrix> {
    Ok(softmax_rows(&forward(net, features)?))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict(net: &SolverNetwork, features: &Matrix) -> Result<Vec<usize>> {
    let logits = forward(net, features)?;
    Ok(logits
        .rows()
        .into_iter()
        .map(|r| argmax(r.as_slice().expect("standard layout")))
        .collect())
}
