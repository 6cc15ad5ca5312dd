use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{softmax, SolverNetwork};
use crate::{Error, Matrix, Result};

/// Training loss over the softmax head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `-ln p_y`.
    #[default]
    CategoricalCrossEntropy,
    /// One-vs-rest binary cross-entropy applied to each softmax output and
    /// averaged over the K classes. Probabilities are clipped to
    /// `[1e-7, 1 - 1e-7]`.
    BinaryCrossEntropy,
}

const BCE_CLIP: f64 = 1e-7;

/// Parameter-shaped gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Gradients {
    pub fn as_slices(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }
}

/// Per-sample loss and its derivative with respect to the logits.
fn sample_loss(kind: LossKind, logits: &[f64], label: usize, dz: &mut [f64]) -> f64 {
    let p = softmax(logits);
    match kind {
        LossKind::CategoricalCrossEntropy => {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            for (j, d) in dz.iter_mut().enumerate() {
                *d = p[j] - if j == label { 1.0 } else { 0.0 };
            }
            lse - logits[label]
        }
        LossKind::BinaryCrossEntropy => {
            let k = logits.len() as f64;
            let mut loss = 0.0;
            // dL/dp_k, zero where clipping is active
            let mut g = vec![0.0; logits.len()];
            for (j, &pj) in p.iter().enumerate() {
                let y = if j == label { 1.0 } else { 0.0 };
                let pc = pj.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
                loss -= (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln()) / k;
                if pc == pj {
                    g[j] = -(y / pj - (1.0 - y) / (1.0 - pj)) / k;
                }
            }
            let dot: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
            for (j, d) in dz.iter_mut().enumerate() {
                *d = p[j] * (g[j] - dot);
            }
            loss
        }
    }
}

/// Mean loss over the batch and its gradients.
pub fn loss_and_gradients(
    net: &SolverNetwork,
    batch: &Matrix,
    labels: &[usize],
    kind: LossKind,
) -> Result<(f64, Gradients)> {
    let view = batch.view();
    net.check_input(&view)?;
    if labels.len() != batch.nrows() {
        return Err(Error::shape(format!(
            "{} labels for {} rows",
            labels.len(),
            batch.nrows()
        )));
    }
    if batch.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let k = net.num_classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
    }

    let n = batch.nrows() as f64;
    let (pre, logits) = net.forward_parts(&view);
    let mut dz = Array2::zeros(logits.dim());
    let mut total = 0.0;
    for ((row, mut drow), &y) in logits.rows().into_iter().zip(dz.rows_mut()).zip(labels) {
        total += sample_loss(
            kind,
            row.as_slice().expect("standard layout"),
            y,
            drow.as_slice_mut().expect("standard layout"),
        );
    }
    dz /= n;

    let hidden = pre.mapv(|v| v.max(0.0));
    let w2 = hidden.t().dot(&dz);
    let b2 = dz.sum_axis(Axis(0));
    let mut dh = dz.dot(&net.w2.t());
    dh.zip_mut_with(&pre, |d, &p| {
        if p <= 0.0 {
            *d = 0.0;
        }
    });
    let w1 = view.t().dot(&dh);
    let b1 = dh.sum_axis(Axis(0));
    Ok((total / n, Gradients { w1, b1, w2, b2 }))
}
