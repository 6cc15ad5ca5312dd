//! Accuracy, agreement score and softmax-spread boundary filtering.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::nn::{predict, predict_proba, train, SolverNetwork, TrainConfig};
use crate::{Error, Matrix, Result};

fn check_pair(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("empty prediction vectors"));
    }
    Ok(())
}

/// Percentage of positions where the two prediction vectors agree.
pub fn agreement_score(preds_m: &[usize], preds_n: &[usize]) -> Result<f64> {
    check_pair(preds_m, preds_n)?;
    let same = preds_m.iter().zip(preds_n).filter(|(a, b)| a == b).count();
    Ok(100.0 * same as f64 / preds_m.len() as f64)
}

/// Percentage of correct predictions.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    agreement_score(preds, labels)
}

/// Population standard deviation (divisor K) of a probability vector.
pub fn softmax_std(probs: &[f64]) -> f64 {
    let k = probs.len() as f64;
    let mean = probs.iter().sum::<f64>() / k;
    (probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / k).sqrt()
}

/// Indices (ascending) of the `ceil(keep_fraction * n)` samples whose softmax
/// vectors have the smallest standard deviation. Ties keep input order.
pub fn boundary_indices(solver: &SolverNetwork, samples: &Matrix, keep_fraction: f64) -> Result<Vec<usize>> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::invalid(format!("keep_fraction must be in (0, 1], got {keep_fraction}")));
    }
    let n = samples.nrows();
    if n == 0 {
        return Err(Error::invalid("boundary filter needs at least one sample"));
    }
    let probs = predict_proba(solver, samples)?;
    let spread: Vec<f64> = probs
        .rows()
        .into_iter()
        .map(|r| softmax_std(r.as_slice().expect("standard layout")))
        .collect();
    let keep = ((keep_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| spread[a].total_cmp(&spread[b]));
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

pub fn boundary_filter(solver: &SolverNetwork, samples: &Matrix, keep_fraction: f64) -> Result<Matrix> {
    let idx = boundary_indices(solver, samples, keep_fraction)?;
    Ok(samples.select(ndarray::Axis(0), &idx))
}

/// Boundary points labelled by the solver's argmax.
pub fn boundary_dataset(solver: &SolverNetwork, samples: &Matrix, keep_fraction: f64) -> Result<Dataset> {
    let kept = boundary_filter(solver, samples, keep_fraction)?;
    let labels = predict(solver, &kept)?;
    Dataset::new(kept, labels, solver.num_classes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub seed: u64,
    pub hidden_dim: usize,
    pub original_size: usize,
    pub synth_a_size: usize,
    pub synth_b_size: Option<usize>,
    pub test_size: usize,
    pub original_test_accuracy: f64,
    pub synth_a_test_accuracy: f64,
    pub synth_b_test_accuracy: Option<f64>,
    pub alpha_a: f64,
    pub alpha_b: Option<f64>,
}

/// Train same-initialisation networks on the original data and on each
/// synthetic set, then score each synthetic model's agreement with the
/// original-data model on `test`.
pub fn agreement_experiment(
    original_train: &Dataset,
    synth_a: &Dataset,
    synth_b: Option<&Dataset>,
    test: &Dataset,
    hidden_dim: usize,
    cfg: &TrainConfig,
) -> Result<AgreementReport> {
    let dim = original_train.dim();
    let mut k = original_train.num_classes().max(synth_a.num_classes()).max(test.num_classes());
    if let Some(b) = synth_b {
        k = k.max(b.num_classes());
    }
    let init = SolverNetwork::new(dim, hidden_dim, k, cfg.seed)?;
    let fit = |ds: &Dataset| -> Result<(Vec<usize>, f64)> {
        let (net, _) = train(init.clone(), ds, cfg)?;
        let preds = predict(&net, test.features())?;
        let acc = accuracy(&preds, test.labels())?;
        Ok((preds, acc))
    };
    let (p_orig, acc_orig) = fit(original_train)?;
    let (p_a, acc_a) = fit(synth_a)?;
    let b = synth_b.map(fit).transpose()?;
    Ok(AgreementReport {
        seed: cfg.seed,
        hidden_dim,
        original_size: original_train.len(),
        synth_a_size: synth_a.len(),
        synth_b_size: synth_b.map(Dataset::len),
        test_size: test.len(),
        original_test_accuracy: acc_orig,
        synth_a_test_accuracy: acc_a,
        synth_b_test_accuracy: b.as_ref().map(|x| x.1),
        alpha_a: agreement_score(&p_orig, &p_a)?,
        alpha_b: b.map(|(p, _)| agreement_score(&p_orig, &p)).transpose()?,
    })
}
