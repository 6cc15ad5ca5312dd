use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{adam_step, loss_and_gradients, predict, AdamConfig, AdamState, LossKind, SolverNetwork};
use crate::data::{Dataset, MetricRow};
use crate::metrics::accuracy;
use crate::rng::{rng_from, stage, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            loss: LossKind::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Training-set accuracy in percent after the epoch.
    pub accuracy: f64,
}

impl MetricRow for EpochRecord {
    const HEADER: &'static [&'static str] = &["epoch", "loss", "accuracy"];
}

/// A network with its optimizer state and shuffle stream.
#[derive(Debug, Clone)]
pub struct Trainer {
    net: SolverNetwork,
    adam: AdamState,
    rng: Rng,
    batch_size: usize,
    loss: LossKind,
}

impl Trainer {
    pub fn new(net: SolverNetwork, cfg: &TrainConfig) -> Result<Self> {
        if cfg.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        let adam = AdamState::for_network(&net, cfg.adam());
        Ok(Trainer {
            net,
            adam,
            rng: rng_from(cfg.seed, &[stage::SHUFFLE]),
            batch_size: cfg.batch_size,
            loss: cfg.loss,
        })
    }

    pub fn net(&self) -> &SolverNetwork {
        &self.net
    }

    pub fn into_net(self) -> SolverNetwork {
        self.net
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn rng_mut(&mut self) -> &mut Rng {
        &mut self.rng
    }

    pub fn optimizer_steps(&self) -> u64 {
        self.adam.step_count()
    }

    /// One gradient step; returns the batch loss.
    pub fn train_batch(&mut self, data: &Dataset, indices: &[usize]) -> Result<f64> {
        let batch = data.select(indices);
        let (loss, grads) = loss_and_gradients(&self.net, batch.features(), batch.labels(), self.loss)?;
        adam_step(&mut self.net, &grads, &mut self.adam)?;
        Ok(loss)
    }

    /// One shuffled pass over `data`; returns the sample-weighted mean loss.
    pub fn run_epoch(&mut self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("cannot train on an empty dataset"));
        }
        if data.dim() != self.net.input_dim() {
            return Err(Error::shape(format!(
                "dataset dim {} but network input {}",
                data.dim(),
                self.net.input_dim()
            )));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for chunk in order.chunks(self.batch_size) {
            total += self.train_batch(data, chunk)? * chunk.len() as f64;
        }
        Ok(total / data.len() as f64)
    }
}

/// Train for `cfg.epochs` epochs, recording loss and train accuracy per epoch.
pub fn train(
    net: SolverNetwork,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(SolverNetwork, Vec<EpochRecord>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let mut trainer = Trainer::new(net, cfg)?;
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let loss = trainer.run_epoch(dataset)?;
        let preds = predict(trainer.net(), dataset.features())?;
        records.push(EpochRecord {
            epoch,
            loss,
            accuracy: accuracy(&preds, dataset.labels())?,
        });
    }
    Ok((trainer.into_net(), records))
}
