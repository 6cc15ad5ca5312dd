//! Two-task sequential learning with interleaved, serial and sweep rehearsal.
//!
//! The solver keeps a single softmax head over the union of both tasks' class
//! ids; the new task's labels are shifted by [`TaskSpec::label_offset`].
//! Old-task accuracy is always measured on real held-out data.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MetricRow};
use crate::metrics::accuracy;
use crate::nn::{predict, SolverNetwork, TrainConfig, Trainer};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Old data shuffled together with new data every epoch.
    Interleaved,
    /// One epoch of old data, then one epoch of new data, per cycle.
    Serial,
    /// Every new-task minibatch carries a fixed fraction of resampled old items.
    Sweep,
    /// Interleaved with uniformly random labelled vectors as the old data.
    Random,
    /// New data only.
    None,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Interleaved,
        Scheme::Serial,
        Scheme::Sweep,
        Scheme::Random,
        Scheme::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Interleaved => "interleaved",
            Scheme::Serial => "serial",
            Scheme::Sweep => "sweep",
            Scheme::Random => "random",
            Scheme::None => "none",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = Scheme::ALL.iter().map(|x| x.as_str()).collect();
                Error::Config(format!("unknown scheme '{s}'; valid schemes: {}", valid.join(", ")))
            })
    }
}

/// One task of the sequence, with labels already shifted into the shared head.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: String,
    pub train: Dataset,
    pub test: Dataset,
    pub label_offset: usize,
}

impl TaskSpec {
    /// Shift `train` and `test` labels by `label_offset` into a head of `head_size` classes.
    pub fn new(id: impl Into<String>, train: &Dataset, test: &Dataset, label_offset: usize, head_size: usize) -> Result<Self> {
        if train.dim() != test.dim() {
            return Err(Error::shape(format!(
                "train dim {} but test dim {}",
                train.dim(),
                test.dim()
            )));
        }
        Ok(TaskSpec {
            id: id.into(),
            train: train.with_label_offset(label_offset, head_size)?,
            test: test.with_label_offset(label_offset, head_size)?,
            label_offset,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRecord {
    pub run_id: String,
    pub scheme: String,
    pub epoch: usize,
    /// Accuracy in percent on the real old-task test set.
    pub old_acc: f64,
    /// Accuracy in percent on the new-task test set.
    pub new_acc: f64,
    pub seed: u64,
}

impl MetricRow for RetentionRecord {
    const HEADER: &'static [&'static str] = &["run_id", "scheme", "epoch", "old_acc", "new_acc", "seed"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RehearsalConfig {
    pub run_id: String,
    /// Epochs for interleaved runs, cycles for serial and sweep runs.
    pub train: TrainConfig,
    pub sweep_fraction: f64,
}

impl Default for RehearsalConfig {
    fn default() -> Self {
        RehearsalConfig {
            run_id: "run".into(),
            train: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            sweep_fraction: 0.5,
        }
    }
}

/// Concatenation of `old` and `new` in a uniformly random order.
pub fn interleave<R: Rng + ?Sized>(old: &Dataset, new: &Dataset, rng: &mut R) -> Result<Dataset> {
    if old.is_empty() && new.is_empty() {
        return Err(Error::invalid("cannot interleave two empty datasets"));
    }
    let joined = if old.is_empty() {
        new.clone()
    } else if new.is_empty() {
        old.clone()
    } else {
        old.concat(new)?
    };
    Ok(joined.shuffled(rng))
}

/// `n_per_class` uniform vectors in `[0, 1]^d` for each of `num_classes` labels.
pub fn random_vector_dataset<R: Rng + ?Sized>(
    d: usize,
    n_per_class: usize,
    num_classes: usize,
    rng: &mut R,
) -> Result<Dataset> {
    let n = n_per_class * num_classes;
    let x = Matrix::from_shape_simple_fn((n, d), || rng.random::<f64>());
    let labels = (0..num_classes).flat_map(|c| std::iter::repeat_n(c, n_per_class)).collect();
    Dataset::new(x, labels, num_classes.max(1))
}

fn check_inputs(solver: &SolverNetwork, old: &Dataset, task: &TaskSpec, old_test: &Dataset) -> Result<()> {
    let k = solver.num_classes();
    for (name, ds) in [
        ("old data", old),
        ("new train", &task.train),
        ("new test", &task.test),
        ("old test", old_test),
    ] {
        if ds.is_empty() && name == "old data" {
            continue;
        }
        if ds.dim() != solver.input_dim() {
            return Err(Error::shape(format!(
                "{name} has dim {} but the solver expects {}",
                ds.dim(),
                solver.input_dim()
            )));
        }
        if let Some(&l) = ds.labels().iter().max() {
            if l >= k {
                return Err(Error::invalid(format!(
                    "{name} has label {l} outside the solver's {k} outputs"
                )));
            }
        }
    }
    if task.train.is_empty() || old_test.is_empty() || task.test.is_empty() {
        return Err(Error::invalid("new-task train/test and old-task test sets must be non-empty"));
    }
    Ok(())
}

fn record(net: &SolverNetwork, epoch: usize, scheme: Scheme, task: &TaskSpec, old_test: &Dataset, cfg: &RehearsalConfig) -> Result<RetentionRecord> {
    let old_acc = accuracy(&predict(net, old_test.features())?, old_test.labels())?;
    let new_acc = accuracy(&predict(net, task.test.features())?, task.test.labels())?;
    Ok(RetentionRecord {
        run_id: cfg.run_id.clone(),
        scheme: scheme.to_string(),
        epoch,
        old_acc,
        new_acc,
        seed: cfg.train.seed,
    })
}

/// Train on the shuffled union of `old_synth` and the new task for
/// `cfg.train.epochs` epochs, recording retention after each.
pub fn run_interleaved(
    solver: SolverNetwork,
    old_synth: &Dataset,
    new_task: &TaskSpec,
    old_test: &Dataset,
    cfg: &RehearsalConfig,
) -> Result<(SolverNetwork, Vec<RetentionRecord>)> {
    let scheme = if old_synth.is_empty() { Scheme::None } else { Scheme::Interleaved };
    interleaved_as(scheme, solver, old_synth, new_task, old_test, cfg)
}

fn interleaved_as(
    scheme: Scheme,
    solver: SolverNetwork,
    old_synth: &Dataset,
    new_task: &TaskSpec,
    old_test: &Dataset,
    cfg: &RehearsalConfig,
) -> Result<(SolverNetwork, Vec<RetentionRecord>)> {
    check_inputs(&solver, old_synth, new_task, old_test)?;
    let mut trainer = Trainer::new(solver, &cfg.train)?;
    let data = interleave(old_synth, &new_task.train, trainer.rng_mut())?;
    let mut out = Vec::with_capacity(cfg.train.epochs);
    for epoch in 1..=cfg.train.epochs {
        trainer.run_epoch(&data)?;
        out.push(record(trainer.net(), epoch, scheme, new_task, old_test, cfg)?);
    }
    Ok((trainer.into_net(), out))
}

/// Each cycle is one epoch on `old_synth` followed by one on the new task.
pub fn run_serial(
    solver: SolverNetwork,
    old_synth: &Dataset,
    new_task: &TaskSpec,
    old_test: &Dataset,
    cfg: &RehearsalConfig,
) -> Result<(SolverNetwork, Vec<RetentionRecord>)> {
    check_inputs(&solver, old_synth, new_task, old_test)?;
    let mut trainer = Trainer::new(solver, &cfg.train)?;
    let mut out = Vec::with_capacity(cfg.train.epochs);
    for cycle in 1..=cfg.train.epochs {
        if !old_synth.is_empty() {
            trainer.run_epoch(old_synth)?;
        }
        trainer.run_epoch(&new_task.train)?;
        out.push(record(trainer.net(), cycle, Scheme::Serial, new_task, old_test, cfg)?);
    }
    Ok((trainer.into_net(), out))
}

/// Item counts seen by a sweep run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchCounter {
    pub batches: usize,
    pub old_items: usize,
    pub new_items: usize,
}

/// Old and new items per minibatch for a sweep fraction: `round(f * B)` old.
pub fn sweep_split(fraction: f64, batch_size: usize) -> Result<(usize, usize)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("sweep fraction must be in (0, 1), got {fraction}")));
    }
    let n_old = ((fraction * batch_size as f64).round() as usize).min(batch_size);
    Ok((n_old, batch_size - n_old))
}

/// Sweep rehearsal: new-task items are visited once per cycle in shuffled
/// minibatches of `B - round(f * B)` items, each topped up with `round(f * B)`
/// old items drawn afresh with replacement.
pub fn run_sweep(
    solver: SolverNetwork,
    old_synth: &Dataset,
    new_task: &TaskSpec,
    old_test: &Dataset,
    cfg: &RehearsalConfig,
) -> Result<(SolverNetwork, Vec<RetentionRecord>, BatchCounter)> {
    let (n_old, n_new) = sweep_split(cfg.sweep_fraction, cfg.train.batch_size)?;
    check_inputs(&solver, old_synth, new_task, old_test)?;
    if old_synth.is_empty() && n_old > 0 {
        return Err(Error::invalid("sweep rehearsal needs non-empty old data"));
    }
    let data = old_synth.concat(&new_task.train)?;
    let n_old_total = old_synth.len();
    let n_new_total = new_task.train.len();
    let batches_per_cycle = if n_new == 0 {
        n_new_total.div_ceil(cfg.train.batch_size)
    } else {
        n_new_total.div_ceil(n_new)
    };
    let mut trainer = Trainer::new(solver, &cfg.train)?;
    let mut counter = BatchCounter::default();
    let mut out = Vec::with_capacity(cfg.train.epochs);
    let mut new_order: Vec<usize> = (n_old_total..n_old_total + n_new_total).collect();
    for cycle in 1..=cfg.train.epochs {
        new_order.shuffle(trainer.rng_mut());
        for b in 0..batches_per_cycle {
            let mut idx: Vec<usize> = if n_new == 0 {
                Vec::with_capacity(n_old)
            } else {
                new_order[b * n_new..((b + 1) * n_new).min(n_new_total)].to_vec()
            };
            counter.new_items += idx.len();
            for _ in 0..n_old {
                idx.push(trainer.rng_mut().random_range(0..n_old_total));
            }
            counter.old_items += n_old;
            counter.batches += 1;
            trainer.train_batch(&data, &idx)?;
        }
        out.push(record(trainer.net(), cycle, Scheme::Sweep, new_task, old_test, cfg)?);
    }
    Ok((trainer.into_net(), out, counter))
}

/// Dispatch on `scheme`. `old` is ignored for [`Scheme::Random`] and
/// [`Scheme::None`]; `random_old` supplies the random vectors.
pub fn run_scheme(
    scheme: Scheme,
    solver: SolverNetwork,
    old: &Dataset,
    random_old: &Dataset,
    new_task: &TaskSpec,
    old_test: &Dataset,
    cfg: &RehearsalConfig,
) -> Result<(SolverNetwork, Vec<RetentionRecord>)> {
    match scheme {
        Scheme::Interleaved => interleaved_as(scheme, solver, old, new_task, old_test, cfg),
        Scheme::Serial => run_serial(solver, old, new_task, old_test, cfg),
        Scheme::Sweep => run_sweep(solver, old, new_task, old_test, cfg).map(|(n, r, _)| (n, r)),
        Scheme::Random => interleaved_as(scheme, solver, random_old, new_task, old_test, cfg),
        Scheme::None => {
            let empty = Dataset::empty(new_task.train.dim(), new_task.train.num_classes());
            interleaved_as(scheme, solver, &empty, new_task, old_test, cfg)
        }
    }
}
