use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Config;
use super::source::DataSpec;
use crate::data::{save_dataset, write_metrics_csv, MetricRow};
use crate::enrichment::{build_synthetic, enrich_step1, global_samples, Step2Mode};
use crate::genetic::generate_raw;
use crate::metrics::{accuracy, agreement_experiment, boundary_dataset};
use crate::nn::{load_checkpoint, predict, save_checkpoint, SolverNetwork, TrainConfig, Trainer};
use crate::rehearsal::{random_vector_dataset, run_scheme, run_sweep, RehearsalConfig, Scheme, TaskSpec};
use crate::rng::{derive_seed, rng_from, stage};
use crate::{Dataset, Error, Result};

/// Output directory of one run; tracks artifact hashes for the manifest.
pub struct RunDir {
    root: PathBuf,
    artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: Config,
    /// Relative path to hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

impl RunDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        for sub in ["metrics", "artifacts"] {
            let p = root.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        Ok(RunDir {
            root,
            artifacts: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn track(&mut self, rel: &str) -> Result<()> {
        let p = self.root.join(rel);
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        self.artifacts
            .insert(rel.to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn csv<T: MetricRow>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let rel = format!("metrics/{name}.csv");
        write_metrics_csv(rows, self.root.join(&rel))?;
        self.track(&rel)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let rel = format!("artifacts/{name}.json");
        let p = self.root.join(&rel);
        let text = serde_json::to_string_pretty(value)?;
        std::fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
        self.track(&rel)
    }

    pub fn dataset(&mut self, name: &str, ds: &Dataset) -> Result<()> {
        let rel = format!("artifacts/{name}.dset");
        save_dataset(ds, self.root.join(&rel))?;
        self.track(&rel)
    }

    pub fn checkpoint(&mut self, name: &str, net: &SolverNetwork) -> Result<()> {
        let rel = format!("artifacts/{name}.nrlb");
        save_checkpoint(net, self.root.join(&rel))?;
        self.track(&rel)
    }

    pub fn finish(self, command: &str, cfg: &Config) -> Result<PathBuf> {
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config: cfg.clone(),
            artifacts: self.artifacts,
        };
        let p = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
        Ok(self.root)
    }
}

fn data(spec: &Option<DataSpec>, role: &str, seed: u64) -> Result<Dataset> {
    spec.as_ref()
        .ok_or_else(|| Error::Config(format!("missing [data.{role}] section")))?
        .load(role, seed)
}

fn solver(cfg: &Config) -> Result<SolverNetwork> {
    let p = cfg
        .solver
        .as_ref()
        .ok_or_else(|| Error::Config("missing 'solver' checkpoint path".into()))?;
    load_checkpoint(p)
}

fn widen(ds: Dataset, k: usize) -> Result<Dataset> {
    if ds.num_classes() >= k {
        return Ok(ds);
    }
    ds.with_num_classes(k)
}

fn test_accuracy(net: &SolverNetwork, test: &Dataset) -> Result<f64> {
    accuracy(&predict(net, test.features())?, test.labels())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub net: usize,
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

impl MetricRow for CurveRow {
    const HEADER: &'static [&'static str] = &["net", "epoch", "loss", "train_acc", "test_acc"];
}

/// Per-epoch loss and accuracies of one network.
fn fit_curve(
    net_id: usize,
    net: SolverNetwork,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(SolverNetwork, Vec<CurveRow>)> {
    cfg.validate()?;
    let mut trainer = Trainer::new(net, cfg)?;
    let mut rows = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let loss = trainer.run_epoch(train)?;
        rows.push(CurveRow {
            net: net_id,
            epoch,
            loss,
            train_acc: test_accuracy(trainer.net(), train)?,
            test_acc: test.map(|t| test_accuracy(trainer.net(), t)).transpose()?,
        });
    }
    Ok((trainer.into_net(), rows))
}

pub fn train(cfg: &Config, out: &mut RunDir) -> Result<()> {
    let train = data(&cfg.data.train, "train", cfg.seed)?;
    let test = cfg.data.test.as_ref().map(|s| s.load("test", cfg.seed)).transpose()?;
    let k = cfg.model.num_classes.unwrap_or_else(|| {
        train
            .num_classes()
            .max(test.as_ref().map_or(0, Dataset::num_classes))
    });
    let train = widen(train, k)?;
    let test = test.map(|t| widen(t, k)).transpose()?;
    let net = SolverNetwork::new(train.dim(), cfg.model.hidden_dim, k, cfg.seed)?;
    let (net, rows) = fit_curve(0, net, &train, test.as_ref(), &cfg.train)?;
    out.checkpoint("solver", &net)?;
    out.csv("train", &rows)
}

pub fn generate(cfg: &Config, out: &mut RunDir) -> Result<()> {
    let solver = solver(cfg)?;
    let k = cfg.generate.num_classes.unwrap_or(solver.num_classes());
    let mut rng = rng_from(cfg.seed, &[stage::ENRICH]);
    let synth = build_synthetic(&solver, k, &cfg.genetic, &cfg.enrichment, &mut rng)?;
    out.dataset("raw", &synth.raw.dataset)?;
    out.dataset("synthetic", &synth.dataset)?;
    out.csv("generations", &synth.raw.history)?;
    out.json("synthesis", &synth.report)
}

pub fn rehearse(cfg: &Config, out: &mut RunDir) -> Result<()> {
    let scheme: Scheme = cfg.rehearse.scheme.parse()?;
    let solver = solver(cfg)?;
    let k = solver.num_classes();
    let new_train = data(&cfg.data.new_train, "new_train", cfg.seed)?;
    let new_test = data(&cfg.data.new_test, "new_test", cfg.seed)?;
    let task = TaskSpec::new("new", &new_train, &new_test, cfg.rehearse.new_label_offset, k)?;
    let old_test = widen(data(&cfg.data.old_test, "old_test", cfg.seed)?, k)?;
    let needs_old = matches!(scheme, Scheme::Interleaved | Scheme::Serial | Scheme::Sweep);
    let old = match &cfg.data.old {
        Some(s) => widen(s.load("old", cfg.seed)?, k)?,
        None if needs_old => {
            return Err(Error::Config(format!("scheme '{scheme}' needs a [data.old] section")))
        }
        None => Dataset::empty(task.train.dim(), k),
    };
    let random_old = if scheme == Scheme::Random {
        let classes = match cfg.rehearse.random_classes {
            Some(c) => c,
            None if !old.is_empty() => old.present_classes().len(),
            None => {
                return Err(Error::Config(
                    "scheme 'random' needs rehearse.random_classes or a [data.old] section".into(),
                ))
            }
        };
        let per_class = cfg
            .rehearse
            .random_per_class
            .unwrap_or(old.len() / classes.max(1));
        let mut rng = rng_from(cfg.seed, &[stage::RANDOM_VECTORS]);
        widen(random_vector_dataset(task.train.dim(), per_class, classes, &mut rng)?, k)?
    } else {
        Dataset::empty(task.train.dim(), k)
    };
    let rc = RehearsalConfig {
        run_id: cfg.run_id.clone().unwrap_or_else(|| "rehearse".into()),
        train: cfg.train.clone(),
        sweep_fraction: cfg.rehearse.sweep_fraction,
    };
    let (net, records) = if scheme == Scheme::Sweep {
        let (net, records, counter) = run_sweep(solver, &old, &task, &old_test, &rc)?;
        out.json("sweep_batches", &counter)?;
        (net, records)
    } else {
        run_scheme(scheme, solver, &old, &random_old, &task, &old_test, &rc)?
    };
    out.checkpoint("solver", &net)?;
    out.csv("retention", &records)
}

#[derive(Debug, Serialize)]
struct NetSummary {
    net: usize,
    seed: u64,
    final_test_acc: f64,
    peak_test_acc: f64,
    peak_epoch: usize,
}

pub fn train_on_synth(cfg: &Config, out: &mut RunDir) -> Result<()> {
    if cfg.train_on_synth.nets == 0 {
        return Err(Error::Config("train_on_synth.nets must be >= 1".into()));
    }
    let synth = data(&cfg.data.synthetic, "synthetic", cfg.seed)?;
    let test = data(&cfg.data.test, "test", cfg.seed)?;
    let k = cfg
        .model
        .num_classes
        .unwrap_or(synth.num_classes().max(test.num_classes()));
    let (synth, test) = (widen(synth, k)?, widen(test, k)?);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for i in 0..cfg.train_on_synth.nets {
        let seed = derive_seed(cfg.seed, &[stage::INIT, i as u64]);
        let tc = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let net = SolverNetwork::new(synth.dim(), cfg.model.hidden_dim, k, seed)?;
        let (_, curve) = fit_curve(i, net, &synth, Some(&test), &tc)?;
        let accs: Vec<f64> = curve.iter().map(|r| r.test_acc.unwrap_or(0.0)).collect();
        let (best, peak) = accs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (j, &a)| if a > b.1 { (j, a) } else { b });
        summary.push(NetSummary {
            net: i,
            seed,
            final_test_acc: *accs.last().expect("epochs >= 1"),
            peak_test_acc: peak,
            peak_epoch: best + 1,
        });
        rows.extend(curve);
    }
    out.csv("train_on_synth", &rows)?;
    out.json("train_on_synth", &summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementRow {
    pub set: String,
    pub size: usize,
    pub test_acc: f64,
    pub alpha: f64,
}

impl MetricRow for AgreementRow {
    const HEADER: &'static [&'static str] = &["set", "size", "test_acc", "alpha"];
}

pub fn agreement(cfg: &Config, out: &mut RunDir) -> Result<()> {
    let original = data(&cfg.data.train, "train", cfg.seed)?;
    let a = data(&cfg.data.synthetic, "synthetic", cfg.seed)?;
    let b = cfg
        .data
        .synthetic_b
        .as_ref()
        .map(|s| s.load("synthetic_b", cfg.seed))
        .transpose()?;
    let test = data(&cfg.data.test, "test", cfg.seed)?;
    let report = agreement_experiment(&original, &a, b.as_ref(), &test, cfg.model.hidden_dim, &cfg.train)?;
    let mut rows = vec![
        AgreementRow {
            set: "original".into(),
            size: report.original_size,
            test_acc: report.original_test_accuracy,
            alpha: 100.0,
        },
        AgreementRow {
            set: "synthetic".into(),
            size: report.synth_a_size,
            test_acc: report.synth_a_test_accuracy,
            alpha: report.alpha_a,
        },
    ];
    if let (Some(size), Some(acc), Some(alpha)) = (report.synth_b_size, report.synth_b_test_accuracy, report.alpha_b) {
        rows.push(AgreementRow {
            set: "synthetic_b".into(),
            size,
            test_acc: acc,
            alpha,
        });
    }
    out.csv("agreement", &rows)?;
    out.json("agreement", &report)
}

pub fn boundary(cfg: &Config, out: &mut RunDir) -> Result<()> {
    let solver = solver(cfg)?;
    let samples = data(&cfg.data.samples, "samples", cfg.seed)?;
    let test = widen(data(&cfg.data.test, "test", cfg.seed)?, solver.num_classes())?;
    let points = boundary_dataset(&solver, samples.features(), cfg.boundary.keep_fraction)?;
    let net = SolverNetwork::new(points.dim(), cfg.model.hidden_dim, solver.num_classes(), cfg.seed)?;
    let (_, rows) = fit_curve(0, net, &points, Some(&test), &cfg.train)?;
    out.dataset("boundary", &points)?;
    out.csv("boundary", &rows)
}

#[derive(Debug, Serialize)]
struct Timing {
    genetic_s: f64,
    step1_s: f64,
    step2_s: f64,
    total_s: f64,
    raw_samples: usize,
    synthetic_samples: usize,
    generations: Vec<usize>,
}

pub fn bench(cfg: &Config, out: &mut RunDir) -> Result<()> {
    let solver = solver(cfg)?;
    let k = cfg.generate.num_classes.unwrap_or(solver.num_classes());
    cfg.enrichment.validate()?;
    let mut rng = rng_from(cfg.seed, &[stage::ENRICH]);
    let start = Instant::now();
    let raw = generate_raw(&solver, k, &cfg.genetic)?;
    let t_gen = start.elapsed().as_secs_f64();
    let (step1, _) = enrich_step1(&raw.dataset, cfg.enrichment.n_per_class, &mut rng)?;
    let t_step1 = start.elapsed().as_secs_f64();
    let (global, _) = global_samples(
        &step1,
        cfg.enrichment.n_global,
        &solver,
        cfg.enrichment.min_confidence,
        &mut rng,
    )?;
    let synthetic = match cfg.enrichment.step2_mode {
        Step2Mode::Augment => step1.len() + global.len(),
        Step2Mode::Replace => global.len(),
    };
    let total = start.elapsed().as_secs_f64();
    out.json(
        "timing",
        &Timing {
            genetic_s: t_gen,
            step1_s: t_step1 - t_gen,
            step2_s: total - t_step1,
            total_s: total,
            raw_samples: raw.dataset.len(),
            synthetic_samples: synthetic,
            generations: raw.cultures.iter().map(|c| c.generations).collect(),
        },
    )
}
