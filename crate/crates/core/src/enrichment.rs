//! Gaussian enrichment of evolved populations.
//!
//! Step 1 fits one Gaussian per class to the evolved genomes and samples more
//! points for that class. Step 2 fits a single Gaussian to everything step 1
//! produced and samples a sheet of points spread around the global mean; each
//! is labelled by the solver and kept only if the solver is confident enough.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::genetic::{generate_raw, CultureSummary, GaConfig};
use crate::nn::{argmax, predict_proba, SolverNetwork};
use crate::rng::Rng as ChaCha;
use crate::{Error, Matrix, Result};

/// First diagonal regularizer tried when factorizing a fitted covariance.
pub const INITIAL_REGULARIZER: f64 = 1e-6;
const MAX_REGULARIZER: f64 = 1e3;

/// Multivariate normal with a cached Cholesky factor of `covariance + reg * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: Array1<f64>,
    covariance: Array2<f64>,
    regularizer: f64,
    chol: Array2<f64>,
}

/// Lower Cholesky factor of a symmetric matrix, `None` unless positive definite.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return None;
    }
    let mut l = Array2::<f64>::zeros((d, d));
    let lv = l.as_slice_mut().expect("standard layout");
    for j in 0..d {
        let row_j = &lv[j * d..j * d + j];
        let diag = a[[j, j]] - row_j.iter().map(|v| v * v).sum::<f64>();
        if !(diag > 0.0 && diag.is_finite()) {
            return None;
        }
        let ljj = diag.sqrt();
        lv[j * d + j] = ljj;
        for i in j + 1..d {
            let (upper, lower) = lv.split_at_mut(i * d);
            let rj = &upper[j * d..j * d + j];
            let dot: f64 = lower[..j].iter().zip(rj).map(|(x, y)| x * y).sum();
            lower[j] = (a[[i, j]] - dot) / ljj;
        }
    }
    Some(l)
}

impl GaussianModel {
    /// Model with an explicit covariance and diagonal regularizer.
    pub fn new(mean: Array1<f64>, covariance: Array2<f64>, regularizer: f64) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.dim() != (d, d) {
            return Err(Error::shape(format!(
                "mean of length {d} with covariance {:?}",
                covariance.dim()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite mean"));
        }
        let reg = &covariance + &(Array2::<f64>::eye(d) * regularizer);
        let chol = cholesky(&reg).ok_or_else(|| {
            Error::invalid(format!("covariance + {regularizer:e} I is not positive definite"))
        })?;
        Ok(GaussianModel {
            mean,
            covariance,
            regularizer,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    /// The fitted (unregularized) covariance.
    pub fn covariance(&self) -> &Array2<f64> {
        &self.covariance
    }

    pub fn regularizer(&self) -> f64 {
        self.regularizer
    }

    pub fn cholesky_factor(&self) -> &Array2<f64> {
        &self.chol
    }

    /// `ln |covariance + reg I|`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.diag().iter().map(|v| v.ln()).sum::<f64>()
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::shape(format!("point has {} coords, model has {d}", x.len())));
        }
        // forward substitution: L y = x - mu
        let mut y = vec![0.0; d];
        for i in 0..d {
            let row = self.chol.row(i);
            let s: f64 = (0..i).map(|k| row[k] * y[k]).sum();
            y[i] = (x[i] - self.mean[i] - s) / row[i];
        }
        let maha: f64 = y.iter().map(|v| v * v).sum();
        Ok(-0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + self.log_det() + maha))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// `n` draws `mu + L z` without clamping.
    pub fn sample_raw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Matrix {
        let d = self.dim();
        let z = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
        z.dot(&self.chol.t()) + &self.mean
    }
}

/// Sample mean and maximum-likelihood (divisor n) covariance, regularized
/// with `1e-6 * 10^k` on the diagonal for the smallest `k` that factorizes.
pub fn fit_gaussian(samples: &Matrix) -> Result<GaussianModel> {
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 samples to fit a Gaussian, got {n}")));
    }
    let mean = samples.mean_axis(Axis(0)).expect("n >= 2");
    let centered = samples - &mean;
    let mut cov = centered.t().dot(&centered) / n as f64;
    let d = cov.nrows();
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    let mut reg = INITIAL_REGULARIZER;
    loop {
        match GaussianModel::new(mean.clone(), cov.clone(), reg) {
            Ok(model) => return Ok(model),
            Err(_) if reg < MAX_REGULARIZER => reg *= 10.0,
            Err(e) => return Err(e),
        }
    }
}

pub fn gaussian_density(model: &GaussianModel, x: &[f64]) -> Result<f64> {
    model.density(x)
}

/// `n` draws clamped to the genome domain `[0, 1]^d`.
pub fn sample_gaussian<R: Rng + ?Sized>(model: &GaussianModel, n: usize, rng: &mut R) -> Matrix {
    model.sample_raw(n, rng).mapv(|v| v.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFit {
    pub class: usize,
    pub samples: usize,
    pub regularizer: f64,
}

/// Fit a Gaussian to every class present in `raw` and append `n_per_class`
/// draws labelled with that class.
pub fn enrich_step1<R: Rng + ?Sized>(
    raw: &Dataset,
    n_per_class: usize,
    rng: &mut R,
) -> Result<(Dataset, Vec<ClassFit>)> {
    if n_per_class == 0 {
        return Ok((raw.clone(), Vec::new()));
    }
    let classes = raw.present_classes();
    let counts = raw.class_counts();
    if let Some(&c) = classes.iter().find(|&&c| counts[c] < 2) {
        return Err(Error::Class {
            class: c,
            source: Box::new(Error::invalid(format!(
                "class {c} has {} raw sample(s); at least 2 are needed",
                counts[c]
            ))),
        });
    }
    let seeds: Vec<u64> = classes.iter().map(|_| rng.random()).collect();
    let parts: Vec<Result<(Matrix, ClassFit)>> = classes
        .par_iter()
        .zip(seeds)
        .map(|(&c, seed)| {
            let model = fit_gaussian(&raw.class_rows(c)).map_err(|e| Error::Class {
                class: c,
                source: Box::new(e),
            })?;
            let mut local = <ChaCha as rand::SeedableRng>::seed_from_u64(seed);
            let fit = ClassFit {
                class: c,
                samples: counts[c],
                regularizer: model.regularizer(),
            };
            Ok((sample_gaussian(&model, n_per_class, &mut local), fit))
        })
        .collect();
    let mut out = raw.clone();
    let mut fits = Vec::with_capacity(classes.len());
    for (part, &c) in parts.into_iter().zip(&classes) {
        let (x, fit) = part?;
        let added = Dataset::new(x, vec![c; n_per_class], raw.num_classes())?;
        out = out.concat(&added)?;
        fits.push(fit);
    }
    Ok((out, fits))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFit {
    pub drawn: usize,
    pub kept: usize,
    pub regularizer: Option<f64>,
}

impl GlobalFit {
    pub fn discard_rate(&self) -> f64 {
        if self.drawn == 0 {
            0.0
        } else {
            1.0 - self.kept as f64 / self.drawn as f64
        }
    }
}

/// Draws from one Gaussian fitted to all of `data` (labels ignored), labelled
/// by the solver's argmax; draws whose top confidence is below
/// `min_confidence` are dropped.
pub fn global_samples<R: Rng + ?Sized>(
    data: &Dataset,
    n_global: usize,
    solver: &SolverNetwork,
    min_confidence: f64,
    rng: &mut R,
) -> Result<(Dataset, GlobalFit)> {
    if n_global == 0 {
        return Ok((
            Dataset::empty(data.dim(), data.num_classes()),
            GlobalFit {
                drawn: 0,
                kept: 0,
                regularizer: None,
            },
        ));
    }
    let model = fit_gaussian(data.features())?;
    let draws = sample_gaussian(&model, n_global, rng);
    let probs = predict_proba(solver, &draws)?;
    let mut keep = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in probs.rows().into_iter().enumerate() {
        let p = row.as_slice().expect("standard layout");
        let top = argmax(p);
        if p[top] >= min_confidence {
            keep.push(i);
            labels.push(top);
        }
    }
    let k = data.num_classes().max(solver.num_classes());
    let kept = Dataset::new(draws.select(Axis(0), &keep), labels, k)?;
    let info = GlobalFit {
        drawn: n_global,
        kept: kept.len(),
        regularizer: Some(model.regularizer()),
    };
    Ok((kept, info))
}

/// `step1_data` followed by the confident global draws.
pub fn enrich_step2<R: Rng + ?Sized>(
    step1_data: &Dataset,
    n_global: usize,
    solver: &SolverNetwork,
    min_confidence: f64,
    rng: &mut R,
) -> Result<(Dataset, GlobalFit)> {
    let (kept, info) = global_samples(step1_data, n_global, solver, min_confidence, rng)?;
    Ok((step1_data.concat(&kept)?, info))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step2Mode {
    /// Keep step-1 data and add the global draws.
    #[default]
    Augment,
    /// Output only the global draws.
    Replace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnrichConfig {
    pub n_per_class: usize,
    pub n_global: usize,
    pub min_confidence: f64,
    pub step2_mode: Step2Mode,
}

impl Default for EnrichConfig {
    fn default() -> Self {
        EnrichConfig {
            n_per_class: 1000,
            n_global: 4000,
            min_confidence: 0.5,
            step2_mode: Step2Mode::Augment,
        }
    }
}

impl EnrichConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::invalid(format!(
                "min_confidence must be in [0, 1], got {}",
                self.min_confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub raw_count: usize,
    pub step1_count: usize,
    pub step2_drawn: usize,
    pub step2_kept: usize,
    pub step2_discard_rate: f64,
    pub total: usize,
    pub class_counts: Vec<usize>,
    pub step1_fits: Vec<ClassFit>,
    pub step2_regularizer: Option<f64>,
    pub all_converged: bool,
    pub cultures: Vec<CultureSummary>,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub raw: crate::genetic::RawGeneration,
    pub step1: Dataset,
    pub dataset: Dataset,
    pub report: SynthesisReport,
}

/// Evolve raw samples for classes `0..num_classes`, then run both
/// enrichment steps. Only the solver is consulted, never the original data.
pub fn build_synthetic<R: Rng + ?Sized>(
    solver: &SolverNetwork,
    num_classes: usize,
    ga: &GaConfig,
    enrich: &EnrichConfig,
    rng: &mut R,
) -> Result<Synthesis> {
    enrich.validate()?;
    let raw = generate_raw(solver, num_classes, ga)?;
    let (step1, step1_fits) = enrich_step1(&raw.dataset, enrich.n_per_class, rng)?;
    let (global, fit2) = global_samples(&step1, enrich.n_global, solver, enrich.min_confidence, rng)?;
    let dataset = match enrich.step2_mode {
        Step2Mode::Augment => step1.concat(&global)?,
        Step2Mode::Replace => global,
    };
    let report = SynthesisReport {
        raw_count: raw.dataset.len(),
        step1_count: step1.len(),
        step2_drawn: fit2.drawn,
        step2_kept: fit2.kept,
        step2_discard_rate: fit2.discard_rate(),
        total: dataset.len(),
        class_counts: dataset.class_counts(),
        step1_fits,
        step2_regularizer: fit2.regularizer,
        all_converged: raw.all_converged(),
        cultures: raw.cultures.clone(),
    };
    Ok(Synthesis {
        raw,
        step1,
        dataset,
        report,
    })
}
