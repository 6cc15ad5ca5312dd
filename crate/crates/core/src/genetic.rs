//! Genetic generation of synthetic samples.
//!
//! A population of genomes in `[0, 1]^d` is scored by the solver's softmax
//! confidence for a target class. Each generation keeps the fittest quarter
//! (the elite) verbatim and refills the population with crossover children of
//! adjacent elite pairs, mutants of every elite member, and crossover
//! children of adjacent mutants. Adjacent pairs wrap around the elite list.
//! Evolution stops once every organism's fitness exceeds the threshold.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MetricRow};
use crate::nn::{forward, softmax, SolverNetwork};
use crate::rng::{rng_from, stage};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Linear,
    Roulette,
    Tournament,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverKind {
    /// Each gene drawn from either parent with probability 1/2.
    #[default]
    Uniform,
    /// Genes before a random cut come from the first parent.
    SinglePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    /// Organisms per culture; must be a multiple of 4.
    pub population_size: usize,
    /// Evolution stops once every fitness is above this value.
    pub fitness_threshold: f64,
    pub selection: Selection,
    /// Fraction of the population removed before tournament selection.
    pub extinction_fraction: f64,
    pub crossover: CrossoverKind,
    pub mutation_rate: f64,
    pub mutation_magnitude: f64,
    pub max_generations: usize,
    pub cultures: usize,
    pub seed: u64,
    /// Compute duplicate and distance metrics every generation.
    pub track_diversity: bool,
    pub duplicate_epsilon: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 400,
            fitness_threshold: 0.99,
            selection: Selection::Linear,
            extinction_fraction: 0.5,
            crossover: CrossoverKind::Uniform,
            mutation_rate: 0.05,
            mutation_magnitude: 0.2,
            max_generations: 500,
            cultures: 1,
            seed: 0,
            track_diversity: false,
            duplicate_epsilon: 0.0,
        }
    }
}

impl GaConfig {
    pub fn elite_size(&self) -> usize {
        self.population_size / 4
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.population_size;
        if m < 4 || !m.is_multiple_of(4) {
            return Err(Error::invalid(format!(
                "population_size must be a positive multiple of 4, got {m}"
            )));
        }
        if !(self.fitness_threshold > 0.0 && self.fitness_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "fitness_threshold must be in (0, 1), got {}",
                self.fitness_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::invalid(format!("mutation_rate must be in [0, 1], got {}", self.mutation_rate)));
        }
        if !(self.mutation_magnitude >= 0.0 && self.mutation_magnitude.is_finite()) {
            return Err(Error::invalid("mutation_magnitude must be finite and >= 0"));
        }
        if self.cultures == 0 {
            return Err(Error::invalid("cultures must be >= 1"));
        }
        if self.duplicate_epsilon < 0.0 {
            return Err(Error::invalid("duplicate_epsilon must be >= 0"));
        }
        if self.selection == Selection::Tournament {
            survivors_after_extinction(m, self.extinction_fraction)?;
        }
        Ok(())
    }
}

fn survivors_after_extinction(m: usize, p: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("extinction_fraction must be in [0, 1), got {p}")));
    }
    let extinct = (p * m as f64).floor() as usize;
    let survivors = m - extinct;
    if survivors < m / 4 {
        return Err(Error::invalid(format!(
            "extinction_fraction {p} leaves {survivors} survivors, fewer than the elite quota {}",
            m / 4
        )));
    }
    Ok(survivors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Organism {
    pub genome: Vec<f64>,
    /// Target-class confidence; `None` once the genome has changed.
    pub fitness: Option<f64>,
}

impl Organism {
    pub fn new(genome: Vec<f64>) -> Self {
        Organism { genome, fitness: None }
    }

    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Organism::new((0..dim).map(|_| rng.random::<f64>()).collect())
    }

    fn fitness_or_err(&self) -> Result<f64> {
        self.fitness
            .ok_or_else(|| Error::invalid("organism fitness is stale; evaluate before selecting"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub organisms: Vec<Organism>,
    pub target_class: usize,
}

impl Population {
    pub fn random<R: Rng + ?Sized>(size: usize, dim: usize, target_class: usize, rng: &mut R) -> Self {
        Population {
            organisms: (0..size).map(|_| Organism::random(dim, rng)).collect(),
            target_class,
        }
    }

    pub fn len(&self) -> usize {
        self.organisms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.organisms.is_empty()
    }

    pub fn genomes(&self) -> Matrix {
        genome_matrix(&self.organisms)
    }

    fn fitnesses(&self) -> Result<Vec<f64>> {
        self.organisms.iter().map(Organism::fitness_or_err).collect()
    }

    pub fn min_fitness(&self) -> Option<f64> {
        self.organisms.iter().filter_map(|o| o.fitness).reduce(f64::min)
    }

    pub fn max_fitness(&self) -> Option<f64> {
        self.organisms.iter().filter_map(|o| o.fitness).reduce(f64::max)
    }
}

fn genome_matrix(organisms: &[Organism]) -> Matrix {
    let dim = organisms.first().map_or(0, |o| o.genome.len());
    let mut m = Matrix::zeros((organisms.len(), dim));
    for (mut row, o) in m.rows_mut().into_iter().zip(organisms) {
        row.as_slice_mut().unwrap().copy_from_slice(&o.genome);
    }
    m
}

fn score(solver: &SolverNetwork, organisms: &[&mut Organism], target: usize) -> Result<Vec<f64>> {
    let dim = solver.input_dim();
    if let Some(o) = organisms.iter().find(|o| o.genome.len() != dim) {
        return Err(Error::shape(format!(
            "genome has {} genes, solver expects {dim}",
            o.genome.len()
        )));
    }
    let mut m = Matrix::zeros((organisms.len(), dim));
    for (mut row, o) in m.rows_mut().into_iter().zip(organisms) {
        row.as_slice_mut().unwrap().copy_from_slice(&o.genome);
    }
    let logits = forward(solver, &m)?;
    Ok(logits
        .rows()
        .into_iter()
        .map(|r| softmax(r.as_slice().unwrap())[target])
        .collect())
}

fn check_target(solver: &SolverNetwork, target: usize) -> Result<()> {
    if target >= solver.num_classes() {
        return Err(Error::invalid(format!(
            "target class {target} out of range for {} classes",
            solver.num_classes()
        )));
    }
    Ok(())
}

/// Recompute every organism's fitness under `solver`.
pub fn evaluate_fitness(solver: &SolverNetwork, pop: &mut Population) -> Result<()> {
    if pop.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty population"));
    }
    check_target(solver, pop.target_class)?;
    let mut all: Vec<&mut Organism> = pop.organisms.iter_mut().collect();
    let f = score(solver, &all, pop.target_class)?;
    for (o, v) in all.iter_mut().zip(f) {
        o.fitness = Some(v);
    }
    Ok(())
}

/// Score only organisms whose fitness is stale. Returns how many were scored.
fn refresh_stale(solver: &SolverNetwork, pop: &mut Population) -> Result<usize> {
    let target = pop.target_class;
    let mut stale: Vec<&mut Organism> = pop.organisms.iter_mut().filter(|o| o.fitness.is_none()).collect();
    if stale.is_empty() {
        return Ok(0);
    }
    let f = score(solver, &stale, target)?;
    for (o, v) in stale.iter_mut().zip(f) {
        o.fitness = Some(v);
    }
    Ok(stale.len())
}

/// Indices of the `count` largest values, descending; ties keep input order.
fn top_indices(fitness: &[f64], candidates: &[usize], count: usize) -> Vec<usize> {
    let mut order = candidates.to_vec();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    order.truncate(count);
    order
}

fn pick(pop: &Population, idx: &[usize]) -> Vec<Organism> {
    idx.iter().map(|&i| pop.organisms[i].clone()).collect()
}

/// Fittest quarter of the population, in descending fitness order.
pub fn select_linear(pop: &Population) -> Result<Vec<Organism>> {
    let f = pop.fitnesses()?;
    let all: Vec<usize> = (0..f.len()).collect();
    Ok(pick(pop, &top_indices(&f, &all, pop.len() / 4)))
}

/// A quarter of the population drawn without replacement with probability
/// proportional to fitness. When the remaining fitness mass is zero the
/// draw falls back to uniform.
pub fn select_roulette<R: Rng + ?Sized>(pop: &Population, rng: &mut R) -> Result<Vec<Organism>> {
    let f = pop.fitnesses()?;
    let mut remaining: Vec<usize> = (0..f.len()).collect();
    let mut chosen = Vec::with_capacity(pop.len() / 4);
    for _ in 0..pop.len() / 4 {
        let total: f64 = remaining.iter().map(|&i| f[i]).sum();
        let slot = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut slot = remaining.len() - 1;
            for (s, &i) in remaining.iter().enumerate() {
                if u < f[i] {
                    slot = s;
                    break;
                }
                u -= f[i];
            }
            // float residue can land past the last positive weight
            while f[remaining[slot]] <= 0.0 {
                slot -= 1;
            }
            slot
        } else {
            rng.random_range(0..remaining.len())
        };
        chosen.push(remaining.remove(slot));
    }
    Ok(pick(pop, &chosen))
}

/// Remove `floor(p * m)` random organisms, then take the fittest quarter of
/// the population from the survivors.
pub fn select_tournament<R: Rng + ?Sized>(pop: &Population, p: f64, rng: &mut R) -> Result<Vec<Organism>> {
    Ok(pick(pop, &tournament_indices(pop, p, rng)?.1))
}

/// Survivor set and elite indices.
fn tournament_indices<R: Rng + ?Sized>(pop: &Population, p: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = pop.fitnesses()?;
    let m = f.len();
    let survivors = survivors_after_extinction(m, p)?;
    let mut dead = vec![false; m];
    for i in index::sample(rng, m, m - survivors) {
        dead[i] = true;
    }
    let alive: Vec<usize> = (0..m).filter(|&i| !dead[i]).collect();
    let elite = top_indices(&f, &alive, m / 4);
    Ok((alive, elite))
}

/// Tournament survivors and elite, exposed for membership checks.
pub fn tournament_survivors<R: Rng + ?Sized>(
    pop: &Population,
    p: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<Organism>)> {
    let (alive, elite) = tournament_indices(pop, p, rng)?;
    Ok((alive, pick(pop, &elite)))
}

pub fn select<R: Rng + ?Sized>(pop: &Population, cfg: &GaConfig, rng: &mut R) -> Result<Vec<Organism>> {
    match cfg.selection {
        Selection::Linear => select_linear(pop),
        Selection::Roulette => select_roulette(pop, rng),
        Selection::Tournament => select_tournament(pop, cfg.extinction_fraction, rng),
    }
}

fn check_same_dim(a: &Organism, b: &Organism) -> Result<()> {
    if a.genome.len() != b.genome.len() {
        return Err(Error::shape(format!(
            "crossover parents have {} and {} genes",
            a.genome.len(),
            b.genome.len()
        )));
    }
    Ok(())
}

/// Uniform-mask crossover.
pub fn crossover<R: Rng + ?Sized>(a: &Organism, b: &Organism, rng: &mut R) -> Result<Organism> {
    crossover_with(CrossoverKind::Uniform, a, b, rng)
}

pub fn crossover_with<R: Rng + ?Sized>(
    kind: CrossoverKind,
    a: &Organism,
    b: &Organism,
    rng: &mut R,
) -> Result<Organism> {
    check_same_dim(a, b)?;
    let genome = match kind {
        CrossoverKind::Uniform => a
            .genome
            .iter()
            .zip(&b.genome)
            .map(|(&x, &y)| if rng.random::<bool>() { x } else { y })
            .collect(),
        CrossoverKind::SinglePoint => {
            let cut = rng.random_range(0..=a.genome.len());
            a.genome[..cut].iter().chain(&b.genome[cut..]).copied().collect()
        }
    };
    Ok(Organism::new(genome))
}

/// Each gene, with probability `rate`, gets uniform noise in
/// `[-magnitude, magnitude]`; the result is clamped to `[0, 1]`.
pub fn mutate<R: Rng + ?Sized>(o: &Organism, rate: f64, magnitude: f64, rng: &mut R) -> Organism {
    let genome = o
        .genome
        .iter()
        .map(|&g| {
            if rate > 0.0 && rng.random::<f64>() < rate {
                let noise = (2.0 * rng.random::<f64>() - 1.0) * magnitude;
                (g + noise).clamp(0.0, 1.0)
            } else {
                g
            }
        })
        .collect();
    Organism::new(genome)
}

/// `elite ++ C ++ M ++ M_C`: crossover of adjacent elite pairs, mutants of
/// each elite member, crossover of adjacent mutants (indices wrap).
pub fn next_generation<R: Rng + ?Sized>(elite: &[Organism], cfg: &GaConfig, rng: &mut R) -> Result<Vec<Organism>> {
    let q = elite.len();
    if q == 0 || q != cfg.elite_size() {
        return Err(Error::invalid(format!(
            "elite has {q} organisms, expected {}",
            cfg.elite_size()
        )));
    }
    let children = (0..q)
        .map(|j| crossover_with(cfg.crossover, &elite[j], &elite[(j + 1) % q], rng))
        .collect::<Result<Vec<_>>>()?;
    let mutants: Vec<Organism> = elite
        .iter()
        .map(|o| mutate(o, cfg.mutation_rate, cfg.mutation_magnitude, rng))
        .collect();
    let mutant_children = (0..q)
        .map(|j| crossover_with(cfg.crossover, &mutants[j], &mutants[(j + 1) % q], rng))
        .collect::<Result<Vec<_>>>()?;
    let mut next = Vec::with_capacity(4 * q);
    next.extend(elite.iter().cloned());
    next.extend(children);
    next.extend(mutants);
    next.extend(mutant_children);
    Ok(next)
}

/// Organisms whose genome lies within L-infinity distance `epsilon` of an
/// earlier organism.
pub fn duplicate_count(organisms: &[Organism], epsilon: f64) -> usize {
    (1..organisms.len())
        .filter(|&i| {
            organisms[..i].iter().any(|prev| {
                prev.genome
                    .iter()
                    .zip(&organisms[i].genome)
                    .all(|(a, b)| (a - b).abs() <= epsilon)
            })
        })
        .count()
}

/// Mean Euclidean distance over all unordered pairs; 0 for fewer than two.
pub fn mean_pairwise_distance(organisms: &[Organism]) -> f64 {
    let n = organisms.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d2: f64 = organisms[i]
                .genome
                .iter()
                .zip(&organisms[j].genome)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += d2.sqrt();
        }
    }
    total / (n * (n - 1) / 2) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub class: usize,
    pub culture: usize,
    pub min_fitness: f64,
    pub mean_fitness: f64,
    pub max_fitness: f64,
    pub duplicates: Option<usize>,
    pub mean_distance: Option<f64>,
}

impl MetricRow for GenerationStats {
    const HEADER: &'static [&'static str] = &[
        "generation",
        "class",
        "culture",
        "min_fitness",
        "mean_fitness",
        "max_fitness",
        "duplicates",
        "mean_distance",
    ];
}

fn stats(pop: &Population, generation: usize, culture: usize, cfg: &GaConfig) -> GenerationStats {
    let f: Vec<f64> = pop.organisms.iter().filter_map(|o| o.fitness).collect();
    GenerationStats {
        generation,
        class: pop.target_class,
        culture,
        min_fitness: f.iter().copied().fold(f64::INFINITY, f64::min),
        mean_fitness: f.iter().sum::<f64>() / f.len() as f64,
        max_fitness: f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        duplicates: cfg
            .track_diversity
            .then(|| duplicate_count(&pop.organisms, cfg.duplicate_epsilon)),
        mean_distance: cfg.track_diversity.then(|| mean_pairwise_distance(&pop.organisms)),
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub population: Population,
    pub converged: bool,
    /// Generations bred after the initial population.
    pub generations: usize,
    /// Fitness evaluation passes, including the initial one.
    pub evaluations: usize,
    pub history: Vec<GenerationStats>,
}

/// Evolve one population for `target_class` until every fitness exceeds the
/// threshold or `max_generations` is reached.
pub fn evolve_class<R: Rng + ?Sized>(
    solver: &SolverNetwork,
    target_class: usize,
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<Evolution> {
    evolve_culture(solver, target_class, 0, cfg, rng)
}

fn evolve_culture<R: Rng + ?Sized>(
    solver: &SolverNetwork,
    target_class: usize,
    culture: usize,
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<Evolution> {
    cfg.validate()?;
    check_target(solver, target_class)?;
    let mut pop = Population::random(cfg.population_size, solver.input_dim(), target_class, rng);
    evaluate_fitness(solver, &mut pop)?;
    let mut evaluations = 1;
    let mut generations = 0;
    let mut history = vec![stats(&pop, 0, culture, cfg)];
    let converged = loop {
        if pop.min_fitness().expect("population is nonempty") > cfg.fitness_threshold {
            break true;
        }
        if generations >= cfg.max_generations {
            break false;
        }
        let elite = select(&pop, cfg, rng)?;
        pop.organisms = next_generation(&elite, cfg, rng)?;
        refresh_stale(solver, &mut pop)?;
        evaluations += 1;
        generations += 1;
        history.push(stats(&pop, generations, culture, cfg));
    };
    Ok(Evolution {
        population: pop,
        converged,
        generations,
        evaluations,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CultureSummary {
    pub class: usize,
    pub culture: usize,
    pub converged: bool,
    pub generations: usize,
    pub min_fitness: f64,
}

#[derive(Debug, Clone)]
pub struct RawGeneration {
    pub dataset: Dataset,
    pub cultures: Vec<CultureSummary>,
    pub history: Vec<GenerationStats>,
}

impl RawGeneration {
    pub fn all_converged(&self) -> bool {
        self.cultures.iter().all(|c| c.converged)
    }
}

/// Evolve `cultures` independent populations for each class `0..num_classes`
/// and merge them, class-major then culture order. Culture `c` of class `k`
/// draws from the stream `(seed, GENETIC, k, c)`.
pub fn generate_raw(solver: &SolverNetwork, num_classes: usize, cfg: &GaConfig) -> Result<RawGeneration> {
    cfg.validate()?;
    if num_classes == 0 || num_classes > solver.num_classes() {
        return Err(Error::invalid(format!(
            "cannot generate {num_classes} classes with a {}-class solver",
            solver.num_classes()
        )));
    }
    let jobs: Vec<(usize, usize)> = (0..num_classes)
        .flat_map(|k| (0..cfg.cultures).map(move |c| (k, c)))
        .collect();
    let runs: Vec<Result<Evolution>> = jobs
        .par_iter()
        .map(|&(k, c)| {
            let mut rng = rng_from(cfg.seed, &[stage::GENETIC, k as u64, c as u64]);
            evolve_culture(solver, k, c, cfg, &mut rng).map_err(|e| Error::Class {
                class: k,
                source: Box::new(e),
            })
        })
        .collect();

    let dim = solver.input_dim();
    let total = jobs.len() * cfg.population_size;
    let mut features = Matrix::zeros((total, dim));
    let mut labels = Vec::with_capacity(total);
    let mut cultures = Vec::with_capacity(jobs.len());
    let mut history = Vec::new();
    let mut row = 0;
    for (run, &(k, c)) in runs.into_iter().zip(&jobs) {
        let evo = run?;
        for o in &evo.population.organisms {
            features.row_mut(row).as_slice_mut().unwrap().copy_from_slice(&o.genome);
            labels.push(k);
            row += 1;
        }
        cultures.push(CultureSummary {
            class: k,
            culture: c,
            converged: evo.converged,
            generations: evo.generations,
            min_fitness: evo.population.min_fitness().unwrap_or(0.0),
        });
        history.extend(evo.history);
    }
    Ok(RawGeneration {
        dataset: Dataset::new(features, labels, solver.num_classes())?,
        cultures,
        history,
    })
}
