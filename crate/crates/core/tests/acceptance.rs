//! Acceptance criteria, one PASS/FAIL/SKIP line each.
//!
//! Criteria 5 and 6 need the Fashion and digits IDX files under `data/`
//! (see `scripts/prepare_data.py`); they are skipped when the files are absent.
//! Set `ACCEPTANCE_ONLY=3,4` to run a subset. Failures are reported but only
//! fail the process when `ACCEPTANCE_STRICT` is set.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use ndarray::{array, Array1, Array2};
use pseudo_rehearsal::cli::run;
use pseudo_rehearsal::data::{load_idx, load_idx_images, make_blobs, make_moons, parse_idx_images, parse_idx_labels};
use pseudo_rehearsal::enrichment::{build_synthetic, fit_gaussian, sample_gaussian, EnrichConfig, GaussianModel};
use pseudo_rehearsal::genetic::{
    evaluate_fitness, evolve_class, next_generation, select_linear, select_tournament, GaConfig, Population, Selection,
};
use pseudo_rehearsal::metrics::{accuracy, agreement_experiment, agreement_score, boundary_dataset};
use pseudo_rehearsal::nn::{loss_and_gradients, predict, train, LossKind, TrainConfig, Trainer};
use pseudo_rehearsal::rehearsal::{random_vector_dataset, run_scheme, RehearsalConfig, Scheme, TaskSpec};
use pseudo_rehearsal::rng::{rng_from, stage};
use pseudo_rehearsal::{Dataset, Matrix, SolverNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::*;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("ACCEPTANCE_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn test_acc(net: &SolverNetwork, ds: &Dataset) -> f64 {
    accuracy(&predict(net, ds.features()).unwrap(), ds.labels()).unwrap()
}

/// Test accuracy after each of `epochs` epochs.
fn curve(net: SolverNetwork, train_set: &Dataset, test: &Dataset, cfg: &TrainConfig) -> Vec<f64> {
    let mut t = Trainer::new(net, cfg).unwrap();
    (0..cfg.epochs)
        .map(|_| {
            t.run_epoch(train_set).unwrap();
            test_acc(t.net(), test)
        })
        .collect()
}

fn first_reaching(c: &[f64], target: f64) -> Option<usize> {
    c.iter().position(|&a| a >= target).map(|i| i + 1)
}

// 1 ------------------------------------------------------------------------

fn criterion_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut nets = 0;
    while nets < 40 {
        let (d, h, k, n) = (rng.random_range(1..6), rng.random_range(1..7), rng.random_range(2..5), rng.random_range(1..5));
        let mut u = |s: (usize, usize)| Array2::from_shape_simple_fn(s, || 2.0 * rng.random::<f64>() - 1.0);
        let net = SolverNetwork::from_parts(
            u((d, h)),
            Array1::from_iter(u((1, h)) * 0.5),
            u((h, k)),
            Array1::from_iter(u((1, k)) * 0.5),
        )
        .unwrap();
        let x = Array2::from_shape_simple_fn((n, d), || rng.random::<f64>());
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let z = x.dot(net.w1()) + net.b1();
        if z.iter().any(|v| v.abs() < 1e-3) {
            continue;
        }
        nets += 1;
        for kind in [LossKind::CategoricalCrossEntropy, LossKind::BinaryCrossEntropy] {
            let (_, g) = loss_and_gradients(&net, &x, &y, kind).unwrap();
            let analytic: Vec<Vec<f64>> = g.as_slices().iter().map(|s| s.to_vec()).collect();
            for (b, block) in analytic.iter().enumerate() {
                for (i, &a) in block.iter().enumerate() {
                    let h = 1e-6;
                    let mut p = net.clone();
                    p.params_mut()[b][i] += h;
                    let mut m = net.clone();
                    m.params_mut()[b][i] -= h;
                    let lp = loss_and_gradients(&p, &x, &y, kind).unwrap().0;
                    let lm = loss_and_gradients(&m, &x, &y, kind).unwrap().0;
                    let num = (lp - lm) / (2.0 * h);
                    worst = worst.max((a - num).abs() / a.abs().max(num.abs()).max(1e-6));
                }
            }
        }
    }
    check(worst < 1e-4, format!("{nets} nets x 2 losses, max relative error {worst:.2e} (< 1e-4)"))
}

// 2 ------------------------------------------------------------------------

fn criterion_ga_contracts() -> Outcome {
    let solver = blobs_solver().0;
    let mut failures = Vec::new();
    for seed in 0..30u64 {
        let m = 4 * (1 + seed as usize % 10);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for selection in [Selection::Linear, Selection::Tournament] {
            let cfg = GaConfig {
                population_size: m,
                fitness_threshold: 0.95,
                selection,
                extinction_fraction: 0.0,
                mutation_rate: 0.3,
                max_generations: 60,
                seed,
                ..GaConfig::default()
            };
            let target = seed as usize % 3;
            let evo = evolve_class(&solver, target, &cfg, &mut rng).unwrap();
            if evo.population.len() != m {
                failures.push(format!("seed {seed}: size {}", evo.population.len()));
            }
            if evo.history.windows(2).any(|w| w[1].max_fitness < w[0].max_fitness) {
                failures.push(format!("seed {seed}: max fitness dropped"));
            }
            if evo.population.organisms.iter().any(|o| o.genome.iter().any(|g| !(0.0..=1.0).contains(g))) {
                failures.push(format!("seed {seed}: genome left [0,1]"));
            }
            if evo.converged && evo.population.min_fitness().unwrap() <= cfg.fitness_threshold {
                failures.push(format!("seed {seed}: converged below threshold"));
            }
            if !evo.converged {
                failures.push(format!("seed {seed}: did not converge"));
            }
            let elite = select_linear(&evo.population).unwrap();
            let next = next_generation(&elite, &cfg, &mut rng).unwrap();
            if next.len() != m || next.iter().any(|o| o.genome.iter().any(|g| !(0.0..=1.0).contains(g))) {
                failures.push(format!("seed {seed}: next generation broke size or domain"));
            }
        }
        let mut pop = Population::random(m, 2, 0, &mut rng);
        evaluate_fitness(&solver, &mut pop).unwrap();
        if select_tournament(&pop, 0.0, &mut rng).unwrap() != select_linear(&pop).unwrap() {
            failures.push(format!("seed {seed}: tournament(p=0) differs from linear"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "size, elitism, domain, threshold and tournament(p=0) hold over 60 evolutions".into()
        } else {
            failures.join("; ")
        },
    )
}

// 3, 4, 7 ---------------------------------------------------------------------

const BLOB_CENTERS: [[f64; 2]; 3] = [[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]];

fn blobs(n: usize, seed: u64) -> Dataset {
    let c: Vec<Vec<f64>> = BLOB_CENTERS.iter().map(|c| c.to_vec()).collect();
    make_blobs(n, &c, 0.06, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn toy_train_cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rate: 5e-3,
        seed,
        ..TrainConfig::default()
    }
}

/// 3-class blobs solver, its training set and a real test set.
fn blobs_solver() -> (SolverNetwork, Dataset, Dataset) {
    let train_set = blobs(300, 1);
    let test = blobs(300, 2);
    let net = SolverNetwork::new(2, 32, 3, 1).unwrap();
    let net = train(net, &train_set, &toy_train_cfg(60, 1)).unwrap().0;
    (net, train_set, test)
}

fn toy_ga(seed: u64) -> GaConfig {
    GaConfig {
        population_size: 40,
        fitness_threshold: 0.95,
        cultures: 4,
        mutation_rate: 0.5,
        seed,
        ..GaConfig::default()
    }
}

fn blobs_synthetic(solver: &SolverNetwork) -> Dataset {
    let en = EnrichConfig {
        n_per_class: 500,
        n_global: 3000,
        ..EnrichConfig::default()
    };
    build_synthetic(solver, 3, &toy_ga(3), &en, &mut rng_from(3, &[stage::ENRICH]))
        .unwrap()
        .dataset
}

fn criterion_blobs_pipeline() -> Outcome {
    let (solver, _, test) = blobs_solver();
    let solver_acc = test_acc(&solver, &test);
    let synth = blobs_synthetic(&solver);
    let c = curve(SolverNetwork::new(2, 32, 3, 9).unwrap(), &synth, &test, &toy_train_cfg(100, 9));
    let reached = first_reaching(&c, 95.0);
    check(
        solver_acc >= 99.0 && reached.is_some(),
        format!(
            "solver test acc {solver_acc:.2}% (>= 99), {} synthetic samples, fresh net reaches >= 95% at epoch {:?} (<= 100), best {:.2}%",
            synth.len(),
            reached,
            c.iter().copied().fold(0.0, f64::max)
        ),
    )
}

fn boundary_case(name: &str, train_set: &Dataset, test: &Dataset, k: usize) -> (bool, String) {
    let solver = train(SolverNetwork::new(2, 32, k, 4).unwrap(), train_set, &toy_train_cfg(300, 4)).unwrap().0;
    let solver_acc = test_acc(&solver, test);
    let en = EnrichConfig {
        n_per_class: 1000,
        n_global: 100_000 - 1000 * k,
        min_confidence: 0.0,
        ..EnrichConfig::default()
    };
    let cloud = build_synthetic(&solver, k, &toy_ga(5), &en, &mut rng_from(5, &[stage::ENRICH]))
        .unwrap()
        .dataset;
    let points = boundary_dataset(&solver, cloud.features(), 0.05).unwrap();
    let cfg = TrainConfig {
        batch_size: 8,
        ..toy_train_cfg(10, 6)
    };
    let c = curve(SolverNetwork::new(2, 256, k, 6).unwrap(), &points, test, &cfg);
    let reached = first_reaching(&c, 99.0);
    (
        reached.is_some(),
        format!(
            "{name}: solver {solver_acc:.2}%, cloud {}, {} boundary points, >= 99% at epoch {:?} (<= 10), best {:.2}%",
            cloud.len(),
            points.len(),
            reached,
            c.iter().copied().fold(0.0, f64::max)
        ),
    )
}

fn criterion_boundary() -> Outcome {
    let (b_ok, b) = boundary_case("blobs", &blobs(300, 1), &blobs(300, 2), 3);
    let moons_train = make_moons(1000, 0.05, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let moons_test = make_moons(1000, 0.05, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let (m_ok, m) = boundary_case("moons", &moons_train, &moons_test, 2);
    check(b_ok && m_ok, format!("{b}; {m}"))
}

fn criterion_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let n = rng.random_range(1..100);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let same = (0..n).filter(|&i| a[i] == b[i]).count();
        if agreement_score(&a, &b).unwrap() != 100.0 * same as f64 / n as f64 {
            return Fail("agreement score differs from counting oracle".into());
        }
    }
    let (solver, train_set, test) = blobs_solver();
    let synth = blobs_synthetic(&solver);
    let r = agreement_experiment(&train_set, &synth, None, &test, 32, &toy_train_cfg(60, 8)).unwrap();
    check(
        r.alpha_a >= 90.0,
        format!(
            "1000 oracle pairs exact; blobs alpha(genetic) = {:.2} (>= 90), original acc {:.2}%, synthetic acc {:.2}%",
            r.alpha_a, r.original_test_accuracy, r.synth_a_test_accuracy
        ),
    )
}

// 5, 6 ------------------------------------------------------------------------

struct Fashion {
    solver: SolverNetwork,
    old_train: Dataset,
    old_test: Dataset,
    new_task: TaskSpec,
    synthetic: Dataset,
}

const FASHION_CLASSES: [usize; 4] = [0, 1, 7, 8];
const DIGIT_CLASSES: [usize; 4] = [0, 1, 2, 3];
const HEAD: usize = 8;
const HIDDEN: usize = 128;
const SEED: u64 = 1;

fn idx_pair(dir: &Path, split: &str) -> Option<Dataset> {
    let images = dir.join(format!("{split}-images-idx3-ubyte"));
    let labels = dir.join(format!("{split}-labels-idx1-ubyte"));
    if !images.exists() || !labels.exists() {
        return None;
    }
    Some(load_idx(images, labels).unwrap())
}

fn fashion_setup() -> Option<Fashion> {
    let root = data_dir();
    let f_tr = idx_pair(&root.join("fashion"), "train")?;
    let f_te = idx_pair(&root.join("fashion"), "test")?;
    let d_tr = idx_pair(&root.join("digits"), "train")?;
    let d_te = idx_pair(&root.join("digits"), "test")?;
    let old_train = f_tr.subset_classes(&FASHION_CLASSES, Some(2000)).unwrap().with_num_classes(HEAD).unwrap();
    let old_test = f_te.subset_classes(&FASHION_CLASSES, None).unwrap().with_num_classes(HEAD).unwrap();
    let new_task = TaskSpec::new(
        "digits",
        &d_tr.subset_classes(&DIGIT_CLASSES, None).unwrap(),
        &d_te.subset_classes(&DIGIT_CLASSES, None).unwrap(),
        FASHION_CLASSES.len(),
        HEAD,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        seed: SEED,
        ..TrainConfig::default()
    };
    let solver = train(SolverNetwork::new(784, HIDDEN, HEAD, SEED).unwrap(), &old_train, &cfg).unwrap().0;
    let ga = GaConfig {
        fitness_threshold: 0.999_999,
        cultures: 4,
        seed: SEED,
        ..GaConfig::default()
    };
    let en = EnrichConfig {
        n_per_class: 1500,
        n_global: 30_000,
        ..EnrichConfig::default()
    };
    let synthetic = build_synthetic(&solver, FASHION_CLASSES.len(), &ga, &en, &mut rng_from(SEED, &[stage::ENRICH]))
        .unwrap()
        .dataset;
    Some(Fashion {
        solver,
        old_train,
        old_test,
        new_task,
        synthetic,
    })
}

fn criterion_retention(f: &Fashion) -> Outcome {
    let cfg = RehearsalConfig {
        run_id: "acceptance".into(),
        train: TrainConfig {
            epochs: 30,
            seed: SEED,
            ..TrainConfig::default()
        },
        sweep_fraction: 0.5,
    };
    let per_class = f.synthetic.len() / FASHION_CLASSES.len();
    let random = random_vector_dataset(784, per_class, FASHION_CLASSES.len(), &mut rng_from(SEED, &[stage::RANDOM_VECTORS]))
        .unwrap()
        .with_num_classes(HEAD)
        .unwrap();
    let final_old = |scheme: Scheme, old: &Dataset| {
        let (_, recs) = run_scheme(scheme, f.solver.clone(), old, &random, &f.new_task, &f.old_test, &cfg).unwrap();
        let last = recs.last().unwrap();
        (last.old_acc, last.new_acc)
    };
    let (real, real_new) = final_old(Scheme::Interleaved, &f.old_train);
    let (genetic, gen_new) = final_old(Scheme::Interleaved, &f.synthetic);
    let (rand_acc, _) = final_old(Scheme::Random, &random);
    let (none, none_new) = final_old(Scheme::None, &f.old_train);
    let ok = real > genetic && genetic > rand_acc && genetic > none && (rand_acc - none).abs() <= 15.0 && genetic >= 60.0 && none <= 25.0;
    check(
        ok,
        format!(
            "old-task acc at epoch 30: real {real:.2} > genetic {genetic:.2} > random {rand_acc:.2} ~ none {none:.2} \
             (|random-none| <= 15, genetic >= 60, none <= 25); new-task acc real {real_new:.2}, genetic {gen_new:.2}, none {none_new:.2}; \
             {} synthetic, {} random",
            f.synthetic.len(),
            random.len()
        ),
    )
}

fn criterion_train_on_synth(f: &Fashion) -> Outcome {
    let mut peaks = Vec::new();
    for i in 0..3u64 {
        let cfg = TrainConfig {
            epochs: 15,
            seed: 100 + i,
            ..TrainConfig::default()
        };
        let c = curve(SolverNetwork::new(784, HIDDEN, HEAD, 100 + i).unwrap(), &f.synthetic, &f.old_test, &cfg);
        peaks.push(c.iter().copied().fold(0.0, f64::max));
    }
    let min = peaks.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        min >= 65.0,
        format!("peak real-test acc of 3 nets over 15 epochs: {peaks:.2?} (each >= 65)"),
    )
}

// 8 ------------------------------------------------------------------------

fn criterion_gaussian() -> Outcome {
    let mean = array![0.5, 0.45, 0.55];
    let cov = array![[0.004, 0.0012, -0.0005], [0.0012, 0.003, 0.0004], [-0.0005, 0.0004, 0.0025]];
    let model = GaussianModel::new(mean.clone(), cov.clone(), 0.0).unwrap();
    let x = sample_gaussian(&model, 100_000, &mut ChaCha8Rng::seed_from_u64(8));
    let fit = fit_gaussian(&x).unwrap();
    let mu_err = (fit.mean() - &mean).iter().map(|v| v.abs()).fold(0.0, f64::max);
    let fro = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sigma_err = fro(&(fit.covariance() - &cov)) / fro(&cov);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut density_err = 0.0f64;
    for trial in 0..100 {
        let d = 1 + trial % 5;
        let a = Array2::from_shape_simple_fn((d, d), || rng.random::<f64>() - 0.5);
        let c = a.dot(&a.t()) * 0.1 + Array2::<f64>::eye(d) * 0.01;
        let mu = Array1::from_shape_simple_fn(d, || rng.random::<f64>());
        let g = GaussianModel::new(mu.clone(), c.clone(), 0.0).unwrap();
        let (inv, det) = inverse_and_det(&c);
        let p = Array1::from_shape_simple_fn(d, || rng.random::<f64>());
        let diff = &p - &mu;
        let direct = (-0.5 * diff.dot(&inv.dot(&diff))).exp() / ((2.0 * std::f64::consts::PI).powi(d as i32) * det).sqrt();
        let got = g.density(p.as_slice().unwrap()).unwrap();
        density_err = density_err.max((got - direct).abs() / direct.abs().max(1.0));
    }
    check(
        mu_err < 1e-2 && sigma_err < 5e-2 && density_err <= 1e-9,
        format!(
            "1e5 draws: mean abs err {mu_err:.2e} (< 1e-2), cov rel Frobenius err {sigma_err:.2e} (< 5e-2); density vs explicit inverse/det max err {density_err:.2e} (<= 1e-9, d <= 5)"
        ),
    )
}

/// Gauss-Jordan inverse and determinant with partial pivoting.
fn inverse_and_det(a: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs())).unwrap();
        if piv != col {
            det = -det;
            for c in 0..n {
                m.swap([col, c], [piv, c]);
                inv.swap([col, c], [piv, c]);
            }
        }
        let p = m[[col, col]];
        det *= p;
        for c in 0..n {
            m[[col, c]] /= p;
            inv[[col, c]] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[[r, col]];
                for c in 0..n {
                    m[[r, c]] -= f * m[[col, c]];
                    inv[[r, c]] -= f * inv[[col, c]];
                }
            }
        }
    }
    (inv, det)
}

// 9 ------------------------------------------------------------------------

fn criterion_idx() -> Outcome {
    let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 2];
    bytes.extend_from_slice(&[0, 255, 51, 204]);
    let img = parse_idx_images(&bytes).unwrap();
    let exact = img.to_matrix() == array![[0.0, 1.0], [0.2, 0.8]];
    let labels_ok = parse_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 2, 3, 9]).unwrap() == vec![3, 9];
    let mut rejected = 0;
    for pos in 0..16 {
        let mut bad = bytes.clone();
        bad[pos] ^= 0xFF;
        if parse_idx_images(&bad).is_err() {
            rejected += 1;
        }
    }
    let real = data_dir().join("fashion/train-images-idx3-ubyte");
    let real_note = if real.exists() {
        let r = load_idx_images(&real).unwrap();
        let m: Matrix = r.to_matrix();
        if m.dim() != (60000, 784) {
            return Fail(format!("real file parsed as {:?}", m.dim()));
        }
        "real 60000-image file parses as 60000x784".to_string()
    } else {
        "no real IDX file present".to_string()
    };
    check(
        exact && labels_ok && rejected == 16,
        format!("fixtures exact: {exact}, labels: {labels_ok}, header corruptions rejected {rejected}/16; {real_note}"),
    )
}

// 10 -----------------------------------------------------------------------

const DETERMINISM_CONFIG: &str = r#"
seed = 21
[model]
hidden_dim = 16
num_classes = 6
[train]
epochs = 6
[data.train]
kind = "blobs"
n_per_class = 80
centers = [[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]]
std = 0.05
[data.test]
kind = "blobs"
stream = 1
n_per_class = 50
centers = [[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]]
std = 0.05
[data.old_test]
kind = "blobs"
stream = 1
n_per_class = 50
centers = [[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]]
std = 0.05
[data.new_train]
kind = "blobs"
stream = 2
n_per_class = 80
centers = [[0.2, 0.8], [0.8, 0.8], [0.5, 0.45]]
std = 0.05
[data.new_test]
kind = "blobs"
stream = 3
n_per_class = 50
centers = [[0.2, 0.8], [0.8, 0.8], [0.5, 0.45]]
std = 0.05
[generate]
num_classes = 3
[genetic]
population_size = 20
fitness_threshold = 0.7
cultures = 2
track_diversity = true
[enrichment]
n_per_class = 50
n_global = 300
[rehearse]
new_label_offset = 3
"#;

fn run_pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let cfg = dir.join("c.toml");
    std::fs::write(&cfg, DETERMINISM_CONFIG).unwrap();
    let cfg = cfg.to_str().unwrap().to_string();
    let out = format!("out_dir={:?}", dir.join("runs").to_str().unwrap());
    let go = |cmd: &str, id: &str, extra: &[String]| {
        let mut args: Vec<String> = ["x", cmd, "-c", &cfg, "--set", &out, "--set", &format!("run_id={id}")]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for e in extra {
            args.push("--set".into());
            args.push(e.clone());
        }
        run(args).unwrap()
    };
    let solver = go("train", "solver", &[]);
    let solver_key = format!("solver={:?}", solver.join("artifacts/solver.nrlb").to_str().unwrap());
    let synth = go("generate", "gen", std::slice::from_ref(&solver_key));
    let synth_path = format!("{:?}", synth.join("artifacts/synthetic.dset").to_str().unwrap());
    for scheme in ["interleaved", "serial", "sweep", "random", "none"] {
        go(
            "rehearse",
            scheme,
            &[
                solver_key.clone(),
                "data.old.kind=dset".into(),
                format!("data.old.path={synth_path}"),
                format!("rehearse.scheme={scheme}"),
            ],
        );
    }
    go("train-on-synth", "tos", &["data.synthetic.kind=dset".into(), format!("data.synthetic.path={synth_path}")]);
    go("agreement", "agr", &["data.synthetic.kind=dset".into(), format!("data.synthetic.path={synth_path}")]);
    go("boundary", "bnd", &[solver_key.clone(), "data.samples.kind=dset".into(), format!("data.samples.path={synth_path}")]);
    let mut csvs = Vec::new();
    collect_csvs(&dir.join("runs"), &dir.join("runs"), &mut csvs);
    csvs.sort();
    csvs
}

fn collect_csvs(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            collect_csvs(root, &p, out);
        } else if p.extension().is_some_and(|e| e == "csv") {
            let rel = p.strip_prefix(root).unwrap().display().to_string();
            out.push((rel, std::fs::read(&p).unwrap()));
        }
    }
}

fn criterion_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_pipeline(a.path());
    let rb = run_pipeline(b.path());
    let differing: Vec<&str> = ra
        .iter()
        .zip(&rb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    check(
        ra.len() == rb.len() && ra.len() >= 9 && differing.is_empty(),
        format!("{} CSVs from train/generate/rehearse x5/train-on-synth/agreement/boundary; differing: {:?}", ra.len(), differing),
    )
}

// ---------------------------------------------------------------------------

static FASHION: OnceLock<Option<Fashion>> = OnceLock::new();

fn with_fashion(g: fn(&Fashion) -> Outcome) -> Outcome {
    match FASHION.get_or_init(fashion_setup) {
        Some(f) => g(f),
        None => Skip(format!("Fashion/digits IDX files not found under {}", data_dir().display())),
    }
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut failed = 0;
    let mut report = |n: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {n:>2} {name} ({secs:.1}s): {detail}");
    };
    report(1, "gradient correctness", &mut criterion_gradients);
    report(2, "GA contract suite", &mut criterion_ga_contracts);
    report(3, "blobs pipeline", &mut criterion_blobs_pipeline);
    report(4, "boundary-point learning", &mut criterion_boundary);
    report(5, "retention ordering (Fashion -> digits)", &mut || with_fashion(criterion_retention));
    report(6, "train on synthetic (Fashion)", &mut || with_fashion(criterion_train_on_synth));
    report(7, "agreement score", &mut criterion_agreement);
    report(8, "Gaussian round trip", &mut criterion_gaussian);
    report(9, "IDX parser", &mut criterion_idx);
    report(10, "CLI determinism", &mut criterion_determinism);
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
