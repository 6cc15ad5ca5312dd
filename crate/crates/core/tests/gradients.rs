use ndarray::{Array1, Array2};
use proptest::prelude::*;
use pseudo_rehearsal::nn::{loss_and_gradients, LossKind};
use pseudo_rehearsal::{Matrix, SolverNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(rng: &mut ChaCha8Rng, shape: (usize, usize), scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || scale * (2.0 * rng.random::<f64>() - 1.0))
}

struct Case {
    net: SolverNetwork,
    x: Matrix,
    y: Vec<usize>,
}

fn build(seed: u64, d: usize, h: usize, k: usize, n: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = SolverNetwork::from_parts(
        uniform(&mut rng, (d, h), 1.0),
        Array1::from_iter(uniform(&mut rng, (1, h), 0.5)),
        uniform(&mut rng, (h, k), 1.0),
        Array1::from_iter(uniform(&mut rng, (1, k), 0.5)),
    )
    .unwrap();
    let x = Array2::from_shape_simple_fn((n, d), || rng.random::<f64>());
    let y = (0..n).map(|_| rng.random_range(0..k)).collect();
    Case { net, x, y }
}

/// Smallest |pre-activation| of the hidden layer; finite differences are
/// unreliable within a step of the ReLU kink.
fn min_margin(c: &Case) -> f64 {
    let z = c.x.dot(c.net.w1()) + c.net.b1();
    z.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
}

fn max_rel_error(c: &Case, kind: LossKind) -> f64 {
    let (_, grads) = loss_and_gradients(&c.net, &c.x, &c.y, kind).unwrap();
    let analytic: Vec<Vec<f64>> = grads.as_slices().iter().map(|s| s.to_vec()).collect();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for block in 0..4 {
        for i in 0..analytic[block].len() {
            let mut plus = c.net.clone();
            plus.params_mut()[block][i] += h;
            let mut minus = c.net.clone();
            minus.params_mut()[block][i] -= h;
            let lp = loss_and_gradients(&plus, &c.x, &c.y, kind).unwrap().0;
            let lm = loss_and_gradients(&minus, &c.x, &c.y, kind).unwrap().0;
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic[block][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn categorical_gradients_match_finite_differences(
        seed in any::<u64>(), d in 1usize..6, h in 1usize..7, k in 2usize..5, n in 1usize..5,
    ) {
        let c = build(seed, d, h, k, n);
        prop_assume!(min_margin(&c) > 1e-3);
        let err = max_rel_error(&c, LossKind::CategoricalCrossEntropy);
        prop_assert!(err < 1e-4, "max relative error {err:e}");
    }

    #[test]
    fn binary_gradients_match_finite_differences(
        seed in any::<u64>(), d in 1usize..6, h in 1usize..7, k in 2usize..5, n in 1usize..5,
    ) {
        let c = build(seed, d, h, k, n);
        prop_assume!(min_margin(&c) > 1e-3);
        let err = max_rel_error(&c, LossKind::BinaryCrossEntropy);
        prop_assert!(err < 1e-4, "max relative error {err:e}");
    }
}
