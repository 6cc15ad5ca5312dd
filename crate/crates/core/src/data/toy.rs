//! 2-D toy datasets in the unit square.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::{Error, Result};

/// Isotropic Gaussian clusters, `n_per_class` samples around each center,
/// clipped to `[0, 1]`. Class `k` is drawn around `centers[k]`.
pub fn make_blobs<R: Rng + ?Sized>(
    n_per_class: usize,
    centers: &[Vec<f64>],
    std: f64,
    rng: &mut R,
) -> Result<Dataset> {
    let k = centers.len();
    if k == 0 {
        return Err(Error::invalid("make_blobs needs at least one center"));
    }
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::invalid(format!("blob std must be finite and >= 0, got {std}")));
    }
    let dim = centers[0].len();
    if dim == 0 || centers.iter().any(|c| c.len() != dim) {
        return Err(Error::shape("blob centers must share one nonzero dimension"));
    }
    let mut features = Array2::zeros((n_per_class * k, dim));
    let mut labels = Vec::with_capacity(n_per_class * k);
    for (class, center) in centers.iter().enumerate() {
        for i in 0..n_per_class {
            let mut row = features.row_mut(class * n_per_class + i);
            for (j, c) in center.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                row[j] = (c + std * z).clamp(0.0, 1.0);
            }
            labels.push(class);
        }
    }
    Dataset::new(features, labels, k)
}

/// Raw moons coordinates are mapped affinely from this box onto `[0, 1]^2`.
pub const MOONS_X_RANGE: (f64, f64) = (-1.5, 2.5);
pub const MOONS_Y_RANGE: (f64, f64) = (-1.0, 1.5);

/// Map a raw moons coordinate into the unit square (unclipped).
pub fn moons_box(x: f64, y: f64) -> (f64, f64) {
    (
        (x - MOONS_X_RANGE.0) / (MOONS_X_RANGE.1 - MOONS_X_RANGE.0),
        (y - MOONS_Y_RANGE.0) / (MOONS_Y_RANGE.1 - MOONS_Y_RANGE.0),
    )
}

fn linspace_pi(n: usize, i: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        std::f64::consts::PI * i as f64 / (n - 1) as f64
    }
}

/// Two interleaving half circles. Class 0 is the upper unit arc
/// `(cos t, sin t)`, class 1 the lower arc `(1 - cos t, 0.5 - sin t)`, with
/// `t` evenly spaced over `[0, pi]`. Gaussian noise of std `noise` is added
/// before the fixed affine rescale into the unit square.
pub fn make_moons<R: Rng + ?Sized>(n: usize, noise: f64, rng: &mut R) -> Result<Dataset> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!("moons noise must be finite and >= 0, got {noise}")));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (class, count) in [(0usize, n_outer), (1, n_inner)] {
        for i in 0..count {
            let t = linspace_pi(count, i);
            let (x, y) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            let (u, v) = moons_box(x + noise * nx, y + noise * ny);
            features[[row, 0]] = u.clamp(0.0, 1.0);
            features[[row, 1]] = v.clamp(0.0, 1.0);
            labels.push(class);
            row += 1;
        }
    }
    Dataset::new(features, labels, 2)
}
