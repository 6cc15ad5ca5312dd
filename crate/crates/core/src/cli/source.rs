//! Dataset sources named in the config: IDX pairs, dataset files, toy generators.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, load_idx, make_blobs, make_moons};
use crate::rng::{rng_from, stage};
use crate::{Dataset, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Idx,
    Dset,
    Blobs,
    Moons,
}

/// One dataset. Which keys are required depends on `kind`:
/// `idx` needs `images` and `labels`, `dset` needs `path`, `blobs` needs
/// `n_per_class`, `centers` and `std`, `moons` needs `n` and `noise`.
/// Toy generators draw from the master seed and `stream`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub kind: DataKind,
    pub path: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub n_per_class: Option<usize>,
    pub centers: Option<Vec<Vec<f64>>>,
    pub std: Option<f64>,
    pub n: Option<usize>,
    pub noise: Option<f64>,
    #[serde(default)]
    pub stream: u64,
    /// Keep only these classes, relabelled to their position in the list.
    pub classes: Option<Vec<usize>>,
    /// Cap on samples kept per class (first occurrences).
    pub per_class: Option<usize>,
    #[serde(default)]
    pub label_offset: usize,
    /// Width of the label space after the offset.
    pub num_classes: Option<usize>,
}

fn need<T: Clone>(v: &Option<T>, role: &str, key: &str, kind: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::Config(format!("data.{role}: key '{key}' is required for kind '{kind}'")))
}

impl DataSpec {
    pub fn load(&self, role: &str, seed: u64) -> Result<Dataset> {
        let mut rng = rng_from(seed, &[stage::DATA, self.stream]);
        let base = match self.kind {
            DataKind::Idx => load_idx(
                need(&self.images, role, "images", "idx")?,
                need(&self.labels, role, "labels", "idx")?,
            )?,
            DataKind::Dset => load_dataset(need(&self.path, role, "path", "dset")?)?,
            DataKind::Blobs => make_blobs(
                need(&self.n_per_class, role, "n_per_class", "blobs")?,
                &need(&self.centers, role, "centers", "blobs")?,
                need(&self.std, role, "std", "blobs")?,
                &mut rng,
            )?,
            DataKind::Moons => make_moons(
                need(&self.n, role, "n", "moons")?,
                need(&self.noise, role, "noise", "moons")?,
                &mut rng,
            )?,
        };
        let subset = match (&self.classes, self.per_class) {
            (Some(c), cap) => base.subset_classes(c, cap)?,
            (None, Some(cap)) => {
                let all: Vec<usize> = (0..base.num_classes()).collect();
                base.subset_classes(&all, Some(cap))?
            }
            (None, None) => base,
        };
        if self.label_offset == 0 && self.num_classes.is_none() {
            return Ok(subset);
        }
        let width = self
            .num_classes
            .unwrap_or(subset.num_classes() + self.label_offset);
        subset
            .with_label_offset(self.label_offset, width)
            .map_err(|e| Error::Config(format!("data.{role}: {e}")))
    }
}
