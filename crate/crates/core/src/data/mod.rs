//! Datasets: IDX ingestion, toy generators, binary persistence and CSV output.

mod csv_out;
mod idx;
mod store;
mod toy;

pub use csv_out::{read_csv_rows, write_metrics_csv, MetricRow};
pub use idx::{load_idx, load_idx_images, load_idx_labels, parse_idx_images, parse_idx_labels, IdxImages};
pub use store::{decode_dataset, encode_dataset, load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use toy::{make_blobs, make_moons, moons_box, MOONS_X_RANGE, MOONS_Y_RANGE};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Matrix, Result};

/// Feature matrix with values in `[0, 1]` plus integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(Error::invalid("num_classes must be >= 1"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if let Some(v) = features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!(
                "feature value {v} outside [0, 1]"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn empty(dim: usize, num_classes: usize) -> Self {
        Dataset {
            features: Array2::zeros((0, dim)),
            labels: Vec::new(),
            num_classes: num_classes.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn into_parts(self) -> (Matrix, Vec<usize>, usize) {
        (self.features, self.labels, self.num_classes)
    }

    /// Per-class sample counts, indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Sorted list of class ids that have at least one sample.
    pub fn present_classes(&self) -> Vec<usize> {
        self.class_counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn class_rows(&self, class: usize) -> Matrix {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == class).collect();
        self.features.select(Axis(0), &idx)
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Rows of `self` followed by rows of `other`. The label space becomes the
    /// larger of the two.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.is_empty() {
            return Ok(Dataset {
                num_classes: self.num_classes.max(other.num_classes),
                ..other.clone()
            });
        }
        if other.is_empty() {
            return Ok(Dataset {
                num_classes: self.num_classes.max(other.num_classes),
                ..self.clone()
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::shape(format!(
                "cannot concatenate datasets of dims {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), other.features.view()])
            .map_err(|e| Error::shape(e.to_string()))?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Dataset {
            features,
            labels,
            num_classes: self.num_classes.max(other.num_classes),
        })
    }

    pub fn shuffled<R: Rng + ?Sized>(&self, rng: &mut R) -> Dataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        self.select(&idx)
    }

    /// Keep only the listed classes, relabelled `classes[i] -> i`.
    pub fn subset_classes(&self, classes: &[usize], per_class: Option<usize>) -> Result<Dataset> {
        if classes.is_empty() {
            return Err(Error::invalid("class subset is empty"));
        }
        let mut taken = vec![0usize; classes.len()];
        let mut idx = Vec::new();
        let mut labels = Vec::new();
        for (i, &l) in self.labels.iter().enumerate() {
            if let Some(pos) = classes.iter().position(|&c| c == l) {
                if per_class.is_some_and(|cap| taken[pos] >= cap) {
                    continue;
                }
                taken[pos] += 1;
                idx.push(i);
                labels.push(pos);
            }
        }
        Ok(Dataset {
            features: self.features.select(Axis(0), &idx),
            labels,
            num_classes: classes.len(),
        })
    }

    /// Shift every label by `offset` inside a head of `num_classes` outputs.
    pub fn with_label_offset(&self, offset: usize, num_classes: usize) -> Result<Dataset> {
        let labels: Vec<usize> = self.labels.iter().map(|&l| l + offset).collect();
        Dataset::new(self.features.clone(), labels, num_classes)
    }

    pub fn with_num_classes(self, num_classes: usize) -> Result<Dataset> {
        Dataset::new(self.features, self.labels, num_classes)
    }
}
