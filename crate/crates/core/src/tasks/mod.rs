//! Class-incremental task streams: synthetic generators and a CSV loader.

mod csv;
mod synthetic;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub use self::csv::{export_csv, load_csv_stream, CsvSchema};
pub use synthetic::{gen_gaussian_clusters, gen_rotated_features, plane_rotation, GaussianParams};

/// One labelled example.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Feature rows with one global class id per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub x: Matrix,
    pub y: Vec<usize>,
}

impl Split {
    pub fn empty(dim: usize) -> Self {
        Split {
            x: Matrix::zeros(0, dim),
            y: Vec::new(),
        }
    }

    pub fn from_samples(dim: usize, samples: &[Sample]) -> Result<Self> {
        let mut data = Vec::with_capacity(samples.len() * dim);
        for s in samples {
            if s.features.len() != dim {
                return Err(Error::Shape {
                    op: "sample features",
                    lhs: (1, s.features.len()),
                    rhs: (1, dim),
                });
            }
            data.extend_from_slice(&s.features);
        }
        Ok(Split {
            x: Matrix::from_vec(samples.len(), dim, data)?,
            y: samples.iter().map(|s| s.label).collect(),
        })
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample> + '_ {
        self.y.iter().enumerate().map(|(i, &label)| Sample {
            features: self.x.row(i).to_vec(),
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub train: Split,
    pub test: Split,
    /// Global class ids owned by this task.
    pub classes: Range<usize>,
}

impl Task {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }
}

/// Held-out task with its own label space, used to pre-train the frozen base weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseTask {
    pub train: Split,
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskStream {
    pub dim: usize,
    pub tasks: Vec<Task>,
    pub base: Option<BaseTask>,
    /// Human-readable description of how the stream was produced.
    pub descriptor: String,
}

impl TaskStream {
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn total_classes(&self) -> usize {
        self.tasks.last().map_or(0, |t| t.classes.end)
    }

    /// Checks the class-incremental contract: class ranges start at 0, are
    /// contiguous and disjoint, every label lies in its task's range and all
    /// features are finite.
    pub fn validate(&self) -> Result<()> {
        let mut next = 0;
        for (t, task) in self.tasks.iter().enumerate() {
            if task.classes.start != next || task.classes.is_empty() {
                return Err(Error::InvalidState(format!(
                    "task {t} classes {:?} do not continue from {next}",
                    task.classes
                )));
            }
            next = task.classes.end;
            for split in [&task.train, &task.test] {
                if split.x.cols() != self.dim || split.x.rows() != split.y.len() {
                    return Err(Error::Shape {
                        op: "task split",
                        lhs: split.x.shape(),
                        rhs: (split.y.len(), self.dim),
                    });
                }
                if let Some(&bad) = split.y.iter().find(|y| !task.classes.contains(y)) {
                    return Err(Error::InvalidState(format!(
                        "task {t} label {bad} outside {:?}",
                        task.classes
                    )));
                }
                if !split.x.is_finite() {
                    return Err(Error::InvalidState(format!("task {t} has non-finite features")));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over dimensions, labels and the exact feature bits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        let eat_split = |h: &mut Sha256, s: &Split| {
            h.update((s.len() as u64).to_le_bytes());
            for v in s.x.data() {
                h.update(v.to_bits().to_le_bytes());
            }
            for y in &s.y {
                h.update((*y as u64).to_le_bytes());
            }
        };
        for t in &self.tasks {
            h.update((t.classes.start as u64).to_le_bytes());
            h.update((t.classes.end as u64).to_le_bytes());
            eat_split(&mut h, &t.train);
            eat_split(&mut h, &t.test);
        }
        if let Some(b) = &self.base {
            h.update((b.classes as u64).to_le_bytes());
            eat_split(&mut h, &b.train);
        }
        hex::encode(h.finalize())
    }
}
