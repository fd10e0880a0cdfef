use serde::{Deserialize, Serialize};

use super::{BaseTask, Split, Task, TaskStream};
use crate::error::{Error, Result};
use crate::tensor::{gram_schmidt, Matrix, Rng};

/// Parameters of the isotropic Gaussian cluster generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub n_tasks: usize,
    pub classes_per_task: usize,
    pub dim: usize,
    /// Train + test samples per class; 80% go to train.
    pub samples_per_class: usize,
    pub separation: f64,
    /// Extra classes for the base pre-training task (0 = none).
    pub base_classes: usize,
    pub seed: u64,
}

impl Default for GaussianParams {
    fn default() -> Self {
        GaussianParams {
            n_tasks: 5,
            classes_per_task: 4,
            dim: 64,
            samples_per_class: 250,
            separation: 3.0,
            base_classes: 8,
            seed: 0,
        }
    }
}

pub const TRAIN_FRACTION: f64 = 0.8;

fn unit_vector(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let n = crate::tensor::scaled_l2(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Draws `count` samples of one class: `separation * mean + N(0, I)`.
fn class_samples(mean: &[f64], separation: f64, count: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(count, mean.len(), |_, j| separation * mean[j] + rng.normal())
}

fn check_params(p: &GaussianParams) -> Result<()> {
    for (key, v) in [
        ("tasks.n_tasks", p.n_tasks),
        ("tasks.classes_per_task", p.classes_per_task),
        ("tasks.dim", p.dim),
        ("tasks.samples_per_class", p.samples_per_class),
    ] {
        if v == 0 {
            return Err(Error::config(key, "must be at least 1"));
        }
    }
    if p.separation < 0.0 || !p.separation.is_finite() {
        return Err(Error::config("tasks.separation", "must be finite and non-negative"));
    }
    Ok(())
}

/// Class-incremental stream of Gaussian clusters around random unit-sphere means.
pub fn gen_gaussian_clusters(p: &GaussianParams) -> Result<TaskStream> {
    check_params(p)?;
    let root = Rng::new(p.seed);
    let n_train = ((p.samples_per_class as f64) * TRAIN_FRACTION).round() as usize;
    let n_train = n_train.min(p.samples_per_class);

    let mut tasks = Vec::with_capacity(p.n_tasks);
    for t in 0..p.n_tasks {
        let mut rng = root.fork(&format!("task-{t}"));
        let first = t * p.classes_per_task;
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut train_y = Vec::new();
        let mut test_y = Vec::new();
        for c in 0..p.classes_per_task {
            let mean = unit_vector(p.dim, &mut rng);
            let xs = class_samples(&mean, p.separation, p.samples_per_class, &mut rng);
            for i in 0..p.samples_per_class {
                if i < n_train {
                    train.extend_from_slice(xs.row(i));
                    train_y.push(first + c);
                } else {
                    test.extend_from_slice(xs.row(i));
                    test_y.push(first + c);
                }
            }
        }
        tasks.push(Task {
            train: Split {
                x: Matrix::from_vec(train_y.len(), p.dim, train)?,
                y: train_y,
            },
            test: Split {
                x: Matrix::from_vec(test_y.len(), p.dim, test)?,
                y: test_y,
            },
            classes: first..first + p.classes_per_task,
        });
    }

    let base = (p.base_classes > 0).then(|| {
        let mut rng = root.fork("base");
        let mut data = Vec::new();
        let mut y = Vec::new();
        for c in 0..p.base_classes {
            let mean = unit_vector(p.dim, &mut rng);
            let xs = class_samples(&mean, p.separation, p.samples_per_class, &mut rng);
            data.extend_from_slice(xs.data());
            y.extend(std::iter::repeat_n(c, p.samples_per_class));
        }
        BaseTask {
            train: Split {
                x: Matrix::from_vec(y.len(), p.dim, data).expect("sized above"),
                y,
            },
            classes: p.base_classes,
        }
    });

    let stream = TaskStream {
        dim: p.dim,
        tasks,
        base,
        descriptor: format!(
            "gaussian(n_tasks={}, classes_per_task={}, dim={}, samples_per_class={}, separation={}, base_classes={}, seed={})",
            p.n_tasks, p.classes_per_task, p.dim, p.samples_per_class, p.separation, p.base_classes, p.seed
        ),
    };
    stream.validate()?;
    Ok(stream)
}

/// Rotation by `angle` inside a random 2-plane of `R^dim`:
/// `I + (cos a - 1)(u u^T + v v^T) + sin a (v u^T - u v^T)`.
pub fn plane_rotation(dim: usize, angle: f64, rng: &mut Rng) -> Result<Matrix> {
    if dim < 2 {
        return Ok(Matrix::identity(dim));
    }
    let raw = rng.normal_matrix(2, dim, 1.0);
    let q = gram_schmidt(&raw)?;
    let (u, v) = (q.row(0), q.row(1));
    let (c, s) = (angle.cos() - 1.0, angle.sin());
    Ok(Matrix::from_fn(dim, dim, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id + c * (u[i] * u[j] + v[i] * v[j]) + s * (v[i] * u[j] - u[i] * v[j])
    }))
}

/// Domain-shift stream: task `t` reuses base task `t mod n` with its features
/// rotated by `angles[t]` and its labels moved to fresh class ids.
pub fn gen_rotated_features(base: &TaskStream, angles: &[f64], seed: u64) -> Result<TaskStream> {
    if base.tasks.is_empty() {
        return Err(Error::InvalidState(
            "rotated stream needs a non-empty base stream".into(),
        ));
    }
    if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
        return Err(Error::config("tasks.angles", format!("non-finite angle {a}")));
    }
    let root = Rng::new(seed);
    let mut tasks = Vec::with_capacity(angles.len());
    let mut offset = 0;
    for (t, &angle) in angles.iter().enumerate() {
        let src = &base.tasks[t % base.tasks.len()];
        let rot = plane_rotation(base.dim, angle, &mut root.fork(&format!("rotation-{t}")))?;
        let remap = |s: &Split| -> Result<Split> {
            Ok(Split {
                x: s.x.matmul_t(&rot)?,
                y: s.y.iter().map(|y| y - src.classes.start + offset).collect(),
            })
        };
        tasks.push(Task {
            train: remap(&src.train)?,
            test: remap(&src.test)?,
            classes: offset..offset + src.num_classes(),
        });
        offset += src.num_classes();
    }
    let stream = TaskStream {
        dim: base.dim,
        tasks,
        base: base.base.clone(),
        descriptor: format!("rotated(angles={angles:?}, seed={seed}) of {}", base.descriptor),
    };
    stream.validate()?;
    Ok(stream)
}
