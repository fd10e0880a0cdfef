mod common;

use std::fs;

use plan_cl::nn::{AdamConfig, Mlp};
use plan_cl::plan::{train_task, TaskOptimizer, Trainer};
use plan_cl::tasks::{export_csv, gen_gaussian_clusters, gen_rotated_features, load_csv_stream, GaussianParams, Task};
use plan_cl::tensor::{orthonormality_error, Rng};
use proptest::prelude::*;

/// Trains a softmax head on fixed random linear features of one task and
/// returns its test accuracy.
fn linear_probe(task: &Task, dim: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut model = Mlp::new(&[dim, dim], &mut rng).unwrap();
    model.grow_head(task.num_classes(), &mut rng);
    let shift = task.classes.start;
    let mut train = task.train.clone();
    train.y.iter_mut().for_each(|y| *y -= shift);
    let mut opt = TaskOptimizer::new(&model, AdamConfig::with_lr(1e-2), false);
    train_task(&mut model, &train, None, Trainer::Plain, &mut opt, 20, 32, &mut rng).unwrap();
    let labels: Vec<usize> = task.test.y.iter().map(|y| y - shift).collect();
    model.accuracy(&task.test.x, &labels).unwrap()
}

#[test]
fn well_separated_clusters_are_linearly_separable() {
    let stream = gen_gaussian_clusters(&GaussianParams {
        n_tasks: 3,
        classes_per_task: 4,
        dim: 32,
        samples_per_class: 200,
        separation: 10.0,
        base_classes: 0,
        seed: 1,
    })
    .unwrap();
    for (t, task) in stream.tasks.iter().enumerate() {
        let acc = linear_probe(task, 32, t as u64);
        assert!(acc >= 0.99, "task {t}: {acc}");
    }
}

#[test]
fn zero_separation_is_chance() {
    let classes = 4;
    let stream = gen_gaussian_clusters(&GaussianParams {
        n_tasks: 1,
        classes_per_task: classes,
        dim: 8,
        samples_per_class: 2500,
        separation: 0.0,
        base_classes: 0,
        seed: 2,
    })
    .unwrap();
    let acc = linear_probe(&stream.tasks[0], 8, 0);
    assert!((acc - 1.0 / classes as f64).abs() <= 0.05, "{acc}");
}

#[test]
fn csv_export_reloads_the_same_stream() {
    let dir = tempfile::tempdir().unwrap();
    let stream = gen_gaussian_clusters(&GaussianParams {
        n_tasks: 3,
        classes_per_task: 3,
        dim: 5,
        samples_per_class: 20,
        separation: 2.0,
        base_classes: 4,
        seed: 3,
    })
    .unwrap();
    let (train, schema) = export_csv(&stream, dir.path(), "s").unwrap();
    let back = load_csv_stream(&train, &schema).unwrap();
    assert_eq!(back.dim, stream.dim);
    assert_eq!(back.tasks, stream.tasks);
    assert_eq!(back.base, stream.base);
    assert_eq!(back.content_hash(), stream.content_hash());
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let params = GaussianParams {
        n_tasks: 2,
        samples_per_class: 10,
        dim: 6,
        ..GaussianParams::default()
    };
    let a = gen_gaussian_clusters(&params).unwrap();
    let b = gen_gaussian_clusters(&params).unwrap();
    assert_eq!(a, b);
    let (pa, _) = export_csv(&a, dir.path(), "a").unwrap();
    let (pb, _) = export_csv(&b, dir.path(), "b").unwrap();
    assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
}

#[test]
fn rotated_stream_is_seeded_and_class_disjoint() {
    let base = gen_gaussian_clusters(&GaussianParams {
        n_tasks: 1,
        classes_per_task: 3,
        dim: 6,
        samples_per_class: 10,
        separation: 3.0,
        base_classes: 0,
        seed: 4,
    })
    .unwrap();
    let angles = [0.0, 0.7, 1.4, 2.1];
    let a = gen_rotated_features(&base, &angles, 9).unwrap();
    let b = gen_rotated_features(&base, &angles, 9).unwrap();
    assert_eq!(a, b);
    for (t, task) in a.tasks.iter().enumerate() {
        assert_eq!(task.classes, 3 * t..3 * t + 3);
        assert!(task.train.y.iter().all(|y| task.classes.contains(y)));
    }
    assert_eq!(a.tasks[0].train.x, base.tasks[0].train.x);
    assert_ne!(a.tasks[1].train.x, base.tasks[0].train.x);
}

proptest! {
    #![proptest_config(common::cases(32))]

    #[test]
    fn classes_never_overlap(
        n_tasks in 1usize..6, per_task in 1usize..5, dim in 1usize..10, seed in any::<u64>()
    ) {
        let s = gen_gaussian_clusters(&GaussianParams {
            n_tasks,
            classes_per_task: per_task,
            dim,
            samples_per_class: 5,
            separation: 1.0,
            base_classes: 2,
            seed,
        }).unwrap();
        prop_assert!(s.validate().is_ok());
        for (t, task) in s.tasks.iter().enumerate() {
            prop_assert_eq!(task.classes.clone(), t * per_task..(t + 1) * per_task);
            prop_assert!(task.train.y.iter().chain(&task.test.y).all(|y| task.classes.contains(y)));
        }
    }

    #[test]
    fn plane_rotations_are_orthogonal(dim in 2usize..20, angle in -6.3f64..6.3, seed in any::<u64>()) {
        let r = plan_cl::tasks::plane_rotation(dim, angle, &mut Rng::new(seed)).unwrap();
        prop_assert!(orthonormality_error(&r) <= 1e-10);
    }
}
