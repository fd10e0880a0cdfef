mod common;

use std::collections::BTreeMap;

use plan_cl::nn::{cross_entropy, AdamConfig, LoraPair, Mlp};
use plan_cl::oracle::{analytic_ball_max, ball_max_oracle, dual_value};
use plan_cl::plan::{
    compute_perturbations, inner, perturbed_grad_step, plain_grad_step, solve_epsilon, train_task, BasisRegistry,
    LayerPlan, PerturbSettings, PerturbationTracker, TaskOptimizer, Trainer, UpdateRule, Window,
};
use plan_cl::tasks::Split;
use plan_cl::tensor::{flatten_norm, Matrix, NormOrder, Rng};
use proptest::prelude::*;

const RANK: usize = 2;

/// Two-layer model with a live adapter on the first `RANK` standard-basis
/// rows of every layer, plus a random batch. `B` is zero when `b_std` is 0.
fn setup(seed: u64, batch: usize, b_std: f64) -> (Mlp, Vec<LayerPlan>, Split) {
    let mut rng = Rng::new(seed);
    let mut model = Mlp::new(&[8, 10, 6], &mut rng).unwrap();
    model.grow_head(3, &mut rng);
    let mut plans = Vec::new();
    for l in 0..model.layers().len() {
        let layer = &model.layers()[l];
        let (out, k) = (layer.out_dim(), layer.in_dim());
        let mut registry = BasisRegistry::standard(k);
        let idx = registry.allocate_first(RANK).unwrap();
        let b = rng.normal_matrix(out, RANK, b_std);
        let pair = LoraPair::new(b, registry.rows(&idx)).unwrap();
        model.attach_adapter(l, pair).unwrap();
        plans.push(LayerPlan {
            registry,
            tracker: PerturbationTracker::new(Window::Steps(50), RANK),
        });
    }
    let x = rng.normal_matrix(batch, 8, 1.0);
    let y = (0..batch).map(|_| rng.below(3)).collect();
    (model, plans, Split { x, y })
}

fn batch_loss(model: &Mlp, data: &Split, deltas: Option<&[Matrix]>) -> f64 {
    let (logits, _) = model.forward(&data.x, deltas).unwrap();
    cross_entropy(&logits, &data.y).unwrap().0
}

fn settings(rho: f64) -> PerturbSettings {
    PerturbSettings {
        rho,
        p: NormOrder::Two,
        rule: UpdateRule::Perturbed,
    }
}

#[test]
fn closed_form_hand_examples() {
    let g = Matrix::from_rows(&[[3.0, 4.0]]);
    let e = solve_epsilon(&g, 0.01, NormOrder::Two);
    assert!((e[(0, 0)] - 0.006).abs() <= 1e-15 && (e[(0, 1)] - 0.008).abs() <= 1e-15);
    let g = Matrix::from_rows(&[[3.0, -4.0]]);
    assert_eq!(solve_epsilon(&g, 0.01, NormOrder::Inf).data(), &[0.01, -0.01]);
    assert_eq!(solve_epsilon(&g, 0.01, NormOrder::One).data(), &[0.0, -0.01]);
    for p in NormOrder::ALL {
        assert!(solve_epsilon(&Matrix::zeros(2, 3), 0.01, p)
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }
}

proptest! {
    #![proptest_config(common::cases(128))]

    #[test]
    fn closed_form_lies_on_the_ball(
        rows in 1usize..=8, cols in 1usize..=8, rho in 1e-3f64..10.0, seed in any::<u64>()
    ) {
        let g = Rng::new(seed).normal_matrix(rows, cols, 1.0);
        for p in NormOrder::ALL {
            let e = solve_epsilon(&g, rho, p);
            prop_assert!((flatten_norm(&e, p) - rho).abs() <= 1e-9 * rho, "p={}", p);
        }
    }

    #[test]
    fn closed_form_attains_the_dual_norm(
        rows in 1usize..=8, cols in 1usize..=8, rho in 1e-3f64..10.0, seed in any::<u64>()
    ) {
        let g = Rng::new(seed).normal_matrix(rows, cols, 1.0);
        for p in NormOrder::ALL {
            let value = inner(&solve_epsilon(&g, rho, p), &g);
            let optimum = rho * flatten_norm(&g, p.dual());
            prop_assert!((value - optimum).abs() <= 1e-9 * optimum, "p={}", p);
            prop_assert!((dual_value(&g, rho, p) - optimum).abs() <= 1e-12 * optimum);
            let holder = inner(&analytic_ball_max(&g, rho, p), &g);
            prop_assert!((holder - optimum).abs() <= 1e-9 * optimum);
        }
    }

    #[test]
    fn search_never_beats_closed_form(rows in 1usize..=4, cols in 1usize..=4, seed in any::<u64>()) {
        let g = Rng::new(seed).normal_matrix(rows, cols, 1.0);
        for p in NormOrder::ALL {
            let closed = inner(&solve_epsilon(&g, 0.5, p), &g);
            let search = ball_max_oracle(&g, 0.5, p, 200, 2, seed).search_value;
            prop_assert!(search <= closed * (1.0 + 1e-6), "p={} search {} closed {}", p, search, closed);
        }
    }

    #[test]
    fn perturbation_support_is_the_free_pool(
        k in 2usize..16, d in 1usize..8, taken in 0usize..8, seed in any::<u64>()
    ) {
        let mut rng = Rng::new(seed);
        let mut registry = BasisRegistry::standard(k);
        let pool: Vec<usize> = (0..k).collect();
        let n_taken = taken.min(k - 1);
        let chosen = rng.choose_distinct(&pool, n_taken);
        if !chosen.is_empty() {
            registry.allocate(&chosen).unwrap();
        }
        let plans = vec![LayerPlan { registry, tracker: PerturbationTracker::new(Window::Full, 1) }];
        let grad = rng.normal_matrix(d, k, 1.0);
        let pert = compute_perturbations(&plans, &[grad], 0.1, NormOrder::Inf).unwrap();
        for c in 0..k {
            let touched = pert[0].delta.col(c).iter().any(|&v| v != 0.0);
            prop_assert_eq!(touched, !chosen.contains(&c));
        }
    }

    #[test]
    fn selection_matches_brute_force_counts(
        k in 4usize..14, r in 1usize..4, steps in 1usize..30, window in 1usize..12, seed in any::<u64>()
    ) {
        let mut rng = Rng::new(seed);
        let mut registry = BasisRegistry::standard(k);
        registry.allocate_first(1).unwrap();
        let mut tracker = PerturbationTracker::new(Window::Steps(window), r);
        let mut history = Vec::new();
        for _ in 0..steps {
            let eps = rng.normal_matrix(2, registry.available().len(), 1.0);
            tracker.record_winners(&eps, registry.available()).unwrap();
            // smallest column norms, lowest index first on ties
            let norms = eps.col_norms();
            let mut order: Vec<usize> = (0..norms.len()).collect();
            order.sort_by(|&a, &b| norms[a].partial_cmp(&norms[b]).unwrap().then(a.cmp(&b)));
            history.push(order.iter().take(r.min(norms.len())).map(|&j| registry.available()[j]).collect::<Vec<_>>());
        }
        let kept = &history[history.len().saturating_sub(window)..];
        prop_assert_eq!(tracker.len(), kept.len());
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for set in kept {
            for &i in set {
                *counts.entry(i).or_default() += 1;
            }
        }
        let r_next = r.min(registry.available().len());
        let mut ranked: Vec<usize> = registry.available().to_vec();
        ranked.sort_by_key(|i| (std::cmp::Reverse(counts.get(i).copied().unwrap_or(0)), *i));
        let mut expected: Vec<usize> = ranked.into_iter().take(r_next).collect();
        expected.sort_unstable();
        prop_assert_eq!(tracker.rank_candidates(&registry, r_next).unwrap(), expected);
    }
}

#[test]
fn vanishing_radius_reproduces_the_plain_step() {
    let (mut a, mut plans, data) = setup(5, 12, 0.0);
    let (mut b, _, _) = setup(5, 12, 0.0);
    let cfg = AdamConfig::with_lr(1e-3);
    let mut opt_a = TaskOptimizer::new(&a, cfg, false);
    let mut opt_b = TaskOptimizer::new(&b, cfg, false);
    for _ in 0..5 {
        perturbed_grad_step(
            &mut a,
            &data.x,
            &data.y,
            None,
            &mut plans,
            &mut opt_a,
            &settings(1e-300),
        )
        .unwrap();
        plain_grad_step(&mut b, &data.x, &data.y, None, &mut opt_b).unwrap();
    }
    for (la, lb) in a.layers().iter().zip(b.layers()) {
        let (pa, pb) = (la.live().unwrap(), lb.live().unwrap());
        assert!(pa.b.max_abs_diff(&pb.b) <= 1e-10);
        assert_eq!(pa.b.data(), pb.b.data());
        assert!(pa.b.max_abs() > 0.0);
    }
}

#[test]
fn small_step_descends_on_the_perturbed_surrogate() {
    for seed in 0..5 {
        let (mut model, mut plans, data) = setup(40 + seed, 16, 0.1);
        let (logits, cache) = model.forward(&data.x, None).unwrap();
        let (_, dlogits) = cross_entropy(&logits, &data.y).unwrap();
        let grads = model.backward(&cache, &dlogits).unwrap();
        let deltas: Vec<Matrix> = compute_perturbations(&plans, &grads.weights, 0.01, NormOrder::Two)
            .unwrap()
            .into_iter()
            .map(|p| p.delta)
            .collect();
        let before = batch_loss(&model, &data, Some(&deltas));
        let mut opt = TaskOptimizer::new(&model, AdamConfig::with_lr(1e-4), false);
        perturbed_grad_step(
            &mut model,
            &data.x,
            &data.y,
            None,
            &mut plans,
            &mut opt,
            &settings(0.01),
        )
        .unwrap();
        let after = batch_loss(&model, &data, Some(&deltas));
        assert!(after < before, "seed {seed}: {after} >= {before}");
    }
}

#[test]
fn one_batch_one_record() {
    let (mut model, mut plans, data) = setup(7, 10, 0.0);
    let mut opt = TaskOptimizer::new(&model, AdamConfig::with_lr(1e-3), false);
    let trainer = Trainer::Plan {
        plans: &mut plans,
        settings: settings(0.01),
    };
    let summary = train_task(&mut model, &data, None, trainer, &mut opt, 1, 64, &mut Rng::new(1)).unwrap();
    assert_eq!(summary.steps, 1);
    for plan in &plans {
        assert_eq!(plan.tracker.pushes(), 1);
        assert_eq!(plan.tracker.len(), 1);
    }
}

#[test]
fn earlier_adapters_stay_frozen() {
    let (mut model, mut plans, data) = setup(8, 24, 0.0);
    let mut opt = TaskOptimizer::new(&model, AdamConfig::with_lr(1e-2), false);
    let trainer = Trainer::Plan {
        plans: &mut plans,
        settings: settings(0.01),
    };
    train_task(&mut model, &data, None, trainer, &mut opt, 2, 8, &mut Rng::new(2)).unwrap();
    let frozen: Vec<u64> = model.layers().iter().map(|l| l.frozen_checksum()).collect();
    let head = model.head().frozen_checksum();
    let mut rng = Rng::new(3);
    model.grow_head(2, &mut rng);
    for (l, plan) in plans.iter_mut().enumerate() {
        let next = plan.tracker.select_next(&mut plan.registry, RANK).unwrap();
        let out = model.layers()[l].out_dim();
        model
            .attach_adapter(
                l,
                LoraPair::new(Matrix::zeros(out, RANK), plan.registry.rows(&next)).unwrap(),
            )
            .unwrap();
        plan.tracker.clear();
    }
    let second = Split {
        x: data.x.clone(),
        y: data.y.iter().map(|&c| 3 + c % 2).collect(),
    };
    let mut opt = TaskOptimizer::new(&model, AdamConfig::with_lr(1e-2), false);
    for _ in 0..10 {
        perturbed_grad_step(
            &mut model,
            &second.x,
            &second.y,
            None,
            &mut plans,
            &mut opt,
            &settings(0.01),
        )
        .unwrap();
        let now: Vec<u64> = model.layers().iter().map(|l| l.frozen_checksum()).collect();
        assert_eq!(now, frozen);
        assert_eq!(model.head().frozen_checksum(), head);
    }
}

#[test]
fn training_lowers_task_loss() {
    for seed in 0..5 {
        let (mut model, mut plans, data) = setup(60 + seed, 48, 0.0);
        let initial = batch_loss(&model, &data, None);
        let mut opt = TaskOptimizer::new(&model, AdamConfig::with_lr(1e-2), false);
        let trainer = Trainer::Plan {
            plans: &mut plans,
            settings: settings(0.01),
        };
        train_task(&mut model, &data, None, trainer, &mut opt, 5, 16, &mut Rng::new(seed)).unwrap();
        let fin = batch_loss(&model, &data, None);
        assert!(fin < initial, "seed {seed}: {fin} >= {initial}");
    }
}
