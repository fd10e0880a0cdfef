//! Acceptance suite.
//!
//! Runs every acceptance criterion once, prints a single `PASS` or `FAIL`
//! line per criterion and exits nonzero if any failed. Built with
//! `harness = false` so the report is never swallowed by output capture.
//!
//! Reference values are computed here, independently of the library paths
//! under test: norms and dual norms by direct loops, metrics by a double-loop
//! re-implementation, dual-path products by explicit triple loops.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use plan_cl::harness::{
    ablate, build_backbone, run_single, second_task_set, sweep, ExperimentConfig, RunResult, SweepOutput,
};
use plan_cl::metrics::{compute_aaa, compute_acc, AccuracyMatrix};
use plan_cl::oracle::{ball_max_oracle, fd_gradient_check, random_fd_instance, ParamSelector, FD_STEP};
use plan_cl::plan::{solve_epsilon, BasisKind, BasisRegistry};
use plan_cl::plot::write_plots;
use plan_cl::tensor::{Matrix, NormOrder, Rng};
use plan_cl::variants::{run_sequence, Method};

// ---------------------------------------------------------------------------
// Pinned tolerances and budgets
// ---------------------------------------------------------------------------

const INSTANCES_PER_P: usize = 200;
const MAX_SHAPE: usize = 8;
const ANALYTIC_TOL: f64 = 1e-9;
const ORACLE_TOL: f64 = 1e-6;
const BOUNDARY_TOL: f64 = 1e-9;
const CLOSED_FORM_BUDGET_SECS: f64 = 10.0;

const FD_MODELS: usize = 20;
const FD_TOL: f64 = 1e-4;
const FD_BUDGET_SECS: f64 = 30.0;

const CROSS_TOL: f64 = 1e-10;
const DUAL_PATH_INSTANCES: usize = 50;
const DUAL_PATH_TOL: f64 = 1e-12;
const METRIC_TOL: f64 = 1e-12;
const RANDOM_MATRICES: usize = 100;
const DESK_BUDGET_SECS: f64 = 600.0;

const RHOS: [f64; 3] = [0.01, 0.5, 2.0];

type Outcome = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> Result<ExperimentConfig, String> {
    ExperimentConfig::load(&configs().join(name)).map_err(|e| e.to_string())
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Reference arithmetic
// ---------------------------------------------------------------------------

fn norm(v: &[f64], p: NormOrder) -> f64 {
    match p {
        NormOrder::One => v.iter().map(|x| x.abs()).sum(),
        NormOrder::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormOrder::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

fn dual_norm(v: &[f64], p: NormOrder) -> f64 {
    norm(
        v,
        match p {
            NormOrder::One => NormOrder::Inf,
            NormOrder::Two => NormOrder::Two,
            NormOrder::Inf => NormOrder::One,
        },
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

struct Instance {
    g: Matrix,
    rho: f64,
}

fn closed_form_instances(p: NormOrder) -> Vec<Instance> {
    let mut rng = Rng::new(20).fork(&format!("acceptance-p{p}"));
    (0..INSTANCES_PER_P)
        .map(|i| {
            let rows = 1 + rng.below(MAX_SHAPE);
            let cols = 1 + rng.below(MAX_SHAPE);
            Instance {
                g: rng.normal_matrix(rows, cols, 1.0),
                rho: RHOS[i % RHOS.len()],
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn closed_form_optimality() -> Outcome {
    let started = Instant::now();
    let mut worst_analytic: f64 = 0.0;
    let mut worst_gap = f64::NEG_INFINITY;
    for p in NormOrder::ALL {
        for (i, inst) in closed_form_instances(p).iter().enumerate() {
            let eps = solve_epsilon(&inst.g, inst.rho, p);
            let value = dot(eps.data(), inst.g.data());
            let optimum = inst.rho * dual_norm(inst.g.data(), p);
            worst_analytic = worst_analytic.max(rel(value, optimum));
            let search = ball_max_oracle(&inst.g, inst.rho, p, 500, 8, i as u64).search_value;
            worst_gap = worst_gap.max((search - value) / value.abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let detail = format!(
        "{} instances, max |<eps,g> - rho||g||_q| rel {worst_analytic:.2e}, max oracle gain {worst_gap:.2e}, {secs:.2}s",
        3 * INSTANCES_PER_P
    );
    if worst_analytic <= ANALYTIC_TOL && worst_gap <= ORACLE_TOL && secs < CLOSED_FORM_BUDGET_SECS {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ball_boundary() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in NormOrder::ALL {
        for inst in closed_form_instances(p) {
            let eps = solve_epsilon(&inst.g, inst.rho, p);
            worst = worst.max(rel(norm(eps.data(), p), inst.rho));
        }
    }
    let mut nonzero_at_origin = 0;
    for p in NormOrder::ALL {
        for (r, c) in [(1, 1), (3, 5), (8, 8)] {
            let eps = solve_epsilon(&Matrix::zeros(r, c), 0.1, p);
            nonzero_at_origin += eps.data().iter().filter(|&&x| x != 0.0).count();
        }
    }
    let detail = format!("max | ||eps||_p - rho | rel {worst:.2e}, nonzero entries at g = 0: {nonzero_at_origin}");
    if worst <= BOUNDARY_TOL && nonzero_at_origin == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_at_perturbed_point() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..FD_MODELS {
        let p = NormOrder::ALL[i % 3];
        let inst = random_fd_instance(3000 + i as u64, 0.05, p).map_err(|e| e.to_string())?;
        for l in 0..2 {
            let r = fd_gradient_check(
                &inst.model,
                &inst.x,
                &inst.y,
                ParamSelector::LiveB(l),
                FD_STEP,
                Some(&inst.deltas),
                plan_cl::nn::LossKind::CrossEntropy,
            )
            .map_err(|e| e.to_string())?;
            worst = worst.max(r.max_rel_error);
            checked += r.checked;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let detail =
        format!("{FD_MODELS} models, {checked} entries, max rel error {worst:.2e} (h = {FD_STEP:e}), {secs:.2}s");
    if worst <= FD_TOL && checked > 0 && secs < FD_BUDGET_SECS {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn orthogonality_and_disjointness() -> Outcome {
    let base = load("default.toml")?;
    let stream = base.build_stream().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for kind in [BasisKind::Standard, BasisKind::RandomOrthogonal, BasisKind::GradientSvd] {
        let mut cfg = base.clone();
        cfg.plan.basis_kind = kind;
        let (model, _) = build_backbone(&cfg, &stream, 0).map_err(|e| e.to_string())?;
        let out = run_sequence(
            model,
            &stream,
            &cfg.method_spec(),
            &cfg.plan_config(0),
            &Rng::new(0).fork("sequence"),
        )
        .map_err(|e| e.to_string())?;

        for l in 0..out.model.layers().len() {
            let mut seen = BTreeSet::new();
            for task in &out.allocations {
                for &i in &task[l] {
                    if !seen.insert(i) {
                        failures.push(format!("{kind}: layer {l} index {i} allocated twice"));
                    }
                }
            }
        }

        let mut worst_cross: f64 = 0.0;
        for layer in out.model.layers() {
            let pairs = layer.frozen();
            for i in 0..pairs.len() {
                for j in i + 1..pairs.len() {
                    let cross = pairs[i].a.matmul_t(&pairs[j].a).map_err(|e| e.to_string())?.max_abs();
                    worst_cross = worst_cross.max(cross);
                }
            }
        }
        let cross_ok = match kind {
            BasisKind::Standard => worst_cross == 0.0,
            _ => worst_cross <= CROSS_TOL,
        };
        if !cross_ok {
            failures.push(format!("{kind}: max |A_i A_j^T| {worst_cross:.2e}"));
        }
        notes.push(format!("{kind} cross {worst_cross:.1e}"));

        if kind == BasisKind::Standard {
            let mut mismatched = 0;
            for (l, layer) in out.model.layers().iter().enumerate() {
                for (t, pair) in layer.frozen().iter().enumerate() {
                    let delta = pair.delta();
                    let support: BTreeSet<usize> = (0..delta.cols())
                        .filter(|&c| delta.col(c).iter().any(|&x| x != 0.0))
                        .collect();
                    let allocated: BTreeSet<usize> = out.allocations[t][l].iter().copied().collect();
                    if support != allocated {
                        mismatched += 1;
                        failures.push(format!(
                            "standard: layer {l} task {t} support {support:?} != allocated {allocated:?}"
                        ));
                    }
                }
            }
            notes.push(format!("support mismatches {mismatched}"));
        }
    }
    if failures.is_empty() {
        Ok(format!("5 tasks per basis kind; {}", notes.join(", ")))
    } else {
        Err(failures.join("; "))
    }
}

fn dual_path_equivalence() -> Outcome {
    let mut rng = Rng::new(50).fork("acceptance-dual-path");
    let mut worst: f64 = 0.0;
    for _ in 0..DUAL_PATH_INSTANCES {
        let k = 2 + rng.below(15);
        let d = 1 + rng.below(12);
        let mut reg = BasisRegistry::standard(k);
        let pool: Vec<usize> = (0..k).collect();
        let n_taken = rng.below(k);
        let mut taken = rng.choose_distinct(&pool, n_taken);
        taken.sort_unstable();
        if !taken.is_empty() {
            reg.allocate(&taken).map_err(|e| e.to_string())?;
        }
        let free = reg.available().to_vec();
        // explicit M_t: one identity row per free index
        let m = Matrix::from_fn(free.len(), k, |r, c| if free[r] == c { 1.0 } else { 0.0 });

        let grad = rng.normal_matrix(d, k, 1.0);
        let explicit_gather = Matrix::from_fn(d, free.len(), |i, j| (0..k).map(|c| grad[(i, c)] * m[(j, c)]).sum());
        let fast = reg.gather_gradient(&grad).map_err(|e| e.to_string())?;
        worst = worst.max(fast.max_abs_diff(&explicit_gather));

        let eps = rng.normal_matrix(d, free.len(), 1.0);
        let explicit_scatter = Matrix::from_fn(d, k, |i, c| (0..free.len()).map(|j| eps[(i, j)] * m[(j, c)]).sum());
        let fast = reg.scatter(&eps).map_err(|e| e.to_string())?;
        worst = worst.max(fast.max_abs_diff(&explicit_scatter));
    }
    let detail = format!("{DUAL_PATH_INSTANCES} instances, max difference {worst:.2e}");
    if worst <= DUAL_PATH_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn naive_acc(r: &[Vec<f64>]) -> f64 {
    let last = &r[r.len() - 1];
    let mut s = 0.0;
    for v in last {
        s += v;
    }
    s / last.len() as f64
}

fn naive_aaa(r: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (i, row) in r.iter().enumerate() {
        let mut s = 0.0;
        for v in &row[..=i] {
            s += v;
        }
        total += s / (i + 1) as f64;
    }
    total / r.len() as f64
}

fn metric_correctness() -> Outcome {
    let m = |rows: Vec<Vec<f64>>| AccuracyMatrix::from_rows(rows).map_err(|e| e.to_string());
    let value = |r: plan_cl::error::Result<f64>| r.map_err(|e| e.to_string());
    let worked = [
        (
            "acc perfect",
            value(compute_acc(&m(vec![vec![1.0], vec![1.0, 1.0]])?))?,
            1.0,
        ),
        (
            "acc two tasks",
            value(compute_acc(&m(vec![vec![0.9], vec![0.8, 0.6]])?))?,
            0.7,
        ),
        ("acc single", value(compute_acc(&m(vec![vec![0.5]])?))?, 0.5),
        (
            "aaa perfect",
            value(compute_aaa(&m(vec![vec![1.0], vec![1.0, 1.0]])?))?,
            1.0,
        ),
        (
            "aaa two tasks",
            value(compute_aaa(&m(vec![vec![0.9], vec![0.8, 0.6]])?))?,
            0.8,
        ),
        ("aaa single", value(compute_aaa(&m(vec![vec![0.5]])?))?, 0.5),
    ];
    let bad: Vec<&str> = worked
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > METRIC_TOL)
        .map(|(name, _, _)| *name)
        .collect();

    let mut rng = Rng::new(6).fork("acceptance-metrics");
    let mut worst: f64 = 0.0;
    for _ in 0..RANDOM_MATRICES {
        let n = 1 + rng.below(10);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..=i).map(|_| rng.uniform()).collect()).collect();
        let mat = m(rows.clone())?;
        worst = worst.max((value(compute_acc(&mat))? - naive_acc(&rows)).abs());
        worst = worst.max((value(compute_aaa(&mat))? - naive_aaa(&rows)).abs());
    }
    let detail = format!(
        "{} worked examples ({} off), {RANDOM_MATRICES} random matrices max diff {worst:.2e}",
        worked.len(),
        bad.len()
    );
    if bad.is_empty() && worst <= METRIC_TOL {
        Ok(detail)
    } else {
        Err(format!("{detail} {bad:?}"))
    }
}

fn desk_scale_ordering(ablation: &Result<SweepOutput, String>, secs: f64) -> Outcome {
    let out = ablation.as_ref().map_err(Clone::clone)?;
    let mean = |m: Method| {
        out.report
            .rows
            .iter()
            .find(|r| r.value == m.to_string())
            .map(|r| r.summary.acc_mean)
            .ok_or_else(|| format!("no ablation row for {m}"))
    };
    let plan = mean(Method::Plan)?;
    let inc = mean(Method::IncLora)?;
    let no_sel = mean(Method::PlanNoSelection)?;
    let no_pert = mean(Method::PlanNoPerturbation)?;
    let n = out.report.rows[0].summary.n;
    let detail = format!(
        "{n} seeds, mean Acc plan {:.2} vs inc_lora {:.2} (no_selection {:.2}, no_perturbation {:.2}), {secs:.1}s",
        100.0 * plan,
        100.0 * inc,
        100.0 * no_sel,
        100.0 * no_pert
    );
    if plan >= inc && n == 5 && secs < DESK_BUDGET_SECS {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn canonical(results: &[Vec<RunResult>]) -> Vec<String> {
    results.iter().flatten().map(RunResult::canonical_json).collect()
}

/// Runs the shipped sweep config twice, with different worker counts.
fn sweep_twice(name: &str, dir: &Path) -> Result<(SweepOutput, SweepOutput), String> {
    let cfg = load(name)?;
    let a = sweep(&cfg, &dir.join("a"), threads()).map_err(|e| e.to_string())?;
    let b = sweep(&cfg, &dir.join("b"), 1).map_err(|e| e.to_string())?;
    Ok((a, b))
}

fn rho_sweep() -> Outcome {
    let dir = tempdir()?;
    let (a, b) = sweep_twice("rho_sweep.toml", dir.path())?;
    let values: Vec<&str> = a.report.rows.iter().map(|r| r.value.as_str()).collect();
    let seeds: Vec<usize> = a.report.rows.iter().map(|r| r.summary.n).collect();
    let same = a.report.to_csv() == b.report.to_csv() && canonical(&a.results) == canonical(&b.results);
    let table_lines = fs::read_to_string(&a.summary_csv)
        .map_err(|e| e.to_string())?
        .lines()
        .count();
    let detail = format!("values {values:?}, seeds {seeds:?}, table lines {table_lines}, repeat identical {same}");
    if values == ["0.1", "0.01", "0.001"] && seeds.iter().all(|&n| n == 5) && table_lines == 4 && same {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn window_sweep() -> Outcome {
    let dir = tempdir()?;
    let (a, b) = sweep_twice("window_sweep.toml", dir.path())?;
    let overlaps: Vec<String> = a
        .report
        .rows
        .iter()
        .map(|r| {
            format!(
                "S={}:{}",
                r.value,
                r.jaccard_vs_ref.map_or("-".into(), |j| format!("{j:.3}"))
            )
        })
        .collect();
    let at_50 = a
        .report
        .rows
        .iter()
        .find(|r| r.value == "50")
        .and_then(|r| r.jaccard_vs_ref);
    let same = a.report.to_csv() == b.report.to_csv()
        && canonical(&a.results) == canonical(&b.results)
        && a.report
            .rows
            .iter()
            .zip(&b.report.rows)
            .all(|(x, y)| x.selected_sets == y.selected_sets);

    let js: Vec<f64> = a.report.rows.iter().filter_map(|r| r.jaccard_vs_ref).collect();
    let stabilizes = js.windows(2).all(|w| w[1] + 1e-12 >= w[0]);
    let per_seed: Vec<String> = a
        .results
        .iter()
        .zip(&a.report.rows)
        .map(|(runs, row)| {
            let sizes: Vec<usize> = runs.iter().filter_map(second_task_set).map(|s| s.len()).collect();
            format!("S={} task-2 set sizes {sizes:?}", row.value)
        })
        .collect();
    println!(
        "      window sweep: overlap nondecreasing in S: {stabilizes}; {}",
        per_seed.join("; ")
    );

    let detail = format!("jaccard vs full {}, repeat identical {same}", overlaps.join(" "));
    if at_50.is_some() && same {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reproducibility(ablation: &Result<SweepOutput, String>) -> Outcome {
    let out = ablation.as_ref().map_err(Clone::clone)?;
    let mut reruns = 0;
    for group in &out.results {
        let first = &group[0];
        let snapshot = ExperimentConfig::from_toml_str(&first.config.to_toml_string()).map_err(|e| e.to_string())?;
        let stream = snapshot.build_stream().map_err(|e| e.to_string())?;
        let again = run_single(&snapshot, &stream, first.seed).map_err(|e| e.to_string())?;
        if again.canonical_json() != first.canonical_json() {
            return Err(format!("{} seed {} differs on rerun", first.label(), first.seed));
        }
        reruns += 1;
    }

    let reloaded: Vec<RunResult> = out
        .result_files
        .iter()
        .map(|p| RunResult::load(p))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let in_memory: Vec<RunResult> = out.results.iter().flatten().cloned().collect();
    let dir = tempdir()?;
    let first = write_plots(&in_memory, &dir.path().join("a")).map_err(|e| e.to_string())?;
    let second = write_plots(&reloaded, &dir.path().join("b")).map_err(|e| e.to_string())?;
    let files = |o: &plan_cl::plot::PlotOutput| -> Result<Vec<Vec<u8>>, String> {
        o.svgs
            .iter()
            .chain(std::iter::once(&o.csv))
            .map(|p| fs::read(p).map_err(|e| e.to_string()))
            .collect()
    };
    let (fa, fb) = (files(&first)?, files(&second)?);
    if fa != fb {
        return Err("plots from reloaded results differ".into());
    }
    Ok(format!(
        "{reruns} snapshot reruns byte-identical, {} plot files byte-identical",
        fa.len()
    ))
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

fn report(id: usize, name: &str, outcome: Outcome) -> bool {
    let (tag, detail, pass) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("{tag} [{id:>2}] {name}: {detail}");
    pass
}

fn main() {
    // `cargo test -- --list` and similar probes expect no work
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut passed = vec![
        report(1, "closed-form optimality", closed_form_optimality()),
        report(2, "ball boundary", ball_boundary()),
        report(3, "gradient at the perturbed point", gradient_at_perturbed_point()),
        report(4, "orthogonality and disjointness", orthogonality_and_disjointness()),
        report(5, "dual-path equivalence", dual_path_equivalence()),
        report(6, "metric correctness", metric_correctness()),
    ];

    let started = Instant::now();
    let dir = tempdir();
    let ablation = dir.as_ref().map_err(Clone::clone).and_then(|d| {
        let cfg = load("default.toml")?;
        ablate(&cfg, d.path(), threads()).map_err(|e| e.to_string())
    });
    let secs = started.elapsed().as_secs_f64();
    passed.push(report(7, "desk-scale ordering", desk_scale_ordering(&ablation, secs)));
    passed.push(report(8, "rho sweep", rho_sweep()));
    passed.push(report(9, "window sweep", window_sweep()));
    passed.push(report(10, "reproducibility", reproducibility(&ablation)));

    let failed = passed.iter().filter(|&&p| !p).count();
    println!("acceptance: {} passed, {failed} failed", passed.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
