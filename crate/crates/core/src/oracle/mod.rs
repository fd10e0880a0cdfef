//! Brute-force verifiers used by the test suite and the `verify` command:
//! a projected-ascent maximizer of `<eps, g>` over the `l_p` ball, a
//! central-difference gradient checker, and a suite that runs both against
//! the closed-form solver plus structural checks on allocations.

mod dd;

pub use dd::{exact_loss, Bump, Dd, DdMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, Generator};
use crate::nn::{LoraPair, LossKind, Mlp};
use crate::plan::{compute_perturbations, inner, BasisRegistry, LayerPlan, PerturbationTracker, Window};
use crate::tensor::{flatten_norm, orthonormality_error, Matrix, NormOrder, Rng};
use crate::variants::{run_sequence, Method, MethodSpec};

/// Relative tolerance for closed form vs analytic optimum and the ball boundary.
pub const EXACT_TOL: f64 = 1e-9;
/// How far the search oracle may beat the closed form (relative).
pub const ORACLE_TOL: f64 = 1e-6;
/// Max relative error allowed by the finite-difference checks.
pub const FD_TOL: f64 = 1e-4;
/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Euclidean projection onto `{x : ||x||_p <= rho}`.
pub fn project_ball(v: &mut [f64], rho: f64, p: NormOrder) {
    match p {
        NormOrder::Two => {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > rho {
                let s = rho / n;
                v.iter_mut().for_each(|x| *x *= s);
            }
        }
        NormOrder::Inf => v.iter_mut().for_each(|x| *x = x.clamp(-rho, rho)),
        NormOrder::One => {
            if v.iter().map(|x| x.abs()).sum::<f64>() <= rho {
                return;
            }
            // soft-threshold at the level found by sorting magnitudes
            let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            u.sort_by(|a, b| b.total_cmp(a));
            let mut cum = 0.0;
            let mut theta = 0.0;
            for (j, &uj) in u.iter().enumerate() {
                cum += uj;
                let t = (cum - rho) / (j + 1) as f64;
                if uj > t {
                    theta = t;
                }
            }
            v.iter_mut().for_each(|x| *x = x.signum() * (x.abs() - theta).max(0.0));
            // guard against the sum landing a few ulps above rho
            let s: f64 = v.iter().map(|x| x.abs()).sum();
            if s > rho {
                let f = rho / s;
                v.iter_mut().for_each(|x| *x *= f);
            }
        }
    }
}

/// Maximizer of `<eps, g>` over the ball written directly from Hölder's
/// equality cases. Ties for `p = 1` go to the first largest entry.
pub fn analytic_ball_max(g: &Matrix, rho: f64, p: NormOrder) -> Matrix {
    let mut out = Matrix::zeros(g.rows(), g.cols());
    let d = g.data();
    match p {
        NormOrder::Two => {
            let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                out.data_mut().iter_mut().zip(d).for_each(|(o, x)| *o = rho * x / n);
            }
        }
        NormOrder::Inf => {
            out.data_mut()
                .iter_mut()
                .zip(d)
                .for_each(|(o, &x)| *o = if x == 0.0 { 0.0 } else { rho * x.signum() });
        }
        NormOrder::One => {
            let mut best = None;
            for (i, x) in d.iter().enumerate() {
                if *x != 0.0 && best.is_none_or(|b: usize| x.abs() > d[b].abs()) {
                    best = Some(i);
                }
            }
            if let Some(i) = best {
                out.data_mut()[i] = rho * d[i].signum();
            }
        }
    }
    out
}

/// Dual-norm optimum `rho * ||g||_q`.
pub fn dual_value(g: &Matrix, rho: f64, p: NormOrder) -> f64 {
    rho * flatten_norm(g, p.dual())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallMax {
    /// Best point found (search or analytic, whichever scores higher).
    pub eps: Matrix,
    pub value: f64,
    /// Best value reached by projected ascent alone.
    pub search_value: f64,
    pub analytic_value: f64,
}

/// Maximizes `<eps, g>` over `||eps||_p <= rho` by projected gradient ascent
/// (step `rho / 10` along `g / ||g||_2`) from `restarts` starts: the origin
/// and random points in the ball. The analytic maximizer is evaluated too.
pub fn ball_max_oracle(g: &Matrix, rho: f64, p: NormOrder, iters: usize, restarts: usize, seed: u64) -> BallMax {
    let n = g.data().len();
    let gnorm = g.frobenius();
    let analytic = analytic_ball_max(g, rho, p);
    let analytic_value = inner(&analytic, g);
    if gnorm == 0.0 || n == 0 {
        return BallMax {
            eps: Matrix::zeros(g.rows(), g.cols()),
            value: 0.0,
            search_value: 0.0,
            analytic_value,
        };
    }
    let dir: Vec<f64> = g.data().iter().map(|x| x / gnorm).collect();
    let step = rho / 10.0;
    let mut rng = Rng::new(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in 0..restarts.max(1) {
        let mut x = if r == 0 {
            vec![0.0; n]
        } else {
            let mut v: Vec<f64> = (0..n).map(|_| rho * rng.normal()).collect();
            project_ball(&mut v, rho, p);
            v
        };
        for _ in 0..iters {
            x.iter_mut().zip(&dir).for_each(|(xi, di)| *xi += step * di);
            project_ball(&mut x, rho, p);
        }
        let val: f64 = x.iter().zip(g.data()).map(|(a, b)| a * b).sum();
        if best.as_ref().is_none_or(|(bv, _)| val > *bv) {
            best = Some((val, x));
        }
    }
    let (search_value, x) = best.expect("at least one restart");
    let (value, eps) = if analytic_value > search_value {
        (analytic_value, analytic)
    } else {
        (
            search_value,
            Matrix::from_vec(g.rows(), g.cols(), x).expect("same shape"),
        )
    };
    BallMax {
        eps,
        value,
        search_value,
        analytic_value,
    }
}

/// One closed-form instance checked against the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instance: String,
    pub p: NormOrder,
    pub rho: f64,
    /// `<eps_hat, g>` for the solver under test.
    pub closed_value: f64,
    pub oracle_value: f64,
    pub analytic_value: f64,
    /// `(oracle - closed) / max(|oracle|, 1e-300)`.
    pub gap: f64,
    /// `|closed - rho ||g||_q| / max(rho ||g||_q, 1e-300)`.
    pub analytic_error: f64,
    /// `| ||eps_hat||_p - rho | / rho`, or `||eps_hat||` when `g = 0`.
    pub boundary_error: f64,
    pub pass: bool,
}

pub type Solver = dyn Fn(&Matrix, f64, NormOrder) -> Matrix + Sync;

pub fn check_instance(
    solver: &Solver,
    g: &Matrix,
    rho: f64,
    p: NormOrder,
    seed: u64,
    instance: String,
) -> OracleReport {
    let eps = solver(g, rho, p);
    let closed_value = inner(&eps, g);
    let oracle = ball_max_oracle(g, rho, p, 500, 8, seed);
    let dual = dual_value(g, rho, p);
    let gap = (oracle.value - closed_value) / oracle.value.abs().max(1e-300);
    let analytic_error = (closed_value - dual).abs() / dual.abs().max(1e-300);
    let norm = flatten_norm(&eps, p);
    let zero = g.data().iter().all(|&x| x == 0.0);
    let boundary_error = if zero { eps.max_abs() } else { (norm - rho).abs() / rho };
    let shape_ok = eps.shape() == g.shape();
    let pass = shape_ok
        && gap <= ORACLE_TOL
        && analytic_error <= EXACT_TOL
        && if zero {
            boundary_error == 0.0
        } else {
            boundary_error <= EXACT_TOL
        };
    OracleReport {
        instance,
        p,
        rho,
        closed_value,
        oracle_value: oracle.value,
        analytic_value: oracle.analytic_value,
        gap,
        analytic_error,
        boundary_error,
        pass,
    }
}

/// Random `g` instance: shape up to `max_dim x max_dim`, entries N(0, 1).
pub fn random_instance(rng: &mut Rng, max_dim: usize) -> Matrix {
    let r = 1 + rng.below(max_dim);
    let c = 1 + rng.below(max_dim);
    rng.normal_matrix(r, c, 1.0)
}

/// Radii cycled through by the closed-form suite.
pub const SUITE_RHOS: [f64; 3] = [0.01, 0.5, 2.0];

/// `count` random instances plus one all-zero `g` for order `p`.
pub fn closed_form_suite(solver: &Solver, p: NormOrder, count: usize, seed: u64) -> Vec<OracleReport> {
    let mut rng = Rng::new(seed).fork(&format!("closed-form-{p}"));
    let mut out: Vec<OracleReport> = (0..count)
        .map(|i| {
            let g = random_instance(&mut rng, 8);
            let rho = SUITE_RHOS[i % SUITE_RHOS.len()];
            let desc = format!("p={p} #{i} {}x{} rho={rho}", g.rows(), g.cols());
            check_instance(solver, &g, rho, p, seed ^ i as u64, desc)
        })
        .collect();
    out.push(check_instance(
        solver,
        &Matrix::zeros(3, 4),
        0.5,
        p,
        seed,
        format!("p={p} zero 3x4"),
    ));
    out
}

/// Which trainable tensor the gradient checker perturbs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamSelector {
    /// `B` of the live adapter in a layer.
    LiveB(usize),
    /// `A` of the live adapter in a layer.
    LiveA(usize),
    /// Weight of a head block.
    HeadWeight(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub max_rel_error: f64,
    /// Entries compared.
    pub checked: usize,
    /// Entries skipped because `|analytic| <= 1e-8`.
    pub masked: usize,
}

/// Central differences of the loss at `W + deltas` against the analytic
/// gradient of the selected tensor. Returns the max relative error over
/// entries whose analytic gradient exceeds 1e-8 in magnitude.
///
/// The shifted losses are evaluated in double-double precision by a
/// separate forward pass, so the differences resolve gradients near the
/// 1e-8 mask instead of drowning in f64 rounding.
pub fn fd_gradient_check(
    model: &Mlp,
    x: &Matrix,
    y: &[usize],
    which: ParamSelector,
    h: f64,
    deltas: Option<&[Matrix]>,
    loss: LossKind,
) -> Result<FdReport> {
    let (logits, cache) = model.forward(x, deltas)?;
    let (_, dlogits) = loss.eval(&logits, y)?;
    let grads = model.backward(&cache, &dlogits)?;
    let analytic = match which {
        ParamSelector::LiveB(l) | ParamSelector::LiveA(l) => {
            let pair = model
                .layers()
                .get(l)
                .and_then(|layer| layer.live())
                .ok_or_else(|| Error::InvalidState(format!("{which:?} does not exist")))?;
            let dw = &grads.weights[l];
            if matches!(which, ParamSelector::LiveB(_)) {
                dw.matmul_t(&pair.a)?
            } else {
                pair.b.t_matmul(dw)?
            }
        }
        ParamSelector::HeadWeight(b) => grads
            .head
            .get(b)
            .map(|(w, _)| w.clone())
            .ok_or_else(|| Error::InvalidState(format!("{which:?} does not exist")))?,
    };
    let mut report = FdReport {
        max_rel_error: 0.0,
        checked: 0,
        masked: 0,
    };
    for i in 0..analytic.data().len() {
        let a = analytic.data()[i];
        if a.abs() <= 1e-8 {
            report.masked += 1;
            continue;
        }
        let at = |offset| {
            exact_loss(
                model,
                x,
                y,
                deltas,
                loss,
                Some(Bump {
                    which,
                    index: i,
                    offset,
                }),
            )
        };
        let numeric = ((at(h)? - at(-h)?) / Dd::from_f64(2.0 * h)).to_f64();
        report.max_rel_error = report.max_rel_error.max((a - numeric).abs() / a.abs());
        report.checked += 1;
    }
    Ok(report)
}

/// Random 2-layer adapter model with live adapters on standard-basis rows,
/// a random batch and the perturbation the closed form would apply there.
pub struct FdInstance {
    pub model: Mlp,
    pub x: Matrix,
    pub y: Vec<usize>,
    pub deltas: Vec<Matrix>,
}

pub fn random_fd_instance(seed: u64, rho: f64, p: NormOrder) -> Result<FdInstance> {
    let mut rng = Rng::new(seed);
    let k = 4 + rng.below(13);
    let hidden = 4 + rng.below(13);
    let feat = 4 + rng.below(13);
    let batch = 2 + rng.below(7);
    let classes = 2 + rng.below(3);
    let mut model = Mlp::new(&[k, hidden, feat], &mut rng)?;
    model.grow_head(classes, &mut rng);
    let mut plans = Vec::new();
    for l in 0..2 {
        let kin = model.layers()[l].in_dim();
        let mut reg = BasisRegistry::standard(kin);
        let r = 1 + rng.below(kin / 2);
        let pool: Vec<usize> = (0..kin).collect();
        let mut idx = rng.choose_distinct(&pool, r);
        idx.sort_unstable();
        reg.allocate(&idx)?;
        let b = rng.normal_matrix(model.layers()[l].out_dim(), r, 0.1);
        model.attach_adapter(l, LoraPair::new(b, reg.rows(&idx))?)?;
        plans.push(LayerPlan {
            registry: reg,
            tracker: PerturbationTracker::new(Window::Steps(1), 1),
        });
    }
    let x = rng.normal_matrix(batch, k, 1.0);
    let y: Vec<usize> = (0..batch).map(|_| rng.below(classes)).collect();
    let (logits, cache) = model.forward(&x, None)?;
    let (_, dlogits) = LossKind::CrossEntropy.eval(&logits, &y)?;
    let grads = model.backward(&cache, &dlogits)?;
    let deltas = compute_perturbations(&plans, &grads.weights, rho, p)?
        .into_iter()
        .map(|pp| pp.delta)
        .collect();
    Ok(FdInstance { model, x, y, deltas })
}

/// Aggregate of one order's closed-form instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub p: NormOrder,
    pub instances: usize,
    pub failures: usize,
    pub max_gap: f64,
    pub mean_gap: f64,
    pub max_analytic_error: f64,
    pub max_boundary_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub gap_stats: Vec<GapStats>,
    pub checks: Vec<CheckResult>,
    /// Closed-form instances that failed, for diagnosis.
    pub failed_instances: Vec<OracleReport>,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub instances_per_p: usize,
    pub fd_models: usize,
    pub dual_path_instances: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            instances_per_p: 200,
            fd_models: 20,
            dual_path_instances: 50,
        }
    }
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

fn gap_stats(p: NormOrder, reports: &[OracleReport]) -> GapStats {
    let n = reports.len().max(1) as f64;
    GapStats {
        p,
        instances: reports.len(),
        failures: reports.iter().filter(|r| !r.pass).count(),
        max_gap: reports.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max),
        mean_gap: reports.iter().map(|r| r.gap).sum::<f64>() / n,
        max_analytic_error: reports.iter().map(|r| r.analytic_error).fold(0.0, f64::max),
        max_boundary_error: reports.iter().map(|r| r.boundary_error).fold(0.0, f64::max),
    }
}

/// Gradient checks on random 2-layer models at the perturbed point, plus a
/// linear model under a quadratic loss where differences are exact.
pub fn fd_suite(models: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut worst: f64 = 0.0;
    for i in 0..models {
        let inst = random_fd_instance(seed.wrapping_add(i as u64), 0.05, NormOrder::Two)?;
        for l in 0..2 {
            let r = fd_gradient_check(
                &inst.model,
                &inst.x,
                &inst.y,
                ParamSelector::LiveB(l),
                FD_STEP,
                Some(&inst.deltas),
                LossKind::CrossEntropy,
            )?;
            worst = worst.max(r.max_rel_error);
        }
    }
    let mut rng = Rng::new(seed).fork("fd-linear");
    let mut lin = Mlp::new(&[6, 5], &mut rng)?;
    lin.grow_head(3, &mut rng);
    let b = rng.normal_matrix(5, 2, 0.3);
    let a = BasisRegistry::standard(6).rows(&[1, 4]);
    lin.attach_adapter(0, LoraPair::new(b, a)?)?;
    let x = rng.normal_matrix(4, 6, 1.0);
    let y = vec![0, 2, 1, 2];
    let quad = fd_gradient_check(&lin, &x, &y, ParamSelector::LiveB(0), 1e-3, None, LossKind::HalfSquared)?;
    Ok(vec![
        check(
            "fd_gradient_b_perturbed",
            worst <= FD_TOL,
            format!("{models} models, max relative error {worst:.3e} (tol {FD_TOL:e})"),
        ),
        check(
            "fd_gradient_quadratic_exact",
            quad.max_rel_error <= 1e-9,
            format!("max relative error {:.3e} (tol 1e-9)", quad.max_rel_error),
        ),
    ])
}

/// Fast gather/scatter vs explicit `M_t` products on the standard basis.
pub fn dual_path_suite(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = Rng::new(seed).fork("dual-path");
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let k = 2 + rng.below(15);
        let d = 1 + rng.below(12);
        let mut reg = BasisRegistry::standard(k);
        let pool: Vec<usize> = (0..k).collect();
        let n_taken = rng.below(k);
        let mut taken = rng.choose_distinct(&pool, n_taken);
        taken.sort_unstable();
        if !taken.is_empty() {
            reg.allocate(&taken)?;
        }
        let grad = rng.normal_matrix(d, k, 1.0);
        let fast = reg.gather_gradient(&grad)?;
        let slow = reg.gather_gradient_general(&grad)?;
        worst = worst.max(fast.max_abs_diff(&slow));
        let eps = rng.normal_matrix(d, reg.available().len(), 1.0);
        worst = worst.max(reg.scatter(&eps)?.max_abs_diff(&reg.scatter_general(&eps)?));
    }
    Ok(check(
        "dual_path_equivalence",
        worst <= 1e-12,
        format!("{instances} instances, max difference {worst:.3e}"),
    ))
}

/// Short 3-task runs on each basis kind: disjoint allocations, orthogonal
/// adapters, and `B A` supported on the allocated columns (standard basis).
pub fn structure_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut cfg = ExperimentConfig::default();
    cfg.tasks.generator = Generator::Gaussian;
    cfg.tasks.n_tasks = 3;
    cfg.tasks.classes_per_task = 2;
    cfg.tasks.dim = 12;
    cfg.tasks.samples_per_class = 20;
    cfg.tasks.base_classes = 2;
    cfg.tasks.seed = seed;
    cfg.model.hidden = vec![10];
    cfg.model.features = 8;
    cfg.plan.rank = 2;
    cfg.run.epochs = 1;
    cfg.run.batch_size = 8;
    let stream = cfg.build_stream()?;
    let mut out = Vec::new();
    for kind in [
        crate::plan::BasisKind::Standard,
        crate::plan::BasisKind::RandomOrthogonal,
        crate::plan::BasisKind::GradientSvd,
    ] {
        let mut rng = Rng::new(seed);
        let model = Mlp::new(&cfg.layer_dims(stream.dim), &mut rng)?;
        let spec = MethodSpec {
            method: Method::Plan,
            basis_kind: kind,
        };
        let outcome = run_sequence(model, &stream, &spec, &cfg.plan_config(seed), &rng.fork("run"))?;
        let mut disjoint = true;
        let mut cross: f64 = 0.0;
        let mut support_ok = true;
        let mut basis_err: f64 = 0.0;
        for (l, layer) in outcome.model.layers().iter().enumerate() {
            basis_err = basis_err.max(orthonormality_error(outcome.registries[l].basis()));
            let sets: Vec<&Vec<usize>> = outcome.allocations.iter().map(|t| &t[l]).collect();
            for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    disjoint &= sets[i].iter().all(|x| !sets[j].contains(x));
                }
            }
            let adapters = layer.frozen();
            for i in 0..adapters.len() {
                for j in i + 1..adapters.len() {
                    cross = cross.max(adapters[i].a.matmul_t(&adapters[j].a)?.max_abs());
                }
            }
            if kind == crate::plan::BasisKind::Standard {
                for (pair, set) in adapters.iter().zip(&sets) {
                    let dw = pair.delta();
                    for c in 0..dw.cols() {
                        let nonzero = dw.col(c).iter().any(|&v| v != 0.0);
                        support_ok &= !nonzero || set.contains(&c);
                    }
                }
            }
        }
        let tol = if kind == crate::plan::BasisKind::Standard {
            0.0
        } else {
            1e-10
        };
        out.push(check(
            format!("disjoint_allocations[{kind}]"),
            disjoint,
            "pairwise disjoint index sets per layer",
        ));
        out.push(check(
            format!("adapter_orthogonality[{kind}]"),
            cross <= tol && basis_err <= 1e-10,
            format!("max |A_i A_j^T| {cross:.3e}, basis error {basis_err:.3e}"),
        ));
        if kind == crate::plan::BasisKind::Standard {
            out.push(check(
                "delta_support[standard]",
                support_ok,
                "nonzero columns of B A lie in the allocated set",
            ));
        }
    }
    Ok(out)
}

/// Runs every check with `solver` as the closed form under test.
pub fn verify_suite(solver: &Solver, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let mut gap = Vec::new();
    let mut failed_instances = Vec::new();
    for p in NormOrder::ALL {
        let reports = closed_form_suite(solver, p, opts.instances_per_p, opts.seed);
        let stats = gap_stats(p, &reports);
        checks.push(check(
            format!("closed_form_optimality[p={p}]"),
            stats.max_gap <= ORACLE_TOL && stats.max_analytic_error <= EXACT_TOL,
            format!(
                "max gap {:.3e}, max error vs dual norm {:.3e}",
                stats.max_gap, stats.max_analytic_error
            ),
        ));
        checks.push(check(
            format!("ball_boundary[p={p}]"),
            reports.iter().all(|r| {
                if r.instance.contains("zero") {
                    r.boundary_error == 0.0
                } else {
                    r.boundary_error <= EXACT_TOL
                }
            }),
            format!("max boundary error {:.3e}", stats.max_boundary_error),
        ));
        failed_instances.extend(reports.into_iter().filter(|r| !r.pass));
        gap.push(stats);
    }
    checks.extend(fd_suite(opts.fd_models, opts.seed)?);
    checks.push(dual_path_suite(opts.dual_path_instances, opts.seed)?);
    checks.extend(structure_suite(opts.seed)?);
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        gap_stats: gap,
        checks,
        failed_instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_projection_lands_on_ball() {
        let mut v = vec![3.0, -1.0, 0.5];
        project_ball(&mut v, 1.0, NormOrder::One);
        assert!((v.iter().map(|x| x.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn oracle_hits_dual_values() {
        let g = Matrix::from_rows(&[[3.0, -4.0]]);
        for (p, want) in [(NormOrder::Two, 5.0), (NormOrder::Inf, 7.0), (NormOrder::One, 4.0)] {
            let r = ball_max_oracle(&g, 1.0, p, 500, 8, 1);
            assert!((r.value - want).abs() < 1e-9, "{p}: {}", r.value);
            assert!((r.search_value - want).abs() < 1e-6, "{p}: {}", r.search_value);
        }
    }

    #[test]
    fn zero_gradient_gives_zero() {
        let r = ball_max_oracle(&Matrix::zeros(2, 2), 1.0, NormOrder::Two, 10, 2, 0);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.eps.max_abs(), 0.0);
    }
}
