//! Acceptance criteria 1–11. Each test prints one `criterion N: PASS|FAIL`
//! line to stderr (uncaptured) before asserting.

use std::io::Write;

use nalgebra::SymmetricEigen;
use oef_core::linalg::{cg_solve_observed, eigen_range, lanczos_budget, min_eigen, spectral_norm, EigenMethod, EigenMode};
use oef_core::oracles::{
    adversarial_gradient, adversarial_hessian, hessian_error, subsample_estimate, verify_estimate,
    gradient_sample_size, hessian_sample_size, EstimateContext, GradientNoiseModel, InexactnessPolicy,
    Oracle, OracleMode, Schedule,
};
use oef_core::problem::builtin::DEFAULT_LAMBDA;
use oef_core::problem::{builtin_problem, CompositeProblem, ProblemDescriptor, Regularizer, SmoothObjective};
use oef_core::rates::{fit_order, usable_pairs, ERROR_FLOOR};
use oef_core::rng::{self, Purpose};
use oef_core::solvers::{
    iteration_bound_k1, k3_for, operation_accounting, pnm_run, rn2cm_run, rnm_run, sc_run,
    theoretical_sc_constants, PnmConfig, Rn2cmConfig, RnmConfig, ScConfig,
};
use oef_core::trace::{SolverTrace, StepKind, Termination};
use oef_core::{Matrix, Vector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn report(criterion: u32, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {criterion}: {status} - {detail}");
}

fn student_t(lambda: f64, seed: u64) -> CompositeProblem {
    builtin_problem(&ProblemDescriptor::new("l1-student-t").with_sizes(200, 50).with_lambda(lambda).with_seed(seed))
        .unwrap()
}

fn logistic(m: usize, n: usize, seed: u64) -> CompositeProblem {
    builtin_problem(&ProblemDescriptor::new("ridge-logistic").with_sizes(m, n).with_mu(0.1).with_seed(seed)).unwrap()
}

fn saddle() -> CompositeProblem {
    builtin_problem(&ProblemDescriptor::new("saddle-2d")).unwrap()
}

fn pnm_config() -> PnmConfig {
    PnmConfig {
        gamma: 2.0,
        eta: 0.5,
        eps: 1e-3,
        oracle: InexactnessPolicy::adversarial(0.25, 0.5, 7),
        ..PnmConfig::default()
    }
}

fn pnm_student_t() -> (CompositeProblem, SolverTrace) {
    let p = student_t(DEFAULT_LAMBDA, 0);
    let x0 = Vector::zeros(p.dim());
    let t = pnm_run(&p, &pnm_config(), &x0).unwrap();
    (p, t)
}

fn rn2cm_config(seed: u64) -> Rn2cmConfig {
    Rn2cmConfig {
        eps_g: 1e-2,
        oracle: InexactnessPolicy::adversarial(1e-2 / 3.0, 1e-3, seed),
        ..Rn2cmConfig::default()
    }
}

/// Starts near the saddle of `saddle-2d` with `f(x₀) < 0`.
fn saddle_start(seed: u64) -> Vector {
    let mut r = rng::stream(seed, 0, Purpose::Start);
    let a: f64 = r.random_range(-1e-3..1e-3);
    let b: f64 = r.random_range(1e-4..1e-2) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
    Vector::from_vec(vec![a * b.abs(), b])
}

struct Rn2cmRun {
    name: String,
    problem: CompositeProblem,
    config: Rn2cmConfig,
    x0: Vector,
    trace: SolverTrace,
}

fn rn2cm_runs() -> Vec<Rn2cmRun> {
    let mut runs = Vec::new();
    for seed in 0..20u64 {
        let p = saddle();
        let x0 = saddle_start(seed);
        let config = rn2cm_config(seed);
        let trace = rn2cm_run(&p, &config, &x0).unwrap();
        runs.push(Rn2cmRun {
            name: format!("saddle-2d seed {seed}"),
            problem: p,
            config,
            x0,
            trace,
        });
    }
    for seed in 0..20u64 {
        let p = student_t(0.0, seed);
        let x0 = Vector::zeros(p.dim());
        let config = rn2cm_config(seed);
        let trace = rn2cm_run(&p, &config, &x0).unwrap();
        runs.push(Rn2cmRun {
            name: format!("student-t seed {seed}"),
            problem: p,
            config,
            x0,
            trace,
        });
    }
    runs
}

#[test]
fn criterion_01_objective_evaluation_free() {
    let mut runs: Vec<(String, SolverTrace)> = Vec::new();
    let (_, t) = pnm_student_t();
    runs.push(("pnm l1-student-t".into(), t));
    let lr = logistic(500, 20, 0);
    let x0 = Vector::zeros(20);
    let rc = RnmConfig {
        eps: 1e-8,
        oracle: InexactnessPolicy::adversarial(0.25, 0.05, 1),
        ..RnmConfig::default()
    };
    runs.push(("rnm ridge-logistic".into(), rnm_run(&lr, &rc, &x0).unwrap()));
    let sub = RnmConfig {
        eps: 1e-3,
        oracle: InexactnessPolicy::subsampled(0.4, 0.5, 0.05, 2),
        ..RnmConfig::default()
    };
    runs.push(("rnm subsampled".into(), rnm_run(&lr, &sub, &x0).unwrap()));
    let sc = ScConfig {
        theta: 0.5,
        oracle: InexactnessPolicy::adversarial(0.5, 0.05, 3).with_schedule(Schedule::GradientAdaptive, 0.5),
        ..ScConfig::default()
    };
    runs.push(("sc ridge-logistic".into(), sc_run(&lr, &sc, &x0).unwrap()));
    let s = saddle();
    runs.push((
        "rn2cm saddle-2d".into(),
        rn2cm_run(&s, &rn2cm_config(0), &saddle_start(0)).unwrap(),
    ));
    let st = student_t(0.0, 0);
    let sub2 = Rn2cmConfig {
        oracle: InexactnessPolicy::subsampled(0.0, 1.0, 0.05, 4),
        ..rn2cm_config(0)
    };
    runs.push((
        "rn2cm subsampled student-t".into(),
        rn2cm_run(&st, &sub2, &Vector::zeros(50)).unwrap(),
    ));

    let bad: Vec<String> = runs
        .iter()
        .filter(|(_, t)| t.audit.objective_evals != 0)
        .map(|(n, t)| format!("{n}: {}", t.audit.objective_evals))
        .collect();
    let passed = bad.is_empty() && runs.iter().all(|(_, t)| t.terminated());
    report(
        1,
        passed,
        &format!("{} runs, objective evaluations nonzero in {:?}", runs.len(), bad),
    );
    assert!(passed);
}

#[test]
fn criterion_02_pnm_decrease_certificate() {
    let (_, t) = pnm_student_t();
    let steps: Vec<_> = t.records.iter().filter(|r| r.step == StepKind::Prox).collect();
    let failed: Vec<usize> = steps
        .iter()
        .filter(|r| !r.certificate("decrease").is_some_and(|c| c.passed))
        .map(|r| r.k)
        .collect();
    let passed = !steps.is_empty() && failed.is_empty() && t.audit.objective_evals == 0;
    report(
        2,
        passed,
        &format!("{} steps, decrease certificate failed at {:?}", steps.len(), failed),
    );
    assert!(passed);
}

#[test]
fn criterion_03_pnm_iteration_bound() {
    let (p, t) = pnm_student_t();
    let cfg = pnm_config();
    let x0 = Vector::zeros(p.dim());
    let lg = p.smooth().constants().lipschitz_grad;
    let k1 = iteration_bound_k1(
        p.objective(&x0),
        p.lower_bound,
        cfg.gamma,
        lg,
        cfg.oracle.delta_g,
        cfg.oracle.delta_h,
        cfg.eps,
    )
    .unwrap();
    let xf = t.final_point();
    let g = p.exact_residual(&xf).norm();
    let passed = t.termination == Termination::Converged && (t.iterations() as u64) <= k1 && g <= 1.5e-3;
    report(
        3,
        passed,
        &format!("iterations {} <= K1 {k1}, exact |G| = {g:.3e} <= 1.5e-3", t.iterations()),
    );
    assert!(passed);
}

#[test]
fn criterion_04_rnm_step_criterion() {
    let mut runs: Vec<(String, SolverTrace)> = Vec::new();
    let lr = logistic(500, 20, 0);
    let base = RnmConfig {
        eps: 1e-8,
        ..RnmConfig::default()
    };
    runs.push(("logistic exact".into(), rnm_run(&lr, &base, &Vector::zeros(20)).unwrap()));
    runs.push((
        "logistic adversarial".into(),
        rnm_run(
            &lr,
            &RnmConfig {
                oracle: InexactnessPolicy::adversarial(0.25, 0.5, 5),
                ..base.clone()
            },
            &Vector::zeros(20),
        )
        .unwrap(),
    ));
    runs.push((
        "logistic subsampled".into(),
        rnm_run(
            &lr,
            &RnmConfig {
                eps: 1e-3,
                oracle: InexactnessPolicy::subsampled(0.4, 0.5, 0.05, 6),
                ..base.clone()
            },
            &Vector::zeros(20),
        )
        .unwrap(),
    ));
    let st = student_t(0.0, 1);
    runs.push((
        "student-t adversarial".into(),
        rnm_run(
            &st,
            &RnmConfig {
                eps: 1e-5,
                oracle: InexactnessPolicy::adversarial(0.25, 0.5, 8),
                ..base.clone()
            },
            &Vector::zeros(50),
        )
        .unwrap(),
    ));
    let q = builtin_problem(&{
        let mut d = ProblemDescriptor::new("quadratic").with_seed(3);
        d.n = Some(30);
        d.indefinite = Some(true);
        d
    })
    .unwrap();
    let mut rs = rng::stream(11, 0, Purpose::Start);
    let x0 = Vector::from_fn(30, |_, _| rs.random_range(-1.0..1.0));
    runs.push((
        "indefinite quadratic".into(),
        rnm_run(
            &q,
            &RnmConfig {
                max_iter: 200,
                ..base.clone()
            },
            &x0,
        )
        .unwrap(),
    ));
    let mut steps = 0;
    let mut failures = Vec::new();
    for (name, t) in &runs {
        for r in t.records.iter().filter(|r| r.step == StepKind::Newton) {
            steps += 1;
            if !r.certificate("step-criterion").is_some_and(|c| c.passed) {
                failures.push(format!("{name} k={}", r.k));
            }
        }
    }
    let passed = steps > 0 && failures.is_empty();
    report(
        4,
        passed,
        &format!("{steps} Newton steps over {} runs, failures {:?}", runs.len(), failures),
    );
    assert!(passed);
}

/// Ball radius `ε̂₀` maximizing `ε̂₃` on a log grid.
fn best_ball(sigma: f64, lg: f64, lh: f64, dg: f64, dh: f64, theta: f64, ug: f64) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    for i in -80..=40 {
        let e0 = 10f64.powf(i as f64 / 10.0);
        let c = theoretical_sc_constants(sigma, lg, lh, e0, dg, dh, theta, ug).unwrap();
        if c.eps3 > best.1 {
            best = (e0, c.eps3);
        }
    }
    best
}

#[test]
fn criterion_05_sc_local_rates() {
    let p = logistic(500, 20, 0);
    let c = p.smooth().constants();
    let (sigma, lg, lh) = (c.strong_convexity, c.lipschitz_grad, c.lipschitz_hess.unwrap());
    let x_star = p.minimizer.clone().unwrap();
    let (dg, dh) = (0.5, 0.05);
    let mut u = Vector::from_fn(20, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
    u /= u.norm();
    let mut details = Vec::new();
    let mut passed = true;

    for theta in [0.0, 1.0] {
        // U_g from the ball bound first, then from the chosen start.
        let (e0, r3) = best_ball(sigma, lg, lh, dg, dh, theta, 2.0 * lg);
        let x0 = &x_star + &u * (0.9 * r3);
        let ug = 2.0 * p.smooth().gradient(&x0).norm();
        let consts = theoretical_sc_constants(sigma, lg, lh, e0, dg, dh, theta, ug).unwrap();
        let inside = (&x0 - &x_star).norm() <= consts.eps3;
        let cfg = ScConfig {
            theta,
            eps: 1e-14,
            max_iter: 100,
            oracle: InexactnessPolicy::adversarial(dg, dh, 21).with_schedule(Schedule::GradientAdaptive, theta),
            ..ScConfig::default()
        };
        let t = sc_run(&p, &cfg, &x0).unwrap();
        let errors = t.errors();
        let pairs = usable_pairs(&errors);
        if theta == 0.0 {
            let ok = inside
                && !pairs.is_empty()
                && errors
                    .windows(2)
                    .filter(|w| w[0] > ERROR_FLOOR)
                    .all(|w| w[1] <= 0.5 * w[0]);
            passed &= ok;
            details.push(format!(
                "theta=0: start e0={:.2e} (ball {:.2e}), halving on {} pairs: {ok}",
                errors[0],
                consts.eps3,
                pairs.len()
            ));
        } else {
            let order = fit_order(&errors);
            let ratios: Vec<f64> = errors
                .windows(2)
                .filter(|w| w[0] > ERROR_FLOOR && w[1] > ERROR_FLOOR)
                .map(|w| w[1] / (w[0] * w[0]))
                .collect();
            let ratio_ok = ratios.iter().all(|&r| r <= consts.varsigma2);
            let ok = inside && order.is_some_and(|q| q >= 1.7) && pairs.len() >= 3 && ratio_ok;
            passed &= ok;
            details.push(format!(
                "theta=1: start e0={:.2e} (ball {:.2e}), usable pairs {}, order {:?}, max e1/e0^2 {:.2e} vs varsigma2 {:.2e}",
                errors[0],
                consts.eps3,
                pairs.len(),
                order,
                ratios.iter().cloned().fold(0.0, f64::max),
                consts.varsigma2
            ));
        }
        passed &= t.audit.objective_evals == 0;
    }
    report(5, passed, &details.join("; "));
    assert!(passed);
}

#[test]
fn criterion_06_rn2cm_step_decreases() {
    let runs = rn2cm_runs();
    let mut nc = 0;
    let mut sol = 0;
    let mut failures = Vec::new();
    for run in &runs {
        for r in &run.trace.records {
            let name = match r.step {
                StepKind::Nc => {
                    nc += 1;
                    "nc-decrease"
                }
                StepKind::Sol => {
                    sol += 1;
                    "sol-decrease"
                }
                _ => continue,
            };
            if !r.certificate(name).is_some_and(|c| c.passed) {
                failures.push(format!("{} k={}", run.name, r.k));
            }
        }
        if run.trace.audit.objective_evals != 0 {
            failures.push(format!("{} evaluated f", run.name));
        }
    }
    let passed = failures.is_empty() && nc > 0 && sol > 0;
    report(
        6,
        passed,
        &format!("{nc} NC and {sol} SOL steps over {} runs, failures {:?}", runs.len(), failures),
    );
    assert!(passed);
}

#[test]
fn criterion_07_rn2cm_termination() {
    let runs = rn2cm_runs();
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for run in &runs {
        let t = &run.trace;
        let eps_g = run.config.eps_g;
        let lh = run.problem.smooth().constants().lipschitz_hess.unwrap();
        let xf = t.final_point();
        let g = run.problem.smooth().gradient(&xf).norm();
        let (lo, _) = eigen_range(&run.problem.smooth().hessian(&xf));
        let k3 = k3_for(&run.problem, &run.config, &run.x0).unwrap();
        worst_ratio = worst_ratio.max(t.iterations() as f64 / k3 as f64);
        let ok = t.terminated()
            && g <= (58.0 / 9.0 + 2.0 * run.config.mu_hat) * eps_g
            && lo >= -(32.0 / 9.0) * (lh * eps_g).sqrt()
            && (t.iterations() as u64) <= k3;
        if !ok {
            failures.push(format!("{} (|g|={g:.2e}, lmin={lo:.2e}, it={}, K3={k3})", run.name, t.iterations()));
        }
    }
    let passed = failures.is_empty();
    report(
        7,
        passed,
        &format!("{} runs, max iterations/K3 = {worst_ratio:.2e}, failures {:?}", runs.len(), failures),
    );
    assert!(passed);
}

#[test]
fn criterion_08_lanczos_accuracy() {
    let n = 100;
    let eps_h = 0.1;
    let trials = 200;
    let mut failures = 0;
    let mut lanczos = 0;
    let mut rs = rng::stream(2024, 0, Purpose::Data);
    for trial in 0..trials {
        // Wigner matrix with spectrum on [-1, 1].
        let s = 1.0 / (2.0 * (n as f64).sqrt());
        let mut a = Matrix::from_fn(n, n, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rs);
            z * s
        });
        a = (&a + a.transpose()) / 2f64.sqrt();
        let exact = SymmetricEigen::new(a.clone()).eigenvalues.min();
        let est = min_eigen(&a, eps_h, 0.05, trial as u64, EigenMode::Lanczos).unwrap();
        if est.method == EigenMethod::Lanczos {
            lanczos += 1;
        }
        if est.value - exact > eps_h / 2.0 {
            failures += 1;
        }
    }
    let rate = failures as f64 / trials as f64;
    let passed = rate <= 0.08 && lanczos == trials;
    report(
        8,
        passed,
        &format!(
            "failure rate {rate:.3} <= 0.08 over {trials} trials (budget {})",
            lanczos_budget(n, eps_h, 0.05)
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_09_subsampling_concentration() {
    let p = logistic(2000, 10, 0);
    let audited = p.audited();
    let bounds = audited.component_bounds().unwrap();
    let (delta_g, eps, delta_h, conf) = (0.5, 2.0, 2.0, 0.05);
    let sg = gradient_sample_size(delta_g, eps, bounds.gradient, conf, Some(2000)).unwrap();
    let sh = hessian_sample_size(delta_h, 10, bounds.hessian, conf, Some(2000)).unwrap();
    let trials = 1000;
    let mut gv = 0;
    let mut hv = 0;
    let mut rs = rng::stream(99, 0, Purpose::Start);
    for trial in 0..trials {
        let x = Vector::from_fn(10, |_, _| rs.random_range(-1.0..1.0));
        let est = subsample_estimate(&audited, &x, sg, sh, 1000 + trial as u64, 0).unwrap();
        let grad = p.smooth().gradient(&x);
        if (&est.g - &grad).norm() > delta_g * eps {
            gv += 1;
        }
        let q = est.hessian_matrix();
        if spectral_norm(&(q - p.smooth().hessian(&x))) > delta_h {
            hv += 1;
        }
    }
    let (rg, rh) = (gv as f64 / trials as f64, hv as f64 / trials as f64);
    let passed = rg <= 0.07 && rh <= 0.07 && sg < 2000 && sh < 2000;
    report(
        9,
        passed,
        &format!("|S_g|={sg}, |S_h|={sh}; violation rates gradient {rg:.3}, Hessian {rh:.3} (<= 0.07)"),
    );
    assert!(passed);
}

#[test]
fn criterion_10_operation_envelope() {
    let mut runs = rn2cm_runs();
    let st = student_t(0.0, 0);
    let cfg = Rn2cmConfig {
        oracle: InexactnessPolicy::subsampled(0.0, 1.0, 0.05, 4),
        ..rn2cm_config(0)
    };
    let x0 = Vector::zeros(50);
    let trace = rn2cm_run(&st, &cfg, &x0).unwrap();
    runs.push(Rn2cmRun {
        name: "student-t subsampled".into(),
        problem: st,
        config: cfg,
        x0,
        trace,
    });
    let mut failures = Vec::new();
    let mut sampled = 0;
    for run in &runs {
        let c = run.problem.smooth().constants();
        let k3 = k3_for(&run.problem, &run.config, &run.x0).ok();
        let rep = operation_accounting(
            &run.trace,
            run.problem.dim(),
            c.lipschitz_grad,
            c.lipschitz_hess.unwrap(),
            &run.config,
            k3,
        );
        if rep.sample_operations.is_some() {
            sampled += 1;
        }
        if !rep.within_budget {
            failures.push(format!(
                "{}: cg {}/{} eigen {}/{}",
                run.name, rep.max_cg_iterations, rep.cg_budget, rep.max_eigen_matvecs, rep.eigen_budget
            ));
        }
    }
    let passed = failures.is_empty() && sampled == 1;
    report(
        10,
        passed,
        &format!("{} runs ({sampled} finite-sum sampled), failures {:?}", runs.len(), failures),
    );
    assert!(passed);
}

fn finite_difference_check(f: &dyn SmoothObjective, x: &Vector) -> f64 {
    let n = x.len();
    let h = 1e-6;
    let g = f.gradient(x);
    let hess = f.hessian(x);
    let mut fd_g = Vector::zeros(n);
    let mut fd_h = Matrix::zeros(n, n);
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        fd_g[i] = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
        fd_h.set_column(i, &((f.gradient(&xp) - f.gradient(&xm)) / (2.0 * h)));
    }
    let eg = (&fd_g - &g).norm() / g.norm().max(1.0);
    let eh = (&fd_h - &hess).norm() / hess.norm().max(1.0);
    eg.max(eh)
}

#[test]
fn criterion_11_kernel_and_oracle_suites() {
    let mut notes = Vec::new();
    let mut passed = true;

    // Finite differences on every built-in instance.
    let mut rs = rng::stream(5, 0, Purpose::Start);
    let mut worst: f64 = 0.0;
    for p in [
        student_t(DEFAULT_LAMBDA, 0),
        logistic(300, 8, 0),
        builtin_problem(&ProblemDescriptor::new("quadratic")).unwrap(),
        saddle(),
    ] {
        for _ in 0..5 {
            let x = Vector::from_fn(p.dim(), |_, _| rs.random_range(-1.0..1.0));
            worst = worst.max(finite_difference_check(p.smooth(), &x));
        }
    }
    passed &= worst <= 1e-6;
    notes.push(format!("fd rel err {worst:.1e}"));

    // Prox nonexpansivity.
    let mut prox_ok = true;
    for reg in [
        Regularizer::Zero,
        Regularizer::L1 { lambda: 0.3 },
        Regularizer::Box { lower: -0.5, upper: 0.5 },
    ] {
        for _ in 0..200 {
            let u = Vector::from_fn(6, |_, _| rs.random_range(-2.0..2.0));
            let v = Vector::from_fn(6, |_, _| rs.random_range(-2.0..2.0));
            let t = rs.random_range(0.1..3.0);
            let d = (reg.prox(&u, t).unwrap() - reg.prox(&v, t).unwrap()).norm();
            prox_ok &= d <= (&u - &v).norm() * (1.0 + 1e-12);
        }
    }
    passed &= prox_ok;
    notes.push(format!("prox nonexpansive {prox_ok}"));

    // CG orthogonality rᵀd = 0 along the iterates.
    let mut worst_orth: f64 = 0.0;
    for seed in 0..20u64 {
        let mut r = rng::stream(seed, 0, Purpose::Data);
        let b = Matrix::from_fn(30, 30, |_, _| r.random_range(-1.0..1.0));
        // Spectrum in about [1, 5], like the regularized systems the solvers build.
        let a = &b * b.transpose() / 30.0 + Matrix::identity(30, 30);
        let g = Vector::from_fn(30, |_, _| r.random_range(-1.0..1.0));
        let mut iterates = Vec::new();
        let _ = cg_solve_observed(&a, &g, 1e-12, 30, &mut |_, d| iterates.push(d.clone())).unwrap();
        for d in iterates {
            let res = &a * &d + &g;
            let scale = (a.norm() * d.norm() + g.norm()) * d.norm();
            if scale > 0.0 {
                worst_orth = worst_orth.max(res.dot(&d).abs() / scale);
            }
        }
    }
    passed &= worst_orth <= 1e-10;
    notes.push(format!("cg scaled |r.d| {worst_orth:.1e}"));

    // Adversarial oracle post-checks, 1000 seeded calls per mode.
    let p = student_t(DEFAULT_LAMBDA, 0);
    let audited = p.audited();
    let mut fails = [0usize; 4];
    for call in 0..1000u64 {
        let x = Vector::from_fn(50, |_, _| rs.random_range(-1.0..1.0));
        let contexts = [
            EstimateContext::Composite {
                nonsmooth: &p.nonsmooth,
                eps: 1e-3,
            },
            EstimateContext::Unconstrained { eps: 1e-3 },
            EstimateContext::StronglyConvex {
                sigma: 1.0,
                lipschitz_grad: 1.0,
                theta: 0.5,
                eps: 1e-3,
            },
            EstimateContext::Sosp { eps_g: 1e-2, eps_h: 0.1 },
        ];
        for (i, ctx) in contexts.iter().enumerate() {
            let dg = if i == 2 { 0.9 } else { 0.25 };
            let dh = if i == 2 { 0.5 } else { 0.5 };
            let policy = InexactnessPolicy::adversarial(dg, dh, call);
            let oracle = Oracle::new(&audited, policy).unwrap();
            let est = oracle.estimate(&x, call as usize, ctx, None).unwrap();
            let check = verify_estimate(p.smooth(), &x, &est, ctx);
            if !(check.gradient_ok() && check.hessian_ok()) {
                fails[i] += 1;
            }
        }
    }
    passed &= fails.iter().all(|&f| f == 0);
    notes.push(format!("adversarial post-check failures per mode {fails:?}"));

    // Raw noise generators against their own contracts.
    let mut raw_fail = 0;
    let mut r = rng::stream(77, 0, Purpose::GradientNoise);
    for _ in 0..1000 {
        let grad = Vector::from_fn(8, |_, _| r.random_range(-1.0..1.0));
        let noisy = adversarial_gradient(&grad, 0.3, GradientNoiseModel::Relative, &mut r);
        if (&noisy.g - &grad).norm() > 0.3 * noisy.g.norm() * (1.0 + 1e-12) {
            raw_fail += 1;
        }
        let h = Matrix::from_fn(8, 8, |i, j| ((i + j) as f64).sin());
        let h = (&h + h.transpose()) * 0.5;
        let q = adversarial_hessian(&h, 0.2, 0.2, &mut r);
        if hessian_error(&q, &h) > 0.2 * (1.0 + 1e-10) {
            raw_fail += 1;
        }
    }
    passed &= raw_fail == 0;
    notes.push(format!("raw generator failures {raw_fail}"));
    let _ = OracleMode::Adversarial;

    report(11, passed, &notes.join(", "));
    assert!(passed);
}
