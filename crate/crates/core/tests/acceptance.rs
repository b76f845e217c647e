//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1` to see them in order.

use std::time::Instant;

use nalgebra::DVector;
use unified_momentum::algorithms::*;
use unified_momentum::dynamics::*;
use unified_momentum::harness::{run_experiment, ExperimentConfig};
use unified_momentum::hyperbolic::{cschc, estimate_cp, sinhc};
use unified_momentum::kernels::*;
use unified_momentum::problems::*;
use unified_momentum::tensor::*;
use unified_momentum::Objective;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {id:2} {:4} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn toy_start() -> Vector {
    DVector::from_vec(vec![1.0, 1.0])
}

fn logistic(lambda: f64) -> (CenteredLogistic, Vector) {
    let ds = synth_logistic(100, 20, lambda, 1).unwrap();
    let obj = make_logistic(&ds).unwrap().centered().unwrap();
    let x0 = obj.offset_of(&DVector::zeros(20));
    (obj, x0)
}

/// `1/2 cosh^2(u) |z - x*|^2 + (t^2/4) sinhc^2(u) (f(x) - f*)`, `u = sqrt(mu) t / 2`.
fn energy_oracle(obj: &dyn Objective, mu: f64, t: f64, x: &Vector, z: &Vector) -> f64 {
    let u = mu.sqrt() * t / 2.0;
    let xs = obj.minimizer().unwrap();
    0.5 * u.cosh().powi(2) * (z - &xs).norm_squared() + t * t / 4.0 * sinhc(u).powi(2) * obj.gap(x).unwrap()
}

struct BenchRun {
    label: String,
    trace: RunTrace,
    obj_energy: Vec<f64>,
    oracle_bound: Vec<f64>,
}

/// Label, objective, start point, step size and iteration count.
type BenchProblem = (String, Box<dyn Objective>, Vector, f64, usize);

/// The twelve runs of criteria 1 and 2 with independently recomputed energies and bounds.
fn benchmark_runs() -> (Vec<BenchRun>, f64) {
    let kinds = [("constant", SchemeKind::UnifiedConstant), ("adaptive", SchemeKind::UnifiedAdaptive { t0: None })];
    let mut problems: Vec<BenchProblem> = Vec::new();
    for mu in [0.0, 1e-4, 1e-3] {
        problems.push((format!("toy mu={mu}"), Box::new(make_toy_quadratic(mu)), toy_start(), 1.0, 10_000));
    }
    for lambda in [5.0, 5e-2, 5e-4] {
        let (obj, x0) = logistic(lambda);
        problems.push((format!("logistic lambda={lambda}"), Box::new(obj), x0, 0.01, 2000));
    }
    let mut runs = Vec::new();
    let mut elapsed = 0.0;
    for (name, obj, x0, s, iters) in &problems {
        let mu = obj.strong_convexity();
        for (kname, kind) in kinds {
            let start = Instant::now();
            let trace = run_scheme_with(obj.as_ref(), kind, *s, mu, x0, RunOptions::new(*iters).keep_iterates()).unwrap();
            elapsed += start.elapsed().as_secs_f64();
            let e: Vec<f64> = trace.iterates.iter().map(|it| energy_oracle(obj.as_ref(), mu, it.t, &it.x, &it.z)).collect();
            let e0 = e[0];
            let b = trace
                .iterates
                .iter()
                .map(|it| if it.t == 0.0 { f64::INFINITY } else { 4.0 / (it.t * it.t) * cschc(mu.sqrt() * it.t / 2.0).powi(2) * e0 })
                .collect();
            runs.push(BenchRun { label: format!("{name} {kname}"), trace, obj_energy: e, oracle_bound: b });
        }
    }
    (runs, elapsed)
}

#[test]
fn criterion_01_lyapunov_monotonicity() {
    let (runs, elapsed) = benchmark_runs();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for r in &runs {
        let slack = 1e-10 * r.obj_energy[0].max(1.0);
        let inc = r.obj_energy.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(inc / r.obj_energy[0].max(1.0));
        if inc > slack || !r.trace.energy_violations(1e-10).is_empty() {
            failures.push(r.label.clone());
        }
        // library column agrees with the oracle
        for (rec, e) in r.trace.records.iter().zip(&r.obj_energy) {
            if (rec.energy - e).abs() > 1e-12 * r.obj_energy[0].max(1.0) + 1e-9 * e.abs() {
                failures.push(format!("{} energy column at k = {}", r.label, rec.k));
                break;
            }
        }
    }
    let pass = failures.is_empty() && elapsed < 10.0;
    report(1, "Lyapunov monotonicity", pass, format!("12 runs, max relative increase {worst:.2e}, runtime {elapsed:.2} s, failures {failures:?}"));
}

#[test]
fn criterion_02_convergence_bound() {
    let (runs, _) = benchmark_runs();
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for r in &runs {
        for (rec, b) in r.trace.records.iter().zip(&r.oracle_bound) {
            if !(rec.f_gap <= *b) {
                violations += 1;
            }
            if b.is_finite() && *b > 0.0 {
                worst_ratio = worst_ratio.max(rec.f_gap / b);
            }
        }
        violations += r.trace.bound_violations().len();
    }
    report(2, "convergence bound", violations == 0, format!("{violations} violations, max gap/bound {worst_ratio:.3}"));
}

#[test]
fn criterion_03_original_nag_equivalence() {
    let (obj, x0) = logistic(5e-2);
    let (s, mu) = (0.01_f64, obj.strong_convexity());
    let t0 = s.sqrt();
    let gamma0 = 4.0 / (t0 * t0) * unified_momentum::hyperbolic::cothc(mu.sqrt() * t0 / 2.0).powi(2);
    let a = run_scheme_with(&obj, SchemeKind::UnifiedAdaptive { t0: Some(t0) }, s, mu, &x0, RunOptions::new(200).keep_iterates()).unwrap();
    let b = run_original_nag_with(&obj, s, mu, gamma0, &x0, RunOptions::new(200).keep_iterates()).unwrap();
    let dev = a
        .iterates
        .iter()
        .zip(&b.iterates)
        .map(|(p, q)| (&p.x - &q.x).amax().max((&p.z - &q.z).amax()))
        .fold(0.0, f64::max);
    let rows_match = a.iterates.len() == 201 && b.iterates.len() == 201;
    report(3, "original NAG equivalence", rows_match && dev <= 1e-8, format!("max deviation {dev:.2e} over 200 iterations"));
}

#[test]
fn criterion_04_mu_zero_exactness() {
    let s = 0.37;
    let mut gen = SchemeCoefficients::new(SchemeKind::UnifiedConstant, 0.0, s).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..=1000 {
        let c = gen.next_coefficients().unwrap();
        let kf = k as f64;
        worst = worst.max((c.tau - 2.0 / (kf + 1.0)).abs()).max((c.delta - s * (kf + 1.0) / 2.0).abs());
    }
    report(4, "mu = 0 exactness", worst <= 1e-14, format!("max coefficient deviation {worst:.2e} for k <= 1000"));
}

#[test]
fn criterion_05_nag_sc_ode_cosine() {
    let obj = Quadratic::diagonal(&[1.0]).unwrap();
    let traj = integrate_flow(&FlowSpec::NagSc { mu: 0.0 }, &obj, &DVector::from_vec(vec![1.0]), 10.0, 1e-3).unwrap();
    let worst = traj.times.iter().zip(&traj.x).map(|(t, x)| (x[0] - t.cos()).abs()).fold(0.0, f64::max);
    let covers = *traj.times.last().unwrap() == 10.0;
    report(5, "NAG-SC ODE closed form", covers && worst <= 1e-6, format!("max |X(t) - cos t| = {worst:.2e} on [0, 10]"));
}

#[test]
fn criterion_06_continuous_lyapunov() {
    let mu = 1e-3;
    let obj = make_toy_quadratic(mu);
    let start = Instant::now();
    let traj = integrate_flow(&FlowSpec::UnifiedNag { mu }, &obj, &toy_start(), 40.0, 1e-3).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let e: Vec<f64> = traj.times.iter().zip(traj.x.iter().zip(&traj.z)).map(|(&t, (x, z))| energy_oracle(&obj, mu, t, x, z)).collect();
    let inc = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let r0 = toy_start().norm_squared();
    let mut violations = 0;
    for (&t, gap) in traj.times.iter().zip(&traj.f_gap) {
        if t > 0.0 && !(*gap <= 2.0 / (t * t) * cschc(mu.sqrt() * t / 2.0).powi(2) * r0) {
            violations += 1;
        }
    }
    let pass = inc <= 1e-8 && violations == 0 && traj.energy_violations(1e-8).is_empty() && elapsed < 5.0;
    report(6, "continuous Lyapunov and bound", pass, format!("max step increase {inc:.2e}, {violations} bound violations, runtime {elapsed:.2} s"));
}

#[test]
fn criterion_07_nag_g_gradient_bound() {
    let toy = make_toy_quadratic(1e-3);
    let (lg, xl) = logistic(5e-2);
    let cases: [(&str, &dyn Objective, Vector); 2] = [("toy", &toy, toy_start()), ("logistic", &lg, xl)];
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, obj, x0) in cases {
        let mu = obj.strong_convexity();
        assert!(mu > 0.0);
        for t_end in [5.0, 20.0] {
            let r = integrate_nag_g(obj, mu, &x0, t_end, 1e-3).unwrap();
            let g2 = obj.gradient(&r.x_end).norm_squared();
            // the sharper form with f(X(T)) in place of f*
            let bound = 8.0 / (t_end * t_end)
                * cschc(mu.sqrt() * t_end / 2.0).powi(2)
                * (obj.value(&x0) - obj.value(&r.x_end) + mu / 2.0 * (&x0 - &r.x_end).norm_squared());
            worst = worst.max(g2 / bound);
            if !(g2 <= bound && r.grad_norm_sq <= r.bound) || !r.energy_violations(1e-7).is_empty() {
                failures.push(format!("{name} T={t_end}"));
            }
        }
    }
    report(7, "NAG-G gradient-norm bound", failures.is_empty(), format!("max |grad|^2 / bound {worst:.3}, failures {failures:?}"));
}

#[test]
fn criterion_08_anti_transpose() {
    let mut discrete: f64 = 0.0;
    for n in 1..=50 {
        discrete = discrete.max(check_anti_transpose_discrete(&build_hf(n).unwrap(), &build_hg(n).unwrap()).unwrap());
    }
    let t_end = 10.0;
    let mut continuous: f64 = 0.0;
    for (a, b, mu) in [("ogm", "ogm_g", 0.0), ("unified_nag", "unified_nag_g", 0.0), ("unified_nag", "unified_nag_g", 0.5)] {
        let k1 = kernel_closed_form(a, mu, t_end).unwrap();
        let k2 = kernel_closed_form(b, mu, t_end).unwrap();
        continuous = continuous.max(check_anti_transpose(&k1, &k2, t_end, 100).unwrap());
    }
    let pass = discrete <= 1e-12 && continuous <= 1e-10;
    report(8, "anti-transpose", pass, format!("discrete {discrete:.2e} (N = 1..50), continuous {continuous:.2e} (100 x 100)"));
}

#[test]
fn criterion_09_higher_order_hyperbolic() {
    let c2 = estimate_cp(2).unwrap().value;
    let table = unified_momentum::hyperbolic::HigherHyperbolicTable::covering(2, 10.0).unwrap();
    let mut worst: f64 = 0.0;
    // off-grid sample points exercise the interpolation as well as the nodes
    for i in 0..=3001 {
        let x = (10.0 * i as f64 / 3001.0).min(10.0);
        worst = worst.max((table.eval(x).unwrap().0 - x.sinh()).abs());
    }
    let pass = (c2 - 0.5).abs() <= 1e-4 && worst <= 1e-9;
    report(9, "higher-order hyperbolic", pass, format!("C_2 = {c2:.8}, max |sinh_2 - sinh| = {worst:.2e} on [0, 10]"));
}

#[test]
fn criterion_10_tensor_method() {
    let obj = make_toy_quadratic(1e-3);
    let (p, s, mu) = (3, 1.0, 1e-4);
    let cfg = TensorConfig::new(p, s, mu);
    let c = cfg.c();
    let tr = run_tensor(&obj, &cfg, &toy_start(), 200).unwrap();
    let e0 = tr.records[0].energy;
    let inc = tr.records.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max);
    // bound from the initial energy (1 + mu A_0) D_h(x*, x0) + A_0 gap, with A_0 = 0
    let mirror = MirrorMap::new(p).unwrap();
    let d0 = mirror.bregman(&obj.minimizer().unwrap(), &toy_start());
    let mut bound_violations = 0;
    let mut ak_violations = 0;
    for rec in &tr.records {
        let a = rec.a_k.unwrap();
        if a > 0.0 && !(rec.f_gap <= d0 / a) {
            bound_violations += 1;
        }
        let k = rec.k as f64;
        let poly = c * s * k * (k + 1.0) * (k + 2.0);
        let pf = p as f64;
        let geo = if rec.k == 0 {
            0.0
        } else {
            c * pf.powf(pf) * s * (1.0 + c.powf(1.0 / pf) * pf * mu.powf(1.0 / pf) * s.powf(1.0 / pf)).powf(k - 1.0)
        };
        if a < poly * (1.0 - 1e-12) || a < geo * (1.0 - 1e-12) {
            ak_violations += 1;
        }
    }
    let m_min = tr.records.iter().filter_map(|r| r.m_residual).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let pass = inc <= 1e-9 * e0 && bound_violations == 0 && ak_violations == 0 && m_min >= -1e-10;
    report(
        10,
        "tensor method",
        pass,
        format!("max energy increase {inc:.2e} (E_0 = {e0:.3}), {bound_violations} bound and {ak_violations} A_k violations, min M residual {m_min:.2e}"),
    );
}

#[test]
fn criterion_11_kernel_limit() {
    let kernel = kernel_closed_form("nag_c", 0.0, 10.0).unwrap();
    let steps = [1e-2, 1e-3, 1e-4];
    let pts = kernel_limit_convergence(|_, n| nag_c_matrix(n), &kernel, 2.0, 1.0, &steps).unwrap();
    let devs: Vec<f64> = pts.iter().map(|p| p.deviation).collect();
    let target_ok = (kernel.eval(2.0, 1.0).unwrap() - 0.125).abs() < 1e-16;
    let pass = target_ok && devs.windows(2).all(|w| w[1] < w[0]) && *devs.last().unwrap() <= 1e-2;
    report(11, "kernel limit", pass, format!("deviations {}", devs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")));
}

#[test]
fn criterion_12_experiment_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for (lambda, soft) in [(5.0, "unified_final_within_10x_of_nag_sc"), (5e-4, "unified_below_nag_c_bound")] {
        let out = dir.path().join(format!("lambda{lambda}"));
        let text = format!(
            r#"{{"problem": {{"type": "logistic", "m": 100, "n": 20, "lambda": {lambda}, "seed": 1}},
                "runners": [{{"type": "scheme", "scheme": "nag_c"}}, {{"type": "scheme", "scheme": "nag_sc"}},
                            {{"type": "scheme", "scheme": "unified_constant"}}],
                "s": 0.01, "iterations": 2000, "output_dir": {:?}, "checks": ["energy", "bound"]}}"#,
            out.to_str().unwrap()
        );
        let outcome = run_experiment(&ExperimentConfig::from_json(&text).unwrap()).unwrap();
        let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        let recorded = summary["soft_checks"].as_array().unwrap().iter().find(|c| c["name"] == soft).cloned();
        let holds = recorded.as_ref().is_some_and(|c| c["holds"] == true);
        let unified_gated = outcome
            .summary
            .checks
            .iter()
            .filter(|c| c.name.contains("unified"))
            .all(|c| c.passed);
        pass &= outcome.checks_passed && unified_gated && holds && outcome.exit_code() == 0;
        notes.push(format!("lambda={lambda}: {soft} {}", if holds { "holds" } else { "does not hold" }));
    }
    report(12, "experiment reproduction", pass, notes.join("; "));
}
