//! Discrete schemes checked against direct transcriptions of their textbook
//! forms, plus the Lyapunov and bound invariants.

use nalgebra::DVector;
use proptest::prelude::*;
use unified_momentum::algorithms::*;
use unified_momentum::hyperbolic::{cothc, cschc, sinhc, tanhc};
use unified_momentum::problems::*;
use unified_momentum::Objective;

fn toy_start() -> Vector {
    DVector::from_vec(vec![1.0, 1.0])
}

fn logistic(lambda: f64) -> (CenteredLogistic, Vector) {
    let ds = synth_logistic(100, 20, lambda, 1).unwrap();
    let obj = make_logistic(&ds).unwrap().centered().unwrap();
    let x0 = obj.offset_of(&DVector::zeros(20));
    (obj, x0)
}

/// Momentum form `y_{k+1} = x_{k+1} + beta_k (x_{k+1} - x_k)`; returns `x_0..x_K`.
fn momentum_oracle(obj: &dyn Objective, s: f64, x0: &Vector, iters: usize, beta: impl Fn(usize) -> f64) -> Vec<Vector> {
    let mut xs = vec![x0.clone()];
    let mut y = x0.clone();
    for k in 0..iters {
        let x_next = &y - obj.gradient(&y) * s;
        y = &x_next + (&x_next - &xs[k]) * beta(k);
        xs.push(x_next);
    }
    xs
}

/// The unified NAG with the constant timestep, transcribed literally.
fn unified_oracle(obj: &dyn Objective, mu: f64, s: f64, x0: &Vector, iters: usize) -> Vec<(Vector, Vector)> {
    let iota = if mu > 0.0 { -(1.0 - (mu * s).sqrt()).ln() / (mu * s).sqrt() } else { 1.0 };
    let mut x = x0.clone();
    let mut z = x0.clone();
    let mut out = vec![(x.clone(), z.clone())];
    for k in 0..iters {
        let arg = (k as f64 + 1.0) / 2.0 * iota * (mu * s).sqrt();
        let tau = (2.0 / (iota * (k as f64 + 1.0)) * cothc(arg) - mu * s) / (1.0 - mu * s);
        let delta = iota * s * (k as f64 + 1.0) / 2.0 * tanhc(arg);
        let y = &x + (&z - &x) * tau;
        let g = obj.gradient(&y);
        x = &y - &g * s;
        z = &z + (&y * mu - &z * mu - g) * delta;
        out.push((x.clone(), z.clone()));
    }
    out
}

/// Estimate-sequence original NAG, transcribed literally; returns `(x_k, z_k)` and the bound factors.
fn original_oracle(obj: &dyn Objective, mu: f64, s: f64, gamma0: f64, x0: &Vector, iters: usize) -> (Vec<(Vector, Vector)>, Vec<f64>) {
    let mut gamma = gamma0;
    let mut x = x0.clone();
    let mut z = x0.clone();
    let mut out = vec![(x.clone(), z.clone())];
    let mut prod = vec![1.0];
    for _ in 0..iters {
        // alpha^2 / s = (1 - alpha) gamma + mu alpha, positive root
        let b = s * (gamma - mu);
        let alpha = (-b + (b * b + 4.0 * s * gamma).sqrt()) / 2.0;
        let gamma_next = (1.0 - alpha) * gamma + mu * alpha;
        let y = (&z * (alpha * gamma) + &x * gamma_next) / (gamma + mu * alpha);
        let g = obj.gradient(&y);
        x = &y - &g * s;
        z = (&z * ((1.0 - alpha) * gamma) + &y * (mu * alpha) - g * alpha) / gamma_next;
        gamma = gamma_next;
        prod.push(prod.last().unwrap() * (1.0 - alpha));
        out.push((x.clone(), z.clone()));
    }
    (out, prod)
}

fn iterates(tr: &RunTrace) -> Vec<(Vector, Vector)> {
    tr.iterates.iter().map(|s| (s.x.clone(), s.z.clone())).collect()
}

fn max_dev(a: &[(Vector, Vector)], b: &[(Vector, Vector)]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(p, q)| (&p.0 - &q.0).amax().max((&p.1 - &q.1).amax())).fold(0.0, f64::max)
}

#[test]
fn nag_c_matches_momentum_form() {
    let obj = make_toy_quadratic(1e-3);
    let tr = run_scheme_with(&obj, SchemeKind::NagC, 1.0, 0.0, &toy_start(), RunOptions::new(300).keep_iterates()).unwrap();
    let xs = momentum_oracle(&obj, 1.0, &toy_start(), 300, |k| (k as f64 - 1.0) / (k as f64 + 2.0));
    let dev = tr.iterates.iter().zip(&xs).map(|(a, b)| (&a.x - b).amax()).fold(0.0, f64::max);
    assert!(dev < 1e-13, "{dev}");
}

#[test]
fn nag_sc_matches_momentum_form() {
    let (obj, x0) = logistic(5.0);
    let (mu, s) = (obj.strong_convexity(), 0.01);
    let tr = run_scheme_with(&obj, SchemeKind::NagSc, s, mu, &x0, RunOptions::new(300).keep_iterates()).unwrap();
    let q = (mu * s).sqrt();
    let xs = momentum_oracle(&obj, s, &x0, 300, |_| (1.0 - q) / (1.0 + q));
    let dev = tr.iterates.iter().zip(&xs).map(|(a, b)| (&a.x - b).amax()).fold(0.0, f64::max);
    assert!(dev < 1e-13, "{dev}");
}

#[test]
fn unified_constant_matches_closed_form() {
    for mu in [0.0, 1e-4, 1e-3] {
        let obj = make_toy_quadratic(mu);
        let tr = run_scheme_with(&obj, SchemeKind::UnifiedConstant, 1.0, mu, &toy_start(), RunOptions::new(1000).keep_iterates()).unwrap();
        let dev = max_dev(&iterates(&tr), &unified_oracle(&obj, mu, 1.0, &toy_start(), 1000));
        assert!(dev < 1e-12, "mu = {mu}: {dev}");
    }
    let (obj, x0) = logistic(5e-2);
    let mu = obj.strong_convexity();
    let tr = run_scheme_with(&obj, SchemeKind::UnifiedConstant, 0.01, mu, &x0, RunOptions::new(500).keep_iterates()).unwrap();
    assert!(max_dev(&iterates(&tr), &unified_oracle(&obj, mu, 0.01, &x0, 500)) < 1e-12);
}

#[test]
fn unified_bound_matches_closed_form() {
    let mu = 1e-3;
    let obj = make_toy_quadratic(mu);
    let tr = run_scheme(&obj, SchemeKind::UnifiedConstant, 1.0, mu, &toy_start(), 2000).unwrap();
    let x0 = toy_start();
    let r0 = 0.5 * x0.norm_squared();
    let iota = -(1.0 - mu.sqrt()).ln() / mu.sqrt();
    for rec in tr.records.iter().skip(1) {
        let t = rec.k as f64 * iota;
        assert!((rec.t_k - t).abs() <= 1e-12 * t);
        let bound = 4.0 / (t * t) * cschc(mu.sqrt() * t / 2.0).powi(2) * r0;
        assert!((rec.bound - bound).abs() <= 1e-12 * bound, "k = {}", rec.k);
        let u = mu.sqrt() * t / 2.0;
        // the gap term alone is a lower bound on the energy
        assert!(rec.energy >= t * t / 4.0 * sinhc(u).powi(2) * rec.f_gap);
        assert!(rec.f_gap <= bound);
    }
    // t_0 = 0: the sinhc term vanishes and E_0 = |x0 - x*|^2 / 2
    assert!((tr.records[0].energy - r0).abs() < 1e-15);
}

#[test]
fn adaptive_scheme_equals_original_nag() {
    let (obj, x0) = logistic(5e-2);
    let (s, mu) = (0.01_f64, obj.strong_convexity());
    let t0 = s.sqrt();
    let gamma0 = 4.0 / (t0 * t0) * cothc(mu.sqrt() * t0 / 2.0).powi(2);
    assert!((gamma0 - gamma0_for_t0(t0, mu)).abs() <= 1e-14 * gamma0);
    let tr = run_scheme_with(&obj, SchemeKind::UnifiedAdaptive { t0: Some(t0) }, s, mu, &x0, RunOptions::new(200).keep_iterates()).unwrap();
    let (oracle, _) = original_oracle(&obj, mu, s, gamma0, &x0, 200);
    assert!(max_dev(&iterates(&tr), &oracle) <= 1e-8);
}

#[test]
fn original_nag_matches_estimate_sequence_form() {
    let obj = make_toy_quadratic(1e-3);
    let s = 1.0 / obj.smoothness();
    for gamma0 in [1e-3, 0.05, 2.0] {
        let tr = run_original_nag_with(&obj, s, 1e-3, gamma0, &toy_start(), RunOptions::new(400).keep_iterates()).unwrap();
        let (oracle, prod) = original_oracle(&obj, 1e-3, s, gamma0, &toy_start(), 400);
        let dev = max_dev(&iterates(&tr), &oracle);
        assert!(dev < 1e-10, "gamma0 = {gamma0}: {dev}");
        let c0 = obj.gap(&toy_start()).unwrap() + gamma0 / 2.0 * toy_start().norm_squared();
        for (rec, p) in tr.records.iter().zip(&prod) {
            assert!(rec.f_gap <= p * c0 * (1.0 + 1e-12), "gamma0 = {gamma0}, k = {}", rec.k);
        }
    }
}

#[test]
fn unified_mu_zero_is_nag_c() {
    let mut gen = SchemeCoefficients::new(SchemeKind::UnifiedConstant, 0.0, 0.3).unwrap();
    for k in 0..=1000 {
        let c = gen.next_coefficients().unwrap();
        let (tau, delta) = nag_c_coefficients(k, 0.3);
        assert!((c.tau - 2.0 / (k as f64 + 1.0)).abs() <= 1e-14);
        assert!((c.tau - tau).abs() <= 1e-14 && (c.delta - delta).abs() <= 1e-14 * delta);
        assert!((delta - 0.3 * (k as f64 + 1.0) / 2.0).abs() <= 1e-14 * delta);
    }
}

#[test]
fn energy_and_bound_on_benchmark_runs() {
    let kinds = [SchemeKind::UnifiedConstant, SchemeKind::UnifiedAdaptive { t0: None }];
    for mu in [0.0, 1e-4, 1e-3] {
        let obj = make_toy_quadratic(mu);
        for kind in kinds {
            let tr = run_scheme(&obj, kind, 1.0, mu, &toy_start(), 10_000).unwrap();
            assert_eq!(tr.records.len(), 10_001);
            let slack = 1e-10 * tr.records[0].energy.max(1.0);
            assert!(tr.energy_violations(slack).is_empty(), "{kind:?} mu = {mu}");
            assert!(tr.bound_violations().is_empty(), "{kind:?} mu = {mu}");
        }
    }
    for lambda in [5.0, 5e-2, 5e-4] {
        let (obj, x0) = logistic(lambda);
        for kind in kinds {
            let tr = run_scheme(&obj, kind, 0.01, obj.strong_convexity(), &x0, 2000).unwrap();
            let slack = 1e-10 * tr.records[0].energy.max(1.0);
            assert!(tr.energy_violations(slack).is_empty(), "{kind:?} lambda = {lambda}");
            assert!(tr.bound_violations().is_empty(), "{kind:?} lambda = {lambda}");
        }
    }
}

#[test]
fn two_sequence_form_of_nag_c() {
    let (tau, delta): (Vec<f64>, Vec<f64>) = (0..=20).map(|k| nag_c_coefficients(k, 1.0)).unzip();
    let (beta, gamma) = to_two_sequence(&tau, &delta, 0.0, 1.0);
    for k in 0..20 {
        assert!((beta[k] - (k as f64 - 1.0) / (k as f64 + 2.0)).abs() < 1e-15);
        assert!(gamma[k].abs() < 1e-15);
    }
}

#[test]
fn constant_timestep_satisfies_conditions() {
    let (mu, s) = (1e-3_f64, 1.0_f64);
    let iota = -(1.0 - (mu * s).sqrt()).ln() / (mu * s).sqrt();
    let t: Vec<f64> = (0..500).map(|k| k as f64 * iota * s.sqrt()).collect();
    let report = check_tk_conditions(&t, mu, s);
    assert!(report.cond1_holds() && report.cond2_holds());
}

#[test]
fn invalid_inputs_rejected() {
    let obj = make_toy_quadratic(0.1);
    assert!(matches!(SchemeCoefficients::new(SchemeKind::UnifiedConstant, 2.0, 1.0), Err(unified_momentum::Error::StepsizeTooLarge(_))));
    assert!(run_scheme(&obj, SchemeKind::NagC, 1.0, 0.0, &DVector::zeros(3), 5).is_err());
}

#[test]
fn divergence_returns_partial_trace() {
    let obj = Quadratic::diagonal(&[1.0, 1.0]).unwrap();
    match run_scheme(&obj, SchemeKind::NagC, 10.0, 0.0, &toy_start(), 10_000) {
        Err(unified_momentum::Error::DivergedRun(tr)) => assert!(!tr.records.is_empty()),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn csv_layout() {
    let obj = make_toy_quadratic(1e-3);
    let tr = run_scheme(&obj, SchemeKind::UnifiedConstant, 1.0, 1e-3, &toy_start(), 7).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("k,t_k,f_gap,grad_norm,energy,bound\n"));
    assert_eq!(text.lines().count(), 9);
}

proptest! {
    #[test]
    fn unified_coefficients_are_collinear(mu in 0.0f64..0.5, s in 0.01f64..1.0, k in 0usize..2000) {
        prop_assume!(mu * s < 0.9);
        for kind in [SchemeKind::UnifiedConstant, SchemeKind::UnifiedAdaptive { t0: None }] {
            let mut gen = SchemeCoefficients::new(kind, mu, s).unwrap();
            let mut c = gen.next_coefficients().unwrap();
            for _ in 0..k.min(300) {
                c = gen.next_coefficients().unwrap();
            }
            prop_assert!(collinearity_residual(c.tau, c.delta, mu, s).abs() < 1e-10);
            prop_assert!(c.tau > 0.0 && c.tau <= 2.0 && c.delta > 0.0);
        }
    }

    #[test]
    fn energy_decreases_on_random_quadratics(a in 0.0f64..1.0, b in 0.0f64..1.0, s in 0.1f64..1.0) {
        let obj = Quadratic::diagonal(&[a, b]).unwrap();
        let mu = obj.strong_convexity();
        for kind in [SchemeKind::UnifiedConstant, SchemeKind::UnifiedAdaptive { t0: None }, SchemeKind::NagC, SchemeKind::NagSc] {
            if matches!(kind, SchemeKind::NagSc) && mu == 0.0 {
                continue;
            }
            let tr = run_scheme(&obj, kind, s, mu, &toy_start(), 300).unwrap();
            let slack = 1e-10 * tr.records[0].energy.max(1.0);
            prop_assert!(tr.energy_violations(slack).is_empty(), "{:?}", kind);
            prop_assert!(tr.bound_violations().is_empty(), "{:?}", kind);
        }
    }
}
