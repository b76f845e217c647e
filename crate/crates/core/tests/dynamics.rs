//! Continuous-time flows against closed-form solutions and their Lyapunov
//! invariants.

use nalgebra::DVector;
use unified_momentum::dynamics::*;
use unified_momentum::problems::*;
use unified_momentum::Objective;

/// `J_1(t)` by its power series.
fn bessel_j1(t: f64) -> f64 {
    let mut term = t / 2.0;
    let mut sum = term;
    for m in 1..60 {
        term *= -(t / 2.0).powi(2) / (m as f64 * (m as f64 + 1.0));
        sum += term;
    }
    sum
}

/// `2 J_1(t) / t` at t = 1, 5, 10, computed with 30-digit arithmetic.
const NAG_C_REFERENCE: [(f64, f64); 3] = [
    (1.0, 0.88010117148986703192),
    (5.0, -0.13103165503658608882),
    (10.0, 0.0086945492337722873339),
];

fn scalar(a: f64) -> Quadratic {
    Quadratic::diagonal(&[a]).unwrap()
}

fn one() -> Vector {
    DVector::from_vec(vec![1.0])
}

#[test]
fn bessel_series_matches_reference() {
    for (t, v) in NAG_C_REFERENCE {
        // largest series term near t = 10 is about 700, so cancellation costs ~1e-13
        assert!((2.0 * bessel_j1(t) / t - v).abs() < 1e-12, "t = {t}");
    }
}

#[test]
fn nag_c_flow_on_scalar_quadratic() {
    // X'' + (3/t) X' + X = 0, X(0) = 1 has X(t) = 2 J_1(t) / t
    let traj = integrate_flow(&FlowSpec::NagC, &scalar(1.0), &one(), 12.0, 1e-3).unwrap();
    for (t, v) in NAG_C_REFERENCE {
        let x = traj.x_at(t).unwrap()[0];
        assert!((x - v).abs() < 1e-8, "t = {t}: {x} vs {v}");
    }
    for t in [0.5, 2.5, 7.3, 11.0] {
        let x = traj.x_at(t).unwrap()[0];
        assert!((x - 2.0 * bessel_j1(t) / t).abs() < 1e-8, "t = {t}");
    }
}

#[test]
fn nag_sc_flow_is_a_damped_oscillator() {
    // X'' + 2 sqrt(mu) X' + a X = 0, X(0) = 1, X'(0) = 0
    let (a, mu) = (1.0_f64, 0.1_f64);
    let traj = integrate_flow(&FlowSpec::NagSc { mu }, &scalar(a), &one(), 20.0, 1e-3).unwrap();
    let (r, w) = (mu.sqrt(), (a - mu).sqrt());
    for t in [0.3, 1.0, 4.0, 9.5, 20.0] {
        let exact = (-r * t).exp() * ((w * t).cos() + r / w * (w * t).sin());
        let x = traj.x_at(t).unwrap()[0];
        assert!((x - exact).abs() < 1e-11, "t = {t}: {x} vs {exact}");
    }
}

#[test]
fn unified_flow_at_mu_zero_is_nag_c() {
    let obj = make_toy_quadratic(1e-2);
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    let a = integrate_flow(&FlowSpec::NagC, &obj, &x0, 10.0, 1e-3).unwrap();
    let b = integrate_flow(&FlowSpec::UnifiedNag { mu: 0.0 }, &obj, &x0, 10.0, 1e-3).unwrap();
    assert_eq!(a.len(), b.len());
    let dev = a.x.iter().zip(&b.x).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max);
    assert!(dev < 1e-13, "{dev}");
}

#[test]
fn generic_lagrangian_reproduces_catalog_flows() {
    let obj = make_toy_quadratic(0.05);
    let x0 = DVector::from_vec(vec![1.0, -0.5]);
    let pairs = [
        (FlowSpec::NagC, FlowSpec::Lagrangian(LagrangianFlow::polynomial(2, 0.25))),
        (FlowSpec::UnifiedNag { mu: 0.05 }, FlowSpec::Lagrangian(LagrangianFlow::unified_nag(0.05))),
    ];
    for (direct, generic) in pairs {
        let a = integrate_flow(&direct, &obj, &x0, 8.0, 1e-3).unwrap();
        let b = integrate_flow(&generic, &obj, &x0, 8.0, 1e-3).unwrap();
        for t in [1.0, 4.0, 8.0] {
            let d = (a.x_at(t).unwrap() - b.x_at(t).unwrap()).amax();
            assert!(d < 1e-7, "{}: t = {t}: {d}", direct.name());
        }
    }
}

#[test]
fn damping_limits() {
    for t in [0.1, 1.0, 10.0] {
        assert!((unified_damping(0.0, t) - 3.0 / t).abs() < 1e-15);
    }
    // for large t the damping tends to sqrt(mu) (1/2 + 3/2 from the two terms with 1/t -> 0)
    let mu = 0.25_f64;
    let t = 400.0;
    let d = unified_damping(mu, t);
    let expected = mu.sqrt() / 2.0 + 3.0 / t * (mu.sqrt() * t / 2.0);
    assert!((d - expected).abs() < 1e-12, "{d} vs {expected}");
}

#[test]
fn flows_keep_energy_and_bound() {
    let mu = 1e-2;
    let obj = make_toy_quadratic(mu);
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    let specs = [
        FlowSpec::NagC,
        FlowSpec::NagSc { mu },
        FlowSpec::UnifiedNag { mu },
        FlowSpec::UnifiedNag { mu: 0.0 },
        FlowSpec::Tensor { p: 3, c: 0.25, mu },
        FlowSpec::OriginalNag { mu, gamma0: 1.0 + mu },
    ];
    for spec in specs {
        let traj = integrate_flow(&spec, &obj, &x0, 30.0, 1e-3).unwrap();
        assert!(traj.energy_violations(1e-8).is_empty(), "{}", spec.name());
        assert!(traj.bound_violations().is_empty(), "{}", spec.name());
    }
}

#[test]
fn ode_residual_is_small() {
    let obj = make_toy_quadratic(1e-2);
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    let spec = FlowSpec::UnifiedNag { mu: 1e-2 };
    let traj = integrate_flow(&spec, &obj, &x0, 20.0, 1e-3).unwrap();
    let flow = PreparedFlow::new(spec, 20.0).unwrap();
    assert!(ode_residual(&flow, &traj, &obj).unwrap() < 1e-6);
}

#[test]
fn nag_g_drives_the_gradient_down() {
    let obj = make_toy_quadratic(1e-2);
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    let g0 = obj.gradient(&x0).norm_squared();
    for (mu, t_end) in [(0.0, 10.0), (1e-2, 10.0), (1e-2, 30.0)] {
        let res = integrate_nag_g(&obj, mu, &x0, t_end, 1e-3).unwrap();
        assert!(0.5 * res.grad_norm_sq <= res.bound, "mu = {mu}, T = {t_end}");
        assert!(res.grad_norm_sq < g0);
        assert!(res.energy_violations(1e-7).is_empty(), "mu = {mu}, T = {t_end}");
        assert_eq!(*res.trajectory.times.last().unwrap(), t_end);
    }
}

#[test]
fn time_dilation_of_tensor_flow() {
    // X_2(t) = X_1(lambda t) for the polynomial flow with C scaled by lambda^p
    let obj = make_toy_quadratic(1e-2);
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    let base = LagrangianFlow::polynomial(3, 0.25);
    let lambda = 2.0;
    let dev = verify_time_dilation(
        &FlowSpec::Lagrangian(base.clone()),
        |t| lambda * t,
        &FlowSpec::Lagrangian(base.dilated(lambda)),
        &obj,
        &x0,
        5.0,
        1e-3,
    )
    .unwrap();
    assert!(dev < 1e-6, "{dev}");
}

#[test]
fn trajectory_csv_layout() {
    let obj = make_toy_quadratic(1e-2);
    let traj = integrate_flow(&FlowSpec::NagSc { mu: 1e-2 }, &obj, &DVector::from_vec(vec![1.0, 1.0]), 1.0, 0.1).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,x_1,x_2,z_1,z_2,f_gap,energy,bound\n"));
    assert_eq!(text.lines().count(), traj.len() + 1);
}

#[test]
fn invalid_inputs() {
    let obj = make_toy_quadratic(1e-2);
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    assert!(integrate_flow(&FlowSpec::NagC, &obj, &x0, 1.0, 0.0).is_err());
    assert!(integrate_flow(&FlowSpec::NagSc { mu: -1.0 }, &obj, &x0, 1.0, 1e-2).is_err());
    assert!(integrate_nag_g(&obj, 0.0, &x0, 0.05, 1e-2).is_err());
    assert!(LagrangianFlow::original_nag(1.0, 0.5).is_err());
}
