//! Executable invariant suites behind `unified-momentum verify`.

use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::algorithms::{
    collinearity_residual, gamma0_for_t0, nag_c_coefficients, run_original_nag_with, run_scheme, run_scheme_with,
    RunOptions, SchemeCoefficients, SchemeKind,
};
use crate::dynamics::{
    integrate_flow, integrate_nag_g, ode_residual, verify_time_dilation, FlowSpec, PreparedFlow,
};
use crate::error::{Error, Result};
use crate::hyperbolic::{cothc, estimate_cp, sinhc, HigherHyperbolicTable};
use crate::kernels::{
    build_hf, build_hg, check_anti_transpose, check_anti_transpose_discrete, integro_differential_residual,
    kernel_from_bc, kernel_limit_convergence, nag_c_matrix, run_fsfo, DifferentialKernel,
};
use crate::problems::{make_logistic, make_toy_quadratic, synth_logistic, CenteredLogistic, Objective, Quadratic, Vector};
use crate::tensor::{ak_lower_bounds, min_m_residual, run_tensor, TensorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Hyperbolic,
    Discrete,
    Tensor,
    Dynamics,
    Kernels,
    All,
}

impl Suite {
    pub const EACH: [Suite; 5] = [Suite::Hyperbolic, Suite::Discrete, Suite::Tensor, Suite::Dynamics, Suite::Kernels];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Hyperbolic => "hyperbolic",
            Suite::Discrete => "discrete",
            Suite::Tensor => "tensor",
            Suite::Dynamics => "dynamics",
            Suite::Kernels => "kernels",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hyperbolic" => Suite::Hyperbolic,
            "discrete" => Suite::Discrete,
            "tensor" => Suite::Tensor,
            "dynamics" => Suite::Dynamics,
            "kernels" => Suite::Kernels,
            "all" => Suite::All,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown suite '{other}' (expected hyperbolic, discrete, tensor, dynamics, kernels or all)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> CheckResult {
    CheckResult { name: name.into(), passed: value <= threshold, value, threshold, detail: format!("{value:e} <= {threshold:e}") }
}

fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> CheckResult {
    CheckResult { name: name.into(), passed: value >= threshold, value, threshold, detail: format!("{value:e} >= {threshold:e}") }
}

fn count_zero(name: impl Into<String>, count: usize, what: &str) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: count == 0,
        value: count as f64,
        threshold: 0.0,
        detail: format!("{count} {what}"),
    }
}

/// Runs a group of checks; an error becomes one failed check.
fn group(name: &str, f: impl FnOnce(&mut Vec<CheckResult>) -> Result<()>) -> Vec<CheckResult> {
    let mut out = Vec::new();
    if let Err(e) = f(&mut out) {
        out.push(CheckResult { name: name.into(), passed: false, value: f64::NAN, threshold: f64::NAN, detail: e.to_string() });
    }
    out
}

pub fn verify_suite(suite: Suite) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::Hyperbolic => hyperbolic_checks(),
        Suite::Discrete => discrete_checks(),
        Suite::Tensor => tensor_checks(),
        Suite::Dynamics => dynamics_checks(),
        Suite::Kernels => kernel_checks(),
        Suite::All => {
            let mut all = Vec::new();
            for s in Suite::EACH {
                all.extend(verify_suite(s)?.checks.into_iter().map(|mut c| {
                    c.name = format!("{}:{}", s.as_str(), c.name);
                    c
                }));
            }
            all
        }
    };
    Ok(VerifyReport { suite, passed: checks.iter().all(|c| c.passed), checks })
}

fn toy_start() -> Vector {
    Vector::from_vec(vec![1.0, 1.0])
}

fn logistic(lambda: f64) -> Result<(CenteredLogistic, Vector)> {
    let ds = synth_logistic(100, 20, lambda, 1)?;
    let obj = make_logistic(&ds)?.centered()?;
    let x0 = obj.offset_of(&Vector::zeros(20));
    Ok((obj, x0))
}

fn hyperbolic_checks() -> Vec<CheckResult> {
    let mut out = group("c_p_estimates", |out| {
        for (p, want) in [(2u32, 0.5), (3, 0.426729038100135770), (4, 0.401495293835951737)] {
            out.push(at_most(format!("c_{p}_estimate"), (estimate_cp(p)?.value - want).abs(), 1e-4));
        }
        Ok(())
    });
    out.extend(group("sinh_2_matches_sinh", |out| {
        let table = HigherHyperbolicTable::covering(2, 10.0)?;
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let t = i as f64 * 0.01;
            worst = worst.max((table.eval(t)?.0 - t.sinh()).abs());
        }
        out.push(at_most("sinh_2_matches_sinh", worst, 1e-9));
        Ok(())
    }));
    out.extend(group("sinh_p_values", |out| {
        let t3 = HigherHyperbolicTable::covering(3, 2.0)?;
        let (s1, c1) = t3.eval(1.0)?;
        out.push(at_most("sinh_3(1)", (s1 - 1.08008523867532115).abs(), 1e-9));
        out.push(at_most("cosh_3(1)", (c1 - 1.31231110994679418).abs(), 1e-9));
        out.push(at_most("sinh_3(2)", (t3.eval(2.0)?.0 - 3.14196880262884953).abs(), 1e-9));
        let t4 = HigherHyperbolicTable::covering(4, 1.0)?;
        out.push(at_most("sinh_4(1)", (t4.eval(1.0)?.0 - 1.04607415778195179).abs(), 1e-9));
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for i in 1..40 {
            let t = i as f64 * 0.05;
            let d = (t3.eval(t + h)?.0 - t3.eval(t - h)?.0) / (2.0 * h);
            worst = worst.max((d - t3.eval(t)?.1).abs());
        }
        out.push(at_most("sinh_3_derivative_is_cosh_3", worst, 1e-6));
        Ok(())
    }));
    out.push(at_most("sinhc_removable_singularity", (sinhc(1e-9) - 1.0).abs(), 1e-15));
    out.push(at_most("cothc_removable_singularity", (cothc(1e-9) - 1.0).abs(), 1e-15));
    out.push(at_most("cothc(10)", (cothc(10.0) - 10.0000000412230725).abs(), 1e-12));
    out
}

fn discrete_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let kinds = [("constant", SchemeKind::UnifiedConstant), ("adaptive", SchemeKind::UnifiedAdaptive { t0: None })];
    out.extend(group("unified_toy", |out| {
        for mu in [0.0, 1e-4, 1e-3] {
            let obj = make_toy_quadratic(mu);
            for (name, kind) in kinds {
                let tr = run_scheme(&obj, kind, 1.0, obj.strong_convexity(), &toy_start(), 10_000)?;
                let e0 = tr.records[0].energy.max(1.0);
                out.push(count_zero(format!("energy_{name}_toy_mu{mu:e}"), tr.energy_violations(1e-10 * e0).len(), "increases"));
                out.push(count_zero(format!("bound_{name}_toy_mu{mu:e}"), tr.bound_violations().len(), "violations"));
            }
        }
        Ok(())
    }));
    out.extend(group("unified_logistic", |out| {
        for lambda in [5.0, 5e-2, 5e-4] {
            let (obj, x0) = logistic(lambda)?;
            for (name, kind) in kinds {
                let tr = run_scheme(&obj, kind, 0.01, obj.strong_convexity(), &x0, 2000)?;
                let e0 = tr.records[0].energy.max(1.0);
                out.push(count_zero(
                    format!("energy_{name}_logistic_lambda{lambda:e}"),
                    tr.energy_violations(1e-10 * e0).len(),
                    "increases",
                ));
                out.push(count_zero(format!("bound_{name}_logistic_lambda{lambda:e}"), tr.bound_violations().len(), "violations"));
            }
        }
        Ok(())
    }));
    out.extend(group("original_nag_equivalence", |out| {
        let (obj, x0) = logistic(5e-2)?;
        let (s, mu) = (0.01_f64, obj.strong_convexity());
        let t0 = s.sqrt();
        let opts = RunOptions::new(200).keep_iterates();
        let a = run_scheme_with(&obj, SchemeKind::UnifiedAdaptive { t0: Some(t0) }, s, mu, &x0, opts)?;
        let b = run_original_nag_with(&obj, s, mu, gamma0_for_t0(t0, mu), &x0, opts)?;
        let dev = a.iterates.iter().zip(&b.iterates).map(|(p, q)| (&p.x - &q.x).amax().max((&p.z - &q.z).amax())).fold(0.0, f64::max);
        out.push(at_most("original_nag_equivalence", dev, 1e-8));
        Ok(())
    }));
    out.extend(group("mu_zero_coefficients", |out| {
        let mut gen = SchemeCoefficients::new(SchemeKind::UnifiedConstant, 0.0, 1.0)?;
        let mut worst: f64 = 0.0;
        for k in 0..=1000 {
            let c = gen.next_coefficients()?;
            let (tau, delta) = nag_c_coefficients(k, 1.0);
            worst = worst.max((c.tau - tau).abs()).max((c.delta - delta).abs() / delta);
        }
        out.push(at_most("mu_zero_matches_nag_c", worst, 1e-14));
        Ok(())
    }));
    out.extend(group("collinearity", |out| {
        let (mu, s) = (1e-3, 1.0);
        for (name, kind) in kinds {
            let mut gen = SchemeCoefficients::new(kind, mu, s)?;
            let mut worst: f64 = 0.0;
            for _ in 0..1000 {
                let c = gen.next_coefficients()?;
                worst = worst.max(collinearity_residual(c.tau, c.delta, mu, s).abs());
            }
            out.push(at_most(format!("collinearity_{name}"), worst, 1e-12));
        }
        Ok(())
    }));
    out.extend(group("nag_sc_energy", |out| {
        let obj = make_toy_quadratic(1e-3);
        let tr = run_scheme(&obj, SchemeKind::NagSc, 1.0, 1e-3, &toy_start(), 2000)?;
        let e0 = tr.records[0].energy.max(1.0);
        out.push(count_zero("energy_nag_sc_toy", tr.energy_violations(1e-10 * e0).len(), "increases"));
        out.push(count_zero("bound_nag_sc_toy", tr.bound_violations().len(), "violations"));
        Ok(())
    }));
    out
}

fn tensor_checks() -> Vec<CheckResult> {
    group("tensor_p3", |out| {
        let obj = make_toy_quadratic(1e-3);
        for mu in [0.0, 1e-4] {
            let cfg = TensorConfig::new(3, 1.0, mu);
            let tr = run_tensor(&obj, &cfg, &toy_start(), 200)?;
            let e0 = tr.records[0].energy;
            out.push(count_zero(format!("energy_mu{mu:e}"), tr.energy_violations(1e-9 * e0).len(), "increases"));
            out.push(count_zero(format!("bound_mu{mu:e}"), tr.bound_violations().len(), "violations"));
            let c = cfg.c();
            let below = tr
                .records
                .iter()
                .filter(|r| {
                    let (poly, geo) = ak_lower_bounds(r.k, 3, 1.0, mu, c);
                    r.a_k.unwrap_or(f64::NAN) < poly.max(geo) * (1.0 - 1e-12)
                })
                .count();
            out.push(count_zero(format!("a_k_lower_bounds_mu{mu:e}"), below, "iterations below the lower bounds"));
            out.push(at_least(format!("m_inequality_mu{mu:e}"), min_m_residual(&tr), -1e-10));
        }
        Ok(())
    })
}

fn dynamics_checks() -> Vec<CheckResult> {
    let mut out = group("nag_sc_cosine", |out| {
        let half = Quadratic::diagonal(&[1.0])?;
        let tr = integrate_flow(&FlowSpec::NagSc { mu: 0.0 }, &half, &Vector::from_vec(vec![1.0]), 10.0, 1e-3)?;
        let dev = tr.times.iter().zip(&tr.x).map(|(t, x)| (x[0] - t.cos()).abs()).fold(0.0, f64::max);
        out.push(at_most("nag_sc_mu0_is_cosine", dev, 1e-6));
        Ok(())
    });
    out.extend(group("unified_flow", |out| {
        let obj = make_toy_quadratic(1e-3);
        let spec = FlowSpec::UnifiedNag { mu: 1e-3 };
        let tr = integrate_flow(&spec, &obj, &toy_start(), 40.0, 1e-3)?;
        out.push(count_zero("unified_flow_energy", tr.energy_violations(1e-8).len(), "increases"));
        out.push(count_zero("unified_flow_bound", tr.bound_violations().len(), "violations"));
        out.push(at_most("unified_flow_ode_residual", ode_residual(&PreparedFlow::new(spec, 40.0)?, &tr, &obj)?, 1e-6));
        Ok(())
    }));
    out.extend(group("nag_g", |out| {
        let toy = make_toy_quadratic(1e-3);
        let (lg, x0l) = logistic(5e-2)?;
        let cases: [(&str, &dyn Objective, Vector); 2] = [("toy", &toy, toy_start()), ("logistic", &lg, x0l)];
        for (name, obj, x0) in cases {
            for t_end in [5.0, 20.0] {
                let r = integrate_nag_g(obj, obj.strong_convexity(), &x0, t_end, 1e-3)?;
                out.push(at_most(format!("nag_g_bound_{name}_T{t_end}"), r.grad_norm_sq / r.bound, 1.0));
                out.push(count_zero(format!("nag_g_energy_{name}_T{t_end}"), r.energy_violations(1e-7).len(), "increases"));
            }
        }
        Ok(())
    }));
    out.extend(group("flow_relations", |out| {
        let obj = make_toy_quadratic(1e-3);
        let x0 = toy_start();
        let d = verify_time_dilation(
            &FlowSpec::Tensor { p: 3, c: 0.25, mu: 1e-3 },
            |t| 2.0 * t,
            &FlowSpec::Tensor { p: 3, c: 2.0, mu: 1e-3 },
            &obj,
            &x0,
            10.0,
            1e-3,
        )?;
        out.push(at_most("time_dilation", d, 1e-8));
        let a = integrate_flow(&FlowSpec::NagC, &obj, &x0, 20.0, 1e-3)?;
        let b = integrate_flow(&FlowSpec::UnifiedNag { mu: 1e-10 }, &obj, &x0, 20.0, 1e-3)?;
        let dev = a.x.iter().zip(&b.x).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max);
        out.push(at_most("unified_flow_mu_to_zero", dev, 1e-4));
        Ok(())
    }));
    out
}

fn kernel_checks() -> Vec<CheckResult> {
    let mut out = group("discrete_anti_transpose", |out| {
        let mut worst: f64 = 0.0;
        let mut negative = 0;
        for n in 1..=50 {
            let hf = build_hf(n)?;
            worst = worst.max(check_anti_transpose_discrete(&hf, &build_hg(n)?)?);
            negative += hf.entries.iter().filter(|v| **v < 0.0).count();
        }
        out.push(at_most("hf_hg_anti_transpose", worst, 1e-12));
        out.push(count_zero("hf_nonnegative", negative, "negative entries"));
        Ok(())
    });
    out.extend(group("continuous_anti_transpose", |out| {
        let t_end = 10.0;
        let d = check_anti_transpose(&DifferentialKernel::Ogm, &DifferentialKernel::OgmG { t_end }, t_end, 100)?;
        out.push(at_most("ogm_ogm_g", d, 1e-10));
        for mu in [0.0, 0.5] {
            let d = check_anti_transpose(
                &DifferentialKernel::UnifiedNag { mu },
                &DifferentialKernel::UnifiedNagG { mu, t_end },
                t_end,
                100,
            )?;
            out.push(at_most(format!("unified_nag_nag_g_mu{mu}"), d, 1e-10));
        }
        let d = check_anti_transpose(&DifferentialKernel::NagC, &DifferentialKernel::NagC, t_end, 100)?;
        out.push(at_least("nag_c_not_self_anti_transpose", d, 1e-2));
        Ok(())
    }));
    out.extend(group("kernel_limit", |out| {
        let pts = kernel_limit_convergence(|_, n| nag_c_matrix(n), &DifferentialKernel::NagC, 2.0, 1.0, &[1e-2, 1e-3, 1e-4])?;
        let decreasing = pts.windows(2).all(|w| w[1].deviation < w[0].deviation);
        out.push(CheckResult {
            name: "nag_c_kernel_limit_decreasing".into(),
            passed: decreasing,
            value: f64::from(u8::from(decreasing)),
            threshold: 1.0,
            detail: pts.iter().map(|p| format!("s={:e}: {:e}", p.s, p.deviation)).collect::<Vec<_>>().join(", "),
        });
        out.push(at_most("nag_c_kernel_limit_final", pts.last().map_or(f64::NAN, |p| p.deviation), 1e-2));
        Ok(())
    }));
    out.extend(group("fsfo_nag_c", |out| {
        let obj = make_toy_quadratic(1e-3);
        let x0 = toy_start();
        let tr = run_scheme_with(&obj, SchemeKind::NagC, 1.0, 0.0, &x0, RunOptions::new(50).keep_iterates())?;
        let ys = run_fsfo(&nag_c_matrix(50)?, &obj, 1.0, &x0)?;
        // iterate k+1 stores the extrapolated point y_k used to produce it
        let dev = (0..50).map(|k| (&ys[k] - &tr.iterates[k + 1].y).amax()).fold(0.0, f64::max);
        out.push(at_most("fsfo_reproduces_nag_c", dev, 1e-10));
        Ok(())
    }));
    out.extend(group("kernel_structure", |out| {
        let mut worst_ratio: f64 = 0.0;
        let mut worst_deriv: f64 = 0.0;
        let kernels = [
            DifferentialKernel::NagC,
            DifferentialKernel::NagSc { mu: 0.3 },
            DifferentialKernel::Ogm,
            DifferentialKernel::OgmG { t_end: 10.0 },
            DifferentialKernel::UnifiedNag { mu: 0.3 },
            DifferentialKernel::UnifiedNagG { mu: 0.3, t_end: 10.0 },
        ];
        for i in 1..20 {
            for j in 1..=i {
                let (t, tau) = (0.45 * i as f64, 0.45 * j as f64);
                let ogm = DifferentialKernel::Ogm.eval(t, tau)?;
                worst_ratio = worst_ratio.max((ogm - 2.0 * DifferentialKernel::NagC.eval(t, tau)?).abs());
                if j == i {
                    continue;
                }
                let h = 1e-5;
                for k in &kernels {
                    let d = (k.eval(t + h, tau)? - k.eval(t - h, tau)?) / (2.0 * h);
                    let rhs = -k.b(t).unwrap_or(f64::NAN) * k.eval(t, tau)?;
                    worst_deriv = worst_deriv.max((d - rhs).abs() / rhs.abs().max(1.0));
                }
            }
        }
        out.push(at_most("ogm_is_twice_nag_c", worst_ratio, 0.0));
        out.push(at_most("kernel_log_derivative_is_minus_b", worst_deriv, 1e-6));
        let mu: f64 = 0.3;
        let rm = mu.sqrt();
        let a = kernel_from_bc(Arc::new(|t| 3.0 / t), Arc::new(|_| 0.0));
        let b = kernel_from_bc(Arc::new(move |_| 2.0 * rm), Arc::new(|_| 0.0));
        let mut dev: f64 = 0.0;
        for (t, tau) in [(2.0, 1.0), (5.0, 0.5), (9.0, 8.5)] {
            dev = dev.max((a.eval(t, tau)? - DifferentialKernel::NagC.eval(t, tau)?).abs());
            dev = dev.max((b.eval(t, tau)? - DifferentialKernel::NagSc { mu }.eval(t, tau)?).abs());
        }
        out.push(at_most("kernel_from_bc_closed_forms", dev, 1e-9));
        Ok(())
    }));
    out.extend(group("integro_differential", |out| {
        let obj = make_toy_quadratic(1e-3);
        let mu = 1e-3;
        let tr = integrate_flow(&FlowSpec::UnifiedNag { mu }, &obj, &toy_start(), 10.0, 1e-3)?;
        let kernel = DifferentialKernel::UnifiedNag { mu };
        for t in [1.0, 5.0, 10.0] {
            let idx = tr.times.iter().position(|&v| (v - t).abs() < 1e-9).ok_or_else(|| Error::Consistency(format!("no node at t = {t}")))?;
            out.push(at_most(format!("integro_differential_t{t}"), integro_differential_residual(&kernel, &tr, &obj, idx)?, 1e-3));
        }
        Ok(())
    }));
    out
}
