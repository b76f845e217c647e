//! Discrete momentum schemes built on the three-sequence iteration
//!
//! ```text
//! y_k     = x_k + tau_k (z_k - x_k)
//! x_{k+1} = y_k - s grad f(y_k)
//! z_{k+1} = z_k + delta_k (mu y_k - mu z_k - grad f(y_k))
//! ```
//!
//! plus the original estimate-sequence NAG, which is implemented on its own
//! so it can serve as an independent check of the adaptive unified scheme.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{cothc, cschc, sinhc};
use crate::problems::{Objective, Vector};

/// A run aborts when `f(x_k)` exceeds this multiple of `max(|f(x_0)|, 1)`.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    NagC,
    NagSc,
    UnifiedConstant,
    UnifiedAdaptive,
    OriginalNag,
    Tensor,
}

impl SchemeId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeId::NagC => "nag_c",
            SchemeId::NagSc => "nag_sc",
            SchemeId::UnifiedConstant => "unified_constant",
            SchemeId::UnifiedAdaptive => "unified_adaptive",
            SchemeId::OriginalNag => "original_nag",
            SchemeId::Tensor => "tensor",
        }
    }
}

/// Scheme selection with its scheme-specific parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeKind {
    NagC,
    NagSc,
    UnifiedConstant,
    /// Adaptive timestep; `t0` defaults to `sqrt(s)`.
    UnifiedAdaptive { t0: Option<f64> },
    OriginalNag { gamma0: f64 },
}

impl SchemeKind {
    pub fn id(&self) -> SchemeId {
        match self {
            SchemeKind::NagC => SchemeId::NagC,
            SchemeKind::NagSc => SchemeId::NagSc,
            SchemeKind::UnifiedConstant => SchemeId::UnifiedConstant,
            SchemeKind::UnifiedAdaptive { .. } => SchemeId::UnifiedAdaptive,
            SchemeKind::OriginalNag { .. } => SchemeId::OriginalNag,
        }
    }
}

/// Iterates of the three-sequence scheme. `y` holds the last extrapolated point.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub k: usize,
    pub x: Vector,
    pub y: Vector,
    pub z: Vector,
    pub t: f64,
}

impl IterateState {
    pub fn new(x0: Vector) -> Self {
        Self { k: 0, y: x0.clone(), z: x0.clone(), x: x0, t: 0.0 }
    }
}

/// One step of the three-sequence scheme; returns the new state and `|grad f(y_k)|`.
pub fn step_three_sequence(
    state: &IterateState,
    tau: f64,
    delta: f64,
    mu: f64,
    s: f64,
    obj: &dyn Objective,
) -> (IterateState, f64) {
    let y = &state.x + (&state.z - &state.x) * tau;
    let g = obj.gradient(&y);
    let x = &y - &g * s;
    let z = &state.z + (&y * mu - &state.z * mu - &g) * delta;
    let gnorm = g.norm();
    (IterateState { k: state.k + 1, x, y, z, t: state.t }, gnorm)
}

/// `|1 - mu delta - (1/s - mu) tau delta|`.
pub fn collinearity_residual(tau: f64, delta: f64, mu: f64, s: f64) -> f64 {
    (1.0 - mu * delta - (1.0 / s - mu) * tau * delta).abs()
}

/// Ratio of the singular values of `[x_{k+1} - x_k, z_{k+1} - x_{k+1}]`;
/// zero when the three points are collinear.
pub fn collinearity_rank_ratio(x_k: &Vector, x_next: &Vector, z_next: &Vector) -> f64 {
    let u = x_next - x_k;
    let v = z_next - x_next;
    let scale = u.norm().max(v.norm());
    if scale == 0.0 {
        return 0.0;
    }
    let m = DMatrix::from_columns(&[u / scale, v / scale]);
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// NAG-C coefficients `tau_k = 2/(k+1)`, `delta_k = s(k+1)/2`.
pub fn nag_c_coefficients(k: usize, s: f64) -> (f64, f64) {
    let kp = (k + 1) as f64;
    (2.0 / kp, s * kp / 2.0)
}

/// NAG-SC coefficients `tau = sqrt(mu s)/(1 + sqrt(mu s))`, `delta = sqrt(s/mu)`.
pub fn nag_sc_coefficients(mu: f64, s: f64) -> (f64, f64) {
    let q = (mu * s).sqrt();
    (q / (1.0 + q), (s / mu).sqrt())
}

fn check_stepsize(mu: f64, s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidInput(format!("stepsize s = {s} must be positive")));
    }
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidInput(format!("mu = {mu} must be nonnegative")));
    }
    if mu * s >= 1.0 {
        return Err(Error::StepsizeTooLarge(mu * s));
    }
    Ok(())
}

/// `(iota, delta)` of the constant timestep `t_k = k delta`, `delta = iota sqrt(s)`.
pub fn constant_timestep(mu: f64, s: f64) -> Result<(f64, f64)> {
    check_stepsize(mu, s)?;
    let q = (mu * s).sqrt();
    let iota = if q == 0.0 { 1.0 } else { -(-q).ln_1p() / q };
    Ok((iota, iota * s.sqrt()))
}

/// One set of three-sequence coefficients and the timestep they lead to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub tau: f64,
    pub delta: f64,
    pub t_next: f64,
}

/// Unified NAG coefficients under the constant timestep.
pub fn coeffs_unified_constant(mu: f64, s: f64, k: usize) -> Result<Coefficients> {
    let (iota, dt) = constant_timestep(mu, s)?;
    let q = (mu * s).sqrt();
    let kp = (k + 1) as f64;
    let arg = kp * iota * q / 2.0;
    let tau = ((2.0 / (iota * kp)) * cothc(arg) - mu * s) / (1.0 - mu * s);
    let delta = (iota * s * kp / 2.0) * crate::hyperbolic::tanhc(arg);
    Ok(Coefficients { tau, delta, t_next: kp * dt })
}

/// `alpha(t) = (2 sqrt(s)/t) cothc(sqrt(mu) t / 2)`, infinite at `t = 0`.
pub fn alpha_of_t(t: f64, mu: f64, s: f64) -> f64 {
    if t == 0.0 {
        return f64::INFINITY;
    }
    (2.0 * s.sqrt() / t) * cothc(mu.sqrt() * t / 2.0)
}

/// Inverse of [`alpha_of_t`] on `alpha > sqrt(mu s)`:
/// `t = (2/sqrt(mu)) artanh(sqrt(mu s)/alpha)`, or `2 sqrt(s)/alpha` when `mu = 0`.
pub fn t_of_alpha(alpha: f64, mu: f64, s: f64) -> Result<f64> {
    let q = (mu * s).sqrt();
    if !(alpha > q) {
        return Err(Error::Domain(format!("alpha = {alpha} must exceed sqrt(mu s) = {q}")));
    }
    if alpha.is_infinite() {
        return Ok(0.0);
    }
    if mu == 0.0 {
        return Ok(2.0 * s.sqrt() / alpha);
    }
    Ok(2.0 / mu.sqrt() * (q / alpha).atanh())
}

/// Positive root of `alpha^2 + (a^2 - mu s) alpha - a^2 = 0`, `a = alpha_prev`.
pub fn timestep_adaptive_next(alpha_prev: f64, mu: f64, s: f64) -> Result<f64> {
    check_stepsize(mu, s)?;
    let q = (mu * s).sqrt();
    if !(alpha_prev >= q) {
        return Err(Error::Domain(format!("alpha_prev = {alpha_prev} is below sqrt(mu s) = {q}")));
    }
    if alpha_prev.is_infinite() {
        return Ok(1.0);
    }
    // sqrt(mu s) is the fixed point; rounding may land on or just under it
    Ok(positive_root(alpha_prev * alpha_prev, mu * s).max(q))
}

/// Positive root of `alpha^2 + (c - ms) alpha - c = 0` by the cancellation-free branch.
fn positive_root(c: f64, ms: f64) -> f64 {
    let b = c - ms;
    let disc = (b * b + 4.0 * c).sqrt();
    if b >= 0.0 {
        2.0 * c / (b + disc)
    } else {
        (disc - b) / 2.0
    }
}

/// Timestep after `t` when the next coefficient is `alpha`: solves
/// `(1 - alpha) A(t') = A(t)` with `A(t) = (t^2/4) sinhc^2(sqrt(mu) t / 2)`.
pub fn next_timestep(t: f64, alpha: f64, mu: f64) -> f64 {
    let growth = 1.0 / (1.0 - alpha).sqrt();
    if mu == 0.0 {
        return t * growth;
    }
    let rm = mu.sqrt();
    let u = rm * t / 2.0;
    let u_next = if u < 20.0 {
        (growth * u.sinh()).asinh()
    } else {
        // sinh(u') = c sinh(u) with both arguments large
        let guess = u + growth.ln();
        u + growth.ln() + (-(-2.0 * u).exp()).ln_1p() - (-(-2.0 * guess).exp()).ln_1p()
    };
    2.0 * u_next / rm
}

/// `A(t) = (t^2/4) sinhc^2(sqrt(mu) t / 2)`.
pub fn weight_a(t: f64, mu: f64) -> f64 {
    let sc = sinhc(mu.sqrt() * t / 2.0);
    t * t / 4.0 * sc * sc
}

/// Per-iteration coefficient generator.
#[derive(Debug, Clone)]
pub struct SchemeCoefficients {
    pub kind: SchemeKind,
    pub mu: f64,
    pub s: f64,
    k: usize,
    t: f64,
    alpha_prev: f64,
    t0: f64,
}

impl SchemeCoefficients {
    pub fn new(kind: SchemeKind, mu: f64, s: f64) -> Result<Self> {
        let mu = if kind == SchemeKind::NagC { 0.0 } else { mu };
        check_stepsize(mu, s)?;
        let (t0, alpha_prev) = match kind {
            SchemeKind::UnifiedAdaptive { t0 } => {
                let t0 = t0.unwrap_or_else(|| s.sqrt());
                if !(t0 > 0.0) {
                    return Err(Error::InvalidInput(format!("adaptive scheme needs t0 > 0, got {t0}")));
                }
                (t0, alpha_of_t(t0, mu, s))
            }
            SchemeKind::NagSc if mu == 0.0 => {
                return Err(Error::InvalidInput("NAG-SC needs mu > 0".into()));
            }
            SchemeKind::OriginalNag { .. } => {
                return Err(Error::InvalidInput("original NAG is not a three-sequence generator".into()));
            }
            _ => (0.0, f64::INFINITY),
        };
        Ok(Self { kind, mu, s, k: 0, t: t0, alpha_prev, t0 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Current `t_k`.
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Coefficients for the current `k`, advancing the generator to `k + 1`.
    pub fn next_coefficients(&mut self) -> Result<Coefficients> {
        let (mu, s, k) = (self.mu, self.s, self.k);
        let c = match self.kind {
            SchemeKind::NagC => {
                let (tau, delta) = nag_c_coefficients(k, s);
                Coefficients { tau, delta, t_next: (k + 1) as f64 * s.sqrt() }
            }
            SchemeKind::NagSc => {
                let (tau, delta) = nag_sc_coefficients(mu, s);
                Coefficients { tau, delta, t_next: (k + 1) as f64 * s.sqrt() }
            }
            SchemeKind::UnifiedConstant => coeffs_unified_constant(mu, s, k)?,
            SchemeKind::UnifiedAdaptive { .. } => {
                let alpha = timestep_adaptive_next(self.alpha_prev, mu, s)?;
                self.alpha_prev = alpha;
                Coefficients {
                    tau: (alpha - mu * s) / (1.0 - mu * s),
                    delta: s / alpha,
                    t_next: next_timestep(self.t, alpha, mu),
                }
            }
            SchemeKind::OriginalNag { .. } => unreachable!("rejected in new"),
        };
        self.k += 1;
        self.t = c.t_next;
        Ok(c)
    }
}

/// `E = 1/2 cosh^2(sqrt(mu) t/2) |z - x*|^2 + (t^2/4) sinhc^2(sqrt(mu) t/2) (f(x) - f*)`.
pub fn energy_discrete_unified(x: &Vector, z: &Vector, t: f64, obj: &dyn Objective, mu: f64) -> Result<f64> {
    let x_star = obj
        .minimizer()
        .ok_or_else(|| Error::Unsupported("energy needs a known minimizer".into()))?;
    let gap = obj.gap(x).ok_or_else(|| Error::Unsupported("energy needs a known minimum".into()))?;
    let u = mu.sqrt() * t / 2.0;
    let dist = (z - x_star).norm();
    if u < 300.0 {
        let ch = u.cosh();
        let sc = sinhc(u);
        return Ok(0.5 * (ch * dist).powi(2) + (t / 2.0 * sc).powi(2) * gap);
    }
    // cosh and sinh overflow well before the energy does
    let ln_half_e = u - std::f64::consts::LN_2;
    let scaled = |ln_w: f64, v: f64| if v == 0.0 { 0.0 } else { v.signum() * (2.0 * ln_w + v.abs().ln()).exp() };
    Ok(0.5 * scaled(ln_half_e, dist * dist) + scaled(ln_half_e - mu.sqrt().ln(), gap))
}

/// `B_k = (4/t_k^2) cschc^2(sqrt(mu) t_k/2) E_0` with `E_0` the energy at `(x_0, x_0, t_0)`.
pub fn bound_unified(t_k: f64, t_0: f64, x0: &Vector, obj: &dyn Objective, mu: f64) -> Result<f64> {
    let e0 = energy_discrete_unified(x0, x0, t_0, obj, mu)?;
    Ok(bound_from_energy(t_k, mu, e0))
}

fn bound_from_energy(t_k: f64, mu: f64, e0: f64) -> f64 {
    if t_k == 0.0 {
        return f64::INFINITY;
    }
    let c = cschc(mu.sqrt() * t_k / 2.0);
    4.0 / (t_k * t_k) * c * c * e0
}

/// Residuals of the two timestep conditions at one index; nonpositive means satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TkCheck {
    pub k: usize,
    /// `(2 sqrt(s)/t_k) cothc(sqrt(mu) t_k/2) - 1`, checked for `k >= 2`.
    pub cond2: Option<f64>,
    /// `((1 - alpha(t_{k+1})) A(t_{k+1}) - A(t_k)) / A(t_{k+1})`.
    pub cond1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TkReport {
    pub checks: Vec<TkCheck>,
    pub tol: f64,
}

impl TkReport {
    pub fn cond1_holds(&self) -> bool {
        self.checks.iter().filter_map(|c| c.cond1).all(|r| r <= self.tol)
    }

    pub fn cond2_holds(&self) -> bool {
        self.checks.iter().filter_map(|c| c.cond2).all(|r| r <= self.tol)
    }

    pub fn first_cond2_violation(&self) -> Option<usize> {
        self.checks.iter().find(|c| c.cond2.is_some_and(|r| r > self.tol)).map(|c| c.k)
    }
}

/// Evaluates both timestep conditions along `t_seq` (indexed from `k = 0`).
pub fn check_tk_conditions(t_seq: &[f64], mu: f64, s: f64) -> TkReport {
    let mut checks = Vec::with_capacity(t_seq.len());
    for (k, &t) in t_seq.iter().enumerate() {
        let cond2 = (k >= 2).then(|| alpha_of_t(t, mu, s) - 1.0);
        let cond1 = t_seq.get(k + 1).map(|&tn| {
            let an = weight_a(tn, mu);
            ((1.0 - alpha_of_t(tn, mu, s)) * an - weight_a(t, mu)) / an
        });
        checks.push(TkCheck { k, cond2, cond1 });
    }
    TkReport { checks, tol: 1e-12 }
}

/// Two-sequence momentum coefficients `(beta_k, gamma_k)` for `k < len - 1`.
pub fn to_two_sequence(tau: &[f64], delta: &[f64], mu: f64, s: f64) -> (Vec<f64>, Vec<f64>) {
    let n = tau.len().min(delta.len()).saturating_sub(1);
    let mut beta = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    for k in 0..n {
        let (t, tn, d) = (tau[k], tau[k + 1], delta[k]);
        beta.push((1.0 - t) * tn * (1.0 - mu * d) / t);
        gamma.push(tn * ((1.0 / s - mu) * d * t - 1.0 + mu * d) / t);
    }
    (beta, gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub t_k: f64,
    pub f_gap: f64,
    /// Gradient norm at the extrapolated point `y_k` (at `x_k` for the tensor method).
    pub grad_norm: f64,
    pub energy: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scheme: SchemeId,
    pub problem: String,
    pub s: f64,
    pub mu: f64,
    pub seed: Option<u64>,
    pub iterations: usize,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

/// Per-iteration diagnostics of one run; `records[k]` describes iterate `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
    /// Iterates `0..=K` when requested in [`RunOptions`].
    pub iterates: Vec<IterateState>,
}

impl RunTrace {
    /// Indices `k` with `E_{k+1} > E_k + slack * max(1, E_0)`.
    pub fn energy_violations(&self, slack: f64) -> Vec<usize> {
        let Some(first) = self.records.first() else { return Vec::new() };
        let tol = slack * first.energy.max(1.0);
        self.records
            .windows(2)
            .filter(|w| !(w[1].energy <= w[0].energy + tol))
            .map(|w| w[0].k)
            .collect()
    }

    /// Largest `E_{k+1} - E_k` over the run.
    pub fn max_energy_increase(&self) -> f64 {
        self.records.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices `k` with `f(x_k) - f* > B_k`.
    pub fn bound_violations(&self) -> Vec<usize> {
        self.records.iter().filter(|r| !(r.f_gap <= r.bound)).map(|r| r.k).collect()
    }

    pub fn final_gap(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.f_gap)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let tensor = self.records.first().is_some_and(|r| r.a_k.is_some());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k", "t_k", "f_gap", "grad_norm", "energy", "bound"];
        if tensor {
            header.extend(["A_k", "M_residual"]);
        }
        w.write_record(&header)?;
        for r in &self.records {
            let mut rec = vec![
                r.k.to_string(),
                fmt_f64(r.t_k),
                fmt_f64(r.f_gap),
                fmt_f64(r.grad_norm),
                fmt_f64(r.energy),
                fmt_f64(r.bound),
            ];
            if tensor {
                rec.push(fmt_f64(r.a_k.unwrap_or(f64::NAN)));
                rec.push(fmt_f64(r.m_residual.unwrap_or(f64::NAN)));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and the `<stem>.json` metadata sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub iterations: usize,
    pub keep_iterates: bool,
    /// Optional early stop once `|grad f(y_k)|` drops below this value.
    pub grad_tol: Option<f64>,
    pub seed: Option<u64>,
}

impl RunOptions {
    pub fn new(iterations: usize) -> Self {
        Self { iterations, keep_iterates: false, grad_tol: None, seed: None }
    }

    pub fn keep_iterates(mut self) -> Self {
        self.keep_iterates = true;
        self
    }
}

pub(crate) fn diverged(value: f64, f0: f64) -> bool {
    !value.is_finite() || value > DIVERGENCE_FACTOR * f0.abs().max(1.0)
}

/// Runs a three-sequence scheme (or the original NAG) for `iterations` steps.
pub fn run_scheme(
    obj: &dyn Objective,
    kind: SchemeKind,
    s: f64,
    mu: f64,
    x0: &Vector,
    iterations: usize,
) -> Result<RunTrace> {
    run_scheme_with(obj, kind, s, mu, x0, RunOptions::new(iterations))
}

pub fn run_scheme_with(
    obj: &dyn Objective,
    kind: SchemeKind,
    s: f64,
    mu: f64,
    x0: &Vector,
    opts: RunOptions,
) -> Result<RunTrace> {
    if let SchemeKind::OriginalNag { gamma0 } = kind {
        return run_original_nag_with(obj, s, mu, gamma0, x0, opts);
    }
    if x0.len() != obj.dim() {
        return Err(Error::InvalidInput("x0 has the wrong dimension".into()));
    }
    let mut gen = SchemeCoefficients::new(kind, mu, s)?;
    let mu = gen.mu;
    let mut params = serde_json::Map::new();
    if let SchemeKind::UnifiedAdaptive { .. } = kind {
        params.insert("t0".into(), gen.t0().into());
    }
    let meta = TraceMeta {
        scheme: kind.id(),
        problem: obj.name(),
        s,
        mu,
        seed: opts.seed,
        iterations: opts.iterations,
        params,
    };
    let mut trace = RunTrace { meta, records: Vec::with_capacity(opts.iterations + 1), iterates: Vec::new() };
    let t0 = gen.t0();
    let sc = matches!(kind, SchemeKind::NagSc);
    let f0 = obj.value(x0);
    // NAG-SC is tracked with the estimate-sequence energy at gamma = mu.
    let sc_alpha = (mu * s).sqrt();
    let e0_unified = if sc { f64::NAN } else { energy_discrete_unified(x0, x0, t0, obj, mu).unwrap_or(f64::NAN) };
    let e0_sc = estimate_energy(obj, x0, x0, mu, 0.0).unwrap_or(f64::NAN);

    let mut state = IterateState::new(x0.clone());
    state.t = t0;
    let mut log_prod = 0.0;
    let mut k = 0;
    loop {
        let coeffs = if k < opts.iterations { Some(gen.next_coefficients()?) } else { None };
        // gradient norm at y_k, evaluated with the coefficients of step k (or k = K at the end)
        let (next, gnorm) = match coeffs {
            Some(c) => {
                let (mut next, gnorm) = step_three_sequence(&state, c.tau, c.delta, mu, s, obj);
                next.t = c.t_next;
                (Some(next), gnorm)
            }
            None => {
                let c = gen.clone().next_coefficients()?;
                let y = &state.x + (&state.z - &state.x) * c.tau;
                (None, obj.gradient(&y).norm())
            }
        };
        let gap = obj.gap(&state.x).unwrap_or(f64::NAN);
        let (energy, bound) = if sc {
            let e = estimate_energy(obj, &state.x, &state.z, mu, log_prod).unwrap_or(f64::NAN);
            (e, (-log_prod).exp() * e0_sc)
        } else {
            let e = energy_discrete_unified(&state.x, &state.z, state.t, obj, mu).unwrap_or(f64::NAN);
            (e, bound_from_energy(state.t, mu, e0_unified))
        };
        trace.records.push(TraceRecord {
            k,
            t_k: state.t,
            f_gap: gap,
            grad_norm: gnorm,
            energy,
            bound,
            a_k: None,
            m_residual: None,
        });
        if opts.keep_iterates {
            trace.iterates.push(state.clone());
        }
        let Some(next) = next else { break };
        let fx = obj.value(&next.x);
        if !gnorm.is_finite() || diverged(fx, f0) {
            return Err(Error::DivergedRun(Box::new(trace)));
        }
        if opts.grad_tol.is_some_and(|tol| gnorm <= tol) {
            break;
        }
        if sc {
            log_prod -= (-sc_alpha).ln_1p();
        }
        state = next;
        k += 1;
    }
    Ok(trace)
}

/// `(f(x) - f* + (mu/2)|z - x*|^2) * exp(log_weight)`.
fn estimate_energy(obj: &dyn Objective, x: &Vector, z: &Vector, gamma: f64, log_weight: f64) -> Result<f64> {
    let x_star = obj
        .minimizer()
        .ok_or_else(|| Error::Unsupported("energy needs a known minimizer".into()))?;
    let gap = obj.gap(x).ok_or_else(|| Error::Unsupported("energy needs a known minimum".into()))?;
    let v = gap + 0.5 * gamma * (z - x_star).norm_squared();
    if v == 0.0 {
        return Ok(0.0);
    }
    Ok(v.signum() * (log_weight + v.abs().ln()).exp())
}

/// Original NAG with the estimate-sequence parameters `gamma_k`.
pub fn run_original_nag(obj: &dyn Objective, s: f64, gamma0: f64, x0: &Vector, iterations: usize) -> Result<RunTrace> {
    run_original_nag_with(obj, s, obj.strong_convexity(), gamma0, x0, RunOptions::new(iterations))
}

/// Original NAG: `gamma_{k+1} = (1 - alpha_k) gamma_k + mu alpha_k` with
/// `alpha_k^2 / s = gamma_{k+1}`,
///
/// ```text
/// y_k     = (alpha_k gamma_k z_k + gamma_{k+1} x_k) / (gamma_k + mu alpha_k)
/// x_{k+1} = y_k - s grad f(y_k)
/// z_{k+1} = ((1 - alpha_k) gamma_k z_k + mu alpha_k y_k - alpha_k grad f(y_k)) / gamma_{k+1}
/// ```
///
/// The trace carries `E_k = (f(x_k) - f* + gamma_k/2 |z_k - x*|^2) / prod(1 - alpha_i)`
/// and the bound `prod(1 - alpha_i) (f(x_0) - f* + gamma_0/2 |x_0 - x*|^2)`.
pub fn run_original_nag_with(
    obj: &dyn Objective,
    s: f64,
    mu: f64,
    gamma0: f64,
    x0: &Vector,
    opts: RunOptions,
) -> Result<RunTrace> {
    check_stepsize(mu, s)?;
    if !(gamma0 > 0.0) || !gamma0.is_finite() {
        return Err(Error::InvalidInput(format!("gamma0 = {gamma0} must be positive")));
    }
    if x0.len() != obj.dim() {
        return Err(Error::InvalidInput("x0 has the wrong dimension".into()));
    }
    let mut params = serde_json::Map::new();
    params.insert("gamma0".into(), gamma0.into());
    let meta = TraceMeta {
        scheme: SchemeId::OriginalNag,
        problem: obj.name(),
        s,
        mu,
        seed: opts.seed,
        iterations: opts.iterations,
        params,
    };
    let mut trace = RunTrace { meta, records: Vec::with_capacity(opts.iterations + 1), iterates: Vec::new() };
    let f0 = obj.value(x0);
    let e0 = estimate_energy(obj, x0, x0, gamma0, 0.0).unwrap_or(f64::NAN);
    let mut x = x0.clone();
    let mut z = x0.clone();
    let mut y = x0.clone();
    let mut gamma = gamma0;
    let mut log_prod = 0.0;
    // timestep bookkeeping for reporting only
    let mut t = if gamma0 > mu { t_of_alpha((s * gamma0).sqrt(), mu, s).unwrap_or(f64::NAN) } else { f64::NAN };
    for k in 0..=opts.iterations {
        let alpha = solve_alpha(gamma, mu, s)?;
        let gamma_next = (1.0 - alpha) * gamma + mu * alpha;
        let y_k = (&z * (alpha * gamma) + &x * gamma_next) / (gamma + mu * alpha);
        let g = obj.gradient(&y_k);
        let gnorm = g.norm();
        let gap = obj.gap(&x).unwrap_or(f64::NAN);
        let energy = estimate_energy(obj, &x, &z, gamma, log_prod).unwrap_or(f64::NAN);
        trace.records.push(TraceRecord {
            k,
            t_k: t,
            f_gap: gap,
            grad_norm: gnorm,
            energy,
            bound: (-log_prod).exp() * e0,
            a_k: None,
            m_residual: None,
        });
        if opts.keep_iterates {
            trace.iterates.push(IterateState { k, x: x.clone(), y: y.clone(), z: z.clone(), t });
        }
        if k == opts.iterations {
            break;
        }
        let x_next = &y_k - &g * s;
        let z_next = (&z * ((1.0 - alpha) * gamma) + &y_k * (mu * alpha) - &g * alpha) / gamma_next;
        if !gnorm.is_finite() || diverged(obj.value(&x_next), f0) {
            return Err(Error::DivergedRun(Box::new(trace)));
        }
        if opts.grad_tol.is_some_and(|tol| gnorm <= tol) {
            break;
        }
        log_prod -= (-alpha).ln_1p();
        t = next_timestep(t, alpha, mu);
        x = x_next;
        z = z_next;
        y = y_k;
        gamma = gamma_next;
    }
    Ok(trace)
}

/// `alpha` in `(0, 1)` with `alpha^2 / s = (1 - alpha) gamma + mu alpha`.
pub fn solve_alpha(gamma: f64, mu: f64, s: f64) -> Result<f64> {
    let alpha = positive_root(s * gamma, mu * s);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Consistency(format!(
            "alpha = {alpha} left (0, 1); check mu s < 1 and gamma0 > 0"
        )));
    }
    Ok(alpha)
}

/// `gamma_0 = (4/t0^2) cothc^2(sqrt(mu) t0 / 2)`, the original-NAG parameter matching
/// the adaptive unified scheme started at `t0`.
pub fn gamma0_for_t0(t0: f64, mu: f64) -> f64 {
    let c = cothc(mu.sqrt() * t0 / 2.0);
    4.0 / (t0 * t0) * c * c
}

/// Inverse of [`gamma0_for_t0`].
pub fn t0_for_gamma0(gamma0: f64, mu: f64, s: f64) -> Result<f64> {
    t_of_alpha((s * gamma0).sqrt(), mu, s)
}
