//! Higher-order (tensor) accelerated method with a p-norm mirror map.
//!
//! The distance-generating function is `h(x) = (sigma/p) |x|^p` with
//! `sigma = 2^{p-2}`, the smallest scaling for which `h` is 1-uniformly convex
//! of order `p`. For `p = 2` this is the usual `|x|^2 / 2`.

use nalgebra::Cholesky;

use crate::algorithms::{diverged, IterateState, RunTrace, SchemeId, TraceMeta, TraceRecord};
use crate::error::{Error, Result};
use crate::hyperbolic::HigherHyperbolicTable;
use crate::problems::{Matrix, Objective, Vector};

/// `h(x) = (sigma/p) |x|^p`, `grad h(x) = sigma |x|^{p-2} x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorMap {
    p: u32,
    sigma: f64,
}

impl MirrorMap {
    pub fn new(p: u32) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidInput(format!("mirror map order p = {p} must be >= 2")));
        }
        Ok(Self { p, sigma: 2f64.powi(p as i32 - 2) })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn h(&self, x: &Vector) -> f64 {
        self.sigma / self.p as f64 * x.norm().powi(self.p as i32)
    }

    pub fn grad_h(&self, x: &Vector) -> Vector {
        x * (self.sigma * x.norm().powi(self.p as i32 - 2))
    }

    /// Inverse of [`MirrorMap::grad_h`].
    pub fn grad_h_star(&self, w: &Vector) -> Vector {
        let nw = w.norm();
        if nw == 0.0 {
            return Vector::zeros(w.len());
        }
        let pf = self.p as f64;
        let r = (nw / self.sigma).powf(1.0 / (pf - 1.0));
        w * (r / nw)
    }

    /// `D_h(y, x) = h(y) - h(x) - <grad h(x), y - x>`.
    pub fn bregman(&self, y: &Vector, x: &Vector) -> f64 {
        let d = self.h(y) - self.h(x) - self.grad_h(x).dot(&(y - x));
        d.max(0.0)
    }
}

/// `D_f(y, x) - mu D_h(y, x)`; nonnegative when `f` is mu-uniformly convex relative to `h` on the pair.
pub fn relative_convexity_gap(obj: &dyn Objective, mirror: &MirrorMap, mu: f64, y: &Vector, x: &Vector) -> f64 {
    let df = obj.value(y) - obj.value(x) - obj.gradient(x).dot(&(y - x));
    df - mu * mirror.bregman(y, x)
}

/// Relative tolerance of the cubic-model secular bisection.
pub const SUBSOLVER_TOL: f64 = 1e-12;

/// Minimizer of the order-(p-1) Taylor model at `y` plus `(N/(p s)) |x - y|^p`.
///
/// `p = 2` is the gradient step `y - (s/N) grad f(y)`. For `p = 3` the step
/// `d` solves `(H + (N r / s) I) d = -grad f(y)` with `r = |d|`, found by
/// bisection on `phi(r) = |d(r)| - r`.
pub fn tensor_update(obj: &dyn Objective, y: &Vector, p: u32, s: f64, n_reg: f64) -> Result<Vector> {
    if !(n_reg > 0.0) || !(s > 0.0) {
        return Err(Error::InvalidInput(format!("tensor update needs N > 0 and s > 0 (N = {n_reg}, s = {s})")));
    }
    let g = obj.gradient(y);
    match p {
        2 => Ok(y - &g * (s / n_reg)),
        3 => {
            if g.iter().all(|&v| v == 0.0) {
                return Ok(y.clone());
            }
            let hess = obj
                .hessian(y)
                .ok_or_else(|| Error::Capability(format!("{} has no Hessian for the p = 3 model", obj.name())))?;
            let d = cubic_step(&hess, &g, n_reg / s)?;
            Ok(y + d)
        }
        _ => Err(Error::InvalidInput(format!("tensor order p = {p} is not supported (use 2 or 3)"))),
    }
}

/// Solves `(H + w r I) d = -g`, `r = |d|`, for the cubic model `g.d + d'Hd/2 + (w/3)|d|^3`.
fn cubic_step(hess: &Matrix, g: &Vector, w: f64) -> Result<Vector> {
    let n = g.len();
    let solve = |r: f64| -> Option<Vector> {
        let shifted = hess + Matrix::identity(n, n) * (w * r);
        Cholesky::new(shifted).map(|c| -c.solve(g))
    };
    // phi decreases in r; phi(0) = +inf when H is singular
    let phi = |r: f64| -> f64 {
        match solve(r) {
            Some(d) => d.norm() - r,
            None => f64::INFINITY,
        }
    };
    let mut hi = (g.norm() / w).sqrt().max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while phi(hi) > 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 || !hi.is_finite() {
            return Err(Error::Subsolver("could not bracket the cubic-model radius".into()));
        }
    }
    let mut lo = 0.0;
    if phi(lo) <= 0.0 {
        // only possible with g = 0
        return Ok(Vector::zeros(n));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= SUBSOLVER_TOL * hi {
            break;
        }
    }
    solve(hi).ok_or_else(|| Error::Subsolver("shifted Hessian is not positive definite".into()))
}

/// `<grad f(x), y - x> - M s^{1/(p-1)} |grad f(x)|^{p/(p-1)}`; nonnegative when the certificate holds.
pub fn check_m_ineq(obj: &dyn Objective, x: &Vector, y: &Vector, p: u32, s: f64, m: f64) -> f64 {
    let g = obj.gradient(x);
    let pf = p as f64;
    g.dot(&(y - x)) - m * s.powf(1.0 / (pf - 1.0)) * g.norm().powf(pf / (pf - 1.0))
}

/// `C = (1/p) (M/(p-1))^{p-1}`.
pub fn c_constant(p: u32, m: f64) -> f64 {
    let pf = p as f64;
    (m / (pf - 1.0)).powf(pf - 1.0) / pf
}

/// Largest `A` with `(A - A_k)^p <= C p^p s A^{p-1} (1 + mu A_k)`.
///
/// `G(A) = (A - A_k)^p / A^{p-1}` is increasing for `A > A_k`, so the root is bracketed
/// and bisected to relative 1e-12.
pub fn next_ak(a_k: f64, p: u32, s: f64, mu: f64, c: f64) -> Result<f64> {
    if !(a_k >= 0.0) || !(s > 0.0) || !(c > 0.0) || !(mu >= 0.0) || p < 2 {
        return Err(Error::InvalidInput(format!("next_ak(A_k = {a_k}, p = {p}, s = {s}, mu = {mu}, C = {c})")));
    }
    let pf = p as f64;
    let rhs = c * pf.powf(pf) * s * (1.0 + mu * a_k);
    let g = |a: f64| (a - a_k).powf(pf) / a.powf(pf - 1.0);
    if a_k == 0.0 {
        return Ok(rhs);
    }
    let mut hi = a_k + rhs.max(a_k * 1e-3);
    let mut guard = 0;
    while g(hi) < rhs {
        hi = a_k + 2.0 * (hi - a_k);
        guard += 1;
        if guard > 2000 {
            return Err(Error::Subsolver("A_k recursion failed to bracket".into()));
        }
    }
    let mut lo = a_k;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < rhs {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(lo)
}

/// Residual `(A_{k+1} - A_k)^p - C p^p s A_{k+1}^{p-1} (1 + mu A_k)`; nonpositive when the step condition holds.
pub fn ak_condition_residual(a_k: f64, a_next: f64, p: u32, s: f64, mu: f64, c: f64) -> f64 {
    let pf = p as f64;
    (a_next - a_k).powf(pf) - c * pf.powf(pf) * s * a_next.powf(pf - 1.0) * (1.0 + mu * a_k)
}

/// Closed form of [`next_ak`] at `p = 2`.
pub fn next_ak_p2(a_k: f64, s: f64, mu: f64, c: f64) -> f64 {
    let q = 4.0 * c * s * (1.0 + mu * a_k);
    (2.0 * a_k + q + (q * q + 4.0 * q * a_k).sqrt()) / 2.0
}

/// Comparison sequences `C s k (k+1)...(k+p-1)` and `C p^p s (1 + C^{1/p} p mu^{1/p} s^{1/p})^{k-1}`.
pub fn ak_lower_bounds(k: usize, p: u32, s: f64, mu: f64, c: f64) -> (f64, f64) {
    let pf = p as f64;
    let kf = k as f64;
    let poly = c * s * (0..p).map(|i| kf + i as f64).product::<f64>();
    let geo = if k == 0 {
        0.0
    } else {
        c * pf.powf(pf) * s * (1.0 + c.powf(1.0 / pf) * pf * mu.powf(1.0 / pf) * s.powf(1.0 / pf)).powf(kf - 1.0)
    };
    (poly, geo)
}

/// How the weights `A_k` are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AkSchedule {
    /// Largest `A_{k+1}` allowed by the step condition.
    Largest,
    /// `A_k = C s k (k+1)...(k+p-1)`, the polynomial schedule of the convex case.
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorConfig {
    pub p: u32,
    /// Regularization weight `N` of the tensor update.
    pub n_reg: f64,
    /// Certificate constant `M`.
    pub m_const: f64,
    pub s: f64,
    /// Uniform-convexity parameter of `f` relative to `h`.
    pub mu: f64,
    pub schedule: AkSchedule,
}

impl TensorConfig {
    /// `p = 3`: `N = 2, M = 1/2`; `p = 2`: `N = 1, M = 1/2`.
    pub fn new(p: u32, s: f64, mu: f64) -> Self {
        let n_reg = if p == 3 { 2.0 } else { 1.0 };
        Self { p, n_reg, m_const: 0.5, s, mu, schedule: AkSchedule::Largest }
    }

    pub fn c(&self) -> f64 {
        c_constant(self.p, self.m_const)
    }

    fn validate(&self) -> Result<()> {
        if !(self.p == 2 || self.p == 3) {
            return Err(Error::InvalidInput(format!("tensor order p = {} is not supported", self.p)));
        }
        if !(self.s > 0.0 && self.n_reg > 0.0 && self.m_const > 0.0 && self.mu >= 0.0) {
            return Err(Error::InvalidInput("tensor config needs s, N, M > 0 and mu >= 0".into()));
        }
        if self.schedule == AkSchedule::Polynomial && self.mu != 0.0 {
            return Err(Error::InvalidInput("the polynomial schedule is for mu = 0".into()));
        }
        Ok(())
    }

    /// `A_{k+1}` given `A_k` at iteration `k`.
    pub fn next_a(&self, k: usize, a_k: f64) -> Result<f64> {
        match self.schedule {
            AkSchedule::Largest => next_ak(a_k, self.p, self.s, self.mu, self.c()),
            AkSchedule::Polynomial => Ok(ak_lower_bounds(k + 1, self.p, self.s, 0.0, self.c()).0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRunState {
    pub k: usize,
    pub x: Vector,
    pub y: Vector,
    pub z: Vector,
    pub a: f64,
    pub t: f64,
}

impl TensorRunState {
    pub fn new(x0: Vector) -> Self {
        Self { k: 0, y: x0.clone(), z: x0.clone(), x: x0, a: 0.0, t: 0.0 }
    }
}

/// Output of one tensor step.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorStep {
    pub state: TensorRunState,
    /// Certificate residual of the tensor update at `y_k`.
    pub m_residual: f64,
}

/// One step of the unified tensor method with `A_{k+1}` supplied.
pub fn step_unified_tensor(
    state: &TensorRunState,
    a_next: f64,
    obj: &dyn Objective,
    mirror: &MirrorMap,
    cfg: &TensorConfig,
) -> Result<TensorStep> {
    if mirror.p() != cfg.p {
        return Err(Error::InvalidInput("mirror map order differs from the method order".into()));
    }
    if !(a_next > state.a) {
        return Err(Error::Consistency(format!("A_k must increase ({} -> {a_next})", state.a)));
    }
    let mu = cfg.mu;
    let da = a_next - state.a;
    let y = &state.x + (&state.z - &state.x) * (da / a_next);
    let x = tensor_update(obj, &y, cfg.p, cfg.s, cfg.n_reg)?;
    let m_residual = check_m_ineq(obj, &x, &y, cfg.p, cfg.s, cfg.m_const);
    let c = da / (1.0 + mu * state.a);
    let g = obj.gradient(&x);
    let w = (mirror.grad_h(&state.z) + (mirror.grad_h(&x) * mu - g) * c) / (1.0 + mu * c);
    let z = mirror.grad_h_star(&w);
    Ok(TensorStep {
        state: TensorRunState { k: state.k + 1, x, y, z, a: a_next, t: f64::NAN },
        m_residual,
    })
}

/// `E_k = (1 + mu A_k) D_h(x*, z_k) + A_k (f(x_k) - f*)`.
pub fn energy_tensor(state: &TensorRunState, obj: &dyn Objective, mirror: &MirrorMap, mu: f64) -> Result<f64> {
    let x_star = obj
        .minimizer()
        .ok_or_else(|| Error::Unsupported("tensor energy needs a known minimizer".into()))?;
    let gap = obj.gap(&state.x).ok_or_else(|| Error::Unsupported("tensor energy needs f*".into()))?;
    Ok((1.0 + mu * state.a) * mirror.bregman(&x_star, &state.z) + state.a * gap)
}

/// Maps between the weight `A` and time `t` via `A(t) = C t^p sinhc_p^p((C mu)^{1/p} t)`.
#[derive(Debug, Clone)]
pub struct WeightClock {
    p: u32,
    c: f64,
    kappa: f64,
    table: Option<HigherHyperbolicTable>,
}

impl WeightClock {
    pub fn new(p: u32, c: f64, mu: f64) -> Result<Self> {
        let kappa = (c * mu).powf(1.0 / p as f64);
        let table = if mu > 0.0 { Some(HigherHyperbolicTable::new(p)?) } else { None };
        Ok(Self { p, c, kappa, table })
    }

    pub fn a_of_t(&mut self, t: f64) -> Result<f64> {
        let pf = self.p as i32;
        match &mut self.table {
            None => Ok(self.c * t.powi(pf)),
            Some(table) => {
                let arg = self.kappa * t;
                if arg > table.range_end() {
                    table.extend_to(arg)?;
                }
                Ok(self.c * t.powi(pf) * table.sinhc_p(arg)?.powi(pf))
            }
        }
    }

    /// Inverse of [`WeightClock::a_of_t`]; NaN past the tabulated range.
    pub fn t_of_a(&mut self, a: f64) -> f64 {
        let r = (a / self.c).powf(1.0 / self.p as f64);
        match &mut self.table {
            None => r,
            Some(table) => table.inverse_sinh_p(self.kappa * r).map_or(f64::NAN, |u| u / self.kappa),
        }
    }
}

/// Runs the unified tensor method for `iterations` steps from `x0` with `A_0 = 0`.
///
/// Records carry `A_k`, the certificate residual of step `k`, and the bound
/// `E_0 / A_k`. Gradient norms are taken at `x_k`.
pub fn run_tensor(obj: &dyn Objective, cfg: &TensorConfig, x0: &Vector, iterations: usize) -> Result<RunTrace> {
    run_tensor_with(obj, cfg, x0, iterations, false)
}

pub fn run_tensor_with(
    obj: &dyn Objective,
    cfg: &TensorConfig,
    x0: &Vector,
    iterations: usize,
    keep_iterates: bool,
) -> Result<RunTrace> {
    cfg.validate()?;
    if x0.len() != obj.dim() {
        return Err(Error::InvalidInput("x0 has the wrong dimension".into()));
    }
    let mirror = MirrorMap::new(cfg.p)?;
    let mut clock = WeightClock::new(cfg.p, cfg.c(), cfg.mu)?;
    let mut params = serde_json::Map::new();
    params.insert("p".into(), cfg.p.into());
    params.insert("N".into(), cfg.n_reg.into());
    params.insert("M".into(), cfg.m_const.into());
    params.insert("C".into(), cfg.c().into());
    params.insert("sigma".into(), mirror.sigma().into());
    let meta = TraceMeta {
        scheme: SchemeId::Tensor,
        problem: obj.name(),
        s: cfg.s,
        mu: cfg.mu,
        seed: None,
        iterations,
        params,
    };
    let mut trace = RunTrace { meta, records: Vec::with_capacity(iterations + 1), iterates: Vec::new() };
    let f0 = obj.value(x0);
    let mut state = TensorRunState::new(x0.clone());
    let e0 = energy_tensor(&state, obj, &mirror, cfg.mu).unwrap_or(f64::NAN);
    let mut min_convexity_gap = f64::INFINITY;
    let x_star = obj.minimizer();
    for k in 0..=iterations {
        let step = if k < iterations {
            let a_next = cfg.next_a(k, state.a)?;
            Some(step_unified_tensor(&state, a_next, obj, &mirror, cfg)?)
        } else {
            None
        };
        if let Some(xs) = &x_star {
            let g1 = relative_convexity_gap(obj, &mirror, cfg.mu, xs, &state.x);
            let g2 = relative_convexity_gap(obj, &mirror, cfg.mu, &state.x, xs);
            min_convexity_gap = min_convexity_gap.min(g1).min(g2);
        }
        let energy = energy_tensor(&state, obj, &mirror, cfg.mu).unwrap_or(f64::NAN);
        let bound = if state.a > 0.0 { e0 / state.a } else { f64::INFINITY };
        state.t = clock.t_of_a(state.a);
        trace.records.push(TraceRecord {
            k,
            t_k: state.t,
            f_gap: obj.gap(&state.x).unwrap_or(f64::NAN),
            grad_norm: obj.gradient(&state.x).norm(),
            energy,
            bound,
            a_k: Some(state.a),
            m_residual: Some(step.as_ref().map_or(f64::NAN, |s| s.m_residual)),
        });
        if keep_iterates {
            trace.iterates.push(IterateState {
                k,
                x: state.x.clone(),
                y: state.y.clone(),
                z: state.z.clone(),
                t: state.t,
            });
        }
        let Some(step) = step else { break };
        if diverged(obj.value(&step.state.x), f0) || !step.state.z.iter().all(|v| v.is_finite()) {
            return Err(Error::DivergedRun(Box::new(trace)));
        }
        state = step.state;
    }
    trace.meta.params.insert("min_relative_convexity_gap".into(), min_convexity_gap.into());
    Ok(trace)
}

/// Smallest certificate residual over a tensor trace.
pub fn min_m_residual(trace: &RunTrace) -> f64 {
    trace.records.iter().filter_map(|r| r.m_residual).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Quadratic;

    #[test]
    fn gradient_step_for_p2() {
        let obj = Quadratic::diagonal(&[1.0]).unwrap();
        let x = tensor_update(&obj, &Vector::from_vec(vec![1.0]), 2, 0.1, 1.0).unwrap();
        assert!((x[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn first_weight_closed_form() {
        let c = c_constant(2, 0.5);
        assert!((c - 0.25).abs() < 1e-15);
        let a1 = next_ak(0.0, 2, 0.3, 0.0, c).unwrap();
        assert!((a1 - 4.0 * c * 0.3).abs() < 1e-15);
        let a3 = next_ak(0.0, 3, 0.3, 0.0, c_constant(3, 0.5)).unwrap();
        assert!((a3 - 27.0 * c_constant(3, 0.5) * 0.3).abs() < 1e-15);
    }

    #[test]
    fn p2_recursion_matches_closed_form() {
        let c = 0.25;
        let mut a = 0.0;
        for _ in 0..50 {
            let b = next_ak(a, 2, 0.1, 0.3, c).unwrap();
            let closed = next_ak_p2(a, 0.1, 0.3, c);
            assert!((b - closed).abs() <= 1e-11 * closed, "{b} vs {closed}");
            a = b;
        }
    }

    #[test]
    fn mirror_round_trip() {
        for p in [2, 3] {
            let m = MirrorMap::new(p).unwrap();
            let x = Vector::from_vec(vec![0.3, -1.2, 2.0]);
            let back = m.grad_h_star(&m.grad_h(&x));
            assert!((back - &x).norm() <= 1e-12 * x.norm());
        }
    }

    #[test]
    fn order_one_rejected() {
        assert!(MirrorMap::new(1).is_err());
    }
}
