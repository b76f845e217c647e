//! Continuous-time models of the momentum schemes.
//!
//! Every flow except NAG-SC is integrated in the two-variable form
//!
//! ```text
//! X' = a(t) (Z - X)
//! Z' = b(t) (X - Z) - c(t) grad f(X)
//! ```
//!
//! with classical RK4 at a fixed step. Flows whose coefficients blow up at
//! `t = 0` start at `eps = 10 dt` from the local expansion
//! `X(t) = x0 - K grad f(x0) t^p`. NAG-SC is integrated in velocity form so
//! that `mu = 0` is allowed.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::algorithms::fmt_f64;
use crate::error::{Error, Result};
use crate::hyperbolic::{cothc, cschc, sinhc, tanhc, HigherHyperbolicTable};
use crate::problems::{Objective, Vector};

/// Default integration step.
pub const DEFAULT_DT: f64 = 1e-3;
/// Singular starts and ends are offset by this many steps.
pub const SINGULAR_OFFSET_STEPS: f64 = 10.0;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A Bregman Lagrangian flow with Euclidean `h`, given by `alpha(t)`, `beta(t)` and `beta'(t)`.
#[derive(Clone)]
pub struct LagrangianFlow {
    pub name: String,
    pub mu: f64,
    pub alpha: ScalarFn,
    pub beta: ScalarFn,
    pub beta_dot: ScalarFn,
    /// `(p, C)` with `e^beta ~ C t^p` near 0 when the flow starts singular.
    pub singular: Option<(u32, f64)>,
}

impl fmt::Debug for LagrangianFlow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianFlow")
            .field("name", &self.name)
            .field("mu", &self.mu)
            .field("singular", &self.singular)
            .finish_non_exhaustive()
    }
}

impl LagrangianFlow {
    /// `alpha = log(p/t)`, `beta = log(C t^p)`: the convex-case polynomial flow.
    pub fn polynomial(p: u32, c: f64) -> Self {
        let pf = p as f64;
        Self {
            name: format!("polynomial(p={p},C={c})"),
            mu: 0.0,
            alpha: Arc::new(move |t| (pf / t).ln()),
            beta: Arc::new(move |t| pf * t.ln() + c.ln()),
            beta_dot: Arc::new(move |t| pf / t),
            singular: Some((p, c)),
        }
    }

    /// `alpha = log(2/t cothc(sqrt(mu) t/2))`, `beta = log(t^2/4 sinhc^2(sqrt(mu) t/2))`.
    pub fn unified_nag(mu: f64) -> Self {
        let rm = mu.sqrt();
        Self {
            name: format!("unified_lagrangian(mu={mu})"),
            mu,
            alpha: Arc::new(move |t| (2.0 / t * cothc(rm * t / 2.0)).ln()),
            beta: Arc::new(move |t| (t * t / 4.0 * sinhc(rm * t / 2.0).powi(2)).ln()),
            beta_dot: Arc::new(move |t| 2.0 / t * cothc(rm * t / 2.0)),
            singular: Some((2, 0.25)),
        }
    }

    /// `alpha = 0`, `beta = t - log(gamma0 - mu)`: the original-NAG flow. Needs `gamma0 > mu`.
    pub fn original_nag(mu: f64, gamma0: f64) -> Result<Self> {
        if !(gamma0 > mu) {
            return Err(Error::InvalidInput(format!("gamma0 = {gamma0} must exceed mu = {mu}")));
        }
        let shift = (gamma0 - mu).ln();
        Ok(Self {
            name: format!("original_lagrangian(mu={mu},gamma0={gamma0})"),
            mu,
            alpha: Arc::new(|_| 0.0),
            beta: Arc::new(move |t| t - shift),
            beta_dot: Arc::new(|_| 1.0),
            singular: None,
        })
    }

    /// The flow reparametrized by `t -> lambda t`: `alpha(lambda t) + log lambda`, `beta(lambda t)`.
    pub fn dilated(&self, lambda: f64) -> Self {
        let (a, b, bd) = (self.alpha.clone(), self.beta.clone(), self.beta_dot.clone());
        Self {
            name: format!("{}@{lambda}t", self.name),
            mu: self.mu,
            alpha: Arc::new(move |t| a(lambda * t) + lambda.ln()),
            beta: Arc::new(move |t| b(lambda * t)),
            beta_dot: Arc::new(move |t| lambda * bd(lambda * t)),
            singular: self.singular.map(|(p, c)| (p, c * lambda.powi(p as i32))),
        }
    }
}

/// Catalog of continuous-time flows.
#[derive(Debug, Clone)]
pub enum FlowSpec {
    NagC,
    NagSc { mu: f64 },
    UnifiedNag { mu: f64 },
    Lagrangian(LagrangianFlow),
    /// Unified accelerated tensor flow with Euclidean `h`.
    Tensor { p: u32, c: f64, mu: f64 },
    /// `gamma' = mu - gamma`, `X' = Z - X`, `Z' = (mu X - mu Z - grad f(X)) / gamma`.
    OriginalNag { mu: f64, gamma0: f64 },
    /// Gradient-norm flow on `[0, T]`, singular at `T`.
    NagG { mu: f64, t_end: f64 },
}

impl FlowSpec {
    pub fn name(&self) -> String {
        match self {
            FlowSpec::NagC => "nag_c_flow".into(),
            FlowSpec::NagSc { mu } => format!("nag_sc_flow(mu={mu})"),
            FlowSpec::UnifiedNag { mu } => format!("unified_nag_flow(mu={mu})"),
            FlowSpec::Lagrangian(l) => l.name.clone(),
            FlowSpec::Tensor { p, c, mu } => format!("tensor_flow(p={p},C={c},mu={mu})"),
            FlowSpec::OriginalNag { mu, gamma0 } => format!("original_nag_flow(mu={mu},gamma0={gamma0})"),
            FlowSpec::NagG { mu, t_end } => format!("nag_g_flow(mu={mu},T={t_end})"),
        }
    }

    pub fn mu(&self) -> f64 {
        match self {
            FlowSpec::NagC => 0.0,
            FlowSpec::NagSc { mu }
            | FlowSpec::UnifiedNag { mu }
            | FlowSpec::Tensor { mu, .. }
            | FlowSpec::OriginalNag { mu, .. }
            | FlowSpec::NagG { mu, .. } => *mu,
            FlowSpec::Lagrangian(l) => l.mu,
        }
    }

    /// `(p, K)` of the start expansion `X = x0 - K grad f(x0) t^p`, for flows singular at 0.
    pub fn singular_start(&self) -> Option<(u32, f64)> {
        match self {
            FlowSpec::NagC | FlowSpec::UnifiedNag { .. } => Some((2, 0.125)),
            FlowSpec::Tensor { p, c, .. } => Some((*p, c / 2.0)),
            FlowSpec::Lagrangian(l) => l.singular.map(|(p, c)| (p, c / 2.0)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let mu = self.mu();
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidInput(format!("flow needs mu >= 0, got {mu}")));
        }
        match self {
            FlowSpec::Tensor { p, c, .. } if *p < 2 || !(*c > 0.0) => {
                Err(Error::InvalidInput("tensor flow needs p >= 2 and C > 0".into()))
            }
            FlowSpec::OriginalNag { gamma0, .. } if !(*gamma0 > 0.0) => {
                Err(Error::InvalidInput("original-NAG flow needs gamma0 > 0".into()))
            }
            FlowSpec::NagG { t_end, .. } if !(*t_end > 0.0) => Err(Error::InvalidInput("NAG-G needs T > 0".into())),
            _ => Ok(()),
        }
    }
}

/// Second-order damping of the unified NAG ODE,
/// `(sqrt(mu)/2) tanh(sqrt(mu) t/2) + (3/t) cothc(sqrt(mu) t/2)`.
pub fn unified_damping(mu: f64, t: f64) -> f64 {
    let u = mu.sqrt() * t / 2.0;
    mu.sqrt() / 2.0 * u.tanh() + 3.0 / t * cothc(u)
}

/// A flow with its precomputed order-p hyperbolic table.
#[derive(Debug, Clone)]
pub struct PreparedFlow {
    pub spec: FlowSpec,
    table: Option<HigherHyperbolicTable>,
}

impl PreparedFlow {
    pub fn new(spec: FlowSpec, t_max: f64) -> Result<Self> {
        spec.validate()?;
        let table = match &spec {
            FlowSpec::Tensor { p, c, mu } => {
                let kappa = (c * mu).powf(1.0 / *p as f64);
                Some(HigherHyperbolicTable::covering(*p, (kappa * t_max).max(1.0))?)
            }
            _ => None,
        };
        Ok(Self { spec, table })
    }

    fn tensor_parts(&self, t: f64) -> Result<(f64, f64, f64)> {
        let FlowSpec::Tensor { p, c, mu } = &self.spec else { unreachable!() };
        let table = self.table.as_ref().expect("tensor table");
        let kappa = (c * mu).powf(1.0 / *p as f64);
        let (_, cosh_p) = table.eval(kappa * t)?;
        let sinhc_p = table.sinhc_p(kappa * t)?;
        Ok((sinhc_p, cosh_p, sinhc_p / cosh_p))
    }

    /// `(a, b, c)` of the two-variable form at `t` (not defined for NAG-SC).
    pub fn coefficients(&self, t: f64) -> Result<(f64, f64, f64)> {
        Ok(match &self.spec {
            FlowSpec::NagC => (2.0 / t, 0.0, t / 2.0),
            FlowSpec::UnifiedNag { mu } => {
                let u = mu.sqrt() * t / 2.0;
                let c = t / 2.0 * tanhc(u);
                (2.0 / t * cothc(u), mu * c, c)
            }
            FlowSpec::Lagrangian(l) => {
                let eb = (l.beta)(t).exp();
                let ea = (l.alpha)(t).exp();
                let denom = 1.0 + l.mu * eb;
                (ea, l.mu * (l.beta_dot)(t) * eb / denom, ea * eb / denom)
            }
            FlowSpec::Tensor { p, c, mu } => {
                let pf = *p as f64;
                let (_, _, tanhc_p) = self.tensor_parts(t)?;
                let cc = c * pf * t.powf(pf - 1.0) * tanhc_p.powf(pf - 1.0);
                (pf / t / tanhc_p, mu * cc, cc)
            }
            FlowSpec::OriginalNag { mu, gamma0 } => {
                let gamma = mu + (gamma0 - mu) * (-t).exp();
                (1.0, mu / gamma, 1.0 / gamma)
            }
            FlowSpec::NagG { mu, t_end } => {
                let r = t_end - t;
                let u = mu.sqrt() * r / 2.0;
                let a = 2.0 / r * cothc(u);
                (a, a, r / 2.0 * tanhc(u))
            }
            FlowSpec::NagSc { .. } => {
                return Err(Error::Unsupported("NAG-SC is integrated in velocity form".into()))
            }
        })
    }

    /// `(w_z, w_f)` with `E = w_z |Z - x*|^2 / 2 + w_f (f(X) - f*)`.
    pub fn energy_weights(&self, t: f64) -> Result<(f64, f64)> {
        Ok(match &self.spec {
            FlowSpec::NagC => (1.0, t * t / 4.0),
            FlowSpec::UnifiedNag { mu } => {
                let u = mu.sqrt() * t / 2.0;
                (u.cosh().powi(2), t * t / 4.0 * sinhc(u).powi(2))
            }
            FlowSpec::Lagrangian(l) => {
                let eb = (l.beta)(t).exp();
                (1.0 + l.mu * eb, eb)
            }
            FlowSpec::Tensor { p, c, .. } => {
                let (sinhc_p, cosh_p, _) = self.tensor_parts(t)?;
                let pi = *p as i32;
                (cosh_p.powi(pi), c * t.powi(pi) * sinhc_p.powi(pi))
            }
            FlowSpec::OriginalNag { mu, gamma0 } => {
                let gamma = mu + (gamma0 - mu) * (-t).exp();
                (t.exp() * gamma, t.exp())
            }
            FlowSpec::NagSc { mu } => {
                let w = (mu.sqrt() * t).exp();
                (w * mu, w)
            }
            FlowSpec::NagG { .. } => {
                return Err(Error::Unsupported("the NAG-G energy needs X(T); see integrate_nag_g".into()))
            }
        })
    }

    /// `(damping, weight)` of the second-order form `X'' + damping X' + weight grad f(X) = 0`.
    pub fn second_order(&self, t: f64) -> Result<(f64, f64)> {
        Ok(match &self.spec {
            FlowSpec::NagSc { mu } => (2.0 * mu.sqrt(), 1.0),
            FlowSpec::UnifiedNag { mu } => (unified_damping(*mu, t), 1.0),
            FlowSpec::NagG { mu, t_end } => (unified_damping(*mu, t_end - t), 1.0),
            _ => {
                let (a, b, c) = self.coefficients(t)?;
                let h = 1e-5 * t.abs().max(1e-3);
                let a_dot = (self.coefficients(t + h)?.0 - self.coefficients(t - h)?.0) / (2.0 * h);
                (a + b - a_dot / a, a * c)
            }
        })
    }
}

/// Time-stamped samples of a flow with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub flow: String,
    pub times: Vec<f64>,
    pub x: Vec<Vector>,
    /// `Z` samples; NaN for NAG-SC at `mu = 0`.
    pub z: Vec<Vector>,
    pub xdot: Vec<Vector>,
    pub f_gap: Vec<f64>,
    pub energy: Vec<f64>,
    pub bound: Vec<f64>,
}

impl Trajectory {
    fn new(flow: String) -> Self {
        Self {
            flow,
            times: Vec::new(),
            x: Vec::new(),
            z: Vec::new(),
            xdot: Vec::new(),
            f_gap: Vec::new(),
            energy: Vec::new(),
            bound: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Node indices `i` with `E_{i+1} > E_i + slack`.
    pub fn energy_violations(&self, slack: f64) -> Vec<usize> {
        self.energy.windows(2).enumerate().filter(|(_, w)| !(w[1] <= w[0] + slack)).map(|(i, _)| i).collect()
    }

    /// Node indices where `f - f*` exceeds the bound.
    pub fn bound_violations(&self) -> Vec<usize> {
        self.f_gap.iter().zip(&self.bound).enumerate().filter(|(_, (g, b))| !(g <= b)).map(|(i, _)| i).collect()
    }

    /// Cubic Hermite interpolation of `X` at `t`.
    pub fn x_at(&self, t: f64) -> Option<Vector> {
        let n = self.times.len();
        if n < 2 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let i = match self.times.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => return Some(self.x[i].clone()),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let th = (t - t0) / h;
        let (t2, t3) = (th * th, th * th * th);
        Some(
            &self.x[i] * (2.0 * t3 - 3.0 * t2 + 1.0)
                + &self.xdot[i] * ((t3 - 2.0 * t2 + th) * h)
                + &self.x[i + 1] * (-2.0 * t3 + 3.0 * t2)
                + &self.xdot[i + 1] * ((t3 - t2) * h),
        )
    }

    /// Writes `t,x_1..x_n,z_1..z_n,f_gap,energy,bound`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.x.first().map_or(0, |v| v.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=n).map(|i| format!("z_{i}")));
        header.extend(["f_gap", "energy", "bound"].map(String::from));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![fmt_f64(self.times[i])];
            rec.extend(self.x[i].iter().map(|&v| fmt_f64(v)));
            rec.extend(self.z[i].iter().map(|&v| fmt_f64(v)));
            rec.extend([self.f_gap[i], self.energy[i], self.bound[i]].map(fmt_f64));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)
    }
}

fn rk4_step<F>(t: f64, h: f64, x: &Vector, w: &Vector, rhs: &F) -> Result<(Vector, Vector)>
where
    F: Fn(f64, &Vector, &Vector) -> Result<(Vector, Vector)>,
{
    let (k1x, k1w) = rhs(t, x, w)?;
    let (k2x, k2w) = rhs(t + h / 2.0, &(x + &k1x * (h / 2.0)), &(w + &k1w * (h / 2.0)))?;
    let (k3x, k3w) = rhs(t + h / 2.0, &(x + &k2x * (h / 2.0)), &(w + &k2w * (h / 2.0)))?;
    let (k4x, k4w) = rhs(t + h, &(x + &k3x * h), &(w + &k3w * h))?;
    Ok((
        x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0),
        w + (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (h / 6.0),
    ))
}

/// Integrates `spec` on `[0, horizon]` with step `dt` and singular offset `10 dt`.
///
/// `NagG` ignores `horizon` and runs [`integrate_nag_g`] on its own `[0, T]`.
pub fn integrate_flow(spec: &FlowSpec, obj: &dyn Objective, x0: &Vector, horizon: f64, dt: f64) -> Result<Trajectory> {
    integrate_flow_with(spec, obj, x0, horizon, dt, SINGULAR_OFFSET_STEPS * dt)
}

/// As [`integrate_flow`] with an explicit singular-start offset `eps`.
pub fn integrate_flow_with(
    spec: &FlowSpec,
    obj: &dyn Objective,
    x0: &Vector,
    horizon: f64,
    dt: f64,
    eps: f64,
) -> Result<Trajectory> {
    if let FlowSpec::NagG { mu, t_end } = spec {
        return Ok(integrate_nag_g(obj, *mu, x0, *t_end, dt)?.trajectory);
    }
    if !(dt > 0.0) || !(horizon > 0.0) || x0.len() != obj.dim() {
        return Err(Error::InvalidInput("integration needs dt > 0, horizon > 0 and a matching x0".into()));
    }
    let flow = PreparedFlow::new(spec.clone(), horizon)?;
    let g0 = obj.gradient(x0);
    let x_star = obj.minimizer();
    let f_star = obj.min_value();
    let mut traj = Trajectory::new(spec.name());

    // the state is (X, Z), or (X, V) with V = X' for NAG-SC
    let velocity = matches!(spec, FlowSpec::NagSc { .. });
    let sqrt_mu = spec.mu().sqrt();
    let rhs = |t: f64, x: &Vector, w: &Vector| -> Result<(Vector, Vector)> {
        let g = obj.gradient(x);
        if velocity {
            return Ok((w.clone(), -(w * (2.0 * sqrt_mu)) - g));
        }
        let (a, b, c) = flow.coefficients(t)?;
        let d = w - x;
        Ok((&d * a, -(&d * b) - g * c))
    };
    let xdot_of = |t: f64, x: &Vector, w: &Vector| -> Result<Vector> {
        if velocity {
            Ok(w.clone())
        } else if t == 0.0 && spec.singular_start().is_some() {
            Ok(Vector::zeros(x.len()))
        } else {
            Ok(rhs(t, x, w)?.0)
        }
    };
    let z_of = |x: &Vector, w: &Vector| -> Vector {
        if velocity {
            if sqrt_mu > 0.0 {
                x + w / sqrt_mu
            } else {
                Vector::from_element(x.len(), f64::NAN)
            }
        } else {
            w.clone()
        }
    };
    let energy_of = |t: f64, x: &Vector, w: &Vector, xdot: &Vector| -> Result<Option<(f64, f64)>> {
        let (Some(xs), Some(fs)) = (&x_star, f_star) else { return Ok(None) };
        let gap = obj.value(x) - fs;
        let (wz, wf) = flow.energy_weights(t)?;
        let e = if velocity {
            let r = xdot + (x - xs) * sqrt_mu;
            (sqrt_mu * t).exp() * (0.5 * r.norm_squared() + gap)
        } else {
            0.5 * wz * (w - xs).norm_squared() + wf * gap
        };
        Ok(Some((e, wf)))
    };

    let push = |traj: &mut Trajectory, t: f64, x: &Vector, w: &Vector, e0: &mut Option<f64>| -> Result<()> {
        let xdot = xdot_of(t, x, w)?;
        let gap = f_star.map_or(f64::NAN, |fs| obj.value(x) - fs);
        let (energy, bound) = match energy_of(t, x, w, &xdot)? {
            Some((e, wf)) => {
                let first = *e0.get_or_insert(e);
                (e, if wf > 0.0 { first / wf } else { f64::INFINITY })
            }
            None => (f64::NAN, f64::NAN),
        };
        traj.times.push(t);
        traj.z.push(z_of(x, w));
        traj.x.push(x.clone());
        traj.xdot.push(xdot);
        traj.f_gap.push(gap);
        traj.energy.push(energy);
        traj.bound.push(bound);
        Ok(())
    };

    let mut e0 = None;
    let (mut t, mut x, mut w) = (0.0, x0.clone(), if velocity { Vector::zeros(x0.len()) } else { x0.clone() });
    push(&mut traj, t, &x, &w, &mut e0)?;
    if let Some((p, k)) = spec.singular_start() {
        if !(eps > 0.0 && eps < horizon) {
            return Err(Error::InvalidInput(format!("singular offset {eps} must lie in (0, horizon)")));
        }
        let pf = p as f64;
        t = eps;
        x = x0 - &g0 * (k * eps.powf(pf));
        let xdot = -(&g0 * (pf * k * eps.powf(pf - 1.0)));
        let (a, _, _) = flow.coefficients(t)?;
        w = &x + xdot / a;
        push(&mut traj, t, &x, &w, &mut e0)?;
    }
    let tol = 1e-12 * horizon;
    while t < horizon - tol {
        let h = dt.min(horizon - t);
        let (xn, wn) = rk4_step(t, h, &x, &w, &rhs)?;
        t = if horizon - (t + h) <= tol { horizon } else { t + h };
        if !xn.iter().chain(wn.iter()).all(|v| v.is_finite()) {
            return Err(Error::DivergedFlow(Box::new(traj)));
        }
        x = xn;
        w = wn;
        push(&mut traj, t, &x, &w, &mut e0)?;
    }
    Ok(traj)
}

/// Lyapunov energy of a catalog flow at one node.
pub fn energy_continuous(
    flow: &PreparedFlow,
    t: f64,
    x: &Vector,
    z: &Vector,
    xdot: &Vector,
    obj: &dyn Objective,
) -> Result<f64> {
    let xs = obj.minimizer().ok_or_else(|| Error::Unsupported("energy needs a known minimizer".into()))?;
    let gap = obj.gap(x).ok_or_else(|| Error::Unsupported("energy needs a known minimum".into()))?;
    if let FlowSpec::NagSc { mu } = flow.spec {
        let r = xdot + (x - &xs) * mu.sqrt();
        return Ok((mu.sqrt() * t).exp() * (0.5 * r.norm_squared() + gap));
    }
    let (wz, wf) = flow.energy_weights(t)?;
    Ok(0.5 * wz * (z - &xs).norm_squared() + wf * gap)
}

/// Result of the gradient-norm flow.
#[derive(Debug, Clone)]
pub struct NagGResult {
    /// Samples on `[0, T - eps]` plus the extrapolated endpoint at `T`.
    /// The energy column holds the a-posteriori energy; the bound column the
    /// gradient-norm bound.
    pub trajectory: Trajectory,
    pub x_end: Vector,
    pub grad_norm_sq: f64,
    pub bound: f64,
    pub eps_end: f64,
}

impl NagGResult {
    /// Energy increases above `slack` on `[0, T - eps]`.
    pub fn energy_violations(&self, slack: f64) -> Vec<usize> {
        let n = self.trajectory.len() - 1;
        self.trajectory.energy[..n]
            .windows(2)
            .enumerate()
            .filter(|(_, w)| !(w[1] <= w[0] + slack))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Integrates the unified NAG-G system to `T - 10 dt` and extrapolates `X(T)`.
///
/// Near `T`, `X(t) = X(T) + grad f(X(T)) (T - t)^2 / 4 + O((T - t)^4)`, which
/// gives `X(T)` after one fixed-point pass.
pub fn integrate_nag_g(obj: &dyn Objective, mu: f64, x0: &Vector, t_end: f64, dt: f64) -> Result<NagGResult> {
    let spec = FlowSpec::NagG { mu, t_end };
    spec.validate()?;
    let eps = SINGULAR_OFFSET_STEPS * dt;
    if !(dt > 0.0) || !(eps < t_end) || x0.len() != obj.dim() {
        return Err(Error::InvalidInput("NAG-G needs 0 < 10 dt < T and a matching x0".into()));
    }
    let flow = PreparedFlow::new(spec.clone(), t_end)?;
    let rhs = |t: f64, x: &Vector, w: &Vector| -> Result<(Vector, Vector)> {
        let (a, b, c) = flow.coefficients(t)?;
        let d = w - x;
        Ok((&d * a, -(&d * b) - obj.gradient(x) * c))
    };
    let mut traj = Trajectory::new(spec.name());
    let stop = t_end - eps;
    let tol = 1e-12 * t_end;
    let (mut t, mut x, mut w) = (0.0, x0.clone(), x0.clone());
    let mut nodes = vec![(t, x.clone(), w.clone())];
    while t < stop - tol {
        let h = dt.min(stop - t);
        let (xn, wn) = rk4_step(t, h, &x, &w, &rhs)?;
        t = if stop - (t + h) <= tol { stop } else { t + h };
        if !xn.iter().chain(wn.iter()).all(|v| v.is_finite()) {
            for (tt, xx, ww) in &nodes {
                traj.times.push(*tt);
                traj.x.push(xx.clone());
                traj.z.push(ww.clone());
            }
            return Err(Error::DivergedFlow(Box::new(traj)));
        }
        x = xn;
        w = wn;
        nodes.push((t, x.clone(), w.clone()));
    }
    let x_last = &nodes.last().expect("at least one node").1;
    let first = x_last - obj.gradient(x_last) * (eps * eps / 4.0);
    let x_end = x_last - obj.gradient(&first) * (eps * eps / 4.0);
    let g_end = obj.gradient(&x_end);
    let f_end = obj.value(&x_end);
    let f0 = obj.value(x0);
    let f_star = obj.min_value();
    let u_t = mu.sqrt() * t_end / 2.0;
    let reference = f_star.unwrap_or(f_end);
    let bound = 8.0 / (t_end * t_end) * cschc(u_t).powi(2) * (f0 - reference + mu / 2.0 * (x0 - &x_end).norm_squared());

    for (t, x, w) in &nodes {
        let r = t_end - t;
        let u = mu.sqrt() * r / 2.0;
        let cs = cschc(u);
        let ct = cothc(u);
        let e = 4.0 / (r * r) * cs * cs * (obj.value(x) - f_end) - 8.0 / r.powi(4) * cs.powi(4) * (x - &x_end).norm_squared()
            + 8.0 / r.powi(4) * cs * cs * ct * ct * (w - &x_end).norm_squared();
        let (a, _, _) = flow.coefficients(*t)?;
        traj.times.push(*t);
        traj.xdot.push((w - x) * a);
        traj.x.push(x.clone());
        traj.z.push(w.clone());
        traj.f_gap.push(f_star.map_or(f64::NAN, |fs| obj.value(x) - fs));
        traj.energy.push(e);
        traj.bound.push(bound);
    }
    traj.times.push(t_end);
    traj.x.push(x_end.clone());
    traj.z.push(x_end.clone());
    traj.xdot.push(Vector::zeros(x0.len()));
    traj.f_gap.push(f_star.map_or(f64::NAN, |fs| f_end - fs));
    traj.energy.push(0.5 * g_end.norm_squared());
    traj.bound.push(bound);
    Ok(NagGResult { trajectory: traj, x_end, grad_norm_sq: g_end.norm_squared(), bound, eps_end: eps })
}

/// Largest `|X'' + damping X' + weight grad f(X)|` over interior nodes on the uniform grid,
/// with `X''` from central differences.
pub fn ode_residual(flow: &PreparedFlow, traj: &Trajectory, obj: &dyn Objective) -> Result<f64> {
    if traj.len() < 5 {
        return Err(Error::InvalidInput("residual needs at least five nodes".into()));
    }
    let mut worst: f64 = 0.0;
    for i in 1..traj.len() - 1 {
        let (tm, t, tp) = (traj.times[i - 1], traj.times[i], traj.times[i + 1]);
        let h = t - tm;
        // skip the singular buffers and the shortened last step
        if tm == 0.0 && flow.spec.singular_start().is_some() || ((tp - t) - h).abs() > 1e-9 * h {
            continue;
        }
        if let FlowSpec::NagG { t_end, .. } = flow.spec {
            if tp >= t_end {
                continue;
            }
        }
        let xdd = (&traj.x[i + 1] - &traj.x[i] * 2.0 + &traj.x[i - 1]) / (h * h);
        let (damping, weight) = flow.second_order(t)?;
        let r = xdd + &traj.xdot[i] * damping + obj.gradient(&traj.x[i]) * weight;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

/// Integrates `flow2` on `[0, horizon]` and `flow1` on `[0, T(horizon)]`, and returns
/// `max |X2(t) - X1(T(t))|` over the nodes of flow 2.
pub fn verify_time_dilation<F>(
    flow1: &FlowSpec,
    reparam: F,
    flow2: &FlowSpec,
    obj: &dyn Objective,
    x0: &Vector,
    horizon: f64,
    dt: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let end1 = reparam(horizon);
    let traj1 = integrate_flow(flow1, obj, x0, end1, dt)?;
    let traj2 = integrate_flow(flow2, obj, x0, horizon, dt)?;
    let mut worst: f64 = 0.0;
    for (t, x2) in traj2.times.iter().zip(&traj2.x) {
        let s = reparam(*t).min(end1);
        let x1 = traj1
            .x_at(s)
            .ok_or_else(|| Error::Consistency(format!("reparametrized time {s} outside flow 1")))?;
        worst = worst.max((x2 - x1).amax());
    }
    Ok(worst)
}
