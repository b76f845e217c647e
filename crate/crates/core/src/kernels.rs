//! Difference matrices of fixed-step first-order methods and their
//! continuous-time limits, the differential kernels `H(t, tau)`.
//!
//! A fixed-step method runs `y_{i+1} = y_i - s sum_{j<=i} h_ij grad f(y_j)`.
//! Its kernel satisfies `X'(t) = -int_0^t H(t, tau) grad f(X(tau)) dtau`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algorithms::{diverged, fmt_f64, nag_c_coefficients, to_two_sequence};
use crate::dynamics::{unified_damping, Trajectory};
use crate::error::{Error, Result};
use crate::hyperbolic::sinhc;
use crate::problems::{Matrix, Objective, Vector};

/// `theta_0 = 1`, `theta_k = (1 + sqrt(4 theta^2 + 1))/2` for `k < N`, and
/// `theta_N = (1 + sqrt(8 theta^2 + 1))/2`.
pub fn theta_sequence(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("theta sequence needs N >= 1".into()));
    }
    let mut th = Vec::with_capacity(n + 1);
    th.push(1.0);
    for k in 1..=n {
        let prev: f64 = th[k - 1];
        let c = if k < n { 4.0 } else { 8.0 };
        th.push((1.0 + (c * prev * prev + 1.0).sqrt()) / 2.0);
    }
    Ok(th)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixOrigin {
    Ogm,
    OgmG,
    FromTwoSeq,
}

/// Lower-triangular `N x N` step-coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMatrix {
    pub entries: Matrix,
    pub origin: MatrixOrigin,
}

impl DifferenceMatrix {
    pub fn new(entries: Matrix, origin: MatrixOrigin) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::InvalidInput("difference matrix must be square".into()));
        }
        for i in 0..entries.nrows() {
            for j in 0..entries.ncols() {
                let v = entries[(i, j)];
                if !v.is_finite() || (j > i && v != 0.0) {
                    return Err(Error::InvalidInput(format!("entry ({i}, {j}) = {v} breaks lower triangularity")));
                }
            }
        }
        Ok(Self { entries, origin })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Writes the lower triangle as `i,j,h_ij`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "h_ij"])?;
        for i in 0..self.n() {
            for j in 0..=i {
                w.write_record([i.to_string(), j.to_string(), fmt_f64(self.get(i, j))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Difference matrix of OGM.
pub fn build_hf(n: usize) -> Result<DifferenceMatrix> {
    let th = theta_sequence(n)?;
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        let r = (th[i] - 1.0) / th[i + 1];
        for j in 0..i.saturating_sub(1) {
            h[(i, j)] = r * h[(i - 1, j)];
        }
        if i >= 1 {
            h[(i, i - 1)] = r * (h[(i - 1, i - 1)] - 1.0);
        }
        h[(i, i)] = 1.0 + (2.0 * th[i] - 1.0) / th[i + 1];
    }
    DifferenceMatrix::new(h, MatrixOrigin::Ogm)
}

/// Difference matrix of OGM-G. The off-diagonal ratio is indexed by the column:
/// `h_ij = r_j h_{i,j+1}` with `r_j = (theta_{N-j-1} - 1)/theta_{N-j}`.
pub fn build_hg(n: usize) -> Result<DifferenceMatrix> {
    let th = theta_sequence(n)?;
    let ratio = |j: usize| (th[n - j - 1] - 1.0) / th[n - j];
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 1.0 + (2.0 * th[n - i - 1] - 1.0) / th[n - i];
        if i >= 1 {
            h[(i, i - 1)] = ratio(i - 1) * (h[(i, i)] - 1.0);
        }
        for j in (0..i.saturating_sub(1)).rev() {
            h[(i, j)] = ratio(j) * h[(i, j + 1)];
        }
    }
    DifferenceMatrix::new(h, MatrixOrigin::OgmG)
}

/// `h_ij = (beta_j + gamma_j) prod_{nu=j+1}^{i} beta_nu + [i = j]`.
pub fn matrix_from_two_sequence(beta: &[f64], gamma: &[f64], n: usize) -> Result<DifferenceMatrix> {
    if beta.len() < n || gamma.len() < n {
        return Err(Error::InvalidInput(format!("two-sequence coefficients shorter than N = {n}")));
    }
    let mut h = Matrix::zeros(n, n);
    for j in 0..n {
        let mut v = beta[j] + gamma[j];
        h[(j, j)] = v + 1.0;
        for i in j + 1..n {
            v *= beta[i];
            h[(i, j)] = v;
        }
    }
    DifferenceMatrix::new(h, MatrixOrigin::FromTwoSeq)
}

/// NAG-C difference matrix of size `N`, built from its three-sequence coefficients.
pub fn nag_c_matrix(n: usize) -> Result<DifferenceMatrix> {
    let (tau, delta): (Vec<f64>, Vec<f64>) = (0..=n).map(|k| nag_c_coefficients(k, 1.0)).unzip();
    let (beta, gamma) = to_two_sequence(&tau, &delta, 0.0, 1.0);
    matrix_from_two_sequence(&beta, &gamma, n)
}

/// `max |h1_ij - h2_{N-1-j, N-1-i}|`.
pub fn check_anti_transpose_discrete(h1: &DifferenceMatrix, h2: &DifferenceMatrix) -> Result<f64> {
    let n = h1.n();
    if h2.n() != n {
        return Err(Error::InvalidInput("matrices differ in size".into()));
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((h1.get(i, j) - h2.get(n - 1 - j, n - 1 - i)).abs());
        }
    }
    Ok(worst)
}

/// Runs `y_{i+1} = y_i - s sum_{j<=i} h_ij grad f(y_j)` and returns `y_0..y_N`.
pub fn run_fsfo(matrix: &DifferenceMatrix, obj: &dyn Objective, s: f64, y0: &Vector) -> Result<Vec<Vector>> {
    if !(s > 0.0) || y0.len() != obj.dim() {
        return Err(Error::InvalidInput("fixed-step run needs s > 0 and a matching y0".into()));
    }
    let f0 = obj.value(y0);
    let mut ys = vec![y0.clone()];
    let mut grads: Vec<Vector> = Vec::with_capacity(matrix.n());
    for i in 0..matrix.n() {
        grads.push(obj.gradient(&ys[i]));
        let mut step = Vector::zeros(y0.len());
        for (j, g) in grads.iter().enumerate() {
            step += g * matrix.get(i, j);
        }
        let next = &ys[i] - step * s;
        if diverged(obj.value(&next), f0) {
            return Err(Error::Consistency(format!("fixed-step run diverged at step {i}")));
        }
        ys.push(next);
    }
    Ok(ys)
}

pub type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Catalog of differential kernels.
#[derive(Clone)]
pub enum DifferentialKernel {
    NagC,
    NagSc { mu: f64 },
    Ogm,
    OgmG { t_end: f64 },
    UnifiedNag { mu: f64 },
    UnifiedNagG { mu: f64, t_end: f64 },
    /// `H = (1 + c(tau)) exp(-int_tau^t b)` by adaptive quadrature.
    FromBc { b: KernelFn, c: KernelFn },
}

impl fmt::Debug for DifferentialKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// `log(x^3 sinhc^3(x) cosh(x))`-type weight of the unified kernels, up to the `mu` scaling.
fn unified_log_weight(mu: f64, t: f64) -> f64 {
    let u = mu.sqrt() * t / 2.0;
    let ln_cosh = if u < 20.0 { u.cosh().ln() } else { u - std::f64::consts::LN_2 + (-2.0 * u).exp().ln_1p() };
    let ln_sinhc = if u < 20.0 {
        sinhc(u).ln()
    } else {
        u - std::f64::consts::LN_2 + (-(-2.0 * u).exp()).ln_1p() - u.ln()
    };
    3.0 * (t.ln() + ln_sinhc) + ln_cosh
}

/// Quadrature tolerance of [`DifferentialKernel::FromBc`].
pub const QUADRATURE_TOL: f64 = 1e-10;

impl DifferentialKernel {
    pub fn name(&self) -> String {
        match self {
            DifferentialKernel::NagC => "nag_c".into(),
            DifferentialKernel::NagSc { mu } => format!("nag_sc(mu={mu})"),
            DifferentialKernel::Ogm => "ogm".into(),
            DifferentialKernel::OgmG { t_end } => format!("ogm_g(T={t_end})"),
            DifferentialKernel::UnifiedNag { mu } => format!("unified_nag(mu={mu})"),
            DifferentialKernel::UnifiedNagG { mu, t_end } => format!("unified_nag_g(mu={mu},T={t_end})"),
            DifferentialKernel::FromBc { .. } => "from_bc".into(),
        }
    }

    /// Right end of the domain, if any.
    pub fn t_end(&self) -> Option<f64> {
        match self {
            DifferentialKernel::OgmG { t_end } | DifferentialKernel::UnifiedNagG { t_end, .. } => Some(*t_end),
            _ => None,
        }
    }

    /// `H(t, tau)` on `0 < tau <= t (< T)`.
    pub fn eval(&self, t: f64, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau <= t) || self.t_end().is_some_and(|te| !(t < te)) {
            return Err(Error::Domain(format!("kernel {} evaluated at (t, tau) = ({t}, {tau})", self.name())));
        }
        Ok(match self {
            DifferentialKernel::NagC => (tau / t).powi(3),
            DifferentialKernel::NagSc { mu } => (-2.0 * mu.sqrt() * (t - tau)).exp(),
            DifferentialKernel::Ogm => 2.0 * (tau / t).powi(3),
            DifferentialKernel::OgmG { t_end } => 2.0 * ((t_end - t) / (t_end - tau)).powi(3),
            DifferentialKernel::UnifiedNag { mu } => (unified_log_weight(*mu, tau) - unified_log_weight(*mu, t)).exp(),
            DifferentialKernel::UnifiedNagG { mu, t_end } => {
                (unified_log_weight(*mu, t_end - t) - unified_log_weight(*mu, t_end - tau)).exp()
            }
            DifferentialKernel::FromBc { b, c } => {
                let integral = adaptive_simpson(&**b, tau, t, QUADRATURE_TOL)?;
                (1.0 + c(tau)) * (-integral).exp()
            }
        })
    }

    /// `b(t)` with `dH/dt = -b(t) H`, for the closed-form kernels.
    pub fn b(&self, t: f64) -> Option<f64> {
        match self {
            DifferentialKernel::NagC | DifferentialKernel::Ogm => Some(3.0 / t),
            DifferentialKernel::NagSc { mu } => Some(2.0 * mu.sqrt()),
            DifferentialKernel::OgmG { t_end } => Some(3.0 / (t_end - t)),
            DifferentialKernel::UnifiedNag { mu } => Some(unified_damping(*mu, t)),
            DifferentialKernel::UnifiedNagG { mu, t_end } => Some(unified_damping(*mu, t_end - t)),
            DifferentialKernel::FromBc { b, .. } => Some(b(t)),
        }
    }
}

/// Closed-form kernel by identifier: `nag_c`, `nag_sc`, `ogm`, `ogm_g`, `unified_nag`, `unified_nag_g`.
pub fn kernel_closed_form(id: &str, mu: f64, t_end: f64) -> Result<DifferentialKernel> {
    Ok(match id {
        "nag_c" => DifferentialKernel::NagC,
        "nag_sc" => DifferentialKernel::NagSc { mu },
        "ogm" => DifferentialKernel::Ogm,
        "ogm_g" => DifferentialKernel::OgmG { t_end },
        "unified_nag" => DifferentialKernel::UnifiedNag { mu },
        "unified_nag_g" => DifferentialKernel::UnifiedNagG { mu, t_end },
        other => return Err(Error::InvalidInput(format!("unknown kernel id '{other}'"))),
    })
}

pub fn kernel_from_bc(b: KernelFn, c: KernelFn) -> DifferentialKernel {
    DifferentialKernel::FromBc { b, c }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (fa, fb, fm) = (f(a), f(b), f((a + b) / 2.0));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut worst_err = 0.0;
    let v = simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50, &mut worst_err);
    if !v.is_finite() || worst_err > tol {
        return Err(Error::ToleranceNotReached { best: v, achieved: worst_err });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    worst_err: &mut f64,
) -> f64 {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 {
        *worst_err += diff.abs() / 15.0;
        return left + right + diff / 15.0;
    }
    if diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, worst_err)
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, worst_err)
}

/// `max |H1(t, tau) - H2(T - tau, T - t)|` over a `grid x grid` lattice of `0 < tau <= t < T`.
pub fn check_anti_transpose(k1: &DifferentialKernel, k2: &DifferentialKernel, t_end: f64, grid: usize) -> Result<f64> {
    if grid == 0 || !(t_end > 0.0) {
        return Err(Error::InvalidInput("anti-transpose check needs grid >= 1 and T > 0".into()));
    }
    let node = |i: usize| t_end * (i as f64 + 1.0) / (grid as f64 + 1.0);
    let mut worst: f64 = 0.0;
    for it in 0..grid {
        for itau in 0..=it {
            let (t, tau) = (node(it), node(itau));
            worst = worst.max((k1.eval(t, tau)? - k2.eval(t_end - tau, t_end - t)?).abs());
        }
    }
    Ok(worst)
}

/// `(t, tau, H)` on the lattice used by [`check_anti_transpose`].
pub fn kernel_grid(kernel: &DifferentialKernel, t_end: f64, grid: usize) -> Result<Vec<(f64, f64, f64)>> {
    if grid == 0 || !(t_end > 0.0) {
        return Err(Error::InvalidInput("kernel grid needs grid >= 1 and T > 0".into()));
    }
    let node = |i: usize| t_end * (i as f64 + 1.0) / (grid as f64 + 1.0);
    let mut out = Vec::with_capacity(grid * (grid + 1) / 2);
    for it in 0..grid {
        for itau in 0..=it {
            let (t, tau) = (node(it), node(itau));
            out.push((t, tau, kernel.eval(t, tau)?));
        }
    }
    Ok(out)
}

/// Writes `t,tau,H`.
pub fn write_kernel_grid<W: Write>(rows: &[(f64, f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "tau", "H"])?;
    for &(t, tau, h) in rows {
        w.write_record([fmt_f64(t), fmt_f64(tau), fmt_f64(h)])?;
    }
    w.flush()?;
    Ok(())
}

/// One point of a discrete-to-continuous kernel comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelLimitPoint {
    pub s: f64,
    pub i: usize,
    pub j: usize,
    pub h_ij: f64,
    pub kernel: f64,
    pub deviation: f64,
}

/// Compares `h_{floor(t/sqrt s), floor(tau/sqrt s)}` with `H(t, tau)` for each `s`.
pub fn kernel_limit_convergence<F>(
    family: F,
    kernel: &DifferentialKernel,
    t: f64,
    tau: f64,
    steps: &[f64],
) -> Result<Vec<KernelLimitPoint>>
where
    F: Fn(f64, usize) -> Result<DifferenceMatrix>,
{
    let target = kernel.eval(t, tau)?;
    let mut out = Vec::with_capacity(steps.len());
    for &s in steps {
        let rs = s.sqrt();
        let i = (t / rs + 1e-9).floor() as usize;
        let j = (tau / rs + 1e-9).floor() as usize;
        if i == j {
            return Err(Error::InvalidInput("kernel comparison skips diagonal entries".into()));
        }
        let h = family(s, i + 1)?.get(i, j);
        out.push(KernelLimitPoint { s, i, j, h_ij: h, kernel: target, deviation: (h - target).abs() });
    }
    Ok(out)
}

/// `|X'(t) + int_0^t H(t, tau) grad f(X(tau)) dtau|` at node `index`, with the
/// integral by the trapezoidal rule over the trajectory nodes.
pub fn integro_differential_residual(
    kernel: &DifferentialKernel,
    traj: &Trajectory,
    obj: &dyn Objective,
    index: usize,
) -> Result<f64> {
    if index == 0 || index >= traj.len() {
        return Err(Error::InvalidInput("node index must be interior".into()));
    }
    let t = traj.times[index];
    let weight = |k: usize| -> Result<f64> {
        let tau = traj.times[k];
        if tau == 0.0 {
            // every catalog kernel vanishes like tau^3 at the origin
            return Ok(0.0);
        }
        kernel.eval(t, tau)
    };
    let mut integral = Vector::zeros(traj.x[0].len());
    let mut prev = obj.gradient(&traj.x[0]) * weight(0)?;
    for k in 1..=index {
        let cur = obj.gradient(&traj.x[k]) * weight(k)?;
        integral += (&prev + &cur) * ((traj.times[k] - traj.times[k - 1]) / 2.0);
        prev = cur;
    }
    Ok((&traj.xdot[index] + integral).norm())
}
