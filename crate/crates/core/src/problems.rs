//! Objective catalog: quadratics, the two-dimensional toy problem, and
//! regularized logistic regression on synthetic Gaussian data.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::{nag_sc_coefficients, step_three_sequence, IterateState};
use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// A smooth objective with its first (and optionally second) derivatives.
pub trait Objective: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, _x: &Vector) -> Option<Matrix> {
        None
    }
    /// Smoothness constant `L`.
    fn smoothness(&self) -> f64;
    /// Strong convexity parameter `mu`.
    fn strong_convexity(&self) -> f64;
    fn minimizer(&self) -> Option<Vector>;
    fn min_value(&self) -> Option<f64>;

    /// `f(x) - f*`, when `f*` is known.
    fn gap(&self, x: &Vector) -> Option<f64> {
        self.min_value().map(|fs| self.value(x) - fs)
    }
}

/// `f(x) = 1/2 (x - c)^T Q (x - c)` with symmetric positive semidefinite `Q`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    name: String,
    q: Matrix,
    center: Vector,
    l: f64,
    mu: f64,
}

impl Quadratic {
    pub fn new(q: Matrix, center: Vector) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() != center.len() {
            return Err(Error::InvalidInput("quadratic dimensions disagree".into()));
        }
        if (&q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidInput("quadratic matrix is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(q.clone()).eigenvalues;
        let mu = eig.min().max(0.0);
        let l = eig.max().max(0.0);
        if eig.min() < -1e-12 * l.max(1.0) {
            return Err(Error::InvalidInput("quadratic matrix is not positive semidefinite".into()));
        }
        Ok(Self { name: "quadratic".into(), q, center, l, mu })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(Matrix::from_diagonal(&Vector::from_column_slice(diag)), Vector::zeros(n))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }
}

impl Objective for Quadratic {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &Vector) -> f64 {
        let d = x - &self.center;
        0.5 * d.dot(&(&self.q * &d))
    }
    fn gradient(&self, x: &Vector) -> Vector {
        &self.q * (x - &self.center)
    }
    fn hessian(&self, _x: &Vector) -> Option<Matrix> {
        Some(self.q.clone())
    }
    fn smoothness(&self) -> f64 {
        self.l
    }
    fn strong_convexity(&self) -> f64 {
        self.mu
    }
    fn minimizer(&self) -> Option<Vector> {
        Some(self.center.clone())
    }
    fn min_value(&self) -> Option<f64> {
        Some(0.0)
    }
    fn gap(&self, x: &Vector) -> Option<f64> {
        Some(self.value(x))
    }
}

/// `f(x, y) = (mu/2) x^2 + 0.005 y^2`.
pub fn make_toy_quadratic(mu: f64) -> Quadratic {
    assert!(mu >= 0.0 && mu.is_finite(), "toy quadratic needs mu >= 0");
    Quadratic::diagonal(&[mu, 0.01]).expect("diagonal toy quadratic").with_name(format!("toy(mu={mu})"))
}

/// Synthetic logistic-regression data.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticDataset {
    /// Feature matrix, one row per sample.
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub lambda: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
    pub seed: u64,
}

/// Standard normal draw by the Box-Muller transform.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // 1 - u lies in (0, 1], so the logarithm is finite
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Draws the ground truth `x0 ~ N(0, I/100)`, then per row the features
/// `a_i ~ N(0, I)` and a Bernoulli label with `P(y_i = 1) = sigma(a_i^T x0)`.
pub fn synth_logistic(m: usize, n: usize, lambda: f64, seed: u64) -> Result<LogisticDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..n).map(|_| 0.1 * standard_normal(&mut rng)).collect();
    synth_logistic_with_truth(m, n, lambda, seed, &truth, &mut rng)
}

/// As [`synth_logistic`] with a caller-supplied ground truth.
pub fn synth_logistic_with_truth<R: Rng>(
    m: usize,
    n: usize,
    lambda: f64,
    seed: u64,
    truth: &[f64],
    rng: &mut R,
) -> Result<LogisticDataset> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("dataset needs m, n >= 1".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} must be positive")));
    }
    if truth.len() != n {
        return Err(Error::InvalidInput("ground truth has the wrong length".into()));
    }
    let mut features = Matrix::zeros(m, n);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let mut u = 0.0;
        for j in 0..n {
            let a = standard_normal(rng);
            features[(i, j)] = a;
            u += a * truth[j];
        }
        let draw: f64 = rng.gen();
        labels.push(u8::from(draw < sigmoid(u)));
    }
    Ok(LogisticDataset { features, labels, lambda, seed })
}

impl LogisticDataset {
    pub fn m(&self) -> usize {
        self.features.nrows()
    }

    pub fn n(&self) -> usize {
        self.features.ncols()
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta { m: self.m(), n: self.n(), lambda: self.lambda, seed: self.seed }
    }

    /// Writes `row,label,a_1..a_n` to `path` and the metadata to `path` with a `.json` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["row".to_string(), "label".to_string()];
        header.extend((1..=self.n()).map(|j| format!("a_{j}")));
        w.write_record(&header)?;
        for i in 0..self.m() {
            let mut rec = vec![i.to_string(), self.labels[i].to_string()];
            rec.extend((0..self.n()).map(|j| format!("{:e}", self.features[(i, j)])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&self.meta())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
        let mut r = csv::Reader::from_path(path)?;
        let mut features = Matrix::zeros(meta.m, meta.n);
        let mut labels = vec![0u8; meta.m];
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != meta.n + 2 {
                return Err(Error::InvalidInput(format!("row with {} fields, expected {}", rec.len(), meta.n + 2)));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("{s}: {e}")));
            let i: usize = rec[0].trim().parse().map_err(|e| Error::InvalidInput(format!("row index: {e}")))?;
            if i >= meta.m {
                return Err(Error::InvalidInput(format!("row index {i} out of range")));
            }
            labels[i] = match rec[1].trim() {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::InvalidInput(format!("label {other} not in {{0,1}}"))),
            };
            for j in 0..meta.n {
                features[(i, j)] = parse(&rec[j + 2])?;
            }
            rows += 1;
        }
        if rows != meta.m {
            return Err(Error::InvalidInput(format!("{rows} rows, sidecar says {}", meta.m)));
        }
        Ok(Self { features, labels, lambda: meta.lambda, seed: meta.seed })
    }
}

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^u)` without overflow.
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// `e^x - 1 - x`, accurate for small `x`.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for k in 3..24 {
            term *= x / k as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// `softplus(u + d) - softplus(u) - sigmoid(u) d`, relative-accurate for small `d`.
pub fn softplus_bregman(u: f64, d: f64) -> f64 {
    let sig = sigmoid(u);
    let q = sigmoid(-u);
    if d.abs() < 30.0 {
        (q * expm1_minus_x(-sig * d) + sig * expm1_minus_x(q * d)).ln_1p()
    } else {
        let a = q.ln() - sig * d;
        let b = sig.ln() + q * d;
        a.max(b) + (-(a - b).abs()).exp().ln_1p()
    }
}

/// `sigmoid(u + d) - sigmoid(u)` without cancellation.
pub fn sigmoid_difference(u: f64, d: f64) -> f64 {
    sigmoid(u + d) * sigmoid(-u) * -(-d).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReferenceStatus {
    /// Reference gradient norm reached the target.
    Converged { grad_norm: f64, iterations: usize },
    /// The reference solver stopped short of the target; `f*` is unavailable.
    NotConverged { grad_norm: f64, iterations: usize },
}

/// Regularized logistic loss `(1/m)(sum(-y_i a_i^T x + log(1 + e^{a_i^T x})) + lambda |x|^2)`.
#[derive(Debug, Clone)]
pub struct Logistic {
    a: Matrix,
    y: Vector,
    lambda: f64,
    l: f64,
    mu: f64,
    x_star: Option<Vector>,
    f_star: Option<f64>,
    status: ReferenceStatus,
    seed: u64,
}

/// Gradient-norm target of the reference solve.
pub const REFERENCE_TOL: f64 = 1e-12;
/// Iteration budget of the NAG-SC reference solve.
pub const REFERENCE_MAX_ITER: usize = 100_000;

/// Builds the logistic objective and computes its minimizer: NAG-SC with
/// `s = 1/L` until the gradient norm is below 1e-12 (at most 1e5 iterations),
/// followed by Newton polishing.
pub fn make_logistic(ds: &LogisticDataset) -> Result<Logistic> {
    let m = ds.m() as f64;
    let a = ds.features.clone();
    let y = Vector::from_iterator(ds.m(), ds.labels.iter().map(|&l| l as f64));
    let row_sq: f64 = a.row_iter().map(|r| r.norm_squared()).sum();
    let l = (row_sq / 4.0 + 2.0 * ds.lambda) / m;
    let mu = 2.0 * ds.lambda / m;
    let mut obj = Logistic {
        a,
        y,
        lambda: ds.lambda,
        l,
        mu,
        x_star: None,
        f_star: None,
        status: ReferenceStatus::NotConverged { grad_norm: f64::INFINITY, iterations: 0 },
        seed: ds.seed,
    };
    let (x, status) = obj.reference_solve();
    obj.status = status;
    if let ReferenceStatus::Converged { .. } = status {
        obj.f_star = Some(obj.value(&x));
        obj.x_star = Some(x);
    }
    Ok(obj)
}

impl Logistic {
    pub fn status(&self) -> ReferenceStatus {
        self.status
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples(&self) -> usize {
        self.a.nrows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn reference_solve(&self) -> (Vector, ReferenceStatus) {
        let n = self.dim();
        let s = 1.0 / self.l;
        let (tau, delta) = nag_sc_coefficients(self.mu, s);
        let mut state = IterateState::new(Vector::zeros(n));
        let mut iterations = 0;
        let mut gnorm = self.gradient(&state.x).norm();
        while gnorm > REFERENCE_TOL && iterations < REFERENCE_MAX_ITER {
            state = step_three_sequence(&state, tau, delta, self.mu, s, self).0;
            iterations += 1;
            if iterations % 50 == 0 {
                gnorm = self.gradient(&state.x).norm();
            }
        }
        let mut x = state.x;
        gnorm = self.gradient(&x).norm();
        // Newton polishing to the floating-point floor.
        for _ in 0..20 {
            let g = self.gradient(&x);
            let h = self.hessian(&x).expect("logistic Hessian");
            let Some(chol) = h.cholesky() else { break };
            let cand = &x - chol.solve(&g);
            let cand_norm = self.gradient(&cand).norm();
            if !(cand_norm < gnorm) {
                break;
            }
            x = cand;
            gnorm = cand_norm;
        }
        let status = if gnorm <= REFERENCE_TOL {
            ReferenceStatus::Converged { grad_norm: gnorm, iterations }
        } else {
            ReferenceStatus::NotConverged { grad_norm: gnorm, iterations }
        };
        (x, status)
    }

    /// The same objective in coordinates relative to the reference minimizer.
    pub fn centered(&self) -> Result<CenteredLogistic> {
        let x_star = self
            .x_star
            .clone()
            .ok_or_else(|| Error::Unsupported("logistic minimizer unavailable".into()))?;
        let u_star = &self.a * &x_star;
        Ok(CenteredLogistic {
            a: self.a.clone(),
            u_star,
            lambda: self.lambda,
            l: self.l,
            mu: self.mu,
            x_star,
            f_star: self.f_star.unwrap_or(f64::NAN),
        })
    }
}

impl Objective for Logistic {
    fn name(&self) -> String {
        format!("logistic(m={},n={},lambda={})", self.a.nrows(), self.a.ncols(), self.lambda)
    }
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn value(&self, x: &Vector) -> f64 {
        let u = &self.a * x;
        let loss: f64 = u.iter().zip(self.y.iter()).map(|(&ui, &yi)| softplus(ui) - yi * ui).sum();
        (loss + self.lambda * x.norm_squared()) / self.a.nrows() as f64
    }
    fn gradient(&self, x: &Vector) -> Vector {
        let u = &self.a * x;
        let r = Vector::from_iterator(u.len(), u.iter().zip(self.y.iter()).map(|(&ui, &yi)| sigmoid(ui) - yi));
        (self.a.tr_mul(&r) + 2.0 * self.lambda * x) / self.a.nrows() as f64
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let u = &self.a * x;
        let w = Vector::from_iterator(u.len(), u.iter().map(|&ui| sigmoid(ui) * sigmoid(-ui)));
        let mut wa = self.a.clone();
        for (mut row, &wi) in wa.row_iter_mut().zip(w.iter()) {
            row *= wi;
        }
        let n = self.dim();
        Some((self.a.tr_mul(&wa) + Matrix::identity(n, n) * (2.0 * self.lambda)) / self.a.nrows() as f64)
    }
    fn smoothness(&self) -> f64 {
        self.l
    }
    fn strong_convexity(&self) -> f64 {
        self.mu
    }
    fn minimizer(&self) -> Option<Vector> {
        self.x_star.clone()
    }
    fn min_value(&self) -> Option<f64> {
        self.f_star
    }
}

/// Logistic loss in offsets `e = x - x*` from the reference minimizer, minus
/// the residual linear term `<grad f(x*), e>`.
///
/// Values and gradients are computed from Bregman-type differences, so both
/// keep full relative accuracy as `e -> 0`. The minimizer is exactly `e = 0`
/// with value 0.
#[derive(Debug, Clone)]
pub struct CenteredLogistic {
    a: Matrix,
    u_star: Vector,
    lambda: f64,
    l: f64,
    mu: f64,
    x_star: Vector,
    f_star: f64,
}

impl CenteredLogistic {
    /// Reference minimizer in absolute coordinates.
    pub fn reference_point(&self) -> &Vector {
        &self.x_star
    }

    pub fn reference_value(&self) -> f64 {
        self.f_star
    }

    /// Offset of the absolute point `x`.
    pub fn offset_of(&self, x: &Vector) -> Vector {
        x - &self.x_star
    }

    /// Absolute point of the offset `e`.
    pub fn absolute(&self, e: &Vector) -> Vector {
        e + &self.x_star
    }
}

impl Objective for CenteredLogistic {
    fn name(&self) -> String {
        format!("logistic-centered(m={},n={},lambda={})", self.a.nrows(), self.a.ncols(), self.lambda)
    }
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn value(&self, e: &Vector) -> f64 {
        let d = &self.a * e;
        let s: f64 = self.u_star.iter().zip(d.iter()).map(|(&u, &di)| softplus_bregman(u, di)).sum();
        (s + self.lambda * e.norm_squared()) / self.a.nrows() as f64
    }
    fn gradient(&self, e: &Vector) -> Vector {
        let d = &self.a * e;
        let r = Vector::from_iterator(d.len(), self.u_star.iter().zip(d.iter()).map(|(&u, &di)| sigmoid_difference(u, di)));
        (self.a.tr_mul(&r) + 2.0 * self.lambda * e) / self.a.nrows() as f64
    }
    fn hessian(&self, e: &Vector) -> Option<Matrix> {
        let d = &self.a * e;
        let mut wa = self.a.clone();
        for ((mut row, &u), &di) in wa.row_iter_mut().zip(self.u_star.iter()).zip(d.iter()) {
            row *= sigmoid(u + di) * sigmoid(-u - di);
        }
        let n = self.dim();
        Some((self.a.tr_mul(&wa) + Matrix::identity(n, n) * (2.0 * self.lambda)) / self.a.nrows() as f64)
    }
    fn smoothness(&self) -> f64 {
        self.l
    }
    fn strong_convexity(&self) -> f64 {
        self.mu
    }
    fn minimizer(&self) -> Option<Vector> {
        Some(Vector::zeros(self.dim()))
    }
    fn min_value(&self) -> Option<f64> {
        Some(0.0)
    }
    fn gap(&self, e: &Vector) -> Option<f64> {
        Some(self.value(e))
    }
}

/// Max over coordinates of `|fd_i - g_i| / max(1, |g_i|)` with central differences.
pub fn grad_check(obj: &dyn Objective, point: &Vector, step: f64) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!("finite-difference step {step} must be positive")));
    }
    let g = obj.gradient(point);
    let mut worst: f64 = 0.0;
    let mut xp = point.clone();
    for i in 0..point.len() {
        xp[i] = point[i] + step;
        let fp = obj.value(&xp);
        xp[i] = point[i] - step;
        let fm = obj.value(&xp);
        xp[i] = point[i];
        let fd = (fp - fm) / (2.0 * step);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
    }
    Ok(worst)
}

/// Max over entries of `|fd_ij - H_ij| / max(1, |H_ij|)`, differencing the gradient.
pub fn hess_check(obj: &dyn Objective, point: &Vector, step: f64) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!("finite-difference step {step} must be positive")));
    }
    let h = obj
        .hessian(point)
        .ok_or_else(|| Error::Capability("objective has no Hessian".into()))?;
    let mut worst: f64 = 0.0;
    let mut xp = point.clone();
    for j in 0..point.len() {
        xp[j] = point[j] + step;
        let gp = obj.gradient(&xp);
        xp[j] = point[j] - step;
        let gm = obj.gradient(&xp);
        xp[j] = point[j];
        for i in 0..point.len() {
            let fd = (gp[i] - gm[i]) / (2.0 * step);
            worst = worst.max((fd - h[(i, j)]).abs() / h[(i, j)].abs().max(1.0));
        }
    }
    Ok(worst)
}
