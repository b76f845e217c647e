//! Hyperbolic variant functions and the order-p hyperbolic functions.
//!
//! `sinhc`, `tanhc`, `cothc` and `cschc` have removable singularities at the
//! origin; below `SERIES_CUTOFF` they are evaluated from their Taylor series.
//! The order-p functions `sinh_p`, `cosh_p` solve the initial value problem
//! `sinh_p' = (1 + sinh_p^p)^(1/p)`, `sinh_p(0) = 0`, `cosh_p = sinh_p'`, and are
//! tabulated by fixed-step RK4 with cubic Hermite interpolation between nodes.

use crate::error::{Error, Result};

const SERIES_CUTOFF: f64 = 1e-4;
const LARGE_ARG: f64 = 350.0;

/// Default node spacing of [`HigherHyperbolicTable`].
pub const DEFAULT_GRID_STEP: f64 = 1e-4;

/// Below this argument the order-p functions use their power series.
const P_SERIES_CUTOFF: f64 = 1e-2;

/// Largest argument the table will extend to.
pub const MAX_TABLE_T: f64 = 700.0;

/// `sinh(x) / x`, equal to 1 at the origin.
pub fn sinhc(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// `tanh(x) / x`, equal to 1 at the origin.
pub fn tanhc(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        x.tanh() / x
    }
}

/// `x coth(x)`, the reciprocal of [`tanhc`].
pub fn cothc(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 + x2 / 3.0 - x2 * x2 / 45.0
    } else {
        x / x.tanh()
    }
}

/// `x / sinh(x)`, the reciprocal of [`sinhc`].
pub fn cschc(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 / 6.0 + 7.0 * x2 * x2 / 360.0
    } else if x > LARGE_ARG {
        // 2x e^{-x} / (1 - e^{-2x}); the denominator is 1 to machine precision here
        2.0 * x * (-x).exp()
    } else {
        x / x.sinh()
    }
}

pub fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

pub fn csch(x: f64) -> f64 {
    if x.abs() > LARGE_ARG {
        2.0 * (-x.abs()).exp() * x.signum()
    } else {
        1.0 / x.sinh()
    }
}

pub fn sech(x: f64) -> f64 {
    if x.abs() > LARGE_ARG {
        2.0 * (-x.abs()).exp()
    } else {
        1.0 / x.cosh()
    }
}

/// Evaluates one of the variant functions, rejecting NaN input.
pub fn checked(f: fn(f64) -> f64, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("NaN argument".into()));
    }
    Ok(f(x))
}

/// Right-hand side `(1 + s^p)^(1/p)` written to avoid overflow for large `s`.
fn cosh_p_of(p: u32, s: f64) -> f64 {
    let pf = p as f64;
    if s <= 1.0 {
        (1.0 + s.powi(p as i32)).powf(1.0 / pf)
    } else {
        s * (1.0 + s.powi(-(p as i32))).powf(1.0 / pf)
    }
}

/// Power-series coefficients of `sinh_p(t) = t + a t^{p+1} + b t^{2p+1} + ...`.
fn series_coeffs(p: u32) -> (f64, f64) {
    let pf = p as f64;
    let a = 1.0 / (pf * (pf + 1.0));
    let b = (a + (1.0 - pf) / (2.0 * pf * pf)) / (2.0 * pf + 1.0);
    (a, b)
}

/// Tabulated `sinh_p`/`cosh_p` on a uniform grid starting at 0.
#[derive(Debug, Clone)]
pub struct HigherHyperbolicTable {
    p: u32,
    grid_step: f64,
    sinh: Vec<f64>,
    cosh: Vec<f64>,
    c_p_estimate: Option<f64>,
}

impl HigherHyperbolicTable {
    pub fn new(p: u32) -> Result<Self> {
        Self::with_step(p, DEFAULT_GRID_STEP)
    }

    pub fn with_step(p: u32, grid_step: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidInput(format!("order p = {p} must be at least 2")));
        }
        if !(grid_step > 0.0) || !grid_step.is_finite() {
            return Err(Error::InvalidInput(format!("grid step {grid_step} must be positive")));
        }
        Ok(Self { p, grid_step, sinh: vec![0.0], cosh: vec![1.0], c_p_estimate: None })
    }

    /// Builds a table already covering `[0, t_max]`.
    pub fn covering(p: u32, t_max: f64) -> Result<Self> {
        let mut table = Self::new(p)?;
        table.extend_to(t_max)?;
        Ok(table)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn c_p_estimate(&self) -> Option<f64> {
        self.c_p_estimate
    }

    /// Right end of the tabulated range.
    pub fn range_end(&self) -> f64 {
        (self.sinh.len() - 1) as f64 * self.grid_step
    }

    /// Iterates over the `(t, sinh_p, cosh_p)` nodes.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let h = self.grid_step;
        self.sinh.iter().zip(&self.cosh).enumerate().map(move |(i, (&s, &c))| (i as f64 * h, s, c))
    }

    /// Extends the node list with RK4 steps until it covers `t_max`.
    pub fn extend_to(&mut self, t_max: f64) -> Result<()> {
        if !(t_max <= MAX_TABLE_T) {
            return Err(Error::InvalidInput(format!(
                "table range {t_max} exceeds the supported maximum {MAX_TABLE_T}"
            )));
        }
        let needed = (t_max / self.grid_step).ceil() as usize + 2;
        if needed <= self.sinh.len() {
            return Ok(());
        }
        let p = self.p;
        let h = self.grid_step;
        self.sinh.reserve(needed - self.sinh.len());
        self.cosh.reserve(needed - self.cosh.len());
        let mut s = *self.sinh.last().unwrap();
        while self.sinh.len() < needed {
            let k1 = cosh_p_of(p, s);
            let k2 = cosh_p_of(p, s + 0.5 * h * k1);
            let k3 = cosh_p_of(p, s + 0.5 * h * k2);
            let k4 = cosh_p_of(p, s + h * k3);
            s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            self.sinh.push(s);
            self.cosh.push(cosh_p_of(p, s));
        }
        Ok(())
    }

    /// `(sinh_p(t), cosh_p(t))` for `t` inside the tabulated range.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("sinh_p evaluated at t = {t}")));
        }
        if t < P_SERIES_CUTOFF {
            let (a, b) = series_coeffs(self.p);
            let tp = t.powi(self.p as i32);
            let s = t * (1.0 + a * tp + b * tp * tp);
            return Ok((s, cosh_p_of(self.p, s)));
        }
        if t > self.range_end() {
            return Err(Error::Domain(format!(
                "t = {t} outside the tabulated range [0, {}]",
                self.range_end()
            )));
        }
        let h = self.grid_step;
        let i = ((t / h).floor() as usize).min(self.sinh.len() - 2);
        let theta = (t - i as f64 * h) / h;
        let (s0, s1) = (self.sinh[i], self.sinh[i + 1]);
        let (d0, d1) = (self.cosh[i], self.cosh[i + 1]);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let s = (2.0 * t3 - 3.0 * t2 + 1.0) * s0
            + (t3 - 2.0 * t2 + theta) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * s1
            + (t3 - t2) * h * d1;
        Ok((s, cosh_p_of(self.p, s)))
    }

    /// `sinh_p(t) / t` evaluated without cancellation near the origin.
    pub fn sinhc_p(&self, t: f64) -> Result<f64> {
        let t = t.abs();
        if t < P_SERIES_CUTOFF {
            let (a, b) = series_coeffs(self.p);
            let tp = t.powi(self.p as i32);
            return Ok(1.0 + a * tp + b * tp * tp);
        }
        Ok(self.eval(t)?.0 / t)
    }

    /// Smallest `t` with `sinh_p(t) = value`, by bisection on the table.
    pub fn inverse_sinh_p(&mut self, value: f64) -> Result<f64> {
        if !(value >= 0.0) {
            return Err(Error::Domain(format!("inverse sinh_p of {value}")));
        }
        if value == 0.0 {
            return Ok(0.0);
        }
        // sinh_p(t) >= t and sinh_p(t) >= C e^t, so t <= min(value, log(value) + 2)
        let mut hi = value.min(value.ln().max(0.0) + 2.0).max(P_SERIES_CUTOFF);
        self.extend_to(hi)?;
        while self.eval(hi)?.0 < value {
            hi *= 2.0;
            self.extend_to(hi)?;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid)?.0 < value {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// `(sinh_p(t), cosh_p(t))`, extending the table on demand.
pub fn eval_sinh_p(table: &mut HigherHyperbolicTable, t: f64) -> Result<(f64, f64)> {
    if t.is_finite() && t > table.range_end() {
        table.extend_to(t)?;
    }
    table.eval(t)
}

/// All ratio functions of order p at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HigherVariants {
    pub sinh_p: f64,
    pub cosh_p: f64,
    pub tanh_p: f64,
    pub coth_p: f64,
    pub sinhc_p: f64,
    pub tanhc_p: f64,
    pub cothc_p: f64,
    pub cschc_p: f64,
}

/// Evaluates the order-p ratio functions; `coth_p` is infinite at 0.
pub fn higher_variants(table: &HigherHyperbolicTable, t: f64) -> Result<HigherVariants> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("higher variants at t = {t}")));
    }
    let (s, c) = table.eval(t)?;
    let sinhc_p = table.sinhc_p(t)?;
    let tanhc_p = sinhc_p / c;
    Ok(HigherVariants {
        sinh_p: s,
        cosh_p: c,
        tanh_p: s / c,
        coth_p: c / s,
        sinhc_p,
        tanhc_p,
        cothc_p: 1.0 / tanhc_p,
        cschc_p: 1.0 / sinhc_p,
    })
}

/// Result of the `C_p` plateau search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpEstimate {
    pub value: f64,
    /// Largest disagreement among the three accepted estimates.
    pub achieved: f64,
    /// Time of the last accepted estimate.
    pub t: f64,
}

/// `sinh_p(t) e^{-t}`.
pub fn cp_estimate_at(table: &mut HigherHyperbolicTable, t: f64) -> Result<f64> {
    let (s, _) = eval_sinh_p(table, t)?;
    Ok((s.ln() - t).exp())
}

/// Estimates `C_p = lim sinh_p(t) e^{-t}`: three consecutive unit-spaced
/// estimates agreeing to 1e-6 are accepted.
pub fn estimate_cp(p: u32) -> Result<CpEstimate> {
    estimate_cp_with(p, 1e-6, 60.0)
}

pub fn estimate_cp_with(p: u32, tol: f64, horizon: f64) -> Result<CpEstimate> {
    let mut table = HigherHyperbolicTable::new(p)?;
    table.extend_to(horizon)?;
    let mut t = 1.0;
    let mut e0 = cp_estimate_at(&mut table, t)?;
    let mut e1 = cp_estimate_at(&mut table, t + 1.0)?;
    let mut best = (e1, (e1 - e0).abs());
    while t + 2.0 <= horizon {
        let e2 = cp_estimate_at(&mut table, t + 2.0)?;
        let spread = (e0 - e1).abs().max((e1 - e2).abs());
        if spread < best.1 {
            best = (e2, spread);
        }
        if spread <= tol {
            table.c_p_estimate = Some(e2);
            return Ok(CpEstimate { value: e2, achieved: spread, t: t + 2.0 });
        }
        e0 = e1;
        e1 = e2;
        t += 1.0;
    }
    Err(Error::ToleranceNotReached { best: best.0, achieved: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_at_origin() {
        assert_eq!(sinhc(0.0), 1.0);
        assert_eq!(tanhc(0.0), 1.0);
        assert_eq!(cothc(0.0), 1.0);
        assert_eq!(cschc(0.0), 1.0);
    }

    #[test]
    fn reference_values() {
        assert!((sinhc(1.0) - 1.1752011936438014).abs() < 1e-15);
        assert!((tanhc(2.0) - 0.48201379003790845).abs() < 1e-15);
        assert!((cothc(10.0) - 10.000000041223073).abs() < 1e-13);
    }

    #[test]
    fn series_branch_is_continuous() {
        for f in [sinhc, tanhc, cothc, cschc] {
            let below = f(SERIES_CUTOFF * (1.0 - 1e-9));
            let above = f(SERIES_CUTOFF * (1.0 + 1e-9));
            assert!((below - above).abs() < 1e-15);
        }
    }

    #[test]
    fn large_arguments_stay_finite() {
        assert!(cothc(1e6).is_finite());
        assert!(cschc(400.0) > 0.0 && cschc(400.0).is_finite());
        let below = cschc(LARGE_ARG * (1.0 - 1e-12));
        let above = cschc(LARGE_ARG * (1.0 + 1e-12));
        assert!(((below - above) / below).abs() < 1e-9);
        assert!(tanhc(1e6) > 0.0);
    }

    #[test]
    fn nan_is_rejected() {
        assert!(checked(sinhc, f64::NAN).is_err());
        assert_eq!(checked(sinhc, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn invalid_order() {
        assert!(HigherHyperbolicTable::new(1).is_err());
    }

    #[test]
    fn initial_condition() {
        for p in 2..=4 {
            let table = HigherHyperbolicTable::new(p).unwrap();
            assert_eq!(table.eval(0.0).unwrap(), (0.0, 1.0));
        }
    }

    #[test]
    fn series_coefficients_for_p2_match_sinh() {
        let (a, b) = series_coeffs(2);
        assert!((a - 1.0 / 6.0).abs() < 1e-16);
        assert!((b - 1.0 / 120.0).abs() < 1e-16);
    }
}
