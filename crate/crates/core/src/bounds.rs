//! Closed-form spectral bounds.
//!
//! Universal constants that the underlying inequalities leave unspecified are
//! explicit inputs and are echoed in every [`BoundReport`]. Logarithms are
//! natural logarithms.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::CoefficientModel;
use crate::params::ModelParameters;

/// Echo of the inputs a bound was evaluated at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BoundInputs {
    pub sigma: Option<f64>,
    pub v: Option<f64>,
    pub sigma_star: Option<f64>,
    pub v_tilde: Option<f64>,
    pub r: Option<f64>,
    pub d: Option<f64>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Probability with which the bound may fail, for tail statements.
    pub failure_probability: Option<f64>,
    pub constant_assumed: f64,
    pub log_base: &'static str,
    pub inputs: BoundInputs,
}

impl BoundReport {
    fn new(name: &str, constant: f64, inputs: BoundInputs) -> Self {
        BoundReport {
            name: name.to_string(),
            lower: None,
            upper: None,
            failure_probability: None,
            constant_assumed: constant,
            log_base: "e",
            inputs,
        }
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = |x: Option<f64>| x.map(format_sig).unwrap_or_else(|| "-".into());
        writeln!(f, "[{}]", self.name)?;
        writeln!(f, "  lower               = {}", num(self.lower))?;
        writeln!(f, "  upper               = {}", num(self.upper))?;
        writeln!(f, "  failure_probability = {}", num(self.failure_probability))?;
        writeln!(f, "  constant_assumed    = {}", format_sig(self.constant_assumed))?;
        writeln!(f, "  log_base            = {}", self.log_base)?;
        let i = &self.inputs;
        let echo = [
            ("sigma", i.sigma),
            ("v", i.v),
            ("sigma_star", i.sigma_star),
            ("v_tilde", i.v_tilde),
            ("R", i.r),
            ("d", i.d),
            ("t", i.t),
        ];
        for (k, val) in echo.iter().filter(|e| e.1.is_some()) {
            writeln!(f, "  input.{k:<14} = {}", num(*val))?;
        }
        Ok(())
    }
}

/// Formats with 15 significant digits.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..15).contains(&mag) {
        let decimals = (14 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.14e}")
    }
}

fn nonneg(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and >= 0, got {x}")))
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and > 0, got {x}")))
    }
}

/// Non-commutative Khintchine interval `[sigma, d^(1/2p) sqrt(2p) sigma]`
/// with `d = d1 + d2` and `p = max(1, ceil(ln d))`.
pub fn nck_interval(sigma: f64, d1: usize, d2: usize) -> Result<(f64, f64)> {
    nonneg("sigma", sigma)?;
    if d1 == 0 || d2 == 0 {
        return Err(Error::invalid("dimensions must be >= 1"));
    }
    let d = (d1 + d2) as f64;
    let p = d.ln().ceil().max(1.0);
    Ok((sigma, d.powf(1.0 / (2.0 * p)) * (2.0 * p).sqrt() * sigma))
}

/// Matrix Bernstein tail `min(1, d exp(-t^2 / (2 sigma^2 + 2 R t / 3)))`.
pub fn bernstein_tail(sigma_sq: f64, r: f64, d: usize, t: f64) -> Result<f64> {
    nonneg("sigma^2", sigma_sq)?;
    nonneg("R", r)?;
    nonneg("t", t)?;
    if d == 0 {
        return Err(Error::invalid("d must be >= 1"));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let denom = 2.0 * sigma_sq + 2.0 / 3.0 * r * t;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((d as f64 * (-t * t / denom).exp()).min(1.0))
}

/// `[max(||A0||, sigma) / 2, ||A0|| + ||sum A A^T||^(1/2) + ||sum A^T A||^(1/2)]`,
/// an interval containing the norm of the free model.
pub fn pisier_interval(model: &CoefficientModel) -> (f64, f64) {
    let a0 = linalg::spectral_norm(model.a0());
    let rows = linalg::sym_spectral_norm(&model.row_gram()).sqrt();
    let cols = if model.is_self_adjoint() {
        rows
    } else {
        linalg::sym_spectral_norm(&model.col_gram()).sqrt()
    };
    let sigma = rows.max(cols);
    (0.5 * a0.max(sigma), a0 + rows + cols)
}

/// `[sigma, 2 sigma]`, valid for centered self-adjoint models.
pub fn free_norm_range(sigma: f64) -> BoundReport {
    let mut rep = BoundReport::new(
        "free_norm_centered",
        1.0,
        BoundInputs { sigma: Some(sigma), ..Default::default() },
    );
    rep.lower = Some(sigma);
    rep.upper = Some(2.0 * sigma);
    rep
}

/// `|E||X|| - ||X_free||| <= C v_tilde (ln d)^(3/4)`; with `t`, the tail
/// version adds `C sigma_* t` and fails with probability `exp(-t^2)`.
pub fn intrinsic_gap(params: &ModelParameters, d: usize, c: f64, t: Option<f64>) -> Result<BoundReport> {
    if d < 2 {
        return Err(Error::invalid("d must be >= 2"));
    }
    positive("C", c)?;
    if let Some(t) = t {
        nonneg("t", t)?;
    }
    let ln_d = (d as f64).ln();
    let gap = c * params.v_tilde * ln_d.powf(0.75);
    let mut rep = BoundReport::new(
        "intrinsic_freeness_gap",
        c,
        BoundInputs {
            sigma: Some(params.sigma),
            v: Some(params.v),
            sigma_star: Some(params.sigma_star_upper),
            v_tilde: Some(params.v_tilde),
            d: Some(d as f64),
            t,
            ..Default::default()
        },
    );
    match t {
        None => rep.upper = Some(gap),
        Some(t) => {
            rep.upper = Some(gap + c * params.sigma_star_upper * t);
            rep.failure_probability = Some((-t * t).exp());
        }
    }
    Ok(rep)
}

/// Improved matrix Bernstein bound on `E||sum Y_i||` (or its tail version).
pub fn improved_bernstein(
    sigma: f64,
    v: f64,
    r: f64,
    sigma_star_upper: f64,
    d: usize,
    c: f64,
    t: Option<f64>,
) -> Result<BoundReport> {
    for (name, x) in [("sigma", sigma), ("v", v), ("R", r), ("sigma_star", sigma_star_upper)] {
        nonneg(name, x)?;
    }
    if d < 2 {
        return Err(Error::invalid("d must be >= 2"));
    }
    positive("C", c)?;
    let ln_d = (d as f64).ln();
    let variance_term = (v * sigma).sqrt() * ln_d.powf(0.75);
    let mut rep = BoundReport::new(
        "improved_bernstein",
        c,
        BoundInputs {
            sigma: Some(sigma),
            v: Some(v),
            sigma_star: Some(sigma_star_upper),
            r: Some(r),
            d: Some(d as f64),
            t,
            ..Default::default()
        },
    );
    match t {
        None => {
            let corr = variance_term + r.cbrt() * sigma.powf(2.0 / 3.0) * ln_d.powf(2.0 / 3.0) + r * ln_d;
            rep.upper = Some(2.0 * sigma + c * corr);
        }
        Some(t) => {
            nonneg("t", t)?;
            let corr = variance_term
                + sigma_star_upper * t.sqrt()
                + r.cbrt() * sigma.powf(2.0 / 3.0) * t.powf(2.0 / 3.0)
                + r * t;
            rep.upper = Some(2.0 * sigma + c * corr);
            rep.failure_probability = Some((d as f64 * (-t).exp()).min(1.0));
        }
    }
    Ok(rep)
}

/// Hausdorff distance bound between the spectrum of a sum of bounded
/// independent summands and that of its Gaussian surrogate.
pub fn universality_gap(sigma_star_upper: f64, sigma: f64, r: f64, d: usize, c: f64, t: f64) -> Result<BoundReport> {
    for (name, x) in [("sigma_star", sigma_star_upper), ("sigma", sigma), ("R", r), ("t", t)] {
        nonneg(name, x)?;
    }
    if d == 0 {
        return Err(Error::invalid("d must be >= 1"));
    }
    positive("C", c)?;
    let value = c * sigma_star_upper * t.sqrt() + c * r.sqrt() * sigma.powf(2.0 / 3.0) * t.powf(2.0 / 3.0) + c * r * t;
    let mut rep = BoundReport::new(
        "universality_hausdorff",
        c,
        BoundInputs {
            sigma: Some(sigma),
            sigma_star: Some(sigma_star_upper),
            r: Some(r),
            d: Some(d as f64),
            t: Some(t),
            ..Default::default()
        },
    );
    rep.upper = Some(value);
    rep.failure_probability = Some((d as f64 * (-t).exp()).min(1.0));
    Ok(rep)
}

/// Non-commutative Khintchine interval wrapped as a report.
pub fn nck_report(sigma: f64, d1: usize, d2: usize) -> Result<BoundReport> {
    let (lo, hi) = nck_interval(sigma, d1, d2)?;
    let mut rep = BoundReport::new(
        "noncommutative_khintchine",
        1.0,
        BoundInputs { sigma: Some(sigma), d: Some((d1 + d2) as f64), ..Default::default() },
    );
    rep.lower = Some(lo);
    rep.upper = Some(hi);
    Ok(rep)
}

pub fn pisier_report(model: &CoefficientModel) -> BoundReport {
    let (lo, hi) = pisier_interval(model);
    let mut rep = BoundReport::new(
        "pisier_free_norm",
        1.0,
        BoundInputs { d: Some(model.d1() as f64), ..Default::default() },
    );
    rep.lower = Some(lo);
    rep.upper = Some(hi);
    rep
}

pub fn bernstein_report(sigma_sq: f64, r: f64, d: usize, t: f64) -> Result<BoundReport> {
    let p = bernstein_tail(sigma_sq, r, d, t)?;
    let mut rep = BoundReport::new(
        "matrix_bernstein_tail",
        1.0,
        BoundInputs { sigma: Some(sigma_sq.sqrt()), r: Some(r), d: Some(d as f64), t: Some(t), ..Default::default() },
    );
    rep.upper = Some(t);
    rep.failure_probability = Some(p);
    Ok(rep)
}
