//! Local-model fiber volumes near a normal-crossing point.
//!
//! In logarithmic coordinates `u^j ≤ 0` the fiber over `s` is the slice
//! `Σ_j u^j = log|s|`. The fiber-volume density is
//! `D(s) = |s|^{-2} I(log|s|)` with
//!
//! ```text
//! I(L) = ∫_{u ≤ 0, Σu = L} Π_b exp(2 c_b u^b) · h(u)  Π_{j≠j0} du^j
//! ```
//!
//! where `c_b = (k_b+1)/a_b`. Eliminating a coordinate `j0` with minimal
//! exponent factors out `exp(2 c_{j0} L)` and leaves a bounded integrand, so
//! everything is evaluated in log space: radii like `exp(-2^14)` underflow
//! an `f64` long before the asymptotics become clean.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lct::{rational_to_f64, Rational};
use crate::quadrature::{try_integrate, Tolerance};

/// Deepest supported face size.
pub const MAX_FACE: usize = 4;

const OUTER_REL_TOL: f64 = 1e-9;
const INNER_REL_TOL: f64 = 1e-11;

type WeightFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Smooth positive factor `h(u)` multiplying the integrand.
#[derive(Clone, Default)]
pub enum Weight {
    #[default]
    One,
    /// `h = 1 + ½ exp(u^1)`.
    Perturbed,
    Custom(WeightFn),
}

impl Weight {
    fn eval(&self, u: &[f64]) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Perturbed => 1.0 + 0.5 * u[0].exp(),
            Weight::Custom(h) => h(u),
        }
    }

    fn is_constant(&self) -> bool {
        matches!(self, Weight::One)
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::One => f.write_str("One"),
            Weight::Perturbed => f.write_str("Perturbed"),
            Weight::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Default sample radii `s_i = exp(-2^i)`, `i = 3..=14`, as `log s_i`.
pub fn default_log_radii() -> Vec<f64> {
    (3..=14).map(|i| -(2f64.powi(i))).collect()
}

#[derive(Debug, Clone)]
pub struct LocalModelConfig {
    exponents: Vec<Rational>,
    eliminated: usize,
    pub weight: Weight,
    /// Sample radii stored as `log s`, strictly decreasing, all negative.
    log_radii: Vec<f64>,
}

impl LocalModelConfig {
    pub fn new(exponents: Vec<Rational>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::invalid("face must contain at least one exponent"));
        }
        if exponents.len() > MAX_FACE {
            return Err(Error::invalid(format!(
                "face size {} exceeds supported depth {MAX_FACE}",
                exponents.len()
            )));
        }
        if exponents.iter().any(|c| *c.numer() == 0) {
            return Err(Error::invalid("exponents must be positive"));
        }
        let min = *exponents.iter().min().expect("nonempty");
        let eliminated = exponents.iter().position(|c| *c == min).expect("min present");
        Ok(LocalModelConfig {
            exponents,
            eliminated,
            weight: Weight::One,
            log_radii: default_log_radii(),
        })
    }

    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = weight;
        self
    }

    /// Eliminate a different minimizing coordinate.
    pub fn with_eliminated(mut self, j0: usize) -> Result<Self> {
        let min = self.beta();
        match self.exponents.get(j0) {
            Some(c) if *c == min => {
                self.eliminated = j0;
                Ok(self)
            }
            Some(_) => Err(Error::invalid("eliminated index must carry a minimal exponent")),
            None => Err(Error::invalid("eliminated index out of range")),
        }
    }

    pub fn with_log_radii(mut self, log_radii: Vec<f64>) -> Result<Self> {
        if log_radii.iter().any(|l| !(l.is_finite() && *l < 0.0)) {
            return Err(Error::invalid("radii must lie strictly between 0 and 1"));
        }
        if log_radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("radii must be strictly decreasing"));
        }
        self.log_radii = log_radii;
        Ok(self)
    }

    pub fn exponents(&self) -> &[Rational] {
        &self.exponents
    }

    pub fn eliminated(&self) -> usize {
        self.eliminated
    }

    pub fn log_radii(&self) -> &[f64] {
        &self.log_radii
    }

    /// Smallest exponent of the face.
    pub fn beta(&self) -> Rational {
        *self.exponents.iter().min().expect("nonempty")
    }

    /// Number of exponents equal to the minimum.
    pub fn log_power(&self) -> u32 {
        let b = self.beta();
        self.exponents.iter().filter(|c| **c == b).count() as u32
    }
}

struct Nest<'a> {
    weight: &'a Weight,
    free: Vec<usize>,
    // c_b − c_{j0} for each free coordinate, aligned with `free`.
    shifts: Vec<f64>,
    eliminated: usize,
}

impl Nest<'_> {
    fn eval(&self, level: usize, budget: f64, u: &mut [f64]) -> Result<f64> {
        if level == self.free.len() {
            u[self.eliminated] = budget;
            let mut exponent = 0.0;
            for (k, &j) in self.free.iter().enumerate() {
                exponent += 2.0 * self.shifts[k] * u[j];
            }
            return Ok(exponent.exp() * self.weight.eval(u));
        }
        let tol = if level == 0 {
            Tolerance::relative(OUTER_REL_TOL)
        } else {
            Tolerance::relative(INNER_REL_TOL)
        };
        let j = self.free[level];
        let mut scratch = u.to_vec();
        try_integrate(
            |x| {
                scratch[j] = x;
                self.eval(level + 1, budget - x, &mut scratch)
            },
            budget,
            0.0,
            tol.with_abs(f64::MIN_POSITIVE),
        )
        .map(|e| e.value)
    }
}

/// `log I(L)`.
pub fn log_simplex_integral(cfg: &LocalModelConfig, level: f64) -> Result<f64> {
    if !(level < 0.0) || !level.is_finite() {
        return Err(Error::invalid(format!("slice level must be negative, got {level}")));
    }
    let c: Vec<f64> = cfg.exponents.iter().map(rational_to_f64).collect();
    let j0 = cfg.eliminated;
    let free: Vec<usize> = (0..c.len()).filter(|&j| j != j0).collect();
    let shifts = free.iter().map(|&j| c[j] - c[j0]).collect();
    let nest = Nest {
        weight: &cfg.weight,
        free,
        shifts,
        eliminated: j0,
    };
    let mut u = vec![0.0; c.len()];
    let reduced = nest.eval(0, level, &mut u)?;
    if !(reduced > 0.0) {
        return Err(Error::Quadrature {
            subdivisions: 0,
            estimate: reduced,
            error: f64::NAN,
        });
    }
    Ok(2.0 * c[j0] * level + reduced.ln())
}

/// `I(L)` by nested adaptive quadrature.
pub fn simplex_integral(cfg: &LocalModelConfig, level: f64) -> Result<f64> {
    log_simplex_integral(cfg, level).map(f64::exp)
}

/// Closed-form `I(L)` for faces of size at most two with constant weight.
pub fn closed_form_oracle(cfg: &LocalModelConfig, level: f64) -> Result<f64> {
    if !cfg.weight.is_constant() {
        return Err(Error::invalid("closed form needs the constant weight"));
    }
    if !(level < 0.0) {
        return Err(Error::invalid("slice level must be negative"));
    }
    let c: Vec<f64> = cfg.exponents.iter().map(rational_to_f64).collect();
    match c.as_slice() {
        [c1] => Ok((2.0 * c1 * level).exp()),
        [c1, _] if cfg.exponents[0] == cfg.exponents[1] => Ok(-level * (2.0 * c1 * level).exp()),
        [c1, c2] => Ok(((2.0 * c2 * level).exp() - (2.0 * c1 * level).exp()) / (2.0 * (c1 - c2))),
        _ => Err(Error::invalid("closed form only covers faces of size 1 or 2")),
    }
}

/// `log D(s)` with `log_s = log s < 0`.
pub fn log_fiber_volume_density(cfg: &LocalModelConfig, log_s: f64) -> Result<f64> {
    Ok(-2.0 * log_s + log_simplex_integral(cfg, log_s)?)
}

/// `D(s) = s^{-2} I(log s)` for `0 < s < 1`.
pub fn fiber_volume_density(cfg: &LocalModelConfig, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!("radius must lie in (0, 1), got {s}")));
    }
    log_fiber_volume_density(cfg, s.ln()).map(f64::exp)
}

/// `log` of the model profile `s^{-2(1-β)} (-log s)^{N-1}`.
pub fn log_model_profile(beta: f64, log_power: u32, log_s: f64) -> f64 {
    -2.0 * (1.0 - beta) * log_s + (f64::from(log_power) - 1.0) * (-log_s).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeSample {
    pub log_s: f64,
    pub log_density: f64,
}

/// Evaluate the density at every configured radius. Radii are processed in
/// parallel; the output order matches the configuration.
pub fn sample_density(cfg: &LocalModelConfig) -> Result<Vec<VolumeSample>> {
    cfg.log_radii
        .par_iter()
        .map(|&log_s| {
            Ok(VolumeSample {
                log_s,
                log_density: log_fiber_volume_density(cfg, log_s)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    pub beta_hat: f64,
    pub log_power_hat: u32,
    pub c0: f64,
    /// Raw fitted coefficient of `log(-log s)` before rounding.
    pub log_coefficient: f64,
}

/// Least squares for `y ≈ X b` via modified Gram–Schmidt. Columns are scaled
/// to unit norm first; a column whose residual norm collapses is rejected.
fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let p = columns.len();
    let m = y.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut r = vec![vec![0.0; p]; p];
    let mut scales = Vec::with_capacity(p);
    for (k, col) in columns.iter().enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("degenerate design matrix"));
        }
        scales.push(norm);
        let mut v: Vec<f64> = col.iter().map(|x| x / norm).collect();
        for i in 0..k {
            let dot: f64 = (0..m).map(|t| q[i][t] * v[t]).sum();
            r[i][k] = dot;
            for t in 0..m {
                v[t] -= dot * q[i][t];
            }
        }
        let rn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rn < 1e-10 {
            return Err(Error::invalid("degenerate design matrix"));
        }
        r[k][k] = rn;
        q.push(v.iter().map(|x| x / rn).collect());
    }
    let qty: Vec<f64> = (0..p).map(|i| (0..m).map(|t| q[i][t] * y[t]).sum()).collect();
    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = ((i + 1)..p).map(|k| r[i][k] * b[k]).sum();
        b[i] = (qty[i] - s) / r[i][i];
    }
    Ok(b.iter().zip(&scales).map(|(b, s)| b / s).collect())
}

/// Recover `(β, N, c0)` from samples of `log D` against
/// `log D = -2(1-β) log s + (N-1) log(-log s) + c0`.
pub fn fit_exponents(samples: &[VolumeSample]) -> Result<ExponentFit> {
    if samples.len() < 4 {
        return Err(Error::invalid("need at least 4 samples"));
    }
    if samples.windows(2).any(|w| w[1].log_s >= w[0].log_s) {
        if samples.windows(2).all(|w| w[1].log_s == w[0].log_s) {
            return Err(Error::invalid("degenerate design matrix: all radii equal"));
        }
        return Err(Error::invalid("radii must be strictly decreasing"));
    }
    if samples.iter().any(|s| !(s.log_s < 0.0) || !s.log_density.is_finite()) {
        return Err(Error::invalid("samples need radii in (0,1) and finite densities"));
    }
    if samples.last().expect("nonempty").log_s > (1e-6f64).ln() {
        return Err(Error::invalid("smallest radius must be at most 1e-6"));
    }
    let x1: Vec<f64> = samples.iter().map(|s| s.log_s).collect();
    let x2: Vec<f64> = samples.iter().map(|s| (-s.log_s).ln()).collect();
    let ones = vec![1.0; samples.len()];
    let y: Vec<f64> = samples.iter().map(|s| s.log_density).collect();

    let full = least_squares(&[x1.clone(), x2.clone(), ones.clone()], &y)?;
    let log_coefficient = full[1];
    let n_hat = (log_coefficient + 1.0).round().max(1.0) as u32;

    let shifted: Vec<f64> = y
        .iter()
        .zip(&x2)
        .map(|(y, x)| y - (f64::from(n_hat) - 1.0) * x)
        .collect();
    let refit = least_squares(&[x1, ones], &shifted)?;
    Ok(ExponentFit {
        beta_hat: 1.0 + refit[0] / 2.0,
        log_power_hat: n_hat,
        c0: refit[1],
        log_coefficient,
    })
}
