//! Volume-comparison radius bound.
//!
//! With `V(R) = ∫₀^R sinh^{2n−1} v dv`, the ratio `V(R + D₁)/V(R)` decreases
//! from `+∞` (as `R → 0`) to `e^{(2n−1)D₁}` (as `R → ∞`). Given a required
//! ratio, the admissible radii form an interval `(0, R*]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RadiusBound {
    Bounded(f64),
    /// The ratio never drops below the requirement: no bound on `R`.
    Unbounded,
}

impl RadiusBound {
    pub fn value(self) -> Option<f64> {
        match self {
            RadiusBound::Bounded(r) => Some(r),
            RadiusBound::Unbounded => None,
        }
    }
}

fn ln_sinh(v: f64) -> f64 {
    if v < 20.0 {
        v.sinh().ln()
    } else {
        v - std::f64::consts::LN_2 + (-(-2.0 * v).exp()).ln_1p()
    }
}

/// `ln ∫₀^R sinh^m v dv`, scaled so the integrand peaks at 1.
pub fn ln_sinh_volume(m: u32, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    let m = f64::from(m);
    let top = ln_sinh(r);
    let est = integrate(
        |v| if v <= 0.0 { 0.0 } else { (m * (ln_sinh(v) - top)).exp() },
        0.0,
        r,
        Tolerance::relative(1e-13).with_abs(1e-300),
    )?;
    Ok(m * top + est.value.ln())
}

/// `ln(V(R + D₁)/V(R))`.
pub fn ln_volume_ratio(r: f64, d1: f64, n: u32) -> Result<f64> {
    let m = 2 * n - 1;
    Ok(ln_sinh_volume(m, r + d1)? - ln_sinh_volume(m, r)?)
}

/// Largest `R` with `V(R + D₁)/V(R) ≥ ratio`, by bisection.
pub fn bishop_gromov_radius(ratio: f64, d1: f64, n: u32) -> Result<RadiusBound> {
    if !(ratio > 1.0 && ratio.is_finite()) {
        return Err(Error::invalid("volume ratio must exceed 1"));
    }
    if !(d1 > 0.0 && d1.is_finite()) {
        return Err(Error::invalid("D1 must be positive"));
    }
    if n < 1 {
        return Err(Error::invalid("complex dimension must be at least 1"));
    }
    let target = ratio.ln();
    let floor = f64::from(2 * n - 1) * d1;
    if target <= floor {
        return Ok(RadiusBound::Unbounded);
    }
    let above = |r: f64| -> Result<bool> { Ok(ln_volume_ratio(r, d1, n)? >= target) };
    let mut lo = 1.0;
    while !above(lo)? {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::invalid("ratio too large to bracket"));
        }
    }
    let mut hi = lo * 2.0;
    while above(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::invalid("ratio too close to its limit to bracket"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RadiusBound::Bounded(lo))
}
