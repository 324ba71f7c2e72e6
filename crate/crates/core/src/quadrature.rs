//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! error drops below `max(abs, rel * |I|)`. Integrands may be fallible so that
//! nested integrals can propagate inner failures.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the 7-point rule living on XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Tolerance {
            abs: 0.0,
            rel,
            max_subdivisions: 4000,
        }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F>(f: &mut F, a: f64, b: f64) -> Result<Piece>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        return Err(Error::Quadrature {
            subdivisions: 0,
            estimate: value,
            error: f64::INFINITY,
        });
    }
    Ok(Piece { a, b, value, error })
}

/// Integrate a fallible integrand over `[a, b]`.
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    try_integrate_pieces(&mut f, &[a, b], tol)
}

/// Integrate over consecutive intervals of `points` (which must be sorted),
/// treating the interior points as known breakpoints of the integrand.
pub fn try_integrate_pieces<F>(f: &mut F, points: &[f64], tol: Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if points.len() < 2 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod15(f, w[0], w[1])?);
        }
    }
    let mut subdivisions = 0;
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(Estimate { value, error });
        }
        if subdivisions >= tol.max_subdivisions {
            return Err(Error::Quadrature {
                subdivisions,
                estimate: value,
                error,
            });
        }
        let worst = heap.pop().expect("heap holds at least one piece");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine precision; accept what we have.
            return Ok(Estimate { value, error });
        }
        heap.push(kronrod15(f, worst.a, mid)?);
        heap.push(kronrod15(f, mid, worst.b)?);
        subdivisions += 1;
    }
}

/// Infallible convenience wrapper.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), a, b, tol)
}
