//! Preconditioned conjugate gradients for `(−Δ_h + diag(d)) x = b` on the
//! periodic grid, with `(−Δ_h + c)^{-1}` applied by FFT as preconditioner.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub struct ShiftedLaplacianSolver {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Eigenvalues of `−Δ_h`, indexed like the grid.
    symbol: Vec<f64>,
    scratch: Vec<Complex<f64>>,
}

impl ShiftedLaplacianSolver {
    pub fn new(n: usize, spacing: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let s: Vec<f64> = (0..n)
            .map(|k| {
                let v = (std::f64::consts::PI * k as f64 / n as f64).sin();
                4.0 * v * v / (spacing * spacing)
            })
            .collect();
        let mut symbol = vec![0.0; n * n];
        for l in 0..n {
            for k in 0..n {
                symbol[l * n + k] = s[k] + s[l];
            }
        }
        ShiftedLaplacianSolver {
            n,
            forward,
            inverse,
            symbol,
            scratch: vec![Complex::new(0.0, 0.0); n * n],
        }
    }

    fn transpose(&mut self) {
        let n = self.n;
        for j in 0..n {
            for i in (j + 1)..n {
                self.scratch.swap(j * n + i, i * n + j);
            }
        }
    }

    /// `out = (−Δ_h + shift)^{-1} rhs`, `shift > 0`.
    pub fn apply_inverse(&mut self, shift: f64, rhs: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (z, &r) in self.scratch.iter_mut().zip(rhs) {
            *z = Complex::new(r, 0.0);
        }
        self.forward.process(&mut self.scratch);
        self.transpose();
        self.forward.process(&mut self.scratch);
        // The symbol is symmetric in (k, l), so the transposed layout is fine.
        let norm = 1.0 / (n * n) as f64;
        for (z, s) in self.scratch.iter_mut().zip(&self.symbol) {
            *z *= norm / (s + shift);
        }
        self.inverse.process(&mut self.scratch);
        self.transpose();
        self.inverse.process(&mut self.scratch);
        for (o, z) in out.iter_mut().zip(&self.scratch) {
            *o = z.re;
        }
    }
}

/// `y = −Δ_h x + d ∘ x`.
pub fn apply_operator(n: usize, spacing: f64, diag: &[f64], x: &[f64], y: &mut [f64]) {
    let inv_h2 = 1.0 / (spacing * spacing);
    for j in 0..n {
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let jp = if j + 1 == n { 0 } else { j + 1 };
        for i in 0..n {
            let im = if i == 0 { n - 1 } else { i - 1 };
            let ip = if i + 1 == n { 0 } else { i + 1 };
            let k = j * n + i;
            let s = x[j * n + im] + x[j * n + ip] + x[jm * n + i] + x[jp * n + i];
            y[k] = (4.0 * x[k] - s) * inv_h2 + diag[k] * x[k];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `(−Δ_h + diag(d)) x = b` with `d > 0`. Returns the iteration count.
pub fn pcg(
    solver: &mut ShiftedLaplacianSolver,
    spacing: f64,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = solver.n;
    let len = n * n;
    let shift = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(shift > 0.0 && shift.is_finite()) {
        return Err(Error::LinearStagnation {
            iterations: 0,
            relative_residual: f64::NAN,
        });
    }
    x.iter_mut().for_each(|v| *v = 0.0);
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(0);
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; len];
    solver.apply_inverse(shift, &r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; len];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        apply_operator(n, spacing, diag, &p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearStagnation {
                iterations: it,
                relative_residual: dot(&r, &r).sqrt() / b_norm,
            });
        }
        let alpha = rz / pap;
        for k in 0..len {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= rel_tol {
            return Ok(it);
        }
        solver.apply_inverse(shift, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..len {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::LinearStagnation {
        iterations: max_iter,
        relative_residual: dot(&r, &r).sqrt() / b_norm,
    })
}
