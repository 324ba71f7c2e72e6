//! Damped Newton for semilinear problems `Δ_h φ = g(cell, φ)` with `g`
//! increasing in `φ`, and the generalized Kähler–Einstein equation
//! `Δψ = 2λ(e^ψ F − 1)` built on top of it.

use std::f64::consts::PI;

use serde::Serialize;

use super::density::Puncture;
use super::linear::{pcg, ShiftedLaplacianSolver};
use crate::error::{Error, Result};
use crate::grid::{GridField, TorusDomain};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Target for `‖R‖_∞`.
    pub tol: f64,
    pub max_iter: usize,
    pub linear_rel_tol: f64,
    pub max_linear_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iter: 60,
            linear_rel_tol: 1e-10,
            max_linear_iter: 4000,
        }
    }
}

impl NewtonOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_sup: f64,
    pub linear_iterations: usize,
}

const MAX_HALVINGS: usize = 40;

fn residual_into(phi: &GridField, g: &impl Fn(usize, f64) -> (f64, f64), out: &mut [f64]) -> f64 {
    let lap = phi.laplacian();
    let mut sup: f64 = 0.0;
    for (k, (l, &p)) in lap.values().iter().zip(phi.values()).enumerate() {
        let r = l - g(k, p).0;
        out[k] = r;
        sup = if r.is_finite() { sup.max(r.abs()) } else { f64::INFINITY };
    }
    sup
}

/// Solve `Δ_h φ = g(k, φ_k)` where `g(k, v)` returns `(value, ∂_v value)`
/// and the derivative is strictly positive. Starts from `init`.
pub fn solve_semilinear(
    g: impl Fn(usize, f64) -> (f64, f64),
    init: GridField,
    opts: &NewtonOptions,
) -> Result<(GridField, NewtonReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("Newton tolerance must be positive"));
    }
    let n = init.n();
    let h = init.spacing();
    let len = n * n;
    let mut solver = ShiftedLaplacianSolver::new(n, h);
    let mut phi = init;
    let mut r = vec![0.0; len];
    let mut res = residual_into(&phi, &g, &mut r);
    let mut diag = vec![0.0; len];
    let mut step = vec![0.0; len];
    let mut trial_r = vec![0.0; len];
    let mut linear_total = 0;
    for it in 0..=opts.max_iter {
        if res <= opts.tol {
            return Ok((
                phi,
                NewtonReport {
                    iterations: it,
                    residual_sup: res,
                    linear_iterations: linear_total,
                },
            ));
        }
        if it == opts.max_iter {
            break;
        }
        if !res.is_finite() {
            return Err(Error::Newton {
                iterations: it,
                residual: res,
                reason: "non-finite residual".into(),
            });
        }
        for (k, &p) in phi.values().iter().enumerate() {
            diag[k] = g(k, p).1;
        }
        // (Δ_h − diag) δ = −R  ⇔  (−Δ_h + diag) δ = R
        linear_total += pcg(
            &mut solver,
            h,
            &diag,
            &r,
            &mut step,
            opts.linear_rel_tol,
            opts.max_linear_iter,
        )?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = {
                let mut t = phi.clone();
                for (v, s) in t.values_mut().iter_mut().zip(&step) {
                    *v += alpha * s;
                }
                t
            };
            let trial_res = residual_into(&trial, &g, &mut trial_r);
            if trial_res < res {
                phi = trial;
                res = trial_res;
                std::mem::swap(&mut r, &mut trial_r);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::Newton {
                iterations: it + 1,
                residual: res,
                reason: "line search could not reduce the residual".into(),
            });
        }
    }
    Err(Error::Newton {
        iterations: opts.max_iter,
        residual: res,
        reason: "iteration limit reached".into(),
    })
}

/// `R = Δ_h ψ − 2λ(e^ψ F − 1)`.
pub fn gke_residual(psi: &GridField, f: &GridField, lambda: f64) -> Result<GridField> {
    psi.same_shape(f)?;
    let lap = psi.laplacian();
    let data = lap
        .values()
        .iter()
        .zip(psi.values().iter().zip(f.values()))
        .map(|(l, (p, fv))| l - 2.0 * lambda * (p.exp() * fv - 1.0))
        .collect();
    Ok(GridField::from_vec(*psi.domain(), data).unwrap_or_else(|_| psi.map(|_| f64::INFINITY)))
}

#[derive(Debug, Clone)]
pub struct GkeSolution {
    pub psi: GridField,
    pub report: NewtonReport,
}

fn check_density(f: &GridField, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    if !(f.min() > 0.0) {
        return Err(Error::invalid("density must be strictly positive"));
    }
    Ok(())
}

/// Solve the GKE equation from `ψ ≡ 0`.
pub fn gke_solve(f: &GridField, lambda: f64, opts: &NewtonOptions) -> Result<GkeSolution> {
    gke_solve_from(f, lambda, GridField::zeros(*f.domain()), opts)
}

pub fn gke_solve_from(
    f: &GridField,
    lambda: f64,
    init: GridField,
    opts: &NewtonOptions,
) -> Result<GkeSolution> {
    check_density(f, lambda)?;
    init.same_shape(f)?;
    let fv = f.values();
    let two_lambda = 2.0 * lambda;
    let (psi, report) = solve_semilinear(
        |k, p| {
            let e = p.exp() * fv[k];
            (two_lambda * (e - 1.0), two_lambda * e)
        },
        init,
        opts,
    )?;
    Ok(GkeSolution { psi, report })
}

/// `ψ* = a sin(2πx/P) cos(2πy/P)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub amplitude: f64,
    pub period: f64,
}

impl Default for ManufacturedSolution {
    fn default() -> Self {
        ManufacturedSolution {
            amplitude: 0.02,
            period: 1.0,
        }
    }
}

impl ManufacturedSolution {
    fn k(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let k = self.k();
        self.amplitude * (k * x).sin() * (k * y).cos()
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        -2.0 * self.k() * self.k() * self.value(x, y)
    }

    /// `min (λ + Δψ*/2) = λ − k² |a|`.
    pub fn positivity_margin(&self, lambda: f64) -> f64 {
        lambda - self.k() * self.k() * self.amplitude.abs()
    }

    pub fn sample(&self, domain: &TorusDomain) -> GridField {
        GridField::from_fn(*domain, |x, y| self.value(x, y))
    }
}

/// `F = (λ + Δψ*/2) e^{−ψ*} / λ`, so that `ψ*` solves the continuous equation.
pub fn manufactured_case(
    sol: &ManufacturedSolution,
    domain: &TorusDomain,
    lambda: f64,
) -> Result<GridField> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let margin = sol.positivity_margin(lambda);
    if !(margin > 0.0) {
        return Err(Error::invalid(format!(
            "manufactured density not positive: min(lambda + lap/2) = {margin}"
        )));
    }
    Ok(GridField::from_fn(*domain, |x, y| {
        (lambda + 0.5 * sol.laplacian(x, y)) * (-sol.value(x, y)).exp() / lambda
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioBand {
    pub r_inner: f64,
    pub r_outer: f64,
    pub min: f64,
    pub max: f64,
    pub cells: usize,
}

/// Min/max of `e^ψ F / profile(|s − p|)` over annuli `[r_k, r_{k+1})`.
pub fn density_ratio_profile(
    psi: &GridField,
    f: &GridField,
    puncture: &Puncture,
    radii: &[f64],
) -> Result<Vec<RatioBand>> {
    psi.same_shape(f)?;
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] < 0.0 {
        return Err(Error::invalid("annulus radii must be increasing and nonnegative"));
    }
    if *radii.last().expect("nonempty") > puncture.cutoff {
        return Err(Error::invalid("annulus extends beyond the puncture cutoff"));
    }
    let dom = psi.domain();
    let center = dom.snap(puncture.position);
    let mut bands: Vec<RatioBand> = radii
        .windows(2)
        .map(|w| RatioBand {
            r_inner: w[0],
            r_outer: w[1],
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            cells: 0,
        })
        .collect();
    let n = dom.n();
    for j in 0..n {
        for i in 0..n {
            let d = dom.distance(center, dom.cell_center(i, j));
            if d == 0.0 {
                continue;
            }
            let Some(b) = bands.iter_mut().find(|b| d >= b.r_inner && d < b.r_outer) else {
                continue;
            };
            let ratio = psi.get(i, j).exp() * f.get(i, j) / puncture.profile(d);
            b.min = b.min.min(ratio);
            b.max = b.max.max(ratio);
            b.cells += 1;
        }
    }
    if let Some(b) = bands.iter().find(|b| b.cells == 0) {
        return Err(Error::invalid(format!(
            "annulus [{}, {}) contains no cell centers",
            b.r_inner, b.r_outer
        )));
    }
    Ok(bands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gke::density::{build_density, SingularDensity};

    fn dom(n: usize) -> TorusDomain {
        TorusDomain::unit(n).unwrap()
    }

    #[test]
    fn residual_of_constants() {
        let d = dom(16);
        let r = gke_residual(&GridField::zeros(d), &GridField::constant(d, 1.0), 1.0).unwrap();
        assert_eq!(r.sup_norm(), 0.0);
        let e = std::f64::consts::E;
        let r = gke_residual(&GridField::zeros(d), &GridField::constant(d, e), 0.5).unwrap();
        assert!(r.values().iter().all(|v| (v + (e - 1.0)).abs() < 1e-14));
        assert!(gke_residual(&GridField::zeros(d), &GridField::zeros(dom(32)), 1.0).is_err());
    }

    #[test]
    fn constant_density_gives_constant_potential() {
        let d = dom(16);
        let opts = NewtonOptions::default();
        let sol = gke_solve(&GridField::constant(d, 1.0), 1.0, &opts).unwrap();
        assert_eq!(sol.psi.sup_norm(), 0.0);
        let c: f64 = 0.7;
        let sol = gke_solve(&GridField::constant(d, c.exp()), 1.0, &opts).unwrap();
        assert!(sol.psi.values().iter().all(|v| (v + c).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_density() {
        let d = dom(16);
        let opts = NewtonOptions::default();
        assert!(gke_solve(&GridField::constant(d, 0.0), 1.0, &opts).is_err());
        assert!(gke_solve(&GridField::constant(d, 1.0), 0.0, &opts).is_err());
    }

    #[test]
    fn manufactured_positivity() {
        let d = dom(16);
        let bad = ManufacturedSolution {
            amplitude: 0.1,
            period: 1.0,
        };
        assert!(manufactured_case(&bad, &d, 1.0).is_err());
        let zero = ManufacturedSolution {
            amplitude: 0.0,
            period: 1.0,
        };
        let f = manufactured_case(&zero, &d, 1.0).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));
        let f = manufactured_case(&ManufacturedSolution::default(), &d, 1.0).unwrap();
        assert!(f.min() > 0.0);
        let a = 0.02;
        let k2 = 4.0 * PI * PI;
        // Extremes of (1 + Δψ*/2) e^{−ψ*} with ψ* = a u, Δψ* = −2k² a u, u ∈ [−1, 1].
        let hi = (1.0 + k2 * a) * a.exp();
        assert!(f.max() <= hi + 1e-12);
    }

    #[test]
    fn manufactured_error_is_second_order() {
        let sol = ManufacturedSolution::default();
        let opts = NewtonOptions::default().with_tol(1e-11);
        let err = |n: usize| {
            let d = dom(n);
            let f = manufactured_case(&sol, &d, 1.0).unwrap();
            let psi = gke_solve(&f, 1.0, &opts).unwrap().psi;
            psi.zip_map(&sol.sample(&d), |a, b| a - b).unwrap().sup_norm()
        };
        let ratio = err(32) / err(64);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn singular_solve_and_ratio_bands() {
        let d = dom(64);
        let p = Puncture::new([0.5, 0.5], 0.5, 1, 0.2, 1.0);
        let dens = SingularDensity::default().with_puncture(p.clone());
        let f = build_density(&dens, &d).unwrap();
        let sol = gke_solve(&f, 1.0, &NewtonOptions::default()).unwrap();
        assert!(sol.report.residual_sup <= 1e-9);
        let h = d.spacing();
        let bands = density_ratio_profile(&sol.psi, &f, &p, &[4.0 * h, 0.08, 0.1]).unwrap();
        let lo = bands.iter().map(|b| b.min).fold(f64::INFINITY, f64::min);
        let hi = bands.iter().map(|b| b.max).fold(0.0, f64::max);
        assert!(lo >= sol.psi.min().exp() * 0.999 && hi <= sol.psi.max().exp() * 1.001);
        assert!(density_ratio_profile(&sol.psi, &f, &p, &[0.1, 0.3]).is_err());
    }

    #[test]
    fn initial_guess_does_not_matter() {
        let d = dom(32);
        let dens = SingularDensity::default().with_puncture(Puncture::new([0.3, 0.3], 0.4, 2, 0.15, 1.0));
        let f = build_density(&dens, &d).unwrap();
        let opts = NewtonOptions::default();
        let base = gke_solve(&f, 1.0, &opts).unwrap().psi;
        for c in [1.0, -1.0] {
            let other = gke_solve_from(&f, 1.0, GridField::constant(d, c), &opts).unwrap().psi;
            let gap = base.zip_map(&other, |a, b| a - b).unwrap().sup_norm();
            assert!(gap <= 10.0 * opts.tol, "{gap}");
        }
    }
}
