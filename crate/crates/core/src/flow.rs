//! Base-model continuity method and Kähler–Ricci flow.
//!
//! Write `A_t = e^{−t} ρ₀ + (1 − e^{−t}) λ` for the density of the reference
//! form at time `t` and `τ = 1 − e^{−t}`. The continuity family solves
//! `A_t + Δφ/2 = e^{φ/τ} F λ`; the flow is discretized by implicit Euler,
//! `(φ_{k+1} − φ_k)/dt = log((A_{t'} + Δφ_{k+1}/2)/(Fλ)) − φ_{k+1}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gke::{solve_semilinear, NewtonOptions, Puncture};
use crate::grid::{GridField, TorusDomain};

pub const MAX_STEP: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub density: GridField,
    pub lambda: f64,
    pub rho0: GridField,
    /// Sample times, strictly increasing and positive.
    pub times: Vec<f64>,
    pub newton: NewtonOptions,
    pub dt: f64,
}

impl FlowConfig {
    pub fn new(density: GridField, lambda: f64, rho0: GridField) -> Result<Self> {
        let cfg = FlowConfig {
            density,
            lambda,
            rho0,
            times: geometric_times(0.1, 30.0, 12)?,
            newton: NewtonOptions::default(),
            dt: 0.1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Result<Self> {
        self.times = times;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn with_newton(mut self, newton: NewtonOptions) -> Self {
        self.newton = newton;
        self
    }

    pub fn domain(&self) -> &TorusDomain {
        self.density.domain()
    }

    pub fn validate(&self) -> Result<()> {
        self.density.same_shape(&self.rho0)?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !(self.density.min() > 0.0) {
            return Err(Error::invalid("density must be strictly positive"));
        }
        if !(self.rho0.min() > 0.0) {
            return Err(Error::invalid("initial density must be strictly positive"));
        }
        if self.times.is_empty() || !(self.times[0] > 0.0) {
            return Err(Error::invalid("sample times must be positive"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sample times must be strictly increasing"));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_STEP) {
            return Err(Error::invalid(format!("step size must lie in (0, {MAX_STEP}]")));
        }
        Ok(())
    }

    /// `A_t` cellwise.
    pub fn reference_density(&self, t: f64) -> GridField {
        let decay = (-t).exp();
        let lam = self.lambda;
        self.rho0.map(|r| decay * r + (1.0 - decay) * lam)
    }
}

/// `count` times from `t0` to `t_end`, equally spaced in `log t`.
pub fn geometric_times(t0: f64, t_end: f64, count: usize) -> Result<Vec<f64>> {
    if !(t0 > 0.0 && t_end > t0) || count < 2 {
        return Err(Error::invalid("need 0 < t0 < t_end and at least two samples"));
    }
    let ratio = (t_end / t0).ln() / (count - 1) as f64;
    let mut out: Vec<f64> = (0..count).map(|k| t0 * (ratio * k as f64).exp()).collect();
    out[count - 1] = t_end;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub phi: GridField,
    pub residual: f64,
    /// Backward difference `(φ_{k+1} − φ_k)/dt` for flow states.
    pub phi_dot: Option<GridField>,
}

/// `min (A_t + Δ_h φ / 2)`; must stay positive.
pub fn positivity_margin(cfg: &FlowConfig, t: f64, phi: &GridField) -> f64 {
    let a = cfg.reference_density(t);
    let lap = phi.laplacian();
    a.values()
        .iter()
        .zip(lap.values())
        .map(|(a, l)| a + 0.5 * l)
        .fold(f64::INFINITY, f64::min)
}

fn check_positive(cfg: &FlowConfig, t: f64, phi: &GridField) -> Result<()> {
    let margin = positivity_margin(cfg, t, phi);
    if margin > 0.0 {
        Ok(())
    } else {
        Err(Error::PositivityLoss { t, margin })
    }
}

/// Solve the continuity family at time `t`, warm-starting from `warm`.
pub fn continuity_solve(cfg: &FlowConfig, t: f64, warm: Option<&GridField>) -> Result<FlowState> {
    if !(t > 0.0) {
        return Err(Error::invalid("continuity family needs t > 0"));
    }
    let tau = 1.0 - (-t).exp();
    let a = cfg.reference_density(t);
    let av = a.values();
    let fl: Vec<f64> = cfg.density.values().iter().map(|f| f * cfg.lambda).collect();
    let init = match warm {
        Some(w) => {
            w.same_shape(&cfg.density)?;
            w.clone()
        }
        None => GridField::zeros(*cfg.domain()),
    };
    let (phi, report) = solve_semilinear(
        |k, p| {
            let e = fl[k] * (p / tau).exp();
            (2.0 * (e - av[k]), 2.0 * e / tau)
        },
        init,
        &cfg.newton,
    )?;
    check_positive(cfg, t, &phi)?;
    Ok(FlowState {
        t,
        phi,
        residual: report.residual_sup,
        phi_dot: None,
    })
}

/// The `t = 0` state `φ ≡ 0`, recorded without solving (its residual is
/// reported as zero).
pub fn initial_state(cfg: &FlowConfig) -> FlowState {
    FlowState {
        t: 0.0,
        phi: GridField::zeros(*cfg.domain()),
        residual: 0.0,
        phi_dot: None,
    }
}

/// Continuity family at every configured time, warm-started in sequence.
pub fn continuity_trajectory(cfg: &FlowConfig) -> Result<Vec<FlowState>> {
    cfg.validate()?;
    let mut out = vec![initial_state(cfg)];
    for &t in &cfg.times {
        let warm = out.last().map(|s| s.phi.clone());
        out.push(continuity_solve(cfg, t, warm.as_ref())?);
    }
    Ok(out)
}

/// One implicit-Euler step of the flow from `state` with step `dt`.
pub fn krf_step(cfg: &FlowConfig, state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::invalid(format!("step size must lie in (0, {MAX_STEP}]")));
    }
    state.phi.same_shape(&cfg.density)?;
    let t_next = state.t + dt;
    let a = cfg.reference_density(t_next);
    let av = a.values();
    let fl: Vec<f64> = cfg.density.values().iter().map(|f| f * cfg.lambda).collect();
    let prev = state.phi.values();
    let gain = (1.0 + dt) / dt;
    let (phi, report) = solve_semilinear(
        |k, p| {
            let e = fl[k] * (gain * p - prev[k] / dt).exp();
            (2.0 * (e - av[k]), 2.0 * gain * e)
        },
        state.phi.clone(),
        &cfg.newton,
    )?;
    check_positive(cfg, t_next, &phi)?;
    let phi_dot = phi.zip_map(&state.phi, |a, b| (a - b) / dt)?;
    Ok(FlowState {
        t: t_next,
        phi,
        residual: report.residual_sup,
        phi_dot: Some(phi_dot),
    })
}

/// Run the flow from `φ ≡ 0` at `t = 0` with the configured step, keeping
/// the state nearest each sample time (sample times are rounded to step
/// multiples; duplicates collapse).
pub fn krf_trajectory(cfg: &FlowConfig) -> Result<Vec<FlowState>> {
    cfg.validate()?;
    let mut targets: Vec<usize> = cfg
        .times
        .iter()
        .map(|t| ((t / cfg.dt).round() as usize).max(1))
        .collect();
    targets.dedup();
    let last = *targets.last().expect("nonempty");
    let mut out = vec![initial_state(cfg)];
    let mut state = initial_state(cfg);
    let mut next = 0;
    for step in 1..=last {
        state = krf_step(cfg, &state, cfg.dt)?;
        // Keep the clock on exact step multiples.
        state.t = step as f64 * cfg.dt;
        if targets[next] == step {
            out.push(state.clone());
            next += 1;
        }
    }
    Ok(out)
}

/// Cells whose centers lie at distance at least `delta` from every puncture.
pub fn compact_mask(domain: &TorusDomain, punctures: &[Puncture], delta: f64) -> Result<Vec<bool>> {
    let n = domain.n();
    let mut mask = Vec::with_capacity(domain.len());
    for j in 0..n {
        for i in 0..n {
            let c = domain.cell_center(i, j);
            mask.push(
                punctures
                    .iter()
                    .all(|p| domain.distance(domain.snap(p.position), c) >= delta),
            );
        }
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::invalid(format!("compact set K_delta is empty for delta = {delta}")));
    }
    Ok(mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub t: f64,
    pub residual: f64,
    pub l1_dist: f64,
    pub sup_dist_kdelta: f64,
    /// `‖e^{φ̇+φ} − e^ψ‖_{L¹} / ‖e^ψ‖_{L¹}`, with `φ̇ = 0` where undefined.
    pub psi_gap_density: f64,
}

pub fn convergence_report(
    trajectory: &[FlowState],
    psi: &GridField,
    mask: &[bool],
) -> Result<Vec<ConvergenceRow>> {
    let exp_psi = psi.map(f64::exp);
    let norm = exp_psi.l1_norm();
    trajectory
        .iter()
        .map(|s| {
            let diff = s.phi.zip_map(psi, |a, b| a - b)?;
            let sup_k = diff
                .values()
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
            let exponent = match &s.phi_dot {
                Some(d) => s.phi.zip_map(d, |p, q| p + q)?,
                None => s.phi.clone(),
            };
            let gap = exponent.zip_map(&exp_psi, |e, g| e.exp() - g)?.l1_norm() / norm;
            Ok(ConvergenceRow {
                t: s.t,
                residual: s.residual,
                l1_dist: diff.l1_norm(),
                sup_dist_kdelta: sup_k,
                psi_gap_density: gap,
            })
        })
        .collect()
}
