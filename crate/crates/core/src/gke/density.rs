//! Singular densities `F = G · (1 + Σ η_l (profile_l − 1))` on the torus.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridField, TorusDomain};
use crate::quadrature::{try_integrate, try_integrate_pieces, Tolerance};

const CELL_AVERAGE_REL_TOL: f64 = 1e-6;
const RADIAL_REL_TOL: f64 = 1e-9;

/// Smooth cutoff: 1 on `[0, r/2]`, 0 on `[r, ∞)`, `C^∞` in between.
pub fn cutoff(d: f64, r: f64) -> f64 {
    if d <= 0.5 * r {
        return 1.0;
    }
    if d >= r {
        return 0.0;
    }
    let t = (d - 0.5 * r) / (0.5 * r);
    let bump = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    let a = bump(1.0 - t);
    a / (a + bump(t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Puncture {
    pub position: [f64; 2],
    pub beta: f64,
    pub log_power: u32,
    pub cutoff: f64,
    pub scale: f64,
}

impl Puncture {
    pub fn new(position: [f64; 2], beta: f64, log_power: u32, cutoff: f64, scale: f64) -> Self {
        Puncture {
            position,
            beta,
            log_power,
            cutoff,
            scale,
        }
    }

    /// `d^{-2(1-β)} (-log(d/R))^{N-1}`.
    pub fn profile(&self, d: f64) -> f64 {
        let mut v = d.powf(-2.0 * (1.0 - self.beta));
        if self.log_power > 1 {
            v *= (-(d / self.scale).ln()).powi(self.log_power as i32 - 1);
        }
        v
    }

    /// Multiplicative factor this puncture contributes at distance `d`.
    pub fn factor(&self, d: f64) -> f64 {
        let eta = cutoff(d, self.cutoff);
        if eta == 0.0 {
            1.0
        } else {
            1.0 + eta * (self.profile(d) - 1.0)
        }
    }

    fn validate(&self, period: f64) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if self.log_power < 1 {
            return Err(Error::invalid("log power N must be at least 1"));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 0.25 * period) {
            return Err(Error::invalid(format!(
                "cutoff radius {} must lie in (0, period/4)",
                self.cutoff
            )));
        }
        if !(self.scale > self.cutoff) {
            return Err(Error::invalid("profile scale must exceed the cutoff radius"));
        }
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("puncture position must be finite"));
        }
        Ok(())
    }
}

type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Smooth positive background factor `G`.
#[derive(Clone, Default)]
pub enum Background {
    #[default]
    One,
    Constant(f64),
    /// Cell-center samples, bilinearly interpolated.
    Grid(GridField),
    Function(FieldFn),
}

impl Background {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match self {
            Background::One => 1.0,
            Background::Constant(c) => *c,
            Background::Grid(g) => g.interpolate(p),
            Background::Function(f) => f(p[0], p[1]),
        }
    }
}

impl fmt::Debug for Background {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Background::One => f.write_str("One"),
            Background::Constant(c) => write!(f, "Constant({c})"),
            Background::Grid(g) => write!(f, "Grid({}x{})", g.n(), g.n()),
            Background::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SingularDensity {
    pub punctures: Vec<Puncture>,
    pub background: Background,
}

impl SingularDensity {
    pub fn smooth(background: Background) -> Self {
        SingularDensity {
            punctures: Vec::new(),
            background,
        }
    }

    pub fn with_puncture(mut self, p: Puncture) -> Self {
        self.punctures.push(p);
        self
    }

    pub fn validate(&self, domain: &TorusDomain) -> Result<()> {
        for p in &self.punctures {
            p.validate(domain.period())?;
        }
        let max_r = self.punctures.iter().map(|p| p.cutoff).fold(0.0, f64::max);
        for (a, pa) in self.punctures.iter().enumerate() {
            for pb in &self.punctures[a + 1..] {
                let d = domain.distance(pa.position, pb.position);
                if d < 4.0 * max_r {
                    return Err(Error::invalid(format!(
                        "punctures at distance {d} closer than 4 x max cutoff {max_r}"
                    )));
                }
            }
        }
        match &self.background {
            Background::Constant(c) if !(*c > 0.0) => {
                Err(Error::invalid("background must be strictly positive"))
            }
            Background::Grid(g) if !(g.min() > 0.0) => {
                Err(Error::invalid("background samples must be strictly positive"))
            }
            _ => Ok(()),
        }
    }

    /// Punctures moved to the centers of their cells.
    pub fn snapped(&self, domain: &TorusDomain) -> SingularDensity {
        let mut out = self.clone();
        for p in &mut out.punctures {
            p.position = domain.snap(p.position);
        }
        out
    }

    /// Product of all puncture factors at `x` (torus distances).
    pub fn singular_factor(&self, domain: &TorusDomain, x: [f64; 2]) -> f64 {
        self.punctures
            .iter()
            .map(|p| p.factor(domain.distance(p.position, x)))
            .fold(1.0, |acc, f| acc + (f - 1.0))
    }

    pub fn eval(&self, domain: &TorusDomain, x: [f64; 2]) -> f64 {
        self.background.eval(x) * self.singular_factor(domain, x)
    }

    /// Integrability exponent `β_min / (1 − β_min)`; infinite when every
    /// puncture has `β = 1` or there are none.
    pub fn epsilon_max(&self) -> f64 {
        let b = self.punctures.iter().map(|p| p.beta).fold(1.0, f64::min);
        if b >= 1.0 {
            f64::INFINITY
        } else {
            b / (1.0 - b)
        }
    }

    pub fn beta_min(&self) -> Option<f64> {
        self.punctures.iter().map(|p| p.beta).reduce(f64::min)
    }
}

/// Ray–box intersection for a ray from the origin in direction `(c, s)`
/// against `[x0,x1]×[y0,y1]`; returns `(t_in, t_out)` with `t_in ≥ 0`.
fn ray_box(c: f64, s: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> Option<(f64, f64)> {
    let mut t0: f64 = 0.0;
    let mut t1 = f64::INFINITY;
    for (dir, lo, hi) in [(c, x0, x1), (s, y0, y1)] {
        if dir.abs() < 1e-300 {
            if lo > 0.0 || hi < 0.0 {
                return None;
            }
        } else {
            let (a, b) = ((lo / dir), (hi / dir));
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
    }
    (t1 > t0).then_some((t0, t1))
}

/// Exact cell average of `F` over cell `(i, j)` by polar quadrature centered
/// on puncture `p`.
pub fn polar_cell_average(
    density: &SingularDensity,
    domain: &TorusDomain,
    p: &Puncture,
    i: usize,
    j: usize,
) -> Result<f64> {
    let h = domain.spacing();
    let center = domain.cell_center(i, j);
    let off = domain.displacement(p.position, center);
    let (x0, x1) = (off[0] - 0.5 * h, off[0] + 0.5 * h);
    let (y0, y1) = (off[1] - 0.5 * h, off[1] + 0.5 * h);
    let contains = x0 <= 0.0 && x1 >= 0.0 && y0 <= 0.0 && y1 >= 0.0;

    let mut breaks: Vec<f64> = vec![0.0, 2.0 * PI];
    for (cx, cy) in [(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
        if cx != 0.0 || cy != 0.0 {
            breaks.push(cy.atan2(cx).rem_euclid(2.0 * PI));
        }
    }
    // Directions along the cell edges through the origin are kinks too.
    for a in [0.0, 0.5 * PI, PI, 1.5 * PI] {
        breaks.push(a);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let q = (1.0 / (2.0 * p.beta)).max(1.0);
    // Distance to `p` is the polar radius itself; recomputing it from the
    // absolute position loses everything below one ulp of the coordinates.
    let eval_at = |r: f64, c: f64, s: f64| {
        let x = [p.position[0] + r * c, p.position[1] + r * s];
        let others: f64 = density
            .punctures
            .iter()
            .filter(|q| q.position != p.position)
            .map(|q| q.factor(domain.distance(q.position, x)) - 1.0)
            .sum();
        density.background.eval(x) * (p.factor(r) + others)
    };
    let mut angular = |theta: f64| -> Result<f64> {
        let (s, c) = theta.sin_cos();
        let Some((t_in, t_out)) = ray_box(c, s, x0, x1, y0, y1) else {
            return Ok(0.0);
        };
        let tol = Tolerance::relative(RADIAL_REL_TOL).with_abs(1e-300);
        if contains && t_in == 0.0 {
            // r = t_out u^q removes the r^{2β−1} endpoint singularity.
            let est = try_integrate(
                |u: f64| {
                    if u <= 0.0 {
                        return Ok(0.0);
                    }
                    let r = t_out * u.powf(q);
                    if r <= 0.0 {
                        return Ok(0.0);
                    }
                    let jac = q * t_out * u.powf(q - 1.0);
                    Ok(eval_at(r, c, s) * r * jac)
                },
                0.0,
                1.0,
                tol,
            )?;
            Ok(est.value)
        } else {
            let est = try_integrate(|r| Ok(eval_at(r, c, s) * r), t_in, t_out, tol)?;
            Ok(est.value)
        }
    };
    let est = try_integrate_pieces(
        &mut angular,
        &breaks,
        Tolerance::relative(CELL_AVERAGE_REL_TOL).with_abs(1e-300),
    )?;
    Ok(est.value / (h * h))
}

/// Sample `F` on the grid: point values away from punctures and exact cell
/// averages within `3h` of one.
pub fn build_density(density: &SingularDensity, domain: &TorusDomain) -> Result<GridField> {
    density.validate(domain)?;
    let snapped = density.snapped(domain);
    let h = domain.spacing();
    let n = domain.n();
    let mut values = Vec::with_capacity(domain.len());
    for j in 0..n {
        for i in 0..n {
            let c = domain.cell_center(i, j);
            let near = snapped
                .punctures
                .iter()
                .map(|p| (p, domain.distance(p.position, c)))
                .filter(|(_, d)| *d <= 3.0 * h + 1e-12 * h)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let v = match near {
                Some((p, _)) => polar_cell_average(&snapped, domain, p, i, j)?,
                None => snapped.eval(domain, c),
            };
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "density is not positive at cell ({i}, {j}): {v}"
                )));
            }
            values.push(v);
        }
    }
    GridField::from_vec(*domain, values)
}
