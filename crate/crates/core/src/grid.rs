//! Square flat torus discretized by an `n × n` cell-centered grid.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusDomain {
    period: f64,
    n: usize,
}

impl TorusDomain {
    pub fn new(period: f64, n: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::invalid(format!("period must be positive, got {period}")));
        }
        if n < 16 || n % 2 != 0 {
            return Err(Error::invalid(format!("grid size must be even and at least 16, got {n}")));
        }
        Ok(TorusDomain { period, n })
    }

    pub fn unit(n: usize) -> Result<Self> {
        TorusDomain::new(1.0, n)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn area(&self) -> f64 {
        self.period * self.period
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.spacing();
        [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]
    }

    /// Wrap a coordinate difference to `[-period/2, period/2)`.
    pub fn wrap(&self, d: f64) -> f64 {
        let p = self.period;
        d - p * (d / p + 0.5).floor()
    }

    /// Minimal-image displacement from `a` to `b`.
    pub fn displacement(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        [self.wrap(b[0] - a[0]), self.wrap(b[1] - a[1])]
    }

    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.displacement(a, b);
        d[0].hypot(d[1])
    }

    /// Cell containing a point (coordinates reduced modulo the period).
    pub fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let h = self.spacing();
        let wrap = |x: f64| {
            let t = x.rem_euclid(self.period);
            ((t / h).floor() as usize).min(self.n - 1)
        };
        (wrap(p[0]), wrap(p[1]))
    }

    /// Center of the cell containing `p`.
    pub fn snap(&self, p: [f64; 2]) -> [f64; 2] {
        let (i, j) = self.cell_of(p);
        self.cell_center(i, j)
    }
}

/// Real field on a [`TorusDomain`] grid, stored row-major (`j * n + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: TorusDomain,
    data: Vec<f64>,
}

impl GridField {
    pub fn constant(domain: TorusDomain, value: f64) -> Self {
        GridField {
            domain,
            data: vec![value; domain.len()],
        }
    }

    pub fn zeros(domain: TorusDomain) -> Self {
        GridField::constant(domain, 0.0)
    }

    pub fn from_vec(domain: TorusDomain, data: Vec<f64>) -> Result<Self> {
        if data.len() != domain.len() {
            return Err(Error::invalid(format!(
                "field has {} entries, grid needs {}",
                data.len(),
                domain.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field entries must be finite"));
        }
        Ok(GridField { domain, data })
    }

    /// Sample `f` at cell centers.
    pub fn from_fn(domain: TorusDomain, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = domain.n();
        let mut data = Vec::with_capacity(domain.len());
        for j in 0..n {
            for i in 0..n {
                let [x, y] = domain.cell_center(i, j);
                data.push(f(x, y));
            }
        }
        GridField { domain, data }
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.domain.n()
    }

    pub fn spacing(&self) -> f64 {
        self.domain.spacing()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.domain.index(i, j)]
    }

    /// Periodic access with signed indices.
    pub fn get_wrapped(&self, i: isize, j: isize) -> f64 {
        let n = self.n() as isize;
        let i = i.rem_euclid(n) as usize;
        let j = j.rem_euclid(n) as usize;
        self.get(i, j)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.domain.index(i, j);
        self.data[k] = v;
    }

    pub fn same_shape(&self, other: &GridField) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::invalid(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.n(),
                self.n(),
                other.n(),
                other.n()
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            domain: self.domain,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        self.same_shape(other)?;
        Ok(GridField {
            domain: self.domain,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Σ |v| h²`.
    pub fn l1_norm(&self) -> f64 {
        let h = self.spacing();
        self.data.iter().map(|v| v.abs()).sum::<f64>() * h * h
    }

    /// `Σ v h²`.
    pub fn integral(&self) -> f64 {
        let h = self.spacing();
        self.data.iter().sum::<f64>() * h * h
    }

    /// Five-point periodic Laplacian.
    pub fn laplacian(&self) -> GridField {
        let n = self.n();
        let inv_h2 = 1.0 / (self.spacing() * self.spacing());
        let mut out = vec![0.0; self.data.len()];
        for j in 0..n {
            let jm = if j == 0 { n - 1 } else { j - 1 };
            let jp = if j + 1 == n { 0 } else { j + 1 };
            for i in 0..n {
                let im = if i == 0 { n - 1 } else { i - 1 };
                let ip = if i + 1 == n { 0 } else { i + 1 };
                let c = self.data[j * n + i];
                let s = self.data[j * n + im]
                    + self.data[j * n + ip]
                    + self.data[jm * n + i]
                    + self.data[jp * n + i];
                out[j * n + i] = (s - 4.0 * c) * inv_h2;
            }
        }
        GridField {
            domain: self.domain,
            data: out,
        }
    }

    /// Bilinear interpolation between cell centers, periodic.
    pub fn interpolate(&self, p: [f64; 2]) -> f64 {
        let h = self.spacing();
        let period = self.domain.period();
        let fx = p[0].rem_euclid(period) / h - 0.5;
        let fy = p[1].rem_euclid(period) / h - 0.5;
        let i0 = fx.floor();
        let j0 = fy.floor();
        let tx = fx - i0;
        let ty = fy - j0;
        let (i0, j0) = (i0 as isize, j0 as isize);
        let v00 = self.get_wrapped(i0, j0);
        let v10 = self.get_wrapped(i0 + 1, j0);
        let v01 = self.get_wrapped(i0, j0 + 1);
        let v11 = self.get_wrapped(i0 + 1, j0 + 1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }

    /// Long-format CSV dump: `i,j,x,y,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,x,y,value")?;
        let n = self.n();
        for j in 0..n {
            for i in 0..n {
                let [x, y] = self.domain.cell_center(i, j);
                writeln!(w, "{i},{j},{x},{y},{:e}", self.get(i, j))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_validation() {
        assert!(TorusDomain::unit(8).is_err());
        assert!(TorusDomain::unit(17).is_err());
        assert!(TorusDomain::new(0.0, 16).is_err());
        let d = TorusDomain::unit(16).unwrap();
        assert_eq!(d.spacing(), 1.0 / 16.0);
    }

    #[test]
    fn torus_distance_wraps() {
        let d = TorusDomain::unit(16).unwrap();
        assert!((d.distance([0.05, 0.5], [0.95, 0.5]) - 0.1).abs() < 1e-12);
        assert!((d.distance([0.0, 0.0], [0.5, 0.5]) - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(d.cell_of([1.01, -0.01]), (0, 15));
    }

    #[test]
    fn laplacian_of_trig_mode() {
        let d = TorusDomain::unit(64).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let f = GridField::from_fn(d, |x, y| (tau * x).sin() * (tau * y).cos());
        let lap = f.laplacian();
        let h = d.spacing();
        // Discrete symbol of the 5-point stencil on this mode.
        let sym = -2.0 * (4.0 / (h * h)) * (tau * h / 2.0).sin().powi(2);
        for k in 0..d.len() {
            assert!((lap.values()[k] - sym * f.values()[k]).abs() < 1e-9);
        }
        assert!(lap.integral().abs() < 1e-10);
    }

    #[test]
    fn norms() {
        let d = TorusDomain::unit(16).unwrap();
        let f = GridField::from_fn(d, |x, _| if x < 0.5 { -2.0 } else { 1.0 });
        assert_eq!(f.sup_norm(), 2.0);
        assert!((f.l1_norm() - 1.5).abs() < 1e-12);
        assert!((f.mean() + 0.5).abs() < 1e-12);
        assert_eq!(f.min(), -2.0);
        assert_eq!(f.max(), 1.0);
    }

    #[test]
    fn interpolation_reproduces_linear_data_inside() {
        let d = TorusDomain::unit(32).unwrap();
        let f = GridField::from_fn(d, |x, y| x + 2.0 * y);
        let v = f.interpolate([0.4, 0.3]);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let d = TorusDomain::unit(16).unwrap();
        let mut buf = Vec::new();
        GridField::zeros(d).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("i,j,x,y,value\n"));
        assert_eq!(text.lines().count(), 257);
    }
}
