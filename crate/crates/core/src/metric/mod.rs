//! Discrete length metrics `2ρ(dx² + dy²)` on the torus.
//!
//! Nodes are grid cells. The cell holding a puncture stands for the puncture
//! itself: its center is the puncture, and edges leaving it carry the radial
//! integral of `√(2ρ)`, which is finite whenever `β > 0`. Shortest paths then
//! realize the metric completion.

pub mod comparison;
pub mod isometry;
pub mod product;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gke::Puncture;
use crate::grid::{GridField, TorusDomain};
use crate::quadrature::{integrate, Tolerance};

pub use comparison::{bishop_gromov_radius, RadiusBound};
pub use isometry::{epsilon_isometry_check, DistanceMatrix, FiniteMetric, IsometryReport};
pub use product::{product_curve_excess, product_distance, ProductSpace};

const SEGMENT_REL_TOL: f64 = 1e-8;

/// Conformal factor `ρ = base · (1 + Σ η_l (profile_l − 1))`.
#[derive(Debug, Clone)]
pub struct ConformalDensity {
    base: GridField,
    punctures: Vec<Puncture>,
}

impl ConformalDensity {
    pub fn new(base: GridField, punctures: Vec<Puncture>) -> Result<Self> {
        if !(base.min() > 0.0) {
            return Err(Error::invalid("conformal density must be strictly positive"));
        }
        let domain = *base.domain();
        let mut snapped = punctures;
        for p in &mut snapped {
            if !(p.beta > 0.0 && p.beta <= 1.0) {
                return Err(Error::invalid(format!("beta must lie in (0, 1], got {}", p.beta)));
            }
            if p.log_power < 1 || !(p.cutoff > 0.0) || !(p.scale > p.cutoff) {
                return Err(Error::invalid("puncture needs N >= 1 and 0 < cutoff < scale"));
            }
            p.position = domain.snap(p.position);
        }
        for (a, pa) in snapped.iter().enumerate() {
            if snapped[a + 1..].iter().any(|pb| pb.position == pa.position) {
                return Err(Error::invalid("two punctures share a cell"));
            }
        }
        Ok(ConformalDensity {
            base,
            punctures: snapped,
        })
    }

    /// `ρ ≡ 1/2`: the Euclidean metric.
    pub fn flat(domain: TorusDomain) -> Self {
        ConformalDensity {
            base: GridField::constant(domain, 0.5),
            punctures: Vec::new(),
        }
    }

    /// Metric of `χ + i∂∂̄ψ = λ e^ψ F dx∧dy`: `ρ = λ e^ψ G / 2` times the
    /// singular factor of the punctures, `G` the smooth background of `F`.
    pub fn from_potential(
        psi: &GridField,
        background: &GridField,
        lambda: f64,
        punctures: Vec<Puncture>,
    ) -> Result<Self> {
        let base = psi.zip_map(background, |p, g| 0.5 * lambda * p.exp() * g)?;
        ConformalDensity::new(base, punctures)
    }

    /// Density multiplied by `κ²`, so that all lengths scale by `κ`.
    pub fn scaled(&self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid("metric scale must be positive"));
        }
        let k2 = kappa * kappa;
        Ok(ConformalDensity {
            base: self.base.map(|v| v * k2),
            punctures: self.punctures.clone(),
        })
    }

    pub fn domain(&self) -> &TorusDomain {
        self.base.domain()
    }

    pub fn punctures(&self) -> &[Puncture] {
        &self.punctures
    }

    pub fn base(&self) -> &GridField {
        &self.base
    }

    /// `ρ(x)`; `known` supplies the exact distance to one puncture, which the
    /// absolute coordinates cannot resolve below one ulp.
    fn rho_with(&self, x: [f64; 2], known: Option<(usize, f64)>) -> f64 {
        let dom = self.domain();
        let mut factor = 1.0;
        for (l, p) in self.punctures.iter().enumerate() {
            let d = match known {
                Some((k, d)) if k == l => d,
                _ => dom.distance(p.position, x),
            };
            factor += p.factor(d) - 1.0;
        }
        self.base.interpolate(x) * factor
    }

    pub fn rho(&self, x: [f64; 2]) -> f64 {
        self.rho_with(x, None)
    }

    /// `∫₀^len √(2ρ)` along the ray from puncture `l` in direction `dir`.
    pub fn radial_length(&self, l: usize, dir: [f64; 2], len: f64) -> Result<f64> {
        let p = &self.punctures[l];
        let norm = dir[0].hypot(dir[1]);
        let e = [dir[0] / norm, dir[1] / norm];
        // r = len · u^{1/β} turns r^{β−1} into a bounded integrand.
        let q = 1.0 / p.beta;
        let est = integrate(
            |u| {
                if u <= 0.0 {
                    return 0.0;
                }
                let r = len * u.powf(q);
                if r <= 0.0 {
                    return 0.0;
                }
                let x = [p.position[0] + r * e[0], p.position[1] + r * e[1]];
                let jac = q * len * u.powf(q - 1.0);
                (2.0 * self.rho_with(x, Some((l, r)))).sqrt() * jac
            },
            0.0,
            1.0,
            Tolerance::relative(SEGMENT_REL_TOL),
        )?;
        Ok(est.value)
    }

    /// Metric length of the straight segment `a → a + v` (unwrapped).
    pub fn segment_length(&self, a: [f64; 2], v: [f64; 2]) -> Result<f64> {
        let len = v[0].hypot(v[1]);
        let est = integrate(
            |s| (2.0 * self.rho([a[0] + s * v[0], a[1] + s * v[1]])).sqrt(),
            0.0,
            1.0,
            Tolerance::relative(SEGMENT_REL_TOL),
        )?;
        Ok(est.value * len)
    }

    /// Length of the coordinate circle of radius `delta` about `center`.
    pub fn circle_length(&self, center: [f64; 2], delta: f64) -> Result<f64> {
        let l = self.punctures.iter().position(|p| p.position == center);
        let est = integrate(
            |th| {
                let x = [center[0] + delta * th.cos(), center[1] + delta * th.sin()];
                let rho = match l {
                    Some(l) => self.rho_with(x, Some((l, delta))),
                    None => self.rho(x),
                };
                (2.0 * rho).sqrt() * delta
            },
            0.0,
            2.0 * std::f64::consts::PI,
            Tolerance::relative(SEGMENT_REL_TOL),
        )?;
        Ok(est.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stencil {
    Eight,
    Sixteen,
}

impl Stencil {
    pub fn from_count(k: u32) -> Result<Self> {
        match k {
            8 => Ok(Stencil::Eight),
            16 => Ok(Stencil::Sixteen),
            _ => Err(Error::invalid(format!("stencil must be 8 or 16, got {k}"))),
        }
    }

    /// Offsets with `dj > 0`, or `dj == 0 && di > 0`; the rest are their negatives.
    fn half_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Stencil::Eight => &[(1, 0), (-1, 1), (0, 1), (1, 1)],
            Stencil::Sixteen => &[(1, 0), (-1, 1), (0, 1), (1, 1), (2, 1), (-2, 1), (1, 2), (-1, 2)],
        }
    }

    /// Worst-case ratio of graph to Euclidean distance for a flat metric.
    pub fn worst_case_factor(self) -> f64 {
        match self {
            Stencil::Eight => 1.083,
            Stencil::Sixteen => 1.028,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricGraph {
    domain: TorusDomain,
    stencil: Stencil,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    puncture_nodes: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diameter {
    pub value: f64,
    /// False when the value is a sweep lower bound.
    pub exact: bool,
    pub endpoints: (usize, usize),
}

/// All-pairs diameter is exact up to this many nodes.
pub const EXACT_DIAMETER_LIMIT: usize = 4096;

impl MetricGraph {
    pub fn build(rho: &ConformalDensity, stencil: Stencil) -> Result<Self> {
        let dom = *rho.domain();
        let n = dom.n();
        let h = dom.spacing();
        let puncture_nodes: Vec<usize> = rho
            .punctures
            .iter()
            .map(|p| {
                let (i, j) = dom.cell_of(p.position);
                dom.index(i, j)
            })
            .collect();
        let near_radius = 4.0 * h;
        let offsets = stencil.half_offsets();
        let edge = |i: usize, j: usize, di: isize, dj: isize| -> Result<(usize, f64)> {
            let a = dom.cell_center(i, j);
            let v = [di as f64 * h, dj as f64 * h];
            let ni = (i as isize + di).rem_euclid(n as isize) as usize;
            let nj = (j as isize + dj).rem_euclid(n as isize) as usize;
            let u = dom.index(i, j);
            let w = dom.index(ni, nj);
            let len = v[0].hypot(v[1]);
            let weight = if let Some(l) = puncture_nodes.iter().position(|&k| k == u) {
                rho.radial_length(l, v, len)?
            } else if let Some(l) = puncture_nodes.iter().position(|&k| k == w) {
                rho.radial_length(l, [-v[0], -v[1]], len)?
            } else if rho.punctures.iter().any(|p| {
                let off = dom.displacement(a, p.position);
                segment_point_distance(v, off) <= near_radius
            }) {
                rho.segment_length(a, v)?
            } else {
                len * (2.0 * rho.rho([a[0] + 0.5 * v[0], a[1] + 0.5 * v[1]])).sqrt()
            };
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::invalid(format!("non-positive edge weight at cell ({i}, {j})")));
            }
            Ok((w, weight))
        };
        let half: Vec<Vec<(usize, f64)>> = (0..dom.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = dom.coords(k);
                offsets.iter().map(|&(di, dj)| edge(i, j, di, dj)).collect()
            })
            .collect::<Result<_>>()?;
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(2 * offsets.len()); dom.len()];
        for (u, list) in half.iter().enumerate() {
            for &(w, weight) in list {
                adj[u].push((w, weight));
                adj[w].push((u, weight));
            }
        }
        let mut row_ptr = Vec::with_capacity(dom.len() + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for list in adj {
            for (w, weight) in list {
                cols.push(w);
                weights.push(weight);
            }
            row_ptr.push(cols.len());
        }
        Ok(MetricGraph {
            domain: dom,
            stencil,
            row_ptr,
            cols,
            weights,
            puncture_nodes,
        })
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.domain
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn node_count(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Node standing for puncture `l` of the density.
    pub fn puncture_node(&self, l: usize) -> usize {
        self.puncture_nodes[l]
    }

    pub fn puncture_nodes(&self) -> &[usize] {
        &self.puncture_nodes
    }

    pub fn node_at(&self, x: [f64; 2]) -> usize {
        let (i, j) = self.domain.cell_of(x);
        self.domain.index(i, j)
    }

    pub fn position(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.domain.coords(node);
        self.domain.cell_center(i, j)
    }

    pub fn neighbours(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[node]..self.row_ptr[node + 1];
        self.cols[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Single-source shortest paths; forbidden nodes are never entered.
    pub fn shortest_paths(&self, source: usize, forbidden: Option<&[bool]>) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.node_count()];
        if forbidden.is_some_and(|f| f[source]) {
            return dist;
        }
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapItem { dist: 0.0, node: source });
        while let Some(HeapItem { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for (w, weight) in self.neighbours(node) {
                if forbidden.is_some_and(|f| f[w]) {
                    continue;
                }
                let nd = d + weight;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(HeapItem { dist: nd, node: w });
                }
            }
        }
        dist
    }

    fn check_node(&self, a: usize) -> Result<()> {
        if a >= self.node_count() {
            return Err(Error::invalid(format!("node {a} out of range")));
        }
        Ok(())
    }

    pub fn distance(&self, a: usize, b: usize) -> Result<f64> {
        self.check_node(a)?;
        self.check_node(b)?;
        let d = self.shortest_paths(a, None)[b];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Separated { from: a, to: b })
        }
    }

    /// Rows of shortest-path distances from each source, computed in parallel.
    pub fn distances_from(&self, sources: &[usize]) -> Vec<Vec<f64>> {
        sources.par_iter().map(|&s| self.shortest_paths(s, None)).collect()
    }

    fn farthest(row: &[f64]) -> (usize, f64) {
        row.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &d)| if d > acc.1 { (k, d) } else { acc })
    }

    /// Exact diameter for small graphs, otherwise a four-sweep lower bound.
    pub fn diameter(&self) -> Diameter {
        if self.node_count() <= EXACT_DIAMETER_LIMIT {
            let best = (0..self.node_count())
                .into_par_iter()
                .map(|s| {
                    let (t, d) = Self::farthest(&self.shortest_paths(s, None));
                    (d, s, t)
                })
                .reduce(
                    || (f64::NEG_INFINITY, 0, 0),
                    |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
                );
            return Diameter {
                value: best.0,
                exact: true,
                endpoints: (best.1, best.2),
            };
        }
        let mut best = (f64::NEG_INFINITY, 0, 0);
        let mut source = 0;
        for _ in 0..4 {
            let (t, d) = Self::farthest(&self.shortest_paths(source, None));
            if d > best.0 {
                best = (d, source, t);
            }
            source = t;
        }
        Diameter {
            value: best.0,
            exact: false,
            endpoints: (best.1, best.2),
        }
    }

    /// Nodes whose centers lie within coordinate distance `delta` of `center`.
    pub fn ball(&self, center: usize, delta: f64) -> Vec<usize> {
        let c = self.position(center);
        (0..self.node_count())
            .filter(|&k| self.domain.distance(c, self.position(k)) <= delta)
            .collect()
    }

    pub fn ball_mask(&self, center: usize, delta: f64) -> Vec<bool> {
        let mut mask = vec![false; self.node_count()];
        for k in self.ball(center, delta) {
            mask[k] = true;
        }
        mask
    }

    /// Metric diameter of the coordinate ball of radius `delta`.
    pub fn ball_diameter(&self, center: usize, delta: f64) -> Result<f64> {
        self.check_node(center)?;
        let members = self.ball(center, delta);
        if members.is_empty() {
            return Err(Error::invalid("ball contains no nodes"));
        }
        let rows = self.distances_from(&members);
        Ok(rows
            .iter()
            .map(|row| members.iter().map(|&m| row[m]).fold(0.0, f64::max))
            .fold(0.0, f64::max))
    }

    pub fn constrained_distance(&self, a: usize, b: usize, forbidden: &[bool]) -> Result<f64> {
        self.check_node(a)?;
        self.check_node(b)?;
        if forbidden.len() != self.node_count() {
            return Err(Error::invalid("forbidden mask has the wrong length"));
        }
        if forbidden[a] || forbidden[b] {
            return Err(Error::invalid("endpoints must lie outside the forbidden set"));
        }
        let d = self.shortest_paths(a, Some(forbidden))[b];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Separated { from: a, to: b })
        }
    }

    /// Reroute `a → b` around the coordinate ball `B(center, delta)` and
    /// compare the excess with twice the ball's diameter plus stencil slack.
    pub fn detour_check(&self, a: usize, b: usize, center: usize, delta: f64) -> Result<DetourCheck> {
        let mask = self.ball_mask(center, delta);
        let unconstrained = self.distance(a, b)?;
        let constrained = self.constrained_distance(a, b, &mask)?;
        let ball_diameter = self.ball_diameter(center, delta)?;
        let slack = (self.stencil.worst_case_factor() - 1.0) * unconstrained;
        let excess = constrained - unconstrained;
        let bound = 2.0 * ball_diameter + slack;
        Ok(DetourCheck {
            unconstrained,
            constrained,
            excess,
            ball_diameter,
            slack,
            bound,
            holds: excess <= bound,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetourCheck {
    pub unconstrained: f64,
    pub constrained: f64,
    pub excess: f64,
    pub ball_diameter: f64,
    pub slack: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Distance from point `p` to the segment `0 → v`.
fn segment_point_distance(v: [f64; 2], p: [f64; 2]) -> f64 {
    let vv = v[0] * v[0] + v[1] * v[1];
    let t = ((p[0] * v[0] + p[1] * v[1]) / vv).clamp(0.0, 1.0);
    (p[0] - t * v[0]).hypot(p[1] - t * v[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_graph(n: usize, stencil: Stencil) -> MetricGraph {
        MetricGraph::build(&ConformalDensity::flat(TorusDomain::unit(n).unwrap()), stencil).unwrap()
    }

    fn half_puncture(n: usize) -> (ConformalDensity, MetricGraph) {
        let d = TorusDomain::unit(n).unwrap();
        let rho = ConformalDensity::new(
            GridField::constant(d, 0.5),
            vec![Puncture::new([0.5, 0.5], 0.5, 1, 0.2, 1.0)],
        )
        .unwrap();
        let g = MetricGraph::build(&rho, Stencil::Eight).unwrap();
        (rho, g)
    }

    #[test]
    fn flat_axis_edges_are_exact() {
        let g = flat_graph(16, Stencil::Eight);
        let h = 1.0 / 16.0;
        for (w, weight) in g.neighbours(0) {
            let p = g.position(w);
            let axis = (p[0] - g.position(0)[0]).abs() < 1e-12 || (p[1] - g.position(0)[1]).abs() < 1e-12;
            if axis {
                assert!((weight - h).abs() < 1e-15);
            }
        }
        let a = g.node_at([0.03, 0.03]);
        let b = g.node_at([0.53, 0.03]);
        assert!((g.distance(a, b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flat_diagonal_within_stencil_bounds() {
        for stencil in [Stencil::Eight, Stencil::Sixteen] {
            let g = flat_graph(32, stencil);
            let a = g.node_at([0.01, 0.01]);
            let row = g.shortest_paths(a, None);
            for k in 0..g.node_count() {
                let e = g.domain().distance(g.position(a), g.position(k));
                assert!(row[k] >= e - 1e-12);
                assert!(row[k] <= stencil.worst_case_factor() * e + 1e-12);
            }
        }
    }

    #[test]
    fn flat_diameter() {
        let d = flat_graph(32, Stencil::Eight).diameter();
        assert!(d.exact);
        assert!((d.value - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn puncture_edges_match_radial_antiderivative() {
        let (_, g) = half_puncture(32);
        let p = g.puncture_node(0);
        let h: f64 = 1.0 / 32.0;
        // Inside r ≤ cutoff/2 the length element is r^{-1/2}: length 2√r.
        for (_, weight) in g.neighbours(p) {
            let axis = (weight - 2.0 * h.sqrt()).abs() < 1e-7;
            let diag = (weight - 2.0 * (2f64.sqrt() * h).sqrt()).abs() < 1e-7;
            assert!(axis || diag, "{weight}");
        }
        let row = g.shortest_paths(p, None);
        let target = g.node_at([0.5 + 3.0 * h, 0.5]);
        assert!((row[target] - 2.0 * (3.0 * h).sqrt()).abs() < 1e-7);
    }

    #[test]
    fn small_beta_puncture_edge() {
        let d = TorusDomain::unit(32).unwrap();
        for beta in [0.2, 0.1] {
            let rho = ConformalDensity::new(
                GridField::constant(d, 0.5),
                vec![Puncture::new([0.5, 0.5], beta, 1, 0.2, 1.0)],
            )
            .unwrap();
            let h = d.spacing();
            let w = rho.radial_length(0, [1.0, 0.0], h).unwrap();
            let want = h.powf(beta) / beta;
            assert!(((w - want) / want).abs() < 1e-7, "{w} vs {want}");
        }
    }

    #[test]
    fn metric_axioms_on_sample() {
        let (_, g) = half_puncture(16);
        let nodes = [0, 17, 100, g.puncture_node(0), 255];
        let rows = g.distances_from(&nodes);
        for (x, rx) in nodes.iter().zip(&rows) {
            assert_eq!(rx[*x], 0.0);
            for (y, ry) in nodes.iter().zip(&rows) {
                assert!((rx[*y] - ry[*x]).abs() <= 1e-14 * rx[*y]);
                for z in nodes {
                    assert!(rx[z] <= rx[*y] + ry[z] + 1e-15);
                }
            }
        }
    }

    #[test]
    fn balls_and_detours() {
        let (_, g) = half_puncture(32);
        let p = g.puncture_node(0);
        assert_eq!(g.ball_diameter(p, 0.0).unwrap(), 0.0);
        let small = g.ball_diameter(p, 0.05).unwrap();
        let large = g.ball_diameter(p, 0.1).unwrap();
        assert!(small > 0.0 && small < large);
        let a = g.node_at([0.3, 0.5]);
        let b = g.node_at([0.7, 0.5]);
        // A cone point of angle π: geodesics between opposite points already
        // go around it, so the puncture ball costs nothing here.
        let check = g.detour_check(a, b, p, 0.05).unwrap();
        assert!(check.holds, "{check:?}");
        let near = g.detour_check(g.node_at([0.44, 0.5]), g.node_at([0.5, 0.44]), p, 0.05).unwrap();
        assert!(near.holds, "{near:?}");
        let flat = flat_graph(32, Stencil::Eight);
        let mid = flat.node_at([0.5, 0.5]);
        let blocked = flat.detour_check(a, b, mid, 0.05).unwrap();
        assert!(blocked.excess > 0.0 && blocked.holds, "{blocked:?}");
        let far = g.detour_check(g.node_at([0.1, 0.1]), g.node_at([0.2, 0.1]), p, 0.05).unwrap();
        assert_eq!(far.excess, 0.0);
        let empty = vec![false; g.node_count()];
        assert_eq!(g.constrained_distance(a, b, &empty).unwrap(), g.distance(a, b).unwrap());
    }

    #[test]
    fn separation_is_reported() {
        let g = flat_graph(16, Stencil::Eight);
        let a = g.node_at([0.5, 0.5]);
        let mut mask = vec![false; g.node_count()];
        for w in g.neighbours(a).map(|(w, _)| w).collect::<Vec<_>>() {
            mask[w] = true;
        }
        assert!(matches!(
            g.constrained_distance(a, 0, &mask),
            Err(Error::Separated { .. })
        ));
    }

    #[test]
    fn scaling_scales_distances() {
        let (rho, g) = half_puncture(16);
        let gs = MetricGraph::build(&rho.scaled(0.1).unwrap(), Stencil::Eight).unwrap();
        let a = g.puncture_node(0);
        let d1 = g.distance(a, 3).unwrap();
        let d2 = gs.distance(a, 3).unwrap();
        assert!((d2 - 0.1 * d1).abs() < 1e-9 * d1);
    }

    #[test]
    fn circle_length_near_puncture() {
        let (rho, _) = half_puncture(32);
        let c = rho.punctures()[0].position;
        let delta: f64 = 0.04;
        // √(2ρ) = δ^{-1/2} on the circle.
        let want = 2.0 * std::f64::consts::PI * delta.sqrt();
        assert!((rho.circle_length(c, delta).unwrap() - want).abs() < 1e-9);
    }
}
