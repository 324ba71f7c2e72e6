//! Distortion of a map between finite metric spaces together with a section
//! of it, and the product-collapse experiment built on top.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ConformalDensity, MetricGraph, Stencil};
use crate::error::{Error, Result};

pub trait FiniteMetric {
    fn size(&self) -> usize;
    fn dist(&self, i: usize, j: usize) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid("distance matrix must be square"));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::invalid("distance matrix needs a zero diagonal"));
            }
            for j in 0..n {
                let d = data[i * n + j];
                if !(d >= 0.0 && d.is_finite()) || d != data[j * n + i] {
                    return Err(Error::invalid("distances must be finite, nonnegative, symmetric"));
                }
            }
        }
        Ok(DistanceMatrix { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = if i == j { 0.0 } else { f(i.min(j), i.max(j)) };
            }
        }
        DistanceMatrix::new(n, data)
    }

    /// Graph distances among `nodes`.
    pub fn from_graph(g: &MetricGraph, nodes: &[usize]) -> Result<Self> {
        let rows = g.distances_from(nodes);
        DistanceMatrix::from_fn(nodes.len(), |i, j| rows[i][nodes[j]])
    }
}

impl FiniteMetric for DistanceMatrix {
    fn size(&self) -> usize {
        self.n
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsometryReport {
    /// Maxima of `|d_A(x,y) − d_B(fx,fy)|`, `|d_A(gs,gr) − d_B(s,r)|`,
    /// `d_A(x, gfx)`, `d_B(s, fgs)`.
    pub eps: [f64; 4],
    /// Distortion of the correspondence `{(x, fx)} ∪ {(gs, s)}`.
    pub distortion: f64,
    pub gh_upper_bound: f64,
    /// `max εᵢ / 8`, the scale at which all four conditions hold with constant 8.
    pub epsilon_equivalent: f64,
}

/// Evaluate the four ε-isometry conditions for `f: A → B` with section
/// `g: B → A` over all pairs.
pub fn epsilon_isometry_check(
    a: &dyn FiniteMetric,
    b: &dyn FiniteMetric,
    f: &[usize],
    g: &[usize],
) -> Result<IsometryReport> {
    if f.len() != a.size() || g.len() != b.size() {
        return Err(Error::invalid("maps must be defined on every point"));
    }
    if f.iter().any(|&y| y >= b.size()) || g.iter().any(|&x| x >= a.size()) {
        return Err(Error::invalid("map value out of range"));
    }
    if let Some(s) = (0..b.size()).find(|&s| f[g[s]] != s) {
        return Err(Error::invalid(format!("g is not a section of f: f(g({s})) != {s}")));
    }
    let mut eps = [0.0f64; 4];
    for x in 0..a.size() {
        for y in (x + 1)..a.size() {
            eps[0] = eps[0].max((a.dist(x, y) - b.dist(f[x], f[y])).abs());
        }
        eps[2] = eps[2].max(a.dist(x, g[f[x]]));
    }
    for s in 0..b.size() {
        for r in (s + 1)..b.size() {
            eps[1] = eps[1].max((a.dist(g[s], g[r]) - b.dist(s, r)).abs());
        }
        eps[3] = eps[3].max(b.dist(s, f[g[s]]));
    }
    // Every correspondence pair (gs, s) is also of the form (x, fx), so the
    // distortion is the first maximum.
    let distortion = eps[0].max(eps[1]);
    let max_eps = eps.iter().cloned().fold(0.0, f64::max);
    Ok(IsometryReport {
        eps,
        distortion,
        gh_upper_bound: 0.5 * distortion,
        epsilon_equivalent: max_eps / 8.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseRow {
    pub sigma: f64,
    pub eps: [f64; 4],
    pub gh_upper_bound: f64,
}

/// Sample points of `base × fiber` with the fiber density scaled by `σ²`,
/// project to the base, and measure the ε-isometry maxima for each `σ`.
///
/// Every sampled point gets a partner with the same base coordinate, and each
/// sampled base node gets the section point `(s, s₀′)`.
pub fn collapse_experiment(
    base: &ConformalDensity,
    fiber: &ConformalDensity,
    stencil: Stencil,
    sigmas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<CollapseRow>> {
    if samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("sigma values must be positive"));
    }
    let base_graph = MetricGraph::build(base, stencil)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = base_graph.node_count();
    let nf = fiber.domain().len();
    let mut base_nodes: Vec<usize> = (0..nb).collect();
    base_nodes.shuffle(&mut rng);
    base_nodes.truncate(samples.min(nb));
    base_nodes.sort_unstable();
    let anchor = rng.gen_range(0..nf);
    let mut points: Vec<(usize, usize)> = Vec::new();
    for &s in &base_nodes {
        points.push((s, anchor));
        points.push((s, rng.gen_range(0..nf)));
        points.push((s, rng.gen_range(0..nf)));
    }
    let f: Vec<usize> = points.iter().map(|&(s, _)| base_nodes.binary_search(&s).expect("sampled")).collect();
    let g: Vec<usize> = (0..base_nodes.len()).map(|k| 3 * k).collect();
    let db = DistanceMatrix::from_graph(&base_graph, &base_nodes)?;

    let mut fiber_nodes: Vec<usize> = points.iter().map(|p| p.1).collect();
    fiber_nodes.sort_unstable();
    fiber_nodes.dedup();
    let fiber_index = |v: usize| fiber_nodes.binary_search(&v).expect("sampled");

    sigmas
        .iter()
        .map(|&sigma| {
            let fiber_graph = MetricGraph::build(&fiber.scaled(sigma)?, stencil)?;
            let df = DistanceMatrix::from_graph(&fiber_graph, &fiber_nodes)?;
            let da = DistanceMatrix::from_fn(points.len(), |i, j| {
                let d2 = df.dist(fiber_index(points[i].1), fiber_index(points[j].1));
                db.dist(f[i], f[j]).hypot(d2)
            })?;
            let rep = epsilon_isometry_check(&da, &db, &f, &g)?;
            Ok(CollapseRow {
                sigma,
                eps: rep.eps,
                gh_upper_bound: rep.gh_upper_bound,
            })
        })
        .collect()
}
