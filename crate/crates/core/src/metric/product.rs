//! Products of two completed surfaces with the Pythagorean distance
//! `d̃((a,a′),(b,b′)) = √(d₁(a,b)² + d₂(a′,b′)²)`.

use serde::Serialize;

use super::{ConformalDensity, MetricGraph, Stencil};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ProductSpace {
    pub first: MetricGraph,
    pub second: MetricGraph,
    first_density: ConformalDensity,
    second_density: ConformalDensity,
}

pub type ProductPoint = (usize, usize);

impl ProductSpace {
    pub fn build(first: ConformalDensity, second: ConformalDensity, stencil: Stencil) -> Result<Self> {
        Ok(ProductSpace {
            first: MetricGraph::build(&first, stencil)?,
            second: MetricGraph::build(&second, stencil)?,
            first_density: first,
            second_density: second,
        })
    }

    pub fn first_density(&self) -> &ConformalDensity {
        &self.first_density
    }

    pub fn second_density(&self) -> &ConformalDensity {
        &self.second_density
    }
}

pub fn combine(d1: f64, d2: f64) -> f64 {
    d1.hypot(d2)
}

pub fn product_distance(p: &ProductSpace, x: ProductPoint, y: ProductPoint) -> Result<f64> {
    let d1 = p.first.distance(x.0, y.0)?;
    let d2 = p.second.distance(x.1, y.1)?;
    Ok(combine(d1, d2))
}

/// Completion cases of the product metric in which a distance is defined as
/// a limit along sequences tending to the puncture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CompletionCase {
    /// `((s₁,s₁′), (s,s₁′))`: first coordinate approximated.
    PunctureToFiberPuncture,
    /// `((s,s₁′), (r,s′))`: second coordinate approximated.
    FiberPunctureToRegular,
    /// `((s₁,s₁′), (s,s′))`: both coordinates approximated.
    BothPunctures,
}

impl CompletionCase {
    pub const ALL: [CompletionCase; 3] = [
        CompletionCase::PunctureToFiberPuncture,
        CompletionCase::FiberPunctureToRegular,
        CompletionCase::BothPunctures,
    ];

    /// Endpoints and which coordinates of the first endpoint are limits.
    /// `s`, `r` are regular nodes of the first factor, `s2` of the second.
    pub fn endpoints(
        self,
        p: &ProductSpace,
        s: usize,
        r: usize,
        s2: usize,
    ) -> (ProductPoint, ProductPoint, (bool, bool)) {
        let s1 = p.first.puncture_node(0);
        let s1p = p.second.puncture_node(0);
        match self {
            CompletionCase::PunctureToFiberPuncture => ((s1, s1p), (s, s1p), (true, false)),
            CompletionCase::FiberPunctureToRegular => ((s, s1p), (r, s2), (false, true)),
            CompletionCase::BothPunctures => ((s1, s1p), (s, s2), (true, true)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceCheck {
    /// `d̃` along the sequence approaching in the `+x` direction, farthest first.
    pub along_x: Vec<f64>,
    pub along_y: Vec<f64>,
    /// `|d̃| difference between the closest members of the two sequences.
    pub deviation: f64,
    /// `d₁(u_k, v_k) + d₂(u′_k, v′_k)` for the closest members.
    pub cauchy_bound: f64,
    /// Largest gap between a closest member and the completion-node value.
    pub completion_gap: f64,
}

fn offset_node(g: &MetricGraph, node: usize, di: isize, dj: isize) -> usize {
    let dom = g.domain();
    let n = dom.n() as isize;
    let (i, j) = dom.coords(node);
    let i = (i as isize + di).rem_euclid(n) as usize;
    let j = (j as isize + dj).rem_euclid(n) as usize;
    dom.index(i, j)
}

/// Evaluate `d̃(x_k, y)` along two sequences `x_k → x` (one approaching
/// along `+x`, one along `+y`, `steps` cells out to one cell away) and
/// report how far the two limits disagree.
pub fn sequence_independence_check(
    p: &ProductSpace,
    case: CompletionCase,
    s: usize,
    r: usize,
    s2: usize,
    steps: usize,
) -> Result<SequenceCheck> {
    if steps == 0 {
        return Err(Error::invalid("need at least one sequence member"));
    }
    if p.first.puncture_nodes().is_empty() || p.second.puncture_nodes().is_empty() {
        return Err(Error::invalid("both factors need a puncture"));
    }
    let (x, y, approx) = case.endpoints(p, s, r, s2);
    let row1 = p.first.shortest_paths(y.0, None);
    let row2 = p.second.shortest_paths(y.1, None);
    let member = |k: usize, along_x: bool| -> ProductPoint {
        let k = k as isize;
        let (di, dj) = if along_x { (k, 0) } else { (0, k) };
        let a = if approx.0 { offset_node(&p.first, x.0, di, dj) } else { x.0 };
        let b = if approx.1 { offset_node(&p.second, x.1, di, dj) } else { x.1 };
        (a, b)
    };
    let value = |q: ProductPoint| combine(row1[q.0], row2[q.1]);
    let along_x: Vec<f64> = (1..=steps).rev().map(|k| value(member(k, true))).collect();
    let along_y: Vec<f64> = (1..=steps).rev().map(|k| value(member(k, false))).collect();
    let ux = member(1, true);
    let uy = member(1, false);
    let cauchy_bound = p.first.distance(ux.0, uy.0)? + p.second.distance(ux.1, uy.1)?;
    let limit = value(x);
    let last_x = *along_x.last().expect("nonempty");
    let last_y = *along_y.last().expect("nonempty");
    Ok(SequenceCheck {
        deviation: (last_x - last_y).abs(),
        cauchy_bound,
        completion_gap: (last_x - limit).abs().max((last_y - limit).abs()),
        along_x,
        along_y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductExcess {
    pub unconstrained: f64,
    pub constrained: f64,
    pub excess: f64,
    pub first_excess: f64,
    pub second_excess: f64,
}

/// Shortest product path confined to the complement of a coordinate ball in
/// each constrained factor, minus the unconstrained distance.
///
/// The confined region is a product of two length spaces, so its induced
/// length metric is again Pythagorean in the factor-constrained distances;
/// the minimum over boundary configurations therefore collapses to
/// `√(d₁ᶜ² + d₂ᶜ²)`.
pub fn product_curve_excess(
    p: &ProductSpace,
    x: ProductPoint,
    y: ProductPoint,
    first_ball: Option<(usize, f64)>,
    second_ball: Option<(usize, f64)>,
) -> Result<ProductExcess> {
    let factor = |g: &MetricGraph, a: usize, b: usize, ball: Option<(usize, f64)>| -> Result<(f64, f64)> {
        let free = g.distance(a, b)?;
        let constrained = match ball {
            Some((c, delta)) => g.constrained_distance(a, b, &g.ball_mask(c, delta))?,
            None => free,
        };
        Ok((free, constrained))
    };
    let (d1, c1) = factor(&p.first, x.0, y.0, first_ball)?;
    let (d2, c2) = factor(&p.second, x.1, y.1, second_ball)?;
    let unconstrained = combine(d1, d2);
    let constrained = combine(c1, c2);
    Ok(ProductExcess {
        unconstrained,
        constrained,
        excess: constrained - unconstrained,
        first_excess: c1 - d1,
        second_excess: c2 - d2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallBudget {
    pub delta: f64,
    pub diameter_sum: f64,
    pub boundary_sum: f64,
    /// Both sums are at most `ε/4`.
    pub holds: bool,
}

/// Ball diameters and boundary lengths about the two punctures at radius `delta`.
pub fn ball_budget(p: &ProductSpace, delta: f64, eps: f64) -> Result<BallBudget> {
    let c1 = p.first.puncture_node(0);
    let c2 = p.second.puncture_node(0);
    let diameter_sum = p.first.ball_diameter(c1, delta)? + p.second.ball_diameter(c2, delta)?;
    let boundary_sum = p.first_density.circle_length(p.first.position(c1), delta)?
        + p.second_density.circle_length(p.second.position(c2), delta)?;
    Ok(BallBudget {
        delta,
        diameter_sum,
        boundary_sum,
        holds: diameter_sum <= 0.25 * eps && boundary_sum <= 0.25 * eps,
    })
}

/// Largest candidate radius whose ball budget fits inside `ε/4`.
pub fn calibrate_forbidden_radius(p: &ProductSpace, eps: f64, candidates: &[f64]) -> Result<BallBudget> {
    let mut best: Option<BallBudget> = None;
    for &delta in candidates {
        let b = ball_budget(p, delta, eps)?;
        if b.holds && best.is_none_or(|x| b.delta > x.delta) {
            best = Some(b);
        }
    }
    best.ok_or_else(|| Error::invalid(format!("no candidate radius satisfies the eps = {eps} budget")))
}
