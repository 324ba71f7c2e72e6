//! Metric, product and collapse subcommands.

use std::path::Path;

use collapse_core::gke::gke_solve;
use collapse_core::grid::{GridField, TorusDomain};
use collapse_core::metric::isometry::collapse_experiment;
use collapse_core::metric::product::{
    calibrate_forbidden_radius, sequence_independence_check, BallBudget, CompletionCase, SequenceCheck,
};
use collapse_core::metric::{
    product_curve_excess, ConformalDensity, DetourCheck, MetricGraph, ProductSpace, Stencil,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{load_density, stencil, Density, Loaded, MetricSource};
use crate::error::CliError;
use crate::output::{csv_finish, csv_writer, emit, json_bytes, num, ConfigHash};
use crate::{CollapseArgs, MetricArgs, Outcome, ProductArgs};

/// The conformal density a config describes, at the configured scale.
fn conformal(d: &Density, scale: Option<f64>) -> Result<ConformalDensity, CliError> {
    let section = d.metric();
    let psi = match section.source {
        MetricSource::Gke => gke_solve(&d.f()?, d.config.lambda, &d.newton())?.psi,
        MetricSource::Profile => GridField::zeros(d.domain),
    };
    let rho = ConformalDensity::from_potential(&psi, &d.background, d.config.lambda, d.punctures())?;
    Ok(rho.scaled(scale.unwrap_or(section.scale))?)
}

fn load_metric(path: &Path, command: &str, scale: Option<f64>, stencil_flag: Option<u32>) -> Result<(Loaded<Density>, ConformalDensity, Stencil), CliError> {
    let mut loaded = load_density(path, command)?;
    let st = stencil(stencil_flag, loaded.value.metric().stencil)?;
    loaded.hash.option("scale", scale);
    loaded.hash.option("stencil", st);
    let rho = conformal(&loaded.value, scale)?;
    Ok((loaded, rho, st))
}

fn read_pairs(path: &Path, hash: &mut ConfigHash) -> Result<Vec<([f64; 2], [f64; 2])>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    hash.update("pairs", &bytes);
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let headers = reader.headers()?.clone();
    let cols: Vec<usize> = ["x1", "y1", "x2", "y2"]
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| CliError::Validation(format!("{}: missing column {name}", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let mut pairs = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let v: Vec<f64> = cols
            .iter()
            .map(|&c| {
                rec.get(c)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| CliError::Validation(format!("{}: bad coordinate", path.display())))
            })
            .collect::<Result<_, _>>()?;
        pairs.push(([v[0], v[1]], [v[2], v[3]]));
    }
    if pairs.is_empty() {
        return Err(CliError::Validation(format!("{}: no pairs", path.display())));
    }
    Ok(pairs)
}

/// Each puncture to four points half its cutoff away; without punctures,
/// axis and diagonal pairs across a quarter of the torus.
fn default_pairs(rho: &ConformalDensity) -> Vec<([f64; 2], [f64; 2])> {
    let dirs = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    let period = rho.domain().period();
    if rho.punctures().is_empty() {
        let a = [0.25 * period, 0.25 * period];
        return [[0.25, 0.0], [0.0, 0.25], [0.25, 0.25], [0.5, 0.25]]
            .iter()
            .map(|v| (a, [a[0] + v[0] * period, a[1] + v[1] * period]))
            .collect();
    }
    rho.punctures()
        .iter()
        .flat_map(|p| {
            let r = 0.5 * p.cutoff;
            dirs.iter()
                .map(move |d| (p.position, [p.position[0] + r * d[0], p.position[1] + r * d[1]]))
        })
        .collect()
}

#[derive(Serialize)]
struct Completion {
    puncture: usize,
    direction: [f64; 2],
    graph: f64,
    radial: f64,
    relative_gap: f64,
}

#[derive(Serialize)]
struct BallCheck {
    puncture: usize,
    eps: f64,
    exponent: i32,
    delta: f64,
    ball_diameter: f64,
    bound: f64,
    holds: bool,
}

#[derive(Serialize)]
struct Detour {
    puncture: usize,
    delta: f64,
    #[serde(flatten)]
    check: DetourCheck,
}

#[derive(Serialize)]
struct MetricSummary {
    kind: &'static str,
    config_hash: String,
    stencil: u32,
    nodes: usize,
    diameter: f64,
    diameter_exact: bool,
    completions: Vec<Completion>,
    ball_checks: Vec<BallCheck>,
    detours: Vec<Detour>,
}

fn stencil_count(s: Stencil) -> u32 {
    match s {
        Stencil::Eight => 8,
        Stencil::Sixteen => 16,
    }
}

fn offset(dom: &TorusDomain, p: [f64; 2], v: [f64; 2]) -> [f64; 2] {
    let wrap = |x: f64| x.rem_euclid(dom.period());
    [wrap(p[0] + v[0]), wrap(p[1] + v[1])]
}

pub fn metric(args: &MetricArgs) -> Result<Outcome, CliError> {
    if !(args.eps > 0.0 && args.eps < 1.0) || args.ball_exponent < 1 {
        return Err(CliError::Validation("need 0 < eps < 1 and a positive ball exponent".into()));
    }
    let (mut loaded, rho, st) = load_metric(&args.config, "metric", args.scale, args.stencil)?;
    let pairs = match &args.pairs {
        Some(p) => read_pairs(p, &mut loaded.hash)?,
        None => default_pairs(&rho),
    };
    loaded.hash.option("eps", (args.eps, args.ball_exponent));
    let hash = loaded.hash.hex();
    let g = MetricGraph::build(&rho, st)?;
    let dom = *rho.domain();

    let mut w = csv_writer();
    w.write_record(["x1", "y1", "x2", "y2", "distance", "coordinate_distance", "config_hash"])?;
    for (a, b) in &pairs {
        let (na, nb) = (g.node_at(*a), g.node_at(*b));
        let (pa, pb) = (g.position(na), g.position(nb));
        let d = g.distance(na, nb)?;
        w.write_record([
            num(pa[0]),
            num(pa[1]),
            num(pb[0]),
            num(pb[1]),
            num(d),
            num(dom.distance(pa, pb)),
            hash.clone(),
        ])?;
    }
    if let Some(out) = &args.out {
        emit(Some(out), &csv_finish(w)?)?;
    }

    let diameter = g.diameter();
    let mut completions = Vec::new();
    let mut ball_checks = Vec::new();
    let mut detours = Vec::new();
    for (l, p) in rho.punctures().iter().enumerate() {
        let center = g.puncture_node(l);
        for dir in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let r = 0.5 * p.cutoff;
            let target = g.node_at(offset(&dom, p.position, [r * dir[0], r * dir[1]]));
            let v = dom.displacement(p.position, g.position(target));
            let graph = g.distance(center, target)?;
            let radial = rho.radial_length(l, v, v[0].hypot(v[1]))?;
            completions.push(Completion {
                puncture: l,
                direction: dir,
                graph,
                radial,
                relative_gap: (graph - radial).abs() / radial,
            });
        }
        let delta = args.eps.powi(args.ball_exponent);
        let ball_diameter = g.ball_diameter(center, delta)?;
        ball_checks.push(BallCheck {
            puncture: l,
            eps: args.eps,
            exponent: args.ball_exponent,
            delta,
            ball_diameter,
            bound: 0.5 * args.eps,
            holds: ball_diameter <= 0.5 * args.eps,
        });
        let delta = 0.25 * p.cutoff;
        let a = g.node_at(offset(&dom, p.position, [-0.5 * p.cutoff, 0.0]));
        let b = g.node_at(offset(&dom, p.position, [0.5 * p.cutoff, 0.0]));
        detours.push(Detour {
            puncture: l,
            delta,
            check: g.detour_check(a, b, center, delta)?,
        });
    }
    let summary = MetricSummary {
        kind: "metric",
        config_hash: hash,
        stencil: stencil_count(st),
        nodes: g.node_count(),
        diameter: diameter.value,
        diameter_exact: diameter.exact,
        completions,
        ball_checks,
        detours,
    };
    emit(args.summary.as_deref(), &json_bytes(&summary))?;
    Ok(Outcome {
        config_paths: vec![args.config.clone()],
        output_paths: [&args.out, &args.summary].into_iter().flatten().cloned().collect(),
        seed: None,
        config_hash: summary.config_hash,
    })
}

#[derive(Serialize)]
struct NamedSequenceCheck {
    case: CompletionCase,
    #[serde(flatten)]
    check: SequenceCheck,
}

#[derive(Serialize)]
struct ProductSummary {
    kind: &'static str,
    config_hash: String,
    eps: f64,
    budget: BallBudget,
    pairs: usize,
    max_excess: f64,
    holds: bool,
    sequence_checks: Vec<NamedSequenceCheck>,
}

/// Candidate ball radii: whole multiples of the coarser grid spacing up to
/// half the smaller cutoff.
fn radius_candidates(p: &ProductSpace) -> Vec<f64> {
    let h = p.first.domain().spacing().max(p.second.domain().spacing());
    let cutoff = p
        .first_density()
        .punctures()
        .iter()
        .chain(p.second_density().punctures())
        .map(|q| q.cutoff)
        .fold(f64::INFINITY, f64::min);
    (1..).map(|k| k as f64 * h).take_while(|&r| r <= 0.5 * cutoff).collect()
}

pub fn product(args: &ProductArgs) -> Result<Outcome, CliError> {
    if !(args.eps > 0.0) || args.pairs == 0 {
        return Err(CliError::Validation("need eps > 0 and at least one pair".into()));
    }
    let (first, rho1, st) = load_metric(&args.first, "product", args.scale, args.stencil)?;
    let (second, rho2, _) = load_metric(&args.second, "product", args.scale, Some(stencil_count(st)))?;
    if rho1.punctures().is_empty() || rho2.punctures().is_empty() {
        return Err(CliError::Validation("both factors need a puncture".into()));
    }
    let mut hash = first.hash.clone();
    hash.merge(&second.hash);
    hash.option("product", (args.eps, args.pairs, args.seed));
    let hex = hash.hex();

    let p = ProductSpace::build(rho1, rho2, st)?;
    let budget = calibrate_forbidden_radius(&p, args.eps, &radius_candidates(&p))?;
    let c1 = p.first.puncture_node(0);
    let c2 = p.second.puncture_node(0);
    let ball1 = p.first.ball_mask(c1, budget.delta);
    let ball2 = p.second.ball_mask(c2, budget.delta);
    let free1: Vec<usize> = (0..p.first.node_count()).filter(|&k| !ball1[k]).collect();
    let free2: Vec<usize> = (0..p.second.node_count()).filter(|&k| !ball2[k]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut w = csv_writer();
    w.write_record([
        "x1", "y1", "x1p", "y1p", "x2", "y2", "x2p", "y2p", "unconstrained", "constrained", "excess", "eps", "holds",
        "config_hash",
    ])?;
    let mut max_excess = f64::NEG_INFINITY;
    for _ in 0..args.pairs {
        let x = (free1[rng.gen_range(0..free1.len())], free2[rng.gen_range(0..free2.len())]);
        let y = (free1[rng.gen_range(0..free1.len())], free2[rng.gen_range(0..free2.len())]);
        let e = product_curve_excess(&p, x, y, Some((c1, budget.delta)), Some((c2, budget.delta)))?;
        max_excess = max_excess.max(e.excess);
        let (a, ap, b, bp) = (p.first.position(x.0), p.second.position(x.1), p.first.position(y.0), p.second.position(y.1));
        w.write_record([
            num(a[0]),
            num(a[1]),
            num(ap[0]),
            num(ap[1]),
            num(b[0]),
            num(b[1]),
            num(bp[0]),
            num(bp[1]),
            num(e.unconstrained),
            num(e.constrained),
            num(e.excess),
            num(args.eps),
            (e.excess <= args.eps).to_string(),
            hex.clone(),
        ])?;
    }
    if let Some(out) = &args.out {
        emit(Some(out), &csv_finish(w)?)?;
    }

    let dom1 = *p.first.domain();
    let dom2 = *p.second.domain();
    let q1 = p.first.position(c1);
    let q2 = p.second.position(c2);
    let period1 = dom1.period();
    let s = p.first.node_at(offset(&dom1, q1, [0.25 * period1, 0.1 * period1]));
    let r = p.first.node_at(offset(&dom1, q1, [0.1 * period1, 0.3 * period1]));
    let s2 = p.second.node_at(offset(&dom2, q2, [0.2 * dom2.period(), 0.2 * dom2.period()]));
    let sequence_checks = CompletionCase::ALL
        .iter()
        .map(|&case| {
            Ok(NamedSequenceCheck {
                case,
                check: sequence_independence_check(&p, case, s, r, s2, 4)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let summary = ProductSummary {
        kind: "product",
        config_hash: hex.clone(),
        eps: args.eps,
        budget,
        pairs: args.pairs,
        max_excess,
        holds: max_excess <= args.eps,
        sequence_checks,
    };
    emit(args.summary.as_deref(), &json_bytes(&summary))?;
    Ok(Outcome {
        config_paths: vec![args.first.clone(), args.second.clone()],
        output_paths: [&args.out, &args.summary].into_iter().flatten().cloned().collect(),
        seed: Some(args.seed),
        config_hash: hex,
    })
}

pub fn collapse(args: &CollapseArgs) -> Result<Outcome, CliError> {
    let mut hash = ConfigHash::new("collapse");
    let mut side = |path: &Option<std::path::PathBuf>| -> Result<ConformalDensity, CliError> {
        match path {
            Some(p) => {
                let (loaded, rho, _) = load_metric(p, "collapse", None, args.stencil)?;
                hash.merge(&loaded.hash);
                Ok(rho)
            }
            None => {
                hash.option("flat", 32);
                Ok(ConformalDensity::flat(TorusDomain::unit(32)?))
            }
        }
    };
    let base = side(&args.base)?;
    let fiber = side(&args.fiber)?;
    let st = stencil(args.stencil, None)?;
    hash.option("collapse", (&args.sigma_list, args.samples, args.seed, st));
    let hex = hash.hex();
    let rows = collapse_experiment(&base, &fiber, st, &args.sigma_list, args.samples, args.seed)?;
    let mut w = csv_writer();
    w.write_record(["sigma", "eps1", "eps2", "eps3", "eps4", "gh", "config_hash"])?;
    for r in &rows {
        w.write_record([
            num(r.sigma),
            num(r.eps[0]),
            num(r.eps[1]),
            num(r.eps[2]),
            num(r.eps[3]),
            num(r.gh_upper_bound),
            hex.clone(),
        ])?;
    }
    emit(args.out.as_deref(), &csv_finish(w)?)?;
    Ok(Outcome {
        config_paths: [&args.base, &args.fiber].into_iter().flatten().cloned().collect(),
        output_paths: args.out.iter().cloned().collect(),
        seed: Some(args.seed),
        config_hash: hex,
    })
}
