//! Combinatorial, fiber-volume and PDE subcommands.

use std::path::{Path, PathBuf};

use collapse_core::fiber_volume::{fit_exponents, log_model_profile, sample_density};
use collapse_core::flow::{
    compact_mask, continuity_trajectory, convergence_report, geometric_times, krf_trajectory, FlowConfig,
};
use collapse_core::gke::{density_ratio_profile, gke_solve, RatioBand};
use collapse_core::grid::GridField;
use collapse_core::lct::{
    asymptotic_profile, extremal_face, format_rational, kodaira_resolution, kodaira_sweep, rational_to_f64,
};
use collapse_core::KodairaType;
use serde::Serialize;

use crate::config::{load_density, load_fiber, load_resolution};
use crate::error::CliError;
use crate::output::{csv_finish, csv_writer, emit, json_bytes, num, sci_from_ln, ConfigHash};
use crate::{FlowMode, Outcome};

fn outcome(configs: &[&Path], outputs: &[Option<&Path>], hash: &ConfigHash) -> Outcome {
    Outcome {
        config_paths: configs.iter().map(|p| p.to_path_buf()).collect(),
        output_paths: outputs.iter().flatten().map(|p| p.to_path_buf()).collect(),
        seed: None,
        config_hash: hash.hex(),
    }
}

#[derive(Serialize)]
struct LctRecord {
    kind: &'static str,
    config_hash: String,
    beta: String,
    #[serde(rename = "N")]
    log_power: u32,
    face: Vec<String>,
}

pub fn lct(file: &Path, json: bool, out: Option<&Path>) -> Result<Outcome, CliError> {
    let mut hash = ConfigHash::new("lct");
    let data = load_resolution(file, &mut hash)?;
    let profile = asymptotic_profile(&data)?;
    let bytes = if json {
        let face = extremal_face(&data)?
            .into_iter()
            .map(|i| data.divisors[i].id.clone())
            .collect();
        json_bytes(&LctRecord {
            kind: "lct",
            config_hash: hash.hex(),
            beta: format_rational(&profile.beta),
            log_power: profile.log_power,
            face,
        })
    } else {
        format!("{profile}\n").into_bytes()
    };
    emit(out, &bytes)?;
    Ok(outcome(&[file], &[out], &hash))
}

/// Row label of the classification table a type belongs to.
pub fn kodaira_family(kind: KodairaType) -> &'static str {
    match kind {
        KodairaType::MultipleI0 { .. } => "mI0",
        KodairaType::MultipleI1 { .. } => "mI1",
        KodairaType::MultipleI2 { .. } => "mI2",
        KodairaType::MultipleIb { .. } => "mIb",
        KodairaType::IStar { b: 0 } => "I0*",
        KodairaType::IStar { .. } => "Ib*",
        KodairaType::II => "II",
        KodairaType::III => "III",
        KodairaType::IV => "IV",
        KodairaType::IIStar => "II*",
        KodairaType::IIIStar => "III*",
        KodairaType::IVStar => "IV*",
    }
}

#[derive(Serialize)]
struct SweepRow {
    #[serde(rename = "type")]
    tag: String,
    family: &'static str,
    beta: String,
    #[serde(rename = "N")]
    log_power: u32,
    beta_table: String,
    #[serde(rename = "N_table")]
    log_power_table: u32,
    #[serde(rename = "match")]
    matches: bool,
}

#[derive(Serialize)]
struct Sweep {
    kind: &'static str,
    config_hash: String,
    multiplicities: Vec<u32>,
    rows: Vec<SweepRow>,
}

pub fn kodaira(
    tag: Option<&str>,
    m: Option<u32>,
    b: Option<u32>,
    sweep: bool,
    m_list: &[u32],
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let mut hash = ConfigHash::new("kodaira");
    if sweep {
        if m_list.is_empty() || m_list.contains(&0) {
            return Err(CliError::Validation("multiplicities must be positive".into()));
        }
        hash.option("m_list", m_list);
        let rows = kodaira_sweep(m_list)
            .into_iter()
            .map(|kind| {
                let computed = asymptotic_profile(&kodaira_resolution(kind)?)?;
                let table = kind.tabulated_profile();
                Ok(SweepRow {
                    tag: kind.tag(),
                    family: kodaira_family(kind),
                    beta: format_rational(&computed.beta),
                    log_power: computed.log_power,
                    beta_table: format_rational(&table.beta),
                    log_power_table: table.log_power,
                    matches: computed == table,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let doc = Sweep {
            kind: "kodaira_sweep",
            config_hash: hash.hex(),
            multiplicities: m_list.to_vec(),
            rows,
        };
        emit(out, &json_bytes(&doc))?;
    } else {
        let tag = tag.ok_or_else(|| CliError::Validation("--type is required".into()))?;
        hash.option("type", (tag, m, b));
        let kind = KodairaType::from_tag(tag, m, b)?;
        let mut text = kodaira_resolution(kind)?.to_json();
        text.push('\n');
        emit(out, text.as_bytes())?;
    }
    Ok(outcome(&[], &[out], &hash))
}

#[derive(Serialize)]
struct FitSummary {
    kind: &'static str,
    config_hash: String,
    exponents: Vec<String>,
    beta_exact: String,
    #[serde(rename = "N_exact")]
    log_power_exact: u32,
    beta_hat: f64,
    #[serde(rename = "N_hat")]
    log_power_hat: u32,
    c0: f64,
    log_coefficient: f64,
    beta_abs_error: f64,
}

pub fn fiber_volume(config: &Path, out: Option<&Path>, fit: Option<&Option<PathBuf>>) -> Result<Outcome, CliError> {
    let loaded = load_fiber(config)?;
    let cfg = &loaded.value;
    let hash = loaded.hash.hex();
    let samples = sample_density(cfg)?;
    let beta = rational_to_f64(&cfg.beta());
    let n = cfg.log_power();

    let mut w = csv_writer();
    w.write_record(["s", "D(s)", "model(s)", "ratio", "log_s", "log_D", "config_hash"])?;
    for s in &samples {
        let log_model = log_model_profile(beta, n, s.log_s);
        w.write_record([
            sci_from_ln(s.log_s),
            sci_from_ln(s.log_density),
            sci_from_ln(log_model),
            num((s.log_density - log_model).exp()),
            num(s.log_s),
            num(s.log_density),
            hash.clone(),
        ])?;
    }
    let csv = csv_finish(w)?;

    let mut fit_path = None;
    let summary = match fit {
        Some(path) => {
            let f = fit_exponents(&samples)?;
            fit_path = path.as_deref();
            Some(json_bytes(&FitSummary {
                kind: "fiber_fit",
                config_hash: hash.clone(),
                exponents: cfg.exponents().iter().map(format_rational).collect(),
                beta_exact: format_rational(&cfg.beta()),
                log_power_exact: n,
                beta_hat: f.beta_hat,
                log_power_hat: f.log_power_hat,
                c0: f.c0,
                log_coefficient: f.log_coefficient,
                beta_abs_error: (f.beta_hat - beta).abs(),
            }))
        }
        None => None,
    };
    match (out, &summary, fit_path) {
        // Both would land on stdout: keep the CSV, then the summary.
        (None, Some(s), None) => emit(None, &[csv.as_slice(), s.as_slice()].concat())?,
        _ => {
            emit(out, &csv)?;
            if let Some(s) = &summary {
                emit(fit_path, s)?;
            }
        }
    }
    Ok(outcome(&[config], &[out, fit_path], &loaded.hash))
}

fn grid_csv(field: &GridField, hash: &str) -> Result<Vec<u8>, CliError> {
    let dom = field.domain();
    let mut w = csv_writer();
    w.write_record(["i", "j", "x", "y", "value", "config_hash"])?;
    for j in 0..dom.n() {
        for i in 0..dom.n() {
            let [x, y] = dom.cell_center(i, j);
            w.write_record([
                i.to_string(),
                j.to_string(),
                num(x),
                num(y),
                num(field.get(i, j)),
                hash.to_string(),
            ])?;
        }
    }
    csv_finish(w)
}

#[derive(Serialize)]
struct PunctureBands {
    puncture: usize,
    bands: Vec<RatioBand>,
}

#[derive(Serialize)]
struct GkeSummary {
    kind: &'static str,
    config_hash: String,
    grid_n: usize,
    lambda: f64,
    residual_sup: f64,
    psi_min: f64,
    psi_max: f64,
    iterations: usize,
    linear_iterations: usize,
    ratio_bands: Vec<PunctureBands>,
}

/// Annuli from `4h` to half the cutoff radius, each at least doubling.
fn ratio_radii(h: f64, cutoff: f64) -> Option<Vec<f64>> {
    let (inner, outer) = (4.0 * h, 0.5 * cutoff);
    if outer <= inner {
        return None;
    }
    let count = ((outer / inner).log2().floor() as usize).clamp(1, 4);
    let step = (outer / inner).ln() / count as f64;
    let mut radii: Vec<f64> = (0..=count).map(|k| inner * (step * k as f64).exp()).collect();
    radii[count] = outer;
    Some(radii)
}

pub fn gke(config: &Path, out: Option<&Path>, summary_path: Option<&Path>) -> Result<Outcome, CliError> {
    let loaded = load_density(config, "gke")?;
    let d = &loaded.value;
    let hash = loaded.hash.hex();
    let f = d.f()?;
    let sol = gke_solve(&f, d.config.lambda, &d.newton())?;
    let mut ratio_bands = Vec::new();
    for (l, p) in d.singular.punctures.iter().enumerate() {
        if let Some(radii) = ratio_radii(d.domain.spacing(), p.cutoff) {
            ratio_bands.push(PunctureBands {
                puncture: l,
                bands: density_ratio_profile(&sol.psi, &f, p, &radii)?,
            });
        }
    }
    if let Some(path) = out {
        emit(Some(path), &grid_csv(&sol.psi, &hash)?)?;
    }
    let summary = GkeSummary {
        kind: "gke",
        config_hash: hash,
        grid_n: d.domain.n(),
        lambda: d.config.lambda,
        residual_sup: sol.report.residual_sup,
        psi_min: sol.psi.min(),
        psi_max: sol.psi.max(),
        iterations: sol.report.iterations,
        linear_iterations: sol.report.linear_iterations,
        ratio_bands,
    };
    emit(summary_path, &json_bytes(&summary))?;
    Ok(outcome(&[config], &[out, summary_path], &loaded.hash))
}

pub fn flow(config: &Path, mode: FlowMode, out: Option<&Path>) -> Result<Outcome, CliError> {
    let mut loaded = load_density(config, "flow")?;
    loaded.hash.option("mode", mode);
    let d = &loaded.value;
    let hash = loaded.hash.hex();
    let section = d.flow();
    let f = d.f()?;
    let lambda = d.config.lambda;
    let rho0 = d.rho0.clone().unwrap_or_else(|| GridField::constant(d.domain, lambda));
    let times = match &section.times {
        Some(t) => t.clone(),
        None => geometric_times(section.t0, section.t_end, section.samples)?,
    };
    let cfg = FlowConfig::new(f.clone(), lambda, rho0)?
        .with_times(times)?
        .with_dt(section.dt)?
        .with_newton(d.newton());
    let trajectory = match mode {
        FlowMode::Continuity => continuity_trajectory(&cfg)?,
        FlowMode::Krf => krf_trajectory(&cfg)?,
    };
    let psi = gke_solve(&f, lambda, &d.newton())?.psi;
    let mask = compact_mask(&d.domain, &d.singular.punctures, section.k_delta)?;
    let rows = convergence_report(&trajectory, &psi, &mask)?;

    let mut w = csv_writer();
    w.write_record(["t", "residual", "l1_dist", "sup_dist_Kdelta", "psi_gap_density", "config_hash"])?;
    for r in &rows {
        w.write_record([
            num(r.t),
            num(r.residual),
            num(r.l1_dist),
            num(r.sup_dist_kdelta),
            num(r.psi_gap_density),
            hash.clone(),
        ])?;
    }
    emit(out, &csv_finish(w)?)?;
    Ok(outcome(&[config], &[out], &loaded.hash))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_radii_cover_range() {
        let r = ratio_radii(1.0 / 128.0, 0.2).unwrap();
        assert_eq!(r[0], 4.0 / 128.0);
        assert_eq!(*r.last().unwrap(), 0.1);
        assert!(r.windows(2).all(|w| w[1] / w[0] >= 2.0 - 1e-12));
        assert!(ratio_radii(0.1, 0.2).is_none());
    }

    #[test]
    fn every_table_row_has_a_family() {
        let fams: std::collections::BTreeSet<_> = kodaira_sweep(&[1, 2]).into_iter().map(kodaira_family).collect();
        assert_eq!(fams.len(), 12);
    }
}
