//! Consolidated report over JSON summaries and CSV tables.
//!
//! JSON inputs must carry a `kind`; CSV inputs are recognized by header.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::output::{emit, json_bytes, TOOL_VERSION};
use crate::Outcome;

pub const SCHEMA_VERSION: u32 = 1;

fn corrupt(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {msg}", path.display()))
}

/// Group sweep rows by table family; a family matches when all its rows do.
fn kodaira_table(path: &Path, doc: &Value) -> Result<Value, CliError> {
    let rows = doc["rows"].as_array().ok_or_else(|| corrupt(path, "sweep without rows"))?;
    let mut families: Vec<(String, Vec<&Value>)> = Vec::new();
    for row in rows {
        let fam = row["family"].as_str().ok_or_else(|| corrupt(path, "row without family"))?;
        match families.iter_mut().find(|(f, _)| f == fam) {
            Some((_, members)) => members.push(row),
            None => families.push((fam.to_string(), vec![row])),
        }
    }
    let table: Vec<Value> = families
        .iter()
        .map(|(fam, members)| {
            let types: Vec<&Value> = members.iter().map(|r| &r["type"]).collect();
            let matches = members.iter().all(|r| r["match"] == Value::Bool(true));
            let profiles: Vec<Value> = members
                .iter()
                .map(|r| json!({"type": r["type"], "beta": r["beta"], "N": r["N"]}))
                .collect();
            json!({"family": fam, "types": types, "profiles": profiles, "match": matches})
        })
        .collect();
    let all = table.iter().all(|r| r["match"] == Value::Bool(true));
    Ok(json!({
        "kind": "kodaira_table",
        "config_hash": doc["config_hash"],
        "rows": table,
        "all_match": all,
    }))
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| corrupt(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()).map_err(|e| corrupt(path, e)))
        .collect::<Result<Vec<Vec<String>>, _>>()?;
    Ok((headers, rows))
}

fn column(path: &Path, headers: &[String], rows: &[Vec<String>], name: &str) -> Result<Vec<f64>, CliError> {
    let c = headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| corrupt(path, format!("missing column {name}")))?;
    rows.iter()
        .map(|r| {
            r.get(c)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| corrupt(path, format!("bad value in column {name}")))
        })
        .collect()
}

fn hashes(headers: &[String], rows: &[Vec<String>]) -> Vec<String> {
    let Some(c) = headers.iter().position(|h| h == "config_hash") else {
        return Vec::new();
    };
    let mut out: Vec<String> = rows.iter().filter_map(|r| r.get(c).cloned()).collect();
    out.sort();
    out.dedup();
    out
}

/// Least-squares slope of `log y` against `log x`, over positive entries.
fn log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn csv_entry(path: &Path, bytes: &[u8]) -> Result<Value, CliError> {
    let (headers, rows) = parse_csv(path, bytes)?;
    let has = |name: &str| headers.iter().any(|h| h == name);
    let col = |name: &str| column(path, &headers, &rows, name);
    let config_hashes = hashes(&headers, &rows);
    if has("t") && has("l1_dist") {
        let t = col("t")?;
        let l1 = col("l1_dist")?;
        let tail = &l1[l1.len().saturating_sub(10)..];
        let table: Vec<Value> = (0..rows.len())
            .map(|k| {
                json!({
                    "t": t[k],
                    "residual": col("residual").map(|c| c[k]).ok(),
                    "l1_dist": l1[k],
                    "sup_dist_Kdelta": col("sup_dist_Kdelta").map(|c| c[k]).ok(),
                    "psi_gap_density": col("psi_gap_density").map(|c| c[k]).ok(),
                })
            })
            .collect();
        return Ok(json!({
            "kind": "flow_trajectory",
            "config_hashes": config_hashes,
            "rows": table,
            "l1_strictly_decreasing_tail": tail.windows(2).all(|w| w[1] < w[0]),
        }));
    }
    if has("sigma") && has("eps1") {
        let sigma = col("sigma")?;
        let eps: Vec<Vec<f64>> = ["eps1", "eps2", "eps3", "eps4"].iter().map(|c| col(c)).collect::<Result<_, _>>()?;
        let gh = col("gh")?;
        let slopes: Vec<Option<f64>> = eps.iter().map(|e| log_slope(&sigma, e)).collect();
        let table: Vec<Value> = (0..rows.len())
            .map(|k| json!({"sigma": sigma[k], "eps": [eps[0][k], eps[1][k], eps[2][k], eps[3][k]], "gh": gh[k]}))
            .collect();
        return Ok(json!({
            "kind": "collapse",
            "config_hashes": config_hashes,
            "rows": table,
            "log_slopes": slopes,
        }));
    }
    if has("log_s") && has("log_D") {
        return Ok(json!({
            "kind": "fiber_samples",
            "config_hashes": config_hashes,
            "samples": rows.len(),
            "ratio": col("ratio")?,
        }));
    }
    if has("distance") && has("x1") {
        let d = col("distance")?;
        return Ok(json!({
            "kind": "metric_distances",
            "config_hashes": config_hashes,
            "pairs": d.len(),
            "max_distance": d.iter().cloned().fold(0.0, f64::max),
        }));
    }
    if has("excess") && has("constrained") {
        let e = col("excess")?;
        return Ok(json!({
            "kind": "product_excess",
            "config_hashes": config_hashes,
            "pairs": e.len(),
            "max_excess": e.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }));
    }
    if has("i") && has("j") && has("value") {
        let v = col("value")?;
        return Ok(json!({
            "kind": "grid",
            "config_hashes": config_hashes,
            "cells": v.len(),
            "min": v.iter().cloned().fold(f64::INFINITY, f64::min),
            "max": v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }));
    }
    Err(corrupt(path, "unrecognized CSV header"))
}

fn json_entry(path: &Path, bytes: &[u8]) -> Result<Value, CliError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| corrupt(path, e))?;
    let kind = doc["kind"].as_str().ok_or_else(|| corrupt(path, "JSON input without a kind"))?;
    match kind {
        "kodaira_sweep" => kodaira_table(path, &doc),
        "lct" | "fiber_fit" | "gke" | "metric" | "product" => Ok(doc),
        other => Err(corrupt(path, format!("unknown kind {other:?}"))),
    }
}

/// Pair each fitted face with an `lct` record of the same threshold.
fn cross_checks(entries: &[Value]) -> Vec<Value> {
    let lct: BTreeMap<&str, &Value> = entries
        .iter()
        .filter(|e| e["kind"] == "lct")
        .filter_map(|e| e["beta"].as_str().map(|b| (b, e)))
        .collect();
    entries
        .iter()
        .filter(|e| e["kind"] == "fiber_fit")
        .filter_map(|fit| {
            let beta = fit["beta_exact"].as_str()?;
            let record = lct.get(beta)?;
            Some(json!({
                "beta_exact": beta,
                "beta_fit": fit["beta_hat"],
                "beta_abs_error": fit["beta_abs_error"],
                "N_exact": record["N"],
                "N_fit": fit["N_hat"],
                "N_match": record["N"] == fit["N_hat"],
            }))
        })
        .collect()
}

pub fn report(inputs: &[std::path::PathBuf], out: Option<&Path>) -> Result<Outcome, CliError> {
    let mut entries = Vec::new();
    for path in inputs {
        let bytes = std::fs::read(path).map_err(|e| corrupt(path, e))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let mut entry = if is_json { json_entry(path, &bytes)? } else { csv_entry(path, &bytes)? };
        if let Value::Object(map) = &mut entry {
            let mut ordered = Map::new();
            ordered.insert("source".into(), Value::String(path.display().to_string()));
            ordered.append(map);
            entry = Value::Object(ordered);
        }
        entries.push(entry);
    }
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": TOOL_VERSION,
        "entries": entries,
    });
    let checks = cross_checks(doc["entries"].as_array().expect("array"));
    if !checks.is_empty() {
        doc["lct_vs_fit"] = Value::Array(checks);
    }
    emit(out, &json_bytes(&doc))?;
    Ok(Outcome {
        config_paths: inputs.to_vec(),
        output_paths: out.iter().map(|p| p.to_path_buf()).collect(),
        seed: None,
        config_hash: String::new(),
    })
}
