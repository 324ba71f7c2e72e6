//! JSON run configurations.
//!
//! Paths inside a config (sample grids, resolution files) are resolved
//! relative to the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use collapse_core::fiber_volume::{LocalModelConfig, Weight};
use collapse_core::gke::{build_density, Background, NewtonOptions, Puncture, SingularDensity};
use collapse_core::grid::{GridField, TorusDomain};
use collapse_core::lct::{extremal_face, parse_rational, rational_to_f64};
use collapse_core::metric::Stencil;
use collapse_core::{Rational, ResolutionData};
use serde::Deserialize;

use crate::error::CliError;
use crate::output::ConfigHash;

/// A config file read from disk together with everything it pulled in.
pub struct Loaded<T> {
    pub value: T,
    pub path: PathBuf,
    pub hash: ConfigHash,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, bytes: &[u8]) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn relative(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// `"p/q"`, an integer string, or a plain number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Float(f64),
    Text(String),
}

impl Number {
    pub fn value(&self) -> Result<f64, CliError> {
        match self {
            Number::Float(x) => Ok(*x),
            Number::Text(t) => Ok(rational_to_f64(&parse_rational(t)?)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PunctureSpec {
    pub pos: [f64; 2],
    pub beta: Number,
    #[serde(rename = "N", default = "one_u32")]
    pub log_power: u32,
    pub cutoff: f64,
    #[serde(default = "one_f64")]
    pub scale: f64,
}

fn one_u32() -> u32 {
    1
}

fn one_f64() -> f64 {
    1.0
}

/// `"one"`, `{"constant": c}` or `{"samples": "grid.csv"}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Named(String),
    Constant { constant: f64 },
    Samples { samples: String },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Named("one".into())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    #[serde(default = "one_f64")]
    pub lambda: f64,
    pub grid_n: usize,
    #[serde(default = "one_f64")]
    pub period: f64,
    #[serde(default)]
    pub punctures: Vec<PunctureSpec>,
    #[serde(default)]
    pub background: FieldSpec,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub flow: Option<FlowSection>,
    #[serde(default)]
    pub metric: Option<MetricSection>,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    60
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    /// Initial form density; defaults to the constant `lambda`.
    #[serde(default)]
    pub rho0: Option<FieldSpec>,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Radius removed around each puncture to form `K_δ`.
    #[serde(default = "default_k_delta")]
    pub k_delta: f64,
}

fn default_t0() -> f64 {
    0.1
}
fn default_t_end() -> f64 {
    30.0
}
fn default_samples() -> usize {
    12
}
fn default_dt() -> f64 {
    0.1
}
fn default_k_delta() -> f64 {
    0.4
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            rho0: None,
            t0: default_t0(),
            t_end: default_t_end(),
            samples: default_samples(),
            times: None,
            dt: default_dt(),
            k_delta: default_k_delta(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum MetricSource {
    /// `ρ = λ e^ψ G / 2` from a GKE solve.
    #[default]
    Gke,
    /// `ρ = λ G / 2`: the singular profile on the flat background.
    Profile,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    #[serde(default)]
    pub source: MetricSource,
    #[serde(default = "one_f64")]
    pub scale: f64,
    #[serde(default)]
    pub stencil: Option<u32>,
}

impl Default for MetricSection {
    fn default() -> Self {
        MetricSection {
            source: MetricSource::Gke,
            scale: 1.0,
            stencil: None,
        }
    }
}

/// A density config with its grid, sampled fields and extra files resolved.
pub struct Density {
    pub config: DensityConfig,
    pub domain: TorusDomain,
    pub singular: SingularDensity,
    /// `G` sampled at cell centers.
    pub background: GridField,
    pub rho0: Option<GridField>,
}

impl Density {
    pub fn f(&self) -> Result<GridField, CliError> {
        Ok(build_density(&self.singular, &self.domain)?)
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            max_iter: self.config.max_iter,
            ..NewtonOptions::default()
        }
        .with_tol(self.config.tol)
    }

    pub fn punctures(&self) -> Vec<Puncture> {
        self.singular.punctures.clone()
    }

    pub fn flow(&self) -> FlowSection {
        self.config.flow.clone().unwrap_or_default()
    }

    pub fn metric(&self) -> MetricSection {
        self.config.metric.clone().unwrap_or_default()
    }
}

fn load_field(
    spec: &FieldSpec,
    domain: &TorusDomain,
    config_path: &Path,
    hash: &mut ConfigHash,
) -> Result<(Background, GridField), CliError> {
    match spec {
        FieldSpec::Named(name) if name == "one" => Ok((Background::One, GridField::constant(*domain, 1.0))),
        FieldSpec::Named(other) => Err(CliError::Validation(format!("unknown field {other:?}"))),
        FieldSpec::Constant { constant } => {
            if !(*constant > 0.0 && constant.is_finite()) {
                return Err(CliError::Validation("constant field must be positive".into()));
            }
            Ok((Background::Constant(*constant), GridField::constant(*domain, *constant)))
        }
        FieldSpec::Samples { samples } => {
            let path = relative(config_path, samples);
            let bytes = read(&path)?;
            hash.update("samples", &bytes);
            let grid = read_grid_csv(&path, &bytes, domain)?;
            if !(grid.min() > 0.0) {
                return Err(CliError::Validation(format!("{}: samples must be positive", path.display())));
            }
            Ok((Background::Grid(grid.clone()), grid))
        }
    }
}

/// Read a grid in the `i,j,x,y,value` layout written by the `gke` command.
pub fn read_grid_csv(path: &Path, bytes: &[u8], domain: &TorusDomain) -> Result<GridField, CliError> {
    let bad = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_reader(bytes);
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column {name}")))
    };
    let (ci, cj, cv) = (col("i")?, col("j")?, col("value")?);
    let n = domain.n();
    let mut data = vec![f64::NAN; n * n];
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let i: usize = field(ci).parse().map_err(|_| bad("bad i".into()))?;
        let j: usize = field(cj).parse().map_err(|_| bad("bad j".into()))?;
        let v: f64 = field(cv).parse().map_err(|_| bad("bad value".into()))?;
        if i >= n || j >= n {
            return Err(bad(format!("index ({i}, {j}) outside a {n}x{n} grid")));
        }
        data[domain.index(i, j)] = v;
    }
    if data.iter().any(|v| v.is_nan()) {
        return Err(bad(format!("grid does not cover all {n}x{n} cells")));
    }
    Ok(GridField::from_vec(*domain, data)?)
}

pub fn load_density(path: &Path, command: &str) -> Result<Loaded<Density>, CliError> {
    let bytes = read(path)?;
    let mut hash = ConfigHash::new(command);
    hash.update("config", &bytes);
    let config: DensityConfig = parse(path, &bytes)?;
    if !(config.lambda > 0.0 && config.lambda.is_finite()) {
        return Err(CliError::Validation("lambda must be positive".into()));
    }
    if !(config.tol > 0.0) || config.max_iter == 0 {
        return Err(CliError::Validation("tol and max_iter must be positive".into()));
    }
    let domain = TorusDomain::new(config.period, config.grid_n)?;
    let (background, background_grid) = load_field(&config.background, &domain, path, &mut hash)?;
    let punctures = config
        .punctures
        .iter()
        .map(|p| Ok(Puncture::new(p.pos, p.beta.value()?, p.log_power, p.cutoff, p.scale)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let singular = SingularDensity {
        punctures,
        background,
    };
    singular.validate(&domain)?;
    let singular = singular.snapped(&domain);
    let rho0 = match config.flow.as_ref().and_then(|f| f.rho0.as_ref()) {
        Some(spec) => Some(load_field(spec, &domain, path, &mut hash)?.1),
        None => None,
    };
    Ok(Loaded {
        value: Density {
            config,
            domain,
            singular,
            background: background_grid,
            rho0,
        },
        path: path.to_path_buf(),
        hash,
    })
}

pub fn load_resolution(path: &Path, hash: &mut ConfigHash) -> Result<ResolutionData, CliError> {
    let bytes = read(path)?;
    hash.update("resolution", &bytes);
    let text = String::from_utf8(bytes).map_err(|_| CliError::Validation(format!("{} is not UTF-8", path.display())))?;
    Ok(ResolutionData::from_json(&text)?)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ResolutionSource {
    File(String),
    Inline(ResolutionData),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    /// Face exponents `c_j = (k_j+1)/a_j` as `"p/q"` strings.
    #[serde(default)]
    pub exponents: Option<Vec<String>>,
    /// Alternatively a resolution; its extremal face is used unless `face`
    /// names divisor ids.
    #[serde(default)]
    pub resolution: Option<ResolutionSource>,
    #[serde(default)]
    pub face: Option<Vec<String>>,
    #[serde(default)]
    pub weight: Option<String>,
    #[serde(default)]
    pub eliminated: Option<usize>,
    #[serde(default)]
    pub log_radii: Option<Vec<f64>>,
}

pub fn load_fiber(path: &Path) -> Result<Loaded<LocalModelConfig>, CliError> {
    let bytes = read(path)?;
    let mut hash = ConfigHash::new("fiber-volume");
    hash.update("config", &bytes);
    let config: FiberConfig = parse(path, &bytes)?;
    let exponents: Vec<Rational> = match (&config.exponents, &config.resolution) {
        (Some(list), None) => list.iter().map(|t| parse_rational(t)).collect::<Result<_, _>>()?,
        (None, Some(source)) => {
            let data = match source {
                ResolutionSource::File(f) => load_resolution(&relative(path, f), &mut hash)?,
                ResolutionSource::Inline(d) => {
                    d.validate()?;
                    d.clone()
                }
            };
            let face: Vec<usize> = match &config.face {
                Some(ids) => ids
                    .iter()
                    .map(|id| {
                        data.divisors
                            .iter()
                            .position(|d| &d.id == id)
                            .ok_or_else(|| CliError::Validation(format!("face names unknown divisor {id:?}")))
                    })
                    .collect::<Result<_, _>>()?,
                None => extremal_face(&data)?,
            };
            face.iter().map(|&i| data.divisors[i].threshold()).collect()
        }
        _ => {
            return Err(CliError::Validation(
                "fiber-volume config needs exactly one of \"exponents\" and \"resolution\"".into(),
            ))
        }
    };
    let mut cfg = LocalModelConfig::new(exponents)?;
    cfg = cfg.with_weight(match config.weight.as_deref() {
        None | Some("one") => Weight::One,
        Some("perturbed") => Weight::Perturbed,
        Some(other) => return Err(CliError::Validation(format!("unknown weight {other:?}"))),
    });
    if let Some(j0) = config.eliminated {
        cfg = cfg.with_eliminated(j0)?;
    }
    if let Some(radii) = &config.log_radii {
        cfg = cfg.with_log_radii(radii.clone())?;
    }
    Ok(Loaded {
        value: cfg,
        path: path.to_path_buf(),
        hash,
    })
}

pub fn stencil(flag: Option<u32>, config: Option<u32>) -> Result<Stencil, CliError> {
    Ok(Stencil::from_count(flag.or(config).unwrap_or(8))?)
}
