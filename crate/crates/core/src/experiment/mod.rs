//! Batch experiments described by a TOML config.
//!
//! ```toml
//! kind = "avg-scan"
//! seed = 7
//! flow = "winding-golden"
//! measure = "uniform(0, 1)"
//! observable = "cos(2)"
//!
//! [grid]
//! start = 10.0
//! factor = 10.0
//! count = 4
//! ```
//!
//! Every run yields a CSV and a `.meta` TOML document holding the resolved
//! config, so reruns are byte-identical.

pub mod preset;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::{build_adversarial_measure, verify_non_almost_mixing};
use crate::engine::{
    almost_mixing_probe, convergence_scan, geometric_grid, holder_descent_check, l2_norm_spectral, DecayCurve,
    Estimator, L1Evaluator, Metadata, Observable, PairMethod, SpectralEvaluator,
};
use crate::flow::spectrum_of_observable;
pub use preset::{list_presets, PresetError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    /// Monte Carlo `‖P_t f − ∫f‖` over the grid.
    AvgScan,
    /// Exact `‖P_t f‖₂` through a spectral measure.
    SpectralScan,
    /// `‖P_t f‖₂` for `ν` next to the bound from its convolution power.
    ConvolutionRoot,
    /// Pair-correlation deviation for a spike profile.
    AlmostMixingProbe,
    /// Rigidity adversary plan and its verification.
    Adversary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    #[default]
    L1,
    L2,
}

/// Inner average of `avg-scan`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Inner {
    /// `n_r` weights `r ~ ν` per point.
    #[default]
    Sampled,
    /// Exact through `ν̂`; Fourier observables only.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Quadrature,
    Sampling,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub factor: f64,
    pub count: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { start: 10.0, factor: 10.0, count: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Samples {
    /// Outer points `x ~ μ`.
    pub n_x: usize,
    /// Inner weights `r ~ ν`.
    pub n_r: usize,
    /// Pair draws (probe sampling) or `(r, x)` draws (adversary).
    pub count: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Samples { n_x: 10_000, n_r: 10_000, count: 100_000 }
    }
}

/// One experiment. Preset fields hold expressions understood by
/// [`preset`]; which ones are required depends on `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<String>,
    /// Box `A` for the adversary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<String>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub samples: Samples,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default)]
    pub inner: Inner,
    #[serde(default)]
    pub method: Method,
    /// Convolution power for `convolution-root`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<u32>,
    /// Diagonal band half-width `N` for the probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
    /// Baseline correlation for the probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    /// Adversary depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

/// Why a run failed; [`RunError::exit_code`] maps it to a process status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Preset(#[from] PresetError),
    #[error("{0}")]
    Numeric(#[from] crate::Error),
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Preset(_) => 2,
            RunError::Io { .. } => 3,
            RunError::Numeric(_) => 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    fn required<'a>(&'a self, field: &str, value: &'a Option<String>) -> Result<&'a str, RunError> {
        value.as_deref().ok_or_else(|| {
            RunError::Preset(PresetError { field: field.into(), message: format!("required for kind {:?}", self.kind) })
        })
    }

    fn grid(&self) -> Result<Vec<f64>, RunError> {
        geometric_grid(self.grid.start, self.grid.factor, self.grid.count)
            .map_err(|e| RunError::Config(format!("grid: {e}")))
    }
}

/// Files produced by a run, before they are written.
#[derive(Clone, Debug, PartialEq)]
pub struct Outputs {
    pub csv: String,
    pub meta: String,
    /// Further documents as `(file suffix, contents)`.
    pub extra: Vec<(String, String)>,
}

impl Outputs {
    /// Writes `<prefix>.csv`, `<prefix>.meta` and the extras.
    pub fn write(&self, prefix: &Path) -> Result<Vec<PathBuf>, RunError> {
        let mut written = Vec::new();
        let mut put = |suffix: &str, body: &str| {
            let mut name = prefix.as_os_str().to_owned();
            name.push(suffix);
            let path = PathBuf::from(name);
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
            }
            std::fs::write(&path, body).map_err(|source| RunError::Io { path: path.clone(), source })?;
            written.push(path);
            Ok::<_, RunError>(())
        };
        put(".csv", &self.csv)?;
        put(".meta", &self.meta)?;
        for (suffix, body) in &self.extra {
            put(suffix, body)?;
        }
        Ok(written)
    }
}

#[derive(Serialize)]
struct MetaDocument<'a> {
    versions: Versions,
    config: &'a ExperimentConfig,
    results: Metadata,
}

#[derive(Serialize)]
struct Versions {
    homavg: &'static str,
    format: u32,
}

fn meta(config: &ExperimentConfig, results: Metadata) -> String {
    let doc = MetaDocument { versions: Versions { homavg: env!("CARGO_PKG_VERSION"), format: 1 }, config, results };
    toml::to_string(&doc).expect("meta documents serialize")
}

fn joined(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

/// Runs an experiment in memory. Parallelism comes from the ambient rayon
/// pool and does not change any output byte.
pub fn execute(config: &ExperimentConfig) -> Result<Outputs, RunError> {
    match config.kind {
        Kind::AvgScan => avg_scan(config),
        Kind::SpectralScan => spectral_scan(config),
        Kind::ConvolutionRoot => convolution_root(config),
        Kind::AlmostMixingProbe => probe(config),
        Kind::Adversary => adversary(config),
    }
}

fn curve_outputs(config: &ExperimentConfig, curve: &DecayCurve) -> Outputs {
    Outputs { csv: curve.to_csv(), meta: meta(config, curve.metadata.clone()), extra: vec![] }
}

fn avg_scan(config: &ExperimentConfig) -> Result<Outputs, RunError> {
    let flow = preset::flow("flow", config.required("flow", &config.flow)?)?;
    let nu = preset::measure("measure", config.required("measure", &config.measure)?)?;
    let f = preset::observable("observable", config.required("observable", &config.observable)?, flow.dimension())?;
    let grid = config.grid()?;
    let evaluator = L1Evaluator {
        flow,
        f,
        nu,
        n_x: config.samples.n_x,
        n_r: config.samples.n_r,
        estimator: match (config.norm, config.inner) {
            (Norm::L1, Inner::Sampled) => Estimator::L1Sampled,
            (Norm::L2, Inner::Sampled) => Estimator::L2Sampled,
            (Norm::L1, Inner::Exact) => Estimator::L1ExactInner,
            (Norm::L2, Inner::Exact) => Estimator::L2ExactInner,
        },
    };
    let curve = convergence_scan(&evaluator, &grid, config.seed)?;
    Ok(curve_outputs(config, &curve))
}

/// `spectrum` if given, otherwise the spectral measure of `observable`
/// under `flow`.
fn resolve_spectrum(config: &ExperimentConfig) -> Result<crate::flow::SpectralModel, RunError> {
    if let Some(s) = &config.spectrum {
        return Ok(preset::spectrum("spectrum", s)?);
    }
    let flow = preset::flow("flow", config.required("flow", &config.flow)?)?;
    let f = preset::observable("observable", config.required("observable", &config.observable)?, flow.dimension())?;
    let Observable::Fourier(series) = f else {
        return Err(RunError::Preset(PresetError {
            field: "observable".into(),
            message: "a spectral measure needs a Fourier observable".into(),
        }));
    };
    spectrum_of_observable(&flow, &series)
        .map_err(|e| RunError::Preset(PresetError { field: "observable".into(), message: e.to_string() }))
}

fn spectral_scan(config: &ExperimentConfig) -> Result<Outputs, RunError> {
    let sigma = resolve_spectrum(config)?;
    let nu = preset::measure("measure", config.required("measure", &config.measure)?)?;
    let curve = convergence_scan(&SpectralEvaluator { sigma, nu }, &config.grid()?, config.seed)?;
    Ok(curve_outputs(config, &curve))
}

fn convolution_root(config: &ExperimentConfig) -> Result<Outputs, RunError> {
    let sigma = resolve_spectrum(config)?;
    let nu = preset::measure("measure", config.required("measure", &config.measure)?)?;
    let n = config.power.ok_or_else(|| RunError::Config("power: required for kind convolution-root".into()))?;
    if n < 2 {
        return Err(RunError::Config("power: must be at least 2".into()));
    }
    let grid = config.grid()?;
    let power = nu.convolution_power(n).map_err(crate::Error::from)?;
    let curve = convergence_scan(&SpectralEvaluator { sigma: sigma.clone(), nu: nu.clone() }, &grid, config.seed)?;
    let mut bounds = Vec::with_capacity(grid.len());
    let mut passes = Vec::with_capacity(grid.len());
    for &t in &grid {
        // ‖P_t f‖₂ for ν is at most ‖P_t f‖₂^{1/n} for ν^{∗n}.
        let high = l2_norm_spectral(&sigma, &power, t).map_or(f64::NAN, |v| v.powf(1.0 / n as f64));
        bounds.push(high);
        passes.push(holder_descent_check(&sigma, &nu, t, n).map_or("error".to_string(), |r| r.pass.to_string()));
    }
    let mut outputs = curve_outputs(config, &curve);
    let mut results = curve.metadata.clone();
    results.insert("power".into(), n.to_string());
    results.insert("power_bound".into(), joined(&bounds));
    results.insert("descent_pass".into(), passes.join(" "));
    outputs.meta = meta(config, results);
    Ok(outputs)
}

fn probe(config: &ExperimentConfig) -> Result<Outputs, RunError> {
    let nu = preset::measure("measure", config.required("measure", &config.measure)?)?;
    let grid = config.grid()?;
    let (lo, hi) = nu.support_hull();
    let reach = grid.last().copied().unwrap_or(0.0) * (hi - lo) + 1.0;
    let mut profile =
        preset::spike_profile("correlation", config.required("correlation", &config.correlation)?, reach)?;
    if let Some(c) = config.baseline {
        profile.baseline = c;
    }
    profile.validate().map_err(|e| PresetError { field: "baseline".into(), message: e.to_string() })?;
    let method = match config.method {
        Method::Quadrature => PairMethod::Quadrature,
        Method::Sampling => PairMethod::Sampling { count: config.samples.count, seed: config.seed },
    };
    let band = config.band.unwrap_or(1.0);
    let report = almost_mixing_probe(&profile, &nu, &grid, band, method)?;
    let mut results = report.curve.metadata.clone();
    results.insert("seed".into(), config.seed.to_string());
    results.insert("band_mass".into(), joined(&report.band_mass));
    let captured: Vec<f64> = report.spike_mass.iter().map(|s| s.iter().map(|(_, m)| m).sum()).collect();
    results.insert("spike_mass".into(), joined(&captured));
    Ok(Outputs { csv: report.curve.to_csv(), meta: meta(config, results), extra: vec![] })
}

/// Column header of the adversary level report.
pub const ADVERSARY_HEADER: &str =
    "n,index,time,multiplier,scale,delta,half_width,estimate,error,exact,target,mixing,rigid_fraction";

fn adversary(config: &ExperimentConfig) -> Result<Outputs, RunError> {
    let flow = preset::flow("flow", config.required("flow", &config.flow)?)?;
    let set = match &config.set {
        Some(s) => preset::box_set("set", s, flow.dimension())?,
        None => crate::flow::BoxSet::cube(0.5, flow.dimension()).map_err(RunError::from)?,
    };
    let depth = config.depth.unwrap_or(4);
    let plan = build_adversarial_measure(&flow, &set, depth).map_err(|e| match e {
        crate::Error::Invalid(m) => RunError::Preset(PresetError { field: "flow".into(), message: m }),
        e => RunError::Numeric(e),
    })?;
    let report = verify_non_almost_mixing(&plan, config.samples.count, config.seed)?;
    let mut csv = String::from(ADVERSARY_HEADER);
    csv.push('\n');
    for (rec, row) in plan.levels.iter().zip(&report) {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            rec.n,
            rec.index,
            rec.time,
            rec.multiplier,
            rec.scale,
            rec.delta,
            rec.half_width,
            row.estimate,
            row.std_error,
            row.exact,
            row.target,
            row.mixing,
            row.rigid_fraction
        );
    }
    let mut results = Metadata::new();
    results.insert("levels".into(), plan.levels.len().to_string());
    if let Some(f) = &plan.failure {
        results.insert("failure_level".into(), f.level.to_string());
        results.insert("failure".into(), f.reason.clone());
    }
    Ok(Outputs { csv, meta: meta(config, results), extra: vec![(".plan.json".into(), plan.to_document())] })
}
