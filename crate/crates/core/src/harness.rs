//! Experiment configuration, execution and trace/certificate output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{run, Algorithm, Record, RunParams, Trace};
use crate::error::Error;
use crate::lyapunov::{certify, Certificate, EnergyForm};
use crate::problems::{resolve_problem, CompositeObjective, OptimumInfo, ResolvedProblem, Vector};

pub const DEFAULT_ITERS: usize = 200;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl HarnessError {
    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Process exit codes of the command-line harness.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const CERTIFICATION_FAILED: i32 = 2;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    Json,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyFormChoice {
    #[default]
    Auto,
    Velocity,
    Xy,
}

impl EnergyFormChoice {
    pub fn resolve(self, algo: Algorithm) -> EnergyForm {
        match self {
            EnergyFormChoice::Auto => EnergyForm::default_for(algo),
            EnergyFormChoice::Velocity => EnergyForm::Velocity,
            EnergyFormChoice::Xy => EnergyForm::Xy,
        }
    }
}

impl std::str::FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "json" => Ok(TraceFormat::Json),
            other => Err(format!(
                "unknown trace format {other:?} (expected csv or json)"
            )),
        }
    }
}

impl std::str::FromStr for EnergyFormChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(EnergyFormChoice::Auto),
            "velocity" => Ok(EnergyFormChoice::Velocity),
            "xy" => Ok(EnergyFormChoice::Xy),
            other => Err(format!(
                "unknown energy form {other:?} (expected auto, velocity or xy)"
            )),
        }
    }
}

/// Starting point: the all-ones vector or explicit coordinates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "InitialPointRepr", into = "InitialPointRepr")]
pub enum InitialPoint {
    #[default]
    Ones,
    Point(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum InitialPointRepr {
    Name(String),
    Point(Vec<f64>),
}

impl TryFrom<InitialPointRepr> for InitialPoint {
    type Error = String;

    fn try_from(repr: InitialPointRepr) -> std::result::Result<Self, String> {
        match repr {
            InitialPointRepr::Name(name) => name.parse(),
            InitialPointRepr::Point(p) => Ok(InitialPoint::Point(p)),
        }
    }
}

impl From<InitialPoint> for InitialPointRepr {
    fn from(p: InitialPoint) -> Self {
        match p {
            InitialPoint::Ones => InitialPointRepr::Name("ones".into()),
            InitialPoint::Point(p) => InitialPointRepr::Point(p),
        }
    }
}

impl std::str::FromStr for InitialPoint {
    type Err = String;

    /// `ones` or a comma-separated list of coordinates.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "ones" {
            return Ok(InitialPoint::Ones);
        }
        s.split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad coordinate {c:?} in x0"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(InitialPoint::Point)
    }
}

impl InitialPoint {
    pub fn materialize(&self, dim: usize) -> Result<Vector> {
        match self {
            InitialPoint::Ones => Ok(Vector::from_element(dim, 1.0)),
            InitialPoint::Point(p) if p.len() == dim => Ok(Vector::from_column_slice(p)),
            InitialPoint::Point(p) => Err(HarnessError::Config(format!(
                "x0 has {} coordinates but the problem has dimension {dim}",
                p.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Outputs {
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
    #[serde(default)]
    pub certificate_path: Option<PathBuf>,
    #[serde(default)]
    pub format: TraceFormat,
}

fn default_iters() -> usize {
    DEFAULT_ITERS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: String,
    pub algo: Algorithm,
    pub step: f64,
    #[serde(default)]
    pub momentum_r: Option<f64>,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default)]
    pub x0: InitialPoint,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub certify: bool,
    #[serde(default)]
    pub energy_form: EnergyFormChoice,
}

impl ExperimentConfig {
    pub fn new(problem: &str, algo: Algorithm, step: f64, momentum_r: Option<f64>) -> Self {
        Self {
            problem: problem.to_string(),
            algo,
            step,
            momentum_r,
            iters: DEFAULT_ITERS,
            x0: InitialPoint::Ones,
            outputs: Outputs::default(),
            certify: false,
            energy_form: EnergyFormChoice::Auto,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| HarnessError::Config(format!("malformed config: {e}")))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn run_params(&self) -> RunParams {
        RunParams {
            algo: self.algo,
            step: self.step,
            momentum_r: self.momentum_r,
            iters: self.iters,
        }
    }

    /// Resolves the problem and checks every parameter against it.
    pub fn resolve(&self) -> Result<Experiment> {
        if self.algo.uses_momentum_r() && self.momentum_r.is_none() {
            return Err(HarnessError::Config(format!(
                "{} requires the momentum parameter r (--r)",
                self.algo
            )));
        }
        let problem = resolve_problem(&self.problem)?;
        let params = self.run_params();
        params.validate(&problem.objective)?;
        let x0 = self.x0.materialize(problem.objective.dim())?;
        let form = if self.certify {
            if !self.algo.uses_momentum_r() {
                return Err(HarnessError::Config(format!(
                    "no certificate is available for {}",
                    self.algo
                )));
            }
            let form = self.energy_form.resolve(self.algo);
            if form == EnergyForm::Velocity && self.algo.is_monotone() {
                return Err(HarnessError::Config(format!(
                    "velocity-form energy is not defined for {}",
                    self.algo
                )));
            }
            Some(form)
        } else {
            None
        };
        Ok(Experiment {
            config: self.clone(),
            problem,
            params,
            x0,
            form,
        })
    }
}

/// A validated configuration with its problem resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: ResolvedProblem,
    pub params: RunParams,
    pub x0: Vector,
    /// Energy form to certify with, when certification was requested.
    pub form: Option<EnergyForm>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub config: ExperimentConfig,
    pub problem: ResolvedProblem,
    pub trace: Trace,
    pub certificate: Option<Certificate>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match &self.certificate {
            Some(cert) if !cert.overall_pass => exit_code::CERTIFICATION_FAILED,
            _ => exit_code::SUCCESS,
        }
    }

    pub fn summary(&self) -> String {
        let last = self.trace.records.last().expect("traces are never empty");
        let gap = self.problem.objective.gap(&last.x, &self.problem.optimum);
        let mut line = format!(
            "{} on {}: {} iterations, final gap {:.6e}, monotone violations {}",
            self.trace.params.algo,
            self.problem.id,
            self.trace.params.iters,
            gap,
            self.trace.monotone_violations().len()
        );
        if let Some(cert) = &self.certificate {
            match cert.first_failure() {
                None => write!(line, ", certificate pass (K = {})", cert.threshold_k),
                Some(k) => write!(line, ", certificate FAIL at k = {k}"),
            }
            .expect("writing to a String cannot fail");
        }
        line
    }
}

/// Runs one experiment and writes the requested outputs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    let experiment = config.resolve()?;
    let mut trace = run(
        &experiment.problem.objective,
        &experiment.params,
        &experiment.x0,
    )?;
    trace.problem_id = experiment.problem.id.clone();

    let certificate = match experiment.form {
        Some(form) => Some(certify(
            &trace,
            &experiment.problem.objective,
            &experiment.problem.optimum,
            form,
        )?),
        None => None,
    };

    if let Some(path) = &config.outputs.trace_path {
        emit_trace(
            &trace,
            &experiment.problem.objective,
            &experiment.problem.optimum,
            certificate.as_ref(),
            config.outputs.format,
            path,
        )?;
    }
    if let (Some(path), Some(cert)) = (&config.outputs.certificate_path, &certificate) {
        write_certificate(cert, path)?;
    }

    Ok(Outcome {
        config: config.clone(),
        problem: experiment.problem,
        trace,
        certificate,
    })
}

/// Runs experiments concurrently; results keep the input order.
pub fn run_all(configs: &[ExperimentConfig]) -> Vec<Result<Outcome>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|config| scope.spawn(move || run_experiment(config)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    })
}

/// First iteration whose gap is at or below `level`.
pub fn iterations_to_gap(
    trace: &Trace,
    objective: &CompositeObjective,
    optimum: &OptimumInfo,
    level: f64,
) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|rec| objective.gap(&rec.x, optimum) <= level)
        .map(|rec| rec.k)
}

/// Named experiment groups: `fig1` compares NAG with M-NAG at `s = 0.4`,
/// `r = 2`; `fig2` compares gradient descent, NAG-SC and M-NAG-SC at
/// `s = 0.01`. Both start from `(1, 1)` on `quad2d`.
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    match name {
        "fig1" => Ok([Algorithm::Nag, Algorithm::MNag]
            .into_iter()
            .map(|algo| ExperimentConfig {
                certify: true,
                ..ExperimentConfig::new("quad2d", algo, 0.4, Some(2.0))
            })
            .collect()),
        "fig2" => Ok([Algorithm::Gd, Algorithm::NagSc, Algorithm::MNagSc]
            .into_iter()
            .map(|algo| ExperimentConfig {
                iters: 2000,
                ..ExperimentConfig::new("quad2d", algo, 0.01, None)
            })
            .collect()),
        other => Err(HarnessError::Config(format!(
            "unknown preset {other:?} (expected fig1 or fig2)"
        ))),
    }
}

/// [`preset`] with output paths `<outdir>/<name>_<algo>.<ext>` and, for
/// certified runs, `<outdir>/<name>_<algo>_certificate.json`.
pub fn preset_in(name: &str, outdir: &Path, format: TraceFormat) -> Result<Vec<ExperimentConfig>> {
    Ok(preset(name)?
        .into_iter()
        .map(|mut config| {
            let stem = format!("{name}_{}", config.algo);
            config.outputs = Outputs {
                trace_path: Some(outdir.join(format!("{stem}.{}", format.extension()))),
                certificate_path: config
                    .certify
                    .then(|| outdir.join(format!("{stem}_certificate.json"))),
                format,
            };
            config
        })
        .collect())
}

/// 17 significant digits.
fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

struct RowView<'a> {
    rec: &'a Record,
    f_gap: f64,
    grad_norm: f64,
    monotone_violation: bool,
    energy: Option<f64>,
    bound: Option<f64>,
}

fn row_views<'a>(
    trace: &'a Trace,
    objective: &CompositeObjective,
    optimum: &OptimumInfo,
    certificate: Option<&Certificate>,
) -> Vec<RowView<'a>> {
    trace
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let cert_row = certificate.and_then(|c| c.per_k.get(i));
            RowView {
                rec,
                f_gap: objective.gap(&rec.x, optimum),
                grad_norm: rec.map_at_y.norm(),
                monotone_violation: i > 0 && rec.value > trace.records[i - 1].value,
                energy: cert_row.and_then(|r| r.energy),
                bound: cert_row.and_then(|r| r.bound),
            }
        })
        .collect()
}

/// CSV with columns `k, f_gap, grad_norm, x1..xd, y1..yd, monotone_violation,
/// energy, bound`.
pub fn trace_to_csv(
    trace: &Trace,
    objective: &CompositeObjective,
    optimum: &OptimumInfo,
    certificate: Option<&Certificate>,
) -> String {
    let dim = objective.dim();
    let mut header = vec!["k".to_string(), "f_gap".into(), "grad_norm".into()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.extend((1..=dim).map(|i| format!("y{i}")));
    header.extend(["monotone_violation".into(), "energy".into(), "bound".into()]);

    let mut out = header.join(",");
    out.push('\n');
    for row in row_views(trace, objective, optimum, certificate) {
        let mut fields = vec![
            row.rec.k.to_string(),
            fmt_num(row.f_gap),
            fmt_num(row.grad_norm),
        ];
        fields.extend(row.rec.x.iter().map(|v| fmt_num(*v)));
        fields.extend(row.rec.y.iter().map(|v| fmt_num(*v)));
        fields.push(u8::from(row.monotone_violation).to_string());
        fields.push(row.energy.map(fmt_num).unwrap_or_default());
        fields.push(row.bound.map(fmt_num).unwrap_or_default());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    k: usize,
    f_gap: f64,
    grad_norm: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    v: Vec<f64>,
    z: Option<Vec<f64>>,
    value: f64,
    first_order_map: Vec<f64>,
    monotone_violation: u8,
    energy: Option<f64>,
    bound: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonTrace {
    problem: String,
    params: RunParams,
    records: Vec<JsonRecord>,
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

/// JSON with the CSV fields per record plus the full iterate state, enough
/// to rebuild the [`Trace`] exactly with [`trace_from_json`].
pub fn trace_to_json(
    trace: &Trace,
    objective: &CompositeObjective,
    optimum: &OptimumInfo,
    certificate: Option<&Certificate>,
) -> String {
    let records = row_views(trace, objective, optimum, certificate)
        .into_iter()
        .map(|row| JsonRecord {
            k: row.rec.k,
            f_gap: row.f_gap,
            grad_norm: row.grad_norm,
            x: to_vec(&row.rec.x),
            y: to_vec(&row.rec.y),
            v: to_vec(&row.rec.v),
            z: row.rec.z.as_ref().map(to_vec),
            value: row.rec.value,
            first_order_map: to_vec(&row.rec.map_at_y),
            monotone_violation: u8::from(row.monotone_violation),
            energy: row.energy,
            bound: row.bound,
        })
        .collect();
    let doc = JsonTrace {
        problem: trace.problem_id.clone(),
        params: trace.params,
        records,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("trace serialization cannot fail");
    text.push('\n');
    text
}

/// Rebuilds a trace written by [`trace_to_json`].
pub fn trace_from_json(text: &str) -> Result<Trace> {
    let doc: JsonTrace = serde_json::from_str(text)
        .map_err(|e| HarnessError::Config(format!("malformed trace file: {e}")))?;
    let records = doc
        .records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            if r.k != i {
                return Err(HarnessError::Config(format!(
                    "trace records must be contiguous from 0; found k = {} at position {i}",
                    r.k
                )));
            }
            Ok(Record {
                k: r.k,
                x: Vector::from_vec(r.x),
                y: Vector::from_vec(r.y),
                v: Vector::from_vec(r.v),
                z: r.z.map(Vector::from_vec),
                value: r.value,
                map_at_y: Vector::from_vec(r.first_order_map),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if records.is_empty() {
        return Err(HarnessError::Config("trace file has no records".into()));
    }
    Ok(Trace {
        params: doc.params,
        problem_id: doc.problem,
        records,
    })
}

pub fn emit_trace(
    trace: &Trace,
    objective: &CompositeObjective,
    optimum: &OptimumInfo,
    certificate: Option<&Certificate>,
    format: TraceFormat,
    path: &Path,
) -> Result<()> {
    let text = match format {
        TraceFormat::Csv => trace_to_csv(trace, objective, optimum, certificate),
        TraceFormat::Json => trace_to_json(trace, objective, optimum, certificate),
    };
    write_file(path, &text)
}

pub fn write_certificate(certificate: &Certificate, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&certificate.to_json())
        .expect("certificate serialization cannot fail");
    text.push('\n');
    write_file(path, &text)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Re-certifies a JSON trace against a problem.
pub fn certify_trace_file(
    path: &Path,
    problem: &str,
    energy_form: EnergyFormChoice,
) -> Result<(Trace, Certificate)> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let trace = trace_from_json(&text)?;
    let problem = resolve_problem(problem)?;
    if trace.records[0].x.len() != problem.objective.dim() {
        return Err(HarnessError::Config(format!(
            "trace dimension {} does not match problem dimension {}",
            trace.records[0].x.len(),
            problem.objective.dim()
        )));
    }
    let cert = certify(
        &trace,
        &problem.objective,
        &problem.optimum,
        energy_form.resolve(trace.params.algo),
    )?;
    Ok((trace, cert))
}
