//! Configuration, report assembly and the `analyze` / `verify` / `spectrum`
//! commands behind the `weylscope` binary.
//!
//! Exit codes: 0 success, 1 a verifier residual over tolerance, 2 bad
//! configuration, 3 point outside the chart domain, 4 numerical or I/O
//! failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::chart_geometry::{
    conformal_rescale, covariant_derivative_endo, local_curvature, ExpLinear, MetricChart, DEFAULT_FD_STEP,
};
use crate::classifier::{analyze_tensor, ComplexModelType, ParityWarning, PipelineConfig, PointAnalysis, VerdictKind};
use crate::curvature_algebra::weyl_decompose;
use crate::error::Error;
use crate::models::{Model, ModelSpec};
use crate::spectral::{
    reduced_spectra, sample_directions, trace_check, OssermanReport, DEFAULT_CLUSTER_TOL, DEFAULT_SAMPLES,
};
use crate::tensor_core::CurvatureTensor;
use crate::tolerance::Tier;

pub const SCHEMA_VERSION: u32 = 1;

/// Caps the worker pool when set to a positive integer.
pub const THREADS_ENV: &str = "WEYLSCOPE_THREADS";

/// Number of default sample points when a chart config lists none.
pub const DEFAULT_POINT_COUNT: usize = 3;

/// Sampled directions for the trace-free verifier.
pub const TRACE_CHECK_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivatives {
    /// Exact jets when the model provides them, finite differences otherwise.
    #[default]
    Analytic,
    FiniteDifference,
}

/// A positive conformal factor `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ConformalFactor {
    /// `α(u) = exp(Σ cₐ uₐ)`.
    ExpLinear(Vec<f64>),
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_cluster_tol() -> f64 {
    DEFAULT_CLUSTER_TOL
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub model: ModelSpec,
    /// Chart coordinates; when empty, seeded interior points are used.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub derivatives: Derivatives,
    /// Setting a step implies finite differences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_tol: Option<f64>,
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
    /// `‖W‖∞` threshold for the conformally flat verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degeneracy_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_tol: Option<f64>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal_factor: Option<ConformalFactor>,
    /// Debug aid: breaks a curvature symmetry before verification.
    #[serde(default, skip_serializing_if = "is_false")]
    pub corrupt_tensor: bool,
}

impl AnalysisConfig {
    pub fn new(model: ModelSpec) -> Self {
        Self {
            model,
            points: Vec::new(),
            samples: DEFAULT_SAMPLES,
            seed: 0,
            derivatives: Derivatives::Analytic,
            fd_step: None,
            spec_tol: None,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            degeneracy_tol: None,
            recovery_tol: None,
            format: OutputFormat::Text,
            out: None,
            conformal_factor: None,
            corrupt_tensor: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |key: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                Err(CliError::Config(format!("`{key}` must be positive, got {x}")))
            }
            _ => Ok(()),
        };
        positive("fd_step", self.fd_step)?;
        positive("spec_tol", self.spec_tol)?;
        positive("cluster_tol", Some(self.cluster_tol))?;
        positive("degeneracy_tol", self.degeneracy_tol)?;
        positive("recovery_tol", self.recovery_tol)?;
        if self.samples < 2 {
            return Err(CliError::Config(format!(
                "`samples` must be at least 2, got {}",
                self.samples
            )));
        }
        let m = self.model.dim();
        if let Some(p) = self.points.iter().find(|p| p.len() != m) {
            return Err(CliError::Config(format!(
                "`points`: expected {m} coordinates, got {} in {p:?}",
                p.len()
            )));
        }
        if let Some(ConformalFactor::ExpLinear(c)) = &self.conformal_factor {
            if c.len() != m {
                return Err(CliError::Config(format!(
                    "`conformal_factor`: expected {m} coefficients, got {}",
                    c.len()
                )));
            }
        }
        Ok(())
    }

    pub fn pipeline(&self, bianchi: bool) -> PipelineConfig {
        PipelineConfig {
            samples: self.samples,
            seed: self.seed,
            spec_tol: self.spec_tol,
            cluster_tol: self.cluster_tol,
            flat_tol: self.degeneracy_tol,
            recovery_tol: self.recovery_tol,
            bianchi,
            keep_spectra: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Numerical(_) | CliError::Io(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. } => CliError::Domain(e.to_string()),
            Error::InvalidParameter { .. } | Error::InvalidDimension { .. } => CliError::Config(e.to_string()),
            Error::DimensionMismatch {
                what: "chart point", ..
            } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub tier: Tier,
    pub derivative_mode: String,
    pub config: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub kind: VerdictKind,
    pub lambda0: Option<f64>,
    pub lambda1: Option<f64>,
    pub model_type: Option<ComplexModelType>,
    /// Recovered `Φ` in chart coordinates, row-major.
    pub phi: Option<Vec<Vec<f64>>>,
    pub trace_relation_residual: Option<f64>,
    pub reconstruction_residual: Option<f64>,
    pub near_degenerate: bool,
    pub below_rigidity_dimension: bool,
    pub parity_warnings: Vec<ParityWarning>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub point: Vec<f64>,
    pub metric: Vec<Vec<f64>>,
    pub tau: f64,
    pub weyl_norm: f64,
    pub decomposition_residual: f64,
    pub osserman: OssermanReport,
    pub verdict: VerdictRecord,
    pub bianchi_residual: Option<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl From<&PointAnalysis> for PointRecord {
    fn from(p: &PointAnalysis) -> Self {
        let v = &p.verdict;
        let d = &v.diagnostics;
        Self {
            point: p.point.clone(),
            metric: rows(p.metric.matrix()),
            tau: p.tau,
            weyl_norm: d.weyl_norm,
            decomposition_residual: p.reconstruction_residual,
            osserman: p.osserman.clone(),
            verdict: VerdictRecord {
                kind: v.kind,
                lambda0: v.lambda0,
                lambda1: v.lambda1,
                model_type: v.model_type,
                phi: p.phi_coordinates.as_ref().map(rows),
                trace_relation_residual: d.trace_relation_residual,
                reconstruction_residual: d.reconstruction_residual,
                near_degenerate: d.near_degenerate,
                below_rigidity_dimension: d.below_rigidity_dimension,
                parity_warnings: d.parity_warnings.clone(),
                note: d.note.clone(),
            },
            bianchi_residual: p.bianchi_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub conformally_flat: usize,
    pub conformally_complex_space_form: usize,
    pub osserman_other: usize,
    pub not_conformally_osserman: usize,
    pub phi_consistency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub point: Vec<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub direction: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub point: Vec<f64>,
    pub rows: Vec<SpectrumRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub metadata: Metadata,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spectra: Vec<SpectrumTable>,
}

impl Report {
    /// `true` unless some verifier check failed.
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let md = &self.metadata;
        let _ = writeln!(out, "weylscope {} {}", md.version, md.command);
        let _ = writeln!(out, "schema_version: {}", self.schema_version);
        let _ = writeln!(
            out,
            "model: {}",
            serde_json::to_string(&md.config.model).expect("model serializes")
        );
        let _ = writeln!(out, "seed: {}", md.seed);
        let _ = writeln!(out, "derivatives: {} ({})", md.derivative_mode, tier_name(md.tier));
        for (idx, p) in self.points.iter().enumerate() {
            let _ = writeln!(out, "\n[point {idx}] u = {}", num_list(&p.point));
            for (r, row) in p.metric.iter().enumerate() {
                let _ = writeln!(out, "  g[{r}] = {}", num_list(row));
            }
            let _ = writeln!(out, "  tau = {}", num(p.tau));
            let _ = writeln!(out, "  weyl_norm = {}", num(p.weyl_norm));
            let _ = writeln!(out, "  decomposition_residual = {}", num(p.decomposition_residual));
            let o = &p.osserman;
            let _ = writeln!(
                out,
                "  osserman: constant = {}, max_profile_distance = {}, samples = {}, max_abs_trace = {}",
                o.is_constant,
                num(o.max_profile_distance),
                o.sample_count,
                num(o.max_abs_trace)
            );
            for c in &o.profile.clusters {
                let _ = writeln!(out, "  cluster {} x{}", num(c.value), c.multiplicity);
            }
            let v = &p.verdict;
            let _ = writeln!(out, "  verdict = {}", v.kind);
            let opt = |x: Option<f64>| x.map(num).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "  lambda0 = {}", opt(v.lambda0));
            let _ = writeln!(out, "  lambda1 = {}", opt(v.lambda1));
            if let Some(t) = v.model_type {
                let _ = writeln!(
                    out,
                    "  model_type = {}",
                    serde_json::to_string(&t).expect("type serializes")
                );
            }
            let _ = writeln!(out, "  trace_relation_residual = {}", opt(v.trace_relation_residual));
            let _ = writeln!(out, "  reconstruction_residual = {}", opt(v.reconstruction_residual));
            if let Some(phi) = &v.phi {
                for (r, row) in phi.iter().enumerate() {
                    let _ = writeln!(out, "  phi[{r}] = {}", num_list(row));
                }
            }
            if v.near_degenerate {
                let _ = writeln!(out, "  note: near-degenerate (one cluster, weyl_norm above tolerance)");
            }
            if v.below_rigidity_dimension {
                let _ = writeln!(out, "  note: m < 8, rigidity not claimed in this dimension");
            }
            for w in &v.parity_warnings {
                let _ = writeln!(out, "  warning: {w}");
            }
            if let Some(n) = &v.note {
                let _ = writeln!(out, "  note: {n}");
            }
            let _ = writeln!(out, "  bianchi_residual = {}", opt(p.bianchi_residual));
        }
        if let Some(s) = &self.summary {
            let _ = writeln!(
                out,
                "\nsummary: conformally_flat = {}, conformally_complex_space_form = {}, osserman_other = {}, not_conformally_osserman = {}",
                s.conformally_flat, s.conformally_complex_space_form, s.osserman_other, s.not_conformally_osserman
            );
            if let Some(c) = s.phi_consistency {
                let _ = writeln!(out, "phi_consistency = {}", num(c));
            }
        }
        if !self.checks.is_empty() {
            let _ = writeln!(out);
            for c in &self.checks {
                let _ = writeln!(
                    out,
                    "{} {} at {}: residual = {}, tolerance = {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    num_list(&c.point),
                    num(c.residual),
                    num(c.tolerance)
                );
            }
        }
        for t in &self.spectra {
            let _ = writeln!(out, "\n[spectrum] u = {}", num_list(&t.point));
            for (i, r) in t.rows.iter().enumerate() {
                let _ = writeln!(out, "  {i:>4}  {}", num_list(&r.eigenvalues));
            }
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Text => self.to_text(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

fn tier_name(t: Tier) -> &'static str {
    match t {
        Tier::Exact => "exact tier",
        Tier::FiniteDifference => "finite-difference tier",
    }
}

/// Same digits as the JSON report (shortest round-trip form).
fn num(x: f64) -> String {
    serde_json::to_string(&x).expect("finite float")
}

fn num_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| num(x)).collect();
    format!("[{}]", parts.join(", "))
}

/// The model resolved for one run.
enum Resolved {
    Chart(MetricChart),
    Algebraic(CurvatureTensor),
}

impl Resolved {
    fn tier(&self) -> Tier {
        match self {
            Resolved::Chart(c) => c.tier(),
            Resolved::Algebraic(_) => Tier::Exact,
        }
    }

    fn mode_name(&self) -> String {
        match self {
            Resolved::Chart(c) => match c.mode() {
                crate::chart_geometry::DerivativeMode::Analytic => "analytic".into(),
                crate::chart_geometry::DerivativeMode::FiniteDifference { step } => {
                    format!("finite_difference(h={})", num(step))
                }
            },
            Resolved::Algebraic(_) => "algebraic".into(),
        }
    }
}

fn resolve(config: &AnalysisConfig) -> Result<Resolved, CliError> {
    Ok(match config.model.build()? {
        Model::Chart(chart) => {
            let fd = config.fd_step.is_some() || config.derivatives == Derivatives::FiniteDifference;
            let chart = if fd {
                chart.with_finite_differences(config.fd_step.unwrap_or(DEFAULT_FD_STEP))?
            } else {
                chart
            };
            Resolved::Chart(chart)
        }
        Model::Algebraic(t) => Resolved::Algebraic(t),
    })
}

fn points_for(config: &AnalysisConfig, chart: &MetricChart) -> Vec<Vec<f64>> {
    if config.points.is_empty() {
        chart
            .domain()
            .sample_points(chart.dim(), DEFAULT_POINT_COUNT, config.seed)
    } else {
        config.points.clone()
    }
}

fn metadata(config: &AnalysisConfig, command: &str, resolved: &Resolved) -> Metadata {
    Metadata {
        tool: "weylscope".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: config.seed,
        tier: resolved.tier(),
        derivative_mode: resolved.mode_name(),
        config: config.clone(),
    }
}

fn corrupt(r: &mut CurvatureTensor) {
    let scale = r.max_abs().max(1.0);
    r.set(0, 1, 1, 0, r.get(0, 1, 1, 0) + 1e-2 * scale);
}

fn summary(points: &[PointAnalysis]) -> Summary {
    let s = crate::classifier::ChartSummary::from_points(points);
    Summary {
        conformally_flat: s.conformally_flat,
        conformally_complex_space_form: s.conformally_complex_space_form,
        osserman_other: s.osserman_other,
        not_conformally_osserman: s.not_conformally_osserman,
        phi_consistency: s.phi_consistency,
    }
}

/// Full classification pipeline at every configured point.
pub fn cmd_analyze(config: &AnalysisConfig) -> Result<Report, CliError> {
    config.validate()?;
    let resolved = resolve(config)?;
    let analyses: Vec<PointAnalysis> = match &resolved {
        Resolved::Chart(chart) => {
            let pipeline = config.pipeline(true);
            points_for(config, chart)
                .par_iter()
                .map(|u| -> Result<PointAnalysis, Error> {
                    let local = local_curvature(chart, u, true)?;
                    let mut r = local.riemann;
                    if config.corrupt_tensor {
                        corrupt(&mut r);
                    }
                    let mut a = analyze_tensor(&r, u.clone(), chart.tier(), &pipeline)?;
                    a.bianchi_residual = local.nabla_riemann.map(|d| d.bianchi_residual());
                    Ok(a)
                })
                .collect::<Result<_, _>>()?
        }
        Resolved::Algebraic(t) => {
            let mut t = t.clone();
            if config.corrupt_tensor {
                corrupt(&mut t);
            }
            vec![analyze_tensor(&t, Vec::new(), Tier::Exact, &config.pipeline(false))?]
        }
    };
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        metadata: metadata(config, "analyze", &resolved),
        summary: Some(summary(&analyses)),
        points: analyses.iter().map(PointRecord::from).collect(),
        checks: Vec::new(),
        spectra: Vec::new(),
    })
}

fn check(name: &str, point: &[f64], residual: f64, tolerance: f64) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        point: point.to_vec(),
        residual,
        tolerance,
        pass: residual <= tolerance,
    }
}

fn tensor_checks(r: &CurvatureTensor, u: &[f64], tier: Tier, seed: u64) -> Result<Vec<CheckRecord>, Error> {
    let symmetry = r.symmetry_residual() / r.max_abs().max(1.0);
    let d = weyl_decompose(r)?;
    let trace = trace_check(&d.w, TRACE_CHECK_SAMPLES, seed)?;
    let scale = r.max_abs().max(1.0);
    Ok(vec![
        check("curvature_symmetry", u, symmetry, tier.symmetry_tol()),
        check("weyl_trace_free", u, trace / scale, tier.trace_tol()),
        check(
            "decomposition_roundtrip",
            u,
            d.reconstruction_residual() / scale,
            tier.oracle_tol(),
        ),
    ])
}

fn chart_point_checks(
    config: &AnalysisConfig,
    chart: &MetricChart,
    rescaled: Option<&MetricChart>,
    u: &[f64],
) -> Result<Vec<CheckRecord>, Error> {
    let tier = chart.tier();
    let local = local_curvature(chart, u, true)?;
    let mut r = local.riemann.clone();
    if config.corrupt_tensor {
        corrupt(&mut r);
    }
    let mut out = tensor_checks(&r, u, tier, config.seed)?;
    if let Some(nabla) = &local.nabla_riemann {
        out.push(check("second_bianchi", u, nabla.bianchi_residual(), tier.bianchi_tol()));
    }
    if let Some(oracle) = config.model.curvature_oracle(&local.metric) {
        out.push(check("curvature_oracle", u, r.distance(&oracle), tier.oracle_tol()));
    }
    if let Some(j) = config.model.complex_structure() {
        let d = covariant_derivative_endo(chart, &|_: &[f64]| j.clone(), u)?;
        out.push(check("parallel_complex_structure", u, d.max_abs(), tier.parallel_tol()));
        out.push(check(
            "complex_structure_anticommutator",
            u,
            d.anticommutator_residual(),
            tier.parallel_tol(),
        ));
    }
    if let Some(resc) = rescaled {
        let w1 = weyl_decompose(&r)?.w.raise_last();
        let w2 = weyl_decompose(&local_curvature(resc, u, false)?.riemann)?
            .w
            .raise_last();
        let diff = w1.iter().zip(&w2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.push(check(
            "weyl_conformal_invariance",
            u,
            diff,
            resc.tier().invariance_tol(),
        ));
    }
    Ok(out)
}

/// Runs every identity verifier that applies to the model.
pub fn cmd_verify(config: &AnalysisConfig) -> Result<Report, CliError> {
    config.validate()?;
    let resolved = resolve(config)?;
    let checks: Vec<CheckRecord> = match &resolved {
        Resolved::Chart(chart) => {
            let rescaled = match &config.conformal_factor {
                Some(ConformalFactor::ExpLinear(c)) => Some(conformal_rescale(
                    chart,
                    Arc::new(ExpLinear {
                        coefficients: c.clone(),
                    }),
                )?),
                None => None,
            };
            let per_point: Vec<Vec<CheckRecord>> = points_for(config, chart)
                .par_iter()
                .map(|u| chart_point_checks(config, chart, rescaled.as_ref(), u))
                .collect::<Result<_, _>>()?;
            per_point.into_iter().flatten().collect()
        }
        Resolved::Algebraic(t) => {
            let mut t = t.clone();
            if config.corrupt_tensor {
                corrupt(&mut t);
            }
            tensor_checks(&t, &[], Tier::Exact, config.seed)?
        }
    };
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        metadata: metadata(config, "verify", &resolved),
        points: Vec::new(),
        summary: None,
        checks,
        spectra: Vec::new(),
    })
}

/// Sorted reduced Weyl spectra for each sampled direction, structured
/// directions first.
pub fn cmd_spectrum(config: &AnalysisConfig) -> Result<Report, CliError> {
    config.validate()?;
    let resolved = resolve(config)?;
    let tensors: Vec<(Vec<f64>, CurvatureTensor)> = match &resolved {
        Resolved::Chart(chart) => points_for(config, chart)
            .par_iter()
            .map(|u| Ok((u.clone(), local_curvature(chart, u, false)?.riemann)))
            .collect::<Result<_, Error>>()?,
        Resolved::Algebraic(t) => vec![(Vec::new(), t.clone())],
    };
    let m = config.model.dim();
    let dirs = sample_directions(m, config.samples, config.seed);
    let spectra = tensors
        .iter()
        .map(|(u, r)| {
            let w = weyl_decompose(r)?.w;
            let rows = reduced_spectra(&w, &dirs)?
                .into_iter()
                .zip(&dirs)
                .map(|(eigenvalues, x)| SpectrumRow {
                    direction: x.iter().copied().collect(),
                    eigenvalues,
                })
                .collect();
            Ok(SpectrumTable { point: u.clone(), rows })
        })
        .collect::<Result<_, Error>>()?;
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        metadata: metadata(config, "spectrum", &resolved),
        points: Vec::new(),
        summary: None,
        checks: Vec::new(),
        spectra,
    })
}

/// Parses `name,key=value,...` into a model spec, e.g. `fubini_study,n=4`.
pub fn parse_model_flag(s: &str) -> Result<ModelSpec, CliError> {
    let mut parts = s.split(',').map(str::trim);
    let name = parts
        .next()
        .filter(|n| !n.is_empty())
        .ok_or_else(|| CliError::Config("`model`: empty".into()))?;
    let mut obj = Map::new();
    obj.insert("name".into(), Value::String(name.into()));
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("`model`: expected key=value, got `{kv}`")))?;
        let value = serde_json::from_str::<Value>(v).unwrap_or_else(|_| Value::String(v.into()));
        obj.insert(k.trim().into(), value);
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Config(format!("`model`: {e}")))
}

fn parse_point_flag(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("`point`: cannot parse `{x}` as a number")))
        })
        .collect()
}

#[derive(Debug, Parser)]
#[command(
    name = "weylscope",
    version,
    about = "Weyl curvature spectra and conformally Osserman classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the model at each point.
    Analyze(CommonArgs),
    /// Check curvature identities; exits 1 if any residual is over tolerance.
    Verify(CommonArgs),
    /// Print reduced Weyl Jacobi spectra per sampled direction.
    Spectrum(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model as `name,key=value,...`, e.g. `fubini_study,n=4`.
    #[arg(long)]
    pub model: Option<String>,
    /// Chart point as comma-separated coordinates; repeatable.
    #[arg(long = "point", allow_hyphen_values = true)]
    pub points: Vec<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use finite differences with this step.
    #[arg(long, allow_negative_numbers = true)]
    pub fd_step: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub spec_tol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub cluster_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn to_config(&self) -> Result<AnalysisConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                AnalysisConfig::from_json(&text)?
            }
            None => {
                let model = self
                    .model
                    .as_deref()
                    .ok_or_else(|| CliError::Config("`model` is required (use --model or --config)".into()))?;
                AnalysisConfig::new(parse_model_flag(model)?)
            }
        };
        if let (Some(_), Some(model)) = (&self.config, &self.model) {
            config.model = parse_model_flag(model)?;
        }
        if !self.points.is_empty() {
            config.points = self
                .points
                .iter()
                .map(|p| parse_point_flag(p))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = self.samples {
            config.samples = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.fd_step {
            config.fd_step = Some(v);
        }
        if let Some(v) = self.spec_tol {
            config.spec_tol = Some(v);
        }
        if let Some(v) = self.cluster_tol {
            config.cluster_tol = v;
        }
        if let Some(v) = self.format {
            config.format = v;
        }
        if let Some(v) = &self.out {
            config.out = Some(v.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

/// Runs a parsed command, writes the report, and returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let (args, name) = match &cli.command {
        Command::Analyze(a) => (a, "analyze"),
        Command::Verify(a) => (a, "verify"),
        Command::Spectrum(a) => (a, "spectrum"),
    };
    let result = args.to_config().and_then(|config| {
        let report = match name {
            "analyze" => cmd_analyze(&config)?,
            "verify" => cmd_verify(&config)?,
            _ => cmd_spectrum(&config)?,
        };
        let text = report.render(config.format);
        match &config.out {
            Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
            None => print!("{text}"),
        }
        Ok(if report.all_checks_pass() { 0 } else { 1 })
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("weylscope: {e}");
            e.exit_code()
        }
    }
}

/// Reads the thread cap from the environment, if any.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}
