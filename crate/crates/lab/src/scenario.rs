//! Scenario documents.
//!
//! A scenario is a strict JSON object; unknown keys are rejected and every
//! problem is reported with the path of the offending field.
//!
//! ```json
//! {
//!   "n": 2, "n1": 1,
//!   "A": [[0, 1], [1, 0]],
//!   "Dd": [[1]],
//!   "region": { "stripes": [[-1, 1]] },
//!   "domain": { "x_min": -20, "x_max": 20, "cells": 4000 },
//!   "initial": [{ "component": 2, "shape": "gaussian", "center": -4, "width": 0.3, "amplitude": 1 }],
//!   "t_final": 12,
//!   "kind": "verify-envelope"
//! }
//! ```
//!
//! Components are numbered from 1 in eigenvalue order. `A` may also be given
//! as a flat row-major list of `n²` numbers.

use std::fmt;

use hyperdelay_core::chartimes::UndampedRegion;
use hyperdelay_core::model::{
    diagonalize, validate_system, ValidationReport, CHECK_DAMPING_POSITIVITY, CHECK_NONZERO_SPEEDS, CHECK_REGION,
    CHECK_STRICT_HYPERBOLICITY, CHECK_SYMMETRY,
};
use hyperdelay_core::solver::{build_grid, Bump, BumpShape, Domain, InitialDataSpec, RunSetup, SolverError};
use hyperdelay_core::{EigenStructure, HyperbolicSystem, Interval, Mat};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Fullspace,
    VerifyEnvelope,
    ConservationProbe,
}

impl ExperimentKind {
    /// Kinds that run the exact-shift solver and so need a valid grid.
    pub fn needs_grid(self) -> bool {
        !matches!(self, ExperimentKind::Fullspace)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Fullspace => "fullspace",
            ExperimentKind::VerifyEnvelope => "verify-envelope",
            ExperimentKind::ConservationProbe => "conservation-probe",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    name: Option<String>,
    n: usize,
    n1: usize,
    #[serde(rename = "A")]
    flux: MatrixDoc,
    #[serde(rename = "Dd")]
    damping: MatrixDoc,
    #[serde(default)]
    region: Option<RegionDoc>,
    domain: DomainDoc,
    initial: Vec<BumpDoc>,
    t_final: f64,
    #[serde(default)]
    stride: Option<usize>,
    kind: ExperimentKind,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MatrixDoc {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionDoc {
    stripes: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainDoc {
    x_min: f64,
    x_max: f64,
    cells: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ShapeDoc {
    Gaussian,
    Box,
    CosineBump,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BumpDoc {
    component: usize,
    shape: ShapeDoc,
    center: f64,
    width: f64,
    #[serde(default = "unit")]
    amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

/// One problem found in a scenario document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl Issue {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub issues: Vec<Issue>,
}

impl ScenarioError {
    fn single(issue: Issue) -> Self {
        Self { issues: vec![issue] }
    }

    /// Whether any issue refers to `path` or one of its children.
    pub fn mentions(&self, path: &str) -> bool {
        self.issues.iter().any(|i| i.path == path || i.path.starts_with(&format!("{path}.")) || i.path.starts_with(&format!("{path}[")))
    }
}

impl std::error::Error for ScenarioError {}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.issues.iter().map(Issue::to_string).collect();
        write!(f, "invalid scenario:\n  {}", lines.join("\n  "))
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: Option<String>,
    pub system: HyperbolicSystem,
    pub eigs: EigenStructure,
    pub validation: ValidationReport,
    pub domain: Domain,
    pub initial: InitialDataSpec,
    pub t_final: f64,
    pub stride: Option<usize>,
    pub kind: ExperimentKind,
}

impl Scenario {
    pub fn region(&self) -> Option<&UndampedRegion> {
        self.system.region()
    }

    pub fn speeds(&self) -> &[f64] {
        self.eigs.lambdas()
    }

    pub fn run_setup(&self) -> RunSetup {
        RunSetup { domain: self.domain, initial: self.initial.clone(), t_final: self.t_final, stride: self.stride }
    }

    /// The same scenario with damping everywhere.
    pub fn fully_damped(&self) -> Scenario {
        Scenario { system: self.system.with_region(None), ..self.clone() }
    }
}

/// Structural verdict on a document whose dimensions are consistent.
#[derive(Debug, Clone)]
pub struct Draft {
    pub system: HyperbolicSystem,
    pub validation: ValidationReport,
    /// Problems outside the system itself (domain, initial data, grid).
    pub issues: Vec<Issue>,
}

fn parse(text: &str) -> Result<Document, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::from("(document)") } else { path };
        ScenarioError::single(Issue::new(path, e.into_inner().to_string()))
    })
}

fn matrix(doc: &MatrixDoc, rows: usize, cols: usize, field: &str) -> Result<Mat, Issue> {
    match doc {
        MatrixDoc::Rows(r) => {
            if r.len() != rows || r.iter().any(|row| row.len() != cols) {
                let got: Vec<usize> = r.iter().map(Vec::len).collect();
                return Err(Issue::new(field, format!("expected {rows} rows of length {cols}, got row lengths {got:?}")));
            }
            Ok(if rows == 0 { Mat::zeros(0, 0) } else { Mat::from_rows(r) })
        }
        MatrixDoc::Flat(v) => {
            if v.len() != rows * cols {
                return Err(Issue::new(field, format!("expected {} entries ({rows}x{cols} row-major), got {}", rows * cols, v.len())));
            }
            Ok(Mat::from_row_major(rows, cols, v))
        }
    }
}

fn check_field(check: &str) -> &'static str {
    match check {
        CHECK_SYMMETRY | CHECK_STRICT_HYPERBOLICITY | CHECK_NONZERO_SPEEDS => "A",
        CHECK_DAMPING_POSITIVITY => "Dd",
        CHECK_REGION => "region.stripes",
        _ => "(document)",
    }
}

fn check_message(check: &str, detail: &str) -> String {
    match check {
        CHECK_SYMMETRY => format!("flux matrix must be symmetric within 1e-12·max|A| ({detail})"),
        CHECK_STRICT_HYPERBOLICITY => format!("eigenvalues must be pairwise distinct ({detail})"),
        CHECK_NONZERO_SPEEDS => format!("eigenvalues must be nonzero ({detail})"),
        CHECK_DAMPING_POSITIVITY => format!("symmetric part of Dd must be positive definite ({detail})"),
        _ => detail.to_string(),
    }
}

fn assemble(doc: &Document) -> Result<Draft, ScenarioError> {
    let mut issues = Vec::new();
    if doc.n == 0 {
        issues.push(Issue::new("n", "must be at least 1"));
    }
    if doc.n1 > doc.n {
        issues.push(Issue::new("n1", format!("n1 = {} exceeds n = {}", doc.n1, doc.n)));
    }
    let flux = matrix(&doc.flux, doc.n, doc.n, "A").map_err(|e| issues.push(e)).ok();
    let n2 = doc.n.saturating_sub(doc.n1);
    let damping = matrix(&doc.damping, n2, n2, "Dd").map_err(|e| issues.push(e)).ok();

    let region = match &doc.region {
        None => None,
        Some(r) => {
            let stripes = r.stripes.iter().map(|s| Interval::new(s[0], s[1])).collect();
            match UndampedRegion::new(stripes) {
                Ok(region) => Some(region),
                Err(e) => {
                    issues.push(Issue::new("region.stripes", e.to_string()));
                    None
                }
            }
        }
    };

    let (Some(flux), Some(damping)) = (flux, damping) else {
        return Err(ScenarioError { issues });
    };
    if !issues.is_empty() {
        return Err(ScenarioError { issues });
    }
    let system = HyperbolicSystem::new(doc.n1, flux, damping, region).map_err(|e| {
        let field = match &e {
            hyperdelay_core::model::ModelError::Dimension { field, .. } => *field,
            _ => "A",
        };
        ScenarioError::single(Issue::new(field, e.to_string()))
    })?;
    if system.flux().as_slice().iter().chain(system.damping_block().as_slice()).any(|v| !v.is_finite()) {
        return Err(ScenarioError::single(Issue::new("A", "matrix entries must be finite")));
    }
    let validation =
        validate_system(&system).map_err(|e| ScenarioError::single(Issue::new("A", e.to_string())))?;

    let mut issues = Vec::new();
    let d = &doc.domain;
    if !(d.x_min.is_finite() && d.x_max.is_finite() && d.x_max > d.x_min) {
        issues.push(Issue::new("domain.x_max", "domain needs finite bounds with x_max > x_min"));
    }
    if d.cells < 4 {
        issues.push(Issue::new("domain.cells", "at least 4 cells are required"));
    }
    if !(doc.t_final.is_finite() && doc.t_final > 0.0) {
        issues.push(Issue::new("t_final", "must be a positive finite time"));
    }
    if doc.stride == Some(0) {
        issues.push(Issue::new("stride", "must be at least 1"));
    }
    if doc.initial.is_empty() {
        issues.push(Issue::new("initial", "at least one bump is required"));
    }
    for (k, b) in doc.initial.iter().enumerate() {
        if b.component == 0 || b.component > doc.n {
            issues.push(Issue::new(format!("initial[{k}].component"), format!("must lie in 1..={}", doc.n)));
        }
        if !(b.width.is_finite() && b.width > 0.0) {
            issues.push(Issue::new(format!("initial[{k}].width"), "must be positive"));
        }
        if !b.center.is_finite() {
            issues.push(Issue::new(format!("initial[{k}].center"), "must be finite"));
        }
        if !b.amplitude.is_finite() {
            issues.push(Issue::new(format!("initial[{k}].amplitude"), "must be finite"));
        }
    }
    match doc.kind {
        ExperimentKind::Fullspace if doc.region.is_some() => {
            issues.push(Issue::new("region", "fullspace experiments damp everywhere; remove the region"))
        }
        ExperimentKind::ConservationProbe if doc.region.is_none() => {
            issues.push(Issue::new("region", "a conservation probe needs an undamped region"))
        }
        _ => {}
    }
    Ok(Draft { system, validation, issues })
}

fn bumps(doc: &Document) -> InitialDataSpec {
    InitialDataSpec::new(
        doc.initial
            .iter()
            .map(|b| Bump {
                component: b.component - 1,
                shape: match b.shape {
                    ShapeDoc::Gaussian => BumpShape::Gaussian,
                    ShapeDoc::Box => BumpShape::Box,
                    ShapeDoc::CosineBump => BumpShape::CosineBump,
                },
                center: b.center,
                width: b.width,
                amplitude: b.amplitude,
            })
            .collect(),
    )
}

fn grid_issues(doc: &Document, system: &HyperbolicSystem, eigs: &EigenStructure) -> Vec<Issue> {
    let domain = Domain { x_min: doc.domain.x_min, x_max: doc.domain.x_max, cells: doc.domain.cells };
    let grid = match build_grid(domain, eigs.lambdas(), system.region(), doc.t_final) {
        Ok(g) => g,
        Err(SolverError::IrrationalSpeeds(v)) => {
            return vec![Issue::new(
                "A",
                format!("eigenvalue magnitude {v} is not a rational multiple of the others; the exact-shift solver needs rational speed ratios"),
            )]
        }
        Err(e) => return vec![Issue::new("domain", e.to_string())],
    };
    let vmax = eigs.lambdas().iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let spec = bumps(doc);
    spec.bumps
        .iter()
        .enumerate()
        .filter(|(_, b)| InitialDataSpec::new(vec![**b]).check_margin(&grid, vmax, doc.t_final).is_err())
        .map(|(k, _)| {
            Issue::new(
                format!("initial[{k}]"),
                format!("support must stay at least max|λ|·t_final = {} away from the domain boundary", vmax * doc.t_final),
            )
        })
        .collect()
}

/// Parses a document far enough to judge the system, without requiring it
/// to pass validation.
pub fn load_draft(text: &str) -> Result<Draft, ScenarioError> {
    assemble(&parse(text)?)
}

/// Parses and fully validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc = parse(text)?;
    let draft = assemble(&doc)?;
    let mut issues: Vec<Issue> = draft
        .validation
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| Issue::new(check_field(c.name), check_message(c.name, &c.detail)))
        .collect();
    issues.extend(draft.issues);
    if !issues.is_empty() {
        return Err(ScenarioError { issues });
    }
    let eigs = diagonalize(draft.system.flux()).map_err(|e| ScenarioError::single(Issue::new("A", e.to_string())))?;
    if doc.kind.needs_grid() {
        let issues = grid_issues(&doc, &draft.system, &eigs);
        if !issues.is_empty() {
            return Err(ScenarioError { issues });
        }
    }
    Ok(Scenario {
        name: doc.name.clone(),
        system: draft.system,
        eigs,
        validation: draft.validation,
        domain: Domain { x_min: doc.domain.x_min, x_max: doc.domain.x_max, cells: doc.domain.cells },
        initial: bumps(&doc),
        t_final: doc.t_final,
        stride: doc.stride,
        kind: doc.kind,
    })
}
