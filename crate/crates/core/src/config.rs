//! JSON analysis configuration: schema types, loading and validation.
//!
//! Expressions are strings in the syntax of [`crate::expr`]. Every
//! expression is parsed at load time so malformed input never reaches the
//! numerical pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    ControlSystem, EngineError, EngineOptions, GroupSpec, ManifoldVariant, SearchOptions, Structure, TargetDef,
    TargetKind, VectorFieldDef,
};
use crate::expr::{parse_with_params, Expr, ExprError};
use crate::jet::MAX_VARS;
use crate::lab::{default_radii, ReachOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Json { path: String, line: usize, column: usize, message: String },
    #[error("{path}{}: {message}", at_line(*line))]
    Invalid { path: String, line: Option<usize>, message: String },
    #[error("{path}{}: in `{text}`: {source}", at_line(*line))]
    Expr {
        path: String,
        line: Option<usize>,
        text: String,
        #[source]
        source: ExprError,
    },
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(":{l}")).unwrap_or_default()
}

impl ConfigError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Io { .. } => None,
            ConfigError::Json { line, .. } => Some(*line),
            ConfigError::Invalid { line, .. } | ConfigError::Expr { line, .. } => *line,
        }
    }
}

/// Components as a JSON array or a single comma-separated string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Components {
    List(Vec<String>),
    Text(String),
}

impl Components {
    pub fn items(&self) -> Vec<String> {
        match self {
            Components::List(v) => v.clone(),
            Components::Text(s) => split_top_level(s),
        }
    }
}

/// Splits on commas outside parentheses so function arguments stay intact.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur.trim().to_string());
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    pub components: Components,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub variables: Vec<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub fields: Vec<FieldSpec>,
    #[serde(default = "general")]
    pub structure: Structure,
    pub radius: f64,
}

fn general() -> Structure {
    Structure::General
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    /// Smooth function touching `u` from above at each point.
    pub phi: String,
    /// Number of sampled points used to check the touching premise.
    #[serde(default)]
    pub spot_check: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub kind: TargetKind,
    #[serde(default)]
    pub equations: Vec<String>,
    /// Fat: `u` of `{u ≤ 0}`. Manifold: `u_{h+1}` of `{u_{h+1} ≥ 0}`.
    #[serde(default)]
    pub inequality: Option<String>,
    /// Fat only: further active constraints `{u_i ≤ 0}`.
    #[serde(default)]
    pub inequalities: Vec<String>,
    #[serde(default)]
    pub comparison: Option<ComparisonSpec>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Certify,
    Search,
    Reach,
    Holder,
    Identities,
    Expansion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupEntry {
    pub fields: Vec<String>,
    pub order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub zero: f64,
    pub target: f64,
    pub reach: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let e = EngineOptions::default();
        Tolerances { zero: e.tol, target: e.target_tol, reach: ReachOptions::default().tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderSpec {
    pub radii: Option<Vec<f64>>,
    /// Number of geometric default radii when `radii` is absent.
    pub count: usize,
    pub directions: usize,
}

impl Default for HolderSpec {
    fn default() -> Self {
        HolderSpec { radii: None, count: 8, directions: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReachSpec {
    /// Explicit start points; otherwise `count` points at `distance` from each base point.
    pub starts: Option<Vec<Vec<f64>>>,
    pub distance: f64,
    pub count: usize,
    pub steps_per_leg: usize,
}

impl Default for ReachSpec {
    fn default() -> Self {
        ReachSpec { starts: None, distance: 1e-4, count: 4, steps_per_leg: ReachOptions::default().steps_per_leg }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSpec {
    pub fields: Vec<String>,
    pub order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSpec {
    #[default]
    Auto,
    StrictExtra,
    RestrictedVars,
    BlockStructure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub groups: Option<Vec<GroupEntry>>,
    #[serde(default)]
    pub search: SearchOptions,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub holder: HolderSpec,
    #[serde(default)]
    pub reach: ReachSpec,
    #[serde(default)]
    pub expansion: Option<ExpansionSpec>,
    #[serde(default)]
    pub variant: VariantSpec,
    /// Variable names for the restricted-variable variant; inferred when absent.
    #[serde(default)]
    pub restricted_vars: Option<Vec<String>>,
}

/// The document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub name: Option<String>,
    pub system: SystemSpec,
    pub target: TargetSpec,
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Nonsmooth fat target handled through a smooth comparison function.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub phi: Expr,
    pub spot_check: Option<usize>,
}

/// A validated configuration with every expression parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub name: String,
    pub source: ConfigFile,
    pub system: ControlSystem,
    pub target: TargetDef,
    /// Additional fat constraints beyond `target.inequality`.
    pub extra_inequalities: Vec<Expr>,
    pub comparison: Option<Comparison>,
    pub points: Vec<Vec<f64>>,
    pub tasks: Vec<Task>,
    pub groups: Option<Vec<GroupSpec>>,
    pub search: SearchOptions,
    pub engine: EngineOptions,
    pub reach: ReachOptions,
    pub reach_starts: Option<Vec<Vec<f64>>>,
    pub reach_distance: f64,
    pub reach_count: usize,
    pub holder_radii: Vec<f64>,
    pub holder_directions: usize,
    pub expansion: Option<ExpansionSpec>,
    pub variant: ManifoldVariant,
}

impl AnalysisConfig {
    pub fn n(&self) -> usize {
        self.system.n()
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<AnalysisConfig, ConfigError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: label.clone(), source })?;
    parse_config(&text, &label)
}

/// 1-based line of the first occurrence of `"token"` in the source, or of
/// the bare token when it is only part of a string.
fn line_of(text: &str, token: &str) -> Option<usize> {
    let quoted = format!("\"{token}\"");
    let find = |needle: &str| text.lines().position(|l| l.contains(needle)).map(|i| i + 1);
    find(&quoted).or_else(|| if token.is_empty() { None } else { find(token) })
}

struct Ctx<'a> {
    text: &'a str,
    path: &'a str,
}

impl Ctx<'_> {
    fn invalid(&self, token: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { path: self.path.to_string(), line: line_of(self.text, token), message: message.into() }
    }

    fn expr(&self, s: &str, vars: &[String], params: &BTreeMap<String, f64>) -> Result<Expr, ConfigError> {
        parse_with_params(s, vars, params).map_err(|source| ConfigError::Expr {
            path: self.path.to_string(),
            line: line_of(self.text, s),
            text: s.to_string(),
            source,
        })
    }

    fn engine(&self, token: &str, e: EngineError) -> ConfigError {
        self.invalid(token, e.to_string())
    }
}

/// Parses and validates configuration text; `path` only labels errors.
pub fn parse_config(text: &str, path: &str) -> Result<AnalysisConfig, ConfigError> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| ConfigError::Json {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let cx = Ctx { text, path };
    let sys = &file.system;
    let n = sys.variables.len();
    if n == 0 || n > MAX_VARS {
        return Err(cx.invalid("variables", format!("{n} variables; between 1 and {MAX_VARS} are supported")));
    }
    for (i, v) in sys.variables.iter().enumerate() {
        if sys.variables[..i].contains(v) {
            return Err(cx.invalid(v, format!("variable `{v}` declared twice")));
        }
        if sys.parameters.contains_key(v) {
            return Err(cx.invalid(v, format!("`{v}` is both a variable and a parameter")));
        }
    }
    if !(sys.radius > 0.0) || !sys.radius.is_finite() {
        return Err(cx.invalid("radius", format!("radius must be positive, got {}", sys.radius)));
    }
    if sys.fields.is_empty() {
        return Err(cx.invalid("fields", "no vector fields declared"));
    }
    let mut defs = Vec::with_capacity(sys.fields.len());
    for f in &sys.fields {
        if defs.iter().any(|d: &VectorFieldDef| d.name == f.name) {
            return Err(cx.invalid(&f.name, format!("field `{}` declared twice", f.name)));
        }
        let items = f.components.items();
        if items.len() != n {
            return Err(cx.invalid(
                &f.name,
                format!("field `{}` has {} components for {n} variables", f.name, items.len()),
            ));
        }
        let components = items.iter().map(|c| cx.expr(c, &sys.variables, &sys.parameters)).collect::<Result<_, _>>()?;
        defs.push(VectorFieldDef { name: f.name.clone(), components });
    }
    if let Structure::Affine { drift, controls } = &sys.structure {
        for name in std::iter::once(drift).chain(controls) {
            if !defs.iter().any(|d| &d.name == name) {
                return Err(cx.invalid(name, format!("structure refers to undefined field `{name}`")));
            }
        }
    }
    let system = ControlSystem::new(sys.variables.clone(), defs, sys.structure.clone(), sys.radius)
        .map_err(|e| cx.engine("structure", e))?;

    let t = &file.target;
    let parse = |s: &String| cx.expr(s, &sys.variables, &sys.parameters);
    let equations: Vec<Expr> = t.equations.iter().map(parse).collect::<Result<_, _>>()?;
    let inequality = t.inequality.as_ref().map(parse).transpose()?;
    let extra_inequalities: Vec<Expr> = t.inequalities.iter().map(parse).collect::<Result<_, _>>()?;
    let comparison = match &t.comparison {
        Some(c) => Some(Comparison { phi: parse(&c.phi)?, spot_check: c.spot_check }),
        None => None,
    };
    let target = match t.kind {
        TargetKind::Fat => {
            let u = inequality.ok_or_else(|| cx.invalid("kind", "a fat target needs `inequality`"))?;
            if !equations.is_empty() {
                return Err(cx.invalid("equations", "a fat target takes no equations"));
            }
            TargetDef::fat(u)
        }
        TargetKind::Point => {
            if !equations.is_empty() || inequality.is_some() {
                return Err(cx.invalid("kind", "a point target takes no equations or inequality"));
            }
            TargetDef::point()
        }
        TargetKind::Manifold => {
            if equations.is_empty() || equations.len() > n {
                return Err(cx.invalid(
                    "equations",
                    format!("a manifold target needs between 1 and {n} equations, got {}", equations.len()),
                ));
            }
            TargetDef::manifold(equations, inequality)
        }
    };
    if t.kind != TargetKind::Fat && (!extra_inequalities.is_empty() || comparison.is_some()) {
        return Err(cx.invalid("kind", "`inequalities` and `comparison` apply to fat targets only"));
    }
    if !extra_inequalities.is_empty() && comparison.is_some() {
        return Err(cx.invalid("comparison", "`comparison` cannot be combined with `inequalities`"));
    }
    if t.points.is_empty() {
        return Err(cx.invalid("points", "no base points given"));
    }
    for p in &t.points {
        if p.len() != n {
            return Err(cx.invalid("points", format!("point {p:?} has {} coordinates for {n} variables", p.len())));
        }
    }

    let a = &file.analysis;
    if a.tasks.is_empty() {
        return Err(cx.invalid("tasks", "task list is empty"));
    }
    let groups = match &a.groups {
        None => None,
        Some(gs) => {
            if gs.is_empty() {
                return Err(cx.invalid("groups", "group list is empty; omit it to search instead"));
            }
            let mut out = Vec::with_capacity(gs.len());
            for g in gs {
                for f in &g.fields {
                    system.field(f).map_err(|e| cx.engine(f, e))?;
                }
                out.push(GroupSpec::new(g.fields.clone(), g.order).map_err(|e| cx.engine("groups", e))?);
            }
            Some(out)
        }
    };
    if a.search.k_max == 0 || a.search.length_max == 0 || a.search.m_max == 0 {
        return Err(cx.invalid("search", "k_max, length_max and m_max must be positive"));
    }
    let tol = &a.tolerances;
    for (name, v) in [("zero", tol.zero), ("target", tol.target), ("reach", tol.reach)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(cx.invalid(name, format!("tolerance `{name}` must be positive, got {v}")));
        }
    }
    let holder_radii = match &a.holder.radii {
        Some(r) => r.clone(),
        None => default_radii(a.holder.count),
    };
    if a.tasks.contains(&Task::Holder) {
        if holder_radii.len() < 3 || holder_radii.iter().any(|r| !(*r > 0.0)) {
            return Err(cx.invalid("holder", "holder needs at least three positive radii"));
        }
        if a.holder.directions == 0 {
            return Err(cx.invalid("directions", "holder needs at least one direction"));
        }
    }
    if let Some(starts) = &a.reach.starts {
        if let Some(s) = starts.iter().find(|s| s.len() != n) {
            return Err(cx.invalid("starts", format!("start {s:?} has {} coordinates for {n} variables", s.len())));
        }
    }
    if a.reach.steps_per_leg == 0 {
        return Err(cx.invalid("steps_per_leg", "steps_per_leg must be positive"));
    }
    if a.tasks.contains(&Task::Expansion) {
        let e = a.expansion.as_ref().ok_or_else(|| cx.invalid("tasks", "the expansion task needs an `expansion` block"))?;
        if e.fields.is_empty() || e.order == 0 {
            return Err(cx.invalid("expansion", "expansion needs fields and a positive order"));
        }
        for f in &e.fields {
            system.field(f).map_err(|err| cx.engine(f, err))?;
        }
    }
    let restricted = match &a.restricted_vars {
        None => None,
        Some(names) => Some(
            names
                .iter()
                .map(|v| {
                    sys.variables
                        .iter()
                        .position(|w| w == v)
                        .ok_or_else(|| cx.invalid(v, format!("unknown variable `{v}` in restricted_vars")))
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    let variant = match a.variant {
        VariantSpec::Auto => ManifoldVariant::Auto,
        VariantSpec::StrictExtra => ManifoldVariant::StrictExtra,
        VariantSpec::RestrictedVars => ManifoldVariant::RestrictedVars(restricted),
        VariantSpec::BlockStructure => ManifoldVariant::BlockStructure,
    };
    Ok(AnalysisConfig {
        name: file.name.clone().unwrap_or_else(|| {
            Path::new(path).file_stem().map_or_else(|| "analysis".into(), |s| s.to_string_lossy().into_owned())
        }),
        system,
        target,
        extra_inequalities,
        comparison,
        points: t.points.clone(),
        tasks: a.tasks.clone(),
        groups,
        search: a.search,
        engine: EngineOptions { tol: tol.zero, target_tol: tol.target, seed: file.seed },
        reach: ReachOptions { steps_per_leg: a.reach.steps_per_leg, tol: tol.reach, ..ReachOptions::default() },
        reach_starts: a.reach.starts.clone(),
        reach_distance: a.reach.distance,
        reach_count: a.reach.count,
        holder_radii,
        holder_directions: a.holder.directions,
        expansion: a.expansion.clone(),
        variant,
        source: file,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX6: &str = r#"{
  "system": {
    "variables": ["x", "y", "z"],
    "fields": [
      {"name": "fo", "components": "y,0,-z"},
      {"name": "f1", "components": "0,1,0"}
    ],
    "structure": {"affine": {"drift": "fo", "controls": ["f1"]}},
    "radius": 0.5
  },
  "target": {"kind": "manifold", "equations": ["x", "y"], "points": [[0, 0, 0]]},
  "analysis": {"tasks": ["certify"]}
}"#;

    #[test]
    fn parses_valid_config() {
        let c = parse_config(EX6, "ex6.json").unwrap();
        assert_eq!(c.n(), 3);
        assert_eq!(c.target.equations.len(), 2);
        assert_eq!(c.system.palette().len(), 3);
        assert_eq!(c.name, "ex6");
        assert_eq!(c.variant, ManifoldVariant::Auto);
    }

    #[test]
    fn missing_group_field_is_reported_with_line() {
        let text = EX6.replace(r#""tasks": ["certify"]"#, r#""tasks": ["certify"],
    "groups": [{"fields": ["fo+f1", "nope"], "order": 2}]"#);
        let e = parse_config(&text, "c.json").unwrap_err();
        assert!(e.to_string().contains("nope"), "{e}");
        assert_eq!(e.line(), Some(13));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = EX6.replace(r#""0,1,0""#, r#""0,1""#);
        let e = parse_config(&text, "c.json").unwrap_err();
        assert!(e.to_string().contains("2 components for 3 variables"), "{e}");
        assert_eq!(e.line(), Some(6));
    }

    #[test]
    fn empty_tasks_and_bad_syntax() {
        let e = parse_config(&EX6.replace(r#"["certify"]"#, "[]"), "c.json").unwrap_err();
        assert!(e.to_string().contains("empty"), "{e}");
        let e = parse_config(&EX6.replace("y,0,-z", "y,0,-*z"), "c.json").unwrap_err();
        assert!(matches!(e, ConfigError::Expr { source: ExprError::Syntax { .. }, .. }), "{e}");
        assert_eq!(e.line(), Some(5));
        let e = parse_config("{\n  \"system\": 3\n}", "c.json").unwrap_err();
        assert_eq!(e.line(), Some(2));
    }

    #[test]
    fn split_respects_parentheses() {
        assert_eq!(split_top_level("sin(x), max(1, 2) ,z"), vec!["sin(x)", "max(1, 2)", "z"]);
    }
}
