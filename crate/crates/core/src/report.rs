//! Runs the configured tasks point by point and renders the results.
//!
//! Output is a pure function of the configuration: no timings, no
//! unseeded randomness, and points are assembled in input order.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, Task};
use crate::engine::{
    certify, certify_fat_comparison, certify_fat_multi, search_groups, EngineError, GroupSpec, SearchResult,
    StlaCertificate, TargetDef, TargetKind,
};
use crate::expr::Expr;
use crate::identities::{lift_inputs, run_suite, IdentityCheck};
use crate::lab::{
    expansion_residual_order, holder_fit, integrate_switched, reach_target, write_holder_csv, write_residual_csv,
    write_trajectory_csv, ExpansionFit, HolderFit, LabError, MinTimeEstimate, SimOptions, SimResult, SwitchSchedule,
};
use crate::sampling::unit_directions;

/// Exit status when every requested certification succeeded.
pub const EXIT_OK: i32 = 0;
/// Exit status for hard errors.
pub const EXIT_ERROR: i32 = 1;
/// Exit status when a certificate was refused for lack of qualifying groups.
pub const EXIT_NOT_CERTIFIED: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub task: Task,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachEntry {
    pub start: Vec<f64>,
    pub estimate: Option<MinTimeEstimate>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub index: usize,
    pub x_o: Vec<f64>,
    pub certificate: Option<StlaCertificate>,
    pub search: Option<SearchResult>,
    pub reach: Vec<ReachEntry>,
    pub holder: Option<HolderFit>,
    pub expansion: Option<ExpansionFit>,
    pub identities: Vec<IdentityCheck>,
    pub errors: Vec<ErrorEntry>,
    /// Recorded paths of successful reach runs, written as CSV only.
    #[serde(skip)]
    pub trajectories: Vec<SimResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub version: String,
    pub variables: Vec<String>,
    pub target: TargetKind,
    pub tasks: Vec<Task>,
    pub seed: u64,
    pub tolerance: f64,
    pub points: Vec<PointReport>,
    pub exit_code: i32,
}

pub fn engine_error_kind(e: &EngineError) -> &'static str {
    match e {
        EngineError::Expr(_) => "Expr",
        EngineError::Jet(_) => "Jet",
        EngineError::Span(_) => "Span",
        EngineError::Petrov(_) => "Petrov",
        EngineError::UnknownField(_) => "UnknownField",
        EngineError::DimensionMismatch(_) => "DimensionMismatch",
        EngineError::InvalidGroup(_) => "InvalidGroup",
        EngineError::OrderClaimFailed { .. } => "OrderClaimFailed",
        EngineError::GradientVanishes => "GradientVanishes",
        EngineError::NoGroupQualifies(_) => "NoGroupQualifies",
        EngineError::NotPositiveBasis(_) => "NotPositiveBasis",
        EngineError::RankDeficientJacobian(_) => "RankDeficientJacobian",
        EngineError::SideConditionFailed(_) => "SideConditionFailed",
        EngineError::NotInTarget(_) => "NotInTarget",
    }
}

pub fn lab_error_kind(e: &LabError) -> &'static str {
    match e {
        LabError::Engine(e) => engine_error_kind(e),
        LabError::Expr(_) => "Expr",
        LabError::Petrov(_) => "Petrov",
        LabError::ExitedLocality { .. } => "ExitedLocality",
        LabError::StepUnderflow(_) => "StepUnderflow",
        LabError::DegenerateFit(_) => "DegenerateFit",
        LabError::NotInBasin { .. } => "NotInBasin",
        LabError::InsufficientSamples(_) => "InsufficientSamples",
        LabError::InvalidSchedule(_) => "InvalidSchedule",
    }
}

fn entry(task: Task, kind: &str, message: impl Into<String>) -> ErrorEntry {
    ErrorEntry { task, kind: kind.to_string(), message: message.into() }
}

impl Report {
    /// `2` when a certification was refused and nothing worse happened,
    /// `1` on any other error, `0` otherwise.
    pub fn compute_exit_code(points: &[PointReport]) -> i32 {
        let mut code = EXIT_OK;
        for e in points.iter().flat_map(|p| &p.errors) {
            if e.kind == "NoGroupQualifies" || e.kind == "NotPositiveBasis" {
                code = code.max(EXIT_NOT_CERTIFIED);
            } else {
                return EXIT_ERROR;
            }
        }
        code
    }

    pub fn certified(&self) -> usize {
        self.points.iter().filter(|p| p.certificate.is_some()).count()
    }
}

/// Scalar function used by the expansion and identity tasks.
fn scalar_function(cfg: &AnalysisConfig, x_o: &[f64]) -> Expr {
    match cfg.target.kind {
        TargetKind::Fat => cfg.target.inequality.clone().expect("validated fat target"),
        TargetKind::Point => Expr::sub(Expr::var(0), Expr::constant(x_o[0])),
        TargetKind::Manifold => cfg.target.equations[0].clone(),
    }
}

fn certify_with(cfg: &AnalysisConfig, x_o: &[f64], groups: &[GroupSpec]) -> Result<StlaCertificate, EngineError> {
    let u = cfg.target.inequality.as_ref();
    if let Some(c) = &cfg.comparison {
        let u = u.expect("validated fat target");
        return certify_fat_comparison(&cfg.system, u, &c.phi, x_o, groups, c.spot_check, &cfg.engine);
    }
    if !cfg.extra_inequalities.is_empty() {
        let mut us = vec![u.expect("validated fat target").clone()];
        us.extend(cfg.extra_inequalities.iter().cloned());
        return certify_fat_multi(&cfg.system, &us, x_o, groups, &cfg.engine);
    }
    certify(&cfg.system, &cfg.target, x_o, groups, &cfg.variant, &cfg.engine)
}

/// Target whose functions drive the group search.
fn search_target(cfg: &AnalysisConfig) -> TargetDef {
    match &cfg.comparison {
        Some(c) => TargetDef::fat(c.phi.clone()),
        None => cfg.target.clone(),
    }
}

/// Certifies with the smallest order bound for which the searched groups succeed.
fn search_certify(cfg: &AnalysisConfig, x_o: &[f64], found: &SearchResult) -> Result<StlaCertificate, EngineError> {
    let mut last = EngineError::NoGroupQualifies("search found no candidate groups".into());
    for k in 1..=cfg.search.k_max {
        let groups: Vec<GroupSpec> =
            found.groups.iter().filter(|g| g.group.order <= k).map(|g| g.group.clone()).collect();
        if groups.is_empty() {
            continue;
        }
        match certify_with(cfg, x_o, &groups) {
            Ok(c) => return Ok(c),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn reach_starts(cfg: &AnalysisConfig, x_o: &[f64]) -> Vec<Vec<f64>> {
    match &cfg.reach_starts {
        Some(s) => s.clone(),
        None => unit_directions(cfg.n(), cfg.reach_count)
            .into_iter()
            .map(|d| x_o.iter().zip(&d).map(|(c, v)| c + cfg.reach_distance * v).collect())
            .collect(),
    }
}

/// Replays the control of a reach estimate with intermediate samples.
fn replay(cfg: &AnalysisConfig, cert: &StlaCertificate, est: &MinTimeEstimate) -> Result<SimResult, LabError> {
    let sched = match cfg.target.kind {
        TargetKind::Fat => {
            let g = &cert.groups[0].group;
            SwitchSchedule::balanced(&g.fields, est.t_est / g.fields.len() as f64)?
        }
        _ => SwitchSchedule::from_groups(&cert.group_specs(), &est.tau)?,
    };
    let steps = cfg.reach.steps_per_leg;
    let opts = SimOptions { steps_per_leg: steps, record_every: (steps / 20).max(1), ..SimOptions::default() };
    integrate_switched(&cfg.system, &sched, &est.start, &opts)
}

fn analyse_point(cfg: &AnalysisConfig, index: usize, x_o: &[f64]) -> PointReport {
    let mut p = PointReport {
        index,
        x_o: x_o.to_vec(),
        certificate: None,
        search: None,
        reach: Vec::new(),
        holder: None,
        expansion: None,
        identities: Vec::new(),
        errors: Vec::new(),
        trajectories: Vec::new(),
    };
    let mut searched = false;
    let mut certified = false;
    for &task in &cfg.tasks {
        match task {
            Task::Search => ensure_search(cfg, &mut p, &mut searched),
            Task::Certify => ensure_cert(cfg, &mut p, &mut searched, &mut certified),
            Task::Reach | Task::Holder => {
                ensure_cert(cfg, &mut p, &mut searched, &mut certified);
                run_lab_task(cfg, task, &mut p);
            }
            Task::Expansion => {
                let e = cfg.expansion.as_ref().expect("validated expansion block");
                let u = scalar_function(cfg, x_o);
                match expansion_residual_order(&cfg.system, &e.fields, &u, x_o, e.order) {
                    Ok(fit) => p.expansion = Some(fit),
                    Err(err) => p.errors.push(entry(task, lab_error_kind(&err), err.to_string())),
                }
            }
            Task::Identities => {
                let fields: Vec<Vec<Expr>> = cfg.system.fields.iter().map(|f| f.components.clone()).collect();
                let u = scalar_function(cfg, x_o);
                match lift_inputs(&fields, &u, x_o).and_then(|(fs, ug)| run_suite(&fs, &ug)) {
                    Ok(checks) => p.identities = checks,
                    Err(err) => p.errors.push(entry(task, "Jet", err.to_string())),
                }
            }
        }
    }
    p
}

fn ensure_search(cfg: &AnalysisConfig, p: &mut PointReport, done: &mut bool) {
    if std::mem::replace(done, true) {
        return;
    }
    match search_groups(&cfg.system, &search_target(cfg), &p.x_o, &cfg.search, &cfg.engine) {
        Ok(s) => p.search = Some(s),
        Err(e) => p.errors.push(entry(Task::Search, engine_error_kind(&e), e.to_string())),
    }
}

/// Certifies once per point, from explicit groups or from the search result.
fn ensure_cert(cfg: &AnalysisConfig, p: &mut PointReport, searched: &mut bool, done: &mut bool) {
    if std::mem::replace(done, true) {
        return;
    }
    let res = match &cfg.groups {
        Some(gs) => certify_with(cfg, &p.x_o, gs),
        None => {
            ensure_search(cfg, p, searched);
            match &p.search {
                Some(found) => search_certify(cfg, &p.x_o, found),
                None => return,
            }
        }
    };
    match res {
        Ok(c) => p.certificate = Some(c),
        Err(e) => p.errors.push(entry(Task::Certify, engine_error_kind(&e), e.to_string())),
    }
}

fn run_lab_task(cfg: &AnalysisConfig, task: Task, p: &mut PointReport) {
    // A refused certificate is already recorded; dependent tasks are skipped.
    let Some(cert) = p.certificate.clone() else { return };
    match task {
        Task::Reach => {
            for start in reach_starts(cfg, &p.x_o) {
                match reach_target(&cfg.system, &cfg.target, &start, &cert, &cfg.reach) {
                    Ok(est) => {
                        if est.reached {
                            match replay(cfg, &cert, &est) {
                                Ok(sim) => p.trajectories.push(sim),
                                Err(e) => p.errors.push(entry(task, lab_error_kind(&e), e.to_string())),
                            }
                        }
                        p.reach.push(ReachEntry { start, estimate: Some(est), error: None });
                    }
                    Err(e) => p.reach.push(ReachEntry { start, estimate: None, error: Some(e.to_string()) }),
                }
            }
        }
        Task::Holder => {
            match holder_fit(&cfg.system, &cfg.target, &cert, &cfg.holder_radii, cfg.holder_directions, &cfg.reach) {
                Ok(fit) => p.holder = Some(fit),
                Err(e) => p.errors.push(entry(task, lab_error_kind(&e), e.to_string())),
            }
        }
        _ => {}
    }
}

/// Executes the configured tasks at every base point.
pub fn run(cfg: &AnalysisConfig) -> Report {
    let points: Vec<PointReport> =
        cfg.points.par_iter().enumerate().map(|(i, x)| analyse_point(cfg, i, x)).collect();
    let exit_code = Report::compute_exit_code(&points);
    Report {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        variables: cfg.system.variables.clone(),
        target: cfg.target.kind,
        tasks: cfg.tasks.clone(),
        seed: cfg.engine.seed,
        tolerance: cfg.engine.tol,
        points,
        exit_code,
    }
}

fn vec_str(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| fmt_num(*x)).collect();
    format!("({})", items.join(", "))
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&x.abs()) {
        let s = format!("{x:.6}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{x:.6e}")
    }
}

/// Human-readable summary.
pub fn render_text(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "analysis: {}", report.name);
    let _ = writeln!(s, "version: {}", report.version);
    let _ = writeln!(s, "variables: {}", report.variables.join(", "));
    let _ = writeln!(s, "target: {:?}", report.target);
    let tasks: Vec<String> = report.tasks.iter().map(|t| format!("{t:?}").to_lowercase()).collect();
    let _ = writeln!(s, "tasks: {}", tasks.join(", "));
    let _ = writeln!(s, "seed: {}  tolerance: {:e}", report.seed, report.tolerance);
    for p in &report.points {
        let _ = writeln!(s, "\npoint {}: x_o = {}", p.index, vec_str(&p.x_o));
        if let Some(sr) = &p.search {
            let _ = writeln!(
                s,
                "  search: {} groups from {} candidates{}",
                sr.groups.len(),
                sr.evaluated,
                if sr.exhausted { " (budget exhausted)" } else { "" }
            );
            for g in &sr.groups {
                let _ = writeln!(s, "    {} column {}", g.group.label(), vec_str(&g.column));
            }
        }
        if let Some(c) = &p.certificate {
            let _ = writeln!(s, "  certificate: {:?}, order {}, exponent {}", c.theorem, c.k_bar, fmt_num(c.exponent));
            if c.boundary {
                let _ = writeln!(s, "    boundary point");
            }
            for g in &c.groups {
                let _ = writeln!(s, "    {} column {}", g.group.label(), vec_str(&g.column));
            }
            if let Some(span) = &c.span {
                let _ = writeln!(s, "    positive span: rank {}, margin {}", span.rank, fmt_num(span.margin));
            }
            if let Some(e) = c.diagnostics.eccentricity {
                let _ = writeln!(s, "    eccentricity {}", fmt_num(e));
            }
            if let Some(b) = &c.diagnostics.bounds {
                let _ = writeln!(
                    s,
                    "    bounds: R {}, L {}, M {}, sigma {}",
                    fmt_num(b.radius),
                    fmt_num(b.lipschitz),
                    fmt_num(b.sup_norm),
                    fmt_num(b.sigma)
                );
            }
            for sc in &c.side_conditions {
                let mark = if sc.verified { "ok" } else { "unverified" };
                let _ = writeln!(s, "    side condition: {} [{mark}; {}]", sc.name, sc.method);
            }
            if !c.rejected.is_empty() {
                let _ = writeln!(s, "    rejected groups: {}", c.rejected.len());
            }
        }
        for r in &p.reach {
            match (&r.estimate, &r.error) {
                (Some(e), _) => {
                    let _ = writeln!(
                        s,
                        "  reach from {}: {} T <= {} residual {}",
                        vec_str(&r.start),
                        if e.reached { "reached," } else { "not reached," },
                        fmt_num(e.t_est),
                        fmt_num(e.residual)
                    );
                }
                (None, Some(err)) => {
                    let _ = writeln!(s, "  reach from {}: error: {err}", vec_str(&r.start));
                }
                (None, None) => {}
            }
        }
        if let Some(h) = &p.holder {
            let _ = writeln!(
                s,
                "  holder: exponent {} (theory {}), constant {}, {} samples, {} unreached",
                fmt_num(h.exponent),
                fmt_num(h.theory),
                fmt_num(h.constant),
                h.samples.len(),
                h.failures
            );
        }
        if let Some(e) = &p.expansion {
            let _ = writeln!(
                s,
                "  expansion: order {}, residual slope {} from {} of {} times",
                e.order,
                fmt_num(e.slope),
                e.used,
                e.table.len()
            );
        }
        if !p.identities.is_empty() {
            let passed = p.identities.iter().filter(|c| c.passed).count();
            let _ = writeln!(s, "  identities: {passed} of {} hold", p.identities.len());
            for c in p.identities.iter().filter(|c| !c.passed) {
                let _ = writeln!(s, "    fails: {} (relative error {})", c.name, fmt_num(c.error));
            }
        }
        for e in &p.errors {
            let _ = writeln!(s, "  error [{:?}] {}: {}", e.task, e.kind, e.message);
        }
    }
    let _ = writeln!(s, "\ncertified points: {} of {}", report.certified(), report.points.len());
    let _ = writeln!(s, "exit code: {}", report.exit_code);
    s
}

/// Writes `report.txt`, `result.json` and CSV artifacts into `out_dir`.
pub fn write_report(report: &Report, out_dir: impl AsRef<Path>) -> std::io::Result<Vec<String>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    std::fs::write(dir.join("report.txt"), render_text(report))?;
    written.push("report.txt".to_string());
    let json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("result.json"), json + "\n")?;
    written.push("result.json".to_string());
    for p in &report.points {
        if let Some(h) = &p.holder {
            let name = format!("holder_p{}.csv", p.index);
            write_holder_csv(BufWriter::new(File::create(dir.join(&name))?), h)?;
            written.push(name);
        }
        if let Some(e) = &p.expansion {
            let name = format!("residual_p{}.csv", p.index);
            write_residual_csv(BufWriter::new(File::create(dir.join(&name))?), e)?;
            written.push(name);
        }
        for (j, sim) in p.trajectories.iter().enumerate() {
            let name = format!("trajectory_p{}_s{j}.csv", p.index);
            write_trajectory_csv(BufWriter::new(File::create(dir.join(&name))?), sim)?;
            written.push(name);
        }
    }
    Ok(written)
}
