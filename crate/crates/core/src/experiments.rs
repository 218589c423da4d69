//! Monte Carlo experiments: escape rates, trace law, occupation ratio and
//! explosion frequency, with CSV / manifest output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ctmc::{par_map, run_chain, run_intervals, stream_rng, JumpTables, Status};
use crate::error::{Error, Result};
use crate::families::{classify_family, generate, AsymptoticClass, Conservative, FamilySpec, RateForm};
use crate::graph::{shortest_path_metric, AdaptedWeight, VertexId, WeightedGraph};
use crate::io::load_graph;
use crate::modify::{design_subdivision, subdivide, ModifiedGraph, SubdivisionPlan};
use crate::rate::{volume_profile, RateFunction, DEFAULT_R_HAT};
use crate::schrodinger::SchrodingerConstants;

/// Share of censored trajectories above which an experiment refuses to report.
pub const MAX_CENSORED: f64 = 0.10;
/// Explosion frequency recorded by the birth–death β=2 pilot at budget 10⁶.
pub const PILOT_EXPLOSION_THRESHOLD: f64 = 0.5;
/// Exceedance level defining `c*`.
pub const EXCEEDANCE_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Escape,
    Trace,
    Occupation,
    Explosion,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Escape => "escape",
            ExperimentKind::Trace => "trace",
            ExperimentKind::Occupation => "occupation",
            ExperimentKind::Explosion => "explosion",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "escape" => Ok(ExperimentKind::Escape),
            "trace" => Ok(ExperimentKind::Trace),
            "occupation" => Ok(ExperimentKind::Occupation),
            "explosion" => Ok(ExperimentKind::Explosion),
            other => Err(Error::Parse(format!(
                "unknown experiment {other:?} (expected escape, trace, occupation or explosion)"
            ))),
        }
    }
}

/// Subdivision applied to the input graph before simulating. Serialized as
/// `none`, `uniform:N` or `design:R`, the same form the CLI accepts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum Subdivision {
    #[default]
    None,
    Uniform {
        n: u32,
    },
    Design {
        r_max: f64,
    },
}

impl FromStr for Subdivision {
    type Err = Error;

    /// `none`, `uniform:N` or `design:R`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad subdivision {s:?} (expected none, uniform:N or design:R)"));
        match s.split_once(':') {
            None if s == "none" => Ok(Subdivision::None),
            Some(("uniform", n)) => Ok(Subdivision::Uniform {
                n: n.parse().map_err(|_| bad())?,
            }),
            Some(("design", r)) => Ok(Subdivision::Design {
                r_max: r.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for Subdivision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Subdivision::None => write!(f, "none"),
            Subdivision::Uniform { n } => write!(f, "uniform:{n}"),
            Subdivision::Design { r_max } => write!(f, "design:{r_max}"),
        }
    }
}

impl TryFrom<String> for Subdivision {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Subdivision> for String {
    fn from(s: Subdivision) -> String {
        s.to_string()
    }
}

/// Replaces `μ(vertex)` by `factor · μ(vertex)` on the simulated graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureCorruption {
    pub vertex: VertexId,
    pub factor: f64,
}

fn default_n() -> usize {
    1000
}
fn default_horizon() -> f64 {
    100.0
}
fn default_budget() -> u64 {
    1_000_000
}
fn default_seed() -> u64 {
    20240917
}
fn default_center() -> VertexId {
    VertexId::Original(0)
}
fn default_t_burn() -> f64 {
    10.0
}
fn default_r_hat() -> f64 {
    DEFAULT_R_HAT
}
fn default_true() -> bool {
    true
}
fn default_c_grid() -> Vec<f64> {
    (0..=40).map(|k| k as f64 * 0.25).collect()
}
fn default_checkpoints() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0, 4.0]
}
fn default_bootstrap() -> usize {
    100
}
fn default_epsilon() -> f64 {
    0.2
}
fn default_grid_points() -> usize {
    10
}

/// Everything an experiment run depends on. Serialized with defaults filled
/// in, this is also the input of the config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub graph: Option<PathBuf>,
    #[serde(default = "default_center")]
    pub center: VertexId,
    #[serde(default = "default_n")]
    pub n_trajectories: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_budget")]
    pub jump_budget: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub subdivision: Subdivision,
    #[serde(default)]
    pub corrupt_measure: Option<MeasureCorruption>,
    /// Burn-in for escape and start of the occupation window.
    #[serde(default = "default_t_burn")]
    pub t_burn: f64,
    /// Constants `c` at which exceedance fractions are reported.
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_r_hat")]
    pub r_hat: f64,
    /// Closed-form candidate; defaults to the family's tabulated rate.
    #[serde(default)]
    pub rate_form: Option<RateForm>,
    /// Whether to test `ψ⁻¹(ct)` built from the measured volume profile.
    #[serde(default = "default_true")]
    pub use_psi: bool,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<f64>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Number of times in the occupation window at which quantiles are reported.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            family: None,
            graph: None,
            center: default_center(),
            n_trajectories: default_n(),
            horizon: default_horizon(),
            jump_budget: default_budget(),
            seed: default_seed(),
            subdivision: Subdivision::None,
            corrupt_measure: None,
            t_burn: default_t_burn(),
            c_grid: default_c_grid(),
            r_hat: default_r_hat(),
            rate_form: None,
            use_psi: true,
            checkpoints: default_checkpoints(),
            bootstrap: default_bootstrap(),
            epsilon: default_epsilon(),
            grid_points: default_grid_points(),
            output: None,
        }
    }

    pub fn with_family(mut self, spec: FamilySpec) -> Self {
        self.family = Some(spec);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_trajectories < 1 {
            return bad("n_trajectories must be at least 1".into());
        }
        if !(self.horizon > 0.0) {
            return bad(format!("horizon = {} must be positive", self.horizon));
        }
        if self.jump_budget < 1 {
            return bad("jump_budget must be at least 1".into());
        }
        match (&self.family, &self.graph) {
            (None, None) => return bad("either family or graph must be given".into()),
            (Some(_), Some(_)) => return bad("family and graph are mutually exclusive".into()),
            _ => {}
        }
        if self.kind == ExperimentKind::Escape {
            if !(self.t_burn > 1.0) {
                return bad(format!(
                    "t_burn = {} must exceed 1 (log t must be positive)",
                    self.t_burn
                ));
            }
            if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(*c >= 0.0)) {
                return bad("c_grid must be a non-empty list of non-negative constants".into());
            }
        }
        if self.kind == ExperimentKind::Trace
            && (self.checkpoints.is_empty() || self.checkpoints.iter().any(|t| !(*t > 0.0)))
        {
            return bad("checkpoints must be a non-empty list of positive times".into());
        }
        if self.kind == ExperimentKind::Occupation {
            if !(self.t_burn > 0.0 && self.t_burn < self.horizon) {
                return bad(format!(
                    "occupation window [{}, {}] is empty",
                    self.t_burn, self.horizon
                ));
            }
            if self.grid_points < 2 {
                return bad("grid_points must be at least 2".into());
            }
        }
        if let Some(c) = self.corrupt_measure {
            if !(c.factor > 0.0) {
                return bad(format!("corruption factor {} must be positive", c.factor));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

/// A named aggregate with its standard error when one applies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Two-column plot data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub x: String,
    pub y: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub metrics: Vec<Metric>,
    /// Non-numeric facts such as the family classification.
    pub labels: BTreeMap<String, String>,
    /// One row per trajectory.
    pub trajectories: Table,
    pub series: Vec<Series>,
    /// `None` when the experiment has no pass/fail criterion.
    pub passed: Option<bool>,
    pub config_hash: String,
    pub version: String,
}

impl ExperimentReport {
    fn new(kind: ExperimentKind, config: &ExperimentConfig) -> Self {
        ExperimentReport {
            kind,
            metrics: Vec::new(),
            labels: BTreeMap::new(),
            trajectories: Table::default(),
            series: Vec::new(),
            passed: None,
            config_hash: config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn push(&mut self, name: impl Into<String>, value: f64, std_error: Option<f64>) {
        self.metrics.push(Metric {
            name: name.into(),
            value,
            std_error,
        });
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// `metric,value,std_error` rows.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("metric,value,std_error\n");
        for m in &self.metrics {
            let se = m.std_error.map(|e| e.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{}", m.name, m.value, se);
        }
        s
    }

    pub fn series_csv(series: &Series) -> String {
        let mut s = format!("{},{}\n", series.x, series.y);
        for (x, y) in &series.points {
            let _ = writeln!(s, "{x},{y}");
        }
        s
    }

    /// Writes `report.csv`, `trajectories.csv`, `series_<name>.csv` and
    /// `manifest.json` into `dir`. Only the manifest carries a timestamp.
    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let mut put = |name: String, text: String| -> Result<()> {
            let p = dir.join(&name);
            std::fs::write(&p, text)?;
            files.push(p);
            Ok(())
        };
        put("report.csv".into(), self.summary_csv())?;
        put("trajectories.csv".into(), self.trajectories.to_csv())?;
        for s in &self.series {
            put(format!("series_{}.csv", s.name), Self::series_csv(s))?;
        }
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let names: Vec<String> = files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let manifest = serde_json::json!({
            "kind": self.kind,
            "version": self.version,
            "config_hash": self.config_hash,
            "config": config,
            "passed": self.passed,
            "labels": self.labels,
            "files": names,
            "provenance": { "unix_time": timestamp },
        });
        let p = dir.join("manifest.json");
        std::fs::write(&p, serde_json::to_string_pretty(&manifest)? + "\n")?;
        files.push(p);
        Ok(files)
    }
}

/// Graphs an experiment runs on.
struct Setup {
    original: WeightedGraph,
    original_sigma: AdaptedWeight,
    modified: Option<ModifiedGraph>,
    class: Option<AsymptoticClass>,
    center: VertexId,
}

impl Setup {
    fn build(config: &ExperimentConfig) -> Result<Setup> {
        config.validate()?;
        let (original, original_sigma, mut modified, class) = match (&config.family, &config.graph) {
            (Some(spec), _) => {
                let fg = generate(spec)?;
                (fg.graph, fg.sigma, None, classify_family(spec).ok())
            }
            (None, Some(path)) => {
                let loaded = load_graph(path)?;
                match loaded.modified {
                    Some(m) => (m.original.clone(), m.original_sigma.clone(), Some(m), None),
                    None => {
                        let sigma = loaded
                            .sigma
                            .unwrap_or_else(|| crate::graph::default_adapted_weight(&loaded.graph));
                        (loaded.graph, sigma, None, None)
                    }
                }
            }
            (None, None) => unreachable!("validated"),
        };
        let plan = match config.subdivision {
            Subdivision::None => None,
            Subdivision::Uniform { n } => Some(SubdivisionPlan::uniform(&original, n)?),
            Subdivision::Design { r_max } => {
                Some(design_subdivision(&original, &original_sigma, config.center, r_max)?)
            }
        };
        if let Some(plan) = plan {
            if modified.is_some() {
                return Err(Error::InvalidConfig(
                    "the graph file is already subdivided; drop the subdivision option".into(),
                ));
            }
            modified = Some(subdivide(&original, &original_sigma, &plan)?);
        }
        original.index_of(config.center)?;
        let mut setup = Setup {
            original,
            original_sigma,
            modified,
            class,
            center: config.center,
        };
        if let Some(c) = config.corrupt_measure {
            let g = match &mut setup.modified {
                Some(m) => &mut m.graph,
                None => &mut setup.original,
            };
            let i = g.index_of(c.vertex)?;
            *g = g.with_measure(i, g.measure(i) * c.factor)?;
        }
        Ok(setup)
    }

    /// Graph and σ of the simulated chain.
    fn chain(&self) -> (&WeightedGraph, &AdaptedWeight) {
        match &self.modified {
            Some(m) => (&m.graph, &m.sigma),
            None => (&self.original, &self.original_sigma),
        }
    }

    /// Membership of `V_o` by index of the simulated graph.
    fn original_mask(&self) -> Vec<bool> {
        match &self.modified {
            Some(m) => m.original_mask(),
            None => vec![true; self.original.len()],
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.kind {
        ExperimentKind::Escape => run_escape_experiment(config),
        ExperimentKind::Trace => run_trace_experiment(config),
        ExperimentKind::Occupation => run_occupation_experiment(config),
        ExperimentKind::Explosion => run_explosion_experiment(config),
    }
}

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if config.kind != kind {
        return Err(Error::InvalidConfig(format!(
            "config is for a {} experiment, not {}",
            config.kind.as_str(),
            kind.as_str()
        )));
    }
    Ok(())
}

fn check_censoring(censored: usize, n: usize, what: &str) -> Result<()> {
    if censored as f64 > MAX_CENSORED * n as f64 {
        return Err(Error::TruncationTooSmall(format!(
            "{censored} of {n} {what} trajectories were censored"
        )));
    }
    Ok(())
}

/// Mean and standard error of the mean.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Fraction with its binomial standard error.
fn fraction(k: usize, n: usize) -> (f64, f64) {
    let p = k as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

fn label_class(report: &mut ExperimentReport, class: Option<&AsymptoticClass>) {
    if let Some(c) = class {
        let verdict = match c.conservative {
            Conservative::Yes => "yes",
            Conservative::No => "no",
            Conservative::OutsideTheorem => "outside-theorem",
        };
        report.labels.insert("conservative".into(), verdict.into());
        if let Some(f) = c.rate_form {
            report.labels.insert("rate_form".into(), f.label());
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct EscapeOutcome {
    status: Status,
    jumps: u64,
    end_time: f64,
    max_distance: f64,
    c_closed: f64,
    c_psi: f64,
    censored: bool,
}

/// Simulates trajectories from `x̄` and, for each candidate `R(t)`, finds the
/// smallest constant `c` with `d_σ(X_t, x̄) <= R(t)` on `[T_burn, end]`.
///
/// Candidates are the closed form `φ(c, t)` and `ψ₁⁻¹(c t)` with `ψ₁` the
/// `c = 1` integral of the measured profile. Both are nondecreasing in `c`,
/// so the exceedance fraction at `c` is the share of trajectories whose
/// required constant is larger than `c`.
pub fn run_escape_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, ExperimentKind::Escape)?;
    let setup = Setup::build(config)?;
    let mut report = ExperimentReport::new(ExperimentKind::Escape, config);
    label_class(&mut report, setup.class.as_ref());
    let (g, sigma) = setup.chain();
    let metric = shortest_path_metric(g, sigma, setup.center, f64::INFINITY)?;
    let dist = metric.distances();
    let form = config
        .rate_form
        .or_else(|| setup.class.as_ref().and_then(|c| c.rate_form));
    let psi_at: Option<Vec<f64>> = if config.use_psi {
        let profile = volume_profile(g, sigma, setup.center, &[])?;
        let cert = profile.certified_radius;
        let r_max = if cert.is_finite() {
            cert - 1e-6
        } else {
            dist.iter().cloned().fold(0.0, f64::max)
        };
        if r_max <= config.r_hat {
            report.labels.insert(
                "psi".into(),
                format!("unavailable: certified radius {cert} does not exceed R_hat"),
            );
            None
        } else {
            let rate = RateFunction::new(Arc::new(profile), 1.0, config.r_hat, r_max)?;
            report.push("psi_r_max", r_max, None);
            Some(
                dist.iter()
                    .map(|&d| {
                        if d <= r_max {
                            rate.psi(d).unwrap_or(f64::NAN)
                        } else {
                            f64::NAN
                        }
                    })
                    .collect(),
            )
        }
    } else {
        None
    };
    if form.is_none() && psi_at.is_none() {
        return Err(Error::InvalidConfig(
            "no candidate rate function: give rate_form or enable use_psi on a large enough truncation".into(),
        ));
    }
    if let Some(f) = form {
        report.labels.insert("closed_form".into(), f.label());
    }
    let tables = JumpTables::new(g);
    let start = g.index_of(setup.center)?;
    let tb = config.t_burn;
    let outcomes = par_map(config.n_trajectories, |i| {
        let mut rng = stream_rng(config.seed, i as u64);
        let mut o = EscapeOutcome {
            status: Status::HorizonReached,
            jumps: 0,
            end_time: 0.0,
            max_distance: 0.0,
            c_closed: 0.0,
            c_psi: 0.0,
            censored: false,
        };
        let s = run_intervals(
            &tables,
            start,
            config.horizon,
            config.jump_budget,
            &mut rng,
            |s, e, x| {
                let d = dist[x];
                o.max_distance = o.max_distance.max(d);
                if e >= tb {
                    let t = s.max(tb);
                    if let Some(f) = form {
                        o.c_closed = o.c_closed.max(f.required_constant(d, t));
                    }
                    if let Some(p) = &psi_at {
                        if p[x].is_nan() {
                            o.censored = true;
                        } else {
                            o.c_psi = o.c_psi.max(p[x] / t);
                        }
                    }
                }
                ControlFlow::Continue(())
            },
        );
        o.status = s.status;
        o.jumps = s.jumps;
        o.end_time = s.end_time;
        o.censored |= s.status == Status::LeftTruncation;
        o
    });
    let n = outcomes.len();
    let censored = outcomes.iter().filter(|o| o.censored).count();
    check_censoring(censored, n, "escape")?;
    let kept: Vec<&EscapeOutcome> = outcomes.iter().filter(|o| !o.censored).collect();
    report.push("n_trajectories", n as f64, None);
    report.push("censored", censored as f64, None);
    report.push("used", kept.len() as f64, None);
    let mut candidates: Vec<(&str, Vec<f64>)> = Vec::new();
    if form.is_some() {
        candidates.push(("closed", kept.iter().map(|o| o.c_closed).collect()));
    }
    if psi_at.is_some() {
        candidates.push(("psi", kept.iter().map(|o| o.c_psi).collect()));
    }
    let mut c_grid = config.c_grid.clone();
    c_grid.sort_by(f64::total_cmp);
    let mut all_pass = true;
    for (name, mut req) in candidates {
        req.sort_by(f64::total_cmp);
        let m = req.len();
        let mut points = Vec::with_capacity(c_grid.len());
        let mut c_star = f64::NAN;
        for &c in &c_grid {
            let above = m - req.partition_point(|&r| r <= c);
            let (p, _) = fraction(above, m.max(1));
            if c_star.is_nan() && p <= EXCEEDANCE_LEVEL {
                c_star = c;
            }
            points.push((c, p));
        }
        all_pass &= !c_star.is_nan();
        report.push(format!("{name}_c_star"), c_star, None);
        if m > 0 {
            report.push(format!("{name}_c_required_q99"), quantile(&req, 0.99), None);
            report.push(format!("{name}_c_required_max"), req[m - 1], None);
        }
        report.series.push(Series {
            name: format!("exceedance_{name}"),
            x: "c".into(),
            y: "exceedance".into(),
            points,
        });
    }
    report.passed = Some(all_pass);
    let mut table = Table::new(&[
        "trajectory",
        "status",
        "jumps",
        "end_time",
        "max_distance",
        "c_required_closed",
        "c_required_psi",
        "censored",
    ]);
    for (i, o) in outcomes.iter().enumerate() {
        let opt = |on: bool, v: f64| if on { v.to_string() } else { String::new() };
        table.rows.push(vec![
            i.to_string(),
            o.status.as_str().into(),
            o.jumps.to_string(),
            o.end_time.to_string(),
            o.max_distance.to_string(),
            opt(form.is_some(), o.c_closed),
            opt(psi_at.is_some(), o.c_psi),
            o.censored.to_string(),
        ]);
    }
    report.trajectories = table;
    Ok(report)
}

/// Positions of the chain time-changed onto `subset` at the given clock
/// times (increasing), as graph indices; `None` if the run ended first.
fn trace_positions<R: Rng>(
    tables: &JumpTables<'_>,
    start: usize,
    subset: &[bool],
    checkpoints: &[f64],
    budget: u64,
    rng: &mut R,
) -> (Option<Vec<usize>>, Status) {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut clock = 0.0;
    let s = run_intervals(tables, start, f64::INFINITY, budget, rng, |s, e, x| {
        if subset[x] {
            let next = clock + (e - s);
            while out.len() < checkpoints.len() && checkpoints[out.len()] < next {
                out.push(x);
            }
            clock = next;
        }
        if out.len() == checkpoints.len() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    let done = out.len() == checkpoints.len();
    (done.then_some(out), s.status)
}

/// Total variation between two samples of dense state labels.
fn tv_distance(a: &[u32], b: &[u32], states: usize) -> f64 {
    let mut ca = vec![0u64; states];
    let mut cb = vec![0u64; states];
    a.iter().for_each(|&x| ca[x as usize] += 1);
    b.iter().for_each(|&x| cb[x as usize] += 1);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    0.5 * ca
        .iter()
        .zip(&cb)
        .map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs())
        .sum::<f64>()
}

/// `½ Σ_x 3 √(p̄_x (1 - p̄_x) (1/n_a + 1/n_b))` with `p̄` the pooled frequency:
/// the sum of per-state 3σ bounds on `|p̂_x - q̂_x|` under equal laws.
fn tv_noise_bound(a: &[u32], b: &[u32], states: usize) -> (f64, usize) {
    let mut c = vec![0u64; states];
    a.iter().chain(b).for_each(|&x| c[x as usize] += 1);
    let n = (a.len() + b.len()) as f64;
    let scale = 1.0 / a.len() as f64 + 1.0 / b.len() as f64;
    let support = c.iter().filter(|&&k| k > 0).count();
    let bound = 0.5
        * c.iter()
            .map(|&k| {
                let p = k as f64 / n;
                3.0 * (p * (1.0 - p) * scale).sqrt()
            })
            .sum::<f64>();
    (bound, support)
}

/// Compares the original chain at times `t_j` with the modified chain
/// time-changed onto `V_o`. Without a subdivision both samples come from the
/// original chain (identity control).
pub fn run_trace_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, ExperimentKind::Trace)?;
    let setup = Setup::build(config)?;
    let mut report = ExperimentReport::new(ExperimentKind::Trace, config);
    label_class(&mut report, setup.class.as_ref());
    let mut checkpoints = config.checkpoints.clone();
    checkpoints.sort_by(f64::total_cmp);
    checkpoints.dedup();
    let n = config.n_trajectories;
    let k = checkpoints.len();

    let orig = &setup.original;
    let orig_tables = JumpTables::new(orig);
    let orig_start = orig.index_of(setup.center)?;
    let all = vec![true; orig.len()];
    let (g, _) = setup.chain();
    let chain_tables = JumpTables::new(g);
    let chain_start = g.index_of(setup.center)?;
    let mask = setup.original_mask();
    // Dense label of each simulated-graph vertex in V_o: its original index.
    let to_orig: Vec<u32> = g
        .ids()
        .iter()
        .map(|&v| orig.index_of(v).map_or(u32::MAX, |i| i as u32))
        .collect();

    let a_runs = par_map(n, |i| {
        let mut rng = stream_rng(config.seed, i as u64);
        trace_positions(
            &orig_tables,
            orig_start,
            &all,
            &checkpoints,
            config.jump_budget,
            &mut rng,
        )
    });
    let b_runs = par_map(n, |i| {
        let mut rng = stream_rng(config.seed, (n + i) as u64);
        trace_positions(
            &chain_tables,
            chain_start,
            &mask,
            &checkpoints,
            config.jump_budget,
            &mut rng,
        )
    });
    let censored_a = a_runs.iter().filter(|r| r.0.is_none()).count();
    let censored_b = b_runs.iter().filter(|r| r.0.is_none()).count();
    check_censoring(censored_a, n, "original-chain")?;
    check_censoring(censored_b, n, "time-changed")?;
    let collect = |runs: &[(Option<Vec<usize>>, Status)], map: &dyn Fn(usize) -> u32| -> Vec<Vec<u32>> {
        (0..k)
            .map(|j| runs.iter().filter_map(|r| r.0.as_ref().map(|p| map(p[j]))).collect())
            .collect()
    };
    let a = collect(&a_runs, &|i| i as u32);
    let b = collect(&b_runs, &|i| to_orig[i]);
    let states = orig.len();

    report.push("n_trajectories", n as f64, None);
    report.push("censored_original", censored_a as f64, None);
    report.push("censored_time_changed", censored_b as f64, None);
    let mut tv_points = Vec::new();
    let mut bound_points = Vec::new();
    let mut passed = true;
    for (j, &t) in checkpoints.iter().enumerate() {
        let tv = tv_distance(&a[j], &b[j], states);
        let (bound, support) = tv_noise_bound(&a[j], &b[j], states);
        let boots = par_map(config.bootstrap, |r| {
            let mut rng = stream_rng(config.seed ^ 0xB007_5EED, (j * config.bootstrap + r) as u64);
            let ra: Vec<u32> = (0..a[j].len()).map(|_| a[j][rng.random_range(0..a[j].len())]).collect();
            let rb: Vec<u32> = (0..b[j].len()).map(|_| b[j][rng.random_range(0..b[j].len())]).collect();
            tv_distance(&ra, &rb, states)
        });
        let mut sorted = boots.clone();
        sorted.sort_by(f64::total_cmp);
        let (se, lo, hi) = if sorted.is_empty() {
            (None, f64::NAN, f64::NAN)
        } else {
            (
                Some(mean_se(&boots).1 * (boots.len() as f64).sqrt()),
                quantile(&sorted, 0.025),
                quantile(&sorted, 0.975),
            )
        };
        report.push(format!("tv@{t}"), tv, se);
        report.push(format!("tv_bound@{t}"), bound, None);
        report.push(format!("tv_ci_low@{t}"), lo, None);
        report.push(format!("tv_ci_high@{t}"), hi, None);
        report.push(format!("support@{t}"), support as f64, None);
        passed &= tv <= bound;
        tv_points.push((t, tv));
        bound_points.push((t, bound));
    }
    report.passed = Some(passed);
    report.series.push(Series {
        name: "tv".into(),
        x: "t".into(),
        y: "tv".into(),
        points: tv_points,
    });
    report.series.push(Series {
        name: "tv_bound".into(),
        x: "t".into(),
        y: "bound".into(),
        points: bound_points,
    });
    let mut cols = vec!["chain".to_string(), "trajectory".into(), "status".into()];
    cols.extend(checkpoints.iter().map(|t| format!("x@{t}")));
    let mut table = Table {
        columns: cols,
        rows: Vec::with_capacity(2 * n),
    };
    for (chain, runs, graph) in [("original", &a_runs, orig), ("time-changed", &b_runs, g)] {
        for (i, (pos, status)) in runs.iter().enumerate() {
            let mut row = vec![chain.to_string(), i.to_string(), status.as_str().to_string()];
            match pos {
                Some(p) => row.extend(p.iter().map(|&x| graph.id(x).to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), k)),
            }
            table.rows.push(row);
        }
    }
    report.trajectories = table;
    Ok(report)
}

struct OccupationOutcome {
    status: Status,
    min_ratio: f64,
    max_ratio: f64,
    /// `A_t / t` at the grid times.
    grid: Vec<f64>,
    censored: bool,
}

/// Occupation ratio `A_t / t` of `V_o` on `[T_burn, horizon]`.
///
/// `A` is piecewise linear, so `A_t / t` is monotone between jumps and its
/// minimum over the window is attained at a jump time or at an end point.
pub fn run_occupation_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, ExperimentKind::Occupation)?;
    let setup = Setup::build(config)?;
    let mut report = ExperimentReport::new(ExperimentKind::Occupation, config);
    label_class(&mut report, setup.class.as_ref());
    let (g, _) = setup.chain();
    let mask = setup.original_mask();
    let tables = JumpTables::new(g);
    let start = g.index_of(setup.center)?;
    let (t0, t1) = (config.t_burn, config.horizon);
    let m = config.grid_points;
    let grid: Vec<f64> = (0..m)
        .map(|j| {
            if j + 1 == m {
                t1
            } else {
                t0 + (t1 - t0) * j as f64 / (m - 1) as f64
            }
        })
        .collect();
    let outcomes = par_map(config.n_trajectories, |i| {
        let mut rng = stream_rng(config.seed, i as u64);
        let mut a = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut values = vec![f64::NAN; m];
        let mut next = 0;
        let s = run_intervals(&tables, start, t1, config.jump_budget, &mut rng, |s, e, x| {
            let slope = if mask[x] { 1.0 } else { 0.0 };
            let at = |t: f64| a + slope * (t - s);
            for t in [s.max(t0), e.min(t1)] {
                if t >= t0 && t <= t1 && t >= s && t <= e {
                    let r = at(t) / t;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
            while next < m && grid[next] <= e {
                values[next] = at(grid[next]) / grid[next];
                next += 1;
            }
            a += slope * (e - s);
            ControlFlow::Continue(())
        });
        OccupationOutcome {
            status: s.status,
            min_ratio: lo,
            max_ratio: hi,
            grid: values,
            censored: s.end_time < t1,
        }
    });
    let n = outcomes.len();
    let censored = outcomes.iter().filter(|o| o.censored).count();
    check_censoring(censored, n, "occupation")?;
    let kept: Vec<&OccupationOutcome> = outcomes.iter().filter(|o| !o.censored).collect();
    let mut mins: Vec<f64> = kept.iter().map(|o| o.min_ratio).collect();
    mins.sort_by(f64::total_cmp);
    let floor = SchrodingerConstants::new().occupation_floor();
    report.push("n_trajectories", n as f64, None);
    report.push("censored", censored as f64, None);
    report.push("reference_floor", floor, None);
    report.push("epsilon", config.epsilon, None);
    if !mins.is_empty() {
        let (mean, se) = mean_se(&mins);
        report.push("min_ratio_mean", mean, Some(se));
        report.push("min_ratio_population", mins[0], None);
        report.push("min_ratio_q01", quantile(&mins, 0.01), None);
        report.push("min_ratio_q05", quantile(&mins, 0.05), None);
        report.push("min_ratio_median", quantile(&mins, 0.5), None);
        let max = kept.iter().map(|o| o.max_ratio).fold(f64::NEG_INFINITY, f64::max);
        report.push("max_ratio", max, None);
        // Empirical ceiling of τ_t / t, the inverse of the smallest ratio.
        report.push("tau_ratio_ceiling", 1.0 / mins[0], None);
        report.passed = Some(quantile(&mins, 0.01) > config.epsilon);
        for (q, name) in [(0.01, "q01"), (0.5, "median")] {
            let points = grid
                .iter()
                .enumerate()
                .map(|(j, &t)| {
                    let mut v: Vec<f64> = kept.iter().map(|o| o.grid[j]).collect();
                    v.sort_by(f64::total_cmp);
                    (t, quantile(&v, q))
                })
                .collect();
            report.series.push(Series {
                name: format!("ratio_{name}"),
                x: "t".into(),
                y: format!("ratio_{name}"),
                points,
            });
        }
    } else {
        report.passed = Some(false);
    }
    let mut table = Table::new(&["trajectory", "status", "min_ratio", "max_ratio", "censored"]);
    for (i, o) in outcomes.iter().enumerate() {
        table.rows.push(vec![
            i.to_string(),
            o.status.as_str().into(),
            o.min_ratio.to_string(),
            o.max_ratio.to_string(),
            o.censored.to_string(),
        ]);
    }
    report.trajectories = table;
    Ok(report)
}

/// Explosion frequency per the stall detector, next to the tabulated verdict.
pub fn run_explosion_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, ExperimentKind::Explosion)?;
    let setup = Setup::build(config)?;
    let mut report = ExperimentReport::new(ExperimentKind::Explosion, config);
    label_class(&mut report, setup.class.as_ref());
    let (g, _) = setup.chain();
    let tables = JumpTables::new(g);
    let start = g.index_of(setup.center)?;
    let runs = par_map(config.n_trajectories, |i| {
        let mut rng = stream_rng(config.seed, i as u64);
        run_chain(&tables, start, config.horizon, config.jump_budget, &mut rng, |_, _| {
            ControlFlow::Continue(())
        })
    });
    let n = runs.len();
    let count = |s: Status| runs.iter().filter(|r| r.status == s).count();
    let exploded = count(Status::Exploded);
    let (p, se) = fraction(exploded, n);
    report.push("n_trajectories", n as f64, None);
    report.push("explosion_frequency", p, Some(se));
    let (mj, mj_se) = mean_se(&runs.iter().map(|r| r.jumps as f64).collect::<Vec<_>>());
    report.push("mean_jumps", mj, Some(mj_se));
    let (mt, mt_se) = mean_se(&runs.iter().map(|r| r.end_time).collect::<Vec<_>>());
    report.push("mean_end_time", mt, Some(mt_se));
    for s in [
        Status::HorizonReached,
        Status::Exploded,
        Status::BudgetExhausted,
        Status::LeftTruncation,
    ] {
        report.push(format!("count_{}", s.as_str()), count(s) as f64, None);
    }
    report.push("pilot_threshold", PILOT_EXPLOSION_THRESHOLD, None);
    report.passed = setup.class.as_ref().and_then(|c| match c.conservative {
        Conservative::Yes => Some(exploded == 0),
        Conservative::No => Some(exploded > 0),
        Conservative::OutsideTheorem => None,
    });
    let mut table = Table::new(&["trajectory", "status", "jumps", "end_time"]);
    for (i, r) in runs.iter().enumerate() {
        table.rows.push(vec![
            i.to_string(),
            r.status.as_str().into(),
            r.jumps.to_string(),
            r.end_time.to_string(),
        ]);
    }
    report.trajectories = table;
    Ok(report)
}
