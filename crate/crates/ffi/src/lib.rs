//! C ABI over `escape_lab`.
//!
//! Every function returns an [`EscStatus`]. Results come back through out
//! pointers; objects are opaque handles released with the matching `*_free`.
//! The message for the most recent failure on the calling thread is available
//! from [`esc_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use escape_lab::ctmc::{simulate_stream, JumpTables, Status};
use escape_lab::experiments::{run_experiment, ExperimentConfig, ExperimentReport};
use escape_lab::families::{generate, FamilyKind, FamilySpec};
use escape_lab::graph::{default_adapted_weight, shortest_path_metric, AdaptedWeight, VertexId, WeightedGraph};
use escape_lab::io::load_graph;
use escape_lab::modify::{subdivide, SubdivisionPlan};
use escape_lab::rate::{volume_profile, RateFunction};
use escape_lab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    UnknownVertex = 5,
    TruncationTooSmall = 6,
    AssumptionViolated = 7,
    OutOfRange = 8,
    /// The output buffer does not match the required length.
    BufferTooSmall = 9,
    Failed = 10,
    Panic = 11,
}

/// Terminal state of a simulated run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EscRunStatus {
    HorizonReached = 0,
    Exploded = 1,
    BudgetExhausted = 2,
    LeftTruncation = 3,
}

/// A weighted graph with its adapted weight. Opaque.
pub struct EscGraph {
    graph: WeightedGraph,
    sigma: AdaptedWeight,
}

/// Result of an experiment run. Opaque.
pub struct EscReport {
    report: ExperimentReport,
    config: ExperimentConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> EscStatus {
    match e {
        Error::Io(_) => EscStatus::Io,
        Error::Json(_) | Error::Parse(_) => EscStatus::Parse,
        Error::UnknownVertex(_) => EscStatus::UnknownVertex,
        Error::TruncationTooSmall(_) => EscStatus::TruncationTooSmall,
        Error::AssumptionViolated(_) => EscStatus::AssumptionViolated,
        Error::OutOfRange { .. } | Error::BeyondRecordedTime { .. } => EscStatus::OutOfRange,
        Error::InvalidConfig(_) | Error::DomainError(_) | Error::PlanTooSmall { .. } | Error::PlanIncomplete(..) => {
            EscStatus::InvalidArgument
        }
        _ => EscStatus::Failed,
    }
}

/// Runs `f`, mapping errors and panics onto status codes.
fn guard(f: impl FnOnce() -> Result<(), (EscStatus, String)>) -> EscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EscStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside escape-lab".into());
            EscStatus::Panic
        }
    }
}

fn lib(e: Error) -> (EscStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EscStatus, String) {
    (EscStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EscStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (EscStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (EscStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), (EscStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn vertex(g: &WeightedGraph, index: u64) -> Result<usize, (EscStatus, String)> {
    g.index_of(VertexId::Original(index)).map_err(lib)
}

/// Copies the last error message on this thread into `buf` as a
/// NUL-terminated string and returns its length without the terminator.
/// Nothing is written if `buf` is null or `len` is 0.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn esc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Generates a truncated family graph. `family` is one of `birth-death`,
/// `anti-tree`, `tree` or `lattice`; `d` is used for lattices only.
///
/// # Safety
/// `family` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esc_graph_generate(
    family: *const c_char,
    alpha: f64,
    beta: f64,
    gamma: f64,
    d: u32,
    truncation: u32,
    out: *mut *mut EscGraph,
) -> EscStatus {
    guard(|| {
        let kind: FamilyKind = str_arg(family, "family")?.parse().map_err(lib)?;
        let mut spec = FamilySpec::new(kind, truncation);
        spec.alpha = alpha;
        spec.beta = beta;
        spec.gamma = gamma;
        spec.d = d.max(1);
        let fg = generate(&spec).map_err(lib)?;
        let g = Box::new(EscGraph {
            graph: fg.graph,
            sigma: fg.sigma,
        });
        put(out, Box::into_raw(g), "out")
    })
}

/// Loads a graph file. Subdivided files load as their modified graph; files
/// without σ get the default adapted weight.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esc_graph_load(path: *const c_char, out: *mut *mut EscGraph) -> EscStatus {
    guard(|| {
        let loaded = load_graph(Path::new(str_arg(path, "path")?)).map_err(lib)?;
        let g = match loaded.modified {
            Some(m) => EscGraph {
                graph: m.graph,
                sigma: m.sigma,
            },
            None => {
                let sigma = loaded.sigma.unwrap_or_else(|| default_adapted_weight(&loaded.graph));
                EscGraph {
                    graph: loaded.graph,
                    sigma,
                }
            }
        };
        put(out, Box::into_raw(Box::new(g)), "out")
    })
}

/// Subdivides every edge into `n >= 2` pieces.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esc_graph_subdivide_uniform(g: *const EscGraph, n: u32, out: *mut *mut EscGraph) -> EscStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        let plan = SubdivisionPlan::uniform(&g.graph, n).map_err(lib)?;
        let m = subdivide(&g.graph, &g.sigma, &plan).map_err(lib)?;
        let h = Box::new(EscGraph {
            graph: m.graph,
            sigma: m.sigma,
        });
        put(out, Box::into_raw(h), "out")
    })
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn esc_graph_free(g: *mut EscGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esc_graph_vertex_count(g: *const EscGraph, out: *mut usize) -> EscStatus {
    guard(|| put(out, handle(g, "graph")?.graph.len(), "out"))
}

/// Writes `d_σ(source, x)` for every vertex `x` in the graph's index order
/// into `out[0..len]`. `len` must equal the vertex count; unreachable
/// vertices get `+inf`.
///
/// # Safety
/// `g` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn esc_metric(g: *const EscGraph, source: u64, out: *mut f64, len: usize) -> EscStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != g.graph.len() {
            return Err((
                EscStatus::BufferTooSmall,
                format!("buffer holds {len} values, graph has {}", g.graph.len()),
            ));
        }
        let d = shortest_path_metric(&g.graph, &g.sigma, VertexId::Original(source), f64::INFINITY).map_err(lib)?;
        let out = std::slice::from_raw_parts_mut(out, len);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = d.distance(&g.graph, g.graph.id(i)).unwrap_or(f64::INFINITY);
        }
        Ok(())
    })
}

/// Evaluates `ψ(r)` (`inverse == 0`) or `ψ⁻¹(r)` (`inverse != 0`) for the
/// measured volume profile around `center` with constant `c`, lower limit
/// `r_hat` and table end `r_max`.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esc_psi(
    g: *const EscGraph,
    center: u64,
    c: f64,
    r_hat: f64,
    r_max: f64,
    r: f64,
    inverse: i32,
    out: *mut f64,
) -> EscStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        let profile = volume_profile(&g.graph, &g.sigma, VertexId::Original(center), &[]).map_err(lib)?;
        let rate = RateFunction::new(Arc::new(profile), c, r_hat, r_max).map_err(lib)?;
        let v = if inverse != 0 { rate.inverse(r) } else { rate.psi(r) }.map_err(lib)?;
        put(out, v, "out")
    })
}

/// Simulates one run from original vertex `start` on stream `stream` of
/// `seed`.
///
/// # Safety
/// `g` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn esc_simulate(
    g: *const EscGraph,
    start: u64,
    horizon: f64,
    budget: u64,
    seed: u64,
    stream: u64,
    end_time: *mut f64,
    jumps: *mut u64,
    status: *mut EscRunStatus,
) -> EscStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        vertex(&g.graph, start)?;
        let tables = JumpTables::new(&g.graph);
        let t = simulate_stream(&tables, VertexId::Original(start), horizon, budget, seed, stream).map_err(lib)?;
        let s = match t.status {
            Status::HorizonReached => EscRunStatus::HorizonReached,
            Status::Exploded => EscRunStatus::Exploded,
            Status::BudgetExhausted => EscRunStatus::BudgetExhausted,
            Status::LeftTruncation => EscRunStatus::LeftTruncation,
        };
        put(end_time, t.end_time, "end_time")?;
        put(jumps, t.jump_count() as u64, "jumps")?;
        put(status, s, "status")
    })
}

/// Runs an experiment described by a JSON config (the CLI `--config`
/// format).
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esc_experiment_run(config_json: *const c_char, out: *mut *mut EscReport) -> EscStatus {
    guard(|| {
        let config = ExperimentConfig::from_json(str_arg(config_json, "config_json")?).map_err(lib)?;
        let report = run_experiment(&config).map_err(lib)?;
        put(out, Box::into_raw(Box::new(EscReport { report, config })), "out")
    })
}

/// Looks up a named metric. Unknown names give `InvalidArgument`; a metric
/// without a standard error reports `NaN` there.
///
/// # Safety
/// `r` must be a live handle, `name` a NUL-terminated string; `std_error`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn esc_report_metric(
    r: *const EscReport,
    name: *const c_char,
    value: *mut f64,
    std_error: *mut f64,
) -> EscStatus {
    guard(|| {
        let r = handle(r, "report")?;
        let name = str_arg(name, "name")?;
        let m = r
            .report
            .metrics
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| (EscStatus::InvalidArgument, format!("no metric named {name}")))?;
        put(value, m.value, "value")?;
        if !std_error.is_null() {
            std_error.write(m.std_error.unwrap_or(f64::NAN));
        }
        Ok(())
    })
}

/// `1` if the experiment's criterion passed, `0` if it failed, `-1` if the
/// experiment has no criterion.
///
/// # Safety
/// `r` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esc_report_passed(r: *const EscReport, out: *mut i32) -> EscStatus {
    guard(|| {
        let v = match handle(r, "report")?.report.passed {
            Some(true) => 1,
            Some(false) => 0,
            None => -1,
        };
        put(out, v, "out")
    })
}

/// Writes the report files into `dir`, creating it if needed.
///
/// # Safety
/// `r` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn esc_report_write(r: *const EscReport, dir: *const c_char) -> EscStatus {
    guard(|| {
        let r = handle(r, "report")?;
        r.report
            .write(Path::new(str_arg(dir, "dir")?), &r.config)
            .map(|_| ())
            .map_err(lib)
    })
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn esc_report_free(r: *mut EscReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
