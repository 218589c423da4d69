//! Edge subdivision of a weighted graph and the distance-dependent choice of
//! subdivision counts.
//!
//! Subdividing the edge `x -- y` with count `n` inserts `n-1` new vertices
//! `x_1, …, x_{n-1}` (numbered from the smaller endpoint) joined in a path
//! `x, x_1, …, x_{n-1}, y` with
//!
//! * `w = n · w_o(x,y)` on every sub-edge,
//! * `μ(x_k) = 2 w_o(x,y) σ_o(x,y)² / n`,
//! * `σ = σ_o(x,y) / n` on every sub-edge,
//!
//! while `μ` on the original vertices is unchanged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    ball_and_volume, build_truncated_graph, shortest_path_metric, shortest_path_metric_from, verify_adapted,
    AdaptedWeight, BallVolumes, VertexId, WeightedGraph,
};

/// Subdivision count per undirected original edge, keyed by `(lo, hi)` with
/// `lo < hi`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubdivisionPlan {
    counts: BTreeMap<(u64, u64), u32>,
}

fn key(u: u64, v: u64) -> (u64, u64) {
    (u.min(v), u.max(v))
}

impl SubdivisionPlan {
    pub fn new() -> Self {
        Self::default()
    }

    /// The same count on every edge of `g`.
    pub fn uniform(g: &WeightedGraph, n: u32) -> Result<Self> {
        let mut plan = Self::new();
        for (x, y, _) in g.edges() {
            plan.set(original(g.id(x))?, original(g.id(y))?, n);
        }
        Ok(plan)
    }

    pub fn set(&mut self, u: u64, v: u64, n: u32) {
        self.counts.insert(key(u, v), n);
    }

    pub fn get(&self, u: u64, v: u64) -> Option<u32> {
        self.counts.get(&key(u, v)).copied()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u64, u64), u32)> + '_ {
        self.counts.iter().map(|(&k, &n)| (k, n))
    }

    pub fn min_count(&self) -> Option<u32> {
        self.counts.values().copied().min()
    }
}

fn original(v: VertexId) -> Result<u64> {
    v.original_index().ok_or(Error::NestedSubdivision(v))
}

/// Subdivided graph together with the graph it came from.
#[derive(Debug, Clone)]
pub struct ModifiedGraph {
    pub graph: WeightedGraph,
    pub sigma: AdaptedWeight,
    pub original: WeightedGraph,
    pub original_sigma: AdaptedWeight,
    pub plan: SubdivisionPlan,
}

/// Per-edge record linking a subdivided edge to its original data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeProvenance {
    pub lo: u64,
    pub hi: u64,
    pub n: u32,
    pub w_o: f64,
    pub sigma_o: f64,
}

impl ModifiedGraph {
    /// Whether vertex index `i` of the modified graph is an original vertex.
    pub fn is_original(&self, i: usize) -> bool {
        self.graph.id(i).is_original()
    }

    /// Membership mask of the original vertices, by modified-graph index.
    pub fn original_mask(&self) -> Vec<bool> {
        self.graph.ids().iter().map(|v| v.is_original()).collect()
    }

    /// Original edge data and count for each subdivided edge.
    pub fn provenance(&self) -> Vec<EdgeProvenance> {
        let g = &self.original;
        g.edges()
            .map(|(x, y, a)| {
                let (lo, hi) = key(g.id(x).original_index().unwrap(), g.id(y).original_index().unwrap());
                EdgeProvenance {
                    lo,
                    hi,
                    n: self.plan.get(lo, hi).unwrap(),
                    w_o: g.arc_weight(a),
                    sigma_o: self.original_sigma.arc(a),
                }
            })
            .collect()
    }

    /// Original data `(n, w_o, σ_o)` of the edge carrying subdivision vertex `v`.
    pub fn edge_of(&self, v: VertexId) -> Option<(u32, f64, f64)> {
        let VertexId::Subdivision { lo, hi, .. } = v else {
            return None;
        };
        let g = &self.original;
        let (x, y) = (g.index_of(lo.into()).ok()?, g.index_of(hi.into()).ok()?);
        let a = g.arc_between(x, y)?;
        Some((self.plan.get(lo, hi)?, g.arc_weight(a), self.original_sigma.arc(a)))
    }
}

/// Builds the subdivided graph. `σ_o` must be adapted on `g_o` and the plan
/// must cover every edge with counts `>= 2`.
///
/// A truncation-boundary vertex keeps external conductance scaled by the
/// largest count among its materialized edges.
pub fn subdivide(g_o: &WeightedGraph, sigma_o: &AdaptedWeight, plan: &SubdivisionPlan) -> Result<ModifiedGraph> {
    for &v in g_o.ids() {
        original(v)?;
    }
    if let Err(v) = verify_adapted(g_o, sigma_o) {
        return Err(Error::AssumptionViolated(format!("σ_o is not adapted: {v}")));
    }
    let mut mu: BTreeMap<VertexId, f64> = g_o
        .ids()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, g_o.measure(i)))
        .collect();
    let mut max_n = vec![0u32; g_o.len()];
    let mut edges = Vec::new();
    let mut sigma_edges = Vec::new();
    for (x, y, a) in g_o.edges() {
        let (u, v) = (g_o.id(x), g_o.id(y));
        let (lo, hi) = key(original(u)?, original(v)?);
        let n = plan.get(lo, hi).ok_or(Error::PlanIncomplete(u, v))?;
        if n < 2 {
            return Err(Error::PlanTooSmall { u, v, n });
        }
        max_n[x] = max_n[x].max(n);
        max_n[y] = max_n[y].max(n);
        let w_o = g_o.arc_weight(a);
        let s_o = sigma_o.arc(a);
        let w = n as f64 * w_o;
        let s = s_o / n as f64;
        let m = 2.0 * w_o * s_o * s_o / n as f64;
        let point = |k: u32| {
            if k == 0 {
                VertexId::Original(lo)
            } else if k == n {
                VertexId::Original(hi)
            } else {
                VertexId::Subdivision { lo, hi, k }
            }
        };
        for k in 1..n {
            mu.insert(point(k), m);
        }
        for k in 0..n {
            edges.push((point(k), point(k + 1), w));
            sigma_edges.push((point(k), point(k + 1), s));
        }
    }
    let external: BTreeMap<VertexId, f64> = (0..g_o.len())
        .filter(|&i| g_o.is_boundary(i))
        .map(|i| (g_o.id(i), g_o.external(i) * max_n[i].max(1) as f64))
        .collect();
    let graph = build_truncated_graph(&edges, &mu, &external)?;
    let sigma = AdaptedWeight::from_edges(&graph, &sigma_edges)?;
    Ok(ModifiedGraph {
        graph,
        sigma,
        original: g_o.clone(),
        original_sigma: sigma_o.clone(),
        plan: plan.clone(),
    })
}

/// `R_n = 2^{n+4}`.
pub fn schedule_radius(n: u32) -> f64 {
    2f64.powi(n as i32 + 4)
}

/// Largest `n` with `2^{n+2} - 1 <= d`, if any.
pub fn threshold_level(d: f64) -> Option<u32> {
    if !(d >= 3.0) {
        return None;
    }
    let mut n = 0u32;
    while 2f64.powi(n as i32 + 3) - 1.0 <= d {
        n += 1;
    }
    Some(n)
}

/// `f(r) = log μ_o(B(x̄, r)) - log C_o` over a truncation.
#[derive(Debug, Clone)]
pub struct GrowthFunction {
    volumes: BallVolumes,
    log_c: f64,
}

impl GrowthFunction {
    pub fn new(g_o: &WeightedGraph, sigma_o: &AdaptedWeight, center: VertexId) -> Result<Self> {
        let metric = shortest_path_metric(g_o, sigma_o, center, f64::INFINITY)?;
        let c_o = g_o.measures().iter().copied().fold(f64::INFINITY, f64::min);
        Ok(GrowthFunction {
            volumes: BallVolumes::new(g_o, &metric),
            log_c: c_o.ln(),
        })
    }

    pub fn f(&self, r: f64) -> f64 {
        self.volumes.volume(r).ln() - self.log_c
    }

    /// `f(R_n) + 2 + log log R_n`, the lower bound on counts at level `n`.
    pub fn level_bound(&self, n: u32) -> f64 {
        let r = schedule_radius(n);
        self.f(r) + 2.0 + r.ln().ln()
    }

    /// `σ_n = 1 / (f(R_n) + 2 + log log R_n)`.
    pub fn sigma_level(&self, n: u32) -> f64 {
        1.0 / self.level_bound(n)
    }

    pub fn certified_radius(&self) -> f64 {
        self.volumes.certified_radius()
    }
}

/// Smallest admissible count for an edge whose farther endpoint lies at
/// distance `d`, given the growth function `f`.
pub fn required_count(d: f64, f: impl Fn(f64) -> f64) -> u32 {
    match threshold_level(d) {
        None => 2,
        Some(n) => {
            let r = schedule_radius(n);
            ((f(r) + 2.0 + r.ln().ln()).ceil() as u32).max(2)
        }
    }
}

/// Minimal counts meeting the level bounds: an edge whose farther endpoint
/// lies at distance `D >= 3` from `x̄` gets `max(2, ⌈f(R_n) + 2 + log log R_n⌉)`
/// with `n` the largest level such that `2^{n+2} - 1 <= D`; closer edges get 2.
///
/// Volumes `f(r)` are measured on the truncation; they are exact for
/// `r <= r_max`, which must lie inside the certified radius around `x̄`.
pub fn design_subdivision(
    g_o: &WeightedGraph,
    sigma_o: &AdaptedWeight,
    center: VertexId,
    r_max: f64,
) -> Result<SubdivisionPlan> {
    let growth = GrowthFunction::new(g_o, sigma_o, center)?;
    if !(r_max + crate::graph::BALL_TOL < growth.certified_radius()) {
        return Err(Error::TruncationTooSmall(format!(
            "r_max = {r_max} is not below the certified radius {} around {center}",
            growth.certified_radius()
        )));
    }
    let metric = shortest_path_metric(g_o, sigma_o, center, f64::INFINITY)?;
    let mut plan = SubdivisionPlan::new();
    for (x, y, _) in g_o.edges() {
        let d = metric.at(x).max(metric.at(y));
        let n = required_count(d, |r| growth.f(r));
        plan.set(original(g_o.id(x))?, original(g_o.id(y))?, n);
    }
    Ok(plan)
}

/// Edges whose count falls short of `f(R_n) + 2 + log log R_n` for some level
/// `n` whose distance threshold they meet, as `(lo, hi, n, bound)`.
pub fn subdivision_bound_violations(
    g_o: &WeightedGraph,
    sigma_o: &AdaptedWeight,
    center: VertexId,
    plan: &SubdivisionPlan,
) -> Result<Vec<(u64, u64, u32, f64)>> {
    let growth = GrowthFunction::new(g_o, sigma_o, center)?;
    let metric = shortest_path_metric(g_o, sigma_o, center, f64::INFINITY)?;
    let mut out = Vec::new();
    for (x, y, _) in g_o.edges() {
        let (u, v) = (original(g_o.id(x))?, original(g_o.id(y))?);
        let count = plan.get(u, v).ok_or(Error::PlanIncomplete(g_o.id(x), g_o.id(y)))?;
        let d = metric.at(x).max(metric.at(y));
        if let Some(top) = threshold_level(d) {
            for n in 0..=top {
                let bound = growth.level_bound(n);
                if (count as f64) < bound {
                    out.push((u.min(v), u.max(v), n, bound));
                }
            }
        }
    }
    Ok(out)
}

/// `(sub-edge endpoints, n, σ, σ_n)`.
pub type ShrinkingViolation = (VertexId, VertexId, u32, f64, f64);

/// Sub-edges with an endpoint at distance `>= 2^{n+2}` from `x̄` whose length
/// exceeds `σ_n`.
pub fn shrinking_violations(m: &ModifiedGraph, center: VertexId) -> Result<Vec<ShrinkingViolation>> {
    let growth = GrowthFunction::new(&m.original, &m.original_sigma, center)?;
    let metric = shortest_path_metric(&m.graph, &m.sigma, center, f64::INFINITY)?;
    let g = &m.graph;
    let mut out = Vec::new();
    for (x, y, a) in g.edges() {
        let d = metric.at(x).max(metric.at(y));
        let s = m.sigma.arc(a);
        let mut n = 0u32;
        while 2f64.powi(n as i32 + 2) <= d {
            let s_n = growth.sigma_level(n);
            if s > s_n + 1e-15 {
                out.push((g.id(x), g.id(y), n, s, s_n));
            }
            n += 1;
        }
    }
    Ok(out)
}

/// Outcome of [`verify_modification_geometry`].
#[derive(Debug, Clone, Default)]
pub struct GeometryReport {
    pub pairs_checked: usize,
    pub max_distance_error: f64,
    /// `(r, μ_o(B_o(r)), μ(B(r)))` per radius.
    pub volumes: Vec<(f64, f64, f64)>,
    pub violations: Vec<String>,
}

impl GeometryReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sources used for the distance comparison: all original vertices when
/// there are at most this many, otherwise `x̄` plus an even spread.
const MAX_SOURCES: usize = 64;

/// Compares distances between original vertices in both graphs (tolerance
/// 1e-9) and checks `μ_o(B_o(r)) <= μ(B(r)) <= 3 μ_o(B_o(r))` for each radius.
pub fn verify_modification_geometry(m: &ModifiedGraph, center: VertexId, radii: &[f64]) -> Result<GeometryReport> {
    let (g, go) = (&m.graph, &m.original);
    let mut report = GeometryReport::default();
    let n_o = go.len();
    let mut sources: Vec<usize> = vec![go.index_of(center)?];
    if n_o <= MAX_SOURCES {
        sources = (0..n_o).collect();
    } else {
        let step = n_o / (MAX_SOURCES - 1);
        sources.extend((0..MAX_SOURCES - 1).map(|k| k * step));
    }
    let map: Vec<usize> = go.ids().iter().map(|&v| g.index_of(v)).collect::<Result<_>>()?;
    for &s in &sources {
        let d_o = shortest_path_metric_from(go, &m.original_sigma, s, f64::INFINITY);
        let d = shortest_path_metric_from(g, &m.sigma, map[s], f64::INFINITY);
        for (j, &mj) in map.iter().enumerate() {
            let err = (d_o.at(j) - d.at(mj)).abs();
            report.pairs_checked += 1;
            report.max_distance_error = report.max_distance_error.max(err);
            if !(err <= 1e-9) {
                report.violations.push(format!(
                    "d({}, {}) = {} in the modified graph, {} in the original",
                    go.id(s),
                    go.id(j),
                    d.at(mj),
                    d_o.at(j)
                ));
            }
        }
    }
    for &r in radii {
        let (_, v_o) = ball_and_volume(go, &m.original_sigma, center, r)?;
        let (_, v) = ball_and_volume(g, &m.sigma, center, r)?;
        let slack = 1e-12 * v_o;
        if v + slack < v_o || v > 3.0 * v_o + slack {
            report
                .violations
                .push(format!("r = {r}: μ(B) = {v} outside [{v_o}, {}]", 3.0 * v_o));
        }
        report.volumes.push((r, v_o, v));
    }
    Ok(report)
}
