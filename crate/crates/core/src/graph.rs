//! Weighted graphs, adapted edge weights and the adapted path metric.
//!
//! A [`WeightedGraph`] is the triple `(V, w, μ)` over a finite vertex set. When
//! it is a truncation of an infinite graph, every vertex whose neighbourhood was
//! cut keeps the conductance towards the missing neighbours in `external`, so
//! weighted degrees stay exact and metric computations know where the
//! truncation boundary lies.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute slack for closed-ball membership, `d <= r + BALL_TOL`.
pub const BALL_TOL: f64 = 1e-12;

/// Slack allowed in the adaptedness sum.
pub const ADAPTED_TOL: f64 = 1e-12;

/// Structural vertex identity.
///
/// Original vertices carry an integer label. A subdivision point sits on the
/// original edge `lo -- hi` (with `lo < hi`), `k` steps away from `lo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexId {
    Original(u64),
    Subdivision { lo: u64, hi: u64, k: u32 },
}

impl VertexId {
    pub fn is_original(&self) -> bool {
        matches!(self, VertexId::Original(_))
    }

    pub fn original_index(&self) -> Option<u64> {
        match self {
            VertexId::Original(i) => Some(*i),
            VertexId::Subdivision { .. } => None,
        }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Original(i) => write!(f, "{i}"),
            VertexId::Subdivision { lo, hi, k } => write!(f, "{lo}-{hi}/{k}"),
        }
    }
}

impl FromStr for VertexId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid vertex id {s:?}"));
        match s.split_once('-') {
            None => s.parse().map(VertexId::Original).map_err(|_| bad()),
            Some((lo, rest)) => {
                let (hi, k) = rest.split_once('/').ok_or_else(bad)?;
                let lo: u64 = lo.parse().map_err(|_| bad())?;
                let hi: u64 = hi.parse().map_err(|_| bad())?;
                let k: u32 = k.parse().map_err(|_| bad())?;
                if lo >= hi || k == 0 {
                    return Err(bad());
                }
                Ok(VertexId::Subdivision { lo, hi, k })
            }
        }
    }
}

impl Serialize for VertexId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<u64> for VertexId {
    fn from(i: u64) -> Self {
        VertexId::Original(i)
    }
}

/// A finite, simple, connected weighted graph `(V, w, μ)` in compressed
/// adjacency form. Arcs out of a vertex are sorted by target index.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    ids: Vec<VertexId>,
    index: HashMap<VertexId, usize>,
    mu: Vec<f64>,
    external: Vec<f64>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    reverse: Vec<usize>,
}

/// Validates and builds a weighted graph. Vertices are the keys of `mu`.
pub fn build_graph(edges: &[(VertexId, VertexId, f64)], mu: &BTreeMap<VertexId, f64>) -> Result<WeightedGraph> {
    build_truncated_graph(edges, mu, &BTreeMap::new())
}

/// Like [`build_graph`], additionally recording for boundary vertices the
/// total conductance towards neighbours that were not materialized.
pub fn build_truncated_graph(
    edges: &[(VertexId, VertexId, f64)],
    mu: &BTreeMap<VertexId, f64>,
    external: &BTreeMap<VertexId, f64>,
) -> Result<WeightedGraph> {
    let ids: Vec<VertexId> = mu.keys().copied().collect();
    let index: HashMap<VertexId, usize> = ids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut mus = Vec::with_capacity(ids.len());
    for (v, &m) in mu {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::NonPositiveMeasure(*v, m));
        }
        mus.push(m);
    }

    let mut ext = vec![0.0; ids.len()];
    for (v, &c) in external {
        let i = *index.get(v).ok_or(Error::UnknownVertex(*v))?;
        if c < 0.0 || !c.is_finite() {
            return Err(Error::NonPositiveWeight { u: *v, v: *v, w: c });
        }
        ext[i] = c;
    }

    let mut seen: HashMap<(usize, usize), f64> = HashMap::with_capacity(edges.len());
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ids.len()];
    for &(u, v, w) in edges {
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        let iu = *index.get(&u).ok_or(Error::UnknownVertex(u))?;
        let iv = *index.get(&v).ok_or(Error::UnknownVertex(v))?;
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight { u, v, w });
        }
        let key = (iu.min(iv), iu.max(iv));
        if let Some(&prev) = seen.get(&key) {
            return Err(if prev == w {
                Error::DuplicateEdge(u, v)
            } else {
                Error::NonSymmetricWeight(u, v)
            });
        }
        seen.insert(key, w);
        adj[iu].push((iv, w));
        adj[iv].push((iu, w));
    }

    let mut offsets = Vec::with_capacity(ids.len() + 1);
    let mut targets = Vec::with_capacity(2 * edges.len());
    let mut weights = Vec::with_capacity(2 * edges.len());
    offsets.push(0);
    for list in &mut adj {
        list.sort_by_key(|&(t, _)| t);
        for &(t, w) in list.iter() {
            targets.push(t);
            weights.push(w);
        }
        offsets.push(targets.len());
    }

    let mut reverse = vec![usize::MAX; targets.len()];
    for x in 0..ids.len() {
        for a in offsets[x]..offsets[x + 1] {
            let y = targets[a];
            let row = &targets[offsets[y]..offsets[y + 1]];
            let pos = row.binary_search(&x).expect("symmetric adjacency");
            reverse[a] = offsets[y] + pos;
        }
    }

    let g = WeightedGraph {
        ids,
        index,
        mu: mus,
        external: ext,
        offsets,
        targets,
        weights,
        reverse,
    };
    let reached = g.reachable_count();
    if reached != g.len() {
        return Err(Error::Disconnected {
            reached,
            total: g.len(),
        });
    }
    Ok(g)
}

impl WeightedGraph {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn ids(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> VertexId {
        self.ids[i]
    }

    pub fn index_of(&self, v: VertexId) -> Result<usize> {
        self.index.get(&v).copied().ok_or(Error::UnknownVertex(v))
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.index.contains_key(&v)
    }

    pub fn measure(&self, i: usize) -> f64 {
        self.mu[i]
    }

    pub fn measures(&self) -> &[f64] {
        &self.mu
    }

    /// Conductance from vertex `i` towards neighbours outside the truncation.
    pub fn external(&self, i: usize) -> f64 {
        self.external[i]
    }

    /// True when some neighbour of `i` was not materialized.
    pub fn is_boundary(&self, i: usize) -> bool {
        self.external[i] > 0.0
    }

    pub fn has_boundary(&self) -> bool {
        self.external.iter().any(|&c| c > 0.0)
    }

    /// Arc index range of the neighbours of `i`.
    pub fn arcs(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn arc_target(&self, a: usize) -> usize {
        self.targets[a]
    }

    pub fn arc_weight(&self, a: usize) -> f64 {
        self.weights[a]
    }

    /// Index of the arc running the other way.
    pub fn arc_reverse(&self, a: usize) -> usize {
        self.reverse[a]
    }

    pub fn arc_count(&self) -> usize {
        self.targets.len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.arcs(i).map(move |a| (self.targets[a], self.weights[a]))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Arc index of `x -> y`, if the edge exists.
    pub fn arc_between(&self, x: usize, y: usize) -> Option<usize> {
        let row = &self.targets[self.offsets[x]..self.offsets[x + 1]];
        row.binary_search(&y).ok().map(|p| self.offsets[x] + p)
    }

    pub fn weight(&self, x: VertexId, y: VertexId) -> Option<f64> {
        let (ix, iy) = (self.index.get(&x)?, self.index.get(&y)?);
        self.arc_between(*ix, *iy).map(|a| self.weights[a])
    }

    /// Sum of conductances at `i`, including those leaving the truncation.
    pub fn total_conductance(&self, i: usize) -> f64 {
        self.arcs(i).map(|a| self.weights[a]).sum::<f64>() + self.external[i]
    }

    /// Weighted degree `Deg(x) = (1/μ(x)) Σ_y w(x,y)` by index.
    pub fn weighted_degree_at(&self, i: usize) -> f64 {
        self.total_conductance(i) / self.mu[i]
    }

    /// Undirected edges as `(lower index, higher index, arc index)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.len()).flat_map(move |x| {
            self.arcs(x)
                .filter(move |&a| self.targets[a] > x)
                .map(move |a| (x, self.targets[a], a))
        })
    }

    fn reachable_count(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for a in self.arcs(x) {
                let y = self.targets[a];
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count
    }

    /// Returns a copy with the vertex measure replaced.
    pub fn with_measure(&self, i: usize, m: f64) -> Result<WeightedGraph> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::NonPositiveMeasure(self.ids[i], m));
        }
        let mut g = self.clone();
        g.mu[i] = m;
        Ok(g)
    }
}

/// `Deg(x) = (1/μ(x)) Σ_{y~x} w(x,y)`.
pub fn weighted_degree(g: &WeightedGraph, x: VertexId) -> Result<f64> {
    Ok(g.weighted_degree_at(g.index_of(x)?))
}

/// Edge lengths `σ`, stored per arc of a specific graph.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedWeight {
    values: Vec<f64>,
}

impl AdaptedWeight {
    /// Builds from one value per undirected edge given as `(u, v, σ)`.
    pub fn from_edges(g: &WeightedGraph, sigma: &[(VertexId, VertexId, f64)]) -> Result<Self> {
        let mut values = vec![f64::NAN; g.arc_count()];
        for &(u, v, s) in sigma {
            let (iu, iv) = (g.index_of(u)?, g.index_of(v)?);
            let a = g.arc_between(iu, iv).ok_or(Error::MissingEdgeWeight(u, v))?;
            values[a] = s;
            values[g.arc_reverse(a)] = s;
        }
        for (x, y, a) in g.edges() {
            if values[a].is_nan() {
                return Err(Error::MissingEdgeWeight(g.id(x), g.id(y)));
            }
        }
        Ok(AdaptedWeight { values })
    }

    /// Builds from a symmetric rule evaluated once per undirected edge.
    pub fn from_fn(g: &WeightedGraph, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut values = vec![0.0; g.arc_count()];
        for (x, y, a) in g.edges() {
            let s = f(x, y, g.arc_weight(a));
            values[a] = s;
            values[g.arc_reverse(a)] = s;
        }
        AdaptedWeight { values }
    }

    /// Wraps raw per-arc values without any checks.
    pub fn from_arc_values(values: Vec<f64>) -> Self {
        AdaptedWeight { values }
    }

    pub fn arc(&self, a: usize) -> f64 {
        self.values[a]
    }

    pub fn arc_values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, g: &WeightedGraph, x: VertexId, y: VertexId) -> Option<f64> {
        let (ix, iy) = (g.index_of(x).ok()?, g.index_of(y).ok()?);
        g.arc_between(ix, iy).map(|a| self.values[a])
    }

    /// Largest `σ` on any edge.
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// `σ(x,y) = min(Deg(x)^{-1/2}, Deg(y)^{-1/2}, 1)`.
pub fn default_adapted_weight(g: &WeightedGraph) -> AdaptedWeight {
    let inv_sqrt: Vec<f64> = (0..g.len()).map(|i| 1.0 / g.weighted_degree_at(i).sqrt()).collect();
    AdaptedWeight::from_fn(g, |x, y, _| inv_sqrt[x].min(inv_sqrt[y]).min(1.0))
}

/// First failure found by [`verify_adapted`].
#[derive(Debug, Clone, PartialEq)]
pub enum AdaptedViolation {
    MissingEdgeWeight {
        expected_arcs: usize,
        found: usize,
    },
    Asymmetric {
        x: VertexId,
        y: VertexId,
        forward: f64,
        backward: f64,
    },
    OutOfRange {
        x: VertexId,
        y: VertexId,
        sigma: f64,
    },
    VertexSum {
        x: VertexId,
        sum: f64,
    },
}

impl fmt::Display for AdaptedViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdaptedViolation::MissingEdgeWeight { expected_arcs, found } => {
                write!(f, "σ has {found} arc values, graph has {expected_arcs}")
            }
            AdaptedViolation::Asymmetric {
                x,
                y,
                forward,
                backward,
            } => {
                write!(f, "σ({x},{y})={forward} but σ({y},{x})={backward}")
            }
            AdaptedViolation::OutOfRange { x, y, sigma } => {
                write!(f, "σ({x},{y})={sigma} outside (0,1]")
            }
            AdaptedViolation::VertexSum { x, sum } => {
                write!(f, "Σ w σ² / μ = {sum} > 1 at {x}")
            }
        }
    }
}

/// Checks symmetry, `0 < σ <= 1`, and `Σ_y w(x,y) σ(x,y)² / μ(x) <= 1` at every
/// vertex. Only materialized edges enter the sum.
pub fn verify_adapted(g: &WeightedGraph, sigma: &AdaptedWeight) -> std::result::Result<(), AdaptedViolation> {
    if sigma.values.len() != g.arc_count() {
        return Err(AdaptedViolation::MissingEdgeWeight {
            expected_arcs: g.arc_count(),
            found: sigma.values.len(),
        });
    }
    for x in 0..g.len() {
        let mut sum = 0.0;
        for a in g.arcs(x) {
            let s = sigma.values[a];
            let y = g.arc_target(a);
            let back = sigma.values[g.arc_reverse(a)];
            if s != back {
                return Err(AdaptedViolation::Asymmetric {
                    x: g.id(x),
                    y: g.id(y),
                    forward: s,
                    backward: back,
                });
            }
            if !(s > 0.0 && s <= 1.0) {
                return Err(AdaptedViolation::OutOfRange {
                    x: g.id(x),
                    y: g.id(y),
                    sigma: s,
                });
            }
            sum += g.arc_weight(a) * s * s;
        }
        let sum = sum / g.measure(x);
        if sum > 1.0 + ADAPTED_TOL {
            return Err(AdaptedViolation::VertexSum { x: g.id(x), sum });
        }
    }
    Ok(())
}

/// Single-source distances in the adapted path metric.
#[derive(Debug, Clone)]
pub struct PathMetric {
    source: VertexId,
    source_index: usize,
    dist: Vec<f64>,
    radius: f64,
    boundary_distance: f64,
}

impl PathMetric {
    pub fn source(&self) -> VertexId {
        self.source
    }

    pub fn source_index(&self) -> usize {
        self.source_index
    }

    /// Search radius this metric was computed for.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Distance by vertex index; `INFINITY` when beyond the search radius.
    pub fn at(&self, i: usize) -> f64 {
        self.dist[i]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    pub fn distance(&self, g: &WeightedGraph, v: VertexId) -> Option<f64> {
        let d = self.dist[g.index_of(v).ok()?];
        d.is_finite().then_some(d)
    }

    /// Distance of the closest truncation-boundary vertex seen by the search.
    /// Balls of radius `r` are exact iff `r + BALL_TOL < certified_radius()`.
    pub fn certified_radius(&self) -> f64 {
        if self.boundary_distance.is_finite() {
            self.boundary_distance
        } else if self.radius.is_infinite() {
            f64::INFINITY
        } else {
            // Nothing found up to the search radius: exact up to it.
            self.radius + 2.0 * BALL_TOL
        }
    }

    pub fn is_certified(&self, r: f64) -> bool {
        r + BALL_TOL < self.certified_radius()
    }

    /// `(vertex, distance)` for every vertex within the search radius.
    pub fn iter<'a>(&'a self, g: &'a WeightedGraph) -> impl Iterator<Item = (VertexId, f64)> + 'a {
        self.dist
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_finite())
            .map(move |(i, &d)| (g.id(i), d))
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `source` over edge lengths `σ`, settling every vertex with
/// distance `<= radius` (pass `f64::INFINITY` for the whole graph).
pub fn shortest_path_metric(
    g: &WeightedGraph,
    sigma: &AdaptedWeight,
    source: VertexId,
    radius: f64,
) -> Result<PathMetric> {
    let s = g.index_of(source)?;
    Ok(shortest_path_metric_from(g, sigma, s, radius))
}

pub fn shortest_path_metric_from(g: &WeightedGraph, sigma: &AdaptedWeight, s: usize, radius: f64) -> PathMetric {
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut done = vec![false; g.len()];
    let mut heap = BinaryHeap::new();
    let mut boundary_distance = f64::INFINITY;
    dist[s] = 0.0;
    heap.push(HeapEntry(0.0, s));
    while let Some(HeapEntry(d, x)) = heap.pop() {
        if done[x] {
            continue;
        }
        if d > radius {
            break;
        }
        done[x] = true;
        if g.is_boundary(x) && d < boundary_distance {
            boundary_distance = d;
        }
        for a in g.arcs(x) {
            let y = g.arc_target(a);
            let nd = d + sigma.arc(a);
            if nd < dist[y] {
                dist[y] = nd;
                heap.push(HeapEntry(nd, y));
            }
        }
    }
    for (d, ok) in dist.iter_mut().zip(&done) {
        if !ok {
            *d = f64::INFINITY;
        }
    }
    PathMetric {
        source: g.id(s),
        source_index: s,
        dist,
        radius,
        boundary_distance,
    }
}

/// Closed ball `{y : d_σ(center, y) <= r}` and its measure.
pub fn ball_and_volume(
    g: &WeightedGraph,
    sigma: &AdaptedWeight,
    center: VertexId,
    r: f64,
) -> Result<(Vec<VertexId>, f64)> {
    if r < 0.0 {
        return Err(Error::DomainError(format!("negative radius {r}")));
    }
    let m = shortest_path_metric(g, sigma, center, r + BALL_TOL)?;
    if !m.is_certified(r) {
        return Err(Error::TruncationTooSmall(format!(
            "ball of radius {r} around {center} reaches the truncation boundary at distance {}",
            m.certified_radius()
        )));
    }
    let mut members = Vec::new();
    let mut volume = 0.0;
    for (i, &d) in m.dist.iter().enumerate() {
        if d <= r + BALL_TOL {
            members.push(g.id(i));
            volume += g.measure(i);
        }
    }
    Ok((members, volume))
}

/// Cumulative ball volumes around one centre, read off a distance table.
#[derive(Debug, Clone)]
pub struct BallVolumes {
    /// Distinct distances in increasing order.
    radii: Vec<f64>,
    /// `cumulative[i]` is the measure of all vertices at distance `<= radii[i]`.
    cumulative: Vec<f64>,
    certified_radius: f64,
}

impl BallVolumes {
    pub fn new(g: &WeightedGraph, metric: &PathMetric) -> Self {
        let mut pts: Vec<(f64, f64)> = metric
            .distances()
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_finite())
            .map(|(i, &d)| (d, g.measure(i)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut radii: Vec<f64> = Vec::with_capacity(pts.len());
        let mut cumulative: Vec<f64> = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        for (d, m) in pts {
            acc += m;
            match radii.last() {
                Some(&last) if d == last => *cumulative.last_mut().unwrap() = acc,
                _ => {
                    radii.push(d);
                    cumulative.push(acc);
                }
            }
        }
        BallVolumes {
            radii,
            cumulative,
            certified_radius: metric.certified_radius(),
        }
    }

    /// `μ(B(x̄, r))` over the materialized vertices.
    pub fn volume(&self, r: f64) -> f64 {
        let k = self.radii.partition_point(|&d| d <= r + BALL_TOL);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Exact ball volumes are available for `r + BALL_TOL < certified_radius()`.
    pub fn certified_radius(&self) -> f64 {
        self.certified_radius
    }

    /// Radii at which the volume jumps.
    pub fn breakpoints(&self) -> &[f64] {
        &self.radii
    }

    pub fn max_distance(&self) -> f64 {
        self.radii.last().copied().unwrap_or(0.0)
    }
}

/// Formal Laplacian `Δf(x) = (1/μ(x)) Σ_y w(x,y) (f(x) - f(y))` by index,
/// over materialized neighbours only.
pub fn laplacian_at(g: &WeightedGraph, f: &[f64], x: usize) -> f64 {
    let fx = f[x];
    g.arcs(x)
        .map(|a| g.arc_weight(a) * (fx - f[g.arc_target(a)]))
        .sum::<f64>()
        / g.measure(x)
}

/// Formal Laplacian at `x` for `f` given on `x` and all of its neighbours.
pub fn formal_laplacian(g: &WeightedGraph, f: &HashMap<VertexId, f64>, x: VertexId) -> Result<f64> {
    let i = g.index_of(x)?;
    if g.is_boundary(i) {
        return Err(Error::MissingValue(x));
    }
    let fx = *f.get(&x).ok_or(Error::MissingValue(x))?;
    let mut acc = 0.0;
    for (j, w) in g.neighbors(i) {
        let y = g.id(j);
        let fy = *f.get(&y).ok_or(Error::MissingValue(y))?;
        acc += w * (fx - fy);
    }
    Ok(acc / g.measure(i))
}
