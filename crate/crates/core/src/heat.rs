//! Deterministic companions of the simulator: hitting probabilities by a
//! direct linear solve, exit-time distributions from the killed heat
//! equation, and a numerical check of the integral maximum principle
//!
//! ```text
//! Σ_{x∈K} u²(x,s) η²(x) e^{ξ(x,s)} μ(x)
//!     <= 2 ∫₀ˢ Σ_{x,y∈L} w(x,y) (η(x) - η(y))² u²(y,t) e^{ξ(x,t)} dt.
//! ```

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{shortest_path_metric, AdaptedWeight, VertexId, WeightedGraph, BALL_TOL};
use crate::modify::{schedule_radius, GrowthFunction};

/// Largest linear system solved densely.
pub const MAX_DENSE_UNKNOWNS: usize = 2000;
/// Agreement required between successive step halvings of the ODE solver.
pub const ODE_TOL: f64 = 1e-8;
const MAX_HALVINGS: u32 = 12;

fn indices(g: &WeightedGraph, set: &BTreeSet<VertexId>) -> Result<Vec<usize>> {
    set.iter().map(|&v| g.index_of(v)).collect()
}

/// Probability that the chain started at `start` enters `targets` at each
/// target first. Off the targets the function is harmonic, on them it is an
/// indicator.
pub fn hitting_probabilities(
    g: &WeightedGraph,
    start: VertexId,
    targets: &BTreeSet<VertexId>,
) -> Result<BTreeMap<VertexId, f64>> {
    let s = g.index_of(start)?;
    let target_idx = indices(g, targets)?;
    let mut out: BTreeMap<VertexId, f64> = targets.iter().map(|&t| (t, 0.0)).collect();
    if targets.contains(&start) {
        out.insert(start, 1.0);
        return Ok(out);
    }
    let is_target: Vec<bool> = {
        let mut m = vec![false; g.len()];
        target_idx.iter().for_each(|&i| m[i] = true);
        m
    };
    // Component of `start` in the complement of the targets.
    let mut local = vec![usize::MAX; g.len()];
    let mut region = vec![s];
    local[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(x) = queue.pop_front() {
        if g.is_boundary(x) {
            return Err(Error::TruncationTooSmall(format!(
                "{} can escape through the truncation boundary at {}",
                start,
                g.id(x)
            )));
        }
        for (y, _) in g.neighbors(x) {
            if !is_target[y] && local[y] == usize::MAX {
                local[y] = region.len();
                region.push(y);
                if region.len() > MAX_DENSE_UNKNOWNS {
                    return Err(Error::SystemTooLarge(region.len()));
                }
                queue.push_back(y);
            }
        }
    }
    let n = region.len();
    let col: BTreeMap<usize, usize> = target_idx.iter().enumerate().map(|(c, &t)| (t, c)).collect();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, target_idx.len());
    for (r, &x) in region.iter().enumerate() {
        for (y, w) in g.neighbors(x) {
            a[(r, r)] += w;
            if is_target[y] {
                b[(r, col[&y])] += w;
            } else {
                a[(r, local[y])] -= w;
            }
        }
    }
    let h = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    for (c, &t) in target_idx.iter().enumerate() {
        out.insert(g.id(t), h[(0, c)]);
    }
    Ok(out)
}

/// `u(x, t) = P_x(τ_K <= t)` for every `x ∈ K` on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct ExitTimeSolution {
    /// Graph indices of `K` in increasing order.
    pub vertices: Vec<usize>,
    pub t_grid: Vec<f64>,
    /// `values[j][i] = u(vertices[i], t_grid[j])`.
    pub values: Vec<Vec<f64>>,
    /// Step size of the accepted integration.
    pub step: f64,
}

impl ExitTimeSolution {
    pub fn local_index(&self, graph_index: usize) -> Option<usize> {
        self.vertices.binary_search(&graph_index).ok()
    }

    /// `u` at graph index `i` and grid index `j`; `None` outside `K`.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.local_index(i).map(|k| self.values[j][k])
    }
}

/// `Δ^K` on `K` in local indices: total jump rate per vertex and the jump
/// rates to neighbours inside `K`.
struct KilledGenerator {
    rate: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl KilledGenerator {
    fn new(g: &WeightedGraph, k: &[usize]) -> Self {
        let local: BTreeMap<usize, usize> = k.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let rate = k.iter().map(|&x| g.total_conductance(x) / g.measure(x)).collect();
        let rows = k
            .iter()
            .map(|&x| {
                g.neighbors(x)
                    .filter_map(|(y, w)| local.get(&y).map(|&j| (j, w / g.measure(x))))
                    .collect()
            })
            .collect();
        KilledGenerator { rate, rows }
    }

    /// `dv/dt = -Δ^K v`.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let inflow: f64 = row.iter().map(|&(j, p)| p * v[j]).sum();
            out[i] = inflow - self.rate[i] * v[i];
        }
    }
}

fn rk4_grid(gen: &KilledGenerator, t_grid: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = gen.rate.len();
    let mut v = vec![1.0; n];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut out = Vec::with_capacity(t_grid.len());
    let mut t = 0.0;
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / h).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                gen.apply(&v, &mut k1);
                for i in 0..n {
                    tmp[i] = v[i] + 0.5 * dt * k1[i];
                }
                gen.apply(&tmp, &mut k2);
                for i in 0..n {
                    tmp[i] = v[i] + 0.5 * dt * k2[i];
                }
                gen.apply(&tmp, &mut k3);
                for i in 0..n {
                    tmp[i] = v[i] + dt * k3[i];
                }
                gen.apply(&tmp, &mut k4);
                for i in 0..n {
                    v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            t = target;
        }
        out.push(v.iter().map(|&s| 1.0 - s).collect::<Vec<f64>>());
    }
    out
}

/// Solves the killed heat equation on `K` for all starting points.
///
/// `v = 1 - u` satisfies `dv/dt = -Δ^K v`, `v(·, 0) = 1`, with `v = 0` off
/// `K`. RK4 starts at `h = min(0.01, 0.1 / max rate over cl(K))` and halves
/// until successive solutions agree to [`ODE_TOL`]. The returned values are
/// clamped to `[0, 1]` and made nondecreasing in `t`.
pub fn exit_time_solution(g: &WeightedGraph, k: &BTreeSet<VertexId>, t_grid: &[f64]) -> Result<ExitTimeSolution> {
    if k.is_empty() {
        return Err(Error::InvalidConfig("empty vertex set".into()));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig(
            "time grid must be finite, nonnegative and nondecreasing".into(),
        ));
    }
    let vertices = indices(g, k)?;
    let mut max_rate: f64 = 0.0;
    for &x in &vertices {
        if g.is_boundary(x) {
            return Err(Error::TruncationTooSmall(format!(
                "{} has neighbours beyond the truncation",
                g.id(x)
            )));
        }
        max_rate = max_rate.max(g.total_conductance(x) / g.measure(x));
        for (y, _) in g.neighbors(x) {
            max_rate = max_rate.max(g.total_conductance(y) / g.measure(y));
        }
    }
    let gen = KilledGenerator::new(g, &vertices);
    let mut h = 0.01f64.min(0.1 / max_rate);
    let mut prev = rk4_grid(&gen, t_grid, h);
    for _ in 0..MAX_HALVINGS {
        let next = rk4_grid(&gen, t_grid, h / 2.0);
        let diff = prev
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        h /= 2.0;
        prev = next;
        if diff <= ODE_TOL {
            break;
        }
    }
    let mut running = vec![0.0f64; vertices.len()];
    for row in &mut prev {
        for (u, r) in row.iter_mut().zip(running.iter_mut()) {
            *r = r.max(u.clamp(0.0, 1.0));
            *u = *r;
        }
    }
    Ok(ExitTimeSolution {
        vertices,
        t_grid: t_grid.to_vec(),
        values: prev,
        step: h,
    })
}

/// `u(x, t) = P_x(τ_K <= t)` at each point of `t_grid`.
pub fn exit_time_cdf(g: &WeightedGraph, k: &BTreeSet<VertexId>, x: VertexId, t_grid: &[f64]) -> Result<Vec<f64>> {
    if !k.contains(&x) {
        return Err(Error::InvalidConfig(format!("{x} is not in K")));
    }
    let sol = exit_time_solution(g, k, t_grid)?;
    let i = sol.local_index(g.index_of(x)?).expect("x in K");
    Ok(sol.values.iter().map(|row| row[i]).collect())
}

/// Cut-off `η` and weight `ξ` of the maximum principle, by graph index.
pub trait Auxiliary {
    fn eta(&self, i: usize) -> f64;
    fn xi(&self, i: usize, t: f64) -> f64;
    fn xi_dt(&self, i: usize, t: f64) -> f64;
}

/// Time-independent choice `ξ ≡ 0` with a given `η`.
#[derive(Debug, Clone)]
pub struct StaticAuxiliary {
    pub eta: Vec<f64>,
}

impl Auxiliary for StaticAuxiliary {
    fn eta(&self, i: usize) -> f64 {
        self.eta[i]
    }
    fn xi(&self, _: usize, _: f64) -> f64 {
        0.0
    }
    fn xi_dt(&self, _: usize, _: f64) -> f64 {
        0.0
    }
}

/// `ξ(x,t) = -2α²e⁴t - 2α d(x)` and
/// `η(x) = (e^{αρ} - e^{α d(x)})₊ / (e^{αρ} - 1)` with `d = d_σ(·, z)`.
#[derive(Debug, Clone)]
pub struct DistanceAuxiliary {
    pub alpha: f64,
    /// `ρ`, the radius where `η` vanishes.
    pub inner_radius: f64,
    /// `d_σ(·, z)` by graph index, `INFINITY` when not computed.
    pub dist: Vec<f64>,
}

impl DistanceAuxiliary {
    pub fn new(
        g: &WeightedGraph,
        sigma: &AdaptedWeight,
        z: VertexId,
        alpha: f64,
        inner_radius: f64,
        search_radius: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && inner_radius > 0.0) {
            return Err(Error::DomainError(format!(
                "alpha = {alpha} and inner radius = {inner_radius} must be positive"
            )));
        }
        let m = shortest_path_metric(g, sigma, z, search_radius + BALL_TOL)?;
        Ok(DistanceAuxiliary {
            alpha,
            inner_radius,
            dist: m.distances().to_vec(),
        })
    }
}

impl Auxiliary for DistanceAuxiliary {
    fn eta(&self, i: usize) -> f64 {
        let a = self.alpha;
        let top = (a * self.inner_radius).exp();
        ((top - (a * self.dist[i]).exp()) / (top - 1.0)).max(0.0)
    }
    fn xi(&self, i: usize, t: f64) -> f64 {
        let a = self.alpha;
        -2.0 * a * a * 4f64.exp() * t - 2.0 * a * self.dist[i]
    }
    fn xi_dt(&self, _: usize, _: f64) -> f64 {
        -2.0 * self.alpha * self.alpha * 4f64.exp()
    }
}

/// Sets and auxiliary functions for the exit estimate around `z` at level `n`:
/// `r = 2^{n+2} - 3`, `K = B(z, r - σ_n)`, `L = B(z, r)` and
/// `α = (2 f(R_n) + 2 log log R_n) / r`.
#[derive(Debug, Clone)]
pub struct LevelInstance {
    pub level: u32,
    pub r: f64,
    pub sigma_n: f64,
    pub k: BTreeSet<VertexId>,
    pub l: BTreeSet<VertexId>,
    pub aux: DistanceAuxiliary,
}

pub fn level_instance(
    g: &WeightedGraph,
    sigma: &AdaptedWeight,
    growth: &GrowthFunction,
    z: VertexId,
    level: u32,
) -> Result<LevelInstance> {
    let r = 2f64.powi(level as i32 + 2) - 3.0;
    let big_r = schedule_radius(level);
    let sigma_n = growth.sigma_level(level);
    let alpha = (2.0 * growth.f(big_r) + 2.0 * big_r.ln().ln()) / r;
    let aux = DistanceAuxiliary::new(g, sigma, z, alpha, r - sigma_n, r)?;
    let m = shortest_path_metric(g, sigma, z, r + BALL_TOL)?;
    if !m.is_certified(r) {
        return Err(Error::TruncationTooSmall(format!(
            "ball of radius {r} around {z} reaches the truncation boundary"
        )));
    }
    let ball = |rad: f64| -> BTreeSet<VertexId> {
        m.iter(g)
            .filter(|&(_, d)| d <= rad + BALL_TOL)
            .map(|(v, _)| v)
            .collect()
    };
    Ok(LevelInstance {
        level,
        r,
        sigma_n,
        k: ball(r - sigma_n),
        l: ball(r),
        aux,
    })
}

/// Worst value of one hypothesis over all checked points.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub index: u8,
    pub checked: usize,
    /// Signed margin; negative means violated beyond tolerance.
    pub worst_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxPrincipleReport {
    pub hypotheses: Vec<HypothesisCheck>,
    /// `(s, LHS(s), RHS(s))` at every checked time.
    pub checkpoints: Vec<(f64, f64, f64)>,
    pub passed: bool,
}

const HYP_TOL: f64 = 1e-9;

fn violated(index: u8, detail: String) -> Error {
    Error::HypothesisViolated { index, detail }
}

/// Checks the hypotheses on `η, ξ` and then the conclusion at every grid time
/// `s ∈ (0, T]` of `u`, which must be the exit-time solution on `L`.
///
/// Hypothesis 0 is the standing assumption `cl(K) ⊆ L`. Hypotheses 1–4 are:
/// `η >= 0` supported in `K`; `ξ` continuously differentiable in `t`
/// (checked against central differences); the monotone coupling
/// `(η²(x) - η²(y))(e^{ξ(x)} - e^{ξ(y)}) >= 0` on edges of `L`; and
/// `μ(x) ∂_t ξ + ½ Σ_{y∈L} w(x,y)(1 - e^{ξ(y) - ξ(x)})² <= 0` on `L`.
pub fn verify_integral_max_principle(
    g: &WeightedGraph,
    k: &BTreeSet<VertexId>,
    l: &BTreeSet<VertexId>,
    u: &ExitTimeSolution,
    aux: &dyn Auxiliary,
    horizon: f64,
) -> Result<MaxPrincipleReport> {
    let ki = indices(g, k)?;
    let li = indices(g, l)?;
    if ki.is_empty() {
        return Err(violated(0, "K is empty".into()));
    }
    let mut in_l = vec![false; g.len()];
    li.iter().for_each(|&x| in_l[x] = true);
    let mut in_k = vec![false; g.len()];
    ki.iter().for_each(|&x| in_k[x] = true);
    for &x in &ki {
        if !in_l[x] {
            return Err(violated(0, format!("{} is in K but not in L", g.id(x))));
        }
        if g.is_boundary(x) {
            return Err(violated(0, format!("{} has unmaterialized neighbours", g.id(x))));
        }
        if let Some((y, _)) = g.neighbors(x).find(|&(y, _)| !in_l[y]) {
            return Err(violated(
                0,
                format!("neighbour {} of {} lies outside L", g.id(y), g.id(x)),
            ));
        }
    }
    if u.vertices != li {
        return Err(Error::InvalidConfig("u must be the exit-time solution on L".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidConfig(format!("horizon {horizon} must be > 0")));
    }
    let last = u.t_grid.partition_point(|&t| t <= horizon + 1e-12);
    let times = &u.t_grid[..last];
    if times.first() != Some(&0.0) || times.len() < 2 {
        return Err(Error::InvalidConfig(
            "time grid must start at 0 and contain a positive time <= horizon".into(),
        ));
    }

    // (1)
    let mut h1 = HypothesisCheck {
        index: 1,
        checked: 0,
        worst_margin: f64::INFINITY,
    };
    for &x in &li {
        let e = aux.eta(x);
        let margin = if in_k[x] { e } else { -e.abs() };
        h1.checked += 1;
        h1.worst_margin = h1.worst_margin.min(margin);
        if !(e >= 0.0) || (!in_k[x] && e != 0.0) {
            return Err(violated(1, format!("η({}) = {e}", g.id(x))));
        }
    }
    // (2)
    let mut h2 = HypothesisCheck {
        index: 2,
        checked: 0,
        worst_margin: f64::INFINITY,
    };
    let dt = 1e-5 * horizon.max(1.0);
    for &x in &li {
        for &t in times {
            let d = aux.xi_dt(x, t);
            let fd = (aux.xi(x, t + dt) - aux.xi(x, (t - dt).max(0.0))) / (t + dt - (t - dt).max(0.0));
            let margin = 1e-6 * (1.0 + d.abs()) - (fd - d).abs();
            h2.checked += 1;
            h2.worst_margin = h2.worst_margin.min(margin);
            if !(d.is_finite() && aux.xi(x, t).is_finite()) || margin < 0.0 {
                return Err(violated(
                    2,
                    format!("∂ξ/∂t({}, {t}) = {d} but difference quotient is {fd}", g.id(x)),
                ));
            }
        }
    }
    // (3) and (4)
    let mut h3 = HypothesisCheck {
        index: 3,
        checked: 0,
        worst_margin: f64::INFINITY,
    };
    let mut h4 = HypothesisCheck {
        index: 4,
        checked: 0,
        worst_margin: f64::INFINITY,
    };
    for &t in times {
        for &x in &li {
            let ex = aux.xi(x, t);
            let eta_x = aux.eta(x).powi(2);
            let mut energy = 0.0;
            for (y, w) in g.neighbors(x).filter(|&(y, _)| in_l[y]) {
                let ey = aux.xi(y, t);
                let c = (eta_x - aux.eta(y).powi(2)) * (ex.exp() - ey.exp());
                h3.checked += 1;
                h3.worst_margin = h3.worst_margin.min(c);
                if c < -HYP_TOL {
                    return Err(violated(3, format!("edge {} -- {} at t = {t}: {c}", g.id(x), g.id(y))));
                }
                energy += w * (1.0 - (ey - ex).exp()).powi(2);
            }
            let val = g.measure(x) * aux.xi_dt(x, t) + 0.5 * energy;
            h4.checked += 1;
            h4.worst_margin = h4.worst_margin.min(-val);
            if val > HYP_TOL * (1.0 + g.measure(x) * aux.xi_dt(x, t).abs()) {
                return Err(violated(4, format!("at {} and t = {t}: {val}", g.id(x))));
            }
        }
    }

    let lx: BTreeMap<usize, usize> = li.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let lhs_at = |j: usize| -> f64 {
        ki.iter()
            .map(|&x| {
                let ux = u.values[j][lx[&x]];
                ux * ux * aux.eta(x).powi(2) * aux.xi(x, times[j]).exp() * g.measure(x)
            })
            .sum()
    };
    let integrand: Vec<f64> = (0..times.len())
        .map(|j| {
            let t = times[j];
            let mut acc = 0.0;
            for &x in &li {
                let ex = aux.xi(x, t).exp();
                let eta_x = aux.eta(x);
                for (y, w) in g.neighbors(x).filter(|&(y, _)| in_l[y]) {
                    let uy = u.values[j][lx[&y]];
                    acc += w * (eta_x - aux.eta(y)).powi(2) * uy * uy * ex;
                }
            }
            acc
        })
        .collect();
    let cumulative = cumulative_integral(times, &integrand);
    let mut checkpoints = Vec::new();
    let mut passed = true;
    for j in 1..times.len() {
        let Some(int) = cumulative[j] else { continue };
        let lhs = lhs_at(j);
        let rhs = 2.0 * int;
        passed &= lhs <= rhs * (1.0 + 1e-6) + 1e-9;
        checkpoints.push((times[j], lhs, rhs));
    }
    Ok(MaxPrincipleReport {
        hypotheses: vec![h1, h2, h3, h4],
        checkpoints,
        passed,
    })
}

/// `∫₀^{t_j} f` at each grid index. On a uniform grid only even indices get a
/// value, by composite Simpson; otherwise every index, by the trapezoid rule.
fn cumulative_integral(t: &[f64], f: &[f64]) -> Vec<Option<f64>> {
    let n = t.len();
    let h = t[1] - t[0];
    let uniform = t
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300));
    let mut out = vec![None; n];
    out[0] = Some(0.0);
    if uniform && n >= 3 {
        let mut acc = 0.0;
        let mut j = 2;
        while j < n {
            acc += h / 3.0 * (f[j - 2] + 4.0 * f[j - 1] + f[j]);
            out[j] = Some(acc);
            j += 2;
        }
    } else {
        let mut acc = 0.0;
        for j in 1..n {
            acc += 0.5 * (t[j] - t[j - 1]) * (f[j] + f[j - 1]);
            out[j] = Some(acc);
        }
    }
    out
}

/// Uniform grid `0, T/m, …, T`.
pub fn uniform_grid(horizon: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|j| horizon * j as f64 / intervals as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, default_adapted_weight};
    use crate::modify::{subdivide, SubdivisionPlan};

    fn o(i: u64) -> VertexId {
        VertexId::Original(i)
    }

    fn path(n: u64) -> WeightedGraph {
        let mu: BTreeMap<_, _> = (0..n).map(|i| (o(i), 1.0)).collect();
        let edges: Vec<_> = (0..n - 1).map(|i| (o(i), o(i + 1), 1.0)).collect();
        build_graph(&edges, &mu).unwrap()
    }

    fn set(v: &[VertexId]) -> BTreeSet<VertexId> {
        v.iter().copied().collect()
    }

    #[test]
    fn hitting_on_subdivided_edge() {
        let g = path(2);
        let s = default_adapted_weight(&g);
        let m = subdivide(&g, &s, &SubdivisionPlan::uniform(&g, 4).unwrap()).unwrap();
        let sub = |k| VertexId::Subdivision { lo: 0, hi: 1, k };
        let targets = set(&[o(0), o(1)]);
        let h = hitting_probabilities(&m.graph, sub(2), &targets).unwrap();
        assert!((h[&o(0)] - 0.5).abs() < 1e-12);
        let h = hitting_probabilities(&m.graph, sub(1), &targets).unwrap();
        assert!((h[&o(0)] - 0.75).abs() < 1e-12 && (h[&o(1)] - 0.25).abs() < 1e-12);
        let h = hitting_probabilities(&m.graph, o(1), &targets).unwrap();
        assert_eq!(h[&o(1)], 1.0);
    }

    #[test]
    fn unreachable_targets_are_singular() {
        let g = path(3);
        let h = hitting_probabilities(&g, o(0), &set(&[o(7)]));
        assert!(matches!(h, Err(Error::UnknownVertex(_))));
        let mu: BTreeMap<_, _> = (0..4).map(|i| (o(i), 1.0)).collect();
        let g = build_graph(&[(o(0), o(1), 1.0), (o(1), o(2), 1.0), (o(2), o(3), 1.0)], &mu).unwrap();
        let h = hitting_probabilities(&g, o(0), &set(&[o(3)])).unwrap();
        assert!((h[&o(3)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_vertex_exit() {
        let g = path(2);
        let grid = [0.0, 0.5, 1.0, 2.0, 5.0];
        let u = exit_time_cdf(&g, &set(&[o(0)]), o(0), &grid).unwrap();
        for (t, v) in grid.iter().zip(&u) {
            assert!((v - (1.0 - (-t).exp())).abs() < 1e-9, "{t}: {v}");
        }
    }

    #[test]
    fn exit_needs_closed_neighbourhood() {
        let mu: BTreeMap<_, _> = [(o(0), 1.0), (o(1), 1.0)].into_iter().collect();
        let ext: BTreeMap<_, _> = [(o(1), 1.0)].into_iter().collect();
        let g = crate::graph::build_truncated_graph(&[(o(0), o(1), 1.0)], &mu, &ext).unwrap();
        assert!(matches!(
            exit_time_cdf(&g, &set(&[o(0), o(1)]), o(0), &[1.0]),
            Err(Error::TruncationTooSmall(_))
        ));
        assert!(exit_time_cdf(&g, &set(&[o(0)]), o(0), &[1.0]).is_ok());
    }

    fn five_path_case() -> (WeightedGraph, BTreeSet<VertexId>, BTreeSet<VertexId>, ExitTimeSolution) {
        let g = path(7);
        let l = set(&[o(1), o(2), o(3), o(4), o(5)]);
        let k = set(&[o(2), o(3), o(4)]);
        let u = exit_time_solution(&g, &l, &uniform_grid(4.0, 400)).unwrap();
        (g, k, l, u)
    }

    #[test]
    fn zero_cutoff_is_trivial() {
        let (g, k, l, u) = five_path_case();
        let aux = StaticAuxiliary {
            eta: vec![0.0; g.len()],
        };
        let rep = verify_integral_max_principle(&g, &k, &l, &u, &aux, 4.0).unwrap();
        assert!(rep.passed);
        assert!(rep.checkpoints.iter().all(|&(_, a, b)| a == 0.0 && b == 0.0));
    }

    #[test]
    fn bump_cutoff_passes() {
        let (g, k, l, u) = five_path_case();
        let mut eta = vec![0.0; g.len()];
        for v in &k {
            eta[g.index_of(*v).unwrap()] = 1.0;
        }
        let aux = StaticAuxiliary { eta };
        let rep = verify_integral_max_principle(&g, &k, &l, &u, &aux, 4.0).unwrap();
        assert!(rep.passed, "{:?}", rep.checkpoints.last());
        assert!(rep.checkpoints.last().unwrap().1 > 0.0);
    }

    #[test]
    fn cutoff_outside_k_is_rejected() {
        let (g, k, l, u) = five_path_case();
        let mut eta = vec![0.0; g.len()];
        eta[g.index_of(o(1)).unwrap()] = 0.5;
        let aux = StaticAuxiliary { eta };
        let err = verify_integral_max_principle(&g, &k, &l, &u, &aux, 4.0).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolated { index: 1, .. }));
    }

    #[test]
    fn time_weight_must_decay_fast_enough() {
        struct Growing;
        impl Auxiliary for Growing {
            fn eta(&self, _: usize) -> f64 {
                0.0
            }
            fn xi(&self, i: usize, _: f64) -> f64 {
                i as f64
            }
            fn xi_dt(&self, _: usize, _: f64) -> f64 {
                0.0
            }
        }
        let (g, k, l, u) = five_path_case();
        let err = verify_integral_max_principle(&g, &k, &l, &u, &Growing, 4.0).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolated { index: 4, .. }));
    }

    #[test]
    fn level_instance_on_subdivided_line() {
        let fg = crate::families::generate(&crate::families::FamilySpec::lattice(1, 0.0, 0.0, 50)).unwrap();
        let m = subdivide(&fg.graph, &fg.sigma, &SubdivisionPlan::uniform(&fg.graph, 8).unwrap()).unwrap();
        let growth = GrowthFunction::new(&fg.graph, &fg.sigma, o(0)).unwrap();
        let inst = level_instance(&m.graph, &m.sigma, &growth, o(0), 1).unwrap();
        assert_eq!(inst.r, 5.0);
        assert!(inst.aux.alpha * m.sigma.max() <= 1.0);
        let u = exit_time_solution(&m.graph, &inst.l, &uniform_grid(2.0, 200)).unwrap();
        let rep = verify_integral_max_principle(&m.graph, &inst.k, &inst.l, &u, &inst.aux, 2.0).unwrap();
        assert!(rep.passed);
        assert!(rep.hypotheses.iter().all(|h| h.checked > 0 && h.worst_margin >= 0.0));
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let t = uniform_grid(2.0, 10);
        let f: Vec<f64> = t.iter().map(|x| x * x * x).collect();
        let c = cumulative_integral(&t, &f);
        assert!((c[10].unwrap() - 4.0).abs() < 1e-12);
        assert!(c[1].is_none());
    }
}
