//! Exact simulation of the minimal continuous-time Markov chain of a weighted
//! graph, explosion diagnosis, local times and time changes.
//!
//! At `x` the chain holds for an `Exp(Deg(x))` time and then jumps to `y` with
//! probability `w(x,y) / Σ_z w(x,z)`. On a truncated graph the conductance
//! towards unmaterialized neighbours is part of the total; a jump along it
//! ends the trajectory with [`Status::LeftTruncation`].

use std::ops::ControlFlow;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{VertexId, WeightedGraph};

/// Environment variable capping the worker count of parallel batches.
pub const THREADS_ENV: &str = "ESCAPE_LAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    HorizonReached,
    Exploded,
    BudgetExhausted,
    LeftTruncation,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::HorizonReached => "horizon-reached",
            Status::Exploded => "exploded",
            Status::BudgetExhausted => "budget-exhausted",
            Status::LeftTruncation => "left-truncation",
        }
    }
}

/// Jump record of one run. `jumps[0] = (0, x₀)`; the chain sits at
/// `jumps[i].1` on `[jumps[i].0, jumps[i+1].0)` and at the last vertex until
/// `end_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub jumps: Vec<(f64, VertexId)>,
    pub status: Status,
    pub seed: u64,
    pub stream: u64,
    pub end_time: f64,
}

impl Trajectory {
    pub fn jump_count(&self) -> usize {
        self.jumps.len().saturating_sub(1)
    }

    /// Holding intervals `(start, end, vertex)`.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, VertexId)> + '_ {
        self.jumps.iter().enumerate().map(move |(i, &(t, v))| {
            let end = self.jumps.get(i + 1).map_or(self.end_time, |j| j.0);
            (t, end, v)
        })
    }

    /// `t,vertex_id,status`: one row per jump, then a row at the end time
    /// that carries the status.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,vertex_id,status\n");
        for &(t, v) in &self.jumps {
            s.push_str(&format!("{t},{v},\n"));
        }
        if let Some(&(_, v)) = self.jumps.last() {
            s.push_str(&format!("{},{v},{}\n", self.end_time, self.status.as_str()));
        }
        s
    }

    /// Position at time `t <= end_time`.
    pub fn position(&self, t: f64) -> Result<VertexId> {
        if t > self.end_time || t < 0.0 {
            return Err(Error::BeyondRecordedTime { t, end: self.end_time });
        }
        let k = self.jumps.partition_point(|&(s, _)| s <= t);
        Ok(self.jumps[k.max(1) - 1].1)
    }
}

/// Per-vertex quantities used by the sampler.
#[derive(Debug, Clone)]
pub struct JumpTables<'a> {
    g: &'a WeightedGraph,
    total: Vec<f64>,
    rate: Vec<f64>,
}

impl<'a> JumpTables<'a> {
    pub fn new(g: &'a WeightedGraph) -> Self {
        let total: Vec<f64> = (0..g.len()).map(|i| g.total_conductance(i)).collect();
        let rate = total.iter().enumerate().map(|(i, c)| c / g.measure(i)).collect();
        JumpTables { g, total, rate }
    }

    pub fn graph(&self) -> &'a WeightedGraph {
        self.g
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.rate[i]
    }
}

/// Uniform on `(0, 1]`.
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Absolute stall rule: the last quarter of the jumps up to a checkpoint took
/// less than `STALL_FRACTION · horizon` time.
pub const STALL_FRACTION: f64 = 1e-6;
/// Relative stall rule: the jumps from `2^{J-4}` to `2^J` took less than this
/// fraction of the elapsed time `T(2^J)`.
pub const RELATIVE_STALL: f64 = 0.008;
/// Smallest checkpoint exponent `J` at which either rule is applied.
pub const FIRST_CHECKPOINT: u32 = 12;

/// Explosion test evaluated at the jump counts `2^J`. The checkpoints do not
/// depend on the budget, so a run that is declared exploded stays exploded
/// under any larger budget on the same stream.
#[derive(Debug, Clone, Default)]
struct ExplosionProbe {
    /// Elapsed time at jump counts `1, 2, 4, …`.
    dyadic: Vec<f64>,
    /// Elapsed time at jump count `3 · 2^{J-2}` for the upcoming checkpoint `2^J`.
    three_quarter: f64,
}

impl ExplosionProbe {
    /// Records jump number `jumps` at time `t`; `true` when the run is
    /// declared exploded.
    #[inline]
    fn record(&mut self, jumps: u64, t: f64, horizon: f64) -> bool {
        if jumps & (jumps - 1) != 0 {
            let m = self.dyadic.len();
            if m >= 2 && jumps == 3 << (m - 2) {
                self.three_quarter = t;
            }
            return false;
        }
        self.dyadic.push(t);
        let j = self.dyadic.len() - 1;
        if j < FIRST_CHECKPOINT as usize {
            return false;
        }
        t - self.three_quarter < STALL_FRACTION * horizon || t - self.dyadic[j - 4] < RELATIVE_STALL * t
    }
}

/// Outcome of [`run_chain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub status: Status,
    pub end_time: f64,
    pub jumps: u64,
}

/// Streams one run of the chain from vertex index `start`.
///
/// `visit(t, i)` is called with `(0, start)` and then after every jump with
/// the jump time and the new vertex index; returning `ControlFlow::Break`
/// stops the run early with status `HorizonReached` and end time `t`.
pub fn run_chain<R: Rng>(
    tables: &JumpTables<'_>,
    start: usize,
    horizon: f64,
    budget: u64,
    rng: &mut R,
    mut visit: impl FnMut(f64, usize) -> ControlFlow<()>,
) -> RunSummary {
    let g = tables.g;
    let mut x = start;
    let mut t = 0.0;
    let mut jumps = 0u64;
    let mut probe = ExplosionProbe::default();
    if visit(0.0, x).is_break() {
        return RunSummary {
            status: Status::HorizonReached,
            end_time: 0.0,
            jumps,
        };
    }
    loop {
        let hold = -open_unit(rng).ln() / tables.rate[x];
        let next_t = t + hold;
        if next_t >= horizon {
            return RunSummary {
                status: Status::HorizonReached,
                end_time: horizon,
                jumps,
            };
        }
        if jumps == budget {
            return RunSummary {
                status: Status::BudgetExhausted,
                end_time: t,
                jumps,
            };
        }
        t = next_t;
        let mut target = rng.random::<f64>() * tables.total[x];
        let mut next = None;
        for a in g.arcs(x) {
            target -= g.arc_weight(a);
            if target < 0.0 {
                next = Some(g.arc_target(a));
                break;
            }
        }
        let Some(y) = next.or_else(|| {
            // Rounding may leave a sliver past the last arc on interior vertices.
            (!g.is_boundary(x)).then(|| g.arc_target(g.arcs(x).end - 1))
        }) else {
            return RunSummary {
                status: Status::LeftTruncation,
                end_time: t,
                jumps,
            };
        };
        x = y;
        jumps += 1;
        if probe.record(jumps, t, horizon) {
            let _ = visit(t, x);
            return RunSummary {
                status: Status::Exploded,
                end_time: t,
                jumps,
            };
        }
        if visit(t, x).is_break() {
            return RunSummary {
                status: Status::HorizonReached,
                end_time: t,
                jumps,
            };
        }
    }
}

/// [`run_chain`] reporting holding intervals `(start, end, vertex)` instead of
/// jumps. The last interval ends at the run's end time; returning
/// `ControlFlow::Break` stops the run.
pub fn run_intervals<R: Rng>(
    tables: &JumpTables<'_>,
    start: usize,
    horizon: f64,
    budget: u64,
    rng: &mut R,
    mut f: impl FnMut(f64, f64, usize) -> ControlFlow<()>,
) -> RunSummary {
    let mut prev: Option<(f64, usize)> = None;
    let mut stopped = false;
    let s = run_chain(tables, start, horizon, budget, rng, |t, x| {
        if let Some((s0, x0)) = prev {
            if f(s0, t, x0).is_break() {
                stopped = true;
                return ControlFlow::Break(());
            }
        }
        prev = Some((t, x));
        ControlFlow::Continue(())
    });
    if !stopped {
        if let Some((s0, x0)) = prev {
            let _ = f(s0, s.end_time, x0);
        }
    }
    s
}

/// Generator for trajectory `stream` of a batch seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Records one full trajectory on stream 0 of `seed`.
pub fn simulate_trajectory(
    g: &WeightedGraph,
    x0: VertexId,
    horizon: f64,
    jump_budget: u64,
    seed: u64,
) -> Result<Trajectory> {
    simulate_stream(&JumpTables::new(g), x0, horizon, jump_budget, seed, 0)
}

/// Records trajectory `stream` of the batch seeded with `seed`.
pub fn simulate_stream(
    tables: &JumpTables<'_>,
    x0: VertexId,
    horizon: f64,
    jump_budget: u64,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    check_run(horizon, jump_budget)?;
    let g = tables.g;
    let start = g.index_of(x0)?;
    let mut rng = stream_rng(seed, stream);
    let mut jumps = Vec::new();
    let s = run_chain(tables, start, horizon, jump_budget, &mut rng, |t, i| {
        jumps.push((t, g.id(i)));
        ControlFlow::Continue(())
    });
    Ok(Trajectory {
        jumps,
        status: s.status,
        seed,
        stream,
        end_time: s.end_time,
    })
}

fn check_run(horizon: f64, budget: u64) -> Result<()> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidConfig(format!("horizon {horizon} must be > 0")));
    }
    if budget < 1 {
        return Err(Error::InvalidConfig("jump budget must be >= 1".into()));
    }
    Ok(())
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            b = b.num_threads(n);
        }
        b.build().expect("thread pool")
    })
}

/// Evaluates `f(0..n)` on the worker pool, results in index order.
pub fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    pool().install(|| (0..n).into_par_iter().map(&f).collect())
}

/// `n` independent trajectories, trajectory `i` on stream `i` of `seed`.
pub fn simulate_batch(
    g: &WeightedGraph,
    x0: VertexId,
    horizon: f64,
    jump_budget: u64,
    seed: u64,
    n: usize,
) -> Result<Vec<Trajectory>> {
    let tables = JumpTables::new(g);
    g.index_of(x0)?;
    par_map(n, |i| {
        simulate_stream(&tables, x0, horizon, jump_budget, seed, i as u64)
    })
    .into_iter()
    .collect()
}

/// Occupation time `A_t` of a vertex subset along a trajectory: piecewise
/// linear with slope 1 while in the subset and 0 otherwise.
#[derive(Debug, Clone)]
pub struct LocalTimeAccount {
    /// `(t, A_t)` at every jump time and at the end time.
    knots: Vec<(f64, f64)>,
    /// Whether the chain is in the subset on the interval starting at each knot.
    inside: Vec<bool>,
}

impl LocalTimeAccount {
    pub fn new(traj: &Trajectory, subset: impl Fn(VertexId) -> bool) -> Self {
        let mut knots = Vec::with_capacity(traj.jumps.len() + 1);
        let mut inside = Vec::with_capacity(traj.jumps.len());
        let mut a = 0.0;
        for (s, e, v) in traj.intervals() {
            let inn = subset(v);
            knots.push((s, a));
            inside.push(inn);
            if inn {
                a += e - s;
            }
        }
        knots.push((traj.end_time, a));
        LocalTimeAccount { knots, inside }
    }

    pub fn end_time(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.0)
    }

    pub fn total(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.1)
    }

    /// `A_t` for `0 <= t <= end_time`.
    pub fn at(&self, t: f64) -> Result<f64> {
        let end = self.end_time();
        if t > end || t < 0.0 {
            return Err(Error::BeyondRecordedTime { t, end });
        }
        let k = self.knots.partition_point(|&(s, _)| s <= t).max(1) - 1;
        if k >= self.inside.len() {
            return Ok(self.total());
        }
        let (s, a) = self.knots[k];
        Ok(if self.inside[k] { a + (t - s) } else { a })
    }

    /// `τ_a = inf{s : A_s > a}` for `0 <= a < total()`.
    pub fn inverse(&self, a: f64) -> Option<f64> {
        if !(a >= 0.0 && a < self.total()) {
            return None;
        }
        let k = self.knots.partition_point(|&(_, b)| b <= a);
        // On [knots[k-1], knots[k]) A crosses a, necessarily on an inside piece.
        let (s, b) = self.knots[k - 1];
        Some(s + (a - b))
    }

    /// Minimum of `A_t / t` over `t ∈ [t0, t1]`, exact for the piecewise-linear
    /// path: the ratio is monotone between knots, so only `t0`, `t1` and the
    /// knots in between matter.
    pub fn min_ratio(&self, t0: f64, t1: f64) -> Result<f64> {
        let mut best = (self.at(t0)? / t0).min(self.at(t1)? / t1);
        let lo = self.knots.partition_point(|&(s, _)| s <= t0);
        for &(s, a) in &self.knots[lo..] {
            if s >= t1 {
                break;
            }
            best = best.min(a / s);
        }
        Ok(best)
    }
}

/// Lebesgue time spent in `subset` on `[0, t]`.
pub fn local_time(traj: &Trajectory, subset: impl Fn(VertexId) -> bool, t: f64) -> Result<f64> {
    LocalTimeAccount::new(traj, subset).at(t)
}

/// Trace of the trajectory on `subset`: holding intervals outside the subset
/// are cut out, the clock is replaced by the occupation time and consecutive
/// visits to the same vertex are merged.
pub fn time_change(traj: &Trajectory, subset: impl Fn(VertexId) -> bool) -> Result<Trajectory> {
    let all_inside = traj.jumps.iter().all(|&(_, v)| subset(v));
    let no_repeats = traj.jumps.windows(2).all(|w| w[0].1 != w[1].1);
    if all_inside && no_repeats && traj.end_time > 0.0 {
        return Ok(traj.clone());
    }
    let mut jumps: Vec<(f64, VertexId)> = Vec::new();
    let mut a = 0.0;
    for (s, e, v) in traj.intervals() {
        if !subset(v) || e <= s {
            continue;
        }
        if jumps.last().map(|j| j.1) != Some(v) {
            jumps.push((a, v));
        }
        a += e - s;
    }
    if jumps.is_empty() || !(a > 0.0) {
        return Err(Error::NeverVisitsSubset);
    }
    Ok(Trajectory {
        jumps,
        status: traj.status,
        seed: traj.seed,
        stream: traj.stream,
        end_time: a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use std::collections::BTreeMap;

    fn o(i: u64) -> VertexId {
        VertexId::Original(i)
    }

    fn two_vertex(w: f64, mu0: f64, mu1: f64) -> WeightedGraph {
        let mu: BTreeMap<_, _> = [(o(0), mu0), (o(1), mu1)].into_iter().collect();
        build_graph(&[(o(0), o(1), w)], &mu).unwrap()
    }

    fn manual(jumps: &[(f64, u64)], end: f64) -> Trajectory {
        Trajectory {
            jumps: jumps.iter().map(|&(t, v)| (t, o(v))).collect(),
            status: Status::HorizonReached,
            seed: 0,
            stream: 0,
            end_time: end,
        }
    }

    #[test]
    fn seed_determinism() {
        let g = two_vertex(1.0, 1.0, 1.0);
        let a = simulate_trajectory(&g, o(0), 50.0, 1000, 7).unwrap();
        let b = simulate_trajectory(&g, o(0), 50.0, 1000, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_trajectory(&g, o(0), 50.0, 1000, 8).unwrap();
        assert_ne!(a.jumps, c.jumps);
        assert_eq!(a.jumps[0], (0.0, o(0)));
        assert!(a.jumps.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 != w[1].1));
    }

    #[test]
    fn batch_is_independent_of_size() {
        let g = two_vertex(1.0, 1.0, 1.0);
        let small = simulate_batch(&g, o(0), 5.0, 100, 3, 4).unwrap();
        let big = simulate_batch(&g, o(0), 5.0, 100, 3, 16).unwrap();
        assert_eq!(&big[..4], &small[..]);
    }

    #[test]
    fn unit_rate_jump_count() {
        // Both holding rates are 1, so jumps in [0, 10] are Poisson(10).
        let g = two_vertex(1.0, 1.0, 1.0);
        let tables = JumpTables::new(&g);
        let n = 20_000;
        let counts = par_map(n, |i| {
            let mut rng = stream_rng(11, i as u64);
            run_chain(&tables, 0, 10.0, u64::MAX, &mut rng, |_, _| ControlFlow::Continue(())).jumps as f64
        });
        let mean = counts.iter().sum::<f64>() / n as f64;
        let se = (10.0 / n as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn holding_rate_is_weighted_degree() {
        let g = two_vertex(2.0, 4.0, 1.0);
        let tables = JumpTables::new(&g);
        let n = 20_000;
        let holds = par_map(n, |i| {
            let mut rng = stream_rng(5, i as u64);
            let mut first = f64::NAN;
            run_chain(&tables, 0, 1e9, 1, &mut rng, |t, _| {
                if t > 0.0 {
                    first = t;
                }
                ControlFlow::Continue(())
            });
            first
        });
        let mean = holds.iter().sum::<f64>() / n as f64;
        let se = 2.0 / (n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn leaves_truncation() {
        let mu: BTreeMap<_, _> = [(o(0), 1.0), (o(1), 1.0)].into_iter().collect();
        let ext: BTreeMap<_, _> = [(o(1), 1.0)].into_iter().collect();
        let g = crate::graph::build_truncated_graph(&[(o(0), o(1), 1.0)], &mu, &ext).unwrap();
        let t = simulate_trajectory(&g, o(0), 1e6, 1_000_000, 1).unwrap();
        assert_eq!(t.status, Status::LeftTruncation);
        assert_eq!(t.jumps.last().unwrap().1, o(1));
    }

    #[test]
    fn local_time_examples() {
        let tr = manual(&[(0.0, 0), (1.0, 1)], 3.0);
        assert_eq!(local_time(&tr, |v| v == o(0), 3.0).unwrap(), 1.0);
        assert_eq!(local_time(&tr, |_| true, 2.5).unwrap(), 2.5);
        assert_eq!(local_time(&tr, |_| false, 2.5).unwrap(), 0.0);
        assert!(matches!(
            local_time(&tr, |_| true, 3.5),
            Err(Error::BeyondRecordedTime { .. })
        ));
        let acc = LocalTimeAccount::new(&tr, |v| v == o(1));
        assert_eq!(acc.inverse(0.0), Some(1.0));
        assert_eq!(acc.inverse(1.5), Some(2.5));
        assert_eq!(acc.inverse(2.0), None);
    }

    #[test]
    fn time_change_examples() {
        let tr = manual(&[(0.0, 0), (1.0, 9), (3.0, 0)], 4.0);
        let tc = time_change(&tr, |v| v == o(0)).unwrap();
        assert_eq!(tc.jumps, vec![(0.0, o(0))]);
        assert_eq!(tc.end_time, 2.0);
        assert_eq!(time_change(&tr, |_| true).unwrap(), tr);
        assert!(matches!(time_change(&tr, |v| v == o(5)), Err(Error::NeverVisitsSubset)));
    }

    #[test]
    fn min_ratio_is_exact() {
        // Inside on [0,1), outside on [1,3), inside on [3,4].
        let tr = manual(&[(0.0, 0), (1.0, 1), (3.0, 0)], 4.0);
        let acc = LocalTimeAccount::new(&tr, |v| v == o(0));
        assert!((acc.min_ratio(0.5, 4.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(acc.min_ratio(0.2, 0.8).unwrap(), 1.0);
    }
}
