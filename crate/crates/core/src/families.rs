//! Generators for birth–death chains, anti-trees, spherically symmetric trees
//! and weighted lattices, each truncated at a generation level, plus the
//! published asymptotic classifications of these families.
//!
//! Every family is a [`NeighborOracle`]: a lazily evaluated infinite graph
//! whose vertices carry a generation level equal to their graph distance from
//! the root. [`materialize`] turns an oracle into a finite [`WeightedGraph`]
//! truncated at a level, keeping the conductance towards the next level as
//! external conductance on the last one.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_truncated_graph, default_adapted_weight, AdaptedWeight, VertexId, WeightedGraph};

/// Default cap on materialized vertices.
pub const DEFAULT_MAX_VERTICES: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    BirthDeath,
    AntiTree,
    Tree,
    Lattice,
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "birth-death" | "bd" => Ok(FamilyKind::BirthDeath),
            "anti-tree" | "antitree" => Ok(FamilyKind::AntiTree),
            "tree" => Ok(FamilyKind::Tree),
            "lattice" | "zd" => Ok(FamilyKind::Lattice),
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}

fn default_mu() -> f64 {
    1.0
}

fn default_dim() -> u32 {
    1
}

fn default_cap() -> usize {
    DEFAULT_MAX_VERTICES
}

/// Parameters of a family and its truncation level.
///
/// `mu` is the constant vertex measure. Birth–death chains with `β > 0` or
/// `γ > 0` need `mu < 1` to satisfy `μ(n) <= 2 w(n, n+1)` at small `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_dim")]
    pub d: u32,
    pub truncation: u32,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_cap")]
    pub max_vertices: usize,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, truncation: u32) -> Self {
        FamilySpec {
            kind,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            d: 1,
            truncation,
            mu: 1.0,
            max_vertices: DEFAULT_MAX_VERTICES,
        }
    }

    pub fn birth_death(beta: f64, gamma: f64, truncation: u32) -> Self {
        FamilySpec {
            beta,
            gamma,
            ..Self::new(FamilyKind::BirthDeath, truncation)
        }
    }

    pub fn anti_tree(alpha: f64, beta: f64, truncation: u32) -> Self {
        FamilySpec {
            alpha,
            beta,
            ..Self::new(FamilyKind::AntiTree, truncation)
        }
    }

    pub fn tree(alpha: f64, beta: f64, truncation: u32) -> Self {
        FamilySpec {
            alpha,
            beta,
            ..Self::new(FamilyKind::Tree, truncation)
        }
    }

    pub fn lattice(d: u32, alpha: f64, beta: f64, truncation: u32) -> Self {
        FamilySpec {
            alpha,
            beta,
            d,
            ..Self::new(FamilyKind::Lattice, truncation)
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.truncation < 1 {
            return Err(Error::InvalidConfig("truncation must be at least 1".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be >= 0")));
            }
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidConfig(format!("mu = {} must be > 0", self.mu)));
        }
        if self.kind == FamilyKind::Lattice && self.d < 1 {
            return Err(Error::InvalidConfig("lattice dimension must be >= 1".into()));
        }
        Ok(())
    }
}

/// Lazily evaluated infinite graph with a root and generation levels.
pub trait NeighborOracle {
    type Node: Clone + Eq + Hash;

    fn root(&self) -> Self::Node;

    /// Graph distance from the root.
    fn level(&self, v: &Self::Node) -> u32;

    fn measure(&self, v: &Self::Node) -> f64;

    /// All neighbours with their conductances, in a deterministic order.
    fn neighbors(&self, v: &Self::Node) -> Vec<(Self::Node, f64)>;
}

/// Finite truncation of an oracle.
#[derive(Debug, Clone)]
pub struct Materialized<N> {
    pub graph: WeightedGraph,
    /// Node of each vertex, indexed like `graph` (i.e. by sorted id).
    pub nodes: Vec<N>,
    pub levels: Vec<u32>,
}

/// Breadth-first materialization of all nodes with level `<= truncation`.
///
/// Vertex `Original(i)` is the `i`-th node in discovery order, so the root is
/// `Original(0)`.
pub fn materialize<O: NeighborOracle>(
    oracle: &O,
    truncation: u32,
    max_vertices: usize,
) -> Result<Materialized<O::Node>> {
    let root = oracle.root();
    let mut order: Vec<O::Node> = vec![root.clone()];
    let mut index: HashMap<O::Node, u64> = HashMap::from([(root, 0)]);
    let mut queue = VecDeque::from([0usize]);
    let mut edges = Vec::new();
    let mut external: BTreeMap<VertexId, f64> = BTreeMap::new();
    while let Some(i) = queue.pop_front() {
        let node = order[i].clone();
        let lvl = oracle.level(&node);
        for (nb, w) in oracle.neighbors(&node) {
            if oracle.level(&nb) > truncation {
                *external.entry(VertexId::Original(i as u64)).or_insert(0.0) += w;
                continue;
            }
            let j = match index.get(&nb) {
                Some(&j) => j,
                None => {
                    if order.len() >= max_vertices {
                        return Err(Error::Overflow(format!(
                            "more than {max_vertices} vertices before level {truncation} (reached level {lvl})"
                        )));
                    }
                    let j = order.len() as u64;
                    index.insert(nb.clone(), j);
                    order.push(nb);
                    queue.push_back(j as usize);
                    j
                }
            };
            if (i as u64) < j {
                edges.push((VertexId::Original(i as u64), VertexId::Original(j), w));
            }
        }
    }
    let mu: BTreeMap<VertexId, f64> = order
        .iter()
        .enumerate()
        .map(|(i, n)| (VertexId::Original(i as u64), oracle.measure(n)))
        .collect();
    let graph = build_truncated_graph(&edges, &mu, &external)?;
    // Sorted ids Original(0..n) coincide with discovery order.
    let levels = order.iter().map(|n| oracle.level(n)).collect();
    Ok(Materialized {
        graph,
        nodes: order,
        levels,
    })
}

/// A generated family truncation with its adapted weight.
#[derive(Debug, Clone)]
pub struct FamilyGraph {
    pub spec: FamilySpec,
    pub graph: WeightedGraph,
    pub sigma: AdaptedWeight,
    /// Generation level of each vertex, by vertex index.
    pub levels: Vec<u32>,
    pub root: VertexId,
}

/// `⌊(n+2)^α (ln(n+3))^β⌋`, the number of next-level neighbours at level `n`.
pub fn branching(alpha: f64, beta: f64, n: u32) -> u64 {
    let n = n as f64;
    ((n + 2.0).powf(alpha) * (n + 3.0).ln().powf(beta)).floor() as u64
}

/// Birth–death chain on the non-negative integers.
#[derive(Debug, Clone)]
pub struct BirthDeath {
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
}

impl BirthDeath {
    /// `w(n, n+1) = ½ (n+1)² (ln(n+2))^β (ln ln(n+3))^γ`.
    pub fn weight(&self, n: u64) -> f64 {
        let x = n as f64;
        0.5 * (x + 1.0).powi(2) * (x + 2.0).ln().powf(self.beta) * (x + 3.0).ln().ln().powf(self.gamma)
    }
}

impl NeighborOracle for BirthDeath {
    type Node = u64;

    fn root(&self) -> u64 {
        0
    }

    fn level(&self, v: &u64) -> u32 {
        u32::try_from(*v).unwrap_or(u32::MAX)
    }

    fn measure(&self, _: &u64) -> f64 {
        self.mu
    }

    fn neighbors(&self, &n: &u64) -> Vec<(u64, f64)> {
        let mut out = Vec::with_capacity(2);
        if n > 0 {
            out.push((n - 1, self.weight(n - 1)));
        }
        out.push((n + 1, self.weight(n)));
        out
    }
}

/// Anti-tree: every vertex of sphere `S_n` is joined to every vertex of `S_{n+1}`.
#[derive(Debug, Clone)]
pub struct AntiTree {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
}

impl AntiTree {
    pub fn sphere_size(&self, n: u32) -> u64 {
        if n == 0 {
            1
        } else {
            branching(self.alpha, self.beta, n - 1).max(1)
        }
    }
}

impl NeighborOracle for AntiTree {
    /// `(level, index within the sphere)`.
    type Node = (u32, u64);

    fn root(&self) -> (u32, u64) {
        (0, 0)
    }

    fn level(&self, v: &(u32, u64)) -> u32 {
        v.0
    }

    fn measure(&self, _: &(u32, u64)) -> f64 {
        self.mu
    }

    fn neighbors(&self, &(n, _): &(u32, u64)) -> Vec<((u32, u64), f64)> {
        let mut out = Vec::new();
        if n > 0 {
            out.extend((0..self.sphere_size(n - 1)).map(|j| ((n - 1, j), 1.0)));
        }
        out.extend((0..self.sphere_size(n + 1)).map(|j| ((n + 1, j), 1.0)));
        out
    }
}

/// Spherically symmetric rooted tree; a vertex at level `n` has
/// `⌊(n+2)^α (ln(n+3))^β⌋` children.
#[derive(Debug, Clone)]
pub struct Tree {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
}

impl Tree {
    pub fn children(&self, n: u32) -> u64 {
        branching(self.alpha, self.beta, n).max(1)
    }
}

impl NeighborOracle for Tree {
    /// `(level, index within the level)`; child `j` of `(n, i)` is
    /// `(n+1, i·b(n) + j)`.
    type Node = (u32, u64);

    fn root(&self) -> (u32, u64) {
        (0, 0)
    }

    fn level(&self, v: &(u32, u64)) -> u32 {
        v.0
    }

    fn measure(&self, _: &(u32, u64)) -> f64 {
        self.mu
    }

    fn neighbors(&self, &(n, i): &(u32, u64)) -> Vec<((u32, u64), f64)> {
        let mut out = Vec::new();
        if n > 0 {
            out.push(((n - 1, i / self.children(n - 1)), 1.0));
        }
        let b = self.children(n);
        let first = i.saturating_mul(b);
        out.extend((0..b).map(|j| ((n + 1, first.saturating_add(j)), 1.0)));
        out
    }
}

/// `ℤ^d` with `w(x,y) = (m+2)^α (ln(m+3))^β`, `m = min(|x|, |y|)` in the L¹ norm.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub d: u32,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
}

impl Lattice {
    pub fn weight_at_norm(&self, m: u64) -> f64 {
        let m = m as f64;
        (m + 2.0).powf(self.alpha) * (m + 3.0).ln().powf(self.beta)
    }
}

fn l1(x: &[i64]) -> u64 {
    x.iter().map(|c| c.unsigned_abs()).sum()
}

impl NeighborOracle for Lattice {
    type Node = Vec<i64>;

    fn root(&self) -> Vec<i64> {
        vec![0; self.d as usize]
    }

    fn level(&self, v: &Vec<i64>) -> u32 {
        u32::try_from(l1(v)).unwrap_or(u32::MAX)
    }

    fn measure(&self, _: &Vec<i64>) -> f64 {
        self.mu
    }

    fn neighbors(&self, x: &Vec<i64>) -> Vec<(Vec<i64>, f64)> {
        let nx = l1(x);
        let mut out = Vec::with_capacity(2 * x.len());
        for i in 0..x.len() {
            for step in [-1i64, 1] {
                let mut y = x.clone();
                y[i] += step;
                let w = self.weight_at_norm(nx.min(l1(&y)));
                out.push((y, w));
            }
        }
        out
    }
}

/// Materializes a family with its adapted weight.
pub fn generate(spec: &FamilySpec) -> Result<FamilyGraph> {
    match spec.kind {
        FamilyKind::BirthDeath => make_birth_death(spec),
        FamilyKind::AntiTree => make_anti_tree(spec),
        FamilyKind::Tree => make_tree(spec),
        FamilyKind::Lattice => make_lattice(spec),
    }
}

fn check_kind(spec: &FamilySpec, kind: FamilyKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::InvalidConfig(format!(
            "expected a {kind:?} spec, got {:?}",
            spec.kind
        )));
    }
    Ok(())
}

fn finish<N>(spec: &FamilySpec, m: Materialized<N>, sigma: AdaptedWeight) -> FamilyGraph {
    FamilyGraph {
        spec: spec.clone(),
        graph: m.graph,
        sigma,
        levels: m.levels,
        root: VertexId::Original(0),
    }
}

/// Birth–death chain with `σ(n, n+1) = √(μ(n) / (2 w(n, n+1)))`.
pub fn make_birth_death(spec: &FamilySpec) -> Result<FamilyGraph> {
    check_kind(spec, FamilyKind::BirthDeath)?;
    let bd = BirthDeath {
        beta: spec.beta,
        gamma: spec.gamma,
        mu: spec.mu,
    };
    for n in 0..=spec.truncation as u64 {
        let w = bd.weight(n);
        if spec.mu > 2.0 * w {
            return Err(Error::AssumptionViolated(format!(
                "mu({n}) = {} > 2 w({n},{}) = {}",
                spec.mu,
                n + 1,
                2.0 * w
            )));
        }
    }
    let m = materialize(&bd, spec.truncation, spec.max_vertices)?;
    // On a path the vertex index equals the level; the lower endpoint carries μ(n).
    let sigma = AdaptedWeight::from_fn(&m.graph, |x, y, w| (m.graph.measure(x.min(y)) / (2.0 * w)).sqrt());
    Ok(finish(spec, m, sigma))
}

pub fn make_anti_tree(spec: &FamilySpec) -> Result<FamilyGraph> {
    check_kind(spec, FamilyKind::AntiTree)?;
    let at = AntiTree {
        alpha: spec.alpha,
        beta: spec.beta,
        mu: spec.mu,
    };
    let m = materialize(&at, spec.truncation, spec.max_vertices)?;
    let sigma = default_adapted_weight(&m.graph);
    Ok(finish(spec, m, sigma))
}

pub fn make_tree(spec: &FamilySpec) -> Result<FamilyGraph> {
    check_kind(spec, FamilyKind::Tree)?;
    let t = Tree {
        alpha: spec.alpha,
        beta: spec.beta,
        mu: spec.mu,
    };
    let m = materialize(&t, spec.truncation, spec.max_vertices)?;
    let sigma = default_adapted_weight(&m.graph);
    Ok(finish(spec, m, sigma))
}

pub fn make_lattice(spec: &FamilySpec) -> Result<FamilyGraph> {
    check_kind(spec, FamilyKind::Lattice)?;
    let l = Lattice {
        d: spec.d,
        alpha: spec.alpha,
        beta: spec.beta,
        mu: spec.mu,
    };
    let m = materialize(&l, spec.truncation, spec.max_vertices)?;
    let sigma = default_adapted_weight(&m.graph);
    Ok(finish(spec, m, sigma))
}

/// Growth of `log μ(B(x̄, r))` for large `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum VolumeClass {
    /// `μ(B(r)) ≍ r^D`, i.e. `log μ(B(r)) ≍ log r`.
    Polynomial { degree: f64 },
    /// `log μ(B(r)) ≍ r^α` with `0 < α < 2`.
    StretchedExp { alpha: f64 },
    /// `log μ(B(r)) ≍ r²`.
    Gaussian,
    /// `log μ(B(r)) ≍ r² log r`.
    SuperGaussian,
    /// `log μ(B(r)) ≍ r^p (log r)^q` for other exponents.
    PowerLog { power: f64, log_power: f64 },
    /// `log μ(B(r)) ≍ exp(c r^p)`.
    ExpPower { power: f64 },
    /// `log μ(B(r)) ≍ exp(exp(c r))`.
    DoubleExp,
    /// Balls of large finite radius have infinite measure.
    Infinite,
}

impl VolumeClass {
    /// Normalizes `r^p (log r)^q` onto the named classes where they apply.
    pub fn power_log(power: f64, log_power: f64) -> VolumeClass {
        if log_power == 0.0 && power > 0.0 && power < 2.0 {
            VolumeClass::StretchedExp { alpha: power }
        } else if log_power == 0.0 && power == 2.0 {
            VolumeClass::Gaussian
        } else if log_power == 1.0 && power == 2.0 {
            VolumeClass::SuperGaussian
        } else {
            VolumeClass::PowerLog { power, log_power }
        }
    }
}

/// Functional form of an upper rate function `φ(t)` up to the constant `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum RateForm {
    /// `c √(t log t)`.
    SqrtTLogT,
    /// `c t^a (log t)^b`.
    Power { exponent: f64, log_exponent: f64 },
    /// `exp(c t^p)`.
    ExpPower { exponent: f64 },
    /// `e^{ct}`.
    Exp,
    /// `exp(exp(ct))`.
    DoubleExp,
}

impl RateForm {
    /// Evaluates the form at `t > 1`.
    pub fn eval(&self, c: f64, t: f64) -> f64 {
        match *self {
            RateForm::SqrtTLogT => c * (t * t.ln()).sqrt(),
            RateForm::Power { exponent, log_exponent } => c * t.powf(exponent) * t.ln().powf(log_exponent),
            RateForm::ExpPower { exponent } => (c * t.powf(exponent)).exp(),
            RateForm::Exp => (c * t).exp(),
            RateForm::DoubleExp => (c * t).exp().exp(),
        }
    }

    /// Smallest `c >= 0` with `d <= eval(c, t)`, for `t > 1` and `d >= 0`.
    pub fn required_constant(&self, d: f64, t: f64) -> f64 {
        let c = match *self {
            RateForm::SqrtTLogT => d / (t * t.ln()).sqrt(),
            RateForm::Power { exponent, log_exponent } => d / (t.powf(exponent) * t.ln().powf(log_exponent)),
            RateForm::ExpPower { exponent } => d.ln() / t.powf(exponent),
            RateForm::Exp => d.ln() / t,
            RateForm::DoubleExp if d > std::f64::consts::E => d.ln().ln() / t,
            RateForm::DoubleExp => 0.0,
        };
        c.max(0.0)
    }

    pub fn label(&self) -> String {
        match *self {
            RateForm::SqrtTLogT => "c*sqrt(t*log t)".into(),
            RateForm::Power {
                exponent,
                log_exponent: 0.0,
            } => format!("c*t^{exponent}"),
            RateForm::Power { exponent, log_exponent } => format!("c*t^{exponent}*(log t)^{log_exponent}"),
            RateForm::ExpPower { exponent } => format!("exp(c*t^{exponent})"),
            RateForm::Exp => "exp(c*t)".into(),
            RateForm::DoubleExp => "exp(exp(c*t))".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conservative {
    Yes,
    No,
    /// The volume-growth criterion does not decide this regime.
    OutsideTheorem,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticClass {
    pub volume_class: VolumeClass,
    pub conservative: Conservative,
    /// Set only when `conservative == Yes`.
    pub rate_form: Option<RateForm>,
    /// The volume-growth criterion is known not to be sharp for this family.
    pub non_sharp: bool,
}

/// Published classification of a family regime.
pub fn classify_family(spec: &FamilySpec) -> Result<AsymptoticClass> {
    let (a, b, g) = (spec.alpha, spec.beta, spec.gamma);
    if [a, b, g].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::UnclassifiedRegime(format!(
            "negative or non-finite parameters (alpha={a}, beta={b}, gamma={g})"
        )));
    }
    let yes = |volume_class, rate: RateForm, non_sharp| AsymptoticClass {
        volume_class,
        conservative: Conservative::Yes,
        rate_form: Some(rate),
        non_sharp,
    };
    let other = |volume_class, conservative, non_sharp| AsymptoticClass {
        volume_class,
        conservative,
        rate_form: None,
        non_sharp,
    };
    let beyond = |v: VolumeClass, sharp: bool| {
        let verdict = if v == VolumeClass::Infinite || !sharp {
            Conservative::OutsideTheorem
        } else {
            Conservative::No
        };
        other(v, verdict, !sharp)
    };
    Ok(match spec.kind {
        FamilyKind::BirthDeath => {
            let volume = if b < 2.0 {
                VolumeClass::power_log(2.0 / (2.0 - b), g / (2.0 - b))
            } else if b == 2.0 && g < 2.0 {
                VolumeClass::ExpPower { power: 2.0 / (2.0 - g) }
            } else if b == 2.0 && g == 2.0 {
                VolumeClass::DoubleExp
            } else {
                VolumeClass::Infinite
            };
            if b < 1.0 {
                let e = 2.0 - 2.0 * b;
                yes(
                    volume,
                    RateForm::Power {
                        exponent: (2.0 - b) / e,
                        log_exponent: g / e,
                    },
                    false,
                )
            } else if b == 1.0 && g < 1.0 {
                yes(
                    volume,
                    RateForm::ExpPower {
                        exponent: 1.0 / (1.0 - g),
                    },
                    false,
                )
            } else if b == 1.0 && g == 1.0 {
                yes(volume, RateForm::DoubleExp, false)
            } else {
                beyond(volume, true)
            }
        }
        FamilyKind::AntiTree | FamilyKind::Lattice => {
            let volume = if a < 2.0 {
                let degree = match spec.kind {
                    FamilyKind::AntiTree => 2.0 * (a + 1.0) / (2.0 - a),
                    _ => 2.0 * spec.d as f64 / (2.0 - a),
                };
                VolumeClass::Polynomial { degree }
            } else if a == 2.0 && b < 2.0 {
                VolumeClass::power_log(2.0 / (2.0 - b), 0.0)
            } else if a == 2.0 && b == 2.0 {
                VolumeClass::ExpPower { power: 1.0 }
            } else {
                VolumeClass::Infinite
            };
            if a < 2.0 {
                yes(volume, RateForm::SqrtTLogT, false)
            } else if a == 2.0 && b < 1.0 {
                yes(
                    volume,
                    RateForm::Power {
                        exponent: (2.0 - b) / (2.0 - 2.0 * b),
                        log_exponent: 0.0,
                    },
                    false,
                )
            } else if a == 2.0 && b == 1.0 {
                yes(volume, RateForm::Exp, false)
            } else {
                beyond(volume, spec.kind == FamilyKind::AntiTree)
            }
        }
        FamilyKind::Tree => {
            let volume = if a < 2.0 {
                VolumeClass::power_log(2.0 / (2.0 - a), 1.0 + b / (2.0 - a))
            } else if a == 2.0 && b < 2.0 {
                VolumeClass::ExpPower { power: 2.0 / (2.0 - b) }
            } else if a == 2.0 && b == 2.0 {
                VolumeClass::DoubleExp
            } else {
                VolumeClass::Infinite
            };
            if a < 1.0 {
                let e = 2.0 - 2.0 * a;
                yes(
                    volume,
                    RateForm::Power {
                        exponent: (2.0 - a) / e,
                        log_exponent: (2.0 - a + b) / e,
                    },
                    true,
                )
            } else if a == 1.0 && b == 0.0 {
                yes(volume, RateForm::Exp, true)
            } else if a == 1.0 && b > 1.0 {
                other(volume, Conservative::No, true)
            } else {
                beyond(volume, false)
            }
        }
    })
}
