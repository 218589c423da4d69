//! Potential `u` and positive super-solution `φ` with `(Δ + u) φ >= 0` on a
//! subdivided graph.
//!
//! `u = C₂` on original vertices and `u = -C₁` on subdivision points; `φ = 1`
//! on original vertices and along each subdivided edge
//! `φ(x_k) = sin(kθ + (π - nθ)/2) / cos(nθ/2)` with
//! `cos θ = 1 - C₁ σ_o² / n²`. The constants are `C₁ = 1/(2M₁²)`,
//! `C₂ = M₁/2`, `C₃ = √2`, where `M₁ = trig_constant(1/2)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{laplacian_at, VertexId, WeightedGraph};
use crate::modify::ModifiedGraph;

const GRID: usize = 4096;

/// Smallest `M` with `θ/M <= sin θ`, `tan θ <= Mθ` and
/// `θ²/(2M²) <= 1 - cos θ` for every `θ ∈ [0, θ_max]`. The remaining
/// inequalities `sin θ <= θ <= tan θ` and `1 - cos θ <= θ²/2` hold for free.
pub fn trig_constant(theta_max: f64) -> Result<f64> {
    if !(theta_max > 0.0 && theta_max < FRAC_PI_2) {
        return Err(Error::DomainError(format!(
            "theta_max = {theta_max} must lie in (0, pi/2)"
        )));
    }
    let ratio = |t: f64| {
        let half = (t / 2.0).sin();
        let versine = 2.0 * half * half;
        (t / t.sin()).max(t.tan() / t).max(t / (2.0 * versine).sqrt())
    };
    let mut best = (1.0, 0.0);
    for i in 1..=GRID {
        let t = theta_max * i as f64 / GRID as f64;
        let r = ratio(t);
        if r > best.0 {
            best = (r, t);
        }
    }
    // Golden-section refinement around the best grid point.
    let h = theta_max / GRID as f64;
    let (mut a, mut b) = ((best.1 - h).max(f64::MIN_POSITIVE), (best.1 + h).min(theta_max));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if ratio(c) > ratio(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(best.0.max(ratio(0.5 * (a + b))).max(1.0))
}

/// Constants of the super-solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchrodingerConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub m1: f64,
}

impl SchrodingerConstants {
    pub fn new() -> Self {
        let m1 = trig_constant(0.5).expect("1/2 is in range");
        SchrodingerConstants {
            c1: 1.0 / (2.0 * m1 * m1),
            c2: m1 / 2.0,
            c3: 2f64.sqrt(),
            m1,
        }
    }

    /// `C₁ / (C₁ + C₂)`, the occupation-fraction floor implied by the constants.
    pub fn occupation_floor(&self) -> f64 {
        self.c1 / (self.c1 + self.c2)
    }
}

impl Default for SchrodingerConstants {
    fn default() -> Self {
        Self::new()
    }
}

/// `θ` for an edge with original length `σ_o` and count `n`. Uses
/// `1 - cos θ = 2 sin²(θ/2)`; `acos` of a value near 1 loses half the digits.
pub fn edge_angle(c1: f64, sigma_o: f64, n: u32) -> f64 {
    let n = n as f64;
    let half = (c1 * sigma_o * sigma_o / (2.0 * n * n)).min(1.0);
    2.0 * half.sqrt().asin()
}

/// `φ(x_k) = sin(kθ + (π - nθ)/2) / cos(nθ/2)`; equals 1 at `k = 0` and `k = n`.
pub fn phi_on_edge(theta: f64, n: u32, k: u32) -> f64 {
    let nt = n as f64 * theta;
    (k as f64 * theta + (PI - nt) / 2.0).sin() / (nt / 2.0).cos()
}

/// `φ(x_{k+1}) - φ(x_k)` via `sin b - sin a = 2 cos((a+b)/2) sin((b-a)/2)`,
/// accurate to relative rounding even when `θ` is tiny.
pub fn phi_step(theta: f64, n: u32, k: u32) -> f64 {
    let nt = n as f64 * theta;
    let mid = (k as f64 + 0.5) * theta + (PI - nt) / 2.0;
    2.0 * mid.cos() * (theta / 2.0).sin() / (nt / 2.0).cos()
}

/// Potential and super-solution, indexed like the modified graph's vertices.
/// Fields are public so that deliberately broken pairs can be checked.
#[derive(Debug, Clone)]
pub struct SchrodingerPair {
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    /// `φ(target) - φ(source)` per arc of the modified graph, from the closed
    /// form. Differencing stored values loses everything below `ε·φ`, which
    /// the large conductances deep in a truncation amplify.
    pub increments: Vec<f64>,
    pub constants: SchrodingerConstants,
}

pub fn build_schrodinger_pair(m: &ModifiedGraph) -> Result<SchrodingerPair> {
    let constants = SchrodingerConstants::new();
    let g = &m.graph;
    let mut u = vec![0.0; g.len()];
    let mut phi = vec![1.0; g.len()];
    for i in 0..g.len() {
        match g.id(i) {
            VertexId::Original(_) => u[i] = constants.c2,
            v @ VertexId::Subdivision { k, .. } => {
                let (n, _, sigma_o) = m
                    .edge_of(v)
                    .ok_or_else(|| Error::Parse(format!("no original edge for {v}")))?;
                u[i] = -constants.c1;
                phi[i] = phi_on_edge(edge_angle(constants.c1, sigma_o, n), n, k);
            }
        }
    }
    let mut increments = vec![0.0; g.arc_count()];
    for i in 0..g.len() {
        for a in g.arcs(i) {
            let j = g.arc_target(a);
            increments[a] = match edge_positions(m, &constants, g.id(i), g.id(j)) {
                Some((theta, n, ki, kj)) if kj == ki + 1 => phi_step(theta, n, ki),
                Some((theta, n, ki, kj)) if ki == kj + 1 => -phi_step(theta, n, kj),
                _ => phi[j] - phi[i],
            };
        }
    }
    Ok(SchrodingerPair {
        u,
        phi,
        increments,
        constants,
    })
}

/// `(θ, n, k_x, k_y)` when `x` and `y` lie on one subdivided edge.
fn edge_positions(
    m: &ModifiedGraph,
    constants: &SchrodingerConstants,
    x: VertexId,
    y: VertexId,
) -> Option<(f64, u32, u32, u32)> {
    let s = if x.is_original() { y } else { x };
    let VertexId::Subdivision { lo, hi, .. } = s else {
        return None;
    };
    let (n, _, sigma_o) = m.edge_of(s)?;
    let pos = |v: VertexId| match v {
        VertexId::Subdivision { lo: l, hi: h, k } if (l, h) == (lo, hi) => Some(k),
        VertexId::Original(i) if i == lo => Some(0),
        VertexId::Original(i) if i == hi => Some(n),
        _ => None,
    };
    Some((edge_angle(constants.c1, sigma_o, n), n, pos(x)?, pos(y)?))
}

/// Outcome of [`verify_supersolution`].
#[derive(Debug, Clone, Serialize)]
pub struct SupersolutionReport {
    /// Minimum of `(Δ + u) φ` over checked vertices.
    pub min_value: f64,
    pub argmin: Option<VertexId>,
    /// `(vertex, (Δ + u) φ)` for every checked vertex.
    pub residuals: Vec<(VertexId, f64)>,
    /// Truncation-boundary vertices left out because neighbours are missing.
    pub excluded: Vec<VertexId>,
    /// Largest `|Δφ - C₁φ|` over checked subdivision points.
    pub case1_max_error: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl SupersolutionReport {
    pub fn passed(&self) -> bool {
        self.min_value >= -1e-9
    }
}

/// `Δφ(x)` using the pair's increments wherever they agree with the stored
/// values to rounding, and plain differences elsewhere.
fn laplacian(g: &WeightedGraph, pair: &SchrodingerPair, x: usize) -> f64 {
    if pair.increments.len() != g.arc_count() {
        return laplacian_at(g, &pair.phi, x);
    }
    let px = pair.phi[x];
    g.arcs(x)
        .map(|a| {
            let py = pair.phi[g.arc_target(a)];
            let inc = pair.increments[a];
            let tol = 8.0 * f64::EPSILON * px.abs().max(py.abs());
            let d = if ((py - px) - inc).abs() <= tol { inc } else { py - px };
            -g.arc_weight(a) * d
        })
        .sum::<f64>()
        / g.measure(x)
}

/// Evaluates `(Δ + u) φ` at every vertex whose neighbours are all materialized.
pub fn verify_supersolution(m: &ModifiedGraph, pair: &SchrodingerPair) -> Result<SupersolutionReport> {
    let g = &m.graph;
    if pair.u.len() != g.len() || pair.phi.len() != g.len() {
        return Err(Error::InvalidConfig(format!(
            "pair has {} / {} values for {} vertices",
            pair.u.len(),
            pair.phi.len(),
            g.len()
        )));
    }
    let mut rep = SupersolutionReport {
        min_value: f64::INFINITY,
        argmin: None,
        residuals: Vec::with_capacity(g.len()),
        excluded: Vec::new(),
        case1_max_error: 0.0,
        phi_min: f64::INFINITY,
        phi_max: f64::NEG_INFINITY,
    };
    for i in 0..g.len() {
        rep.phi_min = rep.phi_min.min(pair.phi[i]);
        rep.phi_max = rep.phi_max.max(pair.phi[i]);
        if g.is_boundary(i) {
            rep.excluded.push(g.id(i));
            continue;
        }
        let lap = laplacian(g, pair, i);
        let value = lap + pair.u[i] * pair.phi[i];
        if !g.id(i).is_original() {
            let err = (lap - pair.constants.c1 * pair.phi[i]).abs();
            rep.case1_max_error = rep.case1_max_error.max(err);
        }
        if value < rep.min_value {
            rep.min_value = value;
            rep.argmin = Some(g.id(i));
        }
        rep.residuals.push((g.id(i), value));
    }
    if rep.residuals.is_empty() {
        return Err(Error::TruncationTooSmall(
            "every vertex lies on the truncation boundary".into(),
        ));
    }
    Ok(rep)
}
