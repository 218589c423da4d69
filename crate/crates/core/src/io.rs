//! JSON graph files.
//!
//! ```json
//! {
//!   "vertices": ["0", "1", "0-1/1"],
//!   "edges": [{"u": "0", "v": "0-1/1", "w": 2.0}, {"u": "0-1/1", "v": "1", "w": 2.0}],
//!   "mu": {"0": 1.0, "1": 1.0, "0-1/1": 1.0},
//!   "external": {"1": 0.5},
//!   "sigma": {"edges": [{"u": "0", "v": "0-1/1", "sigma": 0.5}, {"u": "0-1/1", "v": "1", "sigma": 0.5}]},
//!   "provenance": {
//!     "edges": [{"u": "0", "v": "1", "n": 2, "w_o": 1.0, "sigma_o": 1.0}],
//!     "original_external": {"1": 0.25}
//!   }
//! }
//! ```
//!
//! Vertex ids are strings: `"17"` for an original vertex and `"lo-hi/k"` for
//! the `k`-th subdivision point of the original edge `lo -- hi`. `external`
//! holds conductance towards vertices beyond a truncation and may be omitted.
//! `sigma` and `provenance` are optional; `provenance` marks a subdivided
//! graph and is enough to rebuild the graph it came from. Floats are written
//! in shortest round-trip form.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_truncated_graph, AdaptedWeight, VertexId, WeightedGraph};
use crate::modify::{subdivide, ModifiedGraph, SubdivisionPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: VertexId,
    pub v: VertexId,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRecord {
    pub u: VertexId,
    pub v: VertexId,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSection {
    pub edges: Vec<SigmaRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub u: VertexId,
    pub v: VertexId,
    pub n: u32,
    pub w_o: f64,
    pub sigma_o: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceSection {
    pub edges: Vec<ProvenanceRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub original_external: BTreeMap<VertexId, f64>,
}

/// On-disk layout of a graph file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeRecord>,
    pub mu: BTreeMap<VertexId, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub external: BTreeMap<VertexId, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<SigmaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<ProvenanceSection>,
}

/// Contents of a graph file after validation.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: WeightedGraph,
    pub sigma: Option<AdaptedWeight>,
    pub modified: Option<ModifiedGraph>,
}

impl GraphFile {
    pub fn from_graph(g: &WeightedGraph, sigma: Option<&AdaptedWeight>) -> Self {
        let edges = g
            .edges()
            .map(|(x, y, a)| EdgeRecord {
                u: g.id(x),
                v: g.id(y),
                w: g.arc_weight(a),
            })
            .collect();
        let sigma = sigma.map(|s| SigmaSection {
            edges: g
                .edges()
                .map(|(x, y, a)| SigmaRecord {
                    u: g.id(x),
                    v: g.id(y),
                    sigma: s.arc(a),
                })
                .collect(),
        });
        GraphFile {
            vertices: g.ids().to_vec(),
            edges,
            mu: g.ids().iter().copied().zip(g.measures().iter().copied()).collect(),
            external: (0..g.len())
                .filter(|&i| g.is_boundary(i))
                .map(|i| (g.id(i), g.external(i)))
                .collect(),
            sigma,
            provenance: None,
        }
    }

    pub fn from_modified(m: &ModifiedGraph) -> Self {
        let mut file = Self::from_graph(&m.graph, Some(&m.sigma));
        let go = &m.original;
        file.provenance = Some(ProvenanceSection {
            edges: m
                .provenance()
                .into_iter()
                .map(|p| ProvenanceRecord {
                    u: VertexId::Original(p.lo),
                    v: VertexId::Original(p.hi),
                    n: p.n,
                    w_o: p.w_o,
                    sigma_o: p.sigma_o,
                })
                .collect(),
            original_external: (0..go.len())
                .filter(|&i| go.is_boundary(i))
                .map(|i| (go.id(i), go.external(i)))
                .collect(),
        });
        file
    }

    pub fn into_graph(self) -> Result<LoadedGraph> {
        let listed: std::collections::BTreeSet<VertexId> = self.vertices.iter().copied().collect();
        for v in self.mu.keys() {
            if !listed.contains(v) {
                return Err(Error::UnknownVertex(*v));
            }
        }
        if let Some(v) = self.vertices.iter().find(|v| !self.mu.contains_key(v)) {
            return Err(Error::Parse(format!("vertex {v} has no measure")));
        }
        let edges: Vec<_> = self.edges.iter().map(|e| (e.u, e.v, e.w)).collect();
        let graph = build_truncated_graph(&edges, &self.mu, &self.external)?;
        let sigma = match &self.sigma {
            Some(s) => {
                let recs: Vec<_> = s.edges.iter().map(|e| (e.u, e.v, e.sigma)).collect();
                Some(AdaptedWeight::from_edges(&graph, &recs)?)
            }
            None => None,
        };
        let modified = match &self.provenance {
            Some(p) => Some(rebuild_modified(&graph, sigma.as_ref(), p)?),
            None => None,
        };
        Ok(LoadedGraph { graph, sigma, modified })
    }
}

fn rebuild_modified(g: &WeightedGraph, sigma: Option<&AdaptedWeight>, p: &ProvenanceSection) -> Result<ModifiedGraph> {
    let mu_o: BTreeMap<VertexId, f64> = (0..g.len())
        .filter(|&i| g.id(i).is_original())
        .map(|i| (g.id(i), g.measure(i)))
        .collect();
    let edges: Vec<_> = p.edges.iter().map(|e| (e.u, e.v, e.w_o)).collect();
    let go = build_truncated_graph(&edges, &mu_o, &p.original_external)?;
    let recs: Vec<_> = p.edges.iter().map(|e| (e.u, e.v, e.sigma_o)).collect();
    let sigma_o = AdaptedWeight::from_edges(&go, &recs)?;
    let mut plan = SubdivisionPlan::new();
    for e in &p.edges {
        let (u, v) = match (e.u.original_index(), e.v.original_index()) {
            (Some(u), Some(v)) => (u, v),
            _ => return Err(Error::NestedSubdivision(e.u)),
        };
        plan.set(u, v, e.n);
    }
    let m = subdivide(&go, &sigma_o, &plan)?;
    if m.graph.ids() != g.ids() {
        return Err(Error::Parse(
            "provenance does not reproduce the stored vertex set".into(),
        ));
    }
    if let Some(s) = sigma {
        if s.arc_values() != m.sigma.arc_values() {
            return Err(Error::Parse(
                "stored sigma differs from the subdivision of the provenance data".into(),
            ));
        }
    }
    Ok(m)
}

pub fn save_graph_file(path: &Path, file: &GraphFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn save_graph(path: &Path, g: &WeightedGraph, sigma: Option<&AdaptedWeight>) -> Result<()> {
    save_graph_file(path, &GraphFile::from_graph(g, sigma))
}

pub fn save_modified(path: &Path, m: &ModifiedGraph) -> Result<()> {
    save_graph_file(path, &GraphFile::from_modified(m))
}

pub fn parse_graph(text: &str) -> Result<LoadedGraph> {
    let file: GraphFile = serde_json::from_str(text)?;
    file.into_graph()
}

pub fn load_graph(path: &Path) -> Result<LoadedGraph> {
    parse_graph(&fs::read_to_string(path)?)
}
