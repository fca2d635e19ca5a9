//! The net file format: one JSON object per file describing a quotient
//! graph, its period, and optionally vertex positions.
//!
//! Vertex names live only in this format; the core works with indices.
//! Parsing followed by serializing is byte-stable modulo whitespace.

use serde::{Deserialize, Serialize};

use netelast::linalg::Matrix;
use netelast::net::{EdgeOrbit, LatticeOffset, PeriodMap, QuotientGraph, Realization};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetEdge {
    pub from: String,
    pub to: String,
    pub offset: Vec<i64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFile {
    pub dim: usize,
    pub vertices: Vec<String>,
    pub edges: Vec<NetEdge>,
    /// Row-major `dim x dim` period basis; columns are the lattice
    /// generators.
    pub period: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Vec<f64>>>,
}

impl NetFile {
    pub fn parse(text: &str) -> Result<NetFile, String> {
        serde_json::from_str(text).map_err(|e| format!("invalid net file: {e}"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("net file serializes")
    }

    /// Validates and converts to the core types.
    pub fn to_net(&self) -> Result<(QuotientGraph, PeriodMap), String> {
        if self.period.len() != self.dim * self.dim {
            return Err(format!(
                "period has {} entries, expected {}",
                self.period.len(),
                self.dim * self.dim
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &self.vertices {
            if !seen.insert(name) {
                return Err(format!("duplicate vertex name `{name}`"));
            }
        }
        let index_of = |name: &str| -> Result<usize, String> {
            self.vertices
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| format!("unknown vertex name `{name}`"))
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            edges.push(EdgeOrbit::new(
                index_of(&e.from)?,
                index_of(&e.to)?,
                LatticeOffset(e.offset.clone()),
                e.weight,
            ));
        }
        let graph = QuotientGraph::build(self.dim, self.vertices.len(), edges)
            .map_err(|e| e.to_string())?;
        let mut basis = Matrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                basis[(i, j)] = self.period[i * self.dim + j];
            }
        }
        let period = PeriodMap::new(basis).map_err(|e| e.to_string())?;
        Ok((graph, period))
    }

    /// Positions from the file, checked against the graph shape.
    pub fn realization(&self, period: &PeriodMap) -> Result<Option<Realization>, String> {
        match &self.positions {
            None => Ok(None),
            Some(positions) => {
                if positions.len() != self.vertices.len()
                    || positions.iter().any(|p| p.len() != self.dim)
                {
                    return Err("positions do not match the vertex list".into());
                }
                Ok(Some(Realization {
                    positions: positions.clone(),
                    period: period.clone(),
                }))
            }
        }
    }

    /// Builds a file from core values with `v0, v1, ...` names.
    pub fn from_net(
        graph: &QuotientGraph,
        period: &PeriodMap,
        positions: Option<&Realization>,
    ) -> NetFile {
        let vertices: Vec<String> = (0..graph.vertex_count()).map(|i| format!("v{i}")).collect();
        let edges = graph
            .edges()
            .iter()
            .map(|e| NetEdge {
                from: vertices[e.tail].clone(),
                to: vertices[e.head].clone(),
                offset: e.offset.0.clone(),
                weight: e.weight,
            })
            .collect();
        let dim = graph.dimension();
        let mut flat = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                flat.push(period.basis()[(i, j)]);
            }
        }
        NetFile {
            dim,
            vertices,
            edges,
            period: flat,
            positions: positions.map(|r| r.positions.clone()),
        }
    }
}
