//! Weighted periodic graphs represented by their finite quotient.
//!
//! A periodic graph in dimension `N` is stored as a finite set of vertex
//! orbits together with edge orbits. Each edge orbit records the orbit
//! indices of its endpoints, an integer lattice offset (the translation
//! between the endpoint cells), and a non-negative weight. An orbit and
//! its reversal describe the same unoriented edge, so each orbit is kept
//! once in a canonical orientation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Element of the period lattice `Z^N`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticeOffset(pub Vec<i64>);

impl LatticeOffset {
    pub fn zero(dim: usize) -> Self {
        LatticeOffset(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn negated(&self) -> Self {
        LatticeOffset(self.0.iter().map(|&c| -c).collect())
    }

    pub fn plus(&self, other: &LatticeOffset) -> Self {
        LatticeOffset(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn minus(&self, other: &LatticeOffset) -> Self {
        LatticeOffset(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

/// One unoriented edge orbit: an edge from orbit `tail` in the reference
/// cell to orbit `head` in the cell shifted by `offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeOrbit {
    pub tail: usize,
    pub head: usize,
    pub offset: LatticeOffset,
    pub weight: f64,
}

impl EdgeOrbit {
    pub fn new(tail: usize, head: usize, offset: LatticeOffset, weight: f64) -> Self {
        EdgeOrbit {
            tail,
            head,
            offset,
            weight,
        }
    }

    /// True loop: both endpoints in the same cell of the same orbit.
    pub fn is_true_loop(&self) -> bool {
        self.tail == self.head && self.offset.is_zero()
    }

    /// Self-edge: same orbit at both ends, possibly across cells.
    pub fn is_self_edge(&self) -> bool {
        self.tail == self.head
    }

    fn canonical_key(&self) -> (usize, usize, LatticeOffset) {
        let fwd = (self.tail, self.head, self.offset.clone());
        let rev = (self.head, self.tail, self.offset.negated());
        if fwd <= rev {
            fwd
        } else {
            rev
        }
    }
}

/// One oriented edge instance at a vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Dart {
    /// Index into `QuotientGraph::edges`.
    pub orbit: usize,
    /// Whether this dart traverses the stored orbit against its orientation.
    pub reversed: bool,
    /// Orbit index of the far endpoint.
    pub other: usize,
    /// Offset of the far endpoint's cell as seen from this vertex.
    pub offset: LatticeOffset,
    pub weight: f64,
}

/// Finite quotient of a weighted periodic graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientGraph {
    dimension: usize,
    vertex_count: usize,
    edges: Vec<EdgeOrbit>,
}

impl QuotientGraph {
    /// Validates, canonicalizes, and merges parallel duplicates by
    /// summing their weights.
    pub fn build(dimension: usize, vertex_count: usize, edges: Vec<EdgeOrbit>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::ZeroDimension);
        }
        if vertex_count == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one vertex orbit".into(),
            ));
        }
        let mut merged: BTreeMap<(usize, usize, LatticeOffset), f64> = BTreeMap::new();
        for e in edges {
            if e.tail >= vertex_count {
                return Err(Error::VertexOutOfRange {
                    index: e.tail,
                    count: vertex_count,
                });
            }
            if e.head >= vertex_count {
                return Err(Error::VertexOutOfRange {
                    index: e.head,
                    count: vertex_count,
                });
            }
            if e.offset.dim() != dimension {
                return Err(Error::OffsetDimension {
                    expected: dimension,
                    found: e.offset.dim(),
                });
            }
            if e.weight < 0.0 {
                return Err(Error::NegativeWeight(e.weight));
            }
            *merged.entry(e.canonical_key()).or_insert(0.0) += e.weight;
        }
        let edges = merged
            .into_iter()
            .map(|((tail, head, offset), weight)| EdgeOrbit {
                tail,
                head,
                offset,
                weight,
            })
            .collect();
        Ok(QuotientGraph {
            dimension,
            vertex_count,
            edges,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[EdgeOrbit] {
        &self.edges
    }

    /// All darts originating at `v`. Both orientations of a self-edge
    /// appear, so a true loop contributes two darts with zero vector.
    pub fn darts_at(&self, v: usize) -> Vec<Dart> {
        let mut darts = Vec::new();
        for (idx, e) in self.edges.iter().enumerate() {
            if e.tail == v {
                darts.push(Dart {
                    orbit: idx,
                    reversed: false,
                    other: e.head,
                    offset: e.offset.clone(),
                    weight: e.weight,
                });
            }
            if e.head == v {
                darts.push(Dart {
                    orbit: idx,
                    reversed: true,
                    other: e.tail,
                    offset: e.offset.negated(),
                    weight: e.weight,
                });
            }
        }
        darts
    }

    /// Weighted degree: the sum of dart weights at `v`. A loop counts
    /// twice because it contributes two darts.
    pub fn degree(&self, v: usize) -> f64 {
        self.darts_at(v).iter().map(|d| d.weight).sum()
    }

    /// Connectivity of the quotient restricted to positive-weight edges,
    /// offsets ignored.
    pub fn is_positively_connected(&self) -> bool {
        let n = self.vertex_count;
        let mut adjacency = vec![Vec::new(); n];
        for e in &self.edges {
            if e.weight > 0.0 && e.tail != e.head {
                adjacency[e.tail].push(e.head);
                adjacency[e.head].push(e.tail);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }

    /// Sum of weights over unoriented orbits in canonical storage order.
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Re-chooses the representative of orbit `v` as its translate by
    /// `shift`, adjusting the offsets of incident edges. The caller is
    /// responsible for moving the stored position by `rho(shift)`.
    pub fn shift_representative(&self, v: usize, shift: &LatticeOffset) -> Result<QuotientGraph> {
        if v >= self.vertex_count {
            return Err(Error::VertexOutOfRange {
                index: v,
                count: self.vertex_count,
            });
        }
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let mut offset = e.offset.clone();
                if e.tail == v {
                    offset = offset.plus(shift);
                }
                if e.head == v {
                    offset = offset.minus(shift);
                }
                EdgeOrbit::new(e.tail, e.head, offset, e.weight)
            })
            .collect();
        QuotientGraph::build(self.dimension, self.vertex_count, edges)
    }
}

/// The period homomorphism as a matrix whose columns are the images of
/// the standard generators of `Z^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMap {
    basis: Matrix,
}

impl PeriodMap {
    pub fn new(basis: Matrix) -> Result<Self> {
        if !basis.is_square() {
            return Err(Error::InvalidParameter("period basis must be square".into()));
        }
        if basis.det() == 0.0 {
            return Err(Error::SingularPeriod);
        }
        Ok(PeriodMap { basis })
    }

    pub fn dimension(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// Image of a lattice element in `R^N`.
    pub fn apply(&self, offset: &LatticeOffset) -> Vec<f64> {
        let v: Vec<f64> = offset.0.iter().map(|&c| c as f64).collect();
        self.basis.matvec(&v)
    }

    /// Volume of the fundamental cell.
    pub fn covolume(&self) -> f64 {
        self.basis.det().abs()
    }

    /// Left-multiplies the basis by `a`.
    pub fn transformed(&self, a: &Matrix) -> Result<PeriodMap> {
        PeriodMap::new(a.matmul(&self.basis))
    }
}

/// Positions of the vertex-orbit representatives plus the period map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub positions: Vec<Vec<f64>>,
    pub period: PeriodMap,
}

impl Realization {
    pub fn dimension(&self) -> usize {
        self.period.dimension()
    }

    /// Vector of the stored orientation of an edge orbit:
    /// `x_head + rho(offset) - x_tail`.
    pub fn edge_vector(&self, e: &EdgeOrbit) -> Vec<f64> {
        let shift = self.period.apply(&e.offset);
        let head = linalg::add(&self.positions[e.head], &shift);
        linalg::sub(&head, &self.positions[e.tail])
    }

    /// Vector of a dart based at `v`.
    pub fn dart_vector(&self, v: usize, dart: &Dart) -> Vec<f64> {
        let shift = self.period.apply(&dart.offset);
        let far = linalg::add(&self.positions[dart.other], &shift);
        linalg::sub(&far, &self.positions[v])
    }
}

/// Built-in example lattices.
#[derive(Debug, Clone, PartialEq)]
pub enum LatticePreset {
    /// Loops plus the 1-skeleton of the hexagonal tiling: two vertex
    /// orbits, three non-loop edges of weight `w1`, one loop of weight
    /// `w0` on each vertex.
    Hexagonal { l: f64, w0: f64, w1: f64 },
    /// Square tiling with spacing `l`: one vertex orbit, a loop of weight
    /// `w0`, and edges of weight `w1` along both axes.
    Square { l: f64, w0: f64, w1: f64 },
    /// Cube lattice in dimension `n` with spacing `m`: one vertex orbit,
    /// loop weight `a`, unit-weight edges along each axis.
    Cubic { n: usize, a: f64, m: f64 },
    /// Single vertex orbit with an explicit weight table: a loop of
    /// weight `loop_weight` and an edge per listed offset.
    SingleVertex {
        period: Matrix,
        loop_weight: f64,
        edges: Vec<(LatticeOffset, f64)>,
    },
}

/// Builds a preset graph together with its standard period.
pub fn lattice_preset(preset: &LatticePreset) -> Result<(QuotientGraph, PeriodMap)> {
    match preset {
        LatticePreset::Hexagonal { l, w0, w1 } => {
            if *l <= 0.0 {
                return Err(Error::InvalidParameter("hexagonal spacing must be positive".into()));
            }
            let s3 = 3.0_f64.sqrt();
            let period = PeriodMap::new(Matrix::from_rows(&[
                vec![s3 * l, s3 / 2.0 * l],
                vec![0.0, 1.5 * l],
            ]))?;
            let graph = QuotientGraph::build(
                2,
                2,
                vec![
                    EdgeOrbit::new(0, 0, LatticeOffset::zero(2), *w0),
                    EdgeOrbit::new(1, 1, LatticeOffset::zero(2), *w0),
                    EdgeOrbit::new(0, 1, LatticeOffset(vec![0, 0]), *w1),
                    EdgeOrbit::new(0, 1, LatticeOffset(vec![-1, 0]), *w1),
                    EdgeOrbit::new(0, 1, LatticeOffset(vec![0, -1]), *w1),
                ],
            )?;
            Ok((graph, period))
        }
        LatticePreset::Square { l, w0, w1 } => {
            if *l <= 0.0 {
                return Err(Error::InvalidParameter("square spacing must be positive".into()));
            }
            let period = PeriodMap::new(Matrix::diagonal(&[*l, *l]))?;
            let graph = QuotientGraph::build(
                2,
                1,
                vec![
                    EdgeOrbit::new(0, 0, LatticeOffset::zero(2), *w0),
                    EdgeOrbit::new(0, 0, LatticeOffset(vec![1, 0]), *w1),
                    EdgeOrbit::new(0, 0, LatticeOffset(vec![0, 1]), *w1),
                ],
            )?;
            Ok((graph, period))
        }
        LatticePreset::Cubic { n, a, m } => {
            if *n == 0 {
                return Err(Error::ZeroDimension);
            }
            if *m <= 0.0 {
                return Err(Error::InvalidParameter("cube spacing must be positive".into()));
            }
            let period = PeriodMap::new(Matrix::diagonal(&vec![*m; *n]))?;
            let mut edges = vec![EdgeOrbit::new(0, 0, LatticeOffset::zero(*n), *a)];
            for k in 0..*n {
                let mut offset = vec![0; *n];
                offset[k] = 1;
                edges.push(EdgeOrbit::new(0, 0, LatticeOffset(offset), 1.0));
            }
            let graph = QuotientGraph::build(*n, 1, edges)?;
            Ok((graph, period))
        }
        LatticePreset::SingleVertex {
            period,
            loop_weight,
            edges,
        } => {
            let period = PeriodMap::new(period.clone())?;
            let n = period.dimension();
            let mut orbit_edges = vec![EdgeOrbit::new(0, 0, LatticeOffset::zero(n), *loop_weight)];
            for (offset, w) in edges {
                orbit_edges.push(EdgeOrbit::new(0, 0, offset.clone(), *w));
            }
            let graph = QuotientGraph::build(n, 1, orbit_edges)?;
            Ok((graph, period))
        }
    }
}

/// Parses a preset by name, mirroring the CLI surface.
pub fn preset_by_name(
    name: &str,
    l: f64,
    w0: f64,
    w1: f64,
    a: f64,
    m: f64,
    n: usize,
) -> Result<(QuotientGraph, PeriodMap)> {
    match name {
        "hexagonal" => lattice_preset(&LatticePreset::Hexagonal { l, w0, w1 }),
        "square" => lattice_preset(&LatticePreset::Square { l, w0, w1 }),
        "cubic" => lattice_preset(&LatticePreset::Cubic { n, a, m }),
        other => Err(Error::UnknownPreset(other.into())),
    }
}
