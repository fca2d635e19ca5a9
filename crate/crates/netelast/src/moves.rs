//! Local moves: contraction of two vertex orbits and splitting of one.
//!
//! Move detection reads a realization; move application rewrites the
//! quotient graph. Both conserve the total unoriented weight. A
//! contraction merges two orbits whose representatives (up to a lattice
//! shift) come within distance `delta`; a splitting divides a vertex
//! whose local tension reaches the firmness threshold for its degree,
//! partitioning the darts by the sign of their projection onto the top
//! eigendirection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::net::{EdgeOrbit, LatticeOffset, PeriodMap, QuotientGraph, Realization};
use crate::solver::local_tension;

/// Firmness threshold `K_d` as a function of the weighted degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Firmness {
    /// The same threshold for every degree.
    Constant(f64),
    /// `K_d = kappa * d`.
    Linear(f64),
    /// Explicit per-degree thresholds; degrees are matched within
    /// `1e-9` and anything else falls back to `default`.
    Table {
        entries: Vec<(f64, f64)>,
        default: f64,
    },
}

impl Firmness {
    pub fn threshold(&self, degree: f64) -> f64 {
        match self {
            Firmness::Constant(k) => *k,
            Firmness::Linear(kappa) => kappa * degree,
            Firmness::Table { entries, default } => entries
                .iter()
                .find(|(d, _)| (d - degree).abs() <= 1e-9 * d.abs().max(1.0))
                .map(|(_, k)| *k)
                .unwrap_or(*default),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = match self {
            Firmness::Constant(k) => *k > 0.0,
            Firmness::Linear(kappa) => *kappa > 0.0,
            Firmness::Table { entries, default } => {
                *default > 0.0 && entries.iter().all(|(_, k)| *k > 0.0)
            }
        };
        if positive {
            Ok(())
        } else {
            Err(Error::InvalidParameter("firmness must be positive".into()))
        }
    }
}

/// Thresholds and loop-redistribution fractions for local moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveParams {
    pub delta: f64,
    pub firmness: Firmness,
    pub p0: f64,
    pub p1: f64,
    pub p01: f64,
}

impl MoveParams {
    /// Validated parameters with explicit loop fractions.
    pub fn new(delta: f64, firmness: Firmness, p0: f64, p1: f64, p01: f64) -> Result<Self> {
        if delta <= 0.0 {
            return Err(Error::InvalidParameter(
                "contraction threshold must be positive".into(),
            ));
        }
        firmness.validate()?;
        if p0 < 0.0 || p1 < 0.0 || p01 < 0.0 || (p0 + p1 + p01 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "loop fractions must be non-negative and sum to 1".into(),
            ));
        }
        Ok(MoveParams {
            delta,
            firmness,
            p0,
            p1,
            p01,
        })
    }

    /// The even-endpoint convention `p0 = p1 = 1/4`, `p01 = 1/2`.
    pub fn with_even_split(delta: f64, firmness: Firmness) -> Result<Self> {
        MoveParams::new(delta, firmness, 0.25, 0.25, 0.5)
    }
}

/// A pair of distinct orbits whose representatives are within reach:
/// contract `v0` with the translate of `v1` by `offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCandidate {
    pub v0: usize,
    pub v1: usize,
    pub offset: LatticeOffset,
    pub distance: f64,
}

/// Which of the two new vertices a dart follows after a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Zero,
    One,
}

/// A vertex whose local tension reached the firmness threshold, with
/// the dart partition induced by the top eigendirection.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingCandidate {
    pub vertex: usize,
    pub lambda_max: f64,
    pub threshold: f64,
    /// Unit eigenvector of the largest eigenvalue, sign-normalized so
    /// its first non-negligible component is positive.
    pub direction: Vec<f64>,
    /// Side of every non-true-loop dart at the vertex, keyed by
    /// `(orbit index, reversed)`.
    pub sides: BTreeMap<(usize, bool), Side>,
    /// The top eigenvalue is simple (relative gap above `1e-9`).
    pub eigen_gap_ok: bool,
    /// No dart is perpendicular to the eigendirection.
    pub no_perpendicular_dart: bool,
}

impl SplittingCandidate {
    pub fn margin(&self) -> f64 {
        self.lambda_max - self.threshold
    }

    pub fn is_generic(&self) -> bool {
        self.eigen_gap_ok && self.no_perpendicular_dart
    }
}

/// Integer offsets whose period image lies within `radius` of `target`.
///
/// The enclosing box comes from the rows of the period inverse, so the
/// enumeration is exhaustive for any invertible period.
pub fn offsets_within(
    period: &PeriodMap,
    period_inv: &Matrix,
    target: &[f64],
    radius: f64,
) -> Vec<LatticeOffset> {
    let n = period.dimension();
    let center = period_inv.matvec(target);
    let mut lo = vec![0i64; n];
    let mut hi = vec![0i64; n];
    for k in 0..n {
        let row_norm = linalg::norm(period_inv.row(k));
        let half = radius * row_norm + 1e-9;
        lo[k] = (center[k] - half).ceil() as i64;
        hi[k] = (center[k] + half).floor() as i64;
    }
    let mut found = Vec::new();
    let mut current = lo.clone();
    'outer: loop {
        let offset = LatticeOffset(current.clone());
        let image = period.apply(&offset);
        if linalg::norm(&linalg::sub(&image, target)) <= radius {
            found.push(offset);
        }
        for k in 0..n {
            if current[k] < hi[k] {
                current[k] += 1;
                continue 'outer;
            }
            current[k] = lo[k];
        }
        break;
    }
    found
}

/// The lattice offset whose image is closest to `target`, with the
/// distance. Ties break on the lexicographically smaller offset.
pub fn nearest_offset(
    period: &PeriodMap,
    period_inv: &Matrix,
    target: &[f64],
) -> (LatticeOffset, f64) {
    let rounded = LatticeOffset(
        period_inv
            .matvec(target)
            .iter()
            .map(|c| c.round() as i64)
            .collect(),
    );
    let mut best = rounded.clone();
    let mut best_dist = linalg::norm(&linalg::sub(&period.apply(&rounded), target));
    for offset in offsets_within(period, period_inv, target, best_dist + 1e-12) {
        let dist = linalg::norm(&linalg::sub(&period.apply(&offset), target));
        if dist < best_dist - 1e-15 || (dist <= best_dist + 1e-15 && offset < best) {
            best_dist = dist;
            best = offset;
        }
    }
    (best, best_dist)
}

/// All contraction candidates at threshold `delta`, sorted by distance.
/// Pairs within the same orbit are excluded: contracting a vertex with
/// its own translate would violate the period.
pub fn find_contractions(
    g: &QuotientGraph,
    r: &Realization,
    delta: f64,
) -> Result<Vec<ContractionCandidate>> {
    if delta <= 0.0 {
        return Err(Error::InvalidParameter(
            "contraction threshold must be positive".into(),
        ));
    }
    let period_inv = r.period.basis().inverse()?;
    let mut found = Vec::new();
    for v0 in 0..g.vertex_count() {
        for v1 in (v0 + 1)..g.vertex_count() {
            // distance = || x_{v1} + rho(offset) - x_{v0} ||, so the
            // offsets live in the ball of radius delta around the gap.
            let gap = linalg::sub(&r.positions[v0], &r.positions[v1]);
            for offset in offsets_within(&r.period, &period_inv, &gap, delta) {
                let image = r.period.apply(&offset);
                let distance = linalg::norm(&linalg::sub(&image, &gap));
                found.push(ContractionCandidate {
                    v0,
                    v1,
                    offset,
                    distance,
                });
            }
        }
    }
    found.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap()
            .then(a.v0.cmp(&b.v0))
            .then(a.v1.cmp(&b.v1))
            .then(a.offset.cmp(&b.offset))
    });
    Ok(found)
}

/// Contracts `v0` with the translate of `v1` by the candidate offset.
///
/// `v0`'s representative becomes the merged representative; edges at
/// `v1` are rebased so the contracted edge turns into a true loop.
/// Orbit indices above `v1` shift down by one.
pub fn apply_contraction(g: &QuotientGraph, c: &ContractionCandidate) -> Result<QuotientGraph> {
    if c.v0 == c.v1 {
        return Err(Error::InvalidParameter(
            "cannot contract an orbit with itself".into(),
        ));
    }
    for v in [c.v0, c.v1] {
        if v >= g.vertex_count() {
            return Err(Error::VertexOutOfRange {
                index: v,
                count: g.vertex_count(),
            });
        }
    }
    if c.offset.dim() != g.dimension() {
        return Err(Error::OffsetDimension {
            expected: g.dimension(),
            found: c.offset.dim(),
        });
    }
    let relabel = |v: usize| -> usize {
        if v == c.v1 {
            c.v0
        } else {
            v
        }
    };
    let reindex = |v: usize| -> usize {
        if v > c.v1 {
            v - 1
        } else {
            v
        }
    };
    let edges = g
        .edges()
        .iter()
        .map(|e| {
            let mut offset = e.offset.clone();
            if e.tail == c.v1 {
                offset = offset.plus(&c.offset);
            }
            if e.head == c.v1 {
                offset = offset.minus(&c.offset);
            }
            EdgeOrbit::new(
                reindex(relabel(e.tail)),
                reindex(relabel(e.head)),
                offset,
                e.weight,
            )
        })
        .collect();
    QuotientGraph::build(g.dimension(), g.vertex_count() - 1, edges)
}

/// All vertices whose local tension reaches the firmness threshold,
/// sorted by decreasing margin. Non-generic candidates are included
/// with their flags cleared; applying one is an error.
pub fn find_splittings(
    g: &QuotientGraph,
    r: &Realization,
    firmness: &Firmness,
) -> Vec<SplittingCandidate> {
    let mut found = Vec::new();
    for v in 0..g.vertex_count() {
        let tension = local_tension(g, r, v);
        let (vals, vecs) = linalg::sym_eigen(&tension.matrix);
        let last = vals.len() - 1;
        let lambda_max = vals[last];
        let threshold = firmness.threshold(g.degree(v));
        if lambda_max < threshold {
            continue;
        }
        let mut direction = vecs.column(last);
        for &component in direction.iter() {
            if component.abs() > 1e-9 {
                if component < 0.0 {
                    direction = linalg::scale(&direction, -1.0);
                }
                break;
            }
        }
        let eigen_gap_ok = last == 0 || (lambda_max - vals[last - 1]) > 1e-9 * lambda_max.abs();
        let mut no_perpendicular_dart = true;
        let mut sides = BTreeMap::new();
        for d in g.darts_at(v) {
            let vector = r.dart_vector(v, &d);
            let length = linalg::norm(&vector);
            if d.other == v && d.offset.is_zero() {
                // True loops stay out of the partition.
                continue;
            }
            let projection = linalg::dot(&direction, &vector);
            if projection.abs() <= 1e-9 * length {
                no_perpendicular_dart = false;
            }
            let side = if projection > 0.0 { Side::One } else { Side::Zero };
            sides.insert((d.orbit, d.reversed), side);
        }
        found.push(SplittingCandidate {
            vertex: v,
            lambda_max,
            threshold,
            direction,
            sides,
            eigen_gap_ok,
            no_perpendicular_dart,
        });
    }
    found.sort_by(|a, b| {
        b.margin()
            .partial_cmp(&a.margin())
            .unwrap()
            .then(a.vertex.cmp(&b.vertex))
    });
    found
}

/// Splits the candidate vertex into side-zero (keeping the old index)
/// and side-one (appended as the last index).
///
/// Every non-self dart reattaches to its side; a self-edge across cells
/// gets each end assigned by its own dart; every true loop of weight `w`
/// becomes a loop `p0 w` on side zero, a loop `p1 w` on side one, and an
/// edge `p01 w` between them. The returned realization is the immediate
/// one: both copies sit at the old position.
pub fn apply_splitting(
    g: &QuotientGraph,
    r: &Realization,
    cand: &SplittingCandidate,
    params: &MoveParams,
) -> Result<(QuotientGraph, Realization)> {
    if !cand.is_generic() {
        return Err(Error::NonGenericCandidate {
            vertex: cand.vertex,
        });
    }
    let v = cand.vertex;
    if v >= g.vertex_count() {
        return Err(Error::VertexOutOfRange {
            index: v,
            count: g.vertex_count(),
        });
    }
    let new_vertex = g.vertex_count();
    let pick = |side: Side| -> usize {
        match side {
            Side::Zero => v,
            Side::One => new_vertex,
        }
    };
    let side_of = |orbit: usize, reversed: bool| -> Result<Side> {
        cand.sides
            .get(&(orbit, reversed))
            .copied()
            .ok_or_else(|| Error::InvalidParameter("candidate does not match the graph".into()))
    };
    let mut edges = Vec::new();
    for (idx, e) in g.edges().iter().enumerate() {
        if e.is_true_loop() && e.tail == v {
            edges.push(EdgeOrbit::new(v, v, e.offset.clone(), params.p0 * e.weight));
            edges.push(EdgeOrbit::new(
                new_vertex,
                new_vertex,
                e.offset.clone(),
                params.p1 * e.weight,
            ));
            edges.push(EdgeOrbit::new(
                v,
                new_vertex,
                e.offset.clone(),
                params.p01 * e.weight,
            ));
            continue;
        }
        let tail = if e.tail == v {
            pick(side_of(idx, false)?)
        } else {
            e.tail
        };
        let head = if e.head == v {
            pick(side_of(idx, true)?)
        } else {
            e.head
        };
        edges.push(EdgeOrbit::new(tail, head, e.offset.clone(), e.weight));
    }
    let graph = QuotientGraph::build(g.dimension(), g.vertex_count() + 1, edges)?;
    let mut positions = r.positions.clone();
    positions.push(r.positions[v].clone());
    let immediate = Realization {
        positions,
        period: r.period.clone(),
    };
    Ok((graph, immediate))
}

/// Repetition-free bound: a post-split harmonic edge with integer
/// weights is at least this long, so any `delta` below it cannot undo
/// the split.
pub fn compatibility_lower_bound(degree: f64, firmness_value: f64) -> f64 {
    debug_assert!(degree > 0.0 && firmness_value > 0.0);
    (2.0 * firmness_value).sqrt() / degree
}
