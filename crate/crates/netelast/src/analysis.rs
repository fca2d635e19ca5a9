//! Weight-variation and plasticity analytics.
//!
//! The displacement of a designated edge under its own weight follows a
//! reciprocal law `Phi(e) = z / (w + W)` with `z` and `W` independent
//! of `w`; the energy gained by contracting the edge is
//! `||z||^2 / (w + W)`. This module extracts `(z, W)` from probe
//! solves, verifies the tensor and energy identities, and evaluates the
//! closed-form loss ratios of single-vertex splits, including lattice
//! sums for weights drawn from a radial profile and blends of two
//! weight tables.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::moves::{apply_contraction, ContractionCandidate};
use crate::net::{EdgeOrbit, LatticeOffset, PeriodMap, QuotientGraph, Realization};
use crate::solver::{global_tension, harmonic_realize};

/// Fitted reciprocal law of a designated edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossFit {
    pub v0: usize,
    pub v1: usize,
    pub z: Vec<f64>,
    /// The weight shift `W`; undefined when `z = 0`.
    pub w_shift: Option<f64>,
    /// Relative deviation of the validation probe from the law.
    pub residual: f64,
}

/// Returns `g` with the weight of the orbit `(v0, v1, 0)` replaced
/// (inserted if absent).
pub fn with_edge_weight(
    g: &QuotientGraph,
    v0: usize,
    v1: usize,
    weight: f64,
) -> Result<QuotientGraph> {
    if v0 == v1 {
        return Err(Error::InvalidParameter(
            "the designated edge must join distinct orbits".into(),
        ));
    }
    let zero = LatticeOffset::zero(g.dimension());
    let mut edges: Vec<EdgeOrbit> = g
        .edges()
        .iter()
        .filter(|e| {
            !(e.offset == zero
                && ((e.tail == v0 && e.head == v1) || (e.tail == v1 && e.head == v0)))
        })
        .cloned()
        .collect();
    edges.push(EdgeOrbit::new(v0, v1, zero, weight));
    QuotientGraph::build(g.dimension(), g.vertex_count(), edges)
}

/// Displacement of the designated edge in the harmonic realization.
fn edge_displacement(
    g: &QuotientGraph,
    period: &PeriodMap,
    v0: usize,
    v1: usize,
    weight: f64,
) -> Result<Vec<f64>> {
    let probed = with_edge_weight(g, v0, v1, weight)?;
    let r = harmonic_realize(&probed, period)?;
    Ok(linalg::sub(&r.positions[v1], &r.positions[v0]))
}

/// Fits `(z, W)` of the reciprocal law from two probe weights and
/// validates on a third.
///
/// The displacements at two probes are parallel with norm ratio
/// `r = (w_b + W)/(w_a + W)`, which pins `W`; non-parallel probe
/// displacements mean the law is violated and indicate a bug.
pub fn extract_zw(
    g: &QuotientGraph,
    period: &PeriodMap,
    v0: usize,
    v1: usize,
    probes: [f64; 3],
) -> Result<LossFit> {
    if probes[0] == probes[1] || probes[1] == probes[2] || probes[0] == probes[2] {
        return Err(Error::InvalidParameter("probe weights must be distinct".into()));
    }
    if probes.iter().any(|w| *w < 0.0) {
        return Err(Error::NegativeWeight(
            probes.iter().cloned().fold(f64::INFINITY, f64::min),
        ));
    }
    let d: Vec<Vec<f64>> = probes
        .iter()
        .map(|&w| edge_displacement(g, period, v0, v1, w))
        .collect::<Result<_>>()?;
    let scale = period.basis().frobenius_norm();
    let norms: Vec<f64> = d.iter().map(|v| linalg::norm(v)).collect();

    if norms.iter().all(|&n| n <= 1e-12 * scale) {
        // Degenerate branch: the edge never moves.
        return Ok(LossFit {
            v0,
            v1,
            z: vec![0.0; g.dimension()],
            w_shift: None,
            residual: norms.iter().cloned().fold(0.0, f64::max) / scale,
        });
    }
    if norms[0] <= 1e-12 * scale || norms[1] <= 1e-12 * scale {
        return Err(Error::ModelViolation(
            "one probe displacement vanished while another did not".into(),
        ));
    }
    // Parallelism check between the two fitting probes.
    let ua = linalg::scale(&d[0], 1.0 / norms[0]);
    let ub = linalg::scale(&d[1], 1.0 / norms[1]);
    if linalg::norm(&linalg::sub(&ua, &ub)) > 1e-7 {
        return Err(Error::ModelViolation(
            "probe displacements are not parallel".into(),
        ));
    }
    let ratio = norms[0] / norms[1];
    if (1.0 - ratio).abs() < 1e-12 {
        return Err(Error::ModelViolation(
            "probe displacements are indistinguishable".into(),
        ));
    }
    let w_shift = (ratio * probes[0] - probes[1]) / (1.0 - ratio);
    let z = linalg::scale(&d[0], probes[0] + w_shift);
    let predicted = linalg::scale(&z, 1.0 / (probes[2] + w_shift));
    let residual = linalg::norm(&linalg::sub(&d[2], &predicted)) / norms[2].max(1e-300);
    Ok(LossFit {
        v0,
        v1,
        z,
        w_shift: Some(w_shift),
        residual,
    })
}

/// The bound of the weight shift: total non-self weight at `v1` minus
/// the designated edge's weight. A nonzero fit must satisfy
/// `0 < W <= bound`.
pub fn w_shift_bound(g: &QuotientGraph, v0: usize, v1: usize) -> f64 {
    let zero = LatticeOffset::zero(g.dimension());
    let mut bound = 0.0;
    for d in g.darts_at(v1) {
        if d.other != v1 {
            bound += d.weight;
        }
    }
    for e in g.edges() {
        if e.offset == zero
            && ((e.tail == v0 && e.head == v1) || (e.tail == v1 && e.head == v0))
        {
            bound -= e.weight;
        }
    }
    bound
}

/// Measured deviations of the contraction-loss identities at weight `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `|| (T_hat - T) - z z^T / (w + W) ||_F`, relative.
    pub tensor_deviation: f64,
    /// `| (E_hat - E) - ||z||^2 / (w + W) |`, relative.
    pub energy_deviation: f64,
    /// `| ||Phi(e)|| (w + W) - ||z|| |`, relative.
    pub reciprocal_deviation: f64,
}

impl LossReport {
    pub fn within(&self, tol: f64) -> bool {
        self.tensor_deviation <= tol
            && self.energy_deviation <= tol
            && self.reciprocal_deviation <= tol
    }
}

/// Builds the contracted graph, solves both nets, and measures how well
/// the tensor and energy identities hold at weight `w`.
pub fn verify_loss_identity(
    g: &QuotientGraph,
    period: &PeriodMap,
    fit: &LossFit,
    w: f64,
) -> Result<LossReport> {
    let probed = with_edge_weight(g, fit.v0, fit.v1, w)?;
    let r = harmonic_realize(&probed, period)?;
    let tension = global_tension(&probed, &r);
    let energy = tension.trace();

    let contracted = apply_contraction(
        &probed,
        &ContractionCandidate {
            v0: fit.v0,
            v1: fit.v1,
            offset: LatticeOffset::zero(g.dimension()),
            distance: 0.0,
        },
    )?;
    let r_hat = harmonic_realize(&contracted, period)?;
    let tension_hat = global_tension(&contracted, &r_hat);
    let energy_hat = tension_hat.trace();

    let drop = match fit.w_shift {
        Some(shift) => 1.0 / (w + shift),
        None => 0.0,
    };
    let mut expected = Matrix::zeros(g.dimension(), g.dimension());
    linalg::add_outer(&mut expected, drop, &fit.z);
    let diff = tension_hat.matrix.sub(&tension.matrix);
    let tensor_scale = tension_hat.matrix.frobenius_norm().max(1e-300);
    let tensor_deviation = diff.sub(&expected).frobenius_norm() / tensor_scale;

    let expected_gap = linalg::norm_sq(&fit.z) * drop;
    let energy_deviation = ((energy_hat - energy) - expected_gap).abs() / energy_hat.max(1e-300);

    let displacement = linalg::sub(&r.positions[fit.v1], &r.positions[fit.v0]);
    let reciprocal_deviation = match fit.w_shift {
        Some(shift) => {
            let z_norm = linalg::norm(&fit.z);
            (linalg::norm(&displacement) * (w + shift) - z_norm).abs() / z_norm.max(1e-300)
        }
        None => linalg::norm(&displacement) / period.basis().frobenius_norm(),
    };
    Ok(LossReport {
        tensor_deviation,
        energy_deviation,
        reciprocal_deviation,
    })
}

/// Places `v1` at the weighted average forced by harmonicity there,
/// with every other vertex pinned at the supplied positions.
pub fn auxiliary_realization(
    g: &QuotientGraph,
    period: &PeriodMap,
    v1: usize,
    anchored: &[Vec<f64>],
) -> Result<Realization> {
    if v1 >= g.vertex_count() {
        return Err(Error::VertexOutOfRange {
            index: v1,
            count: g.vertex_count(),
        });
    }
    if anchored.len() != g.vertex_count() {
        return Err(Error::InvalidParameter(
            "anchored positions must cover every vertex orbit".into(),
        ));
    }
    let mut numerator = vec![0.0; g.dimension()];
    let mut denominator = 0.0;
    for d in g.darts_at(v1) {
        if d.other == v1 {
            // Self-edges cancel in pairs and true loops contribute
            // nothing to the placement.
            continue;
        }
        let shift = period.apply(&d.offset);
        let target = linalg::add(&anchored[d.other], &shift);
        for k in 0..numerator.len() {
            numerator[k] += d.weight * target[k];
        }
        denominator += d.weight;
    }
    if denominator <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    let mut positions = anchored.to_vec();
    positions[v1] = linalg::scale(&numerator, 1.0 / denominator);
    Ok(Realization {
        positions,
        period: period.clone(),
    })
}

/// Choice of the half set `I` with `Z^N = I ⊔ -I ⊔ {0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IndexSet {
    /// Offsets whose realized vector has positive dot with the normal;
    /// exact ties fall back to the lexicographic sign of the offset.
    HalfSpace { normal: Vec<f64> },
    /// An arbitrary half set; membership of an offset or its negation
    /// decides orientation.
    Explicit { offsets: BTreeSet<LatticeOffset> },
}

impl IndexSet {
    pub fn half_space(normal: Vec<f64>) -> Self {
        IndexSet::HalfSpace { normal }
    }

    /// True when the offset belongs to `I` (rather than `-I`).
    pub fn contains(&self, offset: &LatticeOffset, period: &PeriodMap) -> Result<bool> {
        if offset.is_zero() {
            return Err(Error::InvalidParameter("the origin is in neither half".into()));
        }
        match self {
            IndexSet::HalfSpace { normal } => {
                let v = period.apply(offset);
                let s = linalg::dot(normal, &v);
                if s > 0.0 {
                    Ok(true)
                } else if s < 0.0 {
                    Ok(false)
                } else {
                    // Lexicographic tie-break keeps I ⊔ -I exact.
                    Ok(offset
                        .0
                        .iter()
                        .find(|&&c| c != 0)
                        .map(|&c| c > 0)
                        .unwrap_or(false))
                }
            }
            IndexSet::Explicit { offsets } => {
                if offsets.contains(offset) {
                    Ok(true)
                } else if offsets.contains(&offset.negated()) {
                    Ok(false)
                } else {
                    Err(Error::InvalidParameter(format!(
                        "offset {:?} is not covered by the explicit half set",
                        offset.0
                    )))
                }
            }
        }
    }
}

/// Closed-form result of splitting the single vertex of a one-orbit net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleVertexSplit {
    /// Harmonic position of the side-one vertex, with side zero at the
    /// origin.
    pub position: Vec<f64>,
    pub energy_drop: f64,
    pub initial_energy: f64,
    pub loss_ratio: f64,
}

/// Evaluates the closed forms for a single-vertex net with non-loop
/// weights `weights` (one entry per +/- pair), a loop of weight
/// `loop_weight`, and loop fraction `p` turning into the bridge edge:
/// `x = sum_I w v / (p w_loop + sum_I w)` and
/// `dE = ||sum_I w v||^2 / (p w_loop + sum_I w)`.
pub fn single_vertex_split(
    weights: &[(LatticeOffset, f64)],
    period: &PeriodMap,
    index_set: &IndexSet,
    loop_weight: f64,
    p: f64,
) -> Result<SingleVertexSplit> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter("loop fraction must be in [0, 1]".into()));
    }
    if loop_weight < 0.0 {
        return Err(Error::NegativeWeight(loop_weight));
    }
    let dim = period.dimension();
    let mut z = vec![0.0; dim];
    let mut sum_w = 0.0;
    let mut initial_energy = 0.0;
    for (offset, w) in weights {
        if *w < 0.0 {
            return Err(Error::NegativeWeight(*w));
        }
        if offset.is_zero() {
            return Err(Error::InvalidParameter(
                "the loop weight is a separate argument".into(),
            ));
        }
        let oriented = if index_set.contains(offset, period)? {
            offset.clone()
        } else {
            offset.negated()
        };
        let v = period.apply(&oriented);
        for k in 0..dim {
            z[k] += w * v[k];
        }
        sum_w += w;
        initial_energy += w * linalg::norm_sq(&v);
    }
    if initial_energy <= 0.0 {
        return Err(Error::ZeroInitialEnergy);
    }
    let denominator = p * loop_weight + sum_w;
    if denominator <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    let position = linalg::scale(&z, 1.0 / denominator);
    let energy_drop = linalg::norm_sq(&z) / denominator;
    Ok(SingleVertexSplit {
        position,
        energy_drop,
        initial_energy,
        loss_ratio: energy_drop / initial_energy,
    })
}

/// Weights of a single-vertex net as a function of the edge offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightFunction {
    /// `amplitude (2 pi sigma^2)^{-N/2} exp(-||x||^2 / (2 sigma^2))`
    /// evaluated at the scaled realized offset.
    Gaussian { sigma: f64, amplitude: f64 },
    /// Explicit symmetric table; the scale parameter is ignored.
    Table {
        loop_weight: f64,
        entries: Vec<(LatticeOffset, f64)>,
    },
    /// Pointwise `(1 - ratio) first + ratio second`.
    Blend {
        first: Box<WeightFunction>,
        second: Box<WeightFunction>,
        ratio: f64,
    },
}

impl WeightFunction {
    pub fn gaussian(sigma: f64) -> Self {
        WeightFunction::Gaussian {
            sigma,
            amplitude: 1.0,
        }
    }

    /// Weight of the edge with the given offset at scale `s`.
    pub fn edge_weight(&self, offset: &LatticeOffset, scale: f64, period: &PeriodMap) -> f64 {
        match self {
            WeightFunction::Gaussian { sigma, amplitude } => {
                let v = period.apply(offset);
                let n = period.dimension() as f64;
                let norm_sq = scale * scale * linalg::norm_sq(&v);
                amplitude
                    * (2.0 * std::f64::consts::PI * sigma * sigma).powf(-n / 2.0)
                    * (-norm_sq / (2.0 * sigma * sigma)).exp()
            }
            WeightFunction::Table { entries, .. } => entries
                .iter()
                .find(|(o, _)| o == offset || *o == offset.negated())
                .map(|(_, w)| *w)
                .unwrap_or(0.0),
            WeightFunction::Blend {
                first,
                second,
                ratio,
            } => {
                (1.0 - ratio) * first.edge_weight(offset, scale, period)
                    + ratio * second.edge_weight(offset, scale, period)
            }
        }
    }

    /// Weight of the loop.
    pub fn loop_weight(&self, period: &PeriodMap) -> f64 {
        match self {
            WeightFunction::Gaussian { sigma, amplitude } => {
                let n = period.dimension() as f64;
                amplitude * (2.0 * std::f64::consts::PI * sigma * sigma).powf(-n / 2.0)
            }
            WeightFunction::Table { loop_weight, .. } => *loop_weight,
            WeightFunction::Blend {
                first,
                second,
                ratio,
            } => (1.0 - ratio) * first.loop_weight(period) + ratio * second.loop_weight(period),
        }
    }
}

/// Lattice sums over the half set within a realized radius.
#[derive(Debug, Clone, PartialEq)]
struct HalfSums {
    weight: f64,
    weighted_vectors: Vec<f64>,
    weighted_norms: f64,
}

/// Visits every nonzero offset with `||rho(offset)|| <= radius`.
fn for_each_offset_within<F: FnMut(&LatticeOffset, &[f64], f64)>(
    period: &PeriodMap,
    radius: f64,
    mut visit: F,
) -> Result<()> {
    let n = period.dimension();
    let inv = period.basis().inverse()?;
    let mut lo = vec![0i64; n];
    let mut hi = vec![0i64; n];
    for k in 0..n {
        let half = radius * linalg::norm(inv.row(k)) + 1e-9;
        lo[k] = (-half).ceil() as i64;
        hi[k] = half.floor() as i64;
    }
    let mut current = lo.clone();
    'outer: loop {
        if current.iter().any(|&c| c != 0) {
            let offset = LatticeOffset(current.clone());
            let v = period.apply(&offset);
            let norm = linalg::norm(&v);
            if norm <= radius {
                visit(&offset, &v, norm);
            }
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
    Ok(())
}

fn half_sums(
    f: &WeightFunction,
    scale: f64,
    index_set: &IndexSet,
    period: &PeriodMap,
    radius: f64,
) -> Result<HalfSums> {
    let dim = period.dimension();
    let mut sums = HalfSums {
        weight: 0.0,
        weighted_vectors: vec![0.0; dim],
        weighted_norms: 0.0,
    };
    let mut membership_error = None;
    for_each_offset_within(period, radius, |offset, v, norm| {
        if membership_error.is_some() {
            return;
        }
        match index_set.contains(offset, period) {
            Ok(true) => {
                let w = f.edge_weight(offset, scale, period);
                sums.weight += w;
                for (acc, component) in sums.weighted_vectors.iter_mut().zip(v) {
                    *acc += w * component;
                }
                sums.weighted_norms += w * norm * norm;
            }
            Ok(false) => {}
            Err(e) => membership_error = Some(e),
        }
    })?;
    match membership_error {
        Some(e) => Err(e),
        None => Ok(sums),
    }
}

fn ratio_from_sums(sums: &HalfSums, p_loop: f64) -> f64 {
    let denominator = (p_loop + sums.weight) * sums.weighted_norms;
    if denominator <= 0.0 {
        return 0.0;
    }
    linalg::norm_sq(&sums.weighted_vectors) / denominator
}

/// Loss ratio `R(s, p)` of the single-vertex split with weights
/// `F(s v_i)`, evaluated by truncated lattice sums. Each value is
/// cross-checked against a doubled truncation radius and must agree to
/// `1e-9`.
pub fn limit_ratio(
    f: &WeightFunction,
    index_set: &IndexSet,
    p: f64,
    s_grid: &[f64],
    radius: f64,
    period: &PeriodMap,
) -> Result<Vec<(f64, f64)>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter("loop fraction must be in [0, 1]".into()));
    }
    if radius <= 0.0 {
        return Err(Error::InvalidParameter("truncation radius must be positive".into()));
    }
    let mut out = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        if s <= 0.0 {
            return Err(Error::InvalidParameter("scale must be positive".into()));
        }
        let p_loop = p * f.loop_weight(period);
        let near = half_sums(f, s, index_set, period, radius)?;
        let far = half_sums(f, s, index_set, period, 2.0 * radius)?;
        let r_near = ratio_from_sums(&near, p_loop);
        let r_far = ratio_from_sums(&far, p_loop);
        if (r_near - r_far).abs() > 1e-9 * r_far.abs().max(1e-12) {
            return Err(Error::SumNotConverged(format!(
                "loss ratio moved from {r_near} to {r_far} when doubling the radius at s = {s}"
            )));
        }
        out.push((s, r_far));
    }
    Ok(out)
}

/// Blend curve of two weight functions and the predicted optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendReport {
    pub curve: Vec<(f64, f64)>,
    pub r0: f64,
    pub r1: f64,
    /// `sqrt(W0 E0) / (sqrt(W0 E0) + sqrt(W1 E1))`.
    pub s_hat: f64,
    pub r_at_s_hat: f64,
    /// Whether the minimization guarantee applies (`R0 = R1`).
    pub prop_applicable: bool,
}

/// Evaluates the loss ratio of `(1-s) first + s second` over a blend
/// grid, plus the closed-form optimal ratio.
pub fn blend_analysis(
    first: &WeightFunction,
    second: &WeightFunction,
    p: f64,
    s_grid: &[f64],
    radius: f64,
    period: &PeriodMap,
    index_set: &IndexSet,
) -> Result<BlendReport> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter("loop fraction must be in [0, 1]".into()));
    }
    let sums0 = half_sums(first, 1.0, index_set, period, radius)?;
    let check0 = half_sums(first, 1.0, index_set, period, 2.0 * radius)?;
    let sums1 = half_sums(second, 1.0, index_set, period, radius)?;
    let check1 = half_sums(second, 1.0, index_set, period, 2.0 * radius)?;
    for (near, far) in [(&sums0, &check0), (&sums1, &check1)] {
        if (near.weighted_norms - far.weighted_norms).abs()
            > 1e-9 * far.weighted_norms.abs().max(1e-12)
        {
            return Err(Error::SumNotConverged(
                "component sums changed when doubling the radius".into(),
            ));
        }
    }
    if check0.weighted_norms <= 0.0 || check1.weighted_norms <= 0.0 {
        return Err(Error::ZeroInitialEnergy);
    }
    let w0 = p * first.loop_weight(period) + check0.weight;
    let w1 = p * second.loop_weight(period) + check1.weight;
    let e0 = check0.weighted_norms;
    let e1 = check1.weighted_norms;
    let z0 = check0.weighted_vectors.clone();
    let z1 = check1.weighted_vectors.clone();
    let r0 = linalg::norm_sq(&z0) / (w0 * e0);
    let r1 = linalg::norm_sq(&z1) / (w1 * e1);

    let ratio_at = |s: f64| -> f64 {
        let z: Vec<f64> = z0
            .iter()
            .zip(&z1)
            .map(|(a, b)| (1.0 - s) * a + s * b)
            .collect();
        let w = (1.0 - s) * w0 + s * w1;
        let e = (1.0 - s) * e0 + s * e1;
        linalg::norm_sq(&z) / (w * e)
    };
    let curve: Vec<(f64, f64)> = s_grid.iter().map(|&s| (s, ratio_at(s))).collect();
    let s_hat = (w0 * e0).sqrt() / ((w0 * e0).sqrt() + (w1 * e1).sqrt());
    let r_at_s_hat = ratio_at(s_hat);
    let prop_applicable = (r0 - r1).abs() <= 1e-9 * r0.abs().max(r1.abs()).max(1e-12);
    Ok(BlendReport {
        curve,
        r0,
        r1,
        s_hat,
        r_at_s_hat,
        prop_applicable,
    })
}
