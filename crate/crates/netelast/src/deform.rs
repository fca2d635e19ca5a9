//! Fast and slow deformation engines.
//!
//! Fast deformation applies the whole volume-preserving map at once and
//! exhausts local moves: splittings first, then contractions, phase by
//! phase until nothing fires. Slow deformation advances the map
//! continuously and applies exactly one move at the first parameter
//! where a trigger condition holds, found by scanning and bisection.
//!
//! Between moves the graph is fixed, so the harmonic realization at the
//! deformed period is the linear image of the reference solve. Each
//! graph state is solved exactly once, at the reference period, which
//! is also the pull-back used for reported tensors. Margin evaluation
//! and move application both read the transformed realization, so a
//! bisected trigger always fires.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::mechanics::{self, uniaxial_map};
use crate::moves::{
    apply_contraction, apply_splitting, find_contractions, find_splittings, nearest_offset,
    MoveParams,
};
use crate::net::{LatticeOffset, PeriodMap, QuotientGraph, Realization};
use crate::solver::{
    apply_linear, global_tension, harmonic_realize, harmonic_residual, local_tension,
    TensionTensor,
};

/// Caps and tolerances of the event loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    /// Maximum number of applied moves; `None` means ten times the
    /// initial vertex-orbit count.
    pub max_moves: Option<usize>,
    /// Scan step in the schedule parameter `t`.
    pub scan_step: f64,
    /// Bisection width for event times.
    pub bisect_tol: f64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_moves: None,
            scan_step: 1e-3,
            bisect_tol: 1e-10,
        }
    }
}

/// What kind of run produced a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TraceSchedule {
    Fast,
    Slow { lambda_target: f64 },
}

/// A full run description: the deformation kind plus move parameters
/// and event-loop caps.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub params: MoveParams,
    pub caps: Caps,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// Apply this volume-preserving map at once.
    Fast { map: Matrix },
    /// Scan the uniaxial family to the target stretch in the rotated
    /// frame.
    Slow { lambda_target: f64, rotation: Matrix },
}

/// Runs a schedule against a standard net.
pub fn run_schedule(
    g: &QuotientGraph,
    standard: &Realization,
    schedule: &Schedule,
) -> Result<DeformationTrace> {
    match &schedule.kind {
        ScheduleKind::Fast { map } => {
            fast_deform(g, standard, map, &schedule.params, &schedule.caps)
        }
        ScheduleKind::Slow {
            lambda_target,
            rotation,
        } => slow_deform(
            g,
            standard,
            *lambda_target,
            rotation,
            &schedule.params,
            &schedule.caps,
        ),
    }
}

/// One applied local move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MoveRecord {
    Contraction {
        v0: usize,
        v1: usize,
        offset: LatticeOffset,
        distance: f64,
    },
    Splitting {
        vertex: usize,
        lambda_max: f64,
        threshold: f64,
    },
}

/// A move event along a run. Slow runs carry the schedule time and the
/// stretch at which the move fired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveEvent {
    pub t: Option<f64>,
    pub lambda: Option<f64>,
    pub record: MoveRecord,
    /// Index into `DeformationTrace::graphs` of the post-move state.
    pub graph_after: usize,
}

/// A maximal stretch interval with a fixed graph. The tensor is the
/// pulled-back global tension of that graph, solved at the reference
/// period, so the energy along the segment is the uniaxial closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub graph: usize,
    pub tension_ref: Matrix,
}

/// Full record of a deformation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationTrace {
    pub dimension: usize,
    pub schedule: TraceSchedule,
    /// Extension frame of slow runs; identity for fast runs.
    pub rotation: Matrix,
    pub covolume: f64,
    pub initial_energy: f64,
    pub events: Vec<MoveEvent>,
    pub segments: Vec<Segment>,
    pub graphs: Vec<QuotientGraph>,
    pub final_graph: usize,
    /// Harmonic realization of the final graph at the deformed period.
    pub final_realization: Realization,
    /// Global tension of the final graph solved at the reference period.
    pub final_pullback_tension: Matrix,
}

impl DeformationTrace {
    pub fn has_contractions(&self) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e.record, MoveRecord::Contraction { .. }))
    }
}

/// Relative drop of the pulled-back energy; zero when no moves occur
/// and negative when contractions added weight to stretched directions.
pub fn energy_loss_ratio(trace: &DeformationTrace) -> Result<f64> {
    if trace.initial_energy <= 0.0 {
        return Err(Error::ZeroInitialEnergy);
    }
    Ok((trace.initial_energy - trace.final_pullback_tension.trace()) / trace.initial_energy)
}

/// Outcome of the permanent-strain bracket check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BracketCheck {
    /// Preconditions unmet: not a splittings-only uniaxial run with a
    /// small enough loss ratio.
    Inapplicable { reason: String },
    Checked {
        permanent_strain: f64,
        lower: f64,
        upper: f64,
        holds: bool,
    },
}

impl BracketCheck {
    pub fn holds(&self) -> bool {
        matches!(self, BracketCheck::Checked { holds: true, .. })
    }
}

/// Bracket endpoints for the permanent strain of a splittings-only run
/// with loss ratio `r < 1/N`:
/// `(1 - N r/(N-1))^{(N-1)/2N} - 1 <= eps_0 <= (1 - N r)^{-(N-1)/2N} - 1`.
/// Near `r = 0` the endpoints behave like `-r/2` and `(N-1) r/2`.
pub fn strain_bracket(dimension: usize, loss_ratio: f64) -> (f64, f64) {
    let n = dimension as f64;
    let exponent = (n - 1.0) / (2.0 * n);
    let lower = (1.0 - n / (n - 1.0) * loss_ratio).powf(exponent) - 1.0;
    let upper = (1.0 - n * loss_ratio).powf(-exponent) - 1.0;
    (lower, upper)
}

/// Checks the loss-ratio bracket for the permanent strain, with `1e-9`
/// slack. Applies to splittings-only slow runs from a standard state
/// with `R < 1/N`.
pub fn check_e0_vs_r(trace: &DeformationTrace) -> Result<BracketCheck> {
    if !matches!(trace.schedule, TraceSchedule::Slow { .. }) {
        return Ok(BracketCheck::Inapplicable {
            reason: "not a uniaxial slow run".into(),
        });
    }
    if trace.has_contractions() {
        return Ok(BracketCheck::Inapplicable {
            reason: "contractions occurred".into(),
        });
    }
    let n = trace.dimension as f64;
    let r = energy_loss_ratio(trace)?;
    if r >= 1.0 / n {
        return Ok(BracketCheck::Inapplicable {
            reason: format!("loss ratio {r} is not below 1/N"),
        });
    }
    let tensor = TensionTensor {
        matrix: trace.final_pullback_tension.clone(),
    };
    let eps0 = mechanics::permanent_strain(&tensor, &trace.rotation)?;
    let (lower, upper) = strain_bracket(trace.dimension, r);
    let holds = lower - 1e-9 <= eps0 && eps0 <= upper + 1e-9;
    Ok(BracketCheck::Checked {
        permanent_strain: eps0,
        lower,
        upper,
        holds,
    })
}

/// One sample of the stress-strain curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub strain: f64,
    pub sigma_eng: f64,
    pub sigma_true: f64,
    pub energy: f64,
}

/// Samples the piecewise closed-form curve of a slow trace. Each event
/// stretch appears twice, first with the left limit and then with the
/// right-continuous post-move value.
pub fn stress_strain_curve(
    trace: &DeformationTrace,
    volume: f64,
    samples: usize,
) -> Result<Vec<CurvePoint>> {
    if trace.segments.is_empty() {
        return Err(Error::InvalidParameter(
            "trace has no segments; stress-strain curves need a slow run".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let total: f64 = trace
        .segments
        .iter()
        .map(|s| s.lambda_end - s.lambda_start)
        .sum();
    let mut points = Vec::new();
    for seg in &trace.segments {
        let span = seg.lambda_end - seg.lambda_start;
        let count = if total > 0.0 && span > 0.0 {
            ((samples as f64 * span / total).round() as usize).max(2)
        } else {
            1
        };
        let tensor = TensionTensor {
            matrix: seg.tension_ref.clone(),
        };
        for i in 0..count {
            let frac = if count == 1 {
                0.0
            } else {
                i as f64 / (count - 1) as f64
            };
            let lambda = seg.lambda_start + frac * span;
            let (energy, de) = mechanics::energy_profile(&tensor, lambda, &trace.rotation)?;
            let sigma_eng = de / volume;
            points.push(CurvePoint {
                strain: lambda - 1.0,
                sigma_eng,
                sigma_true: lambda * sigma_eng,
                energy,
            });
        }
    }
    Ok(points)
}

fn check_standard_start(g: &QuotientGraph, r: &Realization) -> Result<()> {
    let tension = global_tension(g, r).matrix;
    let trace = tension.trace();
    let n = g.dimension();
    let iso = tension
        .sub(&Matrix::identity(n).scaled(trace / n as f64))
        .frobenius_norm();
    if iso > 1e-8 * trace.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotStandard(iso / trace.abs().max(f64::MIN_POSITIVE)));
    }
    for v in 0..g.vertex_count() {
        if linalg::norm(&harmonic_residual(g, r, v)) > 1e-8 {
            return Err(Error::NotStandard(f64::INFINITY));
        }
    }
    Ok(())
}

/// Per-graph state of an engine: one reference solve serves every
/// margin query until the next move.
struct Epoch {
    graph: QuotientGraph,
    graph_id: usize,
    reference: Realization,
    global_reference: Matrix,
}

fn build_epoch(
    graph: QuotientGraph,
    graph_id: usize,
    rho0: &PeriodMap,
) -> Result<Epoch> {
    let reference = harmonic_realize(&graph, rho0)?;
    let global_reference = global_tension(&graph, &reference).matrix;
    Ok(Epoch {
        graph,
        graph_id,
        reference,
        global_reference,
    })
}

/// Candidate identity for scanning; splittings order before
/// contractions on exact margin ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum CandidateRef {
    Split(usize),
    Contract(usize, usize),
}

/// Applies the whole map at once, then alternates phases of splittings
/// and contractions until the net is quiescent.
pub fn fast_deform(
    g: &QuotientGraph,
    standard: &Realization,
    map: &Matrix,
    params: &MoveParams,
    caps: &Caps,
) -> Result<DeformationTrace> {
    if (map.det().abs() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(
            "fast deformation map must preserve volume".into(),
        ));
    }
    check_standard_start(g, standard)?;
    let rho0 = standard.period.clone();
    let deformed = rho0.transformed(map)?;
    let cap = caps.max_moves.unwrap_or(10 * g.vertex_count());

    let initial_energy = {
        let reference = harmonic_realize(g, &rho0)?;
        global_tension(g, &reference).trace()
    };
    let mut graphs = vec![g.clone()];
    let mut events = Vec::new();
    let mut graph = g.clone();
    let mut current = harmonic_realize(&graph, &deformed)?;
    let mut moves = 0usize;

    loop {
        let mut acted = false;
        loop {
            let candidates = find_splittings(&graph, &current, &params.firmness);
            // Non-generic candidates stay blocked; a later move may
            // unblock them.
            let Some(generic) = candidates.iter().find(|c| c.is_generic()) else {
                break;
            };
            moves += 1;
            if moves > cap {
                return Err(Error::MoveCapExceeded { cap });
            }
            let record = MoveRecord::Splitting {
                vertex: generic.vertex,
                lambda_max: generic.lambda_max,
                threshold: generic.threshold,
            };
            let (next, _) = apply_splitting(&graph, &current, generic, params)?;
            graph = next;
            current = harmonic_realize(&graph, &deformed)?;
            graphs.push(graph.clone());
            events.push(MoveEvent {
                t: None,
                lambda: None,
                record,
                graph_after: graphs.len() - 1,
            });
            acted = true;
        }
        loop {
            let candidates = find_contractions(&graph, &current, params.delta)?;
            let Some(nearest) = candidates.first() else {
                break;
            };
            moves += 1;
            if moves > cap {
                return Err(Error::MoveCapExceeded { cap });
            }
            let record = MoveRecord::Contraction {
                v0: nearest.v0,
                v1: nearest.v1,
                offset: nearest.offset.clone(),
                distance: nearest.distance,
            };
            graph = apply_contraction(&graph, nearest)?;
            current = harmonic_realize(&graph, &deformed)?;
            graphs.push(graph.clone());
            events.push(MoveEvent {
                t: None,
                lambda: None,
                record,
                graph_after: graphs.len() - 1,
            });
            acted = true;
        }
        if !acted {
            break;
        }
    }

    // A met condition that never became generic cannot resolve under a
    // fixed map; report it rather than end in an ill-defined state.
    if let Some(blocked) = find_splittings(&graph, &current, &params.firmness)
        .iter()
        .find(|c| !c.is_generic())
    {
        return Err(Error::NonGenericStall {
            vertex: blocked.vertex,
        });
    }

    let pullback = harmonic_realize(&graph, &rho0)?;
    let final_pullback_tension = global_tension(&graph, &pullback).matrix;
    let final_graph = graphs.len() - 1;
    Ok(DeformationTrace {
        dimension: g.dimension(),
        schedule: TraceSchedule::Fast,
        rotation: Matrix::identity(g.dimension()),
        covolume: rho0.covolume(),
        initial_energy,
        events,
        segments: Vec::new(),
        graphs,
        final_graph,
        final_realization: current,
        final_pullback_tension,
    })
}

struct SlowEngine {
    params: MoveParams,
    rotation: Matrix,
    lambda_target: f64,
    dimension: usize,
    rho0: PeriodMap,
    epoch: Epoch,
    graphs: Vec<QuotientGraph>,
    events: Vec<MoveEvent>,
    segments: Vec<Segment>,
    segment_start: f64,
    moves: usize,
    cap: usize,
    bisect_tol: f64,
}

impl SlowEngine {
    fn lambda(&self, t: f64) -> f64 {
        self.lambda_target.powf(t)
    }

    /// Harmonic realization at schedule time `t`, as the linear image
    /// of the reference solve.
    fn realized_at(&self, t: f64) -> Result<Realization> {
        let a = uniaxial_map(self.lambda(t), self.dimension, &self.rotation)?;
        apply_linear(&self.epoch.reference, &a)
    }

    /// Margins of every candidate at schedule time `t`; non-negative
    /// means the trigger condition holds. Uses the same arithmetic as
    /// the detection in `fire_once`.
    fn margins(&self, t: f64) -> Result<Vec<(CandidateRef, f64)>> {
        let current = self.realized_at(t)?;
        let g = &self.epoch.graph;
        let mut out = Vec::new();
        for v in 0..g.vertex_count() {
            let tension = local_tension(g, &current, v);
            let (vals, _) = linalg::sym_eigen(&tension.matrix);
            let lambda_max = vals[vals.len() - 1];
            let threshold = self.params.firmness.threshold(g.degree(v));
            out.push((CandidateRef::Split(v), lambda_max - threshold));
        }
        let inv = current.period.basis().inverse()?;
        let n = g.vertex_count();
        for v0 in 0..n {
            for v1 in (v0 + 1)..n {
                let gap = linalg::sub(&current.positions[v0], &current.positions[v1]);
                let (_, dist) = nearest_offset(&current.period, &inv, &gap);
                out.push((CandidateRef::Contract(v0, v1), self.params.delta - dist));
            }
        }
        Ok(out)
    }

    fn margin_of(&self, candidate: CandidateRef, t: f64) -> Result<f64> {
        Ok(self
            .margins(t)?
            .into_iter()
            .find(|(c, _)| *c == candidate)
            .map(|(_, m)| m)
            .unwrap_or(f64::NEG_INFINITY))
    }

    /// Applies the best applicable met candidate at `t`, if any.
    /// Returns whether a move was applied. Split candidates that are
    /// not generic stay blocked until the deformation perturbs them.
    fn fire_once(&mut self, t: f64) -> Result<bool> {
        let current = self.realized_at(t)?;
        let splits = find_splittings(&self.epoch.graph, &current, &self.params.firmness);
        let contractions = find_contractions(&self.epoch.graph, &current, self.params.delta)?;
        let mut met: Vec<(f64, CandidateRef)> = Vec::new();
        for cand in &splits {
            met.push((cand.margin(), CandidateRef::Split(cand.vertex)));
        }
        for cand in &contractions {
            met.push((
                self.params.delta - cand.distance,
                CandidateRef::Contract(cand.v0, cand.v1),
            ));
        }
        met.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for (_, candidate) in met {
            match candidate {
                CandidateRef::Split(v) => {
                    let cand = splits.iter().find(|c| c.vertex == v).unwrap();
                    if !cand.is_generic() {
                        continue;
                    }
                    let record = MoveRecord::Splitting {
                        vertex: cand.vertex,
                        lambda_max: cand.lambda_max,
                        threshold: cand.threshold,
                    };
                    let (next, _) =
                        apply_splitting(&self.epoch.graph, &current, cand, &self.params)?;
                    self.advance_epoch(next, record, t)?;
                    return Ok(true);
                }
                CandidateRef::Contract(v0, v1) => {
                    let cand = contractions
                        .iter()
                        .find(|c| c.v0 == v0 && c.v1 == v1)
                        .unwrap();
                    let record = MoveRecord::Contraction {
                        v0: cand.v0,
                        v1: cand.v1,
                        offset: cand.offset.clone(),
                        distance: cand.distance,
                    };
                    let next = apply_contraction(&self.epoch.graph, cand)?;
                    self.advance_epoch(next, record, t)?;
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    fn advance_epoch(&mut self, next: QuotientGraph, record: MoveRecord, t: f64) -> Result<()> {
        self.moves += 1;
        if self.moves > self.cap {
            return Err(Error::MoveCapExceeded { cap: self.cap });
        }
        let lambda = self.lambda(t);
        if lambda > self.segment_start {
            self.segments.push(Segment {
                lambda_start: self.segment_start,
                lambda_end: lambda,
                graph: self.epoch.graph_id,
                tension_ref: self.epoch.global_reference.clone(),
            });
            self.segment_start = lambda;
        }
        self.graphs.push(next.clone());
        let graph_id = self.graphs.len() - 1;
        self.events.push(MoveEvent {
            t: Some(t),
            lambda: Some(lambda),
            record,
            graph_after: graph_id,
        });
        self.epoch = build_epoch(next, graph_id, &self.rho0)?;
        Ok(())
    }

    fn exhaust(&mut self, t: f64) -> Result<()> {
        while self.fire_once(t)? {}
        Ok(())
    }

    /// Earliest time in `(lo, hi]` where the candidate's margin is
    /// non-negative, by bisection; the returned time has margin >= 0.
    fn bisect(&self, candidate: CandidateRef, mut lo: f64, mut hi: f64) -> Result<f64> {
        while hi - lo > self.bisect_tol {
            let mid = 0.5 * (lo + hi);
            if self.margin_of(candidate, mid)? >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Runs the slow-deformation event loop for a uniaxial extension to
/// `lambda_target` in the frame of `rotation`.
///
/// One move fires at a time: at each detected trigger crossing the
/// earliest bisected candidate is applied (largest margin, then
/// splittings before contractions, then lowest index on exact ties)
/// and all consequent moves at the same instant are exhausted before
/// the scan resumes.
pub fn slow_deform(
    g: &QuotientGraph,
    standard: &Realization,
    lambda_target: f64,
    rotation: &Matrix,
    params: &MoveParams,
    caps: &Caps,
) -> Result<DeformationTrace> {
    if lambda_target <= 0.0 {
        return Err(Error::InvalidParameter(
            "target stretch must be positive".into(),
        ));
    }
    if caps.scan_step <= 0.0 || caps.bisect_tol <= 0.0 {
        return Err(Error::InvalidParameter(
            "scan step and bisection tolerance must be positive".into(),
        ));
    }
    check_standard_start(g, standard)?;
    let rho0 = standard.period.clone();
    let initial = build_epoch(g.clone(), 0, &rho0)?;
    let initial_energy = initial.global_reference.trace();
    let mut engine = SlowEngine {
        params: params.clone(),
        rotation: rotation.clone(),
        lambda_target,
        dimension: g.dimension(),
        rho0: rho0.clone(),
        epoch: initial,
        graphs: vec![g.clone()],
        events: Vec::new(),
        segments: Vec::new(),
        segment_start: 1.0,
        moves: 0,
        cap: caps.max_moves.unwrap_or(10 * g.vertex_count()),
        bisect_tol: caps.bisect_tol,
    };

    engine.exhaust(0.0)?;
    let mut t = 0.0;
    let mut carried: Option<Vec<(CandidateRef, f64)>> = None;
    while t < 1.0 {
        let t_next = (t + caps.scan_step).min(1.0);
        let now = match carried.take() {
            Some(m) => m,
            None => engine.margins(t)?,
        };
        let next = engine.margins(t_next)?;
        let mut crossing: Option<(f64, f64, CandidateRef)> = None;
        for ((candidate, m_now), (_, m_next)) in now.iter().zip(next.iter()) {
            if *m_now < 0.0 && *m_next >= 0.0 {
                let t_c = engine.bisect(*candidate, t, t_next)?;
                let m_c = engine.margin_of(*candidate, t_c)?;
                let better = match &crossing {
                    None => true,
                    Some((best_t, best_m, best_c)) => {
                        t_c < *best_t - engine.bisect_tol
                            || (t_c <= *best_t + engine.bisect_tol
                                && (m_c > *best_m || (m_c == *best_m && *candidate < *best_c)))
                    }
                };
                if better {
                    crossing = Some((t_c, m_c, *candidate));
                }
            }
        }
        // With every margin negative at the step end there is nothing
        // to fire; blocked candidates show up as met margins.
        let any_met = next.iter().any(|(_, m)| *m >= 0.0);
        t = match crossing {
            Some((t_star, _, _)) => t_star,
            None => t_next,
        };
        if crossing.is_some() || any_met {
            engine.exhaust(t)?;
        } else {
            carried = Some(next);
        }
    }

    engine.segments.push(Segment {
        lambda_start: engine.segment_start,
        lambda_end: lambda_target,
        graph: engine.epoch.graph_id,
        tension_ref: engine.epoch.global_reference.clone(),
    });
    let final_realization = engine.realized_at(1.0)?;
    let final_graph = engine.epoch.graph_id;
    let final_pullback_tension = engine.epoch.global_reference.clone();
    Ok(DeformationTrace {
        dimension: g.dimension(),
        schedule: TraceSchedule::Slow { lambda_target },
        rotation: rotation.clone(),
        covolume: rho0.covolume(),
        initial_energy,
        events: engine.events,
        segments: engine.segments,
        graphs: engine.graphs,
        final_graph,
        final_realization,
        final_pullback_tension,
    })
}
