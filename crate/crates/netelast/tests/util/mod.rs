//! Shared generators and oracles for the integration suites.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use netelast::linalg::{self, Matrix};
use netelast::net::{EdgeOrbit, LatticeOffset, PeriodMap, QuotientGraph, Realization};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// How edge weights are drawn.
#[derive(Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// Uniform in (0.1, 2.0).
    Continuous,
    /// Multiples of 1/64 so that merges and splits stay exact.
    Dyadic,
    /// Integers 1..=4.
    Integer,
}

pub fn random_weight<R: Rng>(rng: &mut R, kind: WeightKind) -> f64 {
    match kind {
        WeightKind::Continuous => rng.gen_range(0.1..2.0),
        WeightKind::Dyadic => rng.gen_range(1..=128) as f64 / 64.0,
        WeightKind::Integer => rng.gen_range(1..=4) as f64,
    }
}

pub fn random_offset<R: Rng>(rng: &mut R, dim: usize) -> LatticeOffset {
    LatticeOffset((0..dim).map(|_| rng.gen_range(-2..=2)).collect())
}

/// A positively connected quotient graph: a random spanning tree plus
/// extra edges, all with random offsets.
pub fn random_connected_graph<R: Rng>(
    rng: &mut R,
    dim: usize,
    orbits: usize,
    kind: WeightKind,
) -> QuotientGraph {
    let mut edges = Vec::new();
    for v in 1..orbits {
        let parent = rng.gen_range(0..v);
        edges.push(EdgeOrbit::new(
            parent,
            v,
            random_offset(rng, dim),
            random_weight(rng, kind),
        ));
    }
    let extras = rng.gen_range(orbits..=2 * orbits + 1);
    for _ in 0..extras {
        let a = rng.gen_range(0..orbits);
        let b = rng.gen_range(0..orbits);
        edges.push(EdgeOrbit::new(
            a,
            b,
            random_offset(rng, dim),
            random_weight(rng, kind),
        ));
    }
    QuotientGraph::build(dim, orbits, edges).unwrap()
}

/// A well-conditioned random period: identity plus a small perturbation.
pub fn random_period<R: Rng>(rng: &mut R, dim: usize) -> PeriodMap {
    loop {
        let mut basis = Matrix::identity(dim);
        for i in 0..dim {
            for j in 0..dim {
                basis[(i, j)] += rng.gen_range(-0.3..0.3);
            }
        }
        if basis.det().abs() > 0.3 {
            return PeriodMap::new(basis).unwrap();
        }
    }
}

pub fn random_positions<R: Rng>(rng: &mut R, count: usize, period: &PeriodMap) -> Realization {
    let dim = period.dimension();
    Realization {
        positions: (0..count)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .collect(),
        period: period.clone(),
    }
}

/// Haar-ish random rotation from QR of a random matrix, sign-fixed.
pub fn random_orthogonal<R: Rng>(rng: &mut R, dim: usize) -> Matrix {
    loop {
        // Gram-Schmidt on random columns.
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for _ in 0..dim {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            cols.push(v);
        }
        let mut q: Vec<Vec<f64>> = Vec::new();
        let mut failed = false;
        for mut v in cols {
            for u in &q {
                let proj = linalg::dot(&v, u);
                v = linalg::sub(&v, &linalg::scale(u, proj));
            }
            let n = linalg::norm(&v);
            if n < 1e-6 {
                failed = true;
                break;
            }
            q.push(linalg::scale(&v, 1.0 / n));
        }
        if failed {
            continue;
        }
        let mut m = Matrix::zeros(dim, dim);
        for (j, col) in q.iter().enumerate() {
            for i in 0..dim {
                m[(i, j)] = col[i];
            }
        }
        return m;
    }
}

/// Random invertible matrix with determinant of modest size.
pub fn random_invertible<R: Rng>(rng: &mut R, dim: usize) -> Matrix {
    loop {
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = rng.gen_range(-1.2..1.2);
            }
        }
        if m.det().abs() > 0.2 {
            return m;
        }
    }
}

/// Random volume-preserving matrix.
pub fn random_special_linear<R: Rng>(rng: &mut R, dim: usize) -> Matrix {
    let m = random_invertible(rng, dim);
    let det = m.det();
    let scale = det.abs().powf(-1.0 / dim as f64);
    let mut out = m.scaled(scale);
    if det < 0.0 {
        // Flip one column to land in SL rather than det = -1.
        for i in 0..dim {
            out[(i, 0)] = -out[(i, 0)];
        }
    }
    out
}

/// Independent energy oracle: half the sum over both dart orientations
/// of `w ||Phi(e)||^2`, a different summation route from the library's.
pub fn naive_energy(g: &QuotientGraph, r: &Realization) -> f64 {
    let mut total = 0.0;
    for v in 0..g.vertex_count() {
        for d in g.darts_at(v) {
            let vec = r.dart_vector(v, &d);
            total += 0.5 * d.weight * linalg::norm_sq(&vec);
        }
    }
    total
}

/// Equivariant perturbation: moves each orbit representative by a small
/// random vector (every lattice copy moves in lockstep).
pub fn perturbed<R: Rng>(rng: &mut R, r: &Realization, scale: f64) -> Realization {
    let dim = r.dimension();
    Realization {
        positions: r
            .positions
            .iter()
            .map(|p| {
                let delta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-scale..scale)).collect();
                linalg::add(p, &delta)
            })
            .collect(),
        period: r.period.clone(),
    }
}
