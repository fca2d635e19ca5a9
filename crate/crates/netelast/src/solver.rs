//! Harmonic realization, energy, and tension tensors.
//!
//! A realization is harmonic exactly when the weighted dart vectors sum
//! to zero at every vertex. With the gauge `x_0 = 0` this becomes a
//! symmetric positive-definite linear system in the remaining positions:
//! the reduced weighted Laplacian of the quotient graph against one
//! right-hand side per coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Matrix};
use crate::net::{PeriodMap, QuotientGraph, Realization};

/// Symmetric `N x N` tensor of weighted outer products of edge vectors.
/// Its trace is the energy; its top eigenpair drives splitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensionTensor {
    pub matrix: Matrix,
}

impl TensionTensor {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Largest eigenvalue and a unit eigenvector for it.
    pub fn max_eigenpair(&self) -> (f64, Vec<f64>) {
        let (vals, vecs) = linalg::sym_eigen(&self.matrix);
        let last = vals.len() - 1;
        (vals[last], vecs.column(last))
    }
}

/// The reduced Laplacian system `B00 x = c` with the gauge `x_0 = 0`.
///
/// `b00[i][j] = -w_ij` for distinct orbits and `b00[i][i] = sum_j w_ij`;
/// the right-hand side has one column per ambient coordinate,
/// `c_i^k = sum over darts at i of w * rho(offset)^k`. Self-edges cancel
/// and contribute to neither side.
#[derive(Debug, Clone)]
pub struct LaplacianSystem {
    pub b00: Matrix,
    pub rhs: Matrix,
}

/// Assembles the reduced system for the free vertices `1..=n`.
pub fn laplacian_system(g: &QuotientGraph, period: &PeriodMap) -> LaplacianSystem {
    let n = g.vertex_count() - 1;
    let dim = g.dimension();
    let mut full = Matrix::zeros(g.vertex_count(), g.vertex_count());
    let mut c = Matrix::zeros(g.vertex_count(), dim);
    for e in g.edges() {
        if e.tail == e.head {
            continue;
        }
        let w = e.weight;
        full[(e.tail, e.head)] -= w;
        full[(e.head, e.tail)] -= w;
        full[(e.tail, e.tail)] += w;
        full[(e.head, e.head)] += w;
        let shift = period.apply(&e.offset);
        for k in 0..dim {
            c[(e.tail, k)] += w * shift[k];
            c[(e.head, k)] -= w * shift[k];
        }
    }
    let mut b00 = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b00[(i, j)] = full[(i + 1, j + 1)];
        }
    }
    let mut rhs = Matrix::zeros(n, dim);
    for i in 0..n {
        for k in 0..dim {
            rhs[(i, k)] = c[(i + 1, k)];
        }
    }
    LaplacianSystem { b00, rhs }
}

/// Solves for the unique harmonic realization with `x_0 = 0`.
///
/// One Cholesky factorization is reused for all coordinate right-hand
/// sides. The weighted dart sums of the result are verified against
/// `1e-10 * max edge length * max weight`.
pub fn harmonic_realize(g: &QuotientGraph, period: &PeriodMap) -> Result<Realization> {
    if period.dimension() != g.dimension() {
        return Err(Error::InvalidParameter(
            "period dimension does not match graph".into(),
        ));
    }
    if !g.is_positively_connected() {
        return Err(Error::Disconnected);
    }
    let n = g.vertex_count() - 1;
    let dim = g.dimension();
    let mut positions = vec![vec![0.0; dim]; g.vertex_count()];
    if n > 0 {
        let system = laplacian_system(g, period);
        let chol = Cholesky::new(&system.b00)?;
        for k in 0..dim {
            let b = system.rhs.column(k);
            let x = chol.solve(&b);
            for (row, value) in positions.iter_mut().skip(1).zip(x) {
                row[k] = value;
            }
        }
    }
    let realization = Realization {
        positions,
        period: period.clone(),
    };
    check_harmonic(g, &realization)?;
    Ok(realization)
}

/// Residual tolerance scale for harmonicity: max edge length times max
/// weight, floored at 1 so degenerate nets still get an absolute bound.
fn harmonic_scale(g: &QuotientGraph, r: &Realization) -> f64 {
    let mut max_len = 0.0_f64;
    let mut max_w = 0.0_f64;
    for e in g.edges() {
        max_len = max_len.max(linalg::norm(&r.edge_vector(e)));
        max_w = max_w.max(e.weight);
    }
    (max_len * max_w).max(1.0)
}

fn check_harmonic(g: &QuotientGraph, r: &Realization) -> Result<()> {
    let tol = 1e-10 * harmonic_scale(g, r);
    for v in 0..g.vertex_count() {
        let res = harmonic_residual(g, r, v);
        if linalg::norm(&res) > tol {
            return Err(Error::SingularSystem(format!(
                "harmonic residual {:.3e} at vertex {v}",
                linalg::norm(&res)
            )));
        }
    }
    Ok(())
}

/// Weighted sum of dart vectors at `v`; zero exactly when the
/// realization is harmonic there.
pub fn harmonic_residual(g: &QuotientGraph, r: &Realization, v: usize) -> Vec<f64> {
    let mut sum = vec![0.0; g.dimension()];
    for d in g.darts_at(v) {
        let vec = r.dart_vector(v, &d);
        for k in 0..sum.len() {
            sum[k] += d.weight * vec[k];
        }
    }
    sum
}

/// Local tension tensor at `v`: the weighted outer products of all dart
/// vectors based there. True loops contribute nothing.
pub fn local_tension(g: &QuotientGraph, r: &Realization, v: usize) -> TensionTensor {
    let dim = g.dimension();
    let mut m = Matrix::zeros(dim, dim);
    for d in g.darts_at(v) {
        let vec = r.dart_vector(v, &d);
        linalg::add_outer(&mut m, d.weight, &vec);
    }
    TensionTensor { matrix: m }
}

/// Global tension tensor per period: half the sum of the local tensors.
pub fn global_tension(g: &QuotientGraph, r: &Realization) -> TensionTensor {
    let dim = g.dimension();
    let mut m = Matrix::zeros(dim, dim);
    for v in 0..g.vertex_count() {
        let local = local_tension(g, r, v);
        m = m.add(&local.matrix);
    }
    TensionTensor {
        matrix: m.scaled(0.5),
    }
}

/// Energy per period. Computed as the trace of the global tension
/// tensor, so the trace identity holds bit for bit.
pub fn energy(g: &QuotientGraph, r: &Realization) -> f64 {
    global_tension(g, r).trace()
}

/// Tension tensor divided by the total unoriented weight; invariant
/// under refining the period and under scaling all weights.
pub fn per_weight_tension(g: &QuotientGraph, r: &Realization) -> Result<TensionTensor> {
    let total = g.total_weight();
    if total <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    let t = global_tension(g, r);
    Ok(TensionTensor {
        matrix: t.matrix.scaled(1.0 / total),
    })
}

/// Matrix `M = T_w^{-1}` of the tension ellipsoid `{x : x^T M x = 1}`.
pub fn ellipsoid_matrix(g: &QuotientGraph, r: &Realization) -> Result<Matrix> {
    let tw = per_weight_tension(g, r)?;
    let (vals, vecs) = linalg::sym_eigen(&tw.matrix);
    let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut inv = Matrix::zeros(vals.len(), vals.len());
    for (i, &v) in vals.iter().enumerate() {
        if v <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPositiveDefinite(
                "per-weight tension is singular (flat net)".into(),
            ));
        }
        inv[(i, i)] = 1.0 / v;
    }
    Ok(vecs.matmul(&inv).matmul(&vecs.transpose()))
}

/// Applies an invertible linear map to positions and period alike.
pub fn apply_linear(r: &Realization, a: &Matrix) -> Result<Realization> {
    if !a.is_square() || a.rows() != r.dimension() {
        return Err(Error::InvalidParameter(
            "transform dimension does not match realization".into(),
        ));
    }
    if a.det() == 0.0 {
        return Err(Error::InvalidParameter("transform must be invertible".into()));
    }
    Ok(Realization {
        positions: r.positions.iter().map(|p| a.matvec(p)).collect(),
        period: r.period.transformed(a)?,
    })
}

/// Finds the volume-preserving linear map that makes the harmonic
/// realization standard: `A = det(S)^{-1/N} S` with `S = T^{-1/2}`.
///
/// Returns the standardized realization together with `A`. Fails when
/// the harmonic tension is not positive definite, i.e. the net is flat
/// in some direction.
pub fn standardize(g: &QuotientGraph, period: &PeriodMap) -> Result<(Realization, Matrix)> {
    let harmonic = harmonic_realize(g, period)?;
    let tension = global_tension(g, &harmonic);
    let s = linalg::sym_inv_sqrt(&tension.matrix)?;
    let n = g.dimension() as f64;
    let a = s.scaled(s.det().powf(-1.0 / n));
    let standardized = apply_linear(&harmonic, &a)?;
    Ok((standardized, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{lattice_preset, EdgeOrbit, LatticeOffset, LatticePreset};

    fn hexagonal(l: f64, w0: f64, w1: f64) -> (QuotientGraph, PeriodMap) {
        lattice_preset(&LatticePreset::Hexagonal { l, w0, w1 }).unwrap()
    }

    #[test]
    fn hexagonal_harmonic_positions() {
        let (g, period) = hexagonal(1.0, 1.0, 1.0);
        let r = harmonic_realize(&g, &period).unwrap();
        assert_eq!(r.positions[0], vec![0.0, 0.0]);
        let expected = [3.0_f64.sqrt() / 2.0, 0.5];
        for (value, want) in r.positions[1].iter().zip(expected) {
            assert!((value - want).abs() < 1e-12);
        }
    }

    #[test]
    fn single_vertex_is_trivially_harmonic() {
        let (g, period) = lattice_preset(&LatticePreset::Cubic {
            n: 3,
            a: 0.5,
            m: 1.0,
        })
        .unwrap();
        let r = harmonic_realize(&g, &period).unwrap();
        assert_eq!(r.positions, vec![vec![0.0; 3]]);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let g = QuotientGraph::build(
            2,
            2,
            vec![EdgeOrbit::new(0, 1, LatticeOffset::zero(2), 0.0)],
        )
        .unwrap();
        let period = PeriodMap::new(Matrix::identity(2)).unwrap();
        assert!(matches!(
            harmonic_realize(&g, &period),
            Err(Error::Disconnected)
        ));
    }

    #[test]
    fn hexagonal_energy_and_tension() {
        for (l, w1) in [(1.0, 1.0), (0.7, 2.5)] {
            let (g, period) = hexagonal(l, 1.3, w1);
            let r = harmonic_realize(&g, &period).unwrap();
            let e = energy(&g, &r);
            let expected = 3.0 * w1 * l * l;
            assert!((e - expected).abs() < 1e-12 * expected);
            let t0 = local_tension(&g, &r, 0);
            let t1 = local_tension(&g, &r, 1);
            for t in [&t0, &t1] {
                assert!((t.matrix[(0, 0)] - 1.5 * w1 * l * l).abs() < 1e-12);
                assert!((t.matrix[(1, 1)] - 1.5 * w1 * l * l).abs() < 1e-12);
                assert!(t.matrix[(0, 1)].abs() < 1e-12);
            }
            let global = global_tension(&g, &r);
            assert_eq!(global.trace(), e);
        }
    }

    #[test]
    fn square_lattice_energy_is_dimension() {
        let (g, period) = lattice_preset(&LatticePreset::Square {
            l: 1.0,
            w0: 1.0,
            w1: 1.0,
        })
        .unwrap();
        let r = harmonic_realize(&g, &period).unwrap();
        assert!((energy(&g, &r) - 2.0).abs() < 1e-14);
        let t = local_tension(&g, &r, 0);
        assert!((t.matrix[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((t.matrix[(1, 1)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn coincident_positions_have_zero_energy() {
        let g = QuotientGraph::build(
            2,
            2,
            vec![EdgeOrbit::new(0, 1, LatticeOffset::zero(2), 2.0)],
        )
        .unwrap();
        let period = PeriodMap::new(Matrix::identity(2)).unwrap();
        let r = Realization {
            positions: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            period,
        };
        assert_eq!(energy(&g, &r), 0.0);
        assert_eq!(global_tension(&g, &r).matrix, Matrix::zeros(2, 2));
    }

    #[test]
    fn loops_only_vertex_has_zero_local_tension() {
        let g = QuotientGraph::build(
            2,
            1,
            vec![EdgeOrbit::new(0, 0, LatticeOffset::zero(2), 3.0)],
        )
        .unwrap();
        let period = PeriodMap::new(Matrix::identity(2)).unwrap();
        let r = harmonic_realize(&g, &period).unwrap();
        assert_eq!(local_tension(&g, &r, 0).matrix, Matrix::zeros(2, 2));
        // Per-weight tension of a loops-only net is the zero matrix.
        let tw = per_weight_tension(&g, &r).unwrap();
        assert_eq!(tw.matrix, Matrix::zeros(2, 2));
    }

    #[test]
    fn per_weight_tension_hexagonal() {
        let (g, period) = hexagonal(1.0, 1.0, 1.0);
        let r = harmonic_realize(&g, &period).unwrap();
        // Orbit weights: two loops plus three edges = 5.
        let tw = per_weight_tension(&g, &r).unwrap();
        assert!((tw.matrix[(0, 0)] - 0.3).abs() < 1e-14);
        assert!((tw.matrix[(1, 1)] - 0.3).abs() < 1e-14);
        // Doubling all weights leaves it unchanged.
        let doubled = QuotientGraph::build(
            2,
            2,
            g.edges()
                .iter()
                .map(|e| EdgeOrbit::new(e.tail, e.head, e.offset.clone(), 2.0 * e.weight))
                .collect(),
        )
        .unwrap();
        let r2 = harmonic_realize(&doubled, &period).unwrap();
        let tw2 = per_weight_tension(&doubled, &r2).unwrap();
        assert!(tw.matrix.sub(&tw2.matrix).frobenius_norm() < 1e-14);
    }

    #[test]
    fn ellipsoid_of_hexagonal_is_a_circle() {
        let (g, period) = hexagonal(1.0, 1.0, 1.0);
        let r = harmonic_realize(&g, &period).unwrap();
        let m = ellipsoid_matrix(&g, &r).unwrap();
        // T_w = 0.3 I, so the ellipse is the circle of radius sqrt(0.3).
        assert!((m[(0, 0)] - 1.0 / 0.3).abs() < 1e-12);
        assert!((m[(1, 1)] - 1.0 / 0.3).abs() < 1e-12);
        assert!(m[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_scales_with_linear_maps() {
        let (g, period) = hexagonal(1.0, 1.0, 1.0);
        let r = harmonic_realize(&g, &period).unwrap();
        let a = Matrix::diagonal(&[2.0, 0.5]);
        let stretched = apply_linear(&r, &a).unwrap();
        let m = ellipsoid_matrix(&g, &stretched).unwrap();
        // Ell(A(X, Phi)) = A Ell(X, Phi): semi-axes scale by 2 and 1/2.
        let base = 0.3_f64;
        assert!((m[(0, 0)] - 1.0 / (4.0 * base)).abs() < 1e-12);
        assert!((m[(1, 1)] - 1.0 / (0.25 * base)).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_chain_ellipsoid_is_an_interval() {
        let g = QuotientGraph::build(
            1,
            1,
            vec![EdgeOrbit::new(0, 0, LatticeOffset(vec![1]), 1.0)],
        )
        .unwrap();
        let period = PeriodMap::new(Matrix::diagonal(&[1.0])).unwrap();
        let r = harmonic_realize(&g, &period).unwrap();
        let m = ellipsoid_matrix(&g, &r).unwrap();
        assert_eq!(m.rows(), 1);
        assert!(m[(0, 0)] > 0.0);
    }

    #[test]
    fn apply_linear_identity_and_stretch() {
        let (g, period) = hexagonal(1.0, 1.0, 1.0);
        let r = harmonic_realize(&g, &period).unwrap();
        let same = apply_linear(&r, &Matrix::identity(2)).unwrap();
        assert_eq!(r, same);
        let lambda = 2.0;
        let a = Matrix::diagonal(&[lambda, 1.0 / lambda]);
        let stretched = apply_linear(&r, &a).unwrap();
        let e = energy(&g, &stretched);
        let expected = 1.5 * (lambda * lambda + 1.0 / (lambda * lambda));
        assert!((e - expected).abs() < 1e-12 * expected);
        // Covolume is preserved by the unimodular stretch.
        assert!((stretched.period.covolume() - r.period.covolume()).abs() < 1e-12);
        // The transformed realization is still harmonic.
        for v in 0..2 {
            assert!(linalg::norm(&harmonic_residual(&g, &stretched, v)) < 1e-10);
        }
    }

    #[test]
    fn conjugation_law_for_tension() {
        let (g, period) = hexagonal(1.0, 0.5, 1.5);
        let r = harmonic_realize(&g, &period).unwrap();
        let a = Matrix::from_rows(&[vec![1.2, -0.3], vec![0.4, 0.9]]);
        let t = global_tension(&g, &r).matrix;
        let mapped = apply_linear(&r, &a).unwrap();
        let t_mapped = global_tension(&g, &mapped).matrix;
        let expected = a.congruence(&t);
        let rel = t_mapped.sub(&expected).frobenius_norm() / expected.frobenius_norm();
        assert!(rel < 1e-12);
    }

    #[test]
    fn standardize_hexagonal_is_identity() {
        let (g, period) = hexagonal(1.0, 1.0, 1.0);
        let (std_r, a) = standardize(&g, &period).unwrap();
        assert!(a.sub(&Matrix::identity(2)).frobenius_norm() < 1e-10);
        let t = global_tension(&g, &std_r).matrix;
        assert!((t[(0, 0)] - 1.5).abs() < 1e-10);
        assert!(t[(0, 1)].abs() < 1e-10);
    }

    #[test]
    fn standardize_undoes_a_stretch() {
        let (g, period) = hexagonal(1.0, 1.0, 1.0);
        let stretch = Matrix::diagonal(&[2.0, 0.5]);
        let stretched_period = period.transformed(&stretch).unwrap();
        let (std_r, a) = standardize(&g, &stretched_period).unwrap();
        assert!((a.det() - 1.0).abs() < 1e-12);
        let t = global_tension(&g, &std_r).matrix;
        let c = t.trace() / 2.0;
        let iso = t.sub(&Matrix::identity(2).scaled(c)).frobenius_norm();
        assert!(iso <= 1e-9 * t.trace());
        assert!((t[(0, 0)] - 1.5).abs() < 1e-9);
        // Covolume unchanged by the unimodular correction.
        assert!(
            (std_r.period.covolume() - stretched_period.covolume()).abs()
                < 1e-12 * stretched_period.covolume()
        );
    }

    #[test]
    fn standardize_rejects_flat_nets() {
        // A 2D net whose edges all point along the x axis.
        let g = QuotientGraph::build(
            2,
            1,
            vec![EdgeOrbit::new(0, 0, LatticeOffset(vec![1, 0]), 1.0)],
        )
        .unwrap();
        let period = PeriodMap::new(Matrix::identity(2)).unwrap();
        assert!(matches!(
            standardize(&g, &period),
            Err(Error::NotPositiveDefinite(_))
        ));
    }
}
