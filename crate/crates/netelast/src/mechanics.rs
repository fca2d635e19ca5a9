//! Stress tensors and uniaxial extension profiles.
//!
//! Everything here is a closed form in a reference tension tensor: a
//! harmonic realization transforms linearly under deformation, so the
//! tensor after a volume-preserving stretch is a congruence of the
//! reference tensor and no re-solve is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::solver::TensionTensor;

/// Cauchy stress `(2/V) T` together with its traceless part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressState {
    pub cauchy: Matrix,
    pub deviatoric: Matrix,
    pub volume: f64,
}

/// Volume-preserving uniaxial extension: stretch by `lambda` along the
/// first axis of the rotated frame and contract the remaining axes by
/// `lambda^{-1/(N-1)}`.
pub fn uniaxial_map(lambda: f64, dim: usize, rotation: &Matrix) -> Result<Matrix> {
    if lambda <= 0.0 {
        return Err(Error::InvalidParameter("stretch ratio must be positive".into()));
    }
    if dim < 2 {
        return Err(Error::InvalidParameter(
            "uniaxial extension needs dimension at least 2".into(),
        ));
    }
    if rotation.rows() != dim || !linalg::is_orthogonal(rotation, 1e-9) {
        return Err(Error::NotOrthogonal);
    }
    let shrink = lambda.powf(-1.0 / (dim as f64 - 1.0));
    let mut diag = vec![shrink; dim];
    diag[0] = lambda;
    let d = Matrix::diagonal(&diag);
    Ok(rotation.matmul(&d).matmul(&rotation.transpose()))
}

/// 2D rotation by `theta`, the extension frame used by the planar
/// stress-strain examples.
pub fn rotation2(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    Matrix::from_rows(&[vec![c, -s], vec![s, c]])
}

/// Cauchy stress of a tension tensor at cell volume `v`.
pub fn cauchy_stress(t: &TensionTensor, v: f64) -> Result<StressState> {
    if v <= 0.0 {
        return Err(Error::InvalidParameter("cell volume must be positive".into()));
    }
    let n = t.matrix.rows();
    let cauchy = t.matrix.scaled(2.0 / v);
    let pressure = cauchy.trace() / n as f64;
    let deviatoric = cauchy.sub(&Matrix::identity(n).scaled(pressure));
    Ok(StressState {
        cauchy,
        deviatoric,
        volume: v,
    })
}

/// Reference tensor expressed in the extension frame.
fn rotated_tensor(t_ref: &TensionTensor, rotation: &Matrix) -> Result<Matrix> {
    if !linalg::is_orthogonal(rotation, 1e-9) {
        return Err(Error::NotOrthogonal);
    }
    Ok(rotation.transpose().congruence(&t_ref.matrix))
}

/// Sum of the trailing diagonal entries `tau_22 + ... + tau_NN`.
fn tail_sum(tau: &Matrix) -> f64 {
    (1..tau.rows()).map(|i| tau[(i, i)]).sum()
}

/// Energy along the extension and its derivative:
/// `E(lambda) = tau_11 lambda^2 + (tau_22 + ... + tau_NN) lambda^{-2/(N-1)}`.
pub fn energy_profile(
    t_ref: &TensionTensor,
    lambda: f64,
    rotation: &Matrix,
) -> Result<(f64, f64)> {
    if lambda <= 0.0 {
        return Err(Error::InvalidParameter("stretch ratio must be positive".into()));
    }
    let tau = rotated_tensor(t_ref, rotation)?;
    let n = tau.rows() as f64;
    if n < 2.0 {
        return Err(Error::InvalidParameter(
            "uniaxial extension needs dimension at least 2".into(),
        ));
    }
    let head = tau[(0, 0)];
    let tail = tail_sum(&tau);
    let q = 2.0 / (n - 1.0);
    let e = head * lambda.powi(2) + tail * lambda.powf(-q);
    let de = 2.0 * head * lambda - q * tail * lambda.powf(-q - 1.0);
    Ok((e, de))
}

/// Engineering stress `(1/V) dE/dlambda`.
pub fn engineering_stress(
    t_ref: &TensionTensor,
    volume: f64,
    lambda: f64,
    rotation: &Matrix,
) -> Result<f64> {
    if volume <= 0.0 {
        return Err(Error::InvalidParameter("cell volume must be positive".into()));
    }
    let (_, de) = energy_profile(t_ref, lambda, rotation)?;
    Ok(de / volume)
}

/// True stress `lambda * sigma_eng`, measured per deformed cross-section.
pub fn true_stress(
    t_ref: &TensionTensor,
    volume: f64,
    lambda: f64,
    rotation: &Matrix,
) -> Result<f64> {
    Ok(lambda * engineering_stress(t_ref, volume, lambda, rotation)?)
}

/// Stretch ratio minus one at which the engineering stress returns to
/// zero: `((tau_22 + ... + tau_NN) / ((N-1) tau_11))^{(N-1)/2N} - 1`.
pub fn permanent_strain(t_ref: &TensionTensor, rotation: &Matrix) -> Result<f64> {
    let tau = rotated_tensor(t_ref, rotation)?;
    let n = tau.rows() as f64;
    if n < 2.0 {
        return Err(Error::InvalidParameter(
            "permanent strain needs dimension at least 2".into(),
        ));
    }
    let head = tau[(0, 0)];
    if head <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "tau_11 = {head:.3e} along the extension axis"
        )));
    }
    let ratio = tail_sum(&tau) / ((n - 1.0) * head);
    Ok(ratio.powf((n - 1.0) / (2.0 * n)) - 1.0)
}

/// Young's modulus of a standard net: `4 E0 / ((N-1) V)`.
pub fn youngs_modulus(e0: f64, volume: f64, dim: usize) -> Result<f64> {
    if e0 <= 0.0 || volume <= 0.0 || dim < 2 {
        return Err(Error::InvalidParameter(
            "Young's modulus needs positive energy and volume in dimension at least 2".into(),
        ));
    }
    Ok(4.0 * e0 / ((dim as f64 - 1.0) * volume))
}
