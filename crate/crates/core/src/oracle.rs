//! Brute-force references: dense propagators and the pure-state trace
//! distance. These favour trustworthiness over speed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_deviation, inner, norm, spectral_norm};
use crate::Limits;

const HERMITIAN_TOL: f64 = 1e-10;
/// Successive step-doubled products closer than this are accepted.
const CONVERGENCE_TOL: f64 = 1e-10;
const EIGEN_TOL: f64 = 1e-11;
const MAX_STEPS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PropagatorMethod {
    Eigendecomposition,
    FineStepProduct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactPropagator {
    pub matrix: DMatrix<Complex64>,
    pub t: f64,
    pub method: PropagatorMethod,
}

impl ExactPropagator {
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        crate::linalg::matvec(&self.matrix, psi)
    }

    /// `‖U†U - I‖` in spectral norm.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.matrix.nrows();
        spectral_norm(&(self.matrix.adjoint() * &self.matrix - DMatrix::identity(d, d)))
    }
}

fn check_size(h: &DMatrix<Complex64>, limits: &Limits) -> Result<()> {
    let d = h.nrows();
    if d != h.ncols() || !d.is_power_of_two() {
        return Err(Error::DimensionMismatch {
            expected: d.next_power_of_two(),
            got: h.ncols(),
        });
    }
    limits.check_dense(d.trailing_zeros() as usize)
}

fn eigen_residual(h: &DMatrix<Complex64>, vectors: &DMatrix<Complex64>, values: &[f64]) -> f64 {
    let mut scaled = vectors.clone();
    for (mut col, &lambda) in scaled.column_iter_mut().zip(values) {
        col *= Complex64::new(lambda, 0.0);
    }
    let dim = h.nrows();
    let pairs = (h * vectors - scaled).norm();
    let orth = (vectors.adjoint() * vectors - DMatrix::<Complex64>::identity(dim, dim)).norm();
    pairs.max(orth * (1.0 + h.norm()))
}

/// Eigenvalues and orthonormal eigenvectors of Hermitian `h`, checked
/// through `‖HV - VΛ‖_F` and `‖V†V - 1‖_F`.
///
/// The symmetric QR iteration occasionally returns wrong eigenpairs on
/// matrices with degenerate spectra; those are redone with a complex Schur
/// decomposition, whose triangular factor is diagonal for Hermitian input.
pub fn hermitian_eigen(h: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let tol = EIGEN_TOL * (1.0 + h.norm());
    let eig = h.clone().symmetric_eigen();
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let residual = eigen_residual(h, &eig.eigenvectors, &values);
    if residual <= tol {
        return Ok((values, eig.eigenvectors));
    }
    let (q, t) = h.clone().schur().unpack();
    let values: Vec<f64> = (0..t.nrows()).map(|k| t[(k, k)].re).collect();
    if eigen_residual(h, &q, &values) <= tol {
        return Ok((values, q));
    }
    Err(Error::NonConvergence {
        what: "Hermitian eigendecomposition",
        limit: h.nrows(),
    })
}

fn spectral_exp(h: &DMatrix<Complex64>, t: f64) -> Result<DMatrix<Complex64>> {
    let (values, v) = hermitian_eigen(h)?;
    let mut scaled = v.clone();
    for (mut col, &lambda) in scaled.column_iter_mut().zip(&values) {
        col *= Complex64::from_polar(1.0, -lambda * t);
    }
    Ok(scaled * v.adjoint())
}

/// `exp(-iHt)` from the spectral decomposition of Hermitian `H`.
pub fn expm_hermitian(h: &DMatrix<Complex64>, t: f64, limits: &Limits) -> Result<ExactPropagator> {
    check_size(h, limits)?;
    let deviation = hermitian_deviation(h);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(ExactPropagator {
        matrix: spectral_exp(h, t)?,
        t,
        method: PropagatorMethod::Eigendecomposition,
    })
}

/// `Π_{q = steps-1..0} exp(-i H(t0 + (q + ½)Δ) Δ)`, `Δ = (t1 - t0) / steps`.
pub fn midpoint_product<F>(h_of_t: &F, t0: f64, t1: f64, steps: usize) -> Result<DMatrix<Complex64>>
where
    F: Fn(f64) -> DMatrix<Complex64>,
{
    let dt = (t1 - t0) / steps as f64;
    let first = h_of_t(t0 + 0.5 * dt);
    let mut u = spectral_exp(&first, dt)?;
    for q in 1..steps {
        let hq = h_of_t(t0 + (q as f64 + 0.5) * dt);
        u = spectral_exp(&hq, dt)? * u;
    }
    Ok(u)
}

/// Time-ordered propagator from `t0` to `t1` by midpoint products, doubling
/// `steps` until two successive products agree to `1e-10` in spectral norm.
pub fn time_ordered_between<F>(
    h_of_t: F,
    t0: f64,
    t1: f64,
    steps: usize,
    limits: &Limits,
) -> Result<ExactPropagator>
where
    F: Fn(f64) -> DMatrix<Complex64>,
{
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let probe = h_of_t(t0);
    check_size(&probe, limits)?;
    let mut steps = steps;
    let mut current = midpoint_product(&h_of_t, t0, t1, steps)?;
    loop {
        if steps * 2 > MAX_STEPS {
            return Err(Error::NonConvergence {
                what: "time-ordered product",
                limit: MAX_STEPS,
            });
        }
        steps *= 2;
        let refined = midpoint_product(&h_of_t, t0, t1, steps)?;
        let diff = spectral_norm(&(&refined - &current));
        current = refined;
        if diff < CONVERGENCE_TOL {
            break;
        }
    }
    Ok(ExactPropagator {
        matrix: current,
        t: t1 - t0,
        method: PropagatorMethod::FineStepProduct,
    })
}

/// Time-ordered propagator on `[0, t]`.
pub fn time_ordered_exact<F>(h_of_t: F, t: f64, steps: usize, limits: &Limits) -> Result<ExactPropagator>
where
    F: Fn(f64) -> DMatrix<Complex64>,
{
    time_ordered_between(h_of_t, 0.0, t, steps, limits)
}

/// `sqrt(1 - |⟨φ|ψ⟩|²)`, the trace distance of two pure states.
pub fn trace_distance(phi: &[Complex64], psi: &[Complex64]) -> Result<f64> {
    if phi.len() != psi.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            got: psi.len(),
        });
    }
    for v in [phi, psi] {
        let nrm = norm(v);
        if (nrm - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { norm: nrm });
        }
    }
    // Evaluated through the angle between the rays, which stays accurate
    // when the states are nearly parallel (1 - |⟨φ|ψ⟩|² would cancel).
    let (na, nb) = (norm(phi), norm(psi));
    let z = inner(phi, psi) / (na * nb);
    if z.norm() == 0.0 {
        return Ok(1.0);
    }
    let align = z.conj() / z.norm();
    let chord = phi
        .iter()
        .zip(psi)
        .map(|(a, b)| (a / na - b * align / nb).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let angle = 2.0 * (chord / 2.0).min(1.0).asin();
    Ok(angle.sin().clamp(0.0, 1.0))
}

/// `Σ_{k≤K} (-iHτ)^k / k!` by Horner's rule.
pub fn taylor_polynomial(h: &DMatrix<Complex64>, tau: f64, order: usize) -> DMatrix<Complex64> {
    let d = h.nrows();
    let id = DMatrix::<Complex64>::identity(d, d);
    let mut p = id.clone();
    for k in (1..=order).rev() {
        p = &id + (h * &p) * c(0.0, -tau / k as f64);
    }
    p
}
