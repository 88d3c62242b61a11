//! Numerical Legendre transform of the log-partition potential.
//!
//! The dual potential, the inverse coordinate map, and the equilibrium
//! entropy identities. Inversion is a damped Newton iteration on
//! `grad Psi(theta) = eta` with the Fisher metric as its Jacobian; models
//! whose metric is singular are refused rather than regularized, so the
//! duality identities stay exact.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::exp_family::{
    equilibrium_distribution, fisher_metric, mean_vector, EtaPoint, StateSpace, ThetaPoint,
};

/// Residual below which the Newton iteration stops; one decade tighter than
/// the guaranteed `1e-10` map accuracy.
const NEWTON_TOL: f64 = 1e-11;
const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 20;

/// Invert the expectation-parameter map: find `theta` with
/// `grad Psi(theta) = eta` to sup-norm `1e-10`.
pub fn theta_of_eta(model: &StateSpace, et: &EtaPoint) -> Result<ThetaPoint> {
    if et.dim() != model.num_observables() {
        return Err(CoreError::DimensionMismatch {
            expected: model.num_observables(),
            found: et.dim(),
        });
    }
    if model.is_rank_deficient() {
        return Err(CoreError::RankDeficientModel);
    }

    let target = et.coords();
    let mut theta = DVector::zeros(model.num_observables());
    let mut residual = mean_vector(model, &ThetaPoint::from_vector(theta.clone())?)? - target;
    let mut res_norm = residual.abs().max();

    for iteration in 0..MAX_ITERATIONS {
        if res_norm <= NEWTON_TOL {
            return ThetaPoint::from_vector(theta);
        }
        let metric = fisher_metric(model, &ThetaPoint::from_vector(theta.clone())?)?;
        let chol = Cholesky::new(metric).ok_or(CoreError::SingularMetric)?;
        let direction = -chol.solve(&residual);

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &theta + &direction * step;
            let cand_point = ThetaPoint::from_vector(candidate.clone())?;
            let cand_residual = mean_vector(model, &cand_point)? - target;
            let cand_norm = cand_residual.abs().max();
            if cand_norm < res_norm || cand_norm <= NEWTON_TOL {
                theta = candidate;
                residual = cand_residual;
                res_norm = cand_norm;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            return Err(CoreError::NonConvergence {
                residual: res_norm,
                iterations: iteration + 1,
            });
        }
    }
    if res_norm <= NEWTON_TOL {
        return ThetaPoint::from_vector(theta);
    }
    Err(CoreError::NonConvergence {
        residual: res_norm,
        iterations: MAX_ITERATIONS,
    })
}

/// Dual potential `Phi(eta) = theta(eta) . eta - Psi(theta(eta))`, the
/// convex conjugate of the log-partition potential. Non-positive on
/// probability models (it is a negative entropy).
pub fn phi_eq(model: &StateSpace, et: &EtaPoint) -> Result<f64> {
    let th = theta_of_eta(model, et)?;
    Ok(th.coords().dot(et.coords()) - crate::exp_family::psi_eq(model, &th)?)
}

/// Negative entropy of the equilibrium distribution.
pub fn h_eq(model: &StateSpace, th: &ThetaPoint) -> Result<f64> {
    let p = equilibrium_distribution(model, th)?;
    Ok(p.probabilities().iter().map(|&v| v * v.ln()).sum())
}

/// Gradient of the dual potential, which is the inverse coordinate map
/// itself.
pub fn grad_phi(model: &StateSpace, et: &EtaPoint) -> Result<DVector<f64>> {
    Ok(theta_of_eta(model, et)?.coords().clone())
}

/// Hessian of the dual potential: the matrix inverse of the Fisher metric at
/// the pulled-back point.
pub fn hessian_phi(model: &StateSpace, et: &EtaPoint) -> Result<DMatrix<f64>> {
    let th = theta_of_eta(model, et)?;
    let metric = fisher_metric(model, &th)?;
    Cholesky::new(metric)
        .map(|c| c.inverse())
        .ok_or(CoreError::SingularMetric)
}
