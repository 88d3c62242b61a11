//! Expectation-variable dynamics derived exactly from the solvable master
//! equations.
//!
//! In natural parameters the state is `(theta, <O>, Psi)` on `R^{2n+1}`:
//! `theta` is frozen while the moments and the potential relax linearly
//! toward their equilibrium values. The dual system swaps the roles of the
//! coordinates, freezing `eta` and relaxing `(<theta>, H)` toward
//! `(grad Phi, Phi)`. Both systems have closed exponential solutions, and
//! both can be recomputed from distribution-level trajectories, which makes
//! the two routes mutual oracles.

use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::exp_family::{mean_vector, psi_eq, Distribution, EtaPoint, StateSpace, ThetaPoint};
use crate::legendre::{grad_phi, phi_eq};
use crate::master;
use crate::ode;

/// State of the primary moment system; `theta` is a static coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryMomentState {
    theta: DVector<f64>,
    moments: DVector<f64>,
    psi: f64,
}

impl PrimaryMomentState {
    pub fn new(theta: Vec<f64>, moments: Vec<f64>, psi: f64) -> Result<Self> {
        let theta = DVector::from_vec(theta);
        let moments = DVector::from_vec(moments);
        if moments.len() != theta.len() {
            return Err(CoreError::DimensionMismatch {
                expected: theta.len(),
                found: moments.len(),
            });
        }
        if theta.iter().chain(moments.iter()).any(|v| !v.is_finite()) || !psi.is_finite() {
            return Err(CoreError::InvalidModel(
                "moment state: components must be finite".into(),
            ));
        }
        Ok(Self {
            theta,
            moments,
            psi,
        })
    }

    /// The fixed point: moments and potential at their equilibrium values.
    pub fn equilibrium(model: &StateSpace, th: &ThetaPoint) -> Result<Self> {
        Ok(Self {
            theta: th.coords().clone(),
            moments: mean_vector(model, th)?,
            psi: psi_eq(model, th)?,
        })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn moments(&self) -> &DVector<f64> {
        &self.moments
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn theta_point(&self) -> ThetaPoint {
        ThetaPoint::from_vector(self.theta.clone()).expect("validated at construction")
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let dm = (&self.moments - &other.moments).abs().max();
        let dt = (&self.theta - &other.theta).abs().max();
        dm.max(dt).max((self.psi - other.psi).abs())
    }
}

/// Tangent of the primary system; the `theta` block is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryMomentTangent {
    pub dtheta: DVector<f64>,
    pub dmoments: DVector<f64>,
    pub dpsi: f64,
}

impl PrimaryMomentTangent {
    pub fn max_abs(&self) -> f64 {
        self.dtheta
            .abs()
            .max()
            .max(self.dmoments.abs().max())
            .max(self.dpsi.abs())
    }
}

/// Right-hand side of the primary moment system:
/// `d<O>/dt = grad Psi - <O>`, `dPsi/dt = Psi_eq - Psi`, `dtheta/dt = 0`.
pub fn primary_moment_rhs(
    model: &StateSpace,
    s: &PrimaryMomentState,
) -> Result<PrimaryMomentTangent> {
    let th = s.theta_point();
    Ok(PrimaryMomentTangent {
        dtheta: DVector::zeros(s.theta.len()),
        dmoments: mean_vector(model, &th)? - &s.moments,
        dpsi: psi_eq(model, &th)? - s.psi,
    })
}

/// Closed solution: exponential interpolation toward the equilibrium values.
pub fn primary_moment_exact(
    model: &StateSpace,
    s0: &PrimaryMomentState,
    t: f64,
) -> Result<PrimaryMomentState> {
    if t < 0.0 {
        return Err(CoreError::NegativeTime(t));
    }
    let th = s0.theta_point();
    let target_m = mean_vector(model, &th)?;
    let target_psi = psi_eq(model, &th)?;
    let decay = (-t).exp();
    Ok(PrimaryMomentState {
        theta: s0.theta.clone(),
        moments: &target_m + (&s0.moments - &target_m) * decay,
        psi: target_psi + (s0.psi - target_psi) * decay,
    })
}

/// State of the dual moment system; `eta` is a static coordinate and must
/// lie in the moment-polytope interior.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMomentState {
    eta: EtaPoint,
    theta_avg: DVector<f64>,
    h: f64,
}

impl DualMomentState {
    pub fn new(model: &StateSpace, eta: Vec<f64>, theta_avg: Vec<f64>, h: f64) -> Result<Self> {
        let eta = EtaPoint::new(model, eta)?;
        let theta_avg = DVector::from_vec(theta_avg);
        if theta_avg.len() != eta.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: eta.dim(),
                found: theta_avg.len(),
            });
        }
        if theta_avg.iter().any(|v| !v.is_finite()) || !h.is_finite() {
            return Err(CoreError::InvalidModel(
                "moment state: components must be finite".into(),
            ));
        }
        Ok(Self { eta, theta_avg, h })
    }

    /// The fixed point `(theta(eta), Phi(eta))`.
    pub fn equilibrium(model: &StateSpace, eta: &EtaPoint) -> Result<Self> {
        Ok(Self {
            eta: eta.clone(),
            theta_avg: grad_phi(model, eta)?,
            h: phi_eq(model, eta)?,
        })
    }

    pub fn eta(&self) -> &EtaPoint {
        &self.eta
    }

    pub fn theta_avg(&self) -> &DVector<f64> {
        &self.theta_avg
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let de = (self.eta.coords() - other.eta.coords()).abs().max();
        let dt = (&self.theta_avg - &other.theta_avg).abs().max();
        de.max(dt).max((self.h - other.h).abs())
    }
}

/// Tangent of the dual system; the `eta` block is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMomentTangent {
    pub dtheta_avg: DVector<f64>,
    pub deta: DVector<f64>,
    pub dh: f64,
}

impl DualMomentTangent {
    pub fn max_abs(&self) -> f64 {
        self.dtheta_avg
            .abs()
            .max()
            .max(self.deta.abs().max())
            .max(self.dh.abs())
    }
}

/// Right-hand side of the dual moment system:
/// `d<theta>/dt = grad Phi - <theta>`, `dH/dt = Phi - H`, `deta/dt = 0`.
pub fn dual_moment_rhs(model: &StateSpace, s: &DualMomentState) -> Result<DualMomentTangent> {
    Ok(DualMomentTangent {
        dtheta_avg: grad_phi(model, &s.eta)? - &s.theta_avg,
        deta: DVector::zeros(s.eta.dim()),
        dh: phi_eq(model, &s.eta)? - s.h,
    })
}

/// Closed solution of the dual system.
pub fn dual_moment_exact(
    model: &StateSpace,
    s0: &DualMomentState,
    t: f64,
) -> Result<DualMomentState> {
    if t < 0.0 {
        return Err(CoreError::NegativeTime(t));
    }
    let target_t = grad_phi(model, &s0.eta)?;
    let target_h = phi_eq(model, &s0.eta)?;
    let decay = (-t).exp();
    Ok(DualMomentState {
        eta: s0.eta.clone(),
        theta_avg: &target_t + (&s0.theta_avg - &target_t) * decay,
        h: target_h + (s0.h - target_h) * decay,
    })
}

#[derive(Debug, Clone)]
pub struct PrimaryMomentTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<PrimaryMomentState>,
}

#[derive(Debug, Clone)]
pub struct DualMomentTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DualMomentState>,
}

/// RK4 on the dynamic block `(<O>, Psi)`; the static `theta` is carried
/// through untouched, so it is bit-identical along the whole trajectory.
pub fn integrate_primary_moments(
    model: &StateSpace,
    s0: &PrimaryMomentState,
    t_max: f64,
    dt: f64,
) -> Result<PrimaryMomentTrajectory> {
    ode::validate_grid(t_max, dt)?;
    let th = s0.theta_point();
    let n = th.dim();
    let target_m = mean_vector(model, &th)?;
    let target_psi = psi_eq(model, &th)?;
    let rhs = move |y: &DVector<f64>| {
        let mut dy = DVector::zeros(n + 1);
        for a in 0..n {
            dy[a] = target_m[a] - y[a];
        }
        dy[n] = target_psi - y[n];
        dy
    };
    let mut y0 = DVector::zeros(n + 1);
    y0.rows_mut(0, n).copy_from(&s0.moments);
    y0[n] = s0.psi;
    let (times, raw) = ode::rk4_path(&rhs, &y0, t_max, dt);
    let states = raw
        .into_iter()
        .map(|y| PrimaryMomentState {
            theta: s0.theta.clone(),
            moments: y.rows(0, n).into_owned(),
            psi: y[n],
        })
        .collect();
    Ok(PrimaryMomentTrajectory { times, states })
}

/// RK4 on the dynamic block `(<theta>, H)` with `eta` carried through
/// untouched.
pub fn integrate_dual_moments(
    model: &StateSpace,
    s0: &DualMomentState,
    t_max: f64,
    dt: f64,
) -> Result<DualMomentTrajectory> {
    ode::validate_grid(t_max, dt)?;
    let n = s0.eta.dim();
    let target_t = grad_phi(model, &s0.eta)?;
    let target_h = phi_eq(model, &s0.eta)?;
    let rhs = move |y: &DVector<f64>| {
        let mut dy = DVector::zeros(n + 1);
        for a in 0..n {
            dy[a] = target_t[a] - y[a];
        }
        dy[n] = target_h - y[n];
        dy
    };
    let mut y0 = DVector::zeros(n + 1);
    y0.rows_mut(0, n).copy_from(&s0.theta_avg);
    y0[n] = s0.h;
    let (times, raw) = ode::rk4_path(&rhs, &y0, t_max, dt);
    let states = raw
        .into_iter()
        .map(|y| DualMomentState {
            eta: s0.eta.clone(),
            theta_avg: y.rows(0, n).into_owned(),
            h: y[n],
        })
        .collect();
    Ok(DualMomentTrajectory { times, states })
}

/// Worst pointwise gap between a distribution-level trajectory and the
/// moment system started from matching initial conditions.
#[derive(Debug, Clone, Copy)]
pub struct ConsistencyReport {
    pub max_moment_error: f64,
    pub max_psi_error: f64,
}

impl ConsistencyReport {
    pub fn max_error(&self) -> f64 {
        self.max_moment_error.max(self.max_psi_error)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_error() <= tol
    }
}

/// Integrate the master equation, recompute `<O_a>` and `Psi` from each
/// stored distribution, and compare against the moment system integrated
/// from the same initial data.
pub fn consistency_check_primary(
    model: &StateSpace,
    th: &ThetaPoint,
    p0: &Distribution,
    t_max: f64,
    dt: f64,
) -> Result<ConsistencyReport> {
    let traj = master::integrate_primary(model, th, p0, t_max, dt)?;

    let n = model.num_observables();
    let m0 = (0..n)
        .map(|a| master::expectation(model, p0, a))
        .collect::<Result<Vec<_>>>()?;
    let psi0 = master::psi_noneq(model, th, p0)?;
    let s0 = PrimaryMomentState::new(th.coords().iter().copied().collect(), m0, psi0)?;
    let moments = integrate_primary_moments(model, &s0, t_max, dt)?;

    let mut report = ConsistencyReport {
        max_moment_error: 0.0,
        max_psi_error: 0.0,
    };
    for (p, s) in traj.states().iter().zip(&moments.states) {
        for a in 0..n {
            let from_p = master::expectation(model, p, a)?;
            report.max_moment_error = report.max_moment_error.max((from_p - s.moments[a]).abs());
        }
        let from_p = master::psi_noneq(model, th, p)?;
        report.max_psi_error = report.max_psi_error.max((from_p - s.psi).abs());
    }
    Ok(report)
}

/// Dual-side consistency for the entropy equation only: `H(eta, t)`
/// recomputed as a cross entropy along the dual master trajectory against
/// the closed solution of `dH/dt = Phi - H`.
///
/// The `<theta>` equation has no microscopic counterpart to recompute (no
/// per-state `theta(j)` is defined), so it is exercised against its own
/// closed form elsewhere.
pub fn dual_entropy_consistency(
    model: &StateSpace,
    et: &EtaPoint,
    p0: &Distribution,
    t_max: f64,
    dt: f64,
) -> Result<f64> {
    let th = crate::legendre::theta_of_eta(model, et)?;
    let target = crate::exp_family::equilibrium_distribution(model, &th)?;
    let traj = master::integrate_primary(model, &th, p0, t_max, dt)?;

    let h0 = master::cross_entropy(model, &target, p0)?;
    let phi = phi_eq(model, et)?;

    let mut worst = 0.0f64;
    for (t, p) in traj.times().iter().zip(traj.states()) {
        let from_p = master::cross_entropy(model, &target, p)?;
        let closed = phi + (h0 - phi) * (-t).exp();
        worst = worst.max((from_p - closed).abs());
    }
    Ok(worst)
}
