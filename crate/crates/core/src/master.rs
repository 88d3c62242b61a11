//! Distribution-level dynamics on finite state spaces.
//!
//! The general master equation drives a probability vector with a Markov
//! jump kernel. Choosing the kernel columns equal to the equilibrium
//! distribution makes the dynamics solvable: the right-hand side collapses
//! to `p_eq - p`, every solution is the explicit exponential interpolation
//! toward equilibrium, and relative entropy decreases monotonically along
//! the way. Numerical trajectories are produced by fixed-step RK4 and
//! checked against the closed solution rather than trusted.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::exp_family::{equilibrium_distribution, Distribution, EtaPoint, StateSpace, ThetaPoint};
use crate::legendre::theta_of_eta;
use crate::ode;

/// Jump kernel: `w[(j, k)]` is the probability rate of a jump from state `k`
/// to state `j`. The diagonal never enters the master equation.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernel {
    w: DMatrix<f64>,
}

impl MarkovKernel {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(CoreError::InvalidModel(format!(
                "kernel: must be square, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if w.nrows() < 2 {
            return Err(CoreError::InvalidModel(
                "kernel: need at least 2 states".into(),
            ));
        }
        if w.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(CoreError::InvalidModel(
                "kernel: entries must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { w })
    }

    pub fn num_states(&self) -> usize {
        self.w.nrows()
    }

    /// Rate of the jump `from -> to`.
    pub fn rate(&self, to: usize, from: usize) -> f64 {
        self.w[(to, from)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }
}

fn gain_loss(w: &DMatrix<f64>, p: &DVector<f64>) -> DVector<f64> {
    let states = w.nrows();
    DVector::from_fn(states, |j, _| {
        let mut acc = 0.0;
        for k in 0..states {
            if k != j {
                acc += w[(j, k)] * p[k] - w[(k, j)] * p[j];
            }
        }
        acc
    })
}

/// Gain-loss balance of the general master equation; the components sum to
/// zero, so total probability is conserved.
pub fn general_master_rhs(kernel: &MarkovKernel, p: &Distribution) -> Result<DVector<f64>> {
    if p.len() != kernel.num_states() {
        return Err(CoreError::DimensionMismatch {
            expected: kernel.num_states(),
            found: p.len(),
        });
    }
    Ok(gain_loss(&kernel.w, p.probabilities()))
}

/// The solvable kernel: every column equals the equilibrium distribution, so
/// the gain-loss balance reduces to `p_eq - p`.
pub fn solvable_kernel(model: &StateSpace, th: &ThetaPoint) -> Result<MarkovKernel> {
    let p_eq = equilibrium_distribution(model, th)?;
    let states = model.num_states();
    let w = DMatrix::from_fn(states, states, |j, _| p_eq.get(j));
    MarkovKernel::new(w)
}

/// Solvable dynamics in natural parameters: `p_eq(theta) - p`.
pub fn primary_rhs(model: &StateSpace, th: &ThetaPoint, p: &Distribution) -> Result<DVector<f64>> {
    let p_eq = equilibrium_distribution(model, th)?;
    if p.len() != p_eq.len() {
        return Err(CoreError::DimensionMismatch {
            expected: p_eq.len(),
            found: p.len(),
        });
    }
    Ok(p_eq.probabilities() - p.probabilities())
}

/// Solvable dynamics in expectation parameters: the target is recovered by
/// Legendre inversion first.
pub fn dual_rhs(model: &StateSpace, et: &EtaPoint, p: &Distribution) -> Result<DVector<f64>> {
    let th = theta_of_eta(model, et)?;
    primary_rhs(model, &th, p)
}

/// Closed solution of the solvable dynamics: the convex combination
/// `exp(-t) p0 + (1 - exp(-t)) p_eq`.
pub fn exact_solution(p0: &Distribution, p_eq: &Distribution, t: f64) -> Result<Distribution> {
    if t < 0.0 {
        return Err(CoreError::NegativeTime(t));
    }
    if p0.len() != p_eq.len() {
        return Err(CoreError::DimensionMismatch {
            expected: p_eq.len(),
            found: p0.len(),
        });
    }
    let weight = (-t).exp();
    let p = p0.probabilities() * weight + p_eq.probabilities() * (1.0 - weight);
    Distribution::from_vector(p)
}

/// Per-time diagnostics attached to a trajectory after the fact, so they can
/// never drift from the stored states.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub expectations: Vec<f64>,
    pub psi_noneq: f64,
    pub cross_entropy: f64,
    pub kl: f64,
}

/// Time grid plus per-time distributions, with optional diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Distribution>,
    diagnostics: Option<Vec<DiagnosticRow>>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Distribution] {
        &self.states
    }

    pub fn diagnostics(&self) -> Option<&[DiagnosticRow]> {
        self.diagnostics.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &Distribution {
        self.states.last().expect("trajectory is never empty")
    }

    /// Expectations, nonequilibrium potential, cross entropy, and relative
    /// entropy against the equilibrium at `th`, one row per grid time.
    pub fn compute_diagnostics(&mut self, model: &StateSpace, th: &ThetaPoint) -> Result<()> {
        let target = equilibrium_distribution(model, th)?;
        let mut rows = Vec::with_capacity(self.states.len());
        for p in &self.states {
            let expectations = (0..model.num_observables())
                .map(|a| expectation(model, p, a))
                .collect::<Result<Vec<_>>>()?;
            rows.push(DiagnosticRow {
                expectations,
                psi_noneq: psi_noneq(model, th, p)?,
                cross_entropy: cross_entropy(model, &target, p)?,
                kl: kl_divergence(p, &target)?,
            });
        }
        self.diagnostics = Some(rows);
        Ok(())
    }
}

/// Integrate `dp/dt = rhs(p)` with fixed-step RK4 on the uniform grid
/// `t_i = i dt`. No renormalization or clamping is applied; a state that
/// leaves the simplex by more than `1e-9` aborts the run.
pub fn integrate<F>(rhs: F, p0: &Distribution, t_max: f64, dt: f64) -> Result<Trajectory>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    ode::validate_grid(t_max, dt)?;
    let (times, raw) = ode::rk4_path(&rhs, p0.probabilities(), t_max, dt);
    let states = times
        .iter()
        .zip(raw)
        .map(|(&t, v)| Distribution::from_integration_state(v, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times,
        states,
        diagnostics: None,
    })
}

/// Integrate the primary solvable dynamics toward `p_eq(theta)`.
pub fn integrate_primary(
    model: &StateSpace,
    th: &ThetaPoint,
    p0: &Distribution,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory> {
    let p_eq = equilibrium_distribution(model, th)?;
    if p0.len() != p_eq.len() {
        return Err(CoreError::DimensionMismatch {
            expected: p_eq.len(),
            found: p0.len(),
        });
    }
    let target = p_eq.probabilities().clone();
    integrate(move |p| &target - p, p0, t_max, dt)
}

/// Integrate the dual solvable dynamics toward `p_eq(theta(eta))`.
pub fn integrate_dual(
    model: &StateSpace,
    et: &EtaPoint,
    p0: &Distribution,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory> {
    let th = theta_of_eta(model, et)?;
    integrate_primary(model, &th, p0, t_max, dt)
}

/// Integrate the general master equation for an arbitrary kernel.
pub fn integrate_kernel(
    kernel: &MarkovKernel,
    p0: &Distribution,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory> {
    if p0.len() != kernel.num_states() {
        return Err(CoreError::DimensionMismatch {
            expected: kernel.num_states(),
            found: p0.len(),
        });
    }
    let w = kernel.w.clone();
    integrate(move |p| gain_loss(&w, p), p0, t_max, dt)
}

/// Expectation value of observable `a` under `p`.
pub fn expectation(model: &StateSpace, p: &Distribution, a: usize) -> Result<f64> {
    let n = model.num_observables();
    if a >= n {
        return Err(CoreError::IndexOutOfRange { index: a, n });
    }
    if p.len() != model.num_states() {
        return Err(CoreError::DimensionMismatch {
            expected: model.num_states(),
            found: p.len(),
        });
    }
    Ok((0..model.num_states())
        .map(|j| model.observable(a, j) * p.get(j))
        .sum())
}

/// Nonequilibrium extension of the log-partition potential: the mean of
/// `p_j / p_eq_j` over the states, times the equilibrium potential. Equals
/// the equilibrium potential exactly when `p = p_eq`.
pub fn psi_noneq(model: &StateSpace, th: &ThetaPoint, p: &Distribution) -> Result<f64> {
    let p_eq = equilibrium_distribution(model, th)?;
    if p.len() != p_eq.len() {
        return Err(CoreError::DimensionMismatch {
            expected: p_eq.len(),
            found: p.len(),
        });
    }
    let states = model.num_states() as f64;
    let ratio: f64 = (0..p.len()).map(|j| p.get(j) / p_eq.get(j)).sum();
    Ok(ratio / states * crate::exp_family::psi_eq(model, th)?)
}

/// Cross entropy `sum_j p_j ln(target_j)`; the target must be strictly
/// positive.
pub fn cross_entropy(model: &StateSpace, target: &Distribution, p: &Distribution) -> Result<f64> {
    if target.len() != model.num_states() || p.len() != model.num_states() {
        return Err(CoreError::DimensionMismatch {
            expected: model.num_states(),
            found: if target.len() != model.num_states() {
                target.len()
            } else {
                p.len()
            },
        });
    }
    if !target.is_strictly_positive() {
        return Err(CoreError::Domain(
            "cross entropy target has a zero component".into(),
        ));
    }
    Ok((0..p.len()).map(|j| p.get(j) * target.get(j).ln()).sum())
}

/// Relative entropy `D(p || q) = sum_j p_j ln(p_j / q_j)`, with the
/// `0 ln 0 = 0` convention; `q` must be strictly positive.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(CoreError::DimensionMismatch {
            expected: q.len(),
            found: p.len(),
        });
    }
    if !q.is_strictly_positive() {
        return Err(CoreError::Domain(
            "divergence reference has a zero component".into(),
        ));
    }
    Ok((0..p.len())
        .map(|j| {
            let pj = p.get(j);
            if pj > 0.0 {
                pj * (pj / q.get(j)).ln()
            } else {
                0.0
            }
        })
        .sum())
}
