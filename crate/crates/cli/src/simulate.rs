//! The `simulate` subcommand: build the configured system, integrate it,
//! write the trajectory CSV, and report the tail behavior.

use std::fmt;
use std::path::PathBuf;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mastergeo::contact::{hamiltonian_value, integrate_relaxation, ContactPoint, Potential};
use mastergeo::exp_family::{equilibrium_distribution, eta_of_theta, psi_eq};
use mastergeo::legendre::{grad_phi, phi_eq, theta_of_eta};
use mastergeo::master::integrate_primary;
use mastergeo::moments::{
    integrate_dual_moments, integrate_primary_moments, DualMomentState, PrimaryMomentState,
};
use mastergeo::report;
use mastergeo::{Distribution, EtaPoint, StateSpace, ThetaPoint};

use crate::config::{ExperimentConfig, InitialCondition, Mode};
use crate::error::CliError;

/// What `simulate` prints when it finishes.
#[derive(Debug)]
pub struct SimSummary {
    pub mode: Mode,
    pub rows: usize,
    pub metric_name: &'static str,
    pub final_value: f64,
    pub fitted_rate: Option<f64>,
    pub output: PathBuf,
}

impl fmt::Display for SimSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "simulate: mode={} rows={} {}={:.6e} fitted_rate=",
            self.mode, self.rows, self.metric_name, self.final_value
        )?;
        match self.fitted_rate {
            Some(rate) => write!(f, "{rate:.9}")?,
            None => write!(f, "n/a")?,
        }
        write!(f, " output={}", self.output.display())
    }
}

/// Least-squares slope of `ln(value)` against time, over the rows where the
/// value is resolvable above noise. `None` when fewer than two rows qualify
/// (e.g. a run started exactly on the attractor).
pub fn fit_log_slope(times: &[f64], values: &[f64]) -> Option<f64> {
    let peak = values.iter().cloned().fold(0.0f64, f64::max);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|&(_, &v)| v > 1e-300 && v > peak * 1e-13)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sv): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), (t, v)| (a + t, b + v));
    let (stt, stv): (f64, f64) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, v)| (a + t * t, b + t * v));
    let denom = n * stt - st * st;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * stv - st * sv) / denom)
}

/// Uniform sample on the probability simplex by normalized exponential
/// spacings, reproducible from the seed.
pub fn random_simplex(states: usize, seed: u64) -> Distribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..states)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    Distribution::new(raw.into_iter().map(|v| v / total).collect())
        .expect("normalized exponential spacings form a distribution")
}

fn require_theta(cfg: &ExperimentConfig, model: &StateSpace) -> Result<ThetaPoint, CliError> {
    let raw = cfg
        .theta
        .clone()
        .ok_or_else(|| CliError::Validation(format!("theta: required for mode {}", cfg.mode)))?;
    if raw.len() != model.num_observables() {
        return Err(CliError::Validation(format!(
            "theta: expected {} components, got {}",
            model.num_observables(),
            raw.len()
        )));
    }
    ThetaPoint::new(raw).map_err(CliError::from)
}

fn require_eta(cfg: &ExperimentConfig, model: &StateSpace) -> Result<EtaPoint, CliError> {
    let raw = cfg
        .eta
        .clone()
        .ok_or_else(|| CliError::Validation(format!("eta: required for mode {}", cfg.mode)))?;
    EtaPoint::new(model, raw).map_err(|e| CliError::Validation(format!("eta: {e}")))
}

fn initial_distribution(
    cfg: &ExperimentConfig,
    model: &StateSpace,
) -> Result<Distribution, CliError> {
    match &cfg.initial {
        Some(InitialCondition::Distribution { distribution }) => {
            if distribution.len() != model.num_states() {
                return Err(CliError::Validation(format!(
                    "initial.distribution: expected {} components, got {}",
                    model.num_states(),
                    distribution.len()
                )));
            }
            Distribution::new(distribution.clone())
                .map_err(|e| CliError::Validation(format!("initial.distribution: {e}")))
        }
        None => Ok(random_simplex(model.num_states(), cfg.seed.unwrap_or(0))),
        Some(_) => Err(CliError::Validation(format!(
            "initial: expected a distribution (or nothing) for mode {}",
            cfg.mode
        ))),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<SimSummary, CliError> {
    let grid_ok =
        cfg.dt.is_finite() && cfg.t_max.is_finite() && cfg.dt > 0.0 && cfg.dt <= cfg.t_max;
    if !grid_ok {
        return Err(CliError::Validation(format!(
            "dt: must satisfy 0 < dt <= t_max (dt = {}, t_max = {})",
            cfg.dt, cfg.t_max
        )));
    }
    let model = cfg.model.build()?;
    let output = cfg
        .output
        .clone()
        .ok_or_else(|| CliError::Validation("output: no path given".into()))?;

    let (csv, times, decay, metric_name, final_value) = match cfg.mode {
        Mode::PrimaryMaster | Mode::DualMaster => {
            let th = if cfg.mode == Mode::PrimaryMaster {
                require_theta(cfg, &model)?
            } else {
                let et = require_eta(cfg, &model)?;
                theta_of_eta(&model, &et).map_err(CliError::from)?
            };
            let p0 = initial_distribution(cfg, &model)?;
            let mut traj = integrate_primary(&model, &th, &p0, cfg.t_max, cfg.dt)?;
            traj.compute_diagnostics(&model, &th)?;
            let p_eq = equilibrium_distribution(&model, &th)?;
            let decay: Vec<f64> = traj
                .states()
                .iter()
                .map(|p| p.max_abs_diff(&p_eq))
                .collect();
            let final_kl = traj
                .diagnostics()
                .expect("just computed")
                .last()
                .map(|row| row.kl)
                .unwrap_or(0.0);
            let csv = report::master_csv(&model, &traj)?;
            (csv, traj.times().to_vec(), decay, "final_kl", final_kl)
        }
        Mode::PrimaryMoments => {
            let th = require_theta(cfg, &model)?;
            let Some(InitialCondition::Moments { moments, psi }) = cfg.initial.clone() else {
                return Err(CliError::Validation(format!(
                    "initial: mode {} needs {{\"moments\": [...], \"psi\": v}}",
                    cfg.mode
                )));
            };
            let s0 = PrimaryMomentState::new(th.coords().iter().copied().collect(), moments, psi)
                .map_err(|e| CliError::Validation(format!("initial: {e}")))?;
            let traj = integrate_primary_moments(&model, &s0, cfg.t_max, cfg.dt)?;
            let target_m = eta_of_theta(&model, &th)?.coords().clone();
            let target_psi = psi_eq(&model, &th)?;
            let decay: Vec<f64> = traj
                .states
                .iter()
                .map(|s| {
                    (s.moments() - &target_m)
                        .abs()
                        .max()
                        .max((s.psi() - target_psi).abs())
                })
                .collect();
            let final_h = (target_psi - traj.states.last().expect("nonempty").psi()).abs();
            let csv = report::primary_moments_csv(&traj);
            (csv, traj.times.clone(), decay, "final_abs_h", final_h)
        }
        Mode::DualMoments => {
            let et = require_eta(cfg, &model)?;
            let Some(InitialCondition::ThetaAvg { theta_avg, h }) = cfg.initial.clone() else {
                return Err(CliError::Validation(format!(
                    "initial: mode {} needs {{\"theta_avg\": [...], \"h\": v}}",
                    cfg.mode
                )));
            };
            let s0 =
                DualMomentState::new(&model, et.coords().iter().copied().collect(), theta_avg, h)
                    .map_err(|e| CliError::Validation(format!("initial: {e}")))?;
            let traj = integrate_dual_moments(&model, &s0, cfg.t_max, cfg.dt)?;
            let target_t = grad_phi(&model, &et)?;
            let target_h = phi_eq(&model, &et)?;
            let decay: Vec<f64> = traj
                .states
                .iter()
                .map(|s| {
                    (s.theta_avg() - &target_t)
                        .abs()
                        .max()
                        .max((s.h() - target_h).abs())
                })
                .collect();
            let final_h = (target_h - traj.states.last().expect("nonempty").h()).abs();
            let csv = report::dual_moments_csv(&traj);
            (csv, traj.times.clone(), decay, "final_abs_h", final_h)
        }
        Mode::ContactPsi | Mode::ContactPhi => {
            let (w, x) = if cfg.mode == Mode::ContactPsi {
                let th = require_theta(cfg, &model)?;
                (Potential::theta_potential(&model), th.coords().clone())
            } else {
                let et = require_eta(cfg, &model)?;
                (
                    Potential::eta_potential(&model).map_err(CliError::from)?,
                    et.coords().clone(),
                )
            };
            let Some(InitialCondition::Contact { y, z }) = cfg.initial.clone() else {
                return Err(CliError::Validation(format!(
                    "initial: mode {} needs {{\"y\": [...], \"z\": v}}",
                    cfg.mode
                )));
            };
            let pt0 = ContactPoint::from_vectors(x, DVector::from_vec(y), z)
                .map_err(|e| CliError::Validation(format!("initial: {e}")))?;
            let traj = integrate_relaxation(&w, &pt0, cfg.t_max, cfg.dt)?;
            let grad = w.gradient(pt0.x())?;
            let value = w.value(pt0.x())?;
            let decay: Vec<f64> = traj
                .points
                .iter()
                .map(|p| (p.y() - &grad).abs().max().max((p.z() - value).abs()))
                .collect();
            let final_h = hamiltonian_value(&w, traj.points.last().expect("nonempty"))?.abs();
            let csv = report::contact_csv(&w, &traj)?;
            (csv, traj.times.clone(), decay, "final_abs_h", final_h)
        }
    };

    std::fs::write(&output, csv)?;
    Ok(SimSummary {
        mode: cfg.mode,
        rows: times.len(),
        metric_name,
        final_value,
        fitted_rate: fit_log_slope(&times, &decay),
        output,
    })
}
