//! CSV serialization of trajectories.
//!
//! Columns are fixed per trajectory flavor and every value is written with
//! 17 significant digits, so equal runs produce byte-identical files.

use std::fmt::Write as _;

use crate::contact::{flow_lengths, hamiltonian_value, ContactTrajectory, Potential};
use crate::error::{CoreError, Result};
use crate::exp_family::StateSpace;
use crate::master::Trajectory;
use crate::moments::{DualMomentTrajectory, PrimaryMomentTrajectory};

/// Full-precision decimal form: 17 significant digits.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
        first = false;
    }
    out.push('\n');
}

/// `t,p_<label>...,obs_<a>...,psi_noneq,cross_entropy,kl`, one row per grid
/// time. The trajectory must carry diagnostics.
pub fn master_csv(model: &StateSpace, traj: &Trajectory) -> Result<String> {
    let rows = traj.diagnostics().ok_or_else(|| {
        CoreError::Domain("trajectory has no diagnostics; compute them first".into())
    })?;
    let mut out = String::new();
    out.push('t');
    for label in model.labels() {
        let _ = write!(out, ",p_{label}");
    }
    for a in 1..=model.num_observables() {
        let _ = write!(out, ",obs_{a}");
    }
    out.push_str(",psi_noneq,cross_entropy,kl\n");

    for ((t, p), diag) in traj.times().iter().zip(traj.states()).zip(rows) {
        let values = std::iter::once(*t)
            .chain(p.probabilities().iter().copied())
            .chain(diag.expectations.iter().copied())
            .chain([diag.psi_noneq, diag.cross_entropy, diag.kl]);
        push_row(&mut out, values);
    }
    Ok(out)
}

/// `t,theta_<a>...,moment_<a>...,psi`.
pub fn primary_moments_csv(traj: &PrimaryMomentTrajectory) -> String {
    let n = traj.states.first().map_or(0, |s| s.theta().len());
    let mut out = String::new();
    out.push('t');
    for a in 1..=n {
        let _ = write!(out, ",theta_{a}");
    }
    for a in 1..=n {
        let _ = write!(out, ",moment_{a}");
    }
    out.push_str(",psi\n");
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let values = std::iter::once(*t)
            .chain(s.theta().iter().copied())
            .chain(s.moments().iter().copied())
            .chain([s.psi()]);
        push_row(&mut out, values);
    }
    out
}

/// `t,eta_<a>...,theta_avg_<a>...,H`.
pub fn dual_moments_csv(traj: &DualMomentTrajectory) -> String {
    let n = traj.states.first().map_or(0, |s| s.eta().dim());
    let mut out = String::new();
    out.push('t');
    for a in 1..=n {
        let _ = write!(out, ",eta_{a}");
    }
    for a in 1..=n {
        let _ = write!(out, ",theta_avg_{a}");
    }
    out.push_str(",H\n");
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let values = std::iter::once(*t)
            .chain(s.eta().coords().iter().copied())
            .chain(s.theta_avg().iter().copied())
            .chain([s.h()]);
        push_row(&mut out, values);
    }
    out
}

/// `t,x_<a>...,y_<a>...,z,h,length`; the length column is the quadrature
/// length from that row's point to equilibrium.
pub fn contact_csv(w: &Potential, traj: &ContactTrajectory) -> Result<String> {
    let n = traj.points.first().map_or(0, |p| p.dim());
    let mut out = String::new();
    out.push('t');
    for a in 1..=n {
        let _ = write!(out, ",x_{a}");
    }
    for a in 1..=n {
        let _ = write!(out, ",y_{a}");
    }
    out.push_str(",z,h,length\n");
    let lengths = flow_lengths(w, traj)?;
    for ((t, p), length) in traj.times.iter().zip(&traj.points).zip(lengths) {
        let h = hamiltonian_value(w, p)?;
        let values = std::iter::once(*t)
            .chain(p.x().iter().copied())
            .chain(p.y().iter().copied())
            .chain([p.z(), h, length]);
        push_row(&mut out, values);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{integrate_relaxation, ContactPoint};
    use crate::exp_family::{make_ising, Distribution, ThetaPoint};
    use crate::master::integrate_primary;
    use crate::moments::{integrate_primary_moments, PrimaryMomentState};

    #[test]
    fn full_precision_format_is_17_digits() {
        assert_eq!(fmt_full(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_full(0.1), "1.0000000000000001e-1");
        // Round-trips exactly.
        let v = std::f64::consts::PI;
        assert_eq!(fmt_full(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn master_csv_header_and_shape() {
        let ising = make_ising();
        let th = ThetaPoint::new(vec![1.0]).unwrap();
        let p0 = Distribution::new(vec![1.0, 0.0]).unwrap();
        let mut traj = integrate_primary(&ising, &th, &p0, 0.1, 0.05).unwrap();
        assert!(master_csv(&ising, &traj).is_err());
        traj.compute_diagnostics(&ising, &th).unwrap();
        let csv = master_csv(&ising, &traj).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,p_+1,p_-1,obs_1,psi_noneq,cross_entropy,kl"
        );
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn moments_csv_headers() {
        let ising = make_ising();
        let s0 = PrimaryMomentState::new(vec![1.0], vec![0.0], 0.0).unwrap();
        let traj = integrate_primary_moments(&ising, &s0, 0.1, 0.05).unwrap();
        let csv = primary_moments_csv(&traj);
        assert!(csv.starts_with("t,theta_1,moment_1,psi\n"));
    }

    #[test]
    fn contact_csv_header_and_length_column() {
        let w = Potential::theta_potential(&make_ising());
        let pt0 = ContactPoint::new(vec![1.0], vec![0.0], 0.0).unwrap();
        let traj = integrate_relaxation(&w, &pt0, 0.02, 1e-3).unwrap();
        let csv = contact_csv(&w, &traj).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,y_1,z,h,length");
        // h and length agree on every row.
        for line in lines {
            let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert!((cols[4].abs() - cols[5]).abs() < 1e-8);
        }
    }
}
