//! Fixed-step classical fourth-order Runge-Kutta on flat vector states.

use nalgebra::DVector;

use crate::error::{CoreError, Result};

/// Reject grids that are empty, inverted, or carry non-finite bounds.
pub fn validate_grid(t_max: f64, dt: f64) -> Result<()> {
    let ok = dt.is_finite() && t_max.is_finite() && dt > 0.0 && t_max >= dt;
    if ok {
        Ok(())
    } else {
        Err(CoreError::Domain(format!(
            "dt must satisfy 0 < dt <= t_max (dt = {dt}, t_max = {t_max})"
        )))
    }
}

/// One RK4 step of size `dt`.
pub fn rk4_step<F>(f: &F, y: &DVector<f64>, dt: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let k1 = f(y);
    let k2 = f(&(y + &k1 * (dt / 2.0)));
    let k3 = f(&(y + &k2 * (dt / 2.0)));
    let k4 = f(&(y + &k3 * dt));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Number of steps of size `dt` that fit into `[0, t_max]`.
pub fn step_count(t_max: f64, dt: f64) -> usize {
    debug_assert!(dt > 0.0 && t_max >= dt);
    (t_max / dt + 1e-9).floor() as usize
}

/// Integrate on the uniform grid `t_i = i * dt`, returning times and states
/// (the initial state included).
pub fn rk4_path<F>(f: &F, y0: &DVector<f64>, t_max: f64, dt: f64) -> (Vec<f64>, Vec<DVector<f64>>)
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let steps = step_count(t_max, dt);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(y0.clone());
    let mut y = y0.clone();
    for i in 1..=steps {
        y = rk4_step(f, &y, dt);
        times.push(i as f64 * dt);
        states.push(y.clone());
    }
    (times, states)
}
