//! Contact-geometric description of relaxation.
//!
//! Work happens in Darboux coordinates `(x, y, z)` on a `(2n+1)`-dimensional
//! manifold carrying the one-form `lambda = dz - y_a dx^a`. A potential
//! `w(x)` generates the Legendre submanifold `{y = grad w, z = w}`; the
//! Hamiltonian `h = w(x) - z` generates a flow that keeps `x` frozen and
//! pulls `(y, z)` onto that submanifold at unit exponential rate. The value
//! of `h` itself decays as `exp(-t)`, and with the metric
//! `G = (dx (x) dy + dy (x) dx)/2 + lambda (x) lambda` the remaining curve
//! length to equilibrium equals `|h|` exactly; the quadrature here checks
//! that identity instead of assuming it.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::exp_family::{mean_vector, psi_eq, EtaPoint, StateSpace, ThetaPoint};
use crate::legendre::{phi_eq, theta_of_eta};
use crate::{fd, ode};

/// Truncation horizon for the length quadrature; the tail beyond it is added
/// in closed form.
pub const LENGTH_HORIZON: f64 = 40.0;

/// Simpson panels for the length quadrature.
pub const LENGTH_PANELS: usize = 1000;

/// Most negative metric speed tolerated before a curve is declared not
/// length-measurable.
pub const METRIC_FLOOR: f64 = -1e-12;

const FD_STEP: f64 = 1e-6;

/// Point in Darboux coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint {
    x: DVector<f64>,
    y: DVector<f64>,
    z: f64,
}

impl ContactPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: f64) -> Result<Self> {
        Self::from_vectors(DVector::from_vec(x), DVector::from_vec(y), z)
    }

    pub fn from_vectors(x: DVector<f64>, y: DVector<f64>, z: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(CoreError::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if x.is_empty() {
            return Err(CoreError::InvalidModel(
                "contact point: need at least one coordinate pair".into(),
            ));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) || !z.is_finite() {
            return Err(CoreError::InvalidModel(
                "contact point: coordinates must be finite".into(),
            ));
        }
        Ok(Self { x, y, z })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }
}

/// Tangent vector in Darboux coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactTangent {
    pub dx: DVector<f64>,
    pub dy: DVector<f64>,
    pub dz: f64,
}

impl ContactTangent {
    pub fn zeros(n: usize) -> Self {
        Self {
            dx: DVector::zeros(n),
            dy: DVector::zeros(n),
            dz: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dx.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.dx
            .abs()
            .max()
            .max(self.dy.abs().max())
            .max(self.dz.abs())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.dx - &other.dx)
            .abs()
            .max()
            .max((&self.dy - &other.dy).abs().max())
            .max((self.dz - other.dz).abs())
    }
}

type ValueFn = Arc<dyn Fn(&DVector<f64>) -> Result<f64> + Send + Sync>;
type GradientFn = Arc<dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync>;

/// Generating function `w(x)` with its gradient. Built-in constructors carry
/// analytic gradients; `from_fn` falls back to central differences.
#[derive(Clone)]
pub struct Potential {
    dim: usize,
    value: ValueFn,
    gradient: GradientFn,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential").field("dim", &self.dim).finish()
    }
}

impl Potential {
    /// Wrap a plain scalar function; the gradient is a central difference
    /// with step `1e-6`.
    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> Result<f64> + Send + Sync + 'static,
    {
        let value: ValueFn = Arc::new(f);
        let for_grad = value.clone();
        let gradient: GradientFn =
            Arc::new(move |x| fd::try_gradient(&|v| for_grad(v), x, FD_STEP));
        Self {
            dim,
            value,
            gradient,
        }
    }

    pub fn with_gradient<F, G>(dim: usize, f: F, g: G) -> Self
    where
        F: Fn(&DVector<f64>) -> Result<f64> + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync + 'static,
    {
        Self {
            dim,
            value: Arc::new(f),
            gradient: Arc::new(g),
        }
    }

    /// The log-partition potential of a model in natural coordinates, with
    /// its gradient given by the equilibrium expectations.
    pub fn theta_potential(model: &StateSpace) -> Self {
        let dim = model.num_observables();
        let m1 = model.clone();
        let m2 = model.clone();
        Self::with_gradient(
            dim,
            move |x| psi_eq(&m1, &ThetaPoint::from_vector(x.clone())?),
            move |x| mean_vector(&m2, &ThetaPoint::from_vector(x.clone())?),
        )
    }

    /// The dual potential in expectation coordinates, with its gradient
    /// given by the inverse coordinate map. Rank-deficient models are
    /// refused, as Legendre inversion is not available for them.
    pub fn eta_potential(model: &StateSpace) -> Result<Self> {
        if model.is_rank_deficient() {
            return Err(CoreError::RankDeficientModel);
        }
        let dim = model.num_observables();
        let m1 = model.clone();
        let m2 = model.clone();
        Ok(Self::with_gradient(
            dim,
            move |x| phi_eq(&m1, &EtaPoint::from_vector(&m1, x.clone())?),
            move |x| {
                Ok(theta_of_eta(&m2, &EtaPoint::from_vector(&m2, x.clone())?)?
                    .coords()
                    .clone())
            },
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        (self.value)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        (self.gradient)(x)
    }

    /// Check the stored gradient against central differences of the stored
    /// value at the given sample points; returns the worst deviation.
    pub fn validate_gradient(&self, samples: &[DVector<f64>], tol: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for x in samples {
            let numeric = fd::try_gradient(&|v| self.value(v), x, FD_STEP)?;
            let stored = self.gradient(x)?;
            worst = worst.max((numeric - stored).abs().max());
        }
        if worst > tol {
            return Err(CoreError::Domain(format!(
                "potential gradient deviates from finite differences by {worst:.3e} (tol {tol:.1e})"
            )));
        }
        Ok(worst)
    }
}

/// Scalar field on the contact manifold together with its first partials.
pub trait ContactHamiltonian: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, pt: &ContactPoint) -> Result<f64>;
    fn partial_x(&self, pt: &ContactPoint) -> Result<DVector<f64>>;
    fn partial_y(&self, pt: &ContactPoint) -> Result<DVector<f64>>;
    fn partial_z(&self, pt: &ContactPoint) -> Result<f64>;
}

/// The relaxation Hamiltonian `h = w(x) - z`, with analytic partials.
pub struct RelaxationHamiltonian {
    potential: Potential,
}

impl RelaxationHamiltonian {
    pub fn new(potential: Potential) -> Self {
        Self { potential }
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }
}

impl ContactHamiltonian for RelaxationHamiltonian {
    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn value(&self, pt: &ContactPoint) -> Result<f64> {
        Ok(self.potential.value(pt.x())? - pt.z())
    }

    fn partial_x(&self, pt: &ContactPoint) -> Result<DVector<f64>> {
        self.potential.gradient(pt.x())
    }

    fn partial_y(&self, _pt: &ContactPoint) -> Result<DVector<f64>> {
        Ok(DVector::zeros(self.potential.dim()))
    }

    fn partial_z(&self, _pt: &ContactPoint) -> Result<f64> {
        Ok(-1.0)
    }
}

/// A Hamiltonian given only as a scalar function of the point; partials are
/// central differences with step `1e-6`.
pub struct NumericHamiltonian {
    dim: usize,
    f: Box<dyn Fn(&ContactPoint) -> f64 + Send + Sync>,
    step: f64,
}

impl NumericHamiltonian {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&ContactPoint) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            f: Box::new(f),
            step: FD_STEP,
        }
    }
}

impl ContactHamiltonian for NumericHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, pt: &ContactPoint) -> Result<f64> {
        Ok((self.f)(pt))
    }

    fn partial_x(&self, pt: &ContactPoint) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim);
        for a in 0..self.dim {
            let mut hi = pt.x().clone();
            let mut lo = pt.x().clone();
            hi[a] += self.step;
            lo[a] -= self.step;
            let phi = (self.f)(&ContactPoint::from_vectors(hi, pt.y().clone(), pt.z())?);
            let plo = (self.f)(&ContactPoint::from_vectors(lo, pt.y().clone(), pt.z())?);
            out[a] = (phi - plo) / (2.0 * self.step);
        }
        Ok(out)
    }

    fn partial_y(&self, pt: &ContactPoint) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim);
        for a in 0..self.dim {
            let mut hi = pt.y().clone();
            let mut lo = pt.y().clone();
            hi[a] += self.step;
            lo[a] -= self.step;
            let phi = (self.f)(&ContactPoint::from_vectors(pt.x().clone(), hi, pt.z())?);
            let plo = (self.f)(&ContactPoint::from_vectors(pt.x().clone(), lo, pt.z())?);
            out[a] = (phi - plo) / (2.0 * self.step);
        }
        Ok(out)
    }

    fn partial_z(&self, pt: &ContactPoint) -> Result<f64> {
        let hi = ContactPoint::from_vectors(pt.x().clone(), pt.y().clone(), pt.z() + self.step)?;
        let lo = ContactPoint::from_vectors(pt.x().clone(), pt.y().clone(), pt.z() - self.step)?;
        Ok(((self.f)(&hi) - (self.f)(&lo)) / (2.0 * self.step))
    }
}

fn check_tangent_dim(pt_dim: usize, v: &ContactTangent) -> Result<()> {
    if v.dim() != pt_dim || v.dy.len() != pt_dim {
        return Err(CoreError::DimensionMismatch {
            expected: pt_dim,
            found: v.dim(),
        });
    }
    Ok(())
}

/// Pairing of the contact form with a tangent: `dz - y_a dx^a`.
pub fn contact_form_eval(pt: &ContactPoint, v: &ContactTangent) -> Result<f64> {
    check_tangent_dim(pt.dim(), v)?;
    Ok(v.dz - pt.y().dot(&v.dx))
}

/// Pairing of `d lambda = dx^a wedge dy_a` with two tangents.
pub fn d_lambda_eval(u: &ContactTangent, v: &ContactTangent) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(u.dx.dot(&v.dy) - u.dy.dot(&v.dx))
}

/// Coefficient of `lambda wedge d lambda` against `dx wedge dy wedge dz` at
/// a point, for one coordinate pair. Non-vanishing (it is identically one)
/// witnesses the contact condition.
pub fn wedge_volume_coefficient(pt: &ContactPoint) -> Result<f64> {
    if pt.dim() != 1 {
        return Err(CoreError::Domain(
            "volume coefficient is implemented for one coordinate pair".into(),
        ));
    }
    let ex = ContactTangent {
        dx: DVector::from_vec(vec![1.0]),
        dy: DVector::zeros(1),
        dz: 0.0,
    };
    let ey = ContactTangent {
        dx: DVector::zeros(1),
        dy: DVector::from_vec(vec![1.0]),
        dz: 0.0,
    };
    let ez = ContactTangent {
        dx: DVector::zeros(1),
        dy: DVector::zeros(1),
        dz: 1.0,
    };
    Ok(contact_form_eval(pt, &ex)? * d_lambda_eval(&ey, &ez)?
        - contact_form_eval(pt, &ey)? * d_lambda_eval(&ex, &ez)?
        + contact_form_eval(pt, &ez)? * d_lambda_eval(&ex, &ey)?)
}

/// Contact Hamiltonian vector field in components:
/// `dx = -dh/dy`, `dy = dh/dx + y dh/dz`, `dz = h - y . dh/dy`.
pub fn general_contact_field(
    h: &dyn ContactHamiltonian,
    pt: &ContactPoint,
) -> Result<ContactTangent> {
    if h.dim() != pt.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: h.dim(),
            found: pt.dim(),
        });
    }
    let hy = h.partial_y(pt)?;
    let hx = h.partial_x(pt)?;
    let hz = h.partial_z(pt)?;
    let value = h.value(pt)?;
    Ok(ContactTangent {
        dx: -&hy,
        dy: hx + pt.y() * hz,
        dz: value - pt.y().dot(&hy),
    })
}

/// The field of `h = w(x) - z` directly: `x` frozen, `(y, z)` relaxing
/// toward the Legendre submanifold of `w`.
pub fn relaxation_field(w: &Potential, pt: &ContactPoint) -> Result<ContactTangent> {
    if w.dim() != pt.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: w.dim(),
            found: pt.dim(),
        });
    }
    Ok(ContactTangent {
        dx: DVector::zeros(pt.dim()),
        dy: w.gradient(pt.x())? - pt.y(),
        dz: w.value(pt.x())? - pt.z(),
    })
}

/// Closed flow of the relaxation field.
pub fn flow_exact(w: &Potential, pt0: &ContactPoint, t: f64) -> Result<ContactPoint> {
    if t < 0.0 {
        return Err(CoreError::NegativeTime(t));
    }
    let grad = w.gradient(pt0.x())?;
    let value = w.value(pt0.x())?;
    let decay = (-t).exp();
    ContactPoint::from_vectors(
        pt0.x().clone(),
        &grad + (pt0.y() - &grad) * decay,
        value + (pt0.z() - value) * decay,
    )
}

/// `h(x, y, z) = w(x) - z`.
pub fn hamiltonian_value(w: &Potential, pt: &ContactPoint) -> Result<f64> {
    Ok(w.value(pt.x())? - pt.z())
}

/// The point of the Legendre submanifold of `w` over `x`.
pub fn legendre_submanifold_point(w: &Potential, x: &DVector<f64>) -> Result<ContactPoint> {
    ContactPoint::from_vectors(x.clone(), w.gradient(x)?, w.value(x)?)
}

/// The metric `G = (dx (x) dy + dy (x) dx)/2 + lambda (x) lambda` paired
/// with two tangents. Symmetric and bilinear, but only pseudo-Riemannian:
/// null directions exist off the `lambda` kernel.
pub fn metric_g_eval(pt: &ContactPoint, u: &ContactTangent, v: &ContactTangent) -> Result<f64> {
    check_tangent_dim(pt.dim(), u)?;
    check_tangent_dim(pt.dim(), v)?;
    let cross = 0.5 * (u.dx.dot(&v.dy) + u.dy.dot(&v.dx));
    Ok(cross + contact_form_eval(pt, u)? * contact_form_eval(pt, v)?)
}

pub(crate) fn metric_speed(g: f64) -> Result<f64> {
    if g < METRIC_FLOOR {
        return Err(CoreError::LengthNotMeasurable(g));
    }
    Ok(g.max(0.0).sqrt())
}

/// Length of the relaxation curve from flow time `t` to equilibrium,
/// starting at `pt0` at time zero.
///
/// Composite Simpson quadrature of `sqrt(G(X, X))` along the exact flow up
/// to the truncation horizon, plus the closed-form tail beyond it.
pub fn curve_length(w: &Potential, pt0: &ContactPoint, t: f64) -> Result<f64> {
    curve_length_with(w, pt0, t, LENGTH_HORIZON, LENGTH_PANELS)
}

pub fn curve_length_with(
    w: &Potential,
    pt0: &ContactPoint,
    t: f64,
    horizon: f64,
    panels: usize,
) -> Result<f64> {
    if t < 0.0 {
        return Err(CoreError::NegativeTime(t));
    }
    if panels == 0 {
        return Err(CoreError::Domain(
            "length quadrature needs panels > 0".into(),
        ));
    }
    if w.dim() != pt0.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: w.dim(),
            found: pt0.dim(),
        });
    }
    // x is frozen along the flow, so the generating data is constant.
    let grad = w.gradient(pt0.x())?;
    let value = w.value(pt0.x())?;

    let hi = horizon.max(t);
    let mut quadrature = 0.0;
    if hi > t {
        let intervals = 2 * panels;
        let h = (hi - t) / intervals as f64;
        let mut acc =
            relaxation_speed(pt0, &grad, value, t)? + relaxation_speed(pt0, &grad, value, hi)?;
        for k in 1..intervals {
            let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += weight * relaxation_speed(pt0, &grad, value, t + k as f64 * h)?;
        }
        quadrature = acc * h / 3.0;
    }
    // Remaining length past the horizon equals |h| there.
    let tail = ((pt0.z() - value) * (-hi).exp()).abs();
    Ok(quadrature + tail)
}

/// `sqrt(G(X, X))` at flow time `s`, for the flow from `pt0` with the
/// generating data of its (frozen) base point precomputed.
fn relaxation_speed(pt0: &ContactPoint, grad: &DVector<f64>, value: f64, s: f64) -> Result<f64> {
    let decay = (-s).exp();
    let y = grad + (pt0.y() - grad) * decay;
    let z = value + (pt0.z() - value) * decay;
    let tangent = ContactTangent {
        dx: DVector::zeros(pt0.dim()),
        dy: grad - &y,
        dz: value - z,
    };
    let pt = ContactPoint::from_vectors(pt0.x().clone(), y, z)?;
    metric_speed(metric_g_eval(&pt, &tangent, &tangent)?)
}

/// Remaining curve length at every sample of a relaxation trajectory.
///
/// The rows lie on one integral curve, so the lengths satisfy a backward
/// recurrence: one full quadrature for the tail after the final row, then a
/// three-point Simpson rule per row interval with the midpoint taken on the
/// exact flow. Same integrand as [`curve_length`], far cheaper on dense
/// grids. The segments are stitched at the stored rows, so the result
/// inherits the trajectory's own integration error; at the usual step sizes
/// that is far below the quadrature tolerance.
pub fn flow_lengths(w: &Potential, traj: &ContactTrajectory) -> Result<Vec<f64>> {
    let rows = traj.points.len();
    if rows == 0 {
        return Ok(Vec::new());
    }
    if w.dim() != traj.points[0].dim() {
        return Err(CoreError::DimensionMismatch {
            expected: w.dim(),
            found: traj.points[0].dim(),
        });
    }
    // x is carried bit-for-bit along the trajectory.
    let grad = w.gradient(traj.points[0].x())?;
    let value = w.value(traj.points[0].x())?;

    let mut lengths = vec![0.0; rows];
    lengths[rows - 1] = curve_length(w, &traj.points[rows - 1], 0.0)?;
    for i in (0..rows - 1).rev() {
        let width = traj.times[i + 1] - traj.times[i];
        let pt = &traj.points[i];
        let segment = (width / 6.0)
            * (relaxation_speed(pt, &grad, value, 0.0)?
                + 4.0 * relaxation_speed(pt, &grad, value, width / 2.0)?
                + relaxation_speed(pt, &grad, value, width)?);
        lengths[i] = lengths[i + 1] + segment;
    }
    Ok(lengths)
}

/// Flow samples on a uniform grid.
#[derive(Debug, Clone)]
pub struct ContactTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<ContactPoint>,
}

/// RK4 on the dynamic block `(y, z)`; `x` is a conserved coordinate of the
/// relaxation field and is carried through untouched.
pub fn integrate_relaxation(
    w: &Potential,
    pt0: &ContactPoint,
    t_max: f64,
    dt: f64,
) -> Result<ContactTrajectory> {
    ode::validate_grid(t_max, dt)?;
    if w.dim() != pt0.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: w.dim(),
            found: pt0.dim(),
        });
    }
    let n = pt0.dim();
    let grad = w.gradient(pt0.x())?;
    let value = w.value(pt0.x())?;
    let rhs = move |s: &DVector<f64>| {
        let mut ds = DVector::zeros(n + 1);
        for a in 0..n {
            ds[a] = grad[a] - s[a];
        }
        ds[n] = value - s[n];
        ds
    };
    let mut y0 = DVector::zeros(n + 1);
    y0.rows_mut(0, n).copy_from(pt0.y());
    y0[n] = pt0.z();
    let (times, raw) = ode::rk4_path(&rhs, &y0, t_max, dt);
    let points = raw
        .into_iter()
        .map(|s| ContactPoint::from_vectors(pt0.x().clone(), s.rows(0, n).into_owned(), s[n]))
        .collect::<Result<Vec<_>>>()?;
    Ok(ContactTrajectory { times, points })
}
