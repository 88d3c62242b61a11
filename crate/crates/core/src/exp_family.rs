//! Discrete exponential-family models over finite state spaces.
//!
//! A model is a finite state set together with an `n x |states|` observable
//! table `O_a(j)`. The equilibrium family `p_theta(j) ~ exp(theta . O(j))`
//! carries the usual convex machinery: the log-partition potential, its
//! gradient (the expectation parameters), the Fisher metric (Hessian), and
//! the cubic form (third derivatives) that generates the one-parameter
//! family of alpha-connections.
//!
//! All types are immutable after construction and every operation is a pure
//! function of its inputs, so values can be shared freely across threads.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{CoreError, Result};
use crate::polytope;

/// Eigenvalues of the covariance at `theta = 0` below this threshold mark a
/// model whose centered observables do not span the parameter space.
pub const RANK_TOL: f64 = 1e-12;

/// Margin required of the least barycentric weight when admitting an
/// expectation vector into the open moment-polytope interior.
pub const ETA_INTERIOR_TOL: f64 = 1e-9;

const DISTRIBUTION_SUM_TOL: f64 = 1e-12;

/// Finite state space with its observable table.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    labels: Vec<String>,
    /// `n x |states|`; row `a` holds `O_a(j)` over the states `j`.
    observables: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>, observables: DMatrix<f64>) -> Result<Self> {
        let states = labels.len();
        if states < 2 {
            return Err(CoreError::InvalidModel(format!(
                "labels: need at least 2 states, got {states}"
            )));
        }
        if observables.nrows() == 0 {
            return Err(CoreError::InvalidModel(
                "observables: need at least one observable row".into(),
            ));
        }
        if observables.ncols() != states {
            return Err(CoreError::InvalidModel(format!(
                "observables: {} columns but {} labels",
                observables.ncols(),
                states
            )));
        }
        if let Some((a, j)) = (0..observables.nrows())
            .flat_map(|a| (0..states).map(move |j| (a, j)))
            .find(|&(a, j)| !observables[(a, j)].is_finite())
        {
            return Err(CoreError::InvalidModel(format!(
                "observables: non-finite entry at row {a}, column {j}"
            )));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(CoreError::InvalidModel(format!(
                    "labels: duplicate label {label:?}"
                )));
            }
        }
        Ok(Self {
            labels,
            observables,
        })
    }

    /// Build from row-major observable rows.
    pub fn from_rows(labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let states = labels.len();
        for (a, row) in rows.iter().enumerate() {
            if row.len() != states {
                return Err(CoreError::InvalidModel(format!(
                    "observables: row {a} has {} entries, expected {states}",
                    row.len()
                )));
            }
        }
        if rows.is_empty() {
            return Err(CoreError::InvalidModel(
                "observables: need at least one observable row".into(),
            ));
        }
        let observables = DMatrix::from_fn(rows.len(), states, |a, j| rows[a][j]);
        Self::new(labels, observables)
    }

    /// Number of states `|Gamma|`.
    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    /// Number of observables `n`.
    pub fn num_observables(&self) -> usize {
        self.observables.nrows()
    }

    pub fn label(&self, j: usize) -> &str {
        &self.labels[j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `O_a(j)`.
    pub fn observable(&self, a: usize, j: usize) -> f64 {
        self.observables[(a, j)]
    }

    pub fn observables(&self) -> &DMatrix<f64> {
        &self.observables
    }

    /// Whether the centered observables fail to span the parameter space.
    ///
    /// The Fisher metric of such a model is only positive semi-definite and
    /// coordinate duality breaks down; Legendre inversion refuses them.
    pub fn is_rank_deficient(&self) -> bool {
        let zero = ThetaPoint::zeros(self.num_observables());
        let g = fisher_metric(self, &zero).expect("covariance at theta = 0 always exists");
        g.symmetric_eigenvalues().iter().any(|&ev| ev < RANK_TOL)
    }

    /// `theta . O(j)` for every state `j`.
    pub(crate) fn log_weights(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.observables.tr_mul(theta)
    }
}

/// Two-state spin model: states `+1`, `-1` with the spin itself as the only
/// observable.
pub fn make_ising() -> StateSpace {
    StateSpace::from_rows(vec!["+1".to_string(), "-1".to_string()], &[vec![1.0, -1.0]])
        .expect("static model is valid")
}

/// Natural parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPoint {
    theta: DVector<f64>,
}

impl ThetaPoint {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(theta))
    }

    pub fn from_vector(theta: DVector<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(CoreError::InvalidModel(
                "theta: need at least one component".into(),
            ));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidModel(
                "theta: components must be finite".into(),
            ));
        }
        Ok(Self { theta })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            theta: DVector::zeros(n),
        }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn get(&self, a: usize) -> f64 {
        self.theta[a]
    }
}

/// Expectation parameters, admitted only from the open interior of the
/// moment polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaPoint {
    eta: DVector<f64>,
}

impl EtaPoint {
    pub fn new(model: &StateSpace, eta: Vec<f64>) -> Result<Self> {
        Self::from_vector(model, DVector::from_vec(eta))
    }

    pub fn from_vector(model: &StateSpace, eta: DVector<f64>) -> Result<Self> {
        let n = model.num_observables();
        if eta.len() != n {
            return Err(CoreError::DimensionMismatch {
                expected: n,
                found: eta.len(),
            });
        }
        if eta.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidModel(
                "eta: components must be finite".into(),
            ));
        }
        if !polytope::strictly_interior(model.observables(), &eta, ETA_INTERIOR_TOL) {
            return Err(CoreError::EtaOutsideDomain);
        }
        Ok(Self { eta })
    }

    /// Values of the potential gradient lie in the interior by construction,
    /// even when they are too close to the boundary for the barycentric
    /// margin test (e.g. at large natural parameters).
    pub(crate) fn on_graph(eta: DVector<f64>) -> Self {
        Self { eta }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    pub fn get(&self, a: usize) -> f64 {
        self.eta[a]
    }
}

/// Probability vector over the states.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    p: DVector<f64>,
}

impl Distribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(p))
    }

    pub fn from_vector(p: DVector<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(CoreError::InvalidDistribution("empty vector".into()));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidDistribution(
                "components must be finite".into(),
            ));
        }
        if let Some(j) = (0..p.len()).find(|&j| p[j] < 0.0) {
            return Err(CoreError::InvalidDistribution(format!(
                "negative component {} at index {j}",
                p[j]
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
            return Err(CoreError::InvalidDistribution(format!(
                "components sum to {sum}, not 1"
            )));
        }
        Ok(Self { p })
    }

    /// Admission gate for integrator output: tiny negative dust and mass
    /// drift up to `1e-9` pass through unchanged, anything worse is an
    /// integration failure. No clamping is performed.
    pub(crate) fn from_integration_state(p: DVector<f64>, t: f64) -> Result<Self> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Integration {
                t,
                reason: "non-finite component".into(),
            });
        }
        if let Some(j) = (0..p.len()).find(|&j| p[j] < -1e-9) {
            return Err(CoreError::Integration {
                t,
                reason: format!("component {j} fell to {}", p[j]),
            });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::Integration {
                t,
                reason: format!("total probability drifted to {sum}"),
            });
        }
        Ok(Self { p })
    }

    pub fn uniform(states: usize) -> Self {
        Self {
            p: DVector::from_element(states, 1.0 / states as f64),
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.p[j]
    }

    pub fn probabilities(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.p.iter().all(|&v| v > 0.0)
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        (&self.p - &other.p).abs().max()
    }
}

fn check_theta(model: &StateSpace, th: &ThetaPoint) -> Result<()> {
    if th.dim() != model.num_observables() {
        return Err(CoreError::DimensionMismatch {
            expected: model.num_observables(),
            found: th.dim(),
        });
    }
    Ok(())
}

/// Shifted exponential weights: the common maximum and the sum of the
/// shifted terms, from which every partition-type quantity is assembled.
fn shifted_weights(model: &StateSpace, th: &ThetaPoint) -> Result<(DVector<f64>, f64, f64)> {
    check_theta(model, th)?;
    let s = model.log_weights(th.coords());
    let shift = s.max();
    let sum: f64 = s.iter().map(|&v| (v - shift).exp()).sum();
    if !shift.is_finite() || !sum.is_finite() {
        return Err(CoreError::ParameterOutOfRange);
    }
    Ok((s, shift, sum))
}

/// Partition sum `Z(theta) = sum_j exp(theta . O(j))`.
pub fn partition_function(model: &StateSpace, th: &ThetaPoint) -> Result<f64> {
    let (_, shift, sum) = shifted_weights(model, th)?;
    let z = shift.exp() * sum;
    if !z.is_finite() || z <= 0.0 {
        return Err(CoreError::ParameterOutOfRange);
    }
    Ok(z)
}

/// Log-partition potential `ln Z(theta)`, evaluated in shifted form so it
/// stays representable even where `Z` itself overflows.
pub fn psi_eq(model: &StateSpace, th: &ThetaPoint) -> Result<f64> {
    let (_, shift, sum) = shifted_weights(model, th)?;
    let psi = shift + sum.ln();
    if !psi.is_finite() {
        return Err(CoreError::ParameterOutOfRange);
    }
    Ok(psi)
}

/// Equilibrium distribution `p_theta(j) = exp(theta . O(j) - psi)`.
pub fn equilibrium_distribution(model: &StateSpace, th: &ThetaPoint) -> Result<Distribution> {
    let (s, shift, sum) = shifted_weights(model, th)?;
    let p = DVector::from_fn(model.num_states(), |j, _| (s[j] - shift).exp() / sum);
    Distribution::from_vector(p)
}

pub(crate) fn mean_vector(model: &StateSpace, th: &ThetaPoint) -> Result<DVector<f64>> {
    let p = equilibrium_distribution(model, th)?;
    Ok(model.observables() * p.probabilities())
}

/// Expectation parameters `eta_a = <O_a> at equilibrium`, the gradient of
/// the log-partition potential.
pub fn eta_of_theta(model: &StateSpace, th: &ThetaPoint) -> Result<EtaPoint> {
    Ok(EtaPoint::on_graph(mean_vector(model, th)?))
}

/// Fisher metric: the covariance of the observables at equilibrium, equal to
/// the Hessian of the log-partition potential.
pub fn fisher_metric(model: &StateSpace, th: &ThetaPoint) -> Result<DMatrix<f64>> {
    let p = equilibrium_distribution(model, th)?;
    let eta = model.observables() * p.probabilities();
    let n = model.num_observables();
    let mut g = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut cov = 0.0;
            for j in 0..model.num_states() {
                cov += p.get(j)
                    * (model.observable(a, j) - eta[a])
                    * (model.observable(b, j) - eta[b]);
            }
            g[(a, b)] = cov;
            g[(b, a)] = cov;
        }
    }
    Ok(g)
}

/// Fully symmetric rank-3 tensor with dense storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicTensor {
    n: usize,
    data: Vec<f64>,
}

impl CubicTensor {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.n + b) * self.n + c]
    }

    pub(crate) fn set_raw(&mut self, a: usize, b: usize, c: usize, value: f64) {
        self.data[(a * self.n + b) * self.n + c] = value;
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| factor * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &CubicTensor) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
    }
}

/// Cubic form: third central moments of the observables, equal to the third
/// derivatives of the log-partition potential. Symmetric in all index
/// permutations by construction.
pub fn cubic_form(model: &StateSpace, th: &ThetaPoint) -> Result<CubicTensor> {
    let p = equilibrium_distribution(model, th)?;
    let eta = model.observables() * p.probabilities();
    let n = model.num_observables();
    let mut tensor = CubicTensor::zeros(n);
    for a in 0..n {
        for b in a..n {
            for c in b..n {
                let mut moment = 0.0;
                for j in 0..model.num_states() {
                    moment += p.get(j)
                        * (model.observable(a, j) - eta[a])
                        * (model.observable(b, j) - eta[b])
                        * (model.observable(c, j) - eta[c]);
                }
                for (x, y, z) in [
                    (a, b, c),
                    (a, c, b),
                    (b, a, c),
                    (b, c, a),
                    (c, a, b),
                    (c, b, a),
                ] {
                    tensor.set_raw(x, y, z, moment);
                }
            }
        }
    }
    Ok(tensor)
}

/// Alpha-connection components `(1 - alpha)/2 * C` in the natural
/// coordinates; `alpha = 1` is the flat exponential connection, `alpha = 0`
/// the Levi-Civita connection.
pub fn alpha_connection(model: &StateSpace, th: &ThetaPoint, alpha: f64) -> Result<CubicTensor> {
    Ok(cubic_form(model, th)?.scaled((1.0 - alpha) / 2.0))
}

/// On-disk model description.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Ising,
    Custom {
        labels: Vec<String>,
        observables: Vec<Vec<f64>>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<StateSpace> {
        match self {
            ModelSpec::Ising => Ok(make_ising()),
            ModelSpec::Custom {
                labels,
                observables,
            } => StateSpace::from_rows(labels.clone(), observables),
        }
    }
}

/// Parse a model definition file.
pub fn model_from_json(text: &str) -> Result<StateSpace> {
    let spec: ModelSpec =
        serde_json::from_str(text).map_err(|e| CoreError::ModelFile(e.to_string()))?;
    spec.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use proptest::prelude::*;

    fn three_state() -> StateSpace {
        StateSpace::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            &[vec![-1.0, 0.0, 1.0]],
        )
        .unwrap()
    }

    fn theta1(v: f64) -> ThetaPoint {
        ThetaPoint::new(vec![v]).unwrap()
    }

    #[test]
    fn partition_function_matches_direct_sums() {
        let ising = make_ising();
        assert!((partition_function(&ising, &theta1(0.0)).unwrap() - 2.0).abs() < 1e-15);
        // Two-term oracle at theta = 1.
        let direct = 1.0f64.exp() + (-1.0f64).exp();
        let z = partition_function(&ising, &theta1(1.0)).unwrap();
        assert!((z - direct).abs() < 1e-12);
        assert!((z - 3.086_161_269_630_487_4).abs() < 1e-10);

        let z3 = partition_function(&three_state(), &theta1(0.0)).unwrap();
        assert!((z3 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn partition_function_overflow_is_reported() {
        let ising = make_ising();
        assert!(matches!(
            partition_function(&ising, &theta1(800.0)),
            Err(CoreError::ParameterOutOfRange)
        ));
        // The log-partition stays representable there.
        assert!((psi_eq(&ising, &theta1(800.0)).unwrap() - 800.0).abs() < 1e-9);
    }

    #[test]
    fn psi_eq_examples() {
        let ising = make_ising();
        assert!((psi_eq(&ising, &theta1(0.0)).unwrap() - 2.0f64.ln()).abs() < 1e-15);
        let direct = (1.0f64.exp() + (-1.0f64).exp()).ln();
        assert!((psi_eq(&ising, &theta1(1.0)).unwrap() - direct).abs() < 1e-14);
        assert!((direct - 1.126_928_011_042_972_5).abs() < 1e-12);
        let plus = psi_eq(&ising, &theta1(1.0)).unwrap();
        let minus = psi_eq(&ising, &theta1(-1.0)).unwrap();
        assert!((plus - minus).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_distribution_examples() {
        let ising = make_ising();
        let p0 = equilibrium_distribution(&ising, &theta1(0.0)).unwrap();
        assert!((p0.get(0) - 0.5).abs() < 1e-15);
        assert!((p0.get(1) - 0.5).abs() < 1e-15);

        // Direct normalization oracle at theta = 1.
        let (e, einv) = (1.0f64.exp(), (-1.0f64).exp());
        let p1 = equilibrium_distribution(&ising, &theta1(1.0)).unwrap();
        assert!((p1.get(0) - e / (e + einv)).abs() < 1e-15);
        assert!((p1.get(1) - einv / (e + einv)).abs() < 1e-15);
        assert!(p1.is_strictly_positive());
        assert!((p1.probabilities().sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eta_examples() {
        let ising = make_ising();
        assert!(eta_of_theta(&ising, &theta1(0.0)).unwrap().get(0).abs() < 1e-15);
        // Weighted-sum oracle at theta = 1.
        let (e, einv) = (1.0f64.exp(), (-1.0f64).exp());
        let oracle = (e - einv) / (e + einv);
        let eta = eta_of_theta(&ising, &theta1(1.0)).unwrap();
        assert!((eta.get(0) - oracle).abs() < 1e-15);
        assert!((eta.get(0) - 1.0f64.tanh()).abs() < 1e-15);
        // Saturation at large parameters.
        let eta30 = eta_of_theta(&ising, &theta1(30.0)).unwrap();
        assert!((eta30.get(0) - 1.0).abs() < 1e-12);

        let half = eta_of_theta(&ising, &theta1(0.5)).unwrap();
        assert!((half.get(0) - 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn fisher_metric_examples() {
        let ising = make_ising();
        let g0 = fisher_metric(&ising, &theta1(0.0)).unwrap();
        assert!((g0[(0, 0)] - 1.0).abs() < 1e-15);

        // Covariance-sum oracle at theta = 1.
        let (e, einv) = (1.0f64.exp(), (-1.0f64).exp());
        let (p, q) = (e / (e + einv), einv / (e + einv));
        let mean = p - q;
        let oracle = p * (1.0 - mean).powi(2) + q * (-1.0 - mean).powi(2);
        let g1 = fisher_metric(&ising, &theta1(1.0)).unwrap();
        assert!((g1[(0, 0)] - oracle).abs() < 1e-15);
        let sech2 = 1.0 / 1.0f64.cosh().powi(2);
        assert!((g1[(0, 0)] - sech2).abs() < 1e-14);

        // Uniform three-state model: variance of {-1, 0, 1} is 2/3.
        let g3 = fisher_metric(&three_state(), &theta1(0.0)).unwrap();
        assert!((g3[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cubic_form_examples() {
        let ising = make_ising();
        assert!(cubic_form(&ising, &theta1(0.0)).unwrap().get(0, 0, 0).abs() < 1e-15);

        // Central-moment oracle at theta = 1.
        let (e, einv) = (1.0f64.exp(), (-1.0f64).exp());
        let (p, q) = (e / (e + einv), einv / (e + einv));
        let mean = p - q;
        let oracle = p * (1.0 - mean).powi(3) + q * (-1.0 - mean).powi(3);
        let c1 = cubic_form(&ising, &theta1(1.0)).unwrap().get(0, 0, 0);
        assert!((c1 - oracle).abs() < 1e-15);
        let closed = -2.0 / 1.0f64.cosh().powi(2) * 1.0f64.tanh();
        assert!((c1 - closed).abs() < 1e-14);
        assert!((closed + 0.639_700_008_449_224_5).abs() < 1e-12);

        let cm = cubic_form(&ising, &theta1(-1.0)).unwrap().get(0, 0, 0);
        assert!((cm + c1).abs() < 1e-15);
    }

    #[test]
    fn alpha_connection_examples() {
        let ising = make_ising();
        let c = cubic_form(&ising, &theta1(1.0)).unwrap();
        let e_flat = alpha_connection(&ising, &theta1(1.0), 1.0).unwrap();
        assert_eq!(e_flat.max_abs(), 0.0);
        let levi_civita = alpha_connection(&ising, &theta1(1.0), 0.0).unwrap();
        assert!((levi_civita.get(0, 0, 0) - 0.5 * c.get(0, 0, 0)).abs() < 1e-15);
        let mixture = alpha_connection(&ising, &theta1(1.0), -1.0).unwrap();
        assert!((mixture.get(0, 0, 0) - c.get(0, 0, 0)).abs() < 1e-15);
    }

    #[test]
    fn ising_closed_forms_on_grid() {
        let ising = make_ising();
        for k in 0..25 {
            let t = -3.0 + 6.0 * k as f64 / 24.0;
            let th = theta1(t);
            assert!((psi_eq(&ising, &th).unwrap() - (2.0 * t.cosh()).ln()).abs() < 1e-10);
            assert!((eta_of_theta(&ising, &th).unwrap().get(0) - t.tanh()).abs() < 1e-10);
            let sech2 = 1.0 / t.cosh().powi(2);
            assert!((fisher_metric(&ising, &th).unwrap()[(0, 0)] - sech2).abs() < 1e-10);
            let c = -2.0 * sech2 * t.tanh();
            assert!((cubic_form(&ising, &th).unwrap().get(0, 0, 0) - c).abs() < 1e-10);
        }
    }

    #[test]
    fn derivatives_match_finite_differences_on_grid() {
        let ising = make_ising();
        let psi = |x: &DVector<f64>| {
            psi_eq(&ising, &ThetaPoint::from_vector(x.clone()).unwrap()).unwrap()
        };
        for k in 0..25 {
            let t = -3.0 + 6.0 * k as f64 / 24.0;
            let x = DVector::from_vec(vec![t]);
            let th = theta1(t);

            let grad = fd::gradient(&psi, &x, 1e-4);
            assert!((grad[0] - eta_of_theta(&ising, &th).unwrap().get(0)).abs() < 1e-6);

            let hess = fd::hessian(&psi, &x, 1e-4);
            assert!((hess[(0, 0)] - fisher_metric(&ising, &th).unwrap()[(0, 0)]).abs() < 1e-5);

            let third = fd::third_derivative(&psi, &x, 1e-3);
            assert!(
                (third.get(0, 0, 0) - cubic_form(&ising, &th).unwrap().get(0, 0, 0)).abs() < 1e-4
            );
        }
    }

    #[test]
    fn fisher_metric_is_symmetric_psd_on_grid() {
        let model = StateSpace::from_rows(
            vec!["uu".into(), "ud".into(), "du".into(), "dd".into()],
            &[vec![1.0, 1.0, -1.0, -1.0], vec![1.0, -1.0, 1.0, -1.0]],
        )
        .unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let th =
                    ThetaPoint::new(vec![-3.0 + 1.5 * i as f64, -3.0 + 1.5 * j as f64]).unwrap();
                let g = fisher_metric(&model, &th).unwrap();
                assert!((g[(0, 1)] - g[(1, 0)]).abs() < 1e-15);
                for ev in g.symmetric_eigenvalues().iter() {
                    assert!(*ev >= -1e-12);
                }
            }
        }
    }

    #[test]
    fn degenerate_model_is_flagged_but_allowed() {
        let degenerate = StateSpace::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![1.0, -1.0], vec![2.0, -2.0]],
        )
        .unwrap();
        assert!(degenerate.is_rank_deficient());
        assert!(!make_ising().is_rank_deficient());
        // Potential-level quantities still evaluate.
        assert!(psi_eq(&degenerate, &ThetaPoint::new(vec![0.3, -0.1]).unwrap()).is_ok());
    }

    #[test]
    fn state_space_validation_errors() {
        assert!(matches!(
            StateSpace::from_rows(vec!["only".into()], &[vec![1.0]]),
            Err(CoreError::InvalidModel(msg)) if msg.contains("labels")
        ));
        assert!(matches!(
            StateSpace::from_rows(vec!["a".into(), "a".into()], &[vec![1.0, -1.0]]),
            Err(CoreError::InvalidModel(msg)) if msg.contains("duplicate")
        ));
        assert!(matches!(
            StateSpace::from_rows(vec!["a".into(), "b".into()], &[vec![1.0]]),
            Err(CoreError::InvalidModel(msg)) if msg.contains("row 0")
        ));
        assert!(matches!(
            StateSpace::from_rows(vec!["a".into(), "b".into()], &[vec![1.0, f64::NAN]]),
            Err(CoreError::InvalidModel(msg)) if msg.contains("non-finite")
        ));
    }

    #[test]
    fn eta_point_admission() {
        let ising = make_ising();
        assert!(EtaPoint::new(&ising, vec![0.5]).is_ok());
        assert!(EtaPoint::new(&ising, vec![1.0 - 1e-6]).is_ok());
        assert!(matches!(
            EtaPoint::new(&ising, vec![1.0]),
            Err(CoreError::EtaOutsideDomain)
        ));
        assert!(matches!(
            EtaPoint::new(&ising, vec![1.1]),
            Err(CoreError::EtaOutsideDomain)
        ));
        assert!(matches!(
            EtaPoint::new(&ising, vec![0.1, 0.2]),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![1.0, 0.0]).is_ok());
        assert!(!Distribution::new(vec![1.0, 0.0])
            .unwrap()
            .is_strictly_positive());
        assert!(matches!(
            Distribution::new(vec![0.6, 0.6]),
            Err(CoreError::InvalidDistribution(_))
        ));
        assert!(matches!(
            Distribution::new(vec![-0.1, 1.1]),
            Err(CoreError::InvalidDistribution(_))
        ));
    }

    #[test]
    fn model_json_round_trips() {
        let ising = model_from_json(r#"{"type":"ising"}"#).unwrap();
        assert_eq!(ising.num_states(), 2);
        assert_eq!(ising.labels(), ["+1", "-1"]);

        let custom =
            model_from_json(r#"{"type":"custom","labels":["a","b","c"],"observables":[[-1,0,1]]}"#)
                .unwrap();
        assert_eq!(custom.num_states(), 3);
        assert_eq!(custom.num_observables(), 1);

        assert!(matches!(
            model_from_json(r#"{"type":"custom","labels":["a","b"],"observables":[[1,2,3]]}"#),
            Err(CoreError::InvalidModel(msg)) if msg.contains("observables")
        ));
        assert!(matches!(
            model_from_json(r#"{"type":"sphere"}"#),
            Err(CoreError::ModelFile(_))
        ));
    }

    proptest! {
        #[test]
        fn psi_midpoint_convexity(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let ising = make_ising();
            let mid = psi_eq(&ising, &theta1(0.5 * (a + b))).unwrap();
            let avg = 0.5 * (psi_eq(&ising, &theta1(a)).unwrap() + psi_eq(&ising, &theta1(b)).unwrap());
            prop_assert!(mid <= avg + 1e-12);
            if (a - b).abs() > 1e-3 {
                prop_assert!(mid < avg);
            }
        }

        #[test]
        fn cubic_form_is_permutation_symmetric(
            t0 in -2.0f64..2.0,
            t1 in -2.0f64..2.0,
            o in proptest::collection::vec(-2.0f64..2.0, 8),
        ) {
            let model = StateSpace::from_rows(
                vec!["p".into(), "q".into(), "r".into(), "s".into()],
                &[o[..4].to_vec(), o[4..].to_vec()],
            ).unwrap();
            let th = ThetaPoint::new(vec![t0, t1]).unwrap();
            let c = cubic_form(&model, &th).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    for d in 0..2 {
                        let v = c.get(a, b, d);
                        prop_assert!((v - c.get(a, d, b)).abs() <= 1e-12);
                        prop_assert!((v - c.get(b, a, d)).abs() <= 1e-12);
                        prop_assert!((v - c.get(d, b, a)).abs() <= 1e-12);
                    }
                }
            }
        }

        #[test]
        fn equilibrium_is_normalized_and_positive(t in -5.0f64..5.0) {
            let p = equilibrium_distribution(&three_state(), &theta1(t)).unwrap();
            prop_assert!(p.is_strictly_positive());
            prop_assert!((p.probabilities().sum() - 1.0).abs() <= 1e-12);
        }
    }
}
