//! The `geometry` subcommand: every potential-level quantity of a model at
//! one parameter point, as a JSON report.

use serde::Serialize;

use mastergeo::exp_family::{
    alpha_connection, cubic_form, eta_of_theta, fisher_metric, psi_eq, CubicTensor,
};
use mastergeo::legendre::{h_eq, hessian_phi, phi_eq, theta_of_eta};
use mastergeo::{EtaPoint, StateSpace, ThetaPoint};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub enum CoordInput {
    Theta(Vec<f64>),
    Eta(Vec<f64>),
}

#[derive(Debug, Serialize)]
pub struct ModelInfo {
    pub labels: Vec<String>,
    pub n: usize,
}

#[derive(Debug, Serialize)]
pub struct AlphaConnections {
    pub alpha_minus_1: Vec<Vec<Vec<f64>>>,
    pub alpha_0: Vec<Vec<Vec<f64>>>,
    pub alpha_1: Vec<Vec<Vec<f64>>>,
}

/// Closed-form reference values for the two-state spin model, with the
/// absolute deviation of each computed quantity.
#[derive(Debug, Serialize)]
pub struct IsingReference {
    pub psi_eq: f64,
    pub eta: f64,
    pub fisher: f64,
    pub cubic: f64,
    pub phi_eq: f64,
    pub h_eq: f64,
    pub deviations: IsingDeviations,
}

#[derive(Debug, Serialize)]
pub struct IsingDeviations {
    pub psi_eq: f64,
    pub eta: f64,
    pub fisher: f64,
    pub cubic: f64,
    pub phi_eq: f64,
    pub h_eq: f64,
}

#[derive(Debug, Serialize)]
pub struct GeometryReport {
    pub model: ModelInfo,
    pub given: &'static str,
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    pub psi_eq: f64,
    pub phi_eq: f64,
    pub h_eq: f64,
    pub fisher: Vec<Vec<f64>>,
    pub fisher_inverse: Vec<Vec<f64>>,
    pub cubic: Vec<Vec<Vec<f64>>>,
    pub alpha_connection: AlphaConnections,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ising_reference: Option<IsingReference>,
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn tensor_rows(t: &CubicTensor) -> Vec<Vec<Vec<f64>>> {
    let n = t.n();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| (0..n).map(|c| t.get(a, b, c)).collect())
                .collect()
        })
        .collect()
}

fn is_ising(model: &StateSpace) -> bool {
    model.num_observables() == 1
        && model.labels() == ["+1", "-1"]
        && model.observable(0, 0) == 1.0
        && model.observable(0, 1) == -1.0
}

pub fn run(model: &StateSpace, input: &CoordInput) -> Result<GeometryReport, CliError> {
    let (th, given) = match input {
        CoordInput::Theta(raw) => {
            if raw.len() != model.num_observables() {
                return Err(CliError::Validation(format!(
                    "theta: expected {} components, got {}",
                    model.num_observables(),
                    raw.len()
                )));
            }
            (ThetaPoint::new(raw.clone())?, "theta")
        }
        CoordInput::Eta(raw) => {
            let et = EtaPoint::new(model, raw.clone())?;
            (theta_of_eta(model, &et)?, "eta")
        }
    };

    let eta = eta_of_theta(model, &th)?;
    let et = eta.clone();
    let psi = psi_eq(model, &th)?;
    let phi = phi_eq(model, &et)?;
    let entropy = h_eq(model, &th)?;
    let fisher = fisher_metric(model, &th)?;
    let fisher_inverse = hessian_phi(model, &et)?;
    let cubic = cubic_form(model, &th)?;

    let ising_reference = if is_ising(model) {
        let t = th.get(0);
        let e = eta.get(0);
        let sech2 = 1.0 / t.cosh().powi(2);
        let reference_psi = (2.0 * t.cosh()).ln();
        let reference_eta = t.tanh();
        let reference_fisher = sech2;
        let reference_cubic = -2.0 * sech2 * t.tanh();
        let reference_phi = e * e.atanh() + 0.5 * (1.0 - e * e).ln() - 2.0f64.ln();
        let reference_h = t * t.tanh() - (2.0 * t.cosh()).ln();
        Some(IsingReference {
            psi_eq: reference_psi,
            eta: reference_eta,
            fisher: reference_fisher,
            cubic: reference_cubic,
            phi_eq: reference_phi,
            h_eq: reference_h,
            deviations: IsingDeviations {
                psi_eq: (psi - reference_psi).abs(),
                eta: (eta.get(0) - reference_eta).abs(),
                fisher: (fisher[(0, 0)] - reference_fisher).abs(),
                cubic: (cubic.get(0, 0, 0) - reference_cubic).abs(),
                phi_eq: (phi - reference_phi).abs(),
                h_eq: (entropy - reference_h).abs(),
            },
        })
    } else {
        None
    };

    Ok(GeometryReport {
        model: ModelInfo {
            labels: model.labels().to_vec(),
            n: model.num_observables(),
        },
        given,
        theta: th.coords().iter().copied().collect(),
        eta: eta.coords().iter().copied().collect(),
        psi_eq: psi,
        phi_eq: phi,
        h_eq: entropy,
        fisher: matrix_rows(&fisher),
        fisher_inverse: matrix_rows(&fisher_inverse),
        cubic: tensor_rows(&cubic),
        alpha_connection: AlphaConnections {
            alpha_minus_1: tensor_rows(&alpha_connection(model, &th, -1.0)?),
            alpha_0: tensor_rows(&alpha_connection(model, &th, 0.0)?),
            alpha_1: tensor_rows(&alpha_connection(model, &th, 1.0)?),
        },
        ising_reference,
    })
}
