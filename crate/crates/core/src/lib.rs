//! Solvable master equations on finite state spaces, the expectation-variable
//! dynamics derived from them, and their information-geometric and
//! contact-geometric structure.
//!
//! The library is organized in layers:
//!
//! - [`exp_family`]: finite state spaces, exponential-family equilibria, and
//!   the convex geometry of the log-partition potential (Fisher metric,
//!   cubic form, alpha-connections).
//! - [`legendre`]: the dual potential, the inverse coordinate map, and the
//!   equilibrium entropy identities.
//! - [`master`]: distribution-level dynamics with a solvable kernel, exact
//!   solutions, RK4 trajectories, and their diagnostics.
//! - [`moments`]: the closed dynamical systems for expectation variables and
//!   their consistency with the distribution-level runs.
//! - [`contact`]: Darboux-coordinate geometry of relaxation: Hamiltonian
//!   vector fields, Legendre submanifolds as attractors, the metric `G`,
//!   and curve lengths to equilibrium.
//!
//! Everything is deterministic and pure; closed-form solutions are kept next
//! to the integrators so each route can be checked against the other.

pub mod contact;
pub mod error;
pub mod exp_family;
pub mod fd;
pub mod legendre;
pub mod master;
pub mod moments;
pub mod ode;
mod polytope;
pub mod report;

pub use error::{CoreError, Result};
pub use exp_family::{
    make_ising, model_from_json, Distribution, EtaPoint, ModelSpec, StateSpace, ThetaPoint,
};
