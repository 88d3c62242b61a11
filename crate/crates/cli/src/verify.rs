//! The `verify` subcommand: the cross-module invariant suite.
//!
//! Each check measures a worst-case deviation against a pinned tolerance and
//! reports one line. Module groups run on their own worker threads over
//! private data; results are merged and printed in a fixed order, so output
//! is deterministic.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mastergeo::contact::{
    self, ContactPoint, ContactTangent, NumericHamiltonian, Potential, RelaxationHamiltonian,
};
use mastergeo::exp_family::{
    alpha_connection, cubic_form, equilibrium_distribution, eta_of_theta, fisher_metric, psi_eq,
};
use mastergeo::legendre::{grad_phi, h_eq, hessian_phi, phi_eq, theta_of_eta};
use mastergeo::master::{
    exact_solution, general_master_rhs, kl_divergence, primary_rhs, solvable_kernel, MarkovKernel,
};
use mastergeo::moments::{
    consistency_check_primary, dual_entropy_consistency, dual_moment_exact, dual_moment_rhs,
    integrate_dual_moments, integrate_primary_moments, primary_moment_exact, primary_moment_rhs,
    DualMomentState, PrimaryMomentState,
};
use mastergeo::{fd, make_ising, ode, Distribution, EtaPoint, StateSpace, ThetaPoint};

use crate::error::CliError;
use crate::simulate::fit_log_slope;

pub const SCOPES: [&str; 6] = [
    "all",
    "exp_family",
    "legendre",
    "master",
    "moments",
    "contact",
];

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(module: &'static str, name: &'static str, worst: f64, tol: f64) -> Self {
        Self {
            module,
            name,
            worst,
            tol,
            passed: worst <= tol,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}/{}: worst={:.3e} tol={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.module,
            self.name,
            self.worst,
            self.tol
        )
    }
}

/// Exit status of a verification run: zero only when every check passed.
pub fn exit_code(results: &[CheckResult]) -> i32 {
    if results.iter().all(|r| r.passed) {
        0
    } else {
        3
    }
}

/// Run one scope (or every module) and return the results in print order.
pub fn run_scope(scope: &str) -> Result<Vec<CheckResult>, CliError> {
    if !SCOPES.contains(&scope) {
        return Err(CliError::Validation(format!(
            "scope: unknown scope {scope:?} (expected one of {})",
            SCOPES.join(", ")
        )));
    }
    if scope != "all" {
        return Ok(run_module(scope));
    }
    let modules = ["exp_family", "legendre", "master", "moments", "contact"];
    let mut slots: Vec<Option<Vec<CheckResult>>> = vec![None; modules.len()];
    std::thread::scope(|threads| {
        let handles: Vec<_> = modules
            .iter()
            .map(|name| threads.spawn(move || run_module(name)))
            .collect();
        for (slot, handle) in slots.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("verify worker panicked"));
        }
    });
    Ok(slots.into_iter().flatten().flatten().collect())
}

fn run_module(name: &str) -> Vec<CheckResult> {
    match name {
        "exp_family" => checks_exp_family(),
        "legendre" => checks_legendre(),
        "master" => checks_master(),
        "moments" => checks_moments(),
        "contact" => checks_contact(),
        _ => unreachable!("scope validated by run_scope"),
    }
}

// ---- fixtures ------------------------------------------------------------

fn two_spin() -> StateSpace {
    StateSpace::from_rows(
        vec!["uu".into(), "ud".into(), "du".into(), "dd".into()],
        &[vec![1.0, 1.0, -1.0, -1.0], vec![1.0, -1.0, 1.0, -1.0]],
    )
    .expect("static model is valid")
}

fn three_state() -> StateSpace {
    StateSpace::from_rows(
        vec!["a".into(), "b".into(), "c".into()],
        &[vec![-1.0, 0.0, 1.0]],
    )
    .expect("static model is valid")
}

fn random_model(seed: u64) -> StateSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = (1..=5).map(|i| format!("s{i}")).collect();
    let model = StateSpace::from_rows(labels, &rows).expect("sampled model is valid");
    assert!(
        !model.is_rank_deficient(),
        "sampled model must be full rank"
    );
    model
}

fn random_distribution(rng: &mut ChaCha8Rng, states: usize) -> Distribution {
    let raw: Vec<f64> = (0..states)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    Distribution::new(raw.into_iter().map(|v| v / total).collect()).expect("normalized sample")
}

fn grid_1d() -> Vec<f64> {
    (0..25).map(|k| -3.0 + 6.0 * k as f64 / 24.0).collect()
}

fn theta1(v: f64) -> ThetaPoint {
    ThetaPoint::new(vec![v]).expect("finite")
}

fn theta2(a: f64, b: f64) -> ThetaPoint {
    ThetaPoint::new(vec![a, b]).expect("finite")
}

/// Grid of test points over both reference models.
fn theta_points() -> Vec<(StateSpace, ThetaPoint)> {
    let ising = make_ising();
    let ts = two_spin();
    let mut out: Vec<(StateSpace, ThetaPoint)> = grid_1d()
        .into_iter()
        .map(|t| (ising.clone(), theta1(t)))
        .collect();
    for i in (0..25).step_by(6) {
        for j in (0..25).step_by(6) {
            out.push((
                ts.clone(),
                theta2(-3.0 + 6.0 * i as f64 / 24.0, -3.0 + 6.0 * j as f64 / 24.0),
            ));
        }
    }
    out
}

fn psi_closure(model: &StateSpace) -> impl Fn(&DVector<f64>) -> f64 + '_ {
    move |x| {
        psi_eq(
            model,
            &ThetaPoint::from_vector(x.clone()).expect("finite grid point"),
        )
        .expect("grid point in range")
    }
}

// ---- exp_family ----------------------------------------------------------

fn checks_exp_family() -> Vec<CheckResult> {
    let module = "exp_family";
    let points = theta_points();

    let mut grad_dev = 0.0f64;
    let mut hess_dev = 0.0f64;
    let mut third_dev = 0.0f64;
    let mut sym_psd_dev = 0.0f64;
    let mut norm_dev = 0.0f64;
    let mut perm_dev = 0.0f64;
    for (model, th) in &points {
        let psi = psi_closure(model);
        let x = th.coords().clone();

        let fd_grad = fd::gradient(&psi, &x, 1e-4);
        let eta = eta_of_theta(model, th).expect("in range");
        grad_dev = grad_dev.max((fd_grad - eta.coords()).abs().max());

        let fd_hess = fd::hessian(&psi, &x, 1e-4);
        let g = fisher_metric(model, th).expect("in range");
        hess_dev = hess_dev.max((&fd_hess - &g).abs().max());

        let fd_third = fd::third_derivative(&psi, &x, 1e-3);
        let c = cubic_form(model, th).expect("in range");
        third_dev = third_dev.max(fd_third.max_abs_diff(&c));

        sym_psd_dev = sym_psd_dev.max((&g - &g.transpose()).abs().max());
        for ev in g.symmetric_eigenvalues().iter() {
            sym_psd_dev = sym_psd_dev.max(-ev);
        }

        let p = equilibrium_distribution(model, th).expect("in range");
        norm_dev = norm_dev.max((p.probabilities().sum() - 1.0).abs());
        if !p.is_strictly_positive() {
            norm_dev = norm_dev.max(1.0);
        }

        let n = model.num_observables();
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    let v = c.get(a, b, d);
                    for (x1, y1, z1) in [(a, d, b), (b, a, d), (b, d, a), (d, a, b), (d, b, a)] {
                        perm_dev = perm_dev.max((v - c.get(x1, y1, z1)).abs());
                    }
                }
            }
        }
    }

    // Midpoint convexity over deterministic pairs.
    let mut convex_dev = 0.0f64;
    let ising = make_ising();
    let grid = grid_1d();
    for (i, &a) in grid.iter().enumerate() {
        for &b in &grid[i + 1..] {
            let mid = psi_eq(&ising, &theta1(0.5 * (a + b))).expect("in range");
            let avg = 0.5
                * (psi_eq(&ising, &theta1(a)).expect("in range")
                    + psi_eq(&ising, &theta1(b)).expect("in range"));
            convex_dev = convex_dev.max(mid - avg);
        }
    }

    // Closed forms of the two-state spin model.
    let mut closed_dev = 0.0f64;
    for &t in &grid {
        let th = theta1(t);
        let sech2 = 1.0 / t.cosh().powi(2);
        closed_dev = closed_dev
            .max((psi_eq(&ising, &th).unwrap() - (2.0 * t.cosh()).ln()).abs())
            .max((eta_of_theta(&ising, &th).unwrap().get(0) - t.tanh()).abs())
            .max((fisher_metric(&ising, &th).unwrap()[(0, 0)] - sech2).abs())
            .max((cubic_form(&ising, &th).unwrap().get(0, 0, 0) + 2.0 * sech2 * t.tanh()).abs());
    }

    // Alpha-connection scaling.
    let mut alpha_dev = 0.0f64;
    for alpha in [-1.0, 0.0, 0.5, 1.0] {
        let c = cubic_form(&ising, &theta1(1.0)).unwrap();
        let conn = alpha_connection(&ising, &theta1(1.0), alpha).unwrap();
        alpha_dev = alpha_dev.max(conn.max_abs_diff(&c.scaled((1.0 - alpha) / 2.0)));
    }

    vec![
        CheckResult::new(module, "eta-gradient-fd", grad_dev, 1e-6),
        CheckResult::new(module, "fisher-hessian-fd", hess_dev, 1e-5),
        CheckResult::new(module, "cubic-third-derivative-fd", third_dev, 1e-4),
        CheckResult::new(module, "fisher-symmetry-psd", sym_psd_dev, 1e-12),
        CheckResult::new(module, "psi-midpoint-convexity", convex_dev, 1e-12),
        CheckResult::new(module, "equilibrium-distribution", norm_dev, 1e-12),
        CheckResult::new(module, "cubic-permutation-symmetry", perm_dev, 1e-12),
        CheckResult::new(module, "ising-closed-forms", closed_dev, 1e-10),
        CheckResult::new(module, "alpha-connection-scaling", alpha_dev, 1e-15),
    ]
}

// ---- legendre ------------------------------------------------------------

fn checks_legendre() -> Vec<CheckResult> {
    let module = "legendre";
    let points = theta_points();

    let mut round_dev = 0.0f64;
    let mut fy_eq_dev = 0.0f64;
    let mut inverse_dev = 0.0f64;
    let mut entropy_dev = 0.0f64;
    let mut pullback_dev = 0.0f64;
    for (model, th) in &points {
        let eta = eta_of_theta(model, th).expect("in range");
        let et = EtaPoint::new(model, eta.coords().iter().copied().collect())
            .expect("graph values are interior on this grid");

        let back = theta_of_eta(model, &et).expect("full-rank model");
        round_dev = round_dev.max((back.coords() - th.coords()).abs().max());

        let lhs = th.coords().dot(eta.coords());
        let rhs = psi_eq(model, th).unwrap() + phi_eq(model, &et).unwrap();
        fy_eq_dev = fy_eq_dev.max((lhs - rhs).abs());

        let g = fisher_metric(model, th).unwrap();
        let inv = hessian_phi(model, &et).unwrap();
        let product = &g * &inv;
        let identity = DMatrix::identity(g.nrows(), g.ncols());
        inverse_dev = inverse_dev.max((product - identity).abs().max());

        entropy_dev =
            entropy_dev.max((phi_eq(model, &et).unwrap() - h_eq(model, th).unwrap()).abs());

        let pulled = &g * inv * &g;
        pullback_dev = pullback_dev.max((pulled - g).abs().max());
    }

    // Fenchel-Young inequality at off-graph pairs.
    let ising = make_ising();
    let mut fy_ineq_dev = 0.0f64;
    for &t in &grid_1d() {
        let eta = eta_of_theta(&ising, &theta1(t)).unwrap();
        let et = EtaPoint::new(&ising, vec![eta.get(0)]).unwrap();
        let phi = phi_eq(&ising, &et).unwrap();
        for &other in &grid_1d() {
            let lower = other * eta.get(0) - psi_eq(&ising, &theta1(other)).unwrap();
            fy_ineq_dev = fy_ineq_dev.max(lower - phi);
        }
    }

    // Gradient of the dual potential against finite differences.
    let mut grad_phi_dev = 0.0f64;
    for k in 0..13 {
        let v = -0.9 + 1.8 * k as f64 / 12.0;
        let phi_fn = |x: &DVector<f64>| {
            phi_eq(&ising, &EtaPoint::from_vector(&ising, x.clone()).unwrap()).unwrap()
        };
        let numeric = fd::gradient(&phi_fn, &DVector::from_vec(vec![v]), 1e-4);
        let analytic = grad_phi(&ising, &EtaPoint::new(&ising, vec![v]).unwrap()).unwrap();
        grad_phi_dev = grad_phi_dev.max((numeric - analytic).abs().max());
    }

    vec![
        CheckResult::new(module, "round-trip", round_dev, 1e-9),
        CheckResult::new(module, "fenchel-young-equality", fy_eq_dev, 1e-9),
        CheckResult::new(module, "fenchel-young-inequality", fy_ineq_dev, 1e-9),
        CheckResult::new(module, "hessian-inverse-identity", inverse_dev, 1e-8),
        CheckResult::new(module, "phi-equals-equilibrium-entropy", entropy_dev, 1e-9),
        CheckResult::new(module, "grad-phi-fd", grad_phi_dev, 1e-6),
        CheckResult::new(module, "metric-pullback", pullback_dev, 1e-7),
    ]
}

// ---- master ----------------------------------------------------------------

/// Oracle-equivalence check with a pluggable one-step integrator, so a
/// broken integrator is provably caught (see the mutation test).
pub fn primary_oracle_check_with_stepper<F>(stepper: &F) -> CheckResult
where
    F: Fn(&dyn Fn(&DVector<f64>) -> DVector<f64>, &DVector<f64>, f64) -> DVector<f64>,
{
    let ising = make_ising();
    let th = theta1(1.0);
    let p_eq = equilibrium_distribution(&ising, &th).expect("in range");
    let p0 = Distribution::new(vec![1.0, 0.0]).expect("valid");
    let target = p_eq.probabilities().clone();
    let rhs = move |p: &DVector<f64>| &target - p;

    let dt = 1e-3;
    let mut worst = 0.0f64;
    let mut y = p0.probabilities().clone();
    for i in 1..=10_000 {
        y = stepper(&rhs, &y, dt);
        let t = i as f64 * dt;
        let reference = exact_solution(&p0, &p_eq, t).expect("t >= 0");
        worst = worst.max((&y - reference.probabilities()).abs().max());
    }
    CheckResult::new("master", "oracle-equivalence-primary", worst, 1e-8)
}

fn checks_master() -> Vec<CheckResult> {
    let module = "master";
    let ising = make_ising();
    let five = random_model(11);

    let primary = primary_oracle_check_with_stepper(&|f, y, dt| ode::rk4_step(&|v| f(v), y, dt));

    // Dual route plus the random five-state model, via the library integrator.
    let mut dual_dev = 0.0f64;
    let mut mass_dev = 0.0f64;
    let mut positivity_dev = 0.0f64;
    let mut kl_rise = 0.0f64;
    let mut rate_dev = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cases: Vec<(StateSpace, ThetaPoint, Distribution)> = vec![
        (
            ising.clone(),
            theta1(1.2),
            Distribution::new(vec![1.0, 0.0]).unwrap(),
        ),
        (
            five.clone(),
            theta2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            random_distribution(&mut rng, 5),
        ),
    ];
    for (model, th, p0) in &cases {
        let eta = eta_of_theta(model, th).unwrap();
        let et = EtaPoint::new(model, eta.coords().iter().copied().collect()).unwrap();
        let p_eq = equilibrium_distribution(model, th).unwrap();
        let traj = mastergeo::master::integrate_dual(model, &et, p0, 10.0, 1e-3).unwrap();

        let d0 = p0.max_abs_diff(&p_eq);
        let mut previous_kl = f64::INFINITY;
        for (t, p) in traj.times().iter().zip(traj.states()) {
            let reference = exact_solution(p0, &p_eq, *t).unwrap();
            dual_dev = dual_dev.max(p.max_abs_diff(&reference));
            mass_dev = mass_dev.max((p.probabilities().sum() - 1.0).abs());
            positivity_dev = positivity_dev.max(-p.probabilities().min());

            let kl = kl_divergence(p, &p_eq).unwrap();
            kl_rise = kl_rise.max(kl - previous_kl);
            previous_kl = kl;

            let expected = (-t).exp() * d0;
            if expected > 1e-12 {
                rate_dev = rate_dev.max((p.max_abs_diff(&p_eq) - expected).abs() / expected);
            }
        }
    }

    // Kernel reduction over 100 random distributions.
    let mut reduction_dev = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for i in 0..100 {
        let (model, th) = if i % 2 == 0 {
            (&ising, theta1(1.0))
        } else {
            (&five, theta2(0.4, -0.7))
        };
        let p = random_distribution(&mut rng, model.num_states());
        let kernel = solvable_kernel(model, &th).unwrap();
        let general = general_master_rhs(&kernel, &p).unwrap();
        let reduced = primary_rhs(model, &th, &p).unwrap();
        reduction_dev = reduction_dev.max((general - reduced).abs().max());
    }

    // Conservation of arbitrary kernels.
    let mut conservation_dev = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..20 {
        let raw: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let kernel = MarkovKernel::new(DMatrix::from_row_slice(4, 4, &raw)).unwrap();
        for _ in 0..10 {
            let p = random_distribution(&mut rng, 4);
            let rhs = general_master_rhs(&kernel, &p).unwrap();
            conservation_dev = conservation_dev.max(rhs.sum().abs());
        }
    }

    vec![
        primary,
        CheckResult::new(module, "oracle-equivalence-dual", dual_dev, 1e-8),
        CheckResult::new(module, "kernel-reduction", reduction_dev, 1e-12),
        CheckResult::new(module, "rhs-conservation", conservation_dev, 1e-12),
        CheckResult::new(module, "trajectory-mass-conservation", mass_dev, 1e-9),
        CheckResult::new(module, "kl-monotonicity", kl_rise, 1e-12),
        CheckResult::new(module, "trajectory-positivity", positivity_dev, 1e-9),
        CheckResult::new(module, "exponential-convergence", rate_dev, 1e-6),
    ]
}

// ---- moments ---------------------------------------------------------------

fn checks_moments() -> Vec<CheckResult> {
    let module = "moments";
    let ising = make_ising();
    let three = three_state();

    let mut exact_primary_dev = 0.0f64;
    for (model, s0) in [
        (
            &ising,
            PrimaryMomentState::new(vec![1.0], vec![-0.4], 0.2).unwrap(),
        ),
        (
            &three,
            PrimaryMomentState::new(vec![0.8], vec![0.9], -0.5).unwrap(),
        ),
    ] {
        let traj = integrate_primary_moments(model, &s0, 10.0, 1e-3).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let reference = primary_moment_exact(model, &s0, *t).unwrap();
            exact_primary_dev = exact_primary_dev.max(s.max_abs_diff(&reference));
        }
    }

    let mut exact_dual_dev = 0.0f64;
    let d0 = DualMomentState::new(&ising, vec![0.5], vec![-1.0], 0.5).unwrap();
    let traj = integrate_dual_moments(&ising, &d0, 10.0, 1e-3).unwrap();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let reference = dual_moment_exact(&ising, &d0, *t).unwrap();
        exact_dual_dev = exact_dual_dev.max(s.max_abs_diff(&reference));
    }

    let mut consistency_dev = 0.0f64;
    for (model, th, p0) in [
        (
            &ising,
            theta1(1.0),
            Distribution::new(vec![1.0, 0.0]).unwrap(),
        ),
        (
            &three,
            theta1(0.8),
            Distribution::new(vec![0.2, 0.5, 0.3]).unwrap(),
        ),
    ] {
        let report = consistency_check_primary(model, &th, &p0, 10.0, 1e-3).unwrap();
        consistency_dev = consistency_dev.max(report.max_error());
    }

    let eta = eta_of_theta(&ising, &theta1(1.2)).unwrap();
    let et = EtaPoint::new(&ising, vec![eta.get(0)]).unwrap();
    let p0 = Distribution::new(vec![0.9, 0.1]).unwrap();
    let dual_consistency = dual_entropy_consistency(&ising, &et, &p0, 10.0, 1e-3).unwrap();

    let mut fixed_dev = 0.0f64;
    for t in [-2.0, 0.0, 1.5] {
        let eq = PrimaryMomentState::equilibrium(&ising, &theta1(t)).unwrap();
        fixed_dev = fixed_dev.max(primary_moment_rhs(&ising, &eq).unwrap().max_abs());
    }
    let dual_eq = DualMomentState::equilibrium(&ising, &et).unwrap();
    fixed_dev = fixed_dev.max(dual_moment_rhs(&ising, &dual_eq).unwrap().max_abs());

    // Static coordinates must be carried bit-for-bit.
    let s0 = PrimaryMomentState::new(vec![0.3], vec![0.9], -1.0).unwrap();
    let traj = integrate_primary_moments(&ising, &s0, 1.0, 1e-2).unwrap();
    let mut frozen_dev = 0.0f64;
    for s in &traj.states {
        if s.theta() != s0.theta() {
            frozen_dev = 1.0;
        }
    }
    let dual_traj = integrate_dual_moments(&ising, &d0, 1.0, 1e-2).unwrap();
    for s in &dual_traj.states {
        if s.eta().coords() != d0.eta().coords() {
            frozen_dev = 1.0;
        }
    }

    vec![
        CheckResult::new(module, "primary-exact-vs-rk4", exact_primary_dev, 1e-8),
        CheckResult::new(module, "dual-exact-vs-rk4", exact_dual_dev, 1e-8),
        CheckResult::new(module, "primary-master-consistency", consistency_dev, 1e-7),
        CheckResult::new(module, "dual-entropy-consistency", dual_consistency, 1e-7),
        CheckResult::new(module, "fixed-point-characterization", fixed_dev, 1e-10),
        CheckResult::new(module, "static-coordinates-frozen", frozen_dev, 0.0),
    ]
}

// ---- contact ---------------------------------------------------------------

fn checks_contact() -> Vec<CheckResult> {
    let module = "contact";
    let model = make_ising();
    let w = Potential::theta_potential(&model);

    let mut analytic_dev = 0.0f64;
    let mut numeric_dev = 0.0f64;
    let analytic = RelaxationHamiltonian::new(Potential::theta_potential(&model));
    let m = model.clone();
    let numeric = NumericHamiltonian::new(1, move |pt: &ContactPoint| {
        psi_eq(&m, &ThetaPoint::from_vector(pt.x().clone()).unwrap()).unwrap() - pt.z()
    });
    for i in 0..100 {
        let x = -2.0 + 4.0 * i as f64 / 99.0;
        let y = ((i * 37) % 100) as f64 / 50.0 - 1.0;
        let z = ((i * 61) % 100) as f64 / 25.0 - 2.0;
        let pt = ContactPoint::new(vec![x], vec![y], z).unwrap();
        let direct = contact::relaxation_field(&w, &pt).unwrap();
        let general = contact::general_contact_field(&analytic, &pt).unwrap();
        analytic_dev = analytic_dev.max(general.max_abs_diff(&direct));
        let fd_field = contact::general_contact_field(&numeric, &pt).unwrap();
        numeric_dev = numeric_dev.max(fd_field.max_abs_diff(&direct));
    }

    // Fixed points of the flow on the Legendre submanifold.
    let mut invariance_dev = 0.0f64;
    for x in [-1.5, 0.0, 0.7] {
        let on = contact::legendre_submanifold_point(&w, &DVector::from_vec(vec![x])).unwrap();
        let moved = contact::flow_exact(&w, &on, 2.5).unwrap();
        invariance_dev = invariance_dev
            .max((moved.y() - on.y()).abs().max())
            .max((moved.z() - on.z()).abs());
    }

    // Distance components and the Hamiltonian decay at unit rate.
    let mut attractor_dev = 0.0f64;
    let mut decay_dev = 0.0f64;
    let start = ContactPoint::new(vec![-0.6], vec![0.9], -1.2).unwrap();
    let target = contact::legendre_submanifold_point(&w, start.x()).unwrap();
    let dy0 = (start.y() - target.y()).abs().max();
    let dz0 = (start.z() - target.z()).abs();
    let h0 = contact::hamiltonian_value(&w, &start).unwrap();
    for t in [0.5, 1.0, 2.0] {
        let at = contact::flow_exact(&w, &start, t).unwrap();
        let dy = (at.y() - target.y()).abs().max();
        let dz = (at.z() - target.z()).abs();
        attractor_dev = attractor_dev
            .max((dy - (-t).exp() * dy0).abs() / dy0)
            .max((dz - (-t).exp() * dz0).abs() / dz0);
        let ht = contact::hamiltonian_value(&w, &at).unwrap();
        decay_dev = decay_dev.max((ht - (-t).exp() * h0).abs() / h0.abs());
    }

    // The moment systems are this flow under a renaming of coordinates.
    let mut ident_primary = 0.0f64;
    let s = PrimaryMomentState::new(vec![1.1], vec![0.2], 0.4).unwrap();
    let pt = ContactPoint::new(vec![1.1], vec![0.2], 0.4).unwrap();
    let field = contact::relaxation_field(&w, &pt).unwrap();
    let tangent = primary_moment_rhs(&model, &s).unwrap();
    ident_primary = ident_primary
        .max((field.dy[0] - tangent.dmoments[0]).abs())
        .max((field.dz - tangent.dpsi).abs())
        .max(field.dx.abs().max())
        .max(tangent.dtheta.abs().max());

    let mut ident_dual = 0.0f64;
    let wd = Potential::eta_potential(&model).unwrap();
    let sd = DualMomentState::new(&model, vec![0.5], vec![-0.3], 0.1).unwrap();
    let pt_d = ContactPoint::new(vec![0.5], vec![-0.3], 0.1).unwrap();
    let field_d = contact::relaxation_field(&wd, &pt_d).unwrap();
    let tangent_d = dual_moment_rhs(&model, &sd).unwrap();
    ident_dual = ident_dual
        .max((field_d.dy[0] - tangent_d.dtheta_avg[0]).abs())
        .max((field_d.dz - tangent_d.dh).abs());

    // Quadrature length against |h|, over starts and times.
    let mut length_dev = 0.0f64;
    let starts = [
        ContactPoint::new(vec![1.0], vec![0.0], 0.0).unwrap(),
        ContactPoint::new(vec![0.7], vec![-0.3], 0.5).unwrap(),
        ContactPoint::new(vec![-0.6], vec![0.9], -1.2).unwrap(),
    ];
    for pt0 in &starts {
        for t in [0.0, 0.5, 1.0, 2.0] {
            let length = contact::curve_length(&w, pt0, t).unwrap();
            let at = contact::flow_exact(&w, pt0, t).unwrap();
            let h = contact::hamiltonian_value(&w, &at).unwrap();
            length_dev = length_dev.max((length - h.abs()).abs());
        }
    }

    // Fitted decay rate of the length along the flow.
    let times: Vec<f64> = (0..81).map(|k| k as f64 * 0.05).collect();
    let lengths: Vec<f64> = times
        .iter()
        .map(|&t| contact::curve_length(&w, &starts[0], t).unwrap())
        .collect();
    let slope = fit_log_slope(&times, &lengths).unwrap_or(f64::NAN);
    let rate_dev = (slope + 1.0).abs();

    // Contact condition: the volume coefficient is constant one.
    let mut wedge_dev = 0.0f64;
    for (x, y, z) in [(0.0, 0.0, 0.0), (1.0, -2.0, 3.0), (-0.4, 7.0, 0.1)] {
        let c = contact::wedge_volume_coefficient(&ContactPoint::new(vec![x], vec![y], z).unwrap())
            .unwrap();
        wedge_dev = wedge_dev.max((c.abs() - 1.0).abs());
    }

    // Stored gradients against finite differences, both potentials.
    let psi_samples: Vec<DVector<f64>> = [-2.0, -0.5, 0.0, 1.0, 2.5]
        .iter()
        .map(|&v| DVector::from_vec(vec![v]))
        .collect();
    let eta_samples: Vec<DVector<f64>> = [-0.8, -0.3, 0.2, 0.7]
        .iter()
        .map(|&v| DVector::from_vec(vec![v]))
        .collect();
    let grad_dev = w
        .validate_gradient(&psi_samples, 1e-6)
        .and_then(|a| Ok(a.max(wd.validate_gradient(&eta_samples, 1e-6)?)))
        .unwrap_or(1.0);

    // The contact form vanishes on tangents of the Legendre submanifold.
    let mut form_dev = 0.0f64;
    for x in [-1.0, 0.2, 1.4] {
        let base = contact::legendre_submanifold_point(&w, &DVector::from_vec(vec![x])).unwrap();
        let hess = fisher_metric(&model, &theta1(x)).unwrap()[(0, 0)];
        let v = ContactTangent {
            dx: DVector::from_vec(vec![1.0]),
            dy: DVector::from_vec(vec![hess]),
            dz: base.y()[0],
        };
        form_dev = form_dev.max(contact::contact_form_eval(&base, &v).unwrap().abs());
    }

    vec![
        CheckResult::new(module, "specialization-analytic", analytic_dev, 1e-10),
        CheckResult::new(
            module,
            "specialization-finite-difference",
            numeric_dev,
            1e-5,
        ),
        CheckResult::new(module, "submanifold-invariance", invariance_dev, 0.0),
        CheckResult::new(module, "attractor-decay", attractor_dev, 1e-9),
        CheckResult::new(module, "hamiltonian-decay", decay_dev, 1e-10),
        CheckResult::new(
            module,
            "moment-identification-primary",
            ident_primary,
            1e-12,
        ),
        CheckResult::new(module, "moment-identification-dual", ident_dual, 1e-9),
        CheckResult::new(module, "length-equals-hamiltonian", length_dev, 1e-8),
        CheckResult::new(module, "length-decay-rate", rate_dev, 1e-3),
        CheckResult::new(module, "contact-nondegeneracy", wedge_dev, 1e-12),
        CheckResult::new(module, "potential-gradient-fd", grad_dev, 1e-6),
        CheckResult::new(module, "form-vanishes-on-submanifold", form_dev, 1e-9),
    ]
}
