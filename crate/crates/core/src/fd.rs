//! Central finite differences, used as gradient fallbacks and as the
//! independent side of derivative cross-checks.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::exp_family::CubicTensor;

pub fn gradient<F>(f: &F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    DVector::from_fn(x.len(), |a, _| {
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[a] += h;
        lo[a] -= h;
        (f(&hi) - f(&lo)) / (2.0 * h)
    })
}

/// Fallible variant for integrands that can leave their domain.
pub fn try_gradient<F>(f: &F, x: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let mut grad = DVector::zeros(x.len());
    for a in 0..x.len() {
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[a] += h;
        lo[a] -= h;
        grad[a] = (f(&hi)? - f(&lo)?) / (2.0 * h);
    }
    Ok(grad)
}

pub fn hessian<F>(f: &F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = if a == b {
                let mut hi = x.clone();
                let mut lo = x.clone();
                hi[a] += h;
                lo[a] -= h;
                (f(&hi) - 2.0 * f(x) + f(&lo)) / (h * h)
            } else {
                let mut pp = x.clone();
                let mut pm = x.clone();
                let mut mp = x.clone();
                let mut mm = x.clone();
                pp[a] += h;
                pp[b] += h;
                pm[a] += h;
                pm[b] -= h;
                mp[a] -= h;
                mp[b] += h;
                mm[a] -= h;
                mm[b] -= h;
                (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h)
            };
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    out
}

/// Third derivatives by differencing the finite-difference Hessian.
pub fn third_derivative<F>(f: &F, x: &DVector<f64>, h: f64) -> CubicTensor
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x.len();
    let mut out = CubicTensor::zeros(n);
    // Not symmetrized: the asymmetry of the raw stencil is itself part of
    // what a cross-check against an analytically symmetric tensor measures.
    for a in 0..n {
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[a] += h;
        lo[a] -= h;
        let h_hi = hessian(f, &hi, h);
        let h_lo = hessian(f, &lo, h);
        for b in 0..n {
            for c in 0..n {
                out.set_raw(a, b, c, (h_hi[(b, c)] - h_lo[(b, c)]) / (2.0 * h));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_derivatives_are_recovered() {
        let f = |x: &DVector<f64>| x[0] * x[0] + 3.0 * x[0] * x[1] + x[1].powi(3);
        let x = DVector::from_vec(vec![0.7, -0.4]);
        let g = gradient(&f, &x, 1e-5);
        assert!((g[0] - (2.0 * 0.7 + 3.0 * -0.4)).abs() < 1e-8);
        assert!((g[1] - (3.0 * 0.7 + 3.0 * 0.16)).abs() < 1e-8);
        let h = hessian(&f, &x, 1e-4);
        assert!((h[(0, 0)] - 2.0).abs() < 1e-6);
        assert!((h[(0, 1)] - 3.0).abs() < 1e-6);
        assert!((h[(1, 1)] - 6.0 * -0.4).abs() < 1e-5);
        let t = third_derivative(&f, &x, 1e-3);
        assert!((t.get(1, 1, 1) - 6.0).abs() < 1e-4);
        assert!(t.get(0, 0, 0).abs() < 1e-4);
    }
}
