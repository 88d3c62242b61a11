//! Moment-polytope membership.
//!
//! An expectation vector is admissible when it is a *strictly* positive
//! convex combination of the observable columns. The test below poses that
//! as a small linear program (maximize the least barycentric weight) and
//! solves it with a dense two-phase simplex. Bland's rule keeps the pivot
//! sequence finite on degenerate data.

use nalgebra::{DMatrix, DVector};

const PIVOT_EPS: f64 = 1e-10;
const FEAS_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 10_000;

/// True when `eta` can be written as `sum_j w_j O(j)` with `sum_j w_j = 1`
/// and every `w_j > tol`.
pub(crate) fn strictly_interior(observables: &DMatrix<f64>, eta: &DVector<f64>, tol: f64) -> bool {
    let states = observables.ncols();
    let n = observables.nrows();
    debug_assert_eq!(eta.len(), n);

    // Variables: barycentric slack v_j = w_j - eps (j < states), then eps.
    // Rows: normalization, then one moment constraint per observable.
    let cols = states + 1;
    let mut a = DMatrix::zeros(n + 1, cols);
    let mut b = DVector::zeros(n + 1);
    for j in 0..states {
        a[(0, j)] = 1.0;
    }
    a[(0, states)] = states as f64;
    b[0] = 1.0;
    for row in 0..n {
        let mut total = 0.0;
        for j in 0..states {
            a[(row + 1, j)] = observables[(row, j)];
            total += observables[(row, j)];
        }
        a[(row + 1, states)] = total;
        b[row + 1] = eta[row];
    }
    let mut c = DVector::zeros(cols);
    c[states] = 1.0;

    match simplex_max(&a, &b, &c) {
        Some((margin, _)) => margin > tol,
        None => false,
    }
}

/// Maximize `c . x` subject to `a x = b`, `x >= 0`.
///
/// Dense two-phase simplex with Bland's rule. Returns `None` when the
/// constraints are infeasible (or, defensively, on an unbounded ray or a
/// pivot-budget overrun, neither of which occurs for bounded feasibility
/// problems like the one above).
fn simplex_max(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> Option<(f64, DVector<f64>)> {
    let m = a.nrows();
    let n = a.ncols();
    let width = n + m + 1; // original vars, artificials, rhs

    // Tableau [A | I | b] with b >= 0.
    let mut t = vec![vec![0.0f64; width]; m];
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = flip * a[(i, j)];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = flip * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Phase 1: drive the artificial variables to zero.
    let mut obj = vec![0.0f64; width];
    for row in &t {
        for j in 0..width {
            obj[j] += row[j];
        }
    }
    for slot in obj[n..n + m].iter_mut() {
        *slot = 0.0;
    }
    if !run_pivots(&mut t, &mut basis, &mut obj, n) {
        return None;
    }
    if obj[width - 1] > FEAS_EPS {
        return None;
    }

    // Pivot leftover zero-level artificials out of the basis; a row that
    // offers no pivot is redundant and is dropped.
    let mut i = 0;
    while i < t.len() {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > PIVOT_EPS) {
                pivot(&mut t, &mut basis, &mut obj, i, j);
                i += 1;
            } else {
                t.swap_remove(i);
                basis.swap_remove(i);
            }
        } else {
            i += 1;
        }
    }

    // Phase 2 on the real objective.
    let mut obj = vec![0.0f64; width];
    for j in 0..n {
        obj[j] = c[j];
    }
    for (i, &bj) in basis.iter().enumerate() {
        let factor = obj[bj];
        if factor != 0.0 {
            for j in 0..width {
                obj[j] -= factor * t[i][j];
            }
        }
    }
    if !run_pivots(&mut t, &mut basis, &mut obj, n) {
        return None;
    }

    let mut x = DVector::zeros(n);
    for (i, &bj) in basis.iter().enumerate() {
        if bj < n {
            x[bj] = t[i][width - 1];
        }
    }
    Some((c.dot(&x), x))
}

/// Bland-rule pivot loop over the original (non-artificial) columns.
/// Returns `false` on an unbounded ray or pivot-budget overrun.
fn run_pivots(t: &mut [Vec<f64>], basis: &mut [usize], obj: &mut [f64], n: usize) -> bool {
    let width = obj.len();
    for _ in 0..MAX_PIVOTS {
        let Some(entering) = (0..n).find(|&j| obj[j] > PIVOT_EPS) else {
            return true;
        };
        let mut leaving: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..t.len() {
            let coef = t[i][entering];
            if coef > PIVOT_EPS {
                let ratio = t[i][width - 1] / coef;
                match leaving {
                    None => {
                        best = ratio;
                        leaving = Some(i);
                    }
                    Some(cur) => {
                        let slack = PIVOT_EPS * best.abs().max(1.0);
                        if ratio < best - slack {
                            best = ratio;
                            leaving = Some(i);
                        } else if ratio <= best + slack && basis[i] < basis[cur] {
                            best = best.min(ratio);
                            leaving = Some(i);
                        }
                    }
                }
            }
        }
        let Some(row) = leaving else {
            return false;
        };
        pivot(t, basis, obj, row, entering);
    }
    false
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], obj: &mut [f64], row: usize, col: usize) {
    let width = obj.len();
    let inv = 1.0 / t[row][col];
    for entry in t[row].iter_mut() {
        *entry *= inv;
    }
    t[row][col] = 1.0;
    let (before, rest) = t.split_at_mut(row);
    let (pivot_row, after) = rest.split_first_mut().expect("row index in range");
    for other in before.iter_mut().chain(after.iter_mut()) {
        let factor = other[col];
        if factor.abs() > 0.0 {
            for (lhs, rhs) in other.iter_mut().zip(pivot_row.iter()) {
                *lhs -= factor * rhs;
            }
            other[col] = 0.0;
        }
    }
    let factor = obj[col];
    if factor != 0.0 {
        for j in 0..width {
            obj[j] -= factor * t[row][j];
        }
        obj[col] = 0.0;
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        let (m, n) = (rows.len(), rows[0].len());
        DMatrix::from_fn(m, n, |i, j| rows[i][j])
    }

    #[test]
    fn maximizes_a_coordinate_on_the_segment() {
        // max x2 with x1 + x2 = 1.
        let a = mat(&[&[1.0, 1.0]]);
        let b = DVector::from_vec(vec![1.0]);
        let c = DVector::from_vec(vec![0.0, 1.0]);
        let (obj, x) = simplex_max(&a, &b, &c).unwrap();
        assert!((obj - 1.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_system() {
        // x1 = 1 and x1 = 2 cannot both hold.
        let a = mat(&[&[1.0], &[1.0]]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let c = DVector::from_vec(vec![1.0]);
        assert!(simplex_max(&a, &b, &c).is_none());
    }

    #[test]
    fn tolerates_redundant_rows() {
        let a = mat(&[&[1.0, 1.0], &[2.0, 2.0]]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let c = DVector::from_vec(vec![1.0, 0.0]);
        let (obj, _) = simplex_max(&a, &b, &c).unwrap();
        assert!((obj - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spin_interval_membership() {
        let o = mat(&[&[1.0, -1.0]]);
        assert!(strictly_interior(&o, &DVector::from_vec(vec![0.0]), 1e-9));
        assert!(strictly_interior(&o, &DVector::from_vec(vec![0.964]), 1e-9));
        assert!(!strictly_interior(&o, &DVector::from_vec(vec![1.0]), 1e-9));
        assert!(!strictly_interior(&o, &DVector::from_vec(vec![1.1]), 1e-9));
        assert!(!strictly_interior(
            &o,
            &DVector::from_vec(vec![-1.0000001]),
            1e-9
        ));
    }

    #[test]
    fn midpoint_margin_is_half() {
        // With two states the least weight at eta = 0 is exactly 1/2.
        let o = mat(&[&[1.0, -1.0]]);
        let a = {
            let mut a = DMatrix::zeros(2, 3);
            a[(0, 0)] = 1.0;
            a[(0, 1)] = 1.0;
            a[(0, 2)] = 2.0;
            a[(1, 0)] = 1.0;
            a[(1, 1)] = -1.0;
            a[(1, 2)] = 0.0;
            a
        };
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let c = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let (margin, _) = simplex_max(&a, &b, &c).unwrap();
        assert!((margin - 0.5).abs() < 1e-12);
        assert!(strictly_interior(&o, &DVector::from_vec(vec![0.0]), 0.499));
        assert!(!strictly_interior(&o, &DVector::from_vec(vec![0.0]), 0.501));
    }

    #[test]
    fn degenerate_observable_rows_still_resolve() {
        // Duplicated observable row: consistent eta accepted, inconsistent
        // eta rejected.
        let o = mat(&[&[1.0, -1.0], &[1.0, -1.0]]);
        assert!(strictly_interior(
            &o,
            &DVector::from_vec(vec![0.2, 0.2]),
            1e-9
        ));
        assert!(!strictly_interior(
            &o,
            &DVector::from_vec(vec![0.2, 0.3]),
            1e-9
        ));
    }
}
