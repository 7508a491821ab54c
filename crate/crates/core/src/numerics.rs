//! Dense complex linear algebra and scalar root finding shared by every
//! other module.
//!
//! Everything operates on `nalgebra` dynamic matrices over `Complex64`.
//! All routines are pure functions of their inputs and are safe to call
//! concurrently.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector used throughout the crate.
pub type CVec = DVector<Complex64>;

/// Relative singular-value cutoff for the pseudo-inverse: singular values
/// below `PINV_RCOND * sigma_max` are treated as zero.
pub const PINV_RCOND: f64 = 1e-12;

/// Returns true when every entry of `m` is finite.
pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Moore-Penrose pseudo-inverse via a one-sided Jacobi SVD.
///
/// Singular values below `1e-12 * sigma_max` are treated as zero, which keeps
/// the routine well behaved on truncated (non-square) pattern matrices.
pub fn pseudo_inverse(a: &CMat) -> Result<CMat> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidArgument(
            "pseudo_inverse: matrix has a zero dimension".into(),
        ));
    }
    if a.nrows() < a.ncols() {
        // A^+ = ((A^H)^+)^H reduces the wide case to the tall one.
        return Ok(pseudo_inverse(&a.adjoint())?.adjoint());
    }
    let (u_scaled, v) = jacobi_orthogonalize(a);
    // Columns of u_scaled are u_i * sigma_i; assemble V diag(1/sigma) U^H.
    let sigmas: Vec<f64> = (0..u_scaled.ncols()).map(|j| u_scaled.column(j).norm()).collect();
    let sigma_max = sigmas.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = PINV_RCOND * sigma_max;
    let mut pinv = CMat::zeros(a.ncols(), a.nrows());
    for j in 0..u_scaled.ncols() {
        if sigmas[j] > cutoff && sigmas[j] > 0.0 {
            // pinv += (1/sigma^2) v_j (sigma u_j)^H
            let weight = 1.0 / (sigmas[j] * sigmas[j]);
            for r in 0..a.ncols() {
                let scale = v[(r, j)] * weight;
                for c in 0..a.nrows() {
                    pinv[(r, c)] += scale * u_scaled[(c, j)].conj();
                }
            }
        }
    }
    Ok(pinv)
}

/// One-sided Jacobi orthogonalization: returns `(A V, V)` with the columns
/// of `A V` pairwise orthogonal, so `A = (A V) V^H` is an SVD in disguise.
///
/// nalgebra's Golub-Kahan SVD mis-converges on some well-conditioned sign
/// matrices, so the pseudo-inverse is built on this instead.
fn jacobi_orthogonalize(a: &CMat) -> (CMat, CMat) {
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = CMat::identity(n, n);
    let frob2 = w.norm_squared().max(f64::MIN_POSITIVE);
    let tol = 1e-30 * frob2;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let col_p = w.column(p);
                let col_q = w.column(q);
                let alpha = col_p.norm_squared();
                let beta = col_q.norm_squared();
                let gamma = col_p.dotc(&col_q);
                let g = gamma.norm();
                if g * g <= 1e-30 * alpha * beta || g * g <= tol {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let tau = (beta - alpha) / (2.0 * g);
                let t = if tau.abs() < 1e-300 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // Columns (p, q) <- (c p - s e^{-j phi} q, s p + c e^{-j phi} q)
                let rot_q = phase.conj() * s;
                let rot_q2 = phase.conj() * c;
                for i in 0..w.nrows() {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = wp * c - wq * rot_q;
                    w[(i, q)] = wp * s + wq * rot_q2;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = vp * c - vq * rot_q;
                    v[(i, q)] = vp * s + vq * rot_q2;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

/// Solves `A x = b` for Hermitian positive definite `A` via Cholesky.
///
/// Fails with a numerical error naming the smallest eigenvalue when `A` is
/// not positive definite.
pub fn hermitian_solve(a: &CMat, b: &CVec) -> Result<CVec> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "hermitian_solve: matrix is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "hermitian_solve: matrix is {}x{} but rhs has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let n = a.nrows();
    // Lower-triangular Cholesky with an explicit positivity check on every
    // pivot. nalgebra's Cholesky takes complex square roots of negative
    // pivots instead of failing, so it cannot enforce this contract.
    let diag_scale = (0..n).map(|j| a[(j, j)].re).fold(0.0_f64, f64::max);
    let pivot_floor = 1e-12 * diag_scale;
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if pivot <= pivot_floor || !pivot.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "hermitian_solve: matrix is not positive definite (pivot {j} reduced to {pivot:.3e})"
            )));
        }
        let diag = pivot.sqrt();
        l[(j, j)] = Complex64::new(diag, 0.0);
        for i in (j + 1)..n {
            let mut val = a[(i, j)];
            for k in 0..j {
                val -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = val / diag;
        }
    }
    // Forward substitution L y = b, then back substitution L^H x = y.
    let mut x = b.clone();
    for i in 0..n {
        let mut val = x[i];
        for k in 0..i {
            val -= l[(i, k)] * x[k];
        }
        x[i] = val / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut val = x[i];
        for k in (i + 1)..n {
            val -= l[(k, i)].conj() * x[k];
        }
        x[i] = val / l[(i, i)];
    }
    Ok(x)
}

/// Finds `mu >= lo` with `|f(mu) - target| <= tol` for a continuous,
/// strictly decreasing `f`.
///
/// If the constraint is already slack at `lo` (`f(lo) <= target`), returns
/// `lo`. The upper bracket is found by doubling the offset from `lo + 1`;
/// failing to bracket after 200 doublings is an error.
pub fn bisection_root(f: impl Fn(f64) -> f64, target: f64, lo: f64, tol: f64) -> Result<f64> {
    if f(lo) <= target {
        return Ok(lo);
    }
    let mut offset = 1.0;
    let mut doublings = 0;
    while f(lo + offset) > target {
        offset *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::BracketFailure(format!(
                "target {target} not reached after 200 doublings from {lo}"
            )));
        }
    }
    let mut a = lo;
    let mut b = lo + offset;
    for _ in 0..20_000 {
        let mid = 0.5 * (a + b);
        let val = f(mid);
        if (val - target).abs() <= tol {
            return Ok(mid);
        }
        if val > target {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a) <= f64::EPSILON * b.abs().max(1.0) {
            // Interval exhausted at machine precision; f is continuous so the
            // midpoint is as close to the root as representable.
            return Ok(0.5 * (a + b));
        }
    }
    Ok(0.5 * (a + b))
}

/// Sylvester-construction Hadamard matrix of the given power-of-two order.
///
/// Entries are real +-1 and rows are pairwise orthogonal: `H * H^T = order * I`.
pub fn sylvester_hadamard(order: usize) -> Result<CMat> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "sylvester_hadamard: order {order} is not a power of two"
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    let mut h = CMat::from_element(1, 1, one);
    let mut size = 1;
    while size < order {
        let mut next = CMat::zeros(2 * size, 2 * size);
        for i in 0..size {
            for j in 0..size {
                let v = h[(i, j)];
                next[(i, j)] = v;
                next[(i, j + size)] = v;
                next[(i + size, j)] = v;
                next[(i + size, j + size)] = -v;
            }
        }
        h = next;
        size *= 2;
    }
    Ok(h)
}

/// DFT matrix with entry `(m, n) = exp(-j 2 pi m n / order)`.
///
/// Satisfies `V * V^H = order * I`.
pub fn dft_matrix(order: usize) -> Result<CMat> {
    if order == 0 {
        return Err(Error::InvalidArgument("dft_matrix: order must be >= 1".into()));
    }
    let step = -2.0 * std::f64::consts::PI / order as f64;
    Ok(CMat::from_fn(order, order, |m, n| {
        Complex64::from_polar(1.0, step * ((m * n) % order) as f64)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn rel_err(a: &CMat, b: &CMat) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn pinv_of_identity_is_identity() {
        let eye = CMat::identity(3, 3);
        let pinv = pseudo_inverse(&eye).unwrap();
        assert!(rel_err(&pinv, &eye) < 1e-12);
    }

    #[test]
    fn pinv_of_orthogonal_rows_is_scaled_adjoint() {
        // V with V V^H = 4 I, so V^+ = V^H / 4.
        let v = CMat::from_row_slice(
            2,
            4,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
            ],
        );
        let pinv = pseudo_inverse(&v).unwrap();
        let expected = v.adjoint() / Complex64::new(4.0, 0.0);
        assert!(rel_err(&pinv, &expected) < 1e-12);
    }

    fn check_moore_penrose(a: &CMat) {
        let p = pseudo_inverse(a).unwrap();
        let scale = a.norm().max(1.0);
        assert!((a * &p * a - a).norm() / scale < 1e-10);
        assert!((&p * a * &p - &p).norm() / p.norm().max(1.0) < 1e-10);
        let ap = a * &p;
        assert!((ap.adjoint() - &ap).norm() / ap.norm().max(1.0) < 1e-10);
        let pa = &p * a;
        assert!((pa.adjoint() - &pa).norm() / pa.norm().max(1.0) < 1e-10);
    }

    #[test]
    fn pinv_satisfies_moore_penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        check_moore_penrose(&random_cmat(&mut rng, 3, 5));
        check_moore_penrose(&random_cmat(&mut rng, 5, 3));
        check_moore_penrose(&random_cmat(&mut rng, 4, 4));
    }

    #[test]
    fn pinv_rejects_empty() {
        assert!(matches!(
            pseudo_inverse(&CMat::zeros(0, 3)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn hermitian_solve_scaled_identity() {
        let a = CMat::identity(2, 2) * Complex64::new(2.0, 0.0);
        let b = CVec::from_vec(vec![Complex64::new(2.0, 0.0), Complex64::new(4.0, 0.0)]);
        let x = hermitian_solve(&a, &b).unwrap();
        assert!((x[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((x[1] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn hermitian_solve_identity_returns_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = CMat::identity(4, 4);
        let b = random_cmat(&mut rng, 4, 1).column(0).into_owned();
        let x = hermitian_solve(&a, &b).unwrap();
        assert!((x - b).norm() < 1e-12);
    }

    #[test]
    fn hermitian_solve_random_pd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let g = random_cmat(&mut rng, 5, 5);
            let a = &g * g.adjoint() + CMat::identity(5, 5) * Complex64::new(0.1, 0.0);
            let b = random_cmat(&mut rng, 5, 1).column(0).into_owned();
            let x = hermitian_solve(&a, &b).unwrap();
            assert!((&a * &x - &b).norm() / b.norm() < 1e-10);
        }
    }

    #[test]
    fn hermitian_solve_rejects_indefinite() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-3.0, 0.0),
        ]));
        let b = CVec::from_element(2, Complex64::new(1.0, 0.0));
        match hermitian_solve(&a, &b) {
            Err(Error::NumericalFailure(msg)) => {
                assert!(msg.contains("pivot 1"), "msg: {msg}");
                assert!(msg.contains("-3"), "msg: {msg}");
            }
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }

    #[test]
    fn bisection_finds_closed_form_root() {
        let mu = bisection_root(|m| 1.0 / (1.0 + m), 0.5, 0.0, 1e-10).unwrap();
        assert!((mu - 1.0).abs() < 1e-6);
        let mu = bisection_root(|m| 10.0 / (1.0 + m).powi(2), 2.5, 0.0, 1e-10).unwrap();
        assert!((mu - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bisection_returns_lo_when_slack() {
        let mu = bisection_root(|m| 1.0 / (1.0 + m), 2.0, 0.0, 1e-10).unwrap();
        assert_eq!(mu, 0.0);
    }

    #[test]
    fn bisection_reports_bracket_failure() {
        // f decreases toward 2, which stays strictly above the target.
        let res = bisection_root(|m| 2.0 + 1.0 / (1.0 + m), 1.0, 0.0, 1e-12);
        assert!(matches!(res, Err(Error::BracketFailure(_))));
    }

    #[test]
    fn hadamard_base_cases() {
        let h1 = sylvester_hadamard(1).unwrap();
        assert_eq!(h1[(0, 0)], Complex64::new(1.0, 0.0));
        let h2 = sylvester_hadamard(2).unwrap();
        assert_eq!(h2[(1, 1)], Complex64::new(-1.0, 0.0));
        assert_eq!(h2[(0, 1)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn hadamard_rows_orthogonal() {
        for k in [2usize, 4, 8, 16] {
            let h = sylvester_hadamard(k).unwrap();
            let gram = &h * h.transpose();
            let expected = CMat::identity(k, k) * Complex64::new(k as f64, 0.0);
            assert!(rel_err(&gram, &expected) < 1e-12, "order {k}");
        }
    }

    #[test]
    fn hadamard_rejects_non_power_of_two() {
        assert!(matches!(
            sylvester_hadamard(3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn dft_base_cases_and_gram() {
        let d1 = dft_matrix(1).unwrap();
        assert_eq!(d1[(0, 0)], Complex64::new(1.0, 0.0));
        let d2 = dft_matrix(2).unwrap();
        assert!((d2[(1, 1)] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        let d4 = dft_matrix(4).unwrap();
        let gram = &d4 * d4.adjoint();
        let expected = CMat::identity(4, 4) * Complex64::new(4.0, 0.0);
        assert!(rel_err(&gram, &expected) < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn pinv_moore_penrose_any_aspect(rows in 1usize..7, cols in 1usize..7, seed in 0u64..1000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                check_moore_penrose(&random_cmat(&mut rng, rows, cols));
            }

            #[test]
            fn solve_then_multiply_roundtrips(dim in 1usize..7, seed in 0u64..1000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = random_cmat(&mut rng, dim, dim);
                let a = &g * g.adjoint() + CMat::identity(dim, dim) * Complex64::new(0.5, 0.0);
                let x_true = random_cmat(&mut rng, dim, 1).column(0).into_owned();
                let b = &a * &x_true;
                let x = hermitian_solve(&a, &b).unwrap();
                prop_assert!((&x - &x_true).norm() / x_true.norm() < 1e-9);
            }
        }
    }
}
