//! Dense spectral reference for small graphs.
//!
//! Everything here works from a full eigendecomposition `L = U diag(lambda) U^T`
//! and is only meant for graphs up to [`DENSE_LIMIT`] nodes. The fast filters in
//! [`crate::filters`] are checked against it.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::graph::{dot, GraphSignal, LinearOperator, NormalizedLaplacian, DENSE_LIMIT};

/// Convergence tolerance handed to the symmetric QR sweeps.
const EIG_EPS: f64 = 1e-15;
const EIG_MAX_SWEEPS: usize = 10_000;

/// A probe component smaller than this fraction of `|b|` is reported invalid.
pub const RESPONSE_VALID_TOL: f64 = 1e-9;

/// Relative residual targeted by [`gbjbf_exact`].
pub const GBJBF_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Column `i` pairs with `eigenvalues[i]`; first nonzero entry of each column is positive.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Coefficients `U^T b`.
    pub fn analyze(&self, b: &[f64]) -> Result<DVector<f64>> {
        check_len("signal", self.dim(), b.len())?;
        Ok(self.eigenvectors.tr_mul(&DVector::from_column_slice(b)))
    }

    /// `U c`.
    pub fn synthesize(&self, coeffs: &DVector<f64>) -> GraphSignal {
        GraphSignal::new((&self.eigenvectors * coeffs).as_slice().to_vec())
    }
}

/// Symmetric eigendecomposition by Householder tridiagonalization and implicit
/// shifted QR sweeps, sorted ascending with a fixed eigenvector sign.
pub fn dense_eig(l: &NormalizedLaplacian) -> Result<EigenDecomposition> {
    if l.n() > DENSE_LIMIT {
        return Err(Error::DenseLimit {
            n: l.n(),
            limit: DENSE_LIMIT,
        });
    }
    let m = l.to_dense()?;
    let eig = SymmetricEigen::try_new(m, EIG_EPS, EIG_MAX_SWEEPS).ok_or(Error::NoConvergence {
        max_iter: EIG_MAX_SWEEPS,
    })?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        if let Some(first) = col.iter().find(|v| **v != 0.0) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `U h(Lambda) U^T b`.
pub fn exact_filter(eig: &EigenDecomposition, h: impl Fn(f64) -> f64, b: &[f64]) -> Result<GraphSignal> {
    let mut c = eig.analyze(b)?;
    for (ci, &lam) in c.iter_mut().zip(eig.eigenvalues.iter()) {
        *ci *= h(lam);
    }
    Ok(eig.synthesize(&c))
}

/// Graph-regularized least squares, `(I + rho L^2) x = b`.
///
/// The operator is symmetric positive definite with spectrum in `[1, 1 + 4 rho]`,
/// so unpreconditioned conjugate gradients reach the residual target in a few
/// dozen iterations at any graph size. `rho = 0` returns `b` unchanged.
pub fn gbjbf_exact(l: &NormalizedLaplacian, rho: f64, b: &[f64]) -> Result<GraphSignal> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must be finite and >= 0, got {rho}"
        )));
    }
    check_len("signal", l.n(), b.len())?;
    if rho == 0.0 {
        return Ok(GraphSignal::new(b.to_vec()));
    }
    let op = RegularizedOperator { l, rho };
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(GraphSignal::zeros(b.len()));
    }
    let n = b.len();
    let mut x = b.to_vec();
    let mut r: Vec<f64> = {
        let ax = op.apply_vec(&x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    };
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let target = GBJBF_RESIDUAL_TOL * bnorm;
    // Condition number is at most 1 + 4 rho; this cap is never reached in practice.
    let max_iter = 10 * n + 100;
    for _ in 0..max_iter {
        if rr.sqrt() <= target {
            break;
        }
        op.apply_into(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    // Recompute the true residual so recurrence drift cannot hide a miss.
    let ax = op.apply_vec(&x);
    let res = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt();
    if res > target * 10.0 {
        return Err(Error::NoConvergence { max_iter });
    }
    Ok(GraphSignal::new(x))
}

/// Dense route for the same solve: `exact_filter` with `1 / (1 + rho lambda^2)`.
pub fn gbjbf_dense(eig: &EigenDecomposition, rho: f64, b: &[f64]) -> Result<GraphSignal> {
    exact_filter(eig, |lam| 1.0 / (1.0 + rho * lam * lam), b)
}

struct RegularizedOperator<'a> {
    l: &'a NormalizedLaplacian,
    rho: f64,
}

impl LinearOperator for RegularizedOperator<'_> {
    fn dim(&self) -> usize {
        self.l.n()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let lx = self.l.apply_vec(x);
        self.l.apply_into(&lx, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi + self.rho * *yi;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseSample {
    pub lambda: f64,
    pub h: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResponse {
    pub samples: Vec<ResponseSample>,
}

impl SpectralResponse {
    pub fn valid(&self) -> impl Iterator<Item = &ResponseSample> {
        self.samples.iter().filter(|s| s.valid)
    }

    /// `lambda,h,valid` CSV; invalid rows leave `h` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,h,valid\n");
        for s in &self.samples {
            if s.valid {
                let _ = writeln!(out, "{:.16e},{:.16e},1", s.lambda, s.h);
            } else {
                let _ = writeln!(out, "{:.16e},,0", s.lambda);
            }
        }
        out
    }
}

/// Empirical per-eigenvector gain of `filter` on the probe `b`:
/// `h_i = <u_i, filter(b)> / <u_i, b>`.
///
/// Linear filters give their transfer function. Input-dependent filters such as
/// k-step conjugate gradients give the effective response for this particular `b`.
pub fn measure_response(
    filter: impl FnOnce(&[f64]) -> Result<GraphSignal>,
    eig: &EigenDecomposition,
    b: &[f64],
) -> Result<SpectralResponse> {
    check_len("signal", eig.dim(), b.len())?;
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let out = filter(b)?;
    check_len("filter output", eig.dim(), out.len())?;
    let cb = eig.analyze(b)?;
    let co = eig.analyze(&out)?;
    let floor = RESPONSE_VALID_TOL * bnorm;
    let samples = eig
        .eigenvalues
        .iter()
        .zip(cb.iter().zip(co.iter()))
        .map(|(&lambda, (&in_c, &out_c))| {
            if in_c.abs() < floor {
                ResponseSample {
                    lambda,
                    h: f64::NAN,
                    valid: false,
                }
            } else {
                ResponseSample {
                    lambda,
                    h: out_c / in_c,
                    valid: true,
                }
            }
        })
        .collect();
    Ok(SpectralResponse { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PixelGraph;
    use approx::assert_abs_diff_eq;

    fn lap(n: usize, edges: &[(usize, usize, f64)]) -> NormalizedLaplacian {
        NormalizedLaplacian::from_graph(&PixelGraph::from_edges(n, edges.iter().copied()).unwrap())
    }

    #[test]
    fn eigenvalues_of_small_graphs() {
        let e = dense_eig(&lap(2, &[(0, 1, 1.0)])).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], 2.0, epsilon = 1e-14);

        let e = dense_eig(&lap(1, &[])).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[0.0]);

        let e = dense_eig(&lap(3, &[(0, 1, 1.0), (1, 2, 1.0)])).unwrap();
        for (got, want) in e.eigenvalues.iter().zip([0.0, 1.0, 2.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-13);
        }
    }

    #[test]
    fn eigenvector_sign_convention() {
        let e = dense_eig(&lap(3, &[(0, 1, 0.3), (1, 2, 0.9)])).unwrap();
        for col in e.eigenvectors.column_iter() {
            let first = col.iter().find(|v| **v != 0.0).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn exact_filter_hand_values() {
        let e = dense_eig(&lap(2, &[(0, 1, 1.0)])).unwrap();
        let b = [1.0, 0.0];
        let id = exact_filter(&e, |_| 1.0, &b).unwrap();
        assert_abs_diff_eq!(id[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id[1], 0.0, epsilon = 1e-12);
        let lb = exact_filter(&e, |x| x, &b).unwrap();
        assert_abs_diff_eq!(lb[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lb[1], -1.0, epsilon = 1e-12);
        let jbf = exact_filter(&e, |x| 1.0 - x, &b).unwrap();
        assert_abs_diff_eq!(jbf[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(jbf[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gbjbf_two_node() {
        let l = lap(2, &[(0, 1, 1.0)]);
        let x = gbjbf_exact(&l, 2.0, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(x[0], 5.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 4.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn gbjbf_rho_zero_is_identity() {
        let l = lap(3, &[(0, 1, 1.0), (1, 2, 0.5)]);
        let b = [0.1, -3.0, 1e-300];
        assert_eq!(&*gbjbf_exact(&l, 0.0, &b).unwrap(), &b);
        assert!(gbjbf_exact(&l, -1.0, &b).is_err());
    }

    #[test]
    fn gbjbf_keeps_null_vector() {
        let g = PixelGraph::from_edges(4, [(0, 1, 0.7), (1, 2, 0.2), (2, 3, 1.0), (0, 3, 0.4)]).unwrap();
        let l = NormalizedLaplacian::from_graph(&g);
        let v = g.sqrt_degrees();
        let x = gbjbf_exact(&l, 2.0, &v).unwrap();
        for (a, b) in x.iter().zip(v.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn response_rejects_zero_probe() {
        let l = lap(2, &[(0, 1, 1.0)]);
        let e = dense_eig(&l).unwrap();
        let r = measure_response(|b| Ok(GraphSignal::new(b.to_vec())), &e, &[0.0, 0.0]);
        assert!(matches!(r, Err(Error::ZeroSignal)));
    }

    #[test]
    fn response_flags_missing_components() {
        // [1, 1] has no component on the lambda = 2 eigenvector.
        let l = lap(2, &[(0, 1, 1.0)]);
        let e = dense_eig(&l).unwrap();
        let r = measure_response(|b| Ok(GraphSignal::new(b.to_vec())), &e, &[1.0, 1.0]).unwrap();
        assert!(r.samples[0].valid);
        assert_abs_diff_eq!(r.samples[0].h, 1.0, epsilon = 1e-12);
        assert!(!r.samples[1].valid);
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "lambda,h,valid");
        assert!(lines[2].ends_with(",,0"));
        assert_eq!(lines[1].split(',').count(), 3);
    }
}
