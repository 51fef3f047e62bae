//! Eigen-analysis of a politics matrix.
//!
//! The full spectrum comes from a real Schur decomposition. Eigenvectors are
//! only needed for the `q` main eigenvalues, which must be real and simple;
//! they are obtained by shifted inverse iteration on `A` and `A^T`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, argmax_abs, max_abs, ones};
use crate::model::PoliticsMatrix;

/// Imaginary parts above this make a main eigenvalue complex.
pub const IMAG_TOL: f64 = 1e-6;
/// Main eigenvalues closer than this are treated as multiple.
pub const SIMPLE_GAP: f64 = 1e-9;
/// Residual gate on `AV - VΛ` and `U*A - ΛU*`.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Upper end of the window searched by [`QMethod::Gap`].
pub const GAP_WINDOW: usize = 25;
/// Distance threshold used by the gap rule when the spectrum is too short to scan (n <= 2).
pub const SHORT_SPECTRUM_THRESHOLD: f64 = 0.5;

const SCHUR_MAX_ITER: usize = 100_000;
const INVERSE_SHIFT: f64 = 1e-10;
const INVERSE_MAX_ITER: usize = 12;

/// How to pick the number of main eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QMethod {
    Fixed(usize),
    /// Largest ratio `d_{k+1} / d_k` of consecutive distances to 1.
    Gap,
    /// Count of eigenvalues with `|1 - λ| < θ`.
    Threshold(f64),
}

/// The `q` main eigenpairs, normalized so that `diag(V^T V) = I`,
/// `v_1 = η/√n` and `U* V = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Sorted by `|1 - λ|` ascending; `lambda[0]` is the trivial eigenvalue 1.
    pub lambda: Vec<f64>,
    pub v: DMatrix<f64>,
    pub u_star: DMatrix<f64>,
    pub omega_star: DVector<f64>,
}

impl EigenSystem {
    pub fn q(&self) -> usize {
        self.lambda.len()
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    /// `max |AV - VΛ|` and `max |U*A - ΛU*|`.
    pub fn residuals(&self, a: &DMatrix<f64>) -> (f64, f64) {
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(&self.lambda));
        let right = a * &self.v - &self.v * &lam;
        let left = &self.u_star * a - &lam * &self.u_star;
        (max_abs(right.iter()), max_abs(left.iter()))
    }
}

fn distance_to_one(z: &Complex64) -> f64 {
    (Complex64::new(1.0, 0.0) - z).norm()
}

/// All eigenvalues, sorted by `|1 - λ|` ascending (ties: larger real part,
/// then larger imaginary part first).
pub fn full_spectrum(a: &PoliticsMatrix) -> Result<Vec<Complex64>> {
    spectrum_of(a.matrix())
}

pub(crate) fn spectrum_of(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| {
            Error::Numeric(format!(
                "real Schur iteration did not converge for n={n} within {SCHUR_MAX_ITER} iterations"
            ))
        })?;
    let mut eigs: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    eigs.sort_by(|x, y| {
        distance_to_one(x)
            .total_cmp(&distance_to_one(y))
            .then(y.re.total_cmp(&x.re))
            .then(y.im.total_cmp(&x.im))
    });
    Ok(eigs)
}

fn check_window(eigs: &[Complex64], q: usize) -> Result<()> {
    if let Some(z) = eigs.iter().take(q).find(|z| z.im.abs() > IMAG_TOL) {
        return Err(Error::ComplexMainEigenvalue { re: z.re, im: z.im });
    }
    Ok(())
}

/// Number of main eigenvalues for a spectrum sorted by [`full_spectrum`].
pub fn detect_q(eigs: &[Complex64], method: QMethod) -> Result<usize> {
    let n = eigs.len();
    if n == 0 {
        return Err(Error::Shape("empty spectrum".into()));
    }
    let d: Vec<f64> = eigs.iter().map(distance_to_one).collect();
    let q = match method {
        QMethod::Fixed(k) => {
            if k == 0 || k > n {
                return Err(Error::Parameter(format!("fixed q={k} outside 1..={n}")));
            }
            k
        }
        QMethod::Threshold(theta) => d.iter().filter(|&&x| x < theta).count().max(1),
        QMethod::Gap => {
            // 1-based k with ratio d_{k+1} / d_k; k=1 is excluded because d_1 ~ 0.
            let hi = (n - 1).min(GAP_WINDOW);
            if hi < 2 {
                return finish(eigs, d.iter().filter(|&&x| x < SHORT_SPECTRUM_THRESHOLD).count().max(1));
            }
            let mut best = 1;
            let mut best_ratio = f64::NEG_INFINITY;
            for k in 2..=hi {
                let ratio = d[k] / d[k - 1].max(1e-12);
                if ratio > best_ratio {
                    best_ratio = ratio;
                    best = k;
                }
            }
            best
        }
    };
    finish(eigs, q)
}

fn finish(eigs: &[Complex64], q: usize) -> Result<usize> {
    check_window(eigs, q)?;
    Ok(q)
}

/// Stationary distribution `ω*` of `a` (`ω*A = ω*`, `ω*η = 1`).
pub fn power_vector(a: &PoliticsMatrix) -> Result<DVector<f64>> {
    linalg::stationary_row(a.matrix())
}

fn start_vector(n: usize) -> DVector<f64> {
    // Deterministic, not orthogonal to anything in particular.
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    DVector::from_fn(n, |i, _| 0.5 + ((i as f64 + 1.0) * GOLDEN).fract())
}

/// Unit eigenvector of `m` for the (simple, real) eigenvalue `lambda`.
fn inverse_iteration(m: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    let n = m.nrows();
    let shift = lambda + INVERSE_SHIFT * lambda.abs().max(1.0);
    let lu = (m - DMatrix::identity(n, n) * shift).lu();
    let mut x = start_vector(n).normalize();
    for _ in 0..INVERSE_MAX_ITER {
        let y = lu
            .solve(&x)
            .ok_or_else(|| Error::Numeric(format!("inverse iteration singular at λ={lambda}")))?;
        let mut y = y.normalize();
        if y.dot(&x) < 0.0 {
            y = -y;
        }
        let change = max_abs((&y - &x).iter());
        x = y;
        if change < 1e-15 {
            break;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("inverse iteration diverged at λ={lambda}")));
    }
    Ok(x)
}

/// The `q` eigenpairs of `a` closest to 1, normalized biorthogonally.
pub fn main_eigensystem(a: &PoliticsMatrix, q: usize) -> Result<EigenSystem> {
    let eigs = full_spectrum(a)?;
    main_eigensystem_from(a, &eigs, q)
}

/// Same as [`main_eigensystem`] with a precomputed sorted spectrum.
pub fn main_eigensystem_from(a: &PoliticsMatrix, eigs: &[Complex64], q: usize) -> Result<EigenSystem> {
    let n = a.n();
    if q == 0 || q > n || eigs.len() != n {
        return Err(Error::Parameter(format!("q={q} outside 1..={n}")));
    }
    check_window(eigs, q)?;
    let last = (q + 1).min(n);
    for i in 0..last {
        for j in (i + 1)..last {
            if j >= q && i >= q {
                continue;
            }
            if (eigs[i] - eigs[j]).norm() <= SIMPLE_GAP {
                return Err(Error::Degenerate(format!(
                    "main eigenvalue {} is not simple (|λ{} - λ{}| <= {SIMPLE_GAP:e})",
                    eigs[i].re,
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let lambda: Vec<f64> = eigs.iter().take(q).map(|z| z.re).collect();
    let m = a.matrix();
    let m_t = m.transpose();
    let omega_star = power_vector(a)?;

    let mut v = DMatrix::zeros(n, q);
    let mut u_raw = DMatrix::zeros(q, n);
    v.set_column(0, &(ones(n) / (n as f64).sqrt()));
    u_raw.set_row(0, &omega_star.transpose());
    for k in 1..q {
        let mut col = inverse_iteration(m, lambda[k])?;
        if col[argmax_abs(col.iter())] < 0.0 {
            col = -col;
        }
        v.set_column(k, &col);
        let row = inverse_iteration(&m_t, lambda[k])?;
        u_raw.set_row(k, &row.transpose());
    }

    let gram = &u_raw * &v;
    let sv = linalg::singular_values(&gram);
    if sv.last().copied().unwrap_or(0.0) <= 1e-12 * sv[0] {
        return Err(Error::Degenerate("defective main block: U~* V is numerically singular".into()));
    }
    let u_star = linalg::solve_refined(&gram, &u_raw)?;

    let sys = EigenSystem {
        lambda,
        v,
        u_star,
        omega_star,
    };
    let (right, left) = sys.residuals(m);
    if right > RESIDUAL_TOL || left > RESIDUAL_TOL {
        return Err(Error::Numeric(format!(
            "main eigensystem residuals too large: right {right:e}, left {left:e}"
        )));
    }
    Ok(sys)
}

/// `q` via [`detect_q`] followed by [`main_eigensystem`].
pub fn analyze(a: &PoliticsMatrix, method: QMethod) -> Result<(Vec<Complex64>, EigenSystem)> {
    let eigs = full_spectrum(a)?;
    let q = detect_q(&eigs, method)?;
    let sys = main_eigensystem_from(a, &eigs, q)?;
    Ok((eigs, sys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn rank_one_spectrum() {
        let a = PoliticsMatrix::from_row_slice(2, &[0.5, 0.5, 0.5, 0.5], true).unwrap();
        let e = full_spectrum(&a).unwrap();
        assert_abs_diff_eq!(e[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_two_state_spectrum() {
        let a = PoliticsMatrix::from_row_slice(2, &[0.9, 0.1, 0.1, 0.9], true).unwrap();
        let e = full_spectrum(&a).unwrap();
        assert_abs_diff_eq!(e[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1].re, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn gap_rule_hand_example() {
        let eigs: Vec<_> = [1.0, 0.98, 0.97, 0.5, 0.3].into_iter().map(c).collect();
        assert_eq!(detect_q(&eigs, QMethod::Gap).unwrap(), 3);
        let eigs: Vec<_> = [1.0, 0.2].into_iter().map(c).collect();
        assert_eq!(detect_q(&eigs, QMethod::Gap).unwrap(), 1);
        let eigs: Vec<_> = [1.0, 0.9].into_iter().map(c).collect();
        assert_eq!(detect_q(&eigs, QMethod::Gap).unwrap(), 2);
        let eigs: Vec<_> = [1.0, 0.99, 0.5].into_iter().map(c).collect();
        assert_eq!(detect_q(&eigs, QMethod::Threshold(0.05)).unwrap(), 2);
        assert_eq!(detect_q(&eigs, QMethod::Fixed(3)).unwrap(), 3);
        assert!(detect_q(&eigs, QMethod::Fixed(4)).is_err());
    }

    #[test]
    fn complex_window_is_rejected() {
        let eigs = vec![c(1.0), Complex64::new(0.97, 0.01), Complex64::new(0.97, -0.01), c(0.2)];
        assert!(matches!(
            detect_q(&eigs, QMethod::Fixed(2)),
            Err(Error::ComplexMainEigenvalue { .. })
        ));
    }

    #[test]
    fn symmetric_two_state_eigensystem() {
        let a = PoliticsMatrix::from_row_slice(2, &[0.9, 0.1, 0.1, 0.9], true).unwrap();
        let sys = main_eigensystem(&a, 2).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(sys.lambda[1], 0.8, epsilon = 1e-12);
        let v = DMatrix::from_row_slice(2, 2, &[r, r, r, -r]);
        assert!(max_abs((&sys.v - &v).iter()) < 1e-10);
        assert!(max_abs((&sys.u_star - &v).iter()) < 1e-10);
    }

    #[test]
    fn single_eigenpair_is_trivial() {
        let a =
            PoliticsMatrix::from_row_slice(3, &[0.2, 0.5, 0.3, 0.6, 0.1, 0.3, 0.3, 0.3, 0.4], true)
                .unwrap();
        let sys = main_eigensystem(&a, 1).unwrap();
        let n = 3f64;
        assert!(sys.v.iter().all(|&x| (x - 1.0 / n.sqrt()).abs() < 1e-15));
        let u1 = sys.u_star.row(0).transpose() / n.sqrt();
        assert!(max_abs((u1 - &sys.omega_star).iter()) < 1e-12);
    }

    #[test]
    fn power_vector_two_state() {
        let a = PoliticsMatrix::from_row_slice(2, &[0.9, 0.1, 0.3, 0.7], true).unwrap();
        let w = power_vector(&a).unwrap();
        assert_abs_diff_eq!(w[0], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn doubly_stochastic_power_is_uniform() {
        let a =
            PoliticsMatrix::from_row_slice(3, &[0.2, 0.5, 0.3, 0.5, 0.1, 0.4, 0.3, 0.4, 0.3], true)
                .unwrap();
        let sys = main_eigensystem(&a, 1).unwrap();
        assert!(sys.omega_star.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-14));
    }
}
