//! Expansion of the main eigensystem of `A = Â + εB` around `ε = 0`.
//!
//! At zeroth order the main eigenvectors are `V̂ = Jβ`, `Û* = α*W*`, where
//! `β`, `α* = β⁻¹` and `λ̇` diagonalize the cyber generator `B̄ = W*BJ`.
//! First-order corrections go through the block fundamental matrix `Ŝ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fundamental::{compute_s_hat, FundamentalMatrix};
use crate::linalg::{self, argmax_abs, max_abs, ones, select};
use crate::model::GroundTruth;
use crate::spectra::EigenSystem;

/// `λ̇` values closer than this are degenerate (the `β̇₀` division is meaningless).
pub const LAMBDA_DOT_GAP: f64 = 1e-9;
const CYBER_IMAG_TOL: f64 = 1e-9;

/// The q-member society whose members are whole families.
#[derive(Debug, Clone, PartialEq)]
pub struct CyberSociety {
    /// `B̄ = W*BJ`; rows sum to 0.
    pub b_bar: DMatrix<f64>,
    /// `Ā = I + εB̄ = W*AJ`.
    pub a_bar: DMatrix<f64>,
    /// Power of `Ā`.
    pub omega_bar: DVector<f64>,
}

pub fn cyber_society(gt: &GroundTruth, epsilon: f64) -> Result<CyberSociety> {
    let q = gt.q();
    let b_bar = &gt.w_star * &gt.b * &gt.j;
    let a_bar = DMatrix::identity(q, q) + &b_bar * epsilon;
    let omega_bar = if q == 1 {
        DVector::from_element(1, 1.0)
    } else {
        linalg::stationary_row(&a_bar)?
    };
    Ok(CyberSociety {
        b_bar,
        a_bar,
        omega_bar,
    })
}

/// `W_U* B_UU J_U + W_U* B_UL D̂_LU J_U`: the direct family-to-family term plus
/// the part routed through low-class people.
pub fn cyber_generator_two_term(gt: &GroundTruth) -> (DMatrix<f64>, DMatrix<f64>) {
    let upper = gt.structure.upper_indices();
    let low = gt.structure.low_indices();
    let rows: Vec<usize> = (0..gt.q()).collect();
    let w_u = select(&gt.w_star, &rows, &upper);
    let j_u = gt.j_upper();
    let direct = &w_u * select(&gt.b, &upper, &upper) * &j_u;
    let via_low = if low.is_empty() {
        DMatrix::zeros(gt.q(), gt.q())
    } else {
        &w_u * select(&gt.b, &upper, &low) * &gt.d_lu * &j_u
    };
    (direct, via_low)
}

/// Eigen-data of `B̄`: `B̄β = βλ̇`, `α*B̄ = λ̇α*`, `α* = β⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct CyberEigen {
    /// `λ̇₁ = 0` first, then descending.
    pub lambda_dot: Vec<f64>,
    pub beta: DMatrix<f64>,
    pub alpha_star: DMatrix<f64>,
}

/// Diagonalizes `B̄` with `β₁ = η̄/√n` and the remaining columns scaled so
/// that `diag(βᵀJᵀJβ) = I`, sign fixed by the largest component of `Jβ_k`.
pub fn solve_cyber_eigs(cs: &CyberSociety, gt: &GroundTruth) -> Result<CyberEigen> {
    let q = cs.b_bar.nrows();
    let n = gt.n();
    let raw = cs.b_bar.complex_eigenvalues();
    if let Some(z) = raw.iter().find(|z| z.im.abs() > CYBER_IMAG_TOL) {
        return Err(Error::Degenerate(format!(
            "cyber generator has complex eigenvalue {} {:+}i",
            z.re, z.im
        )));
    }
    let mut values: Vec<f64> = raw.iter().map(|z| z.re).collect();
    let zero = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .expect("q >= 1");
    let trivial = values.remove(zero);
    values.sort_by(|a, b| b.total_cmp(a));
    let mut lambda_dot = vec![trivial];
    lambda_dot.extend(values);
    check_gaps(&lambda_dot)?;

    let gram = gt.j.transpose() * &gt.j;
    let mut beta = DMatrix::zeros(q, q);
    beta.set_column(0, &(ones(q) / (n as f64).sqrt()));
    for k in 1..q {
        let shifted = &cs.b_bar - DMatrix::identity(q, q) * lambda_dot[k];
        let (mut col, _) = linalg::null_vector(&shifted)?;
        let norm = (col.transpose() * &gram * &col)[(0, 0)].sqrt();
        col /= norm;
        let jb = &gt.j * &col;
        if jb[argmax_abs(jb.iter())] < 0.0 {
            col = -col;
        }
        beta.set_column(k, &col);
    }
    let alpha_star = linalg::inverse(&beta)?;
    Ok(CyberEigen {
        lambda_dot,
        beta,
        alpha_star,
    })
}

fn check_gaps(lambda_dot: &[f64]) -> Result<()> {
    for i in 0..lambda_dot.len() {
        for j in (i + 1)..lambda_dot.len() {
            if (lambda_dot[i] - lambda_dot[j]).abs() <= LAMBDA_DOT_GAP {
                return Err(Error::Degenerate(format!(
                    "λ̇{} and λ̇{} collide ({} vs {})",
                    i + 1,
                    j + 1,
                    lambda_dot[i],
                    lambda_dot[j]
                )));
            }
        }
    }
    Ok(())
}

fn diag_matrix(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(values))
}

/// Special first-order solutions `V̇₀ = Ŝ(BJβ - Jβλ̇)` and `U̇₀* = α*W*BŜ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrder {
    pub v_dot0: DMatrix<f64>,
    pub u_dot0_star: DMatrix<f64>,
}

pub fn first_order_vectors(gt: &GroundTruth, s_hat: &FundamentalMatrix, eig: &CyberEigen) -> FirstOrder {
    let jb = &gt.j * &eig.beta;
    let rhs = &gt.b * &jb - &jb * diag_matrix(&eig.lambda_dot);
    FirstOrder {
        v_dot0: &s_hat.s * rhs,
        u_dot0_star: &eig.alpha_star * &gt.w_star * &gt.b * &s_hat.s,
    }
}

/// Second-order eigenvalue terms and the first-order basis corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrder {
    pub lambda_ddot: Vec<f64>,
    /// Off-diagonal part of `β̇`.
    pub beta_dot0: DMatrix<f64>,
    /// Diagonal part of `β̇`.
    pub beta_dot_d: DMatrix<f64>,
    pub beta_dot: DMatrix<f64>,
    pub alpha_dot_star: DMatrix<f64>,
}

pub fn second_order(
    gt: &GroundTruth,
    s_hat: &FundamentalMatrix,
    eig: &CyberEigen,
    v_dot0: &DMatrix<f64>,
) -> Result<SecondOrder> {
    check_gaps(&eig.lambda_dot)?;
    let q = eig.lambda_dot.len();
    let aw = &eig.alpha_star * &gt.w_star;
    let coupling = &aw * &gt.b * v_dot0;
    let lambda_ddot: Vec<f64> = (0..q).map(|i| coupling[(i, i)]).collect();
    let beta_dot0 = DMatrix::from_fn(q, q, |i, j| {
        if i == j {
            0.0
        } else {
            coupling[(i, j)] / (eig.lambda_dot[j] - eig.lambda_dot[i])
        }
    });
    let jb = &gt.j * &eig.beta;
    let inner = jb.transpose() * (v_dot0 + &jb * &beta_dot0);
    let beta_dot_d = DMatrix::from_fn(q, q, |i, j| if i == j { -inner[(i, i)] } else { 0.0 });
    let beta_dot = &beta_dot_d + &beta_dot0;
    let alpha_dot_star = -(&aw * &gt.b * &s_hat.s * &jb) - &beta_dot;
    Ok(SecondOrder {
        lambda_ddot,
        beta_dot0,
        beta_dot_d,
        beta_dot,
        alpha_dot_star,
    })
}

/// Predicted main eigensystem at a given `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub epsilon: f64,
    /// `(I + εŜ(I - JW*)B) Jβ (I + εβ̇)`.
    pub v_pred: DMatrix<f64>,
    /// `(I + εα̇*) α*W* (I + εBŜ)`.
    pub u_pred_star: DMatrix<f64>,
    /// `1 + ελ̇`.
    pub lambda_first: Vec<f64>,
    /// `1 + ελ̇ + ε²λ̈`.
    pub lambda_second: Vec<f64>,
}

pub fn approx_main_eigensystem(
    gt: &GroundTruth,
    s_hat: &FundamentalMatrix,
    epsilon: f64,
    eig: &CyberEigen,
    second: &SecondOrder,
) -> Prediction {
    let n = gt.n();
    let q = gt.q();
    let i_n = DMatrix::<f64>::identity(n, n);
    let i_q = DMatrix::<f64>::identity(q, q);
    let projector = &i_n - &gt.j * &gt.w_star;
    let left = &i_n + &s_hat.s * projector * &gt.b * epsilon;
    let v_pred = left * &gt.j * &eig.beta * (&i_q + &second.beta_dot * epsilon);
    let u_pred_star = (&i_q + &second.alpha_dot_star * epsilon)
        * &eig.alpha_star
        * &gt.w_star
        * (&i_n + &gt.b * &s_hat.s * epsilon);
    let lambda_first = eig.lambda_dot.iter().map(|l| 1.0 + epsilon * l).collect();
    let lambda_second = eig
        .lambda_dot
        .iter()
        .zip(&second.lambda_ddot)
        .map(|(l, ll)| 1.0 + epsilon * l + epsilon * epsilon * ll)
        .collect();
    Prediction {
        epsilon,
        v_pred,
        u_pred_star,
        lambda_first,
        lambda_second,
    }
}

/// Every expansion object for one ground truth at one `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub cyber: CyberSociety,
    pub eig: CyberEigen,
    pub s_hat: FundamentalMatrix,
    pub first: FirstOrder,
    pub second: SecondOrder,
    /// `V̂ = Jβ`.
    pub v_hat: DMatrix<f64>,
    /// `Û* = α*W*`.
    pub u_hat_star: DMatrix<f64>,
    /// `ω̂* = ω̄*W*`.
    pub omega_hat_star: DVector<f64>,
    pub prediction: Prediction,
}

pub fn perturbation_report(gt: &GroundTruth, epsilon: f64) -> Result<PerturbationReport> {
    let cyber = cyber_society(gt, epsilon)?;
    let eig = solve_cyber_eigs(&cyber, gt)?;
    let s_hat = compute_s_hat(gt)?;
    let first = first_order_vectors(gt, &s_hat, &eig);
    let second = second_order(gt, &s_hat, &eig, &first.v_dot0)?;
    let prediction = approx_main_eigensystem(gt, &s_hat, epsilon, &eig, &second);
    let v_hat = &gt.j * &eig.beta;
    let u_hat_star = &eig.alpha_star * &gt.w_star;
    let omega_hat_star = (cyber.omega_bar.transpose() * &gt.w_star).transpose();
    Ok(PerturbationReport {
        cyber,
        eig,
        s_hat,
        first,
        second,
        v_hat,
        u_hat_star,
        omega_hat_star,
        prediction,
    })
}

/// Predicted-vs-exact errors after matching columns by nearest eigenvalue and
/// fixing signs on each exact column's largest component.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// `exact_index[k]`: exact eigenpair matched to predicted column `k`.
    pub exact_index: Vec<usize>,
    pub lambda_exact: Vec<f64>,
    pub lambda_err_first: f64,
    pub lambda_err_second: f64,
    pub v_err: f64,
    pub u_err: f64,
}

pub fn compare_with_exact(pred: &Prediction, exact: &EigenSystem) -> Result<Comparison> {
    let q = pred.lambda_first.len();
    if exact.q() != q || exact.n() != pred.v_pred.nrows() {
        return Err(Error::Shape(format!(
            "prediction has q={q}, exact eigensystem q={}",
            exact.q()
        )));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(q * q);
    for k in 0..q {
        for m in 0..q {
            pairs.push(((pred.lambda_first[k] - exact.lambda[m]).abs(), k, m));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut exact_index = vec![usize::MAX; q];
    let mut used = vec![false; q];
    for (_, k, m) in pairs {
        if exact_index[k] == usize::MAX && !used[m] {
            exact_index[k] = m;
            used[m] = true;
        }
    }

    let mut v_err: f64 = 0.0;
    let mut u_err: f64 = 0.0;
    let mut lambda_err_first: f64 = 0.0;
    let mut lambda_err_second: f64 = 0.0;
    let mut lambda_exact = Vec::with_capacity(q);
    for (k, &m) in exact_index.iter().enumerate() {
        let ve = exact.v.column(m);
        let pivot = argmax_abs(ve.iter());
        let sign = if pred.v_pred[(pivot, k)] * ve[pivot] < 0.0 { -1.0 } else { 1.0 };
        let vp = pred.v_pred.column(k) * sign;
        let up = pred.u_pred_star.row(k) * sign;
        v_err = v_err.max(max_abs((vp - ve).iter()));
        u_err = u_err.max(max_abs((up - exact.u_star.row(m)).iter()));
        lambda_err_first = lambda_err_first.max((exact.lambda[m] - pred.lambda_first[k]).abs());
        lambda_err_second = lambda_err_second.max((exact.lambda[m] - pred.lambda_second[k]).abs());
        lambda_exact.push(exact.lambda[m]);
    }
    Ok(Comparison {
        exact_index,
        lambda_exact,
        lambda_err_first,
        lambda_err_second,
        v_err,
        u_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_ideal;
    use crate::model::FamilyStructure;

    fn singleton_pair() -> GroundTruth {
        let s = FamilyStructure::normal_form(&[1, 1], 0).unwrap();
        let mut gt = build_ideal(&s, 0, 0.2, 1.0).unwrap();
        gt.b = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        gt
    }

    #[test]
    fn singleton_cyber_generator_is_b() {
        let gt = singleton_pair();
        let cs = cyber_society(&gt, 0.1).unwrap();
        assert_eq!(cs.b_bar, gt.b);
    }

    #[test]
    fn singleton_cyber_eigs() {
        let gt = singleton_pair();
        let cs = cyber_society(&gt, 0.1).unwrap();
        let eig = solve_cyber_eigs(&cs, &gt).unwrap();
        assert!(eig.lambda_dot[0].abs() < 1e-12);
        assert!((eig.lambda_dot[1] + 2.0).abs() < 1e-12);
        let r = 1.0 / 2f64.sqrt();
        let expected = DMatrix::from_row_slice(2, 2, &[r, r, r, -r]);
        assert!(max_abs((&eig.beta - &expected).iter()) < 1e-12);
        assert!(max_abs((&eig.alpha_star - &expected).iter()) < 1e-12);
    }

    #[test]
    fn singleton_first_and_second_order_vanish() {
        let gt = singleton_pair();
        let report = perturbation_report(&gt, 0.1).unwrap();
        assert!(report.first.v_dot0.iter().all(|&x| x == 0.0));
        assert!(report.first.u_dot0_star.iter().all(|&x| x == 0.0));
        assert_eq!(report.second.lambda_ddot, vec![0.0, 0.0]);
        // Exact eigenvalues of I + εB are 1 and 1 - 2ε.
        let eps = 0.1;
        assert!((report.prediction.lambda_second[1] - (1.0 - 2.0 * eps)).abs() < 1e-15);
        let sum = &report.second.alpha_dot_star + &report.second.beta_dot;
        assert!(max_abs(sum.iter()) < 1e-12);
    }

    #[test]
    fn colliding_lambda_dot_is_degenerate() {
        assert!(matches!(check_gaps(&[0.0, -1.0, -1.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn single_family_is_scalar() {
        let s = FamilyStructure::normal_form(&[4], 2).unwrap();
        let mut gt = build_ideal(&s, 1, 0.2, 1.0).unwrap();
        gt.b = DMatrix::from_element(6, 6, 1.0 / 6.0) - gt.a_hat.matrix();
        let report = perturbation_report(&gt, 0.05).unwrap();
        assert!(report.eig.lambda_dot[0].abs() < 1e-12);
        assert!((report.eig.beta[(0, 0)] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((report.eig.alpha_star[(0, 0)] * report.eig.beta[(0, 0)] - 1.0).abs() < 1e-12);
    }
}
