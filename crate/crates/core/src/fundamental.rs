//! Fundamental matrices: `S` of a positive chain and the block form `Ŝ` of a
//! dominated matrix.
//!
//! `S` is the group inverse of `I - A`: `S(I - A) = (I - A)S = I - ηω*`,
//! `Sη = 0`, `ω*S = 0`. It is computed from the closed form
//! `S = (I - ηω*) Z (I - ηω*)` where `Z` inverts `I - A` on the leading
//! `n-1` indices and is zero elsewhere.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, inf_norm, ones, scatter, select};
use crate::model::{GroundTruth, PoliticsMatrix};

/// `|ω*b|` above this makes `(I - A)x = b` inconsistent.
pub const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParts {
    /// `Ŝ_j` per family, over members in ascending index order.
    pub family_blocks: Vec<DMatrix<f64>>,
    /// `D̂_LU Ŝ_U` (low-class rows, upper columns family-major).
    pub lower_left: DMatrix<f64>,
    /// `(I - Â_LL)^{-1}`.
    pub ll_inverse: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FundamentalKind {
    Chain { omega_star: DVector<f64> },
    Block(BlockParts),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    pub s: DMatrix<f64>,
    pub kind: FundamentalKind,
}

impl FundamentalMatrix {
    pub fn omega_star(&self) -> Option<&DVector<f64>> {
        match &self.kind {
            FundamentalKind::Chain { omega_star } => Some(omega_star),
            FundamentalKind::Block(_) => None,
        }
    }

    /// General solution `x = Sb + cη` of `(I - A)x = b`.
    pub fn solve(&self, b: &DVector<f64>, c: f64) -> Result<DVector<f64>> {
        let omega = self.omega_star().ok_or_else(|| {
            Error::Parameter("singular solve needs the fundamental matrix of a positive chain".into())
        })?;
        if b.len() != self.s.nrows() {
            return Err(Error::Shape(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.s.nrows()
            )));
        }
        let residual = omega.dot(b);
        if residual.abs() > CONSISTENCY_TOL {
            return Err(Error::Inconsistent { residual });
        }
        Ok(&self.s * b + ones(b.len()) * c)
    }
}

/// Closed-form group inverse of `I - m` for a stochastic `m` with stationary row `stationary`.
pub fn group_inverse(m: &DMatrix<f64>, stationary: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if !m.is_square() || stationary.len() != n {
        return Err(Error::Shape("group inverse needs a square matrix and matching ω*".into()));
    }
    if n <= 1 {
        return Ok(DMatrix::zeros(n, n));
    }
    let g: Vec<usize> = (0..n - 1).collect();
    let i_minus = DMatrix::identity(n - 1, n - 1) - select(m, &g, &g);
    let inv = linalg::inverse(&i_minus)
        .map_err(|_| Error::Numeric("I - A_GG is singular; A is not a positive chain".into()))?;
    let mut z = DMatrix::zeros(n, n);
    scatter(&mut z, &g, &g, &inv);
    let proj = DMatrix::identity(n, n) - ones(n) * stationary.transpose();
    Ok(&proj * z * &proj)
}

pub fn compute_s(a: &PoliticsMatrix, omega_star: &DVector<f64>) -> Result<FundamentalMatrix> {
    let s = group_inverse(a.matrix(), omega_star)?;
    Ok(FundamentalMatrix {
        s,
        kind: FundamentalKind::Chain {
            omega_star: omega_star.clone(),
        },
    })
}

/// Oracle: partial sums of `Σ_{i>=0} (A^i - ηω*)` until the newest term's
/// infinity norm drops below `tol`.
pub fn series_s(
    a: &PoliticsMatrix,
    omega_star: &DVector<f64>,
    tol: f64,
    max_terms: usize,
) -> Result<DMatrix<f64>> {
    let n = a.n();
    let limit = ones(n) * omega_star.transpose();
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::zeros(n, n);
    let mut last_norm = f64::INFINITY;
    for terms in 1..=max_terms {
        let term = &power - &limit;
        last_norm = inf_norm(&term);
        sum += &term;
        if last_norm < tol {
            return Ok(sum);
        }
        power = &power * a.matrix();
        if terms == max_terms {
            break;
        }
    }
    Err(Error::Convergence {
        terms: max_terms,
        last_norm,
    })
}

/// `x = Sb + cη`, solving `(I - A)x = b` when `ω*b = 0`.
pub fn singular_solve(
    a: &PoliticsMatrix,
    omega_star: &DVector<f64>,
    b: &DVector<f64>,
    c: f64,
) -> Result<DVector<f64>> {
    compute_s(a, omega_star)?.solve(b, c)
}

/// Block fundamental matrix of `Â`, assembled in the ground truth's labeling:
/// `Ŝ[U_j,U_j] = Ŝ_j`, `Ŝ[L,U] = D̂_LU Ŝ_U`, `Ŝ[L,L] = (I - Â_LL)^{-1}`.
pub fn compute_s_hat(gt: &GroundTruth) -> Result<FundamentalMatrix> {
    let n = gt.n();
    let ah = gt.a_hat.matrix();
    let structure = &gt.structure;
    let mut s = DMatrix::zeros(n, n);

    let upper = structure.upper_indices();
    let mut s_u = DMatrix::zeros(upper.len(), upper.len());
    let mut family_blocks = Vec::with_capacity(gt.q());
    let mut offset = 0;
    for fam in 0..gt.q() {
        let idx = structure.family_members(fam);
        let block = group_inverse(&select(ah, &idx, &idx), &gt.internal_powers[fam])?;
        scatter(&mut s, &idx, &idx, &block);
        let local: Vec<usize> = (offset..offset + idx.len()).collect();
        scatter(&mut s_u, &local, &local, &block);
        offset += idx.len();
        family_blocks.push(block);
    }

    let low = structure.low_indices();
    let (lower_left, ll_inverse) = if low.is_empty() {
        (DMatrix::zeros(0, upper.len()), DMatrix::zeros(0, 0))
    } else {
        let i_minus = DMatrix::identity(low.len(), low.len()) - select(ah, &low, &low);
        let ll_inverse = linalg::inverse(&i_minus)
            .map_err(|_| Error::Numeric("I - Â_LL is singular".into()))?;
        let lower_left = &gt.d_lu * &s_u;
        scatter(&mut s, &low, &upper, &lower_left);
        scatter(&mut s, &low, &low, &ll_inverse);
        (lower_left, ll_inverse)
    };

    Ok(FundamentalMatrix {
        s,
        kind: FundamentalKind::Block(BlockParts {
            family_blocks,
            lower_left,
            ll_inverse,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::model::FamilyStructure;

    fn sym() -> PoliticsMatrix {
        PoliticsMatrix::from_row_slice(2, &[0.9, 0.1, 0.1, 0.9], true).unwrap()
    }

    fn uniform() -> DVector<f64> {
        DVector::from_element(2, 0.5)
    }

    #[test]
    fn closed_form_two_state() {
        let f = compute_s(&sym(), &uniform()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.5, -2.5, -2.5, 2.5]);
        assert!(max_abs((&f.s - expected).iter()) < 1e-12);
    }

    #[test]
    fn series_matches_two_state() {
        let s = series_s(&sym(), &uniform(), 1e-9, 10_000).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.5, -2.5, -2.5, 2.5]);
        assert!(max_abs((s - expected).iter()) < 1e-6);
    }

    #[test]
    fn rank_one_chain_is_its_own_complement() {
        let a = PoliticsMatrix::from_row_slice(2, &[0.5, 0.5, 0.5, 0.5], true).unwrap();
        let closed = compute_s(&a, &uniform()).unwrap().s;
        let series = series_s(&a, &uniform(), 1e-9, 10).unwrap();
        let complement = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(max_abs((&closed - &series).iter()) < 1e-6);
        assert!(max_abs((&closed - complement).iter()) < 1e-12);
    }

    #[test]
    fn near_periodic_needs_many_terms() {
        let a = PoliticsMatrix::from_row_slice(2, &[0.01, 0.99, 0.99, 0.01], true).unwrap();
        let err = series_s(&a, &uniform(), 1e-12, 100).unwrap_err();
        assert!(matches!(err, Error::Convergence { terms: 100, .. }));
        let series = series_s(&a, &uniform(), 1e-12, 100_000).unwrap();
        let closed = compute_s(&a, &uniform()).unwrap().s;
        assert!(max_abs((series - closed).iter()) < 1e-6);
    }

    #[test]
    fn singular_solve_cases() {
        let x = singular_solve(&sym(), &uniform(), &DVector::zeros(2), 3.0).unwrap();
        assert_eq!(x.as_slice(), &[3.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let x = singular_solve(&sym(), &uniform(), &b, 0.0).unwrap();
        assert!((x[0] - 5.0).abs() < 1e-12 && (x[1] + 5.0).abs() < 1e-12);
        let err = singular_solve(&sym(), &uniform(), &ones(2), 0.0).unwrap_err();
        match err {
            Error::Inconsistent { residual } => assert!((residual - 1.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singleton_families_have_zero_s_hat() {
        let s = FamilyStructure::normal_form(&[1, 1, 1], 0).unwrap();
        let gt = crate::generator::build_ideal(&s, 0, 0.2, 1.0).unwrap();
        let f = compute_s_hat(&gt).unwrap();
        assert!(f.s.iter().all(|&x| x == 0.0));
    }
}
