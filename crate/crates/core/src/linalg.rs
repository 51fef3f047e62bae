//! Dense helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Residual target for iterative refinement of dense solves.
pub const REFINE_TARGET: f64 = 1e-10;
/// Maximum number of refinement passes after the initial LU solve.
pub const REFINE_PASSES: usize = 3;

/// Induced infinity norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

/// Submatrix with the given row and column index lists.
pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Writes `block` into `target` at the given index lists.
pub fn scatter(target: &mut DMatrix<f64>, rows: &[usize], cols: &[usize], block: &DMatrix<f64>) {
    for (bi, &i) in rows.iter().enumerate() {
        for (bj, &j) in cols.iter().enumerate() {
            target[(i, j)] = block[(bi, bj)];
        }
    }
}

/// Solves `m x = rhs` with LU and up to three passes of residual refinement.
pub fn solve_refined(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() || m.nrows() != rhs.nrows() {
        return Err(Error::Shape(format!(
            "cannot solve {}x{} system with {}x{} right-hand side",
            m.nrows(),
            m.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(rhs.clone());
    }
    let lu = m.clone().lu();
    let mut x = lu
        .solve(rhs)
        .ok_or_else(|| Error::Numeric("singular matrix in dense solve".into()))?;
    for _ in 0..REFINE_PASSES {
        let residual = rhs - m * &x;
        if max_abs(residual.iter()) <= REFINE_TARGET {
            break;
        }
        match lu.solve(&residual) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite solution in dense solve".into()));
    }
    Ok(x)
}

pub fn solve_vector(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let rhs = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let x = solve_refined(m, &rhs)?;
    Ok(x.column(0).into_owned())
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve_refined(m, &DMatrix::identity(m.nrows(), m.nrows()))
}

/// Stationary row vector of a row-stochastic matrix: `w m = w`, `w 1 = 1`.
///
/// Solves `(I - m^T) w = 0` with the last equation replaced by the
/// normalization row.
pub fn stationary_row(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    if n == 0 || !m.is_square() {
        return Err(Error::Shape("stationary vector needs a non-empty square matrix".into()));
    }
    let mut system = DMatrix::identity(n, n) - m.transpose();
    for j in 0..n {
        system[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let w = solve_vector(&system, &rhs)?;
    let residual = max_abs((w.transpose() * m - w.transpose()).iter());
    if residual > 1e-8 {
        return Err(Error::Numeric(format!(
            "stationary solve residual {residual:e} (chain not irreducible?)"
        )));
    }
    Ok(w)
}

/// Unit right null vector of a small square matrix (smallest singular vector).
pub fn null_vector(m: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let n = m.ncols();
    let svd = m.clone().try_svd(false, true, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numeric("SVD failed to converge while extracting a null vector".into())
    })?;
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let (idx, smin) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if s < acc.1 { (i, s) } else { acc });
    let v = DVector::from_iterator(n, v_t.row(idx).iter().copied());
    Ok((v, smin))
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Index of the entry with the largest magnitude (first on ties).
pub fn argmax_abs<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v.abs() > best_val {
            best = i;
            best_val = v.abs();
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stationary_of_two_state_chain() {
        let m = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.3, 0.7]);
        let w = stationary_row(&m).unwrap();
        assert_abs_diff_eq!(w[0], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn singular_solve_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(inverse(&m).is_err());
    }

    #[test]
    fn null_vector_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let (v, s) = null_vector(&m).unwrap();
        assert!(s < 1e-14);
        assert_abs_diff_eq!((v[0] - v[1]).abs(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn norms() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.5]);
        assert_eq!(inf_norm(&m), 3.0);
        assert_eq!(max_abs(m.iter()), 2.0);
        assert_eq!(argmax_abs([0.1, -0.3, 0.3].iter()), 1);
    }
}
