//! Recovering the family indicator matrix from main eigen-data alone.
//!
//! With `V`, `U*` the main right/left eigenvectors (`U*V = I`), a diagonal
//! weighting `Λ` gives `Z = U*ΛV`, whose left eigenvectors `β̌` (first
//! column `η̄/√n`) approximate `β`. Then `J̌ = Vβ̌⁻¹ ≈ J` and each person
//! joins the family with the largest entry of their `J̌` row.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, max_abs};
use crate::model::{GroundTruth, Member, PoliticsMatrix};
use crate::spectra::{self, EigenSystem, QMethod};

/// `Z` this close to `cI` is degenerate.
pub const SCALAR_Z_TOL: f64 = 1e-8;
/// Rows of `β̌` whose first entry is smaller than this cannot be normalized.
pub const FIRST_ENTRY_TOL: f64 = 1e-10;
pub const Z_IMAG_TOL: f64 = 1e-6;
/// Argmax margins below this are reported as ties.
pub const TIE_TOL: f64 = 1e-12;

/// Diagonal weighting used to build `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaChoice {
    /// `Λ = diag(u₁*)⁻¹ diag(VU*)`.
    #[default]
    Projector,
    /// `Λ = diag(v_k)` for a 1-based `k >= 2`.
    RightVector(usize),
}

/// `Λ_i = (VU*)_ii / (u₁*)_i`; requires `u₁* > 0`.
pub fn build_lambda(eig: &EigenSystem) -> Result<DVector<f64>> {
    projector_lambda(&eig.v, &eig.u_star)
}

pub fn projector_lambda(v: &DMatrix<f64>, u_star: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = v.nrows();
    let mut lambda = DVector::zeros(n);
    for i in 0..n {
        let u1 = u_star[(0, i)];
        if !(u1 > 0.0) {
            return Err(Error::Parameter(format!(
                "u1* is not positive at person {} ({u1:e}); A must be strictly positive",
                i + 1
            )));
        }
        lambda[i] = v.row(i).dot(&u_star.column(i).transpose()) / u1;
    }
    Ok(lambda)
}

/// [`projector_lambda`] for exact-limit inputs where `u₁*` vanishes on the
/// low class: those weights are set to 0, which `W*` annihilates anyway.
pub fn projector_lambda_on_support(v: &DMatrix<f64>, u_star: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = v.nrows();
    let mut lambda = DVector::zeros(n);
    for i in 0..n {
        let u1 = u_star[(0, i)];
        let diag = v.row(i).dot(&u_star.column(i).transpose());
        if u1 > 0.0 {
            lambda[i] = diag / u1;
        } else if u1 == 0.0 && diag.abs() <= 1e-14 {
            lambda[i] = 0.0;
        } else {
            return Err(Error::Parameter(format!(
                "u1* = {u1:e} with (VU*)_ii = {diag:e} at person {}",
                i + 1
            )));
        }
    }
    Ok(lambda)
}

/// `Λ = diag(v_k)`, 1-based `k` in `2..=q`.
pub fn eigenvector_lambda(v: &DMatrix<f64>, k: usize) -> Result<DVector<f64>> {
    if k < 2 || k > v.ncols() {
        return Err(Error::Parameter(format!(
            "Λ = diag(v_k) needs 2 <= k <= q={}, got {k}",
            v.ncols()
        )));
    }
    Ok(v.column(k - 1).into_owned())
}

/// Output of the recovery steps that follow the eigen-solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRecovery {
    pub lambda_diag: DVector<f64>,
    pub z: DMatrix<f64>,
    /// Eigenvalues of `Z` in the row order of `β̌` (descending).
    pub z_eigenvalues: Vec<f64>,
    pub beta_check: DMatrix<f64>,
    pub j_check: DMatrix<f64>,
    /// 0-based recovered family per person.
    pub assignment: Vec<usize>,
    /// People whose argmax was decided within [`TIE_TOL`].
    pub ties: Vec<usize>,
    /// Recovered families with no members.
    pub empty_families: Vec<usize>,
}

impl FamilyRecovery {
    pub fn q(&self) -> usize {
        self.j_check.ncols()
    }

    pub fn families(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.q()];
        for (i, &f) in self.assignment.iter().enumerate() {
            out[f].push(i);
        }
        out
    }

    pub fn is_degenerate(&self) -> bool {
        !self.empty_families.is_empty()
    }
}

/// Row-wise argmax with ties going to the lowest column.
pub fn assign_rows(j_check: &DMatrix<f64>) -> (Vec<usize>, Vec<usize>) {
    let mut assignment = Vec::with_capacity(j_check.nrows());
    let mut ties = Vec::new();
    for (i, row) in j_check.row_iter().enumerate() {
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        if (0..row.len()).any(|j| j != best && (row[best] - row[j]).abs() <= TIE_TOL) {
            ties.push(i);
        }
        assignment.push(best);
    }
    (assignment, ties)
}

/// `Z = U*ΛV`, `β̌`, `J̌ = Vβ̌⁻¹` and the argmax split.
pub fn recover_families(
    v: &DMatrix<f64>,
    u_star: &DMatrix<f64>,
    lambda: &DVector<f64>,
) -> Result<FamilyRecovery> {
    let n = v.nrows();
    let q = v.ncols();
    if u_star.nrows() != q || u_star.ncols() != n || lambda.len() != n {
        return Err(Error::Shape("V, U* and Λ dimensions disagree".into()));
    }
    let z = u_star * DMatrix::from_diagonal(lambda) * v;
    let root_n = (n as f64).sqrt();

    let (beta_check, z_eigenvalues) = if q == 1 {
        (DMatrix::from_element(1, 1, 1.0 / root_n), vec![z[(0, 0)]])
    } else {
        let c = z.trace() / q as f64;
        if max_abs((&z - DMatrix::identity(q, q) * c).iter()) <= SCALAR_Z_TOL {
            return Err(Error::Degenerate(format!(
                "Z is a scalar multiple of I (c = {c}); every vector is an eigenvector"
            )));
        }
        left_eigenbasis(&z, root_n)?
    };

    let j_check = v * linalg::inverse(&beta_check)
        .map_err(|_| Error::Degenerate("recovered β̌ is singular".into()))?;
    let (assignment, ties) = assign_rows(&j_check);
    let mut counts = vec![0usize; q];
    for &f in &assignment {
        counts[f] += 1;
    }
    let empty_families = (0..q).filter(|&j| counts[j] == 0).collect();
    Ok(FamilyRecovery {
        lambda_diag: lambda.clone(),
        z,
        z_eigenvalues,
        beta_check,
        j_check,
        assignment,
        ties,
        empty_families,
    })
}

/// Rows are left eigenvectors of `z`, ordered by descending eigenvalue and
/// scaled so the first entry is `1/√n`.
fn left_eigenbasis(z: &DMatrix<f64>, root_n: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let q = z.nrows();
    let raw = z.complex_eigenvalues();
    if let Some(w) = raw.iter().find(|w| w.im.abs() > Z_IMAG_TOL) {
        return Err(Error::Degenerate(format!("Z has complex eigenvalue {} {:+}i", w.re, w.im)));
    }
    let mut values: Vec<f64> = raw.iter().map(|w| w.re).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    for w in values.windows(2) {
        if (w[0] - w[1]).abs() <= 1e-12 * scale {
            return Err(Error::Degenerate(format!("Z has a repeated eigenvalue {}", w[0])));
        }
    }
    let z_t = z.transpose();
    let mut beta = DMatrix::zeros(q, q);
    for (k, &w) in values.iter().enumerate() {
        let (row, _) = linalg::null_vector(&(&z_t - DMatrix::identity(q, q) * w))?;
        if row[0].abs() < FIRST_ENTRY_TOL {
            return Err(Error::Degenerate(format!(
                "left eigenvector {} of Z has first entry {:e}; cannot normalize",
                k + 1,
                row[0]
            )));
        }
        let scaled = &row / (row[0] * root_n);
        beta.set_row(k, &scaled.transpose());
    }
    Ok((beta, values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    pub spectrum: Vec<Complex64>,
    pub eig: EigenSystem,
    pub recovery: FamilyRecovery,
}

/// The full pipeline on an observed matrix.
pub fn identify_families(
    a: &PoliticsMatrix,
    q: QMethod,
    choice: LambdaChoice,
) -> Result<IdentificationResult> {
    if !a.is_strictly_positive() {
        return Err(Error::Validation(
            "strict positivity violated: identification needs every entry of A > 0".into(),
        ));
    }
    let (spectrum, eig) = spectra::analyze(a, q)?;
    let lambda = match choice {
        LambdaChoice::Projector => build_lambda(&eig)?,
        LambdaChoice::RightVector(k) => eigenvector_lambda(&eig.v, k)?,
    };
    let recovery = recover_families(&eig.v, &eig.u_star, &lambda)?;
    Ok(IdentificationResult {
        spectrum,
        eig,
        recovery,
    })
}

/// Stable ascending order of `values` (ties keep index order).
pub fn sort_by_vector(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// People ordered by ascending component of `v_k` (1-based `k` in `2..=q`).
pub fn sort_by_eigenvector(eig: &EigenSystem, k: usize) -> Result<Vec<usize>> {
    if k < 2 || k > eig.q() {
        return Err(Error::Parameter(format!("eigenvector index {k} outside 2..={}", eig.q())));
    }
    let column: Vec<f64> = eig.v.column(k - 1).iter().copied().collect();
    Ok(sort_by_vector(&column))
}

/// Baseline partition from one vector: sort it and cut at the `k - 1`
/// largest consecutive gaps. Returns a block label per person, numbered
/// along the sorted order.
pub fn split_at_gaps(values: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > values.len() {
        return Err(Error::Parameter(format!(
            "cannot split {} values into {k} blocks",
            values.len()
        )));
    }
    let order = sort_by_vector(values);
    let mut gaps: Vec<(f64, usize)> = (1..order.len())
        .map(|p| (values[order[p]] - values[order[p - 1]], p))
        .collect();
    gaps.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut cuts: Vec<usize> = gaps.iter().take(k - 1).map(|g| g.1).collect();
    cuts.sort_unstable();
    let mut labels = vec![0; values.len()];
    for (p, &i) in order.iter().enumerate() {
        labels[i] = cuts.partition_point(|&c| c <= p);
    }
    Ok(labels)
}

/// Maximum-weight perfect matching on a square weight matrix
/// (`result[row] = column`), Hungarian method with potentials.
pub fn max_weight_matching(weights: &DMatrix<f64>) -> Vec<usize> {
    let n = weights.nrows();
    assert_eq!(n, weights.ncols(), "matching needs a square weight matrix");
    if n == 0 {
        return Vec::new();
    }
    let peak = max_abs(weights.iter());
    let cost = |i: usize, j: usize| peak - weights[(i - 1, j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            result[p[j] - 1] = j - 1;
        }
    }
    result
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 1e-300 || sbb <= 1e-300 {
        // Constant columns (q = 1): treat as perfectly correlated.
        return if saa <= 1e-300 && sbb <= 1e-300 { 1.0 } else { 0.0 };
    }
    sab / (saa * sbb).sqrt()
}

/// Agreement between a recovery and the planted families.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    /// Recovered column matched to each true family.
    pub column_for_family: Vec<Option<usize>>,
    /// `max |J̌ - J|` over matched columns.
    pub max_deviation: f64,
    /// Fraction of upper-class people assigned to their own family's column.
    pub upper_accuracy: f64,
    pub misassigned_upper: Vec<usize>,
    /// `(recovered q, true q)` when they differ.
    pub q_mismatch: Option<(usize, usize)>,
}

pub fn match_to_ground_truth(recovery: &FamilyRecovery, gt: &GroundTruth) -> MatchReport {
    match_columns(&recovery.j_check, &recovery.assignment, gt)
}

/// Matches columns of `j_check` to true families by maximal total correlation.
pub fn match_columns(j_check: &DMatrix<f64>, assignment: &[usize], gt: &GroundTruth) -> MatchReport {
    let q_true = gt.q();
    let q_rec = j_check.ncols();
    let size = q_true.max(q_rec);
    let mut weights = DMatrix::zeros(size, size);
    for f in 0..q_true {
        let truth: Vec<f64> = gt.j.column(f).iter().copied().collect();
        for c in 0..q_rec {
            let rec: Vec<f64> = j_check.column(c).iter().copied().collect();
            weights[(f, c)] = correlation(&truth, &rec);
        }
    }
    let matching = max_weight_matching(&weights);
    let column_for_family: Vec<Option<usize>> =
        (0..q_true).map(|f| Some(matching[f]).filter(|&c| c < q_rec)).collect();

    let mut max_deviation: f64 = 0.0;
    for (f, col) in column_for_family.iter().enumerate() {
        if let Some(c) = *col {
            let diff = gt.j.column(f) - j_check.column(c);
            max_deviation = max_deviation.max(max_abs(diff.iter()));
        }
    }
    let mut misassigned_upper = Vec::new();
    let mut upper = 0usize;
    for (i, m) in gt.structure.members().iter().enumerate() {
        if let Member::Family(f) = *m {
            upper += 1;
            if column_for_family[f] != Some(assignment[i]) {
                misassigned_upper.push(i);
            }
        }
    }
    let upper_accuracy = if upper == 0 {
        1.0
    } else {
        (upper - misassigned_upper.len()) as f64 / upper as f64
    };
    MatchReport {
        column_for_family,
        max_deviation,
        upper_accuracy,
        misassigned_upper,
        q_mismatch: (q_rec != q_true).then_some((q_rec, q_true)),
    }
}
