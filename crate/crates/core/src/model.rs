//! Politics matrices, family structure and planted ground truth.
//!
//! Person indices are 0-based in memory and 1-based in every file and
//! report. `eta` (the all-ones vector) is never stored.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, select};

/// Absolute per-row tolerance on stochastic row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum { row: usize, sum: f64 },
    Negative { row: usize, col: usize, value: f64 },
    Zero { row: usize, col: usize },
    NonFinite { row: usize, col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::RowSum { row, sum } => write!(f, "row {} sums to {}", row + 1, sum),
            Violation::Negative { row, col, value } => {
                write!(f, "negative entry {} at ({},{})", value, row + 1, col + 1)
            }
            Violation::Zero { row, col } => write!(f, "zero entry at ({},{})", row + 1, col + 1),
            Violation::NonFinite { row, col } => {
                write!(f, "non-finite entry at ({},{})", row + 1, col + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_positivity_violation(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::Zero { .. } | Violation::Negative { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        const SHOWN: usize = 5;
        for (k, v) in self.violations.iter().take(SHOWN).enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        if self.violations.len() > SHOWN {
            write!(f, "; ... {} more", self.violations.len() - SHOWN)?;
        }
        Ok(())
    }
}

/// Checks row sums (within [`ROW_SUM_TOL`]) and sign of every entry.
///
/// With `strict`, zero entries are violations as well.
pub fn validate_stochastic(m: &DMatrix<f64>, strict: bool) -> Result<ValidationReport> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "politics matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut violations = Vec::new();
    for (i, row) in m.row_iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                violations.push(Violation::NonFinite { row: i, col: j });
            } else if x < 0.0 {
                violations.push(Violation::Negative { row: i, col: j, value: x });
            } else if strict && x == 0.0 {
                violations.push(Violation::Zero { row: i, col: j });
            }
        }
        let sum: f64 = row.iter().sum();
        if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
            violations.push(Violation::RowSum { row: i, sum });
        }
    }
    Ok(ValidationReport { violations })
}

/// Dense row-stochastic matrix: entry (i,j) is how much person i listens to j.
#[derive(Debug, Clone, PartialEq)]
pub struct PoliticsMatrix {
    entries: DMatrix<f64>,
    strictly_positive: bool,
}

impl PoliticsMatrix {
    /// Validates and wraps `entries`. `strict` additionally demands every entry > 0.
    pub fn new(entries: DMatrix<f64>, strict: bool) -> Result<Self> {
        let report = validate_stochastic(&entries, strict)?;
        if !report.is_ok() {
            let prefix = if strict && report.has_positivity_violation() {
                "strict positivity violated: "
            } else {
                "not row-stochastic: "
            };
            return Err(Error::Validation(format!("{prefix}{report}")));
        }
        let strictly_positive = entries.iter().all(|&x| x > 0.0);
        Ok(PoliticsMatrix {
            entries,
            strictly_positive,
        })
    }

    pub fn from_row_slice(n: usize, values: &[f64], strict: bool) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Shape(format!(
                "expected {} values for a {n}x{n} matrix, got {}",
                n * n,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, values), strict)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    pub fn permuted(&self, p: &Permutation) -> Result<Self> {
        p.check_len(self.n())?;
        Ok(PoliticsMatrix {
            entries: p.permute_matrix(&self.entries),
            strictly_positive: self.strictly_positive,
        })
    }
}

/// Relabeling of people: `order[new] = old`, so the permuted matrix is `P A P^T`
/// with `P[new][order[new]] = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            order: (0..n).collect(),
        }
    }

    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &o in &order {
            if o >= n || seen[o] {
                return Err(Error::Parameter(format!(
                    "not a permutation of 0..{n}: entry {o} repeated or out of range"
                )));
            }
            seen[o] = true;
        }
        Ok(Permutation { order })
    }

    pub fn from_one_based(order: &[usize]) -> Result<Self> {
        let zero: Option<Vec<usize>> = order.iter().map(|&i| i.checked_sub(1)).collect();
        Self::new(zero.ok_or_else(|| Error::Parameter("1-based permutation contains 0".into()))?)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.order.iter().map(|i| i + 1).collect()
    }

    /// Swaps two positions of the identity.
    pub fn transposition(n: usize, a: usize, b: usize) -> Result<Self> {
        let mut order: Vec<usize> = (0..n).collect();
        if a >= n || b >= n {
            return Err(Error::Parameter(format!("transposition ({a},{b}) out of range for n={n}")));
        }
        order.swap(a, b);
        Ok(Permutation { order })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &o)| i == o)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.order.len()];
        for (new, &old) in self.order.iter().enumerate() {
            inv[old] = new;
        }
        Permutation { order: inv }
    }

    /// Relabeling equal to applying `self` first and then `next`.
    pub fn then(&self, next: &Permutation) -> Self {
        Permutation {
            order: next.order.iter().map(|&i| self.order[i]).collect(),
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.order.len() != n {
            return Err(Error::Shape(format!(
                "permutation of length {} applied to {n} people",
                self.order.len()
            )));
        }
        Ok(())
    }

    pub fn permute_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        select(m, &self.order, &self.order)
    }

    pub fn permute_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..m.ncols()).collect();
        select(m, &self.order, &cols)
    }

    pub fn permute_cols(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let rows: Vec<usize> = (0..m.nrows()).collect();
        select(m, &rows, &self.order)
    }

    pub fn permute_slice<T: Clone>(&self, v: &[T]) -> Vec<T> {
        self.order.iter().map(|&i| v[i].clone()).collect()
    }

    pub fn permute_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), self.order.iter().map(|&i| v[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    /// 0-based upper-class family index.
    Family(usize),
    Low,
}

/// Partition of the society into `q` upper-class families and the low class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyStructure {
    family_sizes: Vec<usize>,
    low_class_count: usize,
    members: Vec<Member>,
}

impl FamilyStructure {
    /// Families laid out as contiguous index ranges followed by the low class.
    pub fn normal_form(family_sizes: &[usize], low_class_count: usize) -> Result<Self> {
        let mut members = Vec::new();
        for (j, &m) in family_sizes.iter().enumerate() {
            members.extend(std::iter::repeat_n(Member::Family(j), m));
        }
        members.extend(std::iter::repeat_n(Member::Low, low_class_count));
        Self::from_members(members, family_sizes.len())
    }

    pub fn from_members(members: Vec<Member>, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::Parameter("need at least one upper-class family".into()));
        }
        let mut family_sizes = vec![0; q];
        let mut low_class_count = 0;
        for m in &members {
            match *m {
                Member::Family(j) if j < q => family_sizes[j] += 1,
                Member::Family(j) => {
                    return Err(Error::Parameter(format!("family index {} exceeds q={q}", j + 1)))
                }
                Member::Low => low_class_count += 1,
            }
        }
        if let Some(j) = family_sizes.iter().position(|&m| m == 0) {
            return Err(Error::Parameter(format!("family {} is empty", j + 1)));
        }
        Ok(FamilyStructure {
            family_sizes,
            low_class_count,
            members,
        })
    }

    pub fn q(&self) -> usize {
        self.family_sizes.len()
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub fn family_sizes(&self) -> &[usize] {
        &self.family_sizes
    }

    pub fn low_class_count(&self) -> usize {
        self.low_class_count
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    /// Members of family `j`, ascending.
    pub fn family_members(&self, j: usize) -> Vec<usize> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == Member::Family(j))
            .map(|(i, _)| i)
            .collect()
    }

    /// All upper-class people, family-major, ascending within a family.
    pub fn upper_indices(&self) -> Vec<usize> {
        (0..self.q()).flat_map(|j| self.family_members(j)).collect()
    }

    pub fn low_indices(&self) -> Vec<usize> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == Member::Low)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn permuted(&self, p: &Permutation) -> Result<Self> {
        p.check_len(self.n())?;
        Ok(FamilyStructure {
            family_sizes: self.family_sizes.clone(),
            low_class_count: self.low_class_count,
            members: p.permute_slice(&self.members),
        })
    }

    /// 1-based family label per person, 0 for low class.
    pub fn labels(&self) -> Vec<usize> {
        self.members
            .iter()
            .map(|m| match m {
                Member::Family(j) => j + 1,
                Member::Low => 0,
            })
            .collect()
    }

    pub fn from_labels(labels: &[usize], q: usize) -> Result<Self> {
        let members = labels
            .iter()
            .map(|&l| if l == 0 { Member::Low } else { Member::Family(l - 1) })
            .collect();
        Self::from_members(members, q)
    }
}

/// Everything the dominated matrix `Â` determines exactly, plus the coupling `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub a_hat: PoliticsMatrix,
    /// Coupling direction; rows sum to 0. Zero until a coupling is drawn.
    pub b: DMatrix<f64>,
    pub structure: FamilyStructure,
    /// Internal power of each family over its members in ascending index order.
    pub internal_powers: Vec<DVector<f64>>,
    pub w_star: DMatrix<f64>,
    pub j: DMatrix<f64>,
    /// `(I - Â_LL)^{-1} Â_LU`, rows in low-class order, columns in `upper_indices` order.
    pub d_lu: DMatrix<f64>,
}

impl GroundTruth {
    /// Derives internal powers, `W*`, `J` and `D̂_LU` from a dominated matrix.
    ///
    /// Fails unless every upper-class row is supported on its own family and
    /// every family block has a unique positive stationary vector.
    pub fn derive(a_hat: PoliticsMatrix, structure: FamilyStructure) -> Result<Self> {
        let n = a_hat.n();
        if structure.n() != n {
            return Err(Error::Shape(format!(
                "structure has {} people but the matrix is {n}x{n}",
                structure.n()
            )));
        }
        let ah = a_hat.matrix();
        let q = structure.q();
        for (i, m) in structure.members().iter().enumerate() {
            if let Member::Family(j) = *m {
                for (k, mk) in structure.members().iter().enumerate() {
                    if *mk != Member::Family(j) && ah[(i, k)] != 0.0 {
                        return Err(Error::Parameter(format!(
                            "not in family normal form: upper-class person {} listens to {} outside family {}",
                            i + 1,
                            k + 1,
                            j + 1
                        )));
                    }
                }
            }
        }

        let mut w_star = DMatrix::zeros(q, n);
        let mut j_matrix = DMatrix::zeros(n, q);
        let mut internal_powers = Vec::with_capacity(q);
        for fam in 0..q {
            let idx = structure.family_members(fam);
            let block = select(ah, &idx, &idx);
            let power = linalg::stationary_row(&block)?;
            if let Some(k) = power.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::Numeric(format!(
                    "internal power of family {} not positive at member {}",
                    fam + 1,
                    idx[k] + 1
                )));
            }
            for (k, &i) in idx.iter().enumerate() {
                w_star[(fam, i)] = power[k];
                j_matrix[(i, fam)] = 1.0;
            }
            internal_powers.push(power);
        }

        let upper = structure.upper_indices();
        let low = structure.low_indices();
        let d_lu = if low.is_empty() {
            DMatrix::zeros(0, upper.len())
        } else {
            let a_ll = select(ah, &low, &low);
            let a_lu = select(ah, &low, &upper);
            let i_minus = DMatrix::identity(low.len(), low.len()) - a_ll;
            linalg::solve_refined(&i_minus, &a_lu)?
        };
        let mut j_u = DMatrix::zeros(upper.len(), q);
        for (k, &i) in upper.iter().enumerate() {
            if let Member::Family(fam) = structure.members()[i] {
                j_u[(k, fam)] = 1.0;
            }
        }
        let j_l = &d_lu * &j_u;
        for (r, &i) in low.iter().enumerate() {
            for fam in 0..q {
                j_matrix[(i, fam)] = j_l[(r, fam)];
            }
        }

        Ok(GroundTruth {
            a_hat,
            b: DMatrix::zeros(n, n),
            structure,
            internal_powers,
            w_star,
            j: j_matrix,
            d_lu,
        })
    }

    pub fn n(&self) -> usize {
        self.a_hat.n()
    }

    pub fn q(&self) -> usize {
        self.structure.q()
    }

    /// `J_U` in `upper_indices` order.
    pub fn j_upper(&self) -> DMatrix<f64> {
        let upper = self.structure.upper_indices();
        let cols: Vec<usize> = (0..self.q()).collect();
        select(&self.j, &upper, &cols)
    }

    pub fn j_low(&self) -> DMatrix<f64> {
        let low = self.structure.low_indices();
        let cols: Vec<usize> = (0..self.q()).collect();
        select(&self.j, &low, &cols)
    }

    /// `JW*`, the limit of `Â^K`.
    pub fn limit_projector(&self) -> DMatrix<f64> {
        &self.j * &self.w_star
    }

    pub fn permuted(&self, p: &Permutation) -> Result<Self> {
        p.check_len(self.n())?;
        let structure = self.structure.permuted(p)?;
        let w_star = p.permute_cols(&self.w_star);
        let internal_powers = (0..self.q())
            .map(|fam| {
                let idx = structure.family_members(fam);
                DVector::from_iterator(idx.len(), idx.iter().map(|&i| w_star[(fam, i)]))
            })
            .collect();

        // d_lu rows/cols follow the (new) ascending label order; map back to old positions.
        let position = |list: &[usize]| {
            let mut pos = vec![usize::MAX; self.n()];
            for (k, &i) in list.iter().enumerate() {
                pos[i] = k;
            }
            pos
        };
        let old_low_pos = position(&self.structure.low_indices());
        let old_up_pos = position(&self.structure.upper_indices());
        let new_low = structure.low_indices();
        let new_up = structure.upper_indices();
        let d_lu = DMatrix::from_fn(new_low.len(), new_up.len(), |r, c| {
            let old_r = old_low_pos[p.order()[new_low[r]]];
            let old_c = old_up_pos[p.order()[new_up[c]]];
            self.d_lu[(old_r, old_c)]
        });

        Ok(GroundTruth {
            a_hat: self.a_hat.permuted(p)?,
            b: p.permute_matrix(&self.b),
            structure,
            internal_powers,
            w_star,
            j: p.permute_rows(&self.j),
            d_lu,
        })
    }
}

/// A politics matrix with its coupling strength, hidden relabeling and, for
/// generated societies, the planted ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Society {
    pub a: PoliticsMatrix,
    pub epsilon: Option<f64>,
    /// Relabeling from the family normal form to the stored labels.
    pub permutation: Permutation,
    pub ground_truth: Option<GroundTruth>,
}

impl Society {
    /// A user-supplied matrix without ground truth.
    pub fn observed(a: PoliticsMatrix) -> Self {
        let n = a.n();
        Society {
            a,
            epsilon: None,
            permutation: Permutation::identity(n),
            ground_truth: None,
        }
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }
}

/// Relabels `A` and every ground-truth object by `p`.
pub fn apply_permutation(s: &Society, p: &Permutation) -> Result<Society> {
    p.check_len(s.n())?;
    Ok(Society {
        a: s.a.permuted(p)?,
        epsilon: s.epsilon,
        permutation: s.permutation.then(p),
        ground_truth: s.ground_truth.as_ref().map(|g| g.permuted(p)).transpose()?,
    })
}
