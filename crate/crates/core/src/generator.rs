//! Seeded synthesis of societies in family normal form.
//!
//! Every row is drawn uniformly from the simplex (normalized unit
//! exponentials), floored at [`ENTRY_FLOOR`] and renormalized. The seed
//! drives three independent ChaCha streams: the dominated matrix, the
//! coupling target and the hiding permutation. Changing `epsilon` alone
//! therefore keeps `Â`, `B` and the relabeling fixed.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use crate::error::{Error, Result};
use crate::model::{apply_permutation, FamilyStructure, GroundTruth, Member, Permutation, PoliticsMatrix, Society};

pub const DEFAULT_GAMMA_MIN: f64 = 0.2;
/// Minimum pairwise gap between the cyber-society eigenvalues accepted by
/// [`plant`]; 0 accepts the first coupling draw.
pub const DEFAULT_MIN_CYBER_GAP: f64 = 0.02;
pub const DEFAULT_MAX_COUPLING_DRAWS: usize = 1000;
pub const DEFAULT_LOW_ALPHA: f64 = 0.3;
pub const DEFAULT_COUPLING_ALPHA: f64 = 0.3;
pub const ENTRY_FLOOR: f64 = 1e-9;

const STREAM_IDEAL: u64 = 0;
const STREAM_COUPLING: u64 = 1;
const STREAM_PERMUTATION: u64 = 2;

/// Imaginary parts below this are treated as zero when screening couplings.
const CYBER_IMAG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub family_sizes: Vec<usize>,
    pub low_class_count: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub gamma_min: f64,
    /// Dirichlet concentration of a low-class row over the upper class.
    pub low_alpha: f64,
    /// Dirichlet concentration of the coupling target rows.
    pub coupling_alpha: f64,
    pub hide: bool,
    pub min_cyber_gap: f64,
    pub max_coupling_draws: usize,
}

impl GeneratorParams {
    pub fn new(family_sizes: &[usize], low_class_count: usize, epsilon: f64, seed: u64) -> Self {
        GeneratorParams {
            family_sizes: family_sizes.to_vec(),
            low_class_count,
            epsilon,
            seed,
            gamma_min: DEFAULT_GAMMA_MIN,
            low_alpha: DEFAULT_LOW_ALPHA,
            coupling_alpha: DEFAULT_COUPLING_ALPHA,
            hide: true,
            min_cyber_gap: DEFAULT_MIN_CYBER_GAP,
            max_coupling_draws: DEFAULT_MAX_COUPLING_DRAWS,
        }
    }

    pub fn hidden(mut self, hide: bool) -> Self {
        self.hide = hide;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        check_gamma(self.gamma_min)?;
        check_alpha(self.low_alpha)?;
        check_alpha(self.coupling_alpha)?;
        if !(self.min_cyber_gap >= 0.0) {
            return Err(Error::Parameter("min_cyber_gap must be >= 0".into()));
        }
        if self.max_coupling_draws == 0 {
            return Err(Error::Parameter("max_coupling_draws must be >= 1".into()));
        }
        FamilyStructure::normal_form(&self.family_sizes, self.low_class_count)?;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.family_sizes.iter().sum::<usize>() + self.low_class_count
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    Ok(())
}

fn check_gamma(gamma_min: f64) -> Result<()> {
    if !(gamma_min > 0.0 && gamma_min <= 1.0) {
        return Err(Error::Parameter(format!("gamma_min must lie in (0,1], got {gamma_min}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("Dirichlet concentration must be positive, got {alpha}")));
    }
    Ok(())
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform point on the open `k`-simplex with every coordinate >= the floor.
pub fn simplex_row<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let x: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    floored(x)
}

/// Symmetric Dirichlet(`alpha`) point on the `k`-simplex, floored like
/// [`simplex_row`]. `alpha = 1` is the uniform case.
pub fn dirichlet_row<R: Rng + ?Sized>(rng: &mut R, k: usize, alpha: f64) -> Vec<f64> {
    if alpha == 1.0 {
        return simplex_row(rng, k);
    }
    let gamma = Gamma::new(alpha, 1.0).expect("alpha checked positive");
    let x: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    floored(x)
}

fn floored(mut x: Vec<f64>) -> Vec<f64> {
    let total: f64 = x.iter().sum();
    if !(total > 0.0) {
        x.iter_mut().for_each(|v| *v = 1.0);
    }
    let total: f64 = x.iter().sum();
    for v in &mut x {
        *v = (*v / total).max(ENTRY_FLOOR);
    }
    let total: f64 = x.iter().sum();
    for v in &mut x {
        *v /= total;
    }
    x
}

/// Samples a dominated matrix `Â` for `structure` and derives its ground truth.
///
/// Family blocks are strictly positive; each low-class row puts mass
/// `gamma ~ U[gamma_min, 1]` on the upper class and the rest on the low
/// class, so `Â_LL` has row sums at most `1 - gamma_min`. The returned
/// ground truth has `B = 0`.
pub fn build_ideal(structure: &FamilyStructure, seed: u64, gamma_min: f64, low_alpha: f64) -> Result<GroundTruth> {
    check_gamma(gamma_min)?;
    check_alpha(low_alpha)?;
    let n = structure.n();
    let mut rng = stream(seed, STREAM_IDEAL);
    let mut a_hat = DMatrix::zeros(n, n);
    for fam in 0..structure.q() {
        let idx = structure.family_members(fam);
        for &i in &idx {
            let row = simplex_row(&mut rng, idx.len());
            for (k, &col) in idx.iter().enumerate() {
                a_hat[(i, col)] = row[k];
            }
        }
    }
    let upper = structure.upper_indices();
    let low = structure.low_indices();
    for &i in &low {
        let gamma = rng.random_range(gamma_min..=1.0);
        let to_upper = dirichlet_row(&mut rng, upper.len(), low_alpha);
        let to_low = simplex_row(&mut rng, low.len());
        for (k, &col) in upper.iter().enumerate() {
            a_hat[(i, col)] = gamma * to_upper[k];
        }
        for (k, &col) in low.iter().enumerate() {
            a_hat[(i, col)] = (1.0 - gamma) * to_low[k];
        }
    }
    GroundTruth::derive(PoliticsMatrix::new(a_hat, false)?, structure.clone())
}

/// Share of each coupling target row spread uniformly over everyone.
const TARGET_NOISE_SHARE: f64 = 0.5;

/// Coupling target `C`: each family draws an affinity over families
/// (Dirichlet(`alpha`)); a row puts [`TARGET_NOISE_SHARE`] on a uniform
/// simplex draw over everyone and the rest on families by the affinity of
/// its own family (a random family for low-class rows).
fn draw_target<R: Rng + ?Sized>(rng: &mut R, structure: &FamilyStructure, alpha: f64) -> DMatrix<f64> {
    let n = structure.n();
    let q = structure.q();
    let affinity: Vec<Vec<f64>> = (0..q).map(|_| dirichlet_row(rng, q, alpha)).collect();
    let members: Vec<Vec<usize>> = (0..q).map(|k| structure.family_members(k)).collect();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        let home = match structure.members()[i] {
            Member::Family(f) => f,
            Member::Low => rng.random_range(0..q),
        };
        for (j, v) in simplex_row(rng, n).into_iter().enumerate() {
            c[(i, j)] = TARGET_NOISE_SHARE * v;
        }
        for k in 0..q {
            let weight = (1.0 - TARGET_NOISE_SHARE) * affinity[home][k];
            for (x, v) in simplex_row(rng, members[k].len()).into_iter().enumerate() {
                c[(i, members[k][x])] += weight * v;
            }
        }
    }
    c
}

fn coupled(gt: &GroundTruth, target: &DMatrix<f64>, epsilon: f64) -> Result<Society> {
    let b = target - gt.a_hat.matrix();
    let mut truth = gt.clone();
    truth.b = b;
    let a = with_coupling(&truth, epsilon)?;
    Ok(Society {
        a,
        epsilon: Some(epsilon),
        permutation: Permutation::identity(gt.n()),
        ground_truth: Some(truth),
    })
}

/// `A = Â + εB` for the ground truth's stored coupling direction.
pub fn with_coupling(gt: &GroundTruth, epsilon: f64) -> Result<PoliticsMatrix> {
    check_epsilon(epsilon)?;
    PoliticsMatrix::new(gt.a_hat.matrix() + &gt.b * epsilon, true)
}

/// Same society at a different coupling strength (same `Â`, `B`, labels).
pub fn recouple(s: &Society, epsilon: f64) -> Result<Society> {
    let gt = s
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::Parameter("recoupling needs ground truth".into()))?;
    Ok(Society {
        a: with_coupling(gt, epsilon)?,
        epsilon: Some(epsilon),
        permutation: s.permutation.clone(),
        ground_truth: Some(gt.clone()),
    })
}

/// One coupling draw: target `C` as in `plant`, `B = C - Â`, `A = Â + εB`.
pub fn couple(gt: &GroundTruth, epsilon: f64, seed: u64, alpha: f64) -> Result<Society> {
    check_epsilon(epsilon)?;
    check_alpha(alpha)?;
    let mut rng = stream(seed, STREAM_COUPLING);
    let target = draw_target(&mut rng, &gt.structure, alpha);
    coupled(gt, &target, epsilon)
}

/// Real eigenvalues of `W*BJ` with the smallest pairwise gap, or `None`
/// when a complex pair is present.
pub fn cyber_spectrum(gt: &GroundTruth, b: &DMatrix<f64>) -> Option<(Vec<f64>, f64)> {
    let b_bar = &gt.w_star * b * &gt.j;
    let eig = b_bar.complex_eigenvalues();
    if eig.iter().any(|z| z.im.abs() > CYBER_IMAG_TOL) {
        return None;
    }
    let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
    re.sort_by(|a, b| b.total_cmp(a));
    let gap = re.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    Some((re, gap))
}

#[derive(Debug, Clone)]
pub struct Planted {
    pub society: Society,
    pub params: GeneratorParams,
    /// Number of coupling targets drawn before one passed the cyber-spectrum screen.
    pub coupling_draws: usize,
}

/// `build_ideal`, then coupling draws until `W*BJ` has a real spectrum with
/// pairwise gaps >= `min_cyber_gap`, then the optional hiding permutation.
pub fn plant(params: &GeneratorParams) -> Result<Planted> {
    params.validate()?;
    let structure = FamilyStructure::normal_form(&params.family_sizes, params.low_class_count)?;
    let gt = build_ideal(&structure, params.seed, params.gamma_min, params.low_alpha)?;
    let n = gt.n();

    let mut rng = stream(params.seed, STREAM_COUPLING);
    let mut accepted = None;
    for draw in 1..=params.max_coupling_draws {
        let target = draw_target(&mut rng, &gt.structure, params.coupling_alpha);
        let b = &target - gt.a_hat.matrix();
        let ok = match cyber_spectrum(&gt, &b) {
            Some((_, gap)) => params.min_cyber_gap == 0.0 || gap >= params.min_cyber_gap,
            None => params.min_cyber_gap == 0.0,
        };
        if ok {
            accepted = Some((target, draw));
            break;
        }
    }
    let (target, coupling_draws) = accepted.ok_or_else(|| {
        Error::Parameter(format!(
            "no coupling with real cyber spectrum and gap >= {} in {} draws",
            params.min_cyber_gap, params.max_coupling_draws
        ))
    })?;
    let mut society = coupled(&gt, &target, params.epsilon)?;

    if params.hide {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(params.seed, STREAM_PERMUTATION));
        society = apply_permutation(&society, &Permutation::new(order)?)?;
    }
    Ok(Planted {
        society,
        params: params.clone(),
        coupling_draws,
    })
}

pub fn plant_society(params: &GeneratorParams) -> Result<Society> {
    plant(params).map(|p| p.society)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn single_family_is_its_own_stationary_row() {
        let s = FamilyStructure::normal_form(&[6], 0).unwrap();
        let gt = build_ideal(&s, 3, 0.2, 1.0).unwrap();
        assert!(gt.j.iter().all(|&x| x == 1.0));
        let wj = &gt.w_star * &gt.j;
        assert!((wj[(0, 0)] - 1.0).abs() < 1e-12);
        let wa = &gt.w_star * gt.a_hat.matrix();
        assert!(max_abs((wa - &gt.w_star).iter()) < 1e-12);
    }

    #[test]
    fn singletons_force_identity() {
        let s = FamilyStructure::normal_form(&[1, 1], 0).unwrap();
        let gt = build_ideal(&s, 0, 0.2, 1.0).unwrap();
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(gt.a_hat.matrix(), &i2);
        assert_eq!(gt.j, i2);
        assert_eq!(gt.w_star, i2);
        assert_eq!(gt.internal_powers[0].as_slice(), &[1.0]);
    }

    #[test]
    fn coupling_arithmetic() {
        let s = FamilyStructure::normal_form(&[1, 1], 0).unwrap();
        let mut gt = build_ideal(&s, 0, 0.2, 1.0).unwrap();
        let c = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        gt.b = &c - gt.a_hat.matrix();
        let a = with_coupling(&gt, 0.1).unwrap();
        assert_eq!(gt.b, DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]));
        let expected = DMatrix::from_row_slice(2, 2, &[0.95, 0.05, 0.05, 0.95]);
        assert!(max_abs((a.matrix() - expected).iter()) < 1e-15);
    }

    #[test]
    fn bad_parameters() {
        let s = FamilyStructure::normal_form(&[2], 1).unwrap();
        let gt = build_ideal(&s, 0, 0.2, 1.0).unwrap();
        assert!(matches!(couple(&gt, 0.0, 1, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(couple(&gt, 1.0, 1, 1.0), Err(Error::Parameter(_))));
        assert!(build_ideal(&s, 0, 0.0, 1.0).is_err());
        assert!(GeneratorParams::new(&[2, 0], 1, 0.1, 0).validate().is_err());
    }

    #[test]
    fn low_class_rows_respect_gamma_min() {
        let s = FamilyStructure::normal_form(&[3, 4], 6).unwrap();
        let gt = build_ideal(&s, 11, 0.35, 1.0).unwrap();
        let low = s.low_indices();
        for &i in &low {
            let ll: f64 = low.iter().map(|&k| gt.a_hat.matrix()[(i, k)]).sum();
            assert!(ll <= 1.0 - 0.35 + 1e-12);
        }
    }

    #[test]
    fn visible_layout_is_contiguous() {
        let p = GeneratorParams::new(&[2, 3], 2, 0.05, 9).hidden(false);
        let s = plant_society(&p).unwrap();
        let labels = s.ground_truth.unwrap().structure.labels();
        assert_eq!(labels, vec![1, 1, 2, 2, 2, 0, 0]);
        assert!(s.permutation.is_identity());
    }

    #[test]
    fn strict_positivity_of_coupled_matrix() {
        let p = GeneratorParams::new(&[3, 3, 2], 4, 0.01, 5);
        let s = plant_society(&p).unwrap();
        assert!(s.a.is_strictly_positive());
    }
}
