mod common;

use famspec::generator::{plant_society, simplex_row, GeneratorParams};
use famspec::identify::{assign_rows, split_at_gaps};
use famspec::io::{matrix_to_csv, parse_matrix_csv};
use famspec::linalg::{inf_norm, max_abs, ones};
use famspec::ordering::{chain_order, seriate};
use famspec::spectra::{full_spectrum, power_vector};
use famspec::fundamental::compute_s;
use famspec::{Permutation, PoliticsMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn positive_matrix(n: usize, seed: u64) -> PoliticsMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n).flat_map(|_| simplex_row(&mut rng, n)).collect();
    PoliticsMatrix::from_row_slice(n, &values, true).unwrap()
}

fn symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rand::Rng::random_range(&mut rng, 0.0..1.0);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_rows_sum_to_one(seed in 0u64..10_000, eps in 0.001f64..0.2) {
        let (sizes, low) = common::layout(seed, 40);
        let society = plant_society(&GeneratorParams::new(&sizes, low, eps, seed)).unwrap();
        let a = society.a.matrix();
        prop_assert!(a.iter().all(|&x| x > 0.0));
        prop_assert!(max_abs((a * ones(a.nrows()) - ones(a.nrows())).iter()) <= 1e-12);
        let gt = society.ground_truth.as_ref().unwrap();
        prop_assert!(max_abs((&gt.b * ones(gt.n())).iter()) <= 1e-12);
    }

    #[test]
    fn power_is_a_distribution(n in 2usize..15, seed in 0u64..10_000) {
        let a = positive_matrix(n, seed);
        let w = power_vector(&a).unwrap();
        prop_assert!(w.iter().all(|&x| x > 0.0));
        prop_assert!((w.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(max_abs((a.matrix().transpose() * &w - &w).iter()) <= 1e-10);
    }

    #[test]
    fn fundamental_inverts_on_complement(n in 2usize..15, seed in 0u64..10_000) {
        let a = positive_matrix(n, seed);
        let w = power_vector(&a).unwrap();
        let s = compute_s(&a, &w).unwrap().s;
        let i_minus = DMatrix::identity(n, n) - a.matrix();
        prop_assert!(inf_norm(&(&s * &i_minus - &i_minus * &s)) <= 1e-8);
        prop_assert!(max_abs((&s * ones(n)).iter()) <= 1e-9);
    }

    #[test]
    fn spectrum_contains_one_and_is_relabeling_invariant(n in 2usize..12, seed in 0u64..10_000) {
        let a = positive_matrix(n, seed);
        let eigs = full_spectrum(&a).unwrap();
        prop_assert!((eigs[0].re - 1.0).abs() <= 1e-10 && eigs[0].im.abs() <= 1e-12);
        prop_assert!((eigs.iter().map(|z| z.re).sum::<f64>() - a.matrix().trace()).abs() <= 1e-9);
        let rev = Permutation::new((0..n).rev().collect()).unwrap();
        let moved = full_spectrum(&a.permuted(&rev).unwrap()).unwrap();
        prop_assert!((moved[1] - eigs[1]).norm() <= 1e-8 || (moved[1] - eigs[1].conj()).norm() <= 1e-8);
    }

    #[test]
    fn csv_round_trips(n in 1usize..8, m in 1usize..8, seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..n * m).map(|_| rand::Rng::random_range(&mut rng, -1e6..1e6)).collect();
        let mat = DMatrix::from_row_slice(n, m, &values);
        prop_assert_eq!(parse_matrix_csv(&matrix_to_csv(&mat), Path::new("p.csv")).unwrap(), mat);
    }

    #[test]
    fn chain_visits_every_family_once(q in 1usize..9, seed in 0u64..10_000) {
        let mut chain = chain_order(&symmetric(q, seed));
        chain.sort_unstable();
        prop_assert_eq!(chain, (0..q).collect::<Vec<_>>());
    }

    #[test]
    fn seriation_is_a_permutation_keeping_families_contiguous(n in 2usize..30, q in 1usize..5, seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..n).flat_map(|_| simplex_row(&mut rng, q)).collect();
        let j = DMatrix::from_row_slice(n, q, &values);
        let (assignment, _) = assign_rows(&j);
        let plan = seriate(&j, &assignment).unwrap();
        let mut seen: Vec<usize> = plan.person_order.order().to_vec();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let along: Vec<usize> = plan.person_order.order().iter().map(|&i| assignment[i]).collect();
        let runs = 1 + along.windows(2).filter(|w| w[0] != w[1]).count();
        let distinct = { let mut d = along.clone(); d.sort_unstable(); d.dedup(); d.len() };
        prop_assert_eq!(runs, distinct);
    }

    #[test]
    fn gap_split_gives_k_blocks(values in prop::collection::vec(-10.0f64..10.0, 2..40), k in 1usize..5) {
        prop_assume!(k <= values.len());
        let labels = split_at_gaps(&values, k).unwrap();
        prop_assert!(labels.iter().all(|&l| l < k));
    }
}
