//! Greedy chain ordering of five families from their linking weights.

use famspec::ordering::chain_order;
use nalgebra::DMatrix;

fn main() {
    let mut g = DMatrix::from_diagonal_element(5, 5, 1.0);
    for &(i, j, v) in &[
        (1, 2, 0.57),
        (1, 3, 0.64),
        (1, 4, 0.66),
        (1, 5, 0.25),
        (2, 3, 0.48),
        (2, 4, 0.32),
        (2, 5, 0.21),
        (3, 4, 0.94),
        (3, 5, 0.92),
        (4, 5, 0.30),
    ] {
        g[(i - 1, j - 1)] = v;
        g[(j - 1, i - 1)] = v;
    }
    let chain: Vec<String> = chain_order(&g).iter().map(|f| format!("U{}", f + 1)).collect();
    println!("{}", chain.join(" - "));
}
