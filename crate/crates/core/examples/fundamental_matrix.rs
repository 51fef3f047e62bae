//! Fundamental matrix of a small chain, checked against its defining series,
//! and a singular solve of (I - A)x = b.

use famspec::fundamental::{compute_s, series_s};
use famspec::linalg::max_abs;
use famspec::spectra::power_vector;
use famspec::PoliticsMatrix;
use nalgebra::DVector;

fn row<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| format!("{v:+.6}")).collect::<Vec<_>>().join(" ")
}

fn main() -> famspec::Result<()> {
    let a = PoliticsMatrix::from_row_slice(3, &[0.5, 0.3, 0.2, 0.1, 0.8, 0.1, 0.25, 0.25, 0.5], true)?;
    let omega = power_vector(&a)?;
    let s = compute_s(&a, &omega)?;
    let series = series_s(&a, &omega, 1e-13, 100_000)?;
    println!("omega* = {}", row(omega.iter()));
    println!("S =");
    for r in s.s.row_iter() {
        println!("  {}", row(r.iter()));
    }
    println!("max |S - series| = {:.1e}", max_abs((series - &s.s).iter()));

    let b = DVector::from_vec(vec![omega[1], -omega[0], 0.0]);
    let x = s.solve(&b, 0.0)?;
    let residual = (nalgebra::DMatrix::identity(3, 3) - a.matrix()) * &x - &b;
    println!("x = {}, residual {:.1e}", row(x.iter()), residual.amax());
    Ok(())
}
