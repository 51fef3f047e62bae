//! Spectrum of a planted society and the eigenvalue-gap estimate of q.

use famspec::generator::{plant_society, GeneratorParams};
use famspec::spectra::{analyze, detect_q, QMethod};

fn main() -> famspec::Result<()> {
    let society = plant_society(&GeneratorParams::new(&[6, 8, 10], 10, 0.01, 3))?;
    let (eigs, eig) = analyze(&society.a, QMethod::Gap)?;
    println!("closest eigenvalues to 1:");
    for z in eigs.iter().take(6) {
        println!("  {:+.6} {:+.6}i   |1 - z| = {:.4}", z.re, z.im, (1.0 - z).norm());
    }
    println!("gap rule: q = {}", eig.q());
    println!("threshold 0.1: q = {}", detect_q(&eigs, QMethod::Threshold(0.1))?);
    let (right, left) = eig.residuals(society.a.matrix());
    println!("residuals: right {right:.1e}, left {left:.1e}");
    Ok(())
}
