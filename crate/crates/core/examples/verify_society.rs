//! Runs every invariant check on a planted society.

use famspec::generator::{plant_society, GeneratorParams};
use famspec::verify::{verify_society, VerifyOptions};

fn main() -> famspec::Result<()> {
    let params = GeneratorParams::new(&[3, 4, 5], 6, 0.01, 11);
    let society = plant_society(&params)?;
    let opts = VerifyOptions { tolerance: None, gamma_min: Some(params.gamma_min) };
    let report = verify_society(&society, &opts)?;
    for c in &report.checks {
        let tol = c.tolerance.map_or("info".to_string(), |t| format!("<= {t:.0e}"));
        println!("{} {:<48} {:>10.2e} {tol}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.residual);
    }
    println!("passed: {}", report.passed);
    Ok(())
}
