//! First- and second-order eigenvalue predictions against the exact main
//! eigenvalues as epsilon halves.

use famspec::generator::{plant_society, recouple, GeneratorParams};
use famspec::perturbation::{compare_with_exact, perturbation_report};
use famspec::spectra::main_eigensystem;

fn main() -> famspec::Result<()> {
    let base = plant_society(&GeneratorParams::new(&[5, 6, 7], 12, 0.02, 5).hidden(false))?;
    let mut previous = None;
    println!("{:>7} {:>11} {:>11} {:>11} {:>7}", "eps", "first", "second", "V", "ratio");
    for eps in [0.04, 0.02, 0.01, 0.005, 0.0025] {
        let society = recouple(&base, eps)?;
        let gt = society.ground_truth.as_ref().unwrap();
        let report = perturbation_report(gt, eps)?;
        let exact = main_eigensystem(&society.a, gt.q())?;
        let c = compare_with_exact(&report.prediction, &exact)?;
        let ratio = previous.map_or(String::new(), |p: f64| format!("{:.2}", p / c.lambda_err_first));
        println!("{eps:>7} {:>11.3e} {:>11.3e} {:>11.3e} {ratio:>7}", c.lambda_err_first, c.lambda_err_second, c.v_err);
        previous = Some(c.lambda_err_first);
    }
    Ok(())
}
