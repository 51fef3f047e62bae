//! Recovers the families of a hidden-label society and scores the result
//! against the planted truth.

use famspec::generator::{plant_society, GeneratorParams};
use famspec::identify::{identify_families, match_to_ground_truth, LambdaChoice};
use famspec::spectra::QMethod;

fn main() -> famspec::Result<()> {
    let society = plant_society(&GeneratorParams::new(&[4, 5, 6, 5, 6], 24, 0.005, 42))?;
    let gt = society.ground_truth.as_ref().unwrap();
    for (name, choice) in [("diag(VU*)", LambdaChoice::Projector), ("diag(v2)", LambdaChoice::RightVector(2))] {
        let result = identify_families(&society.a, QMethod::Gap, choice)?;
        let m = match_to_ground_truth(&result.recovery, gt);
        println!(
            "{name:>10}: q = {}, upper-class accuracy {:.3}, max |J-check - J| {:.3e}, ties {}",
            result.recovery.q(),
            m.upper_accuracy,
            m.max_deviation,
            result.recovery.ties.len()
        );
    }
    let result = identify_families(&society.a, QMethod::Gap, LambdaChoice::Projector)?;
    for (k, members) in result.recovery.families().iter().enumerate() {
        let one_based: Vec<usize> = members.iter().map(|i| i + 1).collect();
        println!("family {}: {:?}", k + 1, one_based);
    }
    Ok(())
}
