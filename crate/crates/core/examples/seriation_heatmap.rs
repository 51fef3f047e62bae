//! Seriates a recovered society and writes heatmaps before and after.
//!
//! cargo run --example seriation_heatmap -- [OUT_DIR]

use std::path::PathBuf;

use famspec::generator::{plant_society, GeneratorParams};
use famspec::identify::{identify_families, LambdaChoice};
use famspec::ordering::{block_contrast, family_labels, seriate};
use famspec::render::{heatmap_svg, ColorScale, RenderSpec};
use famspec::spectra::QMethod;

fn main() -> famspec::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&out).expect("output directory");
    let society = plant_society(&GeneratorParams::new(&[4, 5, 6, 5, 6], 24, 0.005, 42))?;
    let gt = society.ground_truth.as_ref().unwrap();
    let result = identify_families(&society.a, QMethod::Gap, LambdaChoice::Projector)?;
    let plan = seriate(&result.recovery.j_check, &result.recovery.assignment)?;

    let chain: Vec<usize> = plan.family_chain.iter().map(|f| f + 1).collect();
    println!("family chain {chain:?}");
    let contrast = block_contrast(gt.a_hat.matrix(), &plan.person_order, &family_labels(&gt.structure));
    println!("block contrast of the dominated matrix along the order: {contrast:.2}");

    let scale = ColorScale::Range { min: 0.0, max: 0.08 };
    let raw = RenderSpec { scale, permutation: None, blocks: Vec::new() };
    let sorted = RenderSpec { scale, permutation: Some(plan.person_order.clone()), blocks: Vec::new() };
    std::fs::write(out.join("before.svg"), heatmap_svg(society.a.matrix(), &raw)?).expect("write");
    std::fs::write(out.join("after.svg"), heatmap_svg(society.a.matrix(), &sorted)?).expect("write");
    println!("wrote {}/before.svg and after.svg", out.display());
    Ok(())
}
