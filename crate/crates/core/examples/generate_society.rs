//! Plants a five-family society and writes it to a directory.
//!
//! cargo run --example generate_society -- [OUT_DIR]

use famspec::generator::{plant, GeneratorParams};
use famspec::io::write_society;

fn main() -> famspec::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "society".into());
    let planted = plant(&GeneratorParams::new(&[4, 5, 6, 5, 6], 24, 0.01, 42))?;
    let manifest = write_society(out.as_ref(), &planted.society, Some(&planted))?;
    let gt = planted.society.ground_truth.as_ref().unwrap();
    println!("n = {}, q = {}, coupling draws = {}", manifest.n, gt.q(), planted.coupling_draws);
    println!("family labels (0 = low class): {:?}", manifest.family_labels.unwrap());
    println!("written to {out}/");
    Ok(())
}
