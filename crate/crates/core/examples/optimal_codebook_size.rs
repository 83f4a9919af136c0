//! Picks the codebook size minimizing distortion plus a per-bit price, for a
//! few prices and channel qualities.

use semvq::analytics::optimal_codebook_size;
use semvq::pipeline::{generate_mixture, MixtureSpec};
use semvq::{LossWeights, TrainConfig};

fn main() -> semvq::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/separated.mix");
    let features = generate_mixture(&MixtureSpec::load(path, 0)?)?.features;
    let candidates = [2, 4, 8, 16, 32];
    let weights = LossWeights::quantization_only();
    let config = TrainConfig::default();

    for (lambda, p) in [(0.0, 0.0), (0.0005, 0.0), (0.0005, 0.05), (1.0, 0.0)] {
        let sweep = optimal_codebook_size(&features, &candidates, p, lambda, &weights, &config)?;
        let objectives: Vec<String> = sweep.rows.iter().map(|r| format!("{}:{:.1}", r.k, r.objective)).collect();
        println!("lambda = {lambda:<6} p = {p:<5} K* = {:<3} [{}]", sweep.best_k, objectives.join(" "));
    }
    Ok(())
}
