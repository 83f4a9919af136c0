//! Trains the same codebook on a skewed mixture with and without the index
//! entropy bonus and prints the resulting index entropies.

use semvq::codebook::{empirical_entropy, quantize_batch, usage_frequencies};
use semvq::losses::train_codebook;
use semvq::pipeline::{generate_mixture, MixtureSpec};
use semvq::{ChannelSpec, LossWeights, TrainConfig};

fn main() -> semvq::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/skewed.mix");
    let features = generate_mixture(&MixtureSpec::load(path, 0)?)?.features;
    let k = 16;
    let ch = ChannelSpec::uniform(k, 0.0)?;
    let config = TrainConfig { temperature: 0.25, seed: 1, ..TrainConfig::default() };

    println!("ln K = {:.4} nats", (k as f64).ln());
    for gamma in [0.0, 0.1, 0.3] {
        let weights = LossWeights::new(gamma, 0.0)?;
        let (codebook, report) = train_codebook(&features, k, &weights, &ch, &config)?;
        let stats = usage_frequencies(&quantize_batch(&features, &codebook)?, k)?;
        println!(
            "gamma = {gamma:.1}: quantization loss {:.4}, index entropy {:.4} nats",
            report.last().quantization_loss,
            empirical_entropy(&stats)
        );
    }
    Ok(())
}
