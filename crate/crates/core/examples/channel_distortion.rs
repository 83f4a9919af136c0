//! Closed-form distortion budget of a Lloyd-trained codebook as the channel
//! degrades.

use semvq::analytics::total_semantic_distortion;
use semvq::losses::{train_codebook, UpdateRule};
use semvq::pipeline::{generate_mixture, MixtureSpec};
use semvq::{ChannelSpec, LossWeights, TrainConfig};

fn main() -> semvq::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/symmetric.mix");
    let features = generate_mixture(&MixtureSpec::load(path, 0)?)?.features;
    let config = TrainConfig { update: UpdateRule::Lloyd, ..TrainConfig::default() };
    let (codebook, _) =
        train_codebook(&features, 8, &LossWeights::quantization_only(), &ChannelSpec::uniform(8, 0.0)?, &config)?;

    println!("{:>6} {:>10} {:>10} {:>10}", "p", "D_quant", "D_channel", "D_total");
    for p in [0.0, 0.001, 0.01, 0.05, 0.1, 0.2, 0.5] {
        let r = total_semantic_distortion(&features, &codebook, p)?;
        println!("{p:>6} {:>10.4} {:>10.4} {:>10.4}", r.d_quant, r.d_channel, r.d_total);
    }
    Ok(())
}
