//! End-to-end link: quantize, send the indices over the channel, rebuild,
//! and compare the measured MSE with the closed form.

use semvq::losses::train_codebook;
use semvq::pipeline::{generate_mixture, simulate_link, MixtureSpec};
use semvq::{ChannelSpec, LossWeights, TrainConfig};

fn main() -> semvq::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/demo.mix");
    let features = generate_mixture(&MixtureSpec::load(path, 0)?)?.features;
    let k = 16;
    let (codebook, _) = train_codebook(
        &features,
        k,
        &LossWeights::quantization_only(),
        &ChannelSpec::uniform(k, 0.0)?,
        &TrainConfig::default(),
    )?;

    for p in [0.0, 0.01, 0.05, 0.1] {
        for ch in [ChannelSpec::uniform(k, p)?, ChannelSpec::bsc(k, p)?] {
            let r = simulate_link(&features, &codebook, &ch, 200, 9)?;
            println!(
                "p = {p:<5} {:<14} mse {:.4} +/- {:.4}  closed form {:.4}  index errors {:.4}",
                format!("{:?}", r.confusion),
                r.mse_mean,
                r.ci95(),
                r.analytic_d_total,
                r.index_error_rate
            );
        }
    }
    Ok(())
}
