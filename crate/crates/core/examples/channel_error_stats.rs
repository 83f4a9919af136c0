//! Sends a block of indices through the bit-flip channel and compares the
//! observed index-error rate with `1 - (1 - p)^L`.

use semvq::channel::{bits_per_index, index_error_probability, transmit_indices};
use semvq::{ChannelSpec, IndexSequence};

fn main() -> semvq::Result<()> {
    let n = 200_000;
    println!("{:>4} {:>6} {:>10} {:>10}", "K", "p", "observed", "expected");
    for k in [2usize, 16, 256] {
        let sent = IndexSequence::new((0..n).map(|i| i % k).collect(), k)?;
        for p in [0.01, 0.05, 0.1] {
            let ch = ChannelSpec::bsc(k, p)?;
            let received = transmit_indices(&sent, &ch, 42)?;
            let wrong = sent.indices().iter().zip(received.indices()).filter(|(a, b)| a != b).count();
            println!(
                "{k:>4} {p:>6} {:>10.5} {:>10.5}",
                wrong as f64 / n as f64,
                index_error_probability(bits_per_index(k)?, p)
            );
        }
    }
    Ok(())
}
