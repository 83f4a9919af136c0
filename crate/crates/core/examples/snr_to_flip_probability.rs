//! Uncoded bit-flip probability of square QAM over AWGN and Rayleigh fading.

use semvq::channel::{snr_to_flip_probability, Fading, Modulation};
use semvq::SnrSpec;

fn main() -> semvq::Result<()> {
    for fading in [Fading::Awgn, Fading::Rayleigh] {
        println!("{fading:?}");
        println!("{:>7} {:>12} {:>12} {:>12}", "SNR dB", "4-QAM", "16-QAM", "64-QAM");
        for snr_db in (0..=30).step_by(5) {
            let mut line = format!("{snr_db:>7}");
            for modulation in [Modulation::Qam4, Modulation::Qam16, Modulation::Qam64] {
                let p = snr_to_flip_probability(&SnrSpec { snr_db: snr_db as f64, modulation, fading })?;
                line.push_str(&format!(" {p:>12.3e}"));
            }
            println!("{line}");
        }
    }
    Ok(())
}
