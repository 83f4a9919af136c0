//! Trains the four loss-weight variants on the demo source and simulates
//! each over a range of flip probabilities, writing `compare.csv`.

use semvq::pipeline::{run_compare, KeyValues, RunConfig};

fn main() -> semvq::Result<()> {
    let out = std::env::temp_dir().join("semvq_ablation");
    let mut flags = KeyValues::default();
    flags.push("mixture", concat!(env!("CARGO_MANIFEST_DIR"), "/configs/demo.mix"));
    flags.push("k", "16");
    flags.push("gamma", "0.1");
    flags.push("omega", "0.1");
    flags.push("p", "0.05");
    flags.push("ps", "0,0.02,0.05,0.1");
    flags.push("trials", "200");
    flags.push("out", out.display().to_string());
    let cfg = RunConfig::from_layers(None, &flags)?;

    let report = run_compare(&cfg)?;
    println!("{:<14} {:>5} {:>10} {:>10} {:>8}", "variant", "p", "mse", "stderr", "H nats");
    for r in &report.rows {
        println!(
            "{:<14} {:>5} {:>10.4} {:>10.5} {:>8.4}",
            r.variant, r.p, r.mse_mean, r.mse_stderr, r.entropy_nats
        );
    }
    println!("wrote {}", out.join("compare.csv").display());
    Ok(())
}
