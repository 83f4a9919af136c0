use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semvq::pipeline::{self, KeyValues, RunConfig};

#[derive(Parser)]
#[command(name = "semvq", version, about = "Channel-aware vector quantization of semantic features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw features from a Gaussian mixture.
    Gen(Flags),
    /// Train a codebook.
    Train(Flags),
    /// Monte Carlo link simulation of a stored codebook.
    Simulate(Flags),
    /// Train one codebook per candidate size and pick the best.
    Sweep(Flags),
    /// Train and simulate the loss-weight variants side by side.
    Compare(Flags),
    /// Closed-form distortion and confusion matrix of a stored codebook.
    Analyze(Flags),
}

#[derive(Args)]
struct Flags {
    /// key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "mixture")]
    features: Option<String>,
    #[arg(long)]
    mixture: Option<String>,
    #[arg(long)]
    codebook: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, conflicts_with = "snr_db")]
    p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long = "mod", value_parser = ["4", "16", "64", "256"])]
    modulation: Option<String>,
    #[arg(long, value_parser = ["awgn", "rayleigh"])]
    fading: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated candidate codebook sizes.
    #[arg(long)]
    ks: Option<String>,
    /// Comma-separated flip probabilities for grids.
    #[arg(long)]
    ps: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["uniform", "exact"])]
    confusion: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl Flags {
    fn layer(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        let mut put = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                kv.push(key, v);
            }
        };
        put("features", self.features.clone());
        put("mixture", self.mixture.clone());
        put("codebook", self.codebook.clone());
        put("k", self.k.map(|v| v.to_string()));
        put("gamma", self.gamma.map(|v| v.to_string()));
        put("omega", self.omega.map(|v| v.to_string()));
        put("p", self.p.map(|v| v.to_string()));
        put("snr_db", self.snr_db.map(|v| v.to_string()));
        put("mod", self.modulation.clone());
        put("fading", self.fading.clone());
        put("lambda", self.lambda.map(|v| v.to_string()));
        put("ks", self.ks.clone());
        put("ps", self.ps.clone());
        put("trials", self.trials.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("confusion", self.confusion.clone());
        put("out", self.out.clone());
        kv
    }
}

fn run(command: &Command) -> semvq::Result<String> {
    let (Command::Gen(flags)
    | Command::Train(flags)
    | Command::Simulate(flags)
    | Command::Sweep(flags)
    | Command::Compare(flags)
    | Command::Analyze(flags)) = command;
    let cfg = RunConfig::from_layers(flags.config.as_deref(), &flags.layer())?;
    let out = cfg.out.display();
    Ok(match command {
        Command::Gen(_) => {
            let g = pipeline::run_gen(&cfg)?;
            format!("wrote {} vectors to {out}", g.features.labels.len())
        }
        Command::Train(_) => {
            let t = pipeline::run_train(&cfg)?;
            let last = t.report.last();
            format!(
                "K={} quantization_loss={} entropy_nats={} total_loss={} -> {out}",
                t.codebook.size(),
                last.quantization_loss,
                last.entropy_nats,
                last.total_loss
            )
        }
        Command::Simulate(_) => {
            let r = pipeline::run_simulate(&cfg)?;
            format!(
                "p={} mse={} +/- {} (analytic {}) index_error_rate={} -> {out}",
                r.p,
                r.mse_mean,
                r.ci95(),
                r.analytic_d_total,
                r.index_error_rate
            )
        }
        Command::Sweep(_) => {
            let s = pipeline::run_sweep(&cfg)?;
            format!("K*={} -> {out}", s.result.best_k)
        }
        Command::Compare(_) => {
            let c = pipeline::run_compare(&cfg)?;
            format!("{} rows -> {out}", c.rows.len())
        }
        Command::Analyze(_) => {
            let a = pipeline::run_analyze(&cfg)?;
            format!(
                "d_quant={} d_channel={} d_total={} -> {out}",
                a.distortion.d_quant, a.distortion.d_channel, a.distortion.d_total
            )
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}
