//! Orchestration behind the `semvq` binary: feature ingestion, training,
//! link simulation, codebook-size sweeps, ablation comparisons and report
//! files.
//!
//! Every run takes a [`RunConfig`] and writes its artifacts into
//! `RunConfig::out`:
//!
//! | run        | files                                                         |
//! |------------|---------------------------------------------------------------|
//! | `gen`      | `features.semf`, `labels.csv`                                 |
//! | `train`    | `codebook.semc`, `train_report.csv`, `train_report.json`      |
//! | `simulate` | `link_sim.csv`, `link_sim.json`                               |
//! | `sweep`    | `sweep.csv`, `sweep.json`, `sweep_grid.csv` (with `ps`)       |
//! | `compare`  | `compare.csv`, `compare.json`                                 |
//! | `analyze`  | `analysis.json`, `confusion.csv`                              |
//!
//! Floats are written in shortest round-trip form, and all randomness
//! derives from `RunConfig::seed`, so a rerun reproduces every file byte for
//! byte.

mod config;
mod mixture;

pub use config::{ChannelSetting, FeatureSource, KeyValues, RunConfig, Variant};
pub use mixture::{generate_mixture, LabeledFeatures, MixtureComponent, MixtureSpec};

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{optimal_codebook_size, total_semantic_distortion, DistortionReport, SweepResult, SweepRow};
use crate::channel::{
    bits_per_index, index_error_probability, write_confusion_csv, BitLabeling, ChannelSpec,
    ConfusionModel,
};
use crate::codebook::{
    assign, empirical_entropy, nats_to_bits, squared_distance, usage_frequencies, Codebook,
    FeatureSet, IndexSequence,
};
use crate::error::{Error, Result};
use crate::losses::{train_codebook, LossWeights, TrainConfig, TrainReport};
use crate::rng::derive_seed;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Loads or generates the configured feature set.
pub fn load_features(cfg: &RunConfig) -> Result<LoadedFeatures> {
    match &cfg.source {
        Some(FeatureSource::File(path)) => Ok(LoadedFeatures {
            features: FeatureSet::load(path)?,
            labels: None,
        }),
        Some(FeatureSource::Mixture(path)) => {
            let out = generate_mixture(&MixtureSpec::load(path, cfg.seed)?)?;
            Ok(LoadedFeatures {
                features: out.features,
                labels: Some(out.labels),
            })
        }
        None => Err(Error::invalid("feature source", "need --features or --mixture")),
    }
}

/// Features with ground-truth component labels when they came from a mixture.
#[derive(Debug, Clone)]
pub struct LoadedFeatures {
    pub features: FeatureSet,
    pub labels: Option<Vec<usize>>,
}

/// Channel for codebook size `k` at flip probability `p`, using the
/// configured confusion model and labeling.
pub fn channel_for(cfg: &RunConfig, k: usize, p: f64) -> Result<ChannelSpec> {
    ChannelSpec::new(p, cfg.confusion, BitLabeling::new(k, cfg.labeling)?)
}

fn load_codebook(cfg: &RunConfig) -> Result<Codebook> {
    match &cfg.codebook {
        Some(path) => Codebook::load(path),
        None => Err(Error::invalid("codebook", "need --codebook")),
    }
}

/// Description of the channel operating point, echoed into reports.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelEcho {
    pub p: f64,
    pub setting: ChannelSetting,
    pub confusion: ConfusionModel,
}

fn channel_echo(cfg: &RunConfig) -> Result<ChannelEcho> {
    Ok(ChannelEcho {
        p: cfg.flip_probability()?,
        setting: cfg.channel,
        confusion: cfg.confusion,
    })
}

#[derive(Debug, Clone)]
pub struct GenOutput {
    pub features: LabeledFeatures,
    pub files: Vec<PathBuf>,
}

/// Draws the configured mixture and writes `features.semf` and `labels.csv`.
pub fn run_gen(cfg: &RunConfig) -> Result<GenOutput> {
    let Some(FeatureSource::Mixture(path)) = &cfg.source else {
        return Err(Error::invalid("feature source", "gen needs --mixture"));
    };
    let features = generate_mixture(&MixtureSpec::load(path, cfg.seed)?)?;
    fs::create_dir_all(&cfg.out)?;
    features.features.save(cfg.out.join("features.semf"))?;
    features.write_labels_csv(create(&cfg.out, "labels.csv")?)?;
    Ok(GenOutput {
        features,
        files: vec![cfg.out.join("features.semf"), cfg.out.join("labels.csv")],
    })
}

#[derive(Debug, Clone, Serialize)]
struct TrainHeader<'a> {
    #[serde(rename = "K")]
    k: usize,
    weights: LossWeights,
    channel: ChannelEcho,
    train: &'a TrainConfig,
    features: &'a str,
    samples: usize,
    dim: usize,
}

#[derive(Debug, Clone, Serialize)]
struct TrainJson<'a> {
    config: TrainHeader<'a>,
    records: &'a TrainReport,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// The codebook exactly as stored in `codebook.semc`.
    pub codebook: Codebook,
    pub report: TrainReport,
}

/// Trains one codebook and writes it with its per-epoch report.
///
/// The CSV report starts with a `#` line echoing `K`, the loss weights and
/// the channel, followed by the column header.
pub fn run_train(cfg: &RunConfig) -> Result<TrainOutput> {
    let data = load_features(cfg)?;
    let p = cfg.flip_probability()?;
    let ch = channel_for(cfg, cfg.k, p)?;
    let train = cfg.train_config();
    let (codebook, report) = train_codebook(&data.features, cfg.k, &cfg.weights, &ch, &train)?;
    let codebook = codebook.to_f32_precision();

    fs::create_dir_all(&cfg.out)?;
    codebook.save(cfg.out.join("codebook.semc"))?;
    let mut csv_out = create(&cfg.out, "train_report.csv")?;
    writeln!(
        csv_out,
        "# K={} gamma={} omega={} p={} epochs={} step_size={} batch_size={} temperature={} seed={}",
        cfg.k,
        cfg.weights.gamma,
        cfg.weights.omega,
        p,
        train.epochs,
        train.step_size,
        train.batch_size,
        train.temperature,
        train.seed
    )?;
    report.write_csv(&mut csv_out)?;
    let header = TrainHeader {
        k: cfg.k,
        weights: cfg.weights,
        channel: channel_echo(cfg)?,
        train: &train,
        features: data.features.source_tag(),
        samples: data.features.len(),
        dim: data.features.dim(),
    };
    write_json(&cfg.out, "train_report.json", &TrainJson { config: header, records: &report })?;
    Ok(TrainOutput { codebook, report })
}

/// Aggregate of a Monte Carlo link simulation.
///
/// One trial sends every feature's index through the channel once;
/// `mse_mean` averages the per-trial mean squared reconstruction errors and
/// `mse_stderr` is their standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSimReport {
    pub p: f64,
    pub confusion: ConfusionModel,
    #[serde(rename = "K")]
    pub k: usize,
    pub trials: usize,
    pub symbols: u64,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub index_error_rate: f64,
    pub analytic_pe: f64,
    pub d_quant: f64,
    /// Channel distortion under uniform confusion.
    pub analytic_d_channel: f64,
    pub analytic_d_total: f64,
    pub entropy_nats: f64,
    pub entropy_bits: f64,
}

impl LinkSimReport {
    /// Half-width of the normal-approximation 95% interval on `mse_mean`.
    pub fn ci95(&self) -> f64 {
        1.96 * self.mse_stderr
    }
}

/// Quantize, transmit, reconstruct, repeated `trials` times.
///
/// Trial `t` draws its channel noise from `derive_seed(seed, "simulate", t)`,
/// so runs on the same seed share noise realizations.
pub fn simulate_link(
    features: &FeatureSet,
    codebook: &Codebook,
    ch: &ChannelSpec,
    trials: usize,
    seed: u64,
) -> Result<LinkSimReport> {
    if features.dim() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            got: features.dim(),
        });
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let k = codebook.size();
    let m = features.len();
    let assigned = assign(features, codebook);
    let sent = IndexSequence::new(assigned.iter().map(|&(j, _)| j).collect(), k)?;
    // error[m * K + j] = ||z_m - c_j||^2
    let error: Vec<f64> = features
        .as_flat()
        .par_chunks_exact(features.dim())
        .flat_map_iter(|z| codebook.codewords().map(move |c| squared_distance(z, c)))
        .collect();

    let per_trial: Vec<(f64, u64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let received = crate::channel::transmit_indices(&sent, ch, derive_seed(seed, "simulate", t as u64))?;
            let mut sum = 0.0;
            let mut wrong = 0u64;
            for (row, (&s, &r)) in sent.indices().iter().zip(received.indices()).enumerate() {
                sum += error[row * k + r];
                wrong += u64::from(s != r);
            }
            Ok((sum / m as f64, wrong))
        })
        .collect::<Result<_>>()?;

    let n = trials as f64;
    let mse_mean = per_trial.iter().map(|&(v, _)| v).sum::<f64>() / n;
    let mse_stderr = if trials > 1 {
        // Shifted by the first trial so identical trials give exactly zero.
        let shift = per_trial[0].0;
        let mean_shifted = per_trial.iter().map(|&(v, _)| v - shift).sum::<f64>() / n;
        let var = per_trial.iter().map(|&(v, _)| (v - shift - mean_shifted).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let symbols = (trials * m) as u64;
    let wrong: u64 = per_trial.iter().map(|&(_, w)| w).sum();
    let distortion = total_semantic_distortion(features, codebook, ch.p())?;
    let stats = usage_frequencies(&sent, k)?;
    let entropy = empirical_entropy(&stats);
    Ok(LinkSimReport {
        p: ch.p(),
        confusion: ch.model(),
        k,
        trials,
        symbols,
        mse_mean,
        mse_stderr,
        index_error_rate: wrong as f64 / symbols as f64,
        analytic_pe: index_error_probability(bits_per_index(k)?, ch.p()),
        d_quant: distortion.d_quant,
        analytic_d_channel: distortion.d_channel,
        analytic_d_total: distortion.d_total,
        entropy_nats: entropy,
        entropy_bits: nats_to_bits(entropy),
    })
}

fn write_single_row_csv<T: Serialize>(dir: &Path, name: &str, row: &T) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(dir, name)?);
    out.serialize(row)?;
    out.flush()?;
    Ok(())
}

/// Simulates the configured codebook over the configured channel.
pub fn run_simulate(cfg: &RunConfig) -> Result<LinkSimReport> {
    let codebook = load_codebook(cfg)?;
    let data = load_features(cfg)?;
    let ch = channel_for(cfg, codebook.size(), cfg.flip_probability()?)?;
    let report = simulate_link(&data.features, &codebook, &ch, cfg.trials, cfg.seed)?;
    write_single_row_csv(&cfg.out, "link_sim.csv", &report)?;
    write_json(&cfg.out, "link_sim.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub p: f64,
    pub d_quant: f64,
    pub d_channel: f64,
    pub d_total: f64,
    pub rate_real: f64,
    pub rate_payload: u64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub result: SweepResult,
    /// Every trained codebook evaluated at every grid `p` (only when a
    /// `ps` list is configured).
    pub grid: Vec<GridRow>,
}

/// Sweeps the candidate codebook sizes and writes the rows, the chosen `K`,
/// and the optional `(K, p)` grid.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutput> {
    let data = load_features(cfg)?;
    let p = cfg.flip_probability()?;
    let result = optimal_codebook_size(&data.features, &cfg.ks, p, cfg.lambda, &cfg.weights, &cfg.train_config())?;
    result.write_csv(create(&cfg.out, "sweep.csv")?)?;
    write_json(&cfg.out, "sweep.json", &result)?;

    let mut grid = Vec::new();
    if !cfg.p_grid.is_empty() {
        for codebook in &result.codebooks {
            for &q in &cfg.p_grid {
                let row = SweepRow::evaluate(&data.features, codebook, q, cfg.lambda)?;
                grid.push(GridRow {
                    k: row.k,
                    p: q,
                    d_quant: row.d_quant,
                    d_channel: row.d_channel,
                    d_total: row.d_total,
                    rate_real: row.rate_real,
                    rate_payload: row.rate_payload,
                    objective: row.objective,
                });
            }
        }
        let mut out = csv::Writer::from_writer(create(&cfg.out, "sweep_grid.csv")?);
        for row in &grid {
            out.serialize(row)?;
        }
        out.flush()?;
    }
    Ok(SweepOutput { result, grid })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub variant: String,
    pub gamma: f64,
    pub omega: f64,
    pub p: f64,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub entropy_nats: f64,
    pub entropy_bits: f64,
    pub index_error_rate: f64,
    pub analytic_d_total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub train_p: f64,
    pub trials: usize,
    pub rows: Vec<CompareRow>,
    #[serde(skip)]
    pub codebooks: Vec<(String, Codebook)>,
}

impl CompareReport {
    pub fn row(&self, variant: &str, p: f64) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.variant == variant && r.p == p)
    }
}

/// Trains each loss-weight variant on the same data and seed, then simulates
/// every codebook over the evaluation grid with shared channel noise.
pub fn run_compare(cfg: &RunConfig) -> Result<CompareReport> {
    let variants = cfg.variant_list()?;
    let data = load_features(cfg)?;
    let train_p = cfg.flip_probability()?;
    let ps = cfg.evaluation_ps()?;
    let train = cfg.train_config();
    let trained: Vec<(String, LossWeights, Codebook)> = variants
        .par_iter()
        .map(|v| {
            let ch = channel_for(cfg, cfg.k, train_p)?;
            let (codebook, _) = train_codebook(&data.features, cfg.k, &v.weights, &ch, &train)?;
            Ok((v.name.clone(), v.weights, codebook.to_f32_precision()))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(trained.len() * ps.len());
    for (name, weights, codebook) in &trained {
        for &p in &ps {
            let ch = channel_for(cfg, cfg.k, p)?;
            let sim = simulate_link(&data.features, codebook, &ch, cfg.trials, cfg.seed)?;
            rows.push(CompareRow {
                variant: name.clone(),
                gamma: weights.gamma,
                omega: weights.omega,
                p,
                mse_mean: sim.mse_mean,
                mse_stderr: sim.mse_stderr,
                entropy_nats: sim.entropy_nats,
                entropy_bits: sim.entropy_bits,
                index_error_rate: sim.index_error_rate,
                analytic_d_total: sim.analytic_d_total,
            });
        }
    }
    let report = CompareReport {
        k: cfg.k,
        train_p,
        trials: cfg.trials,
        rows,
        codebooks: trained.into_iter().map(|(n, _, c)| (n, c)).collect(),
    };
    let mut out = csv::Writer::from_writer(create(&cfg.out, "compare.csv")?);
    for row in &report.rows {
        out.serialize(row)?;
    }
    out.flush()?;
    write_json(&cfg.out, "compare.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub channel: ChannelEcho,
    pub analytic_pe: f64,
    pub distortion: DistortionReport,
}

/// Closed-form distortion of a stored codebook on the configured features,
/// plus the channel's confusion matrix.
pub fn run_analyze(cfg: &RunConfig) -> Result<AnalysisReport> {
    let codebook = load_codebook(cfg)?;
    let data = load_features(cfg)?;
    let p = cfg.flip_probability()?;
    let ch = channel_for(cfg, codebook.size(), p)?;
    let report = AnalysisReport {
        channel: channel_echo(cfg)?,
        analytic_pe: ch.index_error_probability(),
        distortion: total_semantic_distortion(&data.features, &codebook, p)?,
    };
    write_json(&cfg.out, "analysis.json", &report)?;
    let mut w = create(&cfg.out, "confusion.csv")?;
    write_confusion_csv(&mut w, &ch)?;
    w.flush()?;
    Ok(report)
}
