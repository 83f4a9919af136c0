//! Closed-form distortion under index errors and the codebook-size sweep.
//!
//! With uniform index confusion, a codeword sent as `k` is received as some
//! other `l` with probability `P_e / (K - 1)`, which gives the expected
//! squared reconstruction jump
//!
//! ```text
//! D_ch = P_e * sum_k pi_k * mean_{l != k} ||c_k - c_l||^2
//! ```
//!
//! Adding the quantization error gives the total distortion `D_S(K, p)`.
//! The sweep trains one codebook per candidate `K` and picks the `K` that
//! minimizes `D_S(K, p) + lambda * M * log2(K)`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{bits_per_index, index_error_probability, ChannelSpec};
use crate::codebook::{
    assign, empirical_entropy, squared_distance, usage_frequencies, Codebook, FeatureSet,
    IndexSequence, UsageStats,
};
use crate::error::{Error, Result};
use crate::losses::{train_codebook, LossWeights, TrainConfig};
use crate::rng::derive_seed;

/// Mean squared distance from codeword `k` to every other codeword.
pub fn mean_pairwise_sq(codebook: &Codebook, k: usize) -> Result<f64> {
    let size = codebook.size();
    if k >= size {
        return Err(Error::IndexOutOfRange { index: k, k: size });
    }
    let ck = codebook.codeword(k);
    let sum: f64 = codebook
        .codewords()
        .enumerate()
        .filter(|&(l, _)| l != k)
        .map(|(_, cl)| squared_distance(ck, cl))
        .sum();
    Ok(sum / (size - 1) as f64)
}

/// Usage-weighted mean pairwise distance, `sum_k pi_k * mean_pairwise_sq(k)`.
pub(crate) fn weighted_spread(codebook: &Codebook, stats: &UsageStats) -> Result<f64> {
    if stats.codebook_size() != codebook.size() {
        return Err(Error::invalid(
            "usage stats",
            format!("{} entries for {} codewords", stats.codebook_size(), codebook.size()),
        ));
    }
    let mut acc = 0.0;
    for (k, &pi) in stats.frequencies().iter().enumerate() {
        if pi > 0.0 {
            acc += pi * mean_pairwise_sq(codebook, k)?;
        }
    }
    Ok(acc)
}

/// Expected squared codeword jump caused by index errors at flip
/// probability `p`.
pub fn channel_distortion(codebook: &Codebook, stats: &UsageStats, p: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::invalid("flip probability", format!("{p} not in [0, 0.5]")));
    }
    let pe = index_error_probability(bits_per_index(codebook.size())?, p);
    Ok(pe * weighted_spread(codebook, stats)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    pub d_quant: f64,
    pub d_channel: f64,
    pub d_total: f64,
    pub p: f64,
    #[serde(rename = "K")]
    pub k: usize,
    /// `M log2 K`.
    pub bit_rate: f64,
    /// `M ceil(log2 K)`, the bits actually sent.
    pub payload_bits: u64,
    pub entropy_nats: f64,
    pub entropy_bits: f64,
}

/// Quantization distortion plus channel distortion, with usage frequencies
/// measured on `features`.
pub fn total_semantic_distortion(
    features: &FeatureSet,
    codebook: &Codebook,
    p: f64,
) -> Result<DistortionReport> {
    if features.dim() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            got: features.dim(),
        });
    }
    let assigned = assign(features, codebook);
    let m = features.len();
    let d_quant = assigned.iter().map(|&(_, d)| d).sum::<f64>() / m as f64;
    let indices = IndexSequence::new(assigned.into_iter().map(|(k, _)| k).collect(), codebook.size())?;
    let stats = usage_frequencies(&indices, codebook.size())?;
    let d_channel = channel_distortion(codebook, &stats, p)?;
    let entropy_nats = empirical_entropy(&stats);
    Ok(DistortionReport {
        d_quant,
        d_channel,
        d_total: d_quant + d_channel,
        p,
        k: codebook.size(),
        bit_rate: bit_rate(codebook.size(), m),
        payload_bits: payload_bits(codebook.size(), m),
        entropy_nats,
        entropy_bits: crate::codebook::nats_to_bits(entropy_nats),
    })
}

/// Real-valued total rate `M log2 K` in bits.
pub fn bit_rate(k: usize, m: usize) -> f64 {
    debug_assert!(k >= 2 && m >= 1);
    m as f64 * (k as f64).log2()
}

/// Transmitted payload `M ceil(log2 K)` in bits.
pub fn payload_bits(k: usize, m: usize) -> u64 {
    m as u64 * bits_per_index(k).map_or(0, u64::from)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub d_quant: f64,
    pub d_channel: f64,
    pub d_total: f64,
    pub rate_real: f64,
    pub rate_payload: u64,
    pub objective: f64,
}

impl SweepRow {
    pub fn evaluate(features: &FeatureSet, codebook: &Codebook, p: f64, lambda: f64) -> Result<Self> {
        let report = total_semantic_distortion(features, codebook, p)?;
        Ok(Self {
            k: codebook.size(),
            d_quant: report.d_quant,
            d_channel: report.d_channel,
            d_total: report.d_total,
            rate_real: report.bit_rate,
            rate_payload: report.payload_bits,
            objective: report.d_total + lambda * report.bit_rate,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub p: f64,
    pub lambda: f64,
    pub rows: Vec<SweepRow>,
    #[serde(rename = "K_star")]
    pub best_k: usize,
    /// Trained codebook per row, in row order.
    #[serde(skip)]
    pub codebooks: Vec<Codebook>,
}

impl SweepResult {
    /// Writes rows with header
    /// `K,d_quant,d_channel,d_total,rate_real,rate_payload,objective`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Row with the smallest objective; the smallest `K` wins ties.
pub fn select_optimal(rows: &[SweepRow]) -> Option<usize> {
    rows.iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.k.cmp(&b.k)))
        .map(|r| r.k)
}

pub(crate) fn validate_candidates(candidates: &[usize], m: usize) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate K list", "empty"));
    }
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    if ks.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("candidate K list", "duplicate entries"));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k < 2 || k > m) {
        return Err(Error::invalid(
            "candidate K list",
            format!("K = {bad} outside [2, M = {m}]"),
        ));
    }
    Ok(ks)
}

/// Trains one codebook per candidate `K` and picks the best by
/// `D_S(K, p) + lambda * R(K)`.
///
/// Each leg trains on the same data with the same configuration; its seed is
/// derived from `config.seed` and `K`. Legs run in parallel and rows come
/// back sorted by `K`.
pub fn optimal_codebook_size(
    features: &FeatureSet,
    candidates: &[usize],
    p: f64,
    lambda: f64,
    weights: &LossWeights,
    config: &TrainConfig,
) -> Result<SweepResult> {
    let ks = validate_candidates(candidates, features.len())?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda", format!("{lambda} must be >= 0")));
    }
    let legs: Vec<(SweepRow, Codebook)> = ks
        .par_iter()
        .map(|&k| {
            let ch = ChannelSpec::uniform(k, p)?;
            let leg = TrainConfig {
                seed: derive_seed(config.seed, "sweep", k as u64),
                ..config.clone()
            };
            let (codebook, _) = train_codebook(features, k, weights, &ch, &leg)?;
            let row = SweepRow::evaluate(features, &codebook, p, lambda)?;
            Ok((row, codebook))
        })
        .collect::<Result<_>>()?;
    let (rows, codebooks): (Vec<_>, Vec<_>) = legs.into_iter().unzip();
    let best_k = select_optimal(&rows).expect("at least one candidate");
    Ok(SweepResult {
        p,
        lambda,
        rows,
        best_k,
        codebooks,
    })
}
