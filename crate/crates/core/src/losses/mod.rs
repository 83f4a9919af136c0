//! Codebook training objectives and their codeword gradients.
//!
//! The total objective combines three terms over a batch of `M` features:
//!
//! ```text
//! L = (1/M) sum_m ||z_m - c_q(z_m)||^2          quantization
//!   + omega * E_p[ P_e(p) sum_k pi_k D_k ]       channel-aware
//!   - gamma * H(pi)                               index entropy
//! ```
//!
//! where `D_k` is the mean squared distance from `c_k` to the other
//! codewords and `H` is the usage entropy in nats.
//!
//! Hard assignments are piecewise constant in the codewords, so the entropy
//! term is differentiated through soft assignments
//! `a_mk = softmax_k(-||z_m - c_k||^2 / tau)`, with `1 + ln pi_k` as the
//! upstream gradient. The quantization and channel terms use hard
//! assignments and treat `pi` as fixed within a step.

mod train;

pub use train::{train_codebook, EpochRecord, Init, TrainConfig, TrainReport, UpdateRule};

use serde::{Deserialize, Serialize};

use crate::analytics::weighted_spread;
use crate::channel::{index_error_probability, ChannelSpec};
use crate::codebook::{
    assign, empirical_entropy, entropy_nats, squared_distance, usage_frequencies, Codebook,
    FeatureSet, IndexSequence, UsageStats,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Entropy weight; 0 disables the regularizer.
    pub gamma: f64,
    /// Channel-aware weight; 0 disables the term.
    pub omega: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            omega: 0.1,
        }
    }
}

impl LossWeights {
    pub fn new(gamma: f64, omega: f64) -> Result<Self> {
        let w = Self { gamma, omega };
        w.validate()?;
        Ok(w)
    }

    pub fn quantization_only() -> Self {
        Self {
            gamma: 0.0,
            omega: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma", format!("{} must be >= 0", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.omega) {
            return Err(Error::invalid("omega", format!("{} not in [0, 1)", self.omega)));
        }
        Ok(())
    }
}

fn check_dims(features: &FeatureSet, codebook: &Codebook) -> Result<()> {
    if features.dim() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            got: features.dim(),
        });
    }
    Ok(())
}

fn hard_usage(features: &FeatureSet, codebook: &Codebook) -> Result<(f64, UsageStats)> {
    check_dims(features, codebook)?;
    let assigned = assign(features, codebook);
    let loss = assigned.iter().map(|&(_, d)| d).sum::<f64>() / features.len() as f64;
    let indices = IndexSequence::new(assigned.into_iter().map(|(k, _)| k).collect(), codebook.size())?;
    Ok((loss, usage_frequencies(&indices, codebook.size())?))
}

/// Mean squared error between each feature and its nearest codeword.
pub fn quantization_loss(features: &FeatureSet, codebook: &Codebook) -> Result<f64> {
    Ok(hard_usage(features, codebook)?.0)
}

/// Quantization loss minus `gamma` times the index entropy.
pub fn regularized_loss(features: &FeatureSet, codebook: &Codebook, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::invalid("gamma", format!("{gamma} must be >= 0")));
    }
    let (loss, stats) = hard_usage(features, codebook)?;
    Ok(loss - gamma * empirical_entropy(&stats))
}

/// Gradient of the negative entropy with respect to each frequency,
/// `1 + ln pi_k`. Unused codewords get `-inf`.
pub fn entropy_grad_wrt_pi(stats: &UsageStats) -> Vec<f64> {
    stats
        .frequencies()
        .iter()
        .map(|&pi| if pi > 0.0 { 1.0 + pi.ln() } else { f64::NEG_INFINITY })
        .collect()
}

/// `E_p[P_e(p)]` over the channel's operating points.
fn expected_index_error(codebook: &Codebook, ch: &ChannelSpec) -> Result<f64> {
    if ch.codebook_size() != codebook.size() {
        return Err(Error::invalid(
            "channel",
            format!("labels K = {}, codebook has {}", ch.codebook_size(), codebook.size()),
        ));
    }
    let points = ch.operating_points();
    if points.is_empty() {
        return Err(Error::invalid("p set", "empty"));
    }
    Ok(points
        .iter()
        .map(|wp| wp.weight * index_error_probability(ch.bits(), wp.p))
        .sum())
}

/// Channel-induced distortion averaged over the channel's operating points.
pub fn channel_loss(codebook: &Codebook, stats: &UsageStats, ch: &ChannelSpec) -> Result<f64> {
    let pe = expected_index_error(codebook, ch)?;
    Ok(pe * weighted_spread(codebook, stats)?)
}

/// Quantization loss plus `omega` times the channel loss minus `gamma` times
/// the index entropy, all with hard assignments.
pub fn total_codebook_loss(
    features: &FeatureSet,
    codebook: &Codebook,
    weights: &LossWeights,
    ch: &ChannelSpec,
) -> Result<f64> {
    let (quant, stats) = hard_usage(features, codebook)?;
    let chan = channel_loss(codebook, &stats, ch)?;
    Ok(quant + weights.omega * chan - weights.gamma * empirical_entropy(&stats))
}

fn softmax_row(z: &[f64], codebook: &Codebook, temperature: f64, out: &mut [f64]) {
    for (o, c) in out.iter_mut().zip(codebook.codewords()) {
        *o = -squared_distance(z, c) / temperature;
    }
    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Mean soft assignment per codeword at temperature `tau`.
pub fn soft_usage(features: &FeatureSet, codebook: &Codebook, temperature: f64) -> Result<Vec<f64>> {
    check_dims(features, codebook)?;
    let rows: Vec<&[f64]> = features.rows().collect();
    Ok(soft_usage_rows(&rows, codebook, temperature))
}

fn soft_usage_rows(rows: &[&[f64]], codebook: &Codebook, temperature: f64) -> Vec<f64> {
    let k = codebook.size();
    let mut pi = vec![0.0; k];
    let mut a = vec![0.0; k];
    for z in rows {
        softmax_row(z, codebook, temperature, &mut a);
        for (p, v) in pi.iter_mut().zip(&a) {
            *p += v;
        }
    }
    let m = rows.len() as f64;
    pi.iter_mut().for_each(|p| *p /= m);
    pi
}

/// Entropy (nats) of the soft usage at temperature `tau`.
pub fn soft_entropy(features: &FeatureSet, codebook: &Codebook, temperature: f64) -> Result<f64> {
    Ok(entropy_nats(&soft_usage(features, codebook, temperature)?))
}

/// Gradient of the total objective with respect to every codeword,
/// row-major `K x N`.
///
/// Quantization and channel terms hold the current hard assignments and
/// usage fixed; the entropy term flows through soft assignments at
/// `temperature`.
pub fn codeword_gradients(
    features: &FeatureSet,
    codebook: &Codebook,
    weights: &LossWeights,
    ch: &ChannelSpec,
    temperature: f64,
) -> Result<Vec<f64>> {
    check_dims(features, codebook)?;
    let rows: Vec<&[f64]> = features.rows().collect();
    gradients_on(&rows, codebook, weights, ch, temperature)
}

pub(crate) fn gradients_on(
    rows: &[&[f64]],
    codebook: &Codebook,
    weights: &LossWeights,
    ch: &ChannelSpec,
    temperature: f64,
) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature", format!("{temperature} must be > 0")));
    }
    let k = codebook.size();
    let n = codebook.dim();
    let m = rows.len() as f64;
    let mut grad = vec![0.0; k * n];

    let mut counts = vec![0u64; k];
    for z in rows {
        let (j, _) = codebook.nearest(z);
        counts[j] += 1;
        let c = codebook.codeword(j);
        for d in 0..n {
            grad[j * n + d] += 2.0 / m * (c[d] - z[d]);
        }
    }

    if weights.omega > 0.0 {
        let pi: Vec<f64> = counts.iter().map(|&c| c as f64 / m).collect();
        let scale = weights.omega * expected_index_error(codebook, ch)? * 2.0 / (k - 1) as f64;
        for j in 0..k {
            let cj = codebook.codeword(j);
            for l in (0..k).filter(|&l| l != j) {
                let cl = codebook.codeword(l);
                let w = scale * (pi[j] + pi[l]);
                for d in 0..n {
                    grad[j * n + d] += w * (cj[d] - cl[d]);
                }
            }
        }
    }

    if weights.gamma > 0.0 {
        let pi = soft_usage_rows(rows, codebook, temperature);
        let upstream: Vec<f64> = pi.iter().map(|&p| 1.0 + p.max(f64::MIN_POSITIVE).ln()).collect();
        let mut a = vec![0.0; k];
        let scale = weights.gamma / m * (-2.0 / temperature);
        for z in rows {
            softmax_row(z, codebook, temperature, &mut a);
            let mean_up: f64 = a.iter().zip(&upstream).map(|(a, g)| a * g).sum();
            for j in 0..k {
                let coef = scale * a[j] * (upstream[j] - mean_up);
                if coef == 0.0 {
                    continue;
                }
                let cj = codebook.codeword(j);
                for d in 0..n {
                    grad[j * n + d] += coef * (cj[d] - z[d]);
                }
            }
        }
    }

    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("codeword gradient"));
    }
    Ok(grad)
}
