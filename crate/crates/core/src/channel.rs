//! Bit labeling of indices and the memoryless binary symmetric channel.
//!
//! Each index in `[0, K)` is carried by an `L = ceil(log2 K)` bit pattern.
//! Bits flip independently with probability `p`, so the number of flipped
//! bits is `Binomial(L, p)` and an index is received wrong with probability
//! `P_e = 1 - (1 - p)^L`.
//!
//! Two confusion models are offered:
//!
//! - [`ConfusionModel::UniformApprox`]: a corrupted index is equally likely
//!   to be any of the other `K - 1` indices. For `K = 2^L` this is what a
//!   bit labeling drawn uniformly at random per symbol produces.
//! - [`ConfusionModel::ExactBsc`]: the fixed [`BitLabeling`] of the channel
//!   is used, and the confusion probability depends on Hamming distances.
//!
//! When `K < 2^L` some received patterns label no index. They decode to the
//! valid label at minimum Hamming distance, smallest index on ties.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::factorial::binomial;

use crate::codebook::IndexSequence;
use crate::error::{Error, Result};
use crate::rng::PositionalRng;

/// Smallest `L` with `2^L >= K`.
pub fn bits_per_index(k: usize) -> Result<u32> {
    if k < 2 {
        return Err(Error::invalid("codebook size", format!("{k} < 2")));
    }
    Ok(usize::BITS - (k - 1).leading_zeros())
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::invalid("flip probability", format!("{p} not in [0, 0.5]")));
    }
    Ok(())
}

/// Probability that exactly `w` of `L` bits flip.
pub fn error_weight_pmf(l: u32, p: f64, w: u32) -> Result<f64> {
    check_p(p)?;
    if w > l {
        return Err(Error::invalid("error weight", format!("{w} > L = {l}")));
    }
    Ok(binomial(l as u64, w as u64) * p.powi(w as i32) * (1.0 - p).powi((l - w) as i32))
}

/// Probability that at least one of `L` bits flips.
pub fn index_error_probability(l: u32, p: f64) -> f64 {
    1.0 - (1.0 - p).powi(l as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelingScheme {
    /// Index `k` is sent as the binary expansion of `k`.
    NaturalBinary,
    /// Indices get the labels `0..K` in a seeded random order.
    RandomPermutation { seed: u64 },
}

/// Injective map from indices to `L`-bit patterns, with the decoding table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitLabeling {
    bits: u32,
    scheme: LabelingScheme,
    labels: Vec<u32>,
    decode: Vec<usize>,
}

impl BitLabeling {
    pub fn new(k: usize, scheme: LabelingScheme) -> Result<Self> {
        let bits = bits_per_index(k)?;
        if bits > 24 {
            return Err(Error::invalid("codebook size", format!("{k} needs more than 24 bits")));
        }
        let mut labels: Vec<u32> = (0..k as u32).collect();
        if let LabelingScheme::RandomPermutation { seed } = scheme {
            labels.shuffle(&mut crate::rng::stream_rng(seed, "labeling", k as u64));
        }
        let decode = decode_table(&labels, bits);
        Ok(Self {
            bits,
            scheme,
            labels,
            decode,
        })
    }

    pub fn natural(k: usize) -> Result<Self> {
        Self::new(k, LabelingScheme::NaturalBinary)
    }

    pub fn codebook_size(&self) -> usize {
        self.labels.len()
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn scheme(&self) -> LabelingScheme {
        self.scheme
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Index for a received pattern; invalid patterns resolve to the nearest
    /// valid label.
    pub fn decode(&self, pattern: u32) -> usize {
        self.decode[pattern as usize]
    }
}

fn nearest_label(labels: &[u32], pattern: u32) -> usize {
    let mut best = 0;
    let mut best_d = u32::MAX;
    for (i, &l) in labels.iter().enumerate() {
        let d = (l ^ pattern).count_ones();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn decode_table(labels: &[u32], bits: u32) -> Vec<usize> {
    let mut table = vec![usize::MAX; 1 << bits];
    for (i, &l) in labels.iter().enumerate() {
        table[l as usize] = i;
    }
    for (pattern, slot) in table.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = nearest_label(labels, pattern as u32);
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfusionModel {
    UniformApprox,
    ExactBsc,
}

/// One operating point of a weighted set of flip probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedP {
    pub p: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    p: f64,
    model: ConfusionModel,
    labeling: BitLabeling,
    points: Vec<WeightedP>,
}

impl ChannelSpec {
    pub fn new(p: f64, model: ConfusionModel, labeling: BitLabeling) -> Result<Self> {
        check_p(p)?;
        Ok(Self {
            p,
            model,
            labeling,
            points: vec![WeightedP { p, weight: 1.0 }],
        })
    }

    /// Uniform confusion over a natural labeling.
    pub fn uniform(k: usize, p: f64) -> Result<Self> {
        Self::new(p, ConfusionModel::UniformApprox, BitLabeling::natural(k)?)
    }

    /// Exact BSC over a natural labeling.
    pub fn bsc(k: usize, p: f64) -> Result<Self> {
        Self::new(p, ConfusionModel::ExactBsc, BitLabeling::natural(k)?)
    }

    /// Replaces the single operating point with a weighted set used to
    /// average the channel loss. Weights must sum to 1.
    pub fn with_p_set(mut self, points: Vec<WeightedP>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("p set", "empty"));
        }
        for wp in &points {
            check_p(wp.p)?;
            if !(wp.weight >= 0.0) {
                return Err(Error::invalid("p set", "negative weight"));
            }
        }
        let total: f64 = points.iter().map(|wp| wp.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("p set", format!("weights sum to {total}")));
        }
        self.points = points;
        Ok(self)
    }

    /// Same model and labeling at another flip probability.
    pub fn at_p(&self, p: f64) -> Result<Self> {
        Self::new(p, self.model, self.labeling.clone())
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn model(&self) -> ConfusionModel {
        self.model
    }

    pub fn labeling(&self) -> &BitLabeling {
        &self.labeling
    }

    pub fn codebook_size(&self) -> usize {
        self.labeling.codebook_size()
    }

    pub fn bits(&self) -> u32 {
        self.labeling.bits()
    }

    pub fn operating_points(&self) -> &[WeightedP] {
        &self.points
    }

    pub fn index_error_probability(&self) -> f64 {
        index_error_probability(self.bits(), self.p)
    }
}

/// `Pr(received = to | sent = from)`.
pub fn confusion_probability(from: usize, to: usize, ch: &ChannelSpec) -> Result<f64> {
    let k = ch.codebook_size();
    for index in [from, to] {
        if index >= k {
            return Err(Error::IndexOutOfRange { index, k });
        }
    }
    let pe = ch.index_error_probability();
    Ok(match ch.model {
        ConfusionModel::UniformApprox if from == to => 1.0 - pe,
        ConfusionModel::UniformApprox => pe / (k - 1) as f64,
        ConfusionModel::ExactBsc => {
            let lab = &ch.labeling;
            let l = lab.bits() as i32;
            let sent = lab.label(from);
            let p = ch.p;
            (0..1u32 << lab.bits())
                .filter(|&r| lab.decode(r) == to)
                .map(|r| {
                    let d = (sent ^ r).count_ones() as i32;
                    p.powi(d) * (1.0 - p).powi(l - d)
                })
                .sum()
        }
    })
}

/// Full `K x K` confusion matrix, rows indexed by the sent index.
pub fn confusion_matrix(ch: &ChannelSpec) -> Vec<Vec<f64>> {
    let k = ch.codebook_size();
    (0..k)
        .map(|from| {
            (0..k)
                .map(|to| confusion_probability(from, to, ch).expect("indices in range"))
                .collect()
        })
        .collect()
}

/// Writes the confusion matrix as CSV: header `sent,0,1,...`, one row per
/// sent index.
pub fn write_confusion_csv<W: Write>(w: W, ch: &ChannelSpec) -> Result<()> {
    let k = ch.codebook_size();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["sent".to_string()];
    header.extend((0..k).map(|i| i.to_string()));
    out.write_record(&header)?;
    for (from, row) in confusion_matrix(ch).into_iter().enumerate() {
        let mut record = vec![from.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

fn flip_pattern<R: Rng>(rng: &mut R, bits: u32, p: f64) -> u32 {
    let mut e = 0;
    for b in 0..bits {
        if rng.random_bool(p) {
            e |= 1 << b;
        }
    }
    e
}

fn transmit_one<R: Rng>(rng: &mut R, sent: usize, ch: &ChannelSpec) -> usize {
    let lab = &ch.labeling;
    let bits = lab.bits();
    match ch.model {
        ConfusionModel::ExactBsc => {
            let e = flip_pattern(rng, bits, ch.p);
            lab.decode(lab.label(sent) ^ e)
        }
        ConfusionModel::UniformApprox => {
            // Any corrupted word counts as an index error, landing uniformly on
            // one of the other K - 1 indices.
            if flip_pattern(rng, bits, ch.p) == 0 {
                return sent;
            }
            let u = rng.random_range(0..lab.codebook_size() - 1);
            if u < sent { u } else { u + 1 }
        }
    }
}

/// Sends every index through the channel.
///
/// Symbol `m` draws its noise from stream `m` of a generator keyed by
/// `seed`, so the output depends only on `(indices, ch, seed)`.
pub fn transmit_indices(indices: &IndexSequence, ch: &ChannelSpec, seed: u64) -> Result<IndexSequence> {
    let k = ch.codebook_size();
    if indices.codebook_size() != k {
        return Err(Error::invalid(
            "index sequence",
            format!("refers to K = {}, channel carries K = {k}", indices.codebook_size()),
        ));
    }
    let family = PositionalRng::new(seed);
    let received = indices
        .indices()
        .par_iter()
        .enumerate()
        .map(|(m, &s)| {
            if ch.p == 0.0 {
                return s;
            }
            transmit_one(&mut family.at(m as u64), s, ch)
        })
        .collect();
    IndexSequence::new(received, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "4qam")]
    Qam4,
    #[serde(rename = "16qam")]
    Qam16,
    #[serde(rename = "64qam")]
    Qam64,
    #[serde(rename = "256qam")]
    Qam256,
}

impl Modulation {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            4 => Ok(Self::Qam4),
            16 => Ok(Self::Qam16),
            64 => Ok(Self::Qam64),
            256 => Ok(Self::Qam256),
            _ => Err(Error::invalid(
                "modulation order",
                format!("{order} is not one of 4, 16, 64, 256"),
            )),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Self::Qam4 => 4,
            Self::Qam16 => 16,
            Self::Qam64 => 64,
            Self::Qam256 => 256,
        }
    }

    pub fn bits_per_symbol(self) -> u32 {
        self.order().trailing_zeros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    Awgn,
    Rayleigh,
}

/// Uncoded square-QAM operating point. `snr_db` is the (average) symbol SNR
/// `Es/N0` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSpec {
    pub snr_db: f64,
    pub modulation: Modulation,
    pub fading: Fading,
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Gray-coded square-QAM bit-error probability.
///
/// Uses the nearest-neighbor approximation
/// `Pb = 4/log2(M) (1 - 1/sqrt(M)) Q(sqrt(3 SNR / (M - 1)))` under AWGN and
/// its closed-form average over an exponentially distributed SNR for
/// Rayleigh fading, clamped to `[0, 0.5]`.
pub fn snr_to_flip_probability(spec: &SnrSpec) -> Result<f64> {
    if spec.snr_db.is_nan() {
        return Err(Error::invalid("snr", "NaN"));
    }
    let m = spec.modulation.order() as f64;
    let coef = 4.0 / m.log2() * (1.0 - 1.0 / m.sqrt());
    let a = 3.0 / (m - 1.0);
    let snr = 10f64.powf(spec.snr_db / 10.0);
    let p = match spec.fading {
        Fading::Awgn => coef * q_function((a * snr).sqrt()),
        // E[Q(sqrt(a g))] for g ~ Exp(mean snr) is (1 - sqrt(a snr / (2 + a snr))) / 2.
        Fading::Rayleigh => coef * 0.5 * (1.0 - (1.0 / (1.0 + 2.0 / (a * snr))).sqrt()),
    };
    Ok(p.clamp(0.0, 0.5))
}
