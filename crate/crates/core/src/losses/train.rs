use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{channel_loss, gradients_on, LossWeights};
use crate::channel::ChannelSpec;
use crate::codebook::{
    assign, empirical_entropy, squared_distance, usage_frequencies, Codebook, FeatureSet,
    IndexSequence, UsageStats,
};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    KmeansPp,
    RandomSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Minibatch gradient descent on the total objective.
    Gradient,
    /// Exact centroid update. Only valid with `gamma = omega = 0`.
    Lloyd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub step_size: f64,
    pub batch_size: usize,
    /// Soft-assignment temperature for the entropy gradient.
    pub temperature: f64,
    pub seed: u64,
    /// Usage frequency below which a codeword is re-seeded. `None` means
    /// `1 / (4K)`.
    pub dead_threshold: Option<f64>,
    pub init: Init,
    pub update: UpdateRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            step_size: 0.5,
            batch_size: 256,
            temperature: 1.0,
            seed: 0,
            dead_threshold: None,
            init: Init::KmeansPp,
            update: UpdateRule::Gradient,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be >= 1"));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::invalid("step size", format!("{} must be > 0", self.step_size)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size", "must be >= 1"));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::invalid("temperature", format!("{} must be > 0", self.temperature)));
        }
        if let Some(t) = self.dead_threshold {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::invalid("dead threshold", format!("{t} not in [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn dead_threshold_for(&self, k: usize) -> f64 {
        self.dead_threshold.unwrap_or(1.0 / (4.0 * k as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub quantization_loss: f64,
    pub entropy_nats: f64,
    pub channel_loss: f64,
    pub total_loss: f64,
    pub dead_resets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn last(&self) -> &EpochRecord {
        self.records.last().expect("at least one epoch")
    }

    /// One row per epoch with header
    /// `epoch,quantization_loss,entropy_nats,channel_loss,total_loss,dead_resets`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn init_codebook<R: Rng>(features: &FeatureSet, k: usize, init: Init, rng: &mut R) -> Result<Codebook> {
    let m = features.len();
    let picks: Vec<usize> = match init {
        Init::RandomSample => index::sample(rng, m, k).into_vec(),
        Init::KmeansPp => {
            let mut picks = vec![rng.random_range(0..m)];
            let mut nearest: Vec<f64> = features
                .rows()
                .map(|z| squared_distance(z, features.row(picks[0])))
                .collect();
            while picks.len() < k {
                let next = match WeightedIndex::new(&nearest) {
                    Ok(dist) => dist.sample(rng),
                    // Every row coincides with a chosen centre.
                    Err(_) => rng.random_range(0..m),
                };
                picks.push(next);
                let centre = features.row(next);
                for (d, z) in nearest.iter_mut().zip(features.rows()) {
                    *d = d.min(squared_distance(z, centre));
                }
            }
            picks
        }
    };
    let mut data = Vec::with_capacity(k * features.dim());
    for p in picks {
        data.extend_from_slice(features.row(p));
    }
    Codebook::from_flat(data, features.dim())
}

fn usage(features: &FeatureSet, codebook: &Codebook) -> Result<(f64, UsageStats)> {
    let assigned = assign(features, codebook);
    let loss = assigned.iter().map(|&(_, d)| d).sum::<f64>() / features.len() as f64;
    let indices = IndexSequence::new(assigned.into_iter().map(|(k, _)| k).collect(), codebook.size())?;
    Ok((loss, usage_frequencies(&indices, codebook.size())?))
}

fn lloyd_step(features: &FeatureSet, codebook: &Codebook) -> Result<Codebook> {
    let k = codebook.size();
    let n = codebook.dim();
    let mut sums = vec![0.0; k * n];
    let mut counts = vec![0usize; k];
    for (z, (j, _)) in features.rows().zip(assign(features, codebook)) {
        counts[j] += 1;
        for d in 0..n {
            sums[j * n + d] += z[d];
        }
    }
    let mut data = codebook.as_flat().to_vec();
    for j in 0..k {
        if counts[j] > 0 {
            for d in 0..n {
                data[j * n + d] = sums[j * n + d] / counts[j] as f64;
            }
        }
    }
    Codebook::from_flat(data, n)
}

/// Learns a `K`-codeword codebook on `features`.
///
/// Each epoch updates the codewords (minibatch gradient steps over a shuffled
/// row order, or one Lloyd centroid step), then re-seeds any codeword whose
/// usage fell below the dead threshold to a uniformly drawn data row. In
/// Lloyd mode only codewords with no members are re-seeded, which keeps the
/// quantization loss non-increasing. Training is single-threaded in its
/// random draws and reproducible from `config.seed`.
pub fn train_codebook(
    features: &FeatureSet,
    k: usize,
    weights: &LossWeights,
    ch: &ChannelSpec,
    config: &TrainConfig,
) -> Result<(Codebook, TrainReport)> {
    config.validate()?;
    weights.validate()?;
    if k < 2 {
        return Err(Error::invalid("codebook size", format!("{k} < 2")));
    }
    let m = features.len();
    if m < k {
        return Err(Error::invalid(
            "codebook size",
            format!("K = {k} exceeds the {m} available feature vectors"),
        ));
    }
    if ch.codebook_size() != k {
        return Err(Error::invalid(
            "channel",
            format!("labels K = {}, training K = {k}", ch.codebook_size()),
        ));
    }
    if config.update == UpdateRule::Lloyd && (weights.gamma != 0.0 || weights.omega != 0.0) {
        return Err(Error::invalid("update rule", "lloyd requires gamma = omega = 0"));
    }

    let mut rng = stream_rng(config.seed, "train", 0);
    let mut codebook = init_codebook(features, k, config.init, &mut rng)?;
    let threshold = config.dead_threshold_for(k);
    let n = features.dim();
    let mut order: Vec<usize> = (0..m).collect();
    let mut records = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        match config.update {
            UpdateRule::Gradient => {
                order.shuffle(&mut rng);
                for batch in order.chunks(config.batch_size) {
                    let rows: Vec<&[f64]> = batch.iter().map(|&i| features.row(i)).collect();
                    let grad = gradients_on(&rows, &codebook, weights, ch, config.temperature)?;
                    let mut data = codebook.into_flat();
                    for (c, g) in data.iter_mut().zip(&grad) {
                        *c -= config.step_size * g;
                    }
                    codebook = Codebook::from_flat(data, n)?;
                }
            }
            UpdateRule::Lloyd => codebook = lloyd_step(features, &codebook)?,
        }

        let (mut quant, mut stats) = usage(features, &codebook)?;
        let mut dead_resets = 0;
        let dead: Vec<usize> = stats
            .frequencies()
            .iter()
            .enumerate()
            .filter(|&(_, &pi)| match config.update {
                UpdateRule::Gradient => pi < threshold,
                UpdateRule::Lloyd => pi == 0.0,
            })
            .map(|(j, _)| j)
            .collect();
        if !dead.is_empty() {
            let mut data = codebook.into_flat();
            for &j in &dead {
                let row = features.row(rng.random_range(0..m));
                data[j * n..(j + 1) * n].copy_from_slice(row);
            }
            codebook = Codebook::from_flat(data, n)?;
            dead_resets = dead.len();
            (quant, stats) = usage(features, &codebook)?;
        }

        let entropy = empirical_entropy(&stats);
        let chan = channel_loss(&codebook, &stats, ch)?;
        records.push(EpochRecord {
            epoch,
            quantization_loss: quant,
            entropy_nats: entropy,
            channel_loss: chan,
            total_loss: quant + weights.omega * chan - weights.gamma * entropy,
            dead_resets,
        });
    }
    Ok((codebook, TrainReport { records }))
}
