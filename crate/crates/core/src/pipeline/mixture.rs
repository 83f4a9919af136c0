//! Gaussian-mixture feature generator.
//!
//! Mixture files use the same `key = value` syntax as run configs:
//!
//! ```text
//! dim = 2
//! samples = 4000
//! seed = 17                      # optional; defaults to one derived from the run seed
//! component = 0.7 | 0,0 | 0.3,0.3    # weight | mean | diagonal variance
//! component = 0.3 | 4,0 | 0.3,0.3
//! ```

use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::{parse_list, parse_value, KeyValues};
use crate::codebook::FeatureSet;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Per-dimension variance.
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureSpec {
    pub components: Vec<MixtureComponent>,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("mixture", "no components"));
        }
        if self.dim == 0 || self.samples == 0 {
            return Err(Error::invalid("mixture", "dim and samples must be >= 1"));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("mixture", format!("weights sum to {total}, not 1")));
        }
        for c in &self.components {
            if !(c.weight >= 0.0) {
                return Err(Error::invalid("mixture", "negative component weight"));
            }
            if c.mean.len() != self.dim || c.variance.len() != self.dim {
                return Err(Error::invalid("mixture", format!("component vectors must have {} entries", self.dim)));
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("mixture mean"));
            }
            if c.variance.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::invalid("mixture", "variances must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Parses a mixture file; `fallback_seed` seeds the draw when the file
    /// has no `seed` key.
    pub fn parse(text: &str, fallback_seed: u64) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        for (key, _) in kv.entries() {
            if !matches!(key.as_str(), "dim" | "samples" | "seed" | "component") {
                return Err(Error::invalid("mixture", format!("unknown key `{key}`")));
            }
        }
        let dim = parse_value("dim", kv.get("dim").ok_or_else(|| Error::invalid("mixture", "missing dim"))?)?;
        let samples = parse_value(
            "samples",
            kv.get("samples").ok_or_else(|| Error::invalid("mixture", "missing samples"))?,
        )?;
        let seed = match kv.get("seed") {
            Some(s) => parse_value("seed", s)?,
            None => derive_seed(fallback_seed, "mixture", 0),
        };
        let components = kv
            .get_all("component")
            .map(|spec| {
                let parts: Vec<&str> = spec.split('|').collect();
                let [weight, mean, variance] = parts[..] else {
                    return Err(Error::invalid("mixture", format!("`{spec}` is not weight | mean | variance")));
                };
                Ok(MixtureComponent {
                    weight: parse_value("component weight", weight)?,
                    mean: parse_list("component mean", mean)?,
                    variance: parse_list("component variance", variance)?,
                })
            })
            .collect::<Result<_>>()?;
        let spec = Self {
            components,
            dim,
            samples,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>, fallback_seed: u64) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, fallback_seed)
    }

    pub fn describe(&self) -> String {
        format!(
            "mixture(components={}, dim={}, samples={}, seed={})",
            self.components.len(),
            self.dim,
            self.samples,
            self.seed
        )
    }
}

/// Feature vectors plus the component each was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub features: FeatureSet,
    pub labels: Vec<usize>,
}

impl LabeledFeatures {
    /// CSV with header `index,component`.
    pub fn write_labels_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "component"])?;
        for (i, l) in self.labels.iter().enumerate() {
            out.write_record([i.to_string(), l.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Draws `samples` vectors: a component by weight, then a diagonal
/// Gaussian around its mean.
pub fn generate_mixture(spec: &MixtureSpec) -> Result<LabeledFeatures> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, "mixture", 0);
    let picker = WeightedIndex::new(spec.components.iter().map(|c| c.weight))
        .map_err(|e| Error::invalid("mixture", e.to_string()))?;
    let stds: Vec<Vec<f64>> = spec
        .components
        .iter()
        .map(|c| c.variance.iter().map(|v| v.sqrt()).collect())
        .collect();
    let mut data = Vec::with_capacity(spec.samples * spec.dim);
    let mut labels = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let j = picker.sample(&mut rng);
        labels.push(j);
        for (mu, sd) in spec.components[j].mean.iter().zip(&stds[j]) {
            let e: f64 = rng.sample(StandardNormal);
            data.push(mu + sd * e);
        }
    }
    Ok(LabeledFeatures {
        features: FeatureSet::from_flat(data, spec.dim, spec.describe())?,
        labels,
    })
}
