//! `key = value` configuration text and the run configuration built from it.
//!
//! One pair per line, or several pairs on one line separated by commas:
//!
//! ```text
//! # comments run to end of line
//! k = 16
//! snr_db = 10, modulation = 64qam, fading = rayleigh
//! ks = 4,8,16
//! ```
//!
//! A comma-separated piece without `=` continues the previous value, so list
//! values need no quoting. Keys are case-insensitive and `-` equals `_`.
//! Later layers override earlier ones: defaults, then the config file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::channel::{
    snr_to_flip_probability, ConfusionModel, Fading, LabelingScheme, Modulation, SnrSpec,
};
use crate::error::{Error, Result};
use crate::losses::{Init, LossWeights, TrainConfig, UpdateRule};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut open = false;
            for piece in line.split(',') {
                if let Some((key, value)) = piece.split_once('=') {
                    let key = normalize_key(key);
                    if key.is_empty() {
                        return Err(Error::invalid("config", format!("line {}: empty key", lineno + 1)));
                    }
                    kv.entries.push((key, value.trim().to_string()));
                    open = true;
                } else if open {
                    let value = &mut kv.entries.last_mut().expect("open entry").1;
                    value.push(',');
                    value.push_str(piece.trim());
                } else {
                    return Err(Error::invalid(
                        "config",
                        format!("line {}: expected `key = value`", lineno + 1),
                    ));
                }
            }
        }
        Ok(kv)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((normalize_key(key), value.into()));
    }

    /// Last value for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

pub(crate) fn parse_value<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{value}`")))
}

pub(crate) fn parse_list<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    /// A `SEMF` file.
    File(PathBuf),
    /// A mixture description file.
    Mixture(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSetting {
    Flip(f64),
    /// Uncoded QAM link; `p` follows from the SNR mapping.
    Snr(SnrSpec),
}

impl ChannelSetting {
    pub fn flip_probability(&self) -> Result<f64> {
        match self {
            ChannelSetting::Flip(p) => Ok(*p),
            ChannelSetting::Snr(s) => snr_to_flip_probability(s),
        }
    }
}

/// A named set of loss weights trained side by side in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variant {
    pub name: String,
    pub weights: LossWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub source: Option<FeatureSource>,
    pub codebook: Option<PathBuf>,
    pub k: usize,
    pub weights: LossWeights,
    pub train: TrainConfig,
    pub channel: ChannelSetting,
    pub confusion: ConfusionModel,
    pub labeling: LabelingScheme,
    /// Flip probabilities to evaluate; empty means just the operating point.
    pub p_grid: Vec<f64>,
    pub lambda: f64,
    pub ks: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// `None` selects the four standard ablation variants.
    pub variants: Option<Vec<Variant>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: None,
            codebook: None,
            k: 256,
            weights: LossWeights::default(),
            train: TrainConfig::default(),
            channel: ChannelSetting::Flip(0.05),
            confusion: ConfusionModel::ExactBsc,
            labeling: LabelingScheme::NaturalBinary,
            p_grid: Vec::new(),
            lambda: 0.0,
            ks: vec![4, 8, 16, 32, 64],
            trials: 100,
            seed: 0,
            out: PathBuf::from("."),
            variants: None,
        }
    }
}

fn resolve(base: Option<&Path>, value: &str) -> PathBuf {
    let path = PathBuf::from(value);
    match base {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    }
}

fn parse_variants(value: &str) -> Result<Vec<Variant>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|spec| {
            let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
            let [name, gamma, omega] = parts[..] else {
                return Err(Error::invalid("variants", format!("`{spec}` is not name:gamma:omega")));
            };
            Ok(Variant {
                name: name.to_string(),
                weights: LossWeights::new(parse_value("gamma", gamma)?, parse_value("omega", omega)?)?,
            })
        })
        .collect()
}

impl RunConfig {
    /// Defaults, overridden by an optional config file, overridden by flags.
    pub fn from_layers(file: Option<&Path>, flags: &KeyValues) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let kv = KeyValues::load(path)?;
            cfg.apply(&kv, path.parent())?;
        }
        cfg.apply(flags, None)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one layer. Relative paths resolve against `base` when given.
    pub fn apply(&mut self, kv: &KeyValues, base: Option<&Path>) -> Result<()> {
        if kv.get("features").is_some() && kv.get("mixture").is_some() {
            return Err(Error::invalid("feature source", "give either features or mixture, not both"));
        }
        if kv.get("p").is_some() && kv.get("snr_db").is_some() {
            return Err(Error::invalid("channel", "give either p or snr_db, not both"));
        }
        let was_snr = matches!(self.channel, ChannelSetting::Snr(_));
        let mut snr = match self.channel {
            ChannelSetting::Snr(s) => s,
            ChannelSetting::Flip(_) => SnrSpec {
                snr_db: 10.0,
                modulation: Modulation::Qam64,
                fading: Fading::Awgn,
            },
        };
        let mut snr_touched = false;
        for (key, value) in kv.entries() {
            let v = value.as_str();
            match key.as_str() {
                "features" => self.source = Some(FeatureSource::File(resolve(base, v))),
                "mixture" => self.source = Some(FeatureSource::Mixture(resolve(base, v))),
                "codebook" => self.codebook = Some(resolve(base, v)),
                "k" => self.k = parse_value("k", v)?,
                "gamma" => self.weights.gamma = parse_value("gamma", v)?,
                "omega" => self.weights.omega = parse_value("omega", v)?,
                "p" => self.channel = ChannelSetting::Flip(parse_value("p", v)?),
                "snr_db" => {
                    snr.snr_db = parse_value("snr_db", v)?;
                    snr_touched = true;
                }
                "mod" | "modulation" => {
                    let order = v.trim().to_ascii_lowercase();
                    let order = order.strip_suffix("qam").unwrap_or(&order);
                    snr.modulation = Modulation::from_order(parse_value("modulation", order)?)?;
                    snr_touched = true;
                }
                "fading" => {
                    snr.fading = match v.trim().to_ascii_lowercase().as_str() {
                        "awgn" => Fading::Awgn,
                        "rayleigh" => Fading::Rayleigh,
                        other => return Err(Error::invalid("fading", format!("unknown `{other}`"))),
                    };
                    snr_touched = true;
                }
                "lambda" => self.lambda = parse_value("lambda", v)?,
                "ks" => self.ks = parse_list("ks", v)?,
                "ps" => self.p_grid = parse_list("ps", v)?,
                "trials" => self.trials = parse_value("trials", v)?,
                "seed" => self.seed = parse_value("seed", v)?,
                "confusion" => {
                    self.confusion = match v.trim().to_ascii_lowercase().as_str() {
                        "uniform" | "uniform_approx" => ConfusionModel::UniformApprox,
                        "exact" | "exact_bsc" => ConfusionModel::ExactBsc,
                        other => return Err(Error::invalid("confusion", format!("unknown `{other}`"))),
                    }
                }
                "labeling" => {
                    let v = v.trim().to_ascii_lowercase();
                    self.labeling = if v == "natural" || v == "natural_binary" {
                        LabelingScheme::NaturalBinary
                    } else if let Some(seed) = v.strip_prefix("random:") {
                        LabelingScheme::RandomPermutation {
                            seed: parse_value("labeling seed", seed)?,
                        }
                    } else {
                        return Err(Error::invalid("labeling", format!("unknown `{v}`")));
                    }
                }
                "out" => self.out = resolve(base, v),
                "epochs" => self.train.epochs = parse_value("epochs", v)?,
                "step_size" => self.train.step_size = parse_value("step_size", v)?,
                "batch_size" => self.train.batch_size = parse_value("batch_size", v)?,
                "temperature" => self.train.temperature = parse_value("temperature", v)?,
                "dead_threshold" => self.train.dead_threshold = Some(parse_value("dead_threshold", v)?),
                "init" => {
                    self.train.init = match v.trim().to_ascii_lowercase().as_str() {
                        "kmeans_pp" | "kmeans++" => Init::KmeansPp,
                        "random_sample" | "random" => Init::RandomSample,
                        other => return Err(Error::invalid("init", format!("unknown `{other}`"))),
                    }
                }
                "update" => {
                    self.train.update = match v.trim().to_ascii_lowercase().as_str() {
                        "gradient" => UpdateRule::Gradient,
                        "lloyd" => UpdateRule::Lloyd,
                        other => return Err(Error::invalid("update", format!("unknown `{other}`"))),
                    }
                }
                "variants" => self.variants = Some(parse_variants(v)?),
                other => return Err(Error::invalid("config", format!("unknown key `{other}`"))),
            }
        }
        // Modulation or fading alone only adjust an SNR channel already in use.
        if kv.get("snr_db").is_some() || (was_snr && snr_touched && kv.get("p").is_none()) {
            self.channel = ChannelSetting::Snr(snr);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.train.validate()?;
        let p = self.channel.flip_probability()?;
        for q in self.p_grid.iter().chain(std::iter::once(&p)) {
            if !(0.0..=0.5).contains(q) {
                return Err(Error::invalid("flip probability", format!("{q} not in [0, 0.5]")));
            }
        }
        if self.k < 2 {
            return Err(Error::invalid("k", format!("{} < 2", self.k)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid("lambda", format!("{} must be >= 0", self.lambda)));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        Ok(())
    }

    /// Training configuration with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn flip_probability(&self) -> Result<f64> {
        self.channel.flip_probability()
    }

    /// The evaluation grid, or the operating point alone.
    pub fn evaluation_ps(&self) -> Result<Vec<f64>> {
        if self.p_grid.is_empty() {
            Ok(vec![self.flip_probability()?])
        } else {
            Ok(self.p_grid.clone())
        }
    }

    pub fn variant_list(&self) -> Result<Vec<Variant>> {
        let variants = match &self.variants {
            Some(v) => v.clone(),
            None => {
                let LossWeights { gamma, omega } = self.weights;
                vec![
                    Variant { name: "baseline".into(), weights: LossWeights::new(0.0, 0.0)? },
                    Variant { name: "index_entropy".into(), weights: LossWeights::new(gamma, 0.0)? },
                    Variant { name: "channel_aware".into(), weights: LossWeights::new(0.0, omega)? },
                    Variant { name: "full".into(), weights: LossWeights::new(gamma, omega)? },
                ]
            }
        };
        if variants.is_empty() {
            return Err(Error::invalid("variants", "empty list"));
        }
        Ok(variants)
    }
}
