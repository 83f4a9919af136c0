//! Independent oracles shared by the integration and acceptance tests.
//!
//! Distances, entropies and distortions are recomputed from scratch. The
//! finite-difference oracle differentiates the library's own objective.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semvq::{Codebook, FeatureSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_features(seed: u64, m: usize, n: usize, scale: f64) -> FeatureSet {
    let mut r = rng(seed);
    FeatureSet::from_flat((0..m * n).map(|_| r.random_range(-scale..scale)).collect(), n, "random").unwrap()
}

pub fn random_codebook(seed: u64, k: usize, n: usize, scale: f64) -> Codebook {
    let mut r = rng(seed);
    Codebook::from_flat((0..k * n).map(|_| r.random_range(-scale..scale)).collect(), n).unwrap()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// First index attaining the minimum distance.
pub fn argmin_oracle(z: &[f64], codebook: &Codebook) -> usize {
    let d: Vec<f64> = (0..codebook.size()).map(|k| sq_dist(z, codebook.codeword(k))).collect();
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    d.iter().position(|&v| v == min).unwrap()
}

pub fn entropy_oracle(pi: &[f64]) -> f64 {
    pi.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

pub fn usage_oracle(features: &FeatureSet, codebook: &Codebook) -> Vec<f64> {
    let mut pi = vec![0.0; codebook.size()];
    for z in features.rows() {
        pi[argmin_oracle(z, codebook)] += 1.0;
    }
    let m = features.len() as f64;
    pi.iter_mut().for_each(|p| *p /= m);
    pi
}

pub fn quantization_oracle(features: &FeatureSet, codebook: &Codebook) -> f64 {
    features.rows().map(|z| sq_dist(z, codebook.codeword(argmin_oracle(z, codebook)))).sum::<f64>()
        / features.len() as f64
}

pub fn bits(k: usize) -> u32 {
    let mut l = 0;
    while (1usize << l) < k {
        l += 1;
    }
    l
}

pub fn pe_oracle(k: usize, p: f64) -> f64 {
    1.0 - (1.0 - p).powi(bits(k) as i32)
}

/// `P_e * sum_k pi_k * mean_{l != k} ||c_k - c_l||^2`, by double loop.
pub fn channel_distortion_oracle(codebook: &Codebook, pi: &[f64], p: f64) -> f64 {
    let k = codebook.size();
    let mut acc = 0.0;
    for a in 0..k {
        let mut s = 0.0;
        for b in 0..k {
            if a != b {
                s += sq_dist(codebook.codeword(a), codebook.codeword(b));
            }
        }
        acc += pi[a] * s / (k - 1) as f64;
    }
    pe_oracle(k, p) * acc
}

/// Soft-assignment entropy with its own softmax.
pub fn soft_entropy_oracle(features: &FeatureSet, codebook: &Codebook, tau: f64) -> f64 {
    let k = codebook.size();
    let mut pi = vec![0.0; k];
    for z in features.rows() {
        let logits: Vec<f64> = (0..k).map(|j| -sq_dist(z, codebook.codeword(j)) / tau).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        for j in 0..k {
            pi[j] += w[j] / total;
        }
    }
    let m = features.len() as f64;
    entropy_oracle(&pi.iter().map(|p| p / m).collect::<Vec<_>>())
}

pub fn perturbed(codebook: &Codebook, at: usize, delta: f64) -> Codebook {
    let mut flat = codebook.as_flat().to_vec();
    flat[at] += delta;
    Codebook::from_flat(flat, codebook.dim()).unwrap()
}

/// Hard assignment of every row.
pub fn assignments(features: &FeatureSet, codebook: &Codebook) -> Vec<usize> {
    features.rows().map(|z| argmin_oracle(z, codebook)).collect()
}

/// Worst per-component relative error, with `floor` guarding near-zero
/// components.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn within_sigmas(observed: u64, n: u64, prob: f64, sigmas: f64) -> bool {
    let mean = n as f64 * prob;
    let sd = (n as f64 * prob * (1.0 - prob)).sqrt();
    (observed as f64 - mean).abs() <= sigmas * sd
}

pub fn manifest_path(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

/// Central differences of the training objective with hard assignments
/// frozen: `total_codebook_loss` without its entropy term, minus `gamma`
/// times the soft entropy. Returns `None` if a perturbation moves any row
/// to another cell.
pub fn finite_difference_gradient(
    features: &FeatureSet,
    codebook: &Codebook,
    weights: &semvq::LossWeights,
    ch: &semvq::ChannelSpec,
    tau: f64,
    h: f64,
) -> Option<Vec<f64>> {
    let frozen = assignments(features, codebook);
    let plain = semvq::LossWeights::new(0.0, weights.omega).unwrap();
    let objective = |c: &Codebook| {
        semvq::losses::total_codebook_loss(features, c, &plain, ch).unwrap()
            - weights.gamma * soft_entropy_oracle(features, c, tau)
    };
    let mut grad = Vec::with_capacity(codebook.as_flat().len());
    for i in 0..codebook.as_flat().len() {
        let up = perturbed(codebook, i, h);
        let down = perturbed(codebook, i, -h);
        if assignments(features, &up) != frozen || assignments(features, &down) != frozen {
            return None;
        }
        grad.push((objective(&up) - objective(&down)) / (2.0 * h));
    }
    Some(grad)
}
