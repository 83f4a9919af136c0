//! Codebooks, feature sets and nearest-neighbor quantization.
//!
//! Quantization maps a feature vector to the index of its nearest codeword in
//! Euclidean distance. Ties go to the smallest index, so the map is a
//! deterministic function even on cell boundaries. Squared distances are
//! accumulated in `f64` in component order.

mod format;

pub use format::{
    read_codebook, read_features, write_codebook, write_features, CODEBOOK_MAGIC,
    FEATURES_MAGIC, FORMAT_VERSION,
};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Squared Euclidean distance, summed in component order.
#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

fn check_flat(data: &[f64], dim: usize, what: &'static str) -> Result<usize> {
    if dim == 0 {
        return Err(Error::invalid(what, "dimension must be at least 1"));
    }
    if !data.len().is_multiple_of(dim) {
        return Err(Error::invalid(
            what,
            format!("{} values do not fill rows of width {dim}", data.len()),
        ));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(data.len() / dim)
}

fn flatten(rows: Vec<Vec<f64>>, what: &'static str) -> Result<(Vec<f64>, usize)> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(rows.len() * dim);
    for row in rows {
        if row.len() != dim {
            return Err(Error::invalid(what, "rows have differing lengths"));
        }
        data.extend(row);
    }
    Ok((data, dim))
}

/// `M` feature vectors of dimension `N`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    data: Vec<f64>,
    dim: usize,
    source: String,
}

impl FeatureSet {
    pub fn from_flat(data: Vec<f64>, dim: usize, source: impl Into<String>) -> Result<Self> {
        let rows = check_flat(&data, dim, "feature set")?;
        if rows == 0 {
            return Err(Error::invalid("feature set", "needs at least one vector"));
        }
        Ok(Self {
            data,
            dim,
            source: source.into(),
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, source: impl Into<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("feature set", "needs at least one vector"));
        }
        let (data, dim) = flatten(rows, "feature set")?;
        Self::from_flat(data, dim, source)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Always false; a feature set holds at least one vector.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.dim..(m + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Where the vectors came from (file path, mixture description, ...).
    pub fn source_tag(&self) -> &str {
        &self.source
    }
}

/// `K >= 2` codewords of dimension `N`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    data: Vec<f64>,
    dim: usize,
}

impl Codebook {
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        let k = check_flat(&data, dim, "codebook")?;
        if k < 2 {
            return Err(Error::invalid("codebook", "needs at least two codewords"));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let (data, dim) = flatten(rows, "codebook")?;
        Self::from_flat(data, dim)
    }

    /// Number of codewords `K`.
    pub fn size(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codeword(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn codewords(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// The codebook as it reads back from a `SEMC` file (components rounded
    /// to `f32`).
    pub fn to_f32_precision(&self) -> Codebook {
        Codebook {
            data: self.data.iter().map(|&v| v as f32 as f64).collect(),
            dim: self.dim,
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: dim,
            });
        }
        Ok(())
    }

    /// Nearest codeword and its squared distance, smallest index on ties.
    #[inline]
    pub(crate) fn nearest(&self, z: &[f64]) -> (usize, f64) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, c) in self.codewords().enumerate() {
            let d = squared_distance(z, c);
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        (best, best_d)
    }
}

/// Indices into a codebook of size `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSequence {
    indices: Vec<usize>,
    k: usize,
}

impl IndexSequence {
    pub fn new(indices: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&index) = indices.iter().find(|&&i| i >= k) {
            return Err(Error::IndexOutOfRange { index, k });
        }
        Ok(Self { indices, k })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn codebook_size(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Per-index usage counts and empirical frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageStats {
    counts: Vec<u64>,
    frequencies: Vec<f64>,
}

impl UsageStats {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("usage counts", "total count is zero"));
        }
        let frequencies = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self {
            counts,
            frequencies,
        })
    }

    /// Stats from an explicit frequency vector (nonnegative, summing to 1).
    /// Counts are left empty.
    pub fn from_frequencies(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.iter().any(|&f| !f.is_finite() || f < 0.0) {
            return Err(Error::invalid("frequencies", "entries must be finite and >= 0"));
        }
        let sum: f64 = frequencies.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("frequencies", format!("sum to {sum}, not 1")));
        }
        Ok(Self {
            counts: Vec::new(),
            frequencies,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn codebook_size(&self) -> usize {
        self.frequencies.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Index of the nearest codeword to `z`.
pub fn quantize(z: &[f64], codebook: &Codebook) -> Result<usize> {
    codebook.check_dim(z.len())?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature vector"));
    }
    Ok(codebook.nearest(z).0)
}

/// Quantizes every row, preserving order.
pub fn quantize_batch(features: &FeatureSet, codebook: &Codebook) -> Result<IndexSequence> {
    codebook.check_dim(features.dim())?;
    let indices = features
        .as_flat()
        .par_chunks_exact(features.dim())
        .map(|z| codebook.nearest(z).0)
        .collect();
    Ok(IndexSequence {
        indices,
        k: codebook.size(),
    })
}

/// Row-wise nearest indices and squared distances.
pub(crate) fn assign(features: &FeatureSet, codebook: &Codebook) -> Vec<(usize, f64)> {
    features
        .as_flat()
        .par_chunks_exact(features.dim())
        .map(|z| codebook.nearest(z))
        .collect()
}

/// Whether `z` lies in the closed Voronoi cell of codeword `k`.
///
/// Boundary points belong to every cell they touch.
pub fn is_in_cell(z: &[f64], k: usize, codebook: &Codebook) -> Result<bool> {
    codebook.check_dim(z.len())?;
    if k >= codebook.size() {
        return Err(Error::IndexOutOfRange {
            index: k,
            k: codebook.size(),
        });
    }
    let own = squared_distance(z, codebook.codeword(k));
    Ok(codebook
        .codewords()
        .enumerate()
        .all(|(j, c)| j == k || own <= squared_distance(z, c)))
}

/// Replaces each index with its codeword.
pub fn reconstruct(indices: &IndexSequence, codebook: &Codebook) -> Result<FeatureSet> {
    if indices.is_empty() {
        return Err(Error::invalid("index sequence", "nothing to reconstruct"));
    }
    let mut data = Vec::with_capacity(indices.len() * codebook.dim());
    for &s in indices.indices() {
        if s >= codebook.size() {
            return Err(Error::IndexOutOfRange {
                index: s,
                k: codebook.size(),
            });
        }
        data.extend_from_slice(codebook.codeword(s));
    }
    FeatureSet::from_flat(data, codebook.dim(), "reconstruction")
}

pub fn usage_frequencies(indices: &IndexSequence, k: usize) -> Result<UsageStats> {
    let mut counts = vec![0u64; k];
    for &s in indices.indices() {
        if s >= k {
            return Err(Error::IndexOutOfRange { index: s, k });
        }
        counts[s] += 1;
    }
    UsageStats::from_counts(counts)
}

/// Shannon entropy of the usage frequencies in nats, with `0 ln 0 = 0`.
pub fn empirical_entropy(stats: &UsageStats) -> f64 {
    entropy_nats(stats.frequencies())
}

pub(crate) fn entropy_nats(frequencies: &[f64]) -> f64 {
    let h: f64 = frequencies
        .iter()
        .filter(|&&f| f > 0.0)
        .map(|&f| -f * f.ln())
        .sum();
    h.max(0.0)
}

/// Mutual information between features and their indices. Quantization is
/// deterministic, so this is the index entropy.
pub fn mutual_information_estimate(features: &FeatureSet, codebook: &Codebook) -> Result<f64> {
    let indices = quantize_batch(features, codebook)?;
    Ok(empirical_entropy(&usage_frequencies(&indices, codebook.size())?))
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
