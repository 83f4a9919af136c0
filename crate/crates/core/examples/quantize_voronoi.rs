//! Nearest-codeword quantization on a 2-D grid, printing each cell's
//! population and checking that every vector lies in its own cell.

use semvq::codebook::{is_in_cell, quantize, quantize_batch, usage_frequencies};
use semvq::{Codebook, FeatureSet};

fn main() -> semvq::Result<()> {
    let codebook = Codebook::from_rows(vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 1.0],
    ])?;

    let mut rows = Vec::new();
    for i in 0..=20 {
        for j in 0..=20 {
            rows.push(vec![i as f64 / 20.0, j as f64 / 20.0]);
        }
    }
    let features = FeatureSet::from_rows(rows, "unit grid")?;
    let indices = quantize_batch(&features, &codebook)?;

    for (z, &k) in features.rows().zip(indices.indices()) {
        assert!(is_in_cell(z, k, &codebook)?);
    }
    // The grid midpoint is equidistant from all four codewords.
    println!("quantize([0.5, 0.5]) = {}", quantize(&[0.5, 0.5], &codebook)?);

    let stats = usage_frequencies(&indices, codebook.size())?;
    for (k, (count, freq)) in stats.counts().iter().zip(stats.frequencies()).enumerate() {
        println!("cell {k}: {count:4} vectors ({freq:.4})");
    }
    Ok(())
}
