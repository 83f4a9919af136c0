//! Learnable vector-quantization codebooks for digital index transmission.
//!
//! A [`Codebook`] of `K` codewords partitions feature space into Voronoi cells.
//! Feature vectors are mapped to the index of their nearest codeword, the
//! indices are labeled with `L = ceil(log2 K)` bits and pushed through a
//! memoryless binary symmetric channel, and the receiver reconstructs the
//! codeword at the (possibly corrupted) index.
//!
//! The crate is organized around that pipeline:
//!
//! - [`codebook`]: nearest-neighbor quantization, cell membership, index
//!   usage statistics and entropy estimates, plus the `SEMF`/`SEMC` files.
//! - [`losses`]: quantization, entropy-regularized and channel-aware
//!   objectives, their codeword gradients, and the training loop.
//! - [`channel`]: bit labelings, error statistics, confusion models,
//!   stochastic index transmission and the SNR to flip-probability map.
//! - [`analytics`]: closed-form channel distortion, bit-rate accounting and
//!   the codebook-size sweep.
//! - [`pipeline`]: configuration, synthetic feature generation and the
//!   report-emitting runs behind the `semvq` binary.
//!
//! Entropies are computed in nats. Reports carry both nats and bits.
//! Indices are 0-based everywhere in code and in serialized output.
//!
//! Runnable walkthroughs of each capability live in `examples/`:
//!
//! ```text
//! cargo run --release -p semvq --example quantize_voronoi
//! cargo run --release -p semvq --example entropy_regularized_training
//! cargo run --release -p semvq --example channel_error_stats
//! cargo run --release -p semvq --example snr_to_flip_probability
//! cargo run --release -p semvq --example channel_distortion
//! cargo run --release -p semvq --example optimal_codebook_size
//! cargo run --release -p semvq --example link_simulation
//! cargo run --release -p semvq --example ablation_compare
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= 0.0)` also rejects NaN.

pub mod analytics;
pub mod channel;
pub mod codebook;
mod error;
pub mod losses;
pub mod pipeline;
pub mod rng;

pub use analytics::{DistortionReport, SweepResult, SweepRow};
pub use channel::{BitLabeling, ChannelSpec, ConfusionModel, SnrSpec};
pub use codebook::{Codebook, FeatureSet, IndexSequence, UsageStats};
pub use error::{Error, Result};
pub use losses::{LossWeights, TrainConfig, TrainReport};
