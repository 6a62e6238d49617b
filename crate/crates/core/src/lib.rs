//! Product quantization with accelerated distance scans.
//!
//! Vectors are compressed into M one-byte codeword indices. A query is
//! answered from a precomputed M x K table of subspace distances; the naive
//! scan sums M entries per stored code. Sorting the codes and folding shared
//! prefixes into a flat encoding tree lets a scan pay for each shared prefix
//! once, and stores the dataset in fewer bytes than the flat layout.
//!
//! Modules:
//! - [`codebook`], [`kmeans`]: codebook training, encode/decode.
//! - [`table`]: per-query distance tables and the flat ADC scan.
//! - [`order`], [`etree`], [`eforest`]: chunk orderings, the tree and the
//!   multi-tree forest with their traversal kernels.
//! - [`ivf`]: coarse quantizer + residual codes, trees per inverted list.
//! - [`io`], [`synth`], [`bench`]: file formats, synthetic data, the scan
//!   benchmark harness.

pub mod bench;
pub mod codebook;
pub mod dataset;
pub mod eforest;
pub mod error;
pub mod etree;
pub mod io;
pub mod ivf;
pub mod kmeans;
pub mod order;
pub mod synth;
pub mod table;
pub mod topk;
pub mod vecset;

pub use codebook::{train_pq, Codebook};
pub use dataset::{EncodedDataset, SlotMap};
pub use eforest::{EncodingForest, ForestConfig};
pub use error::{Error, Result};
pub use etree::{construct, EncodingTree, TreeStats};
pub use ivf::{build_ivf, IvfIndex, QueryResult};
pub use order::{sort_encodings, ChunkOrder};
pub use synth::{gen_synthetic, SyntheticSpec};
pub use table::{adc_distance, adc_scan, DistanceTable};
pub use topk::{Neighbor, TopK};
pub use vecset::VectorSet;
