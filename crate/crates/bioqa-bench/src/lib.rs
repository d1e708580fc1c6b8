//! Benchmark-only crate; see `benches/pipeline.rs`.
//!
//! Shared inputs live here so benchmarks measure the operation, not the
//! setup.

use bioqa_core::synthetic;

/// A long multi-sentence abstract assembled from the synthetic corpus.
pub fn long_abstract() -> String {
    synthetic::squad_corpus(97, 40)
        .instances()
        .map(|i| i.context)
        .collect::<Vec<_>>()
        .join(" ")
}
