//! Shared fixtures for the pipeline benchmarks.

use playseq::corpus::{self, Corpus};
use playseq::hmm::{self, HmmModel};

/// Desk-scale synthetic corpus: 972 users, 28-step histories, 50 artists.
pub fn bench_corpus() -> Corpus {
    let (full, _) = corpus::generate_synthetic(972, 29, 50, 5, 42).expect("valid arguments");
    corpus::split_holdout(&full).expect("length 29").prefixes
}

/// A 20-state model over the bench corpus vocabulary.
pub fn bench_model() -> HmmModel {
    hmm::init_random(20, 50, 42).expect("valid sizes")
}
