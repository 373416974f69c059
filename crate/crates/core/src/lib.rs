//! Next-artist prediction for music play sequences.
//!
//! The crate trains and evaluates six predictors over a corpus of per-user
//! play sequences: two frequency baselines, user- and item-based
//! collaborative filtering, a discrete hidden Markov model trained with
//! multi-sequence Baum-Welch, and a mixture ranker that concatenates the HMM
//! and CF candidate lists with corpus-frequency tie-breaking.

pub mod cf;
pub mod corpus;
pub mod eval;
pub mod hmm;
pub mod predict;

mod error;

pub use cf::{ItemSimilarity, Neighborhood, RatingMatrix, ScoreVector};
pub use corpus::{Corpus, FrequencyTable, HoldoutSplit, IdMap};
pub use error::{Error, Result};
pub use eval::{BenchConfig, CfVariant, EvalReport};
pub use hmm::{ForwardResult, HmmModel, TrainReport};
pub use predict::{MixtureConfig, Ranking};
