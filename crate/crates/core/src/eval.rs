//! Ranking metric, leave-last-out evaluation harness and the six-model
//! benchmark.
//!
//! The metric is the mean over users of `1 / rank` of the true next artist
//! in the candidate list (0 when absent), with 1-based ranks. Leaderboards
//! commonly label this MAP@K and that name is kept here, although it is a
//! reciprocal-rank metric rather than classical mean average precision.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cf::{self, ItemSimilarity, RatingMatrix, ScoreVector};
use crate::corpus::{self, Corpus, FrequencyTable, IdMap};
use crate::error::{Error, Result};
use crate::hmm;
use crate::predict::{self, MixtureConfig, Ranking};

/// Sentinel for a target artist code that does not occur in the corpus
/// vocabulary; it can never be ranked, so its AP contribution is 0.
pub const UNKNOWN_TARGET: u32 = u32::MAX;

/// Reciprocal of the 1-based rank of `target` in `ranking`, or 0 when the
/// target is absent. The ranking must not contain duplicates.
pub fn ap_at_k(target: u32, ranking: &Ranking) -> Result<f64> {
    ap_position(target, &ranking.items)
}

fn ap_position<T: PartialEq>(target: T, items: &[T]) -> Result<f64> {
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            if items[i] == items[j] {
                return Err(Error::DuplicateItems);
            }
        }
    }
    Ok(match items.iter().position(|a| *a == target) {
        Some(idx) => 1.0 / (idx + 1) as f64,
        None => 0.0,
    })
}

/// Mean of [`ap_at_k`] over users.
pub fn map_at_k(targets: &[u32], rankings: &[Ranking]) -> Result<f64> {
    if targets.len() != rankings.len() {
        return Err(Error::InvalidArgument(format!(
            "{} targets but {} rankings",
            targets.len(),
            rankings.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::InvalidArgument("map_at_k needs at least one user".into()));
    }
    let terms: Vec<f64> = targets
        .par_iter()
        .zip(rankings.par_iter())
        .map(|(&t, r)| ap_at_k(t, r))
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// [`ap_at_k`] over external artist codes, for scoring prediction files
/// without re-interning them.
pub fn ap_at_k_external(target: u64, predicted: &[u64]) -> Result<f64> {
    ap_position(target, predicted)
}

/// [`map_at_k`] over external artist codes.
pub fn map_at_k_external(targets: &[u64], predictions: &[Vec<u64>]) -> Result<f64> {
    if targets.len() != predictions.len() {
        return Err(Error::InvalidArgument(format!(
            "{} targets but {} prediction rows",
            targets.len(),
            predictions.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::InvalidArgument("map_at_k needs at least one user".into()));
    }
    let terms: Vec<f64> = targets
        .iter()
        .zip(predictions)
        .map(|(&t, row)| ap_at_k_external(t, row))
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Which CF score feeds the CF slots of the mixture ranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CfVariant {
    User,
    Item,
    BinaryPseudo,
}

impl std::str::FromStr for CfVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "user" => Ok(CfVariant::User),
            "item" => Ok(CfVariant::Item),
            "binary-pseudo" => Ok(CfVariant::BinaryPseudo),
            other => Err(format!(
                "unknown cf variant {other:?} (expected user, item or binary-pseudo)"
            )),
        }
    }
}

impl std::fmt::Display for CfVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CfVariant::User => write!(f, "user"),
            CfVariant::Item => write!(f, "item"),
            CfVariant::BinaryPseudo => write!(f, "binary-pseudo"),
        }
    }
}

/// Full hyperparameter set for the benchmark. Serialized into every JSON
/// report so runs are auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub seed: u64,
    pub n_states: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub smoothing: f64,
    pub k_neighbors: usize,
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub map_k: usize,
    pub mixture_cf: CfVariant,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 0,
            n_states: 20,
            max_iters: 100,
            tol: 1e-4,
            smoothing: 1e-6,
            k_neighbors: 30,
            n: 10,
            n1: 7,
            n2: 3,
            map_k: 10,
            mixture_cf: CfVariant::BinaryPseudo,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<MixtureConfig> {
        if self.n == 0 || self.n_states == 0 || self.max_iters == 0 || self.k_neighbors == 0 {
            return Err(Error::InvalidArgument(
                "n, n_states, max_iters and k_neighbors must all be >= 1".into(),
            ));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::InvalidArgument("tol must be > 0".into()));
        }
        if !self.smoothing.is_finite() || self.smoothing < 0.0 {
            return Err(Error::InvalidArgument("smoothing must be >= 0".into()));
        }
        if self.n > self.map_k {
            return Err(Error::InvalidArgument(format!(
                "candidate list length {} exceeds metric cutoff K={}",
                self.n, self.map_k
            )));
        }
        MixtureConfig::new(self.n, self.n1, self.n2)
    }
}

/// The canonical report row order.
pub const MODEL_ORDER: [&str; 6] = [
    "HF_corpus",
    "HF_current",
    "CF_user",
    "CF_item",
    "HMM",
    "MHMM",
];

/// Per-model MAP@K results plus the configuration that produced them.
/// Wall-clock timings are kept for the text table but excluded from the
/// JSON serialization so reports stay byte-reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub k: usize,
    pub n_users: usize,
    pub config: BenchConfig,
    pub scores: BTreeMap<String, f64>,
    #[serde(skip)]
    pub timings_ms: BTreeMap<String, f64>,
}

impl EvalReport {
    /// Aligned plain-text table in canonical row order.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:>10} {:>12}", "Model", format!("MAP@{}", self.k), "time");
        for name in MODEL_ORDER {
            if let Some(score) = self.scores.get(name) {
                let time = self
                    .timings_ms
                    .get(name)
                    .map(|ms| format!("{ms:.1} ms"))
                    .unwrap_or_else(|| "-".into());
                let _ = writeln!(out, "{name:<12} {score:>10.5} {time:>12}");
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        text.push('\n');
        text
    }
}

/// Reads a targets file: one external artist code per line, row-aligned with
/// the corpus. Codes outside the corpus vocabulary map to a sentinel that no
/// ranking can contain.
pub fn load_targets(path: impl AsRef<Path>, id_map: &IdMap) -> Result<Vec<u32>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut targets = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let code: u64 = trimmed.parse().map_err(|_| Error::FieldParse {
            path: path.to_path_buf(),
            line: idx + 1,
            column: 1,
            field: trimmed.to_string(),
        })?;
        targets.push(id_map.internal(code).unwrap_or(UNKNOWN_TARGET));
    }
    if targets.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    Ok(targets)
}

struct ModelTimer {
    start: Instant,
}

impl ModelTimer {
    fn start() -> Self {
        ModelTimer {
            start: Instant::now(),
        }
    }

    fn stop(self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }
}

/// Runs all six predictors under one protocol and scores them with MAP@K.
///
/// Without external targets the corpus is split leave-last-out: models train
/// on every sequence minus its final item and are scored on that held-out
/// item. With `targets` supplied (one per user) the models train on the full
/// corpus and are scored against the provided next artists.
pub fn bench_all(
    corpus: &Corpus,
    targets: Option<&[u32]>,
    config: &BenchConfig,
) -> Result<EvalReport> {
    let mixture = config.validate()?;

    let split;
    let (prefixes, targets): (&Corpus, Vec<u32>) = match targets {
        Some(t) => {
            if t.len() != corpus.n_users() {
                return Err(Error::InvalidArgument(format!(
                    "{} targets for {} users",
                    t.len(),
                    corpus.n_users()
                )));
            }
            (corpus, t.to_vec())
        }
        None => {
            split = corpus::split_holdout(corpus)?;
            (&split.prefixes, split.targets.clone())
        }
    };

    let n = config.n;
    let n_users = prefixes.n_users();
    let m = prefixes.vocab_size();
    let freqs = corpus::artist_frequencies(prefixes);

    let mut scores = BTreeMap::new();
    let mut timings = BTreeMap::new();
    let mut record = |name: &str, map: f64, ms: f64| {
        scores.insert(name.to_string(), map);
        timings.insert(name.to_string(), ms);
    };

    // HF_corpus: one global ranking shared by every user.
    let timer = ModelTimer::start();
    let global = predict::hf_corpus(&freqs, n);
    let rankings: Vec<Ranking> = vec![global; n_users];
    let map = map_at_k(&targets, &rankings)?;
    record("HF_corpus", map, timer.stop());

    // HF_current: per-user play counts.
    let timer = ModelTimer::start();
    let rankings: Vec<Ranking> = prefixes
        .sequences()
        .par_iter()
        .map(|seq| predict::hf_current(seq, n, &freqs))
        .collect();
    let map = map_at_k(&targets, &rankings)?;
    record("HF_current", map, timer.stop());

    let matrix = RatingMatrix::from_corpus(prefixes);

    // CF_user.
    let timer = ModelTimer::start();
    let rankings = cf_rankings(&matrix, CfVariant::User, config, &freqs, None)?;
    let map = map_at_k(&targets, &rankings)?;
    record("CF_user", map, timer.stop());

    // CF_item.
    let timer = ModelTimer::start();
    let count_sims = ItemSimilarity::from_matrix(&matrix);
    let rankings = cf_rankings(&matrix, CfVariant::Item, config, &freqs, Some(&count_sims))?;
    let map = map_at_k(&targets, &rankings)?;
    record("CF_item", map, timer.stop());

    // HMM: one global model trained on all sequences.
    let timer = ModelTimer::start();
    let init = hmm::init_random(config.n_states, m, config.seed)?;
    let (model, _report) = hmm::baum_welch(
        init,
        prefixes.sequences(),
        config.max_iters,
        config.tol,
        config.smoothing,
    )?;
    let hmm_fulls: Vec<Ranking> = prefixes
        .sequences()
        .par_iter()
        .map(|seq| {
            let dist = hmm::next_symbol_distribution(&model, seq)?;
            Ok(predict::top_n(&ScoreVector::dense(dist), m, &freqs))
        })
        .collect::<Result<_>>()?;
    let rankings: Vec<Ranking> = hmm_fulls
        .iter()
        .map(|full| Ranking {
            items: full.items.iter().take(n).copied().collect(),
            scores: full.scores.iter().take(n).copied().collect(),
        })
        .collect();
    let map = map_at_k(&targets, &rankings)?;
    record("HMM", map, timer.stop());

    // MHMM: HMM block first, then the configured CF variant, deduped and
    // backfilled.
    let timer = ModelTimer::start();
    let reuse = match config.mixture_cf {
        CfVariant::Item => Some(&count_sims),
        _ => None,
    };
    let cf_fulls = cf_full_rankings(&matrix, config.mixture_cf, config, &freqs, reuse)?;
    let rankings: Vec<Ranking> = hmm_fulls
        .par_iter()
        .zip(cf_fulls.par_iter())
        .map(|(hmm_full, cf_full)| predict::mhmm_predict(hmm_full, cf_full, &mixture, &freqs))
        .collect();
    let map = map_at_k(&targets, &rankings)?;
    record("MHMM", map, timer.stop());

    Ok(EvalReport {
        k: config.map_k,
        n_users,
        config: config.clone(),
        scores,
        timings_ms: timings,
    })
}

/// Full-depth (all scorable items) CF rankings for every user.
fn cf_full_rankings(
    matrix: &RatingMatrix,
    variant: CfVariant,
    config: &BenchConfig,
    freqs: &FrequencyTable,
    count_sims: Option<&ItemSimilarity>,
) -> Result<Vec<Ranking>> {
    let m = matrix.n_items();
    let k = config.k_neighbors;
    match variant {
        CfVariant::User => (0..matrix.n_users())
            .into_par_iter()
            .map(|u| {
                let scores = cf::user_cf_scores(matrix, u, k)?;
                Ok(predict::top_n(&scores, m, freqs))
            })
            .collect(),
        CfVariant::Item => {
            let owned;
            let sims = match count_sims {
                Some(s) => s,
                None => {
                    owned = ItemSimilarity::from_matrix(matrix);
                    &owned
                }
            };
            let neighborhoods = cf::item_neighborhoods(sims, k)?;
            (0..matrix.n_users())
                .into_par_iter()
                .map(|u| {
                    let scores = cf::item_cf_scores_with(matrix, &neighborhoods, u)?;
                    Ok(predict::top_n(&scores, m, freqs))
                })
                .collect()
        }
        CfVariant::BinaryPseudo => {
            let bin_sims = ItemSimilarity::from_binarized(matrix);
            let neighborhoods = cf::item_neighborhoods(&bin_sims, k)?;
            (0..matrix.n_users())
                .into_par_iter()
                .map(|u| {
                    let scores = cf::pseudo_scores_binary_with(matrix, &neighborhoods, u)?;
                    Ok(predict::top_n(&scores, m, freqs))
                })
                .collect()
        }
    }
}

/// Length-n CF rankings backfilled to n items through the mixture operator's
/// CF-only degenerate form.
fn cf_rankings(
    matrix: &RatingMatrix,
    variant: CfVariant,
    config: &BenchConfig,
    freqs: &FrequencyTable,
    count_sims: Option<&ItemSimilarity>,
) -> Result<Vec<Ranking>> {
    let fulls = cf_full_rankings(matrix, variant, config, freqs, count_sims)?;
    let cf_only = MixtureConfig::new(config.n, 0, config.n)?;
    let empty = Ranking::empty();
    Ok(fulls
        .iter()
        .map(|full| predict::mhmm_predict(&empty, full, &cf_only, freqs))
        .collect())
}
