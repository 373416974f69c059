//! Top-n ranking of score vectors, the two frequency baselines and the
//! mixture ranker that concatenates HMM and CF candidate lists.

use crate::cf::ScoreVector;
use crate::corpus::FrequencyTable;
use crate::error::{Error, Result};
use crate::hmm::{self, HmmModel};

/// An ordered list of distinct artist ids with their primary scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub items: Vec<u32>,
    pub scores: Vec<f64>,
}

impl Ranking {
    pub fn empty() -> Self {
        Ranking {
            items: Vec::new(),
            scores: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Candidate split between HMM and CF slots; `n1 + n2 = n` always holds for
/// constructed values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixtureConfig {
    n: usize,
    n1: usize,
    n2: usize,
}

impl MixtureConfig {
    pub fn new(n: usize, n1: usize, n2: usize) -> Result<Self> {
        if n1 + n2 != n {
            return Err(Error::InvalidArgument(format!(
                "mixture split {n1} + {n2} != {n}"
            )));
        }
        Ok(MixtureConfig { n, n1, n2 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }
}

/// Total order used everywhere a ranking is produced: primary score
/// descending, then corpus frequency descending, then artist id ascending.
/// Score ties mean exact equality; the frequency weight only ever breaks
/// ties, it never adjusts scores.
fn rank_order(
    a: (u32, f64),
    b: (u32, f64),
    freqs: &FrequencyTable,
) -> std::cmp::Ordering {
    if a.1 == b.1 {
        freqs
            .count(b.0)
            .cmp(&freqs.count(a.0))
            .then_with(|| a.0.cmp(&b.0))
    } else {
        b.1.total_cmp(&a.1)
    }
}

/// The n highest-scoring scorable artists. Returns fewer than n items when
/// fewer are scorable; callers backfill (see [`mhmm_predict`]).
pub fn top_n(scores: &ScoreVector, n: usize, freqs: &FrequencyTable) -> Ranking {
    let mut candidates: Vec<(u32, f64)> = scores
        .scores
        .iter()
        .zip(&scores.mask)
        .enumerate()
        .filter(|&(_, (_, &scorable))| scorable)
        .map(|(i, (&s, _))| (i as u32, s))
        .collect();
    candidates.sort_by(|&a, &b| rank_order(a, b, freqs));
    candidates.truncate(n);
    Ranking {
        items: candidates.iter().map(|&(i, _)| i).collect(),
        scores: candidates.iter().map(|&(_, s)| s).collect(),
    }
}

/// Baseline: the n globally most frequent artists (count ties by lower id).
pub fn hf_corpus(freqs: &FrequencyTable, n: usize) -> Ranking {
    let scores = ScoreVector::dense(freqs.counts().iter().map(|&c| c as f64).collect());
    top_n(&scores, n, freqs)
}

/// Baseline: artists ranked by play count within this user's own sequence,
/// ties broken by corpus frequency then id. When the user has fewer than n
/// distinct artists the tail is backfilled in [`hf_corpus`] order.
pub fn hf_current(user_seq: &[u32], n: usize, freqs: &FrequencyTable) -> Ranking {
    let mut counts = vec![0u64; freqs.vocab_size()];
    for &a in user_seq {
        counts[a as usize] += 1;
    }
    let mut seen: Vec<(u32, f64)> = counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0)
        .map(|(a, &c)| (a as u32, c as f64))
        .collect();
    seen.sort_by(|&a, &b| rank_order(a, b, freqs));
    seen.truncate(n);

    let mut items: Vec<u32> = seen.iter().map(|&(a, _)| a).collect();
    let mut scores: Vec<f64> = seen.iter().map(|&(_, c)| c).collect();
    if items.len() < n {
        let order = hf_corpus(freqs, freqs.vocab_size());
        for &a in &order.items {
            if items.len() == n {
                break;
            }
            if !items.contains(&a) {
                items.push(a);
                scores.push(0.0);
            }
        }
    }
    Ranking { items, scores }
}

/// Ranks the model's next-symbol distribution for the given history.
pub fn hmm_predict(
    model: &HmmModel,
    user_seq: &[u32],
    n: usize,
    freqs: &FrequencyTable,
) -> Result<Ranking> {
    let dist = hmm::next_symbol_distribution(model, user_seq)?;
    Ok(top_n(&ScoreVector::dense(dist), n, freqs))
}

/// Mixture ranking: the first n1 HMM candidates, then the first n2 CF
/// candidates, preserving each source's order and dropping duplicates. The
/// result is backfilled to n distinct items by continuing down whichever
/// source lists hold a slot (deeper HMM candidates first, then deeper CF
/// candidates), and finally in global-frequency order. Sources with a zero
/// slot allocation are never consulted, so `n1 = n` reproduces the HMM
/// ranking exactly and `n2 = n` the CF ranking.
pub fn mhmm_predict(
    hmm_full: &Ranking,
    cf_full: &Ranking,
    config: &MixtureConfig,
    freqs: &FrequencyTable,
) -> Ranking {
    let n = config.n();
    let mut items: Vec<u32> = Vec::with_capacity(n);
    let mut scores: Vec<f64> = Vec::with_capacity(n);
    let push = |items: &mut Vec<u32>, scores: &mut Vec<f64>, a: u32, s: f64| {
        if items.len() < n && !items.contains(&a) {
            items.push(a);
            scores.push(s);
        }
    };

    let take = |rank: &Ranking, upto: usize| -> Vec<(u32, f64)> {
        rank.items
            .iter()
            .zip(&rank.scores)
            .take(upto)
            .map(|(&a, &s)| (a, s))
            .collect()
    };

    for (a, s) in take(hmm_full, config.n1()) {
        push(&mut items, &mut scores, a, s);
    }
    for (a, s) in take(cf_full, config.n2()) {
        push(&mut items, &mut scores, a, s);
    }
    if config.n1() > 0 {
        for (&a, &s) in hmm_full.items.iter().zip(&hmm_full.scores).skip(config.n1()) {
            if items.len() == n {
                break;
            }
            push(&mut items, &mut scores, a, s);
        }
    }
    if config.n2() > 0 {
        for (&a, &s) in cf_full.items.iter().zip(&cf_full.scores).skip(config.n2()) {
            if items.len() == n {
                break;
            }
            push(&mut items, &mut scores, a, s);
        }
    }
    if items.len() < n {
        let order = hf_corpus(freqs, freqs.vocab_size());
        for &a in &order.items {
            if items.len() == n {
                break;
            }
            push(&mut items, &mut scores, a, 0.0);
        }
    }
    Ranking { items, scores }
}
