//! Brute-force reference implementations used to check the library. These
//! are deliberately independent of the code under test: they enumerate state
//! paths outright and re-derive the CF formulas from scratch.
//!
//! Each test target pulls in the module whole, so unused-by-this-target
//! helpers are expected.
#![allow(dead_code)]

use ndarray::Array2;
use playseq::HmmModel;

/// Every length-`len` state path over `n` states.
fn all_paths(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut paths = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::with_capacity(paths.len() * n);
        for p in &paths {
            for s in 0..n {
                let mut q = p.clone();
                q.push(s);
                next.push(q);
            }
        }
        paths = next;
    }
    paths
}

fn path_probability(model: &HmmModel, path: &[usize], seq: &[u32]) -> f64 {
    let mut p = model.pi()[path[0]] * model.emit()[(path[0], seq[0] as usize)];
    for t in 1..seq.len() {
        p *= model.trans()[(path[t - 1], path[t])] * model.emit()[(path[t], seq[t] as usize)];
    }
    p
}

/// P(O | model) as the explicit sum over all state paths.
pub fn path_sum_likelihood(model: &HmmModel, seq: &[u32]) -> f64 {
    all_paths(model.n_states(), seq.len())
        .iter()
        .map(|path| path_probability(model, path, seq))
        .sum()
}

/// P(q_t = i | O, model) for every t and i, from the same path sum.
pub fn path_sum_posterior(model: &HmmModel, seq: &[u32]) -> Vec<Vec<f64>> {
    let n = model.n_states();
    let total = path_sum_likelihood(model, seq);
    let mut post = vec![vec![0.0; n]; seq.len()];
    for path in all_paths(n, seq.len()) {
        let p = path_probability(model, &path, seq);
        for (t, &state) in path.iter().enumerate() {
            post[t][state] += p;
        }
    }
    for row in &mut post {
        for v in row {
            *v /= total;
        }
    }
    post
}

/// P(o_{T+1} = k | O, model): extend every path by one transition and one
/// emission and marginalize.
pub fn path_sum_next_symbol(model: &HmmModel, seq: &[u32]) -> Vec<f64> {
    let n = model.n_states();
    let m = model.vocab_size();
    let total = path_sum_likelihood(model, seq);
    let mut dist = vec![0.0; m];
    for path in all_paths(n, seq.len()) {
        let p = path_probability(model, &path, seq);
        let last = path[seq.len() - 1];
        for j in 0..n {
            let step = p * model.trans()[(last, j)];
            for (k, slot) in dist.iter_mut().enumerate() {
                *slot += step * model.emit()[(j, k)];
            }
        }
    }
    for v in &mut dist {
        *v /= total;
    }
    dist
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn row(values: &Array2<f64>, i: usize) -> Vec<f64> {
    values.row(i).to_vec()
}

fn column(values: &Array2<f64>, j: usize) -> Vec<f64> {
    values.column(j).to_vec()
}

fn mean(values: &Array2<f64>, u: usize) -> f64 {
    row(values, u).iter().sum::<f64>() / values.ncols() as f64
}

/// The k most similar indices to `target` among `candidates`, sorted by
/// descending similarity with ties by ascending index.
fn top_k(mut sims: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    sims.sort_by(|a, b| {
        if a.1 == b.1 {
            a.0.cmp(&b.0)
        } else {
            b.1.partial_cmp(&a.1).unwrap()
        }
    });
    sims.truncate(k);
    sims
}

/// Direct evaluation of the mean-centered user-based prediction formula.
/// Returns (scores, scorable) with unscorable entries left at negative
/// infinity.
pub fn user_cf_bruteforce(values: &Array2<f64>, u: usize, k: usize) -> (Vec<f64>, Vec<bool>) {
    let n_users = values.nrows();
    let m = values.ncols();
    let target = row(values, u);
    let sims: Vec<(usize, f64)> = (0..n_users)
        .filter(|&v| v != u)
        .map(|v| (v, cosine(&target, &row(values, v))))
        .collect();
    let neighbors = top_k(sims, k);
    let denom: f64 = neighbors.iter().map(|&(_, s)| s.abs()).sum();
    if denom == 0.0 {
        return (vec![f64::NEG_INFINITY; m], vec![false; m]);
    }
    let mut scores = vec![0.0; m];
    for (i, slot) in scores.iter_mut().enumerate() {
        let num: f64 = neighbors
            .iter()
            .map(|&(v, s)| s * (values[(v, i)] - mean(values, v)))
            .sum();
        *slot = mean(values, u) + num / denom;
    }
    (scores, vec![true; m])
}

/// Direct evaluation of the item-based analogue over item columns.
pub fn item_cf_bruteforce(values: &Array2<f64>, u: usize, k: usize) -> (Vec<f64>, Vec<bool>) {
    let m = values.ncols();
    let mut scores = vec![f64::NEG_INFINITY; m];
    let mut mask = vec![false; m];
    for i in 0..m {
        let target = column(values, i);
        let sims: Vec<(usize, f64)> = (0..m)
            .filter(|&j| j != i)
            .map(|j| (j, cosine(&target, &column(values, j))))
            .collect();
        let neighbors = top_k(sims, k);
        let denom: f64 = neighbors.iter().map(|&(_, s)| s.abs()).sum();
        if denom == 0.0 {
            continue;
        }
        let num: f64 = neighbors.iter().map(|&(j, s)| s * values[(u, j)]).sum();
        scores[i] = num / denom;
        mask[i] = true;
    }
    (scores, mask)
}

/// Direct evaluation of the implicit-feedback pseudo-prediction: binarize,
/// then sum the similarities of each item's top-k neighbors the user has
/// consumed.
pub fn pseudo_bruteforce(values: &Array2<f64>, u: usize, k: usize) -> Vec<f64> {
    let bin = values.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let m = bin.ncols();
    let mut scores = vec![0.0; m];
    for (i, slot) in scores.iter_mut().enumerate() {
        let target = column(&bin, i);
        let sims: Vec<(usize, f64)> = (0..m)
            .filter(|&j| j != i)
            .map(|j| (j, cosine(&target, &column(&bin, j))))
            .collect();
        let neighbors = top_k(sims, k);
        *slot = neighbors
            .iter()
            .filter(|&&(j, _)| bin[(u, j)] > 0.0)
            .map(|&(_, s)| s)
            .sum();
    }
    scores
}

/// Naive second implementation of the reciprocal-rank metric.
pub fn map_naive(targets: &[u32], rankings: &[Vec<u32>]) -> f64 {
    let mut sum = 0.0;
    for (t, ranking) in targets.iter().zip(rankings) {
        let mut term = 0.0;
        for (idx, item) in ranking.iter().enumerate() {
            if item == t {
                term = 1.0 / (idx as f64 + 1.0);
                break;
            }
        }
        sum += term;
    }
    sum / targets.len() as f64
}
