//! User- and item-based collaborative filtering over the play-count matrix:
//! cosine similarity, k-nearest neighborhoods, mean-centered prediction and
//! the implicit-feedback pseudo-prediction over binarized counts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// User x artist play-count matrix with per-user mean ratings. The mean is
/// taken over all M columns, zeros included.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    values: Array2<f64>,
    row_means: Vec<f64>,
}

impl RatingMatrix {
    /// Entry (u, a) counts how often artist `a` appears in sequence `u`.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut values = Array2::zeros((corpus.n_users(), corpus.vocab_size()));
        for (u, seq) in corpus.sequences().iter().enumerate() {
            for &a in seq {
                values[(u, a as usize)] += 1.0;
            }
        }
        Self::from_values(values)
    }

    pub fn from_values(values: Array2<f64>) -> Self {
        let m = values.ncols() as f64;
        let row_means = values.rows().into_iter().map(|r| r.sum() / m).collect();
        RatingMatrix { values, row_means }
    }

    /// Same shape with every positive count replaced by 1.
    pub fn binarized(&self) -> RatingMatrix {
        Self::from_values(self.values.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }))
    }

    pub fn n_users(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, u: usize) -> ArrayView1<'_, f64> {
        self.values.row(u)
    }

    pub fn row_mean(&self, u: usize) -> f64 {
        self.row_means[u]
    }
}

fn cosine_views(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let dot = a.dot(&b);
    let na_sq = a.dot(&a);
    let nb_sq = b.dot(&b);
    if na_sq == 0.0 || nb_sq == 0.0 {
        return 0.0;
    }
    // One sqrt of the product keeps identical vectors at exactly 1.0; the
    // min guards the last ulp of drift on near-parallel ones.
    (dot / (na_sq * nb_sq).sqrt()).min(1.0)
}

/// Cosine similarity in [0, 1] for non-negative count vectors; 0 when either
/// vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "cosine_similarity got vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(cosine_views(ArrayView1::from(a), ArrayView1::from(b)))
}

/// The k nearest entities (users or items) by cosine similarity, sorted by
/// descending similarity with exact ties broken by ascending index. Never
/// contains the query entity itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub ids: Vec<usize>,
    pub sims: Vec<f64>,
}

fn select_neighbors(sims: impl Iterator<Item = (usize, f64)>, k: usize) -> Neighborhood {
    let mut all: Vec<(usize, f64)> = sims.collect();
    all.sort_by(|a, b| {
        if a.1 == b.1 {
            a.0.cmp(&b.0)
        } else {
            b.1.total_cmp(&a.1)
        }
    });
    all.truncate(k);
    Neighborhood {
        ids: all.iter().map(|&(i, _)| i).collect(),
        sims: all.iter().map(|&(_, s)| s).collect(),
    }
}

/// The k users most cosine-similar to user `u`, excluding `u` itself.
pub fn user_neighborhood(matrix: &RatingMatrix, u: usize, k: usize) -> Result<Neighborhood> {
    if u >= matrix.n_users() {
        return Err(Error::InvalidArgument(format!(
            "user index {u} out of range (matrix has {} users)",
            matrix.n_users()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("neighborhood size must be >= 1".into()));
    }
    let target = matrix.row(u);
    let sims = (0..matrix.n_users())
        .filter(|&v| v != u)
        .map(|v| (v, cosine_views(target, matrix.row(v))));
    Ok(select_neighbors(sims, k))
}

/// Dense item-item cosine similarity table, precomputed once per corpus so
/// per-user scoring stays cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSimilarity {
    sims: Array2<f64>,
}

impl ItemSimilarity {
    /// Cosine similarity between every pair of item columns.
    pub fn from_matrix(matrix: &RatingMatrix) -> Self {
        let x = matrix.values();
        let gram = x.t().dot(x);
        let m = matrix.n_items();
        let norms_sq: Vec<f64> = (0..m).map(|i| gram[(i, i)]).collect();
        let mut sims = Array2::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                sims[(i, j)] = if norms_sq[i] == 0.0 || norms_sq[j] == 0.0 {
                    0.0
                } else {
                    (gram[(i, j)] / (norms_sq[i] * norms_sq[j]).sqrt()).min(1.0)
                };
            }
        }
        ItemSimilarity { sims }
    }

    /// Similarities over the binarized matrix (consumed / not consumed).
    pub fn from_binarized(matrix: &RatingMatrix) -> Self {
        Self::from_matrix(&matrix.binarized())
    }

    pub fn n_items(&self) -> usize {
        self.sims.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sims[(i, j)]
    }

    /// Binary cache dump: magic, source flag, dimension, corpus content hash,
    /// then the table as little-endian f64. The stored hash lets callers
    /// detect a cache built from a different corpus.
    pub fn save(&self, path: impl AsRef<Path>, corpus_hash: &[u8; 32], binary_source: bool) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::io(path, e);
        w.write_all(CACHE_MAGIC).map_err(io_err)?;
        w.write_all(&[u8::from(binary_source)]).map_err(io_err)?;
        w.write_all(&(self.n_items() as u64).to_le_bytes()).map_err(io_err)?;
        w.write_all(corpus_hash).map_err(io_err)?;
        for &v in self.sims.iter() {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    /// Loads a cache dump, returning the table together with the corpus hash
    /// and source flag it was built from.
    pub fn load(path: impl AsRef<Path>) -> Result<(ItemSimilarity, [u8; 32], bool)> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io_err = |e| Error::io(path, e);

        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::CacheFormat("bad magic bytes".into()));
        }
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag).map_err(io_err)?;
        if flag[0] > 1 {
            return Err(Error::CacheFormat(format!("bad source flag {}", flag[0])));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(io_err)?;
        let m = u64::from_le_bytes(len) as usize;
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash).map_err(io_err)?;

        let mut data = vec![0.0f64; m * m];
        let mut buf = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut buf).map_err(|_| {
                Error::CacheFormat("file truncated before the full similarity table".into())
            })?;
            *v = f64::from_le_bytes(buf);
        }
        if r.read(&mut buf).map_err(io_err)? != 0 {
            return Err(Error::CacheFormat("trailing bytes after table".into()));
        }
        let sims = Array2::from_shape_vec((m, m), data)
            .map_err(|e| Error::CacheFormat(e.to_string()))?;
        Ok((ItemSimilarity { sims }, hash, flag[0] == 1))
    }
}

const CACHE_MAGIC: &[u8; 8] = b"PSQSIM\x001";

/// The k items most similar to `item`, excluding itself.
pub fn item_neighborhood(sims: &ItemSimilarity, item: usize, k: usize) -> Result<Neighborhood> {
    if item >= sims.n_items() {
        return Err(Error::InvalidArgument(format!(
            "item index {item} out of range (table has {} items)",
            sims.n_items()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("neighborhood size must be >= 1".into()));
    }
    let row = sims.sims.row(item);
    let candidates = (0..sims.n_items())
        .filter(|&j| j != item)
        .map(|j| (j, row[j]));
    Ok(select_neighbors(candidates, k))
}

/// Neighborhoods for every item at once (shared across users).
pub fn item_neighborhoods(sims: &ItemSimilarity, k: usize) -> Result<Vec<Neighborhood>> {
    if k == 0 {
        return Err(Error::InvalidArgument("neighborhood size must be >= 1".into()));
    }
    (0..sims.n_items())
        .into_par_iter()
        .map(|i| item_neighborhood(sims, i, k))
        .collect()
}

/// Predicted preference per artist for one user. Entries without any
/// similar-neighbor evidence are marked non-scorable and carry a
/// negative-infinity sentinel score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub mask: Vec<bool>,
}

impl ScoreVector {
    /// All entries scorable (probability vectors, frequency counts).
    pub fn dense(scores: Vec<f64>) -> Self {
        let mask = vec![true; scores.len()];
        ScoreVector { scores, mask }
    }

    fn unscorable(len: usize) -> Self {
        ScoreVector {
            scores: vec![f64::NEG_INFINITY; len],
            mask: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Mean-centered user-based prediction:
/// `P(u,i) = mean_u + sum_{v in N} s(u,v) * (r(v,i) - mean_v) / sum |s|`.
/// When the neighborhood similarities all vanish no item is scorable.
pub fn user_cf_scores(matrix: &RatingMatrix, u: usize, k: usize) -> Result<ScoreVector> {
    let nbhd = user_neighborhood(matrix, u, k)?;
    let denom: f64 = nbhd.sims.iter().map(|s| s.abs()).sum();
    let m = matrix.n_items();
    if denom == 0.0 {
        return Ok(ScoreVector::unscorable(m));
    }
    let mut acc = Array1::zeros(m);
    for (&v, &s) in nbhd.ids.iter().zip(&nbhd.sims) {
        let centered = &matrix.row(v) - matrix.row_mean(v);
        acc += &(centered * s);
    }
    let scores = acc.mapv(|x| matrix.row_mean(u) + x / denom);
    Ok(ScoreVector::dense(scores.to_vec()))
}

/// Item-based prediction from precomputed neighborhoods:
/// `P(u,i) = sum_{j in N(i)} s(i,j) * r(u,j) / sum |s|`, non-scorable where
/// the denominator vanishes.
pub fn item_cf_scores_with(
    matrix: &RatingMatrix,
    neighborhoods: &[Neighborhood],
    u: usize,
) -> Result<ScoreVector> {
    if u >= matrix.n_users() {
        return Err(Error::InvalidArgument(format!(
            "user index {u} out of range (matrix has {} users)",
            matrix.n_users()
        )));
    }
    if neighborhoods.len() != matrix.n_items() {
        return Err(Error::InvalidArgument(format!(
            "{} neighborhoods for {} items",
            neighborhoods.len(),
            matrix.n_items()
        )));
    }
    let row = matrix.row(u);
    let mut scores = vec![f64::NEG_INFINITY; matrix.n_items()];
    let mut mask = vec![false; matrix.n_items()];
    for (i, nbhd) in neighborhoods.iter().enumerate() {
        let denom: f64 = nbhd.sims.iter().map(|s| s.abs()).sum();
        if denom == 0.0 {
            continue;
        }
        let num: f64 = nbhd
            .ids
            .iter()
            .zip(&nbhd.sims)
            .map(|(&j, &s)| s * row[j])
            .sum();
        scores[i] = num / denom;
        mask[i] = true;
    }
    Ok(ScoreVector { scores, mask })
}

/// Item-based prediction, computing the per-item neighborhoods on the fly.
pub fn item_cf_scores(
    matrix: &RatingMatrix,
    sims: &ItemSimilarity,
    u: usize,
    k: usize,
) -> Result<ScoreVector> {
    let neighborhoods = item_neighborhoods(sims, k)?;
    item_cf_scores_with(matrix, &neighborhoods, u)
}

/// Implicit-feedback pseudo-prediction over binarized data: the score of
/// item i is the sum of similarities to its top-k neighbors that the user
/// has consumed. `bin_sims` must be built from the binarized matrix (see
/// [`ItemSimilarity::from_binarized`]); consumption means a positive count.
pub fn pseudo_scores_binary_with(
    matrix: &RatingMatrix,
    bin_neighborhoods: &[Neighborhood],
    u: usize,
) -> Result<ScoreVector> {
    if u >= matrix.n_users() {
        return Err(Error::InvalidArgument(format!(
            "user index {u} out of range (matrix has {} users)",
            matrix.n_users()
        )));
    }
    if bin_neighborhoods.len() != matrix.n_items() {
        return Err(Error::InvalidArgument(format!(
            "{} neighborhoods for {} items",
            bin_neighborhoods.len(),
            matrix.n_items()
        )));
    }
    let row = matrix.row(u);
    let scores = bin_neighborhoods
        .iter()
        .map(|nbhd| {
            nbhd.ids
                .iter()
                .zip(&nbhd.sims)
                .filter(|&(&j, _)| row[j] > 0.0)
                .map(|(_, &s)| s)
                .sum()
        })
        .collect();
    Ok(ScoreVector::dense(scores))
}

/// Pseudo-prediction with neighborhoods computed on the fly.
pub fn pseudo_scores_binary(
    matrix: &RatingMatrix,
    bin_sims: &ItemSimilarity,
    u: usize,
    k: usize,
) -> Result<ScoreVector> {
    let neighborhoods = item_neighborhoods(bin_sims, k)?;
    pseudo_scores_binary_with(matrix, &neighborhoods, u)
}
