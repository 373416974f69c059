//! Discrete hidden Markov model: scaled forward/backward passes,
//! multi-sequence Baum-Welch training and next-symbol prediction.
//!
//! Scaling convention: the forward pass renormalizes each row of alpha to
//! sum to 1 and stores `scale_factors[t] = 1 / (pre-normalization row sum)`,
//! so `log_likelihood = -sum(ln scale_factors)`. The backward pass uses the
//! same factors shifted by one step (`scaled_beta[T-1] = 1`), which makes
//! `sum_i alpha[t][i] * beta[t][i] = 1` at every step and lets the state
//! posterior be read off as the elementwise product.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model file format version written by [`save_model`].
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Tolerance for the row-stochasticity invariant.
const ROW_SUM_TOL: f64 = 1e-9;

/// A discrete HMM: initial distribution `pi` (N), row-stochastic transition
/// matrix `trans` (N x N) and emission matrix `emit` (N x M).
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    pi: Array1<f64>,
    trans: Array2<f64>,
    emit: Array2<f64>,
}

impl HmmModel {
    /// Validates the stochastic invariants and wraps the parameters.
    pub fn new(pi: Array1<f64>, trans: Array2<f64>, emit: Array2<f64>) -> Result<Self> {
        let n = pi.len();
        if n == 0 {
            return Err(Error::InvalidModel("model needs at least one state".into()));
        }
        if trans.nrows() != n || trans.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "transition matrix is {}x{}, expected {n}x{n}",
                trans.nrows(),
                trans.ncols()
            )));
        }
        if emit.nrows() != n {
            return Err(Error::InvalidModel(format!(
                "emission matrix has {} rows, expected {n}",
                emit.nrows()
            )));
        }
        if emit.ncols() == 0 {
            return Err(Error::InvalidModel(
                "model needs at least one symbol".into(),
            ));
        }
        check_distribution(pi.as_slice().expect("contiguous"), "pi")?;
        for (i, row) in trans.rows().into_iter().enumerate() {
            check_distribution(row.as_slice().expect("contiguous"), &format!("trans row {i}"))?;
        }
        for (i, row) in emit.rows().into_iter().enumerate() {
            check_distribution(row.as_slice().expect("contiguous"), &format!("emit row {i}"))?;
        }
        Ok(HmmModel { pi, trans, emit })
    }

    /// Draws each row of pi, trans and emit as independent uniform(0,1)
    /// values normalized to sum 1. All entries are strictly positive.
    pub fn random(n_states: usize, vocab_size: usize, rng: &mut impl Rng) -> Result<Self> {
        if n_states == 0 || vocab_size == 0 {
            return Err(Error::InvalidArgument(
                "model sizes must be >= 1".into(),
            ));
        }
        let pi = random_distribution(n_states, rng);
        let trans = random_rows(n_states, n_states, rng);
        let emit = random_rows(n_states, vocab_size, rng);
        HmmModel::new(Array1::from(pi), trans, emit)
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.emit.ncols()
    }

    pub fn pi(&self) -> &Array1<f64> {
        &self.pi
    }

    pub fn trans(&self) -> &Array2<f64> {
        &self.trans
    }

    pub fn emit(&self) -> &Array2<f64> {
        &self.emit
    }

    /// Samples one observation sequence. Draw order is fixed: initial state,
    /// then per step an emission draw followed by a transition draw.
    pub fn sample_sequence(&self, len: usize, rng: &mut impl Rng) -> Vec<u32> {
        let mut seq = Vec::with_capacity(len);
        if len == 0 {
            return seq;
        }
        let mut state = sample_categorical(self.pi.as_slice().expect("contiguous"), rng);
        for t in 0..len {
            let row = self.emit.row(state);
            seq.push(sample_categorical(row.as_slice().expect("contiguous"), rng) as u32);
            if t + 1 < len {
                let row = self.trans.row(state);
                state = sample_categorical(row.as_slice().expect("contiguous"), rng);
            }
        }
        seq
    }

    fn check_sequence(&self, seq: &[u32]) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::InvalidArgument("empty observation sequence".into()));
        }
        let m = self.vocab_size();
        for (position, &symbol) in seq.iter().enumerate() {
            if symbol as usize >= m {
                return Err(Error::SymbolOutOfVocab {
                    position,
                    symbol,
                    vocab: m,
                });
            }
        }
        Ok(())
    }
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &v in row {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidModel(format!(
                "{what} contains a negative or non-finite entry"
            )));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidModel(format!(
            "{what} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Uniform draw in (0, 1); rejects the measure-zero 0.0 so normalized rows
/// stay strictly positive.
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let x: f64 = rng.random();
        if x > 0.0 {
            return x;
        }
    }
}

fn random_distribution(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n).map(|_| open_unit(rng)).collect();
    let sum: f64 = row.iter().sum();
    for v in &mut row {
        *v /= sum;
    }
    row
}

fn random_rows(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut out = Array2::zeros((rows, cols));
    for i in 0..rows {
        let row = random_distribution(cols, rng);
        for (j, v) in row.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

fn sample_categorical(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut cdf = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cdf += w;
        if u < cdf {
            return i;
        }
    }
    weights.len() - 1
}

/// Random model, deterministic in the seed.
pub fn init_random(n_states: usize, vocab_size: usize, seed: u64) -> Result<HmmModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    HmmModel::random(n_states, vocab_size, &mut rng)
}

/// Output of the scaled forward pass.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    /// T x N matrix; every row sums to 1.
    pub scaled_alpha: Array2<f64>,
    /// Per-step scaling multipliers c_t = 1 / (pre-normalization row sum).
    pub scale_factors: Vec<f64>,
    /// log P[O | model] = -sum_t ln c_t.
    pub log_likelihood: f64,
}

/// Scaled forward pass over one sequence.
pub fn forward(model: &HmmModel, seq: &[u32]) -> Result<ForwardResult> {
    model.check_sequence(seq)?;
    let n = model.n_states();
    let m = model.vocab_size();
    let t_len = seq.len();
    let pi = model.pi.as_slice().expect("standard layout");
    let trans = model.trans.as_slice().expect("standard layout");
    let emit = model.emit.as_slice().expect("standard layout");

    let mut alpha = Array2::zeros((t_len, n));
    let mut scale = vec![0.0; t_len];
    let mut log_likelihood = 0.0;
    {
        let alpha = alpha.as_slice_mut().expect("standard layout");
        let mut acc = vec![0.0; n];
        for t in 0..t_len {
            let obs = seq[t] as usize;
            if t == 0 {
                for i in 0..n {
                    acc[i] = pi[i] * emit[i * m + obs];
                }
            } else {
                let prev = &alpha[(t - 1) * n..t * n];
                acc.fill(0.0);
                for (i, &p) in prev.iter().enumerate() {
                    let row = &trans[i * n..(i + 1) * n];
                    for (a, &w) in acc.iter_mut().zip(row) {
                        *a += p * w;
                    }
                }
                for (j, a) in acc.iter_mut().enumerate() {
                    *a *= emit[j * m + obs];
                }
            }
            let row_sum: f64 = acc.iter().sum();
            if !(row_sum.is_finite() && row_sum > 0.0) {
                return Err(Error::NonFinite {
                    context: format!("forward pass scaling at position {t}"),
                });
            }
            scale[t] = 1.0 / row_sum;
            log_likelihood += row_sum.ln();
            let out = &mut alpha[t * n..(t + 1) * n];
            for (o, &a) in out.iter_mut().zip(&acc) {
                *o = a * scale[t];
            }
        }
    }
    if !log_likelihood.is_finite() {
        return Err(Error::NonFinite {
            context: "forward pass log-likelihood".into(),
        });
    }
    Ok(ForwardResult {
        scaled_alpha: alpha,
        scale_factors: scale,
        log_likelihood,
    })
}

/// Scaled backward pass matching [`forward`]'s scale factors: the last row is
/// all ones and `scaled_beta[t] = c_{t+1} * trans . (emit[., o_{t+1}] *
/// scaled_beta[t+1])`.
pub fn backward(model: &HmmModel, seq: &[u32], scale_factors: &[f64]) -> Result<Array2<f64>> {
    model.check_sequence(seq)?;
    if scale_factors.len() != seq.len() {
        return Err(Error::InvalidArgument(format!(
            "scale factors length {} does not match sequence length {}",
            scale_factors.len(),
            seq.len()
        )));
    }
    let n = model.n_states();
    let m = model.vocab_size();
    let t_len = seq.len();
    let trans = model.trans.as_slice().expect("standard layout");
    let emit = model.emit.as_slice().expect("standard layout");

    let mut beta = Array2::zeros((t_len, n));
    {
        let beta = beta.as_slice_mut().expect("standard layout");
        beta[(t_len - 1) * n..t_len * n].fill(1.0);
        let mut weighted = vec![0.0; n];
        for t in (0..t_len - 1).rev() {
            let obs_next = seq[t + 1] as usize;
            let c_next = scale_factors[t + 1];
            {
                let next = &beta[(t + 1) * n..(t + 2) * n];
                for (j, w) in weighted.iter_mut().enumerate() {
                    *w = emit[j * m + obs_next] * next[j];
                }
            }
            let row_out = &mut beta[t * n..(t + 1) * n];
            for (i, out) in row_out.iter_mut().enumerate() {
                let row = &trans[i * n..(i + 1) * n];
                let mut sum = 0.0;
                for (a, w) in row.iter().zip(&weighted) {
                    sum += a * w;
                }
                *out = sum * c_next;
            }
        }
    }
    Ok(beta)
}

/// Distribution over the next symbol given an observed prefix: the state
/// posterior at the final step is propagated through one transition and the
/// emission matrix.
pub fn next_symbol_distribution(model: &HmmModel, seq: &[u32]) -> Result<Vec<f64>> {
    let fwd = forward(model, seq)?;
    let last = fwd.scaled_alpha.row(fwd.scaled_alpha.nrows() - 1);
    let next_state = last.dot(&model.trans);
    let dist = next_state.dot(&model.emit);
    Ok(dist.to_vec())
}

/// Training summary: how many parameter updates ran, the total
/// log-likelihood after each (element 0 is the initial model's), and whether
/// the relative-improvement stop fired before the iteration budget ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub iterations_run: usize,
    pub log_likelihood_trace: Vec<f64>,
    pub converged: bool,
}

impl TrainReport {
    pub fn final_log_likelihood(&self) -> f64 {
        *self
            .log_likelihood_trace
            .last()
            .expect("trace is never empty")
    }
}

/// Expected counts pooled over all sequences in one E-step.
struct PooledStats {
    pi: Array1<f64>,
    trans: Array2<f64>,
    emit: Array2<f64>,
}

fn e_step(model: &HmmModel, sequences: &[Vec<u32>]) -> Result<(PooledStats, f64)> {
    let n = model.n_states();
    let m = model.vocab_size();

    // Per-sequence stats are computed in parallel but pooled in sequence
    // index order, so the result does not depend on thread scheduling.
    let per_seq: Vec<(PooledStats, f64)> = sequences
        .par_iter()
        .map(|seq| sequence_stats(model, seq))
        .collect::<Result<_>>()?;

    let mut pooled = PooledStats {
        pi: Array1::zeros(n),
        trans: Array2::zeros((n, n)),
        emit: Array2::zeros((n, m)),
    };
    let mut log_likelihood = 0.0;
    for (stats, ll) in per_seq {
        pooled.pi += &stats.pi;
        pooled.trans += &stats.trans;
        pooled.emit += &stats.emit;
        log_likelihood += ll;
    }
    if !log_likelihood.is_finite() {
        return Err(Error::NonFinite {
            context: "total log-likelihood".into(),
        });
    }
    Ok((pooled, log_likelihood))
}

fn sequence_stats(model: &HmmModel, seq: &[u32]) -> Result<(PooledStats, f64)> {
    let fwd = forward(model, seq)?;
    let beta = backward(model, seq, &fwd.scale_factors)?;
    let n = model.n_states();
    let m = model.vocab_size();
    let t_len = seq.len();

    let mut stats = PooledStats {
        pi: Array1::zeros(n),
        trans: Array2::zeros((n, n)),
        emit: Array2::zeros((n, m)),
    };

    let alpha = fwd.scaled_alpha.as_slice().expect("standard layout");
    let beta_s = beta.as_slice().expect("standard layout");
    let trans = model.trans.as_slice().expect("standard layout");
    let emit = model.emit.as_slice().expect("standard layout");
    let pi_acc = stats.pi.as_slice_mut().expect("standard layout");
    let trans_acc = stats.trans.as_slice_mut().expect("standard layout");
    let emit_acc = stats.emit.as_slice_mut().expect("standard layout");

    // gamma_t(i) = alpha_t(i) * beta_t(i), already normalized per step.
    for t in 0..t_len {
        let obs = seq[t] as usize;
        for i in 0..n {
            let g = alpha[t * n + i] * beta_s[t * n + i];
            if t == 0 {
                pi_acc[i] += g;
            }
            emit_acc[i * m + obs] += g;
        }
    }

    // xi_t(i,j) = c_{t+1} * alpha_t(i) * a_ij * b_j(o_{t+1}) * beta_{t+1}(j).
    let mut weighted = vec![0.0; n];
    for t in 0..t_len - 1 {
        let obs_next = seq[t + 1] as usize;
        let c_next = fwd.scale_factors[t + 1];
        for (j, w) in weighted.iter_mut().enumerate() {
            *w = emit[j * m + obs_next] * beta_s[(t + 1) * n + j];
        }
        for i in 0..n {
            let a_scaled = alpha[t * n + i] * c_next;
            let row = &trans[i * n..(i + 1) * n];
            let acc = &mut trans_acc[i * n..(i + 1) * n];
            for ((slot, &a), &w) in acc.iter_mut().zip(row).zip(&weighted) {
                *slot += a_scaled * a * w;
            }
        }
    }

    Ok((stats, fwd.log_likelihood))
}

/// Re-estimates the parameters from pooled expected counts. `smoothing` is
/// added to every trans/emit numerator before row normalization; a row whose
/// expected counts vanish entirely (possible only with zero smoothing) keeps
/// its previous value.
fn m_step(model: &HmmModel, stats: &PooledStats, smoothing: f64) -> Result<HmmModel> {
    let n = model.n_states();
    let m = model.vocab_size();

    let pi_sum = stats.pi.sum();
    let pi = if pi_sum > 0.0 {
        &stats.pi / pi_sum
    } else {
        model.pi.clone()
    };

    let mut trans = Array2::zeros((n, n));
    for i in 0..n {
        let row_sum: f64 = stats.trans.row(i).sum() + smoothing * n as f64;
        if row_sum > 0.0 {
            for j in 0..n {
                trans[(i, j)] = (stats.trans[(i, j)] + smoothing) / row_sum;
            }
        } else {
            trans.row_mut(i).assign(&model.trans.row(i));
        }
    }

    let mut emit = Array2::zeros((n, m));
    for i in 0..n {
        let row_sum: f64 = stats.emit.row(i).sum() + smoothing * m as f64;
        if row_sum > 0.0 {
            for k in 0..m {
                emit[(i, k)] = (stats.emit[(i, k)] + smoothing) / row_sum;
            }
        } else {
            emit.row_mut(i).assign(&model.emit.row(i));
        }
    }

    HmmModel::new(pi, trans, emit)
}

/// One Baum-Welch update. Returns the re-estimated model together with the
/// total log-likelihood of `sequences` under the *input* model.
pub fn baum_welch_step(
    model: &HmmModel,
    sequences: &[Vec<u32>],
    smoothing: f64,
) -> Result<(HmmModel, f64)> {
    let (stats, ll) = e_step(model, sequences)?;
    let updated = m_step(model, &stats, smoothing)?;
    Ok((updated, ll))
}

/// Multi-sequence Baum-Welch: expected counts are pooled across all
/// sequences before each renormalization. Stops after `max_iters` updates or
/// once the relative improvement `(ll - prev) / (|prev| + 1)` drops below
/// `tol`, whichever comes first.
///
/// With zero smoothing the trace is non-decreasing up to float round-off.
/// Smoothing turns each update into a posterior-mode step whose monotone
/// quantity is the smoothed objective; at the default 1e-6 the raw trace
/// still moves monotonically to well below any practical slack, but large
/// smoothing values can show small raw-likelihood dips near convergence.
pub fn baum_welch(
    init: HmmModel,
    sequences: &[Vec<u32>],
    max_iters: usize,
    tol: f64,
    smoothing: f64,
) -> Result<(HmmModel, TrainReport)> {
    if sequences.is_empty() {
        return Err(Error::InvalidArgument(
            "baum_welch needs at least one sequence".into(),
        ));
    }
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    if !smoothing.is_finite() || smoothing < 0.0 {
        return Err(Error::InvalidArgument("smoothing must be >= 0".into()));
    }

    let mut model = init;
    let (mut stats, mut ll) = e_step(&model, sequences)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations_run = 0;

    for _ in 0..max_iters {
        model = m_step(&model, &stats, smoothing)?;
        iterations_run += 1;
        let (next_stats, next_ll) = e_step(&model, sequences)?;
        stats = next_stats;
        trace.push(next_ll);
        let improvement = (next_ll - ll) / (ll.abs() + 1.0);
        ll = next_ll;
        if improvement < tol {
            converged = true;
            break;
        }
    }

    Ok((
        model,
        TrainReport {
            iterations_run,
            log_likelihood_trace: trace,
            converged,
        },
    ))
}

/// Total log-likelihood of a set of sequences (forward pass only).
pub fn log_likelihood(model: &HmmModel, sequences: &[Vec<u32>]) -> Result<f64> {
    let lls: Vec<f64> = sequences
        .par_iter()
        .map(|seq| forward(model, seq).map(|f| f.log_likelihood))
        .collect::<Result<_>>()?;
    Ok(lls.iter().sum())
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    n_states: usize,
    m_symbols: usize,
    pi: Vec<f64>,
    trans: Vec<Vec<f64>>,
    emit: Vec<Vec<f64>>,
}

/// Writes the model as a versioned JSON document. Floats are serialized in
/// shortest round-trip form, so save -> load -> save is byte-identical.
pub fn save_model(model: &HmmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        n_states: model.n_states(),
        m_symbols: model.vocab_size(),
        pi: model.pi.to_vec(),
        trans: model.trans.rows().into_iter().map(|r| r.to_vec()).collect(),
        emit: model.emit.rows().into_iter().map(|r| r.to_vec()).collect(),
    };
    let mut text = serde_json::to_string(&file).expect("model serialization cannot fail");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads and validates a model file written by [`save_model`].
pub fn load_model(path: impl AsRef<Path>) -> Result<HmmModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::ModelFormat("missing format_version".into()))?;
    if version != MODEL_FORMAT_VERSION as u64 {
        return Err(Error::ModelVersion {
            found: version as u32,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if file.pi.len() != file.n_states {
        return Err(Error::InvalidModel(format!(
            "pi has {} entries, n_states is {}",
            file.pi.len(),
            file.n_states
        )));
    }
    let trans = rows_to_matrix(file.trans, file.n_states, file.n_states, "trans")?;
    let emit = rows_to_matrix(file.emit, file.n_states, file.m_symbols, "emit")?;
    HmmModel::new(Array1::from(file.pi), trans, emit)
}

fn rows_to_matrix(
    rows: Vec<Vec<f64>>,
    n_rows: usize,
    n_cols: usize,
    what: &str,
) -> Result<Array2<f64>> {
    if rows.len() != n_rows {
        return Err(Error::InvalidModel(format!(
            "{what} has {} rows, expected {n_rows}",
            rows.len()
        )));
    }
    let mut out = Array2::zeros((n_rows, n_cols));
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != n_cols {
            return Err(Error::InvalidModel(format!(
                "{what} row {i} has {} entries, expected {n_cols}",
                row.len()
            )));
        }
        for (j, v) in row.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn two_state_model() -> HmmModel {
        HmmModel::new(
            array![0.6, 0.4],
            array![[0.7, 0.3], [0.4, 0.6]],
            array![[0.9, 0.1], [0.2, 0.8]],
        )
        .unwrap()
    }

    #[test]
    fn init_random_single_cell_is_exact() {
        let m = init_random(1, 1, 99).unwrap();
        assert_eq!(m.pi().as_slice().unwrap(), &[1.0]);
        assert_eq!(m.trans()[(0, 0)], 1.0);
        assert_eq!(m.emit()[(0, 0)], 1.0);
    }

    #[test]
    fn init_random_is_deterministic() {
        assert_eq!(init_random(3, 5, 11).unwrap(), init_random(3, 5, 11).unwrap());
    }

    #[test]
    fn init_random_rows_are_distributions() {
        let m = init_random(2, 4, 3).unwrap();
        for &v in m.pi().iter().chain(m.trans().iter()).chain(m.emit().iter()) {
            assert!(v > 0.0 && v < 1.0);
        }
        assert_abs_diff_eq!(m.pi().sum(), 1.0, epsilon = 1e-12);
        for row in m.trans().rows() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
        for row in m.emit().rows() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn init_random_rejects_zero_sizes() {
        assert!(matches!(
            init_random(0, 3, 0).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn forward_single_state_product_of_emissions() {
        let m = HmmModel::new(array![1.0], array![[1.0]], array![[0.5, 0.5]]).unwrap();
        let fwd = forward(&m, &[0, 1]).unwrap();
        assert_abs_diff_eq!(fwd.log_likelihood.exp(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn forward_length_one_is_pi_dot_emission() {
        let m = two_state_model();
        let fwd = forward(&m, &[1]).unwrap();
        let expected = 0.6 * 0.1 + 0.4 * 0.8;
        assert_abs_diff_eq!(fwd.log_likelihood.exp(), expected, epsilon = 1e-15);
    }

    #[test]
    fn forward_rows_are_normalized() {
        let m = two_state_model();
        let fwd = forward(&m, &[0, 1, 0, 1, 1]).unwrap();
        for row in fwd.scaled_alpha.rows() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
        assert_eq!(fwd.scale_factors.len(), 5);
    }

    #[test]
    fn forward_rejects_out_of_vocab_symbol() {
        let m = two_state_model();
        match forward(&m, &[0, 5, 1]).unwrap_err() {
            Error::SymbolOutOfVocab {
                position, symbol, ..
            } => {
                assert_eq!(position, 1);
                assert_eq!(symbol, 5);
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn forward_rejects_empty_sequence() {
        let m = two_state_model();
        assert!(matches!(
            forward(&m, &[]).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn backward_last_row_is_ones_and_product_is_constant() {
        let m = two_state_model();
        let seq = [0, 1, 0];
        let fwd = forward(&m, &seq).unwrap();
        let beta = backward(&m, &seq, &fwd.scale_factors).unwrap();
        for &v in beta.row(2).iter() {
            assert_eq!(v, 1.0);
        }
        for t in 0..seq.len() {
            let prod: f64 = (0..2).map(|i| fwd.scaled_alpha[(t, i)] * beta[(t, i)]).sum();
            assert_abs_diff_eq!(prod, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn backward_rejects_length_mismatch() {
        let m = two_state_model();
        let fwd = forward(&m, &[0, 1, 0]).unwrap();
        assert!(matches!(
            backward(&m, &[0, 1], &fwd.scale_factors).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn one_step_update_on_constant_sequence_is_exact() {
        let init = HmmModel::new(array![1.0], array![[1.0]], array![[0.6, 0.4]]).unwrap();
        let seqs = vec![vec![0, 0, 0, 0]];
        let (model, report) = baum_welch(init, &seqs, 1, 1e-12, 0.0).unwrap();
        assert_eq!(report.iterations_run, 1);
        assert_eq!(model.emit().row(0).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn training_improves_log_likelihood() {
        let planted = init_random(2, 5, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seqs: Vec<Vec<u32>> = (0..40).map(|_| planted.sample_sequence(12, &mut rng)).collect();
        let init = init_random(2, 5, 23).unwrap();
        let (_, report) = baum_welch(init, &seqs, 2, 1e-12, 1e-6).unwrap();
        assert!(report.log_likelihood_trace[1] >= report.log_likelihood_trace[0]);
    }

    #[test]
    fn stochastic_invariants_hold_after_every_iteration() {
        let planted = init_random(3, 6, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seqs: Vec<Vec<u32>> = (0..25).map(|_| planted.sample_sequence(10, &mut rng)).collect();
        let mut model = init_random(3, 6, 4).unwrap();
        for _ in 0..10 {
            let (next, _) = baum_welch_step(&model, &seqs, 1e-6).unwrap();
            // HmmModel::new validates; re-wrap to exercise the checks.
            model = HmmModel::new(next.pi().clone(), next.trans().clone(), next.emit().clone())
                .unwrap();
        }
    }

    #[test]
    fn baum_welch_rejects_bad_arguments() {
        let m = init_random(2, 2, 0).unwrap();
        assert!(matches!(
            baum_welch(m.clone(), &[], 10, 1e-4, 0.0).unwrap_err(),
            Error::InvalidArgument(_)
        ));
        assert!(matches!(
            baum_welch(m.clone(), &[vec![0, 1]], 0, 1e-4, 0.0).unwrap_err(),
            Error::InvalidArgument(_)
        ));
        assert!(matches!(
            baum_welch(m, &[vec![0, 1]], 10, -1.0, 0.0).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn next_symbol_single_state_returns_emission_row() {
        let m = HmmModel::new(array![1.0], array![[1.0]], array![[0.7, 0.2, 0.1]]).unwrap();
        let p = next_symbol_distribution(&m, &[2, 0, 1]).unwrap();
        assert_eq!(p, vec![0.7, 0.2, 0.1]);
    }

    #[test]
    fn next_symbol_deterministic_cycle() {
        // Two states that alternate deterministically and emit their index.
        let m = HmmModel::new(
            array![1.0, 0.0],
            array![[0.0, 1.0], [1.0, 0.0]],
            array![[1.0, 0.0], [0.0, 1.0]],
        )
        .unwrap();
        let p = next_symbol_distribution(&m, &[0, 1, 0]).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
    }

    #[test]
    fn next_symbol_sums_to_one() {
        let m = init_random(4, 7, 8).unwrap();
        let p = next_symbol_distribution(&m, &[0, 3, 6, 2, 2]).unwrap();
        let sum: f64 = p.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn model_file_round_trip_is_byte_identical() {
        let m = init_random(3, 4, 21).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        save_model(&m, &p1).unwrap();
        let loaded = load_model(&p1).unwrap();
        assert_eq!(loaded, m);
        save_model(&loaded, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn hand_written_single_state_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"{"format_version":1,"n_states":1,"m_symbols":2,"pi":[1.0],"trans":[[1.0]],"emit":[[0.25,0.75]]}"#,
        )
        .unwrap();
        let m = load_model(&path).unwrap();
        assert_eq!(m.pi().as_slice().unwrap(), &[1.0]);
        assert_eq!(m.emit().row(0).to_vec(), vec![0.25, 0.75]);
    }

    #[test]
    fn tampered_row_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"{"format_version":1,"n_states":1,"m_symbols":2,"pi":[1.0],"trans":[[1.0]],"emit":[[0.4,0.4]]}"#,
        )
        .unwrap();
        assert!(matches!(load_model(&path).unwrap_err(), Error::InvalidModel(_)));
    }

    #[test]
    fn version_mismatch_is_its_own_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"{"format_version":2,"n_states":1,"m_symbols":1,"pi":[1.0],"trans":[[1.0]],"emit":[[1.0]]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_model(&path).unwrap_err(),
            Error::ModelVersion {
                found: 2,
                expected: 1
            }
        ));
    }

    #[test]
    fn malformed_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, "not json").unwrap();
        assert!(matches!(load_model(&path).unwrap_err(), Error::ModelFormat(_)));
    }
}
