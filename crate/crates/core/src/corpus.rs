//! Play-sequence corpus: CSV ingestion, synthetic generation from a planted
//! model, global frequency statistics and leave-last-out splitting.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hmm::HmmModel;

/// Bijection between external artist codes (as they appear in input files)
/// and dense internal ids `0..vocab_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdMap {
    to_external: Vec<u64>,
    to_internal: HashMap<u64, u32>,
}

impl IdMap {
    /// Identity mapping over `0..n` (used by synthetic corpora).
    pub fn identity(n: usize) -> Self {
        let to_external: Vec<u64> = (0..n as u64).collect();
        let to_internal = to_external
            .iter()
            .enumerate()
            .map(|(i, &code)| (code, i as u32))
            .collect();
        IdMap {
            to_external,
            to_internal,
        }
    }

    fn new() -> Self {
        IdMap {
            to_external: Vec::new(),
            to_internal: HashMap::new(),
        }
    }

    /// Returns the internal id for `code`, assigning the next dense id on
    /// first appearance.
    fn intern(&mut self, code: u64) -> u32 {
        match self.to_internal.get(&code) {
            Some(&id) => id,
            None => {
                let id = self.to_external.len() as u32;
                self.to_external.push(code);
                self.to_internal.insert(code, id);
                id
            }
        }
    }

    pub fn len(&self) -> usize {
        self.to_external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_external.is_empty()
    }

    pub fn external(&self, internal: u32) -> Option<u64> {
        self.to_external.get(internal as usize).copied()
    }

    pub fn internal(&self, external: u64) -> Option<u32> {
        self.to_internal.get(&external).copied()
    }
}

/// A rectangular table of per-user play sequences over a dense artist
/// vocabulary. Sequences all share one length and every id is below
/// `vocab_size`; external artist codes are recoverable through [`IdMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    sequences: Vec<Vec<u32>>,
    vocab_size: usize,
    id_map: IdMap,
}

impl Corpus {
    /// Builds a corpus from already-interned sequences, checking the shape
    /// invariants: at least one sequence, uniform non-zero length, all ids
    /// below `vocab_size`, and an id map covering the whole vocabulary.
    pub fn new(sequences: Vec<Vec<u32>>, vocab_size: usize, id_map: IdMap) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::InvalidArgument("corpus has no sequences".into()));
        }
        let t = sequences[0].len();
        if t == 0 {
            return Err(Error::InvalidArgument("corpus sequences are empty".into()));
        }
        for (u, seq) in sequences.iter().enumerate() {
            if seq.len() != t {
                return Err(Error::InvalidArgument(format!(
                    "sequence {u} has length {}, expected {t}",
                    seq.len()
                )));
            }
            for &a in seq {
                if a as usize >= vocab_size {
                    return Err(Error::InvalidArgument(format!(
                        "sequence {u} contains id {a} >= vocab size {vocab_size}"
                    )));
                }
            }
        }
        if id_map.len() != vocab_size {
            return Err(Error::InvalidArgument(format!(
                "id map covers {} ids, vocab size is {vocab_size}",
                id_map.len()
            )));
        }
        Ok(Corpus {
            sequences,
            vocab_size,
            id_map,
        })
    }

    /// U, the number of users.
    pub fn n_users(&self) -> usize {
        self.sequences.len()
    }

    /// T, the shared sequence length.
    pub fn seq_len(&self) -> usize {
        self.sequences[0].len()
    }

    /// M, the number of distinct artist ids representable.
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn sequences(&self) -> &[Vec<u32>] {
        &self.sequences
    }

    pub fn sequence(&self, u: usize) -> &[u32] {
        &self.sequences[u]
    }

    pub fn id_map(&self) -> &IdMap {
        &self.id_map
    }

    /// SHA-256 over the corpus shape and the external codes of every cell in
    /// row-major order. Used to key the item-similarity cache file.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update((self.n_users() as u64).to_le_bytes());
        hasher.update((self.seq_len() as u64).to_le_bytes());
        hasher.update((self.vocab_size as u64).to_le_bytes());
        for seq in &self.sequences {
            for &a in seq {
                let code = self.id_map.external(a).expect("id within vocab");
                hasher.update(code.to_le_bytes());
            }
        }
        hasher.finalize().into()
    }
}

/// Global occurrence counts per artist over all positions of all sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
    total: u64,
}

impl FrequencyTable {
    /// Table with the given per-artist counts; the total is their sum.
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        FrequencyTable { counts, total }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Count for one artist; ids outside the table count as zero.
    pub fn count(&self, artist: u32) -> u64 {
        self.counts.get(artist as usize).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }
}

/// Leave-last-out split: every sequence loses its final item, which becomes
/// that user's prediction target.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    pub prefixes: Corpus,
    pub targets: Vec<u32>,
}

/// Loads a headerless CSV of non-negative integer artist codes, one user per
/// row. Codes are re-indexed to dense ids in order of first appearance; the
/// original codes are preserved in the corpus id map. Accepts LF or CRLF line
/// endings; neither a header row nor a user-id column is supported.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(path, &text)
}

fn parse_csv(path: &Path, text: &str) -> Result<Corpus> {
    let mut id_map = IdMap::new();
    let mut sequences: Vec<Vec<u32>> = Vec::new();
    let mut width = 0usize;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if sequences.is_empty() {
            width = fields.len();
        } else if fields.len() != width {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                line: lineno,
                expected: width,
                found: fields.len(),
            });
        }
        let mut seq = Vec::with_capacity(width);
        for (col, field) in fields.iter().enumerate() {
            let code: u64 = field.trim().parse().map_err(|_| Error::FieldParse {
                path: path.to_path_buf(),
                line: lineno,
                column: col + 1,
                field: (*field).to_string(),
            })?;
            seq.push(id_map.intern(code));
        }
        sequences.push(seq);
    }

    if sequences.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    if width < 2 {
        return Err(Error::InvalidArgument(format!(
            "{}: corpus rows need at least 2 columns, found {width}",
            path.display()
        )));
    }
    let vocab = id_map.len();
    Corpus::new(sequences, vocab, id_map)
}

/// Writes a corpus back to CSV with the original external codes, LF line
/// endings and a trailing newline. Loading the result reproduces the corpus
/// exactly as long as every vocabulary id occurs in some sequence (always
/// true for corpora that came from [`load_csv`]).
pub fn write_csv(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for seq in corpus.sequences() {
        let mut first = true;
        for &a in seq {
            if !first {
                out.push(b',');
            }
            first = false;
            let code = corpus.id_map().external(a).expect("id within vocab");
            write!(out, "{code}").expect("write to Vec cannot fail");
        }
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Diagonal boost for planted transition rows; keeps sampled chains in one
/// state for a handful of steps so state identity carries signal.
const PLANTED_STICKINESS: f64 = 6.0;

/// Exponent applied to planted emission draws; concentrates every state on
/// a few of its artists while keeping full support.
const PLANTED_CONCENTRATION: i32 = 8;

/// Draws the planted model: initial distribution uniform-normalized,
/// transition rows uniform-normalized with a boosted diagonal, emission rows
/// uniform draws raised to a power then normalized. Flat rows over a large
/// vocabulary would leave the planted states statistically invisible;
/// stickiness plus concentrated emissions keeps them recoverable while every
/// entry stays strictly positive.
fn planted_model(n_states: usize, n_artists: usize, rng: &mut ChaCha8Rng) -> Result<HmmModel> {
    let mut draw_row = |len: usize, diag: Option<usize>, power: i32| -> Vec<f64> {
        let mut row: Vec<f64> = (0..len)
            .map(|_| {
                let u: f64 = rng.random();
                u.max(f64::MIN_POSITIVE).powi(power)
            })
            .collect();
        if let Some(i) = diag {
            row[i] += PLANTED_STICKINESS;
        }
        let sum: f64 = row.iter().sum();
        for v in &mut row {
            *v /= sum;
        }
        row
    };

    let pi = draw_row(n_states, None, 1);
    let mut trans = Array2::zeros((n_states, n_states));
    for i in 0..n_states {
        let row = draw_row(n_states, Some(i), 1);
        for (j, v) in row.into_iter().enumerate() {
            trans[(i, j)] = v;
        }
    }
    let mut emit = Array2::zeros((n_states, n_artists));
    for i in 0..n_states {
        let row = draw_row(n_artists, None, PLANTED_CONCENTRATION);
        for (j, v) in row.into_iter().enumerate() {
            emit[(i, j)] = v;
        }
    }
    HmmModel::new(Array1::from(pi), trans, emit)
}

/// Draws a random model (`n_states` hidden states over `n_artists` symbols),
/// then samples `n_users` independent sequences of length `seq_len` from it.
/// Returns both the corpus and the planted model. Identical arguments yield
/// bit-identical outputs.
pub fn generate_synthetic(
    n_users: usize,
    seq_len: usize,
    n_artists: usize,
    n_states: usize,
    seed: u64,
) -> Result<(Corpus, HmmModel)> {
    if n_users == 0 || seq_len == 0 || n_artists == 0 || n_states == 0 {
        return Err(Error::InvalidArgument(
            "generate_synthetic requires all counts >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = planted_model(n_states, n_artists, &mut rng)?;
    let sequences: Vec<Vec<u32>> = (0..n_users)
        .map(|_| model.sample_sequence(seq_len, &mut rng))
        .collect();
    let corpus = Corpus::new(sequences, n_artists, IdMap::identity(n_artists))?;
    Ok((corpus, model))
}

/// Exact occurrence counts of every artist over all positions.
pub fn artist_frequencies(corpus: &Corpus) -> FrequencyTable {
    let mut counts = vec![0u64; corpus.vocab_size()];
    for seq in corpus.sequences() {
        for &a in seq {
            counts[a as usize] += 1;
        }
    }
    let total = counts.iter().sum();
    FrequencyTable { counts, total }
}

/// Splits off the last item of every sequence as that user's target.
pub fn split_holdout(corpus: &Corpus) -> Result<HoldoutSplit> {
    if corpus.seq_len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "holdout split needs sequences of length >= 2, found {}",
            corpus.seq_len()
        )));
    }
    let mut prefixes = Vec::with_capacity(corpus.n_users());
    let mut targets = Vec::with_capacity(corpus.n_users());
    for seq in corpus.sequences() {
        let (last, rest) = seq.split_last().expect("non-empty by invariant");
        prefixes.push(rest.to_vec());
        targets.push(*last);
    }
    let prefixes = Corpus::new(prefixes, corpus.vocab_size(), corpus.id_map().clone())?;
    Ok(HoldoutSplit { prefixes, targets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus_from_str(text: &str) -> Result<Corpus> {
        parse_csv(Path::new("test.csv"), text)
    }

    #[test]
    fn load_reindexes_by_first_appearance() {
        let c = corpus_from_str("5,7,5\n7,9,5\n").unwrap();
        assert_eq!(c.n_users(), 2);
        assert_eq!(c.seq_len(), 3);
        assert_eq!(c.vocab_size(), 3);
        assert_eq!(c.sequences(), &[vec![0, 1, 0], vec![1, 2, 0]]);
        assert_eq!(c.id_map().internal(5), Some(0));
        assert_eq!(c.id_map().internal(7), Some(1));
        assert_eq!(c.id_map().internal(9), Some(2));
        assert_eq!(c.id_map().external(2), Some(9));
    }

    #[test]
    fn load_single_artist_row() {
        let c = corpus_from_str("3,3\n").unwrap();
        assert_eq!(c.n_users(), 1);
        assert_eq!(c.seq_len(), 2);
        assert_eq!(c.vocab_size(), 1);
        assert_eq!(c.sequences(), &[vec![0, 0]]);
    }

    #[test]
    fn load_accepts_crlf() {
        let c = corpus_from_str("1,2\r\n2,1\r\n").unwrap();
        assert_eq!(c.n_users(), 2);
        assert_eq!(c.sequences(), &[vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn ragged_row_names_line() {
        let err = corpus_from_str("1,2,3\n4,5\n").unwrap_err();
        match err {
            Error::RaggedRow {
                line,
                expected,
                found,
                ..
            } => {
                assert_eq!(line, 2);
                assert_eq!(expected, 3);
                assert_eq!(found, 2);
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn bad_field_names_line_and_column() {
        let err = corpus_from_str("1,2\n3,x\n").unwrap_err();
        match err {
            Error::FieldParse { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 2);
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            corpus_from_str("").unwrap_err(),
            Error::EmptyInput { .. }
        ));
    }

    #[test]
    fn single_column_rejected() {
        assert!(matches!(
            corpus_from_str("1\n2\n").unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn csv_round_trip_preserves_bytes() {
        let text = "5,7,5\n7,9,5\n";
        let c = corpus_from_str(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_csv(&c, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), text);
        let reloaded = load_csv(&path).unwrap();
        assert_eq!(reloaded, c);
    }

    #[test]
    fn frequencies_count_exactly() {
        let c = corpus_from_str("0,1,0\n1,2,0\n").unwrap();
        let f = artist_frequencies(&c);
        assert_eq!(f.counts(), &[3, 2, 1]);
        assert_eq!(f.total(), 6);
    }

    #[test]
    fn frequencies_single_sequence() {
        let c = corpus_from_str("4,4\n").unwrap();
        let f = artist_frequencies(&c);
        assert_eq!(f.counts(), &[2]);
        assert_eq!(f.total(), 2);
    }

    #[test]
    fn split_peels_last_column() {
        let c = corpus_from_str("0,1,2\n").unwrap();
        let s = split_holdout(&c).unwrap();
        assert_eq!(s.prefixes.sequences(), &[vec![0, 1]]);
        assert_eq!(s.targets, vec![2]);
        assert_eq!(s.prefixes.seq_len(), c.seq_len() - 1);
    }

    #[test]
    fn split_repeated_artist() {
        let c = corpus_from_str("5,5\n").unwrap();
        let s = split_holdout(&c).unwrap();
        assert_eq!(s.prefixes.sequences(), &[vec![0]]);
        assert_eq!(s.targets, vec![0]);
        assert_eq!(s.prefixes.id_map().external(0), Some(5));
    }

    #[test]
    fn split_then_reconcat_reproduces_corpus() {
        let c = corpus_from_str("1,2,3,1\n4,4,4,4\n2,3,2,3\n").unwrap();
        let s = split_holdout(&c).unwrap();
        let rebuilt: Vec<Vec<u32>> = s
            .prefixes
            .sequences()
            .iter()
            .zip(&s.targets)
            .map(|(p, &t)| {
                let mut seq = p.clone();
                seq.push(t);
                seq
            })
            .collect();
        assert_eq!(rebuilt, c.sequences());
    }

    #[test]
    fn split_requires_two_columns() {
        let c = Corpus::new(vec![vec![0]], 1, IdMap::identity(1)).unwrap();
        assert!(matches!(
            split_holdout(&c).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn synthetic_single_state_single_symbol() {
        let (c, m) = generate_synthetic(1, 5, 1, 1, 123).unwrap();
        assert_eq!(c.sequences(), &[vec![0, 0, 0, 0, 0]]);
        assert_eq!(m.pi().as_slice().unwrap(), &[1.0]);
        assert_eq!(m.trans().row(0).as_slice().unwrap(), &[1.0]);
        assert_eq!(m.emit().row(0).as_slice().unwrap(), &[1.0]);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let (c1, m1) = generate_synthetic(10, 3, 4, 2, 7).unwrap();
        let (c2, m2) = generate_synthetic(10, 3, 4, 2, 7).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn synthetic_zero_count_rejected() {
        assert!(matches!(
            generate_synthetic(0, 5, 3, 2, 0).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn synthetic_totals_match_shape() {
        let (c, _) = generate_synthetic(972, 29, 50, 5, 42).unwrap();
        assert_eq!(c.n_users(), 972);
        assert_eq!(c.seq_len(), 29);
        assert_eq!(c.vocab_size(), 50);
        let f = artist_frequencies(&c);
        assert_eq!(f.total(), 972 * 29);
        assert_eq!(f.counts().iter().sum::<u64>(), 972 * 29);
    }

    #[test]
    fn content_hash_tracks_content() {
        let a = corpus_from_str("1,2\n3,4\n").unwrap();
        let b = corpus_from_str("1,2\n3,4\n").unwrap();
        let c = corpus_from_str("1,2\n3,5\n").unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
