//! Forward/backward and next-symbol prediction checked against explicit
//! path-sum enumeration on models small enough to enumerate.

mod oracle;

use ndarray::array;
use playseq::hmm;
use playseq::HmmModel;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_state_model() -> HmmModel {
    HmmModel::new(
        array![0.6, 0.4],
        array![[0.7, 0.3], [0.4, 0.6]],
        array![[0.9, 0.1], [0.2, 0.8]],
    )
    .unwrap()
}

/// A deterministic sweep of small models and sequences: N <= 3, M <= 3,
/// T <= 6, one case per seed.
fn small_case(seed: u64) -> (HmmModel, Vec<u32>) {
    let model = hmm::init_random(1 + (seed % 3) as usize, 1 + ((seed / 3) % 3) as usize, seed)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let t = 1 + (seed % 6) as usize;
    let m = model.vocab_size() as u32;
    let seq = (0..t).map(|_| rng.random_range(0..m)).collect();
    (model, seq)
}

#[test]
fn forward_matches_frozen_path_sum_value() {
    // Path-sum over the 8 state paths of the 2-state model on [0,1,0],
    // frozen from the oracle.
    let expected = 0.10893;
    let model = two_state_model();
    let seq = [0u32, 1, 0];
    let fwd = hmm::forward(&model, &seq).unwrap();
    let got = fwd.log_likelihood.exp();
    assert!(
        ((got - expected) / expected).abs() < 1e-12,
        "likelihood {got} != {expected}"
    );
    let brute = oracle::path_sum_likelihood(&model, &seq);
    assert!(((got - brute) / brute).abs() < 1e-12);
}

#[test]
fn forward_matches_path_enumeration_on_seeded_sweep() {
    for seed in 0..120 {
        let (model, seq) = small_case(seed);
        let fwd = hmm::forward(&model, &seq).unwrap();
        let brute = oracle::path_sum_likelihood(&model, &seq);
        let rel = (fwd.log_likelihood.exp() - brute).abs() / brute;
        assert!(rel < 1e-10, "seed {seed}: relative error {rel}");
    }
}

#[test]
fn posterior_from_scaled_passes_matches_path_sum() {
    let model = two_state_model();
    let seq = [0u32, 1, 0];
    let fwd = hmm::forward(&model, &seq).unwrap();
    let beta = hmm::backward(&model, &seq, &fwd.scale_factors).unwrap();
    let brute = oracle::path_sum_posterior(&model, &seq);
    for t in 0..seq.len() {
        let mut total = 0.0;
        for i in 0..model.n_states() {
            let gamma = fwd.scaled_alpha[(t, i)] * beta[(t, i)];
            total += gamma;
            assert!(
                (gamma - brute[t][i]).abs() < 1e-12,
                "gamma[{t}][{i}] = {gamma} != {}",
                brute[t][i]
            );
        }
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn posterior_matches_on_seeded_sweep() {
    for seed in 0..60 {
        let (model, seq) = small_case(seed);
        let fwd = hmm::forward(&model, &seq).unwrap();
        let beta = hmm::backward(&model, &seq, &fwd.scale_factors).unwrap();
        let brute = oracle::path_sum_posterior(&model, &seq);
        for t in 0..seq.len() {
            for i in 0..model.n_states() {
                let gamma = fwd.scaled_alpha[(t, i)] * beta[(t, i)];
                assert!((gamma - brute[t][i]).abs() < 1e-12, "seed {seed} t={t} i={i}");
            }
        }
    }
}

#[test]
fn next_symbol_matches_frozen_one_step_extension() {
    // One-step path-sum extension of the 2-state model on [0,1,0], frozen
    // from the oracle.
    let expected = [0.6463921784632334, 0.3536078215367668];
    let model = two_state_model();
    let dist = hmm::next_symbol_distribution(&model, &[0, 1, 0]).unwrap();
    for (got, want) in dist.iter().zip(expected) {
        assert!((got - want).abs() < 1e-12, "{got} != {want}");
    }
}

#[test]
fn next_symbol_matches_path_sums_on_seeded_sweep() {
    for seed in 0..120 {
        let (model, seq) = small_case(seed);
        let dist = hmm::next_symbol_distribution(&model, &seq).unwrap();
        let brute = oracle::path_sum_next_symbol(&model, &seq);
        for (k, (got, want)) in dist.iter().zip(&brute).enumerate() {
            assert!(
                (got - want).abs() < 1e-12,
                "seed {seed} symbol {k}: {got} != {want}"
            );
        }
        let sum: f64 = dist.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ranking_order_matches_brute_force_probabilities() {
    let model = two_state_model();
    let seq = [0u32, 1, 0];
    let freqs = playseq::FrequencyTable::from_counts(vec![1, 1]);
    let ranking = playseq::predict::hmm_predict(&model, &seq, 2, &freqs).unwrap();
    let brute = oracle::path_sum_next_symbol(&model, &seq);
    let mut expected: Vec<u32> = (0..2).collect();
    expected.sort_by(|&a, &b| brute[b as usize].partial_cmp(&brute[a as usize]).unwrap());
    assert_eq!(ranking.items, expected);
}
