//! Implementations of the five subcommands.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use playseq::cf::{self, ItemSimilarity, RatingMatrix};
use playseq::corpus::{self, Corpus, FrequencyTable};
use playseq::eval::{self, BenchConfig, CfVariant};
use playseq::hmm;
use playseq::predict::{self, MixtureConfig, Ranking};
use rayon::prelude::*;
use serde_json::json;

use crate::cli::{
    BenchArgs, EvaluateArgs, Format, GenerateArgs, Predictor, PredictArgs, TrainArgs, TrainModel,
};
use crate::config::{defaults, resolve, CliError, FileConfig};

type CmdResult = Result<(), CliError>;

fn parse_cf_variant(flag: Option<&str>, file: Option<&str>) -> Result<CfVariant, CliError> {
    let raw = flag.or(file).unwrap_or(defaults::CF);
    raw.parse().map_err(CliError::usage)
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn cmd_generate(args: &GenerateArgs, file: &FileConfig, format: Format) -> CmdResult {
    let users = resolve(args.users, file.users, defaults::GEN_USERS);
    let length = resolve(args.length, file.length, defaults::GEN_LENGTH);
    let artists = resolve(args.artists, file.artists, defaults::GEN_ARTISTS);
    let states = resolve(args.states, file.states, defaults::GEN_STATES);
    let seed = resolve(args.seed, file.seed, defaults::SEED);
    if users == 0 || length == 0 || artists == 0 || states == 0 {
        return Err(CliError::usage(
            "--users, --length, --artists and --states must all be >= 1",
        ));
    }
    if states > artists {
        eprintln!("warning: {states} states over only {artists} artists; emissions will be crowded");
    }

    let (corpus, model) = corpus::generate_synthetic(users, length, artists, states, seed)?;
    corpus::write_csv(&corpus, &args.output)?;
    let model_path = args.model_out.clone().unwrap_or_else(|| {
        let mut p = args.output.clone();
        p.set_extension("model.json");
        p
    });
    hmm::save_model(&model, &model_path)?;

    match format {
        Format::Text => {
            println!("{}", args.output.display());
            println!("{}", model_path.display());
        }
        Format::Json => {
            let summary = json!({
                "command": "generate",
                "config": {
                    "users": users,
                    "length": length,
                    "artists": artists,
                    "states": states,
                    "seed": seed,
                },
                "corpus": args.output.display().to_string(),
                "model": model_path.display().to_string(),
            });
            println!("{summary:#}");
        }
    }
    Ok(())
}

pub fn cmd_train(args: &TrainArgs, file: &FileConfig, format: Format) -> CmdResult {
    let corpus = corpus::load_csv(&args.corpus)?;
    match args.model {
        TrainModel::Hmm => train_hmm(args, file, format, &corpus),
        TrainModel::CfItem => train_sims(args, format, &corpus, false),
        TrainModel::CfPseudo => train_sims(args, format, &corpus, true),
    }
}

fn train_hmm(args: &TrainArgs, file: &FileConfig, format: Format, corpus: &Corpus) -> CmdResult {
    let states = resolve(args.states, file.states, defaults::STATES);
    let max_iters = resolve(args.max_iters, file.max_iters, defaults::MAX_ITERS);
    let tol = resolve(args.tol, file.tol, defaults::TOL);
    let smoothing = resolve(args.smoothing, file.smoothing, defaults::SMOOTHING);
    let seed = resolve(args.seed, file.seed, defaults::SEED);
    if states == 0 || max_iters == 0 {
        return Err(CliError::usage("--states and --max-iters must be >= 1"));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(CliError::usage("--tol must be > 0"));
    }
    if !smoothing.is_finite() || smoothing < 0.0 {
        return Err(CliError::usage("--smoothing must be >= 0"));
    }

    let init = hmm::init_random(states, corpus.vocab_size(), seed)?;
    let (model, report) = hmm::baum_welch(init, corpus.sequences(), max_iters, tol, smoothing)?;
    hmm::save_model(&model, &args.output)?;

    match format {
        Format::Text => {
            for (i, ll) in report.log_likelihood_trace.iter().enumerate() {
                println!("iter {i} log_likelihood {ll}");
            }
            println!(
                "iterations {} converged {} final_log_likelihood {} model {}",
                report.iterations_run,
                report.converged,
                report.final_log_likelihood(),
                args.output.display()
            );
        }
        Format::Json => {
            let summary = json!({
                "command": "train",
                "config": {
                    "model": "hmm",
                    "corpus": args.corpus.display().to_string(),
                    "states": states,
                    "max_iters": max_iters,
                    "tol": tol,
                    "smoothing": smoothing,
                    "seed": seed,
                },
                "iterations_run": report.iterations_run,
                "converged": report.converged,
                "final_log_likelihood": report.final_log_likelihood(),
                "log_likelihood_trace": report.log_likelihood_trace,
                "model": args.output.display().to_string(),
            });
            println!("{summary:#}");
        }
    }
    Ok(())
}

fn train_sims(args: &TrainArgs, format: Format, corpus: &Corpus, binary: bool) -> CmdResult {
    let matrix = RatingMatrix::from_corpus(corpus);
    let sims = if binary {
        ItemSimilarity::from_binarized(&matrix)
    } else {
        ItemSimilarity::from_matrix(&matrix)
    };
    sims.save(&args.output, &corpus.content_hash(), binary)?;
    match format {
        Format::Text => println!("{}", args.output.display()),
        Format::Json => {
            let summary = json!({
                "command": "train",
                "config": {
                    "model": if binary { "cf-pseudo" } else { "cf-item" },
                    "corpus": args.corpus.display().to_string(),
                },
                "items": sims.n_items(),
                "cache": args.output.display().to_string(),
            });
            println!("{summary:#}");
        }
    }
    Ok(())
}

/// Loads the similarity cache when it matches this corpus and source kind;
/// otherwise computes the table (and refreshes the cache file if one was
/// requested).
fn obtain_sims(
    corpus: &Corpus,
    matrix: &RatingMatrix,
    binary: bool,
    cache_path: Option<&Path>,
) -> Result<ItemSimilarity, CliError> {
    let hash = corpus.content_hash();
    if let Some(path) = cache_path {
        if path.exists() {
            match ItemSimilarity::load(path) {
                Ok((sims, stored_hash, stored_binary))
                    if stored_hash == hash && stored_binary == binary =>
                {
                    return Ok(sims);
                }
                Ok(_) => eprintln!(
                    "note: {} was built from a different corpus or source; recomputing",
                    path.display()
                ),
                Err(e) => eprintln!("note: {e}; recomputing"),
            }
        }
    }
    let sims = if binary {
        ItemSimilarity::from_binarized(matrix)
    } else {
        ItemSimilarity::from_matrix(matrix)
    };
    if let Some(path) = cache_path {
        sims.save(path, &hash, binary)?;
    }
    Ok(sims)
}

/// Full-depth CF rankings for every user of the corpus.
fn cf_fulls(
    variant: CfVariant,
    corpus: &Corpus,
    matrix: &RatingMatrix,
    freqs: &FrequencyTable,
    k: usize,
    sims_path: Option<&Path>,
) -> Result<Vec<Ranking>, CliError> {
    let m = matrix.n_items();
    let rankings = match variant {
        CfVariant::User => (0..matrix.n_users())
            .into_par_iter()
            .map(|u| {
                let scores = cf::user_cf_scores(matrix, u, k)?;
                Ok(predict::top_n(&scores, m, freqs))
            })
            .collect::<playseq::Result<Vec<_>>>()?,
        CfVariant::Item => {
            let sims = obtain_sims(corpus, matrix, false, sims_path)?;
            let neighborhoods = cf::item_neighborhoods(&sims, k)?;
            (0..matrix.n_users())
                .into_par_iter()
                .map(|u| {
                    let scores = cf::item_cf_scores_with(matrix, &neighborhoods, u)?;
                    Ok(predict::top_n(&scores, m, freqs))
                })
                .collect::<playseq::Result<Vec<_>>>()?
        }
        CfVariant::BinaryPseudo => {
            let sims = obtain_sims(corpus, matrix, true, sims_path)?;
            let neighborhoods = cf::item_neighborhoods(&sims, k)?;
            (0..matrix.n_users())
                .into_par_iter()
                .map(|u| {
                    let scores = cf::pseudo_scores_binary_with(matrix, &neighborhoods, u)?;
                    Ok(predict::top_n(&scores, m, freqs))
                })
                .collect::<playseq::Result<Vec<_>>>()?
        }
    };
    Ok(rankings)
}

fn load_hmm_for(corpus: &Corpus, path: Option<&PathBuf>) -> Result<hmm::HmmModel, CliError> {
    let Some(path) = path else {
        return Err(CliError::usage(
            "--hmm-model is required for this predictor",
        ));
    };
    let model = hmm::load_model(path)?;
    if model.vocab_size() != corpus.vocab_size() {
        return Err(CliError::usage(format!(
            "model expects a vocabulary of {} symbols but the corpus has {}",
            model.vocab_size(),
            corpus.vocab_size()
        )));
    }
    Ok(model)
}

pub fn cmd_predict(args: &PredictArgs, file: &FileConfig, format: Format) -> CmdResult {
    let n = resolve(args.n, file.n, defaults::N);
    let n1 = resolve(args.n1, file.n1, defaults::N1);
    let n2 = resolve(args.n2, file.n2, defaults::N2);
    let k = resolve(args.k, file.k, defaults::K_NEIGHBORS);
    if n == 0 || k == 0 {
        return Err(CliError::usage("--n and --k must be >= 1"));
    }
    let mixture = MixtureConfig::new(n, n1, n2)
        .map_err(|_| CliError::usage(format!("--n1 ({n1}) + --n2 ({n2}) must equal --n ({n})")))?;
    let cf_variant = parse_cf_variant(args.cf.as_deref(), file.cf.as_deref())?;

    let corpus = corpus::load_csv(&args.corpus)?;
    let freqs = corpus::artist_frequencies(&corpus);
    let m = corpus.vocab_size();
    let sims_path = args.sims.as_deref();

    let rankings: Vec<Ranking> = match args.model {
        Predictor::HfCorpus => {
            let global = predict::hf_corpus(&freqs, n);
            vec![global; corpus.n_users()]
        }
        Predictor::HfCurrent => corpus
            .sequences()
            .par_iter()
            .map(|seq| predict::hf_current(seq, n, &freqs))
            .collect(),
        Predictor::CfUser | Predictor::CfItem | Predictor::CfPseudo => {
            let variant = match args.model {
                Predictor::CfUser => CfVariant::User,
                Predictor::CfItem => CfVariant::Item,
                _ => CfVariant::BinaryPseudo,
            };
            let matrix = RatingMatrix::from_corpus(&corpus);
            let fulls = cf_fulls(variant, &corpus, &matrix, &freqs, k, sims_path)?;
            let cf_only = MixtureConfig::new(n, 0, n).expect("0 + n = n");
            let empty = Ranking::empty();
            fulls
                .iter()
                .map(|full| predict::mhmm_predict(&empty, full, &cf_only, &freqs))
                .collect()
        }
        Predictor::Hmm => {
            let model = load_hmm_for(&corpus, args.hmm_model.as_ref())?;
            corpus
                .sequences()
                .par_iter()
                .map(|seq| predict::hmm_predict(&model, seq, n, &freqs))
                .collect::<playseq::Result<Vec<_>>>()?
        }
        Predictor::Mhmm => {
            let hmm_fulls: Vec<Ranking> = if mixture.n1() > 0 {
                let model = load_hmm_for(&corpus, args.hmm_model.as_ref())?;
                corpus
                    .sequences()
                    .par_iter()
                    .map(|seq| predict::hmm_predict(&model, seq, m, &freqs))
                    .collect::<playseq::Result<Vec<_>>>()?
            } else {
                vec![Ranking::empty(); corpus.n_users()]
            };
            let cf_side: Vec<Ranking> = if mixture.n2() > 0 {
                let matrix = RatingMatrix::from_corpus(&corpus);
                cf_fulls(cf_variant, &corpus, &matrix, &freqs, k, sims_path)?
            } else {
                vec![Ranking::empty(); corpus.n_users()]
            };
            hmm_fulls
                .par_iter()
                .zip(cf_side.par_iter())
                .map(|(h, c)| predict::mhmm_predict(h, c, &mixture, &freqs))
                .collect()
        }
    };

    let mut out = Vec::new();
    for (u, ranking) in rankings.iter().enumerate() {
        write!(out, "{u}").expect("write to Vec cannot fail");
        for &a in &ranking.items {
            let code = corpus.id_map().external(a).expect("id within vocab");
            write!(out, ",{code}").expect("write to Vec cannot fail");
        }
        out.push(b'\n');
    }
    std::fs::write(&args.output, out)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.output.display())))?;

    match format {
        Format::Text => println!("{}", args.output.display()),
        Format::Json => {
            let summary = json!({
                "command": "predict",
                "config": {
                    "model": predictor_name(args.model),
                    "corpus": args.corpus.display().to_string(),
                    "n": n,
                    "n1": n1,
                    "n2": n2,
                    "k": k,
                    "cf": cf_variant.to_string(),
                },
                "users": rankings.len(),
                "output": args.output.display().to_string(),
            });
            println!("{summary:#}");
        }
    }
    Ok(())
}

fn predictor_name(p: Predictor) -> &'static str {
    match p {
        Predictor::HfCorpus => "hf-corpus",
        Predictor::HfCurrent => "hf-current",
        Predictor::CfUser => "cf-user",
        Predictor::CfItem => "cf-item",
        Predictor::CfPseudo => "cf-pseudo",
        Predictor::Hmm => "hmm",
        Predictor::Mhmm => "mhmm",
    }
}

/// Parses a predictions CSV: `row_index,code,code,...` per line.
fn load_predictions(path: &Path) -> Result<Vec<(usize, Vec<u64>)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let lineno = idx + 1;
        let row_index: usize = fields
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| {
                CliError::usage(format!("{}:{lineno}: bad row index", path.display()))
            })?;
        let codes: Vec<u64> = fields
            .map(|f| {
                f.trim().parse().map_err(|_| {
                    CliError::usage(format!("{}:{lineno}: bad artist code {f:?}", path.display()))
                })
            })
            .collect::<Result<_, _>>()?;
        rows.push((row_index, codes));
    }
    if rows.is_empty() {
        return Err(CliError::usage(format!(
            "{}: no prediction rows",
            path.display()
        )));
    }
    Ok(rows)
}

/// Reads raw external target codes, one per line.
fn load_external_targets(path: &Path) -> Result<Vec<u64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut targets = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let code: u64 = trimmed.parse().map_err(|_| {
            CliError::usage(format!(
                "{}:{}: bad artist code {trimmed:?}",
                path.display(),
                idx + 1
            ))
        })?;
        targets.push(code);
    }
    if targets.is_empty() {
        return Err(CliError::usage(format!("{}: no targets", path.display())));
    }
    Ok(targets)
}

pub fn cmd_evaluate(args: &EvaluateArgs, file: &FileConfig, format: Format) -> CmdResult {
    let map_k = resolve(args.map_k, file.map_k, defaults::MAP_K);
    let targets: Vec<u64> = match (&args.targets, &args.corpus) {
        (Some(path), None) => load_external_targets(path)?,
        (None, Some(path)) => {
            let corpus = corpus::load_csv(path)?;
            corpus
                .sequences()
                .iter()
                .map(|seq| {
                    let last = *seq.last().expect("non-empty by invariant");
                    corpus.id_map().external(last).expect("id within vocab")
                })
                .collect()
        }
        _ => {
            return Err(CliError::usage(
                "evaluate needs exactly one of --targets or --corpus",
            ))
        }
    };

    let rows = load_predictions(&args.predictions)?;
    if rows.len() != targets.len() {
        return Err(CliError::usage(format!(
            "{} prediction rows for {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let mut aligned = vec![None; targets.len()];
    for (row_index, codes) in rows {
        if row_index >= targets.len() {
            return Err(CliError::usage(format!(
                "prediction row index {row_index} out of range (0..{})",
                targets.len()
            )));
        }
        if codes.len() > map_k {
            return Err(CliError::usage(format!(
                "prediction row {row_index} has {} candidates, metric cutoff is K={map_k}",
                codes.len()
            )));
        }
        if aligned[row_index].replace(codes).is_some() {
            return Err(CliError::usage(format!(
                "duplicate prediction row index {row_index}"
            )));
        }
    }
    let predictions: Vec<Vec<u64>> = aligned
        .into_iter()
        .enumerate()
        .map(|(i, row)| row.ok_or_else(|| CliError::usage(format!("missing prediction row {i}"))))
        .collect::<Result<_, _>>()?;

    let map = eval::map_at_k_external(&targets, &predictions)?;
    match format {
        Format::Text => println!("MAP@{map_k} {map:.5}"),
        Format::Json => {
            let summary = json!({
                "command": "evaluate",
                "config": {
                    "predictions": args.predictions.display().to_string(),
                    "map_k": map_k,
                },
                "n_users": targets.len(),
                "map_at_k": map,
            });
            println!("{summary:#}");
        }
    }
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs, file: &FileConfig, format: Format) -> CmdResult {
    let config = BenchConfig {
        seed: resolve(args.seed, file.seed, defaults::SEED),
        n_states: resolve(args.states, file.states, defaults::STATES),
        max_iters: resolve(args.max_iters, file.max_iters, defaults::MAX_ITERS),
        tol: resolve(args.tol, file.tol, defaults::TOL),
        smoothing: resolve(args.smoothing, file.smoothing, defaults::SMOOTHING),
        k_neighbors: resolve(args.k, file.k, defaults::K_NEIGHBORS),
        n: resolve(args.n, file.n, defaults::N),
        n1: resolve(args.n1, file.n1, defaults::N1),
        n2: resolve(args.n2, file.n2, defaults::N2),
        map_k: resolve(args.map_k, file.map_k, defaults::MAP_K),
        mixture_cf: parse_cf_variant(args.cf.as_deref(), file.cf.as_deref())?,
    };

    let corpus = corpus::load_csv(&args.corpus)?;
    let targets = match &args.targets {
        Some(path) => Some(eval::load_targets(path, corpus.id_map())?),
        None => None,
    };
    let report = eval::bench_all(&corpus, targets.as_deref(), &config)?;

    match format {
        Format::Text => print!("{}", report.text_table()),
        Format::Json => print!("{}", report.to_json()),
    }
    if let Some(path) = &args.report {
        write_text(path, &report.to_json())?;
    }
    Ok(())
}
