use std::fs;
use std::path::{Path, PathBuf};

use mvbound_core::bounds::{empirical_bounds, oracle_bounds, BoundReport, Form, OracleBounds};
use mvbound_core::data::{parse_csv, parse_libsvm, Dataset, SplitSpec};
use mvbound_core::experiment::{
    check_optimizable, default_bounds, evaluate, optimize_and_score, partition, run_experiment, Evaluation,
    ExperimentConfig, Optimized, ARTIFACT_VERSION,
};
use mvbound_core::forest::{derive_seeds, ensemble_hash, train_forest, Ensemble, EnsembleDocument, ForestParams};
use mvbound_core::losses::{compute_loss_stats, mv_loss, LossStats, Posterior};
use mvbound_core::synth::{generate_dataset, DatasetSpec, ErrorPopulation};
use mvbound_core::Error;
use serde::Serialize;

use crate::report;
use crate::{
    BoundsArgs, DataArgs, DatasetKind, ExperimentArgs, Format, OptimizeArgs, PopulationKind, SynthDatasetArgs,
    SynthPopulationArgs, TrainArgs,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: Error },
    #[error("ensemble was trained on dataset {expected}, but {path} hashes to {found}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => core_exit_code(e),
            _ => 2,
        }
    }
}

fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidPosterior(_)
        | Error::EmptyOob { .. }
        | Error::EmptyOverlap { .. }
        | Error::TooManyNodes(_)
        | Error::InconsistentOracle(_) => 1,
        _ => 2,
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    write(path, &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_dataset(args: &DataArgs) -> CliResult<Dataset> {
    let bytes = read(&args.dataset)?;
    let format = args
        .format
        .unwrap_or_else(|| match args.dataset.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Libsvm,
        });
    let parsed = match format {
        Format::Libsvm => parse_libsvm(&bytes),
        Format::Csv => parse_csv(&bytes, args.label_column),
    };
    parsed.map_err(|source| CliError::Input {
        path: args.dataset.clone(),
        source,
    })
}

/// Everything `bounds` and `optimize` need: the ensemble, the partition it
/// was trained on and its evaluation.
struct Loaded {
    dataset_hash: String,
    ensemble_hash: String,
    split: SplitSpec,
    ensemble: Ensemble,
    eval: Evaluation,
    n_test: usize,
    n_unlabeled: usize,
}

fn load_trained(data_args: &DataArgs, ensemble_path: &Path) -> CliResult<Loaded> {
    let data = load_dataset(data_args)?;
    let text = read(ensemble_path)?;
    let doc: EnsembleDocument = serde_json::from_slice(&text).map_err(|e| CliError::Input {
        path: ensemble_path.to_path_buf(),
        source: e.into(),
    })?;
    let split = doc.split.ok_or_else(|| {
        CliError::Usage(format!(
            "{} does not record its train/test split; retrain it with `mvbound train`",
            ensemble_path.display()
        ))
    })?;
    let (ensemble, recorded) = doc.into_ensemble().map_err(|source| CliError::Input {
        path: ensemble_path.to_path_buf(),
        source,
    })?;
    let dataset_hash = data.content_hash();
    if let Some(expected) = recorded {
        if expected != dataset_hash {
            return Err(CliError::HashMismatch {
                path: data_args.dataset.clone(),
                expected,
                found: dataset_hash,
            });
        }
    }
    let part = partition(&data, &split)?;
    let eval = evaluate(&ensemble, &part)?;
    Ok(Loaded {
        dataset_hash,
        ensemble_hash: ensemble_hash(&ensemble),
        split,
        n_test: part.test.len(),
        n_unlabeled: part.unlabeled.as_ref().map_or(0, |x| x.rows()),
        ensemble,
        eval,
    })
}

pub fn train(args: &TrainArgs) -> CliResult {
    let data = load_dataset(&args.data)?;
    let seeds = derive_seeds(args.seed, 2);
    let split = SplitSpec::new(args.test_fraction, args.unlabeled_r.unwrap_or(1.0), seeds[0])?;
    let part = partition(&data, &split)?;
    let params = ForestParams {
        trees: args.trees,
        bagging: args.bagging,
        max_features: args.max_features,
        seed: seeds[1],
    };
    let ensemble = train_forest(&part.train, &params)?;
    let mut doc = ensemble.to_document(Some(data.content_hash()));
    doc.split = Some(split);
    println!(
        "trained {} trees ({} bagging) on {} samples, {} held out, {} unlabeled; mean OOB fraction {:.4}",
        ensemble.len(),
        args.bagging,
        part.train.len(),
        part.test.len(),
        part.unlabeled.as_ref().map_or(0, |x| x.rows()),
        ensemble.mean_oob_fraction()
    );
    write_json(&args.out.out.join("ensemble.json"), &doc)
}

#[derive(Serialize)]
struct BoundsDocument<'a> {
    version: &'a str,
    dataset_hash: &'a str,
    ensemble_hash: &'a str,
    split: SplitSpec,
    n_train: usize,
    n_test: usize,
    n_unlabeled: usize,
    test_mv_loss: f64,
    report: &'a BoundReport,
}

pub fn bounds(args: &BoundsArgs) -> CliResult {
    let loaded = load_trained(&args.data, &args.ensemble)?;
    let binary = loaded.eval.stats.is_binary();
    let kinds = if args.bounds.is_empty() {
        default_bounds(binary)
    } else {
        args.bounds.clone()
    };
    if let Some(k) = kinds.iter().find(|k| k.binary_only()) {
        if !binary {
            return Err(Error::RequiresBinary(k.name()).into());
        }
    }
    let uniform = Posterior::uniform(loaded.ensemble.len());
    let report = empirical_bounds(&loaded.eval.stats, &uniform, args.delta, &kinds, Form::Kl)?;
    let test_mv_loss = mv_loss(&loaded.eval.test_predictions, &uniform)?;
    println!("{}", report::bounds_table(test_mv_loss, &report));
    let out = &args.out.out;
    write_json(
        &out.join("bounds.json"),
        &BoundsDocument {
            version: ARTIFACT_VERSION,
            dataset_hash: &loaded.dataset_hash,
            ensemble_hash: &loaded.ensemble_hash,
            split: loaded.split,
            n_train: loaded.ensemble.n_train,
            n_test: loaded.n_test,
            n_unlabeled: loaded.n_unlabeled,
            test_mv_loss,
            report: &report,
        },
    )?;
    write_json(&out.join("stats.json"), &loaded.eval.stats)
}

#[derive(Serialize)]
struct OptimizeDocument<'a> {
    version: &'a str,
    dataset_hash: &'a str,
    ensemble_hash: &'a str,
    split: SplitSpec,
    delta: f64,
    test_mv_loss_uniform: f64,
    results: &'a [Optimized],
}

pub fn optimize(args: &OptimizeArgs) -> CliResult {
    check_optimizable(&args.optimize)?;
    let loaded = load_trained(&args.data, &args.ensemble)?;
    if let Some(k) = args.optimize.iter().find(|k| k.binary_only()) {
        if !loaded.eval.stats.is_binary() {
            return Err(Error::RequiresBinary(k.name()).into());
        }
    }
    let uniform = Posterior::uniform(loaded.ensemble.len());
    let base = mv_loss(&loaded.eval.test_predictions, &uniform)?;
    let results = args
        .optimize
        .iter()
        .map(|&k| optimize_and_score(k, &loaded.eval, args.delta))
        .collect::<Result<Vec<_>, _>>()?;
    println!("{}", report::optimize_loss_table(base, &results));
    println!();
    println!("{}", report::optimize_bound_table(&results));
    for o in &results {
        println!();
        println!("{}", report::weights(o));
    }
    write_json(
        &args.out.out.join("optimize.json"),
        &OptimizeDocument {
            version: ARTIFACT_VERSION,
            dataset_hash: &loaded.dataset_hash,
            ensemble_hash: &loaded.ensemble_hash,
            split: loaded.split,
            delta: args.delta,
            test_mv_loss_uniform: base,
            results: &results,
        },
    )
}

pub fn experiment(args: &ExperimentArgs) -> CliResult {
    let data = load_dataset(&args.data)?;
    let cfg = ExperimentConfig {
        trees: args.trees,
        bagging: args.bagging.clone(),
        max_features: args.max_features,
        seeds: args.seed.clone(),
        reps: args.reps,
        delta: args.delta,
        test_fraction: args.test_fraction,
        bounds: args.bounds.clone(),
        optimize: args.optimize.clone(),
        unlabeled_r: args.unlabeled_r.clone(),
    };
    cfg.validate(&data)?;
    let report = run_experiment(&data, &cfg)?;
    println!("{}", report::experiment_table(&report));
    write_json(&args.out.out.join("experiment.json"), &report)
}

pub fn synth_dataset(args: &SynthDatasetArgs) -> CliResult {
    let spec = match args.kind {
        DatasetKind::Blobs => DatasetSpec::Blobs {
            classes: args.classes,
            dim: args.dim,
            separation: args.separation,
            label_noise: args.label_noise,
        },
        DatasetKind::Xor => DatasetSpec::Xor {
            dim: args.dim,
            label_noise: args.label_noise,
        },
    };
    let data = generate_dataset(&spec, args.n, args.seed)?;
    let path = args
        .file
        .clone()
        .unwrap_or_else(|| args.out.out.join("synthetic.libsvm"));
    write(&path, &data.to_libsvm())?;
    println!(
        "wrote {} ({} samples, {} features)",
        path.display(),
        data.len(),
        data.feature_count()
    );
    Ok(())
}

#[derive(Serialize)]
struct PopulationDocument<'a> {
    version: &'a str,
    population: &'a ErrorPopulation,
    n: usize,
    seed: u64,
    delta: f64,
    mv_risk: f64,
    oracle: OracleBounds,
    sample_mv_loss: f64,
    empirical: BoundReport,
    stats: LossStats,
}

pub fn synth_population(args: &SynthPopulationArgs) -> CliResult {
    if args.hypotheses < 2 {
        return Err(CliError::Usage("need at least 2 hypotheses".into()));
    }
    if !(0.0..=1.0).contains(&args.risk) {
        return Err(CliError::Usage(format!("risk must lie in [0,1], got {}", args.risk)));
    }
    let m = args.hypotheses;
    let population = match args.kind {
        PopulationKind::Disjoint => ErrorPopulation::disjoint(m),
        PopulationKind::Independent => ErrorPopulation::independent(m, args.risk),
        PopulationKind::Identical => ErrorPopulation::identical(m, args.risk),
    };
    let uniform = Posterior::uniform(m);
    let oracle = oracle_bounds(&population.oracle()?, &uniform)?;
    let mv_risk = if m <= 20 {
        population.mv_risk(&uniform)?
    } else {
        f64::NAN
    };
    let pm = population.sample(args.n, args.seed)?;
    let masks = vec![vec![true; args.n]; m];
    let stats = compute_loss_stats(&pm, &masks, None)?;
    let empirical = empirical_bounds(&stats, &uniform, args.delta, &default_bounds(true), Form::Kl)?;
    let sample_mv_loss = mv_loss(&pm, &uniform)?;
    println!(
        "{}",
        report::population_table(mv_risk, &oracle, sample_mv_loss, &empirical)
    );
    write_json(
        &args.out.out.join("population.json"),
        &PopulationDocument {
            version: ARTIFACT_VERSION,
            population: &population,
            n: args.n,
            seed: args.seed,
            delta: args.delta,
            mv_risk,
            oracle,
            sample_mv_loss,
            empirical,
            stats,
        },
    )
}
