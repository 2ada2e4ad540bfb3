//! Cross-validated training runs and their tabulated results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{self, DataSource, Dataset, RawTable, Schema};
use crate::ensemble::{build_ensemble, Decomposition, Ensemble};
use crate::error::{Error, Result};
use crate::kv;
use crate::network::Topology;
use crate::swarm::{self, NetworkObjective, SwarmConfig};

pub const DEFAULT_HIDDEN: usize = 7;
pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown format {other:?} (expected md or csv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub folds: usize,
    pub repeats: usize,
    pub swarm: SwarmConfig,
    pub n_hidden: usize,
    pub seed: u64,
    /// Run folds on the rayon pool. Results do not depend on this.
    pub parallel: bool,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
}

impl ExperimentConfig {
    pub fn new(path: impl Into<PathBuf>, schema: Schema) -> Self {
        Self {
            source: DataSource {
                path: path.into(),
                schema,
            },
            folds: DEFAULT_FOLDS,
            repeats: 1,
            swarm: SwarmConfig::default(),
            n_hidden: DEFAULT_HIDDEN,
            seed: DEFAULT_SEED,
            parallel: true,
            out: None,
            format: ReportFormat::Markdown,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.n_hidden == 0 {
            return Err(Error::InvalidConfig("hidden layer needs at least one node".into()));
        }
        self.swarm.validate()
    }

    /// Sets one option by its command-line name (without the leading
    /// dashes). Schema keys are accepted too.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("invalid value {value:?} for {key}"))
        }
        let s = &mut self.swarm;
        match key {
            "data" => self.source.path = PathBuf::from(value),
            "schema" => {
                self.source.schema =
                    Schema::from_file(Path::new(value)).map_err(|e| e.to_string())?
            }
            "folds" => self.folds = num(key, value)?,
            "repeats" => self.repeats = num(key, value)?,
            "pop" => s.population = num(key, value)?,
            "iters" => s.iterations = num(key, value)?,
            "clusters" => s.clusters = num(key, value)?,
            "hidden" => self.n_hidden = num(key, value)?,
            "c1" => s.c1 = num(key, value)?,
            "c2" => s.c2 = num(key, value)?,
            "w-start" => s.w_start = num(key, value)?,
            "w-end" => s.w_end = num(key, value)?,
            "pos-bound" => {
                let b: f64 = num(key, value)?;
                s.pos_min = -b;
                s.pos_max = b;
            }
            "v-max" => s.v_max = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "mode" => s.mode = value.parse()?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "parallel" => self.parallel = num(key, value)?,
            other => self.source.schema.apply(other, value)?,
        }
        Ok(())
    }

    /// Applies every entry of a `key = value` config file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        // an unreadable or malformed config file is a configuration problem
        let entries = kv::read(path).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for entry in entries {
            self.apply(&entry.key, &entry.value)
                .map_err(|message| Error::InvalidConfig(format!("{}:{}: {message}", path.display(), entry.line)))?;
        }
        Ok(())
    }
}

/// Deterministic per-task seed derived from the master seed (SplitMix64
/// finalizer over the combined words).
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut z = master
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SPLIT_STREAM: u64 = u64::MAX;

/// Training and test sets for one fold, scaled with training-only statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedFold {
    pub train: Dataset,
    pub test: Dataset,
    pub fill_values: Vec<f64>,
    pub stats: Vec<data::ColumnStats>,
}

/// Imputes and normalizes one fold. Missing cells are filled with
/// training-partition means and every column is scaled by its training
/// range; the test rows contribute to neither.
pub fn prepare_fold(raw: &RawTable, train_rows: &[usize], test_rows: &[usize]) -> Result<PreparedFold> {
    let classes = raw.n_classes();
    let train_raw = raw.subset(train_rows);
    let test_raw = raw.subset(test_rows);
    let fill_values = data::column_means(&train_raw)?;
    let dense = |t: &RawTable| -> Result<Vec<Vec<f64>>> {
        Ok(data::impute_with(t, &fill_values)?
            .rows
            .into_iter()
            .map(|r| r.into_iter().map(|c| c.expect("imputed")).collect())
            .collect())
    };
    let (train_x, stats) = data::normalize(&dense(&train_raw)?, None);
    let (test_x, _) = data::normalize(&dense(&test_raw)?, Some(&stats));
    let train = Dataset::from_labels(train_x, train_raw.labels, classes)?.with_row_ids(train_rows.to_vec())?;
    let test = Dataset::from_labels(test_x, test_raw.labels, classes)?.with_row_ids(test_rows.to_vec())?;
    Ok(PreparedFold {
        train,
        test,
        fill_values,
        stats,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub training_error: f64,
    pub testing_error: f64,
    /// Training MSE of the best particle.
    pub best_fitness: f64,
    pub train_decomposition: Decomposition,
    pub test_decomposition: Decomposition,
    /// Source rows seen by the fitness function.
    pub fitness_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub ensemble: Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            sd: var.sqrt(),
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsSummary {
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub training: Aggregate,
    pub testing: Aggregate,
    /// Not part of any rendered report.
    pub elapsed_seconds: f64,
}

impl ResultsSummary {
    pub fn from_folds(seed: u64, folds: Vec<FoldResult>, elapsed_seconds: f64) -> Self {
        let train: Vec<f64> = folds.iter().map(|f| f.training_error).collect();
        let test: Vec<f64> = folds.iter().map(|f| f.testing_error).collect();
        Self {
            seed,
            training: Aggregate::of(&train),
            testing: Aggregate::of(&test),
            folds,
            elapsed_seconds,
        }
    }
}

fn run_fold(config: &ExperimentConfig, raw: &RawTable, plan: &data::FoldPlan, repeat: usize, fold: usize) -> Result<FoldResult> {
    let test_rows = plan.test_indices(fold);
    let prepared = prepare_fold(raw, &plan.train_indices(fold), &test_rows)?;
    let topology = Topology::new(raw.n_features(), config.n_hidden, raw.n_classes())?;
    let objective = NetworkObjective::new(topology, &prepared.train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, repeat as u64, fold as u64));
    let (swarm, clusters) = swarm::run(&config.swarm, &objective, &mut rng)?;
    let ensemble = build_ensemble(&swarm, &clusters, topology)?;
    Ok(FoldResult {
        repeat,
        fold,
        training_error: ensemble.error_rate(&prepared.train)?,
        testing_error: ensemble.error_rate(&prepared.test)?,
        best_fitness: swarm.best_fitness(),
        train_decomposition: ensemble.decomposition(&prepared.train)?,
        test_decomposition: ensemble.decomposition(&prepared.test)?,
        fitness_rows: objective.data().row_ids().to_vec(),
        test_rows,
        ensemble,
    })
}

/// Loads the data and runs `repeats` rounds of k-fold cross-validation.
pub fn run_cv_experiment(config: &ExperimentConfig) -> Result<ResultsSummary> {
    config.validate()?;
    let raw = config.source.load()?;
    run_cv_on_table(config, &raw)
}

/// Cross-validation on an already parsed table.
pub fn run_cv_on_table(config: &ExperimentConfig, raw: &RawTable) -> Result<ResultsSummary> {
    config.validate()?;
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if raw.n_classes() < 2 {
        return Err(Error::InvalidConfig(format!(
            "classification needs at least 2 classes, found {}",
            raw.n_classes()
        )));
    }
    let started = Instant::now();
    let mut tasks = Vec::new();
    let mut plans = Vec::new();
    for repeat in 0..config.repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, repeat as u64, SPLIT_STREAM));
        plans.push(data::kfold_split(raw.len(), config.folds, &mut rng)?);
        tasks.extend((0..config.folds).map(|fold| (repeat, fold)));
    }
    let work = |&(repeat, fold): &(usize, usize)| {
        run_fold(config, raw, &plans[repeat], repeat, fold).map_err(|e| Error::Fold {
            repeat,
            fold,
            source: Box::new(e),
        })
    };
    let results: Result<Vec<FoldResult>> = if config.parallel {
        tasks.par_iter().map(work).collect()
    } else {
        tasks.iter().map(work).collect()
    };
    Ok(ResultsSummary::from_folds(
        config.seed,
        results?,
        started.elapsed().as_secs_f64(),
    ))
}

/// Renders the summary as a Mean/SD/Min/Max table (markdown) or as one CSV
/// row per fold followed by the four aggregate rows.
pub fn report(summary: &ResultsSummary, format: ReportFormat) -> String {
    let mut out = String::new();
    let rows = [
        ("Mean", summary.training.mean, summary.testing.mean),
        ("SD", summary.training.sd, summary.testing.sd),
        ("Min", summary.training.min, summary.testing.min),
        ("Max", summary.training.max, summary.testing.max),
    ];
    match format {
        ReportFormat::Markdown => {
            out.push_str("|      | Training error | Testing error |\n");
            out.push_str("|------|----------------|---------------|\n");
            for (name, train, test) in rows {
                let _ = writeln!(out, "| {name:<4} | {train:>14.3} | {test:>13.3} |");
            }
        }
        ReportFormat::Csv => {
            out.push_str("row,repeat,fold,training_error,testing_error,test_E,test_E_bar,test_D_bar\n");
            for f in &summary.folds {
                let d = &f.test_decomposition;
                let _ = writeln!(
                    out,
                    "fold,{},{},{:.3},{:.3},{:.3},{:.3},{:.3}",
                    f.repeat, f.fold, f.training_error, f.testing_error, d.ensemble_error, d.mean_component_error, d.mean_ambiguity
                );
            }
            for (name, train, test) in rows {
                let _ = writeln!(out, "{},,,{train:.3},{test:.3},,,", name.to_lowercase());
            }
        }
    }
    out
}

/// Per-fold `E`, `Ē` and `D̄` on the held-out folds.
pub fn decomposition_report(summary: &ResultsSummary) -> String {
    let mut out = String::from("repeat fold        E    E_bar    D_bar\n");
    for f in &summary.folds {
        let d = &f.test_decomposition;
        let _ = writeln!(
            out,
            "{:>6} {:>4} {:>8.5} {:>8.5} {:>8.5}",
            f.repeat, f.fold, d.ensemble_error, d.mean_component_error, d.mean_ambiguity
        );
    }
    out
}
