use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kmpso::experiment::{self, ExperimentConfig};
use kmpso::{Error, Schema};

#[derive(Parser)]
#[command(name = "kmpso", version, about = "Train neural network ensembles with a k-means multi-subpopulation PSO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate an ensemble and print the error table.
    Train(RunArgs),
    /// Cross-validate and print E, E_bar and D_bar for every fold.
    Decompose(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` file with any of the options below; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Class column index, or `last`.
    #[arg(long)]
    class_col: Option<String>,
    /// `comma`, `whitespace`, `tab` or a single character.
    #[arg(long)]
    delimiter: Option<String>,
    /// Marker for missing cells.
    #[arg(long)]
    missing: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Swarm size.
    #[arg(long)]
    pop: Option<usize>,
    /// Swarm iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Number of k-means clusters, i.e. ensemble size.
    #[arg(long)]
    clusters: Option<usize>,
    /// Hidden nodes per network.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    w_start: Option<f64>,
    #[arg(long)]
    w_end: Option<f64>,
    /// Weights and biases are kept in [-b, b].
    #[arg(long)]
    pos_bound: Option<f64>,
    #[arg(long)]
    v_max: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `kmpso` or `gbest`.
    #[arg(long)]
    mode: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `md` or `csv`.
    #[arg(long)]
    format: Option<String>,
}

impl RunArgs {
    fn flags(&self) -> Vec<(&'static str, String)> {
        let mut flags = Vec::new();
        let mut push = |key, value: Option<String>| {
            if let Some(v) = value {
                flags.push((key, v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let show = |v: Option<f64>| v.map(|v| v.to_string());
        push("data", path(&self.data));
        push("schema", path(&self.schema));
        push("class-col", self.class_col.clone());
        push("delimiter", self.delimiter.clone());
        push("missing", self.missing.clone());
        push("folds", self.folds.map(|v| v.to_string()));
        push("repeats", self.repeats.map(|v| v.to_string()));
        push("pop", self.pop.map(|v| v.to_string()));
        push("iters", self.iters.map(|v| v.to_string()));
        push("clusters", self.clusters.map(|v| v.to_string()));
        push("hidden", self.hidden.map(|v| v.to_string()));
        push("c1", show(self.c1));
        push("c2", show(self.c2));
        push("w-start", show(self.w_start));
        push("w-end", show(self.w_end));
        push("pos-bound", show(self.pos_bound));
        push("v-max", show(self.v_max));
        push("seed", self.seed.map(|v| v.to_string()));
        push("mode", self.mode.clone());
        push("out", path(&self.out));
        push("format", self.format.clone());
        flags
    }

    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut config = ExperimentConfig::new(PathBuf::new(), Schema::default());
        if let Some(file) = &self.config {
            config.apply_file(file)?;
        }
        for (key, value) in self.flags() {
            config
                .apply(key, &value)
                .map_err(|msg| Error::InvalidConfig(format!("--{key}: {msg}")))?;
        }
        if config.source.path.as_os_str().is_empty() {
            return Err(Error::InvalidConfig("no data file given (use --data)".into()));
        }
        config.validate()?;
        Ok(config)
    }
}

fn execute(command: &Command) -> Result<(), Error> {
    let (args, decompose) = match command {
        Command::Train(a) => (a, false),
        Command::Decompose(a) => (a, true),
    };
    let config = args.resolve()?;
    let summary = experiment::run_cv_experiment(&config)?;
    let text = if decompose {
        experiment::decomposition_report(&summary)
    } else {
        experiment::report(&summary, config.format)
    };
    match &config.out {
        Some(path) => std::fs::write(path, &text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?,
        None => print!("{text}"),
    }
    eprintln!(
        "{} folds in {:.1}s (seed {})",
        summary.folds.len(),
        summary.elapsed_seconds,
        summary.seed
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
