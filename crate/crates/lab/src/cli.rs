//! `brelu` command line.
//!
//! Every subcommand accepts `--config FILE`, a JSON object whose keys are the
//! long flag names (`"m": [500, 1000]`, `"eval-noise": "mean"`, ...). Flags
//! given on the command line win over the file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use brelu_core::activation::Sampling;
use brelu_core::data::describe;
use brelu_core::{EvalNoise, Optimizer};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::checkpoint;
use crate::error::{LabError, Result};
use crate::experiments::{
    prepare_regression, run_classification, run_comparison, run_regression_cell, run_sensitivity,
    AlphaSetting, DataSource, ExperimentConfig, Normalization, ACTIVATIONS, DEFAULT_PATHS,
    SENSITIVITY_PATHS,
};
use crate::figure::{emit_paths_figure, PathsSpec};
use crate::io::{DEFAULT_LABEL_COLUMN, DEFAULT_PRICE_COLUMN};
use crate::report::{history_csv, write_file, ExperimentReport, Rows};

pub const DEFAULT_OUT: &str = "results";

#[derive(Debug, Parser)]
#[command(name = "brelu", version, about = "Brownian ReLU LSTM experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean and sample variance of a series.
    Describe {
        #[command(flatten)]
        settings: Settings,
        /// Series to describe.
        #[arg(long, value_enum, default_value_t = Transform::Normalized)]
        transform: Transform,
    },
    /// Train one model; writes history, checkpoint and a one-row report.
    Train(Settings),
    /// Brownian ReLU over a list of sample-path counts.
    Sensitivity(Settings),
    /// Activation comparison on one price series.
    Compare(Settings),
    /// Binary classification over activations and fixed alpha values.
    Classify(Settings),
    /// Brownian ReLU curves over an x grid as CSV and SVG.
    Paths {
        #[command(flatten)]
        settings: Settings,
        #[arg(long, allow_hyphen_values = true, default_value_t = -5.0)]
        xmin: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 5.0)]
        xmax: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Transform {
    /// Min-max scaled to [0, 1].
    Normalized,
    Raw,
    /// Simple returns `v[k+1] / v[k] - 1`.
    Returns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalNoiseArg {
    Stochastic,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingArg {
    Explicit,
    Collapsed,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// JSON file with default values for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Price CSV (Date plus value column) or, for classify, a feature table.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Value column of a price CSV [default: Close].
    #[arg(long)]
    pub column: Option<String>,
    /// Label column of a feature table [default: label].
    #[arg(long)]
    pub label: Option<String>,
    /// gbm:seed,n,s0,mu,sigma | sine:seed,n[,s0,mu,sigma,amplitude,period,noise] |
    /// tabular:seed,n,d[,positive_rate,signal]
    #[arg(long)]
    pub synth: Option<String>,
    /// Comma-separated subset of brownian,relu,leaky_relu,prelu,tanh,gelu.
    #[arg(long, value_delimiter = ',')]
    pub activations: Vec<String>,
    /// Brownian sample-path counts.
    #[arg(long = "m", value_delimiter = ',')]
    pub m: Vec<u32>,
    /// "learned" or comma-separated fixed values.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Window length [default: 60].
    #[arg(long)]
    pub lookback: Option<usize>,
    /// Training fraction of the chronological split [default: 0.8].
    #[arg(long)]
    pub split: Option<f64>,
    /// Trailing fraction of the training part used for early stopping [default: 0.1].
    #[arg(long)]
    pub validation: Option<f64>,
    /// LSTM hidden units [default: 50].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Maximum epochs [default: 50].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Learning rate [default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Minibatch size [default: 32].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Early-stopping patience in epochs [default: 5].
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long, value_enum)]
    pub eval_noise: Option<EvalNoiseArg>,
    #[arg(long, value_enum)]
    pub sampling: Option<SamplingArg>,
    /// Comma-separated seeds [default: 0].
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Output directory [default: results].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit the min-max scaling on the training windows only.
    #[arg(long)]
    pub train_only_norm: bool,
}

fn pick_vec<T>(flag: Vec<T>, file: Vec<T>) -> Vec<T> {
    if flag.is_empty() {
        file
    } else {
        flag
    }
}

impl Settings {
    /// Fills unset flags from `--config`, if given.
    pub fn resolve(self) -> Result<Settings> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path)
            .map_err(|e| LabError::config(format!("{}: {e}", path.display())))?;
        let file: Settings = serde_json::from_str(&text)
            .map_err(|e| LabError::config(format!("{}: {e}", path.display())))?;
        Ok(self.merge(file))
    }

    pub fn merge(self, file: Settings) -> Settings {
        Settings {
            config: self.config,
            data: self.data.or(file.data),
            column: self.column.or(file.column),
            label: self.label.or(file.label),
            synth: self.synth.or(file.synth),
            activations: pick_vec(self.activations, file.activations),
            m: pick_vec(self.m, file.m),
            alpha: self.alpha.or(file.alpha),
            lookback: self.lookback.or(file.lookback),
            split: self.split.or(file.split),
            validation: self.validation.or(file.validation),
            hidden: self.hidden.or(file.hidden),
            epochs: self.epochs.or(file.epochs),
            lr: self.lr.or(file.lr),
            batch: self.batch.or(file.batch),
            patience: self.patience.or(file.patience),
            optimizer: self.optimizer.or(file.optimizer),
            eval_noise: self.eval_noise.or(file.eval_noise),
            sampling: self.sampling.or(file.sampling),
            seed: pick_vec(self.seed, file.seed),
            out: self.out.or(file.out),
            train_only_norm: self.train_only_norm || file.train_only_norm,
        }
    }

    pub fn data_source(&self, tabular: bool) -> Result<DataSource> {
        match (&self.data, &self.synth) {
            (Some(_), Some(_)) => Err(LabError::config("pass either --data or --synth, not both")),
            (None, None) => Err(LabError::config(
                "no input: pass --data PATH or --synth SPEC",
            )),
            (None, Some(spec)) => DataSource::parse_synth(spec),
            (Some(path), None) if tabular => Ok(DataSource::TabularCsv {
                path: path.clone(),
                label: self
                    .label
                    .clone()
                    .unwrap_or_else(|| DEFAULT_LABEL_COLUMN.to_owned()),
            }),
            (Some(path), None) => Ok(DataSource::Csv {
                path: path.clone(),
                column: self
                    .column
                    .clone()
                    .unwrap_or_else(|| DEFAULT_PRICE_COLUMN.to_owned()),
            }),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    fn sampling_kind(&self) -> Sampling {
        match self.sampling {
            Some(SamplingArg::Explicit) => Sampling::Explicit,
            _ => Sampling::Collapsed,
        }
    }

    /// Experiment settings with subcommand defaults for unset lists.
    pub fn experiment_config(
        &self,
        tabular: bool,
        default_activations: &[&str],
        default_paths: &[u32],
    ) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::new(self.data_source(tabular)?);
        c.activations = if self.activations.is_empty() {
            default_activations.iter().map(|s| s.to_string()).collect()
        } else {
            self.activations
                .iter()
                .map(|s| s.trim().to_owned())
                .collect()
        };
        c.paths = if self.m.is_empty() {
            default_paths.to_vec()
        } else {
            self.m.clone()
        };
        if let Some(a) = &self.alpha {
            c.alpha = AlphaSetting::parse(a)?;
        }
        c.sampling = self.sampling_kind();
        c.lookback = self.lookback.unwrap_or(c.lookback);
        c.split = self.split.unwrap_or(c.split);
        c.validation = self.validation.unwrap_or(c.validation);
        c.hidden = self.hidden.unwrap_or(c.hidden);
        if self.train_only_norm {
            c.normalization = Normalization::TrainOnly;
        }
        let t = &mut c.train;
        t.max_epochs = self.epochs.unwrap_or(t.max_epochs);
        t.learning_rate = self.lr.unwrap_or(t.learning_rate);
        t.batch_size = self.batch.unwrap_or(t.batch_size);
        t.patience = self.patience.unwrap_or(t.patience);
        match self.optimizer {
            Some(OptimizerArg::Sgd) => t.optimizer = Optimizer::Sgd,
            Some(OptimizerArg::Adam) => t.optimizer = Optimizer::adam(),
            None => {}
        }
        match self.eval_noise {
            Some(EvalNoiseArg::Stochastic) => t.eval_noise = EvalNoise::Stochastic,
            Some(EvalNoiseArg::Mean) => t.eval_noise = EvalNoise::Mean,
            None => {}
        }
        if !self.seed.is_empty() {
            c.seeds = self.seed.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn announce(paths: &[&Path]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn write_report(report: &ExperimentReport, dir: &Path, stem: &str) -> Result<()> {
    let (csv, json) = report.write(dir, stem)?;
    announce(&[&csv, &json]);
    Ok(())
}

fn describe_cmd(settings: &Settings, transform: Transform) -> Result<()> {
    let source = settings.data_source(false)?;
    let series = source.load_series()?;
    let values: Vec<f64> = match transform {
        Transform::Raw => series.values.clone(),
        Transform::Normalized => brelu_core::data::minmax_normalize(&series.values)?.0,
        Transform::Returns => series
            .values
            .windows(2)
            .map(|w| w[1] / w[0] - 1.0)
            .collect(),
    };
    let (mean, variance) = describe(&values)?;
    let text = format!(
        "dataset,n,mean,variance\n{},{},{mean:.6},{variance:.6}\n",
        source.name(),
        values.len()
    );
    print!("{text}");
    if let Some(dir) = &settings.out {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        let path = dir.join("describe.csv");
        write_file(&path, &text)?;
        announce(&[&path]);
    }
    Ok(())
}

fn train_cmd(settings: &Settings) -> Result<()> {
    let config = settings.experiment_config(false, &["brownian"], &[DEFAULT_PATHS])?;
    let data = prepare_regression(&config)?;
    let kind = config.activation(&config.activations[0], config.paths[0])?;
    let alpha = match &config.alpha {
        AlphaSetting::Learned => None,
        AlphaSetting::Fixed(v) => Some(v[0]),
    };
    let run = run_regression_cell(&config, &data, kind, alpha, config.seeds[0])?;
    let dir = settings.out_dir();
    let report = ExperimentReport::new("train", Rows::Regression(vec![run.row]));
    write_report(&report, &dir, "train")?;
    let history = dir.join("history.csv");
    write_file(&history, &history_csv(&run.history))?;
    let model = dir.join("model.json");
    checkpoint::save(&run.model, &model)?;
    announce(&[&history, &model]);
    Ok(())
}

fn paths_cmd(settings: &Settings, xmin: f64, xmax: f64, points: usize) -> Result<()> {
    let alphas = match &settings.alpha {
        None => vec![0.0, 0.25, 0.5, 1.0],
        Some(a) => match AlphaSetting::parse(a)? {
            AlphaSetting::Fixed(v) => v,
            AlphaSetting::Learned => {
                return Err(LabError::config("paths needs numeric --alpha values"))
            }
        },
    };
    let spec = PathsSpec {
        alphas,
        paths: if settings.m.is_empty() {
            vec![200]
        } else {
            settings.m.clone()
        },
        xmin,
        xmax,
        points,
        seed: settings.seed.first().copied().unwrap_or(0),
        sampling: settings.sampling_kind(),
    };
    let figure = emit_paths_figure(&spec)?;
    let (csv, svg) = figure.write(&settings.out_dir())?;
    announce(&[&csv, &svg]);
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Describe {
            settings,
            transform,
        } => describe_cmd(&settings.resolve()?, transform),
        Command::Train(s) => train_cmd(&s.resolve()?),
        Command::Sensitivity(s) => {
            let s = s.resolve()?;
            let config = s.experiment_config(false, &["brownian"], &SENSITIVITY_PATHS)?;
            write_report(&run_sensitivity(&config)?, &s.out_dir(), "sensitivity")
        }
        Command::Compare(s) => {
            let s = s.resolve()?;
            let config = s.experiment_config(false, &ACTIVATIONS, &[DEFAULT_PATHS])?;
            write_report(&run_comparison(&config)?, &s.out_dir(), "comparison")
        }
        Command::Classify(s) => {
            let s = s.resolve()?;
            let config = s.experiment_config(true, &ACTIVATIONS, &[DEFAULT_PATHS])?;
            write_report(
                &run_classification(&config)?,
                &s.out_dir(),
                "classification",
            )
        }
        Command::Paths {
            settings,
            xmin,
            xmax,
            points,
        } => paths_cmd(&settings.resolve()?, xmin, xmax, points),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Failures print one `error:` line to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', "; "));
            e.exit_code()
        }
    }
}
