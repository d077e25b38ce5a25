//! Experiment protocol: data preparation, per-cell training and the report
//! builders for the sensitivity, comparison and classification tables.

use std::path::{Path, PathBuf};

use brelu_core::activation::{ActivationKind, InputGradMode, Sampling, DEFAULT_EPSILON};
use brelu_core::data::{
    chronological_split, make_windows, split_point, synth_gbm, synth_sine_gbm, synth_tabular,
    MinMax, PriceSeries, SequenceDataset, SineGbm, TabularDataset,
};
use brelu_core::lstm::{init_params, Head};
use brelu_core::metrics::{classification_metrics, mse, r2};
use brelu_core::training::{train, Model};
use brelu_core::{Loss, TrainConfig, TrainHistory};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::io::{load_csv_prices, load_csv_tabular};
use crate::report::{
    classification_mean, regression_mean, ClassificationRow, ExperimentReport, RegressionRow, Rows,
};

pub const ACTIVATIONS: [&str; 6] = ["brownian", "relu", "leaky_relu", "prelu", "tanh", "gelu"];
pub const SENSITIVITY_PATHS: [u32; 3] = [500, 1000, 1500];
pub const DEFAULT_PATHS: u32 = 1000;
pub const DEFAULT_LOOKBACK: usize = 60;
pub const DEFAULT_SPLIT: f64 = 0.8;
pub const DEFAULT_VALIDATION: f64 = 0.1;
pub const DEFAULT_HIDDEN: usize = 50;
pub const DEFAULT_POSITIVE_RATE: f64 = 0.25;
pub const DEFAULT_SIGNAL: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        column: String,
    },
    TabularCsv {
        path: PathBuf,
        label: String,
    },
    Gbm {
        seed: u64,
        n: usize,
        s0: f64,
        mu: f64,
        sigma: f64,
    },
    Sine {
        seed: u64,
        n: usize,
        s0: f64,
        mu: f64,
        sigma: f64,
        amplitude: f64,
        period: f64,
        noise: f64,
    },
    Tabular {
        seed: u64,
        n: usize,
        d: usize,
        positive_rate: f64,
        signal: f64,
    },
}

fn parse_fields(spec: &str, body: &str, min: usize, max: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = body
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if fields.len() < min || fields.len() > max {
        return Err(LabError::config(format!(
            "synthetic spec {spec:?} takes {min} to {max} comma-separated values, got {}",
            fields.len()
        )));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().map_err(|_| {
                LabError::config(format!("synthetic spec {spec:?}: {f:?} is not a number"))
            })
        })
        .collect()
}

fn as_count(spec: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(LabError::config(format!(
            "synthetic spec {spec:?}: {v} is not a non-negative integer"
        )))
    }
}

impl DataSource {
    /// Parses `gbm:seed,n,s0,mu,sigma`,
    /// `sine:seed,n[,s0,mu,sigma,amplitude,period,noise]` or
    /// `tabular:seed,n,d[,positive_rate,signal]`.
    pub fn parse_synth(spec: &str) -> Result<Self> {
        let (kind, body) = spec.split_once(':').ok_or_else(|| {
            LabError::config(format!(
                "synthetic spec {spec:?} needs a kind prefix such as gbm:"
            ))
        })?;
        match kind {
            "gbm" => {
                let v = parse_fields(spec, body, 5, 5)?;
                Ok(DataSource::Gbm {
                    seed: as_count(spec, v[0])? as u64,
                    n: as_count(spec, v[1])?,
                    s0: v[2],
                    mu: v[3],
                    sigma: v[4],
                })
            }
            "sine" => {
                let v = parse_fields(spec, body, 2, 8)?;
                let d = SineGbm::default();
                let at = |k: usize, default: f64| v.get(k).copied().unwrap_or(default);
                Ok(DataSource::Sine {
                    seed: as_count(spec, v[0])? as u64,
                    n: as_count(spec, v[1])?,
                    s0: at(2, d.s0),
                    mu: at(3, d.mu),
                    sigma: at(4, d.sigma),
                    amplitude: at(5, d.amplitude),
                    period: at(6, d.period),
                    noise: at(7, d.noise),
                })
            }
            "tabular" => {
                let v = parse_fields(spec, body, 3, 5)?;
                Ok(DataSource::Tabular {
                    seed: as_count(spec, v[0])? as u64,
                    n: as_count(spec, v[1])?,
                    d: as_count(spec, v[2])?,
                    positive_rate: v.get(3).copied().unwrap_or(DEFAULT_POSITIVE_RATE),
                    signal: v.get(4).copied().unwrap_or(DEFAULT_SIGNAL),
                })
            }
            other => Err(LabError::config(format!(
                "unknown synthetic kind {other:?}; expected gbm, sine or tabular"
            ))),
        }
    }

    /// Label used in the dataset column of reports.
    pub fn name(&self) -> String {
        fn stem(p: &Path) -> String {
            p.file_stem().map_or_else(
                || p.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            )
        }
        match self {
            DataSource::Csv { path, .. } | DataSource::TabularCsv { path, .. } => stem(path),
            DataSource::Gbm { seed, n, .. } => format!("gbm-{seed}-{n}"),
            DataSource::Sine { seed, n, .. } => format!("sine-{seed}-{n}"),
            DataSource::Tabular { seed, n, d, .. } => format!("tabular-{seed}-{n}x{d}"),
        }
    }

    pub fn is_tabular(&self) -> bool {
        matches!(
            self,
            DataSource::TabularCsv { .. } | DataSource::Tabular { .. }
        )
    }

    pub fn load_series(&self) -> Result<PriceSeries> {
        match self {
            DataSource::Csv { path, column } => load_csv_prices(path, column),
            DataSource::Gbm {
                seed,
                n,
                s0,
                mu,
                sigma,
            } => Ok(synth_gbm(*seed, *n, *s0, *mu, *sigma)?),
            DataSource::Sine {
                seed,
                n,
                s0,
                mu,
                sigma,
                amplitude,
                period,
                noise,
            } => Ok(synth_sine_gbm(
                *seed,
                *n,
                SineGbm {
                    s0: *s0,
                    mu: *mu,
                    sigma: *sigma,
                    amplitude: *amplitude,
                    period: *period,
                    noise: *noise,
                },
            )?),
            _ => Err(LabError::config(format!(
                "{} is a feature table, not a price series",
                self.name()
            ))),
        }
    }

    pub fn load_table(&self) -> Result<TabularDataset> {
        match self {
            DataSource::TabularCsv { path, label } => Ok(load_csv_tabular(path, label)?.data),
            DataSource::Tabular {
                seed,
                n,
                d,
                positive_rate,
                signal,
            } => Ok(synth_tabular(*seed, *n, *d, *positive_rate, *signal)?),
            _ => Err(LabError::config(format!(
                "{} is a price series, not a feature table",
                self.name()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSetting {
    Learned,
    /// Each value is held fixed during training; one row per value.
    Fixed(Vec<f64>),
}

impl AlphaSetting {
    /// `learned` or a comma-separated list of numbers.
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("learned") {
            return Ok(AlphaSetting::Learned);
        }
        let values = s
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|a| a.is_finite())
                    .ok_or_else(|| {
                        LabError::config(format!(
                            "--alpha: {v:?} is neither \"learned\" nor a number"
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AlphaSetting::Fixed(values))
    }

    fn choices(&self) -> Vec<Option<f64>> {
        match self {
            AlphaSetting::Learned => vec![None],
            AlphaSetting::Fixed(v) => v.iter().copied().map(Some).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Min and max over the whole series.
    #[default]
    Full,
    /// Min and max over the values the training windows touch.
    TrainOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub activations: Vec<String>,
    /// Sample-path counts for brownian cells.
    pub paths: Vec<u32>,
    pub alpha: AlphaSetting,
    pub sampling: Sampling,
    pub lookback: usize,
    /// Fraction of samples in the training portion.
    pub split: f64,
    /// Trailing fraction of the training portion held out for early stopping.
    pub validation: f64,
    pub hidden: usize,
    pub normalization: Normalization,
    /// Shared training settings; `seed` is replaced per run.
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            activations: ACTIVATIONS.iter().map(|s| s.to_string()).collect(),
            paths: SENSITIVITY_PATHS.to_vec(),
            alpha: AlphaSetting::Learned,
            sampling: Sampling::Collapsed,
            lookback: DEFAULT_LOOKBACK,
            split: DEFAULT_SPLIT,
            validation: DEFAULT_VALIDATION,
            hidden: DEFAULT_HIDDEN,
            normalization: Normalization::Full,
            train: TrainConfig::default(),
            seeds: vec![0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.activations.is_empty() {
            return Err(LabError::config("at least one activation is required"));
        }
        for a in &self.activations {
            if !ACTIVATIONS.contains(&a.as_str()) {
                return Err(LabError::config(format!(
                    "unknown activation {a:?}; expected one of {}",
                    ACTIVATIONS.join(", ")
                )));
            }
        }
        if self.seeds.is_empty() {
            return Err(LabError::config("at least one seed is required"));
        }
        if self.paths.contains(&0) {
            return Err(LabError::config("sample-path counts must be >= 1"));
        }
        if let AlphaSetting::Fixed(v) = &self.alpha {
            if v.is_empty() {
                return Err(LabError::config("fixed alpha list is empty"));
            }
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(LabError::config(format!(
                "split must be in (0, 1), got {}",
                self.split
            )));
        }
        if !(self.validation > 0.0 && self.validation < 1.0) {
            return Err(LabError::config(format!(
                "validation fraction must be in (0, 1), got {}",
                self.validation
            )));
        }
        if self.lookback == 0 || self.hidden == 0 {
            return Err(LabError::config("lookback and hidden size must be >= 1"));
        }
        self.train
            .validate()
            .map_err(|e| LabError::config(e.to_string()))
    }

    /// Builds the activation for `name`, brownian taking `paths`.
    pub fn activation(&self, name: &str, paths: u32) -> Result<ActivationKind> {
        let kind = match name {
            "brownian" => ActivationKind::Brownian {
                paths,
                epsilon: DEFAULT_EPSILON,
                sampling: self.sampling,
                input_grad: InputGradMode::Pathwise,
            },
            "relu" => ActivationKind::Relu,
            "leaky_relu" => ActivationKind::leaky_relu(),
            "prelu" => ActivationKind::Prelu,
            "tanh" => ActivationKind::Tanh,
            "gelu" => ActivationKind::Gelu,
            other => return Err(LabError::config(format!("unknown activation {other:?}"))),
        };
        kind.validate()
            .map_err(|e| LabError::config(e.to_string()))?;
        Ok(kind)
    }

    /// One entry per activation cell; brownian expands over M and alpha.
    fn cells(&self) -> Result<Vec<(ActivationKind, Option<f64>)>> {
        let mut cells = Vec::new();
        for name in &self.activations {
            if name == "brownian" {
                if self.paths.is_empty() {
                    return Err(LabError::config("brownian needs a sample-path count"));
                }
                for &m in &self.paths {
                    for alpha in self.alpha.choices() {
                        cells.push((self.activation(name, m)?, alpha));
                    }
                }
            } else {
                cells.push((self.activation(name, DEFAULT_PATHS)?, None));
            }
        }
        Ok(cells)
    }
}

/// Windowed regression data split chronologically.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub name: String,
    /// Samples used for gradient steps.
    pub fit: SequenceDataset,
    /// Held out from `fit` for early stopping.
    pub validation: SequenceDataset,
    /// `fit` followed by `validation`; the population for the train R².
    pub train: SequenceDataset,
    pub test: SequenceDataset,
}

pub fn prepare_regression(config: &ExperimentConfig) -> Result<RegressionData> {
    let series = config.data.load_series()?;
    let values = &series.values;
    let lookback = config.lookback;
    if values.len() <= lookback {
        return Err(LabError::config(format!(
            "series has {} points, needs more than the lookback {lookback}",
            values.len()
        )));
    }
    let n_samples = values.len() - lookback;
    let fit_to = match config.normalization {
        Normalization::Full => values.len(),
        // the last training sample's target sits at index cut - 1 + lookback
        Normalization::TrainOnly => split_point(n_samples, config.split)? + lookback,
    };
    let scale = MinMax::fit(&values[..fit_to])?;
    let normalized: Vec<f64> = values.iter().map(|&v| scale.transform(v)).collect();
    let mut windows = make_windows(&normalized, lookback)?;
    windows.norm_min = scale.min;
    windows.norm_max = scale.max;
    let (train_part, test) = chronological_split(&windows, config.split)?;
    let (fit, validation) =
        chronological_split(&train_part, 1.0 - config.validation).map_err(|e| {
            LabError::config(format!(
                "training portion of {} samples is too small to hold out validation: {e}",
                train_part.len()
            ))
        })?;
    Ok(RegressionData {
        name: config.data.name(),
        fit,
        validation,
        train: train_part,
        test,
    })
}

fn cell_label(dataset: &str, kind: &ActivationKind, alpha: Option<f64>, seed: u64) -> String {
    let mut label = format!("{dataset}/{}", kind.name());
    if let ActivationKind::Brownian { paths, .. } = kind {
        label.push_str(&format!(" M={paths}"));
    }
    if let Some(a) = alpha {
        label.push_str(&format!(" alpha={a}"));
    }
    format!("{label} seed={seed}")
}

fn paths_of(kind: &ActivationKind) -> Option<u32> {
    match kind {
        ActivationKind::Brownian { paths, .. } => Some(*paths),
        _ => None,
    }
}

fn initial_model(
    config: &ExperimentConfig,
    input_dim: usize,
    kind: ActivationKind,
    head: Head,
    alpha: Option<f64>,
    seed: u64,
) -> Result<Model> {
    // same draw for every activation given the seed
    let mut params = init_params(input_dim, config.hidden, 1, seed)?;
    if let Some(a) = alpha {
        params.alpha = a;
    }
    Ok(Model::new(params, kind, head)?)
}

fn run_config(config: &ExperimentConfig, loss: Loss, alpha: Option<f64>, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        loss,
        train_alpha: alpha.is_none(),
        ..config.train.clone()
    }
}

/// Result of one regression training run.
#[derive(Debug, Clone)]
pub struct RegressionRun {
    pub row: RegressionRow,
    pub model: Model,
    pub history: TrainHistory,
}

/// Trains and scores one (activation, alpha, seed) cell.
pub fn run_regression_cell(
    config: &ExperimentConfig,
    data: &RegressionData,
    kind: ActivationKind,
    alpha: Option<f64>,
    seed: u64,
) -> Result<RegressionRun> {
    let label = cell_label(&data.name, &kind, alpha, seed);
    let annotate = |source| LabError::Cell {
        cell: label.clone(),
        source,
    };
    let mut model = initial_model(
        config,
        data.fit.input_dim(),
        kind,
        Head::Regression,
        alpha,
        seed,
    )?;
    let tc = run_config(config, Loss::Mse, alpha, seed);
    let history = train(&mut model, &data.fit, &data.validation, &tc).map_err(annotate)?;
    let test_pred = model
        .predict(&data.test, tc.eval_noise, seed)
        .map_err(annotate)?;
    let train_pred = model
        .predict(&data.train, tc.eval_noise, seed)
        .map_err(annotate)?;
    let row = RegressionRow {
        dataset: data.name.clone(),
        activation: kind.name().to_owned(),
        paths: paths_of(&kind),
        alpha: kind.has_alpha().then_some(model.params.alpha),
        seed: Some(seed),
        mse: mse(&test_pred, &data.test.targets).map_err(annotate)?,
        r2_train: r2(&train_pred, &data.train.targets).map_err(annotate)?,
        r2_test: r2(&test_pred, &data.test.targets).map_err(annotate)?,
        epoch_of_convergence: history.epoch_of_convergence as f64,
    };
    Ok(RegressionRun {
        row,
        model,
        history,
    })
}

fn regression_rows(
    config: &ExperimentConfig,
    cells: &[(ActivationKind, Option<f64>)],
) -> Result<Vec<RegressionRow>> {
    let data = prepare_regression(config)?;
    let mut rows = Vec::new();
    for &(kind, alpha) in cells {
        let group: Vec<RegressionRow> = config
            .seeds
            .iter()
            .map(|&seed| run_regression_cell(config, &data, kind, alpha, seed).map(|r| r.row))
            .collect::<Result<_>>()?;
        let mean = (group.len() > 1).then(|| regression_mean(&group)).flatten();
        rows.extend(group);
        rows.extend(mean);
    }
    Ok(rows)
}

/// Brownian ReLU over every configured M: one row per (M, alpha, seed).
pub fn run_sensitivity(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.paths.is_empty() {
        return Err(LabError::config("sensitivity needs a non-empty M list"));
    }
    if config.data.is_tabular() {
        return Err(LabError::config("sensitivity needs a price series"));
    }
    let mut cells = Vec::new();
    for &m in &config.paths {
        for alpha in config.alpha.choices() {
            cells.push((config.activation("brownian", m)?, alpha));
        }
    }
    Ok(ExperimentReport::new(
        "sensitivity",
        Rows::Regression(regression_rows(config, &cells)?),
    ))
}

/// Every configured activation on the same split and initial weights.
pub fn run_comparison(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.data.is_tabular() {
        return Err(LabError::config("comparison needs a price series"));
    }
    let cells = config.cells()?;
    Ok(ExperimentReport::new(
        "comparison",
        Rows::Regression(regression_rows(config, &cells)?),
    ))
}

/// Classification split: rows in file order, feature `k` fed as step `k`.
#[derive(Debug, Clone)]
pub struct ClassificationData {
    pub name: String,
    pub fit: SequenceDataset,
    pub validation: SequenceDataset,
    pub test: SequenceDataset,
}

fn has_both_classes(labels: &[f64]) -> bool {
    labels.contains(&0.0) && labels.contains(&1.0)
}

pub fn prepare_classification(config: &ExperimentConfig) -> Result<ClassificationData> {
    let table = config.data.load_table()?;
    if !has_both_classes(&table.labels) {
        return Err(LabError::config(format!(
            "{} has a single class",
            config.data.name()
        )));
    }
    let seqs = table.to_sequences();
    let (train_part, test) = chronological_split(&seqs, config.split)?;
    let (fit, validation) = chronological_split(&train_part, 1.0 - config.validation)?;
    if !has_both_classes(&test.targets) {
        return Err(LabError::config(
            "test split holds a single class; ROC-AUC is undefined",
        ));
    }
    Ok(ClassificationData {
        name: config.data.name(),
        fit,
        validation,
        test,
    })
}

pub fn run_classification_cell(
    config: &ExperimentConfig,
    data: &ClassificationData,
    kind: ActivationKind,
    alpha: Option<f64>,
    seed: u64,
) -> Result<ClassificationRow> {
    let label = cell_label(&data.name, &kind, alpha, seed);
    let annotate = |source| LabError::Cell {
        cell: label.clone(),
        source,
    };
    let mut model = initial_model(
        config,
        data.fit.input_dim(),
        kind,
        Head::Classification,
        alpha,
        seed,
    )?;
    let tc = run_config(config, Loss::Bce, alpha, seed);
    train(&mut model, &data.fit, &data.validation, &tc).map_err(annotate)?;
    let prob = model
        .predict(&data.test, tc.eval_noise, seed)
        .map_err(annotate)?;
    let m = classification_metrics(&prob, &data.test.targets, 0.5).map_err(annotate)?;
    Ok(ClassificationRow {
        dataset: data.name.clone(),
        activation: kind.name().to_owned(),
        alpha: kind.has_alpha().then_some(model.params.alpha),
        alpha_fixed: alpha.is_some(),
        seed: Some(seed),
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        roc_auc: m.roc_auc,
    })
}

/// Binary classifier per activation cell, BCE loss, threshold 0.5.
pub fn run_classification(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if !config.data.is_tabular() {
        return Err(LabError::config(
            "classification needs a feature table (tabular CSV or tabular: synth)",
        ));
    }
    let data = prepare_classification(config)?;
    let mut rows = Vec::new();
    for (kind, alpha) in config.cells()? {
        let group: Vec<ClassificationRow> = config
            .seeds
            .iter()
            .map(|&seed| run_classification_cell(config, &data, kind, alpha, seed))
            .collect::<Result<_>>()?;
        let mean = (group.len() > 1)
            .then(|| classification_mean(&group))
            .flatten();
        rows.extend(group);
        rows.extend(mean);
    }
    Ok(ExperimentReport::new(
        "classification",
        Rows::Classification(rows),
    ))
}
