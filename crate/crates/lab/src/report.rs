//! Table-shaped experiment reports.
//!
//! CSV output uses fixed 6-decimal metrics; mean rows carry `mean` in the
//! seed column. The JSON form keeps every float exactly.

use std::fs;
use std::path::{Path, PathBuf};

use brelu_core::TrainHistory;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const FORMAT_VERSION: &str = "brelu-report/1";

pub const REGRESSION_HEADER: [&str; 9] = [
    "dataset",
    "activation",
    "M",
    "alpha",
    "seed",
    "MSE",
    "R2_train",
    "R2_test",
    "epoch_of_convergence",
];

pub const CLASSIFICATION_HEADER: [&str; 9] = [
    "dataset",
    "activation",
    "alpha",
    "seed",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "roc_auc",
];

pub const HISTORY_HEADER: [&str; 5] = ["epoch", "train_loss", "val_loss", "metric", "alpha"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub dataset: String,
    pub activation: String,
    /// Sample paths; brownian rows only.
    pub paths: Option<u32>,
    /// Final alpha for kinds that have one.
    pub alpha: Option<f64>,
    /// `None` on mean rows.
    pub seed: Option<u64>,
    pub mse: f64,
    pub r2_train: f64,
    pub r2_test: f64,
    pub epoch_of_convergence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub dataset: String,
    pub activation: String,
    pub alpha: Option<f64>,
    /// Whether alpha was held fixed during training.
    pub alpha_fixed: bool,
    pub seed: Option<u64>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "snake_case")]
pub enum Rows {
    Regression(Vec<RegressionRow>),
    Classification(Vec<ClassificationRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::Regression(r) => r.len(),
            Rows::Classification(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: String,
    /// `sensitivity`, `comparison`, `classification` or `train`.
    pub experiment: String,
    #[serde(flatten)]
    pub rows: Rows,
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn opt_f6(v: Option<f64>) -> String {
    v.map(f6).unwrap_or_default()
}

fn seed_cell(seed: Option<u64>) -> String {
    seed.map_or_else(|| "mean".to_owned(), |s| s.to_string())
}

impl ExperimentReport {
    pub fn new(experiment: &str, rows: Rows) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_owned(),
            experiment: experiment.to_owned(),
            rows,
        }
    }

    pub fn header(&self) -> &'static [&'static str] {
        match self.rows {
            Rows::Regression(_) => &REGRESSION_HEADER,
            Rows::Classification(_) => &CLASSIFICATION_HEADER,
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.header())?;
        match &self.rows {
            Rows::Regression(rows) => {
                for r in rows {
                    let epoch = match r.seed {
                        Some(_) => format!("{}", r.epoch_of_convergence),
                        None => f6(r.epoch_of_convergence),
                    };
                    w.write_record([
                        r.dataset.clone(),
                        r.activation.clone(),
                        r.paths.map(|m| m.to_string()).unwrap_or_default(),
                        opt_f6(r.alpha),
                        seed_cell(r.seed),
                        f6(r.mse),
                        f6(r.r2_train),
                        f6(r.r2_test),
                        epoch,
                    ])?;
                }
            }
            Rows::Classification(rows) => {
                for r in rows {
                    w.write_record([
                        r.dataset.clone(),
                        r.activation.clone(),
                        opt_f6(r.alpha),
                        seed_cell(r.seed),
                        f6(r.accuracy),
                        f6(r.precision),
                        f6(r.recall),
                        f6(r.f1),
                        f6(r.roc_auc),
                    ])?;
                }
            }
        }
        let bytes = w
            .into_inner()
            .map_err(|e| LabError::config(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(s)?;
        if report.format_version != FORMAT_VERSION {
            return Err(LabError::config(format!(
                "unsupported report format {:?}, expected {FORMAT_VERSION:?}",
                report.format_version
            )));
        }
        Ok(report)
    }

    /// Writes `<stem>.csv` and `<stem>.json` under `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        write_file(&csv_path, &self.to_csv()?)?;
        write_file(&json_path, &self.to_json()?)?;
        Ok((csv_path, json_path))
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| LabError::io(path, e))
}

pub fn history_csv(history: &TrainHistory) -> String {
    let mut out = HISTORY_HEADER.join(",");
    out.push('\n');
    for e in &history.epochs {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch, e.train_loss, e.val_loss, e.metric, e.alpha
        ));
    }
    out
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Mean of per-seed rows sharing dataset, activation, M and alpha mode.
pub fn regression_mean(rows: &[RegressionRow]) -> Option<RegressionRow> {
    let first = rows.first()?;
    let alpha = first
        .alpha
        .map(|_| mean(rows.iter().filter_map(|r| r.alpha)));
    Some(RegressionRow {
        dataset: first.dataset.clone(),
        activation: first.activation.clone(),
        paths: first.paths,
        alpha,
        seed: None,
        mse: mean(rows.iter().map(|r| r.mse)),
        r2_train: mean(rows.iter().map(|r| r.r2_train)),
        r2_test: mean(rows.iter().map(|r| r.r2_test)),
        epoch_of_convergence: mean(rows.iter().map(|r| r.epoch_of_convergence)),
    })
}

pub fn classification_mean(rows: &[ClassificationRow]) -> Option<ClassificationRow> {
    let first = rows.first()?;
    let alpha = first
        .alpha
        .map(|_| mean(rows.iter().filter_map(|r| r.alpha)));
    Some(ClassificationRow {
        dataset: first.dataset.clone(),
        activation: first.activation.clone(),
        alpha,
        alpha_fixed: first.alpha_fixed,
        seed: None,
        accuracy: mean(rows.iter().map(|r| r.accuracy)),
        precision: mean(rows.iter().map(|r| r.precision)),
        recall: mean(rows.iter().map(|r| r.recall)),
        f1: mean(rows.iter().map(|r| r.f1)),
        roc_auc: mean(rows.iter().map(|r| r.roc_auc)),
    })
}
