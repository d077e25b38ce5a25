//! Dataset transforms and synthetic generators.
//!
//! Regression data is a price series scaled to `[0, 1]` and cut into
//! next-step windows: sample `i` has inputs `v[i..i+T]` and target `v[i+T]`.
//! Classification data is a standardized feature table; each row is fed to
//! the LSTM as a length-`d` sequence of scalars, one feature per step.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::numerics::{Matrix, RngStream};

pub const TRADING_DAYS: f64 = 252.0;

/// Closing prices in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub timestamps: Vec<String>,
    pub values: Vec<f64>,
}

impl PriceSeries {
    /// Timestamps must be strictly increasing (compared as strings, which is
    /// chronological for ISO-8601) and values finite and positive.
    pub fn new(timestamps: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(invalid!(
                "{} timestamps for {} values",
                timestamps.len(),
                values.len()
            ));
        }
        if let Some(k) = (1..timestamps.len()).find(|&k| timestamps[k] <= timestamps[k - 1]) {
            return Err(invalid!(
                "timestamps not strictly increasing at index {k}: {} after {}",
                timestamps[k],
                timestamps[k - 1]
            ));
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(invalid!(
                "price at index {k} must be finite and positive, got {v}"
            ));
        }
        Ok(Self { timestamps, values })
    }

    /// Timestamps `"000000"`, `"000001"`, ... for generated data.
    pub fn indexed(values: Vec<f64>) -> Result<Self> {
        let timestamps = (0..values.len()).map(|k| format!("{k:06}")).collect();
        Self::new(timestamps, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Affine map of `[min, max]` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("series"));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            return Err(invalid!("degenerate range: min == max == {min}"));
        }
        Ok(Self { min, max })
    }

    #[inline]
    pub fn transform(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    #[inline]
    pub fn inverse(&self, v: f64) -> f64 {
        self.min + v * (self.max - self.min)
    }
}

/// Scales `values` onto `[0, 1]`; returns the scaled values and `(min, max)`.
pub fn minmax_normalize(values: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    let mm = MinMax::fit(values)?;
    Ok((
        values.iter().map(|&v| mm.transform(v)).collect(),
        mm.min,
        mm.max,
    ))
}

pub fn denormalize(values: &[f64], min: f64, max: f64) -> Vec<f64> {
    let mm = MinMax { min, max };
    values.iter().map(|&v| mm.inverse(v)).collect()
}

/// Sequence samples: each input is a `T x d` matrix (rows are timesteps).
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub inputs: Vec<Matrix>,
    pub targets: Vec<f64>,
    /// Scale used to normalize the series, for mapping predictions back.
    pub norm_min: f64,
    pub norm_max: f64,
}

impl SequenceDataset {
    pub fn new(inputs: Vec<Matrix>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(invalid!(
                "{} inputs for {} targets",
                inputs.len(),
                targets.len()
            ));
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|m| m.cols() != first.cols()) {
                return Err(invalid!("all samples need the same feature width"));
            }
        }
        Ok(Self {
            inputs,
            targets,
            norm_min: 0.0,
            norm_max: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Feature width `d`.
    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, |m| m.cols())
    }

    fn slice(&self, range: core::ops::Range<usize>) -> Self {
        Self {
            inputs: self.inputs[range.clone()].to_vec(),
            targets: self.targets[range].to_vec(),
            norm_min: self.norm_min,
            norm_max: self.norm_max,
        }
    }
}

/// Next-step windows of length `lookback` over `values`.
pub fn make_windows(values: &[f64], lookback: usize) -> Result<SequenceDataset> {
    if lookback == 0 {
        return Err(invalid!("lookback must be >= 1"));
    }
    if lookback >= values.len() {
        return Err(invalid!(
            "lookback {lookback} needs a series longer than {lookback}, got {}",
            values.len()
        ));
    }
    let n = values.len() - lookback;
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        inputs.push(Matrix::new(lookback, 1, values[i..i + lookback].to_vec())?);
        targets.push(values[i + lookback]);
    }
    SequenceDataset::new(inputs, targets)
}

/// Number of leading samples that go to the first part of a `ratio` split.
pub fn split_point(n: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid!("split ratio must be in (0, 1), got {ratio}"));
    }
    let cut = libm::floor(ratio * n as f64) as usize;
    if cut == 0 || cut >= n {
        return Err(invalid!(
            "split ratio {ratio} of {n} samples leaves one side empty"
        ));
    }
    Ok(cut)
}

/// First `floor(ratio * N)` samples, then the rest. Order is preserved.
pub fn chronological_split(
    data: &SequenceDataset,
    ratio: f64,
) -> Result<(SequenceDataset, SequenceDataset)> {
    let cut = split_point(data.len(), ratio)?;
    Ok((data.slice(0..cut), data.slice(cut..data.len())))
}

/// Arithmetic mean and sample variance (divisor `N - 1`).
pub fn describe(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(invalid!(
            "describe needs at least 2 values, got {}",
            values.len()
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var))
}

/// Geometric Brownian motion sampled daily (`dt = 1/252`).
pub fn synth_gbm(seed: u64, n: usize, s0: f64, mu: f64, sigma: f64) -> Result<PriceSeries> {
    if n < 2 {
        return Err(invalid!("gbm path needs n >= 2, got {n}"));
    }
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(invalid!("gbm s0 must be positive, got {s0}"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || !mu.is_finite() {
        return Err(invalid!("gbm needs finite mu and sigma >= 0"));
    }
    let dt = 1.0 / TRADING_DAYS;
    let drift = (mu - 0.5 * sigma * sigma) * dt;
    let vol = sigma * libm::sqrt(dt);
    let mut rng = RngStream::new(seed, 0x6B4D);
    let mut values = Vec::with_capacity(n);
    let mut s = s0;
    values.push(s);
    for _ in 1..n {
        s *= libm::exp(drift + vol * rng.next_standard_normal());
        values.push(s);
    }
    PriceSeries::indexed(values)
}

/// Parameters of a GBM trend with a seasonal sine and additive noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineGbm {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Sine amplitude as a fraction of `s0`.
    pub amplitude: f64,
    /// Period in samples.
    pub period: f64,
    /// Observation noise std as a fraction of `s0`.
    pub noise: f64,
}

impl Default for SineGbm {
    fn default() -> Self {
        Self {
            s0: 100.0,
            mu: 0.1,
            sigma: 0.1,
            amplitude: 0.1,
            period: 50.0,
            noise: 0.005,
        }
    }
}

/// `gbm_k + amplitude * s0 * sin(2 pi k / period) + noise`, kept positive.
pub fn synth_sine_gbm(seed: u64, n: usize, spec: SineGbm) -> Result<PriceSeries> {
    if !(spec.period > 0.0) || !(spec.amplitude >= 0.0) || !(spec.noise >= 0.0) {
        return Err(invalid!(
            "sine period must be > 0, amplitude and noise >= 0"
        ));
    }
    let trend = synth_gbm(seed, n, spec.s0, spec.mu, spec.sigma)?;
    let mut rng = RngStream::new(seed, 0x51E);
    let floor = 1e-3 * spec.s0;
    let values = trend
        .values
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let wave = spec.amplitude
                * spec.s0
                * libm::sin(2.0 * core::f64::consts::PI * k as f64 / spec.period);
            let eps = spec.noise * spec.s0 * rng.next_standard_normal();
            (g + wave + eps).max(floor)
        })
        .collect();
    PriceSeries::indexed(values)
}

/// Feature table with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    /// `N x d`.
    pub features: Matrix,
    pub labels: Vec<f64>,
}

impl TabularDataset {
    pub fn new(features: Matrix, labels: Vec<f64>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(invalid!(
                "{} rows for {} labels",
                features.rows(),
                labels.len()
            ));
        }
        if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(invalid!("labels must be 0 or 1, got {y}"));
        }
        if !features.is_finite() {
            return Err(invalid!("features must be finite"));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1.0).count()
    }

    /// Each row becomes a `d x 1` sequence.
    pub fn to_sequences(&self) -> SequenceDataset {
        let inputs = (0..self.features.rows())
            .map(|r| Matrix::column(self.features.row(r)))
            .collect();
        SequenceDataset {
            inputs,
            targets: self.labels.clone(),
            norm_min: 0.0,
            norm_max: 1.0,
        }
    }
}

/// Z-scores each column in place using the population standard deviation.
/// Constant columns are centered and left at zero.
pub fn standardize(features: &mut Matrix) {
    let (n, d) = features.shape();
    for c in 0..d {
        let mean = (0..n).map(|r| features.get(r, c)).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|r| {
                let x = features.get(r, c) - mean;
                x * x
            })
            .sum::<f64>()
            / n as f64;
        let sd = libm::sqrt(var);
        for r in 0..n {
            let centered = features.get(r, c) - mean;
            features.set(r, c, if sd > 0.0 { centered / sd } else { 0.0 });
        }
    }
}

/// Synthetic imbalanced binary classification set. Labels come from a noisy
/// linear score thresholded at the `1 - positive_rate` quantile, so the class
/// ratio is exact up to rounding. Features are standardized.
pub fn synth_tabular(
    seed: u64,
    n: usize,
    d: usize,
    positive_rate: f64,
    signal: f64,
) -> Result<TabularDataset> {
    if n < 2 || d == 0 {
        return Err(invalid!("synthetic table needs n >= 2 and d >= 1"));
    }
    if !(positive_rate > 0.0 && positive_rate < 1.0) {
        return Err(invalid!(
            "positive_rate must be in (0, 1), got {positive_rate}"
        ));
    }
    let mut rng = RngStream::new(seed, 0x7AB);
    let weights: Vec<f64> = (0..d).map(|_| rng.next_standard_normal()).collect();
    let mut features = Matrix::zeros(n, d);
    let mut scores = Vec::with_capacity(n);
    for r in 0..n {
        let mut s = 0.0;
        for c in 0..d {
            let x = rng.next_standard_normal();
            features.set(r, c, x);
            s += weights[c] * x;
        }
        scores.push(signal * s + rng.next_standard_normal());
    }
    let positives = (libm::round(positive_rate * n as f64) as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut labels = alloc::vec![0.0; n];
    for &i in &order[..positives] {
        labels[i] = 1.0;
    }
    standardize(&mut features);
    TabularDataset::new(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn normalize_examples() {
        let (v, min, max) = minmax_normalize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.5, 1.0]);
        assert_eq!(denormalize(&v, min, max), vec![1.0, 2.0, 3.0]);
        assert!(minmax_normalize(&[5.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn window_examples() {
        let ds = make_windows(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.inputs[0].data(), &[1.0, 2.0]);
        assert_eq!(ds.targets[0], 3.0);
        assert_eq!(ds.inputs[0].shape(), (2, 1));
        assert_eq!(make_windows(&[1.0, 2.0, 3.0], 2).unwrap().len(), 1);
        assert!(make_windows(&[1.0, 2.0, 3.0], 3).is_err());
    }

    #[test]
    fn split_examples() {
        let series: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let ds = make_windows(&series, 2).unwrap();
        let (a, b) = chronological_split(&ds, 0.8).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(b.targets[0], 10.0);
        let (a, b) = chronological_split(&ds, 0.99).unwrap();
        assert_eq!((a.len(), b.len()), (9, 1));
        let two = make_windows(&[1.0, 2.0, 3.0], 1).unwrap();
        let (a, b) = chronological_split(&two, 0.5).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        assert!(chronological_split(&ds, 1.0).is_err());
        assert!(chronological_split(&ds, 0.0).is_err());
        assert!(chronological_split(&two, 0.2).is_err());
    }

    #[test]
    fn describe_examples() {
        assert_eq!(describe(&[0.0, 1.0]).unwrap(), (0.5, 0.5));
        assert_eq!(describe(&[0.3, 0.3, 0.3]).unwrap().1, 0.0);
        assert!(describe(&[1.0]).is_err());
    }

    #[test]
    fn price_series_validation() {
        let ts = |v: &[&str]| v.iter().map(|s| String::from(*s)).collect::<Vec<_>>();
        assert!(PriceSeries::new(ts(&["2020-01-01", "2020-01-02"]), vec![1.0, 2.0]).is_ok());
        assert!(PriceSeries::new(ts(&["2020-01-02", "2020-01-01"]), vec![1.0, 2.0]).is_err());
        assert!(PriceSeries::new(ts(&["2020-01-01", "2020-01-02"]), vec![1.0, -2.0]).is_err());
    }

    #[test]
    fn gbm_noise_free_is_exponential() {
        let s = synth_gbm(1, 300, 50.0, 0.08, 0.0).unwrap();
        let last = s.len() - 1;
        let expect = 50.0 * libm::exp(0.08 * last as f64 / TRADING_DAYS);
        assert!((s.values[last] / expect - 1.0).abs() < 1e-10);
        assert_eq!(
            synth_gbm(9, 50, 1.0, 0.1, 0.2).unwrap(),
            synth_gbm(9, 50, 1.0, 0.1, 0.2).unwrap()
        );
        assert!(synth_gbm(1, 1, 1.0, 0.0, 0.1).is_err());
        assert!(synth_gbm(1, 10, -1.0, 0.0, 0.1).is_err());
        assert!(synth_gbm(1, 10, 1.0, 0.0, -0.1).is_err());
    }

    #[test]
    fn gbm_log_returns_have_the_right_mean() {
        let (mu, sigma) = (0.05, 0.3);
        let s = synth_gbm(21, 100_001, 10.0, mu, sigma).unwrap();
        let r: Vec<f64> = s
            .values
            .windows(2)
            .map(|w| libm::log(w[1] / w[0]))
            .collect();
        let (mean, _) = describe(&r).unwrap();
        let dt = 1.0 / TRADING_DAYS;
        let se = sigma * libm::sqrt(dt) / libm::sqrt(r.len() as f64);
        assert!((mean - (mu - 0.5 * sigma * sigma) * dt).abs() < 3.0 * se);
    }

    #[test]
    fn synthetic_table_is_imbalanced_and_standardized() {
        let t = synth_tabular(4, 400, 6, 0.25, 1.0).unwrap();
        assert_eq!(t.positives(), 100);
        for c in 0..6 {
            let col: Vec<f64> = (0..400).map(|r| t.features.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / 400.0;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 400.0;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-10);
        }
        let seqs = t.to_sequences();
        assert_eq!(seqs.inputs[0].shape(), (6, 1));
    }
}
