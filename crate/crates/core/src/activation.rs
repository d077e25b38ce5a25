//! Activation functions with exact backward passes.
//!
//! The deterministic kinds (ReLU, LeakyReLU, PReLU, tanh, GELU) serve as
//! baselines for [`ActivationKind::Brownian`]:
//!
//! ```text
//! f(x) = x                  x > 0
//! f(x) = -alpha * b(x)      x <= 0,   b(x) = (1/M) sum_k B_k(|x|),  B_k(|x|) ~ N(0, |x|)
//! ```
//!
//! `b` is reparameterized as `sqrt(|x|) * zbar` where `zbar` is the mean of
//! `M` standard normals. Forward calls store `zbar` in the [`ActivationCache`]
//! so the backward pass differentiates exactly the function that was sampled.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{invalid, Error, Result};
use crate::numerics::{Matrix, RngStream};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// How the Monte Carlo mean of `M` Brownian samples is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sampling {
    /// Average `M` separate unit-normal draws per element.
    Explicit,
    /// One `N(0, 1/M)` draw per element; same law as `Explicit`.
    #[default]
    Collapsed,
}

/// Input gradient used on the negative branch of Brownian ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InputGradMode {
    /// Derivative of the sampled function with the noise held fixed:
    /// `alpha * zbar / (2 * sqrt(max(|x|, eps)))`.
    #[default]
    Pathwise,
    /// No gradient flows through the negative branch.
    Zero,
    /// Treat the negative branch as a PReLU slope `alpha`.
    ExpectedSlope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ActivationKind {
    Relu,
    LeakyRelu {
        slope: f64,
    },
    Prelu,
    Tanh,
    Gelu,
    Brownian {
        paths: u32,
        epsilon: f64,
        sampling: Sampling,
        #[cfg_attr(feature = "serde", serde(default))]
        input_grad: InputGradMode,
    },
}

impl ActivationKind {
    pub fn leaky_relu() -> Self {
        ActivationKind::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    /// Brownian ReLU with `paths` Monte Carlo samples and default settings.
    pub fn brownian(paths: u32) -> Self {
        ActivationKind::Brownian {
            paths,
            epsilon: DEFAULT_EPSILON,
            sampling: Sampling::Collapsed,
            input_grad: InputGradMode::Pathwise,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu { .. } => "leaky_relu",
            ActivationKind::Prelu => "prelu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Brownian { .. } => "brownian",
        }
    }

    /// Whether this kind reads the trainable `alpha`.
    pub fn has_alpha(&self) -> bool {
        matches!(
            self,
            ActivationKind::Prelu | ActivationKind::Brownian { .. }
        )
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, ActivationKind::Brownian { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::LeakyRelu { slope } if !slope.is_finite() => {
                Err(invalid!("leaky_relu slope must be finite"))
            }
            ActivationKind::Brownian { paths, .. } if paths == 0 => {
                Err(invalid!("brownian needs at least one sample path"))
            }
            ActivationKind::Brownian { epsilon, .. } if !(epsilon > 0.0 && epsilon.is_finite()) => {
                Err(invalid!("brownian epsilon must be > 0, got {epsilon}"))
            }
            _ => Ok(()),
        }
    }
}

/// Everything a backward pass needs from one forward call.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCache {
    pub kind: ActivationKind,
    pub inputs: Matrix,
    /// Mean of `M` unit normals per element; zero where the input is positive.
    /// `None` for deterministic kinds.
    pub zbar: Option<Matrix>,
    pub alpha_at_call: f64,
}

impl ActivationCache {
    /// The sampled Monte Carlo means `b = sqrt(|x|) * zbar`, if any.
    pub fn mean_paths(&self) -> Option<Matrix> {
        let zbar = self.zbar.as_ref()?;
        Some(Matrix::from_fn(
            self.inputs.rows(),
            self.inputs.cols(),
            |r, c| {
                let x = self.inputs.get(r, c);
                if x > 0.0 {
                    0.0
                } else {
                    libm::sqrt(-x) * zbar.get(r, c)
                }
            },
        ))
    }
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Mean unit normal for element `index` of an activation call.
#[inline]
fn sample_zbar(rng: &RngStream, index: u64, paths: u32, sampling: Sampling) -> f64 {
    match sampling {
        Sampling::Collapsed => rng.standard_normal_at(index) / libm::sqrt(paths as f64),
        Sampling::Explicit => {
            let m = paths as u64;
            let base = index * m;
            (0..m)
                .map(|k| rng.standard_normal_at(base + k))
                .sum::<f64>()
                / paths as f64
        }
    }
}

#[inline]
fn deterministic_value(kind: &ActivationKind, x: f64, alpha: f64) -> f64 {
    match *kind {
        ActivationKind::Relu => {
            if x > 0.0 {
                x
            } else {
                0.0
            }
        }
        ActivationKind::LeakyRelu { slope } => {
            if x > 0.0 {
                x
            } else {
                slope * x
            }
        }
        ActivationKind::Prelu => {
            if x > 0.0 {
                x
            } else {
                alpha * x
            }
        }
        ActivationKind::Tanh => libm::tanh(x),
        ActivationKind::Gelu => x * normal_cdf(x),
        ActivationKind::Brownian { .. } => unreachable!("brownian is not deterministic"),
    }
}

#[inline]
fn brownian_value(x: f64, alpha: f64, zbar: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        // `+ 0.0` folds -0.0 into +0.0 so alpha = 0 reproduces relu bit for bit.
        -(alpha * (libm::sqrt(-x) * zbar)) + 0.0
    }
}

fn check_inputs(x: &Matrix) -> Result<()> {
    if let Some(v) = x.data().iter().find(|v| !v.is_finite()) {
        return Err(invalid!("activation input must be finite, got {v}"));
    }
    Ok(())
}

/// Forward pass. Brownian noise for element `j` (row-major) is taken from
/// draw `j` of `rng`, so replaying the same stream replays the same noise.
pub fn forward(
    kind: &ActivationKind,
    x: &Matrix,
    alpha: f64,
    rng: &RngStream,
) -> Result<(Matrix, ActivationCache)> {
    kind.validate()?;
    check_inputs(x)?;
    match *kind {
        ActivationKind::Brownian {
            paths, sampling, ..
        } => {
            let mut zbar = Matrix::zeros(x.rows(), x.cols());
            for (j, (z, &xv)) in zbar.data_mut().iter_mut().zip(x.data()).enumerate() {
                if xv <= 0.0 {
                    *z = sample_zbar(rng, j as u64, paths, sampling);
                }
            }
            forward_with_zbar(kind, x, alpha, zbar)
        }
        _ => Ok(deterministic_forward(kind, x, alpha)),
    }
}

/// Forward pass with the Brownian noise replaced by its expectation (zero),
/// which turns the negative branch off.
pub fn forward_expected(
    kind: &ActivationKind,
    x: &Matrix,
    alpha: f64,
) -> Result<(Matrix, ActivationCache)> {
    kind.validate()?;
    check_inputs(x)?;
    match kind {
        ActivationKind::Brownian { .. } => {
            forward_with_zbar(kind, x, alpha, Matrix::zeros(x.rows(), x.cols()))
        }
        _ => Ok(deterministic_forward(kind, x, alpha)),
    }
}

/// Brownian forward pass with caller-supplied `zbar` (frozen noise). Entries
/// of `zbar` at positive inputs are ignored and stored as zero.
pub fn forward_with_zbar(
    kind: &ActivationKind,
    x: &Matrix,
    alpha: f64,
    mut zbar: Matrix,
) -> Result<(Matrix, ActivationCache)> {
    if !kind.is_stochastic() {
        return Err(Error::UnsupportedKind(format!(
            "{} takes no noise",
            kind.name()
        )));
    }
    if zbar.shape() != x.shape() {
        return Err(Error::DimensionMismatch {
            op: "forward_with_zbar",
            left: x.shape(),
            right: zbar.shape(),
        });
    }
    check_inputs(x)?;
    let mut y = Matrix::zeros(x.rows(), x.cols());
    for ((out, z), &xv) in y.data_mut().iter_mut().zip(zbar.data_mut()).zip(x.data()) {
        if xv > 0.0 {
            *z = 0.0;
        }
        *out = brownian_value(xv, alpha, *z);
    }
    Ok((
        y,
        ActivationCache {
            kind: *kind,
            inputs: x.clone(),
            zbar: Some(zbar),
            alpha_at_call: alpha,
        },
    ))
}

fn deterministic_forward(
    kind: &ActivationKind,
    x: &Matrix,
    alpha: f64,
) -> (Matrix, ActivationCache) {
    (
        x.map(|v| deterministic_value(kind, v, alpha)),
        ActivationCache {
            kind: *kind,
            inputs: x.clone(),
            zbar: None,
            alpha_at_call: alpha,
        },
    )
}

/// One Monte Carlo mean path `b = (1/M) sum_k B_k(|x|)` at a non-positive
/// input, drawn sequentially from `rng`. Law: `N(0, |x| / M)`.
pub fn brownian_mean_path(
    x: f64,
    paths: u32,
    rng: &mut RngStream,
    sampling: Sampling,
) -> Result<f64> {
    if !(x <= 0.0) {
        return Err(invalid!("brownian_mean_path needs x <= 0, got {x}"));
    }
    if paths == 0 {
        return Err(invalid!("brownian needs at least one sample path"));
    }
    let t = -x;
    match sampling {
        Sampling::Collapsed => crate::numerics::gaussian(rng, 0.0, libm::sqrt(t / paths as f64)),
        Sampling::Explicit => {
            let std = libm::sqrt(t);
            let mut sum = 0.0;
            for _ in 0..paths {
                sum += crate::numerics::gaussian(rng, 0.0, std)?;
            }
            Ok(sum / paths as f64)
        }
    }
}

fn check_upstream(cache: &ActivationCache, upstream: &Matrix) -> Result<()> {
    if cache.inputs.shape() != upstream.shape() {
        return Err(Error::DimensionMismatch {
            op: "activation backward",
            left: cache.inputs.shape(),
            right: upstream.shape(),
        });
    }
    Ok(())
}

fn check_kind(kind: &ActivationKind, cache: &ActivationCache) -> Result<()> {
    if kind != &cache.kind || kind.is_stochastic() != cache.zbar.is_some() {
        return Err(Error::UnsupportedKind(format!(
            "cache from {} used with {}",
            cache.kind.name(),
            kind.name()
        )));
    }
    Ok(())
}

/// Local derivative `f'(x)` at element `j` of the cached call.
#[inline]
pub(crate) fn local_slope(cache: &ActivationCache, j: usize) -> f64 {
    let x = cache.inputs.data()[j];
    let alpha = cache.alpha_at_call;
    match cache.kind {
        ActivationKind::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        ActivationKind::LeakyRelu { slope } => {
            if x > 0.0 {
                1.0
            } else {
                slope
            }
        }
        ActivationKind::Prelu => {
            if x > 0.0 {
                1.0
            } else {
                alpha
            }
        }
        ActivationKind::Tanh => {
            let t = libm::tanh(x);
            1.0 - t * t
        }
        ActivationKind::Gelu => normal_cdf(x) + x * normal_pdf(x),
        ActivationKind::Brownian {
            epsilon,
            input_grad,
            ..
        } => {
            if x > 0.0 {
                1.0
            } else if x == 0.0 {
                0.0
            } else {
                match input_grad {
                    InputGradMode::Pathwise => {
                        let zbar = cache.zbar.as_ref().map_or(0.0, |z| z.data()[j]);
                        alpha * zbar / (2.0 * libm::sqrt((-x).max(epsilon)))
                    }
                    InputGradMode::Zero => 0.0,
                    InputGradMode::ExpectedSlope => alpha,
                }
            }
        }
    }
}

/// Contribution of element `j` to `dL/dalpha` per unit upstream gradient.
#[inline]
pub(crate) fn local_alpha_slope(cache: &ActivationCache, j: usize) -> f64 {
    let x = cache.inputs.data()[j];
    if x > 0.0 {
        return 0.0;
    }
    match cache.kind {
        ActivationKind::Prelu => x,
        ActivationKind::Brownian { .. } => {
            let zbar = cache.zbar.as_ref().map_or(0.0, |z| z.data()[j]);
            -(libm::sqrt(-x) * zbar)
        }
        _ => 0.0,
    }
}

/// `dL/dx = upstream * f'(x)` elementwise.
pub fn backward_input(
    kind: &ActivationKind,
    cache: &ActivationCache,
    upstream: &Matrix,
) -> Result<Matrix> {
    check_kind(kind, cache)?;
    check_upstream(cache, upstream)?;
    let data: Vec<f64> = upstream
        .data()
        .iter()
        .enumerate()
        .map(|(j, &g)| g * local_slope(cache, j))
        .collect();
    Matrix::new(upstream.rows(), upstream.cols(), data)
}

/// `dL/dalpha` summed over the elements of one call. For Brownian ReLU this
/// is `-sum_i upstream_i * 1{x_i <= 0} * b_i`.
pub fn backward_alpha(
    kind: &ActivationKind,
    cache: &ActivationCache,
    upstream: &Matrix,
) -> Result<f64> {
    if !kind.has_alpha() {
        return Err(Error::UnsupportedKind(format!(
            "{} has no learnable alpha",
            kind.name()
        )));
    }
    check_kind(kind, cache)?;
    check_upstream(cache, upstream)?;
    Ok(upstream
        .data()
        .iter()
        .enumerate()
        .map(|(j, &g)| g * local_alpha_slope(cache, j))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn scalar(v: f64) -> Matrix {
        Matrix::column(&[v])
    }

    fn all_kinds() -> Vec<ActivationKind> {
        vec![
            ActivationKind::Relu,
            ActivationKind::leaky_relu(),
            ActivationKind::Prelu,
            ActivationKind::Tanh,
            ActivationKind::Gelu,
            ActivationKind::brownian(500),
        ]
    }

    fn fwd(kind: ActivationKind, x: f64, alpha: f64) -> f64 {
        forward(&kind, &scalar(x), alpha, &RngStream::new(3, 0))
            .unwrap()
            .0
            .data()[0]
    }

    #[test]
    fn forward_examples() {
        assert_eq!(fwd(ActivationKind::Relu, -1.5, 0.0), 0.0);
        assert_eq!(fwd(ActivationKind::brownian(500), 2.0, 0.5), 2.0);
        assert_eq!(fwd(ActivationKind::brownian(500), -3.0, 0.0), 0.0);
        assert_eq!(fwd(ActivationKind::brownian(500), 0.0, 0.7), 0.0);
        assert_eq!(fwd(ActivationKind::Gelu, 0.0, 0.0), 0.0);
        assert_eq!(fwd(ActivationKind::Tanh, 0.0, 0.0), 0.0);
        assert_eq!(fwd(ActivationKind::leaky_relu(), -2.0, 0.0), -0.02);
        assert_eq!(fwd(ActivationKind::Prelu, -2.0, 0.25), -0.5);
    }

    #[test]
    fn act_of_zero_is_zero_for_every_kind() {
        for kind in all_kinds() {
            assert_eq!(fwd(kind, 0.0, 0.3), 0.0, "{}", kind.name());
        }
    }

    #[test]
    fn rejects_non_finite_input_and_bad_kinds() {
        let rng = RngStream::new(0, 0);
        assert!(forward(&ActivationKind::Relu, &scalar(f64::NAN), 0.0, &rng).is_err());
        assert!(forward(&ActivationKind::brownian(0), &scalar(-1.0), 0.0, &rng).is_err());
        let bad_eps = ActivationKind::Brownian {
            paths: 5,
            epsilon: 0.0,
            sampling: Sampling::Collapsed,
            input_grad: InputGradMode::Pathwise,
        };
        assert!(forward(&bad_eps, &scalar(-1.0), 0.0, &rng).is_err());
    }

    #[test]
    fn zbar_is_zero_on_positive_inputs() {
        let x = Matrix::column(&[1.0, -1.0, 2.0, -0.5, 0.0]);
        let (_, cache) = forward(
            &ActivationKind::brownian(10),
            &x,
            0.5,
            &RngStream::new(1, 1),
        )
        .unwrap();
        let zbar = cache.zbar.unwrap();
        assert_eq!(zbar.data()[0], 0.0);
        assert_eq!(zbar.data()[2], 0.0);
        assert_ne!(zbar.data()[1], 0.0);
    }

    #[test]
    fn deterministic_kinds_have_no_noise() {
        for kind in all_kinds().into_iter().filter(|k| !k.is_stochastic()) {
            let (_, cache) = forward(&kind, &scalar(-1.0), 0.2, &RngStream::new(0, 0)).unwrap();
            assert!(cache.zbar.is_none());
        }
    }

    #[test]
    fn same_stream_replays_noise() {
        let x = Matrix::column(&[-1.0, -2.0, -3.0]);
        let kind = ActivationKind::brownian(100);
        let a = forward(&kind, &x, 0.8, &RngStream::new(9, 4)).unwrap().0;
        let b = forward(&kind, &x, 0.8, &RngStream::new(9, 4)).unwrap().0;
        let c = forward(&kind, &x, 0.8, &RngStream::new(9, 5)).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn expected_mode_zeroes_negative_branch() {
        let x = Matrix::column(&[-1.0, 2.0]);
        let (y, _) = forward_expected(&ActivationKind::brownian(10), &x, 0.9).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn mean_path_examples() {
        let mut rng = RngStream::new(1, 2);
        for sampling in [Sampling::Explicit, Sampling::Collapsed] {
            assert_eq!(brownian_mean_path(0.0, 7, &mut rng, sampling).unwrap(), 0.0);
        }
        assert!(brownian_mean_path(1.0, 7, &mut rng, Sampling::Collapsed).is_err());
        assert!(brownian_mean_path(-1.0, 0, &mut rng, Sampling::Collapsed).is_err());

        // frozen zbar = 0.5 at x = -4 with a single path gives b = 2 * 0.5
        let (_, cache) = forward_with_zbar(
            &ActivationKind::Brownian {
                paths: 1,
                epsilon: DEFAULT_EPSILON,
                sampling: Sampling::Explicit,
                input_grad: InputGradMode::Pathwise,
            },
            &scalar(-4.0),
            1.0,
            scalar(0.5),
        )
        .unwrap();
        assert_eq!(cache.mean_paths().unwrap().data(), &[1.0]);
    }

    #[test]
    fn mean_path_std_matches_law() {
        for sampling in [Sampling::Explicit, Sampling::Collapsed] {
            let mut rng = RngStream::new(77, 0);
            let n = 10_000;
            let bs: Vec<f64> = (0..n)
                .map(|_| brownian_mean_path(-4.0, 100, &mut rng, sampling).unwrap())
                .collect();
            let mean = bs.iter().sum::<f64>() / n as f64;
            let var = bs.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (n as f64 - 1.0);
            let std = libm::sqrt(var);
            assert!((std / 0.2 - 1.0).abs() < 0.05, "{sampling:?} std {std}");
        }
    }

    #[test]
    fn backward_examples() {
        let rng = RngStream::new(0, 0);
        let (_, c) = forward(&ActivationKind::Relu, &scalar(2.0), 0.0, &rng).unwrap();
        assert_eq!(
            backward_input(&ActivationKind::Relu, &c, &scalar(3.0))
                .unwrap()
                .data(),
            &[3.0]
        );
        let (_, c) = forward(&ActivationKind::Prelu, &scalar(-2.0), 0.25, &rng).unwrap();
        assert_eq!(
            backward_input(&ActivationKind::Prelu, &c, &scalar(1.0))
                .unwrap()
                .data(),
            &[0.25]
        );
        assert_eq!(
            backward_alpha(&ActivationKind::Prelu, &c, &scalar(1.0)).unwrap(),
            -2.0
        );
        let (_, c) = forward(&ActivationKind::Relu, &scalar(0.0), 0.0, &rng).unwrap();
        assert_eq!(
            backward_input(&ActivationKind::Relu, &c, &scalar(1.0))
                .unwrap()
                .data(),
            &[0.0]
        );
    }

    #[test]
    fn brownian_alpha_gradient_is_minus_delta_b() {
        // x = -1 so sqrt(|x|) = 1 and b equals zbar
        let kind = ActivationKind::brownian(50);
        let (_, cache) = forward_with_zbar(&kind, &scalar(-1.0), 0.3, scalar(0.7)).unwrap();
        assert_eq!(backward_alpha(&kind, &cache, &scalar(2.0)).unwrap(), -1.4);
    }

    #[test]
    fn alpha_gradient_vanishes_on_positive_inputs() {
        let x = Matrix::column(&[0.5, 1.0, 3.0]);
        let up = Matrix::column(&[1.0, -2.0, 4.0]);
        for kind in [ActivationKind::Prelu, ActivationKind::brownian(20)] {
            let (_, cache) = forward(&kind, &x, 0.6, &RngStream::new(4, 4)).unwrap();
            assert_eq!(backward_alpha(&kind, &cache, &up).unwrap(), 0.0);
        }
    }

    #[test]
    fn alpha_gradient_unsupported_for_fixed_kinds() {
        let (_, cache) = forward(
            &ActivationKind::Relu,
            &scalar(-1.0),
            0.0,
            &RngStream::new(0, 0),
        )
        .unwrap();
        assert!(matches!(
            backward_alpha(&ActivationKind::Relu, &cache, &scalar(1.0)),
            Err(Error::UnsupportedKind(_))
        ));
    }

    #[test]
    fn backward_rejects_mismatches() {
        let (_, cache) = forward(
            &ActivationKind::Tanh,
            &scalar(0.3),
            0.0,
            &RngStream::new(0, 0),
        )
        .unwrap();
        assert!(backward_input(&ActivationKind::Tanh, &cache, &Matrix::zeros(2, 1)).is_err());
        assert!(backward_input(&ActivationKind::Gelu, &cache, &scalar(1.0)).is_err());
    }

    #[test]
    fn input_grad_modes() {
        let make = |input_grad| ActivationKind::Brownian {
            paths: 4,
            epsilon: DEFAULT_EPSILON,
            sampling: Sampling::Collapsed,
            input_grad,
        };
        for (mode, expect) in [
            (InputGradMode::Pathwise, 0.5 * 0.4 / 2.0),
            (InputGradMode::Zero, 0.0),
            (InputGradMode::ExpectedSlope, 0.5),
        ] {
            let kind = make(mode);
            let (_, cache) = forward_with_zbar(&kind, &scalar(-1.0), 0.5, scalar(0.4)).unwrap();
            let g = backward_input(&kind, &cache, &scalar(1.0)).unwrap().data()[0];
            assert!((g - expect).abs() < 1e-15, "{mode:?}: {g}");
        }
    }

    #[test]
    fn epsilon_clamps_near_zero() {
        let kind = ActivationKind::Brownian {
            paths: 1,
            epsilon: 1e-2,
            sampling: Sampling::Collapsed,
            input_grad: InputGradMode::Pathwise,
        };
        let (_, cache) = forward_with_zbar(&kind, &scalar(-1e-8), 1.0, scalar(1.0)).unwrap();
        let g = backward_input(&kind, &cache, &scalar(1.0)).unwrap().data()[0];
        assert!((g - 1.0 / (2.0 * 0.1)).abs() < 1e-12);
    }
}
