use brelu_core::activation::{
    backward_alpha, backward_input, forward, forward_with_zbar, ActivationKind, InputGradMode,
    Sampling, DEFAULT_EPSILON,
};
use brelu_core::numerics::{Matrix, RngStream};
use proptest::prelude::*;

fn scalar(v: f64) -> Matrix {
    Matrix::column(&[v])
}

fn brownian(paths: u32, sampling: Sampling) -> ActivationKind {
    ActivationKind::Brownian {
        paths,
        epsilon: DEFAULT_EPSILON,
        sampling,
        input_grad: InputGradMode::Pathwise,
    }
}

/// `n` independent forward calls at a single input, one substream each.
fn samples(kind: &ActivationKind, x: f64, alpha: f64, n: usize, seed: u64) -> Vec<f64> {
    let root = RngStream::new(seed, 0);
    let input = scalar(x);
    (0..n)
        .map(|i| {
            forward(kind, &input, alpha, &root.substream(i as u64))
                .unwrap()
                .0
                .data()[0]
        })
        .collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (
        mean,
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0),
    )
}

proptest! {
    #[test]
    fn identity_on_positives(x in 1e-9f64..1e3, alpha in -2.0f64..2.0, paths in 1u32..2000) {
        let rng = RngStream::new(1, 1);
        for kind in [ActivationKind::Relu, ActivationKind::leaky_relu(), ActivationKind::Prelu, ActivationKind::brownian(paths)] {
            prop_assert_eq!(forward(&kind, &scalar(x), alpha, &rng).unwrap().0.data()[0], x);
        }
    }

    #[test]
    fn zero_alpha_brownian_is_relu(xs in proptest::collection::vec(-10.0f64..10.0, 1..64), paths in 1u32..2000, seed: u64) {
        let x = Matrix::column(&xs);
        let rng = RngStream::new(seed, 5);
        let relu = forward(&ActivationKind::Relu, &x, 0.0, &rng).unwrap().0;
        for sampling in [Sampling::Collapsed, Sampling::Explicit] {
            let kind = brownian(paths.min(64), sampling);
            let br = forward(&kind, &x, 0.0, &rng).unwrap().0;
            for (a, b) in br.data().iter().zip(relu.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

#[test]
fn negative_branch_is_centered_with_variance_alpha2_x_over_m() {
    let n = 100_000;
    for (x, alpha, m) in [(-1.0, 1.0, 1000u32), (-2.5, 0.4, 50), (-0.3, 2.0, 1)] {
        let ys = samples(&ActivationKind::brownian(m), x, alpha, n, 17);
        let (mean, var) = mean_var(&ys);
        let law_var = alpha * alpha * (-x) / m as f64;
        assert!(
            mean.abs() < 3.0 * law_var.sqrt() / (n as f64).sqrt(),
            "x={x}: mean {mean}"
        );
        assert!(
            (var / law_var - 1.0).abs() < 0.05,
            "x={x}: var {var} vs {law_var}"
        );
    }
}

#[test]
fn variance_shrinks_as_one_over_m() {
    // explicit averaging with a fresh seed per M; collapsed draws on one
    // stream would only rescale the same numbers
    let vars: Vec<f64> = [1u32, 10, 100, 1000]
        .iter()
        .map(|&m| {
            let kind = brownian(m, Sampling::Explicit);
            mean_var(&samples(&kind, -1.0, 1.0, 100_000, 23 + m as u64)).1
        })
        .collect();
    for w in vars.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 10.0 - 1.0).abs() < 0.10, "decade ratio {ratio}");
    }
}

#[test]
fn explicit_and_collapsed_sampling_agree_in_distribution() {
    let n = 100_000;
    let explicit = samples(&brownian(10, Sampling::Explicit), -2.0, 0.7, n, 31);
    let collapsed = samples(&brownian(10, Sampling::Collapsed), -2.0, 0.7, n, 32);
    let (m1, v1) = mean_var(&explicit);
    let (m2, v2) = mean_var(&collapsed);
    let sd = v2.sqrt();
    assert!((m1 - m2).abs() < 0.02 * sd, "means {m1} {m2}");
    assert!((v1 / v2 - 1.0).abs() < 0.02, "variances {v1} {v2}");
}

fn frozen(kind: &ActivationKind, x: f64, alpha: f64, zbar: f64) -> f64 {
    forward_with_zbar(kind, &scalar(x), alpha, scalar(zbar))
        .unwrap()
        .0
        .data()[0]
}

#[test]
fn frozen_noise_gradients_match_finite_differences() {
    let kind = ActivationKind::brownian(100);
    let h: f64 = 1e-7;
    let mut rng = RngStream::new(8, 8);
    for _ in 0..500 {
        let x = -rng.next_range(10.0 * DEFAULT_EPSILON + 1e-4, 5.0);
        let alpha = rng.next_range(-1.5, 1.5);
        let zbar = rng.next_standard_normal() * 0.3;
        let up = rng.next_range(-2.0, 2.0);
        let (_, cache) = forward_with_zbar(&kind, &scalar(x), alpha, scalar(zbar)).unwrap();

        let dx = backward_input(&kind, &cache, &scalar(up)).unwrap().data()[0];
        let h_x = h.min(-x / 10.0);
        let fd_x = up * (frozen(&kind, x + h_x, alpha, zbar) - frozen(&kind, x - h_x, alpha, zbar))
            / (2.0 * h_x);
        assert!(
            (dx - fd_x).abs() <= 1e-5 * dx.abs().max(fd_x.abs()).max(1e-8),
            "x={x}: {dx} vs {fd_x}"
        );

        let da = backward_alpha(&kind, &cache, &scalar(up)).unwrap();
        let fd_a = up * (frozen(&kind, x, alpha + h, zbar) - frozen(&kind, x, alpha - h, zbar))
            / (2.0 * h);
        assert!(
            (da - fd_a).abs() <= 1e-5 * da.abs().max(fd_a.abs()).max(1e-8),
            "x={x}: {da} vs {fd_a}"
        );
    }
}

#[test]
fn paper_alpha_gradient_cases() {
    let kind = ActivationKind::brownian(30);
    for (x, zbar, delta) in [(-1.0, 0.7, 2.0), (-4.0, -0.25, 0.5), (-0.09, 1.5, -3.0)] {
        let (_, cache) = forward_with_zbar(&kind, &scalar(x), 0.6, scalar(zbar)).unwrap();
        let b = cache.mean_paths().unwrap().data()[0];
        assert_eq!(
            backward_alpha(&kind, &cache, &scalar(delta)).unwrap(),
            -delta * b
        );
    }
}

#[test]
fn deterministic_kinds_match_finite_differences() {
    let h = 1e-6;
    let mut rng = RngStream::new(2, 2);
    for kind in [
        ActivationKind::Relu,
        ActivationKind::leaky_relu(),
        ActivationKind::Prelu,
        ActivationKind::Tanh,
        ActivationKind::Gelu,
    ] {
        for _ in 0..400 {
            let x = rng.next_range(-6.0, 6.0);
            if x.abs() < 1e-3 {
                continue;
            }
            let alpha = rng.next_range(0.0, 1.0);
            let r = RngStream::new(0, 0);
            let f = |v: f64, a: f64| forward(&kind, &scalar(v), a, &r).unwrap().0.data()[0];
            let (_, cache) = forward(&kind, &scalar(x), alpha, &r).unwrap();
            let d = backward_input(&kind, &cache, &scalar(1.0)).unwrap().data()[0];
            let fd = (f(x + h, alpha) - f(x - h, alpha)) / (2.0 * h);
            let scale = d.abs().max(fd.abs()).max(1e-2);
            assert!(
                (d - fd).abs() / scale < 1e-7,
                "{} x={x}: {d} vs {fd}",
                kind.name()
            );
            if kind == ActivationKind::Prelu {
                let da = backward_alpha(&kind, &cache, &scalar(1.0)).unwrap();
                let fd_a = (f(x, alpha + h) - f(x, alpha - h)) / (2.0 * h);
                assert!((da - fd_a).abs() / da.abs().max(fd_a.abs()).max(1e-2) < 1e-7);
            }
        }
    }
}
