//! Single-layer LSTM with a dense output head and exact backpropagation
//! through time.
//!
//! ```text
//! f_t  = sigmoid(W_f x_t + U_f h_{t-1} + b_f)
//! i_t  = sigmoid(W_i x_t + U_i h_{t-1} + b_i)
//! o_t  = sigmoid(W_o x_t + U_o h_{t-1} + b_o)
//! C~_t = act(W_c x_t + U_c h_{t-1} + b_c)
//! C_t  = f_t * C_{t-1} + i_t * C~_t
//! h_t  = o_t * act(C_t)
//! ```
//!
//! `act` is the configured [`ActivationKind`] at both sites. With Brownian
//! ReLU the two sites draw from separate substreams of the step's
//! [`RngStream`], and the trace keeps the sampled noise so [`backward_bptt`]
//! differentiates the realized function.

use alloc::vec;
use alloc::vec::Vec;

use crate::activation::{
    self, local_alpha_slope, local_slope, sigmoid, ActivationCache, ActivationKind,
};
use crate::error::{invalid, Error, Result};
use crate::numerics::{Matrix, RngStream};

const INIT_STREAM: u64 = 0x1417;

/// Output head applied to the final hidden state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Head {
    /// `W_y h_T + b_y`
    #[default]
    Regression,
    /// `sigmoid(W_y h_T + b_y)`
    Classification,
}

/// Source of Brownian noise for a forward pass.
#[derive(Debug, Clone)]
pub enum Noise {
    Stream(RngStream),
    /// Replace each Monte Carlo mean by its expectation, zero.
    Expected,
}

impl Noise {
    fn substream(&self, sub: u64) -> Noise {
        match self {
            Noise::Stream(s) => Noise::Stream(s.substream(sub)),
            Noise::Expected => Noise::Expected,
        }
    }
}

/// All trainable state of the model. Gradients use the same layout, see
/// [`ParamGrads`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub u_f: Matrix,
    pub u_i: Matrix,
    pub u_c: Matrix,
    pub u_o: Matrix,
    pub b_f: Matrix,
    pub b_i: Matrix,
    pub b_c: Matrix,
    pub b_o: Matrix,
    pub w_y: Matrix,
    pub b_y: Matrix,
    pub alpha: f64,
}

/// Gradient of a scalar loss with respect to every field of [`LstmParams`].
pub type ParamGrads = LstmParams;

pub const DEFAULT_ALPHA: f64 = 0.25;
pub const FORGET_BIAS: f64 = 1.0;
pub const TENSOR_NAMES: [&str; 14] = [
    "w_f", "w_i", "w_c", "w_o", "u_f", "u_i", "u_c", "u_o", "b_f", "b_i", "b_c", "b_o", "w_y",
    "b_y",
];

impl LstmParams {
    /// All weights and biases zero, `alpha = 0`.
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        let (d, n, out) = (input_dim, hidden_dim, output_dim);
        Self {
            input_dim: d,
            hidden_dim: n,
            output_dim: out,
            w_f: Matrix::zeros(n, d),
            w_i: Matrix::zeros(n, d),
            w_c: Matrix::zeros(n, d),
            w_o: Matrix::zeros(n, d),
            u_f: Matrix::zeros(n, n),
            u_i: Matrix::zeros(n, n),
            u_c: Matrix::zeros(n, n),
            u_o: Matrix::zeros(n, n),
            b_f: Matrix::zeros(n, 1),
            b_i: Matrix::zeros(n, 1),
            b_c: Matrix::zeros(n, 1),
            b_o: Matrix::zeros(n, 1),
            w_y: Matrix::zeros(out, n),
            b_y: Matrix::zeros(out, 1),
            alpha: 0.0,
        }
    }

    /// Same shapes as `self`, all zero.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, self.hidden_dim, self.output_dim)
    }

    pub fn tensors(&self) -> [&Matrix; 14] {
        [
            &self.w_f, &self.w_i, &self.w_c, &self.w_o, &self.u_f, &self.u_i, &self.u_c, &self.u_o,
            &self.b_f, &self.b_i, &self.b_c, &self.b_o, &self.w_y, &self.b_y,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 14] {
        [
            &mut self.w_f,
            &mut self.w_i,
            &mut self.w_c,
            &mut self.w_o,
            &mut self.u_f,
            &mut self.u_i,
            &mut self.u_c,
            &mut self.u_o,
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
            &mut self.w_y,
            &mut self.b_y,
        ]
    }

    /// Number of scalars including `alpha`.
    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|m| m.len()).sum::<usize>() + 1
    }

    /// `self += k * other`, `alpha` included.
    pub fn axpy(&mut self, k: f64, other: &LstmParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.axpy(k, b);
        }
        self.alpha += k * other.alpha;
    }

    pub fn scale(&mut self, k: f64) {
        for m in self.tensors_mut() {
            m.data_mut().iter_mut().for_each(|v| *v *= k);
        }
        self.alpha *= k;
    }

    /// Squared Euclidean norm over every scalar, `alpha` included.
    pub fn sq_norm(&self) -> f64 {
        self.tensors().iter().map(|m| m.sq_norm()).sum::<f64>() + self.alpha * self.alpha
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.tensors().iter().all(|m| m.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        let (d, n, out) = (self.input_dim, self.hidden_dim, self.output_dim);
        if d == 0 || n == 0 || out == 0 {
            return Err(invalid!(
                "LSTM dimensions must be positive, got d={d} n={n} out={out}"
            ));
        }
        let expected = [
            (n, d),
            (n, d),
            (n, d),
            (n, d),
            (n, n),
            (n, n),
            (n, n),
            (n, n),
            (n, 1),
            (n, 1),
            (n, 1),
            (n, 1),
            (out, n),
            (out, 1),
        ];
        for ((m, shape), name) in self.tensors().iter().zip(expected).zip(TENSOR_NAMES) {
            if m.shape() != shape {
                return Err(invalid!(
                    "{name} has shape {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    shape.0,
                    shape.1
                ));
            }
        }
        if !self.is_finite() {
            return Err(invalid!("parameters contain non-finite values"));
        }
        Ok(())
    }
}

/// Xavier-uniform weights, zero biases except `b_f = 1`, `alpha = 0.25`.
pub fn init_params(
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    seed: u64,
) -> Result<LstmParams> {
    if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
        return Err(invalid!(
            "LSTM dimensions must be positive, got d={input_dim} n={hidden_dim} out={output_dim}"
        ));
    }
    let mut p = LstmParams::zeros(input_dim, hidden_dim, output_dim);
    let root = RngStream::new(seed, INIT_STREAM);
    for (idx, m) in p.tensors_mut().into_iter().enumerate() {
        // biases are the 1-column tensors at slots 8..12 and 13
        if (8..12).contains(&idx) || idx == 13 {
            continue;
        }
        let (fan_out, fan_in) = m.shape();
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let mut rng = root.substream(idx as u64);
        m.data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.next_range(-limit, limit));
    }
    p.b_f.fill(FORGET_BIAS);
    p.alpha = DEFAULT_ALPHA;
    Ok(p)
}

/// Intermediate values of one LSTM step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    /// Candidate cell state after the activation.
    pub candidate: Vec<f64>,
    /// `act(C_t)`.
    pub cell_act: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    /// Activation cache at the candidate site; its inputs are the candidate pre-activation.
    pub candidate_cache: ActivationCache,
    /// Activation cache at the cell-output site; its inputs are `C_t`.
    pub cell_cache: ActivationCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub activation: ActivationKind,
    pub head: Head,
    pub steps: Vec<StepCache>,
    pub prediction: Matrix,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Final hidden state.
    pub fn last_hidden(&self) -> &[f64] {
        &self.steps[self.steps.len() - 1].h
    }
}

fn pre_activation(w: &Matrix, u: &Matrix, b: &Matrix, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
    let mut z = b.data().to_vec();
    w.gemv_acc(x, &mut z);
    u.gemv_acc(h_prev, &mut z);
    z
}

fn activate(
    act: &ActivationKind,
    z: Vec<f64>,
    alpha: f64,
    noise: &Noise,
) -> Result<(Matrix, ActivationCache)> {
    let zm = Matrix::new(z.len(), 1, z)?;
    match noise {
        Noise::Stream(s) => activation::forward(act, &zm, alpha, s),
        Noise::Expected => activation::forward_expected(act, &zm, alpha),
    }
}

fn check_vec(op: &'static str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            op,
            left: (n, 1),
            right: (v.len(), 1),
        });
    }
    Ok(())
}

/// One LSTM step. Substream 0 of `noise` feeds the candidate site and
/// substream 1 the cell-output site.
pub fn cell_forward(
    p: &LstmParams,
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    act: &ActivationKind,
    noise: &Noise,
) -> Result<StepCache> {
    check_vec("cell_forward x_t", x_t, p.input_dim)?;
    check_vec("cell_forward h_prev", h_prev, p.hidden_dim)?;
    check_vec("cell_forward c_prev", c_prev, p.hidden_dim)?;

    let gate = |w: &Matrix, u: &Matrix, b: &Matrix| -> Vec<f64> {
        let mut z = pre_activation(w, u, b, x_t, h_prev);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        z
    };
    let f = gate(&p.w_f, &p.u_f, &p.b_f);
    let i = gate(&p.w_i, &p.u_i, &p.b_i);
    let o = gate(&p.w_o, &p.u_o, &p.b_o);

    let z_c = pre_activation(&p.w_c, &p.u_c, &p.b_c, x_t, h_prev);
    let (candidate, candidate_cache) = activate(act, z_c, p.alpha, &noise.substream(0))?;
    let candidate = candidate.into_data();

    let c: Vec<f64> = (0..p.hidden_dim)
        .map(|k| f[k] * c_prev[k] + i[k] * candidate[k])
        .collect();
    let (cell_act, cell_cache) = activate(act, c.clone(), p.alpha, &noise.substream(1))?;
    let cell_act = cell_act.into_data();
    let h: Vec<f64> = o.iter().zip(&cell_act).map(|(o, a)| o * a).collect();

    Ok(StepCache {
        x: x_t.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        f,
        i,
        o,
        candidate,
        cell_act,
        c,
        h,
        candidate_cache,
        cell_cache,
    })
}

/// Runs the sequence (rows of `sequence` are timesteps) from `h_0 = C_0 = 0`
/// and applies the head to `h_T`. Step `t` uses substream `t` of `noise`.
pub fn sequence_forward(
    p: &LstmParams,
    sequence: &Matrix,
    act: &ActivationKind,
    head: Head,
    noise: &Noise,
) -> Result<(Matrix, ForwardTrace)> {
    if sequence.cols() != p.input_dim {
        return Err(Error::DimensionMismatch {
            op: "sequence_forward",
            left: (sequence.rows(), p.input_dim),
            right: sequence.shape(),
        });
    }
    let n = p.hidden_dim;
    let mut steps = Vec::with_capacity(sequence.rows());
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    for t in 0..sequence.rows() {
        let step = cell_forward(p, sequence.row(t), &h, &c, act, &noise.substream(t as u64))?;
        h.clone_from(&step.h);
        c.clone_from(&step.c);
        steps.push(step);
    }
    let mut y = p.b_y.data().to_vec();
    p.w_y.gemv_acc(&h, &mut y);
    if head == Head::Classification {
        y.iter_mut().for_each(|v| *v = sigmoid(*v));
    }
    let prediction = Matrix::new(p.output_dim, 1, y)?;
    Ok((
        prediction.clone(),
        ForwardTrace {
            activation: *act,
            head,
            steps,
            prediction,
        },
    ))
}

/// Exact gradients of the loss for every parameter, given `dL/dprediction`,
/// with the sampled noise held fixed.
pub fn backward_bptt(
    p: &LstmParams,
    trace: &ForwardTrace,
    dl_dpred: &Matrix,
) -> Result<ParamGrads> {
    if trace.is_empty() {
        return Err(Error::Empty("forward trace"));
    }
    if dl_dpred.shape() != (p.output_dim, 1) || trace.prediction.shape() != (p.output_dim, 1) {
        return Err(Error::DimensionMismatch {
            op: "backward_bptt",
            left: (p.output_dim, 1),
            right: dl_dpred.shape(),
        });
    }
    let n = p.hidden_dim;
    for step in &trace.steps {
        let stochastic = trace.activation.is_stochastic();
        if step.h.len() != n
            || step.x.len() != p.input_dim
            || step.candidate_cache.kind != trace.activation
            || step.cell_cache.kind != trace.activation
            || step.candidate_cache.zbar.is_some() != stochastic
            || step.cell_cache.zbar.is_some() != stochastic
        {
            return Err(Error::UnsupportedKind(alloc::string::String::from(
                "trace caches do not match the parameters or activation",
            )));
        }
    }

    let mut g = p.zeros_like();

    // head
    let mut dy = dl_dpred.data().to_vec();
    if trace.head == Head::Classification {
        for (d, &prob) in dy.iter_mut().zip(trace.prediction.data()) {
            *d *= prob * (1.0 - prob);
        }
    }
    let h_last = trace.last_hidden();
    g.w_y.add_outer(&dy, h_last);
    g.b_y.data_mut().copy_from_slice(&dy);
    let mut dh = vec![0.0; n];
    p.w_y.gemv_t_acc(&dy, &mut dh);

    let mut dc_next = vec![0.0; n];
    let mut dz_f = vec![0.0; n];
    let mut dz_i = vec![0.0; n];
    let mut dz_c = vec![0.0; n];
    let mut dz_o = vec![0.0; n];
    let mut dalpha = 0.0;

    for step in trace.steps.iter().rev() {
        for k in 0..n {
            let o = step.o[k];
            let d_out = dh[k] * o;
            dz_o[k] = dh[k] * step.cell_act[k] * o * (1.0 - o);
            let dc = dc_next[k] + d_out * local_slope(&step.cell_cache, k);
            dalpha += d_out * local_alpha_slope(&step.cell_cache, k);

            let f = step.f[k];
            let i = step.i[k];
            dz_f[k] = dc * step.c_prev[k] * f * (1.0 - f);
            dz_i[k] = dc * step.candidate[k] * i * (1.0 - i);
            let d_cand = dc * i;
            dz_c[k] = d_cand * local_slope(&step.candidate_cache, k);
            dalpha += d_cand * local_alpha_slope(&step.candidate_cache, k);
            dc_next[k] = dc * f;
        }

        dh.iter_mut().for_each(|v| *v = 0.0);
        for (dz, u, gw, gu, gb) in [
            (&dz_f, &p.u_f, &mut g.w_f, &mut g.u_f, &mut g.b_f),
            (&dz_i, &p.u_i, &mut g.w_i, &mut g.u_i, &mut g.b_i),
            (&dz_c, &p.u_c, &mut g.w_c, &mut g.u_c, &mut g.b_c),
            (&dz_o, &p.u_o, &mut g.w_o, &mut g.u_o, &mut g.b_o),
        ] {
            gw.add_outer(dz, &step.x);
            gu.add_outer(dz, &step.h_prev);
            for (acc, d) in gb.data_mut().iter_mut().zip(dz.iter()) {
                *acc += d;
            }
            u.gemv_t_acc(dz, &mut dh);
        }
    }
    g.alpha = dalpha;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expected() -> Noise {
        Noise::Stream(RngStream::new(0, 0))
    }

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmParams::zeros(3, 2, 1);
        for act in [
            ActivationKind::Relu,
            ActivationKind::leaky_relu(),
            ActivationKind::Prelu,
            ActivationKind::Tanh,
            ActivationKind::Gelu,
            ActivationKind::brownian(100),
        ] {
            let step = cell_forward(
                &p,
                &[0.3, -1.0, 2.0],
                &[0.0; 2],
                &[0.0; 2],
                &act,
                &expected(),
            )
            .unwrap();
            assert_eq!(step.f, vec![0.5, 0.5]);
            assert_eq!(step.i, vec![0.5, 0.5]);
            assert_eq!(step.o, vec![0.5, 0.5]);
            assert_eq!(step.c, vec![0.0, 0.0]);
            assert_eq!(step.h, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn zero_params_relu_scalar_cell() {
        let p = LstmParams::zeros(1, 1, 1);
        let step = cell_forward(
            &p,
            &[5.0],
            &[0.0],
            &[2.0],
            &ActivationKind::Relu,
            &expected(),
        )
        .unwrap();
        assert_eq!(step.c, vec![1.0]);
        assert_eq!(step.h, vec![0.5]);
    }

    #[test]
    fn zero_params_heads() {
        let p = LstmParams::zeros(2, 4, 1);
        let seq = Matrix::from_fn(5, 2, |r, c| (r + c) as f64 * 0.1);
        let (y, trace) = sequence_forward(
            &p,
            &seq,
            &ActivationKind::Tanh,
            Head::Regression,
            &expected(),
        )
        .unwrap();
        assert_eq!(y.data(), &[0.0]);
        assert_eq!(trace.len(), 5);
        assert_eq!(trace.steps[0].h.len(), 4);
        let (y, _) = sequence_forward(
            &p,
            &seq,
            &ActivationKind::Tanh,
            Head::Classification,
            &expected(),
        )
        .unwrap();
        assert_eq!(y.data(), &[0.5]);
    }

    #[test]
    fn single_step_is_cell_plus_head() {
        let p = init_params(2, 3, 1, 11).unwrap();
        let seq = Matrix::from_rows(&[&[0.4, -0.2]]).unwrap();
        let act = ActivationKind::Gelu;
        let (y, _) = sequence_forward(&p, &seq, &act, Head::Regression, &expected()).unwrap();
        let step = cell_forward(
            &p,
            &[0.4, -0.2],
            &[0.0; 3],
            &[0.0; 3],
            &act,
            &expected().substream(0),
        )
        .unwrap();
        let mut manual = p.b_y.data()[0];
        for k in 0..3 {
            manual += p.w_y.get(0, k) * step.h[k];
        }
        assert_eq!(y.data()[0], manual);
    }

    #[test]
    fn shape_errors() {
        let p = LstmParams::zeros(2, 3, 1);
        assert!(cell_forward(
            &p,
            &[1.0],
            &[0.0; 3],
            &[0.0; 3],
            &ActivationKind::Relu,
            &expected()
        )
        .is_err());
        assert!(cell_forward(
            &p,
            &[1.0, 2.0],
            &[0.0; 2],
            &[0.0; 3],
            &ActivationKind::Relu,
            &expected()
        )
        .is_err());
        assert!(sequence_forward(
            &p,
            &Matrix::zeros(4, 3),
            &ActivationKind::Relu,
            Head::Regression,
            &expected()
        )
        .is_err());
    }

    #[test]
    fn init_is_seeded_and_structured() {
        let a = init_params(4, 6, 1, 123).unwrap();
        assert_eq!(a, init_params(4, 6, 1, 123).unwrap());
        assert_ne!(a, init_params(4, 6, 1, 124).unwrap());
        assert!(a.b_f.data().iter().all(|&v| v == 1.0));
        for b in [&a.b_i, &a.b_c, &a.b_o, &a.b_y] {
            assert!(b.data().iter().all(|&v| v == 0.0));
        }
        assert_eq!(a.alpha, 0.25);
        a.validate().unwrap();
        assert!(init_params(0, 1, 1, 0).is_err());
    }

    #[test]
    fn init_variance_matches_xavier() {
        let p = init_params(100, 100, 1, 5).unwrap();
        let d = p.u_c.data();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (d.len() as f64 - 1.0);
        // Uniform(-l, l) has variance l^2 / 3 = 2 / (fan_in + fan_out)
        let expected = 2.0 / 200.0;
        assert!((var / expected - 1.0).abs() < 0.15, "var {var}");
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let p = init_params(2, 3, 1, 1).unwrap();
        let seq = Matrix::from_fn(4, 2, |r, c| 0.3 * r as f64 - 0.2 * c as f64);
        let act = ActivationKind::brownian(10);
        let (_, trace) = sequence_forward(&p, &seq, &act, Head::Regression, &expected()).unwrap();
        let g = backward_bptt(&p, &trace, &Matrix::zeros(1, 1)).unwrap();
        assert_eq!(g.sq_norm(), 0.0);
    }

    #[test]
    fn backward_rejects_mismatched_trace() {
        let p = init_params(2, 3, 1, 1).unwrap();
        let seq = Matrix::from_fn(3, 2, |r, _| r as f64);
        let (_, mut trace) = sequence_forward(
            &p,
            &seq,
            &ActivationKind::brownian(4),
            Head::Regression,
            &expected(),
        )
        .unwrap();
        trace.steps[1].cell_cache.zbar = None;
        assert!(backward_bptt(&p, &trace, &Matrix::column(&[1.0])).is_err());
        trace.steps.clear();
        assert!(backward_bptt(&p, &trace, &Matrix::column(&[1.0])).is_err());
    }
}
