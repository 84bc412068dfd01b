//! From-scratch recurrent network: an LSTM layer feeding a GRU layer, dropout
//! on the final GRU state, and a scalar dense head — with exact BPTT
//! gradients and a finite-difference gradient checker.

pub mod checkpoint;
pub mod dropout;
pub mod gru;
pub mod lstm;
pub mod mat;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use dropout::{dropout_forward, DropoutMode};
pub use gru::{gru_backward, gru_forward, GruCache, GruParams};
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmParams};
pub use mat::Mat;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng::{self, tag};

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// |a−n| / max(|a|, |n|, 1e−8) — the gradient checker's comparison metric.
/// The floor keeps the ratio finite when both gradients vanish.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Debug-build sanity check: sigmoid outputs in [0,1], tanh in [−1,1].
#[allow(unused_variables)]
pub(super) fn check_activations(sigmoids: &[&[f64]], tanhs: &[&[f64]]) {
    #[cfg(debug_assertions)]
    {
        for gate in sigmoids {
            for &v in *gate {
                debug_assert!(
                    v.is_finite() && (0.0..=1.0).contains(&v),
                    "sigmoid out of range: {v}"
                );
            }
        }
        for gate in tanhs {
            for &v in *gate {
                debug_assert!(
                    v.is_finite() && (-1.0..=1.0).contains(&v),
                    "tanh out of range: {v}"
                );
            }
        }
    }
}

/// One gate's weights: input matrix, recurrent matrix, bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub wx: Mat,
    pub wh: Mat,
    pub b: Vec<f64>,
}

impl GateParams {
    pub fn zeros(hidden_size: usize, input_size: usize) -> Self {
        Self {
            wx: Mat::zeros(hidden_size, input_size),
            wh: Mat::zeros(hidden_size, hidden_size),
            b: vec![0.0; hidden_size],
        }
    }

    /// Wx·x + Wh·h₋ + b.
    pub fn preactivation(&self, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let mut a = self.b.clone();
        self.wx.matvec_add(x, &mut a);
        self.wh.matvec_add(h_prev, &mut a);
        a
    }

    pub fn tensors(&self) -> [&[f64]; 3] {
        [self.wx.as_slice(), self.wh.as_slice(), &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [self.wx.as_mut_slice(), self.wh.as_mut_slice(), &mut self.b]
    }
}

/// Standard gate backprop: accumulate parameter gradients from the
/// preactivation gradient `da`, and push `da` back into dx and dh_prev.
pub(super) fn backprop_gate(
    params: &GateParams,
    grads: &mut GateParams,
    da: &[f64],
    x: &[f64],
    h_prev: &[f64],
    dx: &mut [f64],
    dh_prev: &mut [f64],
) {
    grads.wx.add_outer(da, x);
    grads.wh.add_outer(da, h_prev);
    for (b, d) in grads.b.iter_mut().zip(da) {
        *b += d;
    }
    params.wx.matvec_transpose_add(da, dx);
    params.wh.matvec_transpose_add(da, dh_prev);
}

/// Layer widths and the dropout rate. The defaults are the trained model's
/// architecture: 10 input features → LSTM(64) → GRU(32) → dropout 0.2 → 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkShape {
    pub input_size: usize,
    pub lstm_hidden: usize,
    pub gru_hidden: usize,
    pub dropout_rate: f64,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self {
            input_size: 10,
            lstm_hidden: 64,
            gru_hidden: 32,
            dropout_rate: 0.2,
        }
    }
}

/// The scalar regression head: prediction = w·h + b.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Vec<f64>,
    pub b: f64,
}

impl DenseParams {
    pub fn zeros(input_size: usize) -> Self {
        Self {
            w: vec![0.0; input_size],
            b: 0.0,
        }
    }

    pub fn tensors(&self) -> [&[f64]; 2] {
        [&self.w, std::slice::from_ref(&self.b)]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.w, std::slice::from_mut(&mut self.b)]
    }
}

/// Every trainable weight in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub shape: NetworkShape,
    pub lstm: LstmParams,
    pub gru: GruParams,
    pub head: DenseParams,
}

/// Gradients, shape-for-shape with [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGradients {
    pub lstm: LstmParams,
    pub gru: GruParams,
    pub head: DenseParams,
}

impl NetworkParams {
    pub fn zeros(shape: NetworkShape) -> Self {
        Self {
            shape,
            lstm: LstmParams::zeros(shape.input_size, shape.lstm_hidden),
            gru: GruParams::zeros(shape.lstm_hidden, shape.gru_hidden),
            head: DenseParams::zeros(shape.gru_hidden),
        }
    }

    /// All 23 tensors in canonical order: LSTM gates i,f,g,o then GRU gates
    /// z,r,n (each Wx, Wh, b), then head weights and bias. The optimizer,
    /// checkpoint format, and gradient checker index into this order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.lstm.tensors();
        t.extend(self.gru.tensors());
        t.extend(self.head.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.lstm.tensors_mut();
        t.extend(self.gru.tensors_mut());
        t.extend(self.head.tensors_mut());
        t
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl NetworkGradients {
    pub fn zeros(shape: NetworkShape) -> Self {
        Self {
            lstm: LstmParams::zeros(shape.input_size, shape.lstm_hidden),
            gru: GruParams::zeros(shape.lstm_hidden, shape.gru_hidden),
            head: DenseParams::zeros(shape.gru_hidden),
        }
    }

    /// Same canonical order as [`NetworkParams::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.lstm.tensors();
        t.extend(self.gru.tensors());
        t.extend(self.head.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.lstm.tensors_mut();
        t.extend(self.gru.tensors_mut());
        t.extend(self.head.tensors_mut());
        t
    }

    /// self += other, tensor by tensor (batch gradient accumulation).
    pub fn add_assign(&mut self, other: &NetworkGradients) {
        for (mine, theirs) in self.tensors_mut().into_iter().zip(other.tensors()) {
            assert_eq!(mine.len(), theirs.len(), "gradient shapes must match");
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
    }
}

/// Glorot-uniform initialization: every weight matrix is drawn from
/// ±√(6/(fan_in+fan_out)); biases are zero except the LSTM forget gate's,
/// which starts at 1.0 so early training does not erase the cell state.
/// Deterministic given `seed`. Panics on zero sizes or dropout_rate ∉ [0,1).
pub fn init_params(seed: u64, shape: NetworkShape) -> NetworkParams {
    assert!(
        shape.input_size > 0 && shape.lstm_hidden > 0 && shape.gru_hidden > 0,
        "layer sizes must be positive"
    );
    assert!(
        (0.0..1.0).contains(&shape.dropout_rate),
        "dropout rate must lie in [0, 1), got {}",
        shape.dropout_rate
    );

    let mut stream = rng::stream(seed, &[tag::INIT]);
    let mut glorot = |m: &mut Mat, fan_in: usize, fan_out: usize| {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in m.as_mut_slice() {
            *v = stream.random_range(-bound..bound);
        }
    };

    let mut params = NetworkParams::zeros(shape);
    for gate in [
        &mut params.lstm.i,
        &mut params.lstm.f,
        &mut params.lstm.g,
        &mut params.lstm.o,
    ] {
        glorot(&mut gate.wx, shape.input_size, shape.lstm_hidden);
        glorot(&mut gate.wh, shape.lstm_hidden, shape.lstm_hidden);
    }
    for gate in [&mut params.gru.z, &mut params.gru.r, &mut params.gru.n] {
        glorot(&mut gate.wx, shape.lstm_hidden, shape.gru_hidden);
        glorot(&mut gate.wh, shape.gru_hidden, shape.gru_hidden);
    }
    let mut head_w = Mat::from_vec(1, shape.gru_hidden, params.head.w.clone());
    glorot(&mut head_w, shape.gru_hidden, 1);
    params.head.w = head_w.as_slice().to_vec();
    params.lstm.f.b.fill(1.0);
    params
}

/// Whether a forward pass samples a dropout mask (training) or runs the
/// deterministic identity path (evaluation).
pub enum Mode<'a> {
    Train { dropout_rng: &'a mut ChaCha8Rng },
    Eval,
}

/// Everything a backward pass needs from one network forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub lstm: LstmCache,
    pub lstm_hidden: Vec<Vec<f64>>,
    pub gru: GruCache,
    /// Final GRU hidden state, before dropout.
    pub gru_last: Vec<f64>,
    pub dropout_mask: Vec<f64>,
    /// gru_last ⊙ dropout_mask — what the head actually saw.
    pub head_input: Vec<f64>,
}

/// Full forward pass over one sequence: LSTM → GRU → dropout on the final
/// GRU state → dense head → scalar prediction. Eval mode is a pure function
/// of (params, sequence). Panics on shape mismatch or an empty sequence.
pub fn network_forward(
    params: &NetworkParams,
    sequence: &[Vec<f64>],
    mode: Mode,
) -> (f64, ForwardCache) {
    let shape = params.shape;
    assert!(
        !sequence.is_empty(),
        "network_forward: sequence must be nonempty"
    );

    let (lstm_hidden, lstm_cache) = lstm_forward(
        &params.lstm,
        sequence,
        &vec![0.0; shape.lstm_hidden],
        &vec![0.0; shape.lstm_hidden],
    );
    let (gru_hidden, gru_cache) =
        gru_forward(&params.gru, &lstm_hidden, &vec![0.0; shape.gru_hidden]);
    let gru_last = gru_hidden.last().expect("nonempty sequence").clone();

    let dropout_mode = match mode {
        Mode::Train { dropout_rng } => DropoutMode::Train(dropout_rng),
        Mode::Eval => DropoutMode::Eval,
    };
    let (head_input, dropout_mask) = dropout_forward(&gru_last, shape.dropout_rate, dropout_mode);

    let prediction = params.head.b
        + params
            .head
            .w
            .iter()
            .zip(&head_input)
            .map(|(w, h)| w * h)
            .sum::<f64>();

    (
        prediction,
        ForwardCache {
            lstm: lstm_cache,
            lstm_hidden,
            gru: gru_cache,
            gru_last,
            dropout_mask,
            head_input,
        },
    )
}

/// Exact gradients of the loss with respect to every parameter, given
/// d_loss/d_prediction: head → dropout mask → GRU BPTT → LSTM BPTT.
pub fn network_backward(
    params: &NetworkParams,
    cache: &ForwardCache,
    d_prediction: f64,
) -> NetworkGradients {
    let shape = params.shape;
    let mut grads = NetworkGradients::zeros(shape);

    // Head: prediction = w·head_input + b.
    for (gw, h) in grads.head.w.iter_mut().zip(&cache.head_input) {
        *gw = d_prediction * h;
    }
    grads.head.b = d_prediction;

    // Through the dropout mask into the final GRU hidden state.
    let d_gru_last: Vec<f64> = params
        .head
        .w
        .iter()
        .zip(&cache.dropout_mask)
        .map(|(w, m)| d_prediction * w * m)
        .collect();

    // Only the last GRU step feeds the head; earlier steps get zero upstream.
    let t_len = cache.gru.steps.len();
    let mut d_gru_hidden = vec![vec![0.0; shape.gru_hidden]; t_len];
    d_gru_hidden[t_len - 1] = d_gru_last;

    let (gru_grads, d_lstm_hidden) = gru_backward(&params.gru, &cache.gru, &d_gru_hidden);
    grads.gru = gru_grads;

    let (lstm_grads, _d_inputs) = lstm_backward(&params.lstm, &cache.lstm, &d_lstm_hidden);
    grads.lstm = lstm_grads;

    grads
}

/// Squared error of the eval-mode prediction — the loss the checker probes.
fn squared_error(params: &NetworkParams, sequence: &[Vec<f64>], target: f64) -> f64 {
    let (prediction, _) = network_forward(params, sequence, Mode::Eval);
    (prediction - target) * (prediction - target)
}

/// Compares analytic gradients of the squared-error loss against central
/// finite differences, parameter by parameter, in eval mode (dropout off so
/// the loss is deterministic). Returns the maximum [`relative_error`].
pub fn gradient_check(
    params: &NetworkParams,
    sequence: &[Vec<f64>],
    target: f64,
    epsilon: f64,
) -> f64 {
    let (prediction, cache) = network_forward(params, sequence, Mode::Eval);
    let grads = network_backward(params, &cache, 2.0 * (prediction - target));
    gradient_check_against(params, sequence, target, epsilon, &grads)
}

/// The numeric half of [`gradient_check`], checking a caller-supplied
/// gradient set. Lets tests verify that a corrupted gradient (say, one gate
/// zeroed) is loudly detected.
pub fn gradient_check_against(
    params: &NetworkParams,
    sequence: &[Vec<f64>],
    target: f64,
    epsilon: f64,
    grads: &NetworkGradients,
) -> f64 {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut work = params.clone();
    let mut max_err: f64 = 0.0;

    for (ti, tensor) in analytic.iter().enumerate() {
        for (k, &a) in tensor.iter().enumerate() {
            let orig = work.tensors()[ti][k];
            work.tensors_mut()[ti][k] = orig + epsilon;
            let loss_plus = squared_error(&work, sequence, target);
            work.tensors_mut()[ti][k] = orig - epsilon;
            let loss_minus = squared_error(&work, sequence, target);
            work.tensors_mut()[ti][k] = orig;
            let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
            max_err = max_err.max(relative_error(a, numeric));
        }
    }
    max_err
}
