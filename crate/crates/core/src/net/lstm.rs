//! LSTM layer: forward recurrence and exact backpropagation through time.
//!
//! Cell equations (peephole-free):
//!   i = σ(Wxi·x + Whi·h₋ + bi)      input gate
//!   f = σ(Wxf·x + Whf·h₋ + bf)      forget gate
//!   g = tanh(Wxg·x + Whg·h₋ + bg)   cell candidate
//!   o = σ(Wxo·x + Who·h₋ + bo)      output gate
//!   c = f⊙c₋ + i⊙g
//!   h = o⊙tanh(c)

use super::{backprop_gate, check_activations, sigmoid, GateParams};

/// All LSTM weights: one (Wx, Wh, b) triple per gate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    /// Input gate.
    pub i: GateParams,
    /// Forget gate.
    pub f: GateParams,
    /// Cell candidate.
    pub g: GateParams,
    /// Output gate.
    pub o: GateParams,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let gate = || GateParams::zeros(hidden_size, input_size);
        Self {
            input_size,
            hidden_size,
            i: gate(),
            f: gate(),
            g: gate(),
            o: gate(),
        }
    }

    /// Flat views of all 12 tensors, fixed order: gates i, f, g, o, each as
    /// (Wx, Wh, b). Optimizer, checkpoint, and gradient checker all rely on
    /// this order being stable.
    pub fn tensors(&self) -> Vec<&[f64]> {
        [&self.i, &self.f, &self.g, &self.o]
            .into_iter()
            .flat_map(GateParams::tensors)
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        [&mut self.i, &mut self.f, &mut self.g, &mut self.o]
            .into_iter()
            .flat_map(GateParams::tensors_mut)
            .collect()
    }
}

/// Everything backward needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    pub steps: Vec<LstmStepCache>,
}

/// Runs the recurrence over a `T×input_size` sequence from initial state
/// `(h0, c0)`. Returns the `T×hidden_size` hidden states and the cache for
/// [`lstm_backward`]. Panics on shape mismatch.
pub fn lstm_forward(
    params: &LstmParams,
    sequence: &[Vec<f64>],
    h0: &[f64],
    c0: &[f64],
) -> (Vec<Vec<f64>>, LstmCache) {
    let n = params.hidden_size;
    assert_eq!(
        h0.len(),
        n,
        "lstm_forward: h0 length must equal hidden_size"
    );
    assert_eq!(
        c0.len(),
        n,
        "lstm_forward: c0 length must equal hidden_size"
    );

    let mut h = h0.to_vec();
    let mut c = c0.to_vec();
    let mut hidden = Vec::with_capacity(sequence.len());
    let mut steps = Vec::with_capacity(sequence.len());

    for x in sequence {
        assert_eq!(
            x.len(),
            params.input_size,
            "lstm_forward: input width mismatch"
        );
        let i: Vec<f64> = params
            .i
            .preactivation(x, &h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let f: Vec<f64> = params
            .f
            .preactivation(x, &h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let g: Vec<f64> = params
            .g
            .preactivation(x, &h)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let o: Vec<f64> = params
            .o
            .preactivation(x, &h)
            .into_iter()
            .map(sigmoid)
            .collect();
        check_activations(&[&i, &f, &o], &[&g]);

        let c_next: Vec<f64> = (0..n).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
        let tanh_c: Vec<f64> = c_next.iter().map(|v| v.tanh()).collect();
        let h_next: Vec<f64> = (0..n).map(|j| o[j] * tanh_c[j]).collect();

        steps.push(LstmStepCache {
            x: x.clone(),
            h_prev: std::mem::replace(&mut h, h_next.clone()),
            c_prev: std::mem::replace(&mut c, c_next),
            i,
            f,
            g,
            o,
            tanh_c,
        });
        hidden.push(h_next);
    }
    (hidden, LstmCache { steps })
}

/// Backpropagation through time. `d_hidden[t]` is ∂loss/∂h_t for every step.
/// Returns gradients shaped like the parameters plus ∂loss/∂x_t per step.
/// Panics if `d_hidden` does not match the cached forward pass.
pub fn lstm_backward(
    params: &LstmParams,
    cache: &LstmCache,
    d_hidden: &[Vec<f64>],
) -> (LstmParams, Vec<Vec<f64>>) {
    let t_len = cache.steps.len();
    assert_eq!(
        d_hidden.len(),
        t_len,
        "lstm_backward: upstream must cover every step"
    );
    let n = params.hidden_size;

    let mut grads = LstmParams::zeros(params.input_size, n);
    let mut dx_all = vec![vec![0.0; params.input_size]; t_len];
    let mut dh_rec = vec![0.0; n]; // flows from step t+1 through the recurrence
    let mut dc_next = vec![0.0; n];

    for t in (0..t_len).rev() {
        let s = &cache.steps[t];
        assert_eq!(
            d_hidden[t].len(),
            n,
            "lstm_backward: upstream width mismatch"
        );

        let mut da_i = vec![0.0; n];
        let mut da_f = vec![0.0; n];
        let mut da_g = vec![0.0; n];
        let mut da_o = vec![0.0; n];
        let mut dc_prev = vec![0.0; n];
        for j in 0..n {
            let dh = d_hidden[t][j] + dh_rec[j];
            // h = o⊙tanh(c): split into the gate path and the cell path,
            // the latter joined by the cell gradient arriving from step t+1.
            let d_o = dh * s.tanh_c[j];
            let dc = dh * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + dc_next[j];
            // c = f⊙c₋ + i⊙g
            let d_i = dc * s.g[j];
            let d_f = dc * s.c_prev[j];
            let d_g = dc * s.i[j];
            da_i[j] = d_i * s.i[j] * (1.0 - s.i[j]);
            da_f[j] = d_f * s.f[j] * (1.0 - s.f[j]);
            da_g[j] = d_g * (1.0 - s.g[j] * s.g[j]);
            da_o[j] = d_o * s.o[j] * (1.0 - s.o[j]);
            dc_prev[j] = dc * s.f[j];
        }

        let mut dh_prev = vec![0.0; n];
        let dx = &mut dx_all[t];
        backprop_gate(
            &params.i,
            &mut grads.i,
            &da_i,
            &s.x,
            &s.h_prev,
            dx,
            &mut dh_prev,
        );
        backprop_gate(
            &params.f,
            &mut grads.f,
            &da_f,
            &s.x,
            &s.h_prev,
            dx,
            &mut dh_prev,
        );
        backprop_gate(
            &params.g,
            &mut grads.g,
            &da_g,
            &s.x,
            &s.h_prev,
            dx,
            &mut dh_prev,
        );
        backprop_gate(
            &params.o,
            &mut grads.o,
            &da_o,
            &s.x,
            &s.h_prev,
            dx,
            &mut dh_prev,
        );

        dh_rec = dh_prev;
        dc_next = dc_prev;
    }
    (grads, dx_all)
}
