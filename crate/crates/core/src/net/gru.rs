//! GRU layer: forward recurrence and exact backpropagation through time.
//!
//! Cell equations (reset gate applied inside the recurrent term):
//!   z = σ(Wxz·x + Whz·h₋ + bz)          update gate
//!   r = σ(Wxr·x + Whr·h₋ + br)          reset gate
//!   n = tanh(Wxn·x + r⊙(Whn·h₋) + bn)   candidate
//!   h = (1−z)⊙n + z⊙h₋

use super::{backprop_gate, check_activations, sigmoid, GateParams};

/// All GRU weights: one (Wx, Wh, b) triple per gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub input_size: usize,
    pub hidden_size: usize,
    /// Update gate.
    pub z: GateParams,
    /// Reset gate.
    pub r: GateParams,
    /// Candidate.
    pub n: GateParams,
}

impl GruParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let gate = || GateParams::zeros(hidden_size, input_size);
        Self {
            input_size,
            hidden_size,
            z: gate(),
            r: gate(),
            n: gate(),
        }
    }

    /// Flat views of all 9 tensors, fixed order: gates z, r, n, each as
    /// (Wx, Wh, b). Must stay stable; see [`super::lstm::LstmParams::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        [&self.z, &self.r, &self.n]
            .into_iter()
            .flat_map(GateParams::tensors)
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        [&mut self.z, &mut self.r, &mut self.n]
            .into_iter()
            .flat_map(GateParams::tensors_mut)
            .collect()
    }
}

/// Everything backward needs from one forward step. `q` caches Whn·h₋, the
/// recurrent half of the candidate before the reset gate touches it.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    pub steps: Vec<GruStepCache>,
}

/// Runs the recurrence over a `T×input_size` sequence from initial state
/// `h0`. Returns the `T×hidden_size` hidden states and the cache for
/// [`gru_backward`]. Panics on shape mismatch.
pub fn gru_forward(
    params: &GruParams,
    sequence: &[Vec<f64>],
    h0: &[f64],
) -> (Vec<Vec<f64>>, GruCache) {
    let n_units = params.hidden_size;
    assert_eq!(
        h0.len(),
        n_units,
        "gru_forward: h0 length must equal hidden_size"
    );

    let mut h = h0.to_vec();
    let mut hidden = Vec::with_capacity(sequence.len());
    let mut steps = Vec::with_capacity(sequence.len());

    for x in sequence {
        assert_eq!(
            x.len(),
            params.input_size,
            "gru_forward: input width mismatch"
        );
        let z: Vec<f64> = params
            .z
            .preactivation(x, &h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<f64> = params
            .r
            .preactivation(x, &h)
            .into_iter()
            .map(sigmoid)
            .collect();

        let mut q = vec![0.0; n_units];
        params.n.wh.matvec_add(&h, &mut q);
        let mut a_n = params.n.b.clone();
        params.n.wx.matvec_add(x, &mut a_n);
        let n: Vec<f64> = (0..n_units)
            .map(|j| (a_n[j] + r[j] * q[j]).tanh())
            .collect();
        check_activations(&[&z, &r], &[&n]);

        let h_next: Vec<f64> = (0..n_units)
            .map(|j| (1.0 - z[j]) * n[j] + z[j] * h[j])
            .collect();

        steps.push(GruStepCache {
            x: x.clone(),
            h_prev: std::mem::replace(&mut h, h_next.clone()),
            z,
            r,
            n,
            q,
        });
        hidden.push(h_next);
    }
    (hidden, GruCache { steps })
}

/// Backpropagation through time. `d_hidden[t]` is ∂loss/∂h_t for every step.
/// Returns gradients shaped like the parameters plus ∂loss/∂x_t per step.
/// Panics if `d_hidden` does not match the cached forward pass.
pub fn gru_backward(
    params: &GruParams,
    cache: &GruCache,
    d_hidden: &[Vec<f64>],
) -> (GruParams, Vec<Vec<f64>>) {
    let t_len = cache.steps.len();
    assert_eq!(
        d_hidden.len(),
        t_len,
        "gru_backward: upstream must cover every step"
    );
    let n_units = params.hidden_size;

    let mut grads = GruParams::zeros(params.input_size, n_units);
    let mut dx_all = vec![vec![0.0; params.input_size]; t_len];
    let mut dh_rec = vec![0.0; n_units];

    for t in (0..t_len).rev() {
        let s = &cache.steps[t];
        assert_eq!(
            d_hidden[t].len(),
            n_units,
            "gru_backward: upstream width mismatch"
        );

        let mut da_z = vec![0.0; n_units];
        let mut da_r = vec![0.0; n_units];
        let mut da_n = vec![0.0; n_units];
        let mut dq = vec![0.0; n_units];
        // h = (1−z)⊙n + z⊙h₋: the direct h₋ path seeds dh_prev, the rest
        // arrives below through the three gates' recurrent weights.
        let mut dh_prev = vec![0.0; n_units];
        for j in 0..n_units {
            let dh = d_hidden[t][j] + dh_rec[j];
            let d_z = dh * (s.h_prev[j] - s.n[j]);
            let d_n = dh * (1.0 - s.z[j]);
            da_z[j] = d_z * s.z[j] * (1.0 - s.z[j]);
            da_n[j] = d_n * (1.0 - s.n[j] * s.n[j]);
            dq[j] = da_n[j] * s.r[j];
            let d_r = da_n[j] * s.q[j];
            da_r[j] = d_r * s.r[j] * (1.0 - s.r[j]);
            dh_prev[j] = dh * s.z[j];
        }

        let dx = &mut dx_all[t];
        backprop_gate(
            &params.z,
            &mut grads.z,
            &da_z,
            &s.x,
            &s.h_prev,
            dx,
            &mut dh_prev,
        );
        backprop_gate(
            &params.r,
            &mut grads.r,
            &da_r,
            &s.x,
            &s.h_prev,
            dx,
            &mut dh_prev,
        );
        // Candidate gate: Wxn and bn see da_n, but Whn sits behind the reset
        // gate, so its gradient (and the h₋ path through it) uses dq instead.
        grads.n.wx.add_outer(&da_n, &s.x);
        grads.n.wh.add_outer(&dq, &s.h_prev);
        for (b, d) in grads.n.b.iter_mut().zip(&da_n) {
            *b += d;
        }
        params.n.wx.matvec_transpose_add(&da_n, dx);
        params.n.wh.matvec_transpose_add(&dq, &mut dh_prev);

        dh_rec = dh_prev;
    }
    (grads, dx_all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::relative_error;
    use crate::rng;
    use rand::Rng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn randomized(input: usize, hidden: usize, seed: u64) -> GruParams {
        let mut params = GruParams::zeros(input, hidden);
        let mut r = rng::stream(seed, &[23]);
        for tensor in params.tensors_mut() {
            for v in tensor.iter_mut() {
                *v = r.random_range(-0.8..0.8);
            }
        }
        params
    }

    fn random_rows(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, &[24]);
        (0..rows)
            .map(|_| (0..cols).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn zero_params_halve_hidden_state_each_step() {
        // z = σ(0) = 0.5 and n = tanh(0) = 0, so h_t = 0.5·h_{t−1}.
        let params = GruParams::zeros(2, 3);
        let h0 = [0.9, -1.3, 0.4];
        let seq = random_rows(4, 2, 8);
        let (hidden, _) = gru_forward(&params, &seq, &h0);
        for (t, h) in hidden.iter().enumerate() {
            let scale = 0.5_f64.powi(t as i32 + 1);
            for j in 0..3 {
                assert!((h[j] - scale * h0[j]).abs() < 1e-12, "step {t}, unit {j}");
            }
        }
    }

    #[test]
    fn zero_params_zero_state_stays_zero() {
        let params = GruParams::zeros(2, 3);
        let seq = random_rows(4, 2, 8);
        let (hidden, _) = gru_forward(&params, &seq, &[0.0; 3]);
        assert!(hidden.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_scalar_unrolled_two_steps() {
        let params = randomized(1, 1, 33);
        let p = |g: &GateParams| (g.wx.get(0, 0), g.wh.get(0, 0), g.b[0]);
        let (wxz, whz, bz) = p(&params.z);
        let (wxr, whr, br) = p(&params.r);
        let (wxn, whn, bn) = p(&params.n);
        let (x1, x2, h0) = (-0.45, 0.72, 0.31);

        let z1 = sig(wxz * x1 + whz * h0 + bz);
        let r1 = sig(wxr * x1 + whr * h0 + br);
        let n1 = (wxn * x1 + r1 * (whn * h0) + bn).tanh();
        let h1 = (1.0 - z1) * n1 + z1 * h0;
        let z2 = sig(wxz * x2 + whz * h1 + bz);
        let r2 = sig(wxr * x2 + whr * h1 + br);
        let n2 = (wxn * x2 + r2 * (whn * h1) + bn).tanh();
        let h2 = (1.0 - z2) * n2 + z2 * h1;

        let (hidden, _) = gru_forward(&params, &[vec![x1], vec![x2]], &[h0]);
        assert!((hidden[0][0] - h1).abs() < 1e-12);
        assert!((hidden[1][0] - h2).abs() < 1e-12);
    }

    #[test]
    fn backward_zero_upstream_gives_zero_gradients() {
        let params = randomized(3, 4, 43);
        let seq = random_rows(5, 3, 44);
        let (_, cache) = gru_forward(&params, &seq, &[0.0; 4]);
        let (grads, dx) = gru_backward(&params, &cache, &vec![vec![0.0; 4]; 5]);
        for tensor in grads.tensors() {
            assert!(tensor.iter().all(|&v| v == 0.0));
        }
        assert!(dx.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_symbolic_derivative_one_step() {
        let params = randomized(1, 1, 53);
        let p = |g: &GateParams| (g.wx.get(0, 0), g.wh.get(0, 0), g.b[0]);
        let (wxz, whz, bz) = p(&params.z);
        let (wxr, whr, br) = p(&params.r);
        let (wxn, whn, bn) = p(&params.n);
        let (x, h0, upstream) = (0.58, -0.36, -1.3);

        let z = sig(wxz * x + whz * h0 + bz);
        let r = sig(wxr * x + whr * h0 + br);
        let q = whn * h0;
        let n = (wxn * x + r * q + bn).tanh();

        let d_z = upstream * (h0 - n);
        let d_n = upstream * (1.0 - z);
        let da_z = d_z * z * (1.0 - z);
        let da_n = d_n * (1.0 - n * n);
        let d_q = da_n * r;
        let da_r = da_n * q * r * (1.0 - r);
        let want_dx = wxz * da_z + wxr * da_r + wxn * da_n;

        let (_, cache) = gru_forward(&params, &[vec![x]], &[h0]);
        let (grads, dx) = gru_backward(&params, &cache, &[vec![upstream]]);

        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(grads.z.wx.get(0, 0), da_z * x));
        assert!(close(grads.z.wh.get(0, 0), da_z * h0));
        assert!(close(grads.z.b[0], da_z));
        assert!(close(grads.r.wx.get(0, 0), da_r * x));
        assert!(close(grads.r.wh.get(0, 0), da_r * h0));
        assert!(close(grads.r.b[0], da_r));
        assert!(close(grads.n.wx.get(0, 0), da_n * x));
        // Whn sits behind the reset gate: its gradient is dq·h₋, not da_n·h₋.
        assert!(close(grads.n.wh.get(0, 0), d_q * h0));
        assert!(close(grads.n.b[0], da_n));
        assert!(close(dx[0][0], want_dx));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (input, hidden, t_len) = (3, 4, 5);
        let params = randomized(input, hidden, 63);
        let seq = random_rows(t_len, input, 64);
        let upstream = random_rows(t_len, hidden, 65);
        let eps = 1e-5;

        let loss = |params: &GruParams, seq: &[Vec<f64>]| -> f64 {
            let (hidden_states, _) = gru_forward(params, seq, &vec![0.0; hidden]);
            hidden_states
                .iter()
                .zip(&upstream)
                .flat_map(|(h, u)| h.iter().zip(u).map(|(a, b)| a * b))
                .sum()
        };

        let (_, cache) = gru_forward(&params, &seq, &vec![0.0; hidden]);
        let (grads, dx) = gru_backward(&params, &cache, &upstream);
        let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

        let mut max_err: f64 = 0.0;
        let mut work = params.clone();
        for (ti, tensor) in analytic.iter().enumerate() {
            for (k, &a) in tensor.iter().enumerate() {
                let orig = work.tensors()[ti][k];
                work.tensors_mut()[ti][k] = orig + eps;
                let lp = loss(&work, &seq);
                work.tensors_mut()[ti][k] = orig - eps;
                let lm = loss(&work, &seq);
                work.tensors_mut()[ti][k] = orig;
                max_err = max_err.max(relative_error(a, (lp - lm) / (2.0 * eps)));
            }
        }
        let mut seq_work = seq.clone();
        for t in 0..t_len {
            for k in 0..input {
                let orig = seq_work[t][k];
                seq_work[t][k] = orig + eps;
                let lp = loss(&params, &seq_work);
                seq_work[t][k] = orig - eps;
                let lm = loss(&params, &seq_work);
                seq_work[t][k] = orig;
                max_err = max_err.max(relative_error(dx[t][k], (lp - lm) / (2.0 * eps)));
            }
        }
        assert!(
            max_err < 1e-5,
            "finite-difference disagreement: {max_err:e}"
        );
    }
}
