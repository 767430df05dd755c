//! A single-layer LSTM encoder with explicit backpropagation through time.
//!
//! Gate equations, for step `t` with input `x` and previous state `(h, c)`:
//!
//! ```text
//! i  = σ(W_i x + U_i h + b_i)        f  = σ(W_f x + U_f h + b_f)
//! o  = σ(W_o x + U_o h + b_o)        c̃  = tanh(W_c x + U_c h + b_c)
//! c' = f ⊙ c + i ⊙ c̃                 h' = o ⊙ tanh(c')
//! ```
//!
//! The initial hidden and cell states are zero.

use rand::Rng;

use super::matrix::{sigmoid, Matrix};
use crate::error::{Error, Result};

/// Gate slots in [`LstmParams`] arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Cell = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Cell];

    pub fn suffix(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Output => "o",
            Gate::Cell => "c",
        }
    }
}

/// Weights of one LSTM layer. Indexed by [`Gate`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `hidden × input` input-to-gate weights.
    pub w: [Matrix; 4],
    /// `hidden × hidden` recurrent weights.
    pub u: [Matrix; 4],
    pub b: [Vec<f64>; 4],
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> LstmParams {
        LstmParams {
            input_dim,
            hidden_dim,
            w: std::array::from_fn(|_| Matrix::zeros(hidden_dim, input_dim)),
            u: std::array::from_fn(|_| Matrix::zeros(hidden_dim, hidden_dim)),
            b: std::array::from_fn(|_| vec![0.0; hidden_dim]),
        }
    }

    /// Glorot-uniform weights, zero biases except the forget gate (ones).
    pub fn glorot(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> LstmParams {
        let mut p = Self::zeros(input_dim, hidden_dim);
        let wl = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let ul = (6.0 / (2 * hidden_dim) as f64).sqrt();
        for g in 0..4 {
            p.w[g].as_mut_slice().iter_mut().for_each(|x| *x = rng.gen_range(-wl..=wl));
            p.u[g].as_mut_slice().iter_mut().for_each(|x| *x = rng.gen_range(-ul..=ul));
        }
        p.b[Gate::Forget as usize].fill(1.0);
        p
    }

    /// `(name, rows, cols, values)` for every tensor, weights then biases.
    pub fn tensors(&self) -> Vec<(String, usize, usize, &[f64])> {
        let mut out = Vec::with_capacity(12);
        for g in Gate::ALL {
            let m = &self.w[g as usize];
            out.push((format!("w_{}", g.suffix()), m.rows(), m.cols(), m.as_slice()));
        }
        for g in Gate::ALL {
            let m = &self.u[g as usize];
            out.push((format!("u_{}", g.suffix()), m.rows(), m.cols(), m.as_slice()));
        }
        for g in Gate::ALL {
            out.push((format!("b_{}", g.suffix()), 1, self.hidden_dim, &self.b[g as usize][..]));
        }
        out
    }

    /// Mutable slices in the same order as [`LstmParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let LstmParams { w, u, b, .. } = self;
        w.iter_mut()
            .map(Matrix::as_mut_slice)
            .chain(u.iter_mut().map(Matrix::as_mut_slice))
            .chain(b.iter_mut().map(Vec::as_mut_slice))
            .collect()
    }
}

/// Everything the backward pass needs from one forward run.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    pub inputs: Vec<Vec<f64>>,
    /// Gate activations per step, indexed by [`Gate`] (cell slot holds `c̃`).
    pub gates: Vec<[Vec<f64>; 4]>,
    pub cells: Vec<Vec<f64>>,
    pub tanh_cells: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
}

impl LstmCache {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Final hidden state; zeros for an empty sequence.
    pub fn final_hidden(&self, hidden_dim: usize) -> Vec<f64> {
        self.hidden.last().cloned().unwrap_or_else(|| vec![0.0; hidden_dim])
    }
}

/// Runs the recurrence over `inputs`, returning the cache (which holds the
/// hidden-state sequence) and the final hidden state.
pub fn lstm_forward(params: &LstmParams, inputs: &[Vec<f64>]) -> Result<(LstmCache, Vec<f64>)> {
    let hd = params.hidden_dim;
    let mut cache = LstmCache {
        inputs: Vec::with_capacity(inputs.len()),
        gates: Vec::with_capacity(inputs.len()),
        cells: Vec::with_capacity(inputs.len()),
        tanh_cells: Vec::with_capacity(inputs.len()),
        hidden: Vec::with_capacity(inputs.len()),
    };
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    for x in inputs {
        if x.len() != params.input_dim {
            return Err(Error::DimensionMismatch {
                expected: params.input_dim,
                actual: x.len(),
            });
        }
        let gates: [Vec<f64>; 4] = std::array::from_fn(|g| {
            let mut a = params.b[g].clone();
            params.w[g].mul_vec_add(x, &mut a);
            params.u[g].mul_vec_add(&h, &mut a);
            if g == Gate::Cell as usize {
                a.iter_mut().for_each(|v| *v = v.tanh());
            } else {
                a.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            a
        });
        let [i, f, o, g] = &gates;
        for k in 0..hd {
            c[k] = f[k] * c[k] + i[k] * g[k];
        }
        let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        h = o.iter().zip(&tc).map(|(o, t)| o * t).collect();
        cache.inputs.push(x.clone());
        cache.gates.push(gates);
        cache.cells.push(c.clone());
        cache.tanh_cells.push(tc);
        cache.hidden.push(h.clone());
    }
    Ok((cache, h))
}

/// Backpropagates `d_final` (loss gradient w.r.t. the final hidden state)
/// through every step. Returns parameter gradients and per-step input
/// gradients.
pub fn lstm_backward(params: &LstmParams, cache: &LstmCache, d_final: &[f64]) -> Result<(LstmParams, Vec<Vec<f64>>)> {
    let hd = params.hidden_dim;
    if d_final.len() != hd {
        return Err(Error::DimensionMismatch {
            expected: hd,
            actual: d_final.len(),
        });
    }
    let mut grads = LstmParams::zeros(params.input_dim, hd);
    let steps = cache.len();
    let mut d_inputs = vec![vec![0.0; params.input_dim]; steps];
    let mut dh = d_final.to_vec();
    let mut dc_next = vec![0.0; hd];
    let zeros = vec![0.0; hd];
    for t in (0..steps).rev() {
        let [i, f, o, g] = &cache.gates[t];
        let tc = &cache.tanh_cells[t];
        let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &cache.hidden[t - 1] } else { &zeros };
        let mut pre: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hd]);
        for k in 0..hd {
            let dc = dc_next[k] + dh[k] * o[k] * (1.0 - tc[k] * tc[k]);
            pre[Gate::Output as usize][k] = dh[k] * tc[k] * o[k] * (1.0 - o[k]);
            pre[Gate::Input as usize][k] = dc * g[k] * i[k] * (1.0 - i[k]);
            pre[Gate::Forget as usize][k] = dc * c_prev[k] * f[k] * (1.0 - f[k]);
            pre[Gate::Cell as usize][k] = dc * i[k] * (1.0 - g[k] * g[k]);
            dc_next[k] = dc * f[k];
        }
        let mut dh_prev = vec![0.0; hd];
        for gate in 0..4 {
            let da = &pre[gate];
            grads.w[gate].add_outer(da, &cache.inputs[t]);
            grads.u[gate].add_outer(da, h_prev);
            for (b, d) in grads.b[gate].iter_mut().zip(da) {
                *b += d;
            }
            params.w[gate].mul_t_vec_add(da, &mut d_inputs[t]);
            params.u[gate].mul_t_vec_add(da, &mut dh_prev);
        }
        dh = dh_prev;
    }
    Ok((grads, d_inputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_zero_hidden() {
        let p = LstmParams::zeros(3, 2);
        let (_, h) = lstm_forward(&p, &[vec![1.0, -2.0, 0.5], vec![4.0, 4.0, 4.0]]).unwrap();
        assert_eq!(h, [0.0, 0.0]);
    }

    #[test]
    fn one_step_hand_evaluation() {
        let mut p = LstmParams::zeros(1, 1);
        p.b[Gate::Cell as usize][0] = 1.0;
        let (cache, h) = lstm_forward(&p, &[vec![0.7]]).unwrap();
        let [i, f, o, g] = &cache.gates[0];
        assert_eq!((i[0], f[0], o[0]), (0.5, 0.5, 0.5));
        assert!((g[0] - 0.76159).abs() < 1e-5);
        assert!((cache.cells[0][0] - 0.38080).abs() < 1e-5);
        // 0.5 * tanh(0.5 * tanh(1))
        assert!((h[0] - 0.181_70).abs() < 1e-5, "{}", h[0]);
    }

    #[test]
    fn empty_sequence_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::glorot(2, 3, &mut rng);
        let (cache, h) = lstm_forward(&p, &[]).unwrap();
        assert!(cache.is_empty());
        assert_eq!(h, [0.0; 3]);
        let (g, dx) = lstm_backward(&p, &cache, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(g, LstmParams::zeros(2, 3));
        assert!(dx.is_empty());
    }

    #[test]
    fn rejects_wrong_input_width() {
        let p = LstmParams::zeros(2, 2);
        assert!(matches!(
            lstm_forward(&p, &[vec![1.0]]),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn glorot_sets_forget_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = LstmParams::glorot(4, 3, &mut rng);
        assert_eq!(p.b[Gate::Forget as usize], [1.0; 3]);
        assert_eq!(p.b[Gate::Input as usize], [0.0; 3]);
    }

    // Loss = Σ_k r_k h_T[k]; the gradient check uses central differences.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut p = LstmParams::glorot(3, 4, &mut rng);
        p.b.iter_mut().flatten().for_each(|b| *b += rng.gen_range(-0.5..0.5));
        let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let r: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |p: &LstmParams, xs: &[Vec<f64>]| {
            let (_, h) = lstm_forward(p, xs).unwrap();
            h.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
        };
        let (cache, _) = lstm_forward(&p, &xs).unwrap();
        let (g, dx) = lstm_backward(&p, &cache, &r).unwrap();
        let eps = 1e-5;
        let analytic: Vec<Vec<f64>> = g.tensors().into_iter().map(|t| t.3.to_vec()).collect();
        let n_tensors = analytic.len();
        for ti in 0..n_tensors {
            for k in 0..analytic[ti].len() {
                let mut plus = p.clone();
                plus.tensors_mut()[ti][k] += eps;
                let mut minus = p.clone();
                minus.tensors_mut()[ti][k] -= eps;
                let fd = (loss(&plus, &xs) - loss(&minus, &xs)) / (2.0 * eps);
                assert!((fd - analytic[ti][k]).abs() < 1e-8, "tensor {ti} [{k}]: {fd} vs {}", analytic[ti][k]);
            }
        }
        for t in 0..xs.len() {
            for k in 0..3 {
                let mut plus = xs.clone();
                plus[t][k] += eps;
                let mut minus = xs.clone();
                minus[t][k] -= eps;
                let fd = (loss(&p, &plus) - loss(&p, &minus)) / (2.0 * eps);
                assert!((fd - dx[t][k]).abs() < 1e-8);
            }
        }
    }
}
