//! Classifier heads: a linear layer (optionally applied per frame) and a
//! single unidirectional LSTM layer, both with hand-derived backward passes.

use crate::error::{Error, Result};
use crate::mat::{dot, Mat};
use rand::Rng;

/// Affine map `W x + b`. For keyword spotting it consumes the flattened
/// spectrogram; for the phoneme task it maps each LSTM state to logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    /// `out_dim x in_dim`.
    pub weight: Mat,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub d_weight: Mat,
    pub d_bias: Vec<f64>,
}

impl LinearHead {
    /// Zero-initialized head: predicts the uniform distribution until the
    /// first update, which keeps initial losses at `ln C`.
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        LinearHead {
            weight: Mat::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform `+-1/sqrt(in_dim)` weights, zero bias.
    pub fn uniform(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        LinearHead {
            weight: Mat::from_fn(out_dim, in_dim, |_, _| rng.random_range(-bound..bound)),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    /// Logits for one input vector.
    pub fn forward_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::ContractViolation(format!(
                "linear forward: input length {} != {}",
                x.len(),
                self.in_dim()
            )));
        }
        let mut out = self.weight.matvec(x);
        for (o, b) in out.iter_mut().zip(self.bias.iter()) {
            *o += b;
        }
        Ok(out)
    }

    /// Per-row logits for a matrix of inputs (`T x in_dim` -> `T x out_dim`).
    pub fn forward_mat(&self, x: &Mat) -> Result<Mat> {
        if x.cols() != self.in_dim() {
            return Err(Error::ContractViolation(format!(
                "linear forward: input cols {} != {}",
                x.cols(),
                self.in_dim()
            )));
        }
        let mut out = x.matmul_nt(&self.weight);
        for t in 0..out.rows() {
            for (o, b) in out.row_mut(t).iter_mut().zip(self.bias.iter()) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Gradients for the vector form. Also returns the input gradient.
    pub fn backward_vec(&self, upstream: &[f64], x: &[f64]) -> Result<(LinearGrads, Vec<f64>)> {
        if upstream.len() != self.out_dim() || x.len() != self.in_dim() {
            return Err(Error::ContractViolation(
                "linear backward: shape mismatch with forward".into(),
            ));
        }
        let mut d_weight = Mat::zeros(self.out_dim(), self.in_dim());
        for (c, &u) in upstream.iter().enumerate() {
            if u == 0.0 {
                continue;
            }
            for (w, &xv) in d_weight.row_mut(c).iter_mut().zip(x.iter()) {
                *w = u * xv;
            }
        }
        let d_input = self.weight.matvec_t(upstream);
        Ok((
            LinearGrads {
                d_weight,
                d_bias: upstream.to_vec(),
            },
            d_input,
        ))
    }

    /// Gradients for the matrix form; bias gradient is the column sum of the
    /// upstream.
    pub fn backward_mat(&self, upstream: &Mat, x: &Mat) -> Result<(LinearGrads, Mat)> {
        if upstream.cols() != self.out_dim()
            || x.cols() != self.in_dim()
            || upstream.rows() != x.rows()
        {
            return Err(Error::ContractViolation(
                "linear backward: shape mismatch with forward".into(),
            ));
        }
        let d_weight = upstream.matmul_tn(x);
        let mut d_bias = vec![0.0; self.out_dim()];
        for t in 0..upstream.rows() {
            for (b, &u) in d_bias.iter_mut().zip(upstream.row(t).iter()) {
                *b += u;
            }
        }
        let d_input = upstream.matmul(&self.weight);
        Ok((LinearGrads { d_weight, d_bias }, d_input))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Single unidirectional LSTM layer with zero initial state.
///
/// Gate weights are stored as one `4H x (I + H)` matrix over the
/// concatenated `[x_t; h_{t-1}]`, gate blocks ordered input, forget, cell
/// candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    pub weight: Mat,
    pub bias: Vec<f64>,
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    /// Concatenated `[x_t; h_{t-1}]` rows, `T x (I+H)`.
    joined: Mat,
    /// Post-activation gates, each `T x H`.
    gate_i: Mat,
    gate_f: Mat,
    gate_g: Mat,
    gate_o: Mat,
    /// Cell states and their tanh, `T x H`.
    cell: Mat,
    tanh_cell: Mat,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub d_weight: Mat,
    pub d_bias: Vec<f64>,
}

impl LstmLayer {
    /// Uniform `+-1/sqrt(I+H)` weights; forget-gate bias 1, other biases 0.
    pub fn init(input_size: usize, hidden_size: usize, rng: &mut impl Rng) -> Self {
        let fan_in = input_size + hidden_size;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight = Mat::from_fn(4 * hidden_size, fan_in, |_, _| rng.random_range(-bound..bound));
        let mut bias = vec![0.0; 4 * hidden_size];
        for b in &mut bias[hidden_size..2 * hidden_size] {
            *b = 1.0;
        }
        LstmLayer {
            input_size,
            hidden_size,
            weight,
            bias,
        }
    }

    /// Run the recurrence over `x` (`T x I`), returning hidden states
    /// (`T x H`) and the cache for [`LstmLayer::backward`].
    pub fn forward(&self, x: &Mat) -> Result<(Mat, LstmCache)> {
        if x.cols() != self.input_size {
            return Err(Error::ContractViolation(format!(
                "lstm forward: input cols {} != {}",
                x.cols(),
                self.input_size
            )));
        }
        let t_len = x.rows();
        let h_size = self.hidden_size;
        let joined_cols = self.input_size + h_size;

        let mut joined = Mat::zeros(t_len, joined_cols);
        let mut gate_i = Mat::zeros(t_len, h_size);
        let mut gate_f = Mat::zeros(t_len, h_size);
        let mut gate_g = Mat::zeros(t_len, h_size);
        let mut gate_o = Mat::zeros(t_len, h_size);
        let mut cell = Mat::zeros(t_len, h_size);
        let mut tanh_cell = Mat::zeros(t_len, h_size);
        let mut hidden = Mat::zeros(t_len, h_size);

        let mut h_prev = vec![0.0; h_size];
        let mut c_prev = vec![0.0; h_size];
        for t in 0..t_len {
            {
                let j = joined.row_mut(t);
                j[..self.input_size].copy_from_slice(x.row(t));
                j[self.input_size..].copy_from_slice(&h_prev);
            }
            let j = joined.row(t);
            for u in 0..h_size {
                let zi = dot(self.weight.row(u), j) + self.bias[u];
                let zf = dot(self.weight.row(h_size + u), j) + self.bias[h_size + u];
                let zg = dot(self.weight.row(2 * h_size + u), j) + self.bias[2 * h_size + u];
                let zo = dot(self.weight.row(3 * h_size + u), j) + self.bias[3 * h_size + u];
                let i = sigmoid(zi);
                let f = sigmoid(zf);
                let g = zg.tanh();
                let o = sigmoid(zo);
                let c = f * c_prev[u] + i * g;
                let tc = c.tanh();
                gate_i.set(t, u, i);
                gate_f.set(t, u, f);
                gate_g.set(t, u, g);
                gate_o.set(t, u, o);
                cell.set(t, u, c);
                tanh_cell.set(t, u, tc);
                hidden.set(t, u, o * tc);
            }
            h_prev.copy_from_slice(hidden.row(t));
            c_prev.copy_from_slice(cell.row(t));
        }

        Ok((
            hidden,
            LstmCache {
                joined,
                gate_i,
                gate_f,
                gate_g,
                gate_o,
                cell,
                tanh_cell,
            },
        ))
    }

    /// Backpropagation through time. Returns parameter gradients and the
    /// gradient w.r.t. the input sequence.
    pub fn backward(&self, upstream: &Mat, cache: &LstmCache) -> Result<(LstmGrads, Mat)> {
        let t_len = cache.joined.rows();
        let h_size = self.hidden_size;
        if upstream.shape() != (t_len, h_size) {
            return Err(Error::ContractViolation(format!(
                "lstm backward: upstream {:?} does not match {} x {}",
                upstream.shape(),
                t_len,
                h_size
            )));
        }

        let mut d_weight = Mat::zeros(4 * h_size, self.input_size + h_size);
        let mut d_bias = vec![0.0; 4 * h_size];
        let mut d_input = Mat::zeros(t_len, self.input_size);

        let mut dh_next = vec![0.0; h_size];
        let mut dc_next = vec![0.0; h_size];
        let mut dz = vec![0.0; 4 * h_size];
        for t in (0..t_len).rev() {
            for u in 0..h_size {
                let dh = upstream.get(t, u) + dh_next[u];
                let o = cache.gate_o.get(t, u);
                let tc = cache.tanh_cell.get(t, u);
                let i = cache.gate_i.get(t, u);
                let f = cache.gate_f.get(t, u);
                let g = cache.gate_g.get(t, u);
                let c_prev = if t == 0 { 0.0 } else { cache.cell.get(t - 1, u) };

                let dc = dh * o * (1.0 - tc * tc) + dc_next[u];
                dz[u] = dc * g * i * (1.0 - i);
                dz[h_size + u] = dc * c_prev * f * (1.0 - f);
                dz[2 * h_size + u] = dc * i * (1.0 - g * g);
                dz[3 * h_size + u] = dh * tc * o * (1.0 - o);
                dc_next[u] = dc * f;
            }

            let joined = cache.joined.row(t);
            for (r, &dzr) in dz.iter().enumerate() {
                d_bias[r] += dzr;
                if dzr == 0.0 {
                    continue;
                }
                for (w, &j) in d_weight.row_mut(r).iter_mut().zip(joined.iter()) {
                    *w += dzr * j;
                }
            }

            // d[x_t; h_{t-1}] = W^T dz
            let d_joined = self.weight.matvec_t(&dz);
            d_input.row_mut(t).copy_from_slice(&d_joined[..self.input_size]);
            dh_next.copy_from_slice(&d_joined[self.input_size..]);
        }

        Ok((LstmGrads { d_weight, d_bias }, d_input))
    }
}
