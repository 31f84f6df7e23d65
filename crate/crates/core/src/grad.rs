//! Exact analytic gradients of (data loss + weight-decay penalty) with
//! respect to every parameter, including backpropagation through time for
//! the LSTM layer, plus a finite-difference gradient check.
//!
//! Parameters are addressed as an ordered list of flat blocks (one slice per
//! bias vector or weight matrix). Optimizers, layer freezing, and the
//! gradient check all walk this shared layout.

use crate::error::Result;
use crate::linalg::Matrix;
use crate::loss::{
    loss, loss_grad_output_pre, regularization_grad, regularization_penalty, LossKind,
};
use crate::network::{ForwardTrace, GateParams, LstmLayer, LstmStepTrace, Network, RegKind};

/// Where a parameter block lives: which lockable layer it belongs to and
/// whether it is a bias (biases are excluded from weight decay).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockInfo {
    pub layer: usize,
    pub len: usize,
    pub is_bias: bool,
}

const LSTM_BLOCKS: usize = 12; // four gates x (bias, input weights, recurrent weights)

impl Network {
    /// Number of parameter blocks.
    pub fn n_blocks(&self) -> usize {
        usize::from(self.lstm.is_some()) * LSTM_BLOCKS + 2 * (self.hidden.len() + 1)
    }

    /// Ordered description of every parameter block. Layer indices run over
    /// [lstm?, hidden layers.., output layer].
    pub fn block_layout(&self) -> Vec<BlockInfo> {
        let mut out = Vec::with_capacity(self.n_blocks());
        let mut layer = 0;
        if let Some(l) = &self.lstm {
            let units = l.units();
            let inputs = l.input_width();
            for _gate in 0..4 {
                out.push(BlockInfo { layer, len: units, is_bias: true });
                out.push(BlockInfo { layer, len: units * inputs, is_bias: false });
                out.push(BlockInfo { layer, len: units * units, is_bias: false });
            }
            layer += 1;
        }
        for h in &self.hidden {
            out.push(BlockInfo {
                layer,
                len: h.weights.as_slice().len(),
                is_bias: false,
            });
            out.push(BlockInfo { layer, len: h.bias.len(), is_bias: true });
            layer += 1;
        }
        out.push(BlockInfo {
            layer,
            len: self.output.weights.as_slice().len(),
            is_bias: false,
        });
        out.push(BlockInfo {
            layer,
            len: self.output.bias.len(),
            is_bias: true,
        });
        out
    }

    pub fn block(&self, index: usize) -> &[f64] {
        let lstm_offset = usize::from(self.lstm.is_some()) * LSTM_BLOCKS;
        if index < lstm_offset {
            let l = self.lstm.as_ref().expect("lstm block on dense network");
            let gate = gate_of(l, index / 3);
            match index % 3 {
                0 => &gate.bias,
                1 => gate.input.as_slice(),
                _ => gate.recurrent.as_slice(),
            }
        } else {
            let j = index - lstm_offset;
            let layer = j / 2;
            let dense = if layer < self.hidden.len() {
                &self.hidden[layer]
            } else {
                &self.output
            };
            if j % 2 == 0 {
                dense.weights.as_slice()
            } else {
                &dense.bias
            }
        }
    }

    pub fn block_mut(&mut self, index: usize) -> &mut [f64] {
        let lstm_offset = usize::from(self.lstm.is_some()) * LSTM_BLOCKS;
        if index < lstm_offset {
            let l = self.lstm.as_mut().expect("lstm block on dense network");
            let gate = gate_of_mut(l, index / 3);
            match index % 3 {
                0 => &mut gate.bias,
                1 => gate.input.as_mut_slice(),
                _ => gate.recurrent.as_mut_slice(),
            }
        } else {
            let j = index - lstm_offset;
            let layer = j / 2;
            let dense = if layer < self.hidden.len() {
                &mut self.hidden[layer]
            } else {
                &mut self.output
            };
            if j % 2 == 0 {
                dense.weights.as_mut_slice()
            } else {
                &mut dense.bias
            }
        }
    }
}

fn gate_of(l: &LstmLayer, k: usize) -> &GateParams {
    match k {
        0 => &l.forget,
        1 => &l.input_gate,
        2 => &l.candidate,
        _ => &l.output_gate,
    }
}

fn gate_of_mut(l: &mut LstmLayer, k: usize) -> &mut GateParams {
    match k {
        0 => &mut l.forget,
        1 => &mut l.input_gate,
        2 => &mut l.candidate,
        _ => &mut l.output_gate,
    }
}

/// Gradients for one gate/candidate block.
#[derive(Debug, Clone)]
pub struct GateGrads {
    pub bias: Vec<f64>,
    pub input: Matrix,
    pub recurrent: Matrix,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub forget: GateGrads,
    pub input_gate: GateGrads,
    pub candidate: GateGrads,
    pub output_gate: GateGrads,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradient of the objective for every parameter of a network, shaped like
/// the parameters themselves.
#[derive(Debug, Clone)]
pub struct NetworkGrads {
    pub lstm: Option<LstmGrads>,
    pub hidden: Vec<DenseGrads>,
    pub output: DenseGrads,
}

impl NetworkGrads {
    pub fn zeros_like(net: &Network) -> NetworkGrads {
        let zero_gate = |g: &GateParams| GateGrads {
            bias: vec![0.0; g.bias.len()],
            input: Matrix::zeros(g.input.rows(), g.input.cols()),
            recurrent: Matrix::zeros(g.recurrent.rows(), g.recurrent.cols()),
        };
        NetworkGrads {
            lstm: net.lstm.as_ref().map(|l| LstmGrads {
                forget: zero_gate(&l.forget),
                input_gate: zero_gate(&l.input_gate),
                candidate: zero_gate(&l.candidate),
                output_gate: zero_gate(&l.output_gate),
            }),
            hidden: net
                .hidden
                .iter()
                .map(|h| DenseGrads {
                    weights: Matrix::zeros(h.weights.rows(), h.weights.cols()),
                    bias: vec![0.0; h.bias.len()],
                })
                .collect(),
            output: DenseGrads {
                weights: Matrix::zeros(net.output.weights.rows(), net.output.weights.cols()),
                bias: vec![0.0; net.output.bias.len()],
            },
        }
    }

    pub fn n_blocks(&self) -> usize {
        usize::from(self.lstm.is_some()) * LSTM_BLOCKS + 2 * (self.hidden.len() + 1)
    }

    fn gate(&self, k: usize) -> &GateGrads {
        let l = self.lstm.as_ref().expect("lstm block on dense gradients");
        match k {
            0 => &l.forget,
            1 => &l.input_gate,
            2 => &l.candidate,
            _ => &l.output_gate,
        }
    }

    fn gate_mut(&mut self, k: usize) -> &mut GateGrads {
        let l = self.lstm.as_mut().expect("lstm block on dense gradients");
        match k {
            0 => &mut l.forget,
            1 => &mut l.input_gate,
            2 => &mut l.candidate,
            _ => &mut l.output_gate,
        }
    }

    pub fn block(&self, index: usize) -> &[f64] {
        let lstm_offset = usize::from(self.lstm.is_some()) * LSTM_BLOCKS;
        if index < lstm_offset {
            let gate = self.gate(index / 3);
            match index % 3 {
                0 => &gate.bias,
                1 => gate.input.as_slice(),
                _ => gate.recurrent.as_slice(),
            }
        } else {
            let j = index - lstm_offset;
            let layer = j / 2;
            let dense = if layer < self.hidden.len() {
                &self.hidden[layer]
            } else {
                &self.output
            };
            if j % 2 == 0 {
                dense.weights.as_slice()
            } else {
                &dense.bias
            }
        }
    }

    pub fn block_mut(&mut self, index: usize) -> &mut [f64] {
        let lstm_offset = usize::from(self.lstm.is_some()) * LSTM_BLOCKS;
        if index < lstm_offset {
            let gate = self.gate_mut(index / 3);
            match index % 3 {
                0 => &mut gate.bias,
                1 => gate.input.as_mut_slice(),
                _ => gate.recurrent.as_mut_slice(),
            }
        } else {
            let j = index - lstm_offset;
            let layer = j / 2;
            let dense = if layer < self.hidden.len() {
                &mut self.hidden[layer]
            } else {
                &mut self.output
            };
            if j % 2 == 0 {
                dense.weights.as_mut_slice()
            } else {
                &mut dense.bias
            }
        }
    }

    /// self += other, blockwise.
    pub fn add_assign(&mut self, other: &NetworkGrads) {
        assert_eq!(self.n_blocks(), other.n_blocks(), "gradient shape mismatch");
        for i in 0..self.n_blocks() {
            let src = other.block(i);
            for (a, b) in self.block_mut(i).iter_mut().zip(src) {
                *a += b;
            }
        }
    }

    /// self *= factor, blockwise.
    pub fn scale(&mut self, factor: f64) {
        for i in 0..self.n_blocks() {
            for v in self.block_mut(i) {
                *v *= factor;
            }
        }
    }

    /// Zero the gradients of every layer marked true in `frozen` (indexed
    /// like [`Network::n_layers`]). Frozen layers then receive no update.
    pub fn mask_layers(&mut self, layout: &[BlockInfo], frozen: &[bool]) {
        for (i, info) in layout.iter().enumerate() {
            if frozen.get(info.layer).copied().unwrap_or(false) {
                for v in self.block_mut(i) {
                    *v = 0.0;
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        (0..self.n_blocks()).all(|i| self.block(i).iter().all(|v| v.is_finite()))
    }
}

/// Accumulate `da (outer) x` into a weight-gradient matrix and `da` into the
/// bias gradient.
fn accumulate_affine(gw: &mut Matrix, gb: &mut [f64], da: &[f64], x: &[f64]) {
    for (r, &d) in da.iter().enumerate() {
        gb[r] += d;
        if d == 0.0 {
            continue;
        }
        let row = gw.row_mut(r);
        for (w, &xv) in row.iter_mut().zip(x) {
            *w += d * xv;
        }
    }
}

/// Accumulate one gate's gradients: bias += da, input += da (outer) x,
/// recurrent += da (outer) h_prev.
fn accumulate_gate(gg: &mut GateGrads, da: &[f64], x: &[f64], h_prev: &[f64]) {
    for (r, &d) in da.iter().enumerate() {
        gg.bias[r] += d;
        if d == 0.0 {
            continue;
        }
        for (w, &xv) in gg.input.row_mut(r).iter_mut().zip(x) {
            *w += d * xv;
        }
        for (w, &hv) in gg.recurrent.row_mut(r).iter_mut().zip(h_prev) {
            *w += d * hv;
        }
    }
}

/// Gradient of (per-sample data loss + full weight-decay penalty) for one
/// traced forward pass.
pub fn backward(net: &Network, trace: &ForwardTrace, kind: LossKind, target: f64) -> NetworkGrads {
    let mut grads = NetworkGrads::zeros_like(net);

    // Output layer.
    let d_out = loss_grad_output_pre(kind, trace, net.output.activation, target);
    accumulate_affine(
        &mut grads.output.weights,
        &mut grads.output.bias,
        &[d_out],
        &trace.output_input,
    );
    let mut upstream: Vec<f64> = net
        .output
        .weights
        .row(0)
        .iter()
        .map(|w| w * d_out)
        .collect();

    // Dropout multiplied by the mask on the way forward, so its gradient
    // multiplies by the same mask on the way back.
    for (u, m) in upstream.iter_mut().zip(&trace.dropout_mask) {
        *u *= m;
    }

    // Hidden dense stack, last to first.
    for l in (0..net.hidden.len()).rev() {
        let layer = &net.hidden[l];
        let t = &trace.dense[l];
        let da: Vec<f64> = upstream
            .iter()
            .zip(t.pre.iter().zip(&t.post))
            .map(|(u, (pre, post))| u * layer.activation.derivative(*pre, *post))
            .collect();
        let gl = &mut grads.hidden[l];
        accumulate_affine(&mut gl.weights, &mut gl.bias, &da, &t.input);
        upstream = layer.weights.tr_matvec(&da);
    }

    // LSTM backpropagation through time; `upstream` is now the gradient at
    // the final hidden vector.
    if let Some(lstm) = &net.lstm {
        let lg = grads.lstm.as_mut().expect("lstm gradients allocated");
        bptt(lstm, &trace.lstm_steps, &upstream, lg);
    }

    // Weight-decay gradients on every weight matrix (biases excluded).
    let reg = net.spec.regularization;
    if reg.kind != RegKind::None && reg.lambda != 0.0 {
        let layout = net.block_layout();
        for (i, info) in layout.iter().enumerate() {
            if info.is_bias {
                continue;
            }
            // Collect first: `block_mut` on grads and `block` on net are
            // disjoint structures, so this is purely for clarity.
            let params: Vec<f64> = net.block(i).to_vec();
            for (g, w) in grads.block_mut(i).iter_mut().zip(params) {
                *g += regularization_grad(reg.kind, reg.lambda, w);
            }
        }
    }

    grads
}

/// Backpropagation through time for the LSTM recurrence; only the final
/// hidden vector has a downstream consumer.
fn bptt(lstm: &LstmLayer, steps: &[LstmStepTrace], dh_final: &[f64], grads: &mut LstmGrads) {
    let units = lstm.units();
    let cand_act = lstm.candidate_activation.activation();
    let mut dh = dh_final.to_vec();
    let mut ds = vec![0.0; units];
    for st in steps.iter().rev() {
        // h = tanh(s) * q.
        let mut da_q = vec![0.0; units];
        for j in 0..units {
            let ts = st.s[j].tanh();
            da_q[j] = dh[j] * ts * st.q[j] * (1.0 - st.q[j]);
            ds[j] += dh[j] * st.q[j] * (1.0 - ts * ts);
        }
        // s = f*s_prev + g*c, gates through their activations. The candidate
        // derivative is recoverable from its value for both variants.
        let mut da_f = vec![0.0; units];
        let mut da_g = vec![0.0; units];
        let mut da_c = vec![0.0; units];
        for j in 0..units {
            da_f[j] = ds[j] * st.s_prev[j] * st.f[j] * (1.0 - st.f[j]);
            da_g[j] = ds[j] * st.c[j] * st.g[j] * (1.0 - st.g[j]);
            da_c[j] = ds[j] * st.g[j] * cand_act.derivative(0.0, st.c[j]);
        }
        let mut dh_prev = vec![0.0; units];
        for (gate, da, gg) in [
            (&lstm.forget, &da_f, &mut grads.forget),
            (&lstm.input_gate, &da_g, &mut grads.input_gate),
            (&lstm.candidate, &da_c, &mut grads.candidate),
            (&lstm.output_gate, &da_q, &mut grads.output_gate),
        ] {
            accumulate_gate(gg, da, &st.x, &st.h_prev);
            for (p, v) in dh_prev.iter_mut().zip(gate.recurrent.tr_matvec(da)) {
                *p += v;
            }
        }
        for j in 0..units {
            ds[j] *= st.f[j];
        }
        dh = dh_prev;
    }
}

/// Finite-difference check: maximum relative error between the analytic
/// gradient and central differences of the full objective, skipping
/// components where both magnitudes fall below 1e-8. The dropout mask is
/// held fixed so the differentiated function is deterministic.
pub fn gradient_check(
    net: &Network,
    sample: &[Vec<f64>],
    mask: &[f64],
    kind: LossKind,
    target: f64,
    step: f64,
) -> Result<f64> {
    let (_, trace) = net.forward_with_mask(sample, mask)?;
    let analytic = backward(net, &trace, kind, target);
    let mut probe = net.clone();
    let mut max_rel: f64 = 0.0;
    for i in 0..net.n_blocks() {
        for j in 0..net.block(i).len() {
            let original = probe.block(i)[j];
            probe.block_mut(i)[j] = original + step;
            let up = objective(&probe, sample, mask, kind, target)?;
            probe.block_mut(i)[j] = original - step;
            let down = objective(&probe, sample, mask, kind, target)?;
            probe.block_mut(i)[j] = original;
            let numeric = (up - down) / (2.0 * step);
            let exact = analytic.block(i)[j];
            if numeric.abs() < 1e-8 && exact.abs() < 1e-8 {
                continue;
            }
            let rel = (numeric - exact).abs() / numeric.abs().max(exact.abs());
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

/// Data loss plus penalty for one sample under a fixed dropout mask.
fn objective(
    net: &Network,
    sample: &[Vec<f64>],
    mask: &[f64],
    kind: LossKind,
    target: f64,
) -> Result<f64> {
    let (_, trace) = net.forward_with_mask(sample, mask)?;
    Ok(loss(kind, kind.prediction(&trace), target) + regularization_penalty(net))
}
