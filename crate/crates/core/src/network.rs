//! Network architecture: activations, dense layers, a single optional LSTM
//! layer, deterministic initialization, and the traced forward pass used by
//! backpropagation. Networks hold one output unit; classification heads use
//! a sigmoid output, regression heads an identity output.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Pointwise activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let token = match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        };
        write!(f, "{token}")
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation and the activated value. The
    /// rectifier uses derivative 0 at exactly 0.
    #[inline]
    pub fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - post * post,
            Activation::Sigmoid => post * (1.0 - post),
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activation of the LSTM candidate block. The default follows the gating
/// form this crate reproduces (a sigmoid on the candidate); `Tanh` selects
/// the conventional variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LstmCandidate {
    #[default]
    Sigmoid,
    Tanh,
}

impl LstmCandidate {
    pub fn activation(self) -> Activation {
        match self {
            LstmCandidate::Sigmoid => Activation::Sigmoid,
            LstmCandidate::Tanh => Activation::Tanh,
        }
    }
}

/// Weight-decay penalty added to the data loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    #[default]
    None,
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub kind: RegKind,
    pub lambda: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization {
            kind: RegKind::None,
            lambda: 0.0,
        }
    }
}

/// Size of the optional LSTM layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub units: usize,
}

/// Architecture description. A network is `[LSTM?] -> dense hidden stack ->
/// dropout -> output unit`; `dense_depth` of 0 plus no LSTM degenerates to a
/// generalized linear model (logit / linear depending on the output
/// activation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_width: usize,
    #[serde(default)]
    pub lstm: Option<LstmSpec>,
    #[serde(default)]
    pub lstm_candidate: LstmCandidate,
    pub dense_depth: usize,
    #[serde(default)]
    pub dense_units: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    /// Inverted-dropout rate applied to the vector feeding the output layer.
    #[serde(default)]
    pub dropout_rate: f64,
    /// Initial value of the output bias (e.g. the label log-odds for an
    /// imbalanced classifier).
    #[serde(default)]
    pub output_bias: f64,
    #[serde(default)]
    pub regularization: Regularization,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 {
            return Err(Error::config("input_width must be at least 1"));
        }
        if self.dense_depth > 0 && self.dense_units == 0 {
            return Err(Error::config(
                "dense_units must be at least 1 when dense_depth > 0",
            ));
        }
        if let Some(l) = &self.lstm {
            if l.units == 0 {
                return Err(Error::config("lstm units must be at least 1"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(self.regularization.lambda >= 0.0 && self.regularization.lambda.is_finite()) {
            return Err(Error::config(format!(
                "regularization lambda must be finite and non-negative, got {}",
                self.regularization.lambda
            )));
        }
        if !self.output_bias.is_finite() {
            return Err(Error::config("output bias must be finite"));
        }
        Ok(())
    }
}

/// Fully connected layer: `post = act(W * input + b)` with `W` stored
/// row-major as units x inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn units(&self) -> usize {
        self.weights.rows()
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    fn forward(&self, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pre = self.weights.matvec(input);
        for (p, b) in pre.iter_mut().zip(&self.bias) {
            *p += b;
        }
        let post = pre.iter().map(|&p| self.activation.apply(p)).collect();
        (pre, post)
    }
}

/// Parameters of one LSTM block (a gate or the candidate): bias plus input
/// and recurrent weight matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub bias: Vec<f64>,
    /// units x input_width.
    pub input: Matrix,
    /// units x units.
    pub recurrent: Matrix,
}

impl GateParams {
    fn preactivation(&self, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let mut pre = self.input.matvec(x);
        let rec = self.recurrent.matvec(h_prev);
        for ((p, r), b) in pre.iter_mut().zip(rec).zip(&self.bias) {
            *p += r + b;
        }
        pre
    }
}

/// Single LSTM layer. State update per step, with `prev = (h, s)`:
/// forget `f = sigmoid(b_f + U_f x + W_f h)`, input gate
/// `g = sigmoid(b_g + U_g x + W_g h)`, candidate `c = cand(b_c + U_c x +
/// W_c h)`, output gate `q = sigmoid(b_q + U_q x + W_q h)`, then
/// `s' = f*s + g*c` and `h' = tanh(s') * q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub forget: GateParams,
    pub input_gate: GateParams,
    pub candidate: GateParams,
    pub output_gate: GateParams,
    pub candidate_activation: LstmCandidate,
}

/// Hidden and cell state of the LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub s: Vec<f64>,
}

impl LstmState {
    pub fn zeros(units: usize) -> LstmState {
        LstmState {
            h: vec![0.0; units],
            s: vec![0.0; units],
        }
    }
}

/// Cached values for one LSTM step, enough to run backpropagation through
/// time without recomputation.
#[derive(Debug, Clone)]
pub struct LstmStepTrace {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub s_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
}

impl LstmLayer {
    pub fn units(&self) -> usize {
        self.forget.recurrent.rows()
    }

    pub fn input_width(&self) -> usize {
        self.forget.input.cols()
    }

    /// One recurrence step.
    pub fn step(&self, x: &[f64], prev: &LstmState) -> LstmState {
        let (state, _) = self.step_traced(x, prev);
        state
    }

    fn step_traced(&self, x: &[f64], prev: &LstmState) -> (LstmState, LstmStepTrace) {
        let cand_act = self.candidate_activation.activation();
        let f: Vec<f64> = self
            .forget
            .preactivation(x, &prev.h)
            .iter()
            .map(|&v| sigmoid(v))
            .collect();
        let g: Vec<f64> = self
            .input_gate
            .preactivation(x, &prev.h)
            .iter()
            .map(|&v| sigmoid(v))
            .collect();
        let c: Vec<f64> = self
            .candidate
            .preactivation(x, &prev.h)
            .iter()
            .map(|&v| cand_act.apply(v))
            .collect();
        let q: Vec<f64> = self
            .output_gate
            .preactivation(x, &prev.h)
            .iter()
            .map(|&v| sigmoid(v))
            .collect();
        let s: Vec<f64> = f
            .iter()
            .zip(&prev.s)
            .zip(g.iter().zip(&c))
            .map(|((f, s_prev), (g, c))| f * s_prev + g * c)
            .collect();
        let h: Vec<f64> = s.iter().zip(&q).map(|(s, q)| s.tanh() * q).collect();
        let trace = LstmStepTrace {
            x: x.to_vec(),
            h_prev: prev.h.clone(),
            s_prev: prev.s.clone(),
            f,
            g,
            c,
            q,
            s: s.clone(),
        };
        (LstmState { h, s }, trace)
    }

    /// Run a whole sequence from an initial state (zeros when None) and
    /// return the final hidden vector plus per-step traces.
    pub fn forward(
        &self,
        sequence: &[Vec<f64>],
        initial: Option<LstmState>,
    ) -> Result<(Vec<f64>, Vec<LstmStepTrace>)> {
        if sequence.is_empty() {
            return Err(Error::data("lstm forward needs a non-empty sequence"));
        }
        let mut state = initial.unwrap_or_else(|| LstmState::zeros(self.units()));
        if state.h.len() != self.units() || state.s.len() != self.units() {
            return Err(Error::data(format!(
                "lstm initial state width {} does not match {} units",
                state.h.len(),
                self.units()
            )));
        }
        let mut traces = Vec::with_capacity(sequence.len());
        for x in sequence {
            if x.len() != self.input_width() {
                return Err(Error::data(format!(
                    "lstm input width {} does not match expected {}",
                    x.len(),
                    self.input_width()
                )));
            }
            let (next, trace) = self.step_traced(x, &state);
            traces.push(trace);
            state = next;
        }
        Ok((state.h, traces))
    }
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub lstm_steps: Vec<LstmStepTrace>,
    /// Per hidden layer: (input, pre-activation, activation).
    pub dense: Vec<DenseTrace>,
    /// Vector feeding the dropout stage (last hidden activation, LSTM
    /// output, or the raw features for a depth-0 network).
    pub dropout_input: Vec<f64>,
    /// Multiplier applied per unit: 0 for dropped units, 1/(1-rate)
    /// otherwise; all ones at inference.
    pub dropout_mask: Vec<f64>,
    /// Vector feeding the output layer (dropout applied).
    pub output_input: Vec<f64>,
    pub output_pre: f64,
    pub output: f64,
}

#[derive(Debug, Clone)]
pub struct DenseTrace {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

/// Train-time vs inference-time forward behaviour (dropout sampling).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

/// A trainable network plus the spec it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub lstm: Option<LstmLayer>,
    pub hidden: Vec<DenseLayer>,
    pub output: DenseLayer,
}

fn glorot_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    // Fan-based uniform initialization: limit = sqrt(6 / (fan_in + fan_out)).
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit);
    Matrix::from_fn(rows, cols, |_, _| dist.sample(rng))
}

fn init_gate<R: Rng>(units: usize, input_width: usize, rng: &mut R) -> GateParams {
    GateParams {
        bias: vec![0.0; units],
        input: glorot_matrix(units, input_width, rng),
        recurrent: glorot_matrix(units, units, rng),
    }
}

impl Network {
    /// Build a network with fan-based uniform weights, zero biases, and the
    /// configured output bias. Deterministic for a given seed.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Network> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lstm = spec.lstm.as_ref().map(|l| LstmLayer {
            forget: init_gate(l.units, spec.input_width, &mut rng),
            input_gate: init_gate(l.units, spec.input_width, &mut rng),
            candidate: init_gate(l.units, spec.input_width, &mut rng),
            output_gate: init_gate(l.units, spec.input_width, &mut rng),
            candidate_activation: spec.lstm_candidate,
        });
        let mut width = match (&lstm, spec.input_width) {
            (Some(l), _) => l.units(),
            (None, w) => w,
        };
        let mut hidden = Vec::with_capacity(spec.dense_depth);
        for _ in 0..spec.dense_depth {
            hidden.push(DenseLayer {
                weights: glorot_matrix(spec.dense_units, width, &mut rng),
                bias: vec![0.0; spec.dense_units],
                activation: spec.hidden_activation,
            });
            width = spec.dense_units;
        }
        let output = DenseLayer {
            weights: glorot_matrix(1, width, &mut rng),
            bias: vec![spec.output_bias],
            activation: spec.output_activation,
        };
        Ok(Network {
            spec: spec.clone(),
            lstm,
            hidden,
            output,
        })
    }

    pub fn input_width(&self) -> usize {
        self.spec.input_width
    }

    /// Number of parameterized layers: the LSTM (if any), each hidden dense
    /// layer, and the output layer. This is the unit of lock masks.
    pub fn n_layers(&self) -> usize {
        usize::from(self.lstm.is_some()) + self.hidden.len() + 1
    }

    /// Check parameter shapes against the spec (guards deserialized files).
    pub fn validate_shapes(&self) -> Result<()> {
        self.spec.validate()?;
        let mut width = self.spec.input_width;
        match (&self.lstm, &self.spec.lstm) {
            (Some(layer), Some(l)) => {
                for (name, gate) in [
                    ("forget", &layer.forget),
                    ("input_gate", &layer.input_gate),
                    ("candidate", &layer.candidate),
                    ("output_gate", &layer.output_gate),
                ] {
                    if gate.input.rows() != l.units
                        || gate.input.cols() != width
                        || gate.recurrent.rows() != l.units
                        || gate.recurrent.cols() != l.units
                        || gate.bias.len() != l.units
                    {
                        return Err(Error::data(format!(
                            "lstm {name} block shape does not match spec ({} units, {} inputs)",
                            l.units, width
                        )));
                    }
                }
                width = l.units;
            }
            (None, None) => {}
            _ => {
                return Err(Error::data(
                    "network lstm layer presence does not match its spec",
                ));
            }
        }
        if self.hidden.len() != self.spec.dense_depth {
            return Err(Error::data(format!(
                "network has {} hidden layers but spec says {}",
                self.hidden.len(),
                self.spec.dense_depth
            )));
        }
        for (i, layer) in self.hidden.iter().enumerate() {
            if layer.units() != self.spec.dense_units
                || layer.inputs() != width
                || layer.bias.len() != layer.units()
            {
                return Err(Error::data(format!(
                    "hidden layer {i} shape does not match spec"
                )));
            }
            width = layer.units();
        }
        if self.output.units() != 1 || self.output.inputs() != width || self.output.bias.len() != 1
        {
            return Err(Error::data("output layer shape does not match spec"));
        }
        Ok(())
    }

    fn dense_stack_input(&self, sample: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<LstmStepTrace>)> {
        if sample.is_empty() {
            return Err(Error::data("forward pass needs a non-empty sample"));
        }
        for row in sample {
            if row.len() != self.spec.input_width {
                return Err(Error::data(format!(
                    "sample width {} does not match network input width {}",
                    row.len(),
                    self.spec.input_width
                )));
            }
        }
        match &self.lstm {
            Some(layer) => layer.forward(sample, None),
            None => {
                if sample.len() != 1 {
                    return Err(Error::data(format!(
                        "a dense-only network takes single-row samples, got a sequence of {}",
                        sample.len()
                    )));
                }
                Ok((sample[0].clone(), Vec::new()))
            }
        }
    }

    /// Forward pass over a sample (a sequence of rows; length 1 for purely
    /// dense networks). Train phase samples a fresh dropout mask from `rng`.
    pub fn forward<R: Rng>(
        &self,
        sample: &[Vec<f64>],
        phase: Phase,
        rng: &mut R,
    ) -> Result<(f64, ForwardTrace)> {
        let width = self.pre_output_width();
        let mask = match phase {
            Phase::Infer => vec![1.0; width],
            Phase::Train => {
                let rate = self.spec.dropout_rate;
                if rate == 0.0 {
                    vec![1.0; width]
                } else {
                    let keep_scale = 1.0 / (1.0 - rate);
                    (0..width)
                        .map(|_| {
                            if rng.gen::<f64>() < rate {
                                0.0
                            } else {
                                keep_scale
                            }
                        })
                        .collect()
                }
            }
        };
        self.forward_with_mask(sample, &mask)
    }

    /// Forward pass with an explicit dropout mask (multiplier per unit of
    /// the vector feeding the output layer). Deterministic; used by training
    /// internally and by gradient checks that must re-evaluate the same
    /// stochastic network.
    pub fn forward_with_mask(
        &self,
        sample: &[Vec<f64>],
        mask: &[f64],
    ) -> Result<(f64, ForwardTrace)> {
        let (stack_input, lstm_steps) = self.dense_stack_input(sample)?;
        let mut dense = Vec::with_capacity(self.hidden.len());
        let mut current = stack_input;
        for layer in &self.hidden {
            let (pre, post) = layer.forward(&current);
            dense.push(DenseTrace {
                input: std::mem::replace(&mut current, post.clone()),
                pre,
                post,
            });
        }
        if mask.len() != current.len() {
            return Err(Error::data(format!(
                "dropout mask length {} does not match width {}",
                mask.len(),
                current.len()
            )));
        }
        let dropout_input = current.clone();
        let output_input: Vec<f64> = current.iter().zip(mask).map(|(v, m)| v * m).collect();
        let (pre, post) = self.output.forward(&output_input);
        let trace = ForwardTrace {
            lstm_steps,
            dense,
            dropout_input,
            dropout_mask: mask.to_vec(),
            output_input,
            output_pre: pre[0],
            output: post[0],
        };
        Ok((trace.output, trace))
    }

    /// Inference without dropout.
    pub fn infer(&self, sample: &[Vec<f64>]) -> Result<f64> {
        let width = self.pre_output_width();
        Ok(self.forward_with_mask(sample, &vec![1.0; width])?.0)
    }

    /// Convenience single-row inference for dense networks.
    pub fn infer_row(&self, row: &[f64]) -> Result<f64> {
        self.infer(&[row.to_vec()])
    }

    /// Width of the vector feeding the output layer.
    pub fn pre_output_width(&self) -> usize {
        self.output.inputs()
    }

    /// Serialize to self-describing JSON. Finite parameters round-trip
    /// bit-exactly. Errors when any parameter is non-finite.
    pub fn to_json_string(&self) -> Result<String> {
        for i in 0..self.n_blocks() {
            if self.block(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::data(
                    "network contains non-finite parameters; refusing to serialize",
                ));
            }
        }
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::data(format!("cannot serialize network: {e}")))
    }

    pub fn from_json_str(json: &str) -> Result<Network> {
        let net: Network = serde_json::from_str(json)
            .map_err(|e| Error::data(format!("cannot parse network JSON: {e}")))?;
        net.validate_shapes()?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)
            .map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Network> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
        Network::from_json_str(&json)
    }
}
