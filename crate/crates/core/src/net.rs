//! Small fully connected networks with hand-written backprop and Adam.
//!
//! Rows are samples. A layer computes `act(x W^T + b)` with `W` stored
//! `out x in`.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, Uniform};

use crate::error::{invalid, mismatch, Result, RgpError};
use crate::fmt::{f64_exact, parse_f64};
use crate::{rng_from_seed, Rng};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    z
                } else {
                    s * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and the output `a = apply(z)`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    fn to_text(self) -> String {
        match self {
            Activation::LeakyRelu(s) => format!("leaky_relu:{}", f64_exact(s)),
            Activation::Tanh => "tanh".into(),
            Activation::Identity => "identity".into(),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = RgpError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            "leaky_relu" | "leakyrelu" => Ok(Activation::LeakyRelu(DEFAULT_LEAKY_SLOPE)),
            _ => {
                if let Some(rest) = s.strip_prefix("leaky_relu:") {
                    let slope = parse_f64(rest).ok_or_else(|| RgpError::Parse(format!("bad leaky_relu slope {rest:?}")))?;
                    Ok(Activation::LeakyRelu(slope))
                } else {
                    Err(RgpError::Parse(format!("unknown activation {s:?}")))
                }
            }
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// A feedforward network. Construction checks that layer shapes chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

/// Gradients shaped like the parameters of an [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Per-layer values kept from a forward pass for use by backprop.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `activations[l]` is the input to layer `l`; the last entry is the output.
    activations: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("trace always holds the input")
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.activations.pop().expect("trace always holds the input")
    }
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("a network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(mismatch(format!("layer {i}: bias has {} entries, weight has {} rows", l.bias.len(), l.out_dim())));
            }
            if l.in_dim() == 0 || l.out_dim() == 0 {
                return Err(invalid(format!("layer {i} has a zero dimension")));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(mismatch(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    w[0].out_dim(),
                    i + 1,
                    w[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    ///
    /// `dims` lists every width including input and output, so it has one
    /// more entry than `activations`.
    pub fn init(dims: &[usize], activations: &[Activation], rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(invalid("layer dims need at least an input and an output width"));
        }
        if activations.len() != dims.len() - 1 {
            return Err(mismatch(format!("{} layers but {} activations", dims.len() - 1, activations.len())));
        }
        if dims.contains(&0) {
            return Err(invalid("layer widths must be positive"));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Layer {
                    weight: Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(rng)),
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.in_dim()).chain(self.layers.iter().map(Layer::out_dim)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.in_dim() {
            return Err(mismatch(format!("network expects {} input columns, got {}", self.in_dim(), x.ncols())));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weight.t());
            z += &l.bias;
            z.mapv_inplace(|v| l.activation.apply(v));
            a = z;
        }
        Ok(a)
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<ForwardTrace> {
        self.check_input(&x)?;
        let mut activations = vec![x.to_owned()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let prev = activations.last().expect("non-empty");
            let mut z = prev.dot(&l.weight.t());
            z += &l.bias;
            let a = z.mapv(|v| l.activation.apply(v));
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardTrace { activations, pre_activations })
    }

    /// Gradients of `<upstream, forward(x)>` with respect to every parameter
    /// and to `x`.
    pub fn backward(&self, x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<(MlpGrads, Array2<f64>)> {
        let trace = self.forward_trace(x)?;
        self.backward_from_trace(&trace, upstream)
    }

    pub fn backward_from_trace(&self, trace: &ForwardTrace, upstream: ArrayView2<f64>) -> Result<(MlpGrads, Array2<f64>)> {
        let out = trace.output();
        if upstream.dim() != out.dim() {
            return Err(mismatch(format!("upstream gradient is {:?}, network output is {:?}", upstream.dim(), out.dim())));
        }
        let n_layers = self.layers.len();
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        let mut delta_out = upstream.to_owned();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let z = &trace.pre_activations[l];
            let a = &trace.activations[l + 1];
            let mut delta = delta_out;
            ndarray::Zip::from(&mut delta).and(z).and(a).for_each(|d, &z, &a| *d *= layer.activation.derivative(z, a));
            weights.push(delta.t().dot(&trace.activations[l]));
            biases.push(delta.sum_axis(Axis(0)));
            delta_out = delta.dot(&layer.weight);
        }
        weights.reverse();
        biases.reverse();
        Ok((MlpGrads { weights, biases }, delta_out))
    }

    /// Parameters in a fixed order: each layer's weight (row-major) then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend(l.weight.iter());
            v.extend(l.bias.iter());
        }
        v
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(mismatch(format!("expected {} parameters, got {}", self.param_count(), flat.len())));
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = *it.next().expect("length checked"));
        }
        Ok(())
    }

    /// Versioned text checkpoint with exact float round trip.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "rgp-mlp 1").unwrap();
        writeln!(s, "layers {}", self.layers.len()).unwrap();
        for (i, l) in self.layers.iter().enumerate() {
            writeln!(s, "layer {i} in={} out={} activation={}", l.in_dim(), l.out_dim(), l.activation).unwrap();
            writeln!(s, "weight").unwrap();
            for row in l.weight.rows() {
                writeln!(s, "{}", join_floats(row.iter())).unwrap();
            }
            writeln!(s, "bias {}", join_floats(l.bias.iter())).unwrap();
        }
        writeln!(s, "end").unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        Self::read_lines(&mut lines)
    }

    /// Reads one network block, leaving `lines` just past its `end` line.
    pub(crate) fn read_lines<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Self> {
        let mut next = || -> Result<&'a str> {
            loop {
                match lines.next() {
                    Some(l) if l.trim().is_empty() => continue,
                    Some(l) => return Ok(l.trim()),
                    None => return Err(RgpError::Parse("unexpected end of network checkpoint".into())),
                }
            }
        };
        let header = next()?;
        if header != "rgp-mlp 1" {
            return Err(RgpError::Parse(format!("unsupported network header {header:?}")));
        }
        let n_layers: usize = keyword_value(next()?, "layers")?
            .parse()
            .map_err(|_| RgpError::Parse("bad layer count".into()))?;
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            let line = next()?;
            let mut fields = line.split_whitespace();
            if fields.next() != Some("layer") || fields.next() != Some(i.to_string().as_str()) {
                return Err(RgpError::Parse(format!("expected 'layer {i}', got {line:?}")));
            }
            let (mut din, mut dout, mut act) = (None, None, None);
            for f in fields {
                match f.split_once('=') {
                    Some(("in", v)) => din = v.parse::<usize>().ok(),
                    Some(("out", v)) => dout = v.parse::<usize>().ok(),
                    Some(("activation", v)) => act = Some(v.parse::<Activation>()?),
                    _ => return Err(RgpError::Parse(format!("unexpected field {f:?} in layer line"))),
                }
            }
            let (Some(din), Some(dout), Some(activation)) = (din, dout, act) else {
                return Err(RgpError::Parse(format!("incomplete layer line {line:?}")));
            };
            if next()? != "weight" {
                return Err(RgpError::Parse(format!("layer {i}: expected weight block")));
            }
            let mut w = Vec::with_capacity(din * dout);
            for _ in 0..dout {
                let row = parse_floats(next()?)?;
                if row.len() != din {
                    return Err(RgpError::Parse(format!("layer {i}: weight row has {} values, expected {din}", row.len())));
                }
                w.extend(row);
            }
            let bias = parse_floats(keyword_value(next()?, "bias")?)?;
            if bias.len() != dout {
                return Err(RgpError::Parse(format!("layer {i}: bias has {} values, expected {dout}", bias.len())));
            }
            layers.push(Layer {
                weight: Array2::from_shape_vec((dout, din), w).expect("sized above"),
                bias: Array1::from(bias),
                activation,
            });
        }
        if next()? != "end" {
            return Err(RgpError::Parse("network block missing 'end'".into()));
        }
        Self::new(layers)
    }
}

fn keyword_value<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    match line.split_once(char::is_whitespace) {
        Some((k, v)) if k == key => Ok(v.trim()),
        _ if line == key => Ok(""),
        _ => Err(RgpError::Parse(format!("expected '{key} ...', got {line:?}"))),
    }
}

pub(crate) fn join_floats<'a>(it: impl Iterator<Item = &'a f64>) -> String {
    it.map(|&v| f64_exact(v)).collect::<Vec<_>>().join(" ")
}

pub(crate) fn parse_floats(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| parse_f64(t).ok_or_else(|| RgpError::Parse(format!("bad number {t:?}"))))
        .collect()
}

/// Deterministic initialization from a bare seed.
pub fn init_params(dims: &[usize], activations: &[Activation], seed: u64) -> Result<MlpParams> {
    MlpParams::init(dims, activations, &mut rng_from_seed(seed))
}

/// Two hidden layers of width `max(2 m, 16)`.
pub fn default_hidden(input_dim: usize) -> Vec<usize> {
    let w = (2 * input_dim).max(16);
    vec![w, w]
}

/// `input -> hidden... -> output`, `hidden_act` on hidden layers and an
/// unbounded output layer.
pub fn build_mlp(input_dim: usize, hidden: &[usize], output_dim: usize, hidden_act: Activation, rng: &mut Rng) -> Result<MlpParams> {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(output_dim);
    let mut acts = vec![hidden_act; hidden.len()];
    acts.push(Activation::Identity);
    MlpParams::init(&dims, &acts, rng)
}

/// Encoder `m -> hidden -> d` and decoder `d -> reversed hidden -> m`.
pub fn build_autoencoder(
    input_dim: usize,
    latent_dim: usize,
    hidden: &[usize],
    hidden_act: Activation,
    rng: &mut Rng,
) -> Result<(MlpParams, MlpParams)> {
    let enc = build_mlp(input_dim, hidden, latent_dim, hidden_act, rng)?;
    let rev: Vec<usize> = hidden.iter().rev().copied().collect();
    let dec = build_mlp(latent_dim, &rev, input_dim, hidden_act, rng)?;
    Ok((enc, dec))
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params.layers.iter().map(|l| Array2::zeros(l.weight.dim())).collect(),
            biases: params.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|w| *w *= s);
        self.biases.iter_mut().for_each(|b| *b *= s);
    }

    /// Same ordering as [`MlpParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite())) && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn matches(&self, params: &MlpParams) -> bool {
        self.weights.len() == params.layers.len()
            && self.biases.len() == params.layers.len()
            && params
                .layers
                .iter()
                .zip(self.weights.iter().zip(&self.biases))
                .all(|(l, (w, b))| l.weight.dim() == w.dim() && l.bias.len() == b.len())
    }
}

/// Bias-corrected Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: MlpGrads,
    second_moment: MlpGrads,
    step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams, lr: f64) -> Result<Self> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(invalid(format!("learning rate must be non-negative, got {lr}")));
        }
        Ok(Self {
            first_moment: MlpGrads::zeros_like(params),
            second_moment: MlpGrads::zeros_like(params),
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &MlpGrads {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &MlpGrads {
        &self.second_moment
    }

    /// One update. Parameters and state are untouched when an error is
    /// returned.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpGrads) -> Result<()> {
        if !grads.matches(params) || !self.first_moment.matches(params) {
            return Err(mismatch("gradient/optimizer shapes do not match the network"));
        }
        if !grads.all_finite() {
            return Err(RgpError::Numerical("NaN or infinite gradient passed to Adam".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let (lr, eps) = (self.lr, self.eps_hat);
        for (l, layer) in params.layers.iter_mut().enumerate() {
            let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            };
            ndarray::Zip::from(&mut layer.weight)
                .and(&mut self.first_moment.weights[l])
                .and(&mut self.second_moment.weights[l])
                .and(&grads.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut layer.bias)
                .and(&mut self.first_moment.biases[l])
                .and(&mut self.second_moment.biases[l])
                .and(&grads.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}
