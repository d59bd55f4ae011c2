//! Dense layers, Glorot initialization, and batched forward/backward passes.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    pub fn tag(&self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Identity => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(&self, z: &mut DMatrix<f64>) {
        if let Activation::Tanh = self {
            z.apply(|v| *v = v.tanh());
        }
    }

    /// Derivative expressed through the activation output a = act(z).
    fn derivative_from_output(&self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer y = act(x W + b); weights are stored input×output.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: RowDVector<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }
}

/// Glorot-uniform weight matrix: entries uniform on ±√(6/(fan_in+fan_out)).
/// Equal seeds give equal matrices.
pub fn glorot_uniform(rows: usize, cols: usize, seed: u64) -> Result<DMatrix<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("weight matrix dimensions must be positive"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok(glorot_uniform_with(rows, cols, &mut rng))
}

pub fn glorot_uniform_with(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    // Row-major fill order, so the draw sequence is part of the format.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.random_range(-limit..=limit);
        }
    }
    m
}

/// Fully connected network; biases everywhere, zero-initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Per-layer cache from a forward pass, consumed by `backward`.
pub struct ForwardCache {
    /// Layer inputs: activations[0] is the batch input, activations[i+1] the
    /// output of layer i.
    activations: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("nonempty cache")
    }
}

/// Parameter gradients aligned with `Mlp::layers`.
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub weights: Vec<DMatrix<f64>>,
    pub bias: Vec<RowDVector<f64>>,
}

impl MlpGradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.in_dim(), l.out_dim()))
                .collect(),
            bias: mlp
                .layers
                .iter()
                .map(|l| RowDVector::zeros(l.out_dim()))
                .collect(),
        }
    }
}

impl Mlp {
    /// Build with layer widths `dims` (input first) and one activation per
    /// weight layer. Weights are Glorot uniform, biases zero.
    pub fn new(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid("an MLP needs at least one weight layer"));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::invalid(format!(
                "{} layers need {} activations, got {}",
                dims.len() - 1,
                dims.len() - 1,
                activations.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| Layer {
                weights: glorot_uniform_with(pair[0], pair[1], &mut rng),
                bias: RowDVector::zeros(pair[1]),
                activation,
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim()
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Batched forward pass; rows of `input` are samples.
    pub fn forward(&self, input: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut cache = self.forward_cached(input)?;
        Ok(cache.activations.pop().expect("nonempty activation stack"))
    }

    /// Forward pass retaining per-layer activations for backpropagation.
    pub fn forward_cached(&self, input: &DMatrix<f64>) -> Result<ForwardCache> {
        if input.ncols() != self.in_dim() {
            return Err(Error::dims(format!(
                "network expects {} inputs, got {}",
                self.in_dim(),
                input.ncols()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for layer in &self.layers {
            let prev = activations.last().expect("nonempty");
            let mut z = prev * &layer.weights;
            for mut row in z.row_iter_mut() {
                row += &layer.bias;
            }
            layer.activation.apply(&mut z);
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Backpropagate `grad_output` (∂L/∂output, same shape as the output)
    /// through the cached pass; returns parameter gradients and ∂L/∂input.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &DMatrix<f64>) -> (MlpGradients, DMatrix<f64>) {
        let mut grads = MlpGradients::zeros_like(self);
        let mut delta = grad_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let output = &cache.activations[i + 1];
            // δ ⊙ act'(z), with act' written in terms of the output.
            for (d, &a) in delta.iter_mut().zip(output.iter()) {
                *d *= layer.activation.derivative_from_output(a);
            }
            let input = &cache.activations[i];
            grads.weights[i] = input.transpose() * &delta;
            let mut bias = RowDVector::zeros(layer.out_dim());
            for row in delta.row_iter() {
                bias += row;
            }
            grads.bias[i] = bias;
            delta = &delta * layer.weights.transpose();
        }
        (grads, delta)
    }

    /// Flatten all parameters (weights row-major, then bias, per layer).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            for i in 0..layer.weights.nrows() {
                for j in 0..layer.weights.ncols() {
                    out.push(layer.weights[(i, j)]);
                }
            }
            out.extend(layer.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::dims(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let mut it = params.iter();
        for layer in &mut self.layers {
            for i in 0..layer.weights.nrows() {
                for j in 0..layer.weights.ncols() {
                    layer.weights[(i, j)] = *it.next().expect("length checked");
                }
            }
            for b in layer.bias.iter_mut() {
                *b = *it.next().expect("length checked");
            }
        }
        Ok(())
    }
}

/// Single-vector convenience forward.
pub fn forward_vector(mlp: &Mlp, x: &[f64]) -> Result<DVector<f64>> {
    let input = DMatrix::from_row_slice(1, x.len(), x);
    let out = mlp.forward(&input)?;
    Ok(DVector::from_iterator(
        out.ncols(),
        out.row(0).iter().copied(),
    ))
}
