use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Matrix, Rng};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
            Activation::Identity => v,
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// One affine map followed by an activation. `weights` is `[in × out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }
}

/// Feedforward network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations recorded by [`Mlp::forward`]: entry 0 is the input, entry
/// `i + 1` is the post-activation output of layer `i`.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache holds at least the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }

    pub fn into_output(mut self) -> Matrix {
        self.activations.pop().expect("cache holds at least the input")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients shaped like an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.as_slice().iter().all(|&v| v == 0.0) && l.bias.iter().all(|&v| v == 0.0)
        })
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.map_inplace(|v| v * factor);
            for b in &mut l.bias {
                *b *= factor;
            }
        }
    }

    pub(crate) fn check_shape(&self, mlp: &Mlp, context: &str) -> Result<()> {
        if self.layers.len() != mlp.layers.len() {
            return Err(Error::dims(
                format!("{context}: layer count"),
                mlp.layers.len(),
                self.layers.len(),
            ));
        }
        for (i, (g, l)) in self.layers.iter().zip(&mlp.layers).enumerate() {
            if g.weights.shape() != l.weights.shape() {
                return Err(Error::dims(
                    format!("{context}: layer {i} weight entries"),
                    l.weights.rows() * l.weights.cols(),
                    g.weights.rows() * g.weights.cols(),
                ));
            }
            if g.bias.len() != l.bias.len() {
                return Err(Error::dims(
                    format!("{context}: layer {i} bias"),
                    l.bias.len(),
                    g.bias.len(),
                ));
            }
        }
        Ok(())
    }
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::dims(format!("layer {i} bias"), l.output_dim(), l.bias.len()));
            }
            if i > 0 && layers[i - 1].output_dim() != l.input_dim() {
                return Err(Error::dims(
                    format!("layer {i} input"),
                    layers[i - 1].output_dim(),
                    l.input_dim(),
                ));
            }
        }
        Ok(Mlp { layers })
    }

    /// Glorot-uniform weights, zero biases. `sizes` lists every width from
    /// input to output; `activations` has one entry per layer.
    pub fn init(sizes: &[usize], activations: &[Activation], rng: &mut Rng) -> Result<Self> {
        Self::build(sizes, activations, |fan_in, fan_out| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            Matrix::from_vec(fan_in, fan_out, data).expect("sized above")
        })
    }

    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        Self::build(sizes, activations, Matrix::zeros)
    }

    fn build(
        sizes: &[usize],
        activations: &[Activation],
        mut weights: impl FnMut(usize, usize) -> Matrix,
    ) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::Config(format!(
                "{} sizes need {} activations, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| Layer {
                weights: weights(w[0], w[1]),
                bias: vec![0.0; w[1]],
                activation,
            })
            .collect();
        Mlp::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, input: &Matrix) -> Result<ForwardCache> {
        if input.cols() != self.input_dim() {
            return Err(Error::dims("layer 0 input", self.input_dim(), input.cols()));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for layer in &self.layers {
            let prev = activations.last().expect("non-empty");
            let mut z = prev.matmul(&layer.weights)?;
            let act = layer.activation;
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v = act.apply(*v + b);
                }
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Forward pass without keeping intermediate activations.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.input_dim() {
            return Err(Error::dims("layer 0 input", self.input_dim(), input.cols()));
        }
        let mut current = input.matmul(&self.layers[0].weights)?;
        self.finish_layer(0, &mut current);
        for i in 1..self.layers.len() {
            current = current.matmul(&self.layers[i].weights)?;
            self.finish_layer(i, &mut current);
        }
        Ok(current)
    }

    fn finish_layer(&self, i: usize, z: &mut Matrix) {
        let layer = &self.layers[i];
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *v = layer.activation.apply(*v + b);
            }
        }
    }

    /// Gradients of a loss with respect to every parameter, given
    /// `upstream = ∂loss/∂output`. Also returns `∂loss/∂input`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(Gradients, Matrix)> {
        let (grads, input_grad) = self.backward_impl(cache, upstream, true, true)?;
        Ok((grads.expect("requested"), input_grad.expect("requested")))
    }

    /// Parameter gradients only; skips the input-gradient product.
    pub fn backward_params(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<Gradients> {
        let (grads, _) = self.backward_impl(cache, upstream, true, false)?;
        Ok(grads.expect("requested"))
    }

    /// Input gradient only; used when chaining through a network that is
    /// held fixed for the current update.
    pub fn backward_input(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<Matrix> {
        let (_, input_grad) = self.backward_impl(cache, upstream, false, true)?;
        Ok(input_grad.expect("requested"))
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        upstream: &Matrix,
        want_params: bool,
        want_input: bool,
    ) -> Result<(Option<Gradients>, Option<Matrix>)> {
        self.check_cache(cache)?;
        let out = cache.output();
        if upstream.shape() != out.shape() {
            return Err(Error::dims(
                "backward upstream gradient",
                out.rows() * out.cols(),
                upstream.rows() * upstream.cols(),
            ));
        }
        let n_layers = self.layers.len();
        let mut grads: Vec<Option<LayerGradient>> = vec![None; n_layers];

        let mut delta = upstream.clone();
        apply_derivative(&mut delta, out, self.layers[n_layers - 1].activation);

        for i in (0..n_layers).rev() {
            let layer = &self.layers[i];
            let layer_input = &cache.activations[i];
            if want_params {
                grads[i] = Some(LayerGradient {
                    weights: layer_input.t_matmul(&delta)?,
                    bias: delta.column_sums(),
                });
            }
            if i == 0 {
                if want_input {
                    return Ok((
                        want_params.then(|| collect(grads)),
                        Some(delta.matmul_t(&layer.weights)?),
                    ));
                }
                break;
            }
            let mut next = delta.matmul_t(&layer.weights)?;
            apply_derivative(&mut next, layer_input, self.layers[i - 1].activation);
            delta = next;
        }
        Ok((want_params.then(|| collect(grads)), None))
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::dims(
                "stale forward cache: activation count",
                self.layers.len() + 1,
                cache.activations.len(),
            ));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let a = &cache.activations[i + 1];
            if a.cols() != layer.output_dim() || cache.activations[i].cols() != layer.input_dim() {
                return Err(Error::dims(
                    format!("stale forward cache: layer {i} width"),
                    layer.output_dim(),
                    a.cols(),
                ));
            }
        }
        Ok(())
    }
}

fn collect(grads: Vec<Option<LayerGradient>>) -> Gradients {
    Gradients {
        layers: grads.into_iter().map(|g| g.expect("filled")).collect(),
    }
}

fn apply_derivative(delta: &mut Matrix, output: &Matrix, activation: Activation) {
    if activation == Activation::Identity {
        return;
    }
    for (d, &y) in delta.as_mut_slice().iter_mut().zip(output.as_slice()) {
        *d *= activation.derivative_from_output(y);
    }
}
