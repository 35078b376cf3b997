use rand::Rng;

use super::params::{ParamView, Parameters};
use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fully connected layer, `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Tensor2<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weights: Tensor2::zeros(input, output), bias: vec![T::zero(); output] }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }

    fn apply(&self, x: &Tensor2<T>) -> Result<Tensor2<T>> {
        let mut y = x.matmul(&self.weights)?;
        for r in 0..y.rows() {
            for (v, &b) in y.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }
}

/// Multilayer perceptron: relu after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub layers: Vec<Dense<T>>,
}

/// Activations kept from a forward pass. `inputs[l]` is what layer `l` saw.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    inputs: Vec<Tensor2<T>>,
}

impl<T: Real> MlpParams<T> {
    /// All-zero network with layer widths `dims[0] -> dims[1] -> ...`.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least one layer");
        Self { layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect() }
    }

    /// He-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let mut mlp = Self::zeros(dims);
        for layer in &mut mlp.layers {
            let bound = (6.0 / layer.input_dim().max(1) as f64).sqrt();
            for w in layer.weights.data_mut() {
                *w = T::lit(rng.random_range(-bound..bound));
            }
        }
        mlp
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("an MLP needs at least one layer"));
        }
        for (l, w) in layers.windows(2).enumerate() {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(Error::dims("MLP layer chain", w[0].output_dim(), format!("{} at layer {}", w[1].input_dim(), l + 1)));
            }
        }
        for layer in &layers {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::dims("MLP bias", layer.output_dim(), layer.bias.len()));
            }
        }
        Ok(Self { layers })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(Dense::output_dim));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn forward(&self, x: &Tensor2<T>) -> Result<(Tensor2<T>, MlpCache<T>)> {
        if x.cols() != self.input_dim() {
            return Err(Error::dims("mlp_forward input", self.input_dim(), x.cols()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = layer.apply(&h)?;
            if l < last {
                for v in y.data_mut() {
                    *v = v.max(T::zero());
                }
            }
            inputs.push(h);
            h = y;
        }
        Ok((h, MlpCache { inputs }))
    }

    /// Reverse pass. Returns parameter gradients (shaped like `self`) and the
    /// gradient with respect to the forward input.
    pub fn backward(&self, cache: &MlpCache<T>, grad_out: &Tensor2<T>) -> Result<(MlpParams<T>, Tensor2<T>)> {
        if cache.inputs.len() != self.layers.len()
            || cache.inputs.iter().zip(&self.layers).any(|(x, l)| x.cols() != l.input_dim())
        {
            return Err(Error::invalid("MLP cache does not match these parameters"));
        }
        let rows = cache.inputs[0].rows();
        if grad_out.shape() != [rows, self.output_dim()] {
            return Err(Error::dims(
                "mlp_backward upstream gradient",
                format!("{rows}x{}", self.output_dim()),
                format!("{}x{}", grad_out.rows(), grad_out.cols()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = grad_out.clone();
        for l in (0..self.layers.len()).rev() {
            let x = &cache.inputs[l];
            let weights = x.t_matmul(&d)?;
            let bias = d.column_sums();
            let mut dx = d.matmul_t(&self.layers[l].weights)?;
            if l > 0 {
                // x = relu(pre), so relu'(pre) is exactly (x > 0).
                for (g, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
                    if xv <= T::zero() {
                        *g = T::zero();
                    }
                }
            }
            grads.push(Dense { weights, bias });
            d = dx;
        }
        grads.reverse();
        Ok((MlpParams { layers: grads }, d))
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.dims())
    }

    pub fn scale(&mut self, s: T) {
        for layer in &mut self.layers {
            layer.weights.data_mut().iter_mut().for_each(|v| *v *= s);
            layer.bias.iter_mut().for_each(|v| *v *= s);
        }
    }
}

impl<T: Real> Parameters<T> for MlpParams<T> {
    fn param_views(&self) -> Vec<ParamView<'_, T>> {
        let mut views = Vec::with_capacity(self.layers.len() * 2);
        for (i, layer) in self.layers.iter().enumerate() {
            views.push(ParamView {
                name: format!("layer{i}.weight"),
                shape: layer.weights.shape(),
                data: layer.weights.data(),
            });
            views.push(ParamView { name: format!("layer{i}.bias"), shape: [1, layer.bias.len()], data: &layer.bias });
        }
        views
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(self.layers.len() * 2);
        for layer in &mut self.layers {
            out.push(layer.weights.data_mut());
            out.push(&mut layer.bias);
        }
        out
    }
}
