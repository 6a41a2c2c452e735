//! Fully connected layers and plain MLPs with hand-written backward passes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{matmul, matmul_transpose_a, matmul_transpose_b, Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, m: &mut Matrix) {
        if self == Activation::Relu {
            for v in m.as_mut_slice() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }

    /// Multiplies `grad` by the activation derivative evaluated at `pre`.
    fn backprop(self, pre: &Matrix, grad: &mut Matrix) {
        if self == Activation::Relu {
            for (g, &p) in grad.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if p <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}

/// `log(1 + exp(z))`, computed without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic sigmoid, the derivative of [`softplus`].
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Affine layer `y = x·W + b` with `W` stored as `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: Matrix::zeros(inputs, outputs),
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform fan-in initialisation on `[-1/√in, 1/√in]` for weights and biases.
    pub fn init(inputs: usize, outputs: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let mut layer = Dense::zeros(inputs, outputs);
        for w in layer.weight.as_mut_slice() {
            *w = rng.uniform_range(-bound, bound);
        }
        for b in &mut layer.bias {
            *b = rng.uniform_range(-bound, bound);
        }
        layer
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = matmul(x, &self.weight)?;
        y.add_row_broadcast(&self.bias);
        Ok(y)
    }

    /// Returns the parameter gradient and the gradient with respect to `x`.
    pub fn backward(&self, x: &Matrix, grad_out: &Matrix) -> Result<(DenseGrad, Matrix)> {
        let weight = matmul_transpose_a(x, grad_out)?;
        let bias = grad_out.column_sums();
        let grad_in = matmul_transpose_b(grad_out, &self.weight)?;
        Ok((DenseGrad { weight, bias }, grad_in))
    }

    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 2] {
        [self.weight.as_mut_slice(), self.bias.as_mut_slice()]
    }

    pub fn param_count(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }
}

impl DenseGrad {
    pub fn slices(&self) -> [&[f64]; 2] {
        [self.weight.as_slice(), self.bias.as_slice()]
    }
}

/// A chain of dense layers: ReLU between layers, `output_activation` after the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
    pub output_activation: Activation,
}

/// Intermediate values retained by [`MlpParams::forward_cached`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrad>,
}

impl MlpGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|g| g.slices()).collect()
    }
}

impl MlpParams {
    /// `dims = [input, hidden..., output]`.
    pub fn init(
        dims: &[usize],
        output_activation: Activation,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid(
                "an MLP needs at least input and output sizes",
            ));
        }
        if dims.contains(&0) {
            return Err(Error::invalid("MLP layer sizes must be positive"));
        }
        let layers = dims
            .windows(2)
            .map(|w| Dense::init(w[0], w[1], rng))
            .collect();
        Ok(MlpParams {
            layers,
            output_activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Dense::inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            Activation::Relu
        }
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "MLP input",
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x.cols())?;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            self.activation_of(i).apply(&mut h);
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        self.check_input(x.cols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h)?;
            inputs.push(h);
            h = z.clone();
            self.activation_of(i).apply(&mut h);
            pre_activations.push(z);
        }
        Ok((
            h,
            MlpCache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Backpropagates `grad_out` (gradient of the loss w.r.t. the network output).
    pub fn backward(&self, cache: &MlpCache, grad_out: &Matrix) -> Result<(MlpGrads, Matrix)> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            self.activation_of(i)
                .backprop(&cache.pre_activations[i], &mut g);
            let (lg, g_in) = self.layers[i].backward(&cache.inputs[i], &g)?;
            grads.push(lg);
            g = g_in;
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, g))
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.param_slices_mut())
            .collect()
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice().len(), l.bias.len()])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

/// Single-sample forward pass.
pub fn mlp_forward(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(params.forward_batch(&m)?.into_vec())
}

/// Parameter gradients of a scalar loss whose gradient w.r.t. the output of
/// `params` at input `x` is `upstream_grad`.
pub fn mlp_backward(params: &MlpParams, x: &[f64], upstream_grad: &[f64]) -> Result<MlpGrads> {
    if upstream_grad.len() != params.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "mlp_backward upstream gradient",
            expected: params.output_dim(),
            actual: upstream_grad.len(),
        });
    }
    let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let (_, cache) = params.forward_cached(&m)?;
    let g = Matrix::from_vec(1, upstream_grad.len(), upstream_grad.to_vec())?;
    Ok(params.backward(&cache, &g)?.0)
}
