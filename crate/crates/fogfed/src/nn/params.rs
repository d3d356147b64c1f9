//! Network parameters, gradients, and training hyperparameters.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::rng::seeded_rng;

/// Default layer widths: 512 inputs, one 64-unit hidden layer, 8 classes.
pub const DEFAULT_INPUT_DIM: usize = 512;
pub const DEFAULT_HIDDEN_DIM: usize = 64;
pub const DEFAULT_OUTPUT_DIM: usize = 8;

/// Layer widths of the two-layer classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Dims {
    pub const fn new(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
        }
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.input * self.hidden + self.hidden + self.hidden * self.output + self.output
    }

    fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.output == 0 {
            return Err(Error::InvalidArgument(format!(
                "all dims must be >= 1, got ({}, {}, {})",
                self.input, self.hidden, self.output
            )));
        }
        Ok(())
    }
}

impl Default for Dims {
    fn default() -> Self {
        Self::new(DEFAULT_INPUT_DIM, DEFAULT_HIDDEN_DIM, DEFAULT_OUTPUT_DIM)
    }
}

/// All trainable weights and biases of the dense network.
///
/// `w1` is `input x hidden` row-major, `w2` is `hidden x output` row-major;
/// biases are applied row-broadcast. Every operation that returns
/// `ModelParams` keeps all entries finite and the shapes fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    w1: Matrix,
    b1: Vec<f32>,
    w2: Matrix,
    b2: Vec<f32>,
}

impl ModelParams {
    /// All-zero parameters of the given shape.
    pub fn zeros(dims: Dims) -> Result<Self> {
        dims.validate()?;
        Ok(Self {
            w1: Matrix::zeros(dims.input, dims.hidden),
            b1: vec![0.0; dims.hidden],
            w2: Matrix::zeros(dims.hidden, dims.output),
            b2: vec![0.0; dims.output],
        })
    }

    /// Rebuilds parameters from the four flat tensors in `w1, b1, w2, b2`
    /// order, inferring shapes from the bias lengths.
    pub fn from_tensors(w1: Vec<f32>, b1: Vec<f32>, w2: Vec<f32>, b2: Vec<f32>) -> Result<Self> {
        let hidden = b1.len();
        let output = b2.len();
        if hidden == 0 || output == 0 {
            return Err(Error::ShapeMismatch("empty bias tensor".into()));
        }
        if !w1.len().is_multiple_of(hidden) {
            return Err(Error::ShapeMismatch(format!(
                "w1 length {} is not a multiple of hidden dim {hidden}",
                w1.len()
            )));
        }
        let input = w1.len() / hidden;
        if input == 0 {
            return Err(Error::ShapeMismatch("empty w1 tensor".into()));
        }
        if w2.len() != hidden * output {
            return Err(Error::ShapeMismatch(format!(
                "w2 length {} does not match {hidden}x{output}",
                w2.len()
            )));
        }
        Ok(Self {
            w1: Matrix::from_vec(input, hidden, w1),
            b1,
            w2: Matrix::from_vec(hidden, output, w2),
            b2,
        })
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.w1.rows(), self.w1.cols(), self.w2.cols())
    }

    pub fn w1(&self) -> &Matrix {
        &self.w1
    }

    pub fn b1(&self) -> &[f32] {
        &self.b1
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    pub fn b2(&self) -> &[f32] {
        &self.b2
    }

    /// The four parameter arrays in serialization order (w1, b1, w2, b2).
    pub fn blocks(&self) -> [&[f32]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    pub(crate) fn blocks_mut(&mut self) -> [&mut [f32]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Exact bit-pattern equality, stricter than `==` (distinguishes -0.0).
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.dims() == other.dims()
            && self
                .blocks()
                .iter()
                .zip(other.blocks().iter())
                .all(|(a, b)| {
                    a.iter()
                        .zip(b.iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
                })
    }
}

/// Loss gradients, shape-congruent with the parameters they differentiate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dw1: Matrix,
    pub db1: Vec<f32>,
    pub dw2: Matrix,
    pub db2: Vec<f32>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        let d = params.dims();
        Self {
            dw1: Matrix::zeros(d.input, d.hidden),
            db1: vec![0.0; d.hidden],
            dw2: Matrix::zeros(d.hidden, d.output),
            db2: vec![0.0; d.output],
        }
    }

    pub fn blocks(&self) -> [&[f32]; 4] {
        [self.dw1.as_slice(), &self.db1, self.dw2.as_slice(), &self.db2]
    }

    #[cfg(test)]
    pub(crate) fn blocks_mut(&mut self) -> [&mut [f32]; 4] {
        [
            self.dw1.as_mut_slice(),
            &mut self.db1,
            self.dw2.as_mut_slice(),
            &mut self.db2,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Optimizer and local-training knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub local_epochs: usize,
    pub batch_size: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            local_epochs: 5,
            batch_size: 32,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta1 must be in (0,1), got {}",
                self.beta1
            )));
        }
        if !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta2 must be in (0,1), got {}",
                self.beta2
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.local_epochs == 0 {
            return Err(Error::InvalidArgument("local_epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Initializes parameters with uniform fan-in scaling, `U(-sqrt(6/fan_in),
/// +sqrt(6/fan_in))`, biases zero. Identical `(seed, dims)` yield
/// bit-identical parameters.
pub fn init_params(seed: u64, dims: Dims) -> Result<ModelParams> {
    dims.validate()?;
    let mut rng = seeded_rng(seed);
    let mut params = ModelParams::zeros(dims)?;

    let limit1 = (6.0 / dims.input as f32).sqrt();
    for w in params.w1.as_mut_slice() {
        *w = rng.random_range(-limit1..limit1);
    }
    let limit2 = (6.0 / dims.hidden as f32).sqrt();
    for w in params.w2.as_mut_slice() {
        *w = rng.random_range(-limit2..limit2);
    }
    Ok(params)
}
