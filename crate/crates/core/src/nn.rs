//! Dense layers, dropout, binary cross-entropy and plain SGD.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_SLOPE: f64 = 0.01;

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Identity,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z` given the activation value `a`.
    /// ReLU'(0) is taken as 0.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer computing `activation(W x + b)`.
///
/// `weights` is row-major `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    in_dim: usize,
    out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

/// Forward values kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOutput {
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseGrads {
    pub d_weights: Vec<f64>,
    pub d_biases: Vec<f64>,
}

impl DenseGrads {
    pub fn zeros_like(layer: &Dense) -> Self {
        DenseGrads {
            d_weights: vec![0.0; layer.weights.len()],
            d_biases: vec![0.0; layer.biases.len()],
        }
    }

    pub fn add_assign(&mut self, other: &DenseGrads) {
        add_into(&mut self.d_weights, &other.d_weights);
        add_into(&mut self.d_biases, &other.d_biases);
    }

    pub fn scale(&mut self, factor: f64) {
        self.d_weights.iter_mut().for_each(|g| *g *= factor);
        self.d_biases.iter_mut().for_each(|g| *g *= factor);
    }
}

pub(crate) fn add_into(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Dense {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn from_parts(
        in_dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let out_dim = biases.len();
        if weights.len() != in_dim * out_dim {
            return Err(Error::Dimension {
                what: "dense weights",
                expected: in_dim * out_dim,
                actual: weights.len(),
            });
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense layer parameters".into()));
        }
        Ok(Dense {
            in_dim,
            out_dim,
            weights,
            biases,
            activation,
        })
    }

    /// He-uniform weights for (leaky) ReLU, Xavier-uniform otherwise; zero biases.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = match activation {
            Activation::Relu | Activation::LeakyRelu => (6.0 / in_dim as f64).sqrt(),
            _ => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        let mut layer = Dense::zeros(in_dim, out_dim, activation);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Consistency check for layers built through public fields or deserialised.
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.in_dim * self.out_dim || self.biases.len() != self.out_dim {
            return Err(Error::Dimension {
                what: "dense layer shape",
                expected: self.in_dim * self.out_dim + self.out_dim,
                actual: self.weights.len() + self.biases.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<DenseOutput> {
        if input.len() != self.in_dim {
            return Err(Error::Dimension {
                what: "dense input",
                expected: self.in_dim,
                actual: input.len(),
            });
        }
        let pre: Vec<f64> = self
            .weights
            .chunks_exact(self.in_dim.max(1))
            .take(self.out_dim)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect();
        let out = pre.iter().map(|&z| self.activation.apply(z)).collect();
        Ok(DenseOutput { pre, out })
    }

    /// Returns `(d_input, parameter gradients)` for upstream gradient `d_out`.
    pub fn backward(
        &self,
        input: &[f64],
        cache: &DenseOutput,
        d_out: &[f64],
    ) -> Result<(Vec<f64>, DenseGrads)> {
        for (what, expected, actual) in [
            ("dense backward input", self.in_dim, input.len()),
            ("dense backward upstream", self.out_dim, d_out.len()),
            ("dense backward cache", self.out_dim, cache.pre.len()),
        ] {
            if expected != actual {
                return Err(Error::Dimension {
                    what,
                    expected,
                    actual,
                });
            }
        }
        let d_pre: Vec<f64> = d_out
            .iter()
            .zip(cache.pre.iter().zip(&cache.out))
            .map(|(g, (&z, &a))| g * self.activation.derivative(z, a))
            .collect();
        let mut d_input = vec![0.0; self.in_dim];
        let mut d_weights = vec![0.0; self.weights.len()];
        for (o, &dz) in d_pre.iter().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let d_row = &mut d_weights[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                d_row[i] = dz * input[i];
                d_input[i] += dz * row[i];
            }
        }
        Ok((
            d_input,
            DenseGrads {
                d_weights,
                d_biases: d_pre,
            },
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` in training,
/// and the layer is the identity in evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Dropout { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Returns `(output, mask)` where `mask[i]` is the factor applied to `input[i]`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        mode: Mode,
        rng: &mut R,
    ) -> (Vec<f64>, Vec<f64>) {
        if mode == Mode::Eval || self.rate == 0.0 {
            return (input.to_vec(), vec![1.0; input.len()]);
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = input
            .iter()
            .map(|_| {
                if rng.random::<f64>() < self.rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect();
        let out = input.iter().zip(&mask).map(|(x, m)| x * m).collect();
        (out, mask)
    }
}

/// Binary cross-entropy and its derivative with respect to `p`, both taken at
/// the clamped probability.
pub fn bce_loss(p: f64, label: u8) -> Result<(f64, f64)> {
    if label > 1 {
        return Err(Error::Data(format!("label must be 0 or 1, got {label}")));
    }
    if p.is_nan() {
        return Err(Error::NonFinite("predicted probability".into()));
    }
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    let y = f64::from(label);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let grad = (p - y) / (p * (1.0 - p));
    Ok((loss, grad))
}

/// `params -= lr * grads`. `block` names the tensor in error messages.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64, block: &str) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Dimension {
            what: "sgd gradient",
            expected: params.len(),
            actual: grads.len(),
        });
    }
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::Config(format!(
            "learning rate must be finite and >= 0, got {lr}"
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of {block}[{i}]")));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize, activation: Activation) -> Dense {
        let mut layer = Dense::zeros(n, n, activation);
        for i in 0..n {
            layer.weights[i * n + i] = 1.0;
        }
        layer
    }

    #[test]
    fn forward_activations() {
        let out = identity(2, Activation::Relu)
            .forward(&[-1.0, 2.0])
            .unwrap()
            .out;
        assert_eq!(out, vec![0.0, 2.0]);

        let out = Dense::zeros(3, 2, Activation::Sigmoid)
            .forward(&[4.0, -1.0, 9.0])
            .unwrap()
            .out;
        assert_eq!(out, vec![0.5, 0.5]);

        let out = identity(1, Activation::LeakyRelu)
            .forward(&[-1.0])
            .unwrap()
            .out;
        assert_eq!(out, vec![-0.01]);

        assert!(identity(2, Activation::Relu).forward(&[1.0]).is_err());
    }

    #[test]
    fn identity_backward_passes_gradient_through() {
        let layer = identity(3, Activation::Identity);
        let input = [0.3, -0.2, 0.9];
        let cache = layer.forward(&input).unwrap();
        let (d_input, _) = layer.backward(&input, &cache, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(d_input, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn dead_relu_units_block_gradient() {
        let layer = identity(2, Activation::Relu);
        let input = [-1.0, -3.0];
        let cache = layer.forward(&input).unwrap();
        let (d_input, grads) = layer.backward(&input, &cache, &[1.0, 1.0]).unwrap();
        assert_eq!(d_input, vec![0.0, 0.0]);
        assert!(grads.d_weights.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn relu_subgradient_at_zero() {
        let layer = Dense::zeros(1, 1, Activation::Relu);
        let cache = layer.forward(&[1.0]).unwrap();
        let (d_input, grads) = layer.backward(&[1.0], &cache, &[1.0]).unwrap();
        assert_eq!(d_input, vec![0.0]);
        assert_eq!(grads.d_biases, vec![0.0]);
    }

    #[test]
    fn init_respects_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let relu = Dense::init(21, 21, Activation::Relu, &mut rng);
        let limit = (6.0f64 / 21.0).sqrt();
        assert!(relu.weights.iter().all(|w| w.abs() <= limit));
        assert!(relu.biases.iter().all(|&b| b == 0.0));
        let sig = Dense::init(6, 1, Activation::Sigmoid, &mut rng);
        let limit = (6.0f64 / 7.0).sqrt();
        assert!(sig.weights.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = [1.0, -2.0, 3.5];
        let (out, mask) = Dropout::new(0.0)
            .unwrap()
            .forward(&input, Mode::Train, &mut rng);
        assert_eq!(out, input);
        assert_eq!(mask, vec![1.0; 3]);

        let (out, _) = Dropout::new(0.1)
            .unwrap()
            .forward(&input, Mode::Eval, &mut rng);
        for (a, b) in out.iter().zip(&input) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
    }

    #[test]
    fn dropout_preserves_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layer = Dropout::new(0.1).unwrap();
        let trials = 100_000;
        let mut sum = 0.0;
        let mut dropped = 0;
        for _ in 0..trials {
            let (out, mask) = layer.forward(&[2.0], Mode::Train, &mut rng);
            sum += out[0];
            dropped += (mask[0] == 0.0) as usize;
        }
        let ratio = sum / trials as f64 / 2.0;
        assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
        let rate = dropped as f64 / trials as f64;
        assert!((rate - 0.1).abs() < 0.01, "{rate}");
    }

    #[test]
    fn bce_values() {
        let (loss, grad) = bce_loss(0.5, 1).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        assert!((grad + 2.0).abs() < 1e-12);
        let (loss, _) = bce_loss(1.0 - 1e-12, 1).unwrap();
        assert!(loss.abs() < 1e-11);
        let (loss, _) = bce_loss(0.9, 0).unwrap();
        assert!((loss - std::f64::consts::LN_10).abs() < 1e-12);
        // clamped at the edges
        assert!(bce_loss(0.0, 1).unwrap().0.is_finite());
        assert!(bce_loss(0.3, 2).is_err());
    }

    #[test]
    fn bce_is_nonnegative_and_zero_only_at_label() {
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            for y in [0u8, 1] {
                let (loss, _) = bce_loss(p, y).unwrap();
                assert!(loss >= 0.0);
                if loss < 1e-11 {
                    assert_eq!(p, f64::from(y));
                }
            }
        }
    }

    #[test]
    fn sgd_steps() {
        let mut p = [1.0];
        sgd_step(&mut p, &[2.0], 0.5, "w").unwrap();
        assert_eq!(p, [0.0]);

        let mut p = [0.3, -0.7];
        sgd_step(&mut p, &[0.0, 0.0], 0.1, "w").unwrap();
        assert_eq!(p, [0.3, -0.7]);

        // f(w) = w^2, f'(1) = 2
        let mut w = [1.0];
        let grad = [2.0 * w[0]];
        sgd_step(&mut w, &grad, 0.001, "w").unwrap();
        assert!((w[0] - 0.998).abs() < 1e-15);

        let err = sgd_step(&mut [0.0, 0.0], &[0.0, f64::NAN], 0.1, "decision.weights").unwrap_err();
        assert!(err.to_string().contains("decision.weights[1]"), "{err}");
    }
}
