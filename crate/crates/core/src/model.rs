//! The hybrid classifier and its classical counterpart.
//!
//! Both share the same scaffold:
//!
//! ```text
//! features -> master (21->21, ReLU) -> dropout -> feeding (21->n, ReLU) -> dropout
//!          -> head -> decision (n->1, sigmoid)
//! ```
//!
//! In the hybrid model the head is the re-uploading circuit, fed the feeding
//! activations as Rx angles and returning `<Z_q>` for each qubit. In the
//! classical counterpart the head is an `n -> n` tanh layer.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{self, AnsatzConfig, GradientMethod};
use crate::nn::{self, Activation, Dense, DenseOutput, Dropout, Mode};
use crate::qsim::Statevector;
use crate::{Error, Result};

/// Width of the feature vector and of the master layer.
pub const N_FEATURES: usize = 21;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Classical layers, then the variational circuit, then a sigmoid neuron.
    Fh,
    /// Same scaffold with a tanh dense layer in place of the circuit.
    Cc,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Fh => "fh",
            ModelKind::Cc => "cc",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fh" => Ok(ModelKind::Fh),
            "cc" => Ok(ModelKind::Cc),
            other => Err(Error::Config(format!(
                "unknown model kind {other:?} (expected fh or cc)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// For the classical counterpart only `n_qubits` is used (surrogate width).
    pub ansatz: AnsatzConfig,
    pub dropout: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumLayer {
    pub ansatz: AnsatzConfig,
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Head {
    Quantum(QuantumLayer),
    Surrogate(Dense),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub master: Dense,
    pub dropout1: Dropout,
    pub feeding: Dense,
    pub dropout2: Dropout,
    pub head: Head,
    pub decision: Dense,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input: Vec<f64>,
    master: DenseOutput,
    mask1: Vec<f64>,
    hidden1: Vec<f64>,
    feeding: DenseOutput,
    mask2: Vec<f64>,
    hidden2: Vec<f64>,
    surrogate: Option<DenseOutput>,
    quantum_state: Option<Statevector>,
    head_out: Vec<f64>,
    decision: DenseOutput,
    pub probability: f64,
}

impl ForwardCache {
    /// Output of the quantum layer (or surrogate) seen by the decision neuron.
    pub fn head_output(&self) -> &[f64] {
        &self.head_out
    }

    /// Angles fed to the circuit.
    pub fn quantum_input(&self) -> &[f64] {
        &self.hidden2
    }
}

/// Gradients for every trainable tensor, in [`Model::tensors`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<(&'static str, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Gradients {
            tensors: model
                .tensors()
                .into_iter()
                .map(|(name, t)| (name, vec![0.0; t.len()]))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((_, acc), (_, g)) in self.tensors.iter_mut().zip(&other.tensors) {
            nn::add_into(acc, g);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in &mut self.tensors {
            t.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|(_, t)| t.iter().copied())
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.tensors
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| t.as_slice())
    }

    /// Zeroes the circuit-parameter gradient.
    pub fn freeze_quantum(&mut self) {
        for (name, t) in &mut self.tensors {
            if *name == QUANTUM_PARAMS {
                t.fill(0.0);
            }
        }
    }
}

const QUANTUM_PARAMS: &str = "quantum.params";

/// Trainable scalar counts per block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub master: usize,
    pub feeding: usize,
    pub quantum: usize,
    pub surrogate: usize,
    pub decision: usize,
}

impl ParamCount {
    pub fn classical(&self) -> usize {
        self.master + self.feeding + self.surrogate + self.decision
    }

    pub fn total(&self) -> usize {
        self.classical() + self.quantum
    }
}

fn check_finite(values: &[f64], layer: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{layer} output")));
    }
    Ok(())
}

impl Model {
    /// Randomly initialised model. Circuit angles are uniform in `[0, 2pi)`.
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Self> {
        spec.ansatz.validate()?;
        let n = spec.ansatz.n_qubits;
        let master = Dense::init(N_FEATURES, N_FEATURES, Activation::Relu, rng);
        let feeding = Dense::init(N_FEATURES, n, Activation::Relu, rng);
        let head = match spec.kind {
            ModelKind::Fh => Head::Quantum(QuantumLayer {
                ansatz: spec.ansatz,
                params: (0..spec.ansatz.param_count())
                    .map(|_| rng.random_range(0.0..TAU))
                    .collect(),
            }),
            ModelKind::Cc => Head::Surrogate(Dense::init(n, n, Activation::Tanh, rng)),
        };
        let decision = Dense::init(n, 1, Activation::Sigmoid, rng);
        Ok(Model {
            master,
            dropout1: Dropout::new(spec.dropout)?,
            feeding,
            dropout2: Dropout::new(spec.dropout)?,
            head,
            decision,
        })
    }

    /// All weights, biases and circuit angles zero.
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.ansatz.validate()?;
        let n = spec.ansatz.n_qubits;
        let head = match spec.kind {
            ModelKind::Fh => Head::Quantum(QuantumLayer {
                ansatz: spec.ansatz,
                params: vec![0.0; spec.ansatz.param_count()],
            }),
            ModelKind::Cc => Head::Surrogate(Dense::zeros(n, n, Activation::Tanh)),
        };
        Ok(Model {
            master: Dense::zeros(N_FEATURES, N_FEATURES, Activation::Relu),
            dropout1: Dropout::new(spec.dropout)?,
            feeding: Dense::zeros(N_FEATURES, n, Activation::Relu),
            dropout2: Dropout::new(spec.dropout)?,
            head,
            decision: Dense::zeros(n, 1, Activation::Sigmoid),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self.head {
            Head::Quantum(_) => ModelKind::Fh,
            Head::Surrogate(_) => ModelKind::Cc,
        }
    }

    pub fn width(&self) -> usize {
        self.feeding.out_dim()
    }

    /// Shape checks across layers; used after deserialisation.
    pub fn validate(&self) -> Result<()> {
        for layer in [&self.master, &self.feeding, &self.decision] {
            layer.validate()?;
        }
        let n = self.width();
        let dims = [
            ("master input", N_FEATURES, self.master.in_dim()),
            ("master output", N_FEATURES, self.master.out_dim()),
            ("feeding input", N_FEATURES, self.feeding.in_dim()),
            ("decision input", n, self.decision.in_dim()),
            ("decision output", 1, self.decision.out_dim()),
        ];
        for (what, expected, actual) in dims {
            if expected != actual {
                return Err(Error::Dimension {
                    what,
                    expected,
                    actual,
                });
            }
        }
        match &self.head {
            Head::Quantum(q) => {
                q.ansatz.validate()?;
                if q.ansatz.n_qubits != n {
                    return Err(Error::Dimension {
                        what: "qubit count",
                        expected: n,
                        actual: q.ansatz.n_qubits,
                    });
                }
                if q.params.len() != q.ansatz.param_count() {
                    return Err(Error::Dimension {
                        what: "quantum parameters",
                        expected: q.ansatz.param_count(),
                        actual: q.params.len(),
                    });
                }
            }
            Head::Surrogate(s) => {
                s.validate()?;
                if s.in_dim() != n || s.out_dim() != n {
                    return Err(Error::Dimension {
                        what: "surrogate width",
                        expected: n,
                        actual: s.out_dim(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> ParamCount {
        let (quantum, surrogate) = match &self.head {
            Head::Quantum(q) => (q.params.len(), 0),
            Head::Surrogate(s) => (0, s.param_count()),
        };
        ParamCount {
            master: self.master.param_count(),
            feeding: self.feeding.param_count(),
            quantum,
            surrogate,
            decision: self.decision.param_count(),
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = vec![
            ("master.weights", &self.master.weights),
            ("master.biases", &self.master.biases),
            ("feeding.weights", &self.feeding.weights),
            ("feeding.biases", &self.feeding.biases),
        ];
        match &self.head {
            Head::Quantum(q) => out.push((QUANTUM_PARAMS, &q.params)),
            Head::Surrogate(s) => {
                out.push(("surrogate.weights", &s.weights));
                out.push(("surrogate.biases", &s.biases));
            }
        }
        out.push(("decision.weights", &self.decision.weights));
        out.push(("decision.biases", &self.decision.biases));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> = vec![
            ("master.weights", &mut self.master.weights),
            ("master.biases", &mut self.master.biases),
            ("feeding.weights", &mut self.feeding.weights),
            ("feeding.biases", &mut self.feeding.biases),
        ];
        match &mut self.head {
            Head::Quantum(q) => out.push((QUANTUM_PARAMS, &mut q.params)),
            Head::Surrogate(s) => {
                out.push(("surrogate.weights", &mut s.weights));
                out.push(("surrogate.biases", &mut s.biases));
            }
        }
        out.push(("decision.weights", &mut self.decision.weights));
        out.push(("decision.biases", &mut self.decision.biases));
        out
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|(_, t)| t.iter().copied())
            .collect()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.param_count().total();
        if flat.len() != total {
            return Err(Error::Dimension {
                what: "flat parameter vector",
                expected: total,
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        for (_, t) in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    /// Probability of class 1 for a standardized feature row.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        features: &[f64],
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardCache> {
        if features.len() != N_FEATURES {
            return Err(Error::Dimension {
                what: "feature vector",
                expected: N_FEATURES,
                actual: features.len(),
            });
        }
        check_finite(features, "input")?;
        let master = self.master.forward(features)?;
        check_finite(&master.out, "master layer")?;
        let (hidden1, mask1) = self.dropout1.forward(&master.out, mode, rng);
        let feeding = self.feeding.forward(&hidden1)?;
        check_finite(&feeding.out, "feeding layer")?;
        let (hidden2, mask2) = self.dropout2.forward(&feeding.out, mode, rng);

        let (surrogate, quantum_state, head_out) = match &self.head {
            Head::Quantum(q) => {
                let state = ansatz::forward_state(&q.ansatz, &hidden2, &q.params)?;
                let values = state.expectation_z_all();
                (None, Some(state), values)
            }
            Head::Surrogate(s) => {
                let out = s.forward(&hidden2)?;
                let values = out.out.clone();
                (Some(out), None, values)
            }
        };
        check_finite(&head_out, "quantum/surrogate layer")?;
        let decision = self.decision.forward(&head_out)?;
        check_finite(&decision.out, "decision layer")?;
        let probability = decision.out[0].clamp(nn::BCE_EPS, 1.0 - nn::BCE_EPS);
        Ok(ForwardCache {
            input: features.to_vec(),
            master,
            mask1,
            hidden1,
            feeding,
            mask2,
            hidden2,
            surrogate,
            quantum_state,
            head_out,
            decision,
            probability,
        })
    }

    /// Gradients of a loss with derivative `d_prob` with respect to the
    /// output probability, reusing the dropout masks of `cache`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_prob: f64,
        method: GradientMethod,
    ) -> Result<Gradients> {
        if !d_prob.is_finite() {
            return Err(Error::NonFinite("loss gradient".into()));
        }
        let (d_head, g_decision) =
            self.decision
                .backward(&cache.head_out, &cache.decision, &[d_prob])?;

        let mut head_grads: Vec<(&'static str, Vec<f64>)> = Vec::with_capacity(2);
        let d_hidden2 = match &self.head {
            Head::Quantum(q) => {
                let pull = match (&cache.quantum_state, method) {
                    (Some(state), GradientMethod::Adjoint) => ansatz::vjp_from_state(
                        &q.ansatz,
                        &cache.hidden2,
                        &q.params,
                        state.clone(),
                        &d_head,
                    )?,
                    _ => ansatz::vjp(&q.ansatz, &cache.hidden2, &q.params, &d_head, method)?,
                };
                head_grads.push((QUANTUM_PARAMS, pull.d_params));
                pull.d_inputs
            }
            Head::Surrogate(s) => {
                let out = cache
                    .surrogate
                    .as_ref()
                    .ok_or_else(|| Error::Training("cache lacks surrogate activations".into()))?;
                let (d_in, g) = s.backward(&cache.hidden2, out, &d_head)?;
                head_grads.push(("surrogate.weights", g.d_weights));
                head_grads.push(("surrogate.biases", g.d_biases));
                d_in
            }
        };

        let d_feeding: Vec<f64> = d_hidden2
            .iter()
            .zip(&cache.mask2)
            .map(|(g, m)| g * m)
            .collect();
        let (d_hidden1, g_feeding) =
            self.feeding
                .backward(&cache.hidden1, &cache.feeding, &d_feeding)?;
        let d_master: Vec<f64> = d_hidden1
            .iter()
            .zip(&cache.mask1)
            .map(|(g, m)| g * m)
            .collect();
        let (_, g_master) = self
            .master
            .backward(&cache.input, &cache.master, &d_master)?;

        let mut tensors = vec![
            ("master.weights", g_master.d_weights),
            ("master.biases", g_master.d_biases),
            ("feeding.weights", g_feeding.d_weights),
            ("feeding.biases", g_feeding.d_biases),
        ];
        tensors.extend(head_grads);
        tensors.push(("decision.weights", g_decision.d_weights));
        tensors.push(("decision.biases", g_decision.d_biases));
        Ok(Gradients { tensors })
    }

    /// One SGD update per tensor.
    pub fn apply_sgd(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        let tensors = self.tensors_mut();
        if tensors.len() != grads.tensors.len() {
            return Err(Error::Dimension {
                what: "gradient tensor count",
                expected: tensors.len(),
                actual: grads.tensors.len(),
            });
        }
        for ((name, params), (_, g)) in tensors.into_iter().zip(&grads.tensors) {
            nn::sgd_step(params, g, lr, name)?;
        }
        Ok(())
    }

    /// Dropout-free probability.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        // Eval mode never draws from the generator.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward(features, Mode::Eval, &mut rng)?.probability)
    }
}

/// Model plus the configuration and seed that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub seed: u64,
    pub config: serde_json::Value,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(model: Model, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Checkpoint {
            format_version: CHECKPOINT_VERSION,
            seed,
            config: serde_json::to_value(config)?,
            model,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let checkpoint: Checkpoint = serde_json::from_str(&text)?;
        if checkpoint.format_version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                path.display(),
                checkpoint.format_version
            )));
        }
        checkpoint.model.validate()?;
        Ok(checkpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ModelKind, n: usize, b: usize) -> ModelSpec {
        ModelSpec {
            kind,
            ansatz: AnsatzConfig::new(n, b).unwrap(),
            dropout: 0.1,
        }
    }

    fn features(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..N_FEATURES)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect()
    }

    #[test]
    fn zero_models_predict_one_half() {
        for kind in [ModelKind::Fh, ModelKind::Cc] {
            let model = Model::zeros(&spec(kind, 4, 2)).unwrap();
            let cache = model
                .forward(&features(1), Mode::Train, &mut ChaCha8Rng::seed_from_u64(0))
                .unwrap();
            assert_eq!(cache.probability, 0.5);
            if kind == ModelKind::Fh {
                assert_eq!(cache.head_output(), &[1.0; 4]);
            }
        }
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = Model::init(&spec(ModelKind::Fh, 4, 2), &mut rng).unwrap();
        let x = features(2);
        let a = model.predict(&x).unwrap();
        let b = model.predict(&x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn param_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fh = Model::init(&spec(ModelKind::Fh, 6, 1), &mut rng).unwrap();
        let counts = fh.param_count();
        assert_eq!(counts.quantum, 18);
        assert_eq!(counts.master, 462);
        assert_eq!(counts.feeding, 21 * 6 + 6);
        assert_eq!(counts.decision, 7);
        assert_eq!(counts.total(), fh.params_flat().len());

        let cc = Model::init(&spec(ModelKind::Cc, 6, 1), &mut rng).unwrap();
        assert_eq!(cc.param_count().surrogate, 42);
        assert_eq!(cc.param_count().quantum, 0);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in [ModelKind::Fh, ModelKind::Cc] {
            let model = Model::init(&spec(kind, 3, 1), &mut rng).unwrap();
            let cache = model.forward(&features(4), Mode::Train, &mut rng).unwrap();
            let grads = model
                .backward(&cache, 0.0, GradientMethod::Adjoint)
                .unwrap();
            assert!(grads.flat().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn freezing_quantum_leaves_classical_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = Model::init(&spec(ModelKind::Fh, 3, 2), &mut rng).unwrap();
        let cache = model.forward(&features(8), Mode::Train, &mut rng).unwrap();
        let full = model
            .backward(&cache, 0.7, GradientMethod::Adjoint)
            .unwrap();
        let mut frozen = full.clone();
        frozen.freeze_quantum();
        assert!(frozen
            .get("quantum.params")
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
        assert!(full
            .get("quantum.params")
            .unwrap()
            .iter()
            .any(|&g| g != 0.0));
        for ((name, a), (_, b)) in full.tensors.iter().zip(&frozen.tensors) {
            if *name != "quantum.params" {
                assert_eq!(a, b, "{name}");
            }
        }
    }

    #[test]
    fn flat_params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = Model::init(&spec(ModelKind::Cc, 5, 1), &mut rng).unwrap();
        let flat = model.params_flat();
        let doubled: Vec<f64> = flat.iter().map(|v| v * 2.0).collect();
        model.set_params_flat(&doubled).unwrap();
        assert_eq!(model.params_flat(), doubled);
        assert!(model.set_params_flat(&flat[1..]).is_err());
    }

    #[test]
    fn wrong_feature_width_is_rejected() {
        let model = Model::zeros(&spec(ModelKind::Cc, 2, 1)).unwrap();
        assert!(model.predict(&[0.0; 20]).is_err());
        let mut bad = vec![0.0; N_FEATURES];
        bad[3] = f64::NAN;
        let err = model.predict(&bad).unwrap_err();
        assert!(err.to_string().contains("input"), "{err}");
    }

    #[test]
    fn sgd_names_offending_tensor() {
        let mut model = Model::zeros(&spec(ModelKind::Fh, 2, 1)).unwrap();
        let mut grads = Gradients::zeros_like(&model);
        grads.tensors[4].1[0] = f64::NAN;
        let err = model.apply_sgd(&grads, 0.1).unwrap_err();
        assert!(err.to_string().contains("quantum.params"), "{err}");
    }
}
