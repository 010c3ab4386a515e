//! Data re-uploading variational circuit.
//!
//! One block is an Rx angle embedding of the input on every qubit followed by
//! `layers_per_block` entangling layers. An entangling layer is a general
//! rotation on every qubit followed by a CNOT ring (or open chain). The
//! embedding is repeated at the start of every block.
//!
//! Trainable angles are stored flat, indexed `(block, layer, qubit, euler)`
//! with `euler` ordered `phi, theta, omega` as in [`Gate::Rot`].

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::qsim::{self, Gate, Statevector, MAX_QUBITS};
use crate::{Error, Result};

/// CNOT topology of an entangling layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Entangler {
    /// `CNOT(i, i+1 mod n)` for every qubit.
    #[default]
    Ring,
    /// `CNOT(i, i+1)` for `i < n-1`.
    Chain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub n_qubits: usize,
    pub n_blocks: usize,
    pub layers_per_block: usize,
    #[serde(default)]
    pub entangler: Entangler,
}

impl AnsatzConfig {
    /// Ring entangler with one layer per block.
    pub fn new(n_qubits: usize, n_blocks: usize) -> Result<Self> {
        Self::with_layers(n_qubits, n_blocks, 1)
    }

    pub fn with_layers(n_qubits: usize, n_blocks: usize, layers_per_block: usize) -> Result<Self> {
        let cfg = AnsatzConfig {
            n_qubits,
            n_blocks,
            layers_per_block,
            entangler: Entangler::Ring,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_QUBITS).contains(&self.n_qubits) {
            return Err(Error::Config(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {}",
                self.n_qubits
            )));
        }
        if self.n_blocks == 0 || self.layers_per_block == 0 {
            return Err(Error::Config(format!(
                "blocks and layers must be >= 1, got blocks={} layers={}",
                self.n_blocks, self.layers_per_block
            )));
        }
        Ok(())
    }

    /// `blocks * layers * qubits * 3`.
    pub fn param_count(&self) -> usize {
        self.n_blocks * self.layers_per_block * self.n_qubits * 3
    }

    pub fn param_index(&self, block: usize, layer: usize, qubit: usize, euler: usize) -> usize {
        ((block * self.layers_per_block + layer) * self.n_qubits + qubit) * 3 + euler
    }

    /// Control/target pairs of one entangling layer.
    pub fn cnot_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_qubits;
        match (n, self.entangler) {
            (1, _) => Vec::new(),
            (2, _) => vec![(0, 1)],
            (_, Entangler::Ring) => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            (_, Entangler::Chain) => (0..n - 1).map(|i| (i, i + 1)).collect(),
        }
    }

    /// Number of gates emitted by [`build_circuit`].
    pub fn gate_count(&self) -> usize {
        let layer = self.n_qubits + self.cnot_pairs().len();
        self.n_blocks * (self.n_qubits + self.layers_per_block * layer)
    }
}

/// How circuit derivatives are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Two shifted circuit evaluations per angle occurrence.
    ParameterShift,
    /// One forward pass and one reverse sweep for a weighted sum of `<Z_q>`.
    #[default]
    Adjoint,
}

/// Where a circuit angle comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AngleSource {
    Param(usize),
    Input(usize),
}

#[derive(Clone, Copy, Debug)]
struct Occurrence {
    gate: usize,
    slot: usize,
    source: AngleSource,
}

fn check_params(cfg: &AnsatzConfig, params: &[f64]) -> Result<()> {
    cfg.validate()?;
    if params.len() != cfg.param_count() {
        return Err(Error::Dimension {
            what: "quantum parameters",
            expected: cfg.param_count(),
            actual: params.len(),
        });
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("quantum parameters".into()));
    }
    Ok(())
}

/// Zero-pads `x` to `n_qubits` embedding angles.
fn padded_input(cfg: &AnsatzConfig, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() > cfg.n_qubits {
        return Err(Error::Dimension {
            what: "quantum input",
            expected: cfg.n_qubits,
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quantum input".into()));
    }
    let mut padded = x.to_vec();
    padded.resize(cfg.n_qubits, 0.0);
    Ok(padded)
}

fn build_tagged(cfg: &AnsatzConfig, x: &[f64], params: &[f64]) -> (Vec<Gate>, Vec<Occurrence>) {
    let n = cfg.n_qubits;
    let pairs = cfg.cnot_pairs();
    let mut gates = Vec::with_capacity(cfg.gate_count());
    let mut occurrences = Vec::with_capacity(cfg.n_blocks * n + params.len());
    for block in 0..cfg.n_blocks {
        for (qubit, &theta) in x.iter().enumerate() {
            occurrences.push(Occurrence {
                gate: gates.len(),
                slot: 0,
                source: AngleSource::Input(qubit),
            });
            gates.push(Gate::Rx {
                target: qubit,
                theta,
            });
        }
        for layer in 0..cfg.layers_per_block {
            for qubit in 0..n {
                let base = cfg.param_index(block, layer, qubit, 0);
                for slot in 0..3 {
                    occurrences.push(Occurrence {
                        gate: gates.len(),
                        slot,
                        source: AngleSource::Param(base + slot),
                    });
                }
                gates.push(Gate::Rot {
                    target: qubit,
                    phi: params[base],
                    theta: params[base + 1],
                    omega: params[base + 2],
                });
            }
            gates.extend(
                pairs
                    .iter()
                    .map(|&(control, target)| Gate::Cnot { control, target }),
            );
        }
    }
    (gates, occurrences)
}

/// Ordered gate list for input `x` (zero-padded to `n_qubits`) and trainable `params`.
pub fn build_circuit(cfg: &AnsatzConfig, x: &[f64], params: &[f64]) -> Result<Vec<Gate>> {
    check_params(cfg, params)?;
    let x = padded_input(cfg, x)?;
    Ok(build_tagged(cfg, &x, params).0)
}

/// The embedding layer alone, as applied at the start of every block.
pub fn embedding_gates(cfg: &AnsatzConfig, x: &[f64]) -> Result<Vec<Gate>> {
    let x = padded_input(cfg, x)?;
    Ok(x.iter()
        .enumerate()
        .map(|(target, &theta)| Gate::Rx { target, theta })
        .collect())
}

fn run(state: &mut Statevector, gates: &[Gate]) -> Vec<f64> {
    state.reset();
    for gate in gates {
        state.apply_unchecked(gate);
    }
    state.expectation_z_all()
}

/// `<Z_q>` for every qubit after running the circuit on `|0...0>`.
pub fn forward(cfg: &AnsatzConfig, x: &[f64], params: &[f64]) -> Result<Vec<f64>> {
    Ok(forward_state(cfg, x, params)?.expectation_z_all())
}

/// Final state of the circuit started from `|0...0>`.
pub fn forward_state(cfg: &AnsatzConfig, x: &[f64], params: &[f64]) -> Result<Statevector> {
    let gates = build_circuit(cfg, x, params)?;
    let mut state = Statevector::zero(cfg.n_qubits)?;
    run(&mut state, &gates);
    Ok(state)
}

/// Full Jacobian of the expectations. Rows are indexed by measured qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    /// `n_qubits x param_count`
    pub d_params: Vec<Vec<f64>>,
    /// `n_qubits x n_qubits`; input `i` collects every block's embedding.
    pub d_inputs: Vec<Vec<f64>>,
}

/// Parameter-shift Jacobian.
///
/// Each angle occurrence is evaluated at `+pi/2` and `-pi/2`; occurrences
/// sharing a source (the re-uploaded inputs) are summed.
pub fn gradients(cfg: &AnsatzConfig, x: &[f64], params: &[f64]) -> Result<Jacobian> {
    check_params(cfg, params)?;
    let x = padded_input(cfg, x)?;
    let n = cfg.n_qubits;
    let (mut gates, occurrences) = build_tagged(cfg, &x, params);
    let mut state = Statevector::zero(n)?;
    let mut jac = Jacobian {
        d_params: vec![vec![0.0; params.len()]; n],
        d_inputs: vec![vec![0.0; n]; n],
    };
    for occ in occurrences {
        let original = gates[occ.gate];
        gates[occ.gate] = original.shifted(occ.slot, FRAC_PI_2);
        let plus = run(&mut state, &gates);
        gates[occ.gate] = original.shifted(occ.slot, -FRAC_PI_2);
        let minus = run(&mut state, &gates);
        gates[occ.gate] = original;

        for q in 0..n {
            let d = 0.5 * (plus[q] - minus[q]);
            match occ.source {
                AngleSource::Param(j) => jac.d_params[q][j] += d,
                AngleSource::Input(i) => jac.d_inputs[q][i] += d,
            }
        }
    }
    Ok(jac)
}

/// Expectations together with the gradient of `sum_q upstream[q] * <Z_q>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pullback {
    pub expectations: Vec<f64>,
    pub d_params: Vec<f64>,
    /// Same length as the padded input (`n_qubits`).
    pub d_inputs: Vec<f64>,
}

/// Vector-Jacobian product through the circuit.
pub fn vjp(
    cfg: &AnsatzConfig,
    x: &[f64],
    params: &[f64],
    upstream: &[f64],
    method: GradientMethod,
) -> Result<Pullback> {
    check_params(cfg, params)?;
    check_upstream(cfg, upstream)?;
    match method {
        GradientMethod::ParameterShift => {
            let expectations = forward(cfg, x, params)?;
            let jac = gradients(cfg, x, params)?;
            let contract = |rows: &[Vec<f64>], width: usize| -> Vec<f64> {
                (0..width)
                    .map(|j| rows.iter().zip(upstream).map(|(row, g)| row[j] * g).sum())
                    .collect()
            };
            Ok(Pullback {
                expectations,
                d_params: contract(&jac.d_params, params.len()),
                d_inputs: contract(&jac.d_inputs, cfg.n_qubits),
            })
        }
        GradientMethod::Adjoint => {
            let x = padded_input(cfg, x)?;
            let (gates, occurrences) = build_tagged(cfg, &x, params);
            let mut psi = Statevector::zero(cfg.n_qubits)?;
            run(&mut psi, &gates);
            Ok(adjoint(
                cfg,
                &gates,
                &occurrences,
                psi,
                upstream,
                params.len(),
            ))
        }
    }
}

fn check_upstream(cfg: &AnsatzConfig, upstream: &[f64]) -> Result<()> {
    if upstream.len() != cfg.n_qubits {
        return Err(Error::Dimension {
            what: "upstream gradient",
            expected: cfg.n_qubits,
            actual: upstream.len(),
        });
    }
    if upstream.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(
            "upstream gradient of the quantum layer".into(),
        ));
    }
    Ok(())
}

/// Adjoint-method [`vjp`] reusing a final state from [`forward_state`] with
/// the same `x` and `params`.
pub fn vjp_from_state(
    cfg: &AnsatzConfig,
    x: &[f64],
    params: &[f64],
    final_state: Statevector,
    upstream: &[f64],
) -> Result<Pullback> {
    check_params(cfg, params)?;
    check_upstream(cfg, upstream)?;
    if final_state.n_qubits() != cfg.n_qubits {
        return Err(Error::Dimension {
            what: "final state qubits",
            expected: cfg.n_qubits,
            actual: final_state.n_qubits(),
        });
    }
    let x = padded_input(cfg, x)?;
    let (gates, occurrences) = build_tagged(cfg, &x, params);
    Ok(adjoint(
        cfg,
        &gates,
        &occurrences,
        final_state,
        upstream,
        params.len(),
    ))
}

fn adjoint(
    cfg: &AnsatzConfig,
    gates: &[Gate],
    occurrences: &[Occurrence],
    mut psi: Statevector,
    upstream: &[f64],
    n_params: usize,
) -> Pullback {
    let expectations = psi.expectation_z_all();
    let mut lambda = psi.clone();
    lambda.apply_z_sum(upstream);

    let mut d_params = vec![0.0; n_params];
    let mut d_inputs = vec![0.0; cfg.n_qubits];
    let mut pending = occurrences.iter().rev();
    for (index, gate) in gates.iter().enumerate().rev() {
        let derivatives = gate.angle_derivatives();
        if derivatives.is_empty() {
            psi.apply_unchecked(gate);
            lambda.apply_unchecked(gate);
            continue;
        }
        // psi before the gate, lambda after it:
        // dF/da = 2 Re <lambda| dU/da |psi>.
        let inverse = gate.inverse();
        psi.apply_unchecked(&inverse);
        let s = psi.reduced_overlap(&lambda, gate.target());
        for (slot, d) in derivatives.iter().enumerate().rev() {
            let occ = pending.next().expect("one occurrence per angle");
            debug_assert!(occ.gate == index && occ.slot == slot);
            let value = 2.0 * qsim::contract(d, &s).re;
            match occ.source {
                AngleSource::Param(j) => d_params[j] += value,
                AngleSource::Input(i) => d_inputs[i] += value,
            }
        }
        lambda.apply_unchecked(&inverse);
    }
    Pullback {
        expectations,
        d_params,
        d_inputs,
    }
}
