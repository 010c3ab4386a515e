//! Independent reference implementations shared by the integration tests
//! and the acceptance suite.

#![allow(dead_code)]

use num_complex::Complex64;
use qcredit::qsim::Gate;
use rand::Rng;

pub type Dense = Vec<Vec<Complex64>>;

const O: Complex64 = Complex64::new(0.0, 0.0);
const I1: Complex64 = Complex64::new(1.0, 0.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> Dense {
    (0..dim)
        .map(|r| (0..dim).map(|k| if r == k { I1 } else { O }).collect())
        .collect()
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![O; ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut out = vec![vec![O; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == O {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

/// `exp(-i angle P / 2) = cos(angle/2) I - i sin(angle/2) P`.
fn pauli_rotation(pauli: &Dense, angle: f64) -> Dense {
    let (s, co) = (angle / 2.0).sin_cos();
    let mut m = identity(2);
    for r in 0..2 {
        for k in 0..2 {
            m[r][k] = m[r][k] * co + c(0.0, -s) * pauli[r][k];
        }
    }
    m
}

pub fn pauli_x() -> Dense {
    vec![vec![O, I1], vec![I1, O]]
}

pub fn pauli_y() -> Dense {
    vec![vec![O, c(0.0, -1.0)], vec![c(0.0, 1.0), O]]
}

pub fn pauli_z() -> Dense {
    vec![vec![I1, O], vec![O, -I1]]
}

/// 2x2 matrix of a single-qubit gate, built from Pauli exponentials.
pub fn local_matrix(gate: &Gate) -> Dense {
    match *gate {
        Gate::Rx { theta, .. } => pauli_rotation(&pauli_x(), theta),
        Gate::Ry { theta, .. } => pauli_rotation(&pauli_y(), theta),
        Gate::Rz { theta, .. } => pauli_rotation(&pauli_z(), theta),
        Gate::Rot {
            phi, theta, omega, ..
        } => matmul(
            &pauli_rotation(&pauli_z(), omega),
            &matmul(
                &pauli_rotation(&pauli_y(), theta),
                &pauli_rotation(&pauli_z(), phi),
            ),
        ),
        Gate::Cnot { .. } => panic!("not a single-qubit gate"),
    }
}

/// `factors[q]` acts on qubit `q`; qubit 0 is the least significant index bit,
/// so it is the rightmost Kronecker factor.
pub fn kron_all(factors: &[Dense]) -> Dense {
    let mut out = vec![vec![I1]];
    for f in factors.iter().rev() {
        out = kron(&out, f);
    }
    out
}

/// Full `2^n x 2^n` unitary of `gate` on an `n`-qubit register.
pub fn full_unitary(gate: &Gate, n: usize) -> Dense {
    match *gate {
        Gate::Cnot { control, target } => {
            let p0 = vec![vec![I1, O], vec![O, O]];
            let p1 = vec![vec![O, O], vec![O, I1]];
            let mut off: Vec<Dense> = vec![identity(2); n];
            let mut on: Vec<Dense> = vec![identity(2); n];
            off[control] = p0;
            on[control] = p1;
            on[target] = pauli_x();
            add(&kron_all(&off), &kron_all(&on))
        }
        _ => {
            let mut factors: Vec<Dense> = vec![identity(2); n];
            factors[gate.target()] = local_matrix(gate);
            kron_all(&factors)
        }
    }
}

/// Final state of `gates` applied to `|0...0>` via dense matrix products.
pub fn oracle_state(gates: &[Gate], n: usize) -> Vec<Complex64> {
    let mut state = vec![O; 1 << n];
    state[0] = I1;
    for g in gates {
        let u = full_unitary(g, n);
        state = u
            .iter()
            .map(|row| row.iter().zip(&state).map(|(a, b)| a * b).sum())
            .collect();
    }
    state
}

pub fn oracle_expectations(gates: &[Gate], n: usize) -> Vec<f64> {
    let state = oracle_state(gates, n);
    (0..n)
        .map(|q| {
            state
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    if k >> q & 1 == 0 {
                        a.norm_sqr()
                    } else {
                        -a.norm_sqr()
                    }
                })
                .sum()
        })
        .collect()
}

pub fn random_gate<R: Rng>(rng: &mut R, n: usize) -> Gate {
    let target = rng.random_range(0..n);
    let angle =
        |rng: &mut R| rng.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI);
    let kind = if n >= 2 {
        rng.random_range(0..5)
    } else {
        rng.random_range(0..4)
    };
    match kind {
        0 => Gate::Rx {
            target,
            theta: angle(rng),
        },
        1 => Gate::Ry {
            target,
            theta: angle(rng),
        },
        2 => Gate::Rz {
            target,
            theta: angle(rng),
        },
        3 => Gate::Rot {
            target,
            phi: angle(rng),
            theta: angle(rng),
            omega: angle(rng),
        },
        _ => {
            let mut control = rng.random_range(0..n - 1);
            if control >= target {
                control += 1;
            }
            Gate::Cnot { control, target }
        }
    }
}

/// AUC by counting every positive/negative pair, ties as one half.
/// Returned as `(twice the favourable pair count, pair count)`.
pub fn pairwise_auc_parts(scores: &[f64], labels: &[u8]) -> (u64, u64) {
    let mut twice = 0u64;
    let mut pairs = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            if si > sj {
                twice += 2;
            } else if si == sj {
                twice += 1;
            }
        }
    }
    (twice, pairs)
}

pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (twice, pairs) = pairwise_auc_parts(scores, labels);
    twice as f64 / (2.0 * pairs as f64)
}

/// Central difference of `f` along every coordinate of `x`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let plus = f(&probe);
            probe[i] = x[i] - h;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Five-point stencil `(8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h`,
/// accurate to `O(h^4)`.
pub fn five_point_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut at = |probe: &mut Vec<f64>, i: usize, offset: f64| {
        probe[i] = x[i] + offset;
        let v = f(probe);
        probe[i] = x[i];
        v
    };
    (0..x.len())
        .map(|i| {
            let near = at(&mut probe, i, h) - at(&mut probe, i, -h);
            let far = at(&mut probe, i, 2.0 * h) - at(&mut probe, i, -2.0 * h);
            (8.0 * near - far) / (12.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
