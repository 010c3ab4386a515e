//! Dense statevector simulation.
//!
//! Qubit `i` is bit `i` of the basis-state index (little-endian), so on two
//! qubits `|q1 q0>` = `|10>` is index 2. Gates are applied in place by
//! iterating over amplitude pairs; no full unitary is ever built.

use num_complex::Complex64;

use crate::{Error, Result};

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// 2x2 complex matrix in row-major order.
pub type Matrix2 = [[Complex64; 2]; 2];

/// A single gate acting on a register.
///
/// `Rot { phi, theta, omega }` is `Rz(omega) Ry(theta) Rz(phi)`, i.e. `Rz(phi)`
/// acts first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Rx {
        target: usize,
        theta: f64,
    },
    Ry {
        target: usize,
        theta: f64,
    },
    Rz {
        target: usize,
        theta: f64,
    },
    Rot {
        target: usize,
        phi: f64,
        theta: f64,
        omega: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

impl Gate {
    pub fn target(&self) -> usize {
        match *self {
            Gate::Rx { target, .. }
            | Gate::Ry { target, .. }
            | Gate::Rz { target, .. }
            | Gate::Rot { target, .. }
            | Gate::Cnot { target, .. } => target,
        }
    }

    pub fn control(&self) -> Option<usize> {
        match *self {
            Gate::Cnot { control, .. } => Some(control),
            _ => None,
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        match *self {
            Gate::Rx { theta, .. } | Gate::Ry { theta, .. } | Gate::Rz { theta, .. } => vec![theta],
            Gate::Rot {
                phi, theta, omega, ..
            } => vec![phi, theta, omega],
            Gate::Cnot { .. } => Vec::new(),
        }
    }

    /// Returns a copy with angle `slot` moved by `delta`.
    ///
    /// Panics if the gate has no such angle.
    pub fn shifted(mut self, slot: usize, delta: f64) -> Gate {
        match (&mut self, slot) {
            (Gate::Rx { theta, .. }, 0)
            | (Gate::Ry { theta, .. }, 0)
            | (Gate::Rz { theta, .. }, 0)
            | (Gate::Rot { phi: theta, .. }, 0)
            | (Gate::Rot { theta, .. }, 1)
            | (Gate::Rot { omega: theta, .. }, 2) => *theta += delta,
            _ => panic!("gate {self:?} has no angle slot {slot}"),
        }
        self
    }

    /// Inverse gate.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Rx { target, theta } => Gate::Rx {
                target,
                theta: -theta,
            },
            Gate::Ry { target, theta } => Gate::Ry {
                target,
                theta: -theta,
            },
            Gate::Rz { target, theta } => Gate::Rz {
                target,
                theta: -theta,
            },
            Gate::Rot {
                target,
                phi,
                theta,
                omega,
            } => Gate::Rot {
                target,
                phi: -omega,
                theta: -theta,
                omega: -phi,
            },
            cnot @ Gate::Cnot { .. } => cnot,
        }
    }

    /// `dU/d(angle)` for every angle slot, in [`Gate::angles`] order.
    pub fn angle_derivatives(&self) -> Vec<Matrix2> {
        let minus_half_i = Complex64::new(0.0, -0.5);
        let x = [[ZERO, ONE], [ONE, ZERO]];
        let y = [
            [ZERO, Complex64::new(0.0, -1.0)],
            [Complex64::new(0.0, 1.0), ZERO],
        ];
        let z = [[ONE, ZERO], [ZERO, -ONE]];
        // exp(-i a P / 2) has derivative (-i/2) P U, and P commutes with U.
        let scaled = |p: Matrix2, u: Matrix2| scale(minus_half_i, matmul(&p, &u));
        match *self {
            Gate::Rx { theta, .. } => vec![scaled(x, rx_matrix(theta))],
            Gate::Ry { theta, .. } => vec![scaled(y, ry_matrix(theta))],
            Gate::Rz { theta, .. } => vec![scaled(z, rz_matrix(theta))],
            Gate::Rot {
                phi, theta, omega, ..
            } => {
                let (rz_phi, ry, rz_omega) = (rz_matrix(phi), ry_matrix(theta), rz_matrix(omega));
                vec![
                    matmul(&matmul(&rz_omega, &ry), &scaled(z, rz_phi)),
                    matmul(&matmul(&rz_omega, &scaled(y, ry)), &rz_phi),
                    matmul(&scaled(z, rz_omega), &matmul(&ry, &rz_phi)),
                ]
            }
            Gate::Cnot { .. } => Vec::new(),
        }
    }

    /// The 2x2 unitary of a single-qubit gate; `None` for CNOT.
    pub fn matrix(&self) -> Option<Matrix2> {
        match *self {
            Gate::Rx { theta, .. } => Some(rx_matrix(theta)),
            Gate::Ry { theta, .. } => Some(ry_matrix(theta)),
            Gate::Rz { theta, .. } => Some(rz_matrix(theta)),
            Gate::Rot {
                phi, theta, omega, ..
            } => Some(rot_matrix(phi, theta, omega)),
            Gate::Cnot { .. } => None,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let check = |index: usize| {
            if index < n_qubits {
                Ok(())
            } else {
                Err(Error::QubitIndex { index, n_qubits })
            }
        };
        check(self.target())?;
        if let Some(control) = self.control() {
            check(control)?;
            if control == self.target() {
                return Err(Error::Config(format!(
                    "CNOT control and target are both qubit {control}"
                )));
            }
        }
        if self.angles().iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("angle of {self:?}")));
        }
        Ok(())
    }
}

pub fn rx_matrix(theta: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let c = Complex64::new(c, 0.0);
    let mis = Complex64::new(0.0, -s);
    [[c, mis], [mis, c]]
}

pub fn ry_matrix(theta: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rz_matrix(theta: f64) -> Matrix2 {
    let half = theta / 2.0;
    [
        [Complex64::from_polar(1.0, -half), ZERO],
        [ZERO, Complex64::from_polar(1.0, half)],
    ]
}

/// `Rz(omega) Ry(theta) Rz(phi)` in closed form.
pub fn rot_matrix(phi: f64, theta: f64, omega: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let sum = (phi + omega) / 2.0;
    let diff = (phi - omega) / 2.0;
    [
        [
            Complex64::from_polar(c, -sum),
            -Complex64::from_polar(s, diff),
        ],
        [
            Complex64::from_polar(s, -diff),
            Complex64::from_polar(c, sum),
        ],
    ]
}

pub fn matmul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[ZERO; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn scale(k: Complex64, m: Matrix2) -> Matrix2 {
    m.map(|row| row.map(|v| k * v))
}

/// State of an `n_qubits` register as `2^n_qubits` complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Config(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(Statevector {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. The length must be a power of two; normalisation
    /// is the caller's responsibility.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(Error::Config(format!(
                "amplitude count {len} is not 2^n for n in 1..={MAX_QUBITS}"
            )));
        }
        Ok(Statevector {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn reset(&mut self) {
        self.amplitudes.fill(ZERO);
        self.amplitudes[0] = ONE;
    }

    /// Applies `gate` in place after validating its indices and angles.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for gate in gates {
            self.apply(gate)?;
        }
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::Cnot { control, target } => self.apply_cnot(control, target),
            Gate::Rx { target, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                self.for_each_pair(target, |a0, a1| {
                    let (u, v) = (*a0, *a1);
                    // -i*s*v
                    *a0 = Complex64::new(c * u.re + s * v.im, c * u.im - s * v.re);
                    *a1 = Complex64::new(c * v.re + s * u.im, c * v.im - s * u.re);
                });
            }
            _ => {
                let m = gate.matrix().expect("single-qubit gate");
                self.apply_matrix(gate.target(), &m);
            }
        }
    }

    /// Applies an arbitrary 2x2 matrix to `target`. Not checked for unitarity.
    pub fn apply_matrix(&mut self, target: usize, m: &Matrix2) {
        let [[m00, m01], [m10, m11]] = *m;
        self.for_each_pair(target, |a0, a1| {
            let (u, v) = (*a0, *a1);
            *a0 = m00 * u + m01 * v;
            *a1 = m10 * u + m11 * v;
        });
    }

    fn for_each_pair(&mut self, target: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let stride = 1usize << target;
        for chunk in self.amplitudes.chunks_exact_mut(stride << 1) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a0, a1);
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        let (lo, hi) = (cmask.min(tmask), cmask.max(tmask));
        for k in 0..self.amplitudes.len() >> 2 {
            // insert zero bits at both positions, then set the control bit
            let mut i = k;
            i = (i & (lo - 1)) | ((i & !(lo - 1)) << 1);
            i = (i & (hi - 1)) | ((i & !(hi - 1)) << 1);
            i |= cmask;
            self.amplitudes.swap(i, i | tmask);
        }
    }

    /// `<Z_qubit>`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        let mask = 1usize << qubit;
        let value = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| {
                if k & mask == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum();
        Ok(value)
    }

    /// `<Z_q>` for every qubit in one pass over the amplitudes.
    pub fn expectation_z_all(&self) -> Vec<f64> {
        let mut ones = vec![0.0; self.n_qubits];
        let mut total = 0.0;
        for (k, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            total += p;
            let mut bits = k;
            while bits != 0 {
                let q = bits.trailing_zeros() as usize;
                ones[q] += p;
                bits &= bits - 1;
            }
        }
        ones.into_iter().map(|p1| total - 2.0 * p1).collect()
    }

    /// Multiplies every amplitude by the diagonal observable
    /// `sum_q weights[q] * Z_q`.
    pub(crate) fn apply_z_sum(&mut self, weights: &[f64]) {
        debug_assert_eq!(weights.len(), self.n_qubits);
        let total: f64 = weights.iter().sum();
        for (k, a) in self.amplitudes.iter_mut().enumerate() {
            let mut value = total;
            let mut bits = k;
            while bits != 0 {
                let q = bits.trailing_zeros() as usize;
                value -= 2.0 * weights[q];
                bits &= bits - 1;
            }
            *a *= value;
        }
    }

    /// `S[r][c] = sum_i conj(bra[i with bit qubit = r]) * self[i with bit qubit = c]`,
    /// so that `<bra| M_qubit |self> = sum_rc M[r][c] * S[r][c]` for any 2x2 `M`.
    pub(crate) fn reduced_overlap(&self, bra: &Statevector, qubit: usize) -> Matrix2 {
        let stride = 1usize << qubit;
        let mut s = [[ZERO; 2]; 2];
        for (ket, bra) in self
            .amplitudes
            .chunks_exact(stride << 1)
            .zip(bra.amplitudes.chunks_exact(stride << 1))
        {
            let (k0, k1) = ket.split_at(stride);
            let (b0, b1) = bra.split_at(stride);
            for i in 0..stride {
                let (c0, c1) = (b0[i].conj(), b1[i].conj());
                s[0][0] += c0 * k0[i];
                s[0][1] += c0 * k1[i];
                s[1][0] += c1 * k0[i];
                s[1][1] += c1 * k1[i];
            }
        }
        s
    }
}

/// `sum_rc m[r][c] * s[r][c]`.
pub(crate) fn contract(m: &Matrix2, s: &Matrix2) -> Complex64 {
    m[0][0] * s[0][0] + m[0][1] * s[0][1] + m[1][0] * s[1][0] + m[1][1] * s[1][1]
}
