mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use qcredit::qsim::{Gate, Statevector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn circuit() -> impl Strategy<Value = (usize, Vec<Gate>)> {
    (1usize..=4, any::<u64>(), 0usize..=50).prop_map(|(n, seed, len)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (
            n,
            (0..len).map(|_| common::random_gate(&mut rng, n)).collect(),
        )
    })
}

fn run(n: usize, gates: &[Gate]) -> Statevector {
    let mut s = Statevector::zero(n).unwrap();
    s.apply_all(gates).unwrap();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matches_kronecker_oracle((n, gates) in circuit()) {
        let fast = run(n, &gates);
        let slow = common::oracle_state(&gates, n);
        for (a, b) in fast.amplitudes().iter().zip(&slow) {
            prop_assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
        let expect = common::oracle_expectations(&gates, n);
        for (a, b) in fast.expectation_z_all().iter().zip(&expect) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_is_preserved((n, gates) in circuit()) {
        prop_assert!((run(n, &gates).norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_circuit_returns_to_start((n, gates) in circuit()) {
        let mut s = run(n, &gates);
        for g in gates.iter().rev() {
            s.apply(&g.inverse()).unwrap();
        }
        prop_assert!((s.amplitudes()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn expectations_lie_in_unit_interval((n, gates) in circuit()) {
        for e in run(n, &gates).expectation_z_all() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&e));
        }
    }
}

#[test]
fn local_matrices_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let g = common::random_gate(&mut rng, 1);
        let ours = g.matrix().unwrap();
        let theirs = common::local_matrix(&g);
        for r in 0..2 {
            for k in 0..2 {
                assert!((ours[r][k] - theirs[r][k]).norm() < 1e-14, "{g:?}");
            }
        }
    }
}

#[test]
fn bell_state_on_arbitrary_register() {
    let mut s = Statevector::zero(3).unwrap();
    s.apply(&Gate::Ry {
        target: 2,
        theta: std::f64::consts::FRAC_PI_2,
    })
    .unwrap();
    s.apply(&Gate::Cnot {
        control: 2,
        target: 0,
    })
    .unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((s.amplitudes()[0].re - h).abs() < 1e-15);
    assert!((s.amplitudes()[0b101].re - h).abs() < 1e-15);
    assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
}

#[test]
fn long_evolution_at_twelve_qubits_keeps_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut s = Statevector::zero(12).unwrap();
    for _ in 0..2_000 {
        s.apply(&common::random_gate(&mut rng, 12)).unwrap();
    }
    assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_gates_are_rejected() {
    let mut s = Statevector::zero(2).unwrap();
    assert!(s
        .apply(&Gate::Rx {
            target: 2,
            theta: 0.1
        })
        .is_err());
    assert!(s
        .apply(&Gate::Cnot {
            control: 1,
            target: 1
        })
        .is_err());
    assert!(s
        .apply(&Gate::Rz {
            target: 0,
            theta: f64::INFINITY
        })
        .is_err());
    assert!(Statevector::zero(0).is_err());
    assert!(Statevector::zero(21).is_err());
}
