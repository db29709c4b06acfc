//! Dense matrices for the unitary gate kinds.
//!
//! Matrices are row-major over `2^k` basis states of the gate's qubits, with
//! the gate's first qubit as the most significant bit.

use num_complex::Complex64;

use crate::circuit::GateKind;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Matrix of a unitary gate kind, or `None` for measure/reset/conditioned.
pub fn unitary_matrix(kind: &GateKind) -> Option<Vec<Complex64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let m = match *kind {
        GateKind::H => vec![c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)],
        GateKind::X => vec![ZERO, ONE, ONE, ZERO],
        GateKind::Z => vec![ONE, ZERO, ZERO, -ONE],
        GateKind::T => vec![ONE, ZERO, ZERO, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)],
        GateKind::Tdg => vec![
            ONE,
            ZERO,
            ZERO,
            Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4),
        ],
        GateKind::Rz(theta) => vec![
            Complex64::from_polar(1.0, -theta / 2.0),
            ZERO,
            ZERO,
            Complex64::from_polar(1.0, theta / 2.0),
        ],
        GateKind::Ry(theta) => {
            let (sn, cs) = (theta / 2.0).sin_cos();
            vec![c(cs, 0.0), c(-sn, 0.0), c(sn, 0.0), c(cs, 0.0)]
        }
        GateKind::Cx => permutation(4, |i| if i >= 2 { i ^ 1 } else { i }),
        GateKind::Ccx => permutation(8, |i| if i >= 6 { i ^ 1 } else { i }),
        GateKind::Measure(_) | GateKind::Reset | GateKind::Conditioned { .. } => return None,
    };
    Some(m)
}

fn permutation(dim: usize, f: impl Fn(usize) -> usize) -> Vec<Complex64> {
    let mut m = vec![ZERO; dim * dim];
    for col in 0..dim {
        m[f(col) * dim + col] = ONE;
    }
    m
}

/// Single-qubit Pauli by index: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(index: usize) -> [Complex64; 4] {
    match index {
        0 => [ONE, ZERO, ZERO, ONE],
        1 => [ZERO, ONE, ONE, ZERO],
        2 => [ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO],
        3 => [ONE, ZERO, ZERO, -ONE],
        _ => panic!("pauli index {} out of range", index),
    }
}
