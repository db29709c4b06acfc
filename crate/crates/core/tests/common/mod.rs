//! Reference implementations used as test oracles. Nothing here calls the
//! library's simulators: gates are applied directly to state vectors.

#![allow(dead_code)]

use std::f64::consts::FRAC_1_SQRT_2;

use dqczne::{Circuit, CondPauli, Gate, GateKind};
use num_complex::Complex64 as C;
use proptest::prelude::*;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Apply a 2x2 matrix `[a, b; c, d]` to qubit `q` (bit `q` of the index).
fn one(psi: &mut [C], q: usize, m: [C; 4]) {
    let bit = 1 << q;
    for i in 0..psi.len() {
        if i & bit == 0 {
            let (x, y) = (psi[i], psi[i | bit]);
            psi[i] = m[0] * x + m[1] * y;
            psi[i | bit] = m[2] * x + m[3] * y;
        }
    }
}

fn flip_if(psi: &mut [C], controls: &[usize], target: usize) {
    let mask: usize = controls.iter().map(|&q| 1 << q).sum();
    let t = 1 << target;
    for i in 0..psi.len() {
        if i & mask == mask && i & t == 0 {
            psi.swap(i, i | t);
        }
    }
}

fn phase_if(psi: &mut [C], qubits: &[usize]) {
    let mask: usize = qubits.iter().map(|&q| 1 << q).sum();
    for (i, a) in psi.iter_mut().enumerate() {
        if i & mask == mask {
            *a = -*a;
        }
    }
}

/// Apply a unitary gate to a state vector.
pub fn apply(psi: &mut [C], g: &Gate) {
    let s = FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let q = &g.qubits;
    match g.kind {
        GateKind::H => one(psi, q[0], [c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]),
        GateKind::X => flip_if(psi, &[], q[0]),
        GateKind::Z => phase_if(psi, &[q[0]]),
        GateKind::T => one(psi, q[0], [o, z, z, c(s, s)]),
        GateKind::Tdg => one(psi, q[0], [o, z, z, c(s, -s)]),
        GateKind::Rz(t) => one(
            psi,
            q[0],
            [C::from_polar(1.0, -t / 2.0), z, z, C::from_polar(1.0, t / 2.0)],
        ),
        GateKind::Ry(t) => {
            let (sn, cs) = (t / 2.0).sin_cos();
            one(psi, q[0], [c(cs, 0.0), c(-sn, 0.0), c(sn, 0.0), c(cs, 0.0)])
        }
        GateKind::Cx => flip_if(psi, &[q[0]], q[1]),
        GateKind::Ccx => flip_if(psi, &[q[0], q[1]], q[2]),
        _ => panic!("oracle: {} is not unitary", g),
    }
}

/// Composed unitary of a unitary-only circuit; column `j` is the image of
/// basis state `j`.
pub fn unitary(c: &Circuit) -> Vec<Vec<C>> {
    let dim = 1 << c.num_qubits();
    (0..dim)
        .map(|j| {
            let mut psi = vec![C::new(0.0, 0.0); dim];
            psi[j] = C::new(1.0, 0.0);
            for g in c.gates() {
                apply(&mut psi, g);
            }
            psi
        })
        .collect()
}

pub fn max_abs_diff(a: &[Vec<C>], b: &[Vec<C>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Output distribution of `qubits` (bit `j` = `qubits[j]`) by the deferred
/// measurement principle: measurements are postponed to the end and a
/// conditioned Pauli becomes a controlled Pauli from the measured qubit.
/// Reset is only accepted on a qubit that has not been touched yet.
pub fn deferred_distribution(c: &Circuit, qubits: &[usize]) -> Vec<f64> {
    let dim = 1 << c.num_qubits();
    let mut psi = vec![C::new(0.0, 0.0); dim];
    psi[0] = C::new(1.0, 0.0);
    let mut source = vec![None; c.num_clbits()];
    let mut touched = vec![false; c.num_qubits()];
    for g in c.gates() {
        match g.kind {
            GateKind::Measure(cb) => source[cb] = Some(g.qubits[0]),
            GateKind::Reset => assert!(!touched[g.qubits[0]], "oracle cannot reset a used qubit"),
            GateKind::Conditioned { pauli, clbit } => {
                let src = source[clbit].expect("bit measured before use");
                match pauli {
                    CondPauli::X => flip_if(&mut psi, &[src], g.qubits[0]),
                    CondPauli::Z => phase_if(&mut psi, &[src, g.qubits[0]]),
                }
            }
            _ => apply(&mut psi, g),
        }
        for &q in &g.qubits {
            touched[q] = true;
        }
    }
    let mut probs = vec![0.0; 1 << qubits.len()];
    for (i, a) in psi.iter().enumerate() {
        let outcome = qubits
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &q)| acc | ((i >> q) & 1) << j);
        probs[outcome] += a.norm_sqr();
    }
    probs
}

/// Z-parity of a distribution whose outcome bits are the parity qubits.
pub fn parity(probs: &[f64]) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(i, p)| if i.count_ones().is_multiple_of(2) { *p } else { -p })
        .sum()
}

/// Dense `n x n` matrices over row-major vectors.
pub fn matmul(a: &[C], b: &[C], n: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let x = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += x * b[k * n + j];
            }
        }
    }
    out
}

pub fn dagger(a: &[C], n: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j].conj();
        }
    }
    out
}

/// Pauli string as a dense matrix; `paulis[q]` acts on bit `q`.
pub fn pauli_string(paulis: &[usize]) -> Vec<C> {
    let n = paulis.len();
    let dim = 1 << n;
    let mut m = vec![C::new(0.0, 0.0); dim * dim];
    for col in 0..dim {
        let mut row = col;
        let mut amp = C::new(1.0, 0.0);
        for (q, &p) in paulis.iter().enumerate() {
            let b = (col >> q) & 1;
            match p {
                0 => {}
                1 => row ^= 1 << q,
                2 => {
                    row ^= 1 << q;
                    amp *= if b == 0 { c(0.0, 1.0) } else { c(0.0, -1.0) };
                }
                3 => {
                    if b == 1 {
                        amp = -amp;
                    }
                }
                _ => unreachable!(),
            }
        }
        m[row * dim + col] = amp;
    }
    m
}

/// Unitary-only circuits on up to 3 qubits.
pub fn small_unitary_circuit() -> impl Strategy<Value = Circuit> {
    (1usize..=3).prop_flat_map(|n| {
        let gate =
            (0usize..9, 0..n, 0..n, 0..n, -3.0f64..3.0).prop_filter_map("distinct qubits", move |(k, a, b, t, th)| {
                let g = match k {
                    0 => Gate::h(a),
                    1 => Gate::x(a),
                    2 => Gate::z(a),
                    3 => Gate::t(a),
                    4 => Gate::tdg(a),
                    5 => Gate::rz(th, a),
                    6 => Gate::ry(th, a),
                    7 if a != b => Gate::cx(a, b),
                    8 if a != b && b != t && a != t => Gate::ccx(a, b, t),
                    _ => return None,
                };
                Some(g)
            });
        prop::collection::vec(gate, 1..12).prop_map(move |gates| {
            let mut c = Circuit::new(n, 0);
            c.extend(gates).unwrap();
            c
        })
    })
}
