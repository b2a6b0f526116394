use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::circuit::GateCircuit;
use crate::budget::DenseBudget;
use crate::error::{Error, Result};
use crate::hamcore::{HamiltonianFamily, Pauli, PauliString, TrigCoefficient, C64};

/// Locality of the compiled terms: two gate qubits plus three clock qubits.
pub const HISTORY_LOCALITY: usize = 5;

const DROP_TOL: f64 = 1e-14;

fn op(a: [[f64; 2]; 2]) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |r, c| C64::new(a[r][c], 0.0))
}

fn n0() -> DMatrix<C64> {
    op([[1.0, 0.0], [0.0, 0.0]])
}

fn n1() -> DMatrix<C64> {
    op([[0.0, 0.0], [0.0, 1.0]])
}

/// `|1><0|`.
fn raise() -> DMatrix<C64> {
    op([[0.0, 0.0], [1.0, 0.0]])
}

fn id2() -> DMatrix<C64> {
    DMatrix::identity(2, 2)
}

fn kron_all(ops: &[DMatrix<C64>]) -> DMatrix<C64> {
    let mut out = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for o in ops {
        out = out.kronecker(o);
    }
    out
}

/// Accumulates the Pauli expansion of a Hermitian operator `a` acting on
/// `qubits` (first listed is the most significant) into `acc`.
fn decompose_into(acc: &mut BTreeMap<PauliString, f64>, n: usize, qubits: &[usize], a: &DMatrix<C64>) {
    let k = qubits.len();
    let d = 1usize << k;
    let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    for code in 0..(1usize << (2 * k)) {
        let local: Vec<Pauli> = (0..k).map(|j| letters[(code >> (2 * (k - 1 - j))) & 3]).collect();
        let masks = PauliString::new(local.clone()).masks();
        // Tr(P A) = sum_c phase(c) A[c, row(c)]
        let mut tr = C64::new(0.0, 0.0);
        for c in 0..d {
            let (row, phase) = masks.apply_basis(c);
            tr += phase * a[(c, row)];
        }
        let coeff = tr.re / d as f64;
        if coeff.abs() > DROP_TOL {
            *acc.entry(PauliString::embed(n, qubits, &local)).or_insert(0.0) += coeff;
        }
    }
}

fn family_from(n: usize, acc: BTreeMap<PauliString, f64>) -> Result<HamiltonianFamily> {
    HamiltonianFamily::from_terms(
        n,
        HISTORY_LOCALITY,
        acc.into_iter()
            .filter(|(_, c)| c.abs() > DROP_TOL)
            .map(|(p, c)| (p, TrigCoefficient::constant(c))),
    )
}

/// Index of clock qubit `C_j` (`j = 1..=L`).
pub fn clock_qubit(circuit: &GateCircuit, j: usize) -> usize {
    circuit.n_system + j - 1
}

/// Total qubits: system followed by the unary clock.
pub fn total_qubits(circuit: &GateCircuit) -> usize {
    circuit.n_system + circuit.clock_len()
}

fn check_budget(circuit: &GateCircuit) -> Result<()> {
    DenseBudget::current().check(total_qubits(circuit))
}

/// `H_in + H_prop + H_clock` over system and unary clock. Input penalties
/// act on the non-witness qubits only.
pub fn compile_history(circuit: &GateCircuit) -> Result<HamiltonianFamily> {
    circuit.validate()?;
    check_budget(circuit)?;
    let n = total_qubits(circuit);
    let l = circuit.clock_len();
    let c = |j| clock_qubit(circuit, j);
    let mut acc = BTreeMap::new();

    for q in circuit.ancilla_qubits() {
        decompose_into(&mut acc, n, &[q, c(1)], &kron_all(&[n1(), n0()]));
    }

    for t in 1..=l {
        let (clocks, proj, trans) = if l == 1 {
            (vec![c(1)], id2(), raise())
        } else if t == 1 {
            (vec![c(1), c(2)], kron_all(&[id2(), n0()]), kron_all(&[raise(), n0()]))
        } else if t == l {
            (
                vec![c(t - 1), c(t)],
                kron_all(&[n1(), id2()]),
                kron_all(&[n1(), raise()]),
            )
        } else {
            (
                vec![c(t - 1), c(t), c(t + 1)],
                kron_all(&[n1(), id2(), n0()]),
                kron_all(&[n1(), raise(), n0()]),
            )
        };
        let (targets, u) = match circuit.gates.get(t - 1) {
            Some(g) => (g.targets.clone(), g.matrix.clone()),
            None => (Vec::new(), DMatrix::from_element(1, 1, C64::new(1.0, 0.0))),
        };
        let iu = DMatrix::identity(u.nrows(), u.ncols());
        let fwd = u.kronecker(&trans);
        let h = (iu.kronecker(&proj) - &fwd - fwd.adjoint()) * C64::new(0.5, 0.0);
        let mut qubits = targets;
        qubits.extend(clocks);
        decompose_into(&mut acc, n, &qubits, &h);
    }

    for t in 1..l {
        decompose_into(&mut acc, n, &[c(t), c(t + 1)], &kron_all(&[n0(), n1()]));
    }
    family_from(n, acc)
}

/// Small-penalty term `eps |0><0|_{out2} (x) |1><1|_{C_L}`; on the legal
/// clock subspace the clock factor is the final-time projector.
pub fn penalty_term(circuit: &GateCircuit, epsilon: f64) -> Result<HamiltonianFamily> {
    let out2 = circuit
        .output2
        .ok_or_else(|| Error::InvalidArgument("penalty term needs a second output qubit".into()))?;
    check_budget(circuit)?;
    let n = total_qubits(circuit);
    let mut acc = BTreeMap::new();
    let m = kron_all(&[n0(), n1()]) * C64::new(epsilon, 0.0);
    decompose_into(&mut acc, n, &[out2, clock_qubit(circuit, circuit.clock_len())], &m);
    family_from(n, acc)
}

/// `V(lambda) = e^{2 pi i lambda}|1><0| + h.c.` on `qubit`, i.e.
/// `cos(2 pi lambda) X + sin(2 pi lambda) Y`.
pub fn make_v(n_qubits: usize, qubit: usize) -> Result<HamiltonianFamily> {
    if qubit >= n_qubits {
        return Err(Error::InvalidArgument(format!(
            "qubit {qubit} out of range for {n_qubits} qubits"
        )));
    }
    HamiltonianFamily::from_terms(
        n_qubits,
        1,
        [
            (
                PauliString::single(n_qubits, qubit, Pauli::X),
                TrigCoefficient::cos(1, 1.0),
            ),
            (
                PauliString::single(n_qubits, qubit, Pauli::Y),
                TrigCoefficient::sin(1, 1.0),
            ),
        ],
    )
}

fn clock_index(l: usize, t: usize) -> usize {
    // |t> = 1^t 0^(L-t), C_1 most significant
    (0..t).map(|i| 1usize << (l - 1 - i)).sum()
}

/// Embeds `system (x) |t>_C`.
pub fn with_clock(circuit: &GateCircuit, system: &DVector<C64>, t: usize) -> DVector<C64> {
    let l = circuit.clock_len();
    let mut v = DVector::zeros(system.len() << l);
    let ci = clock_index(l, t);
    for (s, &a) in system.iter().enumerate() {
        v[(s << l) | ci] = a;
    }
    v
}

/// `(L+1)^{-1/2} sum_t U_t...U_1|x> (x) |t>` with idling after step `T`.
/// `witness` is required exactly when the circuit declares witness qubits.
pub fn history_state(circuit: &GateCircuit, witness: Option<&DVector<C64>>) -> Result<DVector<C64>> {
    circuit.validate()?;
    check_budget(circuit)?;
    if circuit.witness_qubits.is_empty() != witness.is_none() {
        return Err(Error::InvalidArgument(if witness.is_none() {
            "circuit declares witness qubits; a witness state is required".into()
        } else {
            "circuit declares no witness qubits".into()
        }));
    }
    let partial = circuit.partial_states(&circuit.input_state(witness)?);
    let l = circuit.clock_len();
    let mut v = DVector::zeros(1usize << total_qubits(circuit));
    for t in 0..=l {
        let sys = &partial[t.min(circuit.t())];
        v += with_clock(circuit, sys, t);
    }
    Ok(v.unscale(((l + 1) as f64).sqrt()))
}

/// Window state `U|x> (x) (M+1)^{-1/2} sum_{t=T}^{T+M} |t>`.
pub fn window_state(circuit: &GateCircuit, witness: Option<&DVector<C64>>) -> Result<DVector<C64>> {
    check_budget(circuit)?;
    let fin = circuit
        .partial_states(&circuit.input_state(witness)?)
        .pop()
        .expect("final state");
    let mut v = DVector::zeros(1usize << total_qubits(circuit));
    for t in circuit.t()..=circuit.clock_len() {
        v += with_clock(circuit, &fin, t);
    }
    Ok(v.unscale(((circuit.idle + 1) as f64).sqrt()))
}

/// Product state `|0^n>|0>_C`.
pub fn product_state(circuit: &GateCircuit) -> Result<DVector<C64>> {
    check_budget(circuit)?;
    let mut v = DVector::zeros(1usize << total_qubits(circuit));
    v[0] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Witness-register operator `Q = <0|_anc U^dag (|1><1|_{out2} (x) I) U |0>_anc`,
/// eigenvalues in descending order.
pub fn accept_operator(circuit: &GateCircuit) -> Result<DMatrix<C64>> {
    let out2 = circuit
        .output2
        .ok_or_else(|| Error::InvalidArgument("accept operator needs a second output qubit".into()))?;
    let nw = circuit.witness_qubits.len();
    let bit = 1usize << (circuit.n_system - 1 - out2);
    let images: Vec<DVector<C64>> = (0..1usize << nw)
        .map(|w| {
            let mut e = DVector::zeros(1 << nw);
            e[w] = C64::new(1.0, 0.0);
            let mut v = circuit
                .partial_states(&circuit.input_state(Some(&e))?)
                .pop()
                .expect("final state");
            for (i, a) in v.iter_mut().enumerate() {
                if i & bit == 0 {
                    *a = C64::new(0.0, 0.0);
                }
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(1 << nw, 1 << nw, |r, c| images[r].dotc(&images[c])))
}

pub fn accept_operator_spectrum(circuit: &GateCircuit) -> Result<Vec<f64>> {
    let q = accept_operator(circuit)?;
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(q).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}
