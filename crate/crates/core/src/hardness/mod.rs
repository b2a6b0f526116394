//! Circuit-to-Hamiltonian compilation with a unary clock.
//!
//! A [`GateCircuit`] is compiled into `H_hist = H_in + H_prop + H_clock`
//! over the system register followed by clock qubits `C_1..C_L`, where
//! `L = T + M` and clock state `|t>` is `1^t 0^(L-t)`. Instances add
//! `r V(lambda)` on the output qubit, and for verifier circuits a small
//! penalty on rejection at the final time.

mod circuit;
mod compile;
mod instance;

pub use circuit::{toy_bqp_circuit, toy_duqma_circuit, Gate, GateCircuit};
pub use compile::{
    accept_operator, accept_operator_spectrum, clock_qubit, compile_history, history_state, make_v, penalty_term,
    product_state, total_qubits, window_state, with_clock, HISTORY_LOCALITY,
};
pub use instance::{
    build_bqp_instance, build_duqma_instance, energy_threshold, Certification, GuidingDescriptor, HardnessInstance,
    InstanceKind, Sandwich, CERTIFY_CONNECTION_N, CERTIFY_WILSON_N, DELTA_SAFETY, DETERMINISM_TOL,
};
