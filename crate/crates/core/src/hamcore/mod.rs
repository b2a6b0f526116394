//! Loop-parameterized local Hamiltonians.
//!
//! A [`HamiltonianFamily`] is a sum of Pauli strings weighted by real
//! trigonometric polynomials of the loop parameter `lambda` in `[0, 1)`.

mod family;
mod pauli;
mod trig;

pub use family::{HamiltonianFamily, NormBounds};
pub use pauli::{Pauli, PauliMasks, PauliString, C64};
pub use trig::TrigCoefficient;
