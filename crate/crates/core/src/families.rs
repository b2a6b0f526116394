//! Small reference loops used by tests, benches and the CLI.

use rand::Rng;

use crate::hamcore::{HamiltonianFamily, Pauli, PauliString, TrigCoefficient};

/// `H(l) = -cos(2 pi l) X - sin(2 pi l) Y`; Berry phase pi.
pub fn equatorial_loop() -> HamiltonianFamily {
    HamiltonianFamily::from_terms(
        1,
        1,
        [
            ("X".parse().unwrap(), TrigCoefficient::cos(1, -1.0)),
            ("Y".parse().unwrap(), TrigCoefficient::sin(1, -1.0)),
        ],
    )
    .expect("valid family")
    .with_metadata("name", "equatorial_loop".into())
}

/// Spin-1/2 in a field tilted by polar angle `theta` from +z, swept once
/// around the z axis. Ground-state Berry phase is `pi (1 + cos theta)`
/// modulo 2 pi.
pub fn tilted_loop(theta: f64) -> HamiltonianFamily {
    let (s, c) = theta.sin_cos();
    HamiltonianFamily::from_terms(
        1,
        1,
        [
            ("X".parse().unwrap(), TrigCoefficient::cos(1, -s)),
            ("Y".parse().unwrap(), TrigCoefficient::sin(1, -s)),
            ("Z".parse().unwrap(), TrigCoefficient::constant(-c)),
        ],
    )
    .expect("valid family")
}

/// `H = c Z` on a single qubit.
pub fn constant_z(c: f64) -> HamiltonianFamily {
    HamiltonianFamily::from_terms(1, 1, [("Z".parse().unwrap(), TrigCoefficient::constant(c))]).expect("valid family")
}

/// Random 2-local loop on `n` qubits: a static Ising/field part plus
/// first-harmonic transverse terms. The caller screens the gap.
pub fn random_loop<R: Rng>(n: usize, rng: &mut R) -> HamiltonianFamily {
    let mut fam = HamiltonianFamily::new(n, 2.min(n));
    for q in 0..n {
        let z = PauliString::single(n, q, Pauli::Z);
        fam.push_term(z, TrigCoefficient::constant(-rng.gen_range(0.6..1.2)))
            .expect("fits");
        for (letter, harmonic_is_cos) in [(Pauli::X, true), (Pauli::Y, false)] {
            let p = PauliString::single(n, q, letter);
            let a = rng.gen_range(-0.5..0.5);
            let coeff = if harmonic_is_cos {
                let mut c = TrigCoefficient::cos(1, a);
                c.sin_terms.push((1, rng.gen_range(-0.3..0.3)));
                c
            } else {
                let mut c = TrigCoefficient::sin(1, a);
                c.cos_terms.push((1, rng.gen_range(-0.3..0.3)));
                c
            };
            fam.push_term(p, coeff).expect("fits");
        }
    }
    for q in 0..n.saturating_sub(1) {
        let zz = PauliString::embed(n, &[q, q + 1], &[Pauli::Z, Pauli::Z]);
        fam.push_term(zz, TrigCoefficient::constant(rng.gen_range(-0.4..0.4)))
            .expect("fits");
        let xx = PauliString::embed(n, &[q, q + 1], &[Pauli::X, Pauli::X]);
        fam.push_term(xx, TrigCoefficient::cos(1, rng.gen_range(-0.2..0.2)))
            .expect("fits");
    }
    fam
}
