//! Fixtures shared by the criterion benchmarks in `benches/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use berrylab_core::exact::{min_gap, uniform_grid};
use berrylab_core::families::random_loop;
use berrylab_core::hardness::{build_bqp_instance, toy_bqp_circuit, HardnessInstance};
use berrylab_core::HamiltonianFamily;

/// First random `n`-qubit loop with gap at least 0.5 for `seed`.
pub fn gapped_loop(n: usize, seed: u64) -> HamiltonianFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let f = random_loop(n, &mut rng);
        if min_gap(&f, &uniform_grid(32)).map(|g| g.0 >= 0.5).unwrap_or(false) {
            return f;
        }
    }
}

/// YES toy instance with `m` idle steps, uncertified.
pub fn bqp_instance(m: usize) -> HardnessInstance {
    build_bqp_instance(&toy_bqp_circuit(true), None, m).expect("toy circuit compiles")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(gapped_loop(3, 1).n_qubits(), 3);
        assert_eq!(bqp_instance(1).family.n_qubits(), 5);
    }
}
