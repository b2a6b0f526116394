use berrylab_core::bpe::{BpeConfig, WrappedInterval};
use berrylab_core::dynamics::Integrator;
use berrylab_core::hardness::{build_duqma_instance, toy_duqma_circuit, HardnessInstance};
use berrylab_core::verifier::{accept_rate, Decision, Verifier, VerifierConfig};
use berrylab_core::C64;
use nalgebra::DVector;

fn basis(bit: usize) -> DVector<C64> {
    let mut w = DVector::zeros(2);
    w[bit] = C64::new(1.0, 0.0);
    w
}

fn certified(yes: bool) -> HardnessInstance {
    let mut inst = build_duqma_instance(&toy_duqma_circuit(yes), &basis(usize::from(yes)), None, 0.05, 1).unwrap();
    inst.certify().unwrap();
    inst
}

fn config(inst: &HardnessInstance) -> VerifierConfig {
    let mut bpe = BpeConfig::new(inst.claim().unwrap().2 / 2.0, 0.1);
    bpe.integrator = Integrator::SplitStatic;
    VerifierConfig::new(bpe)
}

#[test]
fn yes_instance_accepts_true_witness() {
    let inst = certified(true);
    let mut v = Verifier::new(&inst, config(&inst)).unwrap();
    let seeds: Vec<u64> = (0..500).collect();
    let good = v.run_many(&inst.history_state(None).unwrap(), &seeds).unwrap();
    let ones = good.iter().filter(|o| o.decision == Decision::AcceptOne).count();
    assert!(ones as f64 >= 0.9 * 500.0, "accept-1 in {ones}/500");
    assert!(good.iter().all(|o| o.energy_pass == o.theta_estimate.is_some()));

    let bad = v
        .run_many(&inst.history_state(Some(&basis(0))).unwrap(), &seeds)
        .unwrap();
    assert!(bad.iter().all(|o| !o.energy_pass));
    let gap = accept_rate(&good) - accept_rate(&bad);
    assert!(gap >= 1.0 / 3.0, "completeness-soundness gap {gap}");
}

#[test]
fn no_instance_bounds_true_witness() {
    let inst = certified(false);
    let (a, b, delta) = inst.claim().unwrap();
    let no_side = WrappedInterval::new(a, b).promise_complement(delta);
    let eps = delta / 2.0;
    let mut v = Verifier::new(&inst, config(&inst)).unwrap();
    let outs = v
        .run_many(&inst.history_state(None).unwrap(), &(0..50).collect::<Vec<_>>())
        .unwrap();
    let bounded = outs
        .iter()
        .filter(|o| o.decision == Decision::AcceptProbBounded && no_side.distance(o.theta_estimate.unwrap()) <= eps)
        .count();
    assert!(bounded >= 45, "{bounded}/50");
    assert!(outs.iter().all(|o| o.decision != Decision::AcceptOne));
}
