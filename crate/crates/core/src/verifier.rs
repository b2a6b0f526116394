//! Simulation of the energy-threshold verifier for Berry phase instances.
//!
//! A witness is first screened by phase estimation of `e^{i H(0) tau}`.
//! States that pass go through two-speed BPE and the interval decision.
//! Probabilistic acceptance is modelled by a seeded coin.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::angle::{wrap_2pi, wrap_pm_pi};
use crate::bpe::{decide_interval, BpeConfig, PreparedBpe, WrappedInterval};
use crate::error::{Error, Result};
use crate::exact::{diagonalize, SpectrumSlice};
use crate::hamcore::C64;
use crate::hardness::HardnessInstance;
use crate::qpe::{
    bits_for_precision, circular_median, outcome_angle, pick_component, repetitions_for_failure, sample_phase_outcome,
};

/// Default `Delta(|x|)` in the rejection branch of the energy test.
pub const DEFAULT_DELTA_X: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "accept-1")]
    AcceptOne,
    #[serde(rename = "accept-prob-bounded")]
    AcceptProbBounded,
    /// The estimate landed outside both promise intervals.
    #[serde(rename = "reject")]
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStep {
    pub step: String,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierOutcome {
    pub seed: u64,
    pub energy_estimate: f64,
    pub energy_pass: bool,
    /// Present iff the energy test passed.
    pub theta_estimate: Option<f64>,
    pub decision: Decision,
    /// Probability with which the verifier accepts given `decision`.
    pub accept_probability: f64,
    /// Result of the acceptance coin.
    pub accepted: bool,
    pub transcript: Vec<TranscriptStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    /// Additive energy precision; `min_gap / 16` when absent. At most `min_gap / 4`.
    pub energy_precision: Option<f64>,
    /// Odd repetition count of the energy QPE.
    pub energy_repetitions: usize,
    pub delta_x: f64,
    pub bpe: BpeConfig,
}

impl VerifierConfig {
    pub fn new(bpe: BpeConfig) -> Self {
        Self {
            energy_precision: None,
            energy_repetitions: repetitions_for_failure(1e-3).expect("valid"),
            delta_x: DEFAULT_DELTA_X,
            bpe,
        }
    }
}

/// Result of the energy test on one witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReading {
    pub estimate: f64,
    pub pass: bool,
    /// Eigenvector of `H(0)` the witness collapsed onto.
    pub component: usize,
}

/// Phase estimation of `H(0)` with `tau = pi / (|H| + 1)`, so every
/// eigenphase lies in `(-pi, pi)` and decodes without aliasing.
#[derive(Debug, Clone)]
pub struct EnergyMeter {
    pub spectrum: SpectrumSlice,
    pub tau: f64,
    pub m: u32,
    pub repetitions: usize,
    pub precision: f64,
    pub min_gap: f64,
    pub threshold: f64,
}

impl EnergyMeter {
    pub fn new(instance: &HardnessInstance, e_th: f64, precision: f64, repetitions: usize) -> Result<Self> {
        let min_gap = instance.min_gap;
        if !(precision > 0.0 && precision <= min_gap / 4.0) {
            return Err(Error::Config(format!(
                "energy precision {precision:.3e} must lie in (0, min_gap/4 = {:.3e}]",
                min_gap / 4.0
            )));
        }
        if repetitions == 0 {
            return Err(Error::InvalidArgument(
                "at least one energy repetition is needed".into(),
            ));
        }
        let spectrum = diagonalize(&instance.family, 0.0)?;
        let tau = PI / (spectrum.norm() + 1.0);
        if spectrum.norm() * tau >= PI {
            return Err(Error::Config("spectral range exceeds the aliasing budget".into()));
        }
        let m = bits_for_precision(precision * tau)
            .map_err(|e| Error::Config(format!("energy precision {precision:.3e} needs rescaling: {e}")))?;
        Ok(Self {
            spectrum,
            tau,
            m,
            repetitions,
            precision,
            min_gap,
            threshold: e_th + min_gap / 4.0,
        })
    }

    /// Born weights of `psi` over the eigenvectors of `H(0)`.
    pub fn weights(&self, psi: &DVector<C64>) -> Result<Vec<f64>> {
        let v = &self.spectrum.eigenvectors;
        if psi.len() != v.nrows() {
            return Err(Error::InvalidArgument(format!(
                "witness has dimension {}, expected {}",
                psi.len(),
                v.nrows()
            )));
        }
        let norm = psi.norm_squared();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("witness state is zero".into()));
        }
        Ok((0..v.ncols())
            .map(|k| v.column(k).dotc(psi).norm_sqr() / norm)
            .collect())
    }

    /// The first shot collapses the witness onto one eigenvector; the
    /// remaining repetitions act on that eigenvector.
    pub fn measure<R: Rng>(&self, weights: &[f64], rng: &mut R) -> Result<EnergyReading> {
        let k = pick_component(weights, rng);
        let phase = wrap_2pi(self.spectrum.eigenvalues[k] * self.tau);
        let angles: Vec<f64> = (0..self.repetitions)
            .map(|_| outcome_angle(sample_phase_outcome(phase, self.m, rng), self.m))
            .collect();
        let estimate = wrap_pm_pi(circular_median(&angles)?) / self.tau;
        Ok(EnergyReading {
            estimate,
            pass: estimate < self.threshold,
            component: k,
        })
    }
}

/// One energy test with precision `precision` (at most `min_gap / 4`).
pub fn energy_test(
    instance: &HardnessInstance,
    witness: &DVector<C64>,
    e_th: f64,
    precision: f64,
    seed: u64,
) -> Result<(f64, bool)> {
    let meter = EnergyMeter::new(instance, e_th, precision, repetitions_for_failure(1e-3)?)?;
    let w = meter.weights(witness)?;
    let r = meter.measure(&w, &mut ChaCha20Rng::seed_from_u64(seed))?;
    Ok((r.estimate, r.pass))
}

/// Verifier bound to an instance; BPE is prepared once per eigenvector
/// that passes the energy gate.
pub struct Verifier<'a> {
    instance: &'a HardnessInstance,
    pub config: VerifierConfig,
    pub meter: EnergyMeter,
    pub claim: (f64, f64, f64),
    prepared: Vec<Option<PreparedBpe>>,
}

impl<'a> Verifier<'a> {
    pub fn new(instance: &'a HardnessInstance, config: VerifierConfig) -> Result<Self> {
        let e_th = instance
            .e_th
            .ok_or_else(|| Error::Config("instance carries no energy threshold".into()))?;
        let claim = instance.claim()?;
        if config.bpe.epsilon_b >= 2.0 * claim.2 {
            return Err(Error::Config(format!(
                "eps_B = {} must be below 2 delta = {}",
                config.bpe.epsilon_b,
                2.0 * claim.2
            )));
        }
        if !(config.delta_x >= 0.0 && config.delta_x <= 1.0 / 3.0) {
            return Err(Error::Config(format!(
                "Delta(|x|) = {} not in [0, 1/3]",
                config.delta_x
            )));
        }
        let precision = config.energy_precision.unwrap_or(instance.min_gap / 16.0);
        let meter = EnergyMeter::new(instance, e_th, precision, config.energy_repetitions)?;
        let dim = meter.spectrum.eigenvalues.len();
        Ok(Self {
            instance,
            config,
            meter,
            claim,
            prepared: vec![None; dim],
        })
    }

    /// BPE for eigenvector `k` of `H(0)`, prepared on first use.
    pub fn prepared_bpe(&mut self, k: usize) -> Result<&PreparedBpe> {
        if self.prepared[k].is_none() {
            let psi = self.meter.spectrum.state(k);
            self.prepared[k] = Some(PreparedBpe::new(&self.instance.family, &psi, &self.config.bpe)?);
        }
        Ok(self.prepared[k].as_ref().expect("just prepared"))
    }

    pub fn run(&mut self, witness: &DVector<C64>, seed: u64) -> Result<VerifierOutcome> {
        let weights = self.meter.weights(witness)?;
        self.run_weights(&weights, seed)
    }

    fn run_weights(&mut self, weights: &[f64], seed: u64) -> Result<VerifierOutcome> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut transcript = Vec::new();
        let reading = self.meter.measure(weights, &mut rng)?;
        transcript.push(TranscriptStep {
            step: "energy".into(),
            detail: json!({
                "estimate": reading.estimate,
                "threshold": self.meter.threshold,
                "tau": self.meter.tau,
                "m": self.meter.m,
                "repetitions": self.meter.repetitions,
                "pass": reading.pass,
            }),
        });
        let (theta, decision, p) = if !reading.pass {
            (None, Decision::AcceptProbBounded, 1.0 / 3.0 - self.config.delta_x)
        } else {
            let bpe_seed: u64 = rng.gen();
            let out = self.prepared_bpe(reading.component)?.run(bpe_seed)?;
            let (a, b, delta) = self.claim;
            let eps = self.config.bpe.epsilon_b;
            let bit = decide_interval(out.theta_b_hat, a, b, delta, eps)?;
            let in_no = WrappedInterval::new(a, b)
                .promise_complement(delta)
                .distance(out.theta_b_hat)
                <= eps;
            transcript.push(TranscriptStep {
                step: "bpe".into(),
                detail: json!({
                    "seed": bpe_seed,
                    "theta_B_hat": out.theta_b_hat,
                    "theta_D_hat": out.theta_d_hat,
                    "decision_bit": bit,
                }),
            });
            let (d, p) = match (bit, in_no) {
                (1, _) => (Decision::AcceptOne, 1.0),
                (_, true) => (Decision::AcceptProbBounded, 1.0 / 3.0),
                _ => (Decision::Reject, 0.0),
            };
            (Some(out.theta_b_hat), d, p)
        };
        let coin: f64 = rng.gen();
        let accepted = coin < p;
        transcript.push(TranscriptStep {
            step: "decision".into(),
            detail: json!({ "decision": decision, "accept_probability": p, "coin": coin, "accepted": accepted }),
        });
        Ok(VerifierOutcome {
            seed,
            energy_estimate: reading.estimate,
            energy_pass: reading.pass,
            theta_estimate: theta,
            decision,
            accept_probability: p,
            accepted,
            transcript,
        })
    }

    /// Runs over `seeds` in order.
    pub fn run_many(&mut self, witness: &DVector<C64>, seeds: &[u64]) -> Result<Vec<VerifierOutcome>> {
        let weights = self.meter.weights(witness)?;
        seeds.iter().map(|&s| self.run_weights(&weights, s)).collect()
    }
}

/// One verifier run; prepares BPE from scratch.
pub fn run_verifier(
    instance: &HardnessInstance,
    witness: &DVector<C64>,
    config: &VerifierConfig,
    seed: u64,
) -> Result<VerifierOutcome> {
    Verifier::new(instance, config.clone())?.run(witness, seed)
}

/// Fraction of accepted runs.
pub fn accept_rate(outcomes: &[VerifierOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.accepted).count() as f64 / outcomes.len() as f64
}
