//! Two-runtime Berry phase estimation, the forward/backward baseline, and
//! the interval decision rule.
//!
//! QPE on `U(T)` reads `phi_1 = theta_B + theta_D` and on `U(alpha T)` reads
//! `phi_alpha = theta_B + alpha theta_D`, where `theta_D = -int E_0 dt` is the
//! dynamical phase as acquired. Their difference isolates `theta_D`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::angle::{circular_distance, wrap_2pi, wrap_pm_pi};
use crate::dynamics::{
    invariant_support, loop_propagator, propagate_columns, step_norm, AdiabaticSchedule, Integrator,
};
use crate::error::{Error, Result};
use crate::exact::{diagonalize, diagonalize_matrix, min_gap, uniform_grid};
use crate::hamcore::{HamiltonianFamily, C64};
use crate::qpe::{
    bits_for_precision, qpe_sample, repetitions_for_failure, PhaseEstimate, SpectralInput, UnitarySpectrum,
};

/// Interval `[a, b]_{2 pi}`: `[a, b]` when `b >= a`, else `[0, b] u [a, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrappedInterval {
    pub a: f64,
    pub b: f64,
}

impl WrappedInterval {
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            a: wrap_2pi(a),
            b: wrap_2pi(b),
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        let t = wrap_2pi(theta);
        if self.b >= self.a {
            self.a <= t && t <= self.b
        } else {
            t >= self.a || t <= self.b
        }
    }

    /// Distance on the circle from `theta` to the interval.
    pub fn distance(&self, theta: f64) -> f64 {
        if self.contains(theta) {
            0.0
        } else {
            circular_distance(theta, self.a).min(circular_distance(theta, self.b))
        }
    }

    /// `[a + delta, b - delta]_{2 pi}`.
    pub fn shrink(&self, delta: f64) -> Self {
        Self::new(self.a + delta, self.b - delta)
    }

    /// `[b + delta, a - delta]_{2 pi}`: the other side of the promise gap.
    pub fn promise_complement(&self, delta: f64) -> Self {
        Self::new(self.b + delta, self.a - delta)
    }
}

/// How the runtime ratio `alpha` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AlphaMode {
    /// `alpha = 1 + 1/k` with `k` the smallest positive integer such that
    /// `(alpha - 1) T H_max <= cap`; `k = 1` without a cap.
    IntegerReciprocal { cap: Option<f64> },
    /// `alpha = 1 + pi / (T H_max + 2 eps_B)`.
    Formula,
}

impl Default for AlphaMode {
    fn default() -> Self {
        AlphaMode::IntegerReciprocal { cap: None }
    }
}

pub fn choose_alpha(t: f64, h_max: f64, epsilon_b: f64, mode: AlphaMode) -> Result<f64> {
    if !(t >= 0.0 && h_max >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "T = {t} and H_max = {h_max} must be non-negative"
        )));
    }
    if !(epsilon_b > 0.0) {
        return Err(Error::InvalidArgument(format!("eps_B = {epsilon_b} must be positive")));
    }
    match mode {
        AlphaMode::Formula => Ok(1.0 + PI / (t * h_max + 2.0 * epsilon_b)),
        AlphaMode::IntegerReciprocal { cap } => {
            let k = match cap {
                None => 1.0,
                Some(c) if c > 0.0 => (t * h_max / c).ceil().max(1.0),
                Some(c) => return Err(Error::InvalidArgument(format!("alpha cap {c} must be positive"))),
            };
            Ok(1.0 + 1.0 / k)
        }
    }
}

/// `eps_ph = (alpha - 1)/(alpha + 1) eps_B`.
pub fn phase_precision(alpha: f64, epsilon_b: f64) -> f64 {
    (alpha - 1.0) / (alpha + 1.0) * epsilon_b
}

/// `eta_QPE = 1 - (1 - eta)^{1/4}`.
pub fn qpe_failure_budget(eta: f64) -> f64 {
    1.0 - (1.0 - eta).powf(0.25)
}

/// `(theta_D_hat, theta_B_hat)`, both in `[0, 2 pi)`.
pub fn reconstruct_phases(m1: f64, m_alpha: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must exceed 1")));
    }
    let theta_d = wrap_2pi(wrap_pm_pi(m_alpha - m1) / (alpha - 1.0));
    let theta_b = wrap_2pi(m1 - theta_d);
    Ok((theta_d, theta_b))
}

/// Decision bit: 1 iff `theta_hat` lies within `delta - eps_B` of
/// `[a, b]_{2 pi}` (the boundary counts as inside).
pub fn decide_interval(theta_hat: f64, a: f64, b: f64, delta: f64, epsilon_b: f64) -> Result<u8> {
    if epsilon_b >= 2.0 * delta {
        return Err(Error::Config(format!(
            "eps_B = {epsilon_b} must be below 2 delta = {}",
            2.0 * delta
        )));
    }
    let d = WrappedInterval::new(a, b).distance(theta_hat);
    Ok(u8::from(d <= delta - epsilon_b))
}

/// Certified interval claim `(a, b, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalClaim {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpeConfig {
    pub epsilon_b: f64,
    pub eta: f64,
    pub alpha_mode: AlphaMode,
    /// Base runtime; calibrated by doubling when absent.
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Adiabatic error; defaults to `sqrt(eta_QPE)`.
    pub delta_adia: Option<f64>,
    pub integrator: Integrator,
    /// QPE bits; derived from `eps_ph` when absent.
    pub m: Option<u32>,
    /// Repetitions; derived from `eta_QPE` when absent.
    pub repetitions: Option<usize>,
    /// Largest runtime tried during calibration.
    pub t_limit: f64,
}

impl BpeConfig {
    pub fn new(epsilon_b: f64, eta: f64) -> Self {
        Self {
            epsilon_b,
            eta,
            alpha_mode: AlphaMode::default(),
            t: None,
            delta_adia: None,
            integrator: Integrator::default(),
            m: None,
            repetitions: None,
            t_limit: 1e5,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon_b > 0.0 && self.epsilon_b < PI) {
            return Err(Error::Config(format!("eps_B = {} not in (0, pi)", self.epsilon_b)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config(format!("eta = {} not in (0, 1)", self.eta)));
        }
        Ok(())
    }

    pub fn delta_adia(&self) -> f64 {
        self.delta_adia.unwrap_or_else(|| qpe_failure_budget(self.eta).sqrt())
    }
}

/// Spectral data of one loop propagator as seen from the input state.
#[derive(Debug, Clone)]
pub struct LoopSpectrum {
    pub t: f64,
    pub steps: usize,
    pub input: SpectralInput,
    /// `|<psi_0|U(T)|psi_0>|^2`.
    pub fidelity: f64,
}

/// Dimension above which propagators are compressed onto the low-energy
/// subspace of `H(0)`.
pub const FULL_PROPAGATOR_DIM: usize = 16;

/// Low-energy subspace size for compressed propagators.
pub const SUBSPACE_DIM: usize = 16;

fn polar_unitary(w: DMatrix<C64>) -> DMatrix<C64> {
    let svd = w.svd(true, true);
    let u = svd.u.expect("left vectors");
    let vt = svd.v_t.expect("right vectors");
    u * vt
}

/// Propagator restricted to `basis` columns, re-unitarized.
fn compressed_spectrum(
    family: &HamiltonianFamily,
    schedule: &AdiabaticSchedule,
    psi: &DVector<C64>,
    basis: &DMatrix<C64>,
) -> Result<(SpectralInput, f64)> {
    let ub = propagate_columns(family, schedule, basis)?;
    let w = polar_unitary(basis.adjoint() * ub);
    let spec = UnitarySpectrum::new(&w)?;
    let local = basis.adjoint() * psi;
    let input = spec.decompose(&local)?;
    let fid = local.dotc(&(&w * &local)).norm_sqr();
    Ok((input, fid))
}

/// Eigen-decomposition of `psi` under the loop propagator.
pub fn loop_spectrum(
    family: &HamiltonianFamily,
    schedule: &AdiabaticSchedule,
    psi: &DVector<C64>,
    low_basis: Option<&DMatrix<C64>>,
) -> Result<LoopSpectrum> {
    let (input, fidelity) = match low_basis {
        Some(b) => compressed_spectrum(family, schedule, psi, b)?,
        None => {
            let u = loop_propagator(family, schedule)?;
            let input = UnitarySpectrum::new(&u)?.decompose(psi)?;
            let fid = psi.dotc(&(&u * psi)).norm_sqr();
            (input, fid)
        }
    };
    Ok(LoopSpectrum {
        t: schedule.t,
        steps: schedule.steps,
        input,
        fidelity,
    })
}

/// Derived parameters of one BPE configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpePlan {
    #[serde(rename = "T")]
    pub t: f64,
    pub alpha: f64,
    pub epsilon_ph: f64,
    pub eta_qpe: f64,
    pub delta_adia: f64,
    pub m: u32,
    pub repetitions: usize,
    pub steps: usize,
    pub steps_alpha: usize,
    pub h_max: f64,
    pub gap: f64,
    /// `(T, fidelity, noise-free theta_B)` for every calibration level.
    pub calibration: Vec<(f64, f64, f64)>,
}

/// Propagator spectra cached for repeated seeded runs.
#[derive(Debug, Clone)]
pub struct PreparedBpe {
    pub plan: BpePlan,
    pub config: BpeConfig,
    pub base: LoopSpectrum,
    pub scaled: LoopSpectrum,
}

/// Lowest eigenvectors of `H(0)`, taken inside the invariant block holding
/// `psi` when the family has one.
fn low_energy_basis(family: &HamiltonianFamily, psi: &DVector<C64>) -> Result<Option<DMatrix<C64>>> {
    let d = family.dim();
    if d <= FULL_PROPAGATOR_DIM {
        return Ok(None);
    }
    match invariant_support(family, psi) {
        Some(idx) => {
            let h = family.eval(0.0)?;
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])]);
            let s = diagonalize_matrix(0.0, sub)?;
            let k = SUBSPACE_DIM.min(idx.len());
            let mut b = DMatrix::zeros(d, k);
            for (i, &r) in idx.iter().enumerate() {
                for c in 0..k {
                    b[(r, c)] = s.eigenvectors[(i, c)];
                }
            }
            Ok(Some(b))
        }
        None => {
            let s = diagonalize(family, 0.0)?;
            Ok(Some(s.eigenvectors.columns(0, SUBSPACE_DIM.min(d)).into_owned()))
        }
    }
}

/// Checks the input state against the `H(0)` ground state and returns the
/// minimum gap over a 64-point grid.
fn screen(family: &HamiltonianFamily, psi: &DVector<C64>, delta_adia: f64) -> Result<f64> {
    if psi.len() != family.dim() {
        return Err(Error::InvalidArgument(format!(
            "initial state has length {}, family dimension is {}",
            psi.len(),
            family.dim()
        )));
    }
    let (gap, _) = min_gap(family, &uniform_grid(64))?;
    let g = diagonalize(family, 0.0)?.ground_state();
    let fid = g.dotc(psi).norm_sqr() / psi.norm_squared();
    if fid < 1.0 - delta_adia * delta_adia {
        return Err(Error::InvalidArgument(format!(
            "initial state fidelity {fid:.6} with the H(0) ground state is below 1 - delta_adia^2"
        )));
    }
    Ok(gap)
}

/// Steps for runtime `t` under the step-size rule.
fn steps_for(t: f64, h_max: f64) -> usize {
    AdiabaticSchedule::min_steps(t, h_max)
}

/// Makes both runtimes use the same slice length so product-formula energy
/// shifts scale exactly with runtime. Returns `(alpha, steps, steps_alpha)`.
///
/// Integer mode rounds `steps` up to a multiple of `k = 1/(alpha - 1)`;
/// formula mode lowers `alpha` to `floor(steps alpha) / steps`, which keeps
/// the unwrap condition.
fn matched_steps(alpha: f64, steps: usize, mode: AlphaMode) -> (f64, usize, usize) {
    match mode {
        AlphaMode::IntegerReciprocal { .. } => {
            let k = (1.0 / (alpha - 1.0)).round().max(1.0) as usize;
            let steps = steps.div_ceil(k) * k;
            (alpha, steps, steps + steps / k)
        }
        AlphaMode::Formula => {
            let steps_a = ((steps as f64) * alpha).floor() as usize;
            if steps_a > steps {
                (steps_a as f64 / steps as f64, steps, steps_a)
            } else {
                // too few slices to resolve alpha: refine both runs
                let scale = (2.0 / (alpha - 1.0)).ceil() as usize;
                let steps = steps * scale;
                let steps_a = ((steps as f64) * alpha).floor() as usize;
                (steps_a as f64 / steps as f64, steps, steps_a)
            }
        }
    }
}

struct SpectrumCache<'a> {
    family: &'a HamiltonianFamily,
    psi: &'a DVector<C64>,
    basis: Option<DMatrix<C64>>,
    integrator: Integrator,
    sign_reversed: bool,
    cache: BTreeMap<u64, LoopSpectrum>,
}

impl SpectrumCache<'_> {
    fn get(&mut self, t: f64, steps: usize) -> Result<LoopSpectrum> {
        let key = t.to_bits() ^ (steps as u64).rotate_left(17);
        if let Some(s) = self.cache.get(&key) {
            return Ok(s.clone());
        }
        let mut sched = AdiabaticSchedule::new(t, 0.0)
            .with_steps(steps)
            .with_integrator(self.integrator);
        if self.sign_reversed {
            sched = sched.reversed();
        }
        let s = loop_spectrum(self.family, &sched, self.psi, self.basis.as_ref())?;
        self.cache.insert(key, s.clone());
        Ok(s)
    }
}

fn dominant_phase(s: &LoopSpectrum) -> f64 {
    s.input.dominant().0
}

impl PreparedBpe {
    pub fn new(family: &HamiltonianFamily, initial: &DVector<C64>, config: &BpeConfig) -> Result<Self> {
        config.validate()?;
        let delta_adia = config.delta_adia();
        let gap = screen(family, initial, delta_adia)?;
        let h_max = family.norm_bounds().h_max;
        let step_h = step_norm(family, config.integrator);
        let eta_qpe = qpe_failure_budget(config.eta);
        let mut cache = SpectrumCache {
            family,
            psi: initial,
            basis: low_energy_basis(family, initial)?,
            integrator: config.integrator,
            sign_reversed: false,
            cache: BTreeMap::new(),
        };
        let alpha_for = |t: f64| choose_alpha(t, h_max, config.epsilon_b, config.alpha_mode);
        let level = |cache: &mut SpectrumCache, t: f64| -> Result<(f64, LoopSpectrum, LoopSpectrum, f64)> {
            let (alpha, steps, steps_a) = matched_steps(alpha_for(t)?, steps_for(t, step_h), config.alpha_mode);
            let base = cache.get(t, steps)?;
            let scaled = cache.get(t * steps_a as f64 / steps as f64, steps_a)?;
            let (_, tb) = reconstruct_phases(dominant_phase(&base), dominant_phase(&scaled), alpha)?;
            Ok((alpha, base, scaled, tb))
        };
        let mut calibration = Vec::new();
        let (t, alpha, base, scaled) = match config.t {
            Some(t) => {
                let (alpha, base, scaled, tb) = level(&mut cache, t)?;
                calibration.push((t, base.fidelity, tb));
                (t, alpha, base, scaled)
            }
            None => {
                let min_fid = 1.0 - delta_adia * delta_adia;
                let mut t = if family.is_static() { 1.0 } else { (4.0 / gap).max(1.0) };
                let mut prev: Option<f64> = None;
                loop {
                    let (alpha, base, scaled, tb) = level(&mut cache, t)?;
                    calibration.push((t, base.fidelity, tb));
                    let ok_fid = base.fidelity >= min_fid && scaled.fidelity >= min_fid;
                    let stable = prev.is_some_and(|p| circular_distance(p, tb) <= config.epsilon_b / 8.0);
                    if ok_fid && (stable || family.is_static()) {
                        break (t, alpha, base, scaled);
                    }
                    prev = ok_fid.then_some(tb);
                    if 2.0 * t > config.t_limit {
                        return Err(Error::NonConvergence(format!(
                            "runtime calibration reached T = {t} without a stable Berry phase (fidelity {:.6})",
                            base.fidelity
                        )));
                    }
                    t *= 2.0;
                }
            }
        };
        let epsilon_ph = phase_precision(alpha, config.epsilon_b);
        let m = match config.m {
            Some(m) => m,
            None => bits_for_precision(epsilon_ph)?,
        };
        let repetitions = match config.repetitions {
            Some(r) => r,
            None => repetitions_for_failure(eta_qpe)?,
        };
        Ok(Self {
            plan: BpePlan {
                t,
                alpha,
                epsilon_ph,
                eta_qpe,
                delta_adia,
                m,
                repetitions,
                steps: base.steps,
                steps_alpha: scaled.steps,
                h_max,
                gap,
                calibration,
            },
            config: config.clone(),
            base,
            scaled,
        })
    }

    /// Noise-free reconstruction from the dominant eigenphases.
    pub fn noiseless_estimate(&self) -> (f64, f64) {
        reconstruct_phases(
            dominant_phase(&self.base),
            dominant_phase(&self.scaled),
            self.plan.alpha,
        )
        .expect("alpha above 1")
    }

    pub fn run(&self, seed: u64) -> Result<BpeOutcome> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (s1, s2): (u64, u64) = (rng.gen(), rng.gen());
        let p = &self.plan;
        let m1 = qpe_sample(&self.base.input, p.m, p.repetitions, p.epsilon_ph, s1)?;
        let ma = qpe_sample(&self.scaled.input, p.m, p.repetitions, p.epsilon_ph, s2)?;
        let (theta_d_hat, theta_b_hat) = reconstruct_phases(m1.value, ma.value, p.alpha)?;
        let success_bound = (1.0 - p.eta_qpe) * m1.input_fidelity * (1.0 - p.eta_qpe) * ma.input_fidelity;
        Ok(BpeOutcome {
            theta_b_hat,
            theta_d_hat,
            seed,
            qpe_seeds: [s1, s2],
            m1,
            m_alpha: ma,
            success_bound,
        })
    }
}

/// Result of one seeded BPE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpeOutcome {
    #[serde(rename = "theta_B_hat")]
    pub theta_b_hat: f64,
    #[serde(rename = "theta_D_hat")]
    pub theta_d_hat: f64,
    pub seed: u64,
    pub qpe_seeds: [u64; 2],
    pub m1: PhaseEstimate,
    pub m_alpha: PhaseEstimate,
    /// `(1 - eta_QPE) F_1 (1 - eta_QPE) F_alpha` with the two fidelity
    /// factors reported separately in `m1` and `m_alpha`.
    pub success_bound: f64,
}

pub fn run_bpe(
    family: &HamiltonianFamily,
    initial: &DVector<C64>,
    config: &BpeConfig,
    seed: u64,
) -> Result<BpeOutcome> {
    PreparedBpe::new(family, initial, config)?.run(seed)
}

/// Ground state of `H(0)` after checking `|<c|psi_0>|^2 >= gamma` for a
/// guiding state `c`.
pub fn prepare_ground_state(
    family: &HamiltonianFamily,
    guiding: Option<&DVector<C64>>,
    gamma: f64,
) -> Result<DVector<C64>> {
    let s = diagonalize(family, 0.0)?;
    s.require_gapped()?;
    let g = s.ground_state();
    if let Some(c) = guiding {
        let ov = c.dotc(&g).norm_sqr() / c.norm_squared();
        if ov < gamma {
            return Err(Error::Config(format!(
                "guiding-state overlap {ov:.4e} below gamma = {gamma:.4e}"
            )));
        }
    }
    Ok(g)
}

/// Cached spectra for the forward/backward composite `U_bar(T) U(T)`.
#[derive(Debug, Clone)]
pub struct PreparedMurta {
    pub t: f64,
    pub steps: usize,
    pub m: u32,
    pub repetitions: usize,
    pub epsilon_ph: f64,
    pub input: SpectralInput,
    pub calibration: Vec<(f64, f64, f64)>,
}

fn composite_spectrum(
    family: &HamiltonianFamily,
    psi: &DVector<C64>,
    t: f64,
    steps: usize,
    integrator: Integrator,
    basis: Option<&DMatrix<C64>>,
) -> Result<(SpectralInput, f64)> {
    let sched = AdiabaticSchedule::new(t, 0.0)
        .with_steps(steps)
        .with_integrator(integrator);
    let w = match basis {
        None => loop_propagator(family, &sched.reversed())? * loop_propagator(family, &sched)?,
        Some(b) => {
            let fwd = b.adjoint() * propagate_columns(family, &sched, b)?;
            let bwd = b.adjoint() * propagate_columns(family, &sched.reversed(), b)?;
            polar_unitary(bwd * fwd)
        }
    };
    let local = match basis {
        Some(b) => b.adjoint() * psi,
        None => psi.clone(),
    };
    let input = UnitarySpectrum::new(&w)?.decompose(&local)?;
    let fid = local.dotc(&(&w * &local)).norm_sqr();
    Ok((input, fid))
}

impl PreparedMurta {
    pub fn new(family: &HamiltonianFamily, initial: &DVector<C64>, config: &BpeConfig) -> Result<Self> {
        config.validate()?;
        let delta_adia = config.delta_adia();
        let gap = screen(family, initial, delta_adia)?;
        let step_h = step_norm(family, config.integrator);
        let basis = low_energy_basis(family, initial)?;
        // output is half the measured phase
        let epsilon_ph = 2.0 * config.epsilon_b;
        let mut calibration = Vec::new();
        let (t, steps, input) = match config.t {
            Some(t) => {
                let steps = steps_for(t, step_h);
                let (input, fid) = composite_spectrum(family, initial, t, steps, config.integrator, basis.as_ref())?;
                calibration.push((t, fid, input.dominant().0 / 2.0));
                (t, steps, input)
            }
            None => {
                let min_fid = (1.0 - delta_adia * delta_adia).powi(2);
                let mut t = if family.is_static() { 1.0 } else { (4.0 / gap).max(1.0) };
                let mut prev: Option<f64> = None;
                loop {
                    let steps = steps_for(t, step_h);
                    let (input, fid) =
                        composite_spectrum(family, initial, t, steps, config.integrator, basis.as_ref())?;
                    let phase = input.dominant().0;
                    calibration.push((t, fid, phase / 2.0));
                    let stable = prev.is_some_and(|p| circular_distance(p, phase) <= config.epsilon_b / 8.0);
                    if fid >= min_fid && (stable || family.is_static()) {
                        break (t, steps, input);
                    }
                    prev = (fid >= min_fid).then_some(phase);
                    if 2.0 * t > config.t_limit {
                        return Err(Error::NonConvergence(format!(
                            "composite-loop calibration reached T = {t}"
                        )));
                    }
                    t *= 2.0;
                }
            }
        };
        let m = match config.m {
            Some(m) => m,
            None => bits_for_precision(epsilon_ph)?,
        };
        let repetitions = match config.repetitions {
            Some(r) => r,
            None => repetitions_for_failure(config.eta)?,
        };
        Ok(Self {
            t,
            steps,
            m,
            repetitions,
            epsilon_ph,
            input,
            calibration,
        })
    }

    pub fn run(&self, seed: u64) -> Result<MurtaOutcome> {
        let est = qpe_sample(&self.input, self.m, self.repetitions, self.epsilon_ph, seed)?;
        Ok(MurtaOutcome {
            theta_hat: est.value / 2.0,
            seed,
            estimate: est,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MurtaOutcome {
    /// Half the measured phase of `U_bar U`, in `[0, pi)`.
    pub theta_hat: f64,
    pub seed: u64,
    pub estimate: PhaseEstimate,
}

pub fn murta_bpe(
    family: &HamiltonianFamily,
    initial: &DVector<C64>,
    config: &BpeConfig,
    seed: u64,
) -> Result<MurtaOutcome> {
    PreparedMurta::new(family, initial, config)?.run(seed)
}

/// Distance between two angles modulo `pi`.
pub fn distance_mod_pi(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(PI);
    d.min(PI - d)
}

/// Result record written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpeRecord {
    #[serde(rename = "theta_B_hat")]
    pub theta_b_hat: f64,
    #[serde(rename = "theta_D_hat")]
    pub theta_d_hat: f64,
    #[serde(rename = "epsilon_B")]
    pub epsilon_b: f64,
    pub eta: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub m: u32,
    #[serde(rename = "R")]
    pub repetitions: usize,
    pub seed: u64,
    #[serde(rename = "oracle_theta_B")]
    pub oracle_theta_b: Option<f64>,
    pub decision: Option<u8>,
}

impl BpeRecord {
    pub fn new(prep: &PreparedBpe, out: &BpeOutcome, oracle: Option<f64>, decision: Option<u8>) -> Self {
        Self {
            theta_b_hat: out.theta_b_hat,
            theta_d_hat: out.theta_d_hat,
            epsilon_b: prep.config.epsilon_b,
            eta: prep.config.eta,
            alpha: prep.plan.alpha,
            t: prep.plan.t,
            m: prep.plan.m,
            repetitions: prep.plan.repetitions,
            seed: out.seed,
            oracle_theta_b: oracle,
            decision,
        }
    }
}

/// Angle difference helper re-exported for callers comparing estimates.
pub fn angular_error(estimate: f64, truth: f64) -> f64 {
    circular_distance(estimate, truth)
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn is<T: Send + Sync>() {}
    is::<PreparedBpe>();
    is::<PreparedMurta>();
    let _ = TAU;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::wilson_loop_phase;
    use crate::families::{constant_z, equatorial_loop, random_loop, tilted_loop};
    use proptest::prelude::*;

    #[test]
    fn alpha_examples() {
        let a = choose_alpha(100.0, 1.0, 0.01, AlphaMode::Formula).unwrap();
        assert!((a - (1.0 + PI / 100.02)).abs() < 1e-15);
        assert!((a - 1.031411).abs() < 2e-6);
        let a0 = choose_alpha(0.0, 1.0, 0.01, AlphaMode::Formula).unwrap();
        assert_eq!(a0, 1.0 + PI / 0.02);
        // cap chosen so that T H_max / cap = 10
        let ai = choose_alpha(50.0, 2.0, 0.01, AlphaMode::IntegerReciprocal { cap: Some(10.0) }).unwrap();
        assert!((ai - 1.1).abs() < 1e-15);
        assert_eq!(choose_alpha(50.0, 2.0, 0.01, AlphaMode::default()).unwrap(), 2.0);
    }

    #[test]
    fn reconstruction_example() {
        let (tb, td, alpha) = (2.0, 50.0, 1.1);
        let m1 = wrap_2pi(tb + td);
        let ma = wrap_2pi(tb + alpha * td);
        assert!((m1 - 1.7345).abs() < 1e-4 && (ma - 0.4513).abs() < 1e-4);
        assert!((wrap_pm_pi(ma - m1) + 1.2832).abs() < 1e-4);
        let (d, b) = reconstruct_phases(m1, ma, alpha).unwrap();
        assert!((d - 6.0177).abs() < 1e-4);
        assert!(circular_distance(d, 50.0) < 1e-10);
        assert!((b - 2.0).abs() < 1e-10);
        assert_eq!(reconstruct_phases(0.7, 0.7, 1.5).unwrap().0, 0.0);
        let (d0, b0) = reconstruct_phases(0.7, 0.7, 2.0).unwrap();
        assert_eq!((d0, b0), (0.0, 0.7));
        assert!(reconstruct_phases(0.1, 0.2, 1.0).is_err());
    }

    #[test]
    fn decision_examples() {
        assert_eq!(decide_interval(1.0, 0.0, PI, 0.1, 0.05).unwrap(), 1);
        assert_eq!(decide_interval(5.0, 0.0, PI, 0.1, 0.05).unwrap(), 0);
        assert_eq!(decide_interval(0.0, 1.5 * PI, 0.5 * PI, 0.1, 0.05).unwrap(), 1);
        assert!(matches!(decide_interval(1.0, 0.0, PI, 0.1, 0.2), Err(Error::Config(_))));
        // boundary distance exactly delta - eps counts as inside
        let iv = WrappedInterval::new(1.0, 2.0);
        assert_eq!(iv.distance(2.5), 0.5);
        assert_eq!(decide_interval(2.5, 1.0, 2.0, 0.75, 0.25).unwrap(), 1);
    }

    proptest! {
        #[test]
        fn membership_is_periodic(a in 0.0..TAU, b in 0.0..TAU, t in 0.0..TAU, k in -3i32..3) {
            let iv = WrappedInterval::new(a, b);
            let shifted = t + TAU * k as f64;
            // avoid comparing points that round across an endpoint
            prop_assume!(circular_distance(t, iv.a) > 1e-9 && circular_distance(t, iv.b) > 1e-9);
            prop_assert_eq!(iv.contains(t), iv.contains(shifted));
        }

        #[test]
        fn promise_sides_partition(a in 0.0..TAU, len in 0.5..5.5f64, delta in 0.01..0.2f64, t in 0.0..TAU) {
            let iv = WrappedInterval::new(a, a + len);
            let yes = iv.shrink(delta);
            let no = iv.promise_complement(delta);
            prop_assume!(iv.distance(t) >= delta || yes.contains(t));
            prop_assume!(circular_distance(t, iv.a) >= delta && circular_distance(t, iv.b) >= delta);
            prop_assert!(yes.contains(t) != no.contains(t));
        }

        #[test]
        fn integer_mode_reconstructs_exactly(tb in 0.0..TAU, td in -1e3..1e3f64, k in 1u32..20) {
            let alpha = 1.0 + 1.0 / k as f64;
            let (d, b) = reconstruct_phases(wrap_2pi(tb + td), wrap_2pi(tb + alpha * td), alpha).unwrap();
            // exact up to the rounding of the planted inputs
            let tol = 1e-12 * (1.0 + td.abs() * alpha) * k as f64 * 4.0;
            prop_assert!(circular_distance(d, td) <= tol);
            prop_assert!(circular_distance(b, tb) <= tol);
        }

        #[test]
        fn formula_mode_reconstructs_in_regime(tb in 0.0..TAU, t in 0.0..500.0f64, h in 0.1..5.0f64, frac in -1.0..1.0f64, eps in 0.001..0.5f64) {
            let alpha = choose_alpha(t, h, eps, AlphaMode::Formula).unwrap();
            let td = frac * t * h;
            let (d, b) = reconstruct_phases(wrap_2pi(tb + td), wrap_2pi(tb + alpha * td), alpha).unwrap();
            let tol = 1e-12 * (1.0 + td.abs()) / (alpha - 1.0) * 4.0;
            prop_assert!(circular_distance(d, td) <= tol);
            prop_assert!(circular_distance(b, tb) <= tol);
        }
    }

    #[test]
    fn constant_family_gives_zero() {
        let f = constant_z(0.7);
        let psi = prepare_ground_state(&f, None, 0.0).unwrap();
        let prep = PreparedBpe::new(&f, &psi, &BpeConfig::new(0.05, 0.05)).unwrap();
        for seed in 0..20 {
            let out = prep.run(seed).unwrap();
            assert!(circular_distance(out.theta_b_hat, 0.0) <= 0.05);
        }
    }

    #[test]
    fn equatorial_loop_estimates_pi() {
        let f = equatorial_loop();
        let psi = prepare_ground_state(&f, None, 0.0).unwrap();
        let prep = PreparedBpe::new(&f, &psi, &BpeConfig::new(0.05, 0.05)).unwrap();
        let good = (0..200)
            .filter(|&s| circular_distance(prep.run(s).unwrap().theta_b_hat, PI) <= 0.05)
            .count();
        assert!(good >= 190, "{good}/200");
    }

    #[test]
    fn runtime_doubling_keeps_geometry() {
        let f = tilted_loop(1.1);
        let psi = prepare_ground_state(&f, None, 0.0).unwrap();
        let cfg = BpeConfig::new(0.05, 0.05);
        let prep = PreparedBpe::new(&f, &psi, &cfg).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.t = Some(2.0 * prep.plan.t);
        let prep2 = PreparedBpe::new(&f, &psi, &cfg2).unwrap();
        for seed in 0..20 {
            let a = prep.run(seed).unwrap().theta_b_hat;
            let b = prep2.run(seed + 1000).unwrap().theta_b_hat;
            assert!(circular_distance(a, b) <= 0.1);
            let decide = |x| decide_interval(x, 0.0, PI, 0.2, 0.05).unwrap();
            assert_eq!(decide(a), decide(b));
        }
    }

    #[test]
    fn formula_mode_runs_in_regime() {
        let f = tilted_loop(0.8);
        let psi = prepare_ground_state(&f, None, 0.0).unwrap();
        let mut cfg = BpeConfig::new(0.05, 0.05);
        cfg.alpha_mode = AlphaMode::Formula;
        let prep = PreparedBpe::new(&f, &psi, &cfg).unwrap();
        let truth = wilson_loop_phase(&f, 1024).unwrap();
        let good = (0..50)
            .filter(|&s| circular_distance(prep.run(s).unwrap().theta_b_hat, truth) <= 0.05)
            .count();
        assert!(good >= 46, "{good}/50");
    }

    #[test]
    fn same_seed_same_outcome() {
        let f = equatorial_loop();
        let psi = prepare_ground_state(&f, None, 0.0).unwrap();
        let prep = PreparedBpe::new(&f, &psi, &BpeConfig::new(0.05, 0.05)).unwrap();
        assert_eq!(prep.run(9).unwrap(), prep.run(9).unwrap());
        assert_ne!(prep.run(9).unwrap().qpe_seeds, prep.run(10).unwrap().qpe_seeds);
    }

    #[test]
    fn murta_aliases_upper_half() {
        let f = equatorial_loop();
        let psi = prepare_ground_state(&f, None, 0.0).unwrap();
        let cfg = BpeConfig::new(0.05, 0.05);
        let prep = PreparedMurta::new(&f, &psi, &cfg).unwrap();
        for seed in 0..20 {
            let out = prep.run(seed).unwrap();
            assert!((0.0..PI).contains(&out.theta_hat));
            assert!(distance_mod_pi(out.theta_hat, 0.0) <= 0.1);
        }
        // theta_B = pi (1 + cos 2.0) lies in (pi, 2 pi)? no: cos 2 < 0, so in (0, pi)
        let lower = tilted_loop(2.0);
        let truth = wilson_loop_phase(&lower, 1024).unwrap();
        assert!(truth < PI);
        let psi = prepare_ground_state(&lower, None, 0.0).unwrap();
        let out = murta_bpe(&lower, &psi, &cfg, 3).unwrap();
        assert!(circular_distance(out.theta_hat, truth) <= 0.1);
        let upper = tilted_loop(1.0);
        let truth = wilson_loop_phase(&upper, 1024).unwrap();
        assert!(truth > PI);
        let psi = prepare_ground_state(&upper, None, 0.0).unwrap();
        let out = murta_bpe(&upper, &psi, &cfg, 3).unwrap();
        assert!(distance_mod_pi(out.theta_hat, truth - PI) <= 0.1);
        assert!(circular_distance(out.theta_hat, truth) > 1.0);
    }

    #[test]
    fn poor_initial_state_is_refused() {
        let f = equatorial_loop();
        let excited = diagonalize(&f, 0.0).unwrap().state(1);
        assert!(PreparedBpe::new(&f, &excited, &BpeConfig::new(0.05, 0.05)).is_err());
    }

    #[test]
    fn random_two_qubit_family_matches_oracle() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let f = loop {
            let f = random_loop(2, &mut rng);
            if min_gap(&f, &uniform_grid(64)).map(|g| g.0 >= 0.5).unwrap_or(false) {
                break f;
            }
        };
        let truth = wilson_loop_phase(&f, 1024).unwrap();
        let psi = prepare_ground_state(&f, None, 0.0).unwrap();
        let prep = PreparedBpe::new(&f, &psi, &BpeConfig::new(0.05, 0.05)).unwrap();
        let good = (0..100)
            .filter(|&s| circular_distance(prep.run(s).unwrap().theta_b_hat, truth) <= 0.05)
            .count();
        assert!(good >= 92, "{good}/100, plan {:?}", prep.plan);
    }
}
