//! Quantum phase estimation by exact outcome amplitudes.
//!
//! For an input `sum_k c_k |u_k>` over eigenvectors `U|u_k> = e^{i phi_k}|u_k>`
//! the `m`-bit QPE outcome distribution is the weighted mixture of Fejer
//! kernels `|c_k|^2 F_m(phi_k)`. Outcomes are drawn from it with a seeded
//! generator; [`register_qpe_distribution`] runs the circuit gate by gate
//! as a cross-check.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::angle::{circular_distance, wrap_2pi};
use crate::dynamics::{controlled_matrix_power, loop_propagator, AdiabaticSchedule, Register, StateVector};
use crate::error::{Error, Result};
use crate::hamcore::{HamiltonianFamily, C64};

/// Largest supported number of precision qubits.
pub const MAX_BITS: u32 = 20;

/// Input weight on the dominant eigencomponent below which a warning is set.
pub const DEFAULT_MIN_FIDELITY: f64 = 0.99;

/// Half-width of the outcome window sampled around each Fejer peak.
const WINDOW: i64 = 64;

/// Aggregated QPE readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    /// Circular median of the outcome angles, in `[0, 2 pi)`.
    pub value: f64,
    /// Target accuracy `eps_ph` the bit count was chosen for.
    pub precision: f64,
    pub repetitions: usize,
    pub m: u32,
    pub raw_outcomes: Vec<u64>,
    /// Largest eigencomponent weight of the input state.
    pub input_fidelity: f64,
    pub low_fidelity_warning: bool,
}

/// Eigenphase decomposition of an input state under a unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralInput {
    /// Eigenphases in `[0, 2 pi)`.
    pub phases: Vec<f64>,
    /// `|<u_k|psi>|^2`, summing to 1.
    pub weights: Vec<f64>,
}

impl SpectralInput {
    /// A single eigenphase with weight 1.
    pub fn eigenstate(phase: f64) -> Self {
        Self {
            phases: vec![wrap_2pi(phase)],
            weights: vec![1.0],
        }
    }

    /// `(phase, weight)` of the heaviest component.
    pub fn dominant(&self) -> (f64, f64) {
        let k = (0..self.weights.len())
            .max_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]))
            .unwrap_or(0);
        (self.phases[k], self.weights[k])
    }
}

/// Eigenvectors and eigenphases of a (numerically) unitary matrix.
#[derive(Debug, Clone)]
pub struct UnitarySpectrum {
    pub phases: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl UnitarySpectrum {
    pub fn new(u: &DMatrix<C64>) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::InvalidArgument("unitary must be square".into()));
        }
        let d = u.nrows();
        let schur = nalgebra::Schur::try_new(u.clone(), f64::EPSILON, 1000 * d.max(10))
            .ok_or_else(|| Error::NonConvergence("Schur decomposition of the loop propagator".into()))?;
        let (q, t) = schur.unpack();
        let phases = (0..d).map(|k| wrap_2pi(t[(k, k)].arg())).collect();
        Ok(Self { phases, vectors: q })
    }

    pub fn decompose(&self, psi: &DVector<C64>) -> Result<SpectralInput> {
        if psi.len() != self.vectors.nrows() {
            return Err(Error::InvalidArgument(format!(
                "state of length {} for a {}-dimensional unitary",
                psi.len(),
                self.vectors.nrows()
            )));
        }
        let c = self.vectors.adjoint() * psi;
        let mut weights: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(SpectralInput {
            phases: self.phases.clone(),
            weights,
        })
    }
}

/// Probability of outcome `j` for eigenphase `phase` with `m` bits.
pub fn fejer(phase: f64, m: u32, j: u64) -> f64 {
    let n = (1u64 << m) as f64;
    let delta = phase / TAU * n - j as f64;
    let den = (PI * delta / n).sin();
    if den.abs() < 1e-300 || (den * n).abs() < 1e-12 {
        return 1.0;
    }
    let num = (PI * delta).sin();
    (num * num) / (n * n * den * den)
}

/// Full outcome distribution. `O(2^m)` per component.
pub fn outcome_distribution(input: &SpectralInput, m: u32) -> Vec<f64> {
    let n = 1u64 << m;
    (0..n)
        .map(|j| {
            input
                .phases
                .iter()
                .zip(&input.weights)
                .map(|(&p, &w)| if w > 0.0 { w * fejer(p, m, j) } else { 0.0 })
                .sum()
        })
        .collect()
}

/// Index drawn with probability proportional to `weights`.
pub fn pick_component<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// One outcome for a single eigenphase.
pub fn sample_phase_outcome<R: Rng>(phase: f64, m: u32, rng: &mut R) -> u64 {
    let n = 1i64 << m;
    let centre = (phase / TAU * n as f64).floor() as i64;
    let half = WINDOW.min(n / 2).max(1);
    let window: Vec<u64> = ((centre - half + 1)..=(centre + half))
        .map(|j| j.rem_euclid(n) as u64)
        .collect();
    let mut window_sorted = window.clone();
    window_sorted.sort_unstable();
    window_sorted.dedup();
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &j in &window_sorted {
        acc += fejer(phase, m, j);
        if u < acc {
            return j;
        }
    }
    // tail: enumerate the rest in index order
    for j in 0..n as u64 {
        if window_sorted.binary_search(&j).is_ok() {
            continue;
        }
        acc += fejer(phase, m, j);
        if u < acc {
            return j;
        }
    }
    // rounding left a sliver of mass unassigned
    centre.rem_euclid(n) as u64
}

/// One outcome for a mixture.
pub fn sample_outcome<R: Rng>(input: &SpectralInput, m: u32, rng: &mut R) -> u64 {
    let k = pick_component(&input.weights, rng);
    sample_phase_outcome(input.phases[k], m, rng)
}

/// Outcome `j` as an angle.
pub fn outcome_angle(j: u64, m: u32) -> f64 {
    TAU * j as f64 / (1u64 << m) as f64
}

/// Fréchet median on the circle over the sample points; ties go to the
/// smallest angle in `[0, 2 pi)`.
pub fn circular_median(angles: &[f64]) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::InvalidArgument("circular median of an empty list".into()));
    }
    let pts: Vec<f64> = angles.iter().map(|&a| wrap_2pi(a)).collect();
    let mut best = (f64::INFINITY, f64::INFINITY);
    for &x in &pts {
        let cost: f64 = pts.iter().map(|&y| circular_distance(x, y)).sum();
        let tie = (cost - best.0).abs() <= 1e-12 * best.0.max(1.0);
        if (cost < best.0 && !tie) || (tie && x < best.1) {
            best = (cost, x);
        }
    }
    Ok(best.1)
}

/// `ceil(log2(2 pi / eps)) + 2` bits: the outcome grid is four times finer
/// than the target so a single shot lands within `eps` with probability
/// above 0.8.
pub fn bits_for_precision(eps: f64) -> Result<u32> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("precision {eps} must be positive")));
    }
    let m = (TAU / eps).log2().ceil().max(0.0) as u32 + 2;
    if m > MAX_BITS {
        return Err(Error::Config(format!(
            "precision {eps:.3e} needs {m} QPE bits, limit is {MAX_BITS}"
        )));
    }
    Ok(m)
}

/// Odd repetition count so the median fails with probability at most `eta`
/// given per-shot success above 0.8 (Hoeffding with margin 0.3).
pub fn repetitions_for_failure(eta: f64) -> Result<usize> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "failure probability {eta} not in (0, 1)"
        )));
    }
    let r = ((1.0 / eta).ln() / (2.0 * 0.3 * 0.3)).ceil().max(1.0) as usize;
    Ok(if r.is_multiple_of(2) { r + 1 } else { r })
}

/// Samples `repetitions` outcomes and aggregates them.
pub fn qpe_sample(
    input: &SpectralInput,
    m: u32,
    repetitions: usize,
    precision: f64,
    seed: u64,
) -> Result<PhaseEstimate> {
    if m == 0 || m > MAX_BITS {
        return Err(Error::Config(format!("QPE bits {m} outside 1..={MAX_BITS}")));
    }
    if repetitions == 0 {
        return Err(Error::InvalidArgument("at least one repetition is needed".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let raw: Vec<u64> = (0..repetitions).map(|_| sample_outcome(input, m, &mut rng)).collect();
    let angles: Vec<f64> = raw.iter().map(|&j| outcome_angle(j, m)).collect();
    let (_, w) = input.dominant();
    Ok(PhaseEstimate {
        value: circular_median(&angles)?,
        precision,
        repetitions,
        m,
        raw_outcomes: raw,
        input_fidelity: w,
        low_fidelity_warning: w < DEFAULT_MIN_FIDELITY,
    })
}

/// QPE on an explicit unitary.
pub fn qpe_unitary(
    u: &DMatrix<C64>,
    input: &DVector<C64>,
    m: u32,
    repetitions: usize,
    seed: u64,
) -> Result<PhaseEstimate> {
    let spec = UnitarySpectrum::new(u)?.decompose(input)?;
    qpe_sample(&spec, m, repetitions, TAU / (1u64 << m) as f64, seed)
}

/// QPE on the loop propagator of `family` under `schedule`.
pub fn qpe_run(
    family: &HamiltonianFamily,
    schedule: &AdiabaticSchedule,
    input: &DVector<C64>,
    m: u32,
    repetitions: usize,
    seed: u64,
) -> Result<PhaseEstimate> {
    if m == 0 || m > MAX_BITS {
        return Err(Error::Config(format!("QPE bits {m} outside 1..={MAX_BITS}")));
    }
    let u = loop_propagator(family, schedule)?;
    qpe_unitary(&u, input, m, repetitions, seed)
}

fn apply_one_qubit(v: &mut DVector<C64>, n: usize, q: usize, g: [[C64; 2]; 2]) {
    let bit = 1usize << (n - 1 - q);
    for b in 0..v.len() {
        if b & bit != 0 {
            continue;
        }
        let (a0, a1) = (v[b], v[b | bit]);
        v[b] = g[0][0] * a0 + g[0][1] * a1;
        v[b | bit] = g[1][0] * a0 + g[1][1] * a1;
    }
}

fn hadamard(v: &mut DVector<C64>, n: usize, q: usize) {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    apply_one_qubit(v, n, q, [[h, h], [h, -h]]);
}

fn controlled_phase(v: &mut DVector<C64>, n: usize, a: usize, b: usize, angle: f64) {
    let (ba, bb) = (1usize << (n - 1 - a), 1usize << (n - 1 - b));
    let ph = C64::from_polar(1.0, angle);
    for (i, amp) in v.iter_mut().enumerate() {
        if i & ba != 0 && i & bb != 0 {
            *amp *= ph;
        }
    }
}

fn swap(v: &mut DVector<C64>, n: usize, a: usize, b: usize) {
    let (ba, bb) = (1usize << (n - 1 - a), 1usize << (n - 1 - b));
    for i in 0..v.len() {
        if i & ba != 0 && i & bb == 0 {
            v.swap_rows(i, i ^ ba ^ bb);
        }
    }
}

/// Inverse QFT on qubits `0..m` of an `n`-qubit state (qubit 0 most
/// significant).
pub fn inverse_qft(v: &mut DVector<C64>, n: usize, m: usize) {
    for i in 0..m / 2 {
        swap(v, n, i, m - 1 - i);
    }
    for i in (0..m).rev() {
        for k in ((i + 1)..m).rev() {
            controlled_phase(v, n, k, i, -TAU / (1u64 << (k - i + 1)) as f64);
        }
        hadamard(v, n, i);
    }
}

/// Runs the textbook QPE circuit on `m` ancillas followed by the system and
/// returns the ancilla outcome distribution.
pub fn register_qpe_distribution(u: &DMatrix<C64>, input: &DVector<C64>, m: u32) -> Result<Vec<f64>> {
    let m = m as usize;
    let sys = input.len().trailing_zeros() as usize;
    let n = m + sys;
    crate::budget::DenseBudget::current().check(n)?;
    let mut zero = DVector::zeros(1 << m);
    zero[0] = C64::new(1.0, 0.0);
    let layout = vec![
        Register {
            name: "ancilla".into(),
            start: 0,
            len: m,
        },
        Register {
            name: "system".into(),
            start: m,
            len: sys,
        },
    ];
    let mut v = zero.kronecker(input);
    for q in 0..m {
        hadamard(&mut v, n, q);
    }
    let mut state = StateVector::with_layout(v, layout.clone())?;
    for q in 0..m {
        state = controlled_matrix_power(&state, u, 1 << (m - 1 - q), q)?;
    }
    let mut v = state.into_amplitudes();
    inverse_qft(&mut v, n, m);
    let d = 1usize << sys;
    Ok((0..(1usize << m))
        .map(|j| (0..d).map(|s| v[j * d + s].norm_sqr()).sum())
        .collect())
}

/// Outcome histogram as `outcome,count` rows.
pub fn write_histogram_csv(estimate: &PhaseEstimate, path: &Path) -> Result<()> {
    let mut counts = std::collections::BTreeMap::new();
    for &j in &estimate.raw_outcomes {
        *counts.entry(j).or_insert(0usize) += 1;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["outcome", "angle", "count"])?;
    for (j, c) in counts {
        w.write_record([j.to_string(), outcome_angle(j, estimate.m).to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
