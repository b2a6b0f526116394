//! Statevector time evolution along a Hamiltonian loop.
//!
//! The schedule is `lambda(t) = t / T`. Each of `steps` slices evolves with
//! `H` sampled at the slice midpoint; the slice exponential is either
//! Trotterized over Pauli terms or computed exactly from a dense
//! eigendecomposition.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

mod blocks;

pub use blocks::invariant_support;

use crate::error::{Error, Result};
use crate::exact::diagonalize;
use crate::hamcore::{HamiltonianFamily, C64};

/// Slices per unit of `T * H_max`: `dt <= 0.1 / H_max`.
pub const OVERSAMPLING: f64 = 10.0;

/// Largest admissible `dt * H_max`.
pub const MAX_STEP_NORM: f64 = 0.5;

/// Contiguous named block of qubits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

/// Normalized amplitudes over a layout of registers. Qubit 0 is the most
/// significant bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
    registers: Vec<Register>,
}

impl StateVector {
    /// Wraps `amplitudes` as a single `system` register.
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let n = qubits_of(amplitudes.len())?;
        Self::with_layout(
            amplitudes,
            vec![Register {
                name: "system".into(),
                start: 0,
                len: n,
            }],
        )
    }

    pub fn with_layout(amplitudes: DVector<C64>, registers: Vec<Register>) -> Result<Self> {
        let n = qubits_of(amplitudes.len())?;
        let mut next = 0;
        for r in &registers {
            if r.start != next {
                return Err(Error::InvalidArgument(format!("register {} is not contiguous", r.name)));
            }
            next += r.len;
        }
        if next != n {
            return Err(Error::InvalidArgument(format!(
                "registers cover {next} qubits, amplitudes need {n}"
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("state norm {norm} differs from 1")));
        }
        Ok(Self { amplitudes, registers })
    }

    /// `|index>` on `n` qubits.
    pub fn basis(n: usize, index: usize) -> Self {
        let mut v = DVector::zeros(1 << n);
        v[index] = C64::new(1.0, 0.0);
        Self::new(v).expect("basis state")
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Option<&Register> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn n_qubits(&self) -> usize {
        self.registers.iter().map(|r| r.len).sum()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &DVector<C64>) -> f64 {
        self.amplitudes.dotc(other).norm_sqr()
    }
}

fn qubits_of(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("length {len} is not a power of two")));
    }
    Ok(len.trailing_zeros() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `exp(-i H dt)` slices.
    Forward,
    /// `exp(+i H dt)` slices along the same path.
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Product formula over Pauli terms, order 1 or 2.
    Trotter(u8),
    /// Dense exponential of each midpoint slice.
    ExactSlices,
    /// Strang splitting: the `lambda`-independent part is exponentiated
    /// exactly, the varying part by a symmetric product over its terms.
    SplitStatic,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Trotter(2)
    }
}

/// Runtime and discretization of one traversal of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticSchedule {
    #[serde(rename = "T")]
    pub t: f64,
    pub steps: usize,
    pub direction: Direction,
    pub integrator: Integrator,
}

impl AdiabaticSchedule {
    /// Forward second-order schedule with the default oversampling.
    pub fn new(t: f64, h_max: f64) -> Self {
        Self {
            t,
            steps: Self::min_steps(t, h_max),
            direction: Direction::Forward,
            integrator: Integrator::default(),
        }
    }

    /// `ceil(T * H_max * OVERSAMPLING)`, at least 1.
    pub fn min_steps(t: f64, h_max: f64) -> usize {
        ((t * h_max * OVERSAMPLING).ceil() as usize).max(1)
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps.max(1);
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn reversed(mut self) -> Self {
        self.direction = match self.direction {
            Direction::Forward => Direction::Reversed,
            Direction::Reversed => Direction::Forward,
        };
        self
    }

    /// Same discretization density at runtime `scale * T`.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut s = *self;
        s.t *= scale;
        s.steps = ((self.steps as f64) * scale).ceil() as usize;
        s
    }

    pub fn dt(&self) -> f64 {
        self.t / self.steps as f64
    }

    pub fn sign(&self) -> f64 {
        match self.direction {
            Direction::Forward => 1.0,
            Direction::Reversed => -1.0,
        }
    }

    /// Refuses slices with `dt * H_max > 0.5` and invalid orders.
    pub fn validate(&self, h_max: f64) -> Result<()> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "runtime {} must be finite and non-negative",
                self.t
            )));
        }
        if let Integrator::Trotter(o) = self.integrator {
            if o != 1 && o != 2 {
                return Err(Error::InvalidArgument(format!("Trotter order {o} not in {{1, 2}}")));
            }
        }
        let x = self.dt() * h_max;
        if x > MAX_STEP_NORM {
            return Err(Error::StepUnderflow(x));
        }
        Ok(())
    }
}

/// Norm entering the step-size rule for `integrator`.
///
/// Product formulas use `H_max`. The split integrator only errs through
/// commutators with the varying part `D`, so it uses
/// `max(|D|, (|S|^2 |D|)^{1/3})`, which gives the same per-step error scale
/// `(dt h)^3`. A static family needs a single exact step.
pub fn step_norm(family: &HamiltonianFamily, integrator: Integrator) -> f64 {
    match integrator {
        Integrator::SplitStatic => {
            let (mut s, mut d) = (0.0, 0.0);
            for (_, c) in family.terms() {
                s += c.constant.abs();
                d += c.bounds().0 - c.constant.abs();
            }
            d = d.max(0.0);
            d.max((s * s * d).cbrt())
        }
        _ => family.norm_bounds().h_max,
    }
}

/// Runtime bound `(1e5 / delta^2) max(dH^3 / gap^4, dH d2H / gap^3)`.
pub fn adiabatic_runtime_bound(dh: f64, d2h: f64, gap: f64, delta_adia: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::InvalidArgument(format!("gap {gap} must be positive")));
    }
    if !(delta_adia > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "adiabatic error {delta_adia} must be positive"
        )));
    }
    let a = dh.powi(3) / gap.powi(4);
    let b = dh * d2h / gap.powi(3);
    Ok(1e5 / (delta_adia * delta_adia) * a.max(b))
}

/// [`adiabatic_runtime_bound`] with the family's triangle-inequality norms.
pub fn required_runtime(family: &HamiltonianFamily, gap: f64, delta_adia: f64) -> Result<f64> {
    let nb = family.norm_bounds();
    adiabatic_runtime_bound(nb.dh_max, nb.d2h_max, gap, delta_adia)
}

fn slice_lambda(j: usize, steps: usize) -> f64 {
    (j as f64 + 0.5) / steps as f64
}

fn dense_slice(family: &HamiltonianFamily, lambda: f64, dt: f64) -> Result<DMatrix<C64>> {
    let s = diagonalize(family, lambda)?;
    let d = s.eigenvalues.len();
    let phases = DMatrix::from_diagonal(&DVector::from_fn(d, |k, _| {
        C64::from_polar(1.0, -s.eigenvalues[k] * dt)
    }));
    Ok(&s.eigenvectors * phases * s.eigenvectors.adjoint())
}

fn trotter_step(family: &HamiltonianFamily, lambda: f64, dt: f64, order: u8, v: &mut [C64]) {
    let terms = family.terms();
    let masks = family.masks();
    match order {
        1 => {
            for ((_, c), m) in terms.iter().zip(masks) {
                m.rotate(c.value(lambda) * dt, v);
            }
        }
        _ => {
            let half = 0.5 * dt;
            let coeffs: Vec<f64> = terms.iter().map(|(_, c)| c.value(lambda) * half).collect();
            for (m, &c) in masks.iter().zip(&coeffs) {
                m.rotate(c, v);
            }
            for (m, &c) in masks.iter().zip(&coeffs).rev() {
                m.rotate(c, v);
            }
        }
    }
}

/// `exp(-i S tau)` for the static part `S`, from one eigendecomposition.
struct StaticExp {
    vectors: DMatrix<C64>,
    energies: DVector<f64>,
}

impl StaticExp {
    fn new(family: &HamiltonianFamily) -> Result<Self> {
        let mut s = family.clone();
        let statics: Vec<_> = family
            .terms()
            .iter()
            .map(|(p, c)| (p.clone(), crate::hamcore::TrigCoefficient::constant(c.constant)))
            .collect();
        s = HamiltonianFamily::from_terms(s.n_qubits(), s.k_max(), statics)?;
        let sl = diagonalize(&s, 0.0)?;
        Ok(Self {
            vectors: sl.eigenvectors,
            energies: DVector::from_vec(sl.eigenvalues),
        })
    }

    fn matrix(&self, tau: f64) -> DMatrix<C64> {
        let ph = DVector::from_fn(self.energies.len(), |k, _| {
            C64::from_polar(1.0, -self.energies[k] * tau)
        });
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |r, c| {
            self.vectors[(r, c)] * ph[c]
        });
        scaled * self.vectors.adjoint()
    }
}

fn split_propagate(
    family: &HamiltonianFamily,
    schedule: &AdiabaticSchedule,
    block: DMatrix<C64>,
) -> Result<DMatrix<C64>> {
    crate::budget::DenseBudget::current().check(family.n_qubits())?;
    schedule.validate(step_norm(family, schedule.integrator))?;
    let stat = StaticExp::new(family)?;
    if family.is_static() {
        return Ok(stat.matrix(schedule.sign() * schedule.t) * block);
    }
    Ok(split_range(family, &stat, schedule, 0..schedule.steps, block))
}

/// Split steps `range` of the schedule; each call starts and ends with a
/// half static step, so consecutive ranges compose exactly.
fn split_range(
    family: &HamiltonianFamily,
    stat: &StaticExp,
    schedule: &AdiabaticSchedule,
    range: std::ops::Range<usize>,
    mut block: DMatrix<C64>,
) -> DMatrix<C64> {
    if range.is_empty() {
        return block;
    }
    let dt = schedule.sign() * schedule.dt();
    let varying: Vec<usize> = (0..family.terms().len())
        .filter(|&i| !family.terms()[i].1.is_constant())
        .collect();
    let full = stat.matrix(dt);
    let half = stat.matrix(0.5 * dt);
    block = &half * block;
    let masks = family.masks();
    let last = range.end - 1;
    for j in range {
        let lambda = slice_lambda(j, schedule.steps);
        let coeffs: Vec<f64> = varying
            .iter()
            .map(|&i| {
                let c = &family.terms()[i].1;
                (c.value(lambda) - c.constant) * 0.5 * dt
            })
            .collect();
        for mut col in block.column_iter_mut() {
            let v = col.as_mut_slice();
            for (&i, &c) in varying.iter().zip(&coeffs) {
                masks[i].rotate(c, v);
            }
            for (&i, &c) in varying.iter().zip(&coeffs).rev() {
                masks[i].rotate(c, v);
            }
        }
        block = if j == last { &half * block } else { &full * block };
    }
    block
}

/// Evolves raw amplitudes in place.
pub fn propagate_vector(v: &mut DVector<C64>, family: &HamiltonianFamily, schedule: &AdiabaticSchedule) -> Result<()> {
    if v.len() != family.dim() {
        return Err(Error::QubitMismatch {
            left: family.n_qubits(),
            right: qubits_of(v.len())?,
        });
    }
    schedule.validate(step_norm(family, schedule.integrator))?;
    let dt = schedule.sign() * schedule.dt();
    match schedule.integrator {
        Integrator::SplitStatic => {
            let block = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
            let out = split_propagate(family, schedule, block)?;
            v.copy_from_slice(out.as_slice());
        }
        Integrator::Trotter(order) => {
            let slice = v.as_mut_slice();
            for j in 0..schedule.steps {
                trotter_step(family, slice_lambda(j, schedule.steps), dt, order, slice);
            }
        }
        Integrator::ExactSlices => {
            if family.is_static() {
                *v = dense_slice(family, 0.0, schedule.sign() * schedule.t)? * &*v;
            } else {
                for j in 0..schedule.steps {
                    *v = dense_slice(family, slice_lambda(j, schedule.steps), dt)? * &*v;
                }
            }
        }
    }
    Ok(())
}

/// Applies one traversal of the loop to a state on the family's qubits.
pub fn adiabatic_propagate(
    state: &StateVector,
    family: &HamiltonianFamily,
    schedule: &AdiabaticSchedule,
) -> Result<StateVector> {
    let mut v = state.amplitudes.clone();
    propagate_vector(&mut v, family, schedule)?;
    Ok(StateVector {
        amplitudes: v,
        registers: state.registers.clone(),
    })
}

/// Dense loop propagator `U(T)`, one column per basis state.
pub fn loop_propagator(family: &HamiltonianFamily, schedule: &AdiabaticSchedule) -> Result<DMatrix<C64>> {
    let d = family.dim();
    crate::budget::DenseBudget::current().check(family.n_qubits())?;
    if schedule.integrator == Integrator::SplitStatic {
        return split_propagate(family, schedule, DMatrix::identity(d, d));
    }
    if schedule.integrator == Integrator::ExactSlices {
        schedule.validate(family.norm_bounds().h_max)?;
        let dt = schedule.sign() * schedule.dt();
        if family.is_static() {
            return dense_slice(family, 0.0, schedule.sign() * schedule.t);
        }
        let mut u = DMatrix::identity(d, d);
        for j in 0..schedule.steps {
            u = dense_slice(family, slice_lambda(j, schedule.steps), dt)? * u;
        }
        return Ok(u);
    }
    let basis = DMatrix::<C64>::identity(d, d);
    propagate_columns(family, schedule, &basis)
}

/// `U(T) B` for the columns of `basis`, evolved in parallel.
///
/// Exact-slice and split schedules are restricted to the invariant
/// coordinate blocks touched by `basis` when those span at most half the
/// space.
pub fn propagate_columns(
    family: &HamiltonianFamily,
    schedule: &AdiabaticSchedule,
    basis: &DMatrix<C64>,
) -> Result<DMatrix<C64>> {
    if matches!(schedule.integrator, Integrator::SplitStatic | Integrator::ExactSlices) && basis.ncols() < family.dim()
    {
        crate::budget::DenseBudget::current().check(family.n_qubits())?;
        schedule.validate(step_norm(family, schedule.integrator))?;
        if let Some(red) = blocks::Reduced::new(family, basis) {
            let out = red.propagate(schedule, red.restrict(basis));
            return Ok(red.embed(&out, family.dim()));
        }
    }
    if schedule.integrator == Integrator::SplitStatic {
        return split_propagate(family, schedule, basis.clone());
    }
    let cols: Vec<DVector<C64>> = (0..basis.ncols())
        .into_par_iter()
        .map(|k| {
            let mut v = basis.column(k).into_owned();
            propagate_vector(&mut v, family, schedule)?;
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// Applies `U(T)^power` to the `system` register whenever qubit `control`
/// is 1. Other registers are spectators.
pub fn controlled_power_apply(
    state: &StateVector,
    family: &HamiltonianFamily,
    schedule: &AdiabaticSchedule,
    power: usize,
    control: usize,
) -> Result<StateVector> {
    let u = loop_propagator(family, schedule)?;
    controlled_matrix_power(state, &u, power, control)
}

/// As [`controlled_power_apply`] with a precomputed unitary on `system`.
pub fn controlled_matrix_power(
    state: &StateVector,
    u: &DMatrix<C64>,
    power: usize,
    control: usize,
) -> Result<StateVector> {
    if power == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    let sys = state
        .register("system")
        .ok_or_else(|| Error::InvalidArgument("layout has no system register".into()))?
        .clone();
    let n = state.n_qubits();
    if control >= n || (control >= sys.start && control < sys.start + sys.len) {
        return Err(Error::InvalidArgument(format!(
            "control qubit {control} not outside the system register"
        )));
    }
    if u.nrows() != 1 << sys.len {
        return Err(Error::QubitMismatch {
            left: sys.len,
            right: u.nrows().trailing_zeros() as usize,
        });
    }
    let mut up = u.clone();
    for _ in 1..power {
        up = u * &up;
    }
    let after = n - sys.start - sys.len;
    let ctrl_bit = 1usize << (n - 1 - control);
    let d = 1usize << sys.len;
    let mut out = state.amplitudes.clone();
    let mut buf = DVector::<C64>::zeros(d);
    for hi in 0..(1usize << sys.start) {
        for lo in 0..(1usize << after) {
            let base = (hi << (sys.len + after)) | lo;
            if base & ctrl_bit == 0 {
                continue;
            }
            for s in 0..d {
                buf[s] = state.amplitudes[base | (s << after)];
            }
            let y = &up * &buf;
            for s in 0..d {
                out[base | (s << after)] = y[s];
            }
        }
    }
    Ok(StateVector {
        amplitudes: out,
        registers: state.registers.clone(),
    })
}

/// `(lambda, |<psi_0(lambda)|state(t)>|^2)` at `samples` evenly spaced
/// checkpoints of a forward traversal.
pub fn trajectory(
    family: &HamiltonianFamily,
    schedule: &AdiabaticSchedule,
    initial: &DVector<C64>,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    schedule.validate(step_norm(family, schedule.integrator))?;
    let samples = samples.clamp(1, schedule.steps);
    let stat = match schedule.integrator {
        Integrator::SplitStatic => Some(StaticExp::new(family)?),
        _ => None,
    };
    let mut v = initial.clone();
    let mut rows = Vec::with_capacity(samples + 1);
    let g0 = diagonalize(family, 0.0)?.ground_state();
    rows.push((0.0, g0.dotc(&v).norm_sqr()));
    let dt = schedule.sign() * schedule.dt();
    let mut done = 0;
    for k in 1..=samples {
        let until = k * schedule.steps / samples;
        if let Some(stat) = &stat {
            let block = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
            let out = split_range(family, stat, schedule, done..until, block);
            v.copy_from_slice(out.as_slice());
        }
        for j in done..until {
            match schedule.integrator {
                Integrator::Trotter(o) => {
                    trotter_step(family, slice_lambda(j, schedule.steps), dt, o, v.as_mut_slice())
                }
                Integrator::ExactSlices => v = dense_slice(family, slice_lambda(j, schedule.steps), dt)? * &v,
                Integrator::SplitStatic => {}
            }
        }
        done = until;
        let lambda = until as f64 / schedule.steps as f64;
        let g = diagonalize(family, lambda)?.ground_state();
        rows.push((lambda, g.dotc(&v).norm_sqr()));
    }
    Ok(rows)
}

pub fn write_trajectory_csv(rows: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lambda", "fidelity"])?;
    for (l, f) in rows {
        w.write_record([l.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Fidelity of one forward traversal of the `H(0)` ground state with itself.
pub fn loop_fidelity(family: &HamiltonianFamily, schedule: &AdiabaticSchedule) -> Result<f64> {
    let g = diagonalize(family, 0.0)?;
    g.require_gapped()?;
    let psi = g.ground_state();
    let mut v = psi.clone();
    propagate_vector(&mut v, family, schedule)?;
    Ok(psi.dotc(&v).norm_sqr())
}
