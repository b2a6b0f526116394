//! Exact-diagonalization oracles: spectra, gaps, Wilson-loop Berry phases
//! and Berry connections.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::{circular_distance, wrap_2pi};
use crate::error::{Error, Result};
use crate::hamcore::{HamiltonianFamily, C64};

/// Relative gap below which a ground state is treated as degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-8;

/// Adjacent Wilson-loop overlaps smaller than this trigger a refinement error.
pub const MIN_WILSON_OVERLAP: f64 = 0.5;

/// Finite-difference overlaps smaller than this trigger a refinement error.
pub const MIN_DIFFERENCE_OVERLAP: f64 = 0.99;

/// Wilson-loop estimates are reported converged when doubling the grid
/// moves them by less than this.
pub const WILSON_TOL: f64 = 1e-6;

/// Full spectrum of `H(lambda)`.
#[derive(Debug, Clone)]
pub struct SpectrumSlice {
    pub lambda: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns, matching `eigenvalues`.
    pub eigenvectors: DMatrix<C64>,
    pub gap: f64,
    pub degenerate: bool,
}

impl SpectrumSlice {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> DVector<C64> {
        self.eigenvectors.column(0).into_owned()
    }

    pub fn state(&self, k: usize) -> DVector<C64> {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |a, &e| a.max(e.abs()))
    }

    pub fn tolerance(&self) -> f64 {
        DEGENERACY_RTOL * self.norm().max(1.0)
    }

    /// Errors when the ground state is degenerate.
    pub fn require_gapped(&self) -> Result<()> {
        if self.degenerate {
            Err(Error::Degenerate {
                lambda: self.lambda,
                gap: self.gap,
                tolerance: self.tolerance(),
            })
        } else {
            Ok(())
        }
    }
}

/// Diagonalizes a Hermitian matrix.
pub fn diagonalize_matrix(lambda: f64, m: DMatrix<C64>) -> Result<SpectrumSlice> {
    let dim = m.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 1000 * dim.max(10))
        .ok_or_else(|| Error::NonConvergence(format!("dense Hermitian solve at lambda = {lambda}")))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(dim, dim, |i, j| eig.eigenvectors[(i, order[j])]);
    let gap = if dim > 1 {
        eigenvalues[1] - eigenvalues[0]
    } else {
        f64::INFINITY
    };
    let norm = eigenvalues.iter().fold(0.0f64, |a, &e| a.max(e.abs()));
    let degenerate = gap < DEGENERACY_RTOL * norm.max(1.0);
    Ok(SpectrumSlice {
        lambda,
        eigenvalues,
        eigenvectors,
        gap,
        degenerate,
    })
}

pub fn diagonalize(family: &HamiltonianFamily, lambda: f64) -> Result<SpectrumSlice> {
    diagonalize_matrix(lambda, family.eval(lambda)?)
}

/// `j / n` for `j = 0..n`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 / n as f64).collect()
}

/// Diagonalizes every grid point in parallel, in grid order.
pub fn diagonalize_grid(family: &HamiltonianFamily, grid: &[f64]) -> Result<Vec<SpectrumSlice>> {
    grid.par_iter().map(|&l| diagonalize(family, l)).collect()
}

/// Smallest gap over `grid` and the first `lambda` attaining it.
pub fn min_gap(family: &HamiltonianFamily, grid: &[f64]) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let slices = diagonalize_grid(family, grid)?;
    let mut best = (f64::INFINITY, grid[0]);
    for s in &slices {
        s.require_gapped()?;
        if s.gap < best.0 {
            best = (s.gap, s.lambda);
        }
    }
    Ok(best)
}

/// Ground-state Berry phase of a loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerryPhaseResult {
    #[serde(rename = "theta_B")]
    pub theta_b: f64,
    pub grid_size: usize,
    pub converged: bool,
    pub estimated_discretization_error: f64,
    pub grid: String,
}

/// Discrete Berry phase `-sum_j arg <psi_j|psi_{j+1}>` of a closed chain of
/// states (the last state connects back to the first), in `[0, 2 pi)`.
pub fn wilson_loop_from_states(states: &[DVector<C64>]) -> Result<f64> {
    let n = states.len();
    if n < 2 {
        return Err(Error::InvalidArgument("Wilson loop needs at least two states".into()));
    }
    let mut total = 0.0;
    for j in 0..n {
        let ov = states[j].dotc(&states[(j + 1) % n]);
        if ov.norm() < MIN_WILSON_OVERLAP {
            return Err(Error::Refinement(format!(
                "overlap {:.3e} between grid points {j} and {}",
                ov.norm(),
                (j + 1) % n
            )));
        }
        total -= ov.arg();
    }
    Ok(wrap_2pi(total))
}

/// Wilson-loop Berry phase on a uniform `n`-point grid.
pub fn wilson_loop_phase(family: &HamiltonianFamily, n: usize) -> Result<f64> {
    let slices = diagonalize_grid(family, &uniform_grid(n))?;
    let mut states = Vec::with_capacity(n);
    for s in &slices {
        s.require_gapped()?;
        states.push(s.ground_state());
    }
    wilson_loop_from_states(&states)
}

/// Wilson-loop estimate at `n` points with a convergence check against `2n`.
pub fn wilson_loop_berry_phase(family: &HamiltonianFamily, n: usize) -> Result<BerryPhaseResult> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!("grid size {n} below 8")));
    }
    let coarse = wilson_loop_phase(family, n)?;
    let fine = wilson_loop_phase(family, 2 * n)?;
    let diff = circular_distance(coarse, fine);
    // second-order estimator: the coarse error is about 4/3 of the difference
    let err = 4.0 / 3.0 * diff + 4.0 * f64::EPSILON;
    Ok(BerryPhaseResult {
        theta_b: coarse,
        grid_size: n,
        converged: err < WILSON_TOL,
        estimated_discretization_error: err,
        grid: format!("uniform lambda_j = j/{n}, compared against 2N = {}", 2 * n),
    })
}

/// Phase convention for the Berry connection.
#[derive(Debug, Clone)]
pub enum Gauge {
    /// Largest-amplitude computational basis state of the `H(0)` ground state
    /// (first index on ties).
    Auto,
    /// `<reference|psi(lambda)>` is held real and positive.
    Reference(DVector<C64>),
}

fn gauge_reference(family: &HamiltonianFamily, gauge: &Gauge) -> Result<DVector<C64>> {
    match gauge {
        Gauge::Reference(v) => Ok(v.clone()),
        Gauge::Auto => {
            let g = diagonalize(family, 0.0)?;
            g.require_gapped()?;
            let psi = g.ground_state();
            let mut best = 0;
            for (i, a) in psi.iter().enumerate() {
                if a.norm() > psi[best].norm() + 1e-12 {
                    best = i;
                }
            }
            let mut e = DVector::zeros(psi.len());
            e[best] = C64::new(1.0, 0.0);
            Ok(e)
        }
    }
}

fn gauged_ground_state(family: &HamiltonianFamily, lambda: f64, reference: &DVector<C64>) -> Result<DVector<C64>> {
    let s = diagonalize(family, lambda)?;
    s.require_gapped()?;
    let psi = s.ground_state();
    let ov = reference.dotc(&psi);
    if ov.norm() < 1e-6 {
        return Err(Error::Refinement(format!(
            "gauge reference is orthogonal to the ground state at lambda = {lambda}"
        )));
    }
    Ok(psi * (ov.conj() / ov.norm()))
}

/// `iA_lambda = -Im <psi|d psi/d lambda>` by central difference in the
/// reference gauge.
pub fn berry_connection_exact(family: &HamiltonianFamily, lambda: f64, h: f64) -> Result<f64> {
    berry_connection_in_gauge(family, lambda, h, &Gauge::Auto)
}

pub fn berry_connection_in_gauge(family: &HamiltonianFamily, lambda: f64, h: f64, gauge: &Gauge) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("difference step {h} must be positive")));
    }
    let reference = gauge_reference(family, gauge)?;
    connection_with_reference(family, lambda, h, &reference)
}

fn connection_with_reference(family: &HamiltonianFamily, lambda: f64, h: f64, reference: &DVector<C64>) -> Result<f64> {
    let c = gauged_ground_state(family, lambda, reference)?;
    let p = gauged_ground_state(family, lambda + h, reference)?;
    let m = gauged_ground_state(family, lambda - h, reference)?;
    let op = c.dotc(&p);
    let om = c.dotc(&m);
    if op.norm() < MIN_DIFFERENCE_OVERLAP || om.norm() < MIN_DIFFERENCE_OVERLAP {
        return Err(Error::Refinement(format!(
            "step h = {h} too large at lambda = {lambda}: overlaps {:.4}, {:.4}",
            op.norm(),
            om.norm()
        )));
    }
    Ok(-(op.arg() - om.arg()) / (2.0 * h))
}

/// Connection on a grid, sharing one gauge reference, computed in parallel.
pub fn berry_connection_grid(family: &HamiltonianFamily, grid: &[f64], h: f64, gauge: &Gauge) -> Result<Vec<f64>> {
    let reference = gauge_reference(family, gauge)?;
    grid.par_iter()
        .map(|&l| connection_with_reference(family, l, h, &reference))
        .collect()
}

/// Second-order perturbative connection with an optional regime warning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeConnection {
    pub value: f64,
    pub regime_warning: Option<String>,
}

/// `-r^2 Im <psi0| V R dV/dl |psi0>` with
/// `R = sum_{k>0} |k><k| / (E_k - E_0)^2` over the base spectrum.
pub fn berry_connection_perturbative(
    base: &SpectrumSlice,
    v: &HamiltonianFamily,
    r: f64,
    lambda: f64,
) -> Result<PerturbativeConnection> {
    base.require_gapped()?;
    let dim = base.eigenvalues.len();
    if v.dim() != dim {
        return Err(Error::QubitMismatch {
            left: base.eigenvectors.nrows().trailing_zeros() as usize,
            right: v.n_qubits(),
        });
    }
    let psi0 = base.ground_state();
    let vpsi = v.apply(lambda, &psi0);
    let mut dv = DVector::zeros(dim);
    for ((_, c), masks) in v.terms().iter().zip(v.masks()) {
        let d = c.derivative(lambda);
        if d != 0.0 {
            masks.accumulate(d, &psi0, &mut dv);
        }
    }
    let e0 = base.eigenvalues[0];
    let mut acc = C64::new(0.0, 0.0);
    for k in 1..dim {
        let col = base.eigenvectors.column(k);
        let a = col.dotc(&vpsi).conj(); // <psi0|V|k>
        let b = col.dotc(&dv); // <k|V'|psi0>
        let de = base.eigenvalues[k] - e0;
        acc += a * b / (de * de);
    }
    let regime_warning =
        (r >= base.gap / 4.0).then(|| format!("r = {r:.3e} is not below gap/4 = {:.3e}", base.gap / 4.0));
    Ok(PerturbativeConnection {
        value: -r * r * acc.im,
        regime_warning,
    })
}

/// One row of a spectral sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    #[serde(rename = "iA")]
    pub connection: f64,
}

/// `(lambda, E0, E1, gap, iA)` over `grid`.
pub fn sweep(family: &HamiltonianFamily, grid: &[f64], h: f64, gauge: &Gauge) -> Result<Vec<SweepRow>> {
    let reference = gauge_reference(family, gauge)?;
    grid.par_iter()
        .map(|&lambda| {
            let s = diagonalize(family, lambda)?;
            s.require_gapped()?;
            let e1 = s.eigenvalues.get(1).copied().unwrap_or(f64::INFINITY);
            Ok(SweepRow {
                lambda,
                e0: s.eigenvalues[0],
                e1,
                gap: s.gap,
                connection: connection_with_reference(family, lambda, h, &reference)?,
            })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
