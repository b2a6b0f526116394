//! Exact reduction to coordinate subspaces that every coefficient channel of
//! a family leaves invariant (for example the legal clock states of a
//! history Hamiltonian).

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{slice_lambda, AdiabaticSchedule, Integrator};
use crate::hamcore::{HamiltonianFamily, C64};

const ENTRY_TOL: f64 = 1e-12;
const SUPPORT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Channel {
    Const,
    Cos(u32),
    Sin(u32),
}

impl Channel {
    fn value(self, lambda: f64) -> f64 {
        match self {
            Channel::Const => 1.0,
            Channel::Cos(k) => (TAU * k as f64 * lambda).cos(),
            Channel::Sin(k) => (TAU * k as f64 * lambda).sin(),
        }
    }
}

type Sparse = HashMap<(usize, usize), C64>;

fn channels(family: &HamiltonianFamily) -> HashMap<Channel, Sparse> {
    let mut out: HashMap<Channel, Sparse> = HashMap::new();
    let d = family.dim();
    for ((_, c), masks) in family.terms().iter().zip(family.masks()) {
        let mut parts = vec![(Channel::Const, c.constant)];
        parts.extend(
            c.cos_terms
                .iter()
                .map(|&(k, a)| (if k == 0 { Channel::Const } else { Channel::Cos(k) }, a)),
        );
        parts.extend(
            c.sin_terms
                .iter()
                .filter(|&&(k, _)| k != 0)
                .map(|&(k, b)| (Channel::Sin(k), b)),
        );
        for (ch, w) in parts {
            if w == 0.0 {
                continue;
            }
            let m = out.entry(ch).or_default();
            for b in 0..d {
                let (row, phase) = masks.apply_basis(b);
                *m.entry((row, b)).or_insert(C64::new(0.0, 0.0)) += phase * w;
            }
        }
    }
    out
}

fn touched_blocks(d: usize, chans: &HashMap<Channel, Sparse>, basis: &DMatrix<C64>) -> Option<Vec<usize>> {
    let mut parent: Vec<usize> = (0..d).collect();
    for m in chans.values() {
        for (&(r, c), v) in m {
            if v.norm() > ENTRY_TOL && r != c {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let scale = basis.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let mut roots = vec![false; d];
    for r in 0..d {
        if basis.row(r).iter().any(|a| a.norm() > SUPPORT_TOL * scale) {
            let root = find(&mut parent, r);
            roots[root] = true;
        }
    }
    let indices: Vec<usize> = (0..d).filter(|&i| roots[find(&mut parent, i)]).collect();
    (2 * indices.len() <= d).then_some(indices)
}

/// Basis indices of the smallest union of invariant coordinate blocks
/// containing the support of `v`, or `None` when that union is more than
/// half the space.
pub fn invariant_support(family: &HamiltonianFamily, v: &DVector<C64>) -> Option<Vec<usize>> {
    let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    touched_blocks(family.dim(), &channels(family), &m)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Restriction of a family to a union of invariant coordinate blocks.
pub(super) struct Reduced {
    pub indices: Vec<usize>,
    constant: DMatrix<C64>,
    varying: Vec<(Channel, DMatrix<C64>)>,
}

impl Reduced {
    /// Restriction to the blocks touched by `basis`, or `None` when they
    /// are not smaller than half the space.
    pub fn new(family: &HamiltonianFamily, basis: &DMatrix<C64>) -> Option<Self> {
        let chans = channels(family);
        let indices = touched_blocks(family.dim(), &chans, basis)?;
        let pos: HashMap<usize, usize> = indices.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let n = indices.len();
        let dense = |m: &Sparse| {
            let mut out = DMatrix::zeros(n, n);
            for (&(r, c), &v) in m {
                if let (Some(&i), Some(&j)) = (pos.get(&r), pos.get(&c)) {
                    out[(i, j)] += v;
                }
            }
            out
        };
        let constant = chans
            .get(&Channel::Const)
            .map(dense)
            .unwrap_or_else(|| DMatrix::zeros(n, n));
        let mut varying: Vec<(Channel, DMatrix<C64>)> = chans
            .iter()
            .filter(|(ch, _)| **ch != Channel::Const)
            .map(|(ch, m)| (*ch, dense(m)))
            .collect();
        varying.sort_by_key(|(ch, _)| match ch {
            Channel::Const => (0, 0),
            Channel::Cos(k) => (1, *k),
            Channel::Sin(k) => (2, *k),
        });
        Some(Self {
            indices,
            constant,
            varying,
        })
    }

    fn varying_at(&self, lambda: f64) -> DMatrix<C64> {
        let n = self.indices.len();
        let mut m = DMatrix::zeros(n, n);
        for (ch, a) in &self.varying {
            m += a * C64::new(ch.value(lambda), 0.0);
        }
        m
    }

    /// Rows of `basis` on the block.
    pub fn restrict(&self, basis: &DMatrix<C64>) -> DMatrix<C64> {
        DMatrix::from_fn(self.indices.len(), basis.ncols(), |i, c| basis[(self.indices[i], c)])
    }

    pub fn embed(&self, block: &DMatrix<C64>, d: usize) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(d, block.ncols());
        for (i, &r) in self.indices.iter().enumerate() {
            for c in 0..block.ncols() {
                out[(r, c)] = block[(i, c)];
            }
        }
        out
    }

    /// Evolves `block` (rows on the reduced space). Integrators other than
    /// exact slices use the split form with an exact varying exponential.
    pub fn propagate(&self, schedule: &AdiabaticSchedule, mut block: DMatrix<C64>) -> DMatrix<C64> {
        let dt = schedule.sign() * schedule.dt();
        let is_static = self
            .varying
            .iter()
            .all(|(_, m)| m.iter().all(|v| v.norm() <= ENTRY_TOL));
        if is_static {
            return expm_herm(&self.constant, schedule.sign() * schedule.t) * block;
        }
        match schedule.integrator {
            Integrator::ExactSlices => {
                for j in 0..schedule.steps {
                    let h = &self.constant + self.varying_at(slice_lambda(j, schedule.steps));
                    block = expm_herm(&h, dt) * block;
                }
            }
            _ => {
                let eig = SymmetricEigen::new(self.constant.clone());
                let full = exp_from(&eig, dt);
                let half = exp_from(&eig, 0.5 * dt);
                let n = self.indices.len();
                let one = C64::new(1.0, 0.0);
                let zero = C64::new(0.0, 0.0);
                let mut v = DMatrix::zeros(n, n);
                let mut term = block.clone();
                let mut tmp = block.clone();
                let mut acc = block.clone();
                tmp.gemm(one, &half, &block, zero);
                std::mem::swap(&mut block, &mut tmp);
                for j in 0..schedule.steps {
                    v.fill(zero);
                    let lambda = slice_lambda(j, schedule.steps);
                    for (ch, a) in &self.varying {
                        let f = ch.value(lambda);
                        v.zip_apply(a, |x, y| *x += y * f);
                    }
                    let x = v.norm() * dt.abs();
                    if x > 0.1 {
                        acc = expm_herm(&v, dt) * &block;
                    } else {
                        // Taylor series of exp(-i V dt) applied to the block
                        acc.copy_from(&block);
                        term.copy_from(&block);
                        let mut bound = 1.0;
                        for k in 1..=20 {
                            tmp.gemm(C64::new(0.0, -dt / k as f64), &v, &term, zero);
                            std::mem::swap(&mut term, &mut tmp);
                            acc += &term;
                            bound *= x / k as f64;
                            if bound < 1e-17 {
                                break;
                            }
                        }
                    }
                    let step = if j + 1 == schedule.steps { &half } else { &full };
                    block.gemm(one, step, &acc, zero);
                }
            }
        }
        block
    }
}

fn exp_from(eig: &SymmetricEigen<C64, nalgebra::Dyn>, tau: f64) -> DMatrix<C64> {
    let n = eig.eigenvalues.len();
    let ph = DVector::from_fn(n, |k, _| C64::from_polar(1.0, -eig.eigenvalues[k] * tau));
    let scaled = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, c)] * ph[c]);
    scaled * eig.eigenvectors.adjoint()
}

/// `exp(-i H tau)` for Hermitian `H`.
fn expm_herm(h: &DMatrix<C64>, tau: f64) -> DMatrix<C64> {
    exp_from(&SymmetricEigen::new(h.clone()), tau)
}
