use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' | 'i' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// 2x2 matrix in the computational basis.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }
}

/// Tensor product of single-qubit Paulis.
///
/// Letter `i` acts on qubit `i`, and qubit 0 is the most significant bit of
/// a basis index, so the matrix is `kron(P_0, P_1, ..., P_{n-1})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    axes: Vec<Pauli>,
    support: Vec<usize>,
}

impl PauliString {
    pub fn new(axes: Vec<Pauli>) -> Self {
        let support = axes
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != Pauli::I)
            .map(|(q, _)| q)
            .collect();
        Self { axes, support }
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::new(vec![Pauli::I; n_qubits])
    }

    /// A string with `letter` on `qubit` and identity elsewhere.
    pub fn single(n_qubits: usize, qubit: usize, letter: Pauli) -> Self {
        let mut axes = vec![Pauli::I; n_qubits];
        axes[qubit] = letter;
        Self::new(axes)
    }

    /// Places the letters of `local` onto the given `qubits` of an
    /// `n_qubits`-wide identity string.
    pub fn embed(n_qubits: usize, qubits: &[usize], local: &[Pauli]) -> Self {
        let mut axes = vec![Pauli::I; n_qubits];
        for (&q, &p) in qubits.iter().zip(local) {
            axes[q] = p;
        }
        Self::new(axes)
    }

    pub fn n_qubits(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Pauli] {
        &self.axes
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn locality(&self) -> usize {
        self.support.len()
    }

    pub fn is_identity(&self) -> bool {
        self.support.is_empty()
    }

    pub fn label(&self) -> String {
        self.axes.iter().map(|p| p.as_char()).collect()
    }

    pub fn masks(&self) -> PauliMasks {
        PauliMasks::from_axes(&self.axes)
    }

    /// Dense matrix of the string. Intended for small `n`; the family
    /// evaluator uses [`PauliMasks`] instead.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n_qubits();
        let masks = self.masks();
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            let (row, phase) = masks.apply_basis(b);
            m[(row, b)] += phase;
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .chars()
            .enumerate()
            .map(|(i, c)| {
                Pauli::from_char(c)
                    .ok_or_else(|| Error::Parse(format!("invalid Pauli letter {c:?} at position {i} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if axes.is_empty() {
            return Err(Error::Parse("empty Pauli string".into()));
        }
        Ok(Self::new(axes))
    }
}

/// Bit-mask form used for fast application: `P = i^{n_y} X^x Z^z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PauliMasks {
    pub x: usize,
    pub z: usize,
    pub n_y: u32,
}

impl PauliMasks {
    pub fn from_axes(axes: &[Pauli]) -> Self {
        let n = axes.len();
        let (mut x, mut z, mut n_y) = (0usize, 0usize, 0u32);
        for (q, p) in axes.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Z => z |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    n_y += 1;
                }
            }
        }
        Self { x, z, n_y }
    }

    fn y_phase(&self) -> C64 {
        match self.n_y % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }

    /// `P|b> = phase |row>`.
    #[inline]
    pub fn apply_basis(&self, b: usize) -> (usize, C64) {
        let sign = if (b & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        (b ^ self.x, self.y_phase() * sign)
    }

    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    /// `out += coeff * P * v`.
    pub fn accumulate(&self, coeff: f64, v: &DVector<C64>, out: &mut DVector<C64>) {
        let base = self.y_phase() * coeff;
        for b in 0..v.len() {
            let amp = v[b];
            if amp.re == 0.0 && amp.im == 0.0 {
                continue;
            }
            let sign = if (b & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[b ^ self.x] += base * amp * sign;
        }
    }

    /// In place `v <- exp(-i theta P) v = cos(theta) v - i sin(theta) P v`.
    pub fn rotate(&self, theta: f64, v: &mut [C64]) {
        let (s, c) = theta.sin_cos();
        let mi_s = C64::new(0.0, -s);
        let yp = self.y_phase();
        if self.x == 0 {
            for (b, amp) in v.iter_mut().enumerate() {
                let sign = if (b & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                *amp *= C64::new(c, 0.0) + mi_s * yp * sign;
            }
            return;
        }
        for b in 0..v.len() {
            let partner = b ^ self.x;
            if partner < b {
                continue;
            }
            // (P v)[b] = phase(partner) v[partner], phase(k) = yp * (-1)^{|k & z|}
            let sb = if (b & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            let sp = if (partner & self.z).count_ones() % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            let vb = v[b];
            let vp = v[partner];
            v[b] = vb * c + mi_s * yp * sp * vp;
            v[partner] = vp * c + mi_s * yp * sb * vb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        a.kronecker(b)
    }

    fn single(p: Pauli) -> DMatrix<C64> {
        let m = p.matrix();
        DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
    }

    #[test]
    fn support_matches_non_identity_letters() {
        let p: PauliString = "IXZIY".parse().unwrap();
        assert_eq!(p.support(), &[1, 2, 4]);
        assert_eq!(p.locality(), 3);
        assert_eq!(p.label(), "IXZIY");
    }

    #[test]
    fn rejects_bad_letters() {
        assert!("IXQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }

    #[test]
    fn mask_matrix_matches_kronecker_product() {
        for label in ["XY", "YZ", "ZX", "YY", "XIZ", "YXZ", "IYI"] {
            let p: PauliString = label.parse().unwrap();
            let mut expect = single(p.axes()[0]);
            for &a in &p.axes()[1..] {
                expect = kron(&expect, &single(a));
            }
            assert!((p.to_matrix() - expect).norm() < 1e-15, "{label}");
        }
    }

    #[test]
    fn rotate_matches_dense_exponential() {
        let p: PauliString = "XYZ".parse().unwrap();
        let m = p.to_matrix();
        let theta = 0.37;
        let dim = 8;
        let v = DVector::from_fn(dim, |i, _| C64::new(i as f64 + 1.0, 0.5 - i as f64));
        let mut w: Vec<C64> = v.iter().copied().collect();
        p.masks().rotate(theta, &mut w);
        let id = DMatrix::<C64>::identity(dim, dim);
        let u = id * C64::new(theta.cos(), 0.0) - m * C64::new(0.0, theta.sin());
        let expect = u * v;
        for i in 0..dim {
            assert!((w[i] - expect[i]).norm() < 1e-13);
        }
    }
}
