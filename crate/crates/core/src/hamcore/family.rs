use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pauli::{PauliMasks, PauliString, C64};
use super::trig::TrigCoefficient;
use crate::budget::DenseBudget;
use crate::error::{Error, Result};

/// Upper bounds on `||H||`, `||dH/dl||`, `||d2H/dl2||` over the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub h_max: f64,
    pub dh_max: f64,
    pub d2h_max: f64,
}

/// A closed loop `H(l) = sum_j f_j(l) P_j` of local Hamiltonians.
///
/// Coefficients are real trigonometric polynomials and the operators are
/// Pauli strings, so every evaluation is Hermitian and `H(0) == H(1)` holds
/// structurally. The family is immutable once built.
#[derive(Debug, Clone)]
pub struct HamiltonianFamily {
    n_qubits: usize,
    k_max: usize,
    terms: Vec<(PauliString, TrigCoefficient)>,
    masks: Vec<PauliMasks>,
    metadata: serde_json::Map<String, serde_json::Value>,
}

impl PartialEq for HamiltonianFamily {
    fn eq(&self, other: &Self) -> bool {
        self.n_qubits == other.n_qubits
            && self.k_max == other.k_max
            && self.terms == other.terms
            && self.metadata == other.metadata
    }
}

impl HamiltonianFamily {
    pub fn new(n_qubits: usize, k_max: usize) -> Self {
        Self {
            n_qubits,
            k_max,
            terms: Vec::new(),
            masks: Vec::new(),
            metadata: serde_json::Map::new(),
        }
    }

    /// Builds a family from terms, validating widths and locality.
    pub fn from_terms(
        n_qubits: usize,
        k_max: usize,
        terms: impl IntoIterator<Item = (PauliString, TrigCoefficient)>,
    ) -> Result<Self> {
        let mut fam = Self::new(n_qubits, k_max);
        for (p, c) in terms {
            fam.push_term(p, c)?;
        }
        Ok(fam)
    }

    /// Zero operator on `n_qubits`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::new(n_qubits, 0)
    }

    pub fn push_term(&mut self, pauli: PauliString, coeff: TrigCoefficient) -> Result<()> {
        if pauli.n_qubits() != self.n_qubits {
            return Err(Error::QubitMismatch {
                left: self.n_qubits,
                right: pauli.n_qubits(),
            });
        }
        if pauli.locality() > self.k_max {
            return Err(Error::InvalidArgument(format!(
                "term {pauli} has locality {} above k_max = {}",
                pauli.locality(),
                self.k_max
            )));
        }
        self.masks.push(pauli.masks());
        self.terms.push((pauli, coeff));
        Ok(())
    }

    pub fn with_metadata(mut self, key: &str, value: serde_json::Value) -> Self {
        self.metadata.insert(key.to_string(), value);
        self
    }

    pub fn set_k_max(&mut self, k_max: usize) -> Result<()> {
        if let Some((p, _)) = self.terms.iter().find(|(p, _)| p.locality() > k_max) {
            return Err(Error::InvalidArgument(format!(
                "term {p} has locality {} above k_max = {k_max}",
                p.locality()
            )));
        }
        self.k_max = k_max;
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn terms(&self) -> &[(PauliString, TrigCoefficient)] {
        &self.terms
    }

    pub fn masks(&self) -> &[PauliMasks] {
        &self.masks
    }

    pub fn metadata(&self) -> &serde_json::Map<String, serde_json::Value> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut serde_json::Map<String, serde_json::Value> {
        &mut self.metadata
    }

    /// Largest support size actually present.
    pub fn locality(&self) -> usize {
        self.terms.iter().map(|(p, _)| p.locality()).max().unwrap_or(0)
    }

    /// True when no coefficient depends on the loop parameter.
    pub fn is_static(&self) -> bool {
        self.terms.iter().all(|(_, c)| c.is_constant())
    }

    fn dense_from(&self, coeff: impl Fn(&TrigCoefficient) -> f64, budget: DenseBudget) -> Result<DMatrix<C64>> {
        budget.check(self.n_qubits)?;
        let dim = self.dim();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for ((_, c), masks) in self.terms.iter().zip(&self.masks) {
            let v = coeff(c);
            if v == 0.0 {
                continue;
            }
            for b in 0..dim {
                let (row, phase) = masks.apply_basis(b);
                m[(row, b)] += phase * v;
            }
        }
        Ok(m)
    }

    /// Dense `H(lambda)` under the process-wide budget.
    pub fn eval(&self, lambda: f64) -> Result<DMatrix<C64>> {
        self.eval_within(lambda, DenseBudget::current())
    }

    pub fn eval_within(&self, lambda: f64, budget: DenseBudget) -> Result<DMatrix<C64>> {
        self.dense_from(|c| c.value(lambda), budget)
    }

    /// Dense `dH/dlambda`.
    pub fn derivative(&self, lambda: f64) -> Result<DMatrix<C64>> {
        self.dense_from(|c| c.derivative(lambda), DenseBudget::current())
    }

    /// Dense `d2H/dlambda2`.
    pub fn second_derivative(&self, lambda: f64) -> Result<DMatrix<C64>> {
        self.dense_from(|c| c.second_derivative(lambda), DenseBudget::current())
    }

    /// `H(lambda) v` without forming the matrix.
    pub fn apply(&self, lambda: f64, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(v.len());
        for ((_, c), masks) in self.terms.iter().zip(&self.masks) {
            let x = c.value(lambda);
            if x != 0.0 {
                masks.accumulate(x, v, &mut out);
            }
        }
        out
    }

    /// Triangle-inequality bounds; every Pauli string has unit norm.
    pub fn norm_bounds(&self) -> NormBounds {
        let mut nb = NormBounds {
            h_max: 0.0,
            dh_max: 0.0,
            d2h_max: 0.0,
        };
        for (_, c) in &self.terms {
            let (b0, b1, b2) = c.bounds();
            nb.h_max += b0;
            nb.dh_max += b1;
            nb.d2h_max += b2;
        }
        nb
    }

    /// Returns `a * self` with the same term order.
    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for (_, c) in &mut out.terms {
            *c = c.scaled(a);
        }
        out
    }

    /// `a * fam1 + b * fam2` with like terms consolidated and zero terms
    /// dropped. Terms come out sorted by Pauli label.
    pub fn scale_and_add(a: f64, fam1: &Self, b: f64, fam2: &Self) -> Result<Self> {
        if fam1.n_qubits != fam2.n_qubits {
            return Err(Error::QubitMismatch {
                left: fam1.n_qubits,
                right: fam2.n_qubits,
            });
        }
        let mut acc: BTreeMap<PauliString, TrigCoefficient> = BTreeMap::new();
        for (scale, fam) in [(a, fam1), (b, fam2)] {
            if scale == 0.0 {
                continue;
            }
            for (p, c) in &fam.terms {
                let entry = acc.entry(p.clone()).or_default();
                *entry = entry.add(&c.scaled(scale));
            }
        }
        let mut out = Self::new(fam1.n_qubits, fam1.k_max.max(fam2.k_max));
        for (p, c) in acc {
            let c = c.normalized();
            if !c.is_zero() {
                out.push_term(p, c)?;
            }
        }
        let mut meta = fam1.metadata.clone();
        for (k, v) in &fam2.metadata {
            meta.entry(k.clone()).or_insert_with(|| v.clone());
        }
        out.metadata = meta;
        Ok(out)
    }
}

// --- JSON instance format ---------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TermRecord {
    pauli: String,
    coeff: TrigCoefficient,
}

#[derive(Debug, Serialize, Deserialize)]
struct FamilyRecord {
    n_qubits: usize,
    k_max: usize,
    terms: Vec<serde_json::Value>,
    #[serde(default)]
    metadata: serde_json::Map<String, serde_json::Value>,
}

impl HamiltonianFamily {
    pub fn to_json_value(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|(p, c)| {
                serde_json::to_value(TermRecord {
                    pauli: p.label(),
                    coeff: c.clone(),
                })
                .expect("term serializes")
            })
            .collect();
        serde_json::json!({
            "n_qubits": self.n_qubits,
            "k_max": self.k_max,
            "terms": terms,
            "metadata": self.metadata,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("family serializes")
    }

    /// Parses the instance format. Errors name the offending term index.
    pub fn from_json(text: &str) -> Result<Self> {
        let rec: FamilyRecord = serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance file: {e}")))?;
        let mut fam = Self::new(rec.n_qubits, rec.k_max);
        fam.metadata = rec.metadata;
        for (i, raw) in rec.terms.into_iter().enumerate() {
            let term: TermRecord = serde_json::from_value(raw).map_err(|e| Error::Parse(format!("term {i}: {e}")))?;
            let p: PauliString = term.pauli.parse().map_err(|e| Error::Parse(format!("term {i}: {e}")))?;
            if p.n_qubits() != rec.n_qubits {
                return Err(Error::Parse(format!(
                    "term {i}: Pauli string {:?} has {} letters, expected {}",
                    term.pauli,
                    p.n_qubits(),
                    rec.n_qubits
                )));
            }
            let bad = term
                .coeff
                .cos_terms
                .iter()
                .chain(&term.coeff.sin_terms)
                .chain(std::iter::once(&(1, term.coeff.constant)))
                .any(|&(_, a)| !a.is_finite());
            if bad {
                return Err(Error::Parse(format!("term {i}: non-finite coefficient")));
            }
            fam.push_term(p, term.coeff)
                .map_err(|e| Error::Parse(format!("term {i}: {e}")))?;
        }
        Ok(fam)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamcore::pauli::Pauli;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn z_family() -> HamiltonianFamily {
        HamiltonianFamily::from_terms(1, 1, [(ps("Z"), TrigCoefficient::constant(1.0))]).unwrap()
    }

    fn rotating_xy() -> HamiltonianFamily {
        HamiltonianFamily::from_terms(
            1,
            1,
            [
                (ps("X"), TrigCoefficient::cos(1, 1.0)),
                (ps("Y"), TrigCoefficient::sin(1, 1.0)),
            ],
        )
        .unwrap()
    }

    fn arb_family(n: usize) -> impl Strategy<Value = HamiltonianFamily> {
        let letters = prop::sample::select(vec![Pauli::I, Pauli::X, Pauli::Y, Pauli::Z]);
        let term = (
            prop::collection::vec(letters, n),
            -1.0..1.0f64,
            prop::collection::vec((1u32..3, -1.0..1.0f64), 0..2),
            prop::collection::vec((1u32..3, -1.0..1.0f64), 0..2),
        )
            .prop_map(|(axes, c, cs, ss)| {
                (
                    PauliString::new(axes),
                    TrigCoefficient {
                        constant: c,
                        cos_terms: cs,
                        sin_terms: ss,
                    },
                )
            });
        prop::collection::vec(term, 1..6).prop_map(move |terms| HamiltonianFamily::from_terms(n, n, terms).unwrap())
    }

    fn op_norm(m: &DMatrix<C64>) -> f64 {
        // Hermitian input: spectral norm is the largest |eigenvalue|.
        m.clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |a, &e| a.max(e.abs()))
    }

    #[test]
    fn constant_z_evaluates_to_diag() {
        let m = z_family().eval(0.37).unwrap();
        assert_eq!(m[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(1, 1)], C64::new(-1.0, 0.0));
        assert_eq!(m[(0, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn rotating_family_at_zero_is_x() {
        let m = rotating_xy().eval(0.0).unwrap();
        assert_eq!(m, ps("X").to_matrix());
    }

    #[test]
    fn norm_bounds_examples() {
        let nb = z_family().norm_bounds();
        assert_eq!((nb.h_max, nb.dh_max, nb.d2h_max), (1.0, 0.0, 0.0));
        let fam = HamiltonianFamily::from_terms(1, 1, [(ps("X"), TrigCoefficient::cos(1, 1.0))]).unwrap();
        let nb = fam.norm_bounds();
        assert_eq!(nb.h_max, 1.0);
        assert!((nb.dh_max - TAU).abs() < 1e-14);
        assert!((nb.d2h_max - 4.0 * PI * PI).abs() < 1e-12);
        // dense oracle: maximize the true norms over a grid
        let (mut n1, mut n2) = (0.0f64, 0.0f64);
        for j in 0..200 {
            let l = j as f64 / 200.0;
            n1 = n1.max(op_norm(&fam.derivative(l).unwrap()));
            n2 = n2.max(op_norm(&fam.second_derivative(l).unwrap()));
        }
        assert!((n1 - TAU).abs() < 1e-9 && n1 <= nb.dh_max + 1e-12);
        assert!((n2 - 4.0 * PI * PI).abs() < 1e-9 && n2 <= nb.d2h_max + 1e-9);
    }

    #[test]
    fn scale_and_add_identity_and_zero() {
        let f = rotating_xy();
        let same = HamiltonianFamily::scale_and_add(1.0, &f, 0.0, &z_family()).unwrap();
        for l in [0.0, 0.21, 0.5, 0.93] {
            assert!((same.eval(l).unwrap() - f.eval(l).unwrap()).norm() < 1e-15);
        }
        let zero = HamiltonianFamily::scale_and_add(0.0, &f, 0.0, &z_family()).unwrap();
        assert!(zero.terms().is_empty());
        assert!(zero.eval(0.4).unwrap().norm() == 0.0);
    }

    #[test]
    fn scale_and_add_consolidates_like_terms() {
        let f = rotating_xy();
        let s = HamiltonianFamily::scale_and_add(1.0, &f, -1.0, &f).unwrap();
        assert!(s.terms().is_empty());
        let d = HamiltonianFamily::scale_and_add(1.0, &f, 1.0, &f).unwrap();
        assert_eq!(d.terms().len(), 2);
    }

    #[test]
    fn qubit_mismatch_is_rejected() {
        let two = HamiltonianFamily::from_terms(2, 1, [(ps("ZI"), TrigCoefficient::constant(1.0))]).unwrap();
        assert!(matches!(
            HamiltonianFamily::scale_and_add(1.0, &two, 1.0, &z_family()),
            Err(Error::QubitMismatch { .. })
        ));
    }

    #[test]
    fn capacity_error_over_budget() {
        let fam = HamiltonianFamily::from_terms(3, 1, [(ps("ZII"), TrigCoefficient::constant(1.0))]).unwrap();
        assert!(matches!(
            fam.eval_within(0.0, DenseBudget::new(2)),
            Err(Error::Capacity { qubits: 3, limit: 2 })
        ));
    }

    #[test]
    fn locality_above_k_max_rejected() {
        assert!(HamiltonianFamily::from_terms(2, 1, [(ps("XX"), TrigCoefficient::constant(1.0))]).is_err());
    }

    #[test]
    fn malformed_term_is_named() {
        let text = r#"{"n_qubits": 2, "k_max": 2, "terms": [
            {"pauli": "XZ", "coeff": {"const": 1.0}},
            {"pauli": "XQ", "coeff": {"const": 1.0}}]}"#;
        let err = HamiltonianFamily::from_json(text).unwrap_err().to_string();
        assert!(err.contains("term 1"), "{err}");
        let text = r#"{"n_qubits": 2, "k_max": 2, "terms": [{"pauli": "XZ", "coeff": {"cos": [[1]]}}]}"#;
        let err = HamiltonianFamily::from_json(text).unwrap_err().to_string();
        assert!(err.contains("term 0"), "{err}");
    }

    proptest! {
        #[test]
        fn hermitian_and_periodic(f in arb_family(2), l in 0.0..1.0f64) {
            let m = f.eval(l).unwrap();
            prop_assert!((&m - m.adjoint()).camax() <= 1e-12);
            let m0 = f.eval(0.0).unwrap();
            let m1 = f.eval(1.0).unwrap();
            prop_assert_eq!(m0, m1);
            let shifted = f.eval(l + 2.0).unwrap();
            prop_assert!((shifted - m).camax() <= 1e-12);
        }

        #[test]
        fn derivative_matches_central_difference(f in arb_family(2), l in 0.0..1.0f64) {
            let h = 1e-5;
            let fd = (f.eval(l + h).unwrap() - f.eval(l - h).unwrap()) / C64::new(2.0 * h, 0.0);
            let err = op_norm(&(fd - f.derivative(l).unwrap()));
            prop_assert!(err < 1e-6, "err {}", err);
        }

        #[test]
        fn json_round_trip_is_lossless(f in arb_family(3)) {
            let back = HamiltonianFamily::from_json(&f.to_json()).unwrap();
            prop_assert_eq!(back, f);
        }

        #[test]
        fn apply_matches_dense(f in arb_family(3), l in 0.0..1.0f64) {
            let v = DVector::from_fn(8, |i, _| C64::new((i as f64).sin(), (i as f64).cos()));
            let dense = f.eval(l).unwrap() * &v;
            prop_assert!((f.apply(l, &v) - dense).norm() < 1e-12);
        }
    }
}
