use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamcore::C64;

/// A 1- or 2-qubit gate. For two targets the first is the most significant
/// bit of the matrix index (the control for `CNOT`).
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub targets: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn named_matrix(name: &str) -> Option<DMatrix<C64>> {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let h = c(FRAC_1_SQRT_2, 0.0);
    let m = match name {
        "I" | "ID" => DMatrix::from_row_slice(2, 2, &[l, o, o, l]),
        "X" => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        "Y" => DMatrix::from_row_slice(2, 2, &[o, c(0.0, -1.0), c(0.0, 1.0), o]),
        "Z" => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        "H" => DMatrix::from_row_slice(2, 2, &[h, h, h, -h]),
        "S" => DMatrix::from_row_slice(2, 2, &[l, o, o, c(0.0, 1.0)]),
        "T" => DMatrix::from_row_slice(2, 2, &[l, o, o, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
        "CNOT" | "CX" => DMatrix::from_row_slice(4, 4, &[l, o, o, o, o, l, o, o, o, o, o, l, o, o, l, o]),
        "CZ" => DMatrix::from_diagonal(&DVector::from_vec(vec![l, l, l, -l])),
        "SWAP" => DMatrix::from_row_slice(4, 4, &[l, o, o, o, o, o, l, o, o, l, o, o, o, o, o, l]),
        _ => return None,
    };
    Some(m)
}

impl Gate {
    pub fn named(name: &str, targets: &[usize]) -> Result<Self> {
        let key = name.to_ascii_uppercase();
        let matrix = named_matrix(&key).ok_or_else(|| Error::Parse(format!("unknown gate {name:?}")))?;
        Self::from_matrix(&key, targets, matrix)
    }

    pub fn from_matrix(name: &str, targets: &[usize], matrix: DMatrix<C64>) -> Result<Self> {
        let k = targets.len();
        if k == 0 || k > 2 {
            return Err(Error::InvalidArgument(format!(
                "gate {name} acts on {k} qubits; 1 or 2 allowed"
            )));
        }
        if k == 2 && targets[0] == targets[1] {
            return Err(Error::InvalidArgument(format!(
                "gate {name} repeats target {}",
                targets[0]
            )));
        }
        if matrix.nrows() != 1 << k || matrix.ncols() != 1 << k {
            return Err(Error::InvalidArgument(format!(
                "gate {name} matrix is {}x{}, expected {d}x{d}",
                matrix.nrows(),
                matrix.ncols(),
                d = 1 << k
            )));
        }
        let dev = (matrix.adjoint() * &matrix - DMatrix::identity(1 << k, 1 << k)).camax();
        if dev > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "gate {name} is not unitary (deviation {dev:.2e})"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            targets: targets.to_vec(),
            matrix,
        })
    }

    /// Applies the gate in place to an `n`-qubit state (qubit 0 most
    /// significant).
    pub fn apply(&self, v: &mut DVector<C64>, n: usize) {
        let bits: Vec<usize> = self.targets.iter().map(|&q| 1usize << (n - 1 - q)).collect();
        let mask: usize = bits.iter().sum();
        let k = bits.len();
        let sub = 1usize << k;
        let mut idx = vec![0usize; sub];
        let mut buf = vec![C64::new(0.0, 0.0); sub];
        for base in 0..v.len() {
            if base & mask != 0 {
                continue;
            }
            for (s, slot) in idx.iter_mut().enumerate() {
                let mut i = base;
                for (j, &b) in bits.iter().enumerate() {
                    if s & (1 << (k - 1 - j)) != 0 {
                        i |= b;
                    }
                }
                *slot = i;
            }
            for (s, &i) in idx.iter().enumerate() {
                buf[s] = v[i];
            }
            for (r, &i) in idx.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (s, &b) in buf.iter().enumerate() {
                    acc += self.matrix[(r, s)] * b;
                }
                v[i] = acc;
            }
        }
    }
}

/// Gate list with idling, output and witness bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCircuit {
    pub n_system: usize,
    pub gates: Vec<Gate>,
    /// Post-idling steps `M`.
    pub idle: usize,
    pub output1: usize,
    pub output2: Option<usize>,
    pub witness_qubits: Vec<usize>,
}

impl GateCircuit {
    pub fn new(n_system: usize, gates: Vec<Gate>, output1: usize) -> Result<Self> {
        let c = Self {
            n_system,
            gates,
            idle: 0,
            output1,
            output2: None,
            witness_qubits: Vec::new(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_idle(mut self, m: usize) -> Self {
        self.idle = m;
        self
    }

    pub fn with_output2(mut self, q: usize) -> Result<Self> {
        self.output2 = Some(q);
        self.validate()?;
        Ok(self)
    }

    pub fn with_witness(mut self, qubits: Vec<usize>) -> Result<Self> {
        self.witness_qubits = qubits;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_system == 0 {
            return Err(Error::InvalidArgument("circuit needs at least one qubit".into()));
        }
        if self.gates.is_empty() {
            return Err(Error::InvalidArgument(
                "circuit needs at least one gate (T >= 1)".into(),
            ));
        }
        for (i, g) in self.gates.iter().enumerate() {
            if let Some(&q) = g.targets.iter().find(|&&q| q >= self.n_system) {
                return Err(Error::InvalidArgument(format!(
                    "gate {i} ({}) targets qubit {q} out of range",
                    g.name
                )));
            }
        }
        let in_range = |q: usize, what: &str| {
            if q >= self.n_system {
                Err(Error::InvalidArgument(format!("{what} qubit {q} out of range")))
            } else {
                Ok(())
            }
        };
        in_range(self.output1, "output")?;
        if let Some(q) = self.output2 {
            in_range(q, "second output")?;
        }
        for &q in &self.witness_qubits {
            in_range(q, "witness")?;
        }
        Ok(())
    }

    /// Gate count `T`.
    pub fn t(&self) -> usize {
        self.gates.len()
    }

    /// Clock length `T + M`.
    pub fn clock_len(&self) -> usize {
        self.gates.len() + self.idle
    }

    /// Non-witness system qubits, initialised to `|0>`.
    pub fn ancilla_qubits(&self) -> Vec<usize> {
        (0..self.n_system)
            .filter(|q| !self.witness_qubits.contains(q))
            .collect()
    }

    /// Dense circuit unitary `U_T ... U_1`.
    pub fn unitary(&self) -> DMatrix<C64> {
        let d = 1usize << self.n_system;
        let mut cols = Vec::with_capacity(d);
        for b in 0..d {
            let mut v = DVector::zeros(d);
            v[b] = C64::new(1.0, 0.0);
            for g in &self.gates {
                g.apply(&mut v, self.n_system);
            }
            cols.push(v);
        }
        DMatrix::from_columns(&cols)
    }

    /// System input with the witness register in `witness` and ancillas in
    /// `|0>`. `witness` is indexed over the witness qubits in listed order.
    pub fn input_state(&self, witness: Option<&DVector<C64>>) -> Result<DVector<C64>> {
        let d = 1usize << self.n_system;
        let nw = self.witness_qubits.len();
        let mut v = DVector::zeros(d);
        match witness {
            None => v[0] = C64::new(1.0, 0.0),
            Some(w) => {
                if w.len() != 1 << nw {
                    return Err(Error::InvalidArgument(format!(
                        "witness has length {}, register has {nw} qubits",
                        w.len()
                    )));
                }
                for (wi, &amp) in w.iter().enumerate() {
                    let mut idx = 0usize;
                    for (j, &q) in self.witness_qubits.iter().enumerate() {
                        if wi & (1 << (nw - 1 - j)) != 0 {
                            idx |= 1 << (self.n_system - 1 - q);
                        }
                    }
                    v[idx] = amp;
                }
                let n = v.norm();
                if (n - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidArgument(format!("witness norm {n} differs from 1")));
                }
            }
        }
        Ok(v)
    }

    /// `U_t ... U_1 |x>` for `t = 0..=T`.
    pub fn partial_states(&self, input: &DVector<C64>) -> Vec<DVector<C64>> {
        let mut out = Vec::with_capacity(self.gates.len() + 1);
        let mut v = input.clone();
        out.push(v.clone());
        for g in &self.gates {
            g.apply(&mut v, self.n_system);
            out.push(v.clone());
        }
        out
    }

    /// Probability that `qubit` reads 1 after the circuit.
    pub fn output_probability(&self, qubit: usize, witness: Option<&DVector<C64>>) -> Result<f64> {
        let v = self
            .partial_states(&self.input_state(witness)?)
            .pop()
            .expect("final state");
        let bit = 1usize << (self.n_system - 1 - qubit);
        Ok(v.iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }
}

// --- JSON circuit format ----------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct GateRecord {
    gate: String,
    targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CircuitRecord {
    n_system: usize,
    gates: Vec<serde_json::Value>,
    #[serde(rename = "M", default)]
    idle: usize,
    output_qubit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output2_qubit: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    witness_qubits: Vec<usize>,
}

impl GateCircuit {
    pub fn to_json_value(&self) -> serde_json::Value {
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let named = named_matrix(&g.name).is_some_and(|m| m == g.matrix);
                let rec = GateRecord {
                    gate: if named { g.name.clone() } else { "MATRIX".into() },
                    targets: g.targets.clone(),
                    matrix: (!named).then(|| {
                        (0..g.matrix.nrows())
                            .map(|r| {
                                (0..g.matrix.ncols())
                                    .map(|c| [g.matrix[(r, c)].re, g.matrix[(r, c)].im])
                                    .collect()
                            })
                            .collect()
                    }),
                };
                serde_json::to_value(rec).expect("gate serializes")
            })
            .collect();
        serde_json::to_value(CircuitRecord {
            n_system: self.n_system,
            gates,
            idle: self.idle,
            output_qubit: self.output1,
            output2_qubit: self.output2,
            witness_qubits: self.witness_qubits.clone(),
        })
        .expect("circuit serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("circuit serializes")
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let rec: CircuitRecord =
            serde_json::from_value(value).map_err(|e| Error::Parse(format!("circuit file: {e}")))?;
        let mut gates = Vec::with_capacity(rec.gates.len());
        for (i, raw) in rec.gates.into_iter().enumerate() {
            let g: GateRecord = serde_json::from_value(raw).map_err(|e| Error::Parse(format!("gate {i}: {e}")))?;
            let gate = match &g.matrix {
                Some(rows) => {
                    let d = rows.len();
                    if rows.iter().any(|r| r.len() != d) {
                        return Err(Error::Parse(format!("gate {i}: matrix is not square")));
                    }
                    let m = DMatrix::from_fn(d, d, |r, c| C64::new(rows[r][c][0], rows[r][c][1]));
                    Gate::from_matrix(&g.gate, &g.targets, m)
                }
                None => Gate::named(&g.gate, &g.targets),
            }
            .map_err(|e| Error::Parse(format!("gate {i}: {e}")))?;
            gates.push(gate);
        }
        let c = GateCircuit {
            n_system: rec.n_system,
            gates,
            idle: rec.idle,
            output1: rec.output_qubit,
            output2: rec.output2_qubit,
            witness_qubits: rec.witness_qubits,
        };
        c.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("circuit file: {e}")))?;
        Self::from_json_value(v)
    }
}

/// Two-qubit circuits whose output qubit 1 ends deterministically in `|1>`
/// (`yes`) or `|0>`.
pub fn toy_bqp_circuit(yes: bool) -> GateCircuit {
    let first = if yes {
        Gate::named("X", &[0])
    } else {
        Gate::named("ID", &[0])
    };
    GateCircuit::new(2, vec![first.unwrap(), Gate::named("CNOT", &[0, 1]).unwrap()], 1).unwrap()
}

/// Two-qubit verifiers with witness qubit 0 and acceptance qubit 1. Exactly
/// one witness basis state is accepted; the witness value is the first
/// output, so `yes` accepts `|1>` and the other variant accepts `|0>`.
pub fn toy_duqma_circuit(yes: bool) -> GateCircuit {
    let gates = if yes {
        vec![Gate::named("CNOT", &[0, 1]).unwrap(), Gate::named("ID", &[0]).unwrap()]
    } else {
        vec![Gate::named("X", &[1]).unwrap(), Gate::named("CNOT", &[0, 1]).unwrap()]
    };
    GateCircuit::new(2, gates, 0)
        .unwrap()
        .with_output2(1)
        .unwrap()
        .with_witness(vec![0])
        .unwrap()
}
