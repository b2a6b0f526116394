use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::circuit::GateCircuit;
use super::compile::{compile_history, history_state, make_v, penalty_term, product_state, window_state};
use crate::angle::wrap_2pi;
use crate::error::{Error, Result};
use crate::exact::{
    berry_connection_grid, diagonalize, diagonalize_grid, uniform_grid, wilson_loop_berry_phase, Gauge,
};
use crate::hamcore::{HamiltonianFamily, C64};

/// Output probabilities must sit within this distance of 0 or 1.
pub const DETERMINISM_TOL: f64 = 1e-6;

/// Safety factor applied to the measured `min |iA|` when certifying `delta`.
pub const DELTA_SAFETY: f64 = 0.9;

/// Grid sizes used by [`HardnessInstance::certify`].
pub const CERTIFY_WILSON_N: usize = 64;
pub const CERTIFY_CONNECTION_N: usize = 16;
const CONNECTION_STEP: f64 = 1e-4;
const SANDWICH_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Bqp,
    Duqma,
}

/// Named guiding-state construction with its overlap on the history state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidingDescriptor {
    pub name: String,
    pub overlap: f64,
}

/// Certified interval claim `(a, b, delta)` with the oracle phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub oracle_theta_b: f64,
    pub min_abs_connection: f64,
    /// +1 when `iA > 0` on the whole grid, -1 when negative, 0 when mixed.
    pub connection_sign: i8,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

/// Energy sandwich measured over a `lambda` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub max_e0: f64,
    pub min_e1: f64,
}

#[derive(Debug, Clone)]
pub struct HardnessInstance {
    pub kind: InstanceKind,
    pub circuit: GateCircuit,
    /// `H_hist` (plus the penalty term for dUQMA) plus `r V(lambda)`.
    pub family: HamiltonianFamily,
    /// The `lambda`-independent part.
    pub base: HamiltonianFamily,
    /// Unscaled `V(lambda)`.
    pub v: HamiltonianFamily,
    pub r: f64,
    pub epsilon_penalty: f64,
    pub e_th: Option<f64>,
    pub witness: Option<DVector<C64>>,
    pub guiding: Vec<GuidingDescriptor>,
    /// Gap of `H_hist` above its ground space.
    pub hist_gap: f64,
    /// Gap of the base operator.
    pub base_gap: f64,
    pub min_gap: f64,
    pub sandwich: Option<Sandwich>,
    pub certification: Option<Certification>,
    pub warnings: Vec<String>,
}

/// Gap between the zero-energy ground space of `H_hist` and the next level.
fn history_gap(h: &HamiltonianFamily) -> Result<f64> {
    let s = diagonalize(h, 0.0)?;
    let tol = 1e-9 * s.norm().max(1.0);
    let e0 = s.eigenvalues[0];
    s.eigenvalues
        .iter()
        .find(|&&e| e - e0 > tol)
        .map(|&e| e - e0)
        .ok_or(Error::Degenerate {
            lambda: 0.0,
            gap: 0.0,
            tolerance: tol,
        })
}

fn combine(base: &HamiltonianFamily, v: &HamiltonianFamily, r: f64) -> Result<HamiltonianFamily> {
    let mut f = HamiltonianFamily::scale_and_add(1.0, base, r, v)?;
    f.set_k_max(base.k_max().max(v.k_max()))?;
    Ok(f)
}

fn check_r(r: f64, gap: f64, what: &str) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("r = {r} must be a non-negative number")));
    }
    if r > gap / 4.0 {
        return Err(Error::InvalidArgument(format!(
            "r too large: r = {r:.4e} exceeds {what}/4 = {:.4e} (measured gap {gap:.4e})",
            gap / 4.0
        )));
    }
    Ok(())
}

/// `H_hist + r V(lambda)` for a circuit with deterministic output on
/// `output1`. `r` defaults to a eighth of the measured gap.
pub fn build_bqp_instance(circuit: &GateCircuit, r: Option<f64>, m: usize) -> Result<HardnessInstance> {
    let circuit = circuit.clone().with_idle(m);
    if !circuit.witness_qubits.is_empty() {
        return Err(Error::InvalidArgument(
            "BQP-type circuits take no witness qubits".into(),
        ));
    }
    let mut warnings = Vec::new();
    let p = circuit.output_probability(circuit.output1, None)?;
    if p.min(1.0 - p) > DETERMINISM_TOL {
        warnings.push(format!("output is not near-deterministic: P(1) = {p:.6}"));
    }
    let base = compile_history(&circuit)?;
    let hist_gap = history_gap(&base)?;
    let r = r.unwrap_or(hist_gap / 8.0);
    check_r(r, hist_gap, "gap")?;
    let v = make_v(base.n_qubits(), circuit.output1)?;
    let family = combine(&base, &v, r)?;

    let psi = history_state(&circuit, None)?;
    let guiding = vec![
        GuidingDescriptor {
            name: "history_window".into(),
            overlap: window_state(&circuit, None)?.dotc(&psi).norm_sqr(),
        },
        GuidingDescriptor {
            name: "product".into(),
            overlap: product_state(&circuit)?.dotc(&psi).norm_sqr(),
        },
    ];
    let (min_gap, _) = crate::exact::min_gap(&family, &uniform_grid(SANDWICH_N))?;
    if min_gap < hist_gap / 2.0 {
        warnings.push(format!(
            "minimum gap {min_gap:.4e} is below half the history gap {hist_gap:.4e}"
        ));
    }
    Ok(HardnessInstance {
        kind: InstanceKind::Bqp,
        circuit,
        family,
        base,
        v,
        r,
        epsilon_penalty: 0.0,
        e_th: None,
        witness: None,
        guiding,
        hist_gap,
        base_gap: hist_gap,
        min_gap,
        sandwich: None,
        certification: None,
        warnings,
    })
}

/// Energy threshold `eps / (2 (T+M+1))`.
pub fn energy_threshold(epsilon: f64, clock_len: usize) -> f64 {
    epsilon / (2.0 * (clock_len + 1) as f64)
}

/// `H_hist + H_1 + r V(lambda)` with the witness supplied explicitly.
/// Regime violations are reported as warnings on the instance.
pub fn build_duqma_instance(
    circuit: &GateCircuit,
    witness: &DVector<C64>,
    r: Option<f64>,
    epsilon: f64,
    m: usize,
) -> Result<HardnessInstance> {
    let circuit = circuit.clone().with_idle(m);
    let out2 = circuit
        .output2
        .ok_or_else(|| Error::InvalidArgument("dUQMA-type circuits need a second output qubit".into()))?;
    if circuit.witness_qubits.is_empty() {
        return Err(Error::InvalidArgument("dUQMA-type circuits need witness qubits".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "penalty strength {epsilon} must be positive"
        )));
    }
    let mut warnings = Vec::new();
    let p = circuit.output_probability(out2, Some(witness))?;
    if 1.0 - p > DETERMINISM_TOL {
        warnings.push(format!(
            "witness is not accepted near-deterministically: P(accept) = {p:.6}"
        ));
    }
    let hist = compile_history(&circuit)?;
    let hist_gap = history_gap(&hist)?;
    if epsilon > hist_gap / 16.0 {
        warnings.push(format!(
            "penalty {epsilon:.3e} exceeds history gap / 16 = {:.3e}",
            hist_gap / 16.0
        ));
    }
    let mut base = HamiltonianFamily::scale_and_add(1.0, &hist, 1.0, &penalty_term(&circuit, epsilon)?)?;
    base.set_k_max(hist.k_max())?;
    let base_spec = diagonalize(&base, 0.0)?;
    let base_gap = base_spec.gap;
    let r = r.unwrap_or(base_gap / 8.0);
    check_r(r, base_gap, "gap of H_0 + H_1")?;
    let v = make_v(base.n_qubits(), circuit.output1)?;
    let family = combine(&base, &v, r)?;
    let e_th = energy_threshold(epsilon, circuit.clock_len());

    let psi = history_state(&circuit, Some(witness))?;
    let slices = diagonalize_grid(&family, &uniform_grid(SANDWICH_N))?;
    let sandwich = Sandwich {
        max_e0: slices
            .iter()
            .map(|s| s.eigenvalues[0])
            .fold(f64::NEG_INFINITY, f64::max),
        min_e1: slices.iter().map(|s| s.eigenvalues[1]).fold(f64::INFINITY, f64::min),
    };
    if sandwich.max_e0 > e_th || sandwich.min_e1 < e_th {
        warnings.push(format!(
            "energy sandwich violated: E0 <= {:.4e}, E1 >= {:.4e}, E_th = {e_th:.4e}",
            sandwich.max_e0, sandwich.min_e1
        ));
    }
    let min_gap = slices.iter().map(|s| s.gap).fold(f64::INFINITY, f64::min);
    let overlap = slices[0].ground_state().dotc(&psi).norm_sqr();
    let guiding = vec![GuidingDescriptor {
        name: "accepting_history".into(),
        overlap,
    }];
    if overlap < 0.9 {
        warnings.push(format!(
            "ground state overlaps the accepting history state only {overlap:.4}"
        ));
    }
    Ok(HardnessInstance {
        kind: InstanceKind::Duqma,
        circuit,
        family,
        base,
        v,
        r,
        epsilon_penalty: epsilon,
        e_th: Some(e_th),
        witness: Some(witness.clone()),
        guiding,
        hist_gap,
        base_gap,
        min_gap,
        sandwich: Some(sandwich),
        certification: None,
        warnings,
    })
}

impl HardnessInstance {
    /// History state of the instance circuit, with `witness` overriding the
    /// stored one for dUQMA instances.
    pub fn history_state(&self, witness: Option<&DVector<C64>>) -> Result<DVector<C64>> {
        history_state(&self.circuit, witness.or(self.witness.as_ref()))
    }

    /// Guiding state for BPE: the window state for BQP instances, the
    /// accepting history state otherwise.
    pub fn guiding_state(&self) -> Result<DVector<C64>> {
        match self.kind {
            InstanceKind::Bqp => window_state(&self.circuit, None),
            InstanceKind::Duqma => self.history_state(None),
        }
    }

    /// Oracle Berry phase and the `(0, pi, delta)` claim from the measured
    /// connection. `delta = 0.9 min |iA|`.
    pub fn certify(&mut self) -> Result<&Certification> {
        let oracle = wilson_loop_berry_phase(&self.family, CERTIFY_WILSON_N)?;
        let reference = diagonalize(&self.base, 0.0)?.ground_state();
        let ia = berry_connection_grid(
            &self.family,
            &uniform_grid(CERTIFY_CONNECTION_N),
            CONNECTION_STEP,
            &Gauge::Reference(reference),
        )?;
        let min_abs = ia.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        let sign = if ia.iter().all(|&x| x > 0.0) {
            1
        } else if ia.iter().all(|&x| x < 0.0) {
            -1
        } else {
            0
        };
        if sign == 0 {
            self.warnings
                .push("Berry connection changes sign along the loop".into());
        }
        if !oracle.converged {
            self.warnings.push(format!(
                "oracle Berry phase not converged at N = {} (error estimate {:.2e})",
                oracle.grid_size, oracle.estimated_discretization_error
            ));
        }
        self.certification = Some(Certification {
            oracle_theta_b: oracle.theta_b,
            min_abs_connection: min_abs,
            connection_sign: sign,
            a: 0.0,
            b: PI,
            delta: DELTA_SAFETY * min_abs,
        });
        Ok(self.certification.as_ref().expect("just set"))
    }

    /// Sidecar record of how the instance was produced.
    pub fn provenance(&self) -> serde_json::Value {
        let cert = self.certification.as_ref();
        json!({
            "kind": self.kind,
            "circuit": self.circuit.to_json_value(),
            "T": self.circuit.t(),
            "M": self.circuit.idle,
            "r": self.r,
            "epsilon_penalty": self.epsilon_penalty,
            "E_th": self.e_th,
            "certified_delta": cert.map(|c| c.delta),
            "a": cert.map(|c| c.a),
            "b": cert.map(|c| c.b),
            "oracle_theta_B": cert.map(|c| c.oracle_theta_b),
            "min_abs_connection": cert.map(|c| c.min_abs_connection),
            "hist_gap": self.hist_gap,
            "base_gap": self.base_gap,
            "min_gap": self.min_gap,
            "guiding": self.guiding,
            "sandwich": self.sandwich,
            "witness": self.witness.as_ref().map(|w| w.iter().map(|a| [a.re, a.im]).collect::<Vec<_>>()),
            "warnings": self.warnings,
        })
    }

    /// Family with the provenance attached as metadata, ready for the
    /// hamcore JSON format.
    pub fn export_family(&self) -> HamiltonianFamily {
        let mut f = self.family.clone();
        f.metadata_mut().insert("hardness".into(), self.provenance());
        f
    }

    /// Rebuilds an instance from an exported family by recompiling its
    /// circuit and restoring the stored certification.
    pub fn from_exported(family: &HamiltonianFamily) -> Result<Self> {
        let p = family
            .metadata()
            .get("hardness")
            .ok_or_else(|| Error::Parse("family carries no hardness metadata".into()))?;
        let field = |k: &str| {
            p.get(k)
                .ok_or_else(|| Error::Parse(format!("hardness metadata lacks {k:?}")))
        };
        let kind: InstanceKind = serde_json::from_value(field("kind")?.clone())?;
        let circuit = GateCircuit::from_json_value(field("circuit")?.clone())?;
        let m = circuit.idle;
        let r = field("r")?.as_f64();
        let mut inst = match kind {
            InstanceKind::Bqp => build_bqp_instance(&circuit, r, m)?,
            InstanceKind::Duqma => {
                let w: Vec<[f64; 2]> = serde_json::from_value(field("witness")?.clone())?;
                let w = DVector::from_iterator(w.len(), w.iter().map(|a| C64::new(a[0], a[1])));
                let eps = field("epsilon_penalty")?
                    .as_f64()
                    .ok_or_else(|| Error::Parse("epsilon_penalty is not a number".into()))?;
                build_duqma_instance(&circuit, &w, r, eps, m)?
            }
        };
        if let (Some(theta), Some(delta), Some(a), Some(b), Some(mn)) = (
            p.get("oracle_theta_B").and_then(|v| v.as_f64()),
            p.get("certified_delta").and_then(|v| v.as_f64()),
            p.get("a").and_then(|v| v.as_f64()),
            p.get("b").and_then(|v| v.as_f64()),
            p.get("min_abs_connection").and_then(|v| v.as_f64()),
        ) {
            inst.certification = Some(Certification {
                oracle_theta_b: theta,
                min_abs_connection: mn,
                connection_sign: 0,
                a,
                b,
                delta,
            });
        }
        Ok(inst)
    }

    /// Interval claim `(a, b, delta)`; requires [`certify`](Self::certify).
    pub fn claim(&self) -> Result<(f64, f64, f64)> {
        self.certification
            .as_ref()
            .map(|c| (c.a, c.b, c.delta))
            .ok_or_else(|| Error::Config("instance has not been certified".into()))
    }

    /// True when the oracle phase lies in `(0, pi)`.
    pub fn oracle_is_yes(&self) -> Option<bool> {
        self.certification.as_ref().map(|c| {
            let t = wrap_2pi(c.oracle_theta_b);
            t > 0.0 && t < PI
        })
    }
}
