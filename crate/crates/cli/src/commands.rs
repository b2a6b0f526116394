use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;

use berrylab_core::bpe::{
    decide_interval, prepare_ground_state, BpeConfig, BpePlan, BpeRecord, MurtaOutcome, PreparedBpe, PreparedMurta,
};
use berrylab_core::exact::{
    diagonalize, min_gap, sweep, uniform_grid, wilson_loop_berry_phase, write_sweep_csv, BerryPhaseResult, Gauge,
};
use berrylab_core::hardness::{build_bqp_instance, build_duqma_instance, GateCircuit, HardnessInstance};
use berrylab_core::verifier::{accept_rate, Decision, Verifier, VerifierConfig};
use berrylab_core::{Error, HamiltonianFamily, Result, C64};

use crate::args::{
    BpeArgs, Command, EstimationArgs, GenhardArgs, KindArg, MurtaArgs, OracleArgs, SweepArgs, VerifyArgs,
};

/// Runs one command and returns the files it wrote.
pub fn run(cmd: &Command) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Oracle(a) => oracle(a),
        Command::Bpe(a) => bpe(a),
        Command::Murta(a) => murta(a),
        Command::Genhard(a) => genhard(a),
        Command::Verify(a) => verify(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Rerun(_) => unreachable!("handled by the manifest module"),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn load(path: &Path) -> Result<(HamiltonianFamily, Option<HardnessInstance>)> {
    let text = std::fs::read_to_string(path)?;
    let family = HamiltonianFamily::from_json(&text).map_err(|e| in_file(path, e))?;
    let hardness = if family.metadata().contains_key("hardness") {
        Some(HardnessInstance::from_exported(&family)?)
    } else {
        None
    };
    Ok((family, hardness))
}

#[derive(Serialize)]
struct OracleReport {
    #[serde(flatten)]
    result: BerryPhaseResult,
    min_gap: f64,
    min_gap_lambda: f64,
}

fn oracle(a: &OracleArgs) -> Result<Vec<PathBuf>> {
    let (family, _) = load(&a.instance)?;
    let result = wilson_loop_berry_phase(&family, a.n)?;
    let grid = uniform_grid(a.sweep_points);
    let (gap, at) = min_gap(&family, &grid)?;
    let rows = sweep(&family, &grid, 1e-4, &Gauge::Auto)?;
    let csv_path = a.sweep_csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    write_sweep_csv(&rows, &csv_path)?;
    if !result.converged {
        eprintln!(
            "warning: Wilson loop not converged (error estimate {:.3e})",
            result.estimated_discretization_error
        );
    }
    println!("theta_B = {:.12}", result.theta_b);
    write_json(
        &a.out,
        &OracleReport {
            result,
            min_gap: gap,
            min_gap_lambda: at,
        },
    )?;
    Ok(vec![a.out.clone(), csv_path])
}

fn sweep_cmd(a: &SweepArgs) -> Result<Vec<PathBuf>> {
    let (family, _) = load(&a.instance)?;
    let rows = sweep(&family, &uniform_grid(a.points), a.h, &Gauge::Auto)?;
    write_sweep_csv(&rows, &a.out)?;
    Ok(vec![a.out.clone()])
}

/// Ground state of `H(0)`; hardness instances also check the guiding overlap.
fn initial_state(family: &HamiltonianFamily, hardness: Option<&HardnessInstance>, gamma: f64) -> Result<DVector<C64>> {
    match hardness {
        Some(h) => prepare_ground_state(family, Some(&h.guiding_state()?), gamma),
        None => prepare_ground_state(family, None, gamma),
    }
}

fn oracle_value(
    family: &HamiltonianFamily,
    hardness: Option<&HardnessInstance>,
    n: Option<usize>,
) -> Result<Option<f64>> {
    match (n, hardness.and_then(|h| h.certification.as_ref())) {
        (Some(n), _) => Ok(Some(wilson_loop_berry_phase(family, n)?.theta_b)),
        (None, Some(c)) => Ok(Some(c.oracle_theta_b)),
        (None, None) => Ok(None),
    }
}

fn config(c: &EstimationArgs, hardness: bool) -> BpeConfig {
    let mut cfg = BpeConfig::new(c.epsilon_b, c.eta);
    cfg.t = c.runtime;
    cfg.integrator = c.integrator.resolve(hardness);
    cfg
}

#[derive(Serialize)]
struct BpeReport {
    #[serde(flatten)]
    first: BpeRecord,
    interval: Option<(f64, f64, f64)>,
    plan: BpePlan,
    #[serde(rename = "noiseless_theta_B")]
    noiseless_theta_b: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    runs: Vec<BpeRecord>,
}

fn bpe(a: &BpeArgs) -> Result<Vec<PathBuf>> {
    let c = &a.common;
    let (family, hardness) = load(&c.instance)?;
    let interval = match (a.interval_a, a.interval_b, a.delta) {
        (Some(x), Some(y), Some(d)) => Some((x, y, d)),
        _ => hardness.as_ref().and_then(|h| h.claim().ok()),
    };
    if let Some((_, _, d)) = interval {
        if c.epsilon_b >= 2.0 * d {
            return Err(Error::Config(format!(
                "eps_B = {} must be below 2 delta = {}",
                c.epsilon_b,
                2.0 * d
            )));
        }
    }
    let mut cfg = config(c, hardness.is_some());
    cfg.alpha_mode = a.alpha();
    let psi = initial_state(&family, hardness.as_ref(), c.gamma)?;
    let oracle = oracle_value(&family, hardness.as_ref(), c.oracle_n)?;
    let prep = PreparedBpe::new(&family, &psi, &cfg)?;
    let mut records = Vec::new();
    for i in 0..c.runs.max(1) {
        let out = prep.run(c.seed.wrapping_add(i))?;
        let decision = interval
            .map(|(x, y, d)| decide_interval(out.theta_b_hat, x, y, d, c.epsilon_b))
            .transpose()?;
        records.push(BpeRecord::new(&prep, &out, oracle, decision));
    }
    let first = records[0].clone();
    println!("theta_B_hat = {:.12}", first.theta_b_hat);
    let report = BpeReport {
        first,
        interval,
        plan: prep.plan.clone(),
        noiseless_theta_b: prep.noiseless_estimate().1,
        runs: if records.len() > 1 { records } else { Vec::new() },
    };
    write_json(&c.out, &report)?;
    Ok(vec![c.out.clone()])
}

#[derive(Serialize)]
struct MurtaReport {
    #[serde(flatten)]
    first: MurtaOutcome,
    #[serde(rename = "T")]
    t: f64,
    m: u32,
    repetitions: usize,
    #[serde(rename = "oracle_theta_B")]
    oracle_theta_b: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    runs: Vec<MurtaOutcome>,
}

fn murta(a: &MurtaArgs) -> Result<Vec<PathBuf>> {
    let c = &a.common;
    let (family, hardness) = load(&c.instance)?;
    let cfg = config(c, hardness.is_some());
    let psi = initial_state(&family, hardness.as_ref(), c.gamma)?;
    let oracle = oracle_value(&family, hardness.as_ref(), c.oracle_n)?;
    let prep = PreparedMurta::new(&family, &psi, &cfg)?;
    let runs = (0..c.runs.max(1))
        .map(|i| prep.run(c.seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    println!("theta_hat = {:.12}", runs[0].theta_hat);
    let report = MurtaReport {
        first: runs[0].clone(),
        t: prep.t,
        m: prep.m,
        repetitions: prep.repetitions,
        oracle_theta_b: oracle,
        runs: if runs.len() > 1 { runs } else { Vec::new() },
    };
    write_json(&c.out, &report)?;
    Ok(vec![c.out.clone()])
}

/// Basis state over `n` witness qubits from a bit string.
fn witness_vector(bits: &str, n: usize) -> Result<DVector<C64>> {
    if bits.len() != n || !bits.chars().all(|ch| ch == '0' || ch == '1') {
        return Err(Error::Config(format!(
            "witness {bits:?} is not a bit string of length {n}"
        )));
    }
    let index = usize::from_str_radix(bits, 2).map_err(|e| Error::Config(e.to_string()))?;
    let mut v = DVector::zeros(1 << n);
    v[index] = C64::new(1.0, 0.0);
    Ok(v)
}

fn genhard(a: &GenhardArgs) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(&a.circuit)?;
    let circuit = GateCircuit::from_json(&text).map_err(|e| in_file(&a.circuit, e))?;
    let mut inst = match a.kind {
        KindArg::Bqp => build_bqp_instance(&circuit, a.r, a.m)?,
        KindArg::Duqma => {
            let bits = a
                .witness
                .as_deref()
                .ok_or_else(|| Error::Config("duqma instances need --witness".into()))?;
            let w = witness_vector(bits, circuit.witness_qubits.len())?;
            build_duqma_instance(&circuit, &w, a.r, a.epsilon, a.m)?
        }
    };
    let cert = inst.certify()?.clone();
    for w in &inst.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "oracle theta_B = {:.12}, certified delta = {:.6e}, hist gap = {:.6e}",
        cert.oracle_theta_b, cert.delta, inst.hist_gap
    );
    let prov = a.provenance.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".provenance.json");
        PathBuf::from(s)
    });
    inst.export_family().save(&a.out)?;
    write_json(&prov, &inst.provenance())?;
    Ok(vec![a.out.clone(), prov])
}

#[derive(Serialize)]
struct AcceptRow {
    runs: usize,
    energy_pass_rate: f64,
    accept_one_rate: f64,
    accept_rate: f64,
}

fn verify(a: &VerifyArgs) -> Result<Vec<PathBuf>> {
    let (_, hardness) = load(&a.instance)?;
    let inst = hardness.ok_or_else(|| Error::Config("verify needs a hardness instance (see genhard)".into()))?;
    let (_, _, delta) = inst.claim()?;
    let mut bpe = BpeConfig::new(a.epsilon_b.unwrap_or(delta / 2.0), a.eta);
    bpe.integrator = a.integrator.resolve(true);
    let mut cfg = VerifierConfig::new(bpe);
    cfg.energy_precision = a.energy_precision;
    cfg.delta_x = a.delta_x;
    let mut verifier = Verifier::new(&inst, cfg)?;
    let witness = match a.witness.as_str() {
        "true" => inst.history_state(None)?,
        "ground" => diagonalize(&inst.family, 0.0)?.ground_state(),
        "excited" => diagonalize(&inst.family, 0.0)?.state(1),
        bits => inst.history_state(Some(&witness_vector(bits, inst.circuit.witness_qubits.len())?))?,
    };
    let seeds: Vec<u64> = (0..a.runs).map(|i| a.seed.wrapping_add(i)).collect();
    let outs = verifier.run_many(&witness, &seeds)?;
    let n = outs.len().max(1) as f64;
    let row = AcceptRow {
        runs: outs.len(),
        energy_pass_rate: outs.iter().filter(|o| o.energy_pass).count() as f64 / n,
        accept_one_rate: outs.iter().filter(|o| o.decision == Decision::AcceptOne).count() as f64 / n,
        accept_rate: accept_rate(&outs),
    };
    println!(
        "energy pass {:.3}, accept-1 {:.3}, accept {:.3}",
        row.energy_pass_rate, row.accept_one_rate, row.accept_rate
    );
    let csv_path = a.csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(Error::from)?;
    w.serialize(&row).map_err(Error::from)?;
    w.flush()?;
    write_json(&a.out, &outs)?;
    Ok(vec![a.out.clone(), csv_path])
}
