//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p berrylab-cli --test acceptance`. A subset can be
//! selected by listing criterion numbers after `--`, e.g. `-- 1 3 4`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use berrylab_core::angle::{circular_distance, wrap_2pi};
use berrylab_core::bpe::{
    choose_alpha, decide_interval, murta_bpe, prepare_ground_state, reconstruct_phases, run_bpe, AlphaMode, BpeConfig,
    PreparedBpe,
};
use berrylab_core::dynamics::{propagate_vector, AdiabaticSchedule, Integrator};
use berrylab_core::exact::{
    berry_connection_in_gauge, berry_connection_perturbative, diagonalize, min_gap, uniform_grid,
    wilson_loop_berry_phase, wilson_loop_phase, Gauge,
};
use berrylab_core::families::{constant_z, equatorial_loop, random_loop};
use berrylab_core::hardness::{
    build_bqp_instance, build_duqma_instance, compile_history, history_state, toy_bqp_circuit, toy_duqma_circuit, Gate,
    GateCircuit,
};
use berrylab_core::verifier::EnergyMeter;
use berrylab_core::{HamiltonianFamily, C64};

type Check = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn c1_oracle() -> Outcome {
    let start = Instant::now();
    let eq = wilson_loop_berry_phase(&equatorial_loop(), 512).unwrap().theta_b;
    let consts = [constant_z(0.7), constant_z(-1.3)];
    let worst_const = consts
        .iter()
        .map(|f| circular_distance(wilson_loop_phase(f, 512).unwrap(), 0.0))
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let err = (eq - PI).abs();
    outcome(
        err <= 1e-4 && worst_const <= 1e-10 && within(elapsed, 1.0),
        format!(
            "|theta - pi| = {err:.2e}, constant {worst_const:.2e}, {:.3} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn gapped_random_family(n: usize, rng: &mut ChaCha8Rng) -> HamiltonianFamily {
    loop {
        let f = random_loop(n, rng);
        if min_gap(&f, &uniform_grid(64)).map(|g| g.0 >= 0.5).unwrap_or(false) {
            return f;
        }
    }
}

fn c2_bpe_vs_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 1.0f64;
    let mut lines = Vec::new();
    for i in 0..10 {
        let f = gapped_random_family(2 + i % 2, &mut rng);
        let truth = wilson_loop_phase(&f, 1024).unwrap();
        let psi = prepare_ground_state(&f, None, 0.0).unwrap();
        let prep = PreparedBpe::new(&f, &psi, &BpeConfig::new(0.05, 0.05)).unwrap();
        let good = (0..200u64)
            .filter(|&s| circular_distance(prep.run(1000 * i as u64 + s).unwrap().theta_b_hat, truth) <= 0.05)
            .count();
        let rate = good as f64 / 200.0;
        worst = worst.min(rate);
        lines.push(format!("{rate:.3}"));
    }
    let elapsed = start.elapsed();
    outcome(
        worst >= 0.92 && within(elapsed, 600.0),
        format!("success rates [{}], {:.1} s", lines.join(", "), elapsed.as_secs_f64()),
    )
}

fn c3_reconstruction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = [0.0f64; 3];
    for _ in 0..10_000 {
        let tb = rng.gen_range(0.0..TAU);
        let t = rng.gen_range(1.0..10.0);
        let h = rng.gen_range(0.5..2.0);
        let eps = rng.gen_range(0.01..0.2);
        // unwrapped dynamical phase within [-T H_max, T H_max]
        let td = rng.gen_range(-1.0..1.0) * t * h;
        let modes = [
            AlphaMode::IntegerReciprocal { cap: None },
            AlphaMode::IntegerReciprocal { cap: Some(3.0) },
            AlphaMode::Formula,
        ];
        for (j, mode) in modes.into_iter().enumerate() {
            let alpha = choose_alpha(t, h, eps, mode).unwrap();
            let (d, b) = reconstruct_phases(wrap_2pi(tb + td), wrap_2pi(tb + alpha * td), alpha).unwrap();
            let err = circular_distance(d, td).max(circular_distance(b, tb));
            worst[j] = worst[j].max(err);
        }
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    outcome(
        max <= 1e-12,
        format!(
            "max error integer {:.1e}, capped integer {:.1e}, formula {:.1e} over 10^4 plantings",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn c4_dynamical_phase() -> Outcome {
    let f = HamiltonianFamily::from_json(
        r#"{"n_qubits":2,"k_max":2,"terms":[
            {"pauli":"ZI","coeff":{"const":0.7}},
            {"pauli":"ZZ","coeff":{"const":0.3}},
            {"pauli":"XX","coeff":{"const":0.2}}]}"#,
    )
    .unwrap();
    let s = diagonalize(&f, 0.0).unwrap();
    let e0 = s.eigenvalues[0];
    let t = 7.3;
    let mut worst = 0.0f64;
    for alpha in [1.1, 1.5, 2.0] {
        let mut v = s.ground_state();
        let sched = AdiabaticSchedule::new(alpha * t, 0.0)
            .with_steps(1)
            .with_integrator(Integrator::SplitStatic);
        propagate_vector(&mut v, &f, &sched).unwrap();
        let acquired = wrap_2pi(-s.ground_state().dotc(&v).arg());
        worst = worst.max(circular_distance(acquired, wrap_2pi(alpha * e0 * t)));
    }
    outcome(
        worst <= 1e-6,
        format!("max deviation {worst:.2e} for alpha in {{1.1, 1.5, 2}}"),
    )
}

fn c5_murta() -> Outcome {
    let f = equatorial_loop();
    let psi = prepare_ground_state(&f, None, 0.0).unwrap();
    let cfg = BpeConfig::new(0.05, 0.05);
    let m = murta_bpe(&f, &psi, &cfg, 5).unwrap().theta_hat;
    let b = run_bpe(&f, &psi, &cfg, 5).unwrap().theta_b_hat;
    let dm = circular_distance(m, 0.0);
    let db = circular_distance(b, PI);
    outcome(
        dm <= 2.0 * cfg.epsilon_b && db <= cfg.epsilon_b,
        format!("baseline {m:.4} (distance to 0: {dm:.2e}), two-speed {b:.4} (distance to pi: {db:.2e})"),
    )
}

fn c6_bqp_dichotomy() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut lines = Vec::new();
    for m in [2, 4] {
        for yes in [true, false] {
            let mut inst = build_bqp_instance(&toy_bqp_circuit(yes), None, m).unwrap();
            let cert = inst.certify().unwrap().clone();
            let theta = cert.oracle_theta_b;
            let in_range = if yes {
                theta > 0.0 && theta <= FRAC_PI_2
            } else {
                (3.0 * FRAC_PI_2..TAU).contains(&theta)
            };
            let mut cfg = BpeConfig::new(cert.delta / 2.0, 0.1);
            cfg.integrator = Integrator::SplitStatic;
            let psi = prepare_ground_state(&inst.family, Some(&inst.guiding_state().unwrap()), 0.1).unwrap();
            let est = run_bpe(&inst.family, &psi, &cfg, 60 + m as u64).unwrap().theta_b_hat;
            let bit = decide_interval(est, cert.a, cert.b, cert.delta, cfg.epsilon_b).unwrap();
            let good = in_range && bit == u8::from(yes);
            ok &= good;
            lines.push(format!(
                "M={m} {}: theta {theta:.4}, estimate {est:.4}, bit {bit}",
                if yes { "YES" } else { "NO" }
            ));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        ok && within(elapsed, 300.0),
        format!("{}; {:.1} s", lines.join("; "), elapsed.as_secs_f64()),
    )
}

fn c7_perturbation() -> Outcome {
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for yes in [true, false] {
        let circuit = toy_bqp_circuit(yes);
        let base_inst = build_bqp_instance(&circuit, None, 2).unwrap();
        let base = diagonalize(&base_inst.base, 0.0).unwrap();
        let gauge = Gauge::Reference(base.ground_state());
        let gap = base_inst.hist_gap;
        let insts: Vec<_> = [8.0, 16.0, 32.0]
            .iter()
            .map(|k| build_bqp_instance(&circuit, Some(gap / k), 2).unwrap())
            .collect();
        for lambda in [0.0, 0.2, 0.4, 0.6, 0.8] {
            let scaled: Vec<f64> = insts
                .iter()
                .map(|inst| {
                    let exact = berry_connection_in_gauge(&inst.family, lambda, 1e-4, &gauge).unwrap();
                    let pert = berry_connection_perturbative(&base, &inst.v, inst.r, lambda)
                        .unwrap()
                        .value;
                    (exact - pert).abs() / (inst.r * inst.r)
                })
                .collect();
            for w in scaled.windows(2) {
                let ratio = w[0] / w[1];
                worst = worst.min(ratio);
                ok &= ratio >= 1.8;
            }
        }
    }
    outcome(
        ok,
        format!("smallest reduction per halving {worst:.3} (YES and NO, 5 lambdas)"),
    )
}

fn corpus() -> Vec<(GateCircuit, Option<DVector<C64>>)> {
    let basis = |bit: usize| {
        let mut w = DVector::zeros(2);
        w[bit] = C64::new(1.0, 0.0);
        w
    };
    let mut out = Vec::new();
    for m in 0..=4 {
        for yes in [true, false] {
            out.push((toy_bqp_circuit(yes).with_idle(m), None));
        }
    }
    for m in 0..=2 {
        for yes in [true, false] {
            for bit in 0..2 {
                out.push((toy_duqma_circuit(yes).with_idle(m), Some(basis(bit))));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..4 {
        let gates = (0..3)
            .map(|_| match rng.gen_range(0..6) {
                0 => Gate::named("H", &[rng.gen_range(0..2)]),
                1 => Gate::named("T", &[rng.gen_range(0..2)]),
                2 => Gate::named("S", &[rng.gen_range(0..2)]),
                3 => Gate::named("CNOT", &[0, 1]),
                4 => Gate::named("CZ", &[0, 1]),
                _ => Gate::named("SWAP", &[0, 1]),
            })
            .collect::<Result<Vec<_>, _>>()
            .unwrap();
        out.push((GateCircuit::new(2, gates, 1).unwrap(), None));
    }
    out
}

fn c8_history_facts() -> Outcome {
    let mut worst_res = 0.0f64;
    let mut worst_margin = f64::INFINITY;
    let list = corpus();
    for (circuit, witness) in &list {
        let h = compile_history(circuit).unwrap();
        let psi = history_state(circuit, witness.as_ref()).unwrap();
        worst_res = worst_res.max(h.apply(0.0, &psi).norm());
        let s = diagonalize(&h, 0.0).unwrap();
        let e0 = s.eigenvalues[0];
        let gap = s.eigenvalues.iter().find(|&&e| e - e0 > 1e-9).map(|&e| e - e0).unwrap();
        let l = circuit.clock_len() as f64;
        worst_margin = worst_margin.min(gap / (PI * PI / (64.0 * l.powi(3))));
    }
    outcome(
        worst_res <= 1e-10 && worst_margin >= 1.0,
        format!(
            "{} circuits: max |H psi_hist| {worst_res:.1e}, min gap / bound {worst_margin:.2}",
            list.len()
        ),
    )
}

fn c9_threshold() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let basis = |bit: usize| {
        let mut w = DVector::zeros(2);
        w[bit] = C64::new(1.0, 0.0);
        w
    };
    for yes in [true, false] {
        let bit = usize::from(yes);
        let circuit = toy_duqma_circuit(yes);
        let inst = build_duqma_instance(&circuit, &basis(bit), None, 0.05, 1).unwrap();
        let e_th = inst.e_th.unwrap();
        let l = circuit.clone().with_idle(1).clock_len();
        let formula = 0.05 / (2.0 * (l as f64 + 1.0));
        let s = diagonalize(&inst.family, 0.0).unwrap();
        let (e0, e1) = (s.eigenvalues[0], s.eigenvalues[1]);
        let sandwich = e0 < e_th && e_th < e1 && (e_th - formula).abs() < 1e-15;
        let meter = EnergyMeter::new(&inst, e_th, inst.min_gap / 16.0, 27).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rate = |w: &DVector<C64>, rng: &mut ChaCha8Rng| {
            let weights = meter.weights(w).unwrap();
            (0..500).filter(|_| meter.measure(&weights, rng).unwrap().pass).count() as f64 / 500.0
        };
        let good = rate(&inst.history_state(None).unwrap(), &mut rng);
        let bad = rate(&inst.history_state(Some(&basis(1 - bit))).unwrap(), &mut rng);
        ok &= sandwich && good >= 0.95 && 1.0 - bad >= 0.95;
        lines.push(format!(
            "{}: E0 {e0:.2e} < E_th {e_th:.2e} < E1 {e1:.2e}, true passes {good:.3}, orthogonal fails {:.3}",
            if yes { "YES" } else { "NO" },
            1.0 - bad
        ));
    }
    outcome(ok, lines.join("; "))
}

fn berrylab(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_berrylab"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn same_files(a: &Path, b: &Path) -> bool {
    matches!((std::fs::read(a), std::fs::read(b)), (Ok(x), Ok(y)) if x == y)
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let d = |name: &str| data.join(name).to_string_lossy().into_owned();
    let inst = p("duqma.json");
    let mut ok = berrylab(&[
        "genhard",
        "--circuit",
        &d("duqma_yes.json"),
        "--kind",
        "duqma",
        "--m",
        "1",
        "--witness",
        "1",
        "--out",
        &inst,
    ]);
    let runs: Vec<(&str, Vec<String>, Vec<&str>)> = vec![
        (
            "bpe",
            vec![
                "bpe".into(),
                "--instance".into(),
                d("equatorial.json"),
                "--epsilon-b".into(),
                "0.05".into(),
                "--eta".into(),
                "0.05".into(),
                "--seed".into(),
                "17".into(),
                "--runs".into(),
                "5".into(),
            ],
            vec!["json"],
        ),
        (
            "murta",
            vec![
                "murta".into(),
                "--instance".into(),
                d("equatorial.json"),
                "--epsilon-b".into(),
                "0.05".into(),
                "--eta".into(),
                "0.05".into(),
                "--seed".into(),
                "17".into(),
                "--runs".into(),
                "5".into(),
            ],
            vec!["json"],
        ),
        (
            "verify",
            vec![
                "verify".into(),
                "--instance".into(),
                inst.clone(),
                "--witness".into(),
                "true".into(),
                "--runs".into(),
                "20".into(),
                "--seed".into(),
                "17".into(),
            ],
            vec!["json", "csv"],
        ),
        (
            "verify-orthogonal",
            vec![
                "verify".into(),
                "--instance".into(),
                inst.clone(),
                "--witness".into(),
                "0".into(),
                "--runs".into(),
                "50".into(),
                "--seed".into(),
                "17".into(),
            ],
            vec!["json", "csv"],
        ),
    ];
    let mut checked = Vec::new();
    for (name, mut args, exts) in runs {
        let first = p(&format!("{name}.json"));
        let second = p(&format!("{name}-rerun.json"));
        args.extend(["--out".into(), first.clone()]);
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        ok &= berrylab(&argv);
        ok &= berrylab(&[
            "rerun",
            "--manifest",
            &format!("{first}.manifest.json"),
            "--out",
            &second,
        ]);
        for ext in exts {
            let a = Path::new(&first).with_extension(ext);
            let b = Path::new(&second).with_extension(ext);
            let same = same_files(&a, &b);
            ok &= same;
            checked.push(format!("{name}.{ext} {}", if same { "identical" } else { "DIFFERS" }));
        }
    }
    outcome(ok, checked.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Check; 10] = [
        (1, "oracle correctness", c1_oracle),
        (2, "algorithm vs oracle", c2_bpe_vs_oracle),
        (3, "phase reconstruction", c3_reconstruction),
        (4, "dynamical-phase law", c4_dynamical_phase),
        (5, "forward/backward baseline limitation", c5_murta),
        (6, "BQP-hardness dichotomy", c6_bqp_dichotomy),
        (7, "perturbative connection", c7_perturbation),
        (8, "history-state spectra", c8_history_facts),
        (9, "dUQMA thresholding", c9_threshold),
        (10, "manifest determinism", c10_determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let r = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!r.pass);
        println!(
            "criterion {id:>2} {}: {name} ({:.1} s): {}",
            if r.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            r.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
