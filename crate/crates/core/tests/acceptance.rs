//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::{Command, ExitCode};
use std::time::Instant;

use qpigeon::lhv::{self, ScanConfig, SCAN_TOLERANCE};
use qpigeon::locc::{self, LoccRun, Site};
use qpigeon::protocols::{
    self, JointOutcome, Mode, Pair, ParityLabel, ParityLayout, ParityScheme, YSign,
};
use qpigeon::qcore::{
    apply_projector, inner_product, make_basis_state, parity_projectors, y_projectors, NamedState,
};

const EXACT_TOL: f64 = 1e-12;
const CHANNEL_TOL: f64 = 1e-10;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Check {
    let (y_plus, _) = y_projectors();
    let (p, _) = apply_projector(
        &NamedState::PhiPlus.state(),
        &y_plus.tensor(&y_plus),
        &[0, 1],
    )
    .map_err(|e| e.to_string())?;
    verdict(p.abs() <= EXACT_TOL, format!("|(Y+ ⊗ Y+)|Φ+⟩|² = {p:e}"))
}

fn criterion_2() -> Check {
    let plus = NamedState::Plus.state();
    let plus_i = NamedState::PlusI.state();
    let (same, _) = parity_projectors();
    let (p, post) =
        apply_projector(&plus.tensor(&plus), &same, &[0, 1]).map_err(|e| e.to_string())?;
    let post = post.ok_or("Π^same|++⟩ vanished")?;
    let a = inner_product(&plus_i.tensor(&plus_i), &post)
        .map_err(|e| e.to_string())?
        .norm()
        * p.sqrt();
    verdict(a <= EXACT_TOL, format!("|⟨+i,+i|Π^same|++⟩| = {a:e}"))
}

fn criterion_3() -> Check {
    let f = protocols::oracle_superposition_fidelity().map_err(|e| e.to_string())?;
    verdict(
        (f - 1.0).abs() <= EXACT_TOL,
        format!("oracle circuit fidelity = {f}"),
    )
}

fn criterion_4() -> Check {
    let layout = ParityLayout::default();
    let mut parts = Vec::new();
    let mut ok = true;
    for scheme in [ParityScheme::Distillation, ParityScheme::Teleported] {
        let d = protocols::equivalence_suite(scheme, &layout, 100, 4).map_err(|e| e.to_string())?;
        ok &= d < CHANNEL_TOL;
        parts.push(format!("{scheme} max deviation {d:e}"));
    }
    verdict(ok, format!("100 seeded states: {}", parts.join(", ")))
}

fn criterion_5() -> Check {
    let mut worst_cond: f64 = 0.0;
    let mut worst_success: f64 = 0.0;
    for scheme in ParityScheme::ALL {
        for pair in Pair::ALL {
            let stats = protocols::pigeonhole_experiment(scheme, pair, Mode::Exact)
                .map_err(|e| e.to_string())?;
            let diff = stats
                .conditional
                .as_ref()
                .and_then(|c| c.get(&ParityLabel::Diff).copied())
                .ok_or_else(|| format!("{scheme}/{pair}: conditional undefined"))?;
            worst_cond = worst_cond.max((diff - 1.0).abs());
            worst_success = worst_success.max((stats.success_probability - 0.125).abs());
        }
    }
    verdict(
        worst_cond <= EXACT_TOL && worst_success <= EXACT_TOL,
        format!(
            "4 schemes × 3 pairs: max |P(diff|all+) − 1| = {worst_cond:e}, max |P(all+) − 1/8| = {worst_success:e}"
        ),
    )
}

fn forbidden(k: &JointOutcome, pair: Pair) -> bool {
    let (i, j) = pair.qubits();
    k.parity == ParityLabel::Same && k.y[i] == YSign::Plus && k.y[j] == YSign::Plus
}

fn criterion_6() -> Check {
    const SHOTS: u64 = 100_000;
    let mut parts = Vec::new();
    let mut ok = true;
    for (scheme, pair) in [
        (ParityScheme::Direct, Pair::AB),
        (ParityScheme::Oracle, Pair::BC),
        (ParityScheme::Distillation, Pair::AB),
        (ParityScheme::Teleported, Pair::AC),
    ] {
        let exact = protocols::pigeonhole_experiment(scheme, pair, Mode::Exact)
            .map_err(|e| e.to_string())?;
        let sampled = protocols::pigeonhole_experiment(
            scheme,
            pair,
            Mode::Sampled {
                shots: SHOTS,
                seed: 7,
            },
        )
        .map_err(|e| e.to_string())?;
        let counts = sampled.counts.ok_or("sampled run without counts")?;
        let mut forbidden_count = 0;
        let mut worst_sigma: f64 = 0.0;
        for k in JointOutcome::all() {
            let n = counts.get(&k).copied().unwrap_or(0);
            if forbidden(&k, pair) {
                forbidden_count += n;
                continue;
            }
            let p = exact.joint.get(&k);
            let mean = SHOTS as f64 * p;
            let sd = (SHOTS as f64 * p * (1.0 - p)).sqrt();
            if sd == 0.0 {
                ok &= n as f64 == mean;
            } else {
                worst_sigma = worst_sigma.max((n as f64 - mean).abs() / sd);
            }
        }
        ok &= forbidden_count == 0 && worst_sigma <= 5.0;
        parts.push(format!(
            "{scheme}/{pair} forbidden {forbidden_count}, worst {worst_sigma:.2}σ"
        ));
    }
    verdict(ok, format!("10^5 shots, seed 7: {}", parts.join("; ")))
}

fn criterion_7() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for scheme in [ParityScheme::Distillation, ParityScheme::Teleported] {
        let pc = protocols::build_parity_circuit(scheme)
            .map_err(|e| e.to_string())?
            .ok_or("no circuit")?;
        let annotated = locc::assign_sites(&pc.circuit, &locc::ownership_for(&pc), pc.setup_len)
            .map_err(|e| e.to_string())?;
        let n = pc.circuit.num_qubits() - 2;
        let plus = NamedState::Plus.state();
        let initial = plus
            .tensor(&plus)
            .tensor(&make_basis_state(n, &"0".repeat(n)).map_err(|e| e.to_string())?);
        let LoccRun::Exact(branches) =
            locc::execute_locc(&annotated, &initial, Mode::Exact).map_err(|e| e.to_string())?
        else {
            return Err("expected exact run".into());
        };
        let cross: usize = branches
            .iter()
            .map(|b| locc::verify_locality(&b.trace).cross_site_quantum_ops)
            .sum();
        let bits: Vec<usize> = branches
            .iter()
            .map(|b| locc::verify_locality(&b.trace).classical_bits_exchanged)
            .collect();
        ok &= cross == 0;
        match scheme {
            ParityScheme::Distillation => {
                ok &= bits.iter().all(|&b| b == 2);
                parts.push(format!(
                    "distillation cross-site ops {cross}, bits exchanged {}",
                    bits[0]
                ));
            }
            _ => {
                let causal = branches
                    .iter()
                    .map(|b| locc::causal_order_check(&b.trace, Site::Bob, Site::Alice))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| e.to_string())?;
                let causal_ok = causal.iter().all(|&c| c);
                ok &= causal_ok;
                parts.push(format!(
                    "teleported cross-site ops {cross}, causal order {} over {} branches",
                    if causal_ok { "holds" } else { "violated" },
                    branches.len()
                ));
            }
        }
    }
    verdict(ok, parts.join("; "))
}

fn criterion_8() -> Check {
    let mut failing = 0;
    for bits in 0..8u8 {
        let z = (bits >> 2 & 1, bits >> 1 & 1, bits & 1);
        if !lhv::pigeonhole_contradiction_check(z) {
            failing += 1;
        }
    }
    verdict(
        failing == 8,
        format!("{failing}/8 assignments have a same-valued pair"),
    )
}

fn criterion_9() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for bits in [0, 1] {
        let report = lhv::scan_local_models(&ScanConfig::new(bits)).map_err(|e| e.to_string())?;
        ok &= report.models_consistent == 0;
        parts.push(format!(
            "λ-bits {bits}: {}/{} consistent",
            report.models_consistent, report.models_tested
        ));
    }
    let reference = lhv::quantum_reference(Pair::AB).map_err(|e| e.to_string())?;
    let conspiracy = lhv::conspiracy_distribution(Pair::AB);
    let forbidden = conspiracy.same_and_pair_plus(Pair::AB);
    let witness =
        lhv::joint_witness(&conspiracy, &reference, SCAN_TOLERANCE).ok_or("conspiracy matches")?;
    ok &= forbidden.abs() <= SCAN_TOLERANCE && witness.deviation() >= 1.0 / 32.0;
    parts.push(format!(
        "conspiracy P(same,++) = {forbidden}, {} off by {}",
        witness.statistic,
        witness.deviation()
    ));
    verdict(ok, parts.join("; "))
}

fn criterion_10() -> Check {
    let bin = env!("CARGO_BIN_EXE_qpigeon");
    let golden = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/golden/parity_teleported.qc"
    );
    let commands: [&[&str]; 7] = [
        &["amplitudes"],
        &["pigeonhole", "--shots", "20000", "--seed", "7"],
        &["pigeonhole", "--scheme", "teleported", "--pair", "bc"],
        &["parity-check", "--seed", "11"],
        &["lhv-scan"],
        &[
            "locc-trace",
            "--scheme",
            "teleported",
            "--shots",
            "500",
            "--seed",
            "3",
        ],
        &["parse", golden],
    ];
    for args in commands {
        let runs = (0..2)
            .map(|_| {
                Command::new(bin)
                    .args(args)
                    .args(["--format", "json"])
                    .output()
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        if !runs[0].status.success() {
            return Err(format!("{args:?} exited with {}", runs[0].status));
        }
        if runs[0].stdout != runs[1].stdout || runs[0].stdout.is_empty() {
            return Err(format!("{args:?} output differs between runs"));
        }
    }
    Ok(format!(
        "{} seeded JSON commands byte-identical across two runs",
        commands.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("Y-plus projection of Φ+ vanishes", criterion_1),
        (
            "Y-plus overlap of the same-projected |++⟩ vanishes",
            criterion_2,
        ),
        ("two-CNOT oracle output", criterion_3),
        ("parity channel equivalence", criterion_4),
        ("exact pigeonhole statistics", criterion_5),
        ("sampling consistency", criterion_6),
        ("locality audit", criterion_7),
        ("classical pigeonhole", criterion_8),
        ("hidden-variable refutation", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failures = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (word, detail) = match check() {
            Ok(detail) => ("PASS", detail),
            Err(detail) => {
                failures += 1;
                ("FAIL", detail)
            }
        };
        println!(
            "{word} criterion {}: {title}: {detail} [{:.2}s]",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
