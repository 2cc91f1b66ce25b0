//! Command implementations behind the `qpigeon` binary.
//!
//! [`run`] parses arguments and returns the rendered output together with
//! the exit code: [`EXIT_PASS`] when every check passes, [`EXIT_FAIL`] when
//! one fails and [`EXIT_USAGE`] for bad flag combinations. JSON output is
//! key-sorted and byte-identical across runs with the same flags.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::circuits::parse_circuit;
use crate::lhv::{self, ScanConfig, SCAN_TOLERANCE};
use crate::locc::{self, LoccRun, LoccTrace, Site};
use crate::protocols::{
    self, JointOutcome, Mode, OraclePlacement, Pair, ParityLabel, ParityLayout, ParityScheme,
    PigeonholeStats,
};
use crate::qcore::{
    apply_projector, fidelity, inner_product, make_basis_state, parity_projectors, y_projectors,
    NamedState, StateVector, TOLERANCE,
};
use crate::Result;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Threshold of the parity-channel equivalence suite.
pub const EQUIVALENCE_THRESHOLD: f64 = 1e-10;
/// Number of random states in the equivalence suite.
pub const EQUIVALENCE_STATES: usize = 100;
pub const DEFAULT_SUITE_SEED: u64 = 2024;
/// Witnesses listed per scan in `lhv-scan` output.
pub const LISTED_WITNESSES: usize = 16;

#[derive(Parser, Debug)]
#[command(
    name = "qpigeon",
    version,
    about = "Quantum pigeonhole experiment simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true, default_value = "distillation")]
    pub scheme: ParityScheme,
    #[arg(long, global = true, default_value = "ab")]
    pub pair: Pair,
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub exact: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Hidden-variable bits per qubit; both settings when omitted.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub lambda_bits: Option<u8>,
    /// Where the teleported scheme's oracle lives.
    #[arg(long, global = true, value_enum, default_value_t = Placement::Separate)]
    pub placement: Placement,
    #[arg(long, global = true, hide = true)]
    pub drop_conditional_z: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the closed-form amplitude identities
    Amplitudes,
    /// Run the pigeonhole experiment
    Pigeonhole,
    /// Compare every parity scheme with the direct projective measurement
    ParityCheck,
    /// Scan the symmetric disturbance-rule models
    LhvScan,
    /// Audit a parity scheme for locality and print its trace
    LoccTrace,
    /// Parse a circuit file and print its normalized form
    Parse { path: PathBuf },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Placement {
    Separate,
    WithFirst,
}

impl From<Placement> for OraclePlacement {
    fn from(p: Placement) -> Self {
        match p {
            Placement::Separate => OraclePlacement::Separate,
            Placement::WithFirst => OraclePlacement::WithFirst,
        }
    }
}

impl Placement {
    fn name(self) -> &'static str {
        match self {
            Placement::Separate => "separate",
            Placement::WithFirst => "with-first",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    fn report(text: String, pass: bool) -> Self {
        Output {
            code: if pass { EXIT_PASS } else { EXIT_FAIL },
            stdout: text,
            stderr: String::new(),
        }
    }

    fn usage(message: impl std::fmt::Display) -> Self {
        Output {
            code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }

    fn failure(message: impl std::fmt::Display) -> Self {
        Output {
            code: EXIT_FAIL,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            return if e.use_stderr() {
                Output {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Output {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    execute(&cli)
}

pub fn execute(cli: &Cli) -> Output {
    let result = match &cli.command {
        Command::Amplitudes => cmd_amplitudes(cli.format),
        Command::Pigeonhole => match sampling_mode(cli) {
            Ok(mode) => cmd_pigeonhole(cli, mode),
            Err(msg) => return Output::usage(msg),
        },
        Command::ParityCheck => {
            if cli.shots.is_some() {
                return Output::usage("parity-check is exact; --shots does not apply");
            }
            cmd_parity_check(cli)
        }
        Command::LhvScan => cmd_lhv_scan(cli),
        Command::LoccTrace => match sampling_mode(cli) {
            Ok(mode) => cmd_locc_trace(cli, mode),
            Err(msg) => return Output::usage(msg),
        },
        Command::Parse { path } => return cmd_parse(path, cli.format),
    };
    result.unwrap_or_else(Output::failure)
}

fn sampling_mode(cli: &Cli) -> std::result::Result<Mode, String> {
    match (cli.exact, cli.shots, cli.seed) {
        (true, Some(_), _) | (true, _, Some(_)) => {
            Err("--exact cannot be combined with --shots or --seed".into())
        }
        (_, None, None) => Ok(Mode::Exact),
        (false, Some(0), Some(_)) => Err("--shots must be at least 1".into()),
        (false, Some(shots), Some(seed)) => Ok(Mode::Sampled { shots, seed }),
        (false, Some(_), None) => Err("--shots requires --seed".into()),
        (false, None, Some(_)) => Err("--seed requires --shots".into()),
    }
}

/// Rounds away floating noise so exact results print as short decimals.
fn tidy(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn render(format: Format, value: &Value, table: impl FnOnce() -> String) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
            s.push('\n');
            s
        }
        Format::Table => table(),
    }
}

fn pass_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// One closed-form identity with its engine value.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub value: f64,
    pub expected: f64,
}

impl IdentityCheck {
    pub fn pass(&self) -> bool {
        (self.value - self.expected).abs() <= TOLERANCE
    }
}

/// `|(Π_Y+ ⊗ Π_Y+)|Φ⁺⟩|²`, `|⟨+i,+i|Π^same|++⟩|` and the fidelity of the
/// oracle circuit output on `|++0⟩` with `(|Φ⁺⟩|0⟩ + |Ψ⁺⟩|1⟩)/√2`.
pub fn amplitude_identities() -> Result<Vec<IdentityCheck>> {
    let (y_plus, _) = y_projectors();
    let yy = y_plus.tensor(&y_plus);
    let (p_yy, _) = apply_projector(&NamedState::PhiPlus.state(), &yy, &[0, 1])?;

    let plus_i = NamedState::PlusI.state();
    let plus = NamedState::Plus.state();
    let (same, _) = parity_projectors();
    let (p_same, post) = apply_projector(&plus.tensor(&plus), &same, &[0, 1])?;
    let overlap = match post {
        Some(post) => inner_product(&plus_i.tensor(&plus_i), &post)?.norm() * p_same.sqrt(),
        None => 0.0,
    };

    let zero = make_basis_state(1, "0")?;
    let one = make_basis_state(1, "1")?;
    let target = StateVector::normalized(
        3,
        NamedState::PhiPlus
            .state()
            .tensor(&zero)
            .amplitudes()
            .iter()
            .zip(NamedState::PsiPlus.state().tensor(&one).amplitudes())
            .map(|(x, y)| x + y)
            .collect(),
    )?;
    let f = fidelity(&protocols::oracle_premeasurement_state()?, &target)?;

    Ok(vec![
        IdentityCheck {
            name: "yy_plus_on_phi_plus",
            value: p_yy,
            expected: 0.0,
        },
        IdentityCheck {
            name: "plus_i_plus_i_same_plus_plus",
            value: overlap,
            expected: 0.0,
        },
        IdentityCheck {
            name: "oracle_superposition_fidelity",
            value: f,
            expected: 1.0,
        },
    ])
}

fn cmd_amplitudes(format: Format) -> Result<Output> {
    let checks = amplitude_identities()?;
    let pass = checks.iter().all(IdentityCheck::pass);
    let value = json!({
        "tolerance": TOLERANCE,
        "checks": checks.iter().map(|c| json!({
            "name": c.name,
            "value": c.value,
            "expected": c.expected,
            "pass": c.pass(),
        })).collect::<Vec<_>>(),
        "pass": pass,
    });
    let text = render(format, &value, || {
        let mut s = String::new();
        for c in &checks {
            let _ = writeln!(
                s,
                "{:<32} {:<24} expected {}  {}",
                c.name,
                c.value,
                c.expected,
                pass_word(c.pass())
            );
        }
        s
    });
    Ok(Output::report(text, pass))
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Exact => "exact",
        Mode::Sampled { .. } => "sampled",
    }
}

fn conditional_json(c: &Option<BTreeMap<ParityLabel, f64>>) -> Value {
    match c {
        Some(map) => Value::Object(
            map.iter()
                .map(|(l, p)| (l.name().to_string(), json!(tidy(*p))))
                .collect(),
        ),
        None => Value::Null,
    }
}

/// Renders pigeonhole statistics in the fixed JSON schema.
pub fn pigeonhole_json(stats: &PigeonholeStats) -> Value {
    let joint = JointOutcome::all()
        .map(|k| {
            let mut entry = json!({
                "parity": k.parity.name(),
                "ya": k.y[0].symbol(),
                "yb": k.y[1].symbol(),
                "yc": k.y[2].symbol(),
            });
            match &stats.counts {
                Some(counts) => entry["count"] = json!(counts.get(&k).copied().unwrap_or(0)),
                None => entry["p"] = json!(tidy(stats.joint.get(&k))),
            }
            entry
        })
        .collect::<Vec<_>>();
    json!({
        "scheme": stats.scheme.name(),
        "pair": stats.pair.name(),
        "mode": mode_name(stats.mode),
        "joint": joint,
        "conditional": conditional_json(&stats.conditional),
        "success_probability": tidy(stats.success_probability),
        "discarded": stats.discarded,
    })
}

fn forbidden(k: &JointOutcome, pair: Pair) -> bool {
    let (i, j) = pair.qubits();
    k.parity == ParityLabel::Same
        && k.y[i] == protocols::YSign::Plus
        && k.y[j] == protocols::YSign::Plus
}

/// Forbidden-event weight (probability or count) and whether the run passes.
fn pigeonhole_verdict(stats: &PigeonholeStats) -> (f64, bool) {
    match &stats.counts {
        Some(counts) => {
            let n: u64 = counts
                .iter()
                .filter(|(k, _)| forbidden(k, stats.pair))
                .map(|(_, n)| n)
                .sum();
            (n as f64, n == 0)
        }
        None => {
            let p = stats.joint.same_and_pair_plus(stats.pair);
            let diff = stats
                .conditional
                .as_ref()
                .and_then(|c| c.get(&ParityLabel::Diff))
                .copied()
                .unwrap_or(0.0);
            (
                tidy(p),
                p.abs() <= TOLERANCE && (diff - 1.0).abs() <= TOLERANCE,
            )
        }
    }
}

fn cmd_pigeonhole(cli: &Cli, mode: Mode) -> Result<Output> {
    let stats =
        protocols::pigeonhole_experiment_with(cli.scheme, cli.pair, cli.placement.into(), mode)?;
    let (forbidden_weight, pass) = pigeonhole_verdict(&stats);
    let value = pigeonhole_json(&stats);
    let text = render(cli.format, &value, || {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "scheme {}  pair {}  mode {}",
            stats.scheme,
            stats.pair,
            mode_name(stats.mode)
        );
        let header = if stats.counts.is_some() { "count" } else { "p" };
        let _ = writeln!(s, "{:<6} ya yb yc  {header}", "parity");
        for k in JointOutcome::all() {
            let cell = match &stats.counts {
                Some(c) => c.get(&k).copied().unwrap_or(0).to_string(),
                None => tidy(stats.joint.get(&k)).to_string(),
            };
            let [a, b, c] = k.y.map(|y| y.symbol());
            let _ = writeln!(s, "{:<6} {a}  {b}  {c}   {cell}", k.parity.name());
        }
        match &stats.conditional {
            Some(c) => {
                for (l, p) in c {
                    let _ = writeln!(s, "P({l} | all +) = {}", tidy(*p));
                }
            }
            None => s.push_str("P(parity | all +) undefined\n"),
        }
        let _ = writeln!(
            s,
            "success probability = {}",
            tidy(stats.success_probability)
        );
        if let Some(d) = stats.discarded {
            let _ = writeln!(s, "discarded = {d}");
        }
        let _ = writeln!(
            s,
            "forbidden (same, ++ on {}) = {forbidden_weight}  {}",
            stats.pair,
            pass_word(pass)
        );
        s
    });
    Ok(Output::report(text, pass))
}

fn cmd_parity_check(cli: &Cli) -> Result<Output> {
    let seed = cli.seed.unwrap_or(DEFAULT_SUITE_SEED);
    let layout = ParityLayout {
        placement: cli.placement.into(),
        drop_conditional_z: cli.drop_conditional_z,
        ..ParityLayout::default()
    };
    let mut rows = Vec::new();
    for scheme in ParityScheme::ALL
        .into_iter()
        .filter(|s| *s != ParityScheme::Direct)
    {
        let deviation = protocols::equivalence_suite(scheme, &layout, EQUIVALENCE_STATES, seed)?;
        rows.push((scheme, deviation, deviation < EQUIVALENCE_THRESHOLD));
    }
    let pass = rows.iter().all(|r| r.2);
    let value = json!({
        "states": EQUIVALENCE_STATES,
        "seed": seed,
        "threshold": EQUIVALENCE_THRESHOLD,
        "placement": cli.placement.name(),
        "schemes": rows.iter().map(|(s, d, p)| json!({
            "scheme": s.name(),
            "max_deviation": d,
            "pass": p,
        })).collect::<Vec<_>>(),
        "pass": pass,
    });
    let text = render(cli.format, &value, || {
        let mut s = format!("{EQUIVALENCE_STATES} random states, seed {seed}, threshold {EQUIVALENCE_THRESHOLD:e}\n");
        for (scheme, d, p) in &rows {
            let _ = writeln!(
                s,
                "{:<13} max deviation {:<24e} {}",
                scheme.name(),
                d,
                pass_word(*p)
            );
        }
        s
    });
    Ok(Output::report(text, pass))
}

fn cmd_lhv_scan(cli: &Cli) -> Result<Output> {
    let settings = match cli.lambda_bits {
        Some(b) => vec![b],
        None => vec![0, 1],
    };
    let mut reports = Vec::new();
    for bits in settings {
        let config = ScanConfig {
            pair: cli.pair,
            ..ScanConfig::new(bits)
        };
        reports.push(lhv::scan_local_models(&config)?);
    }

    let reference = lhv::quantum_reference(cli.pair)?;
    let conspiracy = lhv::conspiracy_distribution(cli.pair);
    let forbidden = conspiracy.same_and_pair_plus(cli.pair);
    let witness = lhv::joint_witness(&conspiracy, &reference, SCAN_TOLERANCE);
    let min_gap = 1.0 / 32.0;
    let conspiracy_pass = forbidden.abs() <= SCAN_TOLERANCE
        && witness.as_ref().is_some_and(|w| w.deviation() >= min_gap);
    let pass = conspiracy_pass && reports.iter().all(|r| r.models_consistent == 0);

    let value = json!({
        "pair": cli.pair.name(),
        "scans": reports.iter().map(|r| r.to_json(Some(LISTED_WITNESSES))).collect::<Vec<_>>(),
        "conspiracy": {
            "same_and_pair_plus": tidy(forbidden),
            "witness": witness.as_ref().map(|w| w.to_json()),
            "min_deviation": min_gap,
            "pass": conspiracy_pass,
        },
        "pass": pass,
    });
    let text = render(cli.format, &value, || {
        let mut s = String::new();
        for r in &reports {
            let _ = writeln!(
                s,
                "lambda_bits {}  pair {}  tested {}  consistent {}  {}",
                r.lambda_bits,
                r.pair,
                r.models_tested,
                r.models_consistent,
                pass_word(r.models_consistent == 0)
            );
            for (stat, n) in r.witness_counts() {
                let _ = writeln!(s, "  first witness {stat}: {n}");
            }
        }
        let _ = writeln!(
            s,
            "conspiracy P(same, ++ on {}) = {}",
            cli.pair,
            tidy(forbidden)
        );
        if let Some(w) = &witness {
            let model = w
                .model_value
                .map_or("undefined".to_string(), |m| tidy(m).to_string());
            let _ = writeln!(
                s,
                "conspiracy witness {}: model {} quantum {}",
                w.statistic,
                model,
                tidy(w.quantum_value)
            );
        }
        let _ = writeln!(s, "conspiracy {}", pass_word(conspiracy_pass));
        s
    });
    Ok(Output::report(text, pass))
}

fn locality_json(report: &locc::LocalityReport) -> Value {
    json!({
        "cross_site_quantum_ops": report.cross_site_quantum_ops,
        "classical_bits_exchanged": report.classical_bits_exchanged,
        "pass": report.pass,
    })
}

fn trace_lines(trace: &LoccTrace) -> Vec<String> {
    trace.events().iter().map(ToString::to_string).collect()
}

/// `Some(ok)` when the causal check applies to the trace.
fn causal(trace: &LoccTrace) -> Result<Option<bool>> {
    match locc::causal_order_check(trace, Site::Bob, Site::Alice) {
        Ok(ok) => Ok(Some(ok)),
        Err(crate::Error::NotApplicable(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn cmd_locc_trace(cli: &Cli, mode: Mode) -> Result<Output> {
    let layout = ParityLayout {
        placement: cli.placement.into(),
        ..ParityLayout::default()
    };
    let Some(pc) = protocols::build_parity_circuit_with(cli.scheme, &layout)? else {
        return Ok(Output::usage("the direct scheme has no circuit to trace"));
    };
    let annotated = match locc::assign_sites(&pc.circuit, &locc::ownership_for(&pc), pc.setup_len) {
        Ok(a) => a,
        Err(e) => return Ok(Output::failure(format!("{} scheme: {e}", cli.scheme))),
    };
    let n = pc.circuit.num_qubits() - pc.data.len();
    let plus = NamedState::Plus.state();
    let initial = plus
        .tensor(&plus)
        .tensor(&make_basis_state(n, &"0".repeat(n))?);

    let (shown, reports, orders, extra) = match locc::execute_locc(&annotated, &initial, mode)? {
        LoccRun::Exact(branches) => {
            let reports = branches
                .iter()
                .map(|b| locc::verify_locality(&b.trace))
                .collect::<Vec<_>>();
            let orders = branches
                .iter()
                .map(|b| causal(&b.trace))
                .collect::<Result<Vec<_>>>()?;
            let extra = json!({ "branches": branches.len() });
            (branches[0].trace.clone(), reports, orders, extra)
        }
        LoccRun::Sampled { histogram, trace } => {
            let counts: BTreeMap<String, u64> = histogram
                .counts
                .iter()
                .map(|(r, n)| (r.to_string(), *n))
                .collect();
            let extra = json!({ "shots": histogram.shots, "counts": counts });
            (
                trace.clone(),
                vec![locc::verify_locality(&trace)],
                vec![causal(&trace)?],
                extra,
            )
        }
    };

    let locality = reports
        .iter()
        .copied()
        .max_by_key(|r| (r.cross_site_quantum_ops, r.classical_bits_exchanged))
        .expect("at least one branch");
    let causal_order = if orders.iter().all(Option::is_none) {
        None
    } else {
        Some(orders.iter().all(|o| o.unwrap_or(false)))
    };
    let pass = reports.iter().all(|r| r.pass) && causal_order.unwrap_or(true);

    let mut value = json!({
        "scheme": cli.scheme.name(),
        "placement": cli.placement.name(),
        "mode": mode_name(mode),
        "locality": locality_json(&locality),
        "causal_order": causal_order,
        "setup_boundary": shown.setup_boundary(),
        "trace": trace_lines(&shown),
        "pass": pass,
    });
    if let (Value::Object(target), Value::Object(more)) = (&mut value, extra) {
        target.extend(more);
    }
    let text = render(cli.format, &value, || {
        let mut s = format!("{shown}");
        if !s.ends_with('\n') {
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "cross_site_quantum_ops {}  classical_bits_exchanged {}  {}",
            locality.cross_site_quantum_ops,
            locality.classical_bits_exchanged,
            pass_word(locality.pass)
        );
        let order = match causal_order {
            Some(ok) => pass_word(ok),
            None => "not applicable",
        };
        let _ = writeln!(s, "causal order (bob before alice) {order}");
        s
    });
    Ok(Output::report(text, pass))
}

fn cmd_parse(path: &PathBuf, format: Format) -> Output {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Output::failure(format!("{}: {e}", path.display())),
    };
    match parse_circuit(&text) {
        Ok(circuit) => {
            let normalized = circuit.to_string();
            let value = json!({
                "qubits": circuit.num_qubits(),
                "instructions": circuit.len(),
                "classical_bits": circuit.classical_bits().iter().map(ToString::to_string).collect::<Vec<_>>(),
                "normalized": normalized,
            });
            Output::report(render(format, &value, || normalized.clone()), true)
        }
        Err(e) => Output::failure(format!("{}: {e}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp(args: &[&str]) -> Output {
        run(std::iter::once("qpigeon").chain(args.iter().copied()))
    }

    #[test]
    fn amplitudes_pass() {
        let out = qp(&["amplitudes"]);
        assert_eq!(out.code, EXIT_PASS, "{}", out.stdout);
        assert_eq!(out.stdout.matches("PASS").count(), 3);
    }

    #[test]
    fn identities_match_closed_forms() {
        let checks = amplitude_identities().unwrap();
        assert!(checks[0].value.abs() < 1e-12);
        assert!(checks[1].value.abs() < 1e-12);
        assert!((checks[2].value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn usage_errors() {
        for args in [
            &["pigeonhole", "--exact", "--shots", "10", "--seed", "1"][..],
            &["pigeonhole", "--shots", "10"],
            &["pigeonhole", "--seed", "3"],
            &["pigeonhole", "--shots", "0", "--seed", "3"],
            &["pigeonhole", "--scheme", "magic"],
            &["lhv-scan", "--lambda-bits", "2"],
            &["parity-check", "--shots", "5"],
            &["locc-trace", "--scheme", "direct"],
            &["bogus"],
        ] {
            assert_eq!(qp(args).code, EXIT_USAGE, "{args:?}");
        }
    }

    #[test]
    fn help_is_not_an_error() {
        let out = qp(&["--help"]);
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("pigeonhole"));
        assert!(!out.stdout.contains("drop-conditional-z"));
    }

    #[test]
    fn pigeonhole_exact_json_schema() {
        let out = qp(&["pigeonhole", "--format", "json"]);
        assert_eq!(out.code, EXIT_PASS);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(
            keys,
            [
                "conditional",
                "discarded",
                "joint",
                "mode",
                "pair",
                "scheme",
                "success_probability"
            ]
        );
        assert_eq!(v["conditional"], json!({"diff": 1.0, "same": 0.0}));
        assert_eq!(v["success_probability"], json!(0.125));
        assert_eq!(v["discarded"], Value::Null);
        assert_eq!(v["joint"].as_array().unwrap().len(), 16);
        assert_eq!(
            v["joint"][0],
            json!({"parity": "same", "ya": "+", "yb": "+", "yc": "+", "p": 0.0})
        );
    }

    #[test]
    fn pigeonhole_sampled_reports_counts() {
        let out = qp(&[
            "pigeonhole",
            "--shots",
            "2000",
            "--seed",
            "7",
            "--format",
            "json",
            "--pair",
            "bc",
        ]);
        assert_eq!(out.code, EXIT_PASS);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["mode"], "sampled");
        let total: u64 = v["joint"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["count"].as_u64().unwrap())
            .sum();
        assert_eq!(total, 2000);
        let kept: u64 = v["joint"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|e| e["ya"] == "+" && e["yb"] == "+" && e["yc"] == "+")
            .map(|e| e["count"].as_u64().unwrap())
            .sum();
        assert_eq!(v["discarded"].as_u64().unwrap(), 2000 - kept);
    }

    #[test]
    fn pigeonhole_table_mentions_verdict() {
        let out = qp(&["pigeonhole", "--scheme", "direct", "--pair", "ac"]);
        assert_eq!(out.code, EXIT_PASS);
        assert!(out.stdout.contains("P(diff | all +) = 1"));
        assert!(out.stdout.contains("success probability = 0.125"));
    }

    #[test]
    fn parity_check_passes_and_negative_control_fails() {
        assert_eq!(qp(&["parity-check"]).code, EXIT_PASS);
        let bad = qp(&["parity-check", "--drop-conditional-z", "--format", "json"]);
        assert_eq!(bad.code, EXIT_FAIL);
        let v: Value = serde_json::from_str(&bad.stdout).unwrap();
        let teleported = v["schemes"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["scheme"] == "teleported")
            .unwrap();
        assert_eq!(teleported["pass"], false);
    }

    #[test]
    fn lhv_scan_single_setting() {
        let out = qp(&["lhv-scan", "--lambda-bits", "0", "--format", "json"]);
        assert_eq!(out.code, EXIT_PASS);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["scans"].as_array().unwrap().len(), 1);
        assert_eq!(v["scans"][0]["models_tested"], 256);
        assert_eq!(v["scans"][0]["models_consistent"], 0);
        assert_eq!(v["conspiracy"]["witness"]["statistic"], "p(same,+,-,+)");
    }

    #[test]
    fn locc_trace_reports() {
        let out = qp(&["locc-trace", "--format", "json"]);
        assert_eq!(out.code, EXIT_PASS, "{}", out.stderr);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["locality"]["classical_bits_exchanged"], 2);
        assert_eq!(v["locality"]["cross_site_quantum_ops"], 0);
        assert_eq!(v["causal_order"], Value::Null);

        let t = qp(&["locc-trace", "--scheme", "teleported", "--format", "json"]);
        assert_eq!(t.code, EXIT_PASS, "{}", t.stderr);
        let v: Value = serde_json::from_str(&t.stdout).unwrap();
        assert_eq!(v["causal_order"], true);
        assert_eq!(v["branches"], 32);

        let s = qp(&[
            "locc-trace",
            "--scheme",
            "teleported",
            "--shots",
            "50",
            "--seed",
            "1",
        ]);
        assert_eq!(s.code, EXIT_PASS);
        assert!(s.stdout.contains("kind=classical_message"));
    }

    #[test]
    fn locc_trace_rejects_oracle_scheme() {
        let out = qp(&["locc-trace", "--scheme", "oracle"]);
        assert_eq!(out.code, EXIT_FAIL);
        assert!(out.stderr.contains("oracle"));
    }

    #[test]
    fn parse_round_trip_and_diagnostic() {
        let dir = std::env::temp_dir().join(format!("qpigeon-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let good = dir.join("good.qc");
        std::fs::write(
            &good,
            "qubits 2\n# bell\nh 0\ncnot 0 1\nmeasure 0 -> c0\nx 1 if c0\n",
        )
        .unwrap();
        let out = qp(&["parse", good.to_str().unwrap()]);
        assert_eq!(out.code, EXIT_PASS, "{}", out.stderr);
        assert_eq!(parse_circuit(&out.stdout).unwrap().to_string(), out.stdout);

        let bad = dir.join("bad.qc");
        std::fs::write(&bad, "qubits 1\nx 0\nx 0 if c3\n").unwrap();
        let out = qp(&["parse", bad.to_str().unwrap()]);
        assert_eq!(out.code, EXIT_FAIL);
        assert!(out.stderr.contains("line 3"), "{}", out.stderr);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
