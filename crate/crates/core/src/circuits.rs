//! Instruction-level circuits with classical bits, feed-forward, classical
//! XOR and post-selection.
//!
//! A circuit can be executed exactly, by expanding both outcomes of every
//! measurement into a tree of [`Branch`]es, or by per-shot Born sampling.
//! Both modes share the same instruction semantics.
//!
//! # Text format
//!
//! One instruction per line, lowercase, whitespace separated:
//!
//! ```text
//! qubits 3               # header, must come first
//! h 0                    # h | x | y | z
//! rx 1 pi/2              # angle: pi/2, -pi/2 or decimal radians
//! cnot 0 1               # control, target
//! cz 1 2
//! measure 2 -> c0
//! xor c2 = c0 c1
//! z 1 if c0              # any gate may carry a condition
//! postselect c2 = 1
//! ```
//!
//! A classical bit is declared by the single instruction that writes it
//! (`measure` or `xor`) and may only be read afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::qcore::{apply_gate, Gate, StateVector};

/// Branches lighter than this are dropped during enumeration.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// Classical bit `cN`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassicalBit(pub u32);

impl fmt::Display for ClassicalBit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl FromStr for ClassicalBit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.strip_prefix('c')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse().ok())
            .map(ClassicalBit)
            .ok_or_else(|| format!("expected a classical bit like `c0`, found `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    Gate {
        gate: Gate,
        targets: Vec<usize>,
    },
    Measure {
        qubit: usize,
        bit: ClassicalBit,
    },
    /// Gate applied only when `condition` holds 1.
    CondGate {
        gate: Gate,
        targets: Vec<usize>,
        condition: ClassicalBit,
    },
    /// `dest = lhs ⊕ rhs`
    Xor {
        dest: ClassicalBit,
        lhs: ClassicalBit,
        rhs: ClassicalBit,
    },
    /// Keeps only runs in which `bit == value`.
    Postselect {
        bit: ClassicalBit,
        value: u8,
    },
}

impl Instruction {
    pub fn qubits(&self) -> &[usize] {
        match self {
            Instruction::Gate { targets, .. } | Instruction::CondGate { targets, .. } => targets,
            Instruction::Measure { qubit, .. } => std::slice::from_ref(qubit),
            Instruction::Xor { .. } | Instruction::Postselect { .. } => &[],
        }
    }

    pub fn reads(&self) -> Vec<ClassicalBit> {
        match self {
            Instruction::CondGate { condition, .. } => vec![*condition],
            Instruction::Xor { lhs, rhs, .. } => vec![*lhs, *rhs],
            Instruction::Postselect { bit, .. } => vec![*bit],
            Instruction::Gate { .. } | Instruction::Measure { .. } => vec![],
        }
    }

    pub fn writes(&self) -> Option<ClassicalBit> {
        match self {
            Instruction::Measure { bit, .. } => Some(*bit),
            Instruction::Xor { dest, .. } => Some(*dest),
            _ => None,
        }
    }
}

fn format_angle(theta: f64) -> String {
    if theta == FRAC_PI_2 {
        "pi/2".into()
    } else if theta == -FRAC_PI_2 {
        "-pi/2".into()
    } else {
        format!("{theta:?}")
    }
}

fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    match s {
        "pi/2" => Ok(FRAC_PI_2),
        "-pi/2" => Ok(-FRAC_PI_2),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .ok_or_else(|| {
                format!("invalid angle `{s}` (expected pi/2, -pi/2 or decimal radians)")
            }),
    }
}

fn write_gate(f: &mut fmt::Formatter<'_>, gate: Gate, targets: &[usize]) -> fmt::Result {
    write!(f, "{}", gate.name())?;
    for t in targets {
        write!(f, " {t}")?;
    }
    if let Gate::Rx(theta) = gate {
        write!(f, " {}", format_angle(theta))?;
    }
    Ok(())
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Gate { gate, targets } => write_gate(f, *gate, targets),
            Instruction::CondGate {
                gate,
                targets,
                condition,
            } => {
                write_gate(f, *gate, targets)?;
                write!(f, " if {condition}")
            }
            Instruction::Measure { qubit, bit } => write!(f, "measure {qubit} -> {bit}"),
            Instruction::Xor { dest, lhs, rhs } => write!(f, "xor {dest} = {lhs} {rhs}"),
            Instruction::Postselect { bit, value } => write!(f, "postselect {bit} = {value}"),
        }
    }
}

/// Validated circuit. Every instruction pushed is checked against the width
/// and the classical bits written so far, so a `Circuit` value is always
/// well formed.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    classical_bits: Vec<ClassicalBit>,
    body: Vec<Instruction>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 {
            return invalid("a circuit needs at least one qubit");
        }
        Ok(Self {
            num_qubits,
            classical_bits: Vec::new(),
            body: Vec::new(),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Classical bits in the order they are first written.
    pub fn classical_bits(&self) -> &[ClassicalBit] {
        &self.classical_bits
    }

    pub fn body(&self) -> &[Instruction] {
        &self.body
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    /// First bit index not yet used by this circuit.
    pub fn next_free_bit(&self) -> ClassicalBit {
        ClassicalBit(
            self.classical_bits
                .iter()
                .map(|b| b.0 + 1)
                .max()
                .unwrap_or(0),
        )
    }

    fn check(&self, instr: &Instruction) -> std::result::Result<(), String> {
        let qubits = instr.qubits();
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(format!(
                    "undeclared qubit {q} (circuit has {} qubits)",
                    self.num_qubits
                ));
            }
            if qubits[..i].contains(&q) {
                return Err(format!("qubit {q} used twice in one instruction"));
            }
        }
        if let Instruction::Gate { gate, targets } | Instruction::CondGate { gate, targets, .. } =
            instr
        {
            if targets.len() != gate.arity() {
                return Err(format!(
                    "`{}` takes {} qubit(s), got {}",
                    gate.name(),
                    gate.arity(),
                    targets.len()
                ));
            }
            if let Gate::Rx(theta) = gate {
                if !theta.is_finite() {
                    return Err("rx angle must be finite".into());
                }
            }
        }
        if let Instruction::Postselect { value, .. } = instr {
            if *value > 1 {
                return Err(format!("postselect value must be 0 or 1, got {value}"));
            }
        }
        for bit in instr.reads() {
            if !self.classical_bits.contains(&bit) {
                return Err(format!("undeclared classical bit {bit}"));
            }
        }
        if let Some(bit) = instr.writes() {
            if self.classical_bits.contains(&bit) {
                return Err(format!("classical bit {bit} is written more than once"));
            }
        }
        Ok(())
    }

    /// Appends an instruction after validating it.
    pub fn push(&mut self, instr: Instruction) -> Result<&mut Self> {
        self.check(&instr).map_err(|message| {
            Error::InvalidArgument(format!("instruction {}: {message}", self.body.len()))
        })?;
        if let Some(bit) = instr.writes() {
            self.classical_bits.push(bit);
        }
        self.body.push(instr);
        Ok(self)
    }

    pub fn gate(&mut self, gate: Gate, targets: &[usize]) -> Result<&mut Self> {
        self.push(Instruction::Gate {
            gate,
            targets: targets.to_vec(),
        })
    }

    pub fn measure(&mut self, qubit: usize, bit: ClassicalBit) -> Result<&mut Self> {
        self.push(Instruction::Measure { qubit, bit })
    }

    pub fn cond_gate(
        &mut self,
        gate: Gate,
        targets: &[usize],
        condition: ClassicalBit,
    ) -> Result<&mut Self> {
        self.push(Instruction::CondGate {
            gate,
            targets: targets.to_vec(),
            condition,
        })
    }

    pub fn xor(
        &mut self,
        dest: ClassicalBit,
        lhs: ClassicalBit,
        rhs: ClassicalBit,
    ) -> Result<&mut Self> {
        self.push(Instruction::Xor { dest, lhs, rhs })
    }

    pub fn postselect(&mut self, bit: ClassicalBit, value: u8) -> Result<&mut Self> {
        self.push(Instruction::Postselect { bit, value })
    }

    /// Appends every instruction of `other`, which must have the same width.
    pub fn extend(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.num_qubits != self.num_qubits {
            return invalid("cannot append a circuit of a different width");
        }
        for instr in &other.body {
            self.push(instr.clone())?;
        }
        Ok(self)
    }

    /// Applies the leading run of unconditional gates, stopping at the first
    /// measurement or classical instruction.
    pub fn evolve_unitary_prefix(&self, initial: &StateVector) -> Result<StateVector> {
        self.check_initial(initial)?;
        let mut state = initial.clone();
        for instr in &self.body {
            match instr {
                Instruction::Gate { gate, targets } => state = apply_gate(&state, *gate, targets)?,
                _ => break,
            }
        }
        Ok(state)
    }

    fn check_initial(&self, initial: &StateVector) -> Result<()> {
        if initial.num_qubits() != self.num_qubits {
            return invalid(format!(
                "initial state has {} qubits but the circuit has {}",
                initial.num_qubits(),
                self.num_qubits
            ));
        }
        Ok(())
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {}", self.num_qubits)?;
        for instr in &self.body {
            writeln!(f, "{instr}")?;
        }
        Ok(())
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_circuit(s)
    }
}

fn parse_qubit(tok: &str) -> std::result::Result<usize, String> {
    tok.parse()
        .map_err(|_| format!("expected a qubit index, found `{tok}`"))
}

fn parse_instruction(tokens: &[&str]) -> std::result::Result<Instruction, String> {
    let bit = |t: &str| t.parse::<ClassicalBit>();
    match tokens {
        ["measure", q, "->", b] => Ok(Instruction::Measure {
            qubit: parse_qubit(q)?,
            bit: bit(b)?,
        }),
        ["xor", d, "=", l, r] => Ok(Instruction::Xor {
            dest: bit(d)?,
            lhs: bit(l)?,
            rhs: bit(r)?,
        }),
        ["postselect", b, "=", v] => {
            let value = match *v {
                "0" => 0,
                "1" => 1,
                other => return Err(format!("postselect value must be 0 or 1, found `{other}`")),
            };
            Ok(Instruction::Postselect {
                bit: bit(b)?,
                value,
            })
        }
        [.., "if", cond] => match parse_instruction(&tokens[..tokens.len() - 2])? {
            Instruction::Gate { gate, targets } => Ok(Instruction::CondGate {
                gate,
                targets,
                condition: bit(cond)?,
            }),
            _ => Err("only gates can be conditioned with `if`".into()),
        },
        [name, rest @ ..] => {
            let (gate, qubit_tokens) = match *name {
                "h" => (Gate::H, rest),
                "x" => (Gate::X, rest),
                "y" => (Gate::Y, rest),
                "z" => (Gate::Z, rest),
                "cnot" => (Gate::Cnot, rest),
                "cz" => (Gate::Cz, rest),
                "rx" => match rest {
                    [q, angle] => (Gate::Rx(parse_angle(angle)?), std::slice::from_ref(q)),
                    _ => return Err("expected `rx <qubit> <angle>`".into()),
                },
                "qubits" => return Err("duplicate `qubits` header".into()),
                other => return Err(format!("unknown instruction `{other}`")),
            };
            if qubit_tokens.len() != gate.arity() {
                return Err(format!(
                    "`{}` takes {} qubit(s), got {}",
                    gate.name(),
                    gate.arity(),
                    qubit_tokens.len()
                ));
            }
            let targets = qubit_tokens
                .iter()
                .map(|t| parse_qubit(t))
                .collect::<std::result::Result<_, _>>()?;
            Ok(Instruction::Gate { gate, targets })
        }
        [] => Err("empty instruction".into()),
    }
}

/// Parses the line-based circuit format described in the module docs.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let err = |line: usize, message: String| Error::Parse { line, message };

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing `qubits N` header".into()))?;
    let num_qubits = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["qubits", n] => n
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| err(header_line, format!("invalid qubit count `{n}`")))?,
        _ => return Err(err(header_line, "expected `qubits N` header".into())),
    };

    let parsed = lines
        .map(|(line, l)| {
            let tokens: Vec<&str> = l.split_whitespace().collect();
            parse_instruction(&tokens)
                .map(|instr| (line, instr))
                .map_err(|m| err(line, m))
        })
        .collect::<Result<Vec<_>>>()?;

    let written: BTreeSet<ClassicalBit> = parsed.iter().filter_map(|(_, i)| i.writes()).collect();
    let mut circuit = Circuit::new(num_qubits)?;
    for (line, instr) in parsed {
        if let Some(bit) = instr
            .reads()
            .into_iter()
            .find(|b| written.contains(b) && !circuit.classical_bits.contains(b))
        {
            return Err(err(
                line,
                format!("classical bit {bit} is read before it is written"),
            ));
        }
        circuit.check(&instr).map_err(|m| err(line, m))?;
        circuit.push(instr)?;
    }
    Ok(circuit)
}

/// Classical outcome record of one execution path.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Record(BTreeMap<ClassicalBit, u8>);

impl Record {
    pub fn get(&self, bit: ClassicalBit) -> Option<u8> {
        self.0.get(&bit).copied()
    }

    pub fn bits(&self) -> &BTreeMap<ClassicalBit, u8> {
        &self.0
    }

    fn set(&mut self, bit: ClassicalBit, value: u8) {
        self.0.insert(bit, value);
    }

    fn value(&self, bit: ClassicalBit) -> u8 {
        // Circuits are validated to write before read.
        self.0[&bit]
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (bit, value) in &self.0 {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{bit}={value}")?;
        }
        Ok(())
    }
}

impl FromIterator<(ClassicalBit, u8)> for Record {
    fn from_iter<T: IntoIterator<Item = (ClassicalBit, u8)>>(iter: T) -> Self {
        Record(iter.into_iter().collect())
    }
}

/// One leaf of the exact outcome tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub record: Record,
    pub probability: f64,
    pub final_state: StateVector,
}

/// Effect of a non-measurement instruction on a single execution path.
pub(crate) enum Step {
    Continue(StateVector),
    Reject(StateVector),
}

pub(crate) fn apply_classical_or_gate(
    instr: &Instruction,
    mut state: StateVector,
    record: &mut Record,
) -> Step {
    match instr {
        Instruction::Gate { gate, targets } => {
            state.apply_gate_mut(*gate, targets);
            Step::Continue(state)
        }
        Instruction::CondGate {
            gate,
            targets,
            condition,
        } => {
            if record.value(*condition) == 1 {
                state.apply_gate_mut(*gate, targets);
            }
            Step::Continue(state)
        }
        Instruction::Xor { dest, lhs, rhs } => {
            let v = record.value(*lhs) ^ record.value(*rhs);
            record.set(*dest, v);
            Step::Continue(state)
        }
        Instruction::Postselect { bit, value } => {
            if record.value(*bit) == *value {
                Step::Continue(state)
            } else {
                Step::Reject(state)
            }
        }
        Instruction::Measure { .. } => unreachable!("measurements are handled by the executor"),
    }
}

/// Exact depth-first expansion of every measurement outcome. Branches are
/// returned in lexicographic outcome order (0 before 1 at each measurement).
pub fn enumerate_branches(circuit: &Circuit, initial: &StateVector) -> Result<Vec<Branch>> {
    circuit.check_initial(initial)?;
    let mut out = Vec::new();
    expand(
        circuit.body(),
        initial.clone(),
        1.0,
        Record::default(),
        &mut out,
    );
    Ok(out)
}

fn expand(
    body: &[Instruction],
    mut state: StateVector,
    probability: f64,
    mut record: Record,
    out: &mut Vec<Branch>,
) {
    for (i, instr) in body.iter().enumerate() {
        if let Instruction::Measure { qubit, bit } = instr {
            for value in [0u8, 1] {
                let p = state
                    .z_probability(*qubit, value)
                    .expect("validated circuit");
                if probability * p < PRUNE_THRESHOLD {
                    continue;
                }
                let outcome = state
                    .measure_z_forced(*qubit, value)
                    .expect("nonzero probability");
                let mut next = record.clone();
                next.set(*bit, value);
                expand(
                    &body[i + 1..],
                    outcome.post_state,
                    probability * p,
                    next,
                    out,
                );
            }
            return;
        }
        match apply_classical_or_gate(instr, state, &mut record) {
            Step::Continue(s) => state = s,
            Step::Reject(_) => return,
        }
    }
    out.push(Branch {
        record,
        probability,
        final_state: state,
    });
}

/// Outcome of a single sampled run.
#[derive(Clone, Debug, PartialEq)]
pub struct Shot {
    pub record: Record,
    pub final_state: StateVector,
    /// False when a post-selection instruction rejected the run.
    pub kept: bool,
}

/// Per-shot random stream derived from `(seed, shot)`, independent of how
/// shots are scheduled across threads.
pub fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

impl Circuit {
    /// Runs the circuit once, sampling every measurement from `rng`.
    pub fn run_shot<R: Rng + ?Sized>(&self, initial: &StateVector, rng: &mut R) -> Result<Shot> {
        self.check_initial(initial)?;
        let mut state = initial.clone();
        let mut record = Record::default();
        for instr in &self.body {
            if let Instruction::Measure { qubit, bit } = instr {
                let (value, _) = state.measure_z_mut(*qubit, rng);
                record.set(*bit, value);
                continue;
            }
            match apply_classical_or_gate(instr, state, &mut record) {
                Step::Continue(s) => state = s,
                Step::Reject(s) => {
                    return Ok(Shot {
                        record,
                        final_state: s,
                        kept: false,
                    })
                }
            }
        }
        Ok(Shot {
            record,
            final_state: state,
            kept: true,
        })
    }
}

/// Outcome counts of a sampled run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram<K: Ord = Record> {
    pub counts: BTreeMap<K, u64>,
    /// Shots rejected by post-selection.
    pub discarded: u64,
    pub shots: u64,
}

impl<K: Ord> Default for Histogram<K> {
    fn default() -> Self {
        Self {
            counts: BTreeMap::new(),
            discarded: 0,
            shots: 0,
        }
    }
}

impl<K: Ord> Histogram<K> {
    pub fn record(&mut self, key: Option<K>) {
        self.shots += 1;
        match key {
            Some(k) => *self.counts.entry(k).or_insert(0) += 1,
            None => self.discarded += 1,
        }
    }

    pub fn merge(mut self, other: Histogram<K>) -> Self {
        for (k, n) in other.counts {
            *self.counts.entry(k).or_insert(0) += n;
        }
        self.discarded += other.discarded;
        self.shots += other.shots;
        self
    }

    pub fn count(&self, key: &K) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn kept(&self) -> u64 {
        self.shots - self.discarded
    }
}

/// Runs `shots` independent shots in parallel. Shot `i` draws from
/// [`shot_rng`]`(seed, i)`, so the histogram depends only on the seed.
pub fn sample_shots<K, F>(shots: u64, seed: u64, run: F) -> Histogram<K>
where
    K: Ord + Send,
    F: Fn(&mut ChaCha8Rng) -> Option<K> + Sync,
{
    (0..shots)
        .into_par_iter()
        .fold(Histogram::default, |mut h, i| {
            h.record(run(&mut shot_rng(seed, i)));
            h
        })
        .reduce(Histogram::default, Histogram::merge)
}

pub fn run_sampled(
    circuit: &Circuit,
    initial: &StateVector,
    shots: u64,
    seed: u64,
) -> Result<Histogram> {
    if shots == 0 {
        return invalid("shots must be at least 1");
    }
    circuit.check_initial(initial)?;
    Ok(sample_shots(shots, seed, |rng| {
        let shot = circuit.run_shot(initial, rng).expect("validated circuit");
        shot.kept.then_some(shot.record)
    }))
}
