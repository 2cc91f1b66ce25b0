//! Site-annotated execution of circuits.
//!
//! Every qubit is owned by one laboratory. A leading block of instructions
//! may be declared as entanglement setup, during which gates may span
//! sites (pre-shared Bell pairs). After that, an instruction touching
//! qubits of two sites is a locality violation. Executing an annotated
//! circuit yields, for every outcome branch, a trace of local operations and
//! of the one-bit classical messages needed whenever a bit is consumed away
//! from where it was produced.
//!
//! Classical XOR and post-selection are evaluated by a site-neutral
//! classical node, [`Node::Evaluator`].

use std::collections::BTreeSet;
use std::fmt;

use crate::circuits::{
    enumerate_branches, run_sampled, shot_rng, Branch, Circuit, ClassicalBit, Histogram,
    Instruction, Record,
};
use crate::error::{invalid, Error, Result};
use crate::protocols::{Holder, Mode, ParityCircuit};
use crate::qcore::StateVector;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Alice,
    Bob,
    Charlie,
    OracleSite,
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Site::Alice => "Alice",
            Site::Bob => "Bob",
            Site::Charlie => "Charlie",
            Site::OracleSite => "OracleSite",
        })
    }
}

/// Endpoint of a trace event.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Site(Site),
    /// Classical node evaluating XOR and post-selection.
    Evaluator,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Site(s) => s.fmt(f),
            Node::Evaluator => f.write_str("Evaluator"),
        }
    }
}

/// Default site assignment for a parity circuit: the first data qubit's side
/// is Alice's, the second's is Bob's, spectators are Charlie's.
pub fn ownership_for(pc: &ParityCircuit) -> Vec<Site> {
    pc.holders
        .iter()
        .map(|h| match h {
            Holder::First => Site::Alice,
            Holder::Second => Site::Bob,
            Holder::Oracle => Site::OracleSite,
            Holder::Spectator => Site::Charlie,
        })
        .collect()
}

/// A circuit with one owning site per qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedCircuit {
    circuit: Circuit,
    owners: Vec<Site>,
    setup_len: usize,
}

impl AnnotatedCircuit {
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn owner(&self, qubit: usize) -> Site {
        self.owners[qubit]
    }

    pub fn setup_len(&self) -> usize {
        self.setup_len
    }

    fn sites_of(&self, qubits: &[usize]) -> Vec<Site> {
        qubits
            .iter()
            .map(|&q| self.owners[q])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

fn annotate(circuit: &Circuit, ownership: &[Site], setup_len: usize) -> Result<AnnotatedCircuit> {
    if ownership.len() != circuit.num_qubits() {
        return invalid(format!(
            "ownership covers {} qubits but the circuit has {}",
            ownership.len(),
            circuit.num_qubits()
        ));
    }
    if setup_len > circuit.len() {
        return invalid("setup phase longer than the circuit");
    }
    if let Some((i, instr)) = circuit.body()[..setup_len]
        .iter()
        .enumerate()
        .find(|(_, i)| !matches!(i, Instruction::Gate { .. }))
    {
        return invalid(format!(
            "setup instruction {i} (`{instr}`) is not an unconditional gate"
        ));
    }
    Ok(AnnotatedCircuit {
        circuit: circuit.clone(),
        owners: ownership.to_vec(),
        setup_len,
    })
}

/// Annotates `circuit`, rejecting any post-setup instruction whose qubits
/// belong to more than one site.
pub fn assign_sites(
    circuit: &Circuit,
    ownership: &[Site],
    setup_len: usize,
) -> Result<AnnotatedCircuit> {
    let annotated = annotate(circuit, ownership, setup_len)?;
    for (index, instr) in circuit.body().iter().enumerate().skip(setup_len) {
        let sites = annotated.sites_of(instr.qubits());
        if sites.len() > 1 {
            return Err(Error::LocalityViolation {
                index,
                instruction: instr.to_string(),
                sites: sites
                    .iter()
                    .map(Site::to_string)
                    .collect::<Vec<_>>()
                    .join("+"),
            });
        }
    }
    Ok(annotated)
}

/// Annotates without the locality check, so that a non-local circuit can
/// still be executed and audited.
pub fn annotate_unchecked(
    circuit: &Circuit,
    ownership: &[Site],
    setup_len: usize,
) -> Result<AnnotatedCircuit> {
    annotate(circuit, ownership, setup_len)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    LocalGate,
    LocalMeasure,
    ClassicalMessage,
    SetupEntanglement,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::LocalGate => "local_gate",
            EventKind::LocalMeasure => "local_measure",
            EventKind::ClassicalMessage => "classical_message",
            EventKind::SetupEntanglement => "setup_entanglement",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub step: usize,
    pub kind: EventKind,
    /// Sites acted on; for messages, `[from, to]`.
    pub nodes: Vec<Node>,
    pub payload: String,
}

impl TraceEvent {
    pub fn involves(&self, site: Site) -> bool {
        self.nodes.contains(&Node::Site(site))
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = if self.kind == EventKind::ClassicalMessage {
            "->"
        } else {
            "+"
        };
        let nodes: Vec<String> = self.nodes.iter().map(Node::to_string).collect();
        write!(
            f,
            "step={} kind={} site={} payload={}",
            self.step,
            self.kind,
            nodes.join(sep),
            self.payload
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoccTrace {
    events: Vec<TraceEvent>,
    setup_boundary: usize,
}

impl LoccTrace {
    /// Builds a trace from events in order, renumbering steps from 0. The
    /// first `setup_boundary` events form the setup phase.
    pub fn new(events: Vec<TraceEvent>, setup_boundary: usize) -> Self {
        let events = events
            .into_iter()
            .enumerate()
            .map(|(step, e)| TraceEvent { step, ..e })
            .collect();
        Self {
            events,
            setup_boundary,
        }
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    /// First step after the setup phase.
    pub fn setup_boundary(&self) -> usize {
        self.setup_boundary
    }

    pub fn post_setup(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events
            .iter()
            .filter(move |e| e.step >= self.setup_boundary)
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

impl fmt::Display for LoccTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Replays the circuit's classical control flow for one outcome record and
/// lists what happens where. The trace is fully determined by the record.
pub fn trace_for_record(annotated: &AnnotatedCircuit, record: &Record) -> LoccTrace {
    let mut events = Vec::new();
    let mut produced: Vec<(ClassicalBit, Node)> = Vec::new();
    let mut delivered: BTreeSet<(ClassicalBit, Node)> = BTreeSet::new();
    let push = |events: &mut Vec<TraceEvent>, kind, nodes, payload| {
        events.push(TraceEvent {
            step: events.len(),
            kind,
            nodes,
            payload,
        })
    };

    for (index, instr) in annotated.circuit.body().iter().enumerate() {
        let sites: Vec<Node> = annotated
            .sites_of(instr.qubits())
            .into_iter()
            .map(Node::Site)
            .collect();
        if index < annotated.setup_len {
            push(
                &mut events,
                EventKind::SetupEntanglement,
                sites,
                instr.to_string(),
            );
            continue;
        }

        let consumers: Vec<Node> = match instr {
            Instruction::CondGate { .. } => sites.clone(),
            Instruction::Xor { .. } | Instruction::Postselect { .. } => vec![Node::Evaluator],
            _ => vec![],
        };
        for bit in instr.reads() {
            let (_, origin) = *produced
                .iter()
                .find(|(b, _)| *b == bit)
                .expect("validated circuit");
            let value = record.get(bit).expect("record covers the branch");
            for &to in &consumers {
                if to != origin && delivered.insert((bit, to)) {
                    push(
                        &mut events,
                        EventKind::ClassicalMessage,
                        vec![origin, to],
                        format!("{bit}={value}"),
                    );
                }
            }
        }

        match instr {
            Instruction::Gate { .. } => {
                push(&mut events, EventKind::LocalGate, sites, instr.to_string())
            }
            Instruction::CondGate { condition, .. } => {
                let fired = record.get(*condition) == Some(1);
                let payload = format!("{instr} [{}]", if fired { "applied" } else { "skipped" });
                push(&mut events, EventKind::LocalGate, sites, payload);
            }
            Instruction::Measure { bit, .. } => {
                let value = record.get(*bit).expect("record covers the branch");
                produced.push((*bit, sites[0]));
                push(
                    &mut events,
                    EventKind::LocalMeasure,
                    sites,
                    format!("{instr} = {value}"),
                );
            }
            Instruction::Xor { dest, .. } => produced.push((*dest, Node::Evaluator)),
            Instruction::Postselect { bit, value } => {
                if record.get(*bit) != Some(*value) {
                    break;
                }
            }
        }
    }
    LoccTrace::new(events, annotated.setup_len)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TracedBranch {
    pub branch: Branch,
    pub trace: LoccTrace,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoccRun {
    Exact(Vec<TracedBranch>),
    /// Histogram over all shots and the trace of shot 0.
    Sampled {
        histogram: Histogram,
        trace: LoccTrace,
    },
}

/// Runs an annotated circuit with the same semantics as the plain circuit
/// executors, attaching traces.
pub fn execute_locc(
    annotated: &AnnotatedCircuit,
    initial: &StateVector,
    mode: Mode,
) -> Result<LoccRun> {
    match mode {
        Mode::Exact => Ok(LoccRun::Exact(
            enumerate_branches(&annotated.circuit, initial)?
                .into_iter()
                .map(|branch| TracedBranch {
                    trace: trace_for_record(annotated, &branch.record),
                    branch,
                })
                .collect(),
        )),
        Mode::Sampled { shots, seed } => {
            let histogram = run_sampled(&annotated.circuit, initial, shots, seed)?;
            let first = annotated
                .circuit
                .run_shot(initial, &mut shot_rng(seed, 0))?;
            Ok(LoccRun::Sampled {
                histogram,
                trace: trace_for_record(annotated, &first.record),
            })
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct LocalityReport {
    pub cross_site_quantum_ops: usize,
    pub classical_bits_exchanged: usize,
    pub pass: bool,
}

pub fn verify_locality(trace: &LoccTrace) -> LocalityReport {
    let cross_site_quantum_ops = trace
        .post_setup()
        .filter(|e| {
            matches!(
                e.kind,
                EventKind::LocalGate | EventKind::LocalMeasure | EventKind::SetupEntanglement
            )
        })
        .filter(|e| e.nodes.len() > 1)
        .count();
    let classical_bits_exchanged = trace
        .post_setup()
        .filter(|e| e.kind == EventKind::ClassicalMessage)
        .count();
    LocalityReport {
        cross_site_quantum_ops,
        classical_bits_exchanged,
        pass: cross_site_quantum_ops == 0,
    }
}

/// Checks that every post-setup event at `before` happens strictly before
/// the first post-setup event at `after`.
///
/// Meant for layouts where `after` reaches the oracle only through
/// pre-shared entanglement and classical messages, so its first event is
/// the start of its interaction with [`Site::OracleSite`]. Traces without
/// events at `before`, `after` and the oracle site are not applicable.
pub fn causal_order_check(trace: &LoccTrace, before: Site, after: Site) -> Result<bool> {
    for site in [before, after, Site::OracleSite] {
        if !trace.post_setup().any(|e| e.involves(site)) {
            return Err(Error::NotApplicable(format!(
                "trace has no post-setup events at {site}"
            )));
        }
    }
    let last_before = trace
        .post_setup()
        .filter(|e| e.involves(before))
        .map(|e| e.step)
        .max();
    let first_after = trace
        .post_setup()
        .filter(|e| e.involves(after))
        .map(|e| e.step)
        .min();
    Ok(last_before < first_after)
}
