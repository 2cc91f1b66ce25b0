//! Parity-measurement schemes and the pigeonhole experiment built on them.
//!
//! Four ways of measuring the parity of two data qubits are provided:
//!
//! * `direct`: the projectors `Π^same`, `Π^diff` applied to the pair.
//! * `oracle`: two CNOTs onto a shared oracle qubit that is then measured.
//! * `distillation`: each data qubit controls a CNOT onto its own half of a
//!   pre-shared `|Φ⁺⟩` pair; the two ancilla outcomes are XORed classically.
//! * `teleported`: the oracle's CNOTs are implemented through pre-shared
//!   Bell pairs (one-ebit non-local CNOT), so every two-qubit gate is local.
//!
//! In every circuit scheme a parity bit of 0 means "same" and 1 means
//! "different". Data qubits keep indices `0..num_data`, ancillas follow.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::circuits::{
    enumerate_branches, sample_shots, Circuit, ClassicalBit, Histogram, Record, PRUNE_THRESHOLD,
};
use crate::error::{invalid, Error, Result};
use crate::qcore::{
    apply_projector, fidelity, inner_product, make_basis_state, parity_projectors, Amplitude, Gate,
    NamedState, StateVector,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParityScheme {
    Direct,
    Oracle,
    Distillation,
    Teleported,
}

impl ParityScheme {
    pub const ALL: [ParityScheme; 4] = [
        Self::Direct,
        Self::Oracle,
        Self::Distillation,
        Self::Teleported,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Direct => "direct",
            Self::Oracle => "oracle",
            Self::Distillation => "distillation",
            Self::Teleported => "teleported",
        }
    }
}

impl fmt::Display for ParityScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParityScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parity scheme {s:?}")))
    }
}

/// Which two of the three pigeonhole qubits `(a, b, c)` are parity-measured.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pair {
    AB,
    BC,
    AC,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::AB, Pair::BC, Pair::AC];

    pub fn qubits(self) -> (usize, usize) {
        match self {
            Pair::AB => (0, 1),
            Pair::BC => (1, 2),
            Pair::AC => (0, 2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pair::AB => "ab",
            Pair::BC => "bc",
            Pair::AC => "ac",
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("unknown pair {s:?} (expected ab, bc or ac)"))
            })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParityLabel {
    Same,
    Diff,
}

impl ParityLabel {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Self::Same
        } else {
            Self::Diff
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Same => "same",
            Self::Diff => "diff",
        }
    }
}

impl fmt::Display for ParityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of a Pauli-Y measurement. A Z-measurement result of 0 after
/// `Rx(π/2)` is `Plus`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum YSign {
    Plus,
    Minus,
}

impl YSign {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Self::Plus
        } else {
            Self::Minus
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Plus => "+",
            Self::Minus => "-",
        }
    }
}

/// Where the oracle qubit of the teleported scheme lives.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum OraclePlacement {
    /// A separate site; both CNOTs onto the oracle are teleported.
    #[default]
    Separate,
    /// Co-located with the first data qubit, whose CNOT is then local and
    /// only the second data qubit's CNOT is teleported.
    WithFirst,
}

/// Who physically holds a qubit of a parity circuit.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Holder {
    /// Holder of the first measured data qubit and its local ancillas.
    First,
    /// Holder of the second measured data qubit and its local ancillas.
    Second,
    Oracle,
    /// Data qubits not involved in the parity measurement.
    Spectator,
}

/// Parameters of a parity circuit.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ParityLayout {
    pub num_data: usize,
    pub pair: (usize, usize),
    pub placement: OraclePlacement,
    /// Omits the conditional Z corrections of the teleported scheme. Only
    /// useful as a negative control.
    pub drop_conditional_z: bool,
}

impl Default for ParityLayout {
    fn default() -> Self {
        Self {
            num_data: 2,
            pair: (0, 1),
            placement: OraclePlacement::Separate,
            drop_conditional_z: false,
        }
    }
}

/// A parity-measurement circuit together with its qubit roles.
#[derive(Clone, Debug, PartialEq)]
pub struct ParityCircuit {
    pub scheme: ParityScheme,
    pub layout: ParityLayout,
    pub circuit: Circuit,
    pub data: [usize; 2],
    pub oracle: Option<usize>,
    /// Every non-data qubit, oracle included.
    pub ancillas: Vec<usize>,
    pub parity_bit: ClassicalBit,
    /// Number of leading instructions that prepare pre-shared entanglement.
    pub setup_len: usize,
    pub holders: Vec<Holder>,
}

/// Builds a scheme's circuit on two data qubits with default layout.
/// `direct` has no circuit.
pub fn build_parity_circuit(scheme: ParityScheme) -> Result<Option<ParityCircuit>> {
    build_parity_circuit_with(scheme, &ParityLayout::default())
}

pub fn build_parity_circuit_with(
    scheme: ParityScheme,
    layout: &ParityLayout,
) -> Result<Option<ParityCircuit>> {
    let (a, b) = layout.pair;
    let n = layout.num_data;
    if a == b || a >= n || b >= n {
        return invalid(format!("invalid data pair ({a}, {b}) for {n} data qubits"));
    }
    let bit = ClassicalBit;
    let mut holders: Vec<Holder> = (0..n)
        .map(|q| match q {
            q if q == a => Holder::First,
            q if q == b => Holder::Second,
            _ => Holder::Spectator,
        })
        .collect();

    let (circuit, oracle, parity_bit, setup_len) = match scheme {
        ParityScheme::Direct => return Ok(None),
        ParityScheme::Oracle => {
            let o = n;
            holders.push(Holder::Oracle);
            let mut c = Circuit::new(n + 1)?;
            c.gate(Gate::Cnot, &[a, o])?
                .gate(Gate::Cnot, &[b, o])?
                .measure(o, bit(0))?;
            (c, Some(o), bit(0), 0)
        }
        ParityScheme::Distillation => {
            let (e1, e2) = (n, n + 1);
            holders.extend([Holder::First, Holder::Second]);
            let mut c = Circuit::new(n + 2)?;
            c.gate(Gate::H, &[e1])?
                .gate(Gate::Cnot, &[e1, e2])?
                .gate(Gate::Cnot, &[a, e1])?
                .gate(Gate::Cnot, &[b, e2])?
                .measure(e1, bit(0))?
                .measure(e2, bit(1))?
                .xor(bit(2), bit(0), bit(1))?;
            (c, None, bit(2), 2)
        }
        ParityScheme::Teleported => match layout.placement {
            OraclePlacement::Separate => {
                let (o, e1, e2, f1, f2) = (n, n + 1, n + 2, n + 3, n + 4);
                holders.extend([
                    Holder::Oracle,
                    Holder::Second,
                    Holder::Oracle,
                    Holder::First,
                    Holder::Oracle,
                ]);
                let mut c = Circuit::new(n + 5)?;
                c.gate(Gate::H, &[e1])?
                    .gate(Gate::Cnot, &[e1, e2])?
                    .gate(Gate::H, &[f1])?
                    .gate(Gate::Cnot, &[f1, f2])?;
                teleported_cnot(
                    &mut c,
                    b,
                    o,
                    (e1, e2),
                    (bit(0), bit(1)),
                    layout.drop_conditional_z,
                )?;
                teleported_cnot(
                    &mut c,
                    a,
                    o,
                    (f1, f2),
                    (bit(2), bit(3)),
                    layout.drop_conditional_z,
                )?;
                c.measure(o, bit(4))?;
                (c, Some(o), bit(4), 4)
            }
            OraclePlacement::WithFirst => {
                let (o, e1, e2) = (n, n + 1, n + 2);
                holders.extend([Holder::First, Holder::Second, Holder::First]);
                let mut c = Circuit::new(n + 3)?;
                c.gate(Gate::H, &[e1])?.gate(Gate::Cnot, &[e1, e2])?;
                teleported_cnot(
                    &mut c,
                    b,
                    o,
                    (e1, e2),
                    (bit(0), bit(1)),
                    layout.drop_conditional_z,
                )?;
                c.gate(Gate::Cnot, &[a, o])?.measure(o, bit(2))?;
                (c, Some(o), bit(2), 2)
            }
        },
    };

    Ok(Some(ParityCircuit {
        scheme,
        layout: *layout,
        ancillas: (n..circuit.num_qubits()).collect(),
        circuit,
        data: [a, b],
        oracle,
        parity_bit,
        setup_len,
        holders,
    }))
}

/// One-ebit non-local CNOT from `control` onto `target` through the Bell
/// pair `(near, far)`, `near` held with the control and `far` with the
/// target.
fn teleported_cnot(
    c: &mut Circuit,
    control: usize,
    target: usize,
    (near, far): (usize, usize),
    (m1, m2): (ClassicalBit, ClassicalBit),
    drop_z: bool,
) -> Result<()> {
    c.gate(Gate::Cnot, &[control, near])?
        .measure(near, m1)?
        .cond_gate(Gate::X, &[far], m1)?
        .gate(Gate::Cnot, &[far, target])?
        .gate(Gate::H, &[far])?
        .measure(far, m2)?;
    if !drop_z {
        c.cond_gate(Gate::Z, &[control], m2)?;
    }
    Ok(())
}

/// Outcome of one parity-measurement branch.
#[derive(Clone, Debug, PartialEq)]
pub struct ParityResult {
    pub label: ParityLabel,
    pub probability: f64,
    /// State of the two data qubits after the measurement.
    pub post_state: StateVector,
    /// Classical record of the branch; empty for `direct`.
    pub transcript: BTreeMap<ClassicalBit, u8>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Sampled { shots: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParityRun {
    /// One entry per outcome branch.
    Exact(Vec<ParityResult>),
    Sampled(Histogram<ParityLabel>),
}

pub fn run_parity(scheme: ParityScheme, data_state: &StateVector, mode: Mode) -> Result<ParityRun> {
    run_parity_with(scheme, &ParityLayout::default(), data_state, mode)
}

pub fn run_parity_with(
    scheme: ParityScheme,
    layout: &ParityLayout,
    data_state: &StateVector,
    mode: Mode,
) -> Result<ParityRun> {
    if data_state.num_qubits() != 2 || layout.num_data != 2 {
        return invalid("parity runs take a 2-qubit data state");
    }
    if let Mode::Sampled { shots: 0, .. } = mode {
        return invalid("shots must be at least 1");
    }
    let Some(pc) = build_parity_circuit_with(scheme, layout)? else {
        return Ok(match mode {
            Mode::Exact => ParityRun::Exact(direct_parity(data_state, layout.pair)?),
            Mode::Sampled { shots, seed } => {
                let (same, _) = parity_projectors();
                let (p_same, _) =
                    apply_projector(data_state, &same, &[layout.pair.0, layout.pair.1])?;
                ParityRun::Sampled(sample_shots(shots, seed, |rng| {
                    Some(if rng.random::<f64>() < p_same {
                        ParityLabel::Same
                    } else {
                        ParityLabel::Diff
                    })
                }))
            }
        });
    };

    let ancilla_zeros = make_basis_state(pc.ancillas.len(), &"0".repeat(pc.ancillas.len()))?;
    let initial = data_state.tensor(&ancilla_zeros);
    match mode {
        Mode::Exact => {
            let results = enumerate_branches(&pc.circuit, &initial)?
                .into_iter()
                .map(|b| {
                    Ok(ParityResult {
                        label: ParityLabel::from_bit(
                            b.record.get(pc.parity_bit).expect("parity bit written"),
                        ),
                        probability: b.probability,
                        post_state: b.final_state.discard_measured(&pc.ancillas)?,
                        transcript: b.record.bits().clone(),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(ParityRun::Exact(results))
        }
        Mode::Sampled { shots, seed } => Ok(ParityRun::Sampled(sample_shots(shots, seed, |rng| {
            let shot = pc
                .circuit
                .run_shot(&initial, rng)
                .expect("validated circuit");
            shot.record.get(pc.parity_bit).map(ParityLabel::from_bit)
        }))),
    }
}

fn direct_parity(state: &StateVector, (a, b): (usize, usize)) -> Result<Vec<ParityResult>> {
    let (same, diff) = parity_projectors();
    let mut out = Vec::new();
    for (label, p) in [(ParityLabel::Same, &same), (ParityLabel::Diff, &diff)] {
        let (probability, post) = apply_projector(state, p, &[a, b])?;
        if let Some(post_state) = post {
            out.push(ParityResult {
                label,
                probability,
                post_state,
                transcript: BTreeMap::new(),
            });
        }
    }
    Ok(out)
}

/// Largest deviation between a scheme and the `direct` projective
/// measurement on `state`: the maximum of the per-label probability
/// differences and of `1 − |⟨direct post-state|branch post-state⟩|` over all
/// branches.
pub fn channel_deviation(
    scheme: ParityScheme,
    layout: &ParityLayout,
    state: &StateVector,
) -> Result<f64> {
    let ParityRun::Exact(reference) =
        run_parity_with(ParityScheme::Direct, layout, state, Mode::Exact)?
    else {
        unreachable!()
    };
    let ParityRun::Exact(branches) = run_parity_with(scheme, layout, state, Mode::Exact)? else {
        unreachable!()
    };
    let mut worst = 0.0f64;
    for label in [ParityLabel::Same, ParityLabel::Diff] {
        let expected = reference.iter().find(|r| r.label == label);
        let p_expected = expected.map_or(0.0, |r| r.probability);
        let p_actual: f64 = branches
            .iter()
            .filter(|b| b.label == label)
            .map(|b| b.probability)
            .sum();
        worst = worst.max((p_expected - p_actual).abs());
        for branch in branches.iter().filter(|b| b.label == label) {
            let dev = match expected {
                Some(r) => 1.0 - inner_product(&r.post_state, &branch.post_state)?.norm(),
                None => 1.0,
            };
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

/// Haar-like random 2-qubit states from independent Gaussian amplitudes.
pub fn random_two_qubit_states(count: usize, seed: u64) -> Vec<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let amps = (0..4)
                .map(|_| Amplitude::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            StateVector::normalized(2, amps).expect("Gaussian vector is nonzero")
        })
        .collect()
}

/// Maximum [`channel_deviation`] over `count` seeded random data states.
pub fn equivalence_suite(
    scheme: ParityScheme,
    layout: &ParityLayout,
    count: usize,
    seed: u64,
) -> Result<f64> {
    random_two_qubit_states(count, seed)
        .iter()
        .map(|s| channel_deviation(scheme, layout, s))
        .try_fold(0.0f64, |acc, d| Ok(acc.max(d?)))
}

/// State of `a`, `b` and the oracle right before the oracle is measured, for
/// data input `|++⟩`.
pub fn oracle_premeasurement_state() -> Result<StateVector> {
    let pc = build_parity_circuit(ParityScheme::Oracle)?.expect("oracle scheme has a circuit");
    let plus = NamedState::Plus.state();
    let initial = plus.tensor(&plus).tensor(&make_basis_state(1, "0")?);
    pc.circuit.evolve_unitary_prefix(&initial)
}

/// Fidelity of [`oracle_premeasurement_state`] with
/// `(|Φ⁺⟩|0⟩ + |Ψ⁺⟩|1⟩)/√2`.
pub fn oracle_superposition_fidelity() -> Result<f64> {
    let zero = make_basis_state(1, "0")?;
    let one = make_basis_state(1, "1")?;
    let phi = NamedState::PhiPlus.state().tensor(&zero);
    let psi = NamedState::PsiPlus.state().tensor(&one);
    let target = StateVector::normalized(
        3,
        phi.amplitudes()
            .iter()
            .zip(psi.amplitudes())
            .map(|(x, y)| x + y)
            .collect(),
    )?;
    fidelity(&target, &oracle_premeasurement_state()?)
}

/// Joint outcome of a pigeonhole run: the parity label and the three
/// Y-measurement signs of `(a, b, c)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointOutcome {
    pub parity: ParityLabel,
    pub y: [YSign; 3],
}

impl JointOutcome {
    /// All 16 outcomes in canonical order.
    pub fn all() -> impl Iterator<Item = JointOutcome> {
        [ParityLabel::Same, ParityLabel::Diff]
            .into_iter()
            .flat_map(|parity| {
                (0u8..8).map(move |k| JointOutcome {
                    parity,
                    y: [
                        YSign::from_bit(k >> 2 & 1),
                        YSign::from_bit(k >> 1 & 1),
                        YSign::from_bit(k & 1),
                    ],
                })
            })
    }

    pub fn all_plus(&self) -> bool {
        self.y.iter().all(|&s| s == YSign::Plus)
    }
}

/// Distribution over [`JointOutcome`]s with derived pigeonhole statistics.
/// Shared by the quantum experiment and the hidden-variable models.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution(BTreeMap<JointOutcome, f64>);

impl JointDistribution {
    /// Builds a distribution from weights; missing outcomes get 0.
    pub fn from_weights(weights: impl IntoIterator<Item = (JointOutcome, f64)>) -> Self {
        let mut map: BTreeMap<JointOutcome, f64> = JointOutcome::all().map(|k| (k, 0.0)).collect();
        for (k, w) in weights {
            *map.get_mut(&k).expect("all outcomes present") += w;
        }
        Self(map)
    }

    pub fn get(&self, key: &JointOutcome) -> f64 {
        self.0[key]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&JointOutcome, &f64)> {
        self.0.iter()
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn probability(&self, pred: impl Fn(&JointOutcome) -> bool) -> f64 {
        self.0.iter().filter(|(k, _)| pred(k)).map(|(_, p)| p).sum()
    }

    /// `P(all three Y = +)`.
    pub fn success_probability(&self) -> f64 {
        self.probability(JointOutcome::all_plus)
    }

    /// Parity distribution conditioned on all three Y outcomes being `+`;
    /// `None` when that event has zero probability.
    pub fn conditional_on_all_plus(&self) -> Option<BTreeMap<ParityLabel, f64>> {
        let success = self.success_probability();
        if success <= PRUNE_THRESHOLD {
            return None;
        }
        Some(
            [ParityLabel::Same, ParityLabel::Diff]
                .into_iter()
                .map(|l| {
                    (
                        l,
                        self.probability(|k| k.all_plus() && k.parity == l) / success,
                    )
                })
                .collect(),
        )
    }

    /// `P(same ∧ Y+ on both qubits of `pair`)`.
    pub fn same_and_pair_plus(&self, pair: Pair) -> f64 {
        let (i, j) = pair.qubits();
        self.probability(|k| {
            k.parity == ParityLabel::Same && k.y[i] == YSign::Plus && k.y[j] == YSign::Plus
        })
    }

    /// `P(Y+ on data qubit q)`.
    pub fn y_plus_marginal(&self, qubit: usize) -> f64 {
        self.probability(|k| k.y[qubit] == YSign::Plus)
    }
}

/// Result of [`pigeonhole_experiment`].
#[derive(Clone, Debug, PartialEq)]
pub struct PigeonholeStats {
    pub scheme: ParityScheme,
    pub pair: Pair,
    pub mode: Mode,
    /// Exact probabilities, or empirical frequencies in sampled mode.
    pub joint: JointDistribution,
    /// Raw counts, sampled mode only.
    pub counts: Option<BTreeMap<JointOutcome, u64>>,
    pub conditional: Option<BTreeMap<ParityLabel, f64>>,
    pub success_probability: f64,
    /// Shots rejected by the all-Y-plus post-selection, sampled mode only.
    pub discarded: Option<u64>,
}

/// Full pigeonhole circuit for a circuit scheme: three `|+⟩` data qubits
/// prepared with Hadamards, the parity measurement on `pair`, then
/// `Rx(π/2)` and a Z measurement on each data qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct PigeonholeCircuit {
    pub circuit: Circuit,
    pub parity_bit: ClassicalBit,
    pub y_bits: [ClassicalBit; 3],
}

pub fn pigeonhole_circuit(
    scheme: ParityScheme,
    pair: Pair,
    placement: OraclePlacement,
) -> Result<Option<PigeonholeCircuit>> {
    let layout = ParityLayout {
        num_data: 3,
        pair: pair.qubits(),
        placement,
        drop_conditional_z: false,
    };
    let Some(pc) = build_parity_circuit_with(scheme, &layout)? else {
        return Ok(None);
    };
    let mut c = Circuit::new(pc.circuit.num_qubits())?;
    for q in 0..3 {
        c.gate(Gate::H, &[q])?;
    }
    c.extend(&pc.circuit)?;
    let y_bits = append_y_measurements(&mut c)?;
    Ok(Some(PigeonholeCircuit {
        circuit: c,
        parity_bit: pc.parity_bit,
        y_bits,
    }))
}

fn append_y_measurements(c: &mut Circuit) -> Result<[ClassicalBit; 3]> {
    let first = c.next_free_bit().0;
    let bits = [
        ClassicalBit(first),
        ClassicalBit(first + 1),
        ClassicalBit(first + 2),
    ];
    for q in 0..3 {
        c.gate(Gate::Rx(FRAC_PI_2), &[q])?;
    }
    for (q, bit) in bits.iter().enumerate() {
        c.measure(q, *bit)?;
    }
    Ok(bits)
}

fn plus_plus_plus() -> StateVector {
    let plus = NamedState::Plus.state();
    plus.tensor(&plus).tensor(&plus)
}

pub fn pigeonhole_experiment(
    scheme: ParityScheme,
    pair: Pair,
    mode: Mode,
) -> Result<PigeonholeStats> {
    pigeonhole_experiment_with(scheme, pair, OraclePlacement::default(), mode)
}

pub fn pigeonhole_experiment_with(
    scheme: ParityScheme,
    pair: Pair,
    placement: OraclePlacement,
    mode: Mode,
) -> Result<PigeonholeStats> {
    if let Mode::Sampled { shots: 0, .. } = mode {
        return invalid("shots must be at least 1");
    }
    let circuit = pigeonhole_circuit(scheme, pair, placement)?;
    let (joint, counts, discarded) = match (&circuit, mode) {
        (Some(pc), Mode::Exact) => {
            let initial = make_basis_state(
                pc.circuit.num_qubits(),
                &"0".repeat(pc.circuit.num_qubits()),
            )?;
            let weights = enumerate_branches(&pc.circuit, &initial)?
                .into_iter()
                .map(|b| (joint_key(&b.record, pc), b.probability))
                .collect::<Vec<_>>();
            (JointDistribution::from_weights(weights), None, None)
        }
        (Some(pc), Mode::Sampled { shots, seed }) => {
            let initial = make_basis_state(
                pc.circuit.num_qubits(),
                &"0".repeat(pc.circuit.num_qubits()),
            )?;
            let hist = sample_shots(shots, seed, |rng| {
                let shot = pc
                    .circuit
                    .run_shot(&initial, rng)
                    .expect("validated circuit");
                Some(joint_key(&shot.record, pc))
            });
            from_histogram(hist)
        }
        (None, Mode::Exact) => (direct_joint(pair)?, None, None),
        (None, Mode::Sampled { shots, seed }) => {
            let y_circuit = y_measurement_circuit()?;
            let (same, _) = parity_projectors();
            let (i, j) = pair.qubits();
            let start = plus_plus_plus();
            let (p_same, post_same) = apply_projector(&start, &same, &[i, j])?;
            let (_, diff) = parity_projectors();
            let (_, post_diff) = apply_projector(&start, &diff, &[i, j])?;
            let (post_same, post_diff) = (
                post_same.expect("p(same) = 1/2"),
                post_diff.expect("p(diff) = 1/2"),
            );
            let hist = sample_shots(shots, seed, |rng| {
                let (parity, post) = if rng.random::<f64>() < p_same {
                    (ParityLabel::Same, &post_same)
                } else {
                    (ParityLabel::Diff, &post_diff)
                };
                let shot = y_circuit
                    .circuit
                    .run_shot(post, rng)
                    .expect("validated circuit");
                Some(JointOutcome {
                    parity,
                    y: y_signs(&shot.record, &y_circuit.y_bits),
                })
            });
            from_histogram(hist)
        }
    };

    Ok(PigeonholeStats {
        scheme,
        pair,
        mode,
        conditional: joint.conditional_on_all_plus(),
        success_probability: joint.success_probability(),
        joint,
        counts,
        discarded,
    })
}

fn from_histogram(
    hist: Histogram<JointOutcome>,
) -> (
    JointDistribution,
    Option<BTreeMap<JointOutcome, u64>>,
    Option<u64>,
) {
    let shots = hist.shots as f64;
    let joint =
        JointDistribution::from_weights(hist.counts.iter().map(|(k, &n)| (*k, n as f64 / shots)));
    let kept: u64 = hist
        .counts
        .iter()
        .filter(|(k, _)| k.all_plus())
        .map(|(_, n)| n)
        .sum();
    let counts = JointOutcome::all().map(|k| (k, hist.count(&k))).collect();
    (joint, Some(counts), Some(hist.shots - kept))
}

fn y_signs(record: &Record, bits: &[ClassicalBit; 3]) -> [YSign; 3] {
    bits.map(|b| YSign::from_bit(record.get(b).expect("Y bit written")))
}

fn joint_key(record: &Record, pc: &PigeonholeCircuit) -> JointOutcome {
    JointOutcome {
        parity: ParityLabel::from_bit(record.get(pc.parity_bit).expect("parity bit written")),
        y: y_signs(record, &pc.y_bits),
    }
}

fn y_measurement_circuit() -> Result<PigeonholeCircuit> {
    let mut c = Circuit::new(3)?;
    let y_bits = append_y_measurements(&mut c)?;
    Ok(PigeonholeCircuit {
        circuit: c,
        parity_bit: ClassicalBit(u32::MAX),
        y_bits,
    })
}

fn direct_joint(pair: Pair) -> Result<JointDistribution> {
    let y_circuit = y_measurement_circuit()?;
    let mut weights = Vec::new();
    for result in direct_parity(&plus_plus_plus(), pair.qubits())? {
        for b in enumerate_branches(&y_circuit.circuit, &result.post_state)? {
            weights.push((
                JointOutcome {
                    parity: result.label,
                    y: y_signs(&b.record, &y_circuit.y_bits),
                },
                result.probability * b.probability,
            ));
        }
    }
    Ok(JointDistribution::from_weights(weights))
}

/// Conditional parity distribution given all-Y-plus, for one pair choice.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterfactualRow {
    pub pair: Pair,
    pub conditional: Option<BTreeMap<ParityLabel, f64>>,
}

/// Runs the exact experiment for every pair choice.
pub fn counterfactual_table(scheme: ParityScheme) -> Result<Vec<CounterfactualRow>> {
    Pair::ALL
        .into_iter()
        .map(|pair| {
            Ok(CounterfactualRow {
                pair,
                conditional: pigeonhole_experiment(scheme, pair, Mode::Exact)?.conditional,
            })
        })
        .collect()
}

/// True when every row conditions to `{diff: 1}` within `tol`.
pub fn always_different(rows: &[CounterfactualRow], tol: f64) -> bool {
    rows.iter().all(|r| {
        r.conditional.as_ref().is_some_and(|c| {
            (c[&ParityLabel::Diff] - 1.0).abs() <= tol && c[&ParityLabel::Same].abs() <= tol
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{equal_up_to_global_phase, TOLERANCE};

    fn exact(run: ParityRun) -> Vec<ParityResult> {
        match run {
            ParityRun::Exact(r) => r,
            ParityRun::Sampled(_) => panic!("expected exact run"),
        }
    }

    fn by_label(results: &[ParityResult], label: ParityLabel) -> f64 {
        results
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.probability)
            .sum()
    }

    fn plus_plus() -> StateVector {
        NamedState::Plus.state().tensor(&NamedState::Plus.state())
    }

    #[test]
    fn oracle_scheme_on_plus_plus() {
        let results = exact(run_parity(ParityScheme::Oracle, &plus_plus(), Mode::Exact).unwrap());
        assert_eq!(results.len(), 2);
        let phi = NamedState::PhiPlus.state();
        let psi = NamedState::PsiPlus.state();
        for r in &results {
            assert!((r.probability - 0.5).abs() < TOLERANCE);
            let expected = if r.label == ParityLabel::Same {
                &phi
            } else {
                &psi
            };
            assert!(equal_up_to_global_phase(&r.post_state, expected, TOLERANCE).unwrap());
            assert_eq!(
                r.label == ParityLabel::Same,
                r.transcript[&ClassicalBit(0)] == 0
            );
        }
    }

    #[test]
    fn distillation_on_basis_states() {
        let r = exact(
            run_parity(
                ParityScheme::Distillation,
                &make_basis_state(2, "00").unwrap(),
                Mode::Exact,
            )
            .unwrap(),
        );
        assert!((by_label(&r, ParityLabel::Same) - 1.0).abs() < TOLERANCE);
        let r = exact(
            run_parity(
                ParityScheme::Distillation,
                &make_basis_state(2, "01").unwrap(),
                Mode::Exact,
            )
            .unwrap(),
        );
        assert!((by_label(&r, ParityLabel::Diff) - 1.0).abs() < TOLERANCE);
    }

    #[test]
    fn direct_on_plus_plus() {
        let r = exact(run_parity(ParityScheme::Direct, &plus_plus(), Mode::Exact).unwrap());
        assert_eq!(r.len(), 2);
        assert!(equal_up_to_global_phase(
            &r[0].post_state,
            &NamedState::PhiPlus.state(),
            TOLERANCE
        )
        .unwrap());
        assert!(equal_up_to_global_phase(
            &r[1].post_state,
            &NamedState::PsiPlus.state(),
            TOLERANCE
        )
        .unwrap());
        assert!(r[0].transcript.is_empty());
    }

    #[test]
    fn circuit_schemes_match_direct_on_plus_plus() {
        for scheme in [
            ParityScheme::Oracle,
            ParityScheme::Distillation,
            ParityScheme::Teleported,
        ] {
            let dev = channel_deviation(scheme, &ParityLayout::default(), &plus_plus()).unwrap();
            assert!(dev < 1e-10, "{scheme}: {dev}");
        }
    }

    #[test]
    fn teleported_with_oracle_at_first_site_is_equivalent() {
        let layout = ParityLayout {
            placement: OraclePlacement::WithFirst,
            ..Default::default()
        };
        assert!(equivalence_suite(ParityScheme::Teleported, &layout, 20, 3).unwrap() < 1e-10);
    }

    #[test]
    fn dropping_conditional_z_breaks_equivalence() {
        let layout = ParityLayout {
            drop_conditional_z: true,
            ..Default::default()
        };
        assert!(equivalence_suite(ParityScheme::Teleported, &layout, 10, 1).unwrap() > 1e-3);
    }

    #[test]
    fn oracle_superposition() {
        assert!((oracle_superposition_fidelity().unwrap() - 1.0).abs() < TOLERANCE);
    }

    #[test]
    fn pigeonhole_exact_statistics() {
        for scheme in ParityScheme::ALL {
            for pair in Pair::ALL {
                let stats = pigeonhole_experiment(scheme, pair, Mode::Exact).unwrap();
                assert!((stats.joint.total() - 1.0).abs() < 1e-10);
                assert!(stats.joint.same_and_pair_plus(pair) < TOLERANCE);
                assert!(
                    (stats.success_probability - 0.125).abs() < TOLERANCE,
                    "{scheme} {pair}"
                );
                let cond = stats.conditional.unwrap();
                assert!((cond[&ParityLabel::Diff] - 1.0).abs() < TOLERANCE);
            }
        }
    }

    #[test]
    fn pigeonhole_success_decomposes() {
        // 1/2 for "diff", 1/2 for ++ on |Ψ⁺⟩, 1/2 for the third |+⟩.
        let (_, diff) = parity_projectors();
        let (p_diff, psi) = apply_projector(&plus_plus(), &diff, &[0, 1]).unwrap();
        let (y_plus, _) = crate::qcore::y_projectors();
        let (p_pp, _) = apply_projector(&psi.unwrap(), &y_plus.tensor(&y_plus), &[0, 1]).unwrap();
        let (p_c, _) = apply_projector(&NamedState::Plus.state(), &y_plus, &[0]).unwrap();
        assert!(
            (p_diff - 0.5).abs() < TOLERANCE
                && (p_pp - 0.5).abs() < TOLERANCE
                && (p_c - 0.5).abs() < TOLERANCE
        );
        let stats =
            pigeonhole_experiment(ParityScheme::Distillation, Pair::AB, Mode::Exact).unwrap();
        assert!((stats.success_probability - p_diff * p_pp * p_c).abs() < TOLERANCE);
    }

    #[test]
    fn pigeonhole_is_pair_symmetric() {
        for scheme in ParityScheme::ALL {
            let base = pigeonhole_experiment(scheme, Pair::AB, Mode::Exact).unwrap();
            for pair in [Pair::BC, Pair::AC] {
                let other = pigeonhole_experiment(scheme, pair, Mode::Exact).unwrap();
                assert!((other.success_probability - base.success_probability).abs() < TOLERANCE);
                assert!(
                    (other.joint.same_and_pair_plus(pair)
                        - base.joint.same_and_pair_plus(Pair::AB))
                    .abs()
                        < TOLERANCE
                );
                // Compare in the (pair, pair, spectator) frame.
                let (i, j) = pair.qubits();
                let k = 3 - i - j;
                for (key, p) in base.joint.iter() {
                    let mut y = [YSign::Plus; 3];
                    (y[i], y[j], y[k]) = (key.y[0], key.y[1], key.y[2]);
                    let permuted = JointOutcome {
                        parity: key.parity,
                        y,
                    };
                    assert!((p - other.joint.get(&permuted)).abs() < TOLERANCE);
                }
            }
        }
    }

    #[test]
    fn counterfactual_rows_are_all_diff() {
        let rows = counterfactual_table(ParityScheme::Distillation).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(always_different(&rows, TOLERANCE));
    }

    #[test]
    fn sampled_pigeonhole_never_shows_forbidden_event() {
        for scheme in ParityScheme::ALL {
            let stats = pigeonhole_experiment(
                scheme,
                Pair::AB,
                Mode::Sampled {
                    shots: 4_000,
                    seed: 9,
                },
            )
            .unwrap();
            assert_eq!(stats.joint.same_and_pair_plus(Pair::AB), 0.0);
            let counts = stats.counts.unwrap();
            assert_eq!(counts.values().sum::<u64>(), 4_000);
            let kept: u64 = counts
                .iter()
                .filter(|(k, _)| k.all_plus())
                .map(|(_, n)| n)
                .sum();
            assert_eq!(stats.discarded.unwrap(), 4_000 - kept);
        }
    }

    #[test]
    fn sampled_parity_runs() {
        match run_parity(
            ParityScheme::Teleported,
            &plus_plus(),
            Mode::Sampled {
                shots: 2_000,
                seed: 4,
            },
        )
        .unwrap()
        {
            ParityRun::Sampled(h) => {
                assert_eq!(h.shots, 2_000);
                let same = h.count(&ParityLabel::Same) as f64;
                assert!((same - 1000.0).abs() < 5.0 * (2000.0f64 * 0.25).sqrt());
            }
            ParityRun::Exact(_) => panic!(),
        }
        assert!(run_parity(
            ParityScheme::Direct,
            &plus_plus(),
            Mode::Sampled { shots: 0, seed: 0 }
        )
        .is_err());
        assert!(run_parity(ParityScheme::Direct, &NamedState::Plus.state(), Mode::Exact).is_err());
    }

    #[test]
    fn scheme_and_pair_names_parse() {
        for s in ParityScheme::ALL {
            assert_eq!(s.name().parse::<ParityScheme>().unwrap(), s);
        }
        for p in Pair::ALL {
            assert_eq!(p.name().parse::<Pair>().unwrap(), p);
        }
        assert!("ghz".parse::<ParityScheme>().is_err());
        assert!("ca".parse::<Pair>().is_err());
    }
}
