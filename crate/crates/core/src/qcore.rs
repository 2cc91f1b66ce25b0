//! Exact state-vector engine.
//!
//! States are dense complex amplitude vectors over `n` qubits. Qubit 0 is the
//! most significant bit of the amplitude index, so the ket `|q0 q1 … q(n-1)⟩`
//! lives at index `q0·2^(n-1) + … + q(n-1)`. Operators acting on a subset of
//! qubits follow the same rule locally: the first listed target is the most
//! significant bit of the operator's row/column index.
//!
//! All values are immutable; every operation returns a fresh state.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Error, Result};

/// Complex amplitude.
pub type Amplitude = Complex64;

/// Tolerance for every exact identity checked by the engine.
pub const TOLERANCE: f64 = 1e-12;

const ZERO: Amplitude = Amplitude::new(0.0, 0.0);
const ONE: Amplitude = Amplitude::new(1.0, 0.0);
const I: Amplitude = Amplitude::new(0.0, 1.0);

/// Normalized pure state over `num_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, checking length, finiteness and
    /// normalization.
    pub fn from_amplitudes(num_qubits: usize, amps: Vec<Amplitude>) -> Result<Self> {
        if num_qubits == 0 {
            return invalid("a state needs at least one qubit");
        }
        if amps.len() != 1 << num_qubits {
            return invalid(format!(
                "expected {} amplitudes for {num_qubits} qubits, got {}",
                1usize << num_qubits,
                amps.len()
            ));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return invalid("amplitudes must be finite");
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > TOLERANCE {
            return invalid(format!("state is not normalized (norm² = {norm})"));
        }
        Ok(Self { num_qubits, amps })
    }

    /// Rescales an arbitrary nonzero vector to unit norm.
    pub fn normalized(num_qubits: usize, mut amps: Vec<Amplitude>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return invalid("cannot normalize a zero vector");
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Self::from_amplitudes(num_qubits, amps)
    }

    /// Internal constructor for vectors already known to be normalized up to
    /// floating-point drift.
    fn renormalized(num_qubits: usize, mut amps: Vec<Amplitude>) -> Self {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Self { num_qubits, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Amplitude {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Tensor product `self ⊗ other`; `other`'s qubits are appended after
    /// `self`'s.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector::renormalized(self.num_qubits + other.num_qubits, amps)
    }

    /// Multiplies every amplitude by `e^{iφ}`.
    pub fn with_global_phase(&self, phi: f64) -> StateVector {
        let phase = Amplitude::from_polar(1.0, phi);
        StateVector {
            num_qubits: self.num_qubits,
            amps: self.amps.iter().map(|a| a * phase).collect(),
        }
    }

    fn bit_shift(&self, qubit: usize) -> usize {
        self.num_qubits - 1 - qubit
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return invalid(format!(
                "qubit {qubit} out of range for a {}-qubit state",
                self.num_qubits
            ));
        }
        Ok(())
    }

    fn check_targets(&self, targets: &[usize], arity: usize) -> Result<()> {
        if targets.len() != arity {
            return invalid(format!(
                "operator acts on {arity} qubit(s) but {} target(s) given",
                targets.len()
            ));
        }
        for (i, &t) in targets.iter().enumerate() {
            self.check_qubit(t)?;
            if targets[..i].contains(&t) {
                return invalid(format!("duplicate target qubit {t}"));
            }
        }
        Ok(())
    }

    /// Applies a dense `2^k × 2^k` matrix to `targets`, without any
    /// normalization.
    fn apply_matrix(&self, op: &Operator, targets: &[usize]) -> Vec<Amplitude> {
        let dim = op.dim();
        let shifts: Vec<usize> = targets.iter().map(|&t| self.bit_shift(t)).collect();
        let target_mask: usize = shifts.iter().map(|s| 1 << s).sum();
        // Offsets of each local basis state within the full index space.
        let offsets: Vec<usize> = (0..dim)
            .map(|local| {
                shifts
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| local >> (targets.len() - 1 - k) & 1 == 1)
                    .map(|(_, s)| 1 << s)
                    .sum()
            })
            .collect();

        // Gate matrices are mostly zeros, so only the nonzero entries are kept.
        let rows: Vec<Vec<(usize, Amplitude)>> = (0..dim)
            .map(|row| {
                (0..dim)
                    .map(|col| (col, op.get(row, col)))
                    .filter(|(_, v)| *v != ZERO)
                    .collect()
            })
            .collect();

        let mut out = vec![ZERO; self.amps.len()];
        let mut gathered = vec![ZERO; dim];
        for base in (0..self.amps.len()).filter(|i| i & target_mask == 0) {
            for (g, off) in gathered.iter_mut().zip(&offsets) {
                *g = self.amps[base | off];
            }
            for (row, off) in rows.iter().zip(&offsets) {
                out[base | off] = row.iter().map(|&(col, v)| v * gathered[col]).sum();
            }
        }
        out
    }

    /// Probability that a Z measurement of `qubit` yields `bit`.
    pub fn z_probability(&self, qubit: usize, bit: u8) -> Result<f64> {
        self.check_qubit(qubit)?;
        let shift = self.bit_shift(qubit);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i >> shift) & 1 == bit as usize)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    fn collapse(&self, qubit: usize, bit: u8, probability: f64) -> MeasurementOutcome {
        let mut post_state = self.clone();
        post_state.collapse_mut(qubit, bit, probability);
        MeasurementOutcome {
            bit,
            probability,
            post_state,
        }
    }

    fn collapse_mut(&mut self, qubit: usize, bit: u8, probability: f64) {
        let shift = self.bit_shift(qubit);
        let scale = 1.0 / probability.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i >> shift) & 1 == bit as usize {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
    }

    /// Z-basis measurement with the outcome forced to `bit`.
    pub fn measure_z_forced(&self, qubit: usize, bit: u8) -> Result<MeasurementOutcome> {
        if bit > 1 {
            return invalid(format!("measurement outcome must be 0 or 1, got {bit}"));
        }
        let probability = self.z_probability(qubit, bit)?;
        if probability <= TOLERANCE {
            return Err(Error::ImpossibleOutcome {
                qubit,
                bit,
                probability,
            });
        }
        Ok(self.collapse(qubit, bit, probability))
    }

    /// Born-rule Z-basis measurement drawing its outcome from `rng`.
    pub fn measure_z<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        rng: &mut R,
    ) -> Result<MeasurementOutcome> {
        self.check_qubit(qubit)?;
        let mut post_state = self.clone();
        let (bit, probability) = post_state.measure_z_mut(qubit, rng);
        Ok(MeasurementOutcome {
            bit,
            probability,
            post_state,
        })
    }

    /// In-place [`measure_z`](Self::measure_z) for the circuit executors;
    /// `qubit` must be in range. Returns the bit and its probability.
    pub(crate) fn measure_z_mut<R: Rng + ?Sized>(
        &mut self,
        qubit: usize,
        rng: &mut R,
    ) -> (u8, f64) {
        let p0 = self.z_probability(qubit, 0).expect("qubit in range");
        let bit = if rng.random::<f64>() < p0 { 0 } else { 1 };
        let probability = if bit == 0 { p0 } else { 1.0 - p0 };
        self.collapse_mut(qubit, bit, probability);
        (bit, probability)
    }

    /// In-place gate application for the circuit executors; `targets` must
    /// already be validated. Avoids the dense-matrix path since every gate
    /// is a single-qubit 2×2 or a controlled permutation/phase.
    pub(crate) fn apply_gate_mut(&mut self, gate: Gate, targets: &[usize]) {
        match gate {
            Gate::Cnot => {
                let c = 1 << self.bit_shift(targets[0]);
                let t = 1 << self.bit_shift(targets[1]);
                for i in 0..self.amps.len() {
                    if i & c != 0 && i & t == 0 {
                        self.amps.swap(i, i | t);
                    }
                }
            }
            Gate::Cz => {
                let mask = (1 << self.bit_shift(targets[0])) | (1 << self.bit_shift(targets[1]));
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *a = -*a;
                    }
                }
            }
            _ => {
                let u = gate.unitary();
                let (m00, m01, m10, m11) = (u.0.data[0], u.0.data[1], u.0.data[2], u.0.data[3]);
                let bit = 1 << self.bit_shift(targets[0]);
                for i in (0..self.amps.len()).filter(|i| i & bit == 0) {
                    let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                    self.amps[i] = m00 * a0 + m01 * a1;
                    self.amps[i | bit] = m10 * a0 + m11 * a1;
                }
            }
        }
    }

    /// Drops the qubits in `discard`, which must each be in a definite
    /// computational-basis state (for example right after being measured).
    /// The remaining qubits keep their relative order.
    pub fn discard_measured(&self, discard: &[usize]) -> Result<StateVector> {
        for &q in discard {
            self.check_qubit(q)?;
        }
        let keep: Vec<usize> = (0..self.num_qubits)
            .filter(|q| !discard.contains(q))
            .collect();
        if keep.is_empty() {
            return invalid("cannot discard every qubit");
        }
        let (peak, _) = self
            .amps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .expect("state has amplitudes");
        let discard_mask: usize = discard.iter().map(|&q| 1 << self.bit_shift(q)).sum();
        let fixed = peak & discard_mask;
        let mut amps = vec![ZERO; 1 << keep.len()];
        let mut mass = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            if i & discard_mask != fixed {
                continue;
            }
            let local = keep
                .iter()
                .fold(0, |acc, &q| (acc << 1) | ((i >> self.bit_shift(q)) & 1));
            amps[local] = *a;
            mass += a.norm_sqr();
        }
        if (mass - 1.0).abs() > 1e-9 {
            return invalid("discarded qubits are not in a definite basis state");
        }
        Ok(StateVector::renormalized(keep.len(), amps))
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() <= TOLERANCE {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(
                f,
                "({:.6}{:+.6}i)|{:0width$b}⟩",
                a.re,
                a.im,
                i,
                width = self.num_qubits
            )?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Dense square matrix over `arity` qubits, row-major.
#[derive(Clone, Debug, PartialEq)]
struct Operator {
    arity: usize,
    data: Vec<Amplitude>,
}

impl Operator {
    fn new(arity: usize, data: Vec<Amplitude>) -> Result<Self> {
        if arity == 0 {
            return invalid("operator arity must be at least 1");
        }
        let dim = 1usize << arity;
        if data.len() != dim * dim {
            return invalid(format!(
                "expected {} matrix entries for arity {arity}, got {}",
                dim * dim,
                data.len()
            ));
        }
        if data.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return invalid("matrix entries must be finite");
        }
        Ok(Self { arity, data })
    }

    fn dim(&self) -> usize {
        1 << self.arity
    }

    fn get(&self, row: usize, col: usize) -> Amplitude {
        self.data[row * self.dim() + col]
    }

    fn identity(arity: usize) -> Self {
        let dim = 1 << arity;
        let data = (0..dim * dim)
            .map(|k| if k / dim == k % dim { ONE } else { ZERO })
            .collect();
        Self { arity, data }
    }

    fn adjoint(&self) -> Self {
        let dim = self.dim();
        let data = (0..dim * dim)
            .map(|k| self.get(k % dim, k / dim).conj())
            .collect();
        Self {
            arity: self.arity,
            data,
        }
    }

    fn matmul(&self, rhs: &Operator) -> Self {
        let dim = self.dim();
        let data = (0..dim * dim)
            .map(|k| {
                let (r, c) = (k / dim, k % dim);
                (0..dim).map(|j| self.get(r, j) * rhs.get(j, c)).sum()
            })
            .collect();
        Self {
            arity: self.arity,
            data,
        }
    }

    fn kron(&self, rhs: &Operator) -> Self {
        let (da, db) = (self.dim(), rhs.dim());
        let dim = da * db;
        let data = (0..dim * dim)
            .map(|k| {
                let (r, c) = (k / dim, k % dim);
                self.get(r / db, c / db) * rhs.get(r % db, c % db)
            })
            .collect();
        Self {
            arity: self.arity + rhs.arity,
            data,
        }
    }

    fn add(&self, rhs: &Operator) -> Self {
        Self {
            arity: self.arity,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn max_abs_diff(&self, rhs: &Operator) -> f64 {
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

macro_rules! operator_newtype {
    ($name:ident) => {
        impl $name {
            pub fn arity(&self) -> usize {
                self.0.arity
            }

            pub fn dim(&self) -> usize {
                self.0.dim()
            }

            /// Matrix entry at (`row`, `col`).
            pub fn entry(&self, row: usize, col: usize) -> Amplitude {
                self.0.get(row, col)
            }

            /// Row-major matrix entries.
            pub fn entries(&self) -> &[Amplitude] {
                &self.0.data
            }

            /// Largest elementwise distance to another operator of the same
            /// arity.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                assert_eq!(self.arity(), other.arity(), "arity mismatch");
                self.0.max_abs_diff(&other.0)
            }
        }
    };
}

/// Unitary operator, `U†U = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary(Operator);

operator_newtype!(Unitary);

impl Unitary {
    pub fn new(arity: usize, entries: Vec<Amplitude>) -> Result<Self> {
        let op = Operator::new(arity, entries)?;
        let deviation = op
            .adjoint()
            .matmul(&op)
            .max_abs_diff(&Operator::identity(arity));
        if deviation > TOLERANCE {
            return invalid(format!("matrix is not unitary (deviation {deviation:e})"));
        }
        Ok(Self(op))
    }

    pub fn identity(arity: usize) -> Self {
        Self(Operator::identity(arity))
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Operator product `self · rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &Unitary) -> Self {
        Self(self.0.matmul(&rhs.0))
    }

    pub fn tensor(&self, rhs: &Unitary) -> Self {
        Self(self.0.kron(&rhs.0))
    }
}

/// Orthogonal projector, `P = P†` and `P² = P`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector(Operator);

operator_newtype!(Projector);

impl Projector {
    pub fn new(arity: usize, entries: Vec<Amplitude>) -> Result<Self> {
        let op = Operator::new(arity, entries)?;
        let hermitian = op.adjoint().max_abs_diff(&op);
        let idempotent = op.matmul(&op).max_abs_diff(&op);
        if hermitian > TOLERANCE || idempotent > TOLERANCE {
            return invalid(format!(
                "matrix is not an orthogonal projector (hermiticity {hermitian:e}, idempotence {idempotent:e})"
            ));
        }
        Ok(Self(op))
    }

    /// Rank-one projector `|ψ⟩⟨ψ|`.
    pub fn onto(state: &StateVector) -> Self {
        let dim = state.amps.len();
        let data = (0..dim * dim)
            .map(|k| state.amps[k / dim] * state.amps[k % dim].conj())
            .collect();
        Self(Operator {
            arity: state.num_qubits,
            data,
        })
    }

    pub fn identity(arity: usize) -> Self {
        Self(Operator::identity(arity))
    }

    pub fn tensor(&self, rhs: &Projector) -> Self {
        Self(self.0.kron(&rhs.0))
    }

    /// Sum of two projectors. Only a projector when the two are orthogonal,
    /// so the result is returned as raw entries.
    pub fn sum_entries(&self, rhs: &Projector) -> Vec<Amplitude> {
        self.0.add(&rhs.0).data
    }

    /// Conjugation `U P U†`.
    pub fn conjugated_by(&self, u: &Unitary) -> Self {
        Self(u.0.matmul(&self.0).matmul(&u.0.adjoint()))
    }
}

/// Result of a single-qubit Z-basis measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOutcome {
    pub bit: u8,
    pub probability: f64,
    pub post_state: StateVector,
}

/// Computational basis state from a bitstring such as `"101"`.
pub fn make_basis_state(num_qubits: usize, bits: &str) -> Result<StateVector> {
    if bits.len() != num_qubits {
        return invalid(format!(
            "bitstring {bits:?} has length {} but {num_qubits} qubits requested",
            bits.len()
        ));
    }
    if num_qubits == 0 {
        return invalid("a state needs at least one qubit");
    }
    let mut index = 0usize;
    for ch in bits.chars() {
        index = match ch {
            '0' => index << 1,
            '1' => (index << 1) | 1,
            other => return invalid(format!("invalid bit character {other:?}")),
        };
    }
    let mut amps = vec![ZERO; 1 << num_qubits];
    amps[index] = ONE;
    StateVector::from_amplitudes(num_qubits, amps)
}

/// States referred to by name throughout the crate.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum NamedState {
    /// `|+⟩ = (|0⟩ + |1⟩)/√2`
    Plus,
    /// `|−⟩ = (|0⟩ − |1⟩)/√2`
    Minus,
    /// `|+i⟩ = (|0⟩ + i|1⟩)/√2`
    PlusI,
    /// `|−i⟩ = (|0⟩ − i|1⟩)/√2`
    MinusI,
    /// `|Φ⁺⟩ = (|00⟩ + |11⟩)/√2`
    PhiPlus,
    /// `|Ψ⁺⟩ = (|01⟩ + |10⟩)/√2`
    PsiPlus,
}

impl std::str::FromStr for NamedState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(Self::Plus),
            "minus" => Ok(Self::Minus),
            "plus_i" => Ok(Self::PlusI),
            "minus_i" => Ok(Self::MinusI),
            "phi_plus" => Ok(Self::PhiPlus),
            "psi_plus" => Ok(Self::PsiPlus),
            other => invalid(format!("unknown state name {other:?}")),
        }
    }
}

impl NamedState {
    pub fn state(self) -> StateVector {
        let h = Amplitude::new(FRAC_1_SQRT_2, 0.0);
        let (n, amps) = match self {
            Self::Plus => (1, vec![h, h]),
            Self::Minus => (1, vec![h, -h]),
            Self::PlusI => (1, vec![h, I * h]),
            Self::MinusI => (1, vec![h, -I * h]),
            Self::PhiPlus => (2, vec![h, ZERO, ZERO, h]),
            Self::PsiPlus => (2, vec![ZERO, h, h, ZERO]),
        };
        StateVector::renormalized(n, amps)
    }
}

/// Named state lookup by its lowercase name.
pub fn make_named_state(name: &str) -> Result<StateVector> {
    Ok(name.parse::<NamedState>()?.state())
}

/// The gate set used by circuits.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Gate {
    H,
    X,
    Y,
    Z,
    /// `Rx(θ) = exp(−iθX/2)`
    Rx(f64),
    /// Control first, target second.
    Cnot,
    Cz,
}

impl Gate {
    pub fn arity(self) -> usize {
        match self {
            Gate::Cnot | Gate::Cz => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::H => "h",
            Gate::X => "x",
            Gate::Y => "y",
            Gate::Z => "z",
            Gate::Rx(_) => "rx",
            Gate::Cnot => "cnot",
            Gate::Cz => "cz",
        }
    }

    pub fn unitary(self) -> Unitary {
        let c = |re: f64, im: f64| Amplitude::new(re, im);
        let h = FRAC_1_SQRT_2;
        let (arity, data) = match self {
            Gate::H => (1, vec![c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)]),
            Gate::X => (1, vec![ZERO, ONE, ONE, ZERO]),
            Gate::Y => (1, vec![ZERO, -I, I, ZERO]),
            Gate::Z => (1, vec![ONE, ZERO, ZERO, -ONE]),
            Gate::Rx(theta) => {
                let (s, co) = (theta / 2.0).sin_cos();
                (1, vec![c(co, 0.), c(0., -s), c(0., -s), c(co, 0.)])
            }
            Gate::Cnot => (
                2,
                vec![
                    ONE, ZERO, ZERO, ZERO, //
                    ZERO, ONE, ZERO, ZERO, //
                    ZERO, ZERO, ZERO, ONE, //
                    ZERO, ZERO, ONE, ZERO,
                ],
            ),
            Gate::Cz => (
                2,
                vec![
                    ONE, ZERO, ZERO, ZERO, //
                    ZERO, ONE, ZERO, ZERO, //
                    ZERO, ZERO, ONE, ZERO, //
                    ZERO, ZERO, ZERO, -ONE,
                ],
            ),
        };
        Unitary(Operator { arity, data })
    }
}

/// Looks up a gate by name; `angle` must be given exactly when the gate is
/// `rx`.
pub fn standard_gate(name: &str, angle: Option<f64>) -> Result<Unitary> {
    let gate = match (name, angle) {
        ("rx", Some(theta)) if theta.is_finite() => Gate::Rx(theta),
        ("rx", Some(_)) => return invalid("rx angle must be finite"),
        ("rx", None) => return invalid("rx requires an angle"),
        (_, Some(_)) => return invalid(format!("gate {name:?} takes no angle")),
        ("h", None) => Gate::H,
        ("x", None) => Gate::X,
        ("y", None) => Gate::Y,
        ("z", None) => Gate::Z,
        ("cnot", None) => Gate::Cnot,
        ("cz", None) => Gate::Cz,
        (other, None) => return invalid(format!("unknown gate {other:?}")),
    };
    Ok(gate.unitary())
}

pub fn apply_unitary(state: &StateVector, u: &Unitary, targets: &[usize]) -> Result<StateVector> {
    state.check_targets(targets, u.arity())?;
    Ok(StateVector::renormalized(
        state.num_qubits,
        state.apply_matrix(&u.0, targets),
    ))
}

pub fn apply_gate(state: &StateVector, gate: Gate, targets: &[usize]) -> Result<StateVector> {
    state.check_targets(targets, gate.arity())?;
    let mut out = state.clone();
    out.apply_gate_mut(gate, targets);
    Ok(out)
}

/// `(Π^same, Π^diff)` on two qubits: projectors onto span{|00⟩,|11⟩} and
/// span{|01⟩,|10⟩}.
pub fn parity_projectors() -> (Projector, Projector) {
    let diag = |d: [f64; 4]| {
        let data = (0..16)
            .map(|k| {
                if k / 4 == k % 4 {
                    Amplitude::new(d[k / 4], 0.0)
                } else {
                    ZERO
                }
            })
            .collect();
        Projector(Operator { arity: 2, data })
    };
    (diag([1., 0., 0., 1.]), diag([0., 1., 1., 0.]))
}

/// `(Π_Y+, Π_Y−) = ((1 + Y)/2, (1 − Y)/2)`.
pub fn y_projectors() -> (Projector, Projector) {
    let y = Gate::Y.unitary().0;
    let id = Operator::identity(1);
    let half = |sign: f64| {
        let data = id
            .data
            .iter()
            .zip(&y.data)
            .map(|(a, b)| (a + b * sign) * 0.5)
            .collect();
        Projector(Operator { arity: 1, data })
    };
    (half(1.0), half(-1.0))
}

/// Returns `⟨ψ|P|ψ⟩` and, when that probability exceeds [`TOLERANCE`], the
/// renormalized `P|ψ⟩`.
pub fn apply_projector(
    state: &StateVector,
    p: &Projector,
    targets: &[usize],
) -> Result<(f64, Option<StateVector>)> {
    state.check_targets(targets, p.arity())?;
    let projected = state.apply_matrix(&p.0, targets);
    let probability: f64 = projected.iter().map(|a| a.norm_sqr()).sum();
    if probability > TOLERANCE {
        Ok((
            probability,
            Some(StateVector::renormalized(state.num_qubits, projected)),
        ))
    } else {
        Ok((probability, None))
    }
}

fn check_same_width(a: &StateVector, b: &StateVector) -> Result<()> {
    if a.num_qubits != b.num_qubits {
        return invalid(format!(
            "dimension mismatch: {} vs {} qubits",
            a.num_qubits, b.num_qubits
        ));
    }
    Ok(())
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Amplitude> {
    check_same_width(a, b)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr())
}

pub fn equal_up_to_global_phase(a: &StateVector, b: &StateVector, tol: f64) -> Result<bool> {
    Ok(inner_product(a, b)?.norm() >= 1.0 - tol)
}
