//! Deterministic hidden-variable models of the pigeonhole experiment.
//!
//! Each qubit carries pre-existing bits `(z, y)`. A parity measurement
//! reports "same" iff the measured pair's `z` bits agree, and a Y
//! measurement reports `+` iff the qubit's `y` bit is 0. Models differ in
//! how the parity measurement disturbs the `y` bits.
//!
//! Two families are provided:
//!
//! * the conspiracy model, which makes the pair's `y` bits opposite
//!   whenever the parity is "same", and
//! * every symmetric [`DisturbanceRule`]: one truth table, applied at both
//!   sites, mapping `(z, y, λ, context)` to the new `y`, where `λ` is a bit
//!   shared through the entangled ancillas and `context` is the parity
//!   outcome.
//!
//! Hidden bits are uniformly distributed.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{invalid, Result};
use crate::protocols::{
    pigeonhole_experiment, JointDistribution, JointOutcome, Mode, Pair, ParityLabel, ParityScheme,
    YSign,
};

/// Agreement tolerance between model and quantum statistics.
pub const SCAN_TOLERANCE: f64 = 1e-9;

/// Pre-existing values of the three qubits `(a, b, c)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct HiddenAssignment {
    pub z: [u8; 3],
    pub y: [u8; 3],
    /// Shared ancilla bit, if the model has one.
    pub lambda: Option<u8>,
}

impl HiddenAssignment {
    /// All `2^6` (or `2^7` with a shared bit) assignments, equally likely.
    pub fn all(lambda_bits: u8) -> Vec<HiddenAssignment> {
        let lambdas: &[Option<u8>] = if lambda_bits == 0 {
            &[None]
        } else {
            &[Some(0), Some(1)]
        };
        let mut out = Vec::new();
        for &lambda in lambdas {
            for k in 0u8..64 {
                let bit = |i: u8| (k >> i) & 1;
                out.push(HiddenAssignment {
                    z: [bit(5), bit(3), bit(1)],
                    y: [bit(4), bit(2), bit(0)],
                    lambda,
                });
            }
        }
        out
    }
}

/// True iff the three `z` bits are pairwise different.
pub fn pigeonhole_contradiction_check(z: (u8, u8, u8)) -> bool {
    let (a, b, c) = z;
    a != b && b != c && c != a
}

fn parity_of(z: &[u8; 3], pair: Pair) -> ParityLabel {
    let (i, j) = pair.qubits();
    if z[i] == z[j] {
        ParityLabel::Same
    } else {
        ParityLabel::Diff
    }
}

/// Conspiracy model: on "same" the pair's `y` bits become `(0, 1)` in
/// qubit order; on "diff" nothing changes.
pub fn conspiracy_predict(assignment: &HiddenAssignment, pair: Pair) -> (ParityLabel, [u8; 3]) {
    let parity = parity_of(&assignment.z, pair);
    let mut y = assignment.y;
    if parity == ParityLabel::Same {
        let (i, j) = pair.qubits();
        (y[i], y[j]) = (0, 1);
    }
    (parity, y)
}

fn outcome(parity: ParityLabel, y: [u8; 3]) -> JointOutcome {
    JointOutcome {
        parity,
        y: y.map(YSign::from_bit),
    }
}

/// Uniform average of the conspiracy model over all assignments.
pub fn conspiracy_distribution(pair: Pair) -> JointDistribution {
    let all = HiddenAssignment::all(0);
    let w = 1.0 / all.len() as f64;
    JointDistribution::from_weights(all.iter().map(|h| {
        let (parity, y) = conspiracy_predict(h, pair);
        (outcome(parity, y), w)
    }))
}

/// Truth table `(z, y, λ, context) → y'`, stored as 16 bits. Entry
/// `z<<3 | y<<2 | λ<<1 | c` holds the new `y`, with `c = 0` for "same".
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DisturbanceRule(pub u16);

impl DisturbanceRule {
    fn index(z: u8, y: u8, lambda: u8, context: ParityLabel) -> u16 {
        let c = u16::from(context == ParityLabel::Diff);
        u16::from(z) << 3 | u16::from(y) << 2 | u16::from(lambda) << 1 | c
    }

    pub fn apply(self, z: u8, y: u8, lambda: u8, context: ParityLabel) -> u8 {
        (self.0 >> Self::index(z, y, lambda, context) & 1) as u8
    }

    /// Number of distinct rules when `λ` is absent (fixed to 0) or a free bit.
    pub fn space_size(lambda_bits: u8) -> u32 {
        if lambda_bits == 0 {
            1 << 8
        } else {
            1 << 16
        }
    }

    /// The `k`-th rule of the space. Without `λ`, the eight `λ = 1` entries
    /// are unreachable and left at 0.
    pub fn nth(k: u32, lambda_bits: u8) -> DisturbanceRule {
        if lambda_bits != 0 {
            return DisturbanceRule(k as u16);
        }
        let mut table = 0u16;
        for (slot, pos) in (0u16..16).filter(|p| p >> 1 & 1 == 0).enumerate() {
            table |= ((k >> slot) as u16 & 1) << pos;
        }
        DisturbanceRule(table)
    }

    /// Joint distribution of the experiment on `pair` when both measured
    /// qubits are disturbed by this rule.
    pub fn distribution(self, lambda_bits: u8, pair: Pair) -> JointDistribution {
        let all = HiddenAssignment::all(lambda_bits);
        let w = 1.0 / all.len() as f64;
        let (i, j) = pair.qubits();
        JointDistribution::from_weights(all.iter().map(|h| {
            let parity = parity_of(&h.z, pair);
            let lambda = h.lambda.unwrap_or(0);
            let mut y = h.y;
            y[i] = self.apply(h.z[i], h.y[i], lambda, parity);
            y[j] = self.apply(h.z[j], h.y[j], lambda, parity);
            (outcome(parity, y), w)
        }))
    }
}

impl fmt::Display for DisturbanceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#06x}", self.0)
    }
}

/// A statistic of the pigeonhole experiment compared by the scanner.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Statistic {
    /// `P(same ∧ Y+ on both measured qubits)`, zero in quantum mechanics.
    SameAndPairPlus,
    /// `P(diff | all three Y = +)`.
    DiffGivenAllPlus,
    /// `P(Y+)` on qubit `0..3`.
    YPlusMarginal(usize),
    /// `P(all three Y = +)`.
    AllPlus,
    /// `P(same)`.
    Same,
}

impl Statistic {
    /// The three statistics singled out for the loophole argument.
    pub const CORE: [Statistic; 5] = [
        Statistic::SameAndPairPlus,
        Statistic::DiffGivenAllPlus,
        Statistic::YPlusMarginal(0),
        Statistic::YPlusMarginal(1),
        Statistic::YPlusMarginal(2),
    ];

    /// [`Statistic::CORE`] plus the post-selection rate and the parity rate.
    pub const FULL: [Statistic; 7] = [
        Statistic::SameAndPairPlus,
        Statistic::DiffGivenAllPlus,
        Statistic::YPlusMarginal(0),
        Statistic::YPlusMarginal(1),
        Statistic::YPlusMarginal(2),
        Statistic::AllPlus,
        Statistic::Same,
    ];

    pub fn name(self) -> String {
        match self {
            Statistic::SameAndPairPlus => "p_same_and_pair_plus".into(),
            Statistic::DiffGivenAllPlus => "p_diff_given_all_plus".into(),
            Statistic::YPlusMarginal(q) => format!("p_y_plus_{}", ['a', 'b', 'c'][q]),
            Statistic::AllPlus => "p_all_plus".into(),
            Statistic::Same => "p_same".into(),
        }
    }

    /// Value on `dist`; `None` for a conditional on a null event.
    pub fn evaluate(self, dist: &JointDistribution, pair: Pair) -> Option<f64> {
        match self {
            Statistic::SameAndPairPlus => Some(dist.same_and_pair_plus(pair)),
            Statistic::DiffGivenAllPlus => dist
                .conditional_on_all_plus()
                .map(|c| c[&ParityLabel::Diff]),
            Statistic::YPlusMarginal(q) => Some(dist.y_plus_marginal(q)),
            Statistic::AllPlus => Some(dist.success_probability()),
            Statistic::Same => Some(dist.probability(|k| k.parity == ParityLabel::Same)),
        }
    }
}

/// First statistic on which a model departs from the quantum reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub statistic: String,
    /// `None` when the statistic is undefined for the model.
    pub model_value: Option<f64>,
    pub quantum_value: f64,
}

impl Witness {
    pub fn deviation(&self) -> f64 {
        self.model_value
            .map_or(f64::INFINITY, |m| (m - self.quantum_value).abs())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "statistic": self.statistic,
            "model_value": self.model_value,
            "quantum_value": self.quantum_value,
        })
    }
}

/// Compares `model` with `reference` on `stats` in order; `None` means
/// consistent within `tol`.
pub fn compare(
    model: &JointDistribution,
    reference: &JointDistribution,
    stats: &[Statistic],
    pair: Pair,
    tol: f64,
) -> Option<Witness> {
    stats.iter().find_map(|&s| {
        let quantum_value = s
            .evaluate(reference, pair)
            .expect("quantum statistics are defined");
        let model_value = s.evaluate(model, pair);
        match model_value {
            Some(m) if (m - quantum_value).abs() <= tol => None,
            _ => Some(Witness {
                statistic: s.name(),
                model_value,
                quantum_value,
            }),
        }
    })
}

/// Compares every joint outcome probability in canonical order and returns
/// the first that differs by more than `tol`.
pub fn joint_witness(
    model: &JointDistribution,
    reference: &JointDistribution,
    tol: f64,
) -> Option<Witness> {
    JointOutcome::all().find_map(|k| {
        let (m, q) = (model.get(&k), reference.get(&k));
        ((m - q).abs() > tol).then(|| Witness {
            statistic: format!(
                "p({},{},{},{})",
                k.parity,
                k.y[0].symbol(),
                k.y[1].symbol(),
                k.y[2].symbol()
            ),
            model_value: Some(m),
            quantum_value: q,
        })
    })
}

/// Exact quantum statistics of the distillation scheme on `pair`.
pub fn quantum_reference(pair: Pair) -> Result<JointDistribution> {
    Ok(pigeonhole_experiment(ParityScheme::Distillation, pair, Mode::Exact)?.joint)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub lambda_bits: u8,
    pub pair: Pair,
    pub statistics: Vec<Statistic>,
    pub tolerance: f64,
}

impl ScanConfig {
    pub fn new(lambda_bits: u8) -> Self {
        Self {
            lambda_bits,
            pair: Pair::AB,
            statistics: Statistic::FULL.to_vec(),
            tolerance: SCAN_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    pub lambda_bits: u8,
    pub pair: Pair,
    pub statistics: Vec<String>,
    pub tolerance: f64,
    pub models_tested: u32,
    pub models_consistent: u32,
    pub consistent_rules: Vec<DisturbanceRule>,
    /// One entry per inconsistent rule, in rule order.
    pub witnesses: Vec<(DisturbanceRule, Witness)>,
}

impl ScanReport {
    /// How many rules were rejected by each statistic.
    pub fn witness_counts(&self) -> BTreeMap<String, u32> {
        let mut counts = BTreeMap::new();
        for (_, w) in &self.witnesses {
            *counts.entry(w.statistic.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Structured export. `witness_limit` caps the number of listed
    /// witnesses; `None` lists all of them.
    pub fn to_json(&self, witness_limit: Option<usize>) -> Value {
        let limit = witness_limit.unwrap_or(self.witnesses.len());
        json!({
            "lambda_bits": self.lambda_bits,
            "pair": self.pair.name(),
            "statistics": self.statistics,
            "tolerance": self.tolerance,
            "models_tested": self.models_tested,
            "models_consistent": self.models_consistent,
            "consistent_rules": self.consistent_rules.iter().map(|r| r.0).collect::<Vec<_>>(),
            "witness_counts": self.witness_counts(),
            "witnesses": self.witnesses.iter().take(limit).map(|(r, w)| {
                let mut v = w.to_json();
                v["rule"] = json!(r.0);
                v
            }).collect::<Vec<_>>(),
            "witnesses_listed": limit.min(self.witnesses.len()),
        })
    }
}

/// Enumerates every symmetric disturbance rule and compares its
/// predictions with the exact quantum statistics.
pub fn scan_local_models(config: &ScanConfig) -> Result<ScanReport> {
    if config.lambda_bits > 1 {
        return invalid("lambda_bits must be 0 or 1");
    }
    let reference = quantum_reference(config.pair)?;
    let size = DisturbanceRule::space_size(config.lambda_bits);
    let results: Vec<(DisturbanceRule, Option<Witness>)> = (0..size)
        .into_par_iter()
        .map(|k| {
            let rule = DisturbanceRule::nth(k, config.lambda_bits);
            let model = rule.distribution(config.lambda_bits, config.pair);
            let witness = compare(
                &model,
                &reference,
                &config.statistics,
                config.pair,
                config.tolerance,
            );
            (rule, witness)
        })
        .collect();

    let mut report = ScanReport {
        lambda_bits: config.lambda_bits,
        pair: config.pair,
        statistics: config.statistics.iter().map(|s| s.name()).collect(),
        tolerance: config.tolerance,
        models_tested: results.len() as u32,
        models_consistent: 0,
        consistent_rules: Vec::new(),
        witnesses: Vec::new(),
    };
    for (rule, witness) in results {
        match witness {
            None => {
                report.models_consistent += 1;
                report.consistent_rules.push(rule);
            }
            Some(w) => report.witnesses.push((rule, w)),
        }
    }
    Ok(report)
}
