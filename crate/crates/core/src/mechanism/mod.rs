//! The two monetary exchange mechanisms.
//!
//! Both share one transmission schedule. In every round the user `t` with the largest
//! knowledge space broadcasts a combination of its own packets that is new to every user
//! whose knowledge does not already contain `t`'s packets (the round's receivers `R_l`).
//! They differ only in who pays:
//!
//! * [`Variant::PeerPayments`]: each receiver pays `t` an equal share `1/|R_l|`.
//! * [`Variant::Broker`]: `t` is credited 1 and the users with the largest outstanding
//!   want `|X̄_i| - p⁻_i` (the set `P_l`) are each debited `1/|P_l|`.
//!
//! The encoding vector must avoid each receiver's knowledge individually; requiring it to
//! avoid the joint span of all receivers is usually impossible.

mod replay;
mod transcript;

pub use replay::{replay_verify, ReplayError, VerificationReport, Violation, ViolationKind};
pub use transcript::{waves_from, PaymentDelta, RoundRecord, Transcript, TranscriptError, Transfer, Wave};

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economics::payments::{BrokerLedger, PaymentMatrix, Payments, Rational};
use crate::field::{select_avoiding, FieldError, PrimeField, Strategy, SubspaceBasis};
use crate::instance::{Coalition, Instance, InstanceError};
use crate::rate_region::{min_sum_rate, RateError, RateVector, MAX_ORACLE_USERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Receivers pay the transmitter directly.
    #[serde(rename = "algo1")]
    PeerPayments,
    /// A broker balances payments across the neediest users.
    #[serde(rename = "algo2")]
    Broker,
}

/// Which of the maximal-knowledge users transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    SeededRandom {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionPolicy {
    #[default]
    Deterministic,
    Randomized {
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub variant: Variant,
    pub tie_break: TieBreak,
    pub selection: SelectionPolicy,
    pub q_override: Option<u64>,
}

impl MechanismConfig {
    pub fn new(variant: Variant) -> Self {
        MechanismConfig { variant, tie_break: TieBreak::default(), selection: SelectionPolicy::default(), q_override: None }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn with_selection(mut self, selection: SelectionPolicy) -> Self {
        self.selection = selection;
        self
    }

    pub fn with_q(mut self, q: u64) -> Self {
        self.q_override = Some(q);
        self
    }
}

#[derive(Debug, Error)]
pub enum MechanismError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("configuration error: {0}")]
    Config(String),
    /// A mechanism invariant failed; the partial transcript is attached for inspection.
    #[error("mechanism invariant violated in round {round}: {message}")]
    Invariant { round: usize, message: String, transcript: Box<Transcript> },
    #[error("no termination after {rounds} rounds")]
    NonTermination { rounds: usize, transcript: Box<Transcript> },
}

/// Result of a run: rates, payments and the transcript they were derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub rates: RateVector,
    pub payments: Payments,
    pub transcript: Transcript,
}

/// Users achieving the maximum of `key`, ascending.
fn argmax<K: Ord>(users: impl Iterator<Item = usize>, key: impl Fn(usize) -> K) -> Vec<usize> {
    let users: Vec<usize> = users.collect();
    let best = users.iter().map(|&i| key(i)).max();
    match best {
        Some(best) => users.into_iter().filter(|&i| key(i) == best).collect(),
        None => Vec::new(),
    }
}

/// Receivers of a transmission by `t`: users whose knowledge misses part of `span(U_t)`.
pub(crate) fn receivers(field: &PrimeField, initial_t: &SubspaceBasis, knowledge: &[SubspaceBasis]) -> Vec<usize> {
    (0..knowledge.len()).filter(|&i| !knowledge[i].contains_subspace(field, initial_t).expect("same ambient dimension")).collect()
}

/// Users with maximum `|X̄_i| - p⁻_i`.
pub(crate) fn neediest(instance: &Instance, minus: &[Rational]) -> Vec<usize> {
    argmax(instance.users(), |i| BigRational::from_integer(instance.num_wants(i).into()) - &minus[i])
}

pub(crate) fn max_knowledge(knowledge: &[SubspaceBasis]) -> Vec<usize> {
    argmax(0..knowledge.len(), |i| knowledge[i].rank())
}

pub(crate) fn expected_delta(variant: Variant, t: usize, r_set: &[usize], p_set: Option<&[usize]>) -> PaymentDelta {
    match variant {
        Variant::PeerPayments => {
            // Only reachable when replaying a tampered transcript.
            if r_set.is_empty() {
                return PaymentDelta::Peer(Vec::new());
            }
            let share = Rational::one() / Rational::from_integer(r_set.len().into());
            PaymentDelta::Peer(r_set.iter().map(|&i| Transfer { from: i, to: t, amount: share.clone() }).collect())
        }
        Variant::Broker => {
            let p_set = p_set.expect("broker rounds carry P_l");
            let share = Rational::one() / Rational::from_integer(p_set.len().into());
            PaymentDelta::Broker { credit: (t, Rational::one()), debits: p_set.iter().map(|&i| (i, share.clone())).collect() }
        }
    }
}

/// Runs the mechanism selected by `config.variant`.
pub fn run(instance: &Instance, config: &MechanismConfig) -> Result<Outcome, MechanismError> {
    let digest = instance.digest();
    let instance = match config.q_override {
        Some(q) => instance.with_q(q)?,
        None => instance.clone(),
    };
    let field = *instance.field();
    let n = instance.n();
    let k = instance.k();

    let initial: Vec<SubspaceBasis> = instance.users().map(|i| instance.initial_knowledge(i)).collect();
    let mut knowledge = initial.clone();
    let mut completion_round: Vec<usize> = vec![0; n];
    let mut ledger = BrokerLedger::zeros(n);
    let mut tie_rng = match config.tie_break {
        TieBreak::SeededRandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        TieBreak::LowestIndex => None,
    };
    let mut pick_rng = match config.selection {
        SelectionPolicy::Randomized { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        SelectionPolicy::Deterministic => None,
    };
    let mut transcript = Transcript {
        instance_digest: digest,
        q: instance.q(),
        config: config.clone(),
        rounds: Vec::new(),
        completion_round: Vec::new(),
        waves: Vec::new(),
    };
    let snapshot = |t: &Transcript, completion: &[usize]| {
        let mut t = t.clone();
        t.completion_round = completion.to_vec();
        Box::new(t)
    };

    let mut round = 1;
    while knowledge.iter().any(|b| !b.is_full()) {
        if round > n * k {
            return Err(MechanismError::NonTermination { rounds: n * k, transcript: snapshot(&transcript, &completion_round) });
        }
        let t_set = max_knowledge(&knowledge);
        let p_set = match config.variant {
            Variant::Broker => Some(neediest(&instance, ledger.minus())),
            Variant::PeerPayments => None,
        };
        let t = match tie_rng.as_mut() {
            Some(rng) => *t_set.choose(rng).expect("T_l is nonempty"),
            None => t_set[0],
        };
        let r_set = receivers(&field, &initial[t], &knowledge);
        if r_set.is_empty() {
            return Err(MechanismError::Invariant {
                round,
                message: format!("user {} is maximal but every user already knows its packets", t + 1),
                transcript: snapshot(&transcript, &completion_round),
            });
        }
        let forbidden: Vec<&SubspaceBasis> = r_set.iter().map(|&i| &knowledge[i]).collect();
        let strategy = match pick_rng.as_mut() {
            Some(rng) => Strategy::Randomized(rng),
            None => Strategy::Deterministic,
        };
        let v = match select_avoiding(&field, &initial[t], &forbidden, strategy) {
            Ok(v) => v,
            Err(e @ FieldError::FieldTooSmall { .. }) => return Err(MechanismError::Config(e.to_string())),
            Err(e) => {
                return Err(MechanismError::Invariant {
                    round,
                    message: format!("encoding vector selection failed: {e}"),
                    transcript: snapshot(&transcript, &completion_round),
                })
            }
        };
        for (i, basis) in knowledge.iter_mut().enumerate() {
            let innovative = basis.insert_mut(&field, &v).expect("vector has length k");
            if innovative != r_set.contains(&i) {
                return Err(MechanismError::Invariant {
                    round,
                    message: format!("innovation for user {} disagrees with R_l", i + 1),
                    transcript: snapshot(&transcript, &completion_round),
                });
            }
            if innovative && basis.is_full() {
                completion_round[i] = round;
            }
        }
        let payment_delta = expected_delta(config.variant, t, &r_set, p_set.as_deref());
        transcript::apply_delta(&mut ledger, &payment_delta);
        transcript.rounds.push(RoundRecord { round, transmitter: t, t_set, r_set, p_set, v, payment_delta });
        round += 1;
    }

    transcript.waves = waves_from(&completion_round);
    transcript.completion_round = completion_round;

    let rates = transcript.rates();
    let payments = match config.variant {
        Variant::PeerPayments => Payments::Matrix(transcript.peer_matrix()),
        Variant::Broker => Payments::Ledger(transcript.ledger()),
    };
    // Outputs are re-derived from the transcript; they must agree with the running ledger.
    if payments.ledger() != ledger || rates.total() != transcript.rounds.len() as u64 {
        let last = transcript.rounds.len();
        return Err(MechanismError::Invariant {
            round: last,
            message: "transcript-derived payments disagree with the running ledger".into(),
            transcript: Box::new(transcript),
        });
    }
    Ok(Outcome { rates, payments, transcript })
}

/// Peer-payment mechanism; `config.variant` is ignored.
pub fn run_algo1(instance: &Instance, config: &MechanismConfig) -> Result<(RateVector, PaymentMatrix, Transcript), MechanismError> {
    let config = MechanismConfig { variant: Variant::PeerPayments, ..config.clone() };
    let out = run(instance, &config)?;
    match out.payments {
        Payments::Matrix(p) => Ok((out.rates, p, out.transcript)),
        Payments::Ledger(_) => unreachable!("peer variant yields a matrix"),
    }
}

/// Broker mechanism; `config.variant` is ignored.
pub fn run_algo2(instance: &Instance, config: &MechanismConfig) -> Result<(RateVector, BrokerLedger, Transcript), MechanismError> {
    let config = MechanismConfig { variant: Variant::Broker, ..config.clone() };
    let out = run(instance, &config)?;
    match out.payments {
        Payments::Ledger(l) => Ok((out.rates, l, out.transcript)),
        Payments::Matrix(_) => unreachable!("broker variant yields a ledger"),
    }
}

/// A coalition that reaches omniscience no earlier than its completion wave allows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveBoundViolation {
    pub wave_round: usize,
    pub coalition: Coalition,
    pub min_sum_rate: u64,
}

/// Checks `l_s <= min_sum_rate(S)` for every wave `s` and every coalition `S` drawn from the
/// users complete by round `l_s` that includes at least one user completing exactly then:
/// the schedule never needs more rounds than any such coalition would on its own.
pub fn wave_bound_violations(instance: &Instance, transcript: &Transcript) -> Result<Vec<WaveBoundViolation>, RateError> {
    let n = instance.n();
    if n > MAX_ORACLE_USERS {
        return Err(RateError::Budget { what: "users", found: n, max: MAX_ORACLE_USERS });
    }
    let mut msr: HashMap<u64, u64> = HashMap::new();
    let mut done: u64 = 0;
    let mut out = Vec::new();
    for wave in &transcript.waves {
        let this: u64 = wave.users.iter().fold(0, |m, &i| m | 1 << i);
        done |= this;
        // enumerate subsets of `done` that meet `this`
        let mut sub = done;
        while sub != 0 {
            if sub & this != 0 {
                let s = Coalition::from_mask(sub);
                if instance.is_coalition(s.members())? {
                    let bound = match msr.get(&sub) {
                        Some(&b) => b,
                        None => {
                            let b = min_sum_rate(instance, &s)?;
                            msr.insert(sub, b);
                            b
                        }
                    };
                    if wave.round as u64 > bound {
                        out.push(WaveBoundViolation { wave_round: wave.round, coalition: s, min_sum_rate: bound });
                    }
                }
            }
            sub = (sub - 1) & done;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
