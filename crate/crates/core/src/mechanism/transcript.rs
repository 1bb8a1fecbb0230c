//! Round-by-round record of a mechanism run and its JSON file format.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MechanismConfig;
use crate::economics::payments::{BrokerLedger, PaymentMatrix, Rational, RationalJson};
use crate::field::{FieldElement, PacketVector};
use crate::rate_region::RateVector;

/// `amount` paid by `from` to `to` in a single round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer {
    pub from: usize,
    pub to: usize,
    pub amount: Rational,
}

/// Payment increments applied in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PaymentDelta {
    /// Peer payments: every receiver of the round pays the transmitter.
    Peer(Vec<Transfer>),
    /// Broker clearing: one user is credited, a set of users is debited.
    Broker { credit: (usize, Rational), debits: Vec<(usize, Rational)> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    /// 1-based round index `l`.
    pub round: usize,
    pub transmitter: usize,
    /// Users of maximum knowledge dimension at the start of the round.
    pub t_set: Vec<usize>,
    /// Users whose knowledge did not contain the transmitter's initial packets.
    pub r_set: Vec<usize>,
    /// Broker rounds only: users of maximum `|X̄_i| - p⁻_i`.
    pub p_set: Option<Vec<usize>>,
    pub v: PacketVector,
    pub payment_delta: PaymentDelta,
}

/// Users reaching omniscience together, and the round at which they do (0 for users who
/// start omniscient).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wave {
    pub round: usize,
    pub users: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub instance_digest: String,
    pub q: u64,
    pub config: MechanismConfig,
    pub rounds: Vec<RoundRecord>,
    /// Per user, the round at which its knowledge reached dimension `k`.
    pub completion_round: Vec<usize>,
    pub waves: Vec<Wave>,
}

/// Groups users by completion round, ascending.
pub fn waves_from(completion_round: &[usize]) -> Vec<Wave> {
    let mut rounds: Vec<usize> = completion_round.to_vec();
    rounds.sort_unstable();
    rounds.dedup();
    rounds
        .into_iter()
        .map(|round| Wave { round, users: (0..completion_round.len()).filter(|&i| completion_round[i] == round).collect() })
        .collect()
}

impl Transcript {
    pub fn n(&self) -> usize {
        self.completion_round.len()
    }

    pub fn rates(&self) -> RateVector {
        let mut r = RateVector::zeros(self.n());
        for round in &self.rounds {
            r.increment(round.transmitter);
        }
        r
    }

    /// Peer matrix accumulated from `Peer` deltas (broker rounds contribute nothing).
    pub fn peer_matrix(&self) -> PaymentMatrix {
        let mut p = PaymentMatrix::zeros(self.n());
        for round in &self.rounds {
            if let PaymentDelta::Peer(transfers) = &round.payment_delta {
                for t in transfers {
                    p.pay(t.from, t.to, &t.amount);
                }
            }
        }
        p
    }

    /// `(p⁺, p⁻)` after every round prefix; entry 0 is the all-zero starting ledger.
    pub fn ledger_prefixes(&self) -> Vec<BrokerLedger> {
        let mut cur = BrokerLedger::zeros(self.n());
        let mut out = vec![cur.clone()];
        for round in &self.rounds {
            apply_delta(&mut cur, &round.payment_delta);
            out.push(cur.clone());
        }
        out
    }

    pub fn ledger(&self) -> BrokerLedger {
        self.ledger_prefixes().pop().expect("at least the starting ledger")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&TranscriptFile::from_transcript(self)).expect("transcript serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, TranscriptError> {
        let file: TranscriptFile =
            serde_json::from_str(text).map_err(|e| TranscriptError::Json { line: e.line(), column: e.column(), message: e.to_string() })?;
        file.into_transcript()
    }
}

pub(crate) fn apply_delta(ledger: &mut BrokerLedger, delta: &PaymentDelta) {
    match delta {
        PaymentDelta::Peer(transfers) => {
            for t in transfers {
                ledger.credit(t.to, &t.amount);
                ledger.debit(t.from, &t.amount);
            }
        }
        PaymentDelta::Broker { credit, debits } => {
            ledger.credit(credit.0, &credit.1);
            for (i, amount) in debits {
                ledger.debit(*i, amount);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("malformed transcript JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("invalid transcript field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

// Wire structs below use 1-based user indices.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TranscriptFile {
    instance_digest: String,
    q: u64,
    config: MechanismConfig,
    rounds: Vec<RoundFile>,
    completion_round: Vec<usize>,
    waves: Vec<Wave>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoundFile {
    round: usize,
    transmitter: usize,
    t_set: Vec<usize>,
    r_set: Vec<usize>,
    p_set: Option<Vec<usize>>,
    v: Vec<u32>,
    payment_delta: DeltaFile,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DeltaFile {
    Peer { transfers: Vec<TransferFile> },
    Broker { credit: EntryFile, debits: Vec<EntryFile> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransferFile {
    from: usize,
    to: usize,
    amount: RationalJson,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    user: usize,
    amount: RationalJson,
}

fn one_based(xs: &[usize]) -> Vec<usize> {
    xs.iter().map(|i| i + 1).collect()
}

impl TranscriptFile {
    fn from_transcript(t: &Transcript) -> Self {
        TranscriptFile {
            instance_digest: t.instance_digest.clone(),
            q: t.q,
            config: t.config.clone(),
            rounds: t
                .rounds
                .iter()
                .map(|r| RoundFile {
                    round: r.round,
                    transmitter: r.transmitter + 1,
                    t_set: one_based(&r.t_set),
                    r_set: one_based(&r.r_set),
                    p_set: r.p_set.as_deref().map(one_based),
                    v: r.v.values(),
                    payment_delta: match &r.payment_delta {
                        PaymentDelta::Peer(ts) => DeltaFile::Peer {
                            transfers: ts
                                .iter()
                                .map(|t| TransferFile { from: t.from + 1, to: t.to + 1, amount: RationalJson::from_rational(&t.amount) })
                                .collect(),
                        },
                        PaymentDelta::Broker { credit, debits } => DeltaFile::Broker {
                            credit: EntryFile { user: credit.0 + 1, amount: RationalJson::from_rational(&credit.1) },
                            debits: debits.iter().map(|(i, a)| EntryFile { user: i + 1, amount: RationalJson::from_rational(a) }).collect(),
                        },
                    },
                })
                .collect(),
            completion_round: t.completion_round.clone(),
            waves: t.waves.iter().map(|w| Wave { round: w.round, users: one_based(&w.users) }).collect(),
        }
    }

    fn into_transcript(self) -> Result<Transcript, TranscriptError> {
        let n = self.completion_round.len();
        let user = |field: String, u: usize| -> Result<usize, TranscriptError> {
            if u == 0 || u > n {
                Err(TranscriptError::Invalid { field, message: format!("user {u} out of range 1..={n}") })
            } else {
                Ok(u - 1)
            }
        };
        let users =
            |field: String, us: &[usize]| -> Result<Vec<usize>, TranscriptError> { us.iter().map(|&u| user(field.clone(), u)).collect() };
        let amount = |field: String, a: &RationalJson| -> Result<Rational, TranscriptError> {
            a.to_rational().map_err(|e| TranscriptError::Invalid { field, message: e.to_string() })
        };
        let mut rounds = Vec::with_capacity(self.rounds.len());
        for (idx, r) in self.rounds.iter().enumerate() {
            let at = |name: &str| format!("rounds[{idx}].{name}");
            if r.v.iter().any(|&c| u64::from(c) >= self.q) {
                return Err(TranscriptError::Invalid { field: at("v"), message: format!("entry outside GF({})", self.q) });
            }
            let payment_delta = match &r.payment_delta {
                DeltaFile::Peer { transfers } => PaymentDelta::Peer(
                    transfers
                        .iter()
                        .map(|t| {
                            Ok(Transfer {
                                from: user(at("payment_delta"), t.from)?,
                                to: user(at("payment_delta"), t.to)?,
                                amount: amount(at("payment_delta"), &t.amount)?,
                            })
                        })
                        .collect::<Result<_, TranscriptError>>()?,
                ),
                DeltaFile::Broker { credit, debits } => PaymentDelta::Broker {
                    credit: (user(at("payment_delta"), credit.user)?, amount(at("payment_delta"), &credit.amount)?),
                    debits: debits
                        .iter()
                        .map(|d| Ok((user(at("payment_delta"), d.user)?, amount(at("payment_delta"), &d.amount)?)))
                        .collect::<Result<_, TranscriptError>>()?,
                },
            };
            rounds.push(RoundRecord {
                round: r.round,
                transmitter: user(at("transmitter"), r.transmitter)?,
                t_set: users(at("t_set"), &r.t_set)?,
                r_set: users(at("r_set"), &r.r_set)?,
                p_set: r.p_set.as_deref().map(|p| users(at("p_set"), p)).transpose()?,
                v: PacketVector::from_raw(r.v.iter().map(|&c| FieldElement::from_raw(c)).collect()),
                payment_delta,
            });
        }
        let waves = self
            .waves
            .iter()
            .enumerate()
            .map(|(i, w)| Ok(Wave { round: w.round, users: users(format!("waves[{i}]"), &w.users)? }))
            .collect::<Result<_, TranscriptError>>()?;
        Ok(Transcript {
            instance_digest: self.instance_digest,
            q: self.q,
            config: self.config,
            rounds,
            completion_round: self.completion_round,
            waves,
        })
    }
}
