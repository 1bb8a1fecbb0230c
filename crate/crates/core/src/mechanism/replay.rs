//! Independent re-simulation of a transcript against its instance.

use std::fmt;

use thiserror::Error;

use super::{expected_delta, max_knowledge, neediest, receivers, transcript, waves_from, Transcript, Variant};
use crate::economics::payments::BrokerLedger;
use crate::field::SubspaceBasis;
use crate::instance::{Instance, InstanceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    RoundNumbering,
    TransmitterNotMaximal,
    TSetMismatch,
    RSetMismatch,
    PSetMismatch,
    MalformedVector,
    VectorOutsideTransmitterSpan,
    VectorNotInnovative,
    VectorInnovativeOutsideR,
    PaymentDeltaMismatch,
    NotOmniscient,
    CompletionMismatch,
    WaveMismatch,
}

impl ViolationKind {
    pub fn label(self) -> &'static str {
        match self {
            ViolationKind::RoundNumbering => "round numbering",
            ViolationKind::TransmitterNotMaximal => "transmitter not in T_l",
            ViolationKind::TSetMismatch => "T_l mismatch",
            ViolationKind::RSetMismatch => "R_l mismatch",
            ViolationKind::PSetMismatch => "P_l mismatch",
            ViolationKind::MalformedVector => "malformed encoding vector",
            ViolationKind::VectorOutsideTransmitterSpan => "v outside span(U_t)",
            ViolationKind::VectorNotInnovative => "v not innovative for users in R_l",
            ViolationKind::VectorInnovativeOutsideR => "v innovative for users outside R_l",
            ViolationKind::PaymentDeltaMismatch => "payment delta mismatch",
            ViolationKind::NotOmniscient => "final dimension below k",
            ViolationKind::CompletionMismatch => "completion round mismatch",
            ViolationKind::WaveMismatch => "wave mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based round, or `None` for end-of-run checks.
    pub round: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.round {
            Some(l) => write!(f, "round {l}: {} ({})", self.kind.label(), self.detail),
            None => write!(f, "final: {} ({})", self.kind.label(), self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerificationReport {
    pub rounds_checked: usize,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("transcript was produced for instance {expected}, not {found}")]
    DigestMismatch { expected: String, found: String },
    #[error("transcript covers {transcript} users, instance has {instance}")]
    UserCount { transcript: usize, instance: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

fn users(xs: &[usize]) -> String {
    let v: Vec<usize> = xs.iter().map(|i| i + 1).collect();
    format!("{v:?}")
}

/// Re-simulates every round from the initial holdings and lists each disagreement.
pub fn replay_verify(instance: &Instance, transcript: &Transcript) -> Result<VerificationReport, ReplayError> {
    let digest = instance.digest();
    if transcript.instance_digest != digest {
        return Err(ReplayError::DigestMismatch { expected: transcript.instance_digest.clone(), found: digest });
    }
    if transcript.n() != instance.n() {
        return Err(ReplayError::UserCount { transcript: transcript.n(), instance: instance.n() });
    }
    let instance = instance.with_q(transcript.q)?;
    let field = *instance.field();
    let variant = transcript.config.variant;
    let initial: Vec<SubspaceBasis> = instance.users().map(|i| instance.initial_knowledge(i)).collect();
    let mut knowledge = initial.clone();
    let mut ledger = BrokerLedger::zeros(instance.n());
    let mut completion = vec![0usize; instance.n()];
    let mut report = VerificationReport::default();

    for (idx, rec) in transcript.rounds.iter().enumerate() {
        let l = idx + 1;
        let mut flag = |kind: ViolationKind, detail: String| report.violations.push(Violation { round: Some(l), kind, detail });
        if rec.round != l {
            flag(ViolationKind::RoundNumbering, format!("recorded as round {}", rec.round));
        }
        let t = rec.transmitter;

        let t_set = max_knowledge(&knowledge);
        if !t_set.contains(&t) {
            flag(ViolationKind::TransmitterNotMaximal, format!("user {} not in T_l = {}", t + 1, users(&t_set)));
        }
        if rec.t_set != t_set {
            flag(ViolationKind::TSetMismatch, format!("recorded {}, recomputed {}", users(&rec.t_set), users(&t_set)));
        }
        let r_set = receivers(&field, &initial[t], &knowledge);
        if rec.r_set != r_set {
            flag(ViolationKind::RSetMismatch, format!("recorded {}, recomputed {}", users(&rec.r_set), users(&r_set)));
        }
        let p_set = match variant {
            Variant::Broker => Some(neediest(&instance, ledger.minus())),
            Variant::PeerPayments => None,
        };
        if rec.p_set != p_set {
            flag(
                ViolationKind::PSetMismatch,
                format!("recorded {:?}, recomputed {:?}", rec.p_set.as_deref().map(users), p_set.as_deref().map(users)),
            );
        }
        let expected = expected_delta(variant, t, &r_set, p_set.as_deref());
        if rec.payment_delta != expected {
            flag(ViolationKind::PaymentDeltaMismatch, format!("recorded {:?}, expected {:?}", rec.payment_delta, expected));
        }
        transcript::apply_delta(&mut ledger, &rec.payment_delta);

        if rec.v.len() != instance.k() {
            flag(ViolationKind::MalformedVector, format!("length {} instead of {}", rec.v.len(), instance.k()));
            continue;
        }
        if !initial[t].contains(&field, &rec.v).expect("length checked") {
            flag(ViolationKind::VectorOutsideTransmitterSpan, format!("user {} does not hold every packet in the support", t + 1));
        }
        let mut missed = Vec::new();
        let mut extra = Vec::new();
        for (i, basis) in knowledge.iter_mut().enumerate() {
            let innovative = basis.insert_mut(&field, &rec.v).expect("length checked");
            match (innovative, rec.r_set.contains(&i)) {
                (false, true) => missed.push(i),
                (true, false) => extra.push(i),
                _ => {}
            }
            if innovative && basis.is_full() {
                completion[i] = l;
            }
        }
        if !missed.is_empty() {
            flag(ViolationKind::VectorNotInnovative, format!("no new information for {}", users(&missed)));
        }
        if !extra.is_empty() {
            flag(ViolationKind::VectorInnovativeOutsideR, format!("new information for {}", users(&extra)));
        }
        report.rounds_checked += 1;
    }

    let mut flag = |kind: ViolationKind, detail: String| report.violations.push(Violation { round: None, kind, detail });
    let short: Vec<usize> = (0..knowledge.len()).filter(|&i| !knowledge[i].is_full()).collect();
    if !short.is_empty() {
        flag(ViolationKind::NotOmniscient, format!("users {} end below dimension {}", users(&short), instance.k()));
    }
    if transcript.completion_round != completion {
        flag(ViolationKind::CompletionMismatch, format!("recorded {:?}, replayed {:?}", transcript.completion_round, completion));
    }
    if transcript.waves != waves_from(&completion) {
        flag(ViolationKind::WaveMismatch, "waves do not partition users by completion round".into());
    }
    Ok(report)
}
