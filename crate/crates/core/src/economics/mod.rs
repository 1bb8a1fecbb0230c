//! Utilities, rationality, stability and optimality of rate-payment pairs.
//!
//! All arithmetic is exact. Utilities follow
//! `u_i = (p⁺_i − r_i) + (|X̄_i| − p⁻_i)`: what a user earns over its own
//! transmissions, plus what it saves relative to paying one unit per wanted packet.

mod optimality;
pub mod payments;
pub mod solution;
mod stability;
pub mod table;

pub use optimality::{check_optimality, utility_comparisons, ComparisonReport, OptimalityVerdict};
pub use stability::{
    blocking_pair_search, check_stability, validate_blocking_pair, BlockingPair, BlockingSearch, CoalitionMargin, StabilityReport,
    MAX_STABILITY_PACKETS, MAX_STABILITY_USERS,
};

use num_traits::Signed;
use thiserror::Error;

use crate::instance::{Coalition, Instance, InstanceError};
use crate::rate_region::{RateError, RateVector};
use payments::{int, PaymentError, Payments, Rational, RationalJson};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EconError {
    #[error("user {user} is out of range 1..={n}")]
    UserOutOfRange { user: usize, n: usize },
    #[error("{what} covers {found} users, instance has {expected}")]
    Shape { what: &'static str, expected: usize, found: usize },
    #[error("{what}: {found} exceeds the budget of {max}")]
    Budget { what: &'static str, found: usize, max: usize },
    #[error("the pair is not rational: {0}")]
    NotRational(String),
    #[error("{which} output is not optimal: {reason}")]
    NotOptimal { which: &'static str, reason: String },
    #[error("could not build a blocking pair for {coalition}: {message}")]
    Witness { coalition: String, message: String },
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Payment(#[from] PaymentError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// A user's utility and its two components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utility {
    pub u: Rational,
    /// `p⁺_i − r_i`
    pub u_plus: Rational,
    /// `|X̄_i| − p⁻_i`
    pub u_minus: Rational,
}

impl Utility {
    pub fn to_json_value(&self) -> serde_json::Value {
        let j = RationalJson::from_rational;
        serde_json::json!({ "u": j(&self.u), "u_plus": j(&self.u_plus), "u_minus": j(&self.u_minus) })
    }
}

fn check_shapes(instance: &Instance, r: &RateVector, payments: &Payments) -> Result<(), EconError> {
    let n = instance.n();
    if r.len() != n {
        return Err(EconError::Shape { what: "rate vector", expected: n, found: r.len() });
    }
    if payments.n() != n {
        return Err(EconError::Shape { what: "payments", expected: n, found: payments.n() });
    }
    Ok(())
}

pub fn utility(instance: &Instance, r: &RateVector, payments: &Payments, i: usize) -> Result<Utility, EconError> {
    check_shapes(instance, r, payments)?;
    if i >= instance.n() {
        return Err(EconError::UserOutOfRange { user: i + 1, n: instance.n() });
    }
    let u_plus = payments.plus(i) - int(r.get(i) as i64);
    let u_minus = int(instance.num_wants(i) as i64) - payments.minus(i);
    Ok(Utility { u: &u_plus + &u_minus, u_plus, u_minus })
}

pub fn utilities(instance: &Instance, r: &RateVector, payments: &Payments) -> Result<Vec<Utility>, EconError> {
    instance.users().map(|i| utility(instance, r, payments, i)).collect()
}

/// Users of `scope` with a negative utility component, with a description of each.
pub fn rationality_violations(
    instance: &Instance,
    r: &RateVector,
    payments: &Payments,
    scope: &Coalition,
) -> Result<Vec<(usize, String)>, EconError> {
    check_shapes(instance, r, payments)?;
    r.check_support(scope)?;
    payments.in_scope(scope)?;
    let mut out = Vec::new();
    for &i in scope.members() {
        let u = utility(instance, r, payments, i)?;
        if u.u_plus.is_negative() {
            out.push((i, format!("u⁺_{} = {}", i + 1, payments::ShowRational(&u.u_plus))));
        }
        if u.u_minus.is_negative() {
            out.push((i, format!("u⁻_{} = {}", i + 1, payments::ShowRational(&u.u_minus))));
        }
    }
    Ok(out)
}

/// Both utility components are nonnegative for every member of `scope`.
pub fn is_rational_pair(instance: &Instance, r: &RateVector, payments: &Payments, scope: &Coalition) -> Result<bool, EconError> {
    rationality_violations(instance, r, payments, scope).map(|v| v.is_empty())
}
