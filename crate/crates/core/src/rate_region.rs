//! Cut-set description of the omniscience-achieving rate region and a brute-force
//! minimum sum-rate oracle.
//!
//! For a coalition `S`, an integer rate vector `r` supported on `S` lets every member of
//! `S` decode everything iff for each nonempty proper `T ⊂ S` the users in `T` send at
//! least as many packets as the users outside `T` (within `S`) are all jointly missing:
//! `r_T >= |∩_{j ∈ S∖T} X̄_j|`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Coalition, Instance, InstanceError, PacketSet};

/// Largest coalition `is_achieving` will enumerate cuts for.
pub const MAX_CUT_USERS: usize = 20;
/// Oracle budget: coalition size.
pub const MAX_ORACLE_USERS: usize = 8;
/// Oracle budget: packet count.
pub const MAX_ORACLE_PACKETS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RateError {
    #[error("rate vector has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("user {user} is outside the coalition but has rate {rate}")]
    Support { user: usize, rate: u64 },
    #[error("{what}: {found} exceeds the enumeration budget of {max}")]
    Budget { what: &'static str, found: usize, max: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Nonnegative integer transmission counts, one per user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateVector(Vec<u64>);

impl RateVector {
    pub fn zeros(n: usize) -> Self {
        RateVector(vec![0; n])
    }

    pub fn rates(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, user: usize) -> u64 {
        self.0[user]
    }

    pub fn increment(&mut self, user: usize) {
        self.0[user] += 1;
    }

    /// `r_N`
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// `r_S`
    pub fn sum_over(&self, users: &[usize]) -> u64 {
        users.iter().map(|&i| self.0[i]).sum()
    }

    /// Errors unless every user outside `s` has rate zero.
    pub fn check_support(&self, s: &Coalition) -> Result<(), RateError> {
        match (0..self.0.len()).find(|&i| !s.contains(i) && self.0[i] != 0) {
            Some(user) => Err(RateError::Support { user: user + 1, rate: self.0[user] }),
            None => Ok(()),
        }
    }
}

impl From<Vec<u64>> for RateVector {
    fn from(v: Vec<u64>) -> Self {
        RateVector(v)
    }
}

impl fmt::Display for RateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

fn check_coalition(instance: &Instance, s: &Coalition) -> Result<(), RateError> {
    instance.coalition(s.members())?;
    Ok(())
}

fn check_length(instance: &Instance, r: &RateVector) -> Result<(), RateError> {
    if r.len() != instance.n() {
        return Err(RateError::Length { expected: instance.n(), found: r.len() });
    }
    Ok(())
}

/// `|∩_{j ∈ outside} X̄_j|` where `outside` is a bitmask over positions in `members`.
fn joint_wants(instance: &Instance, members: &[usize], outside: u64) -> usize {
    let mut acc = PacketSet::full(instance.k());
    for (pos, &j) in members.iter().enumerate() {
        if outside >> pos & 1 == 1 {
            acc.intersect_with(&instance.wants(j));
        }
    }
    acc.len()
}

/// True iff `r ∈ R_S`.
pub fn is_achieving(instance: &Instance, s: &Coalition, r: &RateVector) -> Result<bool, RateError> {
    check_length(instance, r)?;
    check_coalition(instance, s)?;
    r.check_support(s)?;
    if s.len() > MAX_CUT_USERS {
        return Err(RateError::Budget { what: "coalition size", found: s.len(), max: MAX_CUT_USERS });
    }
    let members = s.members();
    let all = (1u64 << members.len()) - 1;
    for inside in 1..all {
        let sent: u64 = members.iter().enumerate().filter(|(pos, _)| inside >> pos & 1 == 1).map(|(_, &i)| r.get(i)).sum();
        if sent < joint_wants(instance, members, all & !inside) as u64 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Cut bounds indexed by the inside-mask over coalition positions; entry 0 and the
/// full mask are unused (zero).
struct CutTable {
    bounds: Vec<u64>,
}

impl CutTable {
    fn new(instance: &Instance, members: &[usize]) -> Self {
        let m = members.len();
        let all = (1u64 << m) - 1;
        let bounds = (0..=all)
            .map(|inside| if inside == 0 || inside == all { 0 } else { joint_wants(instance, members, all & !inside) as u64 })
            .collect();
        CutTable { bounds }
    }

    fn max_bound(&self) -> u64 {
        self.bounds.iter().copied().max().unwrap_or(0)
    }

    fn satisfied_by(&self, rates: &[u64]) -> bool {
        let m = rates.len();
        let mut sums = vec![0u64; 1 << m];
        for inside in 1..sums.len() {
            let low = inside.trailing_zeros() as usize;
            sums[inside] = sums[inside & (inside - 1)] + rates[low];
            if sums[inside] < self.bounds[inside] {
                return false;
            }
        }
        true
    }
}

fn check_budget(instance: &Instance, s: &Coalition) -> Result<(), RateError> {
    if s.len() > MAX_ORACLE_USERS {
        return Err(RateError::Budget { what: "coalition size", found: s.len(), max: MAX_ORACLE_USERS });
    }
    if instance.k() > MAX_ORACLE_PACKETS {
        return Err(RateError::Budget { what: "packet count", found: instance.k(), max: MAX_ORACLE_PACKETS });
    }
    Ok(())
}

/// Calls `visit` on every vector of `m` parts in `0..=cap` summing to `total`, in
/// lexicographic order, stopping early once `visit` returns true.
fn compositions(m: usize, total: u64, cap: u64, visit: &mut dyn FnMut(&[u64]) -> bool) -> bool {
    fn go(buf: &mut Vec<u64>, m: usize, left: u64, cap: u64, visit: &mut dyn FnMut(&[u64]) -> bool) -> bool {
        if buf.len() + 1 == m {
            if left > cap {
                return false;
            }
            buf.push(left);
            let stop = visit(buf);
            buf.pop();
            return stop;
        }
        let rest = (m - buf.len() - 1) as u64;
        for x in 0..=left.min(cap) {
            if left - x > rest * cap {
                continue;
            }
            buf.push(x);
            let stop = go(buf, m, left - x, cap, visit);
            buf.pop();
            if stop {
                return true;
            }
        }
        false
    }
    go(&mut Vec::with_capacity(m), m, total, cap, visit)
}

/// Minimum `r_S` over integer `r ∈ R_S`, with the first minimizer in (ascending sum,
/// lexicographic) order as witness.
pub fn min_sum_rate_witness(instance: &Instance, s: &Coalition) -> Result<(u64, RateVector), RateError> {
    check_coalition(instance, s)?;
    check_budget(instance, s)?;
    let members = s.members();
    let m = members.len();
    let cap = instance.k() as u64;
    let table = CutTable::new(instance, members);
    for total in table.max_bound()..=(m as u64 * cap) {
        let mut found = None;
        compositions(m, total, cap, &mut |rates| {
            if table.satisfied_by(rates) {
                found = Some(rates.to_vec());
                true
            } else {
                false
            }
        });
        if let Some(rates) = found {
            let mut r = RateVector::zeros(instance.n());
            for (&i, &x) in members.iter().zip(&rates) {
                r.0[i] = x;
            }
            return Ok((total, r));
        }
    }
    unreachable!("r_i = k for every member satisfies every cut")
}

pub fn min_sum_rate(instance: &Instance, s: &Coalition) -> Result<u64, RateError> {
    min_sum_rate_witness(instance, s).map(|(total, _)| total)
}

/// Every integer `r ∈ R_S` with `r_S <= max_total`, ascending by sum then lexicographic.
pub fn achieving_vectors_up_to(instance: &Instance, s: &Coalition, max_total: u64) -> Result<Vec<RateVector>, RateError> {
    check_coalition(instance, s)?;
    check_budget(instance, s)?;
    let members = s.members();
    let table = CutTable::new(instance, members);
    let mut out = Vec::new();
    for total in 0..=max_total {
        compositions(members.len(), total, instance.k() as u64, &mut |rates| {
            if table.satisfied_by(rates) {
                let mut r = RateVector::zeros(instance.n());
                for (&i, &x) in members.iter().zip(rates) {
                    r.0[i] = x;
                }
                out.push(r);
            }
            false
        });
    }
    Ok(out)
}

/// `max_{i ∈ S} |∩_{j ∈ S∖{i}} X̄_j|`, a lower bound on the minimum sum-rate of `S`
/// (zero for singletons).
pub fn singleton_cut_bound(instance: &Instance, s: &Coalition) -> u64 {
    let members = s.members();
    if members.len() < 2 {
        return 0;
    }
    let all = (1u64 << members.len()) - 1;
    (0..members.len()).map(|pos| joint_wants(instance, members, all & !(1 << pos)) as u64).max().unwrap_or(0)
}

/// Checks `min_sum_rate(N) <= min_i |X̄_i| + max_i |X̄_i|`; false means the oracle is wrong.
pub fn min_sum_rate_bound_check(instance: &Instance) -> Result<bool, RateError> {
    let total = min_sum_rate(instance, &Coalition::grand(instance.n()))?;
    let wants = instance.users().map(|i| instance.num_wants(i) as u64);
    let lo = wants.clone().min().unwrap_or(0);
    let hi = wants.max().unwrap_or(0);
    Ok(total <= lo + hi)
}
