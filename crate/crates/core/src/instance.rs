//! Problem instances: `n` users, `k` packets, and who holds what.
//!
//! Users and packets are 0-based in memory. The JSON interchange format and all
//! human-facing output use 1-based indices.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::field::{is_prime, next_prime, PrimeField, SubspaceBasis};

/// Largest `n` for which coalitions are enumerated.
pub const MAX_ENUMERATED_USERS: usize = 20;

/// Regeneration budget for [`generate`] when every user comes out omniscient.
pub const GENERATE_ATTEMPTS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("malformed instance JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("invalid instance field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("user index {user} out of range 1..={n}")]
    UserOutOfRange { user: usize, n: usize },
    #[error("empty user set")]
    EmptySubset,
    #[error("coalition enumeration needs n <= {max}, got n = {n}")]
    TooManyUsers { n: usize, max: usize },
    #[error("invalid generator parameters: {0}")]
    BadParameters(String),
    #[error("no instance with a non-omniscient user after {0} attempts")]
    Degenerate(usize),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> InstanceError {
    InstanceError::Invalid { field: field.into(), message: message.into() }
}

/// Compact packet set over `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PacketSet {
    words: Vec<u64>,
}

impl PacketSet {
    pub fn empty(k: usize) -> Self {
        PacketSet { words: vec![0; k.div_ceil(64)] }
    }

    pub fn full(k: usize) -> Self {
        let mut s = Self::empty(k);
        for p in 0..k {
            s.insert(p);
        }
        s
    }

    pub fn insert(&mut self, p: usize) {
        self.words[p / 64] |= 1 << (p % 64);
    }

    pub fn contains(&self, p: usize) -> bool {
        self.words[p / 64] >> (p % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersect_with(&mut self, other: &PacketSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn union_with(&mut self, other: &PacketSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }
}

/// A nonempty set of users (0-based, sorted).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coalition {
    members: Vec<usize>,
}

impl Coalition {
    /// Users are 0-based; duplicates are dropped.
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Coalition { members }
    }

    pub fn grand(n: usize) -> Self {
        Coalition { members: (0..n).collect() }
    }

    /// Bitmask with bit `i` set for each member `i` (requires members < 64).
    pub fn from_mask(mask: u64) -> Self {
        Coalition { members: (0..64).filter(|i| mask >> i & 1 == 1).collect() }
    }

    pub fn mask(&self) -> u64 {
        self.members.iter().fold(0, |m, &i| m | 1 << i)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, user: usize) -> bool {
        self.members.binary_search(&user).is_ok()
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (j, i) in self.members.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// Wire form of an [`Instance`]; field order is the rendering order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    k: usize,
    q: u64,
    holdings: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    n: usize,
    k: usize,
    field: PrimeField,
    holdings: Vec<Vec<usize>>,
    has: Vec<PacketSet>,
}

impl Instance {
    /// Builds a validated instance from 0-based holdings.
    pub fn new(k: usize, q: u64, holdings: Vec<Vec<usize>>) -> Result<Self, InstanceError> {
        let n = holdings.len();
        if n < 2 {
            return Err(invalid("n", format!("n must be ≥ 2, got {n}")));
        }
        if k < 1 {
            return Err(invalid("k", "k must be ≥ 1"));
        }
        if !is_prime(q) || q > u64::from(u32::MAX) {
            return Err(invalid("q", format!("{q} is not a prime below 2^32")));
        }
        if q < n as u64 {
            return Err(invalid("q", format!("q = {q} must be >= n = {n}")));
        }
        let field = PrimeField::new(q).expect("checked prime");
        let mut has = Vec::with_capacity(n);
        let mut sorted_holdings = Vec::with_capacity(n);
        let mut union = PacketSet::empty(k);
        for (i, mut xs) in holdings.into_iter().enumerate() {
            xs.sort_unstable();
            let mut set = PacketSet::empty(k);
            for (j, &p) in xs.iter().enumerate() {
                if p >= k {
                    return Err(invalid(format!("holdings[{i}][{j}]"), format!("packet index {} out of range 1..={k}", p + 1)));
                }
                if set.contains(p) {
                    return Err(invalid(format!("holdings[{i}]"), format!("packet {} listed twice", p + 1)));
                }
                set.insert(p);
            }
            union.union_with(&set);
            has.push(set);
            sorted_holdings.push(xs);
        }
        if union.len() != k {
            let missing: Vec<usize> = (0..k).filter(|&p| !union.contains(p)).map(|p| p + 1).collect();
            return Err(invalid("holdings", format!("packets {missing:?} are held by no user")));
        }
        Ok(Instance { n, k, field, holdings: sorted_holdings, has })
    }

    /// Same as [`Instance::new`] with the default field size: smallest prime `>= n·k`.
    pub fn with_default_q(k: usize, holdings: Vec<Vec<usize>>) -> Result<Self, InstanceError> {
        let q = default_q(holdings.len(), k);
        Self::new(k, q, holdings)
    }

    /// Re-validates with a different field size.
    pub fn with_q(&self, q: u64) -> Result<Self, InstanceError> {
        Self::new(self.k, q, self.holdings.clone())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> u64 {
        u64::from(self.field.order())
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    /// `X_i`, 0-based sorted packet indices.
    pub fn holdings(&self, user: usize) -> &[usize] {
        &self.holdings[user]
    }

    pub fn has(&self, user: usize) -> &PacketSet {
        &self.has[user]
    }

    /// `X̄_i`, the packets user `i` is missing.
    pub fn wants(&self, user: usize) -> PacketSet {
        let mut s = PacketSet::empty(self.k);
        for p in (0..self.k).filter(|&p| !self.has[user].contains(p)) {
            s.insert(p);
        }
        s
    }

    pub fn num_has(&self, user: usize) -> usize {
        self.holdings[user].len()
    }

    pub fn num_wants(&self, user: usize) -> usize {
        self.k - self.holdings[user].len()
    }

    /// Initial knowledge `span(U_i)`.
    pub fn initial_knowledge(&self, user: usize) -> SubspaceBasis {
        SubspaceBasis::coordinate(self.k, self.holdings[user].iter().copied())
    }

    pub fn is_omniscient(&self, user: usize) -> bool {
        self.holdings[user].len() == self.k
    }

    pub fn users(&self) -> std::ops::Range<usize> {
        0..self.n
    }

    fn check_users(&self, users: &[usize]) -> Result<(), InstanceError> {
        if users.is_empty() {
            return Err(InstanceError::EmptySubset);
        }
        match users.iter().find(|&&u| u >= self.n) {
            Some(&u) => Err(InstanceError::UserOutOfRange { user: u + 1, n: self.n }),
            None => Ok(()),
        }
    }

    /// True iff the users in `users` jointly hold every packet.
    pub fn is_coalition(&self, users: &[usize]) -> Result<bool, InstanceError> {
        self.check_users(users)?;
        let mut union = PacketSet::empty(self.k);
        for &u in users {
            union.union_with(&self.has[u]);
        }
        Ok(union.len() == self.k)
    }

    /// Validated [`Coalition`] for `users`; errors if they do not cover every packet.
    pub fn coalition(&self, users: &[usize]) -> Result<Coalition, InstanceError> {
        if !self.is_coalition(users)? {
            return Err(invalid("coalition", format!("{} does not cover all packets", Coalition::new(users.to_vec()))));
        }
        Ok(Coalition::new(users.to_vec()))
    }

    /// Every proper coalition `S ⊂ N`, in lexicographic order of member lists.
    pub fn minor_coalitions(&self) -> Result<Vec<Coalition>, InstanceError> {
        if self.n > MAX_ENUMERATED_USERS {
            return Err(InstanceError::TooManyUsers { n: self.n, max: MAX_ENUMERATED_USERS });
        }
        let grand = (1u64 << self.n) - 1;
        let mut out: Vec<Coalition> = (1..grand)
            .filter(|&mask| {
                let mut union = PacketSet::empty(self.k);
                for u in (0..self.n).filter(|u| mask >> u & 1 == 1) {
                    union.union_with(&self.has[u]);
                }
                union.len() == self.k
            })
            .map(Coalition::from_mask)
            .collect();
        out.sort();
        Ok(out)
    }

    /// The sub-instance seen by the users of `s` alone (renumbered `0..|s|` in member
    /// order, same field). `s` must be a coalition of at least two users.
    pub fn restricted(&self, s: &Coalition) -> Result<Instance, InstanceError> {
        self.coalition(s.members())?;
        let holdings = s.members().iter().map(|&i| self.holdings[i].clone()).collect();
        Instance::new(self.k, self.q(), holdings)
    }

    /// Canonical one-line JSON with 1-based indices.
    pub fn render(&self) -> String {
        let file = InstanceFile {
            n: self.n,
            k: self.k,
            q: self.q(),
            holdings: self.holdings.iter().map(|xs| xs.iter().map(|p| p + 1).collect()).collect(),
        };
        let mut s = serde_json::to_string(&file).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| InstanceError::Json { line: e.line(), column: e.column(), message: e.to_string() })?;
        if file.holdings.len() != file.n {
            return Err(invalid("holdings", format!("expected {} user entries, found {}", file.n, file.holdings.len())));
        }
        let mut holdings = Vec::with_capacity(file.n);
        for (i, xs) in file.holdings.into_iter().enumerate() {
            let mut zero_based = Vec::with_capacity(xs.len());
            for (j, p) in xs.into_iter().enumerate() {
                if p == 0 || p > file.k {
                    return Err(invalid(format!("holdings[{i}][{j}]"), format!("packet index {p} out of range 1..={}", file.k)));
                }
                zero_based.push(p - 1);
            }
            holdings.push(zero_based);
        }
        if file.k == 0 {
            return Err(invalid("k", "k must be ≥ 1"));
        }
        Self::new(file.k, file.q, holdings)
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.render().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Smallest prime `>= n·k`, which also satisfies `q >= n`.
pub fn default_q(n: usize, k: usize) -> u64 {
    next_prime((n as u64 * k as u64).max(n as u64))
}

/// Random covering instance with at least one non-omniscient user.
///
/// Each packet goes to each user independently with probability `density`; packets nobody
/// received are handed to a seed-chosen user. Draws that leave every user omniscient are
/// redrawn up to [`GENERATE_ATTEMPTS`] times.
pub fn generate(n: usize, k: usize, density: f64, seed: u64) -> Result<Instance, InstanceError> {
    if n < 2 {
        return Err(InstanceError::BadParameters("n must be ≥ 2".into()));
    }
    if k < 1 {
        return Err(InstanceError::BadParameters("k must be ≥ 1".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(InstanceError::BadParameters(format!("density must be in (0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GENERATE_ATTEMPTS {
        let mut holdings: Vec<Vec<usize>> = vec![Vec::new(); n];
        for xs in holdings.iter_mut() {
            for p in 0..k {
                if rng.gen_bool(density) {
                    xs.push(p);
                }
            }
        }
        for p in 0..k {
            if !holdings.iter().any(|xs| xs.contains(&p)) {
                let owner = rng.gen_range(0..n);
                holdings[owner].push(p);
            }
        }
        if holdings.iter().all(|xs| xs.len() == k) {
            continue;
        }
        return Instance::with_default_q(k, holdings);
    }
    Err(InstanceError::Degenerate(GENERATE_ATTEMPTS))
}
