//! Prime-field arithmetic and subspaces of `GF(q)^k` kept in reduced row-echelon form.
//!
//! A packet is identified with its encoding vector, so a user's knowledge is just a
//! [`SubspaceBasis`] and "omniscience" means full rank.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("field size {0} is not a prime below 2^32")]
    NotPrime(u64),
    #[error("dimension mismatch: expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinate {value} at position {index} is outside GF({q})")]
    EntryOutOfRange { index: usize, value: u32, q: u32 },
    #[error("no avoiding vector exists: forbidden subspace #{0} contains the ambient space")]
    AmbientForbidden(usize),
    #[error("deterministic selection needs q > number of forbidden subspaces (q = {q}, forbidden = {forbidden})")]
    FieldTooSmall { q: u32, forbidden: usize },
    #[error("randomized selection gave up after {0} draws")]
    RetriesExhausted(u64),
}

pub type Result<T> = std::result::Result<T, FieldError>;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime `>= n` (and `>= 2`).
pub fn next_prime(n: u64) -> u64 {
    let mut p = n.max(2);
    while !is_prime(p) {
        p += 1;
    }
    p
}

/// An element of a prime field. The modulus lives in the [`PrimeField`] context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElement(u32);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Unchecked; callers validate against the field order.
    pub(crate) fn from_raw(value: u32) -> Self {
        FieldElement(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    q: u32,
}

impl PrimeField {
    pub fn new(q: u64) -> Result<Self> {
        if q > u64::from(u32::MAX) || !is_prime(q) {
            return Err(FieldError::NotPrime(q));
        }
        Ok(PrimeField { q: q as u32 })
    }

    pub fn order(&self) -> u32 {
        self.q
    }

    pub fn element(&self, value: u64) -> FieldElement {
        FieldElement((value % u64::from(self.q)) as u32)
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.q).map(FieldElement)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(((u64::from(a.0) + u64::from(b.0)) % u64::from(self.q)) as u32)
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if a.0 == 0 {
            a
        } else {
            FieldElement(self.q - a.0)
        }
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(((u64::from(a.0) * u64::from(b.0)) % u64::from(self.q)) as u32)
    }

    /// Multiplicative inverse by Fermat's little theorem; `None` for zero.
    pub fn inv(&self, a: FieldElement) -> Option<FieldElement> {
        if a.is_zero() {
            return None;
        }
        let q = u64::from(self.q);
        let (mut base, mut exp, mut acc) = (u64::from(a.0), q - 2, 1u64);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % q;
            }
            base = base * base % q;
            exp >>= 1;
        }
        Some(FieldElement(acc as u32))
    }
}

/// A length-`k` coefficient vector over the packets `x_1..x_k`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PacketVector(Vec<FieldElement>);

impl PacketVector {
    pub fn zero(k: usize) -> Self {
        PacketVector(vec![FieldElement::ZERO; k])
    }

    /// Unit vector for packet `index` (0-based).
    pub fn unit(k: usize, index: usize) -> Self {
        let mut v = Self::zero(k);
        v.0[index] = FieldElement::ONE;
        v
    }

    /// Builds a vector from raw coordinates, checking they lie in `[0, q)`.
    pub fn from_values(field: &PrimeField, values: &[u32]) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if value >= field.order() {
                return Err(FieldError::EntryOutOfRange { index, value, q: field.order() });
            }
        }
        Ok(PacketVector(values.iter().copied().map(FieldElement).collect()))
    }

    pub(crate) fn from_raw(coords: Vec<FieldElement>) -> Self {
        PacketVector(coords)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coords(&self) -> &[FieldElement] {
        &self.0
    }

    pub fn values(&self) -> Vec<u32> {
        self.0.iter().map(|c| c.value()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.is_zero())
    }

    /// Indices of nonzero coordinates.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, _)| i)
    }

    /// `self += c * other`
    fn axpy(&mut self, field: &PrimeField, c: FieldElement, other: &PacketVector) {
        if c.is_zero() {
            return;
        }
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a = field.add(*a, field.mul(c, b));
        }
    }

    fn scale(&mut self, field: &PrimeField, c: FieldElement) {
        for a in &mut self.0 {
            *a = field.mul(*a, c);
        }
    }

    pub fn add(&self, field: &PrimeField, other: &PacketVector) -> PacketVector {
        let mut out = self.clone();
        out.axpy(field, FieldElement::ONE, other);
        out
    }

    pub fn scaled(&self, field: &PrimeField, c: FieldElement) -> PacketVector {
        let mut out = self.clone();
        out.scale(field, c);
        out
    }

    fn check_entries(&self, field: &PrimeField) -> Result<()> {
        for (index, c) in self.0.iter().enumerate() {
            if c.value() >= field.order() {
                return Err(FieldError::EntryOutOfRange { index, value: c.value(), q: field.order() });
            }
        }
        Ok(())
    }
}

/// Canonical (reduced row-echelon) basis of a subspace of `GF(q)^k`.
///
/// Rows are sorted by pivot column; every pivot is 1 and is the only nonzero entry in its
/// column. Two bases of the same subspace are therefore equal element-wise.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubspaceBasis {
    ambient_dim: usize,
    rows: Vec<PacketVector>,
    pivots: Vec<usize>,
}

impl SubspaceBasis {
    pub fn empty(ambient_dim: usize) -> Self {
        SubspaceBasis { ambient_dim, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn full(ambient_dim: usize) -> Self {
        SubspaceBasis {
            ambient_dim,
            rows: (0..ambient_dim).map(|i| PacketVector::unit(ambient_dim, i)).collect(),
            pivots: (0..ambient_dim).collect(),
        }
    }

    /// Span of the unit vectors for the given 0-based packet indices.
    pub fn coordinate(ambient_dim: usize, packets: impl IntoIterator<Item = usize>) -> Self {
        let mut pivots: Vec<usize> = packets.into_iter().collect();
        pivots.sort_unstable();
        pivots.dedup();
        SubspaceBasis { ambient_dim, rows: pivots.iter().map(|&i| PacketVector::unit(ambient_dim, i)).collect(), pivots }
    }

    pub fn span(field: &PrimeField, ambient_dim: usize, vectors: &[PacketVector]) -> Result<Self> {
        let mut basis = Self::empty(ambient_dim);
        for v in vectors {
            basis.insert_mut(field, v)?;
        }
        Ok(basis)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.ambient_dim
    }

    pub fn rows(&self) -> &[PacketVector] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    fn check_vector(&self, field: &PrimeField, v: &PacketVector) -> Result<()> {
        if v.len() != self.ambient_dim {
            return Err(FieldError::DimensionMismatch { expected: self.ambient_dim, found: v.len() });
        }
        v.check_entries(field)
    }

    fn check_same_ambient(&self, other: &SubspaceBasis) -> Result<()> {
        if other.ambient_dim != self.ambient_dim {
            return Err(FieldError::DimensionMismatch { expected: self.ambient_dim, found: other.ambient_dim });
        }
        Ok(())
    }

    /// Residue of `v` after eliminating every pivot column; zero iff `v` is in the span.
    fn reduce(&self, field: &PrimeField, v: &PacketVector) -> PacketVector {
        let mut w = v.clone();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let c = w.0[p];
            if !c.is_zero() {
                w.axpy(field, field.neg(c), row);
            }
        }
        w
    }

    /// Returns the basis of `span(self ∪ {v})` and whether `v` was innovative.
    pub fn insert(&self, field: &PrimeField, v: &PacketVector) -> Result<(SubspaceBasis, bool)> {
        let mut out = self.clone();
        let innovative = out.insert_mut(field, v)?;
        Ok((out, innovative))
    }

    /// In-place variant of [`SubspaceBasis::insert`].
    pub fn insert_mut(&mut self, field: &PrimeField, v: &PacketVector) -> Result<bool> {
        self.check_vector(field, v)?;
        let mut w = self.reduce(field, v);
        let Some(pivot) = w.support().next() else {
            return Ok(false);
        };
        let lead = field.inv(w.0[pivot]).expect("nonzero leading entry");
        w.scale(field, lead);
        for row in &mut self.rows {
            let c = row.0[pivot];
            if !c.is_zero() {
                row.axpy(field, field.neg(c), &w);
            }
        }
        let at = self.pivots.partition_point(|&p| p < pivot);
        self.pivots.insert(at, pivot);
        self.rows.insert(at, w);
        Ok(true)
    }

    pub fn contains(&self, field: &PrimeField, v: &PacketVector) -> Result<bool> {
        self.check_vector(field, v)?;
        Ok(self.reduce(field, v).is_zero())
    }

    /// True iff `span(other) ⊆ span(self)`.
    pub fn contains_subspace(&self, field: &PrimeField, other: &SubspaceBasis) -> Result<bool> {
        self.check_same_ambient(other)?;
        if other.rank() > self.rank() {
            return Ok(false);
        }
        Ok(other.rows.iter().all(|row| self.reduce(field, row).is_zero()))
    }
}

/// How [`select_avoiding`] picks among valid vectors.
pub enum Strategy<'a> {
    /// Greedy coefficient sweep over the canonical ambient basis.
    Deterministic,
    /// Rejection sampling of uniform vectors in the ambient span.
    Randomized(&'a mut dyn RngCore),
}

/// Draw cap for [`Strategy::Randomized`] is `RANDOM_DRAWS_PER_ELEMENT * q`.
pub const RANDOM_DRAWS_PER_ELEMENT: u64 = 64;

/// Picks `v ∈ span(ambient)` lying outside every forbidden subspace.
///
/// Every forbidden subspace must fail to contain `ambient`; otherwise no such vector exists
/// and [`FieldError::AmbientForbidden`] is returned. The deterministic sweep needs
/// `q > forbidden.len()`.
pub fn select_avoiding(
    field: &PrimeField,
    ambient: &SubspaceBasis,
    forbidden: &[&SubspaceBasis],
    strategy: Strategy<'_>,
) -> Result<PacketVector> {
    for (i, f) in forbidden.iter().enumerate() {
        if f.contains_subspace(field, ambient)? {
            return Err(FieldError::AmbientForbidden(i));
        }
    }
    let avoids = |v: &PacketVector| forbidden.iter().all(|f| !f.reduce(field, v).is_zero());
    let v = match strategy {
        Strategy::Deterministic => {
            if (field.order() as usize) <= forbidden.len() {
                return Err(FieldError::FieldTooSmall { q: field.order(), forbidden: forbidden.len() });
            }
            sweep(field, ambient, forbidden)
        }
        Strategy::Randomized(rng) => {
            let cap = RANDOM_DRAWS_PER_ELEMENT * u64::from(field.order());
            let mut found = None;
            for _ in 0..cap {
                let mut v = PacketVector::zero(ambient.ambient_dim());
                for row in ambient.rows() {
                    v.axpy(field, FieldElement(rng.gen_range(0..field.order())), row);
                }
                if avoids(&v) {
                    found = Some(v);
                    break;
                }
            }
            found.ok_or(FieldError::RetriesExhausted(cap))?
        }
    };
    debug_assert!(ambient.reduce(field, &v).is_zero() && avoids(&v));
    Ok(v)
}

// Invariant after processing rows b_1..b_j: v avoids every forbidden subspace that does not
// already contain span(b_1..b_j). Each such subspace rules out at most one coefficient for
// the next row, so q > |forbidden| always leaves a candidate.
//
// Nonzero coefficients are tried first and zero last: sparse vectors such as `x_1 + x_4`
// pass the avoidance test but are structurally degenerate, and on some instances they lead
// the greedy schedule into more transmissions than necessary.
fn sweep(field: &PrimeField, ambient: &SubspaceBasis, forbidden: &[&SubspaceBasis]) -> PacketVector {
    let rows = ambient.rows();
    let mut v = rows[0].clone();
    let mut prefix = SubspaceBasis::empty(ambient.ambient_dim());
    prefix.insert_mut(field, &rows[0]).expect("basis row");
    for row in &rows[1..] {
        prefix.insert_mut(field, row).expect("basis row");
        let active: Vec<&SubspaceBasis> =
            forbidden.iter().copied().filter(|f| !f.contains_subspace(field, &prefix).expect("same ambient")).collect();
        v = field
            .elements()
            .skip(1)
            .chain(std::iter::once(FieldElement::ZERO))
            .map(|c| {
                let mut w = v.clone();
                w.axpy(field, c, row);
                w
            })
            .find(|w| active.iter().all(|f| !f.reduce(field, w).is_zero()))
            .expect("q > |forbidden| leaves a free coefficient");
    }
    v
}
