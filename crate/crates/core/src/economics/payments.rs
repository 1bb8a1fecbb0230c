//! Exact-rational payment bookkeeping: peer-to-peer matrices and broker ledgers.

use std::collections::VecDeque;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Coalition;

pub type Rational = BigRational;

pub fn int(x: i64) -> Rational {
    Rational::from_integer(BigInt::from(x))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Prints `a/b`, or just `a` for integers.
pub struct ShowRational<'a>(pub &'a Rational);

impl fmt::Display for ShowRational<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

pub fn show_list(xs: &[Rational]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| ShowRational(x).to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Wire form of a rational: `{"num": int, "den": int}` in lowest terms, `den > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalJson {
    pub num: i64,
    pub den: i64,
}

impl RationalJson {
    pub fn from_rational(x: &Rational) -> Self {
        RationalJson {
            num: x.numer().to_i64().expect("payment numerator fits in i64"),
            den: x.denom().to_i64().expect("payment denominator fits in i64"),
        }
    }

    pub fn to_rational(&self) -> Result<Rational, PaymentError> {
        if self.den == 0 {
            return Err(PaymentError::ZeroDenominator);
        }
        Ok(ratio(self.num, self.den))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PaymentError {
    #[error("rational with zero denominator")]
    ZeroDenominator,
    #[error("payment matrix must be {n}x{n}")]
    Shape { n: usize },
    #[error("negative payment {amount} from user {from} to user {to}")]
    Negative { from: usize, to: usize, amount: String },
    #[error("user {0} pays itself")]
    SelfPayment(usize),
    #[error("negative ledger entry for user {0}")]
    NegativeLedger(usize),
    #[error("ledger does not balance: sum p+ = {plus}, sum p- = {minus}")]
    Unbalanced { plus: String, minus: String },
    #[error("payment involves user {0}, who is outside the coalition")]
    OutsideScope(usize),
    #[error("no nonnegative zero-diagonal matrix has these marginals")]
    Unrealizable,
}

/// `p_{i,j}`: total payment from user `i` to user `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaymentMatrix {
    entries: Vec<Vec<Rational>>,
}

impl PaymentMatrix {
    pub fn zeros(n: usize) -> Self {
        PaymentMatrix { entries: vec![vec![Rational::zero(); n]; n] }
    }

    /// Validates nonnegativity and the zero diagonal.
    pub fn from_rows(entries: Vec<Vec<Rational>>) -> Result<Self, PaymentError> {
        let n = entries.len();
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(PaymentError::Shape { n });
            }
            for (j, x) in row.iter().enumerate() {
                if x.is_negative() {
                    return Err(PaymentError::Negative { from: i + 1, to: j + 1, amount: x.to_string() });
                }
                if i == j && !x.is_zero() {
                    return Err(PaymentError::SelfPayment(i + 1));
                }
            }
        }
        Ok(PaymentMatrix { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, from: usize, to: usize) -> &Rational {
        &self.entries[from][to]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.entries
    }

    /// Adds `amount` to `p_{from,to}`.
    pub fn pay(&mut self, from: usize, to: usize, amount: &Rational) {
        debug_assert!(from != to && !amount.is_negative());
        self.entries[from][to] += amount;
    }

    /// `p⁺_i`
    pub fn incoming(&self, user: usize) -> Rational {
        self.entries.iter().map(|row| &row[user]).sum()
    }

    /// `p⁻_i`
    pub fn outgoing(&self, user: usize) -> Rational {
        self.entries[user].iter().sum()
    }

    pub fn total(&self) -> Rational {
        self.entries.iter().flatten().sum()
    }

    pub fn in_scope(&self, s: &Coalition) -> Result<(), PaymentError> {
        for i in 0..self.n() {
            for j in 0..self.n() {
                if !self.entries[i][j].is_zero() && !(s.contains(i) && s.contains(j)) {
                    let outsider = if s.contains(i) { j } else { i };
                    return Err(PaymentError::OutsideScope(outsider + 1));
                }
            }
        }
        Ok(())
    }

    pub fn ledger(&self) -> BrokerLedger {
        BrokerLedger { plus: (0..self.n()).map(|i| self.incoming(i)).collect(), minus: (0..self.n()).map(|i| self.outgoing(i)).collect() }
    }
}

/// Aggregate payments cleared by a broker: `p⁺_i` received, `p⁻_i` paid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrokerLedger {
    plus: Vec<Rational>,
    minus: Vec<Rational>,
}

impl BrokerLedger {
    pub fn zeros(n: usize) -> Self {
        BrokerLedger { plus: vec![Rational::zero(); n], minus: vec![Rational::zero(); n] }
    }

    pub fn new(plus: Vec<Rational>, minus: Vec<Rational>) -> Result<Self, PaymentError> {
        if plus.len() != minus.len() {
            return Err(PaymentError::Shape { n: plus.len() });
        }
        for (i, (a, b)) in plus.iter().zip(&minus).enumerate() {
            if a.is_negative() || b.is_negative() {
                return Err(PaymentError::NegativeLedger(i + 1));
            }
        }
        let (sp, sm): (Rational, Rational) = (plus.iter().sum(), minus.iter().sum());
        if sp != sm {
            return Err(PaymentError::Unbalanced { plus: sp.to_string(), minus: sm.to_string() });
        }
        Ok(BrokerLedger { plus, minus })
    }

    pub fn n(&self) -> usize {
        self.plus.len()
    }

    pub fn plus(&self) -> &[Rational] {
        &self.plus
    }

    pub fn minus(&self) -> &[Rational] {
        &self.minus
    }

    pub fn credit(&mut self, user: usize, amount: &Rational) {
        self.plus[user] += amount;
    }

    pub fn debit(&mut self, user: usize, amount: &Rational) {
        self.minus[user] += amount;
    }

    pub fn total(&self) -> Rational {
        self.plus.iter().sum()
    }

    pub fn in_scope(&self, s: &Coalition) -> Result<(), PaymentError> {
        match (0..self.n()).find(|&i| !s.contains(i) && !(self.plus[i].is_zero() && self.minus[i].is_zero())) {
            Some(i) => Err(PaymentError::OutsideScope(i + 1)),
            None => Ok(()),
        }
    }

    /// A peer matrix with these marginals (deterministic; see [`realize`]).
    pub fn to_matrix(&self) -> Result<PaymentMatrix, PaymentError> {
        realize(&self.minus, &self.plus)
    }
}

/// Either payment representation; every economic check accepts both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payments {
    Matrix(PaymentMatrix),
    Ledger(BrokerLedger),
}

impl Payments {
    pub fn n(&self) -> usize {
        match self {
            Payments::Matrix(m) => m.n(),
            Payments::Ledger(l) => l.n(),
        }
    }

    pub fn plus(&self, user: usize) -> Rational {
        match self {
            Payments::Matrix(m) => m.incoming(user),
            Payments::Ledger(l) => l.plus[user].clone(),
        }
    }

    pub fn minus(&self, user: usize) -> Rational {
        match self {
            Payments::Matrix(m) => m.outgoing(user),
            Payments::Ledger(l) => l.minus[user].clone(),
        }
    }

    /// `p_N`
    pub fn total(&self) -> Rational {
        match self {
            Payments::Matrix(m) => m.total(),
            Payments::Ledger(l) => l.total(),
        }
    }

    pub fn in_scope(&self, s: &Coalition) -> Result<(), PaymentError> {
        match self {
            Payments::Matrix(m) => m.in_scope(s),
            Payments::Ledger(l) => l.in_scope(s),
        }
    }

    pub fn ledger(&self) -> BrokerLedger {
        match self {
            Payments::Matrix(m) => m.ledger(),
            Payments::Ledger(l) => l.clone(),
        }
    }
}

/// Finds a nonnegative zero-diagonal matrix with row sums `outgoing` and column sums
/// `incoming`, by max-flow on the bipartite payer/payee graph (BFS augmenting paths,
/// fixed vertex order, so the result is deterministic).
pub fn realize(outgoing: &[Rational], incoming: &[Rational]) -> Result<PaymentMatrix, PaymentError> {
    let n = outgoing.len();
    if incoming.len() != n {
        return Err(PaymentError::Shape { n });
    }
    let total: Rational = outgoing.iter().sum();
    if total != incoming.iter().sum::<Rational>() {
        return Err(PaymentError::Unbalanced { plus: incoming.iter().sum::<Rational>().to_string(), minus: total.to_string() });
    }
    // Vertices: 0 = source, 1..=n payers, n+1..=2n payees, 2n+1 = sink.
    let sink = 2 * n + 1;
    let mut residual_out: Vec<Rational> = outgoing.to_vec();
    let mut residual_in: Vec<Rational> = incoming.to_vec();
    let mut flow = PaymentMatrix::zeros(n);
    loop {
        // BFS over payer/payee layers; payer->payee edges are uncapacitated, the reverse
        // direction carries existing flow.
        let mut parent: Vec<Option<usize>> = vec![None; sink + 1];
        let mut queue = VecDeque::new();
        for i in 0..n {
            if residual_out[i].is_positive() {
                parent[1 + i] = Some(0);
                queue.push_back(1 + i);
            }
        }
        let mut end = None;
        while let Some(u) = queue.pop_front() {
            if u <= n {
                let i = u - 1;
                for j in (0..n).filter(|&j| j != i) {
                    let v = n + 1 + j;
                    if parent[v].is_none() {
                        parent[v] = Some(u);
                        if residual_in[j].is_positive() {
                            end = Some(v);
                            break;
                        }
                        queue.push_back(v);
                    }
                }
            } else {
                let j = u - n - 1;
                for i in (0..n).filter(|&i| i != j) {
                    let v = 1 + i;
                    if parent[v].is_none() && flow.entries[i][j].is_positive() {
                        parent[v] = Some(u);
                        queue.push_back(v);
                    }
                }
            }
            if end.is_some() {
                break;
            }
        }
        let Some(end) = end else { break };
        // Trace back and compute the bottleneck.
        let mut path = vec![end];
        let mut v = end;
        while let Some(u) = parent[v] {
            if u == 0 {
                break;
            }
            path.push(u);
            v = u;
        }
        path.reverse();
        let first = path[0] - 1;
        let last = path[path.len() - 1] - n - 1;
        let mut bottleneck = residual_out[first].clone().min(residual_in[last].clone());
        for w in path.windows(2) {
            if w[0] > n {
                // payee -> payer: undo flow on (payer w[1], payee w[0])
                let (i, j) = (w[1] - 1, w[0] - n - 1);
                bottleneck = bottleneck.min(flow.entries[i][j].clone());
            }
        }
        residual_out[first] -= &bottleneck;
        residual_in[last] -= &bottleneck;
        for w in path.windows(2) {
            if w[0] <= n {
                flow.entries[w[0] - 1][w[1] - n - 1] += &bottleneck;
            } else {
                flow.entries[w[1] - 1][w[0] - n - 1] -= &bottleneck;
            }
        }
    }
    if residual_out.iter().any(|x| x.is_positive()) {
        return Err(PaymentError::Unrealizable);
    }
    Ok(flow)
}
