//! Solution files: a rate vector together with a payment matrix or a broker ledger.
//!
//! ```json
//! {"r": [1, 1, 0],
//!  "payments": {"matrix": [[0, 1, 0], [{"num": 1, "den": 2}, 0, 0], ["1/2", 0, 0]]}}
//! {"r": [1, 1, 0],
//!  "payments": {"ledger": {"plus": [1, 1, 0], "minus": ["2/3", "2/3", "2/3"]}}}
//! ```
//!
//! Rationals are written as `{"num": int, "den": int}`; on input plain integers and
//! `"a/b"` strings are accepted as well, which keeps hand-written files short.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::payments::{BrokerLedger, PaymentError, PaymentMatrix, Payments, Rational, RationalJson};
use crate::rate_region::RateVector;

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("malformed solution JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("invalid rational `{0}`")]
    BadRational(String),
    #[error("solution has {rates} rates but {payments} payment rows")]
    Shape { rates: usize, payments: usize },
    #[error(transparent)]
    Payment(#[from] PaymentError),
}

/// A rate-payment pair as read from or written to disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub rates: RateVector,
    pub payments: Payments,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RationalIn {
    Int(i64),
    Text(String),
    Pair(RationalJson),
}

impl RationalIn {
    fn to_rational(&self) -> Result<Rational, SolutionError> {
        match self {
            RationalIn::Int(x) => Ok(Rational::from_integer(BigInt::from(*x))),
            RationalIn::Pair(p) => Ok(p.to_rational()?),
            RationalIn::Text(s) => {
                let bad = || SolutionError::BadRational(s.clone());
                let (num, den) = s.split_once('/').unwrap_or((s.as_str(), "1"));
                let num: BigInt = num.trim().parse().map_err(|_| bad())?;
                let den: BigInt = den.trim().parse().map_err(|_| bad())?;
                if den == BigInt::from(0) {
                    return Err(bad());
                }
                Ok(Rational::new(num, den))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerFile {
    plus: Vec<RationalIn>,
    minus: Vec<RationalIn>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum PaymentsFile {
    Matrix(Vec<Vec<RationalIn>>),
    Ledger(LedgerFile),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionFile {
    r: Vec<u64>,
    payments: PaymentsFile,
}

fn convert(xs: &[RationalIn]) -> Result<Vec<Rational>, SolutionError> {
    xs.iter().map(RationalIn::to_rational).collect()
}

fn wire(xs: &[Rational]) -> Vec<RationalIn> {
    xs.iter().map(|x| RationalIn::Pair(RationalJson::from_rational(x))).collect()
}

impl Solution {
    pub fn new(rates: RateVector, payments: Payments) -> Self {
        Solution { rates, payments }
    }

    pub fn parse(text: &str) -> Result<Self, SolutionError> {
        let file: SolutionFile =
            serde_json::from_str(text).map_err(|e| SolutionError::Json { line: e.line(), column: e.column(), message: e.to_string() })?;
        let payments = match &file.payments {
            PaymentsFile::Matrix(rows) => {
                let rows = rows.iter().map(|row| convert(row)).collect::<Result<Vec<_>, _>>()?;
                Payments::Matrix(PaymentMatrix::from_rows(rows)?)
            }
            PaymentsFile::Ledger(l) => Payments::Ledger(BrokerLedger::new(convert(&l.plus)?, convert(&l.minus)?)?),
        };
        if payments.n() != file.r.len() {
            return Err(SolutionError::Shape { rates: file.r.len(), payments: payments.n() });
        }
        Ok(Solution { rates: RateVector::from(file.r), payments })
    }

    /// Pretty-printed JSON with every rational as `{"num", "den"}`.
    pub fn to_json(&self) -> String {
        let payments = match &self.payments {
            Payments::Matrix(m) => PaymentsFile::Matrix(m.rows().iter().map(|row| wire(row)).collect()),
            Payments::Ledger(l) => PaymentsFile::Ledger(LedgerFile { plus: wire(l.plus()), minus: wire(l.minus()) }),
        };
        let file = SolutionFile { r: self.rates.rates().to_vec(), payments };
        let mut s = serde_json::to_string_pretty(&file).expect("solution serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economics::payments::{int, ratio};

    #[test]
    fn accepts_all_rational_spellings() {
        let s = Solution::parse(r#"{"r":[1,1,0],"payments":{"matrix":[[0,1,0],[{"num":1,"den":2},0,0],["1/2",0,0]]}}"#).unwrap();
        assert_eq!(s.rates.rates(), [1, 1, 0]);
        let Payments::Matrix(m) = &s.payments else { panic!("matrix expected") };
        assert_eq!(m.get(1, 0), &ratio(1, 2));
        assert_eq!(m.get(2, 0), &ratio(1, 2));
        assert_eq!(m.get(0, 1), &int(1));
    }

    #[test]
    fn round_trips_ledgers() {
        let ledger = BrokerLedger::new(vec![int(1), int(1), int(0)], vec![ratio(2, 3); 3]).unwrap();
        let s = Solution::new(RateVector::from(vec![1, 1, 0]), Payments::Ledger(ledger));
        let text = s.to_json();
        assert!(text.contains(r#""num": 2"#));
        assert_eq!(Solution::parse(&text).unwrap(), s);
    }

    #[test]
    fn rejects_bad_input() {
        let err = |text: &str| Solution::parse(text).unwrap_err().to_string();
        assert!(err(r#"{"r":[1],"payments":{"matrix":[["1/0"]]}}"#).contains("invalid rational"));
        assert!(err(r#"{"r":[1,0,0],"payments":{"matrix":[[0,1],[0,0]]}}"#).contains("3 rates but 2"));
        assert!(err(r#"{"r":[1,1],"payments":{"ledger":{"plus":[1,1],"minus":[1,0]}}}"#).contains("does not balance"));
        assert!(err(r#"{"r":[1,1],"payments":{"matrix":[[1,0],[0,0]]}}"#).contains("pays itself"));
        assert!(err("{\"r\":[1,1],\n\"payments\":3}").starts_with("malformed solution JSON at line 2"));
    }
}
