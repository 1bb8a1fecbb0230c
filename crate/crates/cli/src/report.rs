//! Text and JSON rendering shared by the subcommands.

use cde_core::economics::payments::{Payments, Rational, RationalJson, ShowRational};
use cde_core::economics::table::text_table;
use cde_core::economics::{check_optimality, utilities, OptimalityVerdict, Utility};
use cde_core::instance::Instance;
use cde_core::rate_region::RateVector;
use serde_json::{json, Value};

use crate::error::CliError;

/// `[a,b,c]` without spaces.
pub fn compact<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    let parts: Vec<String> = xs.into_iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(","))
}

pub fn compact_rationals(xs: &[Rational]) -> String {
    compact(xs.iter().map(|x| ShowRational(x).to_string()))
}

pub fn show(x: &Rational) -> String {
    ShowRational(x).to_string()
}

pub fn rationals_json(xs: &[Rational]) -> Value {
    json!(xs.iter().map(RationalJson::from_rational).collect::<Vec<_>>())
}

pub fn payments_json(p: &Payments) -> Value {
    match p {
        Payments::Matrix(m) => json!({ "matrix": m.rows().iter().map(|row| rationals_json(row)).collect::<Vec<_>>() }),
        Payments::Ledger(l) => json!({ "ledger": { "plus": rationals_json(l.plus()), "minus": rationals_json(l.minus()) } }),
    }
}

/// Rates, payments and utilities as a human-readable block.
pub fn render_pair(instance: &Instance, r: &RateVector, p: &Payments, u: &[Utility]) -> String {
    let mut out = format!("r={}  r_N={}\n", compact(r.rates()), r.total());
    if let Payments::Matrix(m) = p {
        out.push_str("payments p_ij (row i pays column j):\n");
        let headers: Vec<String> = std::iter::once("".to_string()).chain(instance.users().map(|j| (j + 1).to_string())).collect();
        let headers: Vec<&str> = headers.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = m
            .rows()
            .iter()
            .enumerate()
            .map(|(i, row)| std::iter::once((i + 1).to_string()).chain(row.iter().map(show)).collect())
            .collect();
        for line in text_table(&headers, &rows).lines() {
            out.push_str(&format!("  {line}\n"));
        }
    }
    let plus: Vec<Rational> = instance.users().map(|i| p.plus(i)).collect();
    let minus: Vec<Rational> = instance.users().map(|i| p.minus(i)).collect();
    out.push_str(&format!("p⁺={}\np⁻={}\np_N={}\n", compact_rationals(&plus), compact_rationals(&minus), show(&p.total())));
    let rows: Vec<Vec<String>> =
        u.iter().enumerate().map(|(i, x)| vec![(i + 1).to_string(), show(&x.u_plus), show(&x.u_minus), show(&x.u)]).collect();
    out.push_str("utilities:\n");
    for line in text_table(&["user", "u+", "u-", "u"], &rows).lines() {
        out.push_str(&format!("  {line}\n"));
    }
    let sum: Rational = u.iter().map(|x| &x.u).sum();
    let min = u.iter().map(|x| &x.u).min().expect("at least two users");
    out.push_str(&format!("sum-utility {}, min-utility {}\n", show(&sum), show(min)));
    out
}

pub fn pair_json(instance: &Instance, r: &RateVector, p: &Payments) -> Result<Value, CliError> {
    let u = utilities(instance, r, p)?;
    Ok(json!({
        "r": r.rates(),
        "payments": payments_json(p),
        "utilities": u.iter().map(Utility::to_json_value).collect::<Vec<_>>(),
    }))
}

/// Rationality, stability and optimality of one pair.
pub struct Verification {
    pub verdict: OptimalityVerdict,
}

impl Verification {
    pub fn of(instance: &Instance, r: &RateVector, p: &Payments) -> Result<Self, CliError> {
        Ok(Verification { verdict: check_optimality(instance, r, p)? })
    }

    /// Stable and optimal (optimality already requires rationality and stability).
    pub fn passed(&self) -> bool {
        self.verdict.optimal
    }

    pub fn render_text(&self) -> String {
        let v = &self.verdict;
        let mut out = String::new();
        if v.rational() {
            out.push_str("rational: yes\n");
        } else {
            out.push_str(&format!("rational: no ({})\n", v.rationality.join(", ")));
        }
        match &v.stability {
            None => out.push_str("stable: not evaluated (the pair is not rational)\n"),
            Some(report) => {
                out.push_str(if report.stable { "stable: yes\n" } else { "stable: no\n" });
                for line in report.render_text().lines() {
                    out.push_str(&format!("  {line}\n"));
                }
            }
        }
        out.push_str(&format!("optimal: {}\n", v.summary()));
        for reason in v.reasons.iter().skip(1) {
            out.push_str(&format!("  also: {reason}\n"));
        }
        out
    }

    pub fn to_json_value(&self) -> Value {
        self.verdict.to_json_value()
    }
}
