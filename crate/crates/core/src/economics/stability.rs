//! Stability: no minor coalition can make all of its members weakly better off, and one
//! strictly, with a rational pair of its own.
//!
//! For a coalition `S` and any `r̃ ∈ R_S`, every payment matrix in `P_S` satisfies
//! `Σ_{i∈S} u_i(r̃,p̃) = Σ_{i∈S}|X̄_i| − r̃_S`, because payments only move money inside `S`.
//! So `S` can block `(r,p)` only if `Σ_{i∈S} u_i(r,p) < Σ_{i∈S}|X̄_i| − r̃_S`. Conversely,
//! whenever that strict inequality holds, spreading the surplus over `S` yields an explicit
//! rational dominating pair (see `build_witness`). Minimizing over `r̃` gives the test
//!
//! ```text
//! margin(S) = Σ_{i∈S} u_i(r,p) − (Σ_{i∈S}|X̄_i| − min_sum_rate(S)) ≥ 0   for every minor S.
//! ```
//!
//! This equivalence is derived rather than taken from a reference, so
//! [`blocking_pair_search`] re-checks it by enumerating every achieving rate vector up to
//! one unit above the minimum.

use num_traits::{Signed, Zero};
use serde::Serialize;

use super::payments::{int, realize, show_list, PaymentMatrix, Payments, Rational, RationalJson, ShowRational};
use super::table::text_table;
use super::{check_shapes, rationality_violations, utilities, EconError};
use crate::instance::{Coalition, Instance};
use crate::rate_region::{achieving_vectors_up_to, is_achieving, min_sum_rate_witness, RateVector};

/// Coalition enumeration budget for stability checks.
pub const MAX_STABILITY_USERS: usize = 6;
pub const MAX_STABILITY_PACKETS: usize = 8;

/// A rate-payment pair over `coalition` that Pareto-dominates the checked pair on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockingPair {
    pub coalition: Coalition,
    pub rates: RateVector,
    pub payments: PaymentMatrix,
    /// Members' utilities under the blocking pair, in member order.
    pub utilities: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalitionMargin {
    pub coalition: Coalition,
    pub utility_sum: Rational,
    pub wants_sum: u64,
    pub min_sum_rate: u64,
    pub margin: Rational,
    /// Present exactly when `margin < 0`.
    pub witness: Option<BlockingPair>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityReport {
    pub coalitions: Vec<CoalitionMargin>,
    pub stable: bool,
    /// There are no minor coalitions, so stability holds trivially.
    pub vacuous: bool,
}

pub(crate) fn check_budget(instance: &Instance) -> Result<(), EconError> {
    if instance.n() > MAX_STABILITY_USERS {
        return Err(EconError::Budget { what: "users", found: instance.n(), max: MAX_STABILITY_USERS });
    }
    if instance.k() > MAX_STABILITY_PACKETS {
        return Err(EconError::Budget { what: "packets", found: instance.k(), max: MAX_STABILITY_PACKETS });
    }
    Ok(())
}

fn wants_sum(instance: &Instance, s: &Coalition) -> u64 {
    s.members().iter().map(|&i| instance.num_wants(i) as u64).sum()
}

/// Checks that `(rt, pt)` blocks `(r, p)` on `S`: `rt ∈ R_S`, `pt` keeps all money inside `S`,
/// `(rt, pt)` is rational on `S`, and every member is weakly better off with one strictly
/// better off than under `(r, p)`. Returns the members' new utilities.
pub fn validate_blocking_pair(
    instance: &Instance,
    s: &Coalition,
    r: &RateVector,
    p: &Payments,
    rt: &RateVector,
    pt: &Payments,
) -> Result<Vec<Rational>, String> {
    let e = |x: EconError| x.to_string();
    check_shapes(instance, rt, pt).map_err(e)?;
    if !is_achieving(instance, s, rt).map_err(|x| x.to_string())? {
        return Err(format!("rates {rt} do not let {s} reach omniscience"));
    }
    let violations = rationality_violations(instance, rt, pt, s).map_err(e)?;
    if let Some((_, what)) = violations.first() {
        return Err(format!("blocking pair is not rational ({what})"));
    }
    let before = utilities(instance, r, p).map_err(e)?;
    let after = utilities(instance, rt, pt).map_err(e)?;
    let mut strict = false;
    for &i in s.members() {
        if after[i].u < before[i].u {
            return Err(format!("user {} is worse off ({} < {})", i + 1, ShowRational(&after[i].u), ShowRational(&before[i].u)));
        }
        strict |= after[i].u > before[i].u;
    }
    if !strict {
        return Err("no member is strictly better off".into());
    }
    Ok(s.members().iter().map(|&i| after[i].u.clone()).collect())
}

/// Blocking pair for `S` from an achieving `rt` with `surplus = Σ|X̄_i| − rt_S − Σu_i > 0`.
///
/// Every member pays its full want (`p̃⁻_i = |X̄_i|`) and receives
/// `p̃⁺_i = rt_i + u_i + surplus/|S|`, so its utility rises by `surplus/|S|` and both
/// components stay nonnegative. The marginals are realizable without self-payments because
/// the single-user cuts of `R_S` give `Σ_{j∈S∖{i}} rt_j ≥ |X̄_i|`, hence
/// `p̃⁺_i + p̃⁻_i ≤ p̃_S` for every member.
fn build_witness(
    instance: &Instance,
    s: &Coalition,
    r: &RateVector,
    p: &Payments,
    rt: &RateVector,
    surplus: &Rational,
) -> Result<BlockingPair, EconError> {
    let fail = |message: String| EconError::Witness { coalition: s.to_string(), message };
    let u = utilities(instance, r, p)?;
    let share = surplus / int(s.len() as i64);
    let mut plus = vec![Rational::zero(); instance.n()];
    let mut minus = vec![Rational::zero(); instance.n()];
    for &i in s.members() {
        minus[i] = int(instance.num_wants(i) as i64);
        plus[i] = int(rt.get(i) as i64) + &u[i].u + &share;
    }
    let matrix = realize(&minus, &plus).map_err(|e| fail(e.to_string()))?;
    let pt = Payments::Matrix(matrix);
    let new_u = validate_blocking_pair(instance, s, r, p, rt, &pt).map_err(fail)?;
    let Payments::Matrix(payments) = pt else { unreachable!() };
    Ok(BlockingPair { coalition: s.clone(), rates: rt.clone(), payments, utilities: new_u })
}

/// Computes `margin(S)` for every minor coalition, with a validated blocking pair for each
/// negative margin. The pair must already be rational on the grand coalition.
pub fn check_stability(instance: &Instance, r: &RateVector, p: &Payments) -> Result<StabilityReport, EconError> {
    check_shapes(instance, r, p)?;
    check_budget(instance)?;
    let grand = Coalition::grand(instance.n());
    let violations = rationality_violations(instance, r, p, &grand)?;
    if !violations.is_empty() {
        let parts: Vec<String> = violations.into_iter().map(|(_, d)| d).collect();
        return Err(EconError::NotRational(parts.join(", ")));
    }
    let u = utilities(instance, r, p)?;
    let mut coalitions = Vec::new();
    for s in instance.minor_coalitions()? {
        let (msr, rt) = min_sum_rate_witness(instance, &s)?;
        let utility_sum: Rational = s.members().iter().map(|&i| u[i].u.clone()).sum();
        let wants = wants_sum(instance, &s);
        let margin = &utility_sum - int(wants as i64) + int(msr as i64);
        let witness = if margin.is_negative() { Some(build_witness(instance, &s, r, p, &rt, &-&margin)?) } else { None };
        coalitions.push(CoalitionMargin { coalition: s, utility_sum, wants_sum: wants, min_sum_rate: msr, margin, witness });
    }
    let stable = coalitions.iter().all(|c| c.witness.is_none());
    let vacuous = coalitions.is_empty();
    Ok(StabilityReport { coalitions, stable, vacuous })
}

/// Outcome of enumerating candidate deviations for one coalition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockingSearch {
    /// Achieving rate vectors examined.
    pub candidates: usize,
    /// How many of them admit a dominating rational payment matrix.
    pub blocking_rates: usize,
    pub first: Option<BlockingPair>,
}

/// Enumerates every `r̃ ∈ R_S` with `r̃_S ≤ min_sum_rate(S) + 1`. For each one with positive
/// surplus it constructs and validates a dominating pair. For the others, it checks that
/// the surplus identity forbids domination: the equal-utility split of the available total
/// is built and must not be strictly better for anyone.
pub fn blocking_pair_search(instance: &Instance, r: &RateVector, p: &Payments, s: &Coalition) -> Result<BlockingSearch, EconError> {
    check_shapes(instance, r, p)?;
    let (msr, _) = min_sum_rate_witness(instance, s)?;
    let u = utilities(instance, r, p)?;
    let utility_sum: Rational = s.members().iter().map(|&i| u[i].u.clone()).sum();
    let wants = int(wants_sum(instance, s) as i64);
    let mut out = BlockingSearch { candidates: 0, blocking_rates: 0, first: None };
    for rt in achieving_vectors_up_to(instance, s, msr + 1)? {
        out.candidates += 1;
        let surplus = &wants - int(rt.total() as i64) - &utility_sum;
        if surplus.is_positive() {
            let pair = build_witness(instance, s, r, p, &rt, &surplus)?;
            out.blocking_rates += 1;
            out.first.get_or_insert(pair);
        } else if s.len() >= 2 {
            // Members' utilities under any p̃ ∈ P_S sum to wants − r̃_S ≤ Σu; check the
            // identity on a concrete realization with the shortfall spread evenly.
            let share = &surplus / int(s.len() as i64);
            let mut plus = vec![Rational::zero(); instance.n()];
            let mut minus = vec![Rational::zero(); instance.n()];
            for &i in s.members() {
                minus[i] = int(instance.num_wants(i) as i64);
                plus[i] = int(rt.get(i) as i64) + &u[i].u + &share;
            }
            if plus.iter().all(|x| !x.is_negative()) {
                if let Ok(m) = realize(&minus, &plus) {
                    let pt = Payments::Matrix(m);
                    let after = utilities(instance, &rt, &pt)?;
                    let total: Rational = s.members().iter().map(|&i| after[i].u.clone()).sum();
                    if total != &wants - int(rt.total() as i64) {
                        return Err(EconError::Witness {
                            coalition: s.to_string(),
                            message: format!("sum-utility identity fails for r~ = {rt}"),
                        });
                    }
                    if validate_blocking_pair(instance, s, r, p, &rt, &pt).is_ok() {
                        out.blocking_rates += 1;
                        out.first.get_or_insert(BlockingPair {
                            coalition: s.clone(),
                            rates: rt.clone(),
                            payments: match pt {
                                Payments::Matrix(m) => m,
                                Payments::Ledger(_) => unreachable!(),
                            },
                            utilities: s.members().iter().map(|&i| after[i].u.clone()).collect(),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct BlockingPairJson {
    rates: Vec<u64>,
    payments: Vec<Vec<RationalJson>>,
    utilities: Vec<RationalJson>,
}

#[derive(Serialize)]
struct CoalitionJson {
    members: Vec<usize>,
    utility_sum: RationalJson,
    wants_sum: u64,
    min_sum_rate: u64,
    margin: RationalJson,
    witness: Option<BlockingPairJson>,
}

#[derive(Serialize)]
pub(crate) struct StabilityJson {
    stable: bool,
    vacuous: bool,
    coalitions: Vec<CoalitionJson>,
}

impl BlockingPair {
    fn to_wire(&self) -> BlockingPairJson {
        BlockingPairJson {
            rates: self.rates.rates().to_vec(),
            payments: self.payments.rows().iter().map(|row| row.iter().map(RationalJson::from_rational).collect()).collect(),
            utilities: self.utilities.iter().map(RationalJson::from_rational).collect(),
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("  {} blocks with r~ = {}\n", self.coalition, self.rates);
        for (i, row) in self.payments.rows().iter().enumerate() {
            if row.iter().any(|x| !x.is_zero()) {
                out.push_str(&format!("    user {} pays {}\n", i + 1, show_list(row)));
            }
        }
        out.push_str(&format!("    new utilities {}\n", show_list(&self.utilities)));
        out
    }
}

impl StabilityReport {
    pub fn blocking(&self) -> impl Iterator<Item = &BlockingPair> {
        self.coalitions.iter().filter_map(|c| c.witness.as_ref())
    }

    pub(crate) fn to_wire(&self) -> StabilityJson {
        StabilityJson {
            stable: self.stable,
            vacuous: self.vacuous,
            coalitions: self
                .coalitions
                .iter()
                .map(|c| CoalitionJson {
                    members: c.coalition.members().iter().map(|i| i + 1).collect(),
                    utility_sum: RationalJson::from_rational(&c.utility_sum),
                    wants_sum: c.wants_sum,
                    min_sum_rate: c.min_sum_rate,
                    margin: RationalJson::from_rational(&c.margin),
                    witness: c.witness.as_ref().map(BlockingPair::to_wire),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_wire()).expect("report serializes")
    }

    /// Margin table followed by any blocking pairs.
    pub fn render_text(&self) -> String {
        if self.vacuous {
            return "no minor coalitions: stable by vacuity\n".into();
        }
        let rows: Vec<Vec<String>> = self
            .coalitions
            .iter()
            .map(|c| {
                vec![
                    c.coalition.to_string(),
                    ShowRational(&c.utility_sum).to_string(),
                    c.wants_sum.to_string(),
                    c.min_sum_rate.to_string(),
                    ShowRational(&c.margin).to_string(),
                    if c.witness.is_some() { "yes".into() } else { "no".into() },
                ]
            })
            .collect();
        let mut out = text_table(&["coalition", "sum u", "sum wants", "min sum-rate", "margin", "blocks"], &rows);
        for w in self.blocking() {
            out.push_str(&w.render_text());
        }
        out
    }
}
