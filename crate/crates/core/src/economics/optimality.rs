//! Optimality certification and the utility comparison between the two mechanisms.
//!
//! A stable rational pair `(r, p)` with `r ∈ R_N` satisfies `p_N ≥ r_N ≥ min_sum_rate(N)`,
//! and the peer-payment mechanism attains both bounds with equality. So a pair is optimal
//! exactly when it is feasible and `r_N == min_sum_rate(N) == p_N`.

use serde::Serialize;

use super::payments::{int, Payments, Rational, RationalJson, ShowRational};
use super::stability::{check_budget, check_stability, StabilityJson, StabilityReport};
use super::table::text_table;
use super::{check_shapes, rationality_violations, utilities, EconError};
use crate::instance::{Coalition, Instance};
use crate::rate_region::{is_achieving, min_sum_rate, RateVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimalityVerdict {
    pub optimal: bool,
    /// Why the pair is not optimal, most fundamental first; empty iff `optimal`.
    pub reasons: Vec<String>,
    pub r_total: u64,
    pub min_sum_rate: u64,
    pub p_total: Rational,
    pub achieving: bool,
    /// Negative utility components; empty iff the pair is rational.
    pub rationality: Vec<String>,
    /// Only evaluated for rational pairs.
    pub stability: Option<StabilityReport>,
}

impl OptimalityVerdict {
    pub fn rational(&self) -> bool {
        self.rationality.is_empty()
    }

    pub fn stable(&self) -> Option<bool> {
        self.stability.as_ref().map(|s| s.stable)
    }

    /// `"yes"` or `"no (<first reason>)"`.
    pub fn summary(&self) -> String {
        match self.reasons.first() {
            None => "yes".into(),
            Some(reason) => format!("no ({reason})"),
        }
    }
}

pub fn check_optimality(instance: &Instance, r: &RateVector, p: &Payments) -> Result<OptimalityVerdict, EconError> {
    check_shapes(instance, r, p)?;
    check_budget(instance)?;
    let grand = Coalition::grand(instance.n());
    let msr = min_sum_rate(instance, &grand)?;
    let r_total = r.total();
    let p_total = p.total();
    let achieving = is_achieving(instance, &grand, r)?;
    let rationality: Vec<String> = rationality_violations(instance, r, p, &grand)?.into_iter().map(|(_, d)| d).collect();
    let stability = if rationality.is_empty() { Some(check_stability(instance, r, p)?) } else { None };

    let mut reasons = Vec::new();
    if r_total > msr {
        reasons.push(format!("r_N={r_total} > {msr}"));
    }
    if !achieving {
        reasons.push(format!("r={r} does not achieve omniscience"));
    }
    if p_total > int(r_total as i64) {
        reasons.push(format!("p_N={} > r_N={r_total}", ShowRational(&p_total)));
    }
    if !rationality.is_empty() {
        reasons.push(format!("not rational: {}", rationality.join(", ")));
    }
    if let Some(report) = &stability {
        if let Some(w) = report.blocking().next() {
            reasons.push(format!("not stable: {} blocks", w.coalition));
        }
    }
    Ok(OptimalityVerdict { optimal: reasons.is_empty(), reasons, r_total, min_sum_rate: msr, p_total, achieving, rationality, stability })
}

#[derive(Serialize)]
struct VerdictJson {
    optimal: bool,
    reasons: Vec<String>,
    r_total: u64,
    min_sum_rate: u64,
    p_total: RationalJson,
    achieving: bool,
    rational: bool,
    rationality: Vec<String>,
    stability: Option<StabilityJson>,
}

impl OptimalityVerdict {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(VerdictJson {
            optimal: self.optimal,
            reasons: self.reasons.clone(),
            r_total: self.r_total,
            min_sum_rate: self.min_sum_rate,
            p_total: RationalJson::from_rational(&self.p_total),
            achieving: self.achieving,
            rational: self.rational(),
            rationality: self.rationality.clone(),
            stability: self.stability.as_ref().map(StabilityReport::to_wire),
        })
        .expect("verdict serializes")
    }
}

/// Sum- and min-utility of both mechanisms' outputs on one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonReport {
    /// `Σ_i |X̄_i| − r_N`, with the first mechanism's `r_N`.
    pub expected_sum_utility: Rational,
    /// Indexed by mechanism: 0 = peer payments, 1 = broker.
    pub sum_utility: [Rational; 2],
    pub min_utility: [Rational; 2],
    /// `min_i (|X_i| + p⁻_i)` from the broker ledger.
    pub c: Rational,
    pub max_holding: usize,
    /// `k − max{c, max_i |X_i|}`
    pub closed_form: Rational,
}

impl ComparisonReport {
    pub fn sum_utility_ok(&self) -> [bool; 2] {
        [self.sum_utility[0] == self.expected_sum_utility, self.sum_utility[1] == self.expected_sum_utility]
    }

    pub fn min_utility_order_ok(&self) -> bool {
        self.min_utility[1] >= self.min_utility[0]
    }

    pub fn closed_form_ok(&self) -> bool {
        self.min_utility[1] == self.closed_form
    }

    pub fn passed(&self) -> bool {
        self.sum_utility_ok().iter().all(|&b| b) && self.min_utility_order_ok() && self.closed_form_ok()
    }

    pub fn render_text(&self) -> String {
        let s = |x: &Rational| ShowRational(x).to_string();
        let ok = |b: bool| if b { "ok".to_string() } else { "FAIL".to_string() };
        let [sum_ok1, sum_ok2] = self.sum_utility_ok();
        let rows = vec![
            vec![
                "sum-utility".into(),
                s(&self.sum_utility[0]),
                s(&self.sum_utility[1]),
                s(&self.expected_sum_utility),
                ok(sum_ok1 && sum_ok2),
            ],
            vec!["min-utility".into(), s(&self.min_utility[0]), s(&self.min_utility[1]), s(&self.closed_form), ok(self.closed_form_ok())],
        ];
        let mut out = text_table(&["", "algo 1", "algo 2", "expected", "check"], &rows);
        out.push_str(&format!(
            "c = {}, max |X_i| = {}, min-utility algo 2 >= algo 1: {}\n",
            s(&self.c),
            self.max_holding,
            if self.min_utility_order_ok() { "yes" } else { "no" }
        ));
        out
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let j = RationalJson::from_rational;
        serde_json::json!({
            "expected_sum_utility": j(&self.expected_sum_utility),
            "sum_utility": [j(&self.sum_utility[0]), j(&self.sum_utility[1])],
            "min_utility": [j(&self.min_utility[0]), j(&self.min_utility[1])],
            "c": j(&self.c),
            "max_holding": self.max_holding,
            "closed_form": j(&self.closed_form),
            "passed": self.passed(),
        })
    }
}

/// Compares the peer-payment output `algo1` with the broker output `algo2`. Both must be
/// optimal.
pub fn utility_comparisons(
    instance: &Instance,
    algo1: (&RateVector, &Payments),
    algo2: (&RateVector, &Payments),
) -> Result<ComparisonReport, EconError> {
    for (which, (r, p)) in [("algorithm 1", algo1), ("algorithm 2", algo2)] {
        let verdict = check_optimality(instance, r, p)?;
        if let Some(reason) = verdict.reasons.first() {
            return Err(EconError::NotOptimal { which, reason: reason.clone() });
        }
    }
    let wants: u64 = instance.users().map(|i| instance.num_wants(i) as u64).sum();
    let expected_sum_utility = int(wants as i64) - int(algo1.0.total() as i64);
    let mut sum_utility: [Rational; 2] = Default::default();
    let mut min_utility: [Rational; 2] = Default::default();
    for (slot, (r, p)) in [algo1, algo2].into_iter().enumerate() {
        let u: Vec<Rational> = utilities(instance, r, p)?.into_iter().map(|x| x.u).collect();
        sum_utility[slot] = u.iter().sum();
        min_utility[slot] = u.into_iter().min().expect("at least two users");
    }
    let p2 = algo2.1;
    let c = instance.users().map(|i| int(instance.num_has(i) as i64) + p2.minus(i)).min().expect("at least two users");
    let max_holding = instance.users().map(|i| instance.num_has(i)).max().expect("at least two users");
    let closed_form = int(instance.k() as i64) - std::cmp::max(c.clone(), int(max_holding as i64));
    Ok(ComparisonReport { expected_sum_utility, sum_utility, min_utility, c, max_holding, closed_form })
}
