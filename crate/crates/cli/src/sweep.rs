//! Corpus sweeps: generate instances, run both mechanisms under both tie-break policies and
//! evaluate every selected property on every instance.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use cde_core::economics::payments::{int, Rational};
use cde_core::economics::solution::Solution;
use cde_core::economics::{
    blocking_pair_search, check_optimality, check_stability, is_rational_pair, utility_comparisons, MAX_STABILITY_PACKETS,
    MAX_STABILITY_USERS,
};
use cde_core::instance::{generate, Coalition, Instance};
use cde_core::mechanism::{replay_verify, run, wave_bound_violations, MechanismConfig, Outcome, TieBreak, Transcript, Variant};
use cde_core::rate_region::{min_sum_rate, min_sum_rate_bound_check, RateVector};
use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::error::CliError;
use crate::files;

/// Stability cross-validation enumerates candidate rate vectors per coalition; keep it to
/// small instances.
const MAX_SEARCH_USERS: usize = 4;
const MAX_FAILURES_PRINTED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Check {
    /// Transcripts survive a JSON round trip and replay without violations.
    Replay,
    /// Both utility components nonnegative for every user.
    Rationality,
    /// No minor coalition has a negative stability margin.
    Stability,
    /// r_N equals the minimum sum-rate and p_N equals r_N.
    Optimality,
    /// Sum- and min-utility relations between the two mechanisms.
    Comparisons,
    /// Every completion wave finishes no later than the minimum sum-rate of its coalitions.
    WaveBound,
    /// Per-round payment bookkeeping.
    LedgerLaws,
    /// Minimum sum-rate within min wants + max wants.
    SumRateBound,
    /// Stability margins agree with a direct blocking-pair search (n ≤ 4).
    StabilitySearch,
    /// Totals (and broker p⁻) do not depend on the tie-break policy.
    TieBreak,
    /// Both mechanisms transmit identically under the same configuration.
    Schedule,
}

impl Check {
    fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }

    /// Needs the exhaustive min-sum-rate or stability oracles.
    fn uses_oracle(self) -> bool {
        matches!(
            self,
            Check::Stability | Check::Optimality | Check::Comparisons | Check::WaveBound | Check::SumRateBound | Check::StabilitySearch
        )
    }
}

/// Inclusive integer range written `lo..hi` (or a single value).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
        let (lo, hi) = match s.split_once("..") {
            Some((lo, hi)) => (parse(lo)?, parse(hi.trim_start_matches('='))?),
            None => (parse(s)?, parse(s)?),
        };
        if lo > hi {
            return Err(format!("empty range {lo}..{hi}"));
        }
        Ok(Span { lo, hi })
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub count: usize,
    /// Users per instance, inclusive range.
    #[arg(long, default_value = "2..6")]
    pub n: Span,
    /// Packets per instance, inclusive range.
    #[arg(long, default_value = "2..8")]
    pub k: Span,
    /// Densities to draw from.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7")]
    pub density: Vec<f64>,
    /// Master seed.
    #[arg(long, env = "CDE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Properties to evaluate [default: all].
    #[arg(long, value_enum, value_delimiter = ',')]
    pub checks: Vec<Check>,
    /// Where failing instances are dumped for replay.
    #[arg(long, default_value = "sweep-failures")]
    pub dump_dir: PathBuf,
    #[arg(long)]
    pub json: bool,
}

/// The four runs made per instance.
struct Runs {
    algo1: Outcome,
    algo2: Outcome,
    algo1_seeded: Outcome,
    algo2_seeded: Outcome,
}

impl Runs {
    fn labelled(&self) -> [(&'static str, &Outcome); 4] {
        [("algo1", &self.algo1), ("algo2", &self.algo2), ("algo1-seeded", &self.algo1_seeded), ("algo2-seeded", &self.algo2_seeded)]
    }
}

enum CheckResult {
    Pass,
    Fail(Vec<String>),
    Skipped,
}

fn collect(failures: Vec<String>) -> CheckResult {
    if failures.is_empty() {
        CheckResult::Pass
    } else {
        CheckResult::Fail(failures)
    }
}

struct InstanceReport {
    index: usize,
    density: f64,
    tie_seed: u64,
    instance: Instance,
    runs: Runs,
    results: Vec<(Check, CheckResult)>,
}

impl InstanceReport {
    fn failed(&self) -> bool {
        self.results.iter().any(|(_, r)| matches!(r, CheckResult::Fail(_)))
    }
}

fn check_replay(instance: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    let mut failures = Vec::new();
    for (label, out) in runs.labelled() {
        let t = match Transcript::from_json(&out.transcript.to_json()) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("{label}: transcript does not survive its file format: {e}"));
                continue;
            }
        };
        let report = replay_verify(instance, &t).map_err(|e| CliError::Internal(format!("{label}: {e}")))?;
        failures.extend(report.violations.iter().map(|v| format!("{label}: {v}")));
    }
    Ok(collect(failures))
}

fn check_rationality(instance: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    let grand = Coalition::grand(instance.n());
    let mut failures = Vec::new();
    for (label, out) in runs.labelled() {
        if !is_rational_pair(instance, &out.rates, &out.payments, &grand)? {
            failures.push(format!("{label}: not rational"));
        }
    }
    Ok(collect(failures))
}

fn check_stability_margins(instance: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    let mut failures = Vec::new();
    for (label, out) in runs.labelled() {
        match check_stability(instance, &out.rates, &out.payments) {
            Ok(report) => {
                failures.extend(report.blocking().map(|w| format!("{label}: {} blocks with r~ = {}", w.coalition, w.rates)));
            }
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    Ok(collect(failures))
}

fn check_optimal(instance: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    let msr = min_sum_rate(instance, &Coalition::grand(instance.n()))?;
    let mut failures = Vec::new();
    for (label, out) in runs.labelled() {
        let verdict = check_optimality(instance, &out.rates, &out.payments)?;
        if !verdict.optimal {
            failures.push(format!("{label}: optimal: {}", verdict.summary()));
        } else if out.rates.total() != msr || out.payments.total() != int(msr as i64) {
            failures.push(format!("{label}: r_N={} p_N={} but min sum-rate {msr}", out.rates.total(), out.payments.total()));
        }
    }
    Ok(collect(failures))
}

fn check_comparisons(instance: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    let mut failures = Vec::new();
    for (label, a1, a2) in [("lowest-index", &runs.algo1, &runs.algo2), ("seeded", &runs.algo1_seeded, &runs.algo2_seeded)] {
        match utility_comparisons(instance, (&a1.rates, &a1.payments), (&a2.rates, &a2.payments)) {
            Ok(cmp) if cmp.passed() && a1.rates.total() == a2.rates.total() => {}
            Ok(cmp) => failures.push(format!("{label}: {}", cmp.render_text().trim_end().replace('\n', "; "))),
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    Ok(collect(failures))
}

fn check_wave_bound(instance: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    let mut failures = Vec::new();
    for (label, out) in runs.labelled() {
        for v in wave_bound_violations(instance, &out.transcript)? {
            failures.push(format!(
                "{label}: wave completing at round {} exceeds min sum-rate {} of {}",
                v.wave_round, v.min_sum_rate, v.coalition
            ));
        }
    }
    Ok(collect(failures))
}

fn check_ledger_laws(instance: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    let mut failures = Vec::new();
    for (label, out) in [("algo1", &runs.algo1), ("algo1-seeded", &runs.algo1_seeded)] {
        let t = &out.transcript;
        let prefixes = t.ledger_prefixes();
        let mut r = RateVector::zeros(instance.n());
        for (l, rec) in t.rounds.iter().enumerate() {
            r.increment(rec.transmitter);
            let paid = |i: usize| prefixes[i].minus().iter().sum::<Rational>();
            if paid(l + 1) - paid(l) != int(1) {
                failures.push(format!("{label}: round {} does not move exactly one unit", l + 1));
            }
            if instance.users().any(|i| prefixes[l + 1].plus()[i] != int(r.get(i) as i64)) {
                failures.push(format!("{label}: p⁺ differs from r after round {}", l + 1));
            }
            if let Some(&i) = rec.r_set.iter().find(|&&i| t.completion_round[i] < l + 1) {
                failures.push(format!("{label}: user {} pays in round {} after completing", i + 1, l + 1));
            }
        }
    }
    for (label, out) in [("algo2", &runs.algo2), ("algo2-seeded", &runs.algo2_seeded)] {
        for (l, prefix) in out.transcript.ledger_prefixes().iter().enumerate() {
            if let Some(i) = instance.users().find(|&i| prefix.minus()[i] > int(instance.num_wants(i) as i64)) {
                failures.push(format!("{label}: p⁻_{} exceeds its wants after round {l}", i + 1));
            }
        }
        let ledger = out.payments.ledger();
        let r_total = int(out.rates.total() as i64);
        if ledger.plus().iter().sum::<Rational>() != r_total || ledger.minus().iter().sum::<Rational>() != r_total {
            failures.push(format!("{label}: ledger totals differ from r_N"));
        }
    }
    Ok(collect(failures))
}

fn check_sum_rate_bound(instance: &Instance, _: &Runs) -> Result<CheckResult, CliError> {
    Ok(if min_sum_rate_bound_check(instance)? {
        CheckResult::Pass
    } else {
        CheckResult::Fail(vec!["min sum-rate exceeds min wants + max wants".into()])
    })
}

fn check_stability_search(instance: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    if instance.n() > MAX_SEARCH_USERS {
        return Ok(CheckResult::Skipped);
    }
    let mut failures = Vec::new();
    for (label, out) in runs.labelled() {
        let report = match check_stability(instance, &out.rates, &out.payments) {
            Ok(report) => report,
            Err(e) => {
                failures.push(format!("{label}: {e}"));
                continue;
            }
        };
        for m in &report.coalitions {
            let blocked = m.margin < int(0);
            let search = blocking_pair_search(instance, &out.rates, &out.payments, &m.coalition)?;
            if search.first.is_some() != blocked || m.witness.is_some() != blocked {
                failures.push(format!("{label}: margin {} of {} disagrees with the blocking-pair search", m.margin, m.coalition));
            }
        }
    }
    Ok(collect(failures))
}

fn check_tie_break(_: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    let mut failures = Vec::new();
    let (a, b) = (&runs.algo1, &runs.algo1_seeded);
    if a.rates.total() != b.rates.total() || a.payments.total() != b.payments.total() {
        failures.push(format!(
            "algo1: r_N={} p_N={} with lowest index, r_N={} p_N={} seeded",
            a.rates.total(),
            a.payments.total(),
            b.rates.total(),
            b.payments.total()
        ));
    }
    let (a, b) = (runs.algo2.payments.ledger(), runs.algo2_seeded.payments.ledger());
    if a.minus() != b.minus() {
        failures.push("algo2: p⁻ depends on the tie-break".to_string());
    }
    Ok(collect(failures))
}

fn check_schedule(_: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    let schedule = |o: &Outcome| o.transcript.rounds.iter().map(|r| (r.transmitter, r.v.clone())).collect::<Vec<_>>();
    let mut failures = Vec::new();
    for (label, a1, a2) in [("lowest-index", &runs.algo1, &runs.algo2), ("seeded", &runs.algo1_seeded, &runs.algo2_seeded)] {
        if schedule(a1) != schedule(a2) {
            failures.push(format!("{label}: the two mechanisms transmit differently"));
        }
    }
    Ok(collect(failures))
}

fn evaluate(check: Check, instance: &Instance, runs: &Runs) -> Result<CheckResult, CliError> {
    match check {
        Check::Replay => check_replay(instance, runs),
        Check::Rationality => check_rationality(instance, runs),
        Check::Stability => check_stability_margins(instance, runs),
        Check::Optimality => check_optimal(instance, runs),
        Check::Comparisons => check_comparisons(instance, runs),
        Check::WaveBound => check_wave_bound(instance, runs),
        Check::LedgerLaws => check_ledger_laws(instance, runs),
        Check::SumRateBound => check_sum_rate_bound(instance, runs),
        Check::StabilitySearch => check_stability_search(instance, runs),
        Check::TieBreak => check_tie_break(instance, runs),
        Check::Schedule => check_schedule(instance, runs),
    }
}

fn validate(args: &SweepArgs, checks: &[Check]) -> Result<(), CliError> {
    if args.count == 0 {
        return Err(CliError::input("count must be ≥ 1"));
    }
    if args.n.lo < 2 {
        return Err(CliError::input("n must be ≥ 2"));
    }
    if args.k.lo < 1 {
        return Err(CliError::input("k must be ≥ 1"));
    }
    if args.density.is_empty() || args.density.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
        return Err(CliError::input("densities must lie in (0, 1]"));
    }
    if let Some(check) = checks.iter().find(|c| c.uses_oracle()) {
        if args.n.hi > MAX_STABILITY_USERS || args.k.hi > MAX_STABILITY_PACKETS {
            return Err(CliError::Budget(format!(
                "check `{}` needs n ≤ {MAX_STABILITY_USERS} and k ≤ {MAX_STABILITY_PACKETS}; got n {} and k {}",
                check.name(),
                args.n,
                args.k
            )));
        }
    }
    Ok(())
}

/// Instance `index` of the sweep; depends only on the master seed and the index.
fn instance_at(args: &SweepArgs, index: usize) -> Result<(f64, u64, Instance), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rng.set_stream(index as u64);
    let n = rng.gen_range(args.n.lo..=args.n.hi);
    let k = rng.gen_range(args.k.lo..=args.k.hi);
    let density = args.density[rng.gen_range(0..args.density.len())];
    let instance_seed: u64 = rng.gen();
    let tie_seed: u64 = rng.gen();
    let instance = generate(n, k, density, instance_seed)
        .map_err(|e| CliError::input(format!("instance #{index} (n={n}, k={k}, density={density}): {e}")))?;
    Ok((density, tie_seed, instance))
}

fn sweep_one(args: &SweepArgs, checks: &[Check], index: usize) -> Result<InstanceReport, CliError> {
    let (density, tie_seed, instance) = instance_at(args, index)?;
    let go = |variant: Variant, tie_break: TieBreak| run(&instance, &MechanismConfig::new(variant).with_tie_break(tie_break));
    let seeded = TieBreak::SeededRandom { seed: tie_seed };
    let runs = Runs {
        algo1: go(Variant::PeerPayments, TieBreak::LowestIndex)?,
        algo2: go(Variant::Broker, TieBreak::LowestIndex)?,
        algo1_seeded: go(Variant::PeerPayments, seeded)?,
        algo2_seeded: go(Variant::Broker, seeded)?,
    };
    let results = checks.iter().map(|&c| Ok((c, evaluate(c, &instance, &runs)?))).collect::<Result<Vec<_>, CliError>>()?;
    Ok(InstanceReport { index, density, tie_seed, instance, runs, results })
}

/// Writes the instance, every run's transcript and solution, and the failure list.
fn dump(args: &SweepArgs, report: &InstanceReport) -> Result<PathBuf, CliError> {
    let dir = args.dump_dir.join(format!("instance-{:04}", report.index));
    files::write(&dir.join("instance.json"), &report.instance.render())?;
    for (label, out) in report.runs.labelled() {
        files::write(&dir.join(format!("{label}.transcript.json")), &out.transcript.to_json())?;
        let solution = Solution::new(out.rates.clone(), out.payments.clone());
        files::write(&dir.join(format!("{label}.solution.json")), &solution.to_json())?;
    }
    let mut text =
        format!("sweep seed {} instance #{} density {} tie-break seed {}\n", args.seed, report.index, report.density, report.tie_seed);
    for (check, result) in &report.results {
        if let CheckResult::Fail(msgs) = result {
            for m in msgs {
                text.push_str(&format!("{}: {m}\n", check.name()));
            }
        }
    }
    text.push_str("replay with: cde verify --instance instance.json --solution <run>.solution.json\n");
    files::write(&dir.join("failures.txt"), &text)?;
    Ok(dir)
}

#[derive(Default)]
struct Tally {
    pass: usize,
    fail: usize,
    skipped: usize,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<bool, CliError> {
    let mut checks: Vec<Check> = if args.checks.is_empty() { Check::value_variants().to_vec() } else { args.checks.clone() };
    checks.sort();
    checks.dedup();
    validate(args, &checks)?;

    let reports = (0..args.count).into_par_iter().map(|i| sweep_one(args, &checks, i)).collect::<Result<Vec<_>, _>>()?;

    let mut tallies: BTreeMap<Check, Tally> = checks.iter().map(|&c| (c, Tally::default())).collect();
    let mut failures = Vec::new();
    for report in &reports {
        for (check, result) in &report.results {
            let tally = tallies.get_mut(check).expect("tally per check");
            match result {
                CheckResult::Pass => tally.pass += 1,
                CheckResult::Skipped => tally.skipped += 1,
                CheckResult::Fail(msgs) => {
                    tally.fail += 1;
                    failures.extend(msgs.iter().map(|m| (report.index, *check, m.clone())));
                }
            }
        }
    }
    let mut dumps = Vec::new();
    for report in reports.iter().filter(|r| r.failed()) {
        dumps.push(dump(args, report)?);
    }
    let failed_instances = dumps.len();
    let all = checks.len() == Check::value_variants().len();
    let check_list = if all { "all".to_string() } else { checks.iter().map(|c| c.name()).collect::<Vec<_>>().join(",") };

    if args.json {
        let value = json!({
            "config": {
                "count": args.count,
                "n": [args.n.lo, args.n.hi],
                "k": [args.k.lo, args.k.hi],
                "density": args.density,
                "seed": args.seed,
                "checks": checks.iter().map(|c| c.name()).collect::<Vec<_>>(),
            },
            "properties": tallies.iter().map(|(c, t)| (c.name(), json!({"pass": t.pass, "fail": t.fail, "skipped": t.skipped}))).collect::<serde_json::Map<_, _>>(),
            "failures": failures.iter().map(|(i, c, m)| json!({"index": i, "property": c.name(), "message": m})).collect::<Vec<_>>(),
            "dumps": dumps,
            "passed": failures.is_empty(),
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("json output"));
        return Ok(failures.is_empty());
    }

    let densities: Vec<String> = args.density.iter().map(|d| d.to_string()).collect();
    println!(
        "sweep: count={} n={} k={} density={} seed={} checks={check_list}",
        args.count,
        args.n,
        args.k,
        densities.join(","),
        args.seed
    );
    let rows: Vec<Vec<String>> = tallies
        .iter()
        .map(|(c, t)| {
            let verdict = if t.fail == 0 { "PASS" } else { "FAIL" };
            vec![c.name(), t.pass.to_string(), t.fail.to_string(), t.skipped.to_string(), verdict.to_string()]
        })
        .collect();
    print!("{}", cde_core::economics::table::text_table(&["property", "pass", "fail", "skipped", ""], &rows));
    for (index, check, message) in failures.iter().take(MAX_FAILURES_PRINTED) {
        println!("FAIL #{index} {}: {message}", check.name());
    }
    if failures.len() > MAX_FAILURES_PRINTED {
        println!("... {} more failures", failures.len() - MAX_FAILURES_PRINTED);
    }
    if failures.is_empty() {
        let what = if all { "all properties".to_string() } else { check_list };
        println!("all {} × {what} PASS", args.count);
    } else {
        println!("{} failures on {failed_instances} of {} instances; artifacts in {}", failures.len(), args.count, args.dump_dir.display());
    }
    Ok(failures.is_empty())
}
