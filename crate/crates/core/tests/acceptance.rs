//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cde_core::economics::payments::{int, ratio, BrokerLedger, Payments, Rational};
use cde_core::economics::{blocking_pair_search, check_optimality, check_stability, is_rational_pair, utilities, utility_comparisons};
use cde_core::instance::{generate, Coalition, Instance};
use cde_core::mechanism::{
    replay_verify, run, wave_bound_violations, MechanismConfig, Outcome, PaymentDelta, SelectionPolicy, TieBreak, Transcript, Variant,
    ViolationKind,
};
use cde_core::rate_region::{min_sum_rate, min_sum_rate_bound_check, RateVector};

const CORPUS_SIZE: usize = 525;
const DENSITIES: [f64; 3] = [0.3, 0.5, 0.7];
const TIE_BREAK_DRAWS: u64 = 10;
const MAX_FAILURES_SHOWN: usize = 5;

struct Case {
    index: usize,
    instance: Instance,
    algo1: Outcome,
    algo2: Outcome,
}

impl Case {
    fn label(&self) -> String {
        format!("#{} {}", self.index, self.instance.render().trim_end())
    }
}

/// Every (n, k, density) combination with n in 2..=6 and k in 2..=8, five seeds each.
fn corpus() -> Vec<Case> {
    (0..CORPUS_SIZE)
        .map(|index| {
            let n = 2 + index % 5;
            let k = 2 + (index / 5) % 7;
            let density = DENSITIES[(index / 35) % 3];
            let instance = generate(n, k, density, 0xC0DE_0000 + index as u64).expect("corpus instance");
            let algo1 = run(&instance, &MechanismConfig::new(Variant::PeerPayments)).expect("peer run");
            let algo2 = run(&instance, &MechanismConfig::new(Variant::Broker)).expect("broker run");
            Case { index, instance, algo1, algo2 }
        })
        .collect()
}

type Verdict = Result<String, Vec<String>>;

fn finish(failures: Vec<String>, detail: String) -> Verdict {
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(failures)
    }
}

fn total_wants(i: &Instance) -> i64 {
    i.users().map(|u| i.num_wants(u) as i64).sum()
}

fn criterion_1() -> Verdict {
    let triangle = Instance::new(3, 11, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
    let mut failures = Vec::new();
    let mut check = |what: &str, ok: bool| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    let trace = || {
        let a1 = run(&triangle, &MechanismConfig::new(Variant::PeerPayments)).unwrap();
        let a2 = run(&triangle, &MechanismConfig::new(Variant::Broker)).unwrap();
        let u1 = utilities(&triangle, &a1.rates, &a1.payments).unwrap();
        let u2 = utilities(&triangle, &a2.rates, &a2.payments).unwrap();
        (a1, a2, u1, u2)
    };
    let (a1, a2, u1, u2) = trace();
    check("algo1 r = [1,1,0]", a1.rates.rates() == [1, 1, 0]);
    if let Payments::Matrix(m) = &a1.payments {
        let mut expected = vec![vec![int(0); 3]; 3];
        expected[1][0] = ratio(1, 2);
        expected[2][0] = ratio(1, 2);
        expected[0][1] = int(1);
        check("algo1 p_{2,1} = p_{3,1} = 1/2, p_{1,2} = 1, others 0", m.rows() == expected.as_slice());
    } else {
        check("algo1 returns a payment matrix", false);
    }
    let u1: Vec<Rational> = u1.into_iter().map(|u| u.u).collect();
    check("algo1 utilities [0,1/2,1/2]", u1 == [int(0), ratio(1, 2), ratio(1, 2)]);
    check("algo2 r = [1,1,0]", a2.rates.rates() == [1, 1, 0]);
    check("algo2 p⁻ = [2/3,2/3,2/3]", a2.payments.ledger().minus() == [ratio(2, 3), ratio(2, 3), ratio(2, 3)]);
    let u2: Vec<Rational> = u2.into_iter().map(|u| u.u).collect();
    check("algo2 utilities [1/3,1/3,1/3]", u2 == [ratio(1, 3), ratio(1, 3), ratio(1, 3)]);

    let mut times: Vec<Duration> = (0..51)
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(trace());
            start.elapsed()
        })
        .collect();
    times.sort();
    let median = times[times.len() / 2];
    check(&format!("median runtime {median:?} < 1 ms"), median < Duration::from_millis(1));
    finish(failures, format!("exact traces reproduced, median runtime of both runs {median:?}"))
}

fn criterion_2(cases: &[Case]) -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    for case in cases {
        let inst = &case.instance;
        let grand = Coalition::grand(inst.n());
        let msr = min_sum_rate(inst, &grand).unwrap();
        for (name, out) in [("algo1", &case.algo1), ("algo2", &case.algo2)] {
            let (r, p) = (&out.rates, &out.payments);
            let mut problems = Vec::new();
            if !is_rational_pair(inst, r, p, &grand).unwrap() {
                problems.push("not rational".to_string());
            } else if !check_stability(inst, r, p).unwrap().stable {
                problems.push("not stable".to_string());
            }
            let verdict = check_optimality(inst, r, p).unwrap();
            if !verdict.optimal {
                problems.push(format!("not optimal ({})", verdict.reasons.join("; ")));
            }
            if r.total() != msr {
                problems.push(format!("r_N = {} but min sum-rate = {msr}", r.total()));
            }
            if p.total() != int(r.total() as i64) {
                problems.push("p_N != r_N".to_string());
            }
            if !problems.is_empty() {
                failures.push(format!("{} {name}: {}", case.label(), problems.join(", ")));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(300) {
        failures.push(format!("runtime {elapsed:?} exceeds 5 minutes"));
    }
    finish(failures, format!("{} instances x 2 mechanisms rational, stable, optimal in {elapsed:.2?}", cases.len()))
}

fn criterion_3(cases: &[Case]) -> Verdict {
    let mut failures = Vec::new();
    for case in cases {
        let inst = &case.instance;
        let cmp = match utility_comparisons(inst, (&case.algo1.rates, &case.algo1.payments), (&case.algo2.rates, &case.algo2.payments)) {
            Ok(cmp) => cmp,
            Err(e) => {
                failures.push(format!("{}: {e}", case.label()));
                continue;
            }
        };
        let expected = int(total_wants(inst) - case.algo1.rates.total() as i64);
        let sums_ok = cmp.sum_utility.iter().all(|s| *s == expected) && case.algo2.rates.total() == case.algo1.rates.total();
        if !(sums_ok && cmp.min_utility_order_ok() && cmp.closed_form_ok()) {
            failures.push(format!("{}:\n{}", case.label(), cmp.render_text()));
        }
    }
    finish(failures, format!("{} instances: sum-utility identity, min-utility order and closed form exact", cases.len()))
}

fn criterion_4(cases: &[Case]) -> Verdict {
    let mut failures = Vec::new();
    let mut checked = 0;
    for case in cases.iter().filter(|c| c.instance.n() <= 5) {
        checked += 1;
        let seeded = run(
            &case.instance,
            &MechanismConfig::new(Variant::PeerPayments).with_tie_break(TieBreak::SeededRandom { seed: case.index as u64 }),
        )
        .unwrap();
        for t in [&case.algo1.transcript, &case.algo2.transcript, &seeded.transcript] {
            for v in wave_bound_violations(&case.instance, t).unwrap() {
                failures.push(format!(
                    "{}: wave at round {} > min sum-rate {} of {}",
                    case.label(),
                    v.wave_round,
                    v.min_sum_rate,
                    v.coalition
                ));
            }
        }
    }
    finish(failures, format!("{checked} instances with n <= 5, every eligible coalition of every wave"))
}

fn criterion_5(cases: &[Case]) -> Verdict {
    let mut failures = Vec::new();
    let mut rounds = 0;
    for case in cases {
        let inst = &case.instance;
        let t = &case.algo1.transcript;
        let prefixes = t.ledger_prefixes();
        let mut r = RateVector::zeros(inst.n());
        for (l, rec) in t.rounds.iter().enumerate() {
            rounds += 1;
            r.increment(rec.transmitter);
            let before: Rational = prefixes[l].minus().iter().sum();
            let after: Rational = prefixes[l + 1].minus().iter().sum();
            if after - before != int(1) {
                failures.push(format!("{}: round {} does not move exactly one unit", case.label(), l + 1));
            }
            if (0..inst.n()).any(|i| prefixes[l + 1].plus()[i] != int(r.get(i) as i64)) {
                failures.push(format!("{}: p⁺ != r after round {}", case.label(), l + 1));
            }
            if let Some(&i) = rec.r_set.iter().find(|&&i| t.completion_round[i] < l + 1) {
                failures.push(format!("{}: completed user {} in R_{}", case.label(), i + 1, l + 1));
            }
        }
        for (l, prefix) in case.algo2.transcript.ledger_prefixes().iter().enumerate() {
            if let Some(i) = inst.users().find(|&i| prefix.minus()[i] > int(inst.num_wants(i) as i64)) {
                failures.push(format!("{}: broker p⁻_{} exceeds |X̄_{}| after round {l}", case.label(), i + 1, i + 1));
            }
        }
    }
    finish(failures, format!("{rounds} peer rounds and all broker prefixes checked"))
}

fn mutations(t: &Transcript) -> Vec<(ViolationKind, Transcript)> {
    let mut out = Vec::new();
    if t.rounds.is_empty() {
        return out;
    }
    let mut zeroed = t.clone();
    zeroed.rounds[0].v = cde_core::field::PacketVector::zero(zeroed.rounds[0].v.len());
    out.push((ViolationKind::VectorNotInnovative, zeroed));

    let n = t.n();
    if let Some((l, outsider)) = t.rounds.iter().enumerate().find_map(|(l, rec)| (0..n).find(|i| !rec.t_set.contains(i)).map(|i| (l, i))) {
        let mut wrong = t.clone();
        wrong.rounds[l].transmitter = outsider;
        out.push((ViolationKind::TransmitterNotMaximal, wrong));
    }

    let mut delta = t.clone();
    match &mut delta.rounds[0].payment_delta {
        PaymentDelta::Peer(transfers) => transfers[0].amount += int(1),
        PaymentDelta::Broker { credit, .. } => credit.1 += int(1),
    }
    out.push((ViolationKind::PaymentDeltaMismatch, delta));
    out
}

fn criterion_6(cases: &[Case]) -> Verdict {
    let mut failures = Vec::new();
    let mut replayed = 0;
    let mut detected = [0usize; 3];
    let triangle = Instance::new(3, 11, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
    let tri1 = run(&triangle, &MechanismConfig::new(Variant::PeerPayments)).unwrap();
    let tri2 = run(&triangle, &MechanismConfig::new(Variant::Broker)).unwrap();
    let mut sources: Vec<(String, Instance, Transcript)> =
        vec![("triangle algo1".into(), triangle.clone(), tri1.transcript), ("triangle algo2".into(), triangle, tri2.transcript)];
    for case in cases {
        let randomized = run(
            &case.instance,
            &MechanismConfig::new(Variant::Broker)
                .with_tie_break(TieBreak::SeededRandom { seed: case.index as u64 })
                .with_selection(SelectionPolicy::Randomized { seed: case.index as u64 }),
        )
        .unwrap();
        for t in [&case.algo1.transcript, &case.algo2.transcript, &randomized.transcript] {
            sources.push((case.label(), case.instance.clone(), t.clone()));
        }
    }
    for (label, inst, t) in &sources {
        // a transcript must also survive its own file format
        let t = Transcript::from_json(&t.to_json()).unwrap();
        let report = replay_verify(inst, &t).unwrap();
        replayed += 1;
        if !report.passed() {
            failures.push(format!("{label}: genuine transcript rejected: {}", report.violations[0]));
        }
        for (kind, mutant) in mutations(&t) {
            let report = replay_verify(inst, &mutant).unwrap();
            let slot = match kind {
                ViolationKind::VectorNotInnovative => 0,
                ViolationKind::TransmitterNotMaximal => 1,
                _ => 2,
            };
            if report.violations.iter().any(|v| v.kind == kind) {
                detected[slot] += 1;
            } else {
                failures.push(format!("{label}: mutation '{}' not detected", kind.label()));
            }
        }
    }
    if detected.contains(&0) {
        failures.push(format!("some mutation class was never exercised: {detected:?}"));
    }
    finish(
        failures,
        format!(
            "{replayed} transcripts replay cleanly; detected {} zeroed-vector, {} wrong-transmitter, {} wrong-delta mutants",
            detected[0], detected[1], detected[2]
        ),
    )
}

fn criterion_7(cases: &[Case]) -> Verdict {
    let failures: Vec<String> = cases
        .iter()
        .filter(|c| !min_sum_rate_bound_check(&c.instance).unwrap())
        .map(|c| format!("{}: min sum-rate exceeds min + max wants", c.label()))
        .collect();
    finish(failures, format!("{} instances within the bound", cases.len()))
}

/// A rational ledger for `r` in which users pay random halves of their wants and the
/// surplus over `r_N` is credited to one random user.
fn adversarial_ledger(inst: &Instance, r: &RateVector, rng: &mut ChaCha8Rng) -> Option<Payments> {
    let minus: Vec<Rational> = inst.users().map(|i| ratio(rng.gen_range(0..=2 * inst.num_wants(i) as i64), 2)).collect();
    let extra = minus.iter().sum::<Rational>() - int(r.total() as i64);
    if extra < int(0) {
        return None;
    }
    let mut plus: Vec<Rational> = r.rates().iter().map(|&x| int(x as i64)).collect();
    plus[rng.gen_range(0..inst.n())] += extra;
    Some(Payments::Ledger(BrokerLedger::new(plus, minus).unwrap()))
}

fn criterion_8(cases: &[Case]) -> Verdict {
    let mut failures = Vec::new();
    let (mut coalitions, mut negative) = (0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in cases.iter().take(100).filter(|c| c.instance.n() <= 4) {
        let inst = &case.instance;
        let mut pairs =
            vec![(case.algo1.rates.clone(), case.algo1.payments.clone()), (case.algo2.rates.clone(), case.algo2.payments.clone())];
        for _ in 0..4 {
            if let Some(p) = adversarial_ledger(inst, &case.algo1.rates, &mut rng) {
                pairs.push((case.algo1.rates.clone(), p));
            }
        }
        for (r, p) in &pairs {
            let report = check_stability(inst, r, p).unwrap();
            for m in &report.coalitions {
                coalitions += 1;
                let blocked = m.margin < int(0);
                negative += usize::from(blocked);
                let search = blocking_pair_search(inst, r, p, &m.coalition).unwrap();
                if search.first.is_some() != blocked || m.witness.is_some() != blocked {
                    failures.push(format!("{}: {} margin {} disagrees with search", case.label(), m.coalition, m.margin));
                }
            }
        }
    }
    finish(failures, format!("{coalitions} coalition checks agree ({negative} with negative margin)"))
}

fn criterion_9(cases: &[Case]) -> Verdict {
    let mut failures = Vec::new();
    for case in cases {
        let p_n = case.algo1.payments.total();
        let minus = case.algo2.payments.ledger();
        for draw in 0..TIE_BREAK_DRAWS {
            let tie_break = TieBreak::SeededRandom { seed: case.index as u64 * TIE_BREAK_DRAWS + draw };
            let a1 = run(&case.instance, &MechanismConfig::new(Variant::PeerPayments).with_tie_break(tie_break)).unwrap();
            let a2 = run(&case.instance, &MechanismConfig::new(Variant::Broker).with_tie_break(tie_break)).unwrap();
            if a1.rates.total() != case.algo1.rates.total() || a1.payments.total() != p_n {
                failures.push(format!("{} draw {draw}: algo1 totals differ", case.label()));
            }
            if a2.payments.ledger().minus() != minus.minus() {
                failures.push(format!("{} draw {draw}: algo2 p⁻ differs", case.label()));
            }
        }
    }
    finish(failures, format!("{} instances x {TIE_BREAK_DRAWS} seeded tie-breaks match lowest-index", cases.len()))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cases = corpus();
    println!("acceptance corpus: {} instances built in {:.2?}", cases.len(), start.elapsed());
    let criteria: [(&str, &dyn Fn() -> Verdict); 9] = [
        ("worked-trace reproduction", &criterion_1),
        ("optimality suite", &|| criterion_2(&cases)),
        ("utility comparisons", &|| criterion_3(&cases)),
        ("completion-wave bound", &|| criterion_4(&cases)),
        ("per-round ledger laws", &|| criterion_5(&cases)),
        ("transcript replay", &|| criterion_6(&cases)),
        ("sum-rate upper bound", &|| criterion_7(&cases)),
        ("stability-reduction cross-validation", &|| criterion_8(&cases)),
        ("tie-break invariance", &|| criterion_9(&cases)),
    ];
    let mut failed = 0;
    for (number, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match check() {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail}; {:.2?})", number + 1, t.elapsed()),
            Err(failures) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL ({} failures; {:.2?})", number + 1, failures.len(), t.elapsed());
                for f in failures.iter().take(MAX_FAILURES_SHOWN) {
                    println!("    {f}");
                }
            }
        }
    }
    println!("acceptance: {}/9 criteria passed in {:.2?}", 9 - failed, start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
