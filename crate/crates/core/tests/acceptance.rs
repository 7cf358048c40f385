//! Acceptance suite at desk scale (`n = 4`, `t = 1` unless stated).
//!
//! Runs without the libtest harness so that every criterion prints exactly
//! one `PASS` or `FAIL` line; the process exits nonzero if any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use ssbft_recycle::adversary::{stream, stub_delay, InjectMode, Policy};
use ssbft_recycle::harness::{
    csv_rows, csv_string, run_ensemble, run_trial, write_trace, Config, Trace, TrialOutput,
};
use ssbft_recycle::mvc::eig::{CoInstance, CoMsg, EigCo, Label};
use ssbft_recycle::object::{CoreEnv, DecisionOracle, DelayStub, EstPayload, RecyclableObject};
use ssbft_recycle::recycler::Window;
use ssbft_recycle::NodeId;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ensemble(
    adversary: Policy,
    inject: InjectMode,
    trials: usize,
    rounds: u64,
    seed: u64,
) -> Vec<TrialOutput> {
    let config = Config {
        adversary,
        inject,
        trials,
        rounds,
        seed,
        ..Config::default()
    };
    run_ensemble(&config).expect("valid configuration")
}

/// 1. Consensus captures from round 2κ agree and respect unanimous inputs.
fn mvc_stabilization() -> Outcome {
    let mut violations = 0;
    let mut captures = 0;
    for (k, &policy) in Policy::ALL.iter().enumerate() {
        for out in ensemble(policy, InjectMode::Full, 100, 250, 1_000 * (k as u64 + 1)) {
            let v = &out.metrics.violations;
            violations += v.mvc_agreement + v.mvc_validity + v.mvc_bottom;
            let kappa = out.params.kappa;
            captures += out
                .trace
                .rounds
                .iter()
                .filter(|r| r.round >= 2 * kappa && r.phase == 0)
                .count();
        }
    }
    outcome(
        violations == 0,
        format!("{captures} captures over 5 policies x 100 trials, {violations} violations"),
    )
}

fn level_msg(level: u8, entries: Vec<(Label, Option<bool>)>) -> Option<CoMsg<bool>> {
    Some(CoMsg { level, entries })
}

const CHOICES: [Option<bool>; 3] = [Some(false), Some(true), None];

/// Every assignment of {0, 1, ⊥} to `k` positions.
fn assignments(k: usize) -> Vec<Vec<Option<bool>>> {
    (0..3usize.pow(k as u32))
        .map(|mut code| {
            (0..k)
                .map(|_| {
                    let c = CHOICES[code % 3];
                    code /= 3;
                    c
                })
                .collect()
        })
        .collect()
}

/// 2. Exhaustive EIG at `n = 4`, `t = 1`.
///
/// A receiver's decision depends only on what it received, so the
/// second-exchange choices are enumerated per receiver: agreement over every
/// joint choice holds iff the union of per-receiver decision sets is one
/// value.
fn eig_exhaustive() -> Outcome {
    let (n, t) = (4, 1);
    let mut cases = 0u64;
    let mut failures = 0u64;
    for byz in 0..n {
        let correct: Vec<usize> = (0..n).filter(|&j| j != byz).collect();
        for props in 0..1u32 << correct.len() {
            let prop = |j: usize| props >> correct.iter().position(|&c| c == j).unwrap() & 1 == 1;
            for first in assignments(correct.len()) {
                let mut nodes: Vec<EigCo<bool>> = correct
                    .iter()
                    .map(|&j| EigCo::new(NodeId(j), n, t))
                    .collect();
                let sent: Vec<Vec<Option<CoMsg<bool>>>> = nodes
                    .iter_mut()
                    .zip(&correct)
                    .map(|(co, &j)| co.propose(prop(j)))
                    .collect();
                let mut relays = Vec::new();
                for (r, &j) in correct.iter().enumerate() {
                    let mut inbox = vec![None; n];
                    for (s, &k) in correct.iter().enumerate() {
                        inbox[k] = sent[s][j].clone();
                    }
                    inbox[byz] = level_msg(0, vec![(Label::root(), first[r])]);
                    relays.push(nodes[r].process(&inbox));
                    if nodes[r].result().is_some() {
                        failures += 1;
                    }
                }
                let mut decided = BTreeSet::new();
                for (r, &j) in correct.iter().enumerate() {
                    for second in assignments(correct.len()) {
                        let mut co = nodes[r].clone();
                        let mut inbox = vec![None; n];
                        for (s, &k) in correct.iter().enumerate() {
                            inbox[k] = relays[s][j].clone();
                        }
                        let entries = correct
                            .iter()
                            .zip(&second)
                            .map(|(&c, &v)| (Label(vec![c as u8]), v))
                            .collect();
                        inbox[byz] = level_msg(1, entries);
                        co.process(&inbox);
                        cases += 1;
                        match co.result() {
                            Some(v) => {
                                decided.insert(v);
                            }
                            None => failures += 1,
                        }
                    }
                }
                let unanimous = correct.iter().all(|&j| prop(j) == prop(correct[0]));
                if decided.len() != 1 || (unanimous && !decided.contains(&prop(correct[0]))) {
                    failures += 1;
                }
            }
        }
    }
    outcome(
        failures == 0,
        format!("{cases} receiver runs, {failures} failures"),
    )
}

/// 3. Distinct corrupted indices under the worst-case SIG-index adversary.
fn sig_convergence() -> Outcome {
    let outs = ensemble(Policy::WorstSig, InjectMode::Targeted, 200, 300, 3_000);
    let within = outs
        .iter()
        .filter(|o| o.metrics.cycles_to_index_agreement.is_some_and(|c| c <= 7))
        .count();
    let attempts: u64 = outs.iter().map(|o| o.metrics.convergence_attempts).sum();
    let successes: u64 = outs.iter().map(|o| o.metrics.convergence_successes).sum();
    let freq = if attempts == 0 {
        0.0
    } else {
        successes as f64 / attempts as f64
    };
    let share = within as f64 / outs.len() as f64;

    // Not part of the criterion: full-state corruption reaches the coin
    // branch, whose convergence rate is reported for reference.
    let full = ensemble(Policy::WorstSig, InjectMode::Full, 200, 300, 3_500);
    let fa: u64 = full.iter().map(|o| o.metrics.convergence_attempts).sum();
    let fs: u64 = full.iter().map(|o| o.metrics.convergence_successes).sum();
    outcome(
        share >= 0.95 && freq >= 0.45,
        format!(
            "{within}/200 within 7 cycles, per-cycle frequency {freq:.3} ({successes}/{attempts}); full corruption {fs}/{fa}"
        ),
    )
}

/// Independent replay of the index from the agreement round.
fn closure_errors(trace: &Trace, from: usize, cycles: u64) -> (u64, BTreeSet<bool>) {
    let p = &trace.params;
    let last = from + (cycles * p.kappa) as usize;
    let mut v = trace.rounds[from].indices[0];
    let mut errors = 0;
    let mut incs = BTreeSet::new();
    for rec in &trace.rounds[from + 1..=last] {
        if rec.phase == p.kappa - 1 {
            let inc = rec.mvc[0] == Some(true);
            incs.insert(inc);
            v = (v % p.index_states + inc as u64) % p.index_states;
        }
        errors += rec.indices.iter().filter(|&&i| i != v).count() as u64;
    }
    (errors, incs)
}

/// 4. After agreement the index is `(v + Σ inc) mod I` for 50 cycles.
fn sig_closure() -> Outcome {
    let cycles = 50;
    let outs = ensemble(Policy::WorstSig, InjectMode::Full, 20, 400, 4_000);
    let mut errors = 0;
    let mut short = 0;
    let mut mixed = 0;
    let mut seen = BTreeSet::new();
    for out in &outs {
        let kappa = out.params.kappa;
        match out.metrics.agreement_round {
            Some(a) if a + cycles * kappa < out.trace.rounds.len() as u64 => {
                let (e, incs) = closure_errors(&out.trace, a as usize, cycles);
                errors += e;
                mixed += (incs.len() == 2) as usize;
                seen.extend(incs);
            }
            _ => short += 1,
        }
    }
    outcome(
        errors == 0 && short == 0 && seen.len() == 2,
        format!("20 trials x 50 cycles, {errors} deviations, {short} without room, {mixed} with mixed increments"),
    )
}

/// Shared ensemble for the recycling criteria: 40 trials per policy.
fn recycling_ensemble() -> Vec<TrialOutput> {
    Policy::ALL
        .iter()
        .enumerate()
        .flat_map(|(k, &p)| ensemble(p, InjectMode::Full, 40, 500, 5_000 + 100 * k as u64))
        .collect()
}

/// 5. Identical retired sets after the clean round.
fn cor_agreement(outs: &[TrialOutput]) -> Outcome {
    let violations: u64 = outs
        .iter()
        .map(|o| o.metrics.violations.cor_agreement)
        .sum();
    let unclean = outs
        .iter()
        .filter(|o| o.metrics.clean_round.is_none())
        .count();
    let recycles: usize = outs
        .iter()
        .filter_map(|o| o.metrics.clean_round.map(|c| (o, c as usize)))
        .flat_map(|(o, c)| &o.trace.rounds[c..])
        .map(|r| r.retired[0].len())
        .sum();
    outcome(
        violations == 0 && unclean == 0,
        format!("{} trials, {recycles} recycles checked, {violations} violations, {unclean} never clean", outs.len()),
    )
}

/// 6. Every increment follows a sampled delivery one pipeline cycle earlier.
fn cor_validity1(outs: &[TrialOutput]) -> Outcome {
    let violations: u64 = outs
        .iter()
        .map(|o| o.metrics.violations.cor_validity1)
        .sum();
    let increments: usize = outs
        .iter()
        .filter_map(|o| o.metrics.clean_round.map(|c| (o, c as usize)))
        .map(|(o, c)| {
            let recs = &o.trace.rounds;
            (c.max(1)..recs.len())
                .filter(|&r| recs[r].indices[0] != recs[r - 1].indices[0])
                .count()
        })
        .sum();
    outcome(
        violations == 0,
        format!("{increments} increments checked, {violations} violations"),
    )
}

/// 7. Unanimous sampled delivery is answered within two cycles.
fn cor_validity2(outs: &[TrialOutput]) -> Outcome {
    let violations: u64 = outs
        .iter()
        .map(|o| o.metrics.violations.cor_validity2)
        .sum();
    let triggers: usize = outs
        .iter()
        .filter_map(|o| o.metrics.clean_round.map(|c| (o, c as usize)))
        .flat_map(|(o, c)| &o.trace.rounds[c..])
        .filter(|r| r.phase == 0 && r.sampled.iter().all(|s| *s == Some(true)))
        .count();
    outcome(
        violations == 0 && triggers > 0,
        format!("{triggers} unanimous samples checked, {violations} violations"),
    )
}

struct StubOracle {
    seed: u64,
    dmax: u32,
    round: u64,
    agreed: bool,
}

impl DecisionOracle for StubOracle {
    fn agreed(&self, _slot: usize) -> Option<bool> {
        Some(self.agreed)
    }
    fn delay(&self, node: NodeId, slot: usize) -> u32 {
        stub_delay(self.seed, self.dmax, node, slot, self.round)
    }
    fn max_delay(&self) -> u32 {
        self.dmax
    }
}

/// One standalone object per node, no recycling, a Byzantine node sending
/// random delivery flags. Returns the number of late nodes.
fn delivery_trial(seed: u64, dmax: u32, rounds: u64) -> (u64, u64) {
    let (n, t, byz) = (4, 1, (seed % 4) as usize);
    let correct: Vec<usize> = (0..n).filter(|&j| j != byz).collect();
    let mut rng = stream(seed, 7 << 40);
    let mut objs: Vec<RecyclableObject<DelayStub>> = correct
        .iter()
        .map(|&j| RecyclableObject::new(DelayStub::default(), NodeId(j), n, t))
        .collect();
    let props: Vec<bool> = correct.iter().map(|_| rng.gen()).collect();
    for (o, &v) in objs.iter_mut().zip(&props) {
        o.propose(v);
    }
    let agreed = props.iter().filter(|&&v| v).count() * 2 > props.len();
    let mut sent: Vec<Option<EstPayload>> = vec![None; n];
    let mut history: Vec<Vec<bool>> = Vec::new();
    for round in 0..rounds {
        let oracle = StubOracle {
            seed,
            dmax,
            round,
            agreed,
        };
        let mut next = vec![None; n];
        for (k, &j) in correct.iter().enumerate() {
            let mut inbox = sent.clone();
            inbox[byz] = Some(EstPayload {
                core: None,
                delivered: rng.gen(),
            });
            let env = CoreEnv {
                round,
                node: NodeId(j),
                slot: 0,
                n,
                t,
                coin: false,
                oracle: &oracle,
            };
            next[j] = Some(objs[k].pulse_step(&inbox, &env));
            objs[k].result();
        }
        sent = next;
        history.push(objs.iter().map(RecyclableObject::was_delivered).collect());
    }
    // First round from which each node holds wasDelivered() to the end.
    let held: Vec<Option<usize>> = (0..correct.len())
        .map(|k| {
            let last_off = history.iter().rposition(|h| !h[k]);
            match last_off {
                None => Some(0),
                Some(r) if r + 1 < history.len() => Some(r + 1),
                Some(_) => None,
            }
        })
        .collect();
    let bound = dmax as usize + 2;
    let mut late = 0;
    let mut reached = 0;
    for &first in held.iter().flatten() {
        reached += 1;
        late += held
            .iter()
            .filter(|h| h.is_none_or(|r| r > first + bound))
            .count() as u64;
    }
    (late, reached)
}

/// 8. Delivery indications spread within `Dmax + 2` rounds.
fn delivery_spread() -> Outcome {
    let (dmax, rounds) = (10, 40);
    let (mut late, mut reached) = (0, 0);
    for seed in 0..100 {
        let (l, r) = delivery_trial(8_000 + seed, dmax, rounds);
        late += l;
        reached += r;
    }
    outcome(
        late == 0 && reached > 0,
        format!("100 trials, {reached} retained deliveries, {late} late nodes"),
    )
}

/// 9. A thousand instances through an 8-slot array.
fn end_to_end() -> Outcome {
    let config = Config {
        adversary: Policy::Equivocate,
        inject: InjectMode::Full,
        rounds: 12_000,
        seed: 9_000,
        ..Config::default()
    };
    let out = run_trial(&config, 0).expect("valid configuration");
    let m = &out.metrics;
    let bound = config.log_size + 1;
    outcome(
        m.instances_completed >= 1000
            && m.violations.unread_retirement == 0
            && m.max_non_fresh <= bound,
        format!(
            "{} instances, {} unread retirements, at most {} live slots (bound {bound})",
            m.instances_completed, m.violations.unread_retirement, m.max_non_fresh
        ),
    )
}

/// 10. Window membership against plain set enumeration.
fn window_algebra() -> Outcome {
    let mut checked = 0;
    let mut failures = 0;
    for index_num in 2..=16usize {
        for log_size in 0..=index_num - 2 {
            let w = Window {
                index_num,
                log_size,
            };
            let set = |ind: usize| -> BTreeSet<usize> {
                (0..=log_size)
                    .map(|k| (ind + index_num - k) % index_num)
                    .collect()
            };
            for ind in 0..index_num {
                checked += 1;
                let expected = set(ind);
                let slots: BTreeSet<usize> = w.slots(ind as u64).into_iter().collect();
                let by_contains: BTreeSet<usize> = (0..index_num)
                    .filter(|&s| w.contains(ind as u64, s))
                    .collect();
                let left: Vec<usize> = expected
                    .difference(&set((ind + 1) % index_num))
                    .copied()
                    .collect();
                let ok = slots == expected
                    && by_contains == expected
                    && w.slots(ind as u64).len() == log_size + 1
                    && left == vec![(ind + index_num - log_size) % index_num];
                failures += !ok as u64;
            }
        }
    }
    outcome(
        failures == 0,
        format!("{checked} (indexNum, logSize, ind) triples, {failures} mismatches"),
    )
}

/// 11. Identical configurations give identical bytes.
fn determinism() -> Outcome {
    let config = Config {
        adversary: Policy::Random,
        inject: InjectMode::Full,
        trials: 4,
        rounds: 300,
        seed: 11_000,
        core: ssbft_recycle::object::CoreKind::MmrLite,
        ..Config::default()
    };
    let dir = tempfile::tempdir().expect("temp dir");
    let render = |tag: &str| -> (String, Vec<u8>) {
        let outs = run_ensemble(&config).expect("valid configuration");
        let path = dir.path().join(format!("{tag}.trace.jsonl"));
        write_trace(&path, &outs).expect("trace written");
        let csv = csv_string(&csv_rows(&config, &outs)).expect("csv");
        (csv, std::fs::read(path).expect("trace read"))
    };
    let (csv_a, trace_a) = render("a");
    let (csv_b, trace_b) = render("b");
    let sequential: Vec<TrialOutput> = (0..config.trials)
        .map(|k| run_trial(&config, k).expect("trial"))
        .collect();
    let csv_c = csv_string(&csv_rows(&config, &sequential)).expect("csv");
    outcome(
        csv_a == csv_b && trace_a == trace_b && csv_a == csv_c,
        format!(
            "{} trace bytes, {} csv bytes compared",
            trace_a.len(),
            csv_a.len()
        ),
    )
}

fn main() -> ExitCode {
    let recycling = recycling_ensemble();
    let criteria: Vec<Criterion> = vec![
        (
            "consensus captures stabilize within 2 cycles",
            Box::new(mvc_stabilization),
        ),
        ("EIG core exhaustive at n=4, t=1", Box::new(eig_exhaustive)),
        (
            "SIG-index convergence from distinct indices",
            Box::new(sig_convergence),
        ),
        ("SIG-index closure over 50 cycles", Box::new(sig_closure)),
        (
            "recycling agreement",
            Box::new(|| cor_agreement(&recycling)),
        ),
        (
            "recycling validity: no increment without delivery",
            Box::new(|| cor_validity1(&recycling)),
        ),
        (
            "recycling validity: unanimous delivery is answered",
            Box::new(|| cor_validity2(&recycling)),
        ),
        (
            "delivery indications spread within Dmax+2",
            Box::new(delivery_spread),
        ),
        (
            "1000 instances through an 8-slot array",
            Box::new(end_to_end),
        ),
        ("window algebra", Box::new(window_algebra)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let Outcome { pass, detail } = check();
        failed += !pass as usize;
        println!(
            "criterion {:>2} {}: {name}: {detail} [{:.1}s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
