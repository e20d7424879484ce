//! Seeded randomized checks of the queues against [`crate::oracle`].
//!
//! Each check returns a [`CheckReport`]; a failing report carries the
//! smallest counterexample found, formatted for humans.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::oracle::{exhaustive_feasible, oracle_feasible, validate_gap_free, validate_schedule};
use crate::request::{Request, RequestId, Time};
use crate::sched::{
    useful_area, AdmitOutcome, FifoQueue, PreferentialQueue, RequestBlock, Schedule,
};

/// Deliberate defects for exercising the harness itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Admission only looks at the open space after the tail.
    TailOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub name: &'static str,
    pub cases: u64,
    pub failures: u64,
    pub counterexample: Option<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} cases, {} failures",
            self.name, self.cases, self.failures
        )?;
        if let Some(c) = &self.counterexample {
            write!(f, "\n{c}")?;
        }
        Ok(())
    }
}

/// One admission question: can `new_size` finishing by `deadline_end` be
/// added to `blocks`?
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissionCase {
    pub cpu_free_time: Time,
    pub blocks: Vec<(Time, Time)>,
    pub new_size: Time,
    pub deadline_end: Time,
}

impl fmt::Display for AdmissionCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cpu_free_time {}", self.cpu_free_time)?;
        for (i, (s, e)) in self.blocks.iter().enumerate() {
            writeln!(f, "block {i} [{s}, {e}]")?;
        }
        write!(f, "new size {} deadline_end {}", self.new_size, self.deadline_end)
    }
}

impl AdmissionCase {
    /// Random ordered, disjoint layout with at most `max_blocks` blocks and
    /// every time within `0..=max_time`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_blocks: usize, max_time: Time) -> Self {
        let cpu_free_time = rng.gen_range(0..=max_time / 5);
        let n = rng.gen_range(0..=max_blocks);
        let step = (max_time / (2 * max_blocks.max(1) as Time)).max(1);
        let mut blocks = Vec::with_capacity(n);
        let mut t = cpu_free_time;
        for _ in 0..n {
            // Gapless neighbours are common in practice; bias towards them.
            let gap = if rng.gen_bool(0.3) { 0 } else { rng.gen_range(0..=step) };
            let size = rng.gen_range(1..=step);
            let start = t + gap;
            if start + size > max_time {
                break;
            }
            blocks.push((start, start + size));
            t = start + size;
        }
        AdmissionCase {
            cpu_free_time,
            blocks,
            new_size: rng.gen_range(1..=step * 2),
            deadline_end: rng.gen_range(0..=max_time),
        }
    }

    pub fn queue(&self) -> PreferentialQueue {
        let blocks = self.blocks.iter().enumerate().map(|(i, &(s, e))| {
            RequestBlock::new(Request::simple(i as u64, e - s, e), e)
        });
        PreferentialQueue::from_blocks(self.cpu_free_time, blocks)
            .expect("generated layouts are valid")
    }

    pub fn request(&self) -> Request {
        Request::simple(self.blocks.len() as u64, self.new_size, self.deadline_end)
    }

    fn without_block(&self, i: usize) -> Self {
        let mut c = self.clone();
        c.blocks.remove(i);
        c
    }
}

fn admit_under_test(queue: &mut PreferentialQueue, request: Request, fault: Option<Fault>) -> AdmitOutcome {
    match fault {
        None => queue.try_admit(request),
        Some(Fault::TailOnly) => {
            let area = useful_area(
                queue.blocks().last(),
                None,
                request.deadline_end,
                queue.cpu_free_time(),
            );
            if area.width >= request.process_time {
                queue.try_admit(request)
            } else {
                AdmitOutcome::Rejected
            }
        }
    }
}

fn disagrees(case: &AdmissionCase, fault: Option<Fault>) -> bool {
    let expected = oracle_feasible(&case.blocks, case.new_size, case.deadline_end, case.cpu_free_time)
        .expect("generated layouts are valid");
    let mut queue = case.queue();
    let outcome = admit_under_test(&mut queue, case.request(), fault);
    outcome.is_admitted() != expected
}

/// Removes blocks one at a time for as long as the disagreement persists.
fn shrink(mut case: AdmissionCase, fault: Option<Fault>) -> AdmissionCase {
    'outer: loop {
        for i in 0..case.blocks.len() {
            let smaller = case.without_block(i);
            if disagrees(&smaller, fault) {
                case = smaller;
                continue 'outer;
            }
        }
        return case;
    }
}

/// `try_admit` must admit exactly when [`oracle_feasible`] says it can.
pub fn oracle_equivalence(
    cases: u64,
    seed: u64,
    max_blocks: usize,
    max_time: Time,
    fault: Option<Fault>,
) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut smallest: Option<AdmissionCase> = None;
    for _ in 0..cases {
        let case = AdmissionCase::random(&mut rng, max_blocks, max_time);
        if disagrees(&case, fault) {
            failures += 1;
            let shrunk = shrink(case, fault);
            if smallest.as_ref().is_none_or(|s| shrunk.blocks.len() < s.blocks.len()) {
                smallest = Some(shrunk);
            }
        }
    }
    CheckReport {
        name: "oracle equivalence",
        cases,
        failures,
        counterexample: smallest.map(|c| c.to_string()),
    }
}

/// [`oracle_feasible`] must agree with the brute-force [`exhaustive_feasible`].
pub fn exhaustive_agreement(cases: u64, seed: u64, max_blocks: usize, max_time: Time) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut first = None;
    for _ in 0..cases {
        let c = AdmissionCase::random(&mut rng, max_blocks, max_time);
        let a = oracle_feasible(&c.blocks, c.new_size, c.deadline_end, c.cpu_free_time);
        let b = exhaustive_feasible(&c.blocks, c.new_size, c.deadline_end, c.cpu_free_time);
        if a != b {
            failures += 1;
            first.get_or_insert_with(|| format!("{c}\noracle {a:?} exhaustive {b:?}"));
        }
    }
    CheckReport {
        name: "exhaustive cross-check",
        cases,
        failures,
        counterexample: first,
    }
}

/// Forced admission must give the same end times as rebuilding the queue as
/// FIFO from the same blocks and appending.
pub fn forced_matches_fifo(cases: u64, seed: u64, max_blocks: usize, max_time: Time) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut first = None;
    for _ in 0..cases {
        let c = AdmissionCase::random(&mut rng, max_blocks, max_time);
        let mut queue = c.queue();
        let mut fifo = FifoQueue::new(c.cpu_free_time);
        for b in queue.blocks() {
            fifo.append(b.request.clone());
        }
        let forced = queue.force_admit(c.request());
        let rebuilt = fifo.append(c.request());
        let pref_ends: Vec<Time> = queue.blocks().map(|b| b.end).collect();
        let fifo_ends: Vec<Time> = fifo.blocks().map(|b| b.end).collect();
        if pref_ends != fifo_ends || forced.scheduled_end() != rebuilt.scheduled_end() {
            failures += 1;
            first.get_or_insert_with(|| format!("{c}\nforced {pref_ends:?} fifo {fifo_ends:?}"));
        }
    }
    CheckReport {
        name: "forced push equals FIFO",
        cases,
        failures,
        counterexample: first,
    }
}

/// Random interleaving of admit / force / advance on a preferential queue
/// and a FIFO queue, validating both after every operation.
pub fn invariant_fuzz(ops: u64, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pref = PreferentialQueue::new(0);
    let mut fifo = FifoQueue::new(0);
    let mut now: Time = 0;
    let mut next_id = 0u64;
    // Deadline promised at admission time, by request id.
    let mut promised: HashMap<RequestId, Time> = HashMap::new();
    let mut failures = 0;
    let mut first: Option<String> = None;
    let mut fail = |op: u64, what: String| {
        failures += 1;
        first.get_or_insert_with(|| format!("op {op}: {what}"));
    };

    for op in 0..ops {
        let prior = pref.snapshot();
        let prior_work: Time = prior.blocks.iter().map(|b| b.size).sum();
        let roll = rng.gen_range(0..100);
        if roll < 70 {
            let size = rng.gen_range(1..=60);
            let request = Request::simple(next_id, size, now + rng.gen_range(0..=600));
            next_id += 1;
            match pref.try_admit(request.clone()) {
                AdmitOutcome::Admitted { scheduled_end } => {
                    if scheduled_end > request.deadline_end {
                        fail(op, format!("admitted past deadline: {scheduled_end}"));
                    }
                    promised.insert(request.id, request.deadline_end);
                    let snap = pref.snapshot();
                    let work: Time = snap.blocks.iter().map(|b| b.size).sum();
                    if work != prior_work + size {
                        fail(op, format!("work {prior_work} + {size} became {work}"));
                    }
                    if snap.end_of(request.id) != Some(scheduled_end) {
                        fail(op, "admitted block not at reported end".into());
                    }
                }
                AdmitOutcome::Rejected => {
                    if pref.snapshot() != prior {
                        fail(op, "rejection mutated the queue".into());
                    }
                    // A quarter of rejections are pushed through anyway.
                    if rng.gen_bool(0.25) {
                        let forced = pref.force_admit(request.clone());
                        let expected = prior.cpu_free_time + prior_work + size;
                        if forced.scheduled_end() != Some(expected) {
                            fail(op, format!("forced end {forced:?}, expected {expected}"));
                        }
                    }
                }
                AdmitOutcome::Forced { .. } => fail(op, "try_admit returned Forced".into()),
            }
            if fifo.is_feasible(&request) || rng.gen_bool(0.25) {
                fifo.append(request);
            }
        } else {
            now += rng.gen_range(0..=80);
            match pref.advance(now) {
                Ok(done) => {
                    for c in done {
                        if c.end > now {
                            fail(op, format!("request {} drained before finishing", c.request.id));
                        }
                        if let Some(deadline) = promised.remove(&c.request.id) {
                            if c.end > deadline {
                                fail(op, format!("admitted request {} finished late", c.request.id));
                            }
                        }
                    }
                }
                Err(e) => fail(op, e.to_string()),
            }
            if let Err(e) = fifo.advance(now) {
                fail(op, e.to_string());
            }
        }

        for v in validate_schedule(&pref.snapshot(), Some(&prior)) {
            fail(op, format!("preferential {v}\n{}", pref.snapshot().dump()));
        }
        let fifo_snap = fifo.snapshot();
        for v in validate_schedule(&fifo_snap, None).into_iter().chain(validate_gap_free(&fifo_snap)) {
            fail(op, format!("fifo {v}"));
        }
    }
    CheckReport {
        name: "invariant fuzz",
        cases: ops,
        failures,
        counterexample: first,
    }
}
