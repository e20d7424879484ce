use std::collections::BTreeMap;

use meclb_core::oracle::{exhaustive_feasible, oracle_feasible, validate_gap_free, validate_schedule};
use meclb_core::sched::{AdmitOutcome, FifoQueue, PreferentialQueue, RequestBlock, Schedule};
use meclb_core::{Request, RequestId, Time};
use proptest::prelude::*;

/// Ordered, disjoint blocks starting at or after `cpu_free_time`, as
/// `(cpu_free_time, [(start, end)])`.
fn layout(max_blocks: usize, max_step: Time) -> impl Strategy<Value = (Time, Vec<(Time, Time)>)> {
    (
        0..=max_step,
        prop::collection::vec((0..=max_step, 1..=max_step), 0..=max_blocks),
    )
        .prop_map(|(cpu, steps)| {
            let mut t = cpu;
            let blocks = steps
                .into_iter()
                .map(|(gap, size)| {
                    let start = t + gap;
                    t = start + size;
                    (start, t)
                })
                .collect();
            (cpu, blocks)
        })
}

fn build(cpu: Time, blocks: &[(Time, Time)]) -> PreferentialQueue {
    PreferentialQueue::from_blocks(
        cpu,
        blocks
            .iter()
            .enumerate()
            .map(|(i, &(s, e))| RequestBlock::new(Request::simple(i as u64, e - s, e + 1000), e)),
    )
    .unwrap()
}

fn ends(q: &PreferentialQueue) -> BTreeMap<RequestId, Time> {
    q.blocks().map(|b| (b.request.id, b.end)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn admits_iff_oracle_feasible(
        (cpu, blocks) in layout(12, 40),
        size in 1..=80u64,
        deadline in 0..=600u64,
    ) {
        let expected = oracle_feasible(&blocks, size, deadline, cpu).unwrap();
        let mut q = build(cpu, &blocks);
        let before = q.snapshot();
        let before_ends = ends(&q);
        let request = Request::simple(99, size, deadline);
        let outcome = q.try_admit(request);
        prop_assert_eq!(outcome.is_admitted(), expected);

        match outcome {
            AdmitOutcome::Admitted { scheduled_end } => {
                prop_assert!(scheduled_end <= deadline);
                let snap = q.snapshot();
                prop_assert!(validate_schedule(&snap, Some(&before)).is_empty());
                let pos = snap.blocks.iter().position(|b| b.id == RequestId(99)).unwrap();
                prop_assert_eq!(snap.blocks[pos].end, scheduled_end);
                if let Some(right) = snap.blocks.get(pos + 1) {
                    prop_assert!(scheduled_end <= right.start);
                    // Untouched on the right.
                    prop_assert_eq!(Some(&right.end), before_ends.get(&right.id));
                }
                // Sizes are conserved; nobody finishes later.
                prop_assert_eq!(q.total_work(), before.blocks.iter().map(|b| b.size).sum::<Time>() + size);
                for (id, end) in ends(&q) {
                    if let Some(old) = before_ends.get(&id) {
                        prop_assert!(end <= *old);
                    }
                }
            }
            AdmitOutcome::Rejected => prop_assert_eq!(q.snapshot(), before),
            AdmitOutcome::Forced { .. } => prop_assert!(false, "try_admit never forces"),
        }
    }

    #[test]
    fn forced_push_equals_fifo_rebuild(
        (cpu, blocks) in layout(12, 40),
        size in 1..=80u64,
        deadline in 0..=600u64,
    ) {
        let mut q = build(cpu, &blocks);
        let before = q.snapshot();
        let mut fifo = FifoQueue::new(cpu);
        for b in q.blocks() {
            fifo.append(b.request.clone());
        }
        let forced = q.force_admit(Request::simple(99, size, deadline));
        let appended = fifo.append(Request::simple(99, size, deadline));
        prop_assert_eq!(forced, AdmitOutcome::Forced { scheduled_end: appended.scheduled_end().unwrap() });
        let pref_ends: Vec<Time> = q.blocks().map(|b| b.end).collect();
        let fifo_ends: Vec<Time> = fifo.blocks().map(|b| b.end).collect();
        prop_assert_eq!(pref_ends, fifo_ends);
        prop_assert!(validate_schedule(&q.snapshot(), Some(&before)).is_empty());
        prop_assert!(validate_gap_free(&q.snapshot()).is_empty());
    }

    #[test]
    fn oracle_agrees_with_exhaustive_search(
        (cpu, blocks) in layout(6, 8),
        size in 1..=12u64,
        deadline in 0..=60u64,
    ) {
        prop_assert_eq!(
            oracle_feasible(&blocks, size, deadline, cpu),
            exhaustive_feasible(&blocks, size, deadline, cpu)
        );
    }

    /// Whatever happens after admission, an admitted request completes in time.
    #[test]
    fn admitted_requests_finish_in_time(
        ops in prop::collection::vec((1..=50u64, 0..=400u64, any::<bool>(), 0..=60u64), 1..60),
    ) {
        let mut q = PreferentialQueue::new(0);
        let mut now = 0;
        let mut promised = BTreeMap::new();
        for (i, (size, slack, force, step)) in ops.into_iter().enumerate() {
            let request = Request::simple(i as u64, size, now + slack);
            match q.try_admit(request.clone()) {
                AdmitOutcome::Admitted { .. } => {
                    promised.insert(request.id, request.deadline_end);
                }
                _ if force => {
                    q.force_admit(request);
                }
                _ => {}
            }
            now += step;
            for done in q.advance(now).unwrap() {
                if let Some(deadline) = promised.remove(&done.request.id) {
                    prop_assert!(done.end <= deadline);
                }
            }
        }
        for done in q.advance(Time::MAX).unwrap() {
            if let Some(deadline) = promised.remove(&done.request.id) {
                prop_assert!(done.end <= deadline);
            }
        }
        prop_assert!(promised.is_empty());
    }
}

#[test]
fn gap_free_queue_forced_push_is_plain_append() {
    let mut q = build(0, &[(0, 20), (20, 64), (64, 244)]);
    let out = q.force_admit(Request::simple(9, 20, 100));
    assert_eq!(out, AdmitOutcome::Forced { scheduled_end: 264 });
}

#[test]
fn golden_dump_after_mixed_operations() {
    let mut q = PreferentialQueue::new(0);
    q.try_admit(Request::simple(1, 180, 9000));
    q.try_admit(Request::simple(2, 180, 4000));
    q.try_admit(Request::simple(3, 44, 4000));
    q.try_admit(Request::simple(4, 20, 9000));
    q.force_admit(Request::simple(5, 20, 10));
    // Before the forced push: 3 [3776, 3820], 2 [3820, 4000],
    // 4 [8800, 8820] (in the 4000..8820 gap), 1 [8820, 9000].
    assert_eq!(
        q.snapshot().dump(),
        "3 0 44 4000\n2 44 224 4000\n4 224 244 9000\n1 244 424 9000\n5 424 444 10\n"
    );
}
