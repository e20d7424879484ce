//! Reference checkers for the queues in [`crate::sched`].
//!
//! Nothing here calls into the queue implementations. The feasibility
//! checks work on plain `(start, end)` interval lists and the validator works
//! on [`QueueSnapshot`] data, so they can be used to cross-examine the queues.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::request::Time;
use crate::sched::QueueSnapshot;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("interval {index} is inverted: [{start}, {end}]")]
    Inverted { index: usize, start: Time, end: Time },
    #[error("interval {index} starts at {start}, before {bound}")]
    Overlapping { index: usize, start: Time, bound: Time },
}

fn check_intervals(blocks: &[(Time, Time)], cpu_free_time: Time) -> Result<(), OracleError> {
    let mut bound = cpu_free_time;
    for (index, &(start, end)) in blocks.iter().enumerate() {
        if end < start {
            return Err(OracleError::Inverted { index, start, end });
        }
        if start < bound {
            return Err(OracleError::Overlapping { index, start, bound });
        }
        bound = end;
    }
    Ok(())
}

/// Can a block of `new_size` be added so that it finishes by `deadline_end`
/// without any existing block finishing later than it does now?
///
/// Holds iff some insertion index `k` satisfies
/// `cpu_free_time + S_k + new_size <= min(deadline_end, start_{k+1})`, where
/// `S_k` is the total size of the first `k` blocks and `start_{n+1}` is
/// unbounded. Blocks must be ordered, disjoint and start no earlier than
/// `cpu_free_time`.
pub fn oracle_feasible(
    blocks: &[(Time, Time)],
    new_size: Time,
    deadline_end: Time,
    cpu_free_time: Time,
) -> Result<bool, OracleError> {
    check_intervals(blocks, cpu_free_time)?;
    let mut prefix: u128 = 0;
    for k in 0..=blocks.len() {
        let right = blocks.get(k).map_or(u128::MAX, |&(start, _)| start as u128);
        let limit = right.min(deadline_end as u128);
        if cpu_free_time as u128 + prefix + new_size as u128 <= limit {
            return Ok(true);
        }
        if let Some(&(start, end)) = blocks.get(k) {
            prefix += (end - start) as u128;
        }
    }
    Ok(false)
}

/// Brute-force counterpart of [`oracle_feasible`].
///
/// Tries every insertion index and every integer end time for every block
/// (each existing block may only move earlier, the new block may end anywhere
/// up to its deadline). States are memoised on `(item, earliest start)`, which
/// keeps the search exact. Exponential in spirit, intended for small inputs.
pub fn exhaustive_feasible(
    blocks: &[(Time, Time)],
    new_size: Time,
    deadline_end: Time,
    cpu_free_time: Time,
) -> Result<bool, OracleError> {
    check_intervals(blocks, cpu_free_time)?;
    for position in 0..=blocks.len() {
        // (size, latest allowed end) for each item in processing order.
        let mut items: Vec<(Time, Time)> = blocks.iter().map(|&(s, e)| (e - s, e)).collect();
        items.insert(position, (new_size, deadline_end));
        let mut dead = HashSet::new();
        if place_from(&items, 0, cpu_free_time, &mut dead) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn place_from(
    items: &[(Time, Time)],
    index: usize,
    frontier: Time,
    dead: &mut HashSet<(usize, Time)>,
) -> bool {
    let Some(&(size, latest_end)) = items.get(index) else {
        return true;
    };
    if dead.contains(&(index, frontier)) {
        return false;
    }
    let Some(earliest_end) = frontier.checked_add(size) else {
        return false;
    };
    let mut end = earliest_end;
    while end <= latest_end {
        if place_from(items, index + 1, end, dead) {
            return true;
        }
        end += 1;
    }
    dead.insert((index, frontier));
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    Overlap,
    OrderBroken,
    BeforeCpuFree,
    LinkBroken,
    DeadlineRegression,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl Violation {
    fn new(kind: ViolationKind, detail: impl Into<String>) -> Self {
        Violation {
            kind,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.detail)
    }
}

/// Checks the structural invariants of a queue snapshot.
///
/// With `prior`, also checks that no block present in both snapshots ends
/// later now than it did before.
pub fn validate_schedule(current: &QueueSnapshot, prior: Option<&QueueSnapshot>) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    let blocks = &current.blocks;

    for b in current.running.iter().chain(blocks) {
        if b.end < b.size || b.end - b.size != b.start {
            out.push(Violation::new(
                BeforeCpuFree,
                format!("request {} ends at {} with size {}", b.id, b.end, b.size),
            ));
        }
    }
    if let Some(r) = &current.running {
        if r.end > current.cpu_free_time {
            out.push(Violation::new(
                BeforeCpuFree,
                format!("running request {} ends after cpu_free_time", r.id),
            ));
        }
    }
    if let Some(head) = blocks.first() {
        if head.start < current.cpu_free_time {
            out.push(Violation::new(
                BeforeCpuFree,
                format!(
                    "head request {} starts at {} < cpu_free_time {}",
                    head.id, head.start, current.cpu_free_time
                ),
            ));
        }
    }
    for pair in blocks.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.start < a.start {
            out.push(Violation::new(
                OrderBroken,
                format!("request {} starts before its predecessor {}", b.id, a.id),
            ));
        } else if a.end > b.start {
            out.push(Violation::new(
                Overlap,
                format!("request {} [{}, {}] overlaps request {} [{}, {}]", a.id, a.start, a.end, b.id, b.start, b.end),
            ));
        }
    }

    for (i, b) in blocks.iter().enumerate() {
        let expect_left = i.checked_sub(1).map(|j| blocks[j].id);
        let expect_right = blocks.get(i + 1).map(|n| n.id);
        if b.left != expect_left || b.right != expect_right {
            out.push(Violation::new(
                LinkBroken,
                format!(
                    "request {} links ({:?}, {:?}), neighbours are ({:?}, {:?})",
                    b.id, b.left, b.right, expect_left, expect_right
                ),
            ));
        }
    }
    if !current.backward.iter().rev().eq(blocks.iter().map(|b| &b.id)) {
        out.push(Violation::new(
            LinkBroken,
            "backward walk disagrees with forward walk",
        ));
    }

    if let Some(prior) = prior {
        let before: HashMap<_, _> = prior
            .running
            .iter()
            .chain(&prior.blocks)
            .map(|b| (b.id, b.end))
            .collect();
        for b in current.running.iter().chain(blocks) {
            if let Some(&old_end) = before.get(&b.id) {
                if b.end > old_end {
                    out.push(Violation::new(
                        DeadlineRegression,
                        format!("request {} moved from end {} to {}", b.id, old_end, b.end),
                    ));
                }
            }
        }
    }
    out
}

/// FIFO-specific check: the queue must be gap-free.
pub fn validate_gap_free(current: &QueueSnapshot) -> Vec<Violation> {
    current
        .blocks
        .windows(2)
        .filter(|p| p[0].end != p[1].start)
        .map(|p| {
            Violation::new(
                ViolationKind::OrderBroken,
                format!("gap or overlap between requests {} and {}", p[0].id, p[1].id),
            )
        })
        .collect()
}
