use super::RequestBlock;
use crate::request::{Time, INFINITY};

/// Usable room for a new block between two neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UsefulArea {
    pub width: Time,
    pub end: Time,
}

/// Width and right edge of the interval a new block could occupy between
/// `left` and `right` without moving either of them.
///
/// The interval runs from `left`'s end (or `cpu_free_time` at the head) to
/// `right`'s start (or unbounded at the tail), clipped on the right by the new
/// request's deadline. An empty or inverted interval yields `(0, 0)`.
pub fn useful_area(
    left: Option<&RequestBlock>,
    right: Option<&RequestBlock>,
    deadline_end: Time,
    cpu_free_time: Time,
) -> UsefulArea {
    let start = left.map_or(cpu_free_time, |b| b.end);
    let end = right.map_or(INFINITY, |b| b.start()).min(deadline_end);
    if start > end {
        return UsefulArea { width: 0, end: 0 };
    }
    UsefulArea { width: end - start, end }
}
