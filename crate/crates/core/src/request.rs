use std::fmt;

use serde::{Deserialize, Serialize};

/// Simulation time in abstract units (UT).
pub type Time = u64;

/// Stand-in for an unbounded time (no right neighbour, drain everything).
pub const INFINITY: Time = Time::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RequestId(pub u64);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a node inside a scenario's node list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One unit of work submitted by a user to its nearest node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: RequestId,
    /// Index into the scenario's service list.
    pub service: usize,
    pub origin: NodeId,
    pub arrival_time: Time,
    /// Worst-case processing time; always positive.
    pub process_time: Time,
    /// Absolute deadline, fixed at the original arrival.
    pub deadline_end: Time,
    pub forward_count: u32,
}

impl Request {
    /// Builds a request with `deadline_end = arrival_time + relative_deadline`.
    ///
    /// Panics if `process_time` is zero.
    pub fn new(
        id: RequestId,
        service: usize,
        origin: NodeId,
        arrival_time: Time,
        process_time: Time,
        relative_deadline: Time,
    ) -> Self {
        assert!(process_time > 0, "request {id} has zero processing time");
        Request {
            id,
            service,
            origin,
            arrival_time,
            process_time,
            deadline_end: arrival_time.saturating_add(relative_deadline),
            forward_count: 0,
        }
    }

    /// Bare request for queue-level tests and fuzzing: service 0, node 0,
    /// arrival at 0, absolute deadline as given.
    pub fn simple(id: u64, process_time: Time, deadline_end: Time) -> Self {
        assert!(process_time > 0, "request {id} has zero processing time");
        Request {
            id: RequestId(id),
            service: 0,
            origin: NodeId(0),
            arrival_time: 0,
            process_time,
            deadline_end,
            forward_count: 0,
        }
    }
}
