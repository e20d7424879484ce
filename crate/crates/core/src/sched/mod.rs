//! Per-node request queues.
//!
//! Both queues hold a sequence of [`RequestBlock`]s, each a reserved interval
//! `[end - process_time, end]` on a single CPU. The left boundary of the
//! schedule is `cpu_free_time`, the earliest instant the CPU may start the
//! next pending block.
//!
//! [`PreferentialQueue`] admits a request ahead of already queued work when the
//! slack in front of existing blocks allows it, and never delays anyone that is
//! already queued. [`FifoQueue`] is the baseline: strict tail appends.

mod area;
mod fifo;
mod preferential;
mod snapshot;

use thiserror::Error;

use crate::request::{Request, Time};

pub use area::{useful_area, UsefulArea};
pub use fifo::FifoQueue;
pub use preferential::{Blocks, PreferentialQueue};
pub use snapshot::{BlockView, QueueSnapshot};

/// A request together with the absolute time its processing completes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestBlock {
    pub request: Request,
    pub end: Time,
}

impl RequestBlock {
    pub fn new(request: Request, end: Time) -> Self {
        RequestBlock { request, end }
    }

    pub fn size(&self) -> Time {
        self.request.process_time
    }

    /// Saturates at zero; [`PreferentialQueue::from_blocks`] rejects blocks
    /// that would start before time zero.
    pub fn start(&self) -> Time {
        self.end.saturating_sub(self.request.process_time)
    }
}

/// Result of offering a request to a queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmitOutcome {
    /// Scheduled to finish within its deadline.
    Admitted { scheduled_end: Time },
    /// Not placed; the queue is untouched.
    Rejected,
    /// Appended regardless of its deadline.
    Forced { scheduled_end: Time },
}

impl AdmitOutcome {
    pub fn scheduled_end(&self) -> Option<Time> {
        match *self {
            AdmitOutcome::Admitted { scheduled_end } | AdmitOutcome::Forced { scheduled_end } => {
                Some(scheduled_end)
            }
            AdmitOutcome::Rejected => None,
        }
    }

    pub fn is_admitted(&self) -> bool {
        matches!(self, AdmitOutcome::Admitted { .. })
    }
}

/// A request drained from a queue by [`Schedule::advance`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completed {
    pub request: Request,
    pub end: Time,
}

impl Completed {
    pub fn met_deadline(&self) -> bool {
        self.end <= self.request.deadline_end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("clock moved backwards: advance({now}) after advance({previous})")]
    ClockRegression { previous: Time, now: Time },
    #[error("block for request {id} starts at {start}, before cpu_free_time {cpu_free_time}")]
    BeforeCpuFree { id: u64, start: Time, cpu_free_time: Time },
    #[error("block for request {id} ends at {end} but needs {size} units from time zero")]
    BeforeTimeZero { id: u64, end: Time, size: Time },
    #[error("block for request {id} overlaps its predecessor")]
    Overlap { id: u64 },
}

/// Operations shared by both queue kinds.
pub trait Schedule {
    fn cpu_free_time(&self) -> Time;

    /// Number of pending blocks, excluding one that is already executing.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Moves the clock to `now` and drains every block with `end <= now`, in
    /// head order. A block whose start has passed is committed to the CPU: it
    /// leaves the rearrangeable schedule and `cpu_free_time` moves to its end.
    fn advance(&mut self, now: Time) -> Result<Vec<Completed>, ScheduleError>;

    fn snapshot(&self) -> QueueSnapshot;
}

/// Queue discipline run by every node of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    Fifo,
    Preferential,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Fifo => "fifo",
            Policy::Preferential => "preferential",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" => Ok(Policy::Fifo),
            "preferential" | "pref" => Ok(Policy::Preferential),
            other => Err(format!("unknown queue policy `{other}` (expected fifo or preferential)")),
        }
    }
}

/// A node's queue under either policy, behind one admission interface.
#[derive(Debug, Clone)]
pub enum NodeQueue {
    Fifo(FifoQueue),
    Preferential(PreferentialQueue),
}

impl NodeQueue {
    pub fn new(policy: Policy) -> Self {
        match policy {
            Policy::Fifo => NodeQueue::Fifo(FifoQueue::new(0)),
            Policy::Preferential => NodeQueue::Preferential(PreferentialQueue::new(0)),
        }
    }

    /// Admits the request only if it can meet its deadline; otherwise leaves
    /// the queue unchanged and returns [`AdmitOutcome::Rejected`].
    pub fn try_admit(&mut self, request: Request) -> AdmitOutcome {
        match self {
            NodeQueue::Preferential(q) => q.try_admit(request),
            NodeQueue::Fifo(q) => {
                if q.is_feasible(&request) {
                    q.append(request)
                } else {
                    AdmitOutcome::Rejected
                }
            }
        }
    }

    /// Places the request unconditionally at the tail.
    pub fn force_admit(&mut self, request: Request) -> AdmitOutcome {
        match self {
            NodeQueue::Preferential(q) => q.force_admit(request),
            NodeQueue::Fifo(q) => q.append(request),
        }
    }

    fn inner(&self) -> &dyn Schedule {
        match self {
            NodeQueue::Fifo(q) => q,
            NodeQueue::Preferential(q) => q,
        }
    }
}

impl Schedule for NodeQueue {
    fn cpu_free_time(&self) -> Time {
        self.inner().cpu_free_time()
    }

    fn len(&self) -> usize {
        self.inner().len()
    }

    fn advance(&mut self, now: Time) -> Result<Vec<Completed>, ScheduleError> {
        match self {
            NodeQueue::Fifo(q) => q.advance(now),
            NodeQueue::Preferential(q) => q.advance(now),
        }
    }

    fn snapshot(&self) -> QueueSnapshot {
        self.inner().snapshot()
    }
}

/// Monotone clock shared by the queue implementations.
#[derive(Debug, Clone, Default)]
pub(crate) struct Clock {
    last: Option<Time>,
}

impl Clock {
    pub(crate) fn tick(&mut self, now: Time) -> Result<(), ScheduleError> {
        if let Some(previous) = self.last {
            if now < previous {
                return Err(ScheduleError::ClockRegression { previous, now });
            }
        }
        self.last = Some(now);
        Ok(())
    }
}
