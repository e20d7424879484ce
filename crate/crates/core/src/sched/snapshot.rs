use std::fmt::Write as _;

use crate::request::{RequestId, Time};

/// One block as observed while walking a queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockView {
    pub id: RequestId,
    pub size: Time,
    pub start: Time,
    pub end: Time,
    pub deadline_end: Time,
    /// Neighbour links as stored in the queue, not as implied by position.
    pub left: Option<RequestId>,
    pub right: Option<RequestId>,
}

/// Point-in-time copy of a queue, detached from its storage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueSnapshot {
    pub cpu_free_time: Time,
    /// Block currently executing, if any. It can no longer move.
    pub running: Option<BlockView>,
    /// Pending blocks walked head to tail through the right links.
    pub blocks: Vec<BlockView>,
    /// Pending block ids walked tail to head through the left links.
    pub backward: Vec<RequestId>,
}

impl QueueSnapshot {
    pub fn end_of(&self, id: RequestId) -> Option<Time> {
        self.running
            .iter()
            .chain(&self.blocks)
            .find(|b| b.id == id)
            .map(|b| b.end)
    }

    /// Text dump, one line per pending block: `id start end deadline_end`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            let _ = writeln!(out, "{} {} {} {}", b.id, b.start, b.end, b.deadline_end);
        }
        out
    }
}
