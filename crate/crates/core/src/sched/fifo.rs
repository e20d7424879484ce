use std::collections::VecDeque;

use super::{
    AdmitOutcome, BlockView, Clock, Completed, QueueSnapshot, RequestBlock, Schedule,
    ScheduleError,
};
use crate::request::{Request, Time};

/// Gap-free first-in first-out queue, the baseline discipline.
#[derive(Debug, Clone, Default)]
pub struct FifoQueue {
    blocks: VecDeque<RequestBlock>,
    cpu_free_time: Time,
    running: Option<RequestBlock>,
    clock: Clock,
}

impl FifoQueue {
    pub fn new(cpu_free_time: Time) -> Self {
        FifoQueue {
            cpu_free_time,
            ..FifoQueue::default()
        }
    }

    /// Instant the next appended block would start.
    pub fn tail_free_time(&self) -> Time {
        self.blocks
            .back()
            .map_or(self.cpu_free_time, |b| b.end.max(self.cpu_free_time))
    }

    /// Would `request` meet its deadline if appended now?
    pub fn is_feasible(&self, request: &Request) -> bool {
        self.tail_free_time().saturating_add(request.process_time) <= request.deadline_end
    }

    /// Appends at the tail. The outcome is `Forced` when the deadline is missed.
    pub fn append(&mut self, request: Request) -> AdmitOutcome {
        let end = self.tail_free_time().saturating_add(request.process_time);
        let met = end <= request.deadline_end;
        self.blocks.push_back(RequestBlock::new(request, end));
        if met {
            AdmitOutcome::Admitted { scheduled_end: end }
        } else {
            AdmitOutcome::Forced { scheduled_end: end }
        }
    }

    pub fn blocks(&self) -> impl Iterator<Item = &RequestBlock> {
        self.blocks.iter()
    }
}

impl Schedule for FifoQueue {
    fn cpu_free_time(&self) -> Time {
        self.cpu_free_time
    }

    fn len(&self) -> usize {
        self.blocks.len()
    }

    fn advance(&mut self, now: Time) -> Result<Vec<Completed>, ScheduleError> {
        self.clock.tick(now)?;
        let mut done = Vec::new();
        if self.running.as_ref().is_some_and(|b| b.end <= now) {
            let b = self.running.take().unwrap();
            done.push(Completed { end: b.end, request: b.request });
        }
        while self.blocks.front().is_some_and(|b| b.end <= now) {
            let b = self.blocks.pop_front().unwrap();
            done.push(Completed { end: b.end, request: b.request });
        }
        if self.running.is_none() && self.blocks.front().is_some_and(|b| b.start() < now) {
            self.running = self.blocks.pop_front();
        }
        let busy_until = self.running.as_ref().map_or(0, |b| b.end);
        self.cpu_free_time = self.cpu_free_time.max(now).max(busy_until);
        Ok(done)
    }

    fn snapshot(&self) -> QueueSnapshot {
        let view = |i: usize, b: &RequestBlock| BlockView {
            id: b.request.id,
            size: b.size(),
            start: b.start(),
            end: b.end,
            deadline_end: b.request.deadline_end,
            left: i.checked_sub(1).map(|j| self.blocks[j].request.id),
            right: self.blocks.get(i + 1).map(|n| n.request.id),
        };
        QueueSnapshot {
            cpu_free_time: self.cpu_free_time,
            running: self.running.as_ref().map(|b| BlockView {
                left: None,
                right: None,
                ..view(0, b)
            }),
            blocks: self.blocks.iter().enumerate().map(|(i, b)| view(i, b)).collect(),
            backward: self.blocks.iter().rev().map(|b| b.request.id).collect(),
        }
    }
}
