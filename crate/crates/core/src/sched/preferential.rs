use super::{
    useful_area, AdmitOutcome, BlockView, Clock, Completed, QueueSnapshot, RequestBlock,
    Schedule, ScheduleError,
};
use crate::request::{Request, Time};

#[derive(Debug, Clone)]
struct Slot {
    block: RequestBlock,
    left: Option<usize>,
    right: Option<usize>,
}

/// Where a new block goes: between `left` and `right`, finishing at `end`.
#[derive(Debug, Clone, Copy)]
struct Placement {
    left: Option<usize>,
    right: Option<usize>,
    end: Time,
}

/// Deadline-aware queue that lets a new request jump ahead of queued work.
///
/// Blocks form a doubly linked list kept in an index arena. Gaps between
/// blocks are slack: a new request may be placed in front of existing blocks
/// as long as the blocks it passes can be shifted earlier to make room. No
/// operation ever moves an existing block later, so a request admitted within
/// its deadline stays within it.
#[derive(Debug, Clone)]
pub struct PreferentialQueue {
    slots: Vec<Option<Slot>>,
    vacant: Vec<usize>,
    first: Option<usize>,
    last: Option<usize>,
    len: usize,
    /// Sum of the sizes of all pending blocks.
    total_work: Time,
    cpu_free_time: Time,
    running: Option<RequestBlock>,
    clock: Clock,
}

impl PreferentialQueue {
    pub fn new(cpu_free_time: Time) -> Self {
        PreferentialQueue {
            slots: Vec::new(),
            vacant: Vec::new(),
            first: None,
            last: None,
            len: 0,
            total_work: 0,
            cpu_free_time,
            running: None,
            clock: Clock::default(),
        }
    }

    /// Builds a queue from blocks given head to tail.
    pub fn from_blocks(
        cpu_free_time: Time,
        blocks: impl IntoIterator<Item = RequestBlock>,
    ) -> Result<Self, ScheduleError> {
        let mut queue = PreferentialQueue::new(cpu_free_time);
        let mut prev_end = cpu_free_time;
        for block in blocks {
            let id = block.request.id.0;
            if block.end < block.size() {
                return Err(ScheduleError::BeforeTimeZero {
                    id,
                    end: block.end,
                    size: block.size(),
                });
            }
            if block.start() < prev_end {
                if queue.is_empty() {
                    return Err(ScheduleError::BeforeCpuFree {
                        id,
                        start: block.start(),
                        cpu_free_time,
                    });
                }
                return Err(ScheduleError::Overlap { id });
            }
            prev_end = block.end;
            let tail = queue.last;
            queue.link_between(tail, None, block);
        }
        Ok(queue)
    }

    pub fn blocks(&self) -> Blocks<'_> {
        Blocks {
            queue: self,
            cursor: self.first,
        }
    }

    pub fn total_work(&self) -> Time {
        self.total_work
    }

    pub fn running(&self) -> Option<&RequestBlock> {
        self.running.as_ref()
    }

    /// Admits `request` if it can finish by its deadline without delaying any
    /// queued block.
    ///
    /// The search starts at the tail and walks towards the head. The block
    /// goes into the rightmost feasible position whose left neighbour ends
    /// before the block's own latest end, so work with a later deadline is
    /// never pulled in front of it. It ends at `min(deadline_end, start of its
    /// right neighbour)`. Blocks to its left
    /// are shifted earlier only as far as needed, consuming the slack nearest
    /// to the insertion point first. On rejection the queue is not touched.
    pub fn try_admit(&mut self, request: Request) -> AdmitOutcome {
        match self.find_placement(&request) {
            Some(placement) => {
                self.commit(placement, request);
                AdmitOutcome::Admitted {
                    scheduled_end: placement.end,
                }
            }
            None => AdmitOutcome::Rejected,
        }
    }

    /// Removes all slack by packing every block against `cpu_free_time`, then
    /// appends `request` at the tail regardless of its deadline.
    pub fn force_admit(&mut self, request: Request) -> AdmitOutcome {
        let mut t = self.cpu_free_time;
        let mut cursor = self.first;
        while let Some(i) = cursor {
            let slot = self.slot_mut(i);
            let packed = t + slot.block.size();
            debug_assert!(packed <= slot.block.end, "compaction must not delay a block");
            slot.block.end = packed;
            t = packed;
            cursor = slot.right;
        }
        let end = t.saturating_add(request.process_time);
        let tail = self.last;
        self.link_between(tail, None, RequestBlock::new(request, end));
        AdmitOutcome::Forced { scheduled_end: end }
    }

    fn find_placement(&self, request: &Request) -> Option<Placement> {
        let size = request.process_time;
        let deadline = request.deadline_end;
        let cpu = self.cpu_free_time;
        if cpu.saturating_add(size) > deadline {
            return None;
        }

        // Tail first: the open gap after the last block, then the same
        // position with every earlier block packed.
        let tail = self.last.map(|i| &self.slot(i).block);
        let area = useful_area(tail, None, deadline, cpu);
        if area.width >= size
            || (area.width > 0
                && cpu.saturating_add(self.total_work).saturating_add(size) <= deadline)
        {
            return Some(Placement {
                left: self.last,
                right: None,
                end: area.end,
            });
        }

        // Position k sits after the k-th block. It is a candidate when its own
        // useful area is non-empty (the left neighbour ends before the new
        // block could) and cpu + S_k + size <= min(deadline, start of block
        // k+1), S_k being the size of the first k blocks. The rightmost
        // candidate wins. S_k only grows, so the scan stops once it alone
        // overshoots the deadline.
        let mut best = None;
        let mut prefix: Time = 0;
        let mut left: Option<usize> = None;
        let mut cursor = self.first;
        loop {
            let area = useful_area(
                left.map(|i| &self.slot(i).block),
                cursor.map(|i| &self.slot(i).block),
                deadline,
                cpu,
            );
            if area.width > 0 && cpu.saturating_add(prefix).saturating_add(size) <= area.end {
                best = Some(Placement {
                    left,
                    right: cursor,
                    end: area.end,
                });
            }
            let Some(i) = cursor else { break };
            let slot = self.slot(i);
            prefix = prefix.saturating_add(slot.block.size());
            if cpu.saturating_add(prefix).saturating_add(size) > deadline {
                break;
            }
            left = Some(i);
            cursor = slot.right;
        }
        best
    }

    fn commit(&mut self, placement: Placement, request: Request) {
        let mut bound = placement.end - request.process_time;
        let mut cursor = placement.left;
        while let Some(i) = cursor {
            let slot = self.slot_mut(i);
            if slot.block.end <= bound {
                break;
            }
            slot.block.end = bound;
            bound = slot.block.end - slot.block.size();
            cursor = slot.left;
        }
        debug_assert!(bound >= self.cpu_free_time);
        self.link_between(
            placement.left,
            placement.right,
            RequestBlock::new(request, placement.end),
        );
    }

    fn link_between(&mut self, left: Option<usize>, right: Option<usize>, block: RequestBlock) {
        self.total_work += block.size();
        self.len += 1;
        let slot = Slot { block, left, right };
        let index = match self.vacant.pop() {
            Some(i) => {
                self.slots[i] = Some(slot);
                i
            }
            None => {
                self.slots.push(Some(slot));
                self.slots.len() - 1
            }
        };
        match left {
            Some(l) => self.slot_mut(l).right = Some(index),
            None => self.first = Some(index),
        }
        match right {
            Some(r) => self.slot_mut(r).left = Some(index),
            None => self.last = Some(index),
        }
    }

    fn pop_front(&mut self) -> Option<RequestBlock> {
        let head = self.first?;
        let slot = self.slots[head].take().expect("head slot is occupied");
        self.vacant.push(head);
        self.first = slot.right;
        match slot.right {
            Some(r) => self.slot_mut(r).left = None,
            None => self.last = None,
        }
        self.len -= 1;
        self.total_work -= slot.block.size();
        Some(slot.block)
    }

    fn head(&self) -> Option<&RequestBlock> {
        self.first.map(|i| &self.slot(i).block)
    }

    fn slot(&self, index: usize) -> &Slot {
        self.slots[index].as_ref().expect("linked slot is occupied")
    }

    fn slot_mut(&mut self, index: usize) -> &mut Slot {
        self.slots[index].as_mut().expect("linked slot is occupied")
    }
}

impl Default for PreferentialQueue {
    fn default() -> Self {
        PreferentialQueue::new(0)
    }
}

impl Schedule for PreferentialQueue {
    fn cpu_free_time(&self) -> Time {
        self.cpu_free_time
    }

    fn len(&self) -> usize {
        self.len
    }

    fn advance(&mut self, now: Time) -> Result<Vec<Completed>, ScheduleError> {
        self.clock.tick(now)?;
        let mut done = Vec::new();
        if self.running.as_ref().is_some_and(|b| b.end <= now) {
            let b = self.running.take().unwrap();
            done.push(Completed { end: b.end, request: b.request });
        }
        while self.head().is_some_and(|b| b.end <= now) {
            let b = self.pop_front().unwrap();
            done.push(Completed { end: b.end, request: b.request });
        }
        if self.running.is_none() && self.head().is_some_and(|b| b.start() < now) {
            self.running = self.pop_front();
        }
        let busy_until = self.running.as_ref().map_or(0, |b| b.end);
        self.cpu_free_time = self.cpu_free_time.max(now).max(busy_until);
        Ok(done)
    }

    fn snapshot(&self) -> QueueSnapshot {
        let id_of = |i: Option<usize>| i.map(|i| self.slot(i).block.request.id);
        let mut blocks = Vec::with_capacity(self.len);
        let mut cursor = self.first;
        while let Some(i) = cursor {
            let slot = self.slot(i);
            blocks.push(BlockView {
                id: slot.block.request.id,
                size: slot.block.size(),
                start: slot.block.start(),
                end: slot.block.end,
                deadline_end: slot.block.request.deadline_end,
                left: id_of(slot.left),
                right: id_of(slot.right),
            });
            cursor = slot.right;
        }
        let mut backward = Vec::with_capacity(self.len);
        let mut cursor = self.last;
        while let Some(i) = cursor {
            let slot = self.slot(i);
            backward.push(slot.block.request.id);
            cursor = slot.left;
        }
        QueueSnapshot {
            cpu_free_time: self.cpu_free_time,
            running: self.running.as_ref().map(|b| BlockView {
                id: b.request.id,
                size: b.size(),
                start: b.start(),
                end: b.end,
                deadline_end: b.request.deadline_end,
                left: None,
                right: None,
            }),
            blocks,
            backward,
        }
    }
}

/// Head-to-tail iterator over pending blocks.
pub struct Blocks<'a> {
    queue: &'a PreferentialQueue,
    cursor: Option<usize>,
}

impl<'a> Iterator for Blocks<'a> {
    type Item = &'a RequestBlock;

    fn next(&mut self) -> Option<Self::Item> {
        let slot = self.queue.slot(self.cursor?);
        self.cursor = slot.right;
        Some(&slot.block)
    }
}
