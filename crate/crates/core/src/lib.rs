//! Deadline-aware request queues and a sequential-forwarding simulator for
//! clusters of multi-access edge computing (MEC) nodes.
//!
//! The crate is organised bottom-up:
//!
//! - [`sched`]: the preferential queue (gap insertion with left-shift
//!   compaction) and the FIFO baseline, both over a shared [`Request`] type.
//! - [`oracle`]: independent feasibility and schedule-validity checkers.
//! - [`workload`]: the service catalog, built-in scenarios and scenario files.
//! - [`sim`]: the deterministic cluster simulator.
//! - [`metrics`]: aggregation across replications, CSV and SVG output.
//! - [`validate`]: seeded fuzz harnesses tying the queues to the oracle.

pub mod metrics;
pub mod oracle;
pub mod request;
pub mod sched;
pub mod sim;
pub mod validate;
pub mod workload;

pub use request::{NodeId, Request, RequestId, Time, INFINITY};
