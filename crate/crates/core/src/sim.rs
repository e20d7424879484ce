//! Deterministic simulation of a cluster running sequential forwarding.
//!
//! Every request arrives at its origin node. The node offers it to its queue;
//! if the queue cannot meet the deadline the request is forwarded to a
//! uniformly random other node, up to `max_forwards` hops. The node holding
//! the request when the budget runs out processes it anyway. Nothing is
//! discarded, and forwarding takes no time.
//!
//! Randomness comes from ChaCha8 seeded per replication with
//! `master_seed ^ replication_index`. Stream 0 of that generator builds the
//! request list, stream 1 drives forwarding, so both policies see the same
//! requests for a given seed.

use std::io::{self, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::request::{NodeId, Request, Time, INFINITY};
use crate::sched::{AdmitOutcome, Completed, NodeQueue, Policy, Schedule, ScheduleError};
use crate::workload::{generate_requests, ArrivalModel, ScenarioConfig, ScenarioError};

/// Name of the random generator, recorded alongside every result.
pub const GENERATOR: &str = "ChaCha8Rng";

const WORKLOAD_STREAM: u64 = 0;
const FORWARDING_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("uniform_horizon arrival model needs a positive horizon")]
    EmptyHorizon,
    #[error("cannot forward from node {0}: the cluster has a single node")]
    NoNeighbour(NodeId),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("failed to write event trace: {0}")]
    Trace(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimParams {
    /// Forwarding budget per request (M).
    pub max_forwards: u32,
    pub policy: Policy,
    pub arrival: ArrivalModel,
    /// Master seed; replication `i` runs with `seed ^ i`.
    pub seed: u64,
    /// Never forward a request back to the node it originally arrived at,
    /// unless that node is the only candidate.
    pub exclude_origin: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            max_forwards: 2,
            policy: Policy::Preferential,
            arrival: ArrivalModel::BatchAtZero,
            seed: 0,
            exclude_origin: false,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.arrival == ArrivalModel::UniformHorizon(0) {
            return Err(SimError::EmptyHorizon);
        }
        Ok(())
    }
}

pub fn replication_seed(master: u64, index: u64) -> u64 {
    master ^ index
}

/// Picks a node other than `current` uniformly at random, using exactly one
/// draw from `rng`.
pub fn pick_neighbor<R: Rng + ?Sized>(
    rng: &mut R,
    node_count: usize,
    current: NodeId,
) -> Result<NodeId, SimError> {
    if node_count < 2 {
        return Err(SimError::NoNeighbour(current));
    }
    let k = rng.gen_range(0..node_count - 1);
    Ok(NodeId(if k >= current.0 { k + 1 } else { k }))
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub queue: NodeQueue,
    pub admitted: u64,
    pub forced: u64,
    pub forwards_out: u64,
}

/// Per-node counters of one replication.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub name: String,
    /// Requests whose origin is this node.
    pub requests: u64,
    /// Of those, how many finished within their deadline (wherever processed).
    pub met_deadline: u64,
    pub missed_deadline: u64,
    /// Requests that ended up in this node's queue.
    pub processed: u64,
    pub admitted: u64,
    pub forced: u64,
    pub forwards_out: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicationResult {
    pub seed: u64,
    pub max_forwards: u32,
    pub requests: u64,
    pub met_deadline: u64,
    pub missed_deadline: u64,
    pub forwards: u64,
    /// Largest forward count seen on any request.
    pub max_hops: u32,
    /// Requests admitted within deadline that nevertheless finished late.
    /// Always zero unless a queue breaks its no-delay guarantee.
    pub admitted_but_missed: u64,
    pub per_node: Vec<NodeStats>,
}

impl ReplicationResult {
    pub fn met_rate(&self) -> f64 {
        ratio(self.met_deadline, self.requests)
    }

    /// Forwards over the most the cluster could have done (`M * requests`).
    pub fn forward_rate(&self) -> f64 {
        ratio(self.forwards, self.requests * u64::from(self.max_forwards))
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Mutable state of one replication.
pub struct Cluster<'t> {
    pub nodes: Vec<NodeState>,
    names: Vec<String>,
    max_forwards: u32,
    exclude_origin: bool,
    rng: ChaCha8Rng,
    completed: Vec<(NodeId, Completed)>,
    admitted: Vec<bool>,
    forwards: u64,
    max_hops: u32,
    trace: Option<&'t mut dyn Write>,
}

impl<'t> Cluster<'t> {
    pub fn new(names: Vec<String>, params: &SimParams, rng: ChaCha8Rng) -> Self {
        let nodes = (0..names.len())
            .map(|i| NodeState {
                id: NodeId(i),
                queue: NodeQueue::new(params.policy),
                admitted: 0,
                forced: 0,
                forwards_out: 0,
            })
            .collect();
        Cluster {
            nodes,
            names,
            max_forwards: params.max_forwards,
            exclude_origin: params.exclude_origin,
            rng,
            completed: Vec::new(),
            admitted: Vec::new(),
            forwards: 0,
            max_hops: 0,
            trace: None,
        }
    }

    pub fn with_trace(mut self, trace: &'t mut dyn Write) -> Self {
        self.trace = Some(trace);
        self
    }

    pub fn forwards(&self) -> u64 {
        self.forwards
    }

    fn event(&mut self, now: Time, node: NodeId, request: &Request, action: &str) -> io::Result<()> {
        if let Some(out) = self.trace.as_mut() {
            writeln!(out, "{now} {} {} {action}", self.names[node.0], request.id)?;
        }
        Ok(())
    }

    fn advance(&mut self, node: NodeId, now: Time) -> Result<(), SimError> {
        for done in self.nodes[node.0].queue.advance(now)? {
            if let Some(out) = self.trace.as_mut() {
                writeln!(out, "{} {} {} complete", done.end, self.names[node.0], done.request.id)?;
            }
            self.completed.push((node, done));
        }
        Ok(())
    }

    fn next_hop(&mut self, request: &Request, current: NodeId) -> Result<NodeId, SimError> {
        if self.exclude_origin && request.origin != current && self.nodes.len() > 2 {
            let candidates: Vec<usize> = (0..self.nodes.len())
                .filter(|&i| i != current.0 && i != request.origin.0)
                .collect();
            return Ok(NodeId(candidates[self.rng.gen_range(0..candidates.len())]));
        }
        pick_neighbor(&mut self.rng, self.nodes.len(), current)
    }

    /// Routes one request until some node's queue holds it; returns that node.
    pub fn dispatch(&mut self, mut request: Request, origin: NodeId, now: Time) -> Result<NodeId, SimError> {
        debug_assert!(request.forward_count <= self.max_forwards);
        let slot = request.id.0 as usize;
        if self.admitted.len() <= slot {
            self.admitted.resize(slot + 1, false);
        }
        let mut node = origin;
        self.event(now, node, &request, "arrive")?;
        loop {
            self.advance(node, now)?;
            if request.forward_count >= self.max_forwards {
                let outcome = self.nodes[node.0].queue.force_admit(request.clone());
                let state = &mut self.nodes[node.0];
                match outcome {
                    AdmitOutcome::Admitted { .. } => state.admitted += 1,
                    _ => state.forced += 1,
                }
                let end = outcome.scheduled_end().unwrap_or_default();
                self.event(now, node, &request, &format!("force end={end}"))?;
                break;
            }
            match self.nodes[node.0].queue.try_admit(request.clone()) {
                AdmitOutcome::Admitted { scheduled_end } => {
                    self.nodes[node.0].admitted += 1;
                    self.admitted[slot] = true;
                    self.event(now, node, &request, &format!("admit end={scheduled_end}"))?;
                    break;
                }
                _ => {
                    let next = self.next_hop(&request, node)?;
                    request.forward_count += 1;
                    self.forwards += 1;
                    self.nodes[node.0].forwards_out += 1;
                    self.event(now, node, &request, &format!("forward to={}", self.names[next.0]))?;
                    node = next;
                }
            }
        }
        self.max_hops = self.max_hops.max(request.forward_count);
        Ok(node)
    }

    /// Drains every queue and tallies the outcome.
    pub fn finish(mut self, seed: u64, requests: &[Request]) -> Result<ReplicationResult, SimError> {
        for i in 0..self.nodes.len() {
            self.advance(NodeId(i), INFINITY)?;
        }
        let mut per_node: Vec<NodeStats> = self
            .nodes
            .iter()
            .map(|n| NodeStats {
                name: self.names[n.id.0].clone(),
                admitted: n.admitted,
                forced: n.forced,
                forwards_out: n.forwards_out,
                ..NodeStats::default()
            })
            .collect();
        for r in requests {
            per_node[r.origin.0].requests += 1;
        }
        let mut met = 0;
        let mut admitted_but_missed = 0;
        for (node, done) in &self.completed {
            per_node[node.0].processed += 1;
            let origin = &mut per_node[done.request.origin.0];
            if done.met_deadline() {
                met += 1;
                origin.met_deadline += 1;
            } else {
                origin.missed_deadline += 1;
                if self.admitted.get(done.request.id.0 as usize) == Some(&true) {
                    admitted_but_missed += 1;
                }
            }
        }
        Ok(ReplicationResult {
            seed,
            max_forwards: self.max_forwards,
            requests: self.completed.len() as u64,
            met_deadline: met,
            missed_deadline: self.completed.len() as u64 - met,
            forwards: self.forwards,
            max_hops: self.max_hops,
            admitted_but_missed,
            per_node,
        })
    }
}

/// Request list a replication with this `seed` processes. Independent of the
/// queue policy.
pub fn replication_requests(scenario: &ScenarioConfig, arrival: ArrivalModel, seed: u64) -> Vec<Request> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(WORKLOAD_STREAM);
    generate_requests(scenario, arrival, &mut rng)
}

pub fn run_replication(
    scenario: &ScenarioConfig,
    params: &SimParams,
    seed: u64,
) -> Result<ReplicationResult, SimError> {
    run_replication_traced(scenario, params, seed, None)
}

/// Like [`run_replication`], additionally writing one line per event
/// (`time node request action`) to `trace`.
pub fn run_replication_traced(
    scenario: &ScenarioConfig,
    params: &SimParams,
    seed: u64,
    trace: Option<&mut dyn Write>,
) -> Result<ReplicationResult, SimError> {
    scenario.validate()?;
    params.validate()?;
    let requests = replication_requests(scenario, params.arrival, seed);
    run_requests(scenario, params, seed, &requests, trace)
}

/// Runs an explicit request list through a fresh cluster.
pub fn run_requests(
    scenario: &ScenarioConfig,
    params: &SimParams,
    seed: u64,
    requests: &[Request],
    trace: Option<&mut dyn Write>,
) -> Result<ReplicationResult, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FORWARDING_STREAM);
    let mut cluster = Cluster::new(scenario.nodes.clone(), params, rng);
    if let Some(out) = trace {
        cluster = cluster.with_trace(out);
    }
    for request in requests {
        cluster.dispatch(request.clone(), request.origin, request.arrival_time)?;
    }
    cluster.finish(seed, requests)
}

/// Runs `reps` replications in parallel; results are ordered by index.
pub fn run_replications(
    scenario: &ScenarioConfig,
    params: &SimParams,
    reps: u32,
) -> Result<Vec<ReplicationResult>, SimError> {
    scenario.validate()?;
    params.validate()?;
    (0..u64::from(reps))
        .into_par_iter()
        .map(|i| run_replication(scenario, params, replication_seed(params.seed, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{builtin_scenario, Environment, ServiceSpec};

    fn tiny_scenario(nodes: usize, counts: Vec<Vec<u64>>) -> ScenarioConfig {
        ScenarioConfig {
            name: "tiny".into(),
            services: vec![ServiceSpec {
                id: "S6".into(),
                pixel_count: 921_600,
                environment: Environment::Isolated,
                process_time: 20,
                deadline: 4000,
            }],
            nodes: (1..=nodes).map(|i| format!("M{i}")).collect(),
            counts,
        }
    }

    fn cluster(nodes: usize, max_forwards: u32, policy: Policy) -> Cluster<'static> {
        let params = SimParams {
            max_forwards,
            policy,
            ..SimParams::default()
        };
        let names = (1..=nodes).map(|i| format!("M{i}")).collect();
        Cluster::new(names, &params, ChaCha8Rng::seed_from_u64(11))
    }

    /// Fills a node's queue so that anything with deadline <= `until` is refused.
    fn saturate(c: &mut Cluster, node: usize, until: Time) {
        for i in 0..(until / 100 + 1) {
            c.nodes[node].queue.force_admit(Request::simple(1_000_000 + i, 100, until));
        }
    }

    #[test]
    fn single_request_on_idle_node() {
        let s = tiny_scenario(1, vec![vec![1]]);
        let r = run_replication(&s, &SimParams::default(), 0).unwrap();
        assert_eq!((r.requests, r.met_deadline, r.forwards), (1, 1, 0));
    }

    #[test]
    fn zero_budget_forces_at_origin() {
        for policy in [Policy::Fifo, Policy::Preferential] {
            let mut c = cluster(2, 0, policy);
            saturate(&mut c, 0, 4000);
            let req = Request::simple(0, 20, 4000);
            assert_eq!(c.dispatch(req.clone(), NodeId(0), 0).unwrap(), NodeId(0));
            assert_eq!(c.forwards(), 0);
            assert_eq!(c.nodes[0].forced, 1);
            let r = c.finish(0, &[req]).unwrap();
            // Saturating blocks are not part of the request list but still drain.
            assert!(r.missed_deadline >= 1);
        }
    }

    #[test]
    fn admitted_at_origin_takes_no_hop() {
        let mut c = cluster(3, 2, Policy::Preferential);
        assert_eq!(c.dispatch(Request::simple(0, 20, 4000), NodeId(1), 0).unwrap(), NodeId(1));
        assert_eq!(c.forwards(), 0);
    }

    #[test]
    fn rejected_at_origin_admitted_at_neighbour() {
        let mut c = cluster(2, 2, Policy::Preferential);
        saturate(&mut c, 0, 4000);
        let node = c.dispatch(Request::simple(0, 20, 4000), NodeId(0), 0).unwrap();
        assert_eq!(node, NodeId(1));
        assert_eq!(c.forwards(), 1);
        assert_eq!(c.nodes[0].forwards_out, 1);
        assert_eq!(c.nodes[1].admitted, 1);
    }

    #[test]
    fn rejected_everywhere_forces_after_budget() {
        for policy in [Policy::Fifo, Policy::Preferential] {
            let mut c = cluster(3, 2, policy);
            for n in 0..3 {
                saturate(&mut c, n, 4000);
            }
            let req = Request::simple(0, 20, 4000);
            c.dispatch(req, NodeId(0), 0).unwrap();
            assert_eq!(c.forwards(), 2);
            assert_eq!(c.max_hops, 2);
            assert_eq!(c.nodes.iter().map(|n| n.forced).sum::<u64>(), 1);
        }
    }

    #[test]
    fn single_node_cannot_forward() {
        let mut c = cluster(1, 2, Policy::Fifo);
        saturate(&mut c, 0, 4000);
        assert!(matches!(
            c.dispatch(Request::simple(0, 20, 4000), NodeId(0), 0),
            Err(SimError::NoNeighbour(NodeId(0)))
        ));
    }

    #[test]
    fn pick_neighbor_two_nodes_is_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(pick_neighbor(&mut rng, 2, NodeId(0)).unwrap(), NodeId(1));
        }
        assert!(pick_neighbor(&mut rng, 1, NodeId(0)).is_err());
    }

    #[test]
    fn pick_neighbor_is_deterministic() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| pick_neighbor(&mut rng, 6, NodeId(2)).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn exclude_origin_avoids_bouncing_back() {
        let params = SimParams {
            exclude_origin: true,
            ..SimParams::default()
        };
        let names = (1..=3).map(|i| format!("M{i}")).collect();
        let mut c = Cluster::new(names, &params, ChaCha8Rng::seed_from_u64(4));
        let mut req = Request::simple(0, 20, 4000);
        req.forward_count = 1;
        for _ in 0..50 {
            assert_eq!(c.next_hop(&req, NodeId(1)).unwrap(), NodeId(2));
        }
    }

    #[test]
    fn trace_lines_are_written() {
        let s = tiny_scenario(2, vec![vec![2], vec![1]]);
        let mut out = Vec::new();
        run_replication_traced(&s, &SimParams::default(), 3, Some(&mut out)).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().filter(|l| l.ends_with("arrive")).count(), 3);
        assert_eq!(text.lines().filter(|l| l.ends_with("complete")).count(), 3);
        assert!(text.lines().all(|l| l.split(' ').count() >= 4));
    }

    #[test]
    fn scenario_one_counts() {
        let s = builtin_scenario(1).unwrap();
        let r = run_replication(&s, &SimParams::default(), 5).unwrap();
        assert_eq!(r.requests, 6000);
        assert_eq!(r.met_deadline + r.missed_deadline, 6000);
        assert!(r.forwards <= 12_000);
        assert!(r.max_hops <= 2);
        assert_eq!(r.admitted_but_missed, 0);
    }

    #[test]
    fn horizon_must_be_positive() {
        let s = tiny_scenario(1, vec![vec![1]]);
        let params = SimParams {
            arrival: ArrivalModel::UniformHorizon(0),
            ..SimParams::default()
        };
        assert!(matches!(run_replication(&s, &params, 0), Err(SimError::EmptyHorizon)));
    }
}
