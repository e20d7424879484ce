use meclb_core::sched::Policy;
use meclb_core::sim::{
    pick_neighbor, replication_requests, replication_seed, run_replication, run_replications,
    run_requests, SimParams,
};
use meclb_core::workload::{builtin_scenario, generate_requests, ArrivalModel, ScenarioConfig};
use meclb_core::NodeId;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params(policy: Policy) -> SimParams {
    SimParams {
        policy,
        seed: 7,
        ..SimParams::default()
    }
}

#[test]
fn every_request_is_classified_once() {
    for n in 1..=3 {
        let s = builtin_scenario(n).unwrap();
        for policy in [Policy::Fifo, Policy::Preferential] {
            let r = run_replication(&s, &params(policy), 11).unwrap();
            assert_eq!(r.requests, s.total_requests());
            assert_eq!(r.met_deadline + r.missed_deadline, r.requests);
            let by_origin: u64 = r.per_node.iter().map(|n| n.requests).sum();
            let processed: u64 = r.per_node.iter().map(|n| n.processed).sum();
            assert_eq!(by_origin, r.requests);
            assert_eq!(processed, r.requests);
            for (i, node) in r.per_node.iter().enumerate() {
                assert_eq!(node.requests, s.node_total(i));
            }
            assert!(r.max_hops <= 2);
            assert!(r.forwards <= s.max_forwards_total(2));
            assert_eq!(r.per_node.iter().map(|n| n.forwards_out).sum::<u64>(), r.forwards);
        }
    }
}

#[test]
fn preferential_admissions_are_never_late() {
    for n in 1..=3 {
        let s = builtin_scenario(n).unwrap();
        let uniform = SimParams {
            arrival: ArrivalModel::UniformHorizon(20_000),
            ..params(Policy::Preferential)
        };
        for p in [params(Policy::Preferential), uniform] {
            let r = run_replication(&s, &p, 3).unwrap();
            assert_eq!(r.admitted_but_missed, 0, "scenario {n} {:?}", p.arrival);
        }
    }
}

#[test]
fn equal_seeds_give_equal_results() {
    let s = builtin_scenario(2).unwrap();
    for policy in [Policy::Fifo, Policy::Preferential] {
        let a = run_replications(&s, &params(policy), 4).unwrap();
        let b = run_replications(&s, &params(policy), 4).unwrap();
        assert_eq!(a, b);
        // Sub-seeds differ per replication.
        assert_ne!(a[0], a[1]);
        assert_eq!(a[2].seed, replication_seed(7, 2));
    }
}

#[test]
fn policies_see_the_same_request_list() {
    let s = builtin_scenario(1).unwrap();
    let seed = replication_seed(7, 0);
    let list = replication_requests(&s, ArrivalModel::BatchAtZero, seed);
    for policy in [Policy::Fifo, Policy::Preferential] {
        let p = params(policy);
        let direct = run_replication(&s, &p, seed).unwrap();
        let from_list = run_requests(&s, &p, seed, &list, None).unwrap();
        assert_eq!(direct, from_list);
    }
}

#[test]
fn zero_forward_budget_never_forwards() {
    let s = builtin_scenario(1).unwrap();
    let p = SimParams {
        max_forwards: 0,
        ..params(Policy::Preferential)
    };
    let r = run_replication(&s, &p, 1).unwrap();
    assert_eq!(r.forwards, 0);
    assert_eq!(r.forward_rate(), 0.0);
    assert_eq!(r.requests, 6000);
}

#[test]
fn uniform_arrivals_relieve_overload() {
    let s = builtin_scenario(1).unwrap();
    let batch = run_replication(&s, &params(Policy::Preferential), 1).unwrap();
    let spread = SimParams {
        arrival: ArrivalModel::UniformHorizon(300_000),
        ..params(Policy::Preferential)
    };
    let spread = run_replication(&s, &spread, 1).unwrap();
    assert!(spread.met_rate() > batch.met_rate());
}

#[test]
fn neighbour_choice_is_uniform() {
    // 60000 draws over two neighbours: each count is Binomial(60000, 1/2),
    // sd = sqrt(60000 / 4) ~ 122.5, so 3 sd ~ 367.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = [0u32; 3];
    for _ in 0..60_000 {
        counts[pick_neighbor(&mut rng, 3, NodeId(0)).unwrap().0] += 1;
    }
    assert_eq!(counts[0], 0);
    for c in &counts[1..] {
        assert!((*c as i64 - 30_000).abs() <= 367, "{counts:?}");
    }
}

fn matrix() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (1..=4usize, 1..=3usize).prop_flat_map(|(nodes, services)| {
        prop::collection::vec(prop::collection::vec(0..30u64, services), nodes)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_stream_matches_counts(counts in matrix(), seed in any::<u64>(), horizon in prop::option::of(1..5_000u64)) {
        let base = builtin_scenario(1).unwrap();
        let services = base.services[..counts[0].len()].to_vec();
        let s = ScenarioConfig {
            name: "random".into(),
            nodes: (0..counts.len()).map(|i| format!("N{i}")).collect(),
            services,
            counts: counts.clone(),
        };
        let model = horizon.map_or(ArrivalModel::BatchAtZero, ArrivalModel::UniformHorizon);
        let stream = generate_requests(&s, model, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut seen = vec![vec![0u64; counts[0].len()]; counts.len()];
        for r in &stream {
            seen[r.origin.0][r.service] += 1;
        }
        prop_assert_eq!(seen, counts);
        prop_assert!(stream.windows(2).all(|w| w[0].arrival_time <= w[1].arrival_time));
        prop_assert!(stream.iter().enumerate().all(|(i, r)| r.id.0 == i as u64));
    }
}
