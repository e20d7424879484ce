use meclb_core::metrics::{
    aggregate, format_csv, render_svg, write_csv, AggregateStats, Metric, RunInfo, CSV_HEADER,
};
use meclb_core::sched::Policy;
use meclb_core::sim::{run_replications, SimParams, GENERATOR};
use meclb_core::workload::{builtin_scenario, parse_scenario_file, write_scenario_file};

fn stats_for(n: u32, policy: Policy, reps: u32) -> AggregateStats {
    let s = builtin_scenario(n).unwrap();
    let params = SimParams {
        policy,
        seed: 7,
        ..SimParams::default()
    };
    let results = run_replications(&s, &params, reps).unwrap();
    aggregate(
        &results,
        RunInfo {
            scenario: s.name.clone(),
            policy,
            seed: 7,
            generator: GENERATOR.into(),
            arrival: params.arrival.label(),
        },
    )
    .unwrap()
}

fn all_stats() -> Vec<AggregateStats> {
    let mut out = Vec::new();
    for n in 1..=3 {
        for p in [Policy::Fifo, Policy::Preferential] {
            out.push(stats_for(n, p, 2));
        }
    }
    out
}

#[test]
fn csv_parses_back() {
    let stats = all_stats();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    write_csv(&stats, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], CSV_HEADER);
    assert!(text.ends_with('\n'));
    for (line, s) in lines[1..].iter().zip(&stats) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], s.info.scenario);
        assert_eq!(f[1], s.info.policy.name());
        assert_eq!(f[2].parse::<usize>().unwrap(), s.replications);
        assert!((f[3].parse::<f64>().unwrap() - s.met_rate).abs() <= 1e-6, "{line} {}", s.met_rate);
        assert!((f[4].parse::<f64>().unwrap() - s.met_sd).abs() <= 1e-6);
        assert!((f[5].parse::<f64>().unwrap() - s.forward_rate).abs() <= 1e-6);
        assert!((f[6].parse::<f64>().unwrap() - s.forward_sd).abs() <= 1e-6);
        assert_eq!(f[7].parse::<u64>().unwrap(), s.total_requests);
        assert_eq!(f[8], "7");
        assert_eq!(f[9], GENERATOR);
        assert_eq!(f[10], "batch_at_zero");
        assert_eq!(f[11], "2");
        assert!(f[3].split('.').nth(1).unwrap().len() == 6);
    }
}

#[test]
fn csv_write_reports_path_on_failure() {
    let err = write_csv(&[], "/nonexistent-dir/x.csv").unwrap_err();
    assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
}

#[test]
fn forward_rate_uses_max_referrals() {
    for (n, max) in [(1, 12_000.0), (2, 16_000.0), (3, 19_600.0)] {
        let s = stats_for(n, Policy::Fifo, 1);
        assert!((s.forward_rate - s.mean_forwards / max).abs() < 1e-12);
    }
}

#[test]
fn aggregate_ignores_result_order() {
    let s = builtin_scenario(1).unwrap();
    let params = SimParams::default();
    let mut results = run_replications(&s, &params, 6).unwrap();
    let info = RunInfo {
        scenario: "s".into(),
        policy: Policy::Preferential,
        seed: 0,
        generator: GENERATOR.into(),
        arrival: "batch_at_zero".into(),
    };
    let a = aggregate(&results, info.clone()).unwrap();
    results.reverse();
    results.swap(1, 4);
    let b = aggregate(&results, info).unwrap();
    assert_eq!(a, b);
}

fn attr<'a>(tag: &'a str, name: &str) -> &'a str {
    let key = format!(" {name}=\"");
    let start = tag.find(&key).unwrap() + key.len();
    let len = tag[start..].find('"').unwrap();
    &tag[start..start + len]
}

#[test]
fn chart_structure_and_scale() {
    let stats = all_stats();
    let svg = render_svg(&stats, Metric::MetRate).unwrap();
    assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\""));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<g class=\"group\"").count(), 3);
    let bars: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"bar\"")).collect();
    assert_eq!(bars.len(), 6);
    assert!(svg.contains(">FIFO<") && svg.contains(">Preferential<"));
    assert!(svg.contains(">100%<") && svg.contains(">0%<"));
    assert!(svg.contains("Scenario"));

    // Bar heights are the rate times a common plot height, bottoms aligned.
    let mut scale = None;
    for (bar, s) in bars.iter().zip(&stats) {
        let h: f64 = attr(bar, "height").parse().unwrap();
        let y: f64 = attr(bar, "y").parse().unwrap();
        assert_eq!(attr(bar, "data-policy"), s.info.policy.name());
        let k0 = *scale.get_or_insert(h / s.met_rate);
        assert!((h - s.met_rate * k0).abs() < 0.01, "{h} vs {}", s.met_rate * k0);
        assert!((y + h - 360.0).abs() < 1e-3);
    }
}

#[test]
fn chart_is_deterministic() {
    let stats = all_stats();
    for metric in [Metric::MetRate, Metric::ForwardRate] {
        assert_eq!(render_svg(&stats, metric).unwrap(), render_svg(&stats, metric).unwrap());
    }
    assert_eq!(format_csv(&stats), format_csv(&all_stats()));
}

#[test]
fn scenario_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for n in 1..=3 {
        let s = builtin_scenario(n).unwrap();
        let path = dir.path().join(format!("s{n}.json"));
        write_scenario_file(&s, &path).unwrap();
        assert_eq!(parse_scenario_file(&path).unwrap(), s);
    }
    let missing = parse_scenario_file(dir.path().join("missing.json")).unwrap_err();
    assert!(missing.to_string().contains("missing.json"));
}
