//! Aggregation over replications and the CSV / SVG reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::sched::Policy;
use crate::sim::ReplicationResult;

pub const CSV_HEADER: &str = "scenario,policy,reps,met_rate,met_sd,forward_rate,forward_sd,total_requests,seed,generator,arrival,max_forwards,mean_met,mean_forwards";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty result list")]
    Empty,
    #[error("replications disagree on {what}")]
    Mixed { what: &'static str },
    #[error("nothing to chart")]
    NoScenarios,
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// How a batch of replications was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunInfo {
    pub scenario: String,
    pub policy: Policy,
    pub seed: u64,
    pub generator: String,
    pub arrival: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeAggregate {
    pub name: String,
    /// Mean fraction of this node's own requests that met their deadline.
    pub met_rate: f64,
    pub mean_forwards_out: f64,
    pub mean_processed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub info: RunInfo,
    pub replications: usize,
    pub max_forwards: u32,
    pub total_requests: u64,
    pub met_rate: f64,
    pub met_sd: f64,
    pub forward_rate: f64,
    pub forward_sd: f64,
    pub mean_met: f64,
    pub mean_forwards: f64,
    pub per_node: Vec<NodeAggregate>,
}

/// Mean and sample standard deviation. The values are summed in sorted order
/// so the result does not depend on input order; one sample has sd 0.
fn mean_sd(mut values: Vec<f64>) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    sq.sort_by(f64::total_cmp);
    (mean, (sq.iter().sum::<f64>() / (n - 1.0)).sqrt())
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    mean_sd(values.collect()).0
}

pub fn aggregate(results: &[ReplicationResult], info: RunInfo) -> Result<AggregateStats, MetricsError> {
    let first = results.first().ok_or(MetricsError::Empty)?;
    if results.iter().any(|r| r.requests != first.requests) {
        return Err(MetricsError::Mixed { what: "request totals" });
    }
    if results.iter().any(|r| r.max_forwards != first.max_forwards) {
        return Err(MetricsError::Mixed { what: "max_forwards" });
    }
    if results.iter().any(|r| r.per_node.len() != first.per_node.len()) {
        return Err(MetricsError::Mixed { what: "node count" });
    }

    let (met_rate, met_sd) = mean_sd(results.iter().map(ReplicationResult::met_rate).collect());
    let (forward_rate, forward_sd) =
        mean_sd(results.iter().map(ReplicationResult::forward_rate).collect());
    let per_node = first
        .per_node
        .iter()
        .enumerate()
        .map(|(i, n)| NodeAggregate {
            name: n.name.clone(),
            met_rate: mean_of(results.iter().map(|r| {
                let n = &r.per_node[i];
                if n.requests == 0 {
                    0.0
                } else {
                    n.met_deadline as f64 / n.requests as f64
                }
            })),
            mean_forwards_out: mean_of(results.iter().map(|r| r.per_node[i].forwards_out as f64)),
            mean_processed: mean_of(results.iter().map(|r| r.per_node[i].processed as f64)),
        })
        .collect();

    Ok(AggregateStats {
        info,
        replications: results.len(),
        max_forwards: first.max_forwards,
        total_requests: first.requests,
        met_rate,
        met_sd,
        forward_rate,
        forward_sd,
        mean_met: mean_of(results.iter().map(|r| r.met_deadline as f64)),
        mean_forwards: mean_of(results.iter().map(|r| r.forwards as f64)),
        per_node,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One header line plus one line per entry, every line newline-terminated.
pub fn format_csv(stats: &[AggregateStats]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in stats {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{:.6},{:.6}",
            csv_field(&s.info.scenario),
            s.info.policy,
            s.replications,
            s.met_rate,
            s.met_sd,
            s.forward_rate,
            s.forward_sd,
            s.total_requests,
            s.info.seed,
            csv_field(&s.info.generator),
            csv_field(&s.info.arrival),
            s.max_forwards,
            s.mean_met,
            s.mean_forwards,
        );
    }
    out
}

pub fn write_csv(stats: &[AggregateStats], path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let path = path.as_ref();
    fs::write(path, format_csv(stats)).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-node breakdown as CSV.
pub fn format_node_csv(stats: &[AggregateStats]) -> String {
    let mut out = String::from("scenario,policy,node,met_rate,mean_forwards_out,mean_processed\n");
    for s in stats {
        for n in &s.per_node {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6}",
                csv_field(&s.info.scenario),
                s.info.policy,
                csv_field(&n.name),
                n.met_rate,
                n.mean_forwards_out,
                n.mean_processed
            );
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MetRate,
    ForwardRate,
}

impl Metric {
    fn value(&self, s: &AggregateStats) -> f64 {
        match self {
            Metric::MetRate => s.met_rate,
            Metric::ForwardRate => s.forward_rate,
        }
    }

    fn title(&self) -> &'static str {
        match self {
            Metric::MetRate => "Requests answered within deadline",
            Metric::ForwardRate => "Forwarded requests",
        }
    }

    fn axis_label(&self) -> &'static str {
        match self {
            Metric::MetRate => "Deadlines met (% of requests)",
            Metric::ForwardRate => "Forwards (% of maximum possible)",
        }
    }
}

const WIDTH: u32 = 720;
const HEIGHT: u32 = 420;
const LEFT: u32 = 80;
const RIGHT: u32 = 150;
const TOP: u32 = 50;
const BOTTOM: u32 = 60;
const PLOT_W: u32 = WIDTH - LEFT - RIGHT;
const PLOT_H: u32 = HEIGHT - TOP - BOTTOM;
const BAR_W: u32 = 40;

fn policy_colour(p: Policy) -> &'static str {
    match p {
        Policy::Fifo => "#4e79a7",
        Policy::Preferential => "#f28e2b",
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped bar chart: one group per scenario, one bar per policy, y axis
/// from 0 to 100 %. Scenarios keep their first-appearance order.
pub fn render_svg(stats: &[AggregateStats], metric: Metric) -> Result<String, MetricsError> {
    let mut scenarios: Vec<&str> = Vec::new();
    for s in stats {
        if !scenarios.contains(&s.info.scenario.as_str()) {
            scenarios.push(&s.info.scenario);
        }
    }
    if scenarios.is_empty() {
        return Err(MetricsError::NoScenarios);
    }
    let mut policies: Vec<Policy> = stats.iter().map(|s| s.info.policy).collect();
    policies.sort();
    policies.dedup();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="25" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + PLOT_W / 2,
        metric.title()
    );

    // Grid and y axis.
    for pct in (0..=100).step_by(20) {
        let y = TOP + PLOT_H - PLOT_H * pct / 100;
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##,
            LEFT + PLOT_W
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{pct}%</text>"#,
            LEFT - 6,
            y + 4
        );
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
        TOP + PLOT_H
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        TOP + PLOT_H,
        LEFT + PLOT_W,
        TOP + PLOT_H
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        TOP + PLOT_H / 2,
        TOP + PLOT_H / 2,
        metric.axis_label()
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">Scenario</text>"#,
        LEFT + PLOT_W / 2,
        HEIGHT - 15
    );

    let group_w = PLOT_W as f64 / scenarios.len() as f64;
    for (g, scenario) in scenarios.iter().enumerate() {
        let centre = LEFT as f64 + group_w * (g as f64 + 0.5);
        let bars_w = (BAR_W as usize * policies.len()) as f64;
        let _ = writeln!(
            svg,
            r#"<g class="group" data-scenario="{}">"#,
            xml_escape(scenario)
        );
        for (p, policy) in policies.iter().enumerate() {
            let Some(s) = stats
                .iter()
                .find(|s| s.info.scenario == *scenario && s.info.policy == *policy)
            else {
                continue;
            };
            let value = metric.value(s).clamp(0.0, 1.0);
            let h = value * PLOT_H as f64;
            let x = centre - bars_w / 2.0 + (p as u32 * BAR_W) as f64;
            let y = (TOP + PLOT_H) as f64 - h;
            let _ = writeln!(
                svg,
                r#"<rect class="bar" data-policy="{policy}" data-value="{value:.6}" x="{x:.3}" y="{y:.3}" width="{BAR_W}" height="{h:.3}" fill="{}"/>"#,
                policy_colour(*policy)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" font-size="10">{:.2}%</text>"#,
                x + BAR_W as f64 / 2.0,
                y - 4.0,
                value * 100.0
            );
        }
        let _ = writeln!(svg, "</g>");
        let _ = writeln!(
            svg,
            r#"<text x="{centre:.3}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + PLOT_H + 18,
            xml_escape(scenario)
        );
    }

    // Legend.
    let lx = LEFT + PLOT_W + 20;
    for (i, policy) in policies.iter().enumerate() {
        let y = TOP + 10 + i as u32 * 22;
        let _ = writeln!(
            svg,
            r#"<rect class="legend" x="{lx}" y="{y}" width="14" height="14" fill="{}"/>"#,
            policy_colour(*policy)
        );
        let label = match policy {
            Policy::Fifo => "FIFO",
            Policy::Preferential => "Preferential",
        };
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{label}</text>"#, lx + 20, y + 11);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_chart(
    stats: &[AggregateStats],
    metric: Metric,
    path: impl AsRef<Path>,
) -> Result<(), MetricsError> {
    let path = path.as_ref();
    let svg = render_svg(stats, metric)?;
    fs::write(path, svg).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}
