//! Service catalog, built-in scenarios, request-stream generation and the
//! JSON scenario file format.
//!
//! A scenario file looks like this (`schema_version` is currently 1; unknown
//! keys are rejected; count cells that are omitted default to zero):
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "two-nodes",
//!   "services": [
//!     { "id": "S1", "pixel_count": 8294400, "environment": "busy",
//!       "process_time": 180, "deadline": 9000 }
//!   ],
//!   "nodes": ["M1", "M2"],
//!   "counts": { "M1": { "S1": 10 }, "M2": { "S1": 5 } }
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::request::{NodeId, Request, RequestId, Time};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Busy,
    Isolated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub id: String,
    /// Image size the service handles. Informational only.
    #[serde(default)]
    pub pixel_count: u64,
    /// Deployment label. Informational only.
    #[serde(default = "default_environment")]
    pub environment: Environment,
    pub process_time: Time,
    /// Relative deadline, counted from the request's arrival.
    pub deadline: Time,
}

fn default_environment() -> Environment {
    Environment::Busy
}

/// Nodes, services and how many requests of each service every node receives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub name: String,
    pub services: Vec<ServiceSpec>,
    pub nodes: Vec<String>,
    /// `counts[node][service]`.
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown builtin scenario {0} (expected 1, 2 or 3)")]
    UnknownBuiltin(u32),
    #[error("failed to read scenario file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to write scenario file {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("scenario has no nodes")]
    NoNodes,
    #[error("scenario has no services")]
    NoServices,
    #[error("duplicate {kind} id `{id}`")]
    Duplicate { kind: &'static str, id: String },
    #[error("service `{0}` must have positive process_time and deadline")]
    NonPositiveService(String),
    #[error("counts reference undeclared node `{0}`")]
    UndeclaredNode(String),
    #[error("counts for node `{node}` reference undeclared service `{service}`")]
    UndeclaredService { node: String, service: String },
    #[error("count for node `{node}`, service `{service}` is negative ({count})")]
    NegativeCount {
        node: String,
        service: String,
        count: i64,
    },
    #[error("counts matrix is {rows}x{cols}, expected {nodes}x{services}")]
    Shape {
        rows: usize,
        cols: usize,
        nodes: usize,
        services: usize,
    },
}

/// The six video-analytics services: three image sizes in busy and isolated
/// environments.
pub fn service_catalog() -> Vec<ServiceSpec> {
    let rows = [
        ("S1", 8_294_400, Environment::Busy, 180, 9_000),
        ("S2", 2_073_600, Environment::Busy, 44, 9_000),
        ("S3", 921_600, Environment::Busy, 20, 9_000),
        ("S4", 8_294_400, Environment::Isolated, 180, 4_000),
        ("S5", 2_073_600, Environment::Isolated, 44, 4_000),
        ("S6", 921_600, Environment::Isolated, 20, 4_000),
    ];
    rows.into_iter()
        .map(|(id, pixel_count, environment, process_time, deadline)| ServiceSpec {
            id: id.to_string(),
            pixel_count,
            environment,
            process_time,
            deadline,
        })
        .collect()
}

/// Built-in scenario 1, 2 or 3.
pub fn builtin_scenario(n: u32) -> Result<ScenarioConfig, ScenarioError> {
    const SCENARIO_1: [[u64; 6]; 3] = [
        [500, 300, 200, 500, 300, 200],
        [200, 300, 500, 200, 300, 500],
        [300, 500, 200, 300, 500, 200],
    ];
    const SCENARIO_2: [[u64; 6]; 3] = [
        [250, 300, 700, 250, 300, 700],
        [100, 300, 1000, 100, 300, 1000],
        [150, 500, 700, 150, 500, 700],
    ];
    const LIGHT_NODE: [u64; 6] = [100; 6];

    let counts: Vec<Vec<u64>> = match n {
        1 => SCENARIO_1.iter().map(|r| r.to_vec()).collect(),
        2 => SCENARIO_2.iter().map(|r| r.to_vec()).collect(),
        3 => SCENARIO_2
            .iter()
            .chain([LIGHT_NODE; 3].iter())
            .map(|r| r.to_vec())
            .collect(),
        other => return Err(ScenarioError::UnknownBuiltin(other)),
    };
    Ok(ScenarioConfig {
        name: format!("scenario-{n}"),
        services: service_catalog(),
        nodes: (1..=counts.len()).map(|i| format!("M{i}")).collect(),
        counts,
    })
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.nodes.is_empty() {
            return Err(ScenarioError::NoNodes);
        }
        if self.services.is_empty() {
            return Err(ScenarioError::NoServices);
        }
        check_unique("node", self.nodes.iter())?;
        check_unique("service", self.services.iter().map(|s| &s.id))?;
        if let Some(s) = self
            .services
            .iter()
            .find(|s| s.process_time == 0 || s.deadline == 0)
        {
            return Err(ScenarioError::NonPositiveService(s.id.clone()));
        }
        let cols = self.counts.iter().map(Vec::len).find(|&c| c != self.services.len());
        if self.counts.len() != self.nodes.len() || cols.is_some() {
            return Err(ScenarioError::Shape {
                rows: self.counts.len(),
                cols: cols.unwrap_or(self.services.len()),
                nodes: self.nodes.len(),
                services: self.services.len(),
            });
        }
        Ok(())
    }

    pub fn total_requests(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn node_total(&self, node: usize) -> u64 {
        self.counts[node].iter().sum()
    }

    pub fn service_total(&self, service: usize) -> u64 {
        self.counts.iter().map(|row| row[service]).sum()
    }

    /// Most forwards the cluster can perform: every request hopping `max_forwards` times.
    pub fn max_forwards_total(&self, max_forwards: u32) -> u64 {
        self.total_requests() * u64::from(max_forwards)
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            schema_version: SCHEMA_VERSION,
            name: self.name.clone(),
            services: self.services.clone(),
            nodes: self.nodes.clone(),
            counts: self
                .nodes
                .iter()
                .zip(&self.counts)
                .map(|(node, row)| {
                    let cells = self
                        .services
                        .iter()
                        .zip(row)
                        .map(|(s, &c)| (s.id.clone(), c as i64))
                        .collect();
                    (node.clone(), cells)
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("scenario serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|source| ScenarioError::Parse {
                path: PathBuf::from("<input>"),
                source,
            })?;
        file.into_config()
    }
}

fn check_unique<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a String>,
) -> Result<(), ScenarioError> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ScenarioError::Duplicate {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: u32,
    name: String,
    services: Vec<ServiceSpec>,
    nodes: Vec<String>,
    counts: BTreeMap<String, BTreeMap<String, i64>>,
}

impl ScenarioFile {
    fn into_config(self) -> Result<ScenarioConfig, ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::SchemaVersion {
                found: self.schema_version,
            });
        }
        let mut counts = vec![vec![0u64; self.services.len()]; self.nodes.len()];
        for (node, cells) in &self.counts {
            let row = self
                .nodes
                .iter()
                .position(|n| n == node)
                .ok_or_else(|| ScenarioError::UndeclaredNode(node.clone()))?;
            for (service, &count) in cells {
                let col = self
                    .services
                    .iter()
                    .position(|s| &s.id == service)
                    .ok_or_else(|| ScenarioError::UndeclaredService {
                        node: node.clone(),
                        service: service.clone(),
                    })?;
                if count < 0 {
                    return Err(ScenarioError::NegativeCount {
                        node: node.clone(),
                        service: service.clone(),
                        count,
                    });
                }
                counts[row][col] = count as u64;
            }
        }
        let config = ScenarioConfig {
            name: self.name,
            services: self.services,
            nodes: self.nodes,
            counts,
        };
        config.validate()?;
        Ok(config)
    }
}

pub fn parse_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile =
        serde_json::from_str(&text).map_err(|source| ScenarioError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
    file.into_config()
}

pub fn write_scenario_file(
    config: &ScenarioConfig,
    path: impl AsRef<Path>,
) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    fs::write(path, config.to_json()).map_err(|source| ScenarioError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// How request arrival times are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalModel {
    /// Everything arrives at time zero, in a random global interleaving.
    BatchAtZero,
    /// Arrival times uniform over `[0, horizon)`.
    UniformHorizon(Time),
}

impl ArrivalModel {
    pub fn label(&self) -> String {
        match self {
            ArrivalModel::BatchAtZero => "batch_at_zero".to_string(),
            ArrivalModel::UniformHorizon(h) => format!("uniform_horizon({h})"),
        }
    }
}

/// Expands a scenario into its arrival stream.
///
/// Every `counts[node][service]` cell yields that many requests. The stream is
/// shuffled, then stably sorted by arrival time, so simultaneous arrivals come
/// in a seeded random order. Ids are assigned in stream order.
pub fn generate_requests<R: Rng + ?Sized>(
    scenario: &ScenarioConfig,
    arrival: ArrivalModel,
    rng: &mut R,
) -> Vec<Request> {
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(scenario.total_requests() as usize);
    for (node, row) in scenario.counts.iter().enumerate() {
        for (service, &count) in row.iter().enumerate() {
            cells.extend(std::iter::repeat_n((node, service), count as usize));
        }
    }
    cells.shuffle(rng);

    let mut timed: Vec<(Time, usize, usize)> = cells
        .into_iter()
        .map(|(node, service)| {
            let t = match arrival {
                ArrivalModel::BatchAtZero => 0,
                ArrivalModel::UniformHorizon(h) => rng.gen_range(0..h.max(1)),
            };
            (t, node, service)
        })
        .collect();
    timed.sort_by_key(|&(t, _, _)| t);

    timed
        .into_iter()
        .enumerate()
        .map(|(i, (t, node, service))| {
            let spec = &scenario.services[service];
            Request::new(
                RequestId(i as u64),
                service,
                NodeId(node),
                t,
                spec.process_time,
                spec.deadline,
            )
        })
        .collect()
}
