//! Scenario files: TOML schema, parsing and resolution into a fully
//! specified simulation.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::analysis::Trend;
use crate::disturbance::{DisturbanceError, DisturbanceKind, DisturbanceSpec};
use crate::dynamics::{PlantParams, Protocol, SimConfig};
use crate::field::{AgentField, FieldError, Grid};
use crate::graph::{GraphError, Topology};
use crate::protocols::SlidingGains;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Disturbance(#[from] DisturbanceError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    topology: TopologySection,
    grid: GridSection,
    plant: PlantSection,
    protocol: ProtocolSection,
    #[serde(default)]
    disturbance: Option<DisturbanceSection>,
    ics: IcsSection,
    sim: SimSection,
    #[serde(default)]
    expect: Option<ExpectSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    agents: Option<usize>,
    edges: Option<Vec<(usize, usize)>>,
    /// Alternative to inline agents/edges: a graph file (first line is the
    /// agent count, each further line one `i j` edge, 1-based), resolved
    /// relative to the scenario file.
    file: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    nodes: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantSection {
    diffusivity: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolSection {
    kind: String,
    a: Option<f64>,
    b: Option<f64>,
    w1: Option<f64>,
    w2: Option<f64>,
    w3: Option<f64>,
    #[serde(default)]
    dead_band: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisturbanceSection {
    kind: DisturbanceKind,
    k: Option<Vec<f64>>,
    alpha: Option<Vec<f64>>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IcsSection {
    family: String,
    constants: Option<Vec<f64>>,
    amplitudes: Option<Vec<f64>>,
    /// Spatial frequencies as multiples of pi.
    frequencies: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    dt: f64,
    t_end: f64,
    #[serde(default = "default_stride")]
    record_stride: usize,
    snapshot_times: Option<Vec<f64>>,
    #[serde(default)]
    allow_unstable: bool,
    #[serde(default)]
    strict_compatibility: bool,
    surface_stride: Option<usize>,
}

fn default_stride() -> usize {
    100
}

/// Expected run outcome, asserted when requested.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExpectSection {
    pub trend: Option<Trend>,
    /// Final right-boundary traces within this distance of the average
    /// target (linear runs).
    pub consensus_tol: Option<f64>,
    /// Final disagreement norm at most this fraction of its running peak.
    pub d1_final_frac: Option<f64>,
}

/// A fully resolved scenario, ready to simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub topology: Topology,
    pub grid: Grid,
    pub params: PlantParams,
    pub protocol: Protocol,
    pub disturbance: DisturbanceSpec,
    pub initial: AgentField,
    pub config: SimConfig,
    pub snapshot_times: Vec<f64>,
    pub surface_stride: usize,
    pub allow_unstable: bool,
    pub strict_compatibility: bool,
    pub expect: Option<ExpectSection>,
}

/// Parses a scenario file and resolves every derived quantity.
///
/// `seed_override` replaces the disturbance seed (spec'd for seeded draws
/// only; it is an error to combine it with explicit coefficients).
pub fn load_scenario(path: &Path, seed_override: Option<u64>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let default_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    parse_scenario(&text, &default_name, path.parent(), seed_override)
}

/// Parses scenario text (used for both files and embedded presets).
pub fn parse_scenario(
    text: &str,
    default_name: &str,
    base_dir: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text)?;
    let name = file.name.unwrap_or_else(|| default_name.to_string());

    let topology = match (&file.topology.file, &file.topology.agents, &file.topology.edges) {
        (Some(rel), None, None) => {
            let path = match base_dir {
                Some(dir) => dir.join(rel),
                None => Path::new(rel).to_path_buf(),
            };
            let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Topology::from_graph_file(&text)?
        }
        (None, Some(agents), Some(edges)) => Topology::new(*agents, edges)?,
        _ => {
            return Err(invalid(
                "topology needs either `file` or both `agents` and `edges`",
            ))
        }
    };
    let n = topology.agent_count();

    let grid = Grid::new(file.grid.nodes)?;
    if file.plant.diffusivity <= 0.0 {
        return Err(invalid("plant.diffusivity must be positive"));
    }
    let params = PlantParams {
        diffusivity: file.plant.diffusivity,
    };

    let protocol = match file.protocol.kind.as_str() {
        "linear" => Protocol::Linear,
        "sliding" => {
            let need = |v: Option<f64>, name: &str| {
                v.ok_or_else(|| invalid(format!("protocol.{name} required for the sliding law")))
            };
            Protocol::Sliding {
                gains: SlidingGains {
                    a: need(file.protocol.a, "a")?,
                    b: need(file.protocol.b, "b")?,
                    w1: need(file.protocol.w1, "w1")?,
                    w2: need(file.protocol.w2, "w2")?,
                    w3: need(file.protocol.w3, "w3")?,
                },
                dead_band: file.protocol.dead_band,
            }
        }
        other => return Err(invalid(format!("unknown protocol kind `{other}`"))),
    };

    let disturbance = match file.disturbance {
        None => DisturbanceSpec::none(n),
        Some(d) => match d.kind {
            DisturbanceKind::None => DisturbanceSpec::none(n),
            kind => match (d.k, d.seed, seed_override) {
                (Some(_), _, Some(_)) => {
                    return Err(invalid(
                        "a seed override cannot replace explicit disturbance coefficients",
                    ))
                }
                (Some(k), None, None) => {
                    if k.len() != n {
                        return Err(invalid(format!(
                            "disturbance.k has {} entries for {n} agents",
                            k.len()
                        )));
                    }
                    if let Some(a) = &d.alpha {
                        if a.len() != n {
                            return Err(invalid(format!(
                                "disturbance.alpha has {} entries for {n} agents",
                                a.len()
                            )));
                        }
                    }
                    DisturbanceSpec::explicit(kind, k, d.alpha)?
                }
                (Some(_), Some(_), _) => {
                    return Err(invalid("disturbance: give either `k` or `seed`, not both"))
                }
                (None, seed, over) => {
                    let seed = over.or(seed).ok_or_else(|| {
                        invalid("disturbance needs explicit `k` or a `seed`")
                    })?;
                    DisturbanceSpec::from_seed(kind, n, seed)
                }
            },
        },
    };

    let initial = build_ics(&file.ics, grid, n)?;

    if file.sim.dt <= 0.0 || file.sim.t_end <= 0.0 {
        return Err(invalid("sim.dt and sim.t_end must be positive"));
    }
    if file.sim.record_stride == 0 {
        return Err(invalid("sim.record_stride must be at least 1"));
    }
    let config = SimConfig {
        dt: file.sim.dt,
        t_end: file.sim.t_end,
        record_stride: file.sim.record_stride,
    };
    let t = file.sim.t_end;
    let snapshot_times = file
        .sim
        .snapshot_times
        .unwrap_or_else(|| vec![0.0, 0.25 * t, 0.5 * t, 0.75 * t, t]);
    let surface_stride = file
        .sim
        .surface_stride
        .unwrap_or(file.sim.record_stride * 10);

    Ok(Scenario {
        name,
        topology,
        grid,
        params,
        protocol,
        disturbance,
        initial,
        config,
        snapshot_times,
        surface_stride: surface_stride.max(1),
        allow_unstable: file.sim.allow_unstable,
        strict_compatibility: file.sim.strict_compatibility,
        expect: file.expect,
    })
}

fn build_ics(ics: &IcsSection, grid: Grid, n: usize) -> Result<AgentField, ScenarioError> {
    use std::f64::consts::PI;
    match ics.family.as_str() {
        // reference heterogeneous profiles: c_i + w_i cos(3 pi s), with the
        // last of ten agents on the incompatible 2.5 pi mode
        "test1" => {
            if n != 10 {
                return Err(invalid("ics family `test1` is defined for 10 agents"));
            }
            let c = [10.0, 10.0, 8.0, 10.0, 6.0, 10.0, 10.0, -5.0, 10.0, 10.0];
            Ok(AgentField::sample_profile(grid, n, move |i, s| {
                let w = 1.0 + 4.0 * (i as f64 - 1.0) / 9.0;
                let freq = if i == 10 { 2.5 } else { 3.0 };
                c[i - 1] + w * (freq * PI * s).cos()
            }))
        }
        // common offset with linearly graded amplitudes on the 4 pi mode
        "test2" => {
            if n != 10 {
                return Err(invalid("ics family `test2` is defined for 10 agents"));
            }
            Ok(AgentField::sample_profile(grid, n, move |i, s| {
                10.0 + (i as f64 - 4.5) * (4.0 * PI * s).cos()
            }))
        }
        "custom" => {
            let get = |v: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>, ScenarioError> {
                let v = v
                    .clone()
                    .ok_or_else(|| invalid(format!("ics.{name} required for `custom`")))?;
                if v.len() != n {
                    return Err(invalid(format!(
                        "ics.{name} has {} entries for {n} agents",
                        v.len()
                    )));
                }
                Ok(v)
            };
            let c = get(&ics.constants, "constants")?;
            let a = get(&ics.amplitudes, "amplitudes")?;
            let f = get(&ics.frequencies, "frequencies")?;
            Ok(AgentField::sample_profile(grid, n, move |i, s| {
                c[i - 1] + a[i - 1] * (f[i - 1] * PI * s).cos()
            }))
        }
        other => Err(invalid(format!("unknown ics family `{other}`"))),
    }
}
