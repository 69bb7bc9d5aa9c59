//! Scenario configuration, the run driver with verdicts, and artifact
//! emission (CSV series, metadata, plot-ready data).

mod output;
mod runner;
mod scenario;

pub use output::{emit_plots, write_outputs};
pub use runner::{run, ExperimentError, RunRecord, Verdict};
pub use scenario::{load_scenario, parse_scenario, ExpectSection, Scenario, ScenarioError};

/// Embedded reference scenarios.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "test1" => Some(include_str!("../../../../presets/test1.toml")),
        "test2" => Some(include_str!("../../../../presets/test2.toml")),
        "test3" => Some(include_str!("../../../../presets/test3.toml")),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 3] = ["test1", "test2", "test3"];
