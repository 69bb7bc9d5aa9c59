//! Command-line front end: run scenario files or embedded presets, inspect
//! graph files, and exercise the randomized property oracles.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use heatnet::dynamics::RunOutcome;
use heatnet::experiments::{
    emit_plots, load_scenario, parse_scenario, preset, run, write_outputs, RunRecord,
    PRESET_NAMES,
};
use heatnet::graph::{laplacian, spectrum, Topology};
use heatnet::verify;

#[derive(Parser)]
#[command(
    name = "sim",
    about = "Simulation and verification engine for networks of boundary-controlled heat-equation agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its artifacts.
    Run {
        /// Path to a scenario TOML file.
        scenario: PathBuf,
        /// Output directory (default: ./out/<scenario-name>, overridable
        /// via the SIM_OUT environment variable).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit nonzero unless every verdict passes.
        #[arg(long)]
        assert: bool,
        /// Run even when the timestep violates the stability limit.
        #[arg(long)]
        allow_unstable: bool,
        /// Override the disturbance seed (seeded scenarios only).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one of the embedded reference scenarios (test1, test2, test3).
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        assert: bool,
        #[arg(long)]
        allow_unstable: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse a graph file and print its Laplacian spectrum.
    CheckGraph { file: PathBuf },
    /// Run the randomized property oracles.
    Verify {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> Result<bool> {
    match Cli::parse().command {
        Command::Run {
            scenario,
            out,
            assert,
            allow_unstable,
            seed,
        } => {
            let mut sc = load_scenario(&scenario, seed)?;
            sc.allow_unstable |= allow_unstable;
            execute(sc, out, assert)
        }
        Command::Preset {
            name,
            out,
            assert,
            allow_unstable,
            seed,
        } => {
            let text = preset(&name).ok_or_else(|| {
                anyhow!("unknown preset `{name}` (available: {})", PRESET_NAMES.join(", "))
            })?;
            let mut sc = parse_scenario(text, &name, None, seed)?;
            sc.allow_unstable |= allow_unstable;
            execute(sc, out, assert)
        }
        Command::CheckGraph { file } => {
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("cannot read {}", file.display()))?;
            let topo = Topology::from_graph_file(&text)?;
            let lap = laplacian(&topo);
            let spec = spectrum(&lap)?;
            println!(
                "agents: {}  edges: {}",
                topo.agent_count(),
                topo.edges().len()
            );
            println!("degrees: {:?}", topo.degrees());
            let eigs: Vec<String> = spec
                .eigenvalues()
                .iter()
                .map(|e| format!("{e:.9}"))
                .collect();
            println!("spectrum: [{}]", eigs.join(", "));
            println!("lambda2 = {:.9}", spec.lambda2());
            println!("lambda_n = {:.9}", spec.lambda_n());
            Ok(true)
        }
        Command::Verify { seed, cases } => {
            let results = verify::run_all(seed, cases);
            let mut all = true;
            for r in &results {
                println!(
                    "{} {} ({})",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
                all &= r.pass;
            }
            Ok(all)
        }
    }
}

fn execute(
    scenario: heatnet::experiments::Scenario,
    out: Option<PathBuf>,
    assert: bool,
) -> Result<bool> {
    let record = run(&scenario)?;
    let dir = output_dir(out, &record);
    write_outputs(&record, &dir)?;
    emit_plots(&record, &dir)?;
    report(&record, &dir);
    Ok(!assert || record.all_pass())
}

fn output_dir(cli: Option<PathBuf>, record: &RunRecord) -> PathBuf {
    if let Some(dir) = cli {
        return dir;
    }
    let base = std::env::var_os("SIM_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new("out").to_path_buf());
    base.join(&record.scenario.name)
}

fn report(record: &RunRecord, dir: &Path) {
    println!("scenario: {}", record.scenario.name);
    println!(
        "lambda2 = {:.7}, lambda_n = {:.7}, q* = {:.7}",
        record.spectrum.lambda2(),
        record.spectrum.lambda_n(),
        record.target.q_star
    );
    if let Some(report) = &record.gains_report {
        println!(
            "gains: {}",
            if report.compliant() {
                "compliant".to_string()
            } else {
                format!("NON-COMPLIANT ({})", report.failures().join(", "))
            }
        );
    }
    if let Some(c) = &record.certificate {
        println!(
            "certificate: kappa_R = {:.4e}, rho_R = {:.4e}",
            c.kappa_r, c.rho_r
        );
    }
    if !record.data.ics_compatible {
        println!(
            "warning: initial conditions incompatible with the boundary conditions (residual {:.3e})",
            record.data.compatibility_residual
        );
    }
    match record.data.outcome {
        RunOutcome::Completed => println!("outcome: completed"),
        RunOutcome::Blowup { time } => println!("outcome: blowup at t = {time:.6}"),
    }
    println!("trend: {}", record.monitor.trend);
    for v in &record.verdicts {
        println!(
            "{} {} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    println!("artifacts: {}", dir.display());
}
