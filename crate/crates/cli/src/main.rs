use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use platoon_core::acceptance;
use platoon_core::engine::{run, RunOutput};
use platoon_core::scenario::ScenarioSpec;

#[derive(Parser)]
#[command(name = "platoon-sim", version, about = "Deterministic simulator for cooperative vehicle platoons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace.csv, report.txt and events.log.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_degradation: bool,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        halt_on_collision: bool,
    },
    /// Run a fault scenario with and without degradation and compare.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance scenarios and print a pass/fail table.
    Accept,
}

const EXIT_COLLISION: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            no_degradation,
            dt,
            duration,
            halt_on_collision,
        } => cmd_run(&scenario, &out, no_degradation, dt, duration, halt_on_collision),
        Command::Compare { scenario, out } => cmd_compare(&scenario, &out),
        Command::Accept => Ok(cmd_accept()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &Path) -> Result<ScenarioSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ScenarioSpec::from_toml(&text)?)
}

fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("trace.csv"), out.trace.to_csv())?;
    fs::write(dir.join("report.txt"), out.report.to_toml())?;
    fs::write(dir.join("events.log"), out.events_log())?;
    Ok(())
}

fn cmd_run(
    path: &Path,
    dir: &Path,
    no_degradation: bool,
    dt: Option<f64>,
    duration: Option<f64>,
    halt: bool,
) -> Result<ExitCode> {
    let mut spec = load(path)?;
    if no_degradation {
        spec.modes.degradation_enabled = false;
    }
    if let Some(dt) = dt {
        spec.run.dt = dt;
    }
    if let Some(d) = duration {
        spec.run.duration = d;
    }
    spec.run.halt_on_collision |= halt;
    let out = run(&spec)?;
    write_outputs(&out, dir)?;
    let r = &out.report;
    println!(
        "{} ticks, {} completions, {} takeovers, {} collisions",
        r.summary.ticks,
        r.completions.len(),
        r.takeovers.len(),
        r.collisions.len()
    );
    for c in &r.collisions {
        println!("collision {} / {} at {:.2} s", c.a, c.b, c.time);
    }
    Ok(if out.collided() {
        ExitCode::from(EXIT_COLLISION)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_compare(path: &Path, dir: &Path) -> Result<ExitCode> {
    let spec = load(path)?;
    if !spec.has_fault() {
        bail!("NoFault: {} injects no fault, nothing to compare", path.display());
    }
    let mut off = spec.clone();
    off.modes.degradation_enabled = false;
    let (with, without) = std::thread::scope(|s| {
        let a = s.spawn(|| run(&spec));
        let b = s.spawn(|| run(&off));
        (a.join().expect("run thread"), b.join().expect("run thread"))
    });
    let (with, without) = (with?, without?);
    write_outputs(&with, &dir.join("degradation_on"))?;
    write_outputs(&without, &dir.join("degradation_off"))?;
    let summary = acceptance::compare_summary(&with.report, &without.report);
    fs::write(dir.join("comparison.txt"), &summary)?;
    print!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_accept() -> ExitCode {
    let results = acceptance::run_all();
    let mut all = true;
    for r in &results {
        println!("{r}");
        all &= r.passed;
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
