// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use synbench::bench::{run_benchmark, write_outputs, BenchError, RunConfig};
use synbench::device::{plan_device, BenchLine, DeviceCalibration};
use synbench::par;
use synbench::render::{render_device_map, RenderMode};
use synbench::report::{BenchmarkReport, RateKind};

/// Repetition-code idle error benchmarks on simulated devices.
#[derive(Parser)]
#[command(name = "synbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Show the benchmark line chosen for every qubit.
    Plan {
        #[arg(long)]
        cal: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Simulate the benchmark and write report, CSV and device maps.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Calibration file; overrides the one named in the config.
        #[arg(long)]
        cal: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        shots: Option<usize>,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a device map from a report.
    Render {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum)]
        mode: RenderMode,
        /// Write here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: 1, message }
}

fn load_cal(path: &Path) -> Result<DeviceCalibration, Failure> {
    let cal = DeviceCalibration::from_path(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    for w in cal.warnings() {
        log::warn!("{w}");
    }
    Ok(cal)
}

fn plan(cal: &Path, json: bool) -> Result<(), Failure> {
    let cal = load_cal(cal)?;
    let plan = plan_device(&cal);
    // Write errors (a closed pipe) end the listing quietly.
    let _ = write_plan(&mut io::stdout().lock(), &plan, json);
    Ok(())
}

fn write_plan(out: &mut impl Write, plan: &BTreeMap<usize, Option<BenchLine>>, json: bool) -> io::Result<()> {
    if json {
        let text = serde_json::to_string_pretty(plan).expect("plan serialises");
        return writeln!(out, "{text}");
    }
    writeln!(
        out,
        "{:>5}  {:<24} {:>10} {:>10}",
        "qubit", "line", "cx_centre", "cx_line"
    )?;
    for (q, line) in plan {
        match line {
            Some(l) => writeln!(
                out,
                "{q:>5}  {:<24} {:>10.4} {:>10.4}",
                format!("{:?}", l.qubits),
                l.max_cx_center,
                l.max_cx_all
            )?,
            None => writeln!(out, "{q:>5}  {:<24} {:>10} {:>10}", "-", "-", "-")?,
        }
    }
    Ok(())
}

fn run(
    config: Option<PathBuf>,
    cal: Option<PathBuf>,
    seed: Option<u64>,
    shots: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut cfg = match &config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(cal) = cal {
        cfg.calibration = Some(cal);
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(shots) = shots {
        cfg.shots = shots;
    }
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let cal_path = cfg
        .calibration
        .clone()
        .ok_or_else(|| config_error("no calibration given (use --cal or the config's \"calibration\")".into()))?;
    let cal = load_cal(&cal_path)?;
    let output = par::with_workers(par::workers_from_env(), || run_benchmark(&cfg, &cal))?;
    let files = write_outputs(&output, &cfg.output_dir, cfg.gzip_shots)?;
    for w in &output.report.warnings {
        log::warn!("{w}");
    }
    let m = &output.report.medians;
    for kind in RateKind::ALL {
        let e = m.get(kind);
        if let Some(v) = e.estimate {
            println!("median {:<7} {:>7.3}%  (n = {})", kind.as_str(), 100.0 * v, e.count);
        }
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn render(report: &Path, mode: RenderMode, output: Option<PathBuf>) -> Result<(), Failure> {
    let text = fs::read_to_string(report).map_err(|e| config_error(format!("{}: {e}", report.display())))?;
    let report = BenchmarkReport::from_json(&text).map_err(|e| config_error(format!("{}: {e}", report.display())))?;
    let svg = render_device_map(&report, mode);
    match output {
        Some(path) => fs::write(&path, svg).map_err(|e| Failure {
            code: 2,
            message: format!("{}: {e}", path.display()),
        }),
        None => {
            print!("{svg}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Plan { cal, json } => plan(&cal, json),
        Command::Run {
            config,
            cal,
            seed,
            shots,
            out,
        } => run(config, cal, seed, shots, out),
        Command::Render { report, mode, output } => render(&report, mode, output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
