// SPDX-License-Identifier: Apache-2.0

//! Whole-device benchmark runs.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{detection_events, extract_idle_rate, EstimatorMode, EstimatorOptions};
use crate::circuit::{build_repetition_circuit, ps_to_ns, Circuit, DdScope, Encoding, RepetitionSpec};
use crate::device::{plan_device, BenchLine, CalibrationError, DeviceCalibration};
use crate::noise::{NoiseError, NoiseModel, NoiseOptions};
use crate::render::{render_device_map, RenderMode};
use crate::report::{aggregate_device, BenchmarkReport, CircuitRun, QubitRuns, RunMeta};
use crate::sim::{compile, ShotTable, SimError};
use crate::{par, rng};

/// Idle time added after every syndrome round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtraDelay {
    None,
    /// Fraction of the centre qubit's T1 (bit flip) or T2 (phase flip).
    Fraction(f64),
}

impl ExtraDelay {
    fn duration_ns(self, reference_ns: f64) -> f64 {
        match self {
            ExtraDelay::None => 0.0,
            ExtraDelay::Fraction(f) => f * reference_ns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub calibration: Option<PathBuf>,
    pub shots: usize,
    pub seed: u64,
    pub rounds: usize,
    pub encodings: Vec<Encoding>,
    pub logical_values: Vec<u8>,
    pub dd_scope: DdScope,
    pub extra_delay: ExtraDelay,
    pub inter_round_gap_ns: f64,
    pub reset_ns: Option<f64>,
    pub noise: NoiseOptions,
    pub estimator: EstimatorMode,
    pub bootstrap_resamples: usize,
    /// Restrict the run to these centre qubits.
    pub qubits: Option<Vec<usize>>,
    pub output_dir: PathBuf,
    pub dump_shots: bool,
    pub gzip_shots: bool,
    pub dump_circuits: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            calibration: None,
            shots: 10_000,
            seed: 0,
            rounds: 2,
            encodings: vec![Encoding::BitFlip, Encoding::PhaseFlip],
            logical_values: vec![0, 1],
            dd_scope: DdScope::CodeOnly,
            extra_delay: ExtraDelay::Fraction(0.125),
            inter_round_gap_ns: 0.0,
            reset_ns: None,
            noise: NoiseOptions::default(),
            estimator: EstimatorMode::Exact,
            bootstrap_resamples: 200,
            qubits: None,
            output_dir: PathBuf::from("synbench-out"),
            dump_shots: false,
            gzip_shots: false,
            dump_circuits: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("calibration: {0}")]
    Calibration(#[from] CalibrationError),
    #[error("noise options: {0}")]
    Noise(#[from] NoiseError),
    #[error("no qubit on this device can be benchmarked")]
    NoBenchmarkableQubits,
    #[error("qubit {qubit}: {source}")]
    Simulation { qubit: usize, source: SimError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl BenchError {
    /// 1 for bad inputs, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Calibration(_) | BenchError::Noise(_) => 1,
            _ => 2,
        }
    }

    fn io(path: &Path) -> impl FnOnce(io::Error) -> BenchError + '_ {
        move |source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self, BenchError> {
        serde_json::from_str(s).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        // Relative calibration paths are relative to the config file.
        if let (Some(cal), Some(dir)) = (&cfg.calibration, path.parent()) {
            if cal.is_relative() && !dir.as_os_str().is_empty() {
                cfg.calibration = Some(dir.join(cal));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.shots == 0 {
            return bad("shots must be positive".into());
        }
        if self.rounds < 2 {
            return bad(format!("at least 2 rounds are required, got {}", self.rounds));
        }
        if self.encodings.is_empty() || self.logical_values.is_empty() {
            return bad("encodings and logical_values must be non-empty".into());
        }
        if let Some(v) = self.logical_values.iter().find(|&&v| v > 1) {
            return bad(format!("logical values must be 0 or 1, got {v}"));
        }
        if let ExtraDelay::Fraction(f) = self.extra_delay {
            if !(f.is_finite() && f >= 0.0) {
                return bad(format!("extra_delay fraction must be non-negative, got {f}"));
            }
        }
        if !(self.inter_round_gap_ns.is_finite() && self.inter_round_gap_ns >= 0.0) {
            return bad(format!(
                "inter_round_gap_ns must be non-negative, got {}",
                self.inter_round_gap_ns
            ));
        }
        if let Some(r) = self.reset_ns {
            if !(r.is_finite() && r >= 0.0) {
                return bad(format!("reset_ns must be non-negative, got {r}"));
            }
        }
        Ok(())
    }

    fn meta(&self) -> RunMeta {
        RunMeta {
            seed: self.seed,
            shots: self.shots,
            rounds: self.rounds,
            dd_scope: self.dd_scope,
            extra_delay: self.extra_delay,
            inter_round_gap_ns: self.inter_round_gap_ns,
            encodings: self.encodings.clone(),
            logical_values: self.logical_values.clone(),
            noise: self.noise.clone(),
            estimator: self.estimator,
            bootstrap_resamples: self.bootstrap_resamples,
            calibration: self.calibration.as_ref().map(|p| p.display().to_string()),
        }
    }

    /// The circuit for one centre line, encoding and logical value.
    pub fn circuit(
        &self,
        cal: &DeviceCalibration,
        line: &BenchLine,
        encoding: Encoding,
        logical: u8,
    ) -> Result<Circuit, String> {
        let centre = cal.qubit(line.center());
        let reference = match encoding {
            Encoding::BitFlip => centre.t1_ns,
            Encoding::PhaseFlip => centre.t2_ns,
        };
        let spec = RepetitionSpec {
            encoding,
            logical,
            rounds: self.rounds,
            extra_delay_ns: self.extra_delay.duration_ns(reference),
            dd_scope: self.dd_scope,
            inter_round_gap_ns: self.inter_round_gap_ns,
            reset_ns: self.reset_ns,
        };
        build_repetition_circuit(line, cal, &spec).map_err(|e| e.to_string())
    }
}

/// Raw measurement records of one circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotDump {
    pub qubit: usize,
    pub encoding: Encoding,
    pub logical: u8,
    pub shots: ShotTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub report: BenchmarkReport,
    pub shot_dumps: Vec<ShotDump>,
    pub circuit_dumps: Vec<(String, String)>,
}

fn encoding_tag(e: Encoding) -> u64 {
    match e {
        Encoding::BitFlip => 0,
        Encoding::PhaseFlip => 1,
    }
}

fn artifact_name(qubit: usize, encoding: Encoding, logical: u8) -> String {
    format!("q{qubit}_{}_l{logical}", encoding.as_str())
}

/// Runs every configured circuit on every benchmarkable qubit of `cal`.
pub fn run_benchmark(config: &RunConfig, cal: &DeviceCalibration) -> Result<BenchOutput, BenchError> {
    config.validate()?;
    let noise = NoiseModel::compile(cal, &config.noise)?;
    let mut plan = plan_device(cal);
    if let Some(keep) = &config.qubits {
        if let Some(q) = keep.iter().find(|&&q| q >= cal.qubit_count()) {
            return Err(BenchError::Config(format!("qubit {q} is not on the device")));
        }
        plan.retain(|q, _| keep.contains(q));
    }
    let lines: Vec<(usize, BenchLine)> = plan.iter().filter_map(|(&q, l)| l.clone().map(|l| (q, l))).collect();
    if lines.is_empty() {
        return Err(BenchError::NoBenchmarkableQubits);
    }

    let mut jobs = Vec::new();
    for (qi, _) in lines.iter().enumerate() {
        for &enc in &config.encodings {
            for &logical in &config.logical_values {
                jobs.push((qi, enc, logical));
            }
        }
    }
    struct JobOut {
        run: CircuitRun,
        shots: Option<ShotTable>,
        dump: Option<String>,
    }
    let outputs = par::map_indexed(jobs.len(), |k| -> Result<JobOut, BenchError> {
        let (qi, encoding, logical) = jobs[k];
        let (qubit, line) = &lines[qi];
        let mut run = CircuitRun {
            encoding,
            logical,
            dd: config.dd_scope.decouples_code(),
            exposure_ns: 0.0,
            shots: config.shots,
            estimate: Err(String::new()),
        };
        let circuit = match config.circuit(cal, line, encoding, logical) {
            Ok(c) => c,
            Err(msg) => {
                run.estimate = Err(msg);
                return Ok(JobOut {
                    run,
                    shots: None,
                    dump: None,
                });
            }
        };
        run.exposure_ns = ps_to_ns(circuit.idle_exposure(*qubit).expect("centre")[0]);
        let tags = [*qubit as u64, encoding_tag(encoding), u64::from(logical)];
        let program = compile(&circuit, &noise).map_err(|source| BenchError::Simulation { qubit: *qubit, source })?;
        let shots = program.run(
            config.shots,
            rng::derive_seed(config.seed, &[tags[0], tags[1], tags[2], 0]),
        );
        let opts = EstimatorOptions {
            mode: config.estimator,
            resamples: config.bootstrap_resamples,
            seed: rng::derive_seed(config.seed, &[tags[0], tags[1], tags[2], 1]),
        };
        run.estimate = detection_events(&circuit, &shots)
            .and_then(|dm| extract_idle_rate(&circuit, &dm, 2, &opts))
            .map_err(|e| e.to_string());
        Ok(JobOut {
            run,
            shots: config.dump_shots.then_some(shots),
            dump: config.dump_circuits.then(|| circuit.dump()),
        })
    });

    let mut per_qubit: Vec<QubitRuns> = plan
        .iter()
        .map(|(&qubit, line)| QubitRuns {
            qubit,
            line: line.clone(),
            runs: Vec::new(),
        })
        .collect();
    let mut shot_dumps = Vec::new();
    let mut circuit_dumps = Vec::new();
    for ((qi, encoding, logical), out) in jobs.into_iter().zip(outputs) {
        let out = out?;
        let qubit = lines[qi].0;
        if let Some(shots) = out.shots {
            shot_dumps.push(ShotDump {
                qubit,
                encoding,
                logical,
                shots,
            });
        }
        if let Some(text) = out.dump {
            circuit_dumps.push((artifact_name(qubit, encoding, logical), text));
        }
        per_qubit
            .iter_mut()
            .find(|q| q.qubit == qubit)
            .expect("planned qubit")
            .runs
            .push(out.run);
    }
    Ok(BenchOutput {
        report: aggregate_device(cal, config.meta(), per_qubit),
        shot_dumps,
        circuit_dumps,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), BenchError> {
    fs::write(path, bytes).map_err(BenchError::io(path))
}

/// Writes the report, CSV, device maps and optional dumps into `dir`.
/// Returns the paths written.
pub fn write_outputs(output: &BenchOutput, dir: &Path, gzip_shots: bool) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
    let mut written = Vec::new();
    let report = &output.report;

    let path = dir.join("report.json");
    write_file(&path, report.to_json().as_bytes())?;
    written.push(path);

    let path = dir.join("rates.csv");
    let mut csv = Vec::new();
    report
        .write_csv(&mut csv)
        .map_err(|e| BenchError::io(&path)(io::Error::other(e)))?;
    write_file(&path, &csv)?;
    written.push(path);

    for (mode, name) in [
        (RenderMode::Rates, "rates.svg"),
        (RenderMode::Calibration, "calibration.svg"),
    ] {
        let path = dir.join(name);
        write_file(&path, render_device_map(report, mode).as_bytes())?;
        written.push(path);
    }

    if !output.circuit_dumps.is_empty() {
        let sub = dir.join("circuits");
        fs::create_dir_all(&sub).map_err(BenchError::io(&sub))?;
        for (name, text) in &output.circuit_dumps {
            let path = sub.join(format!("{name}.txt"));
            write_file(&path, text.as_bytes())?;
            written.push(path);
        }
    }

    if !output.shot_dumps.is_empty() {
        let sub = dir.join("shots");
        fs::create_dir_all(&sub).map_err(BenchError::io(&sub))?;
        for d in &output.shot_dumps {
            let name = artifact_name(d.qubit, d.encoding, d.logical);
            let path = sub.join(if gzip_shots {
                format!("{name}.txt.gz")
            } else {
                format!("{name}.txt")
            });
            let file = File::create(&path).map_err(BenchError::io(&path))?;
            let res = if gzip_shots {
                let mut gz = GzEncoder::new(BufWriter::new(file), Compression::default());
                d.shots
                    .write_text(&mut gz)
                    .and_then(|_| gz.finish())
                    .and_then(|mut w| w.flush())
            } else {
                d.shots.write_text(BufWriter::new(file))
            };
            res.map_err(BenchError::io(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}
