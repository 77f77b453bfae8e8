// SPDX-License-Identifier: Apache-2.0

//! Benchmark reports: per-qubit rates with guide values, device medians,
//! and JSON/CSV serialisation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::{median, EstimateFlag, EstimatorMode, RateEstimate};
use crate::bench::ExtraDelay;
use crate::circuit::{DdScope, Encoding};
use crate::device::{BenchLine, DeviceCalibration};
use crate::noise::{guide_values, NoiseOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RateKind {
    #[serde(rename = "p_1to0")]
    P1to0,
    #[serde(rename = "p_0to1")]
    P0to1,
    /// Average of the two bit-flip directions.
    #[serde(rename = "p_01")]
    P01,
    #[serde(rename = "p_pm")]
    Ppm,
}

impl RateKind {
    pub const ALL: [RateKind; 4] = [RateKind::P1to0, RateKind::P0to1, RateKind::P01, RateKind::Ppm];

    pub fn as_str(self) -> &'static str {
        match self {
            RateKind::P1to0 => "p_1to0",
            RateKind::P0to1 => "p_0to1",
            RateKind::P01 => "p_01",
            RateKind::Ppm => "p_pm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub encoding: Encoding,
    pub kind: RateKind,
    /// Logical value of the run; `None` for averages over both.
    pub logical: Option<u8>,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub shots: usize,
    pub guide: f64,
    pub exposure_ns: f64,
    pub flags: Vec<EstimateFlag>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitReport {
    pub qubit: usize,
    /// `None` when no usable line is centred on this qubit.
    pub line: Option<BenchLine>,
    pub rates: Vec<RateEntry>,
    /// Ground-state population implied by the two bit-flip directions.
    pub p0_estimate: Option<f64>,
}

impl QubitReport {
    /// The entry to quote for `kind`: the average over logical values when
    /// present, otherwise the only entry of that kind.
    pub fn headline(&self, kind: RateKind) -> Option<&RateEntry> {
        let mut of_kind = self.rates.iter().filter(|r| r.kind == kind);
        let all: Vec<_> = of_kind.by_ref().collect();
        all.iter()
            .find(|r| r.logical.is_none())
            .or_else(|| if all.len() == 1 { all.first() } else { None })
            .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MedianEntry {
    pub estimate: Option<f64>,
    /// Median of the per-qubit standard errors.
    pub std_error: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Medians {
    pub p_1to0: MedianEntry,
    pub p_0to1: MedianEntry,
    pub p_01: MedianEntry,
    pub p_pm: MedianEntry,
}

impl Medians {
    pub fn get(&self, kind: RateKind) -> &MedianEntry {
        match kind {
            RateKind::P1to0 => &self.p_1to0,
            RateKind::P0to1 => &self.p_0to1,
            RateKind::P01 => &self.p_01,
            RateKind::Ppm => &self.p_pm,
        }
    }

    fn get_mut(&mut self, kind: RateKind) -> &mut MedianEntry {
        match kind {
            RateKind::P1to0 => &mut self.p_1to0,
            RateKind::P0to1 => &mut self.p_0to1,
            RateKind::P01 => &mut self.p_01,
            RateKind::Ppm => &mut self.p_pm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub shots: usize,
    pub rounds: usize,
    pub dd_scope: DdScope,
    pub extra_delay: ExtraDelay,
    pub inter_round_gap_ns: f64,
    pub encodings: Vec<Encoding>,
    pub logical_values: Vec<u8>,
    pub noise: NoiseOptions,
    pub estimator: EstimatorMode,
    pub bootstrap_resamples: usize,
    pub calibration: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub qubits: [usize; 2],
    pub cx_error: f64,
}

/// Enough of the calibration to draw device maps from a report alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSummary {
    pub name: Option<String>,
    pub qubit_count: usize,
    pub edges: Vec<EdgeSummary>,
    pub layout: Option<Vec<[f64; 2]>>,
}

impl DeviceSummary {
    pub fn from_calibration(cal: &DeviceCalibration) -> Self {
        Self {
            name: cal.name().map(str::to_owned),
            qubit_count: cal.qubit_count(),
            edges: cal
                .edges()
                .map(|((a, b), g)| EdgeSummary {
                    qubits: [a, b],
                    cx_error: g.error,
                })
                .collect(),
            layout: cal.layout().map(<[_]>::to_vec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub meta: RunMeta,
    pub device: DeviceSummary,
    pub qubits: Vec<QubitReport>,
    pub medians: Medians,
    pub warnings: Vec<String>,
}

/// Outcome of one circuit (one encoding and logical value) on one qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitRun {
    pub encoding: Encoding,
    pub logical: u8,
    /// Whether the code qubits were decoupled.
    pub dd: bool,
    pub exposure_ns: f64,
    pub shots: usize,
    pub estimate: Result<RateEstimate, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitRuns {
    pub qubit: usize,
    pub line: Option<BenchLine>,
    pub runs: Vec<CircuitRun>,
}

fn run_kind(encoding: Encoding, logical: u8) -> RateKind {
    match (encoding, logical) {
        (Encoding::BitFlip, 0) => RateKind::P0to1,
        (Encoding::BitFlip, _) => RateKind::P1to0,
        (Encoding::PhaseFlip, _) => RateKind::Ppm,
    }
}

fn entry_for(cal: &DeviceCalibration, qubit: usize, run: &CircuitRun) -> RateEntry {
    let kind = run_kind(run.encoding, run.logical);
    let g = guide_values(cal, qubit, run.exposure_ns, run.dd);
    let guide = match kind {
        RateKind::P0to1 => g.p_0to1,
        RateKind::P1to0 => g.p_1to0,
        RateKind::P01 => g.p_01,
        RateKind::Ppm => g.p_pm,
    };
    let (estimate, std_error, flags, error) = match &run.estimate {
        Ok(e) => (Some(e.estimate), Some(e.std_error), e.flags.clone(), None),
        Err(msg) => (None, None, vec![EstimateFlag::Degenerate], Some(msg.clone())),
    };
    RateEntry {
        encoding: run.encoding,
        kind,
        logical: Some(run.logical),
        estimate,
        std_error,
        shots: run.shots,
        guide,
        exposure_ns: run.exposure_ns,
        flags,
        error,
    }
}

/// Averages the logical-0 and logical-1 entries of one kind into one.
fn average(kind: RateKind, a: &RateEntry, b: &RateEntry, guide: f64) -> RateEntry {
    let both = |x: Option<f64>, y: Option<f64>| x.zip(y);
    let mut flags: Vec<EstimateFlag> = a.flags.iter().chain(&b.flags).copied().collect();
    flags.sort_by_key(|f| *f as u8);
    flags.dedup();
    RateEntry {
        encoding: a.encoding,
        kind,
        logical: None,
        estimate: both(a.estimate, b.estimate).map(|(x, y)| 0.5 * (x + y)),
        std_error: both(a.std_error, b.std_error).map(|(x, y)| 0.5 * x.hypot(y)),
        shots: a.shots + b.shots,
        guide,
        exposure_ns: 0.5 * (a.exposure_ns + b.exposure_ns),
        flags,
        error: None,
    }
}

/// Assembles per-qubit entries with guide values and device medians.
pub fn aggregate_device(cal: &DeviceCalibration, meta: RunMeta, runs: Vec<QubitRuns>) -> BenchmarkReport {
    let mut warnings: Vec<String> = cal.warnings().to_vec();
    let mut qubits = Vec::with_capacity(runs.len());
    for qr in runs {
        let mut rates: Vec<RateEntry> = qr.runs.iter().map(|r| entry_for(cal, qr.qubit, r)).collect();
        for (run, entry) in qr.runs.iter().zip(&rates) {
            if let Some(err) = &entry.error {
                warnings.push(format!(
                    "qubit {} {} logical {}: {err}",
                    qr.qubit,
                    run.encoding.as_str(),
                    run.logical
                ));
            }
        }
        let find = |enc: Encoding, l: u8| qr.runs.iter().position(|r| r.encoding == enc && r.logical == l);
        let mut p0_estimate = None;
        if let (Some(i0), Some(i1)) = (find(Encoding::BitFlip, 0), find(Encoding::BitFlip, 1)) {
            let g = |i: usize| guide_values(cal, qr.qubit, qr.runs[i].exposure_ns, qr.runs[i].dd).p_01;
            let avg = average(RateKind::P01, &rates[i0], &rates[i1], 0.5 * (g(i0) + g(i1)));
            let decoupled = qr.runs[i0].dd || qr.runs[i1].dd;
            if let (Some(up), Some(down), false) = (rates[i0].estimate, rates[i1].estimate, decoupled) {
                if up + down > 0.0 {
                    p0_estimate = Some(down / (up + down));
                }
            }
            rates.push(avg);
        }
        if let (Some(i0), Some(i1)) = (find(Encoding::PhaseFlip, 0), find(Encoding::PhaseFlip, 1)) {
            let guide = 0.5 * (rates[i0].guide + rates[i1].guide);
            let avg = average(RateKind::Ppm, &rates[i0], &rates[i1], guide);
            rates.push(avg);
        }
        qubits.push(QubitReport {
            qubit: qr.qubit,
            line: qr.line,
            rates,
            p0_estimate,
        });
    }
    qubits.sort_by_key(|q| q.qubit);

    let mut medians = Medians::default();
    for kind in RateKind::ALL {
        let heads: Vec<&RateEntry> = qubits.iter().filter_map(|q| q.headline(kind)).collect();
        let est: Vec<f64> = heads.iter().filter_map(|e| e.estimate).collect();
        let se: Vec<f64> = heads.iter().filter_map(|e| e.std_error).collect();
        *medians.get_mut(kind) = MedianEntry {
            estimate: median(&est),
            std_error: median(&se),
            count: est.len(),
        };
    }

    BenchmarkReport {
        meta,
        device: DeviceSummary::from_calibration(cal),
        qubits,
        medians,
        warnings,
    }
}

impl BenchmarkReport {
    pub fn qubit(&self, q: usize) -> Option<&QubitReport> {
        self.qubits.iter().find(|r| r.qubit == q)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// One row per rate entry.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "qubit",
            "encoding",
            "rate_type",
            "estimate",
            "stderr",
            "guide",
            "exposure_ns",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for q in &self.qubits {
            for r in &q.rates {
                let rate_type = match (r.kind, r.logical) {
                    (RateKind::Ppm, Some(l)) => format!("p_pm_l{l}"),
                    (k, _) => k.as_str().to_owned(),
                };
                out.write_record([
                    q.qubit.to_string(),
                    r.encoding.as_str().to_owned(),
                    rate_type,
                    opt(r.estimate),
                    opt(r.std_error),
                    r.guide.to_string(),
                    r.exposure_ns.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
