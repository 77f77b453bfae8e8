// SPDX-License-Identifier: Apache-2.0

//! Device coupling graph, calibration data, and benchmark-line selection.
//!
//! A qubit can be benchmarked when it sits at the centre of a simple path of
//! five qubits on the coupling graph. Among all such lines the one with the
//! best `cx` gates is chosen: first minimise the worst gate touching the
//! centre, then the worst gate anywhere on the line. Lines using any gate with
//! error above [`MAX_CX_ERROR`] are never used.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gates above this error rate are treated as broken.
pub const MAX_CX_ERROR: f64 = 0.5;

/// Default equilibrium ground-state population when a qubit omits `p0`.
pub const DEFAULT_P0: f64 = 1.0;
/// Default `T2*` as a fraction of `T2`.
pub const DEFAULT_T2_STAR_FRACTION: f64 = 0.5;
pub const DEFAULT_READOUT_ERROR: f64 = 0.01;
pub const DEFAULT_X_NS: f64 = 35.0;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("failed to read calibration: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed calibration JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{what} = {value} is not a probability in [0, 1]")]
    ProbabilityOutOfRange { what: String, value: f64 },
    #[error("{what} = {value} must be a positive duration")]
    NonPositiveDuration { what: String, value: f64 },
    #[error("qubit {qubit}: T2* = {t2_star_ns} ns exceeds T2 = {t2_ns} ns")]
    T2StarExceedsT2 { qubit: usize, t2_star_ns: f64, t2_ns: f64 },
    #[error("qubit ids must be exactly 0..{count} with no repeats (offending id {id})")]
    QubitIds { id: usize, count: usize },
    #[error("edge ({a}, {b}) references a qubit outside 0..{count}")]
    DanglingEdge { a: usize, b: usize, count: usize },
    #[error("edge ({0}, {0}) is a self-loop")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) is listed more than once")]
    DuplicateEdge(usize, usize),
    #[error("layout has {got} entries for {count} qubits")]
    LayoutSize { got: usize, count: usize },
    #[error("candidate lines do not share one centre ({0} vs {1})")]
    MixedCenters(usize, usize),
    #[error("line {0:?} is not a valid path on this device")]
    InvalidLine(Vec<usize>),
}

/// Per-qubit calibration. Times are in nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub t1_ns: f64,
    pub t2_ns: f64,
    pub t2_star_ns: f64,
    pub p0: f64,
    pub readout_error: f64,
    pub readout_ns: f64,
    pub x_ns: f64,
}

impl QubitCalibration {
    /// Calibration with the documented defaults for every optional field.
    pub fn new(t1_ns: f64, t2_ns: f64, readout_ns: f64) -> Self {
        Self {
            t1_ns,
            t2_ns,
            t2_star_ns: DEFAULT_T2_STAR_FRACTION * t2_ns,
            p0: DEFAULT_P0,
            readout_error: DEFAULT_READOUT_ERROR,
            readout_ns,
            x_ns: DEFAULT_X_NS,
        }
    }
}

/// A `cx` gate; error and duration are shared by both directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CxGate {
    pub error: f64,
    pub duration_ns: f64,
}

/// Validated device description. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceCalibration {
    name: Option<String>,
    qubits: Vec<QubitCalibration>,
    gates: BTreeMap<(usize, usize), CxGate>,
    adjacency: Vec<Vec<usize>>,
    layout: Option<Vec<[f64; 2]>>,
    warnings: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQubit {
    id: usize,
    t1_ns: f64,
    t2_ns: f64,
    t2_star_ns: Option<f64>,
    p0: Option<f64>,
    readout_error: Option<f64>,
    readout_ns: f64,
    x_ns: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGate {
    qubits: [usize; 2],
    error: f64,
    duration_ns: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCalibration {
    #[serde(default)]
    name: Option<String>,
    qubits: Vec<RawQubit>,
    #[serde(default)]
    cx_gates: Vec<RawGate>,
    #[serde(default)]
    layout: Option<Vec<[f64; 2]>>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn check_probability(what: impl FnOnce() -> String, value: f64) -> Result<(), CalibrationError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(CalibrationError::ProbabilityOutOfRange { what: what(), value })
    }
}

fn check_duration(what: impl FnOnce() -> String, value: f64) -> Result<(), CalibrationError> {
    // +inf is allowed: it models a channel that never fires.
    if value > 0.0 {
        Ok(())
    } else {
        Err(CalibrationError::NonPositiveDuration { what: what(), value })
    }
}

/// Reads and validates a calibration file (see the README for the schema).
pub fn load_calibration<R: Read>(source: R) -> Result<DeviceCalibration, CalibrationError> {
    let raw: RawCalibration = serde_json::from_reader(source)?;
    DeviceCalibration::from_raw(raw)
}

impl DeviceCalibration {
    pub fn from_json_str(json: &str) -> Result<Self, CalibrationError> {
        load_calibration(json.as_bytes())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, CalibrationError> {
        let file = std::fs::File::open(path)?;
        load_calibration(std::io::BufReader::new(file))
    }

    fn from_raw(raw: RawCalibration) -> Result<Self, CalibrationError> {
        let count = raw.qubits.len();
        let mut slots: Vec<Option<QubitCalibration>> = vec![None; count];
        for q in raw.qubits {
            if q.id >= count || slots[q.id].is_some() {
                return Err(CalibrationError::QubitIds { id: q.id, count });
            }
            let mut cal = QubitCalibration::new(q.t1_ns, q.t2_ns, q.readout_ns);
            if let Some(v) = q.t2_star_ns {
                cal.t2_star_ns = v;
            }
            if let Some(v) = q.p0 {
                cal.p0 = v;
            }
            if let Some(v) = q.readout_error {
                cal.readout_error = v;
            }
            if let Some(v) = q.x_ns {
                cal.x_ns = v;
            }
            slots[q.id] = Some(cal);
        }
        let qubits = slots.into_iter().flatten().collect();
        let gates = raw
            .cx_gates
            .into_iter()
            .map(|g| {
                (
                    (g.qubits[0], g.qubits[1]),
                    CxGate {
                        error: g.error,
                        duration_ns: g.duration_ns,
                    },
                )
            })
            .collect();
        let mut cal = Self::new(qubits, gates)?;
        cal.name = raw.name;
        if let Some(layout) = raw.layout {
            cal = cal.with_layout(layout)?;
        }
        Ok(cal)
    }

    /// Builds a calibration from parts, enforcing every invariant.
    pub fn new(qubits: Vec<QubitCalibration>, gates: Vec<((usize, usize), CxGate)>) -> Result<Self, CalibrationError> {
        let count = qubits.len();
        let mut warnings = Vec::new();
        for (i, q) in qubits.iter().enumerate() {
            check_duration(|| format!("qubit {i} t1_ns"), q.t1_ns)?;
            check_duration(|| format!("qubit {i} t2_ns"), q.t2_ns)?;
            check_duration(|| format!("qubit {i} t2_star_ns"), q.t2_star_ns)?;
            check_duration(|| format!("qubit {i} readout_ns"), q.readout_ns)?;
            check_duration(|| format!("qubit {i} x_ns"), q.x_ns)?;
            check_probability(|| format!("qubit {i} p0"), q.p0)?;
            check_probability(|| format!("qubit {i} readout_error"), q.readout_error)?;
            if q.t2_star_ns > q.t2_ns {
                return Err(CalibrationError::T2StarExceedsT2 {
                    qubit: i,
                    t2_star_ns: q.t2_star_ns,
                    t2_ns: q.t2_ns,
                });
            }
            if q.t2_ns > 2.0 * q.t1_ns {
                let msg = format!("qubit {i}: T2 = {} ns exceeds 2*T1 = {} ns", q.t2_ns, 2.0 * q.t1_ns);
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }

        let mut map = BTreeMap::new();
        let mut adjacency = vec![Vec::new(); count];
        for ((a, b), gate) in gates {
            if a >= count || b >= count {
                return Err(CalibrationError::DanglingEdge { a, b, count });
            }
            if a == b {
                return Err(CalibrationError::SelfLoop(a));
            }
            check_probability(|| format!("cx({a}, {b}) error"), gate.error)?;
            check_duration(|| format!("cx({a}, {b}) duration_ns"), gate.duration_ns)?;
            let key = edge_key(a, b);
            if map.insert(key, gate).is_some() {
                return Err(CalibrationError::DuplicateEdge(key.0, key.1));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for n in &mut adjacency {
            n.sort_unstable();
        }
        Ok(Self {
            name: None,
            qubits,
            gates: map,
            adjacency,
            layout: None,
            warnings,
        })
    }

    /// Attaches drawing coordinates, one `[x, y]` per qubit.
    pub fn with_layout(mut self, layout: Vec<[f64; 2]>) -> Result<Self, CalibrationError> {
        if layout.len() != self.qubits.len() {
            return Err(CalibrationError::LayoutSize {
                got: layout.len(),
                count: self.qubits.len(),
            });
        }
        self.layout = Some(layout);
        Ok(self)
    }

    /// Returns a copy with one gate's error replaced.
    pub fn with_cx_error(mut self, a: usize, b: usize, error: f64) -> Result<Self, CalibrationError> {
        check_probability(|| format!("cx({a}, {b}) error"), error)?;
        let count = self.qubits.len();
        let gate = self
            .gates
            .get_mut(&edge_key(a, b))
            .ok_or(CalibrationError::DanglingEdge { a, b, count })?;
        gate.error = error;
        Ok(self)
    }

    /// Returns a copy with every gate error set to `error`.
    pub fn with_uniform_cx_error(mut self, error: f64) -> Result<Self, CalibrationError> {
        check_probability(|| "uniform cx error".to_string(), error)?;
        for g in self.gates.values_mut() {
            g.error = error;
        }
        Ok(self)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn qubit_count(&self) -> usize {
        self.qubits.len()
    }

    pub fn qubit(&self, q: usize) -> &QubitCalibration {
        &self.qubits[q]
    }

    pub fn qubits(&self) -> &[QubitCalibration] {
        &self.qubits
    }

    /// Gate between `a` and `b` in either order.
    pub fn cx(&self, a: usize, b: usize) -> Option<&CxGate> {
        self.gates.get(&edge_key(a, b))
    }

    /// Edges as `(low, high)` pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), &CxGate)> + '_ {
        self.gates.iter().map(|(k, g)| (*k, g))
    }

    pub fn edge_count(&self) -> usize {
        self.gates.len()
    }

    /// Sorted neighbours of `q`.
    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn layout(&self) -> Option<&[[f64; 2]]> {
        self.layout.as_deref()
    }

    /// Non-fatal calibration findings (e.g. `T2 > 2*T1`).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Five qubits `(code, aux, code, aux, code)` along a path, in canonical
/// orientation (smaller endpoint first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchLine {
    pub qubits: [usize; 5],
    /// Worst `cx` error among the two gates touching the centre.
    pub max_cx_center: f64,
    /// Worst `cx` error on the whole line.
    pub max_cx_all: f64,
}

impl BenchLine {
    /// Validates `path` against `cal` and fills in the gate statistics.
    pub fn new(cal: &DeviceCalibration, path: [usize; 5]) -> Result<Self, CalibrationError> {
        let invalid = || CalibrationError::InvalidLine(path.to_vec());
        let distinct: BTreeSet<_> = path.iter().collect();
        if distinct.len() != 5 || path.iter().any(|&q| q >= cal.qubit_count()) {
            return Err(invalid());
        }
        let mut errors = [0.0; 4];
        for (k, pair) in path.windows(2).enumerate() {
            errors[k] = cal.cx(pair[0], pair[1]).ok_or_else(invalid)?.error;
        }
        let qubits = if path[4] < path[0] {
            let mut p = path;
            p.reverse();
            p
        } else {
            path
        };
        Ok(Self {
            qubits,
            max_cx_center: errors[1].max(errors[2]),
            max_cx_all: errors.iter().copied().fold(0.0, f64::max),
        })
    }

    pub fn center(&self) -> usize {
        self.qubits[2]
    }

    pub fn code_qubits(&self) -> [usize; 3] {
        [self.qubits[0], self.qubits[2], self.qubits[4]]
    }

    pub fn aux_qubits(&self) -> [usize; 2] {
        [self.qubits[1], self.qubits[3]]
    }

    fn uses_broken_gate(&self, cal: &DeviceCalibration) -> bool {
        self.qubits
            .windows(2)
            .any(|p| cal.cx(p[0], p[1]).map_or(true, |g| g.error > MAX_CX_ERROR))
    }
}

/// Every simple five-qubit path centred on `center`, one entry per undirected
/// path, sorted by qubit sequence.
pub fn enumerate_lines(cal: &DeviceCalibration, center: usize) -> Vec<BenchLine> {
    let mut lines = Vec::new();
    if center >= cal.qubit_count() {
        return lines;
    }
    let nbrs = cal.neighbors(center);
    for (i, &left) in nbrs.iter().enumerate() {
        // left < right picks one orientation of each path.
        for &right in &nbrs[i + 1..] {
            for &outer_left in cal.neighbors(left) {
                if outer_left == center || outer_left == right {
                    continue;
                }
                for &outer_right in cal.neighbors(right) {
                    if outer_right == center || outer_right == left || outer_right == outer_left {
                        continue;
                    }
                    let path = [outer_left, left, center, right, outer_right];
                    if let Ok(line) = BenchLine::new(cal, path) {
                        lines.push(line);
                    }
                }
            }
        }
    }
    lines.sort_by_key(|l| l.qubits);
    lines
}

/// Picks the line with the best `cx` gates, or `None` when every candidate
/// uses a gate with error above [`MAX_CX_ERROR`].
pub fn select_line(cal: &DeviceCalibration, candidates: &[BenchLine]) -> Result<Option<BenchLine>, CalibrationError> {
    if let Some(first) = candidates.first() {
        if let Some(other) = candidates.iter().find(|l| l.center() != first.center()) {
            return Err(CalibrationError::MixedCenters(first.center(), other.center()));
        }
    }
    let best = candidates.iter().filter(|l| !l.uses_broken_gate(cal)).min_by(|a, b| {
        a.max_cx_center
            .total_cmp(&b.max_cx_center)
            .then(a.max_cx_all.total_cmp(&b.max_cx_all))
            .then(a.qubits.cmp(&b.qubits))
    });
    Ok(best.cloned())
}

/// Selected line for every qubit (`None` when it cannot be benchmarked).
pub fn plan_device(cal: &DeviceCalibration) -> BTreeMap<usize, Option<BenchLine>> {
    (0..cal.qubit_count())
        .map(|q| {
            let lines = enumerate_lines(cal, q);
            let chosen = select_line(cal, &lines).expect("lines from one centre");
            (q, chosen)
        })
        .collect()
}
